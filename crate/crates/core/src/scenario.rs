//! Scenario documents (TOML), built-in scenarios and result files.
//!
//! A scenario names a flux, a solver, run parameters, roads with initial
//! data and junctions. Roads attach to junctions by id: an incoming road's
//! right end and an outgoing road's left end meet the junction. Unattached
//! ends get Dirichlet ghost cells, by default equal to the adjacent initial
//! density. Segment coordinates are local to each road, from 0 to its length.
//!
//! ```toml
//! name = "merge"
//! solver = "prs"
//!
//! [run]
//! T = 1.0
//! dx = 0.01
//! sample_times = [0.0, 1.0]
//!
//! [[roads]]
//! id = "a"
//! length = 1.0
//! initial = 0.3
//!
//! [[roads]]
//! id = "b"
//! length = 1.0
//! initial = [{ from = 0.0, to = 0.5, rho = 0.1 }, { from = 0.5, to = 1.0, rho = 0.6 }]
//!
//! [[roads]]
//! id = "c"
//! length = 1.0
//! initial = 0.2
//!
//! [[junctions]]
//! id = "J"
//! incoming = ["a", "b"]
//! outgoing = ["c"]
//! A = [[1.0, 1.0]]
//! P = [0.5, 0.5]
//! ```

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{simulate, Junction, Network, Road, RunParams, Trajectory};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::junction::{JunctionSpec, SolverKind};

pub const BUILTINS: [&str; 3] = ["case1", "case2", "case3"];

const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    #[serde(default)]
    pub flux: FluxDecl,
    #[serde(default)]
    pub solver: SolverKind,
    pub run: RunDoc,
    pub roads: Vec<RoadDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub junctions: Vec<JunctionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FluxDecl {
    /// Only `"quadratic"` is recognised.
    Named(String),
    Table {
        table: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
}

impl Default for FluxDecl {
    fn default() -> Self {
        FluxDecl::Named("quadratic".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Default cell size for roads that give neither `cells` nor `dx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_times: Vec<f64>,
}

fn default_cfl() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadDoc {
    pub id: String,
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    pub initial: InitialDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_ghost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_ghost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialDoc {
    Constant(f64),
    Segments(Vec<SegmentDoc>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDoc {
    pub from: f64,
    pub to: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionDoc {
    pub id: String,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    pub dir: PathBuf,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    doc: ScenarioDoc,
    flux: FluxModel,
}

fn scenario_err(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl Scenario {
    pub fn from_doc(doc: ScenarioDoc) -> Result<Self> {
        let flux = match &doc.flux {
            FluxDecl::Named(n) if n == "quadratic" => FluxModel::quadratic(),
            FluxDecl::Named(n) => return Err(scenario_err(format!("flux: unknown flux `{n}` (expected \"quadratic\" or a table)"))),
            FluxDecl::Table { table, lipschitz } => {
                let nodes: Vec<(f64, f64)> = table.iter().map(|[r, f]| (*r, *f)).collect();
                FluxModel::tabulated(&nodes, *lipschitz).map_err(|e| scenario_err(format!("flux: {e}")))?
            }
        };
        let s = Scenario { doc, flux };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let d = &self.doc;
        let run = &d.run;
        if !(run.t_final >= 0.0 && run.t_final.is_finite()) {
            return Err(scenario_err(format!("run: T = {} must be a nonnegative number", run.t_final)));
        }
        if !(run.cfl > 0.0 && run.cfl <= 1.0) {
            return Err(scenario_err(format!("run: cfl = {} must lie in (0, 1]", run.cfl)));
        }
        if let Some(dx) = run.dx {
            if !(dx > 0.0 && dx.is_finite()) {
                return Err(scenario_err(format!("run: dx = {dx} must be positive")));
            }
        }
        if let Some(t) = run.sample_times.iter().find(|t| !(**t >= 0.0 && **t <= run.t_final)) {
            return Err(scenario_err(format!("run: sample time {t} outside [0, T]")));
        }
        if d.roads.is_empty() {
            return Err(scenario_err("no roads defined"));
        }
        let mut ids = HashSet::new();
        for r in &d.roads {
            if !valid_id(&r.id) {
                return Err(scenario_err(format!(
                    "road `{}`: ids may only contain letters, digits, `_`, `-` and `.`",
                    r.id
                )));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(scenario_err(format!("road `{}` is defined twice", r.id)));
            }
            self.road_grid(r)?;
        }
        let mut jids = HashSet::new();
        let mut attached: HashMap<(&str, bool), &str> = HashMap::new();
        for j in &d.junctions {
            let at = |msg: String| scenario_err(format!("junction `{}`: {msg}", j.id));
            if !valid_id(&j.id) {
                return Err(at("ids may only contain letters, digits, `_`, `-` and `.`".into()));
            }
            if !jids.insert(j.id.as_str()) {
                return Err(at("defined twice".into()));
            }
            let (n, m) = (j.incoming.len(), j.outgoing.len());
            if n == 0 || m == 0 {
                return Err(at("needs at least one incoming and one outgoing road".into()));
            }
            if j.a.len() != m {
                return Err(at(format!("A has {} rows, expected {m} (one per outgoing road)", j.a.len())));
            }
            if j.p.len() != n {
                return Err(at(format!("P has {} entries, expected {n} (one per incoming road)", j.p.len())));
            }
            JunctionSpec::new(&j.a, &j.p).map_err(|e| at(e.to_string()))?;
            for (road, right_end) in j.incoming.iter().map(|r| (r, true)).chain(j.outgoing.iter().map(|r| (r, false))) {
                let doc = d
                    .roads
                    .iter()
                    .find(|x| &x.id == road)
                    .ok_or_else(|| at(format!("unknown road `{road}`")))?;
                let side = if right_end { "right" } else { "left" };
                if let Some(prev) = attached.insert((road.as_str(), right_end), j.id.as_str()) {
                    return Err(scenario_err(format!(
                        "road `{road}`: {side} end attached twice (junctions `{prev}` and `{}`)",
                        j.id
                    )));
                }
                let ghost = if right_end { doc.right_ghost } else { doc.left_ghost };
                if ghost.is_some() {
                    return Err(scenario_err(format!(
                        "road `{road}`: {side} end is attached to junction `{}` and also has a ghost density",
                        j.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Cell size and initial cell averages of a road.
    fn road_grid(&self, r: &RoadDoc) -> Result<(f64, Vec<f64>)> {
        let at = |msg: String| scenario_err(format!("road `{}`: {msg}", r.id));
        if !(r.length > 0.0 && r.length.is_finite()) {
            return Err(at(format!("length {} must be positive", r.length)));
        }
        let cells = match (r.cells, r.dx.or(self.doc.run.dx)) {
            (Some(c), _) => c,
            (None, Some(dx)) => {
                if !(dx > 0.0 && dx.is_finite()) {
                    return Err(at(format!("dx = {dx} must be positive")));
                }
                let c = (r.length / dx).round();
                if c < 1.0 || (c * dx - r.length).abs() > GEOMETRY_TOL * r.length {
                    return Err(at(format!("length {} is not a multiple of dx = {dx}", r.length)));
                }
                c as usize
            }
            (None, None) => return Err(at("needs `cells` or `dx` (or a default `dx` under [run])".into())),
        };
        if cells < 2 {
            return Err(at(format!("needs at least 2 cells, got {cells}")));
        }
        let dx = r.length / cells as f64;
        for g in [r.left_ghost, r.right_ghost].into_iter().flatten() {
            if !(0.0..=1.0).contains(&g) {
                return Err(at(format!("ghost density {g} outside [0, 1]")));
            }
        }
        let rho = match &r.initial {
            InitialDoc::Constant(v) => {
                if !(0.0..=1.0).contains(v) {
                    return Err(at(format!("initial density {v} outside [0, 1]")));
                }
                vec![*v; cells]
            }
            InitialDoc::Segments(segs) => {
                if segs.is_empty() {
                    return Err(at("initial segment list is empty".into()));
                }
                let tol = GEOMETRY_TOL * r.length;
                let mut x = 0.0;
                for (k, s) in segs.iter().enumerate() {
                    if (s.from - x).abs() > tol {
                        return Err(at(format!("segment {} starts at {} but the previous one ends at {x}", k + 1, s.from)));
                    }
                    if s.to.partial_cmp(&s.from) != Some(std::cmp::Ordering::Greater) {
                        return Err(at(format!("segment {} is empty or reversed", k + 1)));
                    }
                    if !(0.0..=1.0).contains(&s.rho) {
                        return Err(at(format!("segment {} density {} outside [0, 1]", k + 1, s.rho)));
                    }
                    x = s.to;
                }
                if (x - r.length).abs() > tol {
                    return Err(at(format!("segments end at {x}, expected the road length {}", r.length)));
                }
                (0..cells)
                    .map(|k| {
                        let (a, b) = (k as f64 * dx, (k + 1) as f64 * dx);
                        if let Some(s) = segs.iter().find(|s| s.from <= a && b <= s.to) {
                            return s.rho;
                        }
                        let mass: f64 = segs
                            .iter()
                            .map(|s| s.rho * (b.min(s.to) - a.max(s.from)).max(0.0))
                            .sum();
                        (mass / dx).clamp(0.0, 1.0)
                    })
                    .collect()
            }
        };
        Ok((dx, rho))
    }

    /// Parses a scenario, or the scenario echoed inside a run manifest.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| scenario_err(e.to_string()))?;
        let doc: ScenarioDoc = if table.contains_key("manifest") {
            let inner = table
                .get("scenario")
                .cloned()
                .ok_or_else(|| scenario_err("manifest has no [scenario] table"))?;
            inner.try_into().map_err(|e: toml::de::Error| scenario_err(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| scenario_err(e.to_string()))?
        };
        Self::from_doc(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Scenario(msg) => scenario_err(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.doc).expect("scenario documents always serialise")
    }

    pub fn doc(&self) -> &ScenarioDoc {
        &self.doc
    }

    pub fn name(&self) -> &str {
        &self.doc.name
    }

    pub fn flux(&self) -> &FluxModel {
        &self.flux
    }

    pub fn solver(&self) -> SolverKind {
        self.doc.solver
    }

    pub fn output_dir(&self) -> Option<&Path> {
        self.doc.output.as_ref().map(|o| o.dir.as_path())
    }

    pub fn run_params(&self) -> RunParams {
        RunParams {
            t_final: self.doc.run.t_final,
            cfl: self.doc.run.cfl,
            sample_times: self.doc.run.sample_times.clone(),
        }
    }

    fn modified(&self, f: impl FnOnce(&mut ScenarioDoc)) -> Result<Self> {
        let mut doc = self.doc.clone();
        f(&mut doc);
        Self::from_doc(doc)
    }

    pub fn with_solver(&self, solver: SolverKind) -> Result<Self> {
        self.modified(|d| d.solver = solver)
    }

    /// Uses cell size `dx` on every road.
    pub fn with_dx(&self, dx: f64) -> Result<Self> {
        self.modified(|d| {
            d.run.dx = Some(dx);
            for r in &mut d.roads {
                r.cells = None;
                r.dx = None;
            }
        })
    }

    /// Changes the final time, dropping sample times beyond it.
    pub fn with_final_time(&self, t: f64) -> Result<Self> {
        self.modified(|d| {
            d.run.t_final = t;
            d.run.sample_times.retain(|&s| s <= t);
        })
    }

    pub fn with_cfl(&self, cfl: f64) -> Result<Self> {
        self.modified(|d| d.run.cfl = cfl)
    }

    /// Builds the discretised network at `t = 0`.
    pub fn network(&self) -> Result<Network> {
        let mut roads = Vec::with_capacity(self.doc.roads.len());
        for r in &self.doc.roads {
            let (dx, rho) = self.road_grid(r)?;
            roads.push(Road::new(r.id.clone(), dx, rho).with_ghosts(r.left_ghost, r.right_ghost));
        }
        let index: HashMap<&str, usize> = self.doc.roads.iter().enumerate().map(|(k, r)| (r.id.as_str(), k)).collect();
        let junctions = self
            .doc
            .junctions
            .iter()
            .map(|j| {
                Ok(Junction {
                    id: j.id.clone(),
                    spec: JunctionSpec::new(&j.a, &j.p)?,
                    roads: j.incoming.iter().chain(&j.outgoing).map(|r| index[r.as_str()]).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(roads, junctions)
    }

    /// Junction spec and junction-side initial data of junction `id` (the first if `None`).
    pub fn junction_problem(&self, id: Option<&str>) -> Result<(String, JunctionSpec, Vec<f64>)> {
        let net = self.network()?;
        let k = match id {
            None if net.junctions.is_empty() => return Err(scenario_err("scenario has no junctions")),
            None => 0,
            Some(id) => net
                .junctions
                .iter()
                .position(|j| j.id == id)
                .ok_or_else(|| scenario_err(format!("unknown junction `{id}`")))?,
        };
        let j = &net.junctions[k];
        Ok((j.id.clone(), j.spec.clone(), net.junction_data(k)))
    }
}

/// One of the built-in validation networks.
pub fn builtin(name: &str) -> Result<Scenario> {
    let (a, p, data): (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) = match name {
        "case1" => (vec![vec![0.6, 0.0], vec![0.4, 1.0]], vec![0.7, 0.3], vec![0.6, 0.2, 0.85, 0.2]),
        "case2" => (vec![vec![0.5, 0.6], vec![0.5, 0.4]], vec![0.7, 0.3], vec![0.2, 0.6, 0.3, 0.8]),
        "case3" => (
            vec![vec![0.5, 0.6, 0.2], vec![0.5, 0.4, 0.8]],
            vec![0.5, 0.3, 0.2],
            vec![0.2, 0.6, 0.3, 0.8, 0.2],
        ),
        _ => {
            return Err(scenario_err(format!(
                "unknown builtin `{name}` (available: {})",
                BUILTINS.join(", ")
            )))
        }
    };
    let n = p.len();
    let ids: Vec<String> = (1..=data.len()).map(|k| k.to_string()).collect();
    let doc = ScenarioDoc {
        name: name.into(),
        flux: FluxDecl::default(),
        solver: SolverKind::Prs,
        run: RunDoc {
            t_final: 1.0,
            cfl: 1.0,
            dx: Some(0.005),
            sample_times: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        },
        roads: ids
            .iter()
            .zip(&data)
            .map(|(id, &r)| RoadDoc {
                id: id.clone(),
                length: 1.0,
                cells: None,
                dx: None,
                initial: InitialDoc::Constant(r),
                left_ghost: None,
                right_ghost: None,
            })
            .collect(),
        junctions: vec![JunctionDoc {
            id: "J".into(),
            incoming: ids[..n].to_vec(),
            outgoing: ids[n..].to_vec(),
            a,
            p,
        }],
        output: None,
    };
    Scenario::from_doc(doc)
}

/// Runs the scenario with its own solver and parameters.
pub fn run(scenario: &Scenario) -> Result<Trajectory> {
    simulate(scenario.flux(), scenario.network()?, scenario.solver(), &scenario.run_params())
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    manifest: ManifestInfo,
    scenario: ScenarioDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestInfo {
    generator: String,
    version: String,
    solver: SolverKind,
    steps: usize,
    final_time: f64,
    files: Vec<String>,
    grids: Vec<GridInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridInfo {
    road: String,
    cells: usize,
    dx: f64,
    x_origin: f64,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(&path, e))?;
    tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
    Ok(path)
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>, path: &str) -> Result<Vec<u8>> {
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// Writes per-road samples, per-junction flux histories and a manifest into `dir`.
///
/// Files: `road_<id>.csv` (`t,x,rho`, only when samples were requested),
/// `junction_<id>.csv` (`t,dt,Gamma,hbar,q_<road>...`) and `manifest.toml`,
/// which embeds the scenario and can be parsed back with [`Scenario::parse`].
pub fn write_results(traj: &Trajectory, scenario: &Scenario, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let net = &traj.final_state;
    let mut written = Vec::new();
    if !traj.samples.is_empty() {
        for (k, road) in net.roads.iter().enumerate() {
            let name = format!("road_{}.csv", road.id);
            let xs = road.cell_centers();
            let rows = traj.samples.iter().flat_map(|s| {
                let t = num(s.t);
                xs.iter()
                    .zip(&s.rho[k])
                    .map(move |(x, r)| vec![t.clone(), num(*x), num(*r)])
            });
            let header = ["t", "x", "rho"].map(String::from);
            let bytes = csv_bytes(&header, rows, &name)?;
            written.push(write_atomic(dir, &name, &bytes)?);
        }
    }
    for (k, j) in net.junctions.iter().enumerate() {
        let name = format!("junction_{}.csv", j.id);
        let mut header: Vec<String> = ["t", "dt", "Gamma", "hbar"].map(String::from).to_vec();
        header.extend(j.roads.iter().map(|&r| format!("q_{}", net.roads[r].id)));
        let rows = traj.records.iter().map(|rec| {
            let q = &rec.junctions[k];
            let mut row = vec![num(rec.t), num(rec.dt), num(q.gamma()), num(q.hbar)];
            row.extend(q.q_in.iter().chain(&q.q_out).map(|v| num(*v)));
            row
        });
        let bytes = csv_bytes(&header, rows, &name)?;
        written.push(write_atomic(dir, &name, &bytes)?);
    }
    let mut files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    files.push("manifest.toml".into());
    let manifest = Manifest {
        manifest: ManifestInfo {
            generator: "netlwr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            solver: traj.solver,
            steps: traj.records.len(),
            final_time: net.time,
            files,
            grids: net
                .roads
                .iter()
                .map(|r| GridInfo {
                    road: r.id.clone(),
                    cells: r.cells(),
                    dx: r.dx,
                    x_origin: r.x_origin(),
                })
                .collect(),
        },
        scenario: scenario.doc.clone(),
    };
    let text = toml::to_string(&manifest).expect("manifests always serialise");
    written.push(write_atomic(dir, "manifest.toml", text.as_bytes())?);
    Ok(written)
}
