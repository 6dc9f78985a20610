use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use netlwr_core::diagnostics::{check_p2_p3, consistency_sweep, p1_sweep, SweepConfig, SweepMode};
use netlwr_core::flux::FluxModel;
use netlwr_core::junction::{solve_prs_traced, solve_sprs_traced, Binding, RecursionStep};
use netlwr_core::scenario::{builtin, run, write_results};
use netlwr_core::trace::riemann_solve;
use netlwr_core::{ConstraintBounds, Error, JunctionSpec, Scenario, SolverKind, Trajectory};

use crate::args::{CompareArgs, GridArgs, RiemannArgs, RunArgs, SourceArgs, VerifyArgs};

// Output helpers that ignore write errors such as a closed pipe.
macro_rules! emit {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($t)*);
    }};
}

macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// A failed command with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const USAGE: u8 = 1;
pub const INPUT: u8 = 2;
pub const RUNTIME: u8 = 3;

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { INPUT } else { RUNTIME };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn load_source(source: &SourceArgs) -> Result<Scenario, Failure> {
    match (&source.builtin, &source.scenario) {
        (Some(name), _) => builtin(name).map_err(|e| Failure::new(INPUT, e.to_string())),
        (None, Some(path)) => Scenario::load(path).map_err(|e| Failure::new(INPUT, e.to_string())),
        (None, None) => Err(Failure::new(USAGE, "one of --builtin or --scenario is required")),
    }
}

fn apply_grid(mut s: Scenario, grid: &GridArgs) -> Result<Scenario, Failure> {
    if let Some(dx) = grid.dx {
        s = s.with_dx(dx)?;
    }
    if let Some(t) = grid.t_final {
        s = s.with_final_time(t)?;
    }
    if let Some(cfl) = grid.cfl {
        s = s.with_cfl(cfl)?;
    }
    Ok(s)
}

fn output_dir(flag: &Option<PathBuf>, scenario: Option<&Scenario>, fallback: &str) -> PathBuf {
    flag.clone()
        .or_else(|| scenario.and_then(|s| s.output_dir().map(Path::to_path_buf)))
        .unwrap_or_else(|| Path::new("results").join(fallback))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
    format!("[{}]", parts.join(", "))
}

fn junction_ids(s: &Scenario) -> Vec<String> {
    s.doc().junctions.iter().map(|j| j.id.clone()).collect()
}

fn junction_roads(s: &Scenario, k: usize) -> Vec<String> {
    let j = &s.doc().junctions[k];
    j.incoming.iter().chain(&j.outgoing).cloned().collect()
}

pub fn cmd_run(args: &RunArgs) -> CmdResult {
    let mut scenario = apply_grid(load_source(&args.source)?, &args.grid)?;
    if let Some(solver) = args.solver {
        scenario = scenario.with_solver(solver)?;
    }
    let out = output_dir(&args.out, Some(&scenario), scenario.name());
    let traj = run(&scenario)?;
    let files = write_results(&traj, &scenario, &out).map_err(|e| Failure::new(RUNTIME, e.to_string()))?;
    emit!("{}", run_summary(&scenario, &traj));
    say!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn run_summary(scenario: &Scenario, traj: &Trajectory) -> String {
    let mut s = String::new();
    let net = &traj.final_state;
    let _ = writeln!(
        s,
        "scenario {} | solver {} | {} steps | T = {}",
        scenario.name(),
        traj.solver,
        traj.records.len(),
        net.time
    );
    let Some(last) = traj.records.last() else {
        return s;
    };
    for (k, id) in junction_ids(scenario).iter().enumerate() {
        let q = &last.junctions[k];
        let _ = writeln!(
            s,
            "junction {id}: Gamma = {:.12}, hbar = {:.12}, q_in = {}, q_out = {}",
            q.gamma(),
            q.hbar,
            fmt_vec(&q.q_in),
            fmt_vec(&q.q_out)
        );
    }
    for ((road, [fl, fr]), ledger) in net.roads.iter().zip(&last.boundary).zip(&traj.mass) {
        let _ = writeln!(
            s,
            "road {}: boundary flux left {fl:.12}, right {fr:.12}; mass {:.12} (residual {:.1e})",
            road.id,
            ledger.current,
            ledger.residual()
        );
    }
    s
}

pub fn cmd_compare(args: &CompareArgs) -> CmdResult {
    if args.solvers.is_empty() {
        return Err(Failure::new(USAGE, "--solvers needs at least one solver"));
    }
    let scenario = apply_grid(load_source(&args.source)?, &args.grid)?;
    let model = scenario.flux().clone();
    let ids = junction_ids(&scenario);
    let problems = ids
        .iter()
        .map(|id| scenario.junction_problem(Some(id)))
        .collect::<Result<Vec<_>, _>>()?;
    for &solver in &args.solvers {
        for (id, spec, _) in &problems {
            solver
                .supports(spec)
                .map_err(|e| Failure::new(INPUT, format!("junction `{id}`: {e}")))?;
        }
    }

    struct Column {
        solver: SolverKind,
        traj: Trajectory,
        traces: Vec<Option<f64>>,
    }
    let network = scenario.network()?;
    let road_index = |id: &str| network.roads.iter().position(|r| r.id == id).expect("road of junction");
    let mut columns = Vec::new();
    for &solver in &args.solvers {
        let traj = run(&scenario.with_solver(solver)?)?;
        let mut traces = vec![None; network.roads.len()];
        for (k, (_, spec, data)) in problems.iter().enumerate() {
            let (_, t) = riemann_solve(&model, spec, solver, data)?;
            for (road, rho) in junction_roads(&scenario, k).iter().zip(t.rho_bar) {
                traces[road_index(road)] = Some(rho);
            }
        }
        columns.push(Column { solver, traj, traces });
    }

    let reference = &columns[0].traj.final_state;
    let mut csv = String::from("solver,road,flux_left,flux_right,trace,l1_gap\n");
    say!("scenario {} | T = {} | reference solver {}", scenario.name(), reference.time, columns[0].solver);
    for (r, road) in network.roads.iter().enumerate() {
        say!("road {}:", road.id);
        for c in &columns {
            let [fl, fr] = c.traj.records.last().map_or([0.0, 0.0], |rec| rec.boundary[r]);
            let rho = &c.traj.final_state.roads[r].rho;
            let gap: f64 = rho
                .iter()
                .zip(&reference.roads[r].rho)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                * road.dx;
            let trace = c.traces[r].map_or(String::new(), |t| format!("{t:.12}"));
            say!(
                "  {:<8} flux left {fl:.12} right {fr:.12} | trace {:<14} | L1 gap {gap:.6e}",
                c.solver.name(),
                if trace.is_empty() { "-" } else { &trace }
            );
            let _ = writeln!(csv, "{},{},{fl:.16e},{fr:.16e},{trace},{gap:.16e}", c.solver.name(), road.id);
        }
    }
    let out = output_dir(&args.out, Some(&scenario), &format!("{}-compare", scenario.name()));
    let path = out.join("compare.csv");
    fs::create_dir_all(&out)
        .and_then(|_| fs::write(&path, csv))
        .map_err(|e| Failure::new(RUNTIME, format!("{}: {e}", path.display())))?;
    say!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let model = FluxModel::quadratic();
    let mode = if args.report_only {
        SweepMode::ReportOnly
    } else {
        SweepMode::Assert
    };
    let config = SweepConfig {
        incoming: args.incoming,
        outgoing: args.outgoing,
        experiments: args.sweeps,
        seed: args.seed,
        solver: args.solver,
        zero_entries: args.zero_entries,
        mode,
    };
    let interactions = check_p2_p3(&model, &config).map_err(|e| match e {
        Error::Precondition(msg) => Failure::new(USAGE, msg),
        e => e.into(),
    })?;
    let p1 = p1_sweep(&model, args.solver, args.incoming, args.outgoing, args.sweeps, args.seed)?;
    let consistency = consistency_sweep(&model, args.solver, args.incoming, args.outgoing, args.sweeps, args.seed)?;

    let summary = format!("{interactions}\n{p1}\n{consistency}\n");
    emit!("{summary}");
    let out = output_dir(&args.out, None, "verify");
    let csv = out.join("interactions.csv");
    fs::create_dir_all(&out).map_err(|e| Failure::new(RUNTIME, format!("{}: {e}", out.display())))?;
    interactions.write_csv(&csv)?;
    let summary_path = out.join("summary.txt");
    fs::write(&summary_path, &summary).map_err(|e| Failure::new(RUNTIME, format!("{}: {e}", summary_path.display())))?;
    say!("wrote {} and {}", csv.display(), summary_path.display());

    let passed = interactions.passed() && p1.failures == 0 && consistency.passed(args.fixed_point_tol);
    if mode == SweepMode::Assert && !passed {
        return Err(Failure::new(RUNTIME, "verification failed"));
    }
    Ok(())
}

fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>, Failure> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::new(INPUT, format!("--matrix: `{}` is not a number", x.trim())))
                })
                .collect()
        })
        .collect()
}

/// A junction problem for the riemann command.
struct Problem {
    spec: JunctionSpec,
    data: Vec<f64>,
    model: FluxModel,
    labels: Vec<String>,
    solver: Option<SolverKind>,
}

fn riemann_problem(args: &RiemannArgs) -> Result<Problem, Failure> {
    if let Some(matrix) = &args.matrix {
        let rows = parse_matrix(matrix)?;
        let p = args.priority.clone().unwrap_or_default();
        let data = args.data.clone().unwrap_or_default();
        let spec = JunctionSpec::new(&rows, &p)?;
        let labels = (1..=spec.incoming() + spec.outgoing()).map(|k| k.to_string()).collect();
        return Ok(Problem {
            spec,
            data,
            model: FluxModel::quadratic(),
            labels,
            solver: None,
        });
    }
    let scenario = load_source(&SourceArgs {
        builtin: args.builtin.clone(),
        scenario: args.scenario.clone(),
    })?;
    let (id, spec, data) = scenario.junction_problem(args.junction.as_deref())?;
    let k = junction_ids(&scenario).iter().position(|j| *j == id).expect("junction id");
    let labels = junction_roads(&scenario, k);
    Ok(Problem {
        spec,
        data,
        model: scenario.flux().clone(),
        labels,
        solver: Some(scenario.solver()),
    })
}

fn describe_step(k: usize, step: &RecursionStep, labels: &[String], n: usize) -> String {
    let name = |local: usize| labels[local].as_str();
    let h_in: Vec<String> = step
        .h_in
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.map(|h| format!("h_{} = {h:.12}", name(i))))
        .collect();
    let h_out: Vec<String> = step
        .h_out
        .iter()
        .enumerate()
        .map(|(j, h)| format!("h_{} = {h:.12}", name(n + j)))
        .collect();
    let binding = match &step.binding {
        Binding::Supply(js) => format!("supply of road {}", js.iter().map(|&j| name(n + j)).collect::<Vec<_>>().join(", ")),
        Binding::Demand(is) => format!("demand of road {}", is.iter().map(|&i| name(i)).collect::<Vec<_>>().join(", ")),
    };
    let fixed: Vec<&str> = step.fixed.iter().map(|&i| name(i)).collect();
    format!(
        "step {}: level {:.12} set by {binding}; fixed {{{}}}\n    incoming: {}\n    outgoing: {}\n",
        k + 1,
        step.level,
        fixed.join(", "),
        if h_in.is_empty() { "-".into() } else { h_in.join(", ") },
        h_out.join(", ")
    )
}

pub fn cmd_riemann(args: &RiemannArgs) -> CmdResult {
    let Problem {
        spec,
        data,
        model,
        labels,
        solver,
    } = riemann_problem(args)?;
    let solver = args.solver.or(solver).unwrap_or_default();
    let n = spec.incoming();
    let bounds = ConstraintBounds::from_data(&model, &spec, &data)?;
    let (fluxes, trace) = riemann_solve(&model, &spec, solver, &data)?;

    let mut s = String::new();
    let _ = writeln!(s, "solver {solver} | {} incoming, {} outgoing", n, spec.outgoing());
    let _ = writeln!(s, "gamma_in  = {}", fmt_vec(&bounds.gamma_in));
    let _ = writeln!(s, "gamma_out = {}", fmt_vec(&bounds.gamma_out));
    let steps = match solver {
        SolverKind::Prs => Some(solve_prs_traced(&spec, &bounds).1),
        SolverKind::Sprs => Some(solve_sprs_traced(&spec, &bounds).1),
        SolverKind::MaxFlux => None,
    };
    match steps {
        Some(steps) => {
            for (k, step) in steps.iter().enumerate() {
                s.push_str(&describe_step(k, step, &labels, n));
            }
        }
        None => s.push_str("maximum-flux vertex enumeration (no recursion)\n"),
    }
    let _ = writeln!(s, "Q    = {}", fmt_vec(&fluxes.q_in));
    let _ = writeln!(s, "A Q  = {}", fmt_vec(&fluxes.q_out));
    let _ = writeln!(s, "hbar = {:.12}", fluxes.hbar);
    let _ = writeln!(s, "Gamma = {:.12}", fluxes.gamma());
    for (k, (rho0, rho)) in data.iter().zip(&trace.rho_bar).enumerate() {
        let note = if rho0 == rho { "kept" } else if *rho > model.rho_cr() { "congested" } else { "free" };
        let _ = writeln!(s, "trace road {}: {rho:.12} (datum {rho0}, {note})", labels[k]);
    }
    emit!("{s}");
    Ok(())
}
