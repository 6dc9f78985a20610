//! Interaction functionals and randomized property checks for junction solvers.
//!
//! A wave hitting a junction in equilibrium changes the total flux `Gamma`,
//! the priority level `hbar` and the flux variation `TV_f`. The functions here
//! measure those changes for single experiments and for randomized sweeps.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{compute_dt, step, Junction, Network, Road};
use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::junction::{JunctionFluxes, JunctionSpec, SolverKind};
use crate::trace::{check_consistency, riemann_solve};

/// Equilibria are compared at this tolerance.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
/// Denominators below this are treated as zero when estimating constants.
const RATIO_FLOOR: f64 = 1e-13;
/// Increases below this are treated as rounding noise.
const NOISE: f64 = 1e-12;

/// Total flux through the junction.
pub fn gamma_functional(fluxes: &JunctionFluxes) -> f64 {
    fluxes.gamma()
}

/// Sum over roads of the total variation of `f` along the given piecewise constant states.
pub fn tv_flux(model: &FluxModel, roads: &[Vec<f64>]) -> Result<f64> {
    let mut tv = 0.0;
    for states in roads {
        for w in states.windows(2) {
            tv += (model.flux(w[1])? - model.flux(w[0])?).abs();
        }
    }
    Ok(tv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Incoming,
    Outgoing,
}

/// Good data are those whose demand (incoming) or supply (outgoing) equals `f_max`.
pub fn is_good_datum(model: &FluxModel, side: Side, rho: f64) -> bool {
    match side {
        Side::Incoming => model.is_good_incoming(rho),
        Side::Outgoing => model.is_good_outgoing(rho),
    }
}

fn slope_below(model: &FluxModel, rho: f64) -> f64 {
    match model.table() {
        None => model.derivative(rho),
        Some(nodes) => {
            let k = nodes.partition_point(|&(x, _)| x < rho).clamp(1, nodes.len() - 1);
            (nodes[k].1 - nodes[k - 1].1) / (nodes[k].0 - nodes[k - 1].0)
        }
    }
}

/// Whether the classical Riemann problem between the far state `new` and the
/// junction-side datum travels entirely towards the junction.
pub fn wave_reaches_junction(model: &FluxModel, side: Side, datum: f64, new: f64) -> Result<bool> {
    let (fd, fnew) = (model.flux(datum)?, model.flux(new)?);
    if new == datum {
        return Ok(true);
    }
    Ok(match side {
        // Left state `new`, right state `datum`; all speeds must be positive.
        Side::Incoming => {
            if new < datum {
                (fd - fnew) / (datum - new) > 0.0
            } else {
                slope_below(model, new) > 0.0
            }
        }
        // Left state `datum`, right state `new`; all speeds must be negative.
        Side::Outgoing => {
            if new > datum {
                (fnew - fd) / (new - datum) < 0.0
            } else {
                model.derivative(new) < 0.0
            }
        }
    })
}

/// Draws a far state whose wave reaches the junction, or `None` if none exists.
pub fn sample_admissible<R: Rng>(model: &FluxModel, side: Side, datum: f64, rng: &mut R) -> Result<Option<f64>> {
    let rc = model.rho_cr();
    match side {
        Side::Incoming => {
            let hi = if datum < rc { rc } else { model.tau(datum)?.min(rc) };
            if hi <= 0.0 {
                return Ok(None);
            }
            Ok(Some(rng.random_range(0.0..hi)))
        }
        Side::Outgoing => {
            let lo = if datum > rc { rc } else { model.tau(datum)?.max(rc) };
            if lo >= 1.0 {
                return Ok(None);
            }
            // (lo, 1]
            Ok(Some(1.0 - rng.random_range(0.0..1.0 - lo)))
        }
    }
}

/// Whether two data sets produce the same junction fluxes when they differ only on good data.
///
/// Fails with a precondition error if a changed road carries a bad datum in either set.
pub fn check_p1(
    model: &FluxModel,
    spec: &JunctionSpec,
    solver: SolverKind,
    base: &[f64],
    perturbed: &[f64],
) -> Result<bool> {
    let n = spec.incoming();
    if base.len() != perturbed.len() {
        return Err(Error::Dimension {
            what: "perturbed junction data",
            expected: base.len(),
            got: perturbed.len(),
        });
    }
    for (k, (&a, &b)) in base.iter().zip(perturbed).enumerate() {
        let side = if k < n { Side::Incoming } else { Side::Outgoing };
        if a != b && !(is_good_datum(model, side, a) && is_good_datum(model, side, b)) {
            return Err(Error::Precondition(format!(
                "road {} changes from {a} to {b} but one of them is a bad datum",
                k + 1
            )));
        }
    }
    let (q0, _) = riemann_solve(model, spec, solver, base)?;
    let (q1, _) = riemann_solve(model, spec, solver, perturbed)?;
    Ok(q0.q_in == q1.q_in && q0.q_out == q1.q_out)
}

/// A wave on road `road` with far state `rho_new` hitting the equilibrium `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionExperiment {
    pub spec: JunctionSpec,
    pub base: Vec<f64>,
    pub road: usize,
    pub rho_new: f64,
}

impl InteractionExperiment {
    /// Checks that `base` is an equilibrium of `solver` and that the wave reaches the junction.
    pub fn new(
        model: &FluxModel,
        solver: SolverKind,
        spec: JunctionSpec,
        base: Vec<f64>,
        road: usize,
        rho_new: f64,
    ) -> Result<Self> {
        let n = spec.incoming();
        if road >= base.len() {
            return Err(Error::Precondition(format!("road index {road} out of range")));
        }
        let (_, trace) = riemann_solve(model, &spec, solver, &base)?;
        if let Some(k) = (0..base.len()).find(|&k| (trace.rho_bar[k] - base[k]).abs() > EQUILIBRIUM_TOL) {
            return Err(Error::Precondition(format!(
                "base data is not an equilibrium: road {} moves from {} to {}",
                k + 1,
                base[k],
                trace.rho_bar[k]
            )));
        }
        let side = if road < n { Side::Incoming } else { Side::Outgoing };
        if !wave_reaches_junction(model, side, base[road], rho_new)? {
            return Err(Error::Precondition(format!(
                "the wave from {rho_new} to {} on road {} does not reach the junction",
                base[road],
                road + 1
            )));
        }
        Ok(InteractionExperiment {
            spec,
            base,
            road,
            rho_new,
        })
    }
}

/// Functionals just before and just after an interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionDeltas {
    pub gamma_before: f64,
    pub gamma_after: f64,
    pub hbar_before: f64,
    pub hbar_after: f64,
    pub tv_before: f64,
    pub tv_after: f64,
    /// `f(rho_new) - f(datum)`: positive for flux-increasing waves.
    pub flux_jump: f64,
}

impl InteractionDeltas {
    pub fn d_gamma(&self) -> f64 {
        self.gamma_after - self.gamma_before
    }

    pub fn d_hbar(&self) -> f64 {
        self.hbar_after - self.hbar_before
    }

    pub fn d_tv(&self) -> f64 {
        self.tv_after - self.tv_before
    }
}

/// Solves the junction before and after the wave arrives and compares the functionals.
///
/// Before the interaction the only wave is the incoming one; afterwards each
/// road carries the wave between its far state and its new trace.
pub fn run_interaction(model: &FluxModel, solver: SolverKind, exp: &InteractionExperiment) -> Result<InteractionDeltas> {
    let n = exp.spec.incoming();
    let (q0, _) = riemann_solve(model, &exp.spec, solver, &exp.base)?;
    let mut pert = exp.base.clone();
    pert[exp.road] = exp.rho_new;
    let (q1, t1) = riemann_solve(model, &exp.spec, solver, &pert)?;

    // States ordered along each road in the direction of travel.
    let order = |k: usize, far: f64, near: f64| if k < n { vec![far, near] } else { vec![near, far] };
    let before: Vec<Vec<f64>> = (0..pert.len()).map(|k| order(k, pert[k], exp.base[k])).collect();
    let after: Vec<Vec<f64>> = (0..pert.len()).map(|k| order(k, pert[k], t1.rho_bar[k])).collect();
    Ok(InteractionDeltas {
        gamma_before: gamma_functional(&q0),
        gamma_after: gamma_functional(&q1),
        hbar_before: q0.hbar,
        hbar_after: q1.hbar,
        tv_before: tv_flux(model, &before)?,
        tv_after: tv_flux(model, &after)?,
        flux_jump: model.flux(exp.rho_new)? - model.flux(exp.base[exp.road])?,
    })
}

/// Largest cell change after one Godunov step from a state equal to the traces.
///
/// Every road is constant at its trace value with matching ghost cells, so a
/// consistent solver leaves the state unchanged up to rounding.
pub fn trace_fixed_point_residual(
    model: &FluxModel,
    spec: &JunctionSpec,
    solver: SolverKind,
    traces: &[f64],
) -> Result<f64> {
    let roads = traces
        .iter()
        .enumerate()
        .map(|(k, &r)| Road::new(k.to_string(), 0.25, vec![r; 4]))
        .collect();
    let junction = Junction {
        id: "J".into(),
        spec: spec.clone(),
        roads: (0..traces.len()).collect(),
    };
    let mut net = Network::new(roads, vec![junction])?;
    let dt = compute_dt(model, &net, 1.0)?;
    step(model, &mut net, solver, dt)?;
    Ok(net
        .roads
        .iter()
        .zip(traces)
        .flat_map(|(road, &r)| road.rho.iter().map(move |&v| (v - r).abs()))
        .fold(0.0, f64::max))
}

fn normalised<R: Rng>(rng: &mut R, len: usize, zero_prob: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..len)
        .map(|_| {
            if zero_prob > 0.0 && rng.random_bool(zero_prob) {
                0.0
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        let k = rng.random_range(0..len);
        w[k] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    // Move the rounding residue onto the largest entry.
    let kmax = (0..len).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
    let rest: f64 = (0..len).filter(|&k| k != kmax).map(|k| w[k]).sum();
    w[kmax] = 1.0 - rest;
    w
}

/// Random junction with `n` incoming and `m` outgoing roads.
///
/// Without `zero_entries` every entry of `A` lies strictly inside `(0, 1)` when `m >= 2`.
pub fn random_spec<R: Rng>(rng: &mut R, n: usize, m: usize, zero_entries: bool) -> JunctionSpec {
    let zero_prob = if zero_entries { 0.35 } else { 0.0 };
    let cols: Vec<Vec<f64>> = (0..n).map(|_| normalised(rng, m, zero_prob)).collect();
    let rows: Vec<Vec<f64>> = (0..m).map(|j| cols.iter().map(|c| c[j]).collect()).collect();
    let p = normalised(rng, n, 0.0);
    JunctionSpec::new(&rows, &p).expect("generated junctions are valid")
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Restricted to the configurations the properties are known for; violations fail the sweep.
    Assert,
    /// Any configuration; violations are only reported.
    ReportOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub incoming: usize,
    pub outgoing: usize,
    pub experiments: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub zero_entries: bool,
    pub mode: SweepMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            incoming: 2,
            outgoing: 2,
            experiments: 10_000,
            seed: 0,
            solver: SolverKind::Prs,
            zero_entries: false,
            mode: SweepMode::Assert,
        }
    }
}

impl SweepConfig {
    fn check(&self) -> Result<()> {
        if self.incoming == 0 || self.outgoing == 0 {
            return Err(Error::Precondition("sweeps need at least one incoming and one outgoing road".into()));
        }
        if self.solver == SolverKind::MaxFlux && self.incoming > self.outgoing {
            return Err(Error::UnsupportedJunction {
                solver: "maxflux",
                incoming: self.incoming,
                outgoing: self.outgoing,
            });
        }
        if self.mode == SweepMode::Assert {
            let ok = self.incoming <= 2
                && self.outgoing == 2
                && !self.zero_entries
                && matches!(self.solver, SolverKind::Prs | SolverKind::Sprs);
            if !ok {
                return Err(Error::Precondition(format!(
                    "assertion mode needs PRS or SPRS on a junction with at most 2 incoming and exactly 2 outgoing \
                     roads and all distribution entries in (0, 1); got {} x {} with {}{} (use report-only mode)",
                    self.incoming,
                    self.outgoing,
                    self.solver,
                    if self.zero_entries { " and zero entries" } else { "" }
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub index: usize,
    pub road: usize,
    pub datum: f64,
    pub rho_new: f64,
    pub deltas: InteractionDeltas,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<ExperimentRow>,
    /// Experiments where no admissible wave existed on any road.
    pub skipped: usize,
    pub increasing: usize,
    pub decreasing: usize,
    /// Smallest `C >= 1` with `dTV <= C min(|df|, |dGamma| + |dhbar|)` over the sweep.
    pub c_tv: f64,
    pub tv_unbounded: usize,
    /// Smallest `C >= 1` with `dhbar <= C |df|`.
    pub c_hbar: f64,
    pub hbar_unbounded: usize,
    /// Smallest `C >= 1` with `dGamma <= C |dhbar|` over flux-decreasing waves.
    pub c_gamma: f64,
    pub gamma_unbounded: usize,
    /// Flux-decreasing waves that raised `hbar` by more than 1e-12.
    pub monotone_violations: usize,
    pub max_decreasing_dhbar: f64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.tv_unbounded == 0 && self.hbar_unbounded == 0 && self.gamma_unbounded == 0 && self.monotone_violations == 0
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        w.write_record(["index", "road", "datum", "rho_new", "flux_jump", "d_gamma", "d_hbar", "d_tv"])
            .map_err(wrap)?;
        for r in &self.rows {
            let d = &r.deltas;
            w.write_record([
                r.index.to_string(),
                (r.road + 1).to_string(),
                format!("{:.16e}", r.datum),
                format!("{:.16e}", r.rho_new),
                format!("{:.16e}", d.flux_jump),
                format!("{:.16e}", d.d_gamma()),
                format!("{:.16e}", d.d_hbar()),
                format!("{:.16e}", d.d_tv()),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "interaction sweep: {} experiments, {} x {} junctions, solver {}, seed {}{}",
            self.rows.len(),
            c.incoming,
            c.outgoing,
            c.solver,
            c.seed,
            if c.zero_entries { ", zero entries allowed" } else { "" }
        )?;
        writeln!(f, "  waves: {} increasing, {} decreasing, {} skipped", self.increasing, self.decreasing, self.skipped)?;
        writeln!(f, "  TV_f bound:        C = {:.6}  (unbounded cases: {})", self.c_tv, self.tv_unbounded)?;
        writeln!(f, "  hbar growth bound: C = {:.6}  (unbounded cases: {})", self.c_hbar, self.hbar_unbounded)?;
        writeln!(f, "  Gamma vs hbar (decreasing waves): C = {:.6}  (unbounded cases: {})", self.c_gamma, self.gamma_unbounded)?;
        write!(
            f,
            "  hbar increases on decreasing waves: {} (max dhbar {:.3e})",
            self.monotone_violations, self.max_decreasing_dhbar
        )
    }
}

fn one_experiment(model: &FluxModel, cfg: &SweepConfig, index: usize) -> Result<Option<ExperimentRow>> {
    let mut rng = rng_for(cfg.seed, index);
    let (n, m) = (cfg.incoming, cfg.outgoing);
    let spec = random_spec(&mut rng, n, m, cfg.zero_entries);
    let data: Vec<f64> = (0..n + m).map(|_| rng.random::<f64>()).collect();
    let (_, trace) = riemann_solve(model, &spec, cfg.solver, &data)?;
    let base = trace.rho_bar;
    let first = rng.random_range(0..n + m);
    for offset in 0..n + m {
        let road = (first + offset) % (n + m);
        let side = if road < n { Side::Incoming } else { Side::Outgoing };
        if let Some(rho_new) = sample_admissible(model, side, base[road], &mut rng)? {
            let exp = InteractionExperiment::new(model, cfg.solver, spec, base.clone(), road, rho_new)?;
            let deltas = run_interaction(model, cfg.solver, &exp)?;
            return Ok(Some(ExperimentRow {
                index,
                road,
                datum: base[road],
                rho_new,
                deltas,
            }));
        }
    }
    Ok(None)
}

/// Runs `config.experiments` random interactions and estimates the constants of the
/// flux-variation and priority-level bounds.
///
/// Experiment `i` draws from its own ChaCha stream, so the report depends only on
/// the seed and not on the thread count.
pub fn check_p2_p3(model: &FluxModel, config: &SweepConfig) -> Result<SweepReport> {
    config.check()?;
    let results: Vec<Option<ExperimentRow>> = (0..config.experiments)
        .into_par_iter()
        .map(|i| one_experiment(model, config, i))
        .collect::<Result<_>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let rows: Vec<ExperimentRow> = results.into_iter().flatten().collect();

    let mut rep = SweepReport {
        config: config.clone(),
        rows: Vec::new(),
        skipped,
        increasing: 0,
        decreasing: 0,
        c_tv: 1.0,
        tv_unbounded: 0,
        c_hbar: 1.0,
        hbar_unbounded: 0,
        c_gamma: 1.0,
        gamma_unbounded: 0,
        monotone_violations: 0,
        max_decreasing_dhbar: f64::NEG_INFINITY,
    };
    for r in &rows {
        let d = &r.deltas;
        let jump = d.flux_jump.abs();
        if d.d_tv() > NOISE {
            let denom = jump.min(d.d_gamma().abs() + d.d_hbar().abs());
            if denom > RATIO_FLOOR {
                rep.c_tv = rep.c_tv.max(d.d_tv() / denom);
            } else {
                rep.tv_unbounded += 1;
            }
        }
        if d.d_hbar() > NOISE {
            if jump > RATIO_FLOOR {
                rep.c_hbar = rep.c_hbar.max(d.d_hbar() / jump);
            } else {
                rep.hbar_unbounded += 1;
            }
        }
        if d.flux_jump > 0.0 {
            rep.increasing += 1;
        } else if d.flux_jump < 0.0 {
            rep.decreasing += 1;
            rep.max_decreasing_dhbar = rep.max_decreasing_dhbar.max(d.d_hbar());
            if d.d_hbar() > NOISE {
                rep.monotone_violations += 1;
            }
            if d.d_gamma() > NOISE {
                if d.d_hbar().abs() > RATIO_FLOOR {
                    rep.c_gamma = rep.c_gamma.max(d.d_gamma() / d.d_hbar().abs());
                } else {
                    rep.gamma_unbounded += 1;
                }
            }
        }
    }
    rep.rows = rows;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub solver: SolverKind,
    pub incoming: usize,
    pub outgoing: usize,
    pub checked: usize,
    /// Data whose traces moved by more than 1e-10 when solved again.
    pub failures: usize,
    /// Largest cell change of a Godunov step started at the traces.
    pub max_fixed_point_residual: f64,
}

impl ConsistencyReport {
    pub fn passed(&self, fixed_point_tol: f64) -> bool {
        self.failures == 0 && self.max_fixed_point_residual <= fixed_point_tol
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "consistency {} {}x{}: {} data sets, {} failures, max fixed-point residual {:.3e}",
            self.solver, self.incoming, self.outgoing, self.checked, self.failures, self.max_fixed_point_residual
        )
    }
}

/// Checks that solving again from the traces reproduces them, over random junctions
/// (half of them with zero distribution entries) and random data.
pub fn consistency_sweep(
    model: &FluxModel,
    solver: SolverKind,
    incoming: usize,
    outgoing: usize,
    experiments: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let results: Vec<(bool, f64)> = (0..experiments)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let spec = random_spec(&mut rng, incoming, outgoing, i % 2 == 1);
            let data: Vec<f64> = (0..incoming + outgoing).map(|_| rng.random::<f64>()).collect();
            let ok = check_consistency(model, &spec, solver, &data)?;
            let (_, trace) = riemann_solve(model, &spec, solver, &data)?;
            let residual = trace_fixed_point_residual(model, &spec, solver, &trace.rho_bar)?;
            Ok((ok, residual))
        })
        .collect::<Result<_>>()?;
    Ok(ConsistencyReport {
        solver,
        incoming,
        outgoing,
        checked: results.len(),
        failures: results.iter().filter(|(ok, _)| !ok).count(),
        max_fixed_point_residual: results.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct P1Report {
    pub solver: SolverKind,
    pub checked: usize,
    pub failures: usize,
}

impl fmt::Display for P1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "good-data invariance {}: {} pairs, {} failures",
            self.solver, self.checked, self.failures
        )
    }
}

/// Random pairs of data differing only on good data; counts pairs whose fluxes differ.
pub fn p1_sweep(
    model: &FluxModel,
    solver: SolverKind,
    incoming: usize,
    outgoing: usize,
    experiments: usize,
    seed: u64,
) -> Result<P1Report> {
    let rc = model.rho_cr();
    let good = |rng: &mut ChaCha8Rng, side: Side| match side {
        Side::Incoming => rc + (1.0 - rc) * rng.random::<f64>(),
        Side::Outgoing => rc * rng.random::<f64>(),
    };
    let results: Vec<bool> = (0..experiments)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let spec = random_spec(&mut rng, incoming, outgoing, i % 2 == 1);
            let total = incoming + outgoing;
            let side = |k: usize| if k < incoming { Side::Incoming } else { Side::Outgoing };
            let mut base: Vec<f64> = (0..total).map(|_| rng.random::<f64>()).collect();
            let forced = rng.random_range(0..total);
            base[forced] = good(&mut rng, side(forced));
            let mut pert = base.clone();
            for k in 0..total {
                if is_good_datum(model, side(k), base[k]) && (k == forced || rng.random_bool(0.5)) {
                    pert[k] = good(&mut rng, side(k));
                }
            }
            check_p1(model, &spec, solver, &base, &pert)
        })
        .collect::<Result<_>>()?;
    Ok(P1Report {
        solver,
        checked: results.len(),
        failures: results.iter().filter(|ok| !**ok).count(),
    })
}
