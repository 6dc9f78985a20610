//! Godunov finite-volume evolution of a road network.
//!
//! Each step solves every junction Riemann problem on the current cell
//! averages, uses the junction fluxes as the boundary fluxes of the adjacent
//! roads and updates all roads with the Godunov scheme. Roads are updated in
//! parallel; junction solves only read the state, so results are independent
//! of the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flux::FluxModel;
use crate::junction::{ConstraintBounds, JunctionFluxes, JunctionSpec, SolverKind};
use crate::trace::{reconstruct, BoundaryTrace};

const RANGE_SLACK: f64 = 1e-12;

/// What a road end is connected to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    /// Dirichlet ghost cell with a fixed density.
    Ghost(f64),
    /// Position `slot` in the data vector of junction `junction` (incoming roads first).
    Junction { junction: usize, slot: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Road {
    pub id: String,
    pub dx: f64,
    pub rho: Vec<f64>,
    pub left: Endpoint,
    pub right: Endpoint,
}

impl Road {
    /// A road with ghost ends equal to its edge cells.
    pub fn new(id: impl Into<String>, dx: f64, rho: Vec<f64>) -> Self {
        let left = Endpoint::Ghost(rho[0]);
        let right = Endpoint::Ghost(rho[rho.len() - 1]);
        Road {
            id: id.into(),
            dx,
            rho,
            left,
            right,
        }
    }

    pub fn with_ghosts(mut self, left: Option<f64>, right: Option<f64>) -> Self {
        if let Some(g) = left {
            self.left = Endpoint::Ghost(g);
        }
        if let Some(g) = right {
            self.right = Endpoint::Ghost(g);
        }
        self
    }

    pub fn cells(&self) -> usize {
        self.rho.len()
    }

    pub fn length(&self) -> f64 {
        self.dx * self.rho.len() as f64
    }

    pub fn mass(&self) -> f64 {
        self.dx * self.rho.iter().sum::<f64>()
    }

    /// Coordinate of the left end: incoming roads end at `x = 0`, others start there.
    pub fn x_origin(&self) -> f64 {
        match self.right {
            Endpoint::Junction { .. } => -self.length(),
            Endpoint::Ghost(_) => 0.0,
        }
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        let x0 = self.x_origin();
        (0..self.rho.len()).map(|k| x0 + (k as f64 + 0.5) * self.dx).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Junction {
    pub id: String,
    pub spec: JunctionSpec,
    /// Road indices, incoming first then outgoing.
    pub roads: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub roads: Vec<Road>,
    pub junctions: Vec<Junction>,
    pub time: f64,
}

impl Network {
    /// Wires junctions to road ends. Each road end may carry at most one junction.
    pub fn new(mut roads: Vec<Road>, junctions: Vec<Junction>) -> Result<Self> {
        if roads.is_empty() {
            return Err(Error::Scenario("network has no roads".into()));
        }
        for r in &roads {
            if r.rho.is_empty() || !(r.dx > 0.0 && r.dx.is_finite()) {
                return Err(Error::Scenario(format!("road `{}` has an empty or invalid grid", r.id)));
            }
            if let Some((k, v)) = r.rho.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Scenario(format!("road `{}` cell {k}: density {v} outside [0, 1]", r.id)));
            }
            for e in [r.left, r.right] {
                if let Endpoint::Ghost(g) = e {
                    if !(0.0..=1.0).contains(&g) {
                        return Err(Error::Scenario(format!("road `{}`: ghost density {g} outside [0, 1]", r.id)));
                    }
                }
            }
        }
        for (k, j) in junctions.iter().enumerate() {
            let n = j.spec.incoming();
            if j.roads.len() != n + j.spec.outgoing() {
                return Err(Error::Scenario(format!(
                    "junction `{}` lists {} roads but its matrix is {} x {}",
                    j.id,
                    j.roads.len(),
                    j.spec.outgoing(),
                    n
                )));
            }
            for (slot, &r) in j.roads.iter().enumerate() {
                let road = roads
                    .get_mut(r)
                    .ok_or_else(|| Error::Scenario(format!("junction `{}` references road index {r}", j.id)))?;
                let end = if slot < n { &mut road.right } else { &mut road.left };
                if let Endpoint::Junction { junction, .. } = *end {
                    let side = if slot < n { "right" } else { "left" };
                    return Err(Error::Scenario(format!(
                        "road `{}`: {side} end attached to junction `{}` and junction `{}`",
                        road.id, junctions[junction].id, j.id
                    )));
                }
                *end = Endpoint::Junction { junction: k, slot };
            }
        }
        Ok(Network {
            roads,
            junctions,
            time: 0.0,
        })
    }

    /// Junction-side cell averages, incoming roads first.
    pub fn junction_data(&self, k: usize) -> Vec<f64> {
        let j = &self.junctions[k];
        let n = j.spec.incoming();
        j.roads
            .iter()
            .enumerate()
            .map(|(slot, &r)| {
                let rho = &self.roads[r].rho;
                if slot < n {
                    rho[rho.len() - 1]
                } else {
                    rho[0]
                }
            })
            .collect()
    }

    pub fn min_dx(&self) -> f64 {
        self.roads.iter().map(|r| r.dx).fold(f64::INFINITY, f64::min)
    }
}

/// Godunov flux between states `u` (left) and `v` (right).
#[inline]
pub fn godunov_flux(model: &FluxModel, u: f64, v: f64) -> f64 {
    model.demand_unchecked(u).min(model.supply_unchecked(v))
}

/// Junction solutions for the current state.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionStates {
    pub fluxes: Vec<JunctionFluxes>,
    pub traces: Vec<BoundaryTrace>,
}

/// Solves every junction Riemann problem on the current cell averages.
pub fn solve_junctions(model: &FluxModel, network: &Network, solver: SolverKind) -> Result<JunctionStates> {
    let mut fluxes = Vec::with_capacity(network.junctions.len());
    let mut traces = Vec::with_capacity(network.junctions.len());
    for (k, j) in network.junctions.iter().enumerate() {
        let data = network.junction_data(k);
        let bounds = ConstraintBounds::from_data(model, &j.spec, &data)?;
        let q = solver.solve(&j.spec, &bounds)?;
        traces.push(reconstruct(model, &data, &q)?);
        fluxes.push(q);
    }
    Ok(JunctionStates { fluxes, traces })
}

fn max_speed(model: &FluxModel, network: &Network, traces: &[BoundaryTrace]) -> f64 {
    let speed = |r: f64| model.derivative(r).abs();
    let mut s: f64 = 0.0;
    for road in &network.roads {
        s = road.rho.iter().fold(s, |a, &r| a.max(speed(r)));
        for e in [road.left, road.right] {
            if let Endpoint::Ghost(g) = e {
                s = s.max(speed(g));
            }
        }
    }
    for t in traces {
        s = t.rho_bar.iter().fold(s, |a, &r| a.max(speed(r)));
    }
    s
}

fn dt_for_speed(model: &FluxModel, network: &Network, speed: f64, safety: f64) -> f64 {
    let speed = if speed > 1e-12 * model.lipschitz_bound() {
        speed
    } else {
        model.lipschitz_bound()
    };
    safety * 0.5 * network.min_dx() / speed
}

/// `safety * dx_min / (2 max|f'|)` over cells and ghost values.
///
/// A junction trace may take any density, so networks with junctions use the
/// Lipschitz bound of the flux. The result is always accepted by [`step`].
pub fn compute_dt(model: &FluxModel, network: &Network, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Precondition(format!("CFL safety factor {safety} not in (0, 1]")));
    }
    let mut speed = max_speed(model, network, &[]);
    if !network.junctions.is_empty() {
        speed = speed.max(model.lipschitz_bound());
    }
    Ok(dt_for_speed(model, network, speed, safety))
}

/// Like [`compute_dt`], but also bounding the speed at the junction traces.
pub fn stable_dt(model: &FluxModel, network: &Network, states: &JunctionStates, safety: f64) -> f64 {
    dt_for_speed(model, network, max_speed(model, network, &states.traces), safety)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeStepRecord {
    /// Time at the start of the step.
    pub t: f64,
    pub dt: f64,
    pub junctions: Vec<JunctionFluxes>,
    /// Per road, the fluxes through its left and right ends.
    pub boundary: Vec<[f64; 2]>,
}

/// Advances the network by `dt` using already solved junction states.
pub fn advance(model: &FluxModel, network: &mut Network, states: &JunctionStates, dt: f64) -> Result<TimeStepRecord> {
    let bound = stable_dt(model, network, states, 1.0);
    if !(dt >= 0.0 && dt <= bound * (1.0 + 1e-12)) {
        return Err(Error::Cfl { dt, bound });
    }
    let edge = |e: Endpoint, fallback: f64, left: bool| -> f64 {
        match e {
            Endpoint::Ghost(g) => {
                if left {
                    godunov_flux(model, g, fallback)
                } else {
                    godunov_flux(model, fallback, g)
                }
            }
            Endpoint::Junction { junction, slot } => {
                let q = &states.fluxes[junction];
                if slot < q.q_in.len() {
                    q.q_in[slot]
                } else {
                    q.q_out[slot - q.q_in.len()]
                }
            }
        }
    };
    let boundary: Vec<[f64; 2]> = network
        .roads
        .iter()
        .map(|r| [edge(r.left, r.rho[0], true), edge(r.right, r.rho[r.rho.len() - 1], false)])
        .collect();

    network
        .roads
        .par_iter_mut()
        .zip(boundary.par_iter())
        .try_for_each(|(road, &[f_left, f_right])| update_road(model, road, f_left, f_right, dt))?;

    let record = TimeStepRecord {
        t: network.time,
        dt,
        junctions: states.fluxes.clone(),
        boundary,
    };
    network.time += dt;
    Ok(record)
}

fn update_road(model: &FluxModel, road: &mut Road, f_left: f64, f_right: f64, dt: f64) -> Result<()> {
    let lambda = dt / road.dx;
    let u = &mut road.rho;
    let m = u.len();
    // Interface fluxes F[k] between cells k-1 and k.
    let mut flux = Vec::with_capacity(m + 1);
    flux.push(f_left);
    flux.extend(u.windows(2).map(|w| godunov_flux(model, w[0], w[1])));
    flux.push(f_right);
    for k in 0..m {
        let v = u[k] - lambda * (flux[k + 1] - flux[k]);
        if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
            return Err(Error::MaximumPrinciple {
                road: road.id.clone(),
                cell: k,
                value: v,
            });
        }
        u[k] = v.clamp(0.0, 1.0);
    }
    Ok(())
}

/// One Godunov step of length `dt`; fails if `dt` violates the CFL bound.
pub fn step(model: &FluxModel, network: &mut Network, solver: SolverKind, dt: f64) -> Result<TimeStepRecord> {
    let states = solve_junctions(model, network, solver)?;
    advance(model, network, &states, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub t_final: f64,
    /// Safety factor in `(0, 1]` applied to the stable time step.
    pub cfl: f64,
    pub sample_times: Vec<f64>,
}

/// Mass bookkeeping of a single road.
#[derive(Debug, Clone, PartialEq)]
pub struct MassLedger {
    pub road: String,
    pub initial: f64,
    pub current: f64,
    pub inflow: f64,
    pub outflow: f64,
}

impl MassLedger {
    /// `current - initial - (inflow - outflow)`.
    pub fn residual(&self) -> f64 {
        self.current - self.initial - (self.inflow - self.outflow)
    }

    pub fn relative_residual(&self) -> f64 {
        let scale = self.initial.abs().max(self.current.abs()).max(self.inflow + self.outflow);
        if scale > 0.0 {
            self.residual().abs() / scale
        } else {
            self.residual().abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Requested time.
    pub requested: f64,
    /// Time of the stored state (the first step at or after `requested`).
    pub t: f64,
    pub rho: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub solver: SolverKind,
    pub samples: Vec<Sample>,
    pub records: Vec<TimeStepRecord>,
    pub mass: Vec<MassLedger>,
    pub final_state: Network,
}

/// Evolves `network` to `params.t_final`.
pub fn simulate(model: &FluxModel, mut network: Network, solver: SolverKind, params: &RunParams) -> Result<Trajectory> {
    let t_final = params.t_final;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::Precondition(format!("final time {t_final} must be nonnegative")));
    }
    if !(params.cfl > 0.0 && params.cfl <= 1.0) {
        return Err(Error::Precondition(format!("CFL safety factor {} not in (0, 1]", params.cfl)));
    }
    for j in &network.junctions {
        solver.supports(&j.spec)?;
    }
    let mut times = params.sample_times.clone();
    times.sort_by(f64::total_cmp);
    let mut mass: Vec<MassLedger> = network
        .roads
        .iter()
        .map(|r| MassLedger {
            road: r.id.clone(),
            initial: r.mass(),
            current: r.mass(),
            inflow: 0.0,
            outflow: 0.0,
        })
        .collect();
    let mut samples = Vec::with_capacity(times.len());
    let mut records = Vec::new();
    let mut next = 0;
    let eps = 1e-12 * t_final.max(1.0);
    loop {
        while next < times.len() && network.time >= times[next] - eps {
            samples.push(Sample {
                requested: times[next],
                t: network.time,
                rho: network.roads.iter().map(|r| r.rho.clone()).collect(),
            });
            next += 1;
        }
        if network.time >= t_final {
            break;
        }
        let states = solve_junctions(model, &network, solver)?;
        let mut dt = stable_dt(model, &network, &states, params.cfl);
        let last = network.time + dt >= t_final - eps;
        if last {
            dt = dt.min(t_final - network.time);
        }
        let rec = advance(model, &mut network, &states, dt)?;
        if last {
            network.time = t_final;
        }
        for ((ledger, road), [fl, fr]) in mass.iter_mut().zip(&network.roads).zip(&rec.boundary) {
            ledger.inflow += dt * fl;
            ledger.outflow += dt * fr;
            ledger.current = road.mass();
        }
        records.push(rec);
    }
    Ok(Trajectory {
        solver,
        samples,
        records,
        mass,
        final_state: network,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(rho: Vec<f64>) -> Network {
        let dx = 1.0 / rho.len() as f64;
        Network::new(vec![Road::new("r", dx, rho)], vec![]).unwrap()
    }

    fn case1() -> Network {
        let spec = JunctionSpec::new(&[vec![0.6, 0.0], vec![0.4, 1.0]], &[0.7, 0.3]).unwrap();
        let roads = [0.6, 0.2, 0.85, 0.2]
            .iter()
            .enumerate()
            .map(|(k, &r)| Road::new((k + 1).to_string(), 0.005, vec![r; 200]))
            .collect();
        let j = Junction {
            id: "J".into(),
            spec,
            roads: vec![0, 1, 2, 3],
        };
        Network::new(roads, vec![j]).unwrap()
    }

    #[test]
    fn godunov_flux_cases() {
        let m = FluxModel::quadratic();
        assert_eq!(godunov_flux(&m, 0.2, 0.2), 0.2 * 0.8);
        assert_eq!(godunov_flux(&m, 0.2, 0.8), m.flux(0.2).unwrap().min(m.flux(0.8).unwrap()));
        assert_eq!(godunov_flux(&m, 0.8, 0.2), 0.25);
        assert_eq!(godunov_flux(&m, 0.3, 0.9), m.flux(0.9).unwrap());
    }

    #[test]
    fn dt_from_full_range_state() {
        let m = FluxModel::quadratic();
        let rho: Vec<f64> = (0..100).map(|k| k as f64 / 99.0).collect();
        let net = single(rho);
        assert!((compute_dt(&m, &net, 1.0).unwrap() - 0.005).abs() < 1e-15);
        assert!(compute_dt(&m, &net, 1.5).is_err());
    }

    #[test]
    fn uniform_sonic_state_uses_lipschitz_bound() {
        let m = FluxModel::quadratic();
        let net = single(vec![0.5; 10]);
        assert!((compute_dt(&m, &net, 1.0).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let m = FluxModel::quadratic();
        let mut net = single(vec![0.1; 10]);
        let dt = compute_dt(&m, &net, 1.0).unwrap();
        assert!(matches!(
            step(&m, &mut net, SolverKind::Prs, 2.0 * dt),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn constant_state_is_preserved() {
        let m = FluxModel::quadratic();
        let mut net = single(vec![0.3; 20]);
        let dt = compute_dt(&m, &net, 1.0).unwrap();
        for _ in 0..10 {
            step(&m, &mut net, SolverKind::Prs, dt).unwrap();
        }
        assert!(net.roads[0].rho.iter().all(|&r| r == 0.3));
    }

    #[test]
    fn case1_first_step_drains_road_one() {
        let m = FluxModel::quadratic();
        let mut net = case1();
        let dt = compute_dt(&m, &net, 1.0).unwrap();
        let rec = step(&m, &mut net, SolverKind::Prs, dt).unwrap();
        let r1 = &net.roads[0].rho;
        assert!(r1[199] > 0.6, "outflow 0.2125 below inflow 0.24 must raise the density");
        assert!((rec.boundary[0][1] - 0.2125).abs() < 1e-15);
        let into = rec.boundary[2][0] + rec.boundary[3][0];
        let out = rec.boundary[0][1] + rec.boundary[1][1];
        assert!((into - out).abs() <= 1e-15);
    }

    #[test]
    fn discrete_conservation_per_step() {
        let m = FluxModel::quadratic();
        let mut net = case1();
        for _ in 0..50 {
            let before: Vec<f64> = net.roads.iter().map(Road::mass).collect();
            let states = solve_junctions(&m, &net, SolverKind::Sprs).unwrap();
            let dt = stable_dt(&m, &net, &states, 0.9);
            let rec = advance(&m, &mut net, &states, dt).unwrap();
            for (k, r) in net.roads.iter().enumerate() {
                let [fl, fr] = rec.boundary[k];
                assert!((r.mass() - before[k] - dt * (fl - fr)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn double_attachment_is_rejected() {
        let spec = JunctionSpec::new(&[vec![1.0]], &[1.0]).unwrap();
        let roads = vec![Road::new("a", 0.1, vec![0.1; 10]), Road::new("b", 0.1, vec![0.1; 10])];
        let js = vec![
            Junction { id: "J1".into(), spec: spec.clone(), roads: vec![0, 1] },
            Junction { id: "J2".into(), spec, roads: vec![0, 1] },
        ];
        let err = Network::new(roads, js).unwrap_err().to_string();
        assert!(err.contains("`a`") && err.contains("J2"), "{err}");
    }

    #[test]
    fn simulate_samples_and_final_time() {
        let m = FluxModel::quadratic();
        let params = RunParams {
            t_final: 0.3,
            cfl: 1.0,
            sample_times: vec![0.1, 0.0, 0.3],
        };
        let traj = simulate(&m, case1(), SolverKind::Prs, &params).unwrap();
        assert_eq!(traj.samples.len(), 3);
        assert_eq!(traj.samples[0].t, 0.0);
        assert!(traj.samples[1].t >= 0.1);
        assert_eq!(traj.final_state.time, 0.3);
        let total: f64 = traj.records.iter().map(|r| r.dt).sum();
        assert!((total - 0.3).abs() < 1e-12);
        for l in &traj.mass {
            assert!(l.relative_residual() < 1e-12, "{l:?}");
        }
    }

    #[test]
    fn maxflux_rejects_merge_network() {
        let m = FluxModel::quadratic();
        let spec = JunctionSpec::new(&[vec![1.0, 1.0]], &[0.5, 0.5]).unwrap();
        let roads = (0..3).map(|k| Road::new(k.to_string(), 0.1, vec![0.2; 10])).collect();
        let net = Network::new(roads, vec![Junction { id: "J".into(), spec, roads: vec![0, 1, 2] }]).unwrap();
        let params = RunParams { t_final: 0.1, cfl: 1.0, sample_times: vec![] };
        assert!(matches!(
            simulate(&m, net, SolverKind::MaxFlux, &params),
            Err(Error::UnsupportedJunction { .. })
        ));
    }
}
