//! Boundary traces at a junction from the solver fluxes.

use crate::error::{Error, Result};
use crate::flux::{Branch, FluxModel};
use crate::junction::{ConstraintBounds, JunctionFluxes, JunctionSpec, SolverKind};

/// A datum whose flux is this close to the junction flux is kept as its own trace.
pub const FLUX_MATCH_TOL: f64 = 1e-10;
const FEASIBILITY_SLACK: f64 = 1e-10;

/// Junction-side densities, incoming roads first.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub rho_bar: Vec<f64>,
}

/// Picks, per road, the density that carries the junction flux and connects to
/// the datum through waves leaving the junction.
pub fn reconstruct(model: &FluxModel, rho0: &[f64], fluxes: &JunctionFluxes) -> Result<BoundaryTrace> {
    let n = fluxes.q_in.len();
    if rho0.len() != n + fluxes.q_out.len() {
        return Err(Error::Dimension {
            what: "junction data",
            expected: n + fluxes.q_out.len(),
            got: rho0.len(),
        });
    }
    let targets = fluxes.q_in.iter().chain(&fluxes.q_out);
    let mut rho_bar = Vec::with_capacity(rho0.len());
    for (k, (&r, &gamma)) in rho0.iter().zip(targets).enumerate() {
        let incoming = k < n;
        let bound = if incoming { model.demand(r)? } else { model.supply(r)? };
        if !(gamma >= -FEASIBILITY_SLACK && gamma <= bound + FEASIBILITY_SLACK) {
            let side = if incoming { "demand" } else { "supply" };
            return Err(Error::Contract(format!(
                "flux {gamma} on junction road {} exceeds its {side} {bound}",
                k + 1
            )));
        }
        let rb = if (model.flux(r)? - gamma).abs() <= FLUX_MATCH_TOL {
            r
        } else if incoming {
            model.inverse_flux(gamma.min(model.f_max()), Branch::Congested)?
        } else {
            model.inverse_flux(gamma.min(model.f_max()), Branch::Free)?
        };
        rho_bar.push(rb);
    }
    Ok(BoundaryTrace { rho_bar })
}

/// Solves the junction Riemann problem for `rho0` and reconstructs its traces.
pub fn riemann_solve(
    model: &FluxModel,
    spec: &JunctionSpec,
    solver: SolverKind,
    rho0: &[f64],
) -> Result<(JunctionFluxes, BoundaryTrace)> {
    let bounds = ConstraintBounds::from_data(model, spec, rho0)?;
    let fluxes = solver.solve(spec, &bounds)?;
    let trace = reconstruct(model, rho0, &fluxes)?;
    Ok((fluxes, trace))
}

/// Whether solving again from the traces reproduces the traces (within 1e-10).
pub fn check_consistency(model: &FluxModel, spec: &JunctionSpec, solver: SolverKind, rho0: &[f64]) -> Result<bool> {
    let (_, first) = riemann_solve(model, spec, solver, rho0)?;
    let (_, second) = riemann_solve(model, spec, solver, &first.rho_bar)?;
    Ok(first
        .rho_bar
        .iter()
        .zip(&second.rho_bar)
        .all(|(a, b)| (a - b).abs() <= 1e-10))
}
