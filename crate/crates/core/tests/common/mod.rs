//! Shared fixtures for integration and acceptance tests.
#![allow(dead_code)]

use netlwr_core::diagnostics::{run_interaction, InteractionDeltas, InteractionExperiment};
use netlwr_core::flux::{Branch, FluxModel};
use netlwr_core::junction::{JunctionSpec, SolverKind};
use netlwr_core::trace::riemann_solve;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Pos,
    Neg,
    Zero,
}

impl Sign {
    pub fn holds(self, x: f64, zero_tol: f64) -> bool {
        match self {
            Sign::Pos => x > zero_tol,
            Sign::Neg => x < -zero_tol,
            Sign::Zero => x.abs() <= zero_tol,
        }
    }
}

/// A wave hitting a 2 x 2 junction equilibrium.
///
/// `data` is solved first; its traces form the equilibrium that road `road`
/// (0-based) perturbs to `rho_new`. Expected deltas come from an independent
/// reference implementation of the solver and the interaction bookkeeping.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub a: [[f64; 2]; 2],
    pub p: [f64; 2],
    pub data: [f64; 4],
    pub road: usize,
    pub rho_new: f64,
    pub gamma: Sign,
    pub hbar: Sign,
    pub tv: Option<Sign>,
    /// Reference `(dGamma, dhbar, dTV)`.
    pub expected: (f64, f64, f64),
}

fn cong(g: f64) -> f64 {
    FluxModel::quadratic().inverse_flux(g, Branch::Congested).unwrap()
}

fn free(g: f64) -> f64 {
    FluxModel::quadratic().inverse_flux(g, Branch::Free).unwrap()
}

pub fn fixtures() -> Vec<Fixture> {
    use Sign::*;
    let a1 = [[0.9, 0.9], [0.1, 0.1]];
    let a2 = [[0.8, 0.6], [0.2, 0.4]];
    let b = [[0.2, 0.5], [0.8, 0.5]];
    let b1m = [[0.6, 0.4], [0.4, 0.6]];
    let c = [[0.5, 0.3], [0.5, 0.7]];
    let half = [0.5, 0.5];
    let data_a1 = [0.2, 0.1, 0.3, 0.3];
    let data_a2 = [0.3, 0.1, 0.3, 0.3];
    let data_b = [0.1, cong(0.204), cong(0.12), 0.3];
    let data_c = [cong(0.125), cong(0.125), cong(0.1), free(0.15)];
    let fx = |name, a, p, data, road, rho_new, gamma, hbar, tv, expected| Fixture {
        name,
        a,
        p,
        data,
        road,
        rho_new,
        gamma,
        hbar,
        tv,
        expected,
    };
    vec![
        fx("A1 increasing", a1, half, data_a1, 0, 0.4, Pos, Zero, Some(Zero), (0.027777777777777735, 0.0, 0.0)),
        fx("A1 decreasing", a1, half, data_a1, 0, 0.05, Neg, Neg, Some(Zero), (-0.11250000000000004, -0.08500000000000002, 0.0)),
        fx("A2 increasing", a2, half, data_a2, 1, 0.45, Pos, Pos, Some(Zero), (0.05714285714285716, 0.17714285714285713, 0.0)),
        fx("A2 decreasing", a2, half, data_a2, 1, 0.05, Neg, Neg, Some(Zero), (-0.04249999999999998, -0.08500000000000002, 0.0)),
        fx("A3 decreasing", a2, half, data_a2, 2, 0.9, Neg, Neg, Some(Pos), (-0.17142857142857143, -0.05142857142857146, 0.07885714285714285)),
        fx("A3 increasing (no effect)", a2, half, [0.3, 0.1, cong(0.222), 0.3], 2, 0.6, Zero, Zero, Some(Zero), (0.0, 0.0, 0.0)),
        fx("B1 increasing", b, [0.6, 0.4], data_b, 0, 0.45, Pos, Pos, Some(Pos), (0.07364705882352945, 0.21764705882352942, 0.004705882352941143)),
        fx("B1 decreasing", b1m, [0.8, 0.2], [0.2, cong(0.135), cong(0.15), 0.3], 0, 0.05, Pos, Neg, Some(Pos), (0.0025000000000000577, -0.14062500000000006, 0.04800000000000011)),
        fx("B2 decreasing", b, [0.6, 0.4], data_b, 1, 0.05, Neg, Neg, Some(Zero), (-0.15649999999999997, -0.03125000000000003, 0.0)),
        fx("B2 increasing (no effect)", b, [0.6, 0.4], [0.1, free(0.204), cong(0.12), 0.3], 1, 0.45, Zero, Zero, Some(Zero), (0.0, 0.0, 0.0)),
        fx("B3 increasing", b, [0.6, 0.4], data_b, 2, 0.55, Pos, Zero, Some(Pos), (0.04600000000000004, 0.0, 0.04600000000000004)),
        fx("B3 decreasing", b, [0.6, 0.4], data_b, 2, 0.95, Neg, Neg, Some(Pos), (-0.14556249999999984, -0.0015624999999998834, 0.14612499999999973)),
        fx("B4 increasing (no effect)", b, [0.6, 0.4], [0.1, cong(0.204), cong(0.12), cong(0.174)], 3, 0.55, Zero, Zero, Some(Zero), (0.0, 0.0, 0.0)),
        fx("C1 decreasing", c, half, data_c, 0, 0.05, Pos, Neg, Some(Pos), (0.047500000000000014, -0.15499999999999997, 0.09749999999999996)),
        fx("C1 increasing (no effect)", c, half, [free(0.125), cong(0.125), cong(0.1), free(0.15)], 0, 0.2, Zero, Zero, Some(Zero), (0.0, 0.0, 0.0)),
        fx("C3 decreasing", c, half, data_c, 2, 0.95, Neg, Neg, Some(Pos), (-0.13124999999999987, -0.13124999999999987, 0.1574999999999998)),
        fx("C3 increasing", c, half, data_c, 2, 0.6, Pos, Pos, Some(Pos), (0.1666666666666667, 0.1666666666666667, 0.2)),
        fx("C4 increasing (no effect)", c, half, [cong(0.125), cong(0.125), cong(0.1), cong(0.15)], 3, 0.6, Zero, Zero, Some(Zero), (0.0, 0.0, 0.0)),
    ]
}

impl Fixture {
    pub fn spec(&self) -> JunctionSpec {
        JunctionSpec::new(&[self.a[0].to_vec(), self.a[1].to_vec()], &self.p).unwrap()
    }

    pub fn base(&self) -> Vec<f64> {
        let (_, t) = riemann_solve(&FluxModel::quadratic(), &self.spec(), SolverKind::Prs, &self.data).unwrap();
        t.rho_bar
    }

    pub fn run(&self) -> InteractionDeltas {
        let m = FluxModel::quadratic();
        let exp = InteractionExperiment::new(&m, SolverKind::Prs, self.spec(), self.base(), self.road, self.rho_new)
            .unwrap_or_else(|e| panic!("{}: {e}", self.name));
        run_interaction(&m, SolverKind::Prs, &exp).unwrap()
    }

    /// Checks signs (zeros within `zero_tol`); returns a description of the first mismatch.
    pub fn check_signs(&self, d: &InteractionDeltas, zero_tol: f64) -> Result<(), String> {
        let mut checks = vec![("dGamma", self.gamma, d.d_gamma()), ("dhbar", self.hbar, d.d_hbar())];
        if let Some(tv) = self.tv {
            checks.push(("dTV", tv, d.d_tv()));
        }
        for (what, sign, value) in checks {
            if !sign.holds(value, zero_tol) {
                return Err(format!("{}: {what} = {value:e}, expected {sign:?}", self.name));
            }
        }
        Ok(())
    }
}
