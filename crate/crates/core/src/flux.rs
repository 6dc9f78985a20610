//! Concave flux functions, demand/supply and branch inverses.

use crate::error::{Error, Result};

/// Densities within this distance of `[0, 1]` are clamped instead of rejected.
pub const DENSITY_SLACK: f64 = 1e-12;

const BISECTION_TOL: f64 = 1e-12;
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `[0, rho_cr]`, where the flux is increasing.
    Free,
    /// `[rho_cr, 1]`, where the flux is decreasing.
    Congested,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Quadratic,
    Tabulated { rho: Vec<f64>, flux: Vec<f64> },
}

/// A strictly concave flux on `[0, 1]` vanishing at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxModel {
    kind: Kind,
    rho_cr: f64,
    f_max: f64,
    lipschitz: f64,
}

impl Default for FluxModel {
    fn default() -> Self {
        Self::quadratic()
    }
}

impl FluxModel {
    /// `f(rho) = rho (1 - rho)`.
    pub fn quadratic() -> Self {
        FluxModel {
            kind: Kind::Quadratic,
            rho_cr: 0.5,
            f_max: 0.25,
            lipschitz: 1.0,
        }
    }

    /// Piecewise-linear flux through the given `(rho, f)` nodes.
    ///
    /// The table must start at `(0, 0)`, end at `(1, 0)`, have strictly increasing
    /// densities and strictly decreasing, nonzero slopes. A supplied `lipschitz`
    /// bound must dominate the largest slope.
    pub fn tabulated(samples: &[(f64, f64)], lipschitz: Option<f64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidFlux(msg));
        if samples.len() < 3 {
            return bad(format!("table needs at least 3 nodes, got {}", samples.len()));
        }
        if samples.iter().any(|(r, f)| !r.is_finite() || !f.is_finite()) {
            return bad("table contains a non-finite value".into());
        }
        let (r0, f0) = samples[0];
        let (r1, f1) = samples[samples.len() - 1];
        if r0 != 0.0 || f0 != 0.0 {
            return bad(format!("first node must be (0, 0), got ({r0}, {f0})"));
        }
        if r1 != 1.0 || f1 != 0.0 {
            return bad(format!("last node must be (1, 0), got ({r1}, {f1})"));
        }
        let rho: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let flux: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let mut slopes = Vec::with_capacity(rho.len() - 1);
        for k in 0..rho.len() - 1 {
            let h = rho[k + 1] - rho[k];
            if h <= 0.0 {
                return bad(format!("densities must increase strictly (node {})", k + 1));
            }
            let s = (flux[k + 1] - flux[k]) / h;
            if s == 0.0 {
                return bad(format!("segment {k} is flat; the flux must be strictly concave"));
            }
            slopes.push(s);
        }
        for k in 1..slopes.len() {
            if slopes[k] > slopes[k - 1] {
                return bad(format!("slopes increase at node {k}; the flux must be concave"));
            }
        }
        if flux.iter().any(|&f| f < 0.0) {
            return bad("flux values must be nonnegative".into());
        }
        let computed = slopes.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        let lipschitz = match lipschitz {
            Some(l) if l < computed => {
                return bad(format!(
                    "declared Lipschitz bound {l} is below the table's largest slope {computed}"
                ))
            }
            Some(l) => l,
            None => computed,
        };

        let mut model = FluxModel {
            kind: Kind::Tabulated { rho, flux },
            rho_cr: 0.5,
            f_max: 0.0,
            lipschitz,
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while hi - lo > 1e-15 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if model.eval(a) < model.eval(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        let mut rho_cr = 0.5 * (lo + hi);
        if let Kind::Tabulated { rho, .. } = &model.kind {
            if let Some(node) = rho.iter().find(|&&r| (r - rho_cr).abs() <= NODE_SNAP) {
                rho_cr = *node;
            }
        }
        model.rho_cr = rho_cr;
        model.f_max = model.eval(rho_cr);
        Ok(model)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, Kind::Quadratic)
    }

    /// Table nodes of a tabulated flux.
    pub fn table(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            Kind::Quadratic => None,
            Kind::Tabulated { rho, flux } => {
                Some(rho.iter().copied().zip(flux.iter().copied()).collect())
            }
        }
    }

    pub fn rho_cr(&self) -> f64 {
        self.rho_cr
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Upper bound on `|f'|` over `[0, 1]`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    fn check(&self, rho: f64) -> Result<f64> {
        if !(-DENSITY_SLACK..=1.0 + DENSITY_SLACK).contains(&rho) {
            return Err(Error::Domain(rho));
        }
        Ok(rho.clamp(0.0, 1.0))
    }

    /// Flux at an already validated density; clamps to `[0, 1]`.
    pub(crate) fn eval(&self, rho: f64) -> f64 {
        let rho = rho.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Quadratic => rho * (1.0 - rho),
            Kind::Tabulated { rho: xs, flux: ys } => {
                let k = xs.partition_point(|&x| x <= rho).clamp(1, xs.len() - 1);
                let t = (rho - xs[k - 1]) / (xs[k] - xs[k - 1]);
                ys[k - 1] + t * (ys[k] - ys[k - 1])
            }
        }
    }

    pub fn flux(&self, rho: f64) -> Result<f64> {
        Ok(self.eval(self.check(rho)?))
    }

    /// `f'(rho)`; one-sided (right) at table nodes.
    pub fn derivative(&self, rho: f64) -> f64 {
        let rho = rho.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Quadratic => 1.0 - 2.0 * rho,
            Kind::Tabulated { rho: xs, flux: ys } => {
                let k = xs.partition_point(|&x| x <= rho).clamp(1, xs.len() - 1);
                (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1])
            }
        }
    }

    pub(crate) fn demand_unchecked(&self, rho: f64) -> f64 {
        if rho <= self.rho_cr {
            self.eval(rho)
        } else {
            self.f_max
        }
    }

    pub(crate) fn supply_unchecked(&self, rho: f64) -> f64 {
        if rho <= self.rho_cr {
            self.f_max
        } else {
            self.eval(rho)
        }
    }

    pub fn demand(&self, rho: f64) -> Result<f64> {
        Ok(self.demand_unchecked(self.check(rho)?))
    }

    pub fn supply(&self, rho: f64) -> Result<f64> {
        Ok(self.supply_unchecked(self.check(rho)?))
    }

    /// The density on the opposite branch carrying the same flux.
    pub fn tau(&self, rho: f64) -> Result<f64> {
        let rho = self.check(rho)?;
        match self.kind {
            Kind::Quadratic => Ok(1.0 - rho),
            Kind::Tabulated { .. } => {
                if rho == self.rho_cr {
                    return Ok(rho);
                }
                let other = if rho < self.rho_cr {
                    Branch::Congested
                } else {
                    Branch::Free
                };
                self.inverse_flux(self.eval(rho).min(self.f_max), other)
            }
        }
    }

    /// The density on `branch` whose flux equals `gamma`.
    pub fn inverse_flux(&self, gamma: f64, branch: Branch) -> Result<f64> {
        if !(-BISECTION_TOL..=self.f_max + BISECTION_TOL).contains(&gamma) {
            return Err(Error::InfeasibleFlux {
                gamma,
                f_max: self.f_max,
            });
        }
        let gamma = gamma.clamp(0.0, self.f_max);
        match self.kind {
            Kind::Quadratic => {
                let disc = (1.0 - 4.0 * gamma).max(0.0).sqrt();
                Ok(match branch {
                    // Rationalised form of (1 - sqrt)/2, accurate for small gamma.
                    Branch::Free => 2.0 * gamma / (1.0 + disc),
                    Branch::Congested => 0.5 * (1.0 + disc),
                })
            }
            Kind::Tabulated { .. } => {
                let (mut lo, mut hi) = match branch {
                    Branch::Free => (0.0, self.rho_cr),
                    Branch::Congested => (self.rho_cr, 1.0),
                };
                while hi - lo > BISECTION_TOL {
                    let mid = 0.5 * (lo + hi);
                    let above = self.eval(mid) > gamma;
                    match (branch, above) {
                        (Branch::Free, true) | (Branch::Congested, false) => hi = mid,
                        _ => lo = mid,
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// Whether `rho` is a good datum on an incoming road (demand equals flux).
    pub fn is_good_incoming(&self, rho: f64) -> bool {
        rho >= self.rho_cr
    }

    /// Whether `rho` is a good datum on an outgoing road (supply equals flux).
    pub fn is_good_outgoing(&self, rho: f64) -> bool {
        rho <= self.rho_cr
    }
}
