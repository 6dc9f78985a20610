//! Junction descriptions and Riemann solvers.
//!
//! A junction has `n` incoming and `m` outgoing roads, a column-stochastic
//! distribution matrix `A` (`m x n`, entry `a(j, i)` is the share of road `i`
//! traffic that turns into road `j`) and a priority vector `P` over the
//! incoming roads. The solvers return incoming fluxes `Q` with outgoing fluxes
//! `A Q`, both within the demand/supply bounds of the current data.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::FluxModel;

const STOCHASTIC_TOL: f64 = 1e-12;
/// Relative tolerance for ties between candidate recursion levels.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionSpec {
    n: usize,
    m: usize,
    a: Vec<f64>,
    p: Vec<f64>,
}

impl JunctionSpec {
    /// Builds a junction from the rows of `A` (one row per outgoing road) and `P`.
    pub fn new(a_rows: &[Vec<f64>], p: &[f64]) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidJunction(msg));
        let m = a_rows.len();
        let n = p.len();
        if n == 0 || m == 0 {
            return bad(format!("needs at least one incoming and one outgoing road (got {n} x {m})"));
        }
        for (j, row) in a_rows.iter().enumerate() {
            if row.len() != n {
                return bad(format!(
                    "row {} of A has {} entries, expected {n} (one per incoming road)",
                    j + 1,
                    row.len()
                ));
            }
        }
        let a: Vec<f64> = a_rows.iter().flatten().copied().collect();
        if let Some(k) = a.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return bad(format!("A({}, {}) = {} is not in [0, 1]", k / n + 1, k % n + 1, a[k]));
        }
        for i in 0..n {
            let s: f64 = (0..m).map(|j| a[j * n + i]).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return bad(format!("column {} of A sums to {s}, expected 1", i + 1));
            }
        }
        if let Some(i) = p.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return bad(format!("priority {} = {} is not positive", i + 1, p[i]));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return bad(format!("priorities sum to {s}, expected 1"));
        }
        Ok(JunctionSpec {
            n,
            m,
            a,
            p: p.to_vec(),
        })
    }

    pub fn incoming(&self) -> usize {
        self.n
    }

    pub fn outgoing(&self) -> usize {
        self.m
    }

    /// Share of incoming road `i` routed to outgoing road `j`.
    #[inline]
    pub fn a(&self, j: usize, i: usize) -> f64 {
        self.a[j * self.n + i]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn priorities(&self) -> &[f64] {
        &self.p
    }

    /// `A q`.
    pub fn distribute(&self, q_in: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|j| (0..self.n).map(|i| self.a(j, i) * q_in[i]).sum())
            .collect()
    }

    /// `(A P)_j`.
    pub fn ap(&self, j: usize) -> f64 {
        (0..self.n).map(|i| self.a(j, i) * self.p[i]).sum()
    }

    /// Whether every entry of `A` is strictly positive.
    pub fn is_fully_connected(&self) -> bool {
        self.a.iter().all(|&x| x > 0.0)
    }
}

/// Demand of the incoming roads and supply of the outgoing roads.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBounds {
    pub gamma_in: Vec<f64>,
    pub gamma_out: Vec<f64>,
}

impl ConstraintBounds {
    pub fn new(gamma_in: Vec<f64>, gamma_out: Vec<f64>) -> Result<Self> {
        for g in gamma_in.iter().chain(&gamma_out) {
            if !(g.is_finite() && *g >= 0.0) {
                return Err(Error::Contract(format!("flux bound {g} is not a nonnegative number")));
            }
        }
        Ok(ConstraintBounds { gamma_in, gamma_out })
    }

    /// Bounds from junction data ordered incoming roads first, then outgoing.
    pub fn from_data(model: &FluxModel, spec: &JunctionSpec, rho0: &[f64]) -> Result<Self> {
        let (n, m) = (spec.incoming(), spec.outgoing());
        if rho0.len() != n + m {
            return Err(Error::Dimension {
                what: "junction data",
                expected: n + m,
                got: rho0.len(),
            });
        }
        let gamma_in = rho0[..n].iter().map(|&r| model.demand(r)).collect::<Result<_>>()?;
        let gamma_out = rho0[n..].iter().map(|&r| model.supply(r)).collect::<Result<_>>()?;
        Ok(ConstraintBounds { gamma_in, gamma_out })
    }

    fn check(&self, spec: &JunctionSpec) {
        assert_eq!(self.gamma_in.len(), spec.incoming(), "incoming bounds do not match the junction");
        assert_eq!(self.gamma_out.len(), spec.outgoing(), "outgoing bounds do not match the junction");
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionFluxes {
    pub q_in: Vec<f64>,
    pub q_out: Vec<f64>,
    /// Largest admissible level along the priority line.
    pub hbar: f64,
}

impl JunctionFluxes {
    /// Total flux through the junction.
    pub fn gamma(&self) -> f64 {
        self.q_in.iter().sum()
    }
}

/// `min(gamma_in_i / p_i, gamma_out_j / (A P)_j)`; rows with `(A P)_j = 0` never bind.
pub fn hbar(spec: &JunctionSpec, bounds: &ConstraintBounds) -> f64 {
    bounds.check(spec);
    let h_in = (0..spec.n).map(|i| bounds.gamma_in[i] / spec.p[i]);
    let h_out = (0..spec.m).map(|j| {
        let d = spec.ap(j);
        if d > 0.0 {
            bounds.gamma_out[j] / d
        } else {
            f64::INFINITY
        }
    });
    h_in.chain(h_out).fold(f64::INFINITY, f64::min)
}

/// Which family of constraints set the level of a recursion step.
#[derive(Debug, Clone, PartialEq)]
pub enum Binding {
    /// Outgoing roads (local indices) whose supply is exhausted.
    Supply(Vec<usize>),
    /// Incoming roads (local indices) whose demand is met.
    Demand(Vec<usize>),
}

/// One iteration of the priority recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionStep {
    /// Candidate levels of the still free incoming roads.
    pub h_in: Vec<Option<f64>>,
    /// Candidate levels of the outgoing roads (`inf` when no free road feeds them).
    pub h_out: Vec<f64>,
    pub level: f64,
    pub binding: Binding,
    /// Incoming roads fixed at this step.
    pub fixed: Vec<usize>,
}

fn priority_recursion(
    spec: &JunctionSpec,
    bounds: &ConstraintBounds,
    soft: bool,
) -> (JunctionFluxes, Vec<RecursionStep>) {
    bounds.check(spec);
    let (n, m) = (spec.n, spec.m);
    let mut q = vec![0.0; n];
    let mut fixed = vec![false; n];
    let mut steps: Vec<RecursionStep> = Vec::new();

    while fixed.iter().any(|f| !f) {
        assert!(steps.len() < n, "priority recursion did not terminate within {n} steps");
        let h_in: Vec<Option<f64>> = (0..n)
            .map(|i| (!fixed[i]).then(|| bounds.gamma_in[i] / spec.p[i]))
            .collect();
        let h_out: Vec<f64> = (0..m)
            .map(|j| {
                let mut used = 0.0;
                let mut slope = 0.0;
                for i in 0..n {
                    if fixed[i] {
                        used += spec.a(j, i) * q[i];
                    } else {
                        slope += spec.a(j, i) * spec.p[i];
                    }
                }
                if slope > 0.0 {
                    (bounds.gamma_out[j] - used).max(0.0) / slope
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let level = h_in
            .iter()
            .flatten()
            .chain(&h_out)
            .fold(f64::INFINITY, |a, &b| a.min(b));
        let ties = |h: f64| h <= level + TIE_TOL * level;

        let supply: Vec<usize> = (0..m).filter(|&j| h_out[j].is_finite() && ties(h_out[j])).collect();
        let (binding, newly): (Binding, Vec<usize>) = if !supply.is_empty() {
            let newly = (0..n)
                .filter(|&i| !fixed[i])
                .filter(|&i| !soft || supply.iter().any(|&j| spec.a(j, i) != 0.0))
                .collect();
            (Binding::Supply(supply), newly)
        } else {
            let newly: Vec<usize> = (0..n).filter(|&i| h_in[i].is_some_and(ties)).collect();
            (Binding::Demand(newly.clone()), newly)
        };
        assert!(!newly.is_empty(), "priority recursion made no progress");
        if let Some(prev) = steps.last() {
            assert!(
                level >= prev.level * (1.0 - TIE_TOL),
                "recursion levels must be nondecreasing ({} after {})",
                level,
                prev.level
            );
        }
        for &i in &newly {
            q[i] = (level * spec.p[i]).min(bounds.gamma_in[i]);
            fixed[i] = true;
        }
        steps.push(RecursionStep {
            h_in,
            h_out,
            level,
            binding,
            fixed: newly,
        });
    }
    let q_out = spec.distribute(&q);
    let fluxes = JunctionFluxes {
        q_in: q,
        q_out,
        hbar: steps[0].level,
    };
    (fluxes, steps)
}

/// Priority Riemann solver: a binding supply freezes every remaining incoming road.
pub fn solve_prs(spec: &JunctionSpec, bounds: &ConstraintBounds) -> JunctionFluxes {
    priority_recursion(spec, bounds, false).0
}

pub fn solve_prs_traced(spec: &JunctionSpec, bounds: &ConstraintBounds) -> (JunctionFluxes, Vec<RecursionStep>) {
    priority_recursion(spec, bounds, false)
}

/// Soft variant: a binding supply freezes only the incoming roads that feed it.
pub fn solve_sprs(spec: &JunctionSpec, bounds: &ConstraintBounds) -> JunctionFluxes {
    priority_recursion(spec, bounds, true).0
}

pub fn solve_sprs_traced(spec: &JunctionSpec, bounds: &ConstraintBounds) -> (JunctionFluxes, Vec<RecursionStep>) {
    priority_recursion(spec, bounds, true)
}

/// Total-flux maximiser over the feasible polytope, ties broken lexicographically
/// in favour of the lower-indexed incoming roads. Requires `n <= m`.
pub fn solve_maxflux_baseline(spec: &JunctionSpec, bounds: &ConstraintBounds) -> Result<JunctionFluxes> {
    bounds.check(spec);
    let (n, m) = (spec.n, spec.m);
    if n > m {
        return Err(Error::UnsupportedJunction {
            solver: "maxflux",
            incoming: n,
            outgoing: m,
        });
    }
    // Rows of c . x <= b.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2 * n + m);
    for i in 0..n {
        let mut lo = vec![0.0; n];
        lo[i] = -1.0;
        rows.push((lo, 0.0));
        let mut hi = vec![0.0; n];
        hi[i] = 1.0;
        rows.push((hi, bounds.gamma_in[i]));
    }
    for j in 0..m {
        rows.push(((0..n).map(|i| spec.a(j, i)).collect(), bounds.gamma_out[j]));
    }
    let scale = bounds
        .gamma_in
        .iter()
        .chain(&bounds.gamma_out)
        .fold(1.0_f64, |a, &b| a.max(b));
    let feas_tol = 1e-12 * scale;

    let mut best: Option<(f64, Vec<f64>)> = None;
    for combo in (0..rows.len()).combinations(n) {
        let mat: Vec<Vec<f64>> = combo.iter().map(|&k| rows[k].0.clone()).collect();
        let rhs: Vec<f64> = combo.iter().map(|&k| rows[k].1).collect();
        let Some(x) = solve_dense(mat, rhs) else { continue };
        let feasible = rows
            .iter()
            .all(|(c, b)| c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum::<f64>() <= b + feas_tol);
        if !feasible {
            continue;
        }
        let obj: f64 = x.iter().sum();
        let better = match &best {
            None => true,
            Some((bo, bx)) => {
                obj > bo + feas_tol
                    || ((obj - bo).abs() <= feas_tol
                        && x.iter().zip(bx).find(|(a, b)| (*a - *b).abs() > feas_tol).is_some_and(|(a, b)| a > b))
            }
        };
        if better {
            best = Some((obj, x));
        }
    }
    let (_, x) = best.expect("the origin is always a feasible vertex");
    let q_in: Vec<f64> = x
        .iter()
        .zip(&bounds.gamma_in)
        .map(|(&v, &g)| v.clamp(0.0, g))
        .collect();
    let q_out = spec.distribute(&q_in);
    Ok(JunctionFluxes {
        q_in,
        q_out,
        hbar: hbar(spec, bounds),
    })
}

/// Gaussian elimination with partial pivoting; `None` for (near) singular systems.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                let pivot_row = a[col].clone();
                for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Prs,
    Sprs,
    #[serde(rename = "maxflux")]
    MaxFlux,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Prs, SolverKind::Sprs, SolverKind::MaxFlux];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Prs => "prs",
            SolverKind::Sprs => "sprs",
            SolverKind::MaxFlux => "maxflux",
        }
    }

    /// Whether the solver can handle a junction of this shape.
    pub fn supports(self, spec: &JunctionSpec) -> Result<()> {
        match self {
            SolverKind::MaxFlux if spec.incoming() > spec.outgoing() => Err(Error::UnsupportedJunction {
                solver: "maxflux",
                incoming: spec.incoming(),
                outgoing: spec.outgoing(),
            }),
            _ => Ok(()),
        }
    }

    pub fn solve(self, spec: &JunctionSpec, bounds: &ConstraintBounds) -> Result<JunctionFluxes> {
        match self {
            SolverKind::Prs => Ok(solve_prs(spec, bounds)),
            SolverKind::Sprs => Ok(solve_sprs(spec, bounds)),
            SolverKind::MaxFlux => solve_maxflux_baseline(spec, bounds),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prs" => Ok(SolverKind::Prs),
            "sprs" => Ok(SolverKind::Sprs),
            "maxflux" | "max-flux" | "baseline" => Ok(SolverKind::MaxFlux),
            _ => Err(Error::Scenario(format!(
                "unknown solver `{s}` (expected prs, sprs or maxflux)"
            ))),
        }
    }
}
