//! Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use netlwr_core::diagnostics::{
    check_p2_p3, consistency_sweep, p1_sweep, random_spec, SweepConfig, SweepMode,
};
use netlwr_core::engine::{simulate, Network, Road, RunParams};
use netlwr_core::flux::FluxModel;
use netlwr_core::junction::{solve_maxflux_baseline, solve_prs, solve_sprs, ConstraintBounds, JunctionSpec, SolverKind};
use netlwr_core::scenario::{builtin, run};
use netlwr_core::trace::riemann_solve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn case_bounds(name: &str) -> (JunctionSpec, ConstraintBounds, Vec<f64>) {
    let s = builtin(name).unwrap();
    let (_, spec, data) = s.junction_problem(None).unwrap();
    let bounds = ConstraintBounds::from_data(s.flux(), &spec, &data).unwrap();
    (spec, bounds, data)
}

fn criterion_1() -> Outcome {
    let (spec, b, _) = case_bounds("case1");
    let prs = solve_prs(&spec, &b);
    let sprs = solve_sprs(&spec, &b);
    let prs_in = [0.2125, 51.0 / 560.0];
    let prs_out = [0.1275, 493.0 / 2800.0];
    let sprs_in = [0.2125, 0.16];
    let sprs_out = [0.1275, 0.245];
    let err = max_diff(&prs.q_in, &prs_in)
        .max(max_diff(&prs.q_out, &prs_out))
        .max(max_diff(&sprs.q_in, &sprs_in))
        .max(max_diff(&sprs.q_out, &sprs_out));
    ensure(err <= 1e-12, || format!("max deviation {err:e} > 1e-12 (PRS {prs:?}, SPRS {sprs:?})"))?;
    let reps = 1000;
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(solve_prs(std::hint::black_box(&spec), &b));
        std::hint::black_box(solve_sprs(std::hint::black_box(&spec), &b));
    }
    let per = start.elapsed() / (2 * reps);
    ensure(per < Duration::from_millis(1), || format!("solve takes {per:?}"))?;
    Ok(format!("max deviation {err:.1e}, {per:?} per solve"))
}

fn criterion_2() -> Outcome {
    let m = FluxModel::quadratic();
    let (spec, b, data) = case_bounds("case2");
    let prs = solve_prs(&spec, &b);
    let base = solve_maxflux_baseline(&spec, &b).map_err(|e| e.to_string())?;
    let err = max_diff(&prs.q_in, &[0.16, 0.2]).max(max_diff(&base.q_in, &[0.12, 0.25]));
    ensure(err <= 1e-12, || format!("flux deviation {err:e}"))?;
    let (_, tp) = riemann_solve(&m, &spec, SolverKind::Prs, &data).map_err(|e| e.to_string())?;
    let (_, tb) = riemann_solve(&m, &spec, SolverKind::MaxFlux, &data).map_err(|e| e.to_string())?;
    let congested_root = (1.0 + (1.0 - 4.0 * 0.12f64).sqrt()) / 2.0;
    ensure(tp.rho_bar[0] == 0.2, || format!("PRS road 1 trace {} should stay 0.2", tp.rho_bar[0]))?;
    ensure((tb.rho_bar[0] - congested_root).abs() <= 1e-12, || {
        format!("baseline road 1 trace {} vs {congested_root}", tb.rho_bar[0])
    })?;
    ensure((tb.rho_bar[0] - 0.86055).abs() < 1e-5, || "baseline trace not near 0.86055".into())?;
    Ok(format!(
        "flux deviation {err:.1e}; road 1 trace PRS {} vs baseline {:.5}",
        tp.rho_bar[0], tb.rho_bar[0]
    ))
}

fn criterion_3() -> Outcome {
    let m = FluxModel::quadratic();
    let (spec, b, data) = case_bounds("case3");
    let q = solve_prs(&spec, &b);
    let err = max_diff(&q.q_in, &[0.16, 6.0 / 55.0, 4.0 / 55.0]).max(max_diff(&q.q_out, &[0.16, 2.0 / 11.0]));
    ensure(err <= 1e-12, || format!("flux deviation {err:e}: {q:?}"))?;
    ensure(q.q_in[1] < b.gamma_in[1] && q.q_in[2] < b.gamma_in[2], || "roads 2 and 3 should be cut".into())?;
    let (_, t) = riemann_solve(&m, &spec, SolverKind::Prs, &data).map_err(|e| e.to_string())?;
    ensure(t.rho_bar[1] > 0.5 && t.rho_bar[2] > 0.5, || format!("traces {:?} not congested", t.rho_bar))?;
    Ok(format!(
        "flux deviation {err:.1e}; congested traces {:.6}, {:.6}",
        t.rho_bar[1], t.rho_bar[2]
    ))
}

fn criterion_4() -> Outcome {
    let mut details = Vec::new();
    for (name, solver) in [("case1", SolverKind::Prs), ("case1", SolverKind::Sprs), ("case2", SolverKind::Prs), ("case2", SolverKind::MaxFlux)] {
        let s = builtin(name).unwrap().with_solver(solver).unwrap();
        let (spec, b, _) = case_bounds(name);
        let expected = solver.solve(&spec, &b).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let traj = run(&s).map_err(|e| format!("{name}/{solver}: {e}"))?;
        let elapsed = start.elapsed();
        let last = traj.records.last().ok_or("no steps taken")?;
        let got = &last.junctions[0];
        let err = max_diff(&got.q_in, &expected.q_in).max(max_diff(&got.q_out, &expected.q_out));
        let in_range = traj
            .samples
            .iter()
            .flat_map(|s| s.rho.iter().flatten())
            .chain(traj.final_state.roads.iter().flat_map(|r| r.rho.iter()))
            .all(|r| (0.0..=1.0).contains(r));
        ensure(err <= 5e-3, || format!("{name}/{solver}: junction flux deviation {err:e}"))?;
        ensure(in_range, || format!("{name}/{solver}: density outside [0, 1]"))?;
        ensure(elapsed < Duration::from_secs(5), || format!("{name}/{solver}: took {elapsed:?}"))?;
        details.push(format!("{name}/{solver} {err:.1e} in {:.0?}", elapsed));
    }
    Ok(details.join(", "))
}

fn criterion_5() -> Outcome {
    let mut worst_mass: f64 = 0.0;
    let mut worst_junction: f64 = 0.0;
    let mut steps = 0;
    for name in ["case1", "case2", "case3"] {
        for solver in SolverKind::ALL {
            let s = builtin(name).unwrap();
            let (_, spec, _) = s.junction_problem(None).unwrap();
            if solver.supports(&spec).is_err() {
                continue;
            }
            let traj = run(&s.with_solver(solver).unwrap()).map_err(|e| e.to_string())?;
            for l in &traj.mass {
                worst_mass = worst_mass.max(l.relative_residual());
            }
            for rec in &traj.records {
                for q in &rec.junctions {
                    let gap = (q.q_in.iter().sum::<f64>() - q.q_out.iter().sum::<f64>()).abs();
                    worst_junction = worst_junction.max(gap);
                }
            }
            steps += traj.records.len();
        }
    }
    ensure(worst_mass <= 1e-10, || format!("relative mass residual {worst_mass:e}"))?;
    ensure(worst_junction <= 1e-12, || format!("junction imbalance {worst_junction:e}"))?;
    Ok(format!(
        "{steps} steps; worst relative mass residual {worst_mass:.1e}, worst junction imbalance {worst_junction:.1e}"
    ))
}

fn criterion_6() -> Outcome {
    let m = FluxModel::quadratic();
    let mut details = Vec::new();
    for (n, mm) in [(2, 2), (3, 2)] {
        for solver in SolverKind::ALL {
            if solver == SolverKind::MaxFlux && n > mm {
                continue;
            }
            let r = consistency_sweep(&m, solver, n, mm, 10_000, 2024).map_err(|e| e.to_string())?;
            ensure(r.passed(1e-14), || r.to_string())?;
            details.push(format!("{solver} {n}x{mm} residual {:.1e}", r.max_fixed_point_residual));
        }
    }
    Ok(format!("10000 data sets each; {}", details.join(", ")))
}

fn criterion_7() -> Outcome {
    let m = FluxModel::quadratic();
    let cfg = SweepConfig {
        experiments: 10_000,
        seed: 7,
        mode: SweepMode::Assert,
        ..SweepConfig::default()
    };
    let rep = check_p2_p3(&m, &cfg).map_err(|e| e.to_string())?;
    ensure(rep.monotone_violations == 0, || format!("{} decreasing waves raised hbar", rep.monotone_violations))?;
    ensure(rep.passed(), || rep.to_string())?;
    let again = check_p2_p3(&m, &cfg).map_err(|e| e.to_string())?;
    let constants = |r: &netlwr_core::diagnostics::SweepReport| [r.c_tv, r.c_hbar, r.c_gamma];
    ensure(constants(&rep) == constants(&again), || "constants differ between identical runs".into())?;
    ensure(constants(&rep).iter().all(|c| c.is_finite()), || "non-finite constant".into())?;
    let other = check_p2_p3(&m, &SweepConfig { seed: 8, ..cfg.clone() }).map_err(|e| e.to_string())?;
    ensure(other.passed(), || other.to_string())?;

    let p1 = p1_sweep(&m, SolverKind::Prs, 2, 2, 10_000, 7).map_err(|e| e.to_string())?;
    ensure(p1.failures == 0, || p1.to_string())?;

    for fx in common::fixtures() {
        let d = fx.run();
        fx.check_signs(&d, 1e-10)?;
        if fx.name == "A2 increasing" {
            ensure(d.d_hbar() > 0.0, || "A2 increasing must raise hbar".into())?;
        }
    }
    Ok(format!(
        "C_tv {:.3}, C_hbar {:.3}, C_gamma {:.3} (seed 8: {:.3}, {:.3}, {:.3}); max dhbar on decreasing waves {:.1e}; P1 {} pairs exact; {} fixtures",
        rep.c_tv,
        rep.c_hbar,
        rep.c_gamma,
        other.c_tv,
        other.c_hbar,
        other.c_gamma,
        rep.max_decreasing_dhbar,
        p1.checked,
        common::fixtures().len()
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst: f64 = 0.0;
    for k in 0..10_000 {
        let n = 1 + k % 3;
        let m = 2 + (k / 3) % 2;
        let spec = random_spec(&mut rng, n, m, false);
        let b = ConstraintBounds::new(
            (0..n).map(|_| 0.25 * rng.random::<f64>()).collect(),
            (0..m).map(|_| 0.25 * rng.random::<f64>()).collect(),
        )
        .unwrap();
        let (p, s) = (solve_prs(&spec, &b), solve_sprs(&spec, &b));
        worst = worst.max(max_diff(&p.q_in, &s.q_in));
    }
    ensure(worst <= 1e-14, || format!("max difference {worst:e}"))?;
    Ok(format!("10000 junctions, max difference {worst:.1e}"))
}

/// Cell averages of the step `left | right` at `x0` on `[0, 1]`.
fn step_averages(cells: usize, x0: f64, left: f64, right: f64) -> Vec<f64> {
    let dx = 1.0 / cells as f64;
    (0..cells)
        .map(|k| {
            let (a, b) = (k as f64 * dx, (k + 1) as f64 * dx);
            let l = (x0.min(b) - a).max(0.0);
            (left * l + right * (dx - l)) / dx
        })
        .collect()
}

/// L1 distance between piecewise-constant cell values and the step `left | right` at `s`.
fn l1_to_step(rho: &[f64], dx: f64, s: f64, left: f64, right: f64) -> f64 {
    rho.iter()
        .enumerate()
        .map(|(k, u)| {
            let (a, b) = (k as f64 * dx, (k + 1) as f64 * dx);
            let l = (s.min(b) - a).clamp(0.0, dx);
            l * (u - left).abs() + (dx - l) * (u - right).abs()
        })
        .sum()
}

/// Least-squares slope of log error against log dx.
fn fitted_rate(errors: &[(f64, f64)]) -> f64 {
    let n = errors.len() as f64;
    let xs: Vec<f64> = errors.iter().map(|e| e.0.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Shock `left | right` from `x0` on a single road; returns `(dx, L1 error at t_final)`.
fn shock_errors(x0: f64, left: f64, right: f64, t_final: f64) -> Result<Vec<(f64, f64)>, String> {
    let m = FluxModel::quadratic();
    let speed = 1.0 - left - right;
    let mut errors = Vec::new();
    for cells in [50, 100, 200, 400] {
        let dx = 1.0 / cells as f64;
        let road = Road::new("s", dx, step_averages(cells, x0, left, right));
        let net = Network::new(vec![road], vec![]).map_err(|e| e.to_string())?;
        let params = RunParams {
            t_final,
            cfl: 1.0,
            sample_times: vec![],
        };
        let traj = simulate(&m, net, SolverKind::Prs, &params).map_err(|e| e.to_string())?;
        let rho = &traj.final_state.roads[0].rho;
        errors.push((dx, l1_to_step(rho, dx, x0 + speed * t_final, left, right)));
    }
    Ok(errors)
}

fn criterion_9() -> Outcome {
    let show = |e: &[(f64, f64)]| e.iter().map(|e| format!("{:.2e}", e.1)).collect::<Vec<_>>().join(", ");
    let stationary = shock_errors(1.0 / 3.0, 0.2, 0.8, 1.0)?;
    let rate = fitted_rate(&stationary);
    ensure(rate >= 0.8, || format!("stationary rate {rate:.3} (errors {})", show(&stationary)))?;
    let moving = shock_errors(0.25, 0.2, 0.6, 1.0)?;
    let moving_rate = fitted_rate(&moving);
    ensure(moving_rate >= 0.8, || format!("moving rate {moving_rate:.3} (errors {})", show(&moving)))?;
    Ok(format!(
        "stationary errors {}, rate {rate:.3}; moving errors {}, rate {moving_rate:.3}",
        show(&stationary),
        show(&moving)
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("junction fluxes, 2x2 with a zero turning share", criterion_1),
        ("junction fluxes versus the max-flux baseline", criterion_2),
        ("junction fluxes, 3x2 with congested traces", criterion_3),
        ("Godunov junction fluxes and density range", criterion_4),
        ("mass balance and junction conservation", criterion_5),
        ("solver consistency and trace fixed points", criterion_6),
        ("interaction bounds, good-data invariance and fixtures", criterion_7),
        ("PRS and SPRS agree on fully connected junctions", criterion_8),
        ("stationary shock L1 convergence", criterion_9),
    ];
    let mut failed = 0;
    for (k, (title, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {}: {title} ({detail}) [{t:.2?}]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {}: {title} ({detail}) [{t:.2?}]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
