//! Acceptance suite. Each test prints one `[PASS]` / `[FAIL]` line and then
//! asserts, so `cargo test -p reginit-bench --test acceptance -- --nocapture`
//! gives a one-line-per-criterion summary.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reginit::krylov::PcgConfig;
use reginit::lbfgs::{
    lbfgs_minimize, lbfgs_minimize_observed, two_loop_apply, CenterStep, IterationView, LbfgsMemory, MemorySize,
    OptimizerConfig, StopReason,
};
use reginit::objective::FnObjective;
use reginit::operator::ZeroOperator;
use reginit::problems::{make_disc_pair, QuadraticProblem, RegistrationProblem, Regularizer};
use reginit::scaling::{tau_dp, tau_du, tau_dz, tau_gm, SecantPair, TAU_MIN};
use reginit::strategy::{build_initial_metric, InitialMetric};
use reginit::{krylov::pcg_solve, LinearOperator, Objective, ShiftedOperator, StrategyRegistry};
use reginit_bench::{run_experiment, ExperimentSpec, ProblemSpec, ReportRow};

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!("[{}] criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn quadratic_rows(strategies: &[&str], memories: &[MemorySize], alphas: &[f64]) -> Vec<ReportRow> {
    let spec = ExperimentSpec {
        problem: ProblemSpec::Quadratic { n: 256, decay_span: 14.0 },
        strategies: strategies.iter().map(|s| s.to_string()).collect(),
        memories: memories.to_vec(),
        alphas: alphas.to_vec(),
        repetitions: 1,
        seed: 7,
        max_iter: 5000,
        ..Default::default()
    };
    run_experiment(&spec, threads()).unwrap()
}

fn find<'a>(rows: &'a [ReportRow], s: &str, ell: MemorySize, alpha: f64) -> &'a ReportRow {
    rows.iter().find(|r| r.strategy == s && r.ell == ell && r.alpha == alpha).unwrap()
}

fn dense_inverse(h0: DMatrix<f64>, pairs: &[(DVector<f64>, DVector<f64>)]) -> DMatrix<f64> {
    let n = h0.nrows();
    let mut h = h0;
    for (p, y) in pairs {
        let rho = 1.0 / y.dot(p);
        let v = DMatrix::identity(n, n) - (y * p.transpose()) * rho;
        h = v.transpose() * &h * &v + (p * p.transpose()) * rho;
    }
    h
}

#[test]
fn c01_two_loop_oracle() {
    let t0 = Instant::now();
    let n = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let hess = &m * m.transpose() + DMatrix::identity(n, n) * 0.1;
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let (h2, c2) = (hess.clone(), c.clone());
    let obj = FnObjective::new(
        n,
        move |x| {
            let r = DVector::from_column_slice(x) - &c2;
            let g = &h2 * &r;
            (0.5 * r.dot(&g), g.as_slice().to_vec())
        },
        Arc::new(ZeroOperator::new(n)),
    );
    let mut worst: f64 = 0.0;
    let mut checked = true;
    for name in ["id", "lsy", "lsp"] {
        let mut cfg = OptimizerConfig::new(StrategyRegistry::with_builtins().create(name).unwrap());
        cfg.memory = MemorySize::Unbounded;
        cfg.max_iter = 9;
        cfg.stopping.solution = Some(c.as_slice().to_vec());
        cfg.stopping.solution_rel_tol = 1e-300;
        cfg.stopping.grad_abs = 1e-300;
        let mut seen = None;
        let mut obs = |v: &IterationView<'_>| {
            if v.iteration == 8 {
                let mem = v.memory.unwrap();
                let Some(InitialMetric::InverseScaled(gamma)) = v.metric else { return };
                let pairs: Vec<_> = mem
                    .iter()
                    .map(|s| (DVector::from_column_slice(s.pair.p()), DVector::from_column_slice(s.pair.y())))
                    .collect();
                let h = dense_inverse(DMatrix::identity(n, n) * *gamma, &pairs);
                let expect = -(&h * DVector::from_column_slice(v.gradient));
                let err = (DVector::from_column_slice(v.direction) - &expect).norm() / expect.norm();
                seen = Some((mem.len(), err));
            }
        };
        lbfgs_minimize_observed(&obj, &vec![0.0; n], &cfg, &mut obs).unwrap();
        match seen {
            Some((8, err)) => worst = worst.max(err),
            _ => checked = false,
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        "two-loop oracle",
        checked && worst <= 1e-10 && secs < 1.0,
        &format!("8 stored pairs, max rel err {worst:.2e} over id/lsy/lsp (limit 1e-10), {secs:.3}s (limit 1s)"),
    );
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn c02_tls_angle_sweep() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    while pairs < 100 {
        let n = rng.gen_range(2..=50);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = rng.gen_range(0.2..5.0);
        let b = rng.gen_range(0.05..1.0);
        let z: Vec<f64> = p.iter().map(|v| a * v + b * rng.gen_range(-1.0..1.0)).collect();
        let (pp, zz, d) = (dotp(&p, &p), dotp(&z, &z), dotp(&p, &z));
        if d <= 0.0 {
            continue;
        }
        pairs += 1;
        // minimise |eta1 p - eta2 z|^2 over unit eta = (cos t, sin t)
        let m = 1_000_000;
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 0..m {
            let t = std::f64::consts::PI * i as f64 / m as f64;
            let (s, c) = t.sin_cos();
            let v = c * c * pp - 2.0 * c * s * d + s * s * zz;
            if v < best {
                best = v;
                arg = t;
            }
        }
        let sweep = arg.cos() / arg.sin();
        let du = tau_du(&p, &z, TAU_MIN).unwrap().tau;
        worst = worst.max((du - sweep).abs() / sweep.abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        2,
        "TLS oracle",
        worst <= 1e-4 && secs < 30.0,
        &format!("100 pairs, max rel err {worst:.2e} (limit 1e-4), {secs:.2}s (limit 30s)"),
    );
}

#[test]
fn c03_ordering_lemmas() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let raw = f64::NEG_INFINITY;
    let slack = 1e-12;
    let (mut violations, mut positive, mut total) = (0, 0, 0);
    while total < 10_000 {
        let n = rng.gen_range(2..=100);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = rng.gen_range(-3.0..3.0);
        let z: Vec<f64> = p.iter().map(|v| a * v + rng.gen_range(-1.0..1.0)).collect();
        let (pp, zz, d) = (dotp(&p, &p), dotp(&z, &z), dotp(&p, &z));
        if d.abs() < 1e-8 * (pp * zz).sqrt() {
            continue;
        }
        total += 1;
        let dp = tau_dp(&p, &z, raw).unwrap().tau;
        let dz = tau_dz(&p, &z, raw).unwrap().tau;
        let du = tau_du(&p, &z, raw).unwrap().tau;
        let gm = tau_gm(&p, &z, raw).unwrap().tau;
        let tol = slack * dz.abs();
        let mut ok = dp.abs() <= du.abs() + tol && du.abs() <= dz.abs() + tol;
        ok &= dp.abs() <= gm + tol && gm <= dz.abs() + tol;
        if d > 0.0 {
            positive += 1;
            ok &= dp <= gm + tol && gm <= dz + tol;
        }
        if !ok {
            violations += 1;
        }
    }
    verdict(
        3,
        "ordering lemmas",
        violations == 0,
        &format!("{total} pairs ({positive} with p'z > 0), {violations} violations of |dp|<=|du|<=|dz|, |dp|<=gm<=|dz| (signed chain where p'z > 0)"),
    );
}

#[test]
fn c04_quadratic_convergence() {
    let strategies = ["lsy", "lsp", "fair", "dp", "dz", "du", "gm"];
    let mems = [MemorySize::Bounded(5), MemorySize::Bounded(10)];
    let rows = quadratic_rows(&strategies, &mems, &[1e-3, 1e-1]);
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !(r.iterations <= 5000.0 && r.rel_error.is_some_and(|e| e <= 1e-5)))
        .map(|r| format!("{}/l={}/a={:e}", r.strategy, r.ell, r.alpha))
        .collect();
    let max_it = rows.iter().map(|r| r.iterations).fold(0.0, f64::max);
    verdict(
        4,
        "quadratic convergence",
        bad.is_empty() && rows.len() == 28,
        &format!("{} runs, worst {max_it} iterations, not converged: {bad:?}", rows.len()),
    );
}

#[test]
fn c05_table_ordering() {
    let l5 = MemorySize::Bounded(5);
    let rows = quadratic_rows(&["id", "lsy", "lsp", "fair", "dp", "dz", "du", "gm"], &[l5], &[1e-1]);
    let it = |s: &str| find(&rows, s, l5, 1e-1).iterations;
    let new_worst = ["dp", "dz", "du", "gm", "fair"].map(it).into_iter().fold(0.0, f64::max);
    let old_best = ["lsy", "lsp", "id"].map(it).into_iter().fold(f64::INFINITY, f64::min);
    let id_rows = quadratic_rows(&["id"], &[MemorySize::Bounded(1)], &[1e-5]);
    let id_capped = id_rows[0].iterations == 5000.0 && id_rows[0].converged_by == StopReason::MaxIter.as_str();
    let summary: Vec<String> = ["dp", "dz", "du", "gm", "fair", "lsy", "lsp", "id"].iter().map(|s| format!("{s}={}", it(s))).collect();
    verdict(
        5,
        "strategy ordering",
        new_worst < old_best && id_capped,
        &format!(
            "a=1e-1 l=5: {} (max proposed {new_worst} < min baseline {old_best}); id a=1e-5 l=1: {} by {}",
            summary.join(" "),
            id_rows[0].iterations,
            id_rows[0].converged_by
        ),
    );
}

#[test]
fn c06_line_search_counts() {
    let mems = [MemorySize::Bounded(1), MemorySize::Bounded(5), MemorySize::Bounded(10), MemorySize::Unbounded];
    let alphas = [1e-5, 1e-3, 1e-1];
    let rows = quadratic_rows(&["dz", "dp"], &mems, &alphas);
    let dz_max = rows.iter().filter(|r| r.strategy == "dz").map(|r| r.avg_ls).fold(0.0, f64::max);
    let l5 = MemorySize::Bounded(5);
    let dp = find(&rows, "dp", l5, 1e-1).avg_ls;
    let dz = find(&rows, "dz", l5, 1e-1).avg_ls;
    verdict(
        6,
        "line-search behaviour",
        dz_max <= 1.5 && dp >= dz,
        &format!("dz max avg LS over 3x4 matrix {dz_max:.3} (limit 1.5); a=1e-1 l=5: dp {dp:.3} >= dz {dz:.3}"),
    );
}

#[test]
fn c07_tau_step_length() {
    let mut lines = Vec::new();
    let mut ok = true;
    let reg = StrategyRegistry::with_builtins();
    for &alpha in &[1e-3, 1e-1] {
        let q = QuadraticProblem::build(256, alpha, 14.0, 7).unwrap();
        let x0 = vec![0.0; 256];
        let (_, g0) = q.eval(&x0).unwrap();
        let a = q.regularizer().clone();
        let pcg = PcgConfig::default();

        // first iteration: empty memory, every secant fit sits at tau_min
        let first: Vec<f64> = ["dp", "gm", "dz"]
            .iter()
            .map(|s| {
                let (m, _) = build_initial_metric(reg.create(s).unwrap().as_ref(), None, &a, 0, TAU_MIN).unwrap();
                let InitialMetric::Shifted(op) = &m else { unreachable!() };
                let r = two_loop_apply(&LbfgsMemory::new(5), &g0, CenterStep::Solve { op, pcg: &pcg }).unwrap().r;
                r.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
        ok &= first[0] >= first[1] && first[1] >= first[2];

        // base step once tau is fitted to the first secant pair
        let mut cfg = OptimizerConfig::new(reg.create("dp").unwrap());
        cfg.max_iter = 1;
        let x1 = lbfgs_minimize(&q, &x0, &cfg).unwrap().x;
        let (_, g1) = q.eval(&x1).unwrap();
        let pair = SecantPair::new(
            x1.iter().zip(&x0).map(|(a, b)| a - b).collect(),
            g1.iter().zip(&g0).map(|(a, b)| a - b).collect(),
        )
        .unwrap();
        let fitted: Vec<(f64, f64)> = ["dp", "gm", "dz"]
            .iter()
            .map(|s| {
                let (m, _) = build_initial_metric(reg.create(s).unwrap().as_ref(), Some(&pair), &a, 1, TAU_MIN).unwrap();
                let InitialMetric::Shifted(op) = &m else { unreachable!() };
                let r = two_loop_apply(&LbfgsMemory::new(5), &g1, CenterStep::Solve { op, pcg: &pcg }).unwrap().r;
                (op.tau(), r.iter().map(|v| v * v).sum::<f64>().sqrt())
            })
            .collect();
        ok &= fitted[0].1 >= fitted[1].1 && fitted[1].1 >= fitted[2].1;
        lines.push(format!(
            "a={alpha:e}: first |d| {:.3e}/{:.3e}/{:.3e}; fitted tau {:.2e}/{:.2e}/{:.2e} -> |d| {:.3e}/{:.3e}/{:.3e}",
            first[0], first[1], first[2], fitted[0].0, fitted[1].0, fitted[2].0, fitted[0].1, fitted[1].1, fitted[2].1
        ));
    }
    verdict(7, "tau vs step length (dp/gm/dz)", ok, &lines.join("; "));
}

fn fd_rel_error(obj: &dyn Objective, x: &[f64]) -> f64 {
    let step = 1e-6;
    let (_, g) = obj.eval(x).unwrap();
    let mut xp = x.to_vec();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = obj.eval(&xp).unwrap().0;
        xp[i] = x[i] - step;
        let fm = obj.eval(&xp).unwrap().0;
        xp[i] = x[i];
        num += ((fp - fm) / (2.0 * step) - g[i]).powi(2);
        den += g[i] * g[i];
    }
    (num / den).sqrt()
}

/// Random small displacement whose samples sit at least 1e-3 pixels off the
/// grid lines, so every FD stencil stays inside one bilinear cell.
fn smooth_point(p: &RegistrationProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = p.grid().cells();
    let (w, h) = (p.grid().dims()[0], p.grid().dims()[1]);
    let mut u = vec![0.0; 2 * n];
    for c in 0..n {
        let centre = p.cell_center(c);
        for (axis, (x0, cells)) in [(centre.0, w), (centre.1, h)].into_iter().enumerate() {
            u[axis * n + c] = loop {
                let d: f64 = rng.gen_range(-0.02..0.02);
                let px = (x0 + d) * cells as f64 - 0.5;
                if (px - px.round()).abs() >= 1e-3 {
                    break d;
                }
            };
        }
    }
    u
}

#[test]
fn c08_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let q = QuadraticProblem::build(256, 1e-3, 14.0, 7).unwrap();
    let quad = (0..5)
        .map(|_| fd_rel_error(&q, &(0..256).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let (r, t) = make_disc_pair(16, 5.0, 4.0, (1.5, 0.0)).unwrap();
    let mut reg_worst: f64 = 0.0;
    for regularizer in [Regularizer::Curvature, Regularizer::elastic()] {
        let p = RegistrationProblem::new(r.clone(), t.clone(), 1e-3, regularizer).unwrap();
        for _ in 0..5 {
            let u = smooth_point(&p, &mut rng);
            reg_worst = reg_worst.max(fd_rel_error(&p, &u));
        }
    }
    verdict(
        8,
        "gradient checks",
        quad <= 1e-6 && reg_worst <= 1e-5,
        &format!("quadratic {quad:.2e} (limit 1e-6), registration curvature+elastic {reg_worst:.2e} (limit 1e-5)"),
    );
}

#[test]
fn c09_registration() {
    let t0 = Instant::now();
    let (r, t) = make_disc_pair(32, 8.0, 6.0, (2.0, 0.0)).unwrap();
    let p = RegistrationProblem::new(r, t, 1e-3, Regularizer::Curvature).unwrap();
    let reg = StrategyRegistry::with_builtins();
    let solve = |name: &str| {
        let mut cfg = OptimizerConfig::new(reg.create(name).unwrap());
        cfg.max_iter = 100;
        lbfgs_minimize(&p, &vec![0.0; p.dim()], &cfg).unwrap().record
    };
    let dp = solve("dp");
    let gm = solve("gm");
    let secs = t0.elapsed().as_secs_f64();
    let ls_ok = dp.converged_by != StopReason::LineSearchFailure && dp.failure.is_none();
    let within = (gm.reduction - dp.reduction).abs() <= 0.1 * dp.reduction;
    verdict(
        9,
        "registration 32x32",
        dp.reduction <= 0.5 && dp.iterations <= 100 && ls_ok && within && secs < 60.0,
        &format!(
            "dp J/J0 {:.4} in {} it ({}), gm J/J0 {:.4} ({:+.1}% of dp, limit 10%), {secs:.2}s (limit 60s)",
            dp.reduction,
            dp.iterations,
            dp.converged_by,
            gm.reduction,
            100.0 * (gm.reduction - dp.reduction) / dp.reduction
        ),
    );
}

#[test]
fn c10_pcg_contract() {
    // every tau*I + alpha*R system met while minimising the quadratic, each
    // solved against one fixed right-hand side
    let reg = StrategyRegistry::with_builtins();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let b: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut solves = 0;
    let mut in_run_unconverged = 0;
    let mut failures = Vec::new();
    let mut residual_gap: f64 = 0.0;
    for &alpha in &[1e-3, 1e-1] {
        let q = QuadraticProblem::build(256, alpha, 14.0, 7).unwrap();
        let a = q.regularizer().clone();
        for name in ["fair", "dp", "dz", "du", "gm"] {
            let mut cfg = OptimizerConfig::new(reg.create(name).unwrap());
            cfg.stopping.solution = Some(q.minimizer().to_vec());
            let record = lbfgs_minimize(&q, &vec![0.0; 256], &cfg).unwrap().record;
            in_run_unconverged += record.pcg_unconverged;
            let mut failed_taus = Vec::new();
            for &tau in &record.tau_trace {
                let op = ShiftedOperator::new(tau, a.clone());
                let res = pcg_solve(&op, &b, &PcgConfig::default()).unwrap();
                let ax = op.apply(&res.solution).unwrap();
                let true_res = b.iter().zip(&ax).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt() / b_norm;
                residual_gap = residual_gap.max((true_res - res.final_rel_residual).abs());
                solves += 1;
                if !(res.converged && res.final_rel_residual <= 1e-6) {
                    failed_taus.push(tau);
                }
            }
            if !failed_taus.is_empty() {
                let max_tau = failed_taus.iter().cloned().fold(0.0, f64::max);
                failures.push(format!("{name}@a={alpha:e} {}/{} (tau <= {max_tau:.1e})", failed_taus.len(), record.tau_trace.len()));
            }
        }
    }
    verdict(
        10,
        "PCG contract",
        failures.is_empty() && residual_gap <= 1e-8,
        &format!(
            "{solves} systems, residual report gap {residual_gap:.1e} (limit 1e-8); not at 1e-6 within 100 it: [{}]; in-run unconverged solves {in_run_unconverged}",
            failures.join(", ")
        ),
    );
}
