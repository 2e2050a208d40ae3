//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines appear in `cargo test` output in order.
//! The process fails if any criterion outside [`EXPECTED_RED`] fails.

use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use matscale::analysis::{
    check_hessian_lower_bound, random_positive_matrix, random_sdd_quadratic, reference_f_star, reference_freg_min,
    run_trial, Suite,
};
use matscale::boxoracle::{box_minimum, k_oracle, verify_oracle, SddMatrix, SddQuadratic, DEFAULT_ORACLE_ITERS};
use matscale::hardgen::{
    closed_form_col_sums, column_concentration_check, decode_rowsums, default_b, first_step_factors, gen_hard,
    gen_rowsum_lb, recover_signs, recovery_precision,
};
use matscale::oraclesim::{
    pencil_check, sparsify_hessian, CostTag, NoiseMode, NoiseModel, QueryLedger, SparsifierConfig,
};
use matscale::potential::{grad_f, grad_reg, hessian_f, potential_f, potential_reg, shift_x, PotentialConfig};
use matscale::solvers::{
    bcn_solve, bcn_step, derive_bcn_params, norm_control, sinkhorn_row_step, sinkhorn_solve, BcnOptions, Oracles,
};
use matscale::{Matrix, Norm, Scaling, Targets};

/// Criteria that fail for a documented reason; their FAIL line is still printed.
const EXPECTED_RED: &[usize] = &[11];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_point(n_rows: usize, n_cols: usize, radius: f64, rng: &mut ChaCha8Rng) -> Scaling {
    Scaling {
        x: (0..n_rows).map(|_| rng.random_range(-radius..=radius)).collect(),
        y: (0..n_cols).map(|_| rng.random_range(-radius..=radius)).collect(),
    }
}

fn central_difference(f: impl Fn(&Scaling) -> f64, s: &Scaling, h: f64) -> Vec<f64> {
    (0..s.dim())
        .map(|k| {
            let mut d = vec![0.0; s.dim()];
            d[k] = h;
            (f(&s.add_stacked(&d, 1.0)) - f(&s.add_stacked(&d, -1.0))) / (2.0 * h)
        })
        .collect()
}

fn rel_inf_error(g: &[f64], fd: &[f64]) -> f64 {
    let diff = g.iter().zip(fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = g.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    diff / scale
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let a = random_positive_matrix(5, 5, 0.05, 1.0, &mut r);
        let cfg = PotentialConfig::new(0.1, 1.0, Targets::uniform(5, 5)).unwrap();
        let s = random_point(5, 5, 1.0, &mut r);
        let g = grad_f(&a, &s, cfg.targets()).unwrap();
        let fd = central_difference(|p| potential_f(&a, p, cfg.targets()).unwrap(), &s, 1e-6);
        worst = worst.max(rel_inf_error(&g, &fd));
        let g = grad_reg(&a, &s, &cfg).unwrap();
        let fd = central_difference(|p| potential_reg(&a, p, &cfg).unwrap(), &s, 1e-6);
        worst = worst.max(rel_inf_error(&g, &fd));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-6 && secs < 10.0,
        format!("max relative error {worst:.2e} (tol 1e-6), {secs:.2}s (limit 10s)"),
    )
}

fn criterion_2() -> Verdict {
    let mut fails = 0;
    let mut min_margin = f64::INFINITY;
    let mut max_kernel: f64 = 0.0;
    let mut check = |a: &Matrix, s: &Scaling| {
        let rep = check_hessian_lower_bound(a, s).unwrap();
        min_margin = min_margin.min(rep[0].measured - rep[0].bound);
        max_kernel = max_kernel.max(rep[1].measured);
        if !rep.iter().all(|r| r.pass) {
            fails += 1;
        }
    };
    for seed in 0..100 {
        let mut r = rng(2000 + seed);
        let a = random_positive_matrix(6, 6, 0.05, 1.0, &mut r);
        let s = random_point(6, 6, 1.0, &mut r);
        check(&a, &s);
    }
    let v = 1.0 / 36.0;
    let uniform = Matrix::from_triplets(6, 6, (0..36).map(|k| (k / 6, k % 6, v))).unwrap();
    check(&uniform, &Scaling::zeros(6, 6));
    verdict(
        fails == 0,
        format!("{fails}/101 failed; min(lambda2 - n*mu) {min_margin:.2e}, max kernel residual {max_kernel:.2e}"),
    )
}

fn criterion_3() -> Verdict {
    let mut fails = Vec::new();
    let path = SddMatrix::from_pairs(vec![2.0, 2.0], [(0, 1, -1.0)]).unwrap();
    let worked = [
        (SddQuadratic::new(path.clone(), vec![0.0, 0.0]).unwrap(), 0.0),
        (SddQuadratic::new(SddMatrix::from_pairs(vec![2.0], []).unwrap(), vec![-3.0]).unwrap(), -2.0),
        (SddQuadratic::new(path, vec![-1.0, -1.0]).unwrap(), -1.0),
    ];
    for (i, (p, opt)) in worked.iter().enumerate() {
        let res = k_oracle(p, DEFAULT_ORACLE_ITERS).unwrap();
        let (_, found) = box_minimum(p).unwrap();
        if (found - opt).abs() > 1e-12 || !verify_oracle(p, &res, Some(1e-3)).unwrap() {
            fails.push(format!("worked example {i}"));
        }
    }
    for seed in 0..197u64 {
        let mut r = rng(3000 + seed);
        let d = 1 + (seed as usize % 8);
        let p = random_sdd_quadratic(d, &mut r);
        let res = k_oracle(&p, DEFAULT_ORACLE_ITERS).unwrap();
        if !verify_oracle(&p, &res, None).unwrap() {
            fails.push(format!("seed {seed} d={d}"));
        }
    }
    verdict(fails.is_empty(), format!("200 instances (3 worked, box optima 0/-2/-1), failures: {fails:?}"))
}

/// Runs `T` iterations (step + norm control) and returns the worst
/// `gap_{i+1} − ρ·gap_i` seen.
fn worst_recurrence_excess(a: &Matrix, cfg: &PotentialConfig<f64>, freg_star: f64, oracles: &mut Oracles) -> f64 {
    let params = derive_bcn_params(a, cfg, 1.0).unwrap();
    let rho = params.contraction(cfg);
    let mut ledger = QueryLedger::new();
    let mut s = Scaling::zeros(a.n_rows(), a.n_cols());
    let mut gap = potential_reg(a, &s, cfg).unwrap() - freg_star;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..params.t {
        let step = bcn_step(a, &s, cfg, &params, oracles, &mut ledger).unwrap();
        let (next, _) = norm_control(a, &step.next, &params, oracles, &mut ledger).unwrap();
        s = next;
        let g = potential_reg(a, &s, cfg).unwrap() - freg_star;
        worst = worst.max(g - rho * gap);
        gap = g;
    }
    worst
}

fn criterion_4() -> Verdict {
    // (exact excess, adversarial excess, slack) per instance
    let per_instance: Vec<(f64, f64, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..20u64)
            .map(|seed| {
                scope.spawn(move || {
                    let mut r = rng(4000 + seed);
                    let a = random_positive_matrix(8, 8, 0.05, 1.0, &mut r);
                    let cfg = PotentialConfig::new(0.1, 1.0, Targets::uniform(8, 8)).unwrap();
                    let (_, star) = reference_freg_min(&a, &cfg).unwrap();
                    let exact = worst_recurrence_excess(&a, &cfg, star, &mut Oracles::exact());
                    let slack = derive_bcn_params(&a, &cfg, 1.0).unwrap().step_slack();
                    let mut adversarial = Oracles::noisy(NoiseMode::Adversarial, seed);
                    let noisy = worst_recurrence_excess(&a, &cfg, star, &mut adversarial);
                    (exact, noisy, slack)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let worst_exact = per_instance.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_noisy = per_instance.iter().map(|p| p.1 - p.2).fold(f64::NEG_INFINITY, f64::max);
    let slack = per_instance.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    verdict(
        worst_exact <= 1e-10 && worst_noisy <= 1e-10,
        format!(
            "exact: max(gap'-rho*gap) {worst_exact:.2e} (tol 1e-10); adversarial: max excess over slack \
             {worst_noisy:.2e} (smallest slack {slack:.2e})"
        ),
    )
}

fn positive_instance(n: usize, seed: u64) -> Matrix {
    random_positive_matrix(n, n, 0.5, 1.5, &mut rng(seed))
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let eps: f64 = 0.05;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..10 {
        let a = positive_instance(16, 5000 + seed);
        let t = Targets::uniform(16, 16);
        let f_star = reference_f_star(&a, &t).unwrap();
        let opts = BcnOptions { trace: false, ..Default::default() };
        let sol = bcn_solve(&a, &t, eps, 1.0, &mut Oracles::exact(), &opts).unwrap();
        worst = worst.max(potential_f(&a, &sol.scaling, &t).unwrap() - f_star);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 6.0 * eps * eps && secs < 60.0,
        format!("max f - f* {worst:.2e} (bound {:.2e}), {secs:.1}s (limit 60s)", 6.0 * eps * eps),
    )
}

fn criterion_6() -> Verdict {
    let mut worst_ratio: f64 = 0.0;
    let mut premise_shifts = 0;
    let mut total_shifts = 0;
    let mut increases = 0;
    let mut cases = 0;
    let multiples = [0.5, 1.0, 1.49, 1.5, 1.51, 2.0, 2.01, 3.0, 4.0, 8.0, 100.0, 1e4];
    for seed in 0..4u64 {
        let mut r = rng(6000 + seed);
        let a = if seed % 2 == 0 {
            random_positive_matrix(8, 8, 0.05, 1.0, &mut r)
        } else {
            // sparse support: diagonal plus one off-diagonal band
            let trips: Vec<_> = (0..8).flat_map(|i| [(i, i, 1.0), (i, (i + 1) % 8, 0.25)]).collect();
            Matrix::from_triplets(8, 8, trips).unwrap().normalized().unwrap().0
        };
        let cfg = PotentialConfig::new(0.1, 1.0, Targets::uniform(8, 8)).unwrap();
        let params = derive_bcn_params(&a, &cfg, 1.0).unwrap();
        let c = params.c_prime;
        let f0 = potential_reg(&a, &Scaling::zeros(8, 8), &cfg).unwrap();
        for &m in &multiples {
            let base = random_point(8, 8, 0.5, &mut r);
            let lift = (m * c / a.one_norm_scaled(&base)).ln();
            let s = shift_x(&base, -lift);
            for mode in [NoiseMode::Exact, NoiseMode::Multiplicative, NoiseMode::Adversarial] {
                cases += 1;
                let mut oracles = Oracles::noisy(mode, seed);
                let mut ledger = QueryLedger::new();
                let (out, shifts) = norm_control(&a, &s, &params, &mut oracles, &mut ledger).unwrap();
                worst_ratio = worst_ratio.max(a.one_norm_scaled(&out) / c);
                total_shifts += shifts;
                let mut cur = s.clone();
                for _ in 0..shifts {
                    let next = shift_x(&cur, std::f64::consts::LN_2);
                    let f_cur = potential_reg(&a, &cur, &cfg).unwrap();
                    if f_cur <= f0 && a.one_norm_scaled(&cur) >= c {
                        premise_shifts += 1;
                        if potential_reg(&a, &next, &cfg).unwrap() > f_cur + 1e-12 {
                            increases += 1;
                        }
                    }
                    cur = next;
                }
            }
        }
    }
    verdict(
        worst_ratio <= 2.0 && increases == 0,
        format!(
            "{cases} cases, max final norm/C' {worst_ratio:.3} (limit 2); {total_shifts} shifts, \
             {premise_shifts} with premise, {increases} increases"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut detail = Vec::new();
    let mut pass = true;
    for n in [32usize, 64] {
        let b = default_b(n);
        let mut recovered = 0;
        let mut factor_err: f64 = 0.0;
        let mut min_gap_ratio = f64::INFINITY;
        for seed in 0..30u64 {
            let inst = gen_hard(n, b, 7000 + seed).unwrap();
            let t = Targets::uniform(n, n);
            let (s, _) = sinkhorn_solve(&inst.normalized(), &t, recovery_precision(n, b), Norm::L2, 1_000_000).unwrap();
            if recover_signs(&s).unwrap().0 == inst.a {
                recovered += 1;
            }
            let first = first_step_factors(&inst);
            let direct = sinkhorn_row_step(&inst.matrix, &Scaling::zeros(n, n), &t);
            let k = inst.k as f64;
            for (i, &ai) in inst.a.iter().enumerate() {
                let x1 = first.x[2 * i].exp();
                let x2 = first.x[2 * i + 1].exp();
                let expect = 1.0 / (2.0 * k * (n as f64 + 2.0 * f64::from(ai) / b));
                factor_err = factor_err.max((x1 - expect).abs() / expect);
                factor_err = factor_err.max((direct.x[2 * i].exp() - x1).abs() / x1);
                factor_err = factor_err.max((direct.x[2 * i + 1].exp() - x2).abs() / x2);
                min_gap_ratio = min_gap_ratio.min((x1 / x2).ln().abs() / (4.0 / (n as f64 * b)));
            }
        }
        let ok = 3 * recovered >= 2 * 30 && factor_err <= 1e-12 && min_gap_ratio >= 1.0;
        pass &= ok;
        detail.push(format!(
            "n={n} b={b}: recovered {recovered}/30, factor rel err {factor_err:.1e}, min |ln(X1/X2)|/(4/(nb)) {min_gap_ratio:.3}"
        ));
    }
    verdict(pass, detail.join("; "))
}

fn criterion_8() -> Verdict {
    let n = 64;
    let b = default_b(n);
    let mut passes = 0;
    let mut closed_err: f64 = 0.0;
    for seed in 0..1000u64 {
        let inst = gen_hard(n, b, 8000 + seed).unwrap();
        let direct = inst.matrix.col_marginals(&first_step_factors(&inst));
        for (c, d) in closed_form_col_sums(&inst).iter().zip(&direct) {
            closed_err = closed_err.max((c - d).abs());
        }
        if column_concentration_check(&inst).pass {
            passes += 1;
        }
    }
    verdict(
        closed_err <= 1e-12 && passes >= 990,
        format!("closed form vs direct {closed_err:.1e} (tol 1e-12); concentration held in {passes}/1000 (need 990)"),
    )
}

fn criterion_9() -> Verdict {
    let mut pass = true;
    let mut cases = 0;
    for n in [4usize, 8, 16, 32, 64] {
        for m in [1, n / 4, n / 2].into_iter().filter(|m| *m >= 1) {
            let tau = m as f64 / n as f64;
            for seed in 0..3u64 {
                cases += 1;
                let inst = gen_rowsum_lb(n, tau, 9000 + seed).unwrap();
                let n2 = 2 * (n * n) as i64;
                let exact = inst.matrix_with(Ratio::new(3, n2), Ratio::new(1, n2)).unwrap();
                let col_ok = exact.col_sums().iter().all(|c| *c == Ratio::new(1, n as i64));
                let rows = exact.row_sums();
                let row_ok = inst.a.iter().enumerate().all(|(i, &ai)| {
                    let expect = Ratio::new(1, n as i64) + Ratio::new(i64::from(ai) * m as i64, (n * n) as i64);
                    let mirror = Ratio::new(1, n as i64) - Ratio::new(i64::from(ai) * m as i64, (n * n) as i64);
                    rows[i] == expect && rows[i + n / 2] == mirror
                });
                let mut r = rng(9100 + seed);
                let bound = tau / n as f64;
                let noisy: Vec<f64> = inst
                    .matrix
                    .row_sums()
                    .iter()
                    .map(|v| v + bound * r.random_range(-0.999..0.999))
                    .collect();
                pass &= col_ok && row_ok && decode_rowsums(&noisy) == inst.a;
            }
        }
    }
    verdict(pass, format!("{cases} instances, exact rational sums and noisy decoding"))
}

fn criterion_10() -> Verdict {
    let mut fails = 0;
    let mut rows = 0;
    for seed in 0..50u64 {
        for rep in run_trial(Suite::Schedule, 2, 10_000 + seed).unwrap() {
            rows += 1;
            if !rep.pass {
                fails += 1;
            }
        }
    }
    verdict(fails == 0, format!("50 triples, {rows} (triple, N) checks, {fails} failures"))
}

fn criterion_11() -> Verdict {
    let a = positive_instance(8, 11_000);
    let t = Targets::uniform(8, 8);
    let opts = BcnOptions { trace: false, ..Default::default() };
    let run = |eps: f64| bcn_solve(&a, &t, eps, 1.0, &mut Oracles::exact(), &opts).unwrap();
    let (coarse, fine) = (run(0.05), run(0.025));
    let units = |s: &matscale::solvers::BcnSolution<f64>| s.ledger.units(CostTag::Gradient);
    let ratio = units(&fine) / units(&coarse);
    let per_iter = (units(&fine) / fine.iterations as f64) / (units(&coarse) / coarse.iterations as f64);
    verdict(
        (ratio - 4.0).abs() <= 0.2,
        format!(
            "gradient units ratio {ratio:.3} (need 4.0 +- 0.2); per-iteration ratio {per_iter:.3}; T {} -> {}",
            coarse.iterations, fine.iterations
        ),
    )
}

fn criterion_12() -> Verdict {
    let mut pass = true;
    let mut max_edges = 0;
    let mut max_rem: f64 = 0.0;
    let delta_a = 1e-3;
    let cfg = SparsifierConfig::default();
    let budget = cfg.edge_budget(32, 32);
    for seed in 0..20u64 {
        let mut r = rng(12_000 + seed);
        let a = random_positive_matrix(32, 32, 0.05, 1.0, &mut r);
        let s = random_point(32, 32, 0.5, &mut r);
        let mut noise = NoiseModel::new(NoiseMode::Multiplicative, seed);
        let hm = sparsify_hessian(&a, &s, delta_a, &cfg, &mut noise, &mut QueryLedger::new()).unwrap();
        let exact = hessian_f(&a, &s).unwrap().to_sdd();
        max_edges = max_edges.max(hm.n_edges());
        max_rem = max_rem.max(hm.remainder_l1);
        pass &= hm.n_edges() <= budget
            && pencil_check(&hm.hessian_form(32), &exact, 0.9, 1.1)
            && hm.remainder_l1 <= delta_a;
    }
    verdict(
        pass,
        format!("max edges {max_edges} (budget {budget}, dense has 1024); max remainder {max_rem:.2e} (delta_a {delta_a:e})"),
    )
}

fn params_regression() -> Verdict {
    let v = 1.0 / 256.0;
    let a = Matrix::from_triplets(16, 16, (0..256).map(|k| (k / 16, k % 16, v))).unwrap();
    let cfg = PotentialConfig::new(0.1, 1.0, Targets::uniform(16, 16)).unwrap();
    let p = derive_bcn_params(&a, &cfg, 1.0).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs();
    let ok = p.t == 15465
        && p.c_prime == 14.0
        && close(p.log_radius, 9.097875111861082)
        && close(p.eps_prime, 2.267263989433334e-06)
        && close(p.delta, 7.557546631444446e-07)
        && close(p.delta_a, 1.5342040709106637e-07)
        && close(p.contraction(&cfg), 0.9995465472021133);
    verdict(ok, format!("T={} C'={} eps'={:e}", p.t, p.c_prime, p.eps_prime))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 12] = [
        (1, "gradient finite differences", criterion_1),
        (2, "Hessian spectral lower bound", criterion_2),
        (3, "k-oracle contract", criterion_3),
        (4, "robust-update recurrence", criterion_4),
        (5, "end-to-end f - f* <= 6 eps^2", criterion_5),
        (6, "norm control", criterion_6),
        (7, "hard-instance pipeline", criterion_7),
        (8, "column concentration", criterion_8),
        (9, "row-sum lower-bound instance", criterion_9),
        (10, "delta-schedule bound", criterion_10),
        (11, "gradient cost scales as 1/eps^2", criterion_11),
        (12, "sparsifier contract", criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}: {name}: {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
        if !v.pass && !EXPECTED_RED.contains(&id) {
            unexpected.push(id);
        }
        if v.pass && EXPECTED_RED.contains(&id) {
            println!("criterion {id:>2} passed although listed as expected to fail");
        }
    }
    let p = params_regression();
    println!(
        "parameters   {}: derive_bcn_params n=16 mu=1/256 eps=0.1 B=1 k=1: {}",
        if p.pass { "PASS" } else { "FAIL" },
        p.detail
    );
    if !p.pass {
        unexpected.push(0);
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
