use matscale::analysis::{check_distance_bound_sigma, reference_scaling};
use matscale::hardgen::{
    default_b, first_step_factors, gen_hard, gen_rowsum_lb, gen_sparse_hard, recover_signs, recovery_precision,
};
use matscale::potential::project_to_v;
use matscale::solvers::sinkhorn_solve;
use matscale::{Error, Norm, Targets};

#[test]
fn sparse_instance_shape() {
    let inst = gen_sparse_hard(8, 4, 1).unwrap();
    assert_eq!(inst.blocks.len(), 2);
    assert_eq!(inst.matrix.nnz(), 32);
    assert!((inst.matrix.one_norm() - 1.0).abs() < 1e-15);
    assert!(inst.matrix.row_counts().iter().all(|&c| c == 4));
    assert_eq!(gen_sparse_hard(10, 4, 1).unwrap_err(), Error::InvalidBlock { n: 10, block: 4 });
}

#[test]
fn restricted_scaling_is_a_coarser_block_scaling() {
    let (n, s) = (32, 8);
    let inst = gen_sparse_hard(n, s, 3).unwrap();
    let eps = 1e-6;
    let (sc, _) = sinkhorn_solve(&inst.matrix, &Targets::uniform(n, n), eps, Norm::L2, 100_000).unwrap();
    for (i, block) in inst.blocks.iter().enumerate() {
        let r = inst.restrict(&sc, i);
        let (re, ce) = block.normalized().scaling_error(&r, &Targets::uniform(s, s), Norm::L2);
        let bound = eps * n as f64 / s as f64;
        assert!(re <= bound * (1.0 + 1e-9) && ce <= bound * (1.0 + 1e-9), "block {i}: {re} {ce} > {bound}");
    }
}

#[test]
fn per_block_recovery_succeeds_for_most_seeds() {
    let (n, s) = (64, 16);
    let mut ok = 0;
    for seed in 0..30 {
        let inst = gen_sparse_hard(n, s, 100 + seed).unwrap();
        // a (precision·s/n)-scaling of A restricts to a precision-scaling of every block
        let eps = recovery_precision(s, default_b(s)) * s as f64 / n as f64;
        let (sc, _) = sinkhorn_solve(&inst.matrix, &Targets::uniform(n, n), eps, Norm::L2, 1_000_000).unwrap();
        let all = (0..inst.blocks.len())
            .all(|i| recover_signs(&inst.restrict(&sc, i)).unwrap().0 == inst.blocks[i].a);
        if all {
            ok += 1;
        }
    }
    assert!(3 * ok >= 2 * 30, "recovered {ok}/30");
}

#[test]
fn expected_weighted_column_sum_is_2k_over_n() {
    let n = 8;
    let k = n / 2;
    let trials = 10_000;
    let mut samples = Vec::with_capacity(trials);
    for seed in 0..trials as u64 {
        let inst = gen_hard(n, 2.0, seed).unwrap();
        let v: f64 = (0..k).map(|i| f64::from(inst.w(i)[0] * inst.a[i])).sum();
        samples.push(v);
    }
    let mean = samples.iter().sum::<f64>() / trials as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let se = (var / trials as f64).sqrt();
    let expect = 2.0 * k as f64 / n as f64;
    assert!((mean - expect).abs() <= 3.0 * se, "mean {mean} expected {expect} se {se}");
}

#[test]
fn small_gradient_implies_small_distance_on_hard_instances() {
    for seed in 0..10 {
        let n = 8;
        let inst = gen_hard(n, default_b(n), seed).unwrap();
        let a = inst.normalized();
        let star = reference_scaling(&a, &Targets::uniform(n, n)).unwrap();
        let mut first = first_step_factors(&inst);
        let shift = ((2 * inst.k * n) as f64).ln();
        first.x.iter_mut().for_each(|v| *v += shift);
        let rep = check_distance_bound_sigma(&a, &project_to_v(&first), &star, 0.5).unwrap();
        assert!(rep.pass, "{rep:?}");
        // a point just off the minimizer satisfies the premise
        let near = star.add_stacked(&vec![1e-6; 2 * n], 1.0);
        let rep = check_distance_bound_sigma(&a, &near, &star, 0.5).unwrap();
        assert!(rep.pass && rep.instance.contains("premise=true"), "{rep:?}");
    }
}

#[test]
fn rowsum_instance_rejects_bad_tau() {
    assert!(gen_rowsum_lb(8, 0.3, 0).is_err());
    assert!(gen_rowsum_lb(8, 0.0625, 0).is_err());
    assert!(gen_rowsum_lb(8, 0.25, 0).is_ok());
}
