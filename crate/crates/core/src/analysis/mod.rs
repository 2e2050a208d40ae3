//! Numerical checks of the strong-convexity, distance, robustness and
//! step-schedule bounds the solvers rely on.
//!
//! Every check returns [`LemmaReport`] rows with the measured quantity, the
//! bound it is compared against, and the verdict.

mod reference;
mod schedule;
mod suites;

use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;

pub use reference::{reference_f_star, reference_freg_min, reference_scaling, REFERENCE_ITERS, REFERENCE_TOL};
pub use schedule::{
    brute_force_schedule, delta_schedule_lower_bound, optimal_schedule, optimal_schedule_cost, schedule_cost,
    schedule_final, MAX_BRUTE_FORCE_LEN,
};
pub use suites::{run_suite, run_trial, Suite};

use crate::boxoracle::{SddMatrix, SddQuadratic};
use crate::error::{Error, Result};
use crate::matcore::{Norm, ScalingPair, SparseNonNegMatrix, TargetMarginals};
use crate::potential::{grad_f, hessian_f, hessian_reg, potential_reg, project_to_v, PotentialConfig};
use crate::scalar::norm_l2;

/// Largest Hessian dimension (`n_rows + n_cols`) the dense checks accept.
pub const MAX_DENSE_DIM: usize = 128;
/// Absolute slack on eigenvalue comparisons.
pub const EIG_TOL: f64 = 1e-9;
/// Slack on comparisons that hold with equality in exact arithmetic.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Marginal ℓ1 error above which a claimed exact scaling is rejected.
pub const SCALED_TOL: f64 = 1e-10;

/// One verdict: `pass` iff `measured` meets `bound` within the check's tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    pub lemma: String,
    pub instance: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

impl LemmaReport {
    pub const CSV_HEADER: &'static str = "lemma,instance,measured,bound,pass";

    fn new(lemma: &str, instance: String, measured: f64, bound: f64, pass: bool) -> Self {
        Self {
            lemma: lemma.to_string(),
            instance,
            measured,
            bound,
            pass,
        }
    }

    pub fn with_instance(mut self, instance: impl Into<String>) -> Self {
        self.instance = instance.into();
        self
    }
}

/// Writes reports as CSV with [`LemmaReport::CSV_HEADER`].
pub fn write_report_csv<W: Write>(reports: &[LemmaReport], mut w: W) -> Result<()> {
    writeln!(w, "{}", LemmaReport::CSV_HEADER)?;
    for r in reports {
        writeln!(w, "{},{},{:e},{:e},{}", r.lemma, r.instance, r.measured, r.bound, r.pass)?;
    }
    Ok(())
}

fn describe(a: &SparseNonNegMatrix<f64>) -> String {
    format!("{}x{} nnz={}", a.n_rows(), a.n_cols(), a.nnz())
}

fn check_dense_dim(a: &SparseNonNegMatrix<f64>) -> Result<()> {
    let dim = a.n_rows() + a.n_cols();
    if dim > MAX_DENSE_DIM {
        return Err(Error::TooLarge { dim, max: MAX_DENSE_DIM });
    }
    Ok(())
}

fn require_square(a: &SparseNonNegMatrix<f64>) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::InvalidParams(format!("expected a square matrix, got {}", describe(a))));
    }
    Ok(a.n_rows())
}

/// Smallest entry of `A(x, y)` over all `n_rows·n_cols` positions (0 if any is missing).
pub fn smallest_scaled_entry_dense(a: &SparseNonNegMatrix<f64>, s: &ScalingPair<f64>) -> f64 {
    if a.nnz() < a.n_rows() * a.n_cols() {
        return 0.0;
    }
    a.scaled_values(s).into_iter().fold(f64::INFINITY, f64::min)
}

/// `(μ, ν)`: smallest and largest entry of an entrywise-positive matrix.
fn entry_range(a: &SparseNonNegMatrix<f64>) -> Result<(f64, f64)> {
    if a.nnz() < a.n_rows() * a.n_cols() {
        return Err(Error::InvalidParams(format!("matrix is not entrywise positive: {}", describe(a))));
    }
    Ok((a.smallest_positive_entry()?, a.largest_entry()?))
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `∇²f(x, y) ⪰ n·μ(x, y)·P_V` for square `A`.
///
/// Returns two reports: the second-smallest Hessian eigenvalue against
/// `n·μ(x, y) − 1e-9`, and the residual `‖H·(1, −1)‖₂/‖(1, −1)‖₂` against `1e-12`
/// (relative to the largest diagonal entry when that exceeds one).
pub fn check_hessian_lower_bound(a: &SparseNonNegMatrix<f64>, s: &ScalingPair<f64>) -> Result<Vec<LemmaReport>> {
    let n = require_square(a)?;
    check_dense_dim(a)?;
    let h = hessian_f(a, s)?;
    let ev = sorted_eigenvalues(h.to_dense_f64());
    let bound = n as f64 * smallest_scaled_entry_dense(a, s);
    let lambda2 = ev[1];

    let kernel: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let scale = h.row_diag.iter().chain(&h.col_diag).fold(1.0f64, |m, d| m.max(*d));
    let residual = norm_l2(&h.apply(&kernel)) / norm_l2(&kernel) / scale;

    let inst = describe(a);
    Ok(vec![
        LemmaReport::new("hessian-lb", inst.clone(), lambda2, bound, lambda2 >= bound - EIG_TOL),
        LemmaReport::new("hessian-kernel", inst, residual, IDENTITY_TOL, residual <= IDENTITY_TOL),
    ])
}

fn check_scaled(a: &SparseNonNegMatrix<f64>, s: &ScalingPair<f64>, t: &TargetMarginals<f64>) -> Result<()> {
    let (re, ce) = a.scaling_error(s, t, Norm::L1);
    if re + ce > SCALED_TOL {
        return Err(Error::NotScaled(re + ce));
    }
    Ok(())
}

/// Smallest-entry bounds at and around the exact scaling (uniform targets).
///
/// Reports `μ(x*, y*) ≥ (1/n²)(μ/ν)³` and
/// `μ(x, y) ≥ μ(x*, y*)·e^{−2‖(x, y) − (x*, y*)‖∞}`, both with relative slack `1e-12`.
pub fn check_smallest_entry_bounds(
    a: &SparseNonNegMatrix<f64>,
    s_star: &ScalingPair<f64>,
    s: &ScalingPair<f64>,
) -> Result<Vec<LemmaReport>> {
    let n = require_square(a)?;
    check_scaled(a, s_star, &TargetMarginals::uniform(n, n))?;
    let (mu, nu) = entry_range(a)?;
    let mu_star = smallest_scaled_entry_dense(a, s_star);
    let bound_star = (mu / nu).powi(3) / (n * n) as f64;
    let mu_s = smallest_scaled_entry_dense(a, s);
    let bound_s = mu_star * (-2.0 * s.inf_distance(s_star)).exp();
    let inst = describe(a);
    Ok(vec![
        LemmaReport::new(
            "smallest-entry-star",
            inst.clone(),
            mu_star,
            bound_star,
            mu_star >= bound_star * (1.0 - IDENTITY_TOL),
        ),
        LemmaReport::new("smallest-entry-shift", inst, mu_s, bound_s, mu_s >= bound_s * (1.0 - IDENTITY_TOL)),
    ])
}

/// Variation of an exact scaling: `x*_max − x*_min ≤ ln(ν/μ) + ln(r_max/r_min)`,
/// and the same for `y*` with `c`.
pub fn check_variation_norm(
    a: &SparseNonNegMatrix<f64>,
    t: &TargetMarginals<f64>,
    s_star: &ScalingPair<f64>,
) -> Result<Vec<LemmaReport>> {
    check_scaled(a, s_star, t)?;
    let (mu, nu) = entry_range(a)?;
    let spread = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
        hi - lo
    };
    let ratio = |v: &[f64]| spread(&v.iter().map(|x| x.ln()).collect::<Vec<_>>());
    let inst = describe(a);
    let mut out = Vec::new();
    for (name, v, targets) in [("variation-x", &s_star.x, t.r()), ("variation-y", &s_star.y, t.c())] {
        let measured = spread(v);
        let bound = (nu / mu).ln() + ratio(targets);
        // the scaling is only exact to SCALED_TOL
        let pass = measured <= bound + 1e-9;
        out.push(LemmaReport::new(name, inst.clone(), measured, bound, pass));
    }
    Ok(out)
}

fn distance_report(
    lemma: &str,
    a: &SparseNonNegMatrix<f64>,
    s: &ScalingPair<f64>,
    s_star: &ScalingPair<f64>,
    delta: f64,
    threshold: f64,
) -> Result<LemmaReport> {
    let n = a.n_rows();
    let s = project_to_v(s);
    let s_star = project_to_v(s_star);
    let g = norm_l2(&grad_f(a, &s, &TargetMarginals::uniform(n, n))?);
    let dist = s.inf_distance(&s_star);
    let premise = g < threshold;
    let pass = !premise || dist <= delta * (1.0 + IDENTITY_TOL);
    let inst = format!("{} grad={g:e} premise={premise}", describe(a));
    Ok(LemmaReport::new(lemma, inst, dist, delta, pass))
}

/// If `‖∇f(x, y)‖₂ < δ·(1/n)(μ/ν)³e⁻²` then `‖(x, y) − (x*, y*)‖∞ ≤ δ`.
///
/// Both points are projected onto `V` first. When the gradient is above the
/// threshold the report passes vacuously; its `instance` records the premise.
pub fn check_distance_bound(
    a: &SparseNonNegMatrix<f64>,
    s: &ScalingPair<f64>,
    s_star: &ScalingPair<f64>,
    delta: f64,
) -> Result<LemmaReport> {
    let n = require_square(a)?;
    check_delta(delta)?;
    let (mu, nu) = entry_range(a)?;
    let threshold = delta * (mu / nu).powi(3) / (n as f64 * std::f64::consts::E.powi(2));
    distance_report("grad-to-inf", a, s, s_star, delta, threshold)
}

/// [`check_distance_bound`] with the threshold `δ/(27ne²)` used for hard instances,
/// whose entry ratio is at most 3.
pub fn check_distance_bound_sigma(
    a: &SparseNonNegMatrix<f64>,
    s: &ScalingPair<f64>,
    s_star: &ScalingPair<f64>,
    delta: f64,
) -> Result<LemmaReport> {
    let n = require_square(a)?;
    check_delta(delta)?;
    let (mu, nu) = entry_range(a)?;
    if nu / mu > 3.0 * (1.0 + IDENTITY_TOL) {
        return Err(Error::InvalidParams(format!("entry ratio {} exceeds 3", nu / mu)));
    }
    let threshold = delta / (27.0 * n as f64 * std::f64::consts::E.powi(2));
    distance_report("grad-to-inf-sigma", a, s, s_star, delta, threshold)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidDelta(delta));
    }
    Ok(())
}

/// `e⁻²∇²f̃(s) ⪯ ∇²f̃(s′) ⪯ e²∇²f̃(s)` for `‖s − s′‖∞ ≤ 1`.
///
/// `measured` is the smaller of the two pencil eigenvalue margins divided by
/// the largest Hessian entry; `bound` is `−1e-9`.
pub fn check_second_order_robust(
    a: &SparseNonNegMatrix<f64>,
    cfg: &PotentialConfig<f64>,
    s: &ScalingPair<f64>,
    s2: &ScalingPair<f64>,
) -> Result<LemmaReport> {
    check_dense_dim(a)?;
    let dist = s.inf_distance(s2);
    if dist > 1.0 + IDENTITY_TOL {
        return Err(Error::InvalidParams(format!("points are {dist} apart in l-inf, need <= 1")));
    }
    let h = hessian_reg(a, s, cfg)?.to_dense_f64();
    let h2 = hessian_reg(a, s2, cfg)?.to_dense_f64();
    let e2 = std::f64::consts::E.powi(2);
    let lo = sorted_eigenvalues(&h2 - &h / e2)[0];
    let hi = sorted_eigenvalues(&h * e2 - &h2)[0];
    let scale = h.amax().max(h2.amax()).max(1e-300);
    let measured = lo.min(hi) / scale;
    Ok(LemmaReport::new(
        "second-order-robust",
        format!("{} dist={dist:.3}", describe(a)),
        measured,
        -EIG_TOL,
        measured >= -EIG_TOL,
    ))
}

/// Midpoint convexity of `f̃`: `f̃((s + s′)/2) ≤ (f̃(s) + f̃(s′))/2`.
pub fn check_convexity_midpoint(
    a: &SparseNonNegMatrix<f64>,
    cfg: &PotentialConfig<f64>,
    s: &ScalingPair<f64>,
    s2: &ScalingPair<f64>,
) -> Result<LemmaReport> {
    let mid = ScalingPair {
        x: s.x.iter().zip(&s2.x).map(|(p, q)| 0.5 * (p + q)).collect(),
        y: s.y.iter().zip(&s2.y).map(|(p, q)| 0.5 * (p + q)).collect(),
    };
    let (f1, f2, fm) = (potential_reg(a, s, cfg)?, potential_reg(a, s2, cfg)?, potential_reg(a, &mid, cfg)?);
    let avg = 0.5 * (f1 + f2);
    let slack = IDENTITY_TOL * (1.0 + f1.abs().max(f2.abs()));
    Ok(LemmaReport::new("convexity-midpoint", describe(a), fm, avg, fm <= avg + slack))
}

/// Entrywise-positive `n_rows × n_cols` matrix with entries uniform in `[lo, hi]`,
/// normalized to `‖A‖₁ = 1`.
pub fn random_positive_matrix<R: Rng + ?Sized>(
    n_rows: usize,
    n_cols: usize,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> SparseNonNegMatrix<f64> {
    let trips: Vec<_> = (0..n_rows)
        .flat_map(|i| (0..n_cols).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, rng.random_range(lo..=hi)))
        .collect();
    let a = SparseNonNegMatrix::from_triplets(n_rows, n_cols, trips).expect("positive entries in range");
    a.normalized().expect("non-empty").0
}

/// Random SDD quadratic of dimension `d` with non-positive off-diagonals.
///
/// Each pair is an edge with probability 1/2 and weight uniform in `[0, 1]`;
/// diagonals exceed the absolute off-diagonal row sums by up to 1; `b` is
/// uniform in `[−2, 2]`.
pub fn random_sdd_quadratic<R: Rng + ?Sized>(d: usize, rng: &mut R) -> SddQuadratic<f64> {
    let mut pairs = Vec::new();
    let mut diag = vec![0.0; d];
    for i in 0..d {
        for j in i + 1..d {
            if rng.random_bool(0.5) {
                let w: f64 = rng.random_range(0.0..1.0);
                pairs.push((i, j, -w));
                diag[i] += w;
                diag[j] += w;
            }
        }
    }
    for v in diag.iter_mut() {
        *v += rng.random_range(0.0..1.0);
    }
    let h = SddMatrix::from_pairs(diag, pairs).expect("indices in range");
    let b = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    SddQuadratic::new(h, b).expect("dimensions agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> SparseNonNegMatrix<f64> {
        let v = 1.0 / (n * n) as f64;
        SparseNonNegMatrix::from_triplets(n, n, (0..n * n).map(|k| (k / n, k % n, v))).unwrap()
    }

    #[test]
    fn uniform_matrix_is_the_equality_case() {
        let a = uniform(4);
        let s = ScalingPair::zeros(4, 4);
        let r = check_hessian_lower_bound(&a, &s).unwrap();
        assert!(r.iter().all(|x| x.pass));
        assert!((r[0].measured - 0.25).abs() < 1e-12);
        assert!((r[0].bound - 0.25).abs() < 1e-15);
        let r = check_smallest_entry_bounds(&a, &s, &s).unwrap();
        assert!((r[0].measured - r[0].bound).abs() < 1e-15);
        assert!(r.iter().all(|x| x.pass));
    }

    #[test]
    fn hessian_check_rejects_large_and_rectangular() {
        let a = uniform(65);
        assert_eq!(
            check_hessian_lower_bound(&a, &ScalingPair::zeros(65, 65)).unwrap_err(),
            Error::TooLarge { dim: 130, max: 128 }
        );
        let b = SparseNonNegMatrix::from_triplets(1, 2, [(0, 0, 0.5), (0, 1, 0.5)]).unwrap();
        assert!(check_hessian_lower_bound(&b, &ScalingPair::zeros(1, 2)).is_err());
    }

    #[test]
    fn smallest_entry_needs_exact_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_positive_matrix(3, 3, 0.2, 1.0, &mut rng);
        let s = ScalingPair::zeros(3, 3);
        assert!(matches!(check_smallest_entry_bounds(&a, &s, &s), Err(Error::NotScaled(_))));
    }

    #[test]
    fn perturbed_scaling_keeps_entry_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_positive_matrix(6, 6, 0.1, 1.0, &mut rng);
        let t = TargetMarginals::uniform(6, 6);
        let star = reference_scaling(&a, &t).unwrap();
        let mut s = star.clone();
        s.x[2] -= 0.3;
        let r = check_smallest_entry_bounds(&a, &star, &s).unwrap();
        assert!(r.iter().all(|x| x.pass), "{r:?}");
        assert!(check_variation_norm(&a, &t, &star).unwrap().iter().all(|x| x.pass));
    }

    #[test]
    fn distance_at_the_minimizer_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_positive_matrix(5, 5, 0.5, 1.0, &mut rng);
        let star = reference_scaling(&a, &TargetMarginals::uniform(5, 5)).unwrap();
        let r = check_distance_bound(&a, &star, &star, 0.5).unwrap();
        assert!(r.pass && r.measured < 1e-12);
        assert!(r.instance.contains("premise=true"));
        assert!(check_distance_bound(&a, &star, &star, 1.5).is_err());
    }

    #[test]
    fn robustness_and_convexity_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_positive_matrix(4, 4, 0.1, 1.0, &mut rng);
        let cfg = PotentialConfig::new(0.1, 1.0, TargetMarginals::uniform(4, 4)).unwrap();
        let s = ScalingPair::new(vec![0.3, -0.2, 0.1, 0.0], vec![0.5, 0.2, -0.4, 0.1]).unwrap();
        let s2 = s.add_stacked(&[1.0, -1.0, 0.5, 0.0, -0.9, 1.0, 0.0, 0.2], 1.0);
        assert!(check_second_order_robust(&a, &cfg, &s, &s2).unwrap().pass);
        assert!(check_convexity_midpoint(&a, &cfg, &s, &s2).unwrap().pass);
        let far = s.add_stacked(&[2.0; 8], 1.0);
        assert!(check_second_order_robust(&a, &cfg, &s, &far).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = LemmaReport::new("x", "y".into(), 1.0, 2.0, true);
        let mut buf = Vec::new();
        write_report_csv(&[r], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "lemma,instance,measured,bound,pass\nx,y,1e0,2e0,true\n");
    }
}
