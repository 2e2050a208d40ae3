use std::f64::consts::{E, LN_2};

use super::{SolveTrace, TraceRecord};
use crate::boxoracle::{k_oracle, SddQuadratic, DEFAULT_ORACLE_ITERS};
use crate::error::{Error, Result};
use crate::matcore::{Norm, ScalingPair, SparseNonNegMatrix, TargetMarginals};
use crate::oraclesim::{
    approx_gradient, block_signs, estimate_one_norm, reg_hessian_diag_approx, sparsify_hessian,
    NoiseMode, NoiseModel, QueryLedger, SparsifierConfig,
};
use crate::potential::{log_radius_term, potential_f, potential_reg, shift_x, PotentialConfig};
use crate::scalar::Real;

/// Iteration count and error budgets of the box-constrained Newton method.
#[derive(Clone, Debug, PartialEq)]
pub struct BcnParams<T> {
    /// Number of Newton iterations `T`.
    pub t: usize,
    /// Norm-control threshold `C′`.
    pub c_prime: T,
    /// Per-iteration error budget `ε′`.
    pub eps_prime: T,
    /// Oracle ℓ∞ bound.
    pub k: T,
    /// Gradient budget `ε′/3`.
    pub delta: T,
    /// Hessian budget `ε′k²/(2e²)`.
    pub delta_a: T,
    /// `ln(4n + n·ln(1/μ)/ε²)`.
    pub log_radius: T,
    /// Smallest stored entry of the input.
    pub mu: T,
}

impl<T: Real> BcnParams<T> {
    /// Sublevel radius `R∞ = B + ln(4n + n·ln(1/μ)/ε²)`.
    pub fn r_inf(&self, cfg: &PotentialConfig<T>) -> T {
        cfg.b() + self.log_radius
    }

    /// Per-iteration contraction factor `1 − 1/(4e⁴·max(k·R∞, 1))`.
    pub fn contraction(&self, cfg: &PotentialConfig<T>) -> T {
        let e4 = T::c(E.powi(4));
        T::one() - T::one() / (T::c(4.0) * e4 * (self.k * self.r_inf(cfg)).max(T::one()))
    }

    /// Additive slack `e²δ_a/k² + 3δ/2` of one step.
    pub fn step_slack(&self) -> T {
        T::c(E * E) * self.delta_a / (self.k * self.k) + T::c(1.5) * self.delta
    }
}

/// Derives `T`, `C′`, `ε′` and the budgets for `A`, `cfg` and an oracle bound `k`.
pub fn derive_bcn_params<T: Real>(
    a: &SparseNonNegMatrix<T>,
    cfg: &PotentialConfig<T>,
    k: T,
) -> Result<BcnParams<T>> {
    if !(k >= T::one()) {
        return Err(Error::InvalidConfig(format!("oracle bound k must be >= 1, got {k}")));
    }
    let eps = cfg.eps();
    if !(eps > T::zero() && eps <= T::one()) {
        return Err(Error::InvalidEps(eps.to_f64_lossy()));
    }
    let mu = a.smallest_positive_entry()?;
    let b = cfg.b();
    let one = T::one();
    let e2 = T::c(E * E);
    let e4 = e2 * e2;
    let eps2 = eps * eps;
    let ln_inv_mu = (one / mu).ln();
    let l = log_radius_term(cfg.n_bar(), mu, eps);

    let log_gap = ((ln_inv_mu + T::c(2.0) * eps2 / b.exp()) / (eps2 / T::c(2.0))).ln();
    let t_real = T::c(4.0) * e4 * (k * b + l).max(one) * log_gap;
    let t = t_real.ceil().to_f64_lossy().max(1.0) as usize;
    let c_prime = T::c(2.0) * ((T::c(2.0) / mu).ln() + T::c(8.0) * eps2 / b.exp()).ceil();
    let eps_prime = eps2 / (T::c(8.0) * e4 * (k * (b + l)).max(one));
    Ok(BcnParams {
        t,
        c_prime,
        eps_prime,
        k,
        delta: eps_prime / T::c(3.0),
        delta_a: eps_prime * k * k / (T::c(2.0) * e2),
        log_radius: l,
        mu,
    })
}

/// Oracle implementations used by one solve.
#[derive(Clone, Debug)]
pub struct Oracles {
    pub noise: NoiseModel,
    pub sparsifier: SparsifierConfig,
    /// Iteration cap for each k-oracle call.
    pub oracle_iters: usize,
}

impl Oracles {
    pub fn exact() -> Self {
        Self::new(NoiseModel::exact())
    }

    pub fn new(noise: NoiseModel) -> Self {
        Self {
            noise,
            sparsifier: SparsifierConfig::default(),
            oracle_iters: DEFAULT_ORACLE_ITERS,
        }
    }

    pub fn noisy(mode: NoiseMode, seed: u64) -> Self {
        Self::new(NoiseModel::new(mode, seed))
    }
}

/// Result of one Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct BcnStep<T> {
    pub next: ScalingPair<T>,
    /// `Q` value returned by the k-oracle.
    pub q_value: T,
    pub oracle_iterations: usize,
    /// `‖H_{a,f}′‖₁` reported by the sparsifier.
    pub sparsifier_remainder: T,
}

/// One iteration: approximate `∇f̃`, `∇²f̃`, then `s + Δ/k` with
/// `Δ = A(4e²/(3k²)·(H_m + H_a), b/k)`.
///
/// The Hessian budget `δ_a` is split evenly between the sparsifier and the
/// regularizer diagonal. The gradient oracle is called with relative budget
/// `δ/(2C′)`, which bounds its ℓ1 error by `δ` while `‖A(x,y)‖₁ ≤ 2C′`.
pub fn bcn_step<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    cfg: &PotentialConfig<T>,
    params: &BcnParams<T>,
    oracles: &mut Oracles,
    ledger: &mut QueryLedger,
) -> Result<BcnStep<T>> {
    let two = T::c(2.0);
    let c_bound = two * params.c_prime;
    let b = approx_gradient(a, s, cfg, params.delta / c_bound, c_bound, &mut oracles.noise, ledger)?;
    let half_a = params.delta_a / two;
    let hm = sparsify_hessian(a, s, half_a, &oracles.sparsifier, &mut oracles.noise, ledger)?;
    let ha = reg_hessian_diag_approx(s, cfg, params.mu, half_a, &oracles.noise, ledger)?;

    let k = params.k;
    let scale = T::c(4.0 * E * E / 3.0) / (k * k);
    let h = hm.laplacian.plus_diag(&ha).scaled(scale);
    let signs = block_signs(a.n_rows(), s.dim());
    let b_lap: Vec<T> = b
        .iter()
        .zip(&signs)
        .map(|(v, &row)| if row { *v / k } else { -*v / k })
        .collect();
    let res = k_oracle(&SddQuadratic::new(h, b_lap)?, oracles.oracle_iters)?;
    let delta: Vec<T> = res
        .z
        .iter()
        .zip(&signs)
        .map(|(z, &row)| if row { *z } else { -*z })
        .collect();
    Ok(BcnStep {
        next: s.add_stacked(&delta, T::one() / k),
        q_value: res.q_value,
        oracle_iterations: res.iterations,
        sparsifier_remainder: hm.remainder_l1,
    })
}

/// Shifts `x` by `−ln 2` while the estimate of `‖A(x,y)‖₁` (to within `C′/2`)
/// exceeds `3C′/2`. Returns the new scaling and the number of shifts.
pub fn norm_control<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    params: &BcnParams<T>,
    oracles: &mut Oracles,
    ledger: &mut QueryLedger,
) -> Result<(ScalingPair<T>, usize)> {
    let half = params.c_prime / T::c(2.0);
    let threshold = T::c(3.0) * half;
    let mut s = s.clone();
    let mut shifts = 0;
    while estimate_one_norm(a, &s, half, &mut oracles.noise, ledger)? > threshold {
        s = shift_x(&s, T::c(LN_2));
        shifts += 1;
        if shifts > 4096 {
            return Err(Error::Overflow(a.one_norm_scaled(&s).to_f64_lossy()));
        }
    }
    Ok((s, shifts))
}

/// Options for [`bcn_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct BcnOptions<T> {
    /// Oracle ℓ∞ bound used in the parameters.
    pub k: T,
    /// Stop as soon as both exact ℓ1 errors are at most this value.
    pub early_exit: Option<T>,
    /// Override of the iteration count `T`.
    pub max_iters: Option<usize>,
    /// Record `f`, `f̃` and marginal errors every iteration.
    pub trace: bool,
    /// Override of the gradient budget `δ`.
    pub delta: Option<T>,
    /// Override of the Hessian budget `δ_a`.
    pub delta_a: Option<T>,
}

impl<T: Real> Default for BcnOptions<T> {
    fn default() -> Self {
        Self {
            k: T::one(),
            early_exit: None,
            max_iters: None,
            trace: true,
            delta: None,
            delta_a: None,
        }
    }
}

/// Output of [`bcn_solve`].
#[derive(Clone, Debug)]
pub struct BcnSolution<T> {
    pub scaling: ScalingPair<T>,
    pub trace: SolveTrace,
    pub ledger: QueryLedger,
    pub params: BcnParams<T>,
    pub iterations: usize,
}

/// Runs the box-constrained Newton method for `T` iterations from `(0, 0)`.
///
/// Requires `‖A‖₁ ≤ 1`. When some ε²-minimizer of `f` lies in the ℓ∞-ball of
/// radius `B`, the output satisfies `f − f* ≤ 6ε²`.
pub fn bcn_solve<T: Real>(
    a: &SparseNonNegMatrix<T>,
    t: &TargetMarginals<T>,
    eps: T,
    b: T,
    oracles: &mut Oracles,
    opts: &BcnOptions<T>,
) -> Result<BcnSolution<T>> {
    t.fits(a)?;
    let norm = a.one_norm();
    if norm > T::one() + T::c(1e-12) {
        return Err(Error::NotNormalized(norm.to_f64_lossy()));
    }
    let cfg = PotentialConfig::new(eps, b, t.clone())?;
    let mut params = derive_bcn_params(a, &cfg, opts.k)?;
    for (slot, v) in [(&mut params.delta, opts.delta), (&mut params.delta_a, opts.delta_a)] {
        if let Some(v) = v {
            if !(v > T::zero() && v < T::one()) {
                return Err(Error::InvalidDelta(v.to_f64_lossy()));
            }
            *slot = v;
        }
    }
    let iters = opts.max_iters.unwrap_or(params.t);
    let mut ledger = QueryLedger::new();
    let mut s = ScalingPair::zeros(a.n_rows(), a.n_cols());
    let mut trace = SolveTrace::default();
    let mut done = 0;
    for it in 1..=iters {
        let before = ledger.total();
        let step = bcn_step(a, &s, &cfg, &params, oracles, &mut ledger)?;
        let (next, shifts) = norm_control(a, &step.next, &params, oracles, &mut ledger)?;
        s = next;
        done = it;
        let errs = if opts.trace || opts.early_exit.is_some() {
            Some(a.scaling_error(&s, t, Norm::L1))
        } else {
            None
        };
        if opts.trace {
            let (re, ce) = errs.expect("computed when tracing");
            trace.records.push(TraceRecord {
                iter: it,
                f: Some(potential_f(a, &s, t)?.to_f64_lossy()),
                freg: Some(potential_reg(a, &s, &cfg)?.to_f64_lossy()),
                row_err_l1: Some(re.to_f64_lossy()),
                col_err_l1: Some(ce.to_f64_lossy()),
                one_norm: Some(a.one_norm_scaled(&s).to_f64_lossy()),
                shifts,
                ledger_units: ledger.total() - before,
            });
        }
        if let (Some(target), Some((re, ce))) = (opts.early_exit, errs) {
            if re <= target && ce <= target {
                break;
            }
        }
    }
    Ok(BcnSolution {
        scaling: s,
        trace,
        ledger,
        params,
        iterations: done,
    })
}

/// Options for [`b_doubling_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct DoublingOptions<T> {
    pub inner: BcnOptions<T>,
    /// Largest `B` tried.
    pub b_max: T,
    /// Precision handed to each inner run, as a fraction of `ε`.
    pub inner_eps_factor: T,
}

impl<T: Real> Default for DoublingOptions<T> {
    fn default() -> Self {
        Self {
            inner: BcnOptions::default(),
            b_max: T::c(65536.0),
            inner_eps_factor: T::c(0.125),
        }
    }
}

/// Output of [`b_doubling_solve`].
#[derive(Clone, Debug)]
pub struct DoublingSolution<T> {
    pub solution: BcnSolution<T>,
    /// The `B` at which the ε-ℓ1 test first passed.
    pub b: T,
    /// Number of inner runs.
    pub attempts: usize,
    /// Ledger summed over all attempts.
    pub ledger: QueryLedger,
}

/// Tries `B = 1, 2, 4, …, B_max` and returns the first run whose exact ℓ1
/// row and column errors are both at most `eps`.
pub fn b_doubling_solve<T: Real>(
    a: &SparseNonNegMatrix<T>,
    t: &TargetMarginals<T>,
    eps: T,
    oracles: &mut Oracles,
    opts: &DoublingOptions<T>,
) -> Result<DoublingSolution<T>> {
    let inner_eps = (eps * opts.inner_eps_factor).min(T::one());
    let mut b = T::one();
    let mut attempts = 0;
    let mut total = QueryLedger::new();
    while b <= opts.b_max {
        attempts += 1;
        let sol = bcn_solve(a, t, inner_eps, b, oracles, &opts.inner)?;
        total.merge(&sol.ledger);
        let (re, ce) = a.scaling_error(&sol.scaling, t, Norm::L1);
        if re <= eps && ce <= eps {
            return Ok(DoublingSolution {
                solution: sol,
                b,
                attempts,
                ledger: total,
            });
        }
        b = b * T::c(2.0);
    }
    Err(Error::BMaxExceeded(opts.b_max.to_f64_lossy()))
}
