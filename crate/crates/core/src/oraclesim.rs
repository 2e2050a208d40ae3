//! Classical stand-ins for the quantum subroutines.
//!
//! Each oracle returns an answer inside its stated error budget and charges
//! a [`QueryLedger`] with the cost the quantum routine would incur. Costs
//! drop polylogarithmic factors; they are comparative units, not time.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxoracle::SddMatrix;
use crate::error::{Error, Result};
use crate::matcore::{ScalingPair, SparseNonNegMatrix};
use crate::potential::{diameter_bound, grad_reg, hessian_f, hessian_reg_diag, PotentialConfig};
use crate::scalar::Real;

/// Oracle kinds that appear in the ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CostTag {
    Gradient,
    Sparsify,
    RegDiag,
    OneNorm,
}

impl CostTag {
    pub const ALL: [CostTag; 4] = [
        CostTag::Gradient,
        CostTag::Sparsify,
        CostTag::RegDiag,
        CostTag::OneNorm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CostTag::Gradient => "gradient",
            CostTag::Sparsify => "sparsify",
            CostTag::RegDiag => "regdiag",
            CostTag::OneNorm => "onenorm",
        }
    }
}

impl fmt::Display for CostTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Append-only record of simulated query cost.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QueryLedger {
    entries: Vec<(CostTag, f64)>,
    total: f64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, tag: CostTag, units: f64) {
        debug_assert!(units >= 0.0);
        self.entries.push((tag, units));
        self.total += units;
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn entries(&self) -> &[(CostTag, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Units charged under `tag`.
    pub fn units(&self, tag: CostTag) -> f64 {
        self.entries.iter().filter(|e| e.0 == tag).map(|e| e.1).sum()
    }

    /// Appends all of `other`'s entries in order.
    pub fn merge(&mut self, other: &QueryLedger) {
        for &(tag, units) in &other.entries {
            self.charge(tag, units);
        }
    }

    /// CSV with header `tag,units,cumulative`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tag,units,cumulative")?;
        let mut cum = 0.0;
        for (tag, units) in &self.entries {
            cum += units;
            writeln!(w, "{tag},{units},{cum}")?;
        }
        Ok(())
    }
}

/// How an oracle spends its error budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseMode {
    /// Exact answers.
    Exact,
    /// Independent multiplicative error on every estimated marginal.
    Multiplicative,
    /// Deterministic worst-case use of the ℓ1 budget.
    Adversarial,
}

impl std::str::FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(NoiseMode::Exact),
            "multiplicative" | "multiplicative-marginal" => Ok(NoiseMode::Multiplicative),
            "adversarial" | "adversarial-l1" => Ok(NoiseMode::Adversarial),
            other => Err(Error::InvalidConfig(format!("unknown oracle mode '{other}'"))),
        }
    }
}

/// Seeded noise source shared by all oracles of one solve.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    seed: u64,
    mode: NoiseMode,
    rng: ChaCha8Rng,
}

impl NoiseModel {
    pub fn new(mode: NoiseMode, seed: u64) -> Self {
        Self {
            seed,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn exact() -> Self {
        Self::new(NoiseMode::Exact, 0)
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform sample in `[−1, 1]`.
    fn symmetric(&mut self) -> f64 {
        self.rng.random_range(-1.0..=1.0)
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

fn cost_sqrt_mn<T: Real>(a: &SparseNonNegMatrix<T>) -> f64 {
    let n = a.n_rows().max(a.n_cols()) as f64;
    (a.nnz() as f64 * n).sqrt()
}

/// Estimate `b` of `∇f̃(x, y)` with `‖b − ∇f̃‖₁ ≤ δ·C` whenever `‖A(x,y)‖₁ ≤ C`.
///
/// Charges `⌈√(m·n)/δ⌉` units to [`CostTag::Gradient`].
#[allow(clippy::too_many_arguments)]
pub fn approx_gradient<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    cfg: &PotentialConfig<T>,
    delta: T,
    c_bound: T,
    noise: &mut NoiseModel,
    ledger: &mut QueryLedger,
) -> Result<Vec<T>> {
    if !(delta > T::zero() && delta <= T::one()) {
        return Err(Error::InvalidDelta(delta.to_f64_lossy()));
    }
    let mut g = grad_reg(a, s, cfg)?;
    ledger.charge(
        CostTag::Gradient,
        (cost_sqrt_mn(a) / delta.to_f64_lossy()).ceil(),
    );
    match noise.mode {
        NoiseMode::Exact => {}
        NoiseMode::Multiplicative => {
            // Σ|err| ≤ (δ/2)(‖r(A(x,y))‖₁ + ‖c(A(x,y))‖₁) = δ‖A(x,y)‖₁.
            let (r, c) = a.marginals(s);
            let half = delta * T::c(0.5);
            for (gi, m) in g.iter_mut().zip(r.iter().chain(&c)) {
                *gi += *m * half * T::c(noise.symmetric());
            }
        }
        NoiseMode::Adversarial => {
            if let Some(k) = (0..g.len()).max_by(|&i, &j| {
                g[i].abs().partial_cmp(&g[j].abs()).unwrap_or(std::cmp::Ordering::Equal)
            }) {
                let sign = if g[k] >= T::zero() { T::one() } else { -T::one() };
                g[k] -= sign * delta * c_bound;
            }
        }
    }
    Ok(g)
}

/// Tuning of the edge sampler behind [`sparsify_hessian`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparsifierConfig {
    /// Edge budget constant `c₀` in `c₀·n·ln²n`.
    pub c0: f64,
    /// Initial oversampling factor `q`.
    pub q0: f64,
    /// Number of times `q` may be doubled.
    pub max_rounds: usize,
    /// Largest Hessian dimension for the dense 0.9/1.1 pencil check.
    pub check_dim: usize,
}

impl Default for SparsifierConfig {
    fn default() -> Self {
        Self {
            c0: 4.0,
            q0: 0.5,
            max_rounds: 24,
            check_dim: 128,
        }
    }
}

impl SparsifierConfig {
    /// `c₀·n·ln²n` with `n = max(n_rows, n_cols)`.
    pub fn edge_budget(&self, n_rows: usize, n_cols: usize) -> usize {
        let n = n_rows.max(n_cols).max(2) as f64;
        (self.c0 * n * n.ln() * n.ln()).floor() as usize
    }
}

/// Output of [`sparsify_hessian`].
#[derive(Clone, Debug)]
pub struct SparseHessian<T> {
    /// `H_m` in Laplacian coordinates, `diag(I,−I)·H_m·diag(I,−I)`.
    pub laplacian: SddMatrix<T>,
    /// `‖H_{a,f}′‖₁` of the split `∇²f = H_m′ + H_{a,f}′`.
    pub remainder_l1: T,
    /// Laplacian of `H_m′` (perturbed but unsampled weights).
    pub reference: SddMatrix<T>,
    /// Oversampling factor that was accepted.
    pub q: f64,
    /// Whether the dense pencil check ran and passed.
    pub checked: bool,
}

impl<T: Real> SparseHessian<T> {
    pub fn n_edges(&self) -> usize {
        self.laplacian.n_edges()
    }

    /// `H_m` in Hessian coordinates (non-negative off-diagonals).
    pub fn hessian_form(&self, n_rows: usize) -> SddMatrix<T> {
        self.laplacian.conjugate_by_signs(&block_signs(n_rows, self.laplacian.dim()))
    }
}

/// `true` on the row block, `false` on the column block.
pub fn block_signs(n_rows: usize, dim: usize) -> Vec<bool> {
    (0..dim).map(|i| i < n_rows).collect()
}

fn laplacian_from_edges<T: Real>(dim: usize, edges: &[(usize, usize, T)]) -> SddMatrix<T> {
    let mut diag = vec![T::zero(); dim];
    for &(i, j, w) in edges {
        diag[i] += w;
        diag[j] += w;
    }
    SddMatrix::from_pairs(diag, edges.iter().map(|&(i, j, w)| (i, j, -w)))
        .expect("edge endpoints are in range")
}

/// Smallest eigenvalue of `a − c·b` for dense symmetric matrices.
fn lambda_min(a: &DMatrix<f64>, b: &DMatrix<f64>, c: f64) -> f64 {
    let m = a - b * c;
    m.symmetric_eigenvalues().min()
}

/// True iff `lo·H ⪯ H′ ⪯ hi·H` up to a relative eigenvalue slack.
pub fn pencil_check<T: Real>(h: &SddMatrix<T>, h_ref: &SddMatrix<T>, lo: f64, hi: f64) -> bool {
    let dh = h.to_dense_f64();
    let dr = h_ref.to_dense_f64();
    let scale = dr.amax().max(1e-300);
    let tol = 1e-9 * scale;
    lambda_min(&dr, &dh, lo) >= -tol && lambda_min(&(&dh * hi), &dr, 1.0) >= -tol
}

/// Sparse SDD approximation `H_m` of `∇²f(x, y)` and a bound on the remainder.
///
/// Exact mode returns `∇²f` itself. Noisy modes perturb each edge weight by at
/// most `δ_a/(4m)` (so the remainder has ℓ1 norm at most `δ_a`), then keep
/// edge `(i, j)` with probability `min(1, q·w_ij·(1/r_i + 1/c_j))` and weight
/// `w_ij/p_ij`. `q` doubles until the 0.9/1.1 pencil check passes when the
/// dimension allows a dense check. Charges `⌈√(m·n)⌉` to [`CostTag::Sparsify`].
pub fn sparsify_hessian<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    delta_a: T,
    sparsifier: &SparsifierConfig,
    noise: &mut NoiseModel,
    ledger: &mut QueryLedger,
) -> Result<SparseHessian<T>> {
    if !(delta_a > T::zero()) {
        return Err(Error::InvalidDelta(delta_a.to_f64_lossy()));
    }
    ledger.charge(CostTag::Sparsify, cost_sqrt_mn(a).ceil());
    let nr = a.n_rows();
    let dim = nr + a.n_cols();
    let hess = hessian_f(a, s)?;
    if noise.mode == NoiseMode::Exact {
        let lap = hess.laplacian();
        return Ok(SparseHessian {
            reference: lap.clone(),
            laplacian: lap,
            remainder_l1: T::zero(),
            q: f64::INFINITY,
            checked: true,
        });
    }

    let m = hess.off_block.len().max(1);
    let per_edge = delta_a / T::c(4.0 * m as f64);
    let mut remainder = T::zero();
    let mut edges: Vec<(usize, usize, T)> = Vec::with_capacity(m);
    for &(i, j, w) in &hess.off_block {
        let eta = match noise.mode {
            NoiseMode::Adversarial => -per_edge,
            _ => per_edge * T::c(noise.symmetric()),
        };
        // keep weights positive; |η| only shrinks
        let eta = eta.max(-w * T::c(0.5));
        remainder += T::c(4.0) * eta.abs();
        edges.push((i, nr + j, w + eta));
    }
    let reference = laplacian_from_edges(dim, &edges);
    let deg = reference.diag().to_vec();

    let budget = sparsifier.edge_budget(nr, a.n_cols());
    let can_check = dim <= sparsifier.check_dim;
    let mut q = if can_check {
        sparsifier.q0
    } else {
        // oversampling for a 0.1 spectral approximation with high probability
        9.0 * (dim as f64).ln() / 0.01
    };
    for _ in 0..=sparsifier.max_rounds {
        let mut kept = Vec::new();
        for &(i, j, w) in &edges {
            let wf = w.to_f64_lossy();
            let p = (q * wf * (1.0 / deg[i].to_f64_lossy() + 1.0 / deg[j].to_f64_lossy())).min(1.0);
            if p >= 1.0 || noise.uniform() < p {
                kept.push((i, j, w / T::c(p)));
            }
        }
        let cand = laplacian_from_edges(dim, &kept);
        if !can_check {
            if kept.len() > budget && kept.len() < edges.len() {
                return Err(Error::SparsificationFailed { rounds: 1 });
            }
            return Ok(SparseHessian {
                laplacian: cand,
                remainder_l1: remainder,
                reference,
                q,
                checked: false,
            });
        }
        if pencil_check(&cand, &reference, 0.9, 1.1) {
            return Ok(SparseHessian {
                laplacian: cand,
                remainder_l1: remainder,
                reference,
                q,
                checked: true,
            });
        }
        q *= 2.0;
    }
    Err(Error::SparsificationFailed {
        rounds: sparsifier.max_rounds + 1,
    })
}

/// Approximation `H_a` of the regularizer Hessian `∇²(f̃ − f)(x, y)` with
/// `‖H_a − ∇²(f̃ − f)‖₁ ≤ δ_a`.
///
/// Noisy modes truncate every entry to `⌈log₂(2n/δ_a)⌉` fractional bits,
/// which bounds the ℓ1 error over all `2n` entries by `δ_a`.
/// Charges `n` units to [`CostTag::RegDiag`].
pub fn reg_hessian_diag_approx<T: Real>(
    s: &ScalingPair<T>,
    cfg: &PotentialConfig<T>,
    mu: T,
    delta_a: T,
    noise: &NoiseModel,
    ledger: &mut QueryLedger,
) -> Result<Vec<T>> {
    if !(delta_a > T::zero()) {
        return Err(Error::InvalidDelta(delta_a.to_f64_lossy()));
    }
    let bound = diameter_bound(mu, cfg);
    let norm = s.inf_norm();
    if norm > bound * (T::one() + T::c(1e-9)) {
        return Err(Error::DiameterExceeded {
            norm: norm.to_f64_lossy(),
            bound: bound.to_f64_lossy(),
        });
    }
    let n = s.x.len().max(s.y.len());
    ledger.charge(CostTag::RegDiag, n as f64);
    let exact = hessian_reg_diag(s, cfg)?;
    if noise.mode == NoiseMode::Exact {
        return Ok(exact);
    }
    let bits = truncation_bits(s.dim(), delta_a.to_f64_lossy());
    let scale = T::c(2f64.powi(bits));
    Ok(exact.into_iter().map(|v| (v * scale).floor() / scale).collect())
}

/// Fractional bits needed so that truncating `dim` entries costs at most `δ_a` in ℓ1.
pub fn truncation_bits(dim: usize, delta_a: f64) -> i32 {
    (dim as f64 / delta_a).log2().ceil().max(0.0) as i32
}

/// Estimate of `‖A(x, y)‖₁` within additive `half_cprime`.
///
/// Adversarial mode moves the estimate as close to `3·half_cprime` as the
/// budget allows, stressing the norm-control decision. Charges `⌈√(m·n)⌉`
/// units to [`CostTag::OneNorm`].
pub fn estimate_one_norm<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    half_cprime: T,
    noise: &mut NoiseModel,
    ledger: &mut QueryLedger,
) -> Result<T> {
    if !(half_cprime > T::zero()) {
        return Err(Error::InvalidDelta(half_cprime.to_f64_lossy()));
    }
    ledger.charge(CostTag::OneNorm, cost_sqrt_mn(a).ceil());
    let exact = a.one_norm_scaled(s);
    Ok(match noise.mode {
        NoiseMode::Exact => exact,
        NoiseMode::Multiplicative => exact + half_cprime * T::c(noise.symmetric()),
        NoiseMode::Adversarial => {
            let target = T::c(3.0) * half_cprime;
            target.max(exact - half_cprime).min(exact + half_cprime)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::TargetMarginals;
    use crate::scalar::norm_l1;

    fn random_positive(n: usize, seed: u64) -> SparseNonNegMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = vals.iter().sum();
        SparseNonNegMatrix::from_triplets(
            n,
            n,
            (0..n * n).map(|k| (k / n, k % n, vals[k] / total)),
        )
        .unwrap()
    }

    #[test]
    fn gradient_cost_units() {
        let a = random_positive(8, 1);
        let cfg = PotentialConfig::new(0.1, 1.0, TargetMarginals::uniform(8, 8)).unwrap();
        let mut ledger = QueryLedger::new();
        let s = ScalingPair::zeros(8, 8);
        let g = approx_gradient(&a, &s, &cfg, 0.1, 1.0, &mut NoiseModel::exact(), &mut ledger).unwrap();
        assert_eq!(g, grad_reg(&a, &s, &cfg).unwrap());
        assert_eq!(ledger.total(), 227.0);
        assert!(approx_gradient(&a, &s, &cfg, 0.0, 1.0, &mut NoiseModel::exact(), &mut ledger).is_err());
    }

    #[test]
    fn gradient_noise_within_budget() {
        let a = random_positive(8, 2);
        let cfg = PotentialConfig::new(0.1, 1.0, TargetMarginals::uniform(8, 8)).unwrap();
        let s = ScalingPair::new(vec![0.3; 8], vec![-0.1; 8]).unwrap();
        let exact = grad_reg(&a, &s, &cfg).unwrap();
        let norm = a.one_norm_scaled(&s);
        for mode in [NoiseMode::Multiplicative, NoiseMode::Adversarial] {
            for seed in 0..200 {
                let mut noise = NoiseModel::new(mode, seed);
                let g = approx_gradient(&a, &s, &cfg, 0.05, norm, &mut noise, &mut QueryLedger::new()).unwrap();
                let err: Vec<f64> = g.iter().zip(&exact).map(|(u, v)| u - v).collect();
                assert!(norm_l1(&err) <= 0.05 * norm * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn ledger_csv_and_merge() {
        let mut l = QueryLedger::new();
        l.charge(CostTag::Gradient, 2.0);
        let mut m = QueryLedger::new();
        m.charge(CostTag::OneNorm, 3.0);
        l.merge(&m);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "tag,units,cumulative\ngradient,2,2\nonenorm,3,5\n"
        );
        assert_eq!(l.units(CostTag::OneNorm), 3.0);
    }

    #[test]
    fn one_norm_estimates() {
        let a = random_positive(4, 3);
        let s = ScalingPair::zeros(4, 4);
        let mut ledger = QueryLedger::new();
        let exact = estimate_one_norm(&a, &s, 0.5, &mut NoiseModel::exact(), &mut ledger).unwrap();
        assert!((exact - 1.0).abs() < 1e-12);
        let adv = estimate_one_norm(&a, &s, 0.5, &mut NoiseModel::new(NoiseMode::Adversarial, 0), &mut ledger)
            .unwrap();
        assert!((adv - 1.5).abs() < 1e-12);
    }

    #[test]
    fn exact_sparsifier_is_the_hessian() {
        let a = random_positive(5, 4);
        let s = ScalingPair::zeros(5, 5);
        let sh = sparsify_hessian(&a, &s, 0.01, &SparsifierConfig::default(), &mut NoiseModel::exact(), &mut QueryLedger::new())
            .unwrap();
        assert_eq!(sh.hessian_form(5), hessian_f(&a, &s).unwrap().to_sdd());
        assert_eq!(sh.remainder_l1, 0.0);
    }

    #[test]
    fn truncation_bits_examples() {
        assert_eq!(truncation_bits(16, 1.0), 4);
        assert_eq!(truncation_bits(16, 0.01), 11);
    }
}
