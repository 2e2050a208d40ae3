//! The potential `f(x, y) = Σ A_ij e^{x_i+y_j} − ⟨r, x⟩ − ⟨c, y⟩`, its
//! regularized form `f̃`, gradients and Hessians.
//!
//! The regularizer is `(ε²/(n e^B))·Σ (e^{z_k} + e^{−z_k})` over all `2n`
//! coordinates. For rectangular matrices `n` is the mean dimension
//! `(n_rows + n_cols)/2`, so the square case is unchanged.

use crate::boxoracle::SddMatrix;
use crate::error::{Error, Result};
use crate::matcore::{ScalingPair, SparseNonNegMatrix, TargetMarginals};
use crate::scalar::{dot, Real};

/// Precision, diameter bound and targets shared by `f̃` and the Newton solver.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialConfig<T> {
    eps: T,
    b: T,
    targets: TargetMarginals<T>,
}

impl<T: Real> PotentialConfig<T> {
    /// Requires `0 < ε ≤ 1` and `B ≥ 1`.
    pub fn new(eps: T, b: T, targets: TargetMarginals<T>) -> Result<Self> {
        if !(eps > T::zero() && eps <= T::one()) {
            return Err(Error::InvalidEps(eps.to_f64_lossy()));
        }
        if !(b >= T::one()) || !b.is_finite() {
            return Err(Error::InvalidConfig(format!("B must be >= 1, got {b}")));
        }
        Ok(Self { eps, b, targets })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn targets(&self) -> &TargetMarginals<T> {
        &self.targets
    }

    /// Mean dimension `n̄ = (n_rows + n_cols)/2`.
    pub fn n_bar(&self) -> T {
        T::c((self.targets.n_rows() + self.targets.n_cols()) as f64 / 2.0)
    }

    /// Same precision and targets with a different `B`.
    pub fn with_b(&self, b: T) -> Result<Self> {
        Self::new(self.eps, b, self.targets.clone())
    }

    /// Same `B` and targets with a different `ε`.
    pub fn with_eps(&self, eps: T) -> Result<Self> {
        Self::new(eps, self.b, self.targets.clone())
    }

    /// `ε²/n̄`, the regularizer weight before the `e^{−B}` factor.
    fn weight(&self) -> T {
        self.eps * self.eps / self.n_bar()
    }
}

fn check_exponents<T: Real>(a: &SparseNonNegMatrix<T>, s: &ScalingPair<T>) -> Result<()> {
    let limit = T::exp_limit();
    for i in 0..a.n_rows() {
        for (j, _) in a.row(i) {
            let e = s.x[i] + s.y[j];
            if e > limit || e.is_nan() {
                return Err(Error::Overflow(e.to_f64_lossy()));
            }
        }
    }
    Ok(())
}

fn check_reg_exponents<T: Real>(s: &ScalingPair<T>, b: T) -> Result<()> {
    let limit = T::exp_limit();
    for v in s.x.iter().chain(&s.y) {
        if v.abs() - b > limit || v.is_nan() {
            return Err(Error::Overflow((v.abs() - b).to_f64_lossy()));
        }
    }
    Ok(())
}

/// `f(x, y)`.
pub fn potential_f<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    t: &TargetMarginals<T>,
) -> Result<T> {
    check_exponents(a, s)?;
    Ok(a.one_norm_scaled(s) - dot(t.r(), &s.x) - dot(t.c(), &s.y))
}

/// `∇f = (r(A(x,y)) − r | c(A(x,y)) − c)`.
pub fn grad_f<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    t: &TargetMarginals<T>,
) -> Result<Vec<T>> {
    check_exponents(a, s)?;
    let (r, c) = a.marginals(s);
    Ok(r.iter()
        .zip(t.r())
        .chain(c.iter().zip(t.c()))
        .map(|(m, target)| *m - *target)
        .collect())
}

/// Value of the regularizer `f̃ − f`.
pub fn regularizer<T: Real>(s: &ScalingPair<T>, cfg: &PotentialConfig<T>) -> Result<T> {
    check_reg_exponents(s, cfg.b)?;
    let b = cfg.b;
    let total: T = s
        .x
        .iter()
        .chain(&s.y)
        .map(|v| (*v - b).exp() + (-*v - b).exp())
        .sum();
    Ok(cfg.weight() * total)
}

/// Gradient of the regularizer, stacked `(x | y)`.
pub fn regularizer_grad<T: Real>(s: &ScalingPair<T>, cfg: &PotentialConfig<T>) -> Result<Vec<T>> {
    check_reg_exponents(s, cfg.b)?;
    let (w, b) = (cfg.weight(), cfg.b);
    Ok(s.x
        .iter()
        .chain(&s.y)
        .map(|v| w * ((*v - b).exp() - (-*v - b).exp()))
        .collect())
}

/// Diagonal Hessian of the regularizer, stacked `(x | y)`.
pub fn hessian_reg_diag<T: Real>(s: &ScalingPair<T>, cfg: &PotentialConfig<T>) -> Result<Vec<T>> {
    check_reg_exponents(s, cfg.b)?;
    let (w, b) = (cfg.weight(), cfg.b);
    Ok(s.x
        .iter()
        .chain(&s.y)
        .map(|v| w * ((*v - b).exp() + (-*v - b).exp()))
        .collect())
}

/// `f̃(x, y)`.
pub fn potential_reg<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    cfg: &PotentialConfig<T>,
) -> Result<T> {
    Ok(potential_f(a, s, &cfg.targets)? + regularizer(s, cfg)?)
}

/// `∇f̃(x, y)`.
pub fn grad_reg<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    cfg: &PotentialConfig<T>,
) -> Result<Vec<T>> {
    let mut g = grad_f(a, s, &cfg.targets)?;
    for (gi, ri) in g.iter_mut().zip(regularizer_grad(s, cfg)?) {
        *gi += ri;
    }
    Ok(g)
}

/// `∇²f` in block form, optionally carrying the regularizer diagonal.
///
/// Assembled, the matrix is `[[diag r(A(x,y)), A(x,y)], [A(x,y)ᵀ, diag c(A(x,y))]] + diag(reg)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianBlocks<T> {
    pub row_diag: Vec<T>,
    pub col_diag: Vec<T>,
    /// Stored entries of `A(x, y)` as `(row, col, value)`.
    pub off_block: Vec<(usize, usize, T)>,
    pub reg_diag: Vec<T>,
}

impl<T: Real> HessianBlocks<T> {
    pub fn n_rows(&self) -> usize {
        self.row_diag.len()
    }

    pub fn dim(&self) -> usize {
        self.row_diag.len() + self.col_diag.len()
    }

    /// Adds the regularizer diagonal of `f̃`.
    pub fn with_reg(mut self, reg: Vec<T>) -> Self {
        assert_eq!(reg.len(), self.dim());
        self.reg_diag = reg;
        self
    }

    /// `H·v` for a stacked vector `v`.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let nr = self.n_rows();
        let mut out: Vec<T> = self
            .row_diag
            .iter()
            .chain(&self.col_diag)
            .zip(v)
            .map(|(d, vi)| *d * *vi)
            .collect();
        for &(i, j, a) in &self.off_block {
            out[i] += a * v[nr + j];
            out[nr + j] += a * v[i];
        }
        for (o, (r, vi)) in out.iter_mut().zip(self.reg_diag.iter().zip(v)) {
            *o += *r * *vi;
        }
        out
    }

    /// The Hessian itself as an [`SddMatrix`] (non-negative off-diagonals).
    pub fn to_sdd(&self) -> SddMatrix<T> {
        let nr = self.n_rows();
        let diag = self.assembled_diag();
        SddMatrix::from_pairs(diag, self.off_block.iter().map(|&(i, j, a)| (i, nr + j, a)))
            .expect("indices of a Hessian are in range")
    }

    /// `D H D` with `D = diag(I, −I)`: a bipartite Laplacian plus `diag(reg)`.
    pub fn laplacian(&self) -> SddMatrix<T> {
        let nr = self.n_rows();
        let diag = self.assembled_diag();
        SddMatrix::from_pairs(diag, self.off_block.iter().map(|&(i, j, a)| (i, nr + j, -a)))
            .expect("indices of a Hessian are in range")
    }

    fn assembled_diag(&self) -> Vec<T> {
        let mut diag: Vec<T> = self.row_diag.iter().chain(&self.col_diag).copied().collect();
        for (d, r) in diag.iter_mut().zip(&self.reg_diag) {
            *d += *r;
        }
        diag
    }

    /// Dense `f64` copy; intended for tests and small eigen-checks.
    pub fn to_dense_f64(&self) -> nalgebra::DMatrix<f64> {
        self.to_sdd().to_dense_f64()
    }
}

/// `∇²f(x, y)` (no regularizer term).
pub fn hessian_f<T: Real>(a: &SparseNonNegMatrix<T>, s: &ScalingPair<T>) -> Result<HessianBlocks<T>> {
    check_exponents(a, s)?;
    let vals = a.scaled_values(s);
    let (r, c) = a.marginals(s);
    let off_block = a
        .row_indices()
        .into_iter()
        .zip(a.col_indices())
        .zip(vals)
        .map(|((i, &j), v)| (i, j, v))
        .collect();
    Ok(HessianBlocks {
        reg_diag: vec![T::zero(); r.len() + c.len()],
        row_diag: r,
        col_diag: c,
        off_block,
    })
}

/// `∇²f̃(x, y)`.
pub fn hessian_reg<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    cfg: &PotentialConfig<T>,
) -> Result<HessianBlocks<T>> {
    Ok(hessian_f(a, s)?.with_reg(hessian_reg_diag(s, cfg)?))
}

/// Projects onto `V = {(x, y) : Σx = Σy}` along `(1, −1)`; leaves `f` unchanged.
pub fn project_to_v<T: Real>(s: &ScalingPair<T>) -> ScalingPair<T> {
    let sx: T = s.x.iter().copied().sum();
    let sy: T = s.y.iter().copied().sum();
    let alpha = (sx - sy) / T::c((s.x.len() + s.y.len()) as f64);
    ScalingPair {
        x: s.x.iter().map(|v| *v - alpha).collect(),
        y: s.y.iter().map(|v| *v + alpha).collect(),
    }
}

/// `x ← x − α·1`.
pub fn shift_x<T: Real>(s: &ScalingPair<T>, alpha: T) -> ScalingPair<T> {
    ScalingPair {
        x: s.x.iter().map(|v| *v - alpha).collect(),
        y: s.y.clone(),
    }
}

/// `ln(4n + n·ln(1/μ)/ε²)`, the additive part of the sublevel-set radius.
pub fn log_radius_term<T: Real>(n: T, mu: T, eps: T) -> T {
    (T::c(4.0) * n + n * (T::one() / mu).ln() / (eps * eps)).ln()
}

/// Sublevel-set radius `B + ln(4n + n·ln(1/μ)/ε²)` of `{f̃ ≤ f̃(0)}`.
pub fn diameter_bound<T: Real>(mu: T, cfg: &PotentialConfig<T>) -> T {
    cfg.b + log_radius_term(cfg.n_bar(), mu, cfg.eps)
}
