//! Quadratic forms `Q(H, b, z) = ⟨b, z⟩ + ½ zᵀHz` over the unit ℓ∞-ball and a
//! certified 1-oracle for SDD matrices with non-positive off-diagonals.
//!
//! The oracle starts from the better of a clipped conjugate-gradient Newton
//! point and a clipped Jacobi point, then runs projected gradient descent with
//! exact line search interleaved with projected Gauss–Seidel sweeps. It stops once
//! `Q(z) ≤ ½·LB` where `LB` is the best Frank–Wolfe lower bound seen on the
//! box minimum. Because `LB ≤ min Q`, the stopping rule certifies the
//! half-optimality contract without knowing the optimum, up to the rounding
//! error of evaluating `Q` itself.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{dot, norm_inf, norm_l1, Real};

/// Symmetric matrix stored as a diagonal plus a symmetric off-diagonal CSR.
#[derive(Clone, Debug, PartialEq)]
pub struct SddMatrix<T> {
    diag: Vec<T>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SddMatrix<T> {
    /// Builds `H` from its diagonal and off-diagonal pairs `(i, j, H_ij)`.
    ///
    /// Each unordered pair is given once and mirrored; repeated pairs are summed.
    pub fn from_pairs<I>(diag: Vec<T>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        let d = diag.len();
        let mut all = Vec::new();
        for (i, j, v) in pairs {
            if i >= d || j >= d {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    n_rows: d,
                    n_cols: d,
                });
            }
            if i == j {
                return Err(Error::NotSdd(format!("pair ({i}, {j}) is on the diagonal")));
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: i, col: j });
            }
            all.push((i, j, v));
            all.push((j, i, v));
        }
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSdd("non-finite diagonal".into()));
        }
        all.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, T)> = Vec::with_capacity(all.len());
        for (i, j, v) in all {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|t| t.2 != T::zero());
        let mut row_ptr = vec![0; d + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for i in 0..d {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            diag,
            row_ptr,
            col_idx: merged.iter().map(|t| t.1).collect(),
            values: merged.iter().map(|t| t.2).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[T] {
        &self.diag
    }

    /// Number of unordered off-diagonal pairs (graph edges).
    pub fn n_edges(&self) -> usize {
        self.values.len() / 2
    }

    /// Off-diagonal entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    /// Off-diagonal pairs with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dim()).flat_map(move |i| self.row(i).filter(move |&(j, _)| j > i).map(move |(j, v)| (i, j, v)))
    }

    /// Fails unless `H_ii ≥ Σ_{j≠i} |H_ij|` (relative slack `tol`) for every row.
    pub fn check_sdd(&self, tol: T) -> Result<()> {
        for i in 0..self.dim() {
            let off: T = self.row(i).map(|(_, v)| v.abs()).sum();
            if self.diag[i] < off - tol * (T::one() + off) {
                return Err(Error::NotSdd(format!(
                    "row {i}: diagonal {} < off-diagonal mass {off}",
                    self.diag[i]
                )));
            }
        }
        Ok(())
    }

    pub fn nonpositive_offdiag(&self) -> bool {
        self.values.iter().all(|v| *v <= T::zero())
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.dim())
            .map(|i| self.diag[i] * v[i] + self.row(i).map(|(j, h)| h * v[j]).sum::<T>())
            .collect()
    }

    /// `zᵀHz`.
    pub fn quad(&self, z: &[T]) -> T {
        dot(z, &self.matvec(z))
    }

    /// Entrywise ℓ1 norm `Σ_ij |H_ij|`.
    pub fn entrywise_l1(&self) -> T {
        norm_l1(&self.diag) + norm_l1(&self.values)
    }

    /// `c·H`.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            diag: self.diag.iter().map(|v| *v * c).collect(),
            values: self.values.iter().map(|v| *v * c).collect(),
            ..self.clone()
        }
    }

    /// `H + diag(d)`.
    pub fn plus_diag(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.dim());
        Self {
            diag: self.diag.iter().zip(d).map(|(a, b)| *a + *b).collect(),
            ..self.clone()
        }
    }

    /// `S H S` for `S = diag(signs)`, `signs_i ∈ {±1}`.
    pub fn conjugate_by_signs(&self, signs: &[bool]) -> Self {
        let mut values = self.values.clone();
        for i in 0..self.dim() {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                if signs[i] != signs[self.col_idx[p]] {
                    values[p] = -values[p];
                }
            }
        }
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn to_dense_f64(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = self.diag[i].to_f64_lossy();
            for (j, v) in self.row(i) {
                m[(i, j)] = v.to_f64_lossy();
            }
        }
        m
    }
}

/// The pair `(H, b)` defining `Q(H, b, ·)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SddQuadratic<T> {
    pub h: SddMatrix<T>,
    pub b: Vec<T>,
}

impl<T: Real> SddQuadratic<T> {
    pub fn new(h: SddMatrix<T>, b: Vec<T>) -> Result<Self> {
        if b.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                got: b.len(),
            });
        }
        Ok(Self { h, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

/// `Q(H, b, z) = ⟨b, z⟩ + ½ zᵀHz`.
pub fn eval_q<T: Real>(p: &SddQuadratic<T>, z: &[T]) -> Result<T> {
    if z.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: z.len(),
        });
    }
    Ok(q_unchecked(p, z))
}

fn q_unchecked<T: Real>(p: &SddQuadratic<T>, z: &[T]) -> T {
    dot(&p.b, z) + T::c(0.5) * p.h.quad(z)
}

/// Output of [`k_oracle`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<T> {
    pub z: Vec<T>,
    pub q_value: T,
    /// ℓ∞ bound achieved by `z`; always 1 here.
    pub k_bound: T,
    /// Best certified lower bound on the box minimum.
    pub lower_bound: T,
    pub iterations: usize,
}

/// Default iteration cap for [`k_oracle`].
pub const DEFAULT_ORACLE_ITERS: usize = 20_000;

/// Returns `z` with `‖z‖∞ ≤ 1` and `Q(H,b,z) ≤ ½ min_{‖z′‖∞≤1} Q(H,b,z′)`.
pub fn k_oracle<T: Real>(p: &SddQuadratic<T>, max_iters: usize) -> Result<OracleResult<T>> {
    let d = p.dim();
    p.h.check_sdd(T::c(1e-9))?;
    if !p.h.nonpositive_offdiag() {
        return Err(Error::NotSdd("positive off-diagonal entry".into()));
    }
    let one = T::one();
    let half = T::c(0.5);
    let clip = |v: T| v.max(-one).min(one);

    if p.b.iter().all(|v| v.is_zero()) {
        return Ok(OracleResult {
            z: vec![T::zero(); d],
            q_value: T::zero(),
            k_bound: one,
            lower_bound: T::zero(),
            iterations: 0,
        });
    }

    let diag = p.h.diag();
    let max_diag = diag.iter().fold(T::zero(), |m, v| m.max(*v));
    let jacobi: Vec<T> = (0..d)
        .map(|i| {
            if diag[i] > T::zero() {
                clip(-p.b[i] / diag[i])
            } else {
                -p.b[i].signum()
            }
        })
        .collect();
    // When the unconstrained minimizer lies in the box it is the box minimizer.
    let newton: Vec<T> = conjugate_gradient(&p.h, &p.b, 4 * d + 16)
        .into_iter()
        .map(clip)
        .collect();
    let mut z = if q_unchecked(p, &newton) <= q_unchecked(p, &jacobi) {
        newton
    } else {
        jacobi
    };
    // z = 0 gives the bound -‖b‖₁.
    let mut lower = -norm_l1(&p.b);
    let step0 = if max_diag > T::zero() {
        one / max_diag
    } else {
        one
    };

    for it in 0..=max_iters {
        let hz = p.h.matvec(&z);
        let g: Vec<T> = hz.iter().zip(&p.b).map(|(a, b)| *a + *b).collect();
        let q = dot(&p.b, &z) + half * dot(&z, &hz);
        lower = lower.max(q - dot(&g, &z) - norm_l1(&g));
        if q <= half * lower + roundoff(p, &z) {
            return Ok(OracleResult {
                z,
                q_value: q,
                k_bound: one,
                lower_bound: lower,
                iterations: it,
            });
        }
        if it == max_iters {
            return Err(Error::Stalled {
                iterations: it,
                q_value: q.to_f64_lossy(),
                lower_bound: lower.to_f64_lossy(),
            });
        }

        // Projected gradient step with exact line search along the projected arc's chord.
        let dir: Vec<T> = (0..d).map(|i| clip(z[i] - step0 * g[i]) - z[i]).collect();
        let slope = dot(&g, &dir);
        if slope < T::zero() {
            let curv = p.h.quad(&dir);
            let t = if curv > T::zero() {
                (-slope / curv).min(one)
            } else {
                one
            };
            for i in 0..d {
                z[i] = clip(z[i] + t * dir[i]);
            }
        }

        // Projected Gauss–Seidel sweep; each coordinate update is an exact 1-D box minimization.
        for i in 0..d {
            let off: T = p.h.row(i).map(|(j, h)| h * z[j]).sum();
            let gi = p.b[i] + off;
            z[i] = if diag[i] > T::zero() {
                clip(-gi / diag[i])
            } else if gi > T::zero() {
                -one
            } else if gi < T::zero() {
                one
            } else {
                z[i]
            };
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Approximate solution of `Hz = −b` by conjugate gradients from zero.
fn conjugate_gradient<T: Real>(h: &SddMatrix<T>, b: &[T], max_iters: usize) -> Vec<T> {
    let d = b.len();
    let mut z = vec![T::zero(); d];
    let mut r: Vec<T> = b.iter().map(|v| -*v).collect();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rr * T::c(1e-30);
    for _ in 0..max_iters {
        if rr <= stop || rr.is_zero() {
            break;
        }
        let hd = h.matvec(&dir);
        let curv = dot(&dir, &hd);
        if !(curv > T::zero()) {
            break;
        }
        let alpha = rr / curv;
        for i in 0..d {
            z[i] += alpha * dir[i];
            r[i] -= alpha * hd[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..d {
            dir[i] = r[i] + beta * dir[i];
        }
    }
    z
}

/// Bound on the rounding error of `Q(z)` and of the Frank–Wolfe bound; below
/// it the half-optimality test cannot be decided in floating point.
fn roundoff<T: Real>(p: &SddQuadratic<T>, z: &[T]) -> T {
    let mut mass = norm_l1(&p.b);
    for i in 0..p.dim() {
        mass += (p.h.diag()[i] * z[i]).abs() + p.h.row(i).map(|(j, h)| (h * z[j]).abs()).sum::<T>();
    }
    T::c(8.0 * p.dim() as f64) * T::epsilon() * mass
}

/// Largest dimension accepted by [`box_minimum`] and [`verify_oracle`].
pub const MAX_VERIFY_DIM: usize = 8;

/// Exact minimum of `Q` over the unit box by enumerating all `3^d` faces.
///
/// On each face the free coordinates solve their stationarity system through
/// a pseudo-inverse; infeasible stationary points are discarded.
pub fn box_minimum<T: Real>(p: &SddQuadratic<T>) -> Result<(Vec<f64>, f64)> {
    let d = p.dim();
    if d > MAX_VERIFY_DIM {
        return Err(Error::DimensionTooLarge {
            dim: d,
            max: MAX_VERIFY_DIM,
        });
    }
    let h = p.h.to_dense_f64();
    let b: Vec<f64> = p.b.iter().map(|v| v.to_f64_lossy()).collect();
    let q = |z: &[f64]| {
        let hz = &h * nalgebra::DVector::from_column_slice(z);
        z.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>() + 0.5 * z.iter().zip(hz.iter()).map(|(a, c)| a * c).sum::<f64>()
    };

    let mut best_z = vec![0.0; d];
    let mut best = 0.0;
    let mut state = vec![0u8; d]; // 0 free, 1 at -1, 2 at +1
    loop {
        let free: Vec<usize> = (0..d).filter(|&i| state[i] == 0).collect();
        let mut z: Vec<f64> = state
            .iter()
            .map(|s| match s {
                1 => -1.0,
                2 => 1.0,
                _ => 0.0,
            })
            .collect();
        let mut feasible = true;
        if !free.is_empty() {
            let f = free.len();
            let hff = DMatrix::from_fn(f, f, |a, c| h[(free[a], free[c])]);
            let rhs = nalgebra::DVector::from_fn(f, |a, _| {
                let i = free[a];
                -(b[i] + (0..d).filter(|j| state[*j] != 0).map(|j| h[(i, j)] * z[j]).sum::<f64>())
            });
            let pinv = hff.pseudo_inverse(1e-12).expect("svd of a symmetric matrix");
            let sol = pinv * &rhs;
            for (a, &i) in free.iter().enumerate() {
                if sol[a].abs() > 1.0 + 1e-12 {
                    feasible = false;
                }
                z[i] = sol[a].clamp(-1.0, 1.0);
            }
        }
        if feasible {
            let v = q(&z);
            if v < best {
                best = v;
                best_z = z;
            }
        }
        // next ternary state
        let mut k = 0;
        while k < d && state[k] == 2 {
            state[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
        state[k] += 1;
    }
    Ok((best_z, best))
}

/// Brute-force grid minimum of `Q` over the box with spacing `step`.
///
/// Returns `None` when the grid would exceed 5·10⁶ points.
pub fn grid_minimum<T: Real>(p: &SddQuadratic<T>, step: f64) -> Option<f64> {
    let d = p.dim();
    let per_axis = (2.0 / step).round() as usize + 1;
    if (per_axis as f64).powi(d as i32) > 5e6 {
        return None;
    }
    let h = p.h.to_dense_f64();
    let b: Vec<f64> = p.b.iter().map(|v| v.to_f64_lossy()).collect();
    let mut idx = vec![0usize; d];
    let mut best = f64::INFINITY;
    loop {
        let z: Vec<f64> = idx.iter().map(|&k| (-1.0 + k as f64 * step).min(1.0)).collect();
        let mut v = 0.0;
        for i in 0..d {
            v += b[i] * z[i];
            for j in 0..d {
                v += 0.5 * z[i] * h[(i, j)] * z[j];
            }
        }
        best = best.min(v);
        let mut k = 0;
        while k < d && idx[k] + 1 == per_axis {
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            return Some(best);
        }
        idx[k] += 1;
    }
}

/// Test certificate: true iff `res` meets the oracle contract against the
/// exact face-enumeration minimum (and the grid minimum when `grid_step` is given).
pub fn verify_oracle<T: Real>(
    p: &SddQuadratic<T>,
    res: &OracleResult<T>,
    grid_step: Option<f64>,
) -> Result<bool> {
    let (_, mut opt) = box_minimum(p)?;
    if let Some(step) = grid_step {
        if let Some(g) = grid_minimum(p, step) {
            opt = opt.min(g);
        }
    }
    let q = res.q_value.to_f64_lossy();
    let recomputed = eval_q(p, &res.z)?.to_f64_lossy();
    let tol = (1e-12f64).max(16.0 * T::epsilon().to_f64_lossy()) * (1.0 + q.abs());
    let consistent = (q - recomputed).abs() <= tol;
    let in_box = norm_inf(&res.z).to_f64_lossy() <= 1.0 + 1e-12;
    Ok(consistent && in_box && q <= 0.5 * opt + 1e-9)
}
