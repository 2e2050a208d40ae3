//! High-accuracy reference minimizers used as ground truth by the checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matcore::{Norm, ScalingPair, SparseNonNegMatrix, TargetMarginals};
use crate::potential::{grad_reg, hessian_reg, potential_f, potential_reg, project_to_v, PotentialConfig};
use crate::solvers::sinkhorn_solve;

/// Marginal error (ℓ2, per side) the reference Sinkhorn run stops at.
pub const REFERENCE_TOL: f64 = 1e-13;
/// Iteration cap of the reference Sinkhorn run.
pub const REFERENCE_ITERS: usize = 1_000_000;

/// Exact scaling of `a` projected onto `V`, from Sinkhorn run to [`REFERENCE_TOL`].
pub fn reference_scaling(a: &SparseNonNegMatrix<f64>, t: &TargetMarginals<f64>) -> Result<ScalingPair<f64>> {
    let (s, _) = sinkhorn_solve(a, t, REFERENCE_TOL, Norm::L2, REFERENCE_ITERS)?;
    Ok(project_to_v(&s))
}

/// `f*`, evaluated at [`reference_scaling`].
pub fn reference_f_star(a: &SparseNonNegMatrix<f64>, t: &TargetMarginals<f64>) -> Result<f64> {
    potential_f(a, &reference_scaling(a, t)?, t)
}

/// Minimizer and minimum of `f̃` by damped Newton on the dense Hessian.
///
/// `f̃` is strictly convex, so Newton with backtracking converges from any
/// start; it starts from the Sinkhorn reference when one exists.
pub fn reference_freg_min(
    a: &SparseNonNegMatrix<f64>,
    cfg: &PotentialConfig<f64>,
) -> Result<(ScalingPair<f64>, f64)> {
    let (nr, nc) = (a.n_rows(), a.n_cols());
    let mut s = reference_scaling(a, cfg.targets()).unwrap_or_else(|_| ScalingPair::zeros(nr, nc));
    let mut f = potential_reg(a, &s, cfg)?;
    for _ in 0..200 {
        let g = DVector::from_vec(grad_reg(a, &s, cfg)?);
        if g.amax() <= 1e-16 {
            break;
        }
        let h: DMatrix<f64> = hessian_reg(a, &s, cfg)?.to_dense_f64();
        let d = match h.clone().cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => h.lu().solve(&(-&g)).ok_or_else(|| Error::InvalidParams("singular Hessian".into()))?,
        };
        let slope = g.dot(&d);
        if !(slope < 0.0) || -slope <= 1e-32 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let cand = s.add_stacked(d.as_slice(), step);
            if let Ok(fc) = potential_reg(a, &cand, cfg) {
                if fc <= f + 0.25 * step * slope {
                    s = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((s, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_of_scaled_matrix_is_zero() {
        let a = SparseNonNegMatrix::from_triplets(2, 2, [(0, 0, 0.25), (0, 1, 0.25), (1, 0, 0.25), (1, 1, 0.25)])
            .unwrap();
        let t = TargetMarginals::uniform(2, 2);
        let s = reference_scaling(&a, &t).unwrap();
        assert!(s.inf_norm() < 1e-15);
        assert!((reference_f_star(&a, &t).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn newton_reference_zeroes_the_gradient() {
        let a = SparseNonNegMatrix::from_triplets(
            2,
            3,
            [(0, 0, 0.2), (0, 1, 0.1), (0, 2, 0.15), (1, 0, 0.05), (1, 1, 0.3), (1, 2, 0.2)],
        )
        .unwrap();
        let cfg = PotentialConfig::new(0.1, 1.0, TargetMarginals::uniform(2, 3)).unwrap();
        let (s, f) = reference_freg_min(&a, &cfg).unwrap();
        let g = grad_reg(&a, &s, &cfg).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
        // f̃* sits below f̃ at nearby points
        for k in 0..5 {
            let mut d = vec![0.0; 5];
            d[k] = 1e-3;
            assert!(potential_reg(&a, &s.add_stacked(&d, 1.0), &cfg).unwrap() >= f);
        }
    }
}
