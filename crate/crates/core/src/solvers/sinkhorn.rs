use super::{SolveTrace, TraceRecord};
use crate::error::{Error, Result};
use crate::matcore::{Norm, ScalingPair, SparseNonNegMatrix, TargetMarginals};
use crate::potential::potential_f;
use crate::scalar::Real;

/// Rescales every row of `A(x, y)` to its target: `x_i += ln(r_i / r_i(A(x,y)))`.
pub fn sinkhorn_row_step<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    t: &TargetMarginals<T>,
) -> ScalingPair<T> {
    let r = a.row_marginals(s);
    ScalingPair {
        x: s.x.iter().zip(&r).zip(t.r()).map(|((x, m), g)| *x + g.ln() - m.ln()).collect(),
        y: s.y.clone(),
    }
}

/// Rescales every column: `y_j += ln(c_j / c_j(A(x,y)))`.
pub fn sinkhorn_col_step<T: Real>(
    a: &SparseNonNegMatrix<T>,
    s: &ScalingPair<T>,
    t: &TargetMarginals<T>,
) -> ScalingPair<T> {
    let c = a.col_marginals(s);
    ScalingPair {
        x: s.x.clone(),
        y: s.y.iter().zip(&c).zip(t.c()).map(|((y, m), g)| *y + g.ln() - m.ln()).collect(),
    }
}

fn check_support<T: Real>(a: &SparseNonNegMatrix<T>) -> Result<()> {
    if let Some(index) = a.row_counts().iter().position(|&c| c == 0) {
        return Err(Error::ZeroMarginal { side: "row", index });
    }
    if let Some(index) = a.col_counts().iter().position(|&c| c == 0) {
        return Err(Error::ZeroMarginal { side: "col", index });
    }
    Ok(())
}

/// Alternating row/column normalization from `(0, 0)` until both errors are
/// at most `eps` in `norm`. Each trace record is one row step plus one column step.
pub fn sinkhorn_solve<T: Real>(
    a: &SparseNonNegMatrix<T>,
    t: &TargetMarginals<T>,
    eps: T,
    norm: Norm,
    max_iters: usize,
) -> Result<(ScalingPair<T>, SolveTrace)> {
    t.fits(a)?;
    check_support(a)?;
    let mut s = ScalingPair::zeros(a.n_rows(), a.n_cols());
    let mut trace = SolveTrace::default();
    loop {
        let (re, ce) = a.scaling_error(&s, t, norm);
        if re <= eps && ce <= eps {
            return Ok((s, trace));
        }
        if trace.len() == max_iters {
            return Err(Error::MaxIters(max_iters));
        }
        s = sinkhorn_row_step(a, &s, t);
        s = sinkhorn_col_step(a, &s, t);
        if !s.is_finite() {
            return Err(Error::NonFiniteScaling);
        }
        let (r1, c1) = a.scaling_error(&s, t, Norm::L1);
        trace.records.push(TraceRecord {
            iter: trace.len() + 1,
            f: potential_f(a, &s, t).ok().map(Real::to_f64_lossy),
            row_err_l1: Some(r1.to_f64_lossy()),
            col_err_l1: Some(c1.to_f64_lossy()),
            one_norm: Some(a.one_norm_scaled(&s).to_f64_lossy()),
            ..Default::default()
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn already_scaled_takes_no_updates() {
        let a = SparseNonNegMatrix::from_triplets(2, 2, [(0, 0, 0.25), (0, 1, 0.25), (1, 0, 0.25), (1, 1, 0.25)])
            .unwrap();
        let (s, trace) = sinkhorn_solve(&a, &TargetMarginals::uniform(2, 2), 1e-12, Norm::L2, 10).unwrap();
        assert!(trace.is_empty());
        assert_eq!(s, ScalingPair::zeros(2, 2));
    }

    #[test]
    fn zero_row_is_rejected() {
        let a = SparseNonNegMatrix::from_triplets(2, 2, [(0, 0, 0.5), (0, 1, 0.5)]).unwrap();
        assert_eq!(
            sinkhorn_solve(&a, &TargetMarginals::uniform(2, 2), 1e-6, Norm::L1, 10).unwrap_err(),
            Error::ZeroMarginal { side: "row", index: 1 }
        );
    }

    #[test]
    fn row_step_hits_row_targets() {
        let a = SparseNonNegMatrix::from_triplets(2, 3, [(0, 0, 0.3), (0, 2, 0.1), (1, 1, 0.6)]).unwrap();
        let t = TargetMarginals::uniform(2, 3);
        let s = sinkhorn_row_step(&a, &ScalingPair::<f64>::zeros(2, 3), &t);
        for (m, g) in a.row_marginals(&s).iter().zip(t.r()) {
            assert!((m - g).abs() < 1e-15f64);
        }
    }

    #[test]
    fn max_iters_reported() {
        // upper triangular support: scalable only in the limit
        let a = SparseNonNegMatrix::from_triplets(2, 2, [(0, 0, 0.4), (0, 1, 0.3), (1, 1, 0.3)]).unwrap();
        assert_eq!(
            sinkhorn_solve(&a, &TargetMarginals::uniform(2, 2), 1e-14, Norm::L1, 50).unwrap_err(),
            Error::MaxIters(50)
        );
    }
}
