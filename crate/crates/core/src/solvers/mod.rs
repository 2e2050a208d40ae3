//! Sinkhorn iteration and the box-constrained Newton method.

mod bcn;
mod sinkhorn;

use std::io::Write;

pub use bcn::{
    b_doubling_solve, bcn_solve, bcn_step, derive_bcn_params, norm_control, BcnOptions,
    BcnParams, BcnSolution, BcnStep, DoublingOptions, DoublingSolution, Oracles,
};
pub use sinkhorn::{sinkhorn_col_step, sinkhorn_row_step, sinkhorn_solve};

use crate::error::Result;

/// One row of a [`SolveTrace`]. Fields a solver does not track are `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub f: Option<f64>,
    pub freg: Option<f64>,
    pub row_err_l1: Option<f64>,
    pub col_err_l1: Option<f64>,
    pub one_norm: Option<f64>,
    pub shifts: usize,
    pub ledger_units: f64,
}

/// Per-iteration history of a solve; one record per executed iteration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub const CSV_HEADER: &'static str = "iter,f,freg,row_err_l1,col_err_l1,one_norm,shifts,ledger_units";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.iter,
                opt(r.f),
                opt(r.freg),
                opt(r.row_err_l1),
                opt(r.col_err_l1),
                opt(r.one_norm),
                r.shifts,
                r.ledger_units
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_leaves_missing_fields_empty() {
        let t = SolveTrace {
            records: vec![TraceRecord {
                iter: 1,
                f: Some(0.5),
                shifts: 2,
                ledger_units: 3.0,
                ..Default::default()
            }],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("1,0.5,,,,,2,3"));
    }
}
