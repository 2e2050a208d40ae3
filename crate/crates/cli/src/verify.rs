use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;

use matscale::analysis::{run_trial, write_report_csv, LemmaReport, Suite};

use crate::io::{check_output, with_output};
use crate::{bad_input, CmdResult, Classify, Failure};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// hessian, convexity, smallest-entry, distance, robustness, schedule, oracle or all.
    #[arg(long)]
    pub suite: Suite,
    /// Instance dimension, at least 2.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Random instances, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report CSV; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &VerifyArgs) -> CmdResult {
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    if args.n < 2 {
        return bad_input("--n must be at least 2");
    }
    if args.trials == 0 {
        return bad_input("--trials must be at least 1");
    }
    let per_seed: Vec<_> = (0..args.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(args.suite, args.n, args.seed + i))
        .collect();
    let mut reports: Vec<LemmaReport> = Vec::new();
    for (i, r) in per_seed.into_iter().enumerate() {
        reports.extend(r.with_context(|| format!("seed {}", args.seed + i as u64)).solver()?);
    }
    with_output(args.out.as_deref(), |w| write_report_csv(&reports, w).input())?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    eprintln!("{}: {} of {} checks passed", args.suite, reports.len() - failed, reports.len());
    if failed > 0 {
        return Err(Failure::Checks {
            failed,
            total: reports.len(),
        });
    }
    Ok(())
}
