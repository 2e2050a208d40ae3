use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use matscale::hardgen::{default_b, gen_hard, gen_rowsum_lb, gen_sparse_hard, recover_signs};
use matscale::Scaling;

use crate::io::{check_input, check_output, read_json, write_json, write_matrix, Answers};
use crate::{bad_input, CmdResult, Classify};

/// Output paths shared by the generators.
#[derive(Debug, Args)]
pub struct GenOutput {
    /// Seed of the instance.
    #[arg(long)]
    pub seed: u64,
    /// Matrix Market output.
    #[arg(long, short)]
    pub out: PathBuf,
    /// JSON file receiving the hidden signs.
    #[arg(long)]
    pub answers: PathBuf,
}

impl GenOutput {
    fn check(&self) -> CmdResult {
        check_output(&self.out)?;
        check_output(&self.answers)
    }
}

#[derive(Debug, Args)]
pub struct GenHardArgs {
    /// Even dimension n ≥ 4.
    #[arg(long)]
    pub n: usize,
    /// Entry spread b ≥ 2; defaults to max(2, ⌈2√ln n⌉).
    #[arg(long)]
    pub b: Option<f64>,
    /// Write the matrix divided by its 1-norm.
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub output: GenOutput,
}

#[derive(Debug, Args)]
pub struct GenSparseHardArgs {
    /// Dimension n, a multiple of the block size.
    #[arg(long)]
    pub n: usize,
    /// Even block size s ≥ 4; every row has s non-zeros.
    #[arg(long)]
    pub block: usize,
    #[command(flatten)]
    pub output: GenOutput,
}

#[derive(Debug, Args)]
pub struct GenRowsumArgs {
    /// Even dimension n.
    #[arg(long)]
    pub n: usize,
    /// Row-sum gap τ ∈ [1/n, 1/2] with nτ integral.
    #[arg(long)]
    pub tau: f64,
    #[command(flatten)]
    pub output: GenOutput,
}

pub fn run_hard(args: &GenHardArgs) -> CmdResult {
    args.output.check()?;
    let b = args.b.unwrap_or_else(|| default_b(args.n));
    let inst = gen_hard(args.n, b, args.output.seed).input()?;
    let m = if args.normalize { inst.normalized() } else { inst.matrix.clone() };
    write_matrix(&args.output.out, &m)?;
    write_json(
        &args.output.answers,
        &Answers {
            kind: "hard".into(),
            n: inst.n,
            b: Some(inst.b),
            block: None,
            tau: None,
            seed: inst.seed,
            a: inst.a,
        },
    )
}

pub fn run_sparse_hard(args: &GenSparseHardArgs) -> CmdResult {
    args.output.check()?;
    let inst = gen_sparse_hard(args.n, args.block, args.output.seed).input()?;
    write_matrix(&args.output.out, &inst.matrix)?;
    write_json(
        &args.output.answers,
        &Answers {
            kind: "sparse-hard".into(),
            n: inst.n,
            b: Some(default_b(inst.block)),
            block: Some(inst.block),
            tau: None,
            seed: inst.seed,
            a: inst.signs(),
        },
    )
}

pub fn run_rowsum(args: &GenRowsumArgs) -> CmdResult {
    args.output.check()?;
    let inst = gen_rowsum_lb(args.n, args.tau, args.output.seed).input()?;
    write_matrix(&args.output.out, &inst.matrix)?;
    write_json(
        &args.output.answers,
        &Answers {
            kind: "rowsum-lb".into(),
            n: inst.n,
            b: None,
            block: None,
            tau: Some(inst.tau),
            seed: inst.seed,
            a: inst.a,
        },
    )
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Result JSON written by `scale`.
    #[arg(long)]
    pub result: PathBuf,
    /// Answers JSON written by `gen-hard` or `gen-sparse-hard`.
    #[arg(long)]
    pub answers: PathBuf,
    /// Optional accuracy JSON.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct ResultFile {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Accuracy {
    accuracy: f64,
    correct: usize,
    total: usize,
    /// Pairs whose difference was exactly zero.
    ties: bool,
}

pub fn run_recover(args: &RecoverArgs) -> CmdResult {
    check_input(&args.result)?;
    check_input(&args.answers)?;
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    let res: ResultFile = read_json(&args.result)?;
    let ans: Answers = read_json(&args.answers)?;
    if ans.kind == "rowsum-lb" {
        return bad_input("row-sum instances are decoded from row sums, not from a scaling");
    }
    if res.x.len() != 2 * ans.a.len() {
        return bad_input(format!(
            "result has {} row scalings but the answers hold {} signs",
            res.x.len(),
            ans.a.len()
        ));
    }
    let (signs, ties) = recover_signs(&Scaling { x: res.x, y: res.y }).input()?;
    let correct = signs.iter().zip(&ans.a).filter(|(p, q)| p == q).count();
    let total = ans.a.len();
    let acc = Accuracy {
        accuracy: correct as f64 / total.max(1) as f64,
        correct,
        total,
        ties,
    };
    println!("accuracy {:.6} ({correct}/{total})", acc.accuracy);
    if let Some(p) = &args.out {
        write_json(p, &acc)?;
    }
    Ok(())
}
