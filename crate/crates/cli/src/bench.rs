use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use matscale::analysis::random_positive_matrix;
use matscale::oraclesim::CostTag;
use matscale::potential::potential_f;
use matscale::{Matrix, Norm, Targets};

use crate::io::{check_input, check_output, read_matrix, with_output};
use crate::scale::{solve_once, SolverArgs};
use crate::{bad_input, CmdResult, Classify};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated dimensions of random positive test matrices.
    #[arg(long, value_delimiter = ',', default_value = "8,16")]
    pub sizes: Vec<usize>,
    /// Benchmark this matrix instead of random ones.
    #[arg(long, short, conflicts_with = "sizes")]
    pub matrix: Option<PathBuf>,
    /// Comma-separated precisions; overrides `--eps`.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Append a wall-clock `seconds` column; output is then not reproducible.
    #[arg(long)]
    pub timing: bool,
    /// Result CSV; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

const HEADER: &str =
    "n,nnz,eps,method,oracle,seed,iterations,t,row_err_l1,col_err_l1,f,gradient,sparsify,regdiag,onenorm,ledger_total";

struct Cell {
    n: usize,
    eps: f64,
    seed: Option<u64>,
}

pub fn run(args: &BenchArgs) -> CmdResult {
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    if let Some(p) = &args.matrix {
        check_input(p)?;
    }
    args.solver.validate()?;
    let eps_grid = if args.eps_grid.is_empty() {
        vec![args.solver.eps]
    } else {
        args.eps_grid.clone()
    };
    if eps_grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return bad_input("every precision must lie in (0, 1]");
    }
    let fixed = match &args.matrix {
        Some(p) => Some(read_matrix(p)?.normalized().input()?.0),
        None => None,
    };
    let sizes = match &fixed {
        Some(a) => vec![a.n_rows()],
        None => args.sizes.clone(),
    };
    if sizes.iter().any(|&n| n < 2) {
        return bad_input("every size must be at least 2");
    }
    let mut cells = Vec::new();
    for &n in &sizes {
        for &eps in &eps_grid {
            for seed in args.solver.seeds() {
                cells.push(Cell { n, eps, seed });
            }
        }
    }
    let base_seed = args.solver.seed.unwrap_or(0);
    let rows: Vec<CmdResult<String>> = cells
        .par_iter()
        .map(|c| {
            let a = match &fixed {
                Some(a) => a.clone(),
                None => random_positive_matrix(c.n, c.n, 0.5, 1.5, &mut ChaCha8Rng::seed_from_u64(base_seed)),
            };
            bench_cell(args, &a, c)
        })
        .collect();
    let rows: Vec<String> = rows.into_iter().collect::<CmdResult<_>>()?;
    with_output(args.out.as_deref(), |w| {
        let header = if args.timing { format!("{HEADER},seconds") } else { HEADER.to_string() };
        writeln!(w, "{header}").input()?;
        for r in &rows {
            writeln!(w, "{r}").input()?;
        }
        Ok(())
    })
}

fn bench_cell(args: &BenchArgs, a: &Matrix, c: &Cell) -> CmdResult<String> {
    let s = SolverArgs {
        eps: c.eps,
        ..args.solver.clone()
    };
    let t = Targets::uniform(a.n_rows(), a.n_cols());
    let start = Instant::now();
    let run = solve_once(&s, a, &t, c.seed, false)?;
    let secs = start.elapsed().as_secs_f64();
    let (re, ce) = a.scaling_error(&run.scaling, &t, Norm::L1);
    let f = potential_f(a, &run.scaling, &t).solver()?;
    let units: Vec<String> = CostTag::ALL.iter().map(|tag| run.ledger.units(*tag).to_string()).collect();
    let mut row = format!(
        "{},{},{},{},{},{},{},{},{:e},{:e},{},{},{}",
        c.n,
        a.nnz(),
        c.eps,
        s.method.as_str(),
        s.oracle.as_str(),
        c.seed.map(|v| v.to_string()).unwrap_or_default(),
        run.iterations,
        run.t.map(|v| v.to_string()).unwrap_or_default(),
        re,
        ce,
        f,
        units.join(","),
        run.ledger.total()
    );
    if args.timing {
        row.push_str(&format!(",{secs}"));
    }
    Ok(row)
}
