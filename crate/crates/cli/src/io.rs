use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use matscale::matcore::{read_matrix_market, write_matrix_market};
use matscale::{Matrix, Targets};

use crate::{bad_input, CmdResult, Classify};

/// Fails unless `path` names an existing regular file.
pub fn check_input(path: &Path) -> CmdResult {
    if !path.is_file() {
        return bad_input(format!("{}: no such file", path.display()));
    }
    Ok(())
}

/// Fails unless the parent directory of `path` exists.
pub fn check_output(path: &Path) -> CmdResult {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            bad_input(format!("{}: parent directory does not exist", path.display()))
        }
        _ if path.is_dir() => bad_input(format!("{}: is a directory", path.display())),
        _ => Ok(()),
    }
}

pub fn create(path: &Path) -> CmdResult<BufWriter<File>> {
    File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map(BufWriter::new)
        .input()
}

pub fn read_matrix(path: &Path) -> CmdResult<Matrix> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display())).input()?;
    read_matrix_market(BufReader::new(f))
        .with_context(|| format!("reading {}", path.display()))
        .input()
}

pub fn write_matrix(path: &Path, a: &Matrix) -> CmdResult {
    let mut w = create(path)?;
    write_matrix_market(a, &mut w).input()?;
    w.flush().input()
}

/// Target marginals stored as `{"r": [...], "c": [...]}`.
#[derive(Debug, Deserialize)]
struct TargetFile {
    r: Vec<f64>,
    c: Vec<f64>,
}

/// `"uniform"` or a path to a target JSON file; the result must fit `a`.
pub fn read_targets(source: &str, a: &Matrix) -> CmdResult<Targets> {
    let t = if source == "uniform" {
        Targets::uniform(a.n_rows(), a.n_cols())
    } else {
        let path = Path::new(source);
        check_input(path)?;
        let tf: TargetFile = read_json(path)?;
        Targets::new(tf.r, tf.c).with_context(|| format!("targets in {source}")).input()?
    };
    t.fits(a).context("targets do not match the matrix").input()?;
    Ok(t)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display())).input()?;
    serde_json::from_reader(BufReader::new(f))
        .with_context(|| format!("parsing {}", path.display()))
        .input()
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> CmdResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).input()?;
    writeln!(w).input()?;
    w.flush().input()
}

/// Writes to `path`, or to stdout when `None`.
pub fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> CmdResult) -> CmdResult {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush().input()
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush().input()
        }
    }
}

/// Hidden data behind a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Answers {
    /// `hard`, `sparse-hard` or `rowsum-lb`.
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub seed: u64,
    pub a: Vec<i8>,
}
