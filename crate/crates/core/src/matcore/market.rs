//! Matrix Market coordinate I/O (`real general`, 1-indexed).

use std::io::{BufRead, Write};

use super::SparseNonNegMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

const BANNER: &str = "%%MatrixMarket matrix coordinate real general";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads a `coordinate real general` Matrix Market stream.
pub fn read_matrix_market<T: Real, R: BufRead>(reader: R) -> Result<SparseNonNegMatrix<T>> {
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let first = first?;
    let banner: Vec<String> = first.split_whitespace().map(str::to_ascii_lowercase).collect();
    if banner.len() != 5
        || banner[0] != "%%matrixmarket"
        || banner[1] != "matrix"
        || banner[2] != "coordinate"
        || !matches!(banner[3].as_str(), "real" | "integer")
        || banner[4] != "general"
    {
        return Err(parse_err(1, format!("unsupported header '{first}'")));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (k, line) in lines {
        let lineno = k + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line needs 'rows cols nnz'"));
                }
                let p = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|e| parse_err(lineno, format!("bad size '{s}': {e}")))
                };
                let (r, c, nnz) = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
                if r == 0 || c == 0 {
                    return Err(parse_err(lineno, "dimensions must be positive"));
                }
                triplets.reserve(nnz);
                size = Some((r, c, nnz));
            }
            Some(_) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "entry line needs 'row col value'"));
                }
                let idx = |s: &str| match s.parse::<usize>() {
                    Ok(0) | Err(_) => Err(parse_err(lineno, format!("bad 1-based index '{s}'"))),
                    Ok(v) => Ok(v - 1),
                };
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|e| parse_err(lineno, format!("bad value '{}': {e}", fields[2])))?;
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                triplets.push((idx(fields[0])?, idx(fields[1])?, T::c(v)));
            }
        }
    }
    let (r, c, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if triplets.len() != nnz {
        return Err(parse_err(
            0,
            format!("declared {nnz} entries, found {}", triplets.len()),
        ));
    }
    SparseNonNegMatrix::from_triplets(r, c, triplets)
}

/// Writes `a` in `coordinate real general` format with shortest round-trip floats.
pub fn write_matrix_market<T: Real, W: Write>(a: &SparseNonNegMatrix<T>, mut w: W) -> Result<()> {
    writeln!(w, "{BANNER}")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = SparseNonNegMatrix::from_triplets(2, 3, [(0, 2, 0.1), (1, 0, 1.0 / 3.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b: SparseNonNegMatrix<f64> = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_malformed() {
        let bad = [
            "garbage\n1 1 1\n1 1 1\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n",
            "%%MatrixMarket matrix array real general\n1 1\n1.0\n",
        ];
        for text in bad {
            assert!(read_matrix_market::<f64, _>(text.as_bytes()).is_err(), "{text}");
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "%%MatrixMarket matrix coordinate real general\n% note\n\n2 2 1\n% x\n2 2 0.5\n";
        let a: SparseNonNegMatrix<f64> = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.get(1, 1).unwrap(), 0.5);
    }
}
