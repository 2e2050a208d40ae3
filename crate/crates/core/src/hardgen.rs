//! Lower-bound instance families and their decoders.
//!
//! * [`gen_hard`]: the `2k × n` matrix `A^σ` whose near-exact scalings encode
//!   hidden signs `a_i` through the Hamming weights of planted bit strings.
//! * [`gen_sparse_hard`]: a normalized direct sum of independent `A^σ` blocks.
//! * [`gen_rowsum_lb`]: a matrix with uniform column sums whose row sums
//!   encode signs at resolution `τ/n`.
//!
//! All generators are deterministic in their seed (ChaCha8).

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::{ScalingPair, SparseNonNegMatrix};
use crate::scalar::Entry;

/// A planted `A^σ` instance together with everything used to build it.
#[derive(Clone, Debug, PartialEq)]
pub struct HardInstance {
    pub n: usize,
    pub k: usize,
    pub b: f64,
    /// Hidden signs, `a_i ∈ {±1}`.
    pub a: Vec<i8>,
    /// Bit strings `z^i ∈ {±1}^n` with `|z^i| = n/2 + a_i`.
    pub z: Vec<Vec<i8>>,
    /// Permutations `σ^i` of `0..n`.
    pub sigma: Vec<Vec<usize>>,
    /// The raw matrix with entries `1 ± w^i_j/b`.
    pub matrix: SparseNonNegMatrix<f64>,
    pub seed: u64,
}

fn check_n(n: usize) -> Result<()> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidN(n));
    }
    Ok(())
}

fn check_b(b: f64) -> Result<()> {
    if !(b >= 2.0) || !b.is_finite() {
        return Err(Error::InvalidB(b));
    }
    Ok(())
}

/// `max(2, ⌈2√ln n⌉)`.
pub fn default_b(n: usize) -> f64 {
    (2.0 * (n as f64).ln().sqrt()).ceil().max(2.0)
}

/// ℓ2 scaling precision `1/(54e²n²b)` under which sign recovery is guaranteed
/// once the exact scaling encodes the signs.
pub fn recovery_precision(n: usize, b: f64) -> f64 {
    let e2 = std::f64::consts::E.powi(2);
    1.0 / (54.0 * e2 * (n * n) as f64 * b)
}

/// Uniform `±1` string of length `n` with `ones` entries equal to `+1`.
fn weighted_string(rng: &mut ChaCha8Rng, n: usize, ones: usize) -> Vec<i8> {
    let mut v: Vec<i8> = (0..n).map(|j| if j < ones { 1 } else { -1 }).collect();
    v.shuffle(rng);
    v
}

/// Samples `A^σ` with `k = n/2`, uniform signs, strings and permutations.
pub fn gen_hard(n: usize, b: f64, seed: u64) -> Result<HardInstance> {
    check_n(n)?;
    check_b(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n / 2;
    let mut z = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    for _ in 0..k {
        let a: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
        let ones = (k as i64 + a as i64) as usize;
        z.push(weighted_string(&mut rng, n, ones));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        sigma.push(perm);
    }
    let mut inst = from_parts(n, b, z, sigma)?;
    inst.seed = seed;
    Ok(inst)
}

/// Builds `A^σ` from explicit strings and permutations; `a` is read off the weights.
pub fn from_parts(n: usize, b: f64, z: Vec<Vec<i8>>, sigma: Vec<Vec<usize>>) -> Result<HardInstance> {
    check_n(n)?;
    check_b(b)?;
    let k = n / 2;
    if z.len() != k || sigma.len() != k {
        return Err(Error::InvalidParams(format!("need {k} strings and permutations")));
    }
    let mut a = Vec::with_capacity(k);
    for (i, (zi, si)) in z.iter().zip(&sigma).enumerate() {
        if zi.len() != n || zi.iter().any(|v| *v != 1 && *v != -1) {
            return Err(Error::InvalidParams(format!("z[{i}] is not a ±1 string of length {n}")));
        }
        let mut seen = vec![false; n];
        if si.len() != n || si.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParams(format!("sigma[{i}] is not a permutation of 0..{n}")));
        }
        let weight = zi.iter().filter(|v| **v == 1).count();
        a.push(match weight as i64 - k as i64 {
            1 => 1,
            -1 => -1,
            _ => {
                return Err(Error::InvalidParams(format!(
                    "z[{i}] has weight {weight}, expected n/2 ± 1"
                )))
            }
        });
    }
    let mut triplets = Vec::with_capacity(2 * k * n);
    for i in 0..k {
        let w = permuted(&z[i], &sigma[i]);
        for j in 0..n {
            let d = f64::from(w[j]) / b;
            triplets.push((2 * i, j, 1.0 + d));
            triplets.push((2 * i + 1, j, 1.0 - d));
        }
    }
    Ok(HardInstance {
        n,
        k,
        b,
        a,
        z,
        sigma,
        matrix: SparseNonNegMatrix::from_triplets(2 * k, n, triplets)?,
        seed: 0,
    })
}

/// `w_j = z_{σ⁻¹(j)}`, i.e. `w_{σ(j)} = z_j`.
fn permuted(z: &[i8], sigma: &[usize]) -> Vec<i8> {
    let mut w = vec![0; z.len()];
    for (j, &p) in sigma.iter().enumerate() {
        w[p] = z[j];
    }
    w
}

impl HardInstance {
    /// The permuted string `w^i`.
    pub fn w(&self, i: usize) -> Vec<i8> {
        permuted(&self.z[i], &self.sigma[i])
    }

    /// `A^σ/(2kn)`, which has `‖·‖₁ = 1`.
    pub fn normalized(&self) -> SparseNonNegMatrix<f64> {
        let total = (2 * self.k * self.n) as f64;
        self.matrix
            .map_values(|v| v / total)
            .expect("scaling keeps entries valid")
    }
}

/// Row factors of one Sinkhorn row step on the raw matrix with uniform targets:
/// `X_{2i−1} = 1/(2k(n + 2a_i/b))`, `X_{2i} = 1/(2k(n − 2a_i/b))`, `y = 0`.
pub fn first_step_factors(inst: &HardInstance) -> ScalingPair<f64> {
    let (n, k, b) = (inst.n as f64, inst.k as f64, inst.b);
    let mut x = Vec::with_capacity(2 * inst.k);
    for &a in &inst.a {
        let a = f64::from(a);
        x.push(-(2.0 * k * (n + 2.0 * a / b)).ln());
        x.push(-(2.0 * k * (n - 2.0 * a / b)).ln());
    }
    ScalingPair {
        x,
        y: vec![0.0; inst.n],
    }
}

/// Decoded signs `â_i = sign(x_{2i} − x_{2i−1})` (1-based pairs) and whether
/// any difference was exactly zero (decoded as `+1`).
pub fn recover_signs(s: &ScalingPair<f64>) -> Result<(Vec<i8>, bool)> {
    if s.x.len() % 2 != 0 {
        return Err(Error::InvalidParams(format!("x has odd length {}", s.x.len())));
    }
    let mut tie = false;
    let signs = s
        .x
        .chunks(2)
        .map(|p| {
            let d = p[1] - p[0];
            if d == 0.0 {
                tie = true;
            }
            if d >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    Ok((signs, tie))
}

/// Closed form of `c_j(X·A^σ)` for the first-step factors `X`.
pub fn closed_form_col_sums(inst: &HardInstance) -> Vec<f64> {
    let (n, k, b) = (inst.n as f64, inst.k as f64, inst.b);
    let denom = 2.0 * k * (n * n - 4.0 / (b * b));
    let ws: Vec<Vec<i8>> = (0..inst.k).map(|i| inst.w(i)).collect();
    (0..inst.n)
        .map(|j| {
            let v: f64 = ws.iter().zip(&inst.a).map(|(w, a)| f64::from(w[j] * a)).sum();
            (2.0 * k * n - 4.0 / (b * b) * v) / denom
        })
        .collect()
}

/// Outcome of [`column_concentration_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationCheck {
    /// `max_j |c_j(X·A^σ) − 1/n|`.
    pub max_deviation: f64,
    /// `2t/(b²(n² − 4/b²)√k)` at `t = 10√ln n`.
    pub bound: f64,
    pub pass: bool,
}

/// Compares the closed-form first-step column sums against the Hoeffding bound.
pub fn column_concentration_check(inst: &HardInstance) -> ConcentrationCheck {
    let (n, k, b) = (inst.n as f64, inst.k as f64, inst.b);
    let t = 10.0 * n.ln().sqrt();
    let bound = 2.0 * t / (b * b * (n * n - 4.0 / (b * b)) * k.sqrt());
    let max_deviation = closed_form_col_sums(inst)
        .iter()
        .fold(0.0f64, |m, c| m.max((c - 1.0 / n).abs()));
    ConcentrationCheck {
        max_deviation,
        bound,
        pass: max_deviation <= bound,
    }
}

/// Direct sum of independent hard blocks, normalized to `‖A‖₁ = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHardInstance {
    pub n: usize,
    pub block: usize,
    pub blocks: Vec<HardInstance>,
    pub matrix: SparseNonNegMatrix<f64>,
    pub seed: u64,
}

impl SparseHardInstance {
    /// Concatenated block signs.
    pub fn signs(&self) -> Vec<i8> {
        self.blocks.iter().flat_map(|b| b.a.iter().copied()).collect()
    }

    /// Restriction of `s` to block `i`.
    pub fn restrict(&self, s: &ScalingPair<f64>, i: usize) -> ScalingPair<f64> {
        let r = i * self.block..(i + 1) * self.block;
        ScalingPair {
            x: s.x[r.clone()].to_vec(),
            y: s.y[r].to_vec(),
        }
    }
}

/// `A = (s/n)·⊕_i A_i/s²` over `n/s` independent `s × s` blocks from [`gen_hard`]
/// with `b = default_b(s)`; every row has exactly `s` non-zeros.
pub fn gen_sparse_hard(n: usize, block: usize, seed: u64) -> Result<SparseHardInstance> {
    if block < 4 || block % 2 != 0 || n == 0 || n % block != 0 {
        return Err(Error::InvalidBlock { n, block });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = default_b(block);
    let blocks: Vec<HardInstance> = (0..n / block)
        .map(|_| gen_hard(block, b, rng.next_u64()))
        .collect::<Result<_>>()?;
    let factor = block as f64 / n as f64 / (block * block) as f64;
    let scaled: Vec<SparseNonNegMatrix<f64>> = blocks
        .iter()
        .map(|h| h.matrix.map_values(|v| v * factor))
        .collect::<Result<_>>()?;
    Ok(SparseHardInstance {
        n,
        block,
        matrix: SparseNonNegMatrix::direct_sum(&scaled)?,
        blocks,
        seed,
    })
}

/// Matrix with column sums `1/n` whose first `n/2` row sums are `1/n + a_iτ/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSumLbInstance {
    pub n: usize,
    pub tau: f64,
    pub a: Vec<i8>,
    /// Boolean pattern; the last `n/2` rows negate the first.
    pub pattern: Vec<Vec<bool>>,
    pub matrix: SparseNonNegMatrix<f64>,
    pub seed: u64,
}

impl RowSumLbInstance {
    /// The same pattern with `true ↦ hi`, `false ↦ lo`, e.g. exact rationals.
    pub fn matrix_with<E: Entry>(&self, hi: E, lo: E) -> Result<SparseNonNegMatrix<E>> {
        SparseNonNegMatrix::from_triplets(
            self.n,
            self.n,
            self.pattern.iter().enumerate().flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(j, &bit)| (i, j, if bit { hi } else { lo }))
            }),
        )
    }
}

/// Samples the row-sum instance; requires even `n`, `τ ∈ [1/n, 1/2]`, `nτ` integral.
pub fn gen_rowsum_lb(n: usize, tau: f64, seed: u64) -> Result<RowSumLbInstance> {
    let nt = n as f64 * tau;
    if n < 2 || n % 2 != 0 || !(tau >= 1.0 / n as f64 - 1e-12 && tau <= 0.5) || (nt - nt.round()).abs() > 1e-9 {
        return Err(Error::InvalidTau { n, tau });
    }
    let shift = nt.round() as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let mut a = Vec::with_capacity(half);
    let mut top = Vec::with_capacity(half);
    for _ in 0..half {
        let ai: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
        let ones = (half as i64 + i64::from(ai) * shift) as usize;
        let row = weighted_string(&mut rng, n, ones);
        top.push(row.into_iter().map(|v| v == 1).collect::<Vec<bool>>());
        a.push(ai);
    }
    let bottom: Vec<Vec<bool>> = top.iter().map(|r| r.iter().map(|b| !b).collect()).collect();
    let pattern: Vec<Vec<bool>> = top.into_iter().chain(bottom).collect();
    let n2 = (n * n) as f64;
    let mut inst = RowSumLbInstance {
        n,
        tau,
        a,
        pattern,
        matrix: SparseNonNegMatrix::from_triplets(1, 1, [])?,
        seed,
    };
    inst.matrix = inst.matrix_with(1.5 / n2, 0.5 / n2)?;
    Ok(inst)
}

/// `â_i = sign(r̃_i − 1/n)` for the first `n/2` rows (ties decode as `+1`).
pub fn decode_rowsums(r_tilde: &[f64]) -> Vec<i8> {
    let n = r_tilde.len() as f64;
    r_tilde[..r_tilde.len() / 2]
        .iter()
        .map(|r| if *r - 1.0 / n >= 0.0 { 1 } else { -1 })
        .collect()
}
