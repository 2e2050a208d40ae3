//! Step-size schedules for the perturbed contraction `z_{i+1} = (1−γ)z_i + δ_i`.
//!
//! Reaching `z_N ≤ ε` from `z_0` costs `Σ 1/δ_i`. The helpers below give the
//! universal lower bound on that cost, the closed-form optimal schedule for a
//! fixed `N`, and an independent grid-and-refine search used to check both.

use crate::error::{Error, Result};

fn check_params(z0: f64, eps: f64, gamma: f64) -> Result<()> {
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::InvalidParams(format!("z0 must be positive, got {z0}")));
    }
    if !(eps > 0.0 && eps < z0) {
        return Err(Error::InvalidParams(format!("need 0 < eps < z0, got eps={eps}")));
    }
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::InvalidParams(format!("need 0 < gamma <= 1/2, got {gamma}")));
    }
    Ok(())
}

/// `(1/(γ²ε))·(1 − √(ε/z0))²`: no schedule of any length reaching `ε` costs less.
pub fn delta_schedule_lower_bound(z0: f64, eps: f64, gamma: f64) -> Result<f64> {
    check_params(z0, eps, gamma)?;
    let s = 1.0 - (eps / z0).sqrt();
    Ok(s * s / (gamma * gamma * eps))
}

/// `z_N` after running the recurrence with the given schedule.
pub fn schedule_final(z0: f64, gamma: f64, deltas: &[f64]) -> f64 {
    deltas.iter().fold(z0, |z, d| (1.0 - gamma) * z + d)
}

/// `Σ 1/δ_i`.
pub fn schedule_cost(deltas: &[f64]) -> f64 {
    deltas.iter().map(|d| 1.0 / d).sum()
}

/// Budget left for the additive terms after `n` contractions, if positive.
fn slack(z0: f64, eps: f64, gamma: f64, n: usize) -> Option<f64> {
    let s = eps - (1.0 - gamma).powi(n as i32) * z0;
    (s > 0.0).then_some(s)
}

/// Cheapest length-`n` schedule with `z_n = ε`: `δ_i = c·√(1−γ)^{−n+i+1}`.
/// `None` when `(1−γ)^n z0 ≥ ε`.
pub fn optimal_schedule(z0: f64, eps: f64, gamma: f64, n: usize) -> Result<Option<Vec<f64>>> {
    check_params(z0, eps, gamma)?;
    let Some(s) = slack(z0, eps, gamma, n) else {
        return Ok(None);
    };
    let rho = (1.0 - gamma).sqrt();
    let c = s * (1.0 - rho) / (1.0 - rho.powi(n as i32));
    Ok(Some((0..n).map(|i| c * rho.powi(-(n as i32) + i as i32 + 1)).collect()))
}

/// Cost of [`optimal_schedule`]: `((1−ρ^n)/(1−ρ))² / (ε − (1−γ)^n z0)` with `ρ = √(1−γ)`.
pub fn optimal_schedule_cost(z0: f64, eps: f64, gamma: f64, n: usize) -> Result<Option<f64>> {
    check_params(z0, eps, gamma)?;
    let Some(s) = slack(z0, eps, gamma, n) else {
        return Ok(None);
    };
    let rho = (1.0 - gamma).sqrt();
    let g = (1.0 - rho.powi(n as i32)) / (1.0 - rho);
    Ok(Some(g * g / s))
}

/// Largest schedule length [`brute_force_schedule`] accepts.
pub const MAX_BRUTE_FORCE_LEN: usize = 5;

/// Minimum of `Σ 1/δ_i` over length-`n` schedules with `z_n ≤ ε`, by search.
///
/// Since the cost decreases in every `δ_i`, an optimum spends the whole slack
/// `ε − (1−γ)^n z0`. The search enumerates splits of that slack on a simplex
/// grid with `grid` parts, then refines the best split by pairwise mass
/// transfers with a halving step down to `1e-13`.
pub fn brute_force_schedule(
    z0: f64,
    eps: f64,
    gamma: f64,
    n: usize,
    grid: usize,
) -> Result<Option<(Vec<f64>, f64)>> {
    check_params(z0, eps, gamma)?;
    if n == 0 || n > MAX_BRUTE_FORCE_LEN {
        return Err(Error::InvalidParams(format!(
            "schedule length must be in 1..={MAX_BRUTE_FORCE_LEN}, got {n}"
        )));
    }
    if grid < n {
        return Err(Error::InvalidParams(format!("grid {grid} smaller than length {n}")));
    }
    let Some(s) = slack(z0, eps, gamma, n) else {
        return Ok(None);
    };
    // weight of δ_i in z_n
    let w: Vec<f64> = (0..n).map(|i| (1.0 - gamma).powi((n - 1 - i) as i32)).collect();
    let cost = |u: &[f64]| -> f64 { u.iter().zip(&w).map(|(ui, wi)| wi / (ui * s)).sum() };

    let mut best_u = vec![1.0 / n as f64; n];
    let mut best = cost(&best_u);
    let mut parts = vec![1usize; n];
    enumerate_compositions(grid, &mut parts, 0, &mut |p| {
        let u: Vec<f64> = p.iter().map(|&k| k as f64 / grid as f64).collect();
        let c = cost(&u);
        if c < best {
            best = c;
            best_u = u;
        }
    });

    let mut h = 1.0 / grid as f64;
    while h > 1e-13 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || best_u[i] <= h {
                    continue;
                }
                let mut u = best_u.clone();
                u[i] -= h;
                u[j] += h;
                let c = cost(&u);
                if c < best {
                    best = c;
                    best_u = u;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    let deltas: Vec<f64> = best_u.iter().zip(&w).map(|(ui, wi)| ui * s / wi).collect();
    let cost = schedule_cost(&deltas);
    Ok(Some((deltas, cost)))
}

/// Calls `f` on every composition of `total` into `parts.len()` positive parts.
fn enumerate_compositions(total: usize, parts: &mut [usize], at: usize, f: &mut impl FnMut(&[usize])) {
    let n = parts.len();
    if at == n - 1 {
        parts[at] = total;
        f(parts);
        return;
    }
    let remaining = n - at - 1;
    for k in 1..=total - remaining {
        parts[at] = k;
        enumerate_compositions(total - k, parts, at + 1, f);
    }
}
