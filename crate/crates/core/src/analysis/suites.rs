//! Randomized verification suites built from the individual checks.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    brute_force_schedule, check_convexity_midpoint, check_distance_bound, check_distance_bound_sigma,
    check_hessian_lower_bound, check_second_order_robust, check_smallest_entry_bounds, check_variation_norm,
    delta_schedule_lower_bound, optimal_schedule, optimal_schedule_cost, random_positive_matrix,
    random_sdd_quadratic, reference_scaling, schedule_final, LemmaReport, IDENTITY_TOL, MAX_BRUTE_FORCE_LEN,
};
use crate::boxoracle::{box_minimum, k_oracle, verify_oracle, DEFAULT_ORACLE_ITERS, MAX_VERIFY_DIM};
use crate::error::{Error, Result};
use crate::hardgen::{default_b, first_step_factors, gen_hard};
use crate::matcore::{ScalingPair, SparseNonNegMatrix, TargetMarginals};
use crate::potential::{project_to_v, PotentialConfig};

/// Named group of checks run by [`run_trial`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Hessian,
    Convexity,
    SmallestEntry,
    Distance,
    Robustness,
    Schedule,
    Oracle,
    All,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Hessian,
        Suite::Convexity,
        Suite::SmallestEntry,
        Suite::Distance,
        Suite::Robustness,
        Suite::Schedule,
        Suite::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Hessian => "hessian",
            Suite::Convexity => "convexity",
            Suite::SmallestEntry => "smallest-entry",
            Suite::Distance => "distance",
            Suite::Robustness => "robustness",
            Suite::Schedule => "schedule",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown suite '{s}'")))
    }
}

fn random_point<R: Rng>(nr: usize, nc: usize, radius: f64, rng: &mut R) -> ScalingPair<f64> {
    ScalingPair {
        x: (0..nr).map(|_| rng.random_range(-radius..=radius)).collect(),
        y: (0..nc).map(|_| rng.random_range(-radius..=radius)).collect(),
    }
}

fn uniform_matrix(n: usize) -> SparseNonNegMatrix<f64> {
    let v = 1.0 / (n * n) as f64;
    SparseNonNegMatrix::from_triplets(n, n, (0..n * n).map(|k| (k / n, k % n, v))).expect("in range")
}

fn tag(reports: Vec<LemmaReport>, seed: u64) -> Vec<LemmaReport> {
    reports
        .into_iter()
        .map(|r| {
            let inst = format!("seed={seed} {}", r.instance);
            r.with_instance(inst)
        })
        .collect()
}

/// One randomized trial of `suite` on `n × n` instances, deterministic in `seed`.
///
/// `schedule` and `oracle` ignore `n`; `oracle` draws dimensions up to 8.
pub fn run_trial(suite: Suite, n: usize, seed: u64) -> Result<Vec<LemmaReport>> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("n must be at least 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = || PotentialConfig::new(0.1, 1.0, TargetMarginals::uniform(n, n));
    let mut out = Vec::new();
    match suite {
        Suite::All => {
            for s in Suite::ALL {
                out.extend(run_trial(s, n, seed)?);
            }
            return Ok(out);
        }
        Suite::Hessian => {
            let a = random_positive_matrix(n, n, 0.05, 1.0, &mut rng);
            out.extend(check_hessian_lower_bound(&a, &random_point(n, n, 1.0, &mut rng))?);
            out.extend(
                check_hessian_lower_bound(&uniform_matrix(n), &ScalingPair::zeros(n, n))?
                    .into_iter()
                    .map(|r| r.with_instance(format!("uniform {n}x{n}"))),
            );
        }
        Suite::Convexity => {
            let a = random_positive_matrix(n, n, 0.05, 1.0, &mut rng);
            let s = random_point(n, n, 2.0, &mut rng);
            let s2 = random_point(n, n, 2.0, &mut rng);
            out.push(check_convexity_midpoint(&a, &cfg()?, &s, &s2)?);
            out.extend(check_hessian_lower_bound(&a, &s)?);
        }
        Suite::SmallestEntry => {
            let a = random_positive_matrix(n, n, 0.05, 1.0, &mut rng);
            let t = TargetMarginals::uniform(n, n);
            let star = reference_scaling(&a, &t)?;
            let mut s = star.clone();
            s.x[rng.random_range(0..n)] += 0.3;
            out.extend(check_smallest_entry_bounds(&a, &star, &s)?);
            let d: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-0.5..=0.5)).collect();
            out.extend(check_smallest_entry_bounds(&a, &star, &star.add_stacked(&d, 1.0))?);
            out.extend(check_variation_norm(&a, &t, &star)?);
        }
        Suite::Distance => {
            let a = random_positive_matrix(n, n, 0.5, 1.0, &mut rng);
            let star = reference_scaling(&a, &TargetMarginals::uniform(n, n))?;
            for _ in 0..4 {
                let s = probe(&star, &mut rng);
                out.push(check_distance_bound(&a, &s, &star, 0.5)?);
            }
            if n % 2 == 0 && n >= 4 {
                let inst = gen_hard(n, default_b(n), rng.random())?;
                let a = inst.normalized();
                let star = reference_scaling(&a, &TargetMarginals::uniform(n, n))?;
                let mut first = first_step_factors(&inst);
                let shift = ((2 * inst.k * n) as f64).ln();
                first.x.iter_mut().for_each(|v| *v += shift);
                out.push(check_distance_bound_sigma(&a, &project_to_v(&first), &star, 0.5)?);
                for _ in 0..2 {
                    let s = probe(&star, &mut rng);
                    out.push(check_distance_bound_sigma(&a, &s, &star, 0.5)?);
                }
            }
        }
        Suite::Robustness => {
            let a = random_positive_matrix(n, n, 0.05, 1.0, &mut rng);
            let s = random_point(n, n, 2.0, &mut rng);
            let d: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
            out.push(check_second_order_robust(&a, &cfg()?, &s, &s.add_stacked(&d, 1.0))?);
        }
        Suite::Schedule => out.extend(schedule_trial(&mut rng)?),
        Suite::Oracle => {
            let d = rng.random_range(1..=MAX_VERIFY_DIM);
            let p = random_sdd_quadratic(d, &mut rng);
            let res = k_oracle(&p, DEFAULT_ORACLE_ITERS)?;
            let (_, opt) = box_minimum(&p)?;
            let pass = verify_oracle(&p, &res, None)?;
            out.push(LemmaReport::new("k-oracle", format!("d={d}"), res.q_value, 0.5 * opt + 1e-9, pass));
        }
    }
    Ok(tag(out, seed))
}

/// `s* + r·u` projected onto `V`, with `u` uniform in the unit ℓ∞ ball and
/// `r` log-uniform in `[1e-8, 1]`.
fn probe<R: Rng>(star: &ScalingPair<f64>, rng: &mut R) -> ScalingPair<f64> {
    let r = 10f64.powf(rng.random_range(-8.0..=0.0));
    let d: Vec<f64> = (0..star.dim()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    project_to_v(&star.add_stacked(&d, r))
}

/// Random `(z0, ε, γ)` with `(1−γ)^5 z0 < ε < z0`; one pair of reports per feasible length.
fn schedule_trial<R: Rng>(rng: &mut R) -> Result<Vec<LemmaReport>> {
    let gamma = rng.random_range(0.05..=0.5);
    let z0 = rng.random_range(0.5..=10.0);
    let floor = (1.0f64 - gamma).powi(MAX_BRUTE_FORCE_LEN as i32);
    let eps = z0 * rng.random_range(floor * 1.05..0.95);
    let lb = delta_schedule_lower_bound(z0, eps, gamma)?;
    let inst = format!("z0={z0:.4} eps={eps:.4} gamma={gamma:.4}");
    let mut out = Vec::new();
    for len in 1..=MAX_BRUTE_FORCE_LEN {
        let Some((_, brute)) = brute_force_schedule(z0, eps, gamma, len, 30)? else {
            continue;
        };
        let closed = optimal_schedule_cost(z0, eps, gamma, len)?.expect("feasible length");
        let sched = optimal_schedule(z0, eps, gamma, len)?.expect("feasible length");
        let reaches = schedule_final(z0, gamma, &sched) <= eps * (1.0 + IDENTITY_TOL);
        let inst = format!("{inst} N={len}");
        out.push(LemmaReport::new("schedule-lb", inst.clone(), brute, lb, brute >= lb * (1.0 - IDENTITY_TOL)));
        out.push(LemmaReport::new(
            "schedule-closed-form",
            inst,
            closed,
            brute,
            reaches && (closed - brute).abs() <= 1e-6 * brute,
        ));
    }
    Ok(out)
}

/// `trials` trials with seeds `seed, seed + 1, …`, concatenated in seed order.
pub fn run_suite(suite: Suite, n: usize, trials: usize, seed: u64) -> Result<Vec<LemmaReport>> {
    let mut out = Vec::new();
    for i in 0..trials {
        out.extend(run_trial(suite, n, seed.wrapping_add(i as u64))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL.into_iter().chain([Suite::All]) {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes_a_few_trials() {
        let reports = run_suite(Suite::All, 6, 3, 17).unwrap();
        let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(reports.iter().any(|r| r.lemma == "grad-to-inf-sigma"));
    }

    #[test]
    fn trials_are_deterministic() {
        assert_eq!(run_trial(Suite::Distance, 4, 9).unwrap(), run_trial(Suite::Distance, 4, 9).unwrap());
    }
}
