//! Monte-Carlo accuracy of the estimator as a function of sample count.

use std::fmt::Write as _;

use super::{Estimator, GridConfig};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rng::{self, derive_seed, rng_from_seed};
use crate::workload::{DistributionSpec, Family, KeySampler, KeySpace};

pub const ACCURACY_CSV_HEADER: &str = "sample_count,correct_family_pct,exact_param_pct,eps_le_0.1_pct,eps_le_0.2_pct";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyRow {
    pub sample_count: usize,
    pub correct_family_pct: f64,
    pub exact_param_pct: f64,
    pub eps_le_01_pct: f64,
    pub eps_le_02_pct: f64,
}

impl AccuracyRow {
    pub fn to_csv(rows: &[AccuracyRow]) -> String {
        let mut s = String::from(ACCURACY_CSV_HEADER);
        s.push('\n');
        for r in rows {
            let _ = writeln!(
                s,
                "{},{:.1},{:.1},{:.1},{:.1}",
                r.sample_count, r.correct_family_pct, r.exact_param_pct, r.eps_le_01_pct, r.eps_le_02_pct
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Score {
    family: bool,
    exact: bool,
    eps01: bool,
    eps02: bool,
}

fn score(truth: DistributionSpec, got: DistributionSpec) -> Score {
    if truth.family != got.family {
        return Score::default();
    }
    let eps = (truth.param - got.param).abs();
    Score {
        family: true,
        exact: eps < 1e-6,
        eps01: eps <= 0.1 + 1e-9,
        eps02: eps <= 0.2 + 1e-9,
    }
}

/// Picks a family uniformly at random, then a grid parameter uniformly.
fn draw_truth(grid: &GridConfig, seed: u64) -> DistributionSpec {
    let mut r = rng_from_seed(seed);
    let family = Family::ALL[rng::below(&mut r, 4) as usize];
    let params = grid.params(family);
    let param = params[rng::below(&mut r, params.len() as u64) as usize];
    DistributionSpec { family, param }
}

/// For each sample count, runs `trials` draw-and-estimate rounds. Trial `t`
/// uses the same true distribution at every count, so rows are paired.
pub fn accuracy_study(
    sample_counts: &[usize],
    trials: usize,
    seed: u64,
    keyspace: KeySpace,
    grid: &GridConfig,
    exec: Exec,
) -> Result<Vec<AccuracyRow>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    // Trials fan out below; candidate tests inside each estimate stay serial.
    let estimator = Estimator::new(keyspace, *grid)?.with_exec(Exec::Sequential);
    let truths: Vec<DistributionSpec> = (0..trials)
        .map(|t| draw_truth(grid, derive_seed(seed, t as u64)))
        .collect();

    let mut rows = Vec::with_capacity(sample_counts.len());
    for (ci, &count) in sample_counts.iter().enumerate() {
        let scores: Vec<Result<Score>> = par::map_range(exec, trials, |t| {
            let truth = truths[t];
            let trial_seed = derive_seed(derive_seed(seed, t as u64), 1 + ci as u64);
            let mut r = rng_from_seed(trial_seed);
            let samples = KeySampler::new(truth, keyspace).sample_n(&mut r, count);
            let est = estimator.estimate(&samples, derive_seed(trial_seed, 7))?;
            Ok(score(truth, est.spec))
        });
        let scores: Vec<Score> = scores.into_iter().collect::<Result<_>>()?;
        let rate = |f: fn(&Score) -> bool| 100.0 * scores.iter().filter(|s| f(s)).count() as f64 / trials as f64;
        rows.push(AccuracyRow {
            sample_count: count,
            correct_family_pct: rate(|s| s.family),
            exact_param_pct: rate(|s| s.exact),
            eps_le_01_pct: rate(|s| s.eps01),
            eps_le_02_pct: rate(|s| s.eps02),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::keyspace_from_gb;

    #[test]
    fn single_trial_rows_are_binary() {
        let ks = keyspace_from_gb(3.0).unwrap();
        let rows = accuracy_study(&[100, 300], 1, 5, ks, &GridConfig::default(), Exec::Parallel).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            for v in [
                r.correct_family_pct,
                r.exact_param_pct,
                r.eps_le_01_pct,
                r.eps_le_02_pct,
            ] {
                assert!(v == 0.0 || v == 100.0);
            }
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let ks = keyspace_from_gb(3.0).unwrap();
        assert!(accuracy_study(&[100], 0, 5, ks, &GridConfig::default(), Exec::Sequential).is_err());
    }

    #[test]
    fn scoring_nests() {
        let t = DistributionSpec::zipf(1.0).unwrap();
        let s = score(t, DistributionSpec::zipf(1.2).unwrap());
        assert!(s.family && !s.exact && !s.eps01 && s.eps02);
        let s = score(t, DistributionSpec::exponential(1.0).unwrap());
        assert!(!s.family && !s.eps02);
        let u = score(DistributionSpec::uniform(), DistributionSpec::uniform());
        assert!(u.exact);
    }

    #[test]
    fn csv_layout() {
        let csv = AccuracyRow::to_csv(&[AccuracyRow {
            sample_count: 100,
            correct_family_pct: 97.0,
            exact_param_pct: 58.0,
            eps_le_01_pct: 75.0,
            eps_le_02_pct: 90.0,
        }]);
        assert_eq!(csv, format!("{ACCURACY_CSV_HEADER}\n100,97.0,58.0,75.0,90.0\n"));
    }
}
