//! Batch rank-based change-point scan (Mann–Whitney / Pettitt form), applied
//! independently to each quantitative variable.
//!
//! For a series `x_1..x_n` and each candidate split `k ∈ 1..n−1`,
//!
//! ```text
//! U_k = Σ_{i≤k} Σ_{j>k} sgn(x_i − x_j)
//! ```
//!
//! computed in `O(n²)` through `U_k = U_{k−1} + Σ_{j≠k} sgn(x_k − x_j)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibrate::empirical_quantile;
use crate::error::{Error, Result};
use crate::model::Observation;
use crate::sample::rng_from_seed;

pub const MIN_SERIES_LEN: usize = 4;

/// Significance level used when a scan is built without an explicit threshold.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankScan {
    /// `u[k − 1] = U_k` for `k = 1..n−1`.
    pub u: Vec<f64>,
    pub threshold: f64,
    /// Split `k` (1-based) where `|U_k|` is largest; first one on ties.
    pub argmax_k: usize,
    pub detected: bool,
}

impl RankScan {
    pub fn max_abs(&self) -> f64 {
        self.u[self.argmax_k - 1].abs()
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.detected = self.max_abs() > threshold;
        self
    }
}

fn sgn(a: f64, b: f64) -> i64 {
    match a.partial_cmp(&b) {
        Some(std::cmp::Ordering::Greater) => 1,
        Some(std::cmp::Ordering::Less) => -1,
        _ => 0,
    }
}

fn scan_values(series: &[f64]) -> Vec<i64> {
    let n = series.len();
    let mut u = Vec::with_capacity(n - 1);
    let mut acc = 0i64;
    for k in 0..n - 1 {
        acc += series.iter().map(|&xj| sgn(series[k], xj)).sum::<i64>();
        u.push(acc);
    }
    u
}

/// Scan statistic with the asymptotic 5% threshold attached.
pub fn wilcoxon_scan(series: &[f64]) -> Result<RankScan> {
    if series.len() < MIN_SERIES_LEN {
        return Err(Error::TooShort {
            min: MIN_SERIES_LEN,
            got: series.len(),
        });
    }
    let u: Vec<f64> = scan_values(series).into_iter().map(|v| v as f64).collect();
    let mut argmax_k = 1;
    for (k, v) in u.iter().enumerate() {
        if v.abs() > u[argmax_k - 1].abs() {
            argmax_k = k + 1;
        }
    }
    let scan = RankScan {
        u,
        threshold: f64::INFINITY,
        argmax_k,
        detected: false,
    };
    let threshold = asymptotic_threshold(series.len(), DEFAULT_ALPHA);
    Ok(scan.with_threshold(threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum ThresholdMethod {
    Asymptotic,
    MonteCarlo { n_runs: usize, seed: u64 },
}

/// Pettitt's approximation: `P(max|U| ≥ K) ≈ 2 exp(−6K² / (n³ + n²))`.
pub fn asymptotic_threshold(n: usize, alpha: f64) -> f64 {
    let n = n as f64;
    (-(alpha / 2.0).ln() * (n.powi(3) + n.powi(2)) / 6.0).sqrt()
}

/// `max_k |U_k|` for each of `n_runs` i.i.d. standard-normal series of length `n`.
pub fn null_scan_maxima<R: Rng + ?Sized>(n: usize, n_runs: usize, rng: &mut R) -> Vec<f64> {
    let mut series = vec![0.0; n];
    (0..n_runs)
        .map(|_| {
            for x in series.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            scan_values(&series)
                .into_iter()
                .map(|v| v.unsigned_abs() as f64)
                .fold(0.0, f64::max)
        })
        .collect()
}

pub fn scan_threshold(n: usize, alpha: f64, method: ThresholdMethod) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n < MIN_SERIES_LEN {
        return Err(Error::TooShort {
            min: MIN_SERIES_LEN,
            got: n,
        });
    }
    match method {
        ThresholdMethod::Asymptotic => Ok(asymptotic_threshold(n, alpha)),
        ThresholdMethod::MonteCarlo { n_runs, seed } => {
            if n_runs == 0 {
                return Err(Error::InvalidConfig("Monte Carlo threshold needs runs".into()));
            }
            let maxima = null_scan_maxima(n, n_runs, &mut rng_from_seed(seed));
            Ok(empirical_quantile(&maxima, 1.0 - alpha))
        }
    }
}

/// One rank scan per quantitative variable, all sharing one threshold.
pub fn baseline_report(dataset: &[Observation], alpha: f64, method: ThresholdMethod) -> Result<Vec<RankScan>> {
    let first = dataset.first().ok_or(Error::TooShort {
        min: MIN_SERIES_LEN,
        got: 0,
    })?;
    let n_quant = first.x_quant().len();
    let threshold = scan_threshold(dataset.len(), alpha, method)?;
    (0..n_quant)
        .map(|u| {
            let series = dataset
                .iter()
                .map(|obs| {
                    obs.x_quant().get(u).copied().ok_or(Error::DimensionMismatch {
                        what: format!("observation at t={}", obs.t()),
                        expected: n_quant,
                        got: obs.x_quant().len(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(wilcoxon_scan(&series)?.with_threshold(threshold))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_series_is_flat() {
        let scan = wilcoxon_scan(&[2.0; 10]).unwrap();
        assert!(scan.u.iter().all(|&v| v == 0.0));
        assert!(!scan.detected);
    }

    #[test]
    fn increasing_four() {
        let scan = wilcoxon_scan(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        // k = 2: pairs (1,3) (1,4) (2,3) (2,4), all negative.
        assert_eq!(scan.u[1], -4.0);
        assert_eq!(scan.u, vec![-3.0, -4.0, -3.0]);
        assert_eq!(scan.argmax_k, 2);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            wilcoxon_scan(&[1.0, 2.0, 3.0]),
            Err(Error::TooShort { min: 4, got: 3 })
        ));
        assert!(baseline_report(&[], 0.05, ThresholdMethod::Asymptotic).is_err());
    }

    #[test]
    fn asymptotic_value_at_hundred() {
        let k = scan_threshold(100, 0.05, ThresholdMethod::Asymptotic).unwrap();
        let direct = (-(0.025_f64).ln() * (1e6 + 1e4) / 6.0).sqrt();
        assert_eq!(k, direct);
        assert!((k - 788.0).abs() < 0.1);
    }

    #[test]
    fn alpha_bounds() {
        assert!(scan_threshold(100, 0.0, ThresholdMethod::Asymptotic).is_err());
        assert!(scan_threshold(100, 1.0, ThresholdMethod::Asymptotic).is_err());
    }

    #[test]
    fn loose_alpha_is_near_null_median() {
        let maxima = null_scan_maxima(100, 2000, &mut rng_from_seed(11));
        let median = empirical_quantile(&maxima, 0.5);
        let loose = scan_threshold(
            100,
            0.5,
            ThresholdMethod::MonteCarlo {
                n_runs: 2000,
                seed: 11,
            },
        )
        .unwrap();
        assert_eq!(loose, median);
        let nearly_one = scan_threshold(
            100,
            0.999,
            ThresholdMethod::MonteCarlo {
                n_runs: 2000,
                seed: 11,
            },
        )
        .unwrap();
        assert!(nearly_one <= median);
    }

    fn brute_force(series: &[f64]) -> Vec<f64> {
        let n = series.len();
        (1..n)
            .map(|k| {
                let mut s = 0i64;
                for i in 0..k {
                    for j in k..n {
                        s += sgn(series[i], series[j]);
                    }
                }
                s as f64
            })
            .collect()
    }

    proptest! {
        #[test]
        fn recursion_matches_double_sum(series in prop::collection::vec(-5i32..5, 4..40)) {
            let xs: Vec<f64> = series.iter().map(|&v| f64::from(v)).collect();
            prop_assert_eq!(wilcoxon_scan(&xs).unwrap().u, brute_force(&xs));
        }

        #[test]
        fn reversal_negates_mirrored(xs in prop::collection::vec(-10.0f64..10.0, 4..60)) {
            let n = xs.len();
            let forward = wilcoxon_scan(&xs).unwrap();
            let rev: Vec<f64> = xs.iter().rev().copied().collect();
            let backward = wilcoxon_scan(&rev).unwrap();
            for k in 1..n {
                prop_assert_eq!(backward.u[k - 1], -forward.u[n - k - 1]);
            }
            prop_assert_eq!(forward.max_abs(), backward.max_abs());
        }

        #[test]
        fn monotone_transform_invariance(xs in prop::collection::vec(-3.0f64..3.0, 4..60)) {
            let transformed: Vec<f64> = xs.iter().map(|&x| x.exp() * 2.0 + x.powi(3)).collect();
            prop_assert_eq!(wilcoxon_scan(&xs).unwrap().u, wilcoxon_scan(&transformed).unwrap().u);
        }

        #[test]
        fn range_bound(xs in prop::collection::vec(-10.0f64..10.0, 4..60)) {
            let n = xs.len();
            let scan = wilcoxon_scan(&xs).unwrap();
            for k in 1..n {
                prop_assert!(scan.u[k - 1].abs() <= (k * (n - k)) as f64);
            }
        }
    }
}
