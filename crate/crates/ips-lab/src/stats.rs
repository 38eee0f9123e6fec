//! Small statistics toolkit: estimates with standard errors, z-scores,
//! bootstrap confidence intervals, chi-square and total-variation helpers.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Point estimate with a standard error. `se == 0` marks exact values.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, se: 0.0 }
    }

    /// z-score against an independent estimate (pooled standard error).
    pub fn z_against(&self, other: &Estimate) -> f64 {
        let pooled = (self.se * self.se + other.se * other.se).sqrt();
        if pooled == 0.0 {
            if self.value == other.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - other.value) / pooled
        }
    }

    /// z-score against a known constant.
    pub fn z_against_const(&self, target: f64) -> f64 {
        if self.se == 0.0 {
            if self.value == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - target) / self.se
        }
    }
}

/// Sample mean with standard error of the mean.
pub fn mean_se(samples: &[f64]) -> Estimate {
    let n = samples.len();
    assert!(n > 1, "need at least two samples");
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    Estimate {
        value: mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Mean and SE of a correlated series via non-overlapping batch means.
pub fn batch_means(series: &[f64], nbatches: usize) -> Estimate {
    assert!(nbatches >= 2 && series.len() >= 2 * nbatches);
    let blen = series.len() / nbatches;
    let batches: Vec<f64> = (0..nbatches)
        .map(|b| series[b * blen..(b + 1) * blen].iter().sum::<f64>() / blen as f64)
        .collect();
    mean_se(&batches)
}

/// Self-normalized ratio estimator `E[num]/E[den]` with block-based SE.
pub fn ratio_estimate(num: &[f64], den: &[f64], nblocks: usize) -> Estimate {
    assert_eq!(num.len(), den.len());
    let n = num.len();
    assert!(nblocks >= 2 && n >= nblocks);
    let total_num: f64 = num.iter().sum();
    let total_den: f64 = den.iter().sum();
    assert!(total_den > 0.0, "ratio estimator needs positive denominator");
    let value = total_num / total_den;
    // jackknife over blocks
    let blen = n / nblocks;
    let mut jack = Vec::with_capacity(nblocks);
    for b in 0..nblocks {
        let lo = b * blen;
        let hi = if b == nblocks - 1 { n } else { lo + blen };
        let bn: f64 = num[lo..hi].iter().sum();
        let bd: f64 = den[lo..hi].iter().sum();
        if total_den - bd > 0.0 {
            jack.push((total_num - bn) / (total_den - bd));
        }
    }
    let m = jack.len() as f64;
    let jmean = jack.iter().sum::<f64>() / m;
    let var = (m - 1.0) / m * jack.iter().map(|x| (x - jmean) * (x - jmean)).sum::<f64>();
    Estimate {
        value,
        se: var.sqrt(),
    }
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Percentile bootstrap interval for a statistic of replica rows.
///
/// `stat` maps a multiset of replica indices (with repetition) to the
/// statistic value.
pub fn bootstrap_ci(
    nreps: usize,
    resamples: usize,
    level: f64,
    rng: &mut impl Rng,
    stat: impl Fn(&[usize]) -> Option<f64>,
) -> (f64, f64) {
    let mut vals = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; nreps];
    while vals.len() < resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..nreps);
        }
        if let Some(v) = stat(&idx) {
            vals.push(v);
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = ((1.0 - level) / 2.0 * resamples as f64) as usize;
    let hi = (((1.0 + level) / 2.0) * resamples as f64) as usize;
    (vals[lo.min(resamples - 1)], vals[hi.min(resamples - 1)])
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities, with its critical value at the given significance level.
pub fn chi_square_test(observed: &[u64], expected_probs: &[f64], alpha: f64) -> (f64, f64) {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = p * total as f64;
        if e > 1e-12 {
            stat += (o as f64 - e) * (o as f64 - e) / e;
            dof += 1;
        }
    }
    assert!(dof >= 2, "chi-square needs at least two cells");
    let crit = ChiSquared::new((dof - 1) as f64)
        .unwrap()
        .inverse_cdf(1.0 - alpha);
    (stat, crit)
}

/// Total-variation distance between two empirical distributions given as
/// count histograms over the same bins.
pub fn tv_distance(h1: &[u64], h2: &[u64]) -> f64 {
    assert_eq!(h1.len(), h2.len());
    let n1: f64 = h1.iter().sum::<u64>() as f64;
    let n2: f64 = h2.iter().sum::<u64>() as f64;
    assert!(n1 > 0.0 && n2 > 0.0);
    0.5 * h1
        .iter()
        .zip(h2)
        .map(|(&a, &b)| (a as f64 / n1 - b as f64 / n2).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngutil::stream_rng;

    #[test]
    fn mean_se_of_known_sample() {
        let e = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.value - 2.5).abs() < 1e-12);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn slope_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, b) = ls_slope(&x, &y);
        assert!((s - 2.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_estimator_unbiased_on_constant() {
        let num = vec![2.0; 100];
        let den = vec![4.0; 100];
        let e = ratio_estimate(&num, &den, 10);
        assert!((e.value - 0.5).abs() < 1e-12);
        assert!(e.se < 1e-12);
    }

    #[test]
    fn chi_square_accepts_uniform() {
        let mut rng = stream_rng(5, 0);
        let mut counts = [0u64; 8];
        for _ in 0..8000 {
            counts[rng.random_range(0..8)] += 1;
        }
        let probs = [1.0 / 8.0; 8];
        let (stat, crit) = chi_square_test(&counts, &probs, 0.01);
        assert!(stat < crit, "stat {stat} crit {crit}");
    }

    #[test]
    fn tv_distance_extremes() {
        assert!(tv_distance(&[10, 0], &[0, 10]) > 0.999);
        assert!(tv_distance(&[10, 10], &[20, 20]) < 1e-12);
    }
}
