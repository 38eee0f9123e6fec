//! Counter-based random number streams.
//!
//! Every replica draws from a ChaCha stream addressed by
//! `(master seed, stream id)`. Streams are pairwise distinct and do not
//! depend on scheduling order, so `reps = 2N` reproduces the first `N`
//! replicas of a `reps = N` run exactly.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for stream `stream` of master seed `master`.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Exponential variate with the given mean.
pub fn exp_mean(rng: &mut impl Rng, mean: f64) -> f64 {
    debug_assert!(mean > 0.0);
    let u: f64 = rng.random::<f64>();
    let u = if u <= 0.0 { f64::MIN_POSITIVE } else { u };
    -u.ln() * mean
}

/// Poisson count with the given mean.
///
/// Exact: splits large means in half until Knuth's product method applies.
pub fn poisson(rng: &mut impl Rng, mean: f64) -> u64 {
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        return 0;
    }
    if mean > 30.0 {
        let half = mean / 2.0;
        return poisson(rng, half) + poisson(rng, mean - half);
    }
    let limit = (-mean).exp();
    let mut count = 0u64;
    let mut prod: f64 = rng.random();
    while prod > limit {
        count += 1;
        prod *= rng.random::<f64>();
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: Vec<f64> = {
            let mut r = stream_rng(7, 0);
            (0..8).map(|_| r.random()).collect()
        };
        let a2: Vec<f64> = {
            let mut r = stream_rng(7, 0);
            (0..8).map(|_| r.random()).collect()
        };
        let b: Vec<f64> = {
            let mut r = stream_rng(7, 1);
            (0..8).map(|_| r.random()).collect()
        };
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn poisson_mean_and_variance() {
        let mut rng = stream_rng(11, 0);
        for &mean in &[0.3, 4.0, 75.0] {
            let n = 20000;
            let samples: Vec<f64> = (0..n).map(|_| poisson(&mut rng, mean) as f64).collect();
            let m = samples.iter().sum::<f64>() / n as f64;
            let v = samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            let se = (mean / n as f64).sqrt();
            assert!((m - mean).abs() < 5.0 * se, "mean {m} vs {mean}");
            assert!((v - mean).abs() < 0.1 * mean + 6.0 * se * mean.sqrt());
        }
    }

    #[test]
    fn exp_mean_matches() {
        let mut rng = stream_rng(13, 0);
        let n = 40000;
        let m = (0..n).map(|_| exp_mean(&mut rng, 2.5)).sum::<f64>() / n as f64;
        assert!((m - 2.5).abs() < 4.0 * 2.5 / (n as f64).sqrt());
    }
}
