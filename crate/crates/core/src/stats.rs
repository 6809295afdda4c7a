//! Binomial intervals and a trend test for rate sequences.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Wilson score interval for `successes` out of `trials` at the given
/// two-sided confidence level.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::invalid(format!(
            "need 0 <= successes <= trials and trials > 0, got {successes}/{trials}"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid("confidence must lie in (0, 1)"));
    }
    let z = standard_normal().inverse_cdf(0.5 + confidence / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // exact endpoints at the extremes, where round-off could exclude p
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok((lo.min(p), hi.max(p)))
}

/// Mann–Kendall trend statistic with the normal approximation and the usual
/// continuity and tie corrections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannKendall {
    pub s: i64,
    pub variance: f64,
    pub z: f64,
    /// One-sided p-value against a decreasing trend.
    pub p_decreasing: f64,
    /// One-sided p-value against an increasing trend.
    pub p_increasing: f64,
}

impl MannKendall {
    pub fn decreasing_at(&self, level: f64) -> bool {
        self.p_decreasing < level
    }
}

pub fn mann_kendall(values: &[f64]) -> Result<MannKendall> {
    if values.len() < 3 {
        return Err(Error::invalid("trend test needs at least 3 values"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("trend test values must not be NaN"));
    }
    let n = values.len();
    let mut s = 0i64;
    for a in 0..n {
        for b in a + 1..n {
            s += match values[b].partial_cmp(&values[a]).expect("no NaN") {
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
            };
        }
    }
    let group_term = |t: f64| t * (t - 1.0) * (2.0 * t + 5.0);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let ties: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|g| group_term(g.len() as f64))
        .sum();
    let variance = (group_term(n as f64) - ties) / 18.0;
    let z = if variance <= 0.0 || s == 0 {
        0.0
    } else {
        (s - s.signum()) as f64 / variance.sqrt()
    };
    let phi = standard_normal().cdf(z);
    Ok(MannKendall {
        s,
        variance,
        z,
        p_decreasing: phi,
        p_increasing: 1.0 - phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_reference_values() {
        // 10 of 100 at 95%: closed form evaluated independently
        let (lo, hi) = wilson_interval(10, 100, 0.95).unwrap();
        assert_relative_eq!(lo, 0.0552291370606751, max_relative = 1e-9);
        assert_relative_eq!(hi, 0.17436566150491345, max_relative = 1e-9);
        assert_eq!(wilson_interval(0, 20, 0.95).unwrap().0, 0.0);
        assert_eq!(wilson_interval(20, 20, 0.95).unwrap().1, 1.0);
        let (lo, hi) = wilson_interval(1, 1, 0.95).unwrap();
        assert!(lo > 0.0 && hi == 1.0);
        assert!(wilson_interval(3, 2, 0.95).is_err());
        assert!(wilson_interval(0, 0, 0.95).is_err());
    }

    #[test]
    fn mann_kendall_five_points() {
        let strict = mann_kendall(&[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(strict.s, -10);
        assert_relative_eq!(strict.variance, 50.0 / 3.0);
        assert!(strict.decreasing_at(0.05));

        // S = -8 is the weakest significant result for five distinct values
        let eight = mann_kendall(&[4.0, 5.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(eight.s, -8);
        assert!(eight.decreasing_at(0.05));
        let six = mann_kendall(&[3.0, 5.0, 4.0, 2.0, 1.0]).unwrap();
        assert_eq!(six.s, -6);
        assert!(!six.decreasing_at(0.05));

        let up = mann_kendall(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(up.p_increasing < 0.05 && !up.decreasing_at(0.05));
    }

    #[test]
    fn mann_kendall_ties() {
        let flat = mann_kendall(&[0.0; 5]).unwrap();
        assert_eq!(flat.s, 0);
        assert_eq!(flat.variance, 0.0);
        assert_relative_eq!(flat.p_decreasing, 0.5);
        let tied = mann_kendall(&[0.3, 0.2, 0.2, 0.0, 0.0]).unwrap();
        assert_eq!(tied.s, -8);
        assert!(tied.variance < 50.0 / 3.0);
        assert!(mann_kendall(&[1.0, 2.0]).is_err());
    }
}
