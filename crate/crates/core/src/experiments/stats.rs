//! Estimates, pooling and the few hypothesis tests the studies need.

use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{param, Result};

/// A Monte Carlo aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub se: f64,
    pub samples: u64,
    pub censored: u64,
    /// True when censored samples entered the value as lower bounds.
    pub lower_bound: bool,
    pub fingerprint: u64,
}

impl Estimate {
    /// Sample mean and standard error of uncensored values.
    pub fn from_samples(name: &str, xs: &[f64], fingerprint: u64) -> Self {
        let (value, se) = mean_se(xs);
        Estimate {
            name: name.to_string(),
            value,
            se,
            samples: xs.len() as u64,
            censored: 0,
            lower_bound: false,
            fingerprint,
        }
    }

    /// Mean of values some of which are horizon-censored lower bounds.
    pub fn from_censored(name: &str, xs: &[f64], censored: u64, fingerprint: u64) -> Self {
        let mut e = Estimate::from_samples(name, xs, fingerprint);
        e.censored = censored;
        e.lower_bound = censored > 0;
        e
    }

    /// Frequency `hits / n` with the binomial standard error.
    pub fn proportion(name: &str, hits: u64, n: u64, fingerprint: u64) -> Self {
        let p = if n == 0 { f64::NAN } else { hits as f64 / n as f64 };
        Estimate {
            name: name.to_string(),
            value: p,
            se: if n == 0 { f64::NAN } else { (p * (1.0 - p) / n as f64).sqrt() },
            samples: n,
            censored: 0,
            lower_bound: false,
            fingerprint,
        }
    }
}

/// Pools estimates of one statistic as if all underlying samples were
/// concatenated. Input order does not affect the result.
pub fn aggregate(estimates: &[Estimate]) -> Result<Estimate> {
    let first = match estimates.first() {
        Some(e) => e,
        None => return param("nothing to aggregate"),
    };
    if estimates.iter().any(|e| e.name != first.name) {
        return param(format!("cannot pool different statistics with '{}'", first.name));
    }
    if estimates.iter().any(|e| e.lower_bound != first.lower_bound) {
        return param("refusing to pool censored lower bounds with uncensored values");
    }
    if estimates.len() == 1 {
        return Ok(first.clone());
    }
    let mut sorted: Vec<&Estimate> = estimates.iter().collect();
    sorted.sort_by(|a, b| {
        (a.value.to_bits(), a.se.to_bits(), a.samples).cmp(&(b.value.to_bits(), b.se.to_bits(), b.samples))
    });
    let n: u64 = sorted.iter().map(|e| e.samples).sum();
    if n == 0 {
        return param("pooled estimates hold no samples");
    }
    let nf = n as f64;
    let mean = sorted.iter().map(|e| e.samples as f64 * e.value).sum::<f64>() / nf;
    // within-group sums of squares recovered from se^2 = s^2 / n
    let ss: f64 = sorted
        .iter()
        .map(|e| {
            let k = e.samples as f64;
            let s2 = e.se * e.se * k;
            (k - 1.0).max(0.0) * s2 + k * (e.value - mean).powi(2)
        })
        .sum();
    let se = if n > 1 { (ss / (nf - 1.0) / nf).sqrt() } else { 0.0 };
    let mut fps: Vec<u64> = sorted.iter().map(|e| e.fingerprint).collect();
    fps.sort_unstable();
    fps.dedup();
    let fingerprint = if fps.len() == 1 {
        fps[0]
    } else {
        fps.iter().fold(FNV_OFFSET, |h, f| fnv1a_bytes(h, &f.to_le_bytes()))
    };
    Ok(Estimate {
        name: first.name.clone(),
        value: mean,
        se,
        samples: n,
        censored: sorted.iter().map(|e| e.censored).sum(),
        lower_bound: first.lower_bound,
        fingerprint,
    })
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn fnv1a_bytes(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// FNV-1a hash of a canonical configuration text.
pub fn fingerprint(text: &str) -> u64 {
    fnv1a_bytes(FNV_OFFSET, text.as_bytes())
}

/// Mean and standard error (`s / sqrt(n)`, unbiased `s`).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Outcome of one statistical or hard check.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub estimate: f64,
    pub reference: f64,
    pub se: f64,
    /// Allowed deviation actually used (e.g. `3 se`, or a relative band).
    pub tolerance: f64,
    pub passed: bool,
}

impl Verdict {
    /// `|estimate - reference| < z * se`.
    pub fn within_se(name: &str, estimate: f64, reference: f64, se: f64, z: f64) -> Self {
        let tolerance = z * se;
        Verdict {
            name: name.to_string(),
            estimate,
            reference,
            se,
            tolerance,
            passed: (estimate - reference).abs() < tolerance,
        }
    }

    /// `|estimate / reference - 1| < rel`.
    pub fn within_rel(name: &str, estimate: f64, reference: f64, se: f64, rel: f64) -> Self {
        Verdict {
            name: name.to_string(),
            estimate,
            reference,
            se,
            tolerance: rel * reference.abs(),
            passed: (estimate / reference - 1.0).abs() < rel,
        }
    }

    /// `estimate <= reference`, for hard bounds.
    pub fn at_most(name: &str, estimate: f64, reference: f64) -> Self {
        Verdict {
            name: name.to_string(),
            estimate,
            reference,
            se: 0.0,
            tolerance: 0.0,
            passed: estimate <= reference,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: estimate={:.6} reference={:.6} se={:.3e} tolerance={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.estimate,
            self.reference,
            self.se,
            self.tolerance
        )
    }
}

/// Kolmogorov distribution survival `P{K > x}`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Critical value of the one-sample KS statistic at level `alpha`, with
/// Stephens' finite-sample correction.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let rn = (n as f64).sqrt();
    c / (rn + 0.12 + 0.11 / rn)
}

/// `sup_x |F_n(x) - F(x)|` for a continuous `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(k, &x)| {
            let f = cdf(x);
            (f - k as f64 / n).abs().max(((k + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `sup_k |F_n(k) - F(k)|` for integer samples and an integer `cdf`.
pub fn ks_statistic_discrete(samples: &[u64], cdf: impl Fn(u64) -> f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable();
    let n = xs.len() as f64;
    let max = *xs.last().unwrap();
    let mut d: f64 = 0.0;
    let mut idx = 0usize;
    for k in 0..=max {
        while idx < xs.len() && xs[idx] <= k {
            idx += 1;
        }
        d = d.max((idx as f64 / n - cdf(k)).abs());
    }
    d
}

/// Chi-square goodness of fit of `observed` counts against `expected`;
/// returns `(statistic, p-value)`.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> Result<(f64, f64)> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return param("chi-square needs matching count vectors with at least two cells");
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).map_err(|e| crate::Error::Numerical(e.to_string()))?;
    Ok((stat, 1.0 - dist.cdf(stat)))
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_input_is_identity() {
        let e = Estimate::from_samples("x", &[1.0, 2.0, 4.0], 9);
        assert_eq!(aggregate(std::slice::from_ref(&e)).unwrap(), e);
    }

    #[test]
    fn equal_groups_pool_to_midpoint() {
        let a = Estimate::from_samples("x", &[1.0, 2.0, 3.0], 1);
        let b = Estimate::from_samples("x", &[5.0, 6.0, 7.0], 1);
        let p = aggregate(&[a, b]).unwrap();
        assert!((p.value - 4.0).abs() < 1e-12);
        let (_, se) = mean_se(&[1.0, 2.0, 3.0, 5.0, 6.0, 7.0]);
        assert!((p.se - se).abs() < 1e-12);
        assert_eq!(p.samples, 6);
    }

    #[test]
    fn pooled_se_shrinks_like_root_n() {
        let xs: Vec<f64> = (0..400).map(|k| ((k * 7919) % 101) as f64).collect();
        let groups: Vec<Estimate> = xs.chunks(100).map(|c| Estimate::from_samples("x", c, 0)).collect();
        let one = &groups[0];
        let all = aggregate(&groups).unwrap();
        let ratio = one.se / all.se;
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn mixing_censored_is_refused() {
        let a = Estimate::from_samples("x", &[1.0, 2.0], 0);
        let b = Estimate::from_censored("x", &[1.0, 9.0], 1, 0);
        assert!(aggregate(&[a.clone(), b]).is_err());
        let c = Estimate::from_samples("y", &[1.0], 0);
        assert!(aggregate(&[a, c]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn ks_critical_values() {
        assert!((ks_critical(1_000_000, 0.01) * 1000.0 - 1.6276).abs() < 1e-3);
        assert!((ks_critical(1_000_000, 0.05) * 1000.0 - 1.3581).abs() < 1e-3);
    }

    #[test]
    fn discrete_ks_on_exact_sample() {
        // empirical distribution equal to the cdf at every integer
        let xs = [0u64, 1, 1, 2];
        let cdf = |k: u64| [0.25, 0.75, 1.0][k.min(2) as usize];
        assert_eq!(ks_statistic_discrete(&xs, cdf), 0.0);
    }

    #[test]
    fn chi_square_uniform_counts() {
        let (stat, pv) = chi_square(&[10, 10, 10, 10], &[10.0; 4]).unwrap();
        assert_eq!(stat, 0.0);
        assert!((pv - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn aggregate_is_order_independent(xs in proptest::collection::vec(-1e3f64..1e3, 2..40), cut in 1usize..39) {
            let cut = cut.min(xs.len() - 1);
            let a = Estimate::from_samples("x", &xs[..cut], 3);
            let b = Estimate::from_samples("x", &xs[cut..], 3);
            let ab = aggregate(&[a.clone(), b.clone()]).unwrap();
            let ba = aggregate(&[b, a]).unwrap();
            prop_assert_eq!(&ab, &ba);
            let (m, _) = mean_se(&xs);
            prop_assert!((ab.value - m).abs() <= 1e-9 * (1.0 + m.abs()));
            prop_assert!(ab.se >= 0.0);
        }
    }
}
