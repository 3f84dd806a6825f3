//! Small statistics helpers for replicate comparisons.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Two-sample t-test without the equal-variance assumption.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::param("samples", "each sample needs at least two values"));
    }
    let (va, vb) = (sample_variance(a) / a.len() as f64, sample_variance(b) / b.len() as f64);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if se2 == 0.0 {
        let p_value = if diff == 0.0 { 1.0 } else { 0.0 };
        return Ok(WelchTest {
            t: if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY },
            df: (a.len() + b.len() - 2) as f64,
            p_value,
        });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::param("df", e.to_string()))?;
    Ok(WelchTest {
        t,
        df,
        p_value: 2.0 * dist.sf(t.abs()),
    })
}

/// Central interval holding at least `level` of Binomial(n, p), as counts.
pub fn binomial_interval(n: u64, p: f64, level: f64) -> Result<(u64, u64)> {
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::param("level", format!("must lie in (0, 1), got {level}")));
    }
    let dist = Binomial::new(p, n).map_err(|e| Error::param("p", e.to_string()))?;
    let tail = (1.0 - level) / 2.0;
    let quantile = |target: f64| -> u64 {
        let (mut lo, mut hi) = (0u64, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if dist.cdf(mid) >= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };
    Ok((quantile(tail), quantile(1.0 - tail)))
}

/// Half the L1 distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
