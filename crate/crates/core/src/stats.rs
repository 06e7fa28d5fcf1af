//! Sample statistics for the Monte Carlo harness.

use num_complex::Complex64;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Complex sample mean; the error is `sqrt(se_re^2 + se_im^2)`.
pub fn complex_mean_se(zs: &[Complex64]) -> (Complex64, f64) {
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    let (mr, sr) = mean_se(&re);
    let (mi, si) = mean_se(&im);
    (Complex64::new(mr, mi), sr.hypot(si))
}

/// Plug-in covariance `mean(a b) - mean(a) mean(b)` with its jackknife
/// standard error (leave-one-out, `O(M)` via running sums).
pub fn covariance_jackknife(a: &[Complex64], b: &[Complex64]) -> (Complex64, f64) {
    assert_eq!(a.len(), b.len());
    let m = a.len() as f64;
    let sa: Complex64 = a.iter().sum();
    let sb: Complex64 = b.iter().sum();
    let sab: Complex64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let full = sab / m - sa * sb / (m * m);
    let loo: Vec<Complex64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let k = m - 1.0;
            (sab - x * y) / k - (sa - x) * (sb - y) / (k * k)
        })
        .collect();
    let bar: Complex64 = loo.iter().sum::<Complex64>() / m;
    let ss: f64 = loo.iter().map(|c| (c - bar).norm_sqr()).sum();
    (full, ((m - 1.0) / m * ss).sqrt())
}

/// Hermitian sample covariance matrix of vector-valued samples.
pub fn hermitian_covariance(samples: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let m = samples.len() as f64;
    let k = samples.first().map_or(0, Vec::len);
    let mean: Vec<Complex64> = (0..k).map(|p| samples.iter().map(|s| s[p]).sum::<Complex64>() / m).collect();
    let mut cov = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for s in samples {
        for p in 0..k {
            for q in 0..k {
                cov[p][q] += (s[p] - mean[p]) * (s[q] - mean[q]).conj();
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= m - 1.0);
    cov
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Jarque–Bera normality test.
pub fn jarque_bera(xs: &[f64]) -> TestOutcome {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let moment = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / m;
    let m2 = moment(2);
    let skew = moment(3) / m2.powf(1.5);
    let kurt = moment(4) / (m2 * m2);
    let statistic = m / 6.0 * (skew * skew + 0.25 * (kurt - 3.0).powi(2));
    TestOutcome { statistic, dof: 2, p_value: chi_square_sf(statistic, 2) }
}

fn chi_square_sf(x: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).map(|d| 1.0 - d.cdf(x)).unwrap_or(f64::NAN)
}

/// Pearson goodness of fit of `observed` counts to `probs` out of `total`.
///
/// Mass missing from `probs` (and unmatched counts) forms a final
/// category. Adjacent categories are pooled, left to right, until each
/// expected count is at least 5.
pub fn chi_square_gof(observed: &[f64], probs: &[f64], total: f64) -> Result<TestOutcome> {
    if observed.len() != probs.len() {
        return Err(Error::InvalidArgument("observed and probs differ in length".into()));
    }
    let mut obs = observed.to_vec();
    let mut exp: Vec<f64> = probs.iter().map(|p| p * total).collect();
    let rest_obs = total - obs.iter().sum::<f64>();
    let rest_exp = total - exp.iter().sum::<f64>();
    if rest_exp > 0.0 || rest_obs > 0.0 {
        obs.push(rest_obs.max(0.0));
        exp.push(rest_exp.max(0.0));
    }
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (oi, ei) in obs.iter().zip(&exp) {
        o += oi;
        e += ei;
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    if bins.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two categories after pooling".into()));
    }
    let statistic = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    Ok(TestOutcome { statistic, dof, p_value: chi_square_sf(statistic, dof) })
}
