//! Quantized R-transform and the Markov–Krein map.

use num_complex::Complex64;

use super::field::AnalyticField;
use super::inversion::stieltjes_inverse;
use super::measure::MeasureRep;
use crate::error::{Error, Result};

/// `R(z) = m^{-1}(-z) - 1 / (1 - e^{-z})`.
pub fn quantized_r<F: AnalyticField + ?Sized>(m: &F, z: Complex64) -> Result<Complex64> {
    let inv = stieltjes_inverse(m, -z)?;
    Ok(inv - (1.0 - (-z).exp()).inv())
}

/// `|R_t(z) - R_0(z) - t e^z|` for transforms `m_t`, `m_0` of `mu_t`, `mu_0`.
pub fn additivity_residual<F, G>(m0: &F, mt: &G, t: f64, z: Complex64) -> Result<f64>
where
    F: AnalyticField + ?Sized,
    G: AnalyticField + ?Sized,
{
    Ok((quantized_r(mt, z)? - quantized_r(m0, z)? - t * z.exp()).norm())
}

/// Relative tolerance for an atom gap to count as exactly `1/m`.
const GAP_SNAP: f64 = 1e-9;

/// Perelomov–Popov approximation of `Q(mu)` on `m` quantile atoms.
///
/// Atoms `y_1 > ... > y_m` solve `mu([y_i, inf)) = (i - 1/2)/m`; atom `i`
/// gets weight `(1/m) prod_{j != i} (y_i - y_j + 1/m) / (y_i - y_j)`.
/// Gaps equal to `1/m` up to rounding produce exact zero weights.
pub fn markov_krein_q(mu: &MeasureRep, m: usize) -> Result<MeasureRep> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least two atoms, got {m}")));
    }
    mu.validate()?;
    let y = mu.quantiles(m);
    perelomov_popov(&y)
}

/// Weights for given atoms `y_1 > ... > y_m` at scale `1/m`.
pub fn perelomov_popov(y: &[f64]) -> Result<MeasureRep> {
    let m = y.len();
    let h = 1.0 / m as f64;
    let mut tight = vec![false; m];
    for i in 1..m {
        let gap = y[i - 1] - y[i];
        if gap < h * (1.0 - GAP_SNAP) {
            return Err(Error::DensityBound { gap, min_gap: h });
        }
        // Atom i sits exactly 1/m below atom i-1: its factor j = i-1 vanishes.
        tight[i] = gap <= h * (1.0 + GAP_SNAP);
    }
    let weights: Vec<f64> = (0..m)
        .map(|i| {
            if tight[i] {
                return 0.0;
            }
            // Accumulate in log space; the product can span many decades.
            let mut log = 0.0;
            for j in 0..m {
                if j != i {
                    let d = y[i] - y[j];
                    log += ((d + h) / d).ln();
                }
            }
            h * log.exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("Perelomov–Popov weights sum to {total}")));
    }
    MeasureRep::atoms(y.to_vec(), weights)
}
