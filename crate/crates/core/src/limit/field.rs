//! Complex-analytic fields evaluated together with their first three
//! derivatives.

use num_complex::Complex64;

use crate::error::Result;

/// Value and derivatives of an analytic function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
    pub d3: Complex64,
}

impl Jet {
    pub fn conj(self) -> Self {
        Self {
            value: self.value.conj(),
            d1: self.d1.conj(),
            d2: self.d2.conj(),
            d3: self.d3.conj(),
        }
    }

    /// Jet of `exp(-f)`.
    pub fn exp_neg(self) -> Self {
        let e = (-self.value).exp();
        let (a1, a2, a3) = (self.d1, self.d2, self.d3);
        Self {
            value: e,
            d1: -a1 * e,
            d2: (a1 * a1 - a2) * e,
            d3: (-a3 + 3.0 * a1 * a2 - a1 * a1 * a1) * e,
        }
    }
}

/// A function analytic off the real axis with conjugate symmetry.
pub trait AnalyticField: Send + Sync {
    fn jet(&self, z: Complex64) -> Result<Jet>;

    fn value(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.jet(z)?.value)
    }
}

impl<F: AnalyticField + ?Sized> AnalyticField for &F {
    fn jet(&self, z: Complex64) -> Result<Jet> {
        (**self).jet(z)
    }
    fn value(&self, z: Complex64) -> Result<Complex64> {
        (**self).value(z)
    }
}

impl<F: AnalyticField + ?Sized> AnalyticField for Box<F> {
    fn jet(&self, z: Complex64) -> Result<Jet> {
        (**self).jet(z)
    }
    fn value(&self, z: Complex64) -> Result<Complex64> {
        (**self).value(z)
    }
}

impl<F: AnalyticField + ?Sized> AnalyticField for std::sync::Arc<F> {
    fn jet(&self, z: Complex64) -> Result<Jet> {
        (**self).jet(z)
    }
    fn value(&self, z: Complex64) -> Result<Complex64> {
        (**self).value(z)
    }
}

/// `1 - exp(-m(z))`, the Stieltjes transform of the Markov–Krein image of
/// the measure whose transform is `m`.
#[derive(Debug, Clone)]
pub struct MarkovKreinTransform<F> {
    pub inner: F,
}

impl<F: AnalyticField> AnalyticField for MarkovKreinTransform<F> {
    fn jet(&self, z: Complex64) -> Result<Jet> {
        let e = self.inner.jet(z)?.exp_neg();
        Ok(Jet {
            value: 1.0 - e.value,
            d1: -e.d1,
            d2: -e.d2,
            d3: -e.d3,
        })
    }
}

/// Closure-backed field, mostly for closed forms in tests and drivers.
pub struct FnField<F>(pub F);

impl<F> AnalyticField for FnField<F>
where
    F: Fn(Complex64) -> Result<Jet> + Send + Sync,
{
    fn jet(&self, z: Complex64) -> Result<Jet> {
        (self.0)(z)
    }
}

/// Largest relative mismatch between reported derivatives and central
/// differences of the next-lower derivative at `z`.
pub fn derivative_mismatch<F: AnalyticField + ?Sized>(field: &F, z: Complex64, h: f64) -> Result<f64> {
    let j = field.jet(z)?;
    let mut worst: f64 = 0.0;
    for dir in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
        let p = field.jet(z + dir)?;
        let m = field.jet(z - dir)?;
        let pairs = [
            ((p.value - m.value) / (2.0 * dir), j.d1),
            ((p.d1 - m.d1) / (2.0 * dir), j.d2),
            ((p.d2 - m.d2) / (2.0 * dir), j.d3),
        ];
        for (fd, exact) in pairs {
            worst = worst.max((fd - exact).norm() / exact.norm().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_neg_chain_rule() {
        // f(z) = z^2 at z0: exp(-f) has derivatives checked by differences.
        let field = FnField(|z: Complex64| {
            Ok(Jet {
                value: z * z,
                d1: 2.0 * z,
                d2: Complex64::new(2.0, 0.0),
                d3: Complex64::new(0.0, 0.0),
            })
        });
        let mk = MarkovKreinTransform { inner: field };
        let z = Complex64::new(0.3, 0.4);
        assert!(derivative_mismatch(&mk, z, 1e-4).unwrap() < 1e-6);
        assert!((mk.value(z).unwrap() - (1.0 - (-z * z).exp())).norm() < 1e-15);
    }
}
