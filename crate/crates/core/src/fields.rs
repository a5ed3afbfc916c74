//! External fields `φ = Re Φ` with their complex derivative `Φ'`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// A fixed logarithmic charge `alpha * log(1/|z - at|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Charge {
    pub at: C64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum ExternalField {
    #[default]
    Zero,
    /// `φ(z) = Σ α_k log(1/|z - a_k|)`, `Φ'(z) = -Σ α_k/(z - a_k)`.
    LogCharges { charges: Vec<Charge> },
    /// `φ = Re p`, coefficients in ascending order.
    Polynomial { coeffs: Vec<C64> },
}

/// Points of the singular set `e`; the point at infinity is flagged separately.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSet {
    pub finite: Vec<C64>,
    pub infinity: bool,
}

const SINGULAR_TOL: f64 = 1e-12;

impl ExternalField {
    pub fn log_charges(charges: impl IntoIterator<Item = (C64, f64)>) -> Result<Self> {
        let charges: Vec<Charge> = charges.into_iter().map(|(at, alpha)| Charge { at, alpha }).collect();
        for (i, a) in charges.iter().enumerate() {
            for b in &charges[i + 1..] {
                if (a.at - b.at).norm() <= SINGULAR_TOL {
                    return Err(Error::Invalid(format!("charge locations must be distinct, {} repeated", a.at)));
                }
            }
        }
        Ok(ExternalField::LogCharges { charges })
    }

    pub fn polynomial(coeffs: Vec<C64>) -> Result<Self> {
        let field = ExternalField::Polynomial { coeffs };
        field.validate()?;
        Ok(field)
    }

    /// `φ = Re(c z^2)`.
    pub fn quadratic(c: C64) -> Self {
        ExternalField::Polynomial { coeffs: vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), c] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExternalField::Zero => Ok(()),
            ExternalField::LogCharges { charges } => {
                Self::log_charges(charges.iter().map(|c| (c.at, c.alpha))).map(|_| ())
            }
            ExternalField::Polynomial { coeffs } => {
                let deg = coeffs.iter().rposition(|c| c.norm() > 0.0).unwrap_or(0);
                if deg < 2 {
                    Err(Error::Invalid(format!("polynomial field needs degree >= 2, got {deg}")))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ExternalField::Zero => true,
            ExternalField::LogCharges { charges } => charges.iter().all(|c| c.alpha == 0.0),
            ExternalField::Polynomial { coeffs } => coeffs.iter().all(|c| c.norm() == 0.0),
        }
    }

    pub fn singular_set(&self) -> SingularSet {
        match self {
            ExternalField::Zero => SingularSet { finite: vec![], infinity: false },
            ExternalField::LogCharges { charges } => {
                SingularSet { finite: charges.iter().map(|c| c.at).collect(), infinity: false }
            }
            ExternalField::Polynomial { .. } => SingularSet { finite: vec![], infinity: true },
        }
    }

    pub fn is_singular(&self, z: C64) -> bool {
        !z.is_finite() || self.singular_set().finite.iter().any(|a| (z - a).norm() <= SINGULAR_TOL)
    }

    /// The monic polynomial `Π (z - a_k)` over the charge locations.
    pub fn charge_polynomial(&self) -> Vec<C64> {
        let roots = self.singular_set().finite;
        crate::poly::from_roots(&roots)
    }

    /// `φ(z)`; errors at a singular point.
    pub fn value(&self, z: C64) -> Result<f64> {
        if self.is_singular(z) {
            return Err(Error::SingularPoint(z));
        }
        Ok(self.value_unchecked(z))
    }

    /// `φ(z)` without the singularity check (returns `±inf` at charges).
    pub fn value_unchecked(&self, z: C64) -> f64 {
        match self {
            ExternalField::Zero => 0.0,
            ExternalField::LogCharges { charges } => charges.iter().map(|c| -c.alpha * (z - c.at).norm().ln()).sum(),
            ExternalField::Polynomial { coeffs } => crate::poly::eval(coeffs, z).re,
        }
    }

    /// `Φ'(z)`.
    pub fn deriv(&self, z: C64) -> Result<C64> {
        if self.is_singular(z) {
            return Err(Error::SingularPoint(z));
        }
        Ok(self.deriv_unchecked(z))
    }

    pub fn deriv_unchecked(&self, z: C64) -> C64 {
        match self {
            ExternalField::Zero => C64::new(0.0, 0.0),
            ExternalField::LogCharges { charges } => charges.iter().map(|c| -c.alpha / (z - c.at)).sum(),
            ExternalField::Polynomial { coeffs } => crate::poly::eval(&crate::poly::derivative(coeffs), z),
        }
    }

    /// Cauchy-Riemann consistency: `|Φ'(z) - (φ_x - i φ_y)|` with central
    /// differences of step `h`; the error is `O(h^2)`.
    pub fn gradient_check(&self, z: C64, h: f64) -> Result<f64> {
        let exact = self.deriv(z)?;
        let dx = (self.value(z + C64::new(h, 0.0))? - self.value(z - C64::new(h, 0.0))?) / (2.0 * h);
        let dy = (self.value(z + C64::new(0.0, h))? - self.value(z - C64::new(0.0, h))?) / (2.0 * h);
        Ok((exact - C64::new(dx, -dy)).norm())
    }

    /// Five-point Laplacian of `φ` at `z` with spacing `h`.
    pub fn discrete_laplacian(&self, z: C64, h: f64) -> Result<f64> {
        let c = self.value(z)?;
        let s = self.value(z + C64::new(h, 0.0))?
            + self.value(z - C64::new(h, 0.0))?
            + self.value(z + C64::new(0.0, h))?
            + self.value(z - C64::new(0.0, h))?;
        Ok((s - 4.0 * c) / (h * h))
    }
}

/// Free-function form of [`ExternalField::value`].
pub fn field_value(field: &ExternalField, z: C64) -> Result<f64> {
    field.value(z)
}

/// Free-function form of [`ExternalField::deriv`].
pub fn field_deriv(field: &ExternalField, z: C64) -> Result<C64> {
    field.deriv(z)
}

pub fn field_gradient_check(field: &ExternalField, z: C64, h: f64) -> Result<f64> {
    field.gradient_check(z, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn values() {
        assert_eq!(ExternalField::Zero.value(c64(3.0, -1.0)).unwrap(), 0.0);
        let f = ExternalField::log_charges([(c64(0.0, 0.0), 1.0)]).unwrap();
        assert!((f.value(c64(std::f64::consts::E, 0.0)).unwrap() + 1.0).abs() < 1e-15);
        let p = ExternalField::quadratic(c64(1.0, 0.0));
        assert!(p.value(c64(1.0, 1.0)).unwrap().abs() < 1e-15);
    }

    #[test]
    fn derivatives() {
        let f = ExternalField::log_charges([(c64(0.0, 0.0), 1.0)]).unwrap();
        assert!((f.deriv(c64(2.0, 0.0)).unwrap() - c64(-0.5, 0.0)).norm() < 1e-15);
        let p = ExternalField::quadratic(c64(1.0, 0.0));
        assert!((p.deriv(c64(3.0, 0.0)).unwrap() - c64(6.0, 0.0)).norm() < 1e-15);
        let d = ExternalField::log_charges([(c64(-1.0, 0.0), 0.5), (c64(1.0, 0.0), -0.5)]).unwrap();
        assert!((d.deriv(c64(0.0, 0.0)).unwrap() - c64(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_points_rejected() {
        let f = ExternalField::log_charges([(c64(0.5, 0.5), 1.0)]).unwrap();
        assert!(matches!(f.value(c64(0.5, 0.5)), Err(Error::SingularPoint(_))));
        assert!(f.deriv(c64(0.5, 0.5)).is_err());
        assert!(ExternalField::log_charges([(c64(1.0, 0.0), 1.0), (c64(1.0, 0.0), 2.0)]).is_err());
        assert!(ExternalField::polynomial(vec![c64(0.0, 0.0), c64(1.0, 0.0)]).is_err());
        assert!(ExternalField::quadratic(c64(1.0, 0.0)).singular_set().infinity);
    }

    #[test]
    fn cauchy_riemann() {
        assert_eq!(ExternalField::Zero.gradient_check(c64(0.3, 0.2), 1e-4).unwrap(), 0.0);
        let p = ExternalField::quadratic(c64(1.0, 0.0));
        assert!(p.gradient_check(c64(1.0, 0.0), 1e-4).unwrap() <= 1e-6);
        let f = ExternalField::log_charges([(c64(0.0, 0.0), 1.0)]).unwrap();
        assert!(f.gradient_check(c64(1.0, 1.0), 1e-4).unwrap() <= 1e-6);
    }

    #[test]
    fn zero_charges_match_zero_field() {
        let f = ExternalField::log_charges([(c64(0.0, 0.0), 0.0), (c64(1.0, 2.0), 0.0)]).unwrap();
        assert!(f.is_zero());
        for z in [c64(0.3, 0.1), c64(-2.0, 5.0)] {
            assert_eq!(f.value(z).unwrap(), 0.0);
            assert_eq!(f.deriv(z).unwrap(), c64(0.0, 0.0));
        }
    }
}
