//! Radial kernels and their radial derivatives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::xprec::Dd;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// r^(2k-1)
    PolyharmonicOdd { k: u32 },
    /// r^(2k) log r
    PolyharmonicEven { k: u32 },
    /// exp(-(εr)²)
    Gaussian { epsilon: f64 },
    /// sqrt((εr)² + 1)
    Multiquadric { epsilon: f64 },
}

impl Kernel {
    pub const CUBIC: Kernel = Kernel::PolyharmonicOdd { k: 2 };
    pub const QUINTIC: Kernel = Kernel::PolyharmonicOdd { k: 3 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::PolyharmonicOdd { k } | Kernel::PolyharmonicEven { k } if k < 1 => {
                Err(Error::Config(format!("polyharmonic order k must be >= 1, got {k}")))
            }
            Kernel::Gaussian { epsilon } | Kernel::Multiquadric { epsilon }
                if !(epsilon > 0.0 && epsilon.is_finite()) =>
            {
                Err(Error::Config(format!("shape parameter must be positive, got {epsilon}")))
            }
            _ => Ok(()),
        }
    }

    /// Order of conditional positive definiteness.
    pub fn cpd_order(&self) -> usize {
        match *self {
            Kernel::PolyharmonicOdd { k } => k as usize,
            Kernel::PolyharmonicEven { k } => k as usize + 1,
            Kernel::Gaussian { .. } => 0,
            Kernel::Multiquadric { .. } => 1,
        }
    }

    /// Polynomial degree bound used when none is configured.
    pub fn default_degree_bound(&self) -> usize {
        self.cpd_order()
    }

    pub fn phi(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.phi_unchecked(r))
    }

    pub fn phi_d1(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.phi_d1_unchecked(r))
    }

    pub fn phi_d2(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.phi_d2_unchecked(r))
    }

    /// φ(r) for r known to be a distance.
    pub(crate) fn phi_unchecked(&self, r: f64) -> f64 {
        match *self {
            Kernel::PolyharmonicOdd { k } => r.powi(2 * k as i32 - 1),
            Kernel::PolyharmonicEven { k } => {
                if r == 0.0 {
                    0.0
                } else {
                    r.powi(2 * k as i32) * r.ln()
                }
            }
            Kernel::Gaussian { epsilon } => (-(epsilon * r).powi(2)).exp(),
            Kernel::Multiquadric { epsilon } => ((epsilon * r).powi(2) + 1.0).sqrt(),
        }
    }

    pub(crate) fn phi_d1_unchecked(&self, r: f64) -> f64 {
        match *self {
            Kernel::PolyharmonicOdd { k } => {
                let p = 2 * k as i32 - 1;
                if p == 1 {
                    // |x| has no derivative at 0; the symmetric limit is 0.
                    if r == 0.0 { 0.0 } else { 1.0 }
                } else {
                    f64::from(p) * r.powi(p - 1)
                }
            }
            Kernel::PolyharmonicEven { k } => {
                if r == 0.0 {
                    0.0
                } else {
                    let p = 2 * k as i32;
                    r.powi(p - 1) * (f64::from(p) * r.ln() + 1.0)
                }
            }
            Kernel::Gaussian { epsilon } => {
                -2.0 * epsilon * epsilon * r * (-(epsilon * r).powi(2)).exp()
            }
            Kernel::Multiquadric { epsilon } => {
                epsilon * epsilon * r / ((epsilon * r).powi(2) + 1.0).sqrt()
            }
        }
    }

    pub(crate) fn phi_d2_unchecked(&self, r: f64) -> f64 {
        match *self {
            Kernel::PolyharmonicOdd { k } => {
                let p = 2 * k as i32 - 1;
                if p == 1 {
                    0.0
                } else {
                    f64::from(p * (p - 1)) * r.powi(p - 2)
                }
            }
            Kernel::PolyharmonicEven { k } => {
                let p = 2 * k as i32;
                if r == 0.0 {
                    // r² log r has a logarithmic singularity in its second derivative.
                    if k == 1 { f64::NEG_INFINITY } else { 0.0 }
                } else {
                    r.powi(p - 2) * (f64::from(p * (p - 1)) * r.ln() + f64::from(2 * p - 1))
                }
            }
            Kernel::Gaussian { epsilon } => {
                let e2 = epsilon * epsilon;
                (-2.0 * e2 + 4.0 * e2 * e2 * r * r) * (-(epsilon * r).powi(2)).exp()
            }
            Kernel::Multiquadric { epsilon } => {
                let s = ((epsilon * r).powi(2) + 1.0).sqrt();
                epsilon * epsilon / (s * s * s)
            }
        }
    }

    /// φ'(r)/r, the factor in the chain rule for ∂φ(|x-c|)/∂x, with the
    /// r → 0 limit taken as 0 (only exact at r = 0 where the product vanishes).
    pub(crate) fn d1_over_r(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else {
            self.phi_d1_unchecked(r) / r
        }
    }

    /// φ(r) in double-double. Exact up to double-double rounding for odd
    /// polyharmonic kernels; other kernels are evaluated in double.
    pub(crate) fn phi_dd(&self, r: Dd) -> Dd {
        match *self {
            Kernel::PolyharmonicOdd { k } => r.powi(2 * k - 1),
            _ => Dd::from(self.phi_unchecked(r.to_f64())),
        }
    }

    /// Double-double counterpart of [`Self::d1_over_r`].
    pub(crate) fn d1_over_r_dd(&self, r: Dd) -> Dd {
        match *self {
            Kernel::PolyharmonicOdd { k } if k >= 2 => r.powi(2 * k - 3).scale(f64::from(2 * k - 1)),
            _ => Dd::from(self.d1_over_r(r.to_f64())),
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be nonnegative, got {r}")))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Kernel::PolyharmonicOdd { k: 2 } => write!(f, "cubic"),
            Kernel::PolyharmonicOdd { k: 3 } => write!(f, "quintic"),
            Kernel::PolyharmonicOdd { k } => write!(f, "phs{}", 2 * k - 1),
            Kernel::PolyharmonicEven { k } => write!(f, "tps{k}"),
            Kernel::Gaussian { epsilon } => write!(f, "gaussian epsilon={epsilon}"),
            Kernel::Multiquadric { epsilon } => write!(f, "multiquadric epsilon={epsilon}"),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    /// Accepts `cubic`, `quintic`, `tps<k>`, `gaussian`, `multiquadric`,
    /// optionally followed by `epsilon=<float>` (separated by space, comma or colon).
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(|c: char| c.is_whitespace() || c == ',' || c == ':').filter(|p| !p.is_empty());
        let name = parts.next().ok_or_else(|| Error::Config("empty kernel name".into()))?;
        let mut epsilon = None;
        for p in parts {
            let v = p
                .strip_prefix("epsilon=")
                .ok_or_else(|| Error::Config(format!("unknown kernel option '{p}'")))?;
            epsilon = Some(
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad epsilon '{v}'")))?,
            );
        }
        let name = name.to_ascii_lowercase();
        let kernel = match name.as_str() {
            "cubic" => Kernel::CUBIC,
            "quintic" => Kernel::QUINTIC,
            "gaussian" => Kernel::Gaussian { epsilon: epsilon.unwrap_or(1.0) },
            "multiquadric" => Kernel::Multiquadric { epsilon: epsilon.unwrap_or(1.0) },
            n if n.starts_with("tps") => {
                let k = n[3..]
                    .parse::<u32>()
                    .map_err(|_| Error::Config(format!("bad thin-plate order in '{n}'")))?;
                Kernel::PolyharmonicEven { k }
            }
            n if n.starts_with("phs") => {
                let p = n[3..]
                    .parse::<u32>()
                    .map_err(|_| Error::Config(format!("bad polyharmonic power in '{n}'")))?;
                if p % 2 == 0 {
                    return Err(Error::Config(format!("odd polyharmonic power expected in '{n}'")));
                }
                Kernel::PolyharmonicOdd { k: (p + 1) / 2 }
            }
            _ => return Err(Error::Config(format!("unknown kernel '{name}'"))),
        };
        if epsilon.is_some() && matches!(kernel, Kernel::PolyharmonicOdd { .. } | Kernel::PolyharmonicEven { .. }) {
            return Err(Error::Config(format!("polyharmonic kernel '{name}' takes no epsilon")));
        }
        kernel.validate()?;
        Ok(kernel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_values() {
        assert_eq!(Kernel::CUBIC.phi(2.0).unwrap(), 8.0);
        assert_eq!(Kernel::Gaussian { epsilon: 1.0 }.phi(0.0).unwrap(), 1.0);
        assert_eq!(Kernel::Multiquadric { epsilon: 2.0 }.phi(0.0).unwrap(), 1.0);
        assert_eq!(Kernel::CUBIC.phi_d1(2.0).unwrap(), 12.0);
        assert_eq!(Kernel::CUBIC.phi_d2(2.0).unwrap(), 12.0);
        assert_eq!(Kernel::QUINTIC.phi_d1(1.0).unwrap(), 5.0);
        assert_eq!(Kernel::PolyharmonicEven { k: 1 }.phi(0.0).unwrap(), 0.0);
    }

    #[test]
    fn limits_at_zero() {
        for k in [Kernel::CUBIC, Kernel::QUINTIC, Kernel::PolyharmonicEven { k: 2 }] {
            assert_eq!(k.phi_d1(0.0).unwrap(), 0.0);
            assert_eq!(k.phi_d2(0.0).unwrap(), 0.0);
        }
        assert_eq!(Kernel::Gaussian { epsilon: 3.0 }.phi_d1(0.0).unwrap(), 0.0);
        assert_eq!(Kernel::Multiquadric { epsilon: 3.0 }.phi_d2(0.0).unwrap(), 9.0);
    }

    #[test]
    fn negative_radius_rejected() {
        assert!(matches!(Kernel::CUBIC.phi(-1.0), Err(Error::Domain(_))));
        assert!(matches!(Kernel::CUBIC.phi_d1(-1.0), Err(Error::Domain(_))));
        assert!(matches!(Kernel::CUBIC.phi_d2(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cpd_orders() {
        assert_eq!(Kernel::Gaussian { epsilon: 1.0 }.cpd_order(), 0);
        assert_eq!(Kernel::Multiquadric { epsilon: 1.0 }.cpd_order(), 1);
        assert_eq!(Kernel::CUBIC.cpd_order(), 2);
        assert_eq!(Kernel::QUINTIC.cpd_order(), 3);
        assert_eq!(Kernel::PolyharmonicEven { k: 2 }.cpd_order(), 3);
    }

    #[test]
    fn finite_difference_at_07() {
        let h = 1e-6;
        for k in all_kernels() {
            let fd = (k.phi(0.7 + h).unwrap() - k.phi(0.7 - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(k.phi_d1(0.7).unwrap(), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("cubic".parse::<Kernel>().unwrap(), Kernel::CUBIC);
        assert_eq!("quintic".parse::<Kernel>().unwrap(), Kernel::QUINTIC);
        assert_eq!("tps2".parse::<Kernel>().unwrap(), Kernel::PolyharmonicEven { k: 2 });
        assert_eq!(
            "multiquadric epsilon=19".parse::<Kernel>().unwrap(),
            Kernel::Multiquadric { epsilon: 19.0 }
        );
        assert_eq!("gaussian,epsilon=2.5".parse::<Kernel>().unwrap(), Kernel::Gaussian { epsilon: 2.5 });
        assert!("gaussian epsilon=-1".parse::<Kernel>().is_err());
        assert!("cubic epsilon=2".parse::<Kernel>().is_err());
        assert!("spline".parse::<Kernel>().is_err());
        for k in all_kernels() {
            assert_eq!(k.to_string().parse::<Kernel>().unwrap(), k);
        }
    }

    pub(crate) fn all_kernels() -> Vec<Kernel> {
        vec![
            Kernel::PolyharmonicOdd { k: 1 },
            Kernel::CUBIC,
            Kernel::QUINTIC,
            Kernel::PolyharmonicEven { k: 1 },
            Kernel::PolyharmonicEven { k: 2 },
            Kernel::Gaussian { epsilon: 1.3 },
            Kernel::Multiquadric { epsilon: 0.8 },
        ]
    }
}
