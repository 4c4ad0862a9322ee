//! Spine profiles `r(t)` and the cusp domains built from them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A real function of one variable shared across threads.
#[derive(Clone)]
pub struct Function1D(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Function1D {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    #[inline]
    pub fn call(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for Function1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Function1D(..)")
    }
}

/// Catalog of spine shapes. `Custom` profiles cannot be serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProfileKind {
    /// `e^{-ε/t}`
    ExpSpine { eps: f64 },
    /// `t^η`
    Power { eta: f64 },
    /// `t |ln t|^{-η}`
    LogPower { eta: f64 },
    /// `t (|ln t| ln|ln t|)^{-p}`
    IterLogPower { p: f64 },
    /// `t^{1 + |ln|ln t||}`
    PowerIterLog,
    /// `IterLogPower` with `p = 1/(d-3)`.
    DMinus3LogLog { d: u32 },
    #[serde(skip)]
    Custom(Function1D),
}

impl PartialEq for ProfileKind {
    fn eq(&self, other: &Self) -> bool {
        use ProfileKind::*;
        match (self, other) {
            (ExpSpine { eps: a }, ExpSpine { eps: b }) => a == b,
            (Power { eta: a }, Power { eta: b }) => a == b,
            (LogPower { eta: a }, LogPower { eta: b }) => a == b,
            (IterLogPower { p: a }, IterLogPower { p: b }) => a == b,
            (PowerIterLog, PowerIterLog) => true,
            (DMinus3LogLog { d: a }, DMinus3LogLog { d: b }) => a == b,
            (Custom(a), Custom(b)) => Arc::ptr_eq(&a.0, &b.0),
            _ => false,
        }
    }
}

/// A spine profile `r` on `(0, c]`, with `r(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    pub c: f64,
}

const INV_E: f64 = 0.367_879_441_171_442_33;

impl SpineProfile {
    pub fn new(kind: ProfileKind, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return domain(format!("profile end c = {c} must be positive"));
        }
        match &kind {
            ProfileKind::ExpSpine { eps } if !(*eps > 0.0) => {
                return domain("ExpSpine needs ε > 0")
            }
            ProfileKind::Power { eta } | ProfileKind::LogPower { eta } if !(*eta > 0.0) => {
                return domain("profile exponent η must be positive")
            }
            ProfileKind::IterLogPower { p } if !(*p > 0.0) => {
                return domain("IterLogPower needs p > 0")
            }
            ProfileKind::DMinus3LogLog { d } if *d < 4 => {
                return domain("DMinus3LogLog needs d ≥ 4")
            }
            _ => {}
        }
        let profile = Self { kind, c };
        if let Some(t0) = profile.validity_threshold() {
            if c >= t0 {
                return domain(format!(
                    "profile valid only for t < {t0:.6}; requested c = {c}"
                ));
            }
        }
        Ok(profile)
    }

    /// Builds the profile, shrinking `c` below the validity threshold when
    /// needed. The second value describes any adjustment.
    pub fn clamped(kind: ProfileKind, c: f64) -> Result<(Self, Option<String>)> {
        let probe = Self {
            kind: kind.clone(),
            c,
        };
        match probe.validity_threshold() {
            Some(t0) if c >= t0 => {
                let eff = 0.9 * t0;
                let note =
                    format!("c reduced from {c} to {eff:.6} (profile valid for t < {t0:.6})");
                Ok((Self::new(kind, eff)?, Some(note)))
            }
            _ => Ok((Self::new(kind, c)?, None)),
        }
    }

    /// Exclusive upper bound of the interval on which the catalog formula is
    /// defined and increasing.
    pub fn validity_threshold(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::ExpSpine { .. } | ProfileKind::Power { .. } | ProfileKind::Custom(_) => {
                None
            }
            ProfileKind::LogPower { .. } => Some(1.0),
            ProfileKind::IterLogPower { .. }
            | ProfileKind::PowerIterLog
            | ProfileKind::DMinus3LogLog { .. } => Some(INV_E),
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ProfileKind::ExpSpine { eps } => format!("ExpSpine(ε={eps})"),
            ProfileKind::Power { eta } => format!("Power(η={eta})"),
            ProfileKind::LogPower { eta } => format!("LogPower(η={eta})"),
            ProfileKind::IterLogPower { p } => format!("IterLogPower(p={p})"),
            ProfileKind::PowerIterLog => "PowerIterLog".into(),
            ProfileKind::DMinus3LogLog { d } => format!("DMinus3LogLog(d={d})"),
            ProfileKind::Custom(_) => "Custom".into(),
        }
    }

    fn iterlog_p(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::IterLogPower { p } => Some(p),
            ProfileKind::DMinus3LogLog { d } => Some(1.0 / (d as f64 - 3.0)),
            _ => None,
        }
    }

    fn check_arg(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 || t > self.c * (1.0 + 4.0 * f64::EPSILON) {
            return domain(format!("profile argument t = {t} outside [0, {}]", self.c));
        }
        Ok(())
    }

    /// `ln r(t)` for `t > 0`, computed without forming `r` (no underflow).
    pub fn log_radius(&self, t: f64) -> Result<f64> {
        self.check_arg(t)?;
        if t == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let lt = t.ln();
        let big_l = -lt;
        let v = match self.kind {
            ProfileKind::ExpSpine { eps } => -eps / t,
            ProfileKind::Power { eta } => eta * lt,
            ProfileKind::LogPower { eta } => lt - eta * big_l.abs().ln(),
            ProfileKind::PowerIterLog => (1.0 + big_l.abs().ln().abs()) * lt,
            ProfileKind::IterLogPower { .. } | ProfileKind::DMinus3LogLog { .. } => {
                let p = self.iterlog_p().unwrap_or(1.0);
                lt - p * (big_l.abs().ln() + big_l.abs().ln().ln())
            }
            ProfileKind::Custom(ref f) => {
                let r = f.call(t);
                if !r.is_finite() || r < 0.0 {
                    return Err(Error::Evaluation(format!(
                        "custom profile returned {r} at t = {t}"
                    )));
                }
                r.ln()
            }
        };
        if v.is_nan() {
            return Err(Error::Evaluation(format!("profile undefined at t = {t}")));
        }
        Ok(v)
    }

    /// `r(t)`; exactly 0 at `t = 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(self.log_radius(t)?.exp())
    }

    /// `r'(t)` for `t > 0`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let r = self.eval(t)?;
        let big_l = -t.ln();
        let dlog = match self.kind {
            ProfileKind::ExpSpine { eps } => eps / (t * t),
            ProfileKind::Power { eta } => eta / t,
            ProfileKind::LogPower { eta } => (1.0 + eta / big_l) / t,
            ProfileKind::PowerIterLog => (2.0 + big_l.ln()) / t,
            ProfileKind::IterLogPower { .. } | ProfileKind::DMinus3LogLog { .. } => {
                let p = self.iterlog_p().unwrap_or(1.0);
                (1.0 + p / big_l + p / (big_l * big_l.ln())) / t
            }
            ProfileKind::Custom(ref f) => {
                let h = 1e-6 * t;
                return Ok((f.call(t + h) - f.call(t - h)) / (2.0 * h));
            }
        };
        Ok(r * dlog)
    }
}

/// Free-function form of [`SpineProfile::eval`].
pub fn eval_profile(profile: &SpineProfile, t: f64) -> Result<f64> {
    profile.eval(t)
}

/// Ball of radius `c` with a spine neighborhood removed along the positive
/// `x₁`-axis (or along both half-axes when `symmetric`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspDomain {
    pub d: usize,
    pub c: f64,
    pub profile: SpineProfile,
    pub symmetric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryClass {
    Sphere,
    Spine,
    Origin,
    NotBoundary,
}

impl CuspDomain {
    pub fn new(d: usize, c: f64, profile: SpineProfile, symmetric: bool) -> Result<Self> {
        if d < 3 {
            return domain(format!("dimension d = {d} must be at least 3"));
        }
        if !(c > 0.0 && c.is_finite()) {
            return domain(format!("ball radius c = {c} must be positive"));
        }
        if c > profile.c * (1.0 + 4.0 * f64::EPSILON) {
            return domain(format!(
                "ball radius {c} exceeds the profile end {}",
                profile.c
            ));
        }
        Ok(Self {
            d,
            c,
            profile,
            symmetric,
        })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return domain(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.d
            ));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return domain("point has non-finite coordinates");
        }
        Ok(())
    }

    /// Axial parameter `s` for the spine test, if the point lies over the spine.
    fn spine_parameter(&self, x1: f64) -> Option<f64> {
        let s = if self.symmetric { x1.abs() } else { x1 };
        (s >= 0.0 && s <= self.c).then_some(s)
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_point(x)?;
        Ok(self.contains_unchecked(x))
    }

    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        let n2: f64 = x.iter().map(|v| v * v).sum();
        if n2 >= self.c * self.c {
            return false;
        }
        let rho = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        match self.spine_parameter(x[0]) {
            None => true,
            Some(s) => {
                if rho == 0.0 {
                    return false;
                }
                match self.profile.log_radius(s) {
                    Ok(lr) => rho.ln() > lr,
                    Err(_) => false,
                }
            }
        }
    }

    /// Distance-like margin to the boundary used for step control: the
    /// minimum of the gap to the sphere and the radial gap to the spine.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sphere = (self.c - n).max(0.0);
        let rho = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let spine = match self.spine_parameter(x[0]) {
            Some(s) => {
                let gap = (rho - self.profile.eval(s).unwrap_or(0.0)).max(0.0);
                let slope = if s > 0.0 {
                    self.profile.derivative(s).unwrap_or(0.0)
                } else {
                    0.0
                };
                gap / (1.0 + slope * slope).sqrt()
            }
            None => {
                // nearest spine point is the tip
                let s = if self.symmetric { 0.0 } else { x[0].min(0.0) };
                ((s * s) + rho * rho).sqrt()
            }
        };
        sphere.min(spine)
    }

    pub fn classify_boundary(&self, x: &[f64], tol: f64) -> Result<BoundaryClass> {
        self.check_point(x)?;
        if !(tol > 0.0) {
            return domain("boundary tolerance must be positive");
        }
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n <= tol {
            return Ok(BoundaryClass::Origin);
        }
        let rho = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let on_sphere = (n - self.c).abs() <= tol;
        if let Some(s) = self.spine_parameter(x[0]) {
            let r = self.profile.eval(s)?;
            if (rho - r).abs() <= tol || (on_sphere && rho <= r + tol) {
                return Ok(BoundaryClass::Spine);
            }
        }
        if on_sphere {
            return Ok(BoundaryClass::Sphere);
        }
        Ok(BoundaryClass::NotBoundary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof(kind: ProfileKind, c: f64) -> SpineProfile {
        SpineProfile::new(kind, c).unwrap()
    }

    #[test]
    fn catalog_values() {
        let e = prof(ProfileKind::ExpSpine { eps: 0.5 }, 1.0);
        assert_eq!(e.eval(0.0).unwrap(), 0.0);
        assert!((e.eval(0.5).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let lp = prof(ProfileKind::LogPower { eta: 1.0 }, 0.5);
        let t = (-2.0f64).exp();
        assert!((lp.eval(t).unwrap() - t / 2.0).abs() < 1e-15);
    }

    #[test]
    fn thresholds_are_enforced() {
        assert!(SpineProfile::new(ProfileKind::PowerIterLog, 0.5).is_err());
        let (p, note) = SpineProfile::clamped(ProfileKind::PowerIterLog, 0.5).unwrap();
        assert!(p.c < INV_E && note.is_some());
        let p = prof(ProfileKind::PowerIterLog, 0.3);
        assert!(p.eval(0.31).is_err());
    }

    #[test]
    fn derivatives_match_differences() {
        let kinds = [
            ProfileKind::ExpSpine { eps: 0.5 },
            ProfileKind::Power { eta: 2.5 },
            ProfileKind::LogPower { eta: 0.7 },
            ProfileKind::IterLogPower { p: 0.5 },
            ProfileKind::PowerIterLog,
            ProfileKind::DMinus3LogLog { d: 4 },
        ];
        for k in kinds {
            let p = prof(k, 0.3);
            let t = 0.05;
            let h = 1e-6;
            let fd = (p.eval(t + h).unwrap() - p.eval(t - h).unwrap()) / (2.0 * h);
            let an = p.derivative(t).unwrap();
            assert!(
                (fd - an).abs() <= 1e-7 * an.abs().max(1e-12),
                "{}",
                p.name()
            );
        }
    }

    #[test]
    fn membership_examples() {
        let d = CuspDomain::new(3, 1.0, prof(ProfileKind::Power { eta: 2.0 }, 1.0), true).unwrap();
        assert!(!d.contains(&[0.5, 0.1, 0.0]).unwrap());
        assert!(!d.contains(&[0.0, 0.0, 0.0]).unwrap());
        let g =
            CuspDomain::new(3, 1.0, prof(ProfileKind::ExpSpine { eps: 0.5 }, 1.0), false).unwrap();
        assert!(g.contains(&[-0.5, 0.0, 0.0]).unwrap());
        assert!(!g.contains(&[0.0, 0.0, 1.0]).unwrap());
    }

    #[test]
    fn boundary_examples() {
        let d = CuspDomain::new(3, 1.0, prof(ProfileKind::Power { eta: 2.0 }, 1.0), false).unwrap();
        assert_eq!(
            d.classify_boundary(&[0.0; 3], 1e-12).unwrap(),
            BoundaryClass::Origin
        );
        assert_eq!(
            d.classify_boundary(&[1.0, 0.0, 0.0], 1e-9).unwrap(),
            BoundaryClass::Spine
        );
        assert_eq!(
            d.classify_boundary(&[0.5, 0.25, 0.0], 1e-9).unwrap(),
            BoundaryClass::Spine
        );
        assert_eq!(
            d.classify_boundary(&[-1.0, 0.0, 0.0], 1e-9).unwrap(),
            BoundaryClass::Sphere
        );
        assert_eq!(
            d.classify_boundary(&[-0.3, 0.1, 0.0], 1e-9).unwrap(),
            BoundaryClass::NotBoundary
        );
    }
}
