//! The operator family `L_λ = ã^{ij}_λ ∂ᵢ∂ⱼ`: coefficient matrices, their
//! spectra, the radial reduction and the diffusion square root.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use parking_lot::Mutex;

use crate::error::{domain, Error, Result};
use crate::geometry::SpineProfile;
use crate::potentials::PotentialSpec;
use crate::quadrature::QuadConfig;

/// `λ = scale · ω(x₁, |x'|)` with an optional memo on a rounding grid.
pub struct OmegaField {
    pub spec: PotentialSpec,
    pub scale: f64,
    pub quad: QuadConfig,
    memo: Option<(f64, Memo)>,
}

type Memo = Mutex<HashMap<(i64, i64), f64>>;

impl OmegaField {
    pub fn new(spec: PotentialSpec, scale: f64, quad: QuadConfig) -> Self {
        Self {
            spec,
            scale,
            quad,
            memo: None,
        }
    }

    /// Caches evaluations keyed by `(x₁, r)` rounded to multiples of `grid`;
    /// values are computed at the rounded point so results do not depend on
    /// evaluation order.
    pub fn with_memo(mut self, grid: f64) -> Self {
        self.memo = Some((grid, Mutex::new(HashMap::new())));
        self
    }

    pub fn eval(&self, x1: f64, r: f64) -> Result<f64> {
        let Some((grid, memo)) = &self.memo else {
            return Ok(self.scale * self.spec.eval_omega(x1, r, &self.quad)?);
        };
        let key = ((x1 / grid).round() as i64, (r / grid).round() as i64);
        if let Some(v) = memo.lock().get(&key) {
            return Ok(*v);
        }
        let (xr, rr) = (key.0 as f64 * grid, key.1 as f64 * grid);
        let v = self.scale * self.spec.eval_omega(xr, rr, &self.quad)?;
        memo.lock().insert(key, v);
        Ok(v)
    }
}

/// Patch that replaces `inner` by `ε · inner` on a thin neighborhood of the
/// negative `x₁`-axis inside the removed spine set, leaving it unchanged on
/// the symmetric domain.
pub struct SmoothPatch {
    pub inner: LambdaField,
    pub eps: f64,
    pub delta: f64,
    pub profile: SpineProfile,
}

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

impl SmoothPatch {
    /// Patch weight in `[0, 1]`; 1 near the negative axis, 0 off the spine set.
    pub fn weight(&self, x: &[f64]) -> f64 {
        let x1 = x[0];
        if x1 >= 0.0 {
            return 0.0;
        }
        let s = (-x1).min(self.profile.c);
        let Ok(r) = self.profile.eval(s) else {
            return 0.0;
        };
        let width = self.delta.min(r);
        if width <= 0.0 {
            return 0.0;
        }
        let rho = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        1.0 - smoothstep5(2.0 * rho / width - 1.0)
    }
}

/// Scalar field `λ(x)` defining `L_λ`.
#[derive(Clone)]
pub enum LambdaField {
    Constant(f64),
    OmegaDerived(Arc<OmegaField>),
    SmoothPatch(Arc<SmoothPatch>),
}

impl fmt::Debug for LambdaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl LambdaField {
    pub fn constant(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("λ = {lambda} must be positive and finite"));
        }
        Ok(LambdaField::Constant(lambda))
    }

    pub fn omega(spec: PotentialSpec, scale: f64, quad: QuadConfig) -> Self {
        LambdaField::OmegaDerived(Arc::new(OmegaField::new(spec, scale, quad)))
    }

    pub fn patch(inner: LambdaField, eps: f64, delta: f64, profile: SpineProfile) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) || !(delta > 0.0) {
            return domain("patch needs ε ∈ (0, 1] and δ > 0");
        }
        Ok(LambdaField::SmoothPatch(Arc::new(SmoothPatch {
            inner,
            eps,
            delta,
            profile,
        })))
    }

    pub fn describe(&self) -> String {
        match self {
            LambdaField::Constant(l) => format!("Constant(λ={l})"),
            LambdaField::OmegaDerived(o) => format!("OmegaDerived(scale={})", o.scale),
            LambdaField::SmoothPatch(p) => {
                format!("SmoothPatch({}, ε={})", p.inner.describe(), p.eps)
            }
        }
    }

    /// `λ(x)` for a point of any dimension ≥ 2.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            LambdaField::Constant(l) => *l,
            LambdaField::OmegaDerived(o) => {
                let r = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                o.eval(x[0], r)?
            }
            LambdaField::SmoothPatch(p) => {
                let inner = p.inner.value(x)?;
                let w = p.weight(x);
                inner * (p.eps + (1.0 - p.eps) * (1.0 - w))
            }
        };
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Evaluation(format!("λ(x) = {v} at x = {x:?}")));
        }
        Ok(v)
    }

    /// Largest value of `λ` the field can take, when known a priori.
    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            LambdaField::Constant(l) => Some(*l),
            LambdaField::OmegaDerived(_) => None,
            LambdaField::SmoothPatch(p) => p.inner.upper_bound(),
        }
    }
}

/// `ã_λ(x)` together with the evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub matrix: DMatrix<f64>,
    pub point: Vec<f64>,
}

fn check_point(x: &[f64], d: usize) -> Result<()> {
    if d < 2 || x.len() != d {
        return domain(format!(
            "point of length {} does not match d = {d}",
            x.len()
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("point has non-finite coordinates");
    }
    Ok(())
}

/// Builds `ã_λ(x)`: `e₁` in the first row and column, and
/// `λδ^{ij} + (1-λ) x_i x_j / |x'|²` on the `x'` block (identity on the axis).
pub fn coefficient_matrix(field: &LambdaField, x: &[f64], d: usize) -> Result<CoefficientMatrix> {
    check_point(x, d)?;
    let mut m = DMatrix::identity(d, d);
    let rho2: f64 = x[1..].iter().map(|v| v * v).sum();
    if rho2 > 0.0 {
        let lambda = field.value(x)?;
        for i in 1..d {
            for j in 1..d {
                let delta = if i == j { lambda } else { 0.0 };
                m[(i, j)] = delta + (1.0 - lambda) * x[i] * x[j] / rho2;
            }
        }
    }
    Ok(CoefficientMatrix {
        matrix: m,
        point: x.to_vec(),
    })
}

/// Eigenvalue spread `κ = min(λ, 1/λ)`. On the axis this is an error unless
/// `allow_axis`, in which case the identity gives `κ = 1`.
pub fn eigen_spread(field: &LambdaField, x: &[f64], allow_axis: bool) -> Result<f64> {
    let rho2: f64 = x[1..].iter().map(|v| v * v).sum();
    if rho2 == 0.0 {
        if allow_axis {
            return Ok(1.0);
        }
        return domain("eigen spread requested on the axis x' = 0");
    }
    let l = field.value(x)?;
    Ok(if l <= 1.0 { l } else { 1.0 / l })
}

/// `v_{x₁x₁} + v_rr + λ(x)(d-2)/r · v_r` at `x`, i.e. `L_λ u` for
/// `u(x) = v(x₁, |x'|)`.
pub fn radial_residual(
    field: &LambdaField,
    d: usize,
    v_x1x1: f64,
    v_rr: f64,
    v_r: f64,
    x: &[f64],
) -> Result<f64> {
    check_point(x, d)?;
    let r = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if r == 0.0 {
        return domain("radial reduction is undefined on the axis");
    }
    let lambda = field.value(x)?;
    Ok(v_x1x1 + v_rr + lambda * (d as f64 - 2.0) / r * v_r)
}

/// Symmetric `σ` with `σσᵀ = 2ã_λ(x)`.
pub fn diffusion_sqrt(field: &LambdaField, x: &[f64], d: usize) -> Result<DMatrix<f64>> {
    check_point(x, d)?;
    let rho2: f64 = x[1..].iter().map(|v| v * v).sum();
    let s2 = std::f64::consts::SQRT_2;
    let mut m = DMatrix::identity(d, d) * s2;
    if rho2 > 0.0 {
        let lambda = field.value(x)?;
        let sl = (2.0 * lambda).sqrt();
        for i in 1..d {
            for j in 1..d {
                let p = x[i] * x[j] / rho2;
                let delta = if i == j { 1.0 } else { 0.0 };
                m[(i, j)] = s2 * p + sl * (delta - p);
            }
        }
    }
    Ok(m)
}

/// Writes `σ(x) ξ / √2` into `out` for a given `λ = lambda` without forming
/// the matrix.
#[inline]
pub(crate) fn apply_unit_sqrt(lambda: f64, x: &[f64], xi: &[f64], out: &mut [f64]) {
    out[0] = xi[0];
    let rho2: f64 = x[1..].iter().map(|v| v * v).sum();
    if rho2 == 0.0 {
        out[1..].copy_from_slice(&xi[1..]);
        return;
    }
    let dot: f64 = x[1..].iter().zip(&xi[1..]).map(|(a, b)| a * b).sum::<f64>() / rho2;
    let sl = lambda.sqrt();
    for i in 1..x.len() {
        let radial = dot * x[i];
        out[i] = radial + sl * (xi[i] - radial);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_examples() {
        let f = LambdaField::constant(2.0).unwrap();
        let m = coefficient_matrix(&f, &[0.0, 1.0, 0.0], 3).unwrap().matrix;
        assert_eq!((m[(1, 1)], m[(2, 2)], m[(1, 2)]), (1.0, 2.0, 0.0));
        let s = 1.0 / 2f64.sqrt();
        let m = coefficient_matrix(&f, &[0.0, s, s], 3).unwrap().matrix;
        assert!((m[(1, 1)] - 1.5).abs() < 1e-15 && (m[(1, 2)] + 0.5).abs() < 1e-15);
        assert_eq!(m[(0, 0)], 1.0);
        let id = coefficient_matrix(&LambdaField::Constant(1.0), &[0.3, 0.2, -0.1], 3).unwrap();
        assert_eq!(id.matrix, DMatrix::identity(3, 3));
    }

    #[test]
    fn spread_examples() {
        let x = [0.1, 0.2, 0.0];
        assert!(
            (eigen_spread(&LambdaField::Constant(1.0 / 0.3), &x, false).unwrap() - 0.3).abs()
                < 1e-15
        );
        assert_eq!(
            eigen_spread(&LambdaField::Constant(0.3), &x, false).unwrap(),
            0.3
        );
        assert!(eigen_spread(&LambdaField::Constant(0.3), &[1.0, 0.0, 0.0], false).is_err());
        assert_eq!(
            eigen_spread(&LambdaField::Constant(0.3), &[1.0, 0.0, 0.0], true).unwrap(),
            1.0
        );
    }

    #[test]
    fn radial_examples() {
        let one = LambdaField::Constant(1.0);
        let r = 0.7;
        assert!(
            (radial_residual(&one, 3, 0.0, 2.0, 2.0 * r, &[0.0, r, 0.0]).unwrap() - 4.0).abs()
                < 1e-14
        );
        let eps = 0.3;
        let p = 1.0 - eps;
        let lam = LambdaField::Constant(eps);
        let v_r = p * r.powf(p - 1.0);
        let v_rr = p * (p - 1.0) * r.powf(p - 2.0);
        assert!(
            radial_residual(&lam, 3, 0.0, v_rr, v_r, &[0.0, r, 0.0])
                .unwrap()
                .abs()
                < 1e-14
        );
    }

    #[test]
    fn sqrt_example() {
        let f = LambdaField::Constant(4.0);
        let s = diffusion_sqrt(&f, &[0.0, 1.0, 0.0], 3).unwrap();
        assert!((s[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
        assert!((s[(2, 2)] - 8f64.sqrt()).abs() < 1e-15);
        let mut out = [0.0; 3];
        let xi = [0.3, -1.2, 0.7];
        apply_unit_sqrt(4.0, &[0.0, 1.0, 0.0], &xi, &mut out);
        let full = &s * nalgebra::DVector::from_column_slice(&xi) / 2f64.sqrt();
        for i in 0..3 {
            assert!((out[i] - full[i]).abs() < 1e-14);
        }
    }
}
