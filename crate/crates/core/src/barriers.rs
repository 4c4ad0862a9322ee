//! Barrier and irregularity-witness verification at the origin for axially
//! symmetric candidates `w(x) = v(x₁, |x'|)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{CuspDomain, ProfileKind, SpineProfile};
use crate::limits::{classify_growth, estimate_limit, Basis, Growth, GrowthFit, LimitEstimate};
use crate::operators::{radial_residual, LambdaField};
use crate::potentials::{PotentialSpec, Preset};
use crate::quadrature::QuadConfig;

const GAP_NOTE: &str = "smoothness up to the boundary away from the origin is not checked; \
only evaluability and the sign of Lw on the grid";

/// Second and first derivatives of `v(x₁, r)` with an absolute error bound
/// shared by all three.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxialDerivatives {
    pub v_x1x1: f64,
    pub v_rr: f64,
    pub v_r: f64,
    pub error: f64,
}

/// `w(x) = v(x₁, |x'|)`.
pub trait AxialFunction: Send + Sync {
    fn name(&self) -> String;
    fn value(&self, x1: f64, r: f64) -> Result<f64>;
    /// Closed-form or quadrature derivatives, when available.
    fn derivatives(&self, _x1: f64, _r: f64) -> Option<Result<AxialDerivatives>> {
        None
    }
}

/// `|x'|^a`
#[derive(Debug, Clone, Copy)]
pub struct RadialPower {
    pub a: f64,
}

impl AxialFunction for RadialPower {
    fn name(&self) -> String {
        format!("|x'|^{}", self.a)
    }
    fn value(&self, _x1: f64, r: f64) -> Result<f64> {
        Ok(r.powf(self.a))
    }
    fn derivatives(&self, _x1: f64, r: f64) -> Option<Result<AxialDerivatives>> {
        let a = self.a;
        let v_rr = a * (a - 1.0) * r.powf(a - 2.0);
        let v_r = a * r.powf(a - 1.0);
        Some(Ok(AxialDerivatives {
            v_x1x1: 0.0,
            v_rr,
            v_r,
            error: 4.0 * f64::EPSILON * (v_rr.abs() + v_r.abs()),
        }))
    }
}

/// `|x|^{-p}`
#[derive(Debug, Clone, Copy)]
pub struct InversePower {
    pub p: f64,
}

impl AxialFunction for InversePower {
    fn name(&self) -> String {
        format!("|x|^-{}", self.p)
    }
    fn value(&self, x1: f64, r: f64) -> Result<f64> {
        let s2 = x1 * x1 + r * r;
        if s2 == 0.0 {
            return Err(Error::SingularPoint { x: x1, r });
        }
        Ok(s2.powf(-0.5 * self.p))
    }
    fn derivatives(&self, x1: f64, r: f64) -> Option<Result<AxialDerivatives>> {
        let p = self.p;
        let s2 = x1 * x1 + r * r;
        if s2 == 0.0 {
            return Some(Err(Error::SingularPoint { x: x1, r }));
        }
        let a = s2.powf(-0.5 * p - 1.0);
        let b = (p + 2.0) / s2;
        let v_x1x1 = -p * a * (1.0 - b * x1 * x1);
        let v_rr = -p * a * (1.0 - b * r * r);
        let v_r = -p * a * r;
        Some(Ok(AxialDerivatives {
            v_x1x1,
            v_rr,
            v_r,
            error: 8.0 * f64::EPSILON * p * a * (1.0 + p + 2.0),
        }))
    }
}

/// `|x|²`
#[derive(Debug, Clone, Copy)]
pub struct SquaredNorm;

impl AxialFunction for SquaredNorm {
    fn name(&self) -> String {
        "|x|^2".into()
    }
    fn value(&self, x1: f64, r: f64) -> Result<f64> {
        Ok(x1 * x1 + r * r)
    }
    fn derivatives(&self, _x1: f64, r: f64) -> Option<Result<AxialDerivatives>> {
        Some(Ok(AxialDerivatives {
            v_x1x1: 2.0,
            v_rr: 2.0,
            v_r: 2.0 * r,
            error: 0.0,
        }))
    }
}

/// How a potential enters as a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialForm {
    /// `u(x₁, r)`
    Value,
    /// `u(0, 0) - u(x₁, r)`
    FromOrigin,
}

/// A potential `u` as an axial function, with quadrature derivatives.
pub struct PotentialFunction {
    pub spec: PotentialSpec,
    pub quad: QuadConfig,
    pub form: PotentialForm,
    origin: f64,
}

impl PotentialFunction {
    pub fn new(spec: PotentialSpec, quad: QuadConfig, form: PotentialForm) -> Result<Self> {
        let origin = match form {
            PotentialForm::Value => 0.0,
            PotentialForm::FromOrigin => spec.eval_u(0.0, 0.0, &quad)?.value,
        };
        Ok(Self {
            spec,
            quad,
            form,
            origin,
        })
    }
}

impl AxialFunction for PotentialFunction {
    fn name(&self) -> String {
        match self.form {
            PotentialForm::Value => format!("u[{}]", self.spec.name()),
            PotentialForm::FromOrigin => format!("u(0,0) - u[{}]", self.spec.name()),
        }
    }
    fn value(&self, x1: f64, r: f64) -> Result<f64> {
        let u = self.spec.eval_u(x1, r, &self.quad)?.value;
        Ok(match self.form {
            PotentialForm::Value => u,
            PotentialForm::FromOrigin => self.origin - u,
        })
    }
    fn derivatives(&self, x1: f64, r: f64) -> Option<Result<AxialDerivatives>> {
        let run = || -> Result<AxialDerivatives> {
            let (uxx, urr) = self.spec.second_derivatives(x1, r, &self.quad)?;
            let (_, k2) = self.spec.kernels(x1, r, &self.quad)?;
            let ur = k2.scale(-r);
            let s = match self.form {
                PotentialForm::Value => 1.0,
                PotentialForm::FromOrigin => -1.0,
            };
            Ok(AxialDerivatives {
                v_x1x1: s * uxx.value,
                v_rr: s * urr.value,
                v_r: s * ur.value,
                error: uxx.error.max(urr.error).max(ur.error),
            })
        };
        Some(run())
    }
}

/// A user-supplied `v(x₁, r)`; derivatives by finite differences.
pub struct CustomAxial {
    pub label: String,
    pub f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl AxialFunction for CustomAxial {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn value(&self, x1: f64, r: f64) -> Result<f64> {
        let v = (self.f)(x1, r);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!(
                "{} = {v} at ({x1}, {r})",
                self.label
            )))
        }
    }
}

/// Fourth-order central differences with `h = ε^{1/4} · min(r, |x|)`; the
/// error bound combines the gap to the `2h` estimate with rounding.
pub fn fd_derivatives(w: &dyn AxialFunction, x1: f64, r: f64) -> Result<AxialDerivatives> {
    if !(r > 0.0) {
        return domain("finite differences need r > 0");
    }
    let scale = r.min((x1 * x1 + r * r).sqrt());
    let h = f64::EPSILON.powf(0.25) * scale;
    let f0 = w.value(x1, r)?;
    let second = |g: &dyn Fn(f64) -> Result<f64>, h: f64| -> Result<(f64, f64)> {
        let (p1, m1, p2, m2) = (g(h)?, g(-h)?, g(2.0 * h)?, g(-2.0 * h)?);
        let d2 = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
        let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        Ok((d2, d1))
    };
    let gx = |s: f64| w.value(x1 + s, r);
    let gr = |s: f64| w.value(x1, r + s);
    let (dxx, _) = second(&gx, h)?;
    let (drr, dr) = second(&gr, h)?;
    let (dxx2, _) = second(&gx, 2.0 * h)?;
    let (drr2, dr2) = second(&gr, 2.0 * h)?;
    let round = 64.0 * f64::EPSILON * f0.abs().max(f64::MIN_POSITIVE) / (h * h);
    let error = (dxx - dxx2)
        .abs()
        .max((drr - drr2).abs())
        .max((dr - dr2).abs())
        + round;
    Ok(AxialDerivatives {
        v_x1x1: dxx,
        v_rr: drr,
        v_r: dr,
        error,
    })
}

fn derivatives_of(w: &dyn AxialFunction, x1: f64, r: f64) -> Result<AxialDerivatives> {
    match w.derivatives(x1, r) {
        Some(d) => d,
        None => fd_derivatives(w, x1, r),
    }
}

/// `Lw` at `(x₁, r)` and its error bound.
pub fn axial_lw(
    w: &dyn AxialFunction,
    field: &LambdaField,
    d: usize,
    x1: f64,
    r: f64,
) -> Result<(f64, f64)> {
    let der = derivatives_of(w, x1, r)?;
    let mut x = vec![0.0; d];
    x[0] = x1;
    x[1] = r;
    let lw = radial_residual(field, d, der.v_x1x1, der.v_rr, der.v_r, &x)?;
    let lambda = field.value(&x)?;
    let c = lambda * (d as f64 - 2.0) / r;
    let round = 4.0 * f64::EPSILON * (der.v_x1x1.abs() + der.v_rr.abs() + (c * der.v_r).abs());
    Ok((lw, der.error * (2.0 + c.abs()) + round))
}

pub struct BarrierCandidate {
    pub w: Arc<dyn AxialFunction>,
    pub field: LambdaField,
    pub d: usize,
    pub domain: CuspDomain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusReport {
    pub rho_in: f64,
    pub rho_out: f64,
    pub points: usize,
    /// In-domain grid points on the axis, where `Lw` is not evaluated.
    pub axis_points: usize,
    pub min_w: f64,
    pub min_w_at: (f64, f64),
    pub max_lw: f64,
    pub max_abs_lw: f64,
    pub max_lw_at: (f64, f64),
    /// Largest `Lw - error` over the grid; `≤ 0` means `Lw ≤ 0` holds.
    pub max_excess: f64,
    pub lw_holds: bool,
    pub min_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub radii: Vec<f64>,
    /// Largest value of `w` over in-domain grid points at each radius.
    pub sup_values: Vec<f64>,
    pub monotone: bool,
    pub fit: Option<GrowthFit>,
    pub tends_to_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub candidate: String,
    pub field: String,
    pub d: usize,
    pub annuli: Vec<AnnulusReport>,
    pub lw_holds: bool,
    pub min_holds: bool,
    pub limit: LimitCheck,
    pub passes: bool,
    pub note: String,
}

fn half_plane_grid(rho_in: f64, rho_out: f64, density: usize, with_axis: bool) -> Vec<(f64, f64)> {
    let ns = density.max(2);
    let nt = 2 * density.max(2) + 1;
    let mut pts = Vec::with_capacity(ns * nt);
    for i in 0..ns {
        let s = rho_in + (rho_out - rho_in) * i as f64 / (ns - 1) as f64;
        for j in 0..nt {
            if !with_axis && (j == 0 || j == nt - 1) {
                continue;
            }
            let th = std::f64::consts::PI * j as f64 / (nt - 1) as f64;
            let r = if j == 0 || j == nt - 1 {
                0.0
            } else {
                s * th.sin()
            };
            pts.push((s * th.cos(), r));
        }
    }
    pts
}

fn embed(x1: f64, r: f64, d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = x1;
    x[1] = r;
    x
}

struct PointEval {
    at: (f64, f64),
    w: f64,
    lw: Option<(f64, f64)>,
}

fn check_annulus(
    w: &dyn AxialFunction,
    field: &LambdaField,
    d: usize,
    domain: Option<&CuspDomain>,
    (rho_in, rho_out): (f64, f64),
    density: usize,
) -> Result<AnnulusReport> {
    if !(rho_in > 0.0 && rho_in < rho_out) {
        return Err(Error::Grid(format!("bad annulus ({rho_in}, {rho_out})")));
    }
    if let Some(dom) = domain {
        if rho_out > dom.c {
            return Err(Error::Grid(format!(
                "annulus outer radius {rho_out} exceeds the ball radius {}",
                dom.c
            )));
        }
    }
    let pts: Vec<(f64, f64)> = half_plane_grid(rho_in, rho_out, density, domain.is_some())
        .into_iter()
        .filter(|&(x1, r)| domain.map_or(r > 0.0, |dom| dom.contains_unchecked(&embed(x1, r, d))))
        .collect();
    if pts.is_empty() {
        return Err(Error::Grid(format!(
            "annulus ({rho_in}, {rho_out}) contains no domain points"
        )));
    }
    let evals: Vec<PointEval> = pts
        .par_iter()
        .map(|&(x1, r)| {
            let wv = w.value(x1, r)?;
            let lw = if r > 0.0 {
                Some(axial_lw(w, field, d, x1, r)?)
            } else {
                None
            };
            Ok(PointEval {
                at: (x1, r),
                w: wv,
                lw,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let mut rep = AnnulusReport {
        rho_in,
        rho_out,
        points: evals.len(),
        axis_points: 0,
        min_w: f64::INFINITY,
        min_w_at: (0.0, 0.0),
        max_lw: f64::NEG_INFINITY,
        max_abs_lw: 0.0,
        max_lw_at: (0.0, 0.0),
        max_excess: f64::NEG_INFINITY,
        lw_holds: true,
        min_holds: true,
    };
    for e in &evals {
        if e.w < rep.min_w {
            rep.min_w = e.w;
            rep.min_w_at = e.at;
        }
        match e.lw {
            None => rep.axis_points += 1,
            Some((lw, err)) => {
                if lw > rep.max_lw {
                    rep.max_lw = lw;
                    rep.max_lw_at = e.at;
                }
                rep.max_abs_lw = rep.max_abs_lw.max(lw.abs());
                rep.max_excess = rep.max_excess.max(lw - err);
            }
        }
    }
    rep.lw_holds = rep.max_excess <= 0.0;
    rep.min_holds = rep.min_w > 0.0;
    Ok(rep)
}

/// Checks `Lw ≤ 0` and `inf w > 0` on each annulus of the domain and
/// `w → 0` at the origin.
pub fn verify_barrier(
    cand: &BarrierCandidate,
    annuli: &[(f64, f64)],
    grid_density: usize,
) -> Result<BarrierReport> {
    if annuli.is_empty() {
        return Err(Error::Grid("no annuli given".into()));
    }
    let reports: Vec<AnnulusReport> = annuli
        .iter()
        .map(|&a| {
            check_annulus(
                cand.w.as_ref(),
                &cand.field,
                cand.d,
                Some(&cand.domain),
                a,
                grid_density,
            )
        })
        .collect::<Result<_>>()?;
    let start = annuli.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let limit = limit_to_zero(cand, start, grid_density)?;
    let lw_holds = reports.iter().all(|r| r.lw_holds);
    let min_holds = reports.iter().all(|r| r.min_holds);
    Ok(BarrierReport {
        candidate: cand.w.name(),
        field: cand.field.describe(),
        d: cand.d,
        passes: lw_holds && min_holds && limit.tends_to_zero,
        annuli: reports,
        lw_holds,
        min_holds,
        limit,
        note: GAP_NOTE.into(),
    })
}

fn limit_to_zero(cand: &BarrierCandidate, start: f64, density: usize) -> Result<LimitCheck> {
    let nt = 2 * density.max(2) + 1;
    let mut radii = Vec::new();
    let mut sups = Vec::new();
    for k in 0..30 {
        let s = start * 0.5f64.powi(k);
        let mut sup = f64::NEG_INFINITY;
        for j in 0..nt {
            let th = std::f64::consts::PI * j as f64 / (nt - 1) as f64;
            let r = if j == 0 || j == nt - 1 {
                0.0
            } else {
                s * th.sin()
            };
            let x1 = s * th.cos();
            if cand.domain.contains_unchecked(&embed(x1, r, cand.d)) {
                sup = sup.max(cand.w.value(x1, r)?);
            }
        }
        if sup.is_finite() {
            radii.push(s);
            sups.push(sup);
        }
    }
    let monotone = sups.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let fit = if radii.len() >= 6 && radii.iter().all(|&s| s < 1.0) {
        classify_growth(&radii, &sups).ok()
    } else {
        None
    };
    let scale = sups.first().copied().unwrap_or(0.0).abs();
    let tends_to_zero = monotone
        && matches!(fit.as_ref().map(|f| f.growth), Some(Growth::Converges { limit }) if limit.abs() <= 1e-6 * scale.max(f64::MIN_POSITIVE));
    Ok(LimitCheck {
        radii,
        sup_values: sups,
        monotone,
        fit,
        tends_to_zero,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperharmonicReport {
    pub p: f64,
    pub field: String,
    pub d: usize,
    pub annuli: Vec<AnnulusReport>,
    pub max_lw: f64,
    /// Number of annuli where some `Lw - error > 0`.
    pub violations: usize,
    pub superharmonic: bool,
    /// `|x|^{-p}` along the `x'` direction, classified as `|x| → 0`.
    pub blowup: GrowthFit,
    pub blows_up: bool,
    pub holds: bool,
}

/// Checks `L(|x|^{-p}) ≤ 0` on annuli of the half plane `r > 0` and the
/// blow-up of `|x|^{-p}` at the origin.
pub fn verify_superharmonic_blowup(
    p: f64,
    field: &LambdaField,
    d: usize,
    annuli: &[(f64, f64)],
    grid_density: usize,
) -> Result<SuperharmonicReport> {
    if !(p > 0.0) {
        return domain("the exponent p must be positive");
    }
    let w = InversePower { p };
    let reports: Vec<AnnulusReport> = annuli
        .iter()
        .map(|&a| check_annulus(&w, field, d, None, a, grid_density))
        .collect::<Result<_>>()?;
    let radii: Vec<f64> = (1..=30).map(|k| 0.5f64.powi(k)).collect();
    let vals: Vec<f64> = radii
        .iter()
        .map(|&s| w.value(0.0, s))
        .collect::<Result<_>>()?;
    let blowup = classify_growth(&radii, &vals)?;
    let violations = reports.iter().filter(|r| !r.lw_holds).count();
    let blows_up = blowup.growth == Growth::Diverges;
    Ok(SuperharmonicReport {
        p,
        field: field.describe(),
        d,
        max_lw: reports
            .iter()
            .map(|r| r.max_lw)
            .fold(f64::NEG_INFINITY, f64::max),
        violations,
        superharmonic: violations == 0,
        annuli: reports,
        blowup,
        blows_up,
        holds: violations == 0 && blows_up,
    })
}

/// Approach to the origin used to estimate liminfs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum ApproachPath {
    /// `(0, s)`
    Axis,
    /// `(s cos θ, s sin θ)`
    Ray { theta: f64 },
    /// `(s, r(s))` on the spine surface
    Spine,
    /// `(-s, r(s))` on the mirrored spine surface
    MirrorSpine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathClass {
    Interior,
    Boundary,
}

impl ApproachPath {
    pub fn class(&self) -> PathClass {
        match self {
            ApproachPath::Axis | ApproachPath::Ray { .. } => PathClass::Interior,
            ApproachPath::Spine | ApproachPath::MirrorSpine => PathClass::Boundary,
        }
    }

    fn point(&self, s: f64, profile: &SpineProfile) -> Result<(f64, f64)> {
        Ok(match *self {
            ApproachPath::Axis => (0.0, s),
            ApproachPath::Ray { theta } => (s * theta.cos(), s * theta.sin()),
            ApproachPath::Spine => (s, profile.eval(s)?),
            ApproachPath::MirrorSpine => (-s, profile.eval(s)?),
        })
    }

    /// Axis approach plus two interior rays, and the spine surface(s).
    pub fn defaults(domain: &CuspDomain) -> Vec<ApproachPath> {
        let mut v = vec![
            ApproachPath::Axis,
            ApproachPath::Ray {
                theta: 0.75 * std::f64::consts::PI,
            },
            ApproachPath::Ray {
                theta: 0.35 * std::f64::consts::PI,
            },
            ApproachPath::Spine,
        ];
        if domain.symmetric {
            v.push(ApproachPath::MirrorSpine);
        }
        v
    }
}

pub struct WitnessPair {
    pub u: Arc<dyn AxialFunction>,
    pub w: Arc<dyn AxialFunction>,
    pub field: LambdaField,
    pub d: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessConfig {
    /// Number of path samples `s_k = s₀ 2^{-k/2}`.
    pub samples: usize,
    /// First path parameter; defaults to a quarter of the ball radius.
    pub start: Option<f64>,
    /// Annuli for the `Lu ≤ 0`, `Lw ≤ 0` grid checks.
    pub annuli: Vec<(f64, f64)>,
    pub grid_density: usize,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            samples: 36,
            start: None,
            annuli: vec![(0.05, 0.1), (0.1, 0.2)],
            grid_density: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEstimate {
    pub path: ApproachPath,
    pub class: PathClass,
    pub params: Vec<f64>,
    pub u_values: Vec<f64>,
    pub limit: LimitEstimate,
    pub w_growth: Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub paths: Vec<PathEstimate>,
    pub alpha: f64,
    pub alpha_error: f64,
    pub beta: f64,
    pub beta_error: f64,
    /// `β - α`, `+∞` when `u` blows up along the boundary.
    pub gap: f64,
    pub w_blows_up: bool,
    pub lu: Vec<AnnulusReport>,
    pub lw: Vec<AnnulusReport>,
    pub valid: bool,
    pub failures: Vec<String>,
    pub note: String,
}

const MIN_LOG_RADIUS: f64 = -640.0;

const LIMIT_BASIS: [Basis; 3] = [Basis::One, Basis::Power(1.0), Basis::PowerLog(1.0)];

fn class_limit(paths: &[PathEstimate], class: PathClass) -> Result<Option<(f64, f64)>> {
    let est: Vec<&PathEstimate> = paths.iter().filter(|p| p.class == class).collect();
    if est.is_empty() {
        return Ok(None);
    }
    for (i, a) in est.iter().enumerate() {
        for b in &est[i + 1..] {
            let (va, vb) = (a.limit.value, b.limit.value);
            if va.is_infinite() && vb.is_infinite() {
                continue;
            }
            let tol = (10.0 * (a.limit.error + b.limit.error))
                .max(1e-3 * va.abs().max(vb.abs()).max(1.0));
            if !((va - vb).abs() <= tol) {
                return Err(Error::Inconclusive(format!(
                    "{class:?} liminf estimates disagree: {:?} gives {va}, {:?} gives {vb}",
                    a.path, b.path
                )));
            }
        }
    }
    let best = est
        .iter()
        .min_by(|a, b| a.limit.value.total_cmp(&b.limit.value))
        .expect("nonempty");
    Ok(Some((best.limit.value, best.limit.error)))
}

/// Estimates `α` (interior liminf of `u`) and `β` (boundary liminf) at the
/// origin along explicit paths and checks the witness hypotheses.
pub fn irregularity_witness(
    pair: &WitnessPair,
    domain: &CuspDomain,
    paths: &[ApproachPath],
    cfg: &WitnessConfig,
) -> Result<WitnessReport> {
    if cfg.samples < 8 {
        return Err(Error::Grid("witness paths need at least 8 samples".into()));
    }
    let s0 = cfg.start.unwrap_or(0.25 * domain.c);
    let params: Vec<f64> = (0..cfg.samples)
        .map(|k| s0 * 0.5f64.powf(0.5 * k as f64))
        .collect();
    let estimates: Vec<PathEstimate> = paths
        .iter()
        .map(|path| {
            // Boundary points stop where r(s) would underflow.
            let mut params = params.clone();
            if path.class() == PathClass::Boundary {
                let mut keep = Vec::with_capacity(params.len());
                for &s in &params {
                    if domain.profile.log_radius(s)? > MIN_LOG_RADIUS {
                        keep.push(s);
                    }
                }
                params = keep;
                if params.len() < 8 {
                    return Err(Error::Grid(format!(
                        "fewer than 8 representable points on {path:?}"
                    )));
                }
            }
            let pts: Vec<(f64, f64)> = params
                .iter()
                .map(|&s| path.point(s, &domain.profile))
                .collect::<Result<_>>()?;
            for &(x1, r) in &pts {
                let x = embed(x1, r, pair.d);
                let ok = match path.class() {
                    PathClass::Interior => domain.contains_unchecked(&x),
                    PathClass::Boundary => true,
                };
                if !ok {
                    return domain_err(path, x1, r);
                }
            }
            let u_values: Vec<f64> = pts
                .par_iter()
                .map(|&(x1, r)| pair.u.value(x1, r))
                .collect::<Vec<_>>()
                .into_iter()
                .collect::<Result<_>>()?;
            let w_values: Vec<f64> = pts
                .iter()
                .map(|&(x1, r)| pair.w.value(x1, r))
                .collect::<Result<_>>()?;
            let limit = estimate_limit(&params, &u_values, &LIMIT_BASIS)?;
            let w_growth = classify_growth(&params, &w_values)?.growth;
            Ok(PathEstimate {
                path: *path,
                class: path.class(),
                params,
                u_values,
                limit,
                w_growth,
            })
        })
        .collect::<Result<_>>()?;
    let interior = class_limit(&estimates, PathClass::Interior)?;
    let boundary = class_limit(&estimates, PathClass::Boundary)?;
    let (Some((alpha, alpha_error)), Some((beta, beta_error))) = (interior, boundary) else {
        return Err(Error::Config(
            "witness needs at least one interior and one boundary path".into(),
        ));
    };
    let lu: Vec<AnnulusReport> = cfg
        .annuli
        .iter()
        .map(|&a| {
            check_annulus(
                pair.u.as_ref(),
                &pair.field,
                pair.d,
                Some(domain),
                a,
                cfg.grid_density,
            )
        })
        .collect::<Result<_>>()?;
    let lw: Vec<AnnulusReport> = cfg
        .annuli
        .iter()
        .map(|&a| {
            check_annulus(
                pair.w.as_ref(),
                &pair.field,
                pair.d,
                Some(domain),
                a,
                cfg.grid_density,
            )
        })
        .collect::<Result<_>>()?;
    let gap = beta - alpha;
    let w_blows_up = estimates.iter().all(|e| e.w_growth == Growth::Diverges);
    let mut failures = Vec::new();
    if !(gap > alpha_error + beta_error) {
        failures.push(format!(
            "β > α fails: β = {beta} ± {beta_error}, α = {alpha} ± {alpha_error}"
        ));
    }
    if !w_blows_up {
        failures.push("w → ∞ fails along some path".into());
    }
    if !lu.iter().all(|r| r.lw_holds) {
        failures.push("Lu ≤ 0 fails on the grid".into());
    }
    if !lw.iter().all(|r| r.lw_holds) {
        failures.push("Lw ≤ 0 fails on the grid".into());
    }
    if !lu.iter().all(|r| r.min_w >= 0.0) {
        failures.push("u ≥ 0 fails on the grid".into());
    }
    if !lw.iter().all(|r| r.min_w >= 0.0) {
        failures.push("w ≥ 0 fails on the grid".into());
    }
    Ok(WitnessReport {
        valid: failures.is_empty(),
        paths: estimates,
        alpha,
        alpha_error,
        beta,
        beta_error,
        gap,
        w_blows_up,
        lu,
        lw,
        failures,
        note: GAP_NOTE.into(),
    })
}

fn domain_err<T>(path: &ApproachPath, x1: f64, r: f64) -> Result<T> {
    domain(format!(
        "interior path {path:?} leaves the domain at ({x1}, {r})"
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub x: f64,
    pub u_origin: f64,
    pub u1: f64,
    pub u2: f64,
    /// `(u(0,0) - u₂) / u₁`
    pub ratio_u1: f64,
    pub denominator: f64,
    /// `(u(0,0) - u₂) / D`
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub mu: f64,
    pub eta: f64,
    pub gamma: f64,
    pub d: usize,
    /// Exponent of `|ln x|` in `D`.
    pub denominator_exponent: f64,
    pub rows: Vec<RatioRow>,
    pub increasing: bool,
    pub liminf_estimate: f64,
    pub fit: Option<GrowthFit>,
    pub exceeds_one: bool,
}

/// Samples `(u(0,0) - u₂(x, r(x))) / D(x)` with `D = |ln x|^{η(μ-1)-γ}` for
/// `μ > 1` and `D = |ln x|^{-γ/2}` for `μ = 1`, together with the same
/// numerator over `u₁(x, r(x))`.
pub fn barrier_ratio_check(
    spec: &PotentialSpec,
    profile: &SpineProfile,
    d: usize,
    samples: &[f64],
    q: &QuadConfig,
) -> Result<RatioReport> {
    let Some(Preset::L71 { mu0: mu, gamma, .. }) = spec.preset() else {
        return domain("the ratio check needs the L71 preset");
    };
    let ProfileKind::LogPower { eta } = profile.kind else {
        return domain("the ratio check needs r(t) = |t| |ln|t||^{-η}");
    };
    if d < 4 || !(mu >= 1.0 && mu < d as f64 - 2.0) {
        return Err(Error::Hypothesis(format!(
            "needs d ≥ 4 and μ ∈ [1, d-2); got d = {d}, μ = {mu}"
        )));
    }
    if mu > 1.0 {
        if !(eta * (mu - 1.0) < 1.0 && eta * (d as f64 - 3.0) > 1.0) {
            return Err(Error::Hypothesis(format!(
                "η = {eta} outside η(μ-1) < 1 < η(d-3)"
            )));
        }
    } else if !(eta > 0.0 && gamma > 1.0 && gamma < 2.0) {
        return Err(Error::Hypothesis("μ = 1 needs η > 0 and γ ∈ (1, 2)".into()));
    }
    let exponent = if mu > 1.0 {
        eta * (mu - 1.0) - gamma
    } else {
        -0.5 * gamma
    };
    let u0 = spec.eval_u(0.0, 0.0, q)?.value;
    let rows: Vec<RatioRow> = samples
        .iter()
        .map(|&x| {
            let r = profile.eval(x)?;
            let (u1, u2) = spec.split_u(x, r, q)?;
            let num = u0 - u2.value;
            let denominator = x.ln().abs().powf(exponent);
            Ok(RatioRow {
                x,
                u_origin: u0,
                u1: u1.value,
                u2: u2.value,
                ratio_u1: num / u1.value,
                denominator,
                ratio: num / denominator,
            })
        })
        .collect::<Result<_>>()?;
    let increasing = rows
        .windows(2)
        .all(|w| (w[1].x < w[0].x) == (w[1].ratio > w[0].ratio));
    let liminf_estimate = rows
        .iter()
        .rev()
        .take(3)
        .map(|r| r.ratio)
        .fold(f64::INFINITY, f64::min);
    let fit = if rows.len() >= 6 && rows.iter().all(|r| r.x < 1.0) {
        classify_growth(
            &rows.iter().map(|r| r.x).collect::<Vec<_>>(),
            &rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
        )
        .ok()
    } else {
        None
    };
    Ok(RatioReport {
        mu,
        eta,
        gamma,
        d,
        denominator_exponent: exponent,
        exceeds_one: liminf_estimate > 1.0,
        rows,
        increasing,
        liminf_estimate,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_power_is_harmonic_in_three_dimensions() {
        let f = LambdaField::constant(1.0).unwrap();
        let (lw, err) = axial_lw(&InversePower { p: 1.0 }, &f, 3, 0.3, 0.2).unwrap();
        assert!(lw.abs() <= err.max(1e-12), "{lw} {err}");
    }

    #[test]
    fn finite_differences_match_closed_form() {
        let c = CustomAxial {
            label: "r^0.6".into(),
            f: Arc::new(|_, r: f64| r.powf(0.6)),
        };
        let fd = fd_derivatives(&c, 0.1, 0.3).unwrap();
        let an = RadialPower { a: 0.6 }
            .derivatives(0.1, 0.3)
            .unwrap()
            .unwrap();
        assert!((fd.v_rr - an.v_rr).abs() < 1e-6 && (fd.v_r - an.v_r).abs() < 1e-8);
        assert!(fd.v_x1x1.abs() < 1e-6);
    }
}
