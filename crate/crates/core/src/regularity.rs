//! Integral regularity tests for the Laplacian at the spine tip, Dini-type
//! tests, and the blow-up check for potentials along the spine.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{Function1D, ProfileKind, SpineProfile};
use crate::limits::{classify_growth, Growth, GrowthFit, ModelFit};
use crate::potentials::PotentialSpec;
use crate::quadrature::{integrate, QuadConfig};

/// Samples before this index are excluded from growth fits.
const FIT_START: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Regular,
    Irregular,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub verdict: Verdict,
    pub integrand: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    /// Final verdict: the probe's when conclusive, else the closed form's.
    pub verdict: Verdict,
    pub probe_verdict: Verdict,
    /// `(δ, ∫_δ^c integrand)` pairs.
    pub evidence: Vec<(f64, f64)>,
    pub fitted_model: Option<ModelFit>,
    pub rival_model: Option<ModelFit>,
    pub closed_form: Option<ClosedForm>,
    /// Probe and closed form agree (true when there is no closed form).
    pub agrees_with_closed_form: bool,
}

/// `δ_k = c 2^{-k}`, `k = 1..=40`.
pub fn default_probe(c: f64) -> Vec<f64> {
    (1..=40).map(|k| c * 0.5f64.powi(k)).collect()
}

/// Partial integrals `∫_{δ_k}^{c} f(x) dx` with `f` given as `x f(x)` in the
/// variable `L = ln(1/x)`.
fn partial_integrals<F: Fn(f64) -> f64>(
    xf: F,
    c: f64,
    probe: &[f64],
    q: &QuadConfig,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(probe.len());
    let mut acc = 0.0;
    let mut upper = c;
    for &d in probe {
        if !(d > 0.0 && d < upper) {
            return Err(Error::Grid(
                "probe must decrease strictly inside (0, c)".into(),
            ));
        }
        let g = |l: f64| xf((-l).exp().max(f64::MIN_POSITIVE));
        acc += integrate(g, -upper.ln(), -d.ln(), q)?.value;
        out.push(acc);
        upper = d;
    }
    Ok(out)
}

fn verdict_from_growth(g: &Growth, divergent_is: Verdict, convergent_is: Verdict) -> Verdict {
    match g {
        Growth::Diverges => divergent_is,
        Growth::Converges { .. } => convergent_is,
        Growth::Inconclusive => Verdict::Inconclusive,
    }
}

fn fit_tail(probe: &[f64], values: &[f64]) -> Result<GrowthFit> {
    let start = FIT_START.min(probe.len().saturating_sub(6));
    classify_growth(&probe[start..], &values[start..])
}

/// Closed-form classification for catalog profiles.
pub fn ito_mckean_closed_form(profile: &SpineProfile, d: usize) -> Option<ClosedForm> {
    use Verdict::*;
    let dd = d as f64 - 3.0;
    let cf = |v: Verdict, s: String| {
        Some(ClosedForm {
            verdict: v,
            integrand: s,
        })
    };
    match (&profile.kind, d) {
        (ProfileKind::Power { eta }, 3) if *eta > 1.0 => {
            cf(Regular, format!("1/(({}) x |ln x|), ∫ = ∞", eta - 1.0))
        }
        (ProfileKind::Power { eta }, _) if d >= 4 && *eta > 1.0 => {
            cf(Irregular, format!("x^({}) / x, ∫ < ∞", (eta - 1.0) * dd))
        }
        (ProfileKind::ExpSpine { eps }, 3) => cf(Irregular, format!("1/({eps} + x|ln x|), ∫ < ∞")),
        (ProfileKind::ExpSpine { .. }, _) => cf(Irregular, "e^(-(d-3)ε/x)/x, ∫ < ∞".into()),
        (ProfileKind::LogPower { eta }, 3) => cf(Regular, format!("1/({eta} x ln|ln x|), ∫ = ∞")),
        (ProfileKind::LogPower { eta }, _) => {
            let s = eta * dd;
            let v = if s > 1.0 { Irregular } else { Regular };
            cf(
                v,
                format!("1/(x |ln x|^{s}), ∫ {} ∞", if s > 1.0 { "<" } else { "=" }),
            )
        }
        (ProfileKind::IterLogPower { .. } | ProfileKind::DMinus3LogLog { .. }, _) => {
            let p = match profile.kind {
                ProfileKind::IterLogPower { p } => p,
                ProfileKind::DMinus3LogLog { d } => 1.0 / (d as f64 - 3.0),
                _ => unreachable!(),
            };
            if d == 3 {
                cf(Regular, format!("1/({p} x (ln|ln x| + lnln|ln x|)), ∫ = ∞"))
            } else {
                let s = p * dd;
                let v = if s > 1.0 { Irregular } else { Regular };
                cf(
                    v,
                    format!(
                        "1/(x (|ln x| ln|ln x|)^{s}), ∫ {} ∞",
                        if s > 1.0 { "<" } else { "=" }
                    ),
                )
            }
        }
        (ProfileKind::PowerIterLog, 3) => cf(Regular, "1/(x |ln x| ln|ln x|), ∫ = ∞".into()),
        (ProfileKind::PowerIterLog, _) => cf(Irregular, "x^((d-3) ln|ln x|)/x, ∫ < ∞".into()),
        _ => None,
    }
}

/// Classifies the spine tip for the Laplacian in dimension `d` by the
/// divergence (regular) or convergence (irregular) of
/// `∫₀ dx / (x |ln(r(x)/x)|)` for `d = 3` and `∫₀ (r(x)/x)^{d-3} dx/x` for
/// `d ≥ 4`.
pub fn ito_mckean_test(
    profile: &SpineProfile,
    d: usize,
    probe: &[f64],
    q: &QuadConfig,
) -> Result<RegularityVerdict> {
    if d < 3 {
        return domain("the test needs d ≥ 3");
    }
    if probe.len() < 10 {
        return Err(Error::Grid("probe needs at least 10 points".into()));
    }
    let c = profile.c;
    if d == 3 {
        let lo = probe[probe.len() - 1].min(probe[0]);
        let n = 10_000;
        for i in 0..n {
            let x = c * (lo / c).powf(i as f64 / (n - 1) as f64);
            if profile.log_radius(x)? >= x.ln() {
                return domain(format!(
                    "r(x) ≥ x at x = {x:e}; the d = 3 integrand is undefined"
                ));
            }
        }
    }
    let xf = |x: f64| -> f64 {
        let lr = profile.log_radius(x).unwrap_or(f64::NEG_INFINITY);
        let lratio = lr - x.ln();
        if d == 3 {
            1.0 / lratio.abs()
        } else {
            ((d as f64 - 3.0) * lratio).exp()
        }
    };
    let values = partial_integrals(xf, c, probe, q)?;
    let fit = fit_tail(probe, &values)?;
    let probe_verdict = verdict_from_growth(&fit.growth, Verdict::Regular, Verdict::Irregular);
    let closed_form = ito_mckean_closed_form(profile, d);
    finish(probe, values, fit, probe_verdict, closed_form)
}

fn finish(
    probe: &[f64],
    values: Vec<f64>,
    fit: GrowthFit,
    probe_verdict: Verdict,
    closed_form: Option<ClosedForm>,
) -> Result<RegularityVerdict> {
    let agrees = closed_form
        .as_ref()
        .is_none_or(|c| c.verdict == probe_verdict);
    let verdict = match (probe_verdict, &closed_form) {
        (Verdict::Inconclusive, Some(c)) => c.verdict,
        (v, _) => v,
    };
    Ok(RegularityVerdict {
        verdict,
        probe_verdict,
        evidence: probe.iter().copied().zip(values).collect(),
        fitted_model: Some(fit.best),
        rival_model: fit.rival,
        closed_form,
        agrees_with_closed_form: agrees,
    })
}

/// Moduli of continuity with known Dini behavior.
#[derive(Debug, Clone)]
pub enum Modulus {
    /// `φ(t) = t`
    Linear,
    /// `φ(t) = 1/|ln t|`
    InverseLog,
    /// `φ(t) = 1/ln|ln t|`
    InverseLogLog,
    Custom(Function1D),
}

impl Modulus {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Modulus::Linear => t,
            Modulus::InverseLog => 1.0 / t.ln().abs(),
            Modulus::InverseLogLog => 1.0 / t.ln().abs().ln(),
            Modulus::Custom(f) => f.call(t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Modulus::Linear => "t",
            Modulus::InverseLog => "1/|ln t|",
            Modulus::InverseLogLog => "1/ln|ln t|",
            Modulus::Custom(_) => "custom",
        }
    }

    fn closed_form(&self, weighted: bool) -> Option<DiniClass> {
        Some(match (self, weighted) {
            (Modulus::Linear, _) => DiniClass::Satisfied,
            (Modulus::InverseLog, false) => DiniClass::Violated,
            (Modulus::InverseLog, true) => DiniClass::Satisfied,
            (Modulus::InverseLogLog, _) => DiniClass::Violated,
            (Modulus::Custom(_), _) => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiniClass {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiniVerdict {
    pub class: DiniClass,
    pub probe_class: DiniClass,
    pub closed_form: Option<DiniClass>,
    pub weighted: bool,
    pub evidence: Vec<(f64, f64)>,
    pub fitted_model: Option<ModelFit>,
    pub rival_model: Option<ModelFit>,
}

/// Convergence of `∫₀^c φ(t)/t dt` (or `∫₀^c φ(t)/(t|ln t|) dt` when
/// `weighted`).
pub fn dini_test(
    phi: &Modulus,
    c: f64,
    weighted: bool,
    probe: &[f64],
    q: &QuadConfig,
) -> Result<DiniVerdict> {
    if !(c > 0.0 && c < 1.0) {
        return domain("Dini test needs c ∈ (0, 1)");
    }
    for i in 0..200 {
        let t = c * 0.9f64.powi(i);
        let v = phi.eval(t);
        if !(v >= 0.0) {
            return domain(format!(
                "modulus is negative or undefined at t = {t:e}: {v}"
            ));
        }
    }
    let xf = |t: f64| {
        let v = phi.eval(t);
        if weighted {
            v / t.ln().abs()
        } else {
            v
        }
    };
    let values = partial_integrals(xf, c, probe, q)?;
    let fit = fit_tail(probe, &values)?;
    let probe_class = match fit.growth {
        Growth::Diverges => DiniClass::Violated,
        Growth::Converges { .. } => DiniClass::Satisfied,
        Growth::Inconclusive => DiniClass::Inconclusive,
    };
    let closed_form = phi.closed_form(weighted);
    let class = match (probe_class, closed_form) {
        (DiniClass::Inconclusive, Some(c)) => c,
        (p, _) => p,
    };
    Ok(DiniVerdict {
        class,
        probe_class,
        closed_form,
        weighted,
        evidence: probe.iter().copied().zip(values).collect(),
        fitted_model: Some(fit.best),
        rival_model: fit.rival,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaDiniRow {
    pub x: f64,
    /// `|ω(x, x) - ω(0, 0)|`
    pub deviation: f64,
    /// `(μ(x/2) - μ(0)) / 3`
    pub lower_bound: f64,
    pub holds: bool,
}

fn check_monotone(spec: &PotentialSpec, c: f64) -> Result<()> {
    let n = 10_000;
    let grid: Vec<f64> = (0..n)
        .map(|i| c * (1e-12f64).powf(i as f64 / (n - 1) as f64))
        .collect();
    // grid decreases from c
    for w in grid.windows(2) {
        let (hi, lo) = (w[0], w[1]);
        let tol = 1e-12;
        if spec.mu(lo) > spec.mu(hi) * (1.0 + tol) {
            return Err(Error::Hypothesis(format!(
                "μ decreases between {lo:e} and {hi:e}"
            )));
        }
        if spec.h(lo) < spec.h(hi) * (1.0 - tol) {
            return Err(Error::Hypothesis(format!(
                "h increases between {lo:e} and {hi:e}"
            )));
        }
    }
    Ok(())
}

/// Rows of the inequality `|ω(x, x) - ω(0, 0)| ≥ (μ(x/2) - μ(0))/3`.
pub fn omega_dini_witness(
    spec: &PotentialSpec,
    samples: &[f64],
    q: &QuadConfig,
) -> Result<Vec<OmegaDiniRow>> {
    if (spec.b + spec.c).abs() > 0.0 || spec.c >= 1.0 {
        return Err(Error::Hypothesis("needs b = -c and c < 1".into()));
    }
    check_monotone(spec, spec.c)?;
    for i in 1..2000 {
        let t = spec.c * i as f64 / 2000.0;
        if (spec.mu(t) - spec.mu(-t)).abs() > 0.0 || (spec.h(t) - spec.h(-t)).abs() > 0.0 {
            return Err(Error::Hypothesis(format!("μ or h is not even at t = {t}")));
        }
        let t2 = spec.c * (i + 1) as f64 / 2000.0;
        let w = |s: f64| spec.mu(s) * s.ln() + spec.h(s).ln();
        if w(t2) < w(t) {
            return Err(Error::Hypothesis(format!(
                "t^μ h is not increasing near t = {t}"
            )));
        }
    }
    let w0 = spec.eval_omega(0.0, 0.0, q)?;
    let mu0 = spec.mu_at_zero();
    samples
        .iter()
        .map(|&x| {
            if !(x > 0.0 && x <= spec.c) {
                return domain(format!("sample x = {x} outside (0, c]"));
            }
            let (k1, k2) = spec.kernels(x, x, q)?;
            let w = k1.value / k2.value;
            let err = w.abs() * (k1.error / k1.value.abs() + k2.error / k2.value.abs());
            let deviation = (w - w0).abs();
            let lower_bound = (spec.mu(x / 2.0) - mu0) / 3.0;
            Ok(OmegaDiniRow {
                x,
                deviation,
                lower_bound,
                holds: deviation + err >= lower_bound,
            })
        })
        .collect()
}

/// Growth of `∫_δ^{c} (μ(x/2) - μ(0)) / (3x) dx` as `δ → 0`; divergence
/// rules out a Dini modulus for `ω`.
pub fn omega_dini_divergence(spec: &PotentialSpec, q: &QuadConfig) -> Result<GrowthFit> {
    let c = spec.c;
    let probe = default_probe(c);
    let mu0 = spec.mu_at_zero();
    let values = partial_integrals(|x| (spec.mu(x / 2.0) - mu0) / 3.0, c, &probe, q)?;
    fit_tail(&probe, &values)
}

/// Admissible `α` for the `d ≥ 4` construction: `(1, ((d-2)/ε - 1)/(d-3))`.
pub fn t21_alpha_window(eps: f64, d: usize) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < 1.0) || d < 4 {
        return domain("α window needs ε ∈ (0, 1) and d ≥ 4");
    }
    Ok((1.0, ((d as f64 - 2.0) / eps - 1.0) / (d as f64 - 3.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupSample {
    pub x: f64,
    pub r: f64,
    pub u: f64,
    pub u_error: f64,
    pub lower_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    /// `(x, (μ(x) - 1) ln(r(x)/x))`
    pub log_ratio_condition: Vec<(f64, f64)>,
    /// Largest tail value of the log-ratio quantity; negative is required.
    pub log_ratio_limsup: f64,
    pub log_ratio_holds: bool,
    /// `(x, ln Q(x))` with `Q = r (x/r)^μ h(2x) / (μ - 1)`.
    pub growth_quantity: Vec<(f64, f64)>,
    pub growth_fit: GrowthFit,
    /// Known divergence of `Q` for catalog preset and profile pairs.
    pub closed_form_diverges: Option<bool>,
    /// The closed form when known, else the fit's verdict.
    pub growth_diverges: bool,
    /// False when a conclusive fit contradicts the closed form.
    pub probe_agrees: bool,
    pub samples: Vec<BlowupSample>,
    /// `u(0, 0)`, the limit of `u(0, r)` as `r → 0`.
    pub u_origin: f64,
    pub bounds_hold: bool,
}

/// Whether `Q = r (x/r)^μ h(2x) / (μ - 1)` diverges as `x → 0`, for the
/// catalog pairs where this is known in closed form.
///
/// Some of these diverge like iterated logarithms of `1/x` and cannot be
/// told apart from convergence inside double precision.
pub fn blowup_closed_form(spec: &PotentialSpec, profile: &SpineProfile) -> Option<bool> {
    use crate::potentials::Preset;
    let preset = spec.preset()?;
    match (preset, &profile.kind) {
        (Preset::T21D3 { eps }, ProfileKind::Power { eta }) => Some(eta + (1.0 - eta) / eps < 0.0),
        (Preset::Pilot { mu }, ProfileKind::Power { eta }) if mu > 1.0 => {
            Some(eta + mu * (1.0 - eta) < 0.0)
        }
        (Preset::L71 { mu0, .. }, ProfileKind::Power { eta }) if mu0 > 1.0 => {
            Some((mu0 - 1.0) * (1.0 - eta) < 0.0)
        }
        (
            Preset::T21D3 { .. } | Preset::Pilot { .. } | Preset::L71 { .. },
            ProfileKind::ExpSpine { .. },
        ) => Some(spec.mu_at_zero() > 1.0),
        (Preset::T23D3 { .. }, ProfileKind::PowerIterLog) => Some(true),
        (Preset::T21Dge4 { eps, alpha, d, .. }, ProfileKind::LogPower { eta }) => {
            Some(eta * ((d as f64 - 2.0) / eps - 1.0) - alpha > 0.0)
        }
        (Preset::T23Dge4 { d, .. }, _) => {
            let p = match profile.kind {
                ProfileKind::IterLogPower { p } => p,
                ProfileKind::DMinus3LogLog { d } => 1.0 / (d as f64 - 3.0),
                _ => return None,
            };
            ((p * (d as f64 - 3.0) - 1.0).abs() <= 1e-12).then_some(true)
        }
        _ => None,
    }
}

/// Verifies the hypotheses and conclusion of the blow-up lemma along the
/// spine `r = profile`.
pub fn blowup_check(
    spec: &PotentialSpec,
    profile: &SpineProfile,
    samples: &[f64],
    q: &QuadConfig,
) -> Result<BlowupReport> {
    let c = spec.c.min(profile.c);
    check_monotone(spec, c)?;
    for i in 0..10_000 {
        let t = c * (1e-12f64).powf(i as f64 / 9999.0);
        if !(spec.mu(t) > 1.0) {
            return Err(Error::Hypothesis(format!("μ ≤ 1 at t = {t:e}")));
        }
    }
    for &x in samples {
        if !(x > 0.0 && x <= c) {
            return domain(format!("sample x = {x} outside (0, {c}]"));
        }
        if profile.eval(x)? > 0.5 * x {
            return Err(Error::Hypothesis(format!("r(x) > x/2 at sample x = {x:e}")));
        }
    }
    let ln_q = |x: f64| -> Result<(f64, f64)> {
        let lr = profile.log_radius(x)?;
        let mu = spec.mu(x);
        let lx = x.ln();
        let cond = (mu - 1.0) * (lr - lx);
        let lh = spec.h(2.0 * x).ln();
        Ok((cond, lr + mu * (lx - lr) + lh - (mu - 1.0).ln()))
    };
    // Log-spaced grid well below c for the growth classification.
    let l_lo = -c.ln() + 1.0;
    let l_hi = 690.0f64.max(l_lo + 40.0);
    let n = 40;
    let mut grid = Vec::with_capacity(n);
    let mut cond_vals = Vec::with_capacity(n);
    let mut q_vals = Vec::with_capacity(n);
    for i in 0..n {
        let l = l_lo + (l_hi - l_lo) * i as f64 / (n - 1) as f64;
        let x = (-l).exp();
        if x <= 0.0 {
            break;
        }
        let (cv, qv) = ln_q(x)?;
        grid.push(x);
        cond_vals.push((x, cv));
        q_vals.push(qv);
    }
    let growth_fit = classify_growth(&grid, &q_vals)?;
    let closed = blowup_closed_form(spec, profile);
    let probe_diverges = match growth_fit.growth {
        Growth::Diverges => Some(true),
        Growth::Converges { .. } => Some(false),
        Growth::Inconclusive => None,
    };
    let probe_agrees = closed.is_none() || probe_diverges.is_none() || probe_diverges == closed;
    let growth_diverges = closed.or(probe_diverges).unwrap_or(false);
    let tail = &cond_vals[cond_vals.len() / 2..];
    let limsup = tail.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let delta2 = 2f64.powf(-spec.mu(c));
    let samples_out: Vec<BlowupSample> = samples
        .iter()
        .map(|&x| {
            let r = profile.eval(x)?;
            let u = spec.eval_u(x, r, q)?;
            let mu = spec.mu(x);
            let (_, lq) = ln_q(x)?;
            let bracket = 1.0 - (r / x).powf(mu - 1.0);
            let lower_bound = delta2 * lq.exp() * bracket;
            Ok(BlowupSample {
                x,
                r,
                u: u.value,
                u_error: u.error,
                lower_bound,
                holds: u.value + u.error >= lower_bound,
            })
        })
        .collect::<Result<_>>()?;
    let u_origin = spec.eval_u(0.0, 0.0, q)?.value;
    Ok(BlowupReport {
        log_ratio_condition: cond_vals,
        log_ratio_limsup: limsup,
        log_ratio_holds: limsup < 0.0,
        growth_quantity: grid.iter().copied().zip(q_vals).collect(),
        growth_diverges,
        probe_agrees,
        closed_form_diverges: closed,
        growth_fit,
        bounds_hold: samples_out.iter().all(|s| s.holds),
        samples: samples_out,
        u_origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_window_examples() {
        assert_eq!(t21_alpha_window(0.5, 4).unwrap(), (1.0, 3.0));
        let (_, hi) = t21_alpha_window(0.9, 5).unwrap();
        assert!((hi - (3.0 / 0.9 - 1.0) / 2.0).abs() < 1e-15);
        assert!(t21_alpha_window(0.5, 3).is_err());
    }

    #[test]
    fn closed_forms_cover_catalog() {
        let p = SpineProfile::new(ProfileKind::Power { eta: 2.0 }, 1.0).unwrap();
        assert_eq!(
            ito_mckean_closed_form(&p, 3).unwrap().verdict,
            Verdict::Regular
        );
        assert_eq!(
            ito_mckean_closed_form(&p, 4).unwrap().verdict,
            Verdict::Irregular
        );
    }
}
