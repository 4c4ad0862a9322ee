//! Limit extrapolation and growth-model classification for sequences
//! sampled as a parameter tends to zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual ratio required between the best model and the best model of the
/// opposite class before a growth classification is accepted.
pub const MODEL_MARGIN: f64 = 10.0;

/// Term of an extrapolation basis in the small parameter `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Basis {
    One,
    /// `h^p`
    Power(f64),
    /// `h^p ln h`
    PowerLog(f64),
}

impl Basis {
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            Basis::One => 1.0,
            Basis::Power(p) => h.powf(p),
            Basis::PowerLog(p) => h.powf(p) * h.ln(),
        }
    }
}

/// How a limit estimate is supported by the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    /// Tail increments shrink geometrically.
    Cauchy,
    /// Tail is monotone but increments do not shrink fast enough to certify.
    Monotone,
    /// Partial sums grow without bound under the fitted model.
    Divergent,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub value: f64,
    pub error: f64,
    pub certificate: Certificate,
    /// Raw values at the smallest parameters, most refined last.
    pub tail: Vec<f64>,
}

impl LimitEstimate {
    pub fn is_divergent(&self) -> bool {
        self.certificate == Certificate::Divergent
    }
}

fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = rows.len();
    let m = rows[0].len();
    let a = DMatrix::from_fn(n, m, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    // Column scaling keeps the SVD well conditioned for mixed-magnitude bases.
    let scales: Vec<f64> = (0..m)
        .map(|j| a.column(j).amax().max(f64::MIN_POSITIVE))
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = scaled.svd(true, true);
    let coef = svd
        .solve(&b, 1e-13)
        .map_err(|e| Error::Grid(format!("least squares failed: {e}")))?;
    let coef: Vec<f64> = coef.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let fitted = &a * DVector::from_column_slice(&coef);
    let rms = ((&fitted - &b).norm_squared() / n as f64).sqrt();
    Ok((coef, rms))
}

/// Fits `values ≈ Σ c_j basis_j(h)` on a trailing window and returns the
/// constant coefficient. `params` must decrease toward zero.
pub fn extrapolate(params: &[f64], values: &[f64], basis: &[Basis]) -> Result<LimitEstimate> {
    let n = params.len();
    if n != values.len() {
        return Err(Error::Grid("parameter and value lengths differ".into()));
    }
    let m = basis.len();
    if n < m + 1 {
        return Err(Error::Grid(format!(
            "need at least {} samples, got {n}",
            m + 1
        )));
    }
    if !basis.contains(&Basis::One) {
        return Err(Error::Config(
            "extrapolation basis must contain a constant".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Grid(
            "non-finite sample in extrapolation input".into(),
        ));
    }
    let constant_index = basis.iter().position(|b| *b == Basis::One).unwrap_or(0);
    let fit = |lo: usize, hi: usize| -> Result<f64> {
        let rows: Vec<Vec<f64>> = params[lo..hi]
            .iter()
            .map(|&h| basis.iter().map(|b| b.eval(h)).collect())
            .collect();
        let (coef, _) = least_squares(&rows, &values[lo..hi])?;
        Ok(coef[constant_index])
    };
    let w = (m + 2).min(n);
    let v1 = fit(n - w, n)?;
    let v2 = if n > w {
        fit(n - w - 1, n - 1)?
    } else {
        fit(n - w, n - 1).unwrap_or(v1)
    };
    let error = (v1 - v2).abs();
    Ok(LimitEstimate {
        value: v1,
        error,
        certificate: tail_certificate(values),
        tail: values[n.saturating_sub(4)..].to_vec(),
    })
}

fn tail_certificate(values: &[f64]) -> Certificate {
    let n = values.len();
    if n < 4 {
        return Certificate::None;
    }
    let diffs: Vec<f64> = values[n - 4..].windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);
    let shrinking = diffs
        .windows(2)
        .all(|w| w[1].abs() <= 0.9 * w[0].abs() || w[1] == 0.0);
    match (monotone, shrinking) {
        (_, true) => Certificate::Cauchy,
        (true, false) => Certificate::Monotone,
        _ => Certificate::None,
    }
}

/// Model families used to classify how `F(δ)` behaves as `δ → 0`, with
/// `L = ln(1/δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthFamily {
    /// `A + B L^q`
    LogPower,
    /// `A + B ln L`
    LogLog,
    /// `A + B ln ln L`
    LogLogLog,
    /// `A + B δ^{-p}`
    InversePower,
    /// `A + B (ln L)^q`
    IteratedLogPower,
    /// `A + B δ^p`
    PowerApproach,
    /// `A + B L^{-q}`
    LogApproach,
    /// `A + B (ln L)^{-q}`
    IteratedLogApproach,
    /// `A`
    Constant,
}

impl GrowthFamily {
    pub fn divergent(&self) -> bool {
        matches!(
            self,
            GrowthFamily::LogPower
                | GrowthFamily::LogLog
                | GrowthFamily::LogLogLog
                | GrowthFamily::InversePower
                | GrowthFamily::IteratedLogPower
        )
    }

    fn exponent_range(&self) -> Option<(f64, f64)> {
        match self {
            GrowthFamily::LogPower
            | GrowthFamily::IteratedLogPower
            | GrowthFamily::LogApproach
            | GrowthFamily::IteratedLogApproach => Some((0.1, 4.0)),
            GrowthFamily::InversePower | GrowthFamily::PowerApproach => Some((0.05, 4.0)),
            _ => None,
        }
    }

    fn feature(&self, delta: f64, q: f64) -> f64 {
        let l = -delta.ln();
        match self {
            GrowthFamily::LogPower => l.powf(q),
            GrowthFamily::LogLog => l.ln(),
            GrowthFamily::LogLogLog => l.ln().ln(),
            GrowthFamily::InversePower => delta.powf(-q),
            GrowthFamily::IteratedLogPower => l.ln().powf(q),
            GrowthFamily::PowerApproach => delta.powf(q),
            GrowthFamily::LogApproach => l.powf(-q),
            GrowthFamily::IteratedLogApproach => l.ln().powf(-q),
            GrowthFamily::Constant => 0.0,
        }
    }

    pub fn describe(&self, a: f64, b: f64, q: f64) -> String {
        let s = match self {
            GrowthFamily::LogPower => format!("L^{q:.4}"),
            GrowthFamily::LogLog => "ln L".to_string(),
            GrowthFamily::LogLogLog => "ln ln L".to_string(),
            GrowthFamily::InversePower => format!("δ^-{q:.4}"),
            GrowthFamily::IteratedLogPower => format!("(ln L)^{q:.4}"),
            GrowthFamily::PowerApproach => format!("δ^{q:.4}"),
            GrowthFamily::LogApproach => format!("L^-{q:.4}"),
            GrowthFamily::IteratedLogApproach => format!("(ln L)^-{q:.4}"),
            GrowthFamily::Constant => return format!("{a:.6e}"),
        };
        format!("{a:.6e} + {b:.6e}·{s}, L = ln(1/δ)")
    }

    pub const ALL: [GrowthFamily; 8] = [
        GrowthFamily::LogPower,
        GrowthFamily::LogLog,
        GrowthFamily::LogLogLog,
        GrowthFamily::InversePower,
        GrowthFamily::IteratedLogPower,
        GrowthFamily::PowerApproach,
        GrowthFamily::LogApproach,
        GrowthFamily::IteratedLogApproach,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub family: GrowthFamily,
    pub exponent: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub rms: f64,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Growth {
    Converges { limit: f64 },
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub growth: Growth,
    pub best: ModelFit,
    /// Best fit among models of the opposite class, if any was admissible.
    pub rival: Option<ModelFit>,
}

fn fit_two(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len() as f64;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(u, v)| (a + b * u - v).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    rms.is_finite().then_some((a, b, rms))
}

fn fit_family(family: GrowthFamily, deltas: &[f64], y: &[f64]) -> Option<ModelFit> {
    let eval = |q: f64| -> Option<(f64, f64, f64)> {
        let x: Vec<f64> = deltas.iter().map(|&d| family.feature(d, q)).collect();
        let (a, b, rms) = fit_two(&x, y)?;
        if family.divergent() && b <= 0.0 {
            return None;
        }
        Some((a, b, rms))
    };
    let build = |q: Option<f64>, (a, b, rms): (f64, f64, f64)| ModelFit {
        family,
        exponent: q,
        a,
        b,
        rms,
        description: family.describe(a, b, q.unwrap_or(0.0)),
    };
    let Some((lo, hi)) = family.exponent_range() else {
        return eval(0.0).map(|r| build(None, r));
    };
    let cost = |s: f64| eval(s.exp()).map(|r| r.2).unwrap_or(f64::INFINITY);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let grid = 48;
    let mut best_i = None;
    let mut best_c = f64::INFINITY;
    for i in 0..=grid {
        let s = llo + (lhi - llo) * i as f64 / grid as f64;
        let c = cost(s);
        if c < best_c {
            best_c = c;
            best_i = Some(i);
        }
    }
    let i = best_i?;
    let step = (lhi - llo) / grid as f64;
    let (mut a, mut b) = (
        (llo + step * (i as f64 - 1.0)).max(llo),
        (llo + step * (i as f64 + 1.0)).min(lhi),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = cost(d);
        }
    }
    let s_best = if fc < fd { c } else { d };
    let s_final = if cost(s_best) <= best_c {
        s_best
    } else {
        llo + step * i as f64
    };
    let q = s_final.exp();
    eval(q).map(|r| build(Some(q), r))
}

/// Classifies whether `values[k] = F(deltas[k])` converges or diverges to
/// `+∞` as `δ → 0`. `deltas` must lie in `(0, 1)`.
pub fn classify_growth(deltas: &[f64], values: &[f64]) -> Result<GrowthFit> {
    if deltas.len() != values.len() || deltas.len() < 6 {
        return Err(Error::Grid("need at least six matched samples".into()));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::Grid("growth parameters must lie in (0, 1)".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Grid("non-finite sample in growth input".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-13 * mean.abs().max(1.0) {
        let best = ModelFit {
            family: GrowthFamily::Constant,
            exponent: None,
            a: mean,
            b: 0.0,
            rms: spread,
            description: GrowthFamily::Constant.describe(mean, 0.0, 0.0),
        };
        return Ok(GrowthFit {
            growth: Growth::Converges { limit: mean },
            best,
            rival: None,
        });
    }
    let fits: Vec<ModelFit> = GrowthFamily::ALL
        .iter()
        .filter_map(|&f| fit_family(f, deltas, values))
        .collect();
    let pick = |div: bool| {
        fits.iter()
            .filter(|f| f.family.divergent() == div)
            .min_by(|a, b| a.rms.total_cmp(&b.rms))
            .cloned()
    };
    let best = fits
        .iter()
        .min_by(|a, b| a.rms.total_cmp(&b.rms))
        .cloned()
        .ok_or_else(|| Error::Grid("no growth model could be fitted".into()))?;
    let rival = pick(!best.family.divergent());
    let decisive = match &rival {
        None => true,
        Some(r) => r.rms >= MODEL_MARGIN * best.rms,
    };
    let growth = if !decisive {
        Growth::Inconclusive
    } else if best.family.divergent() {
        Growth::Diverges
    } else {
        Growth::Converges { limit: best.a }
    };
    Ok(GrowthFit {
        growth,
        best,
        rival,
    })
}

/// Estimates `lim F(h)` as `h → 0`: reports divergence when the growth
/// classifier says so, otherwise extrapolates with `basis`.
pub fn estimate_limit(params: &[f64], values: &[f64], basis: &[Basis]) -> Result<LimitEstimate> {
    let small: Vec<(f64, f64)> = params
        .iter()
        .zip(values)
        .filter(|(h, _)| **h > 0.0 && **h < 1.0)
        .map(|(h, v)| (*h, *v))
        .collect();
    if small.len() >= 6 {
        let (hs, vs): (Vec<f64>, Vec<f64>) = small.into_iter().unzip();
        if let Ok(fit) = classify_growth(&hs, &vs) {
            if fit.growth == Growth::Diverges {
                let n = values.len();
                return Ok(LimitEstimate {
                    value: f64::INFINITY,
                    error: 0.0,
                    certificate: Certificate::Divergent,
                    tail: values[n.saturating_sub(4)..].to_vec(),
                });
            }
        }
    }
    extrapolate(params, values, basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deltas() -> Vec<f64> {
        (5..=40).map(|k| 0.5f64.powi(k)).collect()
    }

    fn classify(f: impl Fn(f64) -> f64) -> Growth {
        let d = deltas();
        let v: Vec<f64> = d.iter().map(|&x| f(x)).collect();
        classify_growth(&d, &v).unwrap().growth
    }

    #[test]
    fn divergent_models_are_recognised() {
        assert_eq!(classify(|d| 3.0 + 2.0 * (-d.ln())), Growth::Diverges);
        assert_eq!(classify(|d| 1.0 + (-d.ln()).ln()), Growth::Diverges);
        assert_eq!(classify(|d| (-d.ln()).ln().ln()), Growth::Diverges);
        assert_eq!(classify(|d| d.powf(-0.3)), Growth::Diverges);
    }

    #[test]
    fn convergent_models_are_recognised() {
        assert!(
            matches!(classify(|d| 2.0 - d), Growth::Converges { limit } if (limit - 2.0).abs() < 1e-9)
        );
        assert!(
            matches!(classify(|d| 1.0 - 1.0 / (-d.ln())), Growth::Converges { limit } if (limit - 1.0).abs() < 1e-9)
        );
        assert!(matches!(classify(|_| 4.0), Growth::Converges { .. }));
    }

    #[test]
    fn richardson_recovers_polynomial_limit() {
        let h: Vec<f64> = (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect();
        let v: Vec<f64> = h.iter().map(|x| 2.0 + 3.0 * x - x * x).collect();
        let e = extrapolate(&h, &v, &[Basis::One, Basis::Power(1.0), Basis::Power(2.0)]).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_reported_as_infinite_limit() {
        let h: Vec<f64> = (1..20).map(|k| 0.5f64.powi(k)).collect();
        let v: Vec<f64> = h.iter().map(|x| -x.ln()).collect();
        let e = estimate_limit(&h, &v, &[Basis::One, Basis::Power(1.0)]).unwrap();
        assert!(e.is_divergent() && e.value.is_infinite());
    }
}
