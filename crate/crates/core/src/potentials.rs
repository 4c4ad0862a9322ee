//! The axially symmetric potentials
//! `u(x, r) = ∫_b^c |t|^{μ(t)} h(t) [(t-x)² + r²]^{-μ(t)/2} dt`,
//! the kernels `k₁`, `k₂` with quotient `ω = k₁/k₂`, the derivative
//! integrals and the PDE residual, plus the `u₁ + u₂` split near the origin.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{Function1D, SpineProfile};
use crate::limits::{classify_growth, estimate_limit, Basis, GrowthFit, LimitEstimate};
use crate::quadrature::{
    integrate, integrate_to_infinity, integrate_with_breaks, Estimate, QuadConfig,
};

const LN2: f64 = std::f64::consts::LN_2;

/// Named parameter sets for the potentials used in the examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    /// `b = 0, c = 1, μ ≡ 1, h ≡ 1`
    Lebesgue,
    /// `b = -1, c = 1, μ ≡ 1/ε, h ≡ 1`
    T21D3 { eps: f64 },
    /// `b = -c, μ ≡ (d-2)/ε, h(2t) = |t|^{-1} |ln|t||^{-α}`
    T21Dge4 {
        eps: f64,
        alpha: f64,
        d: u32,
        c: f64,
    },
    /// `b = -c, μ(t) = 1 + 1/ln|ln|t||, h ≡ 1`
    T23D3 { c: f64 },
    /// `b = -c, μ(t) = d-2 + γ(d-3) lnln|ln|t|| / ln|ln|t||`,
    /// `h(2t) = |t|^{-1} |ln|t||^{-1} (ln|ln|t||)^{-2}`
    T23Dge4 { gamma: f64, d: u32, c: f64 },
    /// `b = -c, μ ≡ μ₀, h(t) = |t|^{-1} |ln|t||^{-γ}`
    L71 { mu0: f64, gamma: f64, c: f64 },
    /// `b = 0, c = 1, μ ≡ μ₀, h ≡ 1`
    Pilot { mu: f64 },
}

impl Preset {
    pub fn name(&self) -> String {
        match self {
            Preset::Lebesgue => "Lebesgue".into(),
            Preset::T21D3 { eps } => format!("T21_d3(ε={eps})"),
            Preset::T21Dge4 { eps, alpha, d, .. } => format!("T21_dge4(ε={eps}, α={alpha}, d={d})"),
            Preset::T23D3 { .. } => "T23_d3".into(),
            Preset::T23Dge4 { gamma, d, .. } => format!("T23_dge4(γ={gamma}, d={d})"),
            Preset::L71 { mu0, gamma, .. } => format!("L71(μ₀={mu0}, γ={gamma})"),
            Preset::Pilot { mu } => format!("pilot(μ={mu})"),
        }
    }

    /// Default interval end for presets whose `c` is a free parameter.
    pub fn default_c_t21_dge4(alpha: f64) -> f64 {
        0.5f64.min((-alpha).exp())
    }
    pub const DEFAULT_C_T23_D3: f64 = 0.05;
    pub const DEFAULT_C_T23_DGE4: f64 = 2e-7;
    pub const DEFAULT_C_L71: f64 = 0.25;

    fn interval(&self) -> (f64, f64) {
        match *self {
            Preset::Lebesgue | Preset::Pilot { .. } => (0.0, 1.0),
            Preset::T21D3 { .. } => (-1.0, 1.0),
            Preset::T21Dge4 { c, .. }
            | Preset::T23D3 { c }
            | Preset::T23Dge4 { c, .. }
            | Preset::L71 { c, .. } => (-c, c),
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                domain(format!("{what} = {v} must be positive"))
            }
        };
        match *self {
            Preset::Lebesgue => Ok(()),
            Preset::Pilot { mu } => pos(mu, "μ"),
            Preset::T21D3 { eps } => {
                if eps > 0.0 && eps < 1.0 {
                    Ok(())
                } else {
                    domain("T21_d3 needs ε ∈ (0, 1)")
                }
            }
            Preset::T21Dge4 { eps, alpha, d, c } => {
                if !(eps > 0.0 && eps < 1.0) || d < 4 || !(alpha > 1.0) {
                    return domain("T21_dge4 needs ε ∈ (0, 1), d ≥ 4, α > 1");
                }
                pos(c, "c")?;
                let cmax = 2.0 * (-alpha).exp();
                if c >= cmax {
                    return domain(format!(
                        "T21_dge4 needs c < 2e^(-α) = {cmax:.6} so that h decreases"
                    ));
                }
                Ok(())
            }
            Preset::T23D3 { c } => {
                pos(c, "c")?;
                if c >= (-1.0f64).exp() {
                    return domain("T23_d3 needs c < e^(-1)");
                }
                Ok(())
            }
            Preset::T23Dge4 { gamma, d, c } => {
                pos(c, "c")?;
                pos(gamma, "γ")?;
                if d < 4 {
                    return domain("T23_dge4 needs d ≥ 4");
                }
                let cmax = (-(1f64.exp().exp())).exp();
                if c >= cmax {
                    return domain(format!(
                        "T23_dge4 needs c < e^(-e^e) = {cmax:.4e} so that μ is monotone"
                    ));
                }
                Ok(())
            }
            Preset::L71 { mu0, gamma, c } => {
                if !(mu0 >= 1.0) || !(gamma > 1.0) {
                    return domain("L71 needs μ₀ ≥ 1 and γ > 1");
                }
                pos(c, "c")?;
                if c >= 1.0 {
                    return domain("L71 needs c < 1");
                }
                Ok(())
            }
        }
    }

    /// `(μ, a, b)` at `|t| = e^l` with `ln h = a·l + b`; keeping the linear
    /// part separate avoids cancellation for tiny `|t|`.
    fn parts_log(&self, l: f64) -> (f64, f64, f64) {
        let big_l = -l;
        match *self {
            Preset::Lebesgue => (1.0, 0.0, 0.0),
            Preset::Pilot { mu } => (mu, 0.0, 0.0),
            Preset::T21D3 { eps } => (1.0 / eps, 0.0, 0.0),
            Preset::T21Dge4 { eps, alpha, d, .. } => {
                let mu = (d as f64 - 2.0) / eps;
                (mu, -1.0, LN2 - alpha * (l - LN2).abs().ln())
            }
            Preset::T23D3 { .. } => {
                let mu = if l == f64::NEG_INFINITY {
                    1.0
                } else {
                    1.0 + 1.0 / big_l.ln()
                };
                (mu, 0.0, 0.0)
            }
            Preset::T23Dge4 { gamma, d, .. } => {
                let d = d as f64;
                let mu = if l == f64::NEG_INFINITY {
                    d - 2.0
                } else {
                    let y = big_l.ln();
                    d - 2.0 + gamma * (d - 3.0) * y.ln() / y
                };
                let bl = LN2 - l;
                (mu, -1.0, LN2 - bl.ln() - 2.0 * bl.ln().ln())
            }
            Preset::L71 { mu0, gamma, .. } => (mu0, -1.0, -gamma * big_l.ln()),
        }
    }
}

#[derive(Clone)]
enum Weights {
    Preset(Preset),
    Custom { mu: Function1D, h: Function1D },
}

/// Data `(b, c, μ, h)` of a potential.
#[derive(Clone)]
pub struct PotentialSpec {
    pub b: f64,
    pub c: f64,
    weights: Weights,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PotentialSpec({}, b={}, c={})",
            self.name(),
            self.b,
            self.c
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kernel {
    /// `w / D^{μ/2}`
    U,
    /// `μ w / D^{1+μ/2}`
    K2,
    /// `μ² w / D^{1+μ/2}`
    K1,
    /// `∂²/∂x²` of the `U` kernel
    Dxx,
    /// `∂²/∂r²` of the `U` kernel
    Drr,
}

impl Kernel {
    fn extra_power(self) -> f64 {
        if self == Kernel::U {
            0.0
        } else {
            1.0
        }
    }

    /// Multiplier of `w / D^{μ/2 + k}` given `(t-x)²/D` and `r²/D`.
    #[inline]
    fn factor(self, mu: f64, along: f64, across: f64) -> f64 {
        match self {
            Kernel::U => 1.0,
            Kernel::K2 => mu,
            Kernel::K1 => mu * mu,
            Kernel::Dxx => mu * ((mu + 2.0) * along - 1.0),
            Kernel::Drr => mu * ((mu + 2.0) * across - 1.0),
        }
    }
}

#[inline]
fn ln_cosh(v: f64) -> f64 {
    let a = v.abs();
    a + (-2.0 * a).exp().ln_1p() - LN2
}

/// `(tanh² v, sech² v)` without overflow.
#[inline]
fn tanh_sech2(v: f64) -> (f64, f64) {
    let a = v.abs();
    let e = (-2.0 * a).exp();
    let th = (1.0 - e) / (1.0 + e);
    let sech = 2.0 * (-a).exp() / (1.0 + e);
    (th * th, sech * sech)
}

/// Values reported by [`PotentialSpec::eval_derivatives`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivatives {
    pub u_r: Estimate,
    pub u_xx_plus_u_rr: Estimate,
}

/// Terms of the PDE residual `u_xx + u_rr + (ω/r) u_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub residual: f64,
    /// Propagated quadrature error bound of `residual`.
    pub error: f64,
    pub u_xx: Estimate,
    pub u_rr: Estimate,
    pub u_r: Estimate,
    pub omega: f64,
}

/// Pieces of `x |ln x|^γ [u₂(x, r(x))]'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpineDerivative {
    pub x: f64,
    /// `x |ln x|^γ`
    pub scale: f64,
    /// Scaled contribution of the moving limits `±2x`.
    pub boundary_terms: f64,
    /// Scaled integral of the `x`-derivative of the integrand.
    pub integral_term: Estimate,
    pub total: f64,
}

impl PotentialSpec {
    pub fn from_preset(p: Preset) -> Result<Self> {
        p.validate()?;
        let (b, c) = p.interval();
        Ok(Self {
            b,
            c,
            weights: Weights::Preset(p),
        })
    }

    pub fn custom(b: f64, c: f64, mu: Function1D, h: Function1D) -> Result<Self> {
        if !(b <= 0.0 && c > 0.0 && b.is_finite() && c.is_finite()) {
            return domain(format!("need b ≤ 0 < c, got [{b}, {c}]"));
        }
        Ok(Self {
            b,
            c,
            weights: Weights::Custom { mu, h },
        })
    }

    pub fn preset(&self) -> Option<Preset> {
        match self.weights {
            Weights::Preset(p) => Some(p),
            Weights::Custom { .. } => None,
        }
    }

    pub fn name(&self) -> String {
        match &self.weights {
            Weights::Preset(p) => p.name(),
            Weights::Custom { .. } => "custom".into(),
        }
    }

    /// `(μ(t), a, b)` with `ln h(t) = a·l + b`, from `l = ln|t|` and the
    /// sign of `t`.
    #[inline]
    fn parts_log(&self, l: f64, sign: f64) -> (f64, f64, f64) {
        match &self.weights {
            Weights::Preset(p) => p.parts_log(l),
            Weights::Custom { mu, h } => {
                let t = sign * l.exp();
                (mu.call(t), 0.0, h.call(t).ln())
            }
        }
    }

    /// `ln h` from `l = ln|t|`.
    #[inline]
    fn ln_h_log(&self, l: f64, sign: f64) -> f64 {
        let (_, a, b) = self.parts_log(l, sign);
        if a == 0.0 {
            b
        } else {
            a * l + b
        }
    }

    /// `μ(t)`.
    pub fn mu(&self, t: f64) -> f64 {
        self.parts_log(t.abs().ln(), t.signum()).0
    }

    /// `h(t)`.
    pub fn h(&self, t: f64) -> f64 {
        self.ln_h_log(t.abs().ln(), t.signum()).exp()
    }

    /// `μ(0)`, as a limit for the presets.
    pub fn mu_at_zero(&self) -> f64 {
        match &self.weights {
            Weights::Preset(p) => p.parts_log(f64::NEG_INFINITY).0,
            Weights::Custom { mu, .. } => mu.call(0.0),
        }
    }

    /// `ln(|t|^{μ(t)} h(t))` and `μ(t)`; `-∞` at `t = 0` for positive `μ(0)`.
    #[inline]
    fn log_weight(&self, t: f64) -> (f64, f64) {
        if t == 0.0 {
            let mu = self.mu_at_zero();
            return (if mu > 0.0 { f64::NEG_INFINITY } else { 0.0 }, mu);
        }
        let l = t.abs().ln();
        let (mu, a, b) = self.parts_log(l, t.signum());
        ((mu + a) * l + b, mu)
    }

    fn check_xr(&self, x: f64, r: f64) -> Result<()> {
        if !x.is_finite() || !r.is_finite() || r < 0.0 {
            return domain(format!("invalid evaluation point (x = {x}, r = {r})"));
        }
        Ok(())
    }

    fn on_segment(&self, x: f64) -> bool {
        x >= self.b && x <= self.c
    }

    /// Integral of a kernel over `t ∈ [lo, hi] ⊂ [b, c]` at `(x, r)`.
    fn kernel_integral(
        &self,
        k: Kernel,
        x: f64,
        r: f64,
        lo: f64,
        hi: f64,
        q: &QuadConfig,
    ) -> Result<Estimate> {
        if hi <= lo {
            return Ok(Estimate::exact(0.0));
        }
        let kp = k.extra_power();
        if r > 0.0 && q.singularity_split {
            // t = x + r sinh v: (t-x)² + r² = r² cosh² v, dt = r cosh v dv.
            let lr = r.ln();
            let f = |v: f64| {
                let t = (x + r * v.sinh()).clamp(lo, hi);
                let (lw, mu) = self.log_weight(t);
                if lw == f64::NEG_INFINITY {
                    return 0.0;
                }
                let lc = ln_cosh(v);
                let (th2, sh2) = tanh_sech2(v);
                let e = lw + (1.0 - mu - 2.0 * kp) * (lr + lc);
                k.factor(mu, th2, sh2) * e.exp()
            };
            let va = ((lo - x) / r).asinh();
            let vb = ((hi - x) / r).asinh();
            let mut pts = vec![va, vb];
            for cand in [0.0, (-x / r).asinh()] {
                if cand > va && cand < vb {
                    pts.push(cand);
                }
            }
            pts.sort_by(f64::total_cmp);
            return integrate_with_breaks(f, &pts, q);
        }
        let f = |t: f64| {
            let (lw, mu) = self.log_weight(t);
            if lw == f64::NEG_INFINITY {
                return 0.0;
            }
            let dd = (t - x) * (t - x) + r * r;
            let (along, across) = ((t - x) * (t - x) / dd, r * r / dd);
            k.factor(mu, along, across) * (lw - (0.5 * mu + kp) * dd.ln()).exp()
        };
        let mut pts = vec![lo, hi];
        for cand in [0.0, x] {
            if cand > lo && cand < hi {
                pts.push(cand);
            }
        }
        pts.sort_by(f64::total_cmp);
        integrate_with_breaks(f, &pts, q)
    }

    /// `∫_0^a g(t) dt` for `a ∈ (0, e^{-1}]` via `t = exp(-e^s)`, with
    /// `ln g = k·l + m(l)` given as `(k, m)` in terms of `l = ln|t|`.
    fn integrate_near_zero<G: Fn(f64) -> (f64, f64)>(
        g_log: G,
        a: f64,
        q: &QuadConfig,
    ) -> Result<Estimate> {
        let s0 = (-a.ln()).ln();
        integrate_to_infinity(
            |s: f64| {
                let es = s.exp();
                if !es.is_finite() {
                    return 0.0;
                }
                let l = -es;
                let (k, m) = g_log(l);
                let v = (k + 1.0) * l + m + s;
                if v == f64::NEG_INFINITY {
                    0.0
                } else {
                    v.exp()
                }
            },
            s0,
            q,
        )
    }

    /// `∫_lo^hi` of a function given as `ln g(t)` through `(ln|t|, sign)`,
    /// for `lo ≤ 0 ≤ hi`, resolving the endpoint `t = 0` logarithmically.
    fn integrate_through_zero<G: Fn(f64, f64) -> (f64, f64)>(
        &self,
        g_log: G,
        lo: f64,
        hi: f64,
        q: &QuadConfig,
    ) -> Result<Estimate> {
        let a_max = (-1.0f64).exp();
        let mut total = Estimate::exact(0.0);
        for (side, end) in [(1.0, hi), (-1.0, -lo)] {
            if end <= 0.0 {
                continue;
            }
            let a = end.min(a_max);
            total = total + Self::integrate_near_zero(|l| g_log(l, side), a, q)?;
            if end > a {
                total = total
                    + integrate(
                        |t: f64| {
                            let l = t.ln();
                            let (k, m) = g_log(l, side);
                            (k * l + m).exp()
                        },
                        a,
                        end,
                        q,
                    )?;
            }
        }
        Ok(total)
    }

    /// `u(x, r)` with error estimate.
    pub fn eval_u(&self, x: f64, r: f64, q: &QuadConfig) -> Result<Estimate> {
        self.eval_u_on(x, r, self.b, self.c, q)
    }

    fn eval_u_on(&self, x: f64, r: f64, lo: f64, hi: f64, q: &QuadConfig) -> Result<Estimate> {
        self.check_xr(x, r)?;
        if r > 0.0 || !(x >= lo && x <= hi) {
            return self.kernel_integral(Kernel::U, x, r, lo, hi, q);
        }
        if x == 0.0 {
            // |t|^μ / |t|^μ = 1: the value is ∫ h.
            return self.integrate_through_zero(
                |l, s| {
                    let (_, a, b) = self.parts_log(l, s);
                    (a, b)
                },
                lo,
                hi,
                q,
            );
        }
        let mu = self.mu(x);
        if mu >= 1.0 && self.h(x) > 0.0 {
            return Err(Error::SingularPoint { x, r });
        }
        self.kernel_integral(Kernel::U, x, r, lo, hi, q)
    }

    /// `∫_b^c |t|^{μ(t)} h(t) dt`, finite for admissible data.
    pub fn weight_integral(&self, q: &QuadConfig) -> Result<Estimate> {
        self.integrate_through_zero(
            |l, s| {
                let (mu, a, b) = self.parts_log(l, s);
                (mu + a, b)
            },
            self.b,
            self.c,
            q,
        )
    }

    /// Checks that `∫ |t|^μ h` is finite and that `μ`, `h` are finite and
    /// nonnegative on a sample of `[b, c]`.
    pub fn validate(&self, q: &QuadConfig) -> Result<()> {
        for i in 1..200 {
            let t = self.b + (self.c - self.b) * i as f64 / 200.0;
            if t == 0.0 {
                continue;
            }
            let (mu, h) = (self.mu(t), self.h(t));
            if !(mu.is_finite() && mu >= 0.0 && h.is_finite() && h >= 0.0) {
                return domain(format!("μ or h invalid at t = {t}: μ = {mu}, h = {h}"));
            }
        }
        let w = self.weight_integral(q)?;
        if !w.value.is_finite() {
            return domain("∫|t|^μ h is not finite");
        }
        Ok(())
    }

    /// `k₁(x, r)` and `k₂(x, r)`.
    pub fn kernels(&self, x: f64, r: f64, q: &QuadConfig) -> Result<(Estimate, Estimate)> {
        self.check_xr(x, r)?;
        if r == 0.0 && self.on_segment(x) {
            return Err(Error::SingularPoint { x, r });
        }
        Ok((
            self.kernel_integral(Kernel::K1, x, r, self.b, self.c, q)?,
            self.kernel_integral(Kernel::K2, x, r, self.b, self.c, q)?,
        ))
    }

    /// `ω = k₁/k₂`, equal to `μ(x)` on the segment `r = 0, x ∈ [b, c]`.
    pub fn eval_omega(&self, x: f64, r: f64, q: &QuadConfig) -> Result<f64> {
        self.check_xr(x, r)?;
        if r == 0.0 && self.on_segment(x) {
            return Ok(if x == 0.0 {
                self.mu_at_zero()
            } else {
                self.mu(x)
            });
        }
        let (k1, k2) = self.kernels(x, r, q)?;
        if k2.error > 0.1 * k2.value.abs() {
            return Err(Error::DivisionInstability {
                denominator: k2.value,
                error: k2.error,
            });
        }
        Ok(k1.value / k2.value)
    }

    /// `u_r = -r k₂` and `u_xx + u_rr = k₁`.
    pub fn eval_derivatives(&self, x: f64, r: f64, q: &QuadConfig) -> Result<Derivatives> {
        if !(r > 0.0) {
            return domain("derivatives need r > 0");
        }
        let (k1, k2) = self.kernels(x, r, q)?;
        Ok(Derivatives {
            u_r: k2.scale(-r),
            u_xx_plus_u_rr: k1,
        })
    }

    /// `u_xx` and `u_rr` from the undifferentiated-form kernels, computed as
    /// separate integrals.
    pub fn second_derivatives(
        &self,
        x: f64,
        r: f64,
        q: &QuadConfig,
    ) -> Result<(Estimate, Estimate)> {
        if !(r > 0.0) {
            return domain("derivatives need r > 0");
        }
        self.check_xr(x, r)?;
        Ok((
            self.kernel_integral(Kernel::Dxx, x, r, self.b, self.c, q)?,
            self.kernel_integral(Kernel::Drr, x, r, self.b, self.c, q)?,
        ))
    }

    /// `u_xx + u_rr + (ω/r) u_r` with `u_xx`, `u_rr` from their own kernels
    /// and `ω` from `k₁/k₂`.
    pub fn pde_residual(&self, x: f64, r: f64, q: &QuadConfig) -> Result<Residual> {
        let (u_xx, u_rr) = self.second_derivatives(x, r, q)?;
        let (k1, k2) = self.kernels(x, r, q)?;
        let u_r = k2.scale(-r);
        let omega = k1.value / k2.value;
        let omega_err = omega.abs() * (k1.error / k1.value.abs() + k2.error / k2.value.abs());
        let residual = u_xx.value + u_rr.value + omega / r * u_r.value;
        let error = u_xx.error
            + u_rr.error
            + (omega / r).abs() * u_r.error
            + (u_r.value / r).abs() * omega_err;
        Ok(Residual {
            residual,
            error,
            u_xx,
            u_rr,
            u_r,
            omega,
        })
    }

    /// `(u₁, u₂)` with `u₁` the integral over `[-2|x|, 2|x|]`.
    pub fn split_u(&self, x: f64, r: f64, q: &QuadConfig) -> Result<(Estimate, Estimate)> {
        self.check_xr(x, r)?;
        let a = 2.0 * x.abs();
        if a > self.c || -a < self.b {
            return domain(format!("[-2|x|, 2|x|] = [-{a}, {a}] leaves [b, c]"));
        }
        if a == 0.0 {
            return Ok((Estimate::exact(0.0), self.eval_u(x, r, q)?));
        }
        let u1 = self.eval_u_on(x, r, -a, a, q)?;
        let left = self.eval_u_on(x, r, self.b, -a, q)?;
        let right = self.eval_u_on(x, r, a, self.c, q)?;
        Ok((u1, left + right))
    }

    /// `x |ln x|^γ [u₂(x, r(x))]'` split into the moving-limit terms and the
    /// integral of the differentiated integrand. Needs the `L71` preset.
    pub fn u2_spine_derivative(
        &self,
        profile: &SpineProfile,
        x: f64,
        q: &QuadConfig,
    ) -> Result<SpineDerivative> {
        let Some(Preset::L71 { gamma, .. }) = self.preset() else {
            return domain("u2_spine_derivative needs the L71 preset");
        };
        if !(x > 0.0 && 2.0 * x < self.c) {
            return domain(format!("x = {x} must satisfy 0 < 2x < c"));
        }
        let r = profile.eval(x)?;
        let rp = profile.derivative(x)?;
        if rp.abs() > 1.0 {
            return Err(Error::Hypothesis(format!("|r'(x)| = {} > 1", rp.abs())));
        }
        let lx = -x.ln();
        let scale = x * lx.powf(gamma);
        let w = |t: f64| {
            let (lw, mu) = self.log_weight(t);
            (lw.exp(), mu)
        };
        let (w_plus, mu_plus) = w(2.0 * x);
        let (w_minus, mu_minus) = w(-2.0 * x);
        let d_plus = x * x + r * r;
        let d_minus = 9.0 * x * x + r * r;
        let boundary = -2.0 * w_plus * d_plus.powf(-0.5 * mu_plus)
            - 2.0 * w_minus * d_minus.powf(-0.5 * mu_minus);
        let rr = r * rp;
        // integrate in l = ln|t| on each side
        let side = |sign: f64| -> Result<Estimate> {
            let f = |l: f64| {
                let t = sign * l.exp();
                let (lw, mu) = self.log_weight(t);
                let dd = (t - x) * (t - x) + r * r;
                mu * ((t - x) - rr) * (lw - (1.0 + 0.5 * mu) * dd.ln()).exp() * t.abs()
            };
            let lo = (2.0 * x).ln();
            let hi = if sign > 0.0 {
                self.c.ln()
            } else {
                (-self.b).ln()
            };
            integrate(f, lo, hi, q)
        };
        let g = side(1.0)? + side(-1.0)?;
        let boundary_terms = boundary * scale;
        let integral_term = g.scale(scale);
        Ok(SpineDerivative {
            x,
            scale,
            boundary_terms,
            integral_term,
            total: boundary_terms + integral_term.value,
        })
    }

    /// `u₁ / bound`, where the bound is `|ln|x||^{-γ} (|x|/r)^{μ₀-1}` for
    /// `μ₀ > 1` and `|ln|x||^{-γ} ln(|x|/r)` for `μ₀ = 1`. Bounded ratios
    /// indicate the asymptotic estimate of `u₁`.
    pub fn u1_bound_ratio(&self, x: f64, r: f64, q: &QuadConfig) -> Result<f64> {
        let Some(Preset::L71 { mu0, gamma, .. }) = self.preset() else {
            return domain("u1_bound_ratio needs the L71 preset");
        };
        let (u1, _) = self.split_u(x, r, q)?;
        let lx = x.abs().ln().abs();
        let bound = if mu0 > 1.0 {
            lx.powf(-gamma) * (x.abs() / r).powf(mu0 - 1.0)
        } else {
            if 2.0 * r > x.abs() {
                return Err(Error::Hypothesis("the μ₀ = 1 bound needs 2r ≤ |x|".into()));
            }
            lx.powf(-gamma) * (x.abs() / r).ln()
        };
        Ok(u1.value / bound)
    }

    /// Growth classification of `∫_δ^c β(t) |t|^{-ν(t)} dt` as `δ → 0`,
    /// where `β = μ|t|^μ h` and `ν = μ + 2`; divergence is expected.
    pub fn omega_weight_divergence(&self, q: &QuadConfig) -> Result<GrowthFit> {
        let c = self.c.min(0.5);
        let deltas: Vec<f64> = (5..=40).map(|k| c * 0.5f64.powi(k)).collect();
        let f = |l: f64| {
            let (mu, a, b) = self.parts_log(l, 1.0);
            // β |t|^{-ν} dt = μ h |t|^{-2} · |t| dl
            mu * ((a - 1.0) * l + b).exp()
        };
        let mut acc = integrate(f, deltas[0].ln(), c.ln(), q)?.value;
        let mut values = Vec::with_capacity(deltas.len());
        values.push(acc);
        for w in deltas.windows(2) {
            acc += integrate(f, w[1].ln(), w[0].ln(), q)?.value;
            values.push(acc);
        }
        classify_growth(&deltas, &values)
    }
}

/// `μ ∫_2^∞ s^{μ-1} (s + shift)^{-μ-1} ds`; with `shift = -1` this equals
/// `2^μ - 1`.
pub fn tail_integral(mu: f64, shift: f64, q: &QuadConfig) -> Result<Estimate> {
    if !(mu > 0.0) || !(shift > -2.0) {
        return domain("tail integral needs μ > 0 and shift > -2");
    }
    let f = |s: f64| mu * ((mu - 1.0) * s.ln() - (mu + 1.0) * (s + shift).ln()).exp();
    integrate_to_infinity(f, 2.0, q)
}

/// `ρ = lim x|ln x|^γ [u₂(x, r(x))]'` for the `L71` potential when
/// `r(x) = o(x)`: the moving-limit part `-2^μ(1 + 3^{-μ})` plus the integral
/// part `(2^μ - 1) - μ ∫_2^∞ s^{μ-1}(s+1)^{-μ-1} ds`.
pub fn spine_derivative_rho(mu: f64, q: &QuadConfig) -> Result<f64> {
    let boundary = -(2f64.powf(mu)) * (1.0 + 3f64.powf(-mu));
    let plus = tail_integral(mu, -1.0, q)?.value;
    let minus = tail_integral(mu, 1.0, q)?.value;
    Ok(boundary + plus - minus)
}

/// Limits of the pieces of [`SpineDerivative`] as `x → 0`, extrapolated in
/// `1/|ln x|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpineDerivativeLimit {
    pub samples: Vec<SpineDerivative>,
    pub boundary_terms: LimitEstimate,
    pub integral_term: LimitEstimate,
    pub total: LimitEstimate,
}

impl PotentialSpec {
    /// Extrapolates [`PotentialSpec::u2_spine_derivative`] over `xs`
    /// (decreasing) with the basis `{1, 1/L, …, 1/L⁴}`, `L = |ln x|`.
    pub fn spine_derivative_limit(
        &self,
        profile: &SpineProfile,
        xs: &[f64],
        q: &QuadConfig,
    ) -> Result<SpineDerivativeLimit> {
        if xs.len() < 7 {
            return Err(Error::Grid("need at least 7 samples".into()));
        }
        let samples: Vec<SpineDerivative> = xs
            .iter()
            .map(|&x| self.u2_spine_derivative(profile, x, q))
            .collect::<Result<_>>()?;
        let h: Vec<f64> = xs.iter().map(|x| 1.0 / x.ln().abs()).collect();
        let basis = [
            Basis::One,
            Basis::Power(1.0),
            Basis::Power(2.0),
            Basis::Power(3.0),
            Basis::Power(4.0),
        ];
        let pick = |f: &dyn Fn(&SpineDerivative) -> f64| -> Result<LimitEstimate> {
            let v: Vec<f64> = samples.iter().map(f).collect();
            estimate_limit(&h, &v, &basis)
        };
        Ok(SpineDerivativeLimit {
            boundary_terms: pick(&|s| s.boundary_terms)?,
            integral_term: pick(&|s| s.integral_term.value)?,
            total: pick(&|s| s.total)?,
            samples,
        })
    }
}

/// `u(x₁, r) - [1 + 2x₁ ln(1/r)]` for the Lebesgue potential.
pub fn lebesgue_asymptotic_gap(x1: f64, r: f64, q: &QuadConfig) -> Result<f64> {
    if !(x1 > 0.0 && r > 0.0) {
        return domain("need x₁ > 0 and r > 0");
    }
    let spec = PotentialSpec::from_preset(Preset::Lebesgue)?;
    let u = spec.eval_u(x1, r, q)?;
    Ok(u.value - (1.0 + 2.0 * x1 * (1.0 / r).ln()))
}

/// `ψ(y) = y ∫_{-y}^{y} (s² + 1)^{-1/2} ds`.
pub fn psi(y: f64, q: &QuadConfig) -> Result<f64> {
    let e = integrate(|s: f64| 1.0 / (s * s + 1.0).sqrt(), -y, y, q)?;
    Ok(y * e.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn lebesgue_closed_forms() {
        let s = PotentialSpec::from_preset(Preset::Lebesgue).unwrap();
        let v = s.eval_u(0.0, 1.0, &q()).unwrap().value;
        assert!((v - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((s.eval_u(0.0, 0.0, &q()).unwrap().value - 1.0).abs() < 1e-12);
        assert!(matches!(
            s.eval_u(0.5, 0.0, &q()),
            Err(Error::SingularPoint { .. })
        ));
        let x = 2.0f64;
        let v = s.eval_u(x, 0.0, &q()).unwrap().value;
        let direct = -1.0 - x * (1.0 - 1.0 / x).ln();
        assert!((v - direct).abs() < 1e-12, "{v} {direct}");
    }

    #[test]
    fn constant_mu_gives_constant_omega() {
        let s = PotentialSpec::from_preset(Preset::T21D3 { eps: 0.4 }).unwrap();
        for (x, r) in [(0.3, 0.2), (-2.0, 0.5), (1.5, 0.0)] {
            assert!((s.eval_omega(x, r, &q()).unwrap() - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_on_segment_is_mu() {
        let s = PotentialSpec::from_preset(Preset::T23D3 { c: 0.05 }).unwrap();
        assert_eq!(s.eval_omega(0.0, 0.0, &q()).unwrap(), 1.0);
        let t = 0.01;
        assert_eq!(s.eval_omega(t, 0.0, &q()).unwrap(), s.mu(t));
    }

    #[test]
    fn l71_zero_value() {
        let (gamma, c) = (1.5, 0.25);
        let s = PotentialSpec::from_preset(Preset::L71 { mu0: 1.5, gamma, c }).unwrap();
        let v = s.eval_u(0.0, 0.0, &q()).unwrap().value;
        let exact = 2.0 * (-c.ln()).powf(1.0 - gamma) / (gamma - 1.0);
        assert!((v - exact).abs() < 1e-9 * exact, "{v} {exact}");
    }

    #[test]
    fn presets_validate() {
        for p in [
            Preset::Lebesgue,
            Preset::T21D3 { eps: 0.5 },
            Preset::T21Dge4 {
                eps: 0.5,
                alpha: 2.0,
                d: 4,
                c: 0.1,
            },
            Preset::T23D3 { c: 0.05 },
            Preset::T23Dge4 {
                gamma: 2.0,
                d: 4,
                c: 2e-7,
            },
            Preset::L71 {
                mu0: 1.5,
                gamma: 1.5,
                c: 0.25,
            },
            Preset::Pilot { mu: 2.0 },
        ] {
            PotentialSpec::from_preset(p)
                .unwrap()
                .validate(&q())
                .unwrap();
        }
        assert!(PotentialSpec::from_preset(Preset::T23D3 { c: 0.5 }).is_err());
    }

    #[test]
    fn psi_matches_closed_form() {
        let y = 10.0f64;
        assert!((psi(y, &q()).unwrap() - 2.0 * y * y.asinh()).abs() < 1e-9);
    }
}
