//! Euler–Maruyama simulation of the diffusion generated by `L_λ` in a cusp
//! domain: exit samples, harmonic-measure estimates and a regularity probe.
//!
//! Each path draws from its own ChaCha8 stream selected by the path index,
//! so results do not depend on thread count or scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{self, Error, Result};
use crate::geometry::{BoundaryClass, CuspDomain};
use crate::operators::{apply_unit_sqrt, coefficient_matrix, LambdaField};

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Largest censoring rate for which estimates are reported.
pub const MAX_CENSORING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Base time step `Δt`.
    pub step: f64,
    pub max_steps: u64,
    pub paths: usize,
    pub seed: u64,
    /// Halve `Δt` while the boundary is within `10 σ_max √Δt`.
    pub step_refinement_near_boundary: bool,
    /// Smallest step is `step / 2^refinement_depth`.
    #[serde(default = "default_depth")]
    pub refinement_depth: u32,
    /// Bisect the exiting step segment down to `boundary_tol`.
    #[serde(default = "default_true")]
    pub bisection: bool,
    #[serde(default = "default_tol")]
    pub boundary_tol: f64,
}

fn default_depth() -> u32 {
    10
}
fn default_true() -> bool {
    true
}
fn default_tol() -> f64 {
    1e-9
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            max_steps: 1_000_000,
            paths: 10_000,
            seed: 0,
            step_refinement_near_boundary: true,
            refinement_depth: default_depth(),
            bisection: true,
            boundary_tol: default_tol(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!(
                "time step {} must be positive",
                self.step
            )));
        }
        if self.max_steps == 0 || self.paths == 0 {
            return Err(Error::Config("max_steps and paths must be positive".into()));
        }
        if !(self.boundary_tol > 0.0) {
            return Err(Error::Config("boundary tolerance must be positive".into()));
        }
        if self.refinement_depth > 60 {
            return Err(Error::Config(
                "refinement depth above 60 is not supported".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub exit_point: Vec<f64>,
    pub exit_time: f64,
    /// The step budget ran out before the path left the domain.
    pub censored: bool,
    pub boundary_class: BoundaryClass,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub std_dev: f64,
    /// Number of non-censored paths.
    pub n_effective: usize,
    pub censoring_rate: f64,
}

impl MeasureEstimate {
    fn from_values(values: &[f64], total: usize) -> Result<Self> {
        let n = values.len();
        let censoring_rate = 1.0 - n as f64 / total as f64;
        if censoring_rate >= MAX_CENSORING {
            return Err(Error::ExcessCensoring {
                rate: censoring_rate,
                limit: MAX_CENSORING,
            });
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std_dev = var.sqrt();
        Ok(Self {
            mean,
            half_width_95: Z95 * std_dev / (n as f64).sqrt(),
            std_dev,
            n_effective: n,
            censoring_rate,
        })
    }

    /// `|mean - value|` in units of the 95% half width.
    pub fn z_distance(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if self.half_width_95 > 0.0 {
            d / self.half_width_95
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// The RNG stream of path `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Stepper<'a> {
    domain: &'a CuspDomain,
    field: &'a LambdaField,
    cfg: &'a SimConfig,
    d: usize,
    min_step: f64,
}

enum StepOutcome {
    Inside,
    Exit(Vec<f64>),
}

impl<'a> Stepper<'a> {
    fn new(domain: &'a CuspDomain, field: &'a LambdaField, cfg: &'a SimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            domain,
            field,
            cfg,
            d: domain.d,
            min_step: cfg.step / 2f64.powi(cfg.refinement_depth as i32),
        })
    }

    /// Halves the base step while the boundary is within `10 σ_max √Δt`, with `σ_max = √(2 max(1, λ))`.
    fn step_size(&self, x: &[f64], lambda: f64) -> f64 {
        let mut dt = self.cfg.step;
        if self.cfg.step_refinement_near_boundary {
            let sigma_max = (2.0 * lambda.max(1.0)).sqrt();
            let dist = self.domain.boundary_distance(x);
            while dt > self.min_step && dist < 10.0 * sigma_max * dt.sqrt() {
                dt *= 0.5;
            }
        }
        dt.max(self.min_step)
    }

    /// Bisects `[a, b]` (a inside, b outside) and returns the outside end.
    fn refine(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut lo = a.to_vec();
        let mut hi = b.to_vec();
        let mut mid = vec![0.0; self.d];
        for _ in 0..200 {
            let len2: f64 = lo.iter().zip(&hi).map(|(p, q)| (p - q) * (p - q)).sum();
            if len2.sqrt() <= self.cfg.boundary_tol {
                break;
            }
            for i in 0..self.d {
                mid[i] = 0.5 * (lo[i] + hi[i]);
            }
            if self.domain.contains_unchecked(&mid) {
                lo.copy_from_slice(&mid);
            } else {
                hi.copy_from_slice(&mid);
            }
        }
        hi
    }

    /// Point of the segment `[a, b]` closest to the `x₁`-axis.
    fn closest_to_axis(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..a.len() {
            let di = b[i] - a[i];
            num -= a[i] * di;
            den += di * di;
        }
        if den == 0.0 {
            return None;
        }
        let s = num / den;
        if s <= 0.0 || s >= 1.0 {
            return None;
        }
        Some(a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect())
    }

    fn advance<R: Rng>(
        &self,
        x: &mut [f64],
        lambda: f64,
        dt: f64,
        rng: &mut R,
        xi: &mut [f64],
        inc: &mut [f64],
    ) -> Result<StepOutcome> {
        for v in xi.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        apply_unit_sqrt(lambda, x, xi, inc);
        let scale = (2.0 * dt).sqrt();
        let prev = x.to_vec();
        for i in 0..self.d {
            x[i] += scale * inc[i];
        }
        if !self.domain.contains_unchecked(x) {
            let exit = if self.cfg.bisection {
                self.refine(&prev, x)
            } else {
                x.to_vec()
            };
            return Ok(StepOutcome::Exit(exit));
        }
        // A step may jump across the thin spine with both ends inside.
        if let Some(p) = Self::closest_to_axis(&prev, x) {
            if !self.domain.contains_unchecked(&p) {
                let exit = if self.cfg.bisection {
                    self.refine(&prev, &p)
                } else {
                    p
                };
                return Ok(StepOutcome::Exit(exit));
            }
        }
        Ok(StepOutcome::Inside)
    }

    fn classify(&self, p: &[f64]) -> BoundaryClass {
        let tol = (10.0 * self.cfg.boundary_tol).max(1e-12);
        match self.domain.classify_boundary(p, tol) {
            Ok(BoundaryClass::NotBoundary) | Err(_) => {
                // Unrefined exits land up to one step outside.
                let n = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n >= self.domain.c {
                    BoundaryClass::Sphere
                } else {
                    BoundaryClass::Spine
                }
            }
            Ok(c) => c,
        }
    }

    fn run<R: Rng>(&self, start: &[f64], rng: &mut R, horizon: Option<f64>) -> Result<ExitSample> {
        let mut x = start.to_vec();
        let mut xi = vec![0.0; self.d];
        let mut inc = vec![0.0; self.d];
        let mut t = 0.0;
        for k in 0..self.cfg.max_steps {
            if let Some(h) = horizon {
                if t >= h {
                    return Ok(ExitSample {
                        boundary_class: BoundaryClass::NotBoundary,
                        exit_point: x,
                        exit_time: t,
                        censored: true,
                        steps: k,
                    });
                }
            }
            // λ at the pre-step point; on the axis the field's own axis value
            let lambda = self.field.value(&x)?;
            let dt = self.step_size(&x, lambda);
            if let StepOutcome::Exit(p) =
                self.advance(&mut x, lambda, dt, rng, &mut xi, &mut inc)?
            {
                return Ok(ExitSample {
                    boundary_class: self.classify(&p),
                    exit_point: p,
                    exit_time: t + dt,
                    censored: false,
                    steps: k + 1,
                });
            }
            t += dt;
        }
        Ok(ExitSample {
            boundary_class: BoundaryClass::NotBoundary,
            exit_point: x,
            exit_time: t,
            censored: true,
            steps: self.cfg.max_steps,
        })
    }
}

fn check_start(dom: &CuspDomain, start: &[f64]) -> Result<()> {
    if start.len() != dom.d {
        return error::domain(format!(
            "start has {} coordinates, expected {}",
            start.len(),
            dom.d
        ));
    }
    if !dom.contains(start)? {
        return Err(Error::StartOutsideDomain(start.to_vec()));
    }
    Ok(())
}

/// One path from `start` using RNG stream `path_index`.
pub fn simulate_exit(
    domain: &CuspDomain,
    field: &LambdaField,
    start: &[f64],
    cfg: &SimConfig,
    path_index: u64,
) -> Result<ExitSample> {
    check_start(domain, start)?;
    let stepper = Stepper::new(domain, field, cfg)?;
    stepper.run(start, &mut path_rng(cfg.seed, path_index), None)
}

/// `cfg.paths` paths from `start`, in path-index order.
pub fn simulate_paths(
    domain: &CuspDomain,
    field: &LambdaField,
    start: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<ExitSample>> {
    check_start(domain, start)?;
    let stepper = Stepper::new(domain, field, cfg)?;
    (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| stepper.run(start, &mut path_rng(cfg.seed, i), None))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// `E g(X_τ)` over non-censored paths.
pub fn harmonic_measure<G>(
    domain: &CuspDomain,
    field: &LambdaField,
    start: &[f64],
    g: G,
    cfg: &SimConfig,
) -> Result<MeasureEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let samples = simulate_paths(domain, field, start, cfg)?;
    measure_from_samples(&samples, g)
}

pub fn measure_from_samples<G: Fn(&[f64]) -> f64>(
    samples: &[ExitSample],
    g: G,
) -> Result<MeasureEstimate> {
    let values: Vec<f64> = samples
        .iter()
        .filter(|s| !s.censored)
        .map(|s| g(&s.exit_point))
        .collect();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation(format!("boundary function returned {v}")));
    }
    MeasureEstimate::from_values(&values, samples.len())
}

/// Mean exit time over non-censored paths.
pub fn exit_time_estimate(samples: &[ExitSample]) -> Result<MeasureEstimate> {
    let values: Vec<f64> = samples
        .iter()
        .filter(|s| !s.censored)
        .map(|s| s.exit_time)
        .collect();
    MeasureEstimate::from_values(&values, samples.len())
}

/// Sample covariance of one-step increments at `x` against `2ã_λ(x)Δt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub sample: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    /// Per-entry 95% half widths from the Gaussian fourth moments.
    pub half_width_95: Vec<Vec<f64>>,
    /// Largest `|sample - expected| / half_width`.
    pub max_z: f64,
}

pub fn increment_covariance(
    field: &LambdaField,
    x: &[f64],
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<CovarianceCheck> {
    let d = x.len();
    if n < 100 {
        return Err(Error::Config(
            "covariance check needs at least 100 increments".into(),
        ));
    }
    let a = coefficient_matrix(field, x, d)?.matrix;
    let expected: DMatrix<f64> = a * (2.0 * dt);
    let lambda = field.value(x)?;
    let chunks = 64usize;
    let per = n.div_ceil(chunks);
    let partial: Vec<(DMatrix<f64>, usize)> = (0..chunks as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = path_rng(seed, c);
            let mut xi = vec![0.0; d];
            let mut inc = vec![0.0; d];
            let mut acc = DMatrix::zeros(d, d);
            let m = per.min(n.saturating_sub(c as usize * per));
            for _ in 0..m {
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                apply_unit_sqrt(lambda, x, &xi, &mut inc);
                let s = (2.0 * dt).sqrt();
                for i in 0..d {
                    for j in 0..d {
                        acc[(i, j)] += s * inc[i] * s * inc[j];
                    }
                }
            }
            (acc, m)
        })
        .collect();
    let total: usize = partial.iter().map(|p| p.1).sum();
    let mut sample = DMatrix::zeros(d, d);
    for (m, _) in &partial {
        sample += m;
    }
    sample /= total as f64;
    let mut max_z: f64 = 0.0;
    let mut hw = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let var =
                (expected[(i, i)] * expected[(j, j)] + expected[(i, j)].powi(2)) / total as f64;
            hw[i][j] = Z95 * var.sqrt();
            let diff = (sample[(i, j)] - expected[(i, j)]).abs();
            if hw[i][j] > 0.0 {
                max_z = max_z.max(diff / hw[i][j]);
            } else if diff > 0.0 {
                max_z = f64::INFINITY;
            }
        }
    }
    let rows = |m: &DMatrix<f64>| {
        (0..d)
            .map(|i| (0..d).map(|j| m[(i, j)]).collect())
            .collect()
    };
    Ok(CovarianceCheck {
        sample: rows(&sample),
        expected: rows(&expected),
        half_width_95: hw,
        max_z,
    })
}

/// `(E u(X_Δt) - u(x)) / Δt` for one Euler step from `x`, with a 95% half
/// width.
pub fn generator_estimate<U>(
    field: &LambdaField,
    x: &[f64],
    u: U,
    dt: f64,
    n: usize,
    seed: u64,
) -> Result<MeasureEstimate>
where
    U: Fn(&[f64]) -> f64 + Sync,
{
    let d = x.len();
    let lambda = field.value(x)?;
    let u0 = u(x);
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut inc = vec![0.0; d];
            apply_unit_sqrt(lambda, x, &xi, &mut inc);
            let s = (2.0 * dt).sqrt();
            let y: Vec<f64> = x.iter().zip(&inc).map(|(p, q)| p + s * q).collect();
            // antithetic pair removes the odd-order noise
            let z: Vec<f64> = x.iter().zip(&inc).map(|(p, q)| p - s * q).collect();
            (0.5 * (u(&y) + u(&z)) - u0) / dt
        })
        .collect();
    MeasureEstimate::from_values(&values, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    ConsistentWithRegular,
    ConsistentWithIrregular,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStart {
    pub start: Vec<f64>,
    pub norm: f64,
    pub estimate: MeasureEstimate,
    /// `g(0) - mean`
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeFrequency {
    pub t: f64,
    pub frequency: f64,
    pub half_width_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub g0: f64,
    pub starts: Vec<ProbeStart>,
    pub escape: Vec<EscapeFrequency>,
    /// Fitted exponent `κ` of `gap ≈ C |x|^κ` with its 95% half width.
    pub gap_exponent: f64,
    pub gap_exponent_half_width: f64,
    pub evidence: Evidence,
    pub rule: String,
    pub note: String,
}

/// Settings of [`regularity_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub sim: SimConfig,
    /// Times for the escape frequencies from the origin; empty to skip.
    pub escape_times: Vec<f64>,
    /// An innermost gap below this counts as closed.
    pub closed_gap: f64,
    /// The gap decays at least like `|x|^regular_exponent` for regular evidence.
    pub regular_exponent: f64,
    /// The gap decays slower than `|x|^irregular_exponent` for irregular evidence.
    pub irregular_exponent: f64,
    /// Escape frequency at the smallest time separating the two cases.
    pub escape_threshold: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            escape_times: vec![1e-4, 1e-3, 1e-2],
            closed_gap: 0.05,
            regular_exponent: 0.25,
            irregular_exponent: 0.1,
            escape_threshold: 0.5,
        }
    }
}

impl ProbeConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.closed_gap > 0.0
            && self.irregular_exponent >= 0.0
            && self.regular_exponent > self.irregular_exponent
            && (0.0..=1.0).contains(&self.escape_threshold);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("probe thresholds need closed_gap > 0, 0 ≤ irregular < regular exponent, escape threshold in [0, 1]".into()))
        }
    }

    pub fn rule(&self) -> String {
        format!(
            "regular: innermost |gap| < {g}, or gap exponent above {r} beyond its 95% half width with origin escape \
             frequency at the smallest time ≥ {e}; irregular: innermost gap above {g} beyond its half width, gap exponent \
             below {i} beyond its half width and origin escape frequency < {e}; otherwise inconclusive",
            g = self.closed_gap,
            r = self.regular_exponent,
            i = self.irregular_exponent,
            e = self.escape_threshold
        )
    }
}

/// Harmonic-measure means along `starts → 0` against `g(0)`, and escape
/// frequencies `P̂(τ′ < t)` from the origin. The verdict follows
/// [`ProbeConfig::rule`]; it is statistical evidence from a discretized
/// diffusion, not a proof.
pub fn regularity_probe<G>(
    domain: &CuspDomain,
    field: &LambdaField,
    starts: &[Vec<f64>],
    g: G,
    g0: f64,
    cfg: &ProbeConfig,
) -> Result<ProbeReport>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if starts.len() < 2 {
        return Err(Error::Config("the probe needs at least two starts".into()));
    }
    let norms: Vec<f64> = starts
        .iter()
        .map(|s| s.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if norms.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(
            "probe starts must approach the origin".into(),
        ));
    }
    let mut rows = Vec::with_capacity(starts.len());
    for (k, (s, &n)) in starts.iter().zip(&norms).enumerate() {
        let mut sim = cfg.sim.clone();
        sim.seed = cfg.sim.seed.wrapping_add(k as u64);
        let est = harmonic_measure(domain, field, s, &g, &sim)?;
        rows.push(ProbeStart {
            start: s.clone(),
            norm: n,
            gap: g0 - est.mean,
            estimate: est,
        });
    }
    let escape = if cfg.escape_times.is_empty() {
        vec![]
    } else {
        escape_frequencies(domain, field, &cfg.escape_times, &cfg.sim)?
    };
    let (kappa, kappa_hw) = gap_exponent(&rows);
    let last = rows.last().expect("at least two starts");
    let first_escape = escape
        .iter()
        .min_by(|a, b| a.t.total_cmp(&b.t))
        .map(|e| e.frequency);
    let escapes = first_escape.is_none_or(|p| p >= cfg.escape_threshold);
    let stays = first_escape.is_none_or(|p| p < cfg.escape_threshold);
    let closed = last.gap.abs() < cfg.closed_gap;
    let decaying = kappa - kappa_hw > cfg.regular_exponent;
    let persistent = last.gap - last.estimate.half_width_95 > cfg.closed_gap
        && kappa + kappa_hw < cfg.irregular_exponent;
    let evidence = if closed || (decaying && escapes) {
        Evidence::ConsistentWithRegular
    } else if persistent && stays {
        Evidence::ConsistentWithIrregular
    } else {
        Evidence::Inconclusive
    };
    Ok(ProbeReport {
        g0,
        starts: rows,
        escape,
        gap_exponent: kappa,
        gap_exponent_half_width: kappa_hw,
        evidence,
        rule: cfg.rule(),
        note: "statistical evidence from a discretized diffusion, not a proof".into(),
    })
}

/// Weighted least-squares slope of `ln gap` against `ln |x|`.
fn gap_exponent(rows: &[ProbeStart]) -> (f64, f64) {
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            let gap = r.gap.max(1e-12);
            let se = (r.estimate.half_width_95 / Z95).max(1e-12 * gap) / gap;
            (r.norm.ln(), gap.ln(), 1.0 / (se * se))
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return (0.0, f64::INFINITY);
    }
    (sxy / sxx, Z95 / sxx.sqrt())
}

/// `P̂(τ′ < t)` for paths started at the origin, where `τ′` is the first
/// positive time the discretized path is outside the domain.
pub fn escape_frequencies(
    domain: &CuspDomain,
    field: &LambdaField,
    times: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<EscapeFrequency>> {
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("escape times must be positive".into()));
    }
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let stepper = Stepper::new(domain, field, cfg)?;
    let origin = vec![0.0; domain.d];
    let exits: Vec<Option<f64>> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed ^ 0x5eed_0e5c_a9e0_0000, i);
            let s = stepper.run(&origin, &mut rng, Some(horizon))?;
            Ok((!s.censored).then_some(s.exit_time))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let n = exits.len() as f64;
    Ok(times
        .iter()
        .map(|&t| {
            let k = exits
                .iter()
                .filter(|e| matches!(e, Some(v) if *v < t))
                .count() as f64;
            let p = k / n;
            EscapeFrequency {
                t,
                frequency: p,
                half_width_95: Z95 * (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect())
}

/// Starts `(-s, 0, …)` on the negative axis, or `(0, s, 0, …)` off the axis.
pub fn axis_starts(d: usize, radii: &[f64], transverse: bool) -> Vec<Vec<f64>> {
    radii
        .iter()
        .map(|&s| {
            let mut x = vec![0.0; d];
            if transverse {
                x[1] = s;
            } else {
                x[0] = -s;
            }
            x
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ProfileKind, SpineProfile};

    fn ball(d: usize) -> CuspDomain {
        let p = SpineProfile::new(ProfileKind::Power { eta: 4.0 }, 1.0).unwrap();
        CuspDomain::new(d, 1.0, p, false).unwrap()
    }

    #[test]
    fn constant_function_has_zero_width() {
        let cfg = SimConfig {
            step: 1e-3,
            paths: 200,
            ..SimConfig::default()
        };
        let est = harmonic_measure(
            &ball(3),
            &LambdaField::Constant(1.0),
            &[-0.5, 0.0, 0.0],
            |_| 1.0,
            &cfg,
        )
        .unwrap();
        assert_eq!((est.mean, est.half_width_95), (1.0, 0.0));
    }

    #[test]
    fn start_outside_is_rejected() {
        let cfg = SimConfig::default();
        let e = simulate_exit(
            &ball(3),
            &LambdaField::Constant(1.0),
            &[0.5, 0.0, 0.0],
            &cfg,
            0,
        );
        assert!(matches!(e, Err(Error::StartOutsideDomain(_))));
        let bad = SimConfig { step: 0.0, ..cfg };
        assert!(matches!(
            simulate_exit(
                &ball(3),
                &LambdaField::Constant(1.0),
                &[-0.5, 0.0, 0.0],
                &bad,
                0
            ),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn censoring_is_flagged() {
        let cfg = SimConfig {
            step: 1e-6,
            max_steps: 10,
            paths: 50,
            ..SimConfig::default()
        };
        let s = simulate_paths(
            &ball(3),
            &LambdaField::Constant(1.0),
            &[-0.5, 0.0, 0.0],
            &cfg,
        )
        .unwrap();
        assert!(s.iter().all(|s| s.censored && s.exit_time > 0.0));
        assert!(matches!(
            exit_time_estimate(&s),
            Err(Error::ExcessCensoring { .. })
        ));
    }
}
