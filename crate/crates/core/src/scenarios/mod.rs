//! Declarative scenario catalog: each entry fixes a dimension, a domain, an
//! operator, an optional potential and a list of tests with expected
//! outcomes. Scenario documents are TOML; numeric fields accept literals or
//! expressions over the scenario parameters (see [`expr`]).

pub mod expr;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::barriers::{
    barrier_ratio_check, irregularity_witness, verify_barrier, verify_superharmonic_blowup,
    ApproachPath, BarrierCandidate, InversePower, PotentialForm, PotentialFunction, RadialPower,
    WitnessConfig, WitnessPair,
};
use crate::diffusion::{axis_starts, regularity_probe, Evidence, ProbeConfig, SimConfig};
use crate::error::{Error, Result};
use crate::geometry::{CuspDomain, ProfileKind, SpineProfile};
use crate::limits::{classify_growth, Growth};
use crate::operators::LambdaField;
use crate::potentials::{tail_integral, PotentialSpec, Preset};
use crate::quadrature::QuadConfig;
use crate::regularity::{
    blowup_check, default_probe, dini_test, ito_mckean_test, omega_dini_witness, DiniClass,
    Modulus, Verdict,
};

/// The built-in catalog.
pub const CATALOG_TOML: &str = include_str!("../../scenarios/catalog.toml");

/// A literal or an expression over the scenario parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Lit(f64),
    Expr(String),
}

impl Num {
    pub fn get(&self, vars: &BTreeMap<String, f64>) -> Result<f64> {
        match self {
            Num::Lit(v) => Ok(*v),
            Num::Expr(s) => expr::eval(s, vars),
        }
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num::Lit(v)
    }
}

/// Geometric grid from `from` to `to` with `count` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeomGrid {
    pub from: Num,
    pub to: Num,
    pub count: usize,
}

impl GeomGrid {
    fn points(&self, vars: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        let (a, b) = (self.from.get(vars)?, self.to.get(vars)?);
        if !(a > 0.0 && b > 0.0) || self.count < 2 {
            return Err(Error::Config(format!(
                "grid needs positive ends and two points, got {a}..{b} x{}",
                self.count
            )));
        }
        let n = self.count - 1;
        Ok((0..=n)
            .map(|k| a * (b / a).powf(k as f64 / n as f64))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileConfig {
    ExpSpine {
        eps: Num,
    },
    Power {
        eta: Num,
    },
    LogPower {
        eta: Num,
    },
    IterLogPower {
        p: Num,
    },
    PowerIterLog,
    /// `IterLogPower` with `p = 1/(d-3)` for the scenario dimension.
    DMinus3LogLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub c: Num,
    #[serde(default)]
    pub symmetric: bool,
    pub profile: ProfileConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorConfig {
    Laplacian,
    Constant {
        lambda: Num,
    },
    /// `λ = scale · ω` from the scenario potential.
    Omega {
        scale: Num,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum PotentialConfig {
    Lebesgue,
    T21D3 {
        eps: Num,
    },
    T21Dge4 {
        eps: Num,
        alpha: Num,
        c: Option<Num>,
    },
    T23D3 {
        c: Option<Num>,
    },
    T23Dge4 {
        gamma: Num,
        c: Option<Num>,
    },
    L71 {
        mu0: Num,
        gamma: Num,
        c: Option<Num>,
    },
    Pilot {
        mu: Num,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusName {
    Linear,
    InverseLog,
    InverseLogLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOperator {
    Scenario,
    Laplacian,
}

/// One test of a scenario. Tests that need a potential use the scenario's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestKind {
    /// Integral criterion for the Laplacian.
    ItoMckean,
    Dini {
        modulus: ModulusName,
        #[serde(default)]
        weighted: bool,
        c: Num,
    },
    OmegaDini {
        samples: GeomGrid,
    },
    /// `λ(0)` from the axis clause equals `value`, and `|ω - μ(0)|` decreases
    /// towards the origin along rays.
    OmegaOrigin {
        value: Num,
        radii: GeomGrid,
    },
    Blowup {
        samples: GeomGrid,
    },
    /// `w = |x'|^exponent` on annuli given as fractions of `c`.
    Barrier {
        exponent: Num,
        annuli: Vec<(f64, f64)>,
        density: usize,
    },
    /// `w = |x|^{-p}`.
    Superharmonic {
        p: Num,
        annuli: Vec<(f64, f64)>,
        density: usize,
    },
    /// `u` the scenario potential, `w = |x|^{-p}`; annuli as fractions of `c`.
    Witness {
        p: Num,
        #[serde(default = "default_witness_annuli")]
        annuli: Vec<(f64, f64)>,
    },
    Ratio {
        samples: GeomGrid,
    },
    /// `u₁ / bound` along `r = r_over_x · x`.
    SplitBound {
        r_over_x: Num,
        samples: GeomGrid,
    },
    /// Extrapolated moving-limit terms against `-2^μ(1 + 3^{-μ})`.
    SpineDerivative {
        samples: GeomGrid,
        tol: f64,
    },
    /// `μ ∫_2^∞ s^{μ-1}(s-1)^{-μ-1} ds = 2^μ - 1` for each `μ`.
    TailIdentity {
        mu: Vec<f64>,
        tol: f64,
    },
    Probe {
        operator: ProbeOperator,
        radii: Vec<f64>,
        tent: Num,
        paths: usize,
        step: f64,
        #[serde(default = "default_probe_depth")]
        depth: u32,
    },
}

fn default_witness_annuli() -> Vec<(f64, f64)> {
    vec![(0.1, 0.2), (0.2, 0.4)]
}

fn default_probe_depth() -> u32 {
    10
}

impl TestKind {
    pub fn name(&self) -> &'static str {
        match self {
            TestKind::ItoMckean => "ito_mckean",
            TestKind::Dini { .. } => "dini",
            TestKind::OmegaDini { .. } => "omega_dini",
            TestKind::OmegaOrigin { .. } => "omega_origin",
            TestKind::Blowup { .. } => "blowup",
            TestKind::Barrier { .. } => "barrier",
            TestKind::Superharmonic { .. } => "superharmonic",
            TestKind::Witness { .. } => "witness",
            TestKind::Ratio { .. } => "ratio",
            TestKind::SplitBound { .. } => "split_bound",
            TestKind::SpineDerivative { .. } => "spine_derivative",
            TestKind::TailIdentity { .. } => "tail_identity",
            TestKind::Probe { .. } => "probe",
        }
    }

    fn needs_potential(&self) -> bool {
        matches!(
            self,
            TestKind::OmegaDini { .. }
                | TestKind::OmegaOrigin { .. }
                | TestKind::Blowup { .. }
                | TestKind::Witness { .. }
                | TestKind::Ratio { .. }
                | TestKind::SplitBound { .. }
                | TestKind::SpineDerivative { .. }
        )
    }
}

/// Where an expected outcome comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Stated in the published source.
    Published,
    /// Immediate from definitions.
    Trivial,
    /// Computed once by an independent oracle and recorded.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    #[serde(flatten)]
    pub kind: TestKind,
    pub expect: String,
    pub provenance: Provenance,
    /// The claim behind the expectation.
    pub claim: String,
    /// Long-running; skipped unless requested.
    #[serde(default)]
    pub heavy: bool,
    /// Parameter values for this test only. They replace both the scenario
    /// values and run-time overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub d: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Expressions that must evaluate to true (non-zero).
    #[serde(default)]
    pub constraints: Vec<String>,
    pub domain: DomainConfig,
    pub operator: OperatorConfig,
    pub potential: Option<PotentialConfig>,
    #[serde(rename = "test")]
    pub tests: Vec<TestSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CatalogDoc {
    scenario: Vec<Scenario>,
}

/// Parses a scenario document with one or more `[[scenario]]` tables.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>> {
    let doc: CatalogDoc =
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario document: {e}")))?;
    let mut seen = BTreeSet::new();
    for s in &doc.scenario {
        if !seen.insert(s.name.clone()) {
            return Err(Error::Config(format!(
                "duplicate scenario name '{}'",
                s.name
            )));
        }
    }
    Ok(doc.scenario)
}

pub fn scenarios_to_toml(list: &[Scenario]) -> Result<String> {
    let doc = CatalogDoc {
        scenario: list.to_vec(),
    };
    toml::to_string(&doc).map_err(|e| Error::Config(format!("serializing scenarios: {e}")))
}

/// The built-in catalog.
pub fn catalog() -> Result<Vec<Scenario>> {
    parse_scenarios(CATALOG_TOML)
}

pub fn find_scenario(name: &str) -> Result<Scenario> {
    catalog()?
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Config(format!("no scenario named '{name}'")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub d: usize,
    pub params: BTreeMap<String, f64>,
    pub tests: Vec<CatalogTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogTest {
    pub test: String,
    pub expect: String,
    pub provenance: Provenance,
    pub claim: String,
    pub heavy: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

/// The built-in catalog with expectations and provenance.
pub fn list_scenarios() -> Result<Vec<CatalogEntry>> {
    Ok(describe_scenarios(catalog()?))
}

pub fn describe_scenarios(list: Vec<Scenario>) -> Vec<CatalogEntry> {
    list.into_iter()
        .map(|s| CatalogEntry {
            tests: s
                .tests
                .iter()
                .map(|t| CatalogTest {
                    test: t.kind.name().into(),
                    expect: t.expect.clone(),
                    provenance: t.provenance,
                    claim: t.claim.clone(),
                    heavy: t.heavy,
                    params: t.params.clone(),
                })
                .collect(),
            name: s.name,
            description: s.description,
            d: s.d,
            params: s.params,
        })
        .collect()
}

/// Run-time adjustments to a scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    /// Replacement parameter values; unknown names are rejected.
    pub params: BTreeMap<String, f64>,
    pub include_heavy: bool,
    pub seed: u64,
    /// Replaces the path count of probe tests.
    pub paths: Option<usize>,
    /// Relative quadrature tolerance.
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
    Error,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test: String,
    pub expected: String,
    pub observed: String,
    pub outcome: Outcome,
    pub provenance: Provenance,
    pub claim: String,
    /// Test-level parameter values, if any.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub d: usize,
    pub params: BTreeMap<String, f64>,
    pub domain: String,
    pub operator: String,
    pub potential: Option<String>,
    pub results: Vec<TestResult>,
}

impl ScenarioResult {
    pub fn count(&self, o: Outcome) -> usize {
        self.results.iter().filter(|r| r.outcome == o).count()
    }

    pub fn all_pass(&self) -> bool {
        self.results
            .iter()
            .all(|r| matches!(r.outcome, Outcome::Pass | Outcome::Skipped))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = writeln!(
            s,
            "### {} (d={}; {})\n",
            self.scenario,
            self.d,
            params.join(", ")
        );
        let _ = writeln!(s, "| test | expected | observed | outcome | provenance |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for r in &self.results {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:?} | {:?} |",
                r.test, r.expected, r.observed, r.outcome, r.provenance
            );
        }
        s
    }
}

/// A scenario with its parameters resolved and objects built.
pub struct Setup {
    pub d: usize,
    /// Parameter values, including `d`.
    pub vars: BTreeMap<String, f64>,
    pub domain: CuspDomain,
    pub field: LambdaField,
    pub spec: Option<PotentialSpec>,
    pub q: QuadConfig,
    pub seed: u64,
    pub paths: Option<usize>,
}

impl ProfileConfig {
    pub fn resolve(&self, d: usize, vars: &BTreeMap<String, f64>) -> Result<ProfileKind> {
        Ok(match self {
            ProfileConfig::ExpSpine { eps } => ProfileKind::ExpSpine {
                eps: eps.get(vars)?,
            },
            ProfileConfig::Power { eta } => ProfileKind::Power {
                eta: eta.get(vars)?,
            },
            ProfileConfig::LogPower { eta } => ProfileKind::LogPower {
                eta: eta.get(vars)?,
            },
            ProfileConfig::IterLogPower { p } => ProfileKind::IterLogPower { p: p.get(vars)? },
            ProfileConfig::PowerIterLog => ProfileKind::PowerIterLog,
            ProfileConfig::DMinus3LogLog => ProfileKind::DMinus3LogLog { d: d as u32 },
        })
    }
}

impl PotentialConfig {
    pub fn resolve(&self, d: usize, vars: &BTreeMap<String, f64>) -> Result<Preset> {
        let opt = |c: &Option<Num>| c.as_ref().map(|n| n.get(vars)).transpose();
        Ok(match self {
            PotentialConfig::Lebesgue => Preset::Lebesgue,
            PotentialConfig::T21D3 { eps } => Preset::T21D3 {
                eps: eps.get(vars)?,
            },
            PotentialConfig::T21Dge4 { eps, alpha, c } => {
                let alpha = alpha.get(vars)?;
                Preset::T21Dge4 {
                    eps: eps.get(vars)?,
                    alpha,
                    d: d as u32,
                    c: opt(c)?.unwrap_or_else(|| Preset::default_c_t21_dge4(alpha)),
                }
            }
            PotentialConfig::T23D3 { c } => Preset::T23D3 {
                c: opt(c)?.unwrap_or(Preset::DEFAULT_C_T23_D3),
            },
            PotentialConfig::T23Dge4 { gamma, c } => Preset::T23Dge4 {
                gamma: gamma.get(vars)?,
                d: d as u32,
                c: opt(c)?.unwrap_or(Preset::DEFAULT_C_T23_DGE4),
            },
            PotentialConfig::L71 { mu0, gamma, c } => Preset::L71 {
                mu0: mu0.get(vars)?,
                gamma: gamma.get(vars)?,
                c: opt(c)?.unwrap_or(Preset::DEFAULT_C_L71),
            },
            PotentialConfig::Pilot { mu } => Preset::Pilot { mu: mu.get(vars)? },
        })
    }
}

impl Scenario {
    fn vars(&self, overrides: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
        let mut vars = self.params.clone();
        for (k, v) in overrides {
            if !vars.contains_key(k) {
                let known: Vec<&str> = self.params.keys().map(|s| s.as_str()).collect();
                return Err(Error::Config(format!(
                    "scenario '{}' has no parameter '{k}' (parameters: {})",
                    self.name,
                    known.join(", ")
                )));
            }
            vars.insert(k.clone(), *v);
        }
        vars.insert("d".into(), self.d as f64);
        Ok(vars)
    }

    /// Checks the parameter constraints and that every object builds.
    pub fn validate(&self, overrides: &BTreeMap<String, f64>) -> Result<()> {
        self.setup(&Overrides {
            params: overrides.clone(),
            ..Overrides::default()
        })
        .map(|_| ())
    }

    /// Resolves parameters, checks constraints and builds the domain,
    /// operator and potential.
    pub fn setup(&self, ov: &Overrides) -> Result<Setup> {
        let vars = self.vars(&ov.params)?;
        for c in &self.constraints {
            if expr::eval(c, &vars)? == 0.0 {
                return Err(Error::Config(format!(
                    "scenario '{}': constraint '{c}' fails",
                    self.name
                )));
            }
        }
        let mut q = QuadConfig::default();
        if let Some(t) = ov.tol {
            if !(t > 0.0) {
                return Err(Error::Config("tolerance must be positive".into()));
            }
            q.rel_tol = t;
        }
        let c = self.domain.c.get(&vars)?;
        let profile = SpineProfile::new(self.domain.profile.resolve(self.d, &vars)?, c)?;
        let domain = CuspDomain::new(self.d, c, profile, self.domain.symmetric)?;
        let spec = match &self.potential {
            Some(p) => {
                let s = PotentialSpec::from_preset(p.resolve(self.d, &vars)?)?;
                Some(s)
            }
            None => None,
        };
        let field = match &self.operator {
            OperatorConfig::Laplacian => LambdaField::constant(1.0)?,
            OperatorConfig::Constant { lambda } => LambdaField::constant(lambda.get(&vars)?)?,
            OperatorConfig::Omega { scale } => {
                let Some(s) = &spec else {
                    return Err(Error::Config(format!(
                        "scenario '{}': an omega operator needs a potential",
                        self.name
                    )));
                };
                LambdaField::omega(s.clone(), scale.get(&vars)?, q)
            }
        };
        for t in &self.tests {
            if t.kind.needs_potential() && spec.is_none() {
                return Err(Error::Config(format!(
                    "scenario '{}': test {} needs a potential",
                    self.name,
                    t.kind.name()
                )));
            }
        }
        Ok(Setup {
            d: self.d,
            vars,
            domain,
            field,
            spec,
            q,
            seed: ov.seed,
            paths: ov.paths,
        })
    }
}

fn lower<T: std::fmt::Debug>(v: T) -> String {
    let s = format!("{v:?}");
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if ch.is_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.extend(ch.to_lowercase());
        } else {
            out.push(ch);
        }
    }
    out
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn scaled_annuli(annuli: &[(f64, f64)], c: f64) -> Vec<(f64, f64)> {
    annuli.iter().map(|(a, b)| (a * c, b * c)).collect()
}

/// Runs one test; returns the observed outcome label and details.
pub fn run_test(kind: &TestKind, ctx: &Setup) -> Result<(String, Value)> {
    let spec = || ctx.spec.as_ref().expect("validated");
    let profile = &ctx.domain.profile;
    let q = &ctx.q;
    match kind {
        TestKind::ItoMckean => {
            let v = ito_mckean_test(profile, ctx.d, &default_probe(profile.c), q)?;
            Ok((lower(v.verdict), to_json(&v)))
        }
        TestKind::Dini {
            modulus,
            weighted,
            c,
        } => {
            let m = match modulus {
                ModulusName::Linear => Modulus::Linear,
                ModulusName::InverseLog => Modulus::InverseLog,
                ModulusName::InverseLogLog => Modulus::InverseLogLog,
            };
            let c = c.get(&ctx.vars)?;
            let v = dini_test(&m, c, *weighted, &default_probe(c), q)?;
            let agree = v
                .closed_form
                .is_none_or(|cf| cf == v.probe_class || v.probe_class == DiniClass::Inconclusive);
            Ok((
                lower(v.class),
                json!({ "modulus": m.name(), "agrees_with_closed_form": agree, "verdict": to_json(&v) }),
            ))
        }
        TestKind::OmegaDini { samples } => {
            let rows = omega_dini_witness(spec(), &samples.points(&ctx.vars)?, q)?;
            let ok = rows.iter().all(|r| r.holds);
            Ok((if ok { "holds" } else { "fails" }.into(), to_json(&rows)))
        }
        TestKind::OmegaOrigin { value, radii } => {
            let expected = value.get(&ctx.vars)?;
            let s = spec();
            let mu0 = s.mu_at_zero();
            let lambda0 = ctx.field.value(&vec![0.0; ctx.d])?;
            let radii = radii.points(&ctx.vars)?;
            let mut rays = Vec::new();
            let mut monotone = true;
            for theta in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
                let devs: Vec<f64> = radii
                    .iter()
                    .map(|&rho| {
                        Ok((s.eval_omega(rho * theta.cos(), rho * theta.sin(), q)? - mu0).abs())
                    })
                    .collect::<Result<_>>()?;
                monotone &= devs.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
                rays.push(json!({ "theta": theta, "deviation": devs }));
            }
            let matches = (lambda0 - expected).abs() <= 1e-12 * expected.abs().max(1.0);
            let label = if matches && monotone {
                "continuous"
            } else {
                "discontinuous"
            };
            Ok((
                label.into(),
                json!({ "lambda_origin": lambda0, "mu_origin": mu0, "radii": radii, "rays": rays, "monotone": monotone }),
            ))
        }
        TestKind::Blowup { samples } => {
            let r = blowup_check(spec(), profile, &samples.points(&ctx.vars)?, q)?;
            let label = if !(r.bounds_hold && r.log_ratio_holds) {
                "bound_violated"
            } else if r.growth_diverges {
                "diverges"
            } else {
                "bounded"
            };
            Ok((label.into(), to_json(&r)))
        }
        TestKind::Barrier {
            exponent,
            annuli,
            density,
        } => {
            let cand = BarrierCandidate {
                w: Arc::new(RadialPower {
                    a: exponent.get(&ctx.vars)?,
                }),
                field: ctx.field.clone(),
                d: ctx.d,
                domain: ctx.domain.clone(),
            };
            let r = verify_barrier(&cand, &scaled_annuli(annuli, ctx.domain.c), *density)?;
            Ok((
                if r.passes { "passes" } else { "fails" }.into(),
                to_json(&r),
            ))
        }
        TestKind::Superharmonic { p, annuli, density } => {
            let r = verify_superharmonic_blowup(
                p.get(&ctx.vars)?,
                &ctx.field,
                ctx.d,
                annuli,
                *density,
            )?;
            Ok((if r.holds { "holds" } else { "fails" }.into(), to_json(&r)))
        }
        TestKind::Witness { p, annuli } => {
            let pair = WitnessPair {
                u: Arc::new(PotentialFunction::new(
                    spec().clone(),
                    *q,
                    PotentialForm::Value,
                )?),
                w: Arc::new(InversePower {
                    p: p.get(&ctx.vars)?,
                }),
                field: ctx.field.clone(),
                d: ctx.d,
            };
            let cfg = WitnessConfig {
                annuli: scaled_annuli(annuli, ctx.domain.c),
                ..WitnessConfig::default()
            };
            let r = irregularity_witness(
                &pair,
                &ctx.domain,
                &ApproachPath::defaults(&ctx.domain),
                &cfg,
            )?;
            Ok((
                if r.valid { "valid" } else { "invalid" }.into(),
                to_json(&r),
            ))
        }
        TestKind::Ratio { samples } => {
            let r = barrier_ratio_check(spec(), profile, ctx.d, &samples.points(&ctx.vars)?, q)?;
            let diverges = r.fit.as_ref().is_some_and(|f| f.growth == Growth::Diverges);
            let label = if r.exceeds_one && r.increasing && diverges {
                "diverges"
            } else if r.exceeds_one {
                "exceeds_one"
            } else {
                "fails"
            };
            Ok((label.into(), to_json(&r)))
        }
        TestKind::SplitBound { r_over_x, samples } => {
            let k = r_over_x.get(&ctx.vars)?;
            let xs = samples.points(&ctx.vars)?;
            let ratios: Vec<f64> = xs
                .iter()
                .map(|&x| spec().u1_bound_ratio(x, k * x, q))
                .collect::<Result<_>>()?;
            let fit = classify_growth(&xs, &ratios)?;
            let finite = ratios.iter().all(|v| v.is_finite() && *v > 0.0);
            let label = match fit.growth {
                Growth::Converges { .. } if finite => "bounded",
                Growth::Diverges => "unbounded",
                _ => "inconclusive",
            };
            Ok((
                label.into(),
                json!({ "x": xs, "ratio": ratios, "fit": to_json(&fit) }),
            ))
        }
        TestKind::SpineDerivative { samples, tol } => {
            let Some(Preset::L71 { mu0, .. }) = spec().preset() else {
                return Err(Error::Config(
                    "spine_derivative needs the L71 potential".into(),
                ));
            };
            let lim = spec().spine_derivative_limit(profile, &samples.points(&ctx.vars)?, q)?;
            let target = -(2f64.powf(mu0)) * (1.0 + 3f64.powf(-mu0));
            let diff = (lim.boundary_terms.value - target).abs();
            let label = if diff <= *tol { "matches" } else { "mismatch" };
            Ok((
                label.into(),
                json!({ "target": target, "difference": diff, "limit": to_json(&lim) }),
            ))
        }
        TestKind::TailIdentity { mu, tol } => {
            let mut rows = Vec::new();
            let mut ok = true;
            for &m in mu {
                let v = tail_integral(m, -1.0, q)?;
                let diff = (v.value - (2f64.powf(m) - 1.0)).abs();
                ok &= diff <= *tol;
                rows.push(
                    json!({ "mu": m, "value": v.value, "error": v.error, "difference": diff }),
                );
            }
            Ok((
                if ok { "matches" } else { "mismatch" }.into(),
                Value::Array(rows),
            ))
        }
        TestKind::Probe {
            operator,
            radii,
            tent,
            paths,
            step,
            depth,
        } => {
            let field = match operator {
                ProbeOperator::Scenario => ctx.field.clone(),
                ProbeOperator::Laplacian => LambdaField::constant(1.0)?,
            };
            let rho = tent.get(&ctx.vars)?;
            let g =
                move |x: &[f64]| (1.0 - x.iter().map(|v| v * v).sum::<f64>().sqrt() / rho).max(0.0);
            let cfg = ProbeConfig {
                sim: SimConfig {
                    step: *step,
                    paths: ctx.paths.unwrap_or(*paths),
                    seed: ctx.seed,
                    refinement_depth: *depth,
                    ..SimConfig::default()
                },
                ..ProbeConfig::default()
            };
            let starts = axis_starts(ctx.d, radii, true);
            let r = regularity_probe(&ctx.domain, &field, &starts, g, 1.0, &cfg)?;
            let label = match r.evidence {
                Evidence::ConsistentWithRegular => "consistent_with_regular",
                Evidence::ConsistentWithIrregular => "consistent_with_irregular",
                Evidence::Inconclusive => "inconclusive",
            };
            Ok((label.into(), to_json(&r)))
        }
    }
}

/// Executes the test list of `s` and compares against the expectations.
pub fn run_scenario(s: &Scenario, ov: &Overrides) -> Result<ScenarioResult> {
    let ctx = s.setup(ov)?;
    let results = s
        .tests
        .iter()
        .map(|t| {
            let local;
            let ctx = if t.params.is_empty() {
                &ctx
            } else {
                let mut ov = ov.clone();
                ov.params.extend(t.params.clone());
                local = s.setup(&ov);
                match &local {
                    Ok(c) => c,
                    Err(e) => {
                        return TestResult {
                            test: t.kind.name().into(),
                            expected: t.expect.clone(),
                            observed: "error".into(),
                            outcome: Outcome::Error,
                            provenance: t.provenance,
                            claim: t.claim.clone(),
                            params: t.params.clone(),
                            detail: json!({ "message": e.to_string() }),
                        }
                    }
                }
            };
            let base = |observed: String, outcome: Outcome, detail: Value| TestResult {
                test: t.kind.name().into(),
                expected: t.expect.clone(),
                observed,
                outcome,
                provenance: t.provenance,
                claim: t.claim.clone(),
                params: t.params.clone(),
                detail,
            };
            if t.heavy && !ov.include_heavy {
                return base("not run".into(), Outcome::Skipped, Value::Null);
            }
            match run_test(&t.kind, ctx) {
                Ok((observed, detail)) => {
                    let outcome = if observed == t.expect {
                        Outcome::Pass
                    } else if observed == "inconclusive" {
                        Outcome::Inconclusive
                    } else {
                        Outcome::Fail
                    };
                    base(observed, outcome, detail)
                }
                Err(Error::Inconclusive(m)) => base(
                    "inconclusive".into(),
                    Outcome::Inconclusive,
                    json!({ "message": m }),
                ),
                Err(e) => base(
                    "error".into(),
                    Outcome::Error,
                    json!({ "message": e.to_string() }),
                ),
            }
        })
        .collect();
    let mut params = ctx.vars.clone();
    params.remove("d");
    Ok(ScenarioResult {
        scenario: s.name.clone(),
        d: s.d,
        params,
        domain: format!(
            "B({}) minus spine {}{}",
            ctx.domain.c,
            ctx.domain.profile.name(),
            if ctx.domain.symmetric {
                " (symmetric)"
            } else {
                ""
            }
        ),
        operator: ctx.field.describe(),
        potential: ctx.spec.as_ref().map(|s| s.name()),
        results,
    })
}

/// Verdict labels used in expectations.
pub fn verdict_label(v: Verdict) -> String {
    lower(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_parses_and_names_are_unique() {
        let c = catalog().unwrap();
        assert!(c.len() >= 11);
    }

    #[test]
    fn catalog_round_trips() {
        let c = catalog().unwrap();
        let text = scenarios_to_toml(&c).unwrap();
        assert_eq!(parse_scenarios(&text).unwrap(), c);
    }

    #[test]
    fn every_entry_validates() {
        for s in catalog().unwrap() {
            s.validate(&BTreeMap::new())
                .unwrap_or_else(|e| panic!("{}: {e}", s.name));
        }
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let one = scenarios_to_toml(&catalog().unwrap()[..1]).unwrap();
        let two = format!("{one}\n{one}");
        assert!(matches!(parse_scenarios(&two), Err(Error::Config(_))));
    }

    #[test]
    fn lower_labels() {
        assert_eq!(lower(Verdict::Irregular), "irregular");
        assert_eq!(
            lower(Evidence::ConsistentWithRegular),
            "consistent_with_regular"
        );
    }

    #[test]
    fn unknown_override_is_rejected() {
        let s = find_scenario("thm_2_1_d3").unwrap();
        let mut ov = BTreeMap::new();
        ov.insert("nope".to_string(), 1.0);
        assert!(matches!(s.validate(&ov), Err(Error::Config(_))));
    }
}
