//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed. Pass criterion
//! numbers as arguments to run a subset, e.g.
//! `cargo test -p spinelab-core --test acceptance -- 3 7`.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use spinelab::barriers::{
    irregularity_witness, verify_barrier, verify_superharmonic_blowup, ApproachPath,
    BarrierCandidate, InversePower, PotentialForm, PotentialFunction, RadialPower, WitnessConfig,
    WitnessPair, WitnessReport,
};
use spinelab::diffusion::{exit_time_estimate, increment_covariance, measure_from_samples};
use spinelab::potentials::tail_integral;
use spinelab::regularity::{default_probe, dini_test, omega_dini_witness, DiniClass, Modulus};
use spinelab::scenarios::{catalog, Outcome, Overrides};
use spinelab::*;

type Check = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Check);

fn quad() -> QuadConfig {
    QuadConfig::default()
}

fn spec(p: Preset) -> PotentialSpec {
    PotentialSpec::from_preset(p).expect("valid preset")
}

fn profile(kind: ProfileKind, c: f64) -> Result<SpineProfile> {
    SpineProfile::new(kind, c)
}

/// `k`-th point of the two-dimensional R2 low-discrepancy sequence.
fn r2(k: usize) -> (f64, f64) {
    let a = (k as f64 * 0.754_877_666_246_692_7).fract();
    let b = (k as f64 * 0.569_840_290_998_053_2).fract();
    (a, b)
}

fn pde_residual_suite() -> Check {
    let t0 = Instant::now();
    let q = QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-15,
        max_subdivisions: 4000,
        singularity_split: true,
    };
    let presets = [
        Preset::Lebesgue,
        Preset::T21D3 { eps: 0.3 },
        Preset::T21D3 { eps: 0.5 },
        Preset::T21D3 { eps: 0.8 },
        Preset::T23D3 { c: 0.05 },
        Preset::L71 {
            mu0: 1.5,
            gamma: 1.5,
            c: 0.25,
        },
        Preset::Pilot { mu: 2.0 },
    ];
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for p in presets {
        let s = spec(p);
        for k in 1..=100 {
            let (a, b) = r2(k);
            let x = -3.0 + 6.0 * a;
            let r = 0.05 * 60f64.powf(b);
            let res = s.pde_residual(x, r, &q)?.residual.abs();
            if !(res <= worst) {
                worst = res;
                worst_at = format!("{} at ({x:.4}, {r:.4})", s.name());
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass = worst <= 1e-7 && elapsed <= Duration::from_secs(60);
    Ok((
        pass,
        format!(
            "max |residual| {worst:.2e} ({worst_at}) over 7 presets x 100 points, {:.1} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn witness(u: Preset, field: f64, domain: &CuspDomain) -> Result<WitnessReport> {
    let pair = WitnessPair {
        u: Arc::new(PotentialFunction::new(
            spec(u),
            quad(),
            PotentialForm::Value,
        )?),
        w: Arc::new(InversePower { p: 1.0 }),
        field: LambdaField::constant(field)?,
        d: 3,
    };
    irregularity_witness(
        &pair,
        domain,
        &ApproachPath::defaults(domain),
        &WitnessConfig::default(),
    )
}

fn thm_2_1_d3_domain() -> Result<CuspDomain> {
    CuspDomain::new(3, 0.5, profile(ProfileKind::Power { eta: 3.0 }, 0.5)?, true)
}

fn limit_values() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [0.25, 0.5] {
        let dom = CuspDomain::new(3, 0.5, profile(ProfileKind::ExpSpine { eps }, 0.5)?, false)?;
        let w = witness(Preset::Lebesgue, 1.0, &dom)?;
        let a_ok = (w.alpha - 1.0).abs() <= 1e-4;
        let b_ok = (w.beta - (1.0 + 2.0 * eps)).abs() <= 2e-2;
        pass &= a_ok && b_ok;
        parts.push(format!(
            "Lebesgue eps={eps}: interior {:.7} (want 1), spine {:.6} (want {})",
            w.alpha,
            w.beta,
            1.0 + 2.0 * eps
        ));
    }
    let w = witness(Preset::T21D3 { eps: 0.5 }, 2.0, &thm_2_1_d3_domain()?)?;
    let ok = (w.alpha - 2.0).abs() <= 1e-4;
    pass &= ok;
    parts.push(format!("T21_d3 axis limit {:.7} (want 2)", w.alpha));
    Ok((pass, parts.join("; ")))
}

fn closed_form_identity() -> Check {
    let q = QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        ..QuadConfig::default()
    };
    let mut worst_tail = 0.0f64;
    for mu in [1.2, 1.5, 2.0, 2.7] {
        let v = tail_integral(mu, -1.0, &q)?.value;
        worst_tail = worst_tail.max((v - (2f64.powf(mu) - 1.0)).abs());
    }
    let tail_ok = worst_tail <= 1e-8;

    // Moving-limit terms of x|ln x|^γ [u₂(x, r(x))]' at x = 1e-6, and their
    // extrapolation from samples ending there.
    let mut raw_worst = 0.0f64;
    let mut extrap_worst = 0.0f64;
    let prof = profile(ProfileKind::Power { eta: 2.0 }, 0.25)?;
    let xs: Vec<f64> = (0..=8)
        .map(|k| 1e-2 * 10f64.powf(-0.5 * k as f64))
        .collect();
    for mu in [1.2, 1.5, 2.0, 2.7] {
        let s = spec(Preset::L71 {
            mu0: mu,
            gamma: 1.5,
            c: 0.25,
        });
        let want = -(2f64.powf(mu)) * (1.0 + 3f64.powf(-mu));
        let lim = s.spine_derivative_limit(&prof, &xs, &q)?;
        let raw = lim.samples.last().expect("samples").boundary_terms;
        raw_worst = raw_worst.max(((raw - want) / want).abs());
        extrap_worst = extrap_worst.max((lim.boundary_terms.value - want).abs());
    }
    let raw_ok = raw_worst <= 1e-3;
    Ok((
        tail_ok && raw_ok,
        format!(
            "tail identity max error {worst_tail:.1e}; boundary terms at x=1e-6 off by {:.2}% \
             (needs 0.1%; the factor (|ln x|/|ln 2x|)^1.5 = {:.4} is intrinsic); \
             extrapolated to x->0 from samples ending at 1e-6: max error {extrap_worst:.1e}",
            100.0 * raw_worst,
            ((1e-6f64).ln() / (2e-6f64).ln()).powf(1.5)
        ),
    ))
}

fn verdict_matrix() -> Check {
    let t0 = Instant::now();
    let q = quad();
    let cases = [
        (ProfileKind::Power { eta: 2.0 }, 3, Verdict::Regular),
        (ProfileKind::Power { eta: 3.0 }, 3, Verdict::Regular),
        (ProfileKind::ExpSpine { eps: 0.5 }, 3, Verdict::Irregular),
        (ProfileKind::IterLogPower { p: 1.0 }, 4, Verdict::Regular),
        (ProfileKind::IterLogPower { p: 0.5 }, 5, Verdict::Regular),
        (ProfileKind::DMinus3LogLog { d: 4 }, 4, Verdict::Regular),
        (ProfileKind::LogPower { eta: 2.0 }, 4, Verdict::Irregular),
        (ProfileKind::LogPower { eta: 0.75 }, 5, Verdict::Irregular),
    ];
    let mut pass = true;
    let mut bad = Vec::new();
    for (kind, d, want) in &cases {
        let c = 0.25;
        let p = profile(kind.clone(), c)?;
        let v = ito_mckean_test(&p, *d, &default_probe(c), &q)?;
        let closed = v.closed_form.as_ref().map(|c| c.verdict);
        let ok = v.verdict == *want
            && v.probe_verdict == *want
            && closed == Some(*want)
            && v.agrees_with_closed_form;
        if !ok {
            pass = false;
            bad.push(format!(
                "{} d={d}: probe {:?}, closed {:?}",
                p.name(),
                v.probe_verdict,
                closed
            ));
        }
    }
    let elapsed = t0.elapsed();
    pass &= elapsed <= Duration::from_secs(5);
    let mut msg = format!(
        "{} profiles, probe and closed form agree on {}, {:.2} s",
        cases.len(),
        cases.len() - bad.len(),
        elapsed.as_secs_f64()
    );
    if !bad.is_empty() {
        msg.push_str(&format!("; disagreements: {}", bad.join(", ")));
    }
    Ok((pass, msg))
}

fn blowup_and_witness() -> Check {
    let q = quad();
    let s = spec(Preset::T21D3 { eps: 0.5 });
    let prof = profile(ProfileKind::Power { eta: 3.0 }, 0.5)?;
    let xs: Vec<f64> = (0..=12)
        .map(|k| 0.1 * 10f64.powf(-0.25 * k as f64))
        .collect();
    let b = blowup_check(&s, &prof, &xs, &q)?;
    let crossing = b
        .samples
        .iter()
        .find(|s| s.u > 10.0 * b.u_origin)
        .map(|s| s.x);
    let blowup_ok = crossing.is_some_and(|x| x >= 1e-4 * (1.0 - 1e-12)) && b.bounds_hold;
    let at_end = b.samples.last().expect("samples");
    let w = witness(Preset::T21D3 { eps: 0.5 }, 2.0, &thm_2_1_d3_domain()?)?;
    let witness_ok = w.valid && w.gap >= 0.5;
    Ok((
        blowup_ok && witness_ok,
        format!(
            "u(0,0) = {:.4}; u(x, x^3) first exceeds 10 u(0,0) at x = {}; u(1e-4, 1e-12) = {:.3e}; \
             lower bound holds at {}/{} samples; witness alpha {:.4}, beta {:.4}, gap {:.4}, hypotheses {}",
            b.u_origin,
            crossing.map_or("never".into(), |x| format!("{x:.2e}")),
            at_end.u,
            b.samples.iter().filter(|s| s.holds).count(),
            b.samples.len(),
            w.alpha,
            w.beta,
            w.gap,
            if w.valid { "hold" } else { "fail" }
        ),
    ))
}

fn barrier_suite() -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, eps) in [(3usize, 0.4), (4, 0.3), (5, 0.2)] {
        let dom = CuspDomain::new(d, 0.5, profile(ProfileKind::Power { eta: 2.0 }, 0.5)?, true)?;
        let cand = BarrierCandidate {
            w: Arc::new(RadialPower {
                a: 1.0 - eps * (d as f64 - 2.0),
            }),
            field: LambdaField::constant(eps)?,
            d,
            domain: dom,
        };
        let r = verify_barrier(&cand, &[(0.01, 0.05), (0.05, 0.2), (0.2, 0.45)], 12)?;
        let max_lw = r.annuli.iter().map(|a| a.max_abs_lw).fold(0.0, f64::max);
        let min_w = r
            .annuli
            .iter()
            .map(|a| a.min_w)
            .fold(f64::INFINITY, f64::min);
        let ok = r.passes && max_lw <= 1e-9 && min_w > 0.0 && r.limit.tends_to_zero;
        pass &= ok;
        parts.push(format!(
            "d={d} eps={eps}: max|Lw| {max_lw:.1e}, min w {min_w:.3e}"
        ));
    }
    let annuli = [(0.01, 0.1), (0.1, 1.0)];
    for lambda in [1.0, 2.0] {
        let r = verify_superharmonic_blowup(1.0, &LambdaField::constant(lambda)?, 3, &annuli, 10)?;
        // Lw = 0 exactly at lambda = 1; `holds` allows for rounding.
        pass &= r.holds;
        parts.push(format!(
            "1/|x| lambda={lambda}: max Lw {:.2e} (holds: {})",
            r.max_lw, r.holds
        ));
    }
    let r = verify_superharmonic_blowup(1.0, &LambdaField::constant(0.5)?, 3, &annuli, 10)?;
    pass &= !r.superharmonic && r.max_lw > 0.0;
    parts.push(format!("1/|x| lambda=0.5: max Lw {:.2e} (fails)", r.max_lw));
    Ok((pass, parts.join("; ")))
}

fn dini_suite() -> Check {
    let q = quad();
    let cases = [
        (Modulus::Linear, 0.5, false),
        (Modulus::InverseLog, 0.5, false),
        (Modulus::InverseLog, 0.5, true),
        (Modulus::InverseLogLog, 0.05, false),
        (Modulus::InverseLogLog, 0.05, true),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, c, weighted) in &cases {
        let v = dini_test(m, *c, *weighted, &default_probe(*c), &q)?;
        let ok = v.closed_form == Some(v.probe_class) && v.probe_class != DiniClass::Inconclusive;
        pass &= ok;
        parts.push(format!(
            "{}{}: {:?}",
            m.name(),
            if *weighted { " (log-weighted)" } else { "" },
            v.probe_class
        ));
    }
    let s = spec(Preset::T23D3 { c: 0.05 });
    let xs: Vec<f64> = (0..=10).map(|k| 1e-2 * 10f64.powf(-(k as f64))).collect();
    let rows = omega_dini_witness(&s, &xs, &q)?;
    let held = rows.iter().filter(|r| r.holds).count();
    pass &= held == rows.len();
    parts.push(format!(
        "omega inequality holds at {held}/{} samples",
        rows.len()
    ));
    Ok((pass, parts.join("; ")))
}

fn diffusion_consistency() -> Check {
    let t0 = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();

    let d = 3;
    let c = 0.5;
    let ball = CuspDomain::new(d, c, profile(ProfileKind::Power { eta: 12.0 }, c)?, false)?;
    let cfg = SimConfig {
        paths: 100_000,
        max_steps: 10_000_000,
        ..SimConfig::default()
    };
    let x0 = [-0.25, 0.0, 0.0];
    let s = simulate_paths(&ball, &LambdaField::constant(1.0)?, &x0, &cfg)?;
    let e = exit_time_estimate(&s)?;
    let exact = (c * c - 0.0625) / (2.0 * d as f64);
    let z = e.z_distance(exact);
    pass &= z <= 3.0;
    parts.push(format!(
        "ball exit time {:.6} +- {:.6} vs {exact:.6} ({z:.2} hw)",
        e.mean, e.half_width_95
    ));

    // Joint 95% level over the 6 distinct entries (Bonferroni): normal
    // quantiles at 1 - 0.025/6 and 0.975.
    let joint = 2.638_257_273_476_751 / 1.959_963_984_540_053_6;
    let mut worst = 0.0f64;
    for lambda in [1.0, 0.3, 5.0] {
        let cov = increment_covariance(
            &LambdaField::constant(lambda)?,
            &[0.1, 0.2, -0.3],
            1e-3,
            100_000,
            0,
        )?;
        worst = worst.max(cov.max_z);
    }
    pass &= worst <= joint;
    parts.push(format!(
        "increment covariance max {worst:.2} hw (joint bound {joint:.3})"
    ));

    let q = quad();
    let leb = spec(Preset::Lebesgue);
    let dom = CuspDomain::new(
        3,
        0.5,
        profile(ProfileKind::ExpSpine { eps: 0.5 }, 1.0)?,
        false,
    )?;
    let cfg = SimConfig {
        paths: 100_000,
        max_steps: 10_000_000,
        refinement_depth: 50,
        ..SimConfig::default()
    };
    let g = |x: &[f64]| {
        let r = (x[1] * x[1] + x[2] * x[2]).sqrt();
        leb.eval_u(x[0], r, &q).map_or(f64::NAN, |e| e.value)
    };
    for t in [0.2, 0.1, 0.05] {
        let s = simulate_paths(&dom, &LambdaField::constant(1.0)?, &[0.0, t, 0.0], &cfg)?;
        let m = measure_from_samples(&s, g)?;
        let exact = leb.eval_u(0.0, t, &q)?.value;
        let z = m.z_distance(exact);
        pass &= z <= 3.0;
        parts.push(format!(
            "Lebesgue t={t}: {:.5} vs {exact:.5} ({z:.2} hw)",
            m.mean
        ));
    }
    let elapsed = t0.elapsed();
    pass &= elapsed <= Duration::from_secs(600);
    parts.push(format!("{:.0} s", elapsed.as_secs_f64()));
    Ok((pass, parts.join("; ")))
}

fn regularity_probe_evidence() -> Check {
    let scenario = catalog()?
        .into_iter()
        .find(|s| s.name == "thm_2_1_d3")
        .ok_or_else(|| Error::Config("thm_2_1_d3 missing from the catalog".into()))?;
    let ov = Overrides {
        include_heavy: true,
        paths: Some(100_000),
        ..Overrides::default()
    };
    let r = run_scenario(&scenario, &ov)?;
    let probes: Vec<_> = r.results.iter().filter(|t| t.test == "probe").collect();
    let pass = probes.len() == 2 && probes.iter().all(|t| t.outcome == Outcome::Pass);
    let parts: Vec<String> = probes
        .iter()
        .zip(["Laplacian", "L_lambda"])
        .map(|(t, op)| {
            format!(
                "{op}: {} (expected {}, gap exponent {:.4} +- {:.4})",
                t.observed,
                t.expected,
                t.detail["gap_exponent"].as_f64().unwrap_or(f64::NAN),
                t.detail["gap_exponent_half_width"]
                    .as_f64()
                    .unwrap_or(f64::NAN),
            )
        })
        .collect();
    Ok((
        pass,
        format!("{}; statistical evidence, not proof", parts.join("; ")),
    ))
}

/// The `spinelab` binary in the target directory of this test executable,
/// rebuilt through cargo when it can be.
fn cli_binary() -> Result<PathBuf> {
    let exe = std::env::current_exe().map_err(|e| Error::Config(e.to_string()))?;
    let dir = exe
        .parent()
        .and_then(|deps| deps.parent())
        .ok_or_else(|| Error::Config("cannot locate the target directory".into()))?;
    let bin = dir.join(format!("spinelab{}", std::env::consts::EXE_SUFFIX));
    if !bin.exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let status = Command::new(cargo)
            .args(["build", "-q", "-p", "spinelab-cli", "--bin", "spinelab"])
            .status()
            .map_err(|e| Error::Config(format!("building the CLI: {e}")))?;
        if !status.success() || !bin.exists() {
            return Err(Error::Config(format!(
                "no CLI binary at {}; build spinelab-cli first",
                bin.display()
            )));
        }
    }
    Ok(bin)
}

fn determinism() -> Check {
    let bin = cli_binary()?;
    let invocations: &[&[&str]] = &[
        &[
            "eval",
            "--preset",
            "t23_d3",
            "--x=-0.02:0.02:5",
            "--r",
            "0.01,0.02",
            "--quantity",
            "all",
        ],
        &[
            "classify",
            "--profile",
            "power:2",
            "--profile",
            "exp:0.5",
            "--d",
            "3",
        ],
        &[
            "barrier",
            "--d",
            "4",
            "--profile",
            "power:2",
            "--symmetric",
            "--operator",
            "constant:0.3",
        ],
        &[
            "witness",
            "--scenario",
            "lebesgue_spine",
            "--format",
            "json",
        ],
        &[
            "--seed",
            "7",
            "simulate",
            "--d",
            "3",
            "--profile",
            "exp:0.5",
            "--operator",
            "constant:2",
            "--start=0.05,0.05,0",
            "--start=-0.2,0,0.1",
            "--paths",
            "500",
            "--g",
            "tent:0.3",
            "--format",
            "csv",
        ],
        &[
            "--seed",
            "11",
            "simulate",
            "--d",
            "3",
            "--profile",
            "power:12",
            "--start=-0.25,0,0",
            "--paths",
            "500",
        ],
        &[
            "scenario",
            "run",
            "lebesgue_spine",
            "thm_2_2_small_eps",
            "--format",
            "json",
        ],
        &[
            "plotdata",
            "potential-along-spine",
            "--scenario",
            "thm_2_1_d3",
        ],
        &["plotdata", "omega-heatmap", "--scenario", "thm_2_3_d3"],
        &[
            "--seed",
            "3",
            "plotdata",
            "exit-histogram",
            "--d",
            "3",
            "--profile",
            "exp:0.5",
            "--start=0,0.1,0",
            "--paths",
            "500",
        ],
    ];
    let run = |threads: &str, args: &[&str]| -> Result<Vec<u8>> {
        let out = Command::new(&bin)
            .arg("--threads")
            .arg(threads)
            .args(args)
            .output()
            .map_err(|e| Error::Config(format!("running {}: {e}", bin.display())))?;
        if !matches!(out.status.code(), Some(0..=2)) || out.stdout.is_empty() {
            return Err(Error::Evaluation(format!(
                "spinelab {}: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        Ok(out.stdout)
    };
    let mut differing = Vec::new();
    for args in invocations {
        let first = run("1", args)?;
        if first != run("1", args)? || first != run("4", args)? {
            differing.push(args.join(" "));
        }
    }
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} invocations byte-identical across repeated runs and 1 vs 4 threads",
                invocations.len()
            )
        } else {
            format!("output differs for: {}", differing.join(" | "))
        },
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("PDE residual suite", pde_residual_suite),
        ("limit values", limit_values),
        ("closed-form identity", closed_form_identity),
        ("regularity verdict matrix", verdict_matrix),
        ("blow-up and witness", blowup_and_witness),
        ("barrier suite", barrier_suite),
        ("Dini suite", dini_suite),
        ("diffusion consistency", diffusion_consistency),
        ("regularity probe", regularity_probe_evidence),
        ("determinism", determinism),
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {} {name} [{:.1} s]: {detail}",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
