//! Short textual forms for profiles, operators, potentials and grids.

use spinelab::scenarios::{Num, OperatorConfig, PotentialConfig, ProfileConfig};
use spinelab::{Error, Result};

fn bad(what: &str, s: &str, forms: &str) -> Error {
    Error::Config(format!(
        "cannot parse {what} '{s}'; expected one of {forms}"
    ))
}

fn numbers(s: &str, n: usize, what: &str, forms: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(what, s, forms))?;
    if v.len() != n {
        return Err(bad(what, s, forms));
    }
    Ok(v)
}

fn split(s: &str) -> (&str, &str) {
    s.split_once(':').unwrap_or((s, ""))
}

const PROFILES: &str = "exp:EPS, power:ETA, logpower:ETA, iterlog:P, poweriterlog, dm3loglog";

pub fn profile(s: &str) -> Result<ProfileConfig> {
    let (kind, rest) = split(s);
    let one = || numbers(rest, 1, "profile", PROFILES).map(|v| Num::Lit(v[0]));
    Ok(match kind {
        "exp" => ProfileConfig::ExpSpine { eps: one()? },
        "power" => ProfileConfig::Power { eta: one()? },
        "logpower" => ProfileConfig::LogPower { eta: one()? },
        "iterlog" => ProfileConfig::IterLogPower { p: one()? },
        "poweriterlog" if rest.is_empty() => ProfileConfig::PowerIterLog,
        "dm3loglog" if rest.is_empty() => ProfileConfig::DMinus3LogLog,
        _ => return Err(bad("profile", s, PROFILES)),
    })
}

const OPERATORS: &str = "laplacian, constant:LAMBDA, omega:SCALE";

pub fn operator(s: &str) -> Result<OperatorConfig> {
    let (kind, rest) = split(s);
    Ok(match kind {
        "laplacian" if rest.is_empty() => OperatorConfig::Laplacian,
        "constant" | "const" => OperatorConfig::Constant {
            lambda: Num::Lit(numbers(rest, 1, "operator", OPERATORS)?[0]),
        },
        "omega" => OperatorConfig::Omega {
            scale: Num::Lit(numbers(rest, 1, "operator", OPERATORS)?[0]),
        },
        _ => return Err(bad("operator", s, OPERATORS)),
    })
}

const PRESETS: &str =
    "lebesgue, t21_d3:EPS, t21_dge4:EPS,ALPHA, t23_d3, t23_dge4:GAMMA, l71:MU0,GAMMA, pilot:MU";

pub fn preset(s: &str) -> Result<PotentialConfig> {
    let (kind, rest) = split(s);
    let nums = |n| numbers(rest, n, "preset", PRESETS);
    Ok(match kind {
        "lebesgue" if rest.is_empty() => PotentialConfig::Lebesgue,
        "t21_d3" => PotentialConfig::T21D3 {
            eps: Num::Lit(nums(1)?[0]),
        },
        "t21_dge4" => {
            let v = nums(2)?;
            PotentialConfig::T21Dge4 {
                eps: Num::Lit(v[0]),
                alpha: Num::Lit(v[1]),
                c: None,
            }
        }
        "t23_d3" if rest.is_empty() => PotentialConfig::T23D3 { c: None },
        "t23_dge4" => PotentialConfig::T23Dge4 {
            gamma: Num::Lit(nums(1)?[0]),
            c: None,
        },
        "l71" => {
            let v = nums(2)?;
            PotentialConfig::L71 {
                mu0: Num::Lit(v[0]),
                gamma: Num::Lit(v[1]),
                c: None,
            }
        }
        "pilot" => PotentialConfig::Pilot {
            mu: Num::Lit(nums(1)?[0]),
        },
        _ => return Err(bad("preset", s, PRESETS)),
    })
}

/// `a:b:n` (n evenly spaced points from a to b) or a comma separated list.
pub fn grid(s: &str) -> Result<Vec<f64>> {
    let forms = "FROM:TO:COUNT or a comma separated list";
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad("grid", s, forms))?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad("grid", s, forms))?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad("grid", s, forms))?;
        return match n {
            0 => Err(bad("grid", s, forms)),
            1 => Ok(vec![a]),
            _ => Ok((0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect()),
        };
    }
    let n = s.split(',').count();
    numbers(s, n, "grid", forms)
}

/// A point `x1,x2,...`.
pub fn point(s: &str) -> Result<Vec<f64>> {
    let n = s.split(',').count();
    numbers(s, n, "point", "comma separated coordinates")
}

/// `a:b,c:d` pairs.
pub fn annuli(s: &str) -> Result<Vec<(f64, f64)>> {
    let forms = "INNER:OUTER pairs separated by commas";
    s.split(',')
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| bad("annuli", s, forms))?;
            let a: f64 = a.trim().parse().map_err(|_| bad("annuli", s, forms))?;
            let b: f64 = b.trim().parse().map_err(|_| bad("annuli", s, forms))?;
            Ok((a, b))
        })
        .collect()
}

/// `name=value`.
pub fn assignment(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got '{s}'"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.trim().to_string(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(
            profile("exp:0.5").unwrap(),
            ProfileConfig::ExpSpine { eps: Num::Lit(0.5) }
        );
        assert_eq!(
            profile("poweriterlog").unwrap(),
            ProfileConfig::PowerIterLog
        );
        assert!(profile("exp").is_err());
        assert!(profile("cone:1").is_err());
        assert_eq!(
            operator("const:2").unwrap(),
            OperatorConfig::Constant {
                lambda: Num::Lit(2.0)
            }
        );
        assert!(matches!(
            preset("l71:1.5,1.5").unwrap(),
            PotentialConfig::L71 { .. }
        ));
        assert!(preset("l71:1.5").is_err());
        assert_eq!(grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(grid("0.1,0.3").unwrap(), vec![0.1, 0.3]);
        assert_eq!(
            annuli("0.1:0.2,0.2:0.4").unwrap(),
            vec![(0.1, 0.2), (0.2, 0.4)]
        );
        assert_eq!(assignment("eps=0.25").unwrap(), ("eps".to_string(), 0.25));
    }
}
