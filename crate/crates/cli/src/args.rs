use std::path::{Path, PathBuf};

use sqsdp::model::PrimalDualPoint;
use sqsdp::outer::HessianMode;
use sqsdp::problems::{self, ProblemSpec};

use crate::CliError;

/// `exact`, `fd`, or `perturbed:<exponent>[:<scale>]`.
pub fn parse_hessian(s: &str) -> Result<HessianMode, String> {
    let mut parts = s.split(':');
    match parts.next() {
        Some("exact") if parts.next().is_none() => Ok(HessianMode::Exact),
        Some("fd") if parts.next().is_none() => Ok(HessianMode::FiniteDifference),
        Some("perturbed") => {
            let exponent = parts
                .next()
                .ok_or("perturbed needs an exponent, e.g. perturbed:0.5")?
                .parse::<f64>()
                .map_err(|e| format!("bad exponent: {e}"))?;
            let scale = match parts.next() {
                Some(t) => t.parse::<f64>().map_err(|e| format!("bad scale: {e}"))?,
                None => 1.0,
            };
            if parts.next().is_some() {
                return Err("too many fields in perturbed:<exponent>[:<scale>]".into());
            }
            if !exponent.is_finite() || !(scale >= 0.0) || !scale.is_finite() {
                return Err("perturbed needs a finite exponent and a finite scale >= 0".into());
            }
            Ok(HessianMode::Perturbed { exponent, scale })
        }
        _ => Err(format!("unknown hessian mode '{s}', expected exact, fd or perturbed:<exponent>[:<scale>]")),
    }
}

pub fn hessian_label(mode: HessianMode) -> String {
    match mode {
        HessianMode::Exact => "exact".into(),
        HessianMode::FiniteDifference => "fd".into(),
        HessianMode::Perturbed { exponent, scale } => format!("perturbed:{exponent}:{scale}"),
    }
}

/// A registry id, or a path to a problem file.
pub struct Resolved {
    pub spec: ProblemSpec,
    pub source: String,
}

pub fn resolve_problem(arg: &str) -> Result<Resolved, CliError> {
    if let Some(spec) = problems::builtin(arg) {
        return Ok(Resolved {
            spec,
            source: format!("builtin:{arg}"),
        });
    }
    let path = Path::new(arg);
    if path.exists() || arg.ends_with(".toml") {
        let spec = problems::load(path).map_err(|e| CliError::usage("load", e.to_string()))?;
        return Ok(Resolved {
            spec,
            source: path.display().to_string(),
        });
    }
    Err(CliError::usage(
        "resolve",
        format!("unknown problem '{arg}'; known ids: {}", problems::registry_ids().join(", ")),
    ))
}

pub fn out_dir(arg: &Option<PathBuf>) -> PathBuf {
    arg.clone().unwrap_or_else(|| PathBuf::from("sqsdp-out"))
}

pub fn require_reference<'a>(r: &'a Resolved, what: &'static str) -> Result<&'a PrimalDualPoint, CliError> {
    r.spec.reference_point().ok_or_else(|| {
        CliError::usage(
            what,
            format!("problem '{}' has no stored reference point v*, which {what} needs", r.spec.id),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_modes_parse() {
        assert_eq!(parse_hessian("exact"), Ok(HessianMode::Exact));
        assert_eq!(parse_hessian("fd"), Ok(HessianMode::FiniteDifference));
        assert_eq!(
            parse_hessian("perturbed:0.5"),
            Ok(HessianMode::Perturbed { exponent: 0.5, scale: 1.0 })
        );
        assert_eq!(
            parse_hessian("perturbed:1:2.5"),
            Ok(HessianMode::Perturbed { exponent: 1.0, scale: 2.5 })
        );
        assert!(parse_hessian("perturbed").is_err());
        assert!(parse_hessian("perturbed:x").is_err());
        assert!(parse_hessian("perturbed:1:-1").is_err());
        assert!(parse_hessian("exact:1").is_err());
        assert!(parse_hessian("bfgs").is_err());
    }

    #[test]
    fn unknown_problem_lists_known_ids() {
        let err = resolve_problem("no-such-problem").err().unwrap();
        assert_eq!(err.code, crate::EXIT_USAGE);
        assert!(err.message.contains("scalar-degenerate"));
    }
}
