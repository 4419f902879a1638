use std::path::PathBuf;

use clap::{Args, ValueEnum};

use sqsdp::diagnostics::{self, ProbeConfig, ProbeSelection};

use crate::args;
use crate::artifact;
use crate::{CliError, EXIT_OK};

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum What {
    ErrorBound,
    Spectrum,
    Sosc,
    All,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Registry id or path to a problem file.
    pub problem: String,
    /// Probes to run; may be repeated or comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub what: Vec<What>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Radii of the error-bound probe, comma separated.
    #[arg(long, default_value = "1e-2,1e-3,1e-4", value_delimiter = ',')]
    pub radii: Vec<f64>,
    /// Samples per radius for the error-bound probe.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Sampled directions for the SOSC probe.
    #[arg(long, default_value_t = 200)]
    pub dirs: usize,
    #[arg(long, env = "SQSDP_OUT_DIR")]
    pub out: Option<PathBuf>,
}

fn selection(what: &[What]) -> ProbeSelection {
    if what.contains(&What::All) {
        return ProbeSelection::ALL;
    }
    ProbeSelection {
        error_bound: what.contains(&What::ErrorBound),
        spectrum: what.contains(&What::Spectrum),
        sosc: what.contains(&What::Sosc),
    }
}

pub fn run(a: &ProbeArgs) -> Result<i32, CliError> {
    let r = args::resolve_problem(&a.problem)?;
    let vstar = args::require_reference(&r, "probe")?;
    let cfg = ProbeConfig {
        radii: a.radii.clone(),
        samples_per_radius: a.samples,
        num_dirs: a.dirs,
        seed: a.seed,
    };
    let rep = diagnostics::probe(&r.spec, &r.spec.id, vstar, selection(&a.what), &cfg)
        .map_err(|e| CliError::usage("probe", e.to_string()))?;

    let out = args::out_dir(&a.out);
    let path = out.join("probe.json");
    artifact::json(&rep)
        .and_then(|b| artifact::write_atomic(&path, &b))
        .map_err(|e| CliError::usage("write", format!("{}: {e}", path.display())))?;

    if let Some((al, be, ga)) = rep.partition {
        println!(
            "spectrum: |alpha|={al} |beta|={be} |gamma|={ga} strict_complementarity={}",
            rep.strict_complementarity.unwrap_or(false)
        );
    }
    for s in &rep.radii {
        println!(
            "error bound r={:e}: sigma/dist in [{:.3e}, {:.3e}], dist/sigma in [{:.3e}, {:.3e}]",
            s.radius, s.min_sigma_over_dist, s.max_sigma_over_dist, s.min_dist_over_sigma, s.max_dist_over_sigma
        );
    }
    if let Some(s) = &rep.sosc {
        match s.min_curvature {
            Some(c) => println!("sosc: {}/{} directions accepted, min curvature {c:.6e}", s.accepted, s.sampled),
            None => println!("sosc: {}/{} directions accepted, no curvature", s.accepted, s.sampled),
        }
    }
    for n in &rep.notes {
        println!("note: {n}");
    }
    println!("out={}", out.display());
    Ok(EXIT_OK)
}
