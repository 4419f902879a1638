//! Files written by the commands. Floats use Rust's shortest round-trip
//! `{:e}` form so identical runs give byte-identical output.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sqsdp::outer::{IterationRecord, SolveReport};
use sqsdp::subqp::SubproblemStatus;

/// Version tag of the iteration CSV layout.
pub const CSV_SCHEMA: &str = "sqsdp-iterations/1";

pub const CSV_COLUMNS: [&str; 13] = [
    "k",
    "sigma",
    "log10_sigma",
    "err",
    "log10_err",
    "norm_delta",
    "alpha",
    "beta",
    "gamma",
    "newton_iters",
    "splitting_iters",
    "sub_residual",
    "sub_status",
];

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn status_label(s: SubproblemStatus) -> &'static str {
    match s {
        SubproblemStatus::Converged => "converged",
        SubproblemStatus::FallbackUsed => "fallback_used",
        SubproblemStatus::Failed => "failed",
    }
}

fn row(r: &IterationRecord) -> Vec<String> {
    let sub = r.subproblem.as_ref();
    vec![
        r.k.to_string(),
        num(r.sigma),
        num(r.sigma.log10()),
        opt(r.err),
        opt(r.err.map(f64::log10)),
        opt(r.norm_delta),
        r.partition.0.to_string(),
        r.partition.1.to_string(),
        r.partition.2.to_string(),
        sub.map(|s| s.newton_iters.to_string()).unwrap_or_default(),
        sub.map(|s| s.splitting_iters.to_string()).unwrap_or_default(),
        opt(sub.map(|s| s.residual)),
        sub.map(|s| status_label(s.status).to_string()).unwrap_or_default(),
    ]
}

pub fn iterations_csv(report: &SolveReport) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in &report.history {
        w.write_record(row(r))?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

pub fn json<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}

/// Write via a sibling temporary file and rename, so readers never see a
/// partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sqsdp::outer::{self, SolverConfig};
    use sqsdp::problems;

    #[test]
    fn csv_has_header_and_one_row_per_record() {
        let spec = problems::builtin("scalar-degenerate").unwrap();
        let v0 = outer::perturb(
            spec.reference_point().unwrap(),
            1e-2,
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
        );
        let rep = outer::run_with_reference(&spec, &v0, &SolverConfig::default(), spec.reference_point()).unwrap();
        let text = String::from_utf8(iterations_csv(&rep).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), rep.history.len() + 1);
        let last: Vec<&str> = lines.last().unwrap().split(',').collect();
        assert_eq!(last.len(), CSV_COLUMNS.len());
        // the final record has no subproblem
        assert_eq!(last[12], "");
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"x").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"x");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
