//! Shared report plumbing: auditable file headers, float formatting and
//! order statistics.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::CliError;

/// 17 significant digits, enough to reproduce every f64 bit-exactly.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Every output file starts with the fully resolved configuration so a run
/// can be audited and replayed from the artifact alone.
pub fn report_header(cfg: &ExperimentConfig, subcommand: &str, notes: &[&str]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# ristrack {subcommand}\n"));
    out.push_str(&format!(
        "# master_seed: {} (all stage seeds derive from it)\n",
        cfg.seed
    ));
    for note in notes {
        out.push_str(&format!("# {note}\n"));
    }
    out.push_str("# resolved configuration:\n");
    for line in cfg.to_toml().lines() {
        out.push_str("#   ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Writes one report file under the configured output directory.
pub fn write_report(
    cfg: &ExperimentConfig,
    subcommand: &str,
    file_name: &str,
    notes: &[&str],
    body: &str,
) -> Result<PathBuf, CliError> {
    let dir = Path::new(&cfg.output_dir);
    fs::create_dir_all(dir)?;
    let path = dir.join(file_name);
    let mut content = report_header(cfg, subcommand, notes);
    content.push_str(body);
    fs::write(&path, content)?;
    Ok(path)
}

/// Nearest-rank percentile of an unsorted sample (q in [0, 1]).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 0.5)
}
