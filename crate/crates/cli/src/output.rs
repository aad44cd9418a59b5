//! Result tables and their JSON sidecars.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::ResolvedConfig;
use crate::experiments::Table;
use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `<out>/<experiment>.csv` and `<out>/<experiment>.json`; returns both paths.
pub fn write_experiment(cfg: &ResolvedConfig, table: &Table, out: &Path) -> Result<(PathBuf, PathBuf), CliError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let name = cfg.experiment.name();
    let hash = cfg.hash();
    let seed = cfg.seed.to_string();

    let csv_path = out.join(format!("{name}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let head = ["config_hash", "seed"].into_iter().map(String::from).chain(table.header.iter().cloned());
    w.write_record(head).map_err(|e| io_err(&csv_path, e))?;
    for row in &table.rows {
        let rec = [hash.clone(), seed.clone()].into_iter().chain(row.iter().cloned());
        w.write_record(rec).map_err(|e| io_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;

    let json_path = out.join(format!("{name}.json"));
    let sidecar = json!({
        "experiment": name,
        "config_hash": hash,
        "seed": cfg.seed,
        "reps": cfg.reps,
        "t_star": cfg.t_star,
        "mode": cfg.mode,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "rows": table.rows.len(),
        "violations": table.violations,
        "details": table.meta,
    });
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar is plain data") + "\n";
    std::fs::write(&json_path, text).map_err(|e| io_err(&json_path, e))?;
    Ok((csv_path, json_path))
}
