//! Result files: CSV tables, a JSON summary, and a verbatim config echo.
//!
//! Everything written here except the wall time in `summary.json` is a pure
//! function of the config, so rerunning an experiment reproduces the CSV
//! files byte for byte, at any worker count.

use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::{fmt, fs};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::experiment::{BinRow, CheckVerdict, ResultBundle};

pub fn config_hash(raw: &str) -> String {
    format!("{:x}", Sha256::digest(raw.as_bytes()))
}

const BIN_HEADER: [&str; 9] = [
    "bin_center",
    "n",
    "mean_Y",
    "stderr_Y",
    "v_hat",
    "stderr_v",
    "v_bohmian_ref",
    "v_law_ref",
    "reliable_flag",
];

/// Shortest decimal that round-trips; NaN marks a value no run produced.
fn num(x: f64) -> String {
    format!("{x}")
}

fn bin_fields(row: &BinRow) -> Vec<String> {
    vec![
        num(row.bin_center),
        row.n.to_string(),
        num(row.mean_y),
        num(row.stderr_y),
        num(row.v_hat),
        num(row.stderr_v),
        num(row.v_bohmian_ref),
        num(row.v_law_ref),
        if row.reliable { "1" } else { "0" }.to_string(),
    ]
}

/// A comment line pinning the config hash, then the table. Empty bins stay
/// in the table, flagged unreliable, so row count is a function of the
/// config alone.
fn csv_bytes<'a>(
    hash: &str,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>> + 'a,
) -> io::Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "# config_hash = {hash}")?;
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header).map_err(io::Error::other)?;
    for row in rows {
        w.write_record(&row).map_err(io::Error::other)?;
    }
    w.into_inner().map_err(io::Error::other)
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    code_version: &'a str,
    master_seed: u64,
    wall_time_s: f64,
    all_pass: bool,
    checks: &'a [CheckVerdict],
    notes: &'a [String],
}

pub fn write_results(bundle: &ResultBundle, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let summary = Summary {
        experiment: &bundle.experiment,
        config_hash: &bundle.config_hash,
        code_version: &bundle.code_version,
        master_seed: bundle.master_seed,
        wall_time_s: bundle.wall_time_s,
        all_pass: bundle.all_pass(),
        checks: &bundle.checks,
        notes: &bundle.notes,
    };
    let mut json = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
    json.push('\n');
    let path = dir.join("summary.json");
    fs::write(&path, json)?;
    written.push(path);

    if !bundle.estimates.is_empty() {
        let bytes = csv_bytes(
            &bundle.config_hash,
            &BIN_HEADER,
            bundle.estimates.iter().map(bin_fields),
        )?;
        let path = dir.join("estimates.csv");
        fs::write(&path, bytes)?;
        written.push(path);
    }

    if !bundle.sweep_rows.is_empty() {
        let header: Vec<&str> =
            ["sigma", "tau", "delta"].iter().chain(BIN_HEADER.iter()).copied().collect();
        let rows = bundle.sweep_rows.iter().map(|r| {
            let mut fields = vec![num(r.sigma), num(r.tau), num(r.delta)];
            fields.extend(bin_fields(&r.row));
            fields
        });
        let bytes = csv_bytes(&bundle.config_hash, &header, rows)?;
        let path = dir.join("sweep.csv");
        fs::write(&path, bytes)?;
        written.push(path);
    }

    let path = dir.join("config_echo.cfg");
    fs::write(&path, &bundle.raw_config)?;
    written.push(path);

    Ok(written)
}

/// One human-readable line per check, the same text the runner prints.
pub fn render_check(c: &CheckVerdict) -> impl fmt::Display + '_ {
    struct Line<'a>(&'a CheckVerdict);
    impl fmt::Display for Line<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let c = self.0;
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            write!(
                f,
                "[{verdict}] {}: measured {:.6e} {} {:.6e}",
                c.check_id, c.measured, c.op, c.tolerance
            )
        }
    }
    Line(c)
}
