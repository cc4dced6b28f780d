//! Run directories and the plain-text file formats written into them.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::energy::{
    gronwall_check, integrated_gradient_check, CheckStatus, ConstantsLedger, EnergyLedger, LedgerRow, LEDGER_HEADER,
};
use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::solver::SimulationState;

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "FORCHFLOW_OUT";

pub const LEDGER_FILE: &str = "ledger.csv";
pub const CONSTANTS_FILE: &str = "constants.txt";
pub const CHECKS_CSV_FILE: &str = "checks.csv";
pub const CHECKS_TEXT_FILE: &str = "checks.txt";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const GRONWALL_FILE: &str = "gronwall.dat";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Output directory: the command-line value, else the environment override,
/// else the configured one.
pub fn resolve_out_dir(cli: Option<&Path>, configured: &str) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(configured),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// A run directory populated under a hidden staging name and moved into
/// place by [`RunDir::commit`], so the final path never holds a half-written
/// run.
#[derive(Debug)]
pub struct RunDir {
    staging: PathBuf,
    target: PathBuf,
}

impl RunDir {
    /// Fails if `target` already exists.
    pub fn create(target: &Path) -> Result<Self> {
        if target.exists() {
            return Err(Error::Config(format!(
                "output directory {} already exists",
                target.display()
            )));
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("invalid output directory {}", target.display())))?;
        let mut staging_name = std::ffi::OsString::from(".");
        staging_name.push(name);
        staging_name.push(".partial");
        let staging = target.with_file_name(staging_name);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        let snaps = staging.join(SNAPSHOT_DIR);
        fs::create_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
        Ok(Self {
            staging,
            target: target.to_path_buf(),
        })
    }

    /// Path of `name` inside the directory being written.
    pub fn path(&self, name: &str) -> PathBuf {
        self.staging.join(name)
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn write(&self, name: &str, content: &str) -> Result<()> {
        write_file(&self.path(name), content)
    }

    pub fn commit(self) -> Result<PathBuf> {
        fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        Ok(self.target)
    }
}

pub fn snapshot_name(index: usize) -> String {
    format!("{SNAPSHOT_DIR}/snapshot_{index:06}.txt")
}

/// Header `nx ny dx dy t`, then one `u w v` line per cell in row-major order.
pub fn format_snapshot(grid: &StructuredGrid, state: &SimulationState) -> String {
    let mut s = String::with_capacity(80 * (grid.cell_count() + 1));
    let _ = writeln!(s, "{} {} {:e} {:e} {:e}", grid.nx(), grid.ny(), grid.dx(), grid.dy(), state.t);
    for c in 0..grid.cell_count() {
        let _ = writeln!(
            s,
            "{:.17e} {:.17e} {:.17e}",
            state.u.values[c], state.w.values[c], state.v.values[c]
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub t: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn parse_snapshot(text: &str, path: &Path) -> Result<Snapshot> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 5 {
        return Err(bad("header must be `nx ny dx dy t`".into()));
    }
    let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("header: {e}")));
    let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("header: {e}")));
    let (nx, ny) = (int(header[0])?, int(header[1])?);
    let (dx, dy, t) = (float(header[2])?, float(header[3])?, float(header[4])?);
    let n = nx * ny;
    let (mut u, mut w, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (k, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", k + 2)))?;
        if vals.len() != 3 {
            return Err(bad(format!("line {}: expected 3 values", k + 2)));
        }
        u.push(vals[0]);
        w.push(vals[1]);
        v.push(vals[2]);
    }
    if u.len() != n {
        return Err(bad(format!("expected {n} cells, found {}", u.len())));
    }
    Ok(Snapshot {
        nx,
        ny,
        dx,
        dy,
        t,
        u,
        w,
        v,
    })
}

/// Appends ledger rows to a CSV file, flushing after each one so a failed
/// run leaves every accepted row on disk.
pub struct LedgerWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl LedgerWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
        };
        w.line(LEDGER_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn push(&mut self, row: &LedgerRow) -> Result<()> {
        self.line(&row.to_csv())
    }
}

pub fn read_ledger(path: &Path) -> Result<EnergyLedger> {
    EnergyLedger::from_csv(&read_file(path)?).map_err(|message| Error::Format {
        path: path.to_path_buf(),
        message,
    })
}

pub fn format_constants(c: &ConstantsLedger) -> Result<String> {
    toml::to_string(c).map_err(|e| Error::Config(format!("cannot serialize constants: {e}")))
}

pub fn read_constants(path: &Path) -> Result<ConstantsLedger> {
    toml::from_str(&read_file(path)?).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// `t V V_bound` columns for plotting the energy against its bound.
pub fn format_gronwall(ledger: &EnergyLedger, c3: f64) -> String {
    let mut s = format!("# C3 = {c3:e}\n# t V V_bound\n");
    for r in &ledger.rows {
        let _ = writeln!(s, "{:e} {:e} {:e}", r.t, r.v, r.v_bound);
    }
    s
}

/// Verdict of one bound check, as stored in `checks.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub status: String,
    pub margin: f64,
    pub detail: String,
}

impl CheckRecord {
    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail.label()
    }
}

/// Gronwall growth, time-integrated gradient bound and ledger sanity.
pub fn ledger_checks(ledger: &EnergyLedger, constants: &ConstantsLedger) -> Vec<CheckRecord> {
    let g = gronwall_check(ledger, constants.c3);
    let gronwall = CheckRecord {
        name: "gronwall".into(),
        status: if g.passed { CheckStatus::Pass } else { CheckStatus::Fail }.label().into(),
        margin: g.worst_margin,
        detail: match g.first_violation {
            Some(t) => format!("first violation at t = {t:e}; empirical rate {:e} vs C3 = {:e}", g.empirical_rate, g.c3),
            None => format!("empirical rate {:e} vs C3 = {:e}", g.empirical_rate, g.c3),
        },
    };
    let ig = integrated_gradient_check(ledger, constants);
    let integrated = CheckRecord {
        name: "integrated_gradient".into(),
        status: ig.status.label().into(),
        margin: ig.margin,
        detail: match &ig.status {
            CheckStatus::NotApplicable(why) => format!("lhs {:e}; {why}", ig.lhs),
            _ => format!("lhs {:e} rhs {:e}", ig.lhs, ig.rhs),
        },
    };
    let ok = ledger.well_formed();
    let sane = CheckRecord {
        name: "ledger_well_formed".into(),
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail }.label().into(),
        margin: 0.0,
        detail: format!("{} rows", ledger.rows.len()),
    };
    vec![gronwall, integrated, sane]
}

pub const CHECKS_HEADER: &str = "check,status,margin,detail";

pub fn format_checks_csv(checks: &[CheckRecord]) -> String {
    let mut s = format!("{CHECKS_HEADER}\n");
    for c in checks {
        let _ = writeln!(s, "{},{},{:e},{}", c.name, c.status, c.margin, c.detail.replace([',', '\n'], ";"));
    }
    s
}

pub fn parse_checks_csv(text: &str, path: &Path) -> Result<Vec<CheckRecord>> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CHECKS_HEADER) {
        return Err(bad("missing checks header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| {
            let parts: Vec<&str> = l.splitn(4, ',').collect();
            if parts.len() != 4 {
                return Err(bad(format!("line {}: expected 4 columns", k + 2)));
            }
            Ok(CheckRecord {
                name: parts[0].into(),
                status: parts[1].into(),
                margin: parts[2].parse().map_err(|e| bad(format!("line {}: {e}", k + 2)))?,
                detail: parts[3].into(),
            })
        })
        .collect()
}

pub fn format_checks_text(checks: &[CheckRecord]) -> String {
    let mut s = String::new();
    for c in checks {
        let _ = writeln!(s, "{:<22} {:<5} margin {:>12.4e}  {}", c.name, c.status, c.margin, c.detail);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

/// Provenance record of a run, written when it starts and rewritten when it
/// ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_path: String,
    pub output_dir: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub steps: usize,
    pub snapshots: usize,
    pub setup_seconds: f64,
    pub run_seconds: f64,
    pub config: Config,
}

impl Manifest {
    pub fn new(config_path: &str, output_dir: &Path, config: Config) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_path: config_path.into(),
            output_dir: output_dir.display().to_string(),
            status: RunStatus::Running,
            error: None,
            steps: 0,
            snapshots: 0,
            setup_seconds: 0.0,
            run_seconds: 0.0,
            config,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        toml::from_str(&read_file(path)?).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, ScalarField};

    #[test]
    fn snapshot_round_trip_is_exact() {
        let g = StructuredGrid::new(&GridSpec::unit_square(3, 2)).unwrap();
        let mut s = SimulationState::new(
            ScalarField::from_fn(&g, |x, y| (x * 7.3).sin() + y / 3.0 + 1.0),
            ScalarField::from_fn(&g, |x, _| x / 7.0),
            0.8,
        );
        s.t = 0.1 + 0.2;
        let text = format_snapshot(&g, &s);
        assert!(text.starts_with("3 2 "));
        let back = parse_snapshot(&text, Path::new("snap")).unwrap();
        assert_eq!(back.u, s.u.values);
        assert_eq!(back.w, s.w.values);
        assert_eq!(back.v, s.v.values);
        assert_eq!(back.t, s.t);
        assert!(parse_snapshot("3 2 1 1\n", Path::new("snap")).is_err());
    }

    #[test]
    fn run_dir_is_moved_into_place_on_commit() {
        let tmp = tempfile::tempdir().unwrap();
        let target = tmp.path().join("run");
        let dir = RunDir::create(&target).unwrap();
        dir.write("a.txt", "x").unwrap();
        assert!(!target.exists());
        let done = dir.commit().unwrap();
        assert_eq!(fs::read_to_string(done.join("a.txt")).unwrap(), "x");
        assert!(done.join(SNAPSHOT_DIR).is_dir());
        assert!(RunDir::create(&target).is_err());
    }

    #[test]
    fn checks_csv_round_trip() {
        let checks = vec![CheckRecord {
            name: "gronwall".into(),
            status: "pass".into(),
            margin: 0.25,
            detail: "a, b".into(),
        }];
        let text = format_checks_csv(&checks);
        let back = parse_checks_csv(&text, Path::new("c")).unwrap();
        assert_eq!(back[0].margin, 0.25);
        assert_eq!(back[0].detail, "a; b");
    }

    #[test]
    fn out_dir_precedence() {
        assert_eq!(resolve_out_dir(Some(Path::new("cli")), "cfg"), PathBuf::from("cli"));
    }
}
