//! Output files: trajectory and energy traces, the run summary, and plot
//! snapshots.
//!
//! Numeric columns carry 9 significant digits. All tables are CSV with a
//! header row.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::ScenarioConfig;
use crate::sim::{
    is_r_subcover, min_pairwise_distance, ControlMode, ControlSource, Trajectory, VehicleState,
};
use crate::vec2::Vec2;

pub const TRAJECTORY_HEADER: [&str; 9] = ["t", "i", "p_x", "p_y", "v_x", "v_y", "u_x", "u_y", "source"];
pub const ENERGY_HEADER: [&str; 2] = ["t", "phi"];
pub const SNAPSHOT_HEADER: [&str; 5] = ["kind", "i", "t", "x", "y"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// Format like C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One parsed row of a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub i: usize,
    pub state: VehicleState,
    pub u: Vec2,
    pub source: ControlSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub i: usize,
    pub j: usize,
    pub t_start: f64,
    pub t_end: Option<f64>,
}

/// Run-level results written next to the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub n_vehicles: usize,
    pub safety: bool,
    pub mode: String,
    pub dt: f64,
    pub t_end: f64,
    pub r_d: f64,
    pub collision_radius: f64,
    pub collision_event_count: usize,
    pub collision_events: Vec<EventRecord>,
    pub final_energy: f64,
    /// Earliest time after which every vehicle stays below `eps_v`.
    pub steady_time: Option<f64>,
    pub eps_v: f64,
    /// Final configuration is an `r_d`-subcover of the domain.
    pub r_subcover: bool,
    pub all_inside: bool,
    pub min_pairwise_distance: f64,
}

impl RunSummary {
    pub fn new(config: &ScenarioConfig, traj: &Trajectory) -> Self {
        let p = &config.params;
        let last = traj.final_states();
        let t = traj.final_time();
        RunSummary {
            scenario: config.name.clone(),
            n_vehicles: traj.n_vehicles(),
            safety: p.avoidance,
            mode: match p.mode {
                ControlMode::Saturated => "saturated".into(),
                ControlMode::Raw => "raw".into(),
            },
            dt: p.dt,
            t_end: t,
            r_d: p.coverage.r_d,
            collision_radius: p.safety.collision_radius,
            collision_event_count: traj.events.len(),
            collision_events: traj
                .events
                .iter()
                .map(|e| EventRecord {
                    i: e.pair.0,
                    j: e.pair.1,
                    t_start: e.t_start,
                    t_end: e.t_end,
                })
                .collect(),
            final_energy: traj.energy.last().copied().unwrap_or(0.0),
            steady_time: traj.steady_time(config.eps_v),
            eps_v: config.eps_v,
            r_subcover: is_r_subcover(last, &config.domain, t, p.coverage.r_d),
            all_inside: last.iter().all(|s| config.domain.contains(s.p, t)),
            min_pairwise_distance: min_pairwise_distance(last),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: String) -> ReportError {
    ReportError::Format {
        path: path.to_path_buf(),
        message,
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ReportError> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// One row per (time, vehicle).
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<(), ReportError> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err(path))?;
    for k in 0..traj.len() {
        let t = fmt_g9(traj.times[k]);
        for (i, s) in traj.states[k].iter().enumerate() {
            let u = traj.controls[k][i];
            w.write_record([
                t.as_str(),
                &i.to_string(),
                &fmt_g9(s.p.x),
                &fmt_g9(s.p.y),
                &fmt_g9(s.v.x),
                &fmt_g9(s.v.y),
                &fmt_g9(u.x),
                &fmt_g9(u.y),
                traj.sources[k][i].tag(),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>, ReportError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let found = r.headers().map_err(csv_err(path))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(format_err(path, format!("unexpected header {found:?}")));
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(
    path: &Path,
    rec: &csv::StringRecord,
    col: usize,
    name: &str,
) -> Result<T, ReportError> {
    let line = rec.position().map_or(0, |p| p.line());
    rec.get(col)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(path, format!("line {line}: bad `{name}` field")))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>, ReportError> {
    let mut r = reader(path, &TRAJECTORY_HEADER)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |c: usize| field::<f64>(path, &rec, c, TRAJECTORY_HEADER[c]);
        let tag = rec.get(8).unwrap_or_default();
        let source = ControlSource::from_tag(tag)
            .ok_or_else(|| format_err(path, format!("unknown source tag `{tag}`")))?;
        rows.push(TrajectoryRow {
            t: num(0)?,
            i: field(path, &rec, 1, "i")?,
            state: VehicleState::new(Vec2::new(num(2)?, num(3)?), Vec2::new(num(4)?, num(5)?)),
            u: Vec2::new(num(6)?, num(7)?),
            source,
        });
    }
    Ok(rows)
}

/// Check a re-parsed trajectory: complete time-major grid of `n` vehicles on
/// steps of `dt`, speeds within `v_max`, and positions advanced by the
/// post-update velocity. Tolerances allow for the 9-digit rounding.
pub fn verify_trajectory_rows(
    rows: &[TrajectoryRow],
    n: usize,
    dt: f64,
    v_max: f64,
) -> Result<(), String> {
    if n == 0 || !rows.len().is_multiple_of(n) || rows.is_empty() {
        return Err(format!("{} rows is not a whole number of {n}-vehicle samples", rows.len()));
    }
    let samples: Vec<&[TrajectoryRow]> = rows.chunks(n).collect();
    for (k, sample) in samples.iter().enumerate() {
        let t = k as f64 * dt;
        for (i, row) in sample.iter().enumerate() {
            if row.i != i {
                return Err(format!("sample {k}: row {i} has index {}", row.i));
            }
            if (row.t - t).abs() > 1e-8 * t.max(1.0) {
                return Err(format!("sample {k}: time {} off the grid", row.t));
            }
            if row.state.v.norm() > v_max * (1.0 + 1e-8) {
                return Err(format!("t = {}: vehicle {i} exceeds v_max", row.t));
            }
        }
    }
    for w in samples.windows(2) {
        for (i, (ra, rb)) in w[0].iter().zip(w[1]).enumerate() {
            let (a, b) = (ra.state, rb.state);
            let predicted = a.p + b.v * dt;
            let scale = a.p.norm().max(1.0);
            if (predicted - b.p).norm() > 1e-7 * scale {
                return Err(format!("t = {}: vehicle {i} position inconsistent with velocity", rb.t));
            }
        }
    }
    Ok(())
}

pub fn write_energy_csv(traj: &Trajectory, path: &Path) -> Result<(), ReportError> {
    let mut w = writer(path)?;
    w.write_record(ENERGY_HEADER).map_err(csv_err(path))?;
    for (t, phi) in traj.times.iter().zip(&traj.energy) {
        w.write_record([fmt_g9(*t), fmt_g9(*phi)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_energy_csv(path: &Path) -> Result<Vec<(f64, f64)>, ReportError> {
    let mut r = reader(path, &ENERGY_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        out.push((field(path, &rec, 0, "t")?, field(path, &rec, 1, "phi")?));
    }
    Ok(out)
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, summary.to_json() + "\n").map_err(io_err(path))
}

pub fn read_summary(path: &Path) -> Result<RunSummary, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// A row of a plot snapshot file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnapshotKind {
    /// Vehicle position at the snapshot time.
    Vehicle,
    /// Earlier position within the tail window.
    Tail,
    /// Domain vertex at the snapshot time (`i` is the vertex index).
    Domain,
}

impl SnapshotKind {
    fn tag(self) -> &'static str {
        match self {
            SnapshotKind::Vehicle => "vehicle",
            SnapshotKind::Tail => "tail",
            SnapshotKind::Domain => "domain",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "vehicle" => Some(SnapshotKind::Vehicle),
            "tail" => Some(SnapshotKind::Tail),
            "domain" => Some(SnapshotKind::Domain),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub kind: SnapshotKind,
    pub i: usize,
    pub t: f64,
    pub at: Vec2,
}

/// Rows of the snapshot at time `t`: current positions, then each vehicle's
/// positions over `[max(0, t - tail), t)`, then the domain outline.
pub fn snapshot_rows(
    traj: &Trajectory,
    domain: &crate::geom::PolygonDomain,
    t: f64,
    tail_seconds: f64,
) -> Vec<SnapshotRow> {
    let k = traj.index_at(t);
    let t_k = traj.times[k];
    let k0 = traj.index_at((t_k - tail_seconds).max(0.0));
    let mut rows: Vec<SnapshotRow> = traj.states[k]
        .iter()
        .enumerate()
        .map(|(i, s)| SnapshotRow {
            kind: SnapshotKind::Vehicle,
            i,
            t: t_k,
            at: s.p,
        })
        .collect();
    for i in 0..traj.n_vehicles() {
        for m in k0..k {
            rows.push(SnapshotRow {
                kind: SnapshotKind::Tail,
                i,
                t: traj.times[m],
                at: traj.states[m][i].p,
            });
        }
    }
    for (i, v) in domain.vertices_at(t_k).into_iter().enumerate() {
        rows.push(SnapshotRow {
            kind: SnapshotKind::Domain,
            i,
            t: t_k,
            at: v,
        });
    }
    rows
}

pub fn write_snapshot_csv(rows: &[SnapshotRow], path: &Path) -> Result<(), ReportError> {
    let mut w = writer(path)?;
    w.write_record(SNAPSHOT_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.kind.tag().to_string(),
            r.i.to_string(),
            fmt_g9(r.t),
            fmt_g9(r.at.x),
            fmt_g9(r.at.y),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_snapshot_csv(path: &Path) -> Result<Vec<SnapshotRow>, ReportError> {
    let mut r = reader(path, &SNAPSHOT_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let tag = rec.get(0).unwrap_or_default();
        let kind = SnapshotKind::from_tag(tag)
            .ok_or_else(|| format_err(path, format!("unknown row kind `{tag}`")))?;
        out.push(SnapshotRow {
            kind,
            i: field(path, &rec, 1, "i")?,
            t: field(path, &rec, 2, "t")?,
            at: Vec2::new(field(path, &rec, 3, "x")?, field(path, &rec, 4, "y")?),
        });
    }
    Ok(out)
}

/// File name of the snapshot at `t`, e.g. `snapshot_t4.5.csv`.
pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{}.csv", fmt_g9(t))
}

/// Which files [`write_run`] should produce besides the trajectory and summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitOptions {
    pub energy: bool,
    pub plots: bool,
}

/// Write `trajectory.csv`, `summary.json` and, on request, `energy.csv` and
/// the plot snapshots into `dir`. Returns the written paths.
pub fn write_run(
    config: &ScenarioConfig,
    traj: &Trajectory,
    dir: &Path,
    options: EmitOptions,
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();

    let path = dir.join("trajectory.csv");
    write_trajectory_csv(traj, &path)?;
    written.push(path);

    let path = dir.join("summary.json");
    write_summary(&RunSummary::new(config, traj), &path)?;
    written.push(path);

    if options.energy {
        let path = dir.join("energy.csv");
        write_energy_csv(traj, &path)?;
        written.push(path);
    }
    if options.plots {
        for &t in &config.output.snapshots {
            if t > traj.final_time() + 0.5 * traj.dt {
                continue;
            }
            let path = dir.join(snapshot_file_name(t));
            let rows = snapshot_rows(traj, &config.domain, t, config.output.tail_seconds);
            write_snapshot_csv(&rows, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Write the run summary to any stream as a short human-readable report.
pub fn print_summary(summary: &RunSummary, mut out: impl Write) -> io::Result<()> {
    writeln!(
        out,
        "{}: N={} safety={} mode={} t_end={}",
        summary.scenario,
        summary.n_vehicles,
        if summary.safety { "on" } else { "off" },
        summary.mode,
        fmt_g9(summary.t_end)
    )?;
    writeln!(out, "collision events: {}", summary.collision_event_count)?;
    let steady = summary
        .steady_time
        .map_or_else(|| "never".to_string(), |t| format!("{} s", fmt_g9(t)));
    writeln!(
        out,
        "r_d-subcover (r_d = {}): {}, steady: {steady}, final energy: {}",
        fmt_g9(summary.r_d),
        if summary.r_subcover { "yes" } else { "no" },
        fmt_g9(summary.final_energy)
    )
}
