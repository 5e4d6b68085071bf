//! CSV and manifest files.
//!
//! A run directory holds `manifest.json` plus one `rep_NNN/` directory per
//! replication with `beliefs.csv`, `selections.csv` and `signals.csv`.
//! Agents are 1-based and states are written by label.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{OccupancyReport, RateReport};
use crate::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::simulator::{replication_seed, Fingerprints, SimulationTrace, TraceParts};
use crate::world::WorldModel;

pub const MANIFEST: &str = "manifest.json";
pub const BELIEFS_CSV: &str = "beliefs.csv";
pub const SELECTIONS_CSV: &str = "selections.csv";
pub const SIGNALS_CSV: &str = "signals.csv";

/// Shortest round-trip decimal, switching to exponent form for tiny magnitudes.
pub fn fmt_f64(v: f64) -> String {
    if v != 0.0 && v.is_finite() && v.abs() < 1e-5 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Trace(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the three trace CSVs into `dir`.
pub fn write_trace(dir: &Path, trace: &SimulationTrace, world: &WorldModel) -> Result<()> {
    create_dir(dir)?;
    let n = trace.n();
    let labels = world.states().labels();

    let beliefs = trace.snapshot_times().iter().flat_map(|&t| {
        (0..n).flat_map(move |i| {
            let lb = trace.log_belief(t, i).expect("snapshot");
            lb.iter().enumerate().map(move |(k, &l)| {
                vec![
                    t.to_string(),
                    (i + 1).to_string(),
                    labels[k].clone(),
                    fmt_f64(l.exp()),
                    fmt_f64(l),
                ]
            })
        })
    });
    write_rows(
        &dir.join(BELIEFS_CSV),
        &["t", "agent", "state", "prob", "log_prob"],
        beliefs,
    )?;

    let selections = (1..=trace.horizon()).flat_map(|t| {
        (0..n).map(move |i| {
            vec![
                t.to_string(),
                (i + 1).to_string(),
                (trace.selection(t, i) + 1).to_string(),
            ]
        })
    });
    write_rows(
        &dir.join(SELECTIONS_CSV),
        &["t", "agent", "chosen"],
        selections,
    )?;

    let signals = (0..=trace.horizon()).flat_map(|t| {
        (0..n).map(move |i| {
            vec![
                t.to_string(),
                (i + 1).to_string(),
                trace.signal(i, t).to_string(),
            ]
        })
    });
    write_rows(&dir.join(SIGNALS_CSV), &["t", "agent", "signal"], signals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEntry {
    pub index: usize,
    pub seed: u64,
    /// Directory holding this replication's CSVs, if they were written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub network: String,
    pub selection: String,
    pub world: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub horizon: usize,
    pub snapshot_stride: usize,
    pub rng: String,
    pub fingerprints: FingerprintRecord,
    pub replications: Vec<ReplicationEntry>,
    pub config: ExperimentConfig,
}

pub const RNG_DESCRIPTION: &str =
    "ChaCha8Rng::seed_from_u64(seed); stream 2*agent (signals), 2*agent+1 (selection); one f64 per round";

pub fn rep_dir_name(index: usize) -> String {
    format!("rep_{index:03}")
}

impl Manifest {
    /// Lists `replications` seeds; the first `written` of them have trace directories.
    pub fn new(
        config: &ExperimentConfig,
        exp: &Experiment,
        fingerprints: &Fingerprints,
        replications: usize,
        written: usize,
    ) -> Self {
        Self {
            tool: "gossip".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: exp.simulation.seed,
            horizon: exp.simulation.horizon,
            snapshot_stride: exp.simulation.record_beliefs_every,
            rng: RNG_DESCRIPTION.into(),
            fingerprints: FingerprintRecord {
                network: fingerprints.network.clone(),
                selection: fingerprints.selection.clone(),
                world: fingerprints.world.clone(),
            },
            replications: (0..replications)
                .map(|r| ReplicationEntry {
                    index: r,
                    seed: replication_seed(exp.simulation.seed, r),
                    dir: (r < written).then(|| rep_dir_name(r)),
                })
                .collect(),
            config: config.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Writes a manifest for all `traces` (`traces[k]` is replication `k`) and
/// trace directories for the first `write_traces` of them.
pub fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    exp: &Experiment,
    traces: &[SimulationTrace],
    write_traces: usize,
) -> Result<Manifest> {
    let fingerprints = traces
        .first()
        .map(|t| t.fingerprints.clone())
        .unwrap_or_default();
    let written = write_traces.min(traces.len());
    let manifest = Manifest::new(config, exp, &fingerprints, traces.len(), written);
    for (r, trace) in traces.iter().take(written).enumerate() {
        write_trace(&dir.join(rep_dir_name(r)), trace, &exp.world)?;
    }
    manifest.write(dir)?;
    Ok(manifest)
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    reader
        .records()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_err(path, e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, path: &Path) -> Result<T> {
    rec.get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Trace(format!("{}: bad field {idx} in {rec:?}", path.display())))
}

/// Reads one replication directory back into a trace.
pub fn read_trace(
    dir: &Path,
    world: &WorldModel,
    horizon: usize,
    seed: u64,
    fingerprints: Fingerprints,
) -> Result<SimulationTrace> {
    let n = world.num_agents();
    let k = world.num_states();
    let agent = |rec: &csv::StringRecord, path: &Path| -> Result<usize> {
        let a: usize = field(rec, 1, path)?;
        if a == 0 || a > n {
            return Err(Error::Trace(format!(
                "{}: agent {a} out of range",
                path.display()
            )));
        }
        Ok(a - 1)
    };

    let path = dir.join(SIGNALS_CSV);
    let mut signals = vec![0u32; (horizon + 1) * n];
    let mut seen = 0;
    for rec in read_records(&path)? {
        let t: usize = field(&rec, 0, &path)?;
        let i = agent(&rec, &path)?;
        if t > horizon {
            return Err(Error::Trace(format!(
                "{}: t={t} beyond horizon",
                path.display()
            )));
        }
        signals[t * n + i] = field(&rec, 2, &path)?;
        seen += 1;
    }
    if seen != signals.len() {
        return Err(Error::Trace(format!(
            "{}: expected {} rows, found {seen}",
            path.display(),
            signals.len()
        )));
    }

    let path = dir.join(SELECTIONS_CSV);
    let mut selections = vec![0u32; horizon * n];
    let mut seen = 0;
    for rec in read_records(&path)? {
        let t: usize = field(&rec, 0, &path)?;
        let i = agent(&rec, &path)?;
        let chosen: usize = field(&rec, 2, &path)?;
        if t == 0 || t > horizon || chosen == 0 || chosen > n {
            return Err(Error::Trace(format!("{}: bad row {rec:?}", path.display())));
        }
        selections[(t - 1) * n + i] = (chosen - 1) as u32;
        seen += 1;
    }
    if seen != selections.len() {
        return Err(Error::Trace(format!(
            "{}: expected {} rows, found {seen}",
            path.display(),
            selections.len()
        )));
    }

    let path = dir.join(BELIEFS_CSV);
    let mut snapshot_times: Vec<usize> = Vec::new();
    let mut snapshots: Vec<f64> = Vec::new();
    for rec in read_records(&path)? {
        let t: usize = field(&rec, 0, &path)?;
        let i = agent(&rec, &path)?;
        let label = rec.get(2).unwrap_or_default();
        let state = world
            .states()
            .index_of(label)
            .ok_or_else(|| Error::Trace(format!("{}: unknown state {label:?}", path.display())))?;
        let log_prob: f64 = field(&rec, 4, &path)?;
        if snapshot_times.last() != Some(&t) {
            snapshot_times.push(t);
            snapshots.resize(snapshots.len() + n * k, f64::NAN);
        }
        let base = (snapshot_times.len() - 1) * n * k;
        snapshots[base + i * k + state] = log_prob;
    }
    if snapshots.iter().any(|v| v.is_nan()) {
        return Err(Error::Trace(format!(
            "{}: incomplete snapshot rows",
            path.display()
        )));
    }

    SimulationTrace::from_parts(TraceParts {
        n,
        num_states: k,
        horizon,
        seed,
        true_state: world.true_state(),
        signals,
        selections,
        snapshot_times,
        snapshots,
        fingerprints,
    })
}

/// Loads a run directory written by [`write_run`].
pub fn load_run(dir: &Path) -> Result<(Manifest, Experiment, Vec<SimulationTrace>)> {
    let manifest = Manifest::read(dir)?;
    let exp = manifest.config.build()?;
    let fingerprints = Fingerprints {
        network: manifest.fingerprints.network.clone(),
        selection: manifest.fingerprints.selection.clone(),
        world: manifest.fingerprints.world.clone(),
    };
    let expected = Fingerprints::of(&exp.network, &exp.selection, &exp.world);
    if expected != fingerprints {
        return Err(Error::Inconsistent(
            "manifest fingerprints do not match its embedded config".into(),
        ));
    }
    let traces = manifest
        .replications
        .iter()
        .filter_map(|rep| rep.dir.as_ref().map(|d| (rep, d)))
        .map(|(rep, rep_dir)| {
            read_trace(
                &dir.join(rep_dir),
                &exp.world,
                manifest.horizon,
                rep.seed,
                fingerprints.clone(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, exp, traces))
}

pub fn write_rate_report(path: &Path, report: &RateReport, world: &WorldModel) -> Result<()> {
    let rows = report.entries.iter().flat_map(|e| {
        e.agents.iter().map(move |a| {
            vec![
                world.states().label(e.check_state).to_string(),
                fmt_f64(e.theoretical),
                (a.agent + 1).to_string(),
                fmt_f64(-a.empirical.mean_slope),
                fmt_f64(a.empirical.stderr),
            ]
        })
    });
    write_rows(
        path,
        &["check_state", "theoretical", "agent", "empirical", "stderr"],
        rows,
    )
}

/// One row of `rate_report.csv` read back.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub check_state: String,
    pub theoretical: f64,
    pub agent: usize,
    pub empirical: f64,
    pub stderr: f64,
}

pub fn read_rate_report(path: &Path) -> Result<Vec<RateRow>> {
    read_records(path)?
        .iter()
        .map(|rec| {
            Ok(RateRow {
                check_state: rec.get(0).unwrap_or_default().to_string(),
                theoretical: field(rec, 1, path)?,
                agent: field(rec, 2, path)?,
                empirical: field(rec, 3, path)?,
                stderr: field(rec, 4, path)?,
            })
        })
        .collect()
}

pub fn write_occupancy(path: &Path, report: &OccupancyReport) -> Result<()> {
    let rows = report.empirical.iter().enumerate().map(|(m, &e)| {
        vec![
            (m + 1).to_string(),
            fmt_f64(e),
            report
                .stationary
                .as_ref()
                .map_or_else(String::new, |pi| fmt_f64(pi[m])),
        ]
    });
    write_rows(path, &["agent_m", "empirical", "stationary"], rows)
}

pub fn write_series(path: &Path, header: [&str; 2], series: &[(usize, f64)]) -> Result<()> {
    let rows = series.iter().map(|&(t, v)| vec![t.to_string(), fmt_f64(v)]);
    write_rows(path, &header, rows)
}

pub fn read_series(path: &Path) -> Result<Vec<(usize, f64)>> {
    read_records(path)?
        .iter()
        .map(|rec| Ok((field(rec, 0, path)?, field(rec, 1, path)?)))
        .collect()
}

/// Belief of one agent on every state over time, long format `(t, state, prob)`.
pub fn write_agent_beliefs(
    path: &Path,
    trace: &SimulationTrace,
    world: &WorldModel,
    agent: usize,
) -> Result<()> {
    let labels = world.states().labels();
    let rows = trace.snapshot_times().iter().flat_map(|&t| {
        let lb = trace.log_belief(t, agent).expect("snapshot");
        lb.iter()
            .enumerate()
            .map(move |(k, &l)| vec![t.to_string(), labels[k].clone(), fmt_f64(l.exp())])
    });
    write_rows(path, &["t", "state", "prob"], rows)
}
