//! Results file format: one CSV per experiment with a `#`-prefixed
//! metadata block, fixed columns `replicate,t,estimate,ess,cost`, and a
//! JSON summary produced by `summarize`. Files are byte-identical for a
//! given `(config, seed)` regardless of worker count or replicate order.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::bench::{ExperimentConfig, RunRecord};
use crate::error::{Result, SmcError};

/// Metadata block of a results file.
#[derive(Debug, Clone)]
pub struct ResultsMeta {
    pub fields: BTreeMap<String, String>,
    pub failures: Vec<(u64, String)>,
    pub meeting_frequencies: BTreeMap<u64, f64>,
}

impl ResultsMeta {
    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.fields
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| SmcError::MalformedRecord(format!("missing metadata {key}")))
    }

    pub fn get_str(&self, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| SmcError::MalformedRecord(format!("missing metadata {key}")))
    }
}

/// Write records (sorted by replicate id) plus metadata to `path`.
pub fn write_results(
    path: &Path,
    config: &ExperimentConfig,
    seed: u64,
    records: &[RunRecord],
    failures: &[(u64, String)],
) -> Result<()> {
    let mut records: Vec<&RunRecord> = records.iter().collect();
    records.sort_by_key(|r| r.replicate);
    let mut failures: Vec<&(u64, String)> = failures.iter().collect();
    failures.sort_by_key(|(rep, _)| *rep);

    let mut out = String::new();
    out.push_str("# smcsmooth results v1\n");
    out.push_str(&format!("# seed = {seed}\n"));
    out.push_str(&format!("# algorithm = {}\n", config.run.algorithm));
    out.push_str(&format!("# mode = {}\n", config.run.mode));
    out.push_str(&format!("# n_particles = {}\n", config.run.n_particles));
    out.push_str(&format!("# horizon = {}\n", config.run.horizon));
    out.push_str(&format!("# n_tilde = {}\n", config.run.n_tilde));
    out.push_str(&format!("# replicates = {}\n", config.run.replicates));
    let config_json = serde_json::to_string(config)
        .map_err(|e| SmcError::Config(format!("serialize config: {e}")))?;
    out.push_str(&format!("# config = {config_json}\n"));
    for (rep, err) in &failures {
        out.push_str(&format!("# failed {rep} {err}\n"));
    }
    for r in &records {
        if let Some(freq) = r.meeting_frequency {
            out.push_str(&format!("# meeting_frequency {} {freq}\n", r.replicate));
        }
    }
    out.push_str("replicate,t,estimate,ess,cost\n");
    for r in &records {
        for t in 0..r.estimates.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.replicate, t, r.estimates[t], r.ess[t], r.cost_per_t[t]
            ));
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a results file back into records grouped by replicate.
pub fn read_results(path: &Path) -> Result<(ResultsMeta, Vec<RunRecord>)> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut meta = ResultsMeta {
        fields: BTreeMap::new(),
        failures: Vec::new(),
        meeting_frequencies: BTreeMap::new(),
    };
    let mut records: BTreeMap<u64, RunRecord> = BTreeMap::new();
    let mut saw_header = false;
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(payload) = rest.strip_prefix("failed ") {
                let (rep, msg) = payload
                    .split_once(' ')
                    .ok_or_else(|| SmcError::MalformedRecord(line.clone()))?;
                let rep = rep
                    .parse()
                    .map_err(|_| SmcError::MalformedRecord(line.clone()))?;
                meta.failures.push((rep, msg.to_string()));
            } else if let Some(payload) = rest.strip_prefix("meeting_frequency ") {
                let (rep, freq) = payload
                    .split_once(' ')
                    .ok_or_else(|| SmcError::MalformedRecord(line.clone()))?;
                let rep: u64 = rep
                    .parse()
                    .map_err(|_| SmcError::MalformedRecord(line.clone()))?;
                let freq: f64 = freq
                    .parse()
                    .map_err(|_| SmcError::MalformedRecord(line.clone()))?;
                meta.meeting_frequencies.insert(rep, freq);
            } else if let Some((key, value)) = rest.split_once('=') {
                meta.fields
                    .insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        if !saw_header {
            if line != "replicate,t,estimate,ess,cost" {
                return Err(SmcError::MalformedRecord(format!(
                    "unexpected header: {line}"
                )));
            }
            saw_header = true;
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || {
            parts
                .next()
                .ok_or_else(|| SmcError::MalformedRecord(line.clone()))
        };
        let rep: u64 = parse(next()?)?;
        let t: usize = parse(next()?)?;
        let estimate: f64 = parse(next()?)?;
        let ess: f64 = parse(next()?)?;
        let cost: u64 = parse(next()?)?;
        let record = records.entry(rep).or_insert_with(|| RunRecord {
            replicate: rep,
            estimates: Vec::new(),
            ess: Vec::new(),
            cost_per_t: Vec::new(),
            total_cost: 0,
            meeting_frequency: None,
            wall_time: 0.0,
        });
        if record.estimates.len() != t {
            return Err(SmcError::MalformedRecord(format!(
                "out-of-order time index in replicate {rep}"
            )));
        }
        record.estimates.push(estimate);
        record.ess.push(ess);
        record.cost_per_t.push(cost);
        record.total_cost += cost;
    }
    if !saw_header {
        return Err(SmcError::MalformedRecord("no column header found".into()));
    }
    for (rep, freq) in &meta.meeting_frequencies {
        if let Some(r) = records.get_mut(rep) {
            r.meeting_frequency = Some(*freq);
        }
    }
    Ok((meta, records.into_values().collect()))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| SmcError::MalformedRecord(format!("bad field: {s}")))
}
