//! File formats: per-episode CSV logs, sweep tables, and the plain-text
//! weights format (`A N` header line, then one row of N values per action).

use std::io::Write;
use std::path::Path;

use crate::agent::ReadoutWeights;
use crate::error::{Error, Result};

use super::{EpisodeRecord, SweepTable, TrainingLog};

pub const CSV_HEADER: &str = "episode,steps,total_reward,moving_avg_100,epsilon";

/// Writes the training log as CSV: header plus one row per episode,
/// decimal notation, every line newline-terminated.
pub fn export_csv(log: &TrainingLog, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (log.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &log.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.episode, r.steps, r.total_reward, r.moving_avg_100, r.epsilon
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Parses a CSV produced by [`export_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, other)) => {
            return Err(Error::parse(path, 1, format!("unexpected header '{other}'")))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(path, i + 1, format!("expected 5 fields, got {}", fields.len())));
        }
        let field = |j: usize, name: &str| -> Result<f64> {
            fields[j]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad {name} '{}'", fields[j])))
        };
        records.push(EpisodeRecord {
            episode: fields[0]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad episode '{}'", fields[0])))?,
            steps: fields[1]
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad steps '{}'", fields[1])))?,
            total_reward: field(2, "total_reward")?,
            moving_avg_100: field(3, "moving_avg_100")?,
            epsilon: field(4, "epsilon")?,
        });
    }
    Ok(records)
}

/// Writes weights as text: first line `A N`, then A lines of N values.
pub fn save_weights(weights: &ReadoutWeights, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", weights.actions(), weights.nodes()));
    for a in 0..weights.actions() {
        let row: Vec<String> = weights.row(a).iter().map(|w| w.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Loads a weights file, validating the declared dimensions.
pub fn load_weights(path: &Path) -> Result<ReadoutWeights> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut dims = header.split_whitespace();
    let actions: usize = dims
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "expected 'A N' header"))?;
    let nodes: usize = dims
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "expected 'A N' header"))?;
    if dims.next().is_some() {
        return Err(Error::parse(path, 1, "trailing tokens in header"));
    }
    let mut rows = Vec::with_capacity(actions);
    for a in 0..actions {
        let (i, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, a + 2, "missing weight row"))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad value '{t}'")))
            })
            .collect::<Result<_>>()?;
        if row.len() != nodes {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {nodes} values, got {}", row.len()),
            ));
        }
        rows.push(row);
    }
    if let Some((i, line)) = lines.next() {
        if !line.trim().is_empty() {
            return Err(Error::parse(path, i + 1, "trailing content after weight rows"));
        }
    }
    ReadoutWeights::from_rows(rows)
}

/// Writes the sweep table: per-trial rows and the mean/min/max summary.
pub fn export_sweep_csv(table: &SweepTable, rows_path: &Path, summary_path: &Path) -> Result<()> {
    let mut out = String::from("param_value,trial,max_moving_avg_100\n");
    for r in &table.rows {
        out.push_str(&format!("{},{},{}\n", r.value, r.trial, r.max_moving_avg_100));
    }
    write_atomic(rows_path, out.as_bytes())?;

    let mut out = String::from("param_value,mean,min,max\n");
    for s in &table.summary {
        out.push_str(&format!("{},{},{},{}\n", s.value, s.mean, s.min, s.max));
    }
    write_atomic(summary_path, out.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}
