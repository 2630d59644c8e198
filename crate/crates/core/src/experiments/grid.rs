use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::range::{parse_depth_range, parse_range};
use crate::error::{Error, Result};
use crate::optimizer::{optimize, splitmix64, OptimizerConfig, OptimizerMode};
use crate::subspace::Schedule;

pub const CSV_HEADER: &str = "label,N,p,tf,best_fidelity,restarts,converged,seed,wall_time_s,schedule";

/// A grid campaign as stored on disk. Ranges are MATLAB-style strings; a
/// missing `tf_ranges` entry means unconstrained runtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub label: String,
    #[serde(default)]
    pub seed: u64,
    pub n_values: Vec<usize>,
    pub p_ranges: BTreeMap<usize, String>,
    #[serde(default)]
    pub tf_ranges: BTreeMap<usize, String>,
    #[serde(default)]
    pub restarts_rule: BTreeMap<usize, usize>,
}

/// One `(N, p, t_f)` point of a grid. `tf = None` is unconstrained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n_sites: usize,
    pub depth: usize,
    pub tf: Option<f64>,
}

impl Cell {
    fn key(&self) -> (usize, usize, u64) {
        (self.n_sites, self.depth, self.tf.map_or(u64::MAX, f64::to_bits))
    }
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.is_empty() || self.label.contains([',', '\n', '\r', '"']) {
            return Err(Error::InvalidSpec(format!("label {:?} is not CSV-safe", self.label)));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidSpec("n_values is empty".into()));
        }
        for &n in &self.n_values {
            if n < 2 {
                return Err(Error::InvalidSpec(format!("N = {n} is below 2")));
            }
            let p = self
                .p_ranges
                .get(&n)
                .ok_or_else(|| Error::InvalidSpec(format!("no p_range for N = {n}")))?;
            parse_depth_range(p)?;
            if let Some(tf) = self.tf_ranges.get(&n) {
                if parse_range(tf)?.iter().any(|t| !(*t > 0.0)) {
                    return Err(Error::InvalidSpec(format!("tf_range for N = {n} has non-positive values")));
                }
            }
        }
        Ok(())
    }

    /// 200 restarts up to `N = 15`, 400 beyond, unless overridden.
    pub fn restarts_for(&self, n_sites: usize) -> usize {
        self.restarts_rule
            .get(&n_sites)
            .copied()
            .unwrap_or(if n_sites <= 15 { 200 } else { 400 })
    }

    /// Every cell in canonical `(N, p, t_f)` order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let mut cells = Vec::new();
        for &n in &self.n_values {
            let depths = parse_depth_range(&self.p_ranges[&n])?;
            let tfs: Vec<Option<f64>> = match self.tf_ranges.get(&n) {
                Some(r) => parse_range(r)?.into_iter().map(Some).collect(),
                None => vec![None],
            };
            for &p in &depths {
                for &tf in &tfs {
                    cells.push(Cell {
                        n_sites: n,
                        depth: p,
                        tf,
                    });
                }
            }
        }
        cells.sort_by(cell_order);
        cells.dedup_by(|a, b| a.key() == b.key());
        Ok(cells)
    }
}

fn cell_order(a: &Cell, b: &Cell) -> std::cmp::Ordering {
    a.n_sites
        .cmp(&b.n_sites)
        .then(a.depth.cmp(&b.depth))
        .then_with(|| match (a.tf, b.tf) {
            (None, None) => std::cmp::Ordering::Equal,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (Some(x), Some(y)) => x.total_cmp(&y),
        })
}

/// Per-cell seed derived from the campaign seed and the cell coordinates.
pub fn cell_seed(global_seed: u64, cell: &Cell) -> u64 {
    let (n, p, tf) = cell.key();
    splitmix64(global_seed ^ splitmix64(n as u64 ^ splitmix64(p as u64 ^ splitmix64(tf))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub label: String,
    pub n_sites: usize,
    pub depth: usize,
    pub tf: Option<f64>,
    pub best_fidelity: f64,
    pub restarts: usize,
    pub converged: usize,
    pub seed: u64,
    pub wall_time_s: f64,
    pub best_schedule: Schedule,
}

impl ExperimentRecord {
    pub fn cell(&self) -> Cell {
        Cell {
            n_sites: self.n_sites,
            depth: self.depth,
            tf: self.tf,
        }
    }

    pub fn to_csv_row(&self) -> String {
        let tf = self.tf.map_or_else(|| "free".to_string(), |t| format!("{t:.16e}"));
        format!(
            "{},{},{},{},{:.16e},{},{},{},{:.16e},{}",
            self.label,
            self.n_sites,
            self.depth,
            tf,
            self.best_fidelity,
            self.restarts,
            self.converged,
            self.seed,
            self.wall_time_s,
            self.best_schedule
        )
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse(format!("expected 10 CSV fields, got {}: {line:?}", fields.len())));
        }
        let bad = |what: &str| Error::Parse(format!("bad {what} in CSV row {line:?}"));
        let tf = match fields[3] {
            "free" => None,
            t => Some(t.parse().map_err(|_| bad("tf"))?),
        };
        let best_fidelity: f64 = fields[4].parse().map_err(|_| bad("best_fidelity"))?;
        if !(0.0..=1.0 + 1e-9).contains(&best_fidelity) {
            return Err(bad("best_fidelity"));
        }
        Ok(Self {
            label: fields[0].to_string(),
            n_sites: fields[1].parse().map_err(|_| bad("N"))?,
            depth: fields[2].parse().map_err(|_| bad("p"))?,
            tf,
            best_fidelity,
            restarts: fields[5].parse().map_err(|_| bad("restarts"))?,
            converged: fields[6].parse().map_err(|_| bad("converged"))?,
            seed: fields[7].parse().map_err(|_| bad("seed"))?,
            wall_time_s: fields[8].parse().map_err(|_| bad("wall_time_s"))?,
            best_schedule: fields[9].parse()?,
        })
    }
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(Error::Parse(format!("unexpected CSV header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        records.push(ExperimentRecord::from_csv_row(&line)?);
    }
    Ok(records)
}

/// Writes header and rows through a temporary file, then renames it over
/// `path`.
pub fn write_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut out = std::io::BufWriter::new(File::create(&tmp)?);
        writeln!(out, "{CSV_HEADER}")?;
        for r in records {
            writeln!(out, "{}", r.to_csv_row())?;
        }
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    /// Base optimizer settings; restarts, seed and mode are set per cell.
    pub optimizer: OptimizerConfig,
    /// Overrides the spec's restart rule for every cell.
    pub restarts: Option<usize>,
    /// Stop after this many new cells, leaving the rest for a resumed run.
    pub max_new_cells: Option<usize>,
    /// Store measured wall time; off by default so reruns are byte-identical.
    pub record_wall_time: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            restarts: None,
            max_new_cells: None,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    /// All records in the CSV, canonical order.
    pub records: Vec<ExperimentRecord>,
    pub new_cells: usize,
    pub skipped_cells: usize,
    /// False when `max_new_cells` left cells pending.
    pub complete: bool,
}

/// Runs every cell of `spec` not already present in `csv_path`, appending
/// each finished record as it completes, then rewrites the file in canonical
/// `(N, p, t_f)` order.
pub fn run_grid(spec: &GridSpec, csv_path: &Path, options: &GridOptions) -> Result<GridOutcome> {
    let cells = spec.cells()?;
    let mut existing = if csv_path.exists() { read_csv(csv_path)? } else { Vec::new() };
    existing.retain(|r| r.label == spec.label);
    let done: HashSet<_> = existing.iter().map(|r| r.cell().key()).collect();

    let pending: Vec<Cell> = cells.iter().copied().filter(|c| !done.contains(&c.key())).collect();
    let skipped_cells = cells.len() - pending.len();
    let take = options.max_new_cells.map_or(pending.len(), |k| k.min(pending.len()));
    let complete = take == pending.len();
    let batch = &pending[..take];

    if !csv_path.exists() {
        if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut f = File::create(csv_path)?;
        writeln!(f, "{CSV_HEADER}")?;
    }
    let sink = Mutex::new(OpenOptions::new().append(true).open(csv_path)?);

    let fresh: Vec<ExperimentRecord> = batch
        .par_iter()
        .map(|cell| -> Result<ExperimentRecord> {
            let record = run_cell(spec, cell, options)?;
            let mut f = sink.lock().expect("CSV sink poisoned");
            writeln!(f, "{}", record.to_csv_row())?;
            f.flush()?;
            Ok(record)
        })
        .collect::<Result<_>>()?;
    drop(sink);

    let mut records = existing;
    records.extend(fresh);
    records.sort_by(|a, b| cell_order(&a.cell(), &b.cell()));
    write_csv(csv_path, &records)?;
    Ok(GridOutcome {
        records,
        new_cells: take,
        skipped_cells,
        complete,
    })
}

fn run_cell(spec: &GridSpec, cell: &Cell, options: &GridOptions) -> Result<ExperimentRecord> {
    let seed = cell_seed(spec.seed, cell);
    let restarts = options.restarts.unwrap_or_else(|| spec.restarts_for(cell.n_sites));
    let config = OptimizerConfig {
        restarts,
        rng_seed: seed,
        mode: cell.tf.map_or(OptimizerMode::Free, OptimizerMode::FixedTf),
        ..options.optimizer.clone()
    };
    let start = Instant::now();
    let result = optimize(cell.n_sites, cell.depth, &config, &[])?;
    let wall = start.elapsed().as_secs_f64();
    log::debug!(
        "cell N={} p={} tf={:?}: F={:.6}",
        cell.n_sites,
        cell.depth,
        cell.tf,
        result.best_fidelity
    );
    Ok(ExperimentRecord {
        label: spec.label.clone(),
        n_sites: cell.n_sites,
        depth: cell.depth,
        tf: cell.tf,
        best_fidelity: result.best_fidelity.clamp(0.0, 1.0),
        restarts,
        converged: result.converged_count(),
        seed,
        wall_time_s: if options.record_wall_time { wall } else { 0.0 },
        best_schedule: result.best_schedule,
    })
}
