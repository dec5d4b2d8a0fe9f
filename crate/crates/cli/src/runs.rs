//! Cell scheduling, run-table I/O and aggregation shared by both tasks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use serde::Serialize;

pub const RUNS_DIR: &str = "runs";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// One (strategy, seed) cell of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Cell {
    pub strategy: String,
    pub seed: u64,
}

impl Cell {
    pub fn stem(&self) -> String {
        format!("{}-seed{}", self.strategy, self.seed)
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    task: &'a str,
    complete: bool,
    completed: Vec<ManifestEntry>,
    failed: Vec<ManifestFailure>,
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    strategy: String,
    seed: u64,
    csv: String,
}

#[derive(Debug, Serialize)]
struct ManifestFailure {
    strategy: String,
    seed: u64,
    error: String,
}

/// Runs `work` on every cell with at most `jobs` cells in flight, then
/// writes the manifest. Every cell is attempted even if another fails;
/// the first failure is returned afterwards.
pub fn run_cells<F>(out: &Path, task: &str, cells: &[Cell], jobs: usize, work: F) -> Result<()>
where
    F: Fn(&Cell) -> Result<()> + Sync,
{
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<std::result::Result<(), String>>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let r = work(&cells[i]).map_err(|e| format!("{e:#}"));
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("result lock");
    let mut manifest = Manifest { task, complete: true, completed: Vec::new(), failed: Vec::new() };
    for (cell, r) in cells.iter().zip(&results) {
        match r {
            Some(Ok(())) => manifest.completed.push(ManifestEntry {
                strategy: cell.strategy.clone(),
                seed: cell.seed,
                csv: format!("{RUNS_DIR}/{}.csv", cell.stem()),
            }),
            Some(Err(e)) => {
                manifest.complete = false;
                manifest.failed.push(ManifestFailure {
                    strategy: cell.strategy.clone(),
                    seed: cell.seed,
                    error: e.clone(),
                });
            }
            None => manifest.complete = false,
        }
    }
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    if let Some(f) = manifest.failed.first() {
        bail!("cell {}-seed{} failed: {}", f.strategy, f.seed, f.error);
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn prepare_out(out: &Path, subdirs: &[&str]) -> Result<()> {
    for d in std::iter::once(RUNS_DIR).chain(subdirs.iter().copied()) {
        fs::create_dir_all(out.join(d)).with_context(|| format!("creating {}", out.join(d).display()))?;
    }
    Ok(())
}

pub fn ensure_unique<T: PartialEq + std::fmt::Debug>(what: &str, items: &[T]) -> Result<()> {
    if items.is_empty() {
        bail!("{what} must not be empty");
    }
    for (i, a) in items.iter().enumerate() {
        if items[..i].contains(a) {
            bail!("duplicate entry {a:?} in {what}");
        }
    }
    Ok(())
}

/// A per-run CSV: first column is the step (or epoch) index, then numeric
/// metrics, plus `strategy` and `seed` columns.
#[derive(Debug, Clone)]
pub struct RunTable {
    pub strategy: String,
    pub seed: u64,
    pub index_name: String,
    pub metrics: Vec<String>,
    /// (index, metric values) in file order.
    pub rows: Vec<(u64, Vec<f64>)>,
}

impl RunTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let col = |name: &str| header.iter().position(|h| h == name);
        let (Some(si), Some(ei)) = (col("strategy"), col("seed")) else {
            bail!("{}: missing strategy/seed columns", path.display());
        };
        let metric_cols: Vec<usize> = (1..header.len()).filter(|&i| i != si && i != ei).collect();
        let mut table = RunTable {
            strategy: String::new(),
            seed: 0,
            index_name: header[0].clone(),
            metrics: metric_cols.iter().map(|&i| header[i].clone()).collect(),
            rows: Vec::new(),
        };
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if n == 0 {
                table.strategy = rec[si].to_owned();
                table.seed = rec[ei].parse().with_context(|| format!("{}: bad seed", path.display()))?;
            }
            let idx: u64 = rec[0].parse().with_context(|| format!("{}: bad index", path.display()))?;
            let vals = metric_cols
                .iter()
                .map(|&i| rec[i].parse::<f64>().with_context(|| format!("{}: bad value {:?}", path.display(), &rec[i])))
                .collect::<Result<Vec<_>>>()?;
            table.rows.push((idx, vals));
        }
        if table.rows.is_empty() {
            bail!("{}: no rows", path.display());
        }
        Ok(table)
    }

    pub fn value(&self, metric: &str, index: u64) -> Option<f64> {
        let m = self.metrics.iter().position(|x| x == metric)?;
        self.rows.iter().find(|(i, _)| *i == index).map(|(_, v)| v[m])
    }

    pub fn final_index(&self) -> u64 {
        self.rows.last().expect("non-empty").0
    }
}

/// Every run table under `dir/runs`, sorted by file name.
pub fn read_runs(dir: &Path) -> Result<Vec<RunTable>> {
    let runs = dir.join(RUNS_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&runs)
        .with_context(|| format!("reading {}", runs.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    if paths.is_empty() {
        bail!("no run CSVs in {}", runs.display());
    }
    paths.iter().map(|p| RunTable::read(p)).collect()
}

/// Mean and standard error of the mean; the SEM is absent below two values.
pub fn mean_sem(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn by_strategy(tables: &[RunTable]) -> BTreeMap<&str, Vec<&RunTable>> {
    let mut m: BTreeMap<&str, Vec<&RunTable>> = BTreeMap::new();
    for t in tables {
        m.entry(t.strategy.as_str()).or_default().push(t);
    }
    m
}

/// Writes `aggregate.csv`: per strategy and logged index, the number of
/// runs and the mean and SEM of every metric.
pub fn write_aggregate(dir: &Path) -> Result<()> {
    let tables = read_runs(dir)?;
    let metrics = tables[0].metrics.clone();
    if tables.iter().any(|t| t.metrics != metrics) {
        bail!("run CSVs in {} have different columns", dir.display());
    }
    let mut w = csv::Writer::from_path(dir.join(AGGREGATE_FILE))?;
    let mut header = vec![tables[0].index_name.clone(), "strategy".into(), "n".into()];
    for m in &metrics {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_sem"));
    }
    w.write_record(&header)?;
    for (strategy, runs) in by_strategy(&tables) {
        for (idx, _) in &runs[0].rows {
            let mut rec = vec![idx.to_string(), strategy.to_owned()];
            let present: Vec<&RunTable> =
                runs.iter().copied().filter(|t| t.value(&metrics[0], *idx).is_some()).collect();
            rec.push(present.len().to_string());
            for m in &metrics {
                let vals: Vec<f64> = present.iter().filter_map(|t| t.value(m, *idx)).collect();
                let (mean, sem) = mean_sem(&vals);
                rec.push(mean.to_string());
                rec.push(fmt_opt(sem));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub strategy: String,
    pub n: usize,
    pub mean: f64,
    pub sem: Option<f64>,
}

/// Strategies ordered by their mean `metric` at `index` (the common final
/// index when `None`), ascending unless `descending`.
pub fn compare(dir: &Path, metric: &str, index: Option<u64>, descending: bool) -> Result<Vec<Ranking>> {
    let tables = read_runs(dir)?;
    if !tables[0].metrics.iter().any(|m| m == metric) {
        bail!("unknown metric {metric:?}; available: {}", tables[0].metrics.join(", "));
    }
    let index = match index {
        Some(i) => i,
        None => tables.iter().map(RunTable::final_index).min().expect("non-empty"),
    };
    let mut out = Vec::new();
    for (strategy, runs) in by_strategy(&tables) {
        let vals = runs
            .iter()
            .map(|t| {
                t.value(metric, index)
                    .with_context(|| format!("{} {index} out of range for {}-seed{}", t.index_name, t.strategy, t.seed))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, sem) = mean_sem(&vals);
        out.push(Ranking { strategy: strategy.to_owned(), n: vals.len(), mean, sem });
    }
    out.sort_by(|a, b| {
        let o = a.mean.total_cmp(&b.mean);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    Ok(out)
}

pub fn write_rankings<W: std::io::Write>(w: W, rankings: &[Ranking]) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["strategy", "n", "mean", "sem"])?;
    for r in rankings {
        w.write_record([r.strategy.clone(), r.n.to_string(), r.mean.to_string(), fmt_opt(r.sem)])?;
    }
    w.flush()?;
    Ok(())
}
