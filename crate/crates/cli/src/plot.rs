//! Plot-data tables: one whitespace-delimited file per (dataset, strategy)
//! with one row per ratio.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use spa_core::machines::Approach;

use crate::stats::{summarize, Summary};
use crate::sweep::{read_trials_csv, TrialRow};

pub const TABLE_HEADER: &str = "# ratio err_gsa_mean err_gsa_std err_lla_mean err_lla_std acc_gsa_mean acc_gsa_std acc_lla_mean acc_lla_std";

#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub dataset: String,
    pub strategy: String,
    /// `(ratio, [err_gsa, err_lla, acc_gsa, acc_lla])`.
    pub rows: Vec<(f64, [Summary; 4])>,
}

impl PlotTable {
    pub fn file_name(&self) -> String {
        format!("{}_{}.dat", self.dataset, self.strategy)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{TABLE_HEADER}\n");
        for (ratio, stats) in &self.rows {
            let _ = write!(s, "{ratio}");
            for st in stats {
                let _ = write!(s, " {} {}", st.mean, st.std);
            }
            s.push('\n');
        }
        s
    }
}

/// Builds the tables; cells without trials are dropped and reported in the
/// returned warnings.
pub fn build_tables(rows: &[TrialRow]) -> (Vec<PlotTable>, Vec<String>) {
    // (dataset, strategy) -> ratio -> seed -> row values
    type Cell = BTreeMap<u64, (Option<f64>, Option<f64>, Option<f64>, Option<f64>)>;
    let mut grid: BTreeMap<(String, String), BTreeMap<u64, (f64, Cell)>> = BTreeMap::new();
    let mut all_ratios: BTreeMap<String, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows {
        let key = r.ratio.to_bits();
        all_ratios.entry(r.dataset.clone()).or_default().insert(key, r.ratio);
        let cell = grid
            .entry((r.dataset.clone(), r.strategy.to_string()))
            .or_default()
            .entry(key)
            .or_insert_with(|| (r.ratio, Cell::new()));
        let e = cell.1.entry(r.seed).or_default();
        e.0 = e.0.or(r.err_gsa);
        e.1 = e.1.or(r.err_lla);
        match r.approach {
            Approach::Gsa => e.2 = Some(r.acc),
            Approach::Lla => e.3 = Some(r.acc),
            Approach::Ncr => {}
        }
    }
    let mut tables = Vec::new();
    let mut warnings = Vec::new();
    for ((dataset, strategy), by_ratio) in grid {
        let mut ratios: Vec<f64> = all_ratios[&dataset].values().copied().collect();
        ratios.sort_by(f64::total_cmp);
        let mut out = Vec::new();
        for ratio in ratios {
            let seeds = by_ratio.get(&ratio.to_bits()).map(|c| &c.1);
            let pick = |f: fn(&(Option<f64>, Option<f64>, Option<f64>, Option<f64>)) -> Option<f64>| -> Vec<f64> {
                seeds.map(|s| s.values().filter_map(f).collect()).unwrap_or_default()
            };
            let stats = [
                summarize(&pick(|e| e.0)),
                summarize(&pick(|e| e.1)),
                summarize(&pick(|e| e.2)),
                summarize(&pick(|e| e.3)),
            ];
            match stats {
                [Some(a), Some(b), Some(c), Some(d)] => out.push((ratio, [a, b, c, d])),
                _ => warnings.push(format!(
                    "warning: {dataset}/{strategy} ratio {ratio}: no complete trials, row omitted"
                )),
            }
        }
        tables.push(PlotTable {
            dataset,
            strategy,
            rows: out,
        });
    }
    (tables, warnings)
}

pub fn emit_plot_data(input: &Path, out_dir: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let rows = read_trials_csv(input)?;
    let (tables, warnings) = build_tables(&rows);
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = Vec::new();
    for t in tables {
        let path = out_dir.join(t.file_name());
        fs::write(&path, t.render()).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok((written, warnings))
}
