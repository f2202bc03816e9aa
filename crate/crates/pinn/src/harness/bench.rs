//! Reproduction of the paper-style systematic study tables.
//!
//! Each table iterates a (row, column) grid of experiment configs and emits
//! a CSV with the same row and column labels as the original table. Cells
//! run a few seeds and report the median, since single-seed values scatter.

use std::fmt::Write as _;

use super::config::{ExperimentConfig, Mode, QSpec};
use super::run::run;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableId {
    CtInf1,
    CtInf2,
    DtInf1,
    DtInf2,
    CtId1,
    CtId2,
    DtId1,
    DtId2,
}

impl std::str::FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ct_inf_1" => TableId::CtInf1,
            "ct_inf_2" => TableId::CtInf2,
            "dt_inf_1" => TableId::DtInf1,
            "dt_inf_2" => TableId::DtInf2,
            "ct_id_1" => TableId::CtId1,
            "ct_id_2" => TableId::CtId2,
            "dt_id_1" => TableId::DtId1,
            "dt_id_2" => TableId::DtId2,
            other => return Err(Error::structural(format!("unknown table id {other:?}"))),
        })
    }
}

impl TableId {
    pub const ALL: [&'static str; 8] = [
        "ct_inf_1", "ct_inf_2", "dt_inf_1", "dt_inf_2", "ct_id_1", "ct_id_2", "dt_id_1",
        "dt_id_2",
    ];
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub table: TableId,
    /// Row-label subset (exact label match); empty = all.
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub seeds: usize,
    pub base_seed: u64,
    /// Lift the desk-scale caps (q ≤ 100, max_iterations ≤ 20000).
    pub full_scale: bool,
    /// Override the per-run iteration budget.
    pub max_iterations: Option<usize>,
}

impl BenchOptions {
    pub fn new(table: TableId) -> Self {
        BenchOptions {
            table,
            rows: Vec::new(),
            cols: Vec::new(),
            seeds: 3,
            base_seed: 0,
            full_scale: false,
            max_iterations: None,
        }
    }
}

/// One finished table: a comment line describing the run, a header, and the
/// label-prefixed value rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub comment: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl BenchTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.comment);
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<BenchTable> {
        let mut lines = text.lines();
        let comment = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::structural("missing bench comment line"))?
            .to_string();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::structural("missing bench header"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect();
        Ok(BenchTable { comment, header, rows })
    }
}

struct TableDef {
    row_key: &'static str,
    row_labels: Vec<String>,
    col_key: &'static str,
    col_labels: Vec<String>,
    /// Percent-error tables carry a (λ1, λ2) pair per cell.
    pct: bool,
}

fn labels<T: std::fmt::Display>(vals: &[T]) -> Vec<String> {
    vals.iter().map(|v| v.to_string()).collect()
}

fn table_def(id: TableId) -> TableDef {
    match id {
        TableId::CtInf1 => TableDef {
            row_key: "n_u",
            row_labels: labels(&[20, 40, 60, 80, 100, 200]),
            col_key: "n_f",
            col_labels: labels(&[2000, 4000, 6000, 7000, 8000, 10000]),
            pct: false,
        },
        TableId::CtInf2 => TableDef {
            row_key: "layers",
            row_labels: labels(&[2, 4, 6, 8]),
            col_key: "neurons",
            col_labels: labels(&[10, 20, 40]),
            pct: false,
        },
        TableId::DtInf1 => TableDef {
            row_key: "q",
            row_labels: labels(&[1, 2, 4, 8, 16, 32, 64, 100, 500]),
            col_key: "dt",
            col_labels: labels(&[0.2, 0.4, 0.6, 0.8]),
            pct: false,
        },
        TableId::DtInf2 => TableDef {
            row_key: "layers",
            row_labels: labels(&[1, 2, 3]),
            col_key: "neurons",
            col_labels: labels(&[10, 25, 50]),
            pct: false,
        },
        TableId::CtId1 => TableDef {
            row_key: "n_u",
            row_labels: labels(&[500, 1000, 1500, 2000]),
            col_key: "noise",
            col_labels: labels(&[0, 1, 5, 10]),
            pct: true,
        },
        TableId::CtId2 => TableDef {
            row_key: "layers",
            row_labels: labels(&[2, 4, 6, 8]),
            col_key: "neurons",
            col_labels: labels(&[10, 20, 40]),
            pct: true,
        },
        TableId::DtId1 => TableDef {
            row_key: "dt",
            row_labels: labels(&[0.2, 0.4, 0.6, 0.8]),
            col_key: "noise",
            col_labels: labels(&[0, 1, 5, 10]),
            pct: true,
        },
        TableId::DtId2 => TableDef {
            row_key: "layers",
            row_labels: labels(&[1, 2, 3, 4]),
            col_key: "neurons",
            col_labels: labels(&[10, 25, 50]),
            pct: true,
        },
    }
}

/// Base config for a table cell before row/column values are applied.
fn base_config(id: TableId) -> ExperimentConfig {
    match id {
        TableId::CtInf1 | TableId::CtInf2 => {
            let mut cfg = ExperimentConfig::new(Mode::SolveCt);
            cfg.data.n_u = 100;
            cfg.data.n_f = 10_000;
            cfg
        }
        TableId::DtInf1 | TableId::DtInf2 => {
            let mut cfg = ExperimentConfig::new(Mode::SolveDt);
            cfg.data.n_n = 250;
            cfg.data.t_n = 0.1;
            cfg.data.dt = 0.8;
            cfg.irk.q = QSpec::Fixed(500);
            cfg
        }
        TableId::CtId1 | TableId::CtId2 => {
            let mut cfg = ExperimentConfig::new(Mode::IdentifyCt);
            cfg.data.n_u = 2000;
            cfg
        }
        TableId::DtId1 | TableId::DtId2 => {
            let mut cfg = ExperimentConfig::new(Mode::IdentifyDt);
            cfg.data.n_n = 199;
            cfg.data.n_n1 = 201;
            cfg.data.dt = 0.8;
            cfg.data.t_n = 0.1;
            cfg.irk.q = QSpec::default();
            cfg
        }
    }
}

fn apply_axis(cfg: &mut ExperimentConfig, key: &str, label: &str) -> Result<()> {
    let parse_usize =
        |l: &str| l.parse::<usize>().map_err(|_| Error::config(format!("bad label {l}")));
    let parse_f64 =
        |l: &str| l.parse::<f64>().map_err(|_| Error::config(format!("bad label {l}")));
    match key {
        "n_u" => cfg.data.n_u = parse_usize(label)?,
        "n_f" => cfg.data.n_f = parse_usize(label)?,
        "layers" => cfg.architecture.hidden_layers = parse_usize(label)?,
        "neurons" => cfg.architecture.width = parse_usize(label)?,
        "q" => cfg.irk.q = QSpec::Fixed(parse_usize(label)?),
        "dt" => {
            let dt = parse_f64(label)?;
            cfg.data.dt = dt;
            if cfg.mode == Mode::IdentifyDt {
                // center the snapshot gap in the unit interval
                cfg.data.t_n = 0.5 - dt / 2.0;
            }
        }
        "noise" => cfg.data.noise_level = parse_f64(label)? / 100.0,
        other => return Err(Error::config(format!("unknown axis key {other}"))),
    }
    Ok(())
}

fn median(mut vals: Vec<f64>) -> f64 {
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    }
}

/// Run a table (or a row/column subset). Cells run `seeds` seeds each and
/// report the median metric.
pub fn bench(opts: &BenchOptions, overrides: Option<&ExperimentConfig>) -> Result<BenchTable> {
    let def = table_def(opts.table);
    let keep = |subset: &[String], label: &String| subset.is_empty() || subset.contains(label);
    let row_labels: Vec<&String> =
        def.row_labels.iter().filter(|l| keep(&opts.rows, l)).collect();
    let col_labels: Vec<&String> =
        def.col_labels.iter().filter(|l| keep(&opts.cols, l)).collect();
    if row_labels.is_empty() || col_labels.is_empty() {
        return Err(Error::config("row/column subset selects nothing"));
    }

    let mut header = vec![def.row_key.to_string()];
    if def.pct {
        for l in &col_labels {
            header.push(format!("pct_l1_{}_{l}", def.col_key));
        }
        for l in &col_labels {
            header.push(format!("pct_l2_{}_{l}", def.col_key));
        }
    } else {
        for l in &col_labels {
            header.push(format!("rel_l2_{}_{l}", def.col_key));
        }
    }

    let mut rows = Vec::new();
    for row_label in &row_labels {
        let mut first = vec![(*row_label).clone()];
        let mut second = Vec::new();
        for col_label in &col_labels {
            let mut cfg = overrides.cloned().unwrap_or_else(|| base_config(opts.table));
            cfg.mode = base_config(opts.table).mode;
            apply_axis(&mut cfg, def.row_key, row_label)?;
            apply_axis(&mut cfg, def.col_key, col_label)?;
            if let Some(m) = opts.max_iterations {
                cfg.optimizer.max_iterations = m;
            }
            if !opts.full_scale {
                cfg.optimizer.max_iterations = cfg.optimizer.max_iterations.min(20_000);
                if cfg.resolved_q()? > 100 {
                    return Err(Error::config(format!(
                        "cell ({row_label}, {col_label}) needs q = {} > 100; rerun with --full-scale",
                        cfg.resolved_q()?
                    )));
                }
            }
            let mut rel = Vec::new();
            let mut p1 = Vec::new();
            let mut p2 = Vec::new();
            for k in 0..opts.seeds {
                cfg.seed = opts.base_seed + k as u64;
                let out = run(&cfg)?;
                rel.push(out.report.rel_l2);
                if let Some((e1, e2)) = out.report.pct_err {
                    p1.push(e1);
                    p2.push(e2);
                }
            }
            if def.pct {
                first.push(format!("{:.3e}", median(p1)));
                second.push(format!("{:.3e}", median(p2)));
            } else {
                first.push(format!("{:.3e}", median(rel)));
            }
        }
        first.extend(second);
        rows.push(first);
    }
    Ok(BenchTable {
        comment: format!(
            "table {:?} seeds {} base_seed {} full_scale {}",
            opts.table, opts.seeds, opts.base_seed, opts.full_scale
        ),
        header,
        rows,
    })
}
