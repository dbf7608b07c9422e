use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Direction, HnMode, MetricsReport, Stratum};
use crate::scalar::Score;

fn num<S: Score>(v: S) -> String {
    format!("{:.4}", v.to_f64().unwrap_or(f64::NAN))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One CSV row per scorer, stratum and direction.
pub fn to_csv<S: Score>(reports: &[MetricsReport<S>]) -> String {
    let mut out = String::from(
        "scorer,stratum,split,complexity,hn,direction,items,recall_at_1,recall_at_3,recall_at_5,\
         avg_recall_at_k,fold_count,mean_recall_at_1,std_recall_at_1\n",
    );
    for report in reports {
        for r in &report.rows {
            let (folds, mean, std) = match &r.folds {
                Some(f) => (
                    f.fold_count.to_string(),
                    num(f.mean_recall_at_1),
                    num(f.std_recall_at_1),
                ),
                None => Default::default(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{folds},{mean},{std}",
                report.scorer,
                r.stratum,
                opt(r.stratum.split),
                opt(r.stratum.complexity),
                opt(r.stratum.hn.map(HnMode::as_str)),
                r.direction.as_str(),
                r.items,
                num(r.recall_at[0]),
                num(r.recall_at[1]),
                num(r.recall_at[2]),
                num(r.avg_recall_at_k),
            );
        }
    }
    out
}

/// Recall@1 tables, one per direction and hard-negative mode: a row per
/// scorer and a column per split or complexity. RAW fold results show the
/// mean and standard deviation.
pub fn to_markdown<S: Score>(reports: &[MetricsReport<S>]) -> String {
    type Table = BTreeMap<Stratum, BTreeMap<usize, String>>;
    let mut tables: BTreeMap<(Direction, Option<HnMode>), Table> = BTreeMap::new();
    for (i, report) in reports.iter().enumerate() {
        for r in &report.rows {
            let cell = match &r.folds {
                Some(f) => format!("{} ± {}", num(f.mean_recall_at_1), num(f.std_recall_at_1)),
                None => num(r.recall_at[0]),
            };
            let column = Stratum {
                hn: None,
                ..r.stratum
            };
            tables
                .entry((r.direction, r.stratum.hn))
                .or_default()
                .entry(column)
                .or_default()
                .insert(i, cell);
        }
    }
    let mut out = String::new();
    for ((direction, hn), columns) in tables {
        let mode = hn.map_or("raw", HnMode::as_str);
        let _ = writeln!(out, "### Recall@1, {mode}, {}\n", direction.as_str());
        let _ = write!(out, "| scorer |");
        for c in columns.keys() {
            let _ = write!(out, " {c} |");
        }
        let _ = write!(out, "\n|---|");
        for _ in columns.keys() {
            let _ = write!(out, "---|");
        }
        out.push('\n');
        for (i, report) in reports.iter().enumerate() {
            let _ = write!(out, "| {} |", report.scorer);
            for cells in columns.values() {
                let _ = write!(out, " {} |", cells.get(&i).map_or("", String::as_str));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
