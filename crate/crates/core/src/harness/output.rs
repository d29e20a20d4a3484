use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::experiment::ResultRows;
use crate::error::{Error, Result};

pub const REGRET_HEADER: [&str; 7] = ["run_id", "algorithm", "epsilon", "alpha", "seed", "t", "cum_regret"];
pub const CONCENTRATION_HEADER: [&str; 8] = [
    "n",
    "epsilon",
    "delta",
    "alpha",
    "k",
    "estimator",
    "empirical_quantile",
    "theoretical_beta",
];
pub const AUDIT_HEADER: [&str; 5] = ["n", "threshold", "trials", "max_observed", "bound"];

/// 17 significant digits in scientific notation; parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `rows` as CSV to `path`.
pub fn emit_csv(rows: &ResultRows, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_csv(rows, file).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Writes `rows` as CSV to any writer: header line, then one line per row.
pub fn write_csv<W: Write>(rows: &ResultRows, sink: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    let csv_err = |source| Error::Csv {
        path: "<writer>".into(),
        source,
    };
    match rows {
        ResultRows::Regret(rows) => {
            w.write_record(REGRET_HEADER).map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.run_id.to_string(),
                    r.algorithm.id().to_string(),
                    format_f64(r.epsilon),
                    format_f64(r.alpha),
                    r.seed.to_string(),
                    r.t.to_string(),
                    format_f64(r.cum_regret),
                ])
                .map_err(csv_err)?;
            }
        }
        ResultRows::Concentration(rows) => {
            w.write_record(CONCENTRATION_HEADER).map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.n.to_string(),
                    format_f64(r.epsilon),
                    format_f64(r.delta),
                    format_f64(r.alpha),
                    format_f64(r.k),
                    r.estimator.id().to_string(),
                    format_f64(r.empirical_quantile),
                    format_f64(r.theoretical_beta),
                ])
                .map_err(csv_err)?;
            }
        }
        ResultRows::Audit(rows) => {
            w.write_record(AUDIT_HEADER).map_err(csv_err)?;
            for r in rows {
                w.write_record([
                    r.n.to_string(),
                    format_f64(r.threshold),
                    r.trials.to_string(),
                    format_f64(r.max_observed),
                    format_f64(r.bound),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| csv_err(e.into()))
}
