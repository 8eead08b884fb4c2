use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DiagnosticRow, PathDiagnostics};
use crate::error::{Error, Result};

/// Sample mean and the half-width `3·s/√n` of its confidence band.
pub fn mean_and_band(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 3.0 * (var / n as f64).sqrt())
}

/// Mean and band of one diagnostic over paths, per output time.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnSummary {
    pub name: String,
    pub mean: Vec<f64>,
    pub band: Vec<f64>,
}

/// One asserted criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerLine {
    pub criterion: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    /// False when the line is informational only (too few paths behind a band).
    pub asserted: bool,
}

/// Path-averaged diagnostics with fitted constants and a pass/fail ledger.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleReport {
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub columns: Vec<ColumnSummary>,
    pub fitted: BTreeMap<String, f64>,
    pub ledger: Vec<LedgerLine>,
}

/// Minimum ensemble size behind any asserted criterion.
pub const MIN_ASSERTED_PATHS: usize = 30;

/// Scalar columns of a row, in the order used by the CSV writers.
pub fn row_columns(nu_grid: &[f64], weak: usize) -> Vec<String> {
    let mut c: Vec<String> = vec!["norm_l2_sq".into()];
    for nu in nu_grid {
        c.push(format!("norm_hm1_nu_{nu}_sq"));
    }
    c.extend(
        [
            "norm_hm1_homog_sq",
            "phi_lambda",
            "phi_negative_samples",
            "grad_psi_l2_sq",
            "dissipation",
            "l2_time_integral",
            "yosida_grad_integral",
            "min_value",
            "negativity_fraction",
            "mass",
            "leakage",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    for j in 0..weak {
        c.push(format!("weak_residual_{j}"));
    }
    c
}

pub fn row_values(r: &DiagnosticRow) -> Vec<f64> {
    let mut v = vec![r.norm_l2_sq];
    v.extend(&r.norm_hminus1_nu_sq);
    v.extend([
        r.norm_hminus1_homog_sq,
        r.phi_lambda,
        r.phi_negative_samples as f64,
        r.grad_psi_l2_sq,
        r.dissipation,
        r.l2_time_integral,
        r.yosida_grad_integral,
        r.min_value,
        r.negativity_fraction,
        r.mass,
        r.leakage,
    ]);
    v.extend(&r.weak_residuals);
    v
}

impl EnsembleReport {
    /// Averages every scalar column across paths; all paths must share output times.
    pub fn from_paths(paths: &[PathDiagnostics]) -> Result<Self> {
        let first = paths
            .first()
            .ok_or_else(|| Error::Param("an ensemble needs at least one path".into()))?;
        let times: Vec<f64> = first.rows.iter().map(|r| r.t).collect();
        for p in paths {
            if p.rows.len() != times.len() || p.rows.iter().zip(&times).any(|(r, t)| r.t != *t) {
                return Err(Error::GridMismatch(format!(
                    "path {} has different output times",
                    p.path_id
                )));
            }
        }
        let names = row_columns(&first.nu_grid, first.weak_modes.len());
        let mut columns: Vec<ColumnSummary> = names
            .into_iter()
            .map(|name| ColumnSummary {
                name,
                mean: Vec::with_capacity(times.len()),
                band: Vec::with_capacity(times.len()),
            })
            .collect();
        for ti in 0..times.len() {
            let per_path: Vec<Vec<f64>> = paths.iter().map(|p| row_values(&p.rows[ti])).collect();
            for (ci, col) in columns.iter_mut().enumerate() {
                let s: Vec<f64> = per_path.iter().map(|v| v[ci]).collect();
                let (m, b) = mean_and_band(&s);
                col.mean.push(m);
                col.band.push(b);
            }
        }
        Ok(EnsembleReport {
            n_paths: paths.len(),
            times,
            columns,
            fitted: BTreeMap::new(),
            ledger: Vec::new(),
        })
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSummary> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Appends a criterion resting on a Monte-Carlo band; with fewer than
    /// [`MIN_ASSERTED_PATHS`] paths it is recorded but not asserted.
    pub fn assert_statistical(&mut self, criterion: &str, value: f64, threshold: f64, pass: bool) {
        let asserted = self.n_paths >= MIN_ASSERTED_PATHS;
        self.ledger.push(LedgerLine {
            criterion: if asserted {
                criterion.to_string()
            } else {
                format!("{criterion} [not asserted: fewer than {MIN_ASSERTED_PATHS} paths]")
            },
            value,
            threshold,
            pass,
            asserted,
        });
    }

    /// Appends a criterion that holds path by path and needs no band.
    pub fn assert_exact(&mut self, criterion: &str, value: f64, threshold: f64, pass: bool) {
        self.ledger.push(LedgerLine {
            criterion: criterion.to_string(),
            value,
            threshold,
            pass,
            asserted: true,
        });
    }

    /// True when every asserted line passes.
    pub fn all_pass(&self) -> bool {
        self.ledger.iter().all(|l| l.pass || !l.asserted)
    }

    /// `t, column_mean, column_band, …` rows.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        for c in &self.columns {
            header.push(format!("{}_mean", c.name));
            header.push(format!("{}_band", c.name));
        }
        wtr.write_record(&header)?;
        for (ti, t) in self.times.iter().enumerate() {
            let mut row = vec![format_float(*t)];
            for c in &self.columns {
                row.push(format_float(c.mean[ti]));
                row.push(format_float(c.band[ti]));
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation, so CSVs are byte-stable and lossless.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}
