use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Per-run values with their mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn from_runs(runs: Vec<f64>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = runs.iter().sum::<f64>() / n;
        let var = runs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary {
            runs,
            mean,
            std: var.sqrt(),
        }
    }

    /// Whether `mean` and `std` agree with `runs` within `tol`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let fresh = Summary::from_runs(self.runs.clone());
        (fresh.mean - self.mean).abs() <= tol && (fresh.std - self.std).abs() <= tol
    }
}

/// Metrics of one run of one method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub mse: Option<f64>,
    pub f1: f64,
    pub auc: f64,
}

/// One row of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub mse: Option<Summary>,
    pub f1: Summary,
    pub auc: Summary,
}

impl EvalReport {
    /// Aggregate runs; MSE is reported only when every run has one.
    pub fn from_runs(method: impl Into<String>, runs: &[RunMetrics]) -> Self {
        let mse = runs
            .iter()
            .map(|r| r.mse)
            .collect::<Option<Vec<f64>>>()
            .filter(|v| !v.is_empty())
            .map(Summary::from_runs);
        EvalReport {
            method: method.into(),
            mse,
            f1: Summary::from_runs(runs.iter().map(|r| r.f1).collect()),
            auc: Summary::from_runs(runs.iter().map(|r| r.auc).collect()),
        }
    }

    pub const CSV_HEADER: &'static str = "method,mse,mse_std,f1,f1_std,auc,auc_std";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{},", self.method);
        match &self.mse {
            Some(m) => {
                let _ = write!(s, "{:.6},{:.6},", m.mean, m.std);
            }
            None => s.push_str(",,"),
        }
        let _ = write!(
            s,
            "{:.6},{:.6},{:.6},{:.6}",
            self.f1.mean, self.f1.std, self.auc.mean, self.auc.std
        );
        s
    }

    /// Header plus one line per report.
    pub fn table_csv(reports: &[EvalReport]) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in reports {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}
