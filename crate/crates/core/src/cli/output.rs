use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Serialize, Serializer};

/// A float that serializes non-finite values as strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("nan")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

impl Cell {
    fn render(self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.12e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.render()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One invariant check of the validation run.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub value: Real,
    /// `"<"` or `">"`: how `value` is compared to `threshold`.
    pub comparison: &'static str,
    pub threshold: Real,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl SuiteResult {
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value: Real(value),
            comparison: "<",
            threshold: Real(threshold),
            passed: value < threshold,
            detail: None,
        }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            value: Real(value),
            comparison: ">",
            threshold: Real(threshold),
            passed: value > threshold,
            detail: None,
        }
    }

    pub fn failed(name: &str, detail: String) -> Self {
        Self {
            name: name.to_string(),
            value: Real(f64::NAN),
            comparison: "<",
            threshold: Real(f64::NAN),
            passed: false,
            detail: Some(detail),
        }
    }
}

/// Headline numbers of a run; fields absent from a scenario are `null`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: &'static str,
    pub surface: String,
    pub order: Option<usize>,
    pub radius_estimate: Option<Real>,
    pub positivity_horizon: Option<Real>,
    pub fitted_residual_order: Option<Real>,
    pub residual_order_threshold: Option<Real>,
    pub max_hcma_residual: Option<Real>,
    pub max_geodesic_residual: Option<Real>,
    pub speed_drift: Option<Real>,
    pub length: Option<Real>,
    pub max_residual_mod_sk: Option<Real>,
    pub equivariance_defect: Option<Real>,
    pub c0_ratio: Option<Real>,
    pub c0_strictly_increasing: Option<bool>,
    pub warnings: Vec<String>,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

impl Summary {
    pub fn new(scenario: &'static str, surface: String) -> Self {
        Self {
            scenario,
            surface,
            order: None,
            radius_estimate: None,
            positivity_horizon: None,
            fitted_residual_order: None,
            residual_order_threshold: None,
            max_hcma_residual: None,
            max_geodesic_residual: None,
            speed_drift: None,
            length: None,
            max_residual_mod_sk: None,
            equivariance_defect: None,
            c0_ratio: None,
            c0_strictly_increasing: None,
            warnings: Vec::new(),
            suites: Vec::new(),
            passed: true,
        }
    }
}

/// Everything a run writes.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub series: Option<Table>,
    pub residuals: Option<Table>,
    pub ray: Option<Table>,
    pub summary: Summary,
}

impl Outputs {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, table) in [
            ("series.csv", &self.series),
            ("residuals.csv", &self.residuals),
            ("ray.csv", &self.ray),
        ] {
            if let Some(t) = table {
                fs::write(dir.join(name), t.to_csv())?;
            }
        }
        let mut json = serde_json::to_string_pretty(&self.summary).map_err(io::Error::other)?;
        json.push('\n');
        fs::write(dir.join("summary.json"), json)
    }
}

fn number(v: Option<Real>) -> String {
    match v {
        Some(Real(x)) => format!("{x:.6e}"),
        None => "-".to_string(),
    }
}

/// Fixed-width table of the headline numbers.
pub fn report(summary: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario  {}", summary.scenario);
    let _ = writeln!(out, "surface   {}", summary.surface);
    if summary.suites.is_empty() {
        headline(&mut out, summary);
    } else {
        suite_table(&mut out, summary);
    }
    for w in &summary.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    let _ = writeln!(out, "status    {}", if summary.passed { "ok" } else { "FAILED" });
    out
}

fn headline(out: &mut String, summary: &Summary) {
    let _ = writeln!(out, "{:<28} {:>16}", "quantity", "value");
    let _ = writeln!(out, "{:-<28} {:->16}", "", "");
    let mut row = |name: &str, value: String| {
        let _ = writeln!(out, "{name:<28} {value:>16}");
    };
    row(
        "order",
        summary.order.map_or("-".to_string(), |k| k.to_string()),
    );
    row("radius_estimate", number(summary.radius_estimate));
    row("positivity_horizon", number(summary.positivity_horizon));
    row("fitted_residual_order", number(summary.fitted_residual_order));
    row("residual_order_threshold", number(summary.residual_order_threshold));
    row("max_hcma_residual", number(summary.max_hcma_residual));
    row("max_geodesic_residual", number(summary.max_geodesic_residual));
    row("speed_drift", number(summary.speed_drift));
    row("length", number(summary.length));
    row("max_residual_mod_sk", number(summary.max_residual_mod_sk));
    row("equivariance_defect", number(summary.equivariance_defect));
    row("c0_ratio", number(summary.c0_ratio));
    row(
        "c0_strictly_increasing",
        summary
            .c0_strictly_increasing
            .map_or("-".to_string(), |b| b.to_string()),
    );
}

fn suite_table(out: &mut String, summary: &Summary) {
    {
        let _ = writeln!(out, "{:<36} {:>14} {:>2} {:>14}  result", "suite", "value", "", "threshold");
        let _ = writeln!(out, "{:-<36} {:->14} {:->2} {:->14}  {:-<6}", "", "", "", "", "");
        for s in &summary.suites {
            let _ = writeln!(
                out,
                "{:<36} {:>14} {:>2} {:>14}  {}",
                s.name,
                format!("{:.6e}", s.value.0),
                s.comparison,
                format!("{:.6e}", s.threshold.0),
                if s.passed { "pass" } else { "FAIL" }
            );
        }
    }
}
