//! Derivative, normalization and collapse of stored sweeps.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::fss::{
    collapse_cost, derivative_name, locate_pseudocritical, normalize_by_extremum, numerical_derivative,
    scaling_values, CollapseResult, Extremum, Pseudocritical, ScaledSeries, ScalingVariable, SweepSeries,
};

use super::config::CollapseRequest;
use super::io::format_number;

/// Outcome of one collapse request.
#[derive(Clone, Debug)]
pub struct Collapse {
    /// Name of the collapsed column (`d_<y>` when differentiated).
    pub column: String,
    pub scaled: Vec<ScaledSeries<f64>>,
    pub result: CollapseResult<f64>,
}

fn label(s: &SweepSeries<f64>) -> String {
    format!("L={} {}={}", s.tag.length, s.tag.coupling_name, s.tag.coupling_value)
}

/// Differentiates and normalizes `y` as requested, evaluates the scaling
/// variable per series and computes the collapse cost `Q`.
pub fn run_collapse(series: &[SweepSeries<f64>], req: &CollapseRequest) -> Result<Collapse> {
    let order = req.order_column.clone().unwrap_or_else(|| req.y.clone());
    let column = if req.derivative { derivative_name(&req.y) } else { req.y.clone() };
    let mut scaled = Vec::with_capacity(series.len());
    for s in series {
        let mut s = if req.derivative { numerical_derivative(s, &req.y)? } else { s.clone() };
        if let Some(mode) = req.normalize {
            s = normalize_by_extremum(&s, &column, mode)?;
        }
        let x = scaling_values(&s, req.x, &order)?;
        scaled.push(ScaledSeries {
            label: label(&s),
            x,
            y: s.column(&column)?.to_vec(),
        });
    }
    let result = collapse_cost(&scaled, req.x.as_str(), &column)?;
    Ok(Collapse { column, scaled, result })
}

/// Convenience form of [`run_collapse`].
pub fn collapse(
    series: &[SweepSeries<f64>],
    x: ScalingVariable,
    y: &str,
    derivative: bool,
    normalize: Option<Extremum>,
) -> Result<Collapse> {
    run_collapse(
        series,
        &CollapseRequest {
            x,
            y: y.to_owned(),
            derivative,
            normalize,
            order_column: None,
        },
    )
}

/// Writes `series,<x>,<y>` rows of a collapse.
pub fn write_scaled<W: Write>(out: W, c: &Collapse) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let err = |e: csv::Error| crate::error::Error::Io(e.into());
    w.write_record(["series", c.result.x_name.as_str(), c.column.as_str()]).map_err(err)?;
    for s in &c.scaled {
        for (x, y) in s.x.iter().zip(&s.y) {
            w.write_record([s.label.clone(), format_number(*x), format_number(*y)]).map_err(err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaled_file(path: &Path, c: &Collapse) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut buf = Vec::new();
    write_scaled(&mut buf, c)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Pseudo-critical point of every series on `column`.
pub fn locate(series: &[SweepSeries<f64>], column: &str) -> Result<Vec<Pseudocritical<f64>>> {
    series.iter().map(|s| locate_pseudocritical(s, column)).collect()
}
