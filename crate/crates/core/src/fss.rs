//! Finite-size scaling near first-order transitions.
//!
//! Scaling variables, the sweep-series container, grid derivatives,
//! normalization, pseudo-critical points, a scalar data-collapse cost and
//! the two-level master curves.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Field, Model};
use crate::scalar::Real;

/// Critical `Jz` of the `D = 0` Neel transition used in the staggered-field mapping.
pub const JZ_CRITICAL: f64 = 1.186;
/// Smallest field step accepted when probing a discontinuity.
pub const MIN_FIELD_STEP: f64 = 1e-13;

/// CSV column names shared by the pipeline and the analysis functions.
pub mod col {
    pub const E0: &str = "E0";
    pub const E1: &str = "E1";
    pub const GAP: &str = "gap";
    pub const MAGNETIZATION: &str = "magnetization";
    pub const ENTANGLEMENT: &str = "entanglement";
    pub const RDM_11: &str = "rdm_11";
    pub const RDM_12_RE: &str = "rdm_12_re";
    pub const RDM_12_IM: &str = "rdm_12_im";
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// `(1 - Bz^2)^(1/8)`, the spontaneous magnetization of the ordered chain.
pub fn m0_ising<T: Real>(bz: T) -> Result<T> {
    if !(bz >= T::zero() && bz < T::one()) {
        return Err(domain(format!("m0 needs 0 <= Bz < 1, got {bz}")));
    }
    Ok((T::one() - bz * bz).powf(T::lit(0.125)))
}

/// `2 (1 - Bz^2) Bz^L`, the open-chain gap in the ordered phase.
pub fn gap_analytic_ising<T: Real>(bz: T, length: usize) -> Result<T> {
    if !(bz > T::zero() && bz < T::one()) {
        return Err(domain(format!("analytic gap needs 0 < Bz < 1, got {bz}")));
    }
    if length < 2 {
        return Err(domain(format!("analytic gap needs L >= 2, got {length}")));
    }
    Ok(T::lit(2.0) * (T::one() - bz * bz) * bz.powi(length as i32))
}

/// `2 m0 Bx L / Delta_L`.
pub fn kappa1<T: Real>(bx: T, bz: T, length: usize) -> Result<T> {
    let m0 = m0_ising(bz)?;
    let gap = gap_analytic_ising(bz, length)?;
    Ok(T::lit(2.0) * m0 * bx * T::from_usize_lossy(length) / gap)
}

/// `(D - Dc_L) L / gap_L`, prefactor taken as one.
pub fn kappa2<T: Real>(d: T, dc: T, length: usize, gap: T) -> Result<T> {
    if !(gap > T::zero()) {
        return Err(domain(format!("kappa2 needs a positive gap, got {gap}")));
    }
    Ok((d - dc) * T::from_usize_lossy(length) / gap)
}

/// `(1 - (Jzc / Jz)^2)^(1/8)`.
pub fn m0_staggered<T: Real>(jz: T) -> Result<T> {
    let jzc = T::lit(JZ_CRITICAL);
    if !(jz > jzc) {
        return Err(domain(format!("staggered m0 needs Jz > {JZ_CRITICAL}, got {jz}")));
    }
    let r = jzc / jz;
    Ok((T::one() - r * r).powf(T::lit(0.125)))
}

/// `2 m0_st Bst L / gap_L`.
pub fn kappa3<T: Real>(bst: T, jz: T, length: usize, gap: T) -> Result<T> {
    if !(gap > T::zero()) {
        return Err(domain(format!("kappa3 needs a positive gap, got {gap}")));
    }
    Ok(T::lit(2.0) * m0_staggered(jz)? * bst * T::from_usize_lossy(length) / gap)
}

/// Two-level master curves `(f_M, f_Delta) = (k / sqrt(1 + k^2), sqrt(1 + k^2))`.
///
/// The two crossing states `|+>`, `|->` with order parameter `+-m0 L` are
/// split by the field, `x = m0 h L`, and mixed by the finite-size tunnelling
/// `Delta_L / 2`:
///
/// ```text
/// H2 = [[-x, Delta_L/2], [Delta_L/2, x]],  eigenvalues +-sqrt(x^2 + Delta_L^2/4)
/// ```
///
/// With `k = 2x / Delta_L` the gap is `Delta_L sqrt(1 + k^2)` and the ground
/// state has `<sz> = x / sqrt(x^2 + Delta_L^2/4) = k / sqrt(1 + k^2)`.
pub fn two_level_master<T: Real>(kappa: T) -> (T, T) {
    let s = (T::one() + kappa * kappa).sqrt();
    (kappa / s, s)
}

/// The 2x2 avoided-crossing Hamiltonian behind [`two_level_master`].
pub fn two_level_hamiltonian<T: Real>(x: T, gap: T) -> DMatrix<T> {
    let h = gap * T::lit(0.5);
    DMatrix::from_row_slice(2, 2, &[-x, h, h, x])
}

/// Identity of one sweep line.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTag<T> {
    pub model: Model,
    pub length: usize,
    pub coupling_name: Field,
    pub coupling_value: T,
    pub field_name: Field,
}

/// Ordered records of one `(model, L, coupling)` sweep.
///
/// Observables are stored column-wise under the CSV column names of
/// [`col`]; absent optional observables are simply missing columns, and
/// failed points carry `NaN` plus a flag.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSeries<T> {
    pub tag: SeriesTag<T>,
    field: Vec<T>,
    columns: BTreeMap<String, Vec<T>>,
    flags: Vec<String>,
    pub meta: BTreeMap<String, String>,
}

impl<T: Real> SweepSeries<T> {
    /// Field values must be finite and strictly increasing.
    pub fn new(tag: SeriesTag<T>, field: Vec<T>) -> Result<Self> {
        if field.iter().any(|f| !f.is_finite()) {
            return Err(Error::DegenerateSeries("non-finite field value".into()));
        }
        if field.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateSeries(
                "field values must be strictly increasing".into(),
            ));
        }
        let n = field.len();
        Ok(Self {
            tag,
            field,
            columns: BTreeMap::new(),
            flags: vec![String::new(); n],
            meta: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }

    pub fn field(&self) -> &[T] {
        &self.field
    }

    pub fn set_column(&mut self, name: &str, values: Vec<T>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: values.len(),
            });
        }
        self.columns.insert(name.to_string(), values);
        Ok(())
    }

    pub fn with_column(mut self, name: &str, values: Vec<T>) -> Result<Self> {
        self.set_column(name, values)?;
        Ok(self)
    }

    pub fn column(&self, name: &str) -> Result<&[T]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn flags(&self) -> &[String] {
        &self.flags
    }

    /// Appends `flag` to row `i` (`|`-separated).
    pub fn add_flag(&mut self, i: usize, flag: &str) {
        let f = &mut self.flags[i];
        if !f.is_empty() {
            f.push('|');
        }
        f.push_str(flag);
    }

    pub fn set_flags(&mut self, flags: Vec<String>) -> Result<()> {
        if flags.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: flags.len(),
            });
        }
        self.flags = flags;
        Ok(())
    }

    /// Linear interpolation of `column` at field value `f`.
    pub fn interpolate(&self, column: &str, f: T) -> Result<T> {
        let y = self.column(column)?;
        interpolate(&self.field, y, f).ok_or_else(|| {
            Error::Domain(format!("field {f} outside the sweep range"))
        })
    }
}

/// Piecewise-linear interpolation on increasing `x`; `None` outside the range.
pub fn interpolate<T: Real>(x: &[T], y: &[T], at: T) -> Option<T> {
    let n = x.len();
    if n == 0 || at < x[0] || at > x[n - 1] {
        return None;
    }
    if n == 1 {
        return Some(y[0]);
    }
    let k = x.partition_point(|&v| v <= at).clamp(1, n - 1);
    if at == x[k] {
        return Some(y[k]);
    }
    let (x0, x1) = (x[k - 1], x[k]);
    let t = (at - x0) / (x1 - x0);
    Some(y[k - 1] + (y[k] - y[k - 1]) * t)
}

/// Three-point Lagrange derivative on a strictly monotone grid.
///
/// Interior points use the stencil `(k-1, k, k+1)`, which reduces to the
/// central difference on uniform grids; the end points use one-sided
/// second-order stencils. Exact for quadratics.
pub fn derivative<T: Real>(x: &[T], y: &[T]) -> Result<Vec<T>> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < 5 {
        return Err(Error::TooFewPoints { needed: 5, found: n });
    }
    let increasing = x[1] > x[0];
    let monotone = x
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    if !monotone {
        return Err(Error::DegenerateSeries(
            "grid must be strictly monotone".into(),
        ));
    }
    let two = T::lit(2.0);
    let lagrange = |i: usize, at: T| {
        let (x0, x1, x2) = (x[i], x[i + 1], x[i + 2]);
        let (y0, y1, y2) = (y[i], y[i + 1], y[i + 2]);
        y0 * (two * at - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (two * at - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (two * at - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    Ok((0..n)
        .map(|k| match k {
            0 => lagrange(0, x[0]),
            k if k == n - 1 => lagrange(n - 3, x[k]),
            k => lagrange(k - 1, x[k]),
        })
        .collect())
}

/// Name of the column produced by [`numerical_derivative`].
pub fn derivative_name(column: &str) -> String {
    format!("d_{column}")
}

/// Adds `d_<column>`, the field derivative of `column`, aligned to the grid.
pub fn numerical_derivative<T: Real>(series: &SweepSeries<T>, column: &str) -> Result<SweepSeries<T>> {
    let d = derivative(series.field(), series.column(column)?)?;
    let mut out = series.clone();
    out.set_column(&derivative_name(column), d)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

impl std::str::FromStr for Extremum {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Extremum::Max),
            "min" => Ok(Extremum::Min),
            other => Err(Error::Config(format!("normalization must be max or min, got `{other}`"))),
        }
    }
}

/// Divides `y` by its maximum (or minimum), ignoring `NaN` entries.
/// Returns the rescaled values and the normalizing value.
pub fn normalize<T: Real>(y: &[T], mode: Extremum) -> Result<(Vec<T>, T)> {
    let finite = y.iter().copied().filter(|v| v.is_finite());
    let ext = match mode {
        Extremum::Max => finite.reduce(|a, b| a.max(b)),
        Extremum::Min => finite.reduce(|a, b| a.min(b)),
    }
    .ok_or_else(|| Error::DegenerateSeries("no finite values to normalize".into()))?;
    if ext == T::zero() {
        return Err(Error::DegenerateSeries("extremum is zero".into()));
    }
    Ok((y.iter().map(|&v| v / ext).collect(), ext))
}

/// Replaces `column` by `column / extremum`; the extremum is recorded in
/// `meta["normalized.<column>"]`.
pub fn normalize_by_extremum<T: Real>(
    series: &SweepSeries<T>,
    column: &str,
    mode: Extremum,
) -> Result<SweepSeries<T>> {
    let (scaled, ext) = normalize(series.column(column)?, mode)?;
    let mut out = series.clone();
    out.set_column(column, scaled)?;
    out.meta.insert(format!("normalized.{column}"), format!("{:.17e}", ext.as_f64()));
    Ok(out)
}

/// Pseudo-critical point of one series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pseudocritical<T> {
    pub field: T,
    /// Gap interpolated at `field`.
    pub gap: T,
    /// Grid index of the steepest slope.
    pub index: usize,
    pub slope: T,
}

/// Vertex of the parabola through three points.
fn parabola_vertex<T: Real>(x: [T; 3], y: [T; 3]) -> Option<T> {
    let [x0, x1, x2] = x;
    let [y0, y1, y2] = y;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a == T::zero() || !a.is_finite() {
        return None;
    }
    // y = y0 + d01 (x - x0) + a (x - x0)(x - x1)
    Some((x0 + x1) * T::lit(0.5) - d01 / (T::lit(2.0) * a))
}

/// Field of steepest `column` slope, refined by a parabola through the
/// three nearest grid points of `|d column / d field|`, with the gap
/// interpolated there.
pub fn locate_pseudocritical<T: Real>(series: &SweepSeries<T>, column: &str) -> Result<Pseudocritical<T>> {
    let x = series.field();
    let d = derivative(x, series.column(column)?)?;
    let abs: Vec<T> = d.iter().map(|v| v.abs()).collect();
    let (k, _) = abs
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .fold(None::<(usize, T)>, |best, (i, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .ok_or_else(|| Error::DegenerateSeries("no finite slope".into()))?;
    if k == 0 || k == x.len() - 1 {
        return Err(Error::Inconclusive(format!(
            "steepest slope of `{column}` at the grid edge (field {}); widen the scan",
            x[k]
        )));
    }
    let vertex = parabola_vertex([x[k - 1], x[k], x[k + 1]], [abs[k - 1], abs[k], abs[k + 1]])
        .filter(|v| *v >= x[k - 1] && *v <= x[k + 1])
        .unwrap_or(x[k]);
    let gap = series.interpolate(col::GAP, vertex)?;
    Ok(Pseudocritical {
        field: vertex,
        gap,
        index: k,
        slope: d[k],
    })
}

/// One rescaled series entering a collapse.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledSeries<T> {
    pub label: String,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesResidual<T> {
    pub label: String,
    /// Points of this series inside the range of the others.
    pub included: usize,
    pub mean_square: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseResult<T> {
    pub x_name: String,
    pub y_name: String,
    /// Mean squared residual over the variance of the included `y`.
    pub q: T,
    pub included: usize,
    pub per_series: Vec<SeriesResidual<T>>,
}

/// Leave-one-series-out collapse cost.
///
/// Each point is compared with the piecewise-linear interpolation, at its
/// `x`, of the union of all other series (points sharing an `x` are
/// averaged); points outside the union's range are excluded. `Q` is the
/// mean squared residual over the population variance of the included
/// `y`. Non-finite points are skipped.
pub fn collapse_cost<T: Real>(
    series: &[ScaledSeries<T>],
    x_name: &str,
    y_name: &str,
) -> Result<CollapseResult<T>> {
    if series.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: series.len(),
        });
    }
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(Error::DimensionMismatch {
                expected: s.x.len(),
                found: s.y.len(),
            });
        }
    }
    let clean = |s: &ScaledSeries<T>| -> Vec<(T, T)> {
        s.x.iter()
            .zip(&s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (x, y))
            .collect()
    };
    let points: Vec<Vec<(T, T)>> = series.iter().map(clean).collect();

    let mut residuals: Vec<(usize, T, T)> = Vec::new(); // (series, y, r)
    for (i, own) in points.iter().enumerate() {
        let mut others: Vec<(T, T)> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        others.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite x"));
        let (ox, oy) = average_duplicates(&others);
        for &(x, y) in own {
            if let Some(master) = interpolate(&ox, &oy, x) {
                residuals.push((i, y, y - master));
            }
        }
    }
    if residuals.is_empty() {
        return Err(Error::NoOverlap);
    }
    let n = T::from_usize_lossy(residuals.len());
    let mean_y = residuals.iter().fold(T::zero(), |a, r| a + r.1) / n;
    let var = residuals
        .iter()
        .fold(T::zero(), |a, r| a + (r.1 - mean_y) * (r.1 - mean_y))
        / n;
    let mse = residuals.iter().fold(T::zero(), |a, r| a + r.2 * r.2) / n;
    let q = if mse == T::zero() {
        T::zero()
    } else if var == T::zero() {
        return Err(Error::DegenerateSeries(
            "included values have zero variance".into(),
        ));
    } else {
        mse / var
    };
    let per_series = series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mine: Vec<T> = residuals.iter().filter(|r| r.0 == i).map(|r| r.2).collect();
            let m = T::from_usize_lossy(mine.len().max(1));
            SeriesResidual {
                label: s.label.clone(),
                included: mine.len(),
                mean_square: mine.iter().fold(T::zero(), |a, &r| a + r * r) / m,
            }
        })
        .collect();
    Ok(CollapseResult {
        x_name: x_name.to_string(),
        y_name: y_name.to_string(),
        q,
        included: residuals.len(),
        per_series,
    })
}

fn average_duplicates<T: Real>(sorted: &[(T, T)]) -> (Vec<T>, Vec<T>) {
    let mut xs: Vec<T> = Vec::with_capacity(sorted.len());
    let mut ys: Vec<T> = Vec::with_capacity(sorted.len());
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i].0;
        let mut sum = T::zero();
        let mut count = 0usize;
        while i < sorted.len() && sorted[i].0 == x {
            sum += sorted[i].1;
            count += 1;
            i += 1;
        }
        xs.push(x);
        ys.push(sum / T::from_usize_lossy(count));
    }
    (xs, ys)
}

/// Scaling variable attached to a series' field axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingVariable {
    /// `2 m0 Bx L / Delta_L` with the analytic gap; coupling `Bz`.
    Kappa1,
    /// `(D - Dc_L) L / gap_L` with `Dc_L` located on the order parameter.
    Kappa2,
    /// `2 m0_st Bst L / gap_L` with the gap measured at `Bst = 0`; coupling `Jz`.
    Kappa3,
}

impl ScalingVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            ScalingVariable::Kappa1 => "kappa1",
            ScalingVariable::Kappa2 => "kappa2",
            ScalingVariable::Kappa3 => "kappa3",
        }
    }
}

impl std::str::FromStr for ScalingVariable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kappa1" => Ok(ScalingVariable::Kappa1),
            "kappa2" => Ok(ScalingVariable::Kappa2),
            "kappa3" => Ok(ScalingVariable::Kappa3),
            other => Err(Error::Config(format!("unknown scaling variable `{other}`"))),
        }
    }
}

/// The scaling variable evaluated on every grid point of `series`.
/// `order_column` locates `Dc_L` for [`ScalingVariable::Kappa2`].
pub fn scaling_values<T: Real>(
    series: &SweepSeries<T>,
    var: ScalingVariable,
    order_column: &str,
) -> Result<Vec<T>> {
    let tag = &series.tag;
    let l = tag.length;
    let expect = |field: Field, coupling: Field| -> Result<()> {
        if tag.field_name != field || tag.coupling_name != coupling {
            return Err(Error::Domain(format!(
                "{} needs a {field} sweep at fixed {coupling}, got {} at fixed {}",
                var.as_str(),
                tag.field_name,
                tag.coupling_name
            )));
        }
        Ok(())
    };
    match var {
        ScalingVariable::Kappa1 => {
            expect(Field::Bx, Field::Bz)?;
            series
                .field()
                .iter()
                .map(|&bx| kappa1(bx, tag.coupling_value, l))
                .collect()
        }
        ScalingVariable::Kappa2 => {
            if tag.field_name != Field::D {
                return Err(Error::Domain(format!(
                    "kappa2 needs a D sweep, got {}",
                    tag.field_name
                )));
            }
            let pc = locate_pseudocritical(series, order_column)?;
            series
                .field()
                .iter()
                .map(|&d| kappa2(d, pc.field, l, pc.gap))
                .collect()
        }
        ScalingVariable::Kappa3 => {
            expect(Field::BzStaggered, Field::Jz)?;
            let gap0 = series.interpolate(col::GAP, T::zero())?;
            series
                .field()
                .iter()
                .map(|&b| kappa3(b, tag.coupling_value, l, gap0))
                .collect()
        }
    }
}

/// Curvature comparison at one grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeReport<T> {
    /// Whether a spike was detected.
    pub fires: bool,
    /// `|y''(c)| / max(|y''(c-2)|, |y''(c+2)|, floor)`.
    pub curvature_ratio: T,
    pub slope_left: T,
    pub slope_right: T,
}

/// Curvature ratio above which a point counts as a spike.
pub const SPIKE_RATIO: f64 = 10.0;
/// Relative resolution of the sampled values entering the curvature floor.
pub const SPIKE_NOISE: f64 = 1e-9;

fn second_difference<T: Real>(x: &[T], y: &[T], k: usize) -> T {
    let left = (y[k] - y[k - 1]) / (x[k] - x[k - 1]);
    let right = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    T::lit(2.0) * (right - left) / (x[k + 1] - x[k - 1])
}

/// Spike test at grid index `c`: the curvature at `c` exceeds
/// [`SPIKE_RATIO`] times the curvature two points away on either side, and
/// the one-sided slopes at `c` have opposite signs (the derivative changes
/// sign across `c`). The curvature floor is `SPIKE_NOISE * max|y| / h^2`.
pub fn detect_spike<T: Real>(x: &[T], y: &[T], c: usize) -> Result<SpikeReport<T>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if c < 3 || c + 3 >= x.len() {
        return Err(Error::TooFewPoints {
            needed: 7,
            found: x.len(),
        });
    }
    let center = second_difference(x, y, c).abs();
    let h = (x[c + 1] - x[c - 1]) * T::lit(0.5);
    let scale = y.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let floor = T::lit(SPIKE_NOISE) * scale / (h * h);
    let reference = second_difference(x, y, c - 2)
        .abs()
        .max(second_difference(x, y, c + 2).abs())
        .max(floor);
    let ratio = center / reference;
    let slope_left = (y[c] - y[c - 1]) / (x[c] - x[c - 1]);
    let slope_right = (y[c + 1] - y[c]) / (x[c + 1] - x[c]);
    Ok(SpikeReport {
        fires: ratio > T::lit(SPIKE_RATIO) && slope_left * slope_right < T::zero(),
        curvature_ratio: ratio,
        slope_left,
        slope_right,
    })
}

/// Result of narrowing a bracket onto the largest change of a function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpProbe<T> {
    pub left: T,
    pub right: T,
    pub value_left: T,
    pub value_right: T,
}

impl<T: Real> JumpProbe<T> {
    pub fn jump(&self) -> T {
        (self.value_right - self.value_left).abs()
    }

    pub fn step(&self) -> T {
        self.right - self.left
    }
}

/// Bisects `[lo, hi]`, always keeping the half across which `f` changes
/// more, until the bracket is no wider than `delta` (at least
/// [`MIN_FIELD_STEP`]). A continuous `f` gives a jump of order
/// `slope * delta`; a discontinuity keeps its full size.
pub fn probe_jump<T, F>(mut f: F, lo: T, hi: T, delta: T) -> Result<JumpProbe<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    if !(hi > lo) {
        return Err(Error::Domain(format!("empty bracket [{lo}, {hi}]")));
    }
    let delta = delta.max(T::lit(MIN_FIELD_STEP));
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    while b - a > delta {
        let m = (a + b) * T::lit(0.5);
        if !(m > a && m < b) {
            break;
        }
        let fm = f(m)?;
        if (fm - fa).abs() >= (fb - fm).abs() {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(JumpProbe {
        left: a,
        right: b,
        value_left: fa,
        value_right: fb,
    })
}

/// Index of the grid interval `[k, k+1]` with the largest `|y[k+1] - y[k]|`.
pub fn steepest_interval<T: Real>(y: &[T]) -> Option<usize> {
    (0..y.len().saturating_sub(1))
        .filter(|&k| (y[k + 1] - y[k]).is_finite())
        .fold(None::<(usize, T)>, |best, k| {
            let d = (y[k + 1] - y[k]).abs();
            match best {
                Some((_, b)) if b >= d => best,
                _ => Some((k, d)),
            }
        })
        .map(|(k, _)| k)
}

/// Lowest eigenpair of the two-level Hamiltonian, by dense diagonalization.
pub fn two_level_direct<T: Real>(kappa: T) -> (T, T) {
    // gap normalized to one: x = kappa / 2
    let h = two_level_hamiltonian(kappa * T::lit(0.5), T::one());
    let eig = SymmetricEigen::new(h);
    let (lo, hi) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let v = eig.eigenvectors.column(lo);
    // <sz> in the basis (|+>, |->)
    let m = v[0] * v[0] - v[1] * v[1];
    (m, eig.eigenvalues[hi] - eig.eigenvalues[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tag(field: Field, coupling: Field, value: f64, l: usize) -> SeriesTag<f64> {
        SeriesTag {
            model: Model::IsingHalf,
            length: l,
            coupling_name: coupling,
            coupling_value: value,
            field_name: field,
        }
    }

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn magnetization_and_gap_formulas() {
        assert_eq!(m0_ising::<f64>(0.0).unwrap(), 1.0);
        assert!(m0_ising::<f64>(1.0 - 1e-12).unwrap() < 0.04);
        assert!((m0_ising::<f64>(0.5).unwrap() - 0.75f64.powf(0.125)).abs() < 1e-15);
        assert!((m0_ising::<f64>(0.5).unwrap() - 0.964679).abs() < 1e-6);
        assert!(matches!(m0_ising::<f64>(1.0), Err(Error::Domain(_))));
        assert!((gap_analytic_ising::<f64>(0.5, 8).unwrap() - 5.859375e-3).abs() < 1e-15);
        assert!((gap_analytic_ising::<f64>(0.5, 12).unwrap() - 3.6621e-4).abs() < 1e-8);
        assert!(gap_analytic_ising::<f64>(0.0, 8).is_err());
        assert!(gap_analytic_ising::<f64>(1.0, 8).is_err());
        for l in 2..30 {
            assert!(gap_analytic_ising::<f64>(0.7, l + 1).unwrap() < gap_analytic_ising::<f64>(0.7, l).unwrap());
        }
    }

    #[test]
    fn scaling_variables() {
        assert_eq!(kappa1(0.0, 0.5, 8).unwrap(), 0.0);
        let k = kappa1(1e-4, 0.5, 8).unwrap();
        let oracle = 2.0 * 0.75f64.powf(0.125) * 1e-4 * 8.0 / (1.5 / 256.0);
        assert!((k - oracle).abs() < 1e-14);
        assert!((k - 0.26343).abs() < 1e-5);
        assert_eq!(kappa1(-1e-4, 0.5, 8).unwrap(), -k);
        assert_eq!(kappa1(2e-4, 0.5, 8).unwrap(), 2.0 * k);

        assert_eq!(kappa2::<f64>(3.0, 3.0, 8, 0.3).unwrap(), 0.0);
        assert!((kappa2::<f64>(3.1, 3.0, 8, 0.4).unwrap() - 0.1 * 8.0 / 0.4).abs() < 1e-12);
        assert!(kappa2::<f64>(3.1, 3.0, 8, 0.0).is_err());

        assert!((m0_staggered::<f64>(3.8).unwrap() - 0.987271).abs() < 1e-6);
        assert_eq!(kappa3(0.0, 3.8, 8, 0.1).unwrap(), 0.0);
        assert_eq!(
            kappa3(-0.01, 3.0, 8, 0.1).unwrap(),
            -kappa3(0.01, 3.0, 8, 0.1).unwrap()
        );
        assert!(kappa3(0.01, 1.0, 8, 0.1).is_err());
    }

    #[test]
    fn two_level_curves() {
        assert_eq!(two_level_master::<f64>(0.0), (0.0, 1.0));
        let (m, g) = two_level_master::<f64>(1.0);
        assert!((m - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((g - 2f64.sqrt()).abs() < 1e-15);
        assert!(two_level_master::<f64>(1e8).0 > 1.0 - 1e-15);
        for k in [-7.0, -1.0, -0.3, 0.0, 0.5, 1.0, 4.0] {
            let (m, g) = two_level_master::<f64>(k);
            let (md, gd) = two_level_direct::<f64>(k);
            assert!((m - md).abs() < 1e-12, "kappa {k}");
            assert!((g - gd).abs() < 1e-12, "kappa {k}");
        }
    }

    #[test]
    fn derivative_examples() {
        let x = grid(-1.0, 2.0, 9);
        let lin: Vec<f64> = x.iter().map(|f| 3.0 * f).collect();
        assert!(derivative(&x, &lin).unwrap().iter().all(|d| (d - 3.0).abs() < 1e-12));
        let quad: Vec<f64> = x.iter().map(|f| f * f).collect();
        for (d, f) in derivative(&x, &quad).unwrap().iter().zip(&x) {
            assert!((d - 2.0 * f).abs() < 1e-12);
        }
        // non-uniform grid, still exact for quadratics
        let xn = [0.0, 0.1, 0.3, 0.35, 0.9, 1.0];
        let qn: Vec<f64> = xn.iter().map(|f| 1.0 - 2.0 * f + 5.0 * f * f).collect();
        for (d, f) in derivative(&xn, &qn).unwrap().iter().zip(&xn) {
            assert!((d - (-2.0 + 10.0 * f)).abs() < 1e-11);
        }
        assert!(matches!(
            derivative(&x[..4], &lin[..4]),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn derivative_of_even_function_is_odd() {
        let x = grid(-1.0, 1.0, 41);
        let y: Vec<f64> = x.iter().map(|f| (-(f * f) * 3.0).exp() + f.powi(4)).collect();
        let d = derivative(&x, &y).unwrap();
        for k in 0..41 {
            assert!((d[k] + d[40 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_examples() {
        let (v, e) = normalize(&[2.5, 2.5, 2.5], Extremum::Max).unwrap();
        assert_eq!(e, 2.5);
        assert!(v.iter().all(|&x| x == 1.0));
        let (v, _) = normalize(&[1.0, 2.0, 4.0], Extremum::Max).unwrap();
        assert_eq!(v, vec![0.25, 0.5, 1.0]);
        let (v, e) = normalize(&[0.5, -3.0, 1.0], Extremum::Min).unwrap();
        assert_eq!(e, -3.0);
        assert_eq!(v[1], 1.0);
        assert!(matches!(
            normalize(&[0.0, -1.0], Extremum::Max),
            Err(Error::DegenerateSeries(_))
        ));

        let s = SweepSeries::new(tag(Field::Bx, Field::Bz, 0.5, 8), vec![0.0, 1.0, 2.0])
            .unwrap()
            .with_column(col::ENTANGLEMENT, vec![1.0, 2.0, 4.0])
            .unwrap();
        let n = normalize_by_extremum(&s, col::ENTANGLEMENT, Extremum::Max).unwrap();
        assert_eq!(n.column(col::ENTANGLEMENT).unwrap(), &[0.25, 0.5, 1.0]);
        assert!(n.meta.contains_key("normalized.entanglement"));
    }

    #[test]
    fn series_invariants() {
        let t = tag(Field::Bx, Field::Bz, 0.5, 8);
        assert!(SweepSeries::new(t.clone(), vec![0.0, 0.0]).is_err());
        assert!(SweepSeries::new(t.clone(), vec![1.0, 0.0]).is_err());
        let s = SweepSeries::new(t, vec![0.0, 1.0]).unwrap();
        assert!(matches!(s.column("gap"), Err(Error::MissingColumn(_))));
        assert!(s.clone().with_column("gap", vec![1.0]).is_err());
    }

    fn tanh_series(f0: f64, w: f64, n: usize) -> SweepSeries<f64> {
        let x = grid(-1.0, 1.0, n);
        let y = x.iter().map(|f| ((f - f0) / w).tanh()).collect();
        let gap = x.iter().map(|f| 0.1 + (f - f0).abs()).collect();
        SweepSeries::new(tag(Field::D, Field::Jz, 3.8, 8), x)
            .unwrap()
            .with_column(col::MAGNETIZATION, y)
            .unwrap()
            .with_column(col::GAP, gap)
            .unwrap()
    }

    #[test]
    fn locates_tanh_center() {
        for (f0, w) in [(0.123, 0.2), (-0.31, 0.15), (0.0, 0.3), (0.4417, 0.25)] {
            let s = tanh_series(f0, w, 41);
            let h = 2.0 / 40.0;
            let pc = locate_pseudocritical(&s, col::MAGNETIZATION).unwrap();
            assert!((pc.field - f0).abs() < h / 10.0, "f0 {f0}: got {}", pc.field);
            assert!((pc.gap - (0.1 + (pc.field - f0).abs())).abs() < h);
        }
    }

    #[test]
    fn edge_extremum_is_inconclusive() {
        let s = tanh_series(1.2, 0.2, 41);
        assert!(matches!(
            locate_pseudocritical(&s, col::MAGNETIZATION),
            Err(Error::Inconclusive(_))
        ));
    }

    #[test]
    fn collapse_examples() {
        let x = grid(0.0, 1.0, 11);
        let a = ScaledSeries { label: "a".into(), x: x.clone(), y: x.clone() };
        let r = collapse_cost(&[a.clone(), a.clone()], "k", "y").unwrap();
        assert_eq!(r.q, 0.0);
        assert_eq!(r.included, 22);

        let b = ScaledSeries {
            label: "b".into(),
            x: x.clone(),
            y: x.iter().map(|k| k + 1.0).collect(),
        };
        let r = collapse_cost(&[a.clone(), b], "k", "y").unwrap();
        // residuals are all +-1; y = {k} U {k + 1} on the 11-point grid
        let ys: Vec<f64> = x.iter().copied().chain(x.iter().map(|k| k + 1.0)).collect();
        let mean = ys.iter().sum::<f64>() / 22.0;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 22.0;
        assert!((r.q - 1.0 / var).abs() < 1e-12);
        assert!((r.q - 20.0 / 7.0).abs() < 1e-12);

        let far = ScaledSeries { label: "c".into(), x: grid(5.0, 6.0, 4), y: vec![0.0; 4] };
        assert!(matches!(collapse_cost(&[a, far], "k", "y"), Err(Error::NoOverlap)));
    }

    #[test]
    fn collapse_excludes_points_outside_overlap() {
        let a = ScaledSeries { label: "a".into(), x: grid(0.0, 2.0, 21), y: grid(0.0, 2.0, 21) };
        let b = ScaledSeries { label: "b".into(), x: grid(1.0, 3.0, 21), y: grid(1.0, 3.0, 21) };
        let r = collapse_cost(&[a, b], "k", "y").unwrap();
        assert_eq!(r.q, 0.0);
        assert_eq!(r.per_series[0].included, 11);
        assert_eq!(r.per_series[1].included, 11);
    }

    #[test]
    fn spike_detection() {
        let x = grid(-1.0, 1.0, 41);
        let cusp: Vec<f64> = x.iter().map(|f| 1.0 - f.abs()).collect();
        assert!(detect_spike(&x, &cusp, 20).unwrap().fires);
        let smooth: Vec<f64> = x.iter().map(|f| 1.0 / (1.0 + f * f)).collect();
        let r = detect_spike(&x, &smooth, 20).unwrap();
        assert!(!r.fires, "ratio {}", r.curvature_ratio);
        let mono: Vec<f64> = x.iter().map(|f| f.tanh()).collect();
        assert!(!detect_spike(&x, &mono, 20).unwrap().fires);
    }

    #[test]
    fn jump_probe() {
        let step = |f: f64| Ok(if f < 0.3 { 0.0 } else { 0.2 });
        let p = probe_jump(step, 0.0, 1.0, 1e-6).unwrap();
        assert!(p.step() <= 1e-6);
        assert!((p.jump() - 0.2).abs() < 1e-15);
        assert!(p.left < 0.3 && p.right >= 0.3);
        let smooth = |f: f64| Ok((5.0 * f).tanh());
        let p = probe_jump(smooth, -1.0, 1.0, 1e-6).unwrap();
        assert!(p.jump() < 1e-5);
        assert_eq!(steepest_interval(&[0.0, 0.1, 0.5, 0.55]), Some(1));
    }

    #[test]
    fn scaling_values_need_matching_tags() {
        let s = tanh_series(0.1, 0.2, 21);
        assert!(scaling_values(&s, ScalingVariable::Kappa1, col::MAGNETIZATION).is_err());
        let k2 = scaling_values(&s, ScalingVariable::Kappa2, col::MAGNETIZATION).unwrap();
        let pc = locate_pseudocritical(&s, col::MAGNETIZATION).unwrap();
        assert!((k2[0] - (-1.0 - pc.field) * 8.0 / pc.gap).abs() < 1e-12);
    }

    #[test]
    fn single_precision_scaling() {
        let k = kappa1(1e-4f32, 0.5, 8).unwrap();
        assert!((k - 0.26343).abs() < 1e-4);
        let x: Vec<f32> = (0..9).map(|i| i as f32 * 0.25).collect();
        let y: Vec<f32> = x.iter().map(|f| f * f).collect();
        let d = derivative(&x, &y).unwrap();
        assert!((d[4] - 2.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn derivative_and_normalization_commute_with_reversal(
            ys in proptest::collection::vec(-5.0f64..5.0, 6..30),
            shift in 0.5f64..2.0,
        ) {
            let n = ys.len();
            let x: Vec<f64> = (0..n).map(|i| (i as f64).powf(1.3) * 0.1).collect();
            let y: Vec<f64> = ys.iter().map(|v| v + shift).collect();
            let d = derivative(&x, &y).unwrap();
            let xr: Vec<f64> = x.iter().rev().copied().collect();
            let yr: Vec<f64> = y.iter().rev().copied().collect();
            let dr = derivative(&xr, &yr).unwrap();
            for k in 0..n {
                prop_assert!((d[k] - dr[n - 1 - k]).abs() <= 1e-12 * (1.0 + d[k].abs()));
            }
            let (a, _) = normalize(&y, Extremum::Max).unwrap();
            let (b, _) = normalize(&yr, Extremum::Max).unwrap();
            for k in 0..n {
                prop_assert!((a[k] - b[n - 1 - k]).abs() <= 1e-12);
            }
        }

        #[test]
        fn collapse_cost_is_nonnegative_and_zero_on_copies(
            ys in proptest::collection::vec(-5.0f64..5.0, 3..20),
        ) {
            let n = ys.len();
            let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let a = ScaledSeries { label: "a".into(), x: x.clone(), y: ys.clone() };
            let b = ScaledSeries { label: "b".into(), x: x.iter().map(|v| v + 0.5).collect(), y: ys };
            if let Ok(r) = collapse_cost(&[a.clone(), b], "k", "y") {
                prop_assert!(r.q >= 0.0);
            }
            let same = collapse_cost(&[a.clone(), a], "k", "y");
            if let Ok(r) = same {
                prop_assert_eq!(r.q, 0.0);
            }
        }

        #[test]
        fn kappa1_is_odd_and_linear(bx in -1e-2f64..1e-2, bz in 0.05f64..0.95, l in 2usize..40) {
            let k = kappa1(bx, bz, l).unwrap();
            prop_assert_eq!(kappa1(-bx, bz, l).unwrap(), -k);
            prop_assert_eq!(kappa1(2.0 * bx, bz, l).unwrap(), 2.0 * k);
        }
    }
}
