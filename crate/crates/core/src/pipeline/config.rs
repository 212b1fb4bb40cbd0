//! Sweep configuration files.
//!
//! A file holds one or more `[[sweep]]` tables. Every physical parameter of
//! the model is spelled out in `[sweep.spec]`; nothing is defaulted.
//!
//! ```toml
//! [[sweep]]
//! name = "ising-bx"
//! model = "ising_half"
//! lengths = [10, 12]
//! field = "Bx"
//! coupling = "Bz"
//! coupling_values = [0.5]
//! solver = "ed_lanczos"
//! tol = 1e-10
//! order_parameter = "x"
//! rdm_elements = true
//! output = "out/ising-bx"
//! grid = { start = -5.0, stop = 5.0, count = 41, units = "kappa1" }
//!
//! [sweep.spec]
//! J = 1.0
//! Bz = 0.5
//! Bx = 0.0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fss::{Extremum, ScalingVariable};
use crate::hilbert::{Field, Model, SpinChainSpec};
use crate::mpsdmrg::DmrgConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    EdDense,
    EdLanczos,
    Dmrg,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::EdDense => "ed_dense",
            Solver::EdLanczos => "ed_lanczos",
            Solver::Dmrg => "dmrg",
        }
    }
}

/// What goes into the `magnetization` column (always per site).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderParameter {
    /// `sum_i <S^x_i> / L`.
    X,
    /// `sum_i <S^z_i> / L`.
    Z,
    /// `sum_i (-1)^i <S^z_i> / L`.
    ZStaggered,
    /// `sqrt(<(sum_i (-1)^i S^z_i)^2>) / L`.
    ZStaggeredRms,
}

impl OrderParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderParameter::X => "x",
            OrderParameter::Z => "z",
            OrderParameter::ZStaggered => "z_staggered",
            OrderParameter::ZStaggeredRms => "z_staggered_rms",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridUnits {
    /// Values are field values.
    #[default]
    Field,
    /// Values are `kappa1`, converted per length and `Bz` coupling.
    Kappa1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Grid {
    Range {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        units: GridUnits,
    },
    Values {
        values: Vec<f64>,
        #[serde(default)]
        units: GridUnits,
    },
}

impl Grid {
    pub fn units(&self) -> GridUnits {
        match self {
            Grid::Range { units, .. } | Grid::Values { units, .. } => *units,
        }
    }

    /// Grid values in the configured units, in increasing order.
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match self {
            Grid::Range { start, stop, count, .. } => {
                if *count < 2 {
                    return Err(Error::Config(format!("grid count must be >= 2, got {count}")));
                }
                if !(start.is_finite() && stop.is_finite()) || start >= stop {
                    return Err(Error::Config(format!("grid needs finite start < stop, got {start}..{stop}")));
                }
                let n = *count - 1;
                (0..=n)
                    .map(|k| if k == n { *stop } else { start + (stop - start) * k as f64 / n as f64 })
                    .collect()
            }
            Grid::Values { values, .. } => values.clone(),
        };
        if pts.len() < 2 {
            return Err(Error::Config("a grid needs at least two points".into()));
        }
        if pts.iter().any(|v| !v.is_finite()) || pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid values must be finite and strictly increasing".into()));
        }
        Ok(pts)
    }
}

/// Rescaled-data request run after the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseRequest {
    pub x: ScalingVariable,
    pub y: String,
    #[serde(default)]
    pub derivative: bool,
    #[serde(default)]
    pub normalize: Option<Extremum>,
    /// Column whose steepest slope defines the pseudo-critical point
    /// (`kappa2` only); defaults to `y`.
    #[serde(default)]
    pub order_column: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub model: Model,
    /// Every parameter of the model by name (`J`, `Bz`, `Bx` or `Jz`, `D`,
    /// `Bz_uniform`, `Bz_st`).
    pub spec: BTreeMap<Field, f64>,
    pub lengths: Vec<usize>,
    pub field: Field,
    pub coupling: Field,
    pub coupling_values: Vec<f64>,
    pub grid: Grid,
    pub solver: Solver,
    /// Residual tolerance of the ED solvers.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub dmrg: Option<DmrgConfig>,
    pub order_parameter: OrderParameter,
    pub rdm_elements: bool,
    /// Output path without extension; `.csv` and `.meta` are appended.
    pub output: PathBuf,
    #[serde(default)]
    pub collapse: Vec<CollapseRequest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sweep: Vec<SweepConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.sweep.is_empty() {
            return Err(Error::Config("no [[sweep]] tables".into()));
        }
        for s in &cfg.sweep {
            s.validate()?;
        }
        Ok(cfg)
    }

    /// Reads and validates `path`; relative output paths resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        if let Some(dir) = path.parent() {
            for s in &mut cfg.sweep {
                if s.output.is_relative() {
                    s.output = dir.join(&s.output);
                }
            }
        }
        Ok(cfg)
    }
}

impl SweepConfig {
    /// Chain parameters at one `(L, coupling value)` with the swept field at zero.
    pub fn template(&self, length: usize, coupling_value: f64) -> Result<SpinChainSpec<f64>> {
        let base = match self.model {
            Model::IsingHalf => SpinChainSpec::ising_half(length, 0.0, 0.0).with(Field::J, 0.0),
            Model::XxzSpin1 => SpinChainSpec::xxz_spin1(length, 0.0, 0.0),
        };
        let mut spec = base;
        for (&f, &v) in &self.spec {
            spec = spec.with(f, v);
        }
        Ok(spec.with(self.coupling, coupling_value))
    }

    /// CSV path of the run: `output`, with `.csv` appended when it has no
    /// extension.
    pub fn csv_path(&self) -> PathBuf {
        if self.output.extension().is_some() {
            self.output.clone()
        } else {
            self.output.with_extension("csv")
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tol.unwrap_or(crate::eigensolve::DEFAULT_TOL)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("sweep `{}`: {m}", self.name)));
        for f in Field::ALL {
            let given = self.spec.contains_key(&f);
            if f.applies_to(self.model) && !given {
                return bad(format!("spec must set `{f}` explicitly"));
            }
            if !f.applies_to(self.model) && given {
                return bad(format!("`{f}` does not enter the {} model", self.model));
            }
        }
        if self.lengths.is_empty() || self.coupling_values.is_empty() {
            return bad("lengths and coupling_values must be non-empty".into());
        }
        if !self.field.applies_to(self.model) || !self.coupling.applies_to(self.model) {
            return bad(format!("field `{}` / coupling `{}` do not belong to the model", self.field, self.coupling));
        }
        if self.field == self.coupling {
            return bad("field and coupling must differ".into());
        }
        if self.grid.units() == GridUnits::Kappa1
            && !(self.model == Model::IsingHalf && self.field == Field::Bx && self.coupling == Field::Bz)
        {
            return bad("kappa1 grid units need an ising_half Bx sweep at fixed Bz".into());
        }
        self.grid.points()?;
        match (self.solver, &self.dmrg) {
            (Solver::Dmrg, None) => return bad("solver `dmrg` needs a [sweep.dmrg] table".into()),
            (Solver::Dmrg, Some(d)) => d.validate()?,
            (_, Some(_)) => return bad("[sweep.dmrg] given for an ED solver".into()),
            _ => {}
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return bad(format!("tol must be > 0, got {t}"));
            }
        }
        if self.order_parameter == OrderParameter::X && self.model != Model::IsingHalf {
            // S^x is defined for spin 1 as well, but it is not an order parameter here
            return bad("order_parameter `x` applies to ising_half".into());
        }
        for &l in &self.lengths {
            for &c in &self.coupling_values {
                self.template(l, c)?.validate()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ISING: &str = r#"
[[sweep]]
name = "ising"
model = "ising_half"
lengths = [6, 8]
field = "Bx"
coupling = "Bz"
coupling_values = [0.5, 0.6]
solver = "ed_dense"
order_parameter = "x"
rdm_elements = true
output = "out/ising"
grid = { start = -1.0, stop = 1.0, count = 5, units = "kappa1" }

[sweep.spec]
J = 1.0
Bz = 0.5
Bx = 0.0
"#;

    #[test]
    fn parses_example() {
        let cfg = ConfigFile::parse(ISING).unwrap();
        let s = &cfg.sweep[0];
        assert_eq!(s.grid.points().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(s.grid.units(), GridUnits::Kappa1);
        let spec = s.template(8, 0.6).unwrap();
        assert_eq!((spec.length, spec.bz, spec.j), (8, 0.6, 1.0));
    }

    #[test]
    fn rejects_hidden_defaults_and_foreign_fields() {
        let missing = ISING.replace("Bx = 0.0\n", "");
        assert!(matches!(ConfigFile::parse(&missing), Err(Error::Config(m)) if m.contains("`Bx`")));
        let foreign = format!("{ISING}D = 1.0\n");
        assert!(ConfigFile::parse(&foreign).is_err());
        let unknown = ISING.replace("rdm_elements = true", "rdm_elements = true\ncolour = 3");
        assert!(ConfigFile::parse(&unknown).is_err());
    }

    #[test]
    fn grid_validation() {
        let bad = ISING.replace("count = 5", "count = 1");
        assert!(ConfigFile::parse(&bad).is_err());
        let g = Grid::Values {
            values: vec![0.0, 2.0, 1.0],
            units: GridUnits::Field,
        };
        assert!(g.points().is_err());
        let two = Grid::Range {
            start: 0.0,
            stop: 1.0,
            count: 2,
            units: GridUnits::Field,
        };
        assert_eq!(two.points().unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn dmrg_table_is_required_for_dmrg() {
        let text = ISING.replace("\"ed_dense\"", "\"dmrg\"");
        assert!(ConfigFile::parse(&text).is_err());
        let text = format!("{text}\n[sweep.dmrg]\nchi_max = 16\n");
        let cfg = ConfigFile::parse(&text).unwrap();
        assert_eq!(cfg.sweep[0].dmrg.as_ref().unwrap().chi_max, 16);
    }
}
