//! Sweep execution: one ground/excited-state solve per field point.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::eigensolve::{lowest_two, Method, DENSE_MAX_DIM};
use crate::entanglement::{concurrence, negativity};
use crate::error::{Error, Result};
use crate::fss::{col, gap_analytic_ising, m0_ising, SeriesTag, SweepSeries};
use crate::hilbert::{build_hamiltonian, SpinChainSpec, MAX_SPARSE_DIM};
use crate::measure::{central_pair, magnetization, magnetization_rms, partial_trace, spin_operator, site_weight, Axis, DensityMatrix};
use crate::mpsdmrg::{dmrg_lowest_two, DmrgConfig, MatrixProductOperator, MatrixProductState};
use crate::scalar::Cx;

use super::config::{GridUnits, OrderParameter, Solver, SweepConfig};

type RdmPair = (f64, Cx<f64>);
type StatePair = (MatrixProductState<f64>, MatrixProductState<f64>);

/// Environment variable overriding the worker-thread count.
pub const THREADS_ENV: &str = "SPINSCALE_THREADS";

/// Largest fraction of failed points a sweep tolerates.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

/// Observables at one field point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    /// Per-site order parameter.
    pub magnetization: f64,
    /// Concurrence (spin 1/2) or negativity (spin 1) of the central pair.
    pub entanglement: f64,
    /// `<0 0|rho|0 0>` and `<0 0|rho|0 1>` of the central pair.
    pub rdm: Option<RdmPair>,
    pub flags: Vec<&'static str>,
}

/// Thread count from [`THREADS_ENV`], else rayon's default.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

fn central_observables(
    rho: &DensityMatrix<f64>,
    local_dim: usize,
    want_rdm: bool,
) -> Result<(f64, Option<RdmPair>)> {
    let ent = if local_dim == 2 { concurrence(rho)? } else { negativity(rho)? };
    let rdm = want_rdm.then(|| (rho.matrix()[(0, 0)].re, rho.matrix()[(0, 1)]));
    Ok((ent, rdm))
}

/// Exact-diagonalization solve of one point.
pub fn solve_ed(
    spec: &SpinChainSpec<f64>,
    method: Method,
    tol: f64,
    order: OrderParameter,
    want_rdm: bool,
) -> Result<PointResult> {
    let h = build_hamiltonian(spec)?;
    let res = lowest_two(&h, method, tol)?;
    let l = spec.length as f64;
    let m = match order {
        OrderParameter::X => magnetization(&res.v0, spec, Axis::X, false)?,
        OrderParameter::Z => magnetization(&res.v0, spec, Axis::Z, false)?,
        OrderParameter::ZStaggered => magnetization(&res.v0, spec, Axis::Z, true)?,
        OrderParameter::ZStaggeredRms => magnetization_rms(&res.v0, spec, Axis::Z, true)?,
    } / l;
    let (i, j) = central_pair(spec.length);
    let rho = partial_trace(&res.v0, &[i, j], spec)?;
    let (entanglement, rdm) = central_observables(&rho, spec.local_dim(), want_rdm)?;
    let mut flags = Vec::new();
    if res.degenerate {
        flags.push("degenerate");
    }
    Ok(PointResult {
        e0: res.e0,
        e1: res.e1,
        gap: res.gap,
        magnetization: m,
        entanglement,
        rdm,
        flags,
    })
}

/// DMRG solve of one point; returns the ground and excited states for warm starts.
pub fn solve_dmrg(
    spec: &SpinChainSpec<f64>,
    cfg: &DmrgConfig,
    order: OrderParameter,
    want_rdm: bool,
    warm: Option<StatePair>,
) -> Result<(PointResult, StatePair)> {
    let pair = dmrg_lowest_two(spec, cfg, warm)?;
    let psi = &pair.ground.state;
    let l = spec.length;
    let (axis, staggered) = match order {
        OrderParameter::X => (Axis::X, false),
        OrderParameter::Z => (Axis::Z, false),
        OrderParameter::ZStaggered | OrderParameter::ZStaggeredRms => (Axis::Z, true),
    };
    let op = spin_operator::<f64>(spec.model, axis);
    let weights: Vec<f64> = (0..l).map(|i| site_weight(i, staggered)).collect();
    let m = if order == OrderParameter::ZStaggeredRms {
        MatrixProductOperator::squared_site_sum(&op, &weights)
            .expectation(psi)
            .max(0.0)
            .sqrt()
    } else {
        let mut m = 0.0;
        for (i, w) in weights.iter().enumerate() {
            m += w * psi.local_expectation(i, &op)?;
        }
        m
    } / l as f64;
    let rho = psi.rdm(central_pair(l))?;
    let (entanglement, rdm) = central_observables(&rho, spec.local_dim(), want_rdm)?;
    let mut flags = Vec::new();
    if !(pair.ground.report.converged && pair.excited.report.converged) {
        flags.push("not_converged");
    }
    let result = PointResult {
        e0: pair.ground.energy,
        e1: pair.excited.energy,
        gap: pair.gap,
        magnetization: m,
        entanglement,
        rdm,
        flags,
    };
    Ok((result, (pair.ground.state, pair.excited.state)))
}

/// Field values of the grid for one `(L, coupling)` series.
pub fn field_values(cfg: &SweepConfig, length: usize, coupling_value: f64) -> Result<Vec<f64>> {
    let pts = cfg.grid.points()?;
    match cfg.grid.units() {
        GridUnits::Field => Ok(pts),
        GridUnits::Kappa1 => {
            // kappa1 = 2 m0 Bx L / Delta_L
            let scale = gap_analytic_ising(coupling_value, length)? / (2.0 * m0_ising(coupling_value)? * length as f64);
            Ok(pts.into_iter().map(|k| k * scale).collect())
        }
    }
}

/// Refuses runs whose solver cannot hold the Hilbert space.
pub fn check_capacity(cfg: &SweepConfig) -> Result<()> {
    for &l in &cfg.lengths {
        let spec = cfg.template(l, cfg.coupling_values[0])?;
        let d = spec.local_dim();
        let needed = || format!("{d}^{l}");
        let dim = spec.hilbert_dim();
        match cfg.solver {
            Solver::EdDense => {
                if dim.is_none_or(|n| n > DENSE_MAX_DIM) {
                    return Err(Error::capacity("dense eigensolver", needed(), DENSE_MAX_DIM));
                }
            }
            Solver::EdLanczos => {
                if dim.is_none_or(|n| n > MAX_SPARSE_DIM) {
                    return Err(Error::capacity("sparse Hamiltonian", needed(), MAX_SPARSE_DIM));
                }
            }
            Solver::Dmrg => {}
        }
    }
    Ok(())
}

fn failure_flag(e: &Error) -> &'static str {
    match e {
        Error::NoConvergence { .. } => "failed_no_convergence",
        Error::OrthogonalityLoss { .. } => "failed_orthogonality",
        _ => "failed",
    }
}

/// Metadata shared by every series of a run.
pub fn run_metadata(cfg: &SweepConfig, threads: usize) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        meta.insert(k.to_owned(), v);
    };
    put("name", cfg.name.clone());
    put("model", cfg.model.as_str().to_owned());
    put("code_version", env!("CARGO_PKG_VERSION").to_owned());
    put("solver", cfg.solver.as_str().to_owned());
    put("threads", threads.to_string());
    put("order_parameter", cfg.order_parameter.as_str().to_owned());
    put(
        "entanglement",
        if cfg.model.local_dim() == 2 { "concurrence" } else { "negativity" }.to_owned(),
    );
    put("rdm_elements", cfg.rdm_elements.to_string());
    put("field", cfg.field.to_string());
    put("coupling", cfg.coupling.to_string());
    put(
        "grid_units",
        match cfg.grid.units() {
            GridUnits::Field => "field",
            GridUnits::Kappa1 => "kappa1",
        }
        .to_owned(),
    );
    for (f, v) in &cfg.spec {
        put(&format!("spec.{f}"), format!("{v:?}"));
    }
    match (&cfg.dmrg, cfg.solver) {
        (Some(d), Solver::Dmrg) => {
            put("dmrg.chi_max", d.chi_max.to_string());
            put("dmrg.svd_cutoff", format!("{:?}", d.svd_cutoff));
            put("dmrg.max_sweeps", d.max_sweeps.to_string());
            put("dmrg.energy_tol", format!("{:?}", d.energy_tol));
            put("dmrg.lanczos_tol", format!("{:?}", d.lanczos_tol));
            put("dmrg.seed", d.seed.to_string());
            put("dmrg.warm_start", "previous_field_point".to_owned());
        }
        _ => put("tol", format!("{:?}", cfg.tolerance())),
    }
    meta
}

fn solve_series(
    cfg: &SweepConfig,
    template: &SpinChainSpec<f64>,
    fields: &[f64],
    pool: &rayon::ThreadPool,
) -> Vec<Result<PointResult>> {
    let at = |f: f64| template.with(cfg.field, f);
    match cfg.solver {
        Solver::EdDense | Solver::EdLanczos => {
            let method = if cfg.solver == Solver::EdDense { Method::Dense } else { Method::Lanczos };
            pool.install(|| {
                fields
                    .par_iter()
                    .map(|&f| solve_ed(&at(f), method, cfg.tolerance(), cfg.order_parameter, cfg.rdm_elements))
                    .collect()
            })
        }
        Solver::Dmrg => {
            let dmrg = cfg.dmrg.clone().unwrap_or_default();
            // serial along the series, each point warm-started from the previous one
            let mut warm = None;
            fields
                .iter()
                .map(|&f| {
                    let out = solve_dmrg(&at(f), &dmrg, cfg.order_parameter, cfg.rdm_elements, warm.take());
                    out.map(|(point, states)| {
                        warm = Some(states);
                        point
                    })
                })
                .collect()
        }
    }
}

/// Runs every `(coupling value, L)` series of `cfg`, in configuration order.
///
/// A point whose solve fails is kept with `NaN` observables and a
/// `failed*` flag; more than [`MAX_FAILED_FRACTION`] failed points abort
/// the run.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepSeries<f64>>> {
    cfg.validate()?;
    check_capacity(cfg)?;
    let threads = thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let meta = run_metadata(cfg, threads);
    let mut out = Vec::new();
    let (mut failed, mut total) = (0usize, 0usize);
    let mut first_failure = None;
    for &c in &cfg.coupling_values {
        for &l in &cfg.lengths {
            let template = cfg.template(l, c)?;
            let fields = field_values(cfg, l, c)?;
            let results = solve_series(cfg, &template, &fields, &pool);
            let tag = SeriesTag {
                model: cfg.model,
                length: l,
                coupling_name: cfg.coupling,
                coupling_value: c,
                field_name: cfg.field,
            };
            let mut series = SweepSeries::new(tag, fields)?;
            let n = results.len();
            let mut columns: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            let names = [col::E0, col::E1, col::GAP, col::MAGNETIZATION, col::ENTANGLEMENT];
            let rdm_names = [col::RDM_11, col::RDM_12_RE, col::RDM_12_IM];
            let optional: &[&str] = if cfg.rdm_elements { &rdm_names } else { &[] };
            for name in names.iter().chain(optional) {
                columns.insert(name, vec![f64::NAN; n]);
            }
            for (k, r) in results.into_iter().enumerate() {
                total += 1;
                match r {
                    Ok(p) => {
                        let vals = [p.e0, p.e1, p.gap, p.magnetization, p.entanglement];
                        for (name, v) in names.iter().zip(vals) {
                            columns.get_mut(name).expect("inserted")[k] = v;
                        }
                        if let Some((r11, r12)) = p.rdm {
                            for (name, v) in rdm_names.iter().zip([r11, r12.re, r12.im]) {
                                columns.get_mut(name).expect("inserted")[k] = v;
                            }
                        }
                        for f in p.flags {
                            series.add_flag(k, f);
                        }
                    }
                    Err(e) => {
                        failed += 1;
                        series.add_flag(k, failure_flag(&e));
                        first_failure.get_or_insert(e);
                    }
                }
            }
            for (name, values) in columns {
                series.set_column(name, values)?;
            }
            series.meta = meta.clone();
            out.push(series);
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * total as f64 {
        return Err(match first_failure {
            Some(e @ (Error::Capacity { .. } | Error::InvalidSpec(_) | Error::Config(_))) => e,
            _ => Error::SweepAborted { failed, total },
        });
    }
    Ok(out)
}
