//! Finite-system two-site DMRG.

use nalgebra::{DMatrix, DMatrixView, Dyn, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::eigensolve::{lanczos_best_effort, LanczosOptions, LANCZOS_SEED};
use crate::error::{Error, Result};
use crate::hilbert::SpinChainSpec;
use crate::scalar::{dot, norm, scale, Real};

use super::mpo::{apply_physical, left_update, right_update, MatrixProductOperator, MpoSite};
use super::mps::{transfer_left, transfer_right, MatrixProductState, Tensor3};

/// Largest overlap with the ground state accepted for an excited state.
pub const ORTHOGONALITY_BOUND: f64 = 1e-6;
/// Below this gap the excited state is accepted on overlap and residual alone.
pub const NEAR_DEGENERATE_GAP: f64 = 1e-10;
/// Local eigensolver tolerance of the first sweep.
const FIRST_SWEEP_TOL: f64 = 1e-6;
/// Bond dimension of the random initial state.
const INITIAL_CHI: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmrgConfig {
    pub chi_max: usize,
    /// Largest discarded weight per truncation.
    pub svd_cutoff: f64,
    pub max_sweeps: usize,
    /// Convergence threshold on the energy change between sweeps; the
    /// squared local residuals must also stay below it.
    pub energy_tol: f64,
    pub seed: u64,
    /// Residual target of the local eigensolver.
    pub lanczos_tol: f64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            chi_max: 128,
            svd_cutoff: 1e-10,
            max_sweeps: 30,
            energy_tol: 1e-10,
            seed: LANCZOS_SEED,
            lanczos_tol: 1e-10,
        }
    }
}

impl DmrgConfig {
    pub fn with_chi(mut self, chi: usize) -> Self {
        self.chi_max = chi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi_max < 2 {
            return Err(Error::InvalidSpec(format!("chi_max must be >= 2, got {}", self.chi_max)));
        }
        if !(self.svd_cutoff > 0.0 && self.svd_cutoff < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "svd_cutoff must lie in (0, 1), got {}",
                self.svd_cutoff
            )));
        }
        if !(self.energy_tol > 0.0) {
            return Err(Error::InvalidSpec(format!("energy_tol must be > 0, got {}", self.energy_tol)));
        }
        if !(self.lanczos_tol > 0.0) {
            return Err(Error::InvalidSpec(format!("lanczos_tol must be > 0, got {}", self.lanczos_tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidSpec("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgReport {
    pub sweeps: usize,
    /// Energy at the end of each sweep.
    pub energies: Vec<f64>,
    /// Largest discarded weight of the final sweep.
    pub discarded_weight: f64,
    pub converged: bool,
    pub max_bond: usize,
    /// Largest local eigensolver residual of the final sweep.
    pub local_residual: f64,
    /// Effective-Hamiltonian applications over the whole run.
    pub matvecs: usize,
    /// `|<ground|state>|`, excited-state runs only.
    pub overlap: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct DmrgRun<T> {
    /// `<psi|H|psi>` of the returned state.
    pub energy: T,
    pub state: MatrixProductState<T>,
    pub report: DmrgReport,
}

/// Ground and first excited state from two DMRG runs.
#[derive(Clone, Debug)]
pub struct DmrgPair<T> {
    pub ground: DmrgRun<T>,
    pub excited: DmrgRun<T>,
    pub gap: T,
}

/// Local two-site effective Hamiltonian.
struct Effective<'a, T> {
    lenv: &'a [DMatrix<T>],
    w1: &'a MpoSite<T>,
    w2: &'a MpoSite<T>,
    renv: &'a [DMatrix<T>],
    dl: usize,
    d: usize,
    dr: usize,
}

impl<T: Real> Effective<'_, T> {
    fn dim(&self) -> usize {
        self.dl * self.d * self.d * self.dr
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let (dl, d, dr) = (self.dl, self.d, self.dr);
        let n = self.dim();
        let xv = DMatrixView::from_slice(x, dl, d * d * dr);
        let mut z = vec![Vec::new(); self.w1.wr];
        let mut lx: Vec<Option<DMatrix<T>>> = vec![None; self.w1.wl];
        for (a, b, op) in &self.w1.ops {
            let src = lx[*a].get_or_insert_with(|| &self.lenv[*a] * xv);
            if z[*b].is_empty() {
                z[*b] = vec![T::zero(); n];
            }
            apply_physical(op, src.as_slice(), &mut z[*b], dl, d, d * dr);
        }
        let mut u = vec![Vec::new(); self.w2.wr];
        for (a, b, op) in &self.w2.ops {
            if z[*a].is_empty() {
                continue;
            }
            if u[*b].is_empty() {
                u[*b] = vec![T::zero(); n];
            }
            apply_physical(op, &z[*a], &mut u[*b], dl * d, d, dr);
        }
        let mut out = DMatrix::<T>::zeros(dl * d * d, dr);
        for (w, buf) in u.iter().enumerate() {
            if buf.is_empty() {
                continue;
            }
            let uv = DMatrixView::from_slice(buf, dl * d * d, dr);
            out.gemm(T::one(), &uv, &self.renv[w].transpose(), T::one());
        }
        y.copy_from_slice(out.as_slice());
    }
}

struct LocalStep<T> {
    energy: T,
    residual: T,
    discarded: T,
    matvecs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Right,
    Left,
}

/// Splits `theta` (`(dl d) x (d dr)`) and returns the two tensors with the
/// norm carried by the one in the direction of motion, plus the discarded weight.
fn split<T: Real>(
    theta: &[T],
    dl: usize,
    d: usize,
    dr: usize,
    chi_max: usize,
    cutoff: T,
    dir: Direction,
) -> (Tensor3<T>, Tensor3<T>, T) {
    let m = DMatrixView::from_slice(theta, dl * d, d * dr).into_owned();
    let svd = robust_svd(m);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let weights: Vec<T> = order.iter().map(|&k| svd.singular_values[k].powi(2)).collect();
    let total = weights.iter().fold(T::zero(), |a, &w| a + w);
    // smallest rank whose discarded weight is within the cutoff
    let mut keep = weights.len();
    let mut tail = T::zero();
    while keep > 1 && (tail + weights[keep - 1]) <= cutoff * total {
        tail += weights[keep - 1];
        keep -= 1;
    }
    let keep = keep.min(chi_max).max(1);
    let kept = weights[..keep].iter().fold(T::zero(), |a, &w| a + w);
    let discarded = (total - kept).max(T::zero()) / total;
    let renorm = T::one() / kept.sqrt();
    let mut left = DMatrix::<T>::zeros(dl * d, keep);
    let mut right = DMatrix::<T>::zeros(keep, d * dr);
    for (j, &k) in order[..keep].iter().enumerate() {
        let s = svd.singular_values[k] * renorm;
        let (ls, rs) = match dir {
            Direction::Right => (T::one(), s),
            Direction::Left => (s, T::one()),
        };
        left.column_mut(j).copy_from(&(u.column(k) * ls));
        right.row_mut(j).copy_from(&(vt.row(k) * rs));
    }
    (
        Tensor3::from_left_grouped(left, dl, d),
        Tensor3::from_right_grouped(right, d, dr),
        discarded,
    )
}

const SVD_MAX_ITER: usize = 10_000;

/// nalgebra's implicit-QR SVD can stall on some inputs; fall back to the
/// transpose and then to the eigendecomposition of the smaller Gram matrix.
fn robust_svd<T: Real>(m: DMatrix<T>) -> SVD<T, Dyn, Dyn> {
    if let Some(svd) = SVD::try_new(m.clone(), true, true, T::default_epsilon(), SVD_MAX_ITER) {
        return svd;
    }
    if let Some(svd) = SVD::try_new(m.transpose(), true, true, T::default_epsilon(), SVD_MAX_ITER) {
        return SVD {
            u: svd.v_t.map(|vt| vt.transpose()),
            v_t: svd.u.map(|u| u.transpose()),
            singular_values: svd.singular_values,
        };
    }
    gram_svd(&m)
}

fn gram_svd<T: Real>(m: &DMatrix<T>) -> SVD<T, Dyn, Dyn> {
    let (r, c) = m.shape();
    let k = r.min(c);
    let tall = r >= c;
    let gram = if tall { m.transpose() * m } else { m * m.transpose() };
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sv: Vec<T> = order.iter().map(|&j| eig.eigenvalues[j].max(T::zero()).sqrt()).collect();
    let basis = DMatrix::from_fn(k, k, |i, j| eig.eigenvectors[(i, order[j])]);
    // the other factor follows from m = U S V^T; columns with s = 0 stay zero
    let other = if tall { m * &basis } else { m.transpose() * &basis };
    let other = DMatrix::from_fn(other.nrows(), k, |i, j| {
        if sv[j] > T::zero() {
            other[(i, j)] / sv[j]
        } else {
            T::zero()
        }
    });
    let (u, v) = if tall { (other, basis) } else { (basis, other) };
    SVD {
        u: Some(u),
        v_t: Some(v.transpose()),
        singular_values: nalgebra::DVector::from_vec(sv),
    }
}

fn two_site<T: Real>(a: &Tensor3<T>, b: &Tensor3<T>) -> DMatrix<T> {
    a.left_grouped() * b.right_grouped()
}

/// Ground-state data for the excited-state projection.
struct Orthogonal<'a, T> {
    ground: &'a MatrixProductState<T>,
    lenv: Vec<DMatrix<T>>,
    renv: Vec<DMatrix<T>>,
}

impl<T: Real> Orthogonal<'_, T> {
    /// `|ground>` projected into the local two-site space of bond `i`, normalized.
    fn projection(&self, i: usize, dl: usize, d: usize, dr: usize) -> Option<Vec<T>> {
        let g = two_site(&self.ground.tensors[i], &self.ground.tensors[i + 1]);
        let gdl = self.ground.tensors[i].dl;
        let gdr = self.ground.tensors[i + 1].dr;
        let g = DMatrixView::from_slice(g.as_slice(), gdl, d * d * gdr).into_owned();
        let y = self.lenv[i].transpose() * g;
        let y = DMatrixView::from_slice(y.as_slice(), dl * d * d, gdr).into_owned();
        let p = y * &self.renv[i + 2];
        let mut p: Vec<T> = p.as_slice().to_vec();
        debug_assert_eq!(p.len(), dl * d * d * dr);
        let n = norm(&p);
        if n <= T::tol(1e-14) {
            return None;
        }
        scale(T::one() / n, &mut p);
        Some(p)
    }
}

struct Sweeper<'a, T: Real> {
    mpo: &'a MatrixProductOperator<T>,
    cfg: &'a DmrgConfig,
    mps: MatrixProductState<T>,
    lenv: Vec<Vec<DMatrix<T>>>,
    renv: Vec<Vec<DMatrix<T>>>,
    ortho: Option<Orthogonal<'a, T>>,
}

impl<'a, T: Real> Sweeper<'a, T> {
    fn new(
        mpo: &'a MatrixProductOperator<T>,
        cfg: &'a DmrgConfig,
        mut mps: MatrixProductState<T>,
        ground: Option<&'a MatrixProductState<T>>,
    ) -> Self {
        if mps.center() != 0 || mps.canonical_defect() > T::tol(1e-10) {
            mps.right_canonicalize();
        }
        let l = mps.len();
        let trivial = vec![DMatrix::identity(1, 1)];
        let mut renv = vec![Vec::new(); l + 1];
        renv[l] = trivial.clone();
        for i in (1..l).rev() {
            renv[i] = right_update(&renv[i + 1], &mpo.sites[i], &mps.tensors[i], &mps.tensors[i]);
        }
        let mut lenv = vec![Vec::new(); l + 1];
        lenv[0] = trivial;
        let ortho = ground.map(|g| {
            let mut orenv = vec![DMatrix::identity(1, 1); l + 1];
            for i in (1..l).rev() {
                orenv[i] = transfer_right(&orenv[i + 1], &g.tensors[i], &mps.tensors[i]);
            }
            Orthogonal {
                ground: g,
                lenv: vec![DMatrix::identity(1, 1); l + 1],
                renv: orenv,
            }
        });
        Self {
            mpo,
            cfg,
            mps,
            lenv,
            renv,
            ortho,
        }
    }

    /// Optimizes bond `(i, i + 1)`.
    fn update(&mut self, i: usize, dir: Direction, opts: &LanczosOptions<T>) -> Result<LocalStep<T>> {
        let (a, b) = (&self.mps.tensors[i], &self.mps.tensors[i + 1]);
        let (dl, d, dr) = (a.dl, a.d, b.dr);
        let theta = two_site(a, b);
        let heff = Effective {
            lenv: &self.lenv[i],
            w1: &self.mpo.sites[i],
            w2: &self.mpo.sites[i + 1],
            renv: &self.renv[i + 2],
            dl,
            d,
            dr,
        };
        let p = self.ortho.as_ref().and_then(|o| o.projection(i, dl, d, dr));
        let deflate: Vec<&[T]> = p.iter().map(Vec::as_slice).collect();
        let out = lanczos_best_effort(
            heff.dim(),
            |x, y| heff.apply(x, y),
            Some(theta.as_slice()),
            &deflate,
            opts,
        )?;
        let cutoff = T::lit(self.cfg.svd_cutoff);
        let (left, right, discarded) = split(&out.vector, dl, d, dr, self.cfg.chi_max, cutoff, dir);
        self.mps.tensors[i] = left;
        self.mps.tensors[i + 1] = right;
        match dir {
            Direction::Right => {
                self.mps.center = i + 1;
                let t = &self.mps.tensors[i];
                self.lenv[i + 1] = left_update(&self.lenv[i], &self.mpo.sites[i], t, t);
                if let Some(o) = self.ortho.as_mut() {
                    o.lenv[i + 1] = transfer_left(&o.lenv[i], &o.ground.tensors[i], t);
                }
            }
            Direction::Left => {
                self.mps.center = i;
                let t = &self.mps.tensors[i + 1];
                self.renv[i + 1] = right_update(&self.renv[i + 2], &self.mpo.sites[i + 1], t, t);
                if let Some(o) = self.ortho.as_mut() {
                    o.renv[i + 1] = transfer_right(&o.renv[i + 2], &o.ground.tensors[i + 1], t);
                }
            }
        }
        Ok(LocalStep {
            energy: out.value,
            residual: out.residual,
            discarded,
            matvecs: out.matvecs,
        })
    }

    fn run(mut self) -> Result<DmrgRun<T>> {
        let l = self.mps.len();
        let mut opts = LanczosOptions {
            tol: T::lit(FIRST_SWEEP_TOL.max(self.cfg.lanczos_tol)),
            max_krylov: 32,
            max_restarts: 2,
            seed: self.cfg.seed,
        };
        let mut energies: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut discarded = T::zero();
        let mut residual = T::zero();
        let mut matvecs = 0;
        for _sweep in 0..self.cfg.max_sweeps {
            discarded = T::zero();
            residual = T::zero();
            let mut energy = T::zero();
            let bonds = (0..l - 1)
                .map(|i| (i, Direction::Right))
                .chain((0..l - 1).rev().map(|i| (i, Direction::Left)));
            for (i, dir) in bonds {
                let step = self.update(i, dir, &opts)?;
                energy = step.energy;
                residual = residual.max(step.residual);
                discarded = discarded.max(step.discarded);
                matvecs += step.matvecs;
            }
            let e = energy.as_f64();
            let change = energies.last().map(|prev| (prev - e).abs());
            energies.push(e);
            // a residual r leaves an energy error of order r^2 / gap
            if change.is_some_and(|c| c < self.cfg.energy_tol) && residual.as_f64().powi(2) <= self.cfg.energy_tol {
                converged = true;
                break;
            }
            // local solves only need to beat the current sweep-to-sweep change
            let loose = change.map_or(FIRST_SWEEP_TOL, |c| 0.01 * c.sqrt());
            opts.tol = T::lit(loose.clamp(self.cfg.lanczos_tol, FIRST_SWEEP_TOL));
        }
        let overlap = match self.ortho.as_ref() {
            Some(o) => Some(self.project_out_ground(o.ground)?),
            None => None,
        };
        let energy = self.mpo.expectation(&self.mps);
        let report = DmrgReport {
            sweeps: energies.len(),
            energies,
            discarded_weight: discarded.as_f64(),
            converged,
            max_bond: self.mps.max_bond(),
            local_residual: residual.as_f64(),
            matvecs,
            overlap,
        };
        Ok(DmrgRun {
            energy,
            state: self.mps,
            report,
        })
    }

    /// Removes the residual ground-state component left by truncation from
    /// the center tensor (site 0) and returns the final `|<ground|state>|`.
    fn project_out_ground(&mut self, ground: &MatrixProductState<T>) -> Result<f64> {
        debug_assert_eq!(self.mps.center, 0);
        let l = self.mps.len();
        let mut env = DMatrix::<T>::identity(1, 1);
        for i in (1..l).rev() {
            env = transfer_right(&env, &ground.tensors[i], &self.mps.tensors[i]);
        }
        let p = ground.tensors[0].left_grouped() * env;
        let pn = norm(p.as_slice());
        let x = &mut self.mps.tensors[0].data;
        if pn > T::zero() {
            let c = dot(p.as_slice(), x) / (pn * pn);
            for (xv, pv) in x.iter_mut().zip(p.as_slice()) {
                *xv -= c * *pv;
            }
        }
        let nx = norm(x);
        scale(T::one() / nx, x);
        let overlap = (self.mps.overlap(ground)? / ground.norm()).abs();
        if overlap.as_f64() > ORTHOGONALITY_BOUND {
            return Err(Error::OrthogonalityLoss {
                overlap: overlap.as_f64(),
            });
        }
        Ok(overlap.as_f64())
    }
}

fn check_start<T: Real>(spec: &SpinChainSpec<T>, mps: &MatrixProductState<T>) -> Result<()> {
    if mps.len() != spec.length || mps.local_dim() != spec.local_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.length,
            found: mps.len(),
        });
    }
    Ok(())
}

/// Ground state by two-site DMRG from a seeded random start, or from
/// `initial` when given.
///
/// A run that exhausts `max_sweeps` still returns its best state with
/// `report.converged = false`.
pub fn dmrg_ground_from<T: Real>(
    spec: &SpinChainSpec<T>,
    cfg: &DmrgConfig,
    initial: Option<MatrixProductState<T>>,
) -> Result<DmrgRun<T>> {
    cfg.validate()?;
    let mpo = MatrixProductOperator::from_terms(&spec.terms()?);
    let start = match initial {
        Some(mps) => {
            check_start(spec, &mps)?;
            mps
        }
        None => MatrixProductState::random(spec.length, spec.local_dim(), INITIAL_CHI, cfg.seed)?,
    };
    Sweeper::new(&mpo, cfg, start, None).run()
}

pub fn dmrg_ground<T: Real>(spec: &SpinChainSpec<T>, cfg: &DmrgConfig) -> Result<DmrgRun<T>> {
    dmrg_ground_from(spec, cfg, None)
}

/// Lowest state orthogonal to `ground`.
///
/// Each local problem is solved in the orthogonal complement of the ground
/// state's projection onto the local variational space. When the gap is
/// below [`NEAR_DEGENERATE_GAP`] the run is accepted on orthogonality and
/// local residual instead of the energy change.
pub fn dmrg_excited_from<T: Real>(
    spec: &SpinChainSpec<T>,
    cfg: &DmrgConfig,
    ground: &DmrgRun<T>,
    initial: Option<MatrixProductState<T>>,
) -> Result<DmrgRun<T>> {
    cfg.validate()?;
    check_start(spec, &ground.state)?;
    let mpo = MatrixProductOperator::from_terms(&spec.terms()?);
    let start = match initial {
        Some(mps) => {
            check_start(spec, &mps)?;
            mps
        }
        None => MatrixProductState::random(spec.length, spec.local_dim(), INITIAL_CHI, cfg.seed.wrapping_add(1))?,
    };
    let mut run = Sweeper::new(&mpo, cfg, start, Some(&ground.state)).run()?;
    if !run.report.converged {
        let gap = (run.energy - ground.energy).abs().as_f64();
        if gap < NEAR_DEGENERATE_GAP && run.report.local_residual.powi(2) <= cfg.energy_tol {
            run.report.converged = true;
        }
    }
    Ok(run)
}

pub fn dmrg_excited<T: Real>(spec: &SpinChainSpec<T>, cfg: &DmrgConfig, ground: &DmrgRun<T>) -> Result<DmrgRun<T>> {
    dmrg_excited_from(spec, cfg, ground, None)
}

/// Ground and first excited state. If the excited run ends below the
/// ground run the two are exchanged, so `gap >= 0`.
pub fn dmrg_lowest_two<T: Real>(
    spec: &SpinChainSpec<T>,
    cfg: &DmrgConfig,
    warm: Option<(MatrixProductState<T>, MatrixProductState<T>)>,
) -> Result<DmrgPair<T>> {
    let (g0, x0) = match warm {
        Some((g, x)) => (Some(g), Some(x)),
        None => (None, None),
    };
    let ground = dmrg_ground_from(spec, cfg, g0)?;
    let excited = dmrg_excited_from(spec, cfg, &ground, x0)?;
    let (ground, excited) = if excited.energy < ground.energy {
        (excited, ground)
    } else {
        (ground, excited)
    };
    let gap = excited.energy - ground.energy;
    Ok(DmrgPair { ground, excited, gap })
}
