//! Reduced density matrices, magnetizations and the bond-decomposed energy.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::eigensolve::PureState;
use crate::error::{Error, Result};
use crate::hilbert::{ops, Model, SpinChainSpec};
use crate::scalar::{cx, Cx, Real};

/// Largest reduced density matrix dimension produced by [`partial_trace`].
pub const MAX_RDM_DIM: usize = 4096;

/// Hermitian, unit-trace, positive semidefinite matrix over a product of
/// local spaces (first subsystem most significant).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    dims: Vec<usize>,
    matrix: DMatrix<Cx<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates trace, hermiticity and positivity to `1e-10`.
    pub fn new(dims: Vec<usize>, matrix: DMatrix<Cx<T>>) -> Result<Self> {
        let rho = Self::unchecked(dims, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Checks only the shape.
    pub fn unchecked(dims: Vec<usize>, matrix: DMatrix<Cx<T>>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { dims, matrix })
    }

    /// `|psi><psi|` for a normalized vector over `dims`.
    pub fn from_pure(dims: Vec<usize>, psi: &[Cx<T>]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        Self::new(dims, &v * v.adjoint())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Cx<T>> {
        &self.matrix
    }

    pub fn trace(&self) -> Cx<T> {
        self.matrix.trace()
    }

    pub fn hermiticity_defect(&self) -> T {
        let m = &self.matrix;
        let mut worst = T::zero();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm_sqr().sqrt());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<T> {
        let h = (&self.matrix + self.matrix.adjoint()) * cx(T::lit(0.5));
        let mut e: Vec<T> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        e
    }

    pub fn validate(&self) -> Result<()> {
        let tol = T::tol(1e-10);
        let tr = self.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let h = self.hermiticity_defect();
        if h > tol {
            return Err(Error::InvalidState(format!("not Hermitian (defect {h:e})")));
        }
        let min = self.eigenvalues()[0];
        if min < -tol {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }

    /// `Tr(O rho)`.
    pub fn expectation(&self, op: &DMatrix<Cx<T>>) -> Result<Cx<T>> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.nrows(),
            });
        }
        Ok((op * &self.matrix).trace())
    }
}

/// The two central sites `(L/2 - 1, L/2)` (0-based) of an even chain.
pub fn central_pair(length: usize) -> (usize, usize) {
    (length / 2 - 1, length / 2)
}

fn check_sites(keep: &[usize], length: usize) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::InvalidSpec("no sites to keep".into()));
    }
    for (k, &s) in keep.iter().enumerate() {
        if s >= length {
            return Err(Error::InvalidSpec(format!(
                "site {s} outside chain of length {length}"
            )));
        }
        if keep[..k].contains(&s) {
            return Err(Error::InvalidSpec(format!("site {s} listed twice")));
        }
    }
    Ok(())
}

/// `Tr_{complement} |psi><psi|` keeping `keep` (0-based, in the given order)
/// on a chain of `length` sites with local dimension `local_dim`.
pub fn partial_trace_dims<T: Real>(
    state: &PureState<T>,
    keep: &[usize],
    local_dim: usize,
    length: usize,
) -> Result<DensityMatrix<T>> {
    check_sites(keep, length)?;
    let full = local_dim.pow(length as u32);
    if state.dim() != full {
        return Err(Error::DimensionMismatch {
            expected: full,
            found: state.dim(),
        });
    }
    let kept_dim = local_dim
        .checked_pow(keep.len() as u32)
        .filter(|&n| n <= MAX_RDM_DIM)
        .ok_or_else(|| Error::capacity("reduced density matrix", format!("{local_dim}^{}", keep.len()), MAX_RDM_DIM))?;
    let env: Vec<usize> = (0..length).filter(|s| !keep.contains(s)).collect();
    let env_dim = full / kept_dim;
    let stride = |site: usize| local_dim.pow((length - 1 - site) as u32);

    // psi reshaped to (kept, environment)
    let mut m = DMatrix::<Cx<T>>::zeros(kept_dim, env_dim);
    let amps = state.amplitudes();
    for (idx, &a) in amps.iter().enumerate() {
        let mut k = 0;
        for &s in keep {
            k = k * local_dim + (idx / stride(s)) % local_dim;
        }
        let mut e = 0;
        for &s in &env {
            e = e * local_dim + (idx / stride(s)) % local_dim;
        }
        m[(k, e)] = a;
    }
    let rho = &m * m.adjoint();
    DensityMatrix::new(vec![local_dim; keep.len()], rho)
}

pub fn partial_trace<T: Real>(
    state: &PureState<T>,
    keep: &[usize],
    spec: &SpinChainSpec<T>,
) -> Result<DensityMatrix<T>> {
    partial_trace_dims(state, keep, spec.local_dim(), spec.length)
}

/// `sum_bonds Tr(h_{i,i+1} rho_{i,i+1}) + sum_sites Tr(h_i rho_i)`.
///
/// Single-site terms are evaluated on one-site reduced density matrices;
/// the result equals `<psi|H|psi>`.
pub fn energy_reconstruction<T: Real>(state: &PureState<T>, spec: &SpinChainSpec<T>) -> Result<T> {
    let terms = spec.terms()?;
    let mut e = T::zero();
    for i in 0..spec.length - 1 {
        let rho = partial_trace(state, &[i, i + 1], spec)?;
        e += rho.expectation(&ops::to_complex(&terms.bond_matrix(i)))?.re;
    }
    for (i, h) in terms.sites.iter().enumerate() {
        let rho = partial_trace(state, &[i], spec)?;
        e += rho.expectation(&ops::to_complex(h))?.re;
    }
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Z,
}

/// Single-site spin operator along `axis` (Pauli for spin-1/2, spin-1 matrices otherwise).
pub fn spin_operator<T: Real>(model: Model, axis: Axis) -> DMatrix<T> {
    match (model, axis) {
        (Model::IsingHalf, Axis::X) => ops::pauli_x(),
        (Model::IsingHalf, Axis::Z) => ops::pauli_z(),
        (Model::XxzSpin1, Axis::X) => ops::spin1_x(),
        (Model::XxzSpin1, Axis::Z) => ops::spin1_z(),
    }
}

/// Weight of site `i` in the (optionally staggered) sum.
pub fn site_weight<T: Real>(site: usize, staggered: bool) -> T {
    if staggered {
        SpinChainSpec::<T>::staggered_sign(site)
    } else {
        T::one()
    }
}

/// `sum_i w_i <O_i>`, `w_i = (-1)^i` (1-based `i`) when staggered, else 1.
pub fn magnetization<T: Real>(
    state: &PureState<T>,
    spec: &SpinChainSpec<T>,
    axis: Axis,
    staggered: bool,
) -> Result<T> {
    let op = ops::to_complex(&spin_operator::<T>(spec.model, axis));
    let mut m = T::zero();
    for i in 0..spec.length {
        let rho = partial_trace(state, &[i], spec)?;
        m += site_weight::<T>(i, staggered) * rho.expectation(&op)?.re;
    }
    Ok(m)
}

/// `M |psi>` for `M = sum_i w_i O_i`.
fn apply_site_sum<T: Real>(
    state: &PureState<T>,
    spec: &SpinChainSpec<T>,
    axis: Axis,
    staggered: bool,
) -> Result<Vec<Cx<T>>> {
    let d = spec.local_dim();
    let l = spec.length;
    let dim = spec
        .hilbert_dim()
        .ok_or_else(|| Error::capacity("state", format!("{d}^{l}"), usize::MAX))?;
    if state.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: state.dim(),
        });
    }
    let op = spin_operator::<T>(spec.model, axis);
    let mut out = vec![cx(T::zero()); dim];
    for (idx, &a) in state.amplitudes().iter().enumerate() {
        for site in 0..l {
            let stride = d.pow((l - 1 - site) as u32);
            let s = (idx / stride) % d;
            let base = idx - s * stride;
            let w = site_weight::<T>(site, staggered);
            for t in 0..d {
                let v = op[(t, s)];
                if v != T::zero() {
                    out[base + t * stride] += a * (w * v);
                }
            }
        }
    }
    Ok(out)
}

/// `sqrt(<M^2>)` for `M = sum_i w_i O_i`; nonzero even when `<M>` vanishes
/// by symmetry.
pub fn magnetization_rms<T: Real>(
    state: &PureState<T>,
    spec: &SpinChainSpec<T>,
    axis: Axis,
    staggered: bool,
) -> Result<T> {
    let mv = apply_site_sum(state, spec, axis, staggered)?;
    Ok(mv.iter().fold(T::zero(), |a, z| a + z.norm_sqr()).sqrt())
}
