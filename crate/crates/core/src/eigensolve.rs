//! Lowest two eigenpairs of a Hermitian [`SparseOperator`].
//!
//! Two methods are offered: a dense Hermitian eigendecomposition (small
//! problems, used as the reference) and a Lanczos iteration with full
//! reorthogonalization. The Lanczos core is exposed as
//! [`lanczos_lowest`] over an arbitrary symmetric matrix-vector product so
//! that DMRG can reuse it for its local eigenproblems.
//!
//! The start vector is drawn from a ChaCha8 stream seeded with
//! [`LANCZOS_SEED`] (ground state) and `LANCZOS_SEED + 1` (excited state),
//! entries uniform in `[-0.5, 0.5)`. Results are therefore reproducible
//! bit for bit on a given build.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hilbert::SparseOperator;
use crate::scalar::{axpy, cx, dot, norm, scale, Cx, Real};

/// Largest dimension accepted by [`Method::Dense`].
pub const DENSE_MAX_DIM: usize = 20_000;
/// Smallest dimension accepted by [`Method::Lanczos`].
pub const LANCZOS_MIN_DIM: usize = 4;
pub const LANCZOS_SEED: u64 = 0x5EED_1A2C_705;
/// Gap below which a result is flagged degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Dense,
    Lanczos,
}

/// Normalized amplitude vector over the product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T: Real> {
    amplitudes: Vec<Cx<T>>,
}

impl<T: Real> PureState<T> {
    /// Wraps `amplitudes`, which must already have unit norm.
    pub fn new(amplitudes: Vec<Cx<T>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidState("empty amplitude vector".into()));
        }
        let n2 = amplitudes.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        if (n2 - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidState(format!(
                "norm^2 = {n2}, expected 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(mut amplitudes: Vec<Cx<T>>) -> Result<Self> {
        let n = amplitudes
            .iter()
            .fold(T::zero(), |a, z| a + z.norm_sqr())
            .sqrt();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        for z in amplitudes.iter_mut() {
            *z /= n;
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(v: &[T]) -> Result<Self> {
        Self::normalized(v.iter().map(|&x| cx(x)).collect())
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut a = vec![cx(T::zero()); dim];
        a[index] = cx(T::one());
        Self { amplitudes: a }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Cx<T>] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Cx<T>> {
        self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Cx<T> {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(cx(T::zero()), |a, (x, y)| a + x.conj() * y)
    }

    /// `<self|H|self>`.
    pub fn expectation(&self, h: &SparseOperator<T>) -> T {
        let mut hv = vec![cx(T::zero()); self.dim()];
        h.apply_complex(&self.amplitudes, &mut hv);
        self.amplitudes
            .iter()
            .zip(&hv)
            .fold(T::zero(), |a, (x, y)| a + (x.conj() * y).re)
    }

    /// `|| H v - e v ||`.
    pub fn residual(&self, h: &SparseOperator<T>, e: T) -> T {
        let mut hv = vec![cx(T::zero()); self.dim()];
        h.apply_complex(&self.amplitudes, &mut hv);
        hv.iter()
            .zip(&self.amplitudes)
            .fold(T::zero(), |a, (y, x)| a + (*y - *x * e).norm_sqr())
            .sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult<T: Real> {
    pub e0: T,
    pub e1: T,
    pub gap: T,
    pub v0: PureState<T>,
    pub v1: PureState<T>,
    /// `||H v0 - E0 v0||` and `||H v1 - E1 v1||`.
    pub residuals: [T; 2],
    /// Set when `gap < 1e-12`.
    pub degenerate: bool,
    pub method: Method,
    /// Matrix-vector products spent (zero for dense).
    pub matvecs: usize,
}

#[derive(Clone, Debug)]
pub struct LanczosOptions<T> {
    /// Required residual norm `||H v - E v||`.
    pub tol: T,
    /// Krylov dimension before a restart from the current Ritz vector.
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl<T: Real> LanczosOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self {
            tol,
            max_krylov: 120,
            max_restarts: 60,
            seed: LANCZOS_SEED,
        }
    }
}

impl<T: Real> Default for LanczosOptions<T> {
    fn default() -> Self {
        Self::with_tol(T::tol(DEFAULT_TOL))
    }
}

/// Extremal eigenpair from [`lanczos_lowest`].
#[derive(Clone, Debug)]
pub struct LanczosOutcome<T> {
    pub value: T,
    pub vector: Vec<T>,
    pub residual: T,
    pub matvecs: usize,
    pub converged: bool,
}

/// Deterministic start vector, uniform entries in `[-0.5, 0.5)`.
pub fn seeded_start<T: Real>(dim: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| T::lit(rng.random::<f64>() - 0.5))
        .collect()
}

fn orthogonalize<T: Real>(w: &mut [T], against: &[&[T]]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in against {
            let c = dot(q, w);
            axpy(-c, q, w);
        }
    }
}

/// Lowest eigenpair of the symmetric map `matvec` restricted to the
/// orthogonal complement of `deflate` (orthonormal vectors).
///
/// Full reorthogonalization against the Krylov basis and `deflate` is
/// applied at every step. When the Krylov dimension reaches
/// `opts.max_krylov` the iteration restarts from the current Ritz vector.
/// Convergence is declared on the explicitly computed residual
/// `||P (H v) - E v||`, `P` the projector onto the complement.
pub fn lanczos_lowest<T, F>(
    dim: usize,
    matvec: F,
    start: Option<&[T]>,
    deflate: &[&[T]],
    opts: &LanczosOptions<T>,
) -> Result<LanczosOutcome<T>>
where
    T: Real,
    F: FnMut(&[T], &mut [T]),
{
    let out = lanczos_best_effort(dim, matvec, start, deflate, opts)?;
    if !out.converged {
        return Err(Error::NoConvergence {
            iterations: out.matvecs,
            residual: out.residual.as_f64(),
        });
    }
    Ok(out)
}

/// As [`lanczos_lowest`], but returns the best Ritz pair found when the
/// restart budget runs out, with `converged = false`.
pub fn lanczos_best_effort<T, F>(
    dim: usize,
    mut matvec: F,
    start: Option<&[T]>,
    deflate: &[&[T]],
    opts: &LanczosOptions<T>,
) -> Result<LanczosOutcome<T>>
where
    T: Real,
    F: FnMut(&[T], &mut [T]),
{
    let free = dim.saturating_sub(deflate.len());
    if free == 0 {
        return Err(Error::DimensionMismatch {
            expected: deflate.len() + 1,
            found: dim,
        });
    }
    let mut v: Vec<T> = match start {
        Some(s) => {
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.len(),
                });
            }
            s.to_vec()
        }
        None => seeded_start(dim, opts.seed),
    };
    orthogonalize(&mut v, deflate);
    if norm(&v) <= T::default_epsilon() {
        v = seeded_start(dim, opts.seed ^ 0x9E37_79B9);
        orthogonalize(&mut v, deflate);
    }
    let m_cap = opts.max_krylov.max(2).min(free);
    let mut matvecs = 0usize;
    let mut best: Option<LanczosOutcome<T>> = None;
    let mut hv = vec![T::zero(); dim];
    let mut w = vec![T::zero(); dim];

    for _restart in 0..=opts.max_restarts {
        let nv = norm(&v);
        scale(T::one() / nv, &mut v);
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m_cap);
        let mut alpha: Vec<T> = Vec::with_capacity(m_cap);
        let mut beta: Vec<T> = Vec::with_capacity(m_cap);
        basis.push(v.clone());
        let mut ritz: Option<Vec<T>> = None;

        for j in 0..m_cap {
            matvec(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            {
                let refs: Vec<&[T]> = deflate
                    .iter()
                    .copied()
                    .chain(basis.iter().map(Vec::as_slice))
                    .collect();
                orthogonalize(&mut w, &refs);
            }
            let b = norm(&w);
            let k = j + 1;
            let y = tridiagonal_lowest(&alpha, &beta);
            let estimate = b * y[k - 1].abs();
            let exhausted = b <= T::default_epsilon() * (a.abs() + T::one()) || k == m_cap;
            if estimate <= opts.tol * T::lit(0.1) || exhausted {
                ritz = Some(y);
                break;
            }
            beta.push(b);
            let mut next = w.clone();
            scale(T::one() / b, &mut next);
            basis.push(next);
        }

        let y = ritz.expect("loop always yields a Ritz pair");
        let mut x = vec![T::zero(); dim];
        for (coef, q) in y.iter().zip(&basis) {
            axpy(*coef, q, &mut x);
        }
        orthogonalize(&mut x, deflate);
        let nx = norm(&x);
        scale(T::one() / nx, &mut x);
        matvec(&x, &mut hv);
        matvecs += 1;
        orthogonalize(&mut hv, deflate);
        let value = dot(&x, &hv);
        axpy(-value, &x, &mut hv);
        let residual = norm(&hv);
        if residual <= opts.tol {
            return Ok(LanczosOutcome {
                value,
                vector: x,
                residual,
                matvecs,
                converged: true,
            });
        }
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(LanczosOutcome {
                value,
                vector: x.clone(),
                residual,
                matvecs,
                converged: false,
            });
        }
        v = x;
    }
    let mut out = best.expect("at least one restart ran");
    out.matvecs = matvecs;
    Ok(out)
}

/// Lowest eigenvector of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta` (`beta.len() == alpha.len() - 1`).
fn tridiagonal_lowest<T: Real>(alpha: &[T], beta: &[T]) -> Vec<T> {
    let k = alpha.len();
    let mut t = DMatrix::<T>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, eig.eigenvalues[0]), |best, (i, &e)| {
            if e < best.1 {
                (i, e)
            } else {
                best
            }
        });
    eig.eigenvectors.column(imin).iter().copied().collect()
}

/// Ground state and first excited state of `h`.
///
/// `E1` is the second-lowest eigenvalue counting multiplicity, so an exactly
/// degenerate ground state yields `gap = 0` and `degenerate = true`.
pub fn lowest_two<T: Real>(h: &SparseOperator<T>, method: Method, tol: T) -> Result<EigenResult<T>> {
    lowest_two_with(h, method, &LanczosOptions::with_tol(tol))
}

pub fn lowest_two_with<T: Real>(
    h: &SparseOperator<T>,
    method: Method,
    opts: &LanczosOptions<T>,
) -> Result<EigenResult<T>> {
    let dim = h.dim();
    let (e0, x0, e1, x1, matvecs) = match method {
        Method::Dense => {
            check_dense(dim)?;
            if dim < 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: dim,
                });
            }
            let (vals, vecs) = dense_lowest(h, 2);
            (vals[0], vecs[0].clone(), vals[1], vecs[1].clone(), 0)
        }
        Method::Lanczos => {
            check_lanczos(dim)?;
            let op = |x: &[T], y: &mut [T]| h.apply(x, y);
            let g = lanczos_lowest(dim, op, None, &[], opts)?;
            let mut o1 = opts.clone();
            o1.seed = opts.seed.wrapping_add(1);
            let x = lanczos_lowest(dim, op, None, &[&g.vector], &o1)?;
            (g.value, g.vector, x.value, x.vector, g.matvecs + x.matvecs)
        }
    };
    // rounding can order a near-degenerate pair either way
    let (e0, x0, e1, x1) = if e1 < e0 {
        (e1, x1, e0, x0)
    } else {
        (e0, x0, e1, x1)
    };
    let v0 = PureState::from_real(&x0)?;
    let v1 = PureState::from_real(&x1)?;
    let residuals = [v0.residual(h, e0), v1.residual(h, e1)];
    let worst = residuals[0].max(residuals[1]);
    if worst > opts.tol {
        return Err(Error::NoConvergence {
            iterations: matvecs,
            residual: worst.as_f64(),
        });
    }
    let gap = (e1 - e0).max(T::zero());
    Ok(EigenResult {
        e0,
        e1,
        gap,
        v0,
        v1,
        residuals,
        degenerate: gap.as_f64() < DEGENERACY_THRESHOLD,
        method,
        matvecs,
    })
}

/// Ground-state energy and vector.
pub fn ground_state<T: Real>(h: &SparseOperator<T>, method: Method, tol: T) -> Result<(T, PureState<T>)> {
    let dim = h.dim();
    let opts = LanczosOptions::with_tol(tol);
    let (e0, x0) = match method {
        Method::Dense => {
            check_dense(dim)?;
            let (vals, vecs) = dense_lowest(h, 1);
            (vals[0], vecs[0].clone())
        }
        Method::Lanczos => {
            check_lanczos(dim)?;
            let g = lanczos_lowest(dim, |x: &[T], y: &mut [T]| h.apply(x, y), None, &[], &opts)?;
            (g.value, g.vector)
        }
    };
    let v0 = PureState::from_real(&x0)?;
    let r = v0.residual(h, e0);
    if r > tol {
        return Err(Error::NoConvergence {
            iterations: 0,
            residual: r.as_f64(),
        });
    }
    Ok((e0, v0))
}

fn check_dense(dim: usize) -> Result<()> {
    if dim > DENSE_MAX_DIM {
        return Err(Error::capacity("dense eigensolver", dim, DENSE_MAX_DIM));
    }
    Ok(())
}

fn check_lanczos(dim: usize) -> Result<()> {
    if dim < LANCZOS_MIN_DIM {
        return Err(Error::Unsupported(format!(
            "Lanczos needs dimension >= {LANCZOS_MIN_DIM}, got {dim}; use the dense method"
        )));
    }
    Ok(())
}

/// Lowest `count` eigenpairs by full dense diagonalization.
fn dense_lowest<T: Real>(h: &SparseOperator<T>, count: usize) -> (Vec<T>, Vec<Vec<T>>) {
    let eig = SymmetricEigen::new(h.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    order
        .into_iter()
        .take(count)
        .map(|i| {
            (
                eig.eigenvalues[i],
                eig.eigenvectors.column(i).iter().copied().collect::<Vec<T>>(),
            )
        })
        .unzip()
}

/// Full spectrum in ascending order (dense; for tests and small checks).
pub fn spectrum<T: Real>(h: &SparseOperator<T>) -> Result<Vec<T>> {
    check_dense(h.dim())?;
    let mut e: Vec<T> = SymmetricEigen::new(h.to_dense()).eigenvalues.iter().copied().collect();
    e.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_hamiltonian, Field, SpinChainSpec};
    use proptest::prelude::*;

    fn ising(l: usize, bz: f64, bx: f64) -> SparseOperator<f64> {
        build_hamiltonian(&SpinChainSpec::<f64>::ising_half(l, bz, bx)).unwrap()
    }

    #[test]
    fn two_site_ising_dense() {
        let r = lowest_two(&ising(2, 1.0, 0.0), Method::Dense, 1e-12).unwrap();
        assert!((r.e0 + 5f64.sqrt()).abs() < 1e-12);
        assert!((r.e1 + 1.0).abs() < 1e-12);
        assert!((r.gap - (5f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn two_site_ising_lanczos() {
        let r = lowest_two(&ising(2, 1.0, 0.0), Method::Lanczos, 1e-10).unwrap();
        assert!((r.e0 + 5f64.sqrt()).abs() < 1e-12);
        assert!((r.e1 + 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_limit_is_degenerate() {
        let r = lowest_two(&ising(2, 0.0, 0.0), Method::Dense, 1e-12).unwrap();
        assert!((r.e0 + 1.0).abs() < 1e-12);
        assert!(r.degenerate);
        let r = lowest_two(&ising(4, 0.0, 0.0), Method::Lanczos, 1e-10).unwrap();
        assert!((r.e0 + 3.0).abs() < 1e-12);
        assert!((r.e1 + 3.0).abs() < 1e-12);
        assert!(r.degenerate);
        assert!(r.v0.inner(&r.v1).norm() < 1e-8);
    }

    #[test]
    fn ground_energy_examples() {
        let (e, v) = ground_state(&ising(4, 0.0, 0.0), Method::Dense, 1e-12).unwrap();
        assert!((e + 3.0).abs() < 1e-12);
        let n: f64 = v.amplitudes().iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);

        let h = build_hamiltonian(&SpinChainSpec::<f64>::xxz_spin1(2, 1.0, 0.0)).unwrap();
        let (e, _) = ground_state(&h, Method::Lanczos, 1e-10).unwrap();
        assert!((e + 2.0).abs() < 1e-10);
    }

    #[test]
    fn heisenberg_dimer_spectrum() {
        let h = build_hamiltonian(&SpinChainSpec::<f64>::xxz_spin1(2, 1.0, 0.0)).unwrap();
        let mut levels: Vec<f64> = spectrum(&h).unwrap();
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
        assert_eq!(levels.len(), 3);
        for (got, want) in levels.iter().zip([-2.0, -1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn open_chain_gap_ratio() {
        let r = lowest_two(&ising(8, 0.5, 0.0), Method::Lanczos, 1e-10).unwrap();
        let ratio = r.gap / (2.0 * 0.75 * 0.5f64.powi(8));
        assert!((0.8..=1.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let specs = [
            SpinChainSpec::<f64>::ising_half(6, 0.5, 0.01),
            SpinChainSpec::<f64>::ising_half(8, 1.5, -0.2),
            SpinChainSpec::<f64>::ising_half(10, 0.4, 0.0),
            SpinChainSpec::<f64>::xxz_spin1(5, 3.8, 3.5),
            SpinChainSpec::<f64>::xxz_spin1(6, -4.2, 3.5),
            SpinChainSpec::<f64>::xxz_spin1(6, 3.0, 0.0).with_staggered_field(0.01),
        ];
        for spec in specs {
            let h = build_hamiltonian(&spec).unwrap();
            let d = lowest_two(&h, Method::Dense, 1e-10).unwrap();
            let l = lowest_two(&h, Method::Lanczos, 1e-10).unwrap();
            assert!((d.e0 - l.e0).abs() < 1e-9, "{spec:?}");
            assert!((d.e1 - l.e1).abs() < 1e-9, "{spec:?}");
            assert!(l.v0.inner(&l.v1).norm() < 1e-8);
        }
    }

    #[test]
    fn spectral_shift() {
        let h = ising(6, 0.7, 0.1);
        let base = lowest_two(&h, Method::Lanczos, 1e-10).unwrap();
        let shifted = lowest_two(&h.shifted(2.5), Method::Lanczos, 1e-10).unwrap();
        assert!((shifted.e0 - base.e0 - 2.5).abs() < 1e-10);
        assert!((shifted.e1 - base.e1 - 2.5).abs() < 1e-10);
        assert!((shifted.gap - base.gap).abs() < 1e-10);
    }

    #[test]
    fn gap_is_even_in_symmetry_breaking_field() {
        let spec = SpinChainSpec::<f64>::ising_half(8, 0.5, 0.003);
        let a = lowest_two(&build_hamiltonian(&spec).unwrap(), Method::Lanczos, 1e-11).unwrap();
        let b = lowest_two(
            &build_hamiltonian(&spec.with(Field::Bx, -0.003)).unwrap(),
            Method::Lanczos,
            1e-11,
        )
        .unwrap();
        assert!((a.gap - b.gap).abs() < 1e-10);

        let spec = SpinChainSpec::<f64>::xxz_spin1(6, 3.0, 0.0).with_staggered_field(0.02);
        let a = lowest_two(&build_hamiltonian(&spec).unwrap(), Method::Lanczos, 1e-11).unwrap();
        let b = lowest_two(
            &build_hamiltonian(&spec.with(Field::BzStaggered, -0.02)).unwrap(),
            Method::Lanczos,
            1e-11,
        )
        .unwrap();
        assert!((a.gap - b.gap).abs() < 1e-10);
    }

    #[test]
    fn deterministic_start() {
        let h = ising(7, 0.5, 0.05);
        let a = lowest_two(&h, Method::Lanczos, 1e-10).unwrap();
        let b = lowest_two(&h, Method::Lanczos, 1e-10).unwrap();
        assert_eq!(a.e0.to_bits(), b.e0.to_bits());
        assert_eq!(a.v0, b.v0);
    }

    #[test]
    fn capacity_and_size_limits() {
        let h = ising(2, 1.0, 0.0);
        assert!(matches!(
            lowest_two(&SparseOperator::<f64>::identity(3), Method::Lanczos, 1e-9),
            Err(Error::Unsupported(_))
        ));
        assert!(lowest_two(&h, Method::Lanczos, 1e-9).is_ok());
        let big = SparseOperator::<f64>::identity(DENSE_MAX_DIM + 1);
        assert!(matches!(
            lowest_two(&big, Method::Dense, 1e-9),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn single_precision_lanczos() {
        let spec = SpinChainSpec::<f32>::ising_half(6, 0.5, 0.1);
        let h = build_hamiltonian(&spec).unwrap();
        let r = lowest_two(&h, Method::Lanczos, 1e-4).unwrap();
        let h64 = build_hamiltonian(&SpinChainSpec::<f64>::ising_half(6, 0.5, 0.1)).unwrap();
        let d = lowest_two(&h64, Method::Dense, 1e-10).unwrap();
        assert!((f64::from(r.e0) - d.e0).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn variational_bound(seed in any::<u64>()) {
            let h = ising(6, 0.5, 0.02);
            let e0 = ground_state(&h, Method::Dense, 1e-10).unwrap().0;
            let v = PureState::from_real(&seeded_start::<f64>(h.dim(), seed)).unwrap();
            prop_assert!(v.expectation(&h) >= e0 - 1e-10);
        }
    }
}
