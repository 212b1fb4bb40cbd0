//! Real matrix product states.
//!
//! A site tensor `A[l, s, r]` (left bond, physical, right bond) is stored
//! column-major with flat index `l + Dl * (s + d * r)`. The same buffer is
//! therefore both the left-grouped matrix `(Dl d) x Dr` and the
//! right-grouped matrix `Dl x (d Dr)` without copying.

use nalgebra::{DMatrix, DMatrixView, QR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigensolve::PureState;
use crate::error::{Error, Result};
use crate::measure::DensityMatrix;
use crate::scalar::{cx, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    pub dl: usize,
    pub d: usize,
    pub dr: usize,
    pub data: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(dl: usize, d: usize, dr: usize) -> Self {
        Self {
            dl,
            d,
            dr,
            data: vec![T::zero(); dl * d * dr],
        }
    }

    pub fn from_left_grouped(m: DMatrix<T>, dl: usize, d: usize) -> Self {
        assert_eq!(m.nrows(), dl * d);
        let dr = m.ncols();
        Self {
            dl,
            d,
            dr,
            data: m.as_slice().to_vec(),
        }
    }

    pub fn from_right_grouped(m: DMatrix<T>, d: usize, dr: usize) -> Self {
        assert_eq!(m.ncols(), d * dr);
        let dl = m.nrows();
        Self {
            dl,
            d,
            dr,
            data: m.as_slice().to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> T {
        self.data[l + self.dl * (s + self.d * r)]
    }

    /// `(Dl d) x Dr` view.
    pub fn left_grouped(&self) -> DMatrixView<'_, T> {
        DMatrixView::from_slice(&self.data, self.dl * self.d, self.dr)
    }

    /// `Dl x (d Dr)` view.
    pub fn right_grouped(&self) -> DMatrixView<'_, T> {
        DMatrixView::from_slice(&self.data, self.dl, self.d * self.dr)
    }

    /// The `Dl x Dr` matrix at physical index `s`.
    pub fn slice(&self, s: usize) -> DMatrix<T> {
        DMatrix::from_fn(self.dl, self.dr, |l, r| self.get(l, s, r))
    }
}

/// Open-boundary MPS with real tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductState<T> {
    pub(crate) tensors: Vec<Tensor3<T>>,
    pub(crate) center: usize,
}

impl<T: Real> MatrixProductState<T> {
    /// Product state `|s_0 s_1 ...>` with bond dimension one.
    pub fn product(local_dim: usize, states: &[usize]) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::InvalidSpec("an MPS needs at least two sites".into()));
        }
        let tensors = states
            .iter()
            .map(|&s| {
                if s >= local_dim {
                    return Err(Error::InvalidState(format!(
                        "local state {s} outside dimension {local_dim}"
                    )));
                }
                let mut t = Tensor3::zeros(1, local_dim, 1);
                t.data[s] = T::one();
                Ok(t)
            })
            .collect::<Result<_>>()?;
        Ok(Self { tensors, center: 0 })
    }

    /// Seeded random state, right-canonical with the center on site 0.
    pub fn random(length: usize, local_dim: usize, chi: usize, seed: u64) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidSpec("an MPS needs at least two sites".into()));
        }
        let chi = chi.max(1);
        let bond = |k: usize| {
            let left = local_dim.saturating_pow(k as u32);
            let right = local_dim.saturating_pow((length - k) as u32);
            left.min(right).min(chi)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = (0..length)
            .map(|i| {
                let (dl, dr) = (bond(i), bond(i + 1));
                Tensor3 {
                    dl,
                    d: local_dim,
                    dr,
                    data: (0..dl * local_dim * dr)
                        .map(|_| T::lit(rng.random::<f64>() - 0.5))
                        .collect(),
                }
            })
            .collect();
        let mut mps = Self {
            tensors,
            center: length - 1,
        };
        mps.right_canonicalize();
        Ok(mps)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn local_dim(&self) -> usize {
        self.tensors[0].d
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn tensor(&self, i: usize) -> &Tensor3<T> {
        &self.tensors[i]
    }

    /// Bond dimensions between neighbouring sites (`L - 1` entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.dr).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Makes sites `1..L` right-canonical with QR decompositions and
    /// normalizes site 0.
    pub fn right_canonicalize(&mut self) {
        for i in (1..self.len()).rev() {
            let t = &self.tensors[i];
            let (d, dr) = (t.d, t.dr);
            // M = R^T Q^T from the QR of M^T
            let qr = QR::new(t.right_grouped().transpose());
            let q = qr.q();
            let r = qr.r();
            self.tensors[i] = Tensor3::from_right_grouped(q.transpose(), d, dr);
            let prev = &self.tensors[i - 1];
            let (pdl, pd) = (prev.dl, prev.d);
            let merged = prev.left_grouped() * r.transpose();
            self.tensors[i - 1] = Tensor3::from_left_grouped(merged, pdl, pd);
        }
        let n = crate::scalar::norm(&self.tensors[0].data);
        crate::scalar::scale(T::one() / n, &mut self.tensors[0].data);
        self.center = 0;
    }

    /// Largest deviation from the isometry conditions: `sum_s A_s^T A_s = 1`
    /// left of the center and `sum_s A_s A_s^T = 1` right of it.
    pub fn canonical_defect(&self) -> T {
        let mut worst = T::zero();
        for (i, t) in self.tensors.iter().enumerate() {
            let defect = if i < self.center {
                let lg = t.left_grouped();
                (lg.transpose() * lg - DMatrix::identity(t.dr, t.dr)).amax()
            } else if i > self.center {
                let rg = t.right_grouped();
                (rg * rg.transpose() - DMatrix::identity(t.dl, t.dl)).amax()
            } else {
                T::zero()
            };
            worst = worst.max(defect);
        }
        worst
    }

    /// `<self|other>` (both real).
    pub fn overlap(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        let mut env = DMatrix::<T>::identity(1, 1);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            env = transfer_left(&env, a, b);
        }
        Ok(env[(0, 0)])
    }

    pub fn norm(&self) -> T {
        self.overlap(self).expect("self-compatible").sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || self.local_dim() != other.local_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(())
    }

    /// Dense amplitudes over the big-endian product basis.
    pub fn to_dense(&self) -> Result<PureState<T>> {
        let d = self.local_dim();
        let dim = d
            .checked_pow(self.len() as u32)
            .filter(|&n| n <= crate::hilbert::MAX_SPARSE_DIM)
            .ok_or_else(|| Error::capacity("dense MPS contraction", format!("{d}^{}", self.len()), crate::hilbert::MAX_SPARSE_DIM))?;
        // rows: basis prefix (site 0 most significant), cols: open right bond
        let mut acc = DMatrix::<T>::from_element(1, 1, T::one());
        for t in &self.tensors {
            let prefix = acc.nrows();
            let mut next = DMatrix::<T>::zeros(prefix * t.d, t.dr);
            for s in 0..t.d {
                let block = &acc * t.slice(s);
                for p in 0..prefix {
                    next.row_mut(p * t.d + s).copy_from(&block.row(p));
                }
            }
            acc = next;
        }
        debug_assert_eq!(acc.nrows(), dim);
        PureState::from_real(acc.column(0).as_slice())
    }

    /// Gram matrices of the left blocks: `left[i]` contracts sites `0..i`.
    fn left_grams(&self) -> Vec<DMatrix<T>> {
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(DMatrix::identity(1, 1));
        for t in &self.tensors {
            let next = transfer_left(out.last().expect("seeded"), t, t);
            out.push(next);
        }
        out
    }

    /// `right[i]` contracts sites `i..L`.
    fn right_grams(&self) -> Vec<DMatrix<T>> {
        let n = self.len();
        let mut out = vec![DMatrix::identity(1, 1); n + 1];
        for i in (0..n).rev() {
            out[i] = transfer_right(&out[i + 1], &self.tensors[i], &self.tensors[i]);
        }
        out
    }

    /// Reduced density matrix of adjacent sites `(i, i + 1)`.
    pub fn rdm(&self, sites: (usize, usize)) -> Result<DensityMatrix<T>> {
        let (i, j) = sites;
        if j != i + 1 || j >= self.len() {
            return Err(Error::Unsupported(format!(
                "MPS reduced density matrices need adjacent sites inside the chain, got ({i}, {j})"
            )));
        }
        let d = self.local_dim();
        let left = &self.left_grams()[i];
        let right = &self.right_grams()[j + 1];
        let theta = |s1: usize, s2: usize| self.tensors[i].slice(s1) * self.tensors[j].slice(s2);
        let thetas: Vec<DMatrix<T>> = (0..d * d).map(|k| theta(k / d, k % d)).collect();
        let dressed: Vec<DMatrix<T>> = thetas.iter().map(|t| left * t * right).collect();
        let mut rho = DMatrix::zeros(d * d, d * d);
        for r in 0..d * d {
            for c in 0..d * d {
                rho[(r, c)] = cx(thetas[r].dot(&dressed[c]));
            }
        }
        let tr = rho.trace();
        DensityMatrix::new(vec![d, d], rho / tr)
    }

    /// `<O_site>` for a real local operator.
    pub fn local_expectation(&self, site: usize, op: &DMatrix<T>) -> Result<T> {
        let d = self.local_dim();
        if site >= self.len() {
            return Err(Error::InvalidSpec(format!("site {site} outside the chain")));
        }
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: op.nrows(),
            });
        }
        let left = &self.left_grams()[site];
        let right = &self.right_grams()[site + 1];
        let t = &self.tensors[site];
        let slices: Vec<DMatrix<T>> = (0..d).map(|s| t.slice(s)).collect();
        let mut num = T::zero();
        let mut den = T::zero();
        for s in 0..d {
            let dressed = left * &slices[s] * right;
            den += slices[s].dot(&dressed);
            for u in 0..d {
                let o = op[(u, s)];
                if o != T::zero() {
                    num += o * slices[u].dot(&dressed);
                }
            }
        }
        Ok(num / den)
    }
}

/// `E'[b, b'] = sum_{a, a', s} A[a, s, b] E[a, a'] B[a', s, b']`.
pub(crate) fn transfer_left<T: Real>(env: &DMatrix<T>, a: &Tensor3<T>, b: &Tensor3<T>) -> DMatrix<T> {
    let x = env * b.right_grouped();
    let x = DMatrixView::from_slice(x.as_slice(), a.dl * a.d, b.dr).into_owned();
    a.left_grouped().transpose() * x
}

/// `E'[a, a'] = sum_{b, b', s} A[a, s, b] E[b, b'] B[a', s, b']`.
pub(crate) fn transfer_right<T: Real>(env: &DMatrix<T>, a: &Tensor3<T>, b: &Tensor3<T>) -> DMatrix<T> {
    let x = b.left_grouped() * env.transpose();
    let x = DMatrixView::from_slice(x.as_slice(), b.dl, b.d * a.dr).into_owned();
    a.right_grouped() * x.transpose()
}
