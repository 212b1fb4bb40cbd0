//! Matrix product operators built from the shared local term list.

use nalgebra::DMatrix;

use crate::hilbert::LocalTerms;
use crate::scalar::Real;

use super::mps::{MatrixProductState, Tensor3};

/// Nonzero entries `(s, t, value)` of a local operator, `s` the output index.
#[derive(Clone, Debug)]
pub(crate) struct SparseLocal<T> {
    pub entries: Vec<(usize, usize, T)>,
}

impl<T: Real> SparseLocal<T> {
    fn new(op: &DMatrix<T>) -> Self {
        let mut entries = Vec::new();
        for t in 0..op.ncols() {
            for s in 0..op.nrows() {
                let v = op[(s, t)];
                if v != T::zero() {
                    entries.push((s, t, v));
                }
            }
        }
        Self { entries }
    }
}

/// One MPO site: a sparse `wl x wr` array of local operators.
#[derive(Clone, Debug)]
pub struct MpoSite<T> {
    pub wl: usize,
    pub wr: usize,
    pub(crate) ops: Vec<(usize, usize, SparseLocal<T>)>,
}

impl<T: Real> MpoSite<T> {
    fn from_full(
        full: Vec<(usize, usize, DMatrix<T>)>,
        wl: usize,
        wr: usize,
        keep_left: Option<usize>,
        keep_right: Option<usize>,
    ) -> Self {
        let ops = full
            .into_iter()
            .filter(|(a, b, op)| {
                keep_left.is_none_or(|k| *a == k)
                    && keep_right.is_none_or(|k| *b == k)
                    && op.iter().any(|v| *v != T::zero())
            })
            .map(|(a, b, op)| {
                let a = if keep_left.is_some() { 0 } else { a };
                let b = if keep_right.is_some() { 0 } else { b };
                (a, b, SparseLocal::new(&op))
            })
            .collect();
        Self {
            wl: if keep_left.is_some() { 1 } else { wl },
            wr: if keep_right.is_some() { 1 } else { wr },
            ops,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatrixProductOperator<T> {
    pub(crate) sites: Vec<MpoSite<T>>,
    pub local_dim: usize,
}

impl<T: Real> MatrixProductOperator<T> {
    /// Finite-state MPO of `sum_bonds h_{i,i+1} + sum_sites h_i`.
    ///
    /// Index 0 means "nothing placed yet", 1 means "complete", and `2 + k`
    /// carries the right factor of the k-th product term of the bond.
    pub fn from_terms(terms: &LocalTerms<T>) -> Self {
        let l = terms.length();
        let d = terms.local_dim;
        let id = DMatrix::<T>::identity(d, d);
        let bond_width = |b: usize| 2 + terms.bonds[b].len();
        let sites = (0..l)
            .map(|i| {
                let wl = if i == 0 { 2 } else { bond_width(i - 1) };
                let wr = if i + 1 == l { 2 } else { bond_width(i) };
                let mut full = vec![(0, 1, terms.sites[i].clone())];
                if i + 1 < l {
                    full.push((0, 0, id.clone()));
                    for (k, term) in terms.bonds[i].iter().enumerate() {
                        full.push((0, 2 + k, &term.left * term.coeff));
                    }
                }
                if i > 0 {
                    full.push((1, 1, id.clone()));
                    for (k, term) in terms.bonds[i - 1].iter().enumerate() {
                        full.push((2 + k, 1, term.right.clone()));
                    }
                }
                MpoSite::from_full(
                    full,
                    wl,
                    wr,
                    (i == 0).then_some(0),
                    (i + 1 == l).then_some(1),
                )
            })
            .collect();
        Self { sites, local_dim: d }
    }

    /// MPO of `(sum_i w_i O_i)^2`.
    pub fn squared_site_sum(op: &DMatrix<T>, weights: &[T]) -> Self {
        let l = weights.len();
        let d = op.nrows();
        let id = DMatrix::<T>::identity(d, d);
        let op2 = op * op;
        let sites = (0..l)
            .map(|i| {
                let w = weights[i];
                let full = vec![
                    (0, 0, id.clone()),
                    (1, 1, id.clone()),
                    (2, 2, id.clone()),
                    // cross terms appear once per ordered pair i < j
                    (0, 1, op * (w + w)),
                    (1, 2, op * w),
                    (0, 2, &op2 * (w * w)),
                ];
                MpoSite::from_full(full, 3, 3, (i == 0).then_some(0), (i + 1 == l).then_some(2))
            })
            .collect();
        Self { sites, local_dim: d }
    }

    /// MPO of `sum_i w_i O_i`.
    pub fn site_sum(op: &DMatrix<T>, weights: &[T]) -> Self {
        let l = weights.len();
        let d = op.nrows();
        let id = DMatrix::<T>::identity(d, d);
        let sites = (0..l)
            .map(|i| {
                let full = vec![(0, 0, id.clone()), (1, 1, id.clone()), (0, 1, op * weights[i])];
                MpoSite::from_full(full, 2, 2, (i == 0).then_some(0), (i + 1 == l).then_some(1))
            })
            .collect();
        Self { sites, local_dim: d }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|s| s.wr).collect()
    }

    /// Dense matrix over the big-endian product basis (small chains only).
    pub fn to_dense(&self) -> DMatrix<T> {
        let d = self.local_dim;
        // acc[w] is the operator accumulated on the sites so far, open MPO index w
        let mut acc: Vec<DMatrix<T>> = vec![DMatrix::identity(1, 1)];
        for site in &self.sites {
            let n = acc[0].nrows();
            let mut next = vec![DMatrix::<T>::zeros(n * d, n * d); site.wr];
            for (a, b, op) in &site.ops {
                let mut local = DMatrix::<T>::zeros(d, d);
                for &(s, t, v) in &op.entries {
                    local[(s, t)] = v;
                }
                next[*b] += acc[*a].kronecker(&local);
            }
            acc = next;
        }
        acc.swap_remove(0)
    }

    /// `<psi|W|psi> / <psi|psi>`.
    pub fn expectation(&self, psi: &MatrixProductState<T>) -> T {
        let mut env = vec![DMatrix::<T>::identity(1, 1)];
        for (site, t) in self.sites.iter().zip(&psi.tensors) {
            env = left_update(&env, site, t, t);
        }
        env[0][(0, 0)] / psi.norm().powi(2)
    }
}

/// `dst[i, s, o] += sum_t op[s, t] src[i, t, o]` with column-major
/// `(inner, d, outer)` layout.
pub(crate) fn apply_physical<T: Real>(
    op: &SparseLocal<T>,
    src: &[T],
    dst: &mut [T],
    inner: usize,
    d: usize,
    outer: usize,
) {
    for o in 0..outer {
        for &(s, t, v) in &op.entries {
            let from = inner * (t + d * o);
            let to = inner * (s + d * o);
            for k in 0..inner {
                dst[to + k] += v * src[from + k];
            }
        }
    }
}

/// Left environment update; `env[w]` is a `bra x ket` bond matrix.
pub(crate) fn left_update<T: Real>(
    env: &[DMatrix<T>],
    site: &MpoSite<T>,
    bra: &Tensor3<T>,
    ket: &Tensor3<T>,
) -> Vec<DMatrix<T>> {
    let d = ket.d;
    let dr = ket.dr;
    let x: Vec<Option<DMatrix<T>>> = env
        .iter()
        .enumerate()
        .map(|(w, e)| site.ops.iter().any(|(a, _, _)| *a == w).then(|| e * ket.right_grouped()))
        .collect();
    let mut v = vec![vec![T::zero(); bra.dl * d * dr]; site.wr];
    for (a, b, op) in &site.ops {
        let src = x[*a].as_ref().expect("computed for used indices");
        apply_physical(op, src.as_slice(), &mut v[*b], bra.dl, d, dr);
    }
    v.into_iter()
        .map(|buf| {
            let vm = DMatrix::from_vec(bra.dl * d, dr, buf);
            bra.left_grouped().transpose() * vm
        })
        .collect()
}

/// Right environment update; `env[w]` is a `bra x ket` bond matrix.
pub(crate) fn right_update<T: Real>(
    env: &[DMatrix<T>],
    site: &MpoSite<T>,
    bra: &Tensor3<T>,
    ket: &Tensor3<T>,
) -> Vec<DMatrix<T>> {
    let d = ket.d;
    let y: Vec<Option<DMatrix<T>>> = env
        .iter()
        .enumerate()
        .map(|(w, e)| site.ops.iter().any(|(_, b, _)| *b == w).then(|| ket.left_grouped() * e.transpose()))
        .collect();
    let mut v = vec![vec![T::zero(); ket.dl * d * bra.dr]; site.wl];
    for (a, b, op) in &site.ops {
        let src = y[*b].as_ref().expect("computed for used indices");
        apply_physical(op, src.as_slice(), &mut v[*a], ket.dl, d, bra.dr);
    }
    v.into_iter()
        .map(|buf| {
            let vm = DMatrix::from_vec(ket.dl, d * bra.dr, buf);
            bra.right_grouped() * vm.transpose()
        })
        .collect()
}
