//! Spin operators and the two chain Hamiltonians over the full product basis.
//!
//! Basis convention: a basis index encodes the local states big-endian, so
//! site 0 (the left chain end) is the most significant digit. Spin-1/2 uses
//! the sigma^z eigenbasis with `|up> -> 0`, `|down> -> 1`; spin-1 uses
//! `m = +1, 0, -1 -> 0, 1, 2`. Sites are 0-based throughout the API.
//!
//! Boundary conditions are open: bond terms couple `(i, i+1)` for
//! `i = 0..L-1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Cx, Real};

/// Largest Hilbert dimension accepted for sparse construction.
pub const MAX_SPARSE_DIM: usize = 1 << 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    /// `H = -J sum sx sx - Bz sum sz - Bx sum sx` (Pauli matrices).
    #[serde(rename = "ising_half")]
    IsingHalf,
    /// `H = sum [Sx Sx + Sy Sy + Jz Sz Sz] + D sum (Sz)^2 + Bz sum Sz + Bst sum (-1)^i Sz`.
    #[serde(rename = "xxz_spin1")]
    XxzSpin1,
}

impl Model {
    pub fn local_dim(self) -> usize {
        match self {
            Model::IsingHalf => 2,
            Model::XxzSpin1 => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Model::IsingHalf => "ising_half",
            Model::XxzSpin1 => "xxz_spin1",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ising_half" | "IsingHalf" => Ok(Model::IsingHalf),
            "xxz_spin1" | "XXZSpin1" | "XxzSpin1" => Ok(Model::XxzSpin1),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// A named Hamiltonian parameter. Sweeps vary exactly one of these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Field {
    J,
    Bz,
    Bx,
    Jz,
    D,
    BzUniform,
    BzStaggered,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::J,
        Field::Bz,
        Field::Bx,
        Field::Jz,
        Field::D,
        Field::BzUniform,
        Field::BzStaggered,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::J => "J",
            Field::Bz => "Bz",
            Field::Bx => "Bx",
            Field::Jz => "Jz",
            Field::D => "D",
            Field::BzUniform => "Bz_uniform",
            Field::BzStaggered => "Bz_st",
        }
    }

    /// Whether the parameter enters the Hamiltonian of `model`.
    pub fn applies_to(self, model: Model) -> bool {
        match model {
            Model::IsingHalf => matches!(self, Field::J | Field::Bz | Field::Bx),
            Model::XxzSpin1 => matches!(
                self,
                Field::Jz | Field::D | Field::BzUniform | Field::BzStaggered
            ),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Field::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown field `{s}`")))
    }
}

impl TryFrom<String> for Field {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Field> for String {
    fn from(f: Field) -> String {
        f.as_str().to_owned()
    }
}

/// Model identity, length and couplings: the single source of truth for a
/// Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinChainSpec<T> {
    pub model: Model,
    pub length: usize,
    pub j: T,
    pub bz: T,
    pub bx: T,
    pub jz: T,
    pub d: T,
    pub bz_uniform: T,
    pub bz_staggered: T,
}

impl<T: Real> SpinChainSpec<T> {
    /// Spin-1/2 Ising chain with `J = 1`.
    pub fn ising_half(length: usize, bz: T, bx: T) -> Self {
        Self {
            model: Model::IsingHalf,
            length,
            j: T::one(),
            bz,
            bx,
            jz: T::zero(),
            d: T::zero(),
            bz_uniform: T::zero(),
            bz_staggered: T::zero(),
        }
    }

    /// Spin-1 XXZ chain with single-ion anisotropy and no fields.
    pub fn xxz_spin1(length: usize, jz: T, d: T) -> Self {
        Self {
            model: Model::XxzSpin1,
            length,
            j: T::zero(),
            bz: T::zero(),
            bx: T::zero(),
            jz,
            d,
            bz_uniform: T::zero(),
            bz_staggered: T::zero(),
        }
    }

    pub fn with_staggered_field(mut self, b: T) -> Self {
        self.bz_staggered = b;
        self
    }

    pub fn with_uniform_field(mut self, b: T) -> Self {
        self.bz_uniform = b;
        self
    }

    pub fn with_length(mut self, length: usize) -> Self {
        self.length = length;
        self
    }

    pub fn get(&self, field: Field) -> T {
        match field {
            Field::J => self.j,
            Field::Bz => self.bz,
            Field::Bx => self.bx,
            Field::Jz => self.jz,
            Field::D => self.d,
            Field::BzUniform => self.bz_uniform,
            Field::BzStaggered => self.bz_staggered,
        }
    }

    pub fn with(&self, field: Field, value: T) -> Self {
        let mut s = self.clone();
        match field {
            Field::J => s.j = value,
            Field::Bz => s.bz = value,
            Field::Bx => s.bx = value,
            Field::Jz => s.jz = value,
            Field::D => s.d = value,
            Field::BzUniform => s.bz_uniform = value,
            Field::BzStaggered => s.bz_staggered = value,
        }
        s
    }

    pub fn local_dim(&self) -> usize {
        self.model.local_dim()
    }

    /// `d^L`, or `None` on overflow.
    pub fn hilbert_dim(&self) -> Option<usize> {
        self.local_dim().checked_pow(u32::try_from(self.length).ok()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::InvalidSpec(format!(
                "chain length must be at least 2, got {}",
                self.length
            )));
        }
        for field in Field::ALL {
            let v = self.get(field);
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{field} is not finite")));
            }
            if !field.applies_to(self.model) && v != T::zero() {
                return Err(Error::InvalidSpec(format!(
                    "{field} = {v} is not a parameter of {}",
                    self.model
                )));
            }
        }
        match self.model {
            Model::IsingHalf if self.bz < T::zero() => Err(Error::InvalidSpec(format!(
                "transverse field must be >= 0, got {}",
                self.bz
            ))),
            Model::XxzSpin1 if self.d < T::zero() => Err(Error::InvalidSpec(format!(
                "anisotropy D must be >= 0, got {}",
                self.d
            ))),
            _ => Ok(()),
        }
    }

    /// Weight `(-1)^i` of 1-based site `i`; site 0 of the API gets `-1`.
    pub fn staggered_sign(site: usize) -> T {
        if site.is_multiple_of(2) {
            -T::one()
        } else {
            T::one()
        }
    }

    /// Bond and single-site terms of the Hamiltonian.
    pub fn terms(&self) -> Result<LocalTerms<T>> {
        self.validate()?;
        let l = self.length;
        Ok(match self.model {
            Model::IsingHalf => {
                let (sx, sz) = (ops::pauli_x(), ops::pauli_z());
                let bond = vec![ProductTerm {
                    coeff: -self.j,
                    left: sx.clone(),
                    right: sx.clone(),
                }];
                let site = &sz * (-self.bz) + &sx * (-self.bx);
                LocalTerms {
                    local_dim: 2,
                    bonds: vec![bond; l - 1],
                    sites: vec![site; l],
                }
            }
            Model::XxzSpin1 => {
                let (sp, sm, sz) = (ops::spin1_plus(), ops::spin1_minus(), ops::spin1_z());
                let half = T::lit(0.5);
                // Sx Sx + Sy Sy = (S+ S- + S- S+) / 2
                let bond = vec![
                    ProductTerm {
                        coeff: half,
                        left: sp.clone(),
                        right: sm.clone(),
                    },
                    ProductTerm {
                        coeff: half,
                        left: sm.clone(),
                        right: sp.clone(),
                    },
                    ProductTerm {
                        coeff: self.jz,
                        left: sz.clone(),
                        right: sz.clone(),
                    },
                ];
                let sz2 = &sz * &sz;
                let sites = (0..l)
                    .map(|i| {
                        let field = self.bz_uniform + self.bz_staggered * Self::staggered_sign(i);
                        &sz2 * self.d + &sz * field
                    })
                    .collect();
                LocalTerms {
                    local_dim: 3,
                    bonds: vec![bond; l - 1],
                    sites,
                }
            }
        })
    }
}

/// `coeff * left (x) right` acting on a nearest-neighbour pair.
#[derive(Clone, Debug)]
pub struct ProductTerm<T: Real> {
    pub coeff: T,
    pub left: DMatrix<T>,
    pub right: DMatrix<T>,
}

/// Hamiltonian as a list of local pieces. The sparse builder, the MPO
/// builder and the energy reconstruction all consume this one list.
#[derive(Clone, Debug)]
pub struct LocalTerms<T: Real> {
    pub local_dim: usize,
    /// `bonds[i]` acts on sites `(i, i+1)`.
    pub bonds: Vec<Vec<ProductTerm<T>>>,
    /// `sites[i]` acts on site `i`.
    pub sites: Vec<DMatrix<T>>,
}

impl<T: Real> LocalTerms<T> {
    pub fn length(&self) -> usize {
        self.sites.len()
    }

    /// Dense `d^2 x d^2` matrix of bond `i`, left site most significant.
    pub fn bond_matrix(&self, i: usize) -> DMatrix<T> {
        let d = self.local_dim;
        let mut h = DMatrix::zeros(d * d, d * d);
        for term in &self.bonds[i] {
            h += term.left.kronecker(&term.right) * term.coeff;
        }
        h
    }
}

/// Hermitian operator over the full product basis in compressed-row form.
///
/// Rows are sorted and duplicate coordinates summed at construction, so the
/// matrix-vector product visits entries in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseOperator<T> {
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        // drop entries that cancelled exactly
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != T::zero() {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            dim,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, T::one())).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or(T::zero(), |(_, v)| v)
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn apply_complex(&self, x: &[Cx<T>], y: &mut [Cx<T>]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = Cx::new(T::zero(), T::zero());
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.col_idx[k]] * self.values[k];
            }
            *yr = acc;
        }
    }

    /// `H + c * I`.
    pub fn shifted(&self, c: T) -> Self {
        let mut t: Vec<_> = self.triplets().collect();
        t.extend((0..self.dim).map(|i| (i, i, c)));
        Self::from_triplets(self.dim, t)
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!(self.dim, other.dim);
        let t = self
            .triplets()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, b * v)))
            .collect();
        Self::from_triplets(self.dim, t)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest `|H_rc - H_cr|`.
    pub fn hermiticity_defect(&self) -> T {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

fn checked_dim<T: Real>(spec: &SpinChainSpec<T>) -> Result<usize> {
    match spec.hilbert_dim() {
        Some(dim) if dim <= MAX_SPARSE_DIM => Ok(dim),
        _ => Err(Error::capacity(
            "sparse Hamiltonian",
            format!("{}^{}", spec.local_dim(), spec.length),
            MAX_SPARSE_DIM,
        )),
    }
}

/// Assembles the sparse matrix of a local-term list over `d^L` states.
pub fn assemble<T: Real>(terms: &LocalTerms<T>) -> SparseOperator<T> {
    let d = terms.local_dim;
    let l = terms.length();
    let dim = d.pow(l as u32);
    let stride = |site: usize| d.pow((l - 1 - site) as u32);
    let mut triplets = Vec::new();
    let mut digits = vec![0usize; l];
    for col in 0..dim {
        let mut rem = col;
        for site in (0..l).rev() {
            digits[site] = rem % d;
            rem /= d;
        }
        for (site, h) in terms.sites.iter().enumerate() {
            let s = digits[site];
            let base = col - s * stride(site);
            for t in 0..d {
                let v = h[(t, s)];
                if v != T::zero() {
                    triplets.push((base + t * stride(site), col, v));
                }
            }
        }
        for (bond, pieces) in terms.bonds.iter().enumerate() {
            let (s1, s2) = (digits[bond], digits[bond + 1]);
            let (st1, st2) = (stride(bond), stride(bond + 1));
            let base = col - s1 * st1 - s2 * st2;
            for term in pieces {
                for t1 in 0..d {
                    let a = term.left[(t1, s1)];
                    if a == T::zero() {
                        continue;
                    }
                    for t2 in 0..d {
                        let b = term.right[(t2, s2)];
                        if b != T::zero() {
                            triplets.push((base + t1 * st1 + t2 * st2, col, term.coeff * a * b));
                        }
                    }
                }
            }
        }
    }
    SparseOperator::from_triplets(dim, triplets)
}

/// `H = -J sum_{i<L} sx_i sx_{i+1} - Bz sum sz_i - Bx sum sx_i`.
pub fn build_ising_half<T: Real>(spec: &SpinChainSpec<T>) -> Result<SparseOperator<T>> {
    if spec.model != Model::IsingHalf {
        return Err(Error::InvalidSpec(format!(
            "expected ising_half, got {}",
            spec.model
        )));
    }
    checked_dim(spec)?;
    Ok(assemble(&spec.terms()?))
}

/// `H = sum [Sx Sx + Sy Sy + Jz Sz Sz] + D sum Sz^2 + Bz sum Sz + Bst sum (-1)^i Sz`.
pub fn build_xxz_spin1<T: Real>(spec: &SpinChainSpec<T>) -> Result<SparseOperator<T>> {
    if spec.model != Model::XxzSpin1 {
        return Err(Error::InvalidSpec(format!(
            "expected xxz_spin1, got {}",
            spec.model
        )));
    }
    checked_dim(spec)?;
    Ok(assemble(&spec.terms()?))
}

pub fn build_hamiltonian<T: Real>(spec: &SpinChainSpec<T>) -> Result<SparseOperator<T>> {
    match spec.model {
        Model::IsingHalf => build_ising_half(spec),
        Model::XxzSpin1 => build_xxz_spin1(spec),
    }
}

/// Global symmetry operator that flips the sign of the symmetry-breaking
/// field.
///
/// * Ising: `U = prod_i sz_i`, so `U H(Bx) U = H(-Bx)`.
/// * Spin-1: the global spin flip `m -> -m` on every site (a permutation,
///   equal to `exp(-i pi sum Sx)` up to a global phase). It maps
///   `(Bz_uniform, Bz_st) -> (-Bz_uniform, -Bz_st)` and leaves the exchange and
///   anisotropy terms invariant, so `U H(Bst) U = H(-Bst)` whenever the
///   uniform field vanishes.
///
/// `U` is real, symmetric and squares to the identity.
pub fn site_parity_flip<T: Real>(spec: &SpinChainSpec<T>) -> Result<SparseOperator<T>> {
    spec.validate()?;
    let dim = checked_dim(spec)?;
    let d = spec.local_dim();
    let l = spec.length;
    let triplets = (0..dim)
        .map(|col| {
            let mut rem = col;
            let mut row = 0usize;
            let mut sign = T::one();
            let mut place = 1usize;
            for _ in 0..l {
                let s = rem % d;
                rem /= d;
                match spec.model {
                    Model::IsingHalf => {
                        if s == 1 {
                            sign = -sign;
                        }
                        row += s * place;
                    }
                    Model::XxzSpin1 => row += (2 - s) * place,
                }
                place *= d;
            }
            (row, col, sign)
        })
        .collect();
    Ok(SparseOperator::from_triplets(dim, triplets))
}

/// Local spin matrices in the basis convention of this module.
pub mod ops {
    use nalgebra::DMatrix;

    use crate::scalar::{Cx, Real};

    pub fn pauli_x<T: Real>() -> DMatrix<T> {
        DMatrix::from_row_slice(2, 2, &[T::zero(), T::one(), T::one(), T::zero()])
    }

    pub fn pauli_z<T: Real>() -> DMatrix<T> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![T::one(), -T::one()]))
    }

    pub fn pauli_y<T: Real>() -> DMatrix<Cx<T>> {
        let z = Cx::new(T::zero(), T::zero());
        let i = Cx::new(T::zero(), T::one());
        DMatrix::from_row_slice(2, 2, &[z, -i, i, z])
    }

    pub fn spin1_z<T: Real>() -> DMatrix<T> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            T::one(),
            T::zero(),
            -T::one(),
        ]))
    }

    /// `S+`, with `S+ |m> = sqrt(2) |m+1>` for spin 1.
    pub fn spin1_plus<T: Real>() -> DMatrix<T> {
        let r = T::lit(2.0).sqrt();
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 1)] = r;
        m[(1, 2)] = r;
        m
    }

    pub fn spin1_minus<T: Real>() -> DMatrix<T> {
        spin1_plus::<T>().transpose()
    }

    pub fn spin1_x<T: Real>() -> DMatrix<T> {
        (spin1_plus::<T>() + spin1_minus::<T>()) * T::lit(0.5)
    }

    pub fn spin1_y<T: Real>() -> DMatrix<Cx<T>> {
        let diff = spin1_plus::<T>() - spin1_minus::<T>();
        // (S+ - S-) / 2i
        diff.map(|v| Cx::new(T::zero(), -v * T::lit(0.5)))
    }

    pub fn to_complex<T: Real>(m: &DMatrix<T>) -> DMatrix<Cx<T>> {
        m.map(|v| Cx::new(v, T::zero()))
    }
}
