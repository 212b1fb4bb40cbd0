//! Two-site entanglement measures and labelled matrix elements.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hilbert::ops;
use crate::measure::DensityMatrix;
use crate::scalar::{cx, Cx, Real};

/// Negative eigenvalues of `rho` down to this size are treated as zero.
pub const EIGEN_CLAMP: f64 = 1e-10;

fn require_pair<T: Real>(rho: &DensityMatrix<T>) -> Result<(usize, usize)> {
    match rho.dims() {
        [a, b] => Ok((*a, *b)),
        dims => Err(Error::DimensionMismatch {
            expected: 2,
            found: dims.len(),
        }),
    }
}

/// Wootters concurrence of a two-qubit state.
///
/// With `rho~ = (sy x sy) rho* (sy x sy)`, the `lambda_i` are the square
/// roots of the eigenvalues of `rho rho~`. They are computed without forming
/// that product: writing `rho = X X^dagger` (from the eigendecomposition of
/// `rho`), the nonzero spectrum of `rho rho~` equals that of `tau^dagger tau`
/// with `tau = X^T (sy x sy) X`, so the `lambda_i` are the singular values of
/// `tau`. Taking square roots of tiny eigenvalues of `rho rho~` would turn
/// rounding noise of order `eps` into errors of order `sqrt(eps)` for
/// rank-deficient (e.g. pure) states; the singular values carry only `eps`.
/// `C = max(0, l1 - l2 - l3 - l4)` with the `l_i` in decreasing order.
pub fn concurrence<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    let (a, b) = require_pair(rho)?;
    if (a, b) != (2, 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: a.max(b),
        });
    }
    rho.validate()?;
    let m = rho.matrix();
    let eig = SymmetricEigen::new((m + m.adjoint()) * cx(T::lit(0.5)));
    let clamp = T::tol(EIGEN_CLAMP);
    let mut x = eig.eigenvectors.clone();
    for (k, &p) in eig.eigenvalues.iter().enumerate() {
        if p < -clamp {
            return Err(Error::InvalidState(format!("rho has negative eigenvalue {p}")));
        }
        let w = cx(p.max(T::zero()).sqrt());
        x.column_mut(k).iter_mut().for_each(|z| *z *= w);
    }
    let sy = ops::pauli_y::<T>();
    let yy = sy.kronecker(&sy);
    let tau = x.transpose() * yy * &x;
    let mut lambdas: Vec<T> = tau.singular_values().iter().copied().collect();
    lambdas.sort_by(|p, q| q.partial_cmp(p).expect("finite singular values"));
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.max(T::zero()).min(T::one()))
}

/// `rho^{T_B}`: transpose on the second subsystem.
pub fn partial_transpose<T: Real>(rho: &DensityMatrix<T>) -> Result<DMatrix<Cx<T>>> {
    let (da, db) = require_pair(rho)?;
    let m = rho.matrix();
    let n = da * db;
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let (a, b) = (r / db, r % db);
        let (ap, bp) = (c / db, c % db);
        m[(a * db + bp, ap * db + b)]
    }))
}

/// `N = (||rho^{T_B}||_1 - 1) / 2`, with the partial transpose on the second
/// subsystem. The trace norm is the sum of absolute eigenvalues of the
/// Hermitian `rho^{T_B}`.
pub fn negativity<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    let pt = partial_transpose(rho)?;
    let herm = (&pt + pt.adjoint()) * cx(T::lit(0.5));
    let eig = SymmetricEigen::new(herm);
    let trace_norm = eig.eigenvalues.iter().fold(T::zero(), |s, e| s + e.abs());
    Ok((trace_norm - T::one()) * T::lit(0.5))
}

fn parse_label(label: &str, dims: &[usize]) -> Result<usize> {
    let bad = || Error::BadLabel(label.to_string());
    let digits: Vec<usize> = label
        .chars()
        .filter(|ch| !matches!(ch, '|' | '<' | '>' | '⟨' | '⟩' | ',' | ' '))
        .zip(dims.iter().chain(std::iter::repeat(&0)))
        .map(|(ch, &d)| match (d, ch) {
            (2, 'u' | 'U' | '↑') => Ok(0),
            (2, 'd' | 'D' | '↓') => Ok(1),
            (3, '+' | 'p' | 'P') => Ok(0),
            (3, '0' | 'z' | 'Z') => Ok(1),
            (3, '-' | 'm' | 'M') => Ok(2),
            _ => Err(bad()),
        })
        .collect::<Result<_>>()?;
    if digits.len() != dims.len() {
        return Err(bad());
    }
    Ok(digits
        .iter()
        .zip(dims)
        .fold(0, |acc, (&s, &d)| acc * d + s))
}

/// `<bra| rho |ket>` with product-basis labels: `u`/`d` (or arrows) for
/// spin-1/2 and `+`/`0`/`-` for spin-1, one symbol per subsystem, e.g.
/// `rdm_element(rho, "uu", "ud")`.
pub fn rdm_element<T: Real>(rho: &DensityMatrix<T>, bra: &str, ket: &str) -> Result<Cx<T>> {
    let r = parse_label(bra, rho.dims())?;
    let c = parse_label(ket, rho.dims())?;
    Ok(rho.matrix()[(r, c)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::seeded_start;
    use proptest::prelude::*;

    fn c(x: f64) -> Cx<f64> {
        cx(x)
    }

    fn pure(dims: Vec<usize>, psi: Vec<Cx<f64>>) -> DensityMatrix<f64> {
        DensityMatrix::from_pure(dims, &psi).unwrap()
    }

    fn bell() -> DensityMatrix<f64> {
        let s = 0.5f64.sqrt();
        pure(vec![2, 2], vec![c(s), c(0.0), c(0.0), c(s)])
    }

    fn werner(p: f64) -> DensityMatrix<f64> {
        let m = bell().matrix() * c(p) + DMatrix::identity(4, 4) * c((1.0 - p) / 4.0);
        DensityMatrix::new(vec![2, 2], m).unwrap()
    }

    /// Hermitian route: eigenvalues of sqrt(sqrt(rho) rho~ sqrt(rho)).
    fn concurrence_oracle(rho: &DensityMatrix<f64>) -> f64 {
        let sqrtm = |m: &DMatrix<Cx<f64>>| {
            let e = SymmetricEigen::new(m.clone());
            let d = DMatrix::from_diagonal(&e.eigenvalues.map(|x| c(x.max(0.0).sqrt())));
            &e.eigenvectors * d * e.eigenvectors.adjoint()
        };
        let sy = ops::pauli_y::<f64>();
        let yy = sy.kronecker(&sy);
        let m = rho.matrix();
        let tilde = &yy * m.map(|z| z.conj()) * &yy;
        let s = sqrtm(m);
        let inner = &s * tilde * &s;
        let inner = (&inner + inner.adjoint()) * c(0.5);
        let mut l: Vec<f64> = SymmetricEigen::new(inner)
            .eigenvalues
            .iter()
            .map(|x| x.max(0.0).sqrt())
            .collect();
        l.sort_by(|a, b| b.partial_cmp(a).unwrap());
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    /// Square roots of the eigenvalues of the non-Hermitian product rho rho~.
    fn concurrence_product_route(rho: &DensityMatrix<f64>) -> f64 {
        let sy = ops::pauli_y::<f64>();
        let yy = sy.kronecker(&sy);
        let m = rho.matrix();
        let tilde = &yy * m.map(|z| z.conj()) * &yy;
        let mut l: Vec<f64> = (m * tilde)
            .schur()
            .eigenvalues()
            .unwrap()
            .iter()
            .map(|mu| mu.re.max(0.0).sqrt())
            .collect();
        l.sort_by(|a, b| b.partial_cmp(a).unwrap());
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    fn random_pure(dim: usize, seed: u64) -> Vec<Cx<f64>> {
        let re = seeded_start::<f64>(dim, seed);
        let im = seeded_start::<f64>(dim, seed.wrapping_mul(31).wrapping_add(17));
        let v: Vec<Cx<f64>> = re.iter().zip(&im).map(|(&a, &b)| Cx::new(a, b)).collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / n).collect()
    }

    fn random_mixed(dims: Vec<usize>, seed: u64) -> DensityMatrix<f64> {
        let n: usize = dims.iter().product();
        let a = DMatrix::from_fn(n, n, |r, col| {
            let v = random_pure(n * n, seed);
            v[r * n + col]
        });
        let m = &a * a.adjoint();
        let tr = m.trace();
        DensityMatrix::new(dims, m / tr).unwrap()
    }

    fn random_unitary(n: usize, seed: u64) -> DMatrix<Cx<f64>> {
        let a = DMatrix::from_fn(n, n, |r, col| random_pure(n * n, seed)[r * n + col]);
        a.qr().q()
    }

    #[test]
    fn bell_state() {
        assert!((concurrence(&bell()).unwrap() - 1.0).abs() < 1e-10);
        assert!((negativity(&bell()).unwrap() - 0.5).abs() < 1e-12);
        assert!((rdm_element(&bell(), "uu", "dd").unwrap() - c(0.5)).norm() < 1e-12);
        assert!((rdm_element(&bell(), "|↑↑⟩", "|↓↓⟩").unwrap() - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn product_and_mixed_are_unentangled() {
        let up = pure(vec![2, 2], vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(concurrence(&up).unwrap(), 0.0);
        assert!(negativity(&up).unwrap().abs() < 1e-12);
        assert_eq!(rdm_element(&up, "uu", "uu").unwrap(), c(1.0));
        assert_eq!(rdm_element(&up, "uu", "ud").unwrap(), c(0.0));
        let mixed = DensityMatrix::new(vec![2, 2], DMatrix::identity(4, 4) * c(0.25)).unwrap();
        assert_eq!(concurrence(&mixed).unwrap(), 0.0);
        assert!(negativity(&mixed).unwrap().abs() < 1e-12);
        // classical mixture of |uu> and |dd>
        let mut m = DMatrix::zeros(4, 4);
        m[(0, 0)] = c(0.3);
        m[(3, 3)] = c(0.7);
        let classical = DensityMatrix::new(vec![2, 2], m).unwrap();
        assert!(concurrence(&classical).unwrap() < 1e-10);
        assert!(negativity(&classical).unwrap().abs() < 1e-12);
    }

    #[test]
    fn werner_state() {
        let rho = werner(0.8);
        assert!((concurrence(&rho).unwrap() - 0.7).abs() < 1e-10);
        assert!((concurrence_oracle(&rho) - 0.7).abs() < 1e-10);
        // separable below p = 1/3
        assert_eq!(concurrence(&werner(0.3)).unwrap(), 0.0);
    }

    #[test]
    fn spin_one_maximally_entangled() {
        let s = 1.0 / 3f64.sqrt();
        let mut psi = vec![c(0.0); 9];
        for m in 0..3 {
            psi[m * 3 + m] = c(s);
        }
        let rho = pure(vec![3, 3], psi);
        assert!((negativity(&rho).unwrap() - 1.0).abs() < 1e-12);
        assert!((rdm_element(&rho, "+-", "+-").unwrap()).norm() < 1e-15);
        assert!((rdm_element(&rho, "00", "--").unwrap() - c(1.0 / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn spin_one_product_has_no_negativity() {
        let mut psi = vec![c(0.0); 9];
        psi[2] = c(1.0);
        assert!(negativity(&pure(vec![3, 3], psi)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn labels_are_validated() {
        assert!(matches!(rdm_element(&bell(), "ux", "uu"), Err(Error::BadLabel(_))));
        assert!(matches!(rdm_element(&bell(), "u", "uu"), Err(Error::BadLabel(_))));
        assert!(matches!(rdm_element(&bell(), "+0", "uu"), Err(Error::BadLabel(_))));
    }

    #[test]
    fn concurrence_rejects_qutrits() {
        let rho = DensityMatrix::new(vec![3, 3], DMatrix::identity(9, 9) * c(1.0 / 9.0)).unwrap();
        assert!(matches!(concurrence(&rho), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn pure_two_qubit_relation() {
        for seed in 0..100u64 {
            let psi = random_pure(4, seed);
            let rho = pure(vec![2, 2], psi.clone());
            let cc = concurrence(&rho).unwrap();
            // closed form for pure states: 2 |a d - b c|
            let closed = 2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm();
            assert!((cc - closed).abs() < 1e-12, "seed {seed}");
            let n = negativity(&rho).unwrap();
            assert!((n - cc / 2.0).abs() < 1e-9, "seed {seed}: N={n}, C={cc}");
        }
    }

    #[test]
    fn single_precision_measures() {
        let s = 0.5f32.sqrt();
        let rho = DensityMatrix::from_pure(vec![2, 2], &[cx(s), cx(0.0), cx(0.0), cx(s)]).unwrap();
        assert!((concurrence(&rho).unwrap() - 1.0).abs() < 1e-3);
        assert!((negativity(&rho).unwrap() - 0.5).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn matches_hermitian_route(seed in any::<u64>()) {
            let rho = random_mixed(vec![2, 2], seed);
            let c = concurrence(&rho).unwrap();
            prop_assert!((c - concurrence_oracle(&rho)).abs() < 1e-9);
            // full-rank states keep the product route well conditioned
            prop_assert!((c - concurrence_product_route(&rho)).abs() < 1e-9);
        }

        #[test]
        fn local_unitary_invariance(seed in any::<u64>(), qutrit in any::<bool>()) {
            let d = if qutrit { 3 } else { 2 };
            let rho = random_mixed(vec![d, d], seed);
            let u = random_unitary(d, seed ^ 1).kronecker(&random_unitary(d, seed ^ 2));
            let rotated = DensityMatrix::new(vec![d, d], &u * rho.matrix() * u.adjoint()).unwrap();
            prop_assert!((negativity(&rho).unwrap() - negativity(&rotated).unwrap()).abs() < 1e-9);
            if d == 2 {
                prop_assert!((concurrence(&rho).unwrap() - concurrence(&rotated).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn negativity_bounds(seed in any::<u64>()) {
            let rho = random_mixed(vec![3, 3], seed);
            let n = negativity(&rho).unwrap();
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&n));
        }
    }
}
