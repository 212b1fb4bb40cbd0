//! Built-in oracle checks, run by `spinscale validate`.

use crate::eigensolve::{lowest_two, Method};
use crate::entanglement::{concurrence, negativity};
use crate::fss::{two_level_direct, two_level_master};
use crate::hilbert::{build_hamiltonian, SpinChainSpec};
use crate::measure::{partial_trace, DensityMatrix};
use crate::mpsdmrg::{dmrg_ground, DmrgConfig};
use crate::scalar::Cx;

/// Result of one check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, err: Result<f64, crate::Error>, tol: f64) -> Check {
    match err {
        Ok(e) => Check {
            name,
            passed: e <= tol,
            detail: format!("error {e:.3e} (tolerance {tol:.0e})"),
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn two_site_ising() -> crate::Result<f64> {
    let bz = 0.7;
    let h = build_hamiltonian(&SpinChainSpec::<f64>::ising_half(2, bz, 0.0))?;
    let r = lowest_two(&h, Method::Dense, 1e-12)?;
    // E0 = -sqrt(1 + 4 Bz^2), E1 = -1
    Ok((r.e0 + (1.0f64 + 4.0 * bz * bz).sqrt()).abs().max((r.e1 + 1.0).abs()))
}

fn dense_vs_lanczos() -> crate::Result<f64> {
    let spec = SpinChainSpec::<f64>::xxz_spin1(6, 3.8, 3.3);
    let h = build_hamiltonian(&spec)?;
    let a = lowest_two(&h, Method::Dense, 1e-10)?;
    let b = lowest_two(&h, Method::Lanczos, 1e-10)?;
    Ok((a.e0 - b.e0).abs().max((a.e1 - b.e1).abs()))
}

fn bell_concurrence() -> crate::Result<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = Cx::new(0.0, 0.0);
    let psi = [Cx::new(s, 0.0), z, z, Cx::new(s, 0.0)];
    let rho = DensityMatrix::from_pure(vec![2, 2], &psi)?;
    Ok((concurrence(&rho)? - 1.0).abs())
}

fn spin1_product_negativity() -> crate::Result<f64> {
    let mut psi = vec![Cx::new(0.0f64, 0.0); 9];
    psi[1] = Cx::new(1.0, 0.0);
    let rho = DensityMatrix::from_pure(vec![3, 3], &psi)?;
    Ok(negativity(&rho)?.abs())
}

fn rdm_trace() -> crate::Result<f64> {
    let spec = SpinChainSpec::<f64>::ising_half(8, 0.5, 0.02);
    let r = lowest_two(&build_hamiltonian(&spec)?, Method::Lanczos, 1e-10)?;
    let rho = partial_trace(&r.v0, &[3, 4], &spec)?;
    Ok((rho.trace() - Cx::new(1.0, 0.0)).norm().max(rho.hermiticity_defect()))
}

fn dmrg_vs_ed() -> crate::Result<f64> {
    let spec = SpinChainSpec::<f64>::ising_half(8, 0.5, 0.01);
    let ed = lowest_two(&build_hamiltonian(&spec)?, Method::Dense, 1e-12)?;
    let run = dmrg_ground(&spec, &DmrgConfig::default().with_chi(16))?;
    Ok((run.energy - ed.e0).abs())
}

fn master_curve() -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..=40 {
        let k = -5.0 + 0.25 * i as f64;
        let (m, g) = two_level_master(k);
        let (md, gd) = two_level_direct(k);
        worst = worst.max((m - md).abs()).max((g - gd).abs());
    }
    Ok(worst)
}

/// Runs every check; all must pass for a clean build.
pub fn run_checks() -> Vec<Check> {
    vec![
        check("two-site Ising spectrum", two_site_ising(), 1e-12),
        check("dense vs Lanczos, spin-1 L=6", dense_vs_lanczos(), 1e-8),
        check("Bell-state concurrence", bell_concurrence(), 1e-12),
        check("product-state negativity", spin1_product_negativity(), 1e-12),
        check("central RDM trace and Hermiticity", rdm_trace(), 1e-12),
        check("DMRG vs ED ground energy, Ising L=8", dmrg_vs_ed(), 1e-8),
        check("two-level master curve", master_curve(), 1e-12),
    ]
}
