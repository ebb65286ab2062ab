//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use cavnet::hamiltonian::CMatrix;
use cavnet::lattice::Lattice;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Dense Hamiltonian written directly from the equations of motion,
/// with slots ordered p_0..p_{N-1}, q_0..q_{N-1}, f_0..f_{B-1}.
pub fn oracle_matrix(
    lattice: &Lattice,
    s: &[Complex64],
    s_back: &[Complex64],
    w: f64,
    kappa: f64,
    kappa_f: f64,
) -> CMatrix {
    let n = lattice.n_nodes();
    let nb = lattice.n_bonds();
    let dim = 2 * n + nb;
    let mut h = CMatrix::zeros(dim, dim);
    for i in 0..n {
        h[(i, n + i)] = s_back[i];
        h[(n + i, i)] = s[i];
        h[(n + i, n + i)] = c(0.0, -kappa);
    }
    for (b, bond) in lattice.bonds().iter().enumerate() {
        let f = 2 * n + b;
        for end in [bond.i, bond.j] {
            h[(f, n + end)] += c(w, 0.0);
            h[(n + end, f)] += c(w, 0.0);
        }
        h[(f, f)] = c(0.0, -kappa_f);
    }
    h
}

pub fn hermitian_oracle(lattice: &Lattice, s: &[Complex64], w: f64) -> CMatrix {
    let back: Vec<Complex64> = s.iter().map(|z| z.conj()).collect();
    oracle_matrix(lattice, s, &back, w, 0.0, 0.0)
}

/// Spectral norm of a Hermitian matrix.
pub fn spectral_norm(h: &CMatrix) -> f64 {
    h.clone().symmetric_eigen().eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Number of singular values below `rel * largest`.
pub fn null_dimension(h: &CMatrix, rel: f64) -> usize {
    let sv = h.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&x| x <= rel * top).count()
}

pub fn mat_vec(h: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    (h * DVector::from_column_slice(v)).as_slice().to_vec()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Uniform point in the complex annulus `lo <= |z| <= hi`.
pub fn random_coupling<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Complex64 {
    let r = rng.random_range(lo..=hi);
    let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Complex64::from_polar(r, phi)
}

pub fn test_lattices() -> Vec<(&'static str, Lattice)> {
    vec![
        ("2-node", Lattice::chain(2, false).unwrap()),
        ("6-chain", Lattice::chain(6, false).unwrap()),
        ("4-ring", Lattice::chain(4, true).unwrap()),
        ("3x3 square", Lattice::square(3, 3, false).unwrap()),
    ]
}
