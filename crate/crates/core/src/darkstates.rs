//! Zero-energy states of the lossless network: closed-form bond dark states,
//! the numerical null space, and the gap to the bright states.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    hermitian_eigen, CMatrix, CouplingSnapshot, Hamiltonian, SystemParams, DEFAULT_DENSE_CAP,
};
use crate::sector::{SectorBasis, StateVector};

/// Relative eigenvalue threshold below which an eigenvalue counts as zero.
pub const DEFAULT_NULL_TOL: f64 = 1e-10;

/// Normalized dark state of bond `b = (i, j)`:
///
/// ```text
/// D ∝ s_j w |p_i> - s_i s_j |f_b> + s_i w |p_j>
/// ```
///
/// The global phase makes the `p_i` amplitude real and positive (or the
/// `p_j` amplitude when `s_j = 0`), so `s_i = 0` gives exactly `|p_i>`.
pub fn bond_dark_state(
    basis: &SectorBasis,
    snap: &CouplingSnapshot,
    params: &SystemParams,
    bond: usize,
) -> Result<StateVector> {
    let lattice = basis.lattice();
    let b = lattice.bond(bond).ok_or_else(|| Error::LabelOutOfRange {
        label: format!("bond {bond}"),
        size: lattice.n_bonds(),
    })?;
    if snap.n_nodes() != basis.n_nodes() {
        return Err(Error::BasisMismatch { left: basis.n_nodes(), right: snap.n_nodes() });
    }
    let (si, sj) = (snap.s[b.i], snap.s[b.j]);
    let w = params.w_of(bond);
    let zero = Complex64::new(0.0, 0.0);
    if si == zero && sj == zero {
        return Err(Error::DegenerateDarkState { bond });
    }
    let gauge = if sj != zero { sj.conj() / sj.norm() } else { si.conj() / si.norm() };
    let amp_pi = sj * w * gauge;
    let amp_f = -(si * sj) * gauge;
    let amp_pj = si * w * gauge;
    let norm = (amp_pi.norm_sqr() + amp_f.norm_sqr() + amp_pj.norm_sqr()).sqrt();
    let mut v = basis.zero();
    let a = v.amplitudes_mut();
    a[basis.p(b.i)] = amp_pi / norm;
    a[basis.f(bond)] = amp_f / norm;
    a[basis.p(b.j)] = amp_pj / norm;
    Ok(v)
}

/// Bond dark states for every bond, `None` where both couplings vanish.
pub fn bond_dark_states(
    basis: &SectorBasis,
    snap: &CouplingSnapshot,
    params: &SystemParams,
) -> Vec<Option<StateVector>> {
    (0..basis.n_bonds())
        .map(|b| bond_dark_state(basis, snap, params, b).ok())
        .collect()
}

/// Overlap matrix `G_ab = <D_a|D_b>` of the given states.
pub fn gram_matrix(states: &[&StateVector]) -> CMatrix {
    let n = states.len();
    CMatrix::from_fn(n, n, |a, b| {
        states[a].inner(states[b]).expect("states share a basis")
    })
}

/// Orthonormal basis of the null space of the lossless Hamiltonian.
#[derive(Debug, Clone)]
pub struct DarkManifold {
    pub vectors: Vec<StateVector>,
    /// Relative tolerance used for the classification.
    pub tolerance: f64,
    /// Absolute threshold `tolerance * max |E|`.
    pub threshold: f64,
    /// Full ascending spectrum.
    pub eigenvalues: Vec<f64>,
}

impl DarkManifold {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Smallest |E| above the zero threshold.
    pub fn gap(&self) -> Result<f64> {
        self.eigenvalues
            .iter()
            .map(|e| e.abs())
            .filter(|&e| e > self.threshold)
            .min_by(f64::total_cmp)
            .ok_or(Error::NoGap)
    }

    /// Largest |E|.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }
}

/// Null space of `H` from a dense Hermitian eigendecomposition.
pub fn dark_manifold(
    basis: &SectorBasis,
    snap: &CouplingSnapshot,
    params: &SystemParams,
    tolerance: f64,
) -> Result<DarkManifold> {
    if !params.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let m = Hamiltonian::new(basis, snap, params)?.dense(DEFAULT_DENSE_CAP)?;
    let (values, vectors) = hermitian_eigen(&m);
    let radius = values.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let threshold = tolerance * radius;
    let null = values
        .iter()
        .enumerate()
        .filter(|(_, e)| e.abs() <= threshold)
        .map(|(k, _)| StateVector::from_amplitudes(vectors.column(k).iter().copied().collect()))
        .collect();
    Ok(DarkManifold { vectors: null, tolerance, threshold, eigenvalues: values })
}

/// Weight of `psi` inside the manifold, `sum_k |<v_k|psi>|^2`.
pub fn dark_population(psi: &StateVector, manifold: &DarkManifold) -> f64 {
    manifold
        .vectors
        .iter()
        .map(|v| v.inner(psi).map(|z| z.norm_sqr()).unwrap_or(0.0))
        .sum()
}

/// Smallest nonzero |E| of the lossless Hamiltonian.
pub fn spectral_gap(
    basis: &SectorBasis,
    snap: &CouplingSnapshot,
    params: &SystemParams,
) -> Result<f64> {
    dark_manifold(basis, snap, params, DEFAULT_NULL_TOL)?.gap()
}

/// JSON report of the dark structure at one instant.
#[derive(Debug, Clone, Serialize)]
pub struct DarkReport {
    pub dimension: usize,
    pub n_bonds: usize,
    pub gap: Option<f64>,
    pub threshold: f64,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal manifold basis as `(re, im)` amplitude lists.
    pub basis: Vec<Vec<(f64, f64)>>,
    /// Bonds whose raw dark state is defined, in bond order.
    pub gram_bonds: Vec<usize>,
    pub gram_re: Vec<Vec<f64>>,
    pub gram_im: Vec<Vec<f64>>,
}

pub fn dark_report(
    basis: &SectorBasis,
    snap: &CouplingSnapshot,
    params: &SystemParams,
    tolerance: f64,
) -> Result<DarkReport> {
    let manifold = dark_manifold(basis, snap, params, tolerance)?;
    let raw = bond_dark_states(basis, snap, params);
    let defined: Vec<(usize, &StateVector)> =
        raw.iter().enumerate().filter_map(|(b, v)| v.as_ref().map(|v| (b, v))).collect();
    let states: Vec<&StateVector> = defined.iter().map(|(_, v)| *v).collect();
    let gram = gram_matrix(&states);
    let rows = |f: fn(&Complex64) -> f64| {
        (0..gram.nrows())
            .map(|a| (0..gram.ncols()).map(|b| f(&gram[(a, b)])).collect())
            .collect()
    };
    Ok(DarkReport {
        dimension: manifold.dim(),
        n_bonds: basis.n_bonds(),
        gap: manifold.gap().ok(),
        threshold: manifold.threshold,
        eigenvalues: manifold.eigenvalues.clone(),
        basis: manifold
            .vectors
            .iter()
            .map(|v| v.amplitudes().iter().map(|z| (z.re, z.im)).collect())
            .collect(),
        gram_bonds: defined.iter().map(|(b, _)| *b).collect(),
        gram_re: rows(|z| z.re),
        gram_im: rows(|z| z.im),
    })
}
