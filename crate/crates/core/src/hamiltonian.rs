//! Effective single-excitation Hamiltonian of the fiber-coupled network,
//! in units with hbar = 1 and atom–cavity coupling g = 1.
//!
//! For a state with atomic amplitudes `A_i`, cavity amplitudes `B_i` and
//! fiber amplitudes `F_b`, the action `r = H psi` is
//!
//! ```text
//! r_p(i) = s~_i B_i
//! r_q(i) = s_i A_i + sum_{b touching i} w_b F_b - i kappa B_i
//! r_f(b) = w_b (B_i + B_j) - i kappa_f F_b        for b = (i, j)
//! ```
//!
//! with `s_i = Omega_i / Delta` in the lossless model and
//! `s_i = Omega_i / (Delta + i gamma)` in the lossy one, and always
//! `s~_i = conj(s_i)`. Loss enters only through `kappa` and `kappa_f`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::sector::{SectorBasis, StateVector};

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default cap on the dimension of dense matrices.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Physical rates, all in units of g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub delta: f64,
    pub w: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub kappa_f: f64,
    #[serde(default)]
    pub dissipative: bool,
    /// Per-bond cavity–fiber couplings overriding `w`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond_w: Option<Vec<f64>>,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            delta: 3.0,
            w: 10.0,
            gamma: 0.0,
            kappa: 0.0,
            kappa_f: 0.0,
            dissipative: false,
            bond_w: None,
        }
    }
}

impl SystemParams {
    pub fn lossless(delta: f64, w: f64) -> Self {
        Self { delta, w, ..Self::default() }
    }

    pub fn lossy(delta: f64, w: f64, gamma: f64, kappa: f64, kappa_f: f64) -> Self {
        Self { delta, w, gamma, kappa, kappa_f, dissipative: true, bond_w: None }
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        let finite = [self.delta, self.w, self.gamma, self.kappa, self.kappa_f]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite rate".into()));
        }
        if self.delta.abs() == 0.0 {
            return Err(Error::InvalidParams("detuning must be nonzero".into()));
        }
        if self.w <= 0.0 {
            return Err(Error::InvalidParams(format!("w must be positive, got {}", self.w)));
        }
        for (name, v) in [("gamma", self.gamma), ("kappa", self.kappa), ("kappa_f", self.kappa_f)] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if let Some(bw) = &self.bond_w {
            if bw.len() != lattice.n_bonds() {
                return Err(Error::InvalidParams(format!(
                    "bond_w has {} entries for {} bonds",
                    bw.len(),
                    lattice.n_bonds()
                )));
            }
            if bw.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidParams("bond_w entries must be positive".into()));
            }
        }
        Ok(())
    }

    /// Cavity–fiber coupling of bond `b`.
    #[inline]
    pub fn w_of(&self, b: usize) -> f64 {
        self.bond_w.as_ref().map_or(self.w, |bw| bw[b])
    }

    pub fn max_w(&self) -> f64 {
        self.bond_w
            .as_ref()
            .map_or(self.w, |bw| bw.iter().copied().fold(0.0, f64::max))
    }

    pub fn effective_gamma(&self) -> f64 {
        if self.dissipative { self.gamma } else { 0.0 }
    }

    pub fn effective_kappa(&self) -> f64 {
        if self.dissipative { self.kappa } else { 0.0 }
    }

    pub fn effective_kappa_f(&self) -> f64 {
        if self.dissipative { self.kappa_f } else { 0.0 }
    }

    /// True when the assembled operator is self-adjoint.
    pub fn is_hermitian(&self) -> bool {
        !self.dissipative || (self.kappa == 0.0 && self.kappa_f == 0.0)
    }

    /// The lossless model with the same couplings.
    pub fn hermitian_part(&self) -> Self {
        Self { dissipative: false, ..self.clone() }
    }

    /// Adiabatic-elimination denominator `Delta` or `Delta + i gamma`.
    pub fn denominator(&self) -> Complex64 {
        Complex64::new(self.delta, self.effective_gamma())
    }
}

/// Effective couplings at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSnapshot {
    /// `q_i <- p_i` element.
    pub s: Vec<Complex64>,
    /// `p_i <- q_i` element.
    pub s_back: Vec<Complex64>,
    /// Raw Rabi frequencies.
    pub omega: Vec<Complex64>,
}

impl CouplingSnapshot {
    pub fn from_rabi(omega: &[Complex64], params: &SystemParams) -> Self {
        let den = params.denominator();
        let s = omega.iter().map(|o| o / den).collect();
        let s_back = omega.iter().map(|o| (o / den).conj()).collect();
        Self { s, s_back, omega: omega.to_vec() }
    }

    /// Snapshot whose couplings are exactly the given `s` values in the
    /// lossless model (`Omega = Delta s`).
    pub fn from_couplings(s: &[Complex64], params: &SystemParams) -> Self {
        let omega: Vec<Complex64> = s.iter().map(|x| x * params.delta).collect();
        Self {
            s: s.to_vec(),
            s_back: s.iter().map(|x| x.conj()).collect(),
            omega,
        }
    }

    /// Refill from new Rabi values without reallocating.
    pub fn update_from_rabi(&mut self, omega: &[Complex64], params: &SystemParams) {
        let den = params.denominator();
        self.s.clear();
        self.s_back.clear();
        self.omega.clear();
        for o in omega {
            self.s.push(o / den);
            self.s_back.push((o / den).conj());
            self.omega.push(*o);
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.s.len()
    }

    pub fn max_abs_s(&self) -> f64 {
        self.s.iter().chain(&self.s_back).map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn all_on(&self) -> bool {
        self.s.iter().all(|x| *x != ZERO)
    }
}

/// The operator at one instant, bundled for repeated application.
#[derive(Debug, Clone, Copy)]
pub struct Hamiltonian<'a> {
    pub basis: &'a SectorBasis,
    pub snap: &'a CouplingSnapshot,
    pub params: &'a SystemParams,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(
        basis: &'a SectorBasis,
        snap: &'a CouplingSnapshot,
        params: &'a SystemParams,
    ) -> Result<Self> {
        if snap.n_nodes() != basis.n_nodes() {
            return Err(Error::BasisMismatch { left: basis.n_nodes(), right: snap.n_nodes() });
        }
        Ok(Self { basis, snap, params })
    }

    /// `out = H x` on raw slices of length `dim`.
    pub fn apply_slice(&self, x: &[Complex64], out: &mut [Complex64]) {
        let n = self.basis.n_nodes();
        let lattice = self.basis.lattice();
        let kappa = Complex64::new(0.0, -self.params.effective_kappa());
        let kappa_f = Complex64::new(0.0, -self.params.effective_kappa_f());
        let (a, rest) = x.split_at(n);
        let (b, f) = rest.split_at(n);
        let (ra, rest) = out.split_at_mut(n);
        let (rb, rf) = rest.split_at_mut(n);
        for i in 0..n {
            ra[i] = self.snap.s_back[i] * b[i];
            rb[i] = self.snap.s[i] * a[i] + kappa * b[i];
        }
        for (k, bond) in lattice.bonds().iter().enumerate() {
            let w = self.params.w_of(k);
            rf[k] = w * (b[bond.i] + b[bond.j]) + kappa_f * f[k];
            rb[bond.i] += w * f[k];
            rb[bond.j] += w * f[k];
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.basis.check(psi)?;
        let mut out = self.basis.zero();
        self.apply_slice(psi.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    pub fn dense(&self, cap: usize) -> Result<CMatrix> {
        let dim = self.basis.dim();
        if dim > cap {
            return Err(Error::DenseCapExceeded { dim, cap });
        }
        let bs = self.basis;
        let n = bs.n_nodes();
        let mut m = CMatrix::zeros(dim, dim);
        let kappa = Complex64::new(0.0, -self.params.effective_kappa());
        let kappa_f = Complex64::new(0.0, -self.params.effective_kappa_f());
        for i in 0..n {
            m[(bs.q(i), bs.p(i))] = self.snap.s[i];
            m[(bs.p(i), bs.q(i))] = self.snap.s_back[i];
            m[(bs.q(i), bs.q(i))] = kappa;
        }
        for (k, bond) in bs.lattice().bonds().iter().enumerate() {
            let w = Complex64::new(self.params.w_of(k), 0.0);
            for node in [bond.i, bond.j] {
                m[(bs.f(k), bs.q(node))] = w;
                m[(bs.q(node), bs.f(k))] = w;
            }
            m[(bs.f(k), bs.f(k))] = kappa_f;
        }
        Ok(m)
    }

    /// Cheap upper bound on the operator norm: `2 w + max |s|`, raised to
    /// the Schur-test bound when nodes have more than two fibers.
    pub fn norm_bound(&self) -> f64 {
        let lattice = self.basis.lattice();
        let w = self.params.max_w();
        let max_deg = (0..lattice.n_nodes())
            .map(|i| lattice.incident_bonds(i).len())
            .max()
            .unwrap_or(0) as f64;
        let s = self.snap.max_abs_s();
        let loss = self.params.effective_kappa().max(self.params.effective_kappa_f());
        let schur = ((s + max_deg * w) * (2.0 * w).max(s)).sqrt();
        (2.0 * w + s).max(schur) + loss
    }
}

/// `H psi` for the given couplings.
pub fn apply(
    basis: &SectorBasis,
    snap: &CouplingSnapshot,
    params: &SystemParams,
    psi: &StateVector,
) -> Result<StateVector> {
    Hamiltonian::new(basis, snap, params)?.apply(psi)
}

/// Dense matrix of the operator, refusing dimensions above `cap`.
pub fn dense_matrix(
    basis: &SectorBasis,
    snap: &CouplingSnapshot,
    params: &SystemParams,
    cap: usize,
) -> Result<CMatrix> {
    Hamiltonian::new(basis, snap, params)?.dense(cap)
}

/// Eigenvalues of a general complex matrix, via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|k| t[(k, k)]).collect()
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = nalgebra::linalg::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_columns(
        &order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Largest entry magnitude of `m - m^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sector::Slot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> StateVector {
        StateVector::from_amplitudes(
            (0..dim).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect(),
        )
    }

    #[test]
    fn snapshot_ratios() {
        let herm = SystemParams::lossless(3.0, 10.0);
        let snap = CouplingSnapshot::from_rabi(&[c(0.3, 0.0), c(0.0, 0.0)], &herm);
        assert!((snap.s[0] - c(0.1, 0.0)).norm() < 1e-15);
        assert_eq!(snap.s[1], c(0.0, 0.0));
        let lossy = SystemParams::lossy(3.0, 10.0, 0.1, 0.0, 0.0);
        let snap = CouplingSnapshot::from_rabi(&[c(0.3, 0.0)], &lossy);
        assert!((snap.s[0] - c(0.3, 0.0) / c(3.0, 0.1)).norm() < 1e-15);
        assert_eq!(snap.s_back[0], snap.s[0].conj());
        assert!(lossy.is_hermitian());
        assert!(!SystemParams::lossy(3.0, 10.0, 0.1, 0.01, 0.0).is_hermitian());
        // lossless flag ignores the loss rates
        let off = SystemParams { dissipative: false, ..lossy };
        let snap = CouplingSnapshot::from_rabi(&[c(0.3, 0.0)], &off);
        assert!((snap.s[0] - c(0.1, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn params_validation() {
        let l = Lattice::chain(3, false).unwrap();
        assert!(SystemParams::default().validate(&l).is_ok());
        assert!(SystemParams { delta: 0.0, ..Default::default() }.validate(&l).is_err());
        assert!(SystemParams { w: 0.0, ..Default::default() }.validate(&l).is_err());
        assert!(SystemParams { kappa: -1.0, ..Default::default() }.validate(&l).is_err());
        assert!(SystemParams { bond_w: Some(vec![1.0]), ..Default::default() }.validate(&l).is_err());
        assert!(SystemParams { bond_w: Some(vec![1.0, 2.0]), ..Default::default() }.validate(&l).is_ok());
    }

    #[test]
    fn p_state_maps_to_q_state() {
        let basis = SectorBasis::new(Lattice::chain(4, false).unwrap());
        let params = SystemParams::default();
        let s = [c(0.2, 0.1), c(0.3, 0.0), c(-0.1, 0.4), c(0.05, 0.0)];
        let snap = CouplingSnapshot::from_couplings(&s, &params);
        for (i, &si) in s.iter().enumerate() {
            let out = apply(&basis, &snap, &params, &basis.pure_state(Slot::P(i)).unwrap()).unwrap();
            let mut expect = basis.zero();
            expect.amplitudes_mut()[basis.q(i)] = si;
            assert!(out.distance(&expect).unwrap() < 1e-15);
        }
    }

    /// The two-cavity matrix written out by hand in slot order
    /// (p1, p2, q1, q2, f).
    #[test]
    fn two_cavity_matrix_by_hand() {
        let basis = SectorBasis::new(Lattice::chain(2, false).unwrap());
        let params = SystemParams::lossless(3.0, 10.0);
        let (s1, s2) = (c(0.2, 0.1), c(-0.3, 0.05));
        let snap = CouplingSnapshot::from_couplings(&[s1, s2], &params);
        let m = dense_matrix(&basis, &snap, &params, DEFAULT_DENSE_CAP).unwrap();
        let z = c(0.0, 0.0);
        let w = c(10.0, 0.0);
        #[rustfmt::skip]
        let by_hand = CMatrix::from_row_slice(5, 5, &[
            z,  z,  s1.conj(), z,         z,
            z,  z,  z,         s2.conj(), z,
            s1, z,  z,         z,         w,
            z,  s2, z,         z,         w,
            z,  z,  w,         w,         z,
        ]);
        assert_eq!(m, by_hand);

        let zero = CouplingSnapshot::from_couplings(&[z, z], &params);
        let out = apply(&basis, &zero, &params, &basis.pure_state(Slot::Q(0)).unwrap()).unwrap();
        let mut expect = basis.zero();
        expect.amplitudes_mut()[basis.f(0)] = w;
        assert_eq!(out, expect);
    }

    #[test]
    fn dense_agrees_with_apply_and_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for lattice in [
            Lattice::chain(6, false).unwrap(),
            Lattice::chain(4, true).unwrap(),
            Lattice::square(3, 3, false).unwrap(),
        ] {
            let basis = SectorBasis::new(lattice);
            for params in [
                SystemParams::lossless(3.0, 10.0),
                SystemParams::lossy(3.0, 5.0, 0.1, 0.2, 0.05),
            ] {
                let omega: Vec<Complex64> = (0..basis.n_nodes())
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let snap = CouplingSnapshot::from_rabi(&omega, &params);
                let h = Hamiltonian::new(&basis, &snap, &params).unwrap();
                let m = h.dense(DEFAULT_DENSE_CAP).unwrap();
                if params.is_hermitian() {
                    assert_eq!(hermiticity_defect(&m), 0.0);
                }
                for _ in 0..5 {
                    let v = random_state(basis.dim(), &mut rng);
                    let via_apply = h.apply(&v).unwrap();
                    let via_dense = &m * nalgebra::DVector::from_column_slice(v.amplitudes());
                    let dist = via_apply
                        .amplitudes()
                        .iter()
                        .zip(via_dense.iter())
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    assert!(dist < 1e-13, "apply vs dense differ by {dist}");
                    if params.is_hermitian() {
                        let e = v.inner(&via_apply).unwrap();
                        assert!(e.im.abs() < 1e-12 * v.norm_sqr().max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn dense_cap() {
        let basis = SectorBasis::new(Lattice::chain(6, false).unwrap());
        let params = SystemParams::default();
        let snap = CouplingSnapshot::from_rabi(&[c(1.0, 0.0); 6], &params);
        assert_eq!(
            dense_matrix(&basis, &snap, &params, 10),
            Err(Error::DenseCapExceeded { dim: 17, cap: 10 })
        );
    }

    /// The graph is bipartite between {P, F} and {Q}, so the lossless
    /// spectrum is symmetric about zero.
    #[test]
    fn two_cavity_spectrum_is_symmetric() {
        let basis = SectorBasis::new(Lattice::chain(2, false).unwrap());
        let params = SystemParams::lossless(3.0, 10.0);
        let snap = CouplingSnapshot::from_couplings(&[c(0.4, 0.0), c(0.4, 0.0)], &params);
        let m = dense_matrix(&basis, &snap, &params, DEFAULT_DENSE_CAP).unwrap();
        let (vals, _) = hermitian_eigen(&m);
        for (lo, hi) in vals.iter().zip(vals.iter().rev()) {
            assert!((lo + hi).abs() < 1e-12, "{vals:?}");
        }
        assert!(vals.iter().any(|v| v.abs() < 1e-12));
    }

    #[test]
    fn complex_schur_eigenvalues_match_hermitian() {
        let basis = SectorBasis::new(Lattice::chain(3, false).unwrap());
        let params = SystemParams::lossless(3.0, 10.0);
        let snap = CouplingSnapshot::from_couplings(&[c(0.2, 0.1), c(0.3, -0.2), c(0.1, 0.0)], &params);
        let m = dense_matrix(&basis, &snap, &params, DEFAULT_DENSE_CAP).unwrap();
        let (herm, _) = hermitian_eigen(&m);
        let mut gen: Vec<f64> = eigenvalues(&m).iter().map(|z| z.re).collect();
        gen.sort_by(f64::total_cmp);
        for (a, b) in herm.iter().zip(&gen) {
            assert!((a - b).abs() < 1e-10, "{herm:?} vs {gen:?}");
        }
    }

    #[test]
    fn lossy_spectrum_decays_with_cavity_and_fiber_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = SectorBasis::new(Lattice::chain(4, false).unwrap());
        let params = SystemParams::lossy(3.0, 10.0, 0.1, 0.2, 0.1);
        for _ in 0..10 {
            let omega: Vec<Complex64> =
                (0..4).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let snap = CouplingSnapshot::from_rabi(&omega, &params);
            let m = dense_matrix(&basis, &snap, &params, DEFAULT_DENSE_CAP).unwrap();
            for z in eigenvalues(&m) {
                assert!(z.im <= 1e-12, "eigenvalue {z} grows");
            }
            let h = Hamiltonian::new(&basis, &snap, &params).unwrap();
            for _ in 0..5 {
                let v = random_state(basis.dim(), &mut rng);
                let e = v.inner(&h.apply(&v).unwrap()).unwrap();
                assert!(e.im <= 1e-12);
            }
        }
    }
}
