//! The single-excitation sector and state vectors over it.
//!
//! Slots are laid out `[p_0..p_N][q_0..q_N][f_0..f_B]`: `p_i` is the atom at
//! node `i` in `a0` with every cavity and fiber empty, `q_i` is one photon in
//! cavity `i`, and `f_b` is one photon in fiber `b`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Label of a basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    P(usize),
    Q(usize),
    F(usize),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::P(i) => write!(f, "p({i})"),
            Slot::Q(i) => write!(f, "q({i})"),
            Slot::F(b) => write!(f, "f({b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    lattice: Arc<Lattice>,
}

impl SectorBasis {
    pub fn new(lattice: Lattice) -> Self {
        Self { lattice: Arc::new(lattice) }
    }

    pub fn from_shared(lattice: Arc<Lattice>) -> Self {
        Self { lattice }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn shared_lattice(&self) -> Arc<Lattice> {
        Arc::clone(&self.lattice)
    }

    pub fn n_nodes(&self) -> usize {
        self.lattice.n_nodes()
    }

    pub fn n_bonds(&self) -> usize {
        self.lattice.n_bonds()
    }

    pub fn dim(&self) -> usize {
        2 * self.n_nodes() + self.n_bonds()
    }

    #[inline]
    pub fn p(&self, i: usize) -> usize {
        i
    }

    #[inline]
    pub fn q(&self, i: usize) -> usize {
        self.n_nodes() + i
    }

    #[inline]
    pub fn f(&self, b: usize) -> usize {
        2 * self.n_nodes() + b
    }

    pub fn index(&self, slot: Slot) -> Result<usize> {
        let (ok, idx) = match slot {
            Slot::P(i) => (i < self.n_nodes(), self.p(i)),
            Slot::Q(i) => (i < self.n_nodes(), self.q(i)),
            Slot::F(b) => (b < self.n_bonds(), self.f(b)),
        };
        if ok {
            Ok(idx)
        } else {
            Err(Error::LabelOutOfRange { label: slot.to_string(), size: self.dim() })
        }
    }

    pub fn slot(&self, index: usize) -> Option<Slot> {
        let n = self.n_nodes();
        match index {
            i if i < n => Some(Slot::P(i)),
            i if i < 2 * n => Some(Slot::Q(i - n)),
            i if i < self.dim() => Some(Slot::F(i - 2 * n)),
            _ => None,
        }
    }

    pub fn zero(&self) -> StateVector {
        StateVector::zeros(self.dim())
    }

    pub fn pure_state(&self, slot: Slot) -> Result<StateVector> {
        let idx = self.index(slot)?;
        let mut v = self.zero();
        v.amps[idx] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    /// State with the given complex amplitudes on P-slots and nothing else.
    pub fn atomic_state(&self, amps: &[(usize, Complex64)]) -> Result<StateVector> {
        let mut v = self.zero();
        for &(node, a) in amps {
            let idx = self.index(Slot::P(node))?;
            v.amps[idx] += a;
        }
        Ok(v)
    }

    pub fn check(&self, v: &StateVector) -> Result<()> {
        if v.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::BasisMismatch { left: self.dim(), right: v.dim() })
        }
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor {
            n_nodes: self.n_nodes(),
            n_bonds: self.n_bonds(),
            dim: self.dim(),
            bonds: self.lattice.bonds().iter().map(|b| (b.i, b.j)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub n_nodes: usize,
    pub n_bonds: usize,
    pub dim: usize,
    pub bonds: Vec<(usize, usize)>,
}

/// Complex amplitudes over the sector slots.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(dim: usize) -> Self {
        Self { amps: vec![Complex64::new(0.0, 0.0); dim] }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(Error::BasisMismatch { left: self.dim(), right: other.dim() })
        }
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.same_dim(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { amps: self.amps.iter().map(|a| a * c).collect() }
    }

    /// `self + c * other` in place.
    pub fn axpy(&mut self, c: Complex64, other: &Self) -> Result<()> {
        self.same_dim(other)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
        Ok(())
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.same_dim(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub fn to_record(&self, basis: &SectorBasis) -> StateRecord {
        StateRecord {
            basis: basis.descriptor(),
            amplitudes: self.amps.iter().map(|a| (a.re, a.im)).collect(),
        }
    }
}

/// Unnormalized linear combination `sum_k c_k v_k`.
pub fn superpose(terms: &[(Complex64, &StateVector)]) -> Result<StateVector> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::InvalidParams("superpose of an empty term list".into()));
    };
    let mut out = StateVector::zeros(first.dim());
    for (c, v) in terms {
        out.axpy(*c, v)?;
    }
    Ok(out)
}

/// Serialized form: `(re, im)` pairs in slot order with the basis attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub basis: BasisDescriptor,
    pub amplitudes: Vec<(f64, f64)>,
}

impl StateRecord {
    pub fn to_state(&self, basis: &SectorBasis) -> Result<StateVector> {
        if self.basis != basis.descriptor() || self.amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch { left: basis.dim(), right: self.amplitudes.len() });
        }
        Ok(StateVector::from_amplitudes(
            self.amplitudes.iter().map(|&(re, im)| Complex64::new(re, im)).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dimensions() {
        assert_eq!(SectorBasis::new(Lattice::chain(6, false).unwrap()).dim(), 17);
        assert_eq!(SectorBasis::new(Lattice::chain(2, false).unwrap()).dim(), 5);
        assert_eq!(SectorBasis::new(Lattice::square(3, 3, false).unwrap()).dim(), 30);
    }

    #[test]
    fn index_maps_are_bijective() {
        let basis = SectorBasis::new(Lattice::square(3, 2, false).unwrap());
        let mut hit = vec![false; basis.dim()];
        for i in 0..basis.n_nodes() {
            hit[basis.index(Slot::P(i)).unwrap()] = true;
            hit[basis.index(Slot::Q(i)).unwrap()] = true;
        }
        for b in 0..basis.n_bonds() {
            hit[basis.index(Slot::F(b)).unwrap()] = true;
        }
        assert!(hit.iter().all(|&h| h));
        for k in 0..basis.dim() {
            assert_eq!(basis.index(basis.slot(k).unwrap()).unwrap(), k);
        }
        assert_eq!(basis.slot(basis.dim()), None);
    }

    #[test]
    fn pure_states() {
        let basis = SectorBasis::new(Lattice::chain(4, false).unwrap());
        let p0 = basis.pure_state(Slot::P(0)).unwrap();
        assert_eq!(p0.amplitudes()[0], c(1.0, 0.0));
        assert_eq!(p0.norm(), 1.0);
        let q0 = basis.pure_state(Slot::Q(0)).unwrap();
        assert_eq!(p0.inner(&q0).unwrap(), c(0.0, 0.0));
        assert!(matches!(
            basis.pure_state(Slot::F(basis.n_bonds())),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn superposition_algebra() {
        let basis = SectorBasis::new(Lattice::chain(3, false).unwrap());
        let p1 = basis.pure_state(Slot::P(1)).unwrap();
        let p2 = basis.pure_state(Slot::P(2)).unwrap();
        let h = c(FRAC_1_SQRT_2, 0.0);
        let v = superpose(&[(h, &p1), (h, &p2)]).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-15);
        let (alpha, beta) = (c(0.3, -0.2), c(0.1, 0.7));
        let w = superpose(&[(alpha, &p1), (beta, &p2)]).unwrap();
        assert_eq!(p1.inner(&w).unwrap(), alpha);
        assert!((w.inner(&w).unwrap().re - w.norm_sqr()).abs() < 1e-15);
        let u = w.normalized().unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatch_is_rejected() {
        let a = StateVector::zeros(5);
        let b = StateVector::zeros(6);
        assert!(matches!(a.inner(&b), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn record_round_trip() {
        let basis = SectorBasis::new(Lattice::chain(2, false).unwrap());
        let v = basis.atomic_state(&[(0, c(0.6, 0.0)), (1, c(0.0, 0.8))]).unwrap();
        let json = serde_json::to_string(&v.to_record(&basis)).unwrap();
        let back: StateRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_state(&basis).unwrap(), v);
    }
}
