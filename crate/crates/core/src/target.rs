//! Atomic superpositions used as initial states and transfer targets.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sector::{SectorBasis, StateVector};

/// A normalized state supported on P-slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `|p_node>`.
    Site { node: usize },
    /// Equal-weight superposition over `nodes`.
    WState { nodes: Vec<usize> },
    /// `sum_x exp(i q . R(x)) |p_x>` over `nodes`, with `R` the lattice
    /// coordinates. On a chain `q = (phase_step, 0)`.
    Fourier { nodes: Vec<usize>, q: (f64, f64) },
    /// Explicit `(node, re, im)` amplitudes, normalized on construction.
    Amplitudes { amplitudes: Vec<(usize, f64, f64)> },
}

pub type TargetSpec = StateSpec;

impl StateSpec {
    pub fn site(node: usize) -> Self {
        Self::Site { node }
    }

    pub fn w_state(nodes: impl Into<Vec<usize>>) -> Self {
        Self::WState { nodes: nodes.into() }
    }

    pub fn amplitudes(amps: &[(usize, Complex64)]) -> Self {
        Self::Amplitudes { amplitudes: amps.iter().map(|&(n, z)| (n, z.re, z.im)).collect() }
    }

    /// Normalized `(node, amplitude)` pairs; repeated nodes are summed.
    pub fn node_amplitudes(&self, coords: &[(i64, i64)]) -> Result<Vec<(usize, Complex64)>> {
        let n = coords.len();
        let raw: Vec<(usize, Complex64)> = match self {
            Self::Site { node } => vec![(*node, Complex64::new(1.0, 0.0))],
            Self::WState { nodes } => nodes.iter().map(|&k| (k, Complex64::new(1.0, 0.0))).collect(),
            Self::Fourier { nodes, q } => nodes
                .iter()
                .map(|&k| {
                    let (x, y) = coords.get(k).copied().unwrap_or((0, 0));
                    (k, Complex64::from_polar(1.0, q.0 * x as f64 + q.1 * y as f64))
                })
                .collect(),
            Self::Amplitudes { amplitudes } => {
                amplitudes.iter().map(|&(k, re, im)| (k, Complex64::new(re, im))).collect()
            }
        };
        if raw.is_empty() {
            return Err(Error::InvalidTarget("empty node set".into()));
        }
        let mut merged: Vec<(usize, Complex64)> = Vec::new();
        for (k, z) in raw {
            if k >= n {
                return Err(Error::InvalidTarget(format!("node {k} out of range (n = {n})")));
            }
            match merged.iter_mut().find(|(m, _)| *m == k) {
                Some((_, acc)) => *acc += z,
                None => merged.push((k, z)),
            }
        }
        let norm = merged.iter().map(|(_, z)| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidTarget("zero-norm superposition".into()));
        }
        Ok(merged.into_iter().map(|(k, z)| (k, z / norm)).collect())
    }

    pub fn build(&self, basis: &SectorBasis) -> Result<StateVector> {
        let amps = self.node_amplitudes(basis.lattice().coords())?;
        basis.atomic_state(&amps)
    }

    /// Nodes carrying nonzero amplitude.
    pub fn support(&self, coords: &[(i64, i64)]) -> Result<Vec<usize>> {
        Ok(self
            .node_amplitudes(coords)?
            .into_iter()
            .filter(|(_, z)| z.norm() > 0.0)
            .map(|(k, _)| k)
            .collect())
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI { y - 2.0 * PI } else { y }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    #[test]
    fn site_and_w_state() {
        let basis = SectorBasis::new(Lattice::chain(4, false).unwrap());
        let s = StateSpec::site(2).build(&basis).unwrap();
        assert_eq!(s, basis.pure_state(crate::sector::Slot::P(2)).unwrap());
        let w = StateSpec::w_state(vec![0, 1, 3]).build(&basis).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-15);
        assert!((w.amplitudes()[3].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fourier_phases_follow_coordinates() {
        let basis = SectorBasis::new(Lattice::chain(5, false).unwrap());
        let spec = StateSpec::Fourier { nodes: vec![1, 2, 3, 4], q: (0.4, 0.0) };
        let v = spec.build(&basis).unwrap();
        for k in 1..4 {
            let d = (v.amplitudes()[k + 1] / v.amplitudes()[k]).arg();
            assert!((d - 0.4).abs() < 1e-12);
        }
        assert_eq!(v.amplitudes()[0].norm(), 0.0);
    }

    #[test]
    fn invalid_targets() {
        let coords = [(0, 0), (1, 0)];
        assert!(StateSpec::site(2).node_amplitudes(&coords).is_err());
        assert!(StateSpec::w_state(vec![]).node_amplitudes(&coords).is_err());
        assert!(StateSpec::Amplitudes { amplitudes: vec![(0, 0.0, 0.0)] }
            .node_amplitudes(&coords)
            .is_err());
    }

    #[test]
    fn explicit_amplitudes_are_normalized() {
        let coords = [(0, 0), (1, 0), (2, 0)];
        let amps = StateSpec::Amplitudes { amplitudes: vec![(0, 3.0, 0.0), (2, 0.0, 4.0)] }
            .node_amplitudes(&coords)
            .unwrap();
        assert!((amps[0].1 - Complex64::new(0.6, 0.0)).norm() < 1e-15);
        assert!((amps[1].1 - Complex64::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn phase_wrapping() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_phase(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
    }
}
