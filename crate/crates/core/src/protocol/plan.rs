//! Protocol generators.
//!
//! With `w >> |s|` the atomic part of the dark manifold on a bipartite
//! lattice is the orthogonal complement of the single bright vector
//! `b = sum_i eps_i conj(s_i) |p_i>`, with `eps = +-1` the sublattice sign.
//! A move rotates `b` inside a plane containing the source and destination
//! superpositions, which drags the state from one to the other.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Protocol, RampSegment, Schedule};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::target::StateSpec;

const IDENTITY_TOL: f64 = 1e-12;
const SHARED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RampOptions {
    /// Peak Rabi frequency (g).
    pub omega_max: f64,
    /// tanh ramp rate (g).
    pub rate: f64,
    /// Spacing between the ramps that open and close a move (1/g).
    pub lead: f64,
    /// Time both drive patterns are on together (1/g).
    pub overlap: f64,
    /// Idle time before the first and after the last ramp (1/g).
    pub margin: f64,
}

impl Default for RampOptions {
    fn default() -> Self {
        Self { omega_max: 2.0, rate: 0.05, lead: 150.0, overlap: 50.0, margin: 200.0 }
    }
}

impl RampOptions {
    /// Time taken by one move.
    pub fn hop(&self) -> f64 {
        3.0 * self.lead + self.overlap
    }

    fn check(&self) -> Result<()> {
        let ok = [self.omega_max, self.rate, self.lead, self.margin].iter().all(|x| x.is_finite() && *x > 0.0)
            && self.overlap.is_finite()
            && self.overlap >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProtocol(format!("bad ramp options {self:?}")))
        }
    }
}

/// One adiabatic rotation from a source superposition to a destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Move {
    pub from: StateSpec,
    pub to: StateSpec,
}

/// A sequence of moves executed back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovePlan {
    pub moves: Vec<Move>,
    #[serde(default)]
    pub options: RampOptions,
}

/// A generated protocol with any caveats found while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Planned {
    pub protocol: Protocol,
    /// Non-empty when the construction is only approximate and should be
    /// refined with the optimizer.
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    /// Switched on first, defines the initial bright vector.
    Dest,
    /// Switched on second.
    Source,
}

#[derive(Debug, Clone, Copy)]
struct Drive {
    node: usize,
    role: Role,
    value: Complex64,
}

struct Pattern {
    drives: Vec<Drive>,
    /// Destination drives stay on until the common switch-off.
    partial: bool,
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn dense(lattice: &Lattice, spec: &StateSpec) -> Result<Vec<Complex64>> {
    let mut v = vec![Complex64::new(0.0, 0.0); lattice.n_nodes()];
    for (k, z) in spec.node_amplitudes(lattice.coords())? {
        v[k] = z;
    }
    Ok(v)
}

fn plan_move(lattice: &Lattice, mv: &Move, flags: &mut Vec<String>) -> Result<Option<Pattern>> {
    let mut src = dense(lattice, &mv.from)?;
    let mut dst = dense(lattice, &mv.to)?;
    // Amplitudes shared by both ends stay put with their lasers off.
    let mut shared = false;
    for k in 0..src.len() {
        if (src[k] - dst[k]).norm() < SHARED_TOL {
            shared |= src[k].norm() > SHARED_TOL;
            src[k] = Complex64::new(0.0, 0.0);
            dst[k] = Complex64::new(0.0, 0.0);
        }
    }
    let rest = inner(&src, &src).re.sqrt();
    if rest < IDENTITY_TOL {
        return Ok(None);
    }
    src.iter_mut().chain(dst.iter_mut()).for_each(|z| *z /= rest);
    let o = inner(&src, &dst);
    let mut v: Vec<Complex64> = dst.iter().zip(&src).map(|(d, s)| d - o * s).collect();
    let n = inner(&v, &v).re.sqrt();
    if n < IDENTITY_TOL {
        return Ok(None);
    }
    v.iter_mut().for_each(|z| *z /= n);
    let signs = lattice.sublattice_signs().unwrap_or_else(|| {
        flags.push("lattice is not bipartite; no single bright vector exists".into());
        vec![1.0; lattice.n_nodes()]
    });

    // Destination pattern makes the source dark; the source pattern is then
    // added so that the final bright vector is orthogonal to the destination.
    let partial = o.norm() > IDENTITY_TOL;
    // A disjoint move lands on -dst; when amplitudes stay behind the
    // relative sign matters and is flipped so the state arrives as +dst.
    let src_weight = match (partial, shared) {
        (true, _) => -(n / o.norm()) * (o / o.norm()),
        (false, true) => Complex64::new(-1.0, 0.0),
        (false, false) => Complex64::new(1.0, 0.0),
    };
    let mut drives = Vec::new();
    for k in 0..lattice.n_nodes() {
        let d = (v[k] * signs[k]).conj();
        let s = (src_weight * src[k] * signs[k]).conj();
        match (d.norm() > IDENTITY_TOL, s.norm() > IDENTITY_TOL) {
            (true, true) => {
                flags.push(format!("node {k} carries both source and destination weight"));
                drives.push(Drive { node: k, role: Role::Dest, value: d });
            }
            (true, false) => drives.push(Drive { node: k, role: Role::Dest, value: d }),
            (false, true) => drives.push(Drive { node: k, role: Role::Source, value: s }),
            (false, false) => {}
        }
    }
    let peak = drives.iter().map(|d| d.value.norm()).fold(0.0, f64::max);
    for d in &mut drives {
        d.value /= peak;
    }
    Ok(Some(Pattern { drives, partial }))
}

impl MovePlan {
    pub fn new(moves: Vec<Move>, options: RampOptions) -> Self {
        Self { moves, options }
    }

    /// Build the protocol; the initial state is the first move's source and
    /// the target the last move's destination.
    pub fn build(&self, lattice: &Lattice) -> Result<Planned> {
        let o = &self.options;
        o.check()?;
        let (first, last) = match (self.moves.first(), self.moves.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::InvalidProtocol("empty move plan".into())),
        };
        let n = lattice.n_nodes();
        let mut segments: Vec<Vec<RampSegment>> = vec![Vec::new(); n];
        let mut drive_of: Vec<Option<Complex64>> = vec![None; n];
        let mut flags = Vec::new();
        let mut t0 = o.margin;
        for mv in &self.moves {
            let Some(pattern) = plan_move(lattice, mv, &mut flags)? else {
                continue;
            };
            let a = t0;
            let b = a + o.lead;
            let c = b + o.overlap;
            let d = c + o.lead;
            for dr in &pattern.drives {
                let value = dr.value * o.omega_max;
                match drive_of[dr.node] {
                    Some(prev) if (prev - value).norm() > 1e-12 * o.omega_max => {
                        return Err(Error::InvalidProtocol(format!(
                            "node {} needs different drives in successive moves",
                            dr.node
                        )));
                    }
                    _ => drive_of[dr.node] = Some(value),
                }
                let (on, off) = match dr.role {
                    Role::Dest if pattern.partial => (a, d),
                    Role::Dest => (a, c),
                    Role::Source => (b, d),
                };
                let amp = value.norm();
                let segs = &mut segments[dr.node];
                segs.push(RampSegment::turn_on(o.rate, on, amp));
                segs.push(RampSegment::turn_off(o.rate, off, amp));
            }
            t0 = d + o.lead;
        }
        let duration = t0 - o.lead + o.margin;
        let schedules = segments
            .into_iter()
            .zip(&drive_of)
            .map(|(segs, dr)| Schedule { segments: segs, phase: dr.map_or(0.0, |z| z.arg()) })
            .collect();
        let protocol = Protocol {
            schedules,
            duration: duration.max(2.0 * o.margin),
            initial: first.from.clone(),
            target: last.to.clone(),
        };
        protocol.validate(n)?;
        Ok(Planned { protocol, flags })
    }
}

/// Sequential counterintuitive transfer of `|p_path[0]>` along `path`.
pub fn transfer_protocol(lattice: &Lattice, path: &[usize], options: &RampOptions) -> Result<Protocol> {
    let n = lattice.n_nodes();
    let Some(&start) = path.first() else {
        return Err(Error::InvalidProtocol("empty path".into()));
    };
    if let Some(&k) = path.iter().find(|&&k| k >= n) {
        return Err(Error::LabelOutOfRange { label: format!("node {k}"), size: n });
    }
    if let Some(w) = path.windows(2).find(|w| lattice.bond_between(w[0], w[1]).is_none()) {
        return Err(Error::NotAdjacent(w[0], w[1]));
    }
    if path.len() == 1 {
        options.check()?;
        return Ok(Protocol::idle(n, 2.0 * options.margin, StateSpec::site(start), StateSpec::site(start)));
    }
    let moves = path
        .windows(2)
        .map(|w| Move { from: StateSpec::site(w[0]), to: StateSpec::site(w[1]) })
        .collect();
    Ok(MovePlan::new(moves, options.clone()).build(lattice)?.protocol)
}

/// Carry one superposition to another in a single move.
pub fn split_protocol(
    lattice: &Lattice,
    from: &StateSpec,
    to: &StateSpec,
    options: &RampOptions,
) -> Result<Planned> {
    let src = dense(lattice, from)?;
    let dst = dense(lattice, to)?;
    if (inner(&src, &dst).norm() - 1.0).abs() < IDENTITY_TOL {
        options.check()?;
        return Ok(Planned {
            protocol: Protocol::idle(lattice.n_nodes(), 2.0 * options.margin, from.clone(), to.clone()),
            flags: Vec::new(),
        });
    }
    MovePlan::new(vec![Move { from: from.clone(), to: to.clone() }], options.clone()).build(lattice)
}

/// Spread `|p_0>` over nodes `1..N` of an open chain with amplitudes
/// `exp(i phi0 x)` on node `x`.
pub fn fourier_protocol(lattice: &Lattice, phi0: f64, options: &RampOptions) -> Result<Protocol> {
    if !lattice.is_open_chain() {
        return Err(Error::InvalidProtocol("the Fourier generator needs an open chain".into()));
    }
    let nodes: Vec<usize> = (1..lattice.n_nodes()).collect();
    let to = StateSpec::Fourier { nodes, q: (phi0, 0.0) };
    Ok(split_protocol(lattice, &StateSpec::site(0), &to, options)?.protocol)
}
