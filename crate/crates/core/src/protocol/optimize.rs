//! Derivative-free refinement of protocol parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Protocol;
use crate::error::{Error, Result};
use crate::evolve::{integrate_state, IntegratorConfig};
use crate::hamiltonian::SystemParams;
use crate::lattice::Lattice;
use crate::sector::SectorBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeField {
    /// Ramp rate of every segment of the node (log scale).
    Rate,
    /// Center of one segment, or of all segments of the node when no
    /// segment is given.
    Center,
    /// Peak amplitude of every segment of the node (log scale).
    Amplitude,
    /// Node phase.
    Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParam {
    pub node: usize,
    pub field: FreeField,
    #[serde(default)]
    pub segment: Option<usize>,
}

impl FreeParam {
    pub fn new(node: usize, field: FreeField) -> Self {
        Self { node, field, segment: None }
    }

    pub fn center(node: usize, segment: usize) -> Self {
        Self { node, field: FreeField::Center, segment: Some(segment) }
    }

    fn check(&self, p: &Protocol) -> Result<()> {
        let sched = p.schedules.get(self.node).ok_or_else(|| Error::LabelOutOfRange {
            label: format!("node {}", self.node),
            size: p.schedules.len(),
        })?;
        match (self.field, self.segment) {
            (FreeField::Center, Some(k)) if k >= sched.segments.len() => Err(Error::Optimizer(format!(
                "node {} has no segment {k}",
                self.node
            ))),
            (FreeField::Center, _) => Ok(()),
            (_, Some(_)) => Err(Error::Optimizer(format!(
                "{:?} is a per-node parameter; a per-segment value would break continuity",
                self.field
            ))),
            (FreeField::Rate | FreeField::Amplitude, None) => {
                let seg = sched.segments.iter().find(|s| s.rate > 0.0 || s.amplitude > 0.0);
                match (self.field, seg) {
                    (FreeField::Rate, Some(s)) if s.rate > 0.0 => Ok(()),
                    (FreeField::Amplitude, Some(s)) if s.amplitude > 0.0 => Ok(()),
                    _ => Err(Error::Optimizer(format!(
                        "node {} has no positive {:?} to tune",
                        self.node, self.field
                    ))),
                }
            }
            (FreeField::Phase, None) => Ok(()),
        }
    }

    fn read(&self, p: &Protocol) -> f64 {
        let sched = &p.schedules[self.node];
        match self.field {
            FreeField::Rate => sched.segments.iter().map(|s| s.rate).find(|&r| r > 0.0).unwrap().ln(),
            FreeField::Amplitude => sched.segments.iter().map(|s| s.amplitude).fold(0.0, f64::max).ln(),
            FreeField::Center => match self.segment {
                Some(k) => sched.segments[k].center,
                None => 0.0,
            },
            FreeField::Phase => sched.phase,
        }
    }

    fn write(&self, p: &mut Protocol, x: f64) {
        let sched = &mut p.schedules[self.node];
        match self.field {
            FreeField::Rate => {
                for s in sched.segments.iter_mut().filter(|s| s.rate > 0.0) {
                    s.rate = x.exp();
                }
            }
            FreeField::Amplitude => {
                for s in sched.segments.iter_mut().filter(|s| s.amplitude > 0.0) {
                    s.amplitude = x.exp();
                }
            }
            FreeField::Center => match self.segment {
                Some(k) => sched.segments[k].center = x,
                None => sched.segments.iter_mut().for_each(|s| s.center += x),
            },
            FreeField::Phase => sched.phase = x,
        }
    }
}

/// Terminal fidelity of a protocol on a fixed system.
#[derive(Debug, Clone)]
pub struct Objective {
    pub lattice: Lattice,
    pub params: SystemParams,
    pub config: IntegratorConfig,
    pub conditional: bool,
}

impl Objective {
    pub fn new(lattice: Lattice, params: SystemParams) -> Self {
        Self { lattice, params, config: IntegratorConfig::fast(), conditional: false }
    }

    pub fn fidelity(&self, protocol: &Protocol) -> Result<f64> {
        let basis = SectorBasis::new(self.lattice.clone());
        let psi0 = protocol.initial.build(&basis)?;
        let cfg = IntegratorConfig {
            diagnostics: false,
            sample_every: usize::MAX,
            ..self.config.clone()
        };
        let traj = integrate_state(&basis, &self.params, protocol, psi0, &cfg)?;
        let last = traj.last();
        Ok(if self.conditional { last.fidelity_conditional } else { last.fidelity })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeOptions {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Initial simplex step for centers (1/g).
    pub center_step: f64,
    /// Initial simplex step for log rate and log amplitude.
    pub log_step: f64,
    /// Initial simplex step for phases (rad).
    pub phase_step: f64,
    /// Stop once this fidelity is reached.
    pub stop_at: Option<f64>,
    /// Candidates with a larger peak drive are rejected; defaults to twice
    /// the input peak.
    pub max_amplitude: Option<f64>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            budget: 500,
            restarts: 3,
            seed: 0,
            center_step: 10.0,
            log_step: 0.2,
            phase_step: 0.3,
            stop_at: None,
            max_amplitude: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub protocol: Protocol,
    pub fidelity: f64,
    pub initial_fidelity: f64,
    pub evaluations: usize,
    /// Best fidelity after each simplex iteration.
    pub history: Vec<f64>,
}

/// Nelder–Mead simplex minimizer with seeded restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Converged when the simplex value spread falls below this.
    pub ftol: f64,
    /// Stop as soon as a value at or below this is found.
    pub stop_below: f64,
}

/// Outcome of [`NelderMead::minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub history: Vec<f64>,
}

impl NelderMead {
    pub fn new(budget: usize, restarts: usize, seed: u64) -> Self {
        Self { budget, restarts, seed, ftol: 1e-9, stop_below: f64::NEG_INFINITY }
    }

    /// Minimize `f` from `x0` with per-coordinate initial steps. `f` may
    /// return `+inf` for infeasible points; errors abort the search.
    pub fn minimize<F>(&self, f: F, x0: &[f64], steps: &[f64]) -> Result<Minimum>
    where
        F: Fn(&[f64]) -> Result<f64> + Sync,
    {
        if self.budget == 0 {
            return Err(Error::Optimizer("budget must be at least 1".into()));
        }
        let dim = x0.len();
        let mut evals = 0usize;
        let mut best = (x0.to_vec(), f(x0)?);
        evals += 1;
        let mut history = vec![best.1];
        if dim == 0 {
            return Ok(Minimum { x: best.0, value: best.1, evaluations: evals, history });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let eval_many = |pts: &[Vec<f64>]| -> Result<Vec<f64>> { pts.par_iter().map(|p| f(p)).collect() };

        for round in 0..=self.restarts {
            if evals >= self.budget || best.1 <= self.stop_below {
                break;
            }
            // Axis simplex on the first round, randomly signed and scaled
            // afterwards.
            let mut simplex = vec![best.0.clone()];
            for k in 0..dim {
                let mut p = best.0.clone();
                let scale = if round == 0 {
                    1.0
                } else {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * rng.random_range(0.5..1.5)
                };
                p[k] += steps[k] * scale;
                simplex.push(p);
            }
            let room = self.budget - evals;
            let fresh: Vec<Vec<f64>> = simplex[1..].iter().take(room).cloned().collect();
            let vals = eval_many(&fresh)?;
            evals += vals.len();
            if vals.len() < dim {
                for (p, v) in fresh.into_iter().zip(vals) {
                    if v < best.1 {
                        best = (p, v);
                    }
                }
                break;
            }
            let mut fs = vec![best.1];
            fs.extend(vals);

            while evals < self.budget {
                let mut order: Vec<usize> = (0..=dim).collect();
                order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
                simplex = order.iter().map(|&i| simplex[i].clone()).collect();
                fs = order.iter().map(|&i| fs[i]).collect();
                if fs[0] < best.1 {
                    best = (simplex[0].clone(), fs[0]);
                }
                history.push(best.1);
                let spread = fs[dim] - fs[0];
                if best.1 <= self.stop_below || spread.is_nan() || spread <= self.ftol {
                    break;
                }
                let centroid: Vec<f64> = (0..dim)
                    .map(|k| simplex[..dim].iter().map(|p| p[k]).sum::<f64>() / dim as f64)
                    .collect();
                let along = |t: f64| -> Vec<f64> {
                    centroid.iter().zip(&simplex[dim]).map(|(c, w)| c + t * (w - c)).collect()
                };
                let xr = along(-1.0);
                let fr = f(&xr)?;
                evals += 1;
                if fr < fs[0] {
                    if evals >= self.budget {
                        simplex[dim] = xr;
                        fs[dim] = fr;
                        continue;
                    }
                    let xe = along(-2.0);
                    let fe = f(&xe)?;
                    evals += 1;
                    if fe < fr {
                        simplex[dim] = xe;
                        fs[dim] = fe;
                    } else {
                        simplex[dim] = xr;
                        fs[dim] = fr;
                    }
                } else if fr < fs[dim - 1] {
                    simplex[dim] = xr;
                    fs[dim] = fr;
                } else {
                    if evals >= self.budget {
                        break;
                    }
                    let (xc, fc) = if fr < fs[dim] {
                        let x = along(-0.5);
                        let v = f(&x)?;
                        (x, v)
                    } else {
                        let x = along(0.5);
                        let v = f(&x)?;
                        (x, v)
                    };
                    evals += 1;
                    if fc < fs[dim].min(fr) {
                        simplex[dim] = xc;
                        fs[dim] = fc;
                    } else {
                        let room = self.budget - evals;
                        if room < dim {
                            break;
                        }
                        let shrunk: Vec<Vec<f64>> = simplex[1..]
                            .iter()
                            .map(|p| p.iter().zip(&simplex[0]).map(|(x, b)| b + 0.5 * (x - b)).collect())
                            .collect();
                        let vals = eval_many(&shrunk)?;
                        evals += vals.len();
                        for (k, (p, v)) in shrunk.into_iter().zip(vals).enumerate() {
                            simplex[k + 1] = p;
                            fs[k + 1] = v;
                        }
                    }
                }
            }
            for (p, v) in simplex.iter().zip(&fs) {
                if *v < best.1 {
                    best = (p.clone(), *v);
                }
            }
        }
        history.push(best.1);
        Ok(Minimum { x: best.0, value: best.1, evaluations: evals, history })
    }
}

/// Tune `free` parameters of `protocol` to maximize terminal fidelity.
/// The returned protocol is never worse than the input. A zero budget
/// returns the input untouched, measured once outside the budget.
pub fn optimize(
    protocol: &Protocol,
    free: &[FreeParam],
    objective: &Objective,
    options: &OptimizeOptions,
) -> Result<OptimizeResult> {
    protocol.validate(objective.lattice.n_nodes())?;
    for fp in free {
        fp.check(protocol)?;
    }
    if options.budget == 0 {
        let f = objective.fidelity(protocol)?;
        return Ok(OptimizeResult {
            protocol: protocol.clone(),
            fidelity: f,
            initial_fidelity: f,
            evaluations: 0,
            history: vec![f],
        });
    }
    let cap = options.max_amplitude.unwrap_or(2.0 * protocol.peak());
    let x0: Vec<f64> = free.iter().map(|fp| fp.read(protocol)).collect();
    let steps: Vec<f64> = free
        .iter()
        .map(|fp| match fp.field {
            FreeField::Center => options.center_step,
            FreeField::Rate | FreeField::Amplitude => options.log_step,
            FreeField::Phase => options.phase_step,
        })
        .collect();
    let candidate = |x: &[f64]| -> Protocol {
        let mut p = protocol.clone();
        for (fp, &v) in free.iter().zip(x) {
            fp.write(&mut p, v);
        }
        p
    };
    let cost = |x: &[f64]| -> Result<f64> {
        let p = candidate(x);
        if p.peak() > cap * (1.0 + 1e-12) || p.validate(objective.lattice.n_nodes()).is_err() {
            return Ok(f64::INFINITY);
        }
        Ok(1.0 - objective.fidelity(&p)?)
    };
    let nm = NelderMead {
        budget: options.budget,
        restarts: options.restarts,
        seed: options.seed,
        ftol: 1e-9,
        stop_below: options.stop_at.map_or(f64::NEG_INFINITY, |f| 1.0 - f),
    };
    let min = nm.minimize(cost, &x0, &steps)?;
    let initial_fidelity = 1.0 - min.history[0];
    Ok(OptimizeResult {
        protocol: candidate(&min.x),
        fidelity: 1.0 - min.value,
        initial_fidelity,
        evaluations: min.evaluations,
        history: min.history.iter().map(|v| 1.0 - v).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{transfer_protocol, RampOptions};
    use crate::target::StateSpec;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| -> Result<f64> {
            Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        };
        let nm = NelderMead::new(2000, 3, 7);
        let m = nm.minimize(f, &[-1.2, 1.0], &[0.5, 0.5]).unwrap();
        assert!(m.value < 1e-6, "{m:?}");
        assert!(m.evaluations <= 2000);
        assert_eq!(m, nm.minimize(f, &[-1.2, 1.0], &[0.5, 0.5]).unwrap());
    }

    #[test]
    fn budget_is_respected() {
        let f = |x: &[f64]| -> Result<f64> { Ok(x.iter().map(|v| v * v).sum()) };
        for budget in [1, 2, 5, 17] {
            let m = NelderMead::new(budget, 3, 1).minimize(f, &[1.0, 2.0, 3.0], &[0.1; 3]).unwrap();
            assert!(m.evaluations <= budget, "{budget}: {}", m.evaluations);
            assert!(m.value <= 14.0);
        }
    }

    #[test]
    fn identity_protocol_unchanged() {
        let l = Lattice::chain(2, false).unwrap();
        let p = Protocol::idle(2, 10.0, StateSpec::site(0), StateSpec::site(0));
        let obj = Objective::new(l, SystemParams::default());
        let r = optimize(&p, &[], &obj, &OptimizeOptions::default()).unwrap();
        assert_eq!(r.protocol, p);
        assert_eq!(r.fidelity, 1.0);
    }

    #[test]
    fn zero_budget_returns_input() {
        let l = Lattice::chain(2, false).unwrap();
        let p = transfer_protocol(&l, &[0, 1], &RampOptions::default()).unwrap();
        let objective = Objective::new(l, SystemParams::default());
        let options = OptimizeOptions { budget: 0, ..Default::default() };
        let r = optimize(&p, &[FreeParam::new(0, FreeField::Rate)], &objective, &options).unwrap();
        assert_eq!(r.protocol, p);
        assert_eq!(r.evaluations, 0);
        assert!(r.fidelity > 0.99);
    }

    #[test]
    fn per_segment_amplitude_rejected() {
        let l = Lattice::chain(2, false).unwrap();
        let p = transfer_protocol(&l, &[0, 1], &RampOptions::default()).unwrap();
        let obj = Objective::new(l, SystemParams::default());
        let bad = FreeParam { node: 0, field: FreeField::Amplitude, segment: Some(0) };
        assert!(matches!(optimize(&p, &[bad], &obj, &OptimizeOptions::default()), Err(Error::Optimizer(_))));
    }
}
