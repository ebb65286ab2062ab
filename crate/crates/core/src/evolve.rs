//! Time integration of `i d(psi)/dt = H(t) psi` and the observables
//! recorded along the way.

use std::io::{self, Write};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::darkstates::{dark_manifold, dark_population, DEFAULT_NULL_TOL};
use crate::error::{Error, Result};
use crate::hamiltonian::{CouplingSnapshot, Hamiltonian, SystemParams, DEFAULT_DENSE_CAP};
use crate::lattice::Lattice;
use crate::protocol::Protocol;
use crate::sector::{SectorBasis, StateVector};
use crate::target::{wrap_phase, StateSpec};

/// Amplitudes below this magnitude have no defined phase.
pub const PHASE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order Runge–Kutta on a fixed grid.
    #[default]
    Rk4Fixed,
    /// Exact exponential of `H` frozen at each step midpoint.
    ExpmPiecewise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Requested step; the grid is refined so that it divides the duration.
    pub dt: f64,
    pub method: Method,
    /// Steps between recorded samples.
    pub sample_every: usize,
    /// Allowed |norm^2 - 1| in the lossless model.
    pub norm_drift_tol: f64,
    /// Upper limit on `dt * ||H||_bound`.
    pub max_step_norm: f64,
    /// Record dark-manifold population and spectral gap at every sample.
    pub diagnostics: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            method: Method::Rk4Fixed,
            sample_every: 100,
            norm_drift_tol: 1e-8,
            max_step_norm: 0.5,
            diagnostics: true,
        }
    }
}

impl IntegratorConfig {
    pub fn fast() -> Self {
        Self { diagnostics: false, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::IntegrationAccuracy(format!("step {} must be positive", self.dt)));
        }
        if self.sample_every == 0 {
            return Err(Error::IntegrationAccuracy("sample_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Observables at one recorded time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    /// |A_i|^2.
    pub populations: Vec<f64>,
    /// arg A_i (raw, not gauge fixed).
    pub phases: Vec<f64>,
    pub q_total: f64,
    pub f_total: f64,
    pub norm2: f64,
    /// Weight in the lossless dark manifold, when diagnostics are on.
    pub dark_population: Option<f64>,
    pub gap: Option<f64>,
    /// |<target|psi>|^2.
    pub fidelity: f64,
    /// |<target|psi>|^2 / norm^2.
    pub fidelity_conditional: f64,
}

impl Sample {
    pub fn p_total(&self) -> f64 {
        self.populations.iter().sum()
    }

    pub fn leakage(&self) -> f64 {
        self.q_total + self.f_total
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: StateVector,
    pub steps: usize,
    pub dt: f64,
    /// Largest single-step increase of the norm squared.
    pub max_norm_increase: f64,
    /// Largest |norm^2 - 1| over the recorded samples.
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory has at least one sample")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn min_gap(&self) -> Option<f64> {
        self.samples.iter().filter_map(|s| s.gap).min_by(f64::total_cmp)
    }

    /// Sample closest to time `at`.
    pub fn sample_near(&self, at: f64) -> &Sample {
        self.samples
            .iter()
            .min_by(|a, b| (a.t - at).abs().total_cmp(&(b.t - at).abs()))
            .expect("a trajectory has at least one sample")
    }

    /// Write the trajectory as CSV:
    /// `t,P1..PN,theta1..thetaN,Qtot,Ftot,norm2,dark_pop,fidelity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.samples.first().map_or(0, |s| s.populations.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("P{i}")));
        header.extend((1..=n).map(|i| format!("theta{i}")));
        header.extend(["Qtot", "Ftot", "norm2", "dark_pop", "fidelity"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![fmt_num(s.t)];
            row.extend(s.populations.iter().map(|&x| fmt_num(x)));
            row.extend(s.phases.iter().map(|&x| fmt_num(x)));
            row.extend([s.q_total, s.f_total, s.norm2].map(fmt_num));
            row.push(s.dark_population.map_or_else(|| "nan".into(), fmt_num));
            row.push(fmt_num(s.fidelity));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Fixed-format float for reproducible text output.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x:.12e}")
    }
}

/// `|<target|psi>|^2`, optionally renormalized by the surviving norm.
pub fn fidelity(psi: &StateVector, target: &StateVector, conditional: bool) -> Result<f64> {
    let overlap = target.inner(psi)?.norm_sqr();
    if conditional {
        let n2 = psi.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::UndefinedFidelity);
        }
        Ok(overlap / n2)
    } else {
        Ok(overlap)
    }
}

/// [`fidelity`] against a target description.
pub fn fidelity_to(
    psi: &StateVector,
    basis: &SectorBasis,
    target: &StateSpec,
    conditional: bool,
) -> Result<f64> {
    fidelity(psi, &target.build(basis)?, conditional)
}

/// Integrate the protocol from its declared initial state.
pub fn integrate(
    lattice: &Lattice,
    params: &SystemParams,
    protocol: &Protocol,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let basis = SectorBasis::new(lattice.clone());
    let psi0 = protocol.initial.build(&basis)?;
    integrate_state(&basis, params, protocol, psi0, config)
}

/// Integrate from an explicit initial state.
pub fn integrate_state(
    basis: &SectorBasis,
    params: &SystemParams,
    protocol: &Protocol,
    psi0: StateVector,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    params.validate(basis.lattice())?;
    protocol.validate(basis.n_nodes())?;
    basis.check(&psi0)?;
    let hermitian = params.is_hermitian();
    if hermitian && (psi0.norm_sqr() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParams(format!(
            "initial state has norm^2 {}",
            psi0.norm_sqr()
        )));
    }
    let target = protocol.target.build(basis)?;

    let duration = protocol.duration;
    let steps = if duration > 0.0 { (duration / config.dt).ceil() as usize } else { 0 };
    let dt = if steps > 0 { duration / steps as f64 } else { 0.0 };

    // Step-size guard against the largest drive in the protocol.
    let peak_s = protocol.peak() / params.denominator().norm();
    let peak_snap = CouplingSnapshot::from_couplings(
        &vec![Complex64::new(peak_s, 0.0); basis.n_nodes()],
        params,
    );
    let bound = Hamiltonian::new(basis, &peak_snap, params)?.norm_bound();
    if dt * bound > config.max_step_norm {
        return Err(Error::IntegrationAccuracy(format!(
            "dt * ||H|| = {:.3} exceeds {}; use dt <= {:.4}",
            dt * bound,
            config.max_step_norm,
            config.max_step_norm / bound
        )));
    }

    let mut recorder = Recorder {
        basis,
        params,
        protocol,
        target: &target,
        config,
        hermitian,
        samples: Vec::with_capacity(steps / config.sample_every + 2),
        max_drift: 0.0,
    };
    let mut psi = psi0.into_amplitudes();
    recorder.record(0.0, &psi)?;

    let mut max_increase = 0.0f64;
    let mut norm_prev = norm_sqr(&psi);
    let mut stepper = Stepper::new(basis, params, protocol, config.method);
    for k in 0..steps {
        let t = k as f64 * dt;
        stepper.step(&mut psi, t, dt);
        let n2 = norm_sqr(&psi);
        max_increase = max_increase.max(n2 - norm_prev);
        norm_prev = n2;
        if !n2.is_finite() {
            return Err(Error::IntegrationAccuracy(format!("state diverged at t = {t}")));
        }
        let done = k + 1 == steps;
        if (k + 1) % config.sample_every == 0 || done {
            let t_next = if done { duration } else { (k + 1) as f64 * dt };
            recorder.record(t_next, &psi)?;
        }
    }
    let max_norm_drift = recorder.max_drift;
    Ok(Trajectory {
        samples: recorder.samples,
        final_state: StateVector::from_amplitudes(psi),
        steps,
        dt,
        max_norm_increase: max_increase,
        max_norm_drift,
    })
}

fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

struct Recorder<'a> {
    basis: &'a SectorBasis,
    params: &'a SystemParams,
    protocol: &'a Protocol,
    target: &'a StateVector,
    config: &'a IntegratorConfig,
    hermitian: bool,
    samples: Vec<Sample>,
    max_drift: f64,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, psi: &[Complex64]) -> Result<()> {
        let b = self.basis;
        let n = b.n_nodes();
        let a = &psi[..n];
        let q_total = norm_sqr(&psi[n..2 * n]);
        let f_total = norm_sqr(&psi[2 * n..]);
        let norm2 = norm_sqr(psi);
        let drift = (norm2 - 1.0).abs();
        self.max_drift = self.max_drift.max(drift);
        if self.hermitian && drift > self.config.norm_drift_tol {
            return Err(Error::IntegrationAccuracy(format!(
                "norm drift {drift:.3e} at t = {t:.3} exceeds {:.1e}; reduce dt",
                self.config.norm_drift_tol
            )));
        }
        let state = StateVector::from_amplitudes(psi.to_vec());
        let overlap = self.target.inner(&state)?.norm_sqr();
        let (dark, gap) = if self.config.diagnostics {
            let lossless = self.params.hermitian_part();
            let snap = CouplingSnapshot::from_rabi(&self.protocol.rabi_at(t)?, &lossless);
            let manifold = dark_manifold(b, &snap, &lossless, DEFAULT_NULL_TOL)?;
            (Some(dark_population(&state, &manifold)), manifold.gap().ok())
        } else {
            (None, None)
        };
        self.samples.push(Sample {
            t,
            populations: a.iter().map(|z| z.norm_sqr()).collect(),
            phases: a.iter().map(|z| z.arg()).collect(),
            q_total,
            f_total,
            norm2,
            dark_population: dark,
            gap,
            fidelity: overlap,
            fidelity_conditional: if norm2 > 0.0 { overlap / norm2 } else { f64::NAN },
        });
        Ok(())
    }
}

/// One-step propagators with reusable buffers.
struct Stepper<'a> {
    basis: &'a SectorBasis,
    params: &'a SystemParams,
    protocol: &'a Protocol,
    method: Method,
    omega: Vec<Complex64>,
    snaps: [CouplingSnapshot; 3],
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(
        basis: &'a SectorBasis,
        params: &'a SystemParams,
        protocol: &'a Protocol,
        method: Method,
    ) -> Self {
        let n = basis.n_nodes();
        let dim = basis.dim();
        let empty = CouplingSnapshot::from_rabi(&vec![Complex64::new(0.0, 0.0); n], params);
        Self {
            basis,
            params,
            protocol,
            method,
            omega: vec![Complex64::new(0.0, 0.0); n],
            snaps: [empty.clone(), empty.clone(), empty],
            k: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); dim]),
            tmp: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    fn load(&mut self, slot: usize, t: f64) {
        self.protocol.rabi_into(t, &mut self.omega);
        self.snaps[slot].update_from_rabi(&self.omega, self.params);
    }

    /// `out = -i H(snap) x`.
    fn deriv(&self, slot: usize, x: &[Complex64], out: &mut [Complex64]) {
        let h = Hamiltonian { basis: self.basis, snap: &self.snaps[slot], params: self.params };
        h.apply_slice(x, out);
        for z in out.iter_mut() {
            *z = Complex64::new(z.im, -z.re);
        }
    }

    fn step(&mut self, psi: &mut [Complex64], t: f64, dt: f64) {
        match self.method {
            Method::Rk4Fixed => self.rk4(psi, t, dt),
            Method::ExpmPiecewise => self.expm(psi, t, dt),
        }
    }

    fn rk4(&mut self, psi: &mut [Complex64], t: f64, dt: f64) {
        self.load(0, t);
        self.load(1, t + 0.5 * dt);
        self.load(2, t + dt);
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        self.deriv(0, psi, &mut k[0]);
        for ((t_, p), d) in tmp.iter_mut().zip(psi.iter()).zip(&k[0]) {
            *t_ = p + d * (0.5 * dt);
        }
        self.deriv(1, &tmp, &mut k[1]);
        for ((t_, p), d) in tmp.iter_mut().zip(psi.iter()).zip(&k[1]) {
            *t_ = p + d * (0.5 * dt);
        }
        self.deriv(1, &tmp, &mut k[2]);
        for ((t_, p), d) in tmp.iter_mut().zip(psi.iter()).zip(&k[2]) {
            *t_ = p + d * dt;
        }
        self.deriv(2, &tmp, &mut k[3]);
        let c = dt / 6.0;
        for (i, p) in psi.iter_mut().enumerate() {
            *p += (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) * c;
        }
        self.k = k;
        self.tmp = tmp;
    }

    fn expm(&mut self, psi: &mut [Complex64], t: f64, dt: f64) {
        self.load(1, t + 0.5 * dt);
        let h = Hamiltonian { basis: self.basis, snap: &self.snaps[1], params: self.params };
        let m = h.dense(DEFAULT_DENSE_CAP).expect("dimension checked by caller");
        let u = (m * Complex64::new(0.0, -dt)).exp();
        let out = u * DVector::from_column_slice(psi);
        psi.copy_from_slice(out.as_slice());
    }
}

/// Gauge-fixed phases at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseProfile {
    pub t: f64,
    pub reference: usize,
    /// Phase of each node relative to the reference, wrapped to (-pi, pi];
    /// `None` where the amplitude is below [`PHASE_FLOOR`].
    pub phases: Vec<Option<f64>>,
    /// `max |(theta_{k+1} - theta_k) - step|` over consecutive nodes of the
    /// requested range, when every phase there is defined.
    pub equispacing: Option<f64>,
}

/// Phases at the sample nearest `at`, relative to `reference`, with the
/// equispacing metric over consecutive entries of `nodes`.
pub fn phase_profile(
    traj: &Trajectory,
    at: f64,
    reference: usize,
    step: f64,
    nodes: &[usize],
) -> Result<PhaseProfile> {
    let s = traj.sample_near(at);
    let n = s.populations.len();
    if reference >= n || nodes.iter().any(|&k| k >= n) {
        return Err(Error::LabelOutOfRange { label: format!("node {reference}"), size: n });
    }
    let defined = |k: usize| s.populations[k].sqrt() >= PHASE_FLOOR;
    if !defined(reference) {
        return Err(Error::InvalidTarget(format!("reference node {reference} has no amplitude")));
    }
    let theta0 = s.phases[reference];
    let phases: Vec<Option<f64>> = (0..n)
        .map(|k| defined(k).then(|| wrap_phase(s.phases[k] - theta0)))
        .collect();
    let equispacing = nodes
        .windows(2)
        .map(|pair| match (phases[pair[0]], phases[pair[1]]) {
            (Some(a), Some(b)) => Some(wrap_phase(b - a - step).abs()),
            _ => None,
        })
        .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)));
    Ok(PhaseProfile { t: s.t, reference, phases, equispacing })
}
