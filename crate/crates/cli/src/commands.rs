//! The four subcommands.

use std::fs;
use std::path::PathBuf;

use cavnet::darkstates::{dark_report, DarkReport, DEFAULT_NULL_TOL};
use cavnet::evolve::{integrate, phase_profile, IntegratorConfig, Trajectory, PHASE_FLOOR};
use cavnet::hamiltonian::SystemParams;
use cavnet::lattice::Lattice;
use cavnet::protocol::{optimize, Objective, Protocol};
use cavnet::sector::SectorBasis;
use cavnet::target::wrap_phase;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BuiltProtocol, Format, Loaded};
use crate::error::{CliError, CliResult};
use crate::plot::{self, Frame, Series};

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub formats: Option<Vec<Format>>,
    pub assert_fidelity: Option<f64>,
    pub at: Option<f64>,
}

/// Where and what to write.
pub struct Outputs {
    pub dir: PathBuf,
    pub stem: String,
    pub formats: Vec<Format>,
}

impl Outputs {
    fn new(loaded: &Loaded, o: &Overrides) -> Self {
        Self {
            dir: o.out.clone().unwrap_or_else(|| loaded.config.output.dir.clone()),
            stem: loaded.stem(),
            formats: o.formats.clone().unwrap_or_else(|| loaded.config.output.formats.clone()),
        }
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn write(&self, suffix: &str, contents: &str) -> CliResult<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let path = self.dir.join(format!("{}{suffix}", self.stem));
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Result of a command: the machine-readable summary line and files written.
#[derive(Debug, Clone)]
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// Fidelity checked against `--assert-fidelity`.
    pub fidelity: Option<f64>,
}

fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || x.abs() >= 1e-3 {
        format!("{x:.6}")
    } else {
        format!("{x:.3e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), num)
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes") + "\n"
}

fn check_threshold(report: Report, o: &Overrides) -> CliResult<Report> {
    match (o.assert_fidelity, report.fidelity) {
        (Some(required), Some(fidelity)) if fidelity < required => {
            println!("{}", report.summary);
            Err(CliError::Threshold { fidelity, required })
        }
        _ => Ok(report),
    }
}

struct System {
    lattice: Lattice,
    params: SystemParams,
    built: BuiltProtocol,
}

fn system(loaded: &Loaded) -> CliResult<System> {
    let cfg = &loaded.config;
    let lattice = cfg.lattice.build()?;
    cfg.params.validate(&lattice)?;
    let built = cfg.protocol.build(&lattice, loaded.base_dir())?;
    Ok(System { lattice, params: cfg.params.clone(), built })
}

/// How closely the final state matches the target on the target's nodes.
#[derive(Debug, Clone, Serialize)]
pub struct TargetMetrics {
    pub nodes: Vec<usize>,
    /// `max |P_k - |t_k|^2|`.
    pub pop_error: f64,
    /// `max P_k - min P_k`.
    pub pop_spread: f64,
    /// Largest gauge-fixed phase mismatch; absent when a node is empty.
    pub phase_error: Option<f64>,
    /// Phase-ramp metric when the target phases step uniformly.
    pub equispacing: Option<f64>,
}

fn target_metrics(traj: &Trajectory, lattice: &Lattice, protocol: &Protocol) -> CliResult<TargetMetrics> {
    let amps = protocol.target.node_amplitudes(lattice.coords())?;
    let last = traj.last();
    let nodes: Vec<usize> = amps.iter().map(|a| a.0).collect();
    let pops: Vec<f64> = nodes.iter().map(|&k| last.populations[k]).collect();
    let pop_error = amps.iter().zip(&pops).map(|((_, z), p)| (p - z.norm_sqr()).abs()).fold(0.0, f64::max);
    let pop_spread = pops.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - pops.iter().copied().fold(f64::INFINITY, f64::min);
    let defined = pops.iter().all(|p| p.sqrt() >= PHASE_FLOOR);
    let phase_error = defined.then(|| {
        let (r, zr) = amps[0];
        amps.iter()
            .map(|&(k, z)| {
                let got = last.phases[k] - last.phases[r];
                wrap_phase(got - (z.arg() - zr.arg())).abs()
            })
            .fold(0.0, f64::max)
    });
    let steps: Vec<f64> = amps.windows(2).map(|w| wrap_phase(w[1].1.arg() - w[0].1.arg())).collect();
    let uniform = steps.len() >= 2 && steps.iter().all(|s| wrap_phase(s - steps[0]).abs() < 1e-9);
    let equispacing = if uniform && defined {
        phase_profile(traj, protocol.duration, nodes[0], steps[0], &nodes)?.equispacing
    } else {
        None
    };
    Ok(TargetMetrics { nodes, pop_error, pop_spread, phase_error, equispacing })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveSummary {
    pub fidelity: f64,
    pub fidelity_conditional: f64,
    pub leakage: f64,
    pub norm2: f64,
    pub min_gap: Option<f64>,
    pub min_dark_population: Option<f64>,
    pub max_norm_drift: f64,
    pub max_norm_increase: f64,
    pub duration: f64,
    pub steps: usize,
    pub populations: Vec<f64>,
    pub target: TargetMetrics,
    pub flags: Vec<String>,
}

#[derive(Serialize)]
struct EvolveJson<'a> {
    lattice: &'a Lattice,
    params: &'a SystemParams,
    integrator: &'a IntegratorConfig,
    protocol_hash: String,
    protocol: &'a Protocol,
    summary: &'a EvolveSummary,
    samples: &'a [cavnet::evolve::Sample],
}

fn evolve_svg(traj: &Trajectory, protocol: &Protocol) -> String {
    let n = protocol.n_nodes();
    let times = traj.times();
    let rabi: Vec<Series> = (0..n)
        .filter(|&k| !protocol.schedules[k].segments.is_empty())
        .map(|k| {
            let pts = times.iter().map(|&t| (t, protocol.schedules[k].value(t).norm())).collect();
            Series::new(format!("|Omega_{}|", k + 1), pts)
        })
        .collect();
    let pops: Vec<Series> = (0..n)
        .map(|k| Series::new(format!("P{}", k + 1), traj.samples.iter().map(|s| (s.t, s.populations[k])).collect()))
        .chain(std::iter::once(Series::new(
            "Q+F",
            traj.samples.iter().map(|s| (s.t, s.leakage())).collect(),
        )))
        .collect();
    let last = traj.last();
    let reference = (0..n).max_by(|&a, &b| last.populations[a].total_cmp(&last.populations[b])).unwrap_or(0);
    let wheel: Vec<(String, f64, f64)> = (0..n)
        .filter(|&k| last.populations[k].sqrt() >= 1e-3)
        .map(|k| (format!("{}", k + 1), last.populations[k].sqrt(), last.phases[k] - last.phases[reference]))
        .collect();
    let w = 760.0;
    let mut body = plot::line_panel(Frame { x: 0.0, y: 0.0, w, h: 260.0 }, "Rabi frequencies", "t (1/g)", "|Omega| (g)", &rabi);
    body += &plot::line_panel(Frame { x: 0.0, y: 260.0, w, h: 260.0 }, "Populations", "t (1/g)", "|A|^2", &pops);
    body += &plot::phase_wheel(Frame { x: 0.0, y: 520.0, w, h: 300.0 }, "Final amplitudes", &wheel);
    plot::document(w, 830.0, &body)
}

pub fn evolve(loaded: &Loaded, o: &Overrides) -> CliResult<Report> {
    let sys = system(loaded)?;
    let protocol = &sys.built.protocol;
    let cfg = &loaded.config.integrator;
    let traj = integrate(&sys.lattice, &sys.params, protocol, cfg)?;
    let last = traj.last();
    let summary = EvolveSummary {
        fidelity: last.fidelity,
        fidelity_conditional: last.fidelity_conditional,
        leakage: last.leakage(),
        norm2: last.norm2,
        min_gap: traj.min_gap(),
        min_dark_population: traj.samples.iter().filter_map(|s| s.dark_population).min_by(f64::total_cmp),
        max_norm_drift: traj.max_norm_drift,
        max_norm_increase: traj.max_norm_increase,
        duration: protocol.duration,
        steps: traj.steps,
        populations: last.populations.clone(),
        target: target_metrics(&traj, &sys.lattice, protocol)?,
        flags: sys.built.flags.clone(),
    };
    let out = Outputs::new(loaded, o);
    let mut files = Vec::new();
    if out.wants(Format::Csv) {
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).map_err(|e| CliError::io(&out.dir, e))?;
        files.push(out.write(".csv", &String::from_utf8(buf).expect("csv is ascii"))?);
    }
    if out.wants(Format::Json) {
        let doc = EvolveJson {
            lattice: &sys.lattice,
            params: &sys.params,
            integrator: cfg,
            protocol_hash: protocol.hash(),
            protocol,
            summary: &summary,
            samples: &traj.samples,
        };
        files.push(out.write(".json", &json(&doc))?);
    }
    if out.wants(Format::Svg) {
        files.push(out.write(".svg", &evolve_svg(&traj, protocol))?);
    }
    let t = &summary.target;
    let summary_line = format!(
        "evolve fidelity={} fidelity_conditional={} leakage={} norm2={} min_gap={} pop_error={} pop_spread={} phase_error={} equispacing={} duration={} flags={}",
        num(summary.fidelity),
        num(summary.fidelity_conditional),
        num(summary.leakage),
        num(summary.norm2),
        opt_num(summary.min_gap),
        num(t.pop_error),
        num(t.pop_spread),
        opt_num(t.phase_error),
        opt_num(t.equispacing),
        num(summary.duration),
        summary.flags.len()
    );
    check_threshold(Report { summary: summary_line, files, fidelity: Some(summary.fidelity) }, o)
}

#[derive(Serialize)]
struct DarkJson<'a> {
    t: f64,
    hermitian_part: bool,
    report: &'a DarkReport,
}

pub fn dark(loaded: &Loaded, o: &Overrides) -> CliResult<Report> {
    let sys = system(loaded)?;
    let protocol = &sys.built.protocol;
    let dark_cfg = loaded.config.dark.clone().unwrap_or_default();
    let t = o.at.or(dark_cfg.at).unwrap_or(0.5 * protocol.duration);
    let params = if sys.params.is_hermitian() { sys.params.clone() } else { sys.params.hermitian_part() };
    let snap = protocol.snapshot(&params, t)?;
    let basis = SectorBasis::new(sys.lattice.clone());
    let report = dark_report(&basis, &snap, &params, dark_cfg.tolerance.unwrap_or(DEFAULT_NULL_TOL))?;
    let text = json(&DarkJson { t, hermitian_part: !sys.params.is_hermitian(), report: &report });
    let out = Outputs::new(loaded, o);
    let mut files = Vec::new();
    if out.wants(Format::Json) {
        files.push(out.write("_dark.json", &text)?);
    }
    print!("{text}");
    let summary = format!(
        "dark t={} dimension={} n_bonds={} gap={}",
        num(t),
        report.dimension,
        report.n_bonds,
        opt_num(report.gap)
    );
    Ok(Report { summary, files, fidelity: None })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub series: Option<f64>,
    pub value: f64,
    pub fidelity: f64,
    pub fidelity_conditional: f64,
    pub norm2: f64,
}

/// Orderings observed in a scan: each curve non-increasing in the scanned
/// value, and curves strictly decreasing in the series value pointwise.
#[derive(Debug, Clone, Serialize)]
pub struct ScanChecks {
    pub nonincreasing: bool,
    pub series_ordered: Option<bool>,
}

pub fn scan_rows(loaded: &Loaded) -> CliResult<(Vec<ScanRow>, ScanChecks)> {
    let sys = system(loaded)?;
    let scan = loaded
        .config
        .scan
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [scan] block".into()))?;
    scan.check(&sys.params)?;
    let series: Vec<Option<f64>> = match &scan.series {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let jobs: Vec<(Option<f64>, f64)> =
        series.iter().flat_map(|&s| scan.values.iter().map(move |&v| (s, v))).collect();
    let cfg = IntegratorConfig { diagnostics: false, ..loaded.config.integrator.clone() };
    let rows = jobs
        .par_iter()
        .map(|&(s, v)| -> CliResult<ScanRow> {
            let mut params = sys.params.clone();
            let mut protocol = sys.built.protocol.clone();
            if let (Some(sv), Some(outer)) = (s, &scan.series) {
                outer.parameter.apply(sv, &mut params, &mut protocol);
            }
            scan.parameter.apply(v, &mut params, &mut protocol);
            params.validate(&sys.lattice)?;
            let traj = integrate(&sys.lattice, &params, &protocol, &cfg)?;
            let last = traj.last();
            Ok(ScanRow {
                series: s,
                value: v,
                fidelity: last.fidelity,
                fidelity_conditional: last.fidelity_conditional,
                norm2: last.norm2,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let m = scan.values.len();
    let curves: Vec<&[ScanRow]> = rows.chunks(m).collect();
    let sorted_values = scan.values.windows(2).all(|w| w[0] <= w[1]);
    let nonincreasing = sorted_values
        && curves.iter().all(|c| c.windows(2).all(|w| w[1].fidelity <= w[0].fidelity));
    let series_ordered = scan.series.as_ref().map(|s| {
        s.values.windows(2).all(|w| w[0] < w[1])
            && curves.windows(2).all(|pair| pair[0].iter().zip(pair[1]).all(|(a, b)| a.fidelity > b.fidelity))
    });
    Ok((rows, ScanChecks { nonincreasing, series_ordered }))
}

pub fn scan(loaded: &Loaded, o: &Overrides) -> CliResult<Report> {
    let (rows, checks) = scan_rows(loaded)?;
    let scan = loaded.config.scan.as_ref().expect("checked by scan_rows");
    let pname = scan.parameter.name();
    let sname = scan.series.as_ref().map(|s| s.parameter.name());
    let mut csv = String::new();
    if let Some(sn) = sname {
        csv += &format!("{sn},");
    }
    csv += &format!("{pname},fidelity,fidelity_conditional,norm2\n");
    for r in &rows {
        if let Some(s) = r.series {
            csv += &format!("{},", cavnet::evolve::fmt_num(s));
        }
        csv += &format!(
            "{},{},{},{}\n",
            cavnet::evolve::fmt_num(r.value),
            cavnet::evolve::fmt_num(r.fidelity),
            cavnet::evolve::fmt_num(r.fidelity_conditional),
            cavnet::evolve::fmt_num(r.norm2)
        );
    }
    let out = Outputs::new(loaded, o);
    let mut files = Vec::new();
    if out.wants(Format::Csv) {
        files.push(out.write("_scan.csv", &csv)?);
    }
    if out.wants(Format::Json) {
        #[derive(Serialize)]
        struct ScanJson<'a> {
            parameter: &'a str,
            series: Option<&'a str>,
            rows: &'a [ScanRow],
            checks: &'a ScanChecks,
        }
        files.push(out.write(
            "_scan.json",
            &json(&ScanJson { parameter: pname, series: sname, rows: &rows, checks: &checks }),
        )?);
    }
    if out.wants(Format::Svg) {
        let curves: Vec<Series> = rows
            .chunks(scan.values.len())
            .map(|c| {
                let label = match (sname, c[0].series) {
                    (Some(sn), Some(v)) => format!("{sn} = {v}"),
                    _ => "fidelity".into(),
                };
                Series::new(label, c.iter().map(|r| (r.value, r.fidelity)).collect())
            })
            .collect();
        let body = plot::line_panel(
            Frame { x: 0.0, y: 0.0, w: 700.0, h: 420.0 },
            "Unconditional fidelity",
            pname,
            "F",
            &curves,
        );
        files.push(out.write("_scan.svg", &plot::document(700.0, 420.0, &body))?);
    }
    print!("{csv}");
    let best = rows.iter().map(|r| r.fidelity).fold(f64::NEG_INFINITY, f64::max);
    let summary = format!(
        "scan parameter={pname} rows={} nonincreasing={} series_ordered={} best_fidelity={}",
        rows.len(),
        checks.nonincreasing,
        checks.series_ordered.map_or_else(|| "none".into(), |b| b.to_string()),
        num(best)
    );
    check_threshold(Report { summary, files, fidelity: Some(best) }, o)
}

#[derive(Serialize)]
struct OptimizeJson<'a> {
    initial_fidelity: f64,
    fidelity: f64,
    evaluations: usize,
    seed: u64,
    free: &'a [cavnet::protocol::FreeParam],
    flags: &'a [String],
    protocol_hash: String,
    history: &'a [f64],
}

pub fn optimize_cmd(loaded: &Loaded, o: &Overrides) -> CliResult<Report> {
    let sys = system(loaded)?;
    let opt = loaded
        .config
        .optimize
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [optimize] block".into()))?;
    let protocol = &sys.built.protocol;
    let free = opt.free_params(protocol);
    let options = opt.options(o.seed);
    let objective = Objective {
        lattice: sys.lattice.clone(),
        params: sys.params.clone(),
        config: IntegratorConfig { diagnostics: false, ..loaded.config.integrator.clone() },
        conditional: opt.conditional,
    };
    let result = optimize(protocol, &free, &objective, &options)?;
    let out = Outputs::new(loaded, o);
    let mut files = Vec::new();
    files.push(out.write("_optimized.json", &json(&result.protocol))?);
    if out.wants(Format::Json) {
        files.push(out.write(
            "_optimize.json",
            &json(&OptimizeJson {
                initial_fidelity: result.initial_fidelity,
                fidelity: result.fidelity,
                evaluations: result.evaluations,
                seed: options.seed,
                free: &free,
                flags: &sys.built.flags,
                protocol_hash: result.protocol.hash(),
                history: &result.history,
            }),
        )?);
    }
    if out.wants(Format::Csv) {
        let mut csv = String::from("iteration,fidelity\n");
        for (k, f) in result.history.iter().enumerate() {
            csv += &format!("{k},{}\n", cavnet::evolve::fmt_num(*f));
        }
        files.push(out.write("_optimize.csv", &csv)?);
    }
    if out.wants(Format::Svg) {
        let pts = result.history.iter().enumerate().map(|(k, &f)| (k as f64, f)).collect();
        let body = plot::line_panel(
            Frame { x: 0.0, y: 0.0, w: 700.0, h: 420.0 },
            "Optimizer progress",
            "iteration",
            "best fidelity",
            &[Series::new("best", pts)],
        );
        files.push(out.write("_optimize.svg", &plot::document(700.0, 420.0, &body))?);
    }
    let summary = format!(
        "optimize fidelity={} initial_fidelity={} evaluations={} free={} seed={}",
        num(result.fidelity),
        num(result.initial_fidelity),
        result.evaluations,
        free.len(),
        options.seed
    );
    check_threshold(Report { summary, files, fidelity: Some(result.fidelity) }, o)
}
