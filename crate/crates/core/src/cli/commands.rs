//! Command implementations behind the binary (and any other front end).

use crate::error::{Error, Result};
use crate::numlin;
use crate::pendulum;
use crate::sbrl::{self, LtiSystem, SweepGrid};
use crate::sim::{self, SimConfig};
use crate::synthesis::{
    self, lagrange_output_feedback_uncontrollable, lagrange_output_feedback_unobservable,
    lagrange_state_feedback, output_feedback_pseudo_hinf_v1, output_feedback_pseudo_hinf_v2,
    rationality_search, state_feedback_pseudo_hinf, ClosedLoop,
    RationalitySearchConfig,
};

use super::model::{format_g17, initial_state, ControllerFile, Model};
use super::report::{
    CertificateReport, GainSweepReport, LagrangeSweepReport, RunReport, SectorReport,
    SimulationReport, SolutionsReport, SpectrumReport,
};

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub lambda: Option<f64>,
    pub tau0: Option<f64>,
    pub grid: SweepGrid,
    pub sector_samples: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            lambda: None,
            tau0: None,
            grid: SweepGrid::default(),
            sector_samples: 1000,
        }
    }
}

/// Open-loop analysis: spectra, sector verification, strict-gain
/// certificates, and (when the zero mode exists) the lattice certificate.
pub fn cmd_analyze(model: &Model, opts: &AnalyzeOptions) -> Result<RunReport> {
    let mut report = RunReport::new("analyze", &model.name);
    let plant = &model.plant;

    let spectrum = numlin::eigenvalues(&plant.a.view())?;
    report.push_verdict(
        "pseudo-Hurwitz",
        spectrum.is_pseudo_hurwitz(),
        format!(
            "{} stable, {} unstable, {} inside band",
            spectrum.stable_count, spectrum.unstable_count, spectrum.imaginary_count
        ),
    );
    report.spectrum = Some(SpectrumReport::from_spectrum(&spectrum));

    let lambda = opts.lambda.or(model.synthesis.as_ref().and_then(|s| s.lambda));
    if let Some(l) = lambda {
        let shifted = &plant.a + &(ndarray::Array2::<f64>::eye(plant.states()) * l);
        let sspec = numlin::eigenvalues(&shifted.view())?;
        report.push_verdict(
            "shifted pseudo-Hurwitz",
            sspec.is_pseudo_hurwitz(),
            format!("shift {l}: {} stable, {} unstable", sspec.stable_count, sspec.unstable_count),
        );
        report.shifted_spectrum = Some(SpectrumReport::from_spectrum(&sspec));
    }

    let sector = pendulum::verify_sector(&model.bank, opts.sector_samples)?;
    for (i, v) in sector.iter().enumerate() {
        report.push_verdict(
            &format!("sector channel {i}"),
            v.pass,
            format!("worst ratio {:.6} at z = {:.6}", v.worst_ratio, v.worst_z),
        );
    }
    report.sector = Some(SectorReport::from_verdicts(&sector));

    let open_loop = LtiSystem::new(plant.a.clone(), plant.b1.clone(), plant.c1.clone())?;
    let gain = sbrl::check_gain_condition(&open_loop, &opts.grid)?;
    report.push_verdict(
        "open-loop strict gain bound",
        gain.holds,
        format!("peak {:.6e} at omega {:.6e}", gain.peak_gain, gain.peak_omega),
    );
    report.gain_sweep = Some(GainSweepReport::from(&gain));

    match sbrl::check_theorem1(&open_loop)? {
        sbrl::Theorem1Outcome::Certified(cert) => {
            report.push_verdict(
                "state-space certificate",
                true,
                format!("{} branch, inertia {}", cert.branch, cert.inertia),
            );
        }
        sbrl::Theorem1Outcome::NotCertified { reason } => {
            report.push_verdict("state-space certificate", false, reason);
        }
        sbrl::Theorem1Outcome::Inconclusive { reason } => {
            report.push_verdict("state-space certificate", false, format!("inconclusive: {reason}"));
        }
    }

    if let Some(l) = lambda {
        let tau = model
            .synthesis
            .as_ref()
            .and_then(|s| s.tau.clone())
            .unwrap_or_else(|| vec![1.0; plant.channels()]);
        let mu = model.bank.sector_bounds();
        match sbrl::check_lagrange_frequency(&open_loop, l, &tau, &mu, &opts.grid) {
            Ok(sweep) => {
                report.push_verdict(
                    "open-loop shifted weighted sweep",
                    sweep.holds,
                    format!("worst margin {:.6e} at omega {:.6e}", sweep.worst_margin, sweep.worst_omega),
                );
                report.lagrange_sweep = Some(LagrangeSweepReport::from(&sweep));
            }
            Err(Error::Validation(msg)) => {
                report.push_verdict("open-loop shifted weighted sweep", false, msg);
            }
            Err(e) => return Err(e),
        }
    }

    let tau0 = opts
        .tau0
        .or(model.synthesis.as_ref().and_then(|s| s.tau0))
        .unwrap_or(1.0);
    match pendulum::pendulum_certificate(&plant.a.view(), &plant.c1.view(), &model.bank, tau0) {
        Ok(cert) => {
            report.push_verdict(
                "lattice certificate",
                true,
                format!("common denominator {}", cert.p_bar),
            );
            report.certificate = Some(CertificateReport::from(&cert));
        }
        Err(e) => report.push_verdict("lattice certificate", false, e.to_string()),
    }

    report.success = true;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SynthesizeOptions {
    pub theorem: u8,
    pub lambda: Option<f64>,
    pub tau: Option<Vec<f64>>,
    pub tau0: Option<f64>,
    pub search: bool,
    pub search_cfg: RationalitySearchConfig,
}

impl SynthesizeOptions {
    pub fn new(theorem: u8) -> Self {
        SynthesizeOptions {
            theorem,
            lambda: None,
            tau: None,
            tau0: None,
            search: false,
            search_cfg: RationalitySearchConfig::default(),
        }
    }
}

/// Controller synthesis. On success the report carries the controller,
/// the solution inertias and the verification sweeps; the controller is
/// also returned as a serializable file.
pub fn cmd_synthesize(
    model: &Model,
    opts: &SynthesizeOptions,
) -> Result<(RunReport, ControllerFile)> {
    let mut report = RunReport::new("synthesize", &model.name);
    let plant = &model.plant;

    let controller = match opts.theorem {
        3 => {
            let result = state_feedback_pseudo_hinf(plant)?;
            for c in &result.checks {
                report.verdicts.push(c.into());
            }
            report.solutions = Some(SolutionsReport::new(&result.solution.inertia, None, None));
            report.gain_sweep = Some(GainSweepReport::from(&result.certificate));
            result.controller
        }
        4 | 5 => {
            let result = if opts.theorem == 4 {
                output_feedback_pseudo_hinf_v1(plant)?
            } else {
                output_feedback_pseudo_hinf_v2(plant)?
            };
            for c in &result.checks {
                report.verdicts.push(c.into());
            }
            report.solutions = Some(SolutionsReport::new(
                &result.x_inertia,
                Some(&result.y_inertia),
                Some(result.rho_xy),
            ));
            report.gain_sweep = Some(GainSweepReport::from(&result.certificate));
            result.controller
        }
        6 | 7 | 9 => {
            let params = model.synthesis_params(opts.lambda, opts.tau.clone(), opts.tau0)?;
            let run = |p: &synthesis::SynthesisParams| match opts.theorem {
                6 => lagrange_output_feedback_unobservable(plant, &model.bank, p),
                7 => lagrange_output_feedback_uncontrollable(plant, &model.bank, p),
                _ => lagrange_state_feedback(plant, &model.bank, p),
            };
            let result = if opts.search {
                search_parameters(model, &params, opts, &run)?
            } else {
                run(&params)?
            };
            for c in &result.checks {
                report.verdicts.push(c.into());
            }
            report.solutions = Some(SolutionsReport::new(
                &result.x_inertia,
                result.y_inertia.as_ref(),
                result.rho_xy,
            ));
            report.lagrange_sweep = Some(LagrangeSweepReport::from(&result.sweep));
            report.certificate = Some(CertificateReport::from(&result.certificate));
            result.controller
        }
        other => {
            return Err(Error::Validation(format!(
                "unknown synthesis procedure {other}; use 3, 4, 5, 6, 7 or 9"
            )))
        }
    };

    let file = ControllerFile::from_controller(Some(model.name.clone()), &controller);
    report.controller = Some(file.clone());
    report.success = true;
    Ok((report, file))
}

/// Deterministic coarse search over (lambda, tau), lexicographic order,
/// plus the Newton rationality search for the uncontrollable procedure.
fn search_parameters(
    model: &Model,
    start: &synthesis::SynthesisParams,
    opts: &SynthesizeOptions,
    run: &dyn Fn(&synthesis::SynthesisParams) -> Result<synthesis::LagrangeSynthesis>,
) -> Result<synthesis::LagrangeSynthesis> {
    // the provided parameters first
    let mut last_err = match run(start) {
        Ok(result) => {
            if opts.theorem == 7 {
                if let Ok(adj) =
                    rationality_search(&model.plant, &model.bank, start, &opts.search_cfg)
                {
                    return Ok(adj.synthesis);
                }
            }
            return Ok(result);
        }
        Err(e) => Some(e),
    };

    let m = model.plant.channels();
    let lambdas = match opts.lambda {
        Some(l) => vec![l],
        None => vec![0.1, 0.2, 0.5, 1.0],
    };
    let mut taus: Vec<Vec<f64>> = vec![vec![1.0 / (m as f64).sqrt(); m]];
    for k in 0..m {
        let mut t = vec![1.0; m];
        t[k] = 2.0;
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        taus.push(t.into_iter().map(|x| x / norm).collect());
    }
    for lambda in &lambdas {
        for tau in &taus {
            let params = synthesis::SynthesisParams::new(
                *lambda,
                tau.clone(),
                start.tau0,
                start.mu.clone(),
            )?;
            match run(&params) {
                Ok(result) => return Ok(result),
                Err(e) => last_err = Some(e),
            }
        }
    }
    Err(Error::SearchFailed(format!(
        "no parameter point on the coarse grid satisfied the conditions; last failure: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub x0: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub record_stride: usize,
    pub shift_test: bool,
    pub tau0: Option<f64>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            x0: None,
            t_final: None,
            dt: None,
            record_stride: 1,
            shift_test: false,
            tau0: None,
        }
    }
}

/// Closed-loop (or open-loop) trajectory; returns the report and the CSV
/// text ("t,x1,...,xN", one row per recorded step, 17 significant digits).
pub fn cmd_simulate(
    model: &Model,
    controller: Option<&ControllerFile>,
    opts: &SimulateOptions,
) -> Result<(RunReport, String)> {
    let mut report = RunReport::new("simulate", &model.name);
    let plant = &model.plant;

    let cl = match controller {
        Some(file) => {
            let c = file.clone().into_controller()?;
            ClosedLoop::assemble(plant, &c, model.bank.clone())?
        }
        None => ClosedLoop {
            a: plant.a.clone(),
            b: plant.b1.clone(),
            c: plant.c1.clone(),
            bank: model.bank.clone(),
        },
    };

    let t_final = opts
        .t_final
        .or(model.simulation.as_ref().and_then(|s| s.t_final))
        .unwrap_or(200.0);
    let dt = opts.dt.or(model.simulation.as_ref().and_then(|s| s.dt)).unwrap_or(1e-3);
    let x0 = initial_state(model, opts.x0.clone(), cl.order())?;
    let cfg = SimConfig::new(t_final, dt, x0)?.with_stride(opts.record_stride.max(1));

    let traj = sim::simulate(&cl, &cfg)?;
    let mut sim_report = SimulationReport::from_trajectory(&traj, t_final, dt);

    let mut deviation_column: Option<Vec<f64>> = None;
    if opts.shift_test {
        let tau0 = opts
            .tau0
            .or(model.synthesis.as_ref().and_then(|s| s.tau0))
            .unwrap_or(1.0);
        let cert = pendulum::pendulum_certificate(&cl.a.view(), &cl.c.view(), &cl.bank, tau0)?;
        let shifted_cfg = SimConfig { x0: &cfg.x0 + &cert.lattice_vector, ..cfg.clone() };
        let shifted = sim::simulate(&cl, &shifted_cfg)?;
        if let Some(t) = shifted.diverged_at.or(traj.diverged_at) {
            return Err(Error::Diverged { time: t });
        }
        let devs: Vec<f64> = traj
            .states
            .iter()
            .zip(shifted.states.iter())
            .map(|(a, b)| {
                a.iter()
                    .zip(b.iter())
                    .zip(cert.lattice_vector.iter())
                    .map(|((xa, xb), l)| ((xb - xa) - l).abs())
                    .fold(0.0_f64, f64::max)
            })
            .collect();
        let max_dev = devs.iter().fold(0.0_f64, |a, &b| a.max(b));
        sim_report.shift_deviation = Some(max_dev);
        report.push_verdict(
            "shift invariance",
            max_dev <= 1e-6,
            format!("max deviation {max_dev:.3e} over {t_final} s"),
        );
        report.certificate = Some(CertificateReport::from(&cert));
        deviation_column = Some(devs);
    }

    report.push_verdict(
        "bounded trajectory",
        traj.bounded_verdict,
        format!("sup norm {:.6e} against threshold {:.6e}", traj.sup_norm, traj.threshold),
    );

    let csv = trajectory_csv(&traj, deviation_column.as_deref());
    report.simulation = Some(sim_report);
    report.success = true;
    Ok((report, csv))
}

fn trajectory_csv(traj: &crate::sim::Trajectory, deviation: Option<&[f64]>) -> String {
    let n = traj.states.first().map_or(0, |s| s.len());
    let mut out = String::new();
    out.push('t');
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    if deviation.is_some() {
        out.push_str(",deviation");
    }
    out.push('\n');
    for (k, (t, x)) in traj.times.iter().zip(traj.states.iter()).enumerate() {
        out.push_str(&format_g17(*t));
        for v in x.iter() {
            out.push(',');
            out.push_str(&format_g17(*v));
        }
        if let Some(d) = deviation {
            out.push(',');
            out.push_str(&format_g17(d[k]));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub lambda: Option<f64>,
    pub grid: SweepGrid,
}

/// Plot-ready sweep CSV "omega,peak_sv,margin" of the open or closed loop.
pub fn cmd_sweep(
    model: &Model,
    controller: Option<&ControllerFile>,
    opts: &SweepOptions,
) -> Result<String> {
    let plant = &model.plant;
    let sys = match controller {
        Some(file) => {
            let c = file.clone().into_controller()?;
            let cl = ClosedLoop::assemble(plant, &c, model.bank.clone())?;
            cl.as_lti()?
        }
        None => LtiSystem::new(plant.a.clone(), plant.b1.clone(), plant.c1.clone())?,
    };
    let lambda = opts
        .lambda
        .or(model.synthesis.as_ref().and_then(|s| s.lambda))
        .unwrap_or(0.0);
    let tau = model
        .synthesis
        .as_ref()
        .and_then(|s| s.tau.clone())
        .unwrap_or_else(|| vec![1.0; plant.channels()]);
    let mu = model.bank.sector_bounds();
    let rows = sbrl::lagrange_sweep_table(&sys, lambda, &tau, &mu, &opts.grid)?;
    let mut out = String::from("omega,peak_sv,margin\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            format_g17(row.omega),
            format_g17(row.peak_sv),
            format_g17(row.margin)
        ));
    }
    Ok(out)
}
