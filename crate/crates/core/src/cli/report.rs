//! Machine-readable run reports.
//!
//! Field order is fixed by declaration so identical runs serialize to
//! identical bytes; the optional timestamp is the one non-deterministic
//! field and is off by default.

use serde::Serialize;

use crate::numlin::{Inertia, Spectrum};
use crate::pendulum::{PendulumCertificate, SectorVerdict};
use crate::sbrl::{LagrangeSweep, SbrVerdict};
use crate::sim::Trajectory;
use crate::synthesis::ConditionCheck;

use super::model::ControllerFile;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl From<&ConditionCheck> for Verdict {
    fn from(c: &ConditionCheck) -> Self {
        Verdict { name: c.name.clone(), passed: c.passed, detail: c.detail.clone() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Eigenvalues as [re, im] pairs, sorted by real part then imaginary.
    pub eigenvalues: Vec<[f64; 2]>,
    pub stable: usize,
    pub unstable: usize,
    pub imaginary: usize,
    pub pseudo_hurwitz: bool,
}

impl SpectrumReport {
    pub fn from_spectrum(s: &Spectrum) -> Self {
        let mut eigenvalues: Vec<[f64; 2]> =
            s.eigenvalues.iter().map(|v| [v.re, v.im]).collect();
        eigenvalues.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        SpectrumReport {
            eigenvalues,
            stable: s.stable_count,
            unstable: s.unstable_count,
            imaginary: s.imaginary_count,
            pseudo_hurwitz: s.is_pseudo_hurwitz(),
        }
    }
}

fn inertia_triple(i: &Inertia) -> [usize; 3] {
    [i.positive, i.negative, i.zero]
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionsReport {
    pub x_inertia: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_inertia: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_xy: Option<f64>,
}

impl SolutionsReport {
    pub fn new(x: &Inertia, y: Option<&Inertia>, rho_xy: Option<f64>) -> Self {
        SolutionsReport {
            x_inertia: inertia_triple(x),
            y_inertia: y.map(inertia_triple),
            rho_xy,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSweepReport {
    /// Sampled on a finite grid, not proven over all frequencies.
    pub certification: &'static str,
    pub pseudo_hurwitz: bool,
    pub peak_gain: f64,
    pub peak_omega: f64,
    pub margin: f64,
    pub holds: bool,
    pub skipped_poles: usize,
}

impl From<&SbrVerdict> for GainSweepReport {
    fn from(v: &SbrVerdict) -> Self {
        GainSweepReport {
            certification: "grid",
            pseudo_hurwitz: v.pseudo_hurwitz,
            peak_gain: v.peak_gain,
            peak_omega: v.peak_omega,
            margin: v.margin,
            holds: v.holds,
            skipped_poles: v.skipped.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LagrangeSweepReport {
    /// Sampled on a finite grid, not proven over all frequencies.
    pub certification: &'static str,
    pub holds: bool,
    pub worst_margin: f64,
    pub worst_omega: f64,
    pub weighted_peak: f64,
    pub limit_margin: f64,
    pub skipped_poles: usize,
}

impl From<&LagrangeSweep> for LagrangeSweepReport {
    fn from(v: &LagrangeSweep) -> Self {
        LagrangeSweepReport {
            certification: "grid",
            holds: v.holds,
            worst_margin: v.worst_margin,
            worst_omega: v.worst_omega,
            weighted_peak: v.weighted_peak,
            limit_margin: v.limit_margin,
            skipped_poles: v.skipped.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub d_bar: Vec<f64>,
    pub chi: Vec<f64>,
    /// Phase advances in lowest terms, as "p/q" strings.
    pub nu: Vec<String>,
    pub p_bar: i64,
    pub tau0: f64,
    pub lattice_vector: Vec<f64>,
}

impl From<&PendulumCertificate> for CertificateReport {
    fn from(c: &PendulumCertificate) -> Self {
        CertificateReport {
            d_bar: c.d_bar.to_vec(),
            chi: c.chi.to_vec(),
            nu: c.nu.iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect(),
            p_bar: c.p_bar,
            tau0: c.tau0,
            lattice_vector: c.lattice_vector.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SectorReport {
    pub channel: usize,
    pub pass: bool,
    pub worst_ratio: f64,
    pub worst_z: f64,
    pub violations: Vec<f64>,
}

impl SectorReport {
    pub fn from_verdicts(vs: &[SectorVerdict]) -> Vec<SectorReport> {
        vs.iter()
            .enumerate()
            .map(|(i, v)| SectorReport {
                channel: i,
                pass: v.pass,
                worst_ratio: v.worst_ratio,
                worst_z: v.worst_z,
                violations: v.violations.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub t_final: f64,
    pub dt: f64,
    pub recorded_points: usize,
    pub sup_norm: f64,
    pub threshold: f64,
    pub bounded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_deviation: Option<f64>,
}

impl SimulationReport {
    pub fn from_trajectory(t: &Trajectory, t_final: f64, dt: f64) -> Self {
        SimulationReport {
            t_final,
            dt,
            recorded_points: t.times.len(),
            sup_norm: t.sup_norm,
            threshold: t.threshold,
            bounded: t.bounded_verdict,
            diverged_at: t.diverged_at,
            shift_deviation: None,
        }
    }
}

/// Top-level result document of one CLI command.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub success: bool,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifted_spectrum: Option<SpectrumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector: Option<Vec<SectorReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solutions: Option<SolutionsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_sweep: Option<GainSweepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lagrange_sweep: Option<LagrangeSweepReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub csv_paths: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, model: &str) -> Self {
        RunReport {
            command: command.into(),
            model: model.into(),
            timestamp: None,
            success: false,
            verdicts: Vec::new(),
            spectrum: None,
            shifted_spectrum: None,
            sector: None,
            solutions: None,
            gain_sweep: None,
            lagrange_sweep: None,
            controller: None,
            certificate: None,
            simulation: None,
            csv_paths: Vec::new(),
        }
    }

    pub fn push_verdict(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict { name: name.into(), passed, detail: detail.into() });
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
