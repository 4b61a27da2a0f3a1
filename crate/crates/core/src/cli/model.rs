//! JSON model and controller files.
//!
//! Matrix entries are JSON numbers or exact rational strings `"p/q"`
//! (plain decimals like `"0.1"` also parse exactly). The exact layer of
//! the plant is kept only when every entry is unambiguous: a string, or a
//! number with zero fractional part. Lattice constructions then run in
//! exact arithmetic, which is what lets the rationality assumptions hold
//! literally.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rat, RatMat};
use crate::pendulum::{NonlinearityBank, NonlinearityEntry};
use crate::synthesis::{Controller, ExactPlant, Plant, SynthesisParams};

/// Matrix entry: plain number or exact rational string.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum NumEntry {
    Float(f64),
    Text(String),
}

impl NumEntry {
    fn as_f64(&self, at: &str) -> Result<f64> {
        match self {
            NumEntry::Float(x) => Ok(*x),
            NumEntry::Text(s) => {
                let r = exact::parse_rational(s)
                    .map_err(|e| Error::Validation(format!("{at}: {e}")))?;
                Ok(exact::rational_to_f64(&r))
            }
        }
    }

    /// Exact value when the entry is unambiguous (string, or integral
    /// number).
    fn as_exact(&self) -> Option<Rat> {
        match self {
            NumEntry::Float(x) if x.fract() == 0.0 && x.is_finite() => {
                exact::rational_from_f64(*x).ok()
            }
            NumEntry::Float(_) => None,
            NumEntry::Text(s) => exact::parse_rational(s).ok(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub p: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawMatrices {
    #[serde(rename = "A")]
    pub a: Vec<Vec<NumEntry>>,
    #[serde(rename = "B1")]
    pub b1: Vec<Vec<NumEntry>>,
    #[serde(rename = "B2")]
    pub b2: Vec<Vec<NumEntry>>,
    #[serde(rename = "C1")]
    pub c1: Vec<Vec<NumEntry>>,
    #[serde(rename = "C2")]
    pub c2: Vec<Vec<NumEntry>>,
    #[serde(rename = "D12")]
    pub d12: Vec<Vec<NumEntry>>,
    #[serde(rename = "D21")]
    pub d21: Vec<Vec<NumEntry>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawNonlinearity {
    pub kind: String,
    pub amplitude: NumEntry,
    pub period: NumEntry,
    pub mu: NumEntry,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawSynthesis {
    pub lambda: Option<f64>,
    pub tau: Option<Vec<f64>>,
    pub tau0: Option<f64>,
    /// Synthesis procedure selector (3, 4, 5, 6, 7 or 9).
    pub mode: Option<u8>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RawSimulation {
    pub x0: Vec<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
}

/// On-disk model schema.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ModelFile {
    pub name: Option<String>,
    pub dims: Option<Dims>,
    pub matrices: RawMatrices,
    pub nonlinearities: Vec<RawNonlinearity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<RawSynthesis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<RawSimulation>,
}

/// Validated in-memory model.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub plant: Plant,
    pub bank: NonlinearityBank,
    pub synthesis: Option<RawSynthesis>,
    pub simulation: Option<RawSimulation>,
}

fn parse_matrix(raw: &[Vec<NumEntry>], name: &str) -> Result<(Array2<f64>, Option<RatMat>)> {
    let rows = raw.len();
    let cols = raw.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(Error::Validation(format!("matrices.{name}: must be non-empty")));
    }
    for (i, row) in raw.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Validation(format!(
                "matrices.{name}[{i}]: expected {cols} entries, got {}",
                row.len()
            )));
        }
    }
    let mut float = Array2::<f64>::zeros((rows, cols));
    let mut exact_rows: Option<Vec<Vec<Rat>>> = Some(Vec::with_capacity(rows));
    for (i, row) in raw.iter().enumerate() {
        let mut exact_row = Vec::with_capacity(cols);
        for (j, entry) in row.iter().enumerate() {
            let at = format!("matrices.{name}[{i}][{j}]");
            let x = entry.as_f64(&at)?;
            if !x.is_finite() {
                return Err(Error::Validation(format!("{at}: non-finite value")));
            }
            float[[i, j]] = x;
            if exact_rows.is_some() {
                match entry.as_exact() {
                    Some(r) => exact_row.push(r),
                    None => exact_rows = None,
                }
            }
        }
        if let Some(rows) = exact_rows.as_mut() {
            rows.push(exact_row);
        }
    }
    let exact = match exact_rows {
        Some(rows) => Some(RatMat::from_rows(rows)?),
        None => None,
    };
    Ok((float, exact))
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<ModelFile> {
        serde_json::from_str(text).map_err(Error::from)
    }

    pub fn load(path: &std::path::Path) -> Result<ModelFile> {
        let text = std::fs::read_to_string(path)?;
        ModelFile::from_json(&text)
    }

    /// Validate dimensions and build the in-memory model.
    pub fn into_model(self) -> Result<Model> {
        let (a, ea) = parse_matrix(&self.matrices.a, "A")?;
        let (b1, eb1) = parse_matrix(&self.matrices.b1, "B1")?;
        let (b2, eb2) = parse_matrix(&self.matrices.b2, "B2")?;
        let (c1, ec1) = parse_matrix(&self.matrices.c1, "C1")?;
        let (c2, ec2) = parse_matrix(&self.matrices.c2, "C2")?;
        let (d12, ed12) = parse_matrix(&self.matrices.d12, "D12")?;
        let (d21, ed21) = parse_matrix(&self.matrices.d21, "D21")?;

        let exact = match (ea, eb1, eb2, ec1, ec2, ed12, ed21) {
            (Some(a), Some(b1), Some(b2), Some(c1), Some(c2), Some(d12), Some(d21)) => {
                Some(ExactPlant { a, b1, b2, c1, c2, d12, d21 })
            }
            _ => None,
        };

        let mut plant = Plant::new(a, b1, b2, c1, c2, d12, d21)
            .map_err(|e| Error::Validation(format!("matrices: {e}")))?;
        if let Some(exact) = exact {
            plant = plant.with_exact(exact);
        }

        if let Some(d) = &self.dims {
            let got = (plant.states(), plant.channels(), plant.controls(), plant.measurements());
            let want = (d.n, d.m, d.q, d.p);
            if got != want {
                return Err(Error::Validation(format!(
                    "dims: declared (n,m,q,p) = {want:?}, matrices give {got:?}"
                )));
            }
        }

        if self.nonlinearities.len() != plant.channels() {
            return Err(Error::Validation(format!(
                "nonlinearities: {} entries for {} channels",
                self.nonlinearities.len(),
                plant.channels()
            )));
        }
        let mut entries = Vec::with_capacity(self.nonlinearities.len());
        for (i, raw) in self.nonlinearities.iter().enumerate() {
            let at = format!("nonlinearities[{i}]");
            let amplitude = raw.amplitude.as_f64(&format!("{at}.amplitude"))?;
            let period = raw.period.as_f64(&format!("{at}.period"))?;
            let mu = raw.mu.as_f64(&format!("{at}.mu"))?;
            let entry = match raw.kind.as_str() {
                "scaled_sine" => NonlinearityEntry::scaled_sine(amplitude, period, mu)
                    .map_err(|e| Error::Validation(format!("{at}: {e}")))?,
                other => {
                    return Err(Error::Validation(format!(
                        "{at}.kind: unknown nonlinearity family {other:?}"
                    )))
                }
            };
            entries.push(entry);
        }

        if let Some(sim) = &self.simulation {
            if sim.x0.is_empty() {
                return Err(Error::Validation("simulation.x0: must be non-empty".into()));
            }
        }

        Ok(Model {
            name: self.name.unwrap_or_else(|| "unnamed model".into()),
            plant,
            bank: NonlinearityBank::new(entries),
            synthesis: self.synthesis,
            simulation: self.simulation,
        })
    }
}

impl Model {
    /// Synthesis parameters from the model block with CLI overrides.
    pub fn synthesis_params(
        &self,
        lambda: Option<f64>,
        tau: Option<Vec<f64>>,
        tau0: Option<f64>,
    ) -> Result<SynthesisParams> {
        let block = self.synthesis.as_ref();
        let lambda = lambda
            .or(block.and_then(|b| b.lambda))
            .ok_or_else(|| Error::Validation("lambda required (flag or synthesis block)".into()))?;
        let tau = tau
            .or_else(|| block.and_then(|b| b.tau.clone()))
            .ok_or_else(|| Error::Validation("tau required (flag or synthesis block)".into()))?;
        let tau0 = tau0.or(block.and_then(|b| b.tau0)).unwrap_or(1.0);
        SynthesisParams::new(lambda, tau, tau0, self.bank.sector_bounds())
    }
}

/// On-disk controller description (same schema family as the model file).
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ControllerFile {
    pub name: Option<String>,
    pub kind: String,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Ac", skip_serializing_if = "Option::is_none")]
    pub ac: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Bc", skip_serializing_if = "Option::is_none")]
    pub bc: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Cc", skip_serializing_if = "Option::is_none")]
    pub cc: Option<Vec<Vec<f64>>>,
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], name: &str) -> Result<Array2<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return Err(Error::Validation(format!("{name}: must be non-empty")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Validation(format!(
                "{name}[{i}]: expected {c} entries, got {}",
                row.len()
            )));
        }
    }
    Ok(Array2::from_shape_fn((r, c), |(i, j)| rows[i][j]))
}

impl ControllerFile {
    pub fn from_controller(name: Option<String>, controller: &Controller) -> ControllerFile {
        match controller {
            Controller::StaticGain { k } => ControllerFile {
                name,
                kind: "static".into(),
                k: Some(to_rows(k)),
                ac: None,
                bc: None,
                cc: None,
            },
            Controller::Dynamic { ac, bc, cc } => ControllerFile {
                name,
                kind: "dynamic".into(),
                k: None,
                ac: Some(to_rows(ac)),
                bc: Some(to_rows(bc)),
                cc: Some(to_rows(cc)),
            },
        }
    }

    pub fn into_controller(self) -> Result<Controller> {
        match self.kind.as_str() {
            "static" => {
                let k = self.k.ok_or_else(|| Error::Validation("static controller needs K".into()))?;
                Ok(Controller::StaticGain { k: from_rows(&k, "K")? })
            }
            "dynamic" => {
                let ac = self.ac.ok_or_else(|| Error::Validation("dynamic controller needs Ac".into()))?;
                let bc = self.bc.ok_or_else(|| Error::Validation("dynamic controller needs Bc".into()))?;
                let cc = self.cc.ok_or_else(|| Error::Validation("dynamic controller needs Cc".into()))?;
                Ok(Controller::Dynamic {
                    ac: from_rows(&ac, "Ac")?,
                    bc: from_rows(&bc, "Bc")?,
                    cc: from_rows(&cc, "Cc")?,
                })
            }
            other => Err(Error::Validation(format!("unknown controller kind {other:?}"))),
        }
    }

    pub fn from_json(text: &str) -> Result<ControllerFile> {
        serde_json::from_str(text).map_err(Error::from)
    }

    pub fn load(path: &std::path::Path) -> Result<ControllerFile> {
        let text = std::fs::read_to_string(path)?;
        ControllerFile::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("controller serializes")
    }
}

/// Format one value with 17 significant digits (round-trip safe in text).
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// x0 vector from CLI override, model block, or zeros.
pub fn initial_state(model: &Model, override_x0: Option<Vec<f64>>, order: usize) -> Result<Array1<f64>> {
    let x0 = match override_x0 {
        Some(v) => v,
        None => match &model.simulation {
            Some(sim) => sim.x0.clone(),
            None => vec![0.0; order],
        },
    };
    if x0.len() == order {
        return Ok(Array1::from_vec(x0));
    }
    // plant-only initial conditions extend with zero controller states,
    // controller states stacked first
    if x0.len() < order {
        let mut full = vec![0.0; order];
        let offset = order - x0.len();
        full[offset..].copy_from_slice(&x0);
        return Ok(Array1::from_vec(full));
    }
    Err(Error::Validation(format!(
        "x0 has {} entries, closed loop has {order} states",
        x0.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_model_json() -> String {
        r#"{
            "name": "test",
            "matrices": {
                "A": [[0, 1], [0, "-1/10"]],
                "B1": [[0], [1]],
                "B2": [[0], [1]],
                "C1": [[1, 0]],
                "C2": [[0, 1]],
                "D12": [["1/10"]],
                "D21": [["1/10"]]
            },
            "nonlinearities": [
                {"kind": "scaled_sine", "amplitude": 1.0, "period": "6.28", "mu": 1.0}
            ]
        }"#
        .to_string()
    }

    #[test]
    fn parses_minimal_model_with_exact_entries() {
        let model = ModelFile::from_json(&minimal_model_json()).unwrap().into_model().unwrap();
        assert_eq!(model.plant.states(), 2);
        assert_eq!(model.plant.channels(), 1);
        assert!(model.plant.exact.is_some());
        assert!((model.plant.a[[1, 1]] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn float_entries_disable_exact_layer() {
        let json = minimal_model_json().replace("\"-1/10\"", "-0.1");
        let model = ModelFile::from_json(&json).unwrap().into_model().unwrap();
        assert!(model.plant.exact.is_none());
    }

    #[test]
    fn ragged_matrix_is_reported_with_path() {
        let json = minimal_model_json().replace("[0, 1]", "[0, 1, 2]");
        let err = ModelFile::from_json(&json).unwrap().into_model().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("matrices.A"), "{text}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn dims_cross_check() {
        let json = minimal_model_json().replace(
            "\"matrices\"",
            "\"dims\": {\"n\": 3, \"m\": 1, \"q\": 1, \"p\": 1}, \"matrices\"",
        );
        let err = ModelFile::from_json(&json).unwrap().into_model().unwrap_err();
        assert!(err.to_string().contains("dims"));
    }

    #[test]
    fn unknown_nonlinearity_kind_rejected() {
        let json = minimal_model_json().replace("scaled_sine", "sawtooth_wave");
        let err = ModelFile::from_json(&json).unwrap().into_model().unwrap_err();
        assert!(err.to_string().contains("unknown nonlinearity family"));
    }

    #[test]
    fn controller_round_trip_is_bit_exact() {
        let k = ndarray::arr2(&[[0.1 + 0.2, -1.0 / 3.0, 2.0_f64.sqrt()]]);
        let cf = ControllerFile::from_controller(None, &Controller::StaticGain { k: k.clone() });
        let text = cf.to_json();
        let back = ControllerFile::from_json(&text).unwrap().into_controller().unwrap();
        let Controller::StaticGain { k: k2 } = back else { panic!() };
        for (a, b) in k.iter().zip(k2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn g17_formatting_round_trips() {
        for &x in &[std::f64::consts::PI, -1.0 / 3.0, 1e-300, 6.02e23] {
            let s = format_g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
