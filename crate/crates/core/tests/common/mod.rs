//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use penstab::cli::{Model, ModelFile};
use penstab::synthesis::{Plant, SynthesisParams};

pub fn three_pendulum_model() -> Model {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/three_pendulum.json");
    ModelFile::load(&path)
        .expect("fixture parses")
        .into_model()
        .expect("fixture validates")
}

/// Reference synthesis weights for the three-pendulum model.
pub fn ring_params() -> SynthesisParams {
    SynthesisParams::new(
        0.5,
        vec![0.4, 0.6, 0.5],
        2.0 * std::f64::consts::PI,
        vec![1.0, 1.0, 1.0],
    )
    .unwrap()
}

/// Initial plant state used by the simulation fixtures.
pub fn ring_initial_state() -> Array1<f64> {
    use std::f64::consts::PI;
    ndarray::arr1(&[-PI / 4.0, 4.0, -PI / 2.0, -3.0, PI / 3.0, -5.0])
}

/// Plant-state vector extended with zero controller states, [xc; x].
pub fn with_zero_controller_states(x_plant: &Array1<f64>, order: usize) -> Array1<f64> {
    let mut full = Array1::<f64>::zeros(order);
    let offset = order - x_plant.len();
    for (i, &v) in x_plant.iter().enumerate() {
        full[offset + i] = v;
    }
    full
}

/// Weighted plant equivalent to the shifted, sector-scaled loop: the
/// output-feedback conditions at (lambda, tau, mu) on the original plant
/// are the unweighted conditions on this one.
pub fn scaled_plant(plant: &Plant, lambda: f64, tau: &[f64], mu: &[f64]) -> Plant {
    let n = plant.states();
    let a = &plant.a + &(Array2::<f64>::eye(n) * lambda);
    let mut b1 = plant.b1.clone();
    for (j, (&t, &u)) in tau.iter().zip(mu).enumerate() {
        let w = u / t.sqrt();
        b1.column_mut(j).mapv_inplace(|x| x * w);
    }
    let mut c1 = plant.c1.clone();
    let mut d12 = plant.d12.clone();
    for (i, &t) in tau.iter().enumerate() {
        let w = t.sqrt();
        c1.row_mut(i).mapv_inplace(|x| x * w);
        d12.row_mut(i).mapv_inplace(|x| x * w);
    }
    let mut d21 = plant.d21.clone();
    for (j, (&t, &u)) in tau.iter().zip(mu).enumerate() {
        let w = u / t.sqrt();
        d21.column_mut(j).mapv_inplace(|x| x * w);
    }
    Plant::new(a, b1, plant.b2.clone(), c1, plant.c2.clone(), d12, d21).unwrap()
}

/// Deterministic uniform [-1, 1] matrix entries.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1))
    }

    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (self.next_f64() + 1.0) / 2.0 * (hi - lo)
    }

    pub fn matrix(&mut self, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| self.next_f64())
    }
}
