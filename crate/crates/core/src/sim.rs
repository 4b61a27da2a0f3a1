//! Fixed-step nonlinear closed-loop simulation.
//!
//! Classical fourth-order integration of x' = A x + B phi(C x). The step
//! is fixed rather than adaptive so that trajectory pairs (the lattice
//! shift test) see identical time grids and reproduce bit-for-bit across
//! runs. Boundedness verdicts are finite-horizon corroboration, not proof.

use ndarray::Array1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numlin::is_pos;
use crate::synthesis::ClosedLoop;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    pub x0: Array1<f64>,
    /// Record every k-th step (1 = every step).
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(t_final: f64, dt: f64, x0: Array1<f64>) -> Result<Self> {
        let cfg = SimConfig { t_final, dt, x0, record_stride: 1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !is_pos(self.dt) {
            return Err(Error::Validation(format!("dt = {} must be positive", self.dt)));
        }
        if self.t_final < self.dt {
            return Err(Error::Validation(format!(
                "t_final = {} must be at least dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::Validation("record_stride must be at least 1".into()));
        }
        if self.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite initial state".into()));
        }
        Ok(())
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array1<f64>>,
    /// Sup of the max-norm over recorded states.
    pub sup_norm: f64,
    /// sup_norm below the default threshold and no divergence.
    pub bounded_verdict: bool,
    /// Threshold used for the verdict: 1e3 * (1 + |x0|_inf).
    pub threshold: f64,
    /// Time at which the state stopped being finite, when that happened.
    pub diverged_at: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &Array1<f64> {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

fn max_norm(x: &Array1<f64>) -> f64 {
    x.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Integrate the closed loop from cfg.x0 over [0, t_final].
pub fn simulate(cl: &ClosedLoop, cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cl.order();
    if cfg.x0.len() != n {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, closed loop has {n} states",
            cfg.x0.len()
        )));
    }
    let steps = cfg.steps();
    let dt = cfg.dt;

    let mut x = cfg.x0.clone();
    let mut k1 = Array1::<f64>::zeros(n);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut stage = k1.clone();

    let mut times = Vec::with_capacity(steps / cfg.record_stride + 2);
    let mut states = Vec::with_capacity(steps / cfg.record_stride + 2);
    times.push(0.0);
    states.push(x.clone());
    let mut sup = max_norm(&x);
    let mut diverged_at = None;

    for step in 1..=steps {
        cl.dynamics(&x, &mut k1);
        stage.assign(&x);
        stage.scaled_add(0.5 * dt, &k1);
        cl.dynamics(&stage, &mut k2);
        stage.assign(&x);
        stage.scaled_add(0.5 * dt, &k2);
        cl.dynamics(&stage, &mut k3);
        stage.assign(&x);
        stage.scaled_add(dt, &k3);
        cl.dynamics(&stage, &mut k4);

        ndarray::Zip::from(&mut x)
            .and(&k1)
            .and(&k2)
            .and(&k3)
            .and(&k4)
            .for_each(|xi, &a, &b, &c, &d| {
                *xi += dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
            });

        let t = step as f64 * dt;
        if x.iter().any(|v| !v.is_finite()) {
            diverged_at = Some(t);
            break;
        }
        if step % cfg.record_stride == 0 || step == steps {
            sup = sup.max(max_norm(&x));
            times.push(t);
            states.push(x.clone());
        }
    }

    let threshold = 1e3 * (1.0 + max_norm(&cfg.x0));
    let bounded_verdict = diverged_at.is_none() && sup < threshold;
    Ok(Trajectory { times, states, sup_norm: sup, bounded_verdict, threshold, diverged_at })
}

/// Max over recorded times of |(x_b(t) - x_a(t)) - lattice|_inf, where
/// x_a starts at cfg.x0 and x_b at cfg.x0 + lattice.
pub fn shift_invariance_test(
    cl: &ClosedLoop,
    lattice: &Array1<f64>,
    cfg: &SimConfig,
) -> Result<f64> {
    if lattice.len() != cl.order() {
        return Err(Error::Dimension("lattice vector dimension mismatch".into()));
    }
    let base = simulate(cl, cfg)?;
    if let Some(t) = base.diverged_at {
        return Err(Error::Diverged { time: t });
    }
    let shifted_cfg = SimConfig {
        x0: &cfg.x0 + lattice,
        ..cfg.clone()
    };
    let shifted = simulate(cl, &shifted_cfg)?;
    if let Some(t) = shifted.diverged_at {
        return Err(Error::Diverged { time: t });
    }
    let mut worst = 0.0_f64;
    for (a, b) in base.states.iter().zip(shifted.states.iter()) {
        let dev = a
            .iter()
            .zip(b.iter())
            .zip(lattice.iter())
            .map(|((xa, xb), l)| ((xb - xa) - l).abs())
            .fold(0.0_f64, f64::max);
        worst = worst.max(dev);
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct SeedVerdict {
    pub x0: Array1<f64>,
    pub sup_norm: f64,
    pub pass: bool,
    pub diverged_at: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BoundednessReport {
    pub verdicts: Vec<SeedVerdict>,
    pub threshold: f64,
    pub all_pass: bool,
}

/// Simulate every seed and compare sup-norms against the threshold.
pub fn boundedness_scan(
    cl: &ClosedLoop,
    seeds: &[Array1<f64>],
    cfg: &SimConfig,
    threshold: f64,
) -> Result<BoundednessReport> {
    let verdicts: Vec<Result<SeedVerdict>> = seeds
        .par_iter()
        .map(|seed| {
            let cfg = SimConfig { x0: seed.clone(), ..cfg.clone() };
            let traj = simulate(cl, &cfg)?;
            Ok(SeedVerdict {
                x0: seed.clone(),
                sup_norm: traj.sup_norm,
                pass: traj.diverged_at.is_none() && traj.sup_norm < threshold,
                diverged_at: traj.diverged_at,
            })
        })
        .collect();
    let verdicts: Vec<SeedVerdict> = verdicts.into_iter().collect::<Result<_>>()?;
    let all_pass = verdicts.iter().all(|v| v.pass);
    Ok(BoundednessReport { verdicts, threshold, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pendulum::{NonlinearityBank, NonlinearityEntry};
    use ndarray::{arr1, arr2};
    use std::f64::consts::PI;

    fn linear_decay() -> ClosedLoop {
        ClosedLoop {
            a: arr2(&[[-1.0]]),
            b: ndarray::Array2::zeros((1, 0)),
            c: ndarray::Array2::zeros((0, 1)),
            bank: NonlinearityBank::default(),
        }
    }

    fn damped_pendulum() -> ClosedLoop {
        // x1' = x2, x2' = -0.1 x2 - sin(x1)
        ClosedLoop {
            a: arr2(&[[0.0, 1.0], [0.0, -0.1]]),
            b: arr2(&[[0.0], [-1.0]]),
            c: arr2(&[[1.0, 0.0]]),
            bank: NonlinearityBank::new(vec![
                NonlinearityEntry::scaled_sine(1.0, 2.0 * PI, 1.0).unwrap(),
            ]),
        }
    }

    #[test]
    fn exponential_decay_matches_exact_solution() {
        let cfg = SimConfig::new(1.0, 1e-3, arr1(&[1.0])).unwrap();
        let traj = simulate(&linear_decay(), &cfg).unwrap();
        let exact = (-1.0_f64).exp();
        assert!((traj.final_state()[0] - exact).abs() < 1e-6);
        assert!(traj.bounded_verdict);
    }

    #[test]
    fn damped_pendulum_stays_in_energy_bound() {
        let cfg = SimConfig::new(50.0, 1e-3, arr1(&[PI / 2.0, 0.0])).unwrap().with_stride(10);
        let traj = simulate(&damped_pendulum(), &cfg).unwrap();
        assert!(traj.bounded_verdict);
        assert!(traj.sup_norm <= PI);

        // energy V = x2^2/2 + 1 - cos x1 never increases beyond tolerance
        let mut prev = f64::INFINITY;
        for s in &traj.states {
            let v = s[1] * s[1] / 2.0 + 1.0 - s[0].cos();
            assert!(v <= prev + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn step_halving_shows_fourth_order() {
        let run = |dt: f64| {
            let cfg = SimConfig::new(5.0, dt, arr1(&[PI / 2.0, 0.0]))
                .unwrap()
                .with_stride(usize::MAX / 2);
            simulate(&damped_pendulum(), &cfg).unwrap().final_state().clone()
        };
        let x1 = run(2e-3);
        let x2 = run(1e-3);
        let x3 = run(5e-4);
        let e1 = max_norm(&(&x1 - &x2));
        let e2 = max_norm(&(&x2 - &x3));
        let order = (e1 / e2).log2();
        assert!(order >= 3.5, "measured order {order}");
    }

    #[test]
    fn shift_invariance_on_pendulum_lattice() {
        let cl = damped_pendulum();
        let cfg = SimConfig::new(20.0, 1e-3, arr1(&[0.3, 0.2])).unwrap().with_stride(10);
        // (2 pi, 0) shifts the angle by a full period
        let dev =
            shift_invariance_test(&cl, &arr1(&[2.0 * PI, 0.0]), &cfg).unwrap();
        assert!(dev <= 1e-6, "deviation {dev}");

        // zero lattice: identically zero deviation
        let dev = shift_invariance_test(&cl, &arr1(&[0.0, 0.0]), &cfg).unwrap();
        assert_eq!(dev, 0.0);

        // a non-kernel shift does not stay constant
        let dev = shift_invariance_test(&cl, &arr1(&[1.0, 0.0]), &cfg).unwrap();
        assert!(dev > 1e-2);
    }

    #[test]
    fn divergence_is_flagged() {
        let unstable = ClosedLoop {
            a: arr2(&[[5.0]]),
            b: ndarray::Array2::zeros((1, 0)),
            c: ndarray::Array2::zeros((0, 1)),
            bank: NonlinearityBank::default(),
        };
        let cfg = SimConfig::new(200.0, 1e-2, arr1(&[1.0])).unwrap();
        let traj = simulate(&unstable, &cfg).unwrap();
        assert!(!traj.bounded_verdict);
        // e^{5t} overflows well before 200 s
        assert!(traj.diverged_at.is_some() || traj.sup_norm > traj.threshold);
    }

    #[test]
    fn boundedness_scan_verdicts() {
        let cl = damped_pendulum();
        let cfg = SimConfig::new(10.0, 1e-3, arr1(&[0.0, 0.0])).unwrap().with_stride(20);
        let seeds = vec![arr1(&[0.1, 0.0]), arr1(&[1.0, 1.0]), arr1(&[-2.0, 0.5])];
        let report = boundedness_scan(&cl, &seeds, &cfg, 1e3).unwrap();
        assert!(report.all_pass);

        let unstable = ClosedLoop {
            a: arr2(&[[1.0]]),
            b: ndarray::Array2::zeros((1, 0)),
            c: ndarray::Array2::zeros((0, 1)),
            bank: NonlinearityBank::default(),
        };
        let cfg = SimConfig::new(40.0, 1e-2, arr1(&[0.0])).unwrap();
        let report = boundedness_scan(&unstable, &[arr1(&[1.0])], &cfg, 1e3).unwrap();
        assert!(!report.all_pass);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(1.0, 0.0, arr1(&[1.0])).is_err());
        assert!(SimConfig::new(0.5, 1.0, arr1(&[1.0])).is_err());
        assert!(SimConfig::new(1.0, 0.1, arr1(&[f64::NAN])).is_err());
    }
}
