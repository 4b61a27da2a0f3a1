//! Acceptance suite: one test per release criterion, each printing a
//! single PASS line (run with `--nocapture` to see them). Every tolerance
//! is pinned here, not configured elsewhere.

mod common;

use std::time::Instant;

use common::{ring_initial_state, scaled_plant, three_pendulum_model, with_zero_controller_states, TestRng};
use ndarray::{Array1, Array2};
use ndarray_linalg::QR;
use num_complex::Complex64;
use num_rational::Rational64;
use penstab::numlin;
use penstab::pendulum;
use penstab::riccati::{self, AreProblem};
use penstab::sbrl::{self, LtiSystem, SweepGrid, Theorem1Outcome};
use penstab::sim::{self, SimConfig};
use penstab::synthesis::{self, SynthesisParams};

fn ring_synthesis() -> synthesis::LagrangeSynthesis {
    let model = three_pendulum_model();
    let params = SynthesisParams::new(
        0.5,
        vec![0.4, 0.6, 0.5],
        2.0 * std::f64::consts::PI,
        vec![1.0, 1.0, 1.0],
    )
    .unwrap();
    synthesis::lagrange_output_feedback_unobservable(&model.plant, &model.bank, &params).unwrap()
}

#[test]
fn criterion_1_three_pendulum_synthesis() {
    let started = Instant::now();
    let result = ring_synthesis();

    // (a) control-type solution positive definite
    assert_eq!(
        (result.x_inertia.positive, result.x_inertia.negative, result.x_inertia.zero),
        (6, 0, 0),
        "X inertia {:?}",
        result.x_inertia
    );
    // (b) filter-type solution pseudo-positive definite
    let y_inertia = result.y_inertia.unwrap();
    assert_eq!(
        (y_inertia.positive, y_inertia.negative, y_inertia.zero),
        (5, 1, 0),
        "Y inertia {y_inertia:?}"
    );
    // (c) spectral radius below one; frozen regression anchor
    let rho = result.rho_xy.unwrap();
    assert!(rho < 1.0);
    assert!(
        (rho - 0.16805059046077).abs() < 1e-6,
        "rho(XY) drifted to {rho}"
    );
    // (d) shifted closed-loop matrix pseudo-Hurwitz, 11 stable 1 unstable
    let shifted = &result.closed_loop.a + &(Array2::<f64>::eye(12) * 0.5);
    let spectrum = numlin::eigenvalues_with_tol(&shifted.view(), 1e-8).unwrap();
    assert_eq!(
        (spectrum.stable_count, spectrum.unstable_count),
        (11, 1),
        "shifted spectrum counts"
    );
    // (e) sweep margin strictly negative at every grid point
    assert!(result.sweep.holds);
    assert!(result.sweep.worst_margin < 0.0);

    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "synthesis pipeline took {elapsed:.2} s");
    println!(
        "[criterion 1] three-pendulum synthesis: PASS (rho {rho:.8}, worst margin {:.4}, {elapsed:.2} s)",
        result.sweep.worst_margin
    );
}

#[test]
fn criterion_2_three_pendulum_simulation() {
    let result = ring_synthesis();
    let x0 = with_zero_controller_states(&ring_initial_state(), 12);

    let cfg = SimConfig::new(200.0, 1e-3, x0.clone()).unwrap().with_stride(100);
    let traj = sim::simulate(&result.closed_loop, &cfg).unwrap();
    assert!(traj.diverged_at.is_none(), "diverged at {:?}", traj.diverged_at);
    assert!(traj.sup_norm < 1e3, "sup norm {}", traj.sup_norm);

    let halved = SimConfig::new(200.0, 5e-4, x0).unwrap().with_stride(200);
    let traj_halved = sim::simulate(&result.closed_loop, &halved).unwrap();
    let diff = traj
        .final_state()
        .iter()
        .zip(traj_halved.final_state().iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    assert!(diff < 1e-6, "step-halving changed the final state by {diff:.3e}");
    println!(
        "[criterion 2] three-pendulum simulation: PASS (sup {:.4}, halving diff {diff:.3e})",
        traj.sup_norm
    );
}

#[test]
fn criterion_3_shift_invariance() {
    let result = ring_synthesis();
    let x0 = with_zero_controller_states(&ring_initial_state(), 12);
    let cfg = SimConfig::new(100.0, 1e-3, x0).unwrap().with_stride(37);
    let deviation = sim::shift_invariance_test(
        &result.closed_loop,
        &result.certificate.lattice_vector,
        &cfg,
    )
    .unwrap();
    assert!(deviation <= 1e-6, "lattice deviation {deviation:.3e}");
    println!("[criterion 3] shift invariance: PASS (deviation {deviation:.3e})");
}

/// Random problem with symmetric indefinite R and positive semidefinite Q.
fn random_are(rng: &mut TestRng, n: usize) -> AreProblem {
    let a = rng.matrix(n, n);
    let b_plus = rng.matrix(n, n.div_ceil(2));
    let b_minus = rng.matrix(n, n.div_ceil(2));
    let r = &b_plus.dot(&b_plus.t()) - &b_minus.dot(&b_minus.t());
    let c = rng.matrix(n.div_ceil(2), n);
    let q = c.t().dot(&c);
    AreProblem::new(a, r, q).unwrap()
}

fn random_orthogonal(rng: &mut TestRng, n: usize) -> Array2<f64> {
    let (q, _) = rng.matrix(n, n).qr().unwrap();
    q
}

#[test]
fn criterion_4_riccati_accuracy() {
    let mut rng = TestRng::new(41);
    let mut solved = 0usize;
    let mut attempts = 0usize;
    while solved < 200 {
        attempts += 1;
        assert!(attempts < 2000, "generator kept hitting unsolvable instances");
        let n = 1 + (attempts % 8);
        let prob = random_are(&mut rng, n);
        let sol = match riccati::solve_stabilizing(&prob) {
            Ok(sol) => sol,
            Err(_) => continue,
        };
        let scale = numlin::fro_norm(&prob.a.view())
            + numlin::fro_norm(&prob.r.view())
                * numlin::fro_norm(&sol.p.view()).powi(2)
            + numlin::fro_norm(&prob.q.view());
        assert!(
            sol.residual_norm <= 1e-8 * scale.max(1.0),
            "residual {} against scale {scale}",
            sol.residual_norm
        );

        // uniqueness under a random orthogonal change of coordinates
        let q = random_orthogonal(&mut rng, n);
        let prob_rot = AreProblem::new(
            q.t().dot(&prob.a).dot(&q),
            q.t().dot(&prob.r).dot(&q),
            {
                let m = q.t().dot(&prob.q).dot(&q);
                (&m + &m.t()) * 0.5
            },
        )
        .unwrap();
        if let Ok(sol_rot) = riccati::solve_stabilizing(&prob_rot) {
            let mapped_back = q.dot(&sol_rot.p).dot(&q.t());
            let diff = numlin::fro_norm(&(&mapped_back - &sol.p).view());
            assert!(
                diff <= 1e-8 * (1.0 + numlin::fro_norm(&sol.p.view())),
                "solution changed by {diff} under similarity"
            );
        }
        solved += 1;
    }

    // scalar closed form: R P^2 + 2 A P + Q = 0
    let mut checked_scalar = 0usize;
    while checked_scalar < 100 {
        let a = rng.uniform(-2.0, 2.0);
        let r = rng.uniform(-2.0, 2.0);
        let q = rng.uniform(-2.0, 2.0);
        let disc = a * a - r * q;
        if disc <= 1e-4 || r.abs() < 1e-2 {
            continue;
        }
        let prob = AreProblem::new(
            ndarray::arr2(&[[a]]),
            ndarray::arr2(&[[r]]),
            ndarray::arr2(&[[q]]),
        )
        .unwrap();
        let expect = (-a - disc.sqrt()) / r;
        let sol = riccati::solve_stabilizing(&prob).unwrap();
        assert!(
            (sol.p[[0, 0]] - expect).abs() <= 1e-9 * (1.0 + expect.abs()),
            "scalar root {} vs {expect}",
            sol.p[[0, 0]]
        );
        checked_scalar += 1;
    }

    // 2x2 closed form: decoupled diagonal problem under orthogonal congruence
    let mut checked_2x2 = 0usize;
    while checked_2x2 < 100 {
        let mut diag = [(0.0, 0.0, 0.0); 2];
        let mut p_expect = [0.0; 2];
        let mut ok = true;
        for slot in 0..2 {
            let a = rng.uniform(-2.0, 2.0);
            let r = rng.uniform(-2.0, 2.0);
            let q = rng.uniform(-2.0, 2.0);
            let disc = a * a - r * q;
            if disc <= 1e-4 || r.abs() < 1e-2 {
                ok = false;
                break;
            }
            diag[slot] = (a, r, q);
            p_expect[slot] = (-a - disc.sqrt()) / r;
        }
        if !ok {
            continue;
        }
        let qmat = random_orthogonal(&mut rng, 2);
        let d = |f: fn(&(f64, f64, f64)) -> f64| {
            Array2::from_diag(&Array1::from_vec(vec![f(&diag[0]), f(&diag[1])]))
        };
        let prob = AreProblem::new(
            qmat.t().dot(&d(|t| t.0)).dot(&qmat),
            qmat.t().dot(&d(|t| t.1)).dot(&qmat),
            qmat.t().dot(&d(|t| t.2)).dot(&qmat),
        )
        .unwrap();
        let expect = qmat
            .t()
            .dot(&Array2::from_diag(&Array1::from_vec(p_expect.to_vec())))
            .dot(&qmat);
        match riccati::solve_stabilizing(&prob) {
            Ok(sol) => {
                let diff = numlin::fro_norm(&(&sol.p - &expect).view());
                assert!(
                    diff <= 1e-9 * (1.0 + numlin::fro_norm(&expect.view())),
                    "2x2 defect {diff}"
                );
                checked_2x2 += 1;
            }
            // congruent diagonal pairs can share Hamiltonian eigenvalues
            Err(_) => continue,
        }
    }
    println!("[criterion 4] Riccati accuracy: PASS ({solved} random, 100 scalar, 100 planar oracles)");
}

/// Random system with a pseudo-Hurwitz state matrix, full-rank
/// well-conditioned output map, and gain scaled to the target peak.
/// Full-rank C keeps the certificate solution's spectrum resolvable
/// against the relative zero band.
fn random_pseudo_hurwitz_system(rng: &mut TestRng, n: usize, target_peak: f64) -> LtiSystem {
    let q = random_orthogonal(rng, n);
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n - 1 {
        d[[i, i]] = -rng.uniform(0.3, 2.0);
    }
    d[[n - 1, n - 1]] = rng.uniform(0.3, 2.0);
    let a = q.t().dot(&d).dot(&q);
    let b = loop {
        let b = rng.matrix(n, n);
        let bc = Array2::from_shape_fn((n, n), |(i, j)| Complex64::new(b[[i, j]], 0.0));
        let smin = numlin::min_singular_value(&bc.view()).unwrap();
        let smax = numlin::max_singular_value(&bc.view()).unwrap();
        if smin > 0.05 * smax {
            break b;
        }
    };
    let c = loop {
        let c = rng.matrix(n, n);
        let cc = Array2::from_shape_fn((n, n), |(i, j)| Complex64::new(c[[i, j]], 0.0));
        let smin = numlin::min_singular_value(&cc.view()).unwrap();
        let smax = numlin::max_singular_value(&cc.view()).unwrap();
        if smin > 0.05 * smax {
            break c;
        }
    };
    let sys = LtiSystem::new(a.clone(), b.clone(), c.clone()).unwrap();
    let grid = SweepGrid { points: 120, refine_passes: 2, ..SweepGrid::default() };
    let raw_peak = sbrl::check_gain_condition(&sys, &grid).unwrap().peak_gain;
    let scale = if raw_peak > 0.0 { target_peak / raw_peak } else { 1.0 };
    LtiSystem::new(a, b, c.mapv(|x| x * scale)).unwrap()
}

/// Robust minimality: the PBH matrices stay well conditioned at every
/// eigenvalue, so the converse hypotheses are numerically resolvable.
fn is_minimal(sys: &LtiSystem) -> bool {
    let n = sys.order();
    let spec = numlin::eigenvalues(&sys.a.view()).unwrap();
    for lam in &spec.eigenvalues {
        // PBH tests at each eigenvalue
        let mut ctrb = Array2::<Complex64>::zeros((n, n + sys.inputs()));
        let mut obsv = Array2::<Complex64>::zeros((n + sys.outputs(), n));
        for i in 0..n {
            for j in 0..n {
                let v = Complex64::new(-sys.a[[i, j]], 0.0);
                ctrb[[i, j]] = v;
                obsv[[i, j]] = v;
            }
            ctrb[[i, i]] += lam;
            obsv[[i, i]] += lam;
        }
        for i in 0..n {
            for j in 0..sys.inputs() {
                ctrb[[i, n + j]] = Complex64::new(sys.b[[i, j]], 0.0);
            }
        }
        for i in 0..sys.outputs() {
            for j in 0..n {
                obsv[[n + i, j]] = Complex64::new(sys.c[[i, j]], 0.0);
            }
        }
        let ctrb_max = numlin::max_singular_value(&ctrb.view()).unwrap();
        if numlin::min_singular_value(&ctrb.view()).unwrap() < 0.02 * ctrb_max {
            return false;
        }
        let obsv_max = numlin::max_singular_value(&obsv.view()).unwrap();
        if numlin::min_singular_value(&obsv.view()).unwrap() < 0.02 * obsv_max {
            return false;
        }
    }
    true
}

#[test]
fn criterion_5_strict_bound_certificates() {
    let mut rng = TestRng::new(52);
    let grid = SweepGrid { points: 200, refine_passes: 3, ..SweepGrid::default() };

    // soundness: a state-space certificate implies the sampled gain bound
    let mut certified = 0usize;
    let mut attempts = 0usize;
    while certified < 100 {
        attempts += 1;
        assert!(attempts < 600, "generator failed to certify often enough");
        let n = 2 + attempts % 5;
        let target = 0.55 + 0.15 * (rng.next_f64() + 1.0) / 2.0;
        let sys = random_pseudo_hurwitz_system(&mut rng, n, target);
        match sbrl::check_theorem1(&sys).unwrap() {
            Theorem1Outcome::Certified(_) => {
                let verdict = sbrl::check_gain_condition(&sys, &grid).unwrap();
                assert!(
                    verdict.holds && verdict.margin >= 1e-6,
                    "certified system with sweep margin {}",
                    verdict.margin
                );
                certified += 1;
            }
            _ => continue,
        }
    }

    // converse direction: minimal pseudo-Hurwitz systems with gain below
    // one admit a stabilizing solution with inertia (n-1, 1, 0)
    let mut confirmed = 0usize;
    let mut attempts = 0usize;
    while confirmed < 100 {
        attempts += 1;
        assert!(attempts < 3000, "generator failed to produce minimal instances");
        let n = 2 + attempts % 5;
        let target = 0.5 + 0.4 * (rng.next_f64() + 1.0) / 2.0;
        let sys = random_pseudo_hurwitz_system(&mut rng, n, target);
        let verdict = sbrl::check_gain_condition(&sys, &grid).unwrap();
        if !verdict.holds || !is_minimal(&sys) {
            continue;
        }
        let prob = AreProblem::new(
            sys.a.clone(),
            sys.b.dot(&sys.b.t()),
            sys.c.t().dot(&sys.c),
        )
        .unwrap();
        let sol = riccati::solve_stabilizing(&prob).unwrap_or_else(|e| {
            panic!("stabilizing solution must exist for a minimal bounded instance: {e}")
        });
        assert_eq!(
            (sol.inertia.positive, sol.inertia.negative, sol.inertia.zero),
            (n - 1, 1, 0),
            "inertia {:?} at n = {n}",
            sol.inertia
        );
        confirmed += 1;
    }
    println!("[criterion 5] strict-bound certificates: PASS (100 sound, 100 converse, 0 counterexamples)");
}

#[test]
fn criterion_6_output_feedback_duality() {
    let model = three_pendulum_model();
    let scaled = scaled_plant(&model.plant, 0.5, &[0.4, 0.6, 0.5], &[1.0, 1.0, 1.0]);
    let v2 = synthesis::output_feedback_pseudo_hinf_v2(&scaled).unwrap();
    let v1 = synthesis::output_feedback_pseudo_hinf_v1(&scaled.transpose_dual()).unwrap();

    let mut worst = 0.0_f64;
    for k in 0..20 {
        let omega = 10f64.powf(-3.0 + 6.0 * k as f64 / 19.0);
        let g2 = sbrl::frequency_response(&v2.closed_loop, omega, 0.0).unwrap();
        let g1 = sbrl::frequency_response(&v1.closed_loop, omega, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((g2[[i, j]] - g1[[j, i]]).norm());
            }
        }
    }
    assert!(worst < 1e-8, "duality mismatch {worst:.3e}");
    println!("[criterion 6] output-feedback duality: PASS (max mismatch {worst:.3e})");
}

#[test]
fn criterion_7_weight_rescaling() {
    let model = three_pendulum_model();
    let tau = [0.4, 0.6, 0.5];
    let mu = [1.0, 1.0, 1.0];
    let (xp, yp) = synthesis::weighted_riccati_pair(&model.plant, 0.5, &tau, &mu).unwrap();
    let x = riccati::solve_stabilizing(&xp).unwrap();
    let y = riccati::solve_stabilizing(&yp).unwrap();
    let rho = numlin::spectral_radius(&x.p.dot(&y.p).view()).unwrap();

    for gamma in [0.5, 2.0, 10.0] {
        let tau_scaled: Vec<f64> = tau.iter().map(|t| t * gamma).collect();
        let (xps, yps) =
            synthesis::weighted_riccati_pair(&model.plant, 0.5, &tau_scaled, &mu).unwrap();
        let xs = riccati::solve_stabilizing(&xps).unwrap();
        let ys = riccati::solve_stabilizing(&yps).unwrap();
        let dx = numlin::fro_norm(&(&xs.p - &x.p.mapv(|v| v * gamma)).view());
        let dy = numlin::fro_norm(&(&ys.p - &y.p.mapv(|v| v / gamma)).view());
        assert!(
            dx <= 1e-8 * gamma * numlin::fro_norm(&x.p.view()),
            "X rescaling defect {dx} at gamma {gamma}"
        );
        assert!(
            dy <= 1e-8 / gamma * numlin::fro_norm(&y.p.view()),
            "Y rescaling defect {dy} at gamma {gamma}"
        );
        assert_eq!(xs.inertia, x.inertia);
        assert_eq!(ys.inertia, y.inertia);
        let rho_s = numlin::spectral_radius(&xs.p.dot(&ys.p).view()).unwrap();
        assert!((rho - rho_s).abs() < 1e-8);
        assert_eq!(rho_s < 1.0, rho < 1.0);
    }
    println!("[criterion 7] weight rescaling: PASS (gamma in {{0.5, 2, 10}})");
}

#[test]
fn criterion_8_rationality_machinery() {
    let mut rng = TestRng::new(83);

    // common denominator clears every entry, exactly
    for _ in 0..1000 {
        let len = 1 + (rng.next_f64().abs() * 5.0) as usize;
        let mut nu = Vec::with_capacity(len);
        for _ in 0..len {
            let p = (rng.uniform(-500.0, 500.0)) as i64;
            let q = 1 + (rng.next_f64().abs() * 400.0) as i64;
            if p == 0 {
                nu.push(Rational64::new(1, q));
            } else {
                nu.push(Rational64::new(p, q));
            }
        }
        let p_bar = pendulum::lcmd(&nu).unwrap();
        assert!(p_bar >= 1);
        for r in &nu {
            let scaled = r * Rational64::from_integer(p_bar);
            assert!(scaled.is_integer(), "p_bar {p_bar} fails to clear {r}");
        }
    }

    // planted fractions with denominators up to 1e4 recovered from
    // 1e-12 perturbations, every single trial
    let mut recovered = 0usize;
    for _ in 0..1000 {
        let q = 1 + (rng.next_f64().abs() * 9999.0) as i64;
        let mut p = (rng.uniform(-9999.0, 9999.0)) as i64;
        if p == 0 {
            p = 7;
        }
        let x = p as f64 / q as f64 + rng.uniform(-1e-12, 1e-12);
        let got = pendulum::rationalize(&[x], 10_000, 1e-9).unwrap();
        let g = num_integer::Integer::gcd(&p, &q);
        assert_eq!(got[0], Rational64::new(p / g, q / g), "failed to recover {p}/{q}");
        recovered += 1;
    }
    assert_eq!(recovered, 1000);
    println!("[criterion 8] rationality machinery: PASS (1000 lcm vectors, 1000 recoveries)");
}
