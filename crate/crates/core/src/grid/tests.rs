use super::data::three_machine;
use super::sim::{simulate_linear, simulate_nonlinear, swing_rhs, LinearStepper};
use super::*;
use crate::linalg;
use approx::assert_relative_eq;
use nalgebra::dmatrix;

fn two_machine(d: f64) -> (Vec<MachineData<f64>>, DMatrix<f64>, DMatrix<f64>) {
    let machines = vec![
        MachineData::new(2.0, d, 1.1, 0.0).controlled(true),
        MachineData::new(2.0, d, 1.1, 0.0).reference(true),
    ];
    let g = DMatrix::zeros(2, 2);
    let b = dmatrix![0.0, 5.0; 5.0, 0.0];
    (machines, g, b)
}

fn bundled() -> GridModel<f64> {
    three_machine().build_model().unwrap()
}

/// Central-difference Jacobian of the nonlinear swing right-hand side.
fn fd_jacobian(model: &GridModel<f64>) -> DMatrix<f64> {
    let ng = model.n_g();
    let n = 2 * ng;
    let zero_u = DVector::zeros(ng);
    let rhs = |x: &DVector<f64>| {
        let theta = x.rows(0, ng) + &model.theta_eq;
        let omega = x.rows(ng, ng).into_owned();
        let (dt, dw) = swing_rhs(&model.machines, &model.network, &theta, &omega, &zero_u);
        let mut f = DVector::zeros(n);
        f.rows_mut(0, ng).copy_from(&dt);
        f.rows_mut(ng, ng).copy_from(&dw);
        f
    };
    let h = 1e-6;
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut xp = DVector::zeros(n);
        let mut xm = DVector::zeros(n);
        xp[j] = h;
        xm[j] = -h;
        jac.set_column(j, &((rhs(&xp) - rhs(&xm)) / (2.0 * h)));
    }
    jac
}

/// Largest distance after greedily matching each value to its nearest
/// unused partner, so rounding-level reorderings do not count.
fn max_spectrum_gap(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

#[test]
fn lossless_symmetric_pair_is_purely_imaginary() {
    let (machines, g, b) = two_machine(0.0);
    let model = build_linear_model(machines, g, b, 0.01).unwrap();
    let ev = exact_eigenvalues(&model, &DMatrix::zeros(1, 4)).unwrap();
    let expected = (2.0 * 1.1f64.powi(2) * 5.0 / 2.0).sqrt();
    let k = ev.iter().position(|l| l.im > 1e-9).unwrap();
    assert!(ev[k].re.abs() < 1e-12);
    assert_relative_eq!(ev[k].im, expected, epsilon = 1e-10);
    assert_relative_eq!(ev[k + 1].im, -expected, epsilon = 1e-10);
}

#[test]
fn damping_shifts_the_pair_left() {
    let (machines, g, b) = two_machine(0.4);
    let model = build_linear_model(machines, g, b, 0.01).unwrap();
    let ev = exact_eigenvalues(&model, &DMatrix::zeros(1, 4)).unwrap();
    let pair = ev.iter().find(|l| l.im > 1e-9).unwrap();
    // M s² + D s + K = 0 for the relative angle.
    let k = 2.0 * 1.1f64.powi(2) * 5.0;
    assert_relative_eq!(pair.re, -0.4 / 4.0, epsilon = 1e-10);
    assert_relative_eq!(pair.im, (k / 2.0 - 0.01).sqrt(), epsilon = 1e-10);
}

#[test]
fn b1_only_has_columns_for_controlled_machines() {
    let model = bundled();
    assert_eq!(model.p(), 2);
    assert_eq!(model.b1.shape(), (6, 2));
    assert_eq!(model.controlled(), &[0, 1]);
    assert_relative_eq!(model.b1[(3, 0)], 1.0 / 12.0);
    assert_relative_eq!(model.b1[(4, 1)], 1.0 / 10.0);
    assert_eq!(model.b1.iter().filter(|x| **x != 0.0).count(), 2);
    assert_eq!(model.b2.shape(), (6, 3));
}

#[test]
fn equilibrium_balances_power() {
    let model = bundled();
    let pe = electrical_power(&model.machines, &model.network, &model.theta_eq);
    for (i, m) in model.machines.iter().enumerate() {
        assert!((pe[i] - m.mech_power).abs() < 1e-9);
    }
    assert_eq!(model.theta_eq[model.reference()], 0.0);
}

#[test]
fn bundled_eigenvalues_match_finite_difference_jacobian() {
    let model = bundled();
    let exact = exact_eigenvalues(&model, &DMatrix::zeros(model.p(), model.m())).unwrap();
    let oracle = linalg::eigenvalues(&fd_jacobian(&model)).unwrap();
    assert!(max_spectrum_gap(&exact, &oracle) < 1e-6, "{exact:?} vs {oracle:?}");
}

#[test]
fn isolated_generator_is_reported() {
    let machines = vec![
        MachineData::new(1.0, 0.1, 1.0, 0.0).controlled(true).reference(true),
        MachineData::new(1.0, 0.1, 1.0, 0.0),
        MachineData::new(1.0, 0.1, 1.0, 0.0),
    ];
    let g = DMatrix::zeros(3, 3);
    let b = dmatrix![0.0, 2.0, 0.0; 2.0, 0.0, 0.0; 0.0, 0.0, 0.0];
    let err = build_linear_model(machines, g, b, 0.01).unwrap_err();
    assert!(matches!(err, Error::DisconnectedNetwork(3)), "{err}");
}

#[test]
fn infeasible_transfer_has_no_operating_point() {
    let machines = vec![
        MachineData::new(1.0, 0.1, 1.0, 3.0).controlled(true),
        MachineData::new(1.0, 0.1, 1.0, -3.0).reference(true),
    ];
    let g = DMatrix::zeros(2, 2);
    let b = dmatrix![0.0, 1.0; 1.0, 0.0];
    let err = build_linear_model(machines, g, b, 0.01).unwrap_err();
    assert!(matches!(err, Error::NoStationaryPoint(_)), "{err}");
}

#[test]
fn machine_invariants_are_checked() {
    let (mut machines, g, b) = two_machine(0.1);
    machines[1].reference = false;
    assert!(matches!(
        build_linear_model(machines.clone(), g.clone(), b.clone(), 0.01),
        Err(Error::InvalidModel(_))
    ));
    machines[1].reference = true;
    machines[0].inertia = 0.0;
    assert!(build_linear_model(machines, g, b, 0.01).is_err());
}

#[test]
fn gain_shape_is_validated() {
    let model = bundled();
    let err = exact_eigenvalues(&model, &DMatrix::zeros(2, 5)).unwrap_err();
    assert!(matches!(err, Error::GainShapeMismatch { .. }));
}

#[test]
fn open_loop_gain_gives_spectrum_of_a() {
    let model = bundled();
    let ev = exact_eigenvalues(&model, &DMatrix::zeros(2, 6)).unwrap();
    let direct = linalg::eigenvalues(&model.a).unwrap();
    assert_eq!(ev, direct);
}

/// Two machines with a diagonal A: feedback on the frequency states shifts
/// those eigenvalues by the gain.
#[test]
fn diagonal_feedback_shifts_eigenvalues() {
    let (machines, g, b) = two_machine(0.0);
    let machines: Vec<_> = machines.into_iter().map(|m| m.controlled(true)).collect();
    let net = Network::new(g, b).unwrap();
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-5.0, -6.0, -1.0, -2.0]));
    let b1 = dmatrix![0.0, 0.0; 0.0, 0.0; 1.0, 0.0; 0.0, 1.0];
    let model = GridModel::from_parts(machines, net, DVector::zeros(2), a, b1, DMatrix::zeros(4, 2), 0.01).unwrap();
    let k = dmatrix![0.0, 0.0, 1.0, 0.0; 0.0, 0.0, 0.0, 1.0];
    let ev = exact_eigenvalues(&model, &k).unwrap();
    let re: Vec<f64> = ev.iter().map(|l| l.re).collect();
    assert_eq!(re, vec![-2.0, -3.0, -5.0, -6.0]);
}

/// Characteristic polynomial by Faddeev–LeVerrier, roots by Durand–Kerner
/// with Newton polishing.
fn companion_roots(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[k - 1];
        let c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    let poly = |z: Complex<f64>| coeffs.iter().fold(Complex::new(0.0, 0.0), |acc, c| acc * z + c);
    let dpoly = |z: Complex<f64>| {
        let mut acc = Complex::new(0.0, 0.0);
        for (i, c) in coeffs.iter().enumerate().take(n) {
            acc = acc * z + c * (n - i) as f64;
        }
        acc
    };
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n).map(|i| seed.powu(i as u32) * 2.0).collect();
    for _ in 0..2000 {
        for i in 0..n {
            let ri = roots[i];
            let mut denom = Complex::new(1.0, 0.0);
            for (j, rj) in roots.iter().enumerate() {
                if i != j {
                    denom *= ri - rj;
                }
            }
            roots[i] = ri - poly(ri) / denom;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..5 {
            let d = dpoly(*r);
            if d.norm() > 0.0 {
                *r -= poly(*r) / d;
            }
        }
    }
    for r in roots.iter_mut() {
        if r.im.abs() < 1e-9 {
            r.im = 0.0;
        }
    }
    linalg::sort_spectrum(&mut roots);
    roots
}

#[test]
fn closed_loop_eigenvalues_match_companion_roots() {
    use rand::{Rng, SeedableRng};
    let model = bundled();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 3 {
        let k = DMatrix::from_fn(model.p(), model.m(), |_, j| {
            if j >= model.n_g() {
                rng.random_range(0.0..4.0)
            } else {
                rng.random_range(-2.0..2.0)
            }
        });
        let ev = exact_eigenvalues(&model, &k).unwrap();
        if ev.iter().skip(1).any(|l| l.re > -1e-9) {
            continue;
        }
        let oracle = companion_roots(&model.closed_loop_matrix(&k).unwrap());
        let gap = max_spectrum_gap(&ev, &oracle);
        assert!(gap < 1e-8, "gap {gap}: {ev:?} vs {oracle:?}");
        checked += 1;
    }
}

#[test]
fn null_dynamics_hold_state() {
    let (machines, g, b) = two_machine(0.0);
    let net = Network::new(g, b).unwrap();
    let model = GridModel::from_parts(
        machines,
        net,
        DVector::zeros(2),
        DMatrix::zeros(4, 4),
        dmatrix![0.0; 0.0; 1.0; 0.0],
        DMatrix::zeros(4, 2),
        0.01,
    )
    .unwrap();
    let x0 = SystemState::from_vector(&DVector::from_vec(vec![0.1, -0.2, 0.3, 0.4]), 2).unwrap();
    let traj = simulate_linear(&model, &x0, |_, _| DVector::zeros(1), 0.0, 50, 1).unwrap();
    assert_eq!(traj.len(), 51);
    assert!(traj.iter().all(|s| s == &x0));
}

#[test]
fn scalar_decay_is_exponential() {
    let machines = vec![MachineData::new(1.0, 0.0, 1.0, 0.0).controlled(true).reference(true)];
    let net = Network::new(dmatrix![0.0], dmatrix![0.0]).unwrap();
    let a = dmatrix![-1.0, 0.0; 0.0, -1.0];
    let model = GridModel::from_parts(machines, net, DVector::zeros(1), a, dmatrix![0.0; 1.0], DMatrix::zeros(2, 1), 0.01).unwrap();
    let x0 = SystemState::from_vector(&DVector::from_vec(vec![1.0, 1.0]), 1).unwrap();
    let traj = simulate_linear(&model, &x0, |_, _| DVector::zeros(1), 0.0, 300, 0).unwrap();
    for (k, s) in traj.iter().enumerate() {
        let expected = (-0.01 * k as f64).exp();
        assert!((s.theta[0] - expected).abs() <= 4.0 * f64::EPSILON * (k as f64 + 1.0));
    }
}

/// Initial condition `Re(v)` for the leading oscillatory eigenvector.
fn oscillatory_mode(model: &GridModel<f64>) -> (Complex<f64>, nalgebra::DVector<Complex<f64>>) {
    let d = linalg::eigen_decomposition(&model.a).unwrap();
    let k = d.values.iter().position(|l| l.im > 1e-6).unwrap();
    (d.values[k], d.right.column(k).into_owned())
}

#[test]
fn modal_initial_condition_follows_modal_solution() {
    let model = bundled();
    let (lambda, v) = oscillatory_mode(&model);
    let x0 = SystemState::from_vector(&v.map(|z| z.re), model.n_g()).unwrap();
    let traj = simulate_linear(&model, &x0, |_, _| DVector::zeros(2), 0.0, 500, 0).unwrap();
    for (k, s) in traj.iter().enumerate() {
        let t = k as f64 * model.dt;
        let expected = v.map(|z| ((lambda * t).exp() * z).re);
        let got = s.to_vector();
        let err = (&got - &expected).norm() / expected.norm();
        assert!(err < 1e-8, "step {k}: relative error {err}");
    }
}

#[test]
fn zoh_is_step_size_exact_for_held_inputs() {
    let model = bundled();
    let coarse = LinearStepper::with_step(&model, model.dt);
    let fine = LinearStepper::with_step(&model, model.dt / 2.0);
    let mut xc = DVector::from_vec(vec![0.05, -0.02, 0.0, 0.01, 0.0, -0.01]);
    let mut xf = xc.clone();
    for k in 0..400 {
        let u = DVector::from_vec(vec![(k as f64 * 0.1).sin(), 0.3]);
        let eta = DVector::from_vec(vec![0.01, -0.02, 0.005]);
        xc = coarse.step_vector(&xc, &u, Some(&eta));
        for _ in 0..2 {
            xf = fine.step_vector(&xf, &u, Some(&eta));
        }
        assert!((&xc - &xf).amax() < 1e-10);
    }
}

#[test]
fn eigenvector_decay_rate_matches_real_part() {
    let model = bundled();
    let d = linalg::eigen_decomposition(&model.a).unwrap();
    for (k, lambda) in d.values.iter().enumerate() {
        if lambda.im <= 1e-6 {
            continue;
        }
        let v = d.right.column(k).into_owned();
        let x0 = SystemState::from_vector(&v.map(|z| z.re), model.n_g()).unwrap();
        let steps = 3000;
        let traj = simulate_linear(&model, &x0, |_, _| DVector::zeros(2), 0.0, steps, 0).unwrap();
        // Log of the modal amplitude |x|² + |ẋ/ω_d|² removes the oscillation;
        // regress it against time.
        let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
        let mut count = 0.0;
        for (i, s) in traj.iter().enumerate() {
            let t = i as f64 * model.dt;
            let x = s.to_vector();
            let xdot = &model.a * &x;
            let amp = x.norm_squared() + xdot.norm_squared() / lambda.im.powi(2);
            let y = 0.5 * amp.ln();
            st += t;
            sy += y;
            stt += t * t;
            sty += t * y;
            count += 1.0;
        }
        let slope = (count * sty - st * sy) / (count * stt - st * st);
        assert!(
            (slope - lambda.re).abs() <= 0.01 * lambda.re.abs(),
            "slope {slope} vs Re(λ) {}",
            lambda.re
        );
    }
}

#[test]
fn nonlinear_equilibrium_is_invariant() {
    let file = three_machine();
    let machines = file.machines::<f64>();
    let scenario = FaultScenario::steady(file.network.to_network().unwrap());
    let x0 = SystemState::zeros(3, 0);
    let traj = simulate_nonlinear(&machines, &scenario, &x0, |_, _| DVector::zeros(2), 0.01, 1000).unwrap();
    for s in &traj {
        assert!(s.max_abs_omega() < 1e-10);
    }
}

#[test]
fn nonlinear_matches_linear_for_small_perturbations() {
    let file = three_machine();
    let model: GridModel<f64> = file.build_model().unwrap();
    let scenario = FaultScenario::steady(model.network.clone());
    let x0v = DVector::from_vec(vec![4e-4, -3e-4, 2e-4, 5e-4, -4e-4, 1e-4]);
    let x0v = &x0v * (1e-3 / x0v.norm());
    let x0 = SystemState::from_vector(&x0v, 3).unwrap();
    let steps = 500;
    let lin = simulate_linear(&model, &x0, |_, _| DVector::zeros(2), 0.0, steps, 0).unwrap();
    let non = simulate_nonlinear(&model.machines, &scenario, &x0, |_, _| DVector::zeros(2), model.dt, steps).unwrap();
    let worst = lin
        .iter()
        .zip(&non)
        .map(|(a, b)| (&a.theta - &b.theta).amax())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "max angle deviation {worst}");
    // The deviation is second order in the perturbation.
    assert!(worst < 1e-5, "max angle deviation {worst}");
}

#[test]
fn two_machine_oscillation_frequency_matches_linearization() {
    let (machines, g, b) = two_machine(0.0);
    let model = build_linear_model(machines.clone(), g, b, 0.01).unwrap();
    let ev = exact_eigenvalues(&model, &DMatrix::zeros(1, 4)).unwrap();
    let omega_lin = ev.iter().map(|l| l.im).fold(0.0, f64::max);
    let scenario = FaultScenario::steady(model.network.clone());
    let x0 = SystemState::from_vector(&DVector::from_vec(vec![0.01, -0.01, 0.0, 0.0]), 2).unwrap();
    let steps = 8192;
    let traj = simulate_nonlinear(&machines, &scenario, &x0, |_, _| DVector::zeros(1), 0.01, steps - 1).unwrap();
    let signal: Vec<f64> = traj.iter().map(|s| s.theta[0] - s.theta[1]).collect();
    // Direct DFT peak search over a fine frequency grid.
    let total = steps as f64 * 0.01;
    let mut best = (0.0, 0.0);
    let mut w = 0.5;
    while w < 10.0 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, x) in signal.iter().enumerate() {
            let t = k as f64 * 0.01;
            re += x * (w * t).cos();
            im += x * (w * t).sin();
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (w, power);
        }
        w += std::f64::consts::PI / total / 8.0;
    }
    assert!((best.0 - omega_lin).abs() / omega_lin < 0.02, "peak {} vs {}", best.0, omega_lin);
}

#[test]
fn line_trip_settles_at_post_fault_equilibrium() {
    let file = three_machine();
    let machines = file.machines::<f64>();
    let scenario = file.fault_scenario::<f64>().unwrap().unwrap();
    let pre_eq = solve_equilibrium(&machines, &scenario.pre).unwrap();
    let post_eq = solve_equilibrium(&machines, &scenario.post).unwrap();
    let x0 = SystemState::zeros(3, 0);
    let traj = simulate_nonlinear(&machines, &scenario, &x0, |_, _| DVector::zeros(2), 0.01, 30_000).unwrap();
    let last = traj.last().unwrap();
    assert!(last.max_abs_omega() < 1e-6);
    let r = 2;
    for i in 0..3 {
        let got = (last.theta[i] + pre_eq[i]) - (last.theta[r] + pre_eq[r]);
        assert!((got - post_eq[i]).abs() < 1e-6, "gen {i}: {got} vs {}", post_eq[i]);
    }
}

#[test]
fn fault_events_switch_on_step_boundaries() {
    let file = three_machine();
    let scenario = file.fault_scenario::<f64>().unwrap().unwrap();
    let ev = scenario.event_steps(0.01);
    assert_eq!(ev, [10, 20, 50]);
    assert_eq!(scenario.network_at_step(9, &ev), &scenario.pre);
    assert_eq!(scenario.network_at_step(10, &ev), &scenario.fault);
    assert_eq!(scenario.network_at_step(49, &ev), &scenario.fault);
    assert_eq!(scenario.network_at_step(50, &ev), &scenario.post);
    let ev = scenario.event_steps(0.03);
    assert_eq!(ev, [4, 7, 17]);
}

#[test]
fn fault_times_must_be_ordered() {
    let net = three_machine().network.to_network::<f64>().unwrap();
    assert!(FaultScenario::new((1, 2), 0.2, 0.1, 0.5, net.clone(), net.clone(), net).is_err());
}

#[test]
fn generic_over_f32() {
    let model: GridModel<f32> = three_machine().build_model().unwrap();
    let ev = exact_eigenvalues(&model, &DMatrix::zeros(2, 6)).unwrap();
    assert_eq!(ev.len(), 6);
    assert!(ev.iter().any(|l| l.im > 0.5));
}
