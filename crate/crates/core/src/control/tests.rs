use super::*;
use crate::grid::SystemState;
use approx::assert_relative_eq;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;

fn params(k: f64, tw: f64, tn1: f64, td1: f64, tn2: f64, td2: f64) -> PssParams<f64> {
    PssParams { k, tw, tn1, td1, tn2, td2 }
}

fn impulse_response(p: &PssParams<f64>, dt: f64, amplitude: f64, len: usize) -> Vec<f64> {
    let pss = DiscretePss::new(p, dt).unwrap();
    let mut state = PssState::zero();
    (0..len)
        .map(|k| {
            let input = if k == 0 { amplitude } else { 0.0 };
            let (y, s) = pss_step(&pss, input, &state);
            state = s;
            y
        })
        .collect()
}

#[test]
fn zero_gain_gives_zero_output() {
    let p = params(0.0, 10.0, 0.05, 0.02, 3.0, 5.4);
    let pss = DiscretePss::new(&p, 0.01).unwrap();
    let mut state = PssState::zero();
    for k in 0..200 {
        let (y, s) = pss_step(&pss, (k as f64 * 0.3).sin() + 2.0, &state);
        assert_eq!(y, 0.0);
        state = s;
    }
}

#[test]
fn washout_rejects_constant_input() {
    let p = PssParams::default();
    let dt = 0.01;
    let pss = DiscretePss::new(&p, dt).unwrap();
    let mut state = PssState::zero();
    let steps = (50.0 * p.tw / dt) as usize;
    let mut y = f64::NAN;
    for _ in 0..steps {
        let out = pss_step(&pss, 0.7, &state);
        y = out.0;
        state = out.1;
    }
    assert!(y.abs() < 1e-6, "steady output {y}");
}

/// With cancelling lead-lags only the washout remains. Its bilinear impulse
/// response is `h[0] = k·a` and `h[n] = −k·a·(1 − ρ)·ρ^(n−1)` with
/// `a = 2T/(2T + Δt)` and `ρ = (2T − Δt)/(2T + Δt)`.
#[test]
fn impulse_response_matches_washout_closed_form() {
    let (k, tw, dt) = (1.0, 10.0, 0.01);
    let p = params(k, tw, 0.2, 0.2, 3.0, 3.0);
    let h = impulse_response(&p, dt, 1.0, 500);
    let a = 2.0 * tw / (2.0 * tw + dt);
    let rho = (2.0 * tw - dt) / (2.0 * tw + dt);
    assert_relative_eq!(h[0], k * a, epsilon = 1e-15);
    for (n, &hn) in h.iter().enumerate().skip(1) {
        let expected = -k * a * (1.0 - rho) * rho.powi(n as i32 - 1);
        assert_relative_eq!(hn, expected, epsilon = 1e-14, max_relative = 1e-12);
    }
}

#[test]
fn halving_the_step_barely_moves_the_impulse_response() {
    let p = PssParams::default();
    // Unit-area pulse on the first sample approximates a Dirac input.
    let coarse = impulse_response(&p, 0.01, 1.0 / 0.01, 2000);
    let fine = impulse_response(&p, 0.005, 1.0 / 0.005, 4000);
    // The first lead-lag has a 20 ms pole that the coarse grid resolves with
    // two samples; compare once it has decayed (t ≥ 0.2 s = 10 time constants).
    let peak = coarse.iter().skip(20).fold(0.0f64, |m, v| m.max(v.abs()));
    for n in 20..2000 {
        let diff = (coarse[n] - fine[2 * n]).abs();
        assert!(diff < 0.01 * peak, "t = {}: {} vs {}", n as f64 * 0.01, coarse[n], fine[2 * n]);
    }
}

#[test]
fn nonpositive_time_constants_are_rejected() {
    let p = PssParams::<f64> { td1: 0.0, ..PssParams::default() };
    assert!(DiscretePss::new(&p, 0.01).is_err());
}

#[test]
fn bank_filters_each_generator_independently() {
    let mut bank = PssBank::uniform(&PssParams::default(), 2, 0.01).unwrap();
    let single = DiscretePss::new(&PssParams::default(), 0.01).unwrap();
    let mut state = PssState::zero();
    for k in 0..50 {
        let w = (k as f64 * 0.1).sin();
        let out = bank.step(&dvector![w, 0.0]).unwrap();
        let (y, s) = pss_step(&single, w, &state);
        state = s;
        assert_eq!(out[0], y);
        assert_eq!(out[1], 0.0);
    }
    bank.reset();
    assert!(bank.states().iter().all(|s| *s == PssState::zero()));
    assert!(bank.step(&dvector![1.0]).is_err());
}

#[test]
fn wide_area_hand_cases() {
    let k = dmatrix![1.0, 2.0];
    let u = wide_area_output(&k, &dvector![0.1, -0.05]).unwrap();
    assert_relative_eq!(u[0], 0.0, epsilon = 1e-17);
    assert_eq!(wide_area_output(&DMatrix::zeros(2, 4), &dvector![1.0, 2.0, 3.0, 4.0]).unwrap(), DVector::zeros(2));
    assert_eq!(wide_area_output(&dmatrix![3.0, -1.0], &DVector::zeros(2)).unwrap()[0], 0.0);
    assert!(wide_area_output(&k, &dvector![1.0]).is_err());
}

#[test]
fn normalized_actions_unflatten_row_major() {
    let g = GainAction::from_normalized(&[0.1, -0.2, 0.3, 1.0, -1.0, 0.0], 2, 3, 10.0).unwrap();
    assert_eq!(g.k, dmatrix![1.0, -2.0, 3.0; 10.0, -10.0, 0.0]);
    let back = g.to_normalized();
    assert_relative_eq!(back[2], 0.3);
    assert!(GainAction::from_normalized(&[1.5], 1, 1, 10.0).is_err());
    assert!(GainAction::from_normalized(&[0.5], 1, 2, 10.0).is_err());
}

fn state(theta: Vec<f64>, omega: Vec<f64>) -> SystemState<f64> {
    SystemState {
        theta: DVector::from_vec(theta),
        omega: DVector::from_vec(omega),
        rem: DVector::zeros(0),
    }
}

#[test]
fn energy_hand_cases() {
    let cfg = ScsConfig::new(0.1, [1.0, 1.0, 1.0], 1).unwrap();
    assert_eq!(energy(&state(vec![0.3, 0.3], vec![0.0, 0.0]), &cfg), 0.0);
    assert_eq!(energy(&state(vec![0.0, 0.0], vec![1.0, 0.0]), &cfg), 3.0);
    let double = ScsConfig::new(0.1, [2.0, 2.0, 2.0], 1).unwrap();
    let s = state(vec![0.2, -0.1], vec![0.4, 0.1]);
    assert_relative_eq!(energy(&s, &double), 2.0 * energy(&s, &cfg), epsilon = 1e-15);
}

#[test]
fn scs_config_is_validated() {
    assert!(ScsConfig::new(0.0, [1.0, 1.0, 1.0], 0).is_err());
    assert!(ScsConfig::new(0.1, [0.0, 0.0, 0.0], 0).is_err());
    assert!(ScsConfig::new(0.1, [-1.0, 1.0, 1.0], 0).is_err());
}

#[test]
fn switching_rule_boundaries() {
    let loc = dvector![0.5, -0.25];
    let wac = dvector![1.0, 2.0];
    let (u, on) = scs_combine(&loc, &wac, 0.0, 0.1);
    assert!(!on);
    assert_eq!(u, loc);
    let (u, on) = scs_combine(&loc, &wac, 0.2, 0.1);
    assert!(on);
    assert_eq!(u, dvector![1.5, 1.75]);
    let (u, on) = scs_combine(&loc, &wac, 0.1, 0.1);
    assert!(!on);
    assert_eq!(u, loc);
}

#[test]
fn delay_line_examples() {
    let mut zero = DelayLine::new(0.0, 0.01).unwrap();
    for k in 0..5 {
        let v = dvector![k as f64];
        assert_eq!(delayed_observation(&mut zero, v.clone()), v);
    }

    let mut three = DelayLine::new(0.03, 0.01).unwrap();
    assert_eq!(three.steps(), 3);
    for _ in 0..10 {
        assert_eq!(three.push(dvector![2.5]), dvector![2.5]);
    }

    let dt = 0.01;
    let mut line = DelayLine::new(0.35, dt).unwrap();
    assert_eq!(line.steps(), 35);
    for k in 0..200 {
        let out = line.push(dvector![k as f64 * dt]);
        if k >= 35 {
            assert_relative_eq!(out[0], (k - 35) as f64 * dt, epsilon = 1e-12);
        } else {
            assert_eq!(out[0], 0.0);
        }
    }
    assert_eq!(DelayLine::<f64>::new(0.8, 0.01).unwrap().steps(), 80);
    assert!(matches!(DelayLine::new(-0.1, 0.01), Err(crate::Error::InvalidDelay(_))));
}

proptest! {
    #[test]
    fn energy_ignores_uniform_angle_shift(
        theta in prop::collection::vec(-1.0f64..1.0, 4),
        omega in prop::collection::vec(-1.0f64..1.0, 4),
        shift in -3.0f64..3.0,
        reference in 0usize..4,
    ) {
        let cfg = ScsConfig::new(0.1, [0.7, 1.3, 0.4], reference).unwrap();
        let a = energy(&state(theta.clone(), omega.clone()), &cfg);
        let b = energy(&state(theta.iter().map(|t| t + shift).collect(), omega), &cfg);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn switched_off_output_is_bitwise_local(
        loc in prop::collection::vec(-10.0f64..10.0, 3),
        wac in prop::collection::vec(-10.0f64..10.0, 3),
        p in 0.0f64..1.0,
    ) {
        let loc = DVector::from_vec(loc);
        let (u, on) = scs_combine(&loc, &DVector::from_vec(wac), p, 1.0);
        prop_assert!(!on);
        for (a, b) in u.iter().zip(loc.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn delay_line_is_a_pure_shift(
        input in prop::collection::vec(-5.0f64..5.0, 1..300),
        delay in 0.0f64..1.0,
    ) {
        let dt = 0.01;
        let mut line = DelayLine::new(delay, dt).unwrap();
        let d = line.steps();
        prop_assert_eq!(d, (delay / dt - 1e-9).ceil().max(0.0) as usize);
        for (k, x) in input.iter().enumerate() {
            let out = line.push(dvector![*x]);
            let expected = input[k.saturating_sub(d)];
            prop_assert_eq!(out[0].to_bits(), expected.to_bits());
        }
    }
}
