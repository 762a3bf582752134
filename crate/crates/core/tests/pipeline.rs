//! Nonlinear model to closed-loop simulation, end to end.

use bufferloop::looptf::{analyze_plant, DEFAULT_CANCEL_TOL};
use bufferloop::plantmodel::{
    is_internally_stable, linearize, mass_action_model, realize_closed_loop, solve_steady_state, Channel,
    MassActionParams, SteadyGuess, SteadyPin,
};
use bufferloop::ratcalc::{RationalTF, DEFAULT_AXIS_TOL};
use bufferloop::simkit::{default_timing, sinusoid_response, step_response};
use num_complex::Complex64;

fn params() -> MassActionParams {
    MassActionParams {
        k_prod: 1.2,
        k_deg: 0.8,
        k_in: 1.5,
        k_conv: 1.0,
        k1: 2.0,
        k2: 1.0,
        k3: 0.3,
    }
}

#[test]
fn mass_action_loop_matches_simulation() {
    let k = params();
    let m = mass_action_model(k, true);
    let guess = SteadyGuess {
        y: 1.0,
        z: vec![1.5],
        x: 1.5,
        u_h: 1.0,
    };
    let ss = solve_steady_state(&m, SteadyPin::Setpoint(1.0), &guess, 1e-13, 100).unwrap();
    assert!(ss.u_h > 0.0 && ss.x > 0.0 && ss.z[0] > 0.0);
    let plant = linearize(&m, &ss, 1e-6).unwrap();
    assert!(plant.buffer.a_xx > 0.0, "removal makes the buffer dissipative");

    let c_h = RationalTF::from_coeffs(&[0.5], &[2.0, 1.0]).unwrap();
    let cl = realize_closed_loop(&plant, &c_h).unwrap();
    assert!(is_internally_stable(&cl, DEFAULT_AXIS_TOL).unwrap().0);
    let (_, _, loops) = analyze_plant(&plant, &c_h, DEFAULT_CANCEL_TOL).unwrap();

    let zero = Complex64::new(0.0, 0.0);
    let (dt, t_end) = default_timing(&cl).unwrap();
    for ch in [Channel::Dy, Channel::Dz(0), Channel::Dx, Channel::Db] {
        let tr = step_response(&cl, ch, 0.5, dt, t_end).unwrap();
        let dc = loops.closed_loop(ch).unwrap().eval(zero).unwrap().re;
        assert!((tr.final_value() - 0.5 * dc).abs() < 1e-6, "{ch}");
    }
    for w in [0.3, 3.0] {
        let fit = sinusoid_response(&cl, Channel::Dy, w).unwrap();
        let exact = loops.t_dyz[0].eval_jw(w).unwrap().norm();
        assert!((fit.amplitude - exact).abs() <= 1e-3 * exact, "omega={w}");
    }
}
