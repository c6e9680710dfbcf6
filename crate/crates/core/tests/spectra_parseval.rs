//! The stationary covariance is the integral of the state spectrum; checks
//! the frequency-domain transfer against the time-domain Lyapunov solution.

use std::f64::consts::{FRAC_PI_2, PI};

use optoepr_core::model::{DimensionlessParams, PhysicalParams, SteadyState};
use optoepr_core::spectra::{
    build_state_space, state_spectrum, stationary_covariance, NoisePsd, Q, X1, Y2,
};

fn integrated_spectrum(t_cal: f64, index: usize) -> (f64, f64) {
    let dp = DimensionlessParams::new(0.17, t_cal, 0.18).unwrap();
    let p = PhysicalParams::realize(&dp, &PhysicalParams::damped_reference()).unwrap();
    let ss = SteadyState::at_detuning(&p, dp.delta).unwrap();
    let m = build_state_space(&p, &ss).unwrap();
    let white = NoisePsd::from_params(&p).white_diagonal();

    // ω = W tan θ maps the real line onto (−π/2, π/2); Simpson in θ.
    let w = p.gamma_c;
    let n = 20_000;
    let h = PI / n as f64;
    let mut acc = 0.0;
    for k in 1..n {
        let theta = -FRAC_PI_2 + h * k as f64;
        let omega = w * theta.tan();
        let jac = w / theta.cos().powi(2);
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * state_spectrum(&m, &white, omega).unwrap()[(index, index)] * jac;
    }
    let integral = acc * h / 3.0 / (2.0 * PI);
    let sigma = stationary_covariance(&m, &white).unwrap();
    (integral, sigma[(index, index)])
}

#[test]
fn optical_variance_matches_lyapunov() {
    for index in [X1, Y2] {
        let (integral, lyap) = integrated_spectrum(0.1, index);
        assert!((integral / lyap - 1.0).abs() < 1e-2, "{integral} vs {lyap}");
    }
}

#[test]
fn mirror_variance_matches_lyapunov() {
    let (integral, lyap) = integrated_spectrum(1.5, Q);
    assert!((integral / lyap - 1.0).abs() < 1e-2, "{integral} vs {lyap}");
}
