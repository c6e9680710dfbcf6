//! Shared random parameter generators for the integration tests.

#![allow(dead_code)]

use optoepr_core::model::{PhysicalParams, SteadyState};
use optoepr_core::spectra::{build_state_space, NoisePsd, StateSpace};
use rand::Rng;

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random laboratory parameters with the drive on the cavity resonance.
pub fn random_physical<R: Rng>(rng: &mut R) -> PhysicalParams {
    let gamma_c = log_uniform(rng, 1e5, 1e8);
    let omega_c = log_uniform(rng, 1e14, 1e16);
    PhysicalParams {
        mass: log_uniform(rng, 1e-9, 1e-3),
        cavity_length: log_uniform(rng, 1e-4, 1e-1),
        omega_m: gamma_c * log_uniform(rng, 0.1, 10.0),
        gamma_m: gamma_c * log_uniform(rng, 1e-3, 1.0),
        omega_c,
        omega_0: omega_c,
        gamma_c,
        temperature: rng.random_range(0.0..300.0),
        input_power: log_uniform(rng, 1e-9, 1.0),
    }
}

/// Draws until the linearized model at a random `Δ` is stable.
pub fn random_stable_model<R: Rng>(rng: &mut R) -> (PhysicalParams, f64, StateSpace, NoisePsd) {
    for _ in 0..100_000 {
        let p = random_physical(rng);
        let delta = rng.random_range(0.05..2.0);
        let Ok(ss) = SteadyState::at_detuning(&p, delta) else {
            continue;
        };
        if let Ok(m) = build_state_space(&p, &ss) {
            return (p, delta, m, NoisePsd::from_params(&p));
        }
    }
    panic!("no stable parameter set found");
}
