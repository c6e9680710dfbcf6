//! Monte Carlo estimates against the analytic spectra. Reduced run sizes;
//! the full default configuration is exercised by the acceptance target.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{SVector, Vector6};
use optoepr_core::model::{DimensionlessParams, PhysicalParams, SteadyState};
use optoepr_core::sde_oracle::{
    epr_product_estimate, estimate_inference_variance, EulerMaruyama, SimConfig,
};
use optoepr_core::spectra::{
    build_state_space, inferred_variance_at, stationary_covariance, NoisePsd, StateSpace, X1,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn model_for(p_cal: f64, t_cal: f64) -> (StateSpace, NoisePsd) {
    let dp = DimensionlessParams::new(p_cal, t_cal, 0.18).unwrap();
    let p = PhysicalParams::realize(&dp, &PhysicalParams::damped_reference()).unwrap();
    let ss = SteadyState::at_detuning(&p, 0.18).unwrap();
    (
        build_state_space(&p, &ss).unwrap(),
        NoisePsd::from_params(&p),
    )
}

#[test]
fn reference_point_variances() {
    let (m, noise) = model_for(0.17, 0.1);
    let cfg = SimConfig::default_for(&m).with_counts(100, 32);
    for (phi, expected) in [
        (0.0, 0.403_116_713_855_557),
        (FRAC_PI_2, 1.744_563_673_326_957),
    ] {
        let (var, gain) = inferred_variance_at(&m, &noise, 0.0, phi).unwrap();
        assert!((var - expected).abs() < 1e-9);
        let e = estimate_inference_variance(&m, &noise, &cfg, phi, gain).unwrap();
        assert!(e.z_score(expected).abs() < 3.0, "phi = {phi}: {e:?}");
    }
}

#[test]
fn hot_point_product_exceeds_one() {
    let (m, noise) = model_for(0.17, 1.5);
    let cfg = SimConfig::default_for(&m).with_counts(50, 32);
    let e = epr_product_estimate(&m, &noise, &cfg).unwrap();
    // One-sided 99%.
    assert!(e.sigmas_below_one() < -2.33, "{e:?}");
    assert!(
        (e.product - 2.204_401_862_563).abs() < 3.0 * e.product_err,
        "{e:?}"
    );
}

#[test]
fn zero_power_product_is_one() {
    let (m, noise) = model_for(0.0, 0.5);
    let cfg = SimConfig::default_for(&m).with_counts(50, 32);
    let e = epr_product_estimate(&m, &noise, &cfg).unwrap();
    assert!((e.product - 1.0).abs() < 3.0 * e.product_err, "{e:?}");
}

#[test]
fn std_err_scales_with_trajectory_count() {
    let (m, noise) = model_for(0.17, 0.1);
    let (_, gain) = inferred_variance_at(&m, &noise, 0.0, 0.0).unwrap();
    let base = SimConfig::default_for(&m);
    let small =
        estimate_inference_variance(&m, &noise, &base.with_counts(25, 32), 0.0, gain).unwrap();
    let large =
        estimate_inference_variance(&m, &noise, &base.with_counts(25, 128), 0.0, gain).unwrap();
    let ratio = small.std_err / large.std_err;
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

/// Stationary `⟨x₁²⟩` of the empty cavity from one path at step `dt` and a
/// coupled path at `dt/2` driven by the same Brownian increments.
#[test]
fn halving_the_step_stays_within_one_standard_error() {
    let (m, noise) = model_for(0.0, 0.5);
    let white = noise.white_diagonal();
    let lyap = stationary_covariance(&m, &white).unwrap()[(X1, X1)];
    let dt = SimConfig::default_for(&m).dt;
    let coarse = EulerMaruyama::new(&m, &white, dt);
    let fine = EulerMaruyama::new(&m, &white, 0.5 * dt);
    let scale = SVector::<f64, 5>::from_iterator(white.iter().map(|q| (q * 0.5 * dt).sqrt()));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut xc, mut xf) = (Vector6::zeros(), Vector6::zeros());
    let burn = (20.0 / (m.gamma_c * dt)) as usize;
    let batch = (20.0 / (m.gamma_c * dt)) as usize;
    let n_batches = 400;
    let (mut bc, mut bf) = (Vec::new(), Vec::new());
    for k in 0..burn + batch * n_batches {
        let mut half = || {
            SVector::<f64, 5>::from_fn(|i, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale[i]
            })
        };
        let (a, b) = (half(), half());
        fine.step_with(&mut xf, &a);
        fine.step_with(&mut xf, &b);
        coarse.step_with(&mut xc, &(a + b));
        if k >= burn {
            let j = (k - burn) / batch;
            if bc.len() == j {
                bc.push(0.0);
                bf.push(0.0);
            }
            bc[j] += xc[X1] * xc[X1] / batch as f64;
            bf[j] += xf[X1] * xf[X1] / batch as f64;
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mc, mf) = (mean(&bc), mean(&bf));
    let se = (bc.iter().map(|v| (v - mc).powi(2)).sum::<f64>()
        / ((n_batches - 1) * n_batches) as f64)
        .sqrt();
    assert!((mc - mf).abs() < se, "coarse {mc}, fine {mf}, se {se}");
    assert!(
        (mf - lyap).abs() < 3.0 * se,
        "fine {mf}, lyapunov {lyap}, se {se}"
    );
}
