//! Time-domain Monte Carlo check of the zero-frequency spectra.
//!
//! The linearized dynamics is integrated with Euler–Maruyama under white
//! noise (Brownian force at its zero-frequency level). The output record of
//! each step is `C x dt + D dW`, using the same increments `dW` that drive the
//! state, so the reflected field keeps its correlation with the input.
//! Outputs are cut into non-overlapping rectangular windows of length `τ`;
//! each window gives one sample of the finite-time transform at `ω = 0`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix6, SVector, Vector6};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectra::{inferred_variance_at, NoisePsd, StateSpace};

/// Largest accepted `dt · ρ(A)`.
pub const MAX_STEP_FRACTION: f64 = 0.1;

/// Stream offset separating the phase-quadrature run from the amplitude run.
const PHASE_RUN_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Simulated time per trajectory, burn-in included (s).
    pub duration: f64,
    /// Measurement window (s).
    pub tau: f64,
    pub n_segments: usize,
    pub n_trajectories: usize,
    pub seed: u64,
    /// Discarded transient (s).
    pub burn_in: f64,
}

impl SimConfig {
    /// Defaults scaled to the model: `dt = 0.05/ρ(A)`, `τ = 200/γ_c`,
    /// 64 trajectories of 250 windows each.
    pub fn default_for(model: &StateSpace) -> Self {
        let dt = 0.5 * MAX_STEP_FRACTION / model.spectral_radius();
        let tau = 200.0 / model.gamma_c;
        let burn_in = (5.0 / model.gamma_m).max(10.0 / model.slowest_decay_rate());
        let n_segments = 250;
        Self {
            dt,
            duration: burn_in + n_segments as f64 * tau,
            tau,
            n_segments,
            n_trajectories: 64,
            seed: 0x00C0_FFEE,
            burn_in,
        }
    }

    /// Keeps `dt`, `τ` and the burn-in, but resizes the run.
    pub fn with_counts(mut self, n_segments: usize, n_trajectories: usize) -> Self {
        self.n_segments = n_segments;
        self.n_trajectories = n_trajectories;
        self.duration = self.burn_in + n_segments as f64 * self.tau;
        self
    }

    pub fn validate(&self, model: &StateSpace) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Domain(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.tau >= 100.0 * self.dt) {
            return Err(Error::Domain(format!(
                "tau = {:e} s is shorter than 100 steps",
                self.tau
            )));
        }
        let relax = 5.0 / model.gamma_m;
        if !(self.burn_in >= relax * (1.0 - 1e-12)) {
            return Err(Error::Domain(format!(
                "burn_in = {:e} s is shorter than 5/gamma_m = {relax:e} s",
                self.burn_in
            )));
        }
        if self.n_segments == 0 || self.n_trajectories == 0 {
            return Err(Error::Domain(
                "segments and trajectories must be at least 1".into(),
            ));
        }
        let needed = self.n_segments as f64 * self.tau + self.burn_in;
        if needed > self.duration * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "segments * tau + burn_in = {needed:e} s exceeds duration {:e} s",
                self.duration
            )));
        }
        let frac = self.dt * model.spectral_radius();
        if frac > MAX_STEP_FRACTION {
            return Err(Error::StepSize(frac));
        }
        Ok(())
    }

    fn steps(&self, span: f64) -> usize {
        (span / self.dt).round() as usize
    }
}

/// Monte Carlo estimate of a variance in units of `γ_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub n_samples: usize,
}

impl Estimate {
    /// `(value − mean) / std_err`.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value) / self.std_err
    }
}

/// One Euler–Maruyama step map for a fixed model and step.
#[derive(Debug, Clone)]
pub struct EulerMaruyama {
    propagator: Matrix6<f64>,
    model: StateSpace,
    noise_scale: SVector<f64, 5>,
    dt: f64,
}

impl EulerMaruyama {
    /// `white` holds the symmetrized noise intensities (δ-correlation weights).
    pub fn new(model: &StateSpace, white: &[f64; 5], dt: f64) -> Self {
        Self {
            propagator: Matrix6::identity() + model.drift * dt,
            model: model.clone(),
            noise_scale: SVector::from_iterator(white.iter().map(|q| (q * dt).sqrt())),
            dt,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one step and returns the output integrated over it.
    #[inline]
    pub fn step(&self, state: &mut Vector6<f64>, rng: &mut ChaCha8Rng) -> [f64; 4] {
        let dw = SVector::<f64, 5>::from_fn(|i, _| {
            let z: f64 = StandardNormal.sample(rng);
            z * self.noise_scale[i]
        });
        self.step_with(state, &dw)
    }

    /// Step driven by explicit noise increments.
    #[inline]
    pub fn step_with(&self, state: &mut Vector6<f64>, dw: &SVector<f64, 5>) -> [f64; 4] {
        let out = self.model.output_map * *state * self.dt + self.model.feedthrough * dw;
        *state = self.propagator * *state + self.model.input_map * dw;
        [out[0], out[1], out[2], out[3]]
    }
}

fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Output record of one trajectory after burn-in: step-averaged outputs
/// `(x₁ᵒᵘᵗ, y₁ᵒᵘᵗ, x₂ᵒᵘᵗ, y₂ᵒᵘᵗ)`, one entry per step.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub dt: f64,
    pub samples: Vec<[f64; 4]>,
}

impl OutputRecord {
    /// `X_j(φ) = x_j cos φ + y_j sin φ` along the record, `mode ∈ {1, 2}`.
    pub fn quadrature(&self, mode: usize, phi: f64) -> Vec<f64> {
        let (s, c) = phi.sin_cos();
        let k = 2 * (mode - 1);
        self.samples
            .iter()
            .map(|o| o[k] * c + o[k + 1] * s)
            .collect()
    }
}

/// Integrates every trajectory of `cfg` and returns the post-burn-in records.
/// Records hold `n_segments · τ` worth of steps each; memory grows with it.
pub fn integrate(
    model: &StateSpace,
    noise: &NoisePsd,
    cfg: &SimConfig,
) -> Result<Vec<OutputRecord>> {
    model.check_stability()?;
    cfg.validate(model)?;
    let em = EulerMaruyama::new(model, &noise.white_diagonal(), cfg.dt);
    let burn = cfg.steps(cfg.burn_in);
    let keep = cfg.n_segments * cfg.steps(cfg.tau);
    Ok((0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(cfg.seed, i);
            let mut state = Vector6::zeros();
            for _ in 0..burn {
                em.step(&mut state, &mut rng);
            }
            let samples = (0..keep)
                .map(|_| em.step(&mut state, &mut rng).map(|v| v / cfg.dt))
                .collect();
            OutputRecord {
                dt: cfg.dt,
                samples,
            }
        })
        .collect())
}

/// `(1/√τ) ∫ e^{iωt} X_mode(φ, t) dt` over the first window of length `tau`,
/// with `t` centred on the window. Real at `ω = 0`.
pub fn windowed_transform(
    record: &OutputRecord,
    mode: usize,
    tau: f64,
    omega: f64,
    phi: f64,
) -> Result<Complex64> {
    let n = (tau / record.dt).round() as usize;
    if n == 0 || record.samples.len() < n {
        return Err(Error::Window {
            have: record.samples.len(),
            need: n.max(1),
        });
    }
    let (s, c) = phi.sin_cos();
    let k = 2 * (mode - 1);
    let span = n as f64 * record.dt;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, o) in record.samples[..n].iter().enumerate() {
        let x = o[k] * c + o[k + 1] * s;
        if omega == 0.0 {
            acc.re += x;
        } else {
            let t = (i as f64 + 0.5) * record.dt - 0.5 * span;
            acc += Complex64::from_polar(x, omega * t);
        }
    }
    Ok(acc * record.dt / span.sqrt())
}

/// Zero-frequency window samples of `X₁(φ) − g X₂(φ)` for one trajectory.
fn window_samples(
    em: &EulerMaruyama,
    cfg: &SimConfig,
    stream: u64,
    phi: f64,
    gain: f64,
) -> Vec<f64> {
    let mut rng = trajectory_rng(cfg.seed, stream);
    let mut state = Vector6::zeros();
    for _ in 0..cfg.steps(cfg.burn_in) {
        em.step(&mut state, &mut rng);
    }
    let per_window = cfg.steps(cfg.tau);
    let norm = 1.0 / (per_window as f64 * cfg.dt).sqrt();
    let (s, c) = phi.sin_cos();
    (0..cfg.n_segments)
        .map(|_| {
            let mut acc = [0.0; 4];
            for _ in 0..per_window {
                let o = em.step(&mut state, &mut rng);
                for k in 0..4 {
                    acc[k] += o[k];
                }
            }
            let x1 = acc[0] * c + acc[1] * s;
            let x2 = acc[2] * c + acc[3] * s;
            (x1 - gain * x2) * norm
        })
        .collect()
}

/// Pooled sample variance with a delete-one-block jackknife error.
fn jackknife_variance(blocks: &[Vec<f64>]) -> (f64, f64, usize) {
    let sums: Vec<(f64, f64, f64)> = blocks
        .iter()
        .map(|b| {
            (
                b.len() as f64,
                b.iter().sum::<f64>(),
                b.iter().map(|v| v * v).sum::<f64>(),
            )
        })
        .collect();
    let (n, s1, s2) = sums
        .iter()
        .fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let var = |n: f64, s1: f64, s2: f64| (s2 - s1 * s1 / n) / (n - 1.0);
    let full = var(n, s1, s2);
    let k = sums.len() as f64;
    let loo: Vec<f64> = sums
        .iter()
        .map(|b| var(n - b.0, s1 - b.1, s2 - b.2))
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / k;
    let se = ((k - 1.0) / k * loo.iter().map(|v| (v - mean_loo).powi(2)).sum::<f64>()).sqrt();
    (full, se, n as usize)
}

fn estimate_with_streams(
    model: &StateSpace,
    noise: &NoisePsd,
    cfg: &SimConfig,
    phi: f64,
    gain: f64,
    stream_base: u64,
) -> Result<Estimate> {
    model.check_stability()?;
    cfg.validate(model)?;
    let em = EulerMaruyama::new(model, &noise.white_diagonal(), cfg.dt);
    let per_traj: Vec<Vec<f64>> = (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|i| window_samples(&em, cfg, stream_base + i, phi, gain))
        .collect();
    // A single trajectory is jackknifed over its windows instead.
    let blocks: Vec<Vec<f64>> = if per_traj.len() >= 2 {
        per_traj
    } else {
        per_traj[0].iter().map(|&v| vec![v]).collect()
    };
    if blocks.iter().map(Vec::len).sum::<usize>() < 2 {
        return Err(Error::Domain("need at least two windows in total".into()));
    }
    let (var, se, n) = jackknife_variance(&blocks);
    Ok(Estimate {
        mean: var / model.gamma_c,
        std_err: se / model.gamma_c,
        n_samples: n,
    })
}

/// Monte Carlo estimate of `⟨(X̃₁(φ,0) − g X̃₂(φ,0))²⟩ / γ_c`.
pub fn estimate_inference_variance(
    model: &StateSpace,
    noise: &NoisePsd,
    cfg: &SimConfig,
    phi: f64,
    gain: f64,
) -> Result<Estimate> {
    estimate_with_streams(model, noise, cfg, phi, gain, 0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductEstimate {
    pub amplitude: Estimate,
    pub phase: Estimate,
    pub gain_x: f64,
    pub gain_y: f64,
    pub product: f64,
    /// First-order propagated standard error of `product`.
    pub product_err: f64,
}

impl ProductEstimate {
    /// One-sided confidence that the true product is below 1, in units of
    /// standard errors.
    pub fn sigmas_below_one(&self) -> f64 {
        (1.0 - self.product) / self.product_err
    }
}

/// Estimates both inference variances (analytic optimal gains, independent
/// noise streams) and their product.
pub fn epr_product_estimate(
    model: &StateSpace,
    noise: &NoisePsd,
    cfg: &SimConfig,
) -> Result<ProductEstimate> {
    let (_, gain_x) = inferred_variance_at(model, noise, 0.0, 0.0)?;
    let (_, gain_y) = inferred_variance_at(model, noise, 0.0, FRAC_PI_2)?;
    let amplitude = estimate_with_streams(model, noise, cfg, 0.0, gain_x, 0)?;
    let phase = estimate_with_streams(model, noise, cfg, FRAC_PI_2, gain_y, PHASE_RUN_STREAM)?;
    let product = amplitude.mean * phase.mean;
    let product_err = ((phase.mean * amplitude.std_err).powi(2)
        + (amplitude.mean * phase.std_err).powi(2))
    .sqrt();
    Ok(ProductEstimate {
        amplitude,
        phase,
        gain_x,
        gain_y,
        product,
        product_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DimensionlessParams, PhysicalParams, SteadyState};
    use crate::spectra::{build_state_space, stationary_covariance, X1};
    use approx::assert_relative_eq;

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
    fn noiseless_decay_matches_matrix_exponential() {
        let (m, _) = model_for(0.17, 0.1);
        let dt = 5e-8 / m.gamma_c;
        let em = EulerMaruyama::new(&m, &[0.0; 5], dt);
        let x0 = Vector6::new(0.0, 0.0, 1.0, 0.5, -0.3, 0.2);
        let t = 5.0 / m.gamma_c;
        let n = (t / dt).round() as usize;
        let mut x = x0;
        let zero = SVector::<f64, 5>::zeros();
        for _ in 0..n {
            em.step_with(&mut x, &zero);
        }
        let exact = (m.drift * (n as f64 * dt)).exp() * x0;
        // Mechanical and optical blocks carry different units; compare each
        // block in norm.
        for range in [0..2, 2..6] {
            let err: f64 = range
                .clone()
                .map(|k| (x[k] - exact[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = range.map(|k| exact[k].powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-5 * norm, "relative error {}", err / norm);
        }
    }

    #[test]
    fn identical_seeds_give_identical_records() {
        let (m, noise) = model_for(0.17, 0.1);
        let cfg = SimConfig::default_for(&m).with_counts(2, 2);
        let a = integrate(&m, &noise, &cfg).unwrap();
        let b = integrate(&m, &noise, &cfg).unwrap();
        assert_eq!(a, b);
        let other = SimConfig { seed: 7, ..cfg };
        assert_ne!(a, integrate(&m, &noise, &other).unwrap());
    }

    #[test]
    fn step_guard_and_config_checks() {
        let (m, _) = model_for(0.17, 0.1);
        let base = SimConfig::default_for(&m);
        assert!(base.validate(&m).is_ok());
        let coarse = SimConfig {
            dt: base.dt * 3.0,
            tau: base.tau * 3.0,
            duration: base.duration * 3.0,
            ..base
        };
        assert!(matches!(coarse.validate(&m), Err(Error::StepSize(_))));
        let short = SimConfig {
            duration: base.duration * 0.5,
            ..base
        };
        assert!(short.validate(&m).is_err());
        let no_burn = SimConfig {
            burn_in: 0.0,
            ..base
        };
        assert!(no_burn.validate(&m).is_err());
        let tiny_window = SimConfig {
            tau: base.dt * 10.0,
            ..base
        };
        assert!(tiny_window.validate(&m).is_err());
    }

    #[test]
    fn transform_of_constant_and_sinusoid() {
        let dt = 1e-3;
        let constant = OutputRecord {
            dt,
            samples: vec![[2.5, 0.0, 0.0, 0.0]; 4000],
        };
        let v = windowed_transform(&constant, 1, 4.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(v.re, 2.5 * 2.0, max_relative = 1e-12);
        assert_eq!(v.im, 0.0);

        let w = 2.0 * std::f64::consts::PI * 5.0;
        let tau = 400.0;
        let n = (tau / dt) as usize;
        let samples = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * dt - 0.5 * tau;
                [0.0, 3.0 * (w * t).cos(), 0.0, 0.0]
            })
            .collect();
        let rec = OutputRecord { dt, samples };
        let v = windowed_transform(&rec, 1, tau, w, FRAC_PI_2).unwrap();
        assert_relative_eq!(v.norm(), 3.0 * tau.sqrt() / 2.0, max_relative = 1e-3);

        assert!(matches!(
            windowed_transform(&rec, 1, 2.0 * tau, 0.0, 0.0),
            Err(Error::Window { .. })
        ));
    }

    #[test]
    fn streaming_windows_match_recorded_transform() {
        let (m, noise) = model_for(0.17, 0.1);
        let cfg = SimConfig::default_for(&m).with_counts(3, 1);
        let recs = integrate(&m, &noise, &cfg).unwrap();
        let em = EulerMaruyama::new(&m, &noise.white_diagonal(), cfg.dt);
        let z = window_samples(&em, &cfg, 0, 0.0, 0.0);
        let first = windowed_transform(&recs[0], 1, cfg.tau, 0.0, 0.0).unwrap();
        assert_relative_eq!(first.re, z[0], max_relative = 1e-9);
    }

    #[test]
    fn empty_cavity_stationary_variance_matches_lyapunov() {
        let p = PhysicalParams {
            input_power: 0.0,
            ..PhysicalParams::damped_reference()
        };
        let ss = SteadyState::at_detuning(&p, 0.18).unwrap();
        let m = build_state_space(&p, &ss).unwrap();
        let noise = NoisePsd::from_params(&p);
        let target = stationary_covariance(&m, &noise.white_diagonal()).unwrap()[(X1, X1)];
        let cfg = SimConfig::default_for(&m).with_counts(1, 16);
        let recs = integrate(&m, &noise, &cfg).unwrap();
        let em = EulerMaruyama::new(&m, &noise.white_diagonal(), cfg.dt);
        // Sample the intracavity x₁ every 5/γ_c to keep samples nearly independent.
        let stride = (5.0 / (m.gamma_c * cfg.dt)).round() as usize;
        let blocks: Vec<Vec<f64>> = (0..16u64)
            .map(|i| {
                let mut rng = trajectory_rng(cfg.seed, 100 + i);
                let mut x = Vector6::zeros();
                let mut out = Vec::new();
                for k in 0..recs[0].samples.len() {
                    em.step(&mut x, &mut rng);
                    if k % stride == 0 && k as f64 * cfg.dt > cfg.burn_in {
                        out.push(x[X1]);
                    }
                }
                out
            })
            .collect();
        let (var, se, _) = jackknife_variance(&blocks);
        assert!(
            (var - target).abs() < 3.0 * se,
            "{var} vs {target} (se {se})"
        );
    }

    #[test]
    fn vacuum_output_has_unit_inference_variance() {
        let (m, noise) = model_for(0.0, 0.0);
        let cfg = SimConfig::default_for(&m).with_counts(100, 24);
        let e = estimate_inference_variance(&m, &noise, &cfg, 0.0, 0.0).unwrap();
        assert!(e.z_score(1.0).abs() < 3.0, "{e:?}");
        assert_eq!(e.n_samples, 2400);
    }

    #[test]
    fn single_trajectory_uses_window_jackknife() {
        let (m, noise) = model_for(0.0, 0.0);
        let cfg = SimConfig::default_for(&m).with_counts(20, 1);
        let e = estimate_inference_variance(&m, &noise, &cfg, 0.0, 0.0).unwrap();
        assert!(e.std_err > 0.0);
        assert_eq!(e.n_samples, 20);
    }
}
