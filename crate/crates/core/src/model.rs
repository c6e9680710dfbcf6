//! Parameter sets, the radiation-pressure steady state and the coupling
//! constants of the linearized dynamics.
//!
//! All frequencies are angular (rad/s) and all rates are in 1/s. The
//! steady state can be obtained in two ways:
//!
//! - [`steady_state`] solves the self-consistency between mirror
//!   displacement and detuning, which reduces to the real cubic
//!   `(Δ − δ₀)(1/4 + Δ²) = κ` with `δ₀ = (ω₀ − ω_c)/γ_c`;
//! - [`SteadyState::at_detuning`] takes the effective detuning `Δ` as a
//!   free knob and reconstructs the amplitudes from it.

use num_complex::Complex64;

use crate::constants::{C_LIGHT, HBAR, K_B};
use crate::error::{Error, Result};

/// Largest accepted ratio `ω_m / ω_c`.
pub const MAX_FREQUENCY_RATIO: f64 = 1e-3;

/// Relative residual accepted for a polished steady-state root.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Laboratory-frame parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Mirror mass (kg).
    pub mass: f64,
    /// Equilibrium cavity length (m).
    pub cavity_length: f64,
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    /// Mechanical damping rate (1/s).
    pub gamma_m: f64,
    /// Cavity resonance (rad/s).
    pub omega_c: f64,
    /// Drive frequency (rad/s).
    pub omega_0: f64,
    /// Cavity decay rate (1/s).
    pub gamma_c: f64,
    /// Bath temperature (K).
    pub temperature: f64,
    /// Total input power, split equally between the two modes (W).
    pub input_power: f64,
}

impl PhysicalParams {
    /// Laboratory values of a pendular Fabry–Perot set-up.
    ///
    /// This point is dynamically unstable once the cavity is driven on the
    /// blue side (`Δ > 0`); see [`PhysicalParams::damped_reference`].
    pub fn pendular_lab() -> Self {
        Self {
            mass: 3e-5,
            cavity_length: 1e-3,
            omega_m: 2e6,
            gamma_m: 1.0,
            omega_c: 2e15,
            omega_0: 2e15,
            gamma_c: 2e6,
            temperature: 4.0,
            input_power: 0.03,
        }
    }

    /// Same optics as [`PhysicalParams::pendular_lab`] but with a strongly damped
    /// mirror (`ω_m = 2γ_c`, `γ_m = γ_c/2`). Used as the template for
    /// dynamically stable realizations of a reduced parameter triple.
    pub fn damped_reference() -> Self {
        let lab = Self::pendular_lab();
        Self {
            omega_m: 2.0 * lab.gamma_c,
            gamma_m: 0.5 * lab.gamma_c,
            ..lab
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("cavity_length", self.cavity_length),
            ("omega_m", self.omega_m),
            ("gamma_m", self.gamma_m),
            ("omega_c", self.omega_c),
            ("omega_0", self.omega_0),
            ("gamma_c", self.gamma_c),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("temperature", self.temperature),
            ("input_power", self.input_power),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and >= 0, got {value}"
                )));
            }
        }
        let ratio = self.omega_m / self.omega_c;
        if ratio >= MAX_FREQUENCY_RATIO {
            return Err(Error::InvalidParams(format!(
                "omega_m/omega_c = {ratio:e} is not below {MAX_FREQUENCY_RATIO:e}"
            )));
        }
        Ok(())
    }

    /// Bare detuning `δ₀ = (ω₀ − ω_c)/γ_c`, before the mirror shift.
    pub fn bare_detuning(&self) -> f64 {
        (self.omega_0 - self.omega_c) / self.gamma_c
    }

    /// Input photon flux per mode, `|α_in|² = P_in / (2ħω₀)`.
    pub fn input_photon_flux(&self) -> f64 {
        self.input_power / (2.0 * HBAR * self.omega_0)
    }

    /// Cubic coefficient `κ = 2ħω_c²|α_in|² / (m ω_m² L² γ_c²)`.
    pub fn kappa(&self) -> f64 {
        2.0 * HBAR * self.omega_c.powi(2) * self.input_photon_flux()
            / (self.mass * self.omega_m.powi(2) * self.cavity_length.powi(2) * self.gamma_c.powi(2))
    }

    /// Sets input power and temperature on `template` so that the reduced
    /// parameters at `dp.delta` equal `dp`. All other fields are kept.
    pub fn realize(dp: &DimensionlessParams, template: &PhysicalParams) -> Result<PhysicalParams> {
        dp.validate()?;
        template.validate()?;
        let t = template;
        let d = dp.delta;
        let input_power = dp.p_cal
            * t.mass
            * t.cavity_length.powi(2)
            * t.omega_m.powi(2)
            * t.gamma_c.powi(2)
            * (1.0 + 4.0 * d * d)
            / (8.0 * t.omega_0 * d);
        let temperature = dp.t_cal * HBAR * t.omega_m.powi(2) / (8.0 * K_B * t.gamma_m * d);
        let out = PhysicalParams {
            input_power,
            temperature,
            ..*t
        };
        out.validate()?;
        Ok(out)
    }
}

/// Reduced power, temperature and detuning; together they fix the
/// zero-frequency criterion completely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessParams {
    pub p_cal: f64,
    pub t_cal: f64,
    pub delta: f64,
}

impl DimensionlessParams {
    pub fn new(p_cal: f64, t_cal: f64, delta: f64) -> Result<Self> {
        let dp = Self {
            p_cal,
            t_cal,
            delta,
        };
        dp.validate()?;
        Ok(dp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_cal.is_finite() && self.p_cal >= 0.0) {
            return Err(Error::Domain(format!(
                "p_cal must be >= 0, got {}",
                self.p_cal
            )));
        }
        if !(self.t_cal.is_finite() && self.t_cal >= 0.0) {
            return Err(Error::Domain(format!(
                "t_cal must be >= 0, got {}",
                self.t_cal
            )));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Domain(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Reduced power and temperature of a laboratory parameter set at the
/// effective detuning `delta`.
pub fn to_dimensionless(params: &PhysicalParams, delta: f64) -> Result<DimensionlessParams> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    let p = params;
    let p_cal = 8.0 * p.omega_0 * delta * p.input_power
        / (p.mass
            * p.cavity_length.powi(2)
            * p.omega_m.powi(2)
            * p.gamma_c.powi(2)
            * (1.0 + 4.0 * delta * delta));
    let t_cal = 8.0 * K_B * p.temperature * p.gamma_m * delta / (HBAR * p.omega_m.powi(2));
    DimensionlessParams::new(p_cal, t_cal, delta)
}

/// `𝒫 = 2κΔ/(1/4 + Δ²)`, exact when `ω₀ = ω_c`.
pub fn p_cal_from_kappa(kappa: f64, delta: f64) -> f64 {
    2.0 * kappa * delta / (0.25 + delta * delta)
}

/// Mean-field solution around which the dynamics is linearized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Mean mirror displacement (m).
    pub x: f64,
    /// Mean mirror momentum, identically zero.
    pub y: f64,
    /// Intracavity amplitude, common to both modes.
    pub alpha: Complex64,
    /// Classical input amplitude per mode, real and non-negative.
    pub alpha_in: Complex64,
    /// Effective detuning in units of `γ_c`.
    pub delta: f64,
    /// False on the middle branch of a bistable solution.
    pub stable: bool,
    /// Relative residual of the detuning cubic (zero in direct mode).
    pub residual: f64,
}

impl SteadyState {
    /// Builds the steady state for a prescribed effective detuning, without
    /// enforcing the displacement/detuning self-consistency.
    pub fn at_detuning(params: &PhysicalParams, delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be finite, got {delta}")));
        }
        Ok(Self::reconstruct(params, delta, true, 0.0))
    }

    fn reconstruct(params: &PhysicalParams, delta: f64, stable: bool, residual: f64) -> Self {
        let p = params;
        let alpha_in = Complex64::new(p.input_photon_flux().sqrt(), 0.0);
        let alpha = alpha_in * p.gamma_c.sqrt() / (Complex64::new(0.5, -delta) * p.gamma_c);
        let x = 2.0 * HBAR * p.omega_c * alpha.norm_sqr()
            / (p.mass * p.omega_m.powi(2) * p.cavity_length);
        Self {
            x,
            y: 0.0,
            alpha,
            alpha_in,
            delta,
            stable,
            residual,
        }
    }

    /// Mean intracavity photon number per mode.
    pub fn photon_number(&self) -> f64 {
        self.alpha.norm_sqr()
    }
}

/// A root of the detuning cubic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoot {
    pub delta: f64,
    /// Slope of `(Δ − δ₀)(1/4 + Δ²) − κ` at the root; negative on the
    /// unstable middle branch.
    pub slope: f64,
    pub residual: f64,
}

#[cfg(test)]
fn cubic(delta: f64, delta0: f64, kappa: f64) -> f64 {
    (delta - delta0) * (0.25 + delta * delta) - kappa
}

fn cubic_slope(delta: f64, delta0: f64) -> f64 {
    3.0 * delta * delta - 2.0 * delta0 * delta + 0.25
}

/// The cubic in the shift `u = Δ − δ₀`, which stays resolved when the
/// radiation-pressure shift is far below `δ₀`.
fn shifted_cubic(u: f64, delta0: f64, kappa: f64) -> f64 {
    let d = u + delta0;
    u * (0.25 + d * d) - kappa
}

/// `|f|` at the shift `u = Δ − δ₀`, relative to the magnitude of the terms
/// that cancel in it.
pub fn cubic_residual(shift: f64, delta0: f64, kappa: f64) -> f64 {
    let d = shift + delta0;
    let scale = shift.abs() * (0.25 + d * d) + kappa.abs();
    let r = shifted_cubic(shift, delta0, kappa).abs();
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

/// Real roots of `(Δ − δ₀)(1/4 + Δ²) = κ`, ascending.
///
/// Brackets each monotone piece between the critical points, bisects to
/// machine precision and finishes with guarded Newton steps.
pub fn solve_detuning_cubic(delta0: f64, kappa: f64) -> Result<Vec<CubicRoot>> {
    if !(delta0.is_finite() && kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::Domain(format!(
            "cubic needs finite delta0 and kappa >= 0, got delta0={delta0}, kappa={kappa}"
        )));
    }
    if kappa == 0.0 {
        return Ok(vec![CubicRoot {
            delta: delta0,
            slope: cubic_slope(delta0, delta0),
            residual: 0.0,
        }]);
    }

    // Bracketing and polishing run in the shift u = Δ − δ₀.
    let f = |u: f64| shifted_cubic(u, delta0, kappa);

    // Cauchy bound on the roots of the monic cubic Δ³ − δ₀Δ² + Δ/4 − (δ₀/4 + κ).
    let bound = 1.0 + delta0.abs().max(0.25).max((0.25 * delta0 + kappa).abs());
    let (lo, hi) = (-bound - delta0, bound - delta0);

    let mut knots = vec![lo];
    let disc = 4.0 * delta0 * delta0 - 3.0;
    if disc > 0.0 {
        let s = disc.sqrt();
        for c in [(2.0 * delta0 - s) / 6.0, (2.0 * delta0 + s) / 6.0] {
            let u = c - delta0;
            if cubic_residual(u, delta0, kappa) <= ROOT_TOLERANCE {
                return Err(Error::Numerical(format!(
                    "degenerate double root of the detuning cubic near delta = {c}"
                )));
            }
            knots.push(u);
        }
    }
    knots.push(hi);

    let mut roots = Vec::with_capacity(3);
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa.signum() == fb.signum() {
            continue;
        }
        let u = polish(&f, delta0, a, b, fa < 0.0);
        let residual = cubic_residual(u, delta0, kappa);
        if residual >= ROOT_TOLERANCE {
            return Err(Error::Numerical(format!(
                "root near delta = {} only reached residual {residual:e}",
                u + delta0
            )));
        }
        roots.push(CubicRoot {
            delta: u + delta0,
            slope: cubic_slope(u + delta0, delta0),
            residual,
        });
    }

    if roots.len() != 1 && roots.len() != 3 {
        return Err(Error::Numerical(format!(
            "detuning cubic produced {} roots",
            roots.len()
        )));
    }
    Ok(roots)
}

fn polish(f: &impl Fn(f64) -> f64, delta0: f64, mut a: f64, mut b: f64, increasing: bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == increasing {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut root = 0.5 * (a + b);
    for _ in 0..3 {
        let slope = cubic_slope(root + delta0, delta0);
        if slope == 0.0 {
            break;
        }
        let next = root - f(root) / slope;
        if !(next >= a && next <= b) || f(next).abs() >= f(root).abs() {
            break;
        }
        root = next;
    }
    root
}

/// Self-consistent steady states, one per real root of the detuning cubic,
/// sorted by ascending detuning.
pub fn steady_state(params: &PhysicalParams) -> Result<Vec<SteadyState>> {
    params.validate()?;
    let roots = solve_detuning_cubic(params.bare_detuning(), params.kappa())?;
    Ok(roots
        .into_iter()
        .map(|r| SteadyState::reconstruct(params, r.delta, r.slope > 0.0, r.residual))
        .collect())
}

/// Coefficients of the linearized equations of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    /// `ħω_c|α|/L`, force per unit amplitude quadrature (N).
    pub g_force: f64,
    /// `2ω_c|α|/L`, displacement-to-phase-quadrature rate (rad/(s·m)).
    pub g_phase: f64,
    /// Cubic coefficient `κ`.
    pub kappa: f64,
}

pub fn couplings(params: &PhysicalParams, ss: &SteadyState) -> Couplings {
    let p = params;
    let amp = ss.alpha.norm();
    Couplings {
        g_force: HBAR * p.omega_c * amp / p.cavity_length,
        g_phase: 2.0 * p.omega_c * amp / p.cavity_length,
        kappa: 2.0 * HBAR * p.omega_c.powi(2) * ss.alpha_in.norm_sqr()
            / (p.mass * p.omega_m.powi(2) * p.cavity_length.powi(2) * p.gamma_c.powi(2)),
    }
}

/// True when two measurements a `distance` apart, each lasting `tau`, are
/// space-like separated (`cτ/d < 1`).
pub fn locality_check(tau: f64, distance: f64) -> bool {
    C_LIGHT * tau / distance < 1.0
}
