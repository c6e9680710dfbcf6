//! Frequency-domain solution of the linearized Langevin equations.
//!
//! State vector `(q, p, x₁, y₁, x₂, y₂)` with `x_j = a_j + a_j†` and
//! `y_j = −i(a_j − a_j†)`; noise vector `(ξ, x₁ⁱⁿ, y₁ⁱⁿ, x₂ⁱⁿ, y₂ⁱⁿ)`;
//! outputs `(x₁ᵒᵘᵗ, y₁ᵒᵘᵗ, x₂ᵒᵘᵗ, y₂ᵒᵘᵗ)` with `aᵒᵘᵗ = γ_c a − aⁱⁿ`.
//!
//! Input fields are normalized so that `⟨aⁱⁿ(t) aⁱⁿ†(t′)⟩ = γ_c δ(t − t′)`.
//! With that choice an empty cavity reflects vacuum with a flat symmetrized
//! quadrature spectrum equal to `γ_c`, and every reported variance is divided
//! by `γ_c`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Matrix6, SMatrix, Vector6};
use num_complex::Complex64;

use crate::constants::{HBAR, K_B};
use crate::criterion;
use crate::error::{Error, Result};
use crate::model::{couplings, PhysicalParams, SteadyState};

pub const Q: usize = 0;
pub const P: usize = 1;
pub const X1: usize = 2;
pub const Y1: usize = 3;
pub const X2: usize = 4;
pub const Y2: usize = 5;

/// Index of the Brownian force in the noise vector.
pub const XI: usize = 0;

pub type InputMap = SMatrix<f64, 6, 5>;
pub type OutputMap = SMatrix<f64, 4, 6>;
pub type Feedthrough = SMatrix<f64, 4, 5>;
pub type Response = SMatrix<Complex64, 4, 5>;

/// Relative tolerance used when testing positive semidefiniteness.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub drift: Matrix6<f64>,
    pub input_map: InputMap,
    pub output_map: OutputMap,
    pub feedthrough: Feedthrough,
    pub gamma_c: f64,
    pub mass: f64,
    pub gamma_m: f64,
}

/// Builds the linearized model around `ss` and checks that it is stable.
pub fn build_state_space(params: &PhysicalParams, ss: &SteadyState) -> Result<StateSpace> {
    for (name, v) in [
        ("mass", params.mass),
        ("gamma_c", params.gamma_c),
        ("cavity_length", params.cavity_length),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
        }
    }
    let c = couplings(params, ss);
    let m = params.mass;
    let gc = params.gamma_c;
    let d = ss.delta;

    let mut drift = Matrix6::zeros();
    drift[(Q, P)] = 1.0 / m;
    drift[(P, Q)] = -m * params.omega_m * params.omega_m;
    drift[(P, P)] = -2.0 * params.gamma_m;
    drift[(P, X1)] = c.g_force;
    drift[(P, X2)] = c.g_force;
    for (x, y) in [(X1, Y1), (X2, Y2)] {
        drift[(x, x)] = -0.5 * gc;
        drift[(x, y)] = -d * gc;
        drift[(y, x)] = d * gc;
        drift[(y, y)] = -0.5 * gc;
        drift[(y, Q)] = c.g_phase;
    }

    let mut input_map = InputMap::zeros();
    input_map[(P, XI)] = -1.0;
    let mut output_map = OutputMap::zeros();
    let mut feedthrough = Feedthrough::zeros();
    for k in 0..4 {
        input_map[(X1 + k, 1 + k)] = 1.0;
        output_map[(k, X1 + k)] = gc;
        feedthrough[(k, 1 + k)] = -1.0;
    }

    let model = StateSpace {
        drift,
        input_map,
        output_map,
        feedthrough,
        gamma_c: gc,
        mass: m,
        gamma_m: params.gamma_m,
    };
    model.check_stability()?;
    Ok(model)
}

impl StateSpace {
    /// Diagonal similarity `S` and `S⁻¹AS` with the mechanical entries
    /// brought to the optical scale. In SI units the drift spans some thirty
    /// orders of magnitude, which the eigensolver cannot resolve.
    fn balanced(&self) -> (Vector6<f64>, Matrix6<f64>) {
        let a = &self.drift;
        let ratio = (a[(P, Q)].abs() / a[(Q, P)].abs()).sqrt();
        let ratio = if ratio.is_finite() && ratio > 0.0 {
            ratio
        } else {
            1.0
        };
        let (gf, gp) = (a[(P, X1)].abs(), a[(Y1, Q)].abs());
        let s_q = if gf > 0.0 && gp > 0.0 {
            (gf / (gp * ratio)).sqrt()
        } else {
            1.0 / ratio.sqrt()
        };
        let s = Vector6::new(s_q, s_q * ratio, 1.0, 1.0, 1.0, 1.0);
        let balanced = Matrix6::from_fn(|i, j| a[(i, j)] * s[j] / s[i]);
        (s, balanced)
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.balanced()
            .1
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest decay rate among the modes, `min |Re λ|`.
    pub fn slowest_decay_rate(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|z| -z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Rejects eigenvalues with real part above `−1e-12·ρ(A)`; marginal
    /// modes are not resolved reliably at machine precision.
    pub fn check_stability(&self) -> Result<()> {
        let eig = self.eigenvalues();
        let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = eig
            .iter()
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .expect("6 eigenvalues");
        if worst.re >= -1e-12 * radius {
            return Err(Error::Unstable {
                re: worst.re,
                im: worst.im,
            });
        }
        Ok(())
    }

    /// `(−iωI − A)⁻¹ B`, solved by partial-pivoted LU on the balanced drift.
    pub fn transfer(&self, omega: f64) -> Result<SMatrix<Complex64, 6, 5>> {
        let (s, bal) = self.balanced();
        let lhs: Matrix6<Complex64> = Matrix6::from_fn(|i, j| {
            let a = Complex64::new(-bal[(i, j)], 0.0);
            if i == j {
                a + Complex64::new(0.0, -omega)
            } else {
                a
            }
        });
        let rhs = SMatrix::<Complex64, 6, 5>::from_fn(|i, j| {
            Complex64::new(self.input_map[(i, j)] / s[i], 0.0)
        });
        let h = lhs.lu().solve(&rhs).ok_or(Error::Singular { omega })?;
        Ok(SMatrix::from_fn(|i, j| h[(i, j)] * s[i]))
    }

    /// Output response `R(ω) = C (−iωI − A)⁻¹ B + D`.
    pub fn response(&self, omega: f64) -> Result<Response> {
        let h = self.transfer(omega)?;
        let c = self.output_map.map(|v| Complex64::new(v, 0.0));
        Ok(c * h + self.feedthrough.map(|v| Complex64::new(v, 0.0)))
    }
}

/// Symmetrized spectral densities of the noise inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePsd {
    /// Flat level of every input-field quadrature, `γ_c`.
    pub vacuum_level: f64,
    pub mass: f64,
    pub gamma_m: f64,
    pub temperature: f64,
}

impl NoisePsd {
    pub fn from_params(params: &PhysicalParams) -> Self {
        Self {
            vacuum_level: params.gamma_c,
            mass: params.mass,
            gamma_m: params.gamma_m,
            temperature: params.temperature,
        }
    }

    /// Symmetrized Brownian force spectrum `2mγ_m ħω coth(ħω/2k_BT)`.
    pub fn brownian(&self, omega: f64) -> f64 {
        let w = omega.abs();
        let pref = 2.0 * self.mass * self.gamma_m;
        if self.temperature == 0.0 {
            return pref * HBAR * w;
        }
        if w == 0.0 {
            return self.white_brownian();
        }
        let arg = HBAR * w / (2.0 * K_B * self.temperature);
        pref * HBAR * w / arg.tanh()
    }

    /// Zero-frequency Brownian level `4mγ_m k_B T`.
    pub fn white_brownian(&self) -> f64 {
        4.0 * self.mass * self.gamma_m * K_B * self.temperature
    }

    /// Diagonal of the noise spectral matrix at `omega`.
    pub fn diagonal(&self, omega: f64) -> [f64; 5] {
        let v = self.vacuum_level;
        [self.brownian(omega), v, v, v, v]
    }

    /// Diagonal used by the time-domain integrator (Brownian force at its
    /// zero-frequency level).
    pub fn white_diagonal(&self) -> [f64; 5] {
        let v = self.vacuum_level;
        [self.white_brownian(), v, v, v, v]
    }
}

/// Brownian force spectrum of the mirror bath; see [`NoisePsd::brownian`].
pub fn brownian_psd(omega: f64, params: &PhysicalParams) -> f64 {
    NoisePsd::from_params(params).brownian(omega)
}

/// 2×2 spectral matrix of mode 1 at phase `phi1` and mode 2 at `phi2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMatrix {
    pub omega: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub s: Matrix2<f64>,
}

impl SpectralMatrix {
    pub fn s11(&self) -> f64 {
        self.s[(0, 0)]
    }
    pub fn s12(&self) -> f64 {
        self.s[(0, 1)]
    }
    pub fn s22(&self) -> f64 {
        self.s[(1, 1)]
    }
}

fn weighted_product(r: &Response, diag: &[f64; 5]) -> Matrix4<Complex64> {
    let mut rn = *r;
    for (j, &w) in diag.iter().enumerate() {
        rn.column_mut(j).scale_mut(w);
    }
    rn * r.adjoint()
}

/// Symmetrized spectrum of all four output quadratures at `omega`.
pub fn output_spectrum(model: &StateSpace, noise: &NoisePsd, omega: f64) -> Result<Matrix4<f64>> {
    let r = model.response(omega)?;
    Ok(weighted_product(&r, &noise.diagonal(omega)).map(|z| z.re))
}

/// Symmetrized spectrum of the six internal states at `omega`.
pub fn state_spectrum(model: &StateSpace, diag: &[f64; 5], omega: f64) -> Result<Matrix6<f64>> {
    let mut h = model.transfer(omega)?;
    let hc = h.adjoint();
    for (j, &w) in diag.iter().enumerate() {
        h.column_mut(j).scale_mut(w);
    }
    Ok((h * hc).map(|z| z.re))
}

fn quadrature_projector(phi1: f64, phi2: f64) -> SMatrix<f64, 2, 4> {
    let (s1, c1) = phi1.sin_cos();
    let (s2, c2) = phi2.sin_cos();
    SMatrix::<f64, 2, 4>::new(c1, s1, 0.0, 0.0, 0.0, 0.0, c2, s2)
}

/// Spectral matrix of `X₁(φ₁)` and `X₂(φ₂)`, with `X(φ) = x cos φ + y sin φ`.
pub fn output_spectral_matrix_phases(
    model: &StateSpace,
    noise: &NoisePsd,
    omega: f64,
    phi1: f64,
    phi2: f64,
) -> Result<SpectralMatrix> {
    let full = output_spectrum(model, noise, omega)?;
    let proj = quadrature_projector(phi1, phi2);
    let s = proj * full * proj.transpose();
    let trace = s.trace().abs();
    let tol = PSD_TOLERANCE * trace;
    if s[(0, 0)] < -tol || s[(1, 1)] < -tol || s.determinant() < -tol * trace {
        return Err(Error::Numerical(format!(
            "output spectral matrix not positive semidefinite at omega = {omega:e}"
        )));
    }
    Ok(SpectralMatrix {
        omega,
        phi1,
        phi2,
        s,
    })
}

/// Spectral matrix `S_jk(ω, φ, φ)` of the two output modes.
pub fn output_spectral_matrix(
    model: &StateSpace,
    noise: &NoisePsd,
    omega: f64,
    phi: f64,
) -> Result<SpectralMatrix> {
    output_spectral_matrix_phases(model, noise, omega, phi, phi)
}

/// Minimized inference variance of mode 1 from mode 2 at sideband `omega`,
/// in units of `γ_c`, together with the optimal gain.
pub fn inferred_variance_at(
    model: &StateSpace,
    noise: &NoisePsd,
    omega: f64,
    phi: f64,
) -> Result<(f64, f64)> {
    let s = output_spectral_matrix(model, noise, omega, phi)?;
    let gain = criterion::optimal_gain(s.s11(), s.s12(), s.s22())?;
    let var = criterion::minimized_variance(s.s11(), s.s12(), s.s22())?;
    Ok((var / model.gamma_c, gain))
}

/// Commutator spectrum of the four output quadratures at `omega`.
///
/// Input fields satisfy `[xⁱⁿ(t), yⁱⁿ(t′)] = 2iγ_c δ(t − t′)`; the bath
/// contributes `4mγ_m ħω`, which vanishes at zero frequency.
pub fn output_commutator(model: &StateSpace, omega: f64) -> Result<Matrix4<Complex64>> {
    let r = model.response(omega)?;
    let mut k = SMatrix::<Complex64, 5, 5>::zeros();
    k[(XI, XI)] = Complex64::new(4.0 * model.mass * model.gamma_m * HBAR * omega, 0.0);
    for j in [1, 3] {
        k[(j, j + 1)] = Complex64::new(0.0, 2.0 * model.gamma_c);
        k[(j + 1, j)] = Complex64::new(0.0, -2.0 * model.gamma_c);
    }
    Ok(r * k * r.adjoint())
}

/// Magnitude of `[X̃₁(0, 0), X̃₁(π/2, 0)]` in units of `γ_c`; equals 2 for a
/// canonical output field.
pub fn commutator_norm_check(model: &StateSpace) -> Result<f64> {
    let c = output_commutator(model, 0.0)?;
    Ok(c[(0, 1)].norm() / model.gamma_c)
}

/// Stationary state covariance for white noise of the given intensities,
/// from `AΣ + ΣAᵀ + B N Bᵀ = 0` solved as a dense Kronecker system.
pub fn stationary_covariance(model: &StateSpace, white: &[f64; 5]) -> Result<Matrix6<f64>> {
    // Solved in balanced coordinates, Σ = S Σ' S.
    let (s, a) = model.balanced();
    let b = InputMap::from_fn(|i, j| model.input_map[(i, j)] / s[i]);
    let mut bnbt = Matrix6::zeros();
    for (j, &w) in white.iter().enumerate() {
        let col = b.column(j);
        bnbt += col * col.transpose() * w;
    }
    let n = 6;
    let mut kron = DMatrix::<f64>::zeros(n * n, n * n);
    // vec(AΣ + ΣAᵀ) = (I ⊗ A + A ⊗ I) vec(Σ), column-major vec.
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                kron[(i + j * n, k + j * n)] += a[(i, k)];
                kron[(i + j * n, i + k * n)] += a[(j, k)];
            }
        }
    }
    let rhs = DVector::from_iterator(n * n, bnbt.iter().map(|v| -v));
    let sol = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov system".into()))?;
    let sigma = Matrix6::from_iterator(sol.iter().copied());
    let sigma = Matrix6::from_fn(|i, j| sigma[(i, j)] * s[i] * s[j]);
    Ok((sigma + sigma.transpose()) * 0.5)
}
