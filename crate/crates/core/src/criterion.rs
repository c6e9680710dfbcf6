//! Zero-frequency EPR criterion in closed form.
//!
//! Both inference variances are normalized by `γ_c`, so the Heisenberg
//! bound on their product is exactly 1.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::DimensionlessParams;

/// Relative tolerance on `s11·s22 ≥ s12²` in [`optimal_gain`].
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Default upper end of the power interval searched by [`best_power`].
pub const DEFAULT_P_MAX: f64 = 10.0;

/// Amplitude-quadrature correlation parameter ε(0). Negative exactly when
/// `𝒯 < 1` and `𝒫 > 0`.
pub fn epsilon_zero(dp: &DimensionlessParams) -> f64 {
    let u = dp.delta * dp.delta + dp.p_cal + 0.25;
    0.5 * (dp.t_cal - 1.0) * dp.p_cal / (u * u)
}

/// Phase-quadrature correlation parameter ε(π/2); never negative and
/// divergent as `Δ → 0`.
pub fn epsilon_half_pi(dp: &DimensionlessParams) -> Result<f64> {
    let d2 = dp.delta * dp.delta;
    if !(dp.delta > 0.0) {
        return Err(Error::Domain(format!(
            "epsilon(pi/2) needs delta > 0, got {}",
            dp.delta
        )));
    }
    let u = d2 + dp.p_cal + 0.25;
    Ok((d2 + dp.p_cal + 0.25 * dp.t_cal) / (2.0 * d2) * dp.p_cal / (u * u))
}

/// Minimized inference variance `1 + ε/(1 + ε)` in units of `γ_c`.
pub fn inferred_variance(eps: f64) -> Result<f64> {
    if !(eps > -0.5) {
        return Err(Error::InvalidRegime(format!(
            "epsilon = {eps} <= -1/2 gives a non-positive variance"
        )));
    }
    Ok(1.0 + eps / (1.0 + eps))
}

/// Optimal gain for a given ε: the zero-frequency spectral matrix is
/// `γ_c [[1+ε, ε], [ε, 1+ε]]`, so `g* = ε/(1+ε)`.
pub fn gain_from_epsilon(eps: f64) -> f64 {
    eps / (1.0 + eps)
}

/// Scaling factors used to infer mode 1 from mode 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPair {
    pub g_x: f64,
    pub g_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprResult {
    pub eps0: f64,
    pub eps_half_pi: f64,
    /// Amplitude inference variance / γ_c.
    pub var_x: f64,
    /// Phase inference variance / γ_c.
    pub var_y: f64,
    pub lhs: f64,
    pub paradox: bool,
    pub gains: GainPair,
}

/// Evaluates the product criterion at one point.
pub fn epr_lhs(dp: &DimensionlessParams) -> Result<EprResult> {
    dp.validate()?;
    let eps0 = epsilon_zero(dp);
    let eps_half_pi = epsilon_half_pi(dp)?;
    let var_x = inferred_variance(eps0)?;
    let var_y = inferred_variance(eps_half_pi)?;
    let lhs = var_x * var_y;
    Ok(EprResult {
        eps0,
        eps_half_pi,
        var_x,
        var_y,
        lhs,
        paradox: lhs < 1.0,
        gains: GainPair {
            g_x: gain_from_epsilon(eps0),
            g_y: gain_from_epsilon(eps_half_pi),
        },
    })
}

fn check_spectral_triple(s11: f64, s12: f64, s22: f64) -> Result<()> {
    if !(s22 > 0.0) || !s11.is_finite() || !s12.is_finite() || !s22.is_finite() {
        return Err(Error::Domain(format!(
            "spectral triple needs finite entries and s22 > 0, got ({s11}, {s12}, {s22})"
        )));
    }
    if s11 * s22 - s12 * s12 < -PSD_TOLERANCE * (s11 * s22).abs().max(s12 * s12) {
        return Err(Error::Domain(format!(
            "spectral matrix not positive semidefinite: s11*s22 - s12^2 = {:e}",
            s11 * s22 - s12 * s12
        )));
    }
    Ok(())
}

/// Minimizer of `s11 − 2g·s12 + g²·s22`.
pub fn optimal_gain(s11: f64, s12: f64, s22: f64) -> Result<f64> {
    check_spectral_triple(s11, s12, s22)?;
    Ok(s12 / s22)
}

/// Value of `s11 − 2g·s12 + g²·s22` at its minimum, `s11 − s12²/s22`.
pub fn minimized_variance(s11: f64, s12: f64, s22: f64) -> Result<f64> {
    check_spectral_triple(s11, s12, s22)?;
    Ok(s11 - s12 * s12 / s22)
}

/// Inference error `⟨(X₁ − g X₂)²⟩` for a fixed gain.
pub fn inference_quadratic(s11: f64, s12: f64, s22: f64, g: f64) -> f64 {
    s11 - 2.0 * g * s12 + g * g * s22
}

/// Evenly spaced axis `[min, max]` with `points` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points }
    }

    /// A single point is allowed only for a zero-width range.
    fn values(&self, name: &str) -> Result<Vec<f64>> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::Domain(format!("{name} range must be finite")));
        }
        match self.points {
            0 => Err(Error::Domain(format!(
                "{name} axis needs at least one point"
            ))),
            1 if self.min == self.max => Ok(vec![self.min]),
            1 => Err(Error::Domain(format!(
                "{name} axis with one point needs min == max"
            ))),
            n if self.min < self.max => {
                let step = (self.max - self.min) / (n - 1) as f64;
                Ok((0..n)
                    .map(|i| {
                        if i == n - 1 {
                            self.max
                        } else {
                            self.min + step * i as f64
                        }
                    })
                    .collect())
            }
            _ => Err(Error::Domain(format!(
                "{name} range [{}, {}] must be increasing",
                self.min, self.max
            ))),
        }
    }
}

/// Criterion values on a (𝒫, 𝒯) grid at fixed Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub p_axis: Vec<f64>,
    pub t_axis: Vec<f64>,
    pub delta: f64,
    /// Row-major, `t_axis.len()` rows of `p_axis.len()` entries. Invalid-regime
    /// cells hold NaN.
    pub lhs_values: Vec<f64>,
}

impl ScanGrid {
    pub fn get(&self, t_index: usize, p_index: usize) -> f64 {
        self.lhs_values[t_index * self.p_axis.len() + p_index]
    }

    pub fn row(&self, t_index: usize) -> &[f64] {
        let n = self.p_axis.len();
        &self.lhs_values[t_index * n..(t_index + 1) * n]
    }
}

/// Fills a grid of criterion values. Rows are computed in parallel and
/// assembled in order, so the result does not depend on the thread count.
pub fn scan(p: AxisSpec, t: AxisSpec, delta: f64) -> Result<ScanGrid> {
    let p_axis = p.values("p_cal")?;
    let t_axis = t.values("t_cal")?;
    if p_axis[0] < 0.0 || t_axis[0] < 0.0 {
        return Err(Error::Domain("p_cal and t_cal ranges must be >= 0".into()));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    let rows: Vec<Vec<f64>> = t_axis
        .par_iter()
        .map(|&t_cal| {
            p_axis
                .iter()
                .map(|&p_cal| {
                    let dp = DimensionlessParams {
                        p_cal,
                        t_cal,
                        delta,
                    };
                    match epr_lhs(&dp) {
                        Ok(r) => r.lhs,
                        Err(_) => f64::NAN,
                    }
                })
                .collect()
        })
        .collect();
    Ok(ScanGrid {
        p_axis,
        t_axis,
        delta,
        lhs_values: rows.concat(),
    })
}

/// Points of the `lhs = 1` contour, interpolated linearly along every grid
/// edge whose end points lie on opposite sides of the bound. Row edges come
/// first (row by row), then column edges (column by column).
pub fn paradox_boundary(grid: &ScanGrid) -> Vec<(f64, f64)> {
    let np = grid.p_axis.len();
    let nt = grid.t_axis.len();
    let crossing = |a: f64, b: f64| -> Option<f64> {
        if a.is_nan() || b.is_nan() || (a < 1.0) == (b < 1.0) {
            return None;
        }
        Some((1.0 - a) / (b - a))
    };
    let mut points = Vec::new();
    for i in 0..nt {
        for j in 0..np.saturating_sub(1) {
            if let Some(s) = crossing(grid.get(i, j), grid.get(i, j + 1)) {
                let p = grid.p_axis[j] + s * (grid.p_axis[j + 1] - grid.p_axis[j]);
                points.push((p, grid.t_axis[i]));
            }
        }
    }
    for j in 0..np {
        for i in 0..nt.saturating_sub(1) {
            if let Some(s) = crossing(grid.get(i, j), grid.get(i + 1, j)) {
                let t = grid.t_axis[i] + s * (grid.t_axis[i + 1] - grid.t_axis[i]);
                points.push((grid.p_axis[j], t));
            }
        }
    }
    points
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestPower {
    pub p_cal: f64,
    pub lhs: f64,
}

/// Power minimizing the criterion at fixed temperature and detuning, over
/// `(0, p_max]`. A coarse grid locates the basin; golden-section search then
/// refines it to an absolute tolerance of `1e-6` in `𝒫`.
pub fn best_power(t_cal: f64, delta: f64, p_max: f64) -> Result<BestPower> {
    if !(t_cal.is_finite() && t_cal >= 0.0) {
        return Err(Error::Domain(format!("t_cal must be >= 0, got {t_cal}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    if !(p_max.is_finite() && p_max > 0.0) {
        return Err(Error::Domain(format!("p_max must be > 0, got {p_max}")));
    }
    let lhs = |p_cal: f64| -> f64 {
        epr_lhs(&DimensionlessParams {
            p_cal,
            t_cal,
            delta,
        })
        .map(|r| r.lhs)
        .unwrap_or(f64::INFINITY)
    };

    // The criterion is not unimodal in 𝒫 (at small Δ it first rises, then
    // dips), so the basin is located on a grid that is linear over the whole
    // interval and geometric towards 𝒫 → 0.
    const LINEAR: usize = 2000;
    const GEOMETRIC: usize = 200;
    let step = p_max / LINEAR as f64;
    let mut grid: Vec<f64> = (0..GEOMETRIC)
        .map(|k| step * 1e-9f64.powf(1.0 - k as f64 / GEOMETRIC as f64))
        .chain((1..=LINEAR).map(|i| step * i as f64))
        .collect();
    grid.dedup();
    let values: Vec<f64> = grid.iter().map(|&p| lhs(p)).collect();
    let best_i = (0..grid.len())
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .expect("non-empty grid");
    let best_v = values[best_i];
    let mut a = if best_i == 0 { 0.0 } else { grid[best_i - 1] };
    let mut b = grid[(best_i + 1).min(grid.len() - 1)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (lhs(c), lhs(d));
    while b - a > 1e-6 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = lhs(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = lhs(d);
        }
    }
    let mut p_best = 0.5 * (a + b);
    let mut v_best = lhs(p_best);
    // The grid value can beat the bracket midpoint at an end point.
    if best_v < v_best {
        p_best = grid[best_i];
        v_best = best_v;
    }
    Ok(BestPower {
        p_cal: p_best.max(f64::MIN_POSITIVE),
        lhs: v_best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dp(p: f64, t: f64, d: f64) -> DimensionlessParams {
        DimensionlessParams::new(p, t, d).unwrap()
    }

    #[test]
    fn epsilon_values_at_reference_point() {
        let x = dp(0.17, 0.1, 0.18);
        assert_abs_diff_eq!(epsilon_zero(&x), -0.37378, epsilon = 1e-5);
        assert_abs_diff_eq!(epsilon_half_pi(&x).unwrap(), 2.91487, epsilon = 1e-4);
    }

    #[test]
    fn epsilon_limits() {
        assert_eq!(epsilon_zero(&dp(0.0, 0.3, 0.18)), 0.0);
        assert_eq!(epsilon_zero(&dp(0.4, 1.0, 0.18)), 0.0);
        assert_eq!(epsilon_half_pi(&dp(0.0, 0.3, 0.18)).unwrap(), 0.0);
        let small = epsilon_half_pi(&dp(0.1, 0.0, 0.01)).unwrap();
        let big = epsilon_half_pi(&dp(0.1, 0.0, 0.18)).unwrap();
        assert!(small > big);
        let raw = DimensionlessParams {
            p_cal: 0.1,
            t_cal: 0.0,
            delta: 0.0,
        };
        assert!(matches!(epsilon_half_pi(&raw), Err(Error::Domain(_))));
    }

    #[test]
    fn inferred_variance_values() {
        assert_eq!(inferred_variance(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            inferred_variance(-0.37378).unwrap(),
            0.40312,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(inferred_variance(2.91487).unwrap(), 1.74456, epsilon = 1e-4);
        assert!(matches!(
            inferred_variance(-0.5),
            Err(Error::InvalidRegime(_))
        ));
        assert!(inferred_variance(-0.7).is_err());
    }

    #[test]
    fn criterion_values() {
        let r = epr_lhs(&dp(0.17, 0.1, 0.18)).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.70327, epsilon = 2e-4);
        assert!(r.paradox);
        assert_abs_diff_eq!(r.lhs, r.var_x * r.var_y, epsilon = 1e-15);

        let hot = epr_lhs(&dp(0.17, 1.5, 0.18)).unwrap();
        assert_abs_diff_eq!(hot.lhs, 2.2043, epsilon = 1e-3);
        assert!(!hot.paradox);

        let dark = epr_lhs(&dp(0.0, 0.5, 0.18)).unwrap();
        assert_eq!(dark.lhs, 1.0);
        assert!(!dark.paradox);
    }

    #[test]
    fn gains_minimize_the_closed_form_matrix() {
        let r = epr_lhs(&dp(0.17, 0.1, 0.18)).unwrap();
        let e = r.eps0;
        let g = optimal_gain(1.0 + e, e, 1.0 + e).unwrap();
        assert_abs_diff_eq!(g, r.gains.g_x, epsilon = 1e-15);
        assert_abs_diff_eq!(
            minimized_variance(1.0 + e, e, 1.0 + e).unwrap(),
            r.var_x,
            epsilon = 1e-15
        );
    }

    #[test]
    fn optimal_gain_cases() {
        assert_eq!(optimal_gain(2.0, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(optimal_gain(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(minimized_variance(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(optimal_gain(1.0, 0.0, 0.0).is_err());
        assert!(optimal_gain(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn axis_rules() {
        assert_eq!(
            AxisSpec::new(0.17, 0.17, 1).values("p").unwrap(),
            vec![0.17]
        );
        assert!(AxisSpec::new(0.0, 1.0, 1).values("p").is_err());
        assert!(AxisSpec::new(1.0, 0.0, 5).values("p").is_err());
        let v = AxisSpec::new(0.0, 1.0, 11).values("p").unwrap();
        assert_eq!(v[10], 1.0);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn scan_structure() {
        let g = scan(
            AxisSpec::new(0.0, 1.0, 101),
            AxisSpec::new(0.0, 1.0, 101),
            0.18,
        )
        .unwrap();
        assert_eq!(g.lhs_values.len(), 101 * 101);
        // p = 0.17 and t = 0.1 are grid points.
        assert_abs_diff_eq!(g.get(10, 17), 0.70326, epsilon = 1e-3);
        assert!(g.row(100).iter().all(|&v| v >= 1.0));
        assert!((0..101).all(|i| g.get(i, 0) == 1.0));
        assert!(g.lhs_values.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn boundary_empty_when_hot() {
        let g = scan(
            AxisSpec::new(0.0, 1.0, 50),
            AxisSpec::new(1.0, 2.0, 20),
            0.18,
        )
        .unwrap();
        assert!(paradox_boundary(&g).is_empty());
    }

    #[test]
    fn boundary_points_lie_on_the_bound() {
        let g = scan(
            AxisSpec::new(0.0, 1.0, 100),
            AxisSpec::new(0.0, 0.9, 100),
            0.18,
        )
        .unwrap();
        let pts = paradox_boundary(&g);
        assert!(!pts.is_empty());
        for &(p, t) in &pts {
            let v = epr_lhs(&dp(p, t, 0.18)).unwrap().lhs;
            assert!((v - 1.0).abs() < 0.01, "({p}, {t}) -> {v}");
        }
    }

    #[test]
    fn boundary_converges_under_refinement() {
        let coarse = scan(
            AxisSpec::new(0.0, 1.0, 50),
            AxisSpec::new(0.0, 0.9, 50),
            0.18,
        )
        .unwrap();
        let fine = scan(
            AxisSpec::new(0.0, 1.0, 99),
            AxisSpec::new(0.0, 0.9, 99),
            0.18,
        )
        .unwrap();
        let cell = (1.0f64 / 49.0).max(0.9 / 49.0);
        let fine_pts = paradox_boundary(&fine);
        for &(p, t) in &paradox_boundary(&coarse) {
            let nearest = fine_pts
                .iter()
                .map(|&(q, s)| ((p - q).powi(2) + (t - s).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < cell, "({p}, {t}) moved by {nearest}");
        }
    }

    #[test]
    fn best_power_beats_reference_point() {
        let b = best_power(0.1, 0.18, DEFAULT_P_MAX).unwrap();
        assert!(b.lhs < 0.70327);
        let hot = best_power(1.0, 0.18, DEFAULT_P_MAX).unwrap();
        assert!(hot.lhs >= 1.0);
    }

    #[test]
    fn best_power_matches_brute_force() {
        for &(t, d) in &[(0.1, 0.18), (0.0, 0.5), (0.6, 0.05), (0.9, 0.3)] {
            let b = best_power(t, d, DEFAULT_P_MAX).unwrap();
            let brute = (1..=10_000)
                .map(|i| {
                    let p = DEFAULT_P_MAX * i as f64 / 10_000.0;
                    epr_lhs(&dp(p, t, d)).unwrap().lhs
                })
                .fold(f64::INFINITY, f64::min);
            assert!(b.lhs <= brute + 1e-6, "t={t} d={d}: {} vs {brute}", b.lhs);
        }
    }
}
