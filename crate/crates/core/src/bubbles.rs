//! Concentration bubbles, the cutoff test function, and asymptotic sweeps
//! of the associated norms and defects.
//!
//! The bubble `U_eps(r) = [N(N-2) eps^2]^{(N-2)/4} / (eps^2 + r^2)^{(N-2)/2}`
//! is the extremal of the Sobolev inequality on `R^N`; both
//! `int |grad U_eps|^2` and `int U_eps^{2*}` equal `S^{N/2}` for every `eps`,
//! where `S` is the best Sobolev constant. The cutoff `psi_eps = xi U_eps`
//! localizes it to `B_{2 rho}`.

use crate::error::{Error, Result};
use crate::model::{sq_log_term, RadialFn};
use crate::quadrature::{
    integrate_graded, integrate_interval, integrate_tail, RadialGrid,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Bubble and cutoff geometry: concentration scale, cutoff inner radius,
/// dimension. Requires `2 rho <= R` of the ambient ball so the cutoff is
/// compactly supported.
#[derive(Debug, Clone, Copy)]
pub struct BubbleSpec {
    pub eps: f64,
    pub rho: f64,
    pub dim: usize,
}

impl BubbleSpec {
    pub fn new(eps: f64, rho: f64, dim: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bubble scale must be positive, got {eps}"
            )));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff radius must be positive, got {rho}"
            )));
        }
        if dim < 3 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be at least 3, got {dim}"
            )));
        }
        Ok(Self { eps, rho, dim })
    }
}

/// `x^e`, routed through `powi` for small integral exponents so the result
/// does not depend on call-site constant folding of `powf`.
#[inline]
fn pow_mixed(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Bubble value at radius `r`.
pub fn bubble_value(eps: f64, r: f64, dim: usize) -> f64 {
    let n = dim as f64;
    let amp = pow_mixed(n * (n - 2.0) * eps * eps, (n - 2.0) / 4.0);
    amp / pow_mixed(eps * eps + r * r, (n - 2.0) / 2.0)
}

/// Radial derivative of the bubble, in closed form.
pub fn bubble_deriv(eps: f64, r: f64, dim: usize) -> f64 {
    let n = dim as f64;
    let amp = pow_mixed(n * (n - 2.0) * eps * eps, (n - 2.0) / 4.0);
    -(n - 2.0) * r * amp / pow_mixed(eps * eps + r * r, n / 2.0)
}

/// Quintic smoothstep `6 t^5 - 15 t^4 + 10 t^3`.
fn smoothstep(t: f64) -> f64 {
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

fn smoothstep_deriv(t: f64) -> f64 {
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

/// The drop `sigma = 1 - xi` of the cutoff: 0 on `[0, rho]`, 1 beyond
/// `2 rho`. Kept separate so that quantities like `xi^2 - 1` can be formed
/// without cancellation where `sigma` is tiny.
pub(crate) fn cutoff_drop(r: f64, rho: f64) -> f64 {
    if r <= rho {
        0.0
    } else if r >= 2.0 * rho {
        1.0
    } else {
        smoothstep((r - rho) / rho)
    }
}

/// C^2 cutoff: 1 on `[0, rho]`, 0 beyond `2 rho`, monotone in between.
pub fn cutoff(r: f64, rho: f64) -> f64 {
    1.0 - cutoff_drop(r, rho)
}

/// Radial derivative of the cutoff.
pub fn cutoff_deriv(r: f64, rho: f64) -> f64 {
    if r <= rho || r >= 2.0 * rho {
        0.0
    } else {
        -smoothstep_deriv((r - rho) / rho) / rho
    }
}

/// Sample `psi_eps = xi U_eps` and its product-rule derivative onto a grid.
pub fn psi_eps(spec: &BubbleSpec, grid: &Arc<RadialGrid>) -> Result<RadialFn> {
    if grid.radius() < 2.0 * spec.rho {
        return Err(Error::GridTooSmall {
            radius: grid.radius(),
            support: 2.0 * spec.rho,
        });
    }
    if grid.dim() != spec.dim {
        return Err(Error::GridMismatch);
    }
    let (eps, rho, dim) = (spec.eps, spec.rho, spec.dim);
    RadialFn::from_fn(
        Arc::clone(grid),
        |r| cutoff(r, rho) * bubble_value(eps, r, dim),
        |r| {
            cutoff_deriv(r, rho) * bubble_value(eps, r, dim)
                + cutoff(r, rho) * bubble_deriv(eps, r, dim)
        },
    )
}

/// `S^{N/2}`, computed as `int_{R^N} |grad U_1|^2` by half-line quadrature
/// and cross-checked against `int_{R^N} U_1^{2*}`; the two must agree to
/// 1e-8 relative or the quadrature is considered misconfigured.
pub fn sobolev_level(dim: usize) -> Result<f64> {
    let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
    let grad = crate::quadrature::integrate_halfline(
        |r| {
            let d = bubble_deriv(1.0, r, dim);
            d * d
        },
        1.0,
        dim,
    )?;
    let mass = crate::quadrature::integrate_halfline(
        |r| bubble_value(1.0, r, dim).powf(crit),
        1.0,
        dim,
    )?;
    if (grad - mass).abs() > 1e-8 * grad.abs() {
        return Err(Error::CrossCheck(format!(
            "gradient and critical-norm bubble integrals disagree: {grad:e} vs {mass:e}"
        )));
    }
    Ok(grad)
}

/// Quantities swept in `eps`. Defect quantities are relative to the
/// whole-space limit `S^{N/2}` of the uncut bubble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepQuantity {
    /// `int |grad psi_eps|^2 - S^{N/2}`, order `eps^{N-2}`.
    GradSqDefect,
    /// `int psi_eps^{2*} - S^{N/2}`, order `eps^N` (negative).
    CritNormDefect,
    /// `int psi_eps^2`, order `eps^2` for `N >= 5`.
    L2Norm,
    /// `int psi_eps`, order `eps^{(N-2)/2}`.
    L1Norm,
    /// `int psi_eps^{2*-1}`, order `eps^{(N-2)/2}`.
    CritMinusOneNorm,
    /// `int psi_eps^2 log psi_eps^2`, order `eps^2 |log eps|`.
    LogMoment,
}

impl SweepQuantity {
    pub fn is_defect(self) -> bool {
        matches!(self, Self::GradSqDefect | Self::CritNormDefect)
    }

    /// Quantities whose leading order carries an `eps^2 |log eps|` factor.
    pub fn log_corrected(self) -> bool {
        matches!(self, Self::LogMoment)
    }

    fn positivity_expected(self) -> bool {
        matches!(
            self,
            Self::L2Norm | Self::L1Norm | Self::CritMinusOneNorm | Self::LogMoment
        )
    }
}

/// Fitted power law over an `eps` sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AsymptoticFit {
    /// Fitted exponent of `eps` (slope of the log-log fit).
    pub exponent: f64,
    /// Fitted prefactor.
    pub coefficient: f64,
    /// Coefficient of determination of the fit, in `[0, 1]`.
    pub r_squared: f64,
    pub eps_range: (f64, f64),
    /// When set, the fit abscissa is `log(eps^2 |log eps|)` instead of
    /// `log eps`.
    pub log_corrected: bool,
}

/// Evaluate one sweep quantity at a single `eps`.
///
/// Defects are evaluated as exact difference integrals — the cutoff band
/// `[rho, 2 rho]` contributes `q(psi) - q(U)` and the tail `[2 rho, inf)`
/// contributes `-q(U)` — so no subtraction of two `O(S^{N/2})` numbers
/// occurs and the result keeps full relative precision down to `eps^N`
/// scales that would otherwise drown in roundoff.
pub fn quantity_value(
    quantity: SweepQuantity,
    eps: f64,
    spec: &BubbleSpec,
    order: usize,
) -> Result<f64> {
    let rho = spec.rho;
    let dim = spec.dim;
    let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
    match quantity {
        SweepQuantity::GradSqDefect => {
            let band = integrate_interval(
                |r| {
                    let sigma = cutoff_drop(r, rho);
                    let xi = 1.0 - sigma;
                    let dxi = cutoff_deriv(r, rho);
                    let u = bubble_value(eps, r, dim);
                    let du = bubble_deriv(eps, r, dim);
                    // |(xi u)'|^2 - |u'|^2, expanded to avoid cancellation
                    (-sigma * (2.0 - sigma)) * du * du
                        + 2.0 * xi * dxi * u * du
                        + dxi * dxi * u * u
                },
                rho,
                2.0 * rho,
                16,
                order,
                dim,
            )?;
            let tail = integrate_tail(
                |r| {
                    let du = bubble_deriv(eps, r, dim);
                    du * du
                },
                2.0 * rho,
                dim,
            )?;
            Ok(band - tail)
        }
        SweepQuantity::CritNormDefect => {
            let band = integrate_interval(
                |r| {
                    let sigma = cutoff_drop(r, rho);
                    // xi^{2*} - 1 without cancellation near sigma = 0
                    let factor = (crit * (-sigma).ln_1p()).exp_m1();
                    factor * bubble_value(eps, r, dim).powf(crit)
                },
                rho,
                2.0 * rho,
                16,
                order,
                dim,
            )?;
            let tail = integrate_tail(
                |r| bubble_value(eps, r, dim).powf(crit),
                2.0 * rho,
                dim,
            )?;
            Ok(band - tail)
        }
        SweepQuantity::L2Norm => raw_psi_integral(spec, eps, order, |psi| psi * psi),
        SweepQuantity::L1Norm => raw_psi_integral(spec, eps, order, |psi| psi),
        SweepQuantity::CritMinusOneNorm => {
            raw_psi_integral(spec, eps, order, move |psi| psi.powf(crit - 1.0))
        }
        SweepQuantity::LogMoment => raw_psi_integral(spec, eps, order, sq_log_term),
    }
}

fn raw_psi_integral(
    spec: &BubbleSpec,
    eps: f64,
    order: usize,
    f: impl Fn(f64) -> f64 + Copy,
) -> Result<f64> {
    let rho = spec.rho;
    let dim = spec.dim;
    let inner = integrate_graded(
        |r| f(bubble_value(eps, r, dim)),
        0.0,
        rho,
        eps / 64.0,
        order,
        dim,
    )?;
    let band = integrate_interval(
        |r| f(cutoff(r, rho) * bubble_value(eps, r, dim)),
        rho,
        2.0 * rho,
        16,
        order,
        dim,
    )?;
    Ok(inner + band)
}

/// Per-`eps` values of a sweep quantity.
pub fn sweep_values(
    quantity: SweepQuantity,
    eps_list: &[f64],
    spec: &BubbleSpec,
    grid: &RadialGrid,
) -> Result<Vec<(f64, f64)>> {
    validate_eps_list(eps_list, spec)?;
    if grid.radius() < 2.0 * spec.rho {
        return Err(Error::GridTooSmall {
            radius: grid.radius(),
            support: 2.0 * spec.rho,
        });
    }
    let order = grid.order();
    let mut values: Vec<(f64, f64)> = eps_list
        .par_iter()
        .map(|&eps| quantity_value(quantity, eps, spec, order).map(|v| (eps, v)))
        .collect::<Result<_>>()?;
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if quantity.positivity_expected() {
        if let Some(&(eps, v)) = values.iter().find(|&&(_, v)| v <= 0.0) {
            return Err(Error::FitRejected(format!(
                "{quantity:?} expected positive but is {v:e} at eps = {eps:e}"
            )));
        }
    }
    Ok(values)
}

fn validate_eps_list(eps_list: &[f64], spec: &BubbleSpec) -> Result<()> {
    if eps_list.len() < 5 {
        return Err(Error::FitRejected(format!(
            "need at least 5 sweep points, got {}",
            eps_list.len()
        )));
    }
    let mut sorted = eps_list.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &e in &sorted {
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::InvalidParameter(format!("bad sweep point {e}")));
        }
        if e > spec.rho / 4.0 {
            return Err(Error::InvalidParameter(format!(
                "sweep point {e} exceeds rho/4 = {}",
                spec.rho / 4.0
            )));
        }
    }
    for w in sorted.windows(2) {
        if (w[1] / w[0] - 2.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(
                "sweep points must form a dyadic ladder".into(),
            ));
        }
    }
    Ok(())
}

/// Least-squares power-law fit of a sweep quantity over a dyadic `eps` list.
pub fn asymptotic_sweep(
    quantity: SweepQuantity,
    eps_list: &[f64],
    spec: &BubbleSpec,
    grid: &RadialGrid,
) -> Result<AsymptoticFit> {
    let values = sweep_values(quantity, eps_list, spec, grid)?;
    let log_corrected = quantity.log_corrected();
    let pts: Vec<(f64, f64)> = values
        .iter()
        .filter(|&&(_, v)| v != 0.0)
        .map(|&(eps, v)| {
            let x = if log_corrected {
                (eps * eps * eps.ln().abs()).ln()
            } else {
                eps.ln()
            };
            (x, v.abs().ln())
        })
        .collect();
    if pts.len() < 5 {
        return Err(Error::FitRejected(
            "fewer than 5 usable sweep points after dropping zeros".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(AsymptoticFit {
        exponent: slope,
        coefficient: intercept.exp(),
        r_squared,
        eps_range: (values[0].0, values[values.len() - 1].0),
        log_corrected,
    })
}

/// Dyadic ladder `2^{-hi} rho, ..., 2^{-lo} rho` (ascending).
pub fn dyadic_eps(rho: f64, lo_pow: u32, hi_pow: u32) -> Vec<f64> {
    (lo_pow..=hi_pow)
        .rev()
        .map(|k| rho * 0.5f64.powi(k as i32))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gamma_half_integer;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Closed-form best Sobolev constant, used as an independent oracle:
    /// `S = pi N (N-2) (Gamma(N/2) / Gamma(N))^{2/N}`.
    fn sobolev_constant_closed_form(dim: usize) -> f64 {
        let n = dim as f64;
        PI * n * (n - 2.0) * (gamma_half_integer(dim) / gamma_half_integer(2 * dim)).powf(2.0 / n)
    }

    #[test]
    fn bubble_center_value() {
        for &(dim, eps) in &[(6usize, 0.3f64), (5, 1.7), (8, 0.02)] {
            let n = dim as f64;
            let expected = (n * (n - 2.0)).powf((n - 2.0) / 4.0) * eps.powf(-(n - 2.0) / 2.0);
            assert_relative_eq!(bubble_value(eps, 0.0, dim), expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn bubble_arithmetic_spot_check() {
        // N = 6, eps = 1, r = 1: 24 / 2^2 = 6
        assert_relative_eq!(bubble_value(1.0, 1.0, 6), 6.0, max_relative = 1e-14);
    }

    #[test]
    fn bubble_scale_invariance() {
        let dim = 6;
        let n = dim as f64;
        for &eps in &[0.01, 0.37, 5.0] {
            for &r in &[0.0, 0.1, 1.0, 17.0] {
                let lhs = bubble_value(eps, r, dim);
                let rhs = eps.powf(-(n - 2.0) / 2.0) * bubble_value(1.0, r / eps, dim);
                assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn bubble_derivative_matches_finite_difference() {
        let h = 1e-6;
        for &r in &[0.05, 0.4, 2.0] {
            let fd = (bubble_value(0.7, r + h, 6) - bubble_value(0.7, r - h, 6)) / (2.0 * h);
            assert_relative_eq!(bubble_deriv(0.7, r, 6), fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn cutoff_profile() {
        let rho = 0.25;
        assert_eq!(cutoff(rho / 2.0, rho), 1.0);
        assert_eq!(cutoff(3.0 * rho, rho), 0.0);
        assert_relative_eq!(cutoff(1.5 * rho, rho), 0.5, max_relative = 1e-14);
        // monotone non-increasing, values in [0, 1]
        let mut prev = 1.0;
        for i in 0..=400 {
            let r = 2.5 * rho * i as f64 / 400.0;
            let v = cutoff(r, rho);
            assert!((0.0..=1.0).contains(&v));
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn sobolev_level_cross_checks_and_matches_closed_form() {
        for dim in [5usize, 6, 7] {
            let level = sobolev_level(dim).unwrap();
            let oracle = sobolev_constant_closed_form(dim).powf(dim as f64 / 2.0);
            assert_relative_eq!(level, oracle, max_relative = 1e-6);
        }
    }

    #[test]
    fn bubble_integrals_are_scale_invariant() {
        let dim = 6;
        let crit = 3.0;
        let reference = sobolev_level(dim).unwrap();
        for &eps in &[0.1, 1.0, 10.0] {
            let grad = crate::quadrature::integrate_halfline(
                |r| bubble_deriv(eps, r, dim).powi(2),
                eps,
                dim,
            )
            .unwrap();
            let mass = crate::quadrature::integrate_halfline(
                |r| bubble_value(eps, r, dim).powf(crit),
                eps,
                dim,
            )
            .unwrap();
            assert_relative_eq!(grad, reference, max_relative = 1e-9);
            assert_relative_eq!(mass, reference, max_relative = 1e-9);
        }
    }

    #[test]
    fn psi_matches_bubble_inside_and_vanishes_outside() {
        let spec = BubbleSpec::new(0.01, 0.25, 6).unwrap();
        let grid = Arc::new(RadialGrid::for_cutoff(1.0, 0.25, 0.01, 8, 6).unwrap());
        let psi = psi_eps(&spec, &grid).unwrap();
        for (i, &r) in grid.abscissae().iter().enumerate() {
            if r <= 0.25 {
                assert_eq!(psi.values()[i], bubble_value(0.01, r, 6));
            }
            if r >= 0.5 {
                assert_eq!(psi.values()[i], 0.0);
            }
        }
    }

    #[test]
    fn psi_rejects_small_grid() {
        let spec = BubbleSpec::new(0.01, 0.4, 6).unwrap();
        let grid = Arc::new(RadialGrid::build(0.5, 16, 8, 6).unwrap());
        assert!(matches!(
            psi_eps(&spec, &grid),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn grad_defect_vanishes_as_eps_shrinks() {
        let rho = 0.25;
        let spec = BubbleSpec::new(1.0, rho, 6).unwrap();
        let level = sobolev_level(6).unwrap();
        let defect = quantity_value(SweepQuantity::GradSqDefect, rho * 0.5f64.powi(10), &spec, 8)
            .unwrap();
        assert!(defect > 0.0, "cutoff gradient defect should be positive");
        assert!(defect <= 1e-3 * level, "defect {defect:e} too large");
        // and increasing the scale makes it visibly larger
        let defect_big =
            quantity_value(SweepQuantity::GradSqDefect, rho * 0.5f64.powi(5), &spec, 8).unwrap();
        assert!(defect_big > defect * 100.0);
    }

    #[test]
    fn fitted_exponents_match_expansion_orders() {
        let rho = 0.25;
        let spec = BubbleSpec::new(1.0, rho, 6).unwrap();
        let grid = RadialGrid::for_cutoff(1.0, rho, rho * 0.5f64.powi(10), 8, 6).unwrap();
        let eps = dyadic_eps(rho, 5, 10);
        let grad = asymptotic_sweep(SweepQuantity::GradSqDefect, &eps, &spec, &grid).unwrap();
        assert!((grad.exponent - 4.0).abs() < 0.3, "{}", grad.exponent);
        assert!(grad.r_squared >= 0.999);
        let l2 = asymptotic_sweep(SweepQuantity::L2Norm, &eps, &spec, &grid).unwrap();
        assert!((l2.exponent - 2.0).abs() < 0.1, "{}", l2.exponent);
        assert!(l2.r_squared >= 0.999);
        let l1 = asymptotic_sweep(SweepQuantity::L1Norm, &eps, &spec, &grid).unwrap();
        assert!((l1.exponent - 2.0).abs() < 0.15, "{}", l1.exponent);
    }

    #[test]
    fn log_moment_coefficient_is_positive_and_stable() {
        let rho = 0.25;
        let spec = BubbleSpec::new(1.0, rho, 6).unwrap();
        let grid = RadialGrid::for_cutoff(1.0, rho, rho * 0.5f64.powi(10), 8, 6).unwrap();
        let eps = dyadic_eps(rho, 4, 10);
        let values = sweep_values(SweepQuantity::LogMoment, &eps, &spec, &grid).unwrap();
        let ratios: Vec<f64> = values
            .iter()
            .map(|&(e, v)| v / (e * e * e.ln().abs()))
            .collect();
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min > 0.0);
        assert!(max / min <= 1.1, "coefficient drifts: {min} .. {max}");
    }

    #[test]
    fn sweep_validation_errors() {
        let rho = 0.25;
        let spec = BubbleSpec::new(1.0, rho, 6).unwrap();
        let grid = RadialGrid::for_cutoff(1.0, rho, 1e-3, 8, 6).unwrap();
        // too few points
        assert!(asymptotic_sweep(
            SweepQuantity::L2Norm,
            &dyadic_eps(rho, 8, 10),
            &spec,
            &grid
        )
        .is_err());
        // non-dyadic ladder
        let bad = vec![0.001, 0.003, 0.006, 0.012, 0.024];
        assert!(asymptotic_sweep(SweepQuantity::L2Norm, &bad, &spec, &grid).is_err());
        // points above rho/4
        let big = vec![0.02, 0.04, 0.08, 0.16, 0.32];
        assert!(asymptotic_sweep(SweepQuantity::L2Norm, &big, &spec, &grid).is_err());
    }
}
