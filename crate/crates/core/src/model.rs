//! Variational core: problem parameters, radial functions, the energy
//! functional, Nehari residuals, and the logarithmic Nehari projection.
//!
//! The equation under study is
//!
//! ```text
//! -Delta u = lambda u + |u|^{p-2} u + theta u log u^2   on B_R in R^N,
//! u = 0 on the boundary,
//! ```
//!
//! with `theta > 0` and `2 < p <= 2N/(N-2)`. Its energy functional is
//!
//! ```text
//! L(u) = 1/2 |grad u|_2^2 - lambda/2 |u|_2^2 - 1/p |u|_p^p
//!        - theta/2 int u^2 (log u^2 - 1).
//! ```

use crate::error::{Error, Result};
use crate::quadrature::RadialGrid;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Problem data: dimension, linear coefficient, logarithmic coefficient,
/// power nonlinearity exponent, and ball radius.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    dim: usize,
    lambda: f64,
    theta: f64,
    exponent: f64,
    radius: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    dim: usize,
    lambda: f64,
    theta: f64,
    /// Defaults to the critical exponent `2N/(N-2)` when omitted.
    #[serde(default)]
    exponent: Option<f64>,
    radius: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        let p = raw
            .exponent
            .unwrap_or(2.0 * raw.dim as f64 / (raw.dim as f64 - 2.0));
        Params::new(raw.dim, raw.lambda, raw.theta, p, raw.radius)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            dim: p.dim,
            lambda: p.lambda,
            theta: p.theta,
            exponent: Some(p.exponent),
            radius: p.radius,
        }
    }
}

impl Params {
    pub fn new(dim: usize, lambda: f64, theta: f64, exponent: f64, radius: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be at least 3, got {dim}"
            )));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must be strictly positive, got {theta}"
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be finite".into()));
        }
        let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
        if !(exponent > 2.0 && exponent <= crit) {
            return Err(Error::InvalidParameter(format!(
                "exponent must lie in (2, {crit}], got {exponent}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            dim,
            lambda,
            theta,
            exponent,
            radius,
        })
    }

    /// Parameters with the critical exponent `2N/(N-2)`.
    pub fn critical(dim: usize, lambda: f64, theta: f64, radius: f64) -> Result<Self> {
        let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
        Self::new(dim, lambda, theta, crit, radius)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn critical_exponent(&self) -> f64 {
        2.0 * self.dim as f64 / (self.dim as f64 - 2.0)
    }

    pub fn is_critical(&self) -> bool {
        self.exponent == self.critical_exponent()
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.dim, self.lambda, self.theta, self.exponent, radius)
    }

    pub fn with_exponent(&self, exponent: f64) -> Result<Self> {
        Self::new(self.dim, self.lambda, self.theta, exponent, self.radius)
    }

    /// Nonlinear forcing `f(u) = lambda u + |u|^{p-2} u + theta u log u^2`.
    pub fn forcing(&self, u: f64) -> f64 {
        self.lambda * u + power_term(u, self.exponent) + self.theta * log_nonlinearity(u)
    }
}

/// `|u|^{p-2} u`, with the critical case `p - 2 = 1` short-circuited.
#[inline]
pub(crate) fn power_term(u: f64, p: f64) -> f64 {
    if p == 3.0 {
        u.abs() * u
    } else {
        u.abs().powf(p - 2.0) * u
    }
}

/// `u log u^2`, continuously extended by 0 at `u = 0`. Odd in `u`.
///
/// Evaluated as `2 u ln |u|`, which stays finite down to the smallest
/// subnormals instead of underflowing in `u^2`.
#[inline]
pub fn log_nonlinearity(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        2.0 * u * u.abs().ln()
    }
}

/// `u^2 log u^2` with the same extension.
#[inline]
pub(crate) fn sq_log_term(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        2.0 * u * u * u.abs().ln()
    }
}

/// A radial function on `[0, R]`: values and first derivatives sampled at
/// the abscissae of a [`RadialGrid`], interpolable by per-panel polynomial
/// collocation.
#[derive(Debug, Clone)]
pub struct RadialFn {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl RadialFn {
    pub fn from_samples(grid: Arc<RadialGrid>, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || derivs.len() != grid.len() {
            return Err(Error::InvalidParameter(
                "sample count does not match grid abscissa count".into(),
            ));
        }
        if let Some(i) = values
            .iter()
            .chain(derivs.iter())
            .position(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteSample {
                r: grid.abscissae()[i % grid.len()],
            });
        }
        Ok(Self {
            grid,
            values,
            derivs,
        })
    }

    pub fn from_fn<F, G>(grid: Arc<RadialGrid>, value: F, deriv: G) -> Result<Self>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let values: Vec<f64> = grid.abscissae().iter().map(|&r| value(r)).collect();
        let derivs: Vec<f64> = grid.abscissae().iter().map(|&r| deriv(r)).collect();
        Self::from_samples(grid, values, derivs)
    }

    pub fn zero(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
            derivs: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_deriv(&self) -> f64 {
        self.derivs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn interp(&self, channel: &[f64], r: f64) -> f64 {
        let grid = &self.grid;
        let r = r.clamp(0.0, grid.radius());
        let panel = grid.panel_of(r);
        let order = grid.order();
        let lo = grid.edges()[panel];
        let hi = grid.edges()[panel + 1];
        let t = (2.0 * r - lo - hi) / (hi - lo);
        let nodes = grid.ref_nodes();
        let bw = grid.bary_weights();
        let vals = &channel[panel * order..(panel + 1) * order];
        // barycentric second form on the panel's collocation points
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..order {
            let d = t - nodes[j];
            if d.abs() < 1e-15 {
                return vals[j];
            }
            let c = bw[j] / d;
            num += c * vals[j];
            den += c;
        }
        num / den
    }

    /// Value at arbitrary `r` in `[0, R]` by per-panel interpolation.
    pub fn eval(&self, r: f64) -> f64 {
        self.interp(&self.values, r)
    }

    /// First derivative at arbitrary `r`, interpolated from the stored
    /// derivative channel.
    pub fn eval_deriv(&self, r: f64) -> f64 {
        self.interp(&self.derivs, r)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| c * v).collect(),
            derivs: self.derivs.iter().map(|v| c * v).collect(),
        }
    }

    /// `a*self + b*other`; both operands must share a grid.
    pub fn linear_comb(&self, a: f64, other: &RadialFn, b: f64) -> Result<Self> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.edges() != other.grid.edges() {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let derivs = self
            .derivs
            .iter()
            .zip(&other.derivs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values,
            derivs,
        })
    }

    /// Resample onto another grid by interpolation.
    pub fn resample(&self, grid: Arc<RadialGrid>) -> Result<Self> {
        let values: Vec<f64> = grid.abscissae().iter().map(|&r| self.eval(r)).collect();
        let derivs: Vec<f64> = grid
            .abscissae()
            .iter()
            .map(|&r| self.eval_deriv(r))
            .collect();
        Self::from_samples(grid, values, derivs)
    }

    /// Extension-by-zero restriction to the annulus `[lo, hi]`.
    pub fn restrict_to(&self, lo: f64, hi: f64) -> Self {
        let mut out = self.clone();
        for (i, &r) in self.grid.abscissae().iter().enumerate() {
            if r < lo || r > hi {
                out.values[i] = 0.0;
                out.derivs[i] = 0.0;
            }
        }
        out
    }
}

/// The integrals entering the functional: `|grad u|_2^2`, `|u|_2^2`,
/// `|u|_p^p`, and `int u^2 log u^2`.
#[derive(Debug, Clone, Copy)]
pub struct EnergyParts {
    pub grad_sq: f64,
    pub l2_sq: f64,
    pub lp: f64,
    pub log_moment: f64,
}

pub fn energy_parts(u: &RadialFn, params: &Params) -> Result<EnergyParts> {
    let grid = u.grid();
    let p = params.exponent();
    let grad_sq = grid.integrate_product(u.derivs(), u.derivs())?;
    let l2_sq = grid.integrate_product(u.values(), u.values())?;
    let lp_samples: Vec<f64> = u.values().iter().map(|&v| v.abs().powf(p)).collect();
    let lp = grid.integrate_samples(&lp_samples)?;
    let log_samples: Vec<f64> = u.values().iter().map(|&v| sq_log_term(v)).collect();
    let log_moment = grid.integrate_samples(&log_samples)?;
    Ok(EnergyParts {
        grad_sq,
        l2_sq,
        lp,
        log_moment,
    })
}

/// The functional `L_p(u)`.
pub fn energy(u: &RadialFn, params: &Params) -> Result<f64> {
    let parts = energy_parts(u, params)?;
    Ok(energy_from_parts(&parts, params))
}

pub fn energy_from_parts(parts: &EnergyParts, params: &Params) -> f64 {
    0.5 * parts.grad_sq
        - 0.5 * params.lambda() * parts.l2_sq
        - parts.lp / params.exponent()
        - 0.5 * params.theta() * (parts.log_moment - parts.l2_sq)
}

/// The Nehari residual `G_p(u) = L_p'(u) u`.
pub fn nehari_residual(u: &RadialFn, params: &Params) -> Result<f64> {
    let parts = energy_parts(u, params)?;
    if parts.lp < 1e-300 {
        return Err(Error::ZeroFunction);
    }
    Ok(nehari_from_parts(&parts, params))
}

pub fn nehari_from_parts(parts: &EnergyParts, params: &Params) -> f64 {
    parts.grad_sq
        - params.lambda() * parts.l2_sq
        - parts.lp
        - params.theta() * parts.log_moment
}

/// `(1/2 - 1/p) |u|_p^p + theta/2 |u|_2^2`; equals `L_p(u) - G_p(u)/2`
/// identically, hence equals `L_p(u)` on the Nehari set.
pub fn reduced_energy(u: &RadialFn, params: &Params) -> Result<f64> {
    let parts = energy_parts(u, params)?;
    Ok((0.5 - 1.0 / params.exponent()) * parts.lp + 0.5 * params.theta() * parts.l2_sq)
}

/// Split into `(u_plus, u_minus)` with `u_plus = max(u, 0) >= 0` and
/// `u_minus = min(u, 0) <= 0`, so `u_plus + u_minus = u` at every abscissa.
pub fn sign_split(u: &RadialFn) -> (RadialFn, RadialFn) {
    let mut plus = u.clone();
    let mut minus = u.clone();
    for i in 0..u.values.len() {
        if u.values[i] > 0.0 {
            minus.values[i] = 0.0;
            minus.derivs[i] = 0.0;
        } else if u.values[i] < 0.0 {
            plus.values[i] = 0.0;
            plus.derivs[i] = 0.0;
        } else {
            plus.derivs[i] = 0.0;
            minus.derivs[i] = 0.0;
        }
    }
    (plus, minus)
}

/// The unique `s > 0` with `G(s u) = 0`.
///
/// Writing `A = |grad u|^2 - lambda |u|^2 - theta int u^2 log u^2`,
/// `P = |u|_p^p`, `Q = |u|_2^2`, the scaled residual is
/// `G(s u)/s^2 = h(s) = A - s^{p-2} P - theta log(s^2) Q`, strictly
/// decreasing from `+inf` to `-inf` for `theta > 0`. Bisection in `log s`
/// followed by a Newton polish converges to relative tolerance 1e-12.
pub fn nehari_project(u: &RadialFn, params: &Params) -> Result<f64> {
    let parts = energy_parts(u, params)?;
    nehari_project_parts(&parts, params)
}

pub(crate) fn nehari_project_parts(parts: &EnergyParts, params: &Params) -> Result<f64> {
    if parts.lp < 1e-300 || parts.l2_sq <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    let a = parts.grad_sq - params.lambda() * parts.l2_sq - params.theta() * parts.log_moment;
    let p = params.exponent();
    let pp = parts.lp;
    let q = parts.l2_sq;
    let theta = params.theta();
    let h = |t: f64| a - ((p - 2.0) * t).exp() * pp - 2.0 * theta * t * q;
    let dh = |t: f64| -(p - 2.0) * ((p - 2.0) * t).exp() * pp - 2.0 * theta * q;

    let mut lo = (1e-6f64).ln();
    let mut hi = (1e6f64).ln();
    let mut expand = 0;
    while h(lo) <= 0.0 {
        lo -= 10.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailure(
                "Nehari projection bracket could not be expanded downward".into(),
            ));
        }
    }
    expand = 0;
    while h(hi) >= 0.0 {
        hi += 10.0;
        expand += 1;
        if expand > 60 {
            return Err(Error::BracketFailure(
                "Nehari projection bracket could not be expanded upward".into(),
            ));
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..8 {
        let step = h(t) / dh(t);
        let next = t - step;
        if next.is_finite() && next > lo - 1.0 && next < hi + 1.0 {
            t = next;
        }
        if step.abs() < 1e-15 {
            break;
        }
    }
    Ok(t.exp())
}

/// Projection scalars `(s, t)` with `G(s u_plus) = G(t u_minus) = 0`.
///
/// The two components have disjoint supports, so the projections decouple
/// into two independent scalar root solves; `s u_plus + t u_minus` then lies
/// on the sign-changing Nehari set.
pub fn project_sign_changing(u: &RadialFn, params: &Params) -> Result<(f64, f64)> {
    let (plus, minus) = sign_split(u);
    if plus.max_abs() == 0.0 {
        return Err(Error::VanishingSignComponent("positive part"));
    }
    if minus.max_abs() == 0.0 {
        return Err(Error::VanishingSignComponent("negative part"));
    }
    let s = nehari_project(&plus, params)?;
    let t = nehari_project(&minus, params)?;
    Ok((s, t))
}
