//! Radial-measure quadrature on `[0, R]` and on the half-line.
//!
//! Every integral carries the full N-dimensional measure
//! `omega_{N-1} r^{N-1} dr`, where `omega_{N-1}` is the surface area of the
//! unit sphere in `R^N`, so values agree with integrals over `R^N` of the
//! corresponding radial function.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Gauss-Legendre abscissae and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Compute the Gauss-Legendre rule of the given order by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre(order: usize) -> GaussRule {
    assert!(order >= 1, "Gauss rule needs at least one node");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 1.0;
        for _ in 0..64 {
            let (p, d) = legendre_with_deriv(n, x);
            deriv = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * deriv * deriv);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// Gamma(n/2) for integer n >= 1, computed exactly from the recurrence.
pub fn gamma_half_integer(n: usize) -> f64 {
    assert!(n >= 1);
    let mut value = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut arg = if n.is_multiple_of(2) { 2 } else { 1 };
    while arg < n {
        value *= arg as f64 / 2.0;
        arg += 2;
    }
    value
}

/// Surface area of the unit sphere in `R^N`: `2 pi^{N/2} / Gamma(N/2)`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim)
}

/// Composite Gauss-Legendre grid on `[0, R]` carrying the radial measure.
///
/// Panels are refined geometrically toward `r = 0` (and toward interior
/// breakpoints when requested) so that integrands concentrated at small
/// scales, or with weak endpoint singularities such as `u^2 log u^2` at a
/// zero of `u`, are still integrated to near machine precision.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    edges: Vec<f64>,
    abscissae: Vec<f64>,
    dr_weights: Vec<f64>,
    measure: Vec<f64>,
    dim: usize,
    order: usize,
    ref_nodes: Vec<f64>,
    bary_weights: Vec<f64>,
}

const GRADING_RATIO: f64 = 1.3;
const SEGMENT_LEVELS: usize = 16;

fn geometric_edges_from_zero(radius: f64, panels: usize) -> Vec<f64> {
    // widths w0 * ratio^i, smallest panel at the origin
    let q = GRADING_RATIO;
    let w0 = radius * (q - 1.0) / (q.powi(panels as i32) - 1.0);
    let mut edges = Vec::with_capacity(panels + 1);
    edges.push(0.0);
    let mut acc = 0.0;
    let mut w = w0;
    for i in 0..panels {
        if i + 1 == panels {
            edges.push(radius);
        } else {
            acc += w;
            edges.push(acc);
        }
        w *= q;
    }
    edges
}

/// Sub-edges of `[lo, hi]` refined geometrically toward both endpoints,
/// with the interior panel width capped at a fraction of the segment.
///
/// The geometric tails resolve endpoint singularities of `x^2 log x` type
/// to near machine precision; the width cap keeps per-panel polynomial
/// interpolation of steep profiles accurate away from the endpoints.
fn graded_segment_edges(lo: f64, hi: f64, levels: usize, out: &mut Vec<f64>) {
    let seg = hi - lo;
    let half = 0.5 * seg;
    let cap = seg / 16.0;
    let mut left: Vec<f64> = Vec::new(); // offsets from lo, ascending
    let mut d = half * 0.5f64.powi(levels as i32);
    left.push(d);
    while 2.0 * d <= half + 1e-15 * seg && d <= cap {
        d *= 2.0;
        left.push(d);
    }
    let last = *left.last().unwrap();
    let remaining = half - last;
    if remaining > 1e-12 * seg {
        let cells = (remaining / cap).ceil() as usize;
        for i in 1..=cells {
            left.push(last + remaining * i as f64 / cells as f64);
        }
    }
    out.push(lo);
    for &off in &left {
        out.push(lo + off);
    }
    for &off in left.iter().rev() {
        let e = hi - off;
        if e > *out.last().unwrap() + 1e-15 * seg.max(1.0) {
            out.push(e);
        }
    }
    out.push(hi);
}

impl RadialGrid {
    /// Geometrically graded grid on `[0, radius]`.
    pub fn build(radius: f64, panels: usize, order: usize, dim: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid radius must be positive, got {radius}"
            )));
        }
        if !(8..=2048).contains(&panels) {
            return Err(Error::InvalidParameter(format!(
                "panel count must lie in [8, 2048], got {panels}"
            )));
        }
        Self::check_order_dim(order, dim)?;
        let edges = geometric_edges_from_zero(radius, panels);
        Self::from_edges(edges, order, dim)
    }

    /// Grid whose panel edges include the given interior breakpoints, with
    /// two-sided geometric refinement toward every segment endpoint.
    ///
    /// Used for solution profiles: aligning edges with the zeros of `u`
    /// restores per-panel smoothness of `|u|^p` and `u^2 log u^2`.
    pub fn with_breakpoints(
        radius: f64,
        breakpoints: &[f64],
        order: usize,
        dim: usize,
    ) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid radius must be positive, got {radius}"
            )));
        }
        Self::check_order_dim(order, dim)?;
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < radius)
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut segment_ends = vec![0.0];
        segment_ends.extend_from_slice(&cuts);
        segment_ends.push(radius);

        let mut edges = Vec::new();
        for w in segment_ends.windows(2) {
            if !edges.is_empty() {
                edges.pop(); // avoid duplicating the shared endpoint
            }
            graded_segment_edges(w[0], w[1], SEGMENT_LEVELS, &mut edges);
        }
        Self::from_edges(edges, order, dim)
    }

    /// Like [`RadialGrid::with_breakpoints`], with additional panel edges
    /// merged in. Used to align solution grids with the step points of the
    /// integrator that produced them, so per-panel interpolation resolves
    /// every scale the integration did.
    pub fn with_breakpoints_and_edges(
        radius: f64,
        breakpoints: &[f64],
        extra_edges: &[f64],
        order: usize,
        dim: usize,
    ) -> Result<Self> {
        let base = Self::with_breakpoints(radius, breakpoints, order, dim)?;
        let mut edges = base.edges;
        edges.extend(
            extra_edges
                .iter()
                .copied()
                .filter(|&e| e > 0.0 && e < radius),
        );
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * radius);
        if *edges.last().unwrap() != radius {
            edges.push(radius);
        }
        Self::from_edges(edges, order, dim)
    }

    /// Grid aligned with a cutoff supported on `[0, 2 rho]`, refined near the
    /// origin down to panels of width about `scale_hint / 32`.
    pub fn for_cutoff(
        radius: f64,
        rho: f64,
        scale_hint: f64,
        order: usize,
        dim: usize,
    ) -> Result<Self> {
        if !(rho > 0.0 && 2.0 * rho <= radius) {
            return Err(Error::GridTooSmall {
                radius,
                support: 2.0 * rho,
            });
        }
        Self::check_order_dim(order, dim)?;
        let target = (scale_hint.max(1e-12) / 32.0).min(rho / 256.0);
        let q = GRADING_RATIO;
        // smallest panels count with w0 <= target
        let mut panels = 24usize;
        while panels < 400 {
            let w0 = rho * (q - 1.0) / (q.powi(panels as i32) - 1.0);
            if w0 <= target {
                break;
            }
            panels += 4;
        }
        let mut edges = geometric_edges_from_zero(rho, panels);
        let band_panels = 16;
        for i in 1..=band_panels {
            edges.push(rho + (rho * i as f64) / band_panels as f64);
        }
        *edges.last_mut().unwrap() = 2.0 * rho;
        if radius > 2.0 * rho {
            let outer = 8;
            for i in 1..=outer {
                edges.push(2.0 * rho + (radius - 2.0 * rho) * i as f64 / outer as f64);
            }
            *edges.last_mut().unwrap() = radius;
        }
        Self::from_edges(edges, order, dim)
    }

    fn check_order_dim(order: usize, dim: usize) -> Result<()> {
        if !(5..=64).contains(&order) {
            return Err(Error::InvalidParameter(format!(
                "panel order must lie in [5, 64], got {order}"
            )));
        }
        if dim < 3 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be at least 3, got {dim}"
            )));
        }
        Ok(())
    }

    fn from_edges(edges: Vec<f64>, order: usize, dim: usize) -> Result<Self> {
        debug_assert!(edges.windows(2).all(|w| w[1] > w[0]));
        let rule = gauss_legendre(order);
        let omega = unit_sphere_area(dim);
        let panels = edges.len() - 1;
        let mut abscissae = Vec::with_capacity(panels * order);
        let mut dr_weights = Vec::with_capacity(panels * order);
        let mut measure = Vec::with_capacity(panels * order);
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (&x, &gw) in rule.nodes.iter().zip(&rule.weights) {
                let r = mid + half * x;
                let dw = gw * half;
                abscissae.push(r);
                dr_weights.push(dw);
                measure.push(dw * omega * r.powi(dim as i32 - 1));
            }
        }
        let bary_weights = barycentric_weights(&rule.nodes);
        Ok(Self {
            edges,
            abscissae,
            dr_weights,
            measure,
            dim,
            order,
            ref_nodes: rule.nodes,
            bary_weights,
        })
    }

    pub fn radius(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn panel_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    /// Plain `dr` quadrature weights (no radial measure factor).
    pub fn dr_weights(&self) -> &[f64] {
        &self.dr_weights
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Index of the panel containing `r` (clamped to `[0, panels-1]`).
    pub fn panel_of(&self, r: f64) -> usize {
        let idx = self.edges.partition_point(|&e| e <= r);
        idx.saturating_sub(1).min(self.edges.len() - 2)
    }

    /// Integrate pointwise samples taken at the grid abscissae against the
    /// radial measure.
    pub fn integrate_samples(&self, samples: &[f64]) -> Result<f64> {
        assert_eq!(samples.len(), self.abscissae.len(), "sample count mismatch");
        let mut acc = 0.0;
        for (i, (&v, &m)) in samples.iter().zip(&self.measure).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    r: self.abscissae[i],
                });
            }
            acc += v * m;
        }
        Ok(acc)
    }

    /// Integrate a function of `r` against the radial measure.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&r, &m) in self.abscissae.iter().zip(&self.measure) {
            let v = f(r);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { r });
            }
            acc += v * m;
        }
        Ok(acc)
    }

    /// Weighted dot product of two sample sets against the radial measure.
    pub fn integrate_product(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        assert_eq!(a.len(), self.len());
        assert_eq!(b.len(), self.len());
        let mut acc = 0.0;
        for i in 0..a.len() {
            let v = a[i] * b[i];
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    r: self.abscissae[i],
                });
            }
            acc += v * self.measure[i];
        }
        Ok(acc)
    }

    pub(crate) fn ref_nodes(&self) -> &[f64] {
        &self.ref_nodes
    }

    pub(crate) fn bary_weights(&self) -> &[f64] {
        &self.bary_weights
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for i in 0..n {
            if i != j {
                w[j] /= nodes[j] - nodes[i];
            }
        }
    }
    w
}

/// Quadrature nodes and radial-measure weights on `[lo, hi]`, graded toward
/// both endpoints. Suitable for integrands with endpoint singularities of
/// `x^2 log x` type, such as solution energies over one nodal domain.
pub(crate) fn segment_rule(lo: f64, hi: f64, order: usize, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut edges = Vec::new();
    graded_segment_edges(lo, hi, SEGMENT_LEVELS, &mut edges);
    let rule = gauss_legendre(order);
    let omega = unit_sphere_area(dim);
    let mut abscissae = Vec::with_capacity((edges.len() - 1) * order);
    let mut weights = Vec::with_capacity(abscissae.capacity());
    for w in edges.windows(2) {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (&x, &gw) in rule.nodes.iter().zip(&rule.weights) {
            let r = mid + half * x;
            abscissae.push(r);
            weights.push(gw * half * omega * r.powi(dim as i32 - 1));
        }
    }
    (abscissae, weights)
}

/// Composite Gauss integration of `f` against `omega r^{N-1} dr` on `[lo, hi]`.
pub(crate) fn integrate_interval<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    panels: usize,
    order: usize,
    dim: usize,
) -> Result<f64> {
    debug_assert!(hi > lo && lo >= 0.0);
    let rule = gauss_legendre(order);
    let omega = unit_sphere_area(dim);
    let mut acc = 0.0;
    for p in 0..panels {
        let a = lo + (hi - lo) * p as f64 / panels as f64;
        let b = lo + (hi - lo) * (p + 1) as f64 / panels as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &gw) in rule.nodes.iter().zip(&rule.weights) {
            let r = mid + half * x;
            let v = f(r);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { r });
            }
            acc += v * gw * half * omega * r.powi(dim as i32 - 1);
        }
    }
    Ok(acc)
}

/// Like [`integrate_interval`] but with panels graded geometrically toward
/// `lo`, the first panel no wider than `first_panel`.
pub(crate) fn integrate_graded<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    first_panel: f64,
    order: usize,
    dim: usize,
) -> Result<f64> {
    debug_assert!(hi > lo && lo >= 0.0);
    let q = GRADING_RATIO;
    let span = hi - lo;
    let mut panels = 8usize;
    while panels < 500 {
        let w0 = span * (q - 1.0) / (q.powi(panels as i32) - 1.0);
        if w0 <= first_panel {
            break;
        }
        panels += 2;
    }
    let rule = gauss_legendre(order);
    let omega = unit_sphere_area(dim);
    let w0 = span * (q - 1.0) / (q.powi(panels as i32) - 1.0);
    let mut acc = 0.0;
    let mut a = lo;
    let mut w = w0;
    for p in 0..panels {
        let b = if p + 1 == panels { hi } else { a + w };
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &gw) in rule.nodes.iter().zip(&rule.weights) {
            let r = mid + half * x;
            let v = f(r);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { r });
            }
            acc += v * gw * half * omega * r.powi(dim as i32 - 1);
        }
        a = b;
        w *= q;
    }
    Ok(acc)
}

const HALFLINE_PANELS: usize = 32;
const HALFLINE_ORDER: usize = 12;

fn halfline_core<F: Fn(f64) -> f64>(
    f: F,
    map: impl Fn(f64) -> (f64, f64), // s -> (r, dr/ds)
    dim: usize,
) -> Result<f64> {
    let rule = gauss_legendre(HALFLINE_ORDER);
    let omega = unit_sphere_area(dim);
    let mut acc = 0.0;
    let mut tail_profile: Vec<f64> = Vec::with_capacity(HALFLINE_PANELS * HALFLINE_ORDER);
    for p in 0..HALFLINE_PANELS {
        let a = p as f64 / HALFLINE_PANELS as f64;
        let b = (p + 1) as f64 / HALFLINE_PANELS as f64;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&x, &gw) in rule.nodes.iter().zip(&rule.weights) {
            let s = mid + half * x;
            let (r, jac) = map(s);
            let v = f(r);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { r });
            }
            let g = v * r.powi(dim as i32 - 1);
            tail_profile.push(g.abs());
            acc += g * jac * gw * half * omega;
        }
    }
    // decay guard: |f| r^{N-1} must not grow over the outer quarter
    let n = tail_profile.len();
    let global_max = tail_profile.iter().cloned().fold(0.0, f64::max);
    if global_max > 0.0 {
        let tail_start = 3 * n / 4;
        let tail_max = tail_profile[tail_start..]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let at_start = tail_profile[tail_start];
        if tail_max > at_start * (1.0 + 1e-9) + 1e-290 && tail_max > 1e-12 * global_max {
            return Err(Error::TailNotDecaying);
        }
    }
    Ok(acc)
}

/// Improper integral of `f` over `[0, inf)` against `omega r^{N-1} dr`,
/// via the substitution `r = scale * s / (1 - s)`, `s` in `[0, 1)`.
///
/// `scale` should match the intrinsic scale of the integrand (for bubble
/// integrands: the concentration parameter), which places the bulk of the
/// mass near the center of the transformed domain.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: F, scale: f64, dim: usize) -> Result<f64> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "half-line scale must be positive, got {scale}"
        )));
    }
    halfline_core(
        f,
        |s| {
            let t = 1.0 - s;
            (scale * s / t, scale / (t * t))
        },
        dim,
    )
}

/// Improper integral of `f` over `[lo, inf)` against `omega r^{N-1} dr`,
/// via `r = lo / (1 - s)`.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: F, lo: f64, dim: usize) -> Result<f64> {
    if !(lo.is_finite() && lo > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tail integral lower bound must be positive, got {lo}"
        )));
    }
    halfline_core(
        f,
        |s| {
            let t = 1.0 - s;
            (lo / t, lo / (t * t))
        },
        dim,
    )
}
