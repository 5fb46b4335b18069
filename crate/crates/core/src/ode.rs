//! Adaptive Dormand-Prince 5(4) integration for two-component radial
//! systems, with continuous (dense) output on every accepted step.

use serde::{Deserialize, Serialize};

pub type State = [f64; 2];

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedEnd,
    BlowUp { r: f64 },
    StepFailure { r: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Terminate once `|u|` exceeds this value.
    pub blow_up: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 4_000_000,
            blow_up: 1e8,
        }
    }
}

// Dormand-Prince coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// embedded 4th-order error coefficients (b - bhat)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// dense-output coefficients
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its quartic interpolation polynomial.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub r0: f64,
    pub h: f64,
    cont: [[f64; 5]; 2],
}

impl DenseStep {
    /// Evaluate the continuous extension at `r` in `[r0, r0 + h]`.
    pub fn eval(&self, r: f64) -> State {
        let theta = ((r - self.r0) / self.h).clamp(0.0, 1.0);
        let mut out = [0.0; 2];
        for (i, c) in self.cont.iter().enumerate() {
            out[i] = c[0]
                + theta
                    * (c[1] + (1.0 - theta) * (c[2] + theta * (c[3] + (1.0 - theta) * c[4])));
        }
        out
    }

    fn from_hermite(r0: f64, h: f64, y0: State, y1: State, f0: State, f1: State) -> Self {
        let mut cont = [[0.0; 5]; 2];
        for i in 0..2 {
            let dy = y1[i] - y0[i];
            cont[i][0] = y0[i];
            cont[i][1] = dy;
            cont[i][2] = h * f0[i] - dy;
            cont[i][3] = dy - h * f1[i] - cont[i][2];
            cont[i][4] = 0.0;
        }
        Self { r0, h, cont }
    }
}

/// A dense integration record from `r_start` to termination.
#[derive(Debug, Clone)]
pub struct Trajectory {
    steps: Vec<DenseStep>,
    pub termination: Termination,
    start: (f64, State),
    end: (f64, State),
}

impl Trajectory {
    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    pub fn start_r(&self) -> f64 {
        self.start.0
    }

    pub fn end_r(&self) -> f64 {
        self.end.0
    }

    pub fn end_state(&self) -> State {
        self.end.1
    }

    pub fn reached(&self, r: f64) -> bool {
        self.termination == Termination::ReachedEnd && self.end.0 >= r - 1e-12 * r.abs()
    }

    /// Interpolated `(u, u')` at `r`, clamped to the covered range.
    pub fn eval(&self, r: f64) -> State {
        if self.steps.is_empty() || r <= self.start.0 {
            return self.start.1;
        }
        if r >= self.end.0 {
            return self.end.1;
        }
        let idx = self
            .steps
            .partition_point(|s| s.r0 + s.h < r)
            .min(self.steps.len() - 1);
        self.steps[idx].eval(r)
    }

    /// Build a trajectory from pointwise samples of a known function, using
    /// cubic Hermite interpolation between consecutive samples. Intended for
    /// constructing synthetic trajectories in verification code.
    pub fn from_dense_samples(rs: &[f64], states: &[State], derivs: &[State]) -> Self {
        assert!(rs.len() >= 2 && rs.len() == states.len() && rs.len() == derivs.len());
        let mut steps = Vec::with_capacity(rs.len() - 1);
        for i in 0..rs.len() - 1 {
            let h = rs[i + 1] - rs[i];
            assert!(h > 0.0, "sample radii must increase");
            steps.push(DenseStep::from_hermite(
                rs[i],
                h,
                states[i],
                states[i + 1],
                derivs[i],
                derivs[i + 1],
            ));
        }
        Self {
            steps,
            termination: Termination::ReachedEnd,
            start: (rs[0], states[0]),
            end: (*rs.last().unwrap(), *states.last().unwrap()),
        }
    }
}

fn add_scaled(y: State, h: f64, terms: &[(f64, State)]) -> State {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrate as [`integrate`], but force step endpoints exactly onto the
/// sorted `checkpoints` and record the state there.
///
/// Checkpoint values are genuine Runge-Kutta endpoints, so they carry only
/// the smooth accumulated error of the integration, not the additional
/// interpolation wiggle of dense output. Profiles sampled this way support
/// much quieter derivative estimates.
pub fn integrate_through<F: Fn(f64, State) -> State>(
    f: F,
    r0: f64,
    y0: State,
    r_end: f64,
    checkpoints: &[f64],
    opts: &OdeOptions,
) -> (Trajectory, Vec<State>) {
    debug_assert!(checkpoints.windows(2).all(|w| w[1] >= w[0]));
    let mut states = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    while next < checkpoints.len() && checkpoints[next] <= r0 {
        states.push(y0);
        next += 1;
    }
    let traj = integrate_impl(f, r0, y0, r_end, opts, |r, y| {
        while next < checkpoints.len() && (checkpoints[next] - r).abs() <= 1e-13 * r.abs().max(1.0)
        {
            states.push(y);
            next += 1;
        }
        checkpoints.get(next).copied()
    });
    while states.len() < checkpoints.len() {
        states.push(traj.end.1);
    }
    (traj, states)
}

/// Integrate `y' = f(r, y)` from `(r0, y0)` to `r_end > r0`.
pub fn integrate<F: Fn(f64, State) -> State>(
    f: F,
    r0: f64,
    y0: State,
    r_end: f64,
    opts: &OdeOptions,
) -> Trajectory {
    integrate_impl(f, r0, y0, r_end, opts, |_, _| None)
}

fn integrate_impl<F: Fn(f64, State) -> State>(
    f: F,
    r0: f64,
    y0: State,
    r_end: f64,
    opts: &OdeOptions,
    mut on_accept: impl FnMut(f64, State) -> Option<f64>,
) -> Trajectory {
    let span = r_end - r0;
    debug_assert!(span > 0.0);
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut r = r0;
    let mut y = y0;
    let mut k1 = f(r, y);
    let mut h = 1e-4 * span;
    let mut termination = Termination::ReachedEnd;
    let mut next_cp = on_accept(r0, y0);

    for _ in 0..opts.max_steps {
        if r >= r_end {
            break;
        }
        if h < 1e-14 * r.abs().max(span) {
            termination = Termination::StepFailure { r };
            break;
        }
        // the attempted step may be clamped to land on a checkpoint or the
        // endpoint; the controller state `h` is kept separately so forced
        // short steps do not collapse it
        let mut hs = h;
        if let Some(cp) = next_cp {
            if cp > r && cp - r < hs {
                hs = cp - r;
            }
        }
        let last = r + hs >= r_end;
        if last {
            hs = r_end - r;
        }

        let k2 = f(r + C2 * hs, add_scaled(y, hs, &[(A21, k1)]));
        let k3 = f(r + C3 * hs, add_scaled(y, hs, &[(A31, k1), (A32, k2)]));
        let k4 = f(
            r + C4 * hs,
            add_scaled(y, hs, &[(A41, k1), (A42, k2), (A43, k3)]),
        );
        let k5 = f(
            r + C5 * hs,
            add_scaled(y, hs, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]),
        );
        let k6 = f(
            r + hs,
            add_scaled(
                y,
                hs,
                &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
            ),
        );
        let y1 = add_scaled(y, hs, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
        let k7 = f(r + hs, y1);

        let mut err_sq = 0.0;
        for i in 0..2 {
            let e = hs
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y1[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (0.5 * err_sq).sqrt();

        if !err.is_finite() {
            // overflow in a trial stage: shrink hard and retry
            h = 0.2 * hs;
            continue;
        }
        if err <= 1.0 {
            // accepted: record the dense polynomial
            let mut cont = [[0.0; 5]; 2];
            for i in 0..2 {
                let dy = y1[i] - y[i];
                cont[i][0] = y[i];
                cont[i][1] = dy;
                cont[i][2] = hs * k1[i] - dy;
                cont[i][3] = dy - hs * k7[i] - cont[i][2];
                cont[i][4] = hs
                    * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i]);
            }
            steps.push(DenseStep { r0: r, h: hs, cont });
            r += hs;
            y = y1;
            k1 = k7;
            if y[0].abs() > opts.blow_up {
                termination = Termination::BlowUp { r };
                break;
            }
            if last {
                break;
            }
            next_cp = on_accept(r, y);
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            let grown = hs * fac;
            h = if hs < h { grown.max(h) } else { grown };
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h = hs * fac;
        }
    }
    if r < r_end && termination == Termination::ReachedEnd {
        termination = Termination::StepFailure { r };
    }

    let start = (r0, y0);
    let end = (r, y);
    Trajectory {
        steps,
        termination,
        start,
        end,
    }
}
