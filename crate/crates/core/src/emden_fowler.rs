//! Logarithmic-radius picture: with `s = ln r` and `w₁ = r^{4/(p-1)}U` the
//! radial equation becomes an autonomous system in four variables whose
//! equilibrium `w⁽⁰⁾` is the singular solution.
//!
//! Also hosts the backward cone test along the `ν₂` eigendirection and the
//! projected linear orbit used as an oscillation surrogate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{k0, ProblemParams};
use crate::ode::{self, Crossing, Event, Solution, StepperOptions};
use crate::radial::RadialState;
use crate::spectrum::{
    eigenvalues, eigenvector, fixed_point_w0, jacobian_diagonal, left_eigenvector, nu2_eigenvector, WPoint,
};

pub const DEFAULT_NORM_BLOWUP: f64 = 1e8;
/// Norm cap for the cone test. The `+` direction blows up backward in finite
/// `s` through the nonlinearity; the cap stops it before the step size collapses.
pub const CONE_NORM_CAP: f64 = 1e30;
pub const MAX_CONE_EPSILON: f64 = 1e-4;
pub const MIN_CONE_SPAN: f64 = 1.0;

/// Shifted coordinates `z = w - w⁽⁰⁾` at log-radius `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZPoint {
    pub s: f64,
    pub z: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeDirection {
    /// Start along `+t`, sign pattern `(+,-,+,-)`.
    Plus,
    /// Start along `-t`, sign pattern `(-,+,-,+)`.
    Minus,
}

impl ConeDirection {
    fn sign(self) -> f64 {
        match self {
            ConeDirection::Plus => 1.0,
            ConeDirection::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeReport {
    pub direction: ConeDirection,
    /// Backward span actually integrated (shorter than requested if the norm cap was hit).
    pub s_span: f64,
    /// The orbit reached the norm cap before the requested span.
    pub blew_up: bool,
    pub pattern_held: bool,
    /// Least-squares slope of `ln|z₁|` against `-s`.
    pub measured_growth_rate: f64,
}

/// How an autonomous integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "event", content = "s")]
pub enum AutonomousEvent {
    ReachedEnd,
    /// `w₂` rising through zero while `w₁ > 0` (the image of `U' = 0`).
    W2Zero(f64),
    W1Zero(f64),
    NormExceeded(f64),
}

impl AutonomousEvent {
    pub fn position(&self) -> Option<f64> {
        match *self {
            AutonomousEvent::ReachedEnd => None,
            AutonomousEvent::W2Zero(s) | AutonomousEvent::W1Zero(s) | AutonomousEvent::NormExceeded(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutonomousOptions {
    pub tol: f64,
    pub norm_blowup: f64,
    /// Stop at the first `w₂` and `w₁` events (otherwise they are only recorded).
    pub stop_at_zeros: bool,
    pub max_step: Option<f64>,
}

impl AutonomousOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            norm_blowup: DEFAULT_NORM_BLOWUP,
            stop_at_zeros: true,
            max_step: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutonomousTrajectory {
    pub points: Vec<WPoint>,
    pub terminal_event: AutonomousEvent,
    pub passed_events: Vec<AutonomousEvent>,
    solution: Solution<4>,
}

impl AutonomousTrajectory {
    pub fn last(&self) -> &WPoint {
        self.points.last().expect("trajectory is never empty")
    }

    pub fn point_at(&self, s: f64) -> Option<WPoint> {
        if s == self.points[0].s {
            return Some(self.points[0]);
        }
        self.solution.interpolate(s).map(|w| WPoint::new(s, w))
    }

    pub fn accepted_steps(&self) -> usize {
        self.solution.accepted_steps()
    }
}

pub fn radial_to_w(params: &ProblemParams, state: &RadialState) -> Result<WPoint> {
    if !(state.r > 0.0) {
        return Err(Error::Domain(format!("log-radius undefined at r = {}", state.r)));
    }
    let a = params.decay();
    let n1 = params.nf() - 1.0;
    let r = state.r;
    let ra = r.powf(a);
    Ok(WPoint::new(
        r.ln(),
        [
            ra * state.u,
            ra * r * state.u1,
            ra * r * r * (state.u2 - state.u1 / r),
            ra * r * r * r * (state.u3 + n1 * state.u2 / r - n1 * state.u1 / (r * r)),
        ],
    ))
}

pub fn w_to_radial(params: &ProblemParams, point: &WPoint) -> RadialState {
    let a = params.decay();
    let n1 = params.nf() - 1.0;
    let r = point.s.exp();
    let ra = r.powf(-a);
    let w = &point.w;
    let u = ra * w[0];
    let u1 = ra / r * w[1];
    let u2 = ra / (r * r) * w[2] + u1 / r;
    let u3 = ra / (r * r * r) * w[3] - n1 * u2 / r + n1 * u1 / (r * r);
    RadialState::new(r, u, u1, u2, u3)
}

pub fn autonomous_rhs(params: &ProblemParams, point: &WPoint) -> [f64; 4] {
    field(&jacobian_diagonal(params), params.p(), &point.w)
}

#[inline]
fn field(d: &[f64; 4], p: f64, w: &[f64; 4]) -> [f64; 4] {
    [
        d[0] * w[0] + w[1],
        d[1] * w[1] + w[2],
        d[2] * w[2] + w[3],
        w[0].abs().powf(p - 1.0) * w[0] + d[3] * w[3],
    ]
}

/// Jacobian of the autonomous field at `w⁽⁰⁾`.
pub fn linearization(params: &ProblemParams) -> [[f64; 4]; 4] {
    let d = jacobian_diagonal(params);
    [
        [d[0], 1.0, 0.0, 0.0],
        [0.0, d[1], 1.0, 0.0],
        [0.0, 0.0, d[2], 1.0],
        [params.p() * k0(params), 0.0, 0.0, d[3]],
    ]
}

pub fn integrate_autonomous(params: &ProblemParams, w0: WPoint, s_end: f64, tol: f64) -> Result<AutonomousTrajectory> {
    integrate_autonomous_with(params, w0, s_end, &AutonomousOptions::new(tol))
}

pub fn integrate_autonomous_with(
    params: &ProblemParams,
    w0: WPoint,
    s_end: f64,
    opts: &AutonomousOptions,
) -> Result<AutonomousTrajectory> {
    if !w0.is_finite() {
        return Err(Error::Parameter(format!("non-finite start point {w0:?}")));
    }
    let d = jacobian_diagonal(params);
    let p = params.p();
    // The field leaves a roundoff residual at the computed w⁽⁰⁾ which the
    // unstable mode would amplify by e^{ν₁ s}; integrating f(w) - f(w⁽⁰⁾)
    // makes w⁽⁰⁾ an exact equilibrium.
    let bias = field(&d, p, &fixed_point_w0(params).w);
    let rhs = move |_s: f64, w: &[f64; 4]| {
        let f = field(&d, p, w);
        std::array::from_fn(|i| f[i] - bias[i])
    };

    let cap = opts.norm_blowup;
    let mut w2_zero = Event::new(Crossing::Rising, |_s, w: &[f64; 4]| w[1]).with_guard(|_s, w| w[0] > 0.0);
    let mut w1_zero = Event::new(Crossing::Either, |_s, w: &[f64; 4]| w[0]);
    if !opts.stop_at_zeros {
        w2_zero = w2_zero.non_terminal();
        w1_zero = w1_zero.non_terminal();
    }
    let events = [
        w2_zero,
        w1_zero,
        Event::new(Crossing::Falling, move |_s, w: &[f64; 4]| cap - norm(w)),
    ];
    let mut stepper = StepperOptions::new(opts.tol);
    stepper.max_step = opts.max_step;
    let solution = ode::integrate(&rhs, w0.s, w0.w, s_end, &events, &stepper)?;

    let as_event = |index: usize, s: f64| match index {
        0 => AutonomousEvent::W2Zero(s),
        1 => AutonomousEvent::W1Zero(s),
        _ => AutonomousEvent::NormExceeded(s),
    };
    let terminal_event = solution
        .terminal
        .map_or(AutonomousEvent::ReachedEnd, |hit| as_event(hit.index, hit.t));
    let passed_events = solution
        .events
        .iter()
        .filter(|hit| Some(**hit) != solution.terminal)
        .map(|hit| as_event(hit.index, hit.t))
        .collect();
    let points = solution
        .t
        .iter()
        .zip(&solution.y)
        .map(|(&s, &w)| WPoint::new(s, w))
        .collect();
    Ok(AutonomousTrajectory {
        points,
        terminal_event,
        passed_events,
        solution,
    })
}

pub(crate) fn norm(w: &[f64; 4]) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Backward integration from `w⁽⁰⁾ ± ε·t` along the `ν₂` eigenvector, checking
/// that the sign pattern of `z` persists at every accepted step.
pub fn cone_test(params: &ProblemParams, epsilon: f64, s_span: f64) -> Result<[ConeReport; 2]> {
    if !(epsilon > 0.0 && epsilon <= MAX_CONE_EPSILON) {
        return Err(Error::Parameter(format!(
            "epsilon = {epsilon} outside (0, {MAX_CONE_EPSILON}]"
        )));
    }
    if !(s_span >= MIN_CONE_SPAN && s_span.is_finite()) {
        return Err(Error::Parameter(format!(
            "s_span = {s_span} must be at least {MIN_CONE_SPAN}"
        )));
    }
    let t = nu2_eigenvector(params)?.t;
    let w0 = fixed_point_w0(params);
    let run = |direction: ConeDirection| -> Result<ConeReport> {
        let sign = direction.sign();
        let start = WPoint::new(0.0, std::array::from_fn(|i| w0.w[i] + sign * epsilon * t[i]));
        let mut opts = AutonomousOptions::new(1e-12);
        opts.norm_blowup = CONE_NORM_CAP;
        opts.stop_at_zeros = false;
        let traj = integrate_autonomous_with(params, start, -s_span, &opts)?;
        let pattern = [sign, -sign, sign, -sign];
        let pattern_held = traj
            .points
            .iter()
            .all(|pt| (0..4).all(|i| (pt.w[i] - w0.w[i]) * pattern[i] > 0.0));
        let (xs, ys): (Vec<f64>, Vec<f64>) = traj
            .points
            .iter()
            .map(|pt| (-pt.s, (pt.w[0] - w0.w[0]).abs().ln()))
            .unzip();
        Ok(ConeReport {
            direction,
            s_span: -traj.last().s,
            blew_up: matches!(traj.terminal_event, AutonomousEvent::NormExceeded(_)),
            pattern_held,
            measured_growth_rate: slope(&xs, &ys),
        })
    };
    Ok([run(ConeDirection::Plus)?, run(ConeDirection::Minus)?])
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Length of the chunks between projections in [`linear_surrogate_orbit`].
const SURROGATE_CHUNK: f64 = 1.0;
const SURROGATE_MAX_STEP: f64 = 0.05;

/// Orbit of the linearization `z' = Mz` started at `ε·Re ξ₃`, returned as
/// `w⁽⁰⁾ + z`.
///
/// The unstable `ν₁` component that roundoff feeds into `z` is removed with
/// the left eigenvector after every chunk of length 1, so the orbit stays on
/// the stable subspace for arbitrarily long spans.
pub fn linear_surrogate_orbit(params: &ProblemParams, epsilon: f64, s_end: f64, tol: f64) -> Result<Vec<WPoint>> {
    if !(epsilon > 0.0 && s_end > 0.0) {
        return Err(Error::Parameter(format!(
            "need epsilon > 0 and s_end > 0, got {epsilon}, {s_end}"
        )));
    }
    let spec = eigenvalues(params);
    let xi3 = eigenvector(params, spec.nu[2]).map(|c| c.re);
    let xi1 = eigenvector(params, spec.nu[0]).map(|c| c.re);
    let l1 = left_eigenvector(params, spec.nu[0]).map(|c| c.re);
    let l1_xi1: f64 = (0..4).map(|i| l1[i] * xi1[i]).sum();
    let m = linearization(params);
    let rhs =
        move |_s: f64, z: &[f64; 4]| -> [f64; 4] { std::array::from_fn(|i| (0..4).map(|j| m[i][j] * z[j]).sum()) };
    let opts = StepperOptions::new(tol).with_max_step(SURROGATE_MAX_STEP);
    let w0 = fixed_point_w0(params);

    let mut z: [f64; 4] = xi3.map(|x| epsilon * x);
    let mut s = 0.0;
    let mut points = vec![WPoint::new(s, add(&w0.w, &z))];
    while s < s_end {
        let next = (s + SURROGATE_CHUNK).min(s_end);
        let sol = ode::integrate(&rhs, s, z, next, &[], &opts)?;
        points.extend(
            sol.t
                .iter()
                .zip(&sol.y)
                .skip(1)
                .map(|(&t, y)| WPoint::new(t, add(&w0.w, y))),
        );
        z = sol.last().1;
        let coeff: f64 = (0..4).map(|i| l1[i] * z[i]).sum::<f64>() / l1_xi1;
        for i in 0..4 {
            z[i] -= coeff * xi1[i];
        }
        s = next;
    }
    Ok(points)
}

fn add(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| a[i] + b[i])
}
