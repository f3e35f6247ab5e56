//! Radial form of `Δ²U = |U|^{p-1}U` launched from a regular centre.
//!
//! Near `r = 0` the equation has singular coefficients, so the state at a
//! small handoff radius comes from the even Taylor expansion of the regular
//! solution; from there the ODE is integrated with event detection for the
//! zero of `U`, the first minimum of `U` and blow-up.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{k0, ProblemParams};
use crate::ode::{self, Crossing, Event, Solution, StepperOptions};

/// Default handoff radius from the series to the integrator.
pub const DEFAULT_LAUNCH_RADIUS: f64 = 1e-4;
pub const MAX_LAUNCH_RADIUS: f64 = 0.01;
pub const DEFAULT_BLOWUP: f64 = 1e8;
pub const DEFAULT_DERIVATIVE_BLOWUP: f64 = 1e12;

/// `(r, U, U', U'', U''')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialState {
    pub r: f64,
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl RadialState {
    pub fn new(r: f64, u: f64, u1: f64, u2: f64, u3: f64) -> Self {
        Self { r, u, u1, u2, u3 }
    }

    pub(crate) fn from_vec(r: f64, y: [f64; 4]) -> Self {
        Self::new(r, y[0], y[1], y[2], y[3])
    }

    pub(crate) fn to_vec(self) -> [f64; 4] {
        [self.u, self.u1, self.u2, self.u3]
    }

    pub fn is_valid(&self) -> bool {
        self.r > 0.0 && self.to_vec().iter().chain([&self.r]).all(|v| v.is_finite())
    }
}

/// How a radial integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "event", content = "r")]
pub enum TerminalEvent {
    ReachedRMax,
    UCrossedZero(f64),
    /// `U'` crossed zero from below while `U > 0`.
    UPrimeVanished(f64),
    /// `|U|` or one of its derivatives passed the blow-up threshold; the
    /// radius is a lower bound for the blow-up radius.
    BlowUp(f64),
}

impl TerminalEvent {
    pub fn radius(&self) -> Option<f64> {
        match *self {
            TerminalEvent::ReachedRMax => None,
            TerminalEvent::UCrossedZero(r) | TerminalEvent::UPrimeVanished(r) | TerminalEvent::BlowUp(r) => Some(r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOptions {
    pub tol: f64,
    pub blowup: f64,
    pub derivative_blowup: f64,
    /// When false, the first minimum of `U` is recorded but integration continues.
    pub stop_at_minimum: bool,
    pub max_step: Option<f64>,
}

impl RadialOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            blowup: DEFAULT_BLOWUP,
            derivative_blowup: DEFAULT_DERIVATIVE_BLOWUP,
            stop_at_minimum: true,
            max_step: None,
        }
    }
}

/// Accepted states of a radial integration plus its dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<RadialState>,
    pub terminal_event: TerminalEvent,
    /// Non-terminal events passed on the way (only when not stopping at the minimum).
    pub passed_events: Vec<TerminalEvent>,
    solution: Solution<4>,
}

impl Trajectory {
    pub fn first(&self) -> &RadialState {
        &self.states[0]
    }

    pub fn last(&self) -> &RadialState {
        self.states.last().expect("trajectory is never empty")
    }

    /// Dense-output state at radius `r` inside the integrated range.
    pub fn state_at(&self, r: f64) -> Option<RadialState> {
        if r == self.first().r {
            return Some(*self.first());
        }
        self.solution.interpolate(r).map(|y| RadialState::from_vec(r, y))
    }

    pub fn accepted_steps(&self) -> usize {
        self.solution.accepted_steps()
    }
}

/// `U''''` from the radial equation at a state with `r > 0`.
pub fn radial_rhs(params: &ProblemParams, state: &RadialState) -> Result<f64> {
    if !(state.r > 0.0) {
        return Err(Error::Domain(format!(
            "radial equation is singular at r = {}; use the series launch",
            state.r
        )));
    }
    Ok(fourth_derivative(params.nf(), params.p(), state.r, &state.to_vec()))
}

#[inline]
fn fourth_derivative(n: f64, p: f64, r: f64, y: &[f64; 4]) -> f64 {
    let c1 = 2.0 * (n - 1.0);
    let c2 = (n - 1.0) * (n - 3.0);
    y[0].abs().powf(p - 1.0) * y[0] - c1 / r * y[3] - c2 / (r * r) * y[2] + c2 / (r * r * r) * y[1]
}

/// Even Taylor coefficients `(c₀, c₂, c₄, c₆)` of the regular solution with
/// `U(0) = centre`, `U''(0) = gamma`.
pub fn series_coefficients(params: &ProblemParams, centre: f64, gamma: f64) -> [f64; 4] {
    let n = params.nf();
    let p = params.p();
    let c4 = centre.abs().powf(p - 1.0) * centre / (8.0 * n * (n + 2.0));
    let c6 = p * centre.abs().powf(p - 1.0) * gamma / (48.0 * (n + 2.0) * (n + 4.0));
    [centre, 0.5 * gamma, c4, c6]
}

/// State at `r0` of the regular solution with `U(0) = 1`, `U''(0) = gamma`.
pub fn series_launch(params: &ProblemParams, gamma: f64, r0: f64) -> Result<RadialState> {
    series_launch_from(params, 1.0, gamma, r0)
}

/// Series launch with an arbitrary centre value, for the scaling family
/// `U_a(x) = a·U(a^{(p-1)/4} x)`.
pub fn series_launch_from(params: &ProblemParams, centre: f64, gamma: f64, r0: f64) -> Result<RadialState> {
    if !(gamma < 0.0) {
        return Err(Error::Parameter(format!(
            "shooting parameter gamma = {gamma} must be negative"
        )));
    }
    if !(r0 > 0.0 && r0 <= MAX_LAUNCH_RADIUS) {
        return Err(Error::Parameter(format!(
            "launch radius r0 = {r0} outside (0, {MAX_LAUNCH_RADIUS}]"
        )));
    }
    Ok(series_state(params, centre, gamma, r0))
}

/// Series evaluation without the launch-radius precondition.
pub(crate) fn series_state(params: &ProblemParams, centre: f64, gamma: f64, r: f64) -> RadialState {
    let [c0, c2, c4, c6] = series_coefficients(params, centre, gamma);
    let r2 = r * r;
    RadialState::new(
        r,
        c0 + r2 * (c2 + r2 * (c4 + r2 * c6)),
        r * (2.0 * c2 + r2 * (4.0 * c4 + r2 * 6.0 * c6)),
        2.0 * c2 + r2 * (12.0 * c4 + r2 * 30.0 * c6),
        r * (24.0 * c4 + r2 * 120.0 * c6),
    )
}

/// Exact state of the singular solution `u_s = K₀^{1/(p-1)} r^{-4/(p-1)}` at `r`.
pub fn singular_state(params: &ProblemParams, r: f64) -> RadialState {
    let a = params.decay();
    let u = k0(params).powf(1.0 / (params.p() - 1.0)) * r.powf(-a);
    RadialState::new(
        r,
        u,
        -a * u / r,
        a * (a + 1.0) * u / (r * r),
        -a * (a + 1.0) * (a + 2.0) * u / (r * r * r),
    )
}

pub fn integrate_radial(params: &ProblemParams, start: RadialState, r_max: f64, tol: f64) -> Result<Trajectory> {
    integrate_radial_with(params, start, r_max, &RadialOptions::new(tol))
}

pub fn integrate_radial_with(
    params: &ProblemParams,
    start: RadialState,
    r_max: f64,
    opts: &RadialOptions,
) -> Result<Trajectory> {
    if !start.is_valid() {
        return Err(Error::Parameter(format!("invalid start state {start:?}")));
    }
    if !(r_max > start.r) {
        return Err(Error::Parameter(format!(
            "r_max = {r_max} must exceed start radius {}",
            start.r
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let n = params.nf();
    let p = params.p();
    let rhs = move |r: f64, y: &[f64; 4]| [y[1], y[2], y[3], fourth_derivative(n, p, r, y)];

    let blowup = opts.blowup;
    let dblow = opts.derivative_blowup;
    let mut minimum = Event::new(Crossing::Rising, |_r, y: &[f64; 4]| y[1]).with_guard(|_r, y| y[0] > 0.0);
    if !opts.stop_at_minimum {
        minimum = minimum.non_terminal();
    }
    let events = [
        Event::new(Crossing::Either, |_r, y: &[f64; 4]| y[0]),
        minimum,
        Event::new(Crossing::Falling, move |_r, y: &[f64; 4]| blowup - y[0].abs()),
        Event::new(Crossing::Falling, move |_r, y: &[f64; 4]| {
            dblow - y[1].abs().max(y[2].abs()).max(y[3].abs())
        }),
    ];
    let mut stepper = StepperOptions::new(opts.tol).with_time_scale(f64::MIN_POSITIVE);
    stepper.max_step = opts.max_step;
    let solution = ode::integrate(&rhs, start.r, start.to_vec(), r_max, &events, &stepper)?;

    let as_event = |index: usize, r: f64| match index {
        0 => TerminalEvent::UCrossedZero(r),
        1 => TerminalEvent::UPrimeVanished(r),
        _ => TerminalEvent::BlowUp(r),
    };
    let terminal_event = solution
        .terminal
        .map_or(TerminalEvent::ReachedRMax, |hit| as_event(hit.index, hit.t));
    let passed_events = solution
        .events
        .iter()
        .filter(|hit| Some(**hit) != solution.terminal)
        .map(|hit| as_event(hit.index, hit.t))
        .collect();
    let states = solution
        .t
        .iter()
        .zip(&solution.y)
        .map(|(&r, &y)| RadialState::from_vec(r, y))
        .collect();
    Ok(Trajectory {
        states,
        terminal_event,
        passed_events,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p510() -> ProblemParams {
        ProblemParams::new(5, 10.0).unwrap()
    }

    #[test]
    fn rhs_only_nonlinearity_survives() {
        let s = RadialState::new(1.0, 1.0, 0.0, 0.0, 0.0);
        assert_eq!(radial_rhs(&p510(), &s).unwrap(), 1.0);
        let s = RadialState::new(2.0, 0.3, 0.0, 0.0, 0.0);
        assert!(radial_rhs(&p510(), &s).unwrap() > 0.0);
    }

    #[test]
    fn rhs_rejects_origin() {
        let s = RadialState::new(0.0, 1.0, 0.0, -1.0, 0.0);
        assert!(matches!(radial_rhs(&p510(), &s), Err(Error::Domain(_))));
    }

    #[test]
    fn singular_solution_satisfies_equation() {
        for (n, p) in [(5, 10.0), (13, 2.0), (8, 5.5)] {
            let params = ProblemParams::new(n, p).unwrap();
            let a = params.decay();
            for r in [0.5, 1.0, 3.0] {
                let s = singular_state(&params, r);
                let exact = a * (a + 1.0) * (a + 2.0) * (a + 3.0) * s.u / r.powi(4);
                assert_relative_eq!(radial_rhs(&params, &s).unwrap(), exact, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn series_r4_coefficient() {
        let c = series_coefficients(&p510(), 1.0, -0.3);
        assert_relative_eq!(c[2], 1.0 / 280.0, max_relative = 1e-15);
        assert_relative_eq!(c[1], -0.15, max_relative = 1e-15);
        assert_relative_eq!(c[3], 10.0 * -0.3 / (48.0 * 7.0 * 9.0), max_relative = 1e-15);
    }

    #[test]
    fn series_limit_small_gamma() {
        let r0 = 1e-3;
        let s = series_launch(&p510(), -1e-300, r0).unwrap();
        assert_relative_eq!(s.u - 1.0, r0.powi(4) / 280.0, max_relative = 1e-9);
    }

    #[test]
    fn series_residual_is_fourth_order() {
        let params = p510();
        let gamma = -0.4;
        let [_, _, c4, c6] = series_coefficients(&params, 1.0, gamma);
        let residual = |r: f64| {
            let s = series_state(&params, 1.0, gamma, r);
            (radial_rhs(&params, &s).unwrap() - (24.0 * c4 + 360.0 * c6 * r * r)).abs()
        };
        let ratio = residual(0.1) / residual(0.05);
        assert!((ratio.log2() - 4.0).abs() < 0.2, "observed order {}", ratio.log2());
        assert!(residual(0.01) < 1e-6);
    }

    #[test]
    fn launch_preconditions() {
        assert!(series_launch(&p510(), 0.1, 1e-4).is_err());
        assert!(series_launch(&p510(), -0.1, 0.0).is_err());
        assert!(series_launch(&p510(), -0.1, 0.02).is_err());
        assert!(series_launch(&p510(), -0.1, 0.01).is_ok());
    }

    #[test]
    fn launch_radius_independence() {
        let params = p510();
        let gamma = -0.05;
        let a = integrate_radial(&params, series_launch(&params, gamma, 1e-4).unwrap(), 0.1, 1e-12).unwrap();
        let b = integrate_radial(&params, series_launch(&params, gamma, 1e-3).unwrap(), 0.1, 1e-12).unwrap();
        let (sa, sb) = (a.last(), b.last());
        assert_eq!(sa.r, 0.1);
        assert_eq!(sb.r, 0.1);
        for (x, y) in sa.to_vec().iter().zip(sb.to_vec()) {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-3), "{x} vs {y}");
        }
    }

    #[test]
    fn tracks_singular_solution() {
        let params = p510();
        let traj = integrate_radial(&params, singular_state(&params, 1.0), 3.0, 1e-12).unwrap();
        assert_eq!(traj.terminal_event, TerminalEvent::ReachedRMax);
        for s in &traj.states {
            let exact = params.singular_solution(s.r);
            assert!((s.u / exact - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn small_gamma_reaches_minimum_quickly() {
        let params = p510();
        let traj = integrate_radial(&params, series_launch(&params, -1e-6, 1e-4).unwrap(), 10.0, 1e-12).unwrap();
        match traj.terminal_event {
            TerminalEvent::UPrimeVanished(r) => {
                // U' = γr + 4c₄r³ vanishes near r = sqrt(-γ·70).
                assert_relative_eq!(r, (70.0e-6f64).sqrt(), max_relative = 1e-3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn strongly_negative_gamma_crosses_zero() {
        let params = p510();
        let traj = integrate_radial(&params, series_launch(&params, -5.0, 1e-4).unwrap(), 10.0, 1e-12).unwrap();
        assert!(matches!(traj.terminal_event, TerminalEvent::UCrossedZero(_)));
        assert!(traj.last().u.abs() < 1e-10);
    }

    #[test]
    fn continuation_past_minimum_blows_up() {
        let params = p510();
        let mut opts = RadialOptions::new(1e-10);
        opts.stop_at_minimum = false;
        let traj = integrate_radial_with(&params, series_launch(&params, -0.01, 1e-4).unwrap(), 1e3, &opts).unwrap();
        assert!(matches!(traj.terminal_event, TerminalEvent::BlowUp(_)));
        assert!(matches!(
            traj.passed_events.as_slice(),
            [TerminalEvent::UPrimeVanished(_)]
        ));
        let r_min = traj.passed_events[0].radius().unwrap();
        assert!(traj.terminal_event.radius().unwrap() > r_min);
    }

    #[test]
    fn dense_output_matches_samples() {
        let params = p510();
        let traj = integrate_radial(&params, series_launch(&params, -0.05, 1e-4).unwrap(), 0.5, 1e-12).unwrap();
        let mid = traj.states[traj.states.len() / 2];
        let dense = traj.state_at(mid.r).unwrap();
        assert_relative_eq!(dense.u, mid.u, max_relative = 1e-13);
        assert!(traj.state_at(0.6).is_none());
    }
}
