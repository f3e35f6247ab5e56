//! Adaptive Dormand–Prince 5(4) integrator with PI step control, continuous
//! (dense) output and event location by bisection on the interpolant.
//!
//! The integrator works forward or backward in the independent variable and
//! is deterministic: identical inputs produce bit-identical solutions.

use crate::error::{Error, Result};

/// Right-hand side of `y' = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<F, const N: usize> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

/// Mixed error tolerance: the per-component scale is `atol + rtol·|y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerance {
    /// Same value for the absolute and relative parts.
    pub fn mixed(tol: f64) -> Self {
        Self { rtol: tol, atol: tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub tolerance: Tolerance,
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
    /// Events are located to `event_rtol · max(|t|, time_scale)`.
    pub event_rtol: f64,
    /// A step is rejected as underflow below `1e-14 · max(|t|, time_scale)`.
    pub time_scale: f64,
}

impl StepperOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tolerance: Tolerance::mixed(tol),
            max_step: None,
            initial_step: None,
            max_steps: 500_000,
            event_rtol: 1e-12,
            time_scale: 1.0,
        }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }

    pub fn with_time_scale(mut self, scale: f64) -> Self {
        self.time_scale = scale;
        self
    }

    pub fn with_tolerance(mut self, tolerance: Tolerance) -> Self {
        self.tolerance = tolerance;
        self
    }
}

/// Which zero crossings of an event function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

impl Crossing {
    fn matches(self, g0: f64, g1: f64) -> bool {
        let rising = g0 < 0.0 && g1 >= 0.0;
        let falling = g0 > 0.0 && g1 <= 0.0;
        match self {
            Crossing::Rising => rising,
            Crossing::Falling => falling,
            Crossing::Either => rising || falling,
        }
    }
}

type EventFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>;
type GuardFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> bool + 'a>;

/// Scalar event function `g(t, y)` watched for sign changes.
pub struct Event<'a, const N: usize> {
    g: EventFn<'a, N>,
    guard: Option<GuardFn<'a, N>>,
    pub crossing: Crossing,
    pub terminal: bool,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(crossing: Crossing, g: impl Fn(f64, &[f64; N]) -> f64 + 'a) -> Self {
        Self {
            g: Box::new(g),
            guard: None,
            crossing,
            terminal: true,
        }
    }

    /// Only accept located crossings where `guard` holds.
    pub fn with_guard(mut self, guard: impl Fn(f64, &[f64; N]) -> bool + 'a) -> Self {
        self.guard = Some(Box::new(guard));
        self
    }

    pub fn non_terminal(mut self) -> Self {
        self.terminal = false;
        self
    }

    fn value(&self, t: f64, y: &[f64; N]) -> f64 {
        (self.g)(t, y)
    }

    fn admits(&self, t: f64, y: &[f64; N]) -> bool {
        self.guard.as_ref().is_none_or(|guard| guard(t, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<const N: usize> {
    /// Position of the event in the slice passed to [`integrate`].
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
}

/// Quartic interpolant over one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let c = &self.coeffs;
        std::array::from_fn(|i| c[0][i] + theta * (c[1][i] + theta1 * (c[2][i] + theta * (c[3][i] + theta1 * c[4][i]))))
    }

    fn contains(&self, t: f64) -> bool {
        let theta = (t - self.t0) / self.h;
        (-1e-12..=1.0 + 1e-12).contains(&theta)
    }
}

/// Accepted steps of one integration, with dense output and events.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub segments: Vec<DenseSegment<N>>,
    pub events: Vec<EventHit<N>>,
    /// The terminal event that stopped the integration, if any.
    pub terminal: Option<EventHit<N>>,
    pub rejected_steps: usize,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        let i = self.t.len() - 1;
        (self.t[i], self.y[i])
    }

    pub fn accepted_steps(&self) -> usize {
        self.segments.len()
    }

    /// Dense-output evaluation anywhere inside the integrated range.
    pub fn interpolate(&self, t: f64) -> Option<[f64; N]> {
        let first = self.segments.first()?;
        let forward = first.h > 0.0;
        let idx = self.segments.partition_point(|seg| {
            if forward {
                seg.t0 + seg.h < t
            } else {
                seg.t0 + seg.h > t
            }
        });
        let seg = self.segments.get(idx).or_else(|| self.segments.last())?;
        let (t_last, _) = self.last();
        let inside_final = if forward { t <= t_last } else { t >= t_last };
        if seg.contains(t) && inside_final {
            Some(seg.eval(t))
        } else {
            None
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension coefficients (Hairer & Wanner, DOPRI5).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller.
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const UNDERFLOW: f64 = 1e-14;
const MAX_BISECTIONS: usize = 200;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn error_norm<const N: usize>(err: &[f64; N], y0: &[f64; N], y1: &[f64; N], tol: Tolerance) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn initial_step<const N: usize>(
    sys: &impl OdeSystem<N>,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    h_max: f64,
    tol: Tolerance,
) -> f64 {
    let sk: [f64; N] = std::array::from_fn(|i| tol.atol + tol.rtol * y0[i].abs());
    let dnf: f64 = (0..N).map(|i| (f0[i] / sk[i]).powi(2)).sum();
    let dny: f64 = (0..N).map(|i| (y0[i] / sk[i]).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(h_max);
    let y1 = axpy(y0, dir * h, &[(1.0, f0)]);
    let f1 = sys.rhs(t0 + dir * h, &y1);
    let der2 = (0..N).map(|i| ((f1[i] - f0[i]) / sk[i]).powi(2)).sum::<f64>().sqrt() / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(h_max)
}

/// Integrate `y' = f(t, y)` from `(t0, y0)` towards `t_end` (either direction).
///
/// Returns at `t_end` or at the first terminal event.
pub fn integrate<const N: usize>(
    sys: &impl OdeSystem<N>,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    events: &[Event<'_, N>],
    opts: &StepperOptions,
) -> Result<Solution<N>> {
    if !(opts.tolerance.rtol > 0.0 && opts.tolerance.atol >= 0.0) {
        return Err(Error::Parameter(format!("invalid tolerance {:?}", opts.tolerance)));
    }
    if y0.iter().any(|v| !v.is_finite()) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Parameter("non-finite initial data".into()));
    }
    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0],
        segments: Vec::new(),
        events: Vec::new(),
        terminal: None,
        rejected_steps: 0,
    };
    if t_end == t0 {
        return Ok(sol);
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();
    let h_max = opts.max_step.unwrap_or(span).min(span);
    let tol = opts.tolerance;

    let mut t = t0;
    let mut y = y0;
    let mut k1 = sys.rhs(t, &y);
    let mut h = opts
        .initial_step
        .map(f64::abs)
        .unwrap_or_else(|| initial_step(sys, t0, &y0, &k1, dir, h_max, tol));
    let mut g_prev: Vec<f64> = events.iter().map(|e| e.value(t, &y)).collect();
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        let remaining = (t_end - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        if sol.segments.len() >= opts.max_steps {
            return Err(Error::MaxSteps(opts.max_steps));
        }
        let min_step = UNDERFLOW * t.abs().max(opts.time_scale);
        let mut final_step = false;
        if h >= remaining || remaining - h < min_step {
            h = remaining;
            final_step = true;
        }
        if h < min_step && !final_step {
            return Err(Error::StepUnderflow { t, h });
        }
        let hs = dir * h;

        let k2 = sys.rhs(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = sys.rhs(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = sys.rhs(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = sys.rhs(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = sys.rhs(
            t + hs,
            &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if final_step { t_end } else { t + hs };
        let k7 = sys.rhs(t_new, &y_new);
        let err_vec: [f64; N] =
            std::array::from_fn(|i| hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]));
        let err = error_norm(&err_vec, &y, &y_new, tol);
        let finite = y_new.iter().all(|v| v.is_finite()) && err.is_finite();

        let fac11 = if finite { err.powf(EXPO1) } else { f64::INFINITY };
        if finite && err <= 1.0 {
            let mut coeffs = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                coeffs[0][i] = y[i];
                coeffs[1][i] = ydiff;
                coeffs[2][i] = bspl;
                coeffs[3][i] = ydiff - hs * k7[i] - bspl;
                coeffs[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let seg = DenseSegment { t0: t, h: hs, coeffs };
            sol.segments.push(seg);

            let g_new: Vec<f64> = events.iter().map(|e| e.value(t_new, &y_new)).collect();
            let mut hits = locate_events(events, &g_prev, &g_new, &seg, t, t_new, opts);
            hits.sort_by(|a, b| ((a.t - t) * dir).total_cmp(&((b.t - t) * dir)));
            if let Some(first_terminal) = hits.iter().position(|h| events[h.index].terminal) {
                let stop = hits[first_terminal];
                sol.events.extend_from_slice(&hits[..=first_terminal]);
                sol.terminal = Some(stop);
                sol.t.push(stop.t);
                sol.y.push(stop.y);
                return Ok(sol);
            }
            sol.events.extend(hits);
            g_prev = g_new;

            sol.t.push(t_new);
            sol.y.push(y_new);
            t = t_new;
            y = y_new;
            k1 = k7;

            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac / SAFETY));
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            let shrink = if finite {
                (1.0 / FAC_MIN).min(fac11 / SAFETY)
            } else {
                1.0 / FAC_MIN
            };
            h /= shrink;
            last_rejected = true;
            sol.rejected_steps += 1;
        }
    }
    Ok(sol)
}

fn locate_events<const N: usize>(
    events: &[Event<'_, N>],
    g_prev: &[f64],
    g_new: &[f64],
    seg: &DenseSegment<N>,
    t0: f64,
    t1: f64,
    opts: &StepperOptions,
) -> Vec<EventHit<N>> {
    let mut hits = Vec::new();
    for (index, event) in events.iter().enumerate() {
        if !event.crossing.matches(g_prev[index], g_new[index]) {
            continue;
        }
        let (mut lo, mut hi) = (t0, t1);
        let g_lo_sign = g_prev[index].signum();
        for _ in 0..MAX_BISECTIONS {
            let width = (hi - lo).abs();
            if width <= opts.event_rtol * hi.abs().max(opts.time_scale) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            let g_mid = event.value(mid, &seg.eval(mid));
            if g_mid.signum() == g_lo_sign && g_mid != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let y = seg.eval(t);
        if event.admits(t, &y) {
            hits.push(EventHit { index, t, y });
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64; 1]) -> [f64; 1] {
        [-y[0]]
    }

    #[test]
    fn exponential_decay_accuracy() {
        let sol = integrate(&decay, 0.0, [1.0], 5.0, &[], &StepperOptions::new(1e-10)).unwrap();
        let (t, y) = sol.last();
        assert_eq!(t, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        let sol = integrate(&decay, 0.0, [1.0], -3.0, &[], &StepperOptions::new(1e-11)).unwrap();
        let (_, y) = sol.last();
        assert!((y[0] / 3.0f64.exp() - 1.0).abs() < 1e-9);
        let mid = sol.interpolate(-1.5).unwrap();
        assert!((mid[0] / 1.5f64.exp() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_event_and_dense_output() {
        let osc = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let events = [Event::new(Crossing::Falling, |_t, y: &[f64; 2]| y[0])];
        let sol = integrate(&osc, 0.0, [1.0, 0.0], 10.0, &events, &StepperOptions::new(1e-12)).unwrap();
        let hit = sol.terminal.unwrap();
        assert!((hit.t - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        let y = sol.interpolate(1.0).unwrap();
        assert!((y[0] - 1.0f64.cos()).abs() < 1e-9);
        assert!(sol.interpolate(2.0).is_none());
    }

    #[test]
    fn non_terminal_events_and_guard() {
        let osc = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let events = [Event::new(Crossing::Either, |_t, y: &[f64; 2]| y[0])
            .with_guard(|_t, y: &[f64; 2]| y[1] < 0.0)
            .non_terminal()];
        let sol = integrate(
            &osc,
            0.0,
            [1.0, 0.0],
            10.0,
            &events,
            &StepperOptions::new(1e-12).with_max_step(0.5),
        )
        .unwrap();
        // Downward zeros of cos on (0, 10): π/2 and 5π/2.
        let ts: Vec<f64> = sol.events.iter().map(|e| e.t).collect();
        assert_eq!(ts.len(), 2);
        assert!((ts[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!((ts[1] - 2.5 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn deterministic_runs() {
        let osc = |_t: f64, y: &[f64; 2]| [y[1], -y[0] * y[0].abs()];
        let a = integrate(&osc, 0.0, [1.0, 0.3], 7.0, &[], &StepperOptions::new(1e-10)).unwrap();
        let b = integrate(&osc, 0.0, [1.0, 0.3], 7.0, &[], &StepperOptions::new(1e-10)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², y(0) = 1 blows up at t = 1.
        let f = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let err = integrate(&f, 0.0, [1.0], 2.0, &[], &StepperOptions::new(1e-10)).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. } | Error::MaxSteps(_)));
    }
}
