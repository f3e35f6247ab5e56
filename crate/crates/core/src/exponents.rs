//! Closed-form constants of the supercritical biharmonic problem
//! `Δ²u = |u|^{p-1}u` in dimension `n`: the Sobolev threshold, the
//! coefficient of the singular solution, the Hardy–Rellich constant and the
//! second critical exponent separating oscillatory from monotone convergence
//! to the singular solution.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest admissible dimension.
pub const MIN_DIMENSION: u32 = 5;

/// Smallest dimension for which the second critical exponent is finite.
pub const FINITE_PC_DIMENSION: u32 = 13;

/// First point of the multiplicative scan for `p_c`, relative to the Sobolev exponent.
const PC_SCAN_START: f64 = 1.0001;
const PC_SCAN_FACTOR: f64 = 1.5;
const PC_SCAN_LIMIT: f64 = 1e6;

/// Dimension and exponent of a supercritical problem.
///
/// Construction certifies `n >= 5` and `p > (n+4)/(n-4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    n: u32,
    p: f64,
}

impl ProblemParams {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        let p_s = critical_sobolev_exponent(n)?;
        if !p.is_finite() || p <= p_s {
            return Err(Error::Domain(format!(
                "exponent p = {p} is not supercritical for n = {n} (need p > {p_s})"
            )));
        }
        Ok(Self { n, p })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Dimension as a float, for use in formulas.
    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Decay exponent `4/(p-1)` of the singular solution.
    pub fn decay(&self) -> f64 {
        4.0 / (self.p - 1.0)
    }

    /// Amplitude `K₀^{1/(p-1)}` of the singular solution `u_s(r) = K₀^{1/(p-1)} r^{-4/(p-1)}`.
    pub fn singular_amplitude(&self) -> f64 {
        k0(self).powf(1.0 / (self.p - 1.0))
    }

    /// The singular solution evaluated at radius `r`.
    pub fn singular_solution(&self, r: f64) -> f64 {
        self.singular_amplitude() * r.powf(-self.decay())
    }
}

/// Value of the second critical exponent. For `5 <= n <= 12` there is no
/// finite `p_c` and the oscillatory regime extends to all supercritical `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value")]
pub enum CriticalExponent {
    Finite(f64),
    Infinite,
}

impl CriticalExponent {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            CriticalExponent::Finite(v) => Some(v),
            CriticalExponent::Infinite => None,
        }
    }

    /// `p < p_c`, treating an infinite `p_c` as larger than every `p`.
    pub fn exceeds(&self, p: f64) -> bool {
        match *self {
            CriticalExponent::Finite(pc) => p < pc,
            CriticalExponent::Infinite => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeKind {
    /// Entire solutions oscillate infinitely often around `u_s`.
    OscillatorySupercritical,
    /// Entire solutions converge to `u_s` from below (`n >= 13`, `p >= p_c`).
    MonotoneSupercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub kind: RegimeKind,
    pub p_c: CriticalExponent,
}

fn check_dimension(n: u32) -> Result<()> {
    if n < MIN_DIMENSION {
        Err(Error::Domain(format!(
            "dimension n = {n} must be at least {MIN_DIMENSION}"
        )))
    } else {
        Ok(())
    }
}

/// Sobolev exponent `(n+4)/(n-4)`.
pub fn critical_sobolev_exponent(n: u32) -> Result<f64> {
    check_dimension(n)?;
    let nf = f64::from(n);
    Ok((nf + 4.0) / (nf - 4.0))
}

/// `K₀(n, p)` evaluated for any real `p > 1`; no supercriticality check.
fn k0_raw(n: f64, p: f64) -> f64 {
    let a = 4.0 / (p - 1.0);
    a * (a + 2.0) * (n - 2.0 - a) * (n - 4.0 - a)
}

/// Coefficient `K₀` making `u_s` an exact solution.
pub fn k0(params: &ProblemParams) -> f64 {
    k0_raw(params.nf(), params.p())
}

/// Optimal constant `n²(n-4)²/16` of the Hardy–Rellich inequality.
pub fn hardy_constant(n: u32) -> Result<f64> {
    check_dimension(n)?;
    let nf = f64::from(n);
    Ok(nf * nf * (nf - 4.0) * (nf - 4.0) / 16.0)
}

/// `p·K₀(n,p) - n²(n-4)²/16`; positive exactly in the oscillatory range.
pub fn hardy_gap(n: u32, p: f64) -> Result<f64> {
    Ok(p * k0_raw(f64::from(n), p) - hardy_constant(n)?)
}

/// Second critical exponent `p_c(n)`: the root of `p·K₀(n,p) = n²(n-4)²/16`
/// above the Sobolev exponent, bisected to a bracket narrower than `tol`.
///
/// The root is first bracketed by a multiplicative scan; no monotonicity of
/// the residual is assumed.
pub fn critical_exponent_pc(n: u32, tol: f64) -> Result<CriticalExponent> {
    check_dimension(n)?;
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    if n < FINITE_PC_DIMENSION {
        return Ok(CriticalExponent::Infinite);
    }
    let start = PC_SCAN_START * critical_sobolev_exponent(n)?;
    let f = |p: f64| hardy_gap(n, p).expect("dimension already checked");

    let mut lo = start;
    let mut f_lo = f(lo);
    let mut hi = lo * PC_SCAN_FACTOR;
    let mut f_hi = f(hi);
    while f_lo.signum() == f_hi.signum() {
        if hi > PC_SCAN_LIMIT {
            return Err(Error::Bracket {
                lo: start,
                hi,
                detail: format!("p·K₀ - Hardy keeps the sign of {f_lo:e} for n = {n}"),
            });
        }
        lo = hi;
        f_lo = f_hi;
        hi *= PC_SCAN_FACTOR;
        f_hi = f(hi);
    }

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(CriticalExponent::Finite(mid));
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalExponent::Finite(0.5 * (lo + hi)))
}

/// Default bisection tolerance used when classifying regimes.
pub const PC_TOLERANCE: f64 = 1e-12;

pub fn classify_regime(params: &ProblemParams) -> Regime {
    let p_c = critical_exponent_pc(params.n(), PC_TOLERANCE).expect("p_c is bracketed for every admissible dimension");
    let kind = if p_c.exceeds(params.p()) {
        RegimeKind::OscillatorySupercritical
    } else {
        RegimeKind::MonotoneSupercritical
    };
    Regime { kind, p_c }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sobolev_exponent_values() {
        assert_eq!(critical_sobolev_exponent(5).unwrap(), 9.0);
        assert_eq!(critical_sobolev_exponent(12).unwrap(), 2.0);
        assert_relative_eq!(critical_sobolev_exponent(13).unwrap(), 17.0 / 9.0, max_relative = 1e-15);
        assert!(matches!(critical_sobolev_exponent(4), Err(Error::Domain(_))));
    }

    #[test]
    fn params_reject_subcritical_and_low_dimension() {
        assert!(ProblemParams::new(4, 10.0).is_err());
        assert!(ProblemParams::new(5, 9.0).is_err());
        assert!(ProblemParams::new(5, f64::NAN).is_err());
        assert!(ProblemParams::new(5, 9.000001).is_ok());
    }

    #[test]
    fn k0_exact_rationals() {
        let p = ProblemParams::new(5, 10.0).unwrap();
        assert_relative_eq!(k0(&p), 10120.0 / 6561.0, max_relative = 1e-14);
        let p = ProblemParams::new(13, 2.0).unwrap();
        assert_relative_eq!(k0(&p), 840.0, max_relative = 1e-14);
    }

    #[test]
    fn k0_decreases_to_zero_in_p() {
        let mut prev = f64::INFINITY;
        for &p in &[9.5, 10.0, 20.0, 100.0, 1e3, 1e5] {
            let k = k0(&ProblemParams::new(5, p).unwrap());
            assert!(k > 0.0 && k < prev);
            prev = k;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn hardy_values() {
        assert_eq!(hardy_constant(5).unwrap(), 1.5625);
        assert_eq!(hardy_constant(8).unwrap(), 64.0);
        assert_eq!(hardy_constant(13).unwrap(), 855.5625);
        assert!(hardy_constant(3).is_err());
    }

    #[test]
    fn pc_absent_up_to_twelve() {
        for n in 5..=12 {
            assert_eq!(critical_exponent_pc(n, 1e-12).unwrap(), CriticalExponent::Infinite);
        }
    }

    #[test]
    fn pc_thirteen_residual_and_location() {
        let pc = critical_exponent_pc(13, 1e-12).unwrap().finite().unwrap();
        let hardy = hardy_constant(13).unwrap();
        assert!(pc > 17.0 / 9.0);
        assert!(hardy_gap(13, pc).unwrap().abs() < 1e-9 * hardy);
        // p = 2 lies below p_c: 2·840 = 1680 > 855.5625.
        assert!(hardy_gap(13, 2.0).unwrap() > 0.0);
        assert!(2.0 < pc);
    }

    #[test]
    fn regime_examples() {
        let r = classify_regime(&ProblemParams::new(5, 10.0).unwrap());
        assert_eq!(r.kind, RegimeKind::OscillatorySupercritical);
        assert_eq!(r.p_c, CriticalExponent::Infinite);

        let r = classify_regime(&ProblemParams::new(13, 2.0).unwrap());
        assert_eq!(r.kind, RegimeKind::OscillatorySupercritical);

        let pc = r.p_c.finite().unwrap();
        let r = classify_regime(&ProblemParams::new(13, 2.0 * pc).unwrap());
        assert_eq!(r.kind, RegimeKind::MonotoneSupercritical);
    }

    #[test]
    fn pc_rejects_bad_tolerance() {
        assert!(matches!(critical_exponent_pc(13, 0.0), Err(Error::Parameter(_))));
    }
}
