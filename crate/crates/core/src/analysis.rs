//! Diagnostics of shots relative to the singular solution: oscillation
//! counts, the monotone approach from below, the pointwise bound on Dirichlet
//! profiles, and the regularity verdict for the extremal solution.

use serde::Serialize;

use crate::emden_fowler::norm;
use crate::error::{Error, Result};
use crate::exponents::{classify_regime, hardy_constant, k0, ProblemParams, RegimeKind};
use crate::shooting::BranchPoint;
use crate::spectrum::{fixed_point_w0, WPoint};

/// Fraction of `|w⁽⁰⁾|` beyond which a trajectory counts as departed.
pub const DEFAULT_DEPARTURE_FRACTION: f64 = 0.5;
pub const POINTWISE_BOUND_SLACK: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationReport {
    pub sign_changes: usize,
    pub crossing_radii: Vec<f64>,
    /// `w₁/K₀^{1/(p-1)}` (equivalently `U/u_s`) at the closest approach to `w⁽⁰⁾`.
    pub final_ratio: f64,
    pub reliable_r_max: f64,
}

impl OscillationReport {
    /// Crossing positions in `s = ln r`.
    pub fn crossing_s(&self) -> Vec<f64> {
        self.crossing_radii.iter().map(|r| r.ln()).collect()
    }
}

/// Portion of a trajectory trusted for comparisons with `w⁽⁰⁾`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliableWindow {
    /// Index of the closest approach to `w⁽⁰⁾`.
    pub closest: usize,
    pub closest_distance: f64,
    /// Last index inside the window.
    pub end: usize,
}

/// Window from the start of `points` to the first departure beyond
/// `fraction·|w⁽⁰⁾|` after the closest approach (or to the end).
pub fn reliable_window(params: &ProblemParams, points: &[WPoint], fraction: f64) -> Result<ReliableWindow> {
    let w0 = fixed_point_w0(params);
    let threshold = fraction * norm(&w0.w);
    let dist: Vec<f64> = points
        .iter()
        .map(|pt| norm(&std::array::from_fn(|i| pt.w[i] - w0.w[i])))
        .collect();
    let (closest, &closest_distance) = dist
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::NotApplicable("empty trajectory".into()))?;
    if !(closest_distance < threshold) {
        return Err(Error::NotApplicable(format!(
            "trajectory never comes within {threshold} of the singular solution (closest {closest_distance})"
        )));
    }
    let end = (closest..dist.len())
        .find(|&i| dist[i] > threshold)
        .unwrap_or(dist.len() - 1);
    Ok(ReliableWindow {
        closest,
        closest_distance,
        end,
    })
}

pub fn oscillation_report(params: &ProblemParams, points: &[WPoint]) -> Result<OscillationReport> {
    oscillation_report_with(params, points, DEFAULT_DEPARTURE_FRACTION)
}

/// Sign changes of `w₁ - K₀^{1/(p-1)}` over the reliable window, located by
/// linear interpolation between samples.
pub fn oscillation_report_with(params: &ProblemParams, points: &[WPoint], fraction: f64) -> Result<OscillationReport> {
    let window = reliable_window(params, points, fraction)?;
    let k = params.singular_amplitude();
    let crossing_radii: Vec<f64> = points[..=window.end]
        .windows(2)
        .filter_map(|pair| {
            let (a, b) = (pair[0].w[0] - k, pair[1].w[0] - k);
            if a == 0.0 || a * b < 0.0 {
                Some((pair[0].s + (pair[1].s - pair[0].s) * a / (a - b)).exp())
            } else {
                None
            }
        })
        .collect();
    Ok(OscillationReport {
        sign_changes: crossing_radii.len(),
        crossing_radii,
        final_ratio: points[window.closest].w[0] / k,
        reliable_r_max: points[window.end].s.exp(),
    })
}

fn require_monotone(params: &ProblemParams) -> Result<()> {
    let regime = classify_regime(params);
    if regime.kind != RegimeKind::MonotoneSupercritical {
        return Err(Error::Precondition(format!(
            "n = {}, p = {} lies in the oscillatory regime (p_c = {:?})",
            params.n(),
            params.p(),
            regime.p_c
        )));
    }
    Ok(())
}

/// `w₁ < K₀^{1/(p-1)}` at every sample of the reliable window.
pub fn monotone_below_check(params: &ProblemParams, points: &[WPoint]) -> Result<bool> {
    require_monotone(params)?;
    let window = reliable_window(params, points, DEFAULT_DEPARTURE_FRACTION)?;
    let k = params.singular_amplitude();
    Ok(points[..=window.end].iter().all(|pt| pt.w[0] < k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseBoundReport {
    /// Maximum over the grid of `(1+u(x))·x^{4/(p-1)}·(λ/λ̂*)^{1/(p-1)}`.
    pub max_value: f64,
    pub argmax_x: f64,
    pub within_bound: bool,
}

/// Soft check of `u(x) ≤ (λ̂*/λ)^{1/(p-1)} x^{-4/(p-1)} - 1` on a profile grid.
pub fn pointwise_bound_check(
    params: &ProblemParams,
    point: &BranchPoint,
    profile: &[(f64, f64)],
    lambda_star_est: f64,
) -> PointwiseBoundReport {
    let a = params.decay();
    let scale = (point.lambda / lambda_star_est).powf(1.0 / (params.p() - 1.0));
    let (argmax_x, max_value) = profile
        .iter()
        .map(|&(x, u)| (x, (1.0 + u) * x.powf(a) * scale))
        .fold((0.0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    PointwiseBoundReport {
        max_value,
        argmax_x,
        within_bound: max_value <= 1.0 + POINTWISE_BOUND_SLACK,
    }
}

/// `(K₀/λ)^{1/(p-1)} x^{-4/(p-1)} - 1`, the lower profile attached to a parameter `λ`.
pub fn singular_lower_profile(params: &ProblemParams, lambda: f64, x: f64) -> f64 {
    (k0(params) / lambda).powf(1.0 / (params.p() - 1.0)) * x.powf(-params.decay()) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ExtremalRegular,
    NoConclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityVerdict {
    #[serde(rename = "pK0")]
    pub p_k0: f64,
    pub hardy: f64,
    /// `None` when `p_c` is infinite.
    pub p_c: Option<f64>,
    pub verdict: Verdict,
}

pub fn extremal_regularity_verdict(params: &ProblemParams) -> RegularityVerdict {
    let p_k0 = params.p() * k0(params);
    let hardy = hardy_constant(params.n()).expect("dimension validated by ProblemParams");
    let regime = classify_regime(params);
    let verdict = if p_k0 > hardy && regime.kind == RegimeKind::OscillatorySupercritical {
        Verdict::ExtremalRegular
    } else {
        Verdict::NoConclusion
    };
    RegularityVerdict {
        p_k0,
        hardy,
        p_c: regime.p_c.finite(),
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emden_fowler::linear_surrogate_orbit;
    use crate::exponents::critical_exponent_pc;
    use crate::shooting::{branch_shot, dirichlet_profile, ShotConfig, PROFILE_POINTS};
    use crate::spectrum::eigenvalues;
    use approx::assert_relative_eq;

    fn p510() -> ProblemParams {
        ProblemParams::new(5, 10.0).unwrap()
    }

    fn pc(n: u32) -> f64 {
        critical_exponent_pc(n, 1e-12).unwrap().finite().unwrap()
    }

    #[test]
    fn verdict_examples() {
        let v = extremal_regularity_verdict(&p510());
        assert_relative_eq!(v.p_k0, 15.424, max_relative = 1e-4);
        assert_eq!(v.hardy, 1.5625);
        assert_eq!(v.verdict, Verdict::ExtremalRegular);
        assert_eq!(v.p_c, None);

        let v = extremal_regularity_verdict(&ProblemParams::new(13, 2.0).unwrap());
        assert_relative_eq!(v.p_k0, 1680.0, max_relative = 1e-13);
        assert_eq!(v.hardy, 855.5625);
        assert_eq!(v.verdict, Verdict::ExtremalRegular);

        let v = extremal_regularity_verdict(&ProblemParams::new(13, 1.5 * pc(13)).unwrap());
        assert_eq!(v.verdict, Verdict::NoConclusion);
    }

    #[test]
    fn monotone_check_gated_by_regime() {
        let params = ProblemParams::new(13, 2.0).unwrap();
        let w0 = fixed_point_w0(&params);
        assert!(matches!(
            monotone_below_check(&params, &[w0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn window_requires_approach() {
        let params = p510();
        let far = [WPoint::new(0.0, [10.0, 10.0, 10.0, 10.0])];
        assert!(matches!(
            oscillation_report(&params, &far),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn surrogate_crossings() {
        for (n, p) in [(5, 10.0), (13, 2.0)] {
            let params = ProblemParams::new(n, p).unwrap();
            let half = std::f64::consts::PI / eigenvalues(&params).nu[2].im;
            let orbit = linear_surrogate_orbit(&params, 1e-6, 6.0 * half, 1e-12).unwrap();
            let rep = oscillation_report(&params, &orbit).unwrap();
            assert!(rep.sign_changes >= 5);
            assert_eq!(rep.sign_changes, rep.crossing_radii.len());
            let s = rep.crossing_s();
            for pair in s.windows(2) {
                assert!(((pair[1] - pair[0]) / half - 1.0).abs() < 0.05);
            }
            assert_relative_eq!(rep.final_ratio, 1.0, epsilon = 1e-5);
        }
    }

    #[test]
    fn pointwise_bound_boundary_and_centre() {
        let params = p510();
        let (bp, shot) = branch_shot(&params, -0.05, &ShotConfig::default()).unwrap();
        let profile = dirichlet_profile(&shot, &bp, PROFILE_POINTS).unwrap();
        // With λ̂* = λ the boundary value is exactly 1.
        let rep = pointwise_bound_check(&params, &bp, &profile[PROFILE_POINTS - 1..], bp.lambda);
        assert_relative_eq!(rep.max_value, 1.0, max_relative = 1e-10);
        let rep = pointwise_bound_check(&params, &bp, &profile[..1], bp.lambda);
        assert_eq!(rep.max_value, 0.0);
        // The interior maximum of x^a(1+u) equals max w₁ scaled by λ^{-1/(p-1)}.
        let rep = pointwise_bound_check(&params, &bp, &profile, bp.lambda);
        let q = params.p() - 1.0;
        let wmax = shot
            .w_points()
            .iter()
            .filter(|pt| pt.s <= bp.r_gamma.ln())
            .map(|pt| pt.w[0])
            .fold(0.0, f64::max);
        assert!(rep.max_value <= wmax / bp.lambda.powf(1.0 / q) * (1.0 + 1e-9));
        assert!(rep.max_value >= 1.0);
    }

    #[test]
    fn lower_profile_positive_near_centre() {
        let params = p510();
        for x in [1e-3, 1e-2, 0.1] {
            let v = singular_lower_profile(&params, 7.06, x);
            assert!(v.is_finite() && v > 0.0);
        }
    }
}
