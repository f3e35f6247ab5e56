//! Shooting on the centre curvature `γ = U''(0)`: classification of shots
//! by the trichotomy (zero crossing, positive minimum, global), bisection for
//! the critical `γ̄`, and the Dirichlet branch `(λ_γ, u_γ(0))` obtained by
//! rescaling each shot to the unit ball at its first minimum.

use rayon::prelude::*;
use serde::Serialize;

use crate::emden_fowler::{integrate_autonomous, radial_to_w, w_to_radial, AutonomousEvent, AutonomousTrajectory};
use crate::error::{Error, Result};
use crate::exponents::ProblemParams;
use crate::radial::{
    integrate_radial, series_launch_from, series_state, RadialState, TerminalEvent, Trajectory, DEFAULT_LAUNCH_RADIUS,
};
use crate::spectrum::{eigenvalues, fixed_point_w0, nu1_eigenvector, WPoint};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_R_MAX: f64 = 1e3;
/// Outer radius for searches near `γ̄`, where shots linger near the singular
/// solution for many decades of `r` before committing.
pub const SEARCH_R_MAX: f64 = 1e30;
pub const DEFAULT_SWITCH_RADIUS: f64 = 1.0;
pub const MIN_GAMMA_BAR_REL_TOL: f64 = 1e-14;
pub const PROFILE_POINTS: usize = 512;

const INITIAL_BRACKET: (f64, f64) = (-1.0, -1e-3);
const BRACKET_LIMIT: (f64, f64) = (-1e6, -1e-12);
const BRACKET_FACTOR: f64 = 10.0;

/// Span in `s` allowed for the unstable-manifold orbit to reach `w₂ = 0`.
const LAMBDA_SIGMA_SPAN: f64 = 50.0;
const LAMBDA_SIGMA_EPS_RANGE: (f64, f64) = (1e-10, 1e-6);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag")]
pub enum ShotClass {
    HitsZero { r1: f64 },
    DerivativeVanishes { r_gamma: f64, u_at_r: f64 },
    Undetermined { r_max: f64 },
}

impl ShotClass {
    fn same_kind(&self, other: &ShotClass) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotConfig {
    pub tol: f64,
    pub r_max: f64,
    pub r0: f64,
    /// Radius at which integration moves to the autonomous `s`-coordinates.
    pub switch_radius: f64,
}

impl Default for ShotConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            r_max: DEFAULT_R_MAX,
            r0: DEFAULT_LAUNCH_RADIUS,
            switch_radius: DEFAULT_SWITCH_RADIUS,
        }
    }
}

impl ShotConfig {
    pub fn new(tol: f64, r_max: f64) -> Self {
        Self {
            tol,
            r_max,
            ..Self::default()
        }
    }

    /// Configuration for shots close to `γ̄`.
    pub fn search(tol: f64) -> Self {
        Self::new(tol, SEARCH_R_MAX)
    }
}

/// A classified shot together with the stored trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub centre: f64,
    pub gamma: f64,
    pub class: ShotClass,
    pub radial: Trajectory,
    pub autonomous: Option<AutonomousTrajectory>,
    params: ProblemParams,
}

impl Shot {
    /// The shot in `w`-coordinates at every accepted step of both phases.
    pub fn w_points(&self) -> Vec<WPoint> {
        let mut points: Vec<WPoint> = self
            .radial
            .states
            .iter()
            .map(|s| radial_to_w(&self.params, s).expect("radial samples have r > 0"))
            .collect();
        if let Some(auto) = &self.autonomous {
            points.extend(auto.points.iter().skip(1).copied());
        }
        points
    }

    /// Radial state at `r` by dense output, using the series below the launch radius.
    pub fn state_at(&self, r: f64) -> Option<RadialState> {
        let first = self.radial.first();
        if r <= 0.0 {
            return None;
        }
        if r < first.r {
            return Some(series_state(&self.params, self.centre, self.gamma, r));
        }
        if r <= self.radial.last().r {
            return self.radial.state_at(r);
        }
        self.autonomous
            .as_ref()?
            .point_at(r.ln())
            .map(|w| w_to_radial(&self.params, &w))
    }

    /// Largest radius covered by the stored trajectory.
    pub fn r_end(&self) -> f64 {
        match &self.autonomous {
            Some(auto) => auto.last().s.exp(),
            None => self.radial.last().r,
        }
    }
}

pub fn shoot(params: &ProblemParams, gamma: f64, cfg: &ShotConfig) -> Result<Shot> {
    shoot_from(params, 1.0, gamma, cfg)
}

/// Shot with `U(0) = centre`, `U''(0) = gamma`.
pub fn shoot_from(params: &ProblemParams, centre: f64, gamma: f64, cfg: &ShotConfig) -> Result<Shot> {
    if !(cfg.r_max > cfg.r0) {
        return Err(Error::Parameter(format!(
            "r_max = {} must exceed r0 = {}",
            cfg.r_max, cfg.r0
        )));
    }
    let start = series_launch_from(params, centre, gamma, cfg.r0)?;
    let switch = cfg.switch_radius.min(cfg.r_max);
    let radial = integrate_radial(params, start, switch, cfg.tol)?;
    let shot = |class, autonomous| Shot {
        centre,
        gamma,
        class,
        radial: radial.clone(),
        autonomous,
        params: *params,
    };

    match radial.terminal_event {
        TerminalEvent::UCrossedZero(r1) => return Ok(shot(ShotClass::HitsZero { r1 }, None)),
        TerminalEvent::UPrimeVanished(r_gamma) => {
            let u_at_r = radial.last().u;
            return Ok(shot(ShotClass::DerivativeVanishes { r_gamma, u_at_r }, None));
        }
        TerminalEvent::BlowUp(r) => {
            return Err(Error::Classification(format!(
                "shot gamma = {gamma} reached the blow-up threshold at r = {r} before any zero of U or U'"
            )))
        }
        TerminalEvent::ReachedRMax if switch >= cfg.r_max => {
            return Ok(shot(ShotClass::Undetermined { r_max: cfg.r_max }, None))
        }
        TerminalEvent::ReachedRMax => {}
    }

    let w_start = radial_to_w(params, radial.last())?;
    let auto = integrate_autonomous(params, w_start, cfg.r_max.ln(), cfg.tol)?;
    let a = params.decay();
    let class = match auto.terminal_event {
        AutonomousEvent::W1Zero(s) => ShotClass::HitsZero { r1: s.exp() },
        AutonomousEvent::W2Zero(s) => {
            let w1 = auto.last().w[0];
            ShotClass::DerivativeVanishes {
                r_gamma: s.exp(),
                u_at_r: w1 * (-a * s).exp(),
            }
        }
        AutonomousEvent::ReachedEnd => ShotClass::Undetermined { r_max: cfg.r_max },
        AutonomousEvent::NormExceeded(s) => {
            return Err(Error::Classification(format!(
                "shot gamma = {gamma} left every bounded region at s = {s} without a zero of w1 or w2"
            )))
        }
    };
    Ok(shot(class, Some(auto)))
}

pub fn classify_shot(params: &ProblemParams, gamma: f64, tol: f64, r_max: f64) -> Result<ShotClass> {
    Ok(shoot(params, gamma, &ShotConfig::new(tol, r_max))?.class)
}

/// Final bracket of the critical curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaBar {
    /// Largest tested value classified `HitsZero`.
    pub lo: f64,
    /// Smallest tested value classified `DerivativeVanishes`.
    pub hi: f64,
    pub value: f64,
}

impl GammaBar {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn relative_width(&self) -> f64 {
        self.width() / self.value.abs()
    }
}

pub fn find_gamma_bar(params: &ProblemParams, rel_tol: f64) -> Result<GammaBar> {
    find_gamma_bar_with(params, rel_tol, &ShotConfig::search(DEFAULT_TOL))
}

/// Bisection on the shot classification, after geometric bracket expansion.
pub fn find_gamma_bar_with(params: &ProblemParams, rel_tol: f64, cfg: &ShotConfig) -> Result<GammaBar> {
    if !(rel_tol >= MIN_GAMMA_BAR_REL_TOL) {
        return Err(Error::Parameter(format!(
            "rel_tol = {rel_tol} below the attainable {MIN_GAMMA_BAR_REL_TOL}"
        )));
    }
    let classify = |g: f64| shoot(params, g, cfg).map(|s| s.class);
    let is_zero = |c: &ShotClass| matches!(c, ShotClass::HitsZero { .. });
    let is_min = |c: &ShotClass| matches!(c, ShotClass::DerivativeVanishes { .. });

    let (mut lo, mut hi) = INITIAL_BRACKET;
    let mut c_lo = classify(lo)?;
    let mut c_hi = classify(hi)?;
    while !is_zero(&c_lo) {
        if lo <= BRACKET_LIMIT.0 {
            return Err(bracket_failure(lo, hi, &c_lo, &c_hi));
        }
        lo *= BRACKET_FACTOR;
        c_lo = classify(lo)?;
    }
    while !is_min(&c_hi) {
        if hi >= BRACKET_LIMIT.1 {
            return Err(bracket_failure(lo, hi, &c_lo, &c_hi));
        }
        hi /= BRACKET_FACTOR;
        c_hi = classify(hi)?;
    }
    // Tighten from the expansion history: the previous endpoint may already be inside.
    loop {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= rel_tol * mid.abs() || mid <= lo || mid >= hi {
            break;
        }
        let c = classify(mid)?;
        if is_zero(&c) {
            lo = mid;
        } else if is_min(&c) {
            hi = mid;
        } else {
            // The shot stayed near the singular solution up to r_max: the
            // bracket cannot be resolved further at this outer radius.
            break;
        }
    }
    Ok(GammaBar {
        lo,
        hi,
        value: 0.5 * (lo + hi),
    })
}

fn bracket_failure(lo: f64, hi: f64, c_lo: &ShotClass, c_hi: &ShotClass) -> Error {
    Error::Bracket {
        lo,
        hi,
        detail: format!(
            "classification did not change across the expanded bracket (lo: {c_lo:?}, hi: {c_hi:?}); same kind: {}",
            c_lo.same_kind(c_hi)
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchPoint {
    pub gamma: f64,
    #[serde(rename = "R_gamma")]
    pub r_gamma: f64,
    #[serde(rename = "U_at_R")]
    pub u_at_r: f64,
    pub lambda: f64,
    pub u0: f64,
}

impl BranchPoint {
    fn from_minimum(params: &ProblemParams, gamma: f64, r_gamma: f64, u_at_r: f64) -> Self {
        Self {
            gamma,
            r_gamma,
            u_at_r,
            lambda: lambda_of(params, r_gamma, u_at_r),
            u0: 1.0 / u_at_r - 1.0,
        }
    }
}

/// `λ = R⁴·U(R)^{p-1}`.
pub fn lambda_of(params: &ProblemParams, r: f64, u_at_r: f64) -> f64 {
    r.powi(4) * u_at_r.powf(params.p() - 1.0)
}

pub fn branch_point(params: &ProblemParams, gamma: f64, cfg: &ShotConfig) -> Result<BranchPoint> {
    Ok(branch_shot(params, gamma, cfg)?.0)
}

/// Branch point together with the shot it was read from.
pub fn branch_shot(params: &ProblemParams, gamma: f64, cfg: &ShotConfig) -> Result<(BranchPoint, Shot)> {
    let shot = shoot(params, gamma, cfg)?;
    match shot.class {
        ShotClass::DerivativeVanishes { r_gamma, u_at_r } => {
            Ok((BranchPoint::from_minimum(params, gamma, r_gamma, u_at_r), shot))
        }
        other => Err(Error::Classification(format!(
            "gamma = {gamma} gives {other:?}; a branch point needs DerivativeVanishes"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub gamma_bar: GammaBar,
    /// Ordered by decreasing offset, i.e. decreasing `γ` towards `γ̄`.
    pub points: Vec<BranchPoint>,
    /// Descriptions of places where `R_γ` failed to decrease strictly in `γ`.
    pub violations: Vec<String>,
}

impl Branch {
    /// Largest `λ` on the branch, the stand-in for the extremal parameter.
    pub fn lambda_star_estimate(&self) -> f64 {
        self.points.iter().map(|p| p.lambda).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Branch points at `γ = γ̄ + offset` for decreasing positive offsets, evaluated in parallel.
pub fn build_branch(params: &ProblemParams, gamma_bar: &GammaBar, offsets: &[f64], cfg: &ShotConfig) -> Result<Branch> {
    check_offsets(gamma_bar, offsets)?;
    let points = offsets
        .par_iter()
        .map(|&d| branch_point(params, gamma_bar.value + d, cfg))
        .collect::<Result<Vec<_>>>()?;
    let violations = points
        .windows(2)
        .filter(|pair| !(pair[1].r_gamma > pair[0].r_gamma))
        .map(|pair| {
            format!(
                "R_gamma not decreasing in gamma: R({}) = {} vs R({}) = {}",
                pair[1].gamma, pair[1].r_gamma, pair[0].gamma, pair[0].r_gamma
            )
        })
        .collect();
    Ok(Branch {
        gamma_bar: *gamma_bar,
        points,
        violations,
    })
}

fn check_offsets(gamma_bar: &GammaBar, offsets: &[f64]) -> Result<()> {
    if offsets.is_empty() {
        return Err(Error::Parameter("offset list is empty".into()));
    }
    if let Some(bad) = offsets.iter().find(|&&d| !(d > 0.0 && gamma_bar.value + d < 0.0)) {
        return Err(Error::Parameter(format!(
            "offset {bad} must be positive and keep gamma_bar + offset < 0 (gamma_bar = {})",
            gamma_bar.value
        )));
    }
    if offsets.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Parameter("offsets must be strictly decreasing".into()));
    }
    Ok(())
}

/// Log-spaced offsets from `from` down to `to`, `per_decade` points per decade.
pub fn log_offsets(from: f64, to: f64, per_decade: usize) -> Vec<f64> {
    let decades = (from / to).log10();
    let steps = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=steps)
        .map(|i| from * 10f64.powf(-(i as f64) * decades / steps as f64))
        .collect()
}

/// `u_γ(x) = U(R_γ x)/U(R_γ) - 1` on a uniform grid of `[0, 1]`.
pub fn dirichlet_profile(shot: &Shot, point: &BranchPoint, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::Parameter("profile needs at least two samples".into()));
    }
    (0..samples)
        .map(|i| {
            let x = i as f64 / (samples - 1) as f64;
            if x == 0.0 {
                return Ok((0.0, shot.centre / point.u_at_r - 1.0));
            }
            let state = shot
                .state_at((point.r_gamma * x).min(shot.r_end()))
                .ok_or_else(|| Error::Consistency(format!("no stored state at x = {x} (r = {})", point.r_gamma * x)))?;
            Ok((x, state.u / point.u_at_r - 1.0))
        })
        .collect()
}

/// Unstable-manifold estimate of the singular parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSigma {
    pub value: f64,
    /// `(ε, w₁(s_event)^{p-1})` per starting offset.
    pub raw: Vec<(f64, f64)>,
    /// First-order Richardson values from consecutive pairs of `ε`.
    pub extrapolated: Vec<f64>,
}

impl LambdaSigma {
    /// Relative difference of the last two extrapolated values.
    pub fn self_consistency(&self) -> Option<f64> {
        match self.extrapolated.as_slice() {
            [.., a, b] => Some((a - b).abs() / b.abs()),
            _ => None,
        }
    }
}

/// Follows the positive branch of the unstable manifold from `w⁽⁰⁾ + ε·ξ₁`
/// to the first `w₂ = 0` and extrapolates `w₁^{p-1}` there to `ε → 0`.
pub fn estimate_lambda_sigma(params: &ProblemParams, epsilons: &[f64]) -> Result<LambdaSigma> {
    let (eps_min, eps_max) = LAMBDA_SIGMA_EPS_RANGE;
    if epsilons.len() < 2 || epsilons.iter().any(|e| !(*e >= eps_min && *e <= eps_max)) {
        return Err(Error::Parameter(format!(
            "need at least two epsilons in [{eps_min:e}, {eps_max:e}], got {epsilons:?}"
        )));
    }
    let w0 = fixed_point_w0(params);
    let xi1 = nu1_eigenvector(params);
    let raw = epsilons
        .iter()
        .map(|&eps| {
            let start = WPoint::new(0.0, std::array::from_fn(|i| w0.w[i] + eps * xi1[i]));
            let traj = integrate_autonomous(params, start, LAMBDA_SIGMA_SPAN, DEFAULT_TOL)?;
            match traj.terminal_event {
                AutonomousEvent::W2Zero(_) => Ok((eps, traj.last().w[0].powf(params.p() - 1.0))),
                other => Err(Error::Estimator(format!(
                    "unstable orbit from eps = {eps} ended with {other:?} instead of w2 = 0 within s-span {LAMBDA_SIGMA_SPAN}"
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let extrapolated: Vec<f64> = raw
        .windows(2)
        .map(|pair| {
            let ((e0, l0), (e1, l1)) = (pair[0], pair[1]);
            let q = e0 / e1;
            (q * l1 - l0) / (q - 1.0)
        })
        .collect();
    let value = *extrapolated.last().expect("at least two epsilons");
    Ok(LambdaSigma {
        value,
        raw,
        extrapolated,
    })
}

/// Limit of `λ_γ` as `γ ↓ γ̄` from branch data.
///
/// Near `γ̄` the shot leaves the singular solution after a time of order
/// `ln(1/δ)/ν₁`, so its residual stable component scales like `δ^{-ν₃/ν₁}`.
/// The fit is `λ^{1/(p-1)} = c₀ + Σ c_k φ_k(δ)` by least squares, with
/// `φ = δ^κ cos(ω ln δ), δ^κ sin(ω ln δ)` for a complex pair `ν₃ = -κν₁ ± iων₁`
/// and `φ = δ^{-ν₃/ν₁}, δ^{-ν₄/ν₁}` for a real pair; the estimate is `c₀^{p-1}`.
pub fn branch_limit_estimate(params: &ProblemParams, branch: &Branch) -> Result<f64> {
    let pts = &branch.points;
    if pts.len() < 4 {
        return Err(Error::Estimator(format!(
            "need at least 4 branch points, got {}",
            pts.len()
        )));
    }
    let spec = eigenvalues(params);
    let nu1 = spec.nu1();
    let (nu3, nu4) = (spec.nu[2], spec.nu[3]);
    let basis = |delta: f64| -> [f64; 3] {
        let ld = delta.ln();
        if nu3.im != 0.0 {
            let amp = (-nu3.re / nu1 * ld).exp();
            let phase = nu3.im / nu1 * ld;
            [1.0, amp * phase.cos(), amp * phase.sin()]
        } else {
            [1.0, (-nu3.re / nu1 * ld).exp(), (-nu4.re / nu1 * ld).exp()]
        }
    };
    let q = params.p() - 1.0;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for pt in pts {
        let phi = basis(pt.gamma - branch.gamma_bar.value);
        let y = pt.lambda.powf(1.0 / q);
        for i in 0..3 {
            atb[i] += phi[i] * y;
            for j in 0..3 {
                ata[i][j] += phi[i] * phi[j];
            }
        }
    }
    let c0 = solve3(ata, atb)
        .ok_or_else(|| Error::Estimator("singular normal equations in the branch-limit fit".into()))?[0];
    if !(c0 > 0.0) {
        return Err(Error::Estimator(format!(
            "branch-limit fit gave a non-positive amplitude {c0}"
        )));
    }
    Ok(c0.powf(q))
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}
