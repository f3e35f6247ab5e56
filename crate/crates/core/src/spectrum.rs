//! Linearization of the autonomous Emden–Fowler system at the equilibrium
//! `w⁽⁰⁾` that represents the singular solution.
//!
//! The Jacobian there has characteristic polynomial
//! `P(ν) = (ν-a+n-4)(ν-a+n-2)(ν-a-2)(ν-a) - pK₀` with `a = 4/(p-1)`, whose
//! roots are available in closed form through the coefficients `N₁, N₂, N₃`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{k0, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NCoefficients {
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

/// Eigenvalues of the linearization, ordered `ν₂ < Re ν₃ = Re ν₄ < 0 < ν₁`.
///
/// `nu[2]`/`nu[3]` carry positive/negative imaginary parts when they form a
/// conjugate pair; otherwise both are real with `nu[3] <= nu[2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumData {
    pub coefficients: NCoefficients,
    pub nu: [Complex64; 4],
}

impl SpectrumData {
    pub fn nu1(&self) -> f64 {
        self.nu[0].re
    }

    pub fn nu2(&self) -> f64 {
        self.nu[1].re
    }

    pub fn nu3(&self) -> Complex64 {
        self.nu[2]
    }

    /// `N₂ - 4√N₃`; negative iff `ν₃, ν₄` are non-real.
    pub fn discriminant(&self) -> f64 {
        discriminant_of(&self.coefficients)
    }

    pub fn is_oscillatory(&self) -> bool {
        self.discriminant() < 0.0
    }
}

/// A point of the autonomous phase space at log-radius `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WPoint {
    pub s: f64,
    pub w: [f64; 4],
}

impl WPoint {
    pub fn new(s: f64, w: [f64; 4]) -> Self {
        Self { s, w }
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.w.iter().all(|x| x.is_finite())
    }
}

/// Eigenvector of the linearization for the eigenvalue `ν₂`, normalized to `t₁ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nu2Eigenvector {
    pub t: [f64; 4],
}

pub fn n_coefficients(params: &ProblemParams) -> NCoefficients {
    let n = params.nf();
    let q = params.p() - 1.0;
    let q2 = q * q;
    let q3 = q2 * q;
    let q4 = q2 * q2;
    NCoefficients {
        n1: -(n - 4.0) * q + 8.0,
        n2: (n * n - 4.0 * n + 8.0) * q2,
        n3: (9.0 * n - 34.0) * (n - 2.0) * q4
            + 8.0 * (3.0 * n - 8.0) * (n - 6.0) * q3
            + (16.0 * n * n - 288.0 * n + 832.0) * q2
            - 128.0 * (n - 6.0) * q
            + 256.0,
    }
}

fn discriminant_of(c: &NCoefficients) -> f64 {
    c.n2 - 4.0 * c.n3.sqrt()
}

pub fn eigenvalues(params: &ProblemParams) -> SpectrumData {
    let coefficients = n_coefficients(params);
    let denom = 2.0 * (params.p() - 1.0);
    let root_n3 = coefficients.n3.sqrt();
    let outer = (coefficients.n2 + 4.0 * root_n3).sqrt();
    let inner = Complex64::new(coefficients.n2 - 4.0 * root_n3, 0.0).sqrt();
    let n1 = Complex64::new(coefficients.n1, 0.0);
    SpectrumData {
        coefficients,
        nu: [
            Complex64::new((coefficients.n1 + outer) / denom, 0.0),
            Complex64::new((coefficients.n1 - outer) / denom, 0.0),
            (n1 + inner) / denom,
            (n1 - inner) / denom,
        ],
    }
}

/// Diagonal shifts `(a, a+2, a-(n-2), a-(n-4))` of the Jacobian, `a = 4/(p-1)`.
pub(crate) fn jacobian_diagonal(params: &ProblemParams) -> [f64; 4] {
    let a = params.decay();
    let n = params.nf();
    [a, a + 2.0, a - (n - 2.0), a - (n - 4.0)]
}

pub fn characteristic_poly(params: &ProblemParams, nu: Complex64) -> Complex64 {
    let d = jacobian_diagonal(params);
    (nu - d[3]) * (nu - d[2]) * (nu - d[1]) * (nu - d[0]) - params.p() * k0(params)
}

/// Right eigenvector for an eigenvalue `nu` of the linearization, with first
/// component 1. The last row of the eigen-equation holds iff `P(nu) = 0`.
pub fn eigenvector(params: &ProblemParams, nu: Complex64) -> [Complex64; 4] {
    let d = jacobian_diagonal(params);
    let t1 = Complex64::new(1.0, 0.0);
    let t2 = nu - d[0];
    let t3 = (nu - d[1]) * t2;
    let t4 = (nu - d[2]) * t3;
    [t1, t2, t3, t4]
}

/// Left eigenvector `ℓ` (`ℓM = νℓ`) with last component 1.
pub fn left_eigenvector(params: &ProblemParams, nu: Complex64) -> [Complex64; 4] {
    let d = jacobian_diagonal(params);
    let l4 = Complex64::new(1.0, 0.0);
    let l3 = (nu - d[3]) * l4;
    let l2 = (nu - d[2]) * l3;
    let l1 = (nu - d[1]) * l2;
    [l1, l2, l3, l4]
}

/// Real eigenvector for the unstable eigenvalue `ν₁`, first component 1.
pub fn nu1_eigenvector(params: &ProblemParams) -> [f64; 4] {
    let spec = eigenvalues(params);
    eigenvector(params, spec.nu[0]).map(|c| c.re)
}

/// Eigenvector for `ν₂` with its `(+,-,+,-)` sign pattern checked.
pub fn nu2_eigenvector(params: &ProblemParams) -> Result<Nu2Eigenvector> {
    let spec = eigenvalues(params);
    let t = eigenvector(params, spec.nu[1]).map(|c| c.re);
    let pattern_ok = t[0] > 0.0 && t[1] < 0.0 && t[2] > 0.0 && t[3] < 0.0;
    if !pattern_ok {
        return Err(Error::Consistency(format!(
            "nu2 eigenvector {t:?} violates the (+,-,+,-) sign pattern for n = {}, p = {}",
            params.n(),
            params.p()
        )));
    }
    Ok(Nu2Eigenvector { t })
}

/// The equilibrium `w⁽⁰⁾` of the autonomous system (the singular solution).
pub fn fixed_point_w0(params: &ProblemParams) -> WPoint {
    let a = params.decay();
    let n = params.nf();
    let amp = params.singular_amplitude();
    let w3 = a * (a + 2.0);
    WPoint::new(0.0, [amp, -a * amp, w3 * amp, (n - 2.0 - a) * w3 * amp])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::critical_exponent_pc;
    use approx::assert_relative_eq;

    fn p510() -> ProblemParams {
        ProblemParams::new(5, 10.0).unwrap()
    }

    /// Jacobian assembled entry by entry from the autonomous system.
    fn jacobian(params: &ProblemParams) -> [[f64; 4]; 4] {
        let d = jacobian_diagonal(params);
        [
            [d[0], 1.0, 0.0, 0.0],
            [0.0, d[1], 1.0, 0.0],
            [0.0, 0.0, d[2], 1.0],
            [params.p() * k0(params), 0.0, 0.0, d[3]],
        ]
    }

    #[test]
    fn n_coefficients_integer_case() {
        let c = n_coefficients(&p510());
        assert_eq!(c.n1, -1.0);
        assert_eq!(c.n2, 1053.0);
        assert_eq!(c.n3, 160249.0);
        // N₃ - (n-2)²(p-1)⁴ = 8p(p+1)((n-2)(p-1)-4)((n-4)(p-1)-4)
        assert_eq!(c.n3 - 9.0 * 6561.0, 101200.0);
        assert_eq!(8.0 * 10.0 * 11.0 * 23.0 * 5.0, 101200.0);
    }

    #[test]
    fn eigenvalues_510() {
        let s = eigenvalues(&p510());
        assert_relative_eq!(s.nu1(), 2.806631, max_relative = 1e-5);
        assert_relative_eq!(s.nu2(), -2.917742, max_relative = 1e-5);
        assert_relative_eq!(s.nu[2].re, -1.0 / 18.0, max_relative = 1e-12);
        assert_relative_eq!(s.nu[2].im, 1.300812, max_relative = 1e-5);
        assert_eq!(s.nu[3], s.nu[2].conj());
        let sum: Complex64 = s.nu.iter().sum();
        assert_relative_eq!(sum.re, -2.0 / 9.0, max_relative = 1e-12);
        assert!(sum.im.abs() < 1e-14);
    }

    #[test]
    fn characteristic_poly_vanishes_at_eigenvalues() {
        let p = p510();
        let pk0 = p.p() * k0(&p);
        for nu in eigenvalues(&p).nu {
            assert!(characteristic_poly(&p, nu).norm() < 1e-9 * pk0);
        }
        let p0 = characteristic_poly(&p, Complex64::new(0.0, 0.0));
        assert_relative_eq!(p0.re, -9.0 * k0(&p), max_relative = 1e-13);
        assert_relative_eq!(p0.re, -13.882, max_relative = 1e-4);
    }

    #[test]
    fn nu2_eigenvector_510() {
        let p = p510();
        let t = nu2_eigenvector(&p).unwrap().t;
        let expected = [1.0, -3.3622, 18.029, -6.530];
        for (got, want) in t.iter().zip(expected) {
            assert_relative_eq!(*got, want, max_relative = 1e-3);
        }
        let nu2 = eigenvalues(&p).nu2();
        assert!(nu2 + 5.0 - 2.0 - p.decay() < 0.0);
    }

    #[test]
    fn eigenvector_satisfies_jacobian() {
        for (n, pp) in [(5, 10.0), (13, 2.0), (20, 1.6), (8, 4.0)] {
            let p = ProblemParams::new(n, pp).unwrap();
            let m = jacobian(&p);
            let t = nu2_eigenvector(&p).unwrap().t;
            let nu2 = eigenvalues(&p).nu2();
            let scale = t.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            for i in 0..4 {
                let mt: f64 = (0..4).map(|j| m[i][j] * t[j]).sum();
                assert!((mt - nu2 * t[i]).abs() < 1e-9 * scale * nu2.abs());
            }
        }
    }

    #[test]
    fn left_eigenvector_is_left() {
        let p = p510();
        let m = jacobian(&p);
        let nu = eigenvalues(&p).nu[0];
        let l = left_eigenvector(&p, nu);
        for j in 0..4 {
            let lm: Complex64 = (0..4).map(|i| l[i] * m[i][j]).sum();
            assert!((lm - nu * l[j]).norm() < 1e-9 * l[0].norm() * nu.norm());
        }
    }

    #[test]
    fn fixed_point_510() {
        let w0 = fixed_point_w0(&p510());
        let expected = [1.0494, -0.4664, 1.1401, 2.9136];
        for (got, want) in w0.w.iter().zip(expected) {
            assert_relative_eq!(*got, want, max_relative = 2e-4);
        }
        assert_relative_eq!(w0.w[0], (10120.0f64 / 6561.0).powf(1.0 / 9.0), max_relative = 1e-15);
    }

    #[test]
    fn monotone_regime_has_real_spectrum() {
        let pc = critical_exponent_pc(13, 1e-12).unwrap().finite().unwrap();
        let s = eigenvalues(&ProblemParams::new(13, 1.2 * pc).unwrap());
        assert!(s.nu[2].im == 0.0 && s.nu[3].im == 0.0);
        assert!(s.nu[3].re <= s.nu[2].re && s.nu[2].re < 0.0);
        assert!(s.nu2() < s.nu[3].re);
    }
}
