use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::ShapeData;

/// Odd transverse profile used in perturbations, vanishing at u = ±a.
#[derive(Clone)]
pub enum Chi1 {
    /// sin(πu/a).
    Sine,
    /// u(a² − u²)/a³.
    Cubic,
    /// Value and derivative supplied by the caller.
    Custom(Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>),
}

impl fmt::Debug for Chi1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Chi1::Sine => write!(f, "Sine"),
            Chi1::Cubic => write!(f, "Cubic"),
            Chi1::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Chi1 {
    pub fn name(&self) -> &'static str {
        match self {
            Chi1::Sine => "sine",
            Chi1::Cubic => "cubic",
            Chi1::Custom(_) => "custom",
        }
    }

    /// (χ₁(u), χ₁′(u)) for half-thickness a.
    pub fn eval(&self, a: f64, u: f64) -> (f64, f64) {
        match self {
            Chi1::Sine => {
                let k = PI / a;
                ((k * u).sin(), k * (k * u).cos())
            }
            Chi1::Cubic => {
                let a3 = a * a * a;
                (u * (a * a - u * u) / a3, (a * a - 3.0 * u * u) / a3)
            }
            Chi1::Custom(f) => f(u),
        }
    }
}

/// Ground transverse mode χ = cos(κ₁u) and the perturbation profile χ₁.
#[derive(Debug, Clone)]
pub struct TransverseProfile {
    pub a: f64,
    pub kappa1: f64,
    pub chi1: Chi1,
    /// σ = −∫ χ′ χ₁ du.
    pub sigma: f64,
}

impl TransverseProfile {
    pub fn new(a: f64, chi1: Chi1) -> Result<Self> {
        let kappa1 = PI / (2.0 * a);
        let vanish = chi1.eval(a, a).0.abs().max(chi1.eval(a, -a).0.abs());
        if vanish > 1e-10 {
            return Err(Error::NonAdmissibleChi1(format!("χ₁(±a) = {vanish:e} ≠ 0")));
        }
        for k in 1..=16 {
            let u = a * k as f64 / 17.0;
            let (p, m) = (chi1.eval(a, u).0, chi1.eval(a, -u).0);
            if (p + m).abs() > 1e-10 * (1.0 + p.abs()) {
                return Err(Error::NonAdmissibleChi1(format!("χ₁ is not odd at u = {u}")));
            }
        }
        let breaks: Vec<f64> = (0..=8).map(|i| -a + 2.0 * a * i as f64 / 8.0).collect();
        let sigma = crate::quadrature::adaptive_pieces(
            |u| kappa1 * (kappa1 * u).sin() * chi1.eval(a, u).0,
            &breaks,
            1e-14,
        );
        if !(sigma > 1e-12) {
            return Err(Error::NonAdmissibleChi1(format!("σ = {sigma:e} is not positive")));
        }
        Ok(TransverseProfile { a, kappa1, chi1, sigma })
    }

    pub fn sine(a: f64) -> Self {
        Self::new(a, Chi1::Sine).expect("the sine profile is admissible")
    }

    /// (χ, χ′).
    pub fn ground(&self, u: f64) -> (f64, f64) {
        let k = self.kappa1;
        ((k * u).cos(), -k * (k * u).sin())
    }

    pub fn kappa1_sq(&self) -> f64 {
        self.kappa1 * self.kappa1
    }
}

/// σ of the profile, after checking ∫ u(χ′χ₁′ − κ₁²χχ₁) du = −∫ χ′χ₁ du.
pub fn sigma_cross(profile: &TransverseProfile) -> Result<f64> {
    let (a, k) = (profile.a, profile.kappa1);
    let breaks: Vec<f64> = (0..=16).map(|i| -a + 2.0 * a * i as f64 / 16.0).collect();
    let lhs = crate::quadrature::adaptive_pieces(
        |u| {
            let (c, dc) = profile.ground(u);
            let (c1, dc1) = profile.chi1.eval(a, u);
            u * (dc * dc1 - k * k * c * c1)
        },
        &breaks,
        1e-15,
    );
    let gap = (lhs - profile.sigma).abs();
    if gap > 1e-10 * profile.sigma.abs().max(1.0) {
        return Err(Error::NonAdmissibleChi1(format!(
            "integration by parts fails: {lhs} vs σ = {}",
            profile.sigma
        )));
    }
    Ok(profile.sigma)
}

/// μ_k = ∫ uᵏ (χ′² − κ₁² χ²) du for k = 0 … kmax (odd entries vanish).
pub fn mu_coefficients(a: f64, kmax: usize) -> Vec<f64> {
    let kappa1 = PI / (2.0 * a);
    (0..=kmax)
        .map(|k| {
            if k % 2 == 1 || k == 0 {
                return 0.0;
            }
            let half = k / 2;
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            let mut sum = 0.0;
            for l in 1..=half {
                let odd = 2 * l - 1;
                let term = PI.powi(odd as i32) / (1..=odd).map(|i| i as f64).product::<f64>();
                sum += if (half - l) % 2 == 0 { term } else { -term };
            }
            0.5 * fact / (2.0 * kappa1).powi(k as i32 - 1) * sum
        })
        .collect()
}

/// μ_k by direct adaptive quadrature.
pub fn mu_by_quadrature(a: f64, k: usize) -> f64 {
    let kappa1 = PI / (2.0 * a);
    let f = |u: f64| {
        let (s, c) = (kappa1 * u).sin_cos();
        u.powi(k as i32) * kappa1 * kappa1 * (s * s - c * c)
    };
    let breaks: Vec<f64> = (0..=16).map(|i| -a + 2.0 * a * i as f64 / 16.0).collect();
    crate::quadrature::adaptive_pieces(f, &breaks, 1e-15 * a.powi(k as i32).max(1e-300))
}

/// Σ_{k ≥ 1} μ_{2k} c_{2k}(A).
pub fn curvature_integrand(shape: &ShapeData, mu: &[f64]) -> f64 {
    let n = shape.n();
    (1..=n / 2)
        .map(|k| mu.get(2 * k).copied().unwrap_or(0.0) * shape.c(2 * k))
        .sum()
}
