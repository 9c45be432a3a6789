use nalgebra::DMatrix;

use super::forms::FundamentalForms;
use crate::error::{Error, Result};

/// Extrinsic curvature of a hypersurface at one point.
#[derive(Debug, Clone)]
pub struct ShapeData {
    /// Principal curvatures, ascending.
    pub principal: Vec<f64>,
    /// Elementary symmetric functions c₀ = 1, c₁, …, cₙ of the principal curvatures.
    pub elem_sym: Vec<f64>,
    /// Operator norm max |κᵢ|.
    pub norm_a: f64,
    /// Mean curvature c₁ (sum convention).
    pub mean: f64,
    /// Gauss curvature, only for surfaces.
    pub gauss: Option<f64>,
    /// Weingarten map A = g⁻¹h in chart indices.
    pub weingarten: DMatrix<f64>,
    /// Shape operator in the g-orthonormal frame L⁻¹ h L⁻ᵀ, g = LLᵀ.
    pub frame_shape: DMatrix<f64>,
    /// Inverse metric.
    pub g_inv: DMatrix<f64>,
    /// √det g.
    pub sqrt_det_g: f64,
}

impl ShapeData {
    pub fn n(&self) -> usize {
        self.principal.len()
    }

    pub fn c(&self, k: usize) -> f64 {
        self.elem_sym.get(k).copied().unwrap_or(0.0)
    }
}

pub fn shape_data(forms: &FundamentalForms) -> Result<ShapeData> {
    let n = forms.g.nrows();
    let chol = forms.g.clone().cholesky().ok_or_else(|| Error::SingularChart {
        point: forms.point.clone(),
        condition: f64::INFINITY,
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularChart {
            point: forms.point.clone(),
            condition: f64::INFINITY,
        })?;
    let s = &l_inv * &forms.h * l_inv.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let g_inv = chol.inverse();
    let weingarten = &g_inv * &forms.h;
    let sqrt_det_g = l.diagonal().product();

    let mut principal: Vec<f64> = s.clone().symmetric_eigenvalues().iter().copied().collect();
    principal.sort_by(|a, b| a.total_cmp(b));
    let elem_sym = elementary_symmetric(&principal);
    let norm_a = principal.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    Ok(ShapeData {
        mean: elem_sym[1],
        gauss: if n == 2 { Some(elem_sym[2]) } else { None },
        principal,
        elem_sym,
        norm_a,
        weingarten,
        frame_shape: s,
        g_inv,
        sqrt_det_g,
    })
}

/// Coefficients of ∏(1 + κᵢ t), i.e. c₀ … cₙ.
pub fn elementary_symmetric(values: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; values.len() + 1];
    c[0] = 1.0;
    for (m, &v) in values.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            c[k] += v * c[k - 1];
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::{Interval, SurfaceChart};
    use crate::geometry::forms::fundamental_forms_default;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use std::sync::Arc;

    #[test]
    fn elementary_symmetric_small_cases() {
        let c = elementary_symmetric(&[1.0, 2.0, 3.0]);
        assert_eq!(c, vec![1.0, 6.0, 11.0, 6.0]);
    }

    fn unit_sphere() -> SurfaceChart {
        // (θ, φ) order makes the normal point inward.
        SurfaceChart::new(
            "sphere",
            vec![Interval::angle(), Interval::closed(0.01, 3.13)],
            Arc::new(|x: &[f64]| {
                let (t, p) = (x[0], x[1]);
                DVector::from_vec(vec![p.sin() * t.cos(), p.sin() * t.sin(), p.cos()])
            }),
        )
    }

    #[test]
    fn unit_sphere_has_unit_principal_curvatures() {
        let f = fundamental_forms_default(&unit_sphere(), &[1.2, 0.6]).unwrap();
        let s = shape_data(&f).unwrap();
        for k in &s.principal {
            assert_relative_eq!(*k, 1.0, epsilon = 1e-8);
        }
        assert_relative_eq!(s.c(2), 1.0, epsilon = 1e-8);
        assert_relative_eq!(s.mean, 2.0, epsilon = 1e-8);
    }

    #[test]
    fn paraboloid_apex() {
        let chart = SurfaceChart::new(
            "paraboloid",
            vec![Interval::closed(-10.0, 10.0), Interval::closed(-10.0, 10.0)],
            Arc::new(|x: &[f64]| DVector::from_vec(vec![x[0], x[1], x[0] * x[0] + x[1] * x[1]])),
        );
        let s = shape_data(&fundamental_forms_default(&chart, &[0.0, 0.0]).unwrap()).unwrap();
        assert_relative_eq!(s.principal[0], 2.0, epsilon = 1e-8);
        assert_relative_eq!(s.principal[1], 2.0, epsilon = 1e-8);
        assert_relative_eq!(s.gauss.unwrap(), 4.0, epsilon = 1e-7);
        assert_relative_eq!(s.mean, 4.0, epsilon = 1e-8);
    }
}
