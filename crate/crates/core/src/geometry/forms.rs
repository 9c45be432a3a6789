use nalgebra::{DMatrix, DVector};

use super::chart::SurfaceChart;
use crate::error::{Error, Result};

/// Largest admissible condition number of the first fundamental form.
pub const MAX_METRIC_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    /// Plain central differences, second order in the step.
    Central,
    /// Central differences at h and h/2 combined to fourth order.
    Richardson,
}

#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub step: f64,
    pub scheme: FdScheme,
}

impl FdOptions {
    pub fn for_chart(chart: &SurfaceChart) -> Self {
        FdOptions {
            step: default_step(chart),
            scheme: FdScheme::Richardson,
        }
    }
}

pub fn default_step(chart: &SurfaceChart) -> f64 {
    if chart.has_analytic_jacobian() {
        1e-5
    } else {
        1e-3
    }
}

/// First and second fundamental forms at a chart point.
#[derive(Debug, Clone)]
pub struct FundamentalForms {
    pub point: Vec<f64>,
    pub position: DVector<f64>,
    /// Columns are the coordinate tangent vectors ∂ᵢX.
    pub jacobian: DMatrix<f64>,
    /// Unit normal with (∂₁X, …, ∂ₙX, N) positively oriented.
    pub normal: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

pub fn fundamental_forms(chart: &SurfaceChart, x: &[f64], step: f64) -> Result<FundamentalForms> {
    fundamental_forms_with(
        chart,
        x,
        FdOptions {
            step,
            scheme: FdScheme::Richardson,
        },
    )
}

pub fn fundamental_forms_default(chart: &SurfaceChart, x: &[f64]) -> Result<FundamentalForms> {
    fundamental_forms_with(chart, x, FdOptions::for_chart(chart))
}

pub fn fundamental_forms_with(
    chart: &SurfaceChart,
    x: &[f64],
    opts: FdOptions,
) -> Result<FundamentalForms> {
    chart.check(x)?;
    let n = chart.n();
    let steps: Vec<f64> = x.iter().map(|xi| opts.step * xi.abs().max(1.0)).collect();
    let position = chart.position(x);

    let jacobian = match chart.analytic_jacobian(x) {
        Some(j) => j,
        None => {
            let mut j = DMatrix::zeros(n + 1, n);
            for i in 0..n {
                let col = combine(opts.scheme, |h| {
                    let p = chart.position(&shifted(x, &[(i, h)]));
                    let m = chart.position(&shifted(x, &[(i, -h)]));
                    (p - m) / (2.0 * h)
                }, steps[i], 2);
                j.set_column(i, &col);
            }
            j
        }
    };

    let normal = unit_normal(&jacobian);
    let g = jacobian.transpose() * &jacobian;
    let condition = condition_number(&g);
    if !(condition.is_finite() && condition <= MAX_METRIC_CONDITION) {
        return Err(Error::SingularChart {
            point: x.to_vec(),
            condition,
        });
    }

    let mut h = DMatrix::zeros(n, n);
    if chart.has_analytic_jacobian() {
        for i in 0..n {
            let dj = combine(opts.scheme, |s| {
                let p = chart.analytic_jacobian(&shifted(x, &[(i, s)])).unwrap();
                let m = chart.analytic_jacobian(&shifted(x, &[(i, -s)])).unwrap();
                let d = (p - m) / (2.0 * s);
                DVector::from_column_slice(d.as_slice())
            }, steps[i], 2);
            // dj stacks the columns ∂ᵢ∂ⱼX for j = 0..n.
            for j in 0..n {
                let xij = dj.rows(j * (n + 1), n + 1);
                h[(i, j)] = xij.dot(&normal);
            }
        }
        h = (&h + h.transpose()) * 0.5;
    } else {
        for i in 0..n {
            for j in i..n {
                let xij = if i == j {
                    combine(opts.scheme, |s| {
                        let p = chart.position(&shifted(x, &[(i, s)]));
                        let m = chart.position(&shifted(x, &[(i, -s)]));
                        (p - &position * 2.0 + m) / (s * s)
                    }, steps[i], 2)
                } else {
                    let ratio = steps[j] / steps[i];
                    combine(opts.scheme, |s| {
                        let t = s * ratio;
                        let pp = chart.position(&shifted(x, &[(i, s), (j, t)]));
                        let pm = chart.position(&shifted(x, &[(i, s), (j, -t)]));
                        let mp = chart.position(&shifted(x, &[(i, -s), (j, t)]));
                        let mm = chart.position(&shifted(x, &[(i, -s), (j, -t)]));
                        (pp - pm - mp + mm) / (4.0 * s * t)
                    }, steps[i], 2)
                };
                let v = xij.dot(&normal);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
    }

    Ok(FundamentalForms {
        point: x.to_vec(),
        position,
        jacobian,
        normal,
        g,
        h,
    })
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(i, d) in moves {
        y[i] += d;
    }
    y
}

/// Evaluates a difference quotient of order `order` at h (and h/2).
fn combine<F: Fn(f64) -> DVector<f64>>(scheme: FdScheme, f: F, h: f64, order: i32) -> DVector<f64> {
    match scheme {
        FdScheme::Central => f(h),
        FdScheme::Richardson => {
            let coarse = f(h);
            let fine = f(0.5 * h);
            let k = 2f64.powi(order);
            (fine * k - coarse) / (k - 1.0)
        }
    }
}

/// Generalized cross product of the tangent columns, normalized.
pub fn unit_normal(jacobian: &DMatrix<f64>) -> DVector<f64> {
    let n = jacobian.ncols();
    let mut nv = DVector::zeros(n + 1);
    for k in 0..=n {
        let minor = jacobian.clone().remove_row(k);
        let sign = if (k + n) % 2 == 0 { 1.0 } else { -1.0 };
        nv[k] = sign * minor.determinant();
    }
    let len = nv.norm();
    if len > 0.0 {
        nv / len
    } else {
        nv
    }
}

fn condition_number(g: &DMatrix<f64>) -> f64 {
    let ev = g.clone().symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(f64::MIN, f64::max);
    let min = ev.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::Interval;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn paraboloid_polar(with_jacobian: bool) -> SurfaceChart {
        let c = SurfaceChart::new(
            "paraboloid-polar",
            vec![Interval::closed(0.0, 100.0), Interval::angle()],
            Arc::new(|x: &[f64]| {
                DVector::from_vec(vec![x[0] * x[1].cos(), x[0] * x[1].sin(), x[0] * x[0]])
            }),
        );
        if with_jacobian {
            c.with_jacobian(Arc::new(|x: &[f64]| {
                let (r, t) = (x[0], x[1]);
                DMatrix::from_row_slice(3, 2, &[t.cos(), -r * t.sin(), t.sin(), r * t.cos(), 2.0 * r, 0.0])
            }))
        } else {
            c
        }
    }

    fn exact_h(r: f64) -> DMatrix<f64> {
        let s = (1.0 + 4.0 * r * r).sqrt();
        DMatrix::from_row_slice(2, 2, &[2.0 / s, 0.0, 0.0, 2.0 * r * r / s])
    }

    #[test]
    fn normal_is_positively_oriented() {
        let chart = paraboloid_polar(true);
        let f = fundamental_forms_default(&chart, &[0.7, 0.3]).unwrap();
        let mut m = f.jacobian.clone().insert_column(2, 0.0);
        m.set_column(2, &f.normal);
        assert!(m.determinant() > 0.0);
        assert!(f.normal[2] > 0.0);
    }

    #[test]
    fn analytic_and_position_only_charts_agree() {
        let x = [1.3, 0.4];
        let a = fundamental_forms_default(&paraboloid_polar(true), &x).unwrap();
        let b = fundamental_forms_default(&paraboloid_polar(false), &x).unwrap();
        assert!((&a.h - &b.h).abs().max() < 1e-8);
        assert!((&a.g - &b.g).abs().max() < 1e-10);
        assert!((a.h - exact_h(1.3)).abs().max() < 1e-9);
    }

    #[test]
    fn central_differences_converge_at_second_order() {
        let chart = paraboloid_polar(false);
        let x = [3.0, 2.5];
        let exact = exact_h(3.0);
        let errs: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
            .iter()
            .map(|&s| {
                let opts = FdOptions { step: s, scheme: FdScheme::Central };
                (fundamental_forms_with(&chart, &x, opts).unwrap().h - &exact).abs().max()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}, errors {errs:?}");
        }
    }

    #[test]
    fn singular_parametrization_is_rejected() {
        let chart = paraboloid_polar(true);
        let err = fundamental_forms_default(&chart, &[0.0, 0.3]).unwrap_err();
        assert!(matches!(err, Error::SingularChart { .. }));
    }

    #[test]
    fn point_outside_domain_is_rejected() {
        let chart = paraboloid_polar(true);
        assert!(matches!(
            fundamental_forms_default(&chart, &[-1.0, 0.0]),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn metric_matches_closed_form() {
        let f = fundamental_forms_default(&paraboloid_polar(true), &[2.0, 1.0]).unwrap();
        assert_relative_eq!(f.g[(0, 0)], 17.0, epsilon = 1e-12);
        assert_relative_eq!(f.g[(1, 1)], 4.0, epsilon = 1e-12);
        assert_relative_eq!(f.g[(0, 1)], 0.0, epsilon = 1e-12);
    }
}
