//! Intrinsic curvature of a hypersurface from the Gauss equation.

use nalgebra::DMatrix;

use super::shape::ShapeData;
use crate::error::{Error, Result};

pub const MAX_DIMENSION: usize = 6;

/// Riemann tensor and derived contractions in a g-orthonormal frame.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub n: usize,
    /// R_ijkl = S_ik S_jl − S_il S_jk, flattened as ((i·n + j)·n + k)·n + l.
    pub riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// Tr(𝓡ᵖ) for p = 1 … ⌊n/2⌋.
    pub traces: Vec<f64>,
    pub ricci_norm_sq: f64,
    pub riemann_norm_sq: f64,
}

impl CurvatureData {
    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    /// Tr(𝓡ᵖ), with p counted from 1.
    pub fn trace(&self, p: usize) -> f64 {
        self.traces[p - 1]
    }
}

pub fn curvature_data(shape: &ShapeData) -> Result<CurvatureData> {
    let n = shape.n();
    if !(2..=MAX_DIMENSION).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    let s = &shape.frame_shape;
    let mut riemann = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    riemann[((i * n + j) * n + k) * n + l] =
                        s[(i, k)] * s[(j, l)] - s[(i, l)] * s[(j, k)];
                }
            }
        }
    }
    let at = |i: usize, j: usize, k: usize, l: usize| riemann[((i * n + j) * n + k) * n + l];

    let mut ricci = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            ricci[(i, k)] = (0..n).map(|j| at(i, j, k, j)).sum();
        }
    }
    let scalar = ricci.trace();
    let ricci_norm_sq = ricci.iter().map(|v| v * v).sum();
    let riemann_norm_sq = riemann.iter().map(|v| v * v).sum();
    let traces = (1..=n / 2).map(|p| power_trace(n, p, &at)).collect();

    Ok(CurvatureData {
        n,
        riemann,
        ricci,
        scalar,
        traces,
        ricci_norm_sq,
        riemann_norm_sq,
    })
}

/// Signed contraction of p copies of R over ordered index pairs, divided by
/// the (2p)!/2ᵖ ordered pairings of each index set.
fn power_trace<F: Fn(usize, usize, usize, usize) -> f64>(n: usize, p: usize, r: &F) -> f64 {
    let seqs = pair_sequences(n, p);
    let mut total = 0.0;
    for a in &seqs {
        let key_a = index_mask(a);
        for b in &seqs {
            if index_mask(b) != key_a {
                continue;
            }
            let mut term = permutation_sign(a, b);
            for s in 0..p {
                term *= r(a[2 * s], a[2 * s + 1], b[2 * s], b[2 * s + 1]);
            }
            total += term;
        }
    }
    let pairings: f64 = (1..=2 * p).map(|k| k as f64).product::<f64>() / 2f64.powi(p as i32);
    total / pairings
}

/// All sequences (i₁ < j₁, …, i_p < j_p) of pairwise disjoint index pairs.
fn pair_sequences(n: usize, p: usize) -> Vec<Vec<usize>> {
    fn extend(n: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == 2 * p {
            out.push(cur.clone());
            return;
        }
        for i in 0..n {
            for j in i + 1..n {
                if cur.contains(&i) || cur.contains(&j) {
                    continue;
                }
                cur.push(i);
                cur.push(j);
                extend(n, p, cur, out);
                cur.pop();
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(n, p, &mut Vec::new(), &mut out);
    out
}

fn index_mask(seq: &[usize]) -> u32 {
    seq.iter().fold(0, |m, &i| m | (1 << i))
}

/// Sign of the permutation taking `a` to `b` (same elements).
fn permutation_sign(a: &[usize], b: &[usize]) -> f64 {
    let mut perm: Vec<usize> = a
        .iter()
        .map(|x| b.iter().position(|y| y == x).unwrap())
        .collect();
    let mut sign = 1.0;
    for i in 0..perm.len() {
        while perm[i] != i {
            let j = perm[i];
            perm.swap(i, j);
            sign = -sign;
        }
    }
    sign
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shape::elementary_symmetric;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn shape_from(s: DMatrix<f64>) -> ShapeData {
        let n = s.nrows();
        let mut principal: Vec<f64> = s.clone().symmetric_eigenvalues().iter().copied().collect();
        principal.sort_by(|a, b| a.total_cmp(b));
        let elem_sym = elementary_symmetric(&principal);
        ShapeData {
            norm_a: principal.iter().fold(0.0, |m: f64, k| m.max(k.abs())),
            mean: elem_sym[1],
            gauss: None,
            principal,
            elem_sym,
            weingarten: s.clone(),
            frame_shape: s,
            g_inv: DMatrix::identity(n, n),
            sqrt_det_g: 1.0,
        }
    }

    #[test]
    fn pairing_counts() {
        assert_eq!(pair_sequences(4, 1).len(), 6);
        assert_eq!(pair_sequences(4, 2).len(), 6);
        assert_eq!(pair_sequences(6, 3).len(), 90);
    }

    #[test]
    fn unit_three_sphere_curvature() {
        let c = curvature_data(&shape_from(DMatrix::identity(3, 3))).unwrap();
        assert_relative_eq!(c.scalar, 6.0, epsilon = 1e-14);
        assert_relative_eq!(c.trace(1), 3.0, epsilon = 1e-14);
        assert_relative_eq!(c.r(0, 1, 0, 1), 1.0);
        assert_relative_eq!(c.r(0, 1, 1, 0), -1.0);
    }

    #[test]
    fn dimension_seven_is_rejected() {
        let err = curvature_data(&shape_from(DMatrix::identity(7, 7))).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDimension(7)));
    }

    fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| {
            let m = DMatrix::from_vec(n, n, v);
            (&m + m.transpose()) * 0.5
        })
    }

    proptest! {
        #[test]
        fn power_traces_match_elementary_symmetric_functions(
            n in 2usize..=6,
            seed in proptest::collection::vec(-2.0f64..2.0, 36),
        ) {
            let m = DMatrix::from_vec(n, n, seed[..n * n].to_vec());
            let s = (&m + m.transpose()) * 0.5;
            let shape = shape_from(s);
            let c = curvature_data(&shape).unwrap();
            for p in 1..=n / 2 {
                let expect = shape.c(2 * p);
                prop_assert!((c.trace(p) - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
            }
            prop_assert!((c.scalar - 2.0 * c.trace(1)).abs() <= 1e-9 * (1.0 + c.scalar.abs()));
        }

        #[test]
        fn four_dimensional_quadratic_identity(s in symmetric(4)) {
            let c = curvature_data(&shape_from(s)).unwrap();
            let rhs = (c.scalar * c.scalar - 4.0 * c.ricci_norm_sq + c.riemann_norm_sq) / 24.0;
            prop_assert!((c.trace(2) - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn riemann_symmetries(s in symmetric(3)) {
            let c = curvature_data(&shape_from(s)).unwrap();
            for i in 0..3 { for j in 0..3 { for k in 0..3 { for l in 0..3 {
                prop_assert!((c.r(i, j, k, l) + c.r(j, i, k, l)).abs() < 1e-12);
                prop_assert!((c.r(i, j, k, l) - c.r(k, l, i, j)).abs() < 1e-12);
                let bianchi = c.r(i, j, k, l) + c.r(i, k, l, j) + c.r(i, l, j, k);
                prop_assert!(bianchi.abs() < 1e-12);
            }}}}
        }
    }
}
