use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::assemble::DiscretePair;
use super::sparse::CsrMatrix;

/// Largest n·bandwidth² accepted for the banded surface factorizations.
const BAND_WORK_LIMIT: f64 = 2e10;

/// Symmetric positive definite banded matrix factored as L Lᵀ.
#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    n: usize,
    bw: usize,
    /// Row i holds L[i, i−bw ..= i].
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factor K + shift·M; `None` if a pivot is not positive.
    pub(crate) fn factor(k: &CsrMatrix, m: &CsrMatrix, shift: f64, bw: usize) -> Option<Self> {
        let n = k.nrows;
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for (a, scale) in [(k, 1.0), (m, shift)] {
            for i in 0..n {
                for (j, v) in a.row(i) {
                    if j <= i {
                        l[i * w + bw + j - i] += scale * v;
                    }
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[i * w + bw + j - i];
                let lo = j0.max(j.saturating_sub(bw));
                for p in lo..j {
                    s -= l[i * w + bw + p - i] * l[j * w + bw + p - j];
                }
                if j == i {
                    if !(s > 0.0) {
                        return None;
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + bw + j - i] = s / l[j * w + bw];
                }
            }
        }
        Some(BandCholesky { n, bw, l })
    }

    pub(crate) fn solve(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for p in i.saturating_sub(bw)..i {
                s -= self.l[i * w + bw + p - i] * b[p];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let s = b[i] / self.l[i * w + bw];
            b[i] = s;
            for p in i.saturating_sub(bw)..i {
                b[p] -= self.l[i * w + bw + p - i] * s;
            }
        }
    }
}

fn bandwidth(a: &CsrMatrix) -> usize {
    (0..a.nrows)
        .flat_map(|i| a.row(i).map(move |(j, _)| i.abs_diff(j)))
        .max()
        .unwrap_or(0)
}

/// Quadratic-element stiffness and mass on (−a, a) with Dirichlet ends.
fn transverse_matrices(a: f64, u_nodes: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let h = 2.0 * a / (u_nodes - 1) as f64 * 2.0;
    let ke = DMatrix::from_row_slice(3, 3, &[7.0, -8.0, 1.0, -8.0, 16.0, -8.0, 1.0, -8.0, 7.0]) / (3.0 * h);
    let me = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, -1.0, 2.0, 16.0, 2.0, -1.0, 2.0, 4.0]) * (h / 30.0);
    let mut k = DMatrix::zeros(u_nodes, u_nodes);
    let mut m = DMatrix::zeros(u_nodes, u_nodes);
    for e in 0..(u_nodes - 1) / 2 {
        for p in 0..3 {
            for q in 0..3 {
                k[(2 * e + p, 2 * e + q)] += ke[(p, q)];
                m[(2 * e + p, 2 * e + q)] += me[(p, q)];
            }
        }
    }
    let inner = u_nodes - 2;
    (k.view((1, 1), (inner, inner)).into_owned(), m.view((1, 1), (inner, inner)).into_owned())
}

/// Approximate inverse of K − σM from the product of the surface and transverse problems.
#[derive(Debug, Clone)]
pub(crate) struct Separable {
    /// Transverse modes, M_u-orthonormal columns.
    modes: DMatrix<f64>,
    factors: Vec<BandCholesky>,
}

impl Separable {
    pub(crate) fn build(pair: &DiscretePair) -> Option<Self> {
        let nh = pair.dofs.horizontal_count;
        let bw = bandwidth(&pair.surface_stiffness).max(bandwidth(&pair.surface_mass));
        if nh == 0 || nh * (pair.dofs.u_nodes - 2) != pair.len() || (nh as f64) * (bw as f64).powi(2) > BAND_WORK_LIMIT {
            return None;
        }
        let (ku, mu) = transverse_matrices(pair.a, pair.dofs.u_nodes);
        let lm = mu.clone().cholesky()?.l();
        let linv = lm.try_inverse()?;
        let c = &linv * ku * linv.transpose();
        let eig = SymmetricEigen::new((&c + c.transpose()) * 0.5);
        let modes = linv.transpose() * &eig.eigenvectors;
        let lowest = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let sigma = 0.9 * lowest;
        let factors: Option<Vec<BandCholesky>> = eig
            .eigenvalues
            .as_slice()
            .par_iter()
            .map(|&mu_j| BandCholesky::factor(&pair.surface_stiffness, &pair.surface_mass, mu_j - sigma, bw))
            .collect();
        Some(Separable { modes, factors: factors? })
    }

    pub(crate) fn apply(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.modes.nrows();
        let nh = r.nrows() / m;
        let mut out = DMatrix::zeros(r.nrows(), r.ncols());
        for c in 0..r.ncols() {
            let rm = DMatrix::from_fn(nh, m, |h, k| r[(h * m + k, c)]);
            let z = rm * &self.modes;
            let cols: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|j| {
                    let mut y: Vec<f64> = z.column(j).iter().copied().collect();
                    self.factors[j].solve(&mut y);
                    y
                })
                .collect();
            let y = DMatrix::from_fn(nh, m, |h, j| cols[j][h]);
            let x = y * self.modes.transpose();
            for h in 0..nh {
                for k in 0..m {
                    out[(h * m + k, c)] = x[(h, k)];
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Preconditioner {
    Jacobi(Vec<f64>),
    Separable(Separable),
}

impl Preconditioner {
    pub(crate) fn new(pair: &DiscretePair) -> Self {
        match Separable::build(pair) {
            Some(s) => Preconditioner::Separable(s),
            None => Preconditioner::Jacobi(
                pair.stiffness.diagonal().iter().map(|d| 1.0 / d.max(f64::MIN_POSITIVE)).collect(),
            ),
        }
    }

    pub(crate) fn apply(&self, r: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Preconditioner::Jacobi(d) => {
                let mut r = r;
                for (i, s) in d.iter().enumerate() {
                    for c in 0..r.ncols() {
                        r[(i, c)] *= s;
                    }
                }
                r
            }
            Preconditioner::Separable(s) => s.apply(&r),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_cholesky_solves_tridiagonal() {
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n as u32 {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let k = CsrMatrix::from_triplets(n, n, t);
        let m = CsrMatrix::from_triplets(n, n, (0..n as u32).map(|i| (i, i, 1.0)).collect());
        let f = BandCholesky::factor(&k, &m, 0.5, 1).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = k.mul_vec(&x).iter().zip(&x).map(|(a, v)| a + 0.5 * v).collect();
        f.solve(&mut b);
        for (p, q) in b.iter().zip(&x) {
            assert!((p - q).abs() < 1e-13);
        }
        assert!(BandCholesky::factor(&k, &m, -3.0, 1).is_none());
    }

    #[test]
    fn transverse_ground_state() {
        let a = 0.5;
        let (k, m) = transverse_matrices(a, 41);
        let lm = m.cholesky().unwrap().l().try_inverse().unwrap();
        let c = &lm * k * lm.transpose();
        let low = SymmetricEigen::new((&c + c.transpose()) * 0.5).eigenvalues.min();
        let exact = (std::f64::consts::PI / (2.0 * a)).powi(2);
        assert!((low - exact).abs() < 1e-5 * exact);
    }
}
