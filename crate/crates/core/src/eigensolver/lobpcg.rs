use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::assemble::DiscretePair;
use super::precond::Preconditioner;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Problems at most this large are solved densely.
const DENSE_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions {
    /// Number of eigenpairs wanted (at most 10).
    pub count: usize,
    /// Relative residual tolerance (at least 1e-10).
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { count: 1, tol: 1e-6, max_iter: 6000, seed: 0x51ab_1e5e_ed00_0001 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// ‖Kx − λMx‖_{D⁻¹} / (λ ‖x‖_M) with D = diag(M).
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub block_size: usize,
    pub dofs: usize,
    /// Node counts per axis, transverse last.
    pub mesh: Vec<usize>,
    pub kappa1_sq: f64,
    /// κ₁² − λ_min.
    pub gap: f64,
    pub tol: f64,
    pub seed: u64,
    /// M-orthonormal eigenvectors, one per column.
    #[serde(skip)]
    pub vectors: DMatrix<f64>,
}

impl EigenReport {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// xᵀKx / xᵀMx.
pub fn rayleigh(pair: &DiscretePair, x: &[f64]) -> Result<f64> {
    if x.len() != pair.len() {
        return Err(Error::InvalidArgument(format!(
            "vector of length {} for {} DOFs",
            x.len(),
            pair.len()
        )));
    }
    let m = pair.mass.form(x, x);
    if !(m > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(pair.stiffness.form(x, x) / m)
}

fn residuals(k: &CsrMatrix, m: &CsrMatrix, x: &DMatrix<f64>, lambda: &[f64], mdiag: &[f64]) -> Vec<f64> {
    let kx = k.mul_block(x);
    let mx = m.mul_block(x);
    (0..x.ncols())
        .map(|c| relative_residual(&kx, &mx, x, c, lambda[c], mdiag))
        .collect()
}

fn relative_residual(kx: &DMatrix<f64>, mx: &DMatrix<f64>, x: &DMatrix<f64>, c: usize, lambda: f64, mdiag: &[f64]) -> f64 {
    let mut r2 = 0.0;
    let mut xm = 0.0;
    for i in 0..kx.nrows() {
        let r = kx[(i, c)] - lambda * mx[(i, c)];
        r2 += r * r / mdiag[i];
        xm += x[(i, c)] * mx[(i, c)];
    }
    r2.sqrt() / (lambda.abs().max(f64::MIN_POSITIVE) * xm.sqrt())
}

fn report(pair: &DiscretePair, opts: &SolverOptions, block: usize, iterations: usize, values: Vec<f64>, vectors: DMatrix<f64>) -> EigenReport {
    let mdiag = pair.mass.diagonal();
    let res = residuals(&pair.stiffness, &pair.mass, &vectors, &values, &mdiag);
    let converged = res.iter().all(|&r| r < opts.tol);
    EigenReport {
        gap: pair.kappa1_sq - values[0],
        eigenvalues: values,
        residuals: res,
        iterations,
        converged,
        block_size: block,
        dofs: pair.len(),
        mesh: pair.mesh.shape(),
        kappa1_sq: pair.kappa1_sq,
        tol: opts.tol,
        seed: opts.seed,
        vectors,
    }
}

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows, a.ncols);
    for i in 0..a.nrows {
        for (j, v) in a.row(i) {
            d[(i, j)] = v;
        }
    }
    d
}

fn solve_dense(pair: &DiscretePair, opts: &SolverOptions) -> Result<EigenReport> {
    let k = dense(&pair.stiffness);
    let m = dense(&pair.mass);
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::AssemblyError("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::AssemblyError("singular mass factor".into()))?;
    let c = &linv * &k * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let count = opts.count.min(order.len());
    let values: Vec<f64> = order[..count].iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(k.nrows(), count, |r, c| eig.eigenvectors[(r, order[c])]);
    let vectors = linv.transpose() * y;
    Ok(report(pair, opts, count, 0, values, vectors))
}

/// B-orthonormal basis of span(S) via SVQB; returns C with (SC)ᵀ M (SC) = I.
fn svqb(gm: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gm.nrows();
    let d: Vec<f64> = (0..n).map(|i| 1.0 / gm[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * gm[(i, j)] * d[j]);
    let eig = SymmetricEigen::new(scaled);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 1e-13 * top).collect();
    DMatrix::from_fn(n, keep.len(), |i, c| {
        d[i] * eig.eigenvectors[(i, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
    })
}

fn hcat(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

/// Lowest eigenpairs of Kx = λMx by preconditioned block conjugate directions.
pub fn solve_lowest(pair: &DiscretePair, opts: &SolverOptions) -> Result<EigenReport> {
    if opts.count == 0 || opts.count > 10 {
        return Err(Error::InvalidArgument(format!("eigenpair count {} outside 1..=10", opts.count)));
    }
    if !(opts.tol >= 1e-10) {
        return Err(Error::InvalidArgument(format!("tolerance {} below 1e-10", opts.tol)));
    }
    let n = pair.len();
    if n == 0 {
        return Err(Error::AssemblyError("no free degrees of freedom".into()));
    }
    if n <= DENSE_LIMIT {
        return solve_dense(pair, opts);
    }
    let (k, m) = (&pair.stiffness, &pair.mass);
    let block = (opts.count + 2).min(n / 3);
    let mdiag = m.diagonal();
    let precond = Preconditioner::new(pair);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let x0 = DMatrix::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    let kx0 = k.mul_block(&x0);
    let mx0 = m.mul_block(&x0);
    let c = svqb(&(x0.transpose() * &mx0));
    let (mut x, mut kx, mut mx) = (&x0 * &c, &kx0 * &c, &mx0 * &c);
    let a = x.transpose() * &kx;
    let eig = SymmetricEigen::new((&a + a.transpose()) * 0.5);
    let (mut lambda, z) = sorted(&eig, block);
    x = &x * &z;
    kx = &kx * &z;
    mx = &mx * &z;

    let mut p: Option<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = None;
    for it in 1..=opts.max_iter {
        let r = &kx - &mx * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambda.clone()));
        let done = (0..opts.count).all(|c| relative_residual(&kx, &mx, &x, c, lambda[c], &mdiag) < opts.tol);
        if done {
            let vals = lambda[..opts.count].to_vec();
            let vecs = x.columns(0, opts.count).into_owned();
            return Ok(report(pair, opts, block, it - 1, vals, vecs));
        }
        let w = precond.apply(r);
        let kw = k.mul_block(&w);
        let mw = m.mul_block(&w);
        let (s, ks, ms) = match &p {
            Some((pp, kp, mp)) => (hcat(&[&x, &w, pp]), hcat(&[&kx, &kw, kp]), hcat(&[&mx, &mw, mp])),
            None => (hcat(&[&x, &w]), hcat(&[&kx, &kw]), hcat(&[&mx, &mw])),
        };
        let gm = s.transpose() * &ms;
        let gm = (&gm + gm.transpose()) * 0.5;
        let c = svqb(&gm);
        if c.ncols() < block {
            return Err(Error::AssemblyError("search space collapsed".into()));
        }
        let gk = s.transpose() * &ks;
        let gk = (&gk + gk.transpose()) * 0.5;
        let a = c.transpose() * gk * &c;
        let eig = SymmetricEigen::new((&a + a.transpose()) * 0.5);
        let (vals, y) = sorted(&eig, block);
        let z = &c * y;
        lambda = vals;
        let zx = z.rows(0, block).into_owned();
        let zr = z.rows(block, z.nrows() - block).into_owned();
        let rest = |full: &DMatrix<f64>| full.columns(block, full.ncols() - block).into_owned();
        let (sr, ksr, msr) = (rest(&s), rest(&ks), rest(&ms));
        let pn = &sr * &zr;
        let kpn = &ksr * &zr;
        let mpn = &msr * &zr;
        x = &x * &zx + &pn;
        kx = &kx * &zx + &kpn;
        mx = &mx * &zx + &mpn;
        p = Some((pn, kpn, mpn));
    }
    let vals = lambda[..opts.count].to_vec();
    let vecs = x.columns(0, opts.count).into_owned();
    let rep = report(pair, opts, block, opts.max_iter, vals, vecs);
    Err(Error::NoConvergence(Box::new(rep)))
}

fn sorted(eig: &SymmetricEigen<f64, nalgebra::Dyn>, count: usize) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order[..count].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), count, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}
