use nalgebra::DMatrix;
use rayon::prelude::*;

use super::mesh::{DofMap, TensorMesh};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::geometry::{evaluate, SurfaceChart};
use crate::layer::{layer_metric_unchecked, LayerConfig};

/// Stiffness and mass matrices of the truncated layer on the free DOFs.
#[derive(Debug, Clone)]
pub struct DiscretePair {
    /// ∫ ⟨∇f, ∇g⟩ dΩ.
    pub stiffness: CsrMatrix,
    /// ∫ f g dΩ.
    pub mass: CsrMatrix,
    pub dofs: DofMap,
    pub mesh: TensorMesh,
    /// ∫ 1 dΩ over the meshed region.
    pub volume: f64,
    pub kappa1_sq: f64,
    pub a: f64,
    /// Largest a‖A‖ at the quadrature points.
    pub sup_a_norm: f64,
    /// Stiffness and mass of the surface Σ on the free horizontal nodes.
    pub surface_stiffness: CsrMatrix,
    pub surface_mass: CsrMatrix,
}

impl DiscretePair {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }
}

const G2: f64 = 0.211_324_865_405_187_1;

fn linear_points(x0: f64, x1: f64) -> [(f64, [f64; 2], [f64; 2], f64); 2] {
    let h = x1 - x0;
    [G2, 1.0 - G2].map(|s| (x0 + s * h, [1.0 - s, s], [-1.0 / h, 1.0 / h], 0.5 * h))
}

/// (u, values, derivatives, weight) at the 3 Gauss points of a quadratic element.
fn quadratic_points(u0: f64, u2: f64) -> [(f64, [f64; 3], [f64; 3], f64); 3] {
    let half = 0.5 * (u2 - u0);
    let r = (0.6f64).sqrt();
    [(-r, 5.0 / 9.0), (0.0, 8.0 / 9.0), (r, 5.0 / 9.0)].map(|(t, w)| {
        (
            u0 + (t + 1.0) * half,
            [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)],
            [(t - 0.5) / half, -2.0 * t / half, (t + 0.5) / half],
            w * half,
        )
    })
}

struct CellOutput {
    triplets: Vec<(u32, u32, f64, f64)>,
    surface: Vec<(u32, u32, f64, f64)>,
    volume: f64,
    sup_a_norm: f64,
}

/// Assemble the metric-weighted stiffness and mass matrices.
pub fn assemble(chart: &SurfaceChart, config: &LayerConfig, mesh: &TensorMesh) -> Result<DiscretePair> {
    let n = chart.n();
    if mesh.axes.len() != n {
        return Err(Error::AssemblyError(format!(
            "mesh has {} horizontal axes, chart has {n}",
            mesh.axes.len()
        )));
    }
    let dofs = mesh.dof_map();
    let cell_counts: Vec<usize> = mesh.axes.iter().map(|a| a.element_count()).collect();
    let cells: usize = cell_counts.iter().product();
    let corners = 1usize << n;
    let u_coords = mesh.u_coordinates(config.a);
    let u_elems = (mesh.u_nodes - 1) / 2;

    let outputs: Vec<Result<CellOutput>> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let mut rem = c;
            let mut elem = vec![0usize; n];
            for d in (0..n).rev() {
                elem[d] = rem % cell_counts[d];
                rem /= cell_counts[d];
            }
            let parts: Vec<_> = (0..n).map(|d| mesh.axes[d].element(elem[d])).collect();
            let local_nodes: Vec<usize> = (0..corners)
                .map(|a| {
                    let idx: Vec<usize> = (0..n).map(|d| parts[d].0[(a >> (n - 1 - d)) & 1]).collect();
                    mesh.flatten(&idx)
                })
                .collect();
            let nloc = corners * 3;
            let mut out = CellOutput { triplets: Vec::new(), surface: Vec::new(), volume: 0.0, sup_a_norm: 0.0 };
            let mut kloc = vec![DMatrix::<f64>::zeros(nloc, nloc); u_elems];
            let mut mloc = vec![DMatrix::<f64>::zeros(nloc, nloc); u_elems];
            let pts: Vec<_> = (0..n).map(|d| linear_points(parts[d].1[0], parts[d].1[1])).collect();
            let mut ks = DMatrix::<f64>::zeros(corners, corners);
            let mut ms = DMatrix::<f64>::zeros(corners, corners);

            for g in 0..corners {
                let gi: Vec<usize> = (0..n).map(|d| (g >> (n - 1 - d)) & 1).collect();
                let x: Vec<f64> = (0..n).map(|d| pts[d][gi[d]].0).collect();
                let wx: f64 = (0..n).map(|d| pts[d][gi[d]].3).product();
                let (forms, shape) = evaluate(chart, &x)?;
                let an = config.a * shape.norm_a;
                if an >= config.c0 {
                    return Err(Error::ValidityError { value: an, c0: config.c0, point: x });
                }
                out.sup_a_norm = out.sup_a_norm.max(an);
                let mut val = vec![0.0; corners];
                let mut grad = vec![vec![0.0; n]; corners];
                for a in 0..corners {
                    let ai: Vec<usize> = (0..n).map(|d| (a >> (n - 1 - d)) & 1).collect();
                    val[a] = (0..n).map(|d| pts[d][gi[d]].1[ai[d]]).product();
                    for (k, gk) in grad[a].iter_mut().enumerate() {
                        *gk = (0..n)
                            .map(|d| if d == k { pts[d][gi[d]].2[ai[d]] } else { pts[d][gi[d]].1[ai[d]] })
                            .product();
                    }
                }
                let ws = wx * shape.sqrt_det_g;
                let flat = layer_metric_unchecked(&forms, &shape, 0.0);
                for a in 0..corners {
                    for b in 0..corners {
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                s += grad[a][i] * flat.g_tangent_inv[(i, j)] * grad[b][j];
                            }
                        }
                        ks[(a, b)] += ws * s;
                        ms[(a, b)] += ws * val[a] * val[b];
                    }
                }
                for (e, (kl, ml)) in kloc.iter_mut().zip(mloc.iter_mut()).enumerate() {
                    for (u, lv, ld, wu) in quadratic_points(u_coords[2 * e], u_coords[2 * e + 2]) {
                        let metric = layer_metric_unchecked(&forms, &shape, u);
                        if !(metric.density > 0.0) {
                            return Err(Error::AssemblyError(format!(
                                "non-positive volume density {} at x = {x:?}, u = {u}",
                                metric.density
                            )));
                        }
                        let w = wx * wu * metric.density * shape.sqrt_det_g;
                        out.volume += w;
                        let gi_mat = &metric.g_tangent_inv;
                        let mut gg = vec![0.0; corners * corners];
                        for a in 0..corners {
                            for b in a..corners {
                                let mut s = 0.0;
                                for i in 0..n {
                                    for j in 0..n {
                                        s += grad[a][i] * gi_mat[(i, j)] * grad[b][j];
                                    }
                                }
                                gg[a * corners + b] = s;
                                gg[b * corners + a] = s;
                            }
                        }
                        for a in 0..corners {
                            for p in 0..3 {
                                let row = a * 3 + p;
                                for b in 0..corners {
                                    for q in 0..3 {
                                        let col = b * 3 + q;
                                        let vv = val[a] * val[b];
                                        kl[(row, col)] += w * (gg[a * corners + b] * lv[p] * lv[q] + vv * ld[p] * ld[q]);
                                        ml[(row, col)] += w * vv * lv[p] * lv[q];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            let hids: Vec<Option<u32>> = local_nodes.iter().map(|&h| dofs.horizontal[h]).collect();
            for (a, ia) in hids.iter().enumerate() {
                let Some(i) = ia else { continue };
                for (b, ib) in hids.iter().enumerate() {
                    let Some(j) = ib else { continue };
                    out.surface.push((*i, *j, ks[(a, b)], ms[(a, b)]));
                }
            }
            for e in 0..u_elems {
                let ids: Vec<Option<u32>> = (0..nloc)
                    .map(|l| dofs.dof(local_nodes[l / 3], 2 * e + l % 3))
                    .collect();
                for (r, ir) in ids.iter().enumerate() {
                    let Some(i) = ir else { continue };
                    for (s, is) in ids.iter().enumerate() {
                        let Some(j) = is else { continue };
                        out.triplets.push((*i, *j, kloc[e][(r, s)], mloc[e][(r, s)]));
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let mut volume = 0.0;
    let mut sup = 0.0f64;
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    let mut kst = Vec::new();
    let mut mst = Vec::new();
    for o in outputs {
        let o = o?;
        volume += o.volume;
        sup = sup.max(o.sup_a_norm);
        for (i, j, k, m) in o.triplets {
            kt.push((i, j, k));
            mt.push((i, j, m));
        }
        for (i, j, k, m) in o.surface {
            kst.push((i, j, k));
            mst.push((i, j, m));
        }
    }
    let nh = dofs.horizontal_count;
    let surface_stiffness = CsrMatrix::from_triplets(nh, nh, kst);
    let surface_mass = CsrMatrix::from_triplets(nh, nh, mst);
    let nd = dofs.len();
    let (stiffness, mass) = rayon::join(
        || CsrMatrix::from_triplets(nd, nd, kt),
        || CsrMatrix::from_triplets(nd, nd, mt),
    );
    if let Some(i) = mass.diagonal().iter().position(|&d| !(d > 0.0)) {
        return Err(Error::AssemblyError(format!("mass matrix not positive definite at DOF {i}")));
    }
    Ok(DiscretePair {
        stiffness,
        mass,
        dofs,
        mesh: mesh.clone(),
        volume,
        kappa1_sq: config.kappa1_sq(),
        a: config.a,
        sup_a_norm: sup,
        surface_stiffness,
        surface_mass,
    })
}
