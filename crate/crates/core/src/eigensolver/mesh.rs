use serde::Serialize;

use crate::error::{Error, Result};

/// Condition at one end of a non-periodic axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EndCondition {
    Dirichlet,
    Natural,
    /// All nodes at this end of the radial axis are one point.
    Pole,
}

/// Nodes of one horizontal chart axis with linear elements between them.
#[derive(Debug, Clone, Serialize)]
pub struct MeshAxis {
    /// Node coordinates; a periodic axis omits the endpoint equal to `lo + period`.
    pub nodes: Vec<f64>,
    pub period: Option<f64>,
    pub lo: EndCondition,
    pub hi: EndCondition,
}

impl MeshAxis {
    pub fn uniform(lo: f64, hi: f64, count: usize, lo_bc: EndCondition, hi_bc: EndCondition) -> Self {
        let nodes = (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64)
            .collect();
        MeshAxis { nodes, period: None, lo: lo_bc, hi: hi_bc }
    }

    pub fn from_nodes(nodes: Vec<f64>, lo_bc: EndCondition, hi_bc: EndCondition) -> Self {
        MeshAxis { nodes, period: None, lo: lo_bc, hi: hi_bc }
    }

    pub fn periodic(lo: f64, period: f64, count: usize) -> Self {
        let nodes = (0..count).map(|i| lo + period * i as f64 / count as f64).collect();
        MeshAxis {
            nodes,
            period: Some(period),
            lo: EndCondition::Natural,
            hi: EndCondition::Natural,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn element_count(&self) -> usize {
        if self.period.is_some() {
            self.nodes.len()
        } else {
            self.nodes.len() - 1
        }
    }

    /// Node indices and coordinates of element `e`.
    pub fn element(&self, e: usize) -> ([usize; 2], [f64; 2]) {
        let n = self.nodes.len();
        if e + 1 < n {
            ([e, e + 1], [self.nodes[e], self.nodes[e + 1]])
        } else {
            let p = self.period.expect("wrap-around element on a non-periodic axis");
            ([e, 0], [self.nodes[e], self.nodes[0] + p])
        }
    }

    fn is_dirichlet(&self, i: usize) -> bool {
        self.period.is_none()
            && ((i == 0 && self.lo == EndCondition::Dirichlet)
                || (i + 1 == self.nodes.len() && self.hi == EndCondition::Dirichlet))
    }
}

/// Tensor mesh of the truncated layer: horizontal chart axes times (−a, a).
#[derive(Debug, Clone, Serialize)]
pub struct TensorMesh {
    pub axes: Vec<MeshAxis>,
    /// Transverse node count (odd; quadratic elements, Dirichlet at ±a).
    pub u_nodes: usize,
    /// (radial axis, angular axis) when the radial axis starts at a pole.
    pub pole: Option<(usize, usize)>,
}

impl TensorMesh {
    pub fn new(axes: Vec<MeshAxis>, u_nodes: usize) -> Result<Self> {
        if u_nodes < 5 || u_nodes % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "transverse node count must be odd and at least 5, got {u_nodes}"
            )));
        }
        if let Some(ax) = axes.iter().find(|ax| ax.len() < 4) {
            return Err(Error::InvalidArgument(format!("axis with {} nodes; at least 4 required", ax.len())));
        }
        let pole_axes: Vec<usize> = (0..axes.len())
            .filter(|&i| axes[i].lo == EndCondition::Pole || axes[i].hi == EndCondition::Pole)
            .collect();
        let pole = match pole_axes.as_slice() {
            [] => None,
            [r] if axes[*r].lo == EndCondition::Pole => {
                let ang = (0..axes.len()).find(|&i| axes[i].period.is_some()).ok_or_else(|| {
                    Error::InvalidArgument("a pole needs a periodic angular axis".into())
                })?;
                Some((*r, ang))
            }
            _ => return Err(Error::InvalidArgument("only the lower end of one axis may be a pole".into())),
        };
        Ok(TensorMesh { axes, u_nodes, pole })
    }

    /// Disc of radius `r_max` in polar chart coordinates (radius, angle).
    pub fn polar(r_nodes: Vec<f64>, angles: usize, u_nodes: usize) -> Result<Self> {
        if r_nodes.first() != Some(&0.0) {
            return Err(Error::InvalidArgument("polar meshes start at radius 0".into()));
        }
        Self::new(
            vec![
                MeshAxis::from_nodes(r_nodes, EndCondition::Pole, EndCondition::Dirichlet),
                MeshAxis::periodic(0.0, 2.0 * std::f64::consts::PI, angles),
            ],
            u_nodes,
        )
    }

    /// Uniform polar mesh on [0, r_max].
    pub fn polar_uniform(r_max: f64, radial: usize, angles: usize, u_nodes: usize) -> Result<Self> {
        let nodes = (0..radial).map(|i| r_max * i as f64 / (radial - 1) as f64).collect();
        Self::polar(nodes, angles, u_nodes)
    }

    /// Uniform nodes on [0, r_core] followed by geometric nodes up to r_max.
    pub fn polar_graded(r_core: f64, core: usize, r_max: f64, outer: usize, angles: usize, u_nodes: usize) -> Result<Self> {
        if !(r_core > 0.0 && r_max > r_core) || core < 2 || outer < 1 {
            return Err(Error::InvalidArgument("graded mesh needs 0 < r_core < r_max".into()));
        }
        let mut nodes: Vec<f64> = (0..core).map(|i| r_core * i as f64 / (core - 1) as f64).collect();
        for i in 1..=outer {
            nodes.push(r_core * (r_max / r_core).powf(i as f64 / outer as f64));
        }
        Self::polar(nodes, angles, u_nodes)
    }

    /// Box ∏[−Lᵢ, Lᵢ] with the given end condition on every face.
    pub fn boxed(half_widths: &[f64], counts: &[usize], bc: EndCondition, u_nodes: usize) -> Result<Self> {
        let axes = half_widths
            .iter()
            .zip(counts)
            .map(|(&l, &c)| MeshAxis::uniform(-l, l, c, bc, bc))
            .collect();
        Self::new(axes, u_nodes)
    }

    pub fn horizontal_counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn horizontal_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    /// Node counts per axis with the transverse axis last.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = self.horizontal_counts();
        s.push(self.u_nodes);
        s
    }

    /// Largest coordinate reached along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        *self.axes[axis].nodes.last().unwrap()
    }

    pub fn u_coordinates(&self, a: f64) -> Vec<f64> {
        (0..self.u_nodes)
            .map(|k| -a + 2.0 * a * k as f64 / (self.u_nodes - 1) as f64)
            .collect()
    }

    /// Multi-index of a flat horizontal node index (first axis slowest).
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (d, ax) in self.axes.iter().enumerate().rev() {
            idx[d] = flat % ax.len();
            flat /= ax.len();
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn coordinates(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.axes).map(|(&i, ax)| ax.nodes[i]).collect()
    }

    pub fn dof_map(&self) -> DofMap {
        let nh = self.horizontal_nodes();
        let nu = self.u_nodes;
        let mut index = vec![None; nh * nu];
        let mut horizontal = vec![None; nh];
        let mut free_horizontal = 0u32;
        let mut nodes = Vec::new();
        for h in 0..nh {
            let idx = self.unflatten(h);
            let dirichlet = idx.iter().zip(&self.axes).any(|(&i, ax)| ax.is_dirichlet(i));
            let alias = match self.pole {
                Some((r, ang)) if idx[r] == 0 && idx[ang] != 0 => {
                    let mut rep = idx.clone();
                    rep[ang] = 0;
                    Some(self.flatten(&rep))
                }
                _ => None,
            };
            if !dirichlet {
                horizontal[h] = match alias {
                    Some(rep) => horizontal[rep],
                    None => {
                        free_horizontal += 1;
                        Some(free_horizontal - 1)
                    }
                };
            }
            for k in 0..nu {
                if dirichlet || k == 0 || k + 1 == nu {
                    continue;
                }
                index[h * nu + k] = match alias {
                    Some(rep) => index[rep * nu + k],
                    None => {
                        nodes.push((h, k));
                        Some(nodes.len() as u32 - 1)
                    }
                };
            }
        }
        DofMap { index, nodes, u_nodes: nu, horizontal, horizontal_count: free_horizontal as usize }
    }
}

/// Free degrees of freedom of a mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// DOF of each (horizontal node, transverse node), `None` on Dirichlet nodes.
    pub index: Vec<Option<u32>>,
    /// Representative (horizontal node, transverse node) of each DOF.
    pub nodes: Vec<(usize, usize)>,
    pub u_nodes: usize,
    /// Free horizontal index of each horizontal node; DOF = index · (u_nodes − 2) + k − 1.
    pub horizontal: Vec<Option<u32>>,
    pub horizontal_count: usize,
}

impl DofMap {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dof(&self, horizontal: usize, k: usize) -> Option<u32> {
        self.index[horizontal * self.u_nodes + k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pole_nodes_share_one_dof() {
        let m = TensorMesh::polar_uniform(1.0, 5, 8, 5).unwrap();
        let d = m.dof_map();
        // 3 interior transverse nodes; radial nodes 0 (pole) .. 3 free, 4 Dirichlet
        assert_eq!(d.len(), 3 * (1 + 3 * 8));
        for a in 0..8 {
            assert_eq!(d.dof(m.flatten(&[0, a]), 2), d.dof(0, 2));
        }
        assert!(d.dof(m.flatten(&[4, 3]), 2).is_none());
        for h in 0..m.horizontal_nodes() {
            for k in 1..4 {
                let expect = d.horizontal[h].map(|i| i * 3 + k as u32 - 1);
                assert_eq!(d.dof(h, k), expect);
            }
        }
    }

    #[test]
    fn periodic_axis_wraps() {
        let ax = MeshAxis::periodic(0.0, 1.0, 4);
        assert_eq!(ax.element_count(), 4);
        assert_eq!(ax.element(3), ([3, 0], [0.75, 1.0]));
    }

    #[test]
    fn invalid_meshes_are_rejected() {
        assert!(TensorMesh::boxed(&[1.0], &[3], EndCondition::Dirichlet, 5).is_err());
        assert!(TensorMesh::boxed(&[1.0], &[4], EndCondition::Dirichlet, 6).is_err());
        let flat_index = TensorMesh::boxed(&[1.0, 2.0], &[4, 5], EndCondition::Natural, 5).unwrap();
        assert_eq!(flat_index.unflatten(flat_index.flatten(&[2, 3])), vec![2, 3]);
    }
}
