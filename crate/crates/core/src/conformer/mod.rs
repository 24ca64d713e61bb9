//! Conformers and 2D molecules, and the encoders that turn them into
//! vectors and attributed graphs.

mod gat;
mod perturb;
pub(crate) mod schnet;
mod weights;
mod xyz;

pub use gat::gat_forward;
pub use perturb::{apply_rigid_motion, perturb_conformer, RigidMotion};
pub use schnet::{rbf_centers, rbf_expand, schnet_lite_forward, schnet_readout, ssp};
pub use weights::{EncoderConfig, EncoderWeights, GatLayer, InteractionBlock, Linear};
pub use xyz::{atomic_number, element_symbol, parse_xyz, write_xyz};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

pub const MAX_ATOMIC_NUMBER: u32 = 118;

/// Atoms `Z` with Cartesian coordinates `R` (Å, one row per atom).
#[derive(Debug, Clone, PartialEq)]
pub struct Conformer {
    z: Vec<u32>,
    r: Array2<f64>,
}

impl Conformer {
    pub fn new(z: Vec<u32>, r: Array2<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::Empty("conformer has no atoms"));
        }
        if r.dim() != (z.len(), 3) {
            return Err(Error::Shape(format!(
                "coordinates are {:?}, expected ({}, 3)",
                r.dim(),
                z.len()
            )));
        }
        if let Some(&bad) = z.iter().find(|&&x| x == 0 || x > MAX_ATOMIC_NUMBER) {
            return Err(Error::InvalidParams(format!("atomic number {bad} outside 1..=118")));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("coordinates"));
        }
        Ok(Self { z, r })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn atomic_numbers(&self) -> &[u32] {
        &self.z
    }

    pub fn coordinates(&self) -> &Array2<f64> {
        &self.r
    }

    /// Same atoms with new coordinates.
    pub fn with_coordinates(&self, r: Array2<f64>) -> Result<Self> {
        Self::new(self.z.clone(), r)
    }

    /// Atom `i` of the result is atom `perm[i]` of `self`.
    pub fn permute_atoms(&self, perm: &[usize]) -> Result<Self> {
        crate::graph::check_permutation(perm, self.n())?;
        let z = perm.iter().map(|&p| self.z[p]).collect();
        Self::new(z, self.r.select(ndarray::Axis(0), perm))
    }
}

/// Euclidean distance matrix of the rows of `r`; exactly symmetric.
pub fn distance_matrix(r: &Array2<f64>) -> Array2<f64> {
    let n = r.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (0..r.ncols())
                .map(|c| (r[[i, c]] - r[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt();
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    out
}

/// Covalent-bond graph of a molecule with per-atom descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule2D {
    node_features: Array2<f64>,
    edges: Vec<(usize, usize)>,
    edge_features: Option<Array2<f64>>,
}

impl Molecule2D {
    pub fn new(
        node_features: Array2<f64>,
        edges: Vec<(usize, usize)>,
        edge_features: Option<Array2<f64>>,
    ) -> Result<Self> {
        let n = node_features.nrows();
        if n == 0 {
            return Err(Error::Empty("molecule has no atoms"));
        }
        if node_features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("node features"));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, &(i, j)) in edges.iter().enumerate() {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {k} = ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("edge {k} is a self-loop on {i}")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidGraph(format!("edge {k} = ({i}, {j}) is duplicated")));
            }
        }
        if let Some(ef) = &edge_features {
            if ef.nrows() != edges.len() {
                return Err(Error::Shape(format!(
                    "{} edge feature rows for {} edges",
                    ef.nrows(),
                    edges.len()
                )));
            }
            if ef.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("edge features"));
            }
        }
        Ok(Self {
            node_features,
            edges,
            edge_features,
        })
    }

    pub fn n(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn node_features(&self) -> &Array2<f64> {
        &self.node_features
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_features(&self) -> Option<&Array2<f64>> {
        self.edge_features.as_ref()
    }

    /// Relabel atoms: atom `i` of the result is atom `perm[i]` of `self`.
    pub fn permute_atoms(&self, perm: &[usize]) -> Result<Self> {
        crate::graph::check_permutation(perm, self.n())?;
        let inv = crate::graph::invert_permutation(perm);
        let x = self.node_features.select(ndarray::Axis(0), perm);
        let edges = self.edges.iter().map(|&(i, j)| (inv[i], inv[j])).collect();
        Self::new(x, edges, self.edge_features.clone())
    }
}

/// Distance-structured graph of a conformer with SchNet-lite node features
/// and uniform node weights. `cutoff` only limits message passing; `A`
/// keeps every pairwise distance.
pub fn conformer_to_graph(
    conf: &Conformer,
    enc: &EncoderWeights,
    cutoff: f64,
) -> Result<AttributedGraph> {
    let h = schnet_lite_forward(conf, enc, cutoff)?;
    let a = distance_matrix(conf.coordinates());
    AttributedGraph::new(h, a, None)
}
