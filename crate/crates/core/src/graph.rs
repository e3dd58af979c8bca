//! Inter-building communication graph.
//!
//! Edge strength mixes a geographic Gaussian kernel with an attribute
//! similarity kernel:
//!
//! ```text
//! w_ij = α exp(-d_ij² / 2σ_d²) + β exp(-‖f_i - f_j‖² / 2σ_f²)
//! ```
//!
//! Aggregation runs over `N_i ∪ {i}`, so every node also carries a self
//! weight `w_ii`, taken as its strongest incident weight (capped at `α + β`).
//! Degrees and the symmetric normalisation `w_ij / √(d_i d_j)` are computed
//! once at construction; the graph is immutable afterwards.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::sim::BuildingConfig;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("invalid graph configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphParams {
    pub alpha: f64,
    pub beta: f64,
    /// Distance bandwidth (km); `None` uses the median pairwise distance.
    pub sigma_d: Option<f64>,
    /// Attribute bandwidth; `None` uses the median pairwise attribute distance.
    pub sigma_f: Option<f64>,
    pub edge_threshold: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            alpha: 0.5,
            beta: 0.5,
            sigma_d: None,
            sigma_f: None,
            edge_threshold: 0.0,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return Err(GraphError::Config(format!(
                "need alpha, beta >= 0 and alpha + beta > 0, got {} and {}",
                self.alpha, self.beta
            )));
        }
        for (name, s) in [("sigma_d", self.sigma_d), ("sigma_f", self.sigma_f)] {
            if let Some(s) = s {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(GraphError::Config(format!("{name} must be positive, got {s}")));
                }
            }
        }
        if !(self.edge_threshold >= 0.0) {
            return Err(GraphError::Config("edge_threshold must be >= 0".into()));
        }
        Ok(())
    }

    pub fn max_weight(&self) -> f64 {
        self.alpha + self.beta
    }
}

/// Bandwidths actually used by a kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidths {
    pub sigma_d: f64,
    pub sigma_f: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn edge_weight(
    loc_i: [f64; 2],
    loc_j: [f64; 2],
    f_i: &[f64],
    f_j: &[f64],
    alpha: f64,
    beta: f64,
    bw: Bandwidths,
) -> f64 {
    let d2 = sq_dist(&loc_i, &loc_j);
    let f2 = sq_dist(f_i, f_j);
    alpha * (-d2 / (2.0 * bw.sigma_d * bw.sigma_d)).exp()
        + beta * (-f2 / (2.0 * bw.sigma_f * bw.sigma_f)).exp()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 0 { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}

fn positive_or_one(v: Option<f64>) -> f64 {
    match v {
        Some(x) if x > 1e-12 => x,
        _ => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingGraph {
    pub ids: Vec<usize>,
    /// Symmetric weights; the diagonal holds the self weights.
    pub weights: Array2<f64>,
    /// `N_i`: indices `j != i` with `w_ij > ε`.
    pub neighbors: Vec<Vec<usize>>,
    /// `d_i = Σ_{j ∈ N_i ∪ {i}} w_ij`.
    pub degrees: Vec<f64>,
    /// `w_ij / √(d_i d_j)` on `N_i ∪ {i}`, zero elsewhere.
    pub norm_adjacency: Array2<f64>,
    pub bandwidths: Bandwidths,
}

impl BuildingGraph {
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Build from explicit per-node weights; used by the constructor and by
    /// tests that need hand-made topologies. `weights` must be symmetric with
    /// positive diagonal.
    pub fn from_weights(
        ids: Vec<usize>,
        weights: Array2<f64>,
        edge_threshold: f64,
        bandwidths: Bandwidths,
    ) -> Result<Self, GraphError> {
        let n = ids.len();
        if n == 0 {
            return Err(GraphError::Config("graph needs at least one building".into()));
        }
        if weights.dim() != (n, n) {
            return Err(GraphError::Config(format!("weights must be {n}x{n}")));
        }
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && weights[[i, j]] > edge_threshold).collect())
            .collect();
        let degrees: Vec<f64> = (0..n)
            .map(|i| weights[[i, i]] + neighbors[i].iter().map(|&j| weights[[i, j]]).sum::<f64>())
            .collect();
        if let Some(i) = degrees.iter().position(|d| !(*d > 0.0)) {
            return Err(GraphError::Config(format!("node {i} has non-positive degree")));
        }
        let mut norm = Array2::zeros((n, n));
        for i in 0..n {
            norm[[i, i]] = weights[[i, i]] / degrees[i];
            for &j in &neighbors[i] {
                norm[[i, j]] = weights[[i, j]] / (degrees[i] * degrees[j]).sqrt();
            }
        }
        Ok(BuildingGraph {
            ids,
            weights,
            neighbors,
            degrees,
            norm_adjacency: norm,
            bandwidths,
        })
    }

    pub fn write_weights_csv<W: Write>(&self, writer: W) -> Result<(), GraphError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.ids.iter().map(|id| id.to_string()));
        w.write_record(&header).map_err(std::io::Error::other)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.to_string()];
            row.extend(self.weights.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(std::io::Error::other)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn build_graph(configs: &[BuildingConfig], params: &GraphParams) -> Result<BuildingGraph, GraphError> {
    params.validate()?;
    let n = configs.len();
    if n == 0 {
        return Err(GraphError::Config("graph needs at least one building".into()));
    }
    let attrs: Vec<Vec<f64>> = configs.iter().map(|c| c.attributes()).collect();
    let mut dists = Vec::new();
    let mut fdists = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            dists.push(sq_dist(&configs[i].location, &configs[j].location).sqrt());
            fdists.push(sq_dist(&attrs[i], &attrs[j]).sqrt());
        }
    }
    let bw = Bandwidths {
        sigma_d: params.sigma_d.unwrap_or_else(|| positive_or_one(median(dists))),
        sigma_f: params.sigma_f.unwrap_or_else(|| positive_or_one(median(fdists))),
    };
    let cap = params.max_weight();
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = edge_weight(
                configs[i].location,
                configs[j].location,
                &attrs[i],
                &attrs[j],
                params.alpha,
                params.beta,
                bw,
            );
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    for i in 0..n {
        let strongest = (0..n).filter(|&j| j != i).map(|j| w[[i, j]]).fold(0.0, f64::max);
        w[[i, i]] = if strongest > 0.0 { strongest.min(cap) } else { cap };
    }
    BuildingGraph::from_weights(configs.iter().map(|c| c.id).collect(), w, params.edge_threshold, bw)
}
