//! Grouping sampled trajectories into homotopy candidates and picking the
//! warm start.
//!
//! Trajectories are compared with the cost-weighted distance
//! `sum_k (xi_k - xi'_k)^T W (xi_k - xi'_k)`, `W = blkdiag(C^T Q C, R)`,
//! agglomerated with group-average linkage (UPGMA), and the dendrogram is cut
//! at a fixed fraction of its highest merge.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::ParticleEnsemble;
use crate::problem::{Trajectory, TrajectoryProblem};

pub const DEFAULT_CUT_FRACTION: f64 = 0.5;
pub const DENDROGRAM_CSV_HEADER: &str = "left,right,height,size";

/// `blkdiag(C^T Q C, R)`.
pub fn cost_weight(problem: &TrajectoryProblem) -> DMatrix<f64> {
    let (nx, nu) = (problem.nx(), problem.nu());
    let mut w = DMatrix::zeros(nx + nu, nx + nu);
    w.view_mut((0, 0), (nx, nx))
        .copy_from(&(problem.c.transpose() * &problem.q * &problem.c));
    w.view_mut((nx, nx), (nu, nu)).copy_from(&problem.r);
    w
}

pub fn trajectory_distance(a: &[DVector<f64>], b: &[DVector<f64>], weight: &DMatrix<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("trajectory length", a.len(), b.len()));
    }
    let mut total = 0.0;
    for (k, (xa, xb)) in a.iter().zip(b).enumerate() {
        if xa.len() != weight.nrows() || xb.len() != weight.nrows() {
            return Err(Error::dim(format!("trajectory step {k}"), weight.nrows(), xa.len().max(xb.len())));
        }
        let d = xa - xb;
        total += d.dot(&(weight * &d));
    }
    Ok(total)
}

/// Symmetric pairwise distances with an exactly zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix(DMatrix<f64>);

impl DistanceMatrix {
    /// Wraps a matrix after checking symmetry, zero diagonal and finiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("distance matrix", "square", format!("{:?}", m.shape())));
        }
        for i in 0..m.nrows() {
            if m[(i, i)] != 0.0 {
                return Err(Error::param("distance matrix", format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] || !m[(i, j)].is_finite() || m[(i, j)] < 0.0 {
                    return Err(Error::param(
                        "distance matrix",
                        format!("entry ({i}, {j}) is asymmetric, negative or non-finite"),
                    ));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn distance_matrix(trajs: &[Vec<DVector<f64>>], weight: &DMatrix<f64>) -> Result<DistanceMatrix> {
    let m = trajs.len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| trajectory_distance(&trajs[i], &trajs[j], weight))
        .collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(m, m);
    for (&(i, j), v) in pairs.iter().zip(values) {
        d[(i, j)] = v;
        d[(j, i)] = v;
    }
    Ok(DistanceMatrix(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Merge history; leaves are ids `0..m`, merge `t` creates id `m + t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn max_height(&self) -> f64 {
        self.merges.iter().map(|m| m.height).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(DENDROGRAM_CSV_HEADER);
        s.push('\n');
        for m in &self.merges {
            let _ = writeln!(s, "{},{},{:e},{}", m.left, m.right, m.height, m.size);
        }
        s
    }
}

/// Group-average agglomeration.
///
/// Clusters live in slots indexed by their smallest leaf. Instead of average
/// linkages the matrix holds total inter-cluster distance, so the
/// Lance-Williams update is a plain sum and each height is a single division
/// `total / (|A| |B|)`. Ties go to the lexicographically smallest slot pair.
pub fn agglomerate_group_average(d: &DistanceMatrix) -> Dendrogram {
    let m = d.len();
    let mut total = d.matrix().clone();
    let mut size = vec![1usize; m];
    let mut id: Vec<usize> = (0..m).collect();
    let mut active = vec![true; m];
    let mut merges = Vec::with_capacity(m.saturating_sub(1));

    for t in 0..m.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..m {
            if !active[i] {
                continue;
            }
            for j in i + 1..m {
                if !active[j] {
                    continue;
                }
                let avg = total[(i, j)] / (size[i] * size[j]) as f64;
                if best.is_none_or(|(b, _, _)| avg < b) {
                    best = Some((avg, i, j));
                }
            }
        }
        let (height, a, b) = best.expect("at least two active clusters");
        for c in 0..m {
            if active[c] && c != a && c != b {
                let s = total[(a, c)] + total[(b, c)];
                total[(a, c)] = s;
                total[(c, a)] = s;
            }
        }
        merges.push(Merge {
            left: id[a],
            right: id[b],
            height,
            size: size[a] + size[b],
        });
        size[a] += size[b];
        id[a] = m + t;
        active[b] = false;
    }
    Dendrogram { leaves: m, merges }
}

/// Flat cluster labels; clusters are numbered by ascending smallest member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub clusters: usize,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Cuts at `fraction * max height`; merges at or above the cut are not applied.
pub fn cut_dendrogram(dend: &Dendrogram, fraction: f64) -> Result<ClusterAssignment> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::param("cut_fraction", "must lie in (0, 1]"));
    }
    let cut = fraction * dend.max_height();
    cut_at_height(dend, cut)
}

pub fn cut_at_height(dend: &Dendrogram, cut: f64) -> Result<ClusterAssignment> {
    let m = dend.leaves;
    let mut parent: Vec<usize> = (0..2 * m.max(1) - 1).collect();
    for (t, merge) in dend.merges.iter().enumerate() {
        if merge.left >= m + t || merge.right >= m + t {
            return Err(Error::param("dendrogram", format!("merge {t} references a later cluster")));
        }
        if merge.height < cut {
            let new = m + t;
            let l = find(&mut parent, merge.left);
            let r = find(&mut parent, merge.right);
            parent[l] = new;
            parent[r] = new;
        }
    }
    let mut root_label: Vec<Option<usize>> = vec![None; parent.len()];
    let mut labels = Vec::with_capacity(m);
    let mut next = 0;
    for leaf in 0..m {
        let root = find(&mut parent, leaf);
        let label = *root_label[root].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
        labels.push(label);
    }
    Ok(ClusterAssignment { labels, clusters: next })
}

/// Per-step weighted average of each cluster's trajectories, with weights
/// renormalized within the cluster at every step.
pub fn cluster_centers(ensemble: &ParticleEnsemble, assign: &ClusterAssignment) -> Result<Vec<Vec<DVector<f64>>>> {
    if assign.labels.len() != ensemble.len() {
        return Err(Error::dim("cluster labels", ensemble.len(), assign.labels.len()));
    }
    let horizon = ensemble.horizon();
    let dim = ensemble.nx + ensemble.nu;
    (0..assign.clusters)
        .map(|c| {
            let members = assign.members(c);
            (0..horizon)
                .map(|k| {
                    let wsum: f64 = members.iter().map(|&i| ensemble.weights[k][i]).sum();
                    if !(wsum > 0.0) {
                        return Err(Error::ZeroClusterWeight { cluster: c, step: k + 1 });
                    }
                    let mut center = DVector::zeros(dim);
                    for &i in &members {
                        let xi = DVector::from_column_slice(&ensemble.particles[i][k]);
                        center.axpy(ensemble.weights[k][i] / wsum, &xi, 1.0);
                    }
                    Ok(center)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct WarmStartChoice {
    pub trajectory: Trajectory,
    pub cluster: usize,
    pub scores: Vec<f64>,
}

/// Scores every center with the merit function and returns the lowest,
/// preferring the lowest cluster label on ties.
pub fn select_warm_start(
    problem: &TrajectoryProblem,
    centers: &[Vec<DVector<f64>>],
    alpha_merit: f64,
) -> Result<WarmStartChoice> {
    if centers.is_empty() {
        return Err(Error::param("centers", "need at least one cluster center"));
    }
    let trajs: Vec<Trajectory> = centers
        .iter()
        .map(|c| Trajectory::from_stacked(c, problem.nx()))
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = trajs
        .iter()
        .map(|t| problem.merit(t, alpha_merit))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (j, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = j;
        }
    }
    Ok(WarmStartChoice {
        trajectory: trajs[best].clone(),
        cluster: best,
        scores,
    })
}
