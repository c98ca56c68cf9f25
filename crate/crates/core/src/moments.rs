//! Exact marginal moments of interval variables under the cluster mixture.
//!
//! With local independence, the marginal covariance of two variables depends
//! on the clusters only through the per-cluster means `f[p][c]`:
//!
//! ```text
//! Var(x_p)      = Σ_c ψ_c E[x_p² | c] − (Σ_c ψ_c f[p][c])²
//! Cov(x_p, x_q) = Σ_c ψ_c f[p][c] f[q][c] − (Σ_c ψ_c f[p][c]) (Σ_c ψ_c f[q][c])
//! ```
//!
//! [`brute_force_moments`] recomputes the same quantities by enumerating the
//! joint distribution and serves as an independent check.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{ClusterSpec, ProbabilityVector, ProfileMatrix};

/// Largest joint support [`brute_force_moments`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Per-cluster expectations `f[p][c] = E(x_p | z = c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMeans {
    f: Vec<Vec<f64>>,
}

impl ClusterMeans {
    /// Means of variable `p`, one per cluster.
    pub fn variable(&self, p: usize) -> &[f64] {
        &self.f[p]
    }

    pub fn get(&self, p: usize, c: usize) -> f64 {
        self.f[p][c]
    }

    pub fn num_variables(&self) -> usize {
        self.f.len()
    }
}

pub fn cluster_means(profile: &ProfileMatrix) -> Result<ClusterMeans> {
    let mut f = Vec::with_capacity(profile.num_variables());
    for (p, var) in profile.variables().iter().enumerate() {
        var.require_interval()?;
        let levels = var.domain.levels();
        f.push(profile.column(p).map(|pv| pv.mean(levels)).collect());
    }
    Ok(ClusterMeans { f })
}

/// Marginal variance of one variable from its per-cluster distributions.
pub fn marginal_variance(weights: &[f64], levels: &[i32], column: &[ProbabilityVector]) -> f64 {
    assert_eq!(weights.len(), column.len(), "one distribution per cluster");
    let second: f64 = weights
        .iter()
        .zip(column)
        .map(|(w, pv)| w * pv.second_moment(levels))
        .sum();
    let mean: f64 = weights
        .iter()
        .zip(column)
        .map(|(w, pv)| w * pv.mean(levels))
        .sum();
    second - mean * mean
}

/// Marginal covariance of two distinct variables from their cluster means.
pub fn marginal_covariance(weights: &[f64], f_p: &[f64], f_q: &[f64]) -> f64 {
    assert_eq!(weights.len(), f_p.len(), "one mean per cluster");
    assert_eq!(weights.len(), f_q.len(), "one mean per cluster");
    let cross: f64 = (0..weights.len())
        .map(|c| weights[c] * f_p[c] * f_q[c])
        .sum();
    let mp: f64 = weights.iter().zip(f_p).map(|(w, f)| w * f).sum();
    let mq: f64 = weights.iter().zip(f_q).map(|(w, f)| w * f).sum();
    cross - mp * mq
}

/// Covariance as a sum over cluster pairs, valid for equal weights only:
/// `Σ_{c1<c2} ψ² (f_p,c1 − f_p,c2)(f_q,c1 − f_q,c2)`.
pub fn covariance_pairwise(weights: &[f64], f_p: &[f64], f_q: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::Precondition("no clusters".into()));
    }
    if f_p.len() != weights.len() || f_q.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} weights, {} and {} means",
            weights.len(),
            f_p.len(),
            f_q.len()
        )));
    }
    let psi = weights[0];
    if weights.iter().any(|w| (w - psi).abs() > 1e-12) {
        return Err(Error::Precondition(
            "pairwise covariance form requires equal cluster weights".into(),
        ));
    }
    let mut sum = 0.0;
    for c1 in 0..weights.len() {
        for c2 in c1 + 1..weights.len() {
            sum += (f_p[c1] - f_p[c2]) * (f_q[c1] - f_q[c2]);
        }
    }
    Ok(psi * psi * sum)
}

/// Within-group covariance for the grouped layout with equal weights and even
/// C: `0.25 (f_p,H − f_p,L)(f_q,H − f_q,L)`.
pub fn within_group_covariance(
    levels_p: &[i32],
    h_p: &ProbabilityVector,
    l_p: &ProbabilityVector,
    levels_q: &[i32],
    h_q: &ProbabilityVector,
    l_q: &ProbabilityVector,
) -> f64 {
    0.25 * (h_p.mean(levels_p) - l_p.mean(levels_p)) * (h_q.mean(levels_q) - l_q.mean(levels_q))
}

/// Theoretical mean vector, covariance and correlation matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrices {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    /// Undefined rows and columns for variables with zero variance.
    pub correlation: Matrix,
}

impl MomentMatrices {
    fn assemble(names: Vec<String>, mean: Vec<f64>, cov: Vec<f64>) -> Self {
        let n = names.len();
        let cells: Vec<Option<f64>> = cov.into_iter().map(Some).collect();
        let covariance = Matrix::from_cells(names.clone(), cells).expect("square");
        let sd: Vec<Option<f64>> = (0..n)
            .map(|p| {
                let v = covariance.get(p, p).unwrap_or(0.0);
                (v > 1e-15).then(|| v.sqrt())
            })
            .collect();
        let correlation = Matrix::from_fn(names, |p, q| {
            let (sp, sq) = (sd[p]?, sd[q]?);
            if p == q {
                Some(1.0)
            } else {
                Some(covariance.get(p, q)? / (sp * sq))
            }
        });
        Self {
            mean,
            covariance,
            correlation,
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.covariance.min_eigenvalue().is_none_or(|e| e >= -tol)
    }
}

fn check_shapes(profile: &ProfileMatrix, clusters: &ClusterSpec) -> Result<()> {
    if profile.num_clusters() != clusters.num_clusters() {
        return Err(Error::Dimension(format!(
            "profile has {} clusters, weights {}",
            profile.num_clusters(),
            clusters.num_clusters()
        )));
    }
    for var in profile.variables() {
        var.require_interval()?;
    }
    Ok(())
}

pub fn moment_matrices(profile: &ProfileMatrix, clusters: &ClusterSpec) -> Result<MomentMatrices> {
    check_shapes(profile, clusters)?;
    let w = clusters.weights();
    let f = cluster_means(profile)?;
    let n = profile.num_variables();
    let names: Vec<String> = profile.variables().iter().map(|v| v.name.clone()).collect();
    let mean: Vec<f64> = (0..n)
        .map(|p| w.iter().zip(f.variable(p)).map(|(a, b)| a * b).sum())
        .collect();
    // Cluster-constant columns (noise) have exactly zero covariance.
    let flat: Vec<bool> = (0..n)
        .map(|p| f.variable(p).iter().all(|&x| x == f.get(p, 0)))
        .collect();

    let mut cov = vec![0.0; n * n];
    for p in 0..n {
        let column: Vec<ProbabilityVector> = profile.column(p).cloned().collect();
        cov[p * n + p] = marginal_variance(w, profile.variable(p).domain.levels(), &column);
        for q in p + 1..n {
            let v = if flat[p] || flat[q] {
                0.0
            } else {
                marginal_covariance(w, f.variable(p), f.variable(q))
            };
            cov[p * n + q] = v;
            cov[q * n + p] = v;
        }
    }
    Ok(MomentMatrices::assemble(names, mean, cov))
}

/// Moments by enumerating `P(x) = Σ_c ψ_c Π_p φ_p^c(x_p)` over every joint
/// outcome. Limited to supports of at most [`BRUTE_FORCE_LIMIT`] outcomes.
pub fn brute_force_moments(
    profile: &ProfileMatrix,
    clusters: &ClusterSpec,
) -> Result<MomentMatrices> {
    check_shapes(profile, clusters)?;
    let n = profile.num_variables();
    let sizes: Vec<usize> = profile.variables().iter().map(|v| v.domain.len()).collect();
    let support = sizes.iter().map(|&m| m as u128).product::<u128>();
    if support > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(support, BRUTE_FORCE_LIMIT));
    }
    let levels: Vec<&[i32]> = profile
        .variables()
        .iter()
        .map(|v| v.domain.levels())
        .collect();
    let w = clusters.weights();

    let mut first = vec![0.0; n];
    let mut second = vec![0.0; n * n];
    let mut idx = vec![0usize; n];
    loop {
        let prob: f64 = (0..w.len())
            .map(|c| {
                w[c] * (0..n)
                    .map(|p| profile.cell(c, p).as_slice()[idx[p]])
                    .product::<f64>()
            })
            .sum();
        if prob != 0.0 {
            for p in 0..n {
                let xp = f64::from(levels[p][idx[p]]);
                first[p] += prob * xp;
                for q in 0..n {
                    second[p * n + q] += prob * xp * f64::from(levels[q][idx[q]]);
                }
            }
        }
        // Odometer step over the joint support.
        let mut p = 0;
        loop {
            if p == n {
                let names = profile.variables().iter().map(|v| v.name.clone()).collect();
                let cov = (0..n * n)
                    .map(|k| second[k] - first[k / n] * first[k % n])
                    .collect();
                return Ok(MomentMatrices::assemble(names, first, cov));
            }
            idx[p] += 1;
            if idx[p] < sizes[p] {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}
