#![allow(dead_code)]

use partsim::{ClusterSpec, ProbabilityVector, ProfileMatrix, Variable, VariableDomain, VariableKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random probability vector with occasional exact zeros.
pub fn random_probs(rng: &mut impl Rng, m: usize) -> ProbabilityVector {
    let mut w: Vec<f64> = (0..m)
        .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    let mut w: Vec<f64> = w.iter().map(|x| x / s).collect();
    // Put the rounding residue on the largest entry so the sum is 1 to 1e-15.
    let resid = 1.0 - w.iter().sum::<f64>();
    let imax = (0..m).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    w[imax] += resid;
    ProbabilityVector::new(w).unwrap()
}

/// Random interval profile; level codes start at 0 or 1, or are spread out.
pub fn random_profile(rng: &mut impl Rng, c: usize, p: usize, max_m: usize) -> ProfileMatrix {
    let vars: Vec<Variable> = (0..p)
        .map(|i| {
            let m = rng.random_range(2..=max_m);
            let start = rng.random_range(0..=1);
            let step = if rng.random_bool(0.2) { 3 } else { 1 };
            let levels = (0..m as i32).map(|k| start + step * k).collect();
            Variable::new(format!("x{}", i + 1), VariableDomain::new(levels, VariableKind::Interval).unwrap())
        })
        .collect();
    let cells = (0..c)
        .map(|_| vars.iter().map(|v| random_probs(rng, v.domain.len())).collect())
        .collect();
    ProfileMatrix::new(vars, cells).unwrap()
}

pub fn random_weights(rng: &mut impl Rng, c: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = w.iter().sum();
    let mut w: Vec<f64> = w.iter().map(|x| x / s).collect();
    let resid = 1.0 - w.iter().sum::<f64>();
    w[0] += resid;
    w
}

pub fn equal_clusters(c: usize, n: usize) -> ClusterSpec {
    ClusterSpec::equal(c, n).unwrap()
}

/// Cluster means `f[p][c]` straight from the profile cells.
pub fn means(profile: &ProfileMatrix) -> Vec<Vec<f64>> {
    (0..profile.num_variables())
        .map(|p| {
            let levels = profile.variable(p).domain.levels();
            (0..profile.num_clusters())
                .map(|c| {
                    profile
                        .cell(c, p)
                        .as_slice()
                        .iter()
                        .zip(levels)
                        .map(|(pr, &x)| pr * f64::from(x))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Equal-weight covariance as a sum over cluster pairs:
/// `ψ² Σ_{c1<c2} (f_p,c1 − f_p,c2)(f_q,c1 − f_q,c2)`.
pub fn pairwise_covariance(psi: f64, fp: &[f64], fq: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 0..fp.len() {
        for b in a + 1..fp.len() {
            s += (fp[a] - fp[b]) * (fq[a] - fq[b]);
        }
    }
    psi * psi * s
}

/// Concordant minus discordant pairs by scanning every pair.
pub fn pair_scan(x: &[i32], y: &[i32]) -> i64 {
    let mut s = 0i64;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let d = (x[i] - x[j]).signum() * (y[i] - y[j]).signum();
            s += i64::from(d);
        }
    }
    s
}
