//! Domain types shared across the crate and the pre-generation validator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on probability and weight sums.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Nominal,
    Ordinal,
    Interval,
}

impl VariableKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Nominal => "nominal",
            VariableKind::Ordinal => "ordinal",
            VariableKind::Interval => "interval",
        }
    }

    /// Levels carry an order (ordinal or interval).
    pub fn is_ordered(self) -> bool {
        !matches!(self, VariableKind::Nominal)
    }
}

/// Ordered numeric level codes of a categorical variable.
///
/// Codes are kept exactly as declared, so both `0..M` and `1..=M` conventions
/// are representable and moment computations use the declared values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDomain {
    levels: Vec<i32>,
    kind: VariableKind,
}

impl VariableDomain {
    pub fn new(levels: Vec<i32>, kind: VariableKind) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::Spec(format!(
                "a variable needs at least 2 levels, got {}",
                levels.len()
            )));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Spec(format!(
                "level codes must be strictly increasing: {levels:?}"
            )));
        }
        Ok(Self { levels, kind })
    }

    /// Levels `0..m` with the given kind.
    pub fn zero_based(m: usize, kind: VariableKind) -> Result<Self> {
        Self::new((0..m as i32).collect(), kind)
    }

    pub fn levels(&self) -> &[i32] {
        &self.levels
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn index_of(&self, code: i32) -> Option<usize> {
        self.levels.binary_search(&code).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub domain: VariableDomain,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: VariableDomain) -> Self {
        Self {
            name: name.into(),
            domain,
        }
    }

    pub(crate) fn require_interval(&self) -> Result<()> {
        match self.domain.kind() {
            VariableKind::Interval => Ok(()),
            kind => Err(Error::Kind {
                name: self.name.clone(),
                kind: kind.as_str(),
                required: "interval",
            }),
        }
    }
}

/// A categorical distribution over a variable's levels.
///
/// [`ProbabilityVector::new`] checks the simplex constraints; [`from_raw`]
/// defers them to [`validate_spec`] so that invalid profiles can be reported
/// in bulk.
///
/// [`from_raw`]: ProbabilityVector::from_raw
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let pv = Self(probs);
        match pv.issues().into_iter().next() {
            Some(issue) => Err(Error::Spec(issue)),
            None => Ok(pv),
        }
    }

    pub fn from_raw(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    /// Point mass on level index `index` of an `m`-level variable.
    pub fn degenerate(m: usize, index: usize) -> Self {
        let mut probs = vec![0.0; m];
        probs[index] = 1.0;
        Self(probs)
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Human-readable list of violated simplex constraints.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.0.is_empty() {
            out.push("empty probability vector".to_string());
            return out;
        }
        if let Some(bad) = self
            .0
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            out.push(format!("probability {bad} outside [0, 1]"));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            out.push(format!("probability sum ≠ 1 (sum = {sum})"));
        }
        out
    }

    /// Expectation of the level codes under this distribution.
    pub fn mean(&self, levels: &[i32]) -> f64 {
        self.0
            .iter()
            .zip(levels)
            .map(|(p, &x)| p * f64::from(x))
            .sum()
    }

    pub fn second_moment(&self, levels: &[i32]) -> f64 {
        self.0
            .iter()
            .zip(levels)
            .map(|(p, &x)| p * f64::from(x) * f64::from(x))
            .sum()
    }
}

/// Cluster weights and exact subject counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    weights: Vec<f64>,
    counts: Vec<usize>,
}

impl ClusterSpec {
    /// Explicit weights and counts. Both must have one entry per cluster.
    pub fn new(weights: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        check_weights(&weights)?;
        if weights.len() != counts.len() {
            return Err(Error::Spec(format!(
                "{} weights but {} counts",
                weights.len(),
                counts.len()
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Spec(format!("cluster weights sum to {sum}, not 1")));
        }
        Ok(Self { weights, counts })
    }

    /// Weights proportional to the given counts.
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(Error::Spec("cluster counts sum to zero".into()));
        }
        let weights = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self::new(weights, counts)
    }

    /// Counts derived from weights by largest-remainder rounding, so that they
    /// sum to `n` exactly. Ties in the remainder go to the lower cluster index.
    pub fn from_weights(weights: Vec<f64>, n: usize) -> Result<Self> {
        check_weights(&weights)?;
        let counts = largest_remainder(&weights, n);
        Self::new(weights, counts)
    }

    /// `c` clusters with weight `1/c` each.
    pub fn equal(c: usize, n: usize) -> Result<Self> {
        if c == 0 {
            return Err(Error::Spec("at least one cluster is required".into()));
        }
        Self::from_weights(vec![1.0 / c as f64; c], n)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_clusters(&self) -> usize {
        self.weights.len()
    }

    pub fn num_subjects(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn has_equal_weights(&self) -> bool {
        let first = self.weights[0];
        self.weights.iter().all(|w| (w - first).abs() <= 1e-12)
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Spec("at least one cluster is required".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Spec(format!("negative cluster weight in {weights:?}")));
    }
    Ok(())
}

fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().take(n.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    counts
}

/// The complete cluster-by-variable table of categorical distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileMatrix {
    variables: Vec<Variable>,
    /// `cells[c][p]`
    cells: Vec<Vec<ProbabilityVector>>,
}

impl ProfileMatrix {
    /// Checks shape only; probability constraints are reported by
    /// [`validate_spec`].
    pub fn new(variables: Vec<Variable>, cells: Vec<Vec<ProbabilityVector>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Dimension("profile has no cluster rows".into()));
        }
        if variables.is_empty() {
            return Err(Error::Dimension("profile has no variables".into()));
        }
        for (c, row) in cells.iter().enumerate() {
            if row.len() != variables.len() {
                return Err(Error::Dimension(format!(
                    "cluster {} has {} cells for {} variables",
                    c + 1,
                    row.len(),
                    variables.len()
                )));
            }
        }
        Ok(Self { variables, cells })
    }

    pub fn num_clusters(&self) -> usize {
        self.cells.len()
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, p: usize) -> &Variable {
        &self.variables[p]
    }

    /// Distribution of variable `p` in cluster `c` (both zero-based).
    pub fn cell(&self, c: usize, p: usize) -> &ProbabilityVector {
        &self.cells[c][p]
    }

    pub fn rows(&self) -> &[Vec<ProbabilityVector>] {
        &self.cells
    }

    pub fn column(&self, p: usize) -> impl Iterator<Item = &ProbabilityVector> + '_ {
        self.cells.iter().map(move |row| &row[p])
    }

    pub fn identifiability(&self) -> Identifiability {
        let m = self
            .variables
            .iter()
            .map(|v| v.domain.len())
            .min()
            .unwrap_or(2);
        Identifiability::evaluate(self.num_clusters(), self.num_variables(), m)
    }
}

/// Outcome of the `P ≥ 2·⌈log_M C⌉ + 1` check for latent-class identifiability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Identifiability {
    pub clusters: usize,
    pub variables: usize,
    pub min_levels: usize,
    pub required: usize,
}

impl Identifiability {
    pub fn evaluate(clusters: usize, variables: usize, min_levels: usize) -> Self {
        Self {
            clusters,
            variables,
            min_levels,
            required: 2 * ceil_log(min_levels, clusters) + 1,
        }
    }

    pub fn satisfied(&self) -> bool {
        self.variables >= self.required
    }
}

/// Smallest `k` with `base^k >= value`, in integer arithmetic.
fn ceil_log(base: usize, value: usize) -> usize {
    let base = base.max(2) as u128;
    let mut k = 0;
    let mut power: u128 = 1;
    while power < value as u128 {
        power *= base;
        k += 1;
    }
    k
}

/// Target dependence inside one homogenous group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependenceTarget {
    Covariance(f64),
    Correlation(f64),
}

impl DependenceTarget {
    pub fn value(self) -> f64 {
        match self {
            DependenceTarget::Covariance(v) | DependenceTarget::Correlation(v) => v,
        }
    }
}

/// Ordered homogenous groups of contributing variables, plus trailing noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    sizes: Vec<usize>,
    targets: Vec<Option<DependenceTarget>>,
    noise_count: usize,
}

impl GroupStructure {
    /// `targets` may be empty (no targets) or have one entry per group.
    pub fn new(
        sizes: Vec<usize>,
        targets: Vec<Option<DependenceTarget>>,
        noise_count: usize,
    ) -> Result<Self> {
        let k = sizes.len();
        if k == 0 || !k.is_power_of_two() {
            return Err(Error::Spec(format!(
                "number of homogenous groups must be a power of 2, got {k}"
            )));
        }
        if let Some(g) = sizes.iter().position(|&l| l == 0) {
            return Err(Error::Spec(format!("group {} is empty", g + 1)));
        }
        let targets = if targets.is_empty() {
            vec![None; k]
        } else {
            targets
        };
        if targets.len() != k {
            return Err(Error::Spec(format!(
                "{} targets for {} groups",
                targets.len(),
                k
            )));
        }
        for (g, t) in targets.iter().enumerate() {
            match *t {
                Some(DependenceTarget::Correlation(r)) if !(r > 0.0 && r < 1.0) => {
                    return Err(Error::Spec(format!(
                        "group {}: correlation target {r} outside (0, 1)",
                        g + 1
                    )));
                }
                Some(DependenceTarget::Covariance(v)) if !(v >= 0.0 && v.is_finite()) => {
                    return Err(Error::Spec(format!(
                        "group {}: covariance target {v} is negative",
                        g + 1
                    )));
                }
                _ => {}
            }
        }
        Ok(Self {
            sizes,
            targets,
            noise_count,
        })
    }

    /// Number of homogenous groups.
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn targets(&self) -> &[Option<DependenceTarget>] {
        &self.targets
    }

    pub fn noise_count(&self) -> usize {
        self.noise_count
    }

    pub fn with_noise(mut self, noise_count: usize) -> Self {
        self.noise_count = noise_count;
        self
    }

    /// Contributing variables, `Σ l_v`.
    pub fn num_contributing(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn num_variables(&self) -> usize {
        self.num_contributing() + self.noise_count
    }

    /// Even cluster count implied by `k = 2^(C/2 - 1)`.
    pub fn num_clusters(&self) -> usize {
        2 * (self.k().trailing_zeros() as usize + 1)
    }

    /// Column ranges of each group, in declaration order.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&l| {
                let r = start..start + l;
                start += l;
                r
            })
            .collect()
    }

    /// Group index of contributing variable `p`, `None` for noise columns.
    pub fn group_of(&self, p: usize) -> Option<usize> {
        self.ranges().iter().position(|r| r.contains(&p))
    }
}

/// Generated observations together with their ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Row-major `n × P` level codes.
    values: Vec<i32>,
    /// One-based cluster labels.
    z: Vec<usize>,
    profile: ProfileMatrix,
    clusters: ClusterSpec,
    groups: Option<GroupStructure>,
    seed: u64,
}

impl Dataset {
    pub(crate) fn from_parts(
        values: Vec<i32>,
        z: Vec<usize>,
        profile: ProfileMatrix,
        clusters: ClusterSpec,
        groups: Option<GroupStructure>,
        seed: u64,
    ) -> Self {
        Self {
            values,
            z,
            profile,
            clusters,
            groups,
            seed,
        }
    }

    pub fn num_subjects(&self) -> usize {
        self.z.len()
    }

    pub fn num_variables(&self) -> usize {
        self.profile.num_variables()
    }

    pub fn variables(&self) -> &[Variable] {
        self.profile.variables()
    }

    pub fn value(&self, i: usize, p: usize) -> i32 {
        self.values[i * self.num_variables() + p]
    }

    pub fn row(&self, i: usize) -> &[i32] {
        let w = self.num_variables();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column(&self, p: usize) -> Vec<i32> {
        self.values
            .iter()
            .skip(p)
            .step_by(self.num_variables())
            .copied()
            .collect()
    }

    pub fn allocation(&self) -> &[usize] {
        &self.z
    }

    pub fn profile(&self) -> &ProfileMatrix {
        &self.profile
    }

    pub fn clusters(&self) -> &ClusterSpec {
        &self.clusters
    }

    pub fn groups(&self) -> Option<&GroupStructure> {
        self.groups.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Subset of rows whose true label is `cluster` (one-based).
    pub fn cluster_rows(&self, cluster: usize) -> impl Iterator<Item = &[i32]> + '_ {
        (0..self.num_subjects())
            .filter(move |&i| self.z[i] == cluster)
            .map(move |i| self.row(i))
    }

    /// Legal level codes, labels in `1..=C`, and exact per-cluster tallies.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.num_subjects();
        let w = self.num_variables();
        if self.values.len() != n * w {
            return Err(Error::Dimension(format!(
                "{} values for {n} subjects × {w} variables",
                self.values.len()
            )));
        }
        for i in 0..n {
            for (p, var) in self.variables().iter().enumerate() {
                let x = self.value(i, p);
                if var.domain.index_of(x).is_none() {
                    return Err(Error::Spec(format!(
                        "subject {}: value {x} is not a level of `{}`",
                        i + 1,
                        var.name
                    )));
                }
            }
        }
        let c = self.clusters.num_clusters();
        let mut tally = vec![0usize; c];
        for &zi in &self.z {
            if zi == 0 || zi > c {
                return Err(Error::Spec(format!("allocation label {zi} outside 1..={c}")));
            }
            tally[zi - 1] += 1;
        }
        if tally != self.clusters.counts() {
            return Err(Error::Spec(format!(
                "allocation tallies {tally:?} differ from counts {:?}",
                self.clusters.counts()
            )));
        }
        Ok(())
    }
}

/// Hard errors and warnings found in a specification.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    /// No hard errors: the specification can be generated.
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<String>> {
        if self.errors.is_empty() {
            Ok(self.warnings)
        } else {
            Err(Error::Spec(self.errors.join("; ")))
        }
    }
}

pub fn validate_spec(profile: &ProfileMatrix, clusters: &ClusterSpec) -> ValidationReport {
    let mut report = ValidationReport::default();

    if profile.num_clusters() != clusters.num_clusters() {
        report.errors.push(format!(
            "profile has {} cluster rows but {} clusters are declared",
            profile.num_clusters(),
            clusters.num_clusters()
        ));
    }
    let wsum: f64 = clusters.weights().iter().sum();
    if (wsum - 1.0).abs() > SUM_TOLERANCE {
        report
            .errors
            .push(format!("cluster weights sum to {wsum}, not 1"));
    }
    if clusters.counts().len() != clusters.num_clusters() {
        report.errors.push("cluster counts missing".to_string());
    } else if clusters.num_subjects() == 0 {
        report.errors.push("no subjects to generate".to_string());
    }

    for (c, row) in profile.rows().iter().enumerate() {
        for (p, pv) in row.iter().enumerate() {
            let var = profile.variable(p);
            if pv.len() != var.domain.len() {
                report.errors.push(format!(
                    "cluster {}, `{}`: {} probabilities for {} levels",
                    c + 1,
                    var.name,
                    pv.len(),
                    var.domain.len()
                ));
                continue;
            }
            for issue in pv.issues() {
                report
                    .errors
                    .push(format!("cluster {}, `{}`: {issue}", c + 1, var.name));
            }
        }
    }

    let id = profile.identifiability();
    if !id.satisfied() {
        report.warnings.push(format!(
            "identifiability: P = {} < 2·⌈log_{}({})⌉ + 1 = {}",
            id.variables, id.min_levels, id.clusters, id.required
        ));
    }
    report
}
