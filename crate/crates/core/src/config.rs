//! JSON scenario files.
//!
//! A scenario gives the clusters and either an explicit profile table or a
//! grouped layout to be calibrated:
//!
//! ```json
//! {
//!   "clusters": { "n": 800 },
//!   "groups": {
//!     "sizes": [2, 2, 2, 2, 2, 2, 2, 2],
//!     "targets": [{"correlation": 0.4}, {"correlation": 0.5}, ...],
//!     "family": "snp",
//!     "pH": 0.95
//!   },
//!   "seed": 42
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_group, CalibrationResult, Family};
use crate::error::{Error, Result};
use crate::generator::{bind_pattern, GeneratorSpec};
use crate::model::{
    ClusterSpec, DependenceTarget, GroupStructure, ProbabilityVector, ProfileMatrix, Variable,
    VariableDomain, VariableKind,
};
use crate::patterns::{grouped_pattern, pad_groups_with, PatternMatrix, DEFAULT_PAD_SIZE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub clusters: ClustersConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<Vec<VariableConfig>>,
    /// `C × P` table of probability vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<Vec<Vec<f64>>>>,
    /// Group annotation for an explicit profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_structure: Option<GroupStructureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupsConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<NoiseConfig>,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClustersConfig {
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

fn interval() -> VariableKind {
    VariableKind::Interval
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    pub levels: Vec<i32>,
    #[serde(default = "interval")]
    pub kind: VariableKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub name: String,
    pub levels: Vec<i32>,
    pub probs: Vec<f64>,
    #[serde(default = "interval")]
    pub kind: VariableKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupStructureConfig {
    pub sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Option<DependenceTarget>>,
    #[serde(default)]
    pub noise: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Snp,
    Binary,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PadConfig {
    #[serde(default = "default_pad_size")]
    pub size: usize,
}

fn default_pad_size() -> usize {
    DEFAULT_PAD_SIZE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsConfig {
    /// Checked against the group count after padding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<Option<DependenceTarget>>,
    /// Pads to a power-of-two group count with correlation-0.01 groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad: Option<PadConfig>,
    pub family: FamilyName,
    /// High-profile parameter: allele probability for SNPs, `P(x = 1)` for
    /// binary variables.
    #[serde(rename = "pH", default, skip_serializing_if = "Option::is_none")]
    pub p_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<i32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<VariableKind>,
}

/// A resolved configuration, ready to generate.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: GeneratorSpec,
    pub warnings: Vec<String>,
    pub calibration: Option<CalibrationResult>,
    pub pattern: Option<PatternMatrix>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Explicit-profile configuration that resolves back to `spec`.
    pub fn from_spec(spec: &GeneratorSpec) -> Self {
        let profile = &spec.profile;
        Self {
            clusters: ClustersConfig {
                c: Some(spec.clusters.num_clusters()),
                weights: Some(spec.clusters.weights().to_vec()),
                counts: Some(spec.clusters.counts().to_vec()),
                n: None,
            },
            variables: Some(
                profile
                    .variables()
                    .iter()
                    .map(|v| VariableConfig {
                        name: v.name.clone(),
                        levels: v.domain.levels().to_vec(),
                        kind: v.domain.kind(),
                    })
                    .collect(),
            ),
            profile: Some(
                profile
                    .rows()
                    .iter()
                    .map(|row| row.iter().map(|pv| pv.as_slice().to_vec()).collect())
                    .collect(),
            ),
            group_structure: spec.groups.as_ref().map(|g| GroupStructureConfig {
                sizes: g.sizes().to_vec(),
                targets: g.targets().to_vec(),
                noise: g.noise_count(),
            }),
            groups: None,
            noise: Vec::new(),
            seed: spec.seed,
        }
    }

    pub fn resolve(&self) -> Result<Scenario> {
        match (&self.profile, &self.groups) {
            (Some(_), Some(_)) => Err(Error::Spec("give either `profile` or `groups`, not both".into())),
            (None, None) => Err(Error::Spec("one of `profile` or `groups` is required".into())),
            (Some(profile), None) => self.resolve_profile(profile),
            (None, Some(groups)) => self.resolve_groups(groups),
        }
    }

    fn noise_columns(&self) -> Result<(Vec<Variable>, Vec<ProbabilityVector>)> {
        let mut vars = Vec::new();
        let mut probs = Vec::new();
        for nc in &self.noise {
            let v = Variable::new(nc.name.clone(), VariableDomain::new(nc.levels.clone(), nc.kind)?);
            let pv = ProbabilityVector::new(nc.probs.clone())
                .map_err(|e| Error::Spec(format!("noise `{}`: {e}", nc.name)))?;
            if pv.len() != v.domain.len() {
                return Err(Error::Dimension(format!(
                    "noise `{}` has {} probabilities for {} levels",
                    nc.name,
                    pv.len(),
                    v.domain.len()
                )));
            }
            vars.push(v);
            probs.push(pv);
        }
        Ok((vars, probs))
    }

    fn cluster_spec(&self, c: usize) -> Result<ClusterSpec> {
        let cc = &self.clusters;
        let spec = match (&cc.counts, &cc.weights) {
            (Some(counts), weights) => {
                if counts.len() != c {
                    return Err(Error::Spec(format!("{} counts for {c} clusters", counts.len())));
                }
                let spec = match weights {
                    Some(w) => ClusterSpec::new(w.clone(), counts.clone())?,
                    None => ClusterSpec::from_counts(counts.clone())?,
                };
                if let Some(n) = cc.n {
                    if n != spec.num_subjects() {
                        return Err(Error::Spec(format!(
                            "counts sum to {}, but n = {n}",
                            spec.num_subjects()
                        )));
                    }
                }
                spec
            }
            (None, weights) => {
                let n = cc.n.ok_or_else(|| Error::Spec("clusters need `n` or `counts`".into()))?;
                match weights {
                    Some(w) if w.len() != c => {
                        return Err(Error::Spec(format!("{} weights for {c} clusters", w.len())))
                    }
                    Some(w) => ClusterSpec::from_weights(w.clone(), n)?,
                    None => ClusterSpec::equal(c, n)?,
                }
            }
        };
        Ok(spec)
    }

    fn resolve_profile(&self, table: &[Vec<Vec<f64>>]) -> Result<Scenario> {
        let vars = self
            .variables
            .as_ref()
            .ok_or_else(|| Error::Spec("an explicit profile needs `variables`".into()))?;
        let c = table.len();
        if let Some(declared) = self.clusters.c {
            if declared != c {
                return Err(Error::Spec(format!("clusters.C = {declared}, but the profile has {c} rows")));
            }
        }
        let mut variables = vars
            .iter()
            .map(|v| Ok(Variable::new(v.name.clone(), VariableDomain::new(v.levels.clone(), v.kind)?)))
            .collect::<Result<Vec<_>>>()?;
        let (noise_vars, noise_probs) = self.noise_columns()?;
        variables.extend(noise_vars);
        let cells = table
            .iter()
            .map(|row| {
                let mut out: Vec<ProbabilityVector> =
                    row.iter().map(|p| ProbabilityVector::from_raw(p.clone())).collect();
                out.extend(noise_probs.iter().cloned());
                out
            })
            .collect();
        let profile = ProfileMatrix::new(variables, cells)?;
        let groups = self
            .group_structure
            .as_ref()
            .map(|g| GroupStructure::new(g.sizes.clone(), g.targets.clone(), g.noise))
            .transpose()?;
        let clusters = self.cluster_spec(c)?;
        let (spec, warnings) = GeneratorSpec::new(clusters, profile, groups, self.seed)?;
        Ok(Scenario {
            spec,
            warnings,
            calibration: None,
            pattern: None,
        })
    }

    fn resolve_groups(&self, gc: &GroupsConfig) -> Result<Scenario> {
        if self.variables.is_some() || self.group_structure.is_some() {
            return Err(Error::Spec(
                "`variables` and `group_structure` only apply to an explicit profile".into(),
            ));
        }
        let (mut sizes, mut targets) = (gc.sizes.clone(), gc.targets.clone());
        if let Some(pad) = &gc.pad {
            let real = sizes
                .iter()
                .zip(&targets)
                .map(|(&l, t)| match t {
                    Some(DependenceTarget::Correlation(r)) => Ok((l, *r)),
                    _ => Err(Error::Spec("padding needs a correlation target for every group".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            if real.len() != sizes.len() {
                return Err(Error::Spec("padding needs a correlation target for every group".into()));
            }
            let padded = pad_groups_with(&real, pad.size)?;
            sizes = padded.sizes().to_vec();
            targets = padded.targets().to_vec();
        }
        if let Some(k) = gc.k {
            if k != sizes.len() {
                return Err(Error::Spec(format!("k = {k}, but {} groups are defined", sizes.len())));
            }
        }
        let (noise_vars, noise_probs) = self.noise_columns()?;
        let groups = GroupStructure::new(sizes, targets, noise_vars.len())?;

        let (pattern, derived) = grouped_pattern(&groups)?;
        let c = match self.clusters.c {
            None => derived,
            Some(c) if c == derived => c,
            Some(c) if c + 1 == derived && c > 0 => c,
            Some(c) => {
                return Err(Error::Spec(format!(
                    "{} groups imply C = {derived} (or {} for the odd layout), got C = {c}",
                    groups.k(),
                    derived - 1
                )))
            }
        };
        let pattern = pattern.truncate(c);

        let family = match gc.family {
            FamilyName::Snp => Family::Snp { high: require_ph(gc)? },
            FamilyName::Binary => Family::Binary { high: require_ph(gc)? },
            FamilyName::Explicit => {
                let (Some(h), Some(l)) = (&gc.h, &gc.l) else {
                    return Err(Error::Spec("the explicit family needs `h` and `l`".into()));
                };
                let levels = gc
                    .levels
                    .clone()
                    .ok_or_else(|| Error::Spec("the explicit family needs `levels`".into()))?;
                Family::Explicit {
                    levels,
                    h: ProbabilityVector::from_raw(h.clone()),
                    l: ProbabilityVector::from_raw(l.clone()),
                }
            }
        };
        let has_targets = groups.targets().iter().any(Option::is_some);
        let (calibration, h, l) = if has_targets {
            let cal = calibrate_group(&groups, &family)?;
            let (h, l) = (cal.h_vectors(), cal.l_vectors());
            (Some(cal), h, l)
        } else {
            let Family::Explicit { h, l, .. } = &family else {
                return Err(Error::Spec(format!(
                    "the {} family needs `targets` to solve for L",
                    family.name()
                )));
            };
            let n = groups.num_contributing();
            (None, vec![h.clone(); n], vec![l.clone(); n])
        };

        let kind = gc.kind.unwrap_or(VariableKind::Interval);
        let domain = VariableDomain::new(family.levels(), kind)?;
        let mut variables: Vec<Variable> = (1..=groups.num_contributing())
            .map(|i| Variable::new(format!("x{i}"), domain.clone()))
            .collect();
        variables.extend(noise_vars);

        let profile = bind_pattern(&pattern, variables, &h, &l, &noise_probs)?;
        let clusters = self.cluster_spec(c)?;
        let (spec, warnings) = GeneratorSpec::new(clusters, profile, Some(groups), self.seed)?;
        Ok(Scenario {
            spec,
            warnings,
            calibration,
            pattern: Some(pattern),
        })
    }
}

fn require_ph(gc: &GroupsConfig) -> Result<f64> {
    gc.p_h
        .ok_or_else(|| Error::Spec(format!("the {:?} family needs `pH`", gc.family).to_lowercase()))
}
