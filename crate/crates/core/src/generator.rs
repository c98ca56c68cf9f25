//! Subject allocation, profile binding and dataset generation.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    validate_spec, ClusterSpec, Dataset, GroupStructure, ProbabilityVector, ProfileMatrix,
    Variable,
};
use crate::patterns::{Label, PatternMatrix};
use crate::sampling::{SeededStream, Thresholds};

/// Substream reserved for the optional subject shuffle.
const SHUFFLE_STREAM: u64 = u64::MAX;

/// Everything needed to generate a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub clusters: ClusterSpec,
    pub profile: ProfileMatrix,
    pub groups: Option<GroupStructure>,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Validates the profile against the clusters; warnings are returned.
    pub fn new(
        clusters: ClusterSpec,
        profile: ProfileMatrix,
        groups: Option<GroupStructure>,
        seed: u64,
    ) -> Result<(Self, Vec<String>)> {
        let warnings = validate_spec(&profile, &clusters).into_result()?;
        if let Some(g) = &groups {
            if g.num_variables() != profile.num_variables() {
                return Err(Error::Dimension(format!(
                    "group structure covers {} variables, profile has {}",
                    g.num_variables(),
                    profile.num_variables()
                )));
            }
        }
        Ok((
            Self {
                clusters,
                profile,
                groups,
                seed,
            },
            warnings,
        ))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Seeded shuffle of subject order instead of cluster-contiguous blocks.
    pub shuffle: bool,
}

/// One-based cluster labels, `n_c` copies of `c` in contiguous blocks.
pub fn allocate_subjects(clusters: &ClusterSpec) -> Result<Vec<usize>> {
    if clusters.counts().len() != clusters.num_clusters() {
        return Err(Error::Spec(format!(
            "{} counts for {} clusters",
            clusters.counts().len(),
            clusters.num_clusters()
        )));
    }
    if clusters.num_subjects() == 0 {
        return Err(Error::Spec("no subjects to allocate".into()));
    }
    Ok(clusters
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c + 1, n))
        .collect())
}

/// Replaces H/L/A labels with concrete distributions.
///
/// `h` and `l` hold one vector per contributing (non-A) column in order, `a`
/// one vector per noise column in order. `variables` covers every column.
pub fn bind_pattern(
    pattern: &PatternMatrix,
    variables: Vec<Variable>,
    h: &[ProbabilityVector],
    l: &[ProbabilityVector],
    a: &[ProbabilityVector],
) -> Result<ProfileMatrix> {
    let width = pattern.num_variables();
    if variables.len() != width {
        return Err(Error::Dimension(format!(
            "{} variables for {width} pattern columns",
            variables.len()
        )));
    }
    let noise_cols: Vec<bool> = (0..width)
        .map(|p| pattern.get(0, p) == Label::A)
        .collect();
    for (p, &noise) in noise_cols.iter().enumerate() {
        if pattern.column(p).iter().any(|&lab| (lab == Label::A) != noise) {
            return Err(Error::Dimension(format!(
                "column {} mixes noise and cluster labels",
                p + 1
            )));
        }
    }
    let contributing = noise_cols.iter().filter(|&&n| !n).count();
    let noise = width - contributing;
    if h.len() != contributing || l.len() != contributing {
        return Err(Error::Dimension(format!(
            "{contributing} contributing columns but {} H and {} L vectors",
            h.len(),
            l.len()
        )));
    }
    if a.len() != noise {
        return Err(Error::Dimension(format!(
            "{noise} noise columns but {} A vectors",
            a.len()
        )));
    }

    // Column index → position within its own kind.
    let mut ordinal = Vec::with_capacity(width);
    let (mut ci, mut ni) = (0, 0);
    for &is_noise in &noise_cols {
        if is_noise {
            ordinal.push(ni);
            ni += 1;
        } else {
            ordinal.push(ci);
            ci += 1;
        }
    }

    let cells = pattern
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(p, lab)| match lab {
                    Label::H => h[ordinal[p]].clone(),
                    Label::L => l[ordinal[p]].clone(),
                    Label::A => a[ordinal[p]].clone(),
                })
                .collect()
        })
        .collect();
    ProfileMatrix::new(variables, cells)
}

/// Draws a dataset from the specification.
///
/// Each `(subject, variable)` cell uses its own seeded substream, so the
/// result is identical for any rayon pool size.
pub fn generate(spec: &GeneratorSpec, options: GenerateOptions) -> Result<Dataset> {
    validate_spec(&spec.profile, &spec.clusters).into_result()?;
    let mut z = allocate_subjects(&spec.clusters)?;
    if options.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(SHUFFLE_STREAM);
        z.shuffle(&mut rng);
    }

    let profile = &spec.profile;
    let width = profile.num_variables();
    let thresholds: Vec<Vec<Thresholds>> = profile
        .rows()
        .iter()
        .map(|row| row.iter().map(Thresholds::new).collect())
        .collect();

    let mut values = vec![0i32; z.len() * width];
    values
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| {
            let cluster = z[i] - 1;
            for (p, slot) in row.iter_mut().enumerate() {
                let t = SeededStream::new(spec.seed, i, p).standard_normal();
                let s = thresholds[cluster][p].band(t);
                *slot = profile.variable(p).domain.levels()[s];
            }
        });

    let dataset = Dataset::from_parts(
        values,
        z,
        spec.profile.clone(),
        spec.clusters.clone(),
        spec.groups.clone(),
        spec.seed,
    );
    dataset.check_invariants()?;
    Ok(dataset)
}

/// Data file: header of variable names, one row of level codes per subject.
pub fn write_data_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset.variables().iter().map(|v| v.name.as_str()))?;
    for i in 0..dataset.num_subjects() {
        w.write_record(dataset.row(i).iter().map(i32::to_string))?;
    }
    w.flush().map_err(|e| Error::io("<data>", e))?;
    Ok(())
}

/// Allocation file: one cluster label per line.
pub fn write_allocation<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let mut text = String::with_capacity(dataset.num_subjects() * 3);
    for z in dataset.allocation() {
        text.push_str(&z.to_string());
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<allocation>", e))
}
