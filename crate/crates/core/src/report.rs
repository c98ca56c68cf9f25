//! Theoretical-versus-sample reporting and the end-to-end pipeline.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::association::{
    association_matrix, sample_covariance, AssociationMatrix, CramersVariant, Measure,
    Observations,
};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::generator::{generate, write_allocation, write_data_csv, GenerateOptions};
use crate::matrix::{format_cell, Matrix};
use crate::model::{DependenceTarget, GroupStructure};
use crate::moments::{moment_matrices, MomentMatrices};

/// Artifact names written by [`run_pipeline`], in order.
pub const ARTIFACTS: [&str; 7] = [
    "data.csv",
    "allocation.txt",
    "theoretical.csv",
    "sample.csv",
    "calibration.csv",
    "group_summary.csv",
    "manifest.json",
];

/// Mean of the off-diagonal cells inside each group's diagonal block.
///
/// The matrix may include trailing noise columns. Singleton groups and blocks
/// with no defined cell give `None`.
pub fn within_group_averages(matrix: &Matrix, groups: &GroupStructure) -> Result<Vec<Option<f64>>> {
    let dim = matrix.dim();
    if dim != groups.num_contributing() && dim != groups.num_variables() {
        return Err(Error::Dimension(format!(
            "{dim}×{dim} matrix for groups covering {} variables ({} with noise)",
            groups.num_contributing(),
            groups.num_variables()
        )));
    }
    Ok(groups
        .ranges()
        .into_iter()
        .map(|r| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in r.clone() {
                for j in r.clone() {
                    if i != j {
                        if let Some(v) = matrix.get(i, j) {
                            sum += v;
                            count += 1;
                        }
                    }
                }
            }
            (count > 0).then(|| sum / count as f64)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSummary {
    pub group: usize,
    pub size: usize,
    pub target: Option<DependenceTarget>,
    pub theoretical: Option<f64>,
    pub sample: Option<f64>,
    pub gap: Option<f64>,
}

/// Per-group averages of theory and sample. Covariance targets are compared
/// on covariances, everything else on correlations.
pub fn group_summary(
    groups: &GroupStructure,
    theory: &MomentMatrices,
    sample_cov: &Matrix,
    sample_cor: &Matrix,
) -> Result<Vec<GroupSummary>> {
    let t_cov = within_group_averages(&theory.covariance, groups)?;
    let t_cor = within_group_averages(&theory.correlation, groups)?;
    let s_cov = within_group_averages(sample_cov, groups)?;
    let s_cor = within_group_averages(sample_cor, groups)?;
    Ok(groups
        .sizes()
        .iter()
        .enumerate()
        .map(|(v, &size)| {
            let target = groups.targets().get(v).copied().flatten();
            let (theoretical, sample) = match target {
                Some(DependenceTarget::Covariance(_)) => (t_cov[v], s_cov[v]),
                _ => (t_cor[v], s_cor[v]),
            };
            GroupSummary {
                group: v + 1,
                size,
                target,
                theoretical,
                sample,
                gap: theoretical.zip(sample).map(|(a, b)| (a - b).abs()),
            }
        })
        .collect())
}

pub fn write_group_summary<W: Write>(rows: &[GroupSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "size", "target_kind", "target", "theoretical", "sample", "gap"])?;
    for r in rows {
        let (kind, value) = match r.target {
            Some(DependenceTarget::Covariance(v)) => ("covariance", Some(v)),
            Some(DependenceTarget::Correlation(v)) => ("correlation", Some(v)),
            None => ("none", None),
        };
        w.write_record([
            r.group.to_string(),
            r.size.to_string(),
            kind.to_string(),
            format_cell(value),
            format_cell(r.theoretical),
            format_cell(r.sample),
            format_cell(r.gap),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<group summary>", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub max_abs_gap: Option<f64>,
    pub mean_abs_gap: Option<f64>,
    /// `|a − b|` per cell, undefined where either side is.
    pub gaps: Matrix,
    /// Share of off-diagonal cells with a non-zero first value whose signs
    /// agree.
    pub sign_agreement: Option<f64>,
}

/// Compares two matrices over their off-diagonal cells.
pub fn compare_matrices(a: &Matrix, b: &Matrix) -> Result<ComparisonReport> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{0}×{0} versus {1}×{1}", a.dim(), b.dim())));
    }
    let gaps = Matrix::from_fn(a.names().to_vec(), |i, j| {
        Some((a.get(i, j)? - b.get(i, j)?).abs())
    });
    let (mut max, mut sum, mut count) = (0.0f64, 0.0, 0usize);
    let (mut agree, mut signed) = (0usize, 0usize);
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            if i == j {
                continue;
            }
            if let Some(g) = gaps.get(i, j) {
                max = max.max(g);
                sum += g;
                count += 1;
            }
            if let (Some(x), Some(y)) = (a.get(i, j), b.get(i, j)) {
                if x.abs() > 1e-12 {
                    signed += 1;
                    if x.signum() == y.signum() {
                        agree += 1;
                    }
                }
            }
        }
    }
    Ok(ComparisonReport {
        max_abs_gap: (count > 0).then_some(max),
        mean_abs_gap: (count > 0).then(|| sum / count as f64),
        gaps,
        sign_agreement: (signed > 0).then(|| agree as f64 / signed as f64),
    })
}

/// Unbiased sample covariances of every pair of columns.
pub fn sample_covariance_matrix(obs: &Observations) -> Matrix {
    let names = obs.variables().iter().map(|v| v.name.clone()).collect();
    Matrix::from_fn(names, |i, j| sample_covariance(obs.column(i), obs.column(j)))
}

fn write_theoretical<W: Write>(m: &MomentMatrices, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["p", "q", "covariance", "correlation"])?;
    let names = m.covariance.names();
    for (i, a) in names.iter().enumerate() {
        for (j, b) in names.iter().enumerate() {
            w.write_record([
                a,
                b,
                &format_cell(m.covariance.get(i, j)),
                &format_cell(m.correlation.get(i, j)),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<theoretical>", e))?;
    Ok(())
}

fn write_sample<W: Write>(matrices: &[AssociationMatrix], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["p".to_string(), "q".to_string()];
    header.extend(matrices.iter().map(|m| m.measure.tag()));
    w.write_record(&header)?;
    let names = matrices[0].values.names();
    for (i, a) in names.iter().enumerate() {
        for (j, b) in names.iter().enumerate() {
            let mut rec = vec![a.clone(), b.clone()];
            rec.extend(matrices.iter().map(|m| format_cell(m.values.get(i, j))));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<sample>", e))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PipelineOptions {
    /// Replaces the configured seed.
    pub seed: Option<u64>,
    pub shuffle: bool,
    /// Size of a dedicated rayon pool; the global pool when `None`.
    pub threads: Option<usize>,
    pub variant: CramersVariant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactHash {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to rerun a pipeline: the effective configuration and
/// options, plus hashes of what they produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub shuffle: bool,
    pub cramers_variant: CramersVariant,
    pub config_sha256: String,
    pub config: Config,
    pub warnings: Vec<String>,
    pub artifacts: Vec<ArtifactHash>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            seed: Some(self.seed),
            shuffle: self.shuffle,
            threads: None,
            variant: self.cramers_variant,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Reads a configuration and writes the seven artifacts into `out_dir`.
pub fn run_pipeline(config_path: &Path, out_dir: &Path, options: PipelineOptions) -> Result<PipelineOutput> {
    let config = Config::load(config_path).map_err(|e| Error::stage("config", e))?;
    run_config(&config, out_dir, options)
}

/// Reruns the configuration recorded in a manifest.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<PipelineOutput> {
    let manifest = Manifest::load(manifest_path).map_err(|e| Error::stage("config", e))?;
    run_config(&manifest.config, out_dir, manifest.options())
}

pub fn run_config(config: &Config, out_dir: &Path, options: PipelineOptions) -> Result<PipelineOutput> {
    match options.threads {
        None => pipeline(config, out_dir, options),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
            pool.install(|| pipeline(config, out_dir, options))
        }
    }
}

fn pipeline(config: &Config, out_dir: &Path, options: PipelineOptions) -> Result<PipelineOutput> {
    let mut config = config.clone();
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    let scenario = config.resolve().map_err(|e| Error::stage("resolve", e))?;
    let spec = &scenario.spec;

    let dataset = generate(spec, GenerateOptions { shuffle: options.shuffle })
        .map_err(|e| Error::stage("generate", e))?;
    let theory = moment_matrices(&spec.profile, &spec.clusters).map_err(|e| Error::stage("moments", e))?;

    let obs = Observations::from_dataset(&dataset);
    let measures = [
        Measure::Pearson,
        Measure::TauC,
        Measure::Vcc,
        Measure::CramersV(options.variant),
    ];
    let sample = measures
        .iter()
        .map(|&m| association_matrix(&obs, m))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::stage("association", e))?;

    let summary = match &spec.groups {
        Some(g) => group_summary(g, &theory, &sample_covariance_matrix(&obs), &sample[0].values)
            .map_err(|e| Error::stage("report", e))?,
        None => Vec::new(),
    };

    let write = |e| Error::stage("write", e);
    let contents: Vec<Vec<u8>> = vec![
        buffer(|b| write_data_csv(&dataset, b)).map_err(write)?,
        buffer(|b| write_allocation(&dataset, b)).map_err(write)?,
        buffer(|b| write_theoretical(&theory, b)).map_err(write)?,
        buffer(|b| write_sample(&sample, b)).map_err(write)?,
        buffer(|b| match &scenario.calibration {
            Some(cal) => cal.write_csv(b),
            None => crate::calibration::CalibrationResult::empty_csv(b),
        })
        .map_err(write)?,
        buffer(|b| write_group_summary(&summary, b)).map_err(write)?,
    ];

    let config_json = serde_json::to_string(&config).map_err(|e| write(e.into()))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        shuffle: options.shuffle,
        cramers_variant: options.variant,
        config_sha256: sha256_hex(config_json.as_bytes()),
        config,
        warnings: scenario.warnings.clone(),
        artifacts: ARTIFACTS
            .iter()
            .zip(&contents)
            .map(|(name, bytes)| ArtifactHash {
                name: name.to_string(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            })
            .collect(),
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| write(e.into()))?;
    manifest_bytes.push(b'\n');

    std::fs::create_dir_all(out_dir).map_err(|e| write(Error::io(out_dir, e)))?;
    let mut files = Vec::with_capacity(ARTIFACTS.len());
    for (name, bytes) in ARTIFACTS.iter().zip(contents.iter().chain([&manifest_bytes])) {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| write(Error::io(&path, e)))?;
        files.push(path);
    }
    Ok(PipelineOutput { files, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn averages_on_identity() {
        let m = Matrix::from_fn(names(5), |i, j| Some(if i == j { 1.0 } else { 0.0 }));
        let g = GroupStructure::new(vec![1, 4], vec![], 0).unwrap();
        assert_eq!(within_group_averages(&m, &g).unwrap(), [None, Some(0.0)]);
    }

    #[test]
    fn averages_skip_noise_and_check_size() {
        let m = Matrix::from_fn(names(4), |i, j| Some((i + j) as f64));
        let g = GroupStructure::new(vec![2, 1], vec![], 1).unwrap();
        assert_eq!(within_group_averages(&m, &g).unwrap(), [Some(1.0), None]);
        let g = GroupStructure::new(vec![1, 1], vec![], 1).unwrap();
        assert!(within_group_averages(&m, &g).is_err());
    }

    #[test]
    fn self_comparison() {
        let m = Matrix::from_fn(names(3), |i, j| Some(i as f64 - j as f64 + 0.5));
        let r = compare_matrices(&m, &m).unwrap();
        assert_eq!(r.max_abs_gap, Some(0.0));
        assert_eq!(r.mean_abs_gap, Some(0.0));
        assert_eq!(r.sign_agreement, Some(1.0));
        assert!(compare_matrices(&m, &Matrix::from_fn(names(2), |_, _| None)).is_err());
    }
}
