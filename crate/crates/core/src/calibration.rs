//! Choosing H/L profiles that hit a within-group covariance or correlation.
//!
//! For the grouped layout with equal weights and even C, two variables in the
//! same group have covariance `0.25 (f_H − f_L)²` when they share H and L. The
//! solvers below fix the high-profile parameter and solve for the low one
//! within a one-parameter family:
//!
//! * binary variables on levels `{0, 1}`, parameterised by `P(x = 1)`;
//! * SNP genotypes on levels `{0, 1, 2}` in Hardy–Weinberg proportions
//!   `(p², 2p(1−p), (1−p)²)`, parameterised by the allele probability `p`.
//!
//! Covariance targets have closed forms. Correlation targets depend on the
//! solved parameter through the marginal variance and are solved by bisection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DependenceTarget, GroupStructure, ProbabilityVector};

/// Residual bound on the implicit correlation equations.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Agreement required when verifying user-supplied H/L vectors.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

const SNP_LEVELS: [i32; 3] = [0, 1, 2];
const BINARY_LEVELS: [i32; 2] = [0, 1];

/// Allele probability of a Hardy–Weinberg genotype distribution.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct HardyWeinbergParam(f64);

impl HardyWeinbergParam {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::Domain(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn probs(self) -> ProbabilityVector {
        let p = self.0;
        ProbabilityVector::from_raw(vec![p * p, 2.0 * p * (1.0 - p), (1.0 - p) * (1.0 - p)])
    }

    pub fn moments(self) -> HwMoments {
        let p = self.0;
        HwMoments {
            mean: 2.0 - 2.0 * p,
            second: (1.0 - p) * (4.0 - 2.0 * p),
            variance: 2.0 * p * (1.0 - p),
        }
    }
}

/// Genotype probabilities on levels `0, 1, 2`. Boundary values are rejected
/// because they collapse the distribution onto one level.
pub fn hw_probs(p: f64) -> Result<ProbabilityVector> {
    Ok(HardyWeinbergParam::new(p)?.probs())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HwMoments {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
}

pub fn hw_moments(p: f64) -> Result<HwMoments> {
    Ok(HardyWeinbergParam::new(p)?.moments())
}

fn binary_probs(success: f64) -> ProbabilityVector {
    ProbabilityVector::from_raw(vec![1.0 - success, success])
}

/// Root of an implicit calibration equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub value: f64,
    pub iterations: u32,
    pub residual: f64,
}

/// Bisection on `[lo, hi]` for a function with `f(lo) > 0 > f(hi)`.
///
/// Runs until the bracket stops shrinking in floating point, then checks the
/// residual against [`RESIDUAL_TOLERANCE`].
fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> std::result::Result<Root, String> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(format!(
            "no sign change on [{lo}, {hi}]: f(lo) = {f_lo:.3e}, f(hi) = {f_hi:.3e}"
        ));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    while iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let value = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let residual = f(value).abs();
    if residual > RESIDUAL_TOLERANCE {
        return Err(format!("bisection stalled with residual {residual:.3e}"));
    }
    Ok(Root {
        value,
        iterations,
        residual,
    })
}

/// Low success probability giving covariance `cov` between binary variables:
/// `Φ_L = Φ_H − 2√cov`.
pub fn calibrate_cov_binary(cov: f64, high: f64) -> Result<f64> {
    check_unit("high success probability", high)?;
    if !(cov >= 0.0) {
        return Err(Error::InfeasibleTarget(format!("covariance {cov} is negative")));
    }
    let low = high - 2.0 * cov.sqrt();
    if !(0.0..=1.0).contains(&low) {
        return Err(Error::InfeasibleTarget(format!(
            "covariance {cov} needs Φ_L = {low:.6}; the largest feasible covariance for Φ_H = {high} is {:.6}",
            0.25 * high * high
        )));
    }
    Ok(low)
}

/// Low success probability giving correlation `cor` between binary variables,
/// solving `Φ_H − Φ_L = √(4 cor [½(Φ_H + Φ_L) − ¼(Φ_H + Φ_L)²])` on `[0, Φ_H]`.
pub fn calibrate_cor_binary(cor: f64, high: f64) -> Result<Root> {
    check_unit("high success probability", high)?;
    check_correlation(cor)?;
    let residual = |low: f64| {
        let s = high + low;
        let var = 0.5 * s - 0.25 * s * s;
        (high - low) - (4.0 * cor * var).max(0.0).sqrt()
    };
    bisect(residual, 0.0, high).map_err(|why| {
        Error::InfeasibleTarget(format!(
            "correlation {cor} with Φ_H = {high} (max {:.6}): {why}",
            high / (2.0 - high)
        ))
    })
}

/// Low allele probability giving covariance `cov` between SNPs:
/// `p_L = p_H − √cov`.
pub fn calibrate_cov_snp(cov: f64, high: f64) -> Result<f64> {
    HardyWeinbergParam::new(high)?;
    if !(cov >= 0.0) {
        return Err(Error::InfeasibleTarget(format!("covariance {cov} is negative")));
    }
    let low = high - cov.sqrt();
    if !(low > 0.0 && low < 1.0) {
        return Err(Error::InfeasibleTarget(format!(
            "covariance {cov} needs p_L = {low:.6}; covariances must stay below {:.6} for p_H = {high}",
            high * high
        )));
    }
    Ok(low)
}

/// Variance term used in the SNP correlation equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnpVarianceForm {
    /// `(1−p_H)(2−p_H) + (1−p_L)(2−p_L) − (2−p_H−p_L)²`, the marginal variance
    /// of the two-profile mixture.
    #[default]
    Mixture,
    /// `2(1−p_H)(2−p_H) − (2−p_H−p_L)²`, with the high-profile term repeated.
    /// Reproduces a published variant of the formula; it does not match the
    /// mixture variance and its roots do not hit the target correlation.
    RepeatedHigh,
}

fn snp_variance(form: SnpVarianceForm, high: f64, low: f64) -> f64 {
    let h = (1.0 - high) * (2.0 - high);
    let l = match form {
        SnpVarianceForm::Mixture => (1.0 - low) * (2.0 - low),
        SnpVarianceForm::RepeatedHigh => h,
    };
    h + l - (2.0 - high - low).powi(2)
}

/// Low allele probability giving correlation `cor` between SNPs, solving
/// `p_H − p_L = √(cor · Var)` on `(0, p_H)`.
pub fn calibrate_cor_snp(cor: f64, high: f64) -> Result<Root> {
    calibrate_cor_snp_with(cor, high, SnpVarianceForm::Mixture)
}

pub fn calibrate_cor_snp_with(cor: f64, high: f64, form: SnpVarianceForm) -> Result<Root> {
    HardyWeinbergParam::new(high)?;
    check_correlation(cor)?;
    let residual =
        |low: f64| (high - low) - (cor * snp_variance(form, high, low)).max(0.0).sqrt();
    let root = bisect(residual, 0.0, high).map_err(|why| {
        Error::InfeasibleTarget(format!(
            "correlation {cor} with p_H = {high} (max {high:.6}): {why}"
        ))
    })?;
    if root.value <= 0.0 {
        return Err(Error::InfeasibleTarget(format!(
            "correlation {cor} with p_H = {high} needs p_L = 0"
        )));
    }
    Ok(root)
}

fn check_unit(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Spec(format!("{what} {v} outside (0, 1)")))
    }
}

fn check_correlation(cor: f64) -> Result<()> {
    if cor > 0.0 && cor < 1.0 {
        Ok(())
    } else {
        Err(Error::InfeasibleTarget(format!(
            "correlation target {cor} outside (0, 1)"
        )))
    }
}

/// Theoretical within-group covariance and correlation of two variables that
/// share `h` and `l` under an even, equal-weight grouped layout.
pub fn within_group_moments(levels: &[i32], h: &ProbabilityVector, l: &ProbabilityVector) -> (f64, f64) {
    let (fh, fl) = (h.mean(levels), l.mean(levels));
    let cov = 0.25 * (fh - fl) * (fh - fl);
    let mean = 0.5 * (fh + fl);
    let var = 0.5 * (h.second_moment(levels) + l.second_moment(levels)) - mean * mean;
    (cov, cov / var)
}

/// Profile family used by [`calibrate_group`].
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Levels `{0, 1}`; `high` is `P(x = 1)` under H.
    Binary { high: f64 },
    /// Levels `{0, 1, 2}`; `high` is the allele probability under H.
    Snp { high: f64 },
    /// User-supplied vectors, verified rather than solved.
    Explicit {
        levels: Vec<i32>,
        h: ProbabilityVector,
        l: ProbabilityVector,
    },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Binary { .. } => "binary",
            Family::Snp { .. } => "snp",
            Family::Explicit { .. } => "explicit",
        }
    }

    pub fn levels(&self) -> Vec<i32> {
        match self {
            Family::Binary { .. } => BINARY_LEVELS.to_vec(),
            Family::Snp { .. } => SNP_LEVELS.to_vec(),
            Family::Explicit { levels, .. } => levels.clone(),
        }
    }

    /// Parameter of the H profile, if the family has one.
    fn high(&self) -> Option<f64> {
        match *self {
            Family::Binary { high } | Family::Snp { high } => Some(high),
            Family::Explicit { .. } => None,
        }
    }
}

/// Solved H/L pair for one group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCalibration {
    pub size: usize,
    pub target: DependenceTarget,
    pub high: Option<f64>,
    pub low: Option<f64>,
    pub h: ProbabilityVector,
    pub l: ProbabilityVector,
    pub achieved_covariance: f64,
    pub achieved_correlation: f64,
    pub iterations: u32,
    pub residual: f64,
}

impl GroupCalibration {
    pub fn achieved(&self) -> f64 {
        match self.target {
            DependenceTarget::Covariance(_) => self.achieved_covariance,
            DependenceTarget::Correlation(_) => self.achieved_correlation,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    pub family: Family,
    pub groups: Vec<GroupCalibration>,
}

const CSV_HEADER: [&str; 11] = [
    "group",
    "size",
    "family",
    "target_kind",
    "target",
    "high",
    "low",
    "achieved_covariance",
    "achieved_correlation",
    "iterations",
    "residual",
];

impl CalibrationResult {
    /// Header-only report, for scenarios with nothing to calibrate.
    pub fn empty_csv<W: Write>(out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        w.flush().map_err(|e| Error::io("<calibration>", e))?;
        Ok(())
    }

    /// H vectors for each contributing variable, in column order.
    pub fn h_vectors(&self) -> Vec<ProbabilityVector> {
        self.expand(|g| &g.h)
    }

    pub fn l_vectors(&self) -> Vec<ProbabilityVector> {
        self.expand(|g| &g.l)
    }

    fn expand(&self, pick: impl Fn(&GroupCalibration) -> &ProbabilityVector) -> Vec<ProbabilityVector> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(pick(g).clone(), g.size))
            .collect()
    }

    /// One row per group: target, solved parameter, achieved value, residual.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for (i, g) in self.groups.iter().enumerate() {
            let kind = match g.target {
                DependenceTarget::Covariance(_) => "covariance",
                DependenceTarget::Correlation(_) => "correlation",
            };
            w.write_record([
                (i + 1).to_string(),
                g.size.to_string(),
                self.family.name().to_string(),
                kind.to_string(),
                g.target.value().to_string(),
                opt(g.high),
                opt(g.low),
                g.achieved_covariance.to_string(),
                g.achieved_correlation.to_string(),
                g.iterations.to_string(),
                g.residual.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<calibration>", e))?;
        Ok(())
    }
}

fn calibrate_one(family: &Family, target: DependenceTarget) -> Result<(ProbabilityVector, ProbabilityVector, Option<f64>, u32, f64)> {
    Ok(match (family, target) {
        (Family::Binary { high }, DependenceTarget::Covariance(v)) => {
            let low = calibrate_cov_binary(v, *high)?;
            (binary_probs(*high), binary_probs(low), Some(low), 0, 0.0)
        }
        (Family::Binary { high }, DependenceTarget::Correlation(r)) => {
            let root = calibrate_cor_binary(r, *high)?;
            (binary_probs(*high), binary_probs(root.value), Some(root.value), root.iterations, root.residual)
        }
        (Family::Snp { high }, DependenceTarget::Covariance(v)) => {
            let low = calibrate_cov_snp(v, *high)?;
            (hw_probs(*high)?, hw_probs(low)?, Some(low), 0, 0.0)
        }
        (Family::Snp { high }, DependenceTarget::Correlation(r)) => {
            let root = calibrate_cor_snp(r, *high)?;
            (hw_probs(*high)?, hw_probs(root.value)?, Some(root.value), root.iterations, root.residual)
        }
        (Family::Explicit { levels, h, l }, t) => {
            let (cov, cor) = within_group_moments(levels, h, l);
            let achieved = match t {
                DependenceTarget::Covariance(_) => cov,
                DependenceTarget::Correlation(_) => cor,
            };
            let gap = (achieved - t.value()).abs();
            if gap > VERIFY_TOLERANCE {
                return Err(Error::InfeasibleTarget(format!(
                    "explicit H/L give {achieved:.9}, target {}",
                    t.value()
                )));
            }
            (h.clone(), l.clone(), None, 0, gap)
        }
    })
}

/// Calibrates every homogenous group of `groups` to its target.
pub fn calibrate_group(groups: &GroupStructure, family: &Family) -> Result<CalibrationResult> {
    if let Family::Explicit { levels, h, l } = family {
        for pv in [h, l] {
            if pv.len() != levels.len() {
                return Err(Error::Dimension(format!(
                    "{} probabilities for {} levels",
                    pv.len(),
                    levels.len()
                )));
            }
            if let Some(issue) = pv.issues().into_iter().next() {
                return Err(Error::Spec(issue));
            }
        }
    }
    let levels = family.levels();
    let mut out = Vec::with_capacity(groups.k());
    for (g, (&size, target)) in groups.sizes().iter().zip(groups.targets()).enumerate() {
        let target = target.ok_or_else(|| {
            Error::Spec(format!("group {} has no dependence target", g + 1))
        })?;
        let (h, l, low, iterations, residual) =
            calibrate_one(family, target).map_err(|e| match e {
                Error::InfeasibleTarget(reason) | Error::Spec(reason) => Error::Infeasible {
                    group: g + 1,
                    reason,
                },
                other => other,
            })?;
        let (cov, cor) = within_group_moments(&levels, &h, &l);
        let residual = match target {
            DependenceTarget::Covariance(v) if low.is_some() => (cov - v).abs(),
            _ => residual,
        };
        out.push(GroupCalibration {
            size,
            target,
            high: family.high(),
            low,
            h,
            l,
            achieved_covariance: cov,
            achieved_correlation: cor,
            iterations,
            residual,
        });
    }
    Ok(CalibrationResult {
        family: family.clone(),
        groups: out,
    })
}
