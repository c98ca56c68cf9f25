//! Seeded categorical draws by thresholding a standard normal variate.
//!
//! A level index `s` is chosen when `t ~ N(0, 1)` lands in
//! `[Φ⁻¹(F(s)), Φ⁻¹(F(s + 1)))`, where `F(s)` is the cumulative probability of
//! the first `s` levels and `F(0) = 0`. The band measures under the standard
//! normal equal the level probabilities exactly.
//!
//! Every `(subject, variable)` cell owns an independent ChaCha8 substream keyed
//! by the master seed, so draws do not depend on thread count or call order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::ProbabilityVector;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Acklam's rational approximation, relative error below 1.15e-9.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(u: f64) -> f64 {
    if u < P_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - P_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - u)
    }
}

/// Quantile function of the standard normal distribution.
///
/// `0` and `1` map to the infinite band edges. The rational approximation is
/// polished by one Newton step on `Φ(x) − u`.
pub fn inverse_normal_cdf(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(u));
    }
    if u == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if u == 1.0 {
        return Ok(f64::INFINITY);
    }
    if u == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail so the residual is computed without cancellation.
    let (v, sign) = if u > 0.5 { (1.0 - u, -1.0) } else { (u, 1.0) };
    let x = acklam(v);
    let pdf = normal_pdf(x);
    let x = if pdf > 0.0 {
        x - (normal_cdf(x) - v) / pdf
    } else {
        x
    };
    Ok(sign * x)
}

/// Identifier of one independent substream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub seed: u64,
    pub subject: u64,
    pub variable: u64,
}

impl SeededStream {
    pub fn new(seed: u64, subject: usize, variable: usize) -> Self {
        Self {
            seed,
            subject: subject as u64,
            variable: variable as u64,
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.subject);
        // 2^32 words per variable; a normal draw consumes a handful.
        rng.set_word_pos(u128::from(self.variable) << 32);
        rng
    }

    /// The standard normal variate `t` owned by this cell.
    pub fn standard_normal(&self) -> f64 {
        self.rng().sample(StandardNormal)
    }
}

/// Inverse-normal cut points of a categorical distribution.
///
/// `cuts[s]` is `Φ⁻¹(F(s + 1))` for `s = 0..M−1`; the top band is open.
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    cuts: Vec<f64>,
}

impl Thresholds {
    pub fn new(probs: &ProbabilityVector) -> Self {
        let p = probs.as_slice();
        let mut cum = 0.0;
        let mut cuts = Vec::with_capacity(p.len().saturating_sub(1));
        for &mass in &p[..p.len().saturating_sub(1)] {
            cum += mass;
            let edge = if cum >= 1.0 {
                f64::INFINITY
            } else {
                // cum ∈ [0, 1) here, so the quantile is defined.
                inverse_normal_cdf(cum.max(0.0)).unwrap_or(f64::NEG_INFINITY)
            };
            cuts.push(edge);
        }
        Self { cuts }
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Band containing `t`; bands are half-open `[lower, upper)`.
    pub fn band(&self, t: f64) -> usize {
        self.cuts.partition_point(|&edge| edge <= t)
    }
}

/// Draws a level index from `probs` using the cell's normal variate.
pub fn draw_categorical(probs: &ProbabilityVector, stream: SeededStream) -> usize {
    Thresholds::new(probs).band(stream.standard_normal())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ by its everywhere-convergent Taylor series,
    /// `Φ(x) = ½ + φ(x) Σ x^(2k+1) / (1·3·…·(2k+1))`.
    fn series_cdf(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            term *= x * x / (2.0 * k + 1.0);
            sum += term;
            k += 1.0;
        }
        0.5 + normal_pdf(x) * sum
    }

    fn series_quantile(u: f64) -> f64 {
        let (mut lo, mut hi) = (-8.0, 8.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if series_cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_reference_values() {
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
        // Values frozen from the series-bisection oracle.
        let q975 = series_quantile(0.975);
        let q0625 = series_quantile(0.0625);
        assert!((q975 - 1.959_964).abs() < 5e-7);
        assert!((q0625 - -1.534_121).abs() < 5e-7);
        assert!((inverse_normal_cdf(0.975).unwrap() - q975).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.0625).unwrap() - q0625).abs() < 1e-12);
    }

    #[test]
    fn quantile_edges_and_domain() {
        assert_eq!(inverse_normal_cdf(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(inverse_normal_cdf(1.0).unwrap(), f64::INFINITY);
        assert!(matches!(inverse_normal_cdf(-0.1), Err(Error::Domain(_))));
        assert!(matches!(inverse_normal_cdf(1.5), Err(Error::Domain(_))));
        assert!(inverse_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let mut worst: f64 = 0.0;
        let mut u = 1e-10;
        while u < 1.0 - 1e-10 {
            let x = inverse_normal_cdf(u).unwrap();
            worst = worst.max((normal_cdf(x) - u).abs());
            u = if u < 1e-3 { u * 1.7 } else { u + 7.3e-4 };
        }
        for &u in &[1e-10, 1e-7, 0.02425, 0.97575, 1.0 - 1e-10] {
            let x = inverse_normal_cdf(u).unwrap();
            worst = worst.max((normal_cdf(x) - u).abs());
        }
        assert!(worst < 1e-12, "worst residual {worst}");
    }

    #[test]
    fn series_and_erfc_cdf_agree() {
        for i in -60..=60 {
            let x = f64::from(i) / 10.0;
            assert!((series_cdf(x) - normal_cdf(x)).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn degenerate_distribution_always_first() {
        let pv = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        for i in 0..200 {
            assert_eq!(draw_categorical(&pv, SeededStream::new(7, i, 0)), 0);
        }
        let pv = ProbabilityVector::degenerate(3, 2);
        for i in 0..200 {
            assert_eq!(draw_categorical(&pv, SeededStream::new(7, i, 3)), 2);
        }
    }

    #[test]
    fn symmetric_split_at_zero() {
        let th = Thresholds::new(&ProbabilityVector::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(th.cuts(), &[0.0]);
        assert_eq!(th.band(-0.1), 0);
        assert_eq!(th.band(0.1), 1);
    }

    #[test]
    fn band_measures_equal_probabilities() {
        let probs = [0.0625, 0.375, 0.5625];
        let th = Thresholds::new(&ProbabilityVector::new(probs.to_vec()).unwrap());
        let mut edges = vec![0.0];
        edges.extend(th.cuts().iter().map(|&c| normal_cdf(c)));
        edges.push(1.0);
        for (s, p) in probs.iter().enumerate() {
            assert!((edges[s + 1] - edges[s] - p).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_levels_are_never_drawn() {
        let pv = ProbabilityVector::new(vec![0.0, 0.3, 0.0, 0.7]).unwrap();
        let th = Thresholds::new(&pv);
        for i in 0..2000 {
            let s = th.band(SeededStream::new(1, i, 0).standard_normal());
            assert!(s == 1 || s == 3);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = SeededStream::new(42, 3, 5).standard_normal();
        assert_eq!(a, SeededStream::new(42, 3, 5).standard_normal());
        assert_ne!(a, SeededStream::new(42, 3, 6).standard_normal());
        assert_ne!(a, SeededStream::new(42, 4, 5).standard_normal());
        assert_ne!(a, SeededStream::new(43, 3, 5).standard_normal());
    }
}
