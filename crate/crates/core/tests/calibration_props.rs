use partsim::calibration::{
    calibrate_cor_binary, calibrate_cor_snp, calibrate_cov_snp, calibrate_group, hw_probs, Family,
};
use partsim::generator::bind_pattern;
use partsim::moments::moment_matrices;
use partsim::patterns::grouped_pattern;
use partsim::{ClusterSpec, DependenceTarget, GroupStructure, Variable, VariableDomain, VariableKind};
use proptest::prelude::*;

proptest! {
    #[test]
    fn snp_correlation_low_decreases_with_target(a in 0.05f64..0.9, b in 0.05f64..0.9, ph in 0.91f64..0.995) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        let l_lo = calibrate_cor_snp(lo, ph).unwrap().value;
        let l_hi = calibrate_cor_snp(hi, ph).unwrap().value;
        prop_assert!(l_hi < l_lo);
    }

    #[test]
    fn binary_correlation_low_decreases_with_target(a in 0.05f64..0.6, b in 0.05f64..0.6) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-6);
        prop_assert!(calibrate_cor_binary(hi, 0.9).unwrap().value < calibrate_cor_binary(lo, 0.9).unwrap().value);
    }

    #[test]
    fn snp_covariance_round_trip(cov in 0.0f64..0.8, ph in 0.9f64..0.99) {
        prop_assume!(ph - cov.sqrt() > 0.0);
        let low = calibrate_cov_snp(cov, ph).unwrap();
        let (h, l) = (hw_probs(ph).unwrap(), hw_probs(low).unwrap());
        let d = h.mean(&[0, 1, 2]) - l.mean(&[0, 1, 2]);
        prop_assert!((0.25 * d * d - cov).abs() < 1e-12);
    }
}

/// Binds calibrated vectors into the grouped layout and returns the theoretical
/// within-group values for the first pair of each group.
fn forward(groups: &GroupStructure, family: &Family, correlation: bool) -> Vec<f64> {
    let cal = calibrate_group(groups, family).unwrap();
    let (pat, c) = grouped_pattern(groups).unwrap();
    let domain = VariableDomain::new(family.levels(), VariableKind::Interval).unwrap();
    let vars = (0..groups.num_variables()).map(|i| Variable::new(format!("x{i}"), domain.clone())).collect();
    let prof = bind_pattern(&pat, vars, &cal.h_vectors(), &cal.l_vectors(), &[]).unwrap();
    let m = moment_matrices(&prof, &ClusterSpec::equal(c, 100 * c).unwrap()).unwrap();
    groups
        .ranges()
        .into_iter()
        .map(|r| {
            let mat = if correlation { &m.correlation } else { &m.covariance };
            mat.get(r.start, r.start + 1).unwrap()
        })
        .collect()
}

#[test]
fn binary_round_trip_through_moments() {
    let targets = [0.1, 0.3, 0.5, 0.2];
    let g = GroupStructure::new(
        vec![2, 3, 2, 2],
        targets.iter().map(|&r| Some(DependenceTarget::Correlation(r))).collect(),
        0,
    )
    .unwrap();
    let got = forward(&g, &Family::Binary { high: 0.8 }, true);
    for (a, b) in got.iter().zip(targets) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    let g = GroupStructure::new(vec![2, 2], vec![Some(DependenceTarget::Covariance(0.1)); 2], 0).unwrap();
    for v in forward(&g, &Family::Binary { high: 0.9 }, false) {
        assert!((v - 0.1).abs() < 1e-12);
    }
}
