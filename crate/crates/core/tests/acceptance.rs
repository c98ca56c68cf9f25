//! One test per acceptance criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use partsim::association::{
    association_matrix, chi_square, concentration_coefficient, concordance_difference, cramers_v,
    stuart_kendall_tau_c, ContingencyTable, CramersVariant, Measure, Observations,
};
use partsim::calibration::{calibrate_cov_snp, calibrate_group, Family};
use partsim::config::{Config, Scenario};
use partsim::generator::bind_pattern;
use partsim::moments::{
    brute_force_moments, cluster_means, covariance_pairwise, marginal_covariance, moment_matrices,
};
use partsim::patterns::{balanced_pattern, grouped_pattern, Label, PatternMatrix};
use partsim::report::{run_pipeline, within_group_averages, PipelineOptions, ARTIFACTS};
use partsim::{
    generate, DependenceTarget, GenerateOptions, GroupStructure, Matrix, Variable, VariableDomain,
    VariableKind,
};
use rand::Rng;

const SEED: u64 = 42;

fn verdict(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n}: {detail}");
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn scenario(name: &str) -> Scenario {
    Config::load(config_path(name)).unwrap().resolve().unwrap()
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

#[test]
fn criterion_1_pairwise_covariance_oracle() {
    let start = Instant::now();
    let mut rng = common::rng(SEED);
    let mut worst: f64 = 0.0;
    let mut pairs = 0usize;
    for _ in 0..1000 {
        let c = rng.random_range(1..=6);
        let p = rng.random_range(2..=4);
        let profile = common::random_profile(&mut rng, c, p, 3);
        let clusters = common::equal_clusters(c, 6 * c);
        let f = common::means(&profile);
        let means = cluster_means(&profile).unwrap();
        let brute = brute_force_moments(&profile, &clusters).unwrap();
        for a in 0..p {
            for b in a + 1..p {
                let sum = common::pairwise_covariance(1.0 / c as f64, &f[a], &f[b]);
                let pairwise = covariance_pairwise(clusters.weights(), means.variable(a), means.variable(b)).unwrap();
                let mixture = marginal_covariance(clusters.weights(), means.variable(a), means.variable(b));
                let bf = brute.covariance.get(a, b).unwrap();
                for v in [pairwise, mixture, bf] {
                    worst = worst.max((v - sum).abs());
                }
                pairs += 1;
            }
        }
    }
    let t = start.elapsed();
    verdict(
        1,
        worst < 1e-12 && t < Duration::from_secs(10),
        format!("1000 specs, {pairs} pairs, max gap {worst:.2e}, {}", secs(t)),
    );
}

/// Distinct cluster means of a two-level column, as (high-label mean, low-label mean).
fn hl_means(profile: &partsim::ProfileMatrix, pattern: &PatternMatrix, p: usize) -> (f64, f64) {
    let col = pattern.column(p);
    let lv = profile.variable(p).domain.levels().to_vec();
    let h = col.iter().position(|&l| l == Label::H).unwrap();
    let l = col.iter().position(|&l| l == Label::L).unwrap();
    (profile.cell(h, p).mean(&lv), profile.cell(l, p).mean(&lv))
}

#[test]
fn criterion_2_within_group_closed_form() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for name in ["grouped6.json", "snp6_cov.json", "snp8_cor.json"] {
        let sc = scenario(name);
        let groups = sc.spec.groups.clone().unwrap();
        let pattern = sc.pattern.clone().unwrap();
        let m = moment_matrices(&sc.spec.profile, &sc.spec.clusters).unwrap();
        for r in groups.ranges() {
            for p in r.clone() {
                for q in r.clone() {
                    if p == q {
                        continue;
                    }
                    let (hp, lp) = hl_means(&sc.spec.profile, &pattern, p);
                    let (hq, lq) = hl_means(&sc.spec.profile, &pattern, q);
                    let closed = 0.25 * (hp - lp) * (hq - lq);
                    worst = worst.max((m.covariance.get(p, q).unwrap() - closed).abs());
                    checked += 1;
                }
            }
        }
    }
    let mut counts_ok = true;
    for c in (2..=12).step_by(2) {
        let k = 1usize << (c / 2 - 1);
        let (pat, derived) = grouped_pattern(&GroupStructure::new(vec![1; k], vec![], 0).unwrap()).unwrap();
        counts_ok &= derived == c;
        for p in 0..pat.num_variables() {
            let col = pat.column(p);
            let mut n = 0;
            for a in 0..c {
                for b in a + 1..c {
                    n += usize::from(col[a] != col[b]);
                }
            }
            counts_ok &= n == c * c / 4 && pat.differing_pairs(p) == n;
        }
    }
    verdict(
        2,
        worst < 1e-12 && counts_ok,
        format!("{checked} within-group cells, max gap {worst:.2e}; C²/4 counts for C=2..12 {}", if counts_ok { "ok" } else { "wrong" }),
    );
}

/// Within-group covariance and correlation for the first pair of each group.
fn forward(groups: &GroupStructure, family: &Family) -> (Vec<f64>, Vec<f64>) {
    let cal = calibrate_group(groups, family).unwrap();
    let (pat, c) = grouped_pattern(groups).unwrap();
    let dom = VariableDomain::new(family.levels(), VariableKind::Interval).unwrap();
    let vars = (0..groups.num_variables()).map(|i| Variable::new(format!("x{i}"), dom.clone())).collect();
    let prof = bind_pattern(&pat, vars, &cal.h_vectors(), &cal.l_vectors(), &[]).unwrap();
    let m = moment_matrices(&prof, &partsim::ClusterSpec::equal(c, 100 * c).unwrap()).unwrap();
    groups
        .ranges()
        .into_iter()
        .map(|r| {
            (
                m.covariance.get(r.start, r.start + 1).unwrap(),
                m.correlation.get(r.start, r.start + 1).unwrap(),
            )
        })
        .unzip()
}

#[test]
fn criterion_3_calibration_round_trip() {
    let family = Family::Snp { high: 0.95 };
    let covs: Vec<f64> = (0..8).map(|i| 0.1 + 0.05 * i as f64).collect();
    let g = GroupStructure::new(vec![2; 8], covs.iter().map(|&v| Some(DependenceTarget::Covariance(v))).collect(), 0).unwrap();
    let (got, _) = forward(&g, &family);
    let cov_gap = got.iter().zip(&covs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let cors = [0.4, 0.5, 0.6, 0.7, 0.8];
    let g = GroupStructure::new(
        vec![2; 8],
        cors.iter().chain(&[0.5, 0.5, 0.5]).map(|&v| Some(DependenceTarget::Correlation(v))).collect(),
        0,
    )
    .unwrap();
    let (_, got) = forward(&g, &family);
    let cor_gap = got.iter().zip(&cors).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let low = calibrate_cov_snp(0.45, 0.95).unwrap();
    let exact = low == 0.95 - 0.45f64.sqrt();
    verdict(
        3,
        cov_gap < 1e-12 && cor_gap < 1e-9 && exact,
        format!("covariance gap {cov_gap:.2e}, correlation gap {cor_gap:.2e}, p_L(0.45) = {low} {}", if exact { "exact" } else { "inexact" }),
    );
}

fn within(values: &[Option<f64>], expected: &[f64], tol: f64) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    let mut ok = values.len() == expected.len();
    for (v, e) in values.iter().zip(expected) {
        match v {
            Some(v) => worst = worst.max((v - e).abs()),
            None => ok = false,
        }
    }
    (ok && worst <= tol, worst)
}

fn fmt(values: &[Option<f64>]) -> String {
    values.iter().map(|v| v.map_or("NA".into(), |x| format!("{x:.2}"))).collect::<Vec<_>>().join(",")
}

#[test]
fn criterion_4_snp8_sample() {
    let sc = scenario("snp8_cor.json");
    let start = Instant::now();
    let ds = generate(&sc.spec, GenerateOptions::default()).unwrap();
    let obs = Observations::from_dataset(&ds);
    let g = sc.spec.groups.as_ref().unwrap();
    let avg = |m: Measure| -> Vec<Option<f64>> {
        let a = association_matrix(&obs, m).unwrap().symmetrized();
        within_group_averages(&a.values, g).unwrap()
    };
    let pearson = avg(Measure::Pearson);
    let tau = avg(Measure::TauC);
    let vcc = avg(Measure::Vcc);
    let t = start.elapsed();
    let (p_ok, p_gap) = within(&pearson, &[0.4, 0.5, 0.6, 0.7, 0.8, 0.6, 0.7, 0.4], 0.07);
    let (t_ok, t_gap) = within(&tau, &[0.32, 0.43, 0.51, 0.60, 0.69, 0.57, 0.59, 0.33], 0.06);
    let (v_ok, v_gap) = within(&vcc, &[0.14, 0.18, 0.23, 0.32, 0.46, 0.28, 0.30, 0.12], 0.06);
    verdict(
        4,
        p_ok && t_ok && v_ok && t < Duration::from_secs(5),
        format!(
            "pearson [{}] gap {p_gap:.3}; tau_c [{}] gap {t_gap:.3}; vcc [{}] gap {v_gap:.3}; {}",
            fmt(&pearson),
            fmt(&tau),
            fmt(&vcc),
            secs(t)
        ),
    );
}

#[test]
fn criterion_5_snp200_workflow() {
    const SIM: [f64; 27] = [
        0.69, 0.96, 0.63, 0.90, 0.96, 0.93, 0.90, 0.98, 0.91, 0.98, 0.96, 0.98, 0.59, 0.94, 0.31,
        0.92, 0.41, 0.96, 0.64, 0.66, 0.96, 0.60, 0.43, 0.90, 0.41, 0.55, 0.74,
    ];
    let start = Instant::now();
    let sc = scenario("snp200.json");
    let ds = generate(&sc.spec, GenerateOptions::default()).unwrap();
    let obs = Observations::from_dataset(&ds);
    let g = sc.spec.groups.as_ref().unwrap();
    let r = association_matrix(&obs, Measure::Pearson).unwrap();
    let avg = within_group_averages(&r.values, g).unwrap();
    let t = start.elapsed();
    let shape_ok = ds.num_subjects() == 6000 && ds.num_variables() == 200 && g.k() == 32;
    let misses: Vec<String> = avg[..27]
        .iter()
        .zip(SIM)
        .enumerate()
        .filter_map(|(i, (v, s))| match v {
            Some(v) if (v - s).abs() <= 0.02 => None,
            v => Some(format!("group {} {} vs {s}", i + 1, v.map_or("NA".into(), |x| format!("{x:.3}")))),
        })
        .collect();
    verdict(
        5,
        shape_ok && misses.is_empty() && t < Duration::from_secs(60),
        format!(
            "n=6000 P={} k={}, {} of 27 groups within ±0.02{}; {}",
            ds.num_variables(),
            g.k(),
            27 - misses.len(),
            if misses.is_empty() { String::new() } else { format!(" (off: {})", misses.join("; ")) },
            secs(t)
        ),
    );
}

#[test]
fn criterion_6_pattern_golden() {
    const BALANCED_8X16: [&str; 8] = [
        "LLLLLLLLLLLLLLLL",
        "HHHHHHHHHHHHHHHH",
        "LLLLLLLLHHHHHHHH",
        "HHHHHHHHLLLLLLLL",
        "LLLLHHHHLLLLHHHH",
        "HHHHLLLLHHHHLLLL",
        "LLHHLLHHLLHHLLHH",
        "HHLLHHLLHHLLHHLL",
    ];
    const GROUPED_FIRST_ROWS: [&str; 5] = ["LLLLLLLLLLLL", "HHHHHHHHHHHH", "LLLLLLHHHHHH", "HHHHHHLLLLLL", "LLLHHHLLLHHH"];
    let t1 = balanced_pattern(8, 16).unwrap();
    let t1_ok = t1.num_clusters() == 8 && (0..8).all(|r| t1.row_string(r) == BALANCED_8X16[r]);
    let (t2, c) = grouped_pattern(&GroupStructure::new(vec![3; 4], vec![], 0).unwrap()).unwrap();
    let t2_ok = c == 6 && (0..5).all(|r| t2.row_string(r) == GROUPED_FIRST_ROWS[r]);
    // Five-cluster config: the same rows with two noise columns appended.
    let odd = scenario("odd5_noise.json").pattern.unwrap();
    let odd_ok = odd.num_clusters() == 5 && (0..5).all(|r| odd.row_string(r) == format!("{}AA", GROUPED_FIRST_ROWS[r]));
    verdict(
        6,
        t1_ok && t2_ok && odd_ok,
        format!("balanced 8x16 {}, grouped C=6 rows {}, five-cluster config rows {}", ok(t1_ok), ok(t2_ok), ok(odd_ok)),
    );
}

fn ok(b: bool) -> &'static str {
    if b {
        "match"
    } else {
        "differ"
    }
}

#[test]
fn criterion_7_within_exceeds_between() {
    let sc = scenario("blocks8x16.json");
    let g = sc.spec.groups.as_ref().unwrap();
    let cov: Matrix = moment_matrices(&sc.spec.profile, &sc.spec.clusters).unwrap().covariance;
    let (mut within, mut between) = (Vec::new(), Vec::new());
    for p in 0..cov.dim() {
        for q in 0..cov.dim() {
            if p == q {
                continue;
            }
            let v = cov.get(p, q).unwrap();
            if g.group_of(p) == g.group_of(q) {
                within.push(v);
            } else {
                between.push(v);
            }
        }
    }
    let wmin = within.iter().copied().fold(f64::INFINITY, f64::min);
    let wmax = within.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bmax = between.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        7,
        wmin > bmax && wmax - wmin <= 1e-12,
        format!("within-group [{wmin:.6}, {wmax:.6}] spread {:.1e}, between-group max {bmax:.6}", wmax - wmin),
    );
}

#[test]
fn criterion_8_association_oracles() {
    let mut rng = common::rng(SEED);
    let mut agree = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=200);
        let (mx, my) = (rng.random_range(2..=5usize), rng.random_range(2..=5usize));
        let x: Vec<i32> = (0..n).map(|_| rng.random_range(0..mx as i32)).collect();
        let y: Vec<i32> = x.iter().map(|&v| if rng.random_bool(0.6) { v.min(my as i32 - 1) } else { rng.random_range(0..my as i32) }).collect();
        let s = common::pair_scan(&x, &y);
        let m = mx.min(my) as f64;
        let nn = n as f64;
        let oracle = 2.0 * s as f64 / (nn * nn * (m - 1.0) / m);
        if concordance_difference(&x, &y) == s && stuart_kendall_tau_c(&x, &y, mx, my).unwrap() == oracle {
            agree += 1;
        }
    }

    let t = |rows: &[Vec<u64>]| ContingencyTable::from_nested(rows).unwrap();
    let hand = [
        chi_square(&t(&[vec![10, 10], vec![10, 10]])).unwrap() == 0.0,
        chi_square(&t(&[vec![2, 0], vec![0, 2]])).unwrap() == 4.0,
        chi_square(&t(&[vec![3, 1], vec![1, 3]])).unwrap() == 2.0,
        cramers_v(&t(&[vec![2, 0], vec![0, 2]]), CramersVariant::Paper).unwrap() == 0.5,
        cramers_v(&t(&[vec![2, 0], vec![0, 2]]), CramersVariant::Standard).unwrap() == 1.0,
        concentration_coefficient(&t(&[vec![10, 10], vec![10, 10]])).unwrap() == Some(0.0),
        concentration_coefficient(&t(&[vec![1, 0], vec![0, 1]])).unwrap() == Some(1.0),
        concentration_coefficient(&t(&[vec![4, 1], vec![1, 4]])).unwrap() == Some(0.36),
        stuart_kendall_tau_c(&[1, 2, 3], &[1, 2, 3], 3, 3).unwrap() == 1.0,
        stuart_kendall_tau_c(&[1, 2, 3], &[3, 2, 1], 3, 3).unwrap() == -1.0,
        stuart_kendall_tau_c(&[1, 2, 3], &[2, 2, 2], 3, 3).unwrap() == 0.0,
    ];
    let hand_ok = hand.iter().filter(|&&b| b).count();
    verdict(
        8,
        agree == 200 && hand_ok == hand.len(),
        format!("tau_c oracle agreement {agree}/200, hand values {hand_ok}/{}", hand.len()),
    );
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: usize| {
        let out = dir.path().join(sub);
        let opts = PipelineOptions {
            seed: None,
            shuffle: false,
            threads: Some(threads),
            variant: CramersVariant::Paper,
        };
        run_pipeline(&config_path("grouped6.json"), &out, opts).unwrap();
        ARTIFACTS.iter().map(|a| std::fs::read(out.join(a)).unwrap()).collect::<Vec<_>>()
    };
    let a = run("a", 1);
    let b = run("b", 1);
    let c = run("c", 8);
    let same = |x: &[Vec<u8>], y: &[Vec<u8>]| x.iter().zip(y).filter(|(p, q)| p == q).count();
    let (ab, ac) = (same(&a, &b), same(&a, &c));
    verdict(
        9,
        ab == ARTIFACTS.len() && ac == ARTIFACTS.len(),
        format!("repeat run {ab}/7 files identical, 1 vs 8 threads {ac}/7 identical"),
    );
}
