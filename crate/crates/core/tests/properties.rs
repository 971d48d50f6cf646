use auxtrial::data::{compute_summaries, Arm, GroupSummary, PatientRecord, SummaryError, TrialDataset};
use auxtrial::groupseq::{boundary_thresholds, hsd_spending};
use auxtrial::multitest::{
    auxiliary_augmented_test, bonferroni_test, holm_test, softmax_weights, weighted_softmax, WeightedBonfConfig,
};
use auxtrial::rng::rng_from_seed;
use auxtrial::scenario::{presets, resample_perturb, simulate_trial, solve_joint};
use proptest::prelude::*;

fn summary(group: usize, z: f64, sbar: f64) -> Result<GroupSummary, SummaryError> {
    Ok(GroupSummary {
        group,
        n0: 40,
        n1: 40,
        ybar_diff: 0.1 * z,
        sbar_diff: sbar,
        var_hat: 0.01,
        z,
        pvalue: 0.5 * libm::erfc(z / std::f64::consts::SQRT_2),
    })
}

fn groups(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-4.0..4.0f64, -0.8..0.8f64), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn softmax_is_a_distribution(beta in -30.0..30.0f64, sbar in prop::collection::vec(-1.0..1.0f64, 1..8)) {
        let w = softmax_weights(&vec![beta; sbar.len()], &sbar);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|x| *x > 0.0));
        // larger auxiliary effect never gets less weight when β ≥ 0
        if beta >= 0.0 {
            for i in 0..sbar.len() {
                for j in 0..sbar.len() {
                    if sbar[i] > sbar[j] {
                        prop_assert!(w[i] >= w[j] - 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_prior_weights_change_nothing(beta in -10.0..10.0f64, sbar in prop::collection::vec(-1.0..1.0f64, 1..6)) {
        let k = sbar.len();
        let b = vec![beta; k];
        let a = softmax_weights(&b, &sbar);
        let c = weighted_softmax(&b, &sbar, Some(&vec![1.0 / k as f64; k]));
        for (x, y) in a.iter().zip(&c) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_beta_is_bonferroni(g in groups(6), alpha in 0.001..0.2f64) {
        let s: Vec<_> = g.iter().enumerate().map(|(i, (z, sb))| summary(i, *z, *sb)).collect();
        let aa = auxiliary_augmented_test(&s, &WeightedBonfConfig::shared(alpha, 0.0, s.len()).unwrap());
        let bf = bonferroni_test(&s, alpha);
        for (a, b) in aa.iter().zip(&bf) {
            prop_assert_eq!(a.reject, b.reject);
        }
    }

    #[test]
    fn holm_rejects_everything_bonferroni_does(g in groups(6), alpha in 0.001..0.2f64) {
        let s: Vec<_> = g.iter().enumerate().map(|(i, (z, sb))| summary(i, *z, *sb)).collect();
        let bf = bonferroni_test(&s, alpha);
        let holm = holm_test(&s, alpha);
        for (b, h) in bf.iter().zip(&holm) {
            prop_assert!(!b.reject || h.reject);
        }
    }

    #[test]
    fn weighted_thresholds_spend_alpha(g in groups(6), beta in -10.0..10.0f64) {
        let s: Vec<_> = g.iter().enumerate().map(|(i, (z, sb))| summary(i, *z, *sb)).collect();
        let d = auxiliary_augmented_test(&s, &WeightedBonfConfig::shared(0.05, beta, s.len()).unwrap());
        let total: f64 = d.iter().map(|x| x.threshold).sum();
        prop_assert!((total - 0.05).abs() < 1e-12);
    }

    #[test]
    fn joint_cell_round_trip(py in 0.02..0.98f64, ps in 0.02..0.98f64, lr in -5.0..5.0f64) {
        let r = lr.exp();
        let c = solve_joint(py, ps, r).unwrap();
        prop_assert!((c.odds_ratio() / r - 1.0).abs() < 1e-8);
        prop_assert!((c.p11 + c.p10 - py).abs() < 1e-12);
        prop_assert!((c.p11 + c.p01 - ps).abs() < 1e-12);
        prop_assert!([c.p11, c.p10, c.p01, c.p00].iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn spending_is_monotone(be in -6.0..6.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(hsd_spending(lo, be, 0.05) <= hsd_spending(hi, be, 0.05) + 1e-15);
        prop_assert!(hsd_spending(0.0, be, 0.05).abs() < 1e-15);
        prop_assert!((hsd_spending(1.0, be, 0.05) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn boundaries_spend_the_full_alpha(be in -4.0..4.0f64, n1 in 20usize..180) {
        let b = boundary_thresholds(&[n1, 200], be, 0.05).unwrap();
        prop_assert_eq!(b.thresholds.len(), 2);
        prop_assert!((b.spent[1] - 0.05).abs() < 1e-12);
        prop_assert!(b.thresholds.iter().all(|z| z.is_finite() && *z > 1.0));
    }
}

#[test]
fn boundary_reference_values() {
    let one = boundary_thresholds(&[200], 2.0, 0.05).unwrap();
    assert!((one.thresholds[0] - 1.644854).abs() < 1e-5);
    let two = boundary_thresholds(&[100, 200], 2.0, 0.05).unwrap();
    assert!((two.thresholds[0] - 1.792169).abs() < 1e-5, "{:?}", two.thresholds);
    assert!((two.thresholds[1] - 1.984103).abs() < 1e-5, "{:?}", two.thresholds);
    assert!(boundary_thresholds(&[200, 100], 2.0, 0.05).is_err());
}

#[test]
fn simulated_trials_match_their_scenario() {
    let spec = presets::two_groups(4, 2.0).unwrap();
    let mut rng = rng_from_seed(11);
    let (mut n, mut y1, mut s1) = (0usize, 0usize, 0usize);
    for _ in 0..400 {
        let d = simulate_trial(&spec, &mut rng).unwrap();
        for p in d.patients().iter().filter(|p| p.group == 0 && p.arm == Arm::Experimental) {
            n += 1;
            y1 += p.primary as usize;
            s1 += p.auxiliary as usize;
        }
    }
    let (py, ps) = (y1 as f64 / n as f64, s1 as f64 / n as f64);
    let [_, ey] = spec.p_primary[0];
    let [_, es] = spec.p_auxiliary[0];
    assert!((py - ey).abs() < 0.01, "{py} vs {ey}");
    assert!((ps - es).abs() < 0.01, "{ps} vs {es}");
    // same seed, same trial
    let a = simulate_trial(&spec, &mut rng_from_seed(3)).unwrap();
    let b = simulate_trial(&spec, &mut rng_from_seed(3)).unwrap();
    assert_eq!(a, b);
}

fn pool(records: &[(bool, bool)]) -> TrialDataset {
    TrialDataset::new(
        records
            .iter()
            .enumerate()
            .map(|(i, &(y, s))| PatientRecord {
                group: 0,
                arm: Arm::Control,
                primary: y,
                auxiliary: s,
                enroll_order: i as u64,
                primary_observed: true,
            })
            .collect(),
        1,
    )
    .unwrap()
}

#[test]
fn resampling_without_perturbation_has_no_effect() {
    let p = pool(&[(true, true), (false, true), (false, false), (true, false), (false, false)]);
    let mut rng = rng_from_seed(21);
    let mut z = Vec::new();
    for _ in 0..2000 {
        let d = resample_perturb(&p, 0.0, 0.0, 200, &mut rng).unwrap();
        if let Ok(s) = &compute_summaries(&d)[0] {
            z.push(s.z);
        }
    }
    let rej = z.iter().filter(|z| **z > 1.96).count() as f64 / z.len() as f64;
    assert!(rej < 0.025 + 3.0 * (0.025f64 * 0.975 / z.len() as f64).sqrt(), "{rej}");
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    assert!(mean.abs() < 0.1, "{mean}");
}

#[test]
fn full_perturbation_makes_treated_positive() {
    let p = pool(&[(false, false), (true, false)]);
    let d = resample_perturb(&p, 1.0, 1.0, 300, &mut rng_from_seed(5)).unwrap();
    assert!(d
        .patients()
        .iter()
        .filter(|p| p.arm == Arm::Experimental)
        .all(|p| p.primary && p.auxiliary));
    assert!(resample_perturb(&p, 1.5, 0.0, 10, &mut rng_from_seed(5)).is_err());
    assert!(resample_perturb(&pool(&[]), 0.1, 0.0, 10, &mut rng_from_seed(5)).is_err());
}

#[test]
fn dataset_csv_round_trip() {
    let spec = presets::six_groups(3, 10.0).unwrap();
    let d = simulate_trial(&spec, &mut rng_from_seed(8)).unwrap();
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let back = TrialDataset::read_csv(buf.as_slice(), Some(d.k_count())).unwrap();
    assert_eq!(d, back);
}
