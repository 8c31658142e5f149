use faircredit::classifier::{LogisticObjective, ProbabilityPenalty, Standardizer, TrainConfig};
use faircredit::dataset::german_credit;
use faircredit::harness::{leakage_guard, plan_folds};
use faircredit::metrics::{
    aod, balanced_accuracy, confusion_by_group, di, eod, mutual_info_independence, separation_sp, spd, theil,
    Confusion, ConfusionByGroup, GroupRates,
};
use faircredit::mitigate_in::{grid_search_fit, GridConfig, PrejudicePenalty, RandomizedClassifier};
use faircredit::mitigate_post::{ceo_apply, roc_apply, CeoCost, CeoPolicy, RocConstraint, RocPolicy};
use faircredit::mitigate_pre::{lfr_objective, reweigh, LfrConfig, RepairPlan};
use faircredit::{DatasetId, LogisticModel, PipelineSpec, Processor, TabularDataset};
use proptest::prelude::*;

fn confusion() -> impl Strategy<Value = Confusion> {
    (1u32..60, 1u32..60, 1u32..60, 1u32..60).prop_map(|(tp, fp, tn, fn_)| Confusion {
        tp: tp as f64,
        fp: fp as f64,
        tn: tn as f64,
        fn_: fn_ as f64,
    })
}

/// Rows of (label, protected, value) with both groups and both labels present.
fn rows(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<f64>)> {
    prop::collection::vec((0u8..2, 0u8..2, 0.0f64..=1.0), n).prop_map(|mut r| {
        r[0].0 = 0;
        r[0].1 = 0;
        r[1].0 = 1;
        r[1].1 = 1;
        (r.iter().map(|t| t.0).collect(), r.iter().map(|t| t.1).collect(), r.iter().map(|t| t.2).collect())
    })
}

fn one_feature(x: Vec<f64>, y: Vec<u8>, s: Vec<u8>) -> TabularDataset {
    TabularDataset::new(x, vec!["x".into()], y, s, None).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn group_swap_antisymmetry(u in confusion(), p in confusion()) {
        let c = ConfusionByGroup { unprivileged: u, privileged: p };
        let (a, b) = (GroupRates::from(&c), GroupRates::from(&c.swapped()));
        prop_assert!(close(spd(&a).unwrap(), -spd(&b).unwrap(), 1e-12));
        prop_assert!(close(eod(&a).unwrap(), -eod(&b).unwrap(), 1e-12));
        prop_assert!(close(aod(&a).unwrap(), -aod(&b).unwrap(), 1e-12));
        prop_assert!(close(di(&a).unwrap() * di(&b).unwrap(), 1.0, 1e-12));
        prop_assert!(close(separation_sp(&a).unwrap(), separation_sp(&b).unwrap(), 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn theil_nonnegative_and_zero_iff_constant(y in prop::collection::vec(0u8..2, 1..60), hard in prop::collection::vec(0u8..2, 60)) {
        let yhat: Vec<f64> = y.iter().zip(&hard).map(|(_, &h)| f64::from(h)).collect();
        let b: Vec<f64> = y.iter().zip(&yhat).map(|(&y, &p)| p - f64::from(y) + 1.0).collect();
        if let Ok(t) = theil(&y, &yhat) {
            prop_assert!(t >= 0.0);
            let constant = b.iter().all(|&v| v == b[0]);
            prop_assert_eq!(t < 1e-12, constant);
        }
    }

    #[test]
    fn mutual_information_nonnegative(bins in prop::collection::vec(0usize..5, 2..80), s in prop::collection::vec(0u8..2, 80)) {
        let s = &s[..bins.len()];
        if let Ok(mi) = mutual_info_independence(&bins, s) {
            prop_assert!(mi >= -1e-15);
        }
    }

    #[test]
    fn confusion_matches_recount((y, s, p) in rows(2..120)) {
        let hard: Vec<f64> = p.iter().map(|&v| v.round()).collect();
        let c = confusion_by_group(&y, &hard, &s).unwrap();
        for (g, got) in [(0u8, c.unprivileged), (1, c.privileged)] {
            let mut want = [0.0f64; 4];
            for i in 0..y.len() {
                if s[i] != g { continue; }
                let k = match (y[i], hard[i] == 1.0) {
                    (1, true) => 0,
                    (0, true) => 1,
                    (0, false) => 2,
                    _ => 3,
                };
                want[k] += 1.0;
            }
            prop_assert_eq!([got.tp, got.fp, got.tn, got.fn_], want);
        }
    }

    #[test]
    fn constant_predictor_has_half_balanced_accuracy((y, s, _) in rows(2..80), favorable in any::<bool>()) {
        prop_assume!(y.contains(&0) && y.contains(&1));
        let p = vec![if favorable { 1.0 } else { 0.0 }; y.len()];
        let c = confusion_by_group(&y, &p, &s).unwrap().pooled();
        prop_assert!((balanced_accuracy(&c).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reweighing_equalizes_favorable_rates((y, s, x) in rows(8..120)) {
        let mut cells = [[0usize; 2]; 2];
        for i in 0..y.len() { cells[usize::from(s[i])][usize::from(y[i])] += 1; }
        prop_assume!(cells.iter().flatten().all(|&c| c > 0));
        let ds = one_feature(x, y, s);
        let w = reweigh(&ds).unwrap();
        prop_assert!((w.weighted_favorable_rate(0) - w.weighted_favorable_rate(1)).abs() < 1e-12);
        let total: f64 = w.weights().iter().sum();
        prop_assert!((total - ds.len() as f64).abs() < 1e-9);
        prop_assert_eq!(w.features(), ds.features());
    }

    #[test]
    fn repair_is_rank_preserving_and_monotone_in_lambda((y, s, x) in rows(6..80), l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0) {
        let ds = one_feature(x.clone(), y, s.clone());
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let a = RepairPlan::fit(&ds, lo, &[]).unwrap().transform(&ds).unwrap();
        let b = RepairPlan::fit(&ds, hi, &[]).unwrap().transform(&ds).unwrap();
        let full = RepairPlan::fit(&ds, 1.0, &[]).unwrap().transform(&ds).unwrap();
        for i in 0..x.len() {
            // distance to the fully repaired value shrinks as λ grows
            let da = (a.features()[i] - full.features()[i]).abs();
            let db = (b.features()[i] - full.features()[i]).abs();
            prop_assert!(db <= da + 1e-9);
            for j in 0..x.len() {
                if s[i] == s[j] && x[i] < x[j] {
                    prop_assert!(b.features()[i] <= b.features()[j] + 1e-12);
                }
            }
        }
        let zero = RepairPlan::fit(&ds, 0.0, &[]).unwrap().transform(&ds).unwrap();
        prop_assert_eq!(zero.features(), ds.features());
    }

    #[test]
    fn full_repair_equalizes_groups(xu in prop::collection::vec(-50.0f64..50.0, 3..40), xp in prop::collection::vec(0.0f64..100.0, 3..40)) {
        let (nu, np) = (xu.len(), xp.len());
        let x: Vec<f64> = xu.iter().chain(&xp).copied().collect();
        let s: Vec<u8> = (0..nu + np).map(|i| u8::from(i >= nu)).collect();
        let y: Vec<u8> = (0..nu + np).map(|i| (i % 2) as u8).collect();
        let ds = one_feature(x, y, s);
        let r = RepairPlan::fit(&ds, 1.0, &[]).unwrap().transform(&ds).unwrap();
        let (ru, rp) = r.features().split_at(nu);
        let ecdf = |v: &[f64], t: f64| v.iter().filter(|&&a| a <= t).count() as f64 / v.len() as f64;
        let ks = r.features().iter().map(|&t| (ecdf(ru, t) - ecdf(rp, t)).abs()).fold(0.0, f64::max);
        prop_assert!(ks <= 1.0 / nu as f64 + 1.0 / np as f64 + 1e-12, "ks {}", ks);
    }

    #[test]
    fn roc_flips_only_in_region((_, s, p) in rows(2..200), t in 0.05f64..0.95, m in 0.001f64..0.499) {
        let policy = RocPolicy::new(RocConstraint::Spd, t, m).unwrap();
        let out = roc_apply(&policy, &p, &s).unwrap();
        for i in 0..p.len() {
            let plain = u8::from(p[i] >= t);
            if out[i] != plain {
                prop_assert!(policy.in_region(p[i]));
                prop_assert_eq!(out[i], u8::from(s[i] == 0));
            }
        }
        prop_assert_eq!(roc_apply(&policy, &p, &s).unwrap(), out);
    }

    #[test]
    fn ceo_mixing_is_convex((_, s, p) in rows(2..100), m0 in 0.0f64..=1.0, m1 in 0.0f64..=1.0, b0 in 0.0f64..=1.0, b1 in 0.0f64..=1.0) {
        let policy = CeoPolicy { cost: CeoCost::Weighted, mix: [m0, m1], base_rate: [b0, b1], group_cost: [0.0; 2], calibration_gap: 0.0 };
        let out = ceo_apply(&policy, &p, &s).unwrap();
        let half = CeoPolicy { mix: [m0 / 2.0, m1 / 2.0], ..policy.clone() };
        let mid = ceo_apply(&half, &p, &s).unwrap();
        for i in 0..p.len() {
            let base = policy.base_rate[usize::from(s[i])];
            let (lo, hi) = if p[i] <= base { (p[i], base) } else { (base, p[i]) };
            prop_assert!(out[i] >= lo - 1e-12 && out[i] <= hi + 1e-12);
            // a larger mixing rate moves at least as far toward the base rate
            prop_assert!((out[i] - base).abs() <= (mid[i] - base).abs() + 1e-12);
        }
    }
}

fn finite_difference_check(obj: &LogisticObjective, params: &[f64]) {
    let g = obj.gradient(params);
    for j in 0..params.len() {
        let h = 1e-6;
        let mut up = params.to_vec();
        let mut dn = params.to_vec();
        up[j] += h;
        dn[j] -= h;
        let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
        assert!(
            (fd - g[j]).abs() <= 1e-4 * fd.abs().max(g[j].abs()).max(1e-3),
            "coordinate {j}: analytic {} vs numeric {fd}",
            g[j]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nll_gradients_match_finite_differences(
        (y, s, x) in rows(10..40),
        params in prop::collection::vec(-2.0f64..2.0, 2),
        eta in 0.0f64..20.0,
    ) {
        let ds = one_feature(x, y, s);
        let std = Standardizer::identity(1);
        finite_difference_check(&LogisticObjective::new(&ds, &std, 1e-3, None), &params);
        let pen = PrejudicePenalty { eta, protected: ds.protected() };
        finite_difference_check(&LogisticObjective::new(&ds, &std, 1e-3, Some(&pen as &dyn ProbabilityPenalty)), &params);
    }

    #[test]
    fn lfr_gradient_matches_finite_differences((y, s, x) in rows(8..30), seed in any::<u64>()) {
        let ds = one_feature(x, y, s);
        let cfg = LfrConfig { k: 3, ..LfrConfig::default() };
        let d = ds.n_features();
        let mut state = seed | 1;
        let params: Vec<f64> = (0..cfg.k * d + cfg.k)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 2000) as f64 / 1000.0 - 1.0
            })
            .collect();
        let (_, g) = lfr_objective(&ds, &cfg, &params).unwrap();
        for j in 0..params.len() {
            let h = 1e-6;
            let mut up = params.clone();
            let mut dn = params.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (lfr_objective(&ds, &cfg, &up).unwrap().0.total - lfr_objective(&ds, &cfg, &dn).unwrap().0.total) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-4 * fd.abs().max(g[j].abs()).max(1e-2), "{} vs {}", g[j], fd);
        }
    }

    #[test]
    fn mixture_expectation_is_weighted_average((y, s, x) in rows(4..40), w in prop::collection::vec(0.01f64..1.0, 3), biases in prop::collection::vec(-3.0f64..3.0, 3)) {
        let ds = one_feature(x, y, s);
        let base = faircredit::classifier::fit(&ds, &TrainConfig { max_iter: 50, ..TrainConfig::default() }).unwrap();
        let members: Vec<LogisticModel> = biases.iter().map(|&b| LogisticModel { intercept: b, ..base.clone() }).collect();
        let total: f64 = w.iter().sum();
        let q: Vec<f64> = w.iter().map(|v| v / total).collect();
        let mix = RandomizedClassifier::new(members.clone(), q.clone()).unwrap();
        let got = mix.predict_expected(&ds).unwrap();
        for (i, row) in ds.rows().enumerate() {
            let want: f64 = members.iter().zip(&q).map(|(m, qk)| qk * f64::from(u8::from(faircredit::classifier::sigmoid(m.score_row(row)) >= 0.5))).sum();
            prop_assert!((got[i] - want.clamp(0.0, 1.0)).abs() < 1e-12);
        }
    }
}

#[test]
fn grid_trace_covers_every_multiplier() {
    let x: Vec<f64> = (0..60).map(|i| (i % 7) as f64 + (i % 2) as f64).collect();
    let y: Vec<u8> = (0..60).map(|i| u8::from(i % 3 != 0)).collect();
    let s: Vec<u8> = (0..60).map(|i| (i % 2) as u8).collect();
    let ds = one_feature(x, y, s);
    for size in [2, 5, 11] {
        let cfg = GridConfig { grid_size: size, ..GridConfig::default() };
        let out = grid_search_fit(&ds, &cfg).unwrap();
        assert_eq!(out.trace.len(), size);
        assert_eq!(out.trace.iter().map(|p| p.multiplier).collect::<Vec<_>>(), cfg.multipliers());
        assert!(out.index < size);
    }
}

#[test]
fn folds_are_shared_and_test_is_untouched() {
    let ds = german_credit().unwrap();
    for seed in 0..5 {
        let mut prints = Vec::new();
        for p in [Processor::None, Processor::Reweighing, Processor::Dir { lambda: 1.0 }] {
            let spec = PipelineSpec::new(DatasetId::German, p, seed);
            let (folds, fp) = plan_folds(&ds, &spec).unwrap();
            prints.push((fp, folds.clone()));
            for f in &folds {
                leakage_guard(&f.test, &f.fit, ds.len()).unwrap();
                leakage_guard(&f.test, &f.validation, ds.len()).unwrap();
            }
        }
        assert!(prints.windows(2).all(|w| w[0] == w[1]));
    }
}
