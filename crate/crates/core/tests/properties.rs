use entconv::channels::{
    apply, bell_extremal_catalog, mix, BellAction, LocalKrausPair, Protocol, SeparableChannel,
};
use entconv::convertibility::{
    decide, decide_bell, synthesize_mems_protocol, verify_protocol, DecideOptions, Reason, Verdict,
};
use entconv::exec::trial_rng;
use entconv::measures::{
    bell_monotones, concurrence, concurrence_via_spectrum, eof, eof_from_concurrence, negativity, ExtReal,
};
use entconv::oracle::{random_density_matrix, random_separable_channel, random_unitary2};
use entconv::qmat::{hermitian_eig, kron2, partial_trace, partial_transpose, CMat4, Subsystem};
use entconv::states::{
    classify_family, is_entangled, make_bell_diagonal, make_bell_diagonal_ordered, make_mems, make_werner,
    BellWeights, DensityMatrix, FamilyTag, MemsWeights, WernerParam,
};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn hermitian(entries: [f64; 16]) -> CMat4 {
    let mut m = CMat4::zeros();
    let mut k = 0;
    for i in 0..4 {
        m.0[i][i] = C64::new(entries[k], 0.0);
        k += 1;
    }
    for i in 0..4 {
        for j in (i + 1)..4 {
            let z = C64::new(entries[k], entries[k + 1]);
            k += 2;
            m.0[i][j] = z;
            m.0[j][i] = z.conj();
        }
    }
    m
}

fn state(seed: u64, rank: usize) -> DensityMatrix {
    random_density_matrix(&mut trial_rng(seed, 0), rank)
}

fn sorted_simplex(raw: [f64; 4]) -> [f64; 4] {
    let s: f64 = raw.iter().sum();
    let mut l = raw.map(|x| x / s);
    l.sort_by(|a, b| b.total_cmp(a));
    // absorb rounding so the weights sum to one exactly enough
    let rest: f64 = l[1..].iter().sum();
    l[0] = 1.0 - rest;
    l
}

fn entangled_bell() -> impl Strategy<Value = BellWeights> {
    prop::array::uniform4(0.01f64..1.0)
        .prop_map(sorted_simplex)
        .prop_filter("entangled", |l| l[0] > 0.5 + 1e-6)
        .prop_map(|l| BellWeights::new(l).unwrap())
}

proptest! {
    #[test]
    fn eigendecomposition_reconstructs(entries in prop::array::uniform16(-3.0f64..3.0)) {
        let h = hermitian(entries);
        let e = hermitian_eig(&h).unwrap();
        prop_assert!(e.reconstruct().distance(&h) < 1e-10);
        prop_assert!(e.unitary().unitarity_defect() < 1e-10);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = e.eigenvalues.iter().sum();
        prop_assert!((trace - h.trace().re).abs() < 1e-10);
    }

    #[test]
    fn partial_operations(entries in prop::array::uniform16(-1.0f64..1.0)) {
        let h = hermitian(entries);
        for side in [Subsystem::A, Subsystem::B] {
            prop_assert!(partial_transpose(&partial_transpose(&h, side), side).distance(&h) == 0.0);
            prop_assert!((partial_trace(&h, side).trace() - h.trace()).norm() < 1e-12);
        }
        // full transpose = both partial transposes
        let both = partial_transpose(&partial_transpose(&h, Subsystem::A), Subsystem::B);
        prop_assert!(both.distance(&h.transpose()) < 1e-15);
    }

    #[test]
    fn measure_ranges_and_routes(seed in any::<u64>(), rank in 1usize..=4) {
        let rho = state(seed, rank);
        let c = concurrence(&rho);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!((c - concurrence_via_spectrum(&rho)).abs() < 1e-6);
        let n = negativity(&rho);
        prop_assert!((0.0..=0.5 + 1e-12).contains(&n));
        // two-qubit bound: 2N ≤ C
        prop_assert!(2.0 * n <= c + 1e-9);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&eof(&rho)));
        prop_assert_eq!(is_entangled(&rho), c > 1e-9 || n > 1e-10);
    }

    #[test]
    fn local_unitary_invariance(seed in any::<u64>(), rank in 1usize..=4) {
        let rho = state(seed, rank);
        let mut rng = trial_rng(seed, 1);
        let u = kron2(&random_unitary2(&mut rng), &random_unitary2(&mut rng));
        let out = DensityMatrix::new(u.sandwich(rho.matrix()).hermitian_part()).unwrap();
        prop_assert!((concurrence(&out) - concurrence(&rho)).abs() < 1e-9);
        prop_assert!((negativity(&out) - negativity(&rho)).abs() < 1e-10);
    }

    #[test]
    fn eof_is_monotone_in_concurrence(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(eof_from_concurrence(lo) <= eof_from_concurrence(hi) + 1e-15);
    }

    #[test]
    fn separable_channels_are_trace_preserving_and_positive(seed in any::<u64>(), n in 1usize..=8, rank in 1usize..=4) {
        let ch = random_separable_channel(seed, n).unwrap();
        let rho = state(seed ^ 1, rank);
        let raw = ch.apply_matrix(rho.matrix());
        prop_assert!((raw.trace().re - 1.0).abs() < 1e-9);
        prop_assert!(raw.hermiticity_defect() < 1e-10);
        prop_assert!(hermitian_eig(&raw.hermitian_part()).unwrap().min_eigenvalue() > -1e-10);
        // separable maps never raise concurrence
        prop_assert!(concurrence(&apply(&ch, &rho)) <= concurrence(&rho) + 1e-9);
    }

    #[test]
    fn incomplete_kraus_sets_are_rejected(seed in any::<u64>(), n in 1usize..=6) {
        let ch = random_separable_channel(seed, n).unwrap();
        let mut kraus: Vec<LocalKrausPair> = ch.kraus().to_vec();
        // violate completeness by ~1e-3
        kraus[0].a = kraus[0].a.scale_re(1.0 + 1e-3 / (1e-3 + kraus[0].a.frobenius_norm().powi(2)));
        prop_assert!(SeparableChannel::new(kraus, true).is_err());
    }

    #[test]
    fn catalog_monotones(l in entangled_bell(), picks in prop::collection::vec((0usize..13, 0.01f64..1.0), 1..5)) {
        let catalog = bell_extremal_catalog();
        let total: f64 = picks.iter().map(|p| p.1).sum();
        let parts: Vec<(f64, SeparableChannel)> =
            picks.iter().map(|&(k, w)| (w / total, catalog[k].channel.clone())).collect();
        let out = apply(&mix(&parts).unwrap(), &make_bell_diagonal(l));
        // predicted Bell weights from the catalog actions
        let mut predicted = [0.0; 4];
        for &(k, w) in &picks {
            let img = catalog[k].action.act(&l.lambda());
            for i in 0..4 {
                predicted[i] += w / total * img[i];
            }
        }
        prop_assert!(out.distance(&make_bell_diagonal_ordered(
            BellWeights::from_unsorted(predicted.map(|x| x.max(0.0))).unwrap(),
            order_of(predicted),
        )) < 1e-9);
        if is_entangled(&out) {
            let to = BellWeights::from_unsorted(predicted).unwrap();
            let (ein, eout) = (bell_monotones(&l), bell_monotones(&to));
            for (a, b) in ein.as_array().iter().zip(eout.as_array()) {
                prop_assert!(a.ge_within(&b, 1e-9), "{:?} -> {:?}", ein, eout);
            }
        }
    }

    #[test]
    fn bell_permutations_preserve_monotones(l in entangled_bell()) {
        for entry in bell_extremal_catalog() {
            if let BellAction::Permutation(_) = entry.action {
                let out = entry.action.act(&l.lambda());
                let w = BellWeights::from_unsorted(out).unwrap();
                prop_assert_eq!(bell_monotones(&w), bell_monotones(&l));
            }
        }
    }

    #[test]
    fn bell_rule_is_transitive(a in entangled_bell(), b in entangled_bell(), c in entangled_bell()) {
        let conv = |x: &BellWeights, y: &BellWeights| decide_bell(x, y).unwrap().is_convertible();
        if conv(&a, &b) && conv(&b, &c) {
            prop_assert!(conv(&a, &c));
        }
        prop_assert!(conv(&a, &a));
    }

    #[test]
    fn mems_synthesis_round_trip(raw in prop::array::uniform4(0.01f64..1.0), w in 0.05f64..0.95, prep in prop::array::uniform3(0.01f64..1.0)) {
        let l = sorted_simplex(raw);
        prop_assume!(l[0] - l[2] > 0.05);
        let ps: f64 = prep.iter().sum();
        let prep = prep.map(|x| x / ps);
        let t3 = w * l[2] + (1.0 - w) * prep[1] / 2.0;
        let target = [w * (l[0] - l[2]) + t3, w * l[1] + (1.0 - w) * prep[0], t3, w * l[3] + (1.0 - w) * prep[2]];
        let (Ok(src), Ok(dst)) = (MemsWeights::new(l), MemsWeights::new(target)) else {
            return Ok(());
        };
        let p = synthesize_mems_protocol(&src, &dst).unwrap();
        prop_assert!((p.w - w).abs() < 1e-8);
        prop_assert!(verify_protocol(&p.protocol(), &make_mems(src), &make_mems(dst)) < 1e-10);
    }

    #[test]
    fn decide_protocols_verify(s1 in any::<u64>(), s2 in any::<u64>(), r1 in 1usize..=4, r2 in 1usize..=4) {
        let (rho, rho2) = (state(s1, r1), state(s2, r2));
        let v = decide(&rho, &rho2, &DecideOptions::default());
        if let Some(p) = v.protocol() {
            prop_assert!(verify_protocol(p, &rho, &rho2) < 1e-8);
        }
        if let Verdict::Forbidden { reason: Reason::RankGate { from_rank, to_rank }, .. } = v {
            prop_assert!(to_rank < from_rank);
        }
    }

    #[test]
    fn ext_real_json_round_trip(x in prop::option::of(-1e300f64..1e300)) {
        let v = x.map_or(ExtReal::Infinity, ExtReal::Finite);
        let text = serde_json::to_string(&v).unwrap();
        prop_assert_eq!(serde_json::from_str::<ExtReal>(&text).unwrap(), v);
    }
}

/// `order[k]` = basis index of the `k`-th largest weight.
fn order_of(w: [f64; 4]) -> [usize; 4] {
    let mut idx = [0, 1, 2, 3];
    idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    idx
}

#[test]
fn classify_inverts_constructors() {
    for i in 0..50 {
        let t = i as f64 / 49.0;
        let w = WernerParam::new(t).unwrap();
        match classify_family(&make_werner(w), 1e-8) {
            FamilyTag::Werner(got) => assert!((got.value() - t).abs() < 1e-9, "w = {t}"),
            other => panic!("w = {t}: {other}"),
        }

        let b = BellWeights::new(sorted_simplex([0.6 + 0.4 * t, 0.3, 0.2 - 0.1 * t, 0.05])).unwrap();
        match classify_family(&make_bell_diagonal(b), 1e-8) {
            FamilyTag::BellDiagonal { weights, .. } => {
                for (x, y) in weights.lambda().iter().zip(b.lambda()) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
            other => panic!("{b:?}: {other}"),
        }

        let l3 = 0.2 * (1.0 - t);
        let l1 = 0.45 + 0.5 * t;
        let m = MemsWeights::new(sorted_simplex([l1, (1.0 - l1 - l3) * 0.7, l3, (1.0 - l1 - l3) * 0.3])).unwrap();
        match classify_family(&make_mems(m), 1e-8) {
            FamilyTag::Mems(got) => {
                for (x, y) in got.lambda().iter().zip(m.lambda()) {
                    assert!((x - y).abs() < 1e-9, "{m:?} vs {got:?}");
                }
            }
            FamilyTag::Werner(_) => {}
            other => panic!("{m:?}: {other}"),
        }
    }
}

#[test]
fn werner_threshold_by_bisection() {
    let entangled = |w: f64| is_entangled(&make_werner(WernerParam::new(w).unwrap()));
    let threshold = |lo: f64, hi: f64| {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if entangled(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let a = threshold(0.0, 1.0);
    let b = threshold(0.1, 0.9);
    assert!((a - 1.0 / 3.0).abs() < 1e-9, "{a}");
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn werner_soundness_grid() {
    let opts = DecideOptions::default();
    for i in 0..20 {
        for j in 0..20 {
            let (a, b) = (i as f64 / 19.0, j as f64 / 19.0);
            let (rho, rho2) = (make_werner(WernerParam::new(a).unwrap()), make_werner(WernerParam::new(b).unwrap()));
            let v = decide(&rho, &rho2, &opts);
            let expected = b <= 1.0 / 3.0 || a >= b;
            assert_eq!(v.is_convertible(), expected, "{a} -> {b}: {v:?}");
            if let Some(p) = v.protocol() {
                assert!(verify_protocol(p, &rho, &rho2) < 1e-12);
            }
            if !expected {
                assert!(v.reason().is_some(), "{a} -> {b}: {v:?}");
            }
        }
    }
}

#[test]
fn mems_soundness_grid() {
    let opts = DecideOptions::default();
    let mems = |t: f64| {
        let (l1, l3, l4) = (0.5 + 0.4 * t, 0.03, 0.02 * (1.0 - t));
        MemsWeights::new([l1, 1.0 - l1 - l3 - l4, l3, l4]).ok()
    };
    let mut checked = 0;
    for i in 0..20 {
        for j in 0..20 {
            let (Some(a), Some(b)) = (mems(i as f64 / 19.0), mems(j as f64 / 19.0)) else {
                continue;
            };
            let (rho, rho2) = (make_mems(a), make_mems(b));
            let v = decide(&rho, &rho2, &opts);
            if let Some(p) = v.protocol() {
                assert!(verify_protocol(p, &rho, &rho2) < 1e-8, "{a:?} -> {b:?}");
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 400);
}

#[test]
fn identity_protocol_is_neutral() {
    let rho = state(3, 4);
    assert!(verify_protocol(&Protocol::identity(), &rho, &rho) < 1e-15);
}
