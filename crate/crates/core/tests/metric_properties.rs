use modeset::explain::{Explanation, MethodTag, POSITIVE_CLASS};
use modeset::metrics::{angular_diff, cdc, pairwise_stats, sa, sign, ssa, top_k, Metric, TopK};
use proptest::prelude::*;

/// Attribution vectors with frequent exact ties and zeros, where the
/// ordering rules matter most.
fn attribution(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![
            3 => -5.0f64..5.0,
            1 => (-3i32..=3).prop_map(f64::from),
        ],
        d,
    )
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
    (1usize..12).prop_flat_map(|d| (attribution(d), attribution(d), 1usize..14))
}

/// Sign agreement computed straight from the definition.
fn sa_reference(a: &[f64], b: &[f64], k: usize) -> f64 {
    let pick = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[j].abs().partial_cmp(&v[i].abs()).unwrap().then(i.cmp(&j)));
        idx.truncate(k.min(v.len()));
        idx
    };
    let (ta, tb) = (pick(a), pick(b));
    let hits = ta
        .iter()
        .filter(|&&f| tb.contains(&f) && sign(a[f]) == sign(b[f]))
        .count();
    hits as f64 / ta.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn symmetric((a, b, k) in pair()) {
        let (ta, tb) = (top_k(&a, k).unwrap(), top_k(&b, k).unwrap());
        prop_assert_eq!(sa(&ta, &tb).unwrap(), sa(&tb, &ta).unwrap());
        prop_assert_eq!(ssa(&ta, &tb).unwrap(), ssa(&tb, &ta).unwrap());
        prop_assert_eq!(cdc(&ta, &tb).unwrap(), cdc(&tb, &ta).unwrap());
    }

    #[test]
    fn reflexive((a, _b, k) in pair()) {
        let t = top_k(&a, k).unwrap();
        prop_assert_eq!(sa(&t, &t).unwrap(), 1.0);
        prop_assert_eq!(ssa(&t, &t).unwrap(), 1.0);
        prop_assert_eq!(cdc(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn ssa_iff_full_sa_and_implies_cdc((a, b, k) in pair()) {
        let (ta, tb) = (top_k(&a, k).unwrap(), top_k(&b, k).unwrap());
        let full = sa(&ta, &tb).unwrap() == 1.0;
        let s = ssa(&ta, &tb).unwrap();
        prop_assert_eq!(s == 1.0, full);
        if s == 1.0 {
            prop_assert_eq!(cdc(&ta, &tb).unwrap(), 1.0);
        }
    }

    #[test]
    fn invariant_under_positive_scaling((a, b, k) in pair(), ca in 1e-3f64..1e3, cb in 1e-3f64..1e3) {
        let scaled = |v: &[f64], c: f64| v.iter().map(|x| x * c).collect::<Vec<_>>();
        let (ta, tb) = (top_k(&a, k).unwrap(), top_k(&b, k).unwrap());
        let (sa_, sb_) = (top_k(&scaled(&a, ca), k).unwrap(), top_k(&scaled(&b, cb), k).unwrap());
        // Non-dyadic factors can split exact ties through rounding.
        if ta == sa_ && tb == sb_ {
            prop_assert_eq!(sa(&ta, &tb).unwrap(), sa(&sa_, &sb_).unwrap());
        }
        let two = |v: &[f64], e: i32| v.iter().map(|x| x * 2f64.powi(e)).collect::<Vec<_>>();
        let (pa, pb) = (top_k(&two(&a, 7), k).unwrap(), top_k(&two(&b, -5), k).unwrap());
        prop_assert_eq!(sa(&ta, &tb).unwrap(), sa(&pa, &pb).unwrap());
        prop_assert_eq!(ssa(&ta, &tb).unwrap(), ssa(&pa, &pb).unwrap());
        prop_assert_eq!(cdc(&ta, &tb).unwrap(), cdc(&pa, &pb).unwrap());
    }

    #[test]
    fn sa_takes_multiples_of_one_over_k((a, b, k) in pair()) {
        let (ta, tb) = (top_k(&a, k).unwrap(), top_k(&b, k).unwrap());
        let kept = k.min(a.len());
        let v = sa(&ta, &tb).unwrap();
        let steps = v * kept as f64;
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((steps - steps.round()).abs() < 1e-12);
        prop_assert_eq!(v, sa_reference(&a, &b, k));
    }

    #[test]
    fn angle_is_scale_free_and_bounded((a, b, _k) in pair(), c in 1e-3f64..1e3) {
        let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
        match (angular_diff(&a, &b), angular_diff(&scaled, &b)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((0.0..=std::f64::consts::PI).contains(&x));
                prop_assert!((x - y).abs() < 1e-9);
                prop_assert!((x - angular_diff(&b, &a).unwrap()).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "definedness changed under scaling"),
        }
    }
}

fn table(rows: &[Vec<f64>]) -> Vec<Explanation> {
    rows.iter()
        .enumerate()
        .map(|(i, v)| Explanation {
            values: v.clone(),
            method: MethodTag::Saliency,
            target_class: POSITIVE_CLASS,
            input_id: 100 + i,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairwise_stats_match_brute_force(
        rows in prop::collection::vec(prop::collection::vec(attribution(6), 20), 3),
        k in 1usize..8,
    ) {
        let tables: Vec<_> = rows.iter().map(|r| table(r)).collect();
        for metric in Metric::ALL {
            let got = pairwise_stats(&tables, metric, TopK::Count(k)).unwrap();
            let pairs = [(0, 1), (0, 2), (1, 2)];
            let score = |i: usize, j: usize, x: usize| {
                let (a, b) = (top_k(&rows[i][x], k).unwrap(), top_k(&rows[j][x], k).unwrap());
                metric.score(&a, &b).unwrap()
            };
            for x in 0..20 {
                let want = pairs.iter().map(|&(i, j)| score(i, j, x)).sum::<f64>() / 3.0;
                prop_assert_eq!(got.per_input[x], want);
            }
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let want = (0..20).map(|x| score(i, j, x)).sum::<f64>() / 20.0;
                prop_assert_eq!(got.per_pair[p], want);
            }
            prop_assert_eq!(got.input_ids.clone(), (100..120).collect::<Vec<_>>());
        }
    }
}
