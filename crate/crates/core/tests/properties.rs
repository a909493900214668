use pid_skar::*;
use proptest::prelude::*;

fn fast() -> OptimizerConfig {
    OptimizerConfig {
        restarts: 6,
        max_iterations: 400,
        ..OptimizerConfig::default()
    }
}

/// Three variables with alphabets of 1 to 3 symbols and arbitrary weights,
/// some exactly zero.
fn joint() -> impl Strategy<Value = JointDistribution> {
    (1usize..=3, 1usize..=3, 1usize..=3)
        .prop_flat_map(|(x, y, z)| {
            let cells = x * y * z;
            (
                Just((x, y, z)),
                prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], cells),
            )
        })
        .prop_filter_map("all weights zero", |((x, y, z), w)| {
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return None;
            }
            let sym = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
            JointDistribution::new(
                vec!["X".into(), "Y".into(), "Z".into()],
                vec![sym(x), sym(y), sym(z)],
                w.iter().map(|v| v / total).collect(),
            )
            .ok()
        })
}

fn binary_joint() -> impl Strategy<Value = JointDistribution> {
    prop::collection::vec(0.01f64..1.0, 8).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let bit = || vec!["0".to_string(), "1".to_string()];
        JointDistribution::new(
            vec!["S0".into(), "S1".into(), "T".into()],
            vec![bit(), bit(), bit()],
            w.iter().map(|v| v / total).collect(),
        )
        .unwrap()
    })
}

fn xyz() -> (VariableSet, VariableSet, VariableSet) {
    (
        VariableSet::single(0),
        VariableSet::single(1),
        VariableSet::single(2),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mutual_information_identity_and_chain_rule(d in joint()) {
        let (x, y, z) = xyz();
        let xy = x.union(&y).unwrap();
        let yz = y.union(&z).unwrap();
        let i = d.mutual_information(&x, &y).unwrap();
        let h = d.entropy(&x).unwrap() + d.entropy(&y).unwrap() - d.entropy(&xy).unwrap();
        prop_assert!((i - h.max(0.0)).abs() < 1e-12);
        let whole = d.mutual_information(&x, &yz).unwrap();
        let parts = i + d.conditional_mutual_information(&x, &z, &y).unwrap();
        prop_assert!((whole - parts).abs() < 1e-12);
    }

    #[test]
    fn attaching_a_channel_keeps_the_marginal(d in joint(), seed in any::<u64>()) {
        let (x, _, _) = xyz();
        let inputs = d.composite_alphabet(&x);
        let outputs: Vec<String> = vec!["a".into(), "b".into()];
        let mut state = seed | 1;
        let mut matrix = Vec::new();
        for _ in 0..inputs.len() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let p = (state % 1000) as f64 / 1000.0;
            matrix.extend([p, 1.0 - p]);
        }
        let ch = Channel::new(inputs, outputs, matrix).unwrap();
        let extended = d.attach_channel(&x, &ch, "W").unwrap();
        let back = extended.marginal(&d.all_vars()).unwrap();
        for (a, b) in back.pmf().iter().zip(d.pmf()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(back.alphabets(), d.alphabets());
    }

    #[test]
    fn entropy_ignores_variable_order(d in joint()) {
        let (x, y, z) = xyz();
        let permuted = d.marginal(&VariableSet::new(vec![2, 0, 1]).unwrap()).unwrap();
        let all = d.all_vars();
        prop_assert!((d.entropy(&all).unwrap() - permuted.entropy(&permuted.all_vars()).unwrap()).abs() < 1e-12);
        let zx = VariableSet::new(vec![2, 0]).unwrap();
        prop_assert!((d.entropy(&x.union(&z).unwrap()).unwrap() - d.entropy(&zx).unwrap()).abs() < 1e-12);
        prop_assert!((d.entropy(&y).unwrap() - permuted.entropy(&VariableSet::single(2)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn no_communication_rate_bounds(d in joint()) {
        let (x, y, z) = xyz();
        let r = skar_no_communication(&d, &x, &y, &z).unwrap().value;
        let cap = d.entropy(&x).unwrap().min(d.entropy(&y).unwrap());
        prop_assert!(r >= 0.0 && r <= cap + 1e-12);
        // an eavesdropper who sees nothing can only do worse
        let blind = skar_no_communication(&d, &x, &y, &VariableSet::empty()).unwrap().value;
        prop_assert!(blind + 1e-12 >= r);
        // merging the eavesdropper into the partner coarsens the meet
        let merged = skar_no_communication(&d, &x, &y.union(&z).unwrap(), &VariableSet::empty()).unwrap().value;
        prop_assert!(merged + 1e-12 >= blind);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_way_rate_sits_between_its_bounds(d in joint()) {
        let (x, y, z) = xyz();
        let r = skar_one_way(&d, &x, &y, &z, &fast()).unwrap();
        prop_assert!(r.value >= 0.0);
        prop_assert!(r.value + 1e-6 >= skar_no_communication(&d, &x, &y, &z).unwrap().value);
        prop_assert!(r.value + 1e-6 >= skar_one_way_deterministic_oracle(&d, &x, &y, &z).unwrap().value);
        let cmi = d.conditional_mutual_information(&x, &y, &z).unwrap();
        let mi = d.mutual_information(&x, &y).unwrap();
        prop_assert!(r.value <= cmi.min(mi) + 1e-9);
        if let Some(Witness::OneWay { key, public }) = &r.witness {
            let v = oneway_objective(&d, &x, &y, &z, key, public).unwrap();
            prop_assert!((v - r.value).abs() < 1e-9);
        }
    }

    #[test]
    fn broja_minimizer_is_feasible_and_consistent(d in binary_joint()) {
        let (s0, s1, t) = xyz();
        let (u0, q) = broja_unique(&d, &s0, &s1, &t, &fast()).unwrap();
        for pair in [[0, 2], [1, 2]] {
            let keep = VariableSet::new(pair.to_vec()).unwrap();
            let (a, b) = (d.marginal(&keep).unwrap(), q.marginal(&keep).unwrap());
            for (x, y) in a.pmf().iter().zip(b.pmf()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
        prop_assert!(u0.value >= -1e-12);
        prop_assert!(u0.value <= d.conditional_mutual_information(&s0, &t, &s1).unwrap() + 1e-9);
        prop_assert!(u0.value <= d.mutual_information(&s0, &t).unwrap() + 1e-9);
        let p = broja_pid(&d, &PidRoles::default_for(&d).unwrap(), &fast()).unwrap();
        prop_assert!(p.consistency_gap < 1e-6, "gap {}", p.consistency_gap);
    }

    #[test]
    fn assembled_identities(d in binary_joint()) {
        let roles = PidRoles::default_for(&d).unwrap();
        let mut all = vec![
            camel_pid(&d, &roles, &fast()).unwrap(),
            elephant_pid(&d, &roles, &fast()).unwrap(),
            nocomm_pid(&d, &roles).unwrap(),
            broja_pid(&d, &roles, &fast()).unwrap(),
        ];
        let two = twoway_pid(&d, &roles, &fast()).unwrap();
        all.push(two.lower);
        all.push(two.upper);
        for p in &all {
            let r = p.identity_residuals();
            prop_assert!(r.source_0.abs() < 1e-6);
            prop_assert!(r.total.abs() < 1e-6);
            prop_assert!((r.source_1.abs() - p.consistency_gap).abs() < 1e-12);
        }
    }
}
