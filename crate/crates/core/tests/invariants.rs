//! Property tests over the public API.

use proptest::prelude::*;

use l2e_core::io::checkpoint::{decode_checkpoint, encode_checkpoint};
use l2e_core::io::{parse_config, RunConfig};
use l2e_core::mmd::{mmd2, KernelConfig, TrajectoryEmbedding};
use l2e_core::policy::{masked_softmax, Direction};
use l2e_core::rng::from_seed;
use l2e_core::zoo::{self, GameTree, TabularStrategy};
use l2e_core::{ActionSet, GameId, GameSpec, PolicyParams};

fn game() -> impl Strategy<Value = GameId> {
    prop::sample::select(GameId::ALL.to_vec())
}

fn embeddings(n: usize, dim: usize) -> impl Strategy<Value = Vec<TrajectoryEmbedding>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, dim), n).prop_map(move |vs| {
        vs.into_iter()
            .map(|vector| TrajectoryEmbedding { vector, valid_len: dim })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_ignores_logit_shifts(
        logits in prop::collection::vec(-20.0..20.0f64, 5),
        bits in 1u8..32,
        shift in -50.0..50.0f64,
    ) {
        let mask = ActionSet::from_bits(bits);
        let p = masked_softmax(&logits, mask);
        let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
        let q = masked_softmax(&shifted, mask);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for a in 0..5 {
            prop_assert!((p[a] - q[a]).abs() < 1e-12);
            if !mask.contains(a) {
                prop_assert_eq!(p[a], 0.0);
            }
        }
    }

    #[test]
    fn mmd2_is_symmetric_and_zero_on_itself(a in embeddings(6, 3), b in embeddings(6, 3), h in 0.1..5.0f64) {
        let cfg = KernelConfig { bandwidth: h, ..KernelConfig::default() };
        let ab = mmd2(&a, &b, &cfg).unwrap();
        prop_assert_eq!(ab.to_bits(), mmd2(&b, &a, &cfg).unwrap().to_bits());
        prop_assert!(mmd2(&a, &a, &cfg).unwrap().abs() < 1e-9);
    }

    #[test]
    fn checkpoints_round_trip_bit_exact(g in game(), seed in any::<u64>(), scale in 0.1..4.0f64) {
        let p = PolicyParams::init_scaled(&GameSpec::from_id(g), &mut from_seed(seed), scale);
        let q = decode_checkpoint(&encode_checkpoint(&p)).unwrap();
        prop_assert_eq!(q.game(), g);
        prop_assert_eq!(q.sizes(), p.sizes());
        prop_assert!(p.as_slice().iter().zip(q.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn config_text_round_trips(
        g in game(),
        seed in any::<u32>(),
        alpha in 0.001..1.0f64,
        epochs in 1usize..1000,
        n_diverse in 1usize..=5,
        mode in prop::sample::select(vec!["total", "reward_to_go", "linear_feature"]),
    ) {
        let mut cfg = RunConfig::for_game(g);
        cfg.set(Some("run"), "seed", &seed.to_string()).unwrap();
        cfg.set(Some("train"), "alpha", &alpha.to_string()).unwrap();
        cfg.set(Some("train"), "epochs", &epochs.to_string()).unwrap();
        cfg.set(Some("train"), "return_mode", mode).unwrap();
        cfg.set(Some("osg"), "n_diverse", &n_diverse.to_string()).unwrap();
        let back = parse_config(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn every_step_is_zero_sum(g in game(), seed in any::<u64>()) {
        let spec = GameSpec::from_id(g);
        let mut rng = from_seed(seed);
        for _ in 0..20 {
            let mut s = spec.reset(&mut rng);
            let mut total = [0.0; 2];
            while !s.is_terminal() {
                let mut acts = [None; 2];
                for p in spec.acting_players(&s).iter() {
                    let legal = spec.legal_actions(&s, p).unwrap();
                    prop_assert!(!legal.is_empty());
                    acts[p.index()] = Some(spec.random_action(legal, &mut rng));
                }
                let out = spec.step(&s, acts).unwrap();
                prop_assert_eq!(out.rewards[0] + out.rewards[1], 0.0);
                total[0] += out.rewards[0];
                total[1] += out.rewards[1];
                s = out.next_state;
            }
            prop_assert_eq!(total[0], -total[1]);
        }
    }

    #[test]
    fn ascend_then_descend_restores_params(seed in any::<u64>(), step in 0.001..1.0f64) {
        let spec = GameSpec::leduc();
        let mut rng = from_seed(seed);
        let p = PolicyParams::init(&spec, &mut rng);
        let obs = spec.encode_observation(&spec.reset(&mut rng), l2e_core::Player::First).0;
        let g = p.logprob_grad(&obs, 1, ActionSet::all(4)).unwrap();
        let q = p.apply_step(&g, step, Direction::Ascend).unwrap().apply_step(&g, step, Direction::Descend).unwrap();
        prop_assert!(p.as_slice().iter().zip(q.as_slice()).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn rps_exploitability_is_nonnegative(w in prop::collection::vec(0.01..1.0f64, 6)) {
        let tree = GameTree::build(&GameSpec::rps()).unwrap();
        let mut k = 0;
        let s = TabularStrategy::from_fn(&tree, |_| {
            let v = &w[3 * k..3 * k + 3];
            k += 1;
            let z: f64 = v.iter().sum();
            v.iter().map(|x| x / z).collect()
        });
        prop_assert!(zoo::cfr::exploitability_on(&tree, &s).unwrap() >= -1e-12);
    }
}
