//! Property tests for the distance kernels and the data model.

mod common;

use proptest::prelude::*;
use subskel::distances::{
    continuous_frechet, continuous_frechet_with_tolerance, discrete_frechet, dtw,
};
use subskel::features::{concat_features, FeatureGroup, FeatureTrajectory, Singleton};
use subskel::model::{split_train_test, Frame, FrameSequence, LabeledDataset, Skeleton, SplitSpec};
use subskel::simplify::{simplify, SimplifySpec};
use subskel::Trajectory;

fn trajectory_strategy(max_len: usize, dim: usize) -> impl Strategy<Value = Trajectory> {
    prop::collection::vec(
        prop::collection::vec(-50.0f64..50.0, dim..=dim),
        1..=max_len,
    )
    .prop_map(|vertices| Trajectory::from_vertices(&vertices).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn df_and_dtw_are_symmetric(
        p in trajectory_strategy(9, 2),
        q in trajectory_strategy(9, 2),
    ) {
        prop_assert_eq!(
            discrete_frechet(&p, &q).unwrap(),
            discrete_frechet(&q, &p).unwrap()
        );
        let a = dtw(&p, &q).unwrap();
        let b = dtw(&q, &p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn dtw_dominates_df(
        p in trajectory_strategy(9, 3),
        q in trajectory_strategy(9, 3),
    ) {
        let df = discrete_frechet(&p, &q).unwrap();
        let dtw_v = dtw(&p, &q).unwrap();
        prop_assert!(dtw_v >= df - 1e-12);
    }

    #[test]
    fn cf_sits_between_endpoint_bound_and_df(
        p in trajectory_strategy(7, 2),
        q in trajectory_strategy(7, 2),
    ) {
        let cf = continuous_frechet(&p, &q).unwrap();
        let df = discrete_frechet(&p, &q).unwrap();
        let start = p.vertex(0).iter().zip(q.vertex(0)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let end = p.last().iter().zip(q.last()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(cf <= df + 1e-12);
        prop_assert!(cf >= start.max(end) - 1e-12);
    }

    #[test]
    fn simplification_never_grows_and_keeps_endpoints(
        p in trajectory_strategy(24, 3),
        eps in 0.0f64..5.0,
    ) {
        let s = simplify(&p, &SimplifySpec::new(eps));
        prop_assert!(s.len() <= p.len());
        prop_assert_eq!(s.first(), p.first());
        prop_assert_eq!(s.last(), p.last());
    }

    #[test]
    fn concatenated_df_dominates_each_group(
        rows in prop::collection::vec(
            (prop::collection::vec(-10.0f64..10.0, 3), prop::collection::vec(-10.0f64..10.0, 3)),
            2..6
        ),
        other in prop::collection::vec(
            (prop::collection::vec(-10.0f64..10.0, 3), prop::collection::vec(-10.0f64..10.0, 3)),
            2..6
        ),
    ) {
        // Two grouped features over the same frame count: DF on the
        // frame-wise concatenation is at least DF on either group alone.
        let n = rows.len().min(other.len());
        let group = |name: &str| FeatureGroup {
            reference: None,
            singletons: vec![Singleton::absolute(name)],
        };
        let make = |vertices: Vec<Vec<f64>>, name: &str| FeatureTrajectory {
            group: group(name),
            trajectory: Trajectory::from_vertices(&vertices).unwrap(),
        };
        let p1 = make(rows[..n].iter().map(|r| r.0.clone()).collect(), "a");
        let p2 = make(other[..n].iter().map(|r| r.0.clone()).collect(), "b");
        let q1 = make(rows[..n].iter().map(|r| r.1.clone()).collect(), "a");
        let q2 = make(other[..n].iter().map(|r| r.1.clone()).collect(), "b");
        let p_cat = concat_features(&[p1.clone(), p2.clone()]).unwrap();
        let q_cat = concat_features(&[q1.clone(), q2.clone()]).unwrap();
        let df_cat = discrete_frechet(&p_cat, &q_cat).unwrap();
        for (pg, qg) in [(&p1, &q1), (&p2, &q2)] {
            let df_g = discrete_frechet(&pg.trajectory, &qg.trajectory).unwrap();
            prop_assert!(df_cat >= df_g - 1e-9, "cat {} < group {}", df_cat, df_g);
        }
    }
}

fn tiny_dataset(class_sizes: &[usize]) -> LabeledDataset {
    let skeleton = Skeleton::new(
        vec!["a".into(), "b".into()],
        &[("a".into(), "b".into())],
        vec!["a".into()],
    )
    .unwrap();
    let mut sequences = Vec::new();
    for (c, &size) in class_sizes.iter().enumerate() {
        for s in 0..size {
            let frame = Frame::new(vec![[c as f64, s as f64, 0.0], [0.0; 3]]).unwrap();
            sequences.push(
                FrameSequence::new(format!("c{c}"), Some(format!("s{s}")), 30.0, vec![frame])
                    .unwrap(),
            );
        }
    }
    LabeledDataset::new(skeleton, sequences, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_partitions_for_every_protocol(
        sizes in prop::collection::vec(2usize..9, 2..5),
        seed in any::<u64>(),
        fraction in 0.05f64..1.0,
    ) {
        let data = tiny_dataset(&sizes);
        let protocols = vec![
            SplitSpec::FixedCountPerClass { count: 1 },
            SplitSpec::FractionPerClass { fraction },
            SplitSpec::KFold { folds: 2, index: seed as usize % 2 },
        ];
        for protocol in protocols {
            let (train, test) = split_train_test(&data, &protocol, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), data.len());
            // Disjoint: every sequence appears exactly once across the parts.
            let mut seen: Vec<&FrameSequence> = train.sequences.iter().chain(&test.sequences).collect();
            seen.sort_by(|x, y| format!("{x:?}").cmp(&format!("{y:?}")));
            let mut orig: Vec<&FrameSequence> = data.sequences.iter().collect();
            orig.sort_by(|x, y| format!("{x:?}").cmp(&format!("{y:?}")));
            for (s, o) in seen.iter().zip(&orig) {
                prop_assert_eq!(*s, *o);
            }
        }
    }
}

#[test]
fn rigid_motion_leaves_all_distances_unchanged() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1D0);
    for _ in 0..40 {
        let (lp, lq) = (rng.gen_range(2..=7), rng.gen_range(2..=7));
        let p = common::random_trajectory(&mut rng, lp, 3, 4.0);
        let q = common::random_trajectory(&mut rng, lq, 3, 4.0);
        let angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let shift = rng.gen_range(-10.0..10.0);
        let pm = common::rigid_motion(&p, angle, shift);
        let qm = common::rigid_motion(&q, angle, shift);
        // CF resolved well below the 1e-9 budget so the value search does
        // not mask the geometric comparison.
        let cf = |a: &Trajectory, b: &Trajectory| {
            continuous_frechet_with_tolerance(a, b, 1e-12).unwrap()
        };
        for (before, after) in [
            (discrete_frechet(&p, &q).unwrap(), discrete_frechet(&pm, &qm).unwrap()),
            (dtw(&p, &q).unwrap(), dtw(&pm, &qm).unwrap()),
            (cf(&p, &q), cf(&pm, &qm)),
        ] {
            assert!(
                (before - after).abs() <= 1e-9 * before.max(1.0),
                "rigid motion moved a distance: {before} -> {after}"
            );
        }
    }
}

#[test]
fn collinear_midpoint_insertion_preserves_cf() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let tol = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC011);
    for _ in 0..30 {
        let (lp, lq) = (rng.gen_range(3..=6), rng.gen_range(2..=6));
        let p = common::random_trajectory(&mut rng, lp, 2, 4.0);
        let q = common::random_trajectory(&mut rng, lq, 2, 4.0);
        // Insert the midpoint of a random segment of p.
        let seg = rng.gen_range(0..p.len() - 1);
        let mut vertices: Vec<Vec<f64>> = p.vertices().map(<[f64]>::to_vec).collect();
        let mid: Vec<f64> = p
            .vertex(seg)
            .iter()
            .zip(p.vertex(seg + 1))
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        vertices.insert(seg + 1, mid);
        let p2 = Trajectory::from_vertices(&vertices).unwrap();
        let before = continuous_frechet(&p, &q).unwrap();
        let after = continuous_frechet(&p2, &q).unwrap();
        assert!(
            (before - after).abs() <= 2.0 * tol * before.max(1e-9),
            "midpoint insertion moved CF {before} -> {after}"
        );
    }
}
