mod common;

use std::collections::BTreeSet;

use barkit::augment::{
    augment_batch, bar_replace, cutmix3d, mix_labels, AugmentedSample, Augmenter, LabeledVolumes, RegionPolicy,
    SoftLabel,
};
use barkit::rng::seeded;
use common::{random_atlas, random_dims, random_volume};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn label_strategy() -> impl Strategy<Value = SoftLabel> {
    (2usize..5)
        .prop_flat_map(|c| proptest::collection::vec(0.01f64..1.0, c))
        .prop_map(|w| {
            let total: f64 = w.iter().sum();
            SoftLabel::new(w.iter().map(|v| v / total).collect()).unwrap()
        })
}

proptest! {
    #[test]
    fn voxels_come_from_anchor_or_donor(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = random_dims(6, &mut rng);
        let regions = rng.random_range(1..=4);
        let atlas = random_atlas(dims, regions, &mut rng);
        let a = random_volume(dims, &mut rng);
        let d = random_volume(dims, &mut rng);
        let chosen: BTreeSet<u32> = (1..=regions).filter(|_| rng.random_bool(0.5)).chain([1]).collect();
        let out = bar_replace(&a, &d, &atlas, &chosen).unwrap();
        let mut replaced = 0usize;
        for (i, v) in out.volume.data().iter().enumerate() {
            let inside = chosen.contains(&atlas.labels()[i]);
            let expected = if inside { d.data()[i] } else { a.data()[i] };
            prop_assert_eq!(v.to_bits(), expected.to_bits());
            replaced += inside as usize;
        }
        prop_assert_eq!((out.ratio * atlas.brain_voxel_count() as f64).round() as usize, replaced);
        prop_assert_eq!(out.replaced_voxels(), replaced);
    }

    #[test]
    fn complementary_selections_sum_to_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = random_dims(6, &mut rng);
        let atlas = random_atlas(dims, 4, &mut rng);
        let a = random_volume(dims, &mut rng);
        let d = random_volume(dims, &mut rng);
        let r1 = bar_replace(&a, &d, &atlas, &common::ids(&[1, 3])).unwrap().ratio;
        let r2 = bar_replace(&a, &d, &atlas, &common::ids(&[2, 4])).unwrap().ratio;
        prop_assert!((r1 + r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_label_is_convex_combination(a in label_strategy(), r in 0.0f64..=1.0) {
        let d = SoftLabel::one_hot(0, a.classes()).unwrap();
        let y = mix_labels(&a, &d, r).unwrap();
        for c in 0..a.classes() {
            let expect = (1.0 - r) * a.probs()[c] + r * d.probs()[c];
            prop_assert!((y.probs()[c] - expect).abs() <= 1e-12);
        }
        prop_assert!((y.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn cutmix_ratio_counts_brain_voxels(seed in any::<u64>(), alpha in 0.2f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = random_dims(7, &mut rng);
        let atlas = random_atlas(dims, 3, &mut rng);
        let a = random_volume(dims, &mut rng);
        let d = random_volume(dims, &mut rng);
        let out = cutmix3d(&a, &d, alpha, &mut rng, &atlas).unwrap();
        let brain = atlas.brain_mask();
        let mut inside_brain = 0;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let i = a.index(x, y, z);
                    let expected = if out.cuboid.contains(x, y, z) { d.data()[i] } else { a.data()[i] };
                    prop_assert_eq!(out.replacement.volume.data()[i].to_bits(), expected.to_bits());
                    inside_brain += (out.cuboid.contains(x, y, z) && brain.contains(i)) as usize;
                }
            }
        }
        prop_assert_eq!((out.replacement.ratio * atlas.brain_voxel_count() as f64).round() as usize, inside_brain);
    }
}

fn fixture(seed: u64) -> (barkit::volume::ParcellationAtlas, LabeledVolumes) {
    let mut rng = seeded(seed);
    let dims = [6, 5, 4];
    let atlas = random_atlas(dims, 5, &mut rng);
    let volumes = (0..6).map(|_| random_volume(dims, &mut rng)).collect();
    let labels = (0..6).map(|i| SoftLabel::one_hot(i % 2, 2).unwrap()).collect();
    (atlas, LabeledVolumes::new(volumes, labels).unwrap())
}

#[test]
fn batches_are_deterministic_and_replayable() {
    let (atlas, store) = fixture(11);
    let pairs = [(0, 1), (2, 3), (4, 5), (1, 0), (3, 3)];
    for aug in [Augmenter::Bar(RegionPolicy::FixedCount { k: 2 }), Augmenter::CutMix { alpha: 1.0 }] {
        let first = augment_batch(&pairs, &store, &atlas, aug, 99).unwrap();
        let second = augment_batch(&pairs, &store, &atlas, aug, 99).unwrap();
        for (x, y) in first.iter().zip(&second) {
            assert_eq!(x.volume.data(), y.volume.data());
            assert_eq!(x.label, y.label);
            let replayed = AugmentedSample::replay(&x.provenance, &store, &atlas).unwrap();
            assert_eq!(replayed.volume.data(), x.volume.data());
            assert_eq!(replayed.ratio, x.ratio);
            assert_eq!(replayed.label, x.label);
        }
    }
}

#[test]
fn self_pair_is_identity() {
    let (atlas, store) = fixture(5);
    let out = augment_batch(&[(2, 2)], &store, &atlas, Augmenter::Bar(RegionPolicy::Bernoulli { p: 0.5 }), 1).unwrap();
    assert_eq!(out[0].volume.data(), store.volumes()[2].data());
    assert_eq!(out[0].label, store.labels()[2]);
}

#[test]
fn label_matches_mix_of_sources() {
    let (atlas, store) = fixture(8);
    let out = augment_batch(&[(0, 1)], &store, &atlas, Augmenter::Bar(RegionPolicy::FixedCount { k: 1 }), 4).unwrap();
    let s = &out[0];
    let expect = [1.0 - s.ratio, s.ratio];
    for (got, want) in s.label.probs().iter().zip(expect) {
        assert!((got - want).abs() < 1e-12);
    }
    let record = s.record("a.nii", "b.nii");
    let json = serde_json::to_string(&record).unwrap();
    assert!(json.contains("\"method\":\"bar\""));
    assert!(!json.contains("cuboid"));
}

#[test]
fn too_many_regions_rejected() {
    let (atlas, store) = fixture(2);
    let err = augment_batch(&[(0, 1)], &store, &atlas, Augmenter::Bar(RegionPolicy::FixedCount { k: 6 }), 0).unwrap_err();
    assert!(matches!(err, barkit::Error::KTooLarge { k: 6, available: 5 }));
}
