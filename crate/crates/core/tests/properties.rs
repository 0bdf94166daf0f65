use std::io::Cursor;

use lccd::colorgrid::{bin_index, compute_region_histograms, region_bounds, ChannelPlane, RasterImage};
use lccd::descriptor::{extract_image, DescriptorSet, ExtractionConfig, StreamKind};
use lccd::divergence::{divergence, subspace_divergence, DiscreteDistribution, DivergenceKind, SubspaceConfig};
use lccd::encoding::{fisher_vector, GmmModel};
use lccd::formats::{DescriptorReader, DescriptorWriter};
use lccd::linalg::RowMatrix;
use proptest::prelude::*;

fn distribution(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], d).prop_filter_map("all zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 0.0).then(|| w.iter().map(|v| v / s).collect())
    })
}

fn pair(max_d: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3..=max_d).prop_flat_map(|d| (distribution(d), distribution(d)))
}

fn kind() -> impl Strategy<Value = DivergenceKind> {
    prop_oneof![
        Just(DivergenceKind::Bhattacharyya),
        Just(DivergenceKind::KL),
        Just(DivergenceKind::SymmetricKL),
        Just(DivergenceKind::Hellinger),
        Just(DivergenceKind::TotalVariation),
        Just(DivergenceKind::Pearson),
        (-2.0f64..3.0)
            .prop_filter("alpha must avoid 0 and 1", |a| a.abs() > 1e-3 && (a - 1.0).abs() > 1e-3)
            .prop_map(DivergenceKind::Alpha),
    ]
}

fn dist(v: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::new(v.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn divergences_are_nonnegative_with_zero_self_distance(k in kind(), (p, q) in pair(30)) {
        let v = divergence(k, &dist(&p), &dist(&q)).unwrap();
        prop_assert!(v >= 0.0, "{k}: {v}");
        prop_assert_eq!(divergence(k, &dist(&p), &dist(&p)).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_kinds_are_symmetric(k in kind(), (p, q) in pair(30)) {
        prop_assume!(k.is_symmetric());
        let a = divergence(k, &dist(&p), &dist(&q)).unwrap();
        let b = divergence(k, &dist(&q), &dist(&p)).unwrap();
        prop_assert!(a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0), "{k}: {a} vs {b}");
    }

    #[test]
    fn reversing_bins_changes_nothing(k in kind(), (p, q) in pair(30)) {
        let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
        let a = divergence(k, &dist(&p), &dist(&q)).unwrap();
        let b = divergence(k, &dist(&rev(&p)), &dist(&rev(&q))).unwrap();
        prop_assert!(a == b || (a.is_infinite() && b.is_infinite()));
    }

    #[test]
    fn hellinger_and_total_variation_are_bounded((p, q) in pair(30)) {
        prop_assert!(divergence(DivergenceKind::Hellinger, &dist(&p), &dist(&q)).unwrap() <= 1.0);
        prop_assert!(divergence(DivergenceKind::TotalVariation, &dist(&p), &dist(&q)).unwrap() <= 2.0 + 1e-12);
    }

    #[test]
    fn hellinger_windows_never_exceed_the_whole(window in 1usize..6, (p, q) in pair(30)) {
        prop_assume!(window <= p.len());
        let whole = divergence(DivergenceKind::Hellinger, &dist(&p), &dist(&q)).unwrap();
        let parts = subspace_divergence(DivergenceKind::Hellinger, &dist(&p), &dist(&q), SubspaceConfig::new(window).unwrap()).unwrap();
        prop_assert_eq!(parts.len(), p.len() - window + 1);
        for v in parts {
            prop_assert!(v <= whole + 1e-15);
        }
    }

    #[test]
    fn region_bounds_partition_the_axis(len in 3usize..500, parts in 1usize..60) {
        prop_assume!(parts <= len);
        let mut next = 0;
        for i in 0..parts {
            let (s, e) = region_bounds(len, parts, i);
            prop_assert_eq!(s, next);
            prop_assert!(e - s == len / parts || e - s == len / parts + 1);
            next = e;
        }
        prop_assert_eq!(next, len);
    }

    #[test]
    fn bin_index_is_monotone_and_in_range(a in 0.0f64..255.0, b in 0.0f64..255.0, bins in 2usize..64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (i, j) = (bin_index(lo, 0.0, 255.0, bins), bin_index(hi, 0.0, 255.0, bins));
        prop_assert!(i <= j && j < bins);
    }

    #[test]
    fn region_histograms_are_distributions(
        w in 9usize..40,
        h in 9usize..40,
        rows in 3usize..9,
        cols in 3usize..9,
        bins in 2usize..25,
        seed in any::<u64>(),
    ) {
        prop_assume!(rows <= h && cols <= w);
        let values: Vec<f64> = (0..w * h)
            .map(|i| ((i as u64).wrapping_mul(6364136223846793005) ^ seed) % 256)
            .map(|v| v as f64)
            .collect();
        let plane = ChannelPlane::new(w, h, values, 0.0, 255.0).unwrap();
        let grid = compute_region_histograms(&plane, rows, cols, bins).unwrap();
        for r in 0..rows {
            for c in 0..cols {
                let hist = grid.histogram(r, c);
                prop_assert_eq!(hist.len(), bins);
                prop_assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn descriptors_are_bounded_for_hellinger(seed in any::<u32>()) {
        let img = RasterImage::from_fn(30, 24, |x, y| {
            let v = (x as u32).wrapping_mul(2654435761) ^ (y as u32).wrapping_mul(40503) ^ seed;
            [v as u8, (v >> 8) as u8, (v >> 16) as u8]
        }).unwrap();
        let cfg = ExtractionConfig { resize: (30, 24), grid_rows: 5, grid_cols: 6, ..ExtractionConfig::default() };
        let (s, c) = extract_image("x", &img, &cfg).unwrap();
        prop_assert!(s.values.iter().chain(&c.values).all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn fisher_vectors_have_unit_norm(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..30),
        seed in 0u64..1000,
    ) {
        let means: Vec<f64> = (0..6).map(|i| ((seed + i) % 7) as f64 - 3.0).collect();
        let gmm = GmmModel::from_parts(3, vec![0.25, 0.75], means, vec![0.5, 1.0, 2.0, 1.5, 0.7, 1.1]).unwrap();
        let v = fisher_vector(&gmm, &RowMatrix::from_rows(&rows).unwrap()).unwrap();
        prop_assert_eq!(v.len(), 12);
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - 1.0).abs() < 1e-12 || n == 0.0);
    }

    #[test]
    fn descriptor_files_round_trip(
        sets in prop::collection::vec(prop::collection::vec(0.0f32..1.0, 2 * 3 * 4), 0..5),
    ) {
        let sets: Vec<DescriptorSet> = sets
            .into_iter()
            .enumerate()
            .map(|(i, v)| DescriptorSet::new(format!("img{i}"), StreamKind::Channel, 4, 2, 3, v).unwrap())
            .collect();
        let mut w = DescriptorWriter::new(Cursor::new(Vec::new()), StreamKind::Channel, 4, 2, 3).unwrap();
        for s in &sets {
            w.write(s).unwrap();
        }
        let bytes = w.finish().unwrap().into_inner();
        let r = DescriptorReader::new(Cursor::new(bytes)).unwrap();
        prop_assert_eq!(r.header().count, sets.len());
        let back: Vec<DescriptorSet> = r.collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, sets);
    }
}
