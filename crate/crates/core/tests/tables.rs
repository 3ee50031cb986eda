//! Table store: size, keying, determinism and the on-disk cache.

use std::collections::BTreeSet;

use hfmm::driver::{fmm_apply, RunConfig, TablePolicy};
use hfmm::greens::{MediaConfig, Point2, SpectralRules};
use hfmm::layered::{precompute_tables, ScatterOp, TableStore};
use hfmm::tree::{Particle, Tree, TreeConfig};
use hfmm::{Complex64, Error};

/// 32 × 32 grid, 16 per leaf: every leaf sits at level 3.
fn uniform_l3(y0: f64) -> Tree {
    let pts: Vec<Point2> = (0..32 * 32)
        .map(|i| Point2::new((i % 32) as f64 / 31.0, y0 + (i / 32) as f64 / 31.0))
        .collect();
    let mut t = Tree::build(&pts, TreeConfig::with_leaf_capacity(16)).unwrap();
    t.build_lists().unwrap();
    t
}

#[test]
fn far_table_size_matches_enumeration_and_bound() {
    let tree = uniform_l3(2.0);
    assert_eq!(tree.depth(), 3);
    assert!(tree.leaves().all(|l| tree.nodes[l].level == 3));
    let order = 20;
    let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
    let store = precompute_tables(&tree, &media, order, &SpectralRules::default()).unwrap();

    // Brute force: same-level pairs with adjacent parents and Chebyshev
    // distance at least 2.
    let mut keys = BTreeSet::new();
    for level in 2..=3u32 {
        let n = 1i64 << level;
        for (sx, sy) in (0..n).flat_map(|x| (0..n).map(move |y| (x, y))) {
            for (tx, ty) in (0..n).flat_map(|x| (0..n).map(move |y| (x, y))) {
                let far = (sx - tx).abs().max((sy - ty).abs()) >= 2;
                let parents = (sx / 2 - tx / 2).abs().max((sy / 2 - ty / 2).abs()) <= 1;
                if far && parents {
                    keys.insert((level, sy, tx - sx, ty - sy));
                }
            }
        }
    }
    assert_eq!(store.far_key_count(), keys.len());
    assert!(keys.iter().all(|&(_, _, ox, oy)| ox.abs() <= 3 && oy.abs() <= 3));

    // Well above the interface every entry is a full translation.
    assert!(store.far.values().flat_map(|t| t.entries.values()).all(|op| matches!(op, ScatterOp::Translate(_))));
    let bound = (1usize << 4) * 49 * (4 * order + 1);
    assert_eq!(store.far_entry_count(), keys.len() * (4 * order + 1));
    assert!(store.far_entry_count() <= bound, "{} > {bound}", store.far_entry_count());
}

#[test]
fn tables_are_deterministic() {
    let tree = uniform_l3(0.05);
    let media = MediaConfig::TwoLayer { k: 0.5, alpha: 2.0 };
    let a = precompute_tables(&tree, &media, 10, &SpectralRules::default()).unwrap();
    let b = precompute_tables(&tree, &media, 10, &SpectralRules::default()).unwrap();
    assert_eq!(a, b);
    assert!(!a.near.is_empty());
}

#[test]
fn boxes_sharing_height_and_offset_share_one_entry() {
    let tree = uniform_l3(2.0);
    let mut pairs = 0;
    for node in &tree.nodes {
        pairs += node.interaction_list.len();
    }
    let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
    let store = precompute_tables(&tree, &media, 4, &SpectralRules::default()).unwrap();
    assert!(store.far_key_count() < pairs);
}

fn temp_path(tag: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("hfmm-{tag}-{}.bin", std::process::id()))
}

#[test]
fn cache_round_trip_and_reuse() {
    let tree = uniform_l3(0.05);
    let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
    let rules = SpectralRules::default();
    let store = precompute_tables(&tree, &media, 8, &rules).unwrap();
    let path = temp_path("roundtrip");
    store.write_cache(&path).unwrap();
    let back = TableStore::read_cache(&path).unwrap();
    assert_eq!(back, store);
    back.check_matches(&media, &tree.root_box, 8, &rules).unwrap();
    let other = MediaConfig::TwoLayer { k: 1.0, alpha: 0.5 };
    assert!(matches!(back.check_matches(&other, &tree.root_box, 8, &rules), Err(Error::Cache(_))));
    assert!(matches!(back.check_matches(&media, &tree.root_box, 9, &rules), Err(Error::Cache(_))));

    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(TableStore::read_cache(&path), Err(Error::Cache(_))));
    std::fs::write(&path, b"not a table file").unwrap();
    assert!(matches!(TableStore::read_cache(&path), Err(Error::Cache(_))));
    std::fs::remove_file(&path).ok();
}

#[test]
fn driver_cache_policy() {
    let particles: Vec<Particle> = (0..200)
        .map(|i| {
            let t = i as f64;
            Particle::new((t * 0.618_034).fract(), 0.05 + (t * 0.414_214).fract(), Complex64::new((t * 1.3).sin(), 0.0))
        })
        .collect();
    let media = MediaConfig::TwoLayer { k: 1.0, alpha: 1.0 };
    let path = temp_path("driver");
    std::fs::remove_file(&path).ok();
    let mut cfg = RunConfig::new(media, 10, 10);
    let plain = fmm_apply(&particles, &cfg).unwrap();
    cfg.tables = TablePolicy::Cache(path.clone());
    let first = fmm_apply(&particles, &cfg).unwrap();
    assert!(path.exists());
    let second = fmm_apply(&particles, &cfg).unwrap();
    assert_eq!(plain, first);
    assert_eq!(first, second);

    // Same file, different impedance: refused.
    cfg.media = MediaConfig::TwoLayer { k: 1.0, alpha: 0.5 };
    assert!(matches!(fmm_apply(&particles, &cfg), Err(Error::Cache(_))));
    std::fs::remove_file(&path).ok();
}
