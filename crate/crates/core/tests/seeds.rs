use std::collections::HashSet;

use copsel::rng::derive_seed;

#[test]
fn no_collisions_over_a_million_paths() {
    let mut seen = HashSet::with_capacity(1_000_000);
    for i in 0..1_000_000u32 {
        let (a, b) = (i / 1000, i % 1000);
        assert!(seen.insert(derive_seed(42, &["run", &a.to_string(), &b.to_string()])), "collision at {i}");
    }
}

#[test]
fn label_boundaries_matter() {
    assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
    assert_ne!(derive_seed(1, &["abc"]), derive_seed(1, &["ab", "c"]));
    assert_ne!(derive_seed(1, &[""; 0]), derive_seed(1, &[""]));
}

#[test]
fn master_and_last_label_both_matter() {
    assert_ne!(derive_seed(1, &["x"]), derive_seed(2, &["x"]));
    assert_ne!(derive_seed(1, &["x", "0"]), derive_seed(1, &["x", "1"]));
}

#[test]
fn independent_of_call_order() {
    let paths: Vec<Vec<String>> = (0..50).map(|i| vec!["p".into(), i.to_string()]).collect();
    let forward: Vec<u64> = paths.iter().map(|p| derive_seed(9, p)).collect();
    let backward: Vec<u64> = paths.iter().rev().map(|p| derive_seed(9, p)).collect();
    assert!(forward.iter().eq(backward.iter().rev()));
}
