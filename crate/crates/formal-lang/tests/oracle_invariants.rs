//! Exhaustive oracle checks over the full language grids: membership
//! round-trips, prefix consistency, oracle regeneration, and pairwise
//! distinguishability.

use std::collections::BTreeSet;

use formal_lang::{AllowedNext, DatasetLanguageSpec, GeneralLanguageSpec, LanguageSpec};
use proptest::prelude::*;

#[test]
fn membership_roundtrip_all_216_languages() {
    for spec in DatasetLanguageSpec::grid() {
        for n in spec.min_n()..=spec.min_n() + 3 {
            let s = spec.string_for_n(n).unwrap();
            assert!(spec.is_member(&s), "{spec} n={n}");
        }
    }
}

#[test]
fn prefix_consistency_all_216_languages() {
    // Every proper prefix of a member is live, and the oracle allows
    // the actual next token.
    for spec in DatasetLanguageSpec::grid() {
        for n in spec.min_n()..=spec.min_n().max(3) {
            let s = spec.string_for_n(n).unwrap();
            for cut in 0..s.len() {
                match spec.allowed_next(&s[..cut], false) {
                    AllowedNext::Dead => panic!("{spec} n={n}: dead prefix at {cut}"),
                    AllowedNext::Next(set) => {
                        assert!(
                            set.contains(&s[cut]),
                            "{spec} n={n}: token at {cut} not allowed"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn oracle_regeneration_matches_member_prefixes() {
    // Walking the oracle from the empty prefix (never taking EOS)
    // reaches exactly the member prefixes up to a length horizon. The
    // horizon is the longest member with n <= min_n + 3; the expected
    // set is brute-forced from members with n up to horizon + n_floor,
    // since a live prefix of length len needs at most n = len.
    for spec in DatasetLanguageSpec::grid() {
        let n_hi = spec.min_n() + 3;
        let max_len = spec.string_for_n(n_hi).unwrap().len();

        let mut expected = BTreeSet::new();
        for n in spec.min_n()..=(max_len as u64 + spec.n_floor()) {
            let s = spec.string_for_n(n).unwrap();
            for cut in 0..=s.len().min(max_len) {
                expected.insert(s[..cut].to_vec());
            }
        }

        let mut reached = BTreeSet::new();
        let mut frontier = vec![Vec::new()];
        while let Some(p) = frontier.pop() {
            if !reached.insert(p.clone()) {
                continue;
            }
            match spec.allowed_next(&p, false) {
                AllowedNext::Dead => panic!("{spec}: reached dead prefix {p:?}"),
                AllowedNext::Next(set) => {
                    for &t in &set {
                        let mut q = p.clone();
                        q.push(t);
                        if q.len() <= max_len {
                            frontier.push(q);
                        }
                    }
                }
            }
        }

        assert_eq!(reached, expected, "{spec}: oracle walk != member prefixes");
    }
}

#[test]
fn all_27_general_oracles_pairwise_distinguishable() {
    // k = 4, M = 3: some probe of length <= 4M separates every pair.
    let specs = GeneralLanguageSpec::grid(4, 3);
    assert_eq!(specs.len(), 27);
    let cap = 4 * 3;

    // Probe domain: live prefixes of any language in the grid, by
    // breadth-first expansion.
    let mut domain: Vec<Vec<u8>> = Vec::new();
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    while let Some(p) = frontier.pop() {
        if p.len() >= cap {
            continue;
        }
        for t in 1..=4u8 {
            let mut q = p.clone();
            q.push(t);
            if specs
                .iter()
                .any(|s| !s.allowed_next(&q, false).is_dead())
            {
                domain.push(q.clone());
                frontier.push(q);
            }
        }
    }

    for i in 0..specs.len() {
        for j in i + 1..specs.len() {
            let separated = domain.iter().any(|p| {
                specs[i].allowed_next(p, false) != specs[j].allowed_next(p, false)
            });
            assert!(
                separated,
                "{} vs {} not separated within length {cap}",
                specs[i], specs[j]
            );
        }
    }
}

proptest! {
    #[test]
    fn members_of_one_language_are_rejected_by_structurally_different_ones(
        mb in -3i8..=2, mc in -3i8..=2, md in -3i8..=2, n_extra in 0u64..3
    ) {
        let spec = DatasetLanguageSpec::new(mb, mc, md).unwrap();
        let n = spec.min_n() + n_extra;
        let s = spec.string_for_n(n).unwrap();
        prop_assert!(spec.is_member(&s));

        // Shifting one offset changes the block pattern for this n, so
        // membership must flip unless the block count is unchanged.
        if md < 2 {
            let other = DatasetLanguageSpec::new(mb, mc, md + 1).unwrap();
            prop_assert!(!other.is_member(&s));
        }
    }
}
