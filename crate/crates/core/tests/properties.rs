mod common;

use std::collections::BTreeMap;

use caption_arena::arena::{
    fit_bradley_terry, log_likelihood, win_rate_matrix, BattleRecord, BattleSet, Outcome,
    PairCounts, Scope,
};
use caption_arena::chem::{
    canonical_smiles, parse_smiles, scaffold_split, write_smiles, SplitKind,
};
use caption_arena::metrics::{r2, roc_auc, spearman_r};
use caption_arena::store::{align, DatasetManifest, EmbeddingMatrix, Molecule, TaskKind};
use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn manifest(smiles: Vec<String>) -> DatasetManifest {
    DatasetManifest {
        dataset: "p".into(),
        task: TaskKind::Regression,
        molecules: smiles
            .into_iter()
            .enumerate()
            .map(|(i, smiles)| Molecule {
                id: format!("m{i}"),
                smiles,
                label: 0.0,
            })
            .collect(),
        captioners: vec![meta("x", "f", caption_arena::store::Representation::Smiles)],
    }
}

const NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn battles_strategy() -> impl Strategy<Value = Vec<(usize, usize, usize, u8)>> {
    prop::collection::vec((0..2usize, 0..4usize, 0..4usize, 0..3u8), 1..80)
}

fn battle_set(raw: &[(usize, usize, usize, u8)]) -> Option<BattleSet> {
    let battles: Vec<BattleRecord> = raw
        .iter()
        .enumerate()
        .filter(|(_, (_, a, b, _))| a != b)
        .map(|(k, &(d, a, b, o))| {
            let outcome = [Outcome::A, Outcome::B, Outcome::Tie][o as usize];
            BattleRecord::new(
                format!("d{d}"),
                0,
                format!("m{k}"),
                NAMES[a],
                NAMES[b],
                outcome,
            )
            .unwrap()
        })
        .collect();
    if battles.is_empty() {
        return None;
    }
    BattleSet::from_battles(battles).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_smiles_ignores_atom_order(pick in 0usize..10_000, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(pick as u64);
        let smiles = corpus_smiles(1, &mut rng).pop().unwrap();
        let mol = parse_smiles(&smiles).unwrap();
        let mut priority: Vec<usize> = (0..mol.atom_count()).collect();
        priority.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let rewritten = write_smiles(&mol, &priority);
        let reparsed = parse_smiles(&rewritten).unwrap();
        prop_assert_eq!(canonical_smiles(&mol), canonical_smiles(&reparsed));
    }

    #[test]
    fn scaffold_split_is_deterministic_and_near_ratio(n in 20usize..200, corpus in any::<u64>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(corpus);
        let m = manifest(corpus_smiles(n, &mut rng));
        let ratios = [0.6, 0.2, 0.1, 0.1];
        let first = scaffold_split(&m, ratios, seed, 2).unwrap();
        let again = scaffold_split(&m, ratios, seed, 2).unwrap();
        prop_assert_eq!(&first, &again);

        let keys = caption_arena::chem::split::scaffold_keys(&m).unwrap();
        let mut group_size: BTreeMap<_, usize> = BTreeMap::new();
        for k in &keys {
            *group_size.entry(k).or_default() += 1;
        }
        let largest = *group_size.values().max().unwrap();
        for split in &first {
            prop_assert_eq!(split.assignment.len(), n);
            let mut kind_of = BTreeMap::new();
            for (mol, key) in m.molecules.iter().zip(&keys) {
                let kind = split.assignment[&mol.id];
                prop_assert_eq!(*kind_of.entry(key).or_insert(kind), kind);
            }
            let train = split.sizes()[SplitKind::Train as usize] as f64;
            prop_assert!((train - 0.6 * n as f64).abs() <= 3.0 * largest as f64);
        }
    }

    #[test]
    fn emb_round_trip(rows in 0usize..12, dim in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f32> = (0..rows * dim).map(|_| normal(&mut rng) as f32).collect();
        let m = EmbeddingMatrix::new(rows, dim, values).unwrap();
        let back = EmbeddingMatrix::from_bytes(&m.to_bytes(), rows).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn emb_decoding_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64), rows in 0usize..4) {
        let _ = EmbeddingMatrix::from_bytes(&bytes, rows);
        let mut framed = b"EMB1".to_vec();
        framed.extend_from_slice(&bytes);
        let _ = EmbeddingMatrix::from_bytes(&framed, rows);
        if framed.len() >= 8 {
            let claimed = u32::from_le_bytes(framed[4..8].try_into().unwrap()) as usize;
            let _ = EmbeddingMatrix::from_bytes(&framed, claimed);
        }
    }

    #[test]
    fn align_rejects_mismatch_without_panicking(n in 1usize..6, mol_rows in 0usize..8, cap_rows in 0usize..8, cap_dims in (1usize..4, 1usize..4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut m = manifest(corpus_smiles(n, &mut rng));
        m.captioners.push(meta("y", "f", caption_arena::store::Representation::Smiles));
        let caps = BTreeMap::from([
            ("x".to_string(), EmbeddingMatrix::zeros(cap_rows, cap_dims.0)),
            ("y".to_string(), EmbeddingMatrix::zeros(n, cap_dims.1)),
        ]);
        let ok = align(m, EmbeddingMatrix::zeros(mol_rows, 2), caps).is_ok();
        prop_assert_eq!(ok, mol_rows == n && cap_rows == n && cap_dims.0 == cap_dims.1);
    }

    #[test]
    fn win_rates_are_antisymmetric(raw in battles_strategy()) {
        let Some(set) = battle_set(&raw) else { return Ok(()) };
        for scope in [Scope::Aggregate, Scope::Dataset(set.datasets()[0].to_string())] {
            let m = win_rate_matrix(&set, &scope).unwrap();
            for a in &m.names {
                for b in &m.names {
                    if let (Some(x), Some(y)) = (m.get(a, b), m.get(b, a)) {
                        prop_assert!((x + y - 1.0).abs() < 1e-12);
                        prop_assert!((0.0..=1.0).contains(&x));
                    }
                }
            }
        }
    }

    #[test]
    fn auc_of_negated_scores_complements(scores in prop::collection::vec(0i32..20, 2..40), labels in prop::collection::vec(any::<bool>(), 40)) {
        let s: Vec<f64> = scores.iter().map(|&v| f64::from(v)).collect();
        let y: Vec<f64> = labels[..s.len()].iter().map(|&b| f64::from(u8::from(b))).collect();
        prop_assume!(y.contains(&0.0) && y.contains(&1.0));
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let total = roc_auc(&s, &y).unwrap() + roc_auc(&neg, &y).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_metrics_ignore_monotone_transforms(scores in prop::collection::vec(-20i32..20, 3..40), labels in prop::collection::vec(any::<bool>(), 40), other in prop::collection::vec(-5i32..5, 40)) {
        let s: Vec<f64> = scores.iter().map(|&v| f64::from(v)).collect();
        let t: Vec<f64> = s.iter().map(|v| v * v * v + v + 7.0).collect();
        let y: Vec<f64> = labels[..s.len()].iter().map(|&b| f64::from(u8::from(b))).collect();
        if y.contains(&0.0) && y.contains(&1.0) {
            prop_assert_eq!(roc_auc(&s, &y).unwrap(), roc_auc(&t, &y).unwrap());
        }
        let z: Vec<f64> = other[..s.len()].iter().map(|&v| f64::from(v)).collect();
        if let (Ok(a), Ok(b)) = (spearman_r(&s, &z), spearman_r(&t, &z)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn r2_never_exceeds_one(preds in prop::collection::vec(-1e3f64..1e3, 2..30), labels in prop::collection::vec(-1e3f64..1e3, 30)) {
        if let Ok(v) = r2(&preds, &labels[..preds.len()]) {
            prop_assert!(v <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn bt_likelihood_is_translation_invariant(raw in battles_strategy(), shift in -5.0f64..5.0) {
        let Some(set) = battle_set(&raw) else { return Ok(()) };
        let counts = PairCounts::from_battles(&set);
        let w = counts.smoothed::<f64>();
        let table = fit_bradley_terry::<f64>(&set).unwrap();
        let theta: Vec<f64> = set.roster().iter().map(|c| table.get(c).map_or(0.0, |e| e.theta)).collect();
        let moved: Vec<f64> = theta.iter().map(|t| t + shift).collect();
        let (a, b) = (log_likelihood(&w, &theta), log_likelihood(&w, &moved));
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn bt_ratings_follow_relabeling(raw in battles_strategy()) {
        let Some(set) = battle_set(&raw) else { return Ok(()) };
        let renamed = set.relabel(|c| Some(format!("z{c}"))).unwrap();
        let (x, y) = (fit_bradley_terry::<f64>(&set).unwrap(), fit_bradley_terry::<f64>(&renamed).unwrap());
        for e in &x.entries {
            let r = y.get(&format!("z{}", e.captioner)).unwrap();
            prop_assert!((e.rating - r.rating).abs() < 1e-6);
        }
    }
}
