//! Canonical atom ranking and canonical string keys.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::smiles::{write_fragments, MoleculeGraph};

/// Canonical text key of a scaffold graph. Acyclic molecules share `""`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScaffoldKey(pub String);

impl ScaffoldKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ScaffoldKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Assign dense ranks to atoms by sorting on `keys`.
fn dense_ranks<K: Ord>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut classes = 0;
    for (pos, &atom) in order.iter().enumerate() {
        if pos > 0 && keys[atom] != keys[order[pos - 1]] {
            classes += 1;
        }
        ranks[atom] = classes;
    }
    (ranks, if keys.is_empty() { 0 } else { classes + 1 })
}

fn refine(
    adj: &[Vec<(usize, usize)>],
    bond_codes: &[u8],
    mut ranks: Vec<usize>,
    mut classes: usize,
) -> (Vec<usize>, usize) {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = adj
            .iter()
            .enumerate()
            .map(|(atom, nbrs)| {
                let mut env: Vec<(usize, u8)> = nbrs
                    .iter()
                    .map(|&(edge, v)| (ranks[v], bond_codes[edge]))
                    .collect();
                env.sort_unstable();
                (ranks[atom], env)
            })
            .collect();
        let (next, next_classes) = dense_ranks(&keys);
        if next_classes == classes {
            return (next, next_classes);
        }
        ranks = next;
        classes = next_classes;
    }
}

/// Canonical atom order: a permutation rank `0..n` per atom.
///
/// Starts from (element, aromatic, charge, degree, hydrogens, isotope), refines
/// by sorted neighbour ranks until the partition is stable, then repeatedly
/// splits the lowest tied class at its lowest-index member and refines again.
pub fn canonical_ranks(mol: &MoleculeGraph) -> Vec<usize> {
    let n = mol.atoms.len();
    let adj = mol.adjacency();
    let bond_codes: Vec<u8> = mol.bonds.iter().map(|b| b.order as u8).collect();
    let initial: Vec<_> = mol
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            (
                a.element.as_str(),
                a.aromatic,
                a.formal_charge,
                adj[i].len(),
                a.explicit_h,
                a.isotope,
            )
        })
        .collect();
    let (ranks, classes) = dense_ranks(&initial);
    let (mut ranks, mut classes) = refine(&adj, &bond_codes, ranks, classes);
    while classes < n {
        let mut counts = vec![0usize; classes];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = counts
            .iter()
            .position(|&c| c > 1)
            .expect("a tied class exists");
        let chosen = ranks.iter().position(|&r| r == tied).expect("class member");
        let keys: Vec<(usize, bool)> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, i != chosen))
            .collect();
        let (split, split_classes) = dense_ranks(&keys);
        (ranks, classes) = refine(&adj, &bond_codes, split, split_classes);
    }
    ranks
}

/// Canonical key: fragments written from their canonical roots, sorted, joined by `.`.
pub fn canonical_form(mol: &MoleculeGraph) -> ScaffoldKey {
    if mol.is_empty() {
        return ScaffoldKey::default();
    }
    let ranks = canonical_ranks(mol);
    let mut parts = write_fragments(mol, &ranks);
    parts.sort();
    ScaffoldKey(parts.join("."))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::smiles::{parse_smiles, Bond};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key(s: &str) -> ScaffoldKey {
        canonical_form(&parse_smiles(s).unwrap())
    }

    pub(crate) fn permute(mol: &MoleculeGraph, perm: &[usize]) -> MoleculeGraph {
        // perm[old] = new
        let mut atoms = vec![mol.atoms[0].clone(); mol.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = mol.atoms[old].clone();
        }
        let mut bonds: Vec<Bond> = mol
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.b],
                b: perm[b.a],
                order: b.order,
            })
            .collect();
        bonds.reverse();
        MoleculeGraph {
            atoms,
            bonds,
            source_text: String::new(),
        }
    }

    #[test]
    fn empty_graph_has_empty_key() {
        assert_eq!(canonical_form(&MoleculeGraph::default()).as_str(), "");
    }

    #[test]
    fn same_graph_different_text() {
        assert_eq!(key("C1CC1"), key("C1(CC1)"));
        assert_eq!(key("OCC"), key("CCO"));
        assert_eq!(key("c1ccccc1O"), key("Oc1ccccc1"));
        assert_ne!(key("CCO"), key("COC"));
        assert_ne!(key("C1CCC1"), key("C1CC1C"));
    }

    #[test]
    fn key_reparses_to_same_key() {
        for s in [
            "c1ccc2ccccc2c1",
            "O=C1CCC(=O)N1",
            "C1CC2CCC1CC2",
            "[nH]1cccc1",
        ] {
            let k = key(s);
            assert_eq!(key(k.as_str()), k, "{s}");
        }
    }

    #[test]
    fn permutation_harness_twelve_atoms() {
        let mol = parse_smiles("c1ccc2c(c1)CNC2C1CC1").unwrap();
        assert_eq!(mol.atoms.len(), 12);
        let expected = canonical_form(&mol);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut keys = std::collections::BTreeSet::new();
        for _ in 0..100 {
            let mut perm: Vec<usize> = (0..mol.atoms.len()).collect();
            perm.shuffle(&mut rng);
            keys.insert(canonical_form(&permute(&mol, &perm)));
        }
        assert_eq!(keys.len(), 1);
        assert!(keys.contains(&expected));
    }
}
