//! Bemis–Murcko frameworks.

use super::smiles::{BondOrder, MoleculeGraph};

/// Ring systems plus linkers of the largest fragment, keeping atoms attached to
/// the framework by double or triple bonds. Acyclic input gives the empty graph.
pub fn murcko_scaffold(mol: &MoleculeGraph) -> MoleculeGraph {
    let Some(fragment) = mol
        .fragments()
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then_with(|| b[0].cmp(&a[0])))
    else {
        return MoleculeGraph::default();
    };

    let adj = mol.adjacency();
    let mut alive = vec![false; mol.atoms.len()];
    for &i in &fragment {
        alive[i] = true;
    }
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    // strip terminal atoms until only rings and the paths joining them remain
    let mut queue: Vec<usize> = fragment
        .iter()
        .copied()
        .filter(|&i| degree[i] <= 1)
        .collect();
    while let Some(u) = queue.pop() {
        if !alive[u] {
            continue;
        }
        alive[u] = false;
        for &(_, v) in &adj[u] {
            if alive[v] {
                degree[v] -= 1;
                if degree[v] == 1 {
                    queue.push(v);
                }
            }
        }
    }

    let core: Vec<usize> = fragment.iter().copied().filter(|&i| alive[i]).collect();
    if core.is_empty() {
        return MoleculeGraph::default();
    }
    let mut keep = alive.clone();
    for &u in &core {
        for &(edge, v) in &adj[u] {
            if matches!(mol.bonds[edge].order, BondOrder::Double | BondOrder::Triple) {
                keep[v] = true;
            }
        }
    }
    let kept: Vec<usize> = (0..mol.atoms.len()).filter(|&i| keep[i]).collect();
    mol.induced_subgraph(&kept)
}
