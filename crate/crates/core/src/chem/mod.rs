//! Molecular graphs, Murcko scaffolds and scaffold splits.

pub mod canon;
pub mod scaffold;
pub mod smiles;
pub mod split;

pub use canon::{canonical_form, canonical_ranks, ScaffoldKey};
pub use scaffold::murcko_scaffold;
pub use smiles::{parse_smiles, write_smiles, Atom, Bond, BondOrder, MoleculeGraph, SmilesError};
pub use split::{scaffold_split, SplitAssignment, SplitError, SplitKind};

/// Canonical SMILES of a whole molecule.
pub fn canonical_smiles(mol: &MoleculeGraph) -> String {
    canonical_form(mol).0
}
