//! SMILES reading and writing for the subset found in property-prediction
//! benchmark files.
//!
//! Supported: organic-subset atoms, bracket atoms (isotope, element, chirality,
//! hydrogen count, charge, atom class), the bond symbols `- = # :`, aromatic
//! lowercase atoms, branches, ring closures `0-9` and `%nn`, and `.` separated
//! fragments. Stereo markers (`/`, `\`, `@...`) are accepted and dropped.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

const ORGANIC_SUBSET: &[&str] = &["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];

const AROMATIC_BRACKET: &[&str] = &["se", "as", "te", "b", "c", "n", "o", "p", "s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    /// Capitalized element symbol, or `*` for a wildcard.
    pub element: String,
    pub aromatic: bool,
    pub formal_charge: i32,
    /// Hydrogen count given inside brackets. `None` for organic-subset atoms.
    pub explicit_h: Option<u32>,
    pub isotope: Option<u32>,
}

impl Atom {
    pub fn organic(element: &str, aromatic: bool) -> Self {
        Atom {
            element: element.to_string(),
            aromatic,
            formal_charge: 0,
            explicit_h: None,
            isotope: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Atom/bond graph of a parsed SMILES string.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MoleculeGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub source_text: String,
}

impl MoleculeGraph {
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Per-atom list of `(bond index, neighbour)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (k, bond) in self.bonds.iter().enumerate() {
            adj[bond.a].push((k, bond.b));
            adj[bond.b].push((k, bond.a));
        }
        adj
    }

    /// Connected components as sorted atom index lists, ordered by smallest member.
    pub fn fragments(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &(_, v) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Subgraph induced by `keep` (sorted, unique), with atoms renumbered in
    /// ascending original order.
    pub fn induced_subgraph(&self, keep: &[usize]) -> MoleculeGraph {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
            })
            .collect();
        let mut g = MoleculeGraph {
            atoms,
            bonds,
            source_text: String::new(),
        };
        g.source_text = write_smiles(&g, &identity_priority(g.atoms.len()));
        g
    }

    /// Check structural invariants: bond endpoints in range, no self loops,
    /// no duplicate bonds.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for (k, b) in self.bonds.iter().enumerate() {
            if b.a >= self.atoms.len() || b.b >= self.atoms.len() {
                return Err(format!("bond {k} references a missing atom"));
            }
            if b.a == b.b {
                return Err(format!("bond {k} is a self loop"));
            }
            if !seen.insert((b.a.min(b.b), b.a.max(b.b))) {
                return Err(format!("bond {k} duplicates an earlier bond"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES input")]
    EmptyInput { offset: usize },
    #[error("unknown element '{symbol}' at byte {offset}")]
    UnknownElement { offset: usize, symbol: String },
    #[error("unbalanced parenthesis at byte {offset}")]
    UnbalancedParenthesis { offset: usize },
    #[error("ring bond {ring} opened at byte {offset} is never closed")]
    UnclosedRingBond { offset: usize, ring: u32 },
    #[error("unexpected character '{ch}' at byte {offset}")]
    UnexpectedCharacter { offset: usize, ch: char },
    #[error("invalid bond at byte {offset}: {reason}")]
    InvalidBond { offset: usize, reason: &'static str },
    #[error("non-ASCII byte at {offset}")]
    NonAscii { offset: usize },
}

impl SmilesError {
    pub fn offset(&self) -> usize {
        match *self {
            SmilesError::EmptyInput { offset }
            | SmilesError::UnknownElement { offset, .. }
            | SmilesError::UnbalancedParenthesis { offset }
            | SmilesError::UnclosedRingBond { offset, .. }
            | SmilesError::UnexpectedCharacter { offset, .. }
            | SmilesError::InvalidBond { offset, .. }
            | SmilesError::NonAscii { offset } => offset,
        }
    }
}

struct RingOpen {
    atom: usize,
    order: Option<BondOrder>,
    offset: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bond_set: std::collections::HashSet<(usize, usize)>,
    prev: Option<usize>,
    branches: Vec<(Option<usize>, usize)>,
    pending: Option<(Option<BondOrder>, usize)>,
    rings: HashMap<u32, RingOpen>,
}

pub fn parse_smiles(text: &str) -> Result<MoleculeGraph, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::EmptyInput { offset: 0 });
    }
    if let Some(offset) = text.bytes().position(|b| !b.is_ascii()) {
        return Err(SmilesError::NonAscii { offset });
    }
    let mut p = Parser {
        text: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        bond_set: Default::default(),
        prev: None,
        branches: Vec::new(),
        pending: None,
        rings: HashMap::new(),
    };
    p.run()?;
    Ok(MoleculeGraph {
        atoms: p.atoms,
        bonds: p.bonds,
        source_text: text.to_string(),
    })
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn unexpected(&self, offset: usize) -> SmilesError {
        SmilesError::UnexpectedCharacter {
            offset,
            ch: self.text[offset] as char,
        }
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'(' => {
                    if self.prev.is_none() || self.pending.is_some() {
                        return Err(self.unexpected(start));
                    }
                    self.branches.push((self.prev, start));
                    self.pos += 1;
                }
                b')' => {
                    if self.pending.is_some() {
                        return Err(SmilesError::InvalidBond {
                            offset: start,
                            reason: "bond symbol without a following atom",
                        });
                    }
                    let (atom, _) = self
                        .branches
                        .pop()
                        .ok_or(SmilesError::UnbalancedParenthesis { offset: start })?;
                    self.prev = atom;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.unexpected(start));
                    }
                    let order = match c {
                        b'-' => Some(BondOrder::Single),
                        b'=' => Some(BondOrder::Double),
                        b'#' => Some(BondOrder::Triple),
                        b':' => Some(BondOrder::Aromatic),
                        // directional single bonds: stereo only
                        _ => None,
                    };
                    self.pending = Some((order, start));
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return Err(self.unexpected(start));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => self.ring_closure()?,
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom, start)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.push_atom(atom, start)?;
                }
            }
        }
        if let Some((_, offset)) = self.pending {
            return Err(SmilesError::InvalidBond {
                offset,
                reason: "bond symbol without a following atom",
            });
        }
        if let Some(&(_, offset)) = self.branches.last() {
            return Err(SmilesError::UnbalancedParenthesis { offset });
        }
        if let Some((&ring, open)) = self.rings.iter().min_by_key(|(_, o)| o.offset) {
            return Err(SmilesError::UnclosedRingBond {
                offset: open.offset,
                ring,
            });
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::EmptyInput { offset: 0 });
        }
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        offset: usize,
    ) -> Result<(), SmilesError> {
        if a == b {
            return Err(SmilesError::InvalidBond {
                offset,
                reason: "atom bonded to itself",
            });
        }
        if !self.bond_set.insert((a.min(b), a.max(b))) {
            return Err(SmilesError::InvalidBond {
                offset,
                reason: "duplicate bond between the same atoms",
            });
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn push_atom(&mut self, atom: Atom, offset: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((Some(order), _)) => order,
                _ => self.default_order(prev, idx),
            };
            self.add_bond(prev, idx, order, offset)?;
        } else if let Some((_, off)) = self.pending {
            return Err(self.unexpected(off));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let ring = if self.text[start] == b'%' {
            let digits = self.text.get(start + 1..start + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    ((d[0] - b'0') * 10 + (d[1] - b'0')) as u32
                }
                _ => return Err(self.unexpected(start)),
            }
        } else {
            self.pos += 1;
            (self.text[start] - b'0') as u32
        };
        let atom = self.prev.ok_or_else(|| self.unexpected(start))?;
        let here = self.pending.take().and_then(|(o, _)| o);
        match self.rings.remove(&ring) {
            Some(open) => {
                let order = match (open.order, here) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(SmilesError::InvalidBond {
                            offset: start,
                            reason: "ring closure bond symbols disagree",
                        })
                    }
                    (Some(x), _) | (None, Some(x)) => x,
                    (None, None) => self.default_order(open.atom, atom),
                };
                self.add_bond(open.atom, atom, order, start)
            }
            None => {
                self.rings.insert(
                    ring,
                    RingOpen {
                        atom,
                        order: here,
                        offset: start,
                    },
                );
                Ok(())
            }
        }
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let rest = &self.text[start..];
        if rest[0] == b'*' {
            self.pos += 1;
            return Ok(Atom::organic("*", false));
        }
        if rest.len() >= 2 {
            let two = std::str::from_utf8(&rest[..2]).unwrap_or("");
            if two == "Cl" || two == "Br" {
                self.pos += 2;
                return Ok(Atom::organic(two, false));
            }
        }
        let one = rest[0] as char;
        if !one.is_ascii_alphabetic() {
            return Err(self.unexpected(start));
        }
        let upper = one.to_ascii_uppercase().to_string();
        if one.is_ascii_uppercase() && ORGANIC_SUBSET.contains(&upper.as_str()) {
            self.pos += 1;
            return Ok(Atom::organic(&upper, false));
        }
        if one.is_ascii_lowercase() && matches!(one, 'b' | 'c' | 'n' | 'o' | 'p' | 's') {
            self.pos += 1;
            return Ok(Atom::organic(&upper, true));
        }
        Err(SmilesError::UnknownElement {
            offset: start,
            symbol: one.to_string(),
        })
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.text[start..self.pos])
                .ok()?
                .parse()
                .ok()
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = self.read_number();

        let sym_start = self.pos;
        let rest = &self.text[sym_start..];
        let (element, aromatic) = if rest.first() == Some(&b'*') {
            self.pos += 1;
            ("*".to_string(), false)
        } else if let Some(sym) = AROMATIC_BRACKET
            .iter()
            .find(|s| rest.starts_with(s.as_bytes()))
        {
            self.pos += sym.len();
            let mut cap = sym.to_string();
            cap[..1].make_ascii_uppercase();
            (cap, true)
        } else {
            let two = rest
                .get(..2)
                .and_then(|b| std::str::from_utf8(b).ok())
                .filter(|s| ELEMENTS.contains(s));
            let one = rest
                .get(..1)
                .and_then(|b| std::str::from_utf8(b).ok())
                .filter(|s| ELEMENTS.contains(s));
            match two.or(one) {
                Some(sym) => {
                    self.pos += sym.len();
                    (sym.to_string(), false)
                }
                None => {
                    let end = rest
                        .iter()
                        .position(|c| !c.is_ascii_alphabetic())
                        .unwrap_or(rest.len())
                        .clamp(1, 2);
                    return Err(SmilesError::UnknownElement {
                        offset: sym_start,
                        symbol: String::from_utf8_lossy(&rest[..end.min(rest.len())]).into_owned(),
                    });
                }
            }
        };

        // chirality: @, @@, @TH1, @SP2, @OH15 ...
        if self.peek() == Some(b'@') {
            while self.peek() == Some(b'@') {
                self.pos += 1;
            }
            let tail = &self.text[self.pos..];
            if ["TH", "AL", "SP", "TB", "OH"]
                .iter()
                .any(|t| tail.starts_with(t.as_bytes()))
            {
                self.pos += 2;
                self.read_number();
            }
        }

        let mut hydrogens = 0;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hydrogens = self.read_number().unwrap_or(1);
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return Err(self.unexpected(self.pos.min(self.text.len() - 1)));
            }
        }

        match self.peek() {
            Some(b']') => {
                self.pos += 1;
                Ok(Atom {
                    element,
                    aromatic,
                    formal_charge: charge,
                    explicit_h: Some(hydrogens),
                    isotope,
                })
            }
            Some(_) => Err(self.unexpected(self.pos)),
            None => Err(SmilesError::UnexpectedCharacter {
                offset: open,
                ch: '[',
            }),
        }
    }
}

/// Atom priorities `0..n` in index order.
pub fn identity_priority(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn atom_token(atom: &Atom) -> String {
    let symbol = if atom.aromatic {
        atom.element.to_ascii_lowercase()
    } else {
        atom.element.clone()
    };
    match atom.explicit_h {
        None if atom.formal_charge == 0 && atom.isotope.is_none() => symbol,
        h => {
            let mut s = String::from("[");
            if let Some(iso) = atom.isotope {
                s.push_str(&iso.to_string());
            }
            s.push_str(&symbol);
            match h.unwrap_or(0) {
                0 => {}
                1 => s.push('H'),
                n => s.push_str(&format!("H{n}")),
            }
            match atom.formal_charge {
                0 => {}
                1 => s.push('+'),
                -1 => s.push('-'),
                c if c > 0 => s.push_str(&format!("+{c}")),
                c => s.push_str(&format!("-{}", -c)),
            }
            s.push(']');
            s
        }
    }
}

fn bond_token(mol: &MoleculeGraph, bond: &Bond) -> &'static str {
    let both_aromatic = mol.atoms[bond.a].aromatic && mol.atoms[bond.b].aromatic;
    match (bond.order, both_aromatic) {
        (BondOrder::Single, false) | (BondOrder::Aromatic, true) => "",
        (BondOrder::Single, true) => "-",
        (BondOrder::Aromatic, false) => ":",
        (BondOrder::Double, _) => "=",
        (BondOrder::Triple, _) => "#",
    }
}

fn ring_label(n: u32) -> String {
    if n < 10 {
        n.to_string()
    } else {
        format!("%{n:02}")
    }
}

struct Writer<'a> {
    mol: &'a MoleculeGraph,
    adj: Vec<Vec<(usize, usize)>>,
    priority: &'a [usize],
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    ring_bonds: Vec<Vec<(usize, usize)>>,
    edge_used: Vec<bool>,
    emitted: Vec<bool>,
    open_rings: HashMap<usize, u32>,
    free: Vec<bool>,
}

impl Writer<'_> {
    fn plan(&mut self, u: usize) {
        self.visited[u] = true;
        let mut nbrs = self.adj[u].clone();
        nbrs.sort_by_key(|&(_, v)| self.priority[v]);
        for (edge, v) in nbrs {
            if self.edge_used[edge] {
                continue;
            }
            self.edge_used[edge] = true;
            if self.visited[v] {
                self.ring_bonds[u].push((edge, v));
                self.ring_bonds[v].push((edge, u));
            } else {
                self.children[u].push((edge, v));
                self.plan(v);
            }
        }
    }

    fn emit(&mut self, u: usize, out: &mut String) {
        self.emitted[u] = true;
        out.push_str(&atom_token(&self.mol.atoms[u]));
        let mut rings = self.ring_bonds[u].clone();
        rings.sort_by_key(|&(_, v)| self.priority[v]);
        for (edge, v) in rings {
            if self.emitted[v] && v != u {
                if let Some(label) = self.open_rings.remove(&edge) {
                    self.free[label as usize] = true;
                    out.push_str(&ring_label(label));
                    continue;
                }
            }
            let label = self
                .free
                .iter()
                .enumerate()
                .skip(1)
                .find(|(_, f)| **f)
                .map(|(i, _)| i as u32)
                .expect("fewer than 99 simultaneously open rings");
            self.free[label as usize] = false;
            self.open_rings.insert(edge, label);
            out.push_str(bond_token(self.mol, &self.mol.bonds[edge]));
            out.push_str(&ring_label(label));
        }
        let children = self.children[u].clone();
        let last = children.len().saturating_sub(1);
        for (k, (edge, v)) in children.into_iter().enumerate() {
            let branch = k != last;
            if branch {
                out.push('(');
            }
            out.push_str(bond_token(self.mol, &self.mol.bonds[edge]));
            self.emit(v, out);
            if branch {
                out.push(')');
            }
        }
    }
}

/// Write `mol` as SMILES. Traversal starts each fragment at its lowest-priority
/// atom and visits neighbours in ascending priority; fragments are emitted in
/// ascending order of their root's priority.
pub fn write_smiles(mol: &MoleculeGraph, priority: &[usize]) -> String {
    write_fragments(mol, priority).join(".")
}

pub(crate) fn write_fragments(mol: &MoleculeGraph, priority: &[usize]) -> Vec<String> {
    let n = mol.atoms.len();
    let mut w = Writer {
        mol,
        adj: mol.adjacency(),
        priority,
        visited: vec![false; n],
        children: vec![Vec::new(); n],
        ring_bonds: vec![Vec::new(); n],
        edge_used: vec![false; mol.bonds.len()],
        emitted: vec![false; n],
        open_rings: HashMap::new(),
        free: vec![true; 100],
    };
    let mut roots: Vec<usize> = mol
        .fragments()
        .into_iter()
        .map(|comp| {
            *comp
                .iter()
                .min_by_key(|&&a| priority[a])
                .expect("non-empty fragment")
        })
        .collect();
    roots.sort_by_key(|&r| priority[r]);
    roots
        .into_iter()
        .map(|root| {
            w.plan(root);
            let mut s = String::new();
            w.emit(root, &mut s);
            s
        })
        .collect()
}

impl fmt::Display for MoleculeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_smiles(self, &identity_priority(self.atoms.len())))
    }
}

impl fmt::Display for BondOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}
