use std::collections::BTreeMap;
use std::fmt;

use super::elements::{self, Element};
use super::perception;
use super::rings;
use super::ChemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Chirality {
    #[default]
    None,
    TetrahedralCw,
    TetrahedralCcw,
    Other,
}

impl Chirality {
    /// Position in the chirality one-hot block.
    pub fn slot(self) -> usize {
        match self {
            Chirality::None => 0,
            Chirality::TetrahedralCw => 1,
            Chirality::TetrahedralCcw => 2,
            Chirality::Other => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count 1.5.
    pub fn valence(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Double-bond stereo codes 0-5, in the order none, any, Z, E, cis, trans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BondStereo {
    #[default]
    None = 0,
    Any = 1,
    Z = 2,
    E = 3,
    Cis = 4,
    Trans = 5,
}

impl BondStereo {
    pub fn code(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
    Sp3d,
    Sp3d2,
    Other,
}

impl Hybridization {
    pub fn slot(self) -> usize {
        match self {
            Hybridization::Sp => 0,
            Hybridization::Sp2 => 1,
            Hybridization::Sp3 => 2,
            Hybridization::Sp3d => 3,
            Hybridization::Sp3d2 => 4,
            Hybridization::Other => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Atomic number.
    pub element: u8,
    pub formal_charge: i8,
    /// Hydrogens written inside a bracket, plus folded `[H]` neighbours.
    pub explicit_hs: u8,
    pub is_aromatic: bool,
    pub chirality: Chirality,
    /// Bracket atoms never receive implicit hydrogens.
    pub bracket: bool,
    pub index: usize,
}

impl Atom {
    pub fn new(element: u8) -> Self {
        Atom {
            element,
            formal_charge: 0,
            explicit_hs: 0,
            is_aromatic: false,
            chirality: Chirality::None,
            bracket: false,
            index: 0,
        }
    }

    pub fn element_data(&self) -> &'static Element {
        elements::by_number(self.element).expect("atomic number validated on construction")
    }

    pub fn symbol(&self) -> &'static str {
        self.element_data().symbol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
    pub stereo: BondStereo,
    pub is_in_ring: bool,
    pub is_conjugated: bool,
}

impl Bond {
    pub fn new(begin: usize, end: usize, order: BondOrder) -> Self {
        Bond {
            begin,
            end,
            order,
            stereo: BondStereo::None,
            is_in_ring: false,
            is_conjugated: false,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// Per-atom chemistry derived from the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomInfo {
    pub degree: usize,
    pub implicit_hs: u8,
    pub radical_electrons: u8,
    pub hybridization: Hybridization,
    pub in_ring: bool,
    /// Size of the smallest ring containing the atom.
    pub smallest_ring: Option<usize>,
    pub h_donor: bool,
    pub h_acceptor: bool,
    pub acidic: bool,
    pub basic: bool,
}

impl AtomInfo {
    /// Implicit valence, i.e. the number of implicit hydrogens.
    pub fn implicit_valence(&self) -> u8 {
        self.implicit_hs
    }
}

/// Heavy-atom molecular graph with perceived rings and atom annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    rings: Vec<Vec<usize>>,
    info: Vec<AtomInfo>,
    /// `(neighbour, bond index)` per atom, in bond order.
    neighbors: Vec<Vec<(usize, usize)>>,
}

impl MolecularGraph {
    /// Builds a graph and runs ring perception and atom typing.
    ///
    /// Bond stereo is taken as given; ring and conjugation flags are
    /// recomputed. Aromatic bonds outside rings or between non-aromatic
    /// atoms are demoted to single bonds.
    pub fn new(mut atoms: Vec<Atom>, mut bonds: Vec<Bond>) -> Result<Self, ChemError> {
        let n = atoms.len();
        for (i, atom) in atoms.iter_mut().enumerate() {
            if elements::by_number(atom.element).is_none() {
                return Err(ChemError::UnknownElement(format!("Z={}", atom.element)));
            }
            atom.index = i;
        }
        let mut seen = std::collections::HashSet::new();
        for bond in &bonds {
            if bond.begin >= n || bond.end >= n || bond.begin == bond.end {
                return Err(ChemError::InvalidBond(bond.begin, bond.end));
            }
            let key = (bond.begin.min(bond.end), bond.begin.max(bond.end));
            if !seen.insert(key) {
                return Err(ChemError::DuplicateBond(key.0, key.1));
            }
        }

        let neighbors = build_neighbors(n, &bonds);
        let rings = rings::perceive_rings(n, &bonds);
        let ring_bond = rings::ring_bond_flags(&bonds, &rings);
        for (bond, in_ring) in bonds.iter_mut().zip(&ring_bond) {
            bond.is_in_ring = *in_ring;
            if bond.order == BondOrder::Aromatic
                && (!bond.is_in_ring || !atoms[bond.begin].is_aromatic || !atoms[bond.end].is_aromatic)
            {
                bond.order = BondOrder::Single;
            }
        }
        let conjugated = perception::conjugated_bonds(&atoms, &bonds, &neighbors);
        for (bond, c) in bonds.iter_mut().zip(conjugated) {
            bond.is_conjugated = c;
        }
        let info = perception::annotate(&atoms, &bonds, &neighbors, &rings)?;
        Ok(MolecularGraph {
            atoms,
            bonds,
            rings,
            info,
            neighbors,
        })
    }

    /// Graph with no atoms; the scaffold of every acyclic molecule.
    pub fn empty() -> Self {
        MolecularGraph {
            atoms: Vec::new(),
            bonds: Vec::new(),
            rings: Vec::new(),
            info: Vec::new(),
            neighbors: Vec::new(),
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    pub fn info(&self, atom: usize) -> &AtomInfo {
        &self.info[atom]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.neighbors[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.neighbors[atom].len()
    }

    pub fn total_hs(&self, atom: usize) -> u8 {
        self.atoms[atom].explicit_hs + self.info[atom].implicit_hs
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.neighbors[a]
            .iter()
            .find(|(nbr, _)| *nbr == b)
            .map(|&(_, bond)| &self.bonds[bond])
    }

    /// Connected components as sorted atom lists, ordered by smallest atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components(self.atoms.len(), &self.bonds)
    }

    /// All-pairs shortest path lengths in bonds; `None` when disconnected.
    pub fn distance_matrix(&self) -> Vec<Vec<Option<usize>>> {
        let n = self.atoms.len();
        let mut out = vec![vec![None; n]; n];
        for (start, row) in out.iter_mut().enumerate() {
            row[start] = Some(0);
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(a) = queue.pop_front() {
                let d = row[a].unwrap();
                for &(nbr, _) in &self.neighbors[a] {
                    if row[nbr].is_none() {
                        row[nbr] = Some(d + 1);
                        queue.push_back(nbr);
                    }
                }
            }
        }
        out
    }

    /// Relabels atoms so that old atom `i` becomes atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ChemError> {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = vec![Atom::new(6); self.atoms.len()];
        for (old, atom) in self.atoms.iter().enumerate() {
            atoms[perm[old]] = atom.clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                begin: perm[b.begin],
                end: perm[b.end],
                ..b.clone()
            })
            .collect();
        MolecularGraph::new(atoms, bonds)
    }

    /// Induced subgraph on the atoms flagged in `keep`, re-perceived.
    ///
    /// Atoms written outside brackets pick up implicit hydrogens for the
    /// bonds they lose.
    pub fn subgraph(&self, keep: &[bool]) -> Result<Self, ChemError> {
        let mut remap = vec![usize::MAX; self.atoms.len()];
        let mut atoms = Vec::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if keep[i] {
                remap[i] = atoms.len();
                atoms.push(atom.clone());
            }
        }
        if atoms.is_empty() {
            return Ok(MolecularGraph::empty());
        }
        let bonds = self
            .bonds
            .iter()
            .filter(|b| keep[b.begin] && keep[b.end])
            .map(|b| Bond {
                begin: remap[b.begin],
                end: remap[b.end],
                ..b.clone()
            })
            .collect();
        MolecularGraph::new(atoms, bonds)
    }

    /// Order-independent graph hash from iterated neighbourhood refinement.
    ///
    /// Isomorphic graphs always hash equal; the empty graph hashes to 0.
    pub fn graph_hash(&self) -> u64 {
        let n = self.atoms.len();
        if n == 0 {
            return 0;
        }
        let mut labels: Vec<u64> = (0..n)
            .map(|i| {
                let a = &self.atoms[i];
                let mut h = Fnv64::new();
                h.write_u64(a.element as u64);
                h.write_u64(a.formal_charge as i64 as u64);
                h.write_u64(a.is_aromatic as u64);
                h.write_u64(self.total_hs(i) as u64);
                h.write_u64(self.degree(i) as u64);
                h.finish()
            })
            .collect();
        for round in 0..n.min(32) {
            let next: Vec<u64> = (0..n)
                .map(|i| {
                    let mut env: Vec<(u8, u64)> = self.neighbors[i]
                        .iter()
                        .map(|&(nbr, b)| (self.bonds[b].order.code(), labels[nbr]))
                        .collect();
                    env.sort_unstable();
                    let mut h = Fnv64::new();
                    h.write_u64(round as u64);
                    h.write_u64(labels[i]);
                    for (o, l) in env {
                        h.write_u64(o as u64);
                        h.write_u64(l);
                    }
                    h.finish()
                })
                .collect();
            labels = next;
        }
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        let mut edges: Vec<(u64, u64, u8)> = self
            .bonds
            .iter()
            .map(|b| {
                let (x, y) = (labels[b.begin], labels[b.end]);
                (x.min(y), x.max(y), b.order.code())
            })
            .collect();
        edges.sort_unstable();
        let mut h = Fnv64::new();
        h.write_u64(n as u64);
        for l in sorted {
            h.write_u64(l);
        }
        for (x, y, o) in edges {
            h.write_u64(x);
            h.write_u64(y);
            h.write_u64(o as u64);
        }
        h.finish()
    }

    /// Element counts keyed by atomic number.
    pub fn element_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for a in &self.atoms {
            *counts.entry(a.element).or_insert(0) += 1;
        }
        counts
    }
}

impl fmt::Display for MolecularGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MolecularGraph({} atoms, {} bonds, {} rings)", self.atoms.len(), self.bonds.len(), self.rings.len())
    }
}

pub(crate) fn build_neighbors(n: usize, bonds: &[Bond]) -> Vec<Vec<(usize, usize)>> {
    let mut neighbors = vec![Vec::new(); n];
    for (i, b) in bonds.iter().enumerate() {
        neighbors[b.begin].push((b.end, i));
        neighbors[b.end].push((b.begin, i));
    }
    neighbors
}

pub(crate) fn components(n: usize, bonds: &[Bond]) -> Vec<Vec<usize>> {
    let neighbors = build_neighbors(n, bonds);
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            for &(nbr, _) in &neighbors[a] {
                if comp[nbr] == usize::MAX {
                    comp[nbr] = id;
                    members.push(nbr);
                    stack.push(nbr);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// 64-bit FNV-1a over little-endian words. Offset basis 0xcbf29ce484222325,
/// prime 0x100000001b3.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Fnv64 {
    pub const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    pub const PRIME: u64 = 0x0000_0100_0000_01b3;

    pub fn new() -> Self {
        Fnv64(Self::OFFSET)
    }

    pub fn write_u64(&mut self, value: u64) {
        for byte in value.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(Self::PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv64 {
    fn default() -> Self {
        Self::new()
    }
}
