//! SMILES reader for the organic subset plus bracket atoms.

use std::collections::BTreeMap;
use std::fmt;

use super::elements::{self, AROMATIC_SYMBOLS, ORGANIC_SUBSET};
use super::graph::{components, Atom, Bond, BondOrder, BondStereo, Chirality, MolecularGraph};
use super::ChemError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    EmptyInput,
    NonAscii,
    UnexpectedChar(char),
    UnclosedRing(u16),
    UnbalancedParen,
    UnknownElement(String),
    ValenceViolation { atom: usize, valence: u32 },
    RingBondConflict(u16),
    DuplicateBond,
    MultipleFragments(usize),
    Unsupported(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    /// Byte offset into the input.
    pub offset: usize,
    pub expected: Vec<&'static str>,
}

impl fmt::Display for SmilesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SmilesErrorKind::EmptyInput => write!(f, "empty SMILES")?,
            SmilesErrorKind::NonAscii => write!(f, "non-ASCII character")?,
            SmilesErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'")?,
            SmilesErrorKind::UnclosedRing(r) => write!(f, "ring closure {r} never closed")?,
            SmilesErrorKind::UnbalancedParen => write!(f, "unbalanced parenthesis")?,
            SmilesErrorKind::UnknownElement(s) => write!(f, "unknown element '{s}'")?,
            SmilesErrorKind::ValenceViolation { atom, valence } => {
                write!(f, "atom {atom} exceeds its maximum valence (uses {valence})")?
            }
            SmilesErrorKind::RingBondConflict(r) => write!(f, "conflicting bond symbols on ring closure {r}")?,
            SmilesErrorKind::DuplicateBond => write!(f, "atoms bonded twice")?,
            SmilesErrorKind::MultipleFragments(n) => write!(f, "{n} disconnected fragments")?,
            SmilesErrorKind::Unsupported(what) => write!(f, "unsupported: {what}")?,
        }
        write!(f, " at byte {}", self.offset)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for SmilesError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FragmentPolicy {
    /// Keep the fragment with the most heavy atoms (first on ties).
    #[default]
    KeepLargest,
    Reject,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub fragments: FragmentPolicy,
}

pub fn parse_smiles(s: &str) -> Result<MolecularGraph, SmilesError> {
    parse_smiles_with(s, ParseOptions::default())
}

pub fn parse_smiles_with(s: &str, options: ParseOptions) -> Result<MolecularGraph, SmilesError> {
    let raw = Parser::new(s)?.run()?;
    raw.build(options)
}

const ATOM_START: &[&str] = &["atom", "["];
const AFTER_ATOM: &[&str] = &["atom", "bond", "ring digit", "(", ")", "."];

#[derive(Debug, Clone, Copy, PartialEq)]
enum BondSymbol {
    Order(BondOrder),
    Up,
    Down,
}

struct RawBond {
    begin: usize,
    end: usize,
    symbol: Option<BondSymbol>,
}

struct RawMolecule {
    atoms: Vec<Atom>,
    offsets: Vec<usize>,
    bonds: Vec<RawBond>,
    hydrogen_atoms: Vec<bool>,
}

struct OpenRing {
    atom: usize,
    symbol: Option<BondSymbol>,
    offset: usize,
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    mol: RawMolecule,
}

fn err(kind: SmilesErrorKind, offset: usize, expected: &[&'static str]) -> SmilesError {
    SmilesError {
        kind,
        offset,
        expected: expected.to_vec(),
    }
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Result<Self, SmilesError> {
        if s.trim().is_empty() {
            return Err(err(SmilesErrorKind::EmptyInput, 0, ATOM_START));
        }
        if let Some(p) = s.bytes().position(|b| !b.is_ascii()) {
            return Err(err(SmilesErrorKind::NonAscii, p, &[]));
        }
        Ok(Parser {
            s: s.trim().as_bytes(),
            pos: 0,
            mol: RawMolecule {
                atoms: Vec::new(),
                offsets: Vec::new(),
                bonds: Vec::new(),
                hydrogen_atoms: Vec::new(),
            },
        })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn run(mut self) -> Result<RawMolecule, SmilesError> {
        let mut prev: Option<usize> = None;
        let mut branch_stack: Vec<(Option<usize>, usize)> = Vec::new();
        let mut pending: Option<(BondSymbol, usize)> = None;
        let mut open_rings: BTreeMap<u16, OpenRing> = BTreeMap::new();

        while let Some(c) = self.peek() {
            let here = self.pos;
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(err(SmilesErrorKind::UnexpectedChar('('), here, &["atom"]));
                    }
                    branch_stack.push((prev, here));
                    self.pos += 1;
                }
                b')' => {
                    let Some((top, _)) = branch_stack.pop() else {
                        return Err(err(SmilesErrorKind::UnbalancedParen, here, AFTER_ATOM));
                    };
                    if pending.is_some() {
                        return Err(err(SmilesErrorKind::UnexpectedChar(')'), here, &["atom"]));
                    }
                    prev = top;
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(err(SmilesErrorKind::UnexpectedChar(c as char), here, ATOM_START));
                    }
                    let symbol = match c {
                        b'-' => BondSymbol::Order(BondOrder::Single),
                        b'=' => BondSymbol::Order(BondOrder::Double),
                        b'#' => BondSymbol::Order(BondOrder::Triple),
                        b':' => BondSymbol::Order(BondOrder::Aromatic),
                        b'/' => BondSymbol::Up,
                        _ => BondSymbol::Down,
                    };
                    pending = Some((symbol, here));
                    self.pos += 1;
                }
                b'$' => return Err(err(SmilesErrorKind::Unsupported("quadruple bond"), here, &[])),
                b'.' => {
                    if prev.is_none() || pending.is_some() {
                        return Err(err(SmilesErrorKind::UnexpectedChar('.'), here, ATOM_START));
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return Err(err(SmilesErrorKind::UnexpectedChar(c as char), here, ATOM_START));
                    };
                    let label = self.ring_label()?;
                    let symbol = pending.take().map(|(s, _)| s);
                    match open_rings.remove(&label) {
                        Some(open) => {
                            let symbol = match (open.symbol, symbol) {
                                (Some(a), Some(b)) if a != b && !directional_pair(a, b) => {
                                    return Err(err(SmilesErrorKind::RingBondConflict(label), here, &[]))
                                }
                                (Some(a), _) => Some(a),
                                (None, b) => b,
                            };
                            if open.atom == atom {
                                return Err(err(SmilesErrorKind::DuplicateBond, here, &[]));
                            }
                            self.mol.bonds.push(RawBond {
                                begin: open.atom,
                                end: atom,
                                symbol,
                            });
                        }
                        None => {
                            open_rings.insert(
                                label,
                                OpenRing {
                                    atom,
                                    symbol,
                                    offset: here,
                                },
                            );
                        }
                    }
                }
                _ => {
                    let atom = self.atom()?;
                    if let Some(p) = prev {
                        let symbol = pending.take().map(|(s, _)| s);
                        self.mol.bonds.push(RawBond {
                            begin: p,
                            end: atom,
                            symbol,
                        });
                    } else if let Some((_, at)) = pending {
                        return Err(err(SmilesErrorKind::UnexpectedChar(self.s[at] as char), at, ATOM_START));
                    }
                    prev = Some(atom);
                }
            }
        }
        if let Some((_, at)) = pending {
            return Err(err(SmilesErrorKind::UnexpectedChar(self.s[at] as char), at, ATOM_START));
        }
        if let Some(&(_, at)) = branch_stack.last() {
            return Err(err(SmilesErrorKind::UnbalancedParen, at, &[")"]));
        }
        if let Some((&label, open)) = open_rings.iter().next() {
            return Err(err(SmilesErrorKind::UnclosedRing(label), open.offset, &["ring digit"]));
        }
        if self.mol.atoms.is_empty() {
            return Err(err(SmilesErrorKind::EmptyInput, 0, ATOM_START));
        }
        Ok(self.mol)
    }

    fn ring_label(&mut self) -> Result<u16, SmilesError> {
        let here = self.pos;
        if self.peek() == Some(b'%') {
            let digits = self.s.get(self.pos + 1..self.pos + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u16)
                }
                _ => Err(err(SmilesErrorKind::UnexpectedChar('%'), here, &["two-digit ring label"])),
            }
        } else {
            let d = self.s[self.pos] - b'0';
            self.pos += 1;
            Ok(d as u16)
        }
    }

    fn push_atom(&mut self, atom: Atom, offset: usize, is_hydrogen: bool) -> usize {
        self.mol.atoms.push(atom);
        self.mol.offsets.push(offset);
        self.mol.hydrogen_atoms.push(is_hydrogen);
        self.mol.atoms.len() - 1
    }

    fn atom(&mut self) -> Result<usize, SmilesError> {
        let here = self.pos;
        if self.peek() == Some(b'[') {
            return self.bracket_atom();
        }
        if self.peek() == Some(b'*') {
            return Err(err(SmilesErrorKind::Unsupported("wildcard atom"), here, &[]));
        }
        let rest = &self.s[self.pos..];
        for sym in ["Cl", "Br"] {
            if rest.starts_with(sym.as_bytes()) {
                self.pos += 2;
                let e = elements::by_symbol(sym).unwrap();
                return Ok(self.push_atom(Atom::new(e.number), here, false));
            }
        }
        let c = rest[0] as char;
        let one = c.to_string();
        if ORGANIC_SUBSET.contains(&one.as_str()) {
            self.pos += 1;
            let e = elements::by_symbol(&one).unwrap();
            return Ok(self.push_atom(Atom::new(e.number), here, false));
        }
        if AROMATIC_SYMBOLS[..6].contains(&one.as_str()) {
            self.pos += 1;
            let e = elements::by_symbol(&one.to_uppercase()).unwrap();
            let mut atom = Atom::new(e.number);
            atom.is_aromatic = true;
            return Ok(self.push_atom(atom, here, false));
        }
        if c.is_ascii_alphabetic() {
            let mut sym = one;
            if let Some(&n) = rest.get(1) {
                if n.is_ascii_lowercase() {
                    sym.push(n as char);
                }
            }
            return Err(err(SmilesErrorKind::UnknownElement(sym), here, &["organic-subset symbol", "["]));
        }
        Err(err(SmilesErrorKind::UnexpectedChar(c), here, AFTER_ATOM))
    }

    fn bracket_atom(&mut self) -> Result<usize, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        // isotope
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        let sym_at = self.pos;
        let rest = &self.s[self.pos..];
        let (element, aromatic, len) = bracket_symbol(rest)
            .ok_or_else(|| {
                let end = rest.iter().take_while(|b| b.is_ascii_alphabetic()).count().clamp(1, 2);
                let shown = String::from_utf8_lossy(&rest[..end.min(rest.len())]).into_owned();
                err(SmilesErrorKind::UnknownElement(shown), sym_at, &["element symbol"])
            })?;
        self.pos += len;
        let mut atom = Atom::new(element);
        atom.is_aromatic = aromatic;
        atom.bracket = true;

        if self.peek() == Some(b'@') {
            self.pos += 1;
            atom.chirality = Chirality::TetrahedralCcw;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                atom.chirality = Chirality::TetrahedralCw;
            } else if self.s[self.pos..].starts_with(b"TH") {
                self.pos += 2;
                atom.chirality = match self.peek() {
                    Some(b'1') => Chirality::TetrahedralCcw,
                    Some(b'2') => Chirality::TetrahedralCw,
                    _ => return Err(err(SmilesErrorKind::UnexpectedChar('T'), self.pos, &["1", "2"])),
                };
                self.pos += 1;
            } else if matches!(self.peek(), Some(b'A' | b'S' | b'T' | b'O')) {
                self.pos += 2;
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
                atom.chirality = Chirality::Other;
            }
        }
        if self.peek() == Some(b'H') {
            self.pos += 1;
            let mut count = 1u8;
            if let Some(d @ b'0'..=b'9') = self.peek() {
                count = d - b'0';
                self.pos += 1;
            }
            atom.explicit_hs = count;
        }
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let unit: i8 = if sign == b'+' { 1 } else { -1 };
            let mut magnitude = 1i8;
            if let Some(d @ b'0'..=b'9') = self.peek() {
                magnitude = (d - b'0') as i8;
                self.pos += 1;
            } else {
                while self.peek() == Some(sign) {
                    magnitude += 1;
                    self.pos += 1;
                }
            }
            if magnitude > 4 {
                return Err(err(SmilesErrorKind::Unsupported("formal charge beyond +-4"), self.pos - 1, &[]));
            }
            atom.formal_charge = unit * magnitude;
        }
        if self.peek() == Some(b':') {
            self.pos += 1;
            while matches!(self.peek(), Some(b'0'..=b'9')) {
                self.pos += 1;
            }
        }
        if self.peek() != Some(b']') {
            let found = self.peek().map(|b| b as char);
            let kind = match found {
                None => SmilesErrorKind::UnexpectedChar('['),
                Some(c) => SmilesErrorKind::UnexpectedChar(c),
            };
            return Err(err(kind, self.pos.min(self.s.len()), &["H count", "charge", "]"]));
        }
        self.pos += 1;
        let is_hydrogen = element == 1;
        Ok(self.push_atom(atom, open, is_hydrogen))
    }
}

fn directional_pair(a: BondSymbol, b: BondSymbol) -> bool {
    matches!((a, b), (BondSymbol::Up | BondSymbol::Down, BondSymbol::Up | BondSymbol::Down))
}

fn bracket_symbol(rest: &[u8]) -> Option<(u8, bool, usize)> {
    let text = |n: usize| std::str::from_utf8(rest.get(..n)?).ok();
    for sym in ["se", "as", "te"] {
        if text(2) == Some(sym) {
            let upper = format!("{}{}", sym[..1].to_uppercase(), &sym[1..]);
            return Some((elements::by_symbol(&upper)?.number, true, 2));
        }
    }
    if let Some(two) = text(2) {
        let b = two.as_bytes();
        if b[0].is_ascii_uppercase() && b[1].is_ascii_lowercase() {
            if let Some(e) = elements::by_symbol(two) {
                return Some((e.number, false, 2));
            }
        }
    }
    let one = text(1)?;
    let c = one.as_bytes()[0];
    if c.is_ascii_uppercase() {
        return elements::by_symbol(one).map(|e| (e.number, false, 1));
    }
    if AROMATIC_SYMBOLS.contains(&one) {
        return elements::by_symbol(&one.to_uppercase()).map(|e| (e.number, true, 1));
    }
    None
}

impl RawMolecule {
    fn build(mut self, options: ParseOptions) -> Result<MolecularGraph, SmilesError> {
        self.fold_hydrogens();
        let n = self.atoms.len();

        let mut bonds = Vec::with_capacity(self.bonds.len());
        let mut pairs = std::collections::HashSet::new();
        for rb in &self.bonds {
            if !pairs.insert((rb.begin.min(rb.end), rb.begin.max(rb.end))) {
                return Err(err(SmilesErrorKind::DuplicateBond, self.offsets[rb.end], &[]));
            }
            let both_aromatic = self.atoms[rb.begin].is_aromatic && self.atoms[rb.end].is_aromatic;
            let order = match rb.symbol {
                Some(BondSymbol::Order(o)) => o,
                _ if both_aromatic => BondOrder::Aromatic,
                _ => BondOrder::Single,
            };
            bonds.push(Bond::new(rb.begin, rb.end, order));
        }
        self.assign_double_bond_stereo(&mut bonds);

        let comps = components(n, &bonds);
        let (atoms, bonds, offsets) = if comps.len() > 1 {
            if options.fragments == FragmentPolicy::Reject {
                return Err(err(SmilesErrorKind::MultipleFragments(comps.len()), 0, &[]));
            }
            // first of the largest
            let best = comps
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
                .map(|(i, _)| i)
                .unwrap();
            log::warn!("kept largest of {} fragments ({} atoms)", comps.len(), comps[best].len());
            let keep = &comps[best];
            let mut remap = vec![usize::MAX; n];
            for (new, &old) in keep.iter().enumerate() {
                remap[old] = new;
            }
            let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
            let offsets: Vec<usize> = keep.iter().map(|&i| self.offsets[i]).collect();
            let bonds = bonds
                .into_iter()
                .filter(|b| remap[b.begin] != usize::MAX)
                .map(|b| Bond {
                    begin: remap[b.begin],
                    end: remap[b.end],
                    ..b
                })
                .collect();
            (atoms, bonds, offsets)
        } else {
            (self.atoms, bonds, self.offsets)
        };

        MolecularGraph::new(atoms, bonds).map_err(|e| match e {
            ChemError::ValenceViolation { atom, valence } => err(
                SmilesErrorKind::ValenceViolation { atom, valence },
                offsets.get(atom).copied().unwrap_or(0),
                &[],
            ),
            ChemError::UnknownElement(s) => err(SmilesErrorKind::UnknownElement(s), 0, &[]),
            _ => err(SmilesErrorKind::DuplicateBond, 0, &[]),
        })
    }

    /// Removes neutral `[H]` atoms bonded to exactly one heavy atom and
    /// counts them on that neighbour instead.
    fn fold_hydrogens(&mut self) {
        let n = self.atoms.len();
        let mut degree = vec![0usize; n];
        for b in &self.bonds {
            degree[b.begin] += 1;
            degree[b.end] += 1;
        }
        let mut fold = vec![false; n];
        for b in &self.bonds {
            for (h, heavy) in [(b.begin, b.end), (b.end, b.begin)] {
                let atom = &self.atoms[h];
                if self.hydrogen_atoms[h]
                    && !self.hydrogen_atoms[heavy]
                    && degree[h] == 1
                    && atom.formal_charge == 0
                    && atom.explicit_hs == 0
                {
                    fold[h] = true;
                }
            }
        }
        if !fold.iter().any(|&f| f) {
            return;
        }
        for b in &self.bonds {
            if fold[b.begin] {
                self.atoms[b.end].explicit_hs += 1;
            } else if fold[b.end] {
                self.atoms[b.begin].explicit_hs += 1;
            }
        }
        let mut remap = vec![usize::MAX; n];
        let mut next = 0;
        for i in 0..n {
            if !fold[i] {
                remap[i] = next;
                next += 1;
            }
        }
        let keep = |v: &[bool], i: usize| !v[i];
        self.atoms = (0..n).filter(|&i| keep(&fold, i)).map(|i| self.atoms[i].clone()).collect();
        self.offsets = (0..n).filter(|&i| keep(&fold, i)).map(|i| self.offsets[i]).collect();
        self.hydrogen_atoms = (0..n).filter(|&i| keep(&fold, i)).map(|i| self.hydrogen_atoms[i]).collect();
        self.bonds = std::mem::take(&mut self.bonds)
            .into_iter()
            .filter(|b| !fold[b.begin] && !fold[b.end])
            .map(|b| RawBond {
                begin: remap[b.begin],
                end: remap[b.end],
                symbol: b.symbol,
            })
            .collect();
    }

    /// E/Z from `/` and `\` marks on the single bonds flanking a non-ring
    /// double bond.
    fn assign_double_bond_stereo(&self, bonds: &mut [Bond]) {
        // For each directional bond: the side ("up" = true) of its far atom
        // relative to the near atom, as seen from a given near atom.
        let side = |rb: &RawBond, near: usize| -> Option<bool> {
            let up = match rb.symbol {
                Some(BondSymbol::Up) => true,
                Some(BondSymbol::Down) => false,
                _ => return None,
            };
            if rb.begin == near {
                Some(up)
            } else {
                Some(!up)
            }
        };
        for bi in 0..bonds.len() {
            if bonds[bi].order != BondOrder::Double {
                continue;
            }
            let (a, b) = (bonds[bi].begin, bonds[bi].end);
            let find = |near: usize| {
                self.bonds
                    .iter()
                    .enumerate()
                    .filter(|&(j, rb)| j != bi && (rb.begin == near || rb.end == near))
                    .find_map(|(_, rb)| side(rb, near))
            };
            if let (Some(sa), Some(sb)) = (find(a), find(b)) {
                bonds[bi].stereo = if sa != sb { BondStereo::E } else { BondStereo::Z };
            }
        }
    }
}
