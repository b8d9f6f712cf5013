//! Predefined structural keys, loaded from a versioned text table.
//!
//! Each non-comment line of the table is `bit<TAB>kind<TAB>args<TAB>description`.
//! Every key is a threshold predicate: bit `k` is set iff the counted
//! quantity reaches the key's threshold.

use std::sync::OnceLock;

use crate::chem::{BondOrder, Chirality, Hybridization, MolecularGraph};

pub const KEY_TABLE_V1: &str = include_str!("../../data/substructure_keys_v1.tsv");

#[derive(Debug, Clone, PartialEq)]
pub enum KeyPredicate {
    ElementCount { element: u8, min: usize },
    RingCount { min: usize },
    RingSize { size: usize, min: usize },
    AromaticRingCount { min: usize },
    HeteroRingCount { min: usize },
    FusedRingPairs { min: usize },
    BondPair { a: u8, order: BondOrder, b: u8, min: usize },
    AtomHydrogens { element: u8, hydrogens: u8, min: usize },
    Charge { positive: bool, min: usize },
    DegreeCount { degree: usize, min: usize },
    HeavyAtoms { min: usize },
    Flag { flag: AtomFlag, min: usize },
    Hybridization { kind: Hybridization, min: usize },
    ConjugatedBonds { min: usize },
    StereoBonds { min: usize },
    ChiralAtoms { min: usize },
    HalogenCount { min: usize },
    HeteroCount { min: usize },
    AromaticAtoms { min: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomFlag {
    Donor,
    Acceptor,
    Acidic,
    Basic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralKey {
    pub bit: usize,
    pub predicate: KeyPredicate,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("key table line {line}: {message}")]
pub struct KeyTableError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyTable {
    keys: Vec<StructuralKey>,
}

impl KeyTable {
    pub fn parse(text: &str) -> Result<Self, KeyTableError> {
        let mut keys = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line_no = ln + 1;
            let fail = |message: String| KeyTableError { line: line_no, message };
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(fail(format!("expected 4 tab-separated columns, found {}", cols.len())));
            }
            let bit: usize = cols[0].parse().map_err(|_| fail(format!("bad bit index '{}'", cols[0])))?;
            if bit != keys.len() {
                return Err(fail(format!("bit {bit} out of sequence")));
            }
            let args: Vec<&str> = cols[2].split_whitespace().collect();
            let predicate = parse_predicate(cols[1], &args).map_err(fail)?;
            keys.push(StructuralKey {
                bit,
                predicate,
                description: cols[3].to_string(),
            });
        }
        Ok(KeyTable { keys })
    }

    /// The shipped version-1 table.
    pub fn builtin() -> &'static KeyTable {
        static TABLE: OnceLock<KeyTable> = OnceLock::new();
        TABLE.get_or_init(|| KeyTable::parse(KEY_TABLE_V1).expect("shipped key table parses"))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[StructuralKey] {
        &self.keys
    }

    pub fn find(&self, description: &str) -> Option<usize> {
        self.keys.iter().position(|k| k.description == description)
    }

    pub fn fingerprint(&self, g: &MolecularGraph) -> Vec<f64> {
        let counts = Counts::new(g);
        self.keys
            .iter()
            .map(|k| if counts.holds(g, &k.predicate) { 1.0 } else { 0.0 })
            .collect()
    }
}

pub fn substructure_key_fingerprint(g: &MolecularGraph) -> Vec<f64> {
    KeyTable::builtin().fingerprint(g)
}

fn parse_predicate(kind: &str, args: &[&str]) -> Result<KeyPredicate, String> {
    let num = |i: usize| -> Result<usize, String> {
        args.get(i)
            .ok_or_else(|| format!("{kind}: missing argument {i}"))?
            .parse()
            .map_err(|_| format!("{kind}: argument {i} is not a count"))
    };
    let element = |i: usize| -> Result<u8, String> {
        let s = args.get(i).ok_or_else(|| format!("{kind}: missing element"))?;
        crate::chem::elements::by_symbol(s)
            .map(|e| e.number)
            .ok_or_else(|| format!("{kind}: unknown element '{s}'"))
    };
    Ok(match kind {
        "element_count" => KeyPredicate::ElementCount { element: element(0)?, min: num(1)? },
        "ring_count" => KeyPredicate::RingCount { min: num(0)? },
        "ring_size" => KeyPredicate::RingSize { size: num(0)?, min: num(1)? },
        "aromatic_ring_count" => KeyPredicate::AromaticRingCount { min: num(0)? },
        "hetero_ring_count" => KeyPredicate::HeteroRingCount { min: num(0)? },
        "fused_ring_pairs" => KeyPredicate::FusedRingPairs { min: num(0)? },
        "bond_pair" => {
            let order = match args.get(1).copied() {
                Some("-") => BondOrder::Single,
                Some("=") => BondOrder::Double,
                Some("#") => BondOrder::Triple,
                Some(":") => BondOrder::Aromatic,
                other => return Err(format!("bond_pair: bad bond symbol {other:?}")),
            };
            KeyPredicate::BondPair { a: element(0)?, order, b: element(2)?, min: num(3)? }
        }
        "atom_h" => KeyPredicate::AtomHydrogens { element: element(0)?, hydrogens: num(1)? as u8, min: num(2)? },
        "charge" => {
            let positive = match args.first().copied() {
                Some("+") => true,
                Some("-") => false,
                other => return Err(format!("charge: bad sign {other:?}")),
            };
            KeyPredicate::Charge { positive, min: num(1)? }
        }
        "degree_count" => KeyPredicate::DegreeCount { degree: num(0)?, min: num(1)? },
        "heavy_atoms" => KeyPredicate::HeavyAtoms { min: num(0)? },
        "flag" => {
            let flag = match args.first().copied() {
                Some("donor") => AtomFlag::Donor,
                Some("acceptor") => AtomFlag::Acceptor,
                Some("acidic") => AtomFlag::Acidic,
                Some("basic") => AtomFlag::Basic,
                other => return Err(format!("flag: unknown flag {other:?}")),
            };
            KeyPredicate::Flag { flag, min: num(1)? }
        }
        "hybridization" => {
            let kind = match args.first().copied() {
                Some("sp") => Hybridization::Sp,
                Some("sp2") => Hybridization::Sp2,
                Some("sp3") => Hybridization::Sp3,
                Some("sp3d") => Hybridization::Sp3d,
                Some("sp3d2") => Hybridization::Sp3d2,
                other => return Err(format!("hybridization: unknown kind {other:?}")),
            };
            KeyPredicate::Hybridization { kind, min: num(1)? }
        }
        "conjugated_bonds" => KeyPredicate::ConjugatedBonds { min: num(0)? },
        "stereo_bonds" => KeyPredicate::StereoBonds { min: num(0)? },
        "chiral_atoms" => KeyPredicate::ChiralAtoms { min: num(0)? },
        "halogen_count" => KeyPredicate::HalogenCount { min: num(0)? },
        "hetero_count" => KeyPredicate::HeteroCount { min: num(0)? },
        "aromatic_atoms" => KeyPredicate::AromaticAtoms { min: num(0)? },
        other => return Err(format!("unknown key kind '{other}'")),
    })
}

/// Per-molecule counts shared by all predicates.
struct Counts {
    ring_sizes: Vec<usize>,
    aromatic_rings: usize,
    hetero_rings: usize,
    fused_pairs: usize,
}

impl Counts {
    fn new(g: &MolecularGraph) -> Self {
        let rings = g.rings();
        let ring_bonds: Vec<Vec<(usize, usize)>> = rings
            .iter()
            .map(|r| {
                (0..r.len())
                    .map(|i| {
                        let (a, b) = (r[i], r[(i + 1) % r.len()]);
                        (a.min(b), a.max(b))
                    })
                    .collect()
            })
            .collect();
        let mut fused_pairs = 0;
        for i in 0..rings.len() {
            for j in i + 1..rings.len() {
                if ring_bonds[i].iter().any(|e| ring_bonds[j].contains(e)) {
                    fused_pairs += 1;
                }
            }
        }
        Counts {
            ring_sizes: rings.iter().map(Vec::len).collect(),
            aromatic_rings: rings.iter().filter(|r| r.iter().all(|&a| g.atoms()[a].is_aromatic)).count(),
            hetero_rings: rings.iter().filter(|r| r.iter().any(|&a| g.atoms()[a].element != 6)).count(),
            fused_pairs,
        }
    }

    fn holds(&self, g: &MolecularGraph, p: &KeyPredicate) -> bool {
        let atoms = g.atoms();
        let count_atoms = |f: &dyn Fn(usize) -> bool| (0..g.atom_count()).filter(|&i| f(i)).count();
        match *p {
            KeyPredicate::ElementCount { element, min } => count_atoms(&|i| atoms[i].element == element) >= min,
            KeyPredicate::RingCount { min } => self.ring_sizes.len() >= min,
            KeyPredicate::RingSize { size, min } => self.ring_sizes.iter().filter(|&&s| s == size).count() >= min,
            KeyPredicate::AromaticRingCount { min } => self.aromatic_rings >= min,
            KeyPredicate::HeteroRingCount { min } => self.hetero_rings >= min,
            KeyPredicate::FusedRingPairs { min } => self.fused_pairs >= min,
            KeyPredicate::BondPair { a, order, b, min } => {
                g.bonds()
                    .iter()
                    .filter(|bd| {
                        let (x, y) = (atoms[bd.begin].element, atoms[bd.end].element);
                        bd.order == order && ((x, y) == (a, b) || (x, y) == (b, a))
                    })
                    .count()
                    >= min
            }
            KeyPredicate::AtomHydrogens { element, hydrogens, min } => {
                count_atoms(&|i| atoms[i].element == element && g.total_hs(i) == hydrogens) >= min
            }
            KeyPredicate::Charge { positive, min } => {
                count_atoms(&|i| {
                    let q = atoms[i].formal_charge;
                    if positive {
                        q > 0
                    } else {
                        q < 0
                    }
                }) >= min
            }
            KeyPredicate::DegreeCount { degree, min } => count_atoms(&|i| g.degree(i) >= degree) >= min,
            KeyPredicate::HeavyAtoms { min } => g.atom_count() >= min,
            KeyPredicate::Flag { flag, min } => {
                count_atoms(&|i| {
                    let info = g.info(i);
                    match flag {
                        AtomFlag::Donor => info.h_donor,
                        AtomFlag::Acceptor => info.h_acceptor,
                        AtomFlag::Acidic => info.acidic,
                        AtomFlag::Basic => info.basic,
                    }
                }) >= min
            }
            KeyPredicate::Hybridization { kind, min } => {
                count_atoms(&|i| g.info(i).hybridization == kind && !(kind == Hybridization::Sp2 && atoms[i].is_aromatic))
                    >= min
            }
            KeyPredicate::ConjugatedBonds { min } => g.bonds().iter().filter(|b| b.is_conjugated).count() >= min,
            KeyPredicate::StereoBonds { min } => {
                g.bonds().iter().filter(|b| b.stereo != crate::chem::BondStereo::None).count() >= min
            }
            KeyPredicate::ChiralAtoms { min } => count_atoms(&|i| atoms[i].chirality != Chirality::None) >= min,
            KeyPredicate::HalogenCount { min } => count_atoms(&|i| matches!(atoms[i].element, 9 | 17 | 35 | 53 | 85)) >= min,
            KeyPredicate::HeteroCount { min } => count_atoms(&|i| !matches!(atoms[i].element, 1 | 6)) >= min,
            KeyPredicate::AromaticAtoms { min } => count_atoms(&|i| atoms[i].is_aromatic) >= min,
        }
    }
}
