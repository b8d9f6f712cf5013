//! Atom typing: hydrogens, radicals, hybridization, conjugation and the
//! donor/acceptor/acidic/basic rule tables.
//!
//! | flag     | rule |
//! |----------|------|
//! | acceptor | element in [`ACCEPTOR_ELEMENTS`], formal charge <= 0 |
//! | donor    | element in [`DONOR_ELEMENTS`] with at least one hydrogen |
//! | acidic   | every O bonded to a center in [`ACID_CENTERS`] that carries a `=O` and an `-OH` or `-O(-)` |
//! | basic    | N passing every exclusion in [`BASIC_EXCLUSIONS`] |

use super::elements;
use super::graph::{Atom, AtomInfo, Bond, BondOrder, Hybridization};
use super::ChemError;

pub const ACCEPTOR_ELEMENTS: &[u8] = &[7, 8];
pub const DONOR_ELEMENTS: &[u8] = &[7, 8];
/// Carboxylic (C), phosphonic (P) and sulfonic (S) acid centers.
pub const ACID_CENTERS: &[u8] = &[6, 15, 16];

/// Reasons a nitrogen is not considered basic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasicExclusion {
    NegativeCharge,
    /// Quaternary or nitro-type N+ without hydrogens.
    ChargedWithoutHydrogen,
    /// Bonded to C, S or P that carries a double bond to O or S (amide, sulfonamide).
    AcylAdjacent,
    /// Bonded to oxygen (N-oxide, nitro, hydroxylamine).
    OxygenBound,
    /// Nitrile or other triple-bonded N.
    TripleBond,
    /// Aromatic N that carries hydrogen or three ring bonds (pyrrole type).
    PyrroleType,
}

pub const BASIC_EXCLUSIONS: &[BasicExclusion] = &[
    BasicExclusion::NegativeCharge,
    BasicExclusion::ChargedWithoutHydrogen,
    BasicExclusion::AcylAdjacent,
    BasicExclusion::OxygenBound,
    BasicExclusion::TripleBond,
    BasicExclusion::PyrroleType,
];

pub(crate) fn annotate(
    atoms: &[Atom],
    bonds: &[Bond],
    neighbors: &[Vec<(usize, usize)>],
    rings: &[Vec<usize>],
) -> Result<Vec<AtomInfo>, ChemError> {
    let n = atoms.len();
    let mut smallest_ring: Vec<Option<usize>> = vec![None; n];
    for ring in rings {
        for &a in ring {
            smallest_ring[a] = Some(smallest_ring[a].map_or(ring.len(), |s: usize| s.min(ring.len())));
        }
    }

    let mut hydrogens = Vec::with_capacity(n);
    let mut radicals = Vec::with_capacity(n);
    for (i, atom) in atoms.iter().enumerate() {
        let bond_sum: f64 = neighbors[i].iter().map(|&(_, b)| bonds[b].order.valence()).sum();
        let (implicit, radical) = hydrogen_count(i, atom, bond_sum)?;
        hydrogens.push(implicit);
        radicals.push(radical);
    }

    let mut info: Vec<AtomInfo> = (0..n)
        .map(|i| {
            let total_h = atoms[i].explicit_hs + hydrogens[i];
            AtomInfo {
                degree: neighbors[i].len(),
                implicit_hs: hydrogens[i],
                radical_electrons: radicals[i],
                hybridization: hybridization(&atoms[i], bonds, &neighbors[i], total_h),
                in_ring: smallest_ring[i].is_some(),
                smallest_ring: smallest_ring[i],
                h_donor: DONOR_ELEMENTS.contains(&atoms[i].element) && total_h > 0,
                h_acceptor: ACCEPTOR_ELEMENTS.contains(&atoms[i].element) && atoms[i].formal_charge <= 0,
                acidic: false,
                basic: false,
            }
        })
        .collect();

    let total_h = |i: usize| atoms[i].explicit_hs + hydrogens[i];
    for center in 0..n {
        if !ACID_CENTERS.contains(&atoms[center].element) {
            continue;
        }
        let oxygens: Vec<(usize, BondOrder)> = neighbors[center]
            .iter()
            .filter(|&&(o, _)| atoms[o].element == 8)
            .map(|&(o, b)| (o, bonds[b].order))
            .collect();
        let has_oxo = oxygens.iter().any(|&(_, order)| order == BondOrder::Double);
        let has_hydroxy = oxygens.iter().any(|&(o, order)| {
            order == BondOrder::Single
                && neighbors[o].len() == 1
                && (total_h(o) > 0 || atoms[o].formal_charge < 0)
        });
        if has_oxo && has_hydroxy {
            for (o, _) in oxygens {
                if neighbors[o].len() == 1 {
                    info[o].acidic = true;
                }
            }
        }
    }

    for i in 0..n {
        if atoms[i].element == 7 {
            info[i].basic = basic_exclusion(i, atoms, bonds, neighbors, total_h(i)).is_none();
        }
    }
    Ok(info)
}

fn hydrogen_count(index: usize, atom: &Atom, bond_sum: f64) -> Result<(u8, u8), ChemError> {
    let valences = elements::default_valences(atom.element);
    if valences.is_empty() {
        return Ok((0, 0));
    }
    let charge = atom.formal_charge as i32;
    let allowed: Vec<i32> = valences
        .iter()
        .map(|&v| elements::charge_adjusted(v as i32, atom.element, charge))
        .filter(|&v| v >= 0)
        .collect();
    let bonded = bond_sum.round_ties_even() as i32;
    let used = bonded + atom.explicit_hs as i32;

    if atom.is_aromatic {
        // Aromatic atoms only ever use their lowest valence.
        let base = allowed.first().copied().unwrap_or(0);
        let implicit = if atom.bracket { 0 } else { (base - used).max(0) };
        return Ok((implicit as u8, 0));
    }

    let max = allowed.iter().copied().max().unwrap_or(0);
    if used > max && !(atom.bracket && allowed.is_empty()) {
        return Err(ChemError::ValenceViolation {
            atom: index,
            valence: used as u32,
        });
    }
    let target = allowed.iter().copied().find(|&v| v >= used).unwrap_or(used);
    if atom.bracket {
        let radical = if matches!(atom.element, 5..=8) { (target - used).max(0) } else { 0 };
        Ok((0, radical as u8))
    } else {
        Ok(((target - used) as u8, 0))
    }
}

fn hybridization(atom: &Atom, bonds: &[Bond], neighbors: &[(usize, usize)], total_h: u8) -> Hybridization {
    if atom.is_aromatic {
        return Hybridization::Sp2;
    }
    let sigma = neighbors.len() as i32 + total_h as i32;
    if sigma == 0 {
        return Hybridization::Other;
    }
    let bond_valence: f64 = neighbors.iter().map(|&(_, b)| bonds[b].order.valence()).sum();
    let outer = atom.element_data().outer_electrons as i32;
    let free = outer - atom.formal_charge as i32 - bond_valence.round_ties_even() as i32 - total_h as i32;
    let lone_pairs = (free / 2).max(0);
    // a lone pair delocalized into a conjugated bond leaves the atom planar
    let conjugated = neighbors.iter().any(|&(_, b)| bonds[b].is_conjugated);
    if conjugated && lone_pairs > 0 && sigma + lone_pairs == 4 && sigma < 4 {
        return Hybridization::Sp2;
    }
    match sigma + lone_pairs {
        2 => Hybridization::Sp,
        3 => Hybridization::Sp2,
        4 => Hybridization::Sp3,
        5 => Hybridization::Sp3d,
        6 => Hybridization::Sp3d2,
        _ => Hybridization::Other,
    }
}

fn basic_exclusion(
    i: usize,
    atoms: &[Atom],
    bonds: &[Bond],
    neighbors: &[Vec<(usize, usize)>],
    total_h: u8,
) -> Option<BasicExclusion> {
    let atom = &atoms[i];
    BASIC_EXCLUSIONS.iter().copied().find(|rule| match rule {
        BasicExclusion::NegativeCharge => atom.formal_charge < 0,
        BasicExclusion::ChargedWithoutHydrogen => atom.formal_charge > 0 && total_h == 0,
        BasicExclusion::AcylAdjacent => neighbors[i].iter().any(|&(nbr, _)| {
            matches!(atoms[nbr].element, 6 | 15 | 16)
                && neighbors[nbr].iter().any(|&(x, b)| {
                    x != i && matches!(atoms[x].element, 8 | 16) && bonds[b].order == BondOrder::Double
                })
        }),
        BasicExclusion::OxygenBound => neighbors[i].iter().any(|&(nbr, _)| atoms[nbr].element == 8),
        BasicExclusion::TripleBond => neighbors[i].iter().any(|&(_, b)| bonds[b].order == BondOrder::Triple),
        BasicExclusion::PyrroleType => atom.is_aromatic && (total_h > 0 || neighbors[i].len() > 2),
    })
}

/// A bond is conjugated when it is aromatic, when it is a single bond
/// between two unsaturated atoms or between an unsaturated atom and an
/// N/O/S lone-pair donor, or when it is a multiple bond touching such a
/// conjugated single bond.
pub(crate) fn conjugated_bonds(atoms: &[Atom], bonds: &[Bond], neighbors: &[Vec<(usize, usize)>]) -> Vec<bool> {
    // Hypervalent S and P double bonds (sulfonyl, phosphoryl) do not conjugate.
    let unsaturated: Vec<bool> = (0..atoms.len())
        .map(|a| {
            neighbors[a].iter().any(|&(_, b)| match bonds[b].order {
                BondOrder::Single => false,
                BondOrder::Aromatic => true,
                _ => !matches!(atoms[a].element, 15 | 16),
            })
        })
        .collect();
    let has_multiple: Vec<bool> = (0..atoms.len())
        .map(|a| neighbors[a].iter().any(|&(_, b)| bonds[b].order != BondOrder::Single))
        .collect();
    let lone_pair_donor = |a: usize| matches!(atoms[a].element, 7 | 8 | 16) && !has_multiple[a];

    let mut conj: Vec<bool> = bonds
        .iter()
        .map(|b| match b.order {
            BondOrder::Aromatic => true,
            BondOrder::Single => {
                let (u, v) = (b.begin, b.end);
                (unsaturated[u] && unsaturated[v])
                    || (unsaturated[u] && lone_pair_donor(v))
                    || (unsaturated[v] && lone_pair_donor(u))
            }
            _ => false,
        })
        .collect();
    let single_conj: Vec<bool> = conj.clone();
    for (bi, b) in bonds.iter().enumerate() {
        if matches!(b.order, BondOrder::Double | BondOrder::Triple) && unsaturated[b.begin] && unsaturated[b.end] {
            conj[bi] = [b.begin, b.end].iter().any(|&a| {
                neighbors[a]
                    .iter()
                    .any(|&(_, other)| other != bi && (single_conj[other] || bonds[other].order == BondOrder::Aromatic))
            });
        }
    }
    conj
}
