use crate::chem::{BondOrder, MolecularGraph};

pub const ATOM_DIM: usize = 57;
pub const BOND_DIM: usize = 13;

/// Atom-symbol one-hot slots. Index 12 collects every other element;
/// slots 13-15 are reserved and stay zero.
pub const SYMBOL_SLOTS: [&str; 12] = ["C", "N", "O", "F", "Si", "Cl", "As", "Se", "Br", "Te", "I", "At"];
const OTHER_SYMBOL: usize = 12;

// Column offsets of each block in an atom row.
pub const SYMBOL: usize = 0;
pub const DEGREE: usize = 16;
pub const CHARGE: usize = 22;
pub const RADICAL: usize = 23;
pub const HYBRIDIZATION: usize = 24;
pub const AROMATIC: usize = 30;
pub const HYDROGENS: usize = 31;
pub const CHIRALITY: usize = 36;
pub const RING: usize = 40;
pub const RING_SIZE: usize = 41;
pub const MASS: usize = 45;
pub const IMPLICIT_VALENCE: usize = 46;
pub const ACCEPTOR: usize = 53;
pub const DONOR: usize = 54;
pub const ACIDIC: usize = 55;
pub const BASIC: usize = 56;

/// Atomic mass is divided by this before insertion.
pub const MASS_SCALE: f64 = 100.0;

pub fn featurize_atoms(g: &MolecularGraph) -> Vec<[f64; ATOM_DIM]> {
    (0..g.atom_count()).map(|i| atom_row(g, i)).collect()
}

fn atom_row(g: &MolecularGraph, i: usize) -> [f64; ATOM_DIM] {
    let atom = &g.atoms()[i];
    let info = g.info(i);
    let mut row = [0.0; ATOM_DIM];

    let symbol = SYMBOL_SLOTS.iter().position(|&s| s == atom.symbol()).unwrap_or(OTHER_SYMBOL);
    row[SYMBOL + symbol] = 1.0;

    if info.degree > 5 {
        log::warn!("atom {i} has degree {}; clipped to the last degree slot", info.degree);
    }
    row[DEGREE + info.degree.min(5)] = 1.0;
    row[CHARGE] = atom.formal_charge as f64;
    row[RADICAL] = info.radical_electrons as f64;
    row[HYBRIDIZATION + info.hybridization.slot()] = 1.0;
    row[AROMATIC] = atom.is_aromatic as u8 as f64;
    row[HYDROGENS + (g.total_hs(i) as usize).min(4)] = 1.0;
    row[CHIRALITY + atom.chirality.slot()] = 1.0;
    row[RING] = info.in_ring as u8 as f64;
    if let Some(size @ 3..=6) = info.smallest_ring {
        row[RING_SIZE + size - 3] = 1.0;
    }
    row[MASS] = atom.element_data().mass / MASS_SCALE;
    row[IMPLICIT_VALENCE + (info.implicit_valence() as usize).min(6)] = 1.0;
    row[ACCEPTOR] = info.h_acceptor as u8 as f64;
    row[DONOR] = info.h_donor as u8 as f64;
    row[ACIDIC] = info.acidic as u8 as f64;
    row[BASIC] = info.basic as u8 as f64;
    row
}

/// One vector per bond, in bond order: bond type (exists, single, double,
/// triple, aromatic) | conjugated | in ring | stereo code 0-5.
pub fn featurize_bonds(g: &MolecularGraph) -> Vec<[f64; BOND_DIM]> {
    g.bonds()
        .iter()
        .map(|b| {
            let mut v = [0.0; BOND_DIM];
            v[0] = 1.0;
            let slot = match b.order {
                BondOrder::Single => 1,
                BondOrder::Double => 2,
                BondOrder::Triple => 3,
                BondOrder::Aromatic => 4,
            };
            v[slot] = 1.0;
            v[5] = b.is_conjugated as u8 as f64;
            v[6] = b.is_in_ring as u8 as f64;
            v[7 + b.stereo.code()] = 1.0;
            v
        })
        .collect()
}

/// `D^-1 (Adj + I)`: self loops added, then each row divided by its sum.
pub fn normalized_adjacency(g: &MolecularGraph) -> Vec<Vec<f64>> {
    let n = g.atom_count();
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            for &(j, _) in g.neighbors(i) {
                row[j] = 1.0;
            }
            let deg = (g.degree(i) + 1) as f64;
            row.iter_mut().for_each(|x| *x /= deg);
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn block_widths_sum_to_atom_dim() {
        let widths = [16, 6, 1, 1, 6, 1, 5, 4, 1, 4, 1, 7, 1, 1, 1, 1];
        assert_eq!(widths.iter().sum::<usize>(), ATOM_DIM);
        let offsets = [
            SYMBOL,
            DEGREE,
            CHARGE,
            RADICAL,
            HYBRIDIZATION,
            AROMATIC,
            HYDROGENS,
            CHIRALITY,
            RING,
            RING_SIZE,
            MASS,
            IMPLICIT_VALENCE,
            ACCEPTOR,
            DONOR,
            ACIDIC,
            BASIC,
        ];
        let mut acc = 0;
        for (o, w) in offsets.iter().zip(widths) {
            assert_eq!(*o, acc);
            acc += w;
        }
    }

    #[test]
    fn ethanol_oxygen() {
        let g = parse_smiles("CCO").unwrap();
        let row = featurize_atoms(&g)[2];
        assert_eq!(row[SYMBOL + 2], 1.0);
        assert_eq!(row[SYMBOL..SYMBOL + 16].iter().sum::<f64>(), 1.0);
        assert_eq!(row[DEGREE + 1], 1.0);
        assert_eq!(row[HYDROGENS + 1], 1.0);
        assert_eq!(row[DONOR], 1.0);
        assert_eq!(row[ACCEPTOR], 1.0);
        assert_eq!(row[RING], 0.0);
        assert!(row[RING_SIZE..RING_SIZE + 4].iter().all(|&x| x == 0.0));
        assert!((row[MASS] - 0.15999).abs() < 1e-9);
    }

    #[test]
    fn benzene_carbon() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let row = featurize_atoms(&g)[0];
        assert_eq!(row[AROMATIC], 1.0);
        assert_eq!(row[HYBRIDIZATION + 1], 1.0);
        assert_eq!(row[RING], 1.0);
        assert_eq!(row[RING_SIZE + 3], 1.0);
    }

    #[test]
    fn large_rings_leave_size_slots_empty() {
        let g = parse_smiles("C1CCCCCC1").unwrap();
        let row = featurize_atoms(&g)[0];
        assert_eq!(row[RING], 1.0);
        assert!(row[RING_SIZE..RING_SIZE + 4].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reserved_symbol_slots_unused() {
        let g = parse_smiles("CSP(=O)(O)OB(O)O").unwrap();
        for row in featurize_atoms(&g) {
            assert!(row[13..16].iter().all(|&x| x == 0.0));
        }
        let row = featurize_atoms(&g)[1];
        assert_eq!(row[SYMBOL + OTHER_SYMBOL], 1.0);
    }

    #[test]
    fn bond_vectors() {
        let g = parse_smiles("c1ccccc1").unwrap();
        for v in featurize_bonds(&g) {
            assert_eq!(v[0], 1.0);
            assert_eq!(v[4], 1.0);
            assert_eq!(v[6], 1.0);
        }
        let g = parse_smiles("CCO").unwrap();
        let co = featurize_bonds(&g)[1];
        assert_eq!(co[1], 1.0);
        assert_eq!(co[5], 0.0);
        assert_eq!(co[7], 1.0);
        assert_eq!(co.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn adjacency_examples() {
        assert_eq!(normalized_adjacency(&parse_smiles("C").unwrap()), vec![vec![1.0]]);
        assert_eq!(normalized_adjacency(&parse_smiles("CC").unwrap()), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let a = normalized_adjacency(&parse_smiles("CCC").unwrap());
        assert_eq!(a[0], vec![0.5, 0.5, 0.0]);
        assert_eq!(a[1], vec![1.0 / 3.0; 3]);
        assert_eq!(a[2], vec![0.0, 0.5, 0.5]);
    }
}
