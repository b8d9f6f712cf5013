//! Atom/bond feature tensors and the concatenated molecular fingerprint.

mod atoms;
pub mod erg;
pub mod keys;
pub mod morgan;

pub use atoms::{featurize_atoms, featurize_bonds, normalized_adjacency, ATOM_DIM, BOND_DIM};
pub use erg::erg_fingerprint;
pub use keys::{substructure_key_fingerprint, KeyTable};
pub use morgan::morgan_fingerprint;

/// Column offsets of the atom feature blocks.
pub mod atom_columns {
    pub use super::atoms::{
        ACCEPTOR, ACIDIC, AROMATIC, BASIC, CHARGE, CHIRALITY, DEGREE, DONOR, HYBRIDIZATION, HYDROGENS,
        IMPLICIT_VALENCE, MASS, MASS_SCALE, RADICAL, RING, RING_SIZE, SYMBOL, SYMBOL_SLOTS,
    };
}

use crate::chem::MolecularGraph;

/// Which fingerprint components enter the concatenated vector, and their
/// parameters. Components always appear in the order Morgan, keys, ErG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerprintConfig {
    pub morgan: bool,
    pub keys: bool,
    pub erg: bool,
    pub morgan_radius: usize,
    pub morgan_bits: usize,
    pub erg_max_path: usize,
}

impl Default for FingerprintConfig {
    fn default() -> Self {
        FingerprintConfig {
            morgan: true,
            keys: true,
            erg: true,
            morgan_radius: morgan::DEFAULT_RADIUS,
            morgan_bits: morgan::DEFAULT_BITS,
            erg_max_path: erg::DEFAULT_MAX_PATH,
        }
    }
}

impl FingerprintConfig {
    pub fn len(&self) -> usize {
        let mut n = 0;
        if self.morgan {
            n += self.morgan_bits;
        }
        if self.keys {
            n += KeyTable::builtin().len();
        }
        if self.erg {
            n += erg::erg_len(self.erg_max_path);
        }
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses a comma-separated component list such as `morgan,keys,erg`.
    pub fn with_components(mut self, list: &str) -> Result<Self, String> {
        self.morgan = false;
        self.keys = false;
        self.erg = false;
        for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "morgan" => self.morgan = true,
                "keys" => self.keys = true,
                "erg" => self.erg = true,
                other => return Err(format!("unknown fingerprint component '{other}'")),
            }
        }
        Ok(self)
    }

    pub fn components(&self) -> String {
        let mut parts = Vec::new();
        if self.morgan {
            parts.push("morgan");
        }
        if self.keys {
            parts.push("keys");
        }
        if self.erg {
            parts.push("erg");
        }
        parts.join(",")
    }

    pub fn fingerprint(&self, g: &MolecularGraph) -> Vec<f64> {
        let m = if self.morgan { morgan_fingerprint(g, self.morgan_radius, self.morgan_bits) } else { Vec::new() };
        let p = if self.keys { substructure_key_fingerprint(g) } else { Vec::new() };
        let e = if self.erg { erg_fingerprint(g, self.erg_max_path) } else { Vec::new() };
        concat_fingerprints(&m, &p, &e)
    }
}

pub fn concat_fingerprints(morgan: &[f64], keys: &[f64], erg: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(morgan.len() + keys.len() + erg.len());
    out.extend_from_slice(morgan);
    out.extend_from_slice(keys);
    out.extend_from_slice(erg);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondFeatures {
    pub begin: usize,
    pub end: usize,
    pub features: [f64; BOND_DIM],
}

/// Model-ready view of one molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizedMolecule {
    pub n_atoms: usize,
    pub atom_features: Vec<[f64; ATOM_DIM]>,
    /// One entry per bond; features are the same in both directions.
    pub bonds: Vec<BondFeatures>,
    pub adjacency_normalized: Vec<Vec<f64>>,
    pub fingerprint: Vec<f64>,
}

impl FeaturizedMolecule {
    pub fn new(g: &MolecularGraph, fingerprints: &FingerprintConfig) -> Self {
        let bond_vectors = featurize_bonds(g);
        FeaturizedMolecule {
            n_atoms: g.atom_count(),
            atom_features: featurize_atoms(g),
            bonds: g
                .bonds()
                .iter()
                .zip(bond_vectors)
                .map(|(b, features)| BondFeatures {
                    begin: b.begin,
                    end: b.end,
                    features,
                })
                .collect(),
            adjacency_normalized: normalized_adjacency(g),
            fingerprint: fingerprints.fingerprint(g),
        }
    }

    pub fn bond_features(&self, u: usize, v: usize) -> Option<&[f64; BOND_DIM]> {
        self.bonds
            .iter()
            .find(|b| (b.begin, b.end) == (u, v) || (b.begin, b.end) == (v, u))
            .map(|b| &b.features)
    }

    /// Directed edges `(source, target, bond index)`, both directions of
    /// every bond, ordered by bond then direction.
    pub fn directed_edges(&self) -> Vec<(usize, usize, usize)> {
        self.bonds
            .iter()
            .enumerate()
            .flat_map(|(i, b)| [(b.begin, b.end, i), (b.end, b.begin, i)])
            .collect()
    }
}
