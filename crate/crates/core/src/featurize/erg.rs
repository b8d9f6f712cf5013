//! Pharmacophore-pair distance histogram.
//!
//! Atoms receive a subset of six pharmacophore labels. For every pair of
//! distinct atoms at topological distance `d <= max_path` and every label
//! pair they carry, slot `(label pair, d)` gains 1.0 and the neighbouring
//! distances `d - 1` and `d + 1` gain [`SMEAR`].

use crate::chem::MolecularGraph;

pub const DEFAULT_MAX_PATH: usize = 15;
pub const SMEAR: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pharmacophore {
    Donor = 0,
    Acceptor = 1,
    Positive = 2,
    Negative = 3,
    Hydrophobic = 4,
    Aromatic = 5,
}

pub const LABELS: [Pharmacophore; 6] = [
    Pharmacophore::Donor,
    Pharmacophore::Acceptor,
    Pharmacophore::Positive,
    Pharmacophore::Negative,
    Pharmacophore::Hydrophobic,
    Pharmacophore::Aromatic,
];

pub const LABEL_PAIRS: usize = LABELS.len() * (LABELS.len() + 1) / 2;

pub fn erg_len(max_path: usize) -> usize {
    LABEL_PAIRS * max_path
}

/// Index of the unordered label pair `(a, b)`.
pub fn pair_index(a: Pharmacophore, b: Pharmacophore) -> usize {
    let (lo, hi) = if a <= b { (a as usize, b as usize) } else { (b as usize, a as usize) };
    // rows of the upper triangle before `lo`, then the offset within the row
    lo * LABELS.len() - lo * (lo.saturating_sub(1)) / 2 + (hi - lo)
}

pub fn atom_labels(g: &MolecularGraph) -> Vec<Vec<Pharmacophore>> {
    (0..g.atom_count())
        .map(|i| {
            let atom = &g.atoms()[i];
            let info = g.info(i);
            let mut labels = Vec::new();
            if info.h_donor {
                labels.push(Pharmacophore::Donor);
            }
            if info.h_acceptor {
                labels.push(Pharmacophore::Acceptor);
            }
            if atom.formal_charge > 0 || info.basic {
                labels.push(Pharmacophore::Positive);
            }
            if atom.formal_charge < 0 || info.acidic {
                labels.push(Pharmacophore::Negative);
            }
            let polar_neighbor = g
                .neighbors(i)
                .iter()
                .any(|&(n, _)| matches!(g.atoms()[n].element, 7 | 8));
            if !atom.is_aromatic
                && atom.formal_charge == 0
                && matches!(atom.element, 6 | 17 | 35 | 53)
                && !polar_neighbor
            {
                labels.push(Pharmacophore::Hydrophobic);
            }
            if atom.is_aromatic {
                labels.push(Pharmacophore::Aromatic);
            }
            labels
        })
        .collect()
}

/// Histogram over explicit labels and a distance matrix.
pub fn erg_from_labels(labels: &[Vec<Pharmacophore>], distances: &[Vec<Option<usize>>], max_path: usize) -> Vec<f64> {
    assert!(max_path >= 1, "max_path must be positive");
    // integer counts first so the result does not depend on atom order
    let mut counts = vec![0u32; erg_len(max_path)];
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let Some(d) = distances[i][j] else { continue };
            if d == 0 || d > max_path {
                continue;
            }
            for &a in &labels[i] {
                for &b in &labels[j] {
                    counts[pair_index(a, b) * max_path + d - 1] += 1;
                }
            }
        }
    }
    let mut out = vec![0.0; counts.len()];
    for (pair, row) in counts.chunks(max_path).enumerate() {
        for (k, slot) in out[pair * max_path..(pair + 1) * max_path].iter_mut().enumerate() {
            let left = if k >= 1 { row[k - 1] } else { 0 };
            let right = if k + 1 < max_path { row[k + 1] } else { 0 };
            *slot = row[k] as f64 + SMEAR * (left + right) as f64;
        }
    }
    out
}

pub fn erg_fingerprint(g: &MolecularGraph, max_path: usize) -> Vec<f64> {
    erg_from_labels(&atom_labels(g), &g.distance_matrix(), max_path)
}
