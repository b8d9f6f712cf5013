//! Circular (ECFP-style) fingerprint.
//!
//! Round 0 identifiers hash `(atomic number, degree, formal charge, total
//! hydrogens, ring flag, aromatic flag)`. Round `r` hashes `(r, previous
//! identifier, sorted (bond code, neighbour identifier) pairs)`. An atom's
//! round-`r` environment is the set of bonds reachable within `r - 1` hops;
//! an identifier is emitted only when that bond set grew and has not been
//! emitted before, ties within a round going to the smaller `(bond set,
//! identifier)`. Every emitted identifier sets bit `id % n_bits`. All
//! hashing is 64-bit FNV-1a (see [`Fnv64`]).

use std::collections::BTreeSet;

use crate::chem::{Fnv64, MolecularGraph};

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_BITS: usize = 2048;

pub fn initial_invariant(g: &MolecularGraph, atom: usize) -> u64 {
    let a = &g.atoms()[atom];
    let mut h = Fnv64::new();
    h.write_u64(a.element as u64);
    h.write_u64(g.degree(atom) as u64);
    h.write_u64(a.formal_charge as i64 as u64);
    h.write_u64(g.total_hs(atom) as u64);
    h.write_u64(g.info(atom).in_ring as u64);
    h.write_u64(a.is_aromatic as u64);
    h.finish()
}

pub fn round_identifier(round: usize, previous: u64, mut neighbors: Vec<(u8, u64)>) -> u64 {
    neighbors.sort_unstable();
    let mut h = Fnv64::new();
    h.write_u64(round as u64);
    h.write_u64(previous);
    for (order, id) in neighbors {
        h.write_u64(order as u64);
        h.write_u64(id);
    }
    h.finish()
}

/// Emitted identifiers in emission order.
pub fn morgan_identifiers(g: &MolecularGraph, radius: usize) -> Vec<u64> {
    let n = g.atom_count();
    let mut ids: Vec<u64> = (0..n).map(|a| initial_invariant(g, a)).collect();
    let mut emitted = ids.clone();
    let mut envs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut alive = vec![true; n];
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();

    for round in 1..=radius {
        let next_ids: Vec<u64> = (0..n)
            .map(|a| {
                let nbrs = g
                    .neighbors(a)
                    .iter()
                    .map(|&(nbr, b)| (g.bonds()[b].order.code(), ids[nbr]))
                    .collect();
                round_identifier(round, ids[a], nbrs)
            })
            .collect();
        let next_envs: Vec<BTreeSet<usize>> = (0..n)
            .map(|a| {
                let mut env = envs[a].clone();
                for &(nbr, b) in g.neighbors(a) {
                    env.insert(b);
                    env.extend(envs[nbr].iter().copied());
                }
                env
            })
            .collect();

        let mut candidates: Vec<(Vec<usize>, u64)> = Vec::new();
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            if next_envs[a] == envs[a] {
                alive[a] = false;
                continue;
            }
            candidates.push((next_envs[a].iter().copied().collect(), next_ids[a]));
        }
        candidates.sort();
        for (env, id) in candidates {
            if seen.insert(env) {
                emitted.push(id);
            }
        }
        ids = next_ids;
        envs = next_envs;
    }
    emitted
}

pub fn morgan_fingerprint(g: &MolecularGraph, radius: usize, n_bits: usize) -> Vec<f64> {
    assert!(n_bits >= 64, "fingerprint width must be at least 64 bits");
    let mut bits = vec![0.0; n_bits];
    for id in morgan_identifiers(g, radius) {
        bits[(id % n_bits as u64) as usize] = 1.0;
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn on_bits(v: &[f64]) -> usize {
        v.iter().filter(|&&x| x == 1.0).count()
    }

    #[test]
    fn methane_sets_one_bit() {
        let fp = morgan_fingerprint(&parse_smiles("C").unwrap(), 2, 2048);
        assert_eq!(on_bits(&fp), 1);
    }

    #[test]
    fn atom_order_does_not_matter() {
        let a = morgan_fingerprint(&parse_smiles("OCC(N)c1ccccc1").unwrap(), 2, 2048);
        let b = morgan_fingerprint(&parse_smiles("c1ccc(cc1)C(N)CO").unwrap(), 2, 2048);
        assert_eq!(a, b);
    }

    #[test]
    fn ethanol_differs_from_dimethyl_ether() {
        let a = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 1, 2048);
        let b = morgan_fingerprint(&parse_smiles("COC").unwrap(), 1, 2048);
        assert_ne!(a, b);
    }

    #[test]
    fn radius_zero_counts_atom_types() {
        // ethanol: three distinct atom invariants
        let fp = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 0, 2048);
        assert_eq!(on_bits(&fp), 3);
        // ethane: both carbons identical
        assert_eq!(on_bits(&morgan_fingerprint(&parse_smiles("CC").unwrap(), 2, 2048)), 2);
    }
}
