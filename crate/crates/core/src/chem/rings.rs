//! Smallest set of smallest rings.
//!
//! Candidate cycles are built Horton-style: for every atom `v` and bond
//! `(x, y)`, the shortest paths `v..x` and `y..v` closed by the bond. The
//! candidates are sorted by length and accepted greedily while they stay
//! linearly independent over GF(2) in bond space, until the cycle rank
//! `|E| - |V| + components` is reached.

use std::collections::{HashSet, VecDeque};

use super::graph::{build_neighbors, components, Bond};

pub fn perceive_rings(n_atoms: usize, bonds: &[Bond]) -> Vec<Vec<usize>> {
    let rank = cycle_rank(n_atoms, bonds);
    if rank == 0 {
        return Vec::new();
    }
    let neighbors = build_neighbors(n_atoms, bonds);
    let words = bonds.len().div_ceil(64);

    let mut candidates: Vec<(Vec<usize>, Vec<u64>)> = Vec::new();
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    for root in 0..n_atoms {
        let parent = bfs_tree(root, &neighbors);
        for (bi, bond) in bonds.iter().enumerate() {
            let (x, y) = (bond.begin, bond.end);
            if parent[x].is_none() || parent[y].is_none() {
                continue;
            }
            let px = path_to_root(x, &parent);
            let py = path_to_root(y, &parent);
            // The two paths may only share the root.
            let set_x: HashSet<usize> = px.iter().map(|&(a, _)| a).collect();
            if py.iter().any(|&(a, _)| a != root && set_x.contains(&a)) {
                continue;
            }
            if px.iter().any(|&(_, b)| b == Some(bi)) || py.iter().any(|&(_, b)| b == Some(bi)) {
                continue;
            }
            let mut edge_bits = vec![0u64; words];
            let mut set = |b: usize| edge_bits[b / 64] |= 1 << (b % 64);
            set(bi);
            for &(_, b) in px.iter().chain(py.iter()) {
                if let Some(b) = b {
                    set(b);
                }
            }
            if !seen.insert(edge_bits.clone()) {
                continue;
            }
            // root .. x, y .. back toward root
            let mut atoms: Vec<usize> = px.iter().rev().map(|&(a, _)| a).collect();
            atoms.extend(py.iter().map(|&(a, _)| a).filter(|&a| a != root));
            candidates.push((atoms, edge_bits));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.len().cmp(&b.0.len()).then_with(|| {
            let mut sa = a.0.clone();
            let mut sb = b.0.clone();
            sa.sort_unstable();
            sb.sort_unstable();
            sa.cmp(&sb)
        })
    });

    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut rings = Vec::new();
    for (atoms, bits) in candidates {
        if rings.len() == rank {
            break;
        }
        if insert_independent(&mut basis, bits) {
            rings.push(canonical_rotation(atoms));
        }
    }
    rings
}

pub fn cycle_rank(n_atoms: usize, bonds: &[Bond]) -> usize {
    let c = components(n_atoms, bonds).len();
    (bonds.len() + c).saturating_sub(n_atoms)
}

/// For each bond, whether it joins consecutive atoms of some ring.
pub fn ring_bond_flags(bonds: &[Bond], rings: &[Vec<usize>]) -> Vec<bool> {
    let mut pairs = HashSet::new();
    for ring in rings {
        for i in 0..ring.len() {
            let a = ring[i];
            let b = ring[(i + 1) % ring.len()];
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    bonds
        .iter()
        .map(|b| pairs.contains(&(b.begin.min(b.end), b.begin.max(b.end))))
        .collect()
}

fn bfs_tree(root: usize, neighbors: &[Vec<(usize, usize)>]) -> Vec<Option<(usize, Option<usize>)>> {
    // parent[a] = (parent atom, bond to parent); the root points at itself.
    let mut parent = vec![None; neighbors.len()];
    parent[root] = Some((root, None));
    let mut queue = VecDeque::from([root]);
    while let Some(a) = queue.pop_front() {
        for &(nbr, bond) in &neighbors[a] {
            if parent[nbr].is_none() {
                parent[nbr] = Some((a, Some(bond)));
                queue.push_back(nbr);
            }
        }
    }
    parent
}

/// Atoms from `start` up to and including the root, each paired with the
/// bond leading toward the root.
fn path_to_root(start: usize, parent: &[Option<(usize, Option<usize>)>]) -> Vec<(usize, Option<usize>)> {
    let mut out = Vec::new();
    let mut cur = start;
    loop {
        let (p, bond) = parent[cur].expect("atom reachable from root");
        out.push((cur, bond));
        if bond.is_none() {
            break;
        }
        cur = p;
    }
    out
}

fn insert_independent(basis: &mut Vec<Vec<u64>>, mut v: Vec<u64>) -> bool {
    // basis rows are kept with distinct leading bits
    for row in basis.iter() {
        let lead = leading_bit(row).expect("basis rows are nonzero");
        if v[lead / 64] >> (lead % 64) & 1 == 1 {
            for (a, b) in v.iter_mut().zip(row) {
                *a ^= b;
            }
        }
    }
    match leading_bit(&v) {
        None => false,
        Some(lead) => {
            for row in basis.iter_mut() {
                if row[lead / 64] >> (lead % 64) & 1 == 1 {
                    for (a, b) in row.iter_mut().zip(&v) {
                        *a ^= b;
                    }
                }
            }
            basis.push(v);
            true
        }
    }
}

fn leading_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .rev()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
}

/// Rotates a cycle to start at its smallest atom, walking toward the
/// smaller neighbour.
fn canonical_rotation(mut ring: Vec<usize>) -> Vec<usize> {
    let n = ring.len();
    let pos = (0..n).min_by_key(|&i| ring[i]).unwrap();
    ring.rotate_left(pos);
    if n > 2 && ring[n - 1] < ring[1] {
        ring[1..].reverse();
    }
    ring
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::graph::BondOrder;

    fn ring_of(n: usize) -> Vec<Bond> {
        (0..n).map(|i| Bond::new(i, (i + 1) % n, BondOrder::Single)).collect()
    }

    #[test]
    fn single_cycle() {
        let rings = perceive_rings(5, &ring_of(5));
        assert_eq!(rings, vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn tree_has_no_rings() {
        let bonds = vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 2, BondOrder::Single)];
        assert!(perceive_rings(3, &bonds).is_empty());
    }

    #[test]
    fn cubane_rank_five() {
        // cube: 8 vertices, 12 edges, SSSR of five 4-rings
        let mut bonds = Vec::new();
        for i in 0..4 {
            bonds.push(Bond::new(i, (i + 1) % 4, BondOrder::Single));
            bonds.push(Bond::new(4 + i, 4 + (i + 1) % 4, BondOrder::Single));
            bonds.push(Bond::new(i, 4 + i, BondOrder::Single));
        }
        let rings = perceive_rings(8, &bonds);
        assert_eq!(rings.len(), 5);
        assert!(rings.iter().all(|r| r.len() == 4));
    }
}
