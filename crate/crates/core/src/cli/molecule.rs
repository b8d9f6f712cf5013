use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random acyclic SMILES with `n` heavy atoms. Elements are chosen to
/// respect valence: carbon for branch points, C/N/O for chain atoms, and
/// F or Cl allowed at leaves.
pub fn random_smiles(n: usize, seed: u64) -> String {
    if n == 0 {
        return String::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        // a parent may take at most three children so its degree stays <= 4
        let open: Vec<usize> = (0..i).filter(|&p| children[p].len() < 3).collect();
        let p = *open.choose(&mut rng).expect("atom 0..i always has room in a tree of degree <= 4");
        children[p].push(i);
    }
    let symbols: Vec<&str> = (0..n)
        .map(|i| {
            let degree = children[i].len() + usize::from(i > 0);
            let pool: &[&str] = match degree {
                0 | 1 => &["C", "C", "N", "O", "F", "Cl"],
                2 => &["C", "C", "N", "O"],
                3 => &["C", "N"],
                _ => &["C"],
            };
            pool[rng.gen_range(0..pool.len())]
        })
        .collect();
    let mut out = String::new();
    emit(0, &children, &symbols, &mut out);
    out
}

fn emit(atom: usize, children: &[Vec<usize>], symbols: &[&str], out: &mut String) {
    out.push_str(symbols[atom]);
    if let Some((last, rest)) = children[atom].split_last() {
        for &c in rest {
            out.push('(');
            emit(c, children, symbols, out);
            out.push(')');
        }
        emit(*last, children, symbols, out);
    }
}
