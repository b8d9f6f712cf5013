use super::graph::MolecularGraph;
use super::ChemError;

/// Bemis-Murcko scaffold: repeatedly strips non-ring atoms of degree <= 1
/// until ring systems and the linkers between them remain.
///
/// Acyclic molecules reduce to the empty graph.
pub fn murcko_scaffold(g: &MolecularGraph) -> Result<MolecularGraph, ChemError> {
    if g.rings().is_empty() {
        return Ok(MolecularGraph::empty());
    }
    let n = g.atom_count();
    let mut keep = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| !g.info(i).in_ring && degree[i] <= 1).collect();
    while let Some(a) = stack.pop() {
        if !keep[a] {
            continue;
        }
        keep[a] = false;
        for &(nbr, _) in g.neighbors(a) {
            if keep[nbr] {
                degree[nbr] -= 1;
                if !g.info(nbr).in_ring && degree[nbr] <= 1 {
                    stack.push(nbr);
                }
            }
        }
    }
    if keep.iter().all(|&k| k) {
        return Ok(g.clone());
    }
    g.subgraph(&keep)
}

/// Grouping key for scaffold splits; every acyclic molecule shares the
/// key of the empty scaffold.
pub fn scaffold_key(g: &MolecularGraph) -> Result<String, ChemError> {
    let scaffold = murcko_scaffold(g)?;
    Ok(format!("{:016x}", scaffold.graph_hash()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn toluene_to_benzene() {
        let s = murcko_scaffold(&parse_smiles("Cc1ccccc1").unwrap()).unwrap();
        assert_eq!(s.atom_count(), 6);
        assert_eq!(s.graph_hash(), parse_smiles("c1ccccc1").unwrap().graph_hash());
    }

    #[test]
    fn benzene_is_fixed_point() {
        let b = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(murcko_scaffold(&b).unwrap(), b);
    }

    #[test]
    fn acyclic_is_empty() {
        let s = murcko_scaffold(&parse_smiles("CCO").unwrap()).unwrap();
        assert!(s.is_empty());
        assert_eq!(scaffold_key(&parse_smiles("CCCCN").unwrap()).unwrap(), scaffold_key(&s).unwrap());
    }

    #[test]
    fn linker_is_kept() {
        // diphenylmethane keeps the CH2 linker, ethyl tail removed
        let s = murcko_scaffold(&parse_smiles("CCc1ccc(Cc2ccccc2)cc1").unwrap()).unwrap();
        assert_eq!(s.atom_count(), 13);
        assert_eq!(s.rings().len(), 2);
    }
}
