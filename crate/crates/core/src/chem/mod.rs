//! SMILES parsing and the chemical perception used for featurization and
//! scaffold splitting.

pub mod elements;
mod graph;
pub mod perception;
pub mod rings;
mod scaffold;
mod smiles;

pub use graph::{Atom, AtomInfo, Bond, BondOrder, BondStereo, Chirality, Fnv64, Hybridization, MolecularGraph};
pub use rings::perceive_rings;
pub use scaffold::{murcko_scaffold, scaffold_key};
pub use smiles::{parse_smiles, parse_smiles_with, FragmentPolicy, ParseOptions, SmilesError, SmilesErrorKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChemError {
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error("unknown element {0}")]
    UnknownElement(String),
    #[error("atom {atom} exceeds its maximum valence (uses {valence})")]
    ValenceViolation { atom: usize, valence: u32 },
    #[error("bond ({0}, {1}) references a missing atom or is a self-loop")]
    InvalidBond(usize, usize),
    #[error("atoms {0} and {1} are bonded twice")]
    DuplicateBond(usize, usize),
}
