//! Multi-level fusion graph neural network for molecular property
//! prediction: SMILES parsing, featurization, a small reverse-mode tensor
//! engine, the fused GAT / graph-transformer model, and the training and
//! evaluation protocol around it.

pub mod autodiff;
pub mod chem;
pub mod cli;
pub mod featurize;
pub mod data;
pub mod model;
pub mod train;
