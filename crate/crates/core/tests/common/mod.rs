#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlfgnn::autodiff::Tensor;
use mlfgnn::chem::parse_smiles;
use mlfgnn::data::{load_csv, Dataset};
use mlfgnn::featurize::FeaturizedMolecule;
use mlfgnn::model::{ModelConfig, ModelInput, TaskType};

pub fn data_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn solubility() -> Dataset {
    load_csv(&data_path("solubility_300.csv"), "smiles", None, TaskType::Regression).expect("fixture loads")
}

pub fn solubility_class() -> Dataset {
    load_csv(&data_path("solubility_class_400.csv"), "smiles", None, TaskType::Classification).expect("fixture loads")
}

pub fn input_for(smiles: &str, config: &ModelConfig) -> ModelInput {
    let g = parse_smiles(smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"));
    ModelInput::new(&FeaturizedMolecule::new(&g, &config.fingerprints)).expect("non-empty molecule")
}

/// Runs the command-line binary.
pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlfgnn"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn describe(out: &Output) -> String {
    format!(
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

/// `x W (+ b)` for a single row.
pub fn matvec(x: &[f64], w: &Tensor, b: Option<&Tensor>) -> Vec<f64> {
    let (r, c) = w.dims2().expect("matrix");
    assert_eq!(r, x.len());
    (0..c)
        .map(|j| (0..r).map(|i| x[i] * w.get(i, j)).sum::<f64>() + b.map_or(0.0, |b| b.data()[j]))
        .collect()
}
