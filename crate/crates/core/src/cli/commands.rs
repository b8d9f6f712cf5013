use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::autodiff::{config_digest, grad_check_params, Checkpoint, CheckpointError, GradCheckOptions, Tape};
use crate::chem::parse_smiles;
use crate::data::{load_csv, DataError, DatasetSplit, SplitManifest, SplitMethod};
use crate::featurize::{FeaturizedMolecule, FingerprintConfig};
use crate::model::{Mlfgnn, ModelConfig, ModelInput};
use crate::train::{multi_seed, parse_run_config, predict_one, write_atomic, CheckpointMeta, EvalReport, TrainConfig, TrainError};

use super::{apply_ablations, random_smiles, CliError, ExplainArgs, FeaturizeArgs, GradcheckArgs, PredictArgs, TrainArgs};

fn usage(errors: Vec<String>) -> CliError {
    CliError::Usage(format!("invalid configuration:\n  {}", errors.join("\n  ")))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| CliError::Data(e.to_string()))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s.into_bytes()
}

/// SMILES cells of `path` with their 1-based line numbers.
fn read_smiles_column(path: &Path, column: &str) -> Result<Vec<(usize, String)>, CliError> {
    let data_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(data_err)?;
    let idx = reader
        .headers()
        .map_err(data_err)?
        .iter()
        .position(|h| h.trim() == column)
        .ok_or_else(|| CliError::Data(DataError::MissingColumn(column.to_string()).to_string()))?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(data_err)?;
        out.push((i + 2, row.get(idx).unwrap_or("").trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondRecord {
    pub begin: usize,
    pub end: usize,
    pub features: Vec<f64>,
}

/// One line of `featurize` output. Rows that fail to parse carry `error`
/// and empty features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub row: usize,
    pub smiles: String,
    #[serde(default)]
    pub n_atoms: usize,
    #[serde(default)]
    pub atoms: Vec<Vec<f64>>,
    #[serde(default)]
    pub bonds: Vec<BondRecord>,
    #[serde(default)]
    pub fingerprint: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn featurize(a: &FeaturizeArgs) -> Result<(), CliError> {
    let fingerprints = FingerprintConfig::default()
        .with_components(&a.fingerprints)
        .map_err(|e| CliError::Usage(format!("--fingerprints: {e}")))?;
    let rows = read_smiles_column(&a.input, &a.smiles_column)?;
    let mut out = Vec::new();
    let mut failed = 0;
    for (row, smiles) in rows {
        let record = match parse_smiles(&smiles) {
            Ok(g) => {
                let f = FeaturizedMolecule::new(&g, &fingerprints);
                FeatureRecord {
                    row,
                    smiles,
                    n_atoms: f.n_atoms,
                    atoms: f.atom_features.iter().map(|r| r.to_vec()).collect(),
                    bonds: f
                        .bonds
                        .iter()
                        .map(|b| BondRecord {
                            begin: b.begin,
                            end: b.end,
                            features: b.features.to_vec(),
                        })
                        .collect(),
                    fingerprint: f.fingerprint,
                    error: None,
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("row {row}: {e}");
                FeatureRecord {
                    row,
                    smiles,
                    n_atoms: 0,
                    atoms: Vec::new(),
                    bonds: Vec::new(),
                    fingerprint: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        };
        out.extend(serde_json::to_vec(&record).expect("record serializes"));
        out.push(b'\n');
    }
    write_file(&a.out, &out)?;
    if failed > 0 {
        eprintln!("{failed} row(s) could not be parsed");
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config_digest: String,
    pub dataset_checksum: String,
    pub seeds: Vec<u64>,
    pub version: String,
    pub started_at: u64,
    pub finished_at: Option<u64>,
    pub status: String,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::InvalidConfig(errors) => usage(errors),
        other => CliError::Data(other.to_string()),
    }
}

fn resolved_config_text(model: &ModelConfig, train: &TrainConfig) -> String {
    let mut map = model.to_map();
    map.extend(train.to_map());
    map.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn train(a: &TrainArgs, argv: &[String]) -> Result<(), CliError> {
    let (mut model_cfg, mut train_cfg) = match &a.config {
        Some(p) => parse_run_config(&read_text(p)?).map_err(usage)?,
        None => (ModelConfig::default(), TrainConfig::default()),
    };
    train_cfg.task = a.task.into();
    model_cfg.task = train_cfg.task;
    train_cfg.split = a.split.into();
    if let Some(k) = a.seeds {
        train_cfg.seeds = (0..k).collect();
    }
    if let Some(e) = a.epochs {
        train_cfg.epochs = e;
    }
    apply_ablations(&mut model_cfg, &a.ablate);
    let mut errors = model_cfg.validate();
    errors.extend(train_cfg.validate());
    if !errors.is_empty() {
        return Err(usage(errors));
    }

    let dataset = load_csv(&a.data, &a.smiles_column, a.tasks.as_deref(), train_cfg.task).map_err(|e| CliError::Data(e.to_string()))?;
    model_cfg.n_tasks = dataset.n_tasks();
    fs::create_dir_all(&a.out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", a.out.display())))?;
    let mut manifest = RunManifest {
        command_line: argv.to_vec(),
        config_digest: config_digest(&model_cfg.to_text()),
        dataset_checksum: dataset.checksum.clone(),
        seeds: train_cfg.seeds.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_at: unix_now(),
        finished_at: None,
        status: "running".into(),
    };
    let manifest_path = a.out.join("manifest.json");
    write_file(&manifest_path, &to_json(&manifest))?;

    let result = (|| -> Result<EvalReport, CliError> {
        write_file(&a.out.join("config.txt"), resolved_config_text(&model_cfg, &train_cfg).as_bytes())?;
        let data = crate::train::Prepared::new(&dataset, &model_cfg.fingerprints).map_err(|e| CliError::Data(e.to_string()))?;
        let report = multi_seed(&data, &dataset, &model_cfg, &train_cfg, Some(&a.out)).map_err(train_error)?;
        if train_cfg.split == SplitMethod::Scaffold {
            let keys = dataset.scaffold_keys();
            for s in &report.seeds {
                let path = a.out.join(format!("seed_{}", s.seed)).join("split.json");
                let m: SplitManifest = serde_json::from_str(&read_text(&path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                if !DatasetSplit::from_manifest(&m).is_scaffold_disjoint(&keys) {
                    return Err(CliError::Verification(format!("{} shares a scaffold between partitions", path.display())));
                }
            }
            println!("scaffold audit: PASS ({} split file(s))", report.seeds.len());
        }
        write_file(&a.out.join("report.json"), &to_json(&report))?;
        Ok(report)
    })();

    manifest.finished_at = Some(unix_now());
    manifest.status = if result.is_ok() { "complete" } else { "failed" }.into();
    write_file(&manifest_path, &to_json(&manifest))?;
    let report = result?;
    let fmt = |m: Option<f64>, s: Option<f64>| match (m, s) {
        (Some(m), Some(s)) => format!("{m:.4} ± {s:.4}"),
        _ => "n/a".into(),
    };
    println!(
        "{} over {} seed(s): test {} | valid {}",
        report.metric,
        report.seeds.len(),
        fmt(report.test_mean, report.test_std),
        fmt(report.valid_mean, report.valid_std)
    );
    Ok(())
}

fn load_model(path: &Path, expected_digest: Option<&str>, force: bool) -> Result<(Mlfgnn, CheckpointMeta), CliError> {
    let ckpt = Checkpoint::load(path, expected_digest, force).map_err(|e| match e {
        CheckpointError::DigestMismatch { .. } => CliError::Verification(e.to_string()),
        other => CliError::Data(format!("{}: {other}", path.display())),
    })?;
    let config = ModelConfig::from_text(&ckpt.config).map_err(|e| CliError::Data(format!("checkpoint config: {}", e.join("; "))))?;
    let mut model = Mlfgnn::new(config, 0).map_err(|e| CliError::Data(e.to_string()))?;
    ckpt.apply_to(&mut model.store).map_err(|e| CliError::Data(e.to_string()))?;
    let meta: CheckpointMeta = serde_json::from_str(&ckpt.metadata).map_err(|e| CliError::Data(format!("checkpoint metadata: {e}")))?;
    Ok((model, meta))
}

fn featurize_for(model: &Mlfgnn, smiles: &str) -> Result<ModelInput, String> {
    let g = parse_smiles(smiles).map_err(|e| e.to_string())?;
    ModelInput::new(&FeaturizedMolecule::new(&g, &model.config.fingerprints)).map_err(|e| e.to_string())
}

pub fn predict(a: &PredictArgs) -> Result<(), CliError> {
    let expected = match &a.config {
        Some(p) => {
            let (m, _) = parse_run_config(&read_text(p)?).map_err(usage)?;
            Some(config_digest(&m.to_text()))
        }
        None => None,
    };
    let (model, meta) = load_model(&a.checkpoint, expected.as_deref(), a.force)?;
    let rows = read_smiles_column(&a.input, &a.smiles_column)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(e.to_string());
    let mut header = vec!["smiles".to_string()];
    header.extend(meta.task_names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let mut errors = 0;
    for (row, smiles) in rows {
        let cells: Vec<String> = match featurize_for(&model, &smiles).and_then(|x| predict_one(&model, &meta.scaler, &x).map_err(|e| e.to_string())) {
            Ok(values) => values.iter().map(|v| v.to_string()).collect(),
            Err(reason) => {
                errors += 1;
                eprintln!("row {row}: {reason}");
                vec![format!("ERROR:{reason}"); meta.task_names.len()]
            }
        };
        let mut record = vec![smiles];
        record.extend(cells);
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_file(&a.out, &bytes)?;
    eprintln!("{errors} row(s) with errors");
    Ok(())
}

/// Incoming attention of one atom in one GAT layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatRow {
    pub target: usize,
    pub sources: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainBundle {
    pub smiles: String,
    pub atoms: Vec<String>,
    pub task_names: Vec<String>,
    pub prediction: Vec<f64>,
    /// Per GAT layer, one row per atom with neighbours.
    pub gat: Vec<Vec<GatRow>>,
    /// Per transformer layer and head, the softmax attention matrix.
    pub transformer: Vec<Vec<Vec<Vec<f64>>>>,
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<Option<f64>>,
    pub gate_alpha: Option<f64>,
    pub readout: Vec<f64>,
    /// Per head, weights over the virtual node followed by every atom.
    pub cross_attention: Vec<Vec<f64>>,
}

pub fn explain(a: &ExplainArgs) -> Result<(), CliError> {
    let (model, meta) = load_model(&a.checkpoint, None, false)?;
    let g = parse_smiles(&a.smiles).map_err(|e| CliError::Data(format!("SMILES '{}': {e}", a.smiles)))?;
    let input = ModelInput::new(&FeaturizedMolecule::new(&g, &model.config.fingerprints)).map_err(|e| CliError::Data(e.to_string()))?;
    let mut tape = Tape::new();
    let (_, trace) = model.forward_traced(&mut tape, &input).map_err(|e| CliError::Data(e.to_string()))?;
    let prediction = predict_one(&model, &meta.scaler, &input).map_err(|e| CliError::Data(e.to_string()))?;
    let gat = trace
        .gat
        .iter()
        .map(|edges| {
            (0..input.n_atoms)
                .filter_map(|t| {
                    let incoming: Vec<_> = edges.iter().filter(|e| e.target == t).collect();
                    (!incoming.is_empty()).then(|| GatRow {
                        target: t,
                        sources: incoming.iter().map(|e| e.source).collect(),
                        weights: incoming.iter().map(|e| e.weight).collect(),
                    })
                })
                .collect()
        })
        .collect();
    let bundle = ExplainBundle {
        smiles: a.smiles.clone(),
        atoms: g.atoms().iter().map(|x| x.symbol().to_string()).collect(),
        task_names: meta.task_names,
        prediction,
        gat,
        transformer: trace.transformer,
        lambda_a: trace.lambda_a,
        lambda_b: trace.lambda_b,
        gate_alpha: trace.gate_alpha,
        readout: trace.readout,
        cross_attention: trace.cross_attention,
    };
    let json = to_json(&bundle);
    match &a.out {
        Some(p) => write_file(p, &json),
        None => {
            print!("{}", String::from_utf8_lossy(&json));
            Ok(())
        }
    }
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(p) => parse_run_config(&read_text(p)?).map_err(usage)?.0,
        None => ModelConfig::default(),
    };
    apply_ablations(&mut config, &a.ablate);
    let mut errors = config.validate();
    if a.atoms == 0 {
        errors.push("--atoms must be at least 1".into());
    }
    if !(a.rtol.is_finite() && a.rtol > 0.0) {
        errors.push("--rtol must be positive".into());
    }
    if !errors.is_empty() {
        return Err(usage(errors));
    }
    let smiles = random_smiles(a.atoms, a.seed);
    let g = parse_smiles(&smiles).map_err(|e| CliError::Data(e.to_string()))?;
    let input = ModelInput::new(&FeaturizedMolecule::new(&g, &config.fingerprints)).map_err(|e| CliError::Data(e.to_string()))?;
    let mut model = Mlfgnn::new(config, a.seed).map_err(|e| CliError::Data(e.to_string()))?;
    let opts = GradCheckOptions {
        step: 1e-6,
        rtol: a.rtol,
        atol: 1e-8,
        max_coords: (a.max_coords > 0).then_some(a.max_coords),
        seed: a.seed,
    };
    let report = grad_check_params(
        &mut model,
        |tape, m| {
            let y = m.forward(tape, &input)?;
            let sq = tape.mul(y, y)?;
            let lin = tape.sum(y, None)?;
            let quad = tape.sum(sq, None)?;
            let quad = tape.scale(quad, 0.5)?;
            tape.add(lin, quad)
        },
        &opts,
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    println!("molecule: {smiles}");
    println!("tensors: {}  coordinates checked: {}", model.store.len(), report.checked);
    println!("max relative error: {:.3e}  max absolute error: {:.3e}", report.max_rel_error, report.max_abs_error);
    if report.passed() {
        println!("PASS (rtol {})", a.rtol);
        Ok(())
    } else {
        for f in report.failures.iter().take(10) {
            println!("  {}[{}]: analytic {:.6e} numeric {:.6e}", f.tensor, f.index, f.analytic, f.numeric);
        }
        println!("FAIL (rtol {})", a.rtol);
        Err(CliError::Verification(format!("{} coordinate(s) failed", report.failures.len())))
    }
}
