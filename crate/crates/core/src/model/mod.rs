//! The fused GAT / graph-transformer predictor.
//!
//! Forward pass for one molecule:
//!
//! 1. fingerprint vector -> two-layer MLP -> `FP`
//! 2. atoms -> `h0 = relu(fc1 A)`; directed edges `u -> v` -> `relu(fc2 [A_u | B_uv])`
//! 3. GAT stack (attention over in-edges, ELU aggregate, GRU update)
//! 4. graph transformer on a projection of `h0`, attention
//!    `(lambda_a softmax(QK^T / sqrt(d_k)) + lambda_b Adj) V`, post-norm
//! 5. `F_A = gelu(Linear(mean of GAT layers))`, `F_T = gelu(H_T)`,
//!    `F_mix = alpha F_A + (1 - alpha) F_T`, `alpha = sigmoid(gate)`
//! 6. virtual-node readout: attention from the atom sum, GRU -> `F_v`
//! 7. cross-attention with `FP` as query over `[F_v; F_mix]`,
//!    `F_M = [o | F_v | FP]`
//! 8. output MLP

mod config;
mod layers;

pub use config::{parse_key_values, ModelConfig, NormKind, Streams, TaskType, MODEL_KEYS};
pub(crate) use config::parse_field;
pub use layers::{DynamicTanh, Gru, LayerNorm, Linear, Norm, LAYER_NORM_EPS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::autodiff::{sigmoid, AdError, Axis, Init, ParamId, ParamStore, Parameterized, Tape, Tensor, Var};
use crate::featurize::{FeaturizedMolecule, ATOM_DIM, BOND_DIM};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("molecule has no atoms")]
    EmptyMolecule,
    #[error("invalid model config: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("fingerprint has {found} values, model expects {expected}")]
    FingerprintWidth { expected: usize, found: usize },
}

/// Constant tensors for one molecule.
#[derive(Debug, Clone)]
pub struct ModelInput {
    pub n_atoms: usize,
    pub atoms: Tensor,
    /// One row `[A_source | B]` per directed edge.
    pub edge_inputs: Tensor,
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    pub adjacency: Tensor,
    pub fingerprint: Tensor,
}

impl ModelInput {
    pub fn new(m: &FeaturizedMolecule) -> Result<Self, ModelError> {
        if m.n_atoms == 0 {
            return Err(ModelError::EmptyMolecule);
        }
        let atoms = Tensor::from_rows(&m.atom_features)?;
        let edges = m.directed_edges();
        let mut rows = Vec::with_capacity(edges.len());
        for &(s, _, b) in &edges {
            let mut row = Vec::with_capacity(ATOM_DIM + BOND_DIM);
            row.extend_from_slice(&m.atom_features[s]);
            row.extend_from_slice(&m.bonds[b].features);
            rows.push(row);
        }
        let edge_inputs = if rows.is_empty() {
            Tensor::zeros(&[0, ATOM_DIM + BOND_DIM])
        } else {
            Tensor::from_rows(&rows)?
        };
        Ok(ModelInput {
            n_atoms: m.n_atoms,
            atoms,
            edge_inputs,
            sources: edges.iter().map(|e| e.0).collect(),
            targets: edges.iter().map(|e| e.1).collect(),
            adjacency: Tensor::from_rows(&m.adjacency_normalized)?,
            fingerprint: Tensor::row(&m.fingerprint),
        })
    }

    /// Same molecule with atom `i` renamed `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let n = self.n_atoms;
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let atoms: Vec<Vec<f64>> = (0..n).map(|j| self.atoms.row_slice(inv[j]).to_vec()).collect();
        let adjacency: Vec<Vec<f64>> = (0..n)
            .map(|j| (0..n).map(|k| self.adjacency.get(inv[j], inv[k])).collect())
            .collect();
        Ok(ModelInput {
            n_atoms: n,
            atoms: Tensor::from_rows(&atoms)?,
            edge_inputs: self.edge_inputs.clone(),
            sources: self.sources.iter().map(|&s| perm[s]).collect(),
            targets: self.targets.iter().map(|&t| perm[t]).collect(),
            adjacency: Tensor::from_rows(&adjacency)?,
            fingerprint: self.fingerprint.clone(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct GatLayer {
    pub attention: Linear,
    pub transform: Linear,
    pub gru: Gru,
}

#[derive(Debug, Clone)]
pub struct TransformerLayer {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub lambda_a: ParamId,
    pub lambda_b: Option<ParamId>,
    pub norm1: Norm,
    pub ffn1: Linear,
    pub ffn2: Linear,
    pub norm2: Norm,
}

#[derive(Debug, Clone)]
struct GatStack {
    fc2: Linear,
    layers: Vec<GatLayer>,
    mix: Linear,
}

#[derive(Debug, Clone)]
struct TransformerStack {
    input: Linear,
    layers: Vec<TransformerLayer>,
}

#[derive(Debug, Clone)]
struct Readout {
    score: Linear,
    transform: Linear,
    gru: Gru,
}

#[derive(Debug, Clone)]
struct CrossAttention {
    query: Linear,
    key: Linear,
    value: Linear,
    output: Linear,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EdgeAttention {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Attention weights and scalar gates recorded during a forward pass.
#[derive(Debug, Clone, Serialize, Default, PartialEq)]
pub struct AttentionTrace {
    /// Per GAT layer, the weight of every in-edge.
    pub gat: Vec<Vec<EdgeAttention>>,
    /// Per transformer layer and head, the `softmax(QK^T / sqrt(d_k))` matrix.
    pub transformer: Vec<Vec<Vec<Vec<f64>>>>,
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<Option<f64>>,
    pub gate_alpha: Option<f64>,
    /// Readout weight of each atom.
    pub readout: Vec<f64>,
    /// Per head, weights over `[virtual node, atom 0, atom 1, ...]`.
    pub cross_attention: Vec<Vec<f64>>,
}

fn rows_of(t: &Tensor) -> Vec<Vec<f64>> {
    let (r, _) = t.dims2().unwrap_or((0, 0));
    (0..r).map(|i| t.row_slice(i).to_vec()).collect()
}

#[derive(Debug, Clone)]
pub struct Mlfgnn {
    pub config: ModelConfig,
    pub store: ParamStore,
    fingerprint_mlp: Option<(Linear, Linear)>,
    fc1: Linear,
    gat: Option<GatStack>,
    transformer: Option<TransformerStack>,
    gate: Option<ParamId>,
    readout: Readout,
    cross: Option<CrossAttention>,
    head: (Linear, Linear),
}

impl Mlfgnn {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let errors = config.validate();
        if !errors.is_empty() {
            return Err(ModelError::InvalidConfig(errors));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rng = &mut rng;
        let mut store = ParamStore::new();
        let s = &mut store;
        let (g, d, e) = (config.gat_out_dim, config.hidden_dim, config.fingerprint_embed_dim);

        let fingerprint_mlp = if config.use_fingerprint {
            Some((
                Linear::new(s, rng, "fingerprint.fc1", config.fingerprint_dim(), e, true)?,
                Linear::new(s, rng, "fingerprint.fc2", e, e, true)?,
            ))
        } else {
            None
        };
        let fc1 = Linear::new(s, rng, "atoms.fc1", ATOM_DIM, g, true)?;
        let gat = if config.has_gat() {
            let fc2 = Linear::new(s, rng, "gat.fc2", ATOM_DIM + BOND_DIM, g, true)?;
            let mut layers = Vec::new();
            for l in 0..config.gat_layers {
                layers.push(GatLayer {
                    attention: Linear::new(s, rng, &format!("gat.{l}.attention"), 2 * g, 1, false)?,
                    transform: Linear::new(s, rng, &format!("gat.{l}.transform"), g, g, false)?,
                    gru: Gru::new(s, rng, &format!("gat.{l}.gru"), g, g)?,
                });
            }
            let mix = Linear::new(s, rng, "mix.local", g, d, true)?;
            Some(GatStack { fc2, layers, mix })
        } else {
            None
        };
        let transformer = if config.has_transformer() {
            let input = Linear::new(s, rng, "transformer.input", g, d, true)?;
            let mut layers = Vec::new();
            for l in 0..config.transformer_layers {
                let p = format!("transformer.{l}");
                let norm = |s: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str| -> Result<Norm, AdError> {
                    Ok(match config.norm {
                        NormKind::DynamicTanh => Norm::DynamicTanh(DynamicTanh::new(s, rng, name, d)?),
                        NormKind::LayerNorm => Norm::Layer(LayerNorm::new(s, rng, name, d)?),
                    })
                };
                let query = Linear::new(s, rng, &format!("{p}.query"), d, d, false)?;
                let key = Linear::new(s, rng, &format!("{p}.key"), d, d, false)?;
                let value = Linear::new(s, rng, &format!("{p}.value"), d, d, false)?;
                let output = Linear::new(s, rng, &format!("{p}.output"), d, d, true)?;
                let lambda_a = s.add(&format!("{p}.lambda_a"), &[1, 1], Init::Constant(0.5), rng)?;
                let lambda_b = if config.use_adjacency {
                    Some(s.add(&format!("{p}.lambda_b"), &[1, 1], Init::Constant(0.5), rng)?)
                } else {
                    None
                };
                let norm1 = norm(s, rng, &format!("{p}.norm1"))?;
                let ffn1 = Linear::new(s, rng, &format!("{p}.ffn1"), d, 4 * d, true)?;
                let ffn2 = Linear::new(s, rng, &format!("{p}.ffn2"), 4 * d, d, true)?;
                let norm2 = norm(s, rng, &format!("{p}.norm2"))?;
                layers.push(TransformerLayer {
                    query,
                    key,
                    value,
                    output,
                    lambda_a,
                    lambda_b,
                    norm1,
                    ffn1,
                    ffn2,
                    norm2,
                });
            }
            Some(TransformerStack { input, layers })
        } else {
            None
        };
        let gate = if config.streams == Streams::Both {
            Some(s.add("mix.gate", &[1, 1], Init::Constant(0.0), rng)?)
        } else {
            None
        };
        let readout = Readout {
            score: Linear::new(s, rng, "readout.score", 2 * d, 1, false)?,
            transform: Linear::new(s, rng, "readout.transform", d, d, false)?,
            gru: Gru::new(s, rng, "readout.gru", d, d)?,
        };
        let cross = if config.use_fingerprint {
            Some(CrossAttention {
                query: Linear::new(s, rng, "cross.query", e, d, false)?,
                key: Linear::new(s, rng, "cross.key", d, d, false)?,
                value: Linear::new(s, rng, "cross.value", d, d, false)?,
                output: Linear::new(s, rng, "cross.output", d, d, true)?,
            })
        } else {
            None
        };
        let head_in = if config.use_fingerprint { 2 * d + e } else { d };
        let head = (
            Linear::new(s, rng, "head.fc1", head_in, d, true)?,
            Linear::new(s, rng, "head.fc2", d, config.n_tasks, true)?,
        );
        Ok(Mlfgnn {
            config,
            store,
            fingerprint_mlp,
            fc1,
            gat,
            transformer,
            gate,
            readout,
            cross,
            head,
        })
    }

    pub fn gat_layers(&self) -> &[GatLayer] {
        self.gat.as_ref().map_or(&[], |g| &g.layers)
    }

    pub fn transformer_layers(&self) -> &[TransformerLayer] {
        self.transformer.as_ref().map_or(&[], |t| &t.layers)
    }

    pub fn gate_param(&self) -> Option<ParamId> {
        self.gate
    }

    pub fn gate_alpha(&self) -> Option<f64> {
        self.gate.map(|g| sigmoid(self.store.value(g).data()[0]))
    }

    /// `(lambda_a, lambda_b)` per transformer layer.
    pub fn lambdas(&self) -> Vec<(f64, Option<f64>)> {
        self.transformer_layers()
            .iter()
            .map(|l| {
                (
                    self.store.value(l.lambda_a).data()[0],
                    l.lambda_b.map(|b| self.store.value(b).data()[0]),
                )
            })
            .collect()
    }

    fn check_input(&self, input: &ModelInput) -> Result<(), ModelError> {
        if input.n_atoms == 0 {
            return Err(ModelError::EmptyMolecule);
        }
        if self.config.use_fingerprint && input.fingerprint.len() != self.config.fingerprint_dim() {
            return Err(ModelError::FingerprintWidth {
                expected: self.config.fingerprint_dim(),
                found: input.fingerprint.len(),
            });
        }
        Ok(())
    }

    pub fn fingerprint_embed(&self, tape: &mut Tape, fingerprint: Var) -> Result<Var, ModelError> {
        let (fc1, fc2) = self.fingerprint_mlp.as_ref().ok_or_else(|| {
            ModelError::InvalidConfig(vec!["fingerprint branch disabled".into()])
        })?;
        let h = fc1.forward(tape, &self.store, fingerprint)?;
        let h = tape.relu(h)?;
        let h = tape.dropout(h, self.config.dropout_ffn)?;
        Ok(fc2.forward(tape, &self.store, h)?)
    }

    /// Initial node states and, when the GAT stream exists, per-directed-edge
    /// neighbour contexts.
    pub fn gat_init(&self, tape: &mut Tape, input: &ModelInput) -> Result<(Var, Option<Var>), ModelError> {
        let atoms = tape.constant(input.atoms.clone());
        let h0 = self.fc1.forward(tape, &self.store, atoms)?;
        let h0 = tape.relu(h0)?;
        let edges = match &self.gat {
            Some(g) => {
                let e = tape.constant(input.edge_inputs.clone());
                let e = g.fc2.forward(tape, &self.store, e)?;
                Some(tape.relu(e)?)
            }
            None => None,
        };
        Ok((h0, edges))
    }

    /// One GAT layer. `neighbors` holds the neighbour state of every directed
    /// edge. Returns the new node states and the edge attention weights.
    pub fn gat_layer(&self, tape: &mut Tape, layer: usize, h: Var, neighbors: Var, input: &ModelInput) -> Result<(Var, Var), ModelError> {
        let gl = &self.gat_layers()[layer];
        let hv = tape.gather_rows(h, &input.targets)?;
        let pair = tape.concat(&[hv, neighbors], Axis::Cols)?;
        let score = gl.attention.forward(tape, &self.store, pair)?;
        let score = tape.leaky_relu(score, self.config.leaky_slope)?;
        let attention = tape.segment_softmax(score, &input.targets)?;
        let dropped = tape.dropout(attention, self.config.dropout_gat)?;
        let msg = gl.transform.forward(tape, &self.store, neighbors)?;
        let msg = tape.mul(dropped, msg)?;
        let agg = tape.scatter_add_rows(msg, &input.targets, input.n_atoms)?;
        let c = tape.elu(agg)?;
        Ok((gl.gru.forward(tape, &self.store, c, h)?, attention))
    }

    /// Per-head attention outputs of transformer layer `layer` and the
    /// corresponding softmax maps.
    pub fn transformer_heads(&self, tape: &mut Tape, layer: usize, h: Var, adjacency: Var) -> Result<(Vec<Var>, Vec<Var>), ModelError> {
        let tl = &self.transformer_layers()[layer];
        let (heads, dk) = (self.config.heads, self.config.head_dim);
        let q = tl.query.forward(tape, &self.store, h)?;
        let k = tl.key.forward(tape, &self.store, h)?;
        let v = tl.value.forward(tape, &self.store, h)?;
        let la = tape.param(&self.store, tl.lambda_a);
        let lb_adj = match tl.lambda_b {
            Some(b) => {
                let lb = tape.param(&self.store, b);
                Some(tape.mul(lb, adjacency)?)
            }
            None => None,
        };
        let mut outs = Vec::with_capacity(heads);
        let mut maps = Vec::with_capacity(heads);
        for i in 0..heads {
            let qi = tape.slice(q, Axis::Cols, i * dk, dk)?;
            let ki = tape.slice(k, Axis::Cols, i * dk, dk)?;
            let vi = tape.slice(v, Axis::Cols, i * dk, dk)?;
            let kt = tape.transpose(ki)?;
            let s = tape.matmul(qi, kt)?;
            let s = tape.scale(s, 1.0 / (dk as f64).sqrt())?;
            let p = tape.softmax(s, Axis::Cols)?;
            let mut att = tape.mul(la, p)?;
            if let Some(adj) = lb_adj {
                att = tape.add(att, adj)?;
            }
            outs.push(tape.matmul(att, vi)?);
            maps.push(p);
        }
        Ok((outs, maps))
    }

    pub fn transformer_layer(&self, tape: &mut Tape, layer: usize, h: Var, adjacency: Var) -> Result<(Var, Vec<Var>), ModelError> {
        let tl = &self.transformer_layers()[layer];
        let (heads, maps) = self.transformer_heads(tape, layer, h, adjacency)?;
        let cat = tape.concat(&heads, Axis::Cols)?;
        let o = tl.output.forward(tape, &self.store, cat)?;
        let o = tape.dropout(o, self.config.dropout_attn)?;
        let r = tape.add(h, o)?;
        let r = tl.norm1.forward(tape, &self.store, r)?;
        let f = tl.ffn1.forward(tape, &self.store, r)?;
        let f = tape.gelu(f)?;
        let f = tape.dropout(f, self.config.dropout_ffn)?;
        let f = tl.ffn2.forward(tape, &self.store, f)?;
        let r2 = tape.add(r, f)?;
        Ok((tl.norm2.forward(tape, &self.store, r2)?, maps))
    }

    /// `F_mix` from the GAT layer outputs and the transformer output.
    pub fn mixture(&self, tape: &mut Tape, gat_outputs: &[Var], transformer_output: Option<Var>) -> Result<Var, ModelError> {
        let local = match &self.gat {
            Some(g) if !gat_outputs.is_empty() => {
                let mut acc = gat_outputs[0];
                for &o in &gat_outputs[1..] {
                    acc = tape.add(acc, o)?;
                }
                let mean = tape.scale(acc, 1.0 / gat_outputs.len() as f64)?;
                let a = g.mix.forward(tape, &self.store, mean)?;
                Some(tape.gelu(a)?)
            }
            _ => None,
        };
        let global = match transformer_output {
            Some(t) => Some(tape.gelu(t)?),
            None => None,
        };
        Ok(match (local, global, self.gate) {
            (Some(fa), Some(ft), Some(gate)) => {
                let logit = tape.param(&self.store, gate);
                let alpha = tape.sigmoid(logit)?;
                let beta = tape.scale_shift(alpha, -1.0, 1.0)?;
                let a = tape.mul(alpha, fa)?;
                let b = tape.mul(beta, ft)?;
                tape.add(a, b)?
            }
            (Some(fa), _, _) => fa,
            (None, Some(ft), _) => ft,
            (None, None, _) => return Err(ModelError::InvalidConfig(vec!["no node stream".into()])),
        })
    }

    /// Virtual-node readout; returns `F_v` and the atom weights.
    pub fn readout(&self, tape: &mut Tape, mixed: Var) -> Result<(Var, Var), ModelError> {
        let (n, d) = tape.value(mixed).dims2()?;
        let hv = tape.sum(mixed, Some(Axis::Rows))?;
        let hvb = tape.broadcast(hv, n, d)?;
        let pair = tape.concat(&[hvb, mixed], Axis::Cols)?;
        let e = self.readout.score.forward(tape, &self.store, pair)?;
        let e = tape.leaky_relu(e, self.config.leaky_slope)?;
        let a = tape.softmax(e, Axis::Rows)?;
        let w = self.readout.transform.forward(tape, &self.store, mixed)?;
        let weighted = tape.mul(a, w)?;
        let c = tape.sum(weighted, Some(Axis::Rows))?;
        let c = tape.elu(c)?;
        Ok((self.readout.gru.forward(tape, &self.store, c, hv)?, a))
    }

    /// Fingerprint-query cross-attention; returns `F_M` and per-head weights.
    pub fn cross_attention(&self, tape: &mut Tape, fp: Var, fv: Var, mixed: Var) -> Result<(Var, Vec<Var>), ModelError> {
        let ca = self.cross.as_ref().ok_or_else(|| {
            ModelError::InvalidConfig(vec!["fingerprint branch disabled".into()])
        })?;
        let (heads, dk) = (self.config.heads, self.config.head_dim);
        let q = ca.query.forward(tape, &self.store, fp)?;
        let tokens = tape.concat(&[fv, mixed], Axis::Rows)?;
        let k = ca.key.forward(tape, &self.store, tokens)?;
        let v = ca.value.forward(tape, &self.store, tokens)?;
        let mut outs = Vec::with_capacity(heads);
        let mut weights = Vec::with_capacity(heads);
        for i in 0..heads {
            let qi = tape.slice(q, Axis::Cols, i * dk, dk)?;
            let ki = tape.slice(k, Axis::Cols, i * dk, dk)?;
            let vi = tape.slice(v, Axis::Cols, i * dk, dk)?;
            let kt = tape.transpose(ki)?;
            let s = tape.matmul(qi, kt)?;
            let s = tape.scale(s, 1.0 / (dk as f64).sqrt())?;
            let a = tape.softmax(s, Axis::Cols)?;
            outs.push(tape.matmul(a, vi)?);
            weights.push(a);
        }
        let cat = tape.concat(&outs, Axis::Cols)?;
        let o = ca.output.forward(tape, &self.store, cat)?;
        Ok((tape.concat(&[o, fv, fp], Axis::Cols)?, weights))
    }

    /// Raw outputs `[1 x n_tasks]`: logits for classification, values for regression.
    pub fn forward(&self, tape: &mut Tape, input: &ModelInput) -> Result<Var, ModelError> {
        self.run(tape, input, None)
    }

    pub fn forward_traced(&self, tape: &mut Tape, input: &ModelInput) -> Result<(Var, AttentionTrace), ModelError> {
        let mut trace = AttentionTrace::default();
        let y = self.run(tape, input, Some(&mut trace))?;
        Ok((y, trace))
    }

    /// Eval-mode prediction as plain numbers.
    pub fn predict(&self, input: &ModelInput) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let y = self.forward(&mut tape, input)?;
        Ok(tape.value(y).data().to_vec())
    }

    fn run(&self, tape: &mut Tape, input: &ModelInput, mut trace: Option<&mut AttentionTrace>) -> Result<Var, ModelError> {
        self.check_input(input)?;
        let fp = match self.fingerprint_mlp {
            Some(_) => {
                let u = tape.constant(input.fingerprint.clone());
                Some(self.fingerprint_embed(tape, u)?)
            }
            None => None,
        };
        let (h0, edges) = self.gat_init(tape, input)?;

        let mut gat_outputs = Vec::new();
        if let Some(edges) = edges {
            let mut h = h0;
            for l in 0..self.gat_layers().len() {
                let neighbors = if l == 0 { edges } else { tape.gather_rows(h, &input.sources)? };
                let (next, attention) = self.gat_layer(tape, l, h, neighbors, input)?;
                if let Some(t) = trace.as_deref_mut() {
                    let w = tape.value(attention).data();
                    t.gat.push(
                        (0..input.targets.len())
                            .map(|e| EdgeAttention {
                                source: input.sources[e],
                                target: input.targets[e],
                                weight: w[e],
                            })
                            .collect(),
                    );
                }
                gat_outputs.push(next);
                h = next;
            }
        }

        let transformer_output = match &self.transformer {
            Some(ts) => {
                let adjacency = tape.constant(input.adjacency.clone());
                let mut h = ts.input.forward(tape, &self.store, h0)?;
                for l in 0..ts.layers.len() {
                    let (next, maps) = self.transformer_layer(tape, l, h, adjacency)?;
                    if let Some(t) = trace.as_deref_mut() {
                        t.transformer.push(maps.iter().map(|&m| rows_of(tape.value(m))).collect());
                    }
                    h = next;
                }
                Some(h)
            }
            None => None,
        };

        let mixed = self.mixture(tape, &gat_outputs, transformer_output)?;
        let (fv, readout) = self.readout(tape, mixed)?;
        let fused = match fp {
            Some(fp) => {
                let (fm, weights) = self.cross_attention(tape, fp, fv, mixed)?;
                if let Some(t) = trace.as_deref_mut() {
                    t.cross_attention = weights.iter().map(|&w| tape.value(w).data().to_vec()).collect();
                }
                fm
            }
            None => fv,
        };
        if let Some(t) = trace {
            t.readout = tape.value(readout).data().to_vec();
            t.gate_alpha = self.gate_alpha();
            let lambdas = self.lambdas();
            t.lambda_a = lambdas.iter().map(|l| l.0).collect();
            t.lambda_b = lambdas.iter().map(|l| l.1).collect();
        }
        let h = self.head.0.forward(tape, &self.store, fused)?;
        let h = tape.relu(h)?;
        let h = tape.dropout(h, self.config.dropout_ffn)?;
        Ok(self.head.1.forward(tape, &self.store, h)?)
    }
}

impl Parameterized for Mlfgnn {
    fn params(&self) -> &ParamStore {
        &self.store
    }
    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

impl From<ModelError> for AdError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Ad(a) => a,
            other => AdError::InvalidArgument(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests;
