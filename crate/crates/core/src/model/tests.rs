use super::*;
use crate::autodiff::{grad_check_params, GradCheckOptions};
use crate::chem::parse_smiles;
use crate::featurize::FeaturizedMolecule;

fn small_config() -> ModelConfig {
    ModelConfig {
        transformer_layers: 1,
        heads: 2,
        head_dim: 4,
        gat_out_dim: 6,
        hidden_dim: 8,
        fingerprint_embed_dim: 8,
        fingerprints: crate::featurize::FingerprintConfig::default().with_components("keys").unwrap(),
        ..ModelConfig::default()
    }
}

fn input_for(smiles: &str, config: &ModelConfig) -> ModelInput {
    let g = parse_smiles(smiles).unwrap();
    ModelInput::new(&FeaturizedMolecule::new(&g, &config.fingerprints)).unwrap()
}

fn zero_params(model: &mut Mlfgnn, prefix: &str) {
    let ids: Vec<_> = model.store.ids().filter(|&id| model.store.name(id).starts_with(prefix)).collect();
    for id in ids {
        model.store.value_mut(id).data_mut().fill(0.0);
    }
}

fn set_scalar(model: &mut Mlfgnn, id: ParamId, v: f64) {
    model.store.value_mut(id).data_mut()[0] = v;
}

#[test]
fn output_width_and_determinism() {
    let mut config = small_config();
    config.n_tasks = 3;
    let model = Mlfgnn::new(config.clone(), 1).unwrap();
    for s in ["C", "CCO", "c1ccccc1C(=O)O"] {
        let x = input_for(s, &config);
        let a = model.predict(&x).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, model.predict(&x).unwrap());
    }
}

#[test]
fn rejects_bad_config_and_width() {
    let mut config = small_config();
    config.hidden_dim = 9;
    assert!(matches!(Mlfgnn::new(config, 0), Err(ModelError::InvalidConfig(_))));
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 0).unwrap();
    let mut x = input_for("CC", &config);
    x.fingerprint = Tensor::row(&[0.0; 3]);
    assert!(matches!(model.predict(&x), Err(ModelError::FingerprintWidth { .. })));
}

#[test]
fn fingerprint_embedding_of_zero_is_zero() {
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 2).unwrap();
    let mut tape = Tape::new();
    let u = tape.constant(Tensor::zeros(&[1, config.fingerprint_dim()]));
    let fp = model.fingerprint_embed(&mut tape, u).unwrap();
    assert_eq!(tape.value(fp).shape(), &[1, 8]);
    assert!(tape.value(fp).data().iter().all(|&x| x == 0.0));
}

#[test]
fn gat_init_cases() {
    let config = small_config();
    let mut model = Mlfgnn::new(config.clone(), 3).unwrap();
    let mut tape = Tape::new();
    let (h0, edges) = model.gat_init(&mut tape, &input_for("[Na+]", &config)).unwrap();
    assert_eq!(tape.value(h0).shape(), &[1, 6]);
    assert_eq!(tape.value(edges.unwrap()).shape(), &[0, 6]);

    let x = input_for("CO", &config);
    let (_, edges) = model.gat_init(&mut tape, &x).unwrap();
    let e = tape.value(edges.unwrap()).clone();
    assert_eq!(x.sources, vec![0, 1]);
    assert_ne!(e.row_slice(0), e.row_slice(1));

    zero_params(&mut model, "atoms.fc1");
    zero_params(&mut model, "gat.fc2");
    let mut tape = Tape::new();
    let (h0, edges) = model.gat_init(&mut tape, &x).unwrap();
    assert!(tape.value(h0).data().iter().all(|&v| v == 0.0));
    assert!(tape.value(edges.unwrap()).data().iter().all(|&v| v == 0.0));
}

#[test]
fn gat_attention_singleton_and_symmetric() {
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 4).unwrap();
    // propane: the terminal carbons see one neighbour; the centre sees two identical ones
    let x = input_for("CCC", &config);
    let mut tape = Tape::new();
    let (h0, edges) = model.gat_init(&mut tape, &x).unwrap();
    let (_, att) = model.gat_layer(&mut tape, 0, h0, edges.unwrap(), &x).unwrap();
    let w = tape.value(att).data().to_vec();
    for (e, (&s, &t)) in x.sources.iter().zip(&x.targets).enumerate() {
        if t == 1 {
            assert!((w[e] - 0.5).abs() < 1e-15, "edge {s}->{t}: {}", w[e]);
        } else {
            assert_eq!(w[e], 1.0);
        }
    }
}

fn matvec(x: &[f64], w: &Tensor, b: Option<&Tensor>) -> Vec<f64> {
    let (r, c) = w.dims2().unwrap();
    assert_eq!(r, x.len());
    (0..c)
        .map(|j| (0..r).map(|i| x[i] * w.get(i, j)).sum::<f64>() + b.map_or(0.0, |b| b.data()[j]))
        .collect()
}

fn naive_gru(model: &Mlfgnn, gru: &Gru, c: &[f64], h: &[f64]) -> Vec<f64> {
    let s = &model.store;
    let lin = |l: &Linear, x: &[f64]| matvec(x, s.value(l.w), l.b.map(|b| s.value(b)));
    let ch: Vec<f64> = c.iter().chain(h).copied().collect();
    let z: Vec<f64> = lin(&gru.update, &ch).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = lin(&gru.reset, &ch).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let crh: Vec<f64> = c.iter().chain(&rh).copied().collect();
    let n: Vec<f64> = lin(&gru.candidate, &crh).into_iter().map(f64::tanh).collect();
    (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * n[i]).collect()
}

#[test]
fn gat_layer_matches_per_edge_loop() {
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 5).unwrap();
    // star: central carbon with three neighbours
    let x = input_for("CC(C)C", &config);
    let mut tape = Tape::new();
    let (h0, edges) = model.gat_init(&mut tape, &x).unwrap();
    let edges = edges.unwrap();
    let (h1, _) = model.gat_layer(&mut tape, 0, h0, edges, &x).unwrap();

    let gl = &model.gat_layers()[0];
    let h = tape.value(h0).clone();
    let nb = tape.value(edges).clone();
    let slope = config.leaky_slope;
    for v in 0..x.n_atoms {
        let incoming: Vec<usize> = (0..x.targets.len()).filter(|&e| x.targets[e] == v).collect();
        let scores: Vec<f64> = incoming
            .iter()
            .map(|&e| {
                let pair: Vec<f64> = h.row_slice(v).iter().chain(nb.row_slice(e)).copied().collect();
                let s = matvec(&pair, model.store.value(gl.attention.w), None)[0];
                if s > 0.0 {
                    s
                } else {
                    slope * s
                }
            })
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let mut c = vec![0.0; 6];
        for (k, &e) in incoming.iter().enumerate() {
            let a = (scores[k] - max).exp() / z;
            let m = matvec(nb.row_slice(e), model.store.value(gl.transform.w), None);
            for (ci, mi) in c.iter_mut().zip(m) {
                *ci += a * mi;
            }
        }
        let c: Vec<f64> = c.into_iter().map(|x| if x > 0.0 { x } else { x.exp_m1() }).collect();
        let expected = naive_gru(&model, &gl.gru, &c, h.row_slice(v));
        for (a, b) in tape.value(h1).row_slice(v).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn transformer_boundary_identities() {
    let config = small_config();
    let mut model = Mlfgnn::new(config.clone(), 6).unwrap();
    let x = input_for("CC(=O)N", &config);
    let la = model.transformer_layers()[0].lambda_a;
    let lb = model.transformer_layers()[0].lambda_b.unwrap();
    let dk = config.head_dim;

    set_scalar(&mut model, la, 0.0);
    set_scalar(&mut model, lb, 1.0);
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::new(vec![4, 8], (0..32).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap());
    let adj = tape.constant(x.adjacency.clone());
    let (heads, _) = model.transformer_heads(&mut tape, 0, h, adj).unwrap();
    let v_all = crate::autodiff::Tensor::new(vec![4, 8], {
        let hv = tape.value(h).clone();
        let w = model.store.value(model.transformer_layers()[0].value.w).clone();
        let mut out = Vec::new();
        for r in 0..4 {
            out.extend(matvec(hv.row_slice(r), &w, None));
        }
        out
    })
    .unwrap();
    for (i, &head) in heads.iter().enumerate() {
        let mut tape2 = Tape::new();
        let a = tape2.constant(x.adjacency.clone());
        let v = tape2.constant(v_all.clone());
        let vi = tape2.slice(v, Axis::Cols, i * dk, dk).unwrap();
        let av = tape2.matmul(a, vi).unwrap();
        assert_eq!(tape.value(head).data(), tape2.value(av).data());
    }

    set_scalar(&mut model, la, 1.0);
    set_scalar(&mut model, lb, 0.0);
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::new(vec![4, 8], (0..32).map(|i| (i as f64 * 0.11).cos()).collect()).unwrap());
    let adj = tape.constant(x.adjacency.clone());
    let (heads, maps) = model.transformer_heads(&mut tape, 0, h, adj).unwrap();
    for (&head, &map) in heads.iter().zip(&maps) {
        for r in 0..4 {
            let s: f64 = tape.value(map).row_slice(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(tape.value(head).shape(), &[4, dk]);
    }
}

#[test]
fn single_node_transformer() {
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 7).unwrap();
    let x = input_for("[Cl-]", &config);
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::row(&[0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8]));
    let adj = tape.constant(x.adjacency.clone());
    let (heads, maps) = model.transformer_heads(&mut tape, 0, h, adj).unwrap();
    let w = model.store.value(model.transformer_layers()[0].value.w).clone();
    let v = matvec(tape.value(h).data(), &w, None);
    for (i, (&head, &map)) in heads.iter().zip(&maps).enumerate() {
        assert_eq!(tape.value(map).data(), &[1.0]);
        for (k, &o) in tape.value(head).data().iter().enumerate() {
            assert!((o - 1.0 * v[i * 4 + k]).abs() < 1e-15);
        }
    }
}

#[test]
fn gate_boundaries_select_streams() {
    let config = small_config();
    let mut model = Mlfgnn::new(config.clone(), 8).unwrap();
    let gate = model.gate_param().unwrap();
    for (logit, expect_local) in [(1e4, true), (-1e4, false)] {
        set_scalar(&mut model, gate, logit);
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::new(vec![3, 6], (0..18).map(|i| i as f64 * 0.1 - 0.5).collect()).unwrap());
        let t = tape.constant(Tensor::new(vec![3, 8], (0..24).map(|i| 0.3 - i as f64 * 0.05).collect()).unwrap());
        let mixed = model.mixture(&mut tape, &[a, a], Some(t)).unwrap();
        let local = model.mixture(&mut tape, &[a], None).unwrap();
        let ft = tape.gelu(t).unwrap();
        let pure = if expect_local { local } else { ft };
        assert_eq!(tape.value(mixed).data(), tape.value(pure).data());
    }
}

#[test]
fn readout_weights() {
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 9).unwrap();
    let mut tape = Tape::new();
    let one = tape.constant(Tensor::row(&[0.5; 8]));
    let (_, a) = model.readout(&mut tape, one).unwrap();
    assert_eq!(tape.value(a).data(), &[1.0]);
    let two = tape.constant(Tensor::from_rows(&[[0.25; 8], [0.25; 8]]).unwrap());
    let (_, a) = model.readout(&mut tape, two).unwrap();
    assert_eq!(tape.value(a).data(), &[0.5, 0.5]);
}

#[test]
fn cross_attention_tokens() {
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 10).unwrap();
    let x = input_for("O", &config);
    let mut tape = Tape::new();
    let (y, trace) = model.forward_traced(&mut tape, &x).unwrap();
    assert_eq!(tape.value(y).len(), 1);
    assert_eq!(trace.cross_attention.len(), config.heads);
    for w in &trace.cross_attention {
        assert_eq!(w.len(), 2);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert_eq!(trace.readout, vec![1.0]);
    assert_eq!(trace.gate_alpha, Some(0.5));
    assert_eq!(trace.lambda_a, vec![0.5]);

    // identical tokens give uniform attention and the shared value row
    let mut tape = Tape::new();
    let fp = tape.constant(Tensor::row(&[0.3; 8]));
    let fv = tape.constant(Tensor::row(&[0.2; 8]));
    let mixed = tape.constant(Tensor::from_rows(&[[0.2; 8], [0.2; 8]]).unwrap());
    let (fm, weights) = model.cross_attention(&mut tape, fp, fv, mixed).unwrap();
    for &w in &weights {
        for &a in tape.value(w).data() {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }
    assert_eq!(tape.value(fm).len(), 8 + 8 + 8);
}

#[test]
fn permutation_invariance() {
    let config = small_config();
    let model = Mlfgnn::new(config.clone(), 11).unwrap();
    let x = input_for("OC(=O)c1ccccc1N", &config);
    let base = model.predict(&x).unwrap();
    let n = x.n_atoms;
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let px = x.permuted(&perm).unwrap();
    let moved = model.predict(&px).unwrap();
    for (a, b) in base.iter().zip(&moved) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn parameter_count_closed_form() {
    for (streams, fp, norm, adj) in [
        (Streams::Both, true, NormKind::DynamicTanh, true),
        (Streams::GatOnly, true, NormKind::DynamicTanh, true),
        (Streams::TransformerOnly, false, NormKind::LayerNorm, false),
        (Streams::Both, false, NormKind::LayerNorm, true),
    ] {
        let mut config = small_config();
        config.streams = streams;
        config.use_fingerprint = fp;
        config.norm = norm;
        config.use_adjacency = adj;
        config.n_tasks = 2;
        let model = Mlfgnn::new(config.clone(), 0).unwrap();
        let walked: usize = model.store.iter().map(|(_, p)| p.value().len()).sum();
        assert_eq!(walked, config.parameter_count(), "{streams:?} fp={fp}");
    }
    let default = Mlfgnn::new(ModelConfig::default(), 0).unwrap();
    assert_eq!(default.store.scalar_count(), ModelConfig::default().parameter_count());
}

#[test]
fn ablations_drop_parameter_groups() {
    let mut config = small_config();
    config.streams = Streams::GatOnly;
    let model = Mlfgnn::new(config.clone(), 0).unwrap();
    assert!(model.store.iter().all(|(_, p)| !p.name.starts_with("transformer.")));
    assert!(model.gate_alpha().is_none());
    model.predict(&input_for("CCN", &config)).unwrap();

    config.streams = Streams::TransformerOnly;
    config.use_fingerprint = false;
    let model = Mlfgnn::new(config.clone(), 0).unwrap();
    assert!(model.store.iter().all(|(_, p)| !p.name.starts_with("gat.") && !p.name.starts_with("cross.")));
    model.predict(&input_for("CCN", &config)).unwrap();
}

#[test]
fn full_model_gradients() {
    let config = small_config();
    let mut model = Mlfgnn::new(config.clone(), 12).unwrap();
    let x = input_for("CC(N)C=O", &config);
    assert_eq!(x.n_atoms, 5);
    let report = grad_check_params(
        &mut model,
        |tape, m| {
            let y = m.forward(tape, &x)?;
            let sq = tape.mul(y, y)?;
            tape.sum(sq, None)
        },
        &GradCheckOptions {
            step: 1e-6,
            rtol: 1e-4,
            atol: 1e-7,
            max_coords: Some(6),
            seed: 1,
        },
    )
    .unwrap();
    assert!(report.passed(), "{:?}", report.failures);
}
