use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AdError, ParamStore, Tape, Tensor, Var};

/// Anything that owns a [`ParamStore`].
pub trait Parameterized {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
}

impl Parameterized for ParamStore {
    fn params(&self) -> &ParamStore {
        self
    }
    fn params_mut(&mut self) -> &mut ParamStore {
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Check at most this many coordinates per tensor, chosen with `seed`.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            rtol: 1e-5,
            atol: 1e-8,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradFailure {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Largest `|a - n| / max(|a|, |n|)` over coordinates whose magnitude exceeds `atol`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub failures: Vec<GradFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, opts: &GradCheckOptions, tensor: &str, index: usize, analytic: f64, numeric: f64) {
        self.checked += 1;
        let diff = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        self.max_abs_error = self.max_abs_error.max(diff);
        if scale > opts.atol {
            self.max_rel_error = self.max_rel_error.max(diff / scale);
        }
        if !(diff <= opts.atol + opts.rtol * scale) {
            self.failures.push(GradFailure {
                tensor: tensor.to_string(),
                index,
                analytic,
                numeric,
            });
        }
    }

    fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.failures.extend(other.failures);
    }
}

fn coordinates(len: usize, opts: &GradCheckOptions, salt: u64) -> Vec<usize> {
    match opts.max_coords {
        Some(k) if k < len => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut idx = sample(&mut rng, len, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

fn scalar_of(tape: &Tape, v: Var) -> Result<f64, AdError> {
    tape.value(v).item()
}

/// Compares the reverse-mode gradient of a scalar function of one tensor
/// with central differences.
pub fn grad_check<F>(f: F, point: &Tensor, opts: &GradCheckOptions) -> Result<GradCheckReport, AdError>
where
    F: Fn(&mut Tape, Var) -> Result<Var, AdError>,
{
    let mut tape = Tape::new();
    let x = tape.input(point.clone());
    let y = f(&mut tape, x)?;
    let grads = tape.gradients(y)?;
    let analytic = grads.get(x).cloned().unwrap_or_else(|| Tensor::zeros(point.shape()));

    let eval = |p: Tensor| -> Result<f64, AdError> {
        let mut tape = Tape::new();
        let x = tape.constant(p);
        let y = f(&mut tape, x)?;
        scalar_of(&tape, y)
    };
    let mut report = GradCheckReport::default();
    for i in coordinates(point.len(), opts, 0) {
        let mut plus = point.clone();
        plus.data_mut()[i] += opts.step;
        let mut minus = point.clone();
        minus.data_mut()[i] -= opts.step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * opts.step);
        report.record(opts, "x", i, analytic.data()[i], numeric);
    }
    Ok(report)
}

/// Gradient check over every parameter owned by `model`. `f` must be
/// deterministic (build an evaluation tape, so dropout is off).
pub fn grad_check_params<M, F>(model: &mut M, f: F, opts: &GradCheckOptions) -> Result<GradCheckReport, AdError>
where
    M: Parameterized,
    F: Fn(&mut Tape, &M) -> Result<Var, AdError>,
{
    let ids: Vec<_> = model.params().ids().collect();
    let saved: Vec<Tensor> = ids.iter().map(|&id| model.params().grad(id).clone()).collect();
    model.params_mut().zero_grads();
    let mut tape = Tape::new();
    let y = f(&mut tape, model)?;
    tape.backward(y, model.params_mut())?;
    drop(tape);
    let analytic: Vec<Tensor> = ids.iter().map(|&id| model.params().grad(id).clone()).collect();
    for (&id, g) in ids.iter().zip(saved) {
        *model.params_mut().grad_mut(id) = g;
    }

    let eval = |model: &M| -> Result<f64, AdError> {
        let mut tape = Tape::new();
        let y = f(&mut tape, model)?;
        scalar_of(&tape, y)
    };
    let mut report = GradCheckReport::default();
    for (k, &id) in ids.iter().enumerate() {
        let name = model.params().name(id).to_string();
        let mut part = GradCheckReport::default();
        for i in coordinates(model.params().value(id).len(), opts, k as u64 + 1) {
            let original = model.params().value(id).data()[i];
            model.params_mut().value_mut(id).data_mut()[i] = original + opts.step;
            let up = eval(model);
            model.params_mut().value_mut(id).data_mut()[i] = original - opts.step;
            let down = eval(model);
            model.params_mut().value_mut(id).data_mut()[i] = original;
            let numeric = (up? - down?) / (2.0 * opts.step);
            part.record(opts, &name, i, analytic[k].data()[i], numeric);
        }
        report.merge(part);
    }
    Ok(report)
}
