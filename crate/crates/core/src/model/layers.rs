use rand::Rng;

use crate::autodiff::{AdError, Axis, Init, ParamId, ParamStore, Tape, Var};

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, input: usize, output: usize, bias: bool) -> Result<Self, AdError> {
        let w = store.add(&format!("{name}.w"), &[input, output], Init::FanInUniform, rng)?;
        let b = if bias {
            Some(store.add(&format!("{name}.b"), &[1, output], Init::Constant(0.0), rng)?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, AdError> {
        let w = tape.param(store, self.w);
        let y = tape.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = tape.param(store, b);
                tape.add(y, b)
            }
            None => Ok(y),
        }
    }
}

/// Gated recurrent unit acting row-wise on `[rows x dim]` inputs and states.
#[derive(Debug, Clone)]
pub struct Gru {
    pub update: Linear,
    pub reset: Linear,
    pub candidate: Linear,
}

impl Gru {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, input: usize, hidden: usize) -> Result<Self, AdError> {
        Ok(Gru {
            update: Linear::new(store, rng, &format!("{name}.z"), input + hidden, hidden, true)?,
            reset: Linear::new(store, rng, &format!("{name}.r"), input + hidden, hidden, true)?,
            candidate: Linear::new(store, rng, &format!("{name}.n"), input + hidden, hidden, true)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, c: Var, h: Var) -> Result<Var, AdError> {
        let ch = tape.concat(&[c, h], Axis::Cols)?;
        let z = self.update.forward(tape, store, ch)?;
        let z = tape.sigmoid(z)?;
        let r = self.reset.forward(tape, store, ch)?;
        let r = tape.sigmoid(r)?;
        let rh = tape.mul(r, h)?;
        let crh = tape.concat(&[c, rh], Axis::Cols)?;
        let n = self.candidate.forward(tape, store, crh)?;
        let n = tape.tanh(n)?;
        // (1 - z) h + z n
        let keep = tape.scale_shift(z, -1.0, 1.0)?;
        let a = tape.mul(keep, h)?;
        let b = tape.mul(z, n)?;
        tape.add(a, b)
    }
}

/// `gamma * tanh(alpha * x) + beta` with scalar alpha and per-channel gamma, beta.
#[derive(Debug, Clone)]
pub struct DynamicTanh {
    pub alpha: ParamId,
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl DynamicTanh {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, dim: usize) -> Result<Self, AdError> {
        Ok(DynamicTanh {
            alpha: store.add(&format!("{name}.alpha"), &[1, 1], Init::Constant(0.5), rng)?,
            gamma: store.add(&format!("{name}.gamma"), &[1, dim], Init::Constant(1.0), rng)?,
            beta: store.add(&format!("{name}.beta"), &[1, dim], Init::Constant(0.0), rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, AdError> {
        let alpha = tape.param(store, self.alpha);
        let gamma = tape.param(store, self.gamma);
        let beta = tape.param(store, self.beta);
        let ax = tape.mul(alpha, x)?;
        let t = tape.tanh(ax)?;
        let g = tape.mul(t, gamma)?;
        tape.add(g, beta)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new<R: Rng>(store: &mut ParamStore, rng: &mut R, name: &str, dim: usize) -> Result<Self, AdError> {
        Ok(LayerNorm {
            gamma: store.add(&format!("{name}.gamma"), &[1, dim], Init::Constant(1.0), rng)?,
            beta: store.add(&format!("{name}.beta"), &[1, dim], Init::Constant(0.0), rng)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, AdError> {
        let n = tape.layer_norm(x, LAYER_NORM_EPS)?;
        let gamma = tape.param(store, self.gamma);
        let beta = tape.param(store, self.beta);
        let g = tape.mul(n, gamma)?;
        tape.add(g, beta)
    }
}

#[derive(Debug, Clone)]
pub enum Norm {
    DynamicTanh(DynamicTanh),
    Layer(LayerNorm),
}

impl Norm {
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var, AdError> {
        match self {
            Norm::DynamicTanh(n) => n.forward(tape, store, x),
            Norm::Layer(n) => n.forward(tape, store, x),
        }
    }
}
