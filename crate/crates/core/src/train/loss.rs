use crate::autodiff::{Tape, Tensor, Var};
use crate::model::TaskType;

use super::TrainError;

/// Summed loss over the labelled entries of `out` (row-major against
/// `labels`) and the number of those entries. Classification takes raw
/// logits: `softplus(x) - y x`.
pub fn masked_loss_sum(tape: &mut Tape, out: Var, labels: &[Option<f64>], task: TaskType) -> Result<(Var, usize), TrainError> {
    let shape = tape.shape(out).to_vec();
    let len: usize = shape.iter().product();
    if len != labels.len() {
        return Err(TrainError::LabelWidth {
            expected: len,
            found: labels.len(),
        });
    }
    let count = labels.iter().filter(|l| l.is_some()).count();
    if count == 0 {
        return Err(TrainError::AllMasked);
    }
    let mask = tape.constant(Tensor::new(shape.clone(), labels.iter().map(|l| l.map_or(0.0, |_| 1.0)).collect())?);
    let y = tape.constant(Tensor::new(shape.clone(), labels.iter().map(|l| l.unwrap_or(0.0)).collect())?);
    let per_entry = match task {
        TaskType::Regression => {
            let d = tape.sub(out, y)?;
            tape.mul(d, d)?
        }
        TaskType::Classification => {
            let sp = tape.softplus(out)?;
            let yx = tape.mul(y, out)?;
            tape.sub(sp, yx)?
        }
    };
    let masked = tape.mul(per_entry, mask)?;
    Ok((tape.sum(masked, None)?, count))
}

/// Mean loss over the labelled entries.
pub fn masked_loss(tape: &mut Tape, out: Var, labels: &[Option<f64>], task: TaskType) -> Result<Var, TrainError> {
    let (sum, count) = masked_loss_sum(tape, out, labels, task)?;
    Ok(tape.scale(sum, 1.0 / count as f64)?)
}
