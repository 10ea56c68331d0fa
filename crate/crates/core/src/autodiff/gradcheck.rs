//! Central finite-difference verification of tape gradients.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::backend::Backend;
use super::tape::{Tape, Var};

/// Outcome of [`gradcheck`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    /// `max_i |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1e-8)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: Tensor<f64>,
    pub numeric: Tensor<f64>,
}

/// Floor on the relative-error denominator.
pub const REL_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn eval_scalar<T: Scalar, F>(f: &F, point: &Tensor<T>) -> Result<f64>
where
    F: Fn(&Tape<T>, Var) -> Result<Var>,
{
    let tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = f(&tape, x)?;
    Ok(tape.with_value(y, |t| t.sum()).to_f64())
}

/// Compares the reverse-mode gradient of `f` at `point` with central
/// differences of step `eps`. Non-scalar outputs are sum-reduced.
pub fn gradcheck<T: Scalar, F>(f: F, point: &Tensor<T>, eps: f64) -> Result<GradcheckReport>
where
    F: Fn(&Tape<T>, Var) -> Result<Var>,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Invalid(format!("gradcheck step must be positive, got {eps}")));
    }
    let tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = f(&tape, x)?;
    let y = if tape.with_value(y, |t| t.len()) == 1 { y } else { tape.sum(&y) };
    let seed = Tensor::full(&tape.dims(&y), T::one());
    let analytic = tape.backward(y, &seed)?.get(x).cast::<f64>();
    if let Some(i) = analytic.first_non_finite() {
        return Err(Error::NonFinite { what: "analytic gradient".into(), index: i });
    }

    let mut numeric = vec![0.0; point.len()];
    let mut probe = point.clone();
    for (i, slot) in numeric.iter_mut().enumerate() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = T::of(orig.to_f64() + eps);
        let plus = eval_scalar(&f, &probe)?;
        probe.data_mut()[i] = T::of(orig.to_f64() - eps);
        let minus = eval_scalar(&f, &probe)?;
        probe.data_mut()[i] = orig;
        let d = (plus - minus) / (2.0 * eps);
        if !d.is_finite() {
            return Err(Error::NonFinite { what: "finite difference".into(), index: i });
        }
        *slot = d;
    }
    let numeric = Tensor::from_parts(point.dims().to_vec(), numeric);

    let (mut worst, mut worst_index) = (0.0f64, 0usize);
    for (i, (&a, &n)) in analytic.data().iter().zip(numeric.data()).enumerate() {
        let e = relative_error(a, n);
        if e > worst {
            worst = e;
            worst_index = i;
        }
    }
    Ok(GradcheckReport { max_rel_error: worst, worst_index, analytic, numeric })
}
