//! Central finite-difference verification of tape gradients (f64 only).

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Denominator floor so that tiny gradients are compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Step used for element value `theta`.
pub fn fd_step(theta: f64) -> f64 {
    1e-4 * theta.abs().max(1.0)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradReport {
    pub max_rel_err: f64,
    /// `(input, element)` of the worst mismatch.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradReport {
    fn record(&mut self, input: usize, index: usize, a: f64, n: f64) {
        let e = rel_err(a, n);
        if e > self.max_rel_err || self.checked == 0 {
            self.max_rel_err = e;
            self.worst = (input, index);
            self.analytic = a;
            self.numeric = n;
        }
        self.checked += 1;
    }
}

/// Compares reverse-mode gradients of the scalar built by `build` against
/// central differences, for every element of every input.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], build: F) -> Result<GradReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let all: Vec<usize> = (0..inputs.len()).collect();
    check_gradients_of(inputs, &all, build)
}

/// As [`check_gradients`], restricted to the inputs listed in `which`.
pub fn check_gradients_of<F>(inputs: &[Tensor<f64>], which: &[usize], build: F) -> Result<GradReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let eval = |ins: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.constant(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        scalar(&tape, out)
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut report = GradReport::default();
    let mut work = inputs.to_vec();
    for &i in which {
        let analytic = match tape.grad(vars[i]) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; inputs[i].len()],
        };
        for (k, &a) in analytic.iter().enumerate() {
            let theta = inputs[i].data()[k];
            let eps = fd_step(theta);
            work[i].data_mut()[k] = theta + eps;
            let up = eval(&work)?;
            work[i].data_mut()[k] = theta - eps;
            let down = eval(&work)?;
            work[i].data_mut()[k] = theta;
            report.record(i, k, a, (up - down) / (2.0 * eps));
        }
    }
    Ok(report)
}

fn scalar(tape: &Tape<f64>, v: Var) -> Result<f64> {
    let t = tape.value(v);
    if t.len() != 1 {
        return Err(Error::NonScalarLoss(t.shape().to_vec()));
    }
    Ok(t.data()[0])
}
