//! Finite-difference verification of reverse-mode gradients.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |g_a - g_fd| / max(1, |g_a|, |g_fd|)` over all coordinates.
    pub max_rel_error: f64,
    /// Parameter and flat index where the maximum was reached.
    pub worst: Option<(String, usize)>,
    pub coordinates: usize,
}

fn eval<F>(store: &ParamStore, f: &F) -> Result<(Tape, Var)>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    Ok((tape, out))
}

fn scalar(tape: &Tape, v: Var, name: &str) -> Result<f64> {
    let t = tape.value(v);
    if t.len() != 1 {
        return Err(Error::Shape {
            op: "gradient_check",
            left: t.shape().to_vec(),
            right: vec![1],
        });
    }
    let x = t.data()[0];
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("objective while perturbing {name}")));
    }
    Ok(x)
}

/// Compare the tape gradient of the scalar `f` with central finite
/// differences for every coordinate of every parameter in `store`.
pub fn gradient_check<F>(store: &ParamStore, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut analytic = store.zeroed_grad_copy();
    for p in analytic.iter_mut() {
        p.trainable = true;
    }
    let (tape, out) = eval(store, &f)?;
    scalar(&tape, out, "(unperturbed)")?;
    tape.backward(out)?.accumulate(&mut analytic);

    let mut work = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coordinates: 0,
    };
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in &names {
        let grad = analytic.grad(name).expect("same parameter set").clone();
        if !grad.is_finite() {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
        for i in 0..grad.len() {
            let orig = store.get(name).unwrap().data()[i];
            work.get_mut(name).unwrap().data_mut()[i] = orig + FD_STEP;
            let (t, v) = eval(&work, &f)?;
            let plus = scalar(&t, v, name)?;
            work.get_mut(name).unwrap().data_mut()[i] = orig - FD_STEP;
            let (t, v) = eval(&work, &f)?;
            let minus = scalar(&t, v, name)?;
            work.get_mut(name).unwrap().data_mut()[i] = orig;

            let fd = (plus - minus) / (2.0 * FD_STEP);
            let ga = grad.data()[i];
            let rel = (ga - fd).abs() / 1f64.max(ga.abs()).max(fd.abs());
            report.coordinates += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}
