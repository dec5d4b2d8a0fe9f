//! Finite-difference verification of reverse-mode gradients.
//!
//! Derivatives use the fourth-order central stencil
//! `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`, whose truncation error
//! is small enough to allow steps where roundoff stays negligible.

use super::params::Parameters;
use super::tape::{Tape, Var};
use crate::error::Result;

/// Denominator floor of the relative error, so coordinates with near-zero
/// gradient are compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate attaining the maximum, in flattened order.
    pub worst_coord: usize,
    pub checked: usize,
    pub passed: bool,
}

/// |a − n| / max(|a|, |n|, [`REL_ERR_FLOOR`]).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

fn summarize(pairs: impl Iterator<Item = (usize, f64, f64)>, tol: f64) -> GradCheckReport {
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_coord: 0, checked: 0, passed: true };
    for (coord, a, n) in pairs {
        let e = relative_error(a, n);
        report.checked += 1;
        if e > report.max_rel_error || e.is_nan() {
            report.max_rel_error = e;
            report.worst_coord = coord;
        }
    }
    report.passed = report.max_rel_error <= tol;
    report
}

/// Checks the gradient of a scalar function of one vector input.
///
/// `f` receives a fresh tape and the input node and returns the scalar
/// output node.
pub fn gradient_check<F>(f: F, x: &[f64], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&mut Tape<'t, f64>, Var) -> Var,
{
    let mut tape = Tape::new();
    let xv = tape.input(x.to_vec());
    let out = f(&mut tape, xv);
    let analytic = tape.backward(out)?.wrt(xv, x.len());

    let eval = |p: &[f64]| {
        let mut t = Tape::new();
        let v = t.input(p.to_vec());
        let o = f(&mut t, v);
        t.scalar(o)
    };
    let mut probe = x.to_vec();
    let numeric: Vec<f64> = (0..x.len())
        .map(|i| {
            let orig = probe[i];
            let d = stencil(h, |dx| {
                probe[i] = orig + dx;
                eval(&probe)
            });
            probe[i] = orig;
            d
        })
        .collect();
    Ok(summarize((0..x.len()).map(|i| (i, analytic[i], numeric[i])), tol))
}

/// Checks gradients of a model loss with respect to the model parameters.
///
/// `loss` builds the loss on the given tape, binding the model's
/// parameters, and returns the loss node with the parameter nodes in
/// [`Parameters::tensors`] order. At most `max_coords` coordinates, spread
/// evenly over the flattened parameter vector, are probed.
pub fn check_parameter_gradients<M, F>(
    model: &M,
    loss: F,
    h: f64,
    tol: f64,
    max_coords: usize,
) -> Result<GradCheckReport>
where
    M: Parameters<f64> + Clone,
    F: for<'a> Fn(&'a M, &mut Tape<'a, f64>) -> (Var, Vec<Var>),
{
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let analytic: Vec<f64> = {
        let mut tape = Tape::new();
        let (out, vars) = loss(model, &mut tape);
        let grads = tape.backward(out)?;
        vars.iter().zip(&sizes).flat_map(|(&v, &n)| grads.wrt(v, n)).collect()
    };
    let eval = |m: &M| {
        let mut tape = Tape::new();
        let (out, _) = loss(m, &mut tape);
        tape.scalar(out)
    };
    let stride = (total / max_coords.max(1)).max(1);
    let coords: Vec<usize> = (0..total).step_by(stride).take(max_coords).collect();
    let mut probe = model.clone();
    let mut pairs = Vec::with_capacity(coords.len());
    for &c in &coords {
        let (ti, j) = locate(&sizes, c);
        let orig = probe.tensors()[ti].data[j];
        let d = stencil(h, |dx| {
            probe.tensors_mut()[ti].data[j] = orig + dx;
            eval(&probe)
        });
        probe.tensors_mut()[ti].data[j] = orig;
        pairs.push((c, analytic[c], d));
    }
    Ok(summarize(pairs.into_iter(), tol))
}

fn stencil(h: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (p1, m1, p2, m2) = (f(h), f(-h), f(2.0 * h), f(-2.0 * h));
    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
}

fn locate(sizes: &[usize], mut c: usize) -> (usize, usize) {
    for (i, &n) in sizes.iter().enumerate() {
        if c < n {
            return (i, c);
        }
        c -= n;
    }
    panic!("coordinate out of range")
}
