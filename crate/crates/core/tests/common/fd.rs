//! Central finite-difference oracle, independent of the analytic derivatives.
//!
//! Every check compares an analytic entry against a central difference with a
//! relative step of 1e-6. The allowed error is `rel · max(|analytic|, |fd|)`
//! plus the cancellation noise of the difference quotient, estimated from the
//! magnitudes of the additive terms being differenced.

#![allow(dead_code)]

use hivctl_core::model::Vec4;
use hivctl_core::ocp::{costate_rhs, hamiltonian, terminal_cost};
use hivctl_core::{ControlVector, CostWeights, CostateVector, ModelParams, StateVector};

pub const REL_STEP: f64 = 1e-6;

pub fn step(v: f64) -> f64 {
    REL_STEP * v.abs().max(1.0)
}

/// Sum of absolute values of the additive terms of each right-hand-side row,
/// written out by hand from the model equations.
pub fn rhs_term_scale(x: &[f64; 4], u: &[f64; 4], p: &ModelParams) -> [f64; 4] {
    let [x1, x2, x3, x4] = *x;
    let [u1, u2, u3, u4] = *u;
    let inf = (p.a2 * x1 * x2 * (1.0 - u2)).abs();
    [
        (p.a1 * x1).abs() + inf + (p.a3 * p.a4 * x4 * (1.0 - u1)).abs(),
        (p.a5 / (1.0 + x1)).abs()
            + inf * (1.0 - u4).abs()
            + (p.a6 * x2).abs()
            + (p.a7 * x2 * (1.0 + u3)).abs() * (1.0 + (x2 + x3 + x4).abs() / p.a8),
        inf * (1.0 - u4).abs() + ((p.a9 + p.a6) * x3).abs(),
        (p.a9 * x3).abs() + (p.a4 * x4).abs(),
    ]
}

fn noise(scale: f64, h: f64) -> f64 {
    64.0 * f64::EPSILON * scale / h
}

pub fn close(analytic: f64, fd: f64, rel: f64, noise_floor: f64) -> bool {
    (analytic - fd).abs() <= rel * analytic.abs().max(fd.abs()) + noise_floor
}

fn rhs(x: &[f64; 4], u: &[f64; 4], p: &ModelParams) -> [f64; 4] {
    p.rhs(&StateVector::from_array(*x), &ControlVector::from_array(*u))
        .unwrap()
        .to_array()
}

/// Entry `(i, j)` of `∂f/∂x` by central differences, with its noise floor.
pub fn state_jacobian_fd(x: &[f64; 4], u: &[f64; 4], p: &ModelParams) -> [[(f64, f64); 4]; 4] {
    let mut out = [[(0.0, 0.0); 4]; 4];
    for j in 0..4 {
        let h = step(x[j]);
        let (mut xp, mut xm) = (*x, *x);
        xp[j] += h;
        xm[j] -= h;
        let (fp, fm) = (rhs(&xp, u, p), rhs(&xm, u, p));
        let (sp, sm) = (rhs_term_scale(&xp, u, p), rhs_term_scale(&xm, u, p));
        for i in 0..4 {
            out[i][j] = ((fp[i] - fm[i]) / (2.0 * h), noise(sp[i].max(sm[i]), h));
        }
    }
    out
}

/// Entry `(i, j)` of `∂f/∂u` by central differences, with its noise floor.
pub fn control_jacobian_fd(x: &[f64; 4], u: &[f64; 4], p: &ModelParams) -> [[(f64, f64); 4]; 4] {
    let mut out = [[(0.0, 0.0); 4]; 4];
    for j in 0..4 {
        let h = step(u[j]);
        let (mut up, mut um) = (*u, *u);
        up[j] += h;
        um[j] -= h;
        let (fp, fm) = (rhs(x, &up, p), rhs(x, &um, p));
        let (sp, sm) = (rhs_term_scale(x, &up, p), rhs_term_scale(x, &um, p));
        for i in 0..4 {
            out[i][j] = ((fp[i] - fm[i]) / (2.0 * h), noise(sp[i].max(sm[i]), h));
        }
    }
    out
}

fn ham(x: &[f64; 4], u: &[f64; 4], l: &[f64; 4], w: &CostWeights, p: &ModelParams) -> f64 {
    hamiltonian(
        &StateVector::from_array(*x),
        &ControlVector::from_array(*u),
        &CostateVector::from_array(*l),
        w,
        p,
    )
}

fn ham_scale(x: &[f64; 4], u: &[f64; 4], l: &[f64; 4], w: &CostWeights, p: &ModelParams) -> f64 {
    let rows = rhs_term_scale(x, u, p);
    let quad: f64 = (0..4)
        .map(|i| 0.5 * (w.q[i] * x[i] * x[i] + w.r[i] * u[i] * u[i]))
        .sum();
    quad + (0..4).map(|i| l[i].abs() * rows[i]).sum::<f64>()
}

/// `∂H/∂x` by central differences with noise floors.
pub fn hamiltonian_state_gradient_fd(
    x: &[f64; 4],
    u: &[f64; 4],
    l: &[f64; 4],
    w: &CostWeights,
    p: &ModelParams,
) -> [(f64, f64); 4] {
    let mut out = [(0.0, 0.0); 4];
    for j in 0..4 {
        let h = step(x[j]);
        let (mut xp, mut xm) = (*x, *x);
        xp[j] += h;
        xm[j] -= h;
        let d = (ham(&xp, u, l, w, p) - ham(&xm, u, l, w, p)) / (2.0 * h);
        let s = ham_scale(&xp, u, l, w, p).max(ham_scale(&xm, u, l, w, p));
        out[j] = (d, noise(s, h));
    }
    out
}

/// `∂H/∂u` by central differences with noise floors.
pub fn hamiltonian_control_gradient_fd(
    x: &[f64; 4],
    u: &[f64; 4],
    l: &[f64; 4],
    w: &CostWeights,
    p: &ModelParams,
) -> [(f64, f64); 4] {
    let mut out = [(0.0, 0.0); 4];
    for j in 0..4 {
        let h = step(u[j]);
        let (mut up, mut um) = (*u, *u);
        up[j] += h;
        um[j] -= h;
        let d = (ham(x, &up, l, w, p) - ham(x, &um, l, w, p)) / (2.0 * h);
        let s = ham_scale(x, &up, l, w, p).max(ham_scale(x, &um, l, w, p));
        out[j] = (d, noise(s, h));
    }
    out
}

/// `∇ terminal_cost` by central differences with noise floors.
pub fn terminal_gradient_fd(x: &[f64; 4], t_f: f64, w: &CostWeights) -> [(f64, f64); 4] {
    let mut out = [(0.0, 0.0); 4];
    let k = |v: &[f64; 4]| terminal_cost(&StateVector::from_array(*v), t_f, w);
    for j in 0..4 {
        let h = step(x[j]);
        let (mut xp, mut xm) = (*x, *x);
        xp[j] += h;
        xm[j] -= h;
        let scale = k(&xp).abs().max(k(&xm).abs());
        out[j] = ((k(&xp) - k(&xm)) / (2.0 * h), noise(scale, h));
    }
    out
}

/// Analytic `−∂H/∂x` from the library, for comparison against the FD gradient.
pub fn costate_rhs_array(
    x: &[f64; 4],
    u: &[f64; 4],
    l: &[f64; 4],
    w: &CostWeights,
    p: &ModelParams,
) -> [f64; 4] {
    costate_rhs(
        &StateVector::from_array(*x),
        &ControlVector::from_array(*u),
        &CostateVector::from_array(*l),
        w,
        p,
    )
    .to_array()
}

pub fn vec4_array(v: &Vec4) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}
