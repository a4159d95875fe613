//! Gradient descent with Barzilai–Borwein steps and a nonmonotone
//! (max-of-recent-values) Armijo safeguard.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct BbOptions {
    pub max_iter: usize,
    /// Stop when `‖g‖_∞ ≤ grad_tol · (1 + |value + value_offset|)`.
    pub grad_tol: f64,
    /// Constant added to the objective when forming the stopping threshold.
    pub value_offset: f64,
    /// Length of the nonmonotone reference window.
    pub memory: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for BbOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            grad_tol: 1e-9,
            value_offset: 0.0,
            memory: 10,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BbOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_sup: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Iterations where the curvature `sᵀy` was not positive and the previous
    /// step length was reused.
    pub fixed_steps: usize,
    /// Set when backtracking could not satisfy the safeguard.
    pub stalled: bool,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes a smooth function given by `eval(x, grad) -> value`.
pub fn minimize_bb<F>(mut eval: F, x0: Vec<f64>, opts: &BbOptions) -> BbOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = eval(&x, &mut g);
    let mut gsup = sup_norm(&g);
    let threshold = |v: f64| opts.grad_tol * (1.0 + (v + opts.value_offset).abs());

    let mut recent: VecDeque<f64> = VecDeque::with_capacity(opts.memory);
    recent.push_back(value);
    let xscale = sup_norm(&x).max(1e-3);
    let mut step = if gsup > 0.0 { 1e-2 * xscale / gsup } else { 1.0 };
    let mut fixed_steps = 0;

    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    while iterations < opts.max_iter && gsup > threshold(value) {
        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gg = dot(&g, &g);
        let slack = 1e-14 * (1.0 + reference.abs());
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            for k in 0..n {
                x_new[k] = x[k] - alpha * g[k];
            }
            let v = eval(&x_new, &mut g_new);
            if v.is_finite() && v <= reference - opts.armijo * alpha * gg + slack {
                accepted = Some(v);
                break;
            }
            alpha *= 0.5;
        }
        let Some(v_new) = accepted else {
            log::debug!("bb: safeguard failed at iteration {iterations}, ‖g‖∞ = {gsup:e}");
            return BbOutcome {
                converged: gsup <= threshold(value),
                x,
                value,
                gradient_sup: gsup,
                iterations,
                fixed_steps,
                stalled: true,
            };
        };
        iterations += 1;

        // s = -alpha g, y = g_new - g
        let mut ss = 0.0;
        let mut sy = 0.0;
        for k in 0..n {
            let s = x_new[k] - x[k];
            ss += s * s;
            sy += s * (g_new[k] - g[k]);
        }
        if sy > 0.0 && ss > 0.0 {
            step = (ss / sy).clamp(1e-30, 1e30);
        } else {
            step = alpha;
            fixed_steps += 1;
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        value = v_new;
        gsup = sup_norm(&g);
        if recent.len() == opts.memory {
            recent.pop_front();
        }
        recent.push_back(value);
        if iterations % 1000 == 0 {
            log::trace!("bb: iteration {iterations}, value {value:.12e}, ‖g‖∞ = {gsup:e}");
        }
    }
    BbOutcome {
        converged: gsup <= threshold(value),
        x,
        value,
        gradient_sup: gsup,
        iterations,
        fixed_steps,
        stalled: false,
    }
}
