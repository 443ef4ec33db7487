//! Limited-memory BFGS with Armijo backtracking. Every accepted step
//! strictly lowers the objective, so the recorded trace never increases.

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `(f_prev − f) / max(|f_prev|, 1)` falls below this.
    pub tol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 1000,
            tol: 1e-8,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted iteration.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn two_loop(grad: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alpha = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alpha.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alpha.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f` from `x0`. `f` writes the gradient into its second argument
/// and returns the value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut trace = vec![value];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut converged = false;
    let mut iterations = 0;

    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];

    while iterations < opts.max_iter {
        if value == 0.0 || g.iter().all(|&v| v == 0.0) {
            converged = true;
            break;
        }
        let mut accepted = None;
        // quasi-Newton direction first, steepest descent as the fallback
        for attempt in 0..2 {
            let dir = if attempt == 0 && !pairs.is_empty() {
                two_loop(&g, &pairs)
            } else {
                let gn = dot(&g, &g).sqrt();
                let scale = if pairs.is_empty() { 1.0 / gn.max(1.0) } else { 1.0 };
                g.iter().map(|v| -v * scale).collect()
            };
            let slope = dot(&g, &dir);
            if !(slope < 0.0) {
                continue;
            }
            let mut t = 1.0;
            for _ in 0..opts.max_backtracks {
                for i in 0..n {
                    trial[i] = x[i] + t * dir[i];
                }
                let v = f(&trial, &mut g_trial);
                if v.is_finite() && v <= value + opts.armijo * t * slope && v < value {
                    accepted = Some(v);
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            pairs.clear();
        }
        let Some(new_value) = accepted else {
            log::debug!("line search failed after {iterations} iterations");
            converged = true;
            break;
        };

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }

        let improvement = (value - new_value) / value.abs().max(1.0);
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        value = new_value;
        trace.push(value);
        iterations += 1;
        if improvement < opts.tol {
            converged = true;
            break;
        }
    }

    LbfgsResult {
        x,
        value,
        iterations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let opts = LbfgsOptions {
            tol: 1e-14,
            ..Default::default()
        };
        let r = minimize(f, vec![-1.2, 1.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_start_is_converged() {
        let r = minimize(
            |x: &[f64], g: &mut [f64]| {
                g[0] = 2.0 * x[0];
                x[0] * x[0]
            },
            vec![0.0],
            &LbfgsOptions::default(),
        );
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn nonsmooth_abs_value_descends() {
        let r = minimize(
            |x: &[f64], g: &mut [f64]| {
                g[0] = x[0].signum();
                g[1] = 2.0 * (x[1] - 3.0);
                x[0].abs() + (x[1] - 3.0).powi(2)
            },
            vec![2.0, 0.0],
            &LbfgsOptions::default(),
        );
        assert!(r.value < 1e-3, "{}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
