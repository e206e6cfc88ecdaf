use std::collections::VecDeque;

/// Limits for [`minimize`].
#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once the largest gradient entry is below this.
    pub grad_tol: f64,
    /// Stop once an accepted step lowers the value by less than this
    /// fraction of it.
    pub rel_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iters: 200,
            grad_tol: 1e-9,
            rel_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

/// Limited-memory BFGS with Armijo backtracking.
///
/// `f` returns the value and a (sub)gradient. Every accepted step lowers the
/// value, so the result is never worse than `x0`. When the quasi-Newton
/// direction fails to descend the memory is dropped and a steepest-descent
/// step is tried before giving up.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if !fx.is_finite() || g.iter().all(|v| v.abs() <= opts.grad_tol) {
            break;
        }
        let mut step = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if hist.is_empty() {
                    break;
                }
                hist.clear();
            }
            let d = direction(&g, &hist);
            let slope = dot(&g, &d);
            if slope >= 0.0 {
                continue;
            }
            let mut t = if hist.is_empty() {
                1.0 / g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0)
            } else {
                1.0
            };
            for _ in 0..MAX_HALVINGS {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let (fn_, gn) = f(&xn);
                if fn_.is_finite() && fn_ <= fx + ARMIJO_C * t * slope {
                    step = Some((xn, fn_, gn));
                    break;
                }
                t *= 0.5;
            }
            if step.is_some() {
                break;
            }
        }
        let Some((xn, fn_, gn)) = step else {
            break;
        };
        iterations += 1;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - fn_;
        x = xn;
        g = gn;
        let prev = fx;
        fx = fn_;
        if decrease <= opts.rel_tol * prev.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    debug_assert_eq!(x.len(), n);
    LbfgsResult {
        x,
        value: fx,
        iterations,
    }
}

/// Two-loop recursion: `-H g` for the implicit inverse Hessian `H`.
fn direction(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_quadratic() {
        // f = sum_i (i+1) (x_i - i)^2
        let f = |x: &[f64]| {
            let v = x
                .iter()
                .enumerate()
                .map(|(i, xi)| (i as f64 + 1.0) * (xi - i as f64).powi(2))
                .sum();
            let g = x
                .iter()
                .enumerate()
                .map(|(i, xi)| 2.0 * (i as f64 + 1.0) * (xi - i as f64))
                .collect();
            (v, g)
        };
        let r = minimize(f, vec![5.0; 6], LbfgsOptions::default());
        for (i, xi) in r.x.iter().enumerate() {
            assert!((xi - i as f64).abs() < 1e-6, "{xi}");
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (v, g)
        };
        let r = minimize(f, vec![-1.2, 1.0], LbfgsOptions::default());
        assert!(r.value < 1e-10, "{}", r.value);
    }

    #[test]
    fn never_worse_than_start_on_nonsmooth_input() {
        // Sum of absolute values has kinks everywhere near the optimum.
        let f = |x: &[f64]| {
            let v = x.iter().map(|v| (v - 0.3).abs()).sum();
            let g = x.iter().map(|v| (v - 0.3).signum()).collect();
            (v, g)
        };
        let x0 = vec![2.0, -1.0, 0.5];
        let start = f(&x0).0;
        let r = minimize(f, x0, LbfgsOptions::default());
        assert!(r.value <= start);
        assert!(r.value < 0.1 * start);
    }
}
