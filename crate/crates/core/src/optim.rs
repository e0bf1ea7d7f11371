//! Nonlinear conjugate-gradient maximization.
//!
//! Directions follow Polak–Ribière (clipped at zero, "PR+") with a periodic
//! restart to steepest ascent. Steps come from a backtracking Armijo search
//! that starts at 1.0; each trial also fits a quadratic through the values
//! seen along the line and tries its vertex, which makes the search exact on
//! quadratic objectives.

use crate::error::{Error, Result};
use crate::scalar::{all_finite, dot, norm2, to_f64_vec, Real};

const MAX_SHRINKS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<T> {
    /// Stop once `‖∇f‖₂ ≤ grad_tol`.
    pub grad_tol: T,
    pub max_iters: usize,
    pub line_search_shrink: T,
    pub armijo_c: T,
    /// Restart period. `None` means the problem dimension.
    pub restart_interval: Option<usize>,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            grad_tol: T::lit(1e-6),
            max_iters: 1000,
            line_search_shrink: T::lit(0.5),
            armijo_c: T::lit(1e-4),
            restart_interval: None,
        }
    }
}

impl<T: Real> OptimizerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: T| x > T::zero() && x < T::one();
        if !(self.grad_tol > T::zero()) {
            return Err(Error::Config("grad_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !in_unit(self.line_search_shrink) || !in_unit(self.armijo_c) {
            return Err(Error::Config("line_search_shrink and armijo_c must lie in (0, 1)".into()));
        }
        if self.restart_interval == Some(0) {
            return Err(Error::Config("restart_interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult<T> {
    pub argmax: Vec<T>,
    pub value: T,
    pub gradient: Vec<T>,
    pub grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at every accepted iterate, starting with `init`.
    pub history: Vec<T>,
}

struct Point<T> {
    x: Vec<T>,
    value: T,
    grad: Vec<T>,
}

/// Maximizes `objective`, which returns `(value, gradient)` at a point.
///
/// Errors: a non-finite value at `init` is an input error; a line search
/// that cannot find an ascent step is reported as [`Error::Stall`] carrying
/// the best iterate. Objective errors at trial points are treated as
/// rejected steps.
pub fn maximize<T, F>(mut objective: F, init: &[T], config: &OptimizerConfig<T>) -> Result<OptimResult<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    config.validate()?;
    if !all_finite(init) {
        return Err(Error::Input("optimizer initial point is not finite".into()));
    }
    let (value, grad) = objective(init)?;
    if !value.is_finite() || !all_finite(&grad) {
        return Err(Error::Input("objective is not finite at the initial point".into()));
    }
    let n = init.len();
    let restart = config.restart_interval.unwrap_or(n.max(1));
    let mut cur = Point {
        x: init.to_vec(),
        value,
        grad,
    };
    let mut history = vec![cur.value];
    let mut dir = cur.grad.clone();
    let mut since_restart = 0usize;

    for iter in 0..config.max_iters {
        let grad_norm = norm2(&cur.grad);
        if grad_norm <= config.grad_tol {
            return Ok(finish(cur, iter, true, history));
        }
        let mut slope = dot(&cur.grad, &dir);
        if !(slope > T::zero()) {
            dir = cur.grad.clone();
            slope = dot(&cur.grad, &dir);
            since_restart = 0;
        }
        let next = match line_search(&mut objective, &cur, &dir, slope, config) {
            Some(p) => p,
            None if since_restart != 0 => {
                // Retry once along the gradient before giving up.
                dir = cur.grad.clone();
                slope = dot(&cur.grad, &dir);
                since_restart = 0;
                match line_search(&mut objective, &cur, &dir, slope, config) {
                    Some(p) => p,
                    None => return Err(stall(&cur, iter)),
                }
            }
            None => return Err(stall(&cur, iter)),
        };

        since_restart += 1;
        let beta = if since_restart >= restart {
            since_restart = 0;
            T::zero()
        } else {
            let denom = dot(&cur.grad, &cur.grad);
            let num: T = next
                .grad
                .iter()
                .zip(&cur.grad)
                .map(|(&gn, &go)| gn * (gn - go))
                .sum();
            (num / denom).max(T::zero())
        };
        if beta == T::zero() {
            since_restart = 0;
        }
        for (d, &g) in dir.iter_mut().zip(&next.grad) {
            *d = g + beta * *d;
        }
        history.push(next.value);
        cur = next;
    }
    let converged = norm2(&cur.grad) <= config.grad_tol;
    Ok(finish(cur, config.max_iters, converged, history))
}

fn finish<T: Real>(p: Point<T>, iterations: usize, converged: bool, history: Vec<T>) -> OptimResult<T> {
    OptimResult {
        grad_norm: norm2(&p.grad),
        argmax: p.x,
        value: p.value,
        gradient: p.grad,
        iterations,
        converged,
        history,
    }
}

fn stall<T: Real>(p: &Point<T>, iterations: usize) -> Error {
    Error::Stall {
        best: to_f64_vec(&p.x),
        value: p.value.as_f64(),
        grad_norm: norm2(&p.grad).as_f64(),
        iterations,
    }
}

fn try_point<T, F>(objective: &mut F, cur: &Point<T>, dir: &[T], alpha: T) -> Option<Point<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let x: Vec<T> = cur.x.iter().zip(dir).map(|(&xi, &di)| xi + alpha * di).collect();
    match objective(&x) {
        Ok((value, grad)) if value.is_finite() && all_finite(&grad) => Some(Point { x, value, grad }),
        _ => None,
    }
}

/// Vertex of the parabola through `(0, f0)` with slope `slope` and `(alpha, fa)`,
/// if the parabola opens downward.
fn parabola_vertex<T: Real>(f0: T, slope: T, alpha: T, fa: T) -> Option<T> {
    let curvature = (fa - f0 - slope * alpha) / (alpha * alpha);
    if curvature < T::zero() {
        let v = -slope / (curvature + curvature);
        (v.is_finite() && v > T::zero()).then_some(v)
    } else {
        None
    }
}

fn line_search<T, F>(
    objective: &mut F,
    cur: &Point<T>,
    dir: &[T],
    slope: T,
    config: &OptimizerConfig<T>,
) -> Option<Point<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let armijo = |alpha: T, value: T| value >= cur.value + config.armijo_c * alpha * slope;
    let mut alpha = T::one();
    for _ in 0..=MAX_SHRINKS {
        match try_point(objective, cur, dir, alpha) {
            Some(p) => {
                let vertex = parabola_vertex(cur.value, slope, alpha, p.value);
                let ok = armijo(alpha, p.value);
                if let Some(v) = vertex {
                    let v = v.min(alpha * T::lit(1e6));
                    if (v - alpha).abs() > T::lit(1e-12) * alpha {
                        if let Some(q) = try_point(objective, cur, dir, v) {
                            if armijo(v, q.value) && (!ok || q.value > p.value) {
                                return Some(q);
                            }
                        }
                    }
                }
                if ok {
                    return Some(p);
                }
                let next = vertex
                    .map(|v| v.max(T::lit(0.1) * alpha).min(config.line_search_shrink * alpha))
                    .unwrap_or(config.line_search_shrink * alpha);
                alpha = next;
            }
            None => alpha *= config.line_search_shrink,
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{spd_factorize, Matrix};
    use proptest::prelude::*;

    #[test]
    fn quadratic_bowl() {
        let c = [1.0, 2.0];
        let f = |x: &[f64]| {
            let d: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            Ok((-dot(&d, &d), d.iter().map(|v| -2.0 * v).collect()))
        };
        let r = maximize(f, &[0.0, 0.0], &OptimizerConfig::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmax[0] - 1.0).abs() < 1e-8 && (r.argmax[1] - 2.0).abs() < 1e-8);
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn constant_objective_stops_at_init() {
        let r = maximize(|_x: &[f64]| Ok((3.0, vec![0.0, 0.0])), &[0.5, -1.0], &OptimizerConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 1);
        assert_eq!(r.argmax, vec![0.5, -1.0]);
    }

    #[test]
    fn non_finite_init_is_input_error() {
        let r = maximize(|_x: &[f64]| Ok((f64::NAN, vec![0.0])), &[0.0], &OptimizerConfig::default());
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn unbounded_objective_hits_iteration_cap() {
        let cfg = OptimizerConfig { max_iters: 5, ..Default::default() };
        let r = maximize(|x: &[f64]| Ok((x[0], vec![1.0])), &[0.0], &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
    }

    #[test]
    fn nonsmooth_objective_may_stall() {
        // f = -|x| has no representable ascent step at the kink once reached.
        let f = |x: &[f64]| Ok((-x[0].abs() - 1.0, vec![if x[0] > 0.0 { -1.0 } else { 1.0 }]));
        match maximize(f, &[0.3], &OptimizerConfig::default()) {
            Err(Error::Stall { best, .. }) => assert!(best[0].abs() < 1e-6),
            Ok(r) => assert!(r.argmax[0].abs() < 1e-6),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn rosenbrock_like_nonquadratic() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = -((1.0 - a).powi(2) + 10.0 * (b - a * a).powi(2));
            let ga = 2.0 * (1.0 - a) + 40.0 * a * (b - a * a);
            let gb = -20.0 * (b - a * a);
            Ok((v, vec![ga, gb]))
        };
        let cfg = OptimizerConfig { max_iters: 5000, ..Default::default() };
        let r = maximize(f, &[-1.0, 1.0], &cfg).unwrap();
        assert!(r.converged);
        assert!((r.argmax[0] - 1.0).abs() < 1e-5 && (r.argmax[1] - 1.0).abs() < 1e-5);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
    }

    fn spd(n: usize, entries: &[f64]) -> Matrix<f64> {
        let b = Matrix::from_row_major(n, entries[..n * n].to_vec()).unwrap();
        let mut a = b.transpose().mul_mat(&b);
        a.add_diagonal(0.5);
        a
    }

    proptest! {
        #[test]
        fn concave_quadratic_matches_direct_solve(
            n in 1usize..7,
            entries in prop::collection::vec(-1.5f64..1.5, 36),
            b in prop::collection::vec(-3.0f64..3.0, 6),
        ) {
            let a = spd(n, &entries);
            let b = b[..n].to_vec();
            let expected = spd_factorize(&a).unwrap().solve(&b);
            let f = |x: &[f64]| {
                let ax = a.mul_vec(x);
                let v = -0.5 * dot(x, &ax) + dot(&b, x);
                Ok((v, b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()))
            };
            let cfg = OptimizerConfig { grad_tol: 1e-10, ..Default::default() };
            let r = maximize(f, &vec![0.0; n], &cfg).unwrap();
            prop_assert!(r.converged);
            prop_assert!(r.iterations <= n + 2, "took {} iterations in dim {}", r.iterations, n);
            for i in 0..n {
                prop_assert!((r.argmax[i] - expected[i]).abs() < 1e-8);
            }
            prop_assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(r.value >= r.history[0] - 1e-12);
        }

        #[test]
        fn deterministic(x0 in prop::collection::vec(-3.0f64..3.0, 3)) {
            let f = |x: &[f64]| {
                let v: f64 = x.iter().map(|t| -(t.exp()) + 2.0 * t - 0.1 * t * t * t * t).sum();
                Ok((v, x.iter().map(|t| -(t.exp()) + 2.0 - 0.4 * t * t * t).collect()))
            };
            let a = maximize(f, &x0, &OptimizerConfig::default()).unwrap();
            let b = maximize(f, &x0, &OptimizerConfig::default()).unwrap();
            prop_assert_eq!(a.argmax, b.argmax);
            prop_assert_eq!(a.history, b.history);
        }
    }
}
