//! Bounded Nelder-Mead simplex search and a central-difference Hessian.

use serde::Serialize;

use crate::error::{Error, Result};

/// Objective value substituted for non-finite or infeasible evaluations.
pub const PENALTY: f64 = 1e10;

/// Per-parameter box constraints. Infinite bounds are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundBox {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Setup(format!(
                    "bound {i}: lower {lo} must be below upper {hi}"
                )));
            }
        }
        let (lower, upper) = bounds.into_iter().unzip();
        Ok(BoundBox { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        BoundBox {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn clamp(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub termination: Termination,
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial simplex edge per coordinate; derived from the start point
    /// when absent.
    pub initial_step: Option<Vec<f64>>,
    /// Number of scheduled restarts from the best point after the first
    /// convergence.
    pub restarts: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: 1e-8,
            max_iter: 10_000,
            initial_step: None,
            restarts: 1,
        }
    }
}

/// Minimizes `objective` inside `bounds` starting from `start`.
pub fn minimize<F>(objective: F, start: &[f64], bounds: &BoundBox, tol: f64, max_iter: usize) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    minimize_with(
        objective,
        start,
        bounds,
        &MinimizeOptions {
            tol,
            max_iter,
            ..MinimizeOptions::default()
        },
    )
}

pub fn minimize_with<F>(objective: F, start: &[f64], bounds: &BoundBox, opts: &MinimizeOptions) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    if n == 0 {
        return Err(Error::Setup("empty parameter vector".into()));
    }
    if bounds.dim() != n {
        return Err(Error::Setup(format!(
            "bounds have dimension {}, start has {n}",
            bounds.dim()
        )));
    }
    if !bounds.contains(start) {
        return Err(Error::Setup(format!("start point {start:?} outside bounds")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Setup(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let f0 = objective(start);
    if !f0.is_finite() {
        return Err(Error::Setup(format!("objective is not finite at start ({f0})")));
    }
    if let Some(step) = &opts.initial_step {
        if step.len() != n {
            return Err(Error::Setup("initial_step length mismatch".into()));
        }
    }

    let mut search = Search {
        objective: &objective,
        bounds,
        evaluations: 1,
    };
    let mut best = start.to_vec();
    let mut best_f = f0;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..=opts.restarts {
        if iterations >= opts.max_iter {
            converged = false;
            break;
        }
        let run = search.run(&best, best_f, opts, opts.max_iter - iterations);
        iterations += run.iterations;
        converged = run.converged;
        if run.value <= best_f {
            best = run.point;
            best_f = run.value;
        }
        if !converged {
            break;
        }
    }

    Ok(OptimResult {
        argmin: best,
        value: best_f,
        iterations,
        evaluations: search.evaluations,
        converged,
        termination: if converged {
            Termination::Converged
        } else {
            Termination::MaxIterations
        },
    })
}

struct Search<'a, F> {
    objective: &'a F,
    bounds: &'a BoundBox,
    evaluations: usize,
}

struct RunOutcome {
    point: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

impl<F: Fn(&[f64]) -> f64> Search<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.objective)(x);
        if v.is_finite() {
            v
        } else {
            PENALTY
        }
    }

    fn initial_simplex(&mut self, x0: &[f64], f0: f64, opts: &MinimizeOptions) -> Vec<(Vec<f64>, f64)> {
        let n = x0.len();
        let mut simplex = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let (lo, hi) = (self.bounds.lower[i], self.bounds.upper[i]);
            let mut step = match &opts.initial_step {
                Some(s) => s[i].abs(),
                None if x0[i] != 0.0 => 0.05 * x0[i].abs(),
                None => 0.00025,
            };
            if lo.is_finite() && hi.is_finite() {
                step = step.min(0.25 * (hi - lo));
            }
            let mut x = x0.to_vec();
            x[i] = if x0[i] + step <= hi { x0[i] + step } else { x0[i] - step };
            self.bounds.clamp(&mut x);
            let f = self.eval(&x);
            simplex.push((x, f));
        }
        simplex
    }

    fn run(&mut self, x0: &[f64], f0: f64, opts: &MinimizeOptions, budget: usize) -> RunOutcome {
        let n = x0.len();
        let mut simplex = self.initial_simplex(x0, f0, opts);
        let mut iterations = 0;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if has_converged(&simplex, opts.tol) {
                let (point, value) = simplex.swap_remove(0);
                return RunOutcome {
                    point,
                    value,
                    iterations,
                    converged: true,
                };
            }
            if iterations >= budget {
                let (point, value) = simplex.swap_remove(0);
                return RunOutcome {
                    point,
                    value,
                    iterations,
                    converged: false,
                };
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let mut xr = along(REFLECT);
            self.bounds.clamp(&mut xr);
            let fr = self.eval(&xr);

            if fr < simplex[0].1 {
                let mut xe = along(EXPAND);
                self.bounds.clamp(&mut xe);
                let fe = self.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (mut xc, outside) = if fr < worst.1 {
                (along(CONTRACT), true)
            } else {
                (along(-CONTRACT), false)
            };
            self.bounds.clamp(&mut xc);
            let fc = self.eval(&xc);
            let accept = if outside { fc <= fr } else { fc < worst.1 };
            if accept {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let mut x: Vec<f64> = best
                    .iter()
                    .zip(&vertex.0)
                    .map(|(b, v)| b + SHRINK * (v - b))
                    .collect();
                self.bounds.clamp(&mut x);
                let f = self.eval(&x);
                *vertex = (x, f);
            }
        }
    }
}

fn has_converged(sorted: &[(Vec<f64>, f64)], tol: f64) -> bool {
    let (best, fbest) = (&sorted[0].0, sorted[0].1);
    let diameter = sorted[1..]
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0_f64, f64::max);
    let spread = sorted[1..]
        .iter()
        .map(|(_, f)| (f - fbest).abs())
        .fold(0.0_f64, f64::max);
    diameter <= tol && spread <= tol * fbest.abs().max(1.0)
}

/// Central-difference Hessian of `f` at `x` with per-coordinate steps.
pub fn numerical_hessian<F>(f: F, x: &[f64], steps: &[f64]) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    let mut h = vec![vec![0.0; n]; n];
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for (i, d) in moves {
            y[*i] += d;
        }
        f(&y)
    };
    for i in 0..n {
        let hi = steps[i];
        let fp = shifted(&[(i, hi)]);
        let fm = shifted(&[(i, -hi)]);
        h[i][i] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let fpp = shifted(&[(i, hi), (j, hj)]);
            let fpm = shifted(&[(i, hi), (j, -hj)]);
            let fmp = shifted(&[(i, -hi), (j, hj)]);
            let fmm = shifted(&[(i, -hi), (j, -hj)]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}
