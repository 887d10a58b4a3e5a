//! Small smooth constrained solver: projected gradient with Armijo backtracking,
//! box and simplex projections, and a staged log barrier for inequality constraints.

use crate::error::{Error, Result};

/// A smooth problem `min f(x)` s.t. `h_i(x) <= 0`, box bounds and simplex groups.
///
/// Coordinates listed in a simplex group are projected onto the probability
/// simplex; their box bounds are ignored.
pub trait ConvexProgram {
    fn dim(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], g: &mut [f64]);

    fn num_constraints(&self) -> usize {
        0
    }
    /// Writes every `h_i(x)`.
    fn constraints(&self, _x: &[f64], _out: &mut [f64]) {}
    /// Adds `sum_i w[i] * grad h_i(x)` into `g`.
    fn add_constraint_gradients(&self, _x: &[f64], _w: &[f64], _g: &mut [f64]) {}

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![f64::NEG_INFINITY; self.dim()], vec![f64::INFINITY; self.dim()])
    }
    fn simplex_groups(&self) -> Vec<Vec<usize>> {
        Vec::new()
    }
}

type ScalarFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>;
type GradFn<'a> = Box<dyn Fn(&[f64], &mut [f64]) + Sync + 'a>;

/// Closure-backed program.
pub struct FnProgram<'a> {
    pub dim: usize,
    pub f: ScalarFn<'a>,
    pub grad: GradFn<'a>,
    pub constraints: Vec<(ScalarFn<'a>, GradFn<'a>)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub groups: Vec<Vec<usize>>,
}

impl<'a> FnProgram<'a> {
    pub fn new(
        dim: usize,
        f: impl Fn(&[f64]) -> f64 + Sync + 'a,
        grad: impl Fn(&[f64], &mut [f64]) + Sync + 'a,
    ) -> Self {
        Self {
            dim,
            f: Box::new(f),
            grad: Box::new(grad),
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            groups: Vec::new(),
        }
    }

    pub fn with_box(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_group(mut self, group: Vec<usize>) -> Self {
        self.groups.push(group);
        self
    }

    pub fn with_constraint(
        mut self,
        h: impl Fn(&[f64]) -> f64 + Sync + 'a,
        grad: impl Fn(&[f64], &mut [f64]) + Sync + 'a,
    ) -> Self {
        self.constraints.push((Box::new(h), Box::new(grad)));
        self
    }
}

impl ConvexProgram for FnProgram<'_> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn objective(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        (self.grad)(x, g)
    }
    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        for (o, (h, _)) in out.iter_mut().zip(&self.constraints) {
            *o = h(x);
        }
    }
    fn add_constraint_gradients(&self, x: &[f64], w: &[f64], g: &mut [f64]) {
        let mut tmp = vec![0.0; self.dim];
        for (wi, (_, gh)) in w.iter().zip(&self.constraints) {
            if *wi == 0.0 {
                continue;
            }
            tmp.iter_mut().for_each(|t| *t = 0.0);
            gh(x, &mut tmp);
            for (gi, ti) in g.iter_mut().zip(&tmp) {
                *gi += wi * ti;
            }
        }
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }
    fn simplex_groups(&self) -> Vec<Vec<usize>> {
        self.groups.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    InfeasibleStart,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Projected-gradient norm at which a stage stops.
    pub tol: f64,
    /// Iteration budget per barrier stage.
    pub max_iter: usize,
    /// Barrier weight of the first stage.
    pub barrier_init: f64,
    pub barrier_stages: usize,
    pub barrier_decay: f64,
    pub init_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
            barrier_init: 1e-2,
            barrier_stages: 5,
            barrier_decay: 0.1,
            init_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Worst relative finite-difference gradient error at the start point (debug builds).
    pub gradient_error: Option<f64>,
}

/// Euclidean projection onto the probability simplex (sort based).
pub fn project_simplex(v: &mut [f64]) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Feasible set of a program: clamps free coordinates, projects groups.
#[derive(Debug, Clone)]
pub struct Projector {
    lower: Vec<f64>,
    upper: Vec<f64>,
    groups: Vec<Vec<usize>>,
    in_group: Vec<bool>,
}

impl Projector {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, groups: Vec<Vec<usize>>) -> Self {
        let mut in_group = vec![false; lower.len()];
        for g in &groups {
            for &i in g {
                in_group[i] = true;
            }
        }
        Self { lower, upper, groups, in_group }
    }

    pub fn of(p: &dyn ConvexProgram) -> Self {
        let (lo, hi) = p.bounds();
        Self::new(lo, hi, p.simplex_groups())
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            if !self.in_group[i] {
                *xi = xi.clamp(self.lower[i], self.upper[i]);
            }
        }
        let mut buf = Vec::new();
        for g in &self.groups {
            buf.clear();
            buf.extend(g.iter().map(|&i| x[i]));
            project_simplex(&mut buf);
            for (&i, &v) in g.iter().zip(&buf) {
                x[i] = v;
            }
        }
    }

    /// Whether `x` lies in the set up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        for (i, &xi) in x.iter().enumerate() {
            if !self.in_group[i] && (xi < self.lower[i] - tol || xi > self.upper[i] + tol) {
                return false;
            }
        }
        self.groups.iter().all(|g| {
            let s: f64 = g.iter().map(|&i| x[i]).sum();
            (s - 1.0).abs() <= tol * g.len().max(1) as f64 && g.iter().all(|&i| x[i] >= -tol)
        })
    }
}

/// Worst relative error between supplied and central-difference gradients of the
/// objective and every constraint. `None` when a perturbed evaluation is not finite.
pub fn gradient_check(p: &dyn ConvexProgram, x: &[f64]) -> Option<f64> {
    gradient_check_sampled(p, x, usize::MAX)
}

/// As [`gradient_check`], on at most `limit` evenly strided coordinates and constraints.
pub fn gradient_check_sampled(p: &dyn ConvexProgram, x: &[f64], limit: usize) -> Option<f64> {
    let n = p.dim();
    let m = p.num_constraints();
    let coords: Vec<usize> = (0..n).step_by(n.div_ceil(limit.max(1)).max(1)).collect();
    let cons: Vec<usize> = (0..m).step_by(m.div_ceil(limit.max(1)).max(1)).collect();
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: &[f64], eval: &dyn Fn(&[f64]) -> f64| -> Option<()> {
        let mut xp = x.to_vec();
        let mut fd = analytic.to_vec();
        for &i in &coords {
            let h = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = eval(&xp);
            xp[i] = x[i] - h;
            let fm = eval(&xp);
            xp[i] = x[i];
            if !fp.is_finite() || !fm.is_finite() {
                return None;
            }
            fd[i] = (fp - fm) / (2.0 * h);
        }
        let scale = analytic
            .iter()
            .chain(fd.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()))
            .max(1e-12);
        for i in 0..n {
            worst = worst.max((fd[i] - analytic[i]).abs() / scale);
        }
        Some(())
    };
    let mut g = vec![0.0; n];
    p.gradient(x, &mut g);
    compare(&g, &|y| p.objective(y))?;
    for &i in &cons {
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        let mut gi = vec![0.0; n];
        p.add_constraint_gradients(x, &w, &mut gi);
        let eval = |y: &[f64]| {
            let mut out = vec![0.0; m];
            p.constraints(y, &mut out);
            out[i]
        };
        compare(&gi, &eval)?;
    }
    Some(worst)
}

struct Barrier<'a> {
    p: &'a dyn ConvexProgram,
    mu: f64,
    h: std::cell::RefCell<Vec<f64>>,
}

impl Barrier<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let f = self.p.objective(x);
        if self.p.num_constraints() == 0 {
            return f;
        }
        let mut h = self.h.borrow_mut();
        self.p.constraints(x, &mut h);
        let mut b = 0.0;
        for &hi in h.iter() {
            if !(hi < 0.0) {
                return f64::INFINITY;
            }
            b -= (-hi).ln();
        }
        f + self.mu * b
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        self.p.gradient(x, g);
        let m = self.p.num_constraints();
        if m == 0 {
            return;
        }
        let mut h = self.h.borrow_mut();
        self.p.constraints(x, &mut h);
        let w: Vec<f64> = h.iter().map(|&hi| self.mu / (-hi)).collect();
        self.p.add_constraint_gradients(x, &w, g);
    }
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Projected gradient on one barrier stage. Returns (iterations, converged).
fn descend(b: &Barrier, proj: &Projector, x: &mut Vec<f64>, opts: &SolveOptions) -> (usize, bool) {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut fx = b.value(x);
    for it in 0..opts.max_iter {
        b.gradient(x, &mut g);
        if g.iter().any(|v| !v.is_finite()) {
            return (it, false);
        }
        // projected gradient at unit step
        for i in 0..n {
            y[i] = x[i] - g[i];
        }
        proj.project(&mut y);
        if norm_diff(&y, x) <= opts.tol {
            return (it, true);
        }
        let mut step = opts.init_step;
        let mut accepted = false;
        for _ in 0..opts.max_backtracks {
            for i in 0..n {
                y[i] = x[i] - step * g[i];
            }
            proj.project(&mut y);
            let fy = b.value(&y);
            let decrease: f64 = g.iter().zip(y.iter().zip(x.iter())).map(|(gi, (yi, xi))| gi * (yi - xi)).sum();
            if fy.is_finite() && fy <= fx + opts.armijo * decrease {
                let moved = norm_diff(&y, x);
                let small = fx - fy <= 1e-15 * fx.abs().max(1e-300) && moved <= opts.tol;
                std::mem::swap(x, &mut y);
                fx = fy;
                accepted = true;
                if small {
                    return (it + 1, true);
                }
                break;
            }
            step *= opts.shrink;
        }
        if !accepted {
            // no descent possible at machine precision
            return (it + 1, true);
        }
    }
    (opts.max_iter, false)
}

/// Solves `p` from the feasible start `x0`.
pub fn solve(p: &dyn ConvexProgram, x0: &[f64], opts: &SolveOptions) -> Result<Solution> {
    let n = p.dim();
    if x0.len() != n {
        return Err(Error::Precondition(format!("start point has {} entries, expected {n}", x0.len())));
    }
    let proj = Projector::of(p);
    if !proj.contains(x0, 1e-9) {
        return Err(Error::Precondition("start point violates the box or simplex constraints".into()));
    }
    let mut x = x0.to_vec();
    proj.project(&mut x);
    let m = p.num_constraints();
    if m > 0 {
        let mut h = vec![0.0; m];
        p.constraints(&x, &mut h);
        if h.iter().any(|v| !(*v < 0.0)) {
            return Ok(Solution {
                objective: p.objective(&x),
                x,
                status: SolveStatus::InfeasibleStart,
                iterations: 0,
                gradient_error: None,
            });
        }
    }
    let gradient_error = if cfg!(debug_assertions) { gradient_check_sampled(p, &x, 16) } else { None };
    if let Some(e) = gradient_error {
        if e > 1e-4 {
            log::warn!("supplied gradient disagrees with finite differences (relative error {e:.2e})");
        }
    }

    let stages = if m == 0 { 1 } else { opts.barrier_stages.max(1) };
    let mut mu = opts.barrier_init;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..stages {
        let b = Barrier { p, mu, h: std::cell::RefCell::new(vec![0.0; m]) };
        let (it, ok) = descend(&b, &proj, &mut x, opts);
        iterations += it;
        converged = ok;
        mu *= opts.barrier_decay;
    }
    Ok(Solution {
        objective: p.objective(&x),
        x,
        status: if converged { SolveStatus::Converged } else { SolveStatus::IterationLimit },
        iterations,
        gradient_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn box_projection_example() {
        let pr = Projector::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![]);
        let mut x = vec![2.0, -1.0];
        pr.project(&mut x);
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn simplex_projection_example() {
        let mut v = vec![0.5, 0.8, 0.9];
        project_simplex(&mut v);
        assert_relative_eq!(v[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(v[1], 0.4, epsilon = 1e-12);
        assert_relative_eq!(v[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn simplex_projection_matches_grid_search() {
        let v = [0.5, 0.8, 0.9];
        let mut p = v.to_vec();
        project_simplex(&mut p);
        let dp: f64 = v.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
        let n = 400;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let q = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                let d: f64 = v.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
                best = best.min(d);
            }
        }
        assert!(dp <= best + 1e-12);
    }

    #[test]
    fn linear_objective_on_simplex_picks_vertex() {
        let c = [3.0, 1.0, 2.0];
        let p = FnProgram::new(3, move |x| c.iter().zip(x).map(|(a, b)| a * b).sum(), move |_, g| g.copy_from_slice(&c))
            .with_group(vec![0, 1, 2]);
        let s = solve(&p, &[1.0 / 3.0; 3], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert_relative_eq!(s.x[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn strictly_convex_quadratic() {
        let d = [1.0, 2.0, 3.0];
        let t = [0.3, -1.2, 2.0];
        let p = FnProgram::new(
            3,
            move |x| (0..3).map(|i| 0.5 * d[i] * (x[i] - t[i]).powi(2)).sum(),
            move |x, g| (0..3).for_each(|i| g[i] = d[i] * (x[i] - t[i])),
        );
        let opts = SolveOptions::default();
        let s = solve(&p, &[0.0; 3], &opts).unwrap();
        assert_eq!(s.status, SolveStatus::Converged);
        assert!(s.iterations <= 1000);
        for i in 0..3 {
            assert!((s.x[i] - t[i]).abs() <= 10.0 * opts.tol);
        }
    }

    #[test]
    fn barrier_respects_inequality() {
        // min x0 + x1  s.t.  1 - x0 x1 <= 0 (x > 0): optimum (1, 1)
        let p = FnProgram::new(2, |x| x[0] + x[1], |_, g| g.copy_from_slice(&[1.0, 1.0]))
            .with_box(vec![1e-6, 1e-6], vec![10.0, 10.0])
            .with_constraint(|x| 1.0 / (x[0] * x[1]).max(1e-300) - 1.0, |x, g| {
                g[0] = -1.0 / (x[0] * x[0] * x[1]);
                g[1] = -1.0 / (x[0] * x[1] * x[1]);
            });
        let opts = SolveOptions { barrier_init: 1e-2, ..Default::default() };
        let s = solve(&p, &[3.0, 3.0], &opts).unwrap();
        assert!(1.0 / (s.x[0] * s.x[1]) <= 1.0);
        assert_relative_eq!(s.objective, 2.0, max_relative = 1e-3);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let p = FnProgram::new(1, |x| x[0], |_, g| g[0] = 1.0).with_constraint(|x| 1.0 - x[0], |_, g| g[0] = -1.0);
        let s = solve(&p, &[0.5], &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::InfeasibleStart);
    }

    #[test]
    fn start_outside_box_is_an_error() {
        let p = FnProgram::new(1, |x| x[0], |_, g| g[0] = 1.0).with_box(vec![0.0], vec![1.0]);
        assert!(solve(&p, &[2.0], &SolveOptions::default()).is_err());
        assert!(solve(&p, &[0.5, 0.5], &SolveOptions::default()).is_err());
    }

    #[test]
    fn gradient_check_flags_wrong_gradient() {
        let good = FnProgram::new(2, |x| x[0] * x[0] + x[1], |x, g| {
            g[0] = 2.0 * x[0];
            g[1] = 1.0
        });
        assert!(gradient_check(&good, &[0.7, 0.2]).unwrap() < 1e-6);
        let bad = FnProgram::new(2, |x| x[0] * x[0] + x[1], |x, g| {
            g[0] = 3.0 * x[0];
            g[1] = 1.0
        });
        assert!(gradient_check(&bad, &[0.7, 0.2]).unwrap() > 1e-2);
    }
}
