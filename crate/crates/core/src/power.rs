//! Transmit power control by the convex-concave procedure.
//!
//! Each device that offloads must push its bits through the access link within
//! its remaining deadline budget. The rate constraint is a difference of convex
//! functions; the concave part is linearised at the current iterate. The
//! transmit energy is concave in the power vector, so its tangent plane is a
//! global upper bound and the surrogate problem is convex.

use std::f64::consts::LN_2;

use crate::channel::{interferes, LinkTable};
use crate::convex::{solve, ConvexProgram, SolveOptions, SolveStatus};
use crate::cost::{CostReport, Decisions};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    /// Relative stopping tolerance on the surrogate objective.
    pub tol: f64,
    pub max_iter: usize,
    /// Fraction of the deadline kept free when sizing the access budget.
    pub margin: f64,
    /// Strict slack (bit/s/Hz) kept on every surrogate rate constraint.
    pub slack: f64,
    pub solver: SolveOptions,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 100, margin: 1e-3, slack: 1e-9, solver: SolveOptions::default() }
    }
}

/// Access-link power problem restricted to the devices that offload.
#[derive(Debug, Clone)]
pub struct PowerSystem {
    /// Global ids of the variables.
    pub active: Vec<usize>,
    pub bits: Vec<f64>,
    pub own_gain: Vec<f64>,
    /// Interferers of each variable at its UAV: (variable index, gain).
    pub interferers: Vec<Vec<(usize, f64)>>,
    /// Access-delay budget, s.
    pub budget: Vec<f64>,
    pub max_power: Vec<f64>,
    pub noise: f64,
    pub bandwidth: f64,
    /// Offloading devices with no positive budget.
    pub unservable: Vec<usize>,
}

impl PowerSystem {
    pub fn build(s: &Scenario, d: &Decisions, links: &LinkTable, report: &CostReport, margin: f64) -> Self {
        let mut active = Vec::new();
        let mut budget = Vec::new();
        let mut unservable = Vec::new();
        for j in 0..s.num_devices() {
            if d.offload_bits[j] <= 0.0 || d.bands[j].is_none() {
                continue;
            }
            let c = &report.devices[j];
            let t = s.devices[j].deadline_s * (1.0 - margin) - c.backhaul_delay - c.compute_delay;
            if t > 0.0 && t.is_finite() {
                active.push(j);
                budget.push(t);
            } else {
                unservable.push(j);
            }
        }
        let mut var_of = vec![None; s.num_devices()];
        for (i, &j) in active.iter().enumerate() {
            var_of[j] = Some(i);
        }
        let mut own_gain = Vec::with_capacity(active.len());
        let mut interf = Vec::with_capacity(active.len());
        for &j in &active {
            let k = s.association[j];
            let b = d.bands[j].unwrap();
            own_gain.push(links.gain(j, k, b));
            let list = (0..s.num_devices())
                .filter(|&o| d.bands[o] == Some(b) && interferes(s.phys.interference, &s.association, j, o))
                .filter_map(|o| var_of[o].map(|v| (v, links.gain(o, k, b))))
                .collect();
            interf.push(list);
        }
        Self {
            bits: active.iter().map(|&j| d.offload_bits[j]).collect(),
            max_power: active.iter().map(|&j| s.devices[j].max_power_w).collect(),
            active,
            own_gain,
            interferers: interf,
            budget,
            noise: s.phys.noise_w,
            bandwidth: s.phys.subband_hz,
            unservable,
        }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn interference(&self, p: &[f64], i: usize) -> f64 {
        self.interferers[i].iter().map(|&(v, g)| p[v] * g).sum()
    }

    pub fn rate(&self, p: &[f64], i: usize) -> f64 {
        let sinr = p[i] * self.own_gain[i] / (self.interference(p, i) + self.noise);
        self.bandwidth * (1.0 + sinr).log2()
    }

    /// Required spectral efficiency, bit/s/Hz.
    pub fn required(&self, i: usize) -> f64 {
        self.bits[i] / (self.bandwidth * self.budget[i])
    }

    /// Rate constraint value; feasible iff `<= 0`.
    pub fn constraint(&self, p: &[f64], i: usize) -> f64 {
        let sinr = p[i] * self.own_gain[i] / (self.interference(p, i) + self.noise);
        self.required(i) - (1.0 + sinr).log2()
    }

    pub fn feasible(&self, p: &[f64]) -> bool {
        (0..self.len()).all(|i| self.constraint(p, i) <= 0.0)
    }

    /// Total transmit energy.
    pub fn energy(&self, p: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| {
                let r = self.rate(p, i);
                if p[i] == 0.0 {
                    0.0
                } else if r > 0.0 {
                    p[i] * self.bits[i] / r
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    }

    /// Gradient of [`Self::energy`].
    pub fn energy_gradient(&self, p: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.len()];
        for i in 0..self.len() {
            let interf = self.interference(p, i);
            let sig = p[i] * self.own_gain[i];
            let total = sig + interf + self.noise;
            let r = self.bandwidth * (1.0 + sig / (interf + self.noise)).log2();
            let beta = self.bits[i];
            if r <= 0.0 {
                // limit p -> 0 of p * beta / r
                g[i] += beta * LN_2 * (interf + self.noise) / (self.bandwidth * self.own_gain[i]) / p[i].max(1e-300);
                continue;
            }
            let dr_own = self.bandwidth * self.own_gain[i] / (LN_2 * total);
            g[i] += beta / r - p[i] * beta * dr_own / (r * r);
            for &(v, gv) in &self.interferers[i] {
                let dr = -self.bandwidth * gv * sig / (LN_2 * total * (interf + self.noise));
                g[v] += -p[i] * beta * dr / (r * r);
            }
        }
        g
    }

    /// Equal-split powers scaled up until every rate constraint holds strictly.
    pub fn initial_point(&self, num_bands: usize) -> (Vec<f64>, Vec<usize>) {
        let mut p: Vec<f64> = self.max_power.iter().map(|m| m / num_bands as f64).collect();
        for _ in 0..64 {
            let bad: Vec<usize> = (0..self.len()).filter(|&i| !(self.constraint(&p, i) < 0.0)).collect();
            if bad.is_empty() {
                return (p, Vec::new());
            }
            if p.iter().zip(&self.max_power).all(|(a, m)| *a >= *m) {
                return (p, bad);
            }
            for (a, m) in p.iter_mut().zip(&self.max_power) {
                *a = (*a * 2.0).min(*m);
            }
        }
        let bad = (0..self.len()).filter(|&i| !(self.constraint(&p, i) < 0.0)).collect();
        (p, bad)
    }
}

/// Convex surrogate at an anchor, in variables scaled by the anchor powers.
pub struct CcpSubproblem<'a> {
    sys: &'a PowerSystem,
    scale: Vec<f64>,
    /// Linear objective coefficients in scaled variables, normalised by the anchor energy.
    cost: Vec<f64>,
    anchor_interf: Vec<f64>,
}

impl<'a> CcpSubproblem<'a> {
    pub fn new(sys: &'a PowerSystem, anchor: &[f64]) -> Self {
        let scale: Vec<f64> = anchor.iter().zip(&sys.max_power).map(|(&a, &m)| if a > 0.0 { a } else { m * 1e-6 }).collect();
        let e0 = sys.energy(anchor).max(1e-300);
        let grad = sys.energy_gradient(anchor);
        let cost = grad.iter().zip(&scale).map(|(g, s)| g * s / e0).collect();
        let anchor_interf = (0..sys.len()).map(|i| sys.interference(anchor, i)).collect();
        Self { sys, scale, cost, anchor_interf }
    }

    pub fn to_power(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(a, b)| a * b).collect()
    }

    pub fn to_scaled(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.scale).map(|(a, b)| a / b).collect()
    }

    /// Componentwise-minimal powers with every surrogate constraint at `-slack`.
    ///
    /// The surrogate objective has nonnegative coefficients, so this point is
    /// its minimiser whenever it exists inside the power box.
    pub fn minimal_point(&self, slack: f64) -> Option<Vec<f64>> {
        let sys = self.sys;
        let n = sys.len();
        let mut p = vec![0.0; n];
        for _ in 0..500 {
            let mut change: f64 = 0.0;
            for i in 0..n {
                let it = self.anchor_interf[i];
                let interf = sys.interference(&p, i);
                let expo = sys.required(i) + slack + (it + sys.noise).log2() + (interf - it) / (LN_2 * (it + sys.noise));
                let target = ((expo.exp2() - interf - sys.noise) / sys.own_gain[i]).max(0.0);
                if !target.is_finite() || target > sys.max_power[i] {
                    return None;
                }
                change = change.max((target - p[i]).abs() / target.max(1e-300));
                p[i] = target;
            }
            if change <= 1e-12 {
                return Some(p);
            }
        }
        None
    }

    /// Convexified constraint at power `p`: an upper bound of the true one, equal at the anchor.
    pub fn surrogate_constraint(&self, p: &[f64], i: usize) -> f64 {
        let sys = self.sys;
        let it = self.anchor_interf[i];
        let interf = sys.interference(p, i);
        let total = p[i] * sys.own_gain[i] + interf + sys.noise;
        sys.required(i) - total.log2() + (it + sys.noise).log2() + (interf - it) / (LN_2 * (it + sys.noise))
    }
}

impl ConvexProgram for CcpSubproblem<'_> {
    fn dim(&self) -> usize {
        self.sys.len()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
    fn gradient(&self, _x: &[f64], g: &mut [f64]) {
        g.copy_from_slice(&self.cost);
    }
    fn num_constraints(&self) -> usize {
        self.sys.len()
    }
    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let p = self.to_power(x);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.surrogate_constraint(&p, i);
        }
    }
    fn add_constraint_gradients(&self, x: &[f64], w: &[f64], g: &mut [f64]) {
        let sys = self.sys;
        let p = self.to_power(x);
        for i in 0..sys.len() {
            if w[i] == 0.0 {
                continue;
            }
            let it = self.anchor_interf[i];
            let total = p[i] * sys.own_gain[i] + sys.interference(&p, i) + sys.noise;
            g[i] += w[i] * (-sys.own_gain[i] / (LN_2 * total)) * self.scale[i];
            for &(v, gv) in &sys.interferers[i] {
                g[v] += w[i] * (-gv / (LN_2 * total) + gv / (LN_2 * (it + sys.noise))) * self.scale[v];
            }
        }
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let hi = self.sys.max_power.iter().zip(&self.scale).map(|(m, s)| m / s).collect();
        (vec![0.0; self.sys.len()], hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcpStep {
    /// True transmit energy at the new iterate.
    pub energy: f64,
    /// Surrogate optimum (an upper bound of `energy`).
    pub surrogate: f64,
}

#[derive(Debug, Clone)]
pub struct PowerOutcome {
    /// Powers of every device (zero for non-offloaders).
    pub powers: Vec<f64>,
    pub trace: Vec<CcpStep>,
    pub converged: bool,
    /// Devices whose access constraint cannot be met.
    pub infeasible: Vec<usize>,
}

/// Runs the procedure from the scaled equal-split start.
pub fn control_power(
    s: &Scenario,
    d: &Decisions,
    links: &LinkTable,
    report: &CostReport,
    opts: &PowerOptions,
) -> PowerOutcome {
    let sys = PowerSystem::build(s, d, links, report, opts.margin);
    let mut powers = vec![0.0; s.num_devices()];
    let mut infeasible = sys.unservable.clone();
    for &j in &sys.unservable {
        powers[j] = s.devices[j].max_power_w;
    }
    if sys.is_empty() {
        return PowerOutcome { powers, trace: Vec::new(), converged: true, infeasible };
    }
    let (p0, bad) = sys.initial_point(s.num_subbands());
    if !bad.is_empty() {
        infeasible.extend(bad.iter().map(|&i| sys.active[i]));
        infeasible.sort_unstable();
        for (i, &j) in sys.active.iter().enumerate() {
            powers[j] = p0[i];
        }
        return PowerOutcome { powers, trace: Vec::new(), converged: false, infeasible };
    }
    let (p, trace, converged) = iterate(&sys, p0, opts);
    for (i, &j) in sys.active.iter().enumerate() {
        powers[j] = p[i];
    }
    PowerOutcome { powers, trace, converged, infeasible }
}

/// The procedure itself from a strictly feasible `p`.
pub fn iterate(sys: &PowerSystem, mut p: Vec<f64>, opts: &PowerOptions) -> (Vec<f64>, Vec<CcpStep>, bool) {
    let mut trace = Vec::new();
    let mut prev = sys.energy(&p);
    for _ in 0..opts.max_iter {
        let sub = CcpSubproblem::new(sys, &p);
        let cand = match sub.minimal_point(opts.slack) {
            Some(c) => c,
            None => {
                let x0 = sub.to_scaled(&p);
                match solve(&sub, &x0, &opts.solver) {
                    Ok(s) if s.status != SolveStatus::InfeasibleStart => sub.to_power(&s.x),
                    _ => return (p, trace, true),
                }
            }
        };
        let e_anchor = sys.energy(&p);
        let grad = sys.energy_gradient(&p);
        let surrogate = e_anchor + grad.iter().zip(cand.iter().zip(&p)).map(|(g, (c, a))| g * (c - a)).sum::<f64>();
        if !(surrogate < e_anchor) || !sys.feasible(&cand) {
            return (p, trace, true);
        }
        let energy = sys.energy(&cand);
        trace.push(CcpStep { energy, surrogate });
        p = cand;
        let rel = (prev - surrogate).abs() / prev.abs().max(1e-300);
        prev = surrogate;
        if rel <= opts.tol {
            return (p, trace, true);
        }
    }
    (p, trace, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::gradient_check;
    use crate::cost::evaluate_with_links;
    use crate::matching::match_all;
    use crate::par::Exec;
    use crate::scenario::{generate, SimConfig};

    fn system(seed: u64, n: usize) -> (Scenario, Decisions, LinkTable, PowerSystem) {
        let s = generate(&SimConfig { num_devices: n, num_uavs: 2, seed, ..Default::default() }).unwrap();
        let mut d = Decisions::all_local(&s);
        let links = LinkTable::build(&s, &d.uav_pos, Exec::Sequential).unwrap();
        d.bands = match_all(&s, &links);
        for j in 0..n {
            d.offload_bits[j] = 0.5 * s.devices[j].data_bits;
            d.powers[j] = 0.01;
        }
        let rep = evaluate_with_links(&s, &d, &links);
        let sys = PowerSystem::build(&s, &d, &links, &rep, 1e-3);
        (s, d, links, sys)
    }

    #[test]
    fn energy_gradient_matches_fd() {
        let (_, _, _, sys) = system(3, 8);
        let p: Vec<f64> = (0..sys.len()).map(|i| 1e-3 * (1.0 + i as f64)).collect();
        let g = sys.energy_gradient(&p);
        for i in 0..sys.len() {
            let h = p[i] * 1e-6;
            let mut a = p.clone();
            a[i] += h;
            let mut b = p.clone();
            b[i] -= h;
            let fd = (sys.energy(&a) - sys.energy(&b)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-30), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn surrogate_is_tangent_and_conservative() {
        let (s, _, _, sys) = system(4, 10);
        let (p0, bad) = sys.initial_point(s.num_subbands());
        assert!(bad.is_empty());
        let sub = CcpSubproblem::new(&sys, &p0);
        for i in 0..sys.len() {
            assert!((sub.surrogate_constraint(&p0, i) - sys.constraint(&p0, i)).abs() < 1e-9);
        }
        let mut rng = crate::rng::substream(1, "t");
        use rand::Rng;
        for _ in 0..50 {
            let p: Vec<f64> = sys.max_power.iter().map(|m| rng.gen_range(0.0..*m)).collect();
            for i in 0..sys.len() {
                assert!(sub.surrogate_constraint(&p, i) >= sys.constraint(&p, i) - 1e-9);
            }
        }
        let x0 = sub.to_scaled(&p0);
        assert!(gradient_check(&sub, &x0).unwrap() < 1e-4);
    }

    #[test]
    fn energy_is_concave_along_segments() {
        let (_, _, _, sys) = system(5, 12);
        let mut rng = crate::rng::substream(2, "t");
        use rand::Rng;
        for _ in 0..200 {
            let a: Vec<f64> = sys.max_power.iter().map(|m| rng.gen_range(1e-6..*m)).collect();
            let b: Vec<f64> = sys.max_power.iter().map(|m| rng.gen_range(1e-6..*m)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let lhs = sys.energy(&mid);
            let rhs = 0.5 * (sys.energy(&a) + sys.energy(&b));
            assert!(lhs >= rhs * (1.0 - 1e-9), "{lhs} < {rhs}");
        }
    }

    #[test]
    fn iterates_feasible_and_descending() {
        for seed in 0..5 {
            let (s, d, links, _) = system(seed, 10);
            let rep = evaluate_with_links(&s, &d, &links);
            let out = control_power(&s, &d, &links, &rep, &PowerOptions::default());
            assert!(out.infeasible.is_empty());
            let mut prev = f64::INFINITY;
            for st in &out.trace {
                assert!(st.surrogate <= prev * (1.0 + 1e-9));
                assert!(st.energy <= st.surrogate * (1.0 + 1e-9));
                prev = st.surrogate;
            }
            let mut dd = d.clone();
            dd.powers = out.powers.clone();
            let rep2 = evaluate_with_links(&s, &dd, &links);
            assert!(rep2.feasible(), "{:?}", rep2.violations);
        }
    }

    #[test]
    fn minimal_point_matches_generic_solver() {
        use crate::convex::solve;
        for seed in 0..3 {
            let (s, _, _, sys) = system(seed, 6);
            let (p0, _) = sys.initial_point(s.num_subbands());
            let sub = CcpSubproblem::new(&sys, &p0);
            let fp = sub.minimal_point(1e-9).unwrap();
            let opts = SolveOptions { max_iter: 20000, ..Default::default() };
            let sol = solve(&sub, &sub.to_scaled(&p0), &opts).unwrap();
            let generic = sub.objective(&sol.x);
            let exact = sub.objective(&sub.to_scaled(&fp));
            assert!(exact <= generic + 1e-6, "{exact} vs {generic}");
            assert!((exact - generic).abs() <= 1e-3 * sub.objective(&sub.to_scaled(&p0)));
        }
    }

    #[test]
    fn unreachable_deadline_is_reported() {
        let (s, mut d, links, _) = system(6, 6);
        let j = (0..6).find(|&j| d.bands[j].is_some()).unwrap();
        d.offload_bits[j] = 1e12;
        let rep = evaluate_with_links(&s, &d, &links);
        let out = control_power(&s, &d, &links, &rep, &PowerOptions::default());
        assert!(out.infeasible.contains(&j));
    }
}
