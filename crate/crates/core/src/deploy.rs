//! Horizontal UAV placement by successive convex approximation.
//!
//! With offload sizes, bands, powers and routes fixed, only the transmit
//! energies of the access links and of the backhaul links depend on the UAV
//! positions. Each energy is written as power times an auxiliary delay that
//! upper-bounds the true delay, so the objective is linear. The delay bounds
//! are convexified around the current positions:
//!
//! * the log of the received signal plus interference is log-convex in the
//!   squared distances, so its negative is replaced by its tangent in those
//!   squared distances (composed with the convex squared distance);
//! * interferer squared distances are replaced by their affine minorant, which
//!   over-estimates interference;
//! * backhaul delay is concave in the squared link length, so its tangent is
//!   an upper bound.
//!
//! Every surrogate is tangent at the anchor and conservative everywhere, so
//! the true objective cannot increase from one accepted step to the next.

use std::f64::consts::LN_2;

use crate::channel::{self, LinkTable};
use crate::convex::{solve, ConvexProgram, SolveOptions, SolveStatus};
use crate::cost::{backhaul_aggregates, evaluate_with_links, CostReport, Decisions, Route};
use crate::error::Result;
use crate::par::Exec;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy)]
pub struct DeployOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest per-coordinate move per iteration, m.
    pub trust_m: f64,
    /// Length unit of the position variables, m.
    pub unit_m: f64,
    pub solver: SolveOptions,
}

impl Default for DeployOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 50, trust_m: 100.0, unit_m: 100.0, solver: SolveOptions::default() }
    }
}

/// One received-power term at a UAV: transmitter position, power and absorption.
#[derive(Debug, Clone, Copy)]
struct Term {
    pos: [f64; 2],
    power: f64,
    absorption: f64,
    /// Squared distance at the anchor, m^2.
    s0: f64,
}

#[derive(Debug, Clone, Copy)]
enum LegEnd {
    Uav(usize),
    Sat([f64; 2], f64),
}

#[derive(Debug, Clone)]
struct Leg {
    from: usize,
    to: LegEnd,
    bits: f64,
    power: f64,
    snr_coeff: f64,
    bandwidth: f64,
    /// Squared length, delay and d(delay)/d(length^2) at the anchor.
    t0: f64,
    delay0: f64,
    slope: f64,
}

#[derive(Debug, Clone)]
struct Row {
    device: usize,
    uav: usize,
    bits: f64,
    power: f64,
    /// Own signal first, then interferers.
    terms: Vec<Term>,
    /// Tangent of `-log2(total)` in squared distances: value and coefficients.
    base: f64,
    coeff: Vec<f64>,
    leg: Option<usize>,
    /// Satellite horizontal position and altitude gap, for the propagation term.
    sat: Option<([f64; 2], f64)>,
    fixed_delay: f64,
    deadline: f64,
}

/// One convexified placement problem around an anchor.
pub struct ScaSubproblem<'a> {
    s: &'a Scenario,
    anchor: Vec<[f64; 2]>,
    rows: Vec<Row>,
    legs: Vec<Leg>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    unit: f64,
    /// Unit of every delay variable (its anchor value), s.
    scale: Vec<f64>,
    norm: f64,
    num_interf: usize,
}

fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn leg_delay(bits: f64, bandwidth: f64, snr_coeff: f64, t: f64) -> f64 {
    bits / channel::shannon(bandwidth, snr_coeff / t)
}

fn leg_delay_slope(bits: f64, bandwidth: f64, snr_coeff: f64, t: f64) -> f64 {
    let r = channel::shannon(bandwidth, snr_coeff / t);
    bits * bandwidth * snr_coeff / (t * t * (1.0 + snr_coeff / t) * LN_2 * r * r)
}

impl<'a> ScaSubproblem<'a> {
    pub fn new(s: &'a Scenario, d: &Decisions, report: &CostReport, opts: &DeployOptions) -> Self {
        let unit = opts.unit_m;
        let anchor = d.uav_pos.clone();
        let k_n = s.num_uavs();
        let noise = s.phys.noise_w;
        let (relay_agg, sat_agg) = backhaul_aggregates(s, d);

        let mut legs = Vec::new();
        let mut relay_leg = vec![vec![None; k_n]; k_n];
        let mut sat_leg = vec![vec![None; s.num_satellites()]; k_n];
        for k in 0..k_n {
            let hk = s.uavs[k].altitude_m;
            let p = s.uavs[k].tx_power_w;
            for k2 in 0..k_n {
                if relay_agg[k][k2] > 0.0 {
                    let dh = hk - s.uavs[k2].altitude_m;
                    let t0 = sq_dist(anchor[k], anchor[k2]) + dh * dh;
                    let c = channel::mm_snr_coeff(&s.phys, p, s.phys.mm_bandwidth_uav_hz);
                    let bw = s.phys.mm_bandwidth_uav_hz;
                    relay_leg[k][k2] = Some(legs.len());
                    legs.push(Leg {
                        from: k,
                        to: LegEnd::Uav(k2),
                        bits: relay_agg[k][k2],
                        power: p,
                        snr_coeff: c,
                        bandwidth: bw,
                        t0,
                        delay0: leg_delay(relay_agg[k][k2], bw, c, t0),
                        slope: leg_delay_slope(relay_agg[k][k2], bw, c, t0),
                    });
                }
            }
            for (si, sat) in s.satellites.iter().enumerate() {
                if sat_agg[k][si] > 0.0 {
                    let xy = [sat.pos[0], sat.pos[1]];
                    let dh = sat.pos[2] - hk;
                    let t0 = sq_dist(anchor[k], xy) + dh * dh;
                    let c = channel::mm_snr_coeff(&s.phys, p, s.phys.mm_bandwidth_sat_hz);
                    let bw = s.phys.mm_bandwidth_sat_hz;
                    sat_leg[k][si] = Some(legs.len());
                    legs.push(Leg {
                        from: k,
                        to: LegEnd::Sat(xy, dh),
                        bits: sat_agg[k][si],
                        power: p,
                        snr_coeff: c,
                        bandwidth: bw,
                        t0,
                        delay0: leg_delay(sat_agg[k][si], bw, c, t0),
                        slope: leg_delay_slope(sat_agg[k][si], bw, c, t0),
                    });
                }
            }
        }

        let mut rows = Vec::new();
        let mut num_interf = 0;
        for j in 0..s.num_devices() {
            let Some(b) = d.bands[j] else { continue };
            if d.offload_bits[j] <= 0.0 {
                continue;
            }
            let k = s.association[j];
            let h2 = s.uavs[k].altitude_m.powi(2);
            let a = s.phys.absorption(b);
            let term = |o: usize| Term {
                pos: s.devices[o].pos,
                power: d.powers[o],
                absorption: a,
                s0: sq_dist(s.devices[o].pos, anchor[k]) + h2,
            };
            let mut terms = vec![term(j)];
            for o in 0..s.num_devices() {
                if d.bands[o] == Some(b)
                    && d.powers[o] > 0.0
                    && channel::interferes(s.phys.interference, &s.association, j, o)
                {
                    terms.push(term(o));
                }
            }
            num_interf += terms.len() - 1;
            let total: f64 =
                terms.iter().map(|t| t.power * channel::thz_gain_sq(s.phys.ref_gain, t.absorption, t.s0)).sum::<f64>()
                    + noise;
            let coeff = terms
                .iter()
                .map(|t| -t.power * channel::thz_gain_sq_deriv(s.phys.ref_gain, t.absorption, t.s0) / (LN_2 * total))
                .collect();
            let (leg, sat) = match d.routes[j] {
                Route::Serving => (None, None),
                Route::Relay(k2) => (relay_leg[k][k2], None),
                Route::Satellite(si) => {
                    let p = s.satellites[si].pos;
                    (sat_leg[k][si], Some(([p[0], p[1]], p[2] - s.uavs[k].altitude_m)))
                }
            };
            rows.push(Row {
                device: j,
                uav: k,
                bits: d.offload_bits[j],
                power: d.powers[j],
                terms,
                base: -total.log2(),
                coeff,
                leg,
                sat,
                fixed_delay: report.devices[j].compute_delay,
                deadline: s.devices[j].deadline_s,
            });
        }

        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (k, u) in s.uavs.iter().enumerate() {
            for c in 0..2 {
                lower.push((u.bounds[c][0].max(anchor[k][c] - opts.trust_m)) / unit);
                upper.push((u.bounds[c][1].min(anchor[k][c] + opts.trust_m)) / unit);
            }
        }
        let mut scale = vec![1.0; 2 * k_n];
        for r in &rows {
            scale.push(report.devices[r.device].tx_delay.max(1e-12));
        }
        for l in &legs {
            scale.push(l.delay0.max(1e-12));
        }
        for i in 2 * k_n..scale.len() {
            lower.push(1e-9);
            upper.push(s.devices.iter().map(|d| d.deadline_s).fold(0.0, f64::max) / scale[i]);
        }
        let mut sub = Self { s, anchor, rows, legs, lower, upper, unit, scale, norm: 1.0, num_interf };
        sub.norm = sub.energy_of_delays(report).max(1e-300);
        sub
    }

    fn energy_of_delays(&self, report: &CostReport) -> f64 {
        let dev: f64 = self.rows.iter().map(|r| r.power * report.devices[r.device].tx_delay).sum();
        let leg: f64 = self.legs.iter().map(|l| l.power * l.delay0).sum();
        dev + leg
    }

    pub fn dim(&self) -> usize {
        2 * self.s.num_uavs() + self.rows.len() + self.legs.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.rows.is_empty() && self.legs.is_empty()
    }

    fn pos(&self, x: &[f64], k: usize) -> [f64; 2] {
        [x[2 * k] * self.unit, x[2 * k + 1] * self.unit]
    }

    fn row_var(&self, r: usize) -> usize {
        2 * self.s.num_uavs() + r
    }

    fn leg_var(&self, l: usize) -> usize {
        2 * self.s.num_uavs() + self.rows.len() + l
    }

    fn lam(&self, x: &[f64], v: usize) -> f64 {
        x[v] * self.scale[v]
    }

    fn leg_sq_len(&self, x: &[f64], l: &Leg) -> f64 {
        let a = self.pos(x, l.from);
        match l.to {
            LegEnd::Uav(k2) => {
                let dh = self.s.uavs[l.from].altitude_m - self.s.uavs[k2].altitude_m;
                sq_dist(a, self.pos(x, k2)) + dh * dh
            }
            LegEnd::Sat(xy, dh) => sq_dist(a, xy) + dh * dh,
        }
    }

    /// Strictly feasible start: anchor positions, delays split between their
    /// true value and the remaining budget. `None` if some budget is already used up.
    pub fn start(&self, report: &CostReport) -> Option<Vec<f64>> {
        let mut x = vec![0.0; self.dim()];
        for k in 0..self.s.num_uavs() {
            x[2 * k] = self.anchor[k][0] / self.unit;
            x[2 * k + 1] = self.anchor[k][1] / self.unit;
        }
        let mut leg_slack = vec![f64::INFINITY; self.legs.len()];
        let mut slack = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            let c = &report.devices[r.device];
            let used = c.tx_delay + r.leg.map_or(0.0, |l| self.legs[l].delay0) + r.fixed_delay + self.prop(&x, r);
            let sl = r.deadline - used;
            if !(sl > 0.0) || !c.tx_delay.is_finite() {
                return None;
            }
            if let Some(l) = r.leg {
                leg_slack[l] = leg_slack[l].min(sl);
            }
            slack.push(sl);
        }
        for (i, r) in self.rows.iter().enumerate() {
            x[self.row_var(i)] = (report.devices[r.device].tx_delay + slack[i] / 3.0) / self.scale[self.row_var(i)];
        }
        for (l, leg) in self.legs.iter().enumerate() {
            let sl = if leg_slack[l].is_finite() { leg_slack[l] } else { 0.0 };
            x[self.leg_var(l)] = (leg.delay0 + sl / 3.0) / self.scale[self.leg_var(l)];
        }
        if x.iter().zip(self.lower.iter().zip(&self.upper)).any(|(v, (lo, hi))| v < lo || v > hi) {
            return None;
        }
        Some(x)
    }

    fn prop(&self, x: &[f64], r: &Row) -> f64 {
        match r.sat {
            None => 0.0,
            Some((xy, dh)) => 2.0 * (sq_dist(self.pos(x, r.uav), xy) + dh * dh).sqrt() / self.s.phys.light_speed,
        }
    }

    fn sq(&self, x: &[f64], r: &Row, t: &Term) -> f64 {
        sq_dist(self.pos(x, r.uav), t.pos) + self.s.uavs[r.uav].altitude_m.powi(2)
    }

    /// Affine minorant of an interferer's squared distance.
    fn minorant(&self, x: &[f64], r: &Row, t: &Term) -> f64 {
        let a = self.anchor[r.uav];
        let o = self.pos(x, r.uav);
        t.s0 + 2.0 * ((a[0] - t.pos[0]) * (o[0] - a[0]) + (a[1] - t.pos[1]) * (o[1] - a[1]))
    }

    /// Upper bound of `-log2(signal + interference + noise)`.
    fn signal_bound(&self, x: &[f64], r: &Row) -> f64 {
        r.base + r.terms.iter().zip(&r.coeff).map(|(t, c)| c * (self.sq(x, r, t) - t.s0)).sum::<f64>()
    }

    /// Upper bound of `log2(interference + noise)`.
    fn interference_bound(&self, x: &[f64], r: &Row) -> f64 {
        let g0 = self.s.phys.ref_gain;
        let i: f64 =
            r.terms[1..].iter().map(|t| t.power * channel::thz_gain_sq(g0, t.absorption, self.minorant(x, r, t))).sum();
        (i + self.s.phys.noise_w).log2()
    }

    fn leg_bound(&self, x: &[f64], l: &Leg) -> f64 {
        l.delay0 + l.slope * (self.leg_sq_len(x, l) - l.t0)
    }

    /// Largest relative gap between each surrogate and its original at the anchor.
    pub fn tangency_error(&self) -> f64 {
        let x: Vec<f64> = self.anchor.iter().flat_map(|p| [p[0] / self.unit, p[1] / self.unit]).collect();
        let mut x = x;
        x.resize(self.dim(), 0.5);
        let g0 = self.s.phys.ref_gain;
        let n = self.s.phys.noise_w;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        let mut err: f64 = 0.0;
        for r in &self.rows {
            let g = |t: &Term, sq: f64| t.power * channel::thz_gain_sq(g0, t.absorption, sq);
            let total: f64 = r.terms.iter().map(|t| g(t, self.sq(&x, r, t))).sum::<f64>() + n;
            let interf: f64 = r.terms[1..].iter().map(|t| g(t, self.sq(&x, r, t))).sum::<f64>() + n;
            err = err.max(rel(self.signal_bound(&x, r), -total.log2()));
            err = err.max(rel(self.interference_bound(&x, r), interf.log2()));
            for t in &r.terms[1..] {
                err = err.max(rel(self.minorant(&x, r, t), self.sq(&x, r, t)));
            }
        }
        for l in &self.legs {
            let t = self.leg_sq_len(&x, l);
            err = err.max(rel(self.leg_bound(&x, l), leg_delay(l.bits, l.bandwidth, l.snr_coeff, t)));
        }
        err
    }

    pub fn positions(&self, x: &[f64]) -> Vec<[f64; 2]> {
        (0..self.s.num_uavs()).map(|k| self.pos(x, k)).collect()
    }

    /// Surrogate energy in joules.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.objective(x) * self.norm
    }

    fn add_sq_grad(&self, r: &Row, t: &Term, x: &[f64], w: f64, g: &mut [f64]) {
        let o = self.pos(x, r.uav);
        g[2 * r.uav] += w * 2.0 * self.unit * (o[0] - t.pos[0]);
        g[2 * r.uav + 1] += w * 2.0 * self.unit * (o[1] - t.pos[1]);
    }
}

impl ConvexProgram for ScaSubproblem<'_> {
    fn dim(&self) -> usize {
        ScaSubproblem::dim(self)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let dev: f64 = self.rows.iter().enumerate().map(|(i, r)| r.power * self.lam(x, self.row_var(i))).sum();
        let leg: f64 = self.legs.iter().enumerate().map(|(l, g)| g.power * self.lam(x, self.leg_var(l))).sum();
        (dev + leg) / self.norm
    }

    fn gradient(&self, _x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        for (i, r) in self.rows.iter().enumerate() {
            g[self.row_var(i)] = r.power * self.scale[self.row_var(i)] / self.norm;
        }
        for (l, leg) in self.legs.iter().enumerate() {
            g[self.leg_var(l)] = leg.power * self.scale[self.leg_var(l)] / self.norm;
        }
    }

    fn num_constraints(&self) -> usize {
        2 * self.rows.len() + self.num_interf + self.legs.len()
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let w = self.s.phys.subband_hz;
        let mut c = 0;
        for (i, r) in self.rows.iter().enumerate() {
            let lam = self.lam(x, self.row_var(i));
            out[c] = r.bits / (w * lam) + self.signal_bound(x, r) + self.interference_bound(x, r);
            c += 1;
        }
        for r in &self.rows {
            let h2 = self.s.uavs[r.uav].altitude_m.powi(2);
            for t in &r.terms[1..] {
                out[c] = 0.5 * h2 - self.minorant(x, r, t);
                c += 1;
            }
        }
        for (l, leg) in self.legs.iter().enumerate() {
            out[c] = self.leg_bound(x, leg) - self.lam(x, self.leg_var(l));
            c += 1;
        }
        for (i, r) in self.rows.iter().enumerate() {
            let lam = self.lam(x, self.row_var(i)) + r.leg.map_or(0.0, |l| self.lam(x, self.leg_var(l)));
            out[c] = lam + r.fixed_delay + self.prop(x, r) - r.deadline;
            c += 1;
        }
    }

    fn add_constraint_gradients(&self, x: &[f64], wt: &[f64], g: &mut [f64]) {
        let w = self.s.phys.subband_hz;
        let g0 = self.s.phys.ref_gain;
        let noise = self.s.phys.noise_w;
        let mut c = 0;
        for (i, r) in self.rows.iter().enumerate() {
            let wi = wt[c];
            c += 1;
            if wi == 0.0 {
                continue;
            }
            let v = self.row_var(i);
            let lam = self.lam(x, v);
            g[v] -= wi * r.bits * self.scale[v] / (w * lam * lam);
            for (t, cf) in r.terms.iter().zip(&r.coeff) {
                self.add_sq_grad(r, t, x, wi * cf, g);
            }
            let mins: Vec<f64> = r.terms[1..].iter().map(|t| self.minorant(x, r, t)).collect();
            let i_tot: f64 = r.terms[1..]
                .iter()
                .zip(&mins)
                .map(|(t, &m)| t.power * channel::thz_gain_sq(g0, t.absorption, m))
                .sum::<f64>()
                + noise;
            let a = self.anchor[r.uav];
            for (t, &m) in r.terms[1..].iter().zip(&mins) {
                let dm = t.power * channel::thz_gain_sq_deriv(g0, t.absorption, m) / (LN_2 * i_tot);
                g[2 * r.uav] += wi * dm * 2.0 * (a[0] - t.pos[0]) * self.unit;
                g[2 * r.uav + 1] += wi * dm * 2.0 * (a[1] - t.pos[1]) * self.unit;
            }
        }
        for r in &self.rows {
            let a = self.anchor[r.uav];
            for t in &r.terms[1..] {
                let wi = wt[c];
                c += 1;
                g[2 * r.uav] -= wi * 2.0 * (a[0] - t.pos[0]) * self.unit;
                g[2 * r.uav + 1] -= wi * 2.0 * (a[1] - t.pos[1]) * self.unit;
            }
        }
        for (l, leg) in self.legs.iter().enumerate() {
            let wi = wt[c];
            c += 1;
            g[self.leg_var(l)] -= wi * self.scale[self.leg_var(l)];
            let a = self.pos(x, leg.from);
            let f = wi * leg.slope * 2.0 * self.unit;
            match leg.to {
                LegEnd::Uav(k2) => {
                    let b = self.pos(x, k2);
                    for e in 0..2 {
                        g[2 * leg.from + e] += f * (a[e] - b[e]);
                        g[2 * k2 + e] -= f * (a[e] - b[e]);
                    }
                }
                LegEnd::Sat(xy, _) => {
                    for e in 0..2 {
                        g[2 * leg.from + e] += f * (a[e] - xy[e]);
                    }
                }
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            let wi = wt[c];
            c += 1;
            g[self.row_var(i)] += wi * self.scale[self.row_var(i)];
            if let Some(l) = r.leg {
                g[self.leg_var(l)] += wi * self.scale[self.leg_var(l)];
            }
            if let Some((xy, dh)) = r.sat {
                let o = self.pos(x, r.uav);
                let dist = (sq_dist(o, xy) + dh * dh).sqrt();
                for e in 0..2 {
                    g[2 * r.uav + e] += wi * 2.0 / self.s.phys.light_speed * (o[e] - xy[e]) / dist * self.unit;
                }
            }
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }
}

#[derive(Debug, Clone)]
pub struct ScaStep {
    pub positions: Vec<[f64; 2]>,
    /// Surrogate optimum: bound on the position-dependent transmit energy, J.
    pub surrogate: f64,
    /// True objective at the accepted positions.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct DeployOutcome {
    pub positions: Vec<[f64; 2]>,
    pub trace: Vec<ScaStep>,
    pub converged: bool,
    /// No strictly feasible start at the anchor, or a subproblem failed.
    pub stalled: bool,
}

/// Runs the placement iterations from `d.uav_pos`.
pub fn deploy(s: &Scenario, d: &Decisions, opts: &DeployOptions) -> Result<DeployOutcome> {
    let mut cur = d.clone();
    let links = LinkTable::build(s, &cur.uav_pos, Exec::Sequential)?;
    let mut report = evaluate_with_links(s, &cur, &links);
    let mut trace = Vec::new();
    let mut prev = f64::NAN;
    let done = |cur: Decisions, trace, converged, stalled| {
        Ok(DeployOutcome { positions: cur.uav_pos, trace, converged, stalled })
    };
    if !report.feasible() {
        return done(cur, trace, false, true);
    }
    for _ in 0..opts.max_iter {
        let sub = ScaSubproblem::new(s, &cur, &report, opts);
        if sub.is_trivial() {
            return done(cur, trace, true, false);
        }
        let Some(x0) = sub.start(&report) else {
            return done(cur, trace, false, true);
        };
        let sol = match solve(&sub, &x0, &opts.solver) {
            Ok(sol) if sol.status != SolveStatus::InfeasibleStart => sol,
            _ => return done(cur, trace, false, true),
        };
        let mut cand = cur.clone();
        cand.uav_pos = sub.positions(&sol.x);
        let cand_links = LinkTable::build(s, &cand.uav_pos, Exec::Sequential)?;
        let cand_report = evaluate_with_links(s, &cand, &cand_links);
        if !cand_report.feasible() || cand_report.total > report.total {
            return done(cur, trace, true, false);
        }
        let surrogate = sub.energy(&sol.x);
        if prev.is_nan() {
            prev = sub.norm;
        }
        trace.push(ScaStep { positions: cand.uav_pos.clone(), surrogate, objective: cand_report.total });
        cur = cand;
        report = cand_report;
        let rel = (prev - surrogate).abs() / prev.abs().max(1e-300);
        prev = surrogate;
        if rel <= opts.tol {
            return done(cur, trace, true, false);
        }
    }
    done(cur, trace, false, false)
}
