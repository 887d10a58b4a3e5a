//! UAV-side routing of offloaded tasks by block successive upper-bound
//! minimisation over relaxed route masses, followed by rounding and repair.
//!
//! Each offloading device spreads a unit mass over its destinations: the
//! serving UAV, every other UAV (relay) and every satellite. At an integral
//! point the relaxed energy and delays coincide with the true ones. The three
//! blocks (serving, relay, satellite masses) are updated in turn with a
//! proximal term; inside a block update the mass taken from or given to the
//! other blocks is spread in proportion to their masses at the anchor.

use crate::channel::LinkTable;
use crate::convex::{solve, ConvexProgram, SolveOptions, SolveStatus};
use crate::cost::{evaluate_with_links, CostReport, Decisions, Route, Violation};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy)]
pub struct OffloadOptions {
    /// Proximal weight on the normalised objective.
    pub mu: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Allow routes through other UAVs.
    pub allow_relay: bool,
    pub solver: SolveOptions,
}

impl Default for OffloadOptions {
    fn default() -> Self {
        Self {
            mu: 1.0,
            tol: 1e-4,
            max_iter: 100,
            allow_relay: true,
            solver: SolveOptions { max_iter: 200, ..SolveOptions::default() },
        }
    }
}

/// Block of route coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Serving,
    Relay,
    Satellite,
}

/// Destinations available to every offloading device, serving first, then relays, then satellites.
pub fn destinations(s: &Scenario, device: usize, allow_relay: bool) -> Vec<Route> {
    let k = s.association[device];
    let mut out = vec![Route::Serving];
    if allow_relay {
        out.extend((0..s.num_uavs()).filter(|&k2| k2 != k).map(Route::Relay));
    }
    out.extend((0..s.num_satellites()).map(Route::Satellite));
    out
}

fn block_of(r: Route) -> Block {
    match r {
        Route::Serving => Block::Serving,
        Route::Relay(_) => Block::Relay,
        Route::Satellite(_) => Block::Satellite,
    }
}

/// `q + (mu / 2) * |block - anchor|^2`.
pub fn proximal(q: f64, block: &[f64], anchor: &[f64], mu: f64) -> f64 {
    q + 0.5 * mu * block.iter().zip(anchor).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Relaxed routing model over the offloading devices.
#[derive(Debug, Clone)]
pub struct RelaxedModel {
    /// Global ids of the offloading devices.
    pub devices: Vec<usize>,
    /// Destinations of each device.
    pub options: Vec<Vec<Route>>,
    serving: Vec<usize>,
    bits: Vec<f64>,
    cycles: Vec<f64>,
    tx_delay: Vec<f64>,
    deadline: Vec<f64>,
    cpu: Vec<f64>,
    chip: Vec<f64>,
    uav_power: Vec<f64>,
    uav_rate: Vec<Vec<f64>>,
    sat_rate: Vec<Vec<f64>>,
    sat_delay: Vec<Vec<f64>>,
    num_sats: usize,
}

/// Aggregates of a relaxed point.
struct Loads {
    /// Executed cycles per UAV.
    work: Vec<f64>,
    /// Sum of cubed executed cycles per UAV.
    cubes: Vec<f64>,
    relay: Vec<Vec<f64>>,
    sat: Vec<Vec<f64>>,
}

impl RelaxedModel {
    pub fn new(s: &Scenario, d: &Decisions, links: &LinkTable, report: &CostReport, allow_relay: bool) -> Self {
        let devices: Vec<usize> = (0..s.num_devices()).filter(|&j| d.offload_bits[j] > 0.0).collect();
        Self {
            options: devices.iter().map(|&j| destinations(s, j, allow_relay)).collect(),
            serving: devices.iter().map(|&j| s.association[j]).collect(),
            bits: devices.iter().map(|&j| d.offload_bits[j]).collect(),
            cycles: devices.iter().map(|&j| d.offload_bits[j] * s.devices[j].cycles_per_bit).collect(),
            tx_delay: devices.iter().map(|&j| report.devices[j].tx_delay).collect(),
            deadline: devices.iter().map(|&j| s.devices[j].deadline_s).collect(),
            cpu: s.uavs.iter().map(|u| u.cpu_hz).collect(),
            chip: s.uavs.iter().map(|u| u.chip_coeff).collect(),
            uav_power: s.uavs.iter().map(|u| u.tx_power_w).collect(),
            uav_rate: links.uav_rate.clone(),
            sat_rate: links.sat_rate.clone(),
            sat_delay: links.sat_delay.clone(),
            num_sats: s.num_satellites(),
            devices,
        }
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// Integral masses of `routes` (global device indexing).
    pub fn indicator(&self, routes: &[Route]) -> Vec<Vec<f64>> {
        self.devices
            .iter()
            .zip(&self.options)
            .map(|(&j, opts)| opts.iter().map(|&r| if r == routes[j] { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    fn loads(&self, m: &[Vec<f64>]) -> Loads {
        let k_n = self.cpu.len();
        let mut l = Loads {
            work: vec![0.0; k_n],
            cubes: vec![0.0; k_n],
            relay: vec![vec![0.0; k_n]; k_n],
            sat: vec![vec![0.0; self.num_sats]; k_n],
        };
        for (i, row) in m.iter().enumerate() {
            let k = self.serving[i];
            for (o, &r) in self.options[i].iter().enumerate() {
                let mass = row[o];
                if let Some(x) = r.executor(k) {
                    let c = mass * self.cycles[i];
                    l.work[x] += c;
                    l.cubes[x] += c * c * c;
                }
                match r {
                    Route::Relay(k2) => l.relay[k][k2] += mass * self.bits[i],
                    Route::Satellite(si) => l.sat[k][si] += mass * self.bits[i],
                    Route::Serving => {}
                }
            }
        }
        l
    }

    /// Route-dependent energy: UAV compute plus backhaul transmission, J.
    pub fn energy(&self, m: &[Vec<f64>]) -> f64 {
        let l = self.loads(m);
        let mut e = 0.0;
        for x in 0..self.cpu.len() {
            if l.work[x] > 0.0 {
                e += self.chip[x] * self.cpu[x].powi(2) * l.cubes[x] / (l.work[x] * l.work[x]);
            }
            for k2 in 0..self.cpu.len() {
                if l.relay[x][k2] > 0.0 {
                    e += self.uav_power[x] * l.relay[x][k2] / self.uav_rate[x][k2];
                }
            }
            for si in 0..self.num_sats {
                e += self.uav_power[x] * l.sat[x][si] / self.sat_rate[x][si];
            }
        }
        e
    }

    /// d(energy)/d(mass) for every coordinate.
    fn energy_gradient(&self, m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let l = self.loads(m);
        let k_n = self.cpu.len();
        let coef: Vec<f64> = (0..k_n).map(|x| self.chip[x] * self.cpu[x].powi(2)).collect();
        m.iter()
            .enumerate()
            .map(|(i, row)| {
                let k = self.serving[i];
                self.options[i]
                    .iter()
                    .enumerate()
                    .map(|(o, &r)| {
                        let mut g = 0.0;
                        if let Some(x) = r.executor(k) {
                            let w = self.cycles[i];
                            let c = row[o] * w;
                            if l.work[x] > 0.0 {
                                let wx = l.work[x];
                                g += coef[x] * (3.0 * c * c * w / (wx * wx) - 2.0 * l.cubes[x] * w / (wx * wx * wx));
                            }
                        }
                        match r {
                            Route::Relay(k2) => g += self.uav_power[k] * self.bits[i] / self.uav_rate[k][k2],
                            Route::Satellite(si) => g += self.uav_power[k] * self.bits[i] / self.sat_rate[k][si],
                            Route::Serving => {}
                        }
                        g
                    })
                    .collect()
            })
            .collect()
    }

    /// Delay of each destination leg given the loads (compute plus backhaul).
    fn leg_delays(&self, l: &Loads, i: usize) -> Vec<f64> {
        let k = self.serving[i];
        self.options[i]
            .iter()
            .map(|&r| match r {
                Route::Serving => l.work[k] / self.cpu[k],
                Route::Relay(k2) => l.relay[k][k2] / self.uav_rate[k][k2] + l.work[k2] / self.cpu[k2],
                Route::Satellite(si) => l.sat[k][si] / self.sat_rate[k][si] + self.sat_delay[k][si],
            })
            .collect()
    }

    /// Relaxed end-to-end delay of every device.
    pub fn delays(&self, m: &[Vec<f64>]) -> Vec<f64> {
        let l = self.loads(m);
        (0..self.len())
            .map(|i| self.tx_delay[i] + self.leg_delays(&l, i).iter().zip(&m[i]).map(|(d, w)| d * w).sum::<f64>())
            .collect()
    }

    /// `sum_i w[i] * grad(delay_i)`.
    fn weighted_delay_gradient(&self, m: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
        let k_n = self.cpu.len();
        let l = self.loads(m);
        // sensitivities of the weighted delay sum to every aggregate
        let mut d_work = vec![0.0; k_n];
        let mut d_relay = vec![vec![0.0; k_n]; k_n];
        let mut d_sat = vec![vec![0.0; self.num_sats]; k_n];
        for i in 0..self.len() {
            let k = self.serving[i];
            for (o, &r) in self.options[i].iter().enumerate() {
                let wm = w[i] * m[i][o];
                match r {
                    Route::Serving => d_work[k] += wm / self.cpu[k],
                    Route::Relay(k2) => {
                        d_relay[k][k2] += wm / self.uav_rate[k][k2];
                        d_work[k2] += wm / self.cpu[k2];
                    }
                    Route::Satellite(si) => d_sat[k][si] += wm / self.sat_rate[k][si],
                }
            }
        }
        (0..self.len())
            .map(|i| {
                let k = self.serving[i];
                let legs = self.leg_delays(&l, i);
                self.options[i]
                    .iter()
                    .enumerate()
                    .map(|(o, &r)| {
                        let mut g = w[i] * legs[o];
                        if let Some(x) = r.executor(k) {
                            g += d_work[x] * self.cycles[i];
                        }
                        match r {
                            Route::Relay(k2) => g += d_relay[k][k2] * self.bits[i],
                            Route::Satellite(si) => g += d_sat[k][si] * self.bits[i],
                            Route::Serving => {}
                        }
                        g
                    })
                    .collect()
            })
            .collect()
    }
}

/// One block update as a program over (block coordinates, slack) per device.
pub struct BlockProblem<'a> {
    model: &'a RelaxedModel,
    anchor: &'a [Vec<f64>],
    /// Per device: option indices in the block.
    members: Vec<Vec<usize>>,
    /// Per device: offset of its coordinates in `x`.
    offset: Vec<usize>,
    /// Devices whose delay is constrained.
    constrained: Vec<usize>,
    mu: f64,
    norm: f64,
    dim: usize,
}

impl<'a> BlockProblem<'a> {
    pub fn new(model: &'a RelaxedModel, anchor: &'a [Vec<f64>], block: Block, mu: f64, norm: f64) -> Self {
        let members: Vec<Vec<usize>> = model
            .options
            .iter()
            .map(|opts| (0..opts.len()).filter(|&o| block_of(opts[o]) == block).collect())
            .collect();
        let mut offset = Vec::with_capacity(members.len());
        let mut dim = 0;
        for mem in &members {
            offset.push(dim);
            if !mem.is_empty() {
                dim += mem.len() + 1;
            }
        }
        let delays = model.delays(anchor);
        let constrained = (0..model.len()).filter(|&i| delays[i] < model.deadline[i]).collect();
        Self { model, anchor, members, offset, constrained, mu, norm, dim }
    }

    pub fn start(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        for (i, mem) in self.members.iter().enumerate() {
            if mem.is_empty() {
                continue;
            }
            let mut used = 0.0;
            for (t, &o) in mem.iter().enumerate() {
                x[self.offset[i] + t] = self.anchor[i][o];
                used += self.anchor[i][o];
            }
            x[self.offset[i] + mem.len()] = (1.0 - used).max(0.0);
        }
        x
    }

    /// Full masses for block coordinates `x`.
    pub fn masses(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut m = self.anchor.to_vec();
        for (i, mem) in self.members.iter().enumerate() {
            if mem.is_empty() {
                continue;
            }
            let slack = x[self.offset[i] + mem.len()];
            let rest: f64 = (0..m[i].len()).filter(|o| !mem.contains(o)).map(|o| self.anchor[i][o]).sum();
            let n_rest = m[i].len() - mem.len();
            for o in 0..m[i].len() {
                if let Some(t) = mem.iter().position(|&q| q == o) {
                    m[i][o] = x[self.offset[i] + t];
                } else if rest > 0.0 {
                    m[i][o] = slack * self.anchor[i][o] / rest;
                } else {
                    m[i][o] = slack / n_rest as f64;
                }
            }
        }
        m
    }

    /// Chain rule from full-mass gradients to block coordinates.
    fn pull_back(&self, full: &[Vec<f64>], g: &mut [f64], scale: f64) {
        for (i, mem) in self.members.iter().enumerate() {
            if mem.is_empty() {
                continue;
            }
            let rest: f64 = (0..full[i].len()).filter(|o| !mem.contains(o)).map(|o| self.anchor[i][o]).sum();
            let n_rest = full[i].len() - mem.len();
            let mut gs = 0.0;
            for o in 0..full[i].len() {
                if let Some(t) = mem.iter().position(|&q| q == o) {
                    g[self.offset[i] + t] += scale * full[i][o];
                } else if rest > 0.0 {
                    gs += full[i][o] * self.anchor[i][o] / rest;
                } else {
                    gs += full[i][o] / n_rest as f64;
                }
            }
            g[self.offset[i] + mem.len()] += scale * gs;
        }
    }

    fn block_distance_sq(&self, x: &[f64]) -> f64 {
        let mut d = 0.0;
        for (i, mem) in self.members.iter().enumerate() {
            for (t, &o) in mem.iter().enumerate() {
                d += (x[self.offset[i] + t] - self.anchor[i][o]).powi(2);
            }
        }
        d
    }
}

impl ConvexProgram for BlockProblem<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.model.energy(&self.masses(x)) / self.norm + 0.5 * self.mu * self.block_distance_sq(x)
    }

    fn gradient(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        let full = self.model.energy_gradient(&self.masses(x));
        self.pull_back(&full, g, 1.0 / self.norm);
        for (i, mem) in self.members.iter().enumerate() {
            for (t, &o) in mem.iter().enumerate() {
                g[self.offset[i] + t] += self.mu * (x[self.offset[i] + t] - self.anchor[i][o]);
            }
        }
    }

    fn num_constraints(&self) -> usize {
        self.constrained.len()
    }

    fn constraints(&self, x: &[f64], out: &mut [f64]) {
        let d = self.model.delays(&self.masses(x));
        for (c, &i) in self.constrained.iter().enumerate() {
            out[c] = (d[i] - self.model.deadline[i]) / self.model.deadline[i];
        }
    }

    fn add_constraint_gradients(&self, x: &[f64], w: &[f64], g: &mut [f64]) {
        let mut wd = vec![0.0; self.model.len()];
        for (c, &i) in self.constrained.iter().enumerate() {
            wd[i] = w[c] / self.model.deadline[i];
        }
        let full = self.model.weighted_delay_gradient(&self.masses(x), &wd);
        self.pull_back(&full, g, 1.0);
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.dim], vec![1.0; self.dim])
    }

    fn simplex_groups(&self) -> Vec<Vec<usize>> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, mem)| !mem.is_empty())
            .map(|(i, mem)| (self.offset[i]..=self.offset[i] + mem.len()).collect())
            .collect()
    }
}

/// Relaxed energy after one block update.
#[derive(Debug, Clone, Copy)]
pub struct BsumStep {
    pub block: Block,
    pub energy: f64,
    /// Proximal objective at the accepted point (normalised energy plus proximal term).
    pub proximal: f64,
}

#[derive(Debug, Clone)]
pub struct OffloadOutcome {
    pub routes: Vec<crate::cost::Route>,
    /// Relaxed masses at the end of the block iterations, per offloading device.
    pub relaxed: Vec<Vec<f64>>,
    pub trace: Vec<BsumStep>,
    pub iterations: usize,
    pub converged: bool,
    /// Devices still missing their deadline after repair.
    pub infeasible: Vec<usize>,
}

/// Block iterations on the relaxed masses from the integral point of `d.routes`.
pub fn relax(model: &RelaxedModel, start: Vec<Vec<f64>>, opts: &OffloadOptions) -> (Vec<Vec<f64>>, Vec<BsumStep>, usize, bool) {
    let mut m = start;
    let mut trace = Vec::new();
    let e0 = model.energy(&m);
    if model.is_empty() || !(e0 > 0.0) {
        return (m, trace, 0, true);
    }
    let mut prev = e0;
    for it in 0..opts.max_iter {
        for block in [Block::Serving, Block::Relay, Block::Satellite] {
            let bp = BlockProblem::new(model, &m, block, opts.mu, e0);
            if bp.dim == 0 {
                continue;
            }
            let x0 = bp.start();
            let at_anchor = bp.objective(&x0);
            let next = match solve(&bp, &x0, &opts.solver) {
                Ok(sol) if sol.status != SolveStatus::InfeasibleStart && sol.objective <= at_anchor => {
                    Some((bp.masses(&sol.x), sol.objective))
                }
                _ => None,
            };
            let (cand, prox) = next.unwrap_or((m.clone(), at_anchor));
            let e = model.energy(&cand);
            if e <= model.energy(&m) {
                m = cand;
                trace.push(BsumStep { block, energy: e, proximal: prox });
            } else {
                trace.push(BsumStep { block, energy: model.energy(&m), proximal: at_anchor });
            }
        }
        let cur = model.energy(&m);
        let rel = (prev - cur).abs() / prev.abs().max(1e-300);
        prev = cur;
        if rel <= opts.tol {
            return (m, trace, it + 1, true);
        }
    }
    (m, trace, opts.max_iter, false)
}

/// Largest-mass destination; ties go to the earlier option (serving, lowest relay, lowest satellite).
pub fn round(options: &[Route], masses: &[f64]) -> Route {
    let mut best = 0;
    for o in 1..masses.len() {
        if masses[o] > masses[best] {
            best = o;
        }
    }
    options[best]
}

fn remote_excess(report: &CostReport, j: usize) -> f64 {
    report
        .violations
        .iter()
        .filter_map(|v| match v {
            Violation::RemoteDeadline { device, delay, deadline } if *device == j => Some((delay - deadline) / deadline),
            _ => None,
        })
        .next()
        .unwrap_or(0.0)
}

/// Moves deadline violators, worst first, to their delay-minimal destination.
/// Returns the devices that still violate.
pub fn repair(s: &Scenario, d: &mut Decisions, links: &LinkTable, allow_relay: bool) -> Vec<usize> {
    let n = s.num_devices();
    let mut settled = vec![false; n];
    let mut report = evaluate_with_links(s, d, links);
    for _ in 0..n * (s.num_uavs() + s.num_satellites()) + 1 {
        let worst = (0..n)
            .filter(|&j| !settled[j] && d.offload_bits[j] > 0.0)
            .map(|j| (j, remote_excess(&report, j)))
            .filter(|&(_, e)| e > 0.0)
            .fold(None, |acc: Option<(usize, f64)>, (j, e)| match acc {
                Some((_, be)) if be >= e => acc,
                _ => Some((j, e)),
            });
        let Some((j, _)) = worst else { break };
        let cur = d.routes[j];
        let mut best = (cur, report.devices[j].remote_delay);
        for r in destinations(s, j, allow_relay) {
            if r == cur {
                continue;
            }
            d.routes[j] = r;
            let rep = evaluate_with_links(s, d, links);
            if rep.devices[j].remote_delay < best.1 {
                best = (r, rep.devices[j].remote_delay);
            }
        }
        d.routes[j] = best.0;
        if best.0 == cur {
            settled[j] = true;
        } else {
            report = evaluate_with_links(s, d, links);
        }
    }
    let report = evaluate_with_links(s, d, links);
    (0..n).filter(|&j| remote_excess(&report, j) > 0.0).collect()
}

/// Relaxation, rounding and repair for the routes of `d`.
pub fn route(s: &Scenario, d: &Decisions, links: &LinkTable, opts: &OffloadOptions) -> OffloadOutcome {
    let report = evaluate_with_links(s, d, links);
    let model = RelaxedModel::new(s, d, links, &report, opts.allow_relay);
    let mut start = d.routes.clone();
    for (i, &j) in model.devices.iter().enumerate() {
        if !model.options[i].contains(&start[j]) {
            start[j] = Route::Serving;
        }
    }
    let (relaxed, trace, iterations, converged) = relax(&model, model.indicator(&start), opts);
    let mut out = d.clone();
    for (i, &j) in model.devices.iter().enumerate() {
        out.routes[j] = round(&model.options[i], &relaxed[i]);
    }
    repair(s, &mut out, links, opts.allow_relay);
    let mut base = d.clone();
    base.routes = start;
    if strictly_better(merit(s, &base, links), merit(s, &out, links)) {
        out = base;
    }
    descend(s, &mut out, links, opts.allow_relay);
    let report = evaluate_with_links(s, &out, links);
    let infeasible = (0..s.num_devices()).filter(|&j| remote_excess(&report, j) > 0.0).collect();
    OffloadOutcome { routes: out.routes, relaxed, trace, iterations, converged, infeasible }
}

/// (deadline violation, total energy) of `d`.
fn merit(s: &Scenario, d: &Decisions, links: &LinkTable) -> (f64, f64) {
    let r = evaluate_with_links(s, d, links);
    (r.violation_measure(), r.total)
}

fn strictly_better(a: (f64, f64), b: (f64, f64)) -> bool {
    let tol = 1e-12 * b.0.abs().max(1.0);
    if a.0 < b.0 - tol {
        true
    } else if a.0 > b.0 + tol {
        false
    } else {
        a.1 < b.1 * (1.0 - 1e-12)
    }
}

/// Local search on routes: single-device moves, then joint moves of two
/// devices when no single move helps; first improvement in merit.
pub fn descend(s: &Scenario, d: &mut Decisions, links: &LinkTable, allow_relay: bool) {
    let active: Vec<usize> = (0..s.num_devices()).filter(|&j| d.offload_bits[j] > 0.0).collect();
    let options: Vec<Vec<Route>> = active.iter().map(|&j| destinations(s, j, allow_relay)).collect();
    let mut cur = merit(s, d, links);
    let max_passes = 4 * active.len() * (s.num_uavs() + s.num_satellites()) + 4;
    for _ in 0..max_passes {
        if !single_moves(s, d, links, &active, &options, &mut cur) && !pair_move(s, d, links, &active, &options, &mut cur) {
            break;
        }
    }
}

fn single_moves(
    s: &Scenario,
    d: &mut Decisions,
    links: &LinkTable,
    active: &[usize],
    options: &[Vec<Route>],
    cur: &mut (f64, f64),
) -> bool {
    let mut moved = false;
    for (t, &j) in active.iter().enumerate() {
        for &r in &options[t] {
            let prev = d.routes[j];
            if r == prev {
                continue;
            }
            d.routes[j] = r;
            let m = merit(s, d, links);
            if strictly_better(m, *cur) {
                *cur = m;
                moved = true;
            } else {
                d.routes[j] = prev;
            }
        }
    }
    moved
}

fn pair_move(
    s: &Scenario,
    d: &mut Decisions,
    links: &LinkTable,
    active: &[usize],
    options: &[Vec<Route>],
    cur: &mut (f64, f64),
) -> bool {
    for a in 0..active.len() {
        for b in a + 1..active.len() {
            let (ja, jb) = (active[a], active[b]);
            let (pa, pb) = (d.routes[ja], d.routes[jb]);
            for &ra in options[a].iter().filter(|&&r| r != pa) {
                for &rb in options[b].iter().filter(|&&r| r != pb) {
                    d.routes[ja] = ra;
                    d.routes[jb] = rb;
                    let m = merit(s, d, links);
                    if strictly_better(m, *cur) {
                        *cur = m;
                        return true;
                    }
                }
            }
            d.routes[ja] = pa;
            d.routes[jb] = pb;
        }
    }
    false
}

/// Largest number of offloading devices the exhaustive routing search accepts.
pub const MAX_EXHAUSTIVE_ROUTED: usize = 6;

/// Best deadline-feasible routing by enumeration (lowest total energy), if any.
pub fn exhaustive_routes(
    s: &Scenario,
    d: &Decisions,
    links: &LinkTable,
    allow_relay: bool,
) -> Result<Option<(Vec<Route>, f64)>> {
    let active: Vec<usize> = (0..s.num_devices()).filter(|&j| d.offload_bits[j] > 0.0).collect();
    if active.len() > MAX_EXHAUSTIVE_ROUTED {
        return Err(Error::Guard(format!(
            "{} offloading devices exceed the exhaustive routing limit of {MAX_EXHAUSTIVE_ROUTED}",
            active.len()
        )));
    }
    let options: Vec<Vec<Route>> = active.iter().map(|&j| destinations(s, j, allow_relay)).collect();
    let mut idx = vec![0usize; active.len()];
    let mut cur = d.clone();
    let mut best: Option<(Vec<Route>, f64)> = None;
    loop {
        for (t, &j) in active.iter().enumerate() {
            cur.routes[j] = options[t][idx[t]];
        }
        let rep = evaluate_with_links(s, &cur, links);
        if rep.feasible() && best.as_ref().map_or(true, |b| rep.total < b.1) {
            best = Some((cur.routes.clone(), rep.total));
        }
        let mut t = 0;
        loop {
            if t == idx.len() {
                return Ok(best);
            }
            idx[t] += 1;
            if idx[t] < options[t].len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
    }
}
