//! Delay and energy accounting, the system objective and constraint checks.

use serde::{Deserialize, Serialize};

use crate::channel::{self, LinkTable};
use crate::error::Result;
use crate::par::Exec;
use crate::scenario::Scenario;

/// Where the offloaded part of a task is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Route {
    /// Computed on the serving UAV.
    Serving,
    /// Relayed to and computed on another UAV.
    Relay(usize),
    /// Relayed to a satellite.
    Satellite(usize),
}

impl Route {
    /// Executing UAV, if the task stays in the air layer.
    pub fn executor(self, serving: usize) -> Option<usize> {
        match self {
            Route::Serving => Some(serving),
            Route::Relay(k) => Some(k),
            Route::Satellite(_) => None,
        }
    }

    /// Indicator view `(w, v[k'], z[s])` of this route.
    pub fn indicators(self, num_uavs: usize, num_sats: usize) -> (bool, Vec<bool>, Vec<bool>) {
        let mut v = vec![false; num_uavs];
        let mut z = vec![false; num_sats];
        let w = match self {
            Route::Serving => true,
            Route::Relay(k) => {
                v[k] = true;
                false
            }
            Route::Satellite(s) => {
                z[s] = true;
                false
            }
        };
        (w, v, z)
    }
}

/// One point in the decision space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    /// Offloaded bits per device.
    pub offload_bits: Vec<f64>,
    pub bands: Vec<Option<usize>>,
    pub powers: Vec<f64>,
    pub uav_pos: Vec<[f64; 2]>,
    pub routes: Vec<Route>,
}

impl Decisions {
    /// Everything local, no bands, UAVs at their initial positions.
    pub fn all_local(s: &Scenario) -> Self {
        let j = s.num_devices();
        Self {
            offload_bits: vec![0.0; j],
            bands: vec![None; j],
            powers: vec![0.0; j],
            uav_pos: s.initial_positions(),
            routes: vec![Route::Serving; j],
        }
    }

    pub fn offload_fraction(&self, s: &Scenario) -> f64 {
        let total: f64 = s.devices.iter().map(|d| d.data_bits).sum();
        if total > 0.0 {
            self.offload_bits.iter().sum::<f64>() / total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    LocalDeadline { device: usize, delay: f64, deadline: f64 },
    RemoteDeadline { device: usize, delay: f64, deadline: f64 },
    OffloadRange { device: usize, bits: f64 },
    PowerRange { device: usize, power: f64 },
    MissingBand { device: usize },
    BandOutOfRange { device: usize, band: usize },
    BandConflict { uav: usize, band: usize, devices: (usize, usize) },
    InvalidRoute { device: usize, route: Route },
    PositionOutOfBounds { uav: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceCost {
    pub local_delay: f64,
    pub local_energy: f64,
    pub rate: f64,
    pub tx_delay: f64,
    pub tx_energy: f64,
    /// Compute delay at the executing node.
    pub compute_delay: f64,
    /// Backhaul (relay or satellite) delay including propagation.
    pub backhaul_delay: f64,
    /// Access + backhaul + compute; zero when nothing is offloaded.
    pub remote_delay: f64,
    /// CPU share granted by the executing UAV, Hz.
    pub cpu_share: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UavCost {
    /// Cycles executed on this UAV.
    pub workload: f64,
    pub compute_energy: f64,
    pub relay_energy: f64,
    pub satellite_energy: f64,
}

impl UavCost {
    pub fn total(&self) -> f64 {
        self.compute_energy + self.relay_energy + self.satellite_energy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub devices: Vec<DeviceCost>,
    pub uavs: Vec<UavCost>,
    pub device_energy: f64,
    pub uav_energy: f64,
    pub total: f64,
    pub violations: Vec<Violation>,
}

/// Relative slack allowed on deadline checks.
pub const DEADLINE_RTOL: f64 = 1e-9;

impl CostReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// Scalar size of the constraint violation; zero iff feasible.
    pub fn violation_measure(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| match v {
                Violation::LocalDeadline { delay, deadline, .. }
                | Violation::RemoteDeadline { delay, deadline, .. } => {
                    ((delay - deadline) / deadline).min(1e6)
                }
                _ => 1e6,
            })
            .sum()
    }

    pub fn sum_rate(&self) -> f64 {
        self.devices.iter().map(|d| d.rate).sum()
    }
}

/// Relay aggregates `[k][k']` and satellite aggregates `[k][s]`, bits.
pub fn backhaul_aggregates(s: &Scenario, d: &Decisions) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k_n = s.num_uavs();
    let mut relay = vec![vec![0.0; k_n]; k_n];
    let mut sat = vec![vec![0.0; s.num_satellites()]; k_n];
    for (j, &beta) in d.offload_bits.iter().enumerate() {
        if beta <= 0.0 {
            continue;
        }
        let k = s.association[j];
        match d.routes[j] {
            Route::Serving => {}
            Route::Relay(k2) if k2 < k_n && k2 != k => relay[k][k2] += beta,
            Route::Satellite(si) if si < s.num_satellites() => sat[k][si] += beta,
            _ => {}
        }
    }
    (relay, sat)
}

/// Cycles executed on every UAV.
pub fn uav_workloads(s: &Scenario, d: &Decisions) -> Vec<f64> {
    let mut w = vec![0.0; s.num_uavs()];
    for (j, &beta) in d.offload_bits.iter().enumerate() {
        if beta <= 0.0 {
            continue;
        }
        if let Some(x) = d.routes[j].executor(s.association[j]) {
            if x < w.len() {
                w[x] += beta * s.devices[j].cycles_per_bit;
            }
        }
    }
    w
}

fn route_valid(s: &Scenario, j: usize, r: Route) -> bool {
    match r {
        Route::Serving => true,
        Route::Relay(k) => k < s.num_uavs() && k != s.association[j],
        Route::Satellite(si) => si < s.num_satellites(),
    }
}

/// Full cost breakdown with link quantities already computed for `d.uav_pos`.
pub fn evaluate_with_links(s: &Scenario, d: &Decisions, links: &LinkTable) -> CostReport {
    let n = s.num_devices();
    let k_n = s.num_uavs();
    let rates = channel::access_rates(s, links, &d.bands, &d.powers);
    let workloads = uav_workloads(s, d);
    let (relay_agg, sat_agg) = backhaul_aggregates(s, d);
    let mut violations = Vec::new();

    let mut devs = Vec::with_capacity(n);
    let mut uavs: Vec<UavCost> =
        workloads.iter().map(|&w| UavCost { workload: w, ..Default::default() }).collect();

    for j in 0..n {
        let dev = &s.devices[j];
        let beta = d.offload_bits[j];
        let k = s.association[j];
        let mut c = DeviceCost::default();
        if !(beta >= -1e-12 && beta <= dev.data_bits * (1.0 + 1e-12) + 1e-12) {
            violations.push(Violation::OffloadRange { device: j, bits: beta });
        }
        let beta = beta.clamp(0.0, dev.data_bits);
        let local_bits = dev.data_bits - beta;
        c.local_delay = local_bits * dev.cycles_per_bit / dev.cpu_hz;
        c.local_energy = dev.chip_coeff * dev.cpu_hz.powi(2) * dev.cycles_per_bit * local_bits;
        let p = d.powers[j];
        if !(p >= 0.0 && p <= dev.max_power_w * (1.0 + 1e-12)) {
            violations.push(Violation::PowerRange { device: j, power: p });
        }
        if let Some(b) = d.bands[j] {
            if b >= s.num_subbands() {
                violations.push(Violation::BandOutOfRange { device: j, band: b });
            }
        }
        c.rate = if d.bands[j].map_or(false, |b| b < s.num_subbands()) { rates[j] } else { 0.0 };
        let route = d.routes[j];
        if !route_valid(s, j, route) {
            violations.push(Violation::InvalidRoute { device: j, route });
        }

        if beta > 0.0 {
            if d.bands[j].is_none() {
                violations.push(Violation::MissingBand { device: j });
            }
            if c.rate > 0.0 {
                c.tx_delay = beta / c.rate;
                c.tx_energy = p * c.tx_delay;
            } else {
                c.tx_delay = f64::INFINITY;
                c.tx_energy = f64::INFINITY;
            }
            let w_j = beta * dev.cycles_per_bit;
            if route_valid(s, j, route) {
                if let Some(x) = route.executor(k) {
                    let u = &s.uavs[x];
                    c.cpu_share = w_j / workloads[x] * u.cpu_hz;
                    c.compute_delay = workloads[x] / u.cpu_hz;
                    uavs[x].compute_energy += u.chip_coeff * c.cpu_share.powi(2) * w_j;
                }
                match route {
                    Route::Serving => {}
                    Route::Relay(k2) => {
                        c.backhaul_delay = relay_agg[k][k2] / links.uav_rate[k][k2];
                    }
                    Route::Satellite(si) => {
                        c.backhaul_delay = sat_agg[k][si] / links.sat_rate[k][si] + links.sat_delay[k][si];
                    }
                }
            } else {
                c.compute_delay = f64::INFINITY;
            }
            c.remote_delay = c.tx_delay + c.backhaul_delay + c.compute_delay;
        }

        let phi = dev.deadline_s;
        if c.local_delay > phi * (1.0 + DEADLINE_RTOL) {
            violations.push(Violation::LocalDeadline { device: j, delay: c.local_delay, deadline: phi });
        }
        if c.remote_delay > phi * (1.0 + DEADLINE_RTOL) {
            violations.push(Violation::RemoteDeadline { device: j, delay: c.remote_delay, deadline: phi });
        }
        devs.push(c);
    }

    for k in 0..k_n {
        let p = s.uavs[k].tx_power_w;
        for k2 in 0..k_n {
            if relay_agg[k][k2] > 0.0 {
                uavs[k].relay_energy += p * relay_agg[k][k2] / links.uav_rate[k][k2];
            }
        }
        for si in 0..s.num_satellites() {
            if sat_agg[k][si] > 0.0 {
                uavs[k].satellite_energy += p * sat_agg[k][si] / links.sat_rate[k][si];
            }
        }
    }

    // one device per (cell, band)
    let mut owner = vec![vec![None; s.num_subbands()]; k_n];
    for j in 0..n {
        if let Some(b) = d.bands[j] {
            if b >= s.num_subbands() {
                continue;
            }
            let k = s.association[j];
            match owner[k][b] {
                None => owner[k][b] = Some(j),
                Some(o) => violations.push(Violation::BandConflict { uav: k, band: b, devices: (o, j) }),
            }
        }
    }
    for (k, pos) in d.uav_pos.iter().enumerate() {
        let bd = s.uavs[k].bounds;
        let eps = 1e-9;
        if pos[0] < bd[0][0] - eps || pos[0] > bd[0][1] + eps || pos[1] < bd[1][0] - eps || pos[1] > bd[1][1] + eps {
            violations.push(Violation::PositionOutOfBounds { uav: k });
        }
    }

    let device_energy: f64 = devs.iter().map(|c| c.local_energy + c.tx_energy).sum();
    let uav_energy: f64 = uavs.iter().map(UavCost::total).sum();
    CostReport { devices: devs, uavs, device_energy, uav_energy, total: device_energy + uav_energy, violations }
}

pub fn evaluate(s: &Scenario, d: &Decisions) -> Result<CostReport> {
    let links = LinkTable::build(s, &d.uav_pos, Exec::Sequential)?;
    Ok(evaluate_with_links(s, d, &links))
}

/// Total energy only.
pub fn objective(s: &Scenario, d: &Decisions) -> Result<f64> {
    Ok(evaluate(s, d)?.total)
}
