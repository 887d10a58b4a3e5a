//! Offloaded-data block: with bands, powers, positions and routes fixed, each
//! device solves a one-dimensional linear program over its offloaded bits.
//!
//! CPU shares at the executing UAV are frozen at the incoming iterate. A device
//! that does not yet execute anywhere is priced at an equal split of the
//! executor's CPU among the devices routed to it.

use crate::channel::{self, LinkTable};
use crate::cost::{backhaul_aggregates, uav_workloads, Decisions, Route};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy)]
pub struct SplitOptions {
    /// Include UAV compute energy in the per-bit offloading price.
    pub price_uav_compute: bool,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { price_uav_compute: true }
    }
}

/// Linear model of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSplit {
    /// Smallest offload meeting the local deadline.
    pub lo: f64,
    /// Largest offload meeting the remote deadline.
    pub hi: f64,
    /// Energy per locally computed bit.
    pub local_price: f64,
    /// Energy per offloaded bit.
    pub offload_price: f64,
    /// Transmit power assumed for the price (current power, or the equal-split probe).
    pub tx_power: f64,
}

impl DeviceSplit {
    pub fn feasible(&self) -> bool {
        self.lo <= self.hi
    }

    /// Endpoint minimiser; ties go to the smaller offload. An empty interval
    /// returns `lo` so the local deadline still holds.
    pub fn best(&self) -> f64 {
        if !self.feasible() {
            return self.lo;
        }
        if self.offload_price < self.local_price {
            self.hi
        } else {
            self.lo
        }
    }

    pub fn cost(&self, data_bits: f64, beta: f64) -> f64 {
        self.local_price * (data_bits - beta) + self.offload_price * beta
    }
}

#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub offload_bits: Vec<f64>,
    pub models: Vec<DeviceSplit>,
    /// Devices whose feasible interval is empty.
    pub infeasible: Vec<usize>,
}

/// Builds every device's linear model at the frozen blocks of `d`.
pub fn split_models(s: &Scenario, d: &Decisions, links: &LinkTable, opts: &SplitOptions) -> Vec<DeviceSplit> {
    let n = s.num_devices();
    let workloads = uav_workloads(s, d);
    let (relay_agg, sat_agg) = backhaul_aggregates(s, d);
    let mut routed = vec![0usize; s.num_uavs()];
    for j in 0..n {
        if let Some(x) = d.routes[j].executor(s.association[j]) {
            routed[x] += 1;
        }
    }
    (0..n)
        .map(|j| {
            let dev = &s.devices[j];
            let k = s.association[j];
            let a = dev.data_bits;
            let alpha = dev.cycles_per_bit;
            let phi = dev.deadline_s;
            let lo = (a - dev.cpu_hz * phi / alpha).max(0.0);
            let local_price = dev.chip_coeff * dev.cpu_hz.powi(2) * alpha;

            let (rate, tx_power) = match d.bands[j] {
                None => (0.0, 0.0),
                Some(b) => {
                    let p = if d.powers[j] > 0.0 {
                        d.powers[j]
                    } else {
                        dev.max_power_w / s.num_subbands() as f64
                    };
                    let i = channel::interference(s, links, &d.bands, &d.powers, j, b);
                    let sinr = p * links.gain(j, k, b) / (i + s.phys.noise_w);
                    (channel::shannon(s.phys.subband_hz, sinr), p)
                }
            };
            if rate <= 0.0 {
                return DeviceSplit { lo, hi: 0.0, local_price, offload_price: f64::INFINITY, tx_power };
            }

            let beta_prev = d.offload_bits[j];
            let mut price = tx_power / rate;
            let mut slope = 1.0 / rate;
            let mut fixed = 0.0;
            let route = d.routes[j];
            if let Some(x) = route.executor(k) {
                let u = &s.uavs[x];
                let share = if beta_prev > 0.0 && workloads[x] > 0.0 {
                    alpha * beta_prev / workloads[x] * u.cpu_hz
                } else {
                    u.cpu_hz / routed[x].max(1) as f64
                };
                slope += alpha / share;
                if opts.price_uav_compute {
                    price += u.chip_coeff * share * share * alpha;
                }
            }
            let p_uav = s.uavs[k].tx_power_w;
            match route {
                Route::Serving => {}
                Route::Relay(k2) => {
                    let r = links.uav_rate[k][k2];
                    let others = relay_agg[k][k2] - beta_prev.max(0.0);
                    slope += 1.0 / r;
                    fixed += others.max(0.0) / r;
                    price += p_uav / r;
                }
                Route::Satellite(si) => {
                    let r = links.sat_rate[k][si];
                    let others = sat_agg[k][si] - beta_prev.max(0.0);
                    slope += 1.0 / r;
                    fixed += others.max(0.0) / r + links.sat_delay[k][si];
                    price += p_uav / r;
                }
            }
            let hi = if phi > fixed { ((phi - fixed) / slope).min(a) } else { 0.0 };
            DeviceSplit { lo, hi, local_price, offload_price: price, tx_power }
        })
        .collect()
}

/// Minimises every device's linear model.
pub fn solve_split(s: &Scenario, d: &Decisions, links: &LinkTable, opts: &SplitOptions) -> SplitOutcome {
    let models = split_models(s, d, links, opts);
    let offload_bits: Vec<f64> = models.iter().map(DeviceSplit::best).collect();
    let infeasible = models.iter().enumerate().filter(|(_, m)| !m.feasible()).map(|(j, _)| j).collect();
    SplitOutcome { offload_bits, models, infeasible }
}

/// Applies a split to `d`: new offloaders get the probe power, non-offloaders stop transmitting.
pub fn apply_split(d: &mut Decisions, out: &SplitOutcome) {
    for (j, &beta) in out.offload_bits.iter().enumerate() {
        d.offload_bits[j] = beta;
        if beta > 0.0 {
            if d.powers[j] <= 0.0 && d.bands[j].is_some() {
                d.powers[j] = out.models[j].tx_power;
            }
        } else {
            d.powers[j] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{solve, FnProgram, SolveOptions};
    use crate::par::Exec;
    use crate::scenario::{generate, SimConfig};

    fn setup(seed: u64) -> (Scenario, Decisions, LinkTable) {
        let s = generate(&SimConfig { num_devices: 8, num_uavs: 2, seed, ..Default::default() }).unwrap();
        let mut d = Decisions::all_local(&s);
        for (k, cell) in s.cells().iter().enumerate() {
            for (i, &j) in cell.iter().enumerate() {
                d.bands[j] = Some(i + k);
                d.powers[j] = 0.01;
            }
        }
        let links = LinkTable::build(&s, &d.uav_pos, Exec::Sequential).unwrap();
        (s, d, links)
    }

    #[test]
    fn endpoint_rule() {
        let m = DeviceSplit { lo: 1.0, hi: 5.0, local_price: 2.0, offload_price: 1.0, tx_power: 0.0 };
        assert_eq!(m.best(), 5.0);
        let m = DeviceSplit { offload_price: 3.0, ..m };
        assert_eq!(m.best(), 1.0);
        let m = DeviceSplit { offload_price: 2.0, ..m };
        assert_eq!(m.best(), 1.0);
        let m = DeviceSplit { lo: 6.0, ..m };
        assert!(!m.feasible());
        assert_eq!(m.best(), 6.0);
    }

    #[test]
    fn no_band_means_local() {
        let (s, mut d, links) = setup(1);
        d.bands[0] = None;
        let out = solve_split(&s, &d, &links, &SplitOptions::default());
        assert_eq!(out.offload_bits[0], 0.0);
    }

    #[test]
    fn matches_generic_solver() {
        for seed in 0..5 {
            let (s, d, links) = setup(seed);
            let out = solve_split(&s, &d, &links, &SplitOptions::default());
            for (j, m) in out.models.iter().enumerate() {
                if !m.feasible() || m.hi - m.lo < 1e-9 {
                    continue;
                }
                let scale = s.devices[j].data_bits;
                let norm = m.local_price.max(m.offload_price);
                let (lp, op) = (m.local_price / norm, m.offload_price / norm);
                let a = m.lo / scale;
                let b = m.hi / scale;
                let p = FnProgram::new(1, move |x| op * x[0] - lp * x[0], move |_, g| g[0] = op - lp)
                    .with_box(vec![a], vec![b]);
                let sol = solve(&p, &[0.5 * (a + b)], &SolveOptions::default()).unwrap();
                let generic = sol.x[0] * scale;
                if (op - lp).abs() > 1e-12 * lp.abs().max(op.abs()) {
                    assert!((generic - out.offload_bits[j]).abs() <= 1e-6 * scale, "device {j}");
                }
            }
        }
    }

    #[test]
    fn split_does_not_increase_linear_cost() {
        for seed in 0..10 {
            let (s, mut d, links) = setup(seed);
            for j in 0..s.num_devices() {
                d.offload_bits[j] = 0.3 * s.devices[j].data_bits;
            }
            let out = solve_split(&s, &d, &links, &SplitOptions::default());
            for (j, m) in out.models.iter().enumerate() {
                let a = s.devices[j].data_bits;
                let inc = d.offload_bits[j];
                if inc >= m.lo && inc <= m.hi {
                    assert!(m.cost(a, out.offload_bits[j]) <= m.cost(a, inc) * (1.0 + 1e-12));
                }
            }
        }
    }
}
