//! Network instances: ground devices, UAVs, satellites and the device-UAV association.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{InterferenceModel, PhysConfig, Preset, PresetName, Tolerances};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: usize,
    /// Ground position (x, y), m.
    pub pos: [f64; 2],
    /// Task size A, bits.
    pub data_bits: f64,
    /// Computation intensity alpha, cycles per bit.
    pub cycles_per_bit: f64,
    pub cpu_hz: f64,
    pub chip_coeff: f64,
    pub max_power_w: f64,
    pub deadline_s: f64,
}

impl Device {
    /// Total cycles of the whole task.
    pub fn total_cycles(&self) -> f64 {
        self.data_bits * self.cycles_per_bit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uav {
    pub id: usize,
    /// Initial horizontal position, m.
    pub pos: [f64; 2],
    pub altitude_m: f64,
    pub cpu_hz: f64,
    pub chip_coeff: f64,
    pub tx_power_w: f64,
    /// Allowed horizontal region: [[x_min, x_max], [y_min, y_max]].
    pub bounds: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satellite {
    pub id: usize,
    pub pos: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub preset: PresetName,
    pub area_m: f64,
    pub phys: PhysConfig,
    pub tolerances: Tolerances,
    pub devices: Vec<Device>,
    pub uavs: Vec<Uav>,
    pub satellites: Vec<Satellite>,
    /// Serving UAV of every device.
    pub association: Vec<usize>,
}

impl Scenario {
    pub fn num_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn num_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn num_satellites(&self) -> usize {
        self.satellites.len()
    }

    pub fn num_subbands(&self) -> usize {
        self.phys.num_subbands
    }

    /// Device ids of every cell, ascending.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.uavs.len()];
        for (j, &k) in self.association.iter().enumerate() {
            cells[k].push(j);
        }
        cells
    }

    /// Initial UAV positions.
    pub fn initial_positions(&self) -> Vec<[f64; 2]> {
        self.uavs.iter().map(|u| u.pos).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.phys.validate()?;
        if self.uavs.is_empty() {
            return Err(Error::Config("at least one UAV is required".into()));
        }
        if self.association.len() != self.devices.len() {
            return Err(Error::Config("association length differs from device count".into()));
        }
        if let Some(&k) = self.association.iter().find(|&&k| k >= self.uavs.len()) {
            return Err(Error::Config(format!("association refers to missing UAV {k}")));
        }
        for d in &self.devices {
            let ok = d.data_bits >= 0.0
                && d.cycles_per_bit > 0.0
                && d.cpu_hz > 0.0
                && d.chip_coeff >= 0.0
                && d.max_power_w > 0.0
                && d.deadline_s > 0.0;
            if !ok {
                return Err(Error::Config(format!("device {} has invalid parameters", d.id)));
            }
        }
        for u in &self.uavs {
            if !(u.cpu_hz > 0.0 && u.altitude_m > 0.0 && u.tx_power_w > 0.0) {
                return Err(Error::Config(format!("UAV {} has invalid parameters", u.id)));
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let s: Scenario = serde_json::from_reader(std::io::BufReader::new(f))?;
        s.validate()?;
        Ok(s)
    }
}

/// User-facing instance configuration. Unset fields fall back to the preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub preset: PresetName,
    pub seed: u64,
    pub area_m: Option<f64>,
    pub num_devices: usize,
    pub num_uavs: usize,
    pub num_satellites: usize,
    pub subbands: Option<usize>,
    pub data_bits: Option<[f64; 2]>,
    pub cycles_per_bit: Option<[f64; 2]>,
    pub device_cpu_hz: Option<[f64; 2]>,
    pub device_chip_coeff: Option<f64>,
    pub deadline_s: Option<f64>,
    pub max_tx_power_w: Option<f64>,
    pub uav_altitude_m: Option<f64>,
    pub uav_cpu_hz: Option<f64>,
    pub satellite_altitudes_m: Option<Vec<f64>>,
    pub interference: Option<InterferenceModel>,
    pub tolerances: Option<Tolerances>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            preset: PresetName::Physical,
            seed: 0,
            area_m: None,
            num_devices: 20,
            num_uavs: 2,
            num_satellites: 2,
            subbands: None,
            data_bits: None,
            cycles_per_bit: None,
            device_cpu_hz: None,
            device_chip_coeff: None,
            deadline_s: None,
            max_tx_power_w: None,
            uav_altitude_m: None,
            uav_cpu_hz: None,
            satellite_altitudes_m: None,
            interference: None,
            tolerances: None,
        }
    }
}

fn check_range(name: &str, r: [f64; 2], strictly_positive: bool) -> Result<()> {
    let lo_ok = if strictly_positive { r[0] > 0.0 } else { r[0] >= 0.0 };
    if !(lo_ok && r[1] >= r[0] && r[1].is_finite()) {
        return Err(Error::Config(format!("{name} range {r:?} is invalid")));
    }
    Ok(())
}

/// Absorption profile stretched over a different number of sub-bands.
fn resample_absorption(base: &[f64], b: usize) -> Vec<f64> {
    let lo = base.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if b == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..b).map(|i| lo + (hi - lo) * i as f64 / (b - 1) as f64).collect()
}

impl SimConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: SimConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_uavs == 0 {
            return Err(Error::Config("num_uavs must be at least 1".into()));
        }
        if self.num_devices < self.num_uavs {
            return Err(Error::Config(format!(
                "num_devices ({}) must be at least num_uavs ({})",
                self.num_devices, self.num_uavs
            )));
        }
        if let Some(a) = self.area_m {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("area_m must be positive, got {a}")));
            }
        }
        if self.subbands == Some(0) {
            return Err(Error::Config("subbands must be at least 1".into()));
        }
        if let Some(r) = self.data_bits {
            check_range("data_bits", r, false)?;
        }
        if let Some(r) = self.cycles_per_bit {
            check_range("cycles_per_bit", r, true)?;
        }
        if let Some(r) = self.device_cpu_hz {
            check_range("device_cpu_hz", r, true)?;
        }
        for (name, v) in [
            ("deadline_s", self.deadline_s),
            ("max_tx_power_w", self.max_tx_power_w),
            ("uav_altitude_m", self.uav_altitude_m),
            ("uav_cpu_hz", self.uav_cpu_hz),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(k) = self.device_chip_coeff {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::Config(format!("device_chip_coeff must be >= 0, got {k}")));
            }
        }
        if let Some(alts) = &self.satellite_altitudes_m {
            if alts.len() < self.num_satellites {
                return Err(Error::Config(format!(
                    "{} satellite altitudes given for {} satellites",
                    alts.len(),
                    self.num_satellites
                )));
            }
            if alts.iter().any(|a| !(*a > 0.0)) {
                return Err(Error::Config("satellite altitudes must be positive".into()));
            }
        }
        Ok(())
    }

    /// Preset with every override applied.
    pub fn resolved_preset(&self) -> Preset {
        let mut p = Preset::get(self.preset);
        if let Some(b) = self.subbands {
            p.phys.absorption = resample_absorption(&p.phys.absorption, b);
            p.phys.num_subbands = b;
        }
        if let Some(a) = self.area_m {
            p.area_m = a;
        }
        if let Some(r) = self.data_bits {
            p.device.data_bits = r;
        }
        if let Some(r) = self.cycles_per_bit {
            p.device.cycles_per_bit = r;
        }
        if let Some(r) = self.device_cpu_hz {
            p.device.cpu_hz = r;
        }
        if let Some(k) = self.device_chip_coeff {
            p.device.chip_coeff = k;
        }
        if let Some(v) = self.deadline_s {
            p.device.deadline_s = v;
        }
        if let Some(v) = self.max_tx_power_w {
            p.device.max_tx_power_w = v;
        }
        if let Some(v) = self.uav_altitude_m {
            p.uav.altitude_m = v;
        }
        if let Some(v) = self.uav_cpu_hz {
            p.uav.cpu_hz = v;
        }
        if let Some(a) = &self.satellite_altitudes_m {
            p.satellite_altitudes_m = a.clone();
        }
        if let Some(m) = self.interference {
            p.phys.interference = m;
        }
        if let Some(t) = self.tolerances {
            p.tolerances = t;
        }
        p
    }
}

fn uniform(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.gen_range(r[0]..r[1])
    } else {
        r[0]
    }
}

/// Draws a reproducible instance and associates devices to UAVs by K-means.
pub fn generate(cfg: &SimConfig) -> Result<Scenario> {
    cfg.validate()?;
    let p = cfg.resolved_preset();
    p.phys.validate()?;
    let area = p.area_m;

    let mut pos_rng = substream(cfg.seed, "device-positions");
    let mut task_rng = substream(cfg.seed, "device-tasks");
    let devices: Vec<Device> = (0..cfg.num_devices)
        .map(|id| {
            let pos = [pos_rng.gen_range(0.0..area), pos_rng.gen_range(0.0..area)];
            Device {
                id,
                pos,
                data_bits: uniform(&mut task_rng, p.device.data_bits),
                cycles_per_bit: uniform(&mut task_rng, p.device.cycles_per_bit),
                cpu_hz: uniform(&mut task_rng, p.device.cpu_hz),
                chip_coeff: p.device.chip_coeff,
                max_power_w: p.device.max_tx_power_w,
                deadline_s: p.device.deadline_s,
            }
        })
        .collect();

    let points: Vec<[f64; 2]> = devices.iter().map(|d| d.pos).collect();
    let mut km_rng = substream(cfg.seed, "kmeans");
    let km = kmeans(&points, cfg.num_uavs, &mut km_rng, KMeansOptions::default())?;

    let bounds = [[0.0, area], [0.0, area]];
    let uavs = km
        .centroids
        .iter()
        .enumerate()
        .map(|(id, c)| Uav {
            id,
            pos: [c[0].clamp(0.0, area), c[1].clamp(0.0, area)],
            altitude_m: p.uav.altitude_m,
            cpu_hz: p.uav.cpu_hz,
            chip_coeff: p.uav.chip_coeff,
            tx_power_w: p.uav.tx_power_w,
            bounds,
        })
        .collect();

    let mut alts = p.satellite_altitudes_m.clone();
    while alts.len() < cfg.num_satellites {
        let last = alts.last().copied().unwrap_or(780e3);
        alts.push(last + 20e3);
    }
    let satellites = (0..cfg.num_satellites)
        .map(|id| Satellite { id, pos: [area / 2.0, area / 2.0, alts[id]] })
        .collect();

    let s = Scenario {
        seed: cfg.seed,
        preset: cfg.preset,
        area_m: area,
        phys: p.phys,
        tolerances: p.tolerances,
        devices,
        uavs,
        satellites,
        association: km.labels,
    };
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, Copy)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop when no centroid moves more than this, m.
    pub shift_tol: f64,
    /// Independent k-means++ restarts; the lowest within-cluster SSE wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { max_iter: 100, shift_tol: 1e-6, restarts: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub sse: f64,
    /// SSE after every assignment step of the winning restart.
    pub sse_history: Vec<f64>,
}

fn sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(p: [f64; 2], cs: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &c) in cs.iter().enumerate() {
        let d = sq(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn seed_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let mut cs = vec![points[rng.gen_range(0..points.len())]];
    while cs.len() < k {
        let d2: Vec<f64> = points.iter().map(|&p| nearest(p, &cs).1).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        cs.push(points[next]);
    }
    cs
}

fn lloyd(points: &[[f64; 2]], mut cs: Vec<[f64; 2]>, opts: &KMeansOptions) -> KMeansResult {
    let k = cs.len();
    let mut labels = vec![0; points.len()];
    let mut history = Vec::new();
    for _ in 0..opts.max_iter.max(1) {
        let mut sse = 0.0;
        for (i, &p) in points.iter().enumerate() {
            let (l, d) = nearest(p, &cs);
            labels[i] = l;
            sse += d;
        }
        history.push(sse);
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (i, &p) in points.iter().enumerate() {
            sums[labels[i]][0] += p[0];
            sums[labels[i]][1] += p[1];
            counts[labels[i]] += 1;
        }
        let mut shift: f64 = 0.0;
        let mut next = cs.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            } else {
                // Empty cluster: move it onto the worst-served point.
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq(points[a], cs[labels[a]]);
                        let db = sq(points[b], cs[labels[b]]);
                        da.partial_cmp(&db).unwrap().then(b.cmp(&a))
                    })
                    .unwrap();
                next[c] = points[far];
            }
            shift = shift.max(sq(next[c], cs[c]).sqrt());
        }
        cs = next;
        if shift < opts.shift_tol {
            break;
        }
    }
    let mut sse = 0.0;
    for (i, &p) in points.iter().enumerate() {
        let (l, d) = nearest(p, &cs);
        labels[i] = l;
        sse += d;
    }
    history.push(sse);
    KMeansResult { labels, centroids: cs, sse, sse_history: history }
}

/// K-means with k-means++ seeding and several restarts.
pub fn kmeans(
    points: &[[f64; 2]],
    k: usize,
    rng: &mut impl Rng,
    opts: KMeansOptions,
) -> Result<KMeansResult> {
    if k == 0 || points.len() < k {
        return Err(Error::Config(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..opts.restarts.max(1) {
        let r = lloyd(points, seed_plus_plus(points, k, rng), &opts);
        if best.as_ref().map_or(true, |b| r.sse < b.sse - 1e-9 * b.sse.max(1.0)) {
            best = Some(r);
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig { seed: 42, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(&SimConfig { seed: 43, ..Default::default() }).unwrap();
        assert_ne!(a.devices, c.devices);
    }

    #[test]
    fn single_device_single_uav() {
        let cfg = SimConfig { num_devices: 1, num_uavs: 1, num_satellites: 0, seed: 3, ..Default::default() };
        let s = generate(&cfg).unwrap();
        assert_eq!(s.association, vec![0]);
        assert_eq!(s.uavs[0].pos, s.devices[0].pos);
        assert!(s.satellites.is_empty());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SimConfig { num_uavs: 0, ..Default::default() },
            SimConfig { num_devices: 1, num_uavs: 2, ..Default::default() },
            SimConfig { area_m: Some(-1.0), ..Default::default() },
            SimConfig { subbands: Some(0), ..Default::default() },
            SimConfig { data_bits: Some([2.0, 1.0]), ..Default::default() },
        ];
        for c in bad {
            assert!(generate(&c).is_err(), "{c:?}");
        }
        assert!(SimConfig::from_json_str(r#"{"num_devices": 4, "bogus": 1}"#).is_err());
    }

    #[test]
    fn subband_override_resamples_absorption() {
        let cfg = SimConfig { subbands: Some(5), ..Default::default() };
        let p = cfg.resolved_preset();
        assert_eq!(p.phys.absorption.len(), 5);
        assert!((p.phys.absorption[0] - 0.0025).abs() < 1e-12);
        assert!((p.phys.absorption[4] - 0.0075).abs() < 1e-12);
    }

    #[test]
    fn satellites_overhead_center() {
        let s = generate(&SimConfig::default()).unwrap();
        assert_eq!(s.satellites.len(), 2);
        assert_eq!(s.satellites[0].pos, [300.0, 300.0, 780e3]);
        assert_eq!(s.satellites[1].pos, [300.0, 300.0, 800e3]);
    }

    #[test]
    fn kmeans_sse_never_increases() {
        let s = generate(&SimConfig { num_devices: 40, num_uavs: 4, seed: 11, ..Default::default() }).unwrap();
        let pts: Vec<_> = s.devices.iter().map(|d| d.pos).collect();
        let r = kmeans(&pts, 4, &mut substream(1, "t"), KMeansOptions::default()).unwrap();
        for w in r.sse_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}
