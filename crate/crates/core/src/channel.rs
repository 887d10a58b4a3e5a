//! THz access links, mmWave backhaul links and satellite propagation delay.

use crate::constants::{InterferenceModel, PhysConfig};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::scenario::Scenario;

/// 3-D distance between a ground point and a UAV at horizontal `uav` and altitude `h`.
pub fn ground_to_air_distance(ground: [f64; 2], uav: [f64; 2], h: f64) -> f64 {
    ((ground[0] - uav[0]).powi(2) + (ground[1] - uav[1]).powi(2) + h * h).sqrt()
}

/// THz channel gain `g0 d^-2 exp(-i d)`.
pub fn thz_gain(ref_gain: f64, absorption: f64, dist: f64) -> Result<f64> {
    if !(dist > 0.0) || !dist.is_finite() {
        return Err(Error::Domain(format!("link distance must be positive, got {dist}")));
    }
    Ok(ref_gain * (-absorption * dist).exp() / (dist * dist))
}

/// THz gain as a function of squared distance; used by the placement solver.
pub fn thz_gain_sq(ref_gain: f64, absorption: f64, dist_sq: f64) -> f64 {
    ref_gain * (-absorption * dist_sq.sqrt()).exp() / dist_sq
}

/// d/d(dist_sq) of [`thz_gain_sq`].
pub fn thz_gain_sq_deriv(ref_gain: f64, absorption: f64, dist_sq: f64) -> f64 {
    let d = dist_sq.sqrt();
    -thz_gain_sq(ref_gain, absorption, dist_sq) * (1.0 / dist_sq + absorption / (2.0 * d))
}

/// Shannon rate in bit/s.
pub fn shannon(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

/// Free-space mmWave SNR at distance `dist`.
pub fn mm_snr(phys: &PhysConfig, tx_power: f64, dist: f64, bandwidth: f64) -> Result<f64> {
    if !(dist > 0.0) || !dist.is_finite() {
        return Err(Error::Domain(format!("backhaul distance must be positive, got {dist}")));
    }
    Ok(mm_snr_sq(phys, tx_power, dist * dist, bandwidth))
}

/// mmWave SNR as a function of squared distance.
pub fn mm_snr_sq(phys: &PhysConfig, tx_power: f64, dist_sq: f64, bandwidth: f64) -> f64 {
    mm_snr_coeff(phys, tx_power, bandwidth) / dist_sq
}

/// SNR times squared distance, a per-link constant.
pub fn mm_snr_coeff(phys: &PhysConfig, tx_power: f64, bandwidth: f64) -> f64 {
    let lambda = phys.light_speed / (4.0 * std::f64::consts::PI * phys.mm_carrier_hz);
    tx_power * phys.antenna_gain_tx * phys.antenna_gain_rx * phys.amp_factor * lambda * lambda
        / (phys.noise_temp_k * phys.boltzmann * bandwidth)
}

pub fn mm_rate(phys: &PhysConfig, tx_power: f64, dist: f64, bandwidth: f64) -> Result<f64> {
    Ok(shannon(bandwidth, mm_snr(phys, tx_power, dist, bandwidth)?))
}

/// Round-trip propagation delay over distance `dist`, s.
pub fn round_trip_delay(phys: &PhysConfig, dist: f64) -> f64 {
    2.0 * dist / phys.light_speed
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Link quantities for one set of UAV positions.
#[derive(Debug, Clone)]
pub struct LinkTable {
    num_uavs: usize,
    num_bands: usize,
    /// Access gain, indexed `[(j * K + k) * B + b]`.
    gains: Vec<f64>,
    /// UAV-UAV backhaul rate `[k][k']`, bit/s (zero on the diagonal).
    pub uav_rate: Vec<Vec<f64>>,
    /// UAV-satellite backhaul rate `[k][s]`, bit/s.
    pub sat_rate: Vec<Vec<f64>>,
    /// UAV-satellite round-trip propagation delay `[k][s]`, s.
    pub sat_delay: Vec<Vec<f64>>,
}

impl LinkTable {
    pub fn build(s: &Scenario, uav_pos: &[[f64; 2]], exec: Exec) -> Result<Self> {
        let k_n = s.num_uavs();
        let b_n = s.num_subbands();
        if uav_pos.len() != k_n {
            return Err(Error::Precondition("one position per UAV required".into()));
        }
        let phys = &s.phys;
        let rows: Vec<Result<Vec<f64>>> = par::map(exec, &s.devices, |d| {
            let mut row = Vec::with_capacity(k_n * b_n);
            for (k, u) in s.uavs.iter().enumerate() {
                let dist = ground_to_air_distance(d.pos, uav_pos[k], u.altitude_m);
                for b in 0..b_n {
                    row.push(thz_gain(phys.ref_gain, phys.absorption(b), dist)?);
                }
            }
            Ok(row)
        });
        let mut gains = Vec::with_capacity(s.num_devices() * k_n * b_n);
        for r in rows {
            gains.extend(r?);
        }

        let mut uav_rate = vec![vec![0.0; k_n]; k_n];
        for k in 0..k_n {
            for k2 in 0..k_n {
                if k == k2 {
                    continue;
                }
                let a = [uav_pos[k][0], uav_pos[k][1], s.uavs[k].altitude_m];
                let b = [uav_pos[k2][0], uav_pos[k2][1], s.uavs[k2].altitude_m];
                uav_rate[k][k2] =
                    mm_rate(phys, s.uavs[k].tx_power_w, dist3(a, b), phys.mm_bandwidth_uav_hz)?;
            }
        }
        let mut sat_rate = vec![vec![0.0; s.num_satellites()]; k_n];
        let mut sat_delay = vec![vec![0.0; s.num_satellites()]; k_n];
        for k in 0..k_n {
            let a = [uav_pos[k][0], uav_pos[k][1], s.uavs[k].altitude_m];
            for (si, sat) in s.satellites.iter().enumerate() {
                let d = dist3(a, sat.pos);
                sat_rate[k][si] = mm_rate(phys, s.uavs[k].tx_power_w, d, phys.mm_bandwidth_sat_hz)?;
                sat_delay[k][si] = round_trip_delay(phys, d);
            }
        }
        Ok(Self { num_uavs: k_n, num_bands: b_n, gains, uav_rate, sat_rate, sat_delay })
    }

    #[inline]
    pub fn gain(&self, device: usize, uav: usize, band: usize) -> f64 {
        self.gains[(device * self.num_uavs + uav) * self.num_bands + band]
    }
}

/// Whether `other` interferes with `device` at the latter's UAV.
#[inline]
pub fn interferes(model: InterferenceModel, assoc: &[usize], device: usize, other: usize) -> bool {
    other != device
        && match model {
            InterferenceModel::OtherCells => assoc[other] != assoc[device],
            InterferenceModel::AllDevices => true,
        }
}

/// Interference power seen by `device` on `band` at its serving UAV.
pub fn interference(
    s: &Scenario,
    links: &LinkTable,
    bands: &[Option<usize>],
    powers: &[f64],
    device: usize,
    band: usize,
) -> f64 {
    let k = s.association[device];
    let mut total = 0.0;
    for (o, bo) in bands.iter().enumerate() {
        if *bo == Some(band) && interferes(s.phys.interference, &s.association, device, o) {
            total += powers[o] * links.gain(o, k, band);
        }
    }
    total
}

/// SINR of `device` on its assigned band; zero without a band.
pub fn access_sinr(
    s: &Scenario,
    links: &LinkTable,
    bands: &[Option<usize>],
    powers: &[f64],
    device: usize,
) -> f64 {
    match bands[device] {
        None => 0.0,
        Some(b) => {
            let k = s.association[device];
            let i = interference(s, links, bands, powers, device, b);
            powers[device] * links.gain(device, k, b) / (i + s.phys.noise_w)
        }
    }
}

/// Access rate of every device, bit/s.
pub fn access_rates(
    s: &Scenario,
    links: &LinkTable,
    bands: &[Option<usize>],
    powers: &[f64],
) -> Vec<f64> {
    (0..s.num_devices())
        .map(|j| shannon(s.phys.subband_hz, access_sinr(s, links, bands, powers, j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{Preset, PresetName};
    use approx::assert_relative_eq;

    fn phys() -> PhysConfig {
        Preset::get(PresetName::Tabulated).phys
    }

    #[test]
    fn gain_reference_values() {
        let g = thz_gain(0.01, 0.005, 50.0).unwrap();
        assert_relative_eq!(g, 0.01 * (-0.25f64).exp() / 2500.0, max_relative = 1e-12);
        assert_relative_eq!(g, 3.1152e-6, max_relative = 1e-4);
        assert!(thz_gain(0.01, 0.005, 0.0).is_err());
        assert!(thz_gain(0.01, 0.005, -1.0).is_err());
    }

    #[test]
    fn gain_sq_derivative_matches_fd() {
        let s = 3000.0;
        let h = 1e-3;
        let fd = (thz_gain_sq(0.01, 0.004, s + h) - thz_gain_sq(0.01, 0.004, s - h)) / (2.0 * h);
        assert_relative_eq!(thz_gain_sq_deriv(0.01, 0.004, s), fd, max_relative = 1e-6);
    }

    #[test]
    fn shannon_reference() {
        assert_relative_eq!(shannon(500.0, 1.0), 500.0, max_relative = 1e-12);
        assert_eq!(shannon(500.0, 0.0), 0.0);
    }

    #[test]
    fn satellite_round_trip() {
        let p = phys();
        let d = 780e3 - 50.0;
        assert_relative_eq!(round_trip_delay(&p, d) * 1e3, 5.1997, epsilon = 1e-4);
    }

    #[test]
    fn mm_snr_inverse_square() {
        let p = phys();
        let a = mm_snr(&p, 1.0, 100.0, 1.7e6).unwrap();
        let b = mm_snr(&p, 1.0, 200.0, 1.7e6).unwrap();
        assert_relative_eq!(a / b, 4.0, max_relative = 1e-12);
        assert!(mm_snr(&p, 1.0, 0.0, 1.7e6).is_err());
    }
}
