//! Physical constants, unit helpers and the two parameter presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Speed of light used throughout the link models, m/s.
pub const LIGHT_SPEED: f64 = 3.0e8;
/// Thermal noise power spectral density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Decibel ratio to linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear ratio to decibels.
pub fn linear_to_db(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("cannot express {x} in dB")));
    }
    Ok(10.0 * x.log10())
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Watts to dBm.
pub fn watts_to_dbm(w: f64) -> Result<f64> {
    Ok(linear_to_db(w)? + 30.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    /// Table values taken verbatim, including the inconsistent magnitudes.
    #[serde(rename = "paper-table")]
    Tabulated,
    /// Magnitudes rescaled to physically plausible hardware. Used by the trend experiments.
    Physical,
}

impl std::str::FromStr for PresetName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-table" => Ok(Self::Tabulated),
            "physical" => Ok(Self::Physical),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected 'paper-table' or 'physical')"
            ))),
        }
    }
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Tabulated => "paper-table",
            Self::Physical => "physical",
        })
    }
}

/// Which transmitters count as interference on a sub-band at a UAV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InterferenceModel {
    /// Intra-cell access is orthogonal; only devices of other cells on the same band interfere.
    #[default]
    OtherCells,
    /// Every other device on the same band interferes, including the same cell.
    AllDevices,
}

/// Stopping tolerances of the four inner solvers and the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub power: f64,
    pub deploy: f64,
    pub routing: f64,
    pub outer: f64,
    pub power_max_iter: usize,
    pub deploy_max_iter: usize,
    pub routing_max_iter: usize,
    pub outer_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            power: 1e-4,
            deploy: 1e-4,
            routing: 1e-4,
            outer: 1e-4,
            power_max_iter: 100,
            deploy_max_iter: 50,
            routing_max_iter: 100,
            outer_max_iter: 50,
        }
    }
}

/// Radio, backhaul and matching parameters shared by every entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysConfig {
    pub num_subbands: usize,
    /// Width of one THz sub-band, Hz.
    pub subband_hz: f64,
    /// Reference channel gain at 1 m (linear).
    pub ref_gain: f64,
    /// Molecular absorption coefficient per sub-band, 1/m.
    pub absorption: Vec<f64>,
    /// Receiver noise power per sub-band, W.
    pub noise_w: f64,
    pub mm_carrier_hz: f64,
    /// Backhaul bandwidth of UAV-UAV links, Hz.
    pub mm_bandwidth_uav_hz: f64,
    /// Backhaul bandwidth of UAV-satellite links, Hz.
    pub mm_bandwidth_sat_hz: f64,
    pub antenna_gain_tx: f64,
    pub antenna_gain_rx: f64,
    /// Receiver amplification factor (linear).
    pub amp_factor: f64,
    pub noise_temp_k: f64,
    pub boltzmann: f64,
    pub light_speed: f64,
    /// Rate weight in the band-side preference.
    pub match_rate_weight: f64,
    /// Leakage weight in the band-side preference (uniform over UAVs and bands).
    pub match_leakage_weight: f64,
    #[serde(default)]
    pub interference: InterferenceModel,
}

impl PhysConfig {
    pub fn absorption(&self, band: usize) -> f64 {
        self.absorption[band]
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if self.num_subbands == 0 {
            return Err(Error::Config("num_subbands must be at least 1".into()));
        }
        if self.absorption.len() != self.num_subbands {
            return Err(Error::Config(format!(
                "absorption has {} entries for {} sub-bands",
                self.absorption.len(),
                self.num_subbands
            )));
        }
        if self.absorption.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::Config("absorption coefficients must be >= 0".into()));
        }
        pos("subband_hz", self.subband_hz)?;
        pos("ref_gain", self.ref_gain)?;
        pos("noise_w", self.noise_w)?;
        pos("mm_carrier_hz", self.mm_carrier_hz)?;
        pos("mm_bandwidth_uav_hz", self.mm_bandwidth_uav_hz)?;
        pos("mm_bandwidth_sat_hz", self.mm_bandwidth_sat_hz)?;
        pos("antenna_gain_tx", self.antenna_gain_tx)?;
        pos("antenna_gain_rx", self.antenna_gain_rx)?;
        pos("amp_factor", self.amp_factor)?;
        pos("noise_temp_k", self.noise_temp_k)?;
        pos("boltzmann", self.boltzmann)?;
        pos("light_speed", self.light_speed)?;
        if self.match_rate_weight < 0.0 || self.match_leakage_weight < 0.0 {
            return Err(Error::Config("matching weights must be >= 0".into()));
        }
        Ok(())
    }
}

/// Sampling ranges and constants for ground devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDefaults {
    /// Local CPU frequency range, Hz (uniform).
    pub cpu_hz: [f64; 2],
    pub chip_coeff: f64,
    pub max_tx_power_w: f64,
    pub deadline_s: f64,
    /// Task size range, bits (uniform).
    pub data_bits: [f64; 2],
    pub cycles_per_bit: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavDefaults {
    pub altitude_m: f64,
    pub cpu_hz: f64,
    pub chip_coeff: f64,
    /// Backhaul transmit power toward UAVs and satellites, W.
    pub tx_power_w: f64,
}

/// A complete parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: PresetName,
    pub phys: PhysConfig,
    pub device: DeviceDefaults,
    pub uav: UavDefaults,
    pub satellite_altitudes_m: Vec<f64>,
    pub area_m: f64,
    pub tolerances: Tolerances,
}

impl Preset {
    pub fn get(name: PresetName) -> Self {
        match name {
            PresetName::Tabulated => tabulated(),
            PresetName::Physical => physical(),
        }
    }
}

fn tabulated() -> Preset {
    let b = 25;
    Preset {
        name: PresetName::Tabulated,
        phys: PhysConfig {
            num_subbands: b,
            subband_hz: 500.0,
            ref_gain: db_to_linear(-20.0),
            absorption: vec![0.005; b],
            // Listed as -174 dBm, used as total noise power.
            noise_w: dbm_to_watts(-174.0),
            mm_carrier_hz: 28e9,
            mm_bandwidth_uav_hz: 1.7e6,
            mm_bandwidth_sat_hz: 1.8e6,
            antenna_gain_tx: db_to_linear(41.0),
            antenna_gain_rx: db_to_linear(41.0),
            amp_factor: db_to_linear(-23.0),
            noise_temp_k: 300.0,
            boltzmann: BOLTZMANN,
            light_speed: LIGHT_SPEED,
            match_rate_weight: 1.0,
            match_leakage_weight: 1e-2,
            interference: InterferenceModel::OtherCells,
        },
        device: DeviceDefaults {
            cpu_hz: [1e4, 1e4],
            chip_coeff: 1e-10,
            max_tx_power_w: dbm_to_watts(23.0),
            deadline_s: 0.5,
            data_bits: [0.1e6, 0.5e6],
            cycles_per_bit: [10.0, 50.0],
        },
        uav: UavDefaults {
            altitude_m: 50.0,
            cpu_hz: 3.5e6,
            chip_coeff: 1e-10,
            tx_power_w: dbm_to_watts(30.0),
        },
        satellite_altitudes_m: vec![780e3, 800e3],
        area_m: 600.0,
        tolerances: Tolerances::default(),
    }
}

fn physical() -> Preset {
    let b = 25;
    let subband_hz = 5e6;
    // Absorption rises across the band plan so that sub-bands differ in quality.
    let absorption = (0..b)
        .map(|i| 0.0025 + 0.005 * i as f64 / (b - 1) as f64)
        .collect();
    let mut p = tabulated();
    p.name = PresetName::Physical;
    p.phys.subband_hz = subband_hz;
    p.phys.absorption = absorption;
    p.phys.noise_w = dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ + 10.0 * subband_hz.log10());
    p.device.cpu_hz = [0.5e9, 1.5e9];
    p.device.chip_coeff = 1e-28;
    p.uav.cpu_hz = 3.5e9;
    p.uav.chip_coeff = 1e-28;
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_conversions() {
        assert_relative_eq!(db_to_linear(-20.0), 0.01, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(23.0), 0.199526, max_relative = 1e-5);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watts(-174.0), 3.981e-21, max_relative = 1e-3);
        assert!(linear_to_db(0.0).is_err());
        assert!(linear_to_db(-1.0).is_err());
        assert_relative_eq!(watts_to_dbm(1.0).unwrap(), 30.0, epsilon = 1e-12);
    }

    #[test]
    fn presets_validate() {
        for name in [PresetName::Tabulated, PresetName::Physical] {
            let p = Preset::get(name);
            p.phys.validate().unwrap();
            assert_eq!(p.phys.absorption.len(), p.phys.num_subbands);
        }
        let p = Preset::get(PresetName::Physical);
        // about -107 dBm over a 5 MHz sub-band
        assert_relative_eq!(watts_to_dbm(p.phys.noise_w).unwrap(), -107.01, epsilon = 0.01);
    }

    #[test]
    fn tabulated_preset_is_verbatim() {
        let p = Preset::get(PresetName::Tabulated);
        assert_eq!(p.phys.subband_hz, 500.0);
        assert_eq!(p.device.cpu_hz, [1e4, 1e4]);
        assert_eq!(p.uav.cpu_hz, 3.5e6);
        assert_eq!(p.device.chip_coeff, 1e-10);
        assert_eq!(p.phys.mm_bandwidth_uav_hz, 1.7e6);
        assert_eq!(p.phys.mm_bandwidth_sat_hz, 1.8e6);
        assert_eq!(p.phys.boltzmann, 1.380649e-23);
        assert_eq!(p.phys.noise_temp_k, 300.0);
    }

    #[test]
    fn preset_names_parse() {
        assert_eq!("physical".parse::<PresetName>().unwrap(), PresetName::Physical);
        assert!("nope".parse::<PresetName>().is_err());
    }
}
