//! Sub-band assignment inside each cell as a two-sided matching between
//! devices and sub-bands, solved by device-proposing deferred acceptance.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::{self, interferes, LinkTable};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Largest cell handled by the exhaustive routines.
pub const MAX_EXHAUSTIVE_DEVICES: usize = 6;
/// Largest band count handled by the exhaustive routines.
pub const MAX_EXHAUSTIVE_BANDS: usize = 8;

/// Preference values of one cell. Higher is better; a pair is acceptable to a
/// side when its value there is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Preferences {
    /// `device[i][b]`: device `i` values band `b`.
    pub device: Vec<Vec<f64>>,
    /// `band[b][i]`: band `b` values device `i`.
    pub band: Vec<Vec<f64>>,
}

impl Preferences {
    pub fn new(device: Vec<Vec<f64>>, band: Vec<Vec<f64>>) -> Self {
        Self { device, band }
    }

    pub fn num_devices(&self) -> usize {
        self.device.len()
    }

    pub fn num_bands(&self) -> usize {
        self.band.len()
    }

    fn acceptable(&self, i: usize, b: usize) -> bool {
        self.device[i][b] > 0.0 && self.band[b][i] > 0.0
    }

    /// Device `i` strictly prefers band `a` over `b` (ties: lower band id).
    fn device_prefers(&self, i: usize, a: usize, b: usize) -> bool {
        match self.device[i][a].partial_cmp(&self.device[i][b]).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a < b,
        }
    }

    /// Band `b` strictly prefers device `x` over `y` (ties: lower device id).
    fn band_prefers(&self, b: usize, x: usize, y: usize) -> bool {
        match self.band[b][x].partial_cmp(&self.band[b][y]).unwrap_or(Ordering::Equal) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => x < y,
        }
    }

    /// Acceptable bands of device `i`, best first.
    fn ranked_bands(&self, i: usize) -> Vec<usize> {
        let mut bs: Vec<usize> = (0..self.num_bands()).filter(|&b| self.acceptable(i, b)).collect();
        bs.sort_by(|&a, &b| {
            if self.device_prefers(i, a, b) {
                Ordering::Less
            } else if self.device_prefers(i, b, a) {
                Ordering::Greater
            } else {
                Ordering::Equal
            }
        });
        bs
    }
}

/// A one-to-one partial matching of one cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    pub device_band: Vec<Option<usize>>,
    pub band_device: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(devices: usize, bands: usize) -> Self {
        Self { device_band: vec![None; devices], band_device: vec![None; bands] }
    }

    pub fn from_device_bands(device_band: Vec<Option<usize>>, bands: usize) -> Result<Self> {
        let mut band_device = vec![None; bands];
        for (i, b) in device_band.iter().enumerate() {
            if let Some(b) = *b {
                if b >= bands || band_device[b].is_some() {
                    return Err(Error::Precondition(format!("band {b} assigned twice or out of range")));
                }
                band_device[b] = Some(i);
            }
        }
        Ok(Self { device_band, band_device })
    }
}

/// Device-proposing deferred acceptance in simultaneous rounds.
pub fn deferred_acceptance(p: &Preferences) -> Matching {
    let n = p.num_devices();
    let ranked: Vec<Vec<usize>> = (0..n).map(|i| p.ranked_bands(i)).collect();
    let mut next = vec![0usize; n];
    let mut m = Matching::empty(n, p.num_bands());
    let mut free: Vec<usize> = (0..n).collect();
    while !free.is_empty() {
        let mut requests: Vec<Vec<usize>> = vec![Vec::new(); p.num_bands()];
        let mut proposed = false;
        for &i in &free {
            if next[i] < ranked[i].len() {
                requests[ranked[i][next[i]]].push(i);
                proposed = true;
            }
        }
        if !proposed {
            break;
        }
        let mut still_free = Vec::new();
        for (b, reqs) in requests.iter().enumerate() {
            if reqs.is_empty() {
                continue;
            }
            let mut best = m.band_device[b];
            for &i in reqs {
                best = match best {
                    Some(h) if !p.band_prefers(b, i, h) => Some(h),
                    _ => Some(i),
                };
            }
            let winner = best.unwrap();
            if let Some(h) = m.band_device[b] {
                if h != winner {
                    m.device_band[h] = None;
                    next[h] += 1;
                    still_free.push(h);
                }
            }
            for &i in reqs {
                if i != winner {
                    next[i] += 1;
                    still_free.push(i);
                }
            }
            m.band_device[b] = Some(winner);
            m.device_band[winner] = Some(b);
        }
        still_free.retain(|&i| next[i] < ranked[i].len());
        still_free.sort_unstable();
        still_free.dedup();
        free = still_free;
    }
    m
}

/// Device-band pairs that would both rather be matched to each other.
pub fn blocking_pairs(p: &Preferences, m: &Matching) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..p.num_devices() {
        for b in 0..p.num_bands() {
            if !p.acceptable(i, b) || m.device_band[i] == Some(b) {
                continue;
            }
            let dev_wants = match m.device_band[i] {
                None => true,
                Some(cur) => p.device_prefers(i, b, cur),
            };
            let band_wants = match m.band_device[b] {
                None => true,
                Some(h) => p.band_prefers(b, i, h),
            };
            if dev_wants && band_wants {
                out.push((i, b));
            }
        }
    }
    out
}

pub fn is_stable(p: &Preferences, m: &Matching) -> bool {
    blocking_pairs(p, m).is_empty()
}

fn guard(devices: usize, bands: usize) -> Result<()> {
    if devices > MAX_EXHAUSTIVE_DEVICES || bands > MAX_EXHAUSTIVE_BANDS {
        return Err(Error::Guard(format!(
            "{devices} devices x {bands} bands exceeds {MAX_EXHAUSTIVE_DEVICES} x {MAX_EXHAUSTIVE_BANDS}"
        )));
    }
    Ok(())
}

/// Visits every injective partial assignment of `devices` to `bands`.
fn for_each_assignment(
    devices: usize,
    bands: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
    visit: &mut dyn FnMut(&[Option<usize>]),
) {
    fn rec(
        i: usize,
        cur: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        allowed: &dyn Fn(usize, usize) -> bool,
        visit: &mut dyn FnMut(&[Option<usize>]),
    ) {
        if i == cur.len() {
            visit(cur);
            return;
        }
        cur[i] = None;
        rec(i + 1, cur, used, allowed, visit);
        for b in 0..used.len() {
            if !used[b] && allowed(i, b) {
                used[b] = true;
                cur[i] = Some(b);
                rec(i + 1, cur, used, allowed, visit);
                used[b] = false;
            }
        }
        cur[i] = None;
    }
    let mut cur = vec![None; devices];
    let mut used = vec![false; bands];
    rec(0, &mut cur, &mut used, allowed, visit);
}

/// Every stable matching, by enumeration.
pub fn stable_matchings(p: &Preferences) -> Result<Vec<Matching>> {
    guard(p.num_devices(), p.num_bands())?;
    let mut out = Vec::new();
    let allowed = |i: usize, b: usize| p.acceptable(i, b);
    for_each_assignment(p.num_devices(), p.num_bands(), &allowed, &mut |a| {
        let m = Matching::from_device_bands(a.to_vec(), p.num_bands()).unwrap();
        if is_stable(p, &m) {
            out.push(m);
        }
    });
    Ok(out)
}

/// Assignment minimising `objective` over every injective partial assignment.
/// Ties keep the first assignment in enumeration order.
pub fn exhaustive_assignment(
    devices: usize,
    bands: usize,
    objective: impl Fn(&[Option<usize>]) -> f64,
) -> Result<(Vec<Option<usize>>, f64)> {
    guard(devices, bands)?;
    let mut best: (Vec<Option<usize>>, f64) = (vec![None; devices], f64::INFINITY);
    let mut first = true;
    for_each_assignment(devices, bands, &|_, _| true, &mut |a| {
        let v = objective(a);
        if first || v < best.1 {
            best = (a.to_vec(), v);
            first = false;
        }
    });
    Ok(best)
}

/// Equal-split transmit power assumed when ranking bands.
pub fn probe_power(s: &Scenario, device: usize) -> f64 {
    s.devices[device].max_power_w / s.num_subbands() as f64
}

/// Rate of `device` on `band` if every device spread its power equally over all bands.
pub fn hypothesis_rate(s: &Scenario, links: &LinkTable, device: usize, band: usize) -> f64 {
    let k = s.association[device];
    let mut i = 0.0;
    for o in 0..s.num_devices() {
        if interferes(s.phys.interference, &s.association, device, o) {
            i += probe_power(s, o) * links.gain(o, k, band);
        }
    }
    let sinr = probe_power(s, device) * links.gain(device, k, band) / (i + s.phys.noise_w);
    channel::shannon(s.phys.subband_hz, sinr)
}

/// Preferences of cell `k` (devices in ascending id order).
pub fn cell_preferences(s: &Scenario, links: &LinkTable, k: usize, cell: &[usize]) -> Preferences {
    let nb = s.num_subbands();
    let mut device = vec![vec![0.0; nb]; cell.len()];
    let mut band = vec![vec![0.0; cell.len()]; nb];
    for (i, &j) in cell.iter().enumerate() {
        let p = probe_power(s, j);
        for b in 0..nb {
            let rate = hypothesis_rate(s, links, j, b);
            let leak: f64 = (0..s.num_uavs())
                .filter(|&k2| k2 != k)
                .map(|k2| s.phys.match_leakage_weight * p * links.gain(j, k2, b))
                .sum();
            device[i][b] = rate;
            band[b][i] = s.phys.match_rate_weight * rate - leak;
        }
    }
    Preferences { device, band }
}

/// Deferred acceptance in every cell; returns the global band vector.
pub fn match_all(s: &Scenario, links: &LinkTable) -> Vec<Option<usize>> {
    let mut bands = vec![None; s.num_devices()];
    for (k, cell) in s.cells().iter().enumerate() {
        let p = cell_preferences(s, links, k, cell);
        let m = deferred_acceptance(&p);
        for (i, &j) in cell.iter().enumerate() {
            bands[j] = m.device_band[i];
        }
    }
    bands
}

/// Uniformly random injective assignment in every cell.
pub fn random_assignment(s: &Scenario, rng: &mut impl Rng) -> Vec<Option<usize>> {
    let mut bands = vec![None; s.num_devices()];
    for cell in s.cells() {
        let mut pool: Vec<usize> = (0..s.num_subbands()).collect();
        pool.shuffle(rng);
        for (i, &j) in cell.iter().enumerate() {
            bands[j] = pool.get(i).copied();
        }
    }
    bands
}

/// Transmit energy of a cell under the equal-split hypothesis, given offloaded bits.
/// An offloading device without a band costs infinity.
pub fn hypothesis_energy(
    s: &Scenario,
    links: &LinkTable,
    cell: &[usize],
    assignment: &[Option<usize>],
    offload_bits: &[f64],
) -> f64 {
    cell.iter()
        .zip(assignment)
        .map(|(&j, b)| {
            let beta = offload_bits[j];
            if beta <= 0.0 {
                return 0.0;
            }
            match b {
                None => f64::INFINITY,
                Some(b) => probe_power(s, j) * beta / hypothesis_rate(s, links, j, *b),
            }
        })
        .sum()
}

/// Exhaustive band assignment minimising the hypothesis transmit energy per cell.
pub fn optimal_assignment(s: &Scenario, links: &LinkTable, offload_bits: &[f64]) -> Result<Vec<Option<usize>>> {
    let mut bands = vec![None; s.num_devices()];
    for cell in s.cells() {
        let (a, _) = exhaustive_assignment(cell.len(), s.num_subbands(), |a| {
            hypothesis_energy(s, links, &cell, a, offload_bits)
        })?;
        for (i, &j) in cell.iter().enumerate() {
            bands[j] = a[i];
        }
    }
    Ok(bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prefs(dev: &[&[f64]], band: &[&[f64]]) -> Preferences {
        Preferences::new(dev.iter().map(|r| r.to_vec()).collect(), band.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn two_by_two_example() {
        // devices: d0 = [5, 3], d1 = [4, 1]; bands: b0 = [2, 9], b1 = [7, 1]
        let p = prefs(&[&[5.0, 3.0], &[4.0, 1.0]], &[&[2.0, 9.0], &[7.0, 1.0]]);
        let m = deferred_acceptance(&p);
        assert_eq!(m.device_band, vec![Some(1), Some(0)]);
        assert!(is_stable(&p, &m));
    }

    #[test]
    fn more_devices_than_bands() {
        let p = prefs(&[&[1.0, 2.0], &[2.0, 1.0], &[1.5, 1.5]], &[&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]]);
        let m = deferred_acceptance(&p);
        assert_eq!(m.device_band.iter().filter(|b| b.is_some()).count(), 2);
        assert!(is_stable(&p, &m));
    }

    #[test]
    fn ties_go_to_lower_ids() {
        let p = prefs(&[&[1.0, 1.0], &[1.0, 1.0]], &[&[1.0, 1.0], &[1.0, 1.0]]);
        let m = deferred_acceptance(&p);
        assert_eq!(m.device_band, vec![Some(0), Some(1)]);
    }

    #[test]
    fn empty_matching_blocked_everywhere() {
        let p = prefs(&[&[1.0, 2.0], &[2.0, 1.0]], &[&[1.0, 1.0], &[1.0, 1.0]]);
        let m = Matching::empty(2, 2);
        assert_eq!(blocking_pairs(&p, &m).len(), 4);
    }

    #[test]
    fn exhaustive_example() {
        let dev = [[5.0, 3.0], [4.0, 1.0]];
        let (a, v) = exhaustive_assignment(2, 2, |a| {
            -a.iter().enumerate().map(|(i, b)| b.map_or(0.0, |b| dev[i][b])).sum::<f64>()
        })
        .unwrap();
        assert_eq!(a, vec![Some(1), Some(0)]);
        assert_eq!(v, -7.0);
    }

    #[test]
    fn guard_refuses_large_instances() {
        assert!(exhaustive_assignment(7, 8, |_| 0.0).is_err());
        assert!(exhaustive_assignment(6, 9, |_| 0.0).is_err());
        assert!(exhaustive_assignment(6, 8, |_| 0.0).is_ok());
    }

    fn arb_prefs() -> impl Strategy<Value = Preferences> {
        (1usize..=5, 1usize..=5).prop_flat_map(|(n, b)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.1f64..10.0, b), n),
                proptest::collection::vec(proptest::collection::vec(0.1f64..10.0, n), b),
            )
                .prop_map(|(d, bb)| Preferences::new(d, bb))
        })
    }

    proptest! {
        #[test]
        fn deferred_acceptance_is_stable(p in arb_prefs()) {
            let m = deferred_acceptance(&p);
            prop_assert!(is_stable(&p, &m));
            let matched = m.device_band.iter().filter(|b| b.is_some()).count();
            prop_assert_eq!(matched, p.num_devices().min(p.num_bands()));
            for (i, b) in m.device_band.iter().enumerate() {
                if let Some(b) = b {
                    prop_assert_eq!(m.band_device[*b], Some(i));
                }
            }
        }

        #[test]
        fn deferred_acceptance_is_device_optimal(p in arb_prefs()) {
            let m = deferred_acceptance(&p);
            for other in stable_matchings(&p).unwrap() {
                for i in 0..p.num_devices() {
                    let mine = m.device_band[i];
                    let theirs = other.device_band[i];
                    let worse = match (mine, theirs) {
                        (None, Some(_)) => true,
                        (Some(a), Some(b)) => p.device_prefers(i, b, a),
                        _ => false,
                    };
                    prop_assert!(!worse);
                }
            }
        }
    }
}
