//! Experiment plumbing: single runs, parameter sweeps, the oracle suite, and
//! CSV/JSON output.
//!
//! Every row in `runs.csv` is a deterministic function of (config, seed,
//! variant); wall-clock times go to a separate `timings.csv` so repeated runs
//! produce byte-identical `runs.csv` files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::bcd::{run_variant, BcdOptions, BcdResult, Variant};
use crate::channel::LinkTable;
use crate::cost::{evaluate_with_links, Decisions};
use crate::error::{Error, Result};
use crate::offload::exhaustive_routes;
use crate::par::{self, Exec};
use crate::scenario::{generate, Scenario, SimConfig};

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub variant: Variant,
    pub devices: usize,
    pub uavs: usize,
    pub subbands: usize,
    pub preset: String,
    pub avg_data_bits: f64,
    pub deadline_s: f64,
    pub total_energy_j: f64,
    pub device_energy_j: f64,
    pub uav_energy_j: f64,
    pub offload_fraction: f64,
    pub sum_rate_bps: f64,
    pub outer_iters: usize,
    /// Written to `timings.csv`, never to `runs.csv`.
    pub runtime_s: f64,
    pub converged: bool,
    pub feasible: bool,
}

pub const RUN_COLUMNS: [&str; 16] = [
    "seed",
    "variant",
    "J",
    "K",
    "B",
    "preset",
    "avg_data_bits",
    "deadline_s",
    "total_energy_j",
    "device_energy_j",
    "uav_energy_j",
    "offload_fraction",
    "sum_rate_bps",
    "outer_iters",
    "converged",
    "feasible",
];

impl RunRecord {
    pub fn from_result(s: &Scenario, r: &BcdResult, runtime_s: f64) -> Self {
        let n = s.num_devices().max(1) as f64;
        let deadline = s.devices.iter().map(|d| d.deadline_s).sum::<f64>() / n;
        Self {
            seed: s.seed,
            variant: r.variant,
            devices: s.num_devices(),
            uavs: s.num_uavs(),
            subbands: s.num_subbands(),
            preset: s.preset.to_string(),
            avg_data_bits: s.devices.iter().map(|d| d.data_bits).sum::<f64>() / n,
            deadline_s: deadline,
            total_energy_j: r.report.total,
            device_energy_j: r.report.device_energy,
            uav_energy_j: r.report.uav_energy,
            offload_fraction: r.decisions.offload_fraction(s),
            sum_rate_bps: r.report.sum_rate(),
            outer_iters: r.outer_iterations(),
            runtime_s,
            converged: r.converged,
            feasible: r.feasible(),
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.variant.to_string(),
            self.devices.to_string(),
            self.uavs.to_string(),
            self.subbands.to_string(),
            self.preset.clone(),
            self.avg_data_bits.to_string(),
            self.deadline_s.to_string(),
            self.total_energy_j.to_string(),
            self.device_energy_j.to_string(),
            self.uav_energy_j.to_string(),
            self.offload_fraction.to_string(),
            self.sum_rate_bps.to_string(),
            self.outer_iters.to_string(),
            self.converged.to_string(),
            self.feasible.to_string(),
        ]
    }
}

/// Result of one end-to-end run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub result: BcdResult,
    pub record: RunRecord,
}

pub fn run_one(cfg: &SimConfig, variant: Variant) -> Result<RunOutput> {
    let scenario = generate(cfg)?;
    let opts = BcdOptions::from_scenario(&scenario);
    let t0 = Instant::now();
    let result = run_variant(&scenario, variant, &opts)?;
    let record = RunRecord::from_result(&scenario, &result, t0.elapsed().as_secs_f64());
    Ok(RunOutput { scenario, result, record })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Writes `runs.csv`, optionally prefixed by sweep-point columns.
pub fn write_runs(path: &Path, rows: &[(Option<(SweepParam, f64)>, RunRecord)]) -> Result<()> {
    let mut w = writer(path)?;
    let point = rows.first().map_or(false, |r| r.0.is_some());
    let mut header: Vec<&str> = Vec::new();
    if point {
        header.extend(["param", "value"]);
    }
    header.extend(RUN_COLUMNS);
    w.write_record(&header)?;
    for (p, r) in rows {
        let mut f = Vec::new();
        if let Some((param, value)) = p {
            f.push(param.to_string());
            f.push(value.to_string());
        }
        f.extend(r.fields());
        w.write_record(&f)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings(path: &Path, rows: &[(Option<(SweepParam, f64)>, RunRecord)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["param", "value", "seed", "variant", "runtime_s"])?;
    for (p, r) in rows {
        let (param, value) = p.map_or((String::new(), String::new()), |(a, b)| (a.to_string(), b.to_string()));
        w.write_record([param, value, r.seed.to_string(), r.variant.to_string(), r.runtime_s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs one variant and writes `runs.csv`, `timings.csv`, `scenario.json`,
/// `trace.json` and `decisions.json` into `out`.
pub fn run_to_dir(cfg: &SimConfig, variant: Variant, out: &Path) -> Result<RunOutput> {
    fs::create_dir_all(out)?;
    let o = run_one(cfg, variant)?;
    let rows = [(None, o.record.clone())];
    write_runs(&out.join("runs.csv"), &rows)?;
    write_timings(&out.join("timings.csv"), &rows)?;
    o.scenario.save_json(&out.join("scenario.json"))?;
    write_json(&out.join("trace.json"), &o.result.trace)?;
    write_json(&out.join("decisions.json"), &o.result.decisions)?;
    Ok(o)
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Number of devices.
    Devices,
    /// Number of UAVs.
    Uavs,
    /// Average task size in Mbit; sizes are drawn from `[0.5, 1.5]` times it.
    DataSize,
    /// Deadline in ms.
    Deadline,
}

impl SweepParam {
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = base.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{self} expects positive integers, got {v}")))
            }
        };
        match self {
            SweepParam::Devices => c.num_devices = count(value)?,
            SweepParam::Uavs => c.num_uavs = count(value)?,
            SweepParam::DataSize => {
                if !(value > 0.0) {
                    return Err(Error::Config(format!("data size must be positive, got {value}")));
                }
                c.data_bits = Some([0.5 * value * 1e6, 1.5 * value * 1e6]);
            }
            SweepParam::Deadline => {
                if !(value > 0.0) {
                    return Err(Error::Config(format!("deadline must be positive, got {value}")));
                }
                c.deadline_s = Some(value * 1e-3);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Devices => "devices",
            SweepParam::Uavs => "uavs",
            SweepParam::DataSize => "data_size",
            SweepParam::Deadline => "deadline",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "devices" => Ok(SweepParam::Devices),
            "uavs" => Ok(SweepParam::Uavs),
            "data_size" => Ok(SweepParam::DataSize),
            "deadline" => Ok(SweepParam::Deadline),
            _ => Err(Error::Config(format!(
                "unknown sweep parameter '{s}' (expected devices, uavs, data_size or deadline)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub record: RunRecord,
}

/// Cartesian run over values × seeds × variants, ordered by (value, seed, variant).
pub fn sweep(base: &SimConfig, spec: &SweepSpec, exec: Exec) -> Result<Vec<SweepRow>> {
    if spec.seeds.is_empty() || spec.values.is_empty() || spec.variants.is_empty() {
        return Err(Error::Config("sweep needs at least one value, seed and variant".into()));
    }
    let mut jobs = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        let point = spec.param.apply(base, value)?;
        for &seed in &spec.seeds {
            for &variant in &spec.variants {
                let mut c = point.clone();
                c.seed = seed;
                jobs.push((vi, value, c, variant));
            }
        }
    }
    let results = par::map(exec, &jobs, |(vi, value, c, variant)| {
        run_one(c, *variant).map(|o| (*vi, SweepRow { value: *value, record: o.record }))
    });
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| (a.0, a.1.record.seed, a.1.record.variant).cmp(&(b.0, b.1.record.seed, b.1.record.variant)));
    Ok(rows.into_iter().map(|r| r.1).collect())
}

/// Mean and 95% half-width (1.96 standard errors, sample deviation).
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub variant: Variant,
    pub n: usize,
    /// (mean, half-width) per summarised column.
    pub stats: Vec<(f64, f64)>,
    pub feasible_fraction: f64,
}

pub const SUMMARY_METRICS: [&str; 6] =
    ["total_energy_j", "device_energy_j", "uav_energy_j", "offload_fraction", "sum_rate_bps", "outer_iters"];

fn metrics(r: &RunRecord) -> [f64; 6] {
    [
        r.total_energy_j,
        r.device_energy_j,
        r.uav_energy_j,
        r.offload_fraction,
        r.sum_rate_bps,
        r.outer_iters as f64,
    ]
}

/// Per (value, variant) statistics over seeds, in first-appearance order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(f64, Variant)> = Vec::new();
    for r in rows {
        let k = (r.value, r.record.variant);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(value, variant)| {
            let group: Vec<&RunRecord> = rows
                .iter()
                .filter(|r| r.value == value && r.record.variant == variant)
                .map(|r| &r.record)
                .collect();
            let stats = (0..SUMMARY_METRICS.len())
                .map(|m| mean_ci(&group.iter().map(|r| metrics(r)[m]).collect::<Vec<_>>()))
                .collect();
            let feasible = group.iter().filter(|r| r.feasible).count() as f64 / group.len() as f64;
            SummaryRow { value, variant, n: group.len(), stats, feasible_fraction: feasible }
        })
        .collect()
}

pub fn write_summary(path: &Path, param: SweepParam, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["param".to_string(), "value".into(), "variant".into(), "n".into()];
    for m in SUMMARY_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_ci95"));
    }
    header.push("feasible_fraction".into());
    w.write_record(&header)?;
    for r in rows {
        let mut f = vec![param.to_string(), r.value.to_string(), r.variant.to_string(), r.n.to_string()];
        for (m, h) in &r.stats {
            f.push(m.to_string());
            f.push(h.to_string());
        }
        f.push(r.feasible_fraction.to_string());
        w.write_record(&f)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a sweep and writes `runs.csv`, `timings.csv` and `summary.csv`.
pub fn sweep_to_dir(base: &SimConfig, spec: &SweepSpec, exec: Exec, out: &Path) -> Result<Vec<SweepRow>> {
    fs::create_dir_all(out)?;
    let rows = sweep(base, spec, exec)?;
    let tagged: Vec<_> = rows.iter().map(|r| (Some((spec.param, r.value)), r.record.clone())).collect();
    write_runs(&out.join("runs.csv"), &tagged)?;
    write_timings(&out.join("timings.csv"), &tagged)?;
    write_summary(&out.join("summary.csv"), spec.param, &summarize(&rows))?;
    Ok(rows)
}

/// Size limits of the oracle suite.
pub const ORACLE_MAX_DEVICES: usize = 6;
pub const ORACLE_MAX_UAVS: usize = 2;
pub const ORACLE_MAX_SUBBANDS: usize = 6;

pub fn oracle_guard(cfg: &SimConfig) -> Result<()> {
    let b = cfg.resolved_preset().phys.num_subbands;
    if cfg.num_devices > ORACLE_MAX_DEVICES || cfg.num_uavs > ORACLE_MAX_UAVS || b > ORACLE_MAX_SUBBANDS || cfg.num_satellites != 1
    {
        return Err(Error::Guard(format!(
            "oracle needs J <= {ORACLE_MAX_DEVICES}, K <= {ORACLE_MAX_UAVS}, B <= {ORACLE_MAX_SUBBANDS}, S = 1; got J = {}, K = {}, B = {b}, S = {}",
            cfg.num_devices, cfg.num_uavs, cfg.num_satellites
        )));
    }
    Ok(())
}

/// Default oracle instance: the largest size the guard admits.
pub fn oracle_config() -> SimConfig {
    SimConfig {
        num_devices: ORACLE_MAX_DEVICES,
        num_uavs: ORACLE_MAX_UAVS,
        num_satellites: 1,
        subbands: Some(ORACLE_MAX_SUBBANDS),
        ..SimConfig::default()
    }
}

/// Lowest feasible energy over every injective band assignment of the
/// offloading devices, all other blocks held at `d`.
pub fn exhaustive_bands(s: &Scenario, d: &Decisions, links: &LinkTable) -> Option<(Vec<Option<usize>>, f64)> {
    let active: Vec<usize> = (0..s.num_devices()).filter(|&j| d.offload_bits[j] > 0.0).collect();
    let mut cur = d.clone();
    let mut used = vec![vec![false; s.num_subbands()]; s.num_uavs()];
    let mut best = None;
    fn rec(
        s: &Scenario,
        links: &LinkTable,
        active: &[usize],
        t: usize,
        cur: &mut Decisions,
        used: &mut [Vec<bool>],
        best: &mut Option<(Vec<Option<usize>>, f64)>,
    ) {
        if t == active.len() {
            let r = evaluate_with_links(s, cur, links);
            if r.feasible() && best.as_ref().map_or(true, |b| r.total < b.1) {
                *best = Some((cur.bands.clone(), r.total));
            }
            return;
        }
        let j = active[t];
        let k = s.association[j];
        for b in 0..s.num_subbands() {
            if used[k][b] {
                continue;
            }
            used[k][b] = true;
            cur.bands[j] = Some(b);
            rec(s, links, active, t + 1, cur, used, best);
            used[k][b] = false;
        }
    }
    // idle devices keep no band so they cannot block an offloader
    for j in 0..s.num_devices() {
        if d.offload_bits[j] <= 0.0 {
            cur.bands[j] = None;
        }
    }
    rec(s, links, &active, 0, &mut cur, &mut used, &mut best);
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub seed: u64,
    pub proposed_j: f64,
    pub band_oracle_j: f64,
    pub band_gap: f64,
    pub route_oracle_j: f64,
    pub route_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub instances: usize,
    pub band_gap_median: f64,
    pub band_gap_max: f64,
    pub route_gap_median: f64,
    pub route_gap_p90: f64,
    pub route_gap_max: f64,
    /// Share of instances whose routing is within 5% of the enumeration.
    pub route_within_5pct: f64,
    pub rows: Vec<OracleRow>,
}

fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn relative_gap(q: f64, oracle: f64) -> f64 {
    if oracle > 0.0 {
        (q - oracle) / oracle
    } else {
        0.0
    }
}

/// Proposed scheme against exhaustive band assignment and exhaustive routing
/// at its own final point.
pub fn oracle_suite(base: &SimConfig, seeds: &[u64], exec: Exec) -> Result<OracleReport> {
    oracle_guard(base)?;
    let rows = par::map(exec, seeds, |&seed| -> Result<OracleRow> {
        let mut c = base.clone();
        c.seed = seed;
        let o = run_one(&c, Variant::Proposed)?;
        let (s, d) = (&o.scenario, &o.result.decisions);
        let q = o.result.report.total;
        let links = LinkTable::build(s, &d.uav_pos, Exec::Sequential)?;
        let band = exhaustive_bands(s, d, &links).map_or(q, |b| b.1.min(q));
        let route = exhaustive_routes(s, d, &links, true)?.map_or(q, |r| r.1.min(q));
        Ok(OracleRow {
            seed,
            proposed_j: q,
            band_oracle_j: band,
            band_gap: relative_gap(q, band),
            route_oracle_j: route,
            route_gap: relative_gap(q, route),
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let band: Vec<f64> = rows.iter().map(|r| r.band_gap).collect();
    let route: Vec<f64> = rows.iter().map(|r| r.route_gap).collect();
    Ok(OracleReport {
        instances: rows.len(),
        band_gap_median: quantile(&band, 0.5),
        band_gap_max: band.iter().cloned().fold(0.0, f64::max),
        route_gap_median: quantile(&route, 0.5),
        route_gap_p90: quantile(&route, 0.9),
        route_gap_max: route.iter().cloned().fold(0.0, f64::max),
        route_within_5pct: route.iter().filter(|g| **g <= 0.05).count() as f64 / rows.len().max(1) as f64,
        rows,
    })
}

pub fn oracle_to_dir(base: &SimConfig, seeds: &[u64], exec: Exec, out: &Path) -> Result<OracleReport> {
    fs::create_dir_all(out)?;
    let rep = oracle_suite(base, seeds, exec)?;
    let mut w = writer(&out.join("oracle.csv"))?;
    for r in &rep.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    write_json(&out.join("oracle.json"), &rep)?;
    Ok(rep)
}

/// Output directory: explicit flag, else `SAGMEC_OUT_DIR`, else `out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("SAGMEC_OUT_DIR").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small() -> SimConfig {
        SimConfig { num_devices: 6, num_uavs: 2, ..SimConfig::default() }
    }

    #[test]
    fn ci_matches_hand_computation() {
        // mean 3, sample variance 2.5, stderr sqrt(0.5)
        let (m, h) = mean_ci(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m, 3.0);
        assert_relative_eq!(h, 1.96 * 0.5f64.sqrt(), max_relative = 1e-15);
        assert_eq!(mean_ci(&[4.0, 4.0, 4.0]), (4.0, 0.0));
        assert_eq!(mean_ci(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let spec = SweepSpec {
            param: SweepParam::Devices,
            values: vec![6.0, 8.0],
            seeds: vec![0, 1],
            variants: vec![Variant::Proposed, Variant::AllLocal, Variant::Ato],
        };
        let rows = sweep(&small(), &spec, Exec::Parallel).unwrap();
        assert_eq!(rows.len(), 12);
        let keys: Vec<_> = rows.iter().map(|r| (r.record.devices, r.record.seed, r.record.variant)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        let seq = sweep(&small(), &spec, Exec::Sequential).unwrap();
        let fields = |rs: &[SweepRow]| rs.iter().map(|r| r.record.fields()).collect::<Vec<_>>();
        assert_eq!(fields(&rows), fields(&seq));
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 6);
        assert!(summary.iter().all(|s| s.n == 2));
    }

    #[test]
    fn summary_of_constant_column() {
        let spec = SweepSpec {
            param: SweepParam::Deadline,
            values: vec![500.0],
            seeds: vec![0, 1, 2],
            variants: vec![Variant::AllLocal],
        };
        let rows = sweep(&small(), &spec, Exec::Sequential).unwrap();
        let s = &summarize(&rows)[0];
        // offload fraction is identically zero for all-local
        assert_eq!(s.stats[3], (0.0, 0.0));
    }

    #[test]
    fn sweep_params_apply() {
        let b = small();
        assert_eq!(SweepParam::Devices.apply(&b, 12.0).unwrap().num_devices, 12);
        assert_eq!(SweepParam::Uavs.apply(&b, 3.0).unwrap().num_uavs, 3);
        assert_eq!(SweepParam::DataSize.apply(&b, 0.2).unwrap().data_bits, Some([0.1e6, 0.30000000000000004e6]));
        assert_eq!(SweepParam::Deadline.apply(&b, 200.0).unwrap().deadline_s, Some(0.2));
        assert!(SweepParam::Devices.apply(&b, 2.5).is_err());
        assert!("bogus".parse::<SweepParam>().is_err());
        assert_eq!("data_size".parse::<SweepParam>().unwrap(), SweepParam::DataSize);
    }

    #[test]
    fn oracle_guard_refuses_large_instances() {
        let mut c = oracle_config();
        assert!(oracle_guard(&c).is_ok());
        c.num_devices = 7;
        assert!(matches!(oracle_guard(&c), Err(Error::Guard(_))));
        let c = SimConfig { num_satellites: 2, ..oracle_config() };
        assert!(oracle_suite(&c, &[0], Exec::Sequential).is_err());
    }

    #[test]
    fn oracle_gaps_are_nonnegative() {
        let rep = oracle_suite(&oracle_config(), &[0, 1, 2, 3], Exec::Sequential).unwrap();
        assert_eq!(rep.instances, 4);
        for r in &rep.rows {
            assert!(r.band_gap >= 0.0 && r.route_gap >= 0.0, "{r:?}");
        }
    }

    #[test]
    fn empty_tasks_give_zero_gap() {
        let c = SimConfig { data_bits: Some([0.0, 0.0]), ..oracle_config() };
        let rep = oracle_suite(&c, &[0, 1], Exec::Sequential).unwrap();
        assert!(rep.rows.iter().all(|r| r.band_gap == 0.0 && r.route_gap == 0.0));
    }

    #[test]
    fn out_dir_resolution() {
        assert_eq!(resolve_out_dir(Some(PathBuf::from("x"))), PathBuf::from("x"));
    }
}
