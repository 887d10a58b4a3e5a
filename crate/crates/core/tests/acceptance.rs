//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-6, 11 and 12 are correctness properties and fail the target.
//! Criteria 7-10 are empirical trends of the model; they are reported with
//! their measured values but do not fail the target.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sagmec::bcd::{run_variant, BcdOptions, Variant};
use sagmec::channel::{self, LinkTable};
use sagmec::constants::Preset;
use sagmec::convex::gradient_check;
use sagmec::cost::{evaluate, evaluate_with_links, objective, Decisions, Route};
use sagmec::deploy::{deploy, DeployOptions, ScaSubproblem};
use sagmec::harness::{summarize, sweep, sweep_to_dir, SweepParam, SweepRow, SweepSpec};
use sagmec::matching::{deferred_acceptance, is_stable, match_all, stable_matchings, Preferences};
use sagmec::offload::{exhaustive_routes, proximal, relax, route, OffloadOptions, RelaxedModel};
use sagmec::par::{self, Exec};
use sagmec::power::{control_power, CcpSubproblem, PowerOptions, PowerSystem};
use sagmec::scenario::{generate, Scenario, SimConfig};

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

fn scenario(seed: u64, j: usize, k: usize, sats: usize) -> Scenario {
    generate(&SimConfig { num_devices: j, num_uavs: k, num_satellites: sats, seed, ..Default::default() }).unwrap()
}

/// Banded devices offload `frac` of their task on `route`, powers from CCP.
fn offloading(s: &Scenario, pos: Vec<[f64; 2]>, frac: f64, route: impl Fn(usize) -> Route) -> Decisions {
    let mut d = Decisions::all_local(s);
    d.uav_pos = pos;
    let links = LinkTable::build(s, &d.uav_pos, Exec::Sequential).unwrap();
    d.bands = match_all(s, &links);
    for j in 0..s.num_devices() {
        if d.bands[j].is_some() {
            d.offload_bits[j] = frac * s.devices[j].data_bits;
            d.powers[j] = 0.5 * s.devices[j].max_power_w;
            d.routes[j] = route(j);
        }
    }
    let rep = evaluate_with_links(s, &d, &links);
    d.powers = control_power(s, &d, &links, &rep, &PowerOptions::default()).powers;
    d
}

fn random_prefs(rng: &mut ChaCha8Rng, max: usize) -> Preferences {
    let n = rng.gen_range(1..=max);
    let b = rng.gen_range(1..=max);
    let dev = (0..n).map(|_| (0..b).map(|_| rng.gen_range(0.01..10.0)).collect()).collect();
    let band = (0..b).map(|_| (0..n).map(|_| rng.gen_range(0.01..10.0)).collect()).collect();
    Preferences::new(dev, band)
}

fn c1_stability() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t0 = Instant::now();
    let mut unstable = 0;
    for _ in 0..1000 {
        let p = random_prefs(&mut rng, 10);
        if !is_stable(&p, &deferred_acceptance(&p)) {
            unstable += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(unstable == 0 && secs < 5.0, format!("{unstable} unstable of 1000, {secs:.3} s"))
}

fn c2_device_optimal() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worse = 0;
    let mut compared = 0;
    for _ in 0..200 {
        let p = random_prefs(&mut rng, 5);
        let m = deferred_acceptance(&p);
        let value = |i: usize, b: Option<usize>| b.map_or(f64::NEG_INFINITY, |b| p.device[i][b]);
        for other in stable_matchings(&p).unwrap() {
            compared += 1;
            if (0..p.num_devices()).any(|i| value(i, other.device_band[i]) > value(i, m.device_band[i])) {
                worse += 1;
            }
        }
    }
    check(worse == 0, format!("{compared} stable matchings compared, {worse} beat the deferred-acceptance match"))
}

fn c3_ccp() -> Check {
    let results = par::map_range(Exec::Parallel, 100, |seed| {
        let s = scenario(seed as u64, 10, 2, 2);
        let mut d = Decisions::all_local(&s);
        let links = LinkTable::build(&s, &d.uav_pos, Exec::Sequential).unwrap();
        d.bands = match_all(&s, &links);
        for j in 0..s.num_devices() {
            d.offload_bits[j] = 0.5 * s.devices[j].data_bits;
            d.powers[j] = 0.01;
        }
        let rep = evaluate_with_links(&s, &d, &links);
        let opts = PowerOptions::default();
        let sys = PowerSystem::build(&s, &d, &links, &rep, opts.margin);
        let (p0, _) = sys.initial_point(s.num_subbands());
        let sub = CcpSubproblem::new(&sys, &p0);
        let grad_err = gradient_check(&sub, &sub.to_scaled(&p0)).unwrap_or(0.0);
        let out = control_power(&s, &d, &links, &rep, &opts);
        let mut prev = sys.energy(&p0);
        let mut descent = true;
        for st in &out.trace {
            descent &= st.surrogate <= prev * (1.0 + 1e-12);
            prev = st.surrogate;
        }
        (descent, grad_err, out.converged && out.trace.len() <= 100)
    });
    let descent = results.iter().all(|r| r.0);
    let grad = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let conv = results.iter().filter(|r| r.2).count();
    check(
        descent && grad <= 1e-4 && conv >= 95,
        format!("descent on all seeds: {descent}; max gradient error {grad:.2e}; converged {conv}/100"),
    )
}

fn grid_placement(s: &Scenario, d: &Decisions) -> [f64; 2] {
    let b = s.uavs[0].bounds;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    let mut cur = d.clone();
    let mut x = b[0][0];
    while x <= b[0][1] {
        let mut y = b[1][0];
        while y <= b[1][1] {
            cur.uav_pos[0] = [x, y];
            let r = evaluate(s, &cur).unwrap();
            if r.feasible() && r.total < best.0 {
                best = (r.total, [x, y]);
            }
            y += 1.0;
        }
        x += 1.0;
    }
    best.1
}

fn c4_sca() -> Check {
    let mixed = |s: &Scenario| {
        let assoc = s.association.clone();
        let k = s.num_uavs();
        move |j: usize| match j % 4 {
            0 => Route::Satellite(0),
            1 => Route::Relay((assoc[j] + 1) % k),
            _ => Route::Serving,
        }
    };
    let results = par::map_range(Exec::Parallel, 100, |seed| {
        let s = scenario(seed as u64, 10, 2, 1);
        let d = offloading(&s, s.initial_positions(), 0.6, mixed(&s));
        let links = LinkTable::build(&s, &d.uav_pos, Exec::Sequential).unwrap();
        let rep = evaluate_with_links(&s, &d, &links);
        let tangency = ScaSubproblem::new(&s, &d, &rep, &DeployOptions::default()).tangency_error();

        let mut pos = s.initial_positions();
        for p in pos.iter_mut() {
            p[0] = (p[0] + 120.0).min(s.area_m);
        }
        let d = offloading(&s, pos, 0.8, mixed(&s));
        let q0 = objective(&s, &d).unwrap();
        let out = deploy(&s, &d, &DeployOptions::default()).unwrap();
        let mut prev = q0;
        let mut descent = true;
        for st in &out.trace {
            descent &= st.objective <= prev * (1.0 + 1e-6);
            prev = st.objective;
        }
        (tangency, descent, out.trace.len())
    });
    let tangency = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let descent = results.iter().all(|r| r.1);
    let moved = results.iter().filter(|r| r.2 > 0).count();

    let mut worst = 0.0f64;
    for seed in 0..3 {
        let s = scenario(100 + seed, 1, 1, 1);
        let dev = s.devices[0].pos;
        let start = [0.5 * dev[0] + 0.25 * s.area_m, 0.5 * dev[1] + 0.25 * s.area_m];
        let mut d = offloading(&s, vec![start], 1.0, |_| Route::Serving);
        d.powers[0] = s.devices[0].max_power_w;
        let out = deploy(&s, &d, &DeployOptions::default()).unwrap();
        let g = grid_placement(&s, &d);
        let p = out.positions[0];
        worst = worst.max(((p[0] - g[0]).powi(2) + (p[1] - g[1]).powi(2)).sqrt());
    }
    check(
        tangency <= 1e-9 && descent && worst <= 2.0,
        format!(
            "max tangency error {tangency:.2e}; true Q non-increasing on 100 seeds: {descent} ({moved} seeds moved); single-device distance to 1 m grid optimum {worst:.3} m"
        ),
    )
}

fn c5_bsum() -> Check {
    let identity = {
        let a = [0.2, 0.3, 0.5];
        proximal(1.25, &a, &a, 1.0) == 1.25
    };
    let results = par::map_range(Exec::Parallel, 100, |seed| {
        let s = scenario(seed as u64, 6, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
        let assoc = s.association.clone();
        let starts: Vec<Route> = (0..6)
            .map(|j| match rng.gen_range(0..3) {
                0 => Route::Serving,
                1 => Route::Relay(1 - assoc[j]),
                _ => Route::Satellite(0),
            })
            .collect();
        let d = offloading(&s, s.initial_positions(), 0.7, |j| starts[j]);
        let links = LinkTable::build(&s, &d.uav_pos, Exec::Sequential).unwrap();
        let rep = evaluate_with_links(&s, &d, &links);
        let model = RelaxedModel::new(&s, &d, &links, &rep, true);
        let opts = OffloadOptions::default();
        let m0 = model.indicator(&d.routes);
        let e0 = model.energy(&m0);
        let (_, trace, _, _) = relax(&model, m0, &opts);
        let mut prev = e0;
        let mut mono = true;
        for st in &trace {
            mono &= st.energy <= prev;
            prev = st.energy;
        }
        let out = route(&s, &d, &links, &opts);
        let mut routed = d.clone();
        routed.routes = out.routes;
        let r = evaluate_with_links(&s, &routed, &links);
        let within = match exhaustive_routes(&s, &d, &links, true).unwrap() {
            None => true,
            Some((_, best)) => r.feasible() && r.total <= 1.05 * best,
        };
        (mono, within)
    });
    let mono = results.iter().all(|r| r.0);
    let within = results.iter().filter(|r| r.1).count();
    check(
        identity && mono && within >= 90,
        format!("anchor identity exact: {identity}; relaxed energy monotone on 100 seeds: {mono}; within 5% of enumeration {within}/100"),
    )
}

fn c6_bcd() -> Check {
    let results = par::map_range(Exec::Parallel, 100, |seed| {
        let s = scenario(seed as u64, 10, 2, 2);
        let t0 = Instant::now();
        let r = run_variant(&s, Variant::Proposed, &BcdOptions::from_scenario(&s)).unwrap();
        let secs = t0.elapsed().as_secs_f64();
        let q = r.trace.objectives();
        let mono = q.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
        let exact = objective(&s, &r.decisions).unwrap() == r.report.total;
        (mono && exact, r.converged && r.outer_iterations() <= 20, secs)
    });
    let mono = results.iter().filter(|r| r.0).count();
    let conv = results.iter().filter(|r| r.1).count();
    let slowest = results.iter().map(|r| r.2).fold(0.0, f64::max);
    check(
        mono == 100 && conv >= 95 && slowest <= 60.0,
        format!("monotone with exact recorded Q {mono}/100; converged within 20 outer iterations {conv}/100; slowest run {slowest:.2} s"),
    )
}

fn run_sweep(param: SweepParam, values: &[f64], variants: &[Variant]) -> Vec<SweepRow> {
    let spec = SweepSpec { param, values: values.to_vec(), seeds: (0..20).collect(), variants: variants.to_vec() };
    sweep(&SimConfig::default(), &spec, Exec::Parallel).unwrap()
}

/// Mean of summary column `metric` at (value, variant).
fn mean(rows: &[SweepRow], value: f64, variant: Variant, metric: usize) -> f64 {
    summarize(rows).into_iter().find(|s| s.value == value && s.variant == variant).unwrap().stats[metric].0
}

fn c7_ordering() -> Check {
    let js = [10.0, 20.0, 30.0, 40.0];
    let rows = run_sweep(SweepParam::Devices, &js, &[Variant::Proposed, Variant::NoCollab, Variant::AllLocal]);
    let mut ok = true;
    let mut parts = Vec::new();
    for &j in &js {
        let p = mean(&rows, j, Variant::Proposed, 0);
        let n = mean(&rows, j, Variant::NoCollab, 0);
        let l = mean(&rows, j, Variant::AllLocal, 0);
        ok &= p <= 1.01 * n && n <= l;
        parts.push(format!("J={j}: {p:.4e} / {n:.4e} / {l:.4e}"));
    }
    check(ok, format!("mean Q proposed / no-collab / all-local: {}", parts.join("; ")))
}

fn c8_data_size() -> Check {
    let xs = [0.1, 0.2, 0.3, 0.4, 0.5];
    let rows = run_sweep(SweepParam::DataSize, &xs, &[Variant::Proposed]);
    let ys: Vec<f64> = xs.iter().map(|&x| mean(&rows, x, Variant::Proposed, 0)).collect();
    let increasing = ys.windows(2).all(|w| w[1] > w[0]);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    check(increasing && r2 >= 0.9, format!("mean Q {}; R^2 = {r2:.4}", ys.iter().map(|y| format!("{y:.4e}")).collect::<Vec<_>>().join(", ")))
}

fn c9_deadline() -> Check {
    let ds = [200.0, 300.0, 400.0, 500.0, 700.0, 1000.0];
    let rows = run_sweep(SweepParam::Deadline, &ds, &[Variant::Proposed]);
    let fr: Vec<f64> = ds.iter().map(|&d| mean(&rows, d, Variant::Proposed, 3)).collect();
    let ok = fr.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    check(ok, format!("mean offload fraction {fr:.4?}"))
}

fn c10_rates() -> Check {
    let rows = run_sweep(SweepParam::Devices, &[20.0], &[Variant::Proposed, Variant::Fpa, Variant::Rsa]);
    let p = mean(&rows, 20.0, Variant::Proposed, 4);
    let f = mean(&rows, 20.0, Variant::Fpa, 4);
    let r = mean(&rows, 20.0, Variant::Rsa, 4);
    check(p >= f && f >= r, format!("mean sum rate proposed {p:.4e}, FPA {f:.4e}, RSA {r:.4e} bit/s"))
}

fn c11_formulas() -> Check {
    let phys = Preset::get(sagmec::constants::PresetName::Physical).phys;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut worst = 0.0f64;

    let g = channel::thz_gain(0.01, 0.005, 50.0).unwrap();
    worst = worst.max(rel(g, 0.01 * (-0.25f64).exp() / 2500.0));

    let s = scenario(11, 8, 2, 1);
    let mut d = Decisions::all_local(&s);
    let links = LinkTable::build(&s, &d.uav_pos, Exec::Sequential).unwrap();
    d.bands = match_all(&s, &links);
    for j in 0..8 {
        d.powers[j] = 0.05 + 0.01 * j as f64;
    }
    for j in 0..8 {
        let Some(b) = d.bands[j] else { continue };
        let gain = |o: usize| {
            let u = &s.uavs[s.association[j]];
            let p = s.devices[o].pos;
            let dist = ((p[0] - u.pos[0]).powi(2) + (p[1] - u.pos[1]).powi(2) + u.altitude_m.powi(2)).sqrt();
            s.phys.ref_gain * (-s.phys.absorption[b] * dist).exp() / (dist * dist)
        };
        let interf: f64 = (0..8)
            .filter(|&o| o != j && d.bands[o] == Some(b) && s.association[o] != s.association[j])
            .map(|o| d.powers[o] * gain(o))
            .sum();
        let want = d.powers[j] * gain(j) / (interf + s.phys.noise_w);
        worst = worst.max(rel(channel::access_sinr(&s, &links, &d.bands, &d.powers, j), want));
    }

    let (p, dist, bw) = (1.0, 350.0, phys.mm_bandwidth_uav_hz);
    let lambda = phys.light_speed / (4.0 * std::f64::consts::PI * phys.mm_carrier_hz);
    let snr = p * phys.antenna_gain_tx * phys.antenna_gain_rx * phys.amp_factor * lambda * lambda
        / (phys.noise_temp_k * phys.boltzmann * bw * dist * dist);
    worst = worst.max(rel(channel::mm_rate(&phys, p, dist, bw).unwrap(), bw * (1.0 + snr).log2()));

    let rt = channel::round_trip_delay(&phys, 780e3 - 50.0);
    worst = worst.max(rel(rt, 2.0 * 779_950.0 / 3e8));
    let ms = (rt * 1e7).round() / 1e4;
    check(worst <= 1e-12 && ms == 5.1997, format!("worst relative error {worst:.2e}; satellite round trip {ms} ms"))
}

fn c12_determinism() -> Check {
    let spec = SweepSpec {
        param: SweepParam::Devices,
        values: vec![10.0, 20.0],
        seeds: (0..20).collect(),
        variants: vec![Variant::Proposed, Variant::Rsa, Variant::Fpa],
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    sweep_to_dir(&SimConfig::default(), &spec, Exec::Parallel, a.path()).unwrap();
    sweep_to_dir(&SimConfig::default(), &spec, Exec::Sequential, b.path()).unwrap();
    let same = |f: &str| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap();
    let ok = same("runs.csv") && same("summary.csv");
    check(ok, format!("runs.csv and summary.csv byte-identical across repeated parallel and sequential sweeps: {ok}"))
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, bool, fn() -> Check); 12] = [
        (1, "matching stability", true, c1_stability),
        (2, "matching device-optimality", true, c2_device_optimal),
        (3, "CCP descent", true, c3_ccp),
        (4, "SCA tangency and descent", true, c4_sca),
        (5, "BSUM", true, c5_bsum),
        (6, "BCD monotonicity", true, c6_bcd),
        (7, "ordering trend", false, c7_ordering),
        (8, "data-size trend", false, c8_data_size),
        (9, "deadline trend", false, c9_deadline),
        (10, "rate explanation", false, c10_rates),
        (11, "formula spot checks", true, c11_formulas),
        (12, "determinism", true, c12_determinism),
    ];
    let mut gating_failed = false;
    for (id, name, gating, f) in criteria {
        let t0 = Instant::now();
        let c = f();
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let kind = if gating { "" } else { " [trend, reported]" };
        println!("criterion {id:>2} {tag} {name}{kind}: {} ({:.1} s)", c.detail, t0.elapsed().as_secs_f64());
        gating_failed |= gating && !c.pass;
    }
    if gating_failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
