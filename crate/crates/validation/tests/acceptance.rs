//! Acceptance suite. Runs without the libtest harness so that every check
//! prints exactly one PASS or FAIL line, and exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;

use hetnet_core::channel::{draw_channels, CMatrix};
use hetnet_core::config::sinr_for_rate;
use hetnet_core::downlink::{dl_feasibility, mu_fixed_point, optimal_rho, solve_dl};
use hetnet_core::geometry::build_network_indexed;
use hetnet_core::montecarlo::{aggregate, run_trials};
use hetnet_core::precoding::{instantaneous_dl_sinr, nulling_residual, projector, rzf_precoder, zf_precoder};
use hetnet_core::rng::{substream, Domain};
use hetnet_core::scenario::{
    build_architecture, evaluate_point, expected_interference, expected_interference_quadrature, SweepOptions,
};
use hetnet_core::special::{ergodic_rate, exp_integral_e1, exp_integral_e1_scaled, invert_ergodic_rate, EULER_GAMMA};
use hetnet_core::uplink::ul_feasibility;
use hetnet_core::{
    solve_ul_fixed_point, Architecture, DeviceKind, DlTargets, LinkLayout, NulledSca, ScenarioConfig, Scheme,
    ServedDevice, UlOptions,
};
use rand::Rng;

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn table_drop(arch: Architecture, tau_sq: f64) -> (ScenarioConfig, LinkLayout) {
    let cfg = ScenarioConfig::default();
    let geom = build_network_indexed(&cfg, 1, 0).unwrap();
    let layout = build_architecture(arch, &cfg, &geom, tau_sq).unwrap();
    (cfg, layout)
}

fn reference_powers() -> Outcome {
    let cfg = ScenarioConfig::default();
    let opts = SweepOptions {
        arch: Architecture::HetnetWireless,
        scheme: Scheme::Rzf,
        tau_sq: 0.1,
        trials: 1000,
        drops: 0,
        seed: 1,
    };
    let row = evaluate_point(&cfg, &opts).unwrap();
    let p = row.powers;
    let checks = [
        ("MUE UL", p.p_mue_ul, 0.083),
        ("SCA UL", p.p_sca_ul, 0.25),
        ("SUE UL", p.p_sue_ul, 0.85e-3),
        ("BS DL", p.p_bs_dl, 0.055),
        ("SCA DL", p.p_sca_dl, 0.75),
        ("UL total", p.ul_total, 5.52),
        ("DL total", p.dl_total, 6.05),
    ];
    let mut pass = row.feasible;
    let mut parts = vec![];
    for (name, got, want) in checks {
        let ok = rel(got, want) <= 0.20;
        pass &= ok;
        parts.push(format!("{name} {got:.3e} vs {want:.3e}{}", if ok { "" } else { " (off)" }));
    }
    parts.push(format!("MC DL power {:.3e}, MC SINR err {:.3}", row.mc_bs_dl_w, row.mc_sinr_relerr));
    outcome(pass, parts.join("; "))
}

/// Rate at which `tau_max²` falls through `level`, by linear interpolation
/// between the grid points that bracket it.
fn crossing(rates: &[f64], tau_sq_max: &[f64], level: f64) -> Option<f64> {
    rates.windows(2).zip(tau_sq_max.windows(2)).find_map(|(r, t)| {
        (t[0] >= level && t[1] < level).then(|| r[0] + (r[1] - r[0]) * (t[0] - level) / (t[0] - t[1]))
    })
}

fn feasibility_walls() -> Outcome {
    let (_, base) = table_drop(Architecture::HetnetWireless, 0.1);
    let step = 0.05;
    let rates: Vec<f64> = (0..=50).map(|i| 0.5 + step * i as f64).collect();
    let (mut mmse, mut zf, mut rzf) = (vec![], vec![], vec![]);
    for &r in &rates {
        let layout = base.with_mue_gamma(sinr_for_rate(r));
        let t = DlTargets::from_layout(&layout).unwrap();
        mmse.push(ul_feasibility(&layout).tau_max.powi(2));
        zf.push(dl_feasibility(&t, Scheme::Zf).unwrap().tau_max.powi(2));
        rzf.push(dl_feasibility(&t, Scheme::Rzf).unwrap().tau_max.powi(2));
    }
    let found = [
        ("MMSE", crossing(&rates, &mmse, 0.3), 1.5),
        ("ZF", crossing(&rates, &zf, 0.3), 1.5),
        ("RZF", crossing(&rates, &rzf, 0.3), 1.75),
    ];
    let mut pass = true;
    let mut parts = vec![];
    for (name, x, want) in found {
        match x {
            Some(x) => {
                pass &= (x - want).abs() <= step;
                parts.push(format!("{name} wall at {x:.3} (expected {want})"));
            }
            None => {
                pass = false;
                parts.push(format!("{name} wall not found"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

/// Total RZF power at `rho` for the aggregates of `t`, with μ found by
/// bisection on `μ (ρ + c/(1 + μ)) = 1 − c_S`.
fn rzf_power_oracle(t: &DlTargets, rho: f64) -> Option<f64> {
    let free = 1.0 - t.c_s;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi * (rho + t.c / (1.0 + hi)) < free {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * (rho + t.c / (1.0 + mid)) < free {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let q = (1.0 + mu).powi(2);
    let den = mu * (t.c + rho * q) - t.c * t.gamma_bar - t.c * q * t.b;
    (den > 0.0).then(|| t.c * t.noise_w * q * t.a / den)
}

fn rho_optimality() -> Outcome {
    let mut rng = substream(2024, Domain::Geometry, 77);
    let grid: Vec<f64> = (0..4001).map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / 4000.0)).collect();
    let log_step = (grid[1] / grid[0]).ln();
    let (mut draws, mut worst_steps, mut worst_mu) = (0, 0.0_f64, 0.0_f64);
    let mut pass = true;
    while draws < 100 {
        let k = rng.random_range(8..64);
        let c = rng.random_range(0.05..0.7);
        let c_s = rng.random_range(0.0..0.25_f64.min(0.95 - c));
        let gammas: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..8.0)).collect();
        let is_mue: Vec<bool> = (0..k).map(|_| rng.random_bool(0.8)).collect();
        let tau: Vec<f64> = is_mue.iter().map(|&m| if m { rng.random_range(0.0..0.3) } else { 0.0 }).collect();
        let gains: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.random_range(-13.0..-9.0))).collect();
        let t = DlTargets::new(gammas, tau, gains, is_mue, c, c_s, 4e-14).unwrap();
        let rho = optimal_rho(t.gamma_bar, t.c, t.c_s).unwrap();
        if !(rho > 0.0 && rho * t.gamma_bar - t.c * t.b > 0.0) {
            continue;
        }
        draws += 1;
        let best = grid
            .iter()
            .filter_map(|&r| rzf_power_oracle(&t, r).map(|p| (r, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((r_grid, _)) = best else {
            pass = false;
            continue;
        };
        let steps = (r_grid / rho).ln().abs() / log_step;
        worst_steps = worst_steps.max(steps);
        let mu = mu_fixed_point(t.c, t.c_s, rho).unwrap();
        worst_mu = worst_mu.max(rel(mu, t.gamma_bar));
        pass &= steps <= 1.0;
    }
    pass &= worst_mu <= 1e-12;
    outcome(
        pass,
        format!("{draws} draws, worst grid offset {worst_steps:.2} steps, worst |mu/gamma_bar - 1| {worst_mu:.1e}"),
    )
}

fn exact_zf() -> Outcome {
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for n in [32usize, 64, 128] {
        for load in [0.5, 0.75, 0.9] {
            let total = (load * n as f64).round() as usize;
            let s = total / 8;
            let k = total - s;
            let served = (0..k)
                .map(|i| ServedDevice {
                    kind: DeviceKind::Mue,
                    id: i,
                    gamma: 0.5 + (i % 7) as f64,
                    tau_sq: 0.0,
                    gain: 1e-12 * (1.0 + i as f64),
                    azimuth: 0.0,
                })
                .collect();
            let nulled = (0..s)
                .map(|i| NulledSca {
                    id: i,
                    gain_bs: 1e-10,
                    gain_access: 1e-9,
                    cross: vec![1e-13; k],
                    gamma_s: 10.0,
                    azimuth: 0.0,
                })
                .collect();
            let layout = LinkLayout {
                n_antennas: n,
                noise_w: 4e-14,
                served,
                nulled,
            };
            let powers: Vec<f64> = layout.served.iter().map(|d| d.gamma * layout.noise_w).collect();
            for trial in 0..20 {
                let ch = draw_channels(&layout, 5, trial, None).unwrap();
                let t = projector(&ch.h_nulled).unwrap();
                let (v, _) = zf_precoder(&ch.h_hat, &t).unwrap();
                let (sinr, _) = instantaneous_dl_sinr(&ch.h, &v, &powers, layout.noise_w);
                for (x, d) in sinr.iter().zip(&layout.served) {
                    worst = worst.max(rel(*x, d.gamma));
                }
                cases += 1;
            }
        }
    }
    outcome(worst < 1e-6, format!("{cases} trials up to K + S = 0.9N, worst relative SINR error {worst:.1e}"))
}

/// The default drop rescaled to `n` antennas at the same `c` and `c_S`:
/// every device is repeated `n/128` times, or every `128/n`-th one is kept.
fn rescaled(base: &LinkLayout, n: usize) -> LinkLayout {
    let n0 = base.n_antennas;
    let (served_idx, nulled_idx): (Vec<usize>, Vec<usize>) = if n >= n0 {
        let f = n / n0;
        (
            (0..base.k()).flat_map(|i| std::iter::repeat_n(i, f)).collect(),
            (0..base.s()).flat_map(|i| std::iter::repeat_n(i, f)).collect(),
        )
    } else {
        let m = n0 / n;
        ((0..base.k()).step_by(m).collect(), (0..base.s()).step_by(m).collect())
    };
    let mut served: Vec<ServedDevice> = served_idx.iter().map(|&i| base.served[i].clone()).collect();
    for (j, d) in served.iter_mut().enumerate() {
        d.id = j;
    }
    let nulled = nulled_idx
        .iter()
        .enumerate()
        .map(|(j, &i)| NulledSca {
            id: j,
            cross: served_idx.iter().map(|&k| base.nulled[i].cross[k]).collect(),
            ..base.nulled[i].clone()
        })
        .collect();
    LinkLayout {
        n_antennas: n,
        noise_w: base.noise_w,
        served,
        nulled,
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn convergence() -> Outcome {
    let (_, base) = table_drop(Architecture::HetnetWireless, 0.1);
    let sizes = [32usize, 64, 128, 256];
    let trials = 1000;
    let (mut ul, mut dl, mut parts) = (vec![], vec![], vec![]);
    let mut c_ratio = None;
    for &n in &sizes {
        let layout = rescaled(&base, n);
        c_ratio.get_or_insert((layout.c(), layout.c_s()));
        assert_eq!(c_ratio, Some((layout.c(), layout.c_s())));
        let u = solve_ul_fixed_point(&layout, UlOptions::default()).unwrap();
        let d = solve_dl(&DlTargets::from_layout(&layout).unwrap(), Scheme::Rzf).unwrap();
        if !u.feasible || !d.feasible {
            return outcome(false, format!("targets infeasible at N = {n}"));
        }
        let res = run_trials(&layout, Some(&u), Some(&d), None, 3, 0, trials).unwrap();
        let st = aggregate(&layout, &res, 3);
        ul.push(st.ul_device_err);
        dl.push(st.dl_device_err);
        parts.push(format!(
            "N={n}: UL {:.4} DL {:.4} (per-sample {:.3}/{:.3})",
            st.ul_device_err, st.dl_device_err, st.ul_rel_err, st.dl_rel_err
        ));
    }
    let logs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let (su, sd) = (slope(&logs, &ul), slope(&logs, &dl));
    let pass = su < 0.0 && sd < 0.0 && ul[2] <= 0.10 && dl[2] <= 0.10;
    parts.push(format!("slopes UL {su:.4} DL {sd:.4}"));
    outcome(pass, parts.join("; "))
}

fn nulling() -> Outcome {
    let mut worst = 0.0_f64;
    let mut cases = 0;
    for arch in [Architecture::HetnetWireless, Architecture::HetnetWired] {
        for rate in [1.0, 1.5, 2.5] {
            for tau_sq in [0.0, 0.1, 0.3, 0.5] {
                let (_, base) = table_drop(arch, tau_sq);
                let layout = base.with_mue_gamma(sinr_for_rate(rate));
                let t = DlTargets::from_layout(&layout).unwrap();
                let rho = optimal_rho(t.gamma_bar, t.c, t.c_s).unwrap();
                // an infeasible target set still gets a well-defined precoder
                let rho = if rho > 0.0 { rho } else { 0.1 };
                let gains: Vec<f64> = layout.served.iter().map(|d| d.gain).collect();
                for trial in 0..5 {
                    let ch = draw_channels(&layout, 8, trial, None).unwrap();
                    let proj = projector(&ch.h_nulled).unwrap();
                    let precoders: [CMatrix; 3] = [
                        rzf_precoder(&ch.h_hat, &gains, &proj, rho).unwrap(),
                        zf_precoder(&ch.h_hat, &proj).unwrap().0,
                        proj.clone(),
                    ];
                    for v in &precoders {
                        worst = worst.max(nulling_residual(&ch.h_nulled, v));
                        cases += 1;
                    }
                }
            }
        }
    }
    outcome(worst < 1e-8, format!("{cases} precoders (RZF, ZF, STC), worst normalized leakage {worst:.1e}"))
}

fn interference_formula() -> Outcome {
    let cfg = ScenarioConfig::default();
    let pl = cfg.pathloss().unwrap();
    let x = pl.cutoff_m;
    let mut worst = 0.0_f64;
    for i in 0..=200 {
        let d = 0.5 * x * 100f64.powf(i as f64 / 200.0);
        let a = expected_interference(5.12e-4, 0.083, &pl, d).unwrap();
        let b = expected_interference_quadrature(5.12e-4, 0.083, &pl, d).unwrap();
        worst = worst.max(rel(a, b));
    }
    let density = cfg.n_mue as f64 / (cfg.cell_side_m * cfg.cell_side_m);
    let d = cfg.sca_pitch_m / 2.0 - cfg.small_cell_radius_m;
    let inr = expected_interference(density, 0.083, &pl, d).unwrap() / cfg.noise_w();
    let pass = worst < 1e-6 && rel(inr, 5.5e3) <= 0.05;
    outcome(
        pass,
        format!(
            "closed form vs quadrature worst {worst:.1e} over [x/2, 50x]; INR at density {density:.3e}/m^2, d = {d} m: {inr:.4e} vs 5.5e3"
        ),
    )
}

fn e1_oracle(z: f64) -> f64 {
    // trapezoid after s = e^u − 1; spectrally accurate for this integrand
    let (b, n) = (8.0_f64, 400_000);
    let h = b / n as f64;
    let f = |u: f64| (-z * u.exp()).exp();
    let mut sum = 0.5 * (f(0.0) + f(b));
    for i in 1..n {
        sum += f(i as f64 * h);
    }
    sum * h
}

fn special_functions() -> Outcome {
    let mut pass = true;
    let mut parts = vec![];
    let trip = [0.5, 1.0, 3.0, 6.0]
        .iter()
        .map(|&r| (ergodic_rate(invert_ergodic_rate(r).unwrap()).unwrap() - r).abs())
        .fold(0.0, f64::max);
    pass &= trip < 1e-9;
    parts.push(format!("round trip {trip:.1e}"));
    let small = (exp_integral_e1(1e-8).unwrap() + 1e-8_f64.ln() + EULER_GAMMA).abs();
    pass &= small < 1e-6;
    parts.push(format!("small-z {small:.1e}"));
    let large = (1e4 * exp_integral_e1_scaled(1e4).unwrap() - 1.0).abs();
    pass &= large < 1.5e-4;
    parts.push(format!("large-z {large:.1e}"));
    let frozen = rel(exp_integral_e1(1.0).unwrap(), 0.219_383_934_4).max(rel(exp_integral_e1(10.0).unwrap(), 4.156_968_929_685e-6));
    pass &= frozen < 1e-9;
    parts.push(format!("tabulated {frozen:.1e}"));
    let forward = |g: f64| (1.0 / g).exp() * e1_oracle(1.0 / g) / std::f64::consts::LN_2;
    let (mut lo, mut hi) = (1e-3_f64, 1e4_f64);
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if forward(mid) < 3.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = (lo * hi).sqrt();
    let ours = invert_ergodic_rate(3.0).unwrap();
    let inv = rel(ours, oracle);
    pass &= inv < 1e-8;
    parts.push(format!("inverse(3) = {ours:.10} vs bisection {oracle:.10}"));
    outcome(pass, parts.join("; "))
}

fn run_cli(bin: &Path, args: &[&str], threads: usize, dir: &Path, out: &str) -> Vec<u8> {
    let path = dir.join(out);
    let status = Command::new(bin)
        .args(["--threads", &threads.to_string(), "--seed", "7", "--out"])
        .arg(&path)
        .args(args)
        .status()
        .expect("binary runs");
    assert!(status.code().is_some_and(|c| c <= 1), "{args:?} exited with {status}");
    std::fs::read(path).unwrap()
}

fn determinism() -> Outcome {
    let Some(bin) = hetnet_validation::hetnet_binary() else {
        return outcome(false, "hetnet binary not built; run `cargo build -p hetnet-cli` first");
    };
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 4] = [
        &["sweep", "--rates", "1,1.5,2.5", "--arch", "hetnet,wired", "--scheme", "rzf,stc", "--tau-sq", "0.1", "--trials", "20"],
        &["montecarlo", "--trials", "40", "--tau-sq", "0.2", "--scheme", "zf"],
        &["geometry", "--drop", "3"],
        &["tradeoff", "--density", "5.12e-4", "--d", "27.5,100"],
    ];
    let mut parts = vec![];
    let mut pass = true;
    for (c, args) in commands.iter().enumerate() {
        let runs: Vec<Vec<u8>> = [1, 2, 4, 1]
            .iter()
            .enumerate()
            .map(|(i, &t)| run_cli(&bin, args, t, dir.path(), &format!("c{c}_{i}.csv")))
            .collect();
        let same = runs.windows(2).all(|w| w[0] == w[1]) && !runs[0].is_empty();
        pass &= same;
        parts.push(format!("{} {}", args[0], if same { "identical" } else { "DIFFERS" }));
    }
    outcome(pass, format!("threads 1/2/4/1: {}", parts.join(", ")))
}

fn main() {
    let checks: [Check; 9] = [
        ("reference_powers", reference_powers),
        ("feasibility_walls", feasibility_walls),
        ("rzf_regularizer_optimality", rho_optimality),
        ("exact_zero_forcing", exact_zf),
        ("deterministic_equivalent_convergence", convergence),
        ("null_space_leakage", nulling),
        ("interference_closed_form", interference_formula),
        ("special_functions", special_functions),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
