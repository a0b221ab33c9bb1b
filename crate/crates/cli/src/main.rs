//! `hetnet`: solve, simulate and sweep the reverse-TDD two-tier network.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hetnet_core::channel::CorrelationRoots;
use hetnet_core::downlink::solve_dl;
use hetnet_core::geometry::build_network_indexed;
use hetnet_core::montecarlo::{aggregate, run_trials, write_records, RECORD_HEADER};
use hetnet_core::scenario::{
    build_architecture, expected_interference, expected_interference_far_field,
    expected_interference_quadrature, rate_sweep, sweep_csv, SweepOptions,
};
use hetnet_core::{
    parse_config, solve_ul_fixed_point, Architecture, DlTargets, LinkLayout, ScenarioConfig, Scheme,
    UlOptions,
};

use manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "hetnet", version, about = "Reverse-TDD HetNet power control and Monte-Carlo validation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file of `key = value` lines; defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output CSV; stdout when absent. A `.manifest` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct Point {
    /// hetnet, wired or mmimo.
    #[arg(long, default_value = "hetnet")]
    arch: Architecture,
    /// MUE CSI error variance; derived from the mobility settings when absent.
    #[arg(long)]
    tau_sq: Option<f64>,
    /// MUE rate target in bit/s/Hz, overriding the config.
    #[arg(long)]
    rate: Option<f64>,
    /// User drop to solve.
    #[arg(long, default_value_t = 0)]
    drop: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the network layout of one drop.
    Geometry {
        #[arg(long, default_value_t = 0)]
        drop: u64,
    },
    /// Asymptotic UL powers and SCA DL powers, one row per device.
    SolveUl {
        #[command(flatten)]
        point: Point,
    },
    /// Asymptotic BS DL power for one precoder.
    SolveDl {
        #[command(flatten)]
        point: Point,
        /// rzf, zf or stc.
        #[arg(long, default_value = "rzf")]
        scheme: Scheme,
    },
    /// Monte-Carlo check of one drop against its asymptotic powers.
    Montecarlo {
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value = "rzf")]
        scheme: Scheme,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Per-device, per-trial SINR records.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Power and throughput over a range of MUE rates.
    Sweep {
        /// `start:stop:step` (inclusive) or a comma list.
        #[arg(long, default_value = "0.5:3:0.25")]
        rates: String,
        /// Comma list of architectures, or `all`.
        #[arg(long, default_value = "all")]
        arch: String,
        /// Comma list of schemes, or `all`.
        #[arg(long, default_value = "rzf")]
        scheme: String,
        /// Comma list of CSI error variances; the mobility value when absent.
        #[arg(long)]
        tau_sq: Option<String>,
        /// Monte-Carlo trials per point (0 for analysis only).
        #[arg(long, default_value_t = 0)]
        trials: usize,
        /// User drops to average when no trials are run.
        #[arg(long, default_value_t = 10)]
        drops: usize,
    },
    /// Mean interference at an SCA versus exclusion radius.
    Tradeoff {
        /// Interferer density in 1/m².
        #[arg(long)]
        density: f64,
        /// Exclusion radius in m, or a comma list.
        #[arg(long)]
        d: String,
        /// Interferer transmit power in W.
        #[arg(long, default_value_t = 0.083)]
        power: f64,
    },
}

/// Whether a run produced at least one feasible result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Feasible,
    Infeasible,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Feasible) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    let cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => ScenarioConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = load_config(cli.common.config.as_deref())?;
    let mut manifest = Manifest::new(command_name(&cli.command));
    manifest.config(cli.common.config.as_deref(), &cfg);
    manifest.set("seed", cli.common.seed);
    manifest.set("threads", rayon::current_num_threads());
    let seed = cli.common.seed;

    let (csv, outcome) = match &cli.command {
        Command::Geometry { drop } => {
            manifest.set("drop", drop);
            (build_network_indexed(&cfg, seed, *drop)?.to_csv(), Outcome::Feasible)
        }
        Command::SolveUl { point } => solve_ul_cmd(&cfg, seed, point, &mut manifest)?,
        Command::SolveDl { point, scheme } => solve_dl_cmd(&cfg, seed, point, *scheme, &mut manifest)?,
        Command::Montecarlo {
            point,
            scheme,
            trials,
            records,
        } => montecarlo_cmd(&cfg, seed, point, *scheme, *trials, records.as_deref(), &mut manifest)?,
        Command::Sweep {
            rates,
            arch,
            scheme,
            tau_sq,
            trials,
            drops,
        } => sweep_cmd(&cfg, seed, rates, arch, scheme, tau_sq.as_deref(), *trials, *drops, &mut manifest)?,
        Command::Tradeoff { density, d, power } => tradeoff_cmd(&cfg, *density, d, *power, &mut manifest)?,
    };

    match &cli.common.out {
        Some(path) => {
            std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            manifest.set("output", path.display());
            manifest.write_for(path)?;
        }
        None => print!("{csv}"),
    }
    Ok(outcome)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Geometry { .. } => "geometry",
        Command::SolveUl { .. } => "solve-ul",
        Command::SolveDl { .. } => "solve-dl",
        Command::Montecarlo { .. } => "montecarlo",
        Command::Sweep { .. } => "sweep",
        Command::Tradeoff { .. } => "tradeoff",
    }
}

fn point_layout(cfg: &ScenarioConfig, seed: u64, p: &Point, manifest: &mut Manifest) -> Result<(ScenarioConfig, LinkLayout, f64)> {
    let mut cfg = cfg.clone();
    if let Some(r) = p.rate {
        cfg.mue_rate_bps_hz = r;
        cfg.validate()?;
    }
    let tau_sq = match p.tau_sq {
        Some(t) => t,
        None => cfg.tau_sq()?,
    };
    manifest.set("arch", p.arch.label());
    manifest.set("rate_bps_hz", cfg.mue_rate_bps_hz);
    manifest.set("tau_sq", tau_sq);
    manifest.set("drop", p.drop);
    let geom = build_network_indexed(&cfg, seed, p.drop)?;
    let layout = build_architecture(p.arch, &cfg, &geom, tau_sq)?;
    Ok((cfg, layout, tau_sq))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6e}")
    }
}

fn solve_ul_cmd(cfg: &ScenarioConfig, seed: u64, p: &Point, manifest: &mut Manifest) -> Result<(String, Outcome)> {
    let (_, layout, _) = point_layout(cfg, seed, p, manifest)?;
    let ul = solve_ul_fixed_point(&layout, UlOptions::default())?;
    manifest.set("feasible", ul.feasible);
    manifest.set("xi", ul.xi);
    manifest.set("delta", ul.delta);
    manifest.set("iterations", ul.iterations);
    manifest.set("tau_max", ul.tau_max);
    let mut out = String::from("device_id,class,target_sinr,tau_sq,gain,power_w,feasible\n");
    let power = |v: f64| if ul.feasible { num(v) } else { "inf".into() };
    for (k, d) in layout.served.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{}_UL,{},{},{},{},{}",
            d.kind.label(),
            num(d.gamma),
            d.tau_sq,
            num(d.gain),
            power(ul.powers[k]),
            ul.feasible
        );
    }
    for (s, sca) in layout.nulled.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},SCA_DL,{},0,{},{},{}",
            layout.k() + s,
            num(sca.gamma_s),
            num(sca.gain_access),
            power(ul.sca_dl_powers[s]),
            ul.feasible
        );
    }
    Ok((out, if ul.feasible { Outcome::Feasible } else { Outcome::Infeasible }))
}

fn solve_dl_cmd(
    cfg: &ScenarioConfig,
    seed: u64,
    p: &Point,
    scheme: Scheme,
    manifest: &mut Manifest,
) -> Result<(String, Outcome)> {
    let (cfg, layout, tau_sq) = point_layout(cfg, seed, p, manifest)?;
    manifest.set("scheme", scheme.label());
    let dl = solve_dl(&DlTargets::from_layout(&layout)?, scheme)?;
    let mut out = String::from("arch,scheme,rate_bps_hz,tau_sq,feasible,rho,mu,p_bs_dl_w,tau_max\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{}",
        p.arch.label(),
        scheme.label(),
        cfg.mue_rate_bps_hz,
        tau_sq,
        dl.feasible,
        num(dl.rho),
        num(dl.mu),
        num(dl.total_power),
        num(dl.tau_max)
    );
    Ok((out, if dl.feasible { Outcome::Feasible } else { Outcome::Infeasible }))
}

fn montecarlo_cmd(
    cfg: &ScenarioConfig,
    seed: u64,
    p: &Point,
    scheme: Scheme,
    trials: usize,
    records: Option<&Path>,
    manifest: &mut Manifest,
) -> Result<(String, Outcome)> {
    if trials == 0 {
        bail!("--trials must be positive");
    }
    let (cfg, layout, tau_sq) = point_layout(cfg, seed, p, manifest)?;
    manifest.set("scheme", scheme.label());
    manifest.set("trials", trials);
    let ul = solve_ul_fixed_point(&layout, UlOptions::default())?;
    let dl = solve_dl(&DlTargets::from_layout(&layout)?, scheme)?;
    let header = "arch,scheme,rate_bps_hz,tau_sq,trials,seed,ul_rel_err,ul_device_err,ul_ratio_mean,ul_ratio_std,\
                  dl_rel_err,dl_device_err,dl_ratio_mean,dl_ratio_std,dl_power_mean_w,p_bs_dl_w,\
                  max_nulling_residual,sue_rate_mean,sue_interference_mean_w\n";
    let mut out = String::from(header);
    let prefix = format!("{},{},{},{},{},{}", p.arch.label(), scheme.label(), cfg.mue_rate_bps_hz, tau_sq, trials, seed);
    if !ul.feasible || !dl.feasible {
        log::warn!("targets are infeasible (UL {}, DL {}); nothing to simulate", ul.feasible, dl.feasible);
        let _ = writeln!(out, "{prefix},,,,,,,,,,inf,,,");
        return Ok((out, Outcome::Infeasible));
    }
    let roots = if cfg.correlated {
        Some(CorrelationRoots::for_layout(&layout, cfg.angular_spread_rad, seed, p.drop)?)
    } else {
        None
    };
    let results = run_trials(&layout, Some(&ul), Some(&dl), roots.as_ref(), seed, 0, trials)?;
    let st = aggregate(&layout, &results, seed);
    let _ = writeln!(
        out,
        "{prefix},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        num(st.ul_rel_err),
        num(st.ul_device_err),
        num(st.ul_ratio_mean),
        num(st.ul_ratio_std),
        num(st.dl_rel_err),
        num(st.dl_device_err),
        num(st.dl_ratio_mean),
        num(st.dl_ratio_std),
        num(st.dl_power_mean),
        num(dl.total_power),
        num(st.max_nulling_residual),
        num(st.sue_rate_mean),
        num(st.sue_interference_mean)
    );
    if let Some(path) = records {
        let mut rec = String::from(RECORD_HEADER);
        for r in &results {
            write_records(&mut rec, &layout, r, Some(&ul), Some(&dl));
        }
        std::fs::write(path, rec).with_context(|| format!("writing {}", path.display()))?;
        manifest.set("records", path.display());
        manifest.write_for(path)?;
    }
    Ok((out, Outcome::Feasible))
}

/// Parses `start:stop:step` (inclusive) or a comma list.
fn parse_rates(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let [start, stop, step] = [parts[0], parts[1], parts[2]].map(|s| s.trim().parse::<f64>());
        let (start, stop, step) = (start?, stop?, step?);
        if !(step > 0.0) || !(stop >= start) {
            bail!("range `{spec}` needs step > 0 and stop >= start");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // rounding keeps 0.1-style steps from printing as 0.30000000000000004
        return Ok((0..n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect());
    }
    if parts.len() != 1 {
        bail!("`{spec}` is neither start:stop:step nor a comma list");
    }
    parse_list(spec)
}

fn parse_list<T: std::str::FromStr>(spec: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    spec.split(',')
        .map(|s| s.trim().parse::<T>().with_context(|| format!("bad list entry `{s}`")))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn sweep_cmd(
    cfg: &ScenarioConfig,
    seed: u64,
    rates: &str,
    arch: &str,
    scheme: &str,
    tau_sq: Option<&str>,
    trials: usize,
    drops: usize,
    manifest: &mut Manifest,
) -> Result<(String, Outcome)> {
    let rates = parse_rates(rates)?;
    let archs: Vec<Architecture> = if arch.eq_ignore_ascii_case("all") {
        Architecture::ALL.to_vec()
    } else {
        parse_list(arch)?
    };
    let schemes: Vec<Scheme> = if scheme.eq_ignore_ascii_case("all") {
        vec![Scheme::Rzf, Scheme::Zf, Scheme::Stc]
    } else {
        parse_list(scheme)?
    };
    let taus: Vec<f64> = match tau_sq {
        Some(s) => parse_list(s)?,
        None => vec![cfg.tau_sq()?],
    };
    manifest.set("rates", rates.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","));
    manifest.set("archs", archs.iter().map(|a| a.label()).collect::<Vec<_>>().join(","));
    manifest.set("schemes", schemes.iter().map(|s| s.label()).collect::<Vec<_>>().join(","));
    manifest.set("tau_sq", taus.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","));
    manifest.set("trials", trials);
    manifest.set("drops", drops);

    let mut rows = vec![];
    for &arch in &archs {
        for &scheme in &schemes {
            for &tau_sq in &taus {
                let opts = SweepOptions {
                    arch,
                    scheme,
                    tau_sq,
                    trials,
                    drops,
                    seed,
                };
                rows.extend(rate_sweep(cfg, &rates, &opts)?);
            }
        }
    }
    let outcome = if rows.iter().any(|r| r.feasible) {
        Outcome::Feasible
    } else {
        Outcome::Infeasible
    };
    Ok((sweep_csv(&rows), outcome))
}

fn tradeoff_cmd(cfg: &ScenarioConfig, density: f64, d: &str, power: f64, manifest: &mut Manifest) -> Result<(String, Outcome)> {
    let pl = cfg.pathloss()?;
    let sigma2 = cfg.noise_w();
    manifest.set("density_per_m2", density);
    manifest.set("power_w", power);
    let mut out = String::from("density_per_m2,d_m,power_w,interference_w,inr,inr_quadrature,inr_far_field\n");
    for d in parse_list::<f64>(d)? {
        let e = expected_interference(density, power, &pl, d)?;
        let q = expected_interference_quadrature(density, power, &pl, d)?;
        let f = expected_interference_far_field(density, power, &pl, d);
        let _ = writeln!(
            out,
            "{density:e},{d},{power},{},{},{},{}",
            num(e),
            num(e / sigma2),
            num(q / sigma2),
            num(f / sigma2)
        );
    }
    Ok((out, Outcome::Feasible))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_ranges() {
        assert_eq!(parse_rates("0.5:1.5:0.25").unwrap(), vec![0.5, 0.75, 1.0, 1.25, 1.5]);
        assert_eq!(parse_rates("0.1:0.3:0.1").unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(parse_rates("2, 1").unwrap(), vec![2.0, 1.0]);
        assert!(parse_rates("1:0:0.1").is_err());
        assert!(parse_rates("1:2").is_err());
        assert!(parse_rates("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
