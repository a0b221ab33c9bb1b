//! Scenario orchestration: the proposed network and its two baselines, rate
//! sweeps, power accounting, and the interference/proximity tradeoff.

use std::fmt::Write as _;

use crate::channel::CorrelationRoots;
use crate::config::{sinr_for_rate, PathlossModel, ScenarioConfig};
use crate::downlink::{solve_dl, DlSolution, DlTargets, Scheme};
use crate::error::{Error, Result};
use crate::geometry::{build_network_indexed, Group, NetworkGeometry, Point};
use crate::layout::{DeviceKind, LinkLayout, NulledSca, ServedDevice};
use crate::montecarlo::{run_trials, Accumulator};
use crate::quad;
use crate::special::{hyp2f1, invert_ergodic_rate};
use crate::uplink::{solve_ul_fixed_point, UlOptions, UlSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// BS serves RED MUEs and backhauls RED SCAs over the air, nulling BLUE SCAs.
    HetnetWireless,
    /// SCAs have wired backhaul: the BS serves RED MUEs only and protects every SCA.
    HetnetWired,
    /// No SCAs: the BS serves RED MUEs and the RED small-cell users directly.
    MassiveMimo,
}

impl Architecture {
    pub fn label(self) -> &'static str {
        match self {
            Architecture::HetnetWireless => "hetnet",
            Architecture::HetnetWired => "wired",
            Architecture::MassiveMimo => "mmimo",
        }
    }

    pub const ALL: [Architecture; 3] = [
        Architecture::HetnetWireless,
        Architecture::HetnetWired,
        Architecture::MassiveMimo,
    ];
}

impl std::str::FromStr for Architecture {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "hetnet" | "hetnet_wireless" | "wireless" => Ok(Architecture::HetnetWireless),
            "wired" | "hetnet_wired" => Ok(Architecture::HetnetWired),
            "mmimo" | "massive_mimo" => Ok(Architecture::MassiveMimo),
            other => Err(Error::InvalidParameter {
                name: "arch",
                reason: format!("`{other}` is not one of hetnet, wired, mmimo"),
            }),
        }
    }
}

fn served(kind: DeviceKind, id: usize, pos: Point, gamma: f64, tau_sq: f64, pl: &PathlossModel) -> ServedDevice {
    ServedDevice {
        kind,
        id,
        gamma,
        tau_sq,
        gain: pl.gain(pos.norm()),
        azimuth: pos.azimuth(),
    }
}

/// Solver inputs of `arch` for one drop, with every MUE at CSI error `tau_sq`.
pub fn build_architecture(
    arch: Architecture,
    cfg: &ScenarioConfig,
    geom: &NetworkGeometry,
    tau_sq: f64,
) -> Result<LinkLayout> {
    let pl = cfg.pathloss()?;
    let mue_gamma = cfg.mue_sinr();
    let mut served_set: Vec<ServedDevice> = geom
        .red_mues()
        .map(|(i, m)| served(DeviceKind::Mue, i, m.pos, mue_gamma, tau_sq, &pl))
        .collect();
    let protected: Vec<usize> = match arch {
        Architecture::HetnetWireless => {
            for (i, s) in geom.scas_in(Group::Red) {
                served_set.push(served(DeviceKind::Sca, i, s.pos, cfg.sca_sinr(), 0.0, &pl));
            }
            geom.scas_in(Group::Blue).map(|(i, _)| i).collect()
        }
        Architecture::HetnetWired => (0..geom.scas.len()).collect(),
        Architecture::MassiveMimo => {
            let gamma = sinr_for_rate(cfg.sue_rate_bps_hz);
            for u in geom.sues.iter().filter(|u| geom.scas[u.sca].group == Group::Red) {
                served_set.push(served(DeviceKind::Sue, u.sca, u.pos, gamma, 0.0, &pl));
            }
            vec![]
        }
    };
    let gamma_s = invert_ergodic_rate(cfg.sue_rate_bps_hz)?;
    let positions: Vec<Point> = served_set
        .iter()
        .map(|d| match d.kind {
            DeviceKind::Mue => geom.mues[d.id].pos,
            DeviceKind::Sca => geom.scas[d.id].pos,
            DeviceKind::Sue => geom.sues[d.id].pos,
        })
        .collect();
    let nulled = protected
        .into_iter()
        .map(|i| {
            let sca = &geom.scas[i];
            let sue = geom.sues[i].pos;
            NulledSca {
                id: i,
                gain_bs: pl.gain(sca.pos.norm()),
                gain_access: pl.gain(sue.dist(sca.pos)),
                cross: positions.iter().map(|p| pl.gain(p.dist(sue))).collect(),
                gamma_s,
                azimuth: sca.pos.azimuth(),
            }
        })
        .collect();
    let layout = LinkLayout {
        n_antennas: cfg.n_antennas,
        noise_w: cfg.noise_w(),
        served: served_set,
        nulled,
    };
    layout.validate()?;
    Ok(layout)
}

/// Class-average powers of one drop, or of an average over drops.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerSummary {
    pub p_mue_ul: f64,
    pub p_sca_ul: f64,
    pub p_sue_ul: f64,
    pub p_bs_dl: f64,
    pub p_sca_dl: f64,
    pub ul_total: f64,
    pub dl_total: f64,
    /// Mean `I_s/σ²` over protected SUEs.
    pub sue_inr: f64,
}

impl PowerSummary {
    /// Every entry infinite, which is how an unmet target is reported.
    pub fn unreachable() -> Self {
        let inf = f64::INFINITY;
        Self {
            p_mue_ul: inf,
            p_sca_ul: inf,
            p_sue_ul: inf,
            p_bs_dl: inf,
            p_sca_dl: inf,
            ul_total: inf,
            dl_total: inf,
            sue_inr: inf,
        }
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Per-class powers and totals for one drop. Classes absent from the
/// architecture are NaN and contribute nothing to the totals.
pub fn power_accounting(layout: &LinkLayout, ul: &UlSolution, dl: &DlSolution) -> PowerSummary {
    let of = |kind: DeviceKind| {
        layout
            .served
            .iter()
            .zip(&ul.powers)
            .filter(move |(d, _)| d.kind == kind)
            .map(|(_, p)| *p)
    };
    let sigma2 = layout.noise_w;
    // SUEs of protected SCAs transmit while the BS is in DL; the BS nulls
    // them out, so their links are noise limited
    let sue_ul_protected: Vec<f64> = layout
        .nulled
        .iter()
        .map(|s| s.gamma_s * sigma2 / s.gain_access)
        .collect();
    let bs_sue: Vec<f64> = of(DeviceKind::Sue).collect();
    let p_sue_ul = if !bs_sue.is_empty() {
        mean(bs_sue.iter().copied())
    } else {
        mean(sue_ul_protected.iter().copied())
    };
    let ul_total = ul.powers.iter().sum::<f64>() + sue_ul_protected.iter().sum::<f64>();
    let dl_total = dl.total_power + ul.sca_dl_powers.iter().sum::<f64>();
    PowerSummary {
        p_mue_ul: mean(of(DeviceKind::Mue)),
        p_sca_ul: mean(of(DeviceKind::Sca)),
        p_sue_ul,
        p_bs_dl: dl.total_power,
        p_sca_dl: mean(ul.sca_dl_powers.iter().copied()),
        ul_total,
        dl_total,
        sue_inr: mean(ul.sue_interference.iter().map(|i| i / sigma2)),
    }
}

/// Area throughput in Gbit/s/km² of the devices a layout serves in one band.
pub fn area_throughput_gbps_km2(layout: &LinkLayout, cfg: &ScenarioConfig) -> f64 {
    let rate: f64 = layout
        .served
        .iter()
        .map(|d| match d.kind {
            DeviceKind::Mue => cfg.mue_rate_bps_hz,
            DeviceKind::Sue => cfg.sue_rate_bps_hz,
            // backhaul carries traffic that is counted at the SUEs
            DeviceKind::Sca => 0.0,
        })
        .sum::<f64>()
        + layout.s() as f64 * cfg.sue_rate_bps_hz;
    rate * cfg.bandwidth_hz / cfg.cell_area_km2() * 1e-9
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rate_bps_hz: f64,
    pub arch: Architecture,
    pub scheme: Scheme,
    pub tau_sq: f64,
    pub feasible: bool,
    pub powers: PowerSummary,
    /// Mean `|SINR/γ − 1|` over UL and DL Monte-Carlo samples (NaN without trials).
    pub mc_sinr_relerr: f64,
    /// Mean radiated BS power measured by Monte Carlo (NaN without trials).
    pub mc_bs_dl_w: f64,
    pub mc_max_nulling_residual: f64,
    pub area_tput_gbps_km2: f64,
}

pub const SWEEP_HEADER: &str = "rate_bps_hz,arch,scheme,tau_sq,feasible,p_mue_ul_w,p_sca_ul_w,p_sue_ul_w,p_bs_dl_w,p_sca_dl_w,mc_sinr_relerr,area_tput_gbps_km2";

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.6e}")
    }
}

/// Serializes rows under [`SWEEP_HEADER`]. Absent classes are left empty.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let p = &r.powers;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.rate_bps_hz,
            r.arch.label(),
            r.scheme.label(),
            r.tau_sq,
            r.feasible,
            num(p.p_mue_ul),
            num(p.p_sca_ul),
            num(p.p_sue_ul),
            num(p.p_bs_dl),
            num(p.p_sca_dl),
            num(r.mc_sinr_relerr),
            num(r.area_tput_gbps_km2)
        );
    }
    out
}

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub arch: Architecture,
    pub scheme: Scheme,
    pub tau_sq: f64,
    /// Monte-Carlo trials per point; zero skips simulation.
    pub trials: usize,
    /// User drops the analytic powers are averaged over. With trials, one
    /// drop is used per `geometry_redraw_every` trials.
    pub drops: usize,
    pub seed: u64,
}

impl SweepOptions {
    fn drop_count(&self, cfg: &ScenarioConfig) -> usize {
        if self.trials > 0 {
            self.trials.div_ceil(cfg.geometry_redraw_every)
        } else {
            self.drops.max(1)
        }
    }
}

/// Solves and simulates one rate point.
pub fn evaluate_point(cfg: &ScenarioConfig, opts: &SweepOptions) -> Result<SweepRow> {
    let drops = opts.drop_count(cfg);
    let mut sums = PowerSummary::default();
    let mut feasible = true;
    let mut acc = Accumulator::default();
    let mut tput = 0.0;
    let mut mc_power = 0.0;
    for d in 0..drops {
        let geom = build_network_indexed(cfg, opts.seed, d as u64)?;
        let layout = build_architecture(opts.arch, cfg, &geom, opts.tau_sq)?;
        tput = area_throughput_gbps_km2(&layout, cfg);
        let ul = solve_ul_fixed_point(&layout, UlOptions::default())?;
        let dl = solve_dl(&DlTargets::from_layout(&layout)?, opts.scheme)?;
        if !ul.feasible || !dl.feasible {
            feasible = false;
            break;
        }
        let p = power_accounting(&layout, &ul, &dl);
        for (acc_v, v) in [
            (&mut sums.p_mue_ul, p.p_mue_ul),
            (&mut sums.p_sca_ul, p.p_sca_ul),
            (&mut sums.p_sue_ul, p.p_sue_ul),
            (&mut sums.p_bs_dl, p.p_bs_dl),
            (&mut sums.p_sca_dl, p.p_sca_dl),
            (&mut sums.ul_total, p.ul_total),
            (&mut sums.dl_total, p.dl_total),
            (&mut sums.sue_inr, p.sue_inr),
        ] {
            *acc_v += v;
        }
        if opts.trials > 0 {
            let first = (d * cfg.geometry_redraw_every) as u64;
            let count = cfg.geometry_redraw_every.min(opts.trials - d * cfg.geometry_redraw_every);
            let roots = if cfg.correlated {
                Some(CorrelationRoots::for_layout(&layout, cfg.angular_spread_rad, opts.seed, d as u64)?)
            } else {
                None
            };
            let results = run_trials(&layout, Some(&ul), Some(&dl), roots.as_ref(), opts.seed, first, count)?;
            for r in &results {
                acc.push(&layout, r);
                mc_power += r.dl_power;
            }
        }
    }
    let scale = 1.0 / drops as f64;
    let powers = if feasible {
        PowerSummary {
            p_mue_ul: sums.p_mue_ul * scale,
            p_sca_ul: sums.p_sca_ul * scale,
            p_sue_ul: sums.p_sue_ul * scale,
            p_bs_dl: sums.p_bs_dl * scale,
            p_sca_dl: sums.p_sca_dl * scale,
            ul_total: sums.ul_total * scale,
            dl_total: sums.dl_total * scale,
            sue_inr: sums.sue_inr * scale,
        }
    } else {
        PowerSummary::unreachable()
    };
    let simulated = feasible && opts.trials > 0;
    let stats = acc.finish(opts.seed);
    Ok(SweepRow {
        rate_bps_hz: cfg.mue_rate_bps_hz,
        arch: opts.arch,
        scheme: opts.scheme,
        tau_sq: opts.tau_sq,
        feasible,
        powers: blank_absent(opts.arch, powers),
        mc_sinr_relerr: if simulated { acc.combined_rel_err() } else { f64::NAN },
        mc_bs_dl_w: if simulated { mc_power / opts.trials as f64 } else { f64::NAN },
        mc_max_nulling_residual: if simulated { stats.max_nulling_residual } else { f64::NAN },
        area_tput_gbps_km2: tput,
    })
}

fn blank_absent(arch: Architecture, mut p: PowerSummary) -> PowerSummary {
    match arch {
        Architecture::HetnetWireless => {}
        Architecture::HetnetWired => p.p_sca_ul = f64::NAN,
        Architecture::MassiveMimo => {
            p.p_sca_ul = f64::NAN;
            p.p_sca_dl = f64::NAN;
            p.sue_inr = f64::NAN;
        }
    }
    p
}

/// Evaluates every rate in `rates`. Per-point failures become infeasible rows.
pub fn rate_sweep(cfg: &ScenarioConfig, rates: &[f64], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(rates.len());
    for &rate in rates {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "rates",
                reason: format!("rate {rate} must be positive"),
            });
        }
        let point_cfg = ScenarioConfig {
            mue_rate_bps_hz: rate,
            ..cfg.clone()
        };
        match evaluate_point(&point_cfg, opts) {
            Ok(row) => rows.push(row),
            Err(e @ (Error::NotConverged { .. } | Error::Singular(_))) => {
                log::warn!("rate {rate}: {e}");
                rows.push(SweepRow {
                    rate_bps_hz: rate,
                    arch: opts.arch,
                    scheme: opts.scheme,
                    tau_sq: opts.tau_sq,
                    feasible: false,
                    powers: blank_absent(opts.arch, PowerSummary::unreachable()),
                    mc_sinr_relerr: f64::NAN,
                    mc_bs_dl_w: f64::NAN,
                    mc_max_nulling_residual: f64::NAN,
                    area_tput_gbps_km2: f64::NAN,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

fn check_tradeoff_args(alpha: f64, p: f64, d: f64) -> Result<()> {
    if !(alpha >= 0.0) || !(p >= 0.0) || !(d > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tradeoff",
            reason: format!("density {alpha}, power {p} must be nonnegative and distance {d} positive"),
        });
    }
    Ok(())
}

/// Mean interference at an SCA from transmitters of density `alpha` (1/m²)
/// and power `p` (W) spread uniformly beyond distance `d` (m), in closed form.
pub fn expected_interference(alpha: f64, p: f64, pl: &PathlossModel, d: f64) -> Result<f64> {
    check_tradeoff_args(alpha, p, d)?;
    if alpha == 0.0 || p == 0.0 {
        return Ok(0.0);
    }
    let beta = pl.exponent;
    let z = -(pl.cutoff_m / d).powf(beta);
    let f = match hyp2f1(1.0, 1.0 - 2.0 / beta, 2.0 - 2.0 / beta, z) {
        Ok(f) => f,
        Err(e) => {
            log::debug!("hypergeometric series failed ({e}); integrating instead");
            return expected_interference_quadrature(alpha, p, pl, d);
        }
    };
    let prefactor = 4.0 * std::f64::consts::PI * alpha * p * pl.ref_gain / (beta - 2.0);
    Ok(prefactor * pl.cutoff_m.powf(beta) / d.powf(beta - 2.0) * f)
}

/// The same mean interference by radial quadrature of `∫_d^∞ p l(r) α 2πr dr`.
pub fn expected_interference_quadrature(alpha: f64, p: f64, pl: &PathlossModel, d: f64) -> Result<f64> {
    check_tradeoff_args(alpha, p, d)?;
    // r = d/u maps [d, ∞) onto (0, 1]
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = d / u;
        pl.gain(r) * r * d / (u * u)
    };
    let radial = quad::integrate(integrand, 0.0, 1.0, 0.0, 1e-13)?;
    Ok(2.0 * std::f64::consts::PI * alpha * p * radial)
}

/// Far-field form valid for `d ≫ x̄`.
pub fn expected_interference_far_field(alpha: f64, p: f64, pl: &PathlossModel, d: f64) -> f64 {
    let beta = pl.exponent;
    4.0 * std::f64::consts::PI * alpha * p * pl.ref_gain * pl.cutoff_m.powf(beta) / ((beta - 2.0) * d.powf(beta - 2.0))
}
