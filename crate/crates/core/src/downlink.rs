//! Asymptotic downlink powers of concatenated (null-space projected) RZF and
//! ZF precoding, their feasibility walls, and the space-time coded fallback.

use crate::error::{Error, Result};
use crate::layout::{DeviceKind, LinkLayout};
use crate::uplink::{tau_max_linear, Feasibility};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Rzf,
    Zf,
    Stc,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Rzf => "rzf",
            Scheme::Zf => "zf",
            Scheme::Stc => "stc",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rzf" => Ok(Scheme::Rzf),
            "zf" => Ok(Scheme::Zf),
            "stc" => Ok(Scheme::Stc),
            other => Err(Error::InvalidParameter {
                name: "scheme",
                reason: format!("`{other}` is not one of rzf, zf, stc"),
            }),
        }
    }
}

/// Per-device targets and the aggregates the closed forms depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct DlTargets {
    pub gammas: Vec<f64>,
    pub tau_sq: Vec<f64>,
    pub gains: Vec<f64>,
    pub is_mue: Vec<bool>,
    pub c: f64,
    pub c_s: f64,
    pub noise_w: f64,
    /// `(1/K) Σ γ_k / ((1 − τ_k²) l_k)`
    pub a: f64,
    /// `(1/K) Σ_{MUE} γ_k τ_k² / (1 − τ_k²)`
    pub b: f64,
    /// `(1/K) Σ γ_k`
    pub gamma_bar: f64,
    /// `(1/K) Σ_{MUE} γ_k`
    pub gamma_bar_mue: f64,
}

impl DlTargets {
    pub fn new(
        gammas: Vec<f64>,
        tau_sq: Vec<f64>,
        gains: Vec<f64>,
        is_mue: Vec<bool>,
        c: f64,
        c_s: f64,
        noise_w: f64,
    ) -> Result<Self> {
        let k = gammas.len();
        if tau_sq.len() != k || gains.len() != k || is_mue.len() != k {
            return Err(Error::Shape("target vectors differ in length".into()));
        }
        if k == 0 {
            return Err(Error::InvalidParameter {
                name: "targets",
                reason: "no served devices".into(),
            });
        }
        if let Some(&t) = tau_sq.iter().find(|t| !(**t >= 0.0 && **t < 1.0)) {
            return Err(Error::TauOutOfRange { tau_sq: t });
        }
        if c + c_s >= 1.0 {
            return Err(Error::Overloaded { load: c + c_s });
        }
        let kf = k as f64;
        let mut a = 0.0;
        let mut b = 0.0;
        let mut gamma_bar = 0.0;
        let mut gamma_bar_mue = 0.0;
        for i in 0..k {
            a += gammas[i] / ((1.0 - tau_sq[i]) * gains[i]);
            gamma_bar += gammas[i];
            if is_mue[i] {
                b += gammas[i] * tau_sq[i] / (1.0 - tau_sq[i]);
                gamma_bar_mue += gammas[i];
            }
        }
        Ok(Self {
            gammas,
            tau_sq,
            gains,
            is_mue,
            c,
            c_s,
            noise_w,
            a: a / kf,
            b: b / kf,
            gamma_bar: gamma_bar / kf,
            gamma_bar_mue: gamma_bar_mue / kf,
        })
    }

    pub fn from_layout(layout: &LinkLayout) -> Result<Self> {
        let s = &layout.served;
        Self::new(
            s.iter().map(|d| d.gamma).collect(),
            s.iter().map(|d| d.tau_sq).collect(),
            s.iter().map(|d| d.gain).collect(),
            s.iter().map(|d| d.kind == DeviceKind::Mue).collect(),
            layout.c(),
            layout.c_s(),
            layout.noise_w,
        )
    }

    pub fn k(&self) -> usize {
        self.gammas.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DlSolution {
    pub scheme: Scheme,
    /// Regularizer (RZF only, NaN otherwise).
    pub rho: f64,
    pub mu: f64,
    /// Total BS transmit power (Watt); infinite when infeasible.
    pub total_power: f64,
    pub powers: Vec<f64>,
    pub feasible: bool,
    pub tau_max: f64,
}

/// Power-minimizing RZF regularizer `(1 − c_S)/γ̄ − c/(1 + γ̄)`.
///
/// A nonpositive value means no positive regularizer meets the targets.
pub fn optimal_rho(gamma_bar: f64, c: f64, c_s: f64) -> Result<f64> {
    if !(gamma_bar > 0.0) {
        return Err(Error::Domain {
            function: "optimal_rho",
            arg: gamma_bar,
        });
    }
    Ok((1.0 - c_s) / gamma_bar - c / (1.0 + gamma_bar))
}

/// Positive root of `ρμ² + (c + ρ − (1 − c_S))μ − (1 − c_S) = 0`.
pub fn mu_fixed_point(c: f64, c_s: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain {
            function: "mu_fixed_point",
            arg: rho,
        });
    }
    let free = 1.0 - c_s;
    let b = c + rho - free;
    let disc = (b * b + 4.0 * rho * free).sqrt();
    // pick the cancellation-free branch of the quadratic formula
    Ok(if b > 0.0 {
        2.0 * free / (b + disc)
    } else {
        (disc - b) / (2.0 * rho)
    })
}

/// Total RZF power at an arbitrary regularizer, or `None` where the targets
/// cannot be met.
pub fn rzf_total_power_at(t: &DlTargets, rho: f64) -> Result<Option<f64>> {
    let mu = mu_fixed_point(t.c, t.c_s, rho)?;
    let q = (1.0 + mu) * (1.0 + mu);
    let den = mu * (t.c + rho * q) - t.c * t.gamma_bar - t.c * q * t.b;
    Ok((den > 0.0).then(|| t.c * t.noise_w * q * t.a / den))
}

/// Per-device RZF weights for fixed-point value `mu` and total power `total`.
pub fn rzf_device_powers(t: &DlTargets, mu: f64, total: f64) -> Vec<f64> {
    let q = (1.0 + mu) * (1.0 + mu);
    (0..t.k())
        .map(|k| {
            let (g, tau2, l) = (t.gammas[k], t.tau_sq[k], t.gains[k]);
            g / (l * mu * mu) * (total * (1.0 - tau2 + tau2 * q) + t.noise_w * q / l) / (1.0 - tau2)
        })
        .collect()
}

/// Total power implied by per-device weights through the derivative of the
/// fixed point: `−c μ' / (1 + μ)² · (1/K) Σ p_k l_k`.
pub fn rzf_power_from_weights(t: &DlTargets, rho: f64, powers: &[f64]) -> Result<f64> {
    let mu = mu_fixed_point(t.c, t.c_s, rho)?;
    let q = (1.0 + mu) * (1.0 + mu);
    let mu_prime = -mu * q / (t.c + rho * q);
    let mean: f64 = powers.iter().zip(&t.gains).map(|(p, l)| p * l).sum::<f64>() / t.k() as f64;
    Ok(-t.c * mu_prime / q * mean)
}

fn infeasible(scheme: Scheme, k: usize, tau_max: f64, rho: f64, mu: f64) -> DlSolution {
    DlSolution {
        scheme,
        rho,
        mu,
        total_power: f64::INFINITY,
        powers: vec![f64::INFINITY; k],
        feasible: false,
        tau_max,
    }
}

/// RZF at the optimal regularizer.
pub fn rzf_asymptotic(t: &DlTargets) -> Result<DlSolution> {
    let f = dl_feasibility(t, Scheme::Rzf)?;
    let rho = optimal_rho(t.gamma_bar, t.c, t.c_s)?;
    if !f.feasible {
        return Ok(infeasible(Scheme::Rzf, t.k(), f.tau_max, rho, t.gamma_bar));
    }
    let mu = mu_fixed_point(t.c, t.c_s, rho)?;
    let total = t.c * t.noise_w * t.a / (rho * t.gamma_bar - t.c * t.b);
    let powers = rzf_device_powers(t, mu, total);
    let check = rzf_power_from_weights(t, rho, &powers)?;
    if (check / total - 1.0).abs() > 1e-8 {
        log::warn!("RZF weight/total mismatch: {check:e} vs {total:e}");
    }
    Ok(DlSolution {
        scheme: Scheme::Rzf,
        rho,
        mu,
        total_power: total,
        powers,
        feasible: true,
        tau_max: f.tau_max,
    })
}

/// ZF total power and per-device weights.
pub fn zf_asymptotic(t: &DlTargets) -> Result<DlSolution> {
    let f = dl_feasibility(t, Scheme::Zf)?;
    if !f.feasible {
        return Ok(infeasible(Scheme::Zf, t.k(), f.tau_max, f64::NAN, f64::INFINITY));
    }
    let total = t.c * t.noise_w * t.a / (1.0 - t.c_s - t.c * (t.b + 1.0));
    let powers = (0..t.k())
        .map(|k| t.gammas[k] * (t.noise_w + t.tau_sq[k] * t.gains[k] * total) / (1.0 - t.tau_sq[k]))
        .collect();
    Ok(DlSolution {
        scheme: Scheme::Zf,
        rho: f64::NAN,
        mu: f64::INFINITY,
        total_power: total,
        powers,
        feasible: true,
        tau_max: f.tau_max,
    })
}

/// Every device served one at a time by isotropic signalling inside the
/// null space: `p_k = γ_k σ² / ((1 − c_S) l_k)`; the total is their sum.
pub fn stc_asymptotic(t: &DlTargets) -> Result<DlSolution> {
    let powers: Vec<f64> = (0..t.k())
        .map(|k| stc_power(t.gammas[k], t.gains[k], t.c_s, t.noise_w))
        .collect::<Result<_>>()?;
    Ok(DlSolution {
        scheme: Scheme::Stc,
        rho: f64::NAN,
        mu: f64::NAN,
        total_power: powers.iter().sum(),
        powers,
        feasible: true,
        tau_max: 1.0,
    })
}

pub fn solve_dl(t: &DlTargets, scheme: Scheme) -> Result<DlSolution> {
    match scheme {
        Scheme::Rzf => rzf_asymptotic(t),
        Scheme::Zf => zf_asymptotic(t),
        Scheme::Stc => stc_asymptotic(t),
    }
}

/// Feasibility of the targets under `scheme`, with the uniform-τ bound.
pub fn dl_feasibility(t: &DlTargets, scheme: Scheme) -> Result<Feasibility> {
    Ok(match scheme {
        Scheme::Rzf => {
            if t.gamma_bar == 0.0 {
                return Ok(Feasibility {
                    feasible: true,
                    tau_max: 1.0,
                });
            }
            let rho = optimal_rho(t.gamma_bar, t.c, t.c_s)?;
            let tau_max = if rho > 0.0 {
                (1.0 + t.c / rho * t.gamma_bar_mue / t.gamma_bar).powf(-0.5)
            } else {
                0.0
            };
            Feasibility {
                feasible: rho > 0.0 && rho * t.gamma_bar - t.c * t.b > 0.0,
                tau_max,
            }
        }
        Scheme::Zf => Feasibility {
            feasible: 1.0 - t.c_s - t.c * (t.b + 1.0) > 0.0,
            tau_max: tau_max_linear(t.gamma_bar_mue, t.c, t.c_s),
        },
        Scheme::Stc => Feasibility {
            feasible: t.c_s < 1.0,
            tau_max: 1.0,
        },
    })
}

/// STC power of one device.
pub fn stc_power(gamma: f64, gain: f64, c_s: f64, noise_w: f64) -> Result<f64> {
    if !(c_s < 1.0) {
        return Err(Error::Overloaded { load: c_s });
    }
    Ok(gamma * noise_w / ((1.0 - c_s) * gain))
}

/// Inputs of the two-phase downlink slot: linearly precoded devices first,
/// then high-mobility MUEs one at a time with STC.
#[derive(Debug, Clone)]
pub struct StcSplit<'a> {
    /// Precoded set, with its aggregates.
    pub precoded: &'a DlTargets,
    /// SINR targets and gains of the STC users.
    pub stc_gammas: &'a [f64],
    pub stc_gains: &'a [f64],
    pub t_lp: f64,
    pub t_stc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StcSchedule {
    /// Average spectral efficiency over the slot (bit/s/Hz).
    pub r_avg: f64,
    /// Energy over the slot (Joule when the times are seconds).
    pub energy: f64,
}

/// Average rate and energy of the split slot, with ZF for the precoded phase.
pub fn stc_schedule(split: &StcSplit<'_>) -> Result<StcSchedule> {
    let t = split.precoded;
    let total_time = split.t_lp + split.t_stc;
    if !(total_time > 0.0) || split.t_lp < 0.0 || split.t_stc < 0.0 {
        return Err(Error::InvalidParameter {
            name: "stc_time_ratio",
            reason: "slot durations must be nonnegative with a positive sum".into(),
        });
    }
    if split.stc_gammas.len() != split.stc_gains.len() {
        return Err(Error::Shape("STC targets and gains differ in length".into()));
    }
    let k_stc = split.stc_gammas.len();
    let lp_rate: f64 = t.gammas.iter().map(|g| (1.0 + g).log2()).sum();
    let stc_rate: f64 = split.stc_gammas.iter().map(|g| (1.0 + g).log2()).sum();
    let mut r_avg = split.t_lp / total_time * lp_rate;
    if k_stc > 0 {
        r_avg += split.t_stc / (total_time * k_stc as f64) * stc_rate;
    }
    let zf = zf_asymptotic(t)?;
    let lp_energy = if split.t_lp == 0.0 { 0.0 } else { zf.total_power * split.t_lp };
    let stc_energy: f64 = split
        .stc_gammas
        .iter()
        .zip(split.stc_gains)
        .map(|(g, l)| stc_power(*g, *l, t.c_s, t.noise_w))
        .sum::<Result<f64>>()?;
    Ok(StcSchedule {
        r_avg,
        energy: lp_energy + split.t_stc * stc_energy,
    })
}
