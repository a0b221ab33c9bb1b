//! Asymptotic uplink power control under an MMSE receiver with imperfect CSI.
//!
//! The deterministic equivalent of the MMSE SINR is governed by two scalars
//! `ξ` and `δ`. Imposing `SINR_k = γ_k` for every served device gives the
//! powers `p_k = γ_k / (ξ δ l_k (1 − τ_k²))`, while the SCAs of `S_B`, which
//! transmit to their SUEs at the same time, must overcome the interference
//! those powers create. Both directions are solved jointly.

use crate::error::{Error, Result};
use crate::layout::{DeviceKind, LinkLayout};

/// Iteration controls for [`solve_ul_fixed_point`].
#[derive(Debug, Clone, Copy)]
pub struct UlOptions {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for UlOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 200_000,
        }
    }
}

/// Powers above this are treated as divergence.
pub const POWER_CEILING_W: f64 = 1e6;
const DELTA_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct UlSolution {
    pub xi: f64,
    pub delta: f64,
    /// UL power of each served device (Watt).
    pub powers: Vec<f64>,
    /// DL power of each nulled SCA toward its SUE (Watt).
    pub sca_dl_powers: Vec<f64>,
    /// Deterministic interference at each nulled SCA's SUE (Watt).
    pub sue_interference: Vec<f64>,
    pub feasible: bool,
    pub iterations: usize,
    /// Relative residuals of the two fixed-point equations at the returned point.
    pub residuals: (f64, f64),
    pub tau_max: f64,
}

/// Outcome of the a-priori feasibility test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Largest uniform MUE CSI error `τ` (not squared) that keeps the targets reachable.
    pub tau_max: f64,
}

/// `(1/K) Σ_{k∈M_R} γ_k`, normalized by the whole served count.
pub fn mean_mue_gamma(layout: &LinkLayout) -> f64 {
    if layout.k() == 0 {
        return 0.0;
    }
    layout.served_of(DeviceKind::Mue).map(|(_, d)| d.gamma).sum::<f64>() / layout.k() as f64
}

/// Uniform-τ bound `(1 + γ̄ᴹ c / (1 − c − c_S))^{-1/2}`, shared by the MMSE
/// uplink and the ZF downlink.
pub fn tau_max_linear(mean_mue_gamma: f64, c: f64, c_s: f64) -> f64 {
    (1.0 + mean_mue_gamma * c / (1.0 - c - c_s)).powf(-0.5)
}

/// Checks `(1/N) Σ γ_k τ_k²/(1 − τ_k²) < 1 − c − c_S`.
pub fn ul_feasibility(layout: &LinkLayout) -> Feasibility {
    let n = layout.n_antennas as f64;
    let lhs: f64 = layout
        .served
        .iter()
        .map(|d| d.gamma * d.tau_sq / (1.0 - d.tau_sq))
        .sum::<f64>()
        / n;
    let slack = 1.0 - layout.c() - layout.c_s();
    Feasibility {
        feasible: lhs < slack,
        tau_max: tau_max_linear(mean_mue_gamma(layout), layout.c(), layout.c_s()),
    }
}

/// Deterministic interference `Σ_k p_k l_{s,k}` at one SUE.
pub fn sue_interference(powers: &[f64], cross_gains: &[f64]) -> f64 {
    powers.iter().zip(cross_gains).map(|(p, g)| p * g).sum()
}

/// DL power SCA `s` needs so that its SUE sees mean SINR `γ_s` over the
/// interference generated by the served devices at the point `(ξ, δ)`.
pub fn sca_dl_power(layout: &LinkLayout, s: usize, xi: f64, delta: f64) -> f64 {
    let sca = &layout.nulled[s];
    let weighted: f64 = layout
        .served
        .iter()
        .zip(&sca.cross)
        .map(|(d, g)| d.gamma / (1.0 - d.tau_sq) * g / d.gain)
        .sum();
    sca.gamma_s / sca.gain_access * (layout.noise_w + weighted / (xi * delta))
}

/// Per-device UL power at the point `(ξ, δ)`.
pub fn ul_power(gamma: f64, tau_sq: f64, gain: f64, xi: f64, delta: f64) -> f64 {
    gamma / (xi * delta * gain * (1.0 - tau_sq))
}

/// Right-hand sides of the `ξ` and `δ` equations for given SCA DL powers.
fn fixed_point_map(layout: &LinkLayout, sca_dl: &[f64], xi: f64, delta: f64) -> (f64, f64) {
    let n = layout.n_antennas as f64;
    let sigma2 = layout.noise_w;
    let mut load = 0.0;
    let mut num_served = 0.0;
    let mut den_error = 0.0;
    let mut den_served = 0.0;
    for d in &layout.served {
        let one_minus = 1.0 - d.tau_sq;
        let den = delta * one_minus + d.gamma;
        load += d.gamma / den;
        num_served += d.gamma * delta * one_minus / (den * den);
        den_error += d.gamma / delta * d.tau_sq / one_minus;
        den_served += d.gamma * delta * one_minus * one_minus / (den * den);
    }
    let mut sb_load = 0.0;
    let mut sb_sq = 0.0;
    for (sca, q) in layout.nulled.iter().zip(sca_dl) {
        let b = q * sca.gain_bs * xi;
        sb_load += b / (1.0 + b);
        sb_sq += b / ((1.0 + b) * (1.0 + b));
    }
    let xi_new = (1.0 - load / n - sb_load / n) / sigma2;
    let tail = sb_sq / n + xi * sigma2;
    let delta_new = (num_served / n + tail) / (den_error / n + den_served / n + tail);
    (xi_new, delta_new)
}

/// Solves the coupled UL fixed point and derives every UL and SCA DL power.
///
/// An infeasible target set is not an error: the solution comes back with
/// `feasible == false` and the powers of the last iterate. Failure to settle
/// on a feasible problem is reported as [`Error::NotConverged`].
pub fn solve_ul_fixed_point(layout: &LinkLayout, opts: UlOptions) -> Result<UlSolution> {
    layout.validate()?;
    let prior = ul_feasibility(layout);
    let sigma2 = layout.noise_w;
    let mut xi = 1.0 / sigma2;
    let mut delta = 1.0;
    let s_count = layout.s();
    let mut sca_dl = vec![0.0; s_count];
    let mut iterations = 0;
    let mut converged = false;
    let mut diverged = !prior.feasible;

    if !diverged {
        while iterations < opts.max_iterations {
            iterations += 1;
            for (s, q) in sca_dl.iter_mut().enumerate() {
                *q = sca_dl_power(layout, s, xi, delta);
            }
            let (xi_map, delta_map) = fixed_point_map(layout, &sca_dl, xi, delta);
            let xi_next = opts.damping * xi + (1.0 - opts.damping) * xi_map;
            let delta_next = opts.damping * delta + (1.0 - opts.damping) * delta_map;
            let change = ((xi_next - xi) / xi).abs().max(((delta_next - delta) / delta).abs());
            xi = xi_next;
            delta = delta_next;
            if !(delta > DELTA_FLOOR) || !(xi > 0.0) || !xi.is_finite() {
                diverged = true;
                break;
            }
            let worst = layout
                .served
                .iter()
                .map(|d| ul_power(d.gamma, d.tau_sq, d.gain, xi, delta))
                .fold(0.0, f64::max);
            if worst > POWER_CEILING_W {
                diverged = true;
                break;
            }
            if change < opts.tolerance {
                converged = true;
                break;
            }
        }
    }

    for (s, q) in sca_dl.iter_mut().enumerate() {
        *q = sca_dl_power(layout, s, xi, delta);
    }
    let (xi_map, delta_map) = fixed_point_map(layout, &sca_dl, xi, delta);
    let residuals = (((xi_map - xi) / xi).abs(), ((delta_map - delta) / delta).abs());
    let powers: Vec<f64> = layout
        .served
        .iter()
        .map(|d| ul_power(d.gamma, d.tau_sq, d.gain, xi, delta))
        .collect();
    let sue_int = layout
        .nulled
        .iter()
        .map(|sca| sue_interference(&powers, &sca.cross))
        .collect();

    if !diverged && !converged {
        return Err(Error::NotConverged {
            iterations,
            residual: residuals.0.max(residuals.1),
        });
    }
    if diverged {
        log::debug!("uplink targets infeasible after {iterations} iterations (δ = {delta:e})");
    }
    Ok(UlSolution {
        xi,
        delta,
        powers,
        sca_dl_powers: sca_dl,
        sue_interference: sue_int,
        feasible: !diverged,
        iterations,
        residuals,
        tau_max: prior.tau_max,
    })
}
