//! Finite-N validation: apply the asymptotic powers to random channel draws
//! and measure what the receivers and precoders actually achieve.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::channel::{draw_channels, CMatrix, ChannelSet, Complex64, CorrelationRoots};
use crate::downlink::{DlSolution, Scheme};
use crate::error::{Error, Result};
use crate::layout::LinkLayout;
use crate::precoding::{instantaneous_dl_sinr, nulling_residual, projector, rzf_precoder, zf_precoder};
use crate::uplink::UlSolution;

/// MMSE combiner `(Σ p_i ĥ_i ĥ_i† + Σ q_s h_s h_s† + Nσ² I)⁻¹ Ĥ`.
pub fn mmse_receiver(
    h_hat: &CMatrix,
    h_nulled: &CMatrix,
    powers: &[f64],
    sca_dl: &[f64],
    noise_w: f64,
) -> Result<CMatrix> {
    let n = h_hat.nrows();
    if powers.len() != h_hat.ncols() || sca_dl.len() != h_nulled.ncols() {
        return Err(Error::Shape("power vectors do not match channel columns".into()));
    }
    // work in units of σ² to keep the matrix entries near one
    let mut scaled = h_hat.clone();
    for (j, p) in powers.iter().enumerate() {
        scaled.column_mut(j).scale_mut((p / noise_w).sqrt());
    }
    let mut cov = &scaled * scaled.adjoint();
    if !sca_dl.is_empty() {
        let mut hs = h_nulled.clone();
        for (j, q) in sca_dl.iter().enumerate() {
            hs.column_mut(j).scale_mut((q / noise_w).sqrt());
        }
        cov += &hs * hs.adjoint();
    }
    for i in 0..n {
        cov[(i, i)] += Complex64::from(n as f64);
    }
    let g = cov
        .cholesky()
        .ok_or(Error::Singular("MMSE covariance"))?
        .solve(h_hat);
    Ok(g / Complex64::from(noise_w))
}

/// Uplink SINR of every served device under combiner `g` and true channels.
pub fn ul_sinr(
    g: &CMatrix,
    h: &CMatrix,
    h_nulled: &CMatrix,
    powers: &[f64],
    sca_dl: &[f64],
    noise_w: f64,
) -> Vec<f64> {
    let n = h.nrows() as f64;
    let gh = g.adjoint() * h;
    let gs = g.adjoint() * h_nulled;
    (0..h.ncols())
        .map(|k| {
            let mut den = n * noise_w * g.column(k).norm_squared();
            for i in 0..h.ncols() {
                if i != k {
                    den += powers[i] * gh[(k, i)].norm_sqr();
                }
            }
            for (s, q) in sca_dl.iter().enumerate() {
                den += q * gs[(k, s)].norm_sqr();
            }
            powers[k] * gh[(k, k)].norm_sqr() / den
        })
        .collect()
}

/// SINR and realized interference at each protected SCA's SUE.
pub fn sue_sinr(ch: &ChannelSet, powers: &[f64], sca_dl: &[f64], noise_w: f64) -> (Vec<f64>, Vec<f64>) {
    let mut sinr = Vec::with_capacity(sca_dl.len());
    let mut interference = Vec::with_capacity(sca_dl.len());
    for (s, q) in sca_dl.iter().enumerate() {
        let i: f64 = (0..powers.len()).map(|k| powers[k] * ch.cross[(s, k)].norm_sqr()).sum();
        sinr.push(q * ch.access[s].norm_sqr() / (noise_w + i));
        interference.push(i);
    }
    (sinr, interference)
}

/// Everything measured on one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub index: u64,
    pub ul_sinr: Vec<f64>,
    pub dl_sinr: Vec<f64>,
    /// Radiated DL power `Σ p_k ‖v_k‖²`.
    pub dl_power: f64,
    pub nulling_residual: f64,
    pub sue_sinr: Vec<f64>,
    pub sue_interference: Vec<f64>,
}

/// Order-fixed summary of a batch of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    pub trials: usize,
    pub seed: u64,
    /// Mean of `|SINR/γ − 1|` over UL devices and trials.
    pub ul_rel_err: f64,
    /// Mean and standard deviation of `SINR/γ` in the UL.
    pub ul_ratio_mean: f64,
    pub ul_ratio_std: f64,
    /// Mean over devices of `|E[SINR_k]/γ_k − 1|`, the expectation taken
    /// over the trials of one drop (NaN when the batch spans several drops).
    pub ul_device_err: f64,
    pub dl_rel_err: f64,
    pub dl_device_err: f64,
    pub dl_ratio_mean: f64,
    pub dl_ratio_std: f64,
    pub dl_power_mean: f64,
    pub max_nulling_residual: f64,
    /// Mean of `log₂(1 + SINR)` over SUEs and trials (bit/s/Hz).
    pub sue_rate_mean: f64,
    pub sue_interference_mean: f64,
}

/// Running sums that are folded in trial order.
#[derive(Debug, Clone, Default)]
pub struct Accumulator {
    trials: usize,
    ul: RatioSums,
    dl: RatioSums,
    dl_power: f64,
    max_null: f64,
    sue_rate: f64,
    sue_int: f64,
    sue_count: usize,
}

#[derive(Debug, Clone, Default)]
struct RatioSums {
    count: usize,
    abs_err: f64,
    sum: f64,
    sum_sq: f64,
}

impl RatioSums {
    fn push(&mut self, sinr: &[f64], gammas: &[f64]) {
        for (s, g) in sinr.iter().zip(gammas) {
            if *g > 0.0 {
                let r = s / g;
                self.count += 1;
                self.abs_err += (r - 1.0).abs();
                self.sum += r;
                self.sum_sq += r * r;
            }
        }
    }

    fn mean_err(&self) -> f64 {
        self.abs_err / self.count.max(1) as f64
    }

    fn mean(&self) -> f64 {
        self.sum / self.count.max(1) as f64
    }

    fn std(&self) -> f64 {
        let n = self.count.max(1) as f64;
        let m = self.mean();
        (self.sum_sq / n - m * m).max(0.0).sqrt()
    }
}

impl Accumulator {
    pub fn push(&mut self, layout: &LinkLayout, t: &TrialResult) {
        let gammas: Vec<f64> = layout.served.iter().map(|d| d.gamma).collect();
        self.trials += 1;
        self.ul.push(&t.ul_sinr, &gammas);
        self.dl.push(&t.dl_sinr, &gammas);
        self.dl_power += t.dl_power;
        self.max_null = self.max_null.max(t.nulling_residual);
        for (s, i) in t.sue_sinr.iter().zip(&t.sue_interference) {
            self.sue_rate += (1.0 + s).log2();
            self.sue_int += i;
            self.sue_count += 1;
        }
    }

    pub fn finish(&self, seed: u64) -> AggregateStats {
        let sue = self.sue_count.max(1) as f64;
        AggregateStats {
            trials: self.trials,
            seed,
            ul_rel_err: self.ul.mean_err(),
            ul_ratio_mean: self.ul.mean(),
            ul_ratio_std: self.ul.std(),
            ul_device_err: f64::NAN,
            dl_rel_err: self.dl.mean_err(),
            dl_device_err: f64::NAN,
            dl_ratio_mean: self.dl.mean(),
            dl_ratio_std: self.dl.std(),
            dl_power_mean: self.dl_power / self.trials.max(1) as f64,
            max_nulling_residual: self.max_null,
            sue_rate_mean: self.sue_rate / sue,
            sue_interference_mean: self.sue_int / sue,
        }
    }

    /// Mean `|SINR/γ − 1|` over UL and DL samples together.
    pub fn combined_rel_err(&self) -> f64 {
        let n = self.ul.count + self.dl.count;
        (self.ul.abs_err + self.dl.abs_err) / n.max(1) as f64
    }
}

/// Runs one realization: UL with the MMSE receiver and the given powers,
/// DL with the solution's precoder. Either side may be skipped.
pub fn run_trial(
    layout: &LinkLayout,
    ul: Option<&UlSolution>,
    dl: Option<&DlSolution>,
    correlation: Option<&CorrelationRoots>,
    seed: u64,
    index: u64,
) -> Result<TrialResult> {
    let ch = draw_channels(layout, seed, index, correlation)?;
    let noise = layout.noise_w;
    let mut out = TrialResult {
        index,
        ul_sinr: vec![],
        dl_sinr: vec![],
        dl_power: 0.0,
        nulling_residual: 0.0,
        sue_sinr: vec![],
        sue_interference: vec![],
    };
    if let Some(ul) = ul {
        let g = mmse_receiver(&ch.h_hat, &ch.h_nulled, &ul.powers, &ul.sca_dl_powers, noise)?;
        out.ul_sinr = ul_sinr(&g, &ch.h, &ch.h_nulled, &ul.powers, &ul.sca_dl_powers, noise);
        let (s, i) = sue_sinr(&ch, &ul.powers, &ul.sca_dl_powers, noise);
        out.sue_sinr = s;
        out.sue_interference = i;
    }
    if let Some(dl) = dl {
        let t = projector(&ch.h_nulled)?;
        let n = layout.n_antennas as f64;
        match dl.scheme {
            Scheme::Rzf | Scheme::Zf => {
                let v = if dl.scheme == Scheme::Rzf {
                    let gains: Vec<f64> = layout.served.iter().map(|d| d.gain).collect();
                    rzf_precoder(&ch.h_hat, &gains, &t, dl.rho)?
                } else {
                    zf_precoder(&ch.h_hat, &t)?.0
                };
                let (sinr, power) = instantaneous_dl_sinr(&ch.h, &v, &dl.powers, noise);
                out.dl_sinr = sinr;
                out.dl_power = power;
                out.nulling_residual = nulling_residual(&ch.h_nulled, &v);
            }
            Scheme::Stc => {
                // isotropic signalling inside the null space, one device at a time
                let th = &t * &ch.h;
                out.dl_sinr = (0..layout.k())
                    .map(|k| dl.powers[k] * ch.h.column(k).dotc(&th.column(k)).re / (n * noise))
                    .collect();
                let kept = t.trace().re / n;
                out.dl_power = dl.powers.iter().map(|p| p * kept).sum();
                out.nulling_residual = nulling_residual(&ch.h_nulled, &t);
            }
        }
    }
    Ok(out)
}

/// Runs trials `first .. first + trials` in parallel and returns them in
/// index order, so any reduction over the result is schedule independent.
pub fn run_trials(
    layout: &LinkLayout,
    ul: Option<&UlSolution>,
    dl: Option<&DlSolution>,
    correlation: Option<&CorrelationRoots>,
    seed: u64,
    first: u64,
    trials: usize,
) -> Result<Vec<TrialResult>> {
    if ul.is_some_and(|u| !u.feasible) || dl.is_some_and(|d| !d.feasible) {
        return Err(Error::InvalidParameter {
            name: "solution",
            reason: "Monte-Carlo trials need a feasible power allocation".into(),
        });
    }
    (first..first + trials as u64)
        .into_par_iter()
        .map(|i| run_trial(layout, ul, dl, correlation, seed, i))
        .collect()
}

/// Mean over devices of `|mean_t(SINR_kt)/γ_k − 1|`.
fn device_mean_err<'a>(gammas: &[f64], per_trial: impl Iterator<Item = &'a Vec<f64>>) -> f64 {
    let mut sums = vec![0.0; gammas.len()];
    let mut trials = 0usize;
    for sinr in per_trial {
        if sinr.is_empty() {
            return f64::NAN;
        }
        for (acc, s) in sums.iter_mut().zip(sinr) {
            *acc += s;
        }
        trials += 1;
    }
    let (err, count) = sums
        .iter()
        .zip(gammas)
        .filter(|(_, g)| **g > 0.0)
        .fold((0.0, 0usize), |(e, c), (s, g)| (e + (s / trials as f64 / g - 1.0).abs(), c + 1));
    if trials == 0 || count == 0 {
        f64::NAN
    } else {
        err / count as f64
    }
}

/// Statistics of trials that all share `layout`.
pub fn aggregate(layout: &LinkLayout, results: &[TrialResult], seed: u64) -> AggregateStats {
    let mut acc = Accumulator::default();
    for r in results {
        acc.push(layout, r);
    }
    let gammas: Vec<f64> = layout.served.iter().map(|d| d.gamma).collect();
    AggregateStats {
        ul_device_err: device_mean_err(&gammas, results.iter().map(|r| &r.ul_sinr)),
        dl_device_err: device_mean_err(&gammas, results.iter().map(|r| &r.dl_sinr)),
        ..acc.finish(seed)
    }
}

pub fn run_ul_trials(layout: &LinkLayout, ul: &UlSolution, trials: usize, seed: u64) -> Result<AggregateStats> {
    let r = run_trials(layout, Some(ul), None, None, seed, 0, trials)?;
    Ok(aggregate(layout, &r, seed))
}

pub fn run_dl_trials(layout: &LinkLayout, dl: &DlSolution, trials: usize, seed: u64) -> Result<AggregateStats> {
    let r = run_trials(layout, None, Some(dl), None, seed, 0, trials)?;
    Ok(aggregate(layout, &r, seed))
}

pub const RECORD_HEADER: &str = "trial,device_id,class,target_sinr,achieved_sinr,power_w\n";

/// Appends per-device rows of one trial to a records CSV.
pub fn write_records(
    out: &mut String,
    layout: &LinkLayout,
    t: &TrialResult,
    ul: Option<&UlSolution>,
    dl: Option<&DlSolution>,
) {
    let served = &layout.served;
    if let Some(ul) = ul {
        for (k, s) in t.ul_sinr.iter().enumerate() {
            let d = &served[k];
            let _ = writeln!(
                out,
                "{},{},{}_UL,{:e},{:e},{:e}",
                t.index,
                k,
                d.kind.label(),
                d.gamma,
                s,
                ul.powers[k]
            );
        }
        for (s, sinr) in t.sue_sinr.iter().enumerate() {
            let sca = &layout.nulled[s];
            let _ = writeln!(
                out,
                "{},{},SCA_DL,{:e},{:e},{:e}",
                t.index,
                served.len() + s,
                sca.gamma_s,
                sinr,
                ul.sca_dl_powers[s]
            );
        }
    }
    if let Some(dl) = dl {
        for (k, s) in t.dl_sinr.iter().enumerate() {
            let d = &served[k];
            let _ = writeln!(
                out,
                "{},{},{}_DL,{:e},{:e},{:e}",
                t.index,
                k,
                d.kind.label(),
                d.gamma,
                s,
                dl.powers[k]
            );
        }
    }
}
