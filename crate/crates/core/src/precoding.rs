//! Instantaneous concatenated precoders built from channel estimates.
//!
//! Every precoder is `V = T F`, where `T` projects onto the null space of the
//! protected SCAs' backhaul channels, so the BS downlink never reaches them.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::{draw_channels, max_abs, CMatrix, ChannelSet, Complex64, CorrelationRoots};
use crate::downlink::{optimal_rho, DlTargets};
use crate::error::{Error, Result};
use crate::layout::LinkLayout;

/// Condition number above which a ZF solve is reported as ill-conditioned.
pub const ZF_CONDITION_WARNING: f64 = 1e10;

/// Orthogonal projector onto the complement of the column space of `h_sb`.
pub fn projector(h_sb: &CMatrix) -> Result<CMatrix> {
    let n = h_sb.nrows();
    if h_sb.ncols() == 0 {
        return Ok(CMatrix::identity(n, n));
    }
    if h_sb.ncols() >= n {
        return Err(Error::Singular("protected channels span the whole array"));
    }
    let gram = h_sb.adjoint() * h_sb;
    let chol = gram.cholesky().ok_or(Error::Singular("protected channels are rank deficient"))?;
    let coeff = chol.solve(&h_sb.adjoint());
    Ok(CMatrix::identity(n, n) - h_sb * coeff)
}

/// RZF precoder `V = T (Û Λ⁻¹ Û† + NρI)⁻¹ Û` with `Û = T Ĥ`.
pub fn rzf_precoder(h_hat: &CMatrix, gains: &[f64], t: &CMatrix, rho: f64) -> Result<CMatrix> {
    if !(rho > 0.0) {
        return Err(Error::Domain {
            function: "rzf_precoder",
            arg: rho,
        });
    }
    if gains.len() != h_hat.ncols() {
        return Err(Error::Shape(format!("{} gains for {} columns", gains.len(), h_hat.ncols())));
    }
    let n = h_hat.nrows();
    let u = t * h_hat;
    let mut weighted = u.clone();
    for (j, l) in gains.iter().enumerate() {
        weighted.column_mut(j).scale_mut(1.0 / l);
    }
    let mut m = &weighted * u.adjoint();
    let shift = Complex64::from(n as f64 * rho);
    for i in 0..n {
        m[(i, i)] += shift;
    }
    let f = m
        .cholesky()
        .ok_or(Error::Singular("RZF Gram matrix"))?
        .solve(&u);
    Ok(t * f)
}

/// Condition number of a Hermitian positive definite matrix.
pub fn hermitian_condition(m: &CMatrix) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// ZF precoder `V = T Ĥ (Ĥ† T Ĥ)⁻¹` and the condition number of the Gram matrix.
pub fn zf_precoder(h_hat: &CMatrix, t: &CMatrix) -> Result<(CMatrix, f64)> {
    let u = t * h_hat;
    let gram = h_hat.adjoint() * &u;
    let cond = hermitian_condition(&gram);
    if !cond.is_finite() {
        return Err(Error::Singular("ZF Gram matrix"));
    }
    if cond > ZF_CONDITION_WARNING {
        log::warn!("ZF Gram matrix condition number {cond:e}");
    }
    let inv = match gram.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => gram.lu().try_inverse().ok_or(Error::Singular("ZF Gram matrix"))?,
    };
    Ok((u * inv, cond))
}

/// Per-device DL SINR with true channels `h`, and the radiated power `Σ p_k ‖v_k‖²`.
pub fn instantaneous_dl_sinr(h: &CMatrix, v: &CMatrix, powers: &[f64], noise_w: f64) -> (Vec<f64>, f64) {
    let cross = h.adjoint() * v;
    let k = h.ncols();
    let sinr = (0..k)
        .map(|i| {
            let mut interference = 0.0;
            for j in 0..k {
                if j != i {
                    interference += powers[j] * cross[(i, j)].norm_sqr();
                }
            }
            powers[i] * cross[(i, i)].norm_sqr() / (interference + noise_w)
        })
        .collect();
    let total = (0..v.ncols()).map(|j| powers[j] * v.column(j).norm_squared()).sum();
    (sinr, total)
}

/// Largest `|h_s† v_k| / (‖h_s‖ ‖v_k‖)` over protected SCAs and precoder columns.
pub fn nulling_residual(h_sb: &CMatrix, v: &CMatrix) -> f64 {
    if h_sb.ncols() == 0 || v.ncols() == 0 {
        return 0.0;
    }
    let prod = h_sb.adjoint() * v;
    let mut worst: f64 = 0.0;
    for s in 0..h_sb.ncols() {
        let hs = h_sb.column(s).norm();
        for k in 0..v.ncols() {
            let vk = v.column(k).norm();
            if vk > 0.0 {
                worst = worst.max(prod[(s, k)].norm() / (hs * vk));
            }
        }
    }
    worst
}

/// Powers that make every DL SINR equal its target on this realization, or
/// `None` when no nonnegative solution exists.
pub fn exact_dl_powers(h: &CMatrix, v: &CMatrix, gammas: &[f64], noise_w: f64) -> Option<Vec<f64>> {
    let k = h.ncols();
    let cross = h.adjoint() * v;
    let a = DMatrix::<f64>::from_fn(k, k, |i, j| {
        let g = cross[(i, j)].norm_sqr();
        if i == j {
            g
        } else {
            -gammas[i] * g
        }
    });
    let rhs = nalgebra::DVector::from_fn(k, |i, _| gammas[i] * noise_w);
    let p = a.lu().solve(&rhs)?;
    p.iter().all(|x| *x >= 0.0 && x.is_finite()).then(|| p.iter().copied().collect())
}

/// Smallest fixed powers whose SINR, averaged over the cross-gain
/// realizations `gains[r][(i, j)] = |h_i† v_j|²`, reaches every target.
/// Starts from the solution for averaged gains and rescales each power by its
/// shortfall until all mean SINRs are within 1e-6 of target. `None` when the
/// targets cannot be met.
fn mean_sinr_powers(gains: &[DMatrix<f64>], gammas: &[f64], noise_w: f64) -> Option<Vec<f64>> {
    let k = gammas.len();
    let n = gains.len() as f64;
    let mean = gains.iter().fold(DMatrix::<f64>::zeros(k, k), |acc, g| acc + g) / n;
    let a = DMatrix::<f64>::from_fn(k, k, |i, j| if i == j { mean[(i, j)] } else { -gammas[i] * mean[(i, j)] });
    let rhs = nalgebra::DVector::from_fn(k, |i, _| gammas[i] * noise_w);
    let start = a.lu().solve(&rhs)?;
    if !start.iter().all(|x| *x > 0.0 && x.is_finite()) {
        return None;
    }
    let mut p: Vec<f64> = start.iter().copied().collect();
    for _ in 0..500 {
        let mut sinr = vec![0.0; k];
        for g in gains {
            for i in 0..k {
                let interference: f64 = (0..k).filter(|&j| j != i).map(|j| p[j] * g[(i, j)]).sum();
                sinr[i] += p[i] * g[(i, i)] / (interference + noise_w) / n;
            }
        }
        let worst = sinr.iter().zip(gammas).map(|(s, g)| (s / g - 1.0).abs()).fold(0.0, f64::max);
        if worst < 1e-6 {
            return Some(p);
        }
        for i in 0..k {
            p[i] *= gammas[i] / sinr[i];
        }
        if !p.iter().all(|x| x.is_finite()) {
            return None;
        }
    }
    None
}

/// Outcome of the regularizer search for correlated channels.
#[derive(Debug, Clone)]
pub struct CorrelatedRzf {
    pub rho_best: f64,
    /// Mean radiated power at `rho_best` over the realizations (Watt).
    pub power: f64,
    /// `(ρ, mean power)` for every grid point; `None` where no fixed power
    /// allocation meets the targets in mean SINR.
    pub grid: Vec<(f64, Option<f64>)>,
}

/// Logarithmic grid of `points` values spanning `[center/span, center*span]`.
pub fn log_grid(center: f64, span: f64, points: usize) -> Vec<f64> {
    let lo = (center / span).ln();
    let hi = (center * span).ln();
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default search grid: 64 points over `[ρ★/30, 30ρ★]`.
pub fn default_rho_grid(targets: &DlTargets) -> Result<Vec<f64>> {
    let rho = optimal_rho(targets.gamma_bar, targets.c, targets.c_s)?;
    if !(rho > 0.0) {
        return Err(Error::EmptyFeasibleGrid);
    }
    Ok(log_grid(rho, 30.0, 64))
}

/// Picks the RZF regularizer that minimizes the mean radiated power when the
/// powers are set per realization to meet every target exactly.
///
/// All grid points share the same channel realizations.
pub fn correlated_rzf(
    layout: &LinkLayout,
    roots: Option<&CorrelationRoots>,
    rho_grid: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<CorrelatedRzf> {
    let gains: Vec<f64> = layout.served.iter().map(|d| d.gain).collect();
    let gammas: Vec<f64> = layout.served.iter().map(|d| d.gamma).collect();
    let channels: Vec<ChannelSet> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| draw_channels(layout, seed, r, roots))
        .collect::<Result<_>>()?;
    let projectors: Vec<CMatrix> = channels
        .par_iter()
        .map(|ch| projector(&ch.h_nulled))
        .collect::<Result<_>>()?;

    let per_point: Vec<Option<f64>> = rho_grid
        .par_iter()
        .map(|&rho| -> Result<Option<f64>> {
            let mut gains_per = Vec::with_capacity(realizations);
            let mut norms = vec![0.0; gammas.len()];
            for (ch, t) in channels.iter().zip(&projectors) {
                let v = rzf_precoder(&ch.h_hat, &gains, t, rho)?;
                if nulling_residual(&ch.h_nulled, &v) > 1e-8 {
                    log::warn!("nulling residual above 1e-8 at rho {rho}");
                }
                for (acc, col) in norms.iter_mut().zip(v.column_iter()) {
                    *acc += col.norm_squared() / realizations as f64;
                }
                gains_per.push((ch.h.adjoint() * &v).map(|z| z.norm_sqr()));
            }
            Ok(mean_sinr_powers(&gains_per, &gammas, layout.noise_w)
                .map(|p| p.iter().zip(&norms).map(|(p, n)| p * n).sum()))
        })
        .collect::<Result<_>>()?;

    let grid: Vec<(f64, Option<f64>)> = rho_grid.iter().copied().zip(per_point).collect();
    let (rho_best, power) = grid
        .iter()
        .filter_map(|(r, p)| p.map(|p| (*r, p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::EmptyFeasibleGrid)?;
    Ok(CorrelatedRzf {
        rho_best,
        power,
        grid,
    })
}

/// Entry-wise check that `m` is Hermitian and idempotent to `tol`.
pub fn is_orthogonal_projector(m: &CMatrix, tol: f64) -> bool {
    max_abs(&(m - m.adjoint())) < tol && max_abs(&(m * m - m)) < tol
}
