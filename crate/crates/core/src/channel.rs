//! Small-scale fading draws, imperfect CSI, and spatial correlation.
//!
//! A column for a device with large-scale gain `l` is `h = √l Θ^{1/2} w` with
//! `w ~ CN(0, I_N)`, so `‖h‖²/N → l`. Its estimate is
//! `ĥ = √l Θ^{1/2} (√(1−τ²) w + τ e)` with an independent `e ~ CN(0, I_N)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::layout::LinkLayout;
use crate::quad::CompositeRule;
use crate::rng::{substream, Domain};

pub type Complex64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// One realization of every channel in a band.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// True channels of the served devices, N × K.
    pub h: CMatrix,
    /// BS estimates of `h`.
    pub h_hat: CMatrix,
    /// Backhaul channels of the nulled SCAs, N × S (known exactly).
    pub h_nulled: CMatrix,
    /// SCA to own SUE, one per nulled SCA.
    pub access: Vec<Complex64>,
    /// Served device `k` to the SUE of nulled SCA `s`, S × K.
    pub cross: CMatrix,
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Draws a circularly symmetric `CN(0, 1)` sample.
pub fn cn01<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn cn_vector<R: Rng>(rng: &mut R, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| cn01(rng))
}

/// Square roots `Θ_k^{1/2}` of the served devices' correlation matrices.
#[derive(Debug, Clone)]
pub struct CorrelationRoots {
    pub roots: Vec<CMatrix>,
}

impl CorrelationRoots {
    /// One root per served device of `layout`. Each device gets a mean angle
    /// of arrival uniform on `[0, 2π)`, drawn from correlated substream `index`.
    pub fn for_layout(layout: &LinkLayout, spread: f64, seed: u64, index: u64) -> Result<Self> {
        let mut rng = substream(seed, Domain::Correlated, index);
        let roots = layout
            .served
            .iter()
            .map(|_| {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                correlation_matrix(theta, spread, layout.n_antennas).and_then(|t| hermitian_sqrt(&t))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { roots })
    }
}

/// Draws realization `index` of every channel in `layout`.
pub fn draw_channels(
    layout: &LinkLayout,
    seed: u64,
    index: u64,
    correlation: Option<&CorrelationRoots>,
) -> Result<ChannelSet> {
    let n = layout.n_antennas;
    let k = layout.k();
    let s = layout.s();
    if let Some(c) = correlation {
        if c.roots.len() != k {
            return Err(Error::Shape(format!("{} correlation roots for {k} devices", c.roots.len())));
        }
    }
    let mut rng = substream(seed, Domain::Channel, index);
    let mut h = CMatrix::zeros(n, k);
    let mut h_hat = CMatrix::zeros(n, k);
    for (j, dev) in layout.served.iter().enumerate() {
        let w = cn_vector(&mut rng, n);
        let e = cn_vector(&mut rng, n);
        let amp = dev.gain.sqrt();
        let tau = dev.tau_sq.sqrt();
        let est = &w * Complex64::from((1.0 - dev.tau_sq).sqrt()) + &e * Complex64::from(tau);
        let (col, col_hat) = match correlation {
            Some(c) => (&c.roots[j] * &w, &c.roots[j] * est),
            None => (w, est),
        };
        h.set_column(j, &(col * Complex64::from(amp)));
        h_hat.set_column(j, &(col_hat * Complex64::from(amp)));
    }
    let mut h_nulled = CMatrix::zeros(n, s);
    for (j, sca) in layout.nulled.iter().enumerate() {
        let w = cn_vector(&mut rng, n);
        h_nulled.set_column(j, &(w * Complex64::from(sca.gain_bs.sqrt())));
    }
    let access = layout
        .nulled
        .iter()
        .map(|sca| cn01(&mut rng) * sca.gain_access.sqrt())
        .collect();
    let mut cross = CMatrix::zeros(s, k);
    for (i, sca) in layout.nulled.iter().enumerate() {
        for (j, g) in sca.cross.iter().enumerate() {
            cross[(i, j)] = cn01(&mut rng) * g.sqrt();
        }
    }
    Ok(ChannelSet {
        h,
        h_hat,
        h_nulled,
        access,
        cross,
    })
}

/// Entry for antenna separation `m` of the uniform-linear-array correlation
/// `(1/Δφ) ∫_{θ−Δφ/2}^{θ+Δφ/2} exp(jπ m cos φ) dφ` on a given rule.
fn correlation_entry(rule: &CompositeRule, m: f64, theta: f64, spread: f64) -> Complex64 {
    let lo = theta - 0.5 * spread;
    let hi = theta + 0.5 * spread;
    let re = rule.integrate(|phi| (std::f64::consts::PI * m * phi.cos()).cos(), lo, hi);
    let im = rule.integrate(|phi| (std::f64::consts::PI * m * phi.cos()).sin(), lo, hi);
    Complex64::new(re, im) / spread
}

/// Spatial correlation matrix of an `n`-antenna half-wavelength array for a
/// device at azimuth `theta` with angular spread `spread`.
///
/// The matrix is Toeplitz and Hermitian; each of the `2n − 1` distinct entries
/// is integrated with a 256-point composite Gauss–Legendre rule and accepted
/// once doubling the panel count changes it by less than 1e-12.
pub fn correlation_matrix(theta: f64, spread: f64, n: usize) -> Result<CMatrix> {
    if !(spread > 0.0) || !spread.is_finite() || !theta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "angular_spread_rad",
            reason: format!("spread {spread} and azimuth {theta} must be finite, spread positive"),
        });
    }
    let mut panels = 16;
    let mut diagonal_band: Vec<Complex64>;
    loop {
        let coarse = CompositeRule::new(16, panels);
        let fine = CompositeRule::new(16, 2 * panels);
        diagonal_band = Vec::with_capacity(n);
        let mut worst: f64 = 0.0;
        for m in 0..n {
            let a = correlation_entry(&coarse, m as f64, theta, spread);
            let b = correlation_entry(&fine, m as f64, theta, spread);
            worst = worst.max((a - b).norm());
            diagonal_band.push(a);
        }
        if worst < 1e-12 {
            break;
        }
        panels *= 2;
        if panels > 4096 {
            return Err(Error::Quadrature(format!(
                "correlation entries unresolved at {panels} panels (change {worst:e})"
            )));
        }
    }
    diagonal_band[0] = Complex64::new(1.0, 0.0);
    Ok(CMatrix::from_fn(n, n, |i, l| {
        if i >= l {
            diagonal_band[i - l]
        } else {
            diagonal_band[l - i].conj()
        }
    }))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Eigenvalues below zero (rounding) are clamped.
pub fn hermitian_sqrt(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!("{}x{} is not square", m.nrows(), m.ncols())));
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| Complex64::from(v.max(0.0).sqrt()));
    let q = &eig.eigenvectors;
    let scaled = CMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * roots[j]);
    Ok(scaled * q.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{DeviceKind, ServedDevice};

    fn one_mue(n: usize, gain: f64, tau_sq: f64) -> LinkLayout {
        LinkLayout {
            n_antennas: n,
            noise_w: 1.0,
            served: vec![ServedDevice {
                kind: DeviceKind::Mue,
                id: 0,
                gamma: 1.0,
                tau_sq,
                gain,
                azimuth: 0.0,
            }],
            nulled: vec![],
        }
    }

    #[test]
    fn perfect_csi_estimate_is_exact() {
        let ch = draw_channels(&one_mue(64, 2.0, 0.0), 5, 0, None).unwrap();
        assert_eq!(ch.h, ch.h_hat);
    }

    #[test]
    fn useless_estimate_is_uncorrelated() {
        let layout = one_mue(4096, 1.0, 1.0 - 1e-12);
        let ch = draw_channels(&layout, 5, 0, None).unwrap();
        let h = ch.h.column(0);
        let e = ch.h_hat.column(0);
        let corr = h.dotc(&e).norm() / (h.norm() * e.norm());
        assert!(corr < 0.05, "{corr}");
    }

    #[test]
    fn draws_are_reproducible() {
        let a = draw_channels(&one_mue(16, 1.0, 0.1), 11, 3, None).unwrap();
        let b = draw_channels(&one_mue(16, 1.0, 0.1), 11, 3, None).unwrap();
        assert_eq!(a.h_hat, b.h_hat);
    }

    #[test]
    fn correlation_matrix_structure() {
        let t = correlation_matrix(0.3, std::f64::consts::PI / 12.0, 8).unwrap();
        assert!(max_abs(&(&t - t.adjoint())) < 1e-12);
        for i in 0..8 {
            assert_eq!(t[(i, i)], Complex64::new(1.0, 0.0));
        }
        let eig = nalgebra::SymmetricEigen::new(t.clone());
        assert!(eig.eigenvalues.min() > -1e-10);
        let r = hermitian_sqrt(&t).unwrap();
        assert!(max_abs(&(&r * &r - &t)) < 1e-10);
    }

    #[test]
    fn full_circle_spread_gives_bessel_entries() {
        let t = correlation_matrix(0.7, std::f64::consts::TAU, 6).unwrap();
        for m in 1..6 {
            let expect = libm::j0(std::f64::consts::PI * m as f64);
            assert!((t[(m, 0)].re - expect).abs() < 1e-12);
            assert!(t[(m, 0)].im.abs() < 1e-12);
        }
    }
}
