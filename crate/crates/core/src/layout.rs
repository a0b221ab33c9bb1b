//! Per-band link description shared by the solvers and the simulator.
//!
//! A [`LinkLayout`] lists the devices the base station serves in one band
//! (MUEs and SCAs, or SUEs in the single-tier baseline) and the SCAs whose
//! opposite-direction links the BS must protect. Everything downstream works
//! on large-scale gains only, so the same layout feeds the asymptotic solvers
//! and the channel generator.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceKind {
    Mue,
    Sca,
    Sue,
}

impl DeviceKind {
    pub fn label(self) -> &'static str {
        match self {
            DeviceKind::Mue => "MUE",
            DeviceKind::Sca => "SCA",
            DeviceKind::Sue => "SUE",
        }
    }
}

/// A device in the served set `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServedDevice {
    pub kind: DeviceKind,
    /// Index in the geometry's list of that kind.
    pub id: usize,
    pub gamma: f64,
    pub tau_sq: f64,
    /// Large-scale gain to the BS.
    pub gain: f64,
    /// Azimuth seen from the BS (radians).
    pub azimuth: f64,
}

/// An SCA of `S_B`: it talks to its SUE while the BS talks to `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct NulledSca {
    pub id: usize,
    /// Backhaul gain SCA to BS.
    pub gain_bs: f64,
    /// Access gain SCA to its SUE.
    pub gain_access: f64,
    /// Gains from every served device to this SCA's SUE, in served order.
    pub cross: Vec<f64>,
    /// Mean-SINR target of the SUE link (ergodic).
    pub gamma_s: f64,
    pub azimuth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkLayout {
    pub n_antennas: usize,
    /// σ², Watt.
    pub noise_w: f64,
    pub served: Vec<ServedDevice>,
    pub nulled: Vec<NulledSca>,
}

impl LinkLayout {
    pub fn k(&self) -> usize {
        self.served.len()
    }

    pub fn s(&self) -> usize {
        self.nulled.len()
    }

    pub fn c(&self) -> f64 {
        self.k() as f64 / self.n_antennas as f64
    }

    pub fn c_s(&self) -> f64 {
        self.s() as f64 / self.n_antennas as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(invalid("n_antennas", "need at least one antenna"));
        }
        if !(self.noise_w > 0.0) {
            return Err(invalid("noise_w", "must be positive"));
        }
        let load = self.c() + self.c_s();
        if load >= 1.0 {
            return Err(Error::Overloaded { load });
        }
        for d in &self.served {
            if !(d.tau_sq >= 0.0 && d.tau_sq < 1.0) {
                return Err(Error::TauOutOfRange { tau_sq: d.tau_sq });
            }
            if !(d.gamma >= 0.0) || !(d.gain > 0.0) {
                return Err(invalid("served", "targets must be nonnegative and gains positive"));
            }
        }
        for s in &self.nulled {
            if s.cross.len() != self.k() {
                return Err(Error::Shape(format!(
                    "SCA {} has {} cross gains for {} served devices",
                    s.id,
                    s.cross.len(),
                    self.k()
                )));
            }
            if !(s.gain_bs > 0.0) || !(s.gain_access > 0.0) || !(s.gamma_s >= 0.0) {
                return Err(invalid("nulled", "gains must be positive and targets nonnegative"));
            }
        }
        Ok(())
    }

    /// Copy with every MUE's CSI error variance set to `tau_sq`.
    pub fn with_mue_tau_sq(&self, tau_sq: f64) -> Self {
        let mut out = self.clone();
        for d in out.served.iter_mut().filter(|d| d.kind == DeviceKind::Mue) {
            d.tau_sq = tau_sq;
        }
        out
    }

    /// Copy with every MUE's SINR target set to `gamma`.
    pub fn with_mue_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        for d in out.served.iter_mut().filter(|d| d.kind == DeviceKind::Mue) {
            d.gamma = gamma;
        }
        out
    }

    pub fn served_of(&self, kind: DeviceKind) -> impl Iterator<Item = (usize, &ServedDevice)> {
        self.served.iter().enumerate().filter(move |(_, d)| d.kind == kind)
    }
}
