//! Network layout: SCA grid, user drops, and the RED/BLUE partition.
//!
//! The base station sits at the origin of a square cell. SCAs form a regular
//! grid colored like a checkerboard, so that two SCAs of the same color are
//! never neighbours. Each SCA's MUEs are dropped uniformly over its
//! nearest-SCA region and its SUE uniformly over a disc around it.

use std::fmt::Write as _;

use rand::Rng;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Azimuth seen from the origin.
    pub fn azimuth(self) -> f64 {
        self.y.atan2(self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Red,
    Blue,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::Red => "RED",
            Group::Blue => "BLUE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sca {
    pub pos: Point,
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mue {
    pub pos: Point,
    pub group: Group,
    /// Nearest SCA, if any SCA exists.
    pub sca: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sue {
    pub pos: Point,
    pub sca: usize,
}

/// One drop of every node in the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    pub n_antennas: usize,
    pub bs: Point,
    pub scas: Vec<Sca>,
    pub mues: Vec<Mue>,
    /// One SUE per SCA, `sues[i].sca == i`.
    pub sues: Vec<Sue>,
}

/// Grid shape `(rows, cols)` for `n` SCAs: the most square factorization.
pub fn grid_shape(n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let mut rows = (n as f64).sqrt().floor() as usize;
    while !n.is_multiple_of(rows) {
        rows -= 1;
    }
    (rows, n / rows)
}

fn sample_uniform_disc<R: Rng>(rng: &mut R, center: Point, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    Point::new(center.x + r * phi.cos(), center.y + r * phi.sin())
}

fn sample_rect<R: Rng>(rng: &mut R, lo: Point, hi: Point) -> Point {
    let x = if hi.x > lo.x { rng.random_range(lo.x..hi.x) } else { lo.x };
    let y = if hi.y > lo.y { rng.random_range(lo.y..hi.y) } else { lo.y };
    Point::new(x, y)
}

impl NetworkGeometry {
    pub fn red_mues(&self) -> impl Iterator<Item = (usize, &Mue)> {
        self.mues.iter().enumerate().filter(|(_, m)| m.group == Group::Red)
    }

    pub fn scas_in(&self, group: Group) -> impl Iterator<Item = (usize, &Sca)> {
        self.scas.iter().enumerate().filter(move |(_, s)| s.group == group)
    }

    /// `|M_R| + |S_R|`.
    pub fn k_served(&self) -> usize {
        self.red_mues().count() + self.scas_in(Group::Red).count()
    }

    /// `|S_B|`.
    pub fn s_nulled(&self) -> usize {
        self.scas_in(Group::Blue).count()
    }

    pub fn c(&self) -> f64 {
        self.k_served() as f64 / self.n_antennas as f64
    }

    pub fn c_s(&self) -> f64 {
        self.s_nulled() as f64 / self.n_antennas as f64
    }

    /// Index of the SCA nearest to `p` (lowest index on ties).
    pub fn nearest_sca(&self, p: Point) -> Option<usize> {
        self.scas
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.pos.dist(p).total_cmp(&b.1.pos.dist(p)))
            .map(|(i, _)| i)
    }

    /// CSV with columns `id,kind,x_m,y_m,group,serving_sca`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,kind,x_m,y_m,group,serving_sca\n");
        let _ = writeln!(out, "0,BS,{:?},{:?},,", self.bs.x, self.bs.y);
        let mut id = 1;
        for (i, s) in self.scas.iter().enumerate() {
            let _ = writeln!(out, "{id},SCA,{:?},{:?},{},{i}", s.pos.x, s.pos.y, s.group.label());
            id += 1;
        }
        for m in &self.mues {
            let serving = m.sca.map(|s| s.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{id},MUE,{:?},{:?},{},{serving}", m.pos.x, m.pos.y, m.group.label());
            id += 1;
        }
        for u in &self.sues {
            let group = self.scas[u.sca].group.label();
            let _ = writeln!(out, "{id},SUE,{:?},{:?},{group},{}", u.pos.x, u.pos.y, u.sca);
            id += 1;
        }
        out
    }
}

/// Draws drop number `index` of the layout described by `cfg`.
pub fn build_network_indexed(cfg: &ScenarioConfig, seed: u64, index: u64) -> Result<NetworkGeometry> {
    cfg.validate()?;
    let mut rng = substream(seed, Domain::Geometry, index);
    let half = 0.5 * cfg.cell_side_m;
    let (rows, cols) = grid_shape(cfg.n_sca);
    let pitch = cfg.sca_pitch_m;

    let mut scas = Vec::with_capacity(cfg.n_sca);
    for i in 0..rows {
        for j in 0..cols {
            let x = (j as f64 - 0.5 * (cols as f64 - 1.0)) * pitch;
            let y = (i as f64 - 0.5 * (rows as f64 - 1.0)) * pitch;
            let group = if (i + j) % 2 == 0 { Group::Red } else { Group::Blue };
            scas.push(Sca {
                pos: Point::new(x, y),
                group,
            });
        }
    }

    let mut mues = Vec::with_capacity(cfg.n_mue);
    if scas.is_empty() {
        for _ in 0..cfg.n_mue {
            let pos = sample_rect(&mut rng, Point::new(-half, -half), Point::new(half, half));
            mues.push(Mue {
                pos,
                group: Group::Red,
                sca: None,
            });
        }
    } else {
        let per = cfg.mues_per_sca();
        for (s, sca) in scas.iter().enumerate() {
            // grid Voronoi cell, clipped to the macro cell
            let (i, j) = (s / cols, s % cols);
            let lo_x = if j == 0 { -half } else { (sca.pos.x - 0.5 * pitch).max(-half) };
            let hi_x = if j + 1 == cols { half } else { (sca.pos.x + 0.5 * pitch).min(half) };
            let lo_y = if i == 0 { -half } else { (sca.pos.y - 0.5 * pitch).max(-half) };
            let hi_y = if i + 1 == rows { half } else { (sca.pos.y + 0.5 * pitch).min(half) };
            for _ in 0..per {
                let pos = sample_rect(&mut rng, Point::new(lo_x, lo_y), Point::new(hi_x, hi_y));
                mues.push(Mue {
                    pos,
                    group: sca.group,
                    sca: Some(s),
                });
            }
        }
    }

    let sues = scas
        .iter()
        .enumerate()
        .map(|(s, sca)| Sue {
            pos: sample_uniform_disc(&mut rng, sca.pos, cfg.small_cell_radius_m),
            sca: s,
        })
        .collect();

    let geom = NetworkGeometry {
        n_antennas: cfg.n_antennas,
        bs: Point::ORIGIN,
        scas,
        mues,
        sues,
    };
    let load = geom.c() + geom.c_s();
    if load >= 1.0 {
        return Err(Error::Overloaded { load });
    }
    Ok(geom)
}

/// Draws the first drop for `seed`.
pub fn build_network(cfg: &ScenarioConfig, seed: u64) -> Result<NetworkGeometry> {
    build_network_indexed(cfg, seed, 0)
}
