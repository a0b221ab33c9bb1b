//! Large-system analysis and Monte-Carlo validation of a reverse-TDD two-tier
//! network: a massive-MIMO base station serves macro users and backhauls
//! small-cell access points over the air, while nulling its interference
//! toward the access points that are busy with their own users.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod downlink;
pub mod error;
pub mod geometry;
pub mod layout;
pub mod montecarlo;
pub mod precoding;
pub mod quad;
pub mod rng;
pub mod scenario;
pub mod special;
pub mod uplink;

pub use config::{parse_config, PathlossModel, ScenarioConfig};
pub use error::{Error, Result};
pub use geometry::{build_network, Group, NetworkGeometry, Point};
pub use layout::{DeviceKind, LinkLayout, NulledSca, ServedDevice};
pub use downlink::{DlSolution, DlTargets, Scheme};
pub use scenario::Architecture;
pub use uplink::{solve_ul_fixed_point, UlOptions, UlSolution};
