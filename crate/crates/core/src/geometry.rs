//! Random multi-tier deployments.
//!
//! Base stations of every tier and the users are drawn from independent
//! homogeneous Poisson point processes over a disc-shaped window. Link
//! budgets use a single power-law path loss with an optional per-tier array
//! gain (the macro tier's massive-MIMO factor) and unit-mean Rayleigh fading.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Distances below this are clamped before evaluating path loss.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Default path-loss exponent.
pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 4.0;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GeometryError {
    #[error("power {0} dBm is not finite")]
    NonFinitePower(f64),
    #[error("density must be finite and >= 0, got {0}")]
    InvalidDensity(f64),
    #[error("region radius must be finite and > 0, got {0}")]
    InvalidRadius(f64),
    #[error("distance must be finite and > 0, got {0}")]
    InvalidDistance(f64),
    #[error("path-loss exponent must be > 2, got {0}")]
    InvalidPathLossExponent(f64),
    #[error("array gain must be >= 1, got {0}")]
    InvalidArrayGain(f64),
    #[error("transmit power must be finite and >= 0, got {0} W")]
    InvalidTxPower(f64),
    #[error("massive-MIMO gain needs antennas >= streams >= 1, got M={antennas}, N={streams}")]
    InvalidAntennaConfig { antennas: u32, streams: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Disc-shaped simulation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    center: Point,
    radius: f64,
}

impl Region {
    pub fn disc(center: Point, radius: f64) -> Result<Self, GeometryError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(Self { center, radius })
    }

    pub fn centered(radius: f64) -> Result<Self, GeometryError> {
        Self::disc(Point::ORIGIN, radius)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.center.distance(p) <= self.radius
    }

    /// Uniform point in the disc (inverse-CDF on the radius).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let r = self.radius * rng.random::<f64>().sqrt();
        let theta = 2.0 * PI * rng.random::<f64>();
        Point::new(self.center.x + r * theta.cos(), self.center.y + r * theta.sin())
    }
}

/// Static description of one tier of base stations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub name: String,
    pub tx_power_dbm: f64,
    /// Points per square metre.
    pub density: f64,
    pub array_gain: f64,
    pub path_loss_exponent: f64,
}

impl TierConfig {
    pub fn new(name: impl Into<String>, tx_power_dbm: f64, density: f64) -> Self {
        Self {
            name: name.into(),
            tx_power_dbm,
            density,
            array_gain: 1.0,
            path_loss_exponent: DEFAULT_PATH_LOSS_EXPONENT,
        }
    }

    pub fn with_array_gain(mut self, gain: f64) -> Self {
        self.array_gain = gain;
        self
    }

    pub fn with_path_loss_exponent(mut self, alpha: f64) -> Self {
        self.path_loss_exponent = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.tx_power_dbm.is_finite() {
            return Err(GeometryError::NonFinitePower(self.tx_power_dbm));
        }
        if !(self.density.is_finite() && self.density >= 0.0) {
            return Err(GeometryError::InvalidDensity(self.density));
        }
        if !(self.array_gain.is_finite() && self.array_gain >= 1.0) {
            return Err(GeometryError::InvalidArrayGain(self.array_gain));
        }
        if !(self.path_loss_exponent.is_finite() && self.path_loss_exponent > 2.0) {
            return Err(GeometryError::InvalidPathLossExponent(self.path_loss_exponent));
        }
        Ok(())
    }

    pub fn tx_power_watts(&self) -> Result<f64, GeometryError> {
        dbm_to_watts(self.tx_power_dbm)
    }
}

/// Zero-forcing array gain per stream of an `antennas`-element BS serving
/// `streams` data streams: (M - N + 1) / N.
pub fn massive_mimo_gain(antennas: u32, streams: u32) -> Result<f64, GeometryError> {
    if streams == 0 || antennas < streams {
        return Err(GeometryError::InvalidAntennaConfig { antennas, streams });
    }
    Ok(f64::from(antennas - streams + 1) / f64::from(streams))
}

pub fn dbm_to_watts(p_dbm: f64) -> Result<f64, GeometryError> {
    if !p_dbm.is_finite() {
        return Err(GeometryError::NonFinitePower(p_dbm));
    }
    Ok(10f64.powf((p_dbm - 30.0) / 10.0))
}

pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * p_w.log10() + 30.0
}

/// Homogeneous PPP of intensity `density` restricted to `region`.
pub fn sample_ppp<R: Rng + ?Sized>(
    density: f64,
    region: &Region,
    rng: &mut R,
) -> Result<Vec<Point>, GeometryError> {
    if !(density.is_finite() && density >= 0.0) {
        return Err(GeometryError::InvalidDensity(density));
    }
    let mean = density * region.area();
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|_| GeometryError::InvalidDensity(density))?
        .sample(rng) as usize;
    Ok((0..count).map(|_| region.sample_uniform(rng)).collect())
}

/// Fading-averaged received power `tx · gain · d^-alpha`.
pub fn avg_received_power(
    tx_power_w: f64,
    array_gain: f64,
    distance: f64,
    alpha: f64,
) -> Result<f64, GeometryError> {
    if !(tx_power_w.is_finite() && tx_power_w >= 0.0) {
        return Err(GeometryError::InvalidTxPower(tx_power_w));
    }
    if !(distance.is_finite() && distance > 0.0) {
        return Err(GeometryError::InvalidDistance(distance));
    }
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(GeometryError::InvalidPathLossExponent(alpha));
    }
    Ok(tx_power_w * array_gain * distance.powf(-alpha))
}

pub fn clamp_distance(d: f64) -> f64 {
    d.max(MIN_DISTANCE_M)
}

/// One link realisation: distance plus an exponential (Rayleigh power) fade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw {
    pub small_scale_gain: f64,
    pub distance: f64,
}

impl ChannelDraw {
    pub fn sample<R: Rng + ?Sized>(distance: f64, rng: &mut R) -> Self {
        let fade: f64 = Exp1.sample(rng);
        Self { small_scale_gain: fade, distance }
    }

    pub fn instantaneous_gain(&self, alpha: f64) -> Result<f64, GeometryError> {
        if !(self.distance.is_finite() && self.distance > 0.0) {
            return Err(GeometryError::InvalidDistance(self.distance));
        }
        Ok(self.small_scale_gain * self.distance.powf(-alpha))
    }
}

/// Identifies a base station by tier index and position in that tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BsId {
    pub tier: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TierDeployment {
    pub config: TierConfig,
    pub positions: Vec<Point>,
}

/// Everything needed to draw a [`NetworkSnapshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub region: Region,
    /// Tier 0 is the macro tier.
    pub tiers: Vec<TierConfig>,
    /// Adds one macro BS at the window centre on top of the PPP draw.
    pub guaranteed_macro: bool,
    pub user_density: f64,
}

/// One random draw of all BS and user positions.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub tiers: Vec<TierDeployment>,
    pub users: Vec<Point>,
    pub rng_seed: u64,
}

impl NetworkSnapshot {
    pub fn generate(deployment: &Deployment, seed: u64) -> Result<Self, GeometryError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::generate_with(deployment, seed, &mut rng)
    }

    /// Draws with a caller-provided stream; `seed` is only recorded.
    pub fn generate_with<R: Rng + ?Sized>(
        deployment: &Deployment,
        seed: u64,
        rng: &mut R,
    ) -> Result<Self, GeometryError> {
        let mut tiers = Vec::with_capacity(deployment.tiers.len());
        for (i, config) in deployment.tiers.iter().enumerate() {
            config.validate()?;
            let mut positions = Vec::new();
            if i == 0 && deployment.guaranteed_macro {
                positions.push(deployment.region.center());
            }
            positions.extend(sample_ppp(config.density, &deployment.region, rng)?);
            tiers.push(TierDeployment { config: config.clone(), positions });
        }
        let users = sample_ppp(deployment.user_density, &deployment.region, rng)?;
        Ok(Self { tiers, users, rng_seed: seed })
    }

    pub fn bs_count(&self) -> usize {
        self.tiers.iter().map(|t| t.positions.len()).sum()
    }

    pub fn bs_position(&self, id: BsId) -> Option<Point> {
        self.tiers.get(id.tier)?.positions.get(id.index).copied()
    }

    /// All base stations in (tier, index) order.
    pub fn base_stations(&self) -> impl Iterator<Item = (BsId, &TierConfig, Point)> + '_ {
        self.tiers.iter().enumerate().flat_map(|(tier, t)| {
            t.positions
                .iter()
                .enumerate()
                .map(move |(index, p)| (BsId { tier, index }, &t.config, *p))
        })
    }
}
