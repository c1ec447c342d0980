use super::{AllocationError, AllocationInstance, CellChannels};
use crate::geometry::{clamp_distance, dbm_to_watts, Point, Region};
use crate::noma::NomaPair;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

/// Random two-tier layout: a macro BS at the centre of a disc sharing
/// every RB with its own user, and `n` small cells dropped uniformly, each
/// serving a NOMA pair nearby. All links see path loss
/// `L0 · d^-alpha` with independent Rayleigh fading per RB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallCellScenario {
    /// meters
    pub radius: f64,
    /// dBm
    pub macro_power_dbm: f64,
    /// dBm
    pub small_power_dbm: f64,
    /// Loss at 1 m, dB.
    pub reference_loss_db: f64,
    pub path_loss_exponent: f64,
    /// dBm per RB
    pub noise_dbm: f64,
    /// Cap on small-cell interference at each macro user, dBm.
    pub interference_cap_dbm: f64,
    pub resource_blocks: usize,
    /// Users of a small cell lie within this distance of it, meters.
    pub cell_radius: f64,
    /// meters
    pub min_user_distance: f64,
    pub far_share: f64,
    pub near_share: f64,
}

impl Default for SmallCellScenario {
    fn default() -> Self {
        Self {
            radius: 500.0,
            macro_power_dbm: 43.0,
            small_power_dbm: 23.0,
            reference_loss_db: 38.5,
            path_loss_exponent: 4.0,
            noise_dbm: -114.0,
            interference_cap_dbm: -95.0,
            resource_blocks: 4,
            cell_radius: 40.0,
            min_user_distance: 5.0,
            far_share: 0.6,
            near_share: 0.4,
        }
    }
}

impl SmallCellScenario {
    pub fn validate(&self) -> Result<(), AllocationError> {
        NomaPair::new(0, 1, self.far_share, self.near_share)?;
        if self.resource_blocks == 0 {
            return Err(AllocationError::NoResourceBlocks);
        }
        let positive = [self.radius, self.cell_radius, self.min_user_distance, self.path_loss_exponent];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.min_user_distance >= self.cell_radius {
            return Err(AllocationError::InvalidGain { field: "scenario geometry" });
        }
        for v in [self.macro_power_dbm, self.small_power_dbm, self.reference_loss_db, self.noise_dbm, self.interference_cap_dbm] {
            if !v.is_finite() {
                return Err(AllocationError::InvalidGain { field: "scenario power levels" });
            }
        }
        Ok(())
    }

    /// Draws an instance with `n` small cells and quota `tau`.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, tau: usize, rng: &mut R) -> Result<AllocationInstance, AllocationError> {
        self.validate()?;
        let region = Region::centered(self.radius).map_err(|_| AllocationError::InvalidGain { field: "radius" })?;
        let l0 = 10f64.powf(-self.reference_loss_db / 10.0);
        let alpha = self.path_loss_exponent;
        let to_w = |dbm: f64| dbm_to_watts(dbm).expect("finite dBm");
        let macro_p = to_w(self.macro_power_dbm);
        let r = self.resource_blocks;
        let faded = |a: &Point, b: &Point, rng: &mut R| -> Vec<f64> {
            let mean = l0 * clamp_distance(a.distance(b)).powf(-alpha);
            (0..r).map(|_| mean * Distribution::<f64>::sample(&Exp1, rng)).collect()
        };

        let bs: Vec<Point> = (0..n).map(|_| region.sample_uniform(rng)).collect();
        let users: Vec<(Point, Point)> = bs
            .iter()
            .map(|c| {
                let mut drop = || {
                    let (r0, r1) = (self.min_user_distance, self.cell_radius);
                    let d = (rng.random::<f64>() * (r1 * r1 - r0 * r0) + r0 * r0).sqrt();
                    let th = rng.random::<f64>() * std::f64::consts::TAU;
                    Point::new(c.x + d * th.cos(), c.y + d * th.sin())
                };
                let (a, b) = (drop(), drop());
                // far user = the more distant one
                if a.distance(c) >= b.distance(c) {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        let macro_users: Vec<Point> = (0..r).map(|_| region.sample_uniform(rng)).collect();
        let center = region.center();

        let mut cells = Vec::with_capacity(n);
        for (b, pos) in bs.iter().enumerate() {
            let (far, near) = users[b];
            let far_gain = faded(pos, &far, rng);
            let near_gain = faded(pos, &near, rng);
            let macro_interference_far = faded(&center, &far, rng).into_iter().map(|g| g * macro_p).collect();
            let macro_interference_near = faded(&center, &near, rng).into_iter().map(|g| g * macro_p).collect();
            let macro_user_gain = (0..r)
                .map(|rb| {
                    let mean = l0 * clamp_distance(pos.distance(&macro_users[rb])).powf(-alpha);
                    mean * Distribution::<f64>::sample(&Exp1, rng)
                })
                .collect();
            cells.push(CellChannels {
                pair: NomaPair::new(2 * b + 1, 2 * b, self.far_share, self.near_share)?,
                far_gain,
                near_gain,
                macro_interference_far,
                macro_interference_near,
                macro_user_gain,
            });
        }
        let mut cross_far = vec![vec![vec![0.0; r]; n]; n];
        let mut cross_near = vec![vec![vec![0.0; r]; n]; n];
        for j in 0..n {
            for b in 0..n {
                if j != b {
                    cross_far[j][b] = faded(&bs[j], &users[b].0, rng);
                    cross_near[j][b] = faded(&bs[j], &users[b].1, rng);
                }
            }
        }
        let instance = AllocationInstance {
            cells,
            cross_far,
            cross_near,
            resource_blocks: r,
            tau,
            max_power: to_w(self.small_power_dbm),
            interference_cap: vec![to_w(self.interference_cap_dbm); r],
            noise: to_w(self.noise_dbm),
        };
        instance.validate()?;
        Ok(instance)
    }
}
