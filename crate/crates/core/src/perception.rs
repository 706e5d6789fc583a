//! Per-agent observations: three raycast sweeps plus six hand-computed
//! features (normalized exit position, normalized agent position, and the
//! unit direction from agent to exit).

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentState, FireField};
use crate::geometry::{ray_circle, Vec2};
use crate::world::{Category, Door, World};

/// Length of the default observation vector.
pub const OBSERVATION_LEN: usize = 70;

/// Bit set over [`Category`].
/// Serialized as a list of category names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<Category>", from = "Vec<Category>")]
pub struct CategorySet(u8);

impl From<CategorySet> for Vec<Category> {
    fn from(set: CategorySet) -> Self {
        set.iter().collect()
    }
}

impl From<Vec<Category>> for CategorySet {
    fn from(cats: Vec<Category>) -> Self {
        CategorySet::of(&cats)
    }
}

impl CategorySet {
    pub const fn empty() -> Self {
        Self(0)
    }

    pub const fn of(cats: &[Category]) -> Self {
        let mut bits = 0u8;
        let mut i = 0;
        while i < cats.len() {
            bits |= 1 << cats[i] as u8;
            i += 1;
        }
        Self(bits)
    }

    pub const fn contains(self, c: Category) -> bool {
        self.0 & (1 << c as u8) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Category> {
        [
            Category::StaticObject,
            Category::Fire,
            Category::Door,
            Category::ExitDoor,
            Category::Wall,
        ]
        .into_iter()
        .filter(move |c| self.contains(*c))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub ray_count: usize,
    /// meters
    pub ray_length: f64,
    /// total sweep, degrees
    pub arc: f64,
    pub detectable: CategorySet,
    pub blockers: CategorySet,
}

impl SensorConfig {
    /// Short range: static objects and fires, blocked by walls and closed doors.
    pub const fn near_hazards() -> Self {
        Self {
            ray_count: 20,
            ray_length: 15.0,
            arc: 140.0,
            detectable: CategorySet::of(&[Category::StaticObject, Category::Fire]),
            blockers: CategorySet::of(&[Category::Wall, Category::Door]),
        }
    }

    /// Mid range doors, exits and walls in a narrow arc.
    pub const fn near_doors() -> Self {
        Self {
            ray_count: 20,
            ray_length: 25.0,
            arc: 80.0,
            detectable: CategorySet::of(&[Category::Door, Category::ExitDoor, Category::Wall]),
            blockers: CategorySet::empty(),
        }
    }

    /// Long range doors, exits and walls.
    pub const fn far_doors() -> Self {
        Self {
            ray_count: 24,
            ray_length: 50.0,
            arc: 140.0,
            detectable: CategorySet::of(&[Category::Door, Category::ExitDoor, Category::Wall]),
            blockers: CategorySet::empty(),
        }
    }

    /// Ray angles relative to the heading, radians, in emission order.
    pub fn ray_offsets(&self) -> Vec<f64> {
        let arc = self.arc.to_radians();
        if self.ray_count == 1 {
            return vec![0.0];
        }
        let step = arc / (self.ray_count - 1) as f64;
        (0..self.ray_count)
            .map(|i| -arc / 2.0 + i as f64 * step)
            .collect()
    }
}

/// How each ray is written into the observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayEncoding {
    /// One normalized hit distance per ray.
    #[default]
    Distance,
    /// Hit distance followed by a one-hot over the sensor's detectable categories.
    DistanceWithCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub sensors: Vec<SensorConfig>,
    pub encoding: RayEncoding,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            sensors: vec![
                SensorConfig::near_hazards(),
                SensorConfig::near_doors(),
                SensorConfig::far_doors(),
            ],
            encoding: RayEncoding::Distance,
        }
    }
}

impl PerceptionConfig {
    pub fn observation_len(&self) -> usize {
        let per_ray = |s: &SensorConfig| match self.encoding {
            RayEncoding::Distance => 1,
            RayEncoding::DistanceWithCategory => 1 + s.detectable.len(),
        };
        self.sensors
            .iter()
            .map(|s| s.ray_count * per_ray(s))
            .sum::<usize>()
            + 6
    }
}

/// Nearest hit along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Normalized distance in [0, 1]; 1.0 when nothing detectable was hit.
    pub feature: f64,
    pub category: Option<Category>,
}

/// Casts one ray. The nearest solid among detectable and blocking categories
/// decides: a detectable hit yields `distance / ray_length`, anything else 1.0.
pub fn cast_ray(
    world: &World,
    fires: &FireField,
    origin: Vec2,
    dir: Vec2,
    cfg: &SensorConfig,
) -> RayHit {
    let mut best_t = f64::INFINITY;
    let mut best: Option<Category> = None;
    let mut consider = |t: Option<f64>, cat: Category, detect: bool| {
        if let Some(t) = t {
            if t <= cfg.ray_length && t < best_t {
                best_t = t;
                best = detect.then_some(cat);
            }
        }
    };
    for solid in world.solids() {
        let cat = solid.category;
        let detect = cfg.detectable.contains(cat);
        // exit doors and open doors never block
        let block = cfg.blockers.contains(cat) && (cat != Category::Door || solid.closed_door);
        if detect || block {
            consider(solid.shape.ray_entry(origin, dir, 0.0), cat, detect);
        }
    }
    let fire_detect = cfg.detectable.contains(Category::Fire);
    if fire_detect || cfg.blockers.contains(Category::Fire) {
        for disc in fires.hazard_discs() {
            consider(
                ray_circle(origin, dir, disc.center, disc.radius),
                Category::Fire,
                fire_detect,
            );
        }
    }
    match best {
        Some(cat) => RayHit {
            feature: best_t / cfg.ray_length,
            category: Some(cat),
        },
        None => RayHit {
            feature: 1.0,
            category: None,
        },
    }
}

/// All rays of one sensor, from `heading − arc/2` to `heading + arc/2`.
pub fn sweep(
    world: &World,
    fires: &FireField,
    agent: &AgentState,
    cfg: &SensorConfig,
) -> Vec<RayHit> {
    cfg.ray_offsets()
        .into_iter()
        .map(|off| {
            cast_ray(
                world,
                fires,
                agent.position,
                agent.heading.rotated(off),
                cfg,
            )
        })
        .collect()
}

/// The observation vector. With the default configuration it holds exactly
/// [`OBSERVATION_LEN`] values: 20 + 20 + 24 ray features, normalized exit
/// (x, z), normalized agent (x, z), unit direction agent → exit (x, z).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The six trailing hand-computed features.
    pub fn manual(&self) -> &[f64] {
        &self.0[self.0.len() - 6..]
    }

    pub fn rays(&self) -> &[f64] {
        &self.0[..self.0.len() - 6]
    }
}

pub fn observe(
    world: &World,
    fires: &FireField,
    agent: &AgentState,
    exit: &Door,
    cfg: &PerceptionConfig,
) -> Observation {
    let mut values = Vec::with_capacity(cfg.observation_len());
    for sensor in &cfg.sensors {
        for hit in sweep(world, fires, agent, sensor) {
            values.push(hit.feature);
            if cfg.encoding == RayEncoding::DistanceWithCategory {
                values.extend(
                    sensor
                        .detectable
                        .iter()
                        .map(|c| f64::from(u8::from(hit.category == Some(c)))),
                );
            }
        }
    }
    let exit_n = world.normalize(exit.center);
    let agent_n = world.normalize(agent.position);
    let dir = (exit.center - agent.position)
        .normalized()
        .unwrap_or(Vec2::ZERO);
    values.extend([exit_n.x, exit_n.z, agent_n.x, agent_n.z, dir.x, dir.z]);
    Observation(values)
}

/// Observation relative to the nearest exit door. `None` if the scenario has no exit.
pub fn observe_nearest_exit(
    world: &World,
    fires: &FireField,
    agent: &AgentState,
    cfg: &PerceptionConfig,
) -> Option<Observation> {
    let (_, exit) = world.scenario().nearest_exit(agent.position)?;
    Some(observe(world, fires, agent, exit, cfg))
}
