//! Scenario data model: building geometry plus the entities placed in it.

mod format;
mod layout;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{closest_point_on_segment, Aabb, Vec2};

pub use format::{load_scenario, save_scenario, FormatError, SCENARIO_VERSION};
pub use layout::{Category, Solid, World};
pub use validate::{validate, validate_fire_source, IssueCode, ValidationIssue};

pub const DEFAULT_WALL_THICKNESS: f64 = 0.2;
pub const GRID_PITCH: f64 = 0.5;
pub const SNAP_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("scenario bounds have zero extent on at least one axis")]
    DegenerateBounds,
}

fn default_thickness() -> f64 {
    DEFAULT_WALL_THICKNESS
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSegment {
    pub a: Vec2,
    pub b: Vec2,
    #[serde(default = "default_thickness")]
    pub thickness: f64,
}

impl WallSegment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self {
            a,
            b,
            thickness: DEFAULT_WALL_THICKNESS,
        }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Door {
    #[serde(rename = "wall")]
    pub wall_index: usize,
    pub center: Vec2,
    pub width: f64,
    #[serde(default)]
    pub exit: bool,
    #[serde(default = "default_true")]
    pub open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Desk,
    Cabinet,
    Shelf,
    Plant,
    Generic,
}

impl ObstacleKind {
    pub const ALL: [ObstacleKind; 5] = [
        ObstacleKind::Desk,
        ObstacleKind::Cabinet,
        ObstacleKind::Shelf,
        ObstacleKind::Plant,
        ObstacleKind::Generic,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ObstacleShape {
    Rect { min: Vec2, max: Vec2 },
    Circle { center: Vec2, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub kind: ObstacleKind,
    #[serde(flatten)]
    pub shape: ObstacleShape,
}

impl Obstacle {
    pub fn area(&self) -> f64 {
        match self.shape {
            ObstacleShape::Rect { min, max } => Aabb::new(min, max).area(),
            ObstacleShape::Circle { radius, .. } => std::f64::consts::PI * radius.max(0.0).powi(2),
        }
    }

    pub fn bounds(&self) -> Aabb {
        match self.shape {
            ObstacleShape::Rect { min, max } => Aabb::new(min, max),
            ObstacleShape::Circle { center, radius } => Aabb::new(center, center).expanded(radius),
        }
    }

    /// Nearest point on the obstacle outline.
    pub fn closest_edge_point(&self, p: Vec2) -> Vec2 {
        match self.shape {
            ObstacleShape::Rect { min, max } => Aabb::new(min, max).closest_boundary_point(p),
            ObstacleShape::Circle { center, radius } => match (p - center).normalized() {
                Some(dir) => center + dir * radius,
                None => center + Vec2::new(radius, 0.0),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeArea {
    #[serde(flatten)]
    pub region: Aabb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpawnArea {
    pub order: u32,
    #[serde(flatten)]
    pub region: Aabb,
}

/// An sRGB color written as `#RRGGBB` in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }
}

impl FromStr for Rgb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix('#')
            .filter(|h| h.len() == 6 && h.is_ascii())
            .ok_or_else(|| format!("expected #RRGGBB, got {s:?}"))?;
        let byte = |i: usize| {
            u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| format!("bad hex digits in {s:?}"))
        };
        Ok(Rgb(byte(0)?, byte(2)?, byte(4)?))
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianType {
    pub name: String,
    /// meters per second
    pub speed: f64,
    pub radius: f64,
    pub color: Rgb,
    pub health: f64,
}

impl PedestrianType {
    pub fn adult() -> Self {
        Self {
            name: "adult".into(),
            speed: 3.0,
            radius: 0.25,
            color: Rgb(0x33, 0x66, 0xCC),
            health: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianPlacement {
    #[serde(rename = "type")]
    pub type_name: String,
    pub position: Vec2,
}

fn default_patch_rate() -> u32 {
    3
}

fn default_growth_rate() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FireSource {
    pub origin: Vec2,
    pub max_radius: f64,
    /// meters added per growth tick, before the random multiplier
    #[serde(default = "default_growth_rate")]
    pub growth_rate: f64,
    #[serde(default = "default_patch_rate")]
    pub patch_rate: u32,
    #[serde(default)]
    pub ignition_tick: u64,
}

impl FireSource {
    pub fn at(origin: Vec2, max_radius: f64) -> Self {
        Self {
            origin,
            max_radius,
            growth_rate: default_growth_rate(),
            patch_rate: default_patch_rate(),
            ignition_tick: 0,
        }
    }
}

/// Per-scenario fire and damage constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HazardSettings {
    /// Simulated seconds between fire growth ticks.
    pub grow_interval_s: f64,
    /// Radius of every spawned fire patch, and of the burning core at a source origin.
    pub patch_radius: f64,
    /// Health points lost per second of contact.
    pub damage_rate: f64,
    /// Patches per source stop spawning beyond this count.
    pub max_patches_per_source: usize,
}

impl Default for HazardSettings {
    fn default() -> Self {
        Self {
            grow_interval_s: 1.0,
            patch_radius: 0.5,
            damage_rate: 50.0,
            max_patches_per_source: 400,
        }
    }
}

/// A full static world description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub walls: Vec<WallSegment>,
    pub doors: Vec<Door>,
    pub obstacles: Vec<Obstacle>,
    pub safe_areas: Vec<SafeArea>,
    pub spawn_areas: Vec<SpawnArea>,
    pub pedestrian_types: Vec<PedestrianType>,
    pub pedestrians: Vec<PedestrianPlacement>,
    pub fire_sources: Vec<FireSource>,
    #[serde(default)]
    pub hazard: HazardSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapMode {
    Grid,
    Edge,
}

impl Scenario {
    /// Tight bounds over walls (with thickness), obstacles, safe areas and
    /// spawn areas. `None` when the scenario holds no geometry at all.
    pub fn bounds(&self) -> Option<Aabb> {
        let walls = self
            .walls
            .iter()
            .map(|w| Aabb::from_corners(w.a, w.b).expanded(w.thickness.max(0.0) / 2.0));
        let obstacles = self.obstacles.iter().map(Obstacle::bounds);
        let safe = self.safe_areas.iter().map(|s| s.region);
        let spawn = self.spawn_areas.iter().map(|s| s.region);
        walls
            .chain(obstacles)
            .chain(safe)
            .chain(spawn)
            .reduce(|acc, b| acc.union(&b))
    }

    /// Bounds with positive extent on both axes.
    pub fn checked_bounds(&self) -> Result<Aabb, WorldError> {
        match self.bounds() {
            Some(b) if b.width() > 0.0 && b.height() > 0.0 => Ok(b),
            _ => Err(WorldError::DegenerateBounds),
        }
    }

    /// Maps `p` into the unit square spanned by the scenario bounds.
    pub fn normalize_point(&self, p: Vec2) -> Result<Vec2, WorldError> {
        Ok(normalize_in(&self.checked_bounds()?, p))
    }

    pub fn pedestrian_type(&self, name: &str) -> Option<&PedestrianType> {
        self.pedestrian_types.iter().find(|t| t.name == name)
    }

    /// Indices of doors marked as exits.
    pub fn exit_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.doors
            .iter()
            .enumerate()
            .filter(|(_, d)| d.exit)
            .map(|(i, _)| i)
    }

    /// Nearest exit door to `p`; ties go to the lowest door index.
    pub fn nearest_exit(&self, p: Vec2) -> Option<(usize, &Door)> {
        let mut best: Option<(usize, &Door, f64)> = None;
        for i in self.exit_indices() {
            let door = &self.doors[i];
            let d = door.center.distance(p);
            if best.map_or(true, |(_, _, bd)| d < bd) {
                best = Some((i, door, d));
            }
        }
        best.map(|(i, d, _)| (i, d))
    }

    /// Spawn areas sorted by their curriculum order.
    pub fn ordered_spawn_areas(&self) -> Vec<&SpawnArea> {
        let mut areas: Vec<&SpawnArea> = self.spawn_areas.iter().collect();
        areas.sort_by_key(|a| a.order);
        areas
    }

    pub fn snap(&self, p: Vec2, mode: SnapMode) -> Vec2 {
        match mode {
            SnapMode::Grid => snap_to_grid(p, GRID_PITCH),
            SnapMode::Edge => self.snap_to_edge(p, SNAP_TOLERANCE),
        }
    }

    /// Nearest point on any wall centerline or obstacle outline within
    /// `tolerance`, else `p`.
    pub fn snap_to_edge(&self, p: Vec2, tolerance: f64) -> Vec2 {
        let walls = self
            .walls
            .iter()
            .map(|w| closest_point_on_segment(w.a, w.b, p));
        let obstacles = self.obstacles.iter().map(|o| o.closest_edge_point(p));
        walls
            .chain(obstacles)
            .map(|q| (q.distance(p), q))
            .filter(|(d, _)| *d <= tolerance)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map_or(p, |(_, q)| q)
    }
}

pub fn normalize_in(bounds: &Aabb, p: Vec2) -> Vec2 {
    Vec2::new(
        (p.x - bounds.min.x) / (bounds.max.x - bounds.min.x),
        (p.z - bounds.min.z) / (bounds.max.z - bounds.min.z),
    )
}

pub fn snap_to_grid(p: Vec2, pitch: f64) -> Vec2 {
    Vec2::new((p.x / pitch).round() * pitch, (p.z / pitch).round() * pitch)
}
