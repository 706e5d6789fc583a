use serde::{Deserialize, Serialize};

use super::{normalize_in, ObstacleShape, Scenario, WorldError};
use crate::geometry::{Aabb, Shape, Vec2};

/// What a sensor ray can tell apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    StaticObject,
    Fire,
    Door,
    ExitDoor,
    Wall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solid {
    pub shape: Shape,
    pub category: Category,
    /// Closed non-exit doors; always false for other categories.
    pub closed_door: bool,
}

impl Solid {
    /// Whether a moving pedestrian is stopped by this solid.
    pub fn blocks_motion(&self) -> bool {
        match self.category {
            Category::Wall | Category::StaticObject => true,
            Category::Door => self.closed_door,
            Category::ExitDoor | Category::Fire => false,
        }
    }
}

/// A scenario compiled into solids: walls split around their doors, door
/// spans, and obstacles. Immutable once built.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Scenario,
    bounds: Aabb,
    solids: Vec<Solid>,
}

impl World {
    pub fn new(scenario: Scenario) -> Result<Self, WorldError> {
        let bounds = scenario.checked_bounds()?;
        let solids = compile(&scenario);
        Ok(Self {
            scenario,
            bounds,
            solids,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn solids(&self) -> &[Solid] {
        &self.solids
    }

    pub fn normalize(&self, p: Vec2) -> Vec2 {
        normalize_in(&self.bounds, p)
    }

    pub fn motion_blockers(&self) -> impl Iterator<Item = &Shape> + '_ {
        self.solids
            .iter()
            .filter(|s| s.blocks_motion())
            .map(|s| &s.shape)
    }

    /// Whether a disc at `center` overlaps any movement-blocking solid.
    pub fn disc_blocked(&self, center: Vec2, radius: f64) -> bool {
        self.motion_blockers()
            .any(|s| s.signed_gap(center, radius) < 0.0)
    }

    /// Whether a disc touches any safe area.
    pub fn disc_in_safe_area(&self, center: Vec2, radius: f64) -> bool {
        self.scenario
            .safe_areas
            .iter()
            .any(|a| a.region.distance(center) <= radius)
    }
}

fn compile(s: &Scenario) -> Vec<Solid> {
    let mut solids = Vec::new();
    for (wi, wall) in s.walls.iter().enumerate() {
        let len = wall.length();
        let radius = wall.thickness / 2.0;
        let Some(dir) = (wall.b - wall.a).normalized() else {
            continue;
        };
        let at = |t: f64| wall.a + dir * t;

        let mut gaps: Vec<(f64, f64, &super::Door)> = s
            .doors
            .iter()
            .filter(|d| d.wall_index == wi && d.width > 0.0)
            .map(|d| {
                let t = (d.center - wall.a).dot(dir);
                (
                    (t - d.width / 2.0).max(0.0),
                    (t + d.width / 2.0).min(len),
                    d,
                )
            })
            .filter(|(lo, hi, _)| hi > lo)
            .collect();
        gaps.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut cursor = 0.0;
        for &(lo, hi, door) in &gaps {
            if lo > cursor {
                solids.push(Solid {
                    shape: Shape::Capsule {
                        a: at(cursor),
                        b: at(lo),
                        radius,
                    },
                    category: Category::Wall,
                    closed_door: false,
                });
            }
            solids.push(Solid {
                shape: Shape::Capsule {
                    a: at(lo),
                    b: at(hi),
                    radius,
                },
                category: if door.exit {
                    Category::ExitDoor
                } else {
                    Category::Door
                },
                closed_door: !door.exit && !door.open,
            });
            cursor = cursor.max(hi);
        }
        if len > cursor {
            solids.push(Solid {
                shape: Shape::Capsule {
                    a: at(cursor),
                    b: wall.b,
                    radius,
                },
                category: Category::Wall,
                closed_door: false,
            });
        }
    }
    for o in &s.obstacles {
        let shape = match o.shape {
            ObstacleShape::Rect { min, max } => Shape::Rect(Aabb::new(min, max)),
            ObstacleShape::Circle { center, radius } => Shape::Circle { center, radius },
        };
        solids.push(Solid {
            shape,
            category: Category::StaticObject,
            closed_door: false,
        });
    }
    solids
}
