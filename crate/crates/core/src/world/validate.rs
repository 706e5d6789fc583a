use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{FireSource, ObstacleShape, Scenario, SNAP_TOLERANCE};
use crate::geometry::{distance_to_segment, segment_aabb_distance, Aabb};

/// Machine-readable validation failure kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IssueCode {
    MissingExit,
    NoPedestrians,
    NoWalls,
    DegenerateBounds,
    DegenerateWall,
    InvalidWallThickness,
    DoorWallIndex,
    DoorOffWall,
    InvalidDoorWidth,
    InvalidObstacle,
    ObstacleOutsideBounds,
    InvalidSafeArea,
    InvalidSpawnArea,
    SpawnAreaIntersectsWall,
    SpawnOrder,
    InvalidPedestrianType,
    DuplicatePedestrianType,
    UnknownPedestrianType,
    PedestrianOutsideBounds,
    PedestrianInsideGeometry,
    InvalidFireSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    /// Offending entity, e.g. `door[2]`. Absent for scenario-wide issues.
    pub entity: Option<String>,
    pub message: String,
}

impl ValidationIssue {
    fn new(code: IssueCode, entity: Option<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            entity,
            message: message.into(),
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn rect_ok(r: &Aabb) -> bool {
    r.min.is_finite() && r.max.is_finite() && r.width() > 0.0 && r.height() > 0.0
}

/// Checks every scenario invariant. An empty list means the scenario is valid.
pub fn validate(s: &Scenario) -> Vec<ValidationIssue> {
    use IssueCode::*;
    let mut out = Vec::new();
    let mut push = |code, entity: Option<String>, msg: String| {
        out.push(ValidationIssue::new(code, entity, msg))
    };

    if !s.doors.iter().any(|d| d.exit) {
        push(
            MissingExit,
            None,
            "at least one door must be marked as an exit".into(),
        );
    }
    if s.pedestrians.is_empty() {
        push(NoPedestrians, None, "scenario has no pedestrians".into());
    }
    if s.walls.is_empty() {
        push(NoWalls, None, "scenario has no walls".into());
    }

    for (i, w) in s.walls.iter().enumerate() {
        if !w.a.is_finite() || !w.b.is_finite() || w.a == w.b {
            push(
                DegenerateWall,
                Some(format!("wall[{i}]")),
                "wall endpoints must differ".into(),
            );
        }
        if !positive(w.thickness) {
            push(
                InvalidWallThickness,
                Some(format!("wall[{i}]")),
                format!("thickness {} must be > 0", w.thickness),
            );
        }
    }

    for (i, d) in s.doors.iter().enumerate() {
        let entity = Some(format!("door[{i}]"));
        if !positive(d.width) {
            push(
                InvalidDoorWidth,
                entity.clone(),
                format!("width {} must be > 0", d.width),
            );
        }
        match s.walls.get(d.wall_index) {
            None => push(
                DoorWallIndex,
                entity,
                format!("wall index {} out of range", d.wall_index),
            ),
            Some(w) => {
                let off = distance_to_segment(w.a, w.b, d.center);
                if !(off <= SNAP_TOLERANCE) {
                    push(
                        DoorOffWall,
                        entity,
                        format!("door center is {off:.3} m from wall {}", d.wall_index),
                    );
                }
            }
        }
    }

    let bounds = if s.walls.is_empty() {
        None
    } else {
        match s.checked_bounds() {
            Ok(b) => Some(b),
            Err(_) => {
                push(
                    DegenerateBounds,
                    None,
                    "scenario bounds have zero extent".into(),
                );
                None
            }
        }
    };

    for (i, o) in s.obstacles.iter().enumerate() {
        let entity = Some(format!("obstacle[{i}]"));
        let finite = match o.shape {
            ObstacleShape::Rect { min, max } => min.is_finite() && max.is_finite(),
            ObstacleShape::Circle { center, radius } => center.is_finite() && radius.is_finite(),
        };
        if !finite || !(o.area() > 0.0) {
            push(
                InvalidObstacle,
                entity,
                "obstacle must have positive area".into(),
            );
        } else if let Some(b) = bounds {
            if !b.contains_aabb(&o.bounds()) {
                push(
                    ObstacleOutsideBounds,
                    entity,
                    "obstacle extends beyond scenario bounds".into(),
                );
            }
        }
    }

    for (i, a) in s.safe_areas.iter().enumerate() {
        if !rect_ok(&a.region) {
            push(
                InvalidSafeArea,
                Some(format!("safe_area[{i}]")),
                "safe area must have positive area".into(),
            );
        }
    }

    for (i, a) in s.spawn_areas.iter().enumerate() {
        let entity = Some(format!("spawn_area[{i}]"));
        if !rect_ok(&a.region) {
            push(
                InvalidSpawnArea,
                entity,
                "spawn area must have positive area".into(),
            );
            continue;
        }
        if let Some(j) = s
            .walls
            .iter()
            .position(|w| segment_aabb_distance(w.a, w.b, &a.region) < w.thickness / 2.0)
        {
            push(
                SpawnAreaIntersectsWall,
                entity,
                format!("spawn area overlaps wall[{j}]"),
            );
        }
    }
    let orders: BTreeSet<u32> = s.spawn_areas.iter().map(|a| a.order).collect();
    let k = s.spawn_areas.len() as u32;
    if orders.len() != s.spawn_areas.len() || orders.iter().copied().ne(1..=k) {
        push(
            SpawnOrder,
            None,
            format!("spawn area orders must be exactly 1..={k}, got {orders:?}"),
        );
    }

    let mut seen = BTreeSet::new();
    for (i, t) in s.pedestrian_types.iter().enumerate() {
        let entity = Some(format!("pedestrian_type[{i}]"));
        if !positive(t.speed) || !positive(t.radius) || !positive(t.health) {
            push(
                InvalidPedestrianType,
                entity.clone(),
                format!("type {:?} needs speed, radius and health > 0", t.name),
            );
        }
        if !seen.insert(t.name.as_str()) {
            push(
                DuplicatePedestrianType,
                entity,
                format!("type name {:?} repeated", t.name),
            );
        }
    }

    for (i, p) in s.pedestrians.iter().enumerate() {
        let entity = Some(format!("pedestrian[{i}]"));
        if s.pedestrian_type(&p.type_name).is_none() {
            push(
                UnknownPedestrianType,
                entity.clone(),
                format!("unknown type {:?}", p.type_name),
            );
        }
        if let Some(b) = bounds {
            if !p.position.is_finite() || !b.contains(p.position) {
                push(
                    PedestrianOutsideBounds,
                    entity.clone(),
                    "pedestrian outside scenario bounds".into(),
                );
                continue;
            }
        }
        let in_wall = s
            .walls
            .iter()
            .any(|w| distance_to_segment(w.a, w.b, p.position) < w.thickness / 2.0);
        let in_obstacle = s.obstacles.iter().any(|o| match o.shape {
            ObstacleShape::Rect { min, max } => Aabb::new(min, max).contains(p.position),
            ObstacleShape::Circle { center, radius } => center.distance(p.position) <= radius,
        });
        if in_wall || in_obstacle {
            push(
                PedestrianInsideGeometry,
                entity,
                "pedestrian placed inside a wall or obstacle".into(),
            );
        }
    }

    for (i, f) in s.fire_sources.iter().enumerate() {
        out.extend(fire_source_issue(f, format!("fire_source[{i}]")));
    }

    out
}

fn fire_source_issue(f: &FireSource, entity: String) -> Option<ValidationIssue> {
    (!f.origin.is_finite()
        || !positive(f.max_radius)
        || !positive(f.growth_rate)
        || f.patch_rate < 1)
        .then(|| {
            ValidationIssue::new(
                IssueCode::InvalidFireSource,
                Some(entity),
                "fire source needs max_radius > 0, growth_rate > 0, patch_rate >= 1",
            )
        })
}

/// Checks a fire source added to a running scenario: valid parameters and an
/// origin inside the scenario bounds.
pub fn validate_fire_source(s: &Scenario, f: &FireSource) -> Vec<ValidationIssue> {
    let mut out: Vec<_> = fire_source_issue(f, "fire_source".into())
        .into_iter()
        .collect();
    if out.is_empty() && !s.bounds().is_some_and(|b| b.contains(f.origin)) {
        out.push(ValidationIssue::new(
            IssueCode::InvalidFireSource,
            Some("fire_source".into()),
            "fire source origin outside scenario bounds",
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::samples;
    use crate::world::{Door, FireSource, PedestrianPlacement, SpawnArea};

    fn codes(s: &Scenario) -> Vec<IssueCode> {
        validate(s).into_iter().map(|i| i.code).collect()
    }

    #[test]
    fn empty_scenario() {
        assert_eq!(
            codes(&Scenario::default()),
            vec![
                IssueCode::MissingExit,
                IssueCode::NoPedestrians,
                IssueCode::NoWalls
            ]
        );
    }

    #[test]
    fn no_exit_door() {
        let mut s = samples::single_room();
        for d in &mut s.doors {
            d.exit = false;
        }
        assert_eq!(codes(&s), vec![IssueCode::MissingExit]);
    }

    #[test]
    fn sample_buildings_are_valid() {
        for s in [
            samples::single_room(),
            samples::training_building(),
            samples::case_study(),
        ] {
            assert_eq!(validate(&s), vec![], "{}", s.name);
        }
    }

    #[test]
    fn single_room_invariants_hold_directly() {
        let s = samples::single_room();
        // exit exists, every door sits on its wall, spawn orders are 1..K
        assert!(s.doors.iter().any(|d| d.exit));
        for d in &s.doors {
            let w = &s.walls[d.wall_index];
            assert!(distance_to_segment(w.a, w.b, d.center) < 1e-12);
        }
        let b = s.bounds().unwrap();
        for sa in &s.safe_areas {
            assert!(b.contains_aabb(&sa.region));
        }
    }

    #[test]
    fn door_off_wall_and_bad_index() {
        let mut s = samples::single_room();
        s.doors.push(Door {
            wall_index: 0,
            center: Vec2::new(2.0, 1.0),
            width: 1.0,
            exit: false,
            open: true,
        });
        s.doors.push(Door {
            wall_index: 99,
            center: Vec2::ZERO,
            width: 1.0,
            exit: false,
            open: true,
        });
        let issues = validate(&s);
        assert_eq!(issues.len(), 2);
        assert_eq!(issues[0].code, IssueCode::DoorOffWall);
        assert_eq!(issues[0].entity.as_deref(), Some("door[1]"));
        assert_eq!(issues[1].code, IssueCode::DoorWallIndex);
    }

    #[test]
    fn pedestrian_placement_issues() {
        let mut s = samples::single_room();
        let w = s.walls[0].clone();
        s.pedestrians.push(PedestrianPlacement {
            type_name: "adult".into(),
            position: (w.a + w.b) * 0.5,
        });
        s.pedestrians.push(PedestrianPlacement {
            type_name: "adult".into(),
            position: Vec2::new(1e3, 1e3),
        });
        s.pedestrians.push(PedestrianPlacement {
            type_name: "ghost".into(),
            position: Vec2::new(2.5, 2.5),
        });
        assert_eq!(
            codes(&s),
            vec![
                IssueCode::PedestrianInsideGeometry,
                IssueCode::PedestrianOutsideBounds,
                IssueCode::UnknownPedestrianType
            ]
        );
    }

    #[test]
    fn spawn_order_gaps_and_wall_overlap() {
        let mut s = samples::single_room();
        let r = s.spawn_areas[0].region;
        s.spawn_areas.push(SpawnArea {
            order: 3,
            region: r,
        });
        assert_eq!(codes(&s), vec![IssueCode::SpawnOrder]);
        s.spawn_areas[1].order = 2;
        s.spawn_areas[1].region.max.x = 10.0;
        assert_eq!(codes(&s), vec![IssueCode::SpawnAreaIntersectsWall]);
    }

    #[test]
    fn fire_source_parameters() {
        let mut s = samples::single_room();
        let mut f = FireSource::at(Vec2::new(2.0, 2.0), 1.0);
        f.patch_rate = 0;
        s.fire_sources.push(f);
        assert_eq!(codes(&s), vec![IssueCode::InvalidFireSource]);
    }

    #[test]
    fn validate_is_pure() {
        let s = samples::case_study();
        assert_eq!(validate(&s), validate(&s));
    }
}
