//! Sample buildings shipped with the simulator. Dimensions are illustrative.

use crate::geometry::{Aabb, Vec2};
use crate::world::{
    Door, FireSource, HazardSettings, Obstacle, ObstacleKind, ObstacleShape, PedestrianPlacement,
    PedestrianType, Rgb, SafeArea, Scenario, SpawnArea, WallSegment,
};

fn v(x: f64, z: f64) -> Vec2 {
    Vec2::new(x, z)
}

fn rect(x0: f64, z0: f64, x1: f64, z1: f64) -> Aabb {
    Aabb::new(v(x0, z0), v(x1, z1))
}

fn wall(x0: f64, z0: f64, x1: f64, z1: f64) -> WallSegment {
    WallSegment::new(v(x0, z0), v(x1, z1))
}

fn door(wall_index: usize, x: f64, z: f64, width: f64, exit: bool) -> Door {
    Door {
        wall_index,
        center: v(x, z),
        width,
        exit,
        open: true,
    }
}

fn boxed(kind: ObstacleKind, x0: f64, z0: f64, x1: f64, z1: f64) -> Obstacle {
    Obstacle {
        kind,
        shape: ObstacleShape::Rect {
            min: v(x0, z0),
            max: v(x1, z1),
        },
    }
}

fn plant(x: f64, z: f64) -> Obstacle {
    Obstacle {
        kind: ObstacleKind::Plant,
        shape: ObstacleShape::Circle {
            center: v(x, z),
            radius: 0.3,
        },
    }
}

fn adult_at(x: f64, z: f64) -> PedestrianPlacement {
    PedestrianPlacement {
        type_name: "adult".into(),
        position: v(x, z),
    }
}

fn spawn(order: u32, x0: f64, z0: f64, x1: f64, z1: f64) -> SpawnArea {
    SpawnArea {
        order,
        region: rect(x0, z0, x1, z1),
    }
}

/// 5 m × 5 m room, exit centered in the south wall, safe area just outside.
pub fn single_room() -> Scenario {
    Scenario {
        id: "single-room".into(),
        name: "Single room".into(),
        walls: vec![
            wall(0.0, 0.0, 5.0, 0.0),
            wall(5.0, 0.0, 5.0, 5.0),
            wall(5.0, 5.0, 0.0, 5.0),
            wall(0.0, 5.0, 0.0, 0.0),
        ],
        doors: vec![door(0, 2.5, 0.0, 1.2, true)],
        obstacles: vec![],
        safe_areas: vec![SafeArea {
            region: rect(1.5, -1.5, 3.5, -0.3),
        }],
        spawn_areas: vec![spawn(1, 0.5, 0.5, 4.5, 4.5)],
        pedestrian_types: vec![PedestrianType::adult()],
        pedestrians: vec![adult_at(2.5, 2.5)],
        fire_sources: vec![],
        hazard: HazardSettings::default(),
    }
}

/// Training building: a hall along the south side with the exit, four rooms
/// north of it, seven curriculum spawn areas ordered from the hall outwards,
/// and two dummy fires.
pub fn training_building() -> Scenario {
    Scenario {
        id: "training-building".into(),
        name: "Training building (4 rooms + hall)".into(),
        walls: vec![
            wall(0.0, 0.0, 16.0, 0.0),
            wall(16.0, 0.0, 16.0, 12.0),
            wall(16.0, 12.0, 0.0, 12.0),
            wall(0.0, 12.0, 0.0, 0.0),
            wall(0.0, 4.0, 16.0, 4.0),
            wall(4.0, 4.0, 4.0, 12.0),
            wall(8.0, 4.0, 8.0, 12.0),
            wall(12.0, 4.0, 12.0, 12.0),
        ],
        doors: vec![
            door(0, 8.0, 0.0, 1.6, true),
            door(4, 2.0, 4.0, 1.2, false),
            door(4, 6.0, 4.0, 1.2, false),
            door(4, 10.0, 4.0, 1.2, false),
            door(4, 14.0, 4.0, 1.2, false),
        ],
        obstacles: vec![
            boxed(ObstacleKind::Desk, 1.0, 8.0, 3.0, 9.0),
            boxed(ObstacleKind::Cabinet, 4.4, 10.5, 5.4, 11.6),
            boxed(ObstacleKind::Desk, 9.0, 6.5, 11.0, 7.5),
            boxed(ObstacleKind::Shelf, 12.4, 9.0, 13.0, 11.6),
            plant(15.4, 4.6),
        ],
        safe_areas: vec![SafeArea {
            region: rect(7.0, -1.5, 9.0, -0.3),
        }],
        spawn_areas: vec![
            spawn(1, 5.5, 0.6, 10.5, 3.4),
            spawn(2, 0.6, 0.6, 5.0, 3.4),
            spawn(3, 11.0, 0.6, 15.4, 3.4),
            spawn(4, 4.6, 4.6, 7.4, 11.4),
            spawn(5, 8.6, 4.6, 11.4, 11.4),
            spawn(6, 0.6, 4.6, 3.4, 11.4),
            spawn(7, 12.6, 4.6, 15.4, 11.4),
        ],
        pedestrian_types: vec![PedestrianType::adult()],
        pedestrians: vec![
            adult_at(8.0, 2.0),
            adult_at(6.0, 8.0),
            adult_at(10.0, 9.0),
            adult_at(2.0, 6.0),
        ],
        fire_sources: vec![
            FireSource::at(v(2.0, 10.5), 0.6),
            FireSource::at(v(14.0, 7.0), 0.6),
        ],
        hazard: HazardSettings::default(),
    }
}

/// Case-study layout: an empty hall connected to west, east and north rooms,
/// the exit in the south wall, 25 pedestrians and a fire in every room.
pub fn case_study() -> Scenario {
    let mut pedestrians = Vec::new();
    // west room: x 0..6, z 0..8
    for (x, z) in [
        (1.0, 1.0),
        (3.0, 1.2),
        (5.0, 2.0),
        (1.2, 4.0),
        (4.5, 5.5),
        (1.0, 7.0),
        (3.5, 7.2),
    ] {
        pedestrians.push(adult_at(x, z));
    }
    // east room: x 12..18, z 0..8
    for (x, z) in [
        (13.0, 1.0),
        (17.0, 1.0),
        (13.0, 6.5),
        (15.0, 5.0),
        (17.0, 7.0),
        (14.5, 3.2),
        (16.8, 4.0),
    ] {
        pedestrians.push(adult_at(x, z));
    }
    // north room: x 0..18, z 8..14
    for (x, z) in [
        (1.0, 9.0),
        (3.0, 13.0),
        (5.5, 9.5),
        (7.0, 12.5),
        (8.5, 10.0),
        (10.0, 13.0),
        (11.5, 9.2),
        (13.0, 11.0),
        (15.0, 13.2),
        (16.0, 9.5),
        (17.2, 12.0),
    ] {
        pedestrians.push(adult_at(x, z));
    }

    Scenario {
        id: "case-study".into(),
        name: "Case study (3 rooms + hall, 25 pedestrians)".into(),
        walls: vec![
            wall(0.0, 0.0, 18.0, 0.0),
            wall(18.0, 0.0, 18.0, 14.0),
            wall(18.0, 14.0, 0.0, 14.0),
            wall(0.0, 14.0, 0.0, 0.0),
            wall(6.0, 0.0, 6.0, 8.0),
            wall(12.0, 0.0, 12.0, 8.0),
            wall(0.0, 8.0, 18.0, 8.0),
        ],
        doors: vec![
            door(0, 9.0, 0.0, 1.6, true),
            door(4, 6.0, 4.0, 1.2, false),
            door(5, 12.0, 4.0, 1.2, false),
            door(6, 9.0, 8.0, 1.2, false),
        ],
        obstacles: vec![
            boxed(ObstacleKind::Desk, 1.5, 2.5, 3.5, 3.3),
            boxed(ObstacleKind::Cabinet, 0.2, 5.0, 0.8, 6.0),
            boxed(ObstacleKind::Shelf, 2.0, 5.0, 3.6, 5.4),
            plant(5.5, 7.5),
            boxed(ObstacleKind::Desk, 14.0, 1.5, 16.0, 2.3),
            boxed(ObstacleKind::Cabinet, 12.3, 2.6, 13.0, 3.8),
            boxed(ObstacleKind::Shelf, 15.5, 5.8, 17.8, 6.2),
            plant(12.5, 7.5),
            boxed(ObstacleKind::Desk, 2.0, 10.5, 4.0, 11.3),
            boxed(ObstacleKind::Desk, 6.0, 10.5, 8.0, 11.3),
            boxed(ObstacleKind::Shelf, 8.0, 8.3, 8.4, 9.6),
            boxed(ObstacleKind::Shelf, 9.6, 8.3, 10.0, 9.6),
            boxed(ObstacleKind::Cabinet, 11.0, 13.0, 12.5, 13.8),
            boxed(ObstacleKind::Desk, 14.0, 10.5, 16.0, 11.3),
            plant(0.6, 13.4),
            plant(17.4, 8.6),
        ],
        safe_areas: vec![SafeArea {
            region: rect(7.5, -1.5, 10.5, -0.3),
        }],
        spawn_areas: vec![],
        pedestrian_types: vec![PedestrianType {
            name: "adult".into(),
            speed: 3.0,
            radius: 0.25,
            color: Rgb(0x33, 0x66, 0xCC),
            health: 100.0,
        }],
        pedestrians,
        fire_sources: vec![
            FireSource::at(v(3.0, 6.5), 2.5),
            FireSource::at(v(15.0, 3.5), 2.5),
            FireSource::at(v(12.0, 12.0), 3.0),
        ],
        hazard: HazardSettings::default(),
    }
}

/// All shipped samples, keyed by file stem.
pub fn all() -> Vec<(&'static str, Scenario)> {
    vec![
        ("single_room", single_room()),
        ("training_building", training_building()),
        ("case_study", case_study()),
    ]
}
