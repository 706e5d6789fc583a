mod common;

use metis_core::dynamics::StepOutcome;
use metis_core::reward::{choose_spawn, CurriculumState, RewardConfig, ShapingMode, WINDOW};
use metis_core::samples;
use metis_core::world::World;
use proptest::prelude::*;
use rand::Rng;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

fn cfg(mode: ShapingMode) -> RewardConfig {
    RewardConfig { shaping_mode: mode, ..Default::default() }
}

proptest! {
    #[test]
    fn step_reward_is_bounded(d_prev in 0.0..=SQRT_2, d in 0.0..=SQRT_2, collided: bool, proximity: bool) {
        let c = cfg(if proximity { ShapingMode::Proximity } else { ShapingMode::DistanceScaled });
        let max = c.max_step as f64;
        let bound = (c.step_penalty_num.abs() + c.collision_penalty_num.abs() + c.distance_coeff * SQRT_2) / max;
        let r = c.reward(d_prev, d, &StepOutcome { collided, ..Default::default() });
        prop_assert!(r.abs() <= bound + 1e-15, "{} > {}", r, bound);
    }

    #[test]
    fn potential_shaping_telescopes(ds in prop::collection::vec(0.0..=SQRT_2, 2..200)) {
        let c = cfg(ShapingMode::Potential);
        let total: f64 = ds.windows(2).map(|w| c.shaping(w[0], w[1])).sum();
        let expected = c.distance_coeff * (ds[0] - ds[ds.len() - 1]);
        prop_assert!((total - expected).abs() < 1e-12);
    }

    #[test]
    fn unlocks_never_go_back(seed in any::<u64>(), areas in 1usize..9) {
        let mut r = common::rng(seed);
        let mut cur = CurriculumState::new(areas);
        let mut last = cur.unlocked_count;
        for _ in 0..2000 {
            let area = cur.choose_area(&mut r);
            prop_assert!(cur.eligible_areas().contains(&area));
            prop_assert!(area >= 1 && area <= cur.unlocked_count);
            let ret = if r.random_bool(0.9) { 1.0 } else { -1.0 };
            cur.record_episode(area, ret).unwrap();
            prop_assert!(cur.unlocked_count >= last && cur.unlocked_count <= areas);
            prop_assert!(cur.global_window.len() <= WINDOW);
            last = cur.unlocked_count;
        }
    }

    #[test]
    fn spawns_land_inside_their_area_and_clear(seed in any::<u64>(), unlocked in 1usize..=7) {
        let s = samples::training_building();
        let world = World::new(s.clone()).unwrap();
        let areas = s.ordered_spawn_areas();
        let mut cur = CurriculumState::new(areas.len());
        cur.unlocked_count = unlocked;
        let mut r = common::rng(seed);
        for _ in 0..50 {
            let (area, p) = choose_spawn(&cur, &world, &areas, 0.25, &mut r);
            prop_assert!(cur.eligible_areas().contains(&area));
            prop_assert!(areas[area - 1].region.contains(p));
            prop_assert!(!world.disc_blocked(p, 0.25));
        }
    }
}

#[test]
fn touching_fire_immediately_returns_minus_one() {
    for mode in [ShapingMode::DistanceScaled, ShapingMode::Proximity, ShapingMode::Potential] {
        let out = StepOutcome { touched_fire: true, collided: true, ..Default::default() };
        assert_eq!(cfg(mode).reward(0.7, 0.6, &out), -1.0);
    }
}

#[test]
fn reaching_safety_replaces_the_step_reward() {
    let out = StepOutcome { entered_safe_area: true, collided: true, ..Default::default() };
    assert_eq!(cfg(ShapingMode::DistanceScaled).reward(1.0, 0.9, &out), 1.0);
}

#[test]
fn rejects_recording_in_a_locked_area() {
    let mut cur = CurriculumState::new(3);
    assert!(cur.record_episode(2, 1.0).is_err());
    assert!(cur.record_episode(0, 1.0).is_err());
    assert!(cur.global_window.is_empty());
}
