//! Per-step rewards and the spawn-area curriculum.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::StepOutcome;
use crate::geometry::Vec2;
use crate::world::{SpawnArea, World};

/// Rolling window length for curriculum decisions.
pub const WINDOW: usize = 20;
/// Mean return that unlocks the next area.
pub const UNLOCK_THRESHOLD: f64 = 0.925;
/// How many most-recently-unlocked areas are eligible before the final stage.
pub const RECENT_AREAS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingMode {
    /// `d · coeff / max_step`: grows with distance from the exit.
    #[default]
    DistanceScaled,
    /// `(√2 − d) · coeff / max_step`: grows as the agent closes in.
    Proximity,
    /// `coeff · (d_prev − d)`: telescopes to `coeff · (d_start − d_end)`.
    Potential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub max_step: u64,
    pub step_penalty_num: f64,
    pub collision_penalty_num: f64,
    pub distance_coeff: f64,
    pub terminal_safe: f64,
    pub terminal_fire: f64,
    pub shaping_mode: ShapingMode,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            max_step: 10_000,
            step_penalty_num: -0.4,
            collision_penalty_num: -0.3,
            distance_coeff: 0.3,
            terminal_safe: 1.0,
            terminal_fire: -1.0,
            shaping_mode: ShapingMode::DistanceScaled,
        }
    }
}

/// Distance between normalized exit and normalized agent positions.
pub fn normalized_distance(world: &World, exit: Vec2, agent: Vec2) -> f64 {
    world.normalize(exit).distance(world.normalize(agent))
}

impl RewardConfig {
    pub fn shaping(&self, d_prev: f64, d: f64) -> f64 {
        let scale = self.distance_coeff / self.max_step as f64;
        match self.shaping_mode {
            ShapingMode::DistanceScaled => d * scale,
            ShapingMode::Proximity => (std::f64::consts::SQRT_2 - d) * scale,
            ShapingMode::Potential => self.distance_coeff * (d_prev - d),
        }
    }

    /// Reward from normalized exit distances before (`d_prev`) and after (`d`)
    /// the step. Terminal outcomes replace the step reward.
    pub fn reward(&self, d_prev: f64, d: f64, outcome: &StepOutcome) -> f64 {
        if outcome.entered_safe_area {
            return self.terminal_safe;
        }
        if outcome.touched_fire {
            return self.terminal_fire;
        }
        let max = self.max_step as f64;
        let mut r = self.step_penalty_num / max;
        if outcome.collided {
            r += self.collision_penalty_num / max;
        }
        r + self.shaping(d_prev, d)
    }
}

/// Reward for one step of an agent that moved from `prev_position` to
/// `position` relative to `exit`.
pub fn step_reward(
    cfg: &RewardConfig,
    world: &World,
    exit: Vec2,
    prev_position: Vec2,
    position: Vec2,
    outcome: &StepOutcome,
) -> f64 {
    let d_prev = normalized_distance(world, exit, prev_position);
    let d = normalized_distance(world, exit, position);
    cfg.reward(d_prev, d, outcome)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurriculumError {
    #[error("area {area} is not unlocked (unlocked: 1..={unlocked})")]
    InvalidArea { area: usize, unlocked: usize },
}

/// Spawn-area unlock progress. Areas are numbered 1..=K in curriculum order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub area_count: usize,
    pub unlocked_count: usize,
    pub global_window: VecDeque<f64>,
    pub per_area_window: Vec<VecDeque<f64>>,
    pub all_unlocked_final: bool,
    /// Clear the global window after each unlock.
    pub reset_on_unlock: bool,
}

fn mean(w: &VecDeque<f64>) -> f64 {
    w.iter().sum::<f64>() / w.len() as f64
}

fn push_window(w: &mut VecDeque<f64>, v: f64) {
    if w.len() == WINDOW {
        w.pop_front();
    }
    w.push_back(v);
}

impl CurriculumState {
    pub fn new(area_count: usize) -> Self {
        let area_count = area_count.max(1);
        Self {
            area_count,
            unlocked_count: 1,
            global_window: VecDeque::with_capacity(WINDOW),
            per_area_window: vec![VecDeque::with_capacity(WINDOW); area_count],
            all_unlocked_final: false,
            reset_on_unlock: true,
        }
    }

    /// Folds one finished episode into the windows and applies the unlock
    /// and final-stage rules.
    pub fn record_episode(
        &mut self,
        area: usize,
        episode_return: f64,
    ) -> Result<(), CurriculumError> {
        if area == 0 || area > self.unlocked_count {
            return Err(CurriculumError::InvalidArea {
                area,
                unlocked: self.unlocked_count,
            });
        }
        push_window(&mut self.global_window, episode_return);
        push_window(&mut self.per_area_window[area - 1], episode_return);

        if self.unlocked_count < self.area_count
            && self.global_window.len() == WINDOW
            && mean(&self.global_window) >= UNLOCK_THRESHOLD
        {
            self.unlocked_count += 1;
            if self.reset_on_unlock {
                self.global_window.clear();
            }
        }
        if self.unlocked_count == self.area_count && !self.all_unlocked_final {
            let windows = &self.per_area_window;
            if windows.iter().all(|w| !w.is_empty()) {
                let avg = windows.iter().map(mean).sum::<f64>() / windows.len() as f64;
                self.all_unlocked_final = avg >= UNLOCK_THRESHOLD;
            }
        }
        Ok(())
    }

    /// Areas (1-based) a new episode may start in.
    pub fn eligible_areas(&self) -> std::ops::RangeInclusive<usize> {
        if self.all_unlocked_final {
            1..=self.area_count
        } else {
            let lo = self.unlocked_count.saturating_sub(RECENT_AREAS) + 1;
            lo..=self.unlocked_count
        }
    }

    /// Uniformly picks an eligible area.
    pub fn choose_area<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(self.eligible_areas())
    }

    pub fn mean_global(&self) -> Option<f64> {
        (!self.global_window.is_empty()).then(|| mean(&self.global_window))
    }
}

/// Attempts at a clear spawn point before falling back to the area center.
const SPAWN_ATTEMPTS: usize = 64;

/// Chooses an area and a uniform position in it whose disc of `radius`
/// overlaps no wall or obstacle. Returns the 1-based area and the position.
pub fn choose_spawn<R: Rng + ?Sized>(
    cur: &CurriculumState,
    world: &World,
    areas: &[&SpawnArea],
    radius: f64,
    rng: &mut R,
) -> (usize, Vec2) {
    let area = cur.choose_area(rng);
    let region = areas[area - 1].region;
    for _ in 0..SPAWN_ATTEMPTS {
        let p = Vec2::new(
            rng.random_range(region.min.x..=region.max.x),
            rng.random_range(region.min.z..=region.max.z),
        );
        if !world.disc_blocked(p, radius) {
            return (area, p);
        }
    }
    (area, region.center())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn outcome(collided: bool) -> StepOutcome {
        StepOutcome {
            collided,
            ..Default::default()
        }
    }

    #[test]
    fn step_cost_at_zero_distance() {
        let mut cfg = RewardConfig::default();
        assert!((cfg.reward(0.0, 0.0, &outcome(false)) - (-4.0e-5)).abs() < 1e-12);
        cfg.shaping_mode = ShapingMode::Potential;
        assert!((cfg.reward(0.0, 0.0, &outcome(false)) - (-4.0e-5)).abs() < 1e-12);
        cfg.shaping_mode = ShapingMode::Proximity;
        let expect = -4.0e-5 + 2f64.sqrt() * 0.3 / 10_000.0;
        assert!((cfg.reward(0.0, 0.0, &outcome(false)) - expect).abs() < 1e-12);
    }

    #[test]
    fn distance_scaled_collision_at_unit_distance() {
        let cfg = RewardConfig::default();
        let r = cfg.reward(1.0, 1.0, &outcome(true));
        assert!((r - (-0.4 / 1e4 - 0.3 / 1e4 + 0.3 / 1e4)).abs() < 1e-12);
        assert!((r - (-4.0e-5)).abs() < 1e-12);
    }

    #[test]
    fn terminals_override() {
        let cfg = RewardConfig::default();
        let safe = StepOutcome {
            entered_safe_area: true,
            collided: true,
            ..Default::default()
        };
        assert_eq!(cfg.reward(0.7, 0.9, &safe), 1.0);
        let fire = StepOutcome {
            touched_fire: true,
            ..Default::default()
        };
        assert_eq!(cfg.reward(0.7, 0.9, &fire), -1.0);
    }

    #[test]
    fn potential_telescopes() {
        let cfg = RewardConfig {
            shaping_mode: ShapingMode::Potential,
            ..Default::default()
        };
        let ds = [1.2, 1.1, 1.15, 0.8, 0.3, 0.31, 0.05];
        let total: f64 = ds.windows(2).map(|w| cfg.shaping(w[0], w[1])).sum();
        assert!((total - 0.3 * (1.2 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn unlock_at_threshold() {
        let mut c = CurriculumState::new(3);
        for _ in 0..20 {
            c.record_episode(1, 0.93).unwrap();
        }
        assert_eq!(c.unlocked_count, 2);
        assert!(c.global_window.is_empty());

        let mut c = CurriculumState::new(3);
        for _ in 0..20 {
            c.record_episode(1, 0.92).unwrap();
        }
        assert_eq!(c.unlocked_count, 1);

        let mut c = CurriculumState::new(3);
        for _ in 0..19 {
            c.record_episode(1, 1.0).unwrap();
        }
        assert_eq!(c.unlocked_count, 1);
    }

    #[test]
    fn invalid_area() {
        let mut c = CurriculumState::new(3);
        assert_eq!(
            c.record_episode(2, 1.0),
            Err(CurriculumError::InvalidArea {
                area: 2,
                unlocked: 1
            })
        );
        assert!(c.record_episode(0, 1.0).is_err());
    }

    #[test]
    fn final_stage_uses_per_area_average() {
        let mut c = CurriculumState::new(2);
        for _ in 0..20 {
            c.record_episode(1, 0.95).unwrap();
        }
        assert_eq!(c.unlocked_count, 2);
        assert!(!c.all_unlocked_final);
        c.record_episode(2, 0.85).unwrap();
        // (0.95 + 0.85) / 2 = 0.90
        assert!(!c.all_unlocked_final);
        for _ in 0..19 {
            c.record_episode(2, 0.95).unwrap();
        }
        // area 2 mean = (0.85 + 19·0.95)/20 = 0.945, average with 0.95 ≥ 0.925
        assert!(c.all_unlocked_final);
        assert_eq!(c.eligible_areas(), 1..=2);
    }

    #[test]
    fn eligible_areas_are_most_recent_five() {
        let mut c = CurriculumState::new(9);
        assert_eq!(c.eligible_areas(), 1..=1);
        c.unlocked_count = 3;
        assert_eq!(c.eligible_areas(), 1..=3);
        c.unlocked_count = 7;
        assert_eq!(c.eligible_areas(), 3..=7);
    }

    #[test]
    fn spawn_points_are_clear() {
        let s = samples::training_building();
        let world = World::new(s.clone()).unwrap();
        let areas = s.ordered_spawn_areas();
        let mut c = CurriculumState::new(areas.len());
        c.all_unlocked_final = true;
        c.unlocked_count = areas.len();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let (a, p) = choose_spawn(&c, &world, &areas, 0.25, &mut rng);
            assert!(areas[a - 1].region.contains(p));
            assert!(!world.disc_blocked(p, 0.25));
        }
    }
}
