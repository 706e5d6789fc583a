//! The physical step: pedestrian kinematics with sliding collision response,
//! fire contact and damage.

mod fire;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::world::{PedestrianType, World};

pub use fire::{
    grown_radius, propagate_fire, sample_in_disc, BurningSource, Disc, FireEvent, FireField,
};

/// Fixed simulation tick.
pub const TICK_SECONDS: f64 = 0.05;

/// Maximum push-out passes per substep.
const RESOLVE_PASSES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Active,
    Safe,
    Dead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizontal {
    Left,
    Right,
    /// Only produced when the action space includes a no-op.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vertical {
    Backward,
    Forward,
    Hold,
}

/// One action per branch. Branch indices: 0 = left/backward, 1 = right/forward, 2 = hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionPair {
    pub horizontal: Horizontal,
    pub vertical: Vertical,
}

impl ActionPair {
    pub fn new(horizontal: Horizontal, vertical: Vertical) -> Self {
        Self {
            horizontal,
            vertical,
        }
    }

    pub fn from_indices(h: usize, v: usize) -> Self {
        let horizontal = match h {
            0 => Horizontal::Left,
            1 => Horizontal::Right,
            _ => Horizontal::Hold,
        };
        let vertical = match v {
            0 => Vertical::Backward,
            1 => Vertical::Forward,
            _ => Vertical::Hold,
        };
        Self {
            horizontal,
            vertical,
        }
    }

    pub fn indices(&self) -> (usize, usize) {
        let h = match self.horizontal {
            Horizontal::Left => 0,
            Horizontal::Right => 1,
            Horizontal::Hold => 2,
        };
        let v = match self.vertical {
            Vertical::Backward => 0,
            Vertical::Forward => 1,
            Vertical::Hold => 2,
        };
        (h, v)
    }

    /// World-frame unit direction, or zero when both branches hold.
    pub fn direction(&self) -> Vec2 {
        let h = match self.horizontal {
            Horizontal::Left => -1.0,
            Horizontal::Right => 1.0,
            Horizontal::Hold => 0.0,
        };
        let v = match self.vertical {
            Vertical::Backward => -1.0,
            Vertical::Forward => 1.0,
            Vertical::Hold => 0.0,
        };
        Vec2::new(h, v).normalized().unwrap_or(Vec2::ZERO)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: u32,
    pub speed: f64,
    pub radius: f64,
    pub position: Vec2,
    /// Unit vector of the most recent nonzero displacement.
    pub heading: Vec2,
    pub health: f64,
    pub status: AgentStatus,
    pub step_count: u64,
    pub cumulative_reward: f64,
}

impl AgentState {
    /// A fresh agent facing `toward` (or +x when it coincides with `position`).
    pub fn spawn(id: u32, kind: &PedestrianType, position: Vec2, toward: Vec2) -> Self {
        Self {
            id,
            speed: kind.speed,
            radius: kind.radius,
            position,
            heading: (toward - position)
                .normalized()
                .unwrap_or(Vec2::new(1.0, 0.0)),
            health: kind.health,
            status: AgentStatus::Active,
            step_count: 0,
            cumulative_reward: 0.0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == AgentStatus::Active
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOutcome {
    pub collided: bool,
    pub entered_safe_area: bool,
    pub touched_fire: bool,
}

/// Moves an active agent for one tick. Blocked motion slides along the
/// obstacle; the bounds of the world act as an outer wall. Reaching a safe
/// area marks the agent safe (checked before fire contact).
pub fn step_agent(
    world: &World,
    fires: &FireField,
    agent: &mut AgentState,
    action: ActionPair,
    dt: f64,
) -> StepOutcome {
    let mut outcome = StepOutcome::default();
    if !agent.is_active() {
        return outcome;
    }
    agent.step_count += 1;

    let displacement = action.direction() * (agent.speed * dt);
    let distance = displacement.length();
    if distance > 0.0 {
        let start = agent.position;
        // Substeps no longer than half a radius, so thin walls cannot be skipped.
        let substeps = (distance / (agent.radius * 0.5).max(1e-6)).ceil().max(1.0) as usize;
        let delta = displacement * (1.0 / substeps as f64);
        let mut pos = start;
        for _ in 0..substeps {
            let before = pos;
            let (resolved, pushed) = resolve(world, pos + delta, agent.radius);
            outcome.collided |= pushed;
            pos = match resolved {
                Some(p) => p,
                None => {
                    outcome.collided = true;
                    before
                }
            };
        }
        agent.position = pos;
        if let Some(h) = (pos - start).normalized() {
            agent.heading = h;
        }
    }

    if world.disc_in_safe_area(agent.position, agent.radius) {
        agent.status = AgentStatus::Safe;
        outcome.entered_safe_area = true;
    } else if fires.touches(agent.position, agent.radius) {
        outcome.touched_fire = true;
    }
    outcome
}

/// Pushes a disc out of every blocking solid and back inside the bounds.
/// Returns `None` if no penetration-free position was found.
fn resolve(world: &World, mut pos: Vec2, radius: f64) -> (Option<Vec2>, bool) {
    let bounds = world.bounds();
    let mut pushed = false;
    for _ in 0..RESOLVE_PASSES {
        let mut moved = false;
        for shape in world.motion_blockers() {
            let gap = shape.signed_gap(pos, radius);
            if gap < 0.0 {
                pos = pos + shape.outward_normal(pos) * (-gap);
                moved = true;
            }
        }
        let clamped = Vec2::new(
            pos.x.clamp(
                bounds.min.x + radius,
                (bounds.max.x - radius).max(bounds.min.x + radius),
            ),
            pos.z.clamp(
                bounds.min.z + radius,
                (bounds.max.z - radius).max(bounds.min.z + radius),
            ),
        );
        if clamped != pos {
            pos = clamped;
            moved = true;
        }
        pushed |= moved;
        if !moved {
            return (Some(pos), pushed);
        }
    }
    let clear = world
        .motion_blockers()
        .all(|s| s.signed_gap(pos, radius) >= -1e-9);
    (clear.then_some(pos), pushed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamageMode {
    /// Fire contact ends the episode.
    Training,
    /// Fire contact drains health at the scenario's damage rate.
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DamageOutcome {
    pub touched: bool,
    /// Training mode: the episode ends with the fire-touch outcome.
    pub terminal: bool,
    /// Simulation mode: health reached zero on this call.
    pub died: bool,
}

pub fn apply_damage(
    fires: &FireField,
    agent: &mut AgentState,
    dt: f64,
    mode: DamageMode,
) -> DamageOutcome {
    let mut out = DamageOutcome::default();
    if !agent.is_active() || !fires.touches(agent.position, agent.radius) {
        return out;
    }
    out.touched = true;
    match mode {
        DamageMode::Training => out.terminal = true,
        DamageMode::Simulation => {
            agent.health = (agent.health - fires.settings.damage_rate * dt).max(0.0);
            if agent.health <= 0.0 {
                agent.status = AgentStatus::Dead;
                out.died = true;
            }
        }
    }
    out
}
