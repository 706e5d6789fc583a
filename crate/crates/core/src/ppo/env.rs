//! The step/observe contract the trainer drives, and the evacuation
//! environment used for training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::{put_f64, put_rng, put_u32, put_u64, put_u8, CheckpointError, Reader};
use crate::dynamics::{
    apply_damage, step_agent, ActionPair, AgentState, AgentStatus, DamageMode, FireField,
    TICK_SECONDS,
};
use crate::geometry::Vec2;
use crate::perception::{observe, PerceptionConfig};
use crate::reward::{choose_spawn, step_reward, CurriculumState, RewardConfig};
use crate::world::{
    validate, PedestrianType, Scenario, SpawnArea, ValidationIssue, World, WorldError,
};

/// Result of one agent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    /// The episode ended (terminal outcome or truncation); the agent was reset.
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub agent: usize,
    /// 1-based spawn area, 0 when the environment has no curriculum.
    pub area: usize,
    pub episode_return: f64,
    pub length: u64,
}

/// A set of independent agents stepped one at a time. Finished episodes
/// reset their agent inside [`Environment::step`].
pub trait Environment {
    fn observation_len(&self) -> usize;
    fn agent_count(&self) -> usize;
    /// Writes the observation of `agent` into `out` (length [`Self::observation_len`]).
    fn observe(&self, agent: usize, out: &mut [f64]);
    fn step(&mut self, agent: usize, action: ActionPair) -> (Transition, Option<EpisodeRecord>);

    fn curriculum(&self) -> Option<&CurriculumState> {
        None
    }

    fn set_curriculum(&mut self, _curriculum: CurriculumState) {}

    /// Runtime state (agents, RNG) for checkpointing.
    fn save_state(&self) -> Vec<u8>;
    fn load_state(&mut self, bytes: &[u8]) -> Result<(), CheckpointError>;
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("scenario is invalid ({} issues)", .0.len())]
    Invalid(Vec<ValidationIssue>),
    #[error("training needs at least one spawn area")]
    NoSpawnAreas,
    #[error("training needs at least one agent")]
    NoAgents,
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone)]
struct Slot {
    state: AgentState,
    area: usize,
    episode_return: f64,
}

/// Training world: static dummy fires, curriculum spawning, shaped rewards
/// and truncation at `max_step`. Agents never see each other.
#[derive(Debug, Clone)]
pub struct EvacuationEnv {
    world: World,
    fires: FireField,
    perception: PerceptionConfig,
    reward: RewardConfig,
    areas: Vec<SpawnArea>,
    kind: PedestrianType,
    curriculum: CurriculumState,
    slots: Vec<Slot>,
    rng: ChaCha8Rng,
}

impl EvacuationEnv {
    pub fn new(
        scenario: &Scenario,
        reward: RewardConfig,
        perception: PerceptionConfig,
        agents: usize,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let issues = validate(scenario);
        if !issues.is_empty() {
            return Err(EnvError::Invalid(issues));
        }
        if scenario.spawn_areas.is_empty() {
            return Err(EnvError::NoSpawnAreas);
        }
        if agents == 0 {
            return Err(EnvError::NoAgents);
        }
        let areas: Vec<SpawnArea> = scenario
            .ordered_spawn_areas()
            .into_iter()
            .cloned()
            .collect();
        let kind = scenario
            .pedestrian_types
            .first()
            .cloned()
            .unwrap_or_else(PedestrianType::adult);
        let fires = FireField::dummy(scenario);
        let world = World::new(scenario.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // keep the environment stream apart from the trainer's
        rng.set_stream(1);
        let mut env = Self {
            world,
            fires,
            perception,
            reward,
            curriculum: CurriculumState::new(areas.len()),
            areas,
            kind,
            slots: Vec::with_capacity(agents),
            rng,
        };
        for id in 0..agents {
            let slot = env.spawn(id);
            env.slots.push(slot);
        }
        Ok(env)
    }

    fn spawn(&mut self, id: usize) -> Slot {
        let refs: Vec<&SpawnArea> = self.areas.iter().collect();
        let (area, pos) = choose_spawn(
            &self.curriculum,
            &self.world,
            &refs,
            self.kind.radius,
            &mut self.rng,
        );
        let toward = self.exit_center(pos);
        Slot {
            state: AgentState::spawn(id as u32, &self.kind, pos, toward),
            area,
            episode_return: 0.0,
        }
    }

    fn exit_center(&self, p: Vec2) -> Vec2 {
        self.world
            .scenario()
            .nearest_exit(p)
            .map(|(_, d)| d.center)
            .unwrap_or(p)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn agent(&self, i: usize) -> &AgentState {
        &self.slots[i].state
    }

    pub fn reward_config(&self) -> &RewardConfig {
        &self.reward
    }
}

impl Environment for EvacuationEnv {
    fn observation_len(&self) -> usize {
        self.perception.observation_len()
    }

    fn agent_count(&self) -> usize {
        self.slots.len()
    }

    fn observe(&self, agent: usize, out: &mut [f64]) {
        let state = &self.slots[agent].state;
        let (_, exit) = self
            .world
            .scenario()
            .nearest_exit(state.position)
            .expect("validated scenario has an exit");
        let obs = observe(&self.world, &self.fires, state, exit, &self.perception);
        out.copy_from_slice(obs.values());
    }

    fn step(&mut self, agent: usize, action: ActionPair) -> (Transition, Option<EpisodeRecord>) {
        let exit = self.exit_center(self.slots[agent].state.position);
        let slot = &mut self.slots[agent];
        let prev = slot.state.position;
        let mut outcome = step_agent(
            &self.world,
            &self.fires,
            &mut slot.state,
            action,
            TICK_SECONDS,
        );
        let damage = apply_damage(
            &self.fires,
            &mut slot.state,
            TICK_SECONDS,
            DamageMode::Training,
        );
        outcome.touched_fire |= damage.terminal;
        let reward = step_reward(
            &self.reward,
            &self.world,
            exit,
            prev,
            slot.state.position,
            &outcome,
        );
        slot.episode_return += reward;
        slot.state.cumulative_reward += reward;

        let done = outcome.entered_safe_area
            || outcome.touched_fire
            || slot.state.step_count >= self.reward.max_step;
        if !done {
            return (Transition { reward, done }, None);
        }
        let record = EpisodeRecord {
            agent,
            area: slot.area,
            episode_return: slot.episode_return,
            length: slot.state.step_count,
        };
        self.curriculum
            .record_episode(record.area, record.episode_return)
            .expect("agents only spawn in unlocked areas");
        self.slots[agent] = self.spawn(agent);
        (Transition { reward, done }, Some(record))
    }

    fn curriculum(&self) -> Option<&CurriculumState> {
        Some(&self.curriculum)
    }

    fn set_curriculum(&mut self, curriculum: CurriculumState) {
        self.curriculum = curriculum;
    }

    fn save_state(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_rng(&mut out, &self.rng);
        put_u64(&mut out, self.slots.len() as u64);
        for s in &self.slots {
            let a = &s.state;
            for v in [
                a.position.x,
                a.position.z,
                a.heading.x,
                a.heading.z,
                a.health,
                a.cumulative_reward,
            ] {
                put_f64(&mut out, v);
            }
            put_u8(&mut out, a.status as u8);
            put_u64(&mut out, a.step_count);
            put_u32(&mut out, s.area as u32);
            put_f64(&mut out, s.episode_return);
        }
        out
    }

    fn load_state(&mut self, bytes: &[u8]) -> Result<(), CheckpointError> {
        let mut r = Reader(bytes);
        let rng = r.rng()?;
        let n = r.u64()? as usize;
        if n != self.slots.len() {
            return Err(CheckpointError::Incompatible(format!(
                "{n} agents saved, {} configured",
                self.slots.len()
            )));
        }
        let mut slots = Vec::with_capacity(n);
        for id in 0..n {
            let mut state = AgentState::spawn(id as u32, &self.kind, Vec2::ZERO, Vec2::ZERO);
            state.position = Vec2::new(r.f64()?, r.f64()?);
            state.heading = Vec2::new(r.f64()?, r.f64()?);
            state.health = r.f64()?;
            state.cumulative_reward = r.f64()?;
            state.status = match r.u8()? {
                0 => AgentStatus::Active,
                1 => AgentStatus::Safe,
                2 => AgentStatus::Dead,
                s => return Err(CheckpointError::Corrupt(format!("agent status {s}"))),
            };
            state.step_count = r.u64()?;
            let area = r.u32()? as usize;
            if area == 0 || area > self.areas.len() {
                return Err(CheckpointError::Incompatible(format!("spawn area {area}")));
            }
            slots.push(Slot {
                state,
                area,
                episode_return: r.f64()?,
            });
        }
        r.finish()?;
        self.rng = rng;
        self.slots = slots;
        Ok(())
    }
}
