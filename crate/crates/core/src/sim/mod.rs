//! The evacuation run loop: perception, greedy policy, dynamics, fire and
//! end conditions, one tick at a time.

mod end;
mod events;

use std::collections::BTreeMap;
use std::time::Duration;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use end::{
    evaluate_end, ticks_for, EndCondition, EndConditionError, EndReason, Tally,
    DEFAULT_BACKSTOP_SECONDS,
};
pub use events::{
    parse_log, results_from_log, write_log, EventKind, LogError, LogHeader, SimEvent, SimResults,
    EVENT_LOG_FORMAT, EVENT_LOG_VERSION,
};

use crate::dynamics::{
    apply_damage, propagate_fire, step_agent, ActionPair, AgentState, AgentStatus, DamageMode,
    FireEvent, FireField, TICK_SECONDS,
};
use crate::geometry::Vec2;
use crate::perception::{observe, PerceptionConfig};
use crate::ppo::{act_from_logits, ActMode, Network, Policy};
use crate::world::{
    validate, validate_fire_source, FireSource, Scenario, ValidationIssue, World, WorldError,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scenario is invalid ({} issues)", .0.len())]
    Invalid(Vec<ValidationIssue>),
    #[error("policy expects {expected} inputs but this perception produces {found}")]
    IncompatiblePolicy { expected: usize, found: usize },
    #[error("invalid end condition {0:?}")]
    InvalidEndCondition(EndCondition),
    #[error("simulation has ended")]
    SimEnded,
    #[error("invalid fire source ({} issues)", .0.len())]
    InvalidSource(Vec<ValidationIssue>),
    #[error("injection at tick {tick} is not after the current tick {current}")]
    InjectionInPast { tick: u64, current: u64 },
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub act_mode: ActMode,
    pub backstop_seconds: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            act_mode: ActMode::Greedy,
            backstop_seconds: DEFAULT_BACKSTOP_SECONDS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentFrame {
    pub id: u32,
    pub x: f64,
    pub z: f64,
    pub status: AgentStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FireFrame {
    pub x: f64,
    pub z: f64,
    pub r: f64,
}

/// Snapshot for live viewers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tick: u64,
    pub agents: Vec<AgentFrame>,
    pub fires: Vec<FireFrame>,
    pub totals: Tally,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunMode {
    Headless,
    /// Sleeps so one simulated second takes `1 / real_time_factor` wall seconds.
    Streamed {
        real_time_factor: f64,
    },
}

/// One evacuation run. Owns all mutable state; advance with [`Simulation::step`].
#[derive(Debug, Clone)]
pub struct Simulation {
    world: World,
    fires: FireField,
    agents: Vec<AgentState>,
    touching: Vec<bool>,
    net: Network<f64>,
    perception: PerceptionConfig,
    rng: ChaCha8Rng,
    conditions: Vec<EndCondition>,
    backstop_ticks: u64,
    act_mode: ActMode,
    tick: u64,
    pending: BTreeMap<u64, Vec<FireSource>>,
    header: LogHeader,
    events: Vec<SimEvent>,
    results: Option<SimResults>,
}

impl Simulation {
    pub fn new(
        scenario: &Scenario,
        policy: &Policy,
        conditions: Vec<EndCondition>,
        seed: u64,
    ) -> Result<Self, SimError> {
        Self::with_options(scenario, policy, conditions, seed, SimOptions::default())
    }

    pub fn with_options(
        scenario: &Scenario,
        policy: &Policy,
        conditions: Vec<EndCondition>,
        seed: u64,
        options: SimOptions,
    ) -> Result<Self, SimError> {
        let issues = validate(scenario);
        if !issues.is_empty() {
            return Err(SimError::Invalid(issues));
        }
        if let Some(c) = conditions.iter().find(|c| !c.is_valid()) {
            return Err(SimError::InvalidEndCondition(*c));
        }
        let perception = policy.config.perception.clone();
        let found = perception.observation_len();
        let net = policy.network.clone();
        let branches_ok = net.config.branch_sizes.iter().all(|b| (2..=3).contains(b));
        if net.config.input_dim != found || !branches_ok {
            return Err(SimError::IncompatiblePolicy {
                expected: net.config.input_dim,
                found,
            });
        }

        let world = World::new(scenario.clone())?;
        let agents: Vec<AgentState> = scenario
            .pedestrians
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let kind = scenario
                    .pedestrian_type(&p.type_name)
                    .expect("validated type");
                let toward = scenario
                    .nearest_exit(p.position)
                    .map_or(p.position, |(_, d)| d.center);
                AgentState::spawn(i as u32, kind, p.position, toward)
            })
            .collect();
        let total = agents.len() as u32;
        let mut sim = Self {
            fires: FireField::from_scenario(scenario),
            touching: vec![false; agents.len()],
            agents,
            net,
            perception,
            rng: ChaCha8Rng::seed_from_u64(seed),
            conditions,
            backstop_ticks: ticks_for(options.backstop_seconds).max(1),
            act_mode: options.act_mode,
            tick: 0,
            pending: BTreeMap::new(),
            header: LogHeader::new(seed, &scenario.id),
            events: Vec::new(),
            results: None,
            world,
        };
        sim.emit(EventKind::SimStarted { total });
        // sources due at tick 0 are burning before the first step
        let fire_events = propagate_fire(&mut sim.fires, &sim.world, &mut sim.rng, 0);
        sim.emit_fire(fire_events);
        Ok(sim)
    }

    fn emit(&mut self, kind: EventKind) {
        self.events.push(SimEvent {
            tick: self.tick,
            kind,
        });
    }

    fn emit_fire(&mut self, events: Vec<FireEvent>) {
        for e in events {
            let kind = match e {
                FireEvent::Ignited { source } => EventKind::FireIgnited { source },
                FireEvent::PatchSpawned { source, patch } => EventKind::FirePatchSpawned {
                    source,
                    x: patch.center.x,
                    z: patch.center.z,
                    r: patch.radius,
                },
            };
            self.emit(kind);
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_ended(&self) -> bool {
        self.results.is_some()
    }

    pub fn results(&self) -> Option<&SimResults> {
        self.results.as_ref()
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn fires(&self) -> &FireField {
        &self.fires
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn tally(&self) -> Tally {
        let mut t = Tally::default();
        for a in &self.agents {
            match a.status {
                AgentStatus::Active => t.active += 1,
                AgentStatus::Safe => t.safe += 1,
                AgentStatus::Dead => t.dead += 1,
            }
        }
        t
    }

    pub fn frame(&self) -> Frame {
        Frame {
            tick: self.tick,
            agents: self
                .agents
                .iter()
                .map(|a| AgentFrame {
                    id: a.id,
                    x: a.position.x,
                    z: a.position.z,
                    status: a.status,
                })
                .collect(),
            fires: self
                .fires
                .hazard_discs()
                .map(|d| FireFrame {
                    x: d.center.x,
                    z: d.center.z,
                    r: d.radius,
                })
                .collect(),
            totals: self.tally(),
        }
    }

    /// Header line plus every event so far.
    pub fn event_log(&self) -> String {
        write_log(&self.header, &self.events)
    }

    /// Queues a fire for the next tick boundary and returns that tick.
    pub fn inject_fire(&mut self, source: FireSource) -> Result<u64, SimError> {
        let tick = self.tick + 1;
        self.schedule_injection(tick, source)?;
        Ok(tick)
    }

    /// Queues a fire to activate at `tick` (used to replay recorded injections).
    pub fn schedule_injection(&mut self, tick: u64, source: FireSource) -> Result<(), SimError> {
        if self.is_ended() {
            return Err(SimError::SimEnded);
        }
        if tick <= self.tick {
            return Err(SimError::InjectionInPast {
                tick,
                current: self.tick,
            });
        }
        let issues = validate_fire_source(self.world.scenario(), &source);
        if !issues.is_empty() {
            return Err(SimError::InvalidSource(issues));
        }
        self.pending.entry(tick).or_default().push(source);
        Ok(())
    }

    /// Advances one tick. Returns the events it produced.
    pub fn step(&mut self) -> Result<&[SimEvent], SimError> {
        if self.is_ended() {
            return Err(SimError::SimEnded);
        }
        let first = self.events.len();
        self.tick += 1;
        let tick = self.tick;

        for mut source in self.pending.remove(&tick).unwrap_or_default() {
            source.ignition_tick = tick;
            let idx = self.fires.add_source(source.clone());
            self.emit(EventKind::FireInjected {
                source: idx,
                fire: source,
            });
        }

        // Every active agent observes the same fire snapshot, so one batched
        // forward pass equals per-agent inference.
        let active: Vec<usize> = (0..self.agents.len())
            .filter(|&i| self.agents[i].is_active())
            .collect();
        if !active.is_empty() {
            let dim = self.net.config.input_dim;
            let mut obs = Array2::<f64>::zeros((active.len(), dim));
            for (row, &i) in active.iter().enumerate() {
                let a = &self.agents[i];
                let (_, exit) = self
                    .world
                    .scenario()
                    .nearest_exit(a.position)
                    .expect("validated exit");
                let o = observe(&self.world, &self.fires, a, exit, &self.perception);
                obs.row_mut(row)
                    .as_slice_mut()
                    .expect("row-major")
                    .copy_from_slice(o.values());
            }
            let fwd = self.net.forward_batch(obs.view());
            let b0 = self.net.config.branch_sizes[0];
            for (row, &i) in active.iter().enumerate() {
                let logits = fwd.logits.row(row);
                let logits = logits.as_slice().expect("row-major");
                let action: ActionPair =
                    act_from_logits(&logits[..b0], &logits[b0..], self.act_mode, &mut self.rng);
                let agent = &mut self.agents[i];
                let outcome = step_agent(&self.world, &self.fires, agent, action, TICK_SECONDS);
                let (id, pos) = (agent.id, agent.position);
                let mut kinds = Vec::new();
                if outcome.collided && !self.touching[i] {
                    kinds.push(EventKind::Collision {
                        agent: id,
                        x: pos.x,
                        z: pos.z,
                    });
                }
                self.touching[i] = outcome.collided;
                if outcome.entered_safe_area {
                    kinds.push(EventKind::AgentSafe {
                        agent: id,
                        x: pos.x,
                        z: pos.z,
                    });
                } else if apply_damage(&self.fires, agent, TICK_SECONDS, DamageMode::Simulation)
                    .died
                {
                    kinds.push(EventKind::AgentDead {
                        agent: id,
                        x: pos.x,
                        z: pos.z,
                    });
                }
                kinds.into_iter().for_each(|k| self.emit(k));
            }
        }

        let fire_events = propagate_fire(&mut self.fires, &self.world, &mut self.rng, tick);
        self.emit_fire(fire_events);

        let tally = self.tally();
        let reason = evaluate_end(&self.conditions, &tally, tick)
            .or_else(|| (tick >= self.backstop_ticks).then_some(EndReason::TimeLimit));
        if let Some(reason) = reason {
            self.finish(reason);
        }
        Ok(&self.events[first..])
    }

    fn finish(&mut self, end_reason: EndReason) -> SimResults {
        let t = self.tally();
        let results = SimResults {
            total: t.total(),
            survived: t.safe,
            died: t.dead,
            unresolved: t.active,
            elapsed_ticks: self.tick,
            end_reason,
        };
        self.pending.clear();
        self.emit(EventKind::SimEnded { results });
        self.results = Some(results);
        results
    }

    /// Ends the run now with reason `manual`.
    pub fn stop(&mut self) -> Result<SimResults, SimError> {
        if self.is_ended() {
            return Err(SimError::SimEnded);
        }
        Ok(self.finish(EndReason::Manual))
    }

    pub fn run_to_end(&mut self) -> SimResults {
        while self.step().is_ok() {}
        *self.results.as_ref().expect("run ended")
    }
}

/// Recorded `(effective tick, source)` injections, for replay.
pub fn injections_in(events: &[SimEvent]) -> Vec<(u64, FireSource)> {
    events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::FireInjected { fire, .. } => Some((e.tick, fire.clone())),
            _ => None,
        })
        .collect()
}

/// Runs a simulation to completion and returns its results and event log.
pub fn run(
    scenario: &Scenario,
    policy: &Policy,
    conditions: Vec<EndCondition>,
    seed: u64,
    mode: RunMode,
    injections: &[(u64, FireSource)],
) -> Result<(SimResults, String), SimError> {
    let mut sim = Simulation::new(scenario, policy, conditions, seed)?;
    for (tick, source) in injections {
        sim.schedule_injection(*tick, source.clone())?;
    }
    let pause = match mode {
        RunMode::Headless => None,
        RunMode::Streamed { real_time_factor } if real_time_factor > 0.0 => {
            Some(Duration::from_secs_f64(TICK_SECONDS / real_time_factor))
        }
        RunMode::Streamed { .. } => None,
    };
    while !sim.is_ended() {
        sim.step()?;
        if let Some(p) = pause {
            std::thread::sleep(p);
        }
    }
    Ok((*sim.results().expect("ended"), sim.event_log()))
}

/// Point helper for injections given as plain coordinates.
pub fn fire_at(x: f64, z: f64, max_radius: f64) -> FireSource {
    FireSource::at(Vec2::new(x, z), max_radius)
}
