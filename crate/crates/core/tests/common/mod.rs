#![allow(dead_code)]

use std::ops::ControlFlow;

use metis_core::dynamics::{propagate_fire, ActionPair, AgentState, FireField};
use metis_core::geometry::{Aabb, Shape, Vec2};
use metis_core::perception::SensorConfig;
use metis_core::ppo::{
    train, CheckpointError, EpisodeRecord, Environment, Network, Policy, Transition, TrainingConfig,
};
use metis_core::samples;
use metis_core::world::{
    validate, Category, Door, FireSource, Obstacle, ObstacleKind, ObstacleShape,
    PedestrianPlacement, PedestrianType, SafeArea, Scenario, WallSegment, World,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn v(x: f64, z: f64) -> Vec2 {
    Vec2::new(x, z)
}

/// A random valid building: a rectangular room with an exit in the south
/// wall, an optional partition with a door, scattered obstacles and fires.
pub fn random_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    for _ in 0..200 {
        let w = rng.random_range(6.0..30.0);
        let h = rng.random_range(6.0..30.0);
        let thickness = rng.random_range(0.1..0.3);
        let wall = |a: Vec2, b: Vec2| WallSegment { a, b, thickness };
        let mut walls = vec![
            wall(v(0.0, 0.0), v(w, 0.0)),
            wall(v(w, 0.0), v(w, h)),
            wall(v(w, h), v(0.0, h)),
            wall(v(0.0, h), v(0.0, 0.0)),
        ];
        let exit_x = rng.random_range(1.5..w - 1.5);
        let mut doors = vec![Door {
            wall_index: 0,
            center: v(exit_x, 0.0),
            width: rng.random_range(0.9..1.8),
            exit: true,
            open: true,
        }];
        let mut partition = None;
        if rng.random_bool(0.7) {
            let x = w * rng.random_range(0.3..0.7);
            if (x - exit_x).abs() > 1.5 {
                walls.push(wall(v(x, 0.0), v(x, h)));
                doors.push(Door {
                    wall_index: 4,
                    center: v(x, rng.random_range(1.5..h - 1.5)),
                    width: rng.random_range(0.9..1.6),
                    exit: false,
                    open: rng.random_bool(0.5),
                });
                partition = Some(x);
            }
        }
        let obstacles = (0..rng.random_range(0..6))
            .map(|_| {
                let c = v(rng.random_range(1.0..w - 1.0), rng.random_range(1.0..h - 1.0));
                let kind = ObstacleKind::Desk;
                if rng.random_bool(0.5) {
                    let half = v(rng.random_range(0.15..1.0), rng.random_range(0.15..1.0));
                    Obstacle { kind, shape: ObstacleShape::Rect { min: c - half, max: c + half } }
                } else {
                    Obstacle {
                        kind: ObstacleKind::Plant,
                        shape: ObstacleShape::Circle { center: c, radius: rng.random_range(0.2..0.7) },
                    }
                }
            })
            .filter(|o| {
                // keep obstacles off the partition so every room stays reachable
                partition.is_none_or(|x| (o.bounds().min.x > x + 0.5) || (o.bounds().max.x < x - 0.5))
            })
            .collect();
        let fire_sources = (0..rng.random_range(0..4))
            .map(|_| FireSource {
                origin: v(rng.random_range(0.5..w - 0.5), rng.random_range(0.5..h - 0.5)),
                max_radius: rng.random_range(0.5..3.0),
                growth_rate: rng.random_range(0.1..0.5),
                patch_rate: rng.random_range(1..5),
                ignition_tick: rng.random_range(0..40),
            })
            .collect();
        let mut s = Scenario {
            id: "random".into(),
            name: "random".into(),
            walls,
            doors,
            obstacles,
            safe_areas: vec![SafeArea {
                region: Aabb::new(v(exit_x - 1.0, -1.5), v(exit_x + 1.0, -0.3)),
            }],
            pedestrian_types: vec![PedestrianType::adult()],
            fire_sources,
            ..Default::default()
        };
        let Ok(world) = World::new(s.clone()) else { continue };
        let Some(p) = free_point(&world, 0.25, rng) else { continue };
        s.pedestrians = vec![PedestrianPlacement { type_name: "adult".into(), position: p }];
        if validate(&s).is_empty() {
            return s;
        }
    }
    panic!("no valid random scenario in 200 attempts");
}

/// A point inside the walls whose disc of `radius` overlaps nothing solid.
pub fn free_point(world: &World, radius: f64, rng: &mut ChaCha8Rng) -> Option<Vec2> {
    let s = world.scenario();
    let max = s.walls.iter().fold(v(0.0, 0.0), |m, w| v(m.x.max(w.a.x).max(w.b.x), m.z.max(w.a.z).max(w.b.z)));
    (0..500)
        .map(|_| v(rng.random_range(0.3..max.x - 0.3), rng.random_range(0.3..max.z - 0.3)))
        .find(|p| !world.disc_blocked(*p, radius))
}

/// Fire field of `s` advanced by a random number of ticks, so it has patches.
pub fn random_fires(world: &World, rng: &mut ChaCha8Rng) -> FireField {
    let mut f = FireField::from_scenario(world.scenario());
    for tick in 0..=rng.random_range(0..300) {
        propagate_fire(&mut f, world, rng, tick);
    }
    f
}

pub fn random_agent(world: &World, rng: &mut ChaCha8Rng) -> AgentState {
    let p = free_point(world, 0.25, rng).expect("free point");
    let mut a = AgentState::spawn(0, &PedestrianType::adult(), p, p + v(1.0, 0.0));
    a.heading = Vec2::from_angle(rng.random_range(0.0..std::f64::consts::TAU));
    a
}

fn segment_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 { 0.0 } else { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) };
    (a + ab * t).distance(p)
}

/// Signed distance to a solid's surface, computed from its defining data.
fn sdf(shape: &Shape, p: Vec2) -> f64 {
    match *shape {
        Shape::Capsule { a, b, radius } => segment_distance(a, b, p) - radius,
        Shape::Rect(r) => {
            let c = r.center();
            let half = v(r.width() / 2.0, r.height() / 2.0);
            let q = v((p.x - c.x).abs() - half.x, (p.z - c.z).abs() - half.z);
            let outside = v(q.x.max(0.0), q.z.max(0.0)).length();
            outside + q.x.max(q.z).min(0.0)
        }
        Shape::Circle { center, radius } => p.distance(center) - radius,
    }
}

/// What the marcher found at the first sample inside a relevant solid.
#[derive(Debug, Clone)]
pub struct MarchHit {
    pub t: f64,
    /// Categories of every relevant solid entered within 2 mm past `t`,
    /// with whether the sensor detects it.
    pub entered: Vec<(Category, bool)>,
}

pub const MARCH_STEP: f64 = 1e-3;

/// Brute-force ray march in 1 mm steps. Far from every surface it skips
/// ahead by the clearance minus half a step, which can never jump past an
/// entry, so the result equals a plain 1 mm march.
pub fn march(
    world: &World,
    fires: &FireField,
    origin: Vec2,
    dir: Vec2,
    cfg: &SensorConfig,
) -> Option<MarchHit> {
    let mut solids: Vec<(Shape, Category, bool)> = Vec::new();
    for s in world.solids() {
        let detect = cfg.detectable.contains(s.category);
        let passable = s.category == Category::ExitDoor || (s.category == Category::Door && !s.closed_door);
        let block = cfg.blockers.contains(s.category) && !passable;
        if detect || block {
            solids.push((s.shape, s.category, detect));
        }
    }
    if cfg.detectable.contains(Category::Fire) || cfg.blockers.contains(Category::Fire) {
        for d in fires.hazard_discs() {
            solids.push((
                Shape::Circle { center: d.center, radius: d.radius },
                Category::Fire,
                cfg.detectable.contains(Category::Fire),
            ));
        }
    }
    let limit = cfg.ray_length + 3.0 * MARCH_STEP;
    let mut t = 0.0;
    while t <= limit {
        let p = origin + dir * t;
        let clearance = solids.iter().map(|(s, _, _)| sdf(s, p)).fold(f64::INFINITY, f64::min);
        if clearance <= 0.0 {
            let mut entered = Vec::new();
            for k in 0..=2 {
                let q = origin + dir * (t + k as f64 * MARCH_STEP);
                for (s, c, d) in &solids {
                    if sdf(s, q) <= 0.0 && !entered.contains(&(*c, *d)) {
                        entered.push((*c, *d));
                    }
                }
            }
            return Some(MarchHit { t, entered });
        }
        t += (clearance - MARCH_STEP / 2.0).max(MARCH_STEP);
    }
    None
}

/// Compares one analytic ray feature against the march. `Err` explains a mismatch.
pub fn check_ray(
    feature: f64,
    category: Option<Category>,
    hit: Option<&MarchHit>,
    cfg: &SensorConfig,
    tol: f64,
) -> Result<(), String> {
    let l = cfg.ray_length;
    match (category, hit) {
        (Some(c), Some(h)) => {
            let t = feature * l;
            if (t - h.t).abs() > tol {
                return Err(format!("{c:?} at {t:.4}, march at {:.4}", h.t));
            }
            if !h.entered.contains(&(c, true)) {
                return Err(format!("{c:?} at {t:.4}, march entered {:?}", h.entered));
            }
            Ok(())
        }
        (Some(c), None) => Err(format!("{c:?} at {:.4}, march saw nothing", feature * l)),
        (None, hit) => {
            if feature != 1.0 {
                return Err(format!("miss with feature {feature}"));
            }
            match hit {
                Some(h) if h.t < l - tol && h.entered.iter().all(|(_, d)| *d) => {
                    Err(format!("miss, march hit {:?} at {:.4}", h.entered, h.t))
                }
                _ => Ok(()),
            }
        }
    }
}

/// Deterministic five-state chain. Entering state 0 pays 0.6, entering
/// state 4 pays 1.0, both terminal; episodes start in states 1..=3 in
/// rotation. Only the horizontal branch matters: 0 moves left, 1 right.
#[derive(Debug, Clone)]
pub struct Chain {
    pub states: Vec<usize>,
    pub returns: Vec<f64>,
    pub lengths: Vec<u64>,
    pub starts: u64,
}

pub const CHAIN_STATES: usize = 5;
pub const CHAIN_LEFT_REWARD: f64 = 0.6;
pub const CHAIN_RIGHT_REWARD: f64 = 1.0;
const CHAIN_MAX_LEN: u64 = 50;

impl Chain {
    pub fn new(agents: usize) -> Self {
        let mut c = Self { states: vec![0; agents], returns: vec![0.0; agents], lengths: vec![0; agents], starts: 0 };
        for i in 0..agents {
            c.reset(i);
        }
        c
    }

    fn reset(&mut self, i: usize) {
        self.states[i] = 1 + (self.starts % 3) as usize;
        self.starts += 1;
        self.returns[i] = 0.0;
        self.lengths[i] = 0;
    }
}

pub fn one_hot(state: usize) -> Vec<f64> {
    let mut o = vec![0.0; CHAIN_STATES];
    o[state] = 1.0;
    o
}

impl Environment for Chain {
    fn observation_len(&self) -> usize {
        CHAIN_STATES
    }

    fn agent_count(&self) -> usize {
        self.states.len()
    }

    fn observe(&self, agent: usize, out: &mut [f64]) {
        out.copy_from_slice(&one_hot(self.states[agent]));
    }

    fn step(&mut self, agent: usize, action: ActionPair) -> (Transition, Option<EpisodeRecord>) {
        let s = self.states[agent];
        let next = if action.indices().0 == 0 { s - 1 } else { s + 1 };
        let reward = match next {
            0 => CHAIN_LEFT_REWARD,
            n if n == CHAIN_STATES - 1 => CHAIN_RIGHT_REWARD,
            _ => 0.0,
        };
        self.states[agent] = next;
        self.returns[agent] += reward;
        self.lengths[agent] += 1;
        let done = next == 0 || next == CHAIN_STATES - 1 || self.lengths[agent] >= CHAIN_MAX_LEN;
        let record = done.then(|| EpisodeRecord {
            agent,
            area: 0,
            episode_return: self.returns[agent],
            length: self.lengths[agent],
        });
        if done {
            self.reset(agent);
        }
        (Transition { reward, done }, record)
    }

    fn save_state(&self) -> Vec<u8> {
        serde_json::to_vec(&(&self.states, &self.returns, &self.lengths, self.starts)).unwrap()
    }

    fn load_state(&mut self, bytes: &[u8]) -> Result<(), CheckpointError> {
        let (states, returns, lengths, starts) =
            serde_json::from_slice(bytes).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        *self = Self { states, returns, lengths, starts };
        Ok(())
    }
}

/// Optimal chain action per state by value iteration (index 0 = left).
pub fn chain_optimum(gamma: f64) -> Vec<Option<usize>> {
    let mut v = [0.0; CHAIN_STATES];
    let q = |v: &[f64; CHAIN_STATES], s: usize, a: usize| {
        let n = if a == 0 { s - 1 } else { s + 1 };
        match n {
            0 => CHAIN_LEFT_REWARD,
            n if n == CHAIN_STATES - 1 => CHAIN_RIGHT_REWARD,
            n => gamma * v[n],
        }
    };
    for _ in 0..1000 {
        let mut next = v;
        for s in 1..CHAIN_STATES - 1 {
            next[s] = q(&v, s, 0).max(q(&v, s, 1));
        }
        v = next;
    }
    (0..CHAIN_STATES)
        .map(|s| {
            if s == 0 || s == CHAIN_STATES - 1 {
                None
            } else if q(&v, s, 0) > q(&v, s, 1) {
                Some(0)
            } else {
                Some(1)
            }
        })
        .collect()
}

/// Greedy horizontal action of `net` in each chain state.
pub fn chain_greedy(net: &Network<f64>) -> Vec<usize> {
    (0..CHAIN_STATES)
        .map(|s| {
            let (h, _, _) = net.forward(&one_hot(s));
            if h[0] >= h[1] { 0 } else { 1 }
        })
        .collect()
}

/// A policy trained briefly on the single room; enough for simulation tests.
pub fn tiny_policy() -> Policy {
    let mut cfg = TrainingConfig::default();
    let t = &mut cfg.trainer;
    t.num_parallel_agents = 4;
    t.rollout_horizon = 32;
    t.minibatch_size = 64;
    t.hidden_width = 16;
    t.total_steps = 256;
    t.seed = 11;
    let (trainer, env) = train(&samples::single_room(), &cfg, |_| ControlFlow::Continue(())).unwrap();
    Policy::from_bytes(&trainer.save_checkpoint(&env)).unwrap()
}
