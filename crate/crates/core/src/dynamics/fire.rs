//! Fire sources, their growth and the random patches they spawn.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::world::{Category, FireSource, HazardSettings, Scenario, World};

use super::TICK_SECONDS;

/// Draws per spawned patch before giving up on a point outside walls.
const MAX_SPAWN_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

/// Runtime state of one fire source.
#[derive(Debug, Clone, PartialEq)]
pub struct BurningSource {
    pub source: FireSource,
    pub ignited: bool,
    /// Radius of the region patches spawn in; 0 until ignition.
    pub current_radius: f64,
    pub patches: Vec<Disc>,
}

impl BurningSource {
    fn new(source: FireSource) -> Self {
        Self {
            source,
            ignited: false,
            current_radius: 0.0,
            patches: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FireEvent {
    Ignited { source: usize },
    PatchSpawned { source: usize, patch: Disc },
}

/// All fire sources of a run. Indices are stable: scenario sources first,
/// then injected sources in injection order.
#[derive(Debug, Clone, PartialEq)]
pub struct FireField {
    pub sources: Vec<BurningSource>,
    pub settings: HazardSettings,
}

impl FireField {
    /// Field with every scenario source pending ignition.
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            sources: s
                .fire_sources
                .iter()
                .cloned()
                .map(BurningSource::new)
                .collect(),
            settings: s.hazard.clone(),
        }
    }

    pub fn empty(settings: HazardSettings) -> Self {
        Self {
            sources: Vec::new(),
            settings,
        }
    }

    /// Static hazards for training: every source burning at its core radius
    /// from the start and never growing.
    pub fn dummy(s: &Scenario) -> Self {
        let mut field = Self::from_scenario(s);
        let core = field.settings.patch_radius;
        for b in &mut field.sources {
            b.ignited = true;
            b.current_radius = core.min(b.source.max_radius);
        }
        field
    }

    pub fn add_source(&mut self, source: FireSource) -> usize {
        self.sources.push(BurningSource::new(source));
        self.sources.len() - 1
    }

    /// Ticks between growth steps.
    pub fn grow_ticks(&self) -> u64 {
        ((self.settings.grow_interval_s / TICK_SECONDS).round() as u64).max(1)
    }

    fn core_radius(&self, b: &BurningSource) -> f64 {
        self.settings.patch_radius.min(b.source.max_radius)
    }

    /// Every damaging disc: the burning core at each ignited origin plus all patches.
    pub fn hazard_discs(&self) -> impl Iterator<Item = Disc> + '_ {
        self.sources
            .iter()
            .filter(|b| b.ignited)
            .flat_map(move |b| {
                std::iter::once(Disc {
                    center: b.source.origin,
                    radius: self.core_radius(b),
                })
                .chain(b.patches.iter().copied())
            })
    }

    pub fn touches(&self, center: Vec2, radius: f64) -> bool {
        self.hazard_discs()
            .any(|d| d.center.distance(center) < d.radius + radius)
    }
}

/// Radius after one growth step with multiplier `u`, capped at `max_radius`.
pub fn grown_radius(current: f64, growth_rate: f64, u: f64, max_radius: f64) -> f64 {
    (current + growth_rate * u).min(max_radius)
}

/// Uniform sample from the disc of radius `r` around `center`.
pub fn sample_in_disc<R: Rng + ?Sized>(rng: &mut R, center: Vec2, r: f64) -> Vec2 {
    let radius = r * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    center + Vec2::from_angle(theta) * radius
}

/// Advances the fire field to `tick`: ignites due sources and, on growth
/// ticks, grows each burning source by `growth_rate · U(0.5, 1.5)` and spawns
/// `patch_rate` patches uniformly inside its current disc, away from walls.
pub fn propagate_fire<R: Rng + ?Sized>(
    fires: &mut FireField,
    world: &World,
    rng: &mut R,
    tick: u64,
) -> Vec<FireEvent> {
    let mut events = Vec::new();
    let grow_ticks = fires.grow_ticks();
    let patch_radius = fires.settings.patch_radius;
    let max_patches = fires.settings.max_patches_per_source;
    for idx in 0..fires.sources.len() {
        let core = fires.core_radius(&fires.sources[idx]);
        let b = &mut fires.sources[idx];
        if !b.ignited {
            if tick >= b.source.ignition_tick {
                b.ignited = true;
                b.current_radius = core;
                events.push(FireEvent::Ignited { source: idx });
            }
            continue;
        }
        let age = tick.saturating_sub(b.source.ignition_tick);
        if age == 0 || age % grow_ticks != 0 {
            continue;
        }
        let u: f64 = rng.random_range(0.5..1.5);
        b.current_radius = grown_radius(
            b.current_radius,
            b.source.growth_rate,
            u,
            b.source.max_radius,
        );
        for _ in 0..b.source.patch_rate {
            if b.patches.len() >= max_patches {
                break;
            }
            let spot = (0..MAX_SPAWN_ATTEMPTS)
                .map(|_| sample_in_disc(rng, b.source.origin, b.current_radius))
                .find(|p| !inside_wall(world, *p));
            if let Some(center) = spot {
                let patch = Disc {
                    center,
                    radius: patch_radius,
                };
                b.patches.push(patch);
                events.push(FireEvent::PatchSpawned { source: idx, patch });
            }
        }
    }
    events
}

fn inside_wall(world: &World, p: Vec2) -> bool {
    world
        .solids()
        .iter()
        .any(|s| s.category == Category::Wall && s.shape.contains(p))
}
