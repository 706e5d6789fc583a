use serde::{Deserialize, Serialize};

use super::end::EndReason;
use crate::world::FireSource;

pub const EVENT_LOG_FORMAT: &str = "metis-events";
pub const EVENT_LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub scenario_id: String,
}

impl LogHeader {
    pub fn new(seed: u64, scenario_id: &str) -> Self {
        Self {
            format: EVENT_LOG_FORMAT.into(),
            version: EVENT_LOG_VERSION,
            seed,
            scenario_id: scenario_id.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimResults {
    pub total: u32,
    pub survived: u32,
    pub died: u32,
    pub unresolved: u32,
    pub elapsed_ticks: u64,
    pub end_reason: EndReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    SimStarted {
        total: u32,
    },
    AgentSafe {
        agent: u32,
        x: f64,
        z: f64,
    },
    AgentDead {
        agent: u32,
        x: f64,
        z: f64,
    },
    /// Emitted when an agent starts touching geometry, not on every blocked tick.
    Collision {
        agent: u32,
        x: f64,
        z: f64,
    },
    FireIgnited {
        source: usize,
    },
    FirePatchSpawned {
        source: usize,
        x: f64,
        z: f64,
        r: f64,
    },
    FireInjected {
        source: usize,
        fire: FireSource,
    },
    SimEnded {
        results: SimResults,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("empty event log")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("not an event log (format {0:?})")]
    Format(String),
    #[error("unsupported event log version {0}")]
    Version(u32),
    #[error("event log has no sim_ended record")]
    Unfinished,
}

/// Header line followed by one event per line, each newline-terminated.
pub fn write_log(header: &LogHeader, events: &[SimEvent]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_log(text: &str) -> Result<(LogHeader, Vec<SimEvent>), LogError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(LogError::Empty)?;
    let header: LogHeader = serde_json::from_str(first).map_err(|e| LogError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.format != EVENT_LOG_FORMAT {
        return Err(LogError::Format(header.format));
    }
    if header.version != EVENT_LOG_VERSION {
        return Err(LogError::Version(header.version));
    }
    let events = lines
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<SimEvent>, _>>()?;
    Ok((header, events))
}

/// Results recorded in the log's `sim_ended` event.
pub fn results_from_log(text: &str) -> Result<SimResults, LogError> {
    let (_, events) = parse_log(text)?;
    events
        .iter()
        .rev()
        .find_map(|e| match e.kind {
            EventKind::SimEnded { results } => Some(results),
            _ => None,
        })
        .ok_or(LogError::Unfinished)
}
