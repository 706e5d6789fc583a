use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::TICK_SECONDS;

/// Run length used when no declared condition fires.
pub const DEFAULT_BACKSTOP_SECONDS: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EndCondition {
    AllResolved,
    CountSafe {
        n: u32,
    },
    CountDead {
        n: u32,
    },
    TimeLimit {
        seconds: f64,
    },
    /// Only ends the run through an explicit stop.
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    AllResolved,
    CountSafe,
    CountDead,
    TimeLimit,
    Manual,
}

impl fmt::Display for EndReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::AllResolved => "all_resolved",
            Self::CountSafe => "count_safe",
            Self::CountDead => "count_dead",
            Self::TimeLimit => "time_limit",
            Self::Manual => "manual",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid end condition {0:?}: expected all_resolved, count_safe:N, count_dead:N, time_limit:SECONDS or manual")]
pub struct EndConditionError(pub String);

impl EndCondition {
    pub fn reason(&self) -> EndReason {
        match self {
            Self::AllResolved => EndReason::AllResolved,
            Self::CountSafe { .. } => EndReason::CountSafe,
            Self::CountDead { .. } => EndReason::CountDead,
            Self::TimeLimit { .. } => EndReason::TimeLimit,
            Self::Manual => EndReason::Manual,
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Self::CountSafe { n } | Self::CountDead { n } => n >= 1,
            Self::TimeLimit { seconds } => seconds > 0.0 && seconds.is_finite(),
            Self::AllResolved | Self::Manual => true,
        }
    }
}

/// Parses `all_resolved`, `count_safe:N`, `count_dead:N`, `time_limit:S`, `manual`.
impl FromStr for EndCondition {
    type Err = EndConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || EndConditionError(s.to_string());
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let cond = match (kind, arg) {
            ("all_resolved", None) => Self::AllResolved,
            ("manual", None) => Self::Manual,
            ("count_safe", Some(a)) => Self::CountSafe {
                n: a.parse().map_err(|_| err())?,
            },
            ("count_dead", Some(a)) => Self::CountDead {
                n: a.parse().map_err(|_| err())?,
            },
            ("time_limit", Some(a)) => Self::TimeLimit {
                seconds: a.parse().map_err(|_| err())?,
            },
            _ => return Err(err()),
        };
        if cond.is_valid() {
            Ok(cond)
        } else {
            Err(err())
        }
    }
}

/// Agent counts at a tick boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub safe: u32,
    pub dead: u32,
    pub active: u32,
}

impl Tally {
    pub fn total(&self) -> u32 {
        self.safe + self.dead + self.active
    }
}

/// First satisfied condition in declaration order.
pub fn evaluate_end(
    conditions: &[EndCondition],
    tally: &Tally,
    elapsed_ticks: u64,
) -> Option<EndReason> {
    conditions
        .iter()
        .find(|c| match **c {
            EndCondition::AllResolved => tally.active == 0,
            EndCondition::CountSafe { n } => tally.safe >= n,
            EndCondition::CountDead { n } => tally.dead >= n,
            // compared in ticks to stay exact for limits like 0.15 s
            EndCondition::TimeLimit { seconds } => elapsed_ticks >= ticks_for(seconds),
            EndCondition::Manual => false,
        })
        .map(EndCondition::reason)
}

/// Whole ticks needed to cover `seconds`.
pub fn ticks_for(seconds: f64) -> u64 {
    (seconds / TICK_SECONDS - 1e-9).ceil().max(0.0) as u64
}
