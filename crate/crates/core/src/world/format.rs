use serde::{Deserialize, Serialize};

use super::Scenario;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported scenario version {found} (expected {SCENARIO_VERSION})")]
    Version { found: u64 },
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Deserialize)]
struct Header {
    metis_scenario_version: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct Document<'a> {
    metis_scenario_version: u32,
    #[serde(flatten)]
    scenario: &'a Scenario,
}

/// Parses a scenario document. Bounds are derived, never read from the file.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario, FormatError> {
    let header: Header = serde_json::from_slice(bytes)?;
    match header.metis_scenario_version {
        None => {
            return Err(FormatError::Parse {
                line: 1,
                column: 1,
                message: "missing field `metis_scenario_version`".into(),
            })
        }
        Some(v) => match v.as_u64() {
            Some(n) if n == u64::from(SCENARIO_VERSION) => {}
            Some(n) => return Err(FormatError::Version { found: n }),
            None => {
                return Err(FormatError::Parse {
                    line: 1,
                    column: 1,
                    message: format!("`metis_scenario_version` must be an integer, got {v}"),
                })
            }
        },
    }
    Ok(serde_json::from_slice(bytes)?)
}

/// Canonical pretty-printed JSON form.
pub fn save_scenario(scenario: &Scenario) -> Vec<u8> {
    let doc = Document {
        metis_scenario_version: SCENARIO_VERSION,
        scenario,
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("scenario serializes");
    out.push(b'\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples;

    #[test]
    fn save_then_load_is_identity() {
        for s in [
            samples::single_room(),
            samples::training_building(),
            samples::case_study(),
        ] {
            let bytes = save_scenario(&s);
            let back = load_scenario(&bytes).unwrap();
            assert_eq!(back, s);
            assert_eq!(save_scenario(&back), bytes);
        }
    }

    #[test]
    fn missing_walls_is_parse_error() {
        let mut v: serde_json::Value =
            serde_json::from_slice(&save_scenario(&samples::single_room())).unwrap();
        v.as_object_mut().unwrap().remove("walls");
        let err = load_scenario(v.to_string().as_bytes()).unwrap_err();
        match err {
            FormatError::Parse { message, .. } => assert!(message.contains("walls"), "{message}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let text = String::from_utf8(save_scenario(&samples::single_room()))
            .unwrap()
            .replace(
                "\"metis_scenario_version\": 1",
                "\"metis_scenario_version\": 2",
            );
        assert_eq!(
            load_scenario(text.as_bytes()),
            Err(FormatError::Version { found: 2 })
        );
    }

    #[test]
    fn syntax_error_reports_location() {
        let err = load_scenario(b"{\n  \"walls\": [,]\n}").unwrap_err();
        match err {
            FormatError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_color_is_parse_error() {
        let text = String::from_utf8(save_scenario(&samples::single_room()))
            .unwrap()
            .replace("#3366CC", "blue");
        assert!(matches!(
            load_scenario(text.as_bytes()),
            Err(FormatError::Parse { .. })
        ));
    }
}
