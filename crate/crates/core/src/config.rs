//! Loading scenario templates from TOML (the default) or JSON files.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::sim::ScenarioTemplate;

/// The shipped experiment template.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.scenario");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// JSON for `.json` files, TOML for everything else.
    pub fn for_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_template(
    text: &str,
    format: Format,
    origin: &str,
) -> Result<ScenarioTemplate, ConfigError> {
    match format {
        Format::Toml => toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        }),
        Format::Json => {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| {
                let path = e.path().to_string();
                let inner = e.into_inner();
                ConfigError::Parse {
                    origin: origin.to_string(),
                    line: inner.line(),
                    column: inner.column(),
                    message: if path == "." {
                        inner.to_string()
                    } else {
                        format!("at `{path}`: {inner}")
                    },
                }
            })
        }
    }
}

pub fn load_template(path: &Path) -> Result<ScenarioTemplate, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_template(&text, Format::for_path(path), &path.display().to_string())
}

pub fn default_template() -> ScenarioTemplate {
    parse_template(DEFAULT_SCENARIO, Format::Toml, "default.scenario")
        .expect("shipped template parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_template_is_clean() {
        let t = default_template();
        assert_eq!(t.n_servers(), 3);
        assert_eq!(t.n_users, 2);
        assert_eq!(t.n_runs, 100);
        assert_eq!(t.classes[0].size_bits, 96.67e6);
        assert!(t.violations().is_empty(), "{:?}", t.violations());
    }

    #[test]
    fn frame_size_matches_stream_rate() {
        // 2.9 Gb/s at 30 frames per second
        let t = default_template();
        assert!((t.classes[0].size_bits * 30.0 - 2.9e9).abs() < 1e6);
        assert!(t.bw_uplink_range[0] <= 2.9e9 && 2.9e9 <= t.bw_uplink_range[1]);
        assert_eq!(t.bw_uplink_range, [1e9, 4e9]);
    }

    #[test]
    fn json_round_trip() {
        let t = default_template();
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(parse_template(&json, Format::Json, "t.json").unwrap(), t);
    }

    #[test]
    fn toml_errors_carry_position() {
        let bad = DEFAULT_SCENARIO.replace("n_users = 2", "n_users = \"two\"");
        let err = parse_template(&bad, Format::Toml, "bad.scenario").unwrap_err();
        let ConfigError::Parse { line, .. } = &err else {
            panic!("{err}")
        };
        let expected = bad.lines().position(|l| l.starts_with("n_users")).unwrap() + 1;
        assert_eq!(*line, expected, "{err}");
    }

    #[test]
    fn json_errors_carry_path() {
        let err = parse_template(
            r#"{"n_users": 2, "bw_uplink_range": [1, "x"]}"#,
            Format::Json,
            "t.json",
        )
        .unwrap_err();
        assert!(err.to_string().contains("bw_uplink_range"), "{err}");
    }

    #[test]
    fn violations_name_fields() {
        let mut t = default_template();
        t.bw_uplink_range = [-1e9, 4e9];
        t.servers[1].capacity.retain(|c| c.op != "render");
        let v: Vec<String> = t.violations().iter().map(|v| v.to_string()).collect();
        assert!(v.iter().any(|s| s.starts_with("bw_uplink_range:")), "{v:?}");
        assert!(
            v.iter()
                .any(|s| s.contains("missing entry for (class 0, op render) on server 1")),
            "{v:?}"
        );
    }
}
