//! Config file loading and `--set key=value` overrides.
//!
//! The config file is the JSON form of [`PipelineConfig`]; missing fields
//! take their defaults. Overrides address fields by dotted path, e.g.
//! `--set segment.kmeans.k=7` or `--set clahe_enabled=false`.

use std::path::Path;

use dermseg::pipeline::PipelineConfig;

use crate::{CliError, Result};

/// Loads the config (defaults when `path` is `None`) and applies overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<PipelineConfig> {
    let mut value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(CliError::io(p))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("config {}: {e}", p.display())))?
        }
        None => serde_json::to_value(PipelineConfig::default()).expect("defaults serialize"),
    };

    for spec in overrides {
        apply_override(&mut value, spec)?;
    }

    let config: PipelineConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    config
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    Ok(config)
}

fn apply_override(root: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got '{spec}'")))?;

    // bare words become strings, everything JSON-parseable stays typed
    let new = serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));

    let mut cursor = root;
    let mut walked = String::new();
    for key in path.split('.') {
        if !walked.is_empty() {
            walked.push('.');
        }
        walked.push_str(key);
        cursor = cursor
            .get_mut(key)
            .ok_or_else(|| CliError::Usage(format!("unknown config key '{walked}'")))?;
    }
    *cursor = new;
    Ok(())
}

/// The built-in defaults as a pretty JSON document.
pub fn default_config_json() -> String {
    serde_json::to_string_pretty(&PipelineConfig::default()).expect("defaults serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let config = load_config(
            None,
            &[
                "segment.kmeans.k=7".into(),
                "segment.kmeans.seed=99".into(),
                "hair_removal_enabled=false".into(),
                "segment.class=melanoma".into(),
            ],
        )
        .unwrap();
        assert_eq!(config.segment.kmeans.k, 7);
        assert_eq!(config.segment.kmeans.seed, 99);
        assert!(!config.hair_removal_enabled);
        assert_eq!(config.segment.class.as_deref(), Some("melanoma"));
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        assert!(matches!(
            load_config(None, &["nonsense.key=1".into()]),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            load_config(None, &["segment.kmeans.k".into()]),
            Err(CliError::Usage(_))
        ));
        // type mismatch surfaces when the value deserializes
        assert!(matches!(
            load_config(None, &["segment.kmeans.k=notanumber".into()]),
            Err(CliError::Usage(_))
        ));
        // values must also pass parameter validation
        assert!(matches!(
            load_config(None, &["clahe.clip_limit=0.1".into()]),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, default_config_json()).unwrap();
        let config = load_config(Some(&path), &[]).unwrap();
        assert_eq!(config, PipelineConfig::default());

        // partial files are fine
        std::fs::write(&path, r#"{"workers": 3}"#).unwrap();
        let config = load_config(Some(&path), &[]).unwrap();
        assert_eq!(config.workers, 3);
        assert!(config.clahe_enabled);
    }
}
