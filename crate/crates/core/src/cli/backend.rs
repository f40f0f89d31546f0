//! Backend selection and configuration layering.
//!
//! Precedence, highest first: command-line flags, `--config` TOML file,
//! environment (`CLUSTERPRIOR_ENDPOINT`, `CLUSTERPRIOR_MODEL`), defaults.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use super::args::BackendArgs;
use super::CliError;
use crate::gateway::{BackendConfig, ChatBackend, HttpBackend, MockBackend};
use crate::prompt::{PromptVariant, Template};
use crate::sequence::StrategyKind;

pub const ENDPOINT_ENV: &str = "CLUSTERPRIOR_ENDPOINT";
pub const MODEL_ENV: &str = "CLUSTERPRIOR_MODEL";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    endpoint: Option<String>,
    model_name: Option<String>,
    temperature: Option<f64>,
    max_response_tokens: Option<u32>,
    request_timeout: Option<f64>,
    max_retries: Option<u32>,
    retry_backoff: Option<f64>,
}

fn secs(v: f64, what: &str) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(v).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

pub fn resolve_config(args: &BackendArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<BackendConfig, CliError> {
    let mut cfg = BackendConfig::default();
    if let Some(v) = env(ENDPOINT_ENV) {
        cfg.endpoint = v;
    }
    if let Some(v) = env(MODEL_ENV) {
        cfg.model_name = v;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(v) = file.endpoint {
            cfg.endpoint = v;
        }
        if let Some(v) = file.model_name {
            cfg.model_name = v;
        }
        if let Some(v) = file.temperature {
            cfg.temperature = v;
        }
        if let Some(v) = file.max_response_tokens {
            cfg.max_response_tokens = v;
        }
        if let Some(v) = file.request_timeout {
            cfg.request_timeout = secs(v, "request_timeout")?;
        }
        if let Some(v) = file.max_retries {
            cfg.max_retries = v;
        }
        if let Some(v) = file.retry_backoff {
            cfg.retry_backoff = secs(v, "retry_backoff")?;
        }
    }
    if let Some(v) = &args.backend {
        cfg.endpoint = v.clone();
    }
    if let Some(v) = &args.model {
        cfg.model_name = v.clone();
    }
    if let Some(v) = args.temperature {
        cfg.temperature = v;
    }
    if let Some(v) = args.max_tokens {
        cfg.max_response_tokens = v;
    }
    if let Some(v) = args.max_retries {
        cfg.max_retries = v;
    }
    if let Some(v) = args.timeout {
        cfg.request_timeout = secs(v, "--timeout")?;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

/// Splits `KEY=VALUE` into its parts; a bare value has no key.
fn split_keyed(spec: &str) -> (Option<&str>, &str) {
    match spec.split_once('=') {
        Some((k, v)) if !k.is_empty() && !k.contains(['/', '\\']) => (Some(k), v),
        _ => (None, spec),
    }
}

/// Mock script paths keyed by strategy; `None` is the shared default.
pub fn mock_scripts(args: &BackendArgs) -> Result<HashMap<Option<StrategyKind>, PathBuf>, CliError> {
    let mut out = HashMap::new();
    for spec in &args.mock_scripts {
        let (key, path) = split_keyed(spec);
        let key = key
            .map(|k| k.parse::<StrategyKind>().map_err(CliError::Config))
            .transpose()?;
        if out.insert(key, PathBuf::from(path)).is_some() {
            return Err(CliError::Config(format!("mock script given twice for '{spec}'")));
        }
    }
    Ok(out)
}

pub fn templates(args: &BackendArgs) -> Result<HashMap<PromptVariant, Template>, CliError> {
    let mut out = HashMap::new();
    for spec in &args.templates {
        let (key, path) = split_keyed(spec);
        let variant = match key {
            Some(k) => k.parse::<PromptVariant>().map_err(CliError::Config)?,
            None => PromptVariant::Cluster,
        };
        let template = Template::from_file(Path::new(path)).map_err(|e| CliError::Config(e.to_string()))?;
        out.insert(variant, template);
    }
    Ok(out)
}

/// Builds the backend a model strategy should use: its own mock script,
/// the shared mock script, or the HTTP endpoint.
pub fn backend_for(
    strategy: StrategyKind,
    args: &BackendArgs,
    scripts: &HashMap<Option<StrategyKind>, PathBuf>,
) -> Result<Box<dyn ChatBackend>, CliError> {
    if let Some(path) = scripts.get(&Some(strategy)).or_else(|| scripts.get(&None)) {
        let mock = MockBackend::from_file(path, args.mock_cycle).map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(Box::new(mock));
    }
    if !scripts.is_empty() && args.backend.is_none() && args.config.is_none() {
        return Err(CliError::Config(format!("no mock script for strategy {strategy}")));
    }
    Ok(Box::new(HttpBackend::from_env()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> BackendArgs {
        BackendArgs {
            backend: None,
            model: None,
            config: None,
            mock_scripts: vec![],
            mock_cycle: false,
            temperature: None,
            max_tokens: None,
            max_retries: None,
            timeout: None,
            templates: vec![],
        }
    }

    #[test]
    fn precedence_flags_over_file_over_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.toml");
        std::fs::write(&path, "model_name = \"from-file\"\nmax_retries = 7\n").unwrap();
        let env = |k: &str| match k {
            ENDPOINT_ENV => Some("http://env/".to_string()),
            MODEL_ENV => Some("from-env".to_string()),
            _ => None,
        };
        let mut a = args();
        a.config = Some(path);
        let cfg = resolve_config(&a, &env).unwrap();
        assert_eq!(cfg.endpoint, "http://env/");
        assert_eq!(cfg.model_name, "from-file");
        assert_eq!(cfg.max_retries, 7);

        a.model = Some("from-flag".into());
        a.backend = Some("http://flag/".into());
        let cfg = resolve_config(&a, &env).unwrap();
        assert_eq!(cfg.model_name, "from-flag");
        assert_eq!(cfg.endpoint, "http://flag/");
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let mut a = args();
        a.temperature = Some(-1.0);
        assert!(matches!(resolve_config(&a, &|_| None), Err(CliError::Config(_))));
    }

    #[test]
    fn keyed_specs() {
        assert_eq!(split_keyed("direct=/tmp/x"), (Some("direct"), "/tmp/x"));
        assert_eq!(split_keyed("/tmp/a=b"), (None, "/tmp/a=b"));
        assert_eq!(split_keyed("plain.jsonl"), (None, "plain.jsonl"));
        let mut a = args();
        a.mock_scripts = vec!["s.jsonl".into(), "simple=t.jsonl".into()];
        let m = mock_scripts(&a).unwrap();
        assert_eq!(m[&None], PathBuf::from("s.jsonl"));
        assert_eq!(m[&Some(StrategyKind::SimpleLlm)], PathBuf::from("t.jsonl"));
        a.mock_scripts = vec!["bogus=t.jsonl".into()];
        assert!(mock_scripts(&a).is_err());
    }
}
