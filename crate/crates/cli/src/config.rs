//! Settings resolution (flags > config file > environment > defaults) and
//! backend construction.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use knot_core::backends::{
    Backend, HttpBackend, HttpBackendConfig, OracleBackend, ReplayMode, ReplayStore, DEFAULT_API_KEY_ENV,
};
use knot_core::metrics::PriceTable;
use knot_core::tasks::CorpusBackend;
use serde::Deserialize;

/// How a backend is chosen on the command line or in the config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Oracle,
    Corpus,
    Http,
    Replay(PathBuf),
    ReplayLenient(PathBuf),
    Record(PathBuf),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, path) = match s.split_once(':') {
            Some((k, p)) => (k, Some(PathBuf::from(p))),
            None => (s, None),
        };
        match (kind, path) {
            ("oracle", None) => Ok(BackendSpec::Oracle),
            ("corpus", None) => Ok(BackendSpec::Corpus),
            ("http", None) => Ok(BackendSpec::Http),
            ("replay", Some(p)) => Ok(BackendSpec::Replay(p)),
            ("replay-lenient", Some(p)) => Ok(BackendSpec::ReplayLenient(p)),
            ("record", Some(p)) => Ok(BackendSpec::Record(p)),
            _ => Err(format!(
                "unknown backend `{s}` (expected oracle, corpus, http, replay:PATH, replay-lenient:PATH or record:PATH)"
            )),
        }
    }
}

impl BackendSpec {
    fn needs_network(&self, live: bool) -> bool {
        match self {
            BackendSpec::Http => true,
            BackendSpec::ReplayLenient(_) | BackendSpec::Record(_) => live,
            _ => false,
        }
    }
}

/// Source of the solution plan and script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanSpec {
    /// Bundled plan plus the instance's reference script.
    Fixture,
    Backend(BackendSpec),
}

impl FromStr for PlanSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "fixture" {
            Ok(PlanSpec::Fixture)
        } else {
            s.parse().map(PlanSpec::Backend)
        }
    }
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, env = "KNOT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Execution backend: oracle, corpus, http, replay:PATH, replay-lenient:PATH, record:PATH.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Planning backend for stages 1 and 2: fixture or any execution backend.
    #[arg(long, global = true)]
    pub plan_backend: Option<String>,
    /// Allow network calls to the model provider.
    #[arg(long, global = true)]
    pub live: bool,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Model for the planning stages; defaults to --model.
    #[arg(long, global = true)]
    pub plan_model: Option<String>,
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub max_tokens: Option<u32>,
    /// Name of the environment variable holding the API key.
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,
    /// Request timeout in seconds.
    #[arg(long, global = true)]
    pub timeout: Option<u64>,
    /// Worker threads for sample execution.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Concurrent calls within one script; 1 runs instructions in order.
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,
    /// TOML file with `input_per_1k` and `output_per_1k` prices.
    #[arg(long, global = true)]
    pub prices: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub plan_backend: Option<String>,
    pub live: Option<bool>,
    pub model: Option<String>,
    pub plan_model: Option<String>,
    pub base_url: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub api_key_env: Option<String>,
    pub timeout: Option<u64>,
    pub jobs: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub prices: Option<PriceTable>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// `KNOT_*` variables, the lowest-precedence explicit source.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let parse = |name: &str| -> Result<Option<u64>> {
            get(name).map(|v| v.parse().with_context(|| format!("{name}={v} is not a number"))).transpose()
        };
        Ok(Self {
            backend: get("KNOT_BACKEND"),
            plan_backend: get("KNOT_PLAN_BACKEND"),
            live: get("KNOT_LIVE").map(|v| matches!(v.as_str(), "1" | "true" | "yes")),
            model: get("KNOT_MODEL"),
            plan_model: get("KNOT_PLAN_MODEL"),
            base_url: get("KNOT_BASE_URL"),
            jobs: parse("KNOT_JOBS")?.map(|v| v as usize),
            ..Self::default()
        })
    }

    fn or(self, lower: FileConfig) -> FileConfig {
        FileConfig {
            backend: self.backend.or(lower.backend),
            plan_backend: self.plan_backend.or(lower.plan_backend),
            live: self.live.or(lower.live),
            model: self.model.or(lower.model),
            plan_model: self.plan_model.or(lower.plan_model),
            base_url: self.base_url.or(lower.base_url),
            temperature: self.temperature.or(lower.temperature),
            max_tokens: self.max_tokens.or(lower.max_tokens),
            api_key_env: self.api_key_env.or(lower.api_key_env),
            timeout: self.timeout.or(lower.timeout),
            jobs: self.jobs.or(lower.jobs),
            max_in_flight: self.max_in_flight.or(lower.max_in_flight),
            prices: self.prices.or(lower.prices),
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub backend: BackendSpec,
    pub plan: PlanSpec,
    pub live: bool,
    pub http: HttpBackendConfig,
    pub plan_model: Option<String>,
    pub jobs: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub prices: Option<PriceTable>,
}

impl Settings {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        Self::resolve_with(args, |name| std::env::var(name).ok())
    }

    pub fn resolve_with(args: &GlobalArgs, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let prices = match &args.prices {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading prices {}", path.display()))?;
                Some(toml::from_str(&text).with_context(|| format!("parsing prices {}", path.display()))?)
            }
            None => None,
        };
        let flags = FileConfig {
            backend: args.backend.clone(),
            plan_backend: args.plan_backend.clone(),
            live: args.live.then_some(true),
            model: args.model.clone(),
            plan_model: args.plan_model.clone(),
            base_url: args.base_url.clone(),
            temperature: args.temperature,
            max_tokens: args.max_tokens,
            api_key_env: args.api_key_env.clone(),
            timeout: args.timeout,
            jobs: args.jobs,
            max_in_flight: args.max_in_flight,
            prices,
        };
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let merged = flags.or(file).or(FileConfig::from_env(&env)?);

        let backend: BackendSpec = merged.backend.as_deref().unwrap_or("corpus").parse().map_err(anyhow::Error::msg)?;
        let plan: PlanSpec = merged.plan_backend.as_deref().unwrap_or("fixture").parse().map_err(anyhow::Error::msg)?;
        let live = merged.live.unwrap_or(false);
        if let Some(p) = merged.prices {
            PriceTable::new(p.input_per_1k, p.output_per_1k)?;
        }
        if merged.jobs == Some(0) || merged.max_in_flight == Some(0) {
            bail!("--jobs and --max-in-flight must be positive");
        }

        let mut http = HttpBackendConfig::default();
        if let Some(v) = merged.model {
            http.model = v;
        }
        if let Some(v) = merged.base_url {
            http.base_url = v;
        }
        if let Some(v) = merged.temperature {
            http.temperature = v;
        }
        if let Some(v) = merged.max_tokens {
            http.max_output_tokens = v;
        }
        http.api_key_env = merged.api_key_env.unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string());
        if let Some(v) = merged.timeout {
            http.timeout = Duration::from_secs(v);
        }

        Ok(Self {
            backend,
            plan,
            live,
            http,
            plan_model: merged.plan_model,
            jobs: merged.jobs,
            max_in_flight: merged.max_in_flight,
            prices: merged.prices,
        })
    }

    fn http_backend(&self, model: Option<&str>) -> Result<Box<dyn Backend>> {
        if !self.live {
            bail!("the http backend calls a paid API; pass --live to allow it");
        }
        let mut config = self.http.clone();
        if let Some(m) = model {
            config.model = m.to_string();
        }
        Ok(Box::new(HttpBackend::from_env(config)?))
    }

    /// The backend misses and recordings go to: the live model with
    /// `--live`, otherwise the offline corpus oracle.
    fn inner_backend(&self, model: Option<&str>) -> Result<Box<dyn Backend>> {
        if self.live {
            self.http_backend(model)
        } else {
            Ok(Box::new(CorpusBackend::new()))
        }
    }

    fn build(&self, spec: &BackendSpec, model: Option<&str>) -> Result<Box<dyn Backend>> {
        if spec.needs_network(self.live) && !self.live {
            bail!("backend needs network access; pass --live");
        }
        Ok(match spec {
            BackendSpec::Oracle => Box::new(OracleBackend::new()),
            BackendSpec::Corpus => Box::new(CorpusBackend::new()),
            BackendSpec::Http => self.http_backend(model)?,
            BackendSpec::Replay(p) => Box::new(ReplayStore::open(p, ReplayMode::ReplayStrict)?),
            BackendSpec::ReplayLenient(p) => Box::new(ReplayStore::with_fallback(p, self.inner_backend(model)?)?),
            BackendSpec::Record(p) => Box::new(ReplayStore::record(p, self.inner_backend(model)?)?),
        })
    }

    pub fn exec_backend(&self) -> Result<Box<dyn Backend>> {
        self.build(&self.backend, None)
    }

    /// `None` for the fixture planner.
    pub fn plan_backend(&self) -> Result<Option<Box<dyn Backend>>> {
        match &self.plan {
            PlanSpec::Fixture => Ok(None),
            PlanSpec::Backend(spec) => {
                let model = self.plan_model.as_deref().or(Some(self.http.model.as_str()));
                self.build(spec, model).map(Some)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn backend_specs() {
        assert_eq!("oracle".parse::<BackendSpec>().unwrap(), BackendSpec::Oracle);
        assert_eq!("replay:a/b.jsonl".parse::<BackendSpec>().unwrap(), BackendSpec::Replay("a/b.jsonl".into()));
        assert!("replay".parse::<BackendSpec>().is_err());
        assert!("gpt".parse::<BackendSpec>().is_err());
        assert_eq!("fixture".parse::<PlanSpec>().unwrap(), PlanSpec::Fixture);
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("knot.toml");
        std::fs::write(&path, "model = \"from-file\"\nbase_url = \"http://file\"\njobs = 3\n").unwrap();
        let args = GlobalArgs { config: Some(path), model: Some("from-flag".into()), ..GlobalArgs::default() };
        let e = env(&[
            ("KNOT_MODEL", "from-env"),
            ("KNOT_BASE_URL", "http://env"),
            ("KNOT_JOBS", "5"),
            ("KNOT_BACKEND", "oracle"),
        ]);
        let s = Settings::resolve_with(&args, e).unwrap();
        assert_eq!(s.http.model, "from-flag");
        assert_eq!(s.http.base_url, "http://file");
        assert_eq!(s.jobs, Some(3));
        assert_eq!(s.backend, BackendSpec::Oracle);
        let defaults = Settings::resolve_with(&GlobalArgs::default(), env(&[])).unwrap();
        assert_eq!(defaults.backend, BackendSpec::Corpus);
        assert_eq!(defaults.plan, PlanSpec::Fixture);
        assert!(!defaults.live);
    }

    #[test]
    fn http_requires_live() {
        let args = GlobalArgs { backend: Some("http".into()), ..GlobalArgs::default() };
        let s = Settings::resolve_with(&args, env(&[])).unwrap();
        let err = s.exec_backend().err().unwrap();
        assert!(err.to_string().contains("--live"));
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("knot.toml");
        std::fs::write(&path, "modle = \"x\"\n").unwrap();
        let args = GlobalArgs { config: Some(path), ..GlobalArgs::default() };
        assert!(Settings::resolve_with(&args, env(&[])).is_err());
    }
}
