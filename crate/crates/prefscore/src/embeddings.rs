//! Essay embedding sources: a remote HTTP provider with a local
//! content-addressed cache, and a synthetic generator for desk-scale,
//! fully controlled experiments.

use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::EssaySet;
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::seeding::rng_for_context;

// ---------------------------------------------------------------------------
// synthetic embeddings
// ---------------------------------------------------------------------------

/// Controls for the synthetic embedding generator: each essay's vector is
/// `signal_strength · gold · u + noise_std · z`, with `u` a fixed seeded
/// unit direction and `z` per-essay standard normal noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub signal_strength: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            dim: 16,
            signal_strength: 1.0,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("embedding dim must be at least 1"));
        }
        if !(self.signal_strength.is_finite() && self.signal_strength >= 0.0) {
            return Err(Error::config(
                "signal_strength must be nonnegative and finite",
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// The seeded unit direction along which gold scores are encoded.
fn signal_direction(spec: &SyntheticSpec) -> Vec<f64> {
    let mut rng = rng_for_context(spec.seed, &["synthetic-direction"]);
    loop {
        let raw: Vec<f64> = (0..spec.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return raw.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// Attach synthetic embeddings to every essay. Requires gold scores; the
/// result is deterministic per (spec.seed, essay id), independent of essay
/// order.
pub fn embed_synthetic(essay_set: &EssaySet, spec: &SyntheticSpec) -> Result<EssaySet> {
    spec.validate()?;
    essay_set.require_golds()?;
    let direction = signal_direction(spec);

    let mut embeddings = Vec::with_capacity(essay_set.len());
    for essay in essay_set.essays() {
        let gold = essay.gold_score.expect("checked above");
        let mut noise_rng = rng_for_context(spec.seed, &["synthetic-noise", &essay.id]);
        let vector: Vec<f64> = direction
            .iter()
            .map(|&u| {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                spec.signal_strength * gold * u + spec.noise_std * z
            })
            .collect();
        embeddings.push(vector);
    }
    essay_set.clone().with_embeddings(embeddings)
}

// ---------------------------------------------------------------------------
// remote embeddings with local cache
// ---------------------------------------------------------------------------

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_max_attempts() -> usize {
    3
}

/// Remote embedding endpoint configuration. The API key is read from the
/// named environment variable at call time and never stored in artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEmbedConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    /// Directory for the per-essay response cache.
    pub cache_dir: PathBuf,
}

impl RemoteEmbedConfig {
    /// Config with default credentials variable, timeout, and retry budget.
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        cache_dir: impl Into<PathBuf>,
    ) -> Self {
        RemoteEmbedConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: default_api_key_env(),
            timeout_secs: default_timeout_secs(),
            max_attempts: default_max_attempts(),
            cache_dir: cache_dir.into(),
        }
    }
}

/// One cached embedding: keyed by (provider, model, essay id) so switching
/// either provider or model never reuses stale vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    id: String,
    provider: String,
    model: String,
    embedding: Vec<f64>,
}

fn cache_key(provider: &str, model: &str, essay_id: &str) -> String {
    let mut hasher = Sha256::new();
    for part in [provider, model, essay_id] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Transport abstraction so the cache and orchestration logic can be tested
/// without a network.
pub trait EmbedTransport {
    /// Fetch the embedding vector for one text.
    fn fetch(&self, model: &str, text: &str) -> Result<Vec<f64>>;
}

/// HTTP transport posting to `{base_url}/embeddings`.
pub struct HttpEmbedTransport {
    base_url: String,
    client: reqwest::blocking::Client,
    api_key: String,
}

impl std::fmt::Debug for HttpEmbedTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // never expose the credential, even in debug logs
        f.debug_struct("HttpEmbedTransport")
            .field("base_url", &self.base_url)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl HttpEmbedTransport {
    pub fn new(cfg: &RemoteEmbedConfig) -> Result<Self> {
        let api_key = std::env::var(&cfg.api_key_env).map_err(|_| Error::MissingCredential {
            name: cfg.api_key_env.clone(),
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Remote {
                endpoint: cfg.base_url.clone(),
                message: format!("failed to build HTTP client: {e}"),
            })?;
        Ok(HttpEmbedTransport {
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            client,
            api_key,
        })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

impl EmbedTransport for HttpEmbedTransport {
    fn fetch(&self, model: &str, text: &str) -> Result<Vec<f64>> {
        let url = format!("{}/embeddings", self.base_url);
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&EmbedRequest { model, input: text })
            .send()
            .map_err(|e| Error::Remote {
                endpoint: url.clone(),
                message: format!("embedding request failed: {e}"),
            })?;
        let status = response.status();
        let body = response.text().map_err(|e| Error::Remote {
            endpoint: url.clone(),
            message: format!("embedding response unreadable: {e}"),
        })?;
        if !status.is_success() {
            let snippet: String = body.chars().take(240).collect();
            return Err(Error::Remote {
                endpoint: url.clone(),
                message: format!("embedding endpoint returned {status}: {snippet}"),
            });
        }
        let parsed: EmbedResponse = serde_json::from_str(&body).map_err(|e| Error::Remote {
            endpoint: url.clone(),
            message: format!("embedding response malformed: {e}"),
        })?;
        let first = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| Error::Remote {
                endpoint: url,
                message: "embedding response contained no data".to_string(),
            })?;
        Ok(first.embedding)
    }
}

/// Fetch (or reload from cache) an embedding for every essay, using the
/// given transport. Cache files are one JSON document per (provider, model,
/// essay) key, written atomically; warm entries cause no transport calls.
pub fn embed_with_transport(
    essay_set: &EssaySet,
    cfg: &RemoteEmbedConfig,
    transport: &dyn EmbedTransport,
) -> Result<EssaySet> {
    if cfg.max_attempts == 0 {
        return Err(Error::config("max_attempts must be positive"));
    }
    std::fs::create_dir_all(&cfg.cache_dir)
        .map_err(|e| Error::io(cfg.cache_dir.display().to_string(), e))?;

    let mut embeddings: Vec<Vec<f64>> = Vec::with_capacity(essay_set.len());
    let mut dim: Option<usize> = None;
    for essay in essay_set.essays() {
        let key = cache_key(&cfg.base_url, &cfg.model, &essay.id);
        let path = cfg.cache_dir.join(format!("{key}.json"));
        let vector = match load_cached(&path, cfg, &essay.id)? {
            Some(vector) => vector,
            None => {
                let vector = fetch_with_retries(transport, cfg, &essay.id, &essay.text)?;
                let entry = CacheEntry {
                    id: essay.id.clone(),
                    provider: cfg.base_url.clone(),
                    model: cfg.model.clone(),
                    embedding: vector.clone(),
                };
                let json = serde_json::to_vec(&entry)
                    .map_err(|e| Error::io(path.display().to_string(), std::io::Error::other(e)))?;
                atomic_write(&path, &json)?;
                vector
            }
        };
        match dim {
            None => dim = Some(vector.len()),
            Some(expected) if expected != vector.len() => {
                return Err(Error::DimensionMismatch {
                    id: essay.id.clone(),
                    expected,
                    actual: vector.len(),
                });
            }
            Some(_) => {}
        }
        embeddings.push(vector);
    }
    essay_set.clone().with_embeddings(embeddings)
}

fn load_cached(path: &Path, cfg: &RemoteEmbedConfig, essay_id: &str) -> Result<Option<Vec<f64>>> {
    let bytes = match std::fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path.display().to_string(), e)),
    };
    let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: format!("corrupt embedding cache entry: {e}"),
    })?;
    if entry.id != essay_id || entry.provider != cfg.base_url || entry.model != cfg.model {
        return Err(Error::invalid(format!(
            "embedding cache entry at {} does not match (essay {essay_id:?}, model {:?})",
            path.display(),
            cfg.model
        )));
    }
    Ok(Some(entry.embedding))
}

fn fetch_with_retries(
    transport: &dyn EmbedTransport,
    cfg: &RemoteEmbedConfig,
    essay_id: &str,
    text: &str,
) -> Result<Vec<f64>> {
    let mut last_error = None;
    for _ in 0..cfg.max_attempts {
        match transport.fetch(&cfg.model, text) {
            Ok(vector) => {
                if vector.is_empty() || vector.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Remote {
                        endpoint: cfg.base_url.clone(),
                        message: format!("embedding for essay {essay_id:?} is empty or non-finite"),
                    });
                }
                return Ok(vector);
            }
            Err(e @ Error::Remote { .. }) => last_error = Some(e),
            Err(other) => return Err(other),
        }
    }
    Err(Error::Remote {
        endpoint: cfg.base_url.clone(),
        message: format!(
            "embedding failed for essay {essay_id:?} after {} attempts: {}",
            cfg.max_attempts,
            last_error.map(|e| e.to_string()).unwrap_or_default()
        ),
    })
}

/// Fetch embeddings over HTTP with the configured endpoint and cache.
pub fn embed_remote(essay_set: &EssaySet, cfg: &RemoteEmbedConfig) -> Result<EssaySet> {
    let transport = HttpEmbedTransport::new(cfg)?;
    embed_with_transport(essay_set, cfg, &transport)
}
