//! Exchange-rate sourcing: a snapshot file, optionally refreshed from a live
//! endpoint that serves the same JSON shape.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use fabdecide_core::{load_rates, seed, MoneyError, RateTable};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    #[default]
    Snapshot,
    Live,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateSourceConfig {
    pub mode: RateMode,
    /// Snapshot file; the bundled snapshot is used when unset.
    pub snapshot_path: Option<PathBuf>,
    pub live_url: Option<String>,
    pub timeout_ms: u64,
    pub cache_ttl_s: u64,
}

impl Default for RateSourceConfig {
    fn default() -> Self {
        RateSourceConfig { mode: RateMode::Snapshot, snapshot_path: None, live_url: None, timeout_ms: 2000, cache_ttl_s: 300 }
    }
}

#[derive(Debug, Error)]
pub enum RateConfigError {
    #[error("live rate mode needs a live_url")]
    MissingLiveUrl,
    #[error("cannot read rate snapshot {path}: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error("invalid rate snapshot {path}: {source}")]
    Invalid { path: PathBuf, source: MoneyError },
    #[error("cannot build HTTP client: {0}")]
    Client(String),
}

/// Reads a snapshot file, or the bundled snapshot when `path` is `None`.
pub fn load_snapshot(path: Option<&Path>) -> Result<RateTable, RateConfigError> {
    let Some(path) = path else { return Ok(seed::rates()) };
    let file = File::open(path).map_err(|source| RateConfigError::Unreadable { path: path.into(), source })?;
    load_rates(file).map_err(|source| RateConfigError::Invalid { path: path.into(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateOrigin {
    Snapshot,
    Live,
}

impl RateOrigin {
    pub fn as_str(&self) -> &'static str {
        match self {
            RateOrigin::Snapshot => "snapshot",
            RateOrigin::Live => "live",
        }
    }
}

/// The table in effect for one request.
#[derive(Debug, Clone)]
pub struct RateView {
    pub table: Arc<RateTable>,
    pub origin: RateOrigin,
    /// Why the live source was not used, when it should have been.
    pub warning: Option<String>,
}

enum Cached {
    Fresh(Arc<RateTable>),
    Failed(String),
}

struct CacheEntry {
    at: Instant,
    value: Cached,
}

/// Shared rate provider. Live tables are cached for `cache_ttl_s` and
/// swapped in whole; a failed fetch falls back to the snapshot and is not
/// retried until the TTL expires.
pub struct RateService {
    config: RateSourceConfig,
    snapshot: Arc<RateTable>,
    client: Option<reqwest::Client>,
    cache: RwLock<Option<CacheEntry>>,
    refresh: Mutex<()>,
}

impl RateService {
    pub fn new(config: RateSourceConfig) -> Result<Self, RateConfigError> {
        let snapshot = Arc::new(load_snapshot(config.snapshot_path.as_deref())?);
        let client = match config.mode {
            RateMode::Snapshot => None,
            RateMode::Live => {
                if config.live_url.is_none() {
                    return Err(RateConfigError::MissingLiveUrl);
                }
                let client = reqwest::Client::builder()
                    .timeout(Duration::from_millis(config.timeout_ms))
                    .build()
                    .map_err(|e| RateConfigError::Client(e.to_string()))?;
                Some(client)
            }
        };
        Ok(RateService { config, snapshot, client, cache: RwLock::new(None), refresh: Mutex::new(()) })
    }

    pub fn snapshot(&self) -> Arc<RateTable> {
        self.snapshot.clone()
    }

    fn snapshot_view(&self, warning: Option<String>) -> RateView {
        RateView { table: self.snapshot.clone(), origin: RateOrigin::Snapshot, warning }
    }

    fn cached(&self) -> Option<RateView> {
        let guard = self.cache.read().unwrap_or_else(|e| e.into_inner());
        let entry = guard.as_ref()?;
        if entry.at.elapsed() >= Duration::from_secs(self.config.cache_ttl_s) {
            return None;
        }
        Some(match &entry.value {
            Cached::Fresh(table) => RateView { table: table.clone(), origin: RateOrigin::Live, warning: None },
            Cached::Failed(why) => self.snapshot_view(Some(why.clone())),
        })
    }

    fn store(&self, value: Cached) {
        *self.cache.write().unwrap_or_else(|e| e.into_inner()) = Some(CacheEntry { at: Instant::now(), value });
    }

    /// The table to use right now; never fails.
    pub async fn current(&self) -> RateView {
        let (Some(client), Some(url)) = (&self.client, &self.config.live_url) else {
            return self.snapshot_view(None);
        };
        if let Some(view) = self.cached() {
            return view;
        }
        let _refreshing = self.refresh.lock().await;
        if let Some(view) = self.cached() {
            return view;
        }
        match fetch(client, url).await {
            Ok(table) => {
                let table = Arc::new(table);
                self.store(Cached::Fresh(table.clone()));
                RateView { table, origin: RateOrigin::Live, warning: None }
            }
            Err(why) => {
                let why = format!("live rates unavailable, using snapshot: {why}");
                tracing::warn!("{why}");
                self.store(Cached::Failed(why.clone()));
                self.snapshot_view(Some(why))
            }
        }
    }
}

async fn fetch(client: &reqwest::Client, url: &str) -> Result<RateTable, String> {
    let response = client.get(url).send().await.map_err(|e| e.to_string())?;
    let status = response.status();
    if !status.is_success() {
        return Err(format!("{url} answered {status}"));
    }
    let body = response.bytes().await.map_err(|e| e.to_string())?;
    RateTable::from_slice(&body).map_err(|e| e.to_string())
}

/// One-shot rate lookup for `config`.
pub async fn fetch_rates(config: &RateSourceConfig) -> Result<RateView, RateConfigError> {
    Ok(RateService::new(config.clone())?.current().await)
}
