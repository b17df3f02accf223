//! On-disk cache of kernel tables keyed by (t, ϑ, grid spec, code version).
//!
//! Each entry is a kernel grid container guarded by a `<key>.lock` file.
//! Entries are checked against direct evaluation when loaded and rebuilt
//! when unreadable, mismatched or inaccurate.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shf_core::io::{read_container, CODE_VERSION};
use shf_core::kernels::{build_kernel_grid, DisorderParam, GridSpec, KernelGrid, KernelGridHeader, GRID_FORMAT_VERSION};

use crate::HarnessError;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "SHF_CACHE_DIR";
pub const LOAD_PROBES: usize = 100;
const STALE_LOCK: Duration = Duration::from_secs(600);
const LOCK_TIMEOUT: Duration = Duration::from_secs(1800);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheAction {
    Hit,
    Built,
    Rebuilt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEvent {
    pub key: String,
    pub t: f64,
    pub theta: f64,
    pub action: CacheAction,
    pub detail: String,
}

#[derive(Debug)]
pub struct KernelCache {
    dir: PathBuf,
    events: Mutex<Vec<CacheEvent>>,
}

struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(path: PathBuf) -> Result<Self, HarnessError> {
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let _ = writeln!(f, "{}", std::process::id());
                    return Ok(LockGuard(path));
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let age = std::fs::metadata(&path).and_then(|m| m.modified()).ok().and_then(|m| m.elapsed().ok());
                    if age.is_some_and(|a| a > STALE_LOCK) {
                        let _ = std::fs::remove_file(&path);
                        continue;
                    }
                    if start.elapsed() > LOCK_TIMEOUT {
                        return Err(HarnessError::Io(format!("timed out waiting for {}", path.display())));
                    }
                    std::thread::sleep(Duration::from_millis(25));
                }
                Err(e) => return Err(HarnessError::Io(format!("{}: {e}", path.display()))),
            }
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// The cache key of a table.
pub fn cache_key(t: f64, theta: f64, spec: &GridSpec) -> String {
    let id = serde_json::json!({
        "t": t,
        "theta": theta,
        "grid": spec,
        "code_version": CODE_VERSION,
        "grid_format_version": GRID_FORMAT_VERSION,
    });
    let digest = Sha256::digest(serde_json::to_vec(&id).expect("key serializes"));
    hex::encode(&digest[..16])
}

/// `$SHF_CACHE_DIR`, else a `shf-kernels` directory under the system temp dir.
pub fn default_cache_dir() -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => std::env::temp_dir().join("shf-kernels"),
    }
}

impl KernelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        KernelCache { dir: dir.into(), events: Mutex::new(Vec::new()) }
    }

    pub fn from_env() -> Self {
        Self::new(default_cache_dir())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, t: f64, theta: f64, spec: &GridSpec) -> PathBuf {
        self.dir.join(format!("{}.bin", cache_key(t, theta, spec)))
    }

    pub fn take_events(&self) -> Vec<CacheEvent> {
        std::mem::take(&mut *self.events.lock().expect("cache log"))
    }

    /// Returns the table, loading and verifying a cached copy when one exists.
    pub fn get(&self, t: f64, theta: DisorderParam, spec: &GridSpec) -> Result<Arc<KernelGrid>, HarnessError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| HarnessError::Io(format!("{}: {e}", self.dir.display())))?;
        let key = cache_key(t, theta.theta, spec);
        let path = self.dir.join(format!("{key}.bin"));
        let _lock = LockGuard::acquire(self.dir.join(format!("{key}.lock")))?;
        let (grid, action, detail) = if path.exists() {
            match load_verified(&path, t, theta.theta, spec, &key) {
                Ok((g, err)) => (g, CacheAction::Hit, format!("probe error {err:.2e}")),
                Err(reason) => (self.build(t, theta, spec, &path)?, CacheAction::Rebuilt, reason),
            }
        } else {
            (self.build(t, theta, spec, &path)?, CacheAction::Built, String::new())
        };
        self.events.lock().expect("cache log").push(CacheEvent { key, t, theta: theta.theta, action, detail });
        Ok(Arc::new(grid))
    }

    fn build(&self, t: f64, theta: DisorderParam, spec: &GridSpec, path: &Path) -> Result<KernelGrid, HarnessError> {
        let g = build_kernel_grid(t, theta, spec)?;
        g.save(path)?;
        Ok(g)
    }
}

fn probe_seed(key: &str) -> u64 {
    u64::from_str_radix(&key[..16], 16).unwrap_or(0)
}

fn load_verified(path: &Path, t: f64, theta: f64, spec: &GridSpec, key: &str) -> Result<(KernelGrid, f64), String> {
    let (h, _) = read_container(path, "kernel_grid").map_err(|e| e.to_string())?;
    let header: KernelGridHeader = serde_json::from_value(h).map_err(|e| format!("grid header: {e}"))?;
    if header.code_version != CODE_VERSION {
        return Err(format!("code version {} differs from {CODE_VERSION}", header.code_version));
    }
    if header.t != t || header.theta != theta || &header.grid != spec {
        return Err("header does not match the requested table".into());
    }
    let g = KernelGrid::load(path).map_err(|e| e.to_string())?;
    let err = g.probe_error(LOAD_PROBES, probe_seed(key)).map_err(|e| e.to_string())?;
    if !(err <= header.interp_rel_tol) {
        return Err(format!("probe error {err:.2e} exceeds {:.1e}", header.interp_rel_tol));
    }
    Ok((g, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::new(1e-3, 5.0, 81).unwrap()
    }

    #[test]
    fn build_hit_and_rebuild() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path());
        let th = DisorderParam::new(0.0);
        let a = cache.get(0.5, th, &spec()).unwrap();
        let b = cache.get(0.5, th, &spec()).unwrap();
        assert_eq!(a.values, b.values);
        let path = cache.path_for(0.5, 0.0, &spec());
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 3] ^= 0x5a;
        std::fs::write(&path, bytes).unwrap();
        let c = cache.get(0.5, th, &spec()).unwrap();
        assert_eq!(a.values, c.values);
        let ev = cache.take_events();
        let actions: Vec<_> = ev.iter().map(|e| e.action.clone()).collect();
        assert_eq!(actions, [CacheAction::Built, CacheAction::Hit, CacheAction::Rebuilt]);
        assert!(!ev[2].detail.is_empty());
        assert!(cache.take_events().is_empty());
        assert!(!dir.path().join(format!("{}.lock", ev[0].key)).exists());
    }

    #[test]
    fn keys_separate_tables() {
        let s = spec();
        let k = cache_key(0.5, 0.0, &s);
        assert_ne!(k, cache_key(0.5, 1.0, &s));
        assert_ne!(k, cache_key(0.25, 0.0, &s));
        assert_ne!(k, cache_key(0.5, 0.0, &s.refined(2)));
        assert_eq!(k, cache_key(0.5, 0.0, &spec()));
    }

    #[test]
    fn mismatched_header_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let cache = KernelCache::new(dir.path());
        let th = DisorderParam::new(0.0);
        cache.get(0.5, th, &spec()).unwrap();
        // a table for another time stored under this key
        let other = build_kernel_grid(0.25, th, &spec()).unwrap();
        other.save(&cache.path_for(0.5, 0.0, &spec())).unwrap();
        let g = cache.get(0.5, th, &spec()).unwrap();
        assert_eq!(g.t, 0.5);
        let ev = cache.take_events();
        assert_eq!(ev[1].action, CacheAction::Rebuilt);
    }
}
