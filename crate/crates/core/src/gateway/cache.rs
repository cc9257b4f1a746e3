//! Memoizing gateway wrapper with an optional append-only on-disk store.
//!
//! Entries are keyed by `(model_name, token_ids, sorted masked_positions,
//! position)`. The store is a JSONL file; each line holds one position's
//! vector, base64-encoded like on the wire. Lines from other models are
//! ignored on load, and a torn trailing line is skipped.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::protocol::{decode_log_probs, encode_log_probs};
use super::{
    DistributionRequest, DistributionResponse, Gateway, GatewayError, ModelInfo, Result, TaggedWord,
};
use crate::model::{TokenId, TokenOffset};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    token_ids: Vec<TokenId>,
    masked: Vec<usize>,
    position: usize,
}

#[derive(Serialize, Deserialize)]
struct DiskEntry {
    model: String,
    token_ids: Vec<TokenId>,
    masked_positions: Vec<usize>,
    position: usize,
    log_probs: String,
}

pub struct CachedGateway<G> {
    inner: G,
    info: ModelInfo,
    entries: RwLock<HashMap<CacheKey, Arc<Vec<f32>>>>,
    store: Option<Mutex<BufWriter<File>>>,
    store_path: Option<PathBuf>,
    inner_distribution_calls: AtomicU64,
}

impl<G: Gateway> CachedGateway<G> {
    /// In-memory cache only.
    pub fn new(inner: G) -> Result<Self> {
        let info = inner.handshake()?;
        Ok(Self {
            inner,
            info,
            entries: RwLock::new(HashMap::new()),
            store: None,
            store_path: None,
            inner_distribution_calls: AtomicU64::new(0),
        })
    }

    /// Cache persisted under `dir` in `<model_name>.cache.jsonl`; existing
    /// entries for the same model are loaded first.
    pub fn with_store(inner: G, dir: &Path) -> Result<Self> {
        let mut this = Self::new(inner)?;
        fs::create_dir_all(dir)?;
        let file_name: String = this
            .info
            .model_name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let path = dir.join(format!("{file_name}.cache.jsonl"));
        if path.exists() {
            let mut map = this.entries.write().expect("fresh lock");
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                let Ok(entry) = serde_json::from_str::<DiskEntry>(&line) else {
                    continue;
                };
                if entry.model != this.info.model_name {
                    continue;
                }
                let values = decode_log_probs(&entry.log_probs)?;
                let mut masked = entry.masked_positions;
                masked.sort_unstable();
                map.insert(
                    CacheKey {
                        token_ids: entry.token_ids,
                        masked,
                        position: entry.position,
                    },
                    Arc::new(values),
                );
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        // a torn final line must not swallow the next entry
        let len = file.metadata()?.len();
        if len > 0 && fs::read(&path)?.last() != Some(&b'\n') {
            file.write_all(b"\n")?;
        }
        this.store = Some(Mutex::new(BufWriter::new(file)));
        this.store_path = Some(path);
        Ok(this)
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }

    pub fn store_path(&self) -> Option<&Path> {
        self.store_path.as_deref()
    }

    /// Number of distribution requests forwarded to the wrapped gateway.
    pub fn inner_distribution_calls(&self) -> u64 {
        self.inner_distribution_calls.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flush(&self) -> Result<()> {
        if let Some(store) = &self.store {
            store
                .lock()
                .map_err(|_| GatewayError::Transport("cache store poisoned".into()))?
                .flush()?;
        }
        Ok(())
    }

    fn keys(req: &DistributionRequest) -> Vec<CacheKey> {
        let mut masked = req.masked_positions.clone();
        masked.sort_unstable();
        masked
            .iter()
            .map(|&position| CacheKey {
                token_ids: req.token_ids.clone(),
                masked: masked.clone(),
                position,
            })
            .collect()
    }

    fn lookup(&self, req: &DistributionRequest) -> Option<DistributionResponse> {
        let map = self.entries.read().ok()?;
        let mut per_position = std::collections::BTreeMap::new();
        for key in Self::keys(req) {
            let v = map.get(&key)?;
            per_position.insert(key.position, v.as_ref().clone());
        }
        Some(DistributionResponse {
            request_id: req.request_id.clone(),
            per_position,
        })
    }

    fn insert(&self, req: &DistributionRequest, resp: &DistributionResponse) -> Result<()> {
        let keys = Self::keys(req);
        let mut lines = Vec::new();
        {
            let mut map = self
                .entries
                .write()
                .map_err(|_| GatewayError::Transport("cache poisoned".into()))?;
            for key in keys {
                let Some(values) = resp.per_position.get(&key.position) else {
                    continue;
                };
                if map.contains_key(&key) {
                    continue;
                }
                if self.store.is_some() {
                    lines.push(
                        serde_json::to_string(&DiskEntry {
                            model: self.info.model_name.clone(),
                            token_ids: key.token_ids.clone(),
                            masked_positions: key.masked.clone(),
                            position: key.position,
                            log_probs: encode_log_probs(values),
                        })
                        .map_err(|e| GatewayError::Transport(e.to_string()))?,
                    );
                }
                map.insert(key, Arc::new(values.clone()));
            }
        }
        if let Some(store) = &self.store {
            let mut w = store
                .lock()
                .map_err(|_| GatewayError::Transport("cache store poisoned".into()))?;
            for line in lines {
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }
}

impl<G> Drop for CachedGateway<G> {
    fn drop(&mut self) {
        if let Some(store) = &self.store {
            if let Ok(mut w) = store.lock() {
                let _ = w.flush();
            }
        }
    }
}

impl<G: Gateway> Gateway for CachedGateway<G> {
    fn handshake(&self) -> Result<ModelInfo> {
        Ok(self.info.clone())
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenOffset>> {
        self.inner.tokenize(text)
    }

    fn distributions(&self, req: &DistributionRequest) -> Result<DistributionResponse> {
        self.distributions_batch(std::slice::from_ref(req))
            .pop()
            .unwrap_or_else(|| Err(GatewayError::Transport("no response".into())))
    }

    fn distributions_batch(
        &self,
        reqs: &[DistributionRequest],
    ) -> Vec<Result<DistributionResponse>> {
        let mut results: Vec<Option<Result<DistributionResponse>>> = Vec::with_capacity(reqs.len());
        let mut misses = Vec::new();
        let mut miss_slots = Vec::new();
        for (i, req) in reqs.iter().enumerate() {
            if let Err(e) = req.validate() {
                results.push(Some(Err(e)));
                continue;
            }
            match self.lookup(req) {
                Some(hit) => results.push(Some(Ok(hit))),
                None => {
                    results.push(None);
                    misses.push(req.clone());
                    miss_slots.push(i);
                }
            }
        }
        if !misses.is_empty() {
            self.inner_distribution_calls
                .fetch_add(misses.len() as u64, Ordering::Relaxed);
            for ((slot, req), resp) in miss_slots
                .into_iter()
                .zip(&misses)
                .zip(self.inner.distributions_batch(&misses))
            {
                results[slot] = Some(resp.and_then(|r| {
                    self.insert(req, &r)?;
                    Ok(r)
                }));
            }
        }
        results
            .into_iter()
            .map(|r| r.expect("every request answered"))
            .collect()
    }

    fn decode(&self, token_ids: &[TokenId]) -> Result<Vec<String>> {
        self.inner.decode(token_ids)
    }

    fn pos_tag(&self, text: &str) -> Result<Vec<TaggedWord>> {
        self.inner.pos_tag(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockGateway;

    fn req(id: &str, masked: Vec<usize>) -> DistributionRequest {
        DistributionRequest::new(id, vec![3, 4, 5, 6], masked)
    }

    #[test]
    fn cache_is_transparent() {
        let plain = MockGateway::new(9);
        let cached = CachedGateway::new(MockGateway::new(9)).unwrap();
        for masked in [vec![1], vec![1, 2], vec![2, 1], vec![1]] {
            let r = req("x", masked);
            assert_eq!(
                plain.distributions(&r).unwrap(),
                cached.distributions(&r).unwrap()
            );
        }
        // [1,2] and [2,1] share entries; the second [1] is a hit
        assert_eq!(cached.inner_distribution_calls(), 2);
    }

    #[test]
    fn warm_store_needs_no_inner_calls() {
        let dir = tempfile::tempdir().unwrap();
        let reqs = vec![req("a", vec![0]), req("b", vec![0, 3]), req("c", vec![2])];
        let first: Vec<_> = {
            let cached = CachedGateway::with_store(MockGateway::new(1), dir.path()).unwrap();
            let out = cached.distributions_batch(&reqs);
            assert_eq!(cached.inner_distribution_calls(), 3);
            out.into_iter().map(|r| r.unwrap()).collect()
        };
        let warm = CachedGateway::with_store(MockGateway::new(1), dir.path()).unwrap();
        assert_eq!(warm.len(), 4);
        let second: Vec<_> = warm
            .distributions_batch(&reqs)
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        assert_eq!(warm.inner_distribution_calls(), 0);
        assert_eq!(first, second);
    }

    #[test]
    fn torn_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        {
            let cached = CachedGateway::with_store(MockGateway::new(1), dir.path()).unwrap();
            cached.distributions(&req("a", vec![0])).unwrap();
        }
        let path = dir.path().join("mock-s1.cache.jsonl");
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        write!(f, "{{\"model\":\"mock-s1\",\"tok").unwrap();
        drop(f);
        let warm = CachedGateway::with_store(MockGateway::new(1), dir.path()).unwrap();
        assert_eq!(warm.len(), 1);
    }

    #[test]
    fn seeds_do_not_share_a_store() {
        let dir = tempfile::tempdir().unwrap();
        let a = CachedGateway::with_store(MockGateway::new(1), dir.path()).unwrap();
        let first = a.distributions(&req("a", vec![0])).unwrap();
        drop(a);
        let b = CachedGateway::with_store(MockGateway::new(2), dir.path()).unwrap();
        assert!(b.is_empty());
        assert_ne!(
            b.distributions(&req("a", vec![0])).unwrap().per_position,
            first.per_position
        );
        assert_eq!(b.inner_distribution_calls(), 1);
    }

    #[test]
    fn errors_are_not_cached() {
        let cached = CachedGateway::new(MockGateway::new(1).with_max_positions(2)).unwrap();
        assert!(cached.distributions(&req("a", vec![0])).is_err());
        assert!(cached.is_empty());
    }
}
