use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use uuid::Uuid;

use crate::decision::Verdict;

pub const DEFAULT_CACHE_CAPACITY: usize = 100_000;
pub const DEFAULT_CACHE_TTL: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, PartialEq)]
pub struct CachedVerdict {
    pub text: String,
    pub verdict: Verdict,
}

struct Inner {
    entries: HashMap<Uuid, (Instant, CachedVerdict)>,
    order: VecDeque<(Uuid, Instant)>,
}

/// Bounded, TTL-limited map from verdict ids to issued verdicts. Only used to
/// link feedback submissions back to the verdict they review.
pub struct VerdictCache {
    capacity: usize,
    ttl: Duration,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for VerdictCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VerdictCache")
            .field("capacity", &self.capacity)
            .field("ttl", &self.ttl)
            .finish_non_exhaustive()
    }
}

impl Default for VerdictCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY, DEFAULT_CACHE_TTL)
    }
}

impl VerdictCache {
    pub fn new(capacity: usize, ttl: Duration) -> Self {
        assert!(capacity > 0, "cache capacity must be positive");
        Self {
            capacity,
            ttl,
            inner: Mutex::new(Inner {
                entries: HashMap::new(),
                order: VecDeque::new(),
            }),
        }
    }

    pub fn insert(&self, entry: CachedVerdict) -> Uuid {
        self.insert_at(entry, Instant::now())
    }

    pub fn insert_at(&self, entry: CachedVerdict, now: Instant) -> Uuid {
        let id = Uuid::new_v4();
        let mut inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        Self::evict_expired(&mut inner, now, self.ttl);
        while inner.entries.len() >= self.capacity {
            match inner.order.pop_front() {
                Some((old, _)) => {
                    inner.entries.remove(&old);
                }
                None => break,
            }
        }
        inner.entries.insert(id, (now, entry));
        inner.order.push_back((id, now));
        id
    }

    pub fn get(&self, id: &Uuid) -> Option<CachedVerdict> {
        self.get_at(id, Instant::now())
    }

    pub fn get_at(&self, id: &Uuid, now: Instant) -> Option<CachedVerdict> {
        let inner = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        inner
            .entries
            .get(id)
            .filter(|(at, _)| now.saturating_duration_since(*at) < self.ttl)
            .map(|(_, v)| v.clone())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|p| p.into_inner()).entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn evict_expired(inner: &mut Inner, now: Instant, ttl: Duration) {
        while let Some(&(id, at)) = inner.order.front() {
            if now.saturating_duration_since(at) < ttl {
                break;
            }
            inner.order.pop_front();
            inner.entries.remove(&id);
        }
    }
}
