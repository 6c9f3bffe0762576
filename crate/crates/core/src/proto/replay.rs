//! Bounded nonce cache with expiry.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::frame::Nonce;

pub const DEFAULT_CAPACITY: usize = 1 << 20;
pub const DEFAULT_TTL: Duration = Duration::from_secs(24 * 60 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Freshness {
    Fresh,
    Replayed,
    /// Every slot holds an unexpired nonce; the new one is refused.
    Full,
}

#[derive(Debug, Default)]
struct Entries {
    seen: HashMap<Nonce, Instant>,
    order: VecDeque<(Nonce, Instant)>,
}

impl Entries {
    fn expire(&mut self, now: Instant, ttl: Duration) {
        while let Some(&(nonce, at)) = self.order.front() {
            if now.saturating_duration_since(at) < ttl {
                break;
            }
            self.order.pop_front();
            if self.seen.get(&nonce) == Some(&at) {
                self.seen.remove(&nonce);
            }
        }
    }
}

/// Test-and-insert is one critical section, so concurrent requests carrying
/// the same nonce admit exactly one.
#[derive(Debug)]
pub struct ReplayCache {
    entries: Mutex<Entries>,
    capacity: usize,
    ttl: Duration,
}

impl Default for ReplayCache {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY, DEFAULT_TTL)
    }
}

impl ReplayCache {
    pub fn new(capacity: usize, ttl: Duration) -> Self {
        Self {
            entries: Mutex::new(Entries::default()),
            capacity,
            ttl,
        }
    }

    pub fn check_and_insert(&self, nonce: &Nonce) -> Freshness {
        self.check_and_insert_at(nonce, Instant::now())
    }

    pub fn check_and_insert_at(&self, nonce: &Nonce, now: Instant) -> Freshness {
        let mut e = self.entries.lock().unwrap_or_else(|p| p.into_inner());
        e.expire(now, self.ttl);
        if e.seen.contains_key(nonce) {
            return Freshness::Replayed;
        }
        if e.seen.len() >= self.capacity {
            return Freshness::Full;
        }
        e.seen.insert(*nonce, now);
        e.order.push_back((*nonce, now));
        Freshness::Fresh
    }

    pub fn contains(&self, nonce: &Nonce) -> bool {
        self.contains_at(nonce, Instant::now())
    }

    pub fn contains_at(&self, nonce: &Nonce, now: Instant) -> bool {
        let mut e = self.entries.lock().unwrap_or_else(|p| p.into_inner());
        e.expire(now, self.ttl);
        e.seen.contains_key(nonce)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap_or_else(|p| p.into_inner()).seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}
