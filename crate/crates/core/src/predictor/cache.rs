use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use super::{Capabilities, Predictor, Reply, TransportError};
use crate::scenario::DrivingScenario;
use crate::util::sha256_hex;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("refusing to cache a non-deterministic predictor")]
    NonDeterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

/// Memoises replies by canonical-scenario hash. Hits are flagged `cached`
/// so budget accounting can tell them apart from real queries.
pub struct Cached<P> {
    inner: P,
    entries: Mutex<HashMap<String, Reply>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<P: Predictor> Cached<P> {
    pub fn new(inner: P) -> Result<Self, CacheError> {
        if !inner.capabilities().deterministic {
            return Err(CacheError::NonDeterministic);
        }
        Ok(Self { inner, entries: Mutex::new(HashMap::new()), hits: AtomicU64::new(0), misses: AtomicU64::new(0) })
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats { hits: self.hits.load(Ordering::Relaxed), misses: self.misses.load(Ordering::Relaxed) }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Predictor> Predictor for Cached<P> {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn predict(&self, scenario: &DrivingScenario) -> Result<Reply, TransportError> {
        let key = sha256_hex(scenario.canonical_json());
        if let Some(hit) = self.entries.lock().expect("cache poisoned").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Reply { cached: true, ..hit.clone() });
        }
        // not holding the lock across the inner call; a concurrent miss on the
        // same key costs one extra query
        let reply = self.inner.predict(scenario)?;
        self.misses.fetch_add(1, Ordering::Relaxed);
        self.entries.lock().expect("cache poisoned").insert(key, reply.clone());
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::Surrogate;
    use crate::scenario::fixtures::example_scenario;
    use crate::scenario::Direction;
    use std::sync::atomic::AtomicUsize;

    struct Counting {
        calls: AtomicUsize,
        deterministic: bool,
    }

    impl Predictor for Counting {
        fn capabilities(&self) -> Capabilities {
            Capabilities { deterministic: self.deterministic, ..Surrogate::default().capabilities() }
        }
        fn predict(&self, s: &DrivingScenario) -> Result<Reply, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Surrogate::default().predict(s)
        }
    }

    #[test]
    fn identical_queries_hit() {
        let c = Cached::new(Counting { calls: AtomicUsize::new(0), deterministic: true }).unwrap();
        let s = example_scenario();
        let a = c.predict(&s).unwrap();
        let b = c.predict(&s).unwrap();
        assert_eq!(c.inner().calls.load(Ordering::SeqCst), 1);
        assert!(!a.cached && b.cached);
        assert_eq!(a.outcome, b.outcome);

        let mut t = s.clone();
        t.neighbors.get_mut(&Direction::LeftFront).unwrap().distance = 100.0;
        c.predict(&t).unwrap();
        assert_eq!(c.inner().calls.load(Ordering::SeqCst), 2);
        assert_eq!(c.stats(), CacheStats { hits: 1, misses: 2 });
    }

    #[test]
    fn refuses_nondeterministic() {
        let r = Cached::new(Counting { calls: AtomicUsize::new(0), deterministic: false });
        assert_eq!(r.err(), Some(CacheError::NonDeterministic));
    }
}
