use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

pub const OUTBOX_CAPACITY: usize = 100;

/// Bounded queue of encoded envelopes awaiting the fog connection. When full,
/// the oldest entry is discarded so the freshest frames get through.
#[derive(Debug)]
pub struct Outbox {
    inner: Mutex<Inner>,
    ready: Condvar,
    capacity: usize,
}

#[derive(Debug, Default)]
struct Inner {
    queue: VecDeque<Vec<u8>>,
    dropped: u64,
    closed: bool,
}

impl Default for Outbox {
    fn default() -> Self {
        Self::new(OUTBOX_CAPACITY)
    }
}

impl Outbox {
    pub fn new(capacity: usize) -> Self {
        Self { inner: Mutex::default(), ready: Condvar::new(), capacity: capacity.max(1) }
    }

    /// Queues `bytes`; returns true when an older entry had to be dropped.
    pub fn push(&self, bytes: Vec<u8>) -> bool {
        let mut g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let mut dropped = false;
        if g.queue.len() == self.capacity {
            g.queue.pop_front();
            g.dropped += 1;
            dropped = true;
        }
        g.queue.push_back(bytes);
        drop(g);
        self.ready.notify_one();
        dropped
    }

    /// Waits up to `timeout` for an entry. Returns `None` on timeout or once closed and drained.
    pub fn pop_timeout(&self, timeout: Duration) -> Option<Vec<u8>> {
        let g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let (mut g, _) = self
            .ready
            .wait_timeout_while(g, timeout, |g| g.queue.is_empty() && !g.closed)
            .unwrap_or_else(|e| e.into_inner());
        g.queue.pop_front()
    }

    /// Puts an entry back at the head after a failed send.
    pub fn requeue(&self, bytes: Vec<u8>) {
        let mut g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        if g.queue.len() == self.capacity {
            g.dropped += 1;
            return;
        }
        g.queue.push_front(bytes);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).dropped
    }

    pub fn close(&self) {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).closed = true;
        self.ready.notify_all();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_oldest_when_full() {
        let o = Outbox::new(3);
        for i in 0..5u8 {
            o.push(vec![i]);
        }
        assert_eq!(o.len(), 3);
        assert_eq!(o.dropped(), 2);
        let got: Vec<u8> = std::iter::from_fn(|| o.pop_timeout(Duration::ZERO)).map(|v| v[0]).collect();
        assert_eq!(got, vec![2, 3, 4]);
    }

    #[test]
    fn pop_wakes_on_push_and_close() {
        let o = std::sync::Arc::new(Outbox::default());
        let o2 = o.clone();
        let t = std::thread::spawn(move || o2.pop_timeout(Duration::from_secs(5)));
        o.push(vec![9]);
        assert_eq!(t.join().unwrap(), Some(vec![9]));
        let o2 = o.clone();
        let t = std::thread::spawn(move || o2.pop_timeout(Duration::from_secs(5)));
        o.close();
        assert_eq!(t.join().unwrap(), None);
    }
}
