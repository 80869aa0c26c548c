use parking_lot::{Condvar, Mutex};

use super::{Backend, BackendError, ChatRequest};

/// Counting semaphore.
#[derive(Debug)]
pub struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    pub fn new(max: usize) -> Self {
        Limiter { max: max.max(1), in_flight: Mutex::new(0), freed: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock();
        while *n >= self.max {
            self.freed.wait(&mut n);
        }
        *n += 1;
        Permit { limiter: self }
    }

    pub fn max(&self) -> usize {
        self.max
    }
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.limiter.in_flight.lock() -= 1;
        self.limiter.freed.notify_one();
    }
}

/// Caps concurrent calls into the wrapped backend.
pub struct Limited<B> {
    inner: B,
    limiter: Limiter,
}

impl<B> Limited<B> {
    pub fn new(inner: B, max_in_flight: usize) -> Self {
        Limited { inner, limiter: Limiter::new(max_in_flight) }
    }
}

impl<B: Backend> Backend for Limited<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let _permit = self.limiter.acquire();
        self.inner.complete(request)
    }

    fn id(&self) -> String {
        self.inner.id()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    use super::*;
    use crate::backend::ChatMessage;

    struct Probe {
        now: AtomicUsize,
        peak: AtomicUsize,
    }

    impl Backend for Probe {
        fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
            let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(n, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.now.fetch_sub(1, Ordering::SeqCst);
            Ok("ok".into())
        }

        fn id(&self) -> String {
            "probe".into()
        }
    }

    #[test]
    fn never_exceeds_max_in_flight() {
        let b = Limited::new(Probe { now: AtomicUsize::new(0), peak: AtomicUsize::new(0) }, 3);
        let req = ChatRequest::new(vec![ChatMessage::system("s")], 0.0);
        std::thread::scope(|s| {
            for _ in 0..16 {
                s.spawn(|| {
                    for _ in 0..4 {
                        b.complete(&req).unwrap();
                    }
                });
            }
        });
        let peak = b.inner.peak.load(Ordering::SeqCst);
        assert!((1..=3).contains(&peak), "peak {peak}");
    }
}
