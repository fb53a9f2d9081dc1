use std::sync::{Condvar, Mutex};

/// Counting semaphore bounding concurrent in-flight calls.
#[derive(Debug)]
pub struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Limiter {
    pub fn new(slots: usize) -> Self {
        Limiter {
            free: Mutex::new(slots.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        Permit { limiter: self }
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut free = self.limiter.free.lock().unwrap_or_else(|p| p.into_inner());
        *free += 1;
        self.limiter.cv.notify_one();
    }
}
