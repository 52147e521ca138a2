//! Write-once versioned slots shared by all workers.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};

use super::program::Var;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Versions kept per variable: the current and the previous epoch.
pub const CAPACITY: usize = 2;

pub(crate) const ABORTED: &str = "run aborted";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotEventKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotEvent {
    pub seq: usize,
    /// 0 for the coordinator.
    pub worker: usize,
    pub var: Var,
    pub version: usize,
    pub kind: SlotEventKind,
}

type Entry = (usize, Arc<Matrix>, u64);

#[derive(Default)]
struct Inner {
    slots: HashMap<Var, VecDeque<Entry>>,
    log: Vec<SlotEvent>,
}

impl Inner {
    fn log(&mut self, worker: usize, var: Var, version: usize, kind: SlotEventKind) {
        let seq = self.log.len();
        self.log.push(SlotEvent { seq, worker, var, version, kind });
    }
}

pub(crate) struct Board {
    inner: Mutex<Inner>,
    cv: Condvar,
    aborted: AtomicBool,
}

impl Board {
    pub fn new() -> Self {
        Self { inner: Mutex::new(Inner::default()), cv: Condvar::new(), aborted: AtomicBool::new(false) }
    }

    fn lock(&self) -> Result<MutexGuard<'_, Inner>> {
        self.inner.lock().map_err(|_| Error::Parallel("board lock poisoned".into()))
    }

    /// Writes `var` at `version`, ready at logical time `ready`.
    pub fn publish(&self, worker: usize, var: Var, version: usize, m: Arc<Matrix>, ready: u64) -> Result<()> {
        let mut g = self.lock()?;
        let q = g.slots.entry(var).or_default();
        if q.back().is_some_and(|e| e.0 >= version) {
            return Err(Error::Parallel(format!("{var}^{version} written twice or out of order by worker {worker}")));
        }
        q.push_back((version, m, ready));
        while q.len() > CAPACITY {
            q.pop_front();
        }
        g.log(worker, var, version, SlotEventKind::Write);
        drop(g);
        self.cv.notify_all();
        Ok(())
    }

    /// Blocks until `var` at `version` is written.
    pub fn fetch(&self, worker: usize, var: Var, version: usize) -> Result<(Arc<Matrix>, u64)> {
        let mut g = self.lock()?;
        loop {
            if self.aborted.load(Ordering::SeqCst) {
                return Err(Error::Parallel(format!("{ABORTED}; worker {worker} stopped waiting for {var}^{version}")));
            }
            if let Some(q) = g.slots.get(&var) {
                if let Some(e) = q.iter().find(|e| e.0 == version) {
                    let found = (Arc::clone(&e.1), e.2);
                    g.log(worker, var, version, SlotEventKind::Read);
                    return Ok(found);
                }
                if q.front().is_some_and(|e| e.0 > version) {
                    return Err(Error::Parallel(format!("{var}^{version} was evicted before worker {worker} read it")));
                }
            }
            g = self.cv.wait(g).map_err(|_| Error::Parallel("board lock poisoned".into()))?;
        }
    }

    pub fn abort(&self) {
        self.aborted.store(true, Ordering::SeqCst);
        // Taking the lock orders the flag before any waiter re-checks it.
        drop(self.inner.lock());
        self.cv.notify_all();
    }

    pub fn into_log(self) -> Vec<SlotEvent> {
        match self.inner.into_inner() {
            Ok(g) => g.log,
            Err(p) => p.into_inner().log,
        }
    }
}
