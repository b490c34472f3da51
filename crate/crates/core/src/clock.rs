// SPDX-License-Identifier: Apache-2.0

//! Time sources for campaigns.
//!
//! Wall-clock campaigns use [`WallClock`]. [`VirtualClock`] advances only
//! when work is charged to it, which makes whole campaigns reproducible.

use std::cell::Cell;
use std::time::{Duration, Instant};

/// Virtual ticks per simulated second.
pub const TICKS_PER_SECOND: u64 = 1_000_000;

/// Fixed virtual cost of one design execution, on top of its step count.
pub const EXEC_OVERHEAD_TICKS: u64 = 100;

pub trait Clock {
    /// Time elapsed since the clock was created.
    fn now(&self) -> Duration;
    /// Accounts for `ticks` units of work. No-op for real clocks.
    fn charge(&self, ticks: u64);
    fn is_virtual(&self) -> bool;
}

#[derive(Debug, Clone)]
pub struct WallClock {
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock { start: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> Duration {
        self.start.elapsed()
    }

    fn charge(&self, _ticks: u64) {}

    fn is_virtual(&self) -> bool {
        false
    }
}

#[derive(Debug, Default)]
pub struct VirtualClock {
    ticks: Cell<u64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ticks(&self) -> u64 {
        self.ticks.get()
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        ticks_to_duration(self.ticks.get())
    }

    fn charge(&self, ticks: u64) {
        self.ticks.set(self.ticks.get().saturating_add(ticks));
    }

    fn is_virtual(&self) -> bool {
        true
    }
}

pub fn ticks_to_duration(ticks: u64) -> Duration {
    Duration::from_micros(ticks * 1_000_000 / TICKS_PER_SECOND)
}

/// Virtual cost of one execution that used `steps` interpreter steps.
pub fn execution_cost(steps: u64) -> u64 {
    EXEC_OVERHEAD_TICKS + steps
}
