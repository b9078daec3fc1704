//! Event data model: raw event streams, a contrast-threshold simulator,
//! voxel-grid and mask representations, and event file I/O.

mod io;
mod sim;
mod voxel;

pub use io::{read_csv_events, read_evt1, write_evt1};
pub use sim::{accumulate_frame, simulate_events};
pub use voxel::{motion_mask, voxelize, EventMask, EventVoxelGrid};

use crate::ensure;
use crate::error::Result;
use serde::{Deserialize, Serialize};

/// A single brightness-change event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Pixel column.
    pub x: u16,
    /// Pixel row.
    pub y: u16,
    /// Timestamp in seconds.
    pub t: f64,
    /// Polarity, +1 or -1.
    pub p: i8,
}

/// An ordered event stream over a time interval at a fixed sensor resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub t_start: f64,
    pub t_end: f64,
    pub width: usize,
    pub height: usize,
}

impl EventStream {
    /// Builds a stream, validating ordering, bounds and polarity.
    pub fn new(
        events: Vec<Event>,
        t_start: f64,
        t_end: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        ensure!(t_end >= t_start, "t_end {} < t_start {}", t_end, t_start);
        let mut prev = f64::NEG_INFINITY;
        for e in &events {
            ensure!(e.p == 1 || e.p == -1, "polarity must be +1/-1, got {}", e.p);
            ensure!(
                (e.x as usize) < width && (e.y as usize) < height,
                "event at ({}, {}) outside {}x{} sensor",
                e.x,
                e.y,
                width,
                height
            );
            ensure!(
                e.t >= t_start && e.t <= t_end,
                "event time {} outside [{}, {}]",
                e.t,
                t_start,
                t_end
            );
            ensure!(e.t >= prev, "events not sorted by time");
            prev = e.t;
        }
        Ok(Self { events, t_start, t_end, width, height })
    }

    /// An empty stream over the given interval.
    pub fn empty(t_start: f64, t_end: f64, width: usize, height: usize) -> Self {
        Self { events: Vec::new(), t_start, t_end, width, height }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sub-stream over `(t0, t1]`. Events at exactly `t0` belong to the
    /// preceding interval.
    pub fn slice(&self, t0: f64, t1: f64) -> EventStream {
        let lo = self.events.partition_point(|e| e.t <= t0);
        let hi = self.events.partition_point(|e| e.t <= t1);
        EventStream {
            events: self.events[lo..hi].to_vec(),
            t_start: t0,
            t_end: t1,
            width: self.width,
            height: self.height,
        }
    }

    /// Signed sum of polarities.
    pub fn polarity_sum(&self) -> f64 {
        self.events.iter().map(|e| e.p as f64).sum()
    }
}

/// Contrast-threshold simulator settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulatorConfig {
    /// Log-intensity contrast threshold (symbol C).
    pub contrast_threshold: f64,
    /// Additive clamp before taking logs, avoids log(0).
    pub log_eps: f64,
    /// Per-pixel dead time after an emitted event, in seconds.
    pub refractory: f64,
    /// Seed reserved for stochastic sensor effects; the base model is
    /// deterministic.
    pub rng_seed: u64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self { contrast_threshold: 0.2, log_eps: 1e-3, refractory: 0.0, rng_seed: 0 }
    }
}

impl SimulatorConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.contrast_threshold > 0.0,
            "contrast_threshold must be > 0, got {}",
            self.contrast_threshold
        );
        ensure!(self.log_eps > 0.0, "log_eps must be > 0, got {}", self.log_eps);
        ensure!(self.refractory >= 0.0, "refractory must be >= 0, got {}", self.refractory);
        Ok(())
    }
}
