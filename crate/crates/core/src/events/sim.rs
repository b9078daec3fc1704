//! Contrast-threshold event simulation and its inverse, event-frame
//! accumulation. Both work in the log-intensity domain so that one inverts
//! the other up to the threshold residual.

use super::{Event, EventStream, SimulatorConfig};
use crate::ensure;
use crate::error::Result;
use ndarray::{Array2, Array3};

/// Tolerance (relative to the threshold) under which a log-intensity change
/// that lands exactly on a threshold multiple still counts as a crossing.
const CROSSING_EPS: f64 = 1e-9;

/// Simulates events from an intensity video.
///
/// Per pixel, the log intensity `ln(I + log_eps)` is linearly interpolated
/// between frames, and an event is emitted each time it moves a full
/// `contrast_threshold` away from the level of the last emitted event at
/// that pixel. Output is sorted by time (ties broken by row, then column).
pub fn simulate_events(
    frames: &Array3<f32>,
    timestamps: &[f64],
    cfg: &SimulatorConfig,
) -> Result<EventStream> {
    cfg.validate()?;
    let (n, h, w) = frames.dim();
    ensure!(n >= 2, "need at least 2 frames, got {}", n);
    ensure!(timestamps.len() == n, "{} timestamps for {} frames", timestamps.len(), n);
    for k in 1..n {
        ensure!(
            timestamps[k] > timestamps[k - 1],
            "timestamps must be strictly increasing at index {}",
            k
        );
    }

    let c = cfg.contrast_threshold;
    let mut events: Vec<Event> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let mut reference = logi(frames[[0, y, x]], cfg.log_eps);
            let mut last_emit = f64::NEG_INFINITY;
            for k in 0..n - 1 {
                let la = logi(frames[[k, y, x]], cfg.log_eps);
                let lb = logi(frames[[k + 1, y, x]], cfg.log_eps);
                let (ta, tb) = (timestamps[k], timestamps[k + 1]);
                let delta = lb - reference;
                let steps = (delta.abs() / c + CROSSING_EPS).floor() as u64;
                if steps == 0 {
                    continue;
                }
                let sign = if delta > 0.0 { 1.0 } else { -1.0 };
                for _ in 0..steps {
                    let level = reference + sign * c;
                    // Crossing time from the linear interpolation of the segment.
                    let frac = if (lb - la).abs() > 0.0 { (level - la) / (lb - la) } else { 1.0 };
                    let t = ta + frac.clamp(0.0, 1.0) * (tb - ta);
                    reference = level;
                    if t - last_emit >= cfg.refractory {
                        events.push(Event { x: x as u16, y: y as u16, t, p: sign as i8 });
                        last_emit = t;
                    }
                }
            }
        }
    }
    events.sort_by(|a, b| {
        a.t.partial_cmp(&b.t)
            .unwrap()
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    EventStream::new(events, timestamps[0], timestamps[n - 1], w, h)
}

/// Integrates a stream onto a base frame: each event shifts the pixel's log
/// intensity by `p * contrast_threshold`; the result is mapped back to
/// intensity and clamped to `[0, 1]`.
pub fn accumulate_frame(
    base_frame: &Array2<f32>,
    stream: &EventStream,
    cfg: &SimulatorConfig,
) -> Result<Array2<f32>> {
    cfg.validate()?;
    let (h, w) = base_frame.dim();
    ensure!(
        stream.width == w && stream.height == h,
        "stream resolution {}x{} does not match frame {}x{}",
        stream.width,
        stream.height,
        w,
        h
    );
    let mut logs = base_frame.mapv(|v| logi(v, cfg.log_eps));
    for e in &stream.events {
        logs[[e.y as usize, e.x as usize]] += e.p as f64 * cfg.contrast_threshold;
    }
    Ok(logs.mapv(|l| ((l.exp() - cfg.log_eps) as f32).clamp(0.0, 1.0)))
}

#[inline]
fn logi(v: f32, log_eps: f64) -> f64 {
    (v as f64 + log_eps).ln()
}
