//! Voxel-grid and motion-mask representations of event streams.

use super::EventStream;
use crate::ensure;
use crate::error::Result;
use ndarray::{Array2, Array3};

/// A `(B, H, W)` spatio-temporal summary of an event stream. Each event
/// spreads its signed polarity over the two time bins nearest to its
/// normalized timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct EventVoxelGrid {
    pub data: Array3<f32>,
}

impl EventVoxelGrid {
    pub fn bins(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    /// Signed sum over all cells.
    pub fn mass(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    /// Pixels with any nonzero cell across bins.
    pub fn active_mask(&self) -> EventMask {
        let (_, h, w) = self.data.dim();
        let mut mask = Array2::<u8>::zeros((h, w));
        for (b, row) in self.data.outer_iter().enumerate() {
            let _ = b;
            for ((y, x), &v) in row.indexed_iter() {
                if v != 0.0 {
                    mask[[y, x]] = 1;
                }
            }
        }
        EventMask { data: mask }
    }
}

/// Bins an event stream into a `(bins, H, W)` voxel grid with temporal
/// bilinear weights: an event at normalized position
/// `t* = (B-1)(t - t_start)/(t_end - t_start)` contributes
/// `p * max(0, 1 - |b - t*|)` to bin `b`.
///
/// A degenerate interval (`t_end == t_start`) sends all mass to bin 0.
pub fn voxelize(stream: &EventStream, bins: usize) -> Result<EventVoxelGrid> {
    ensure!(bins >= 1, "bins must be >= 1, got {}", bins);
    let (h, w) = (stream.height, stream.width);
    let mut data = Array3::<f32>::zeros((bins, h, w));
    let span = stream.t_end - stream.t_start;
    for e in &stream.events {
        let t_norm = if span > 0.0 && bins > 1 {
            (bins - 1) as f64 * (e.t - stream.t_start) / span
        } else {
            0.0
        };
        let b0 = t_norm.floor() as usize;
        let frac = t_norm - b0 as f64;
        let (y, x) = (e.y as usize, e.x as usize);
        data[[b0.min(bins - 1), y, x]] += (e.p as f64 * (1.0 - frac)) as f32;
        if frac > 0.0 && b0 + 1 < bins {
            data[[b0 + 1, y, x]] += (e.p as f64 * frac) as f32;
        }
    }
    Ok(EventVoxelGrid { data })
}

/// Binary `(H, W)` mask of event-active pixels over one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMask {
    pub data: Array2<u8>,
}

impl EventMask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { data: Array2::zeros((height, width)) }
    }

    pub fn height(&self) -> usize {
        self.data.dim().0
    }

    pub fn width(&self) -> usize {
        self.data.dim().1
    }

    /// Pixel-wise OR.
    pub fn or(&self, other: &EventMask) -> EventMask {
        let mut out = self.data.clone();
        out.zip_mut_with(&other.data, |a, &b| *a = (*a | b) & 1);
        EventMask { data: out }
    }

    pub fn count_active(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn to_f32(&self) -> Array2<f32> {
        self.data.mapv(|v| v as f32)
    }
}

/// Marks every pixel that fired at least one event in the interval.
pub fn motion_mask(stream: &EventStream) -> EventMask {
    let mut mask = EventMask::zeros(stream.height, stream.width);
    for e in &stream.events {
        mask.data[[e.y as usize, e.x as usize]] = 1;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Event;

    fn ev(x: u16, y: u16, t: f64, p: i8) -> Event {
        Event { x, y, t, p }
    }

    #[test]
    fn empty_stream_gives_zero_grid() {
        let s = EventStream::empty(0.0, 1.0, 7, 5);
        let g = voxelize(&s, 5).unwrap();
        assert_eq!(g.data.dim(), (5, 5, 7));
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_event_on_bin_center() {
        let s = EventStream::new(vec![ev(1, 2, 0.5, 1)], 0.0, 1.0, 4, 4).unwrap();
        let g = voxelize(&s, 3).unwrap();
        // t* = 2 * 0.5 = 1.0
        assert_eq!(g.data[[1, 2, 1]], 1.0);
        assert_eq!(g.mass(), 1.0);
        assert_eq!(g.data.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn single_event_splits_between_bins() {
        // t* = 1.75 on B=3 needs t = 0.875 on [0,1].
        let s = EventStream::new(vec![ev(1, 2, 0.875, 1)], 0.0, 1.0, 4, 4).unwrap();
        let g = voxelize(&s, 3).unwrap();
        assert!((g.data[[1, 2, 1]] - 0.25).abs() < 1e-6);
        assert!((g.data[[2, 2, 1]] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn rejects_zero_bins() {
        let s = EventStream::empty(0.0, 1.0, 4, 4);
        assert!(voxelize(&s, 0).is_err());
    }

    #[test]
    fn degenerate_interval_all_mass_in_bin_zero() {
        let s = EventStream::new(vec![ev(0, 0, 1.0, 1), ev(1, 0, 1.0, 1)], 1.0, 1.0, 4, 4)
            .unwrap();
        let g = voxelize(&s, 4).unwrap();
        assert_eq!(g.data[[0, 0, 0]], 1.0);
        assert_eq!(g.data[[0, 0, 1]], 1.0);
        assert_eq!(g.mass(), 2.0);
    }

    #[test]
    fn mass_conservation_for_interior_events() {
        let events = vec![
            ev(0, 0, 0.11, 1),
            ev(1, 1, 0.37, -1),
            ev(2, 2, 0.52, 1),
            ev(3, 3, 0.74, 1),
            ev(0, 3, 0.99, -1),
        ];
        let want: f64 = events.iter().map(|e| e.p as f64).sum();
        let s = EventStream::new(events, 0.0, 1.0, 4, 4).unwrap();
        for bins in 2..=8 {
            let g = voxelize(&s, bins).unwrap();
            assert!((g.mass() - want).abs() < 1e-6, "bins={bins}");
        }
    }

    #[test]
    fn empty_mask_and_single_event_mask() {
        let s = EventStream::empty(0.0, 1.0, 8, 8);
        assert_eq!(motion_mask(&s).count_active(), 0);

        let s = EventStream::new(vec![ev(3, 4, 0.5, -1)], 0.0, 1.0, 8, 8).unwrap();
        let m = motion_mask(&s);
        assert_eq!(m.count_active(), 1);
        assert_eq!(m.data[[4, 3]], 1);
    }

    #[test]
    fn mask_is_or_of_partition() {
        let events = vec![
            ev(0, 0, 0.1, 1),
            ev(1, 1, 0.4, -1),
            ev(2, 2, 0.6, 1),
            ev(3, 3, 0.9, 1),
        ];
        let s = EventStream::new(events, 0.0, 1.0, 4, 4).unwrap();
        let whole = motion_mask(&s);
        let left = motion_mask(&s.slice(0.0, 0.5));
        let right = motion_mask(&s.slice(0.5, 1.0));
        assert_eq!(whole, left.or(&right));
    }
}
