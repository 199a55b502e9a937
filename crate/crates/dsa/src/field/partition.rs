//! Climatology/region partitions: contiguous time windows crossed with
//! sliding spatial boxes. Members may overlap.

use super::SpatioTemporalField;
use crate::error::{Error, Result};
use std::ops::Range;

/// One window: a time range and a spatial box (half-open index ranges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionMember {
    pub time: Range<usize>,
    pub lat: Range<usize>,
    pub lon: Range<usize>,
}

impl PartitionMember {
    pub fn whole(f: &SpatioTemporalField) -> Self {
        PartitionMember {
            time: 0..f.n_time(),
            lat: 0..f.grid.n_lat(),
            lon: 0..f.grid.n_lon(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty() || self.lat.is_empty() || self.lon.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub members: Vec<PartitionMember>,
}

/// Enumeration scheme. `box_sizes` lists requested (lat, lon) box extents;
/// an empty list means the whole spatial domain only.
#[derive(Debug, Clone)]
pub struct PartitionScheme {
    pub min_window: usize,
    pub box_sizes: Vec<(usize, usize)>,
    /// Member-count cap; enumeration strides are doubled until under it.
    pub cap: usize,
    pub allow_coarsening: bool,
}

impl Default for PartitionScheme {
    fn default() -> Self {
        PartitionScheme {
            min_window: 1,
            box_sizes: Vec::new(),
            cap: 10_000,
            allow_coarsening: true,
        }
    }
}

/// Window count for a given stride; lengths and start offsets both advance
/// by the stride, mirroring the enumeration loop exactly.
fn count_for_stride(nt: usize, min_window: usize, stride: usize, n_boxes: usize) -> usize {
    let mut windows = 0usize;
    let mut len = min_window;
    while len <= nt {
        windows += (nt - len) / stride + 1;
        len += stride;
    }
    windows * n_boxes
}

/// All contiguous time windows of length >= `min_window` crossed with all
/// placements of the requested spatial boxes. Strides double deterministically
/// when the raw count exceeds the cap.
pub fn enumerate_partitions(
    f: &SpatioTemporalField,
    scheme: &PartitionScheme,
) -> Result<Partition> {
    let nt = f.n_time();
    if scheme.min_window == 0 {
        return Err(Error::Config("minimum window must be at least 1 step".into()));
    }
    if scheme.min_window > nt {
        return Err(Error::Config(format!(
            "minimum window {} exceeds record length {nt}",
            scheme.min_window
        )));
    }
    let (ny, nx) = (f.grid.n_lat(), f.grid.n_lon());
    let mut boxes: Vec<(Range<usize>, Range<usize>)> = Vec::new();
    if scheme.box_sizes.is_empty() {
        boxes.push((0..ny, 0..nx));
    } else {
        for &(bh, bw) in &scheme.box_sizes {
            if bh == 0 || bw == 0 || bh > ny || bw > nx {
                return Err(Error::Config(format!(
                    "box {bh}x{bw} does not fit the {ny}x{nx} grid"
                )));
            }
            for i0 in 0..=ny - bh {
                for j0 in 0..=nx - bw {
                    boxes.push((i0..i0 + bh, j0..j0 + bw));
                }
            }
        }
    }

    let mut stride = 1usize;
    loop {
        let estimate = count_for_stride(nt, scheme.min_window, stride, boxes.len());
        if estimate <= scheme.cap {
            break;
        }
        if !scheme.allow_coarsening {
            return Err(Error::Config(format!(
                "partition count {estimate} exceeds cap {} and coarsening is disabled",
                scheme.cap
            )));
        }
        stride *= 2;
        if stride > nt {
            return Err(Error::Config("cap unreachable even at maximal coarsening".into()));
        }
    }

    let mut members = Vec::new();
    let mut len = scheme.min_window;
    while len <= nt {
        let mut t0 = 0usize;
        while t0 + len <= nt {
            for (la, lo) in &boxes {
                members.push(PartitionMember {
                    time: t0..t0 + len,
                    lat: la.clone(),
                    lon: lo.clone(),
                });
            }
            t0 += stride;
        }
        len += stride;
    }
    Ok(Partition { members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Grid, SpatioTemporalField, TimeAxis};
    use ndarray::Array4;

    fn field(nt: usize) -> SpatioTemporalField {
        let grid = Grid::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
        let time = TimeAxis::regular(0.0, 1.0, nt).unwrap();
        SpatioTemporalField::complete(grid, time, Array4::zeros((1, nt, 3, 3))).unwrap()
    }

    #[test]
    fn whole_domain_single_window() {
        let f = field(4);
        let p = enumerate_partitions(
            &f,
            &PartitionScheme { min_window: 4, ..Default::default() },
        )
        .unwrap();
        assert_eq!(p.members.len(), 1);
        assert_eq!(p.members[0].time, 0..4);
    }

    #[test]
    fn window_count_matches_hand_enumeration() {
        // lengths 2,3,4 over 4 steps: 3 + 2 + 1
        let f = field(4);
        let p = enumerate_partitions(
            &f,
            &PartitionScheme { min_window: 2, ..Default::default() },
        )
        .unwrap();
        assert_eq!(p.members.len(), 6);
    }

    #[test]
    fn brute_force_count_small_axes() {
        for nt in 2..=8 {
            let f = field(nt);
            let p = enumerate_partitions(
                &f,
                &PartitionScheme { min_window: 1, ..Default::default() },
            )
            .unwrap();
            // all contiguous windows of length >= 1: nt(nt+1)/2
            assert_eq!(p.members.len(), nt * (nt + 1) / 2);
        }
    }

    #[test]
    fn min_window_beyond_record_errors() {
        let f = field(4);
        let r = enumerate_partitions(
            &f,
            &PartitionScheme { min_window: 5, ..Default::default() },
        );
        assert!(r.is_err());
    }

    #[test]
    fn cap_triggers_coarsening_or_error() {
        let f = field(200);
        let capped = PartitionScheme {
            min_window: 1,
            cap: 100,
            allow_coarsening: true,
            ..Default::default()
        };
        let p = enumerate_partitions(&f, &capped).unwrap();
        assert!(p.members.len() <= 100);
        let strict = PartitionScheme {
            allow_coarsening: false,
            ..capped
        };
        assert!(enumerate_partitions(&f, &strict).is_err());
    }

    #[test]
    fn boxes_slide_over_grid() {
        let f = field(3);
        let p = enumerate_partitions(
            &f,
            &PartitionScheme {
                min_window: 3,
                box_sizes: vec![(2, 2)],
                ..Default::default()
            },
        )
        .unwrap();
        // one time window, 2x2 box has 2x2 placements on a 3x3 grid
        assert_eq!(p.members.len(), 4);
        assert!(p.members.iter().all(|m| !m.is_empty()));
    }
}
