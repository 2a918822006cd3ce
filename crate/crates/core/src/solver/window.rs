//! Per-conflict search statistics gathered while the observation window is
//! open: backjump sizes, search depths and the weighted backtrack estimate
//! of the search-tree size.

use serde::{Deserialize, Serialize};

/// Exponent clamp for leaf weights; contributions below 2^-63 are noise.
const MAX_WEIGHT_EXPONENT: u32 = 63;
/// Keeps 2^(d+1) finite in f64.
const MAX_SIZE_EXPONENT: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConflictEvent {
    /// 1-based running conflict count.
    pub conflict_index: u64,
    /// Decision level at which the conflict was detected.
    pub depth: u32,
    /// Conflict level minus assertion level.
    pub backjump_size: u32,
    pub learnt_len: u32,
}

impl ConflictEvent {
    pub fn new(
        conflict_index: u64,
        depth: u32,
        assertion_level: u32,
        learnt_len: u32,
    ) -> ConflictEvent {
        debug_assert!(assertion_level < depth || depth == 0);
        ConflictEvent {
            conflict_index,
            depth,
            backjump_size: depth - assertion_level,
            learnt_len,
        }
    }
}

/// Weighted backtrack estimator over conflict leaves. A leaf at depth `d`
/// weighs 2^-d and stands for a complete binary tree of 2^(d+1) - 1 nodes;
/// the estimate is the weighted mean tree size.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WbeState {
    pub weight_sum: f64,
    pub weighted_size_sum: f64,
    pub leaves: u64,
}

impl WbeState {
    pub fn reset(&mut self) {
        *self = WbeState::default();
    }

    pub fn add_leaf(&mut self, depth: u32) {
        let weight = (-(depth.min(MAX_WEIGHT_EXPONENT) as f64)).exp2();
        let size = ((depth.min(MAX_SIZE_EXPONENT) + 1) as f64).exp2() - 1.0;
        self.weight_sum += weight;
        self.weighted_size_sum += weight * size;
        self.leaves += 1;
    }

    pub fn estimate(&self) -> f64 {
        if self.weight_sum > 0.0 {
            self.weighted_size_sum / self.weight_sum
        } else {
            0.0
        }
    }

    /// log2 of the current estimate; 0 before any leaf (an empty tree of
    /// one node).
    pub fn log2_estimate(&self) -> f64 {
        if self.weight_sum > 0.0 {
            self.weighted_size_sum.log2() - self.weight_sum.log2()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    pub backjump_sizes: Vec<f64>,
    pub depths: Vec<f64>,
    pub log_wbe: Vec<f64>,
}

impl WindowStats {
    pub fn len(&self) -> usize {
        self.depths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depths.is_empty()
    }

    /// Appends one conflict. `wbe` must already include this conflict's leaf.
    pub fn record(&mut self, event: &ConflictEvent, wbe: &WbeState) {
        self.backjump_sizes.push(event.backjump_size as f64);
        self.depths.push(event.depth as f64);
        self.log_wbe.push(wbe.log2_estimate());
    }
}

/// Folds a stream of conflict events into window statistics, updating the
/// estimator as it goes.
pub fn record_window<'a, I>(events: I, wbe: &mut WbeState) -> WindowStats
where
    I: IntoIterator<Item = &'a ConflictEvent>,
{
    let mut stats = WindowStats::default();
    for e in events {
        wbe.add_leaf(e.depth);
        stats.record(e, wbe);
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backjump_size_is_level_difference() {
        let e = ConflictEvent::new(1, 10, 7, 4);
        assert_eq!(e.backjump_size, 3);
    }

    #[test]
    fn single_leaf_closed_form() {
        for d in [0u32, 1, 5, 30, 62, 63, 64, 200] {
            let mut wbe = WbeState::default();
            wbe.add_leaf(d);
            let expected = ((d + 1) as f64).exp2() - 1.0;
            assert!(
                (wbe.estimate() - expected).abs() <= expected * 1e-12,
                "d={d}"
            );
            assert!((wbe.log2_estimate() - expected.log2()).abs() < 1e-9);
        }
    }

    #[test]
    fn two_equal_leaves() {
        let mut wbe = WbeState::default();
        wbe.add_leaf(3);
        wbe.add_leaf(3);
        assert_eq!(wbe.estimate(), 15.0);
    }

    #[test]
    fn mixed_leaves_weighted_mean() {
        // leaves at 1 and 3: (0.5*3 + 0.125*15) / 0.625 = 5.4
        let mut wbe = WbeState::default();
        wbe.add_leaf(1);
        wbe.add_leaf(3);
        assert!((wbe.estimate() - 5.4).abs() < 1e-12);
    }

    #[test]
    fn record_stream() {
        let events = [
            ConflictEvent::new(1, 4, 1, 3),
            ConflictEvent::new(2, 4, 2, 2),
        ];
        let mut wbe = WbeState::default();
        let stats = record_window(&events, &mut wbe);
        assert_eq!(stats.backjump_sizes, vec![3.0, 2.0]);
        assert_eq!(stats.depths, vec![4.0, 4.0]);
        assert_eq!(stats.log_wbe, vec![31f64.log2(), 31f64.log2()]);
    }
}
