use std::sync::Arc;

use super::RadialError;

/// Smallest admissible number of grid intervals.
pub const MIN_INTERVALS: usize = 16;

/// Nodes in the mass variable `ξ = r²` on `[0, 1]`.
///
/// Graded grids place node `i` at `(i/N)^γ`, clustering resolution near the
/// degenerate endpoint `ξ = 0`. `γ = 2` is uniform in the radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
    gamma: Option<f64>,
}

impl Grid {
    pub fn uniform(intervals: usize) -> Result<Arc<Grid>, RadialError> {
        Self::graded(intervals, 1.0)
    }

    pub fn graded(intervals: usize, gamma: f64) -> Result<Arc<Grid>, RadialError> {
        if intervals < MIN_INTERVALS {
            return Err(RadialError::TooFewIntervals(intervals));
        }
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(RadialError::InvalidGrading(gamma));
        }
        let n = intervals as f64;
        let nodes = (0..=intervals)
            .map(|i| {
                if i == intervals {
                    1.0
                } else {
                    (i as f64 / n).powf(gamma)
                }
            })
            .collect();
        Ok(Arc::new(Grid {
            nodes,
            gamma: Some(gamma),
        }))
    }

    /// Grid from explicit nodes; they must start at 0, end at 1 and increase strictly.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Arc<Grid>, RadialError> {
        if nodes.len() < MIN_INTERVALS + 1 {
            return Err(RadialError::TooFewIntervals(nodes.len().saturating_sub(1)));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(RadialError::BadEndpoints);
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(RadialError::NotIncreasing(i + 1));
        }
        Ok(Arc::new(Grid { nodes, gamma: None }))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// Width of interval `[ξ_i, ξ_{i+1}]`.
    pub fn spacing(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.intervals())
            .map(|i| self.spacing(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Radii `r_i = √ξ_i` of the nodes.
    pub fn radii(&self) -> Vec<f64> {
        self.nodes.iter().map(|x| x.sqrt()).collect()
    }

    /// Every other node (plus the last one when `N` is odd), used for
    /// Richardson-style truncation estimates.
    pub(crate) fn coarse_indices(&self) -> Vec<usize> {
        let last = self.intervals();
        let mut idx: Vec<usize> = (0..=last).step_by(2).collect();
        if *idx.last().unwrap() != last {
            idx.push(last);
        }
        idx
    }
}
