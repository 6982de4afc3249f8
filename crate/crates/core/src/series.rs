//! Per-pair correlation measures sampled along a trajectory.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::measures::{closed_form_measures, reduce_pair, PairMeasures, ReducedPairState};

#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    pub m: usize,
    pub n: usize,
    pub measures: Vec<PairMeasures>,
}

impl PairSeries {
    pub fn pair(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn b(&self) -> Vec<f64> {
        self.measures.iter().map(|x| x.b).collect()
    }

    pub fn c(&self) -> Vec<f64> {
        self.measures.iter().map(|x| x.c).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTimeSeries {
    pub times_fs: Vec<f64>,
    /// `populations[t][k]` = `rho_kk` at `times_fs[t]`.
    pub populations: Vec<Vec<f64>>,
    pub traces: Vec<f64>,
    pub pairs: Vec<PairSeries>,
}

impl CorrelationTimeSeries {
    /// Evaluates the closed-form measures for every pair at every grid time.
    pub fn from_trajectory(traj: &Trajectory, pairs: &[(usize, usize)]) -> Result<Self> {
        if traj.is_empty() {
            return Err(Error::EmptySeries);
        }
        let reduced = reduced_states(traj, pairs)?;
        let pairs = pairs
            .iter()
            .zip(reduced)
            .map(|(&(m, n), states)| PairSeries {
                m: m.min(n),
                n: m.max(n),
                measures: states.iter().map(closed_form_measures).collect(),
            })
            .collect();
        Ok(Self {
            times_fs: traj.times_fs.clone(),
            populations: traj
                .states
                .iter()
                .map(|r| (0..r.dim()).map(|k| r[(k, k)].re).collect())
                .collect(),
            traces: traj.states.iter().map(|r| r.trace().re).collect(),
            pairs,
        })
    }

    pub fn len(&self) -> usize {
        self.times_fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_fs.is_empty()
    }

    pub fn pair(&self, m: usize, n: usize) -> Option<&PairSeries> {
        let key = (m.min(n), m.max(n));
        self.pairs.iter().find(|p| p.pair() == key)
    }
}

/// Reduced pair states for every pair (outer) and time (inner).
pub fn reduced_states(
    traj: &Trajectory,
    pairs: &[(usize, usize)],
) -> Result<Vec<Vec<ReducedPairState>>> {
    pairs
        .par_iter()
        .map(|&(m, n)| {
            traj.states
                .iter()
                .map(|rho| reduce_pair(rho, m, n))
                .collect()
        })
        .collect()
}
