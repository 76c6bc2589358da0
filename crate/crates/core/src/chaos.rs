//! Sensitivity of Boolean-network dynamics to a single bit flip.
//!
//! Two trajectories start from a random state `A` and from `B`, which is `A`
//! with one node flipped. After a fixed horizon the normalised Hamming distance
//! of the final states is compared with the initial `1/N`:
//! `delta = H(A', B') - 1/N`. Negative values mean the perturbation died out
//! (ordered dynamics), positive values that it spread (critical or chaotic).

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{random_state, Topology};
use crate::seed;

pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_HORIZON: u64 = 10_000;
pub const DEFAULT_REGIME_TOLERANCE: f64 = 0.01;
pub const MAX_TRACE_STEPS: usize = 100_000;

/// Normalised Hamming distance of two state vectors.
pub fn hamming(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(alloc::format!(
            "state vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty state vectors"));
    }
    let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.len() as f64)
}

/// Normalised Hamming distance of two packed states of `size` nodes.
#[inline]
pub fn hamming_bits(a: u64, b: u64, size: usize) -> f64 {
    (a ^ b).count_ones() as f64 / size as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub delta_mean: f64,
    pub delta_runs: Vec<f64>,
    pub horizon: u64,
    pub runs: usize,
}

impl SensitivityResult {
    /// Sample standard deviation of the per-run values.
    pub fn delta_std(&self) -> f64 {
        let n = self.delta_runs.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let var = self
            .delta_runs
            .iter()
            .map(|d| (d - self.delta_mean) * (d - self.delta_mean))
            .sum::<f64>()
            / (n - 1.0);
        libm::sqrt(var)
    }
}

/// Delta of one perturbation: flip `node` of `start` and follow both
/// trajectories for `horizon` steps.
pub fn perturbation_delta(topology: &Topology, start: u64, node: usize, horizon: u64) -> f64 {
    let n = topology.size();
    let mut a = start & topology.state_mask();
    let mut b = a ^ (1u64 << node);
    for _ in 0..horizon {
        a = topology.next_state(a);
        b = topology.next_state(b);
        if a == b {
            // merged trajectories never separate again
            break;
        }
    }
    hamming_bits(a, b, n) - 1.0 / n as f64
}

/// Delta averaged over `runs` random states, each with one random node flipped.
pub fn measure_delta(topology: &Topology, runs: usize, horizon: u64, rng_seed: u64) -> SensitivityResult {
    let mut rng = seed::rng(rng_seed);
    let n = topology.size();
    let delta_runs: Vec<f64> = (0..runs)
        .map(|_| {
            let start = random_state(n, &mut rng);
            let node = rng.random_range(0..n);
            perturbation_delta(topology, start, node, horizon)
        })
        .collect();
    let delta_mean = if runs == 0 {
        0.0
    } else {
        delta_runs.iter().sum::<f64>() / runs as f64
    };
    SensitivityResult {
        delta_mean,
        delta_runs,
        horizon,
        runs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Regime {
    Ordered,
    Boundary,
    /// Critical or chaotic: perturbations spread.
    Chaotic,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Ordered => "ordered",
            Regime::Boundary => "boundary",
            Regime::Chaotic => "chaotic",
        }
    }
}

pub fn classify(result: &SensitivityResult, tolerance: f64) -> Regime {
    classify_delta(result.delta_mean, tolerance)
}

pub fn classify_delta(delta: f64, tolerance: f64) -> Regime {
    if delta < -tolerance {
        Regime::Ordered
    } else if delta > tolerance {
        Regime::Chaotic
    } else {
        Regime::Boundary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cycle {
    /// Step at which the attractor is first entered.
    pub start: usize,
    pub length: usize,
}

/// Raster of node states over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub size: usize,
    /// Packed state per step, starting with the initial state.
    pub rows: Vec<u64>,
    pub cycle: Option<Cycle>,
}

impl ActivationTrace {
    pub fn row(&self, step: usize) -> Vec<bool> {
        (0..self.size).map(|i| (self.rows[step] >> i) & 1 == 1).collect()
    }
}

/// Records `steps` updates (capped at [`MAX_TRACE_STEPS`]) and reports the
/// first revisited state as the attractor.
pub fn activation_trace(topology: &Topology, initial: u64, steps: usize) -> ActivationTrace {
    let steps = steps.min(MAX_TRACE_STEPS);
    let mut rows = Vec::with_capacity(steps + 1);
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    let mut cycle = None;
    let mut state = initial & topology.state_mask();
    for t in 0..=steps {
        rows.push(state);
        if cycle.is_none() {
            if let Some(&first) = seen.get(&state) {
                cycle = Some(Cycle {
                    start: first,
                    length: t - first,
                });
            } else {
                seen.insert(state, t);
            }
        }
        if t < steps {
            state = topology.next_state(state);
        }
    }
    ActivationTrace {
        size: topology.size(),
        rows,
        cycle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hamming_cases() {
        let x = vec![true, false, true];
        assert_eq!(hamming(&x, &x).unwrap(), 0.0);
        assert_eq!(hamming(&[false; 20], &[true; 20]).unwrap(), 1.0);
        let mut y = vec![false; 20];
        y[7] = true;
        assert_eq!(hamming(&[false; 20], &y).unwrap(), 0.05);
        assert!(hamming(&[true], &[true, false]).is_err());
    }

    fn identity(n: usize) -> Topology {
        let mut links = vec![0u8; n * n];
        for i in 0..n {
            links[i * n + i] = 1;
        }
        Topology::from_digits(n, &links, &vec![0; n * (n - 1)]).unwrap()
    }

    #[test]
    fn identity_and_frozen_networks_have_zero_delta() {
        let r = measure_delta(&identity(10), 50, 1000, 4);
        assert!(r.delta_runs.iter().all(|d| *d == 0.0));
        let frozen = Topology::from_digits(8, &[0; 64], &[2; 56]).unwrap();
        for horizon in [0, 10, 10_000] {
            let r = measure_delta(&frozen, 20, horizon, 9);
            assert_eq!(r.delta_mean, 0.0);
        }
    }

    #[test]
    fn classification() {
        let tol = DEFAULT_REGIME_TOLERANCE;
        assert_eq!(classify_delta(-0.04, tol), Regime::Ordered);
        assert_eq!(classify_delta(0.3, tol), Regime::Chaotic);
        assert_eq!(classify_delta(0.002, tol), Regime::Boundary);
    }

    #[test]
    fn frozen_trace_has_unit_cycle() {
        let frozen = Topology::from_digits(4, &[0; 16], &[0; 12]).unwrap();
        let tr = activation_trace(&frozen, 0b1010, 20);
        assert!(tr.rows.iter().all(|r| *r == 0b1010));
        assert_eq!(tr.cycle, Some(Cycle { start: 0, length: 1 }));
    }

    #[test]
    fn not_loop_cycles() {
        // node 0 <- NOT node 1, node 1 <- node 0: 00 -> 01 -> 11 -> 10 -> 00
        let top = Topology::from_digits(2, &[0, 2, 1, 0], &[0, 0]).unwrap();
        let tr = activation_trace(&top, 0, 10);
        let c = tr.cycle.unwrap();
        assert_eq!(c.length, 4);
        assert!(c.length > 1);
    }
}
