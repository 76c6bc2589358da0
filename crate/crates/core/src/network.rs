//! Non-homogeneous Boolean networks.
//!
//! A network of `N` nodes is described by an `N x N` connection matrix
//! (`0` no edge, `1` plain edge, `2` negated edge; row `i` lists the inputs of
//! node `i`) and an `N x (N-1)` gate matrix (`0` AND, `1` OR, `2` XOR). A node
//! with `K` inputs folds them left to right, in ascending source index, through
//! the first `K - 1` gates of its row; the remaining gates are inert. A node
//! with a single input copies it, a node without inputs keeps its state.
//!
//! Node states are packed into a `u64` (node `i` is bit `i`), which caps the
//! network size at 64 nodes.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

pub const MAX_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Link {
    Absent = 0,
    Plain = 1,
    Negated = 2,
}

impl Link {
    pub fn from_digit(d: u8) -> Option<Self> {
        match d {
            0 => Some(Link::Absent),
            1 => Some(Link::Plain),
            2 => Some(Link::Negated),
            _ => None,
        }
    }

    pub fn digit(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Gate {
    And = 0,
    Or = 1,
    Xor = 2,
}

impl Gate {
    pub fn from_digit(d: u8) -> Option<Self> {
        match d {
            0 => Some(Gate::And),
            1 => Some(Gate::Or),
            2 => Some(Gate::Xor),
            _ => None,
        }
    }

    pub fn digit(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            Gate::And => a & b,
            Gate::Or => a | b,
            Gate::Xor => a ^ b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Input {
    source: u8,
    negated: bool,
}

impl Input {
    #[inline]
    fn read(self, bits: u64) -> bool {
        ((bits >> self.source) & 1 == 1) ^ self.negated
    }
}

/// Wiring and logic of a network, shared by every robot that runs it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    size: usize,
    links: Vec<Link>,
    gates: Vec<Gate>,
    // compiled view of `links`: inputs of node i are inputs[offsets[i]..offsets[i + 1]]
    offsets: Vec<u32>,
    inputs: Vec<Input>,
}

impl Topology {
    /// Builds a topology from raw matrix digits in row-major order.
    pub fn from_digits(size: usize, links: &[u8], gates: &[u8]) -> Result<Self> {
        check_size(size, 2)?;
        if links.len() != size * size {
            return Err(Error::invalid(alloc::format!(
                "connection matrix needs {} entries, got {}",
                size * size,
                links.len()
            )));
        }
        if gates.len() != size * (size - 1) {
            return Err(Error::invalid(alloc::format!(
                "gate matrix needs {} entries, got {}",
                size * (size - 1),
                gates.len()
            )));
        }
        let links = links
            .iter()
            .enumerate()
            .map(|(idx, &d)| {
                Link::from_digit(d).ok_or_else(|| {
                    Error::invalid(alloc::format!(
                        "connection ({}, {}) = {} outside {{0,1,2}}",
                        idx / size,
                        idx % size,
                        d
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let gates = gates
            .iter()
            .enumerate()
            .map(|(idx, &d)| {
                Gate::from_digit(d).ok_or_else(|| {
                    Error::invalid(alloc::format!(
                        "gate ({}, {}) = {} outside {{0,1,2}}",
                        idx / (size - 1),
                        idx % (size - 1),
                        d
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::compile(size, links, gates))
    }

    pub fn new(size: usize, links: Vec<Link>, gates: Vec<Gate>) -> Result<Self> {
        check_size(size, 2)?;
        if links.len() != size * size || gates.len() != size * (size - 1) {
            return Err(Error::invalid("matrix dimensions do not match network size"));
        }
        Ok(Self::compile(size, links, gates))
    }

    fn compile(size: usize, links: Vec<Link>, gates: Vec<Gate>) -> Self {
        let mut offsets = Vec::with_capacity(size + 1);
        let mut inputs = Vec::new();
        offsets.push(0);
        for row in links.chunks_exact(size) {
            for (source, link) in row.iter().enumerate() {
                if *link != Link::Absent {
                    inputs.push(Input {
                        source: source as u8,
                        negated: *link == Link::Negated,
                    });
                }
            }
            offsets.push(inputs.len() as u32);
        }
        Self {
            size,
            links,
            gates,
            offsets,
            inputs,
        }
    }

    /// Uniform draw of every connection and gate entry from `{0, 1, 2}`.
    pub fn random<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Result<Self> {
        check_size(size, 4)?;
        let links = (0..size * size)
            .map(|_| Link::from_digit(rng.random_range(0..3u8)).unwrap())
            .collect();
        let gates = (0..size * (size - 1))
            .map(|_| Gate::from_digit(rng.random_range(0..3u8)).unwrap())
            .collect();
        Ok(Self::compile(size, links, gates))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Edge from node `source` into node `target`.
    pub fn link(&self, target: usize, source: usize) -> Link {
        self.links[target * self.size + source]
    }

    pub fn gate(&self, node: usize, column: usize) -> Gate {
        self.gates[node * (self.size - 1) + column]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn in_degree(&self, node: usize) -> usize {
        (self.offsets[node + 1] - self.offsets[node]) as usize
    }

    /// Sources feeding `node` in cascade order, with their negation flag.
    pub fn inputs(&self, node: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.node_inputs(node)
            .iter()
            .map(|inp| (inp.source as usize, inp.negated))
    }

    #[inline]
    fn node_inputs(&self, node: usize) -> &[Input] {
        &self.inputs[self.offsets[node] as usize..self.offsets[node + 1] as usize]
    }

    /// Mask with one bit set per node.
    pub fn state_mask(&self) -> u64 {
        state_mask(self.size)
    }

    /// Synchronous update of a packed state vector.
    pub fn next_state(&self, bits: u64) -> u64 {
        let width = self.size - 1;
        let mut next = 0u64;
        for node in 0..self.size {
            let value = match self.node_inputs(node).split_first() {
                None => (bits >> node) & 1 == 1,
                Some((first, rest)) => {
                    let row = &self.gates[node * width..node * width + width];
                    rest.iter()
                        .zip(row)
                        .fold(first.read(bits), |acc, (inp, gate)| gate.apply(acc, inp.read(bits)))
                }
            };
            next |= (value as u64) << node;
        }
        next
    }

    /// Same wiring with a replacement gate matrix.
    pub fn with_gates(&self, gates: Vec<Gate>) -> Result<Self> {
        Self::new(self.size, self.links.clone(), gates)
    }
}

fn check_size(size: usize, min: usize) -> Result<()> {
    if size % 2 != 0 || size < min || size > MAX_NODES {
        return Err(Error::invalid(alloc::format!(
            "network size must be even and within [{min}, {MAX_NODES}], got {size}"
        )));
    }
    Ok(())
}

#[inline]
pub fn state_mask(size: usize) -> u64 {
    if size >= 64 {
        u64::MAX
    } else {
        (1u64 << size) - 1
    }
}

/// A (turning angle, straight duration) decision for one robot.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotionCommand {
    /// Straight-motion duration in control ticks.
    pub straight_ticks: u64,
    /// Rotation before the straight segment, radians in `[-pi, pi]`.
    pub turn_angle: f64,
}

impl MotionCommand {
    pub const STILL: MotionCommand = MotionCommand {
        straight_ticks: 0,
        turn_angle: 0.0,
    };
}

/// Largest straight duration a network of `size` nodes can emit.
pub fn max_straight_ticks(size: usize) -> u64 {
    state_mask(size / 2)
}

/// Unsigned value of nodes `start..start + len`, lowest node index most significant.
#[inline]
fn half_value(bits: u64, start: usize, len: usize) -> u64 {
    (0..len).fold(0u64, |acc, i| (acc << 1) | ((bits >> (start + i)) & 1))
}

/// Motion command encoded by a packed state of a `size`-node network.
pub fn decode_bits(bits: u64, size: usize) -> MotionCommand {
    let half = size / 2;
    let straight_ticks = half_value(bits, 0, half);
    let angle_code = half_value(bits, half, half);
    let top = max_straight_ticks(size) as f64;
    // -pi + 2 pi v / top, arranged so both endpoints are exact
    let turn_angle = PI * (((2 * angle_code) as f64 - top) / top);
    MotionCommand {
        straight_ticks,
        turn_angle,
    }
}

/// Topology plus the current node states.
#[derive(Debug, Clone)]
pub struct BooleanNetwork {
    topology: Arc<Topology>,
    state: u64,
}

impl PartialEq for BooleanNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.state == other.state && (Arc::ptr_eq(&self.topology, &other.topology) || self.topology == other.topology)
    }
}

impl BooleanNetwork {
    pub fn new(topology: Arc<Topology>, state_bits: u64) -> Self {
        let state = state_bits & topology.state_mask();
        Self { topology, state }
    }

    pub fn from_states(topology: Arc<Topology>, states: &[bool]) -> Result<Self> {
        if states.len() != topology.size() {
            return Err(Error::invalid(alloc::format!(
                "expected {} node states, got {}",
                topology.size(),
                states.len()
            )));
        }
        let bits = states
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &s)| acc | ((s as u64) << i));
        Ok(Self::new(topology, bits))
    }

    /// Random wiring, random gates and a random initial state, all from `seed`.
    pub fn generate_random(size: usize, seed: u64) -> Result<Self> {
        let mut rng = seed::rng(seed);
        let topology = Topology::random(size, &mut rng)?;
        let state = random_state(size, &mut rng);
        Ok(Self::new(Arc::new(topology), state))
    }

    pub fn size(&self) -> usize {
        self.topology.size()
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn state_bits(&self) -> u64 {
        self.state
    }

    pub fn node(&self, i: usize) -> bool {
        (self.state >> i) & 1 == 1
    }

    pub fn states(&self) -> Vec<bool> {
        (0..self.size()).map(|i| self.node(i)).collect()
    }

    pub fn set_state_bits(&mut self, bits: u64) {
        self.state = bits & self.topology.state_mask();
    }

    pub fn step(&mut self) {
        self.state = self.topology.next_state(self.state);
    }

    pub fn stepped(&self) -> Self {
        Self {
            topology: Arc::clone(&self.topology),
            state: self.topology.next_state(self.state),
        }
    }

    pub fn decode_motion(&self) -> MotionCommand {
        decode_bits(self.state, self.size())
    }
}

/// One uniform boolean per node.
pub fn random_state<R: Rng + ?Sized>(size: usize, rng: &mut R) -> u64 {
    (0..size).fold(0u64, |acc, i| acc | ((rng.random::<bool>() as u64) << i))
}
