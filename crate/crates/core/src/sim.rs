//! Kinematic simulation of disk robots searching a bounded circular arena.
//!
//! One control tick is one Euler step of differential-drive kinematics,
//! followed by positional collision projection (walls, then pairwise robot
//! separation) and target detection. Robots keep exploring after they find
//! the target; only the first passage is recorded.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::controller::{
    BnDriver, CommandSource, FixedCommand, LevyScale, LmcrwParams, LmcrwWalker, MotionConfig, MotionState,
    WheelVelocities,
};
use crate::error::{Error, Result};
use crate::network::{random_state, BooleanNetwork, MotionCommand, Topology};
use crate::seed;

/// Maximum Gauss-Seidel passes of robot-robot separation per tick.
pub const COLLISION_PASSES: usize = 8;
/// A robot on the wall limit does not yield to a push whose direction is
/// within 60 degrees of the outward normal.
const HELD_COSINE: f64 = 0.5;

/// Overlap below which pairwise separation stops iterating (m).
pub const COLLISION_TOLERANCE: f64 = 1e-6;
const PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    #[inline]
    pub fn dist_sq(self, other: Vec2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Arena, swarm and robot constants for one trial.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ArenaConfig {
    pub arena_radius: f64,
    pub target_radius: f64,
    /// Robot-center to target-center distance that counts as finding the target.
    pub detection_distance: f64,
    pub robot_count: usize,
    /// Trial length (s).
    pub trial_duration: f64,
    pub ticks_per_second: u32,
    /// Mean of the per-robot right-wheel velocity bias (m/s).
    pub bias_mean: f64,
    /// Standard deviation of the per-robot right-wheel velocity bias (m/s).
    pub bias_std: f64,
    pub body_radius: f64,
    pub wheel_base: f64,
    pub linear_speed: f64,
    pub rotation_speed: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            arena_radius: 0.45,
            target_radius: 0.015,
            detection_distance: 0.03,
            robot_count: 20,
            trial_duration: 3000.0,
            ticks_per_second: 32,
            bias_mean: 0.00015,
            bias_std: 0.00270,
            body_radius: 0.0165,
            wheel_base: 0.025,
            linear_speed: 0.01,
            rotation_speed: PI / 4.0,
        }
    }
}

impl ArenaConfig {
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            self.arena_radius,
            self.target_radius,
            self.detection_distance,
            self.body_radius,
        ];
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config("all lengths must be positive".into()));
        }
        if self.detection_distance < self.target_radius {
            return Err(Error::Config(
                "detection distance must not be smaller than the target radius".into(),
            ));
        }
        if self.body_radius >= self.arena_radius {
            return Err(Error::Config("robots do not fit in the arena".into()));
        }
        if !(self.trial_duration.is_finite() && self.trial_duration > 0.0) {
            return Err(Error::Config("trial duration must be positive".into()));
        }
        if self.robot_count == 0 {
            return Err(Error::Config("at least one robot is required".into()));
        }
        if !(self.bias_std >= 0.0 && self.bias_std.is_finite() && self.bias_mean.is_finite()) {
            return Err(Error::Config("bias must be finite with non-negative spread".into()));
        }
        self.motion().validate()
    }

    pub fn motion(&self) -> MotionConfig {
        MotionConfig {
            linear_speed: self.linear_speed,
            rotation_speed: self.rotation_speed,
            wheel_base: self.wheel_base,
            ticks_per_second: self.ticks_per_second,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.ticks_per_second)
    }

    pub fn total_ticks(&self) -> u64 {
        libm::round(self.trial_duration * f64::from(self.ticks_per_second)) as u64
    }

    /// Largest distance of a robot center from the arena center.
    pub fn wall_limit(&self) -> f64 {
        self.arena_radius - self.body_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

/// One Euler step of differential-drive kinematics.
#[inline]
pub fn differential_step(pose: Pose, left: f64, right: f64, wheel_base: f64, dt: f64) -> Pose {
    let v = 0.5 * (left + right);
    let omega = (right - left) / wheel_base;
    let mut heading = pose.heading + omega * dt;
    if heading > PI {
        heading -= 2.0 * PI;
    } else if heading <= -PI {
        heading += 2.0 * PI;
    }
    let (sin, cos) = libm::sincos(heading);
    Pose {
        position: Vec2 {
            x: pose.position.x + v * dt * cos,
            y: pose.position.y + v * dt * sin,
        },
        heading,
    }
}

/// Differential-drive integrator that caches the per-tick rotation for the
/// current wheel command. Same kinematics as [`differential_step`]; the
/// heading vector is re-synchronised from the heading angle whenever the
/// wheel command changes.
#[derive(Debug, Clone, Copy)]
struct DriveIntegrator {
    wheels: WheelVelocities,
    turn: f64,
    rot_cos: f64,
    rot_sin: f64,
    advance: f64,
    dir_cos: f64,
    dir_sin: f64,
}

impl DriveIntegrator {
    fn new(heading: f64) -> Self {
        let (s, c) = libm::sincos(heading);
        Self {
            wheels: WheelVelocities::ZERO,
            turn: 0.0,
            rot_cos: 1.0,
            rot_sin: 0.0,
            advance: 0.0,
            dir_cos: c,
            dir_sin: s,
        }
    }

    #[inline]
    fn step(&mut self, pose: &mut Pose, wheels: WheelVelocities, wheel_base: f64, dt: f64) {
        if wheels != self.wheels {
            self.wheels = wheels;
            self.turn = (wheels.right - wheels.left) / wheel_base * dt;
            let (s, c) = libm::sincos(self.turn);
            self.rot_cos = c;
            self.rot_sin = s;
            self.advance = 0.5 * (wheels.left + wheels.right) * dt;
            let (s, c) = libm::sincos(pose.heading);
            self.dir_cos = c;
            self.dir_sin = s;
        }
        let mut heading = pose.heading + self.turn;
        if heading > PI {
            heading -= 2.0 * PI;
        } else if heading <= -PI {
            heading += 2.0 * PI;
        }
        pose.heading = heading;
        let c = self.dir_cos * self.rot_cos - self.dir_sin * self.rot_sin;
        let s = self.dir_sin * self.rot_cos + self.dir_cos * self.rot_sin;
        self.dir_cos = c;
        self.dir_sin = s;
        pose.position.x += self.advance * c;
        pose.position.y += self.advance * s;
    }
}

/// Summary of one collision resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionReport {
    pub passes: usize,
    /// Largest pairwise overlap left after the final pass (m).
    pub max_overlap: f64,
}

#[inline]
fn project_inside(p: &mut Vec2, limit: f64) {
    let r2 = p.norm_sq();
    if r2 > limit * limit {
        let scale = limit / libm::sqrt(r2);
        p.x *= scale;
        p.y *= scale;
    }
}

/// Pushes robots back inside the wall limit and apart from each other.
///
/// Walls project radially onto the limit circle. Overlapping pairs are moved
/// apart along their center line by half the overlap each, in Gauss-Seidel
/// passes until the largest overlap drops below [`COLLISION_TOLERANCE`] or
/// [`COLLISION_PASSES`] passes have run. Headings are never touched.
pub fn resolve_collisions(positions: &mut [Vec2], body_radius: f64, arena_radius: f64) -> CollisionReport {
    CollisionResolver::new(positions.len()).resolve(positions, body_radius, arena_radius)
}

/// Collision resolution with a cached neighbour list. Candidate pairs within
/// contact distance plus a skin are rebuilt whenever some robot has moved
/// more than half the skin since the last rebuild, so no contact is missed.
#[derive(Debug, Clone)]
pub struct CollisionResolver {
    pairs: Vec<(usize, usize)>,
    anchors: Vec<Vec2>,
    skin: f64,
}

impl CollisionResolver {
    pub fn new(robots: usize) -> Self {
        Self::with_skin(robots, 0.01)
    }

    pub fn with_skin(robots: usize, skin: f64) -> Self {
        Self {
            pairs: Vec::new(),
            anchors: Vec::with_capacity(robots),
            skin,
        }
    }

    fn needs_rebuild(&self, positions: &[Vec2]) -> bool {
        if self.anchors.len() != positions.len() {
            return true;
        }
        let half_sq = 0.25 * self.skin * self.skin;
        positions
            .iter()
            .zip(&self.anchors)
            .any(|(p, a)| p.dist_sq(*a) > half_sq)
    }

    fn rebuild(&mut self, positions: &[Vec2], contact: f64) {
        let reach = contact + self.skin;
        let reach_sq = reach * reach;
        self.pairs.clear();
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if positions[i].dist_sq(positions[j]) < reach_sq {
                    self.pairs.push((i, j));
                }
            }
        }
        self.anchors.clear();
        self.anchors.extend_from_slice(positions);
    }

    pub fn resolve(&mut self, positions: &mut [Vec2], body_radius: f64, arena_radius: f64) -> CollisionReport {
        let limit = arena_radius - body_radius;
        let contact = 2.0 * body_radius;
        let contact_sq = contact * contact;
        let pinned_sq = (limit - 1e-9) * (limit - 1e-9);
        for p in positions.iter_mut() {
            project_inside(p, limit);
        }
        if self.needs_rebuild(positions) {
            self.rebuild(positions, contact);
        }
        let mut passes = 0;
        let mut max_overlap = 0.0f64;
        while passes < COLLISION_PASSES {
            passes += 1;
            max_overlap = 0.0;
            for &(i, j) in &self.pairs {
                let (a, b) = (positions[i], positions[j]);
                let dx = b.x - a.x;
                let dy = b.y - a.y;
                let d2 = dx * dx + dy * dy;
                if d2 >= contact_sq {
                    continue;
                }
                let d = libm::sqrt(d2);
                let overlap = contact - d;
                max_overlap = max_overlap.max(overlap);
                let (ux, uy) = if d > 0.0 { (dx / d, dy / d) } else { (1.0, 0.0) };
                // a robot held by the wall against the push stays put
                let held_i = a.norm_sq() >= pinned_sq && -(ux * a.x + uy * a.y) > HELD_COSINE * limit;
                let held_j = b.norm_sq() >= pinned_sq && ux * b.x + uy * b.y > HELD_COSINE * limit;
                let (push_i, push_j) = match (held_i, held_j) {
                    (true, false) => (0.0, overlap),
                    (false, true) => (overlap, 0.0),
                    _ => (0.5 * overlap, 0.5 * overlap),
                };
                positions[i] = Vec2::new(a.x - ux * push_i, a.y - uy * push_i);
                positions[j] = Vec2::new(b.x + ux * push_j, b.y + uy * push_j);
                project_inside(&mut positions[i], limit);
                project_inside(&mut positions[j], limit);
            }
            // corrections late in a pass can re-open earlier contacts slightly
            if max_overlap < 0.1 * COLLISION_TOLERANCE {
                break;
            }
        }
        CollisionReport { passes, max_overlap }
    }
}

/// Largest overlap between any two robots of radius `contact / 2` (m, zero if none).
pub fn max_pair_overlap(positions: &[Vec2], contact: f64) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            let dx = b.x - a.x;
            if dx >= contact || dx <= -contact {
                continue;
            }
            let d = libm::sqrt(a.dist_sq(*b));
            worst = worst.max(contact - d);
        }
    }
    worst
}

/// How robots running a network get their initial node states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialStates {
    /// Each robot draws a uniform state from its own controller seed.
    PerRobotRandom,
    /// Every robot starts from the same packed state.
    Shared(u64),
}

/// Which controller every robot of a trial runs.
#[derive(Debug, Clone)]
pub enum ControllerSpec {
    Lmcrw {
        params: LmcrwParams,
        scale: LevyScale,
    },
    Network {
        topology: Arc<Topology>,
        initial: InitialStates,
    },
    Fixed(MotionCommand),
}

/// Controller instance owned by a single robot.
#[derive(Debug, Clone)]
pub enum Controller {
    Lmcrw(LmcrwWalker),
    Network(BnDriver),
    Fixed(FixedCommand),
}

impl CommandSource for Controller {
    #[inline]
    fn next_command(&mut self) -> MotionCommand {
        match self {
            Controller::Lmcrw(c) => c.next_command(),
            Controller::Network(c) => c.next_command(),
            Controller::Fixed(c) => c.next_command(),
        }
    }
}

impl ControllerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ControllerSpec::Lmcrw { params, scale } => {
                params.validate()?;
                if scale.max_ticks == 0 || !(scale.ticks_per_unit > 0.0) {
                    return Err(Error::Config("Levy scale must be positive".into()));
                }
                Ok(())
            }
            ControllerSpec::Network { .. } => Ok(()),
            ControllerSpec::Fixed(cmd) => {
                if libm::fabs(cmd.turn_angle) > PI {
                    return Err(Error::Config("turn angle outside [-pi, pi]".into()));
                }
                Ok(())
            }
        }
    }

    /// Instantiates the controller of one robot from its own seed.
    pub fn build(&self, robot_seed: u64) -> Result<Controller> {
        Ok(match self {
            ControllerSpec::Lmcrw { params, scale } => {
                Controller::Lmcrw(LmcrwWalker::new(*params, *scale, seed::rng(robot_seed))?)
            }
            ControllerSpec::Network { topology, initial } => {
                let bits = match initial {
                    InitialStates::PerRobotRandom => random_state(topology.size(), &mut seed::rng(robot_seed)),
                    InitialStates::Shared(bits) => *bits,
                };
                Controller::Network(BnDriver::new(BooleanNetwork::new(Arc::clone(topology), bits)))
            }
            ControllerSpec::Fixed(cmd) => Controller::Fixed(FixedCommand(*cmd)),
        })
    }
}

/// Seeds addressing every random stream of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
}

impl TrialSeeds {
    pub fn new(trial: u64) -> Self {
        Self { trial }
    }

    pub fn placement(&self) -> u64 {
        seed::derive(self.trial, 0)
    }

    pub fn bias(&self) -> u64 {
        seed::derive(self.trial, 1)
    }

    pub fn robot(&self, index: usize) -> u64 {
        seed::derive(seed::derive(self.trial, 2), index as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOptions {
    /// Keep every pulled command per robot.
    pub record_commands: bool,
    /// Stop stepping once every robot has found the target. First passages
    /// are unaffected; straight-motion statistics then cover only the
    /// exploration period.
    pub stop_when_all_found: bool,
    /// Keep every robot pose after each tick, starting with the placement.
    pub record_paths: bool,
}

/// First-passage outcome of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_seed: u64,
    pub target: Vec2,
    /// Trial length used for censoring (s).
    pub duration: f64,
    /// Per robot: time of first passage, `None` if censored at `duration`.
    pub first_passage: Vec<Option<f64>>,
}

impl TrialRecord {
    pub fn censored_count(&self) -> usize {
        self.first_passage.iter().filter(|t| t.is_none()).count()
    }
}

/// Accumulated straight-segment durations of pulled commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StraightStats {
    pub total_ticks: u64,
    pub commands: u64,
}

impl StraightStats {
    pub fn add(&mut self, ticks: u64) {
        self.total_ticks = self.total_ticks.saturating_add(ticks);
        self.commands += 1;
    }

    pub fn merge(&mut self, other: &StraightStats) {
        self.total_ticks = self.total_ticks.saturating_add(other.total_ticks);
        self.commands += other.commands;
    }
}

/// Average straight-motion duration in seconds over all logged commands.
pub fn straight_motion_stats(logs: &[StraightStats], ticks_per_second: u32) -> Result<f64> {
    let mut all = StraightStats::default();
    for l in logs {
        all.merge(l);
    }
    if all.commands == 0 {
        return Err(Error::UndefinedStatistic("no motion commands were logged".into()));
    }
    Ok(all.total_ticks as f64 / all.commands as f64 / f64::from(ticks_per_second))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub straight: StraightStats,
    /// Pulled commands per robot, when requested.
    pub commands: Option<Vec<Vec<MotionCommand>>>,
    /// Poses per tick (outer index) and robot, when requested.
    pub paths: Option<Vec<Vec<Pose>>>,
    pub ticks_run: u64,
}

fn uniform_in_disk<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Vec2 {
    loop {
        let x = rng.random_range(-1.0..1.0);
        let y = rng.random_range(-1.0..1.0);
        if x * x + y * y <= 1.0 {
            return Vec2::new(x * radius, y * radius);
        }
    }
}

/// Uniform target position and non-overlapping uniform robot positions.
pub fn place<R: Rng + ?Sized>(config: &ArenaConfig, rng: &mut R) -> Result<(Vec2, Vec<Vec2>)> {
    let target = uniform_in_disk(config.arena_radius, rng);
    let limit = config.wall_limit();
    let contact_sq = 4.0 * config.body_radius * config.body_radius;
    let mut robots: Vec<Vec2> = Vec::with_capacity(config.robot_count);
    for _ in 0..config.robot_count {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let p = uniform_in_disk(limit, rng);
            if robots.iter().all(|q| q.dist_sq(p) >= contact_sq) {
                robots.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(alloc::format!(
                "could not place {} non-overlapping robots in the arena",
                config.robot_count
            )));
        }
    }
    Ok((target, robots))
}

/// Per-robot simulation state of one running trial.
struct Agent {
    heading: f64,
    wheel_bias: f64,
    first_passage: Option<f64>,
    controller: Controller,
    motion: MotionState,
    drive: DriveIntegrator,
}

/// Runs one trial to completion.
pub fn run_trial(
    config: &ArenaConfig,
    controller: &ControllerSpec,
    seeds: TrialSeeds,
    options: TrialOptions,
) -> Result<TrialOutcome> {
    config.validate()?;
    controller.validate()?;
    let (target, mut positions) = place(config, &mut seed::rng(seeds.placement()))?;
    let bias_law = Normal::new(config.bias_mean, config.bias_std)
        .map_err(|e| Error::Config(alloc::format!("bias distribution: {e}")))?;
    let mut bias_rng = seed::rng(seeds.bias());
    let mut heading_rng = seed::rng(seed::derive(seeds.placement(), 1));

    let dt = config.dt();
    let detect_sq = config.detection_distance * config.detection_distance;
    let mut agents = Vec::with_capacity(config.robot_count);
    let mut found = 0usize;
    for (r, p) in positions.iter().enumerate() {
        let heading = heading_rng.random_range(-PI..PI);
        let first_passage = (p.dist_sq(target) <= detect_sq).then_some(dt);
        found += usize::from(first_passage.is_some());
        agents.push(Agent {
            heading,
            wheel_bias: bias_law.sample(&mut bias_rng),
            first_passage,
            controller: controller.build(seeds.robot(r))?,
            motion: MotionState::new(),
            drive: DriveIntegrator::new(heading),
        });
    }
    let mut log: Option<Vec<Vec<MotionCommand>>> = options
        .record_commands
        .then(|| (0..config.robot_count).map(|_| Vec::new()).collect());

    let mcfg = config.motion();
    let total = config.total_ticks();
    let mut straight = StraightStats::default();
    let snapshot = |agents: &[Agent], positions: &[Vec2]| -> Vec<Pose> {
        agents
            .iter()
            .zip(positions)
            .map(|(a, &position)| Pose {
                position,
                heading: a.heading,
            })
            .collect()
    };
    let mut paths = options.record_paths.then(|| alloc::vec![snapshot(&agents, &positions)]);
    let mut resolver = CollisionResolver::new(config.robot_count);

    let mut ticks_run = 0;
    for tick in 1..=total {
        if options.stop_when_all_found && found == agents.len() {
            break;
        }
        ticks_run = tick;
        for (r, (agent, position)) in agents.iter_mut().zip(positions.iter_mut()).enumerate() {
            let out = agent.motion.tick(&mut agent.controller, &mcfg);
            if let Some(cmd) = out.pulled {
                straight.add(cmd.straight_ticks);
                if let Some(log) = log.as_mut() {
                    log[r].push(cmd);
                }
            }
            if out.wheels != WheelVelocities::ZERO {
                let wheels = WheelVelocities {
                    left: out.wheels.left,
                    right: out.wheels.right + agent.wheel_bias,
                };
                let mut pose = Pose {
                    position: *position,
                    heading: agent.heading,
                };
                agent.drive.step(&mut pose, wheels, config.wheel_base, dt);
                *position = pose.position;
                agent.heading = pose.heading;
            }
        }
        resolver.resolve(&mut positions, config.body_radius, config.arena_radius);
        let now = tick as f64 * dt;
        for (agent, p) in agents.iter_mut().zip(positions.iter()) {
            if agent.first_passage.is_none() && p.dist_sq(target) <= detect_sq {
                agent.first_passage = Some(now);
                found += 1;
            }
        }
        if let Some(paths) = paths.as_mut() {
            paths.push(snapshot(&agents, &positions));
        }
    }

    Ok(TrialOutcome {
        record: TrialRecord {
            trial_seed: seeds.trial,
            target,
            duration: total as f64 * dt,
            first_passage: agents.iter().map(|a| a.first_passage).collect(),
        },
        straight,
        commands: log,
        paths,
        ticks_run,
    })
}
