//! Turn-then-run motion controllers.
//!
//! A controller is a [`CommandSource`]: at every decision point it hands out a
//! [`MotionCommand`]. The [`MotionState`] machine turns those commands into
//! wheel velocities tick by tick: rotate in place at a fixed angular speed,
//! then drive straight for the commanded number of ticks, then ask again.

use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::network::{BooleanNetwork, MotionCommand};
use crate::seed::SimRng;

/// Parameters of the Levy-modulated correlated random walk.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LmcrwParams {
    /// Wrapped Cauchy concentration, `0` isotropic, `1` ballistic.
    pub rho: f64,
    /// Levy stability exponent in `(0, 2]`.
    pub alpha: f64,
}

impl LmcrwParams {
    pub fn new(rho: f64, alpha: f64) -> Result<Self> {
        let p = Self { rho, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        check_alpha(self.alpha)
    }
}

/// How raw stable draws become straight durations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LevyScale {
    /// Control ticks per unit of the standard stable variable.
    pub ticks_per_unit: f64,
    /// Upper truncation of a single straight segment.
    pub max_ticks: u64,
}

impl Default for LevyScale {
    fn default() -> Self {
        // one unit = 2.5 s of straight motion
        Self {
            ticks_per_unit: 80.0,
            max_ticks: 1 << 15,
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(alloc::format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::invalid(alloc::format!("alpha must lie in (0, 2], got {alpha}")));
    }
    Ok(())
}

/// Uniform in `(0, 1]`.
#[inline]
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Turning angle from a wrapped Cauchy law with mode at zero.
///
/// Inverse-CDF sampling: `theta = 2 atan(((1 - rho) / (1 + rho)) tan(pi (u - 1/2)))`.
/// `rho = 0` reduces to `2 pi (u - 1/2)`, `rho = 1` to exactly zero.
pub fn sample_wrapped_cauchy<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<f64> {
    check_rho(rho)?;
    Ok(wrapped_cauchy(rho, rng))
}

#[inline]
fn wrapped_cauchy<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> f64 {
    let u = open_unit(rng);
    let half = PI * (u - 0.5);
    if rho == 0.0 {
        return 2.0 * half;
    }
    let ratio = (1.0 - rho) / (1.0 + rho);
    2.0 * libm::atan(ratio * libm::tan(half))
}

/// Symmetric alpha-stable draw by the Chambers-Mallows-Stuck method.
///
/// `alpha = 2` gives a normal variable of variance 2, `alpha = 1` a standard
/// Cauchy variable.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(stable(alpha, rng))
}

#[inline]
fn stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    // v in (-pi/2, pi/2), w ~ Exp(1)
    let v = PI * (rng.random::<f64>() - 0.5);
    let v = if v <= -FRAC_PI_2 { -FRAC_PI_2 + f64::EPSILON } else { v };
    let w = -libm::log(open_unit(rng));
    if alpha == 1.0 {
        return libm::tan(v);
    }
    let a = libm::sin(alpha * v) / libm::pow(libm::cos(v), 1.0 / alpha);
    let b = libm::pow(libm::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
    a * b
}

/// Straight duration drawn from the Levy law, truncated to `[1, max_ticks]`.
pub fn sample_levy_ticks<R: Rng + ?Sized>(alpha: f64, scale: &LevyScale, rng: &mut R) -> Result<u64> {
    if scale.max_ticks == 0 {
        return Err(Error::invalid("max_ticks must be at least 1"));
    }
    check_alpha(alpha)?;
    Ok(levy_ticks(alpha, scale, rng))
}

#[inline]
fn levy_ticks<R: Rng + ?Sized>(alpha: f64, scale: &LevyScale, rng: &mut R) -> u64 {
    let raw = libm::fabs(stable(alpha, rng)) * scale.ticks_per_unit;
    if !(raw < scale.max_ticks as f64) {
        // also catches inf and NaN
        return scale.max_ticks;
    }
    (libm::round(raw) as u64).clamp(1, scale.max_ticks)
}

/// One LMCRW decision: a wrapped Cauchy turn and a Levy straight segment.
pub fn lmcrw_next<R: Rng + ?Sized>(params: &LmcrwParams, scale: &LevyScale, rng: &mut R) -> Result<MotionCommand> {
    params.validate()?;
    if scale.max_ticks == 0 {
        return Err(Error::invalid("max_ticks must be at least 1"));
    }
    Ok(MotionCommand {
        turn_angle: wrapped_cauchy(params.rho, rng),
        straight_ticks: levy_ticks(params.alpha, scale, rng),
    })
}

/// Anything that can be asked for the next motion command.
pub trait CommandSource {
    fn next_command(&mut self) -> MotionCommand;
}

/// LMCRW controller owning its random stream.
#[derive(Debug, Clone)]
pub struct LmcrwWalker {
    params: LmcrwParams,
    scale: LevyScale,
    rng: SimRng,
}

impl LmcrwWalker {
    pub fn new(params: LmcrwParams, scale: LevyScale, rng: SimRng) -> Result<Self> {
        params.validate()?;
        if scale.max_ticks == 0 {
            return Err(Error::invalid("max_ticks must be at least 1"));
        }
        Ok(Self { params, scale, rng })
    }
}

impl CommandSource for LmcrwWalker {
    fn next_command(&mut self) -> MotionCommand {
        MotionCommand {
            turn_angle: wrapped_cauchy(self.params.rho, &mut self.rng),
            straight_ticks: levy_ticks(self.params.alpha, &self.scale, &mut self.rng),
        }
    }
}

/// Boolean-network controller: decode the current state, then advance one step.
#[derive(Debug, Clone)]
pub struct BnDriver {
    net: BooleanNetwork,
}

impl BnDriver {
    pub fn new(net: BooleanNetwork) -> Self {
        Self { net }
    }

    pub fn network(&self) -> &BooleanNetwork {
        &self.net
    }
}

/// Decode-then-step, so the initial state's command is the first one emitted.
pub fn bn_next(net: &mut BooleanNetwork) -> MotionCommand {
    let cmd = net.decode_motion();
    net.step();
    cmd
}

impl CommandSource for BnDriver {
    fn next_command(&mut self) -> MotionCommand {
        bn_next(&mut self.net)
    }
}

/// Emits the same command forever.
#[derive(Debug, Clone, Copy)]
pub struct FixedCommand(pub MotionCommand);

impl CommandSource for FixedCommand {
    fn next_command(&mut self) -> MotionCommand {
        self.0
    }
}

impl<S: CommandSource + ?Sized> CommandSource for &mut S {
    fn next_command(&mut self) -> MotionCommand {
        (**self).next_command()
    }
}

/// Kinematic constants of the robot's motion primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MotionConfig {
    /// Forward speed during straight motion (m/s).
    pub linear_speed: f64,
    /// Angular speed of in-place rotation (rad/s).
    pub rotation_speed: f64,
    /// Distance between the wheels (m).
    pub wheel_base: f64,
    pub ticks_per_second: u32,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            linear_speed: 0.01,
            rotation_speed: FRAC_PI_4,
            wheel_base: 0.025,
            ticks_per_second: 32,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.linear_speed > 0.0
            && self.rotation_speed > 0.0
            && self.wheel_base > 0.0
            && self.ticks_per_second > 0
            && self.linear_speed.is_finite()
            && self.rotation_speed.is_finite()
            && self.wheel_base.is_finite();
        if !ok {
            return Err(Error::Config(
                "motion speeds, wheel base and tick rate must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Ticks needed to rotate by `angle`, rounded up.
    pub fn rotation_ticks(&self, angle: f64) -> u64 {
        let ticks = libm::fabs(angle) / self.rotation_speed * f64::from(self.ticks_per_second);
        // absorb rounding noise so e.g. pi at pi/4 rad/s is exactly 4 s
        libm::ceil(ticks - 1e-9).max(0.0) as u64
    }

    /// Distance covered by a straight segment of `ticks`.
    pub fn straight_distance(&self, ticks: u64) -> f64 {
        ticks as f64 / f64::from(self.ticks_per_second) * self.linear_speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Clockwise,
    Anticlockwise,
}

/// Where the robot is in its turn-then-run cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionPhase {
    Rotating {
        remaining: u64,
        direction: TurnDirection,
    },
    MovingStraight {
        remaining: u64,
    },
    /// Waiting for the next command.
    Stopped,
}

/// Commanded wheel velocities (m/s), before any actuator bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelVelocities {
    pub left: f64,
    pub right: f64,
}

impl WheelVelocities {
    pub const ZERO: WheelVelocities = WheelVelocities { left: 0.0, right: 0.0 };
}

/// Per-robot executor of motion commands.
#[derive(Debug, Clone)]
pub struct MotionState {
    phase: MotionPhase,
    pending_straight: u64,
}

impl Default for MotionState {
    fn default() -> Self {
        Self::new()
    }
}

/// What happened during one [`MotionState::tick`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub wheels: WheelVelocities,
    /// Command pulled from the source this tick, if any.
    pub pulled: Option<MotionCommand>,
}

impl MotionState {
    pub fn new() -> Self {
        Self {
            phase: MotionPhase::Stopped,
            pending_straight: 0,
        }
    }

    pub fn phase(&self) -> MotionPhase {
        self.phase
    }

    /// Advances one control tick. At most one command is pulled per tick; a
    /// command with no rotation and no straight motion leaves the robot still
    /// for that tick.
    pub fn tick<S: CommandSource + ?Sized>(&mut self, source: &mut S, cfg: &MotionConfig) -> TickOutput {
        let mut pulled = None;
        if self.is_idle() {
            let cmd = source.next_command();
            pulled = Some(cmd);
            let rotation = cfg.rotation_ticks(cmd.turn_angle);
            if rotation > 0 {
                let direction = if cmd.turn_angle > 0.0 {
                    TurnDirection::Anticlockwise
                } else {
                    TurnDirection::Clockwise
                };
                self.phase = MotionPhase::Rotating {
                    remaining: rotation,
                    direction,
                };
                self.pending_straight = cmd.straight_ticks;
            } else if cmd.straight_ticks > 0 {
                self.phase = MotionPhase::MovingStraight {
                    remaining: cmd.straight_ticks,
                };
                self.pending_straight = 0;
            } else {
                self.phase = MotionPhase::Stopped;
                return TickOutput {
                    wheels: WheelVelocities::ZERO,
                    pulled,
                };
            }
        }

        let wheels = match &mut self.phase {
            MotionPhase::Rotating { remaining, direction } => {
                *remaining -= 1;
                let rim = cfg.rotation_speed * cfg.wheel_base / 2.0;
                let w = match direction {
                    TurnDirection::Anticlockwise => WheelVelocities { left: -rim, right: rim },
                    TurnDirection::Clockwise => WheelVelocities { left: rim, right: -rim },
                };
                if *remaining == 0 {
                    self.phase = if self.pending_straight > 0 {
                        MotionPhase::MovingStraight {
                            remaining: self.pending_straight,
                        }
                    } else {
                        MotionPhase::Stopped
                    };
                    self.pending_straight = 0;
                }
                w
            }
            MotionPhase::MovingStraight { remaining } => {
                *remaining -= 1;
                if *remaining == 0 {
                    self.phase = MotionPhase::Stopped;
                }
                WheelVelocities {
                    left: cfg.linear_speed,
                    right: cfg.linear_speed,
                }
            }
            MotionPhase::Stopped => WheelVelocities::ZERO,
        };
        TickOutput { wheels, pulled }
    }

    fn is_idle(&self) -> bool {
        matches!(self.phase, MotionPhase::Stopped)
    }
}
