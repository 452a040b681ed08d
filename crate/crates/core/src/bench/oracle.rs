//! Scripted operator that drives the robot through the gaze channel only.
//!
//! The oracle sees the true world state but acts like a user: each frame it
//! picks one fixation point, either a zone centroid or a rest point outside
//! every zone. Arrow fixations are timed with a lookahead over the exact
//! activation model, so the end-effector coasts to a stop close to the
//! target instead of overshooting.

use std::collections::BTreeMap;

use crate::geometry::{Vec2, Vec3};
use crate::input::{ButtonState, Status};
use crate::registry::{Axis, Direction, GripperAction, Registry};
use crate::runtime::{ClosedLoop, FRAME_MS};
use crate::sim::{GripperState, SimState};
use crate::zone::ProjectedZone;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Per-axis positioning tolerance (m).
    pub tolerance_m: f64,
    /// End-effector height for carrying blocks.
    pub travel_z: f64,
    /// Height of the released block's bottom above the table (m).
    pub release_clearance_m: f64,
    /// Longest fixation considered by the lookahead (frames).
    pub max_fixation_frames: usize,
    /// Where the gaze rests when no button should be charged.
    pub rest_gaze: Vec2,
    /// Failed grasps tolerated per block before giving up.
    pub max_retries: u32,
    /// Release points overriding the stencil squares, block by block.
    pub drop_targets: Option<Vec<[f64; 2]>>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tolerance_m: 0.004,
            travel_z: 0.08,
            release_clearance_m: 0.005,
            max_fixation_frames: 60,
            rest_gaze: Vec2::new(60.0, 1020.0),
            max_retries: 3,
            drop_targets: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Lift,
    ToCube,
    Descend,
    Close,
    LiftBlock,
    ToSquare,
    Lower,
    Open,
    Done,
}

/// One queued axis move.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AxisGoal {
    axis: Axis,
    target: f64,
}

#[derive(Debug, Clone)]
pub struct OraclePolicy {
    pub config: OracleConfig,
    /// Block i is carried to square i.
    pub block: usize,
    pub phase: Phase,
    goals: Vec<AxisGoal>,
    retries: u32,
    /// Reopening after a missed grasp.
    regrasp: bool,
    /// Button ids per (axis, direction) and for the gripper.
    arrows: BTreeMap<(usize, bool), String>,
    open_button: String,
    close_button: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolicyError {
    #[error("registry has no button bound to {0}")]
    MissingButton(String),
    #[error("block {block}: grasp failed {retries} times")]
    GraspFailed { block: usize, retries: u32 },
}

/// Displacement (m) along one axis if the positive or negative arrow is
/// fixated for `frames` more frames starting now, then left alone until
/// both arrows are inactive.
pub fn predict_travel(
    pos: &ButtonState,
    neg: &ButtonState,
    fixate: Option<Direction>,
    frames: usize,
    v_ref: f64,
    t_now: u64,
) -> f64 {
    let (mut p, mut n) = (pos.clone(), neg.clone());
    let dt = FRAME_MS as f64 / 1000.0;
    let mut travel = 0.0;
    let mut t = t_now;
    for j in 0.. {
        let fixating = j < frames;
        p.advance(fixating && fixate == Some(Direction::Positive), t);
        n.advance(fixating && fixate == Some(Direction::Negative), t);
        let a = |s: &ButtonState| if s.status == Status::Active { s.activation() } else { 0.0 };
        travel += v_ref * (a(&p) - a(&n)) * dt;
        if !fixating && p.status == Status::Inactive && n.status == Status::Inactive {
            break;
        }
        t += FRAME_MS;
        if j > frames + 1000 {
            break;
        }
    }
    travel
}

impl OraclePolicy {
    pub fn new(registry: &Registry, config: OracleConfig) -> Result<Self, PolicyError> {
        let mut arrows = BTreeMap::new();
        for axis in Axis::ALL {
            for dir in [Direction::Positive, Direction::Negative] {
                let b = registry
                    .axis_button(axis, dir)
                    .ok_or_else(|| PolicyError::MissingButton(format!("{axis:?} {dir:?}")))?;
                arrows.insert((axis.index(), dir == Direction::Positive), b.button_id.clone());
            }
        }
        let grip = |a: GripperAction| {
            registry
                .gripper_button(a)
                .map(|b| b.button_id.clone())
                .ok_or_else(|| PolicyError::MissingButton(format!("gripper {a:?}")))
        };
        Ok(Self {
            config,
            block: 0,
            phase: Phase::Lift,
            goals: Vec::new(),
            retries: 0,
            regrasp: false,
            arrows,
            open_button: grip(GripperAction::Open)?,
            close_button: grip(GripperAction::Close)?,
        })
    }

    fn arrow(&self, axis: Axis, dir: Direction) -> &str {
        &self.arrows[&(axis.index(), dir == Direction::Positive)]
    }

    fn centroid(zones: &[ProjectedZone], id: &str) -> Option<Vec2> {
        zones.iter().find(|z| z.button_id == id && z.visible).map(|z| z.centroid())
    }

    fn plan(&mut self, state: &SimState, lp: &ClosedLoop) {
        if self.phase == Phase::Done {
            self.goals.clear();
            return;
        }
        let scene = &lp.world.scene().file;
        let cube = state.cubes[self.block].position;
        let square = match &self.config.drop_targets {
            Some(t) => Vec2::new(t[self.block][0], t[self.block][1]),
            None => scene.stencil.square_center(self.block),
        };
        let travel = self.config.travel_z;
        let z_only = |z| vec![AxisGoal { axis: Axis::Z, target: z }];
        let xy = |x, y| {
            vec![
                AxisGoal { axis: Axis::X, target: x },
                AxisGoal { axis: Axis::Y, target: y },
            ]
        };
        self.goals = match self.phase {
            Phase::Lift | Phase::LiftBlock => z_only(travel),
            Phase::ToCube => xy(cube.x, cube.y),
            Phase::Descend => z_only(cube.z),
            Phase::ToSquare => {
                let off = state.held.map(|g| g.offset.position).unwrap_or_else(Vec3::zeros);
                xy(square.x - off.x, square.y - off.y)
            }
            Phase::Lower => {
                let off = state.held.map(|g| g.offset.position.z).unwrap_or(0.0);
                z_only(lp.world.cube_rest_z() + self.config.release_clearance_m - off)
            }
            Phase::Close | Phase::Open | Phase::Done => Vec::new(),
        };
    }

    fn advance_phase(&mut self, state: &SimState, lp: &ClosedLoop) {
        self.phase = match self.phase {
            Phase::Lift => Phase::ToCube,
            Phase::ToCube => Phase::Descend,
            Phase::Descend => Phase::Close,
            Phase::Close => Phase::LiftBlock,
            Phase::LiftBlock => Phase::ToSquare,
            Phase::ToSquare => Phase::Lower,
            Phase::Lower => Phase::Open,
            Phase::Open => {
                self.block += 1;
                self.retries = 0;
                if self.block >= state.cubes.len() {
                    Phase::Done
                } else {
                    Phase::Lift
                }
            }
            Phase::Done => Phase::Done,
        };
        self.plan(state, lp);
    }

    /// All arrow buttons inactive: the end-effector is at rest.
    fn stationary(&self, lp: &ClosedLoop) -> bool {
        self.arrows
            .values()
            .all(|id| lp.pipeline.input().state(id).is_none_or(|s| s.status == Status::Inactive))
    }

    /// Fixation point for the next frame.
    pub fn decide(&mut self, lp: &ClosedLoop) -> Result<Vec2, PolicyError> {
        let rest = self.config.rest_gaze;
        let state = &lp.state;
        if state.estop || self.phase == Phase::Done {
            return Ok(rest);
        }
        if self.goals.is_empty() && !matches!(self.phase, Phase::Close | Phase::Open) {
            self.plan(state, lp);
        }
        let zones = lp.world.true_zones(state);
        match self.phase {
            Phase::Close => {
                if state.gripper == GripperState::Closed {
                    if state.held.is_some_and(|g| g.cube == self.block) {
                        self.advance_phase(state, lp);
                    } else {
                        // Missed: reopen, then line up again.
                        self.retries += 1;
                        if self.retries > self.config.max_retries {
                            return Err(PolicyError::GraspFailed {
                                block: self.block,
                                retries: self.retries,
                            });
                        }
                        self.regrasp = true;
                        self.phase = Phase::Open;
                    }
                    return Ok(rest);
                }
                if !self.stationary(lp) {
                    return Ok(rest);
                }
                return Ok(Self::centroid(&zones, &self.close_button).unwrap_or(rest));
            }
            Phase::Open => {
                if state.gripper == GripperState::Open {
                    if self.regrasp {
                        self.regrasp = false;
                        self.phase = Phase::Lift;
                        self.plan(state, lp);
                    } else {
                        self.advance_phase(state, lp);
                    }
                    return Ok(rest);
                }
                if !self.stationary(lp) {
                    return Ok(rest);
                }
                return Ok(Self::centroid(&zones, &self.open_button).unwrap_or(rest));
            }
            _ => {}
        }
        while let Some(goal) = self.goals.first().copied() {
            match self.axis_step(goal, lp, &zones) {
                Some(gaze) => return Ok(gaze),
                None => {
                    self.goals.remove(0);
                }
            }
        }
        self.advance_phase(state, lp);
        Ok(rest)
    }

    /// Gaze for one frame of an axis move, or `None` once the axis has
    /// settled within tolerance.
    fn axis_step(&self, goal: AxisGoal, lp: &ClosedLoop, zones: &[ProjectedZone]) -> Option<Vec2> {
        let rest = self.config.rest_gaze;
        let input = lp.pipeline.input();
        let pos_id = self.arrow(goal.axis, Direction::Positive);
        let neg_id = self.arrow(goal.axis, Direction::Negative);
        let (Some(pos), Some(neg)) = (input.state(pos_id), input.state(neg_id)) else {
            return Some(rest);
        };
        let i = goal.axis.index();
        let v_ref = lp.controller.config.v_ref[i];
        let err = goal.target - lp.state.ee_pose.position[i];
        let t_next = input.last_t() + FRAME_MS;
        let coast = predict_travel(pos, neg, None, 0, v_ref, t_next);
        let mut best = (f64::abs(err - coast), None, 0);
        for dir in [Direction::Positive, Direction::Negative] {
            for k in 1..=self.config.max_fixation_frames {
                let d = predict_travel(pos, neg, Some(dir), k, v_ref, t_next);
                let e = (err - d).abs();
                if e < best.0 - 1e-12 {
                    best = (e, Some(dir), k);
                }
            }
        }
        match best.1 {
            Some(dir) => {
                let id = if dir == Direction::Positive { pos_id } else { neg_id };
                Some(Self::centroid(zones, id).unwrap_or(rest))
            }
            None => {
                let moving = pos.status == Status::Active || neg.status == Status::Active;
                if !moving && err.abs() <= self.config.tolerance_m {
                    None
                } else {
                    Some(rest)
                }
            }
        }
    }
}
