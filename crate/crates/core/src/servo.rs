//! Activation snapshot → Cartesian end-effector velocity.
//!
//! Antagonistic buttons on each axis are subtracted and scaled by the axis
//! reference speed:
//!
//! ```text
//! v_i = v_ref_i · (a_pos,i − a_neg,i)
//! ```
//!
//! Only buttons whose Schmitt status is active contribute; an inactive button
//! counts as zero whatever its activation. The result is then limited by the
//! virtual cage and zeroed while the force e-stop is latched.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{vec3_array, Vec3};
use crate::input::{Activation, Edge, InputEvent, Status};
use crate::registry::{ActionBinding, GripperAction, Registry};

/// Positions may sit this far outside the cage (float round-off on the wall).
pub const CAGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServoError {
    #[error("end-effector at {position:?} is outside the cage on axis {axis}")]
    Containment { position: [f64; 3], axis: usize },
    #[error("invalid controller config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GripperCommand {
    #[default]
    None,
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityCommand {
    #[serde(with = "vec3_array")]
    pub v: Vec3,
    pub gripper: GripperCommand,
    pub estop: bool,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand {
        v: Vec3::new(0.0, 0.0, 0.0),
        gripper: GripperCommand::None,
        estop: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Per-axis reference speed (m/s).
    #[serde(with = "vec3_array")]
    pub v_ref: Vec3,
    #[serde(with = "vec3_array")]
    pub cage_min: Vec3,
    #[serde(with = "vec3_array")]
    pub cage_max: Vec3,
    /// Contact force (N) above which the e-stop latches.
    pub force_limit: f64,
    pub max_speed: f64,
    /// Servo period in milliseconds (200 Hz → 5 ms).
    pub servo_period_ms: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            v_ref: Vec3::new(0.1, 0.06, 0.08),
            cage_min: Vec3::new(-0.25, -0.15, -0.02),
            cage_max: Vec3::new(0.25, 0.15, 0.30),
            force_limit: 30.0,
            max_speed: 0.6,
            servo_period_ms: 5,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ServoError> {
        if (0..3).any(|i| !(self.cage_min[i] < self.cage_max[i])) {
            return Err(ServoError::InvalidConfig("cage_min must be below cage_max on every axis"));
        }
        if !(self.force_limit > 0.0) {
            return Err(ServoError::InvalidConfig("force limit must be positive"));
        }
        if self.v_ref.iter().any(|v| !(*v >= 0.0)) {
            return Err(ServoError::InvalidConfig("reference speeds must be non-negative"));
        }
        if !(self.v_ref.norm() <= self.max_speed) {
            return Err(ServoError::InvalidConfig("reference speed exceeds the speed limit"));
        }
        if self.servo_period_ms == 0 {
            return Err(ServoError::InvalidConfig("servo period must be positive"));
        }
        Ok(())
    }

    pub fn servo_dt(&self) -> f64 {
        self.servo_period_ms as f64 / 1000.0
    }

    pub fn contains(&self, pos: &Vec3) -> bool {
        (0..3).all(|i| pos[i] >= self.cage_min[i] - CAGE_TOLERANCE && pos[i] <= self.cage_max[i] + CAGE_TOLERANCE)
    }
}

/// Button id → action, taken from the registry.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bindings(BTreeMap<String, ActionBinding>);

impl Bindings {
    pub fn from_registry(registry: &Registry) -> Self {
        Self(
            registry
                .buttons()
                .map(|b| (b.button_id.clone(), b.action.clone()))
                .collect(),
        )
    }

    pub fn get(&self, button_id: &str) -> Option<&ActionBinding> {
        self.0.get(button_id)
    }
}

impl<S: Into<String>> FromIterator<(S, ActionBinding)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (S, ActionBinding)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

pub fn compute_velocity(snapshot: &[Activation], bindings: &Bindings, config: &ControllerConfig) -> Vec3 {
    let mut drive = Vec3::zeros();
    for entry in snapshot {
        if entry.status != Status::Active {
            continue;
        }
        if let Some(ActionBinding::Axis { axis, direction }) = bindings.get(&entry.button_id) {
            drive[axis.index()] += direction.sign() * entry.a;
        }
    }
    config.v_ref.component_mul(&drive)
}

/// Limits each axis so that one step of `dt` seconds stays inside the cage.
pub fn apply_cage(pos: &Vec3, v: &Vec3, dt: f64, config: &ControllerConfig) -> Result<Vec3, ServoError> {
    let mut out = *v;
    for i in 0..3 {
        let (lo, hi) = (config.cage_min[i], config.cage_max[i]);
        if pos[i] < lo - CAGE_TOLERANCE || pos[i] > hi + CAGE_TOLERANCE {
            return Err(ServoError::Containment {
                position: [pos.x, pos.y, pos.z],
                axis: i,
            });
        }
        let max_v = (hi - pos[i]) / dt;
        let min_v = (lo - pos[i]) / dt;
        if out[i] > max_v {
            out[i] = max_v;
        } else if out[i] < min_v {
            out[i] = min_v;
        }
    }
    Ok(out)
}

/// Latched force e-stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SafetyState {
    pub estop: bool,
}

impl SafetyState {
    /// Latches when `force` exceeds the limit; returns the latch state.
    pub fn update_safety(&mut self, force: f64, config: &ControllerConfig) -> bool {
        if force > config.force_limit {
            self.estop = true;
        }
        self.estop
    }

    pub fn clear(&mut self) {
        self.estop = false;
    }
}

/// The last `activated` edge on a gripper button wins; ties in timestamp go
/// to the later event in the list.
pub fn gripper_command(events: &[InputEvent], bindings: &Bindings) -> GripperCommand {
    let mut best: Option<(u64, GripperCommand)> = None;
    for e in events.iter().filter(|e| e.edge == Edge::Activated) {
        let cmd = match bindings.get(&e.button_id) {
            Some(ActionBinding::Gripper(GripperAction::Open)) => GripperCommand::Open,
            Some(ActionBinding::Gripper(GripperAction::Close)) => GripperCommand::Close,
            _ => continue,
        };
        if best.is_none_or(|(t, _)| e.t >= t) {
            best = Some((e.t, cmd));
        }
    }
    best.map_or(GripperCommand::None, |(_, c)| c)
}

/// Servo-side state: configuration, bindings and the e-stop latch.
#[derive(Debug, Clone)]
pub struct ServoController {
    pub config: ControllerConfig,
    pub bindings: Bindings,
    pub safety: SafetyState,
}

impl ServoController {
    pub fn new(config: ControllerConfig, bindings: Bindings) -> Result<Self, ServoError> {
        config.validate()?;
        Ok(Self {
            config,
            bindings,
            safety: SafetyState::default(),
        })
    }

    /// One servo tick: safety check, velocity law, cage limit.
    pub fn tick(
        &mut self,
        snapshot: &[Activation],
        gripper: GripperCommand,
        pos: &Vec3,
        force: f64,
    ) -> Result<VelocityCommand, ServoError> {
        if self.safety.update_safety(force, &self.config) {
            return Ok(VelocityCommand {
                estop: true,
                ..VelocityCommand::STOP
            });
        }
        let v = compute_velocity(snapshot, &self.bindings, &self.config);
        let v = apply_cage(pos, &v, self.config.servo_dt(), &self.config)?;
        Ok(VelocityCommand {
            v,
            gripper,
            estop: false,
        })
    }

    pub fn clear_estop(&mut self) {
        self.safety.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{Axis, Direction};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bindings() -> Bindings {
        let axis = |axis, direction| ActionBinding::Axis { axis, direction };
        [
            ("left", axis(Axis::X, Direction::Positive)),
            ("right", axis(Axis::X, Direction::Negative)),
            ("fwd", axis(Axis::Y, Direction::Positive)),
            ("back", axis(Axis::Y, Direction::Negative)),
            ("up", axis(Axis::Z, Direction::Positive)),
            ("down", axis(Axis::Z, Direction::Negative)),
            ("open", ActionBinding::Gripper(GripperAction::Open)),
            ("close", ActionBinding::Gripper(GripperAction::Close)),
        ]
        .into_iter()
        .collect()
    }

    fn act(id: &str, a: f64, active: bool) -> Activation {
        Activation {
            button_id: id.into(),
            a,
            status: if active { Status::Active } else { Status::Inactive },
        }
    }

    #[test]
    fn velocity_law() {
        let c = ControllerConfig::default();
        let v = compute_velocity(&[act("left", 1.0, true)], &bindings(), &c);
        assert_eq!(v, Vec3::new(0.1, 0.0, 0.0));
        let v = compute_velocity(&[act("left", 0.7, true), act("right", 0.7, true)], &bindings(), &c);
        assert_eq!(v.x, 0.0);
        let v = compute_velocity(&[act("up", 0.5, true), act("down", 0.9, false)], &bindings(), &c);
        assert_abs_diff_eq!(v.z, 0.04, epsilon = 1e-15);
        assert_eq!(compute_velocity(&[], &bindings(), &c), Vec3::zeros());
    }

    #[test]
    fn cage_cases() {
        let c = ControllerConfig::default();
        let v = Vec3::new(0.01, -0.02, 0.0);
        assert_eq!(apply_cage(&Vec3::new(0.0, 0.0, 0.1), &v, 0.005, &c).unwrap(), v);
        let at_wall = Vec3::new(c.cage_max.x, 0.0, 0.1);
        assert_eq!(apply_cage(&at_wall, &Vec3::new(0.1, 0.0, 0.0), 0.005, &c).unwrap().x, 0.0);
        let near = Vec3::new(c.cage_max.x - 0.001, 0.0, 0.1);
        let out = apply_cage(&near, &Vec3::new(0.1, 0.03, 0.0), 0.02, &c).unwrap();
        assert_abs_diff_eq!(out.x, 0.05, epsilon = 1e-12);
        assert_eq!(out.y, 0.03);
        let outside = Vec3::new(c.cage_max.x + 0.01, 0.0, 0.1);
        assert!(matches!(
            apply_cage(&outside, &Vec3::zeros(), 0.005, &c),
            Err(ServoError::Containment { axis: 0, .. })
        ));
    }

    #[test]
    fn estop_latch() {
        let c = ControllerConfig::default();
        let mut s = SafetyState::default();
        assert!(!s.update_safety(29.0, &c));
        assert!(s.update_safety(31.0, &c));
        assert!(s.update_safety(0.0, &c));
        s.clear();
        assert!(!s.update_safety(0.0, &c));
    }

    #[test]
    fn estop_zeroes_commands() {
        let mut servo = ServoController::new(ControllerConfig::default(), bindings()).unwrap();
        let snap = [act("left", 1.0, true)];
        let pos = Vec3::new(0.0, 0.0, 0.1);
        let cmd = servo.tick(&snap, GripperCommand::Close, &pos, 40.0).unwrap();
        assert!(cmd.estop);
        assert_eq!(cmd.v, Vec3::zeros());
        assert_eq!(cmd.gripper, GripperCommand::None);
        let cmd = servo.tick(&snap, GripperCommand::Close, &pos, 0.0).unwrap();
        assert_eq!(cmd.v, Vec3::zeros());
        servo.clear_estop();
        let cmd = servo.tick(&snap, GripperCommand::Close, &pos, 0.0).unwrap();
        assert_eq!(cmd.v.x, 0.1);
        assert_eq!(cmd.gripper, GripperCommand::Close);
    }

    #[test]
    fn gripper_events() {
        let ev = |id: &str, edge, t| InputEvent {
            button_id: id.into(),
            edge,
            t,
        };
        assert_eq!(
            gripper_command(&[ev("close", Edge::Activated, 10)], &bindings()),
            GripperCommand::Close
        );
        assert_eq!(gripper_command(&[], &bindings()), GripperCommand::None);
        assert_eq!(
            gripper_command(&[ev("left", Edge::Activated, 10), ev("open", Edge::Deactivated, 10)], &bindings()),
            GripperCommand::None
        );
        let both = [ev("open", Edge::Activated, 30), ev("close", Edge::Activated, 20)];
        assert_eq!(gripper_command(&both, &bindings()), GripperCommand::Open);
        let both = [ev("open", Edge::Activated, 20), ev("close", Edge::Activated, 30)];
        assert_eq!(gripper_command(&both, &bindings()), GripperCommand::Close);
    }

    #[test]
    fn config_validation() {
        let mut c = ControllerConfig::default();
        assert!(c.validate().is_ok());
        c.cage_min.y = c.cage_max.y;
        assert!(c.validate().is_err());
        let mut c = ControllerConfig::default();
        c.v_ref = Vec3::new(1.0, 0.0, 0.0);
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn componentwise_bound(acts in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 6)) {
            let c = ControllerConfig::default();
            let ids = ["left", "right", "fwd", "back", "up", "down"];
            let snap: Vec<Activation> = ids.iter().zip(&acts).map(|(id, (a, s))| act(id, *a, *s)).collect();
            let v = compute_velocity(&snap, &bindings(), &c);
            for i in 0..3 {
                prop_assert!(v[i].abs() <= c.v_ref[i]);
            }
        }
    }
}
