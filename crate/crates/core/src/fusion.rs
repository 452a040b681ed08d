//! Per-frame fusion of marker observations into button poses.
//!
//! Each observed parent marker yields a candidate button pose
//! (`camera_T_marker ∘ marker_T_button`). Candidates are pooled with weights
//! that fall off with the marker-to-button distance, `ω = 1 / |offset|ⁿ`,
//! so that markers close to a button dominate its estimate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{compose, weighted_mean_positions, weighted_mean_quaternions, GeometryError, Pose, Vec3};
use crate::registry::Registry;

pub const DEFAULT_EXPONENT: f64 = 2.0;

/// Offsets shorter than this use [`MAX_WEIGHT`].
pub const MIN_OFFSET_DISTANCE: f64 = 1e-4;
pub const MAX_WEIGHT: f64 = 1e8;

/// One detected marker: its pose in the camera (user) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerObservation {
    #[serde(rename = "id")]
    pub marker_id: u32,
    #[serde(flatten)]
    pub pose: Pose,
    /// Milliseconds. Not part of the recorded wire form; frames carry the time.
    #[serde(skip)]
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedButtonPose {
    pub button_id: String,
    pub pose: Pose,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionDiagnostic {
    pub button_id: String,
    pub error: GeometryError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FusionOutput {
    /// Sorted by `button_id`.
    pub buttons: Vec<FusedButtonPose>,
    pub dropped: Vec<FusionDiagnostic>,
}

/// Candidate camera-frame button pose seen through one marker.
pub fn candidate_pose(obs: &MarkerObservation, offset: &Pose) -> Pose {
    compose(&obs.pose, offset)
}

pub fn fusion_weight(offset_position: &Vec3, exponent: f64) -> f64 {
    let d = offset_position.norm();
    if d < MIN_OFFSET_DISTANCE {
        MAX_WEIGHT
    } else {
        1.0 / d.powf(exponent)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Fuser {
    pub exponent: f64,
}

impl Default for Fuser {
    fn default() -> Self {
        Self {
            exponent: DEFAULT_EXPONENT,
        }
    }
}

impl Fuser {
    pub fn new(exponent: f64) -> Self {
        Self { exponent }
    }

    /// Fuses one frame. Duplicate marker ids keep the last observation.
    /// Buttons without a visible parent are absent from the output.
    pub fn fuse_frame(&self, observations: &[MarkerObservation], registry: &Registry) -> FusionOutput {
        let latest: BTreeMap<u32, &MarkerObservation> = observations.iter().map(|o| (o.marker_id, o)).collect();
        let mut out = FusionOutput::default();
        let mut positions = Vec::new();
        let mut rotations = Vec::new();
        let mut weights = Vec::new();
        for button in registry.buttons() {
            positions.clear();
            rotations.clear();
            weights.clear();
            for parent in &button.parents {
                if let Some(obs) = latest.get(&parent.marker_id) {
                    let c = candidate_pose(obs, &parent.offset);
                    positions.push(c.position);
                    rotations.push(c.rotation);
                    weights.push(fusion_weight(&parent.offset.position, self.exponent));
                }
            }
            if positions.is_empty() {
                continue;
            }
            let fused = weighted_mean_positions(&positions, &weights)
                .and_then(|p| weighted_mean_quaternions(&rotations, &weights).map(|q| Pose::new(p, q)));
            match fused {
                Ok(pose) => out.buttons.push(FusedButtonPose {
                    button_id: button.button_id.clone(),
                    pose,
                    n_candidates: positions.len(),
                }),
                Err(error) => out.dropped.push(FusionDiagnostic {
                    button_id: button.button_id.clone(),
                    error,
                }),
            }
        }
        out
    }
}

pub fn fuse_frame(observations: &[MarkerObservation], registry: &Registry) -> FusionOutput {
    Fuser::default().fuse_frame(observations, registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;
    use crate::registry::load_registry;
    use approx::assert_abs_diff_eq;

    fn obs(id: u32, pose: Pose) -> MarkerObservation {
        MarkerObservation {
            marker_id: id,
            pose,
            t: 0,
        }
    }

    fn two_parent_registry(d1: f64, d2: f64) -> Registry {
        load_registry(
            "marker_id,edge_length_m\n1,0.04\n2,0.04\n",
            "button_id,kind,action,face_hx_m,face_hy_m,zone_hx_m,zone_hy_m\nb,continuous,axis:x+,0.01,0.01,0.02,0.02\n",
            &format!(
                "button_id,marker_id,px_m,py_m,pz_m,qw,qx,qy,qz\nb,1,{d1},0,0,1,0,0,0\nb,2,0,{d2},0,1,0,0,0\n"
            ),
        )
        .unwrap()
    }

    #[test]
    fn identity_offset_returns_marker_pose() {
        let p = Pose::new(Vec3::new(0.1, 0.2, 0.7), Quaternion::rot_y(0.3));
        assert_eq!(candidate_pose(&obs(0, p), &Pose::IDENTITY), p);
    }

    #[test]
    fn candidate_transforms_offset_point() {
        // Marker facing the camera: its +z points back at the camera.
        let marker = Pose::new(Vec3::new(0.0, 0.0, 0.5), Quaternion::rot_y(std::f64::consts::PI));
        let c = candidate_pose(&obs(0, marker), &Pose::from_translation(0.1, 0.0, 0.0));
        assert_abs_diff_eq!(c.position, Vec3::new(-0.1, 0.0, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn weights() {
        assert_eq!(fusion_weight(&Vec3::new(1.0, 0.0, 0.0), 2.0), 1.0);
        assert_abs_diff_eq!(fusion_weight(&Vec3::new(0.0, 0.5, 0.0), 2.0), 4.0, epsilon = 1e-12);
        assert_eq!(fusion_weight(&Vec3::zeros(), 2.0), MAX_WEIGHT);
    }

    #[test]
    fn coincident_marker_dominates() {
        // Parent 1 is co-located with the button, parent 2 sits 0.1 m away.
        let reg = two_parent_registry(0.0, 0.1);
        let truth = Vec3::new(0.0, 0.0, 1.0);
        let frame = [
            obs(1, Pose::new(truth, Quaternion::IDENTITY)),
            // Second marker reports the button 5 cm off.
            obs(2, Pose::new(Vec3::new(0.05, -0.1, 1.0), Quaternion::IDENTITY)),
        ];
        let fused = fuse_frame(&frame, &reg);
        assert_eq!(fused.buttons[0].n_candidates, 2);
        assert!((fused.buttons[0].pose.position - truth).norm() < 1e-6);
    }

    #[test]
    fn two_candidates_weighted() {
        let reg = two_parent_registry(0.05, 0.10);
        // Marker poses chosen so the candidates land at (0,0,1) and (0.01,0,1).
        let frame = [
            obs(1, Pose::from_translation(-0.05, 0.0, 1.0)),
            obs(2, Pose::from_translation(0.01, -0.10, 1.0)),
        ];
        let fused = fuse_frame(&frame, &reg);
        let p = fused.buttons[0].pose.position;
        assert_abs_diff_eq!(p, Vec3::new(0.002, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn single_candidate_is_bit_exact() {
        let reg = two_parent_registry(0.05, 0.10);
        let m = Pose::new(Vec3::new(0.013, -0.2, 0.61), Quaternion::new(0.3, 0.2, 0.9, -0.1).unwrap());
        let fused = fuse_frame(&[obs(2, m)], &reg);
        let expected = candidate_pose(&obs(2, m), &reg.button("b").unwrap().parents[1].offset);
        assert_eq!(fused.buttons[0].pose, expected);
        assert_eq!(fused.buttons[0].n_candidates, 1);
    }

    #[test]
    fn empty_frame_and_duplicates() {
        let reg = two_parent_registry(0.05, 0.10);
        assert!(fuse_frame(&[], &reg).buttons.is_empty());
        let first = obs(1, Pose::from_translation(5.0, 5.0, 5.0));
        let last = obs(1, Pose::from_translation(0.0, 0.0, 1.0));
        let fused = fuse_frame(&[first, last], &reg);
        assert_eq!(fused.buttons[0].n_candidates, 1);
        assert_abs_diff_eq!(fused.buttons[0].pose.position, Vec3::new(0.05, 0.0, 1.0));
    }
}
