use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::fusion::MarkerObservation;
use crate::geometry::{compose, project_point, Pose, Quaternion, Vec2, Vec3};
use crate::servo::{GripperCommand, VelocityCommand};
use crate::zone::{project_zone, GazeSample, ProjectedZone};
use crate::fusion::FusedButtonPose;

use super::scene::{Attachment, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GripperState {
    #[default]
    Open,
    Closed,
}

/// A held cube and its pose relative to the end-effector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub cube: usize,
    pub offset: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: u64,
    pub ee_pose: Pose,
    pub gripper: GripperState,
    pub held: Option<Grasp>,
    pub cubes: Vec<Pose>,
    /// Newtons, never negative.
    pub contact_force: f64,
    pub estop: bool,
    pub score: i32,
    pub recalibrations: u32,
    /// Accumulated gaze drift (px) and the time it was last advanced.
    pub gaze_bias: [f64; 2],
    pub gaze_t: u64,
}

/// Independent random streams, one per noise channel, so that switching one
/// channel on or off never shifts the draws of another.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    markers: ChaCha8Rng,
    dropout: ChaCha8Rng,
    gaze: ChaCha8Rng,
    drift: ChaCha8Rng,
}

impl NoiseStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |n: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n);
            rng
        };
        Self {
            markers: stream(1),
            dropout: stream(2),
            gaze: stream(3),
            drift: stream(4),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Kinematic world built from a scene.
#[derive(Debug, Clone)]
pub struct World {
    scene: SceneConfig,
}

impl World {
    pub fn new(scene: SceneConfig) -> Self {
        Self { scene }
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    pub fn cube_half_edge(&self) -> f64 {
        self.scene.file.cubes.edge_m / 2.0
    }

    /// Resting height of a cube center on the table.
    pub fn cube_rest_z(&self) -> f64 {
        self.scene.file.table_height_m + self.cube_half_edge()
    }

    pub fn initial_state(&self) -> SimState {
        let z = self.cube_rest_z();
        SimState {
            t: 0,
            ee_pose: Pose::new(self.scene.file.end_effector.start, Quaternion::IDENTITY),
            gripper: GripperState::Open,
            held: None,
            cubes: self
                .scene
                .file
                .cubes
                .positions
                .iter()
                .map(|p| Pose::from_translation(p[0], p[1], z))
                .collect(),
            contact_force: 0.0,
            estop: false,
            score: 0,
            recalibrations: 0,
            gaze_bias: [0.0, 0.0],
            gaze_t: 0,
        }
    }

    pub fn contact_force(&self, ee_z: f64) -> f64 {
        let ee = &self.scene.file.end_effector;
        ee.stiffness_n_per_m * (self.scene.file.table_height_m + ee.contact_margin_m - ee_z).max(0.0)
    }

    /// Nearest cube inside the grasp cylinder around the jaw point.
    pub fn graspable_cube(&self, state: &SimState) -> Option<usize> {
        let jaw = state.ee_pose.position;
        let radius = self.scene.file.end_effector.grasp_radius_m;
        let reach = self.scene.file.cubes.edge_m;
        state
            .cubes
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                let d = c.position - jaw;
                d.xy().norm() <= radius && d.z.abs() <= reach
            })
            .min_by(|(_, a), (_, b)| {
                let da = (a.position - jaw).norm();
                let db = (b.position - jaw).norm();
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
    }

    /// One servo-period integration step of `dt_ms`.
    pub fn sim_step(&self, state: &SimState, cmd: &VelocityCommand, dt_ms: u64) -> SimState {
        let mut next = state.clone();
        next.t = state.t + dt_ms;
        match cmd.gripper {
            GripperCommand::Close => {
                next.gripper = GripperState::Closed;
                if next.held.is_none() {
                    next.held = self.graspable_cube(&next).map(|cube| Grasp {
                        cube,
                        offset: compose(&next.ee_pose.inverse(), &next.cubes[cube]),
                    });
                }
            }
            GripperCommand::Open => {
                next.gripper = GripperState::Open;
                if let Some(g) = next.held.take() {
                    next.cubes[g.cube].position.z = self.cube_rest_z();
                }
            }
            GripperCommand::None => {}
        }
        let dt = dt_ms as f64 / 1000.0;
        next.ee_pose.position += cmd.v * dt;
        if let Some(g) = &next.held {
            next.cubes[g.cube] = compose(&next.ee_pose, &g.offset);
        }
        next.contact_force = self.contact_force(next.ee_pose.position.z);
        next
    }

    pub fn camera_pose(&self, t: u64) -> Pose {
        self.scene.file.head.camera_pose(t)
    }

    /// World pose of every marker, in scene order.
    pub fn marker_world_poses(&self, state: &SimState) -> Vec<(u32, Pose)> {
        self.scene
            .file
            .markers
            .iter()
            .map(|m| {
                let mount = self.scene.mount(&m.mount).expect("validated scene");
                let mount_world = match mount.attach {
                    Attachment::Ee => compose(&state.ee_pose, &mount.pose),
                    Attachment::World => mount.pose,
                };
                (m.id, compose(&mount_world, &m.local_pose()))
            })
            .collect()
    }

    /// Noise-free camera-frame marker poses, all markers regardless of
    /// visibility.
    pub fn true_marker_poses(&self, state: &SimState) -> Vec<(u32, Pose)> {
        let world_to_camera = self.camera_pose(state.t).inverse();
        self.marker_world_poses(state)
            .into_iter()
            .map(|(id, p)| (id, compose(&world_to_camera, &p)))
            .collect()
    }

    /// Whether a camera-frame marker pose passes the view-cone and image
    /// tests.
    pub fn marker_visible(&self, pose: &Pose) -> bool {
        let p = pose.position;
        let Ok(px) = project_point(&self.scene.pipeline.camera, &p) else {
            return false;
        };
        if !self.scene.pipeline.camera.contains(&px) {
            return false;
        }
        let normal = pose.rotation.rotate(&Vec3::z());
        let cos = normal.dot(&(-p)) / p.norm();
        cos.clamp(-1.0, 1.0).acos() <= self.scene.file.noise.visibility_cone_rad
    }

    pub fn observe_markers(&self, state: &SimState, streams: &mut NoiseStreams) -> Vec<MarkerObservation> {
        let noise = &self.scene.file.noise;
        let mut out = Vec::new();
        for (id, pose) in self.true_marker_poses(state) {
            // Draw every channel for every marker so the streams stay aligned
            // whatever the visibility outcome.
            let dropped = streams.dropout.random::<f64>() < noise.marker_dropout;
            let dp = Vec3::from_fn(|_, _| normal(&mut streams.markers));
            let dr = Vec3::from_fn(|_, _| normal(&mut streams.markers));
            if dropped || !self.marker_visible(&pose) {
                continue;
            }
            let mut observed = pose;
            if noise.marker_translation_sigma_m > 0.0 {
                observed.position += dp * noise.marker_translation_sigma_m;
            }
            if noise.marker_rotation_sigma_rad > 0.0 {
                let q = Quaternion::from_rotation_vector(dr * noise.marker_rotation_sigma_rad);
                observed.rotation = q.mul(&observed.rotation);
            }
            out.push(MarkerObservation {
                marker_id: id,
                pose: observed,
                t: state.t,
            });
        }
        out
    }

    /// Camera-frame button poses from the noise-free marker poses.
    pub fn true_button_poses(&self, state: &SimState) -> Vec<FusedButtonPose> {
        let markers = self.true_marker_poses(state);
        self.scene
            .registry
            .buttons()
            .map(|b| {
                let parent = &b.parents[0];
                let marker = markers
                    .iter()
                    .find(|(id, _)| *id == parent.marker_id)
                    .map(|(_, p)| *p)
                    .expect("validated scene places every parent marker");
                FusedButtonPose {
                    button_id: b.button_id.clone(),
                    pose: compose(&marker, &parent.offset),
                    n_candidates: 1,
                }
            })
            .collect()
    }

    pub fn true_zones(&self, state: &SimState) -> Vec<ProjectedZone> {
        self.true_button_poses(state)
            .iter()
            .map(|b| {
                let corners = &self.scene.registry.button(&b.button_id).expect("registry button").corners;
                project_zone(b, corners, &self.scene.pipeline.camera)
            })
            .collect()
    }

    /// Gaze sample for an intended fixation point. Advances the drift random
    /// walk to `state.t`. Blinks and off-image samples are invalid.
    pub fn synth_gaze(&self, target: Vec2, state: &mut SimState, streams: &mut NoiseStreams) -> GazeSample {
        let noise = &self.scene.file.noise;
        let dt_s = state.t.saturating_sub(state.gaze_t) as f64 / 1000.0;
        state.gaze_t = state.t;
        let step = noise.gaze_drift_px_per_sqrt_s * dt_s.sqrt();
        for b in state.gaze_bias.iter_mut() {
            let n = normal(&mut streams.drift);
            if step > 0.0 {
                *b += n * step;
            }
        }
        let (nu, nv) = (normal(&mut streams.gaze), normal(&mut streams.gaze));
        if noise.in_blink(state.t) {
            return GazeSample::invalid(state.t);
        }
        let mut p = target + Vec2::new(state.gaze_bias[0], state.gaze_bias[1]);
        if noise.gaze_sigma_px > 0.0 {
            p += Vec2::new(nu, nv) * noise.gaze_sigma_px;
        }
        let sample = GazeSample::at(p.x, p.y, state.t);
        if self.scene.pipeline.camera.contains(&p) {
            sample
        } else {
            GazeSample { valid: false, ..sample }
        }
    }

    /// Zeroes the gaze drift and counts the recalibration.
    pub fn recalibrate(&self, state: &mut SimState) {
        state.gaze_bias = [0.0, 0.0];
        state.recalibrations += 1;
    }
}
