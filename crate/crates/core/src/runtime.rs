//! Per-frame pipeline and the closed simulation loop.
//!
//! [`Pipeline`] is the input side: markers and gaze in, events and an
//! activation snapshot out. [`ClosedLoop`] adds the servo controller and the
//! simulated world, stepping both at fixed rates: one 20 ms input frame is
//! preceded by four 5 ms servo ticks that hold the previous frame's snapshot.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::fusion::{FusionOutput, Fuser, MarkerObservation, DEFAULT_EXPONENT};
use crate::geometry::{CameraIntrinsics, Vec2};
use crate::input::{Activation, InputError, InputEvent, InputPipeline, ProfileSet};
use crate::registry::{Registry, ZoneCorners};
use crate::servo::{gripper_command, Bindings, GripperCommand, ServoController, ServoError, VelocityCommand};
use crate::session::FrameRecord;
use crate::sim::{NoiseStreams, SimState, World};
use crate::zone::{gaze_hit, project_zone, GazeSample, ProjectedZone};

/// Input frame period (50 Hz).
pub const FRAME_MS: u64 = 20;

fn default_exponent() -> f64 {
    DEFAULT_EXPONENT
}

/// Camera, activation profiles and fusion exponent; stored as
/// `pipeline.json` next to the registry tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub camera: CameraIntrinsics,
    #[serde(default)]
    pub profiles: ProfileSet,
    #[serde(default = "default_exponent")]
    pub fusion_exponent: f64,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.camera.validate().map_err(|e| e.to_string())?;
        self.profiles.discrete.validate().map_err(|e| e.to_string())?;
        self.profiles.continuous.validate().map_err(|e| e.to_string())?;
        if !(self.fusion_exponent >= 0.0) {
            return Err("fusion exponent must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub t: u64,
    /// Zones of every button that could be fused this frame.
    pub zones: Vec<ProjectedZone>,
    pub hits: BTreeSet<String>,
    pub events: Vec<InputEvent>,
    pub snapshot: Vec<Activation>,
}

/// Fusion, projection, hit testing and activation for one registry.
#[derive(Debug, Clone)]
pub struct Pipeline {
    registry: Registry,
    corners: BTreeMap<String, ZoneCorners>,
    camera: CameraIntrinsics,
    fuser: Fuser,
    input: InputPipeline,
}

impl Pipeline {
    pub fn new(registry: Registry, config: &PipelineConfig, t0: u64) -> Self {
        let corners = registry.buttons().map(|b| (b.button_id.clone(), b.corners)).collect();
        let input = InputPipeline::from_registry(&registry, &config.profiles, t0);
        Self {
            registry,
            corners,
            camera: config.camera,
            fuser: Fuser::new(config.fusion_exponent),
            input,
        }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn camera(&self) -> &CameraIntrinsics {
        &self.camera
    }

    pub fn input(&self) -> &InputPipeline {
        &self.input
    }

    pub fn fuse(&self, markers: &[MarkerObservation]) -> FusionOutput {
        self.fuser.fuse_frame(markers, &self.registry)
    }

    pub fn project(&self, fused: &FusionOutput) -> Vec<ProjectedZone> {
        fused
            .buttons
            .iter()
            .map(|b| project_zone(b, &self.corners[&b.button_id], &self.camera))
            .collect()
    }

    /// Every zone containing the gaze point is hit; overlapping zones all
    /// accumulate.
    pub fn hit_test(zones: &[ProjectedZone], gaze: &GazeSample) -> BTreeSet<String> {
        zones
            .iter()
            .filter(|z| gaze_hit(z, gaze))
            .map(|z| z.button_id.clone())
            .collect()
    }

    pub fn step(&mut self, hits: &BTreeSet<String>, t: u64) -> Result<Vec<InputEvent>, InputError> {
        self.input.step(hits, t)
    }

    pub fn snapshot(&self) -> Vec<Activation> {
        self.input.snapshot()
    }

    pub fn process(&mut self, frame: &FrameRecord) -> Result<FrameOutput, InputError> {
        let fused = self.fuse(&frame.markers);
        let zones = self.project(&fused);
        let hits = Self::hit_test(&zones, &frame.gaze);
        let events = self.step(&hits, frame.t)?;
        Ok(FrameOutput {
            t: frame.t,
            zones,
            hits,
            events,
            snapshot: self.snapshot(),
        })
    }

    pub fn reset(&mut self, t: u64) {
        self.input.reset(t);
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Servo(#[from] ServoError),
}

/// Where the gaze goes this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GazeInput {
    /// Intended fixation point; the world's gaze channel adds noise and drift.
    Target(Vec2),
    /// A sample used as is (a live client or a replayed stream).
    Sample(GazeSample),
    /// No gaze (tracker lost, eyes closed).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEvent {
    Picked { cube: usize, t: u64 },
    Released { cube: usize, t: u64 },
    EstopLatched { t: u64 },
}

/// Wall-clock time spent in each pipeline stage during one frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimes {
    pub fuse: Duration,
    pub project_hit: Duration,
    pub step: Duration,
    /// Controller work for the frame's servo ticks, simulation excluded.
    pub servo: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.fuse + self.project_hit + self.step + self.servo
    }
}

#[derive(Debug, Clone)]
pub struct FrameStep {
    pub record: FrameRecord,
    pub output: FrameOutput,
    /// Command issued on the last servo tick of this frame.
    pub command: VelocityCommand,
    pub sim_events: Vec<SimEvent>,
    pub times: StageTimes,
}

/// World, controller and pipeline stepped together.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub world: World,
    pub state: SimState,
    pub pipeline: Pipeline,
    pub controller: ServoController,
    streams: NoiseStreams,
    snapshot: Vec<Activation>,
    pending_gripper: GripperCommand,
    last_command: VelocityCommand,
    pub frames: u64,
    pub estop_count: u32,
}

impl ClosedLoop {
    pub fn new(world: World) -> Result<Self, ServoError> {
        let scene = world.scene();
        let controller = ServoController::new(scene.file.controller, Bindings::from_registry(&scene.registry))?;
        let pipeline = Pipeline::new(scene.registry.clone(), &scene.pipeline, 0);
        let streams = NoiseStreams::new(scene.file.seed);
        let state = world.initial_state();
        Ok(Self {
            world,
            state,
            pipeline,
            controller,
            streams,
            snapshot: Vec::new(),
            pending_gripper: GripperCommand::None,
            last_command: VelocityCommand::STOP,
            frames: 0,
            estop_count: 0,
        })
    }

    pub fn snapshot(&self) -> &[Activation] {
        &self.snapshot
    }

    pub fn last_command(&self) -> &VelocityCommand {
        &self.last_command
    }

    /// Advances one input frame: four servo ticks, then observation and
    /// pipeline at the new time.
    pub fn frame(&mut self, gaze: GazeInput) -> Result<FrameStep, RuntimeError> {
        let period = self.controller.config.servo_period_ms;
        let ticks = FRAME_MS / period;
        let mut sim_events = Vec::new();
        let mut times = StageTimes::default();
        let mut gripper = std::mem::take(&mut self.pending_gripper);
        for _ in 0..ticks {
            let was_latched = self.controller.safety.estop;
            let start = Instant::now();
            let cmd = self.controller.tick(
                &self.snapshot,
                gripper,
                &self.state.ee_pose.position,
                self.state.contact_force,
            )?;
            times.servo += start.elapsed();
            gripper = GripperCommand::None;
            let held_before = self.state.held.map(|g| g.cube);
            self.state = self.world.sim_step(&self.state, &cmd, period);
            self.state.estop = cmd.estop;
            if cmd.estop && !was_latched {
                self.estop_count += 1;
                sim_events.push(SimEvent::EstopLatched { t: self.state.t });
            }
            let held_after = self.state.held.map(|g| g.cube);
            if held_before != held_after {
                if let Some(cube) = held_before {
                    sim_events.push(SimEvent::Released { cube, t: self.state.t });
                }
                if let Some(cube) = held_after {
                    sim_events.push(SimEvent::Picked { cube, t: self.state.t });
                }
            }
            self.last_command = cmd;
        }
        let markers = self.world.observe_markers(&self.state, &mut self.streams);
        let gaze = match gaze {
            GazeInput::Target(px) => self.world.synth_gaze(px, &mut self.state, &mut self.streams),
            GazeInput::Sample(s) => GazeSample { t: self.state.t, ..s },
            GazeInput::None => GazeSample::invalid(self.state.t),
        };
        let record = FrameRecord {
            t: self.state.t,
            markers,
            gaze,
        };
        let start = Instant::now();
        let fused = self.pipeline.fuse(&record.markers);
        let fused_at = Instant::now();
        let zones = self.pipeline.project(&fused);
        let hits = Pipeline::hit_test(&zones, &record.gaze);
        let hit_at = Instant::now();
        let events = self.pipeline.step(&hits, record.t)?;
        let snapshot = self.pipeline.snapshot();
        let step_at = Instant::now();
        times.fuse = fused_at - start;
        times.project_hit = hit_at - fused_at;
        times.step = step_at - hit_at;
        let output = FrameOutput {
            t: record.t,
            zones,
            hits,
            events,
            snapshot,
        };
        self.snapshot.clone_from(&output.snapshot);
        self.pending_gripper = gripper_command(&output.events, &self.controller.bindings);
        self.frames += 1;
        Ok(FrameStep {
            record,
            output,
            command: self.last_command,
            sim_events,
            times,
        })
    }

    /// Latches the e-stop as if the force limit had been exceeded.
    pub fn inject_estop(&mut self) {
        if !self.controller.safety.estop {
            self.controller.safety.estop = true;
            self.state.estop = true;
            self.estop_count += 1;
        }
    }

    pub fn clear_estop(&mut self) {
        self.controller.clear_estop();
        self.state.estop = false;
    }

    pub fn recalibrate(&mut self) {
        self.world.recalibrate(&mut self.state);
    }

    /// Back to the initial scene with fresh noise streams.
    pub fn reset(&mut self) {
        self.state = self.world.initial_state();
        self.streams = NoiseStreams::new(self.world.scene().file.seed);
        self.pipeline.reset(0);
        self.controller.clear_estop();
        self.snapshot.clear();
        self.pending_gripper = GripperCommand::None;
        self.last_command = VelocityCommand::STOP;
        self.frames = 0;
        self.estop_count = 0;
    }
}
