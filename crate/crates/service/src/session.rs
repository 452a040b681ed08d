//! The session state machine behind the server, free of any I/O.

use dgui::bench::{ScoreEvent, Scorer};
use dgui::geometry::Vec2;
use dgui::input::Activation;
use dgui::runtime::{ClosedLoop, GazeInput, RuntimeError, SimEvent, FRAME_MS};
use dgui::servo::ServoError;
use dgui::sim::{SceneConfig, World};
use dgui::zone::{GazeSample, ProjectedZone};

use crate::protocol::{ControlCmd, EventBody, GazeWire, ServerMessage, StateFrame};

/// Gaze older than this is treated as invalid.
pub const GAZE_STALE_MS: u64 = 200;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServeOptions {
    /// Latch the e-stop at this sim time (ms), as an external stop would.
    pub inject_estop_at_ms: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Session {
    lp: ClosedLoop,
    scorer: Scorer,
    picked: Vec<Option<u64>>,
    scored: Vec<bool>,
    gaze: Option<GazeSample>,
    last_gaze: GazeSample,
    zones: Vec<ProjectedZone>,
    activations: Vec<Activation>,
    paused: bool,
    injected: bool,
    counter: u64,
    options: ServeOptions,
}

impl Session {
    pub fn new(scene: SceneConfig, options: ServeOptions) -> Result<Self, ServoError> {
        let lp = ClosedLoop::new(World::new(scene))?;
        let file = &lp.world.scene().file;
        let scorer = Scorer::new(file.stencil.clone(), file.cubes.edge_m);
        let n = file.cubes.positions.len();
        let activations = lp.pipeline.snapshot();
        Ok(Self {
            lp,
            scorer,
            picked: vec![None; n],
            scored: vec![false; n],
            gaze: None,
            last_gaze: GazeSample::invalid(0),
            zones: Vec::new(),
            activations,
            paused: false,
            injected: false,
            counter: 0,
            options,
        })
    }

    pub fn t(&self) -> u64 {
        self.lp.state.t
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn closed_loop(&self) -> &ClosedLoop {
        &self.lp
    }

    /// Latest sample from the gaze owner, stamped with the current sim time.
    pub fn set_gaze(&mut self, g: GazeWire) {
        self.gaze = Some(GazeSample {
            u: g.u,
            v: g.v,
            valid: g.valid,
            t: self.lp.state.t,
        });
    }

    fn gaze_input(&self) -> GazeInput {
        let t_next = self.lp.state.t + FRAME_MS;
        match self.gaze {
            Some(g) if g.valid && t_next - g.t <= GAZE_STALE_MS => GazeInput::Sample(g),
            _ => GazeInput::None,
        }
    }

    pub fn control(&mut self, cmd: ControlCmd) -> Vec<ServerMessage> {
        let t = self.lp.state.t;
        match cmd {
            ControlCmd::Pause => self.paused = true,
            ControlCmd::Resume => self.paused = false,
            ControlCmd::Recalibrate => self.lp.recalibrate(),
            ControlCmd::EstopClear => {
                let was = self.lp.controller.safety.estop;
                self.lp.clear_estop();
                if was {
                    return vec![ServerMessage::Event(EventBody::Estop { latched: false, t })];
                }
            }
            ControlCmd::Reset => {
                self.lp.reset();
                let file = &self.lp.world.scene().file;
                self.scorer = Scorer::new(file.stencil.clone(), file.cubes.edge_m);
                self.picked.fill(None);
                self.scored.fill(false);
                self.gaze = None;
                self.zones.clear();
                self.activations = self.lp.pipeline.snapshot();
                self.injected = false;
            }
        }
        Vec::new()
    }

    /// Advances one frame unless paused; returns the frame's events followed
    /// by one state message.
    pub fn tick(&mut self) -> Result<Vec<ServerMessage>, RuntimeError> {
        let mut out = Vec::new();
        if !self.paused {
            if let Some(at) = self.options.inject_estop_at_ms {
                if !self.injected && self.lp.state.t >= at {
                    self.injected = true;
                    if !self.lp.controller.safety.estop {
                        self.lp.inject_estop();
                        out.push(ServerMessage::Event(EventBody::Estop {
                            latched: true,
                            t: self.lp.state.t,
                        }));
                    }
                }
            }
            let step = self.lp.frame(self.gaze_input())?;
            for e in &step.output.events {
                out.push(ServerMessage::Event(EventBody::Input(e.clone())));
            }
            for ev in &step.sim_events {
                match *ev {
                    SimEvent::Picked { cube, t } => {
                        if !self.scored[cube] {
                            self.picked[cube] = Some(t);
                        }
                    }
                    SimEvent::Released { cube, t } => {
                        if !self.scored[cube] {
                            let c = self.lp.state.cubes[cube].position;
                            let s = self.scorer.score(&Vec2::new(c.x, c.y));
                            self.lp.state.score += s.points;
                            self.scored[cube] = true;
                            out.push(ServerMessage::Event(EventBody::Score(ScoreEvent {
                                block: cube,
                                points: s.points,
                                square: s.square,
                                t_pick: self.picked[cube].unwrap_or(t),
                                t_drop: t,
                            })));
                        }
                    }
                    SimEvent::EstopLatched { t } => {
                        out.push(ServerMessage::Event(EventBody::Estop { latched: true, t }));
                    }
                }
            }
            self.last_gaze = step.record.gaze;
            self.zones = step.output.zones;
            self.activations = step.output.snapshot;
        }
        out.push(ServerMessage::State(self.state_frame()));
        Ok(out)
    }

    fn state_frame(&mut self) -> StateFrame {
        self.counter += 1;
        let s = &self.lp.state;
        let p = s.ee_pose.position;
        let v = self.lp.last_command().v;
        StateFrame {
            frame: self.counter,
            t: s.t,
            paused: self.paused,
            ee: [p.x, p.y, p.z],
            gripper: s.gripper,
            held: s.held.map(|g| g.cube),
            cubes: s.cubes.iter().map(|c| [c.position.x, c.position.y, c.position.z]).collect(),
            contact_force: s.contact_force,
            estop: self.lp.controller.safety.estop,
            score: s.score,
            velocity: if self.paused { [0.0; 3] } else { [v.x, v.y, v.z] },
            gaze: GazeWire {
                u: self.last_gaze.u,
                v: self.last_gaze.v,
                valid: self.last_gaze.valid,
            },
            zones: self.zones.clone(),
            activations: self.activations.clone(),
        }
    }
}
