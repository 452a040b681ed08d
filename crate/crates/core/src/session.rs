//! Session recording and replay.
//!
//! A session file is line-delimited JSON, one frame per line:
//!
//! ```text
//! {"t":20,"markers":[{"id":0,"p":[0.1,0.0,0.5],"q":[1.0,0.0,0.0,0.0]}],"gaze":{"u":960.0,"v":540.0,"valid":true}}
//! ```
//!
//! Times are integer milliseconds and strictly increase from line to line.
//! Floats are written in shortest round-trip form, so replaying a recording
//! feeds the pipeline bit-identical inputs.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::fusion::MarkerObservation;
use crate::input::{InputError, InputEvent};
use crate::registry::Registry;
use crate::runtime::{Pipeline, PipelineConfig};
use crate::zone::GazeSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: u64,
    pub markers: Vec<MarkerObservation>,
    pub gaze: GazeSample,
}

impl FrameRecord {
    /// Copies the frame time onto the nested observations.
    fn stamp(mut self) -> Self {
        for m in &mut self.markers {
            m.t = self.t;
        }
        self.gaze.t = self.t;
        self
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("frame records always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str::<FrameRecord>(line).map(Self::stamp)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: time {t} ms does not follow {prev} ms")]
    NonMonotonic { line: usize, t: u64, prev: u64 },
    #[error("line {line}: {source}")]
    Io {
        line: usize,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Input(#[from] InputError),
}

impl SessionError {
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Parse { line, .. } | Self::NonMonotonic { line, .. } | Self::Io { line, .. } => Some(*line),
            Self::Input(_) => None,
        }
    }
}

/// Writes frames, one JSON object per line.
pub struct Recorder<W: Write> {
    sink: W,
    last_t: Option<u64>,
}

impl<W: Write> Recorder<W> {
    pub fn new(sink: W) -> Self {
        Self { sink, last_t: None }
    }

    pub fn write(&mut self, frame: &FrameRecord) -> io::Result<()> {
        if self.last_t.is_some_and(|prev| frame.t <= prev) {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame times must strictly increase"));
        }
        self.last_t = Some(frame.t);
        writeln!(self.sink, "{}", frame.to_line())
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

pub fn record<'a, W: Write>(sink: W, frames: impl IntoIterator<Item = &'a FrameRecord>) -> io::Result<W> {
    let mut rec = Recorder::new(sink);
    for f in frames {
        rec.write(f)?;
    }
    Ok(rec.into_inner())
}

/// Pull-based reader over a recorded session. Blank lines are skipped.
pub struct Replay<R: BufRead> {
    lines: io::Lines<R>,
    line: usize,
    last_t: Option<u64>,
}

impl<R: BufRead> Replay<R> {
    pub fn new(source: R) -> Self {
        Self {
            lines: source.lines(),
            line: 0,
            last_t: None,
        }
    }
}

impl<R: BufRead> Iterator for Replay<R> {
    type Item = Result<FrameRecord, SessionError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = self.lines.next()?;
            self.line += 1;
            let line = self.line;
            let text = match text {
                Ok(t) => t,
                Err(source) => return Some(Err(SessionError::Io { line, source })),
            };
            if text.trim().is_empty() {
                continue;
            }
            let frame = match FrameRecord::from_line(&text) {
                Ok(f) => f,
                Err(source) => return Some(Err(SessionError::Parse { line, source })),
            };
            if let Some(prev) = self.last_t {
                if frame.t <= prev {
                    return Some(Err(SessionError::NonMonotonic { line, t: frame.t, prev }));
                }
            }
            self.last_t = Some(frame.t);
            return Some(Ok(frame));
        }
    }
}

pub fn replay<R: BufRead>(source: R) -> Replay<R> {
    Replay::new(source)
}

/// One JSON line per input event.
pub fn event_line(e: &InputEvent) -> String {
    serde_json::to_string(e).expect("events always serialize")
}

pub fn write_event_log<'a, W: Write>(sink: &mut W, events: impl IntoIterator<Item = &'a InputEvent>) -> io::Result<()> {
    for e in events {
        writeln!(sink, "{}", event_line(e))?;
    }
    Ok(())
}

/// Runs recorded frames through a fresh pipeline and collects its events.
pub fn replay_events<I>(frames: I, registry: &Registry, config: &PipelineConfig) -> Result<Vec<InputEvent>, SessionError>
where
    I: IntoIterator<Item = Result<FrameRecord, SessionError>>,
{
    let mut pipeline = Pipeline::new(registry.clone(), config, 0);
    let mut events = Vec::new();
    for frame in frames {
        events.extend(pipeline.process(&frame?)?.events);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, Quaternion, Vec3};

    fn frame(t: u64) -> FrameRecord {
        FrameRecord {
            t,
            markers: vec![MarkerObservation {
                marker_id: 3,
                pose: Pose::new(Vec3::new(0.1, -0.2, 0.55), Quaternion::new(0.9, 0.1, -0.3, 0.2).unwrap()),
                t,
            }],
            gaze: GazeSample::at(960.25, 540.0, t),
        }
    }

    #[test]
    fn wire_shape() {
        let f = FrameRecord {
            t: 20,
            markers: vec![MarkerObservation {
                marker_id: 0,
                pose: Pose::from_translation(0.1, 0.0, 0.5),
                t: 20,
            }],
            gaze: GazeSample::at(960.0, 540.0, 20),
        };
        assert_eq!(
            f.to_line(),
            r#"{"t":20,"markers":[{"id":0,"p":[0.1,0.0,0.5],"q":[1.0,0.0,0.0,0.0]}],"gaze":{"u":960.0,"v":540.0,"valid":true}}"#
        );
    }

    #[test]
    fn json_round_trip_is_identity() {
        let f = frame(40);
        assert_eq!(FrameRecord::from_line(&f.to_line()).unwrap(), f);
    }

    #[test]
    fn record_then_replay() {
        let frames: Vec<_> = (1..=50).map(|i| frame(i * 20)).collect();
        let bytes = record(Vec::new(), &frames).unwrap();
        let back: Vec<_> = replay(&bytes[..]).collect::<Result<_, _>>().unwrap();
        assert_eq!(back, frames);
        // Re-recording reproduces the file byte for byte.
        assert_eq!(record(Vec::new(), &back).unwrap(), bytes);
    }

    #[test]
    fn corrupt_line_is_named() {
        let frames: Vec<_> = (1..=20).map(|i| frame(i * 20)).collect();
        let text = String::from_utf8(record(Vec::new(), &frames).unwrap()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[16] = "{\"t\":340,\"markers\":[";
        let broken = lines.join("\n");
        let err = replay(broken.as_bytes()).find_map(Result::err).unwrap();
        assert_eq!(err.line(), Some(17));
        assert!(err.to_string().starts_with("line 17:"));
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let text = format!("{}\n{}\n", frame(40).to_line(), frame(40).to_line());
        let err = replay(text.as_bytes()).find_map(Result::err).unwrap();
        assert!(matches!(err, SessionError::NonMonotonic { line: 2, .. }));
        assert!(Recorder::new(Vec::new()).write(&frame(0)).is_ok());
        let mut rec = Recorder::new(Vec::new());
        rec.write(&frame(20)).unwrap();
        assert!(rec.write(&frame(20)).is_err());
    }

    #[test]
    fn empty_input() {
        assert_eq!(replay(&b""[..]).count(), 0);
        assert_eq!(replay(&b"\n\n"[..]).count(), 0);
    }
}
