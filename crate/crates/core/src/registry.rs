//! Static interface description: markers, buttons, marker-to-button offsets
//! and interaction zones.
//!
//! The layout is read from three CSV tables before the session starts:
//!
//! ```text
//! markers.csv  marker_id,edge_length_m
//! buttons.csv  button_id,kind,action,face_hx_m,face_hy_m,zone_hx_m,zone_hy_m
//! offsets.csv  button_id,marker_id,px_m,py_m,pz_m,qw,qx,qy,qz
//! ```
//!
//! All lengths are meters. An offset row gives the pose of the button in the
//! marker frame; a button may have several parent markers, one row each.
//!
//! The `action` column is one of `axis:x+`, `axis:x-` (likewise `y`, `z`),
//! `gripper:open`, `gripper:close` or `event:<name>`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Quaternion, Vec2, Vec3};

pub const MARKERS_HEADER: &str = "marker_id,edge_length_m";
pub const BUTTONS_HEADER: &str = "button_id,kind,action,face_hx_m,face_hy_m,zone_hx_m,zone_hy_m";
pub const OFFSETS_HEADER: &str = "button_id,marker_id,px_m,py_m,pz_m,qw,qx,qy,qz";

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("{table}: expected header `{expected}`, found `{found}`")]
    Header {
        table: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error("{table} line {line}: {message}")]
    Malformed {
        table: &'static str,
        line: u64,
        message: String,
    },
    #[error("offsets line {line}: button `{button}` references unknown marker {marker}")]
    UnknownMarker { line: u64, button: String, marker: u32 },
    #[error("offsets line {line}: unknown button `{button}`")]
    UnknownButtonRef { line: u64, button: String },
    #[error("duplicate marker id {0}")]
    DuplicateMarker(u32),
    #[error("duplicate button id `{0}`")]
    DuplicateButton(String),
    #[error("duplicate offset for button `{button}` and marker {marker}")]
    DuplicateOffset { button: String, marker: u32 },
    #[error("`{first}` and `{second}` are both bound to {binding}")]
    DuplicateBinding {
        first: String,
        second: String,
        binding: ActionBinding,
    },
    #[error("button `{0}` has no parent marker")]
    NoParents(String),
    #[error("unknown button `{0}`")]
    UnknownButton(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GripperAction {
    Open,
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionBinding {
    Axis { axis: Axis, direction: Direction },
    Gripper(GripperAction),
    Custom(String),
}

impl fmt::Display for ActionBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionBinding::Axis { axis, direction } => {
                let a = match axis {
                    Axis::X => 'x',
                    Axis::Y => 'y',
                    Axis::Z => 'z',
                };
                let d = match direction {
                    Direction::Positive => '+',
                    Direction::Negative => '-',
                };
                write!(f, "axis:{a}{d}")
            }
            ActionBinding::Gripper(GripperAction::Open) => f.write_str("gripper:open"),
            ActionBinding::Gripper(GripperAction::Close) => f.write_str("gripper:close"),
            ActionBinding::Custom(name) => write!(f, "event:{name}"),
        }
    }
}

impl FromStr for ActionBinding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| format!("action `{s}` has no `:`"))?;
        match kind {
            "axis" => {
                let mut chars = arg.chars();
                let axis = match chars.next() {
                    Some('x') => Axis::X,
                    Some('y') => Axis::Y,
                    Some('z') => Axis::Z,
                    _ => return Err(format!("bad axis in `{s}`")),
                };
                let direction = match (chars.next(), chars.next()) {
                    (Some('+'), None) => Direction::Positive,
                    (Some('-'), None) => Direction::Negative,
                    _ => return Err(format!("bad direction in `{s}`")),
                };
                Ok(ActionBinding::Axis { axis, direction })
            }
            "gripper" => match arg {
                "open" => Ok(ActionBinding::Gripper(GripperAction::Open)),
                "close" => Ok(ActionBinding::Gripper(GripperAction::Close)),
                _ => Err(format!("bad gripper action `{arg}`")),
            },
            "event" if !arg.is_empty() => Ok(ActionBinding::Custom(arg.to_string())),
            _ => Err(format!("unknown action `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ButtonKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerDef {
    pub marker_id: u32,
    pub edge_length: f64,
}

/// Interaction rectangle corners in the button frame, counterclockwise
/// about `+z`, all on the `z = 0` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneCorners(pub [Vec3; 4]);

impl ZoneCorners {
    pub fn rectangle(half_extent: Vec2) -> Self {
        let (hx, hy) = (half_extent.x, half_extent.y);
        ZoneCorners([
            Vec3::new(-hx, -hy, 0.0),
            Vec3::new(hx, -hy, 0.0),
            Vec3::new(hx, hy, 0.0),
            Vec3::new(-hx, hy, 0.0),
        ])
    }

    /// Signed area in the button plane (positive for counterclockwise).
    pub fn signed_area(&self) -> f64 {
        let c = &self.0;
        (0..4)
            .map(|i| {
                let (a, b) = (c[i], c[(i + 1) % 4]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentOffset {
    pub marker_id: u32,
    /// Button pose in the marker frame.
    pub offset: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButtonDef {
    pub button_id: String,
    pub action: ActionBinding,
    pub kind: ButtonKind,
    pub parents: Vec<ParentOffset>,
    pub zone_half_extent: Vec2,
    pub face_half_extent: Vec2,
    pub corners: ZoneCorners,
}

/// Validated, immutable layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    markers: BTreeMap<u32, MarkerDef>,
    buttons: BTreeMap<String, ButtonDef>,
}

#[derive(Deserialize)]
struct MarkerRow {
    marker_id: u32,
    edge_length_m: f64,
}

#[derive(Deserialize)]
struct ButtonRow {
    button_id: String,
    kind: ButtonKind,
    action: String,
    face_hx_m: f64,
    face_hy_m: f64,
    zone_hx_m: f64,
    zone_hy_m: f64,
}

#[derive(Deserialize)]
struct OffsetRow {
    button_id: String,
    marker_id: u32,
    px_m: f64,
    py_m: f64,
    pz_m: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
}

fn read_rows<T: serde::de::DeserializeOwned>(
    table: &'static str,
    expected: &'static str,
    text: &str,
) -> Result<Vec<(u64, T)>, RegistryError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| RegistryError::Malformed {
        table,
        line: 1,
        message: e.to_string(),
    })?;
    let found = headers.iter().collect::<Vec<_>>().join(",");
    if found != expected {
        return Err(RegistryError::Header {
            table,
            expected,
            found,
        });
    }
    let headers = headers.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| RegistryError::Malformed {
            table,
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: T = record.deserialize(Some(&headers)).map_err(|e| RegistryError::Malformed {
            table,
            line,
            message: e.to_string(),
        })?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn malformed(table: &'static str, line: u64, message: impl Into<String>) -> RegistryError {
    RegistryError::Malformed {
        table,
        line,
        message: message.into(),
    }
}

/// Parses and validates the three layout tables.
pub fn load_registry(markers_csv: &str, buttons_csv: &str, offsets_csv: &str) -> Result<Registry, RegistryError> {
    let mut markers = BTreeMap::new();
    for (line, row) in read_rows::<MarkerRow>("markers", MARKERS_HEADER, markers_csv)? {
        if !(row.edge_length_m > 0.0) {
            return Err(malformed("markers", line, "edge length must be positive"));
        }
        let def = MarkerDef {
            marker_id: row.marker_id,
            edge_length: row.edge_length_m,
        };
        if markers.insert(row.marker_id, def).is_some() {
            return Err(RegistryError::DuplicateMarker(row.marker_id));
        }
    }

    let mut buttons: BTreeMap<String, ButtonDef> = BTreeMap::new();
    let mut bound: BTreeMap<(Axis, Direction), String> = BTreeMap::new();
    for (line, row) in read_rows::<ButtonRow>("buttons", BUTTONS_HEADER, buttons_csv)? {
        if row.button_id.is_empty() {
            return Err(malformed("buttons", line, "empty button id"));
        }
        let action: ActionBinding = row.action.parse().map_err(|m: String| malformed("buttons", line, m))?;
        let face = Vec2::new(row.face_hx_m, row.face_hy_m);
        let zone = Vec2::new(row.zone_hx_m, row.zone_hy_m);
        if !(face.x > 0.0 && face.y > 0.0) {
            return Err(malformed("buttons", line, "face half extents must be positive"));
        }
        if !(zone.x >= face.x && zone.y >= face.y) {
            return Err(malformed("buttons", line, "interaction zone is smaller than the button face"));
        }
        if let ActionBinding::Axis { axis, direction } = action {
            if let Some(first) = bound.insert((axis, direction), row.button_id.clone()) {
                return Err(RegistryError::DuplicateBinding {
                    first,
                    second: row.button_id,
                    binding: action,
                });
            }
        }
        if buttons.contains_key(&row.button_id) {
            return Err(RegistryError::DuplicateButton(row.button_id));
        }
        buttons.insert(
            row.button_id.clone(),
            ButtonDef {
                button_id: row.button_id,
                action,
                kind: row.kind,
                parents: Vec::new(),
                zone_half_extent: zone,
                face_half_extent: face,
                corners: ZoneCorners::rectangle(zone),
            },
        );
    }

    for (line, row) in read_rows::<OffsetRow>("offsets", OFFSETS_HEADER, offsets_csv)? {
        if !markers.contains_key(&row.marker_id) {
            return Err(RegistryError::UnknownMarker {
                line,
                button: row.button_id,
                marker: row.marker_id,
            });
        }
        let rotation = Quaternion::new(row.qw, row.qx, row.qy, row.qz)
            .map_err(|e| malformed("offsets", line, e.to_string()))?;
        let Some(button) = buttons.get_mut(&row.button_id) else {
            return Err(RegistryError::UnknownButtonRef {
                line,
                button: row.button_id,
            });
        };
        if button.parents.iter().any(|p| p.marker_id == row.marker_id) {
            return Err(RegistryError::DuplicateOffset {
                button: row.button_id,
                marker: row.marker_id,
            });
        }
        button.parents.push(ParentOffset {
            marker_id: row.marker_id,
            offset: Pose::new(Vec3::new(row.px_m, row.py_m, row.pz_m), rotation),
        });
    }

    if let Some(orphan) = buttons.values().find(|b| b.parents.is_empty()) {
        return Err(RegistryError::NoParents(orphan.button_id.clone()));
    }
    Ok(Registry { markers, buttons })
}

impl Registry {
    /// The layout plus `copies` extra copies of every button, with ids
    /// suffixed `#1`, `#2`, … and custom bindings so axis bindings stay
    /// unique. Used to measure how per-frame cost grows with button count.
    pub fn replicated(&self, copies: usize) -> Registry {
        let mut out = self.clone();
        for k in 1..=copies {
            for b in self.buttons.values() {
                let id = format!("{}#{k}", b.button_id);
                out.buttons.insert(
                    id.clone(),
                    ButtonDef {
                        button_id: id.clone(),
                        action: ActionBinding::Custom(id),
                        ..b.clone()
                    },
                );
            }
        }
        out
    }

    /// Loads `markers.csv`, `buttons.csv` and `offsets.csv` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Registry, RegistryError> {
        let dir = dir.as_ref();
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|source| RegistryError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        load_registry(&read("markers.csv")?, &read("buttons.csv")?, &read("offsets.csv")?)
    }

    pub fn markers(&self) -> impl Iterator<Item = &MarkerDef> {
        self.markers.values()
    }

    pub fn marker(&self, id: u32) -> Option<&MarkerDef> {
        self.markers.get(&id)
    }

    /// Buttons in `button_id` order.
    pub fn buttons(&self) -> impl Iterator<Item = &ButtonDef> {
        self.buttons.values()
    }

    pub fn button(&self, id: &str) -> Option<&ButtonDef> {
        self.buttons.get(id)
    }

    pub fn len(&self) -> usize {
        self.buttons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buttons.is_empty()
    }

    pub fn corners_of(&self, button_id: &str) -> Result<ZoneCorners, RegistryError> {
        self.buttons
            .get(button_id)
            .map(|b| b.corners)
            .ok_or_else(|| RegistryError::UnknownButton(button_id.to_string()))
    }

    /// The button bound to an axis direction, if any.
    pub fn axis_button(&self, axis: Axis, direction: Direction) -> Option<&ButtonDef> {
        self.buttons
            .values()
            .find(|b| b.action == ActionBinding::Axis { axis, direction })
    }

    pub fn gripper_button(&self, action: GripperAction) -> Option<&ButtonDef> {
        self.buttons.values().find(|b| b.action == ActionBinding::Gripper(action))
    }

    /// Marker ids referenced by at least one button.
    pub fn referenced_markers(&self) -> BTreeSet<u32> {
        self.buttons
            .values()
            .flat_map(|b| b.parents.iter().map(|p| p.marker_id))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MARKERS: &str = "marker_id,edge_length_m\n0,0.04\n1,0.04\n";
    const BUTTONS: &str = "button_id,kind,action,face_hx_m,face_hy_m,zone_hx_m,zone_hy_m\n\
                           left,continuous,axis:x-,0.018,0.018,0.028,0.028\n\
                           close,discrete,gripper:close,0.01,0.02,0.01,0.02\n";
    const OFFSETS: &str = "button_id,marker_id,px_m,py_m,pz_m,qw,qx,qy,qz\n\
                           left,0,0.05,0,0,1,0,0,0\n\
                           left,1,-0.05,0,0,1,0,0,0\n\
                           close,1,0,0.06,0,1,0,0,0\n";

    #[test]
    fn loads_and_computes_corners() {
        let reg = load_registry(MARKERS, BUTTONS, OFFSETS).unwrap();
        assert_eq!(reg.len(), 2);
        let c = reg.corners_of("left").unwrap();
        for corner in c.0 {
            assert_eq!(corner.x.abs(), 0.028);
            assert_eq!(corner.y.abs(), 0.028);
            assert_eq!(corner.z, 0.0);
        }
        let c = reg.corners_of("close").unwrap();
        assert_eq!(c.0[2], Vec3::new(0.01, 0.02, 0.0));
        assert_eq!(c.0[0], Vec3::new(-0.01, -0.02, 0.0));
        assert_eq!(reg.button("left").unwrap().parents.len(), 2);
        assert!(matches!(reg.corners_of("nope"), Err(RegistryError::UnknownButton(_))));
    }

    #[test]
    fn corners_are_ccw_with_exact_area() {
        let c = ZoneCorners::rectangle(Vec2::new(0.01, 0.02));
        assert_eq!(c.signed_area(), 4.0 * 0.01 * 0.02);
    }

    #[test]
    fn unknown_marker_is_rejected() {
        let offsets = format!("{OFFSETS}close,99,0,0,0,1,0,0,0\n");
        let err = load_registry(MARKERS, BUTTONS, &offsets).unwrap_err();
        assert!(matches!(err, RegistryError::UnknownMarker { marker: 99, line: 5, .. }), "{err}");
    }

    #[test]
    fn duplicate_button_and_binding() {
        let dup = format!("{BUTTONS}close,discrete,gripper:open,0.01,0.01,0.01,0.01\n");
        assert!(matches!(
            load_registry(MARKERS, &dup, OFFSETS),
            Err(RegistryError::DuplicateButton(_))
        ));
        let dup = format!("{BUTTONS}left2,continuous,axis:x-,0.01,0.01,0.01,0.01\n");
        assert!(matches!(
            load_registry(MARKERS, &dup, OFFSETS),
            Err(RegistryError::DuplicateBinding { .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let bad = "button_id,kind,action,face_hx_m,face_hy_m,zone_hx_m,zone_hy_m\n\
                   a,continuous,axis:x+,0.01,0.01,0.02,0.02\n\
                   b,continuous,axis:y+,oops,0.01,0.02,0.02\n";
        let err = load_registry(MARKERS, bad, OFFSETS).unwrap_err();
        assert!(matches!(err, RegistryError::Malformed { line: 3, .. }), "{err}");
        let err = load_registry(MARKERS, "id,kind\n", OFFSETS).unwrap_err();
        assert!(matches!(err, RegistryError::Header { .. }));
    }

    #[test]
    fn shrunk_zone_is_rejected() {
        let bad = "button_id,kind,action,face_hx_m,face_hy_m,zone_hx_m,zone_hy_m\n\
                   a,continuous,axis:x+,0.02,0.01,0.01,0.02\n";
        assert!(load_registry(MARKERS, bad, "button_id,marker_id,px_m,py_m,pz_m,qw,qx,qy,qz\n").is_err());
    }

    #[test]
    fn button_without_parents_is_rejected() {
        let offsets = "button_id,marker_id,px_m,py_m,pz_m,qw,qx,qy,qz\nleft,0,0,0,0,1,0,0,0\n";
        assert!(matches!(
            load_registry(MARKERS, BUTTONS, offsets),
            Err(RegistryError::NoParents(b)) if b == "close"
        ));
    }

    #[test]
    fn action_strings_roundtrip() {
        for s in ["axis:x+", "axis:y-", "axis:z+", "gripper:open", "gripper:close", "event:menu"] {
            assert_eq!(s.parse::<ActionBinding>().unwrap().to_string(), s);
        }
        for s in ["axis:w+", "axis:x", "gripper:spin", "event:", "nothing"] {
            assert!(s.parse::<ActionBinding>().is_err(), "{s}");
        }
    }

    #[test]
    fn loading_is_pure() {
        let a = load_registry(MARKERS, BUTTONS, OFFSETS).unwrap();
        let b = load_registry(MARKERS, BUTTONS, OFFSETS).unwrap();
        assert_eq!(a, b);
    }
}
