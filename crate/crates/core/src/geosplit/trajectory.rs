use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::map_model::{Point2, RigidTransform};
use crate::streaming::load_poses;

/// One recorded drive: ego→world poses in a per-city world frame plus
/// free-form tags used for balance reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scene_id: String,
    pub city: String,
    poses: Vec<(f64, RigidTransform<f64>)>,
    pub attributes: BTreeMap<String, String>,
}

impl Trajectory {
    pub fn new(
        scene_id: impl Into<String>,
        city: impl Into<String>,
        poses: Vec<(f64, RigidTransform<f64>)>,
        attributes: BTreeMap<String, String>,
    ) -> Result<Self> {
        let scene_id = scene_id.into();
        if poses.is_empty() {
            return Err(Error::InvalidArgument(format!("scene `{scene_id}` has no poses")));
        }
        if poses.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument(format!("scene `{scene_id}` timestamps are not strictly increasing")));
        }
        Ok(Self { scene_id, city: city.into(), poses, attributes })
    }

    /// Convenience for positions only; timestamps are 0, 1, 2, ...
    pub fn from_positions(scene_id: impl Into<String>, city: impl Into<String>, xy: &[(f64, f64)]) -> Result<Self> {
        let poses = xy.iter().enumerate().map(|(i, &(x, y))| (i as f64, RigidTransform::translation(x, y))).collect();
        Self::new(scene_id, city, poses, BTreeMap::new())
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn poses(&self) -> &[(f64, RigidTransform<f64>)] {
        &self.poses
    }

    pub fn positions(&self) -> impl Iterator<Item = Point2<f64>> + '_ {
        self.poses.iter().map(|(_, p)| p.translation_xy())
    }

    /// Attribute value for balance reporting; `city` falls back to the scene's city.
    pub fn attribute(&self, key: &str) -> Option<&str> {
        match self.attributes.get(key) {
            Some(v) => Some(v.as_str()),
            None if key == "city" => Some(self.city.as_str()),
            None => None,
        }
    }
}

#[derive(Deserialize)]
struct ManifestRecord {
    scene_id: String,
    city: String,
    #[serde(default)]
    attributes: BTreeMap<String, serde_json::Value>,
    poses: PathBuf,
}

fn attr_string(v: serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

/// Reads a scene manifest: one `{scene_id, city, attributes, poses}` object
/// per line. Pose paths are resolved against `base`.
pub fn read_manifest<R: BufRead>(r: R, base: &Path) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?;
        let path = if rec.poses.is_absolute() { rec.poses } else { base.join(rec.poses) };
        let poses = load_poses(&path)?.into_iter().map(|p| (p.timestamp, p.pose)).collect();
        let attributes = rec.attributes.into_iter().map(|(k, v)| (k, attr_string(v))).collect();
        out.push(
            Trajectory::new(rec.scene_id, rec.city, poses, attributes)
                .map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<Trajectory>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    read_manifest(std::io::BufReader::new(std::fs::File::open(path)?), base)
}
