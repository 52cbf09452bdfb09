//! `.vmap.jsonl` map files: one JSON object per frame per line.
//!
//! ```text
//! {"frame_id": "f0", "timestamp": 0.0, "ego_pose": [16 floats, row-major],
//!  "range": [x_half, y_half],
//!  "instances": [{"class": "divider", "kind": "open", "confidence": 1.0,
//!                 "points": [[x, y], ...]}]}
//! ```
//!
//! Coordinates are meters in the ego frame: x forward, y left, right-handed.
//! Floats are written in shortest round-trip form, so every value survives a
//! write/read cycle bit-for-bit.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{Point2, Polyline, PolylineKind};
use super::instance::{ClassId, LocalMap, MapInstance};
use super::range::PerceptionRange;
use super::transform::RigidTransform;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    frame_id: String,
    timestamp: f64,
    ego_pose: Vec<f64>,
    range: [f64; 2],
    instances: Vec<InstanceRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceRecord {
    class: ClassId,
    kind: PolylineKind,
    confidence: f64,
    points: Vec<[f64; 2]>,
}

fn to_record<T: Scalar>(m: &LocalMap<T>) -> FrameRecord {
    FrameRecord {
        frame_id: m.frame_id.clone(),
        timestamp: m.timestamp,
        ego_pose: m.ego_pose.flatten().iter().map(|v| v.to_f64_lossy()).collect(),
        range: [m.range.x_half.to_f64_lossy(), m.range.y_half.to_f64_lossy()],
        instances: m
            .instances
            .iter()
            .map(|i| InstanceRecord {
                class: i.class,
                kind: i.polyline.kind(),
                confidence: i.confidence().to_f64_lossy(),
                points: i.polyline.points().iter().map(|p| [p.x.to_f64_lossy(), p.y.to_f64_lossy()]).collect(),
            })
            .collect(),
    }
}

fn from_record<T: Scalar>(r: FrameRecord) -> Result<LocalMap<T>> {
    let pose: Vec<T> = r.ego_pose.iter().map(|v| T::lit(*v)).collect();
    let ego_pose = RigidTransform::from_row_major(&pose)?;
    let range = PerceptionRange::new(T::lit(r.range[0]), T::lit(r.range[1]))?;
    let instances = r
        .instances
        .into_iter()
        .map(|i| {
            let pts = i.points.iter().map(|p| Point2::new(T::lit(p[0]), T::lit(p[1]))).collect();
            MapInstance::new(i.class, Polyline::new(pts, i.kind)?, T::lit(i.confidence))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalMap { frame_id: r.frame_id, timestamp: r.timestamp, ego_pose, range, instances })
}

/// Serializes one frame as a single line (no trailing newline).
pub fn frame_to_line<T: Scalar>(m: &LocalMap<T>) -> String {
    serde_json::to_string(&to_record(m)).expect("frame record serializes")
}

pub fn frame_from_line<T: Scalar>(line: &str) -> std::result::Result<LocalMap<T>, String> {
    let rec: FrameRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    from_record(rec).map_err(|e| e.to_string())
}

/// Reads every frame; blank lines are skipped. Errors carry the 1-based line number.
pub fn read_maps<T: Scalar, R: BufRead>(reader: R) -> Result<Vec<LocalMap<T>>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let map = frame_from_line(&line).map_err(|message| Error::Parse { line: i + 1, message })?;
        if !seen.insert(map.frame_id.clone()) {
            return Err(Error::Parse { line: i + 1, message: format!("duplicate frame_id `{}`", map.frame_id) });
        }
        out.push(map);
    }
    Ok(out)
}

pub fn write_maps<T: Scalar, W: Write>(mut w: W, maps: &[LocalMap<T>]) -> Result<()> {
    for m in maps {
        writeln!(w, "{}", frame_to_line(m))?;
    }
    Ok(())
}

pub fn load_maps<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<LocalMap<T>>> {
    let f = std::fs::File::open(path)?;
    read_maps(std::io::BufReader::new(f))
}

pub fn save_maps<T: Scalar>(path: impl AsRef<Path>, maps: &[LocalMap<T>]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_maps(&mut w, maps)?;
    w.flush()?;
    Ok(())
}
