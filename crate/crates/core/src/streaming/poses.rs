//! `.poses.jsonl`: one `{frame_id, timestamp, matrix}` object per line, where
//! `matrix` is the 4×4 ego→world pose in row-major order.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map_model::RigidTransform;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEntry {
    pub frame_id: String,
    pub timestamp: f64,
    pub pose: RigidTransform<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    frame_id: String,
    timestamp: f64,
    matrix: Vec<f64>,
}

pub fn read_poses<R: BufRead>(r: R) -> Result<Vec<PoseEntry>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: n + 1, message };
        let rec: PoseRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let pose = RigidTransform::from_row_major(&rec.matrix).map_err(|e| parse_err(e.to_string()))?;
        if !rec.timestamp.is_finite() {
            return Err(parse_err("non-finite timestamp".into()));
        }
        out.push(PoseEntry { frame_id: rec.frame_id, timestamp: rec.timestamp, pose });
    }
    Ok(out)
}

pub fn write_poses<W: Write>(mut w: W, poses: &[PoseEntry]) -> Result<()> {
    for p in poses {
        let rec = PoseRecord { frame_id: p.frame_id.clone(), timestamp: p.timestamp, matrix: p.pose.flatten().to_vec() };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_poses(path: impl AsRef<Path>) -> Result<Vec<PoseEntry>> {
    read_poses(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn save_poses(path: impl AsRef<Path>, poses: &[PoseEntry]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_poses(&mut f, poses)?;
    f.flush()?;
    Ok(())
}
