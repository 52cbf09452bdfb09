use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use vecmap::map_model::{ClassId, LocalMap};

use crate::Misaligned;

#[derive(clap::Args)]
pub struct Args {
    /// Map file (`.vmap.jsonl`).
    #[arg(long)]
    map: PathBuf,
    /// Frame to draw; the first frame when absent.
    #[arg(long)]
    frame: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

/// Pixels per meter.
pub const SCALE: f64 = 10.0;

pub fn color(c: ClassId) -> &'static str {
    match c {
        ClassId::Boundary => "green",
        ClassId::Divider => "red",
        ClassId::PedCrossing => "blue",
    }
}

/// Screen position of an ego-frame point: forward is up, left is left.
fn screen(x: f64, y: f64) -> (f64, f64) {
    (-y * SCALE, -x * SCALE)
}

pub fn to_svg(m: &LocalMap<f64>) -> String {
    let (w, h) = (2.0 * m.range.y_half * SCALE, 2.0 * m.range.x_half * SCALE);
    let (x0, y0) = (-m.range.y_half * SCALE, -m.range.x_half * SCALE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.4}" height="{h:.4}" viewBox="{x0:.4} {y0:.4} {w:.4} {h:.4}">"#
    );
    let _ = writeln!(s, r#"<rect x="{x0:.4}" y="{y0:.4}" width="{w:.4}" height="{h:.4}" fill="white" stroke="gray"/>"#);
    for inst in &m.instances {
        let mut d = String::new();
        for (k, p) in inst.polyline.points().iter().enumerate() {
            let (u, v) = screen(p.x, p.y);
            let _ = write!(d, "{}{u:.4},{v:.4}", if k == 0 { "M" } else { " L" });
        }
        if inst.polyline.is_closed() {
            d.push_str(" Z");
        }
        let _ = writeln!(
            s,
            r#"<path class="{}" d="{d}" stroke="{}" stroke-width="3" fill="none"/>"#,
            inst.class.name(),
            color(inst.class)
        );
    }
    let _ = writeln!(s, r#"<polygon points="0,-20 -8,10 8,10" fill="black"/>"#);
    s.push_str("</svg>\n");
    s
}

pub fn run(a: Args) -> Result<()> {
    let maps = crate::eval::load(&a.map)?;
    let m = match &a.frame {
        Some(id) => maps.iter().find(|m| &m.frame_id == id).ok_or_else(|| Misaligned(format!("no frame `{id}` in {}", a.map.display())))?,
        None => maps.first().ok_or_else(|| Misaligned(format!("{} has no frames", a.map.display())))?,
    };
    std::fs::write(&a.out, to_svg(m)).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
