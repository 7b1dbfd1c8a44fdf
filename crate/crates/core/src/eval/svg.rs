//! Static trajectory plots of logged episodes.

use std::fmt::Write;

use super::log::LoggedEpisode;
use crate::se2::Pose2;
use crate::sim::{spawn_world, Aabb};

const PX_PER_M: f64 = 1500.0;
const MARGIN: f64 = 0.03;

struct Frame {
    x0: f64,
    z1: f64,
}

impl Frame {
    fn px(&self, p: [f64; 2]) -> (f64, f64) {
        ((p[0] - self.x0) * PX_PER_M, (self.z1 - p[1]) * PX_PER_M)
    }
}

fn polygon(out: &mut String, f: &Frame, pts: &[[f64; 2]], style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = f.px(*p);
            format!("{x:.1},{y:.1}")
        })
        .collect();
    let _ = writeln!(out, r#"<polygon points="{}" {style}/>"#, coords.join(" "));
}

fn rect(out: &mut String, f: &Frame, b: &Aabb, style: &str) {
    let v = b.vertices();
    polygon(out, f, &v, style);
}

fn marker(out: &mut String, f: &Frame, p: Pose2, color: &str, label: &str) {
    let (x, y) = f.px([p.x, p.z]);
    let _ = writeln!(
        out,
        r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{color}"/><text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{label}</text>"#,
        x + 6.0,
        y - 6.0
    );
}

/// SVG of the holder, the end-effector path and periodic plate outlines.
pub fn render_episode_svg(ep: &LoggedEpisode, poses: &[Pose2]) -> String {
    let cfg = &ep.header.config;
    let world = spawn_world(&cfg.layout, &cfg.plate, ep.header.initial.blocker_slot).ok();
    let shape = cfg.plate;

    let mut xs: Vec<f64> = Vec::new();
    let mut zs: Vec<f64> = Vec::new();
    for p in poses {
        for c in shape.corners(*p) {
            xs.push(c[0]);
            zs.push(c[1]);
        }
        xs.push(p.x);
        zs.push(p.z);
    }
    if let Some(w) = &world {
        for b in w.boxes() {
            for v in b.vertices() {
                xs.push(v[0]);
                zs.push(v[1]);
            }
        }
    }
    let fold = |v: &[f64], init: f64, f: fn(f64, f64) -> f64| v.iter().copied().fold(init, f);
    let x0 = fold(&xs, f64::INFINITY, f64::min) - MARGIN;
    let x1 = fold(&xs, f64::NEG_INFINITY, f64::max) + MARGIN;
    let z0 = fold(&zs, f64::INFINITY, f64::min).min(0.0) - MARGIN;
    let z1 = fold(&zs, f64::NEG_INFINITY, f64::max) + MARGIN;
    let frame = Frame { x0, z1 };
    let (width, height) = ((x1 - x0) * PX_PER_M, (z1 - z0) * PX_PER_M);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (_, floor_y) = frame.px([0.0, 0.0]);
    let _ = writeln!(
        out,
        r##"<line x1="0" y1="{floor_y:.1}" x2="{width:.0}" y2="{floor_y:.1}" stroke="#444" stroke-width="2"/>"##
    );
    if let Some(w) = &world {
        for b in &w.walls {
            rect(&mut out, &frame, b, r##"fill="#888""##);
        }
        if let Some(b) = &w.blocker {
            rect(&mut out, &frame, b, r##"fill="#c44" fill-opacity="0.7""##);
        }
    }

    let every = (poses.len() / 12).max(1);
    for (i, p) in poses.iter().enumerate() {
        if i % every == 0 || i + 1 == poses.len() {
            let shade = if i + 1 == poses.len() { "#1565c0" } else { "#90caf9" };
            polygon(
                &mut out,
                &frame,
                &shape.corners(*p),
                &format!(r#"fill="none" stroke="{shade}" stroke-width="1.5""#),
            );
        }
    }
    let path: Vec<String> = poses
        .iter()
        .map(|p| {
            let (x, y) = frame.px([p.x, p.z]);
            format!("{x:.1},{y:.1}")
        })
        .collect();
    let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#0d47a1" stroke-width="2"/>"##, path.join(" "));
    marker(&mut out, &frame, ep.header.initial.true_goal, "#2e7d32", "goal");
    marker(&mut out, &frame, ep.header.initial.noisy_goal, "#ef6c00", "noisy goal");
    let outcome = ep
        .steps
        .last()
        .map(|s| format!("{:?} after {} steps", s.terminated, s.step + 1))
        .unwrap_or_else(|| "no steps".into());
    let _ = writeln!(
        out,
        r#"<text x="8" y="16" font-size="13" font-family="sans-serif">episode {} | {} | slot {} | {outcome}</text>"#,
        ep.header.episode, ep.header.policy, ep.header.slot
    );
    out.push_str("</svg>\n");
    out
}
