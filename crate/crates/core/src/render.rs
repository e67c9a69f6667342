//! SVG pictures of partitions and dendrograms.
//!
//! Board coordinates are drawn with y growing downwards, matching the
//! row-major label grid, so row 0 is the top of the picture.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::genopt::Chromosome;
use crate::gomlp::Snapshot;
use crate::model::{NetId, Partition, Problem};
use crate::multilayer::Dendrogram;

/// Side length of the drawn board in pixels.
const BOARD_PX: f64 = 640.0;
const LEGEND_PX: f64 = 180.0;

#[derive(Debug, Clone, Default)]
pub struct RenderOptions<'a> {
    pub title: Option<String>,
    /// GA handles to overlay as crosses.
    pub handles: Option<&'a Chromosome>,
}

/// Fill color for a net: hues spread by the golden angle.
pub fn net_color(net: NetId) -> String {
    let hue = (f64::from(net) * 137.507_764) % 360.0;
    format!("hsl({hue:.1},65%,62%)")
}

fn stroke_color(net: NetId) -> String {
    let hue = (f64::from(net) * 137.507_764) % 360.0;
    format!("hsl({hue:.1},70%,28%)")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the label grid, pins, optional handles and a legend listing
/// every net with its island count.
pub fn render_partition(problem: &Problem, partition: &Partition, options: &RenderOptions) -> String {
    let res = partition.resolution();
    let cell = BOARD_PX / res as f64;
    let top = if options.title.is_some() { 30.0 } else { 0.0 };
    let width = BOARD_PX + LEGEND_PX;
    let height = (BOARD_PX + top).max(top + 24.0 * problem.net_count() as f64 + 20.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    if let Some(title) = &options.title {
        let _ = writeln!(s, r#"<text x="8" y="20" font-family="sans-serif" font-size="16">{}</text>"#, escape(title));
    }
    let _ = writeln!(s, r#"<g transform="translate(0,{top})" shape-rendering="crispEdges">"#);
    // One rectangle per horizontal run of equal labels keeps files small.
    for r in 0..res {
        let mut c = 0;
        while c < res {
            let net = partition.grid.get(r, c);
            let start = c;
            while c < res && partition.grid.get(r, c) == net {
                c += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                start as f64 * cell,
                r as f64 * cell,
                (c - start) as f64 * cell,
                cell,
                net_color(net)
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g transform="translate(0,{top})">"#);
    let _ = writeln!(
        s,
        r#"<rect width="{BOARD_PX}" height="{BOARD_PX}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    if let Some(ch) = options.handles {
        for (x, y, net) in ch.labeled_handles() {
            let (px, py) = (x * BOARD_PX, y * BOARD_PX);
            let _ = writeln!(
                s,
                r#"<path d="M{:.2},{:.2}l8,8m0,-8l-8,8" stroke="{}" stroke-width="2"/>"#,
                px - 4.0,
                py - 4.0,
                stroke_color(net)
            );
        }
    }
    for net in &problem.nets {
        for (i, pin) in net.pins.iter().enumerate() {
            let (px, py) = (pin.x * BOARD_PX, pin.y * BOARD_PX);
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="5" fill="{}" stroke="black" stroke-width="1.5"/>"#,
                stroke_color(net.id)
            );
            if i == 0 {
                let _ = writeln!(
                    s,
                    r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
                    px + 7.0,
                    py - 7.0,
                    escape(&net.label)
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");
    let counts = partition.island_counts();
    let _ = writeln!(s, r#"<g transform="translate({},{})" font-family="sans-serif" font-size="13">"#, BOARD_PX + 16.0, top + 10.0);
    for (i, net) in problem.nets.iter().enumerate() {
        let y = 24.0 * i as f64;
        let islands = counts.get(i).copied().unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<rect x="0" y="{y}" width="16" height="16" fill="{}" stroke="black"/><text x="24" y="{}">{} ({} island{})</text>"#,
            net_color(net.id),
            y + 13.0,
            escape(&net.label),
            islands,
            if islands == 1 { "" } else { "s" }
        );
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

/// Writes one SVG per generation snapshot into `dir`, named
/// `generation_NNN.svg`, and returns the written paths.
pub fn write_snapshots(problem: &Problem, snapshots: &[Snapshot], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    snapshots
        .iter()
        .map(|snap| {
            let path = dir.join(format!("generation_{:03}.svg", snap.generation));
            let svg = render_partition(
                problem,
                &snap.partition,
                &RenderOptions {
                    title: Some(format!("generation {}", snap.generation)),
                    handles: None,
                },
            );
            fs::write(&path, svg)?;
            Ok(path)
        })
        .collect()
}

/// Renders a dendrogram with leaves along the bottom and merge height
/// (inverse-distance dissimilarity) growing upwards. `labels[i]` names
/// leaf `i`.
pub fn render_dendrogram(dendrogram: &Dendrogram, labels: &[String]) -> String {
    let m = dendrogram.leaves.len();
    let width = 80.0 + 60.0 * m.max(1) as f64;
    let height = 420.0;
    let (plot_top, plot_bottom) = (30.0, 360.0);
    let max_height = dendrogram.merges.iter().map(|mg| mg.height).fold(0.0, f64::max);
    let scale = |h: f64| {
        if max_height > 0.0 {
            plot_bottom - (h / max_height) * (plot_bottom - plot_top)
        } else {
            plot_bottom
        }
    };

    // Leaf order from a depth-first walk so links never cross.
    let mut order = Vec::with_capacity(m);
    let mut stack: Vec<usize> = if m == 0 { vec![] } else { vec![m + dendrogram.merges.len() - 1] };
    while let Some(id) = stack.pop() {
        if id < m {
            order.push(id);
        } else {
            let mg = &dendrogram.merges[id - m];
            stack.push(mg.b);
            stack.push(mg.a);
        }
    }
    let mut x = vec![0.0; m + dendrogram.merges.len()];
    let mut y = vec![plot_bottom; m + dendrogram.merges.len()];
    for (slot, &leaf) in order.iter().enumerate() {
        x[leaf] = 60.0 + 60.0 * slot as f64;
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1.5" fill="none">"#);
    for (step, mg) in dendrogram.merges.iter().enumerate() {
        let id = m + step;
        let h = scale(mg.height);
        x[id] = (x[mg.a] + x[mg.b]) / 2.0;
        y[id] = h;
        let _ = writeln!(
            s,
            r#"<path d="M{:.2},{:.2}V{h:.2}H{:.2}V{:.2}"/>"#,
            x[mg.a], y[mg.a], x[mg.b], y[mg.b]
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="13" text-anchor="middle">"#);
    for leaf in 0..m {
        let label = labels.get(leaf).cloned().unwrap_or_else(|| dendrogram.leaves[leaf].to_string());
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x[leaf], plot_bottom + 20.0, escape(&label));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11">{:?} linkage, max height {:.4}</text>"#,
        width / 2.0,
        height - 15.0,
        dendrogram.linkage,
        max_height
    );
    let _ = writeln!(s, "</g>\n</svg>");
    s
}
