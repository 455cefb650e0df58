//! Deterministic SVG rendering of trajectory logs and sweep curves. Pure
//! string building with fixed-precision coordinates: identical inputs give
//! byte-identical files.

use std::fmt::Write;

use colson::eval::{EvalReport, TrajectoryLog};

const PAD: f64 = 30.0;
const SPAN_PX: f64 = 540.0;
const PED_COLORS: [&str; 6] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
    width: f64,
    height: f64,
}

impl Frame {
    fn fit(logs: &[TrajectoryLog]) -> Frame {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut take = |x: f64, y: f64| {
            lo[0] = lo[0].min(x);
            lo[1] = lo[1].min(y);
            hi[0] = hi[0].max(x);
            hi[1] = hi[1].max(y);
        };
        for log in logs {
            for p in &log.robot {
                take(p[0], p[1]);
            }
            for track in &log.pedestrians {
                for p in track {
                    take(p[0], p[1]);
                }
            }
            for w in &log.walls {
                take(w[0], w[1]);
                take(w[2], w[3]);
            }
            for s in &log.segments {
                take(s[0], s[1]);
                take(s[2], s[3]);
            }
            take(log.goal[0], log.goal[1]);
        }
        if !lo[0].is_finite() {
            (lo, hi) = ([-5.0, -5.0], [5.0, 5.0]);
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
        let scale = SPAN_PX / span;
        Frame {
            min_x: lo[0],
            max_y: hi[1],
            scale,
            width: (hi[0] - lo[0]) * scale + 2.0 * PAD,
            height: (hi[1] - lo[1]) * scale + 2.0 * PAD,
        }
    }

    /// World to pixel; the vertical axis flips so +y points up on screen.
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (PAD + (p[0] - self.min_x) * self.scale, PAD + (self.max_y - p[1]) * self.scale)
    }
}

fn is_stationary(track: &[[f64; 2]]) -> bool {
    track.iter().all(|p| {
        (p[0] - track[0][0]).abs() < 1e-9 && (p[1] - track[0][1]).abs() < 1e-9
    })
}

fn points_attr(frame: &Frame, track: &[[f64; 2]]) -> String {
    let mut s = String::new();
    for (i, p) in track.iter().enumerate() {
        let (x, y) = frame.map(*p);
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x:.3},{y:.3}").unwrap();
    }
    s
}

/// All logs overlaid in one picture: walls as rectangles, pedestrian and
/// robot paths as polylines, with a circle standing in for any track that
/// never moves.
pub fn render_trajectories(logs: &[TrajectoryLog]) -> String {
    let frame = Frame::fit(logs);
    let mut out = String::new();
    write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n",
        frame.width, frame.height, frame.width, frame.height
    )
    .unwrap();
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");

    let mut walls_drawn: Vec<[f64; 4]> = Vec::new();
    let mut segments_drawn: Vec<[f64; 4]> = Vec::new();
    let mut goals_drawn: Vec<[f64; 2]> = Vec::new();
    for log in logs {
        for w in &log.walls {
            if walls_drawn.contains(w) {
                continue;
            }
            walls_drawn.push(*w);
            let (x, y) = frame.map([w[0], w[3]]);
            let width = (w[2] - w[0]) * frame.scale;
            let height = (w[3] - w[1]) * frame.scale;
            write!(
                out,
                "<rect class=\"wall\" x=\"{x:.3}\" y=\"{y:.3}\" width=\"{width:.3}\" height=\"{height:.3}\" fill=\"#b0b0b0\"/>\n"
            )
            .unwrap();
        }
        for s in &log.segments {
            if segments_drawn.contains(s) {
                continue;
            }
            segments_drawn.push(*s);
            let (x1, y1) = frame.map([s[0], s[1]]);
            let (x2, y2) = frame.map([s[2], s[3]]);
            write!(
                out,
                "<line class=\"wall\" x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" stroke=\"#707070\" stroke-width=\"3\"/>\n"
            )
            .unwrap();
        }
        if !goals_drawn.contains(&log.goal) {
            goals_drawn.push(log.goal);
            let (x, y) = frame.map(log.goal);
            write!(
                out,
                "<circle class=\"goal\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"6\" fill=\"none\" stroke=\"#2f9e44\" stroke-width=\"2\"/>\n"
            )
            .unwrap();
        }
    }

    for log in logs {
        for (i, track) in log.pedestrians.iter().enumerate() {
            let color = PED_COLORS[i % PED_COLORS.len()];
            if is_stationary(track) {
                let (x, y) = frame.map(track[0]);
                write!(
                    out,
                    "<circle class=\"ped\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{color}\"/>\n"
                )
                .unwrap();
            } else {
                write!(
                    out,
                    "<polyline class=\"ped\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" opacity=\"0.8\"/>\n",
                    points_attr(&frame, track)
                )
                .unwrap();
            }
        }
    }

    for log in logs {
        if is_stationary(&log.robot) {
            let (x, y) = frame.map(log.robot[0]);
            write!(
                out,
                "<circle class=\"robot\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"5\" fill=\"#d7263d\"/>\n"
            )
            .unwrap();
        } else {
            let (sx, sy) = frame.map(log.robot[0]);
            write!(
                out,
                "<circle class=\"start\" cx=\"{sx:.3}\" cy=\"{sy:.3}\" r=\"3\" fill=\"#d7263d\"/>\n"
            )
            .unwrap();
            write!(
                out,
                "<polyline class=\"robot\" points=\"{}\" fill=\"none\" stroke=\"#d7263d\" stroke-width=\"2.5\"/>\n",
                points_attr(&frame, &log.robot)
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Success rate against pedestrian count as a single line chart.
pub fn render_sweep(table: &[(usize, EvalReport)]) -> String {
    let (w, h) = (480.0, 320.0);
    let (left, right, top, bottom) = (50.0, 20.0, 20.0, 40.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;

    let max_count = table.iter().map(|(c, _)| *c).max().unwrap_or(1).max(1) as f64;
    let x = |count: usize| left + count as f64 / max_count * plot_w;
    let y = |rate: f64| top + (100.0 - rate) / 100.0 * plot_h;

    let mut out = String::new();
    write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n"
    )
    .unwrap();
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");
    for rate in [0.0, 50.0, 100.0] {
        let gy = y(rate);
        write!(
            out,
            "<line x1=\"{left:.1}\" y1=\"{gy:.1}\" x2=\"{:.1}\" y2=\"{gy:.1}\" stroke=\"#d0d0d0\"/>\n",
            w - right
        )
        .unwrap();
        write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\" fill=\"#404040\">{rate:.0}</text>\n",
            left - 6.0,
            gy + 4.0
        )
        .unwrap();
    }
    if !table.is_empty() {
        let points: Vec<String> = table
            .iter()
            .map(|(c, r)| format!("{:.1},{:.1}", x(*c), y(r.success_rate)))
            .collect();
        write!(
            out,
            "<polyline class=\"curve\" points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
            points.join(" ")
        )
        .unwrap();
        for (c, r) in table {
            let (px, py) = (x(*c), y(r.success_rate));
            write!(out, "<circle cx=\"{px:.1}\" cy=\"{py:.1}\" r=\"3\" fill=\"#1f77b4\"/>\n")
                .unwrap();
            write!(
                out,
                "<text x=\"{px:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#404040\">{c}</text>\n",
                h - bottom + 16.0
            )
            .unwrap();
        }
    }
    write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#202020\">pedestrians</text>\n",
        left + plot_w / 2.0,
        h - 8.0
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}
