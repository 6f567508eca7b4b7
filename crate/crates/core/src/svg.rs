//! SVG rendering of a run report: deployment, clusters, charging stops and
//! vehicle tours on the unit-area viewport.

use std::fmt::Write;

use crate::report::{JointSection, RunReport};
use crate::scenario::Point;

const CLUSTER_COLORS: [&str; 8] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#666666",
];

struct Canvas {
    out: String,
    scale: f64,
    margin: f64,
    height: f64,
}

impl Canvas {
    fn new(area: (f64, f64)) -> Self {
        let scale = 720.0 / area.0.max(area.1);
        Canvas {
            out: String::new(),
            scale,
            margin: 40.0,
            height: area.1 * scale,
        }
    }

    fn x(&self, p: Point) -> f64 {
        self.margin + p.x * self.scale
    }

    fn y(&self, p: Point) -> f64 {
        // Flip: geometry is y-up, SVG is y-down.
        self.margin + self.height - p.y * self.scale
    }

    fn polyline(&mut self, pts: &[Point], color: &str, width: f64, closed: bool) {
        if pts.len() < 2 {
            return;
        }
        let mut d = String::new();
        for (k, &p) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, self.x(p), self.y(p));
        }
        if closed {
            d.push('Z');
        }
        let _ = writeln!(
            self.out,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="0.8"/>"#
        );
    }

    fn circle(&mut self, p: Point, r: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{fill}" stroke="black" stroke-width="0.5"/>"#,
            self.x(p),
            self.y(p)
        );
    }

    fn star(&mut self, p: Point, r: f64, fill: &str) {
        let (cx, cy) = (self.x(p), self.y(p));
        let mut d = String::new();
        for k in 0..10 {
            let angle = std::f64::consts::PI * (k as f64 / 5.0) - std::f64::consts::FRAC_PI_2;
            let radius = if k % 2 == 0 { r } else { r * 0.45 };
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if k == 0 { "M" } else { "L" },
                cx + radius * angle.cos(),
                cy + radius * angle.sin()
            );
        }
        d.push('Z');
        let _ = writeln!(self.out, r#"<path d="{d}" fill="{fill}" stroke="black" stroke-width="0.7"/>"#);
    }

    fn square(&mut self, p: Point, half: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="black" stroke-width="0.7"/>"#,
            self.x(p) - half,
            self.y(p) - half,
            2.0 * half,
            2.0 * half
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, s: &str) {
        let _ = writeln!(self.out, r#"<text x="{x:.1}" y="{y:.1}" font-size="{size}" font-family="sans-serif">{s}</text>"#);
    }
}

/// Render the deployment, tours and stops of a report as a standalone SVG
/// document.
pub fn render_svg(report: &RunReport) -> Result<String, String> {
    let scenario = report.scenario()?;
    let mut canvas = Canvas::new(scenario.area);
    let width = scenario.area.0 * canvas.scale + 2.0 * canvas.margin;
    let height = scenario.area.1 * canvas.scale + 2.0 * canvas.margin + 70.0;
    let mut head = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    head.push('\n');
    head.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    head.push('\n');

    let mut legend: Vec<(String, String)> = Vec::new();
    if let Some(layered) = &report.layered {
        // Cluster detour tours and cell stops first, head tour on top.
        for (k, plan) in layered.cluster_plans.iter().enumerate() {
            let color = CLUSTER_COLORS[k % CLUSTER_COLORS.len()];
            canvas.polyline(&plan.tour.waypoints, color, 1.2, true);
            for &stop in &plan.stops {
                canvas.circle(stop, 3.0, "#ffd92f");
            }
        }
        canvas.polyline(&layered.head_plan.tour.waypoints, "black", 2.0, true);
        for (k, cluster) in layered.clustering.clusters.iter().enumerate() {
            let color = CLUSTER_COLORS[k % CLUSTER_COLORS.len()];
            for &id in &cluster.member_ids {
                canvas.circle(scenario.node(id).unwrap().pos, 4.0, color);
            }
            legend.push((format!("cluster {}", cluster.head_id), color.to_string()));
        }
        for cluster in &layered.clustering.clusters {
            canvas.star(scenario.node(cluster.head_id).unwrap().pos, 9.0, "#2ca02c");
        }
        let joint_note = match &layered.joint {
            JointSection::Solved { plan } => format!(
                "T = {:.0}, h = {:.2}, vacation share {:.3}",
                plan.period, plan.sub_periods, plan.objective
            ),
            JointSection::Infeasible { reason } => format!("joint composition infeasible: {reason}"),
        };
        canvas.text(canvas.margin, height - 24.0, 12.0, &joint_note);
    }
    if let Some(baseline) = &report.baseline {
        canvas.polyline(&baseline.plan.tour.waypoints, "#1f77b4", 1.6, true);
        for n in &scenario.nodes {
            canvas.circle(n.pos, 4.0, "#9ecae1");
        }
        for &stop in &baseline.plan.stops {
            canvas.star(stop, 7.0, "#ffd92f");
        }
        canvas.text(
            canvas.margin,
            height - 24.0,
            12.0,
            &format!(
                "baseline: tour {:.3}, vacation share {:.3}",
                baseline.plan.tour.length, baseline.plan.objective
            ),
        );
    }
    canvas.square(scenario.params.station, 6.0, "#111111");

    // Legend strip under the plot.
    let base_y = scenario.area.1 * canvas.scale + 2.0 * canvas.margin + 6.0;
    let mut x = canvas.margin;
    canvas.text(x, base_y, 12.0, "station ■");
    x += 90.0;
    if report.layered.is_some() {
        canvas.text(x, base_y, 12.0, "heads ★  cell stops ●");
        x += 170.0;
    }
    if report.baseline.is_some() {
        canvas.text(x, base_y, 12.0, "stop points ★");
        x += 120.0;
    }
    for (label, color) in &legend {
        let _ = writeln!(
            canvas.out,
            r#"<circle cx="{:.1}" cy="{:.1}" r="5" fill="{color}"/>"#,
            x + 5.0,
            base_y - 4.0
        );
        canvas.text(x + 14.0, base_y, 12.0, label);
        x += 110.0;
    }

    Ok(format!("{head}{}</svg>\n", canvas.out))
}
