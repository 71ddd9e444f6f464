//! Static SVG overlay of the map, every committed plan and the executed
//! path. Coordinates are printed with fixed precision so the file is a
//! pure function of the run.

use std::fmt::Write as _;

use hybridnav_core::sim::{Scenario, SimTrace};
use hybridnav_core::world::{CellState, OccupancyGrid};

const PX_PER_M: f64 = 80.0;

pub fn render_svg(scenario: &Scenario<f64>, world: &OccupancyGrid<f64>, trace: &SimTrace<f64>) -> String {
    let g = world.geometry();
    let (w_m, h_m) = (g.width as f64 * g.resolution, g.height as f64 * g.resolution);
    let sx = |x: f64| (x - g.origin.x) * PX_PER_M;
    let sy = |y: f64| (h_m - (y - g.origin.y)) * PX_PER_M;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        w_m * PX_PER_M,
        h_m * PX_PER_M,
        w_m * PX_PER_M,
        h_m * PX_PER_M
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);

    // occupied cells, merged into horizontal runs
    let cell = g.resolution * PX_PER_M;
    let _ = writeln!(out, r##"<g fill="#303030">"##);
    for row in 0..g.height {
        let mut col = 0;
        while col < g.width {
            if world.state(hybridnav_core::world::Cell::new(col, row)) != CellState::Occupied {
                col += 1;
                continue;
            }
            let start = col;
            while col < g.width && world.state(hybridnav_core::world::Cell::new(col, row)) == CellState::Occupied {
                col += 1;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                start as f64 * cell,
                (g.height - 1 - row) as f64 * cell,
                (col - start) as f64 * cell,
                cell
            );
        }
    }
    let _ = writeln!(out, "</g>");

    for (i, plan) in trace.plans.iter().enumerate() {
        let dash = if i == 0 { "" } else { r#" stroke-dasharray="6 4""# };
        let pts: Vec<String> = plan
            .plan
            .xs
            .iter()
            .zip(&plan.plan.ys)
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#2a6fdb" stroke-width="2"{dash}/>"##,
            pts.join(" ")
        );
    }

    let path: Vec<String> = trace
        .records
        .iter()
        .map(|r| format!("{:.2},{:.2}", sx(r.pose.x), sy(r.pose.y)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#d9480f" stroke-width="2.5"/>"##,
        path.join(" ")
    );

    let end = trace.records.last().map_or(0.0, |r| r.time);
    for o in &scenario.obstacles {
        if !o.is_active(end) {
            continue;
        }
        let p = o.position_at(end);
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#f2c14e" fill-opacity="0.7"/>"##,
            sx(p.x),
            sy(p.y),
            o.radius * PX_PER_M
        );
    }
    let s = scenario.robot_start;
    let goal = scenario.goal;
    let _ = writeln!(
        out,
        r##"<circle cx="{:.2}" cy="{:.2}" r="6" fill="#2f9e44"/>"##,
        sx(s.x),
        sy(s.y)
    );
    let _ = writeln!(
        out,
        r##"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="#c92a2a" stroke-width="2.5"/>"##,
        sx(goal.x),
        sy(goal.y)
    );
    out.push_str("</svg>\n");
    out
}
