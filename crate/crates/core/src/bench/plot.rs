//! Top-down SVG of one episode: obstacles, global path, driven trajectory,
//! three numbered snapshots of robot and people, and the goal.

use std::fmt::Write as _;

use super::trace::Trace;
use crate::error::Error;
use crate::sim::Scenario;

const PX_PER_M: f64 = 50.0;
const SNAPSHOT_OPACITY: [f64; 3] = [0.3, 0.6, 1.0];

/// Row indices of the three snapshots: first, middle and last.
pub fn snapshot_rows(n: usize) -> [usize; 3] {
    [0, (n - 1) / 2, n - 1]
}

pub fn plot_episode(trace: &Trace) -> Result<String, Error> {
    if trace.rows.is_empty() {
        return Err(Error::Invalid("cannot plot an empty trace".into()));
    }
    let scenario = Scenario::parse(&trace.meta.scenario_text)?;
    let grid = scenario.rasterize()?;
    let (w_m, h_m) = (scenario.size.x, scenario.size.y);
    let px = |v: f64| v * PX_PER_M;
    // World y grows up, SVG y grows down.
    let sx = |x: f64| format!("{:.2}", px(x));
    let sy = |y: f64| format!("{:.2}", px(h_m - y));

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0:.0}" height="{1:.0}" viewBox="0 0 {0:.0} {1:.0}">"#,
        px(w_m),
        px(h_m)
    );
    let _ = writeln!(
        s,
        "<title>{} / {} / seed {} / {}</title>",
        xml_escape(&trace.meta.scenario),
        trace.meta.method,
        trace.meta.seed,
        trace.meta.status.as_str()
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{}" height="{}" fill="#ffffff" stroke="#000000"/>"##, sx(w_m), sx(h_m));

    // Obstacles as horizontal runs of occupied cells.
    let res = grid.resolution();
    let o = grid.origin();
    let _ = writeln!(s, r##"<g id="obstacles" fill="#404040">"##);
    for iy in 0..grid.height() as i64 {
        let mut ix = 0i64;
        while ix < grid.width() as i64 {
            if !grid.is_occupied(ix, iy) {
                ix += 1;
                continue;
            }
            let start = ix;
            while ix < grid.width() as i64 && grid.is_occupied(ix, iy) {
                ix += 1;
            }
            let x0 = o.x + start as f64 * res;
            let y1 = o.y + (iy + 1) as f64 * res;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{:.2}" height="{:.2}"/>"#,
                sx(x0),
                sy(y1),
                px((ix - start) as f64 * res),
                px(res)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let polyline = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
        pts.map(|(x, y)| format!("{},{}", sx(x), sy(y))).collect::<Vec<_>>().join(" ")
    };
    if !trace.meta.path.is_empty() {
        let _ = writeln!(
            s,
            r##"<polyline id="global-path" points="{}" fill="none" stroke="#808080" stroke-width="2" stroke-dasharray="6 4"/>"##,
            polyline(&mut trace.meta.path.iter().map(|p| (p[0], p[1])))
        );
    }
    let _ = writeln!(
        s,
        r##"<polyline id="robot-trajectory" points="{}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##,
        polyline(&mut trace.rows.iter().map(|r| (r.x, r.y)))
    );
    let n_peds = trace.meta.pedestrian_radii.len();
    for k in 0..n_peds {
        let _ = writeln!(
            s,
            r##"<polyline class="pedestrian-trajectory" points="{}" fill="none" stroke="#1f77b4" stroke-width="1" stroke-opacity="0.5"/>"##,
            polyline(&mut trace.rows.iter().map(|r| (r.pedestrians[k].x, r.pedestrians[k].y)))
        );
    }

    let g = trace.meta.goal;
    let _ = writeln!(
        s,
        r##"<circle id="goal" cx="{}" cy="{}" r="{:.2}" fill="#2ca02c" fill-opacity="0.6" stroke="#2ca02c"/>"##,
        sx(g[0]),
        sy(g[1]),
        px(trace.meta.goal_tolerance)
    );

    let r = trace.meta.robot_radius;
    for (label, (&row_i, &alpha)) in snapshot_rows(trace.rows.len()).iter().zip(&SNAPSHOT_OPACITY).enumerate() {
        let row = &trace.rows[row_i];
        let idx = label + 1;
        let _ = writeln!(s, r#"<g class="snapshot" id="snapshot-{idx}" opacity="{alpha}">"#);
        for (k, p) in row.pedestrians.iter().enumerate() {
            let pr = trace.meta.pedestrian_radii[k];
            let _ = writeln!(
                s,
                r##"<ellipse cx="{}" cy="{}" rx="{:.2}" ry="{:.2}" fill="#1f77b4"/>"##,
                sx(p.x),
                sy(p.y),
                px(pr),
                px(pr * 0.75)
            );
            let _ = writeln!(
                s,
                r##"<text x="{}" y="{}" font-size="12" fill="#1f77b4">{idx}</text>"##,
                sx(p.x + pr),
                sy(p.y + pr)
            );
        }
        let deg = -row.theta.to_degrees();
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#d62728" transform="translate({},{}) rotate({:.2})"/>"##,
            -px(r),
            -px(0.75 * r),
            px(2.0 * r),
            px(1.5 * r),
            sx(row.x),
            sy(row.y),
            deg
        );
        let _ = writeln!(
            s,
            r##"<text class="robot-index" x="{}" y="{}" font-size="14" font-weight="bold" fill="#d62728">{idx}</text>"##,
            sx(row.x + r),
            sy(row.y + r)
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
