//! Minimal SVG plot of a growth table: N on a log axis, estimates as markers,
//! and the two fitted models as polylines.

use std::fmt::Write as _;

use crate::normlab::GrowthTable;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;

pub fn growth_svg(table: &GrowthTable, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let rows = &table.rows;
    if rows.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let lx: Vec<f64> = rows.iter().map(|r| (r.n as f64).log2()).collect();
    let (x0, mut x1) = (lx[0], lx[lx.len() - 1]);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let ys = rows.iter().flat_map(|r| [r.estimate, r.sqrt_log_model, r.log_model]);
    let y1 = ys.fold(0.0f64, f64::max).max(1.0) * 1.05;
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - y / y1 * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for (r, x) in rows.iter().zip(&lx) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            px(*x),
            H - PAD + 16.0,
            r.n
        );
    }
    for k in 0..=4 {
        let y = y1 * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{y:.2}</text>"#,
            PAD - 6.0,
            py(y) + 4.0
        );
    }
    let line = |vals: Vec<f64>, color: &str, s: &mut String| {
        let pts: Vec<String> = lx.iter().zip(vals).map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
    };
    line(rows.iter().map(|r| r.sqrt_log_model).collect(), "#1f77b4", &mut s);
    line(rows.iter().map(|r| r.log_model).collect(), "#d62728", &mut s);
    for (r, x) in rows.iter().zip(&lx) {
        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3.5" fill="black"/>"#, px(*x), py(r.estimate));
    }
    let legend = [
        ("#1f77b4", format!("c√ln N, c = {:.3}, residual {:.3e}", table.sqrt_log.c, table.sqrt_log.residual)),
        ("#d62728", format!("c ln N, c = {:.3}, residual {:.3e}", table.log.c, table.log.residual)),
    ];
    for (i, (color, text)) in legend.iter().enumerate() {
        let y = PAD + 14.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#, PAD + 10.0, PAD + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{text}</text>"#, PAD + 36.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
