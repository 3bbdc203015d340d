//! Scatter views of explored points. Pure functions of the report rows.

use std::fmt::Write as _;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub key: String,
    pub source: String,
    pub bram_blocks: u64,
    pub p99_ns: f64,
    pub accepted: bool,
    pub on_front: bool,
    pub optimal: bool,
}

pub fn scatter_csv(rows: &[ScatterRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// BRAM on x, p99 on y. Rejected points are hollow, the front is filled and
/// the optimal point is drawn as a star.
pub fn scatter_svg(rows: &[ScatterRow], title: &str) -> String {
    let pts: Vec<&ScatterRow> = rows.iter().filter(|r| r.p99_ns.is_finite()).collect();
    let (xmax, ymax) = pts.iter().fold((1.0f64, 1.0f64), |(x, y), r| {
        (x.max(r.bram_blocks as f64), y.max(r.p99_ns))
    });
    let sx = |v: f64| PAD + v / (xmax * 1.05) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - v / (ymax * 1.05) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (x0, y0) = (PAD, H - PAD);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, W - PAD);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{PAD}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">BRAM blocks (max {xmax})</text>"#, W / 2.0, H - 20.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">p99 latency, ns (max {ymax:.1})</text>"#,
        H / 2.0,
        H / 2.0
    );
    for r in &pts {
        let (x, y) = (sx(r.bram_blocks as f64), sy(r.p99_ns));
        let tip = format!("<title>{} ({}): {} BRAM, {:.1} ns</title>", escape(&r.key), r.source, r.bram_blocks, r.p99_ns);
        if r.optimal {
            let star: Vec<String> = (0..10)
                .map(|k| {
                    let a = std::f64::consts::PI * k as f64 / 5.0 - std::f64::consts::FRAC_PI_2;
                    let rad = if k % 2 == 0 { 9.0 } else { 4.0 };
                    format!("{:.1},{:.1}", x + rad * a.cos(), y + rad * a.sin())
                })
                .collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="gold" stroke="black">{tip}</polygon>"#, star.join(" "));
        } else if r.on_front {
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="5" fill="steelblue">{tip}</circle>"#);
        } else {
            let fill = if r.accepted { "lightsteelblue" } else { "none" };
            let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="{fill}" stroke="gray">{tip}</circle>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(key: &str, b: u64, l: f64, front: bool, opt: bool) -> ScatterRow {
        ScatterRow {
            key: key.into(),
            source: "dse".into(),
            bram_blocks: b,
            p99_ns: l,
            accepted: true,
            on_front: front,
            optimal: opt,
        }
    }

    #[test]
    fn views_cover_every_row() {
        let rows = vec![row("a<b", 2, 50.0, true, true), row("c", 4, 40.0, true, false), row("d", 5, 90.0, false, false)];
        let svg = scatter_svg(&rows, "t");
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("a&lt;b"));
        let csv = scatter_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("key,source,bram_blocks"));
    }
}
