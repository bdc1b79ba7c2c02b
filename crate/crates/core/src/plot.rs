//! Standalone SVG line charts.

use std::fmt::Write as _;

use crate::nonparametric::{smoothed_hazard, LifeTable, LifeTableError};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f4e79", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Draws one titled panel with axes at offset `(ox, oy)`.
fn panel(out: &mut String, ox: f64, oy: f64, title: &str, y_label: &str, series: &[Series<'_>]) {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let x_max = xs.fold(1.0, f64::max);
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0, f64::max)
        .max(1e-9)
        * 1.05;
    let (left, top) = (ox + MARGIN, oy + 30.0);
    let (w, h) = (PANEL_W - MARGIN - 10.0, PANEL_H - 80.0);
    let sx = |x: f64| left + x / x_max * w;
    let sy = |y: f64| top + h - y / y_max * h;

    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"##,
        left + w / 2.0,
        oy + 18.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{left:.2}" y="{top:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let y = y_max * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{:.3}</text>"##,
            left - 4.0,
            sy(y) + 3.0,
            y
        );
        let x = x_max * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{:.0}</text>"##,
            sx(x),
            top + h + 14.0,
            x
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">period</text>"##,
        left + w / 2.0,
        top + h + 30.0
    );
    let _ = writeln!(
        out,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"##,
        ox + 12.0,
        top + h / 2.0,
        ox + 12.0,
        top + h / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"##,
            pts.join(" ")
        );
        if series.len() > 1 {
            let ly = top + 14.0 + 14.0 * i as f64;
            let _ = writeln!(
                out,
                r##"<text x="{:.2}" y="{ly:.2}" font-size="10" fill="{color}" text-anchor="end">{}</text>"##,
                left + w - 6.0,
                escape(s.label)
            );
        }
    }
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Side-by-side smoothed hazard and survivor function of a life table.
pub fn life_table_svg(table: &LifeTable, bandwidth: u32) -> Result<String, LifeTableError> {
    let smooth = smoothed_hazard(table, bandwidth)?;
    let hazard = Series {
        label: "smoothed hazard",
        points: smooth.iter().map(|&(t, h)| (t as f64, h)).collect(),
    };
    let mut surv = vec![(0.0, 1.0)];
    surv.extend(table.rows.iter().map(|r| (r.period as f64, r.survivor)));
    let survivor = Series {
        label: "survivor",
        points: surv,
    };
    let mut body = String::new();
    panel(
        &mut body,
        0.0,
        0.0,
        &format!("A. Smoothed hazard (bandwidth {bandwidth})"),
        "hazard",
        &[hazard],
    );
    panel(
        &mut body,
        PANEL_W,
        0.0,
        "B. Survivor function",
        "survival",
        &[survivor],
    );
    Ok(document(2.0 * PANEL_W, PANEL_H, &body))
}

/// One panel with a survivor curve per labelled series.
pub fn survival_curves_svg(title: &str, series: &[Series<'_>]) -> String {
    let mut body = String::new();
    panel(&mut body, 0.0, 0.0, title, "survival", series);
    document(PANEL_W, PANEL_H, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonparametric::{life_table, spells_from_counts};

    #[test]
    fn life_table_plot_has_two_panels() {
        let t = life_table(&spells_from_counts(&[(5, 1), (3, 1), (2, 0)])).unwrap();
        let svg = life_table_svg(&t, 1).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg, life_table_svg(&t, 1).unwrap());
        assert!(life_table_svg(&t, 0).is_err());
    }

    #[test]
    fn labels_are_escaped() {
        let s = Series {
            label: "a<b & c",
            points: vec![(0.0, 1.0), (1.0, 0.5)],
        };
        let t = Series {
            label: "d",
            points: vec![(0.0, 1.0), (1.0, 0.7)],
        };
        let svg = survival_curves_svg("curves", &[s, t]);
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
