//! Minimal SVG emitter: scatter points, polylines and disks on a shared
//! data frame. Coordinates are written with 12 significant digits.

use std::fmt::Write as _;

use num_complex::Complex64;

/// Rounds to 12 significant digits and prints the shortest decimal form.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    let s = format!("{rounded}");
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone)]
enum Item {
    Points {
        points: Vec<Complex64>,
        radius: f64,
        color: String,
    },
    Line {
        points: Vec<Complex64>,
        width: f64,
        color: String,
        dashed: bool,
    },
    Disk {
        center: Complex64,
        radius: f64,
        color: String,
    },
    Text {
        at: Complex64,
        text: String,
    },
}

#[derive(Debug, Clone)]
pub struct Panel {
    title: String,
    items: Vec<Item>,
}

impl Panel {
    pub fn new(title: impl Into<String>) -> Self {
        Panel {
            title: title.into(),
            items: Vec::new(),
        }
    }

    /// Markers of fixed screen radius.
    pub fn points(&mut self, points: &[Complex64], radius: f64, color: &str) -> &mut Self {
        self.items.push(Item::Points {
            points: points.to_vec(),
            radius,
            color: color.to_string(),
        });
        self
    }

    pub fn line(&mut self, points: &[Complex64], width: f64, color: &str) -> &mut Self {
        self.items.push(Item::Line {
            points: points.to_vec(),
            width,
            color: color.to_string(),
            dashed: false,
        });
        self
    }

    pub fn dashed(&mut self, points: &[Complex64], width: f64, color: &str) -> &mut Self {
        self.items.push(Item::Line {
            points: points.to_vec(),
            width,
            color: color.to_string(),
            dashed: true,
        });
        self
    }

    /// Disk with a radius in data units.
    pub fn disk(&mut self, center: Complex64, radius: f64, color: &str) -> &mut Self {
        self.items.push(Item::Disk {
            center,
            radius,
            color: color.to_string(),
        });
        self
    }

    pub fn label(&mut self, at: Complex64, text: &str) -> &mut Self {
        self.items.push(Item::Text {
            at,
            text: text.to_string(),
        });
        self
    }

    fn bounds(&self) -> Option<(f64, f64, f64, f64)> {
        let mut b: Option<(f64, f64, f64, f64)> = None;
        let mut add = |z: Complex64, pad: f64| {
            if !z.re.is_finite() || !z.im.is_finite() {
                return;
            }
            let (x0, x1, y0, y1) = b.unwrap_or((z.re, z.re, z.im, z.im));
            b = Some((x0.min(z.re - pad), x1.max(z.re + pad), y0.min(z.im - pad), y1.max(z.im + pad)));
        };
        for item in &self.items {
            match item {
                Item::Points { points, .. } | Item::Line { points, .. } => points.iter().for_each(|&z| add(z, 0.0)),
                Item::Disk { center, radius, .. } => add(*center, *radius),
                Item::Text { .. } => {}
            }
        }
        b
    }
}

/// A grid of panels sharing one cell size; each panel keeps its own aspect
/// ratio-preserving frame.
#[derive(Debug, Clone)]
pub struct Figure {
    panels: Vec<Panel>,
    columns: usize,
    cell: f64,
}

const MARGIN: f64 = 12.0;
const TITLE: f64 = 16.0;

impl Figure {
    pub fn single(panel: Panel, size: f64) -> Self {
        Figure {
            panels: vec![panel],
            columns: 1,
            cell: size,
        }
    }

    pub fn grid(panels: Vec<Panel>, columns: usize, cell: f64) -> Self {
        Figure {
            panels,
            columns: columns.max(1),
            cell,
        }
    }

    pub fn render(&self) -> String {
        let rows = self.panels.len().div_ceil(self.columns).max(1);
        let cols = self.columns.min(self.panels.len()).max(1);
        let width = cols as f64 * self.cell;
        let height = rows as f64 * (self.cell + TITLE);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            num(width),
            num(height),
            num(width),
            num(height)
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (i, panel) in self.panels.iter().enumerate() {
            let ox = (i % self.columns) as f64 * self.cell;
            let oy = (i / self.columns) as f64 * (self.cell + TITLE);
            self.render_panel(&mut out, panel, ox, oy);
        }
        out.push_str("</svg>\n");
        out
    }

    fn render_panel(&self, out: &mut String, panel: &Panel, ox: f64, oy: f64) {
        let _ = writeln!(out, "<g>");
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            num(ox + MARGIN),
            num(oy + TITLE - 4.0),
            escape(&panel.title)
        );
        let (x0, x1, y0, y1) = panel.bounds().unwrap_or((-1.0, 1.0, -1.0, 1.0));
        let span = (x1 - x0).max(y1 - y0).max(1e-12);
        let inner = self.cell - 2.0 * MARGIN;
        let scale = inner / span;
        let cx = 0.5 * (x0 + x1);
        let cy = 0.5 * (y0 + y1);
        let map = |z: Complex64| -> (f64, f64) {
            (
                ox + self.cell / 2.0 + (z.re - cx) * scale,
                oy + TITLE + self.cell / 2.0 - (z.im - cy) * scale,
            )
        };
        let _ = writeln!(
            out,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#cccccc"/>"##,
            num(ox + 2.0),
            num(oy + TITLE),
            num(self.cell - 4.0),
            num(self.cell - 4.0)
        );
        for item in &panel.items {
            match item {
                Item::Points { points, radius, color } => {
                    for &z in points {
                        if !z.re.is_finite() || !z.im.is_finite() {
                            continue;
                        }
                        let (x, y) = map(z);
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{}" cy="{}" r="{}" fill="{}"/>"#,
                            num(x),
                            num(y),
                            num(*radius),
                            color
                        );
                    }
                }
                Item::Line {
                    points,
                    width,
                    color,
                    dashed,
                } => {
                    if points.len() < 2 {
                        continue;
                    }
                    let coords: Vec<String> = points
                        .iter()
                        .map(|&z| {
                            let (x, y) = map(z);
                            format!("{},{}", num(x), num(y))
                        })
                        .collect();
                    let dash = if *dashed { r#" stroke-dasharray="4 3""# } else { "" };
                    let _ = writeln!(
                        out,
                        r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{}"{}/>"#,
                        coords.join(" "),
                        color,
                        num(*width),
                        dash
                    );
                }
                Item::Disk { center, radius, color } => {
                    let (x, y) = map(*center);
                    let _ = writeln!(
                        out,
                        r#"<circle cx="{}" cy="{}" r="{}" fill="{}" fill-opacity="0.25"/>"#,
                        num(x),
                        num(y),
                        num(radius * scale),
                        color
                    );
                }
                Item::Text { at, text } => {
                    let (x, y) = map(*at);
                    let _ = writeln!(
                        out,
                        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="9">{}</text>"#,
                        num(x),
                        num(y),
                        escape(text)
                    );
                }
            }
        }
        let _ = writeln!(out, "</g>");
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// CSV of labelled points, `series,x,y`.
pub fn points_csv(series: &[(&str, &[Complex64])]) -> String {
    let mut out = String::from("series,x,y\n");
    for (name, points) in series {
        for z in *points {
            let _ = writeln!(out, "{name},{:e},{:e}", z.re, z.im);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(num(0.1 + 0.2), "0.3");
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(-2.5), "-2.5");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(123456.7890123456), "123456.789012");
    }

    #[test]
    fn render_is_stable() {
        let mut p = Panel::new("a < b");
        p.points(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0)], 1.5, "black")
            .line(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], 1.0, "red")
            .disk(Complex64::new(0.5, 0.5), 0.1, "blue");
        let a = Figure::single(p.clone(), 200.0).render();
        let b = Figure::single(p, 200.0).render();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("a &lt; b"));
        assert_eq!(a.matches("<circle").count(), 3);
        assert!(a.contains("<polyline"));
    }

    #[test]
    fn grid_layout() {
        let panels: Vec<Panel> = (0..5).map(|i| Panel::new(format!("{i}"))).collect();
        let svg = Figure::grid(panels, 3, 100.0).render();
        assert!(svg.contains(r#"width="300""#));
        assert!(svg.contains(r#"height="232""#));
    }

    #[test]
    fn csv_rows() {
        let pts = [Complex64::new(1.0, -2.0)];
        let csv = points_csv(&[("s", &pts)]);
        assert_eq!(csv, "series,x,y\ns,1e0,-2e0\n");
    }
}
