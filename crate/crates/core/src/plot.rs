//! SVG overlay plots of the three densities: target p, closed-form pi, and
//! the empirical estimate pi_hat (drawn as a step plot over its bins).

use crate::error::{Error, Result};

const FULL_HEADER: &str = "bin_left,bin_right,target_density,closed_form_density,empirical_density";
const SHORT_HEADER: &str = "bin_left,bin_right,target_density,closed_form_density";

/// Parsed density CSV. `empirical` is absent when the CSV carries only the
/// two analytic columns.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub target: Vec<f64>,
    pub closed: Vec<f64>,
    pub empirical: Option<Vec<f64>>,
}

impl CsvTable {
    /// Common bin width; errors when bins are uneven.
    pub fn width(&self) -> Result<f64> {
        let w = self.right[0] - self.left[0];
        for (l, r) in self.left.iter().zip(&self.right) {
            if ((r - l) - w).abs() > 1e-9 * w.abs() {
                return Err(Error::Malformed("uneven bin widths in CSV".into()));
            }
        }
        Ok(w)
    }
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty CSV".into()))?;
    let has_empirical = match header.trim_end() {
        FULL_HEADER => true,
        SHORT_HEADER => false,
        other => {
            return Err(Error::Malformed(format!("unexpected CSV header '{other}'")));
        }
    };
    let n_cols = if has_empirical { 5 } else { 4 };
    let mut table = CsvTable {
        left: Vec::new(),
        right: Vec::new(),
        target: Vec::new(),
        closed: Vec::new(),
        empirical: has_empirical.then(Vec::new),
    };
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("row {}: bad number '{s}'", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        if fields.len() != n_cols {
            return Err(Error::Malformed(format!(
                "row {}: expected {n_cols} columns, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        table.left.push(fields[0]);
        table.right.push(fields[1]);
        table.target.push(fields[2]);
        table.closed.push(fields[3]);
        if let Some(e) = &mut table.empirical {
            e.push(fields[4]);
        }
    }
    if table.left.is_empty() {
        return Err(Error::Malformed("CSV contains no data rows".into()));
    }
    Ok(table)
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const MARGIN_L: f64 = 55.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 15.0;
const MARGIN_B: f64 = 40.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_hi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_lo) / (self.x_hi - self.x_lo) * (W - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN_B - y / self.y_hi * (H - MARGIN_T - MARGIN_B)
    }
}

fn polyline(frame: &Frame, points: &[(f64, f64)], color: &str, label: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
        .collect();
    format!(
        "<polyline class=\"series\" data-label=\"{label}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Render the overlay figure. Emits one `class="series"` polyline per
/// available column; a missing empirical column degrades to two series with
/// a warning on the diagnostics stream.
pub fn render_svg(table: &CsvTable) -> Result<String> {
    let n = table.left.len();
    let centers: Vec<f64> = table
        .left
        .iter()
        .zip(&table.right)
        .map(|(l, r)| 0.5 * (l + r))
        .collect();

    let mut y_hi = 0f64;
    for col in [&table.target, &table.closed] {
        y_hi = col.iter().cloned().fold(y_hi, f64::max);
    }
    if let Some(e) = &table.empirical {
        y_hi = e.iter().cloned().fold(y_hi, f64::max);
    }
    if !(y_hi > 0.0) || y_hi.is_infinite() {
        return Err(Error::Malformed(
            "CSV densities are empty or non-finite".into(),
        ));
    }
    let frame = Frame {
        x_lo: table.left[0],
        x_hi: table.right[n - 1],
        y_hi: y_hi * 1.05,
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes with ticks.
    svg.push_str(&format!(
        "<line x1=\"{l:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n<line x1=\"{l:.2}\" y1=\"{t:.2}\" x2=\"{l:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        r = W - MARGIN_R,
        t = MARGIN_T,
        b = H - MARGIN_B
    ));
    let x_span = frame.x_hi - frame.x_lo;
    let x_tick = nice_tick(x_span / 8.0);
    let mut i = (frame.x_lo / x_tick).ceil() as i64;
    while i as f64 * x_tick <= frame.x_hi + 1e-12 {
        let x = i as f64 * x_tick;
        let px = frame.px(x);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{b:.2}\" x2=\"{px:.2}\" y2=\"{b2:.2}\" stroke=\"black\"/>\n<text x=\"{px:.2}\" y=\"{ty:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            tick_label(x),
            b = H - MARGIN_B,
            b2 = H - MARGIN_B + 5.0,
            ty = H - MARGIN_B + 18.0,
        ));
        i += 1;
    }
    let y_tick = nice_tick(frame.y_hi / 6.0);
    let mut j = 0i64;
    while j as f64 * y_tick <= frame.y_hi + 1e-12 {
        let y = j as f64 * y_tick;
        let py = frame.py(y);
        svg.push_str(&format!(
            "<line x1=\"{l2:.2}\" y1=\"{py:.2}\" x2=\"{l:.2}\" y2=\"{py:.2}\" stroke=\"black\"/>\n<text x=\"{tx:.2}\" y=\"{ty:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            tick_label(y),
            l = MARGIN_L,
            l2 = MARGIN_L - 5.0,
            tx = MARGIN_L - 8.0,
            ty = py + 4.0,
        ));
        j += 1;
    }

    let target_pts: Vec<(f64, f64)> = centers
        .iter()
        .zip(&table.target)
        .map(|(&x, &y)| (x, y))
        .collect();
    svg.push_str(&polyline(&frame, &target_pts, "#1f77b4", "p"));
    let closed_pts: Vec<(f64, f64)> = centers
        .iter()
        .zip(&table.closed)
        .map(|(&x, &y)| (x, y))
        .collect();
    svg.push_str(&polyline(&frame, &closed_pts, "#d62728", "pi"));

    if let Some(emp) = &table.empirical {
        // Step plot: horizontal segment across each bin.
        let mut pts = Vec::with_capacity(2 * n);
        for i in 0..n {
            pts.push((table.left[i], emp[i]));
            pts.push((table.right[i], emp[i]));
        }
        svg.push_str(&polyline(&frame, &pts, "#2ca02c", "pi_hat"));
    } else {
        log::warn!("empirical column absent; plotting 2 series only");
    }

    // Legend.
    let entries: [(&str, &str); 3] = [("p", "#1f77b4"), ("pi", "#d62728"), ("pi_hat", "#2ca02c")];
    let n_entries = if table.empirical.is_some() { 3 } else { 2 };
    for (i, (label, color)) in entries.iter().take(n_entries).enumerate() {
        let ly = MARGIN_T + 12.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{ly:.2}\" x2=\"{x2:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n<text x=\"{tx:.2}\" y=\"{ty:.2}\" font-size=\"12\">{label}</text>\n",
            x1 = W - MARGIN_R - 90.0,
            x2 = W - MARGIN_R - 70.0,
            tx = W - MARGIN_R - 64.0,
            ty = ly + 4.0,
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.6}");
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() || trimmed == "-" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

fn nice_tick(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.abs().log10().floor());
    let frac = raw / mag;
    let nice = if frac < 1.5 {
        1.0
    } else if frac < 3.5 {
        2.0
    } else if frac < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "bin_left,bin_right,target_density,closed_form_density,empirical_density\n\
0.0,0.5,0.2,0.3,0.25\n\
0.5,1.0,0.6,0.5,0.55\n\
1.0,1.5,0.2,0.2,0.2\n";

    #[test]
    fn toy_csv_has_three_series() {
        let table = parse_csv(TOY).unwrap();
        let svg = render_svg(&table).unwrap();
        assert_eq!(svg.matches("class=\"series\"").count(), 3);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn legend_labels_fixed() {
        let svg = render_svg(&parse_csv(TOY).unwrap()).unwrap();
        for label in [">p<", ">pi<", ">pi_hat<"] {
            assert!(svg.contains(label), "missing legend label {label}");
        }
    }

    #[test]
    fn missing_empirical_column_degrades_to_two_series() {
        let short = "bin_left,bin_right,target_density,closed_form_density\n\
0.0,0.5,0.2,0.3\n0.5,1.0,0.6,0.5\n";
        let table = parse_csv(short).unwrap();
        assert!(table.empirical.is_none());
        let svg = render_svg(&table).unwrap();
        assert_eq!(svg.matches("class=\"series\"").count(), 2);
        assert!(!svg.contains(">pi_hat<"));
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b,c\n1,2,3\n").is_err());
        assert!(parse_csv(&TOY.replace("0.25", "abc")).is_err());
        let missing_field =
            "bin_left,bin_right,target_density,closed_form_density,empirical_density\n1,2,3,4\n";
        assert!(parse_csv(missing_field).is_err());
        let no_rows = "bin_left,bin_right,target_density,closed_form_density,empirical_density\n";
        assert!(parse_csv(no_rows).is_err());
    }

    #[test]
    fn width_detects_uneven_bins() {
        let table = parse_csv(TOY).unwrap();
        assert!((table.width().unwrap() - 0.5).abs() < 1e-12);
        let uneven = "bin_left,bin_right,target_density,closed_form_density,empirical_density\n\
0.0,0.5,0.2,0.3,0.25\n0.5,1.2,0.6,0.5,0.55\n";
        assert!(parse_csv(uneven).unwrap().width().is_err());
    }
}
