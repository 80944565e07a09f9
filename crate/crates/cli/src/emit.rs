//! CSV and SVG emitters with deterministic metadata headers.
//!
//! Every artifact starts with comment lines carrying the tool version, the
//! seed, and the citations of any presets involved — never a timestamp —
//! so reruns with identical configuration are byte-identical.

use std::fs;
use std::path::Path;

use crate::error::{CliError, Result};

/// Header material shared by all artifacts of one pipeline run.
#[derive(Debug, Clone, Default)]
pub struct Meta {
    pub command: String,
    pub seed: u64,
    pub citations: Vec<String>,
}

impl Meta {
    pub fn new(command: &str, seed: u64) -> Meta {
        Meta {
            command: command.to_string(),
            seed,
            citations: Vec::new(),
        }
    }

    pub fn cite(&mut self, citation: &str) {
        let c = citation.to_string();
        if !self.citations.contains(&c) {
            self.citations.push(c);
        }
    }

    fn comment_lines(&self, prefix: &str) -> String {
        let mut out = format!(
            "{prefix} polarforge {}\n{prefix} command: {}\n{prefix} seed: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.seed
        );
        for c in &self.citations {
            out.push_str(&format!("{prefix} citation: {c}\n"));
        }
        out
    }
}

/// Write a CSV artifact: metadata comments, extra comment notes, a header
/// row, then data rows.
pub fn write_csv(
    path: &Path,
    meta: &Meta,
    notes: &[String],
    header: &str,
    rows: &[String],
) -> Result<()> {
    let mut text = meta.comment_lines("#");
    for note in notes {
        text.push_str(&format!("# {note}\n"));
    }
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_file(path, &text)
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One labeled polyline of a region figure, in (β′, 1/μ′) coordinates.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Dashed stroke marks reference curves.
    pub dashed: bool,
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

const W: f64 = 640.0;
const H: f64 = 480.0;
const X_MAX: f64 = 1.05;
const Y_MAX: f64 = 0.55;

fn px(x: f64) -> f64 {
    60.0 + x / X_MAX * (W - 90.0)
}

fn py(y: f64) -> f64 {
    H - 50.0 - y / Y_MAX * (H - 90.0)
}

fn poly(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Render a fixed-template region figure: axes, the reference triangle
/// with vertices (0, 1/2), (0, 0), (1, 0), the labeled series, a legend.
pub fn render_region_svg(title: &str, series: &[Series], meta: &Meta) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str("<!--\n");
    s.push_str(&meta.comment_lines(" "));
    s.push_str("-->\n");
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    ));

    // Axes with ticks.
    s.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        px(0.0),
        py(0.0),
        px(X_MAX),
        py(0.0)
    ));
    s.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        px(0.0),
        py(0.0),
        px(0.0),
        py(Y_MAX)
    ));
    for j in 0..=10 {
        let x = j as f64 / 10.0;
        s.push_str(&format!(
            "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"black\"/>\n\
             <text x=\"{0:.2}\" y=\"{3:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"middle\">{4}</text>\n",
            px(x),
            py(0.0),
            py(0.0) + 4.0,
            py(0.0) + 16.0,
            x
        ));
    }
    for j in 0..=5 {
        let y = j as f64 / 10.0;
        s.push_str(&format!(
            "<line x1=\"{1:.2}\" y1=\"{0:.2}\" x2=\"{2:.2}\" y2=\"{0:.2}\" stroke=\"black\"/>\n\
             <text x=\"{3:.2}\" y=\"{4:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
             text-anchor=\"end\">{5}</text>\n",
            py(y),
            px(0.0) - 4.0,
            px(0.0),
            px(0.0) - 7.0,
            py(y) + 3.0,
            y
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">beta'</text>\n",
        px(0.55),
        py(0.0) + 34.0
    ));
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 {0:.2} {1:.2})\">1/mu'</text>\n",
        px(0.0) - 40.0,
        py(0.275)
    ));

    // The moderate-deviations reference triangle.
    s.push_str(&format!(
        "<polygon points=\"{}\" fill=\"none\" stroke=\"#999999\" \
         stroke-dasharray=\"3,3\"/>\n",
        poly(&[(0.0, 0.5), (0.0, 0.0), (1.0, 0.0)])
    ));

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if ser.dashed {
            " stroke-dasharray=\"6,3\""
        } else {
            ""
        };
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
             stroke-width=\"1.5\"{dash}/>\n",
            poly(&ser.points)
        ));
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{color}\">{}</text>\n",
            px(0.58),
            50.0 + 16.0 * i as f64,
            ser.label
        ));
    }
    s.push_str("</svg>\n");
    s
}
