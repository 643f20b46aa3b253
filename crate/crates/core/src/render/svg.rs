//! Deterministic SVG choropleth rendering.
//!
//! Coordinates project equirectangularly (longitude/latitude scaled
//! linearly, latitude flipped) into a 1000-pixel-wide viewport; fills
//! interpolate linearly in RGB over the fixed score domain `[1, 10]`, so
//! the same score always maps to the same color regardless of the dataset.
//! Output is a pure function of the inputs — no timestamps, no randomness —
//! and renders byte-identically on every run.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::Feature;

/// Fixed score domain the color ramp spans.
pub const SCORE_DOMAIN: (f64, f64) = (1.0, 10.0);

/// Rendered width in pixels; height follows the data's aspect ratio.
const WIDTH: f64 = 1000.0;

/// An sRGB color.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    /// Linear interpolation toward `other`, per channel, `t` in `[0, 1]`.
    pub fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let channel = |a: u8, b: u8| -> u8 {
            (f64::from(a) + t * (f64::from(b) - f64::from(a))).round() as u8
        };
        Rgb(channel(self.0, other.0), channel(self.1, other.1), channel(self.2, other.2))
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

impl FromStr for Rgb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::InvalidGeometry(format!("{s:?} is not a #rrggbb color")));
        }
        let parse = |range: std::ops::Range<usize>| {
            u8::from_str_radix(&hex[range], 16).expect("validated hex digits")
        };
        Ok(Rgb(parse(0..2), parse(2..4), parse(4..6)))
    }
}

/// What to render: which score column, and the three colors of the ramp.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoroplethSpec {
    /// Score column whose values drive the fill.
    pub score_column: String,
    /// Fill at score 1.
    pub color_low: Rgb,
    /// Fill at score 10.
    pub color_high: Rgb,
    /// Fill for regions without a value in the score column.
    pub color_missing: Rgb,
}

impl ChoroplethSpec {
    /// Spec with the default blue-to-red ramp and grey for missing.
    pub fn new(score_column: impl Into<String>) -> Self {
        ChoroplethSpec {
            score_column: score_column.into(),
            color_low: Rgb(0x2c, 0x7b, 0xb6),
            color_high: Rgb(0xd7, 0x19, 0x1c),
            color_missing: Rgb(0xbd, 0xbd, 0xbd),
        }
    }

    /// Fill color for a score value; `None` or NaN falls back to the
    /// missing color, out-of-domain values clamp to the ramp ends.
    pub fn color_for(&self, score: Option<f64>) -> Rgb {
        match score {
            Some(value) if value.is_finite() => {
                let clamped = value.clamp(SCORE_DOMAIN.0, SCORE_DOMAIN.1);
                let t = (clamped - SCORE_DOMAIN.0) / (SCORE_DOMAIN.1 - SCORE_DOMAIN.0);
                self.color_low.lerp(self.color_high, t)
            }
            _ => self.color_missing,
        }
    }
}

/// Minimal XML text/attribute escaping.
fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Render features to an SVG string.
///
/// One `<path>` per feature, in input order, with the flat ring list drawn
/// as subpaths under the even-odd fill rule (holes render as holes without
/// nesting information).
pub fn render_svg_string(features: &[Feature], spec: &ChoroplethSpec) -> Result<String> {
    if features.is_empty() {
        return Err(Error::TooFewValues { needed: 1, got: 0 });
    }
    for feature in features {
        super::RegionGeometry {
            region_id: feature.region_id.clone(),
            rings: feature.rings.clone(),
        }
        .validate()?;
    }

    let mut lon = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lat = (f64::INFINITY, f64::NEG_INFINITY);
    for feature in features {
        for ring in &feature.rings {
            for &(x, y) in ring {
                lon = (lon.0.min(x), lon.1.max(x));
                lat = (lat.0.min(y), lat.1.max(y));
            }
        }
    }
    // Degenerate extents still render: give them a hair of width.
    let lon_span = (lon.1 - lon.0).max(1e-9);
    let lat_span = (lat.1 - lat.0).max(1e-9);
    let scale = WIDTH / lon_span;
    let height = (lat_span * scale).ceil().max(1.0);

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n",
    ));
    svg.push_str(&format!("  <title>{}</title>\n", escape(&spec.score_column)));
    for feature in features {
        let mut d = String::new();
        for ring in &feature.rings {
            for (i, &(x, y)) in ring.iter().enumerate() {
                let px = (x - lon.0) * scale;
                let py = (lat.1 - y) * scale;
                if i == 0 {
                    d.push_str(&format!("M {px:.3},{py:.3}"));
                } else {
                    d.push_str(&format!(" L {px:.3},{py:.3}"));
                }
            }
            d.push_str(" Z ");
        }
        let d = d.trim_end();
        let fill = spec.color_for(feature.scores.get(&spec.score_column).copied());
        svg.push_str(&format!(
            "  <path id=\"region-{}\" fill=\"{}\" fill-rule=\"evenodd\" stroke=\"#ffffff\" stroke-width=\"0.5\" d=\"{}\"/>\n",
            escape(&feature.region_id),
            fill,
            d
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Render features to an SVG file.
pub fn render_svg(features: &[Feature], spec: &ChoroplethSpec, path: &Path) -> Result<()> {
    let svg = render_svg_string(features, spec)?;
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
