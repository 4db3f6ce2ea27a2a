//! Standalone SVG charts for the datasets in [`crate::aggregate`].
//!
//! Every coordinate is printed with three decimals and no renderer reads
//! clocks or randomness, so equal inputs give equal bytes.

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{BeeswarmData, DependenceData, ForceSegments, Importance};

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("nothing to plot")]
    EmptyInput,
    #[error("invalid chart style: {0}")]
    InvalidStyle(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartStyle {
    pub width: f64,
    pub height: f64,
    pub margin_top: f64,
    pub margin_right: f64,
    pub margin_bottom: f64,
    pub margin_left: f64,
    /// Fill for positive force segments and bars.
    pub positive_color: String,
    pub negative_color: String,
    /// Gradient endpoint for normalized feature value 0.
    pub low_color: String,
    /// Gradient endpoint for normalized feature value 1.
    pub high_color: String,
    pub font_family: String,
    pub font_size: f64,
    pub point_radius: f64,
}

impl Default for ChartStyle {
    fn default() -> Self {
        Self {
            width: 800.0,
            height: 500.0,
            margin_top: 30.0,
            margin_right: 90.0,
            margin_bottom: 60.0,
            margin_left: 200.0,
            positive_color: "#ff0051".into(),
            negative_color: "#008bfb".into(),
            low_color: "#008bfb".into(),
            high_color: "#ff0051".into(),
            font_family: "sans-serif".into(),
            font_size: 12.0,
            point_radius: 3.0,
        }
    }
}

/// Parses `#rrggbb`.
pub fn parse_hex(color: &str) -> Option<[u8; 3]> {
    let hex = color.strip_prefix('#')?;
    if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
    Some([byte(0)?, byte(2)?, byte(4)?])
}

impl ChartStyle {
    pub fn validate(&self) -> Result<(), RenderError> {
        let dims = [
            ("width", self.width),
            ("height", self.height),
            ("font_size", self.font_size),
            ("point_radius", self.point_radius),
        ];
        for (name, v) in dims {
            if !(v.is_finite() && v > 0.0) {
                return Err(RenderError::InvalidStyle(format!("{name} must be positive, got {v}")));
            }
        }
        let margins = [self.margin_top, self.margin_right, self.margin_bottom, self.margin_left];
        if margins.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(RenderError::InvalidStyle("margins must be finite and non-negative".into()));
        }
        if self.margin_left + self.margin_right >= self.width || self.margin_top + self.margin_bottom >= self.height {
            return Err(RenderError::InvalidStyle("margins leave no plot area".into()));
        }
        for (name, c) in [
            ("positive_color", &self.positive_color),
            ("negative_color", &self.negative_color),
            ("low_color", &self.low_color),
            ("high_color", &self.high_color),
        ] {
            if parse_hex(c).is_none() {
                return Err(RenderError::InvalidStyle(format!("{name} {c:?} is not a #rrggbb color")));
            }
        }
        if self.font_family.is_empty() || self.font_family.contains(['"', '<', '>', '&']) {
            return Err(RenderError::InvalidStyle(format!("font_family {:?} is not usable", self.font_family)));
        }
        Ok(())
    }

    fn plot_left(&self) -> f64 {
        self.margin_left
    }

    fn plot_right(&self) -> f64 {
        self.width - self.margin_right
    }

    fn plot_top(&self) -> f64 {
        self.margin_top
    }

    fn plot_bottom(&self) -> f64 {
        self.height - self.margin_bottom
    }

    /// Linear RGB blend from `low_color` (t = 0) to `high_color` (t = 1).
    pub fn gradient(&self, t: f64) -> String {
        let lo = parse_hex(&self.low_color).unwrap_or([0, 0, 0]);
        let hi = parse_hex(&self.high_color).unwrap_or([0, 0, 0]);
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
        let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        format!("#{:02x}{:02x}{:02x}", mix(lo[0], hi[0]), mix(lo[1], hi[1]), mix(lo[2], hi[2]))
    }
}

/// Three-decimal formatting with negative zero folded to zero.
pub fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Affine map from a data interval onto a pixel interval. A degenerate data
/// interval maps everything to the pixel midpoint.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        Self { lo, hi, px_lo, px_hi }
    }

    /// Data range widened by `pad` of its span on both sides.
    fn padded(lo: f64, hi: f64, pad: f64, px_lo: f64, px_hi: f64) -> Self {
        let span = hi - lo;
        Self::new(lo - pad * span, hi + pad * span, px_lo, px_hi)
    }

    fn degenerate(&self) -> bool {
        !(self.hi > self.lo)
    }

    fn map(&self, v: f64) -> f64 {
        if self.degenerate() {
            (self.px_lo + self.px_hi) / 2.0
        } else {
            self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
        }
    }

    /// Pixels per data unit (absolute); zero when degenerate.
    fn scale(&self) -> f64 {
        if self.degenerate() {
            0.0
        } else {
            ((self.px_hi - self.px_lo) / (self.hi - self.lo)).abs()
        }
    }

    /// Five evenly spaced tick values, or the single value when degenerate.
    fn ticks(&self) -> Vec<f64> {
        if self.degenerate() {
            vec![self.lo]
        } else {
            (0..5).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0).collect()
        }
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(style: &ChartStyle, title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="{f}" font-size="{fs}">"#,
            w = num(style.width),
            h = num(style.height),
            f = escape(&style.font_family),
            fs = num(style.font_size),
        );
        let _ = writeln!(body, "<title>{}</title>", escape(title));
        let _ = writeln!(body, r##"<rect class="background" x="0.000" y="0.000" width="{}" height="{}" fill="#ffffff"/>"##, num(style.width), num(style.height));
        Self { body }
    }

    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{stroke}" stroke-width="1.000"/>"#,
            num(x1),
            num(y1),
            num(x2),
            num(y2)
        );
    }

    fn text(&mut self, class: &str, x: f64, y: f64, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{}" y="{}" text-anchor="{anchor}">{}</text>"#,
            num(x),
            num(y),
            escape(content)
        );
    }

    fn rotated_text(&mut self, class: &str, x: f64, y: f64, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text class="{class}" x="{x}" y="{y}" text-anchor="middle" transform="rotate(-90 {x} {y})">{}</text>"#,
            escape(content),
            x = num(x),
            y = num(y),
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle class="point" cx="{}" cy="{}" r="{}" fill="{fill}"/>"#,
            num(cx),
            num(cy),
            num(r)
        );
    }

    /// Horizontal axis with ticks along `y`.
    fn x_axis(&mut self, axis: &Axis, y: f64, label: &str, style: &ChartStyle) {
        self.line("axis", axis.px_lo, y, axis.px_hi, y, "#333333");
        for t in axis.ticks() {
            let x = axis.map(t);
            self.line("tick", x, y, x, y + 4.0, "#333333");
            self.text("tick-label", x, y + 4.0 + style.font_size, "middle", &num(t));
        }
        self.text("axis-label", (axis.px_lo + axis.px_hi) / 2.0, y + 8.0 + 2.5 * style.font_size, "middle", label);
    }

    /// Vertical color bar on the right margin, low value at the bottom.
    fn color_bar(&mut self, style: &ChartStyle, label: &str) {
        let x = style.plot_right() + 20.0;
        let (top, bottom) = (style.plot_top(), style.plot_bottom());
        let _ = writeln!(
            self.body,
            r#"<defs><linearGradient id="value-gradient" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
            style.gradient(0.0),
            style.gradient(1.0)
        );
        let _ = writeln!(
            self.body,
            r#"<rect class="color-bar" x="{}" y="{}" width="8.000" height="{}" fill="url(#value-gradient)"/>"#,
            num(x),
            num(top),
            num(bottom - top)
        );
        self.text("color-bar-label", x + 4.0, top - 6.0, "middle", "High");
        self.text("color-bar-label", x + 4.0, bottom + style.font_size + 2.0, "middle", "Low");
        self.rotated_text("color-bar-title", x + 24.0, (top + bottom) / 2.0, label);
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Horizontal bars of mean `|φ|`, in ranking order from the top.
pub fn render_bar(ranking: &[Importance], style: &ChartStyle) -> Result<String, RenderError> {
    style.validate()?;
    if ranking.is_empty() {
        return Err(RenderError::EmptyInput);
    }
    let max = ranking.iter().map(|r| r.mean_abs_phi).fold(0.0, f64::max);
    let axis = Axis::new(0.0, max, style.plot_left(), style.plot_right());
    let row = (style.plot_bottom() - style.plot_top()) / ranking.len() as f64;
    let mut svg = Svg::new(style, "Global feature importance");
    for (k, r) in ranking.iter().enumerate() {
        let y = style.plot_top() + k as f64 * row;
        let w = if max > 0.0 { axis.map(r.mean_abs_phi) - axis.px_lo } else { 0.0 };
        let _ = writeln!(
            svg.body,
            r#"<rect class="bar" x="{}" y="{}" width="{}" height="{}" fill="{}"><title>{}</title></rect>"#,
            num(style.plot_left()),
            num(y + 0.15 * row),
            num(w),
            num(0.7 * row),
            style.positive_color,
            escape(&r.name)
        );
        let mid = y + 0.5 * row + 0.35 * style.font_size;
        svg.text("feature-label", style.plot_left() - 6.0, mid, "end", &r.name);
        svg.text("value-label", style.plot_left() + w + 4.0, mid, "start", &num(r.mean_abs_phi));
    }
    svg.x_axis(&axis, style.plot_bottom(), "mean(|SHAP value|)", style);
    Ok(svg.finish())
}

/// One circle per point, rows in data order, colored by normalized value.
pub fn render_beeswarm(data: &BeeswarmData, style: &ChartStyle) -> Result<String, RenderError> {
    style.validate()?;
    if data.rows.is_empty() || data.rows.iter().all(|r| r.points.is_empty()) {
        return Err(RenderError::EmptyInput);
    }
    let lo = data.phi_min.min(0.0);
    let hi = data.phi_max.max(0.0);
    let axis = Axis::padded(lo, hi, 0.05, style.plot_left(), style.plot_right());
    let row = (style.plot_bottom() - style.plot_top()) / data.rows.len() as f64;
    let r = style.point_radius;
    let max_jitter = data.rows.iter().flat_map(|row| row.points.iter().map(|p| p.jitter.abs())).fold(0.0, f64::max);
    // Neighbours in a stack sit one diameter apart unless the row is too thin.
    let step = if max_jitter > 0.0 { (2.0 * r).min((0.5 * row - r).max(0.0) / max_jitter) } else { 0.0 };
    let mut svg = Svg::new(style, "SHAP value summary");
    let zero = axis.map(0.0);
    svg.line("zero", zero, style.plot_top(), zero, style.plot_bottom(), "#999999");
    for (k, rw) in data.rows.iter().enumerate() {
        let centre = style.plot_top() + (k as f64 + 0.5) * row;
        svg.line("row-guide", style.plot_left(), centre, style.plot_right(), centre, "#eeeeee");
        svg.text("feature-label", style.plot_left() - 6.0, centre + 0.35 * style.font_size, "end", &rw.name);
        for p in &rw.points {
            svg.circle(axis.map(p.phi), centre + p.jitter * step, r, &style.gradient(p.color));
        }
    }
    svg.x_axis(&axis, style.plot_bottom(), "SHAP value (impact on anomaly score)", style);
    svg.color_bar(style, "Feature value");
    Ok(svg.finish())
}

/// Scatter of a feature's raw value against its `φ`, colored by the
/// interaction feature.
pub fn render_dependence(data: &DependenceData, style: &ChartStyle) -> Result<String, RenderError> {
    style.validate()?;
    if data.points.is_empty() {
        return Err(RenderError::EmptyInput);
    }
    let extent = |f: fn(&crate::aggregate::DependencePoint) -> f64| {
        data.points.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (xlo, xhi) = extent(|p| p.x);
    let (ylo, yhi) = extent(|p| p.phi);
    let xa = Axis::padded(xlo, xhi, 0.05, style.plot_left(), style.plot_right());
    let ya = Axis::padded(ylo, yhi, 0.05, style.plot_bottom(), style.plot_top());
    let mut svg = Svg::new(style, &format!("Dependence of {}", data.feature));
    svg.line("axis", style.plot_left(), style.plot_top(), style.plot_left(), style.plot_bottom(), "#333333");
    for t in ya.ticks() {
        let y = ya.map(t);
        svg.line("tick", style.plot_left() - 4.0, y, style.plot_left(), y, "#333333");
        svg.text("tick-label", style.plot_left() - 6.0, y + 0.35 * style.font_size, "end", &num(t));
    }
    svg.rotated_text(
        "axis-label",
        style.plot_left() - 70.0,
        (style.plot_top() + style.plot_bottom()) / 2.0,
        &format!("SHAP value for {}", data.feature),
    );
    for p in &data.points {
        svg.circle(xa.map(p.x), ya.map(p.phi), style.point_radius, &style.gradient(p.color));
    }
    svg.x_axis(&xa, style.plot_bottom(), &data.feature, style);
    svg.color_bar(style, &data.interaction);
    Ok(svg.finish())
}

/// Arrow band from the base value to `fx`.
///
/// Positive segments fill `[fx − P, fx]` and point right, largest next to
/// `fx`; negative segments fill `[fx, fx + N]` and point left. Each arrow's
/// horizontal extent is `|φ|` times the axis scale.
pub fn render_force(segments: &ForceSegments, style: &ChartStyle) -> Result<String, RenderError> {
    style.validate()?;
    let p = segments.total_positive();
    let n = -segments.total_negative();
    let (fx, base) = (segments.fx, segments.base);
    let lo = (fx - p).min(base).min(fx);
    let hi = (fx + n).max(base).max(fx);
    let axis = Axis::padded(lo, hi, 0.1, style.plot_left(), style.plot_right());
    let scale = axis.scale();
    let band_top = style.plot_top() + 0.35 * (style.plot_bottom() - style.plot_top());
    let band_h = 24.0;
    let mid = band_top + band_h / 2.0;
    let tip = 6.0_f64;
    let mut svg = Svg::new(style, "Force plot");

    let draw = |svg: &mut Svg, start: f64, width: f64, pointing_right: bool, fill: &str, label: &str, k: usize| {
        let t = tip.min(width);
        let (y0, y1) = (band_top, band_top + band_h);
        let pts = if pointing_right {
            // notch at the left edge, point at the right
            [(start, y0), (start + width - t, y0), (start + width, mid), (start + width - t, y1), (start, y1), (start + t, mid)]
        } else {
            [(start + width, y0), (start + t, y0), (start, mid), (start + t, y1), (start + width, y1), (start + width - t, mid)]
        };
        let points: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
        let class = if pointing_right { "force positive" } else { "force negative" };
        let _ = writeln!(
            svg.body,
            r##"<polygon class="{class}" points="{}" fill="{fill}" stroke="#ffffff" stroke-width="0.500"><title>{}</title></polygon>"##,
            points.join(" "),
            escape(label)
        );
        // Stagger labels over three rows so neighbours rarely collide.
        let ly = band_top + band_h + style.font_size * (1.4 + 1.2 * (k % 3) as f64);
        svg.text("segment-label", start + width / 2.0, ly, "middle", label);
    };

    let mut right = axis.map(fx);
    for (k, s) in segments.positive.iter().enumerate() {
        let w = s.phi.abs() * scale;
        draw(&mut svg, right - w, w, true, &style.positive_color, &format!("{} = {}", s.name, num(s.summary_value)), k);
        right -= w;
    }
    let mut left = axis.map(fx);
    for (k, s) in segments.negative.iter().enumerate() {
        let w = s.phi.abs() * scale;
        draw(&mut svg, left, w, false, &style.negative_color, &format!("{} = {}", s.name, num(s.summary_value)), k + 1);
        left += w;
    }

    let bx = axis.map(base);
    svg.line("base", bx, band_top - 22.0, bx, band_top + band_h, "#555555");
    svg.text("base-label", bx, band_top - 26.0, "middle", "base value");
    svg.text("base-value", bx, band_top - 26.0 - style.font_size * 1.2, "middle", &num(base));
    let fxx = axis.map(fx);
    svg.line("fx", fxx, band_top - 8.0, fxx, band_top, "#000000");
    svg.text("fx-label", fxx, band_top - 10.0, "middle", &format!("f(x) = {}", num(fx)));
    let ay = style.plot_bottom();
    svg.x_axis(&axis, ay, "anomaly score", style);
    Ok(svg.finish())
}
