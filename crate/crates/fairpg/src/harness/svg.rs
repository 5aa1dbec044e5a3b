//! Minimal static SVG charts; no runtime dependencies.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        body.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        body.push_str(&format!(
            "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
        ));
        body.push_str(&format!(
            "  <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(title)
        ));
        Canvas { body }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn plot_area() -> (f64, f64, f64, f64) {
    (
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM,
    )
}

fn axes(canvas: &mut Canvas, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = plot_area();
    canvas.body.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    canvas.body.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    canvas.body.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    canvas.body.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    ));
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = (hi - lo) * 0.08;
        (lo - pad, hi + pad)
    }
}

/// Multi-series line chart; each series is a name plus `(x, y)` points.
pub fn line_chart_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let mut canvas = Canvas::new(title);
    axes(&mut canvas, x_label, y_label);
    let (x0, y0, x1, y1) = plot_area();

    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    let (xlo, xhi) = nice_range(
        points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (ylo, yhi) = nice_range(
        points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = |x: f64| x0 + (x - xlo) / (xhi - xlo) * (x1 - x0);
    let sy = |y: f64| y1 - (y - ylo) / (yhi - ylo) * (y1 - y0);

    for tick in 0..=4 {
        let t = tick as f64 / 4.0;
        let xv = xlo + t * (xhi - xlo);
        let yv = ylo + t * (yhi - ylo);
        canvas.body.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            sx(xv),
            y1 + 16.0,
            fmt(xv)
        ));
        canvas.body.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            sy(yv) + 3.0,
            fmt(yv)
        ));
        canvas.body.push_str(&format!(
            "  <line x1=\"{x0}\" y1=\"{}\" x2=\"{x1}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            sy(yv),
            sy(yv)
        ));
    }

    for (idx, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{},{}", sx(x), sy(y))).collect();
            canvas.body.push_str(&format!(
                "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
                path.join(" ")
            ));
            for &(x, y) in pts {
                canvas.body.push_str(&format!(
                    "  <circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                    sx(x),
                    sy(y)
                ));
            }
        }
        let ly = y0 + 16.0 * idx as f64;
        canvas.body.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            x1 + 10.0,
            x1 + 30.0
        ));
        canvas.body.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            x1 + 36.0,
            ly + 4.0,
            escape(name)
        ));
    }
    canvas.finish()
}

/// Bar chart of bucket counts; bucket `i` covers
/// `[i * bucket_width, (i + 1) * bucket_width)`.
pub fn histogram_svg(title: &str, buckets: &[u64], bucket_width: f64) -> String {
    let mut canvas = Canvas::new(title);
    axes(&mut canvas, "confidence", "count");
    let (x0, _y0, x1, y1) = plot_area();
    let max = buckets.iter().copied().max().unwrap_or(0).max(1) as f64;
    let n = buckets.len().max(1) as f64;
    let bar_w = (x1 - x0) / n;
    for (i, &count) in buckets.iter().enumerate() {
        let h = (count as f64 / max) * (y1 - MARGIN_TOP);
        let bx = x0 + i as f64 * bar_w;
        canvas.body.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{h}\" fill=\"#1f77b4\" stroke=\"white\"/>\n",
            bx,
            y1 - h,
            bar_w
        ));
        if i % 4 == 0 {
            canvas.body.push_str(&format!(
                "  <text x=\"{bx}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                y1 + 16.0,
                fmt(i as f64 * bucket_width)
            ));
        }
    }
    canvas.finish()
}
