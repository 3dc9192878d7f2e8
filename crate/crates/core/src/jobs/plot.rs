//! Minimal raster plotting for executor figures, encoded as PNG.

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];
pub const BLUE: Rgb = [31, 119, 180];
pub const BAND: Rgb = [174, 199, 232];
pub const RED: Rgb = [214, 39, 40];
pub const GREY: Rgb = [200, 200, 200];

// 3x5 glyphs, one row per u8 with the low three bits used.
fn glyph(c: char) -> Option<[u8; 5]> {
    Some(match c {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '.' => [0, 0, 0, 0, 2],
        '-' => [0, 0, 7, 0, 0],
        ' ' => [0, 0, 0, 0, 0],
        _ => return None,
    })
}

pub struct Canvas {
    pub width: u32,
    pub height: u32,
    pixels: Vec<u8>,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![255; (width * height * 3) as usize],
        }
    }

    pub fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height {
            let i = ((y as u32 * self.width + x as u32) * 3) as usize;
            self.pixels[i..i + 3].copy_from_slice(&c);
        }
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn fill_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb) {
        for y in y0.min(y1)..=y0.max(y1) {
            for x in x0.min(x1)..=x0.max(x1) {
                self.set(x, y, c);
            }
        }
    }

    pub fn line(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, c: Rgb) {
        let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as i64).max(1);
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            self.set(
                (x0 + t * (x1 - x0)).round() as i64,
                (y0 + t * (y1 - y0)).round() as i64,
                c,
            );
        }
    }

    pub fn text(&mut self, x: i64, y: i64, s: &str, c: Rgb) {
        for (i, ch) in s.chars().enumerate() {
            if let Some(rows) = glyph(ch) {
                for (dy, row) in rows.iter().enumerate() {
                    for dx in 0..3 {
                        if row & (4 >> dx) != 0 {
                            self.set(x + i as i64 * 4 + dx, y + dy as i64, c);
                        }
                    }
                }
            }
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().expect("png header to memory");
            w.write_image_data(&self.pixels)
                .expect("png data to memory");
        }
        out
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Plot area with data-space mapping.
pub struct Axes {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl Axes {
    pub fn new(canvas: &Canvas, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self {
            left: 40.0,
            top: 10.0,
            right: canvas.width as f64 - 10.0,
            bottom: canvas.height as f64 - 20.0,
            x_range: pad(x_range),
            y_range: pad(y_range),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.left
            + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * (self.right - self.left)
    }

    pub fn py(&self, y: f64) -> f64 {
        self.bottom
            - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * (self.bottom - self.top)
    }

    pub fn draw_frame(&self, c: &mut Canvas) {
        c.line(self.left, self.bottom, self.right, self.bottom, BLACK);
        c.line(self.left, self.top, self.left, self.bottom, BLACK);
        for i in 0..=4 {
            let fx = self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / 4.0;
            let fy = self.y_range.0 + (self.y_range.1 - self.y_range.0) * i as f64 / 4.0;
            let (x, y) = (self.px(fx), self.py(fy));
            c.line(x, self.bottom, x, self.bottom + 3.0, BLACK);
            c.line(self.left - 3.0, y, self.left, y, BLACK);
            c.text(x as i64 - 6, self.bottom as i64 + 6, &fmt_tick(fx), BLACK);
            c.text(2, y as i64 - 2, &fmt_tick(fy), BLACK);
        }
    }

    pub fn polyline(&self, c: &mut Canvas, xs: &[f64], ys: &[f64], color: Rgb) {
        for i in 1..xs.len().min(ys.len()) {
            c.line(
                self.px(xs[i - 1]),
                self.py(ys[i - 1]),
                self.px(xs[i]),
                self.py(ys[i]),
                color,
            );
        }
    }

    /// Shades between `lo` and `hi` column by column.
    pub fn band(&self, c: &mut Canvas, xs: &[f64], lo: &[f64], hi: &[f64], color: Rgb) {
        for i in 1..xs.len() {
            let (x0, x1) = (self.px(xs[i - 1]), self.px(xs[i]));
            let cols = (x1 - x0).ceil().max(1.0) as i64;
            for s in 0..=cols {
                let t = s as f64 / cols as f64;
                let x = x0 + t * (x1 - x0);
                let yl = self.py(lo[i - 1] + t * (lo[i] - lo[i - 1]));
                let yh = self.py(hi[i - 1] + t * (hi[i] - hi[i - 1]));
                c.line(x, yl, x, yh, color);
            }
        }
    }
}

/// Line chart with an optional shaded band.
pub fn line_chart(xs: &[f64], ys: &[f64], band: Option<(&[f64], &[f64])>) -> Vec<u8> {
    let mut c = Canvas::new(480, 320);
    let mut all: Vec<f64> = ys.to_vec();
    if let Some((lo, hi)) = band {
        all.extend_from_slice(lo);
        all.extend_from_slice(hi);
    }
    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
    let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xr = (
        xs.first().copied().unwrap_or(0.0),
        xs.last().copied().unwrap_or(1.0),
    );
    let ax = Axes::new(&c, xr, (min, max));
    if let Some((lo, hi)) = band {
        ax.band(&mut c, xs, lo, hi, BAND);
    }
    ax.polyline(&mut c, xs, ys, BLUE);
    ax.draw_frame(&mut c);
    c.to_png()
}

/// Blue-to-red colour for `t` in [0, 1].
pub fn heat(t: f64) -> Rgb {
    let t = t.clamp(0.0, 1.0);
    [
        (255.0 * t) as u8,
        (80.0 * (1.0 - (2.0 * t - 1.0).abs())) as u8,
        (255.0 * (1.0 - t)) as u8,
    ]
}
