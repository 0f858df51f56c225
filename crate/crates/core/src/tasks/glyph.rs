//! Seeded stroke renderer for digit and operator glyphs.

use ntpt_engine::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{IMAGE_PIXELS, IMAGE_SIDE, NUM_SYMBOLS};

type Stroke = Vec<(f64, f64)>;

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64, points: usize) -> Stroke {
    (0..=points)
        .map(|i| {
            let t = from + (to - from) * i as f64 / points as f64;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

/// Polylines of each symbol in a unit box, x to the right and y downward.
fn strokes(symbol: usize) -> Vec<Stroke> {
    use std::f64::consts::PI;
    let line = |pts: &[(f64, f64)]| pts.to_vec();
    match symbol {
        0 => vec![ellipse(0.5, 0.5, 0.36, 0.48, 0.0, 2.0 * PI, 16)],
        1 => vec![line(&[(0.3, 0.2), (0.55, 0.0), (0.55, 1.0)])],
        2 => vec![line(&[(0.05, 0.25), (0.25, 0.02), (0.75, 0.02), (0.95, 0.25), (0.05, 1.0), (0.95, 1.0)])],
        3 => vec![line(&[(0.05, 0.0), (0.95, 0.0), (0.45, 0.42), (0.95, 0.68), (0.65, 1.0), (0.05, 0.92)])],
        4 => vec![line(&[(0.7, 1.0), (0.7, 0.0), (0.0, 0.65), (1.0, 0.65)])],
        5 => vec![line(&[(0.95, 0.0), (0.12, 0.0), (0.05, 0.45), (0.7, 0.4), (0.98, 0.7), (0.7, 1.0), (0.02, 0.95)])],
        6 => vec![line(&[
            (0.9, 0.02),
            (0.3, 0.2),
            (0.02, 0.7),
            (0.3, 1.0),
            (0.8, 0.95),
            (0.97, 0.7),
            (0.6, 0.48),
            (0.1, 0.62),
        ])],
        7 => vec![line(&[(0.0, 0.0), (1.0, 0.0), (0.35, 1.0)])],
        8 => vec![
            ellipse(0.5, 0.24, 0.3, 0.23, 0.0, 2.0 * PI, 12),
            ellipse(0.5, 0.73, 0.38, 0.27, 0.0, 2.0 * PI, 14),
        ],
        9 => vec![ellipse(0.48, 0.3, 0.36, 0.29, 0.0, 2.0 * PI, 14), line(&[(0.84, 0.3), (0.62, 1.0)])],
        10 => vec![line(&[(0.5, 0.08), (0.5, 0.92)]), line(&[(0.08, 0.5), (0.92, 0.5)])],
        11 => vec![line(&[(0.08, 0.5), (0.92, 0.5)])],
        12 => vec![line(&[(0.15, 0.15), (0.85, 0.85)]), line(&[(0.85, 0.15), (0.15, 0.85)])],
        13 => vec![
            line(&[(0.08, 0.5), (0.92, 0.5)]),
            ellipse(0.5, 0.18, 0.07, 0.07, 0.0, 2.0 * PI, 6),
            ellipse(0.5, 0.82, 0.07, 0.07, 0.0, 2.0 * PI, 6),
        ],
        _ => panic!("symbol {symbol} out of range"),
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// How much each rendered glyph varies. `jitter` scales every geometric
/// perturbation; `noise` is the standard deviation of the pixel noise.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlyphStyle {
    pub jitter: f64,
    pub noise: f64,
}

impl Default for GlyphStyle {
    fn default() -> Self {
        GlyphStyle { jitter: 1.0, noise: 0.05 }
    }
}

/// Render `symbol` (0-9 digits, 10-13 operators) as a `[784]` image in
/// `[0, 1]`. The same `(symbol, seed)` always gives the same image.
///
/// Jitter per seed: translation within 2 pixels, rotation within 10 degrees,
/// small scale and vertex perturbations, stroke width, and Gaussian pixel
/// noise with standard deviation 0.05.
pub fn render_glyph(symbol: usize, seed: u64) -> Tensor {
    render_glyph_styled(symbol, seed, GlyphStyle::default())
}

/// [`render_glyph`] with the perturbation ranges scaled by `style.jitter`
/// and pixel noise `style.noise`.
pub fn render_glyph_styled(symbol: usize, seed: u64, style: GlyphStyle) -> Tensor {
    assert!(symbol < NUM_SYMBOLS, "symbol {symbol} out of range");
    let j = style.jitter;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ symbol as u64);
    let angle = rng.gen_range(-10.0 * j..10.0 * j).to_radians();
    let (tx, ty) = (rng.gen_range(-2.0 * j..2.0 * j), rng.gen_range(-2.0 * j..2.0 * j));
    let scale = 17.0 * rng.gen_range(1.0 - 0.1 * j..1.0 + 0.1 * j);
    let aspect = rng.gen_range(0.85..1.1);
    let half_width = rng.gen_range(0.9..1.6);
    let wobble = 0.04 * j;
    let (sin, cos) = angle.sin_cos();
    let centre = IMAGE_SIDE as f64 / 2.0;

    let strokes: Vec<Stroke> = strokes(symbol)
        .into_iter()
        .map(|s| {
            s.into_iter()
                .map(|(x, y)| {
                    let x = (x + rng.gen_range(-wobble..wobble) - 0.5) * scale * aspect;
                    let y = (y + rng.gen_range(-wobble..wobble) - 0.5) * scale;
                    (centre + tx + cos * x - sin * y, centre + ty + sin * x + cos * y)
                })
                .collect()
        })
        .collect();

    let noise = Normal::new(0.0, style.noise).expect("valid sigma");
    let mut data = vec![0.0; IMAGE_PIXELS];
    for (i, px) in data.iter_mut().enumerate() {
        let p = ((i % IMAGE_SIDE) as f64 + 0.5, (i / IMAGE_SIDE) as f64 + 0.5);
        let d = strokes
            .iter()
            .flat_map(|s| s.windows(2).map(move |w| segment_distance(p, w[0], w[1])))
            .fold(f64::INFINITY, f64::min);
        let ink = (half_width - d + 0.5).clamp(0.0, 1.0);
        *px = (ink + noise.sample(&mut rng)).clamp(0.0, 1.0);
    }
    Tensor::new([IMAGE_PIXELS], data).expect("shape")
}

/// Text rendering of an image for debugging.
pub fn ascii(image: &[f64]) -> String {
    let mut s = String::new();
    for row in image.chunks(IMAGE_SIDE) {
        s.extend(row.iter().map(|&v| if v > 0.66 { '#' } else if v > 0.33 { '+' } else { '.' }));
        s.push('\n');
    }
    s
}
