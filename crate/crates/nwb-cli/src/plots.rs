//! Minimal static-image emission: RGB polyline charts and grayscale
//! heatmaps, encoded as PNG.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use nwb_core::{NwbError, Result};

const W: usize = 900;
const H: usize = 540;
const MARGIN: usize = 40;

fn encode_err(e: png::EncodingError) -> NwbError {
    NwbError::InvalidParameter(format!("png encoding: {e}"))
}

fn save_png(path: &Path, width: usize, height: usize, color: png::ColorType, pixels: &[u8]) -> Result<()> {
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(pixels).map_err(encode_err)?;
    Ok(())
}

fn put(pixels: &mut [u8], x: usize, y: usize, c: [u8; 3]) {
    if x < W && y < H {
        let at = (y * W + x) * 3;
        pixels[at..at + 3].copy_from_slice(&c);
    }
}

fn segment(pixels: &mut [u8], a: (usize, usize), b: (usize, usize), c: [u8; 3]) {
    let (x0, y0) = (a.0 as f64, a.1 as f64);
    let (x1, y1) = (b.0 as f64, b.1 as f64);
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        put(
            pixels,
            (x0 + (x1 - x0) * t).round() as usize,
            (y0 + (y1 - y0) * t).round() as usize,
            c,
        );
    }
}

/// One polyline per series, shared y-scale, plain axes.
pub fn line_chart(path: &Path, series: &[(&[f64], [u8; 3])]) -> Result<()> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut longest = 0usize;
    for (vals, _) in series {
        for v in *vals {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        longest = longest.max(vals.len());
    }
    if longest == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(NwbError::InvalidParameter("nothing to plot".into()));
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = (hi - lo) * 0.05;
    let (lo, hi) = (lo - pad, hi + pad);

    let mut pixels = vec![255u8; W * H * 3];
    let axis = [60u8, 60, 60];
    for y in MARGIN..=H - MARGIN {
        put(&mut pixels, MARGIN, y, axis);
    }
    for x in MARGIN..=W - MARGIN {
        put(&mut pixels, x, H - MARGIN, axis);
    }
    let map_y = |v: f64| -> usize {
        let frac = (v - lo) / (hi - lo);
        H - MARGIN - (frac * (H - 2 * MARGIN) as f64).round() as usize
    };
    for (vals, color) in series {
        let denom = vals.len().saturating_sub(1).max(1);
        let mut prev: Option<(usize, usize)> = None;
        for (i, v) in vals.iter().enumerate() {
            let x = MARGIN + (W - 2 * MARGIN) * i / denom;
            let point = (x, map_y(*v));
            match prev {
                Some(p) => segment(&mut pixels, p, point, *color),
                None => put(&mut pixels, point.0, point.1, *color),
            }
            prev = Some(point);
        }
    }
    save_png(path, W, H, png::ColorType::Rgb, &pixels)
}

/// Grayscale heatmap, one `cell`-pixel square per value, rows top to bottom.
pub fn heatmap(path: &Path, rows: &[Vec<f64>], cell: usize) -> Result<()> {
    let height = rows.len();
    let width = rows.iter().map(|r| r.len()).min().unwrap_or(0);
    if height == 0 || width == 0 || cell == 0 {
        return Err(NwbError::InvalidParameter("nothing to plot".into()));
    }
    let peak = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    let (pw, ph) = (width * cell, height * cell);
    let mut pixels = vec![0u8; pw * ph];
    for (r, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().take(width).enumerate() {
            let shade = (v.abs() * scale).round().min(255.0) as u8;
            for dy in 0..cell {
                let base = (r * cell + dy) * pw + c * cell;
                pixels[base..base + cell].fill(shade);
            }
        }
    }
    save_png(path, pw, ph, png::ColorType::Grayscale, &pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_and_heatmap_write_decodable_png() {
        let dir = tempfile::tempdir().unwrap();
        let line = dir.path().join("line.png");
        let vals: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        line_chart(&line, &[(&vals, [200, 60, 40]), (&vals[..50], [40, 60, 200])]).unwrap();
        let map = dir.path().join("map.png");
        heatmap(&map, &[vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 0.0]], 8).unwrap();
        for p in [&line, &map] {
            let decoder = png::Decoder::new(std::io::BufReader::new(File::open(p).unwrap()));
            let mut reader = decoder.read_info().unwrap();
            let mut buf = vec![0; reader.output_buffer_size().unwrap()];
            reader.next_frame(&mut buf).unwrap();
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(line_chart(&dir.path().join("x.png"), &[(&[], [0, 0, 0])]).is_err());
        assert!(heatmap(&dir.path().join("y.png"), &[], 4).is_err());
    }
}
