use super::{ImageEmbedding, SegmentationBackend};
use crate::error::{Error, Result};
use crate::geo::GeoRaster;
use crate::mask::MaskLogits;
use crate::prompts::PromptPoint;

/// Deterministic stand-in for a foundation model: every pixel takes the
/// label of its nearest prompt. Image content is ignored.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl SegmentationBackend for OracleBackend {
    fn encode(&self, image: &GeoRaster) -> Result<ImageEmbedding> {
        Ok(ImageEmbedding::new(image.width(), image.height(), ()))
    }

    fn decode(&self, e: &ImageEmbedding, points: &[PromptPoint], _prev: Option<&MaskLogits>) -> Result<MaskLogits> {
        oracle_decode(e.width, e.height, points)
    }
}

/// Nearest-prompt classification: logit +1 where the nearest point (squared
/// Euclidean distance in pixels, ties to the smallest `index`) is positive,
/// -1 otherwise.
pub fn oracle_decode(width: usize, height: usize, points: &[PromptPoint]) -> Result<MaskLogits> {
    if points.is_empty() {
        return Err(Error::NoPoints);
    }
    let mut sorted: Vec<&PromptPoint> = points.iter().collect();
    sorted.sort_by_key(|p| (p.col, p.index));

    let mut out = vec![0f32; width * height];
    let mut cands: Vec<Cand> = Vec::with_capacity(sorted.len());
    let mut hull: Vec<(Cand, i64)> = Vec::with_capacity(sorted.len());
    for r in 0..height {
        // best point per column at this row
        cands.clear();
        for p in &sorted {
            let dy = r as i64 - p.row as i64;
            let c = Cand {
                col: p.col as i64,
                w: dy * dy,
                index: p.index,
                positive: p.label.is_positive(),
            };
            match cands.last_mut() {
                Some(last) if last.col == c.col => {
                    if (c.w, c.index) < (last.w, last.index) {
                        *last = c;
                    }
                }
                _ => cands.push(c),
            }
        }

        // lower envelope of (x - col)^2 + w; each entry wins from its start
        hull.clear();
        for &c in &cands {
            let mut start = i64::MIN;
            while let Some(&(top, top_start)) = hull.last() {
                let x0 = takeover(&top, &c);
                if x0 <= top_start {
                    hull.pop();
                } else {
                    start = x0;
                    break;
                }
            }
            hull.push((c, start));
        }

        let row = &mut out[r * width..(r + 1) * width];
        let mut k = 0;
        for (x, v) in row.iter_mut().enumerate() {
            while k + 1 < hull.len() && hull[k + 1].1 <= x as i64 {
                k += 1;
            }
            *v = if hull[k].0.positive { 1.0 } else { -1.0 };
        }
    }
    MaskLogits::new(width, height, out)
}

#[derive(Debug, Clone, Copy)]
struct Cand {
    col: i64,
    w: i64,
    index: u32,
    positive: bool,
}

/// First integer x at which `b` (right of `a`) beats `a`, counting ties in
/// favour of the smaller index. `b` beats `a` on an upward-closed set since
/// their distance difference is linear in x.
fn takeover(a: &Cand, b: &Cand) -> i64 {
    let num = b.col * b.col - a.col * a.col + b.w - a.w;
    let den = 2 * (b.col - a.col);
    if b.index < a.index {
        -(-num).div_euclid(den)
    } else {
        num.div_euclid(den) + 1
    }
}
