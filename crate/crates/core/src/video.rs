//! Frame conditioning: grayscale, resizing and stream alignment.

use serde::{Deserialize, Serialize};

use crate::dsp::FeatureSequence;
use crate::{Error, Result, FRAME_RATE_HZ};

pub const FRAME_SIZE: usize = 100;

/// `T x H x W` grayscale frames, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSequence {
    pub frames: Vec<u8>,
    pub len: usize,
    pub height: usize,
    pub width: usize,
    pub frame_rate_hz: u32,
}

impl VideoSequence {
    pub fn new(frames: Vec<u8>, len: usize, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || frames.len() != len * height * width {
            return Err(Error::Shape(format!(
                "{} bytes do not form {len} frames of {height}x{width}",
                frames.len()
            )));
        }
        Ok(Self {
            frames,
            len,
            height,
            width,
            frame_rate_hz: FRAME_RATE_HZ,
        })
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        let n = self.height * self.width;
        &self.frames[t * n..(t + 1) * n]
    }

    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len);
        Self {
            frames: self.frames[..len * self.height * self.width].to_vec(),
            len,
            ..self.clone()
        }
    }

    /// Apply `f` to every frame, producing `out_h x out_w` frames.
    pub fn map_frames(&self, out_h: usize, out_w: usize, f: impl Fn(&[u8]) -> Vec<u8>) -> Result<Self> {
        let frames = (0..self.len).flat_map(|t| f(self.frame(t))).collect();
        Self::new(frames, self.len, out_h, out_w)
    }

    /// Intensities scaled to `[0, 1]`.
    pub fn to_unit_f64(&self) -> Vec<f64> {
        self.frames.iter().map(|&v| v as f64 / 255.0).collect()
    }
}

fn round_clamp(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// BT.601 luma of an interleaved `H x W x channels` frame.
pub fn grayscale(rgb: &[u8], height: usize, width: usize, channels: usize) -> Result<Vec<u8>> {
    if channels != 3 {
        return Err(Error::Parameter(format!("grayscale needs 3 channels, got {channels}")));
    }
    if rgb.len() != height * width * 3 {
        return Err(Error::Shape(format!("{} bytes are not a {height}x{width}x3 frame", rgb.len())));
    }
    Ok(rgb
        .chunks_exact(3)
        .map(|p| round_clamp(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
        .collect())
}

/// Bilinear resize with half-pixel centres and edge clamping.
pub fn resize_bilinear(frame: &[u8], height: usize, width: usize, out_h: usize, out_w: usize) -> Result<Vec<u8>> {
    if height == 0 || width == 0 || out_h == 0 || out_w == 0 {
        return Err(Error::Parameter("frame dimensions must be positive".into()));
    }
    if frame.len() != height * width {
        return Err(Error::Shape(format!("{} bytes are not a {height}x{width} frame", frame.len())));
    }
    let axis = |i: usize, n_in: usize, n_out: usize| {
        let s = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let lo = s.floor() as usize;
        (lo, (lo + 1).min(n_in - 1), s - lo as f64)
    };
    let px = |y: usize, x: usize| frame[y * width + x] as f64;
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let (y0, y1, fy) = axis(oy, height, out_h);
        for ox in 0..out_w {
            let (x0, x1, fx) = axis(ox, width, out_w);
            let top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
            let bottom = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
            out.push(round_clamp(top * (1.0 - fy) + bottom * fy));
        }
    }
    Ok(out)
}

/// Block-average downsampling by an integer factor; trailing partial blocks are dropped.
pub fn downsample_area(frame: &[u8], height: usize, width: usize, factor: usize) -> Result<Vec<u8>> {
    if factor == 0 || factor > height || factor > width {
        return Err(Error::Parameter(format!("cannot downsample {height}x{width} by {factor}")));
    }
    if frame.len() != height * width {
        return Err(Error::Shape(format!("{} bytes are not a {height}x{width} frame", frame.len())));
    }
    let (oh, ow) = (height / factor, width / factor);
    let area = (factor * factor) as f64;
    let mut out = Vec::with_capacity(oh * ow);
    for by in 0..oh {
        for bx in 0..ow {
            let mut s = 0u32;
            for y in by * factor..(by + 1) * factor {
                for x in bx * factor..(bx + 1) * factor {
                    s += frame[y * width + x] as u32;
                }
            }
            out.push(round_clamp(s as f64 / area));
        }
    }
    Ok(out)
}

/// Truncate the video and every feature stream to the shortest length.
pub fn align_streams(video: &VideoSequence, feats: &[&FeatureSequence]) -> Result<(VideoSequence, Vec<FeatureSequence>)> {
    if video.len == 0 {
        return Err(Error::Data("video stream is empty".into()));
    }
    if let Some(i) = feats.iter().position(|f| f.frames() == 0) {
        return Err(Error::Data(format!("feature stream {i} is empty")));
    }
    if video.frame_rate_hz != FRAME_RATE_HZ || feats.iter().any(|f| f.frame_rate_hz != FRAME_RATE_HZ) {
        return Err(Error::Data(format!("all streams must run at {FRAME_RATE_HZ} Hz")));
    }
    let t = feats.iter().map(|f| f.frames()).fold(video.len, usize::min);
    Ok((video.truncated(t), feats.iter().map(|f| f.truncated(t)).collect()))
}
