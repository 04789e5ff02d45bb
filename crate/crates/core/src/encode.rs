//! Encoders from raw data to non-negative network inputs.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Encoded input `d >= 0` with its class index (output node `class`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub class: usize,
}

impl Sample {
    pub fn new(input: Vec<f64>, class: usize) -> Self {
        Sample { input, class }
    }
}

/// `(z1, !z1, z2, !z2, ...)` with true = `(1, 0)`, false = `(0, 1)`.
pub fn encode_boolean(bits: &[bool]) -> Vec<f64> {
    let mut d = Vec::with_capacity(2 * bits.len());
    for &b in bits {
        if b {
            d.extend_from_slice(&[1.0, 0.0]);
        } else {
            d.extend_from_slice(&[0.0, 1.0]);
        }
    }
    d
}

/// One-hot blocks, one per symbol.
pub fn encode_symbolic(text: &[u8], alphabet: &[u8]) -> Result<Vec<f64>> {
    let k = alphabet.len();
    let mut d = alloc::vec![0.0; k * text.len()];
    for (pos, sym) in text.iter().enumerate() {
        let idx = alphabet.iter().position(|a| a == sym).ok_or_else(|| {
            Error::InvalidSpec(format!("symbol {:?} at position {pos} is not in the alphabet", *sym as char))
        })?;
        d[pos * k + idx] = 1.0;
    }
    Ok(d)
}

/// Per-channel empirical cumulative distribution functions.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfEncoder {
    channels: Vec<Vec<f64>>,
}

impl CdfEncoder {
    /// `rows[k][i]` is the value of channel `i` in training row `k`.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 training rows, got {}", rows.len())));
        }
        let width = rows[0].len();
        if width == 0 {
            return Err(Error::InvalidSpec("training rows have no channels".into()));
        }
        let mut channels: Vec<Vec<f64>> = (0..width).map(|_| Vec::with_capacity(rows.len())).collect();
        for row in rows {
            if row.len() != width {
                return Err(Error::Dimension {
                    what: "training row",
                    expected: width,
                    got: row.len(),
                });
            }
            for (i, &v) in row.iter().enumerate() {
                if v.is_nan() {
                    return Err(Error::InvalidSpec(format!("NaN in channel {i}")));
                }
                channels[i].push(v);
            }
        }
        for c in &mut channels {
            c.sort_by(f64::total_cmp);
        }
        Ok(CdfEncoder { channels })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// `theta_i(v)`: training values below `v` plus half of the ties (counting
    /// `v` itself among them), over `n`. Values outside the training range
    /// map to 0 and 1.
    pub fn theta(&self, channel: usize, v: f64) -> f64 {
        let sorted = &self.channels[channel];
        let n = sorted.len();
        let below = sorted.partition_point(|&t| t < v);
        let upto = sorted.partition_point(|&t| t <= v);
        if upto == 0 {
            return 0.0;
        }
        if below == n {
            return 1.0;
        }
        let equal = upto - below;
        if equal == 0 {
            below as f64 / n as f64
        } else {
            (below as f64 + (equal as f64 + 1.0) / 2.0) / n as f64
        }
    }

    /// `(theta_1, 1 - theta_1, theta_2, 1 - theta_2, ...)`.
    pub fn encode(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.channels.len() {
            return Err(Error::Dimension {
                what: "analog vector",
                expected: self.channels.len(),
                got: v.len(),
            });
        }
        let mut d = Vec::with_capacity(2 * v.len());
        for (i, &x) in v.iter().enumerate() {
            let t = self.theta(i, x);
            d.push(t);
            d.push(1.0 - t);
        }
        Ok(d)
    }
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Pixels at or above this value (40% of 255) count as ink.
pub const BINARIZE_THRESHOLD: u8 = 102;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Malformed(format!("IDX header truncated at byte {at}")))
}

/// Parsed IDX image file: `count` images of `rows x cols` bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, k: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[k * size..(k + 1) * size]
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Malformed(format!("bad IDX image magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Malformed(format!(
            "IDX image data truncated: need {need} bytes, have {}",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Malformed(format!("bad IDX label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Malformed(format!(
            "IDX label data truncated: need {count} bytes, have {}",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

/// Doubled binary encoding of one image.
pub fn binarize_image(pixels: &[u8]) -> Vec<f64> {
    let mut d = Vec::with_capacity(2 * pixels.len());
    for &p in pixels {
        if p >= BINARIZE_THRESHOLD {
            d.extend_from_slice(&[1.0, 0.0]);
        } else {
            d.extend_from_slice(&[0.0, 1.0]);
        }
    }
    d
}

/// Pairs images with labels as binarized samples.
pub fn binarized_samples(images: &IdxImages, labels: &[u8]) -> Result<Vec<Sample>> {
    if images.count != labels.len() {
        return Err(Error::Dimension {
            what: "label count",
            expected: images.count,
            got: labels.len(),
        });
    }
    Ok((0..images.count)
        .map(|k| Sample::new(binarize_image(images.image(k)), labels[k] as usize))
        .collect())
}
