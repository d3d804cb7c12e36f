//! Deterministic functions a contract can outsource, and synthetic inputs
//! for them.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contract::FunctionId;
use crate::crypto::{hash, hash_parts};

pub trait ComputeFunction: Send + Sync {
    fn function_id(&self) -> FunctionId;
    fn evaluate(&self, input: &[u8]) -> Vec<u8>;
    /// Notional work per evaluation.
    fn cost_units(&self) -> u64;
    /// The answer a lazy worker gives without looking at the input.
    fn cheap_answer(&self) -> Vec<u8> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceFunction {
    Identity,
    IteratedHash { iterations: u32 },
    /// Bounding boxes of the 4-connected non-zero regions of a
    /// `width x height` byte grid. An empty answer means "no objects".
    GridDetector { width: u16, height: u16 },
}

impl Default for ReferenceFunction {
    fn default() -> Self {
        ReferenceFunction::GridDetector { width: 16, height: 16 }
    }
}

impl ComputeFunction for ReferenceFunction {
    fn function_id(&self) -> FunctionId {
        FunctionId(match *self {
            ReferenceFunction::Identity => 1,
            ReferenceFunction::IteratedHash { iterations } => (2 << 32) | u64::from(iterations),
            ReferenceFunction::GridDetector { width, height } => (3 << 32) | u64::from(width) << 16 | u64::from(height),
        })
    }

    fn evaluate(&self, input: &[u8]) -> Vec<u8> {
        match *self {
            ReferenceFunction::Identity => input.to_vec(),
            ReferenceFunction::IteratedHash { iterations } => {
                let mut d = hash(input);
                for _ in 1..iterations {
                    d = hash(d.as_bytes());
                }
                d.0.to_vec()
            }
            ReferenceFunction::GridDetector { width, height } => detect_boxes(input, width, height),
        }
    }

    fn cost_units(&self) -> u64 {
        match *self {
            ReferenceFunction::Identity => 1,
            ReferenceFunction::IteratedHash { iterations } => u64::from(iterations.max(1)),
            ReferenceFunction::GridDetector { width, height } => u64::from(width) * u64::from(height),
        }
    }
}

/// An output no honest evaluation produces except with negligible chance.
pub fn forged_output(input: &[u8]) -> Vec<u8> {
    hash_parts(&[b"forged", input]).0.to_vec()
}

/// Boxes as `[min_x:2][min_y:2][max_x:2][max_y:2]` little-endian, sorted.
/// Cells beyond the input are zero; bytes beyond the grid are ignored.
pub fn detect_boxes(input: &[u8], width: u16, height: u16) -> Vec<u8> {
    let (w, h) = (usize::from(width), usize::from(height));
    let cell = |x: usize, y: usize| input.get(y * w + x).copied().unwrap_or(0);
    let mut seen = vec![false; w * h];
    let mut boxes = Vec::new();
    let mut queue = VecDeque::new();
    for y0 in 0..h {
        for x0 in 0..w {
            if seen[y0 * w + x0] || cell(x0, y0) == 0 {
                continue;
            }
            seen[y0 * w + x0] = true;
            queue.push_back((x0, y0));
            let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (x0, y0, x0, y0);
            while let Some((x, y)) = queue.pop_front() {
                lo_x = lo_x.min(x);
                lo_y = lo_y.min(y);
                hi_x = hi_x.max(x);
                hi_y = hi_y.max(y);
                let neighbours = [
                    (x.wrapping_sub(1), y),
                    (x + 1, y),
                    (x, y.wrapping_sub(1)),
                    (x, y + 1),
                ];
                for (nx, ny) in neighbours {
                    if nx < w && ny < h && !seen[ny * w + nx] && cell(nx, ny) != 0 {
                        seen[ny * w + nx] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            boxes.push([lo_x as u16, lo_y as u16, hi_x as u16, hi_y as u16]);
        }
    }
    boxes.sort_unstable();
    boxes.iter().flatten().flat_map(|v| v.to_le_bytes()).collect()
}

/// Seeded per-index input generator. `object_rate` is the chance a grid
/// frame contains at least one object.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSource {
    pub function: ReferenceFunction,
    pub seed: u64,
    pub object_rate: f64,
    /// Payload length for the non-grid functions.
    pub payload_len: usize,
}

impl InputSource {
    pub fn new(function: ReferenceFunction, seed: u64, object_rate: f64) -> Self {
        Self { function, seed, object_rate, payload_len: 64 }
    }

    pub fn generate(&self, index: u32) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::from(index));
        match self.function {
            ReferenceFunction::GridDetector { width, height } => {
                let (w, h) = (usize::from(width), usize::from(height));
                let mut grid = vec![0u8; w * h];
                if w > 0 && h > 0 && rng.gen_bool(self.object_rate) {
                    for _ in 0..rng.gen_range(1..=3) {
                        let x0 = rng.gen_range(0..w);
                        let y0 = rng.gen_range(0..h);
                        let x1 = (x0 + rng.gen_range(0..4)).min(w - 1);
                        let y1 = (y0 + rng.gen_range(0..4)).min(h - 1);
                        let v = rng.gen_range(1..=u8::MAX);
                        for y in y0..=y1 {
                            grid[y * w + x0..=y * w + x1].fill(v);
                        }
                    }
                }
                grid
            }
            _ => {
                let mut buf = vec![0u8; self.payload_len];
                rng.fill(&mut buf[..]);
                buf
            }
        }
    }
}
