//! Model-facing OCR tokens and region features derived from annotations,
//! with an optional deterministic noise model standing in for a real OCR
//! engine's errors.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::{Annotation, BBox, Category, Color};
use crate::table::sample_seed;

#[derive(Debug, Error)]
pub enum OcrError {
    #[error("bbox [{0}, {1}, {2}, {3}] is degenerate or not finite")]
    BadBox(f64, f64, f64, f64),
    #[error("bbox [{x1}, {y1}, {x2}, {y2}] exceeds the {w}x{h} image")]
    OutOfBounds { x1: f64, y1: f64, x2: f64, y2: f64, w: u32, h: u32 },
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
}

/// Normalized [x1/W, y1/H, x2/W, y2/H, area/(W*H)]; every component in [0,1].
pub fn location_vector(bbox: &BBox, w: u32, h: u32) -> Result<[f64; 5], OcrError> {
    if !bbox.is_valid() {
        return Err(OcrError::BadBox(bbox.x1, bbox.y1, bbox.x2, bbox.y2));
    }
    if bbox.x1 < 0.0 || bbox.y1 < 0.0 || bbox.x2 > w as f64 || bbox.y2 > h as f64 {
        return Err(OcrError::OutOfBounds {
            x1: bbox.x1,
            y1: bbox.y1,
            x2: bbox.x2,
            y2: bbox.y2,
            w,
            h,
        });
    }
    let (wf, hf) = (w as f64, h as f64);
    Ok([
        bbox.x1 / wf,
        bbox.y1 / hf,
        bbox.x2 / wf,
        bbox.y2 / hf,
        (bbox.x2 - bbox.x1) * (bbox.y2 - bbox.y1) / (wf * hf),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrToken {
    /// Reading-order index: top-to-bottom, then left-to-right by bbox top-left.
    pub index: usize,
    pub text: String,
    pub bbox: BBox,
    pub location_vec: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFeature {
    pub category: Category,
    pub bbox: BBox,
    pub location_vec: [f64; 5],
    pub color: Color,
    /// Deterministic stand-in for detector features: a hash-seeded
    /// pseudo-random vector, stable per (seed, category, bbox).
    pub feature_vec: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Noise for token `i` depends only on `(seed, i)`, never on other tokens.
    PerToken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub char_sub_rate: f64,
    pub char_del_rate: f64,
    /// Confusable punctuation pairs applied by the substitution pass.
    pub punct_confusion: Vec<(char, char)>,
    pub bbox_jitter_px: f64,
    pub token_drop_rate: f64,
    pub seed_policy: SeedPolicy,
}

pub fn default_punct_confusion() -> Vec<(char, char)> {
    vec![('.', ':'), (':', '.'), (',', '.'), (';', ':')]
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            char_sub_rate: 0.0,
            char_del_rate: 0.0,
            punct_confusion: default_punct_confusion(),
            bbox_jitter_px: 0.0,
            token_drop_rate: 0.0,
            seed_policy: SeedPolicy::PerToken,
        }
    }
}

impl NoiseModel {
    /// Character-level noise at `rate`, the usual way to dial OCR quality.
    pub fn with_char_noise(rate: f64) -> NoiseModel {
        NoiseModel { char_sub_rate: rate, ..NoiseModel::default() }
    }

    pub fn is_identity(&self) -> bool {
        self.char_sub_rate == 0.0
            && self.char_del_rate == 0.0
            && self.bbox_jitter_px == 0.0
            && self.token_drop_rate == 0.0
    }

    pub fn validate(&self) -> Result<(), OcrError> {
        for (name, rate) in [
            ("char_sub_rate", self.char_sub_rate),
            ("char_del_rate", self.char_del_rate),
            ("token_drop_rate", self.token_drop_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(OcrError::InvalidNoise(format!("{name} {rate} outside [0, 1]")));
            }
        }
        if !self.bbox_jitter_px.is_finite() || self.bbox_jitter_px < 0.0 {
            return Err(OcrError::InvalidNoise(format!(
                "bbox_jitter_px {} must be finite and non-negative",
                self.bbox_jitter_px
            )));
        }
        Ok(())
    }

    fn substitute(&self, ch: char, rng: &mut ChaCha8Rng) -> char {
        if let Some((_, to)) = self.punct_confusion.iter().find(|(from, _)| *from == ch) {
            return *to;
        }
        let pool: &[u8] = if ch.is_ascii_digit() {
            b"0123456789"
        } else if ch.is_ascii_lowercase() {
            b"abcdefghijklmnopqrstuvwxyz"
        } else if ch.is_ascii_uppercase() {
            b"ABCDEFGHIJKLMNOPQRSTUVWXYZ"
        } else {
            return ch;
        };
        loop {
            let cand = pool[rng.gen_range(0..pool.len())] as char;
            if cand != ch {
                return cand;
            }
        }
    }

    fn corrupt_text(&self, text: &str, rng: &mut ChaCha8Rng) -> String {
        let mut out = String::with_capacity(text.len());
        for ch in text.chars() {
            if self.char_del_rate > 0.0 && rng.gen::<f64>() < self.char_del_rate {
                continue;
            }
            if self.char_sub_rate > 0.0 && rng.gen::<f64>() < self.char_sub_rate {
                out.push(self.substitute(ch, rng));
            } else {
                out.push(ch);
            }
        }
        if out.is_empty() {
            // Deletion never erases a token outright; keep its first character.
            out.extend(text.chars().take(1));
        }
        out
    }

    fn jitter_box(&self, bbox: &BBox, w: u32, h: u32, rng: &mut ChaCha8Rng) -> BBox {
        if self.bbox_jitter_px == 0.0 {
            return *bbox;
        }
        let j = self.bbox_jitter_px;
        let mut d = || rng.gen_range(-j..=j);
        let mut x1 = (bbox.x1 + d()).clamp(0.0, w as f64 - 1.0);
        let mut y1 = (bbox.y1 + d()).clamp(0.0, h as f64 - 1.0);
        let x2 = (bbox.x2 + d()).clamp(x1 + 1.0, w as f64);
        let y2 = (bbox.y2 + d()).clamp(y1 + 1.0, h as f64);
        x1 = x1.min(x2 - 1.0);
        y1 = y1.min(y2 - 1.0);
        BBox::new(x1, y1, x2, y2)
    }
}

/// Extracts OCR tokens from an annotation in reading order. With a noise
/// model, corruption for token `i` is a pure function of `(seed, i)` keyed by
/// the token's position in the annotation, so dropping one token never
/// changes how the others are perturbed.
pub fn extract_ocr(
    annotation: &Annotation,
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<Vec<OcrToken>, OcrError> {
    if let Some(n) = noise {
        n.validate()?;
    }
    let mut staged: Vec<(String, BBox)> = Vec::with_capacity(annotation.ocr_tokens.len());
    for (i, token) in annotation.ocr_tokens.iter().enumerate() {
        match noise.filter(|n| !n.is_identity()) {
            None => staged.push((token.text.clone(), token.bbox)),
            Some(n) => {
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i as u64));
                if n.token_drop_rate > 0.0 && rng.gen::<f64>() < n.token_drop_rate {
                    continue;
                }
                let text = n.corrupt_text(&token.text, &mut rng);
                let bbox = n.jitter_box(&token.bbox, annotation.width, annotation.height, &mut rng);
                staged.push((text, bbox));
            }
        }
    }
    staged.sort_by(|a, b| {
        (a.1.y1, a.1.x1).partial_cmp(&(b.1.y1, b.1.x1)).expect("finite bbox coordinates")
    });
    staged
        .into_iter()
        .enumerate()
        .map(|(index, (text, bbox))| {
            let location_vec = location_vector(&bbox, annotation.width, annotation.height)?;
            Ok(OcrToken { index, text, bbox, location_vec })
        })
        .collect()
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One feature per annotation region. The category set is closed at the type
/// level, so unknown category names are impossible here; they are rejected
/// with a line number when a manifest is imported.
pub fn build_regions(
    annotation: &Annotation,
    d_region: usize,
    seed: u64,
) -> Result<Vec<RegionFeature>, OcrError> {
    annotation
        .regions
        .iter()
        .map(|region| {
            let mut bytes = Vec::with_capacity(64);
            bytes.extend_from_slice(&seed.to_le_bytes());
            bytes.extend_from_slice(region.category.name().as_bytes());
            for v in [region.bbox.x1, region.bbox.y1, region.bbox.x2, region.bbox.y2] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(&bytes));
            let feature_vec = (0..d_region).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Ok(RegionFeature {
                category: region.category,
                bbox: region.bbox,
                location_vec: location_vector(&region.bbox, annotation.width, annotation.height)?,
                color: region.color,
                feature_vec,
            })
        })
        .collect()
}
