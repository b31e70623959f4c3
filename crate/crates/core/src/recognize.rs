//! Cropping detected regions, running a text-recognition backend on them,
//! and normalizing whatever text comes back.

use std::fs;

use serde::Deserialize;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::backend::{BackendError, Concurrency, ImageRef};
use crate::geometry::BoundingBox;

pub const DEFAULT_PAD_PX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CropError {
    #[error("image size {width}x{height} is not positive")]
    EmptyImage { width: f64, height: f64 },
    #[error("crop of {bbox} falls outside the {width}x{height} image")]
    Degenerate {
        bbox: BoundingBox,
        width: f64,
        height: f64,
    },
}

/// Expands `bbox` by `pad` on every side and clamps it to the image.
pub fn crop_rect(
    image_w: f64,
    image_h: f64,
    bbox: &BoundingBox,
    pad: f64,
) -> Result<BoundingBox, CropError> {
    if !(image_w > 0.0 && image_h > 0.0) {
        return Err(CropError::EmptyImage {
            width: image_w,
            height: image_h,
        });
    }
    let pad = pad.max(0.0);
    let x0 = (bbox.x_min() - pad).clamp(0.0, image_w);
    let y0 = (bbox.y_min() - pad).clamp(0.0, image_h);
    let x1 = (bbox.x_max() + pad).clamp(0.0, image_w);
    let y1 = (bbox.y_max() + pad).clamp(0.0, image_h);
    BoundingBox::new(x0, y0, x1, y1).map_err(|_| CropError::Degenerate {
        bbox: *bbox,
        width: image_w,
        height: image_h,
    })
}

/// Canonically composes `raw`, strips control characters, collapses every
/// whitespace run to one space and trims the ends.
pub fn normalize_text(raw: &str) -> String {
    let mut flat = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars() {
        if c.is_whitespace() {
            pending_space = true;
        } else if c.is_control() {
            continue;
        } else {
            if pending_space && !flat.is_empty() {
                flat.push(' ');
            }
            pending_space = false;
            flat.push(c);
        }
    }
    flat.nfc().collect()
}

/// Recognized text for one cropped region.
#[derive(Debug, Clone, PartialEq)]
pub struct TextRegion {
    pub image_id: String,
    /// The clamped crop rectangle handed to the recognizer.
    pub bbox: BoundingBox,
    pub raw_text: String,
    pub normalized_text: String,
}

impl TextRegion {
    pub fn new(image_id: impl Into<String>, bbox: BoundingBox, raw_text: String) -> Self {
        let normalized_text = normalize_text(&raw_text);
        Self {
            image_id: image_id.into(),
            bbox,
            raw_text,
            normalized_text,
        }
    }
}

/// A text-recognition engine.
pub trait Recognizer: Send + Sync {
    fn name(&self) -> &str;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }

    /// Recognizes the text inside `rect`, which lies within the image.
    fn recognize(&self, image: &ImageRef, rect: &BoundingBox) -> Result<String, BackendError>;
}

/// Crops `bbox` out of `image` and recognizes it.
pub fn recognize_region(
    recognizer: &dyn Recognizer,
    image: &ImageRef,
    bbox: &BoundingBox,
    pad: f64,
) -> Result<TextRegion, BackendError> {
    let rect = crop_rect(image.width() as f64, image.height() as f64, bbox, pad)
        .map_err(|e| BackendError::new(recognizer.name(), image.image_id(), e.to_string()))?;
    let raw = recognizer.recognize(image, &rect)?;
    Ok(TextRegion::new(image.image_id(), rect, raw))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OcrEntry {
    bbox: BoundingBox,
    text: String,
}

/// Reads `<image-stem>.ocr.json` beside each image and answers a query
/// with the entry overlapping it best (IoU >= 0.5), or `""`.
#[derive(Debug, Clone, Default)]
pub struct FixtureRecognizer;

impl FixtureRecognizer {
    pub const SUFFIX: &'static str = ".ocr.json";
    pub const MIN_IOU: f64 = 0.5;
}

impl Recognizer for FixtureRecognizer {
    fn name(&self) -> &str {
        "fixture"
    }

    fn recognize(&self, image: &ImageRef, rect: &BoundingBox) -> Result<String, BackendError> {
        let fail = |msg: String| BackendError::new("fixture", image.image_id(), msg);
        fs::metadata(image.path()).map_err(|e| fail(format!("{}: {e}", image.path().display())))?;
        let path = image.sidecar(Self::SUFFIX);
        if !path.exists() {
            return Ok(String::new());
        }
        let content =
            fs::read_to_string(&path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        let entries: Vec<OcrEntry> =
            serde_json::from_str(&content).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        let mut best: Option<(f64, &OcrEntry)> = None;
        for entry in &entries {
            let overlap = entry.bbox.iou(rect);
            if overlap >= Self::MIN_IOU && best.is_none_or(|(b, _)| overlap > b) {
                best = Some((overlap, entry));
            }
        }
        Ok(best.map(|(_, e)| e.text.clone()).unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn crop_examples() {
        assert_eq!(
            crop_rect(100.0, 100.0, &bb(10.0, 10.0, 20.0, 20.0), 2.0).unwrap(),
            bb(8.0, 8.0, 22.0, 22.0)
        );
        assert_eq!(
            crop_rect(100.0, 100.0, &bb(0.0, 0.0, 10.0, 10.0), 5.0).unwrap(),
            bb(0.0, 0.0, 15.0, 15.0)
        );
        assert!(matches!(
            crop_rect(100.0, 100.0, &bb(150.0, 150.0, 160.0, 160.0), 0.0),
            Err(CropError::Degenerate { .. })
        ));
        assert!(matches!(
            crop_rect(0.0, 100.0, &bb(1.0, 1.0, 2.0, 2.0), 0.0),
            Err(CropError::EmptyImage { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_text("  Great\n  product "), "Great product");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("Très   bien"), "Très bien");
        assert_eq!(normalize_text("a\u{7}b"), "ab");
        assert_eq!(normalize_text("a \u{7} b"), "a b");
        // decomposed e + combining acute composes
        assert_eq!(normalize_text("Tre\u{300}s"), "Très");
        assert_eq!(normalize_text("\t\r\n"), "");
    }

    #[test]
    fn fixture_recognizer_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("page.png");
        fs::write(&img, b"not decoded by the fixture").unwrap();
        fs::write(
            dir.path().join("page.ocr.json"),
            r#"[{"bbox":[0,0,100,50],"text":"Great product"},
                {"bbox":[0,60,100,110],"text":"Other"}]"#,
        )
        .unwrap();
        let image = ImageRef::with_dimensions("page", &img, 200, 200);
        let r = FixtureRecognizer;
        assert_eq!(
            r.recognize(&image, &bb(0.0, 0.0, 102.0, 52.0)).unwrap(),
            "Great product"
        );
        assert_eq!(
            r.recognize(&image, &bb(150.0, 150.0, 200.0, 200.0))
                .unwrap(),
            ""
        );

        let missing = ImageRef::with_dimensions("gone", dir.path().join("gone.png"), 10, 10);
        assert!(r.recognize(&missing, &bb(0.0, 0.0, 5.0, 5.0)).is_err());
    }

    #[test]
    fn region_uses_padded_crop() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("p.png");
        fs::write(&img, b"x").unwrap();
        fs::write(
            dir.path().join("p.ocr.json"),
            r#"[{"bbox":[10,10,90,40],"text":" hi\nthere "}]"#,
        )
        .unwrap();
        let image = ImageRef::with_dimensions("p", &img, 91, 41);
        let region =
            recognize_region(&FixtureRecognizer, &image, &bb(10.0, 10.0, 90.0, 40.0), 2.0).unwrap();
        assert_eq!(region.bbox, bb(8.0, 8.0, 91.0, 41.0));
        assert_eq!(region.raw_text, " hi\nthere ");
        assert_eq!(region.normalized_text, "hi there");
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC*|[ \t\n\u{7}\u{300}\u{301}a-zé\u{2000}\u{85}]*") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once.clone());
            prop_assert!(!once.starts_with(' ') && !once.ends_with(' '));
            prop_assert!(!once.contains("  "));
        }

        #[test]
        fn crop_stays_in_bounds(
            w in 1.0..500.0f64, h in 1.0..500.0f64,
            x in 0.0..600.0f64, y in 0.0..600.0f64,
            bw in 0.5..100.0f64, bh in 0.5..100.0f64,
            pad in 0.0..10.0f64,
        ) {
            let b = bb(x, y, x + bw, y + bh);
            if let Ok(r) = crop_rect(w, h, &b, pad) {
                prop_assert!(r.x_min() >= 0.0 && r.y_min() >= 0.0);
                prop_assert!(r.x_max() <= w && r.y_max() <= h);
            }
        }

        #[test]
        fn zero_pad_in_bounds_is_identity(x in 0.0..100.0f64, y in 0.0..100.0f64, bw in 0.5..100.0f64, bh in 0.5..100.0f64) {
            let b = bb(x, y, x + bw, y + bh);
            prop_assert_eq!(crop_rect(200.0, 200.0, &b, 0.0).unwrap(), b);
        }
    }
}
