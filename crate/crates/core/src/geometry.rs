//! Axis-aligned bounding-box arithmetic.
//!
//! Coordinates are pixels with the origin at the top-left corner and `y`
//! growing downward. Boxes are validated on construction; a box with zero
//! width or height is an annotation error and is never produced.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoxError {
    #[error("box coordinate is not finite: {0:?}")]
    NonFinite([f64; 4]),
    #[error("box coordinate is negative: {0:?}")]
    Negative([f64; 4]),
    #[error("box has zero or negative extent: {0:?}")]
    Degenerate([f64; 4]),
}

/// A pixel rectangle `[x_min, y_min, x_max, y_max]`.
///
/// Serialized as a four-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, BoxError> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(BoxError::NonFinite(coords));
        }
        if coords.iter().any(|&c| c < 0.0) {
            return Err(BoxError::Negative(coords));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(BoxError::Degenerate(coords));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Area of the overlap with `other`, zero when the boxes are disjoint or
    /// only touch along an edge.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = overlap_len(self.x_min, self.x_max, other.x_min, other.x_max);
        let h = overlap_len(self.y_min, self.y_max, other.y_min, other.y_max);
        w * h
    }

    /// Intersection over union, in `[0, 1]`.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Fraction of this box's width covered by `other`'s x-interval.
    pub fn horizontal_overlap_ratio(&self, other: &BoundingBox) -> f64 {
        overlap_len(self.x_min, self.x_max, other.x_min, other.x_max) / self.width()
    }

    /// Signed distance from the bottom of `self` down to the top of `below`.
    /// Negative when the two overlap vertically.
    pub fn vertical_gap(&self, below: &BoundingBox) -> f64 {
        below.y_min - self.y_max
    }

    /// Total order on the four coordinates, used for deterministic tie-breaks.
    pub(crate) fn coord_cmp(&self, other: &BoundingBox) -> Ordering {
        self.to_array()
            .iter()
            .zip(other.to_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

fn overlap_len(a_min: f64, a_max: f64, b_min: f64, b_max: f64) -> f64 {
    (a_max.min(b_max) - a_min.max(b_min)).max(0.0)
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = BoxError;

    fn try_from(c: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.x_min, self.y_min, self.x_max, self.y_max
        )
    }
}

pub fn area(b: &BoundingBox) -> f64 {
    b.area()
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.iou(b)
}

pub fn horizontal_overlap_ratio(a: &BoundingBox, b: &BoundingBox) -> f64 {
    a.horizontal_overlap_ratio(b)
}

pub fn vertical_gap(above: &BoundingBox, below: &BoundingBox) -> f64 {
    above.vertical_gap(below)
}

/// Top-to-bottom, then left-to-right ordering of `boxes`, returned as
/// indices into the input. Equal positions keep their input order.
pub fn reading_order(boxes: &[BoundingBox]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        boxes[i]
            .y_min
            .total_cmp(&boxes[j].y_min)
            .then(boxes[i].x_min.total_cmp(&boxes[j].x_min))
            .then(i.cmp(&j))
    });
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn area_examples() {
        assert_eq!(area(&bb(0.0, 0.0, 10.0, 10.0)), 100.0);
        assert_eq!(area(&bb(2.0, 3.0, 4.0, 9.0)), 12.0);
        assert_eq!(area(&bb(0.0, 0.0, 1.0, 1.0)), 1.0);
    }

    #[test]
    fn rejects_invalid_boxes() {
        assert!(matches!(
            BoundingBox::new(5.0, 0.0, 5.0, 10.0),
            Err(BoxError::Degenerate(_))
        ));
        assert!(matches!(
            BoundingBox::new(0.0, 10.0, 5.0, 2.0),
            Err(BoxError::Degenerate(_))
        ));
        assert!(matches!(
            BoundingBox::new(-1.0, 0.0, 5.0, 2.0),
            Err(BoxError::Negative(_))
        ));
        assert!(matches!(
            BoundingBox::new(0.0, 0.0, f64::NAN, 2.0),
            Err(BoxError::NonFinite(_))
        ));
        assert!(serde_json::from_str::<BoundingBox>("[0,0,0,5]").is_err());
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(20.0, 20.0, 30.0, 30.0)), 0.0);
        // 50 shared unit cells out of 150 covered.
        assert_eq!(iou(&a, &bb(5.0, 0.0, 15.0, 10.0)), 50.0 / 150.0);
        // edge contact is not overlap
        assert_eq!(iou(&a, &bb(10.0, 0.0, 20.0, 10.0)), 0.0);
    }

    #[test]
    fn overlap_ratio_examples() {
        let a = bb(0.0, 0.0, 10.0, 5.0);
        assert_eq!(
            horizontal_overlap_ratio(&a, &bb(0.0, 20.0, 10.0, 25.0)),
            1.0
        );
        assert_eq!(
            horizontal_overlap_ratio(&a, &bb(5.0, 20.0, 20.0, 25.0)),
            0.5
        );
        assert_eq!(horizontal_overlap_ratio(&a, &bb(50.0, 0.0, 60.0, 5.0)), 0.0);
    }

    #[test]
    fn vertical_gap_examples() {
        let above = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(vertical_gap(&above, &bb(0.0, 15.0, 10.0, 25.0)), 5.0);
        assert_eq!(vertical_gap(&above, &bb(0.0, 10.0, 10.0, 20.0)), 0.0);
        assert_eq!(vertical_gap(&above, &bb(0.0, 8.0, 10.0, 20.0)), -2.0);
    }

    #[test]
    fn reading_order_examples() {
        assert!(reading_order(&[]).is_empty());
        assert_eq!(
            reading_order(&[bb(0.0, 100.0, 10.0, 110.0), bb(0.0, 0.0, 10.0, 10.0)]),
            vec![1, 0]
        );
        assert_eq!(
            reading_order(&[bb(50.0, 0.0, 60.0, 10.0), bb(0.0, 0.0, 10.0, 10.0)]),
            vec![1, 0]
        );
        let same = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(reading_order(&[same, same, same]), vec![0, 1, 2]);
    }

    #[test]
    fn serde_as_array() {
        let b = bb(1.5, 2.0, 3.0, 4.0);
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, "[1.5,2.0,3.0,4.0]");
        assert_eq!(serde_json::from_str::<BoundingBox>(&s).unwrap(), b);
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (0.0..500.0f64, 0.0..500.0f64, 0.01..300.0f64, 0.01..300.0f64)
            .prop_map(|(x, y, w, h)| bb(x, y, x + w, y + h))
    }

    /// Unit-cell count of the cells covered by a box with integer corners.
    fn cells(b: (u32, u32, u32, u32)) -> std::collections::HashSet<(u32, u32)> {
        let mut s = std::collections::HashSet::new();
        for x in b.0..b.2 {
            for y in b.1..b.3 {
                s.insert((x, y));
            }
        }
        s
    }

    fn arb_grid_box() -> impl Strategy<Value = (u32, u32, u32, u32)> {
        (0u32..100, 0u32..100)
            .prop_flat_map(|(x, y)| (Just(x), Just(y), (x + 1)..=100, (y + 1)..=100))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn iou_matches_cell_count(a in arb_grid_box(), b in arb_grid_box()) {
            let (ca, cb) = (cells(a), cells(b));
            let inter = ca.intersection(&cb).count() as f64;
            let union = ca.union(&cb).count() as f64;
            let ba = bb(a.0 as f64, a.1 as f64, a.2 as f64, a.3 as f64);
            let bbx = bb(b.0 as f64, b.1 as f64, b.2 as f64, b.3 as f64);
            prop_assert_eq!(iou(&ba, &bbx), inter / union);
        }

        #[test]
        fn inclusion_exclusion(a in arb_grid_box(), b in arb_grid_box()) {
            let ba = bb(a.0 as f64, a.1 as f64, a.2 as f64, a.3 as f64);
            let bbx = bb(b.0 as f64, b.1 as f64, b.2 as f64, b.3 as f64);
            let inter = ba.intersection_area(&bbx);
            prop_assume!(inter > 0.0);
            let union = ba.area() + bbx.area() - inter;
            prop_assert_eq!(inter + union, ba.area() + bbx.area());
        }

        #[test]
        fn reading_order_is_permutation(boxes in proptest::collection::vec(arb_box(), 0..20)) {
            let order = reading_order(&boxes);
            let mut sorted = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..boxes.len()).collect::<Vec<_>>());
            prop_assert_eq!(order, reading_order(&boxes));
        }
    }
}
