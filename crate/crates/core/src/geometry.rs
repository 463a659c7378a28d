//! Axis-aligned boxes in `(left, top, width, height)` pixel convention.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Validating constructor. Rejects non-finite coordinates and non-positive extents.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { x, y, w, h };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::InvalidBox { x, y, w, h })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        BoundingBox {
            x,
            y,
            w: self.right().max(other.right()) - x,
            h: self.bottom().max(other.bottom()) - y,
        }
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Intersection over union. Touching edges give 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    // Areas from the same edge arithmetic as the intersection so iou(a, a) == 1 exactly.
    let area = |r: &BoundingBox| (r.right() - r.x) * (r.bottom() - r.y);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

pub fn center(a: &BoundingBox) -> (f64, f64) {
    a.center()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    /// Counts unit pixels covered by integer-aligned boxes.
    fn raster_iou(a: (i64, i64, i64, i64), b: (i64, i64, i64, i64)) -> f64 {
        let covers = |r: (i64, i64, i64, i64), px: i64, py: i64| {
            px >= r.0 && px < r.0 + r.2 && py >= r.1 && py < r.1 + r.3
        };
        let (lo_x, hi_x) = (a.0.min(b.0), (a.0 + a.2).max(b.0 + b.2));
        let (lo_y, hi_y) = (a.1.min(b.1), (a.1 + a.3).max(b.1 + b.3));
        let (mut inter, mut uni) = (0u64, 0u64);
        for py in lo_y..hi_y {
            for px in lo_x..hi_x {
                let (ia, ib) = (covers(a, px, py), covers(b, px, py));
                if ia && ib {
                    inter += 1;
                }
                if ia || ib {
                    uni += 1;
                }
            }
        }
        inter as f64 / uni as f64
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&bx(0., 0., 10., 10.), &bx(0., 0., 10., 10.)), 1.0);
        assert_eq!(iou(&bx(0., 0., 10., 10.), &bx(20., 20., 5., 5.)), 0.0);
        let third = iou(&bx(0., 0., 10., 10.), &bx(5., 0., 10., 10.));
        assert!((third - raster_iou((0, 0, 10, 10), (5, 0, 10, 10))).abs() < 1e-12);
        assert!((third - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn touching_edges_have_zero_iou() {
        assert_eq!(iou(&bx(0., 0., 10., 10.), &bx(10., 0., 10., 10.)), 0.0);
        assert_eq!(iou(&bx(0., 0., 10., 10.), &bx(10., 10., 3., 3.)), 0.0);
    }

    #[test]
    fn center_examples() {
        assert_eq!(center(&bx(0., 0., 10., 10.)), (5.0, 5.0));
        assert_eq!(center(&bx(3., 4., 0.5, 0.5)), (3.25, 4.25));
        assert_eq!(center(&bx(-10., -10., 20., 20.)), (0.0, 0.0));
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BoundingBox::new(0., 0., 0., 1.).is_err());
        assert!(BoundingBox::new(0., 0., 1., -1.).is_err());
        assert!(BoundingBox::new(f64::NAN, 0., 1., 1.).is_err());
        assert!(BoundingBox::new(0., f64::INFINITY, 1., 1.).is_err());
    }

    #[test]
    fn union_contains_both() {
        let u = bx(0., 0., 10., 10.).union(&bx(5., 20., 10., 2.));
        assert_eq!(u, bx(0., 0., 15., 22.));
    }

    fn any_box() -> impl Strategy<Value = BoundingBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.1..80.0f64, 0.1..80.0f64)
            .prop_map(|(x, y, w, h)| bx(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in any_box(), b in any_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn iou_matches_raster_oracle(
            ax in -12i64..12, ay in -12i64..12, aw in 1i64..14, ah in 1i64..14,
            bx_ in -12i64..12, by in -12i64..12, bw in 1i64..14, bh in 1i64..14,
        ) {
            let a = bx(ax as f64, ay as f64, aw as f64, ah as f64);
            let b = bx(bx_ as f64, by as f64, bw as f64, bh as f64);
            let oracle = raster_iou((ax, ay, aw, ah), (bx_, by, bw, bh));
            prop_assert!((iou(&a, &b) - oracle).abs() < 1e-9);
        }
    }
}
