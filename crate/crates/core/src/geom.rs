//! Integer-nanometer geometry primitives.

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in integer nanometers, half-open semantics are not
/// used: a rect covers `[x0, x1] x [y0, y1]` and has positive area when valid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Rect {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    /// Twice the center, so odd extents stay exact.
    pub fn center2(&self) -> (i64, i64) {
        (self.x0 + self.x1, self.y0 + self.y1)
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Rect {
        Rect {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    /// Mirror about the vertical line `x = axis2 / 2`.
    pub fn mirror_x(&self, axis2: i64) -> Rect {
        Rect::new(axis2 - self.x1, self.y0, axis2 - self.x0, self.y1)
    }

    /// True when the interiors intersect (touching edges do not count).
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn contains(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn expand(&self, dx: i64, dy: i64) -> Rect {
        Rect {
            x0: self.x0 - dx,
            y0: self.y0 - dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_twice_is_identity() {
        let r = Rect::new(10, 0, 30, 5);
        assert_eq!(r.mirror_x(100).mirror_x(100), r);
        assert_eq!(r.mirror_x(100), Rect::new(70, 0, 90, 5));
    }

    #[test]
    fn touching_rects_do_not_overlap() {
        let a = Rect::new(0, 0, 10, 10);
        assert!(!a.overlaps(&Rect::new(10, 0, 20, 10)));
        assert!(a.overlaps(&Rect::new(9, 9, 20, 20)));
    }
}
