use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::scalar::{from_count, Ratio};

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RegionWire", into = "RegionWire")]
pub struct Region {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

#[derive(Serialize, Deserialize)]
struct RegionWire {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

impl TryFrom<RegionWire> for Region {
    type Error = ModelError;

    fn try_from(r: RegionWire) -> Result<Self, Self::Error> {
        Region::new(r.x, r.y, r.w, r.h)
    }
}

impl From<Region> for RegionWire {
    fn from(r: Region) -> Self {
        RegionWire {
            x: r.x,
            y: r.y,
            w: r.w,
            h: r.h,
        }
    }
}

impl Region {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, ModelError> {
        if w == 0 || h == 0 {
            return Err(ModelError::InvalidRegion(format!(
                "empty region {w}x{h} at ({x},{y})"
            )));
        }
        Ok(Region { x, y, w, h })
    }

    pub fn x(&self) -> u32 {
        self.x
    }

    pub fn y(&self) -> u32 {
        self.y
    }

    pub fn width(&self) -> u32 {
        self.w
    }

    pub fn height(&self) -> u32 {
        self.h
    }

    fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.right() <= width as u64 && self.bottom() <= height as u64
    }

    pub fn contains(&self, other: &Region) -> bool {
        self.x <= other.x
            && self.y <= other.y
            && self.right() >= other.right()
            && self.bottom() >= other.bottom()
    }

    /// Smallest region covering both.
    pub fn union(&self, other: &Region) -> Region {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        let right = self.right().max(other.right());
        let bottom = self.bottom().max(other.bottom());
        Region {
            x,
            y,
            w: (right - x as u64) as u32,
            h: (bottom - y as u64) as u32,
        }
    }

    pub fn intersection_area(&self, other: &Region) -> u64 {
        let left = self.x.max(other.x) as u64;
        let top = self.y.max(other.y) as u64;
        let right = self.right().min(other.right());
        let bottom = self.bottom().min(other.bottom());
        if right <= left || bottom <= top {
            0
        } else {
            (right - left) * (bottom - top)
        }
    }

    /// Intersection over union.
    pub fn iou<T: Ratio>(&self, other: &Region) -> T {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        from_count::<T>(inter) / from_count::<T>(union)
    }

    /// Share of the image covered by this region.
    pub fn image_fraction<T: Ratio>(&self, width: u32, height: u32) -> T {
        from_count::<T>(self.area()) / from_count::<T>(width as u64 * height as u64)
    }

    /// Width divided by height.
    pub fn aspect_ratio<T: Ratio>(&self) -> T {
        from_count::<T>(self.w as u64) / from_count::<T>(self.h as u64)
    }
}
