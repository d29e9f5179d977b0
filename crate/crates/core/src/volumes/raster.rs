use crate::{Error, Result};

/// Row-major 2D raster (u fastest). Geometry lives in the owning
/// [`PlaneFrame`](super::PlaneFrame).
#[derive(Clone, Debug, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Binary segmentation of one slice.
pub type Mask2D = Raster<bool>;
/// Grayscale slice image.
pub type Image2D = Raster<f64>;

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::GridMismatch(format!(
                "raster {width}x{height} cannot hold {} samples",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                data.push(f(i, j));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.width, self.height]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.width * j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i + self.width * j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let idx = self.index(i, j);
        self.data[idx] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_dims<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl Raster<f64> {
    /// Bilinear interpolation in pixel coordinates, clamped to the border.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let w = self.width;
        let a = self.data[x0 + w * y0];
        let b = self.data[x1 + w * y0];
        let c = self.data[x0 + w * y1];
        let d = self.data[x1 + w * y1];
        (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
    }
}

impl Raster<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Dice overlap between two masks of equal size (1 when both are empty).
    pub fn dice(&self, other: &Mask2D) -> f64 {
        assert!(self.same_dims(other), "dice between rasters of different size");
        let mut inter = 0usize;
        let mut total = 0usize;
        for (&a, &b) in self.data.iter().zip(other.data.iter()) {
            inter += (a && b) as usize;
            total += a as usize + b as usize;
        }
        if total == 0 {
            1.0
        } else {
            2.0 * inter as f64 / total as f64
        }
    }

    /// Foreground pixels with a background (or out-of-raster) 4-neighbour.
    pub fn boundary_pixels(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.width, self.height);
        let mut out = Vec::new();
        for j in 0..h {
            for i in 0..w {
                if !self.data[i + w * j] {
                    continue;
                }
                let edge = i == 0 || j == 0 || i + 1 == w || j + 1 == h;
                if edge
                    || !self.data[i - 1 + w * j]
                    || !self.data[i + 1 + w * j]
                    || !self.data[i + w * (j - 1)]
                    || !self.data[i + w * (j + 1)]
                {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Centroid of the foreground in pixel coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for j in 0..self.height {
            for i in 0..self.width {
                if self.data[i + self.width * j] {
                    sx += i as f64;
                    sy += j as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Number of 4-connected foreground components.
    pub fn component_count(&self) -> usize {
        let (w, h) = (self.width, self.height);
        let mut seen = vec![false; w * h];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !self.data[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(idx) = stack.pop() {
                let (i, j) = (idx % w, idx / w);
                let mut push = |n: usize| {
                    if self.data[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                };
                if i > 0 {
                    push(idx - 1);
                }
                if i + 1 < w {
                    push(idx + 1);
                }
                if j > 0 {
                    push(idx - w);
                }
                if j + 1 < h {
                    push(idx + w);
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_exact_on_plane() {
        let img = Raster::from_fn(5, 4, |i, j| 3.0 * i as f64 - 2.0 * j as f64);
        assert!((img.sample(1.25, 2.5) - (3.75 - 5.0)).abs() < 1e-12);
        assert_eq!(img.sample(-3.0, 0.0), 0.0);
    }

    #[test]
    fn components_and_boundary() {
        let mut m = Mask2D::filled(8, 8, false);
        for j in 1..4 {
            for i in 1..4 {
                m.set(i, j, true);
            }
        }
        m.set(6, 6, true);
        assert_eq!(m.component_count(), 2);
        assert_eq!(m.boundary_pixels().len(), 8 + 1);
        assert!((m.dice(&m) - 1.0).abs() < 1e-15);
    }
}
