//! Point-set expectation cost with a truncated Gaussian kernel.

use std::collections::HashMap;

use crate::kdtree::KdTree;
use crate::{Error, Point3, Result};

/// Kernel support in units of sigma.
pub const TRUNCATION: f64 = 4.0;

/// Spatial hash over a fixed point set for truncated-kernel queries.
#[derive(Clone, Debug)]
pub struct PointIndex {
    points: Vec<Point3>,
    sigma: f64,
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    tree: KdTree,
}

/// Gaussian-weighted expected correspondent of one query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub point: Point3,
    /// No point within the kernel support; `point` is the nearest neighbour.
    pub fallback: bool,
}

impl PointIndex {
    pub fn new(points: &[Point3], sigma: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyShape("point set for expectation is empty".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("kernel sigma {sigma} must be > 0")));
        }
        let cell = TRUNCATION * sigma;
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Ok(Self {
            points: points.to_vec(),
            sigma,
            cell,
            cells,
            tree: KdTree::new(points),
        })
    }

    fn key(p: &Point3, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn expectation(&self, q: &Point3) -> Expectation {
        let k = Self::key(q, self.cell);
        let r2 = self.cell * self.cell;
        let inv = -0.5 / (self.sigma * self.sigma);
        let mut wsum = 0.0;
        let mut acc = Point3::zeros();
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &j in list {
                            let p = &self.points[j as usize];
                            let d2 = (p - q).norm_squared();
                            if d2 <= r2 {
                                let w = (d2 * inv).exp();
                                wsum += w;
                                acc += p * w;
                            }
                        }
                    }
                }
            }
        }
        if wsum > 0.0 {
            Expectation {
                point: acc / wsum,
                fallback: false,
            }
        } else {
            let (j, _) = self.tree.nearest(q).expect("non-empty");
            Expectation {
                point: self.points[j],
                fallback: true,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseEvaluation {
    pub cost: f64,
    pub expectations: Vec<Point3>,
    pub fallbacks: usize,
}

/// Mean squared distance from each query to its expected correspondent.
pub fn pse_evaluate(index: &PointIndex, queries: &[Point3]) -> Result<PseEvaluation> {
    if queries.is_empty() {
        return Err(Error::EmptyShape("query point set is empty".into()));
    }
    let mut cost = 0.0;
    let mut fallbacks = 0;
    let mut expectations = Vec::with_capacity(queries.len());
    for q in queries {
        let e = index.expectation(q);
        cost += (q - e.point).norm_squared();
        fallbacks += e.fallback as usize;
        expectations.push(e.point);
    }
    Ok(PseEvaluation {
        cost: cost / queries.len() as f64,
        expectations,
        fallbacks,
    })
}

/// Cost of matching `r` against `v` with kernel width `sigma` (mm).
pub fn pse_cost(v: &[Point3], r: &[Point3], sigma: f64) -> Result<f64> {
    let index = PointIndex::new(v, sigma)?;
    Ok(pse_evaluate(&index, r)?.cost)
}
