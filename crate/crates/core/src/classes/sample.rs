use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{Block, Point};

/// Where "for all x, y, ξ" hypotheses are sampled.
///
/// Each axis gets `log_points` values: zero and `±` a logarithmic ladder of
/// magnitudes from 1 to `radius`. Up to `tensor_max_coords` scalar
/// coordinates the full tensor grid is used; beyond that every block moves
/// along its coordinate axes and the diagonal. `random_points` seeded points
/// with log-uniform magnitudes in `[0.1, radius]` are added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplePlan {
    pub log_points: usize,
    pub radius: f64,
    pub random_points: usize,
    pub seed: u64,
    pub tensor_max_coords: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            log_points: 9,
            radius: 1e4,
            random_points: 50,
            seed: 20240601,
            tensor_max_coords: 4,
        }
    }
}

/// A sample point with its shell level: the largest ladder rung used by
/// any coordinate (`None` for random points).
#[derive(Debug, Clone)]
pub struct Sample {
    pub point: Point,
    pub shell: Option<usize>,
}

impl SamplePlan {
    /// Ladder of `(value, level)` pairs on one axis; level 0 is the origin.
    pub fn axis(&self) -> Vec<(f64, usize)> {
        let rungs = (self.log_points.max(3) - 1) / 2;
        let top = self.radius.log10();
        let mut out = vec![(0.0, 0)];
        for j in 0..rungs {
            let m = if rungs == 1 {
                self.radius
            } else {
                10f64.powf(top * j as f64 / (rungs - 1) as f64)
            };
            out.push((m, j + 1));
            out.push((-m, j + 1));
        }
        out
    }

    pub fn shells(&self) -> usize {
        (self.log_points.max(3) - 1) / 2 + 1
    }

    fn block_vectors(&self, dim: usize, tensor: bool) -> Vec<(Vec<f64>, usize)> {
        let axis = self.axis();
        if tensor {
            let mut out: Vec<(Vec<f64>, usize)> = vec![(Vec::new(), 0)];
            for _ in 0..dim {
                out = out
                    .into_iter()
                    .flat_map(|(v, l)| {
                        axis.iter().map(move |&(a, la)| {
                            let mut w = v.clone();
                            w.push(a);
                            (w, l.max(la))
                        })
                    })
                    .collect();
            }
            return out;
        }
        let mut out = vec![(vec![0.0; dim], 0)];
        let mut dirs: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        if dim > 1 {
            dirs.push(vec![1.0; dim]);
        }
        for d in &dirs {
            for &(a, l) in axis.iter().skip(1) {
                out.push((d.iter().map(|c| c * a).collect(), l));
            }
        }
        out
    }

    /// All sample points for the given blocks in dimension `dim`.
    pub fn points(&self, blocks: &[Block], dim: usize) -> Vec<Sample> {
        let tensor = blocks.len() * dim <= self.tensor_max_coords;
        let per_block = self.block_vectors(dim, tensor);
        let mut out = vec![Sample {
            point: Point::new(),
            shell: Some(0),
        }];
        for &b in blocks {
            out = out
                .into_iter()
                .flat_map(|s| {
                    per_block.iter().map(move |(v, l)| Sample {
                        point: s.point.with_block(b, v),
                        shell: Some(s.shell.unwrap().max(*l)),
                    })
                })
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let top = self.radius.log10();
        for _ in 0..self.random_points {
            let mut p = Point::new();
            for &b in blocks {
                let v: Vec<f64> = (0..dim)
                    .map(|_| {
                        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                        sign * 10f64.powf(rng.gen_range(-1.0..=top))
                    })
                    .collect();
                p = p.with_block(b, &v);
            }
            out.push(Sample {
                point: p,
                shell: None,
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_axis_has_nine_log_points() {
        let plan = SamplePlan::default();
        let axis: Vec<f64> = plan.axis().into_iter().map(|(v, _)| v).collect();
        assert_eq!(axis.len(), 9);
        assert!(axis.contains(&1e4) && axis.contains(&-1.0) && axis.contains(&0.0));
        assert!((axis[3] - 10f64.powf(4.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn tensor_or_directional() {
        let plan = SamplePlan::default();
        assert_eq!(plan.points(&[Block::X, Block::Xi], 1).len(), 81 + 50);
        assert_eq!(plan.points(&[Block::X, Block::Y, Block::Xi], 1).len(), 729 + 50);
        // Dimension 2 with three blocks: 25 vectors per block.
        assert_eq!(plan.points(&[Block::X, Block::Y, Block::Xi], 2).len(), 25usize.pow(3) + 50);
        let a = plan.points(&[Block::X], 1);
        let b = plan.points(&[Block::X], 1);
        assert_eq!(a.last().unwrap().point, b.last().unwrap().point);
    }
}
