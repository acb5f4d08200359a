use std::fmt;

use serde::{Deserialize, Serialize};

/// A multi-index `α = (α_1, ..., α_n)` of non-negative integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The unit index `e_i` in dimension `dim`.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0; dim];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// `|α|`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|&k| k as usize).sum()
    }

    /// `α! = α_1! ⋯ α_n!`.
    pub fn factorial(&self) -> u64 {
        self.0
            .iter()
            .map(|&k| (1..=k as u64).product::<u64>())
            .product()
    }

    /// `z^α`.
    pub fn pow(&self, z: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(z)
            .map(|(&k, &x)| x.powi(k as i32))
            .product()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// All indices of dimension `dim` with `|α| = order`, lexicographically
    /// descending in the first entry.
    pub fn of_order(dim: usize, order: usize) -> Vec<MultiIndex> {
        fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if prefix.len() + 1 == dim {
                prefix.push(left);
                out.push(MultiIndex(prefix.clone()));
                prefix.pop();
                return;
            }
            for k in (0..=left).rev() {
                prefix.push(k);
                rec(dim, left - k, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        if dim == 0 {
            if order == 0 {
                out.push(MultiIndex(Vec::new()));
            }
            return out;
        }
        rec(dim, order as u32, &mut Vec::new(), &mut out);
        out
    }

    /// All indices with `|α| ≤ max_order`, graded by order.
    pub fn up_to(dim: usize, max_order: usize) -> Vec<MultiIndex> {
        (0..=max_order)
            .flat_map(|k| MultiIndex::of_order(dim, k))
            .collect()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_factorials() {
        assert_eq!(MultiIndex::up_to(1, 3).len(), 4);
        // Number of indices with |α| ≤ k in dimension 2 is (k+1)(k+2)/2.
        assert_eq!(MultiIndex::up_to(2, 4).len(), 15);
        assert_eq!(MultiIndex::new(vec![3, 2]).factorial(), 12);
        assert_eq!(MultiIndex::new(vec![2, 1]).pow(&[3.0, 5.0]), 45.0);
        assert_eq!(MultiIndex::of_order(2, 2)[0], MultiIndex::new(vec![2, 0]));
        assert_eq!(MultiIndex::new(vec![1, 2]).to_string(), "(1,2)");
        assert_eq!(MultiIndex::unit(2, 1).add(&MultiIndex::unit(2, 1)).order(), 2);
    }
}
