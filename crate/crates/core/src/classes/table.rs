use std::collections::HashMap;

use crate::expr::{diff, Block, CompiledExpr, DiffError, Expr, MultiIndex, MAX_ORDER};

/// Compiled derivatives of one expression over a set of block multi-indices.
/// Each derivative is obtained from a cached one of order one less.
#[derive(Debug, Clone)]
pub struct DerivativeTable {
    entries: Vec<(Vec<MultiIndex>, CompiledExpr)>,
    exprs: Vec<Expr>,
}

impl DerivativeTable {
    /// All combinations with total order `≤ max_order`.
    pub fn total_order(
        e: &Expr,
        blocks: &[Block],
        dim: usize,
        max_order: usize,
    ) -> Result<Self, DiffError> {
        if max_order > MAX_ORDER {
            return Err(DiffError::MaxOrderExceeded {
                order: max_order,
                limit: MAX_ORDER,
            });
        }
        let flat = MultiIndex::up_to(blocks.len() * dim, max_order);
        Ok(Self::build(e, blocks, dim, flat))
    }

    /// All combinations with every block order `≤ max_each`; the total may
    /// reach `blocks.len() · max_each`, checked against `limit`.
    pub fn per_block(
        e: &Expr,
        blocks: &[Block],
        dim: usize,
        max_each: usize,
        limit: usize,
    ) -> Result<Self, DiffError> {
        let total = blocks.len() * max_each;
        if total > limit {
            return Err(DiffError::MaxOrderExceeded { order: total, limit });
        }
        let flat: Vec<MultiIndex> = MultiIndex::up_to(blocks.len() * dim, total)
            .into_iter()
            .filter(|m| {
                m.entries()
                    .chunks(dim)
                    .all(|c| c.iter().sum::<u32>() as usize <= max_each)
            })
            .collect();
        Ok(Self::build(e, blocks, dim, flat))
    }

    fn build(e: &Expr, blocks: &[Block], dim: usize, flat: Vec<MultiIndex>) -> Self {
        let vars: Vec<_> = blocks
            .iter()
            .flat_map(|b| (0..dim).map(move |i| b.var(i)))
            .collect();
        let mut cache: HashMap<Vec<u32>, Expr> = HashMap::new();
        cache.insert(vec![0; vars.len()], e.clone());
        let mut exprs = Vec::with_capacity(flat.len());
        // `flat` is graded by order, so every parent is already cached.
        for m in &flat {
            let key = m.entries().to_vec();
            if !cache.contains_key(&key) {
                let i = key.iter().rposition(|&k| k > 0).expect("non-zero index");
                let mut parent = key.clone();
                parent[i] -= 1;
                let d = diff(&cache[&parent], vars[i], 1);
                cache.insert(key.clone(), d);
            }
            exprs.push(cache[&key].clone());
        }
        let entries = flat
            .iter()
            .zip(&exprs)
            .map(|(m, d)| {
                let idx = m
                    .entries()
                    .chunks(dim)
                    .map(|c| MultiIndex::new(c.to_vec()))
                    .collect();
                (idx, d.compile())
            })
            .collect();
        DerivativeTable { entries, exprs }
    }

    pub fn entries(&self) -> &[(Vec<MultiIndex>, CompiledExpr)] {
        &self.entries
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Point, Var};

    #[test]
    fn entries_match_direct_differentiation() {
        let e = parse("sin(x1*xi1) * jbr(xi1)", 1).unwrap();
        let t = DerivativeTable::total_order(&e, &[Block::X, Block::Xi], 1, 3).unwrap();
        assert_eq!(t.len(), 10);
        let p = Point::new().with(Var::x(0), 0.3).with(Var::xi(0), -1.2);
        for (idx, f) in t.entries() {
            let direct = diff(
                &diff(&e, Var::x(0), idx[0].order()),
                Var::xi(0),
                idx[1].order(),
            );
            assert!((f.eval(&p) - direct.eval(&p).unwrap()).abs() < 1e-12);
        }
        let t = DerivativeTable::per_block(&e, &[Block::X, Block::Xi], 1, 3, 6).unwrap();
        assert_eq!(t.len(), 16);
        assert!(DerivativeTable::per_block(&e, &[Block::X, Block::Xi], 1, 3, 5).is_err());
    }
}
