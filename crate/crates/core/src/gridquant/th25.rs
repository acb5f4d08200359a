use rayon::prelude::*;
use serde::Serialize;

use super::GridError;
use crate::classes::{AmplitudeSpec, DerivativeTable, SamplePlan};
use crate::expr::{Block, MultiIndex, Point};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Th25Bound {
    /// `sup |∂_y^α ∂_ξ^β a|` over the sample plan, `|α|, |β| ≤ 2n+1`.
    pub value: f64,
    pub per_block_order: usize,
    pub derivative_count: usize,
    /// `[α, β]` of the largest sample.
    pub worst_index: Vec<MultiIndex>,
    pub worst_point: Point,
}

/// Sampled derivative sup for an amplitude `a(y, ξ)`.
pub fn th25_bound(a: &AmplitudeSpec, plan: &SamplePlan) -> Result<Th25Bound, GridError> {
    let n = a.dim;
    for v in Block::X.vars(n) {
        if a.expr.depends_on(v) {
            return Err(GridError::Unbound(v));
        }
    }
    let blocks = [Block::Y, Block::Xi];
    let order = 2 * n + 1;
    let table = DerivativeTable::per_block(&a.expr, &blocks, n, order, 2 * order)?;
    let samples = plan.points(&blocks, n);
    let best = table
        .entries()
        .par_iter()
        .map(|(idx, f)| {
            let mut buf = Vec::new();
            let mut best = (f64::NEG_INFINITY, Point::new());
            for s in &samples {
                let v = f.eval_slots(s.point.slots(), &mut buf).abs();
                let v = if v.is_nan() { f64::INFINITY } else { v };
                if v > best.0 {
                    best = (v, s.point);
                }
            }
            (best.0, idx.clone(), best.1)
        })
        .reduce_with(|l, r| if r.0 > l.0 { r } else { l })
        .expect("derivative table is never empty");
    Ok(Th25Bound {
        value: best.0,
        per_block_order: order,
        derivative_count: table.len(),
        worst_index: best.1,
        worst_point: best.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{DecayFlags, OrderTriple};
    use crate::expr::{parse, Var};

    fn amp(s: &str, dim: usize) -> AmplitudeSpec {
        AmplitudeSpec::new(parse(s, dim).unwrap(), dim, OrderTriple::default(), DecayFlags::NONE).unwrap()
    }

    #[test]
    fn examples() {
        let plan = SamplePlan::default();
        assert_eq!(th25_bound(&amp("1", 1), &plan).unwrap().value, 1.0);
        // The sup sits on atan(y)·∂_ξ³⟨ξ⟩⁻¹ = atan(y)(9ξ − 6ξ³)⟨ξ⟩⁻⁷, above
        // both the zeroth-order sup π/2 and |∂_y³ atan(0)| = 2.
        let b = th25_bound(&amp("atan(y1) * jbr(xi1)^-1", 1), &plan).unwrap();
        let (y, xi) = (b.worst_point.get(Var::y(0)).unwrap(), b.worst_point.get(Var::xi(0)).unwrap());
        let closed = y.atan().abs() * (9.0 * xi - 6.0 * xi.powi(3)).abs() * (1.0 + xi * xi).powf(-3.5);
        assert!((b.value - closed).abs() < 1e-12, "{b:?}");
        assert!(b.value > 2.0);
        assert_eq!(b.worst_index[1].order(), 3);
        let s = th25_bound(&amp("3 * (atan(y1) * jbr(xi1)^-1)", 1), &plan).unwrap();
        assert_eq!(s.value, 3.0 * b.value);
        assert!(th25_bound(&amp("x1", 1), &plan).is_err());
    }

    #[test]
    fn two_dimensional_orders_exceed_the_default_limit() {
        let b = th25_bound(&amp("jbr(y1, y2)^-1 * jbr(xi1, xi2)^-1", 2), &SamplePlan::default()).unwrap();
        assert_eq!(b.per_block_order, 5);
        assert!(b.value.is_finite() && b.value >= 1.0);
    }
}
