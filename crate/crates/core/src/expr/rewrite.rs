use std::collections::HashMap;

use super::node::{Expr, Node};
use super::var::{Block, Var};

/// Conservative bottom-up simplification: constant folding, 0/1 identities,
/// `e - e = 0`, `e^0 = 1`. No factoring or expansion.
pub fn simplify(e: &Expr) -> Expr {
    fn go(e: &Expr, memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(hit) = memo.get(&e.id()) {
            return hit.clone();
        }
        let out = e.rebuild(&mut |c| go(c, memo));
        memo.insert(e.id(), out.clone());
        out
    }
    go(e, &mut HashMap::new())
}

/// Replace variables by expressions simultaneously, then simplify locally.
pub fn substitute(e: &Expr, subs: &[(Var, Expr)]) -> Expr {
    fn go(e: &Expr, subs: &[(Var, Expr)], memo: &mut HashMap<usize, Expr>) -> Expr {
        if let Some(hit) = memo.get(&e.id()) {
            return hit.clone();
        }
        let out = match e.node() {
            Node::Var(v) => subs
                .iter()
                .find(|(w, _)| w == v)
                .map_or_else(|| e.clone(), |(_, r)| r.clone()),
            _ => e.rebuild(&mut |c| go(c, subs, memo)),
        };
        memo.insert(e.id(), out.clone());
        out
    }
    if subs.is_empty() {
        return e.clone();
    }
    go(e, subs, &mut HashMap::new())
}

/// Rename every component of block `from` to the same component of `to`.
pub fn rename_block(e: &Expr, from: Block, to: Block, dim: usize) -> Expr {
    let subs: Vec<_> = (0..dim).map(|i| (from.var(i), to.var(i).into())).collect();
    substitute(e, &subs)
}
