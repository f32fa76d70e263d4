//! Value-preserving rewrites.
//!
//! Every rule here produces bit-identical results under protected, saturating
//! evaluation (up to the sign of a zero, which no downstream operator can
//! observe because protected division maps both zeros to `+epsilon`). Nothing
//! is re-associated or distributed.

use alloc::boxed::Box;

use super::{BinOp, Expr};

pub(super) fn simplify(e: &Expr, epsilon: f64) -> Expr {
    match e {
        Expr::Bin(op, a, b) => rewrite(*op, simplify(a, epsilon), simplify(b, epsilon), epsilon),
        leaf => leaf.clone(),
    }
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

/// `0 - x` pattern: returns `x`.
fn negated(e: &Expr) -> Option<&Expr> {
    match e {
        Expr::Bin(BinOp::Sub, z, x) if is_const(z, 0.0) => Some(x),
        _ => None,
    }
}

/// Rewrite a node whose children are already in normal form.
fn rewrite(op: BinOp, a: Expr, b: Expr, epsilon: f64) -> Expr {
    use BinOp::*;
    if let (Expr::Const(x), Expr::Const(y)) = (&a, &b) {
        return Expr::Const(op.apply(*x, *y, epsilon));
    }
    match op {
        Add if is_const(&b, 0.0) => a,
        Add if is_const(&a, 0.0) => b,
        Add => {
            if let Some(x) = negated(&b) {
                return rewrite(Sub, a, x.clone(), epsilon);
            }
            if let Some(x) = negated(&a) {
                return rewrite(Sub, b, x.clone(), epsilon);
            }
            if a == b && a.node_count() > 1 {
                return Expr::bin(Mul, Expr::Const(2.0), a);
            }
            Expr::bin(Add, a, b)
        }
        Sub if is_const(&b, 0.0) => a,
        Sub if a == b => Expr::Const(0.0),
        Sub => {
            if let Some(x) = negated(&b) {
                return rewrite(Add, a, x.clone(), epsilon);
            }
            Expr::bin(Sub, a, b)
        }
        Mul if is_const(&a, 0.0) || is_const(&b, 0.0) => Expr::Const(0.0),
        Mul if is_const(&b, 1.0) => a,
        Mul if is_const(&a, 1.0) => b,
        Div if is_const(&a, 0.0) => Expr::Const(0.0),
        Div if is_const(&b, 1.0) && epsilon <= 1.0 => a,
        _ => Expr::Bin(op, Box::new(a), Box::new(b)),
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, DEFAULT_EPSILON};

    fn s(text: &str) -> alloc::string::String {
        parse(text).unwrap().simplify(DEFAULT_EPSILON).serialize()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(s("times(d3,[0.0])"), "[0.0]");
        assert_eq!(s("plus(d3,[0.0])"), "d3");
        assert_eq!(s("plus([2.0],[3.0])"), "[5.0]");
    }

    #[test]
    fn neutral_elements() {
        assert_eq!(s("minus(d1, [0.0])"), "d1");
        assert_eq!(s("times([1.0], d4)"), "d4");
        assert_eq!(s("divide(d4, [1.0])"), "d4");
        assert_eq!(s("divide([0.0], d4)"), "[0.0]");
        assert_eq!(s("minus(plus(d1, d2), plus(d1, d2))"), "[0.0]");
    }

    #[test]
    fn double_negation() {
        assert_eq!(s("minus([0.0], minus([0.0], d7))"), "d7");
        assert_eq!(s("minus(d1, minus([0.0], d2))"), "plus(d1, d2)");
        assert_eq!(s("plus(minus([0.0], d2), d1)"), "minus(d1, d2)");
    }

    #[test]
    fn nested_folding_cascades() {
        assert_eq!(s("times(d1, minus([3.0], plus([1.0], [2.0])))"), "[0.0]");
        assert_eq!(s("plus(times(d1, d2), times(d1, d2))"), "times([2.0], times(d1, d2))");
    }

    #[test]
    fn protected_fold_uses_epsilon() {
        assert_eq!(s("divide([1.0], [0.0])"), "[1000000.0]");
    }
}
