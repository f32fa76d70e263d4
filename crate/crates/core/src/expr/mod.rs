//! Arithmetic expression trees over embedding coordinates.
//!
//! A [`Program`] is a binary tree whose internal nodes are `+`, `-`, `*` and
//! protected `/`, and whose leaves are coordinate references (`d12`) or real
//! constants (`[1.73]`). Programs are immutable values: variation operators
//! build new trees.

mod parse;
mod simplify;
mod stats;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::matrix::Matrix;
use crate::{Error, Result};

pub use parse::{parse, parse_recovering, ParseError, ParseErrorKind, Recovered};
pub use stats::{OpCounts, ProgramStats};

/// Denominator magnitude below which division is protected.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub const ALL: [BinOp; 4] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div];

    /// Name used in the prefix text format.
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "plus",
            BinOp::Sub => "minus",
            BinOp::Mul => "times",
            BinOp::Div => "divide",
        }
    }

    pub fn from_name(name: &str) -> Option<BinOp> {
        match name {
            "plus" => Some(BinOp::Add),
            "minus" => Some(BinOp::Sub),
            "times" => Some(BinOp::Mul),
            "divide" => Some(BinOp::Div),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64, epsilon: f64) -> f64 {
        let v = match self {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => protected_div(a, b, epsilon),
        };
        saturate(v)
    }
}

/// `a / b`, or `a / (epsilon * sign(b))` when `|b| < epsilon`, with `sign(0) = +1`.
#[inline]
pub fn protected_div(a: f64, b: f64, epsilon: f64) -> f64 {
    if b.abs() >= epsilon {
        a / b
    } else if b >= 0.0 {
        a / epsilon
    } else {
        a / -epsilon
    }
}

/// Overflow saturates to `±f64::MAX` so every node value of a finite row stays finite.
#[inline]
fn saturate(v: f64) -> f64 {
    if v.is_infinite() {
        if v > 0.0 {
            f64::MAX
        } else {
            f64::MIN
        }
    } else {
        v
    }
}

/// One node of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Dim(u32),
    Const(f64),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, Expr::Bin(..))
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Bin(_, a, b) => 1 + a.node_count() + b.node_count(),
            _ => 1,
        }
    }

    /// Depth in edges; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
            _ => 0,
        }
    }

    pub fn max_dim(&self) -> Option<u32> {
        match self {
            Expr::Bin(_, a, b) => match (a.max_dim(), b.max_dim()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Expr::Dim(j) => Some(*j),
            Expr::Const(_) => None,
        }
    }

    pub fn collect_dims(&self, out: &mut BTreeSet<u32>) {
        match self {
            Expr::Bin(_, a, b) => {
                a.collect_dims(out);
                b.collect_dims(out);
            }
            Expr::Dim(j) => {
                out.insert(*j);
            }
            Expr::Const(_) => {}
        }
    }

    /// Evaluate without bounds checking beyond slice indexing; callers check
    /// `max_dim` once up front.
    #[inline]
    pub(crate) fn eval_raw(&self, row: &[f64], epsilon: f64) -> f64 {
        match self {
            Expr::Bin(op, a, b) => op.apply(a.eval_raw(row, epsilon), b.eval_raw(row, epsilon), epsilon),
            Expr::Dim(j) => row[*j as usize],
            Expr::Const(c) => *c,
        }
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        if let Expr::Bin(_, a, b) = self {
            a.visit(f);
            b.visit(f);
        }
    }

    /// Node at pre-order position `index`.
    pub fn get(&self, index: usize) -> Option<&Expr> {
        let mut remaining = index;
        self.get_inner(&mut remaining)
    }

    fn get_inner(&self, remaining: &mut usize) -> Option<&Expr> {
        if *remaining == 0 {
            return Some(self);
        }
        *remaining -= 1;
        if let Expr::Bin(_, a, b) = self {
            if let Some(found) = a.get_inner(remaining) {
                return Some(found);
            }
            return b.get_inner(remaining);
        }
        None
    }

    /// Copy of `self` with the node at pre-order position `index` replaced.
    ///
    /// An out-of-range index leaves the tree unchanged.
    pub fn replace(&self, index: usize, with: &Expr) -> Expr {
        if index == 0 {
            return with.clone();
        }
        match self {
            Expr::Bin(op, a, b) => {
                let left = a.node_count();
                if index - 1 < left {
                    Expr::Bin(*op, Box::new(a.replace(index - 1, with)), b.clone())
                } else {
                    Expr::Bin(*op, a.clone(), Box::new(b.replace(index - 1 - left, with)))
                }
            }
            leaf => leaf.clone(),
        }
    }

    /// Depth of the node at pre-order position `index` below the root.
    pub fn depth_of(&self, index: usize) -> Option<usize> {
        fn go(e: &Expr, remaining: &mut usize, level: usize) -> Option<usize> {
            if *remaining == 0 {
                return Some(level);
            }
            *remaining -= 1;
            if let Expr::Bin(_, a, b) = e {
                if let Some(d) = go(a, remaining, level + 1) {
                    return Some(d);
                }
                return go(b, remaining, level + 1);
            }
            None
        }
        let mut remaining = index;
        go(self, &mut remaining, 0)
    }

    /// Mutable visit over constant leaves in pre-order.
    pub fn constants_mut(&mut self, f: &mut impl FnMut(&mut f64)) {
        match self {
            Expr::Bin(_, a, b) => {
                a.constants_mut(f);
                b.constants_mut(f);
            }
            Expr::Const(c) => f(c),
            Expr::Dim(_) => {}
        }
    }
}

/// A logit program: an expression tree plus the operations the pipeline
/// needs on it (evaluation, text form, statistics, simplification).
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    root: Expr,
}

impl Program {
    pub fn new(root: Expr) -> Self {
        Self { root }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(Expr::Const(value))
    }

    pub fn dim(index: u32) -> Self {
        Self::new(Expr::Dim(index))
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn root_mut(&mut self) -> &mut Expr {
        &mut self.root
    }

    pub fn into_root(self) -> Expr {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn used_dims(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.root.collect_dims(&mut out);
        out
    }

    pub fn stats(&self) -> ProgramStats {
        ProgramStats::of(&self.root)
    }

    /// `true` if every referenced coordinate is a member of `view`.
    pub fn uses_only(&self, view: &BTreeSet<u32>) -> bool {
        let mut ok = true;
        self.root.visit(&mut |e| {
            if let Expr::Dim(j) = e {
                ok &= view.contains(j);
            }
        });
        ok
    }

    pub fn check_width(&self, width: usize) -> Result<()> {
        match self.root.max_dim() {
            Some(j) if j as usize >= width => Err(Error::DimOutOfRange { index: j, width }),
            _ => Ok(()),
        }
    }

    /// Value of the program on one row.
    pub fn eval(&self, row: &[f64], epsilon: f64) -> Result<f64> {
        self.check_width(row.len())?;
        Ok(self.root.eval_raw(row, epsilon))
    }

    /// Row-wise evaluation over a matrix.
    pub fn eval_matrix(&self, x: &Matrix, epsilon: f64) -> Result<Vec<f64>> {
        self.check_width(x.cols())?;
        Ok(x.rows_iter().map(|row| self.root.eval_raw(row, epsilon)).collect())
    }

    /// Evaluate on the given row indices of `x`.
    pub fn eval_rows(&self, x: &Matrix, rows: &[usize], epsilon: f64) -> Result<Vec<f64>> {
        self.check_width(x.cols())?;
        Ok(rows.iter().map(|&i| self.root.eval_raw(x.row(i), epsilon)).collect())
    }

    /// Constant-folded, neutral-element-pruned copy with identical values.
    pub fn simplify(&self, epsilon: f64) -> Program {
        Program::new(simplify::simplify(&self.root, epsilon))
    }

    /// Canonical prefix text, e.g. `plus(d618, [1.73])`.
    pub fn serialize(&self) -> alloc::string::String {
        alloc::string::ToString::to_string(self)
    }

    pub fn parse(text: &str) -> Result<Program, ParseError> {
        parse(text)
    }
}

impl From<Expr> for Program {
    fn from(root: Expr) -> Self {
        Program::new(root)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Bin(op, a, b) => write!(f, "{}({}, {})", op.name(), a, b),
            Expr::Dim(j) => write!(f, "d{j}"),
            // `{:?}` is the shortest decimal that round-trips and keeps a `.0` on integers.
            Expr::Const(c) => write!(f, "[{c:?}]"),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

impl FromStr for Program {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Program {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Program {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = <alloc::string::String as serde::Deserialize>::deserialize(d)?;
        parse(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn p(text: &str) -> Program {
        parse(text).unwrap()
    }

    #[test]
    fn addition_of_dim_and_constant() {
        assert_eq!(p("plus(d0,[2.0])").eval(&[3.0], DEFAULT_EPSILON).unwrap(), 5.0);
    }

    #[test]
    fn protected_division_by_zero() {
        let v = p("divide([1.0],[0.0])").eval(&[], DEFAULT_EPSILON).unwrap();
        assert_eq!(v, 1e6);
        let neg = p("divide([1.0],[-0.0000001])").eval(&[], DEFAULT_EPSILON).unwrap();
        assert_eq!(neg, -1e6);
        // sign(0) = +1 for negative zero as well
        assert_eq!(protected_div(2.0, -0.0, 0.5), 4.0);
    }

    #[test]
    fn mnist_logit_one_collapses_nested_term() {
        let prog = p("plus(d618, minus(d303, times(d12, divide(d901, plus(d618, minus(d303, [1.73]))))))");
        let mut row = vec![0.0; 1024];
        row[618] = 1.0;
        row[303] = 1.0;
        assert_eq!(prog.eval(&row, DEFAULT_EPSILON).unwrap(), 2.0);
    }

    #[test]
    fn out_of_range_dimension_is_an_error() {
        let err = p("d5").eval(&[1.0, 2.0], DEFAULT_EPSILON).unwrap_err();
        assert_eq!(err, Error::DimOutOfRange { index: 5, width: 2 });
    }

    #[test]
    fn overflow_saturates() {
        let factor = p("divide([10.0], [0.0])").into_root();
        let root = (0..50).fold(Expr::Const(1.0), |acc, _| Expr::bin(BinOp::Mul, factor.clone(), acc));
        let prog = Program::new(root);
        let v = prog.eval(&[], DEFAULT_EPSILON).unwrap();
        assert_eq!(v, f64::MAX);
        let diff = Program::new(Expr::bin(BinOp::Sub, prog.root().clone(), Expr::bin(BinOp::Sub, Expr::Const(0.0), prog.root().clone())));
        assert!(diff.eval(&[], DEFAULT_EPSILON).unwrap().is_finite());
    }

    #[test]
    fn eval_matrix_matches_rows() {
        let x = Matrix::from_rows(&[vec![0.0, 7.0], vec![0.0, -2.0]]).unwrap();
        assert_eq!(p("d1").eval_matrix(&x, DEFAULT_EPSILON).unwrap(), vec![7.0, -2.0]);
        let x3 = Matrix::zeros(3, 4);
        assert_eq!(p("[1.5]").eval_matrix(&x3, DEFAULT_EPSILON).unwrap(), vec![1.5; 3]);
    }

    #[test]
    fn pre_order_get_and_replace() {
        let prog = p("plus(d1, times(d2, [3.0]))");
        assert_eq!(prog.root().get(2), Some(&Expr::bin(BinOp::Mul, Expr::Dim(2), Expr::Const(3.0))));
        assert_eq!(prog.root().get(4), Some(&Expr::Const(3.0)));
        assert_eq!(prog.root().get(5), None);
        let swapped = prog.root().replace(4, &Expr::Dim(9));
        assert_eq!(swapped.to_string(), "plus(d1, times(d2, d9))");
        assert_eq!(prog.root().depth_of(3), Some(2));
    }

    #[test]
    fn serialize_terminals() {
        assert_eq!(Program::constant(1.73).serialize(), "[1.73]");
        assert_eq!(Program::dim(618).serialize(), "d618");
        assert_eq!(Program::constant(5.0).serialize(), "[5.0]");
    }
}
