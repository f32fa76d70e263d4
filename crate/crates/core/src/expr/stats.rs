use alloc::collections::BTreeSet;

use super::{BinOp, Expr};

/// Internal-node counts keyed by operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OpCounts {
    pub add: usize,
    pub sub: usize,
    pub mul: usize,
    pub div: usize,
}

impl OpCounts {
    pub fn get(&self, op: BinOp) -> usize {
        match op {
            BinOp::Add => self.add,
            BinOp::Sub => self.sub,
            BinOp::Mul => self.mul,
            BinOp::Div => self.div,
        }
    }

    fn bump(&mut self, op: BinOp) {
        match op {
            BinOp::Add => self.add += 1,
            BinOp::Sub => self.sub += 1,
            BinOp::Mul => self.mul += 1,
            BinOp::Div => self.div += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.add + self.sub + self.mul + self.div
    }
}

impl core::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.add += rhs.add;
        self.sub += rhs.sub;
        self.mul += rhs.mul;
        self.div += rhs.div;
    }
}

/// Structural statistics of one program, taken on the tree as given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramStats {
    pub node_count: usize,
    /// Edges on the longest root-to-leaf path.
    pub depth: usize,
    pub used_dims: BTreeSet<u32>,
    pub op_counts: OpCounts,
    pub const_count: usize,
    /// Sum over nodes of their subtree sizes.
    pub visitation_length: usize,
}

impl ProgramStats {
    pub fn of(root: &Expr) -> Self {
        let mut stats = ProgramStats {
            node_count: 0,
            depth: 0,
            used_dims: BTreeSet::new(),
            op_counts: OpCounts::default(),
            const_count: 0,
            visitation_length: 0,
        };
        let (size, depth) = walk(root, &mut stats);
        debug_assert_eq!(size, stats.node_count);
        stats.depth = depth;
        stats
    }

    pub fn internal_count(&self) -> usize {
        self.op_counts.total()
    }

    pub fn terminal_count(&self) -> usize {
        self.node_count - self.internal_count()
    }
}

/// Returns (subtree size, subtree depth) while accumulating into `stats`.
fn walk(e: &Expr, stats: &mut ProgramStats) -> (usize, usize) {
    stats.node_count += 1;
    let (size, depth) = match e {
        Expr::Bin(op, a, b) => {
            stats.op_counts.bump(*op);
            let (sa, da) = walk(a, stats);
            let (sb, db) = walk(b, stats);
            (1 + sa + sb, 1 + da.max(db))
        }
        Expr::Dim(j) => {
            stats.used_dims.insert(*j);
            (1, 0)
        }
        Expr::Const(_) => {
            stats.const_count += 1;
            (1, 0)
        }
    };
    stats.visitation_length += size;
    (size, depth)
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn mnist_logit_one() {
        let s = parse("plus(d618, minus(d303, times(d12, divide(d901, plus(d618, minus(d303, [1.73]))))))")
            .unwrap()
            .stats();
        assert_eq!(s.node_count, 13);
        assert_eq!(s.depth, 6);
        assert_eq!(s.used_dims.iter().copied().collect::<alloc::vec::Vec<_>>(), [12, 303, 618, 901]);
        assert_eq!((s.op_counts.add, s.op_counts.sub, s.op_counts.mul, s.op_counts.div), (2, 2, 1, 1));
        assert_eq!(s.const_count, 1);
        assert_eq!(s.terminal_count(), 7);
    }

    #[test]
    fn visitation_length_of_small_tree() {
        // plus(d1, times(d2, d3)): sizes 5 + 1 + 3 + 1 + 1
        let s = parse("plus(d1, times(d2, d3))").unwrap().stats();
        assert_eq!(s.visitation_length, 11);
    }
}
