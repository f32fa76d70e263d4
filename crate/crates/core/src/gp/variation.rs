use rand::Rng;

use super::config::GpConfig;
use super::init::{random_const, random_op};
use crate::expr::Expr;

/// Swap uniformly chosen subtrees of `a` and `b`.
///
/// A child deeper than `max_depth` is replaced by its own parent.
pub fn subtree_crossover<R: Rng + ?Sized>(a: &Expr, b: &Expr, rng: &mut R, max_depth: usize) -> (Expr, Expr) {
    let i = rng.random_range(0..a.node_count());
    let j = rng.random_range(0..b.node_count());
    let sub_a = a.get(i).expect("index within node count");
    let sub_b = b.get(j).expect("index within node count");
    let child_a = a.replace(i, sub_b);
    let child_b = b.replace(j, sub_a);
    let child_a = if child_a.depth() <= max_depth { child_a } else { a.clone() };
    let child_b = if child_b.depth() <= max_depth { child_b } else { b.clone() };
    (child_a, child_b)
}

/// Replace one uniformly chosen node in kind: an operator by a different
/// operator, a coordinate by a coordinate of the same view, a constant by a
/// fresh uniform constant. Shape and depth are unchanged.
pub fn point_mutate<R: Rng + ?Sized>(e: &Expr, rng: &mut R, view: &[usize], config: &GpConfig) -> Expr {
    let i = rng.random_range(0..e.node_count());
    let replacement = match e.get(i).expect("index within node count") {
        Expr::Bin(op, a, b) => {
            let mut new_op = random_op(rng);
            while new_op == *op {
                new_op = random_op(rng);
            }
            Expr::Bin(new_op, a.clone(), b.clone())
        }
        Expr::Dim(j) => {
            let others: alloc::vec::Vec<usize> = view.iter().copied().filter(|&v| v as u32 != *j).collect();
            if others.is_empty() {
                Expr::Dim(*j)
            } else {
                Expr::Dim(others[rng.random_range(0..others.len())] as u32)
            }
        }
        Expr::Const(_) => Expr::Const(random_const(rng, config)),
    };
    e.replace(i, &replacement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::init::{random_tree, TreeMethod};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_terminal_crossover_swaps_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = subtree_crossover(&Expr::Dim(1), &Expr::Dim(2), &mut rng, 10);
        assert_eq!((a, b), (Expr::Dim(2), Expr::Dim(1)));
    }

    #[test]
    fn crossover_preserves_node_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = GpConfig::default();
        for _ in 0..200 {
            let a = random_tree(&mut rng, &[0, 1], 4, TreeMethod::Grow, &cfg);
            let b = random_tree(&mut rng, &[0, 1], 4, TreeMethod::Grow, &cfg);
            let (c, d) = subtree_crossover(&a, &b, &mut rng, 100);
            assert_eq!(c.node_count() + d.node_count(), a.node_count() + b.node_count());
        }
    }

    #[test]
    fn mutated_constants_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = GpConfig::default();
        for _ in 0..1000 {
            match point_mutate(&Expr::Const(3.0), &mut rng, &[0], &cfg) {
                Expr::Const(c) => assert!((-10.0..=10.0).contains(&c)),
                other => panic!("constant mutated into {other}"),
            }
        }
    }

    #[test]
    fn mutation_keeps_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = GpConfig::default();
        for _ in 0..200 {
            let t = random_tree(&mut rng, &[4, 7, 9], 5, TreeMethod::Grow, &cfg);
            let m = point_mutate(&t, &mut rng, &[4, 7, 9], &cfg);
            assert_eq!(m.node_count(), t.node_count());
            assert_eq!(m.depth(), t.depth());
        }
    }
}
