//! Segment tree of truncated power series under multiplication.

use crate::scalar::Scalar;
use crate::series;

#[derive(Clone, Debug)]
pub struct ProductTree<S: Scalar> {
    len: usize,
    size: usize,
    count: usize,
    nodes: Vec<S>,
}

impl<S: Scalar> ProductTree<S> {
    /// `len` is the number of retained coefficients (degree + 1).
    pub fn new(leaves: &[Vec<S>], len: usize) -> Self {
        let count = leaves.len();
        let size = count.next_power_of_two().max(1);
        let mut nodes = Vec::with_capacity(2 * size * len);
        for _ in 0..2 * size {
            nodes.extend(series::unit::<S>(len));
        }
        let mut tree = ProductTree {
            len,
            size,
            count,
            nodes,
        };
        for (i, leaf) in leaves.iter().enumerate() {
            tree.write_node(size + i, leaf);
        }
        for node in (1..size).rev() {
            tree.recompute(node);
        }
        tree
    }

    pub fn leaves(&self) -> usize {
        self.count
    }

    fn node(&self, i: usize) -> &[S] {
        &self.nodes[i * self.len..(i + 1) * self.len]
    }

    fn write_node(&mut self, i: usize, value: &[S]) {
        let len = self.len;
        for (m, slot) in self.nodes[i * len..(i + 1) * len].iter_mut().enumerate() {
            *slot = value.get(m).cloned().unwrap_or_else(S::zero);
        }
    }

    fn recompute(&mut self, i: usize) {
        let len = self.len;
        let (head, tail) = self.nodes.split_at_mut(2 * i * len);
        series::mul_into(&tail[..len], &tail[len..2 * len], &mut head[i * len..(i + 1) * len]);
    }

    pub fn root(&self) -> &[S] {
        self.node(1)
    }

    pub fn leaf(&self, i: usize) -> &[S] {
        self.node(self.size + i)
    }

    pub fn set_leaf(&mut self, i: usize, value: &[S]) {
        let mut node = self.size + i;
        self.write_node(node, value);
        while node > 1 {
            node /= 2;
            self.recompute(node);
        }
    }

    /// Product of all leaves with some replaced, without mutating the tree.
    /// A `None` replacement drops the leaf from the product.
    pub fn product_with(&self, subs: &[(usize, Option<&[S]>)]) -> Vec<S> {
        self.product_rec(1, 0, self.size, subs)
    }

    /// Product of all leaves except the given ones.
    pub fn product_excluding(&self, excluded: &[usize]) -> Vec<S> {
        let subs: Vec<(usize, Option<&[S]>)> = excluded.iter().map(|&i| (i, None)).collect();
        self.product_with(&subs)
    }

    fn product_rec(&self, node: usize, lo: usize, hi: usize, subs: &[(usize, Option<&[S]>)]) -> Vec<S> {
        let touched: Vec<&(usize, Option<&[S]>)> = subs.iter().filter(|(i, _)| *i >= lo && *i < hi).collect();
        if touched.is_empty() {
            return self.node(node).to_vec();
        }
        if hi - lo == 1 {
            return match touched[0].1 {
                Some(v) => {
                    let mut out = series::unit::<S>(self.len);
                    for (m, slot) in out.iter_mut().enumerate() {
                        *slot = v.get(m).cloned().unwrap_or_else(S::zero);
                    }
                    out
                }
                None => series::unit::<S>(self.len),
            };
        }
        let mid = (lo + hi) / 2;
        let left = self.product_rec(2 * node, lo, mid, subs);
        let right = self.product_rec(2 * node + 1, mid, hi, subs);
        series::mul(&left, &right, self.len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, Q};
    use proptest::prelude::*;

    fn naive(leaves: &[Vec<Q>], len: usize) -> Vec<Q> {
        leaves
            .iter()
            .fold(series::unit::<Q>(len), |acc, l| series::mul(&acc, l, len))
    }

    proptest! {
        #[test]
        fn root_matches_naive_product(
            raw in proptest::collection::vec(proptest::collection::vec(-3i64..4, 4), 1..9),
            updates in proptest::collection::vec((0usize..9, proptest::collection::vec(-3i64..4, 4)), 0..5),
        ) {
            let len = 4;
            let mut leaves: Vec<Vec<Q>> = raw.iter().map(|c| c.iter().map(|&v| q(v)).collect()).collect();
            let mut tree = ProductTree::new(&leaves, len);
            for (i, c) in updates {
                let i = i % leaves.len();
                leaves[i] = c.iter().map(|&v| q(v)).collect();
                tree.set_leaf(i, &leaves[i]);
            }
            prop_assert_eq!(tree.root().to_vec(), naive(&leaves, len));
            let ex = vec![0, leaves.len() - 1];
            let kept: Vec<Vec<Q>> = leaves.iter().enumerate().filter(|(i, _)| !ex.contains(i)).map(|(_, l)| l.clone()).collect();
            prop_assert_eq!(tree.product_excluding(&ex), naive(&kept, len));
        }
    }
}
