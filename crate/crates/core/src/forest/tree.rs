//! CART classification trees over small-integer features.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Class counts of the (bootstrapped) training rows reaching a leaf.
    Leaf([u32; CLASSES]),
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: u16, threshold: u8, left: u32, right: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_features: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    /// Exclusive upper bound on feature values.
    pub levels: usize,
}

impl Tree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf(&self, x: &[u8]) -> &[u32; CLASSES] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf(p) => return p,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature as usize] <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    /// Checks that child links are in range and point forward, so traversal
    /// terminates.
    pub fn validate(&self, features: usize) -> bool {
        !self.nodes.is_empty()
            && self.nodes.iter().enumerate().all(|(i, n)| match *n {
                Node::Leaf(c) => c.iter().any(|&v| v > 0),
                Node::Split { feature, left, right, .. } => {
                    (feature as usize) < features
                        && (left as usize) > i
                        && (right as usize) > i
                        && (left as usize) < self.nodes.len()
                        && (right as usize) < self.nodes.len()
                }
            })
    }

    /// Grows a tree on `rows` (indices into `x`, duplicates allowed).
    pub(crate) fn fit<R: Rng>(x: &[Vec<u8>], y: &[usize], rows: Vec<usize>, params: TreeParams, rng: &mut R) -> Tree {
        let n_features = x.first().map_or(0, |r| r.len());
        let mut nodes: Vec<Node> = Vec::new();
        // (node slot, rows, depth)
        let mut stack = vec![(0usize, rows, 0usize)];
        nodes.push(Node::Leaf([0; CLASSES]));
        let mut order: Vec<usize> = (0..n_features).collect();
        let mut hist = vec![[0u32; CLASSES]; params.levels];
        while let Some((slot, rows, depth)) = stack.pop() {
            let counts = class_counts(y, &rows);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_ok = params.max_depth.is_none_or(|d| depth < d);
            let split = if !pure && depth_ok && rows.len() >= params.min_samples_split {
                order.shuffle(rng);
                best_split(x, y, &rows, &counts, &order, params, &mut hist)
            } else {
                None
            };
            match split {
                None => nodes[slot] = Node::Leaf(counts),
                Some((feature, threshold)) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][feature] <= threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf([0; CLASSES]));
                    nodes.push(Node::Leaf([0; CLASSES]));
                    nodes[slot] = Node::Split {
                        feature: feature as u16,
                        threshold,
                        left: left as u32,
                        right: left as u32 + 1,
                    };
                    stack.push((left + 1, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        Tree { nodes }
    }
}

fn class_counts(y: &[usize], rows: &[usize]) -> [u32; CLASSES] {
    let mut c = [0u32; CLASSES];
    for &i in rows {
        c[y[i]] += 1;
    }
    c
}

fn sum_sq_over_n(c: &[u32; CLASSES], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    c.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / n as f64
}

/// Best Gini split, visiting features in `order` until `max_features`
/// non-constant ones have been evaluated. Returns `None` when every feature
/// is constant on `rows`.
fn best_split(
    x: &[Vec<u8>],
    y: &[usize],
    rows: &[usize],
    counts: &[u32; CLASSES],
    order: &[usize],
    params: TreeParams,
    hist: &mut [[u32; CLASSES]],
) -> Option<(usize, u8)> {
    let total = rows.len() as u32;
    // Maximizing sum_c(l_c^2)/n_l + sum_c(r_c^2)/n_r minimizes the weighted
    // child Gini impurity.
    let mut best: Option<(f64, usize, u8)> = None;
    let mut evaluated = 0;
    for &f in order {
        if evaluated == params.max_features {
            break;
        }
        hist.iter_mut().for_each(|h| *h = [0; CLASSES]);
        let (mut lo, mut hi) = (u8::MAX, 0u8);
        for &i in rows {
            let v = x[i][f];
            hist[v as usize][y[i]] += 1;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo == hi {
            continue;
        }
        evaluated += 1;
        let mut left = [0u32; CLASSES];
        let mut n_left = 0u32;
        for v in lo..hi {
            let h = hist[v as usize];
            if h == [0; CLASSES] {
                continue;
            }
            for c in 0..CLASSES {
                left[c] += h[c];
            }
            n_left += h.iter().sum::<u32>();
            let mut right = *counts;
            for c in 0..CLASSES {
                right[c] -= left[c];
            }
            let score = sum_sq_over_n(&left, n_left) + sum_sq_over_n(&right, total - n_left);
            if best.is_none_or(|(b, _, _)| score > b + 1e-12) {
                best = Some((score, f, v));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(features: usize) -> TreeParams {
        TreeParams { max_features: features, min_samples_split: 2, max_depth: None, levels: 4 }
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let x: Vec<Vec<u8>> = vec![vec![0, 3], vec![1, 3], vec![2, 0], vec![3, 0]];
        let y = vec![0, 0, 1, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = Tree::fit(&x, &y, (0..4).collect(), params(2), &mut rng);
        assert!(tree.validate(2));
        for (row, &label) in x.iter().zip(&y) {
            let leaf = tree.leaf(row);
            assert_eq!(leaf[label], leaf.iter().sum::<u32>());
        }
    }

    #[test]
    fn constant_features_make_a_single_leaf() {
        let x = vec![vec![1u8, 2]; 5];
        let y = vec![0, 1, 1, 3, 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tree = Tree::fit(&x, &y, (0..5).collect(), params(2), &mut rng);
        assert_eq!(tree.nodes, vec![Node::Leaf([1, 2, 0, 2])]);
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn gini_picks_the_informative_feature() {
        // Feature 0 is noise; feature 1 determines the class.
        let x: Vec<Vec<u8>> = (0..40).map(|i| vec![(i % 4) as u8, (i / 20) as u8]).collect();
        let y: Vec<usize> = (0..40).map(|i| i / 20).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = Tree::fit(&x, &y, (0..40).collect(), params(2), &mut rng);
        assert!(matches!(tree.nodes[0], Node::Split { feature: 1, threshold: 0, .. }));
        assert_eq!(tree.depth(), 1);
    }

    #[test]
    fn max_depth_is_respected() {
        let x: Vec<Vec<u8>> = (0..64).map(|i| vec![(i % 4) as u8, ((i / 4) % 4) as u8]).collect();
        let y: Vec<usize> = (0..64).map(|i| (i * 7 + i / 3) % 4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = TreeParams { max_depth: Some(2), ..params(2) };
        assert!(Tree::fit(&x, &y, (0..64).collect(), p, &mut rng).depth() <= 2);
    }
}
