use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: u32,
        /// `(label, training samples)` pairs, ascending by label.
        counts: Vec<(u32, usize)>,
    },
    /// Samples with the feature unset go left.
    Split {
        feature: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// CART classifier over binary features with Gini impurity, no depth limit
/// and leaves of any size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub seed: Option<u64>,
    pub root: Node,
}

fn gini(counts: &BTreeMap<u32, usize>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.values().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn count(ys: &[u32], idx: &[usize]) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for &i in idx {
        *m.entry(ys[i]).or_default() += 1;
    }
    m
}

fn majority(counts: &BTreeMap<u32, usize>) -> u32 {
    // Ascending iteration keeps the smaller label on ties.
    counts
        .iter()
        .fold((0, 0), |acc, (&l, &c)| if c > acc.1 { (l, c) } else { acc })
        .0
}

impl DecisionTree {
    /// Grows the tree. Candidate features are scanned in index order, or in
    /// a permutation drawn from `seed`; the first best split wins.
    pub fn fit(xs: &[Vec<bool>], ys: &[u32], seed: Option<u64>) -> Result<Self, ClassifierError> {
        if xs.is_empty() {
            return Err(ClassifierError::EmptyTrainingSet);
        }
        if xs.len() != ys.len() {
            return Err(ClassifierError::LengthMismatch {
                features: xs.len(),
                labels: ys.len(),
            });
        }
        let n_features = xs[0].len();
        if xs.iter().any(|x| x.len() != n_features) {
            return Err(ClassifierError::RaggedFeatures);
        }
        let mut order: Vec<usize> = (0..n_features).collect();
        if let Some(s) = seed {
            order.shuffle(&mut seed::stream(s, 0x7EE));
        }
        let idx: Vec<usize> = (0..xs.len()).collect();
        let root = grow(xs, ys, idx, &order);
        Ok(DecisionTree {
            n_features,
            seed,
            root,
        })
    }

    /// Missing trailing features read as unset.
    pub fn predict(&self, x: &[bool]) -> u32 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    left,
                    right,
                } => {
                    node = if x.get(*feature).copied().unwrap_or(false) {
                        right
                    } else {
                        left
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + d(left).max(d(right)),
            }
        }
        d(&self.root)
    }

    /// Features tested anywhere in the tree.
    pub fn used_features(&self) -> Vec<usize> {
        fn walk(n: &Node, out: &mut Vec<usize>) {
            if let Node::Split {
                feature,
                left,
                right,
            } = n
            {
                out.push(*feature);
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let tree: DecisionTree = serde_json::from_str(text).map_err(|e| ClassifierError::InvalidTree(e.to_string()))?;
        if tree.used_features().iter().any(|&f| f >= tree.n_features) {
            return Err(ClassifierError::InvalidTree("split on a feature out of range".into()));
        }
        Ok(tree)
    }
}

fn grow(xs: &[Vec<bool>], ys: &[u32], idx: Vec<usize>, order: &[usize]) -> Node {
    let counts = count(ys, &idx);
    let leaf = |counts: BTreeMap<u32, usize>| Node::Leaf {
        label: majority(&counts),
        counts: counts.into_iter().collect(),
    };
    if counts.len() <= 1 {
        return leaf(counts);
    }
    let n = idx.len();
    let parent = gini(&counts, n);
    let mut best: Option<(f64, usize)> = None;
    for &f in order {
        let mut right: BTreeMap<u32, usize> = BTreeMap::new();
        let mut n_right = 0;
        for &i in &idx {
            if xs[i][f] {
                *right.entry(ys[i]).or_default() += 1;
                n_right += 1;
            }
        }
        if n_right == 0 || n_right == n {
            continue;
        }
        let left: BTreeMap<u32, usize> = counts
            .iter()
            .map(|(&l, &c)| (l, c - right.get(&l).copied().unwrap_or(0)))
            .filter(|&(_, c)| c > 0)
            .collect();
        let n_left = n - n_right;
        let child = (n_left as f64 * gini(&left, n_left) + n_right as f64 * gini(&right, n_right)) / n as f64;
        let gain = parent - child;
        if best.is_none_or(|(g, _)| gain > g) {
            best = Some((gain, f));
        }
    }
    let Some((_, f)) = best else {
        return leaf(counts);
    };
    let (r, l): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| xs[i][f]);
    Node::Split {
        feature: f,
        left: Box::new(grow(xs, ys, l, order)),
        right: Box::new(grow(xs, ys, r, order)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_feature_separates() {
        let xs = vec![vec![false, true], vec![true, true], vec![false, false], vec![true, false]];
        let ys = vec![0, 1, 0, 1];
        let t = DecisionTree::fit(&xs, &ys, None).unwrap();
        assert_eq!(t.depth(), 1);
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(t.predict(x), *y);
        }
    }

    #[test]
    fn conflicting_duplicates_take_the_smaller_label() {
        let xs = vec![vec![true], vec![true]];
        let t = DecisionTree::fit(&xs, &[4, 2], None).unwrap();
        assert_eq!(t.predict(&[true]), 2);
        let t = DecisionTree::fit(&xs[..1], &[9], None).unwrap();
        assert_eq!(t.predict(&[false]), 9);
    }

    #[test]
    fn xor_needs_depth_two() {
        let xs = vec![vec![false, false], vec![false, true], vec![true, false], vec![true, true]];
        let ys = vec![0, 1, 1, 0];
        let t = DecisionTree::fit(&xs, &ys, None).unwrap();
        assert_eq!(t.depth(), 2);
        assert!(xs.iter().zip(&ys).all(|(x, y)| t.predict(x) == *y));
    }

    #[test]
    fn round_trips_and_rejects_empty() {
        let xs = vec![vec![false, true, true], vec![true, false, true]];
        let t = DecisionTree::fit(&xs, &[1, 2], Some(3)).unwrap();
        assert_eq!(DecisionTree::from_json(&t.to_json()).unwrap(), t);
        assert_eq!(DecisionTree::fit(&[], &[], None).unwrap_err(), ClassifierError::EmptyTrainingSet);
    }
}
