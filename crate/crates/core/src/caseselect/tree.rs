use serde::{Deserialize, Serialize};

use super::{CaseGroup, LabeledCases};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeOptions {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self { max_depth: 6, min_leaf: 10 }
    }
}

/// Binary classification tree; `first` is true for the group's first case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf { first: bool, n: usize },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> bool {
        match self {
            TreeNode::Leaf { first, .. } => *first,
            TreeNode::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    rows: Vec<&'a [f64]>,
    ys: Vec<bool>,
    opts: TreeOptions,
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let pos = idx.iter().filter(|&&i| self.ys[i]).count();
        TreeNode::Leaf { first: 2 * pos >= idx.len(), n: idx.len() }
    }

    fn build(&self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.ys[i]).count();
        if pos == 0 || pos == n || depth >= self.opts.max_depth || n < 2 * self.opts.min_leaf.max(1) {
            return self.leaf(&idx);
        }
        let parent = gini(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let n_features = self.rows[idx[0]].len();
        let mut sorted = idx.clone();
        for f in 0..n_features {
            sorted.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            let mut left_pos = 0;
            for k in 1..n {
                if self.ys[sorted[k - 1]] {
                    left_pos += 1;
                }
                let (lo, hi) = (self.rows[sorted[k - 1]][f], self.rows[sorted[k]][f]);
                if lo == hi || k < self.opts.min_leaf || n - k < self.opts.min_leaf {
                    continue;
                }
                let impurity = (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(pos - left_pos, n - k)) / n as f64;
                if best.is_none_or(|b| impurity < b.0) {
                    best = Some((impurity, f, 0.5 * (lo + hi)));
                }
            }
        }
        match best {
            Some((impurity, feature, threshold)) if impurity < parent - 1e-12 => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
                TreeNode::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(l, depth + 1)),
                    right: Box::new(self.build(r, depth + 1)),
                }
            }
            _ => self.leaf(&idx),
        }
    }
}

/// CART tree with Gini impurity on `θ*` plus the surrogate log-ratio.
pub fn fit_tree(labels: &LabeledCases, group: CaseGroup, opts: &TreeOptions) -> Result<TreeNode> {
    let (rows, ys) = labels.group_rows(group);
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!("no labelled rows in {group:?}")));
    }
    let n = rows.len();
    let b = Builder { rows, ys, opts: *opts };
    Ok(b.build((0..n).collect(), 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caseselect::{fit_logistic, CaseLabel};
    use crate::rng::RngStream;
    use rand::Rng;

    fn group13(rows: &[(Vec<f64>, bool)]) -> LabeledCases {
        let mut l = LabeledCases::default();
        for (x, first) in rows {
            l.push(&x[..x.len() - 1], x[x.len() - 1], if *first { CaseLabel::Case1 } else { CaseLabel::Case3 });
        }
        l
    }

    fn accuracy(rows: &[(Vec<f64>, bool)], f: impl Fn(&[f64]) -> bool) -> f64 {
        rows.iter().filter(|(x, y)| f(x) == *y).count() as f64 / rows.len() as f64
    }

    #[test]
    fn single_split() {
        let mut rng = RngStream::new(1, 0);
        let rows: Vec<(Vec<f64>, bool)> = (0..300)
            .map(|_| {
                let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let y = x[0] > 0.0;
                (x, y)
            })
            .collect();
        let tree = fit_tree(&group13(&rows), CaseGroup::Group13, &TreeOptions::default()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(accuracy(&rows, |x| tree.predict(x)), 1.0);
    }

    #[test]
    fn majority_only_data_is_a_leaf() {
        let rows: Vec<(Vec<f64>, bool)> = (0..50).map(|i| (vec![i as f64, 0.0], false)).collect();
        let tree = fit_tree(&group13(&rows), CaseGroup::Group13, &TreeOptions::default()).unwrap();
        assert_eq!(tree, TreeNode::Leaf { first: false, n: 50 });
    }

    #[test]
    fn beats_logistic_on_xor() {
        let mut rng = RngStream::new(2, 0);
        let rows: Vec<(Vec<f64>, bool)> = (0..800)
            .map(|_| {
                let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0];
                let y = (x[0] > 0.0) != (x[1] > 0.0);
                (x, y)
            })
            .collect();
        let labels = group13(&rows);
        let tree = fit_tree(&labels, CaseGroup::Group13, &TreeOptions::default()).unwrap();
        let logit = fit_logistic(&labels, CaseGroup::Group13).unwrap();
        let tree_acc = accuracy(&rows, |x| tree.predict(x));
        let logit_acc = accuracy(&rows, |x| logit.probability(&x[..2]) > 0.5);
        assert!(tree_acc >= logit_acc && tree_acc > 0.95, "{tree_acc} vs {logit_acc}");
    }

    #[test]
    fn respects_limits_and_beats_baseline() {
        let mut rng = RngStream::new(3, 0);
        let rows: Vec<(Vec<f64>, bool)> = (0..2000)
            .map(|_| {
                let x: Vec<f64> = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let y = rng.random::<f64>() < 0.5 + 0.4 * (3.0 * x[0]).sin() * x[1];
                (x, y)
            })
            .collect();
        let opts = TreeOptions { max_depth: 3, min_leaf: 25 };
        let tree = fit_tree(&group13(&rows), CaseGroup::Group13, &opts).unwrap();
        assert!(tree.depth() <= 3);
        fn leaves(t: &TreeNode, out: &mut Vec<usize>) {
            match t {
                TreeNode::Leaf { n, .. } => out.push(*n),
                TreeNode::Split { left, right, .. } => {
                    leaves(left, out);
                    leaves(right, out);
                }
            }
        }
        let mut sizes = vec![];
        leaves(&tree, &mut sizes);
        assert!(sizes.iter().all(|&n| n >= 25));
        let pos = rows.iter().filter(|r| r.1).count() as f64 / rows.len() as f64;
        assert!(accuracy(&rows, |x| tree.predict(x)) >= pos.max(1.0 - pos));
    }
}
