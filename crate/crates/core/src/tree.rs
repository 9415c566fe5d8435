//! Multi-output full-depth regression tree.
//!
//! Axis-aligned splits on real and categorical features, chosen to maximize
//! the reduction in total variance summed over all outputs. All features
//! are candidates at every split; there is no depth cap and no feature
//! subsampling. Equal-gain splits are broken toward the lowest feature
//! index, then the lowest threshold, and rows are canonically ordered
//! before growing, so fitting is invariant to row order.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeMap;

/// One model input cell: a continuous value or an id into a per-column
/// category vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue<S> {
    Real(S),
    Cat(u32),
}

impl<S: Scalar> FeatureValue<S> {
    fn cmp_same_kind(&self, other: &Self) -> Ordering {
        match (self, other) {
            (FeatureValue::Real(a), FeatureValue::Real(b)) => {
                a.partial_cmp(b).unwrap_or(Ordering::Equal)
            }
            (FeatureValue::Cat(a), FeatureValue::Cat(b)) => a.cmp(b),
            (FeatureValue::Real(_), FeatureValue::Cat(_)) => Ordering::Less,
            (FeatureValue::Cat(_), FeatureValue::Real(_)) => Ordering::Greater,
        }
    }
}

/// Feature column kind, inferred at fit time and enforced at predict time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Real,
    Categorical,
}

/// Split predicate at an internal node. Rows passing the test go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitTest<S> {
    /// value ≤ threshold goes left.
    Threshold(S),
    /// category == id goes left (one-vs-rest). `seen` is the sorted set of
    /// category ids present at this node during training; ids outside it
    /// are routed to the child with more training rows.
    Category { id: u32, seen: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<S> {
    Leaf {
        mean: Vec<S>,
        count: usize,
    },
    Internal {
        feature: usize,
        test: SplitTest<S>,
        n_left: usize,
        n_right: usize,
        left: Box<TreeNode<S>>,
        right: Box<TreeNode<S>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel<S> {
    pub root: TreeNode<S>,
    pub n_outputs: usize,
    pub n_features: usize,
    pub feature_kinds: Vec<FeatureKind>,
}

/// Borrowed training row.
#[derive(Debug, Clone, Copy)]
pub struct TreeRow<'a, S> {
    pub input: &'a [FeatureValue<S>],
    pub output: &'a [S],
}

fn kind_of<S>(v: &FeatureValue<S>) -> FeatureKind {
    match v {
        FeatureValue::Real(_) => FeatureKind::Real,
        FeatureValue::Cat(_) => FeatureKind::Categorical,
    }
}

/// Fit a full-depth multi-output tree.
///
/// A node becomes a leaf when it has fewer than 2 rows, all rows share
/// identical inputs, or no split strictly reduces total variance.
pub fn fit_tree<S: Scalar>(rows: &[TreeRow<'_, S>]) -> Result<TreeModel<S>> {
    if rows.is_empty() {
        return Err(Error::Domain("fit_tree on empty training set".into()));
    }
    let n_features = rows[0].input.len();
    let n_outputs = rows[0].output.len();
    if n_outputs == 0 {
        return Err(Error::Schema("training rows have no outputs".into()));
    }
    let feature_kinds: Vec<FeatureKind> = rows[0].input.iter().map(kind_of).collect();
    for (i, row) in rows.iter().enumerate() {
        if row.input.len() != n_features || row.output.len() != n_outputs {
            return Err(Error::Schema(format!(
                "row {i} has {} features / {} outputs, expected {n_features} / {n_outputs}",
                row.input.len(),
                row.output.len()
            )));
        }
        for (f, v) in row.input.iter().enumerate() {
            if kind_of(v) != feature_kinds[f] {
                return Err(Error::Schema(format!(
                    "row {i} feature {f} kind differs from first row"
                )));
            }
            if let FeatureValue::Real(x) = v {
                if !x.is_finite() {
                    return Err(Error::Schema(format!("row {i} feature {f} not finite")));
                }
            }
        }
        if row.output.iter().any(|y| !y.is_finite()) {
            return Err(Error::Schema(format!("row {i} has a non-finite output")));
        }
    }

    // Canonical row order: lexicographic by (inputs, outputs). Makes both
    // split selection and every floating-point accumulation independent of
    // the caller's row order.
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&a, &b| {
        let ra = &rows[a];
        let rb = &rows[b];
        for (va, vb) in ra.input.iter().zip(rb.input.iter()) {
            match va.cmp_same_kind(vb) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        for (ya, yb) in ra.output.iter().zip(rb.output.iter()) {
            match ya.partial_cmp(yb).unwrap_or(Ordering::Equal) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    });

    let root = grow(rows, &idx, n_features, n_outputs);
    Ok(TreeModel {
        root,
        n_outputs,
        n_features,
        feature_kinds,
    })
}

fn leaf_from<S: Scalar>(rows: &[TreeRow<'_, S>], idx: &[usize], n_outputs: usize) -> TreeNode<S> {
    let n = S::from_usize(idx.len());
    let mut mean = vec![S::zero(); n_outputs];
    for &i in idx {
        for (j, m) in mean.iter_mut().enumerate() {
            *m = *m + rows[i].output[j];
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    TreeNode::Leaf {
        mean,
        count: idx.len(),
    }
}

/// Total sum of squared deviations from the subset mean, summed over all
/// outputs (two-pass, so exactly 0 on constant outputs).
fn total_ss<S: Scalar>(rows: &[TreeRow<'_, S>], idx: &[usize], n_outputs: usize) -> S {
    let n = S::from_usize(idx.len());
    let mut mean = vec![S::zero(); n_outputs];
    for &i in idx {
        for (j, m) in mean.iter_mut().enumerate() {
            *m = *m + rows[i].output[j];
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut ss = S::zero();
    for &i in idx {
        for (j, m) in mean.iter().enumerate() {
            let d = rows[i].output[j] - *m;
            ss = ss + d * d;
        }
    }
    ss
}

struct BestSplit<S> {
    gain: S,
    feature: usize,
    test: SplitTest<S>,
}

fn grow<S: Scalar>(
    rows: &[TreeRow<'_, S>],
    idx: &[usize],
    n_features: usize,
    n_outputs: usize,
) -> TreeNode<S> {
    if idx.len() < 2 {
        return leaf_from(rows, idx, n_outputs);
    }
    let first = &rows[idx[0]];
    let all_same_inputs = idx[1..].iter().all(|&i| {
        rows[i]
            .input
            .iter()
            .zip(first.input.iter())
            .all(|(a, b)| a.cmp_same_kind(b) == Ordering::Equal)
    });
    if all_same_inputs {
        return leaf_from(rows, idx, n_outputs);
    }

    let parent_ss = total_ss(rows, idx, n_outputs);
    let mut best: Option<BestSplit<S>> = None;

    for f in 0..n_features {
        match rows[idx[0]].input[f] {
            FeatureValue::Real(_) => {
                find_real_split(rows, idx, f, n_outputs, parent_ss, &mut best);
            }
            FeatureValue::Cat(_) => {
                find_categorical_split(rows, idx, f, n_outputs, parent_ss, &mut best);
            }
        }
    }

    let Some(split) = best else {
        return leaf_from(rows, idx, n_outputs);
    };

    let mut left_idx = Vec::new();
    let mut right_idx = Vec::new();
    for &i in idx {
        if goes_left(&rows[i].input[split.feature], &split.test) {
            left_idx.push(i);
        } else {
            right_idx.push(i);
        }
    }
    debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());

    let left = grow(rows, &left_idx, n_features, n_outputs);
    let right = grow(rows, &right_idx, n_features, n_outputs);
    TreeNode::Internal {
        feature: split.feature,
        test: split.test,
        n_left: left_idx.len(),
        n_right: right_idx.len(),
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn goes_left<S: Scalar>(v: &FeatureValue<S>, test: &SplitTest<S>) -> bool {
    match (v, test) {
        (FeatureValue::Real(x), SplitTest::Threshold(t)) => *x <= *t,
        (FeatureValue::Cat(c), SplitTest::Category { id, .. }) => c == id,
        _ => unreachable!("feature kind checked at fit time"),
    }
}

fn find_real_split<S: Scalar>(
    rows: &[TreeRow<'_, S>],
    idx: &[usize],
    feature: usize,
    n_outputs: usize,
    parent_ss: S,
    best: &mut Option<BestSplit<S>>,
) {
    let value = |i: usize| match rows[i].input[feature] {
        FeatureValue::Real(x) => x,
        FeatureValue::Cat(_) => unreachable!(),
    };
    let mut order: Vec<usize> = idx.to_vec();
    order.sort_by(|&a, &b| value(a).partial_cmp(&value(b)).unwrap_or(Ordering::Equal));

    let n = order.len();
    let total: Vec<(S, S)> = {
        let mut acc = vec![(S::zero(), S::zero()); n_outputs];
        for &i in &order {
            for (j, a) in acc.iter_mut().enumerate() {
                let y = rows[i].output[j];
                a.0 = a.0 + y;
                a.1 = a.1 + y * y;
            }
        }
        acc
    };

    // Sweep boundaries between distinct consecutive values, maintaining
    // left-side running sums; SS = Σy² − (Σy)²/n per side per output.
    let mut left = vec![(S::zero(), S::zero()); n_outputs];
    for k in 0..n - 1 {
        let i = order[k];
        for (j, l) in left.iter_mut().enumerate() {
            let y = rows[i].output[j];
            l.0 = l.0 + y;
            l.1 = l.1 + y * y;
        }
        let v_lo = value(order[k]);
        let v_hi = value(order[k + 1]);
        if v_lo == v_hi {
            continue;
        }
        let n_left = S::from_usize(k + 1);
        let n_right = S::from_usize(n - k - 1);
        let mut children_ss = S::zero();
        for (j, l) in left.iter().enumerate() {
            let (ts, tq) = total[j];
            let ss_l = l.1 - l.0 * l.0 / n_left;
            let rs = ts - l.0;
            let ss_r = (tq - l.1) - rs * rs / n_right;
            children_ss = children_ss + ss_l + ss_r;
        }
        let gain = parent_ss - children_ss;
        if gain > S::zero() && best.as_ref().map_or(true, |b| gain > b.gain) {
            let threshold = (v_lo + v_hi) / S::two();
            *best = Some(BestSplit {
                gain,
                feature,
                test: SplitTest::Threshold(threshold),
            });
        }
    }
}

fn find_categorical_split<S: Scalar>(
    rows: &[TreeRow<'_, S>],
    idx: &[usize],
    feature: usize,
    n_outputs: usize,
    parent_ss: S,
    best: &mut Option<BestSplit<S>>,
) {
    let cat = |i: usize| match rows[i].input[feature] {
        FeatureValue::Cat(c) => c,
        FeatureValue::Real(_) => unreachable!(),
    };
    // Per-category counts and sums; BTreeMap gives ascending category ids
    // (the tie-break order).
    let mut groups: BTreeMap<u32, (usize, Vec<(S, S)>)> = BTreeMap::new();
    let mut total = vec![(S::zero(), S::zero()); n_outputs];
    for &i in idx {
        let g = groups
            .entry(cat(i))
            .or_insert_with(|| (0, vec![(S::zero(), S::zero()); n_outputs]));
        g.0 += 1;
        for (j, a) in g.1.iter_mut().enumerate() {
            let y = rows[i].output[j];
            a.0 = a.0 + y;
            a.1 = a.1 + y * y;
            total[j].0 = total[j].0 + y;
            total[j].1 = total[j].1 + y * y;
        }
    }
    if groups.len() < 2 {
        return;
    }
    let n = idx.len();
    let seen: Vec<u32> = groups.keys().copied().collect();
    // One-vs-rest on each category.
    for (&c, (count, sums)) in &groups {
        if *count == 0 || *count == n {
            continue;
        }
        let n_left = S::from_usize(*count);
        let n_right = S::from_usize(n - count);
        let mut children_ss = S::zero();
        for (j, l) in sums.iter().enumerate() {
            let (ts, tq) = total[j];
            let ss_l = l.1 - l.0 * l.0 / n_left;
            let rs = ts - l.0;
            let ss_r = (tq - l.1) - rs * rs / n_right;
            children_ss = children_ss + ss_l + ss_r;
        }
        let gain = parent_ss - children_ss;
        if gain > S::zero() && best.as_ref().map_or(true, |b| gain > b.gain) {
            *best = Some(BestSplit {
                gain,
                feature,
                test: SplitTest::Category {
                    id: c,
                    seen: seen.clone(),
                },
            });
        }
    }
}

/// Predict the leaf mean vector for an input. Deterministic; unseen
/// categories are routed to the larger child, never an error.
pub fn predict_tree<'a, S: Scalar>(
    model: &'a TreeModel<S>,
    input: &[FeatureValue<S>],
) -> Result<&'a [S]> {
    if input.len() != model.n_features {
        return Err(Error::Schema(format!(
            "input has {} features, model expects {}",
            input.len(),
            model.n_features
        )));
    }
    for (f, v) in input.iter().enumerate() {
        if kind_of(v) != model.feature_kinds[f] {
            return Err(Error::Schema(format!("input feature {f} has wrong kind")));
        }
    }
    let mut node = &model.root;
    loop {
        match node {
            TreeNode::Leaf { mean, .. } => return Ok(mean),
            TreeNode::Internal {
                feature,
                test,
                n_left,
                n_right,
                left,
                right,
            } => {
                let v = &input[*feature];
                let go_left = match (v, test) {
                    (FeatureValue::Real(x), SplitTest::Threshold(t)) => *x <= *t,
                    (FeatureValue::Cat(c), SplitTest::Category { id, seen }) => {
                        if seen.binary_search(c).is_err() {
                            n_left >= n_right
                        } else {
                            c == id
                        }
                    }
                    _ => unreachable!("kind checked above"),
                };
                node = if go_left { left } else { right };
            }
        }
    }
}
