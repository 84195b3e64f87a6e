use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

/// Depth-capped CART regression tree: variance-reduction splits at midpoints
/// between distinct feature values, leaves predict the mean response.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    root: Node,
}

impl RegressionTree {
    /// Fits on rows `idx` of `x` (repeats allowed) with responses `y[idx]`.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], idx: &[usize], max_depth: usize) -> Self {
        Self { root: build(x, y, idx, max_depth) }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

fn build(x: &DMatrix<f64>, y: &[f64], idx: &[usize], depth_left: usize) -> Node {
    let leaf = Node::Leaf(mean(y, idx));
    if depth_left == 0 || idx.len() < 2 {
        return leaf;
    }
    let n = idx.len() as f64;
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let total_sq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
    let parent_sse = total_sq - total * total / n;
    if parent_sse <= 1e-12 * total_sq.max(1.0) {
        return leaf;
    }
    // (sse, feature, threshold)
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]));
        let (mut s, mut sq) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let yi = y[order[k]];
            s += yi;
            sq += yi * yi;
            let (lo, hi) = (x[(order[k], f)], x[(order[k + 1], f)]);
            if lo == hi {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = n - nl;
            let sse = (sq - s * s / nl) + ((total_sq - sq) - (total - s) * (total - s) / nr);
            if best.is_none_or(|(b, _, _)| sse < b) {
                best = Some((sse, f, 0.5 * (lo + hi)));
            }
        }
    }
    match best {
        Some((sse, feature, threshold)) if sse < parent_sse - 1e-12 * parent_sse.abs() => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[(i, feature)] <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(build(x, y, &l, depth_left - 1)),
                right: Box::new(build(x, y, &r, depth_left - 1)),
            }
        }
        _ => leaf,
    }
}
