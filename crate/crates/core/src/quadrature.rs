//! Gauss–Legendre rules mapped to arbitrary intervals, with composite
//! integration over a list of breakpoints.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre nodes and weights on [0, 1].
#[derive(Clone, Debug)]
pub struct UnitRule {
    pairs: Vec<(f64, f64)>,
}

impl UnitRule {
    pub fn new(points: usize) -> Self {
        let n = NonZeroUsize::new(points.max(1)).unwrap();
        let rule = GaussLegendre::new(n);
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = b - a;
        self.pairs.iter().map(move |&(x, w)| (a + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Points of `breaks` strictly inside (a, b), with a and b added, sorted.
pub fn segments(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);
    if a > b {
        pts.reverse();
    }
    pts
}

/// Composite nodes and weights over [a, b] split at `breaks`.
pub fn composite_nodes(rule: &UnitRule, a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let pts = segments(a, b, breaks);
    pts.windows(2)
        .flat_map(|s| rule.on(s[0], s[1]).collect::<Vec<_>>())
        .collect()
}
