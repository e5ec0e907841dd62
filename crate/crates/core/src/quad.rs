//! Thin helpers over `gauss-quad` rules mapped to arbitrary intervals.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss-Legendre nodes and weights on [a, b].
pub fn gl_on(degree: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(degree.max(1)).expect("nonzero"));
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (c + hw * x, hw * w))
        .collect()
}

/// Composite rule: `panels` equal panels of `degree` points each.
pub fn gl_composite(degree: usize, panels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let base = gl_on(degree, 0.0, 1.0);
    let step = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(degree * panels);
    for p in 0..panels {
        let lo = a + step * p as f64;
        out.extend(base.iter().map(|&(x, w)| (lo + step * x, step * w)));
    }
    out
}
