//! Composite Gauss–Legendre rules.

use gauss_quad::GaussLegendre;

/// Points per panel in every composite rule of this crate.
pub const PANEL_ORDER: usize = 16;

/// Default total node count on a finite interval.
pub const DEFAULT_NODES: usize = 2048;

/// Nodes and weights of the `order`-point rule on `[-1, 1]`.
pub fn legendre_rule(order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(order.try_into().expect("order must be at least 2"));
    rule.iter().map(|(x, w)| (*x, *w)).collect()
}

/// `panels` equal panels of `order` points each on `[a, b]`.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let base = legendre_rule(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in &base {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Composite rule with `nodes` total points (rounded up to whole panels).
pub fn composite_nodes(a: f64, b: f64, nodes: usize) -> Vec<(f64, f64)> {
    let panels = nodes.div_ceil(PANEL_ORDER).max(1);
    composite(a, b, panels, PANEL_ORDER)
}
