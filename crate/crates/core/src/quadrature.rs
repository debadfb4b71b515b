//! Gauss-Legendre quadrature with node caching and order doubling.

use std::sync::OnceLock;

/// Orders available to [`rule`]; doubling walks this list.
const ORDERS: [usize; 7] = [32, 64, 128, 256, 512, 1024, 2048];

static RULES: [OnceLock<Vec<(f64, f64)>>; 7] = [
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
];

/// Nodes and weights of the `order`-point Gauss-Legendre rule on [-1, 1].
///
/// `order` must be one of the cached orders; rules are computed once and
/// reused for the lifetime of the process.
pub fn rule(order: usize) -> &'static [(f64, f64)] {
    let idx = ORDERS
        .iter()
        .position(|&n| n == order)
        .unwrap_or_else(|| panic!("unsupported Gauss-Legendre order {order}"));
    RULES[idx].get_or_init(|| compute_rule(order))
}

/// Newton iteration on the Legendre polynomial roots.
fn compute_rule(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi-style initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((-x, w));
        if !(n % 2 == 1 && i == m - 1) {
            out.push((x, w));
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Value and derivative of P_n at x via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-order integral of `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule(order)
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Integrate `f` over [a, b], doubling the order from `start_order` until
/// two successive results differ by less than `tol` (or the largest cached
/// order is reached, in which case the last result is returned).
pub fn integrate_doubling<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    start_order: usize,
    tol: f64,
) -> f64 {
    let start = ORDERS
        .iter()
        .position(|&n| n >= start_order)
        .unwrap_or(ORDERS.len() - 1);
    let mut prev = integrate(f, a, b, ORDERS[start]);
    for &order in &ORDERS[start + 1..] {
        let next = integrate(f, a, b, order);
        if (next - prev).abs() < tol {
            return next;
        }
        prev = next;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        // 32-point rule integrates degree-63 polynomials exactly.
        let f = |x: f64| x.powi(8) - 3.0 * x.powi(5) + x;
        let exact = 2.0 / 9.0; // odd terms vanish on [-1, 1]
        assert!((integrate(&f, -1.0, 1.0, 32) - exact).abs() < 1e-14);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for order in ORDERS {
            let total: f64 = rule(order).iter().map(|&(_, w)| w).sum();
            assert!((total - 2.0).abs() < 1e-12, "order {order}: {total}");
        }
    }

    #[test]
    fn doubling_hits_tolerance_on_smooth_integrand() {
        let f = |x: f64| (3.0 * x).sin().exp();
        let a = integrate_doubling(&f, 0.0, 2.0, 32, 1e-13);
        let b = integrate(&f, 0.0, 2.0, 2048);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn general_interval() {
        let f = |x: f64| x.cos();
        let exact = 1.5f64.sin() - 0.25f64.sin();
        assert!((integrate(&f, 0.25, 1.5, 64) - exact).abs() < 1e-14);
    }
}
