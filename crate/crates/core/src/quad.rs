//! Simpson quadrature on bounded intervals.
//!
//! Two rules are provided: a plain composite rule with a fixed number of
//! panels, and a composite rule whose panels are refined recursively until a
//! Richardson error estimate falls below tolerance. Both are exact for cubic
//! integrands on every panel.

/// Recursion limit for the adaptive rule; each level halves the panel width.
const MAX_DEPTH: u32 = 48;

/// Composite Simpson rule with `panels` panels, each evaluated at its two
/// endpoints and midpoint.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut ends = f(a);
    let mut mids = 0.0;
    let mut inner = 0.0;
    for i in 0..panels {
        let left = a + width * i as f64;
        mids += f(left + 0.5 * width);
        if i + 1 < panels {
            inner += f(left + width);
        }
    }
    ends += f(b);
    width / 6.0 * (ends + 4.0 * mids + 2.0 * inner)
}

/// Composite Simpson rule with recursive refinement of each of the `panels`
/// starting panels. `tol` is an absolute tolerance for the whole interval.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let panel_tol = tol / panels as f64;
    let mut total = 0.0;
    let mut left_value = f(a);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        let right_value = f(hi);
        let whole = (hi - lo) / 6.0 * (left_value + 4.0 * f_mid + right_value);
        total += refine(&f, lo, hi, left_value, f_mid, right_value, whole, panel_tol, MAX_DEPTH);
        left_value = right_value;
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_mid: f64,
    f_hi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let left_mid = 0.5 * (lo + mid);
    let right_mid = 0.5 * (mid + hi);
    let f_lm = f(left_mid);
    let f_rm = f(right_mid);
    let left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid);
    let right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rm + f_hi);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || !delta.is_finite() {
        return left + right + delta / 15.0;
    }
    refine(f, lo, mid, f_lo, f_lm, f_mid, left, 0.5 * tol, depth - 1)
        + refine(f, mid, hi, f_mid, f_rm, f_hi, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_rule_is_exact_for_cubics() {
        let cubic = |x: f64| 2.0 * x * x * x - x * x + 3.0 * x - 1.0;
        // antiderivative x^4/2 - x^3/3 + 3x^2/2 - x
        let anti = |x: f64| x.powi(4) / 2.0 - x.powi(3) / 3.0 + 1.5 * x * x - x;
        for panels in [1, 2, 7] {
            let got = simpson(cubic, -1.0, 2.5, panels);
            assert!((got - (anti(2.5) - anti(-1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_rule_handles_sqrt_endpoint() {
        let got = adaptive_simpson(|y: f64| 2.0 * y.sqrt(), 0.0, 1.0, 64, 1e-13);
        assert!((got - 4.0 / 3.0).abs() < 1e-11, "got {got}");
    }

    #[test]
    fn empty_interval() {
        assert_eq!(simpson(|x| x, 1.0, 1.0, 8), 0.0);
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 8, 1e-12), 0.0);
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let fwd = simpson(f64::exp, 0.0, 1.0, 32);
        let back = simpson(f64::exp, 1.0, 0.0, 32);
        assert!((fwd + back).abs() < 1e-14);
    }
}
