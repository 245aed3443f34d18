//! Bracketed bisection for monotone scalar equations.

/// Default bracket for multiplier solves.
pub const RHO_MIN: f64 = 1e-30;
pub const RHO_MAX: f64 = 1e30;

const MAX_ITERATIONS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `f(x) - target`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `f(u) = target` on `[a, b]` for a monotone `f` by halving the bracket
/// until it collapses to adjacent floats. Multiplier solves call it with
/// `u = ln(rho)` so that each halving is a log-midpoint step in `rho`.
///
/// `increasing` states the direction of `f`. The caller is expected to have checked
/// that the target lies between `f(a)` and `f(b)`; otherwise the point with the
/// smallest residual seen is returned.
pub fn bisect_monotone(
    f: impl Fn(f64) -> f64,
    target: f64,
    a: f64,
    b: f64,
    increasing: bool,
) -> Root {
    debug_assert!(b > a);
    let (mut a, mut b) = (a, b);
    let mut best = Root {
        x: a,
        residual: f(a) - target,
        iterations: 0,
    };
    for it in 1..=MAX_ITERATIONS {
        let mid = 0.5 * (a + b);
        let r = f(mid) - target;
        if r.abs() <= best.residual.abs() {
            best = Root {
                x: mid,
                residual: r,
                iterations: it,
            };
        }
        best.iterations = it;
        if r == 0.0 || mid <= a || mid >= b {
            break;
        }
        if (r < 0.0) == increasing {
            a = mid;
        } else {
            b = mid;
        }
    }
    best
}
