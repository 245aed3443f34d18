//! Small numeric helpers shared across modules.

/// `x * ln(y)` with the convention `0 * ln(0) = 0`.
#[inline]
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `x * ln(x)` with `0 * ln(0) = 0`.
#[inline]
pub fn xlogx(x: f64) -> f64 {
    xlogy(x, x)
}

/// `w * v` where a zero weight annihilates an infinite value.
#[inline]
pub fn weighted(w: f64, v: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * v
    }
}

/// Normalizes a vector of log-weights into probabilities by max-subtraction.
///
/// Returns `None` when every entry is `-inf` (or NaN), leaving `out` untouched.
pub fn normalize_log_weights(log_w: &[f64], out: &mut [f64]) -> Option<()> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut total = 0.0;
    for (o, &lw) in out.iter_mut().zip(log_w) {
        *o = (lw - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    Some(())
}

/// Formats a float with 17 significant digits, the exchange format of every output file.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
