//! Log-domain helpers.

/// `ln Σ exp(x)` with the usual max shift. Returns `-inf` for an empty slice
/// or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if mx.is_infinite() {
        return mx;
    }
    let s: f64 = xs.iter().map(|&x| (x - mx).exp()).sum();
    mx + s.ln()
}

/// Shift `xs` in place so that `log_sum_exp(xs) == 0`. Returns the shift.
pub fn log_normalize(xs: &mut [f64]) -> f64 {
    let z = log_sum_exp(xs);
    for x in xs.iter_mut() {
        *x -= z;
    }
    z
}

/// Natural log of each entry, mapping zeros to `-inf`.
pub fn ln_vec(ps: &[f64]) -> Vec<f64> {
    ps.iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect()
}

/// Normalized probabilities from unnormalized log weights.
pub fn softmax(logs: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(logs);
    logs.iter().map(|&l| (l - z).exp()).collect()
}
