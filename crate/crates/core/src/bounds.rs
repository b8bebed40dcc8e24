//! Closed-form depth, width and parameter-count bounds for narrow DBMs that
//! approximate every distribution on `n` visible q-ary units.
//!
//! Every real-valued bound is reported raw and as a ceiling; the ceiling is
//! the integer contract.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest `n' = q^k + k + 1 >= n` over `k >= 1`, returned as `(k, n')`.
///
/// `k` starts at 1 because `k = 0` gives `n' - log_q n' - 1 = 0` for binary
/// units and the sufficient bound is undefined there.
pub fn n_prime(n: usize, q: usize) -> (u32, usize) {
    let mut k = 1u32;
    loop {
        let np = q.saturating_pow(k).saturating_add(k as usize + 1);
        if np >= n {
            return (k, np);
        }
        k += 1;
    }
}

/// Sufficient depth before rounding.
pub fn sufficient_depth_raw(n: usize, q: usize) -> Result<f64> {
    check_q(q)?;
    if n < 2 {
        return Err(Error::domain(format!(
            "the sufficient depth bound needs n >= 2, got {n}"
        )));
    }
    let (_, np) = n_prime(n, q);
    let npf = np as f64;
    let qf = q as f64;
    Ok(if q == 2 {
        2f64.powf(npf) / (2.0 * (npf - npf.log2() - 1.0))
    } else {
        1.0 + (qf.powf(npf) - 1.0) / (qf * (qf - 1.0) * (npf - npf.ln() / qf.ln() - 1.0))
    })
}

/// Number of hidden layers of width `n` that suffice for universal
/// approximation, evaluated at the smallest admissible `n'`.
pub fn sufficient_depth(n: usize, q: usize) -> Result<u64> {
    Ok(ceil_int(sufficient_depth_raw(n, q)?))
}

/// Necessary depth before rounding; from counting parameters against the
/// dimension of the probability simplex.
pub fn necessary_depth_raw(n: usize, q: usize) -> Result<f64> {
    check_q(q)?;
    if n < 1 {
        return Err(Error::domain("n must be at least 1"));
    }
    let nf = n as f64;
    let qf = q as f64;
    Ok(if q == 2 {
        (2f64.powf(nf) - (nf + 1.0)) / (nf * (nf + 1.0))
    } else {
        (qf.powf(nf) - 1.0) / (nf * (qf - 1.0) * (nf * (qf - 1.0) + 2.0))
    })
}

/// Ceiling of the necessary depth, floored at 1.
pub fn necessary_depth(n: usize, q: usize) -> Result<u64> {
    Ok(ceil_int(necessary_depth_raw(n, q)?).max(1))
}

/// Fewest units the first hidden layer of a binary universal approximator
/// can have: `n0 - 1` for even `n0`, `n0` for odd `n0`.
pub fn min_first_hidden_width(n0: usize) -> usize {
    if n0.is_multiple_of(2) {
        n0.saturating_sub(1)
    } else {
        n0
    }
}

/// Parameters of a binary DBM with `L` hidden layers of width `n`: `L n² + (L+1) n`.
pub fn param_count(n: u64, layers: u64) -> u64 {
    layers * n * n + (layers + 1) * n
}

/// Free parameters of a q-ary DBM of width `n` and depth `L` once symbol 0 is
/// used as the reference state of every unit: `L (n(q-1))² + (L+1) n(q-1)`.
/// Equals [`param_count`] for `q = 2`.
pub fn param_count_q(n: u64, layers: u64, q: u64) -> u64 {
    param_count(n * (q - 1), layers)
}

fn check_q(q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::domain(format!("q = {q} must be at least 2")));
    }
    Ok(())
}

fn ceil_int(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        x.ceil() as u64
    }
}

/// Every bound for one `(n, q)`, plus the parameter count at a given depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n: usize,
    pub q: usize,
    pub k: u32,
    pub n_prime: usize,
    /// `None` for `n < 2`, where the bound is undefined.
    pub sufficient_depth: Option<u64>,
    pub sufficient_depth_raw: Option<f64>,
    pub necessary_depth: u64,
    pub necessary_depth_raw: f64,
    /// Only reported for binary units.
    pub min_first_hidden_width: Option<usize>,
    /// Depth at which `param_count` is evaluated; defaults to the sufficient depth.
    pub layers: Option<u64>,
    pub param_count: Option<u64>,
}

pub fn report(n: usize, q: usize, layers: Option<u64>) -> Result<BoundsReport> {
    check_q(q)?;
    if n < 1 {
        return Err(Error::domain("n must be at least 1"));
    }
    let (k, np) = n_prime(n, q);
    let raw = sufficient_depth_raw(n, q).ok();
    let suff = raw.map(ceil_int);
    let layers = layers.or(suff);
    Ok(BoundsReport {
        n,
        q,
        k,
        n_prime: np,
        sufficient_depth: suff,
        sufficient_depth_raw: raw,
        necessary_depth: necessary_depth(n, q)?,
        necessary_depth_raw: necessary_depth_raw(n, q)?,
        min_first_hidden_width: (q == 2).then(|| min_first_hidden_width(n)),
        layers,
        param_count: layers.map(|l| param_count_q(n as u64, l, q as u64)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sufficient_depth_examples() {
        assert_eq!(sufficient_depth(4, 2).unwrap(), 8);
        assert_eq!(sufficient_depth(7, 2).unwrap(), 21);
        assert_eq!(sufficient_depth(2, 3).unwrap(), 17);
        assert!(matches!(sufficient_depth(1, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn necessary_depth_examples() {
        assert_eq!(necessary_depth(4, 2).unwrap(), 1);
        assert_eq!(necessary_depth(10, 2).unwrap(), 10);
        assert_eq!(necessary_depth(2, 3).unwrap(), 1);
    }

    #[test]
    fn width_and_count_examples() {
        assert_eq!(min_first_hidden_width(4), 3);
        assert_eq!(min_first_hidden_width(5), 5);
        assert_eq!(min_first_hidden_width(1), 1);
        assert_eq!(param_count(4, 8), 164);
        assert_eq!(param_count(1, 1), 3);
        assert_eq!(param_count_q(4, 8, 2), 164);
    }

    #[test]
    fn n_prime_scans_upward() {
        assert_eq!(n_prime(4, 2), (1, 4));
        assert_eq!(n_prime(5, 2), (2, 7));
        assert_eq!(n_prime(2, 3), (1, 5));
        assert_eq!(n_prime(12, 2), (3, 12));
    }

    #[test]
    fn report_for_small_n() {
        let r = report(4, 2, None).unwrap();
        assert_eq!(r.sufficient_depth, Some(8));
        assert_eq!(r.necessary_depth, 1);
        assert_eq!(r.min_first_hidden_width, Some(3));
        assert_eq!(r.param_count, Some(164));
        let r = report(1, 2, Some(1)).unwrap();
        assert_eq!(r.sufficient_depth, None);
        assert_eq!(r.param_count, Some(3));
    }
}
