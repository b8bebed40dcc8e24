//! Exact inference by chain elimination over layers.
//!
//! The upward message at layer `k` is the log of the summed Boltzmann factors
//! of every layer above `k` (their biases and all couplings from `k` upward),
//! as a function of `x_k`; the downward message is the same for the layers
//! below. The layer-`k` marginal is `down_k + B_k·x_k + up_k`, normalized.
//! Every vector is indexed in the fixed state enumeration order and every
//! reduction runs in that order, so results do not depend on thread count.

use rayon::prelude::*;

use crate::distribution::{hadamard, Distribution};
use crate::error::{Error, Result};
use crate::logspace::{log_normalize, log_sum_exp};
use crate::model::{BiasArray, DbmParams, FeedforwardLayer};
use crate::space::StateSpace;

/// Work size above which message rows are computed in parallel.
const PAR_THRESHOLD: usize = 1 << 14;

/// Log-domain partial sum attached to one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMessage {
    pub layer: usize,
    pub log_values: Vec<f64>,
}

/// Upward and downward messages of every layer, plus the unary bias terms.
#[derive(Clone, Debug)]
pub struct Messages {
    pub up: Vec<TransferMessage>,
    pub down: Vec<TransferMessage>,
    pub unary: Vec<Vec<f64>>,
}

impl Messages {
    pub fn compute(params: &DbmParams) -> Result<Self> {
        let spaces = layer_spaces(params)?;
        let depth = params.depth();
        let unary: Vec<Vec<f64>> = (0..=depth)
            .map(|l| unary_terms(spaces[l], &params.biases()[l].one_hot()))
            .collect();
        let dense: Vec<Vec<f64>> = params.weights().iter().map(|w| w.one_hot()).collect();

        let mut up = vec![Vec::new(); depth + 1];
        up[depth] = vec![0.0; spaces[depth].cardinality()];
        for l in (0..depth).rev() {
            let v: Vec<f64> = up[l + 1].iter().zip(&unary[l + 1]).map(|(a, b)| a + b).collect();
            up[l] = contract_up(spaces[l], spaces[l + 1], &dense[l], &v);
        }
        let mut down = vec![Vec::new(); depth + 1];
        down[0] = vec![0.0; spaces[0].cardinality()];
        for l in 0..depth {
            let v: Vec<f64> = down[l].iter().zip(&unary[l]).map(|(a, b)| a + b).collect();
            down[l + 1] = contract_down(spaces[l], spaces[l + 1], &dense[l], &v);
        }
        let wrap = |v: Vec<Vec<f64>>| {
            v.into_iter()
                .enumerate()
                .map(|(layer, log_values)| TransferMessage { layer, log_values })
                .collect()
        };
        Ok(Messages {
            up: wrap(up),
            down: wrap(down),
            unary,
        })
    }

    /// Unnormalized log marginal of layer `k`.
    pub fn log_weights(&self, k: usize) -> Vec<f64> {
        self.down[k]
            .log_values
            .iter()
            .zip(&self.unary[k])
            .zip(&self.up[k].log_values)
            .map(|((d, b), u)| d + b + u)
            .collect()
    }

    /// `ln Z` as seen from layer `k`; every `k` gives the same value up to round-off.
    pub fn log_partition_at(&self, k: usize) -> f64 {
        log_sum_exp(&self.log_weights(k))
    }
}

fn layer_spaces(params: &DbmParams) -> Result<Vec<StateSpace>> {
    (0..=params.depth()).map(|l| params.layer_space(l)).collect()
}

/// `Σ_i B[i, x_i]` for every state `x` of the space.
fn unary_terms(space: StateSpace, bias_one_hot: &[f64]) -> Vec<f64> {
    let q = space.q();
    sum_table(space.n(), q, |i, a| bias_one_hot[i * q + a])
}

/// Table of `Σ_i f(i, x_i)` over all states of `n` units, built coordinate by
/// coordinate so the leftmost coordinate ends up most significant.
fn sum_table(n: usize, q: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut t = vec![0.0];
    for i in 0..n {
        let mut next = Vec::with_capacity(t.len() * q);
        for &base in &t {
            for a in 0..q {
                next.push(base + f(i, a));
            }
        }
        t = next;
    }
    t
}

/// For a field `h[m * q + b]` over `n` units, the per-state sums split into a
/// high table (first half of the coordinates) and a low table.
fn split_tables(n: usize, q: usize, h: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
    let hi_n = n / 2;
    let hi = sum_table(hi_n, q, |m, b| h[m * q + b]);
    let lo = sum_table(n - hi_n, q, |m, b| h[(hi_n + m) * q + b]);
    let lo_len = lo.len();
    (hi, lo, lo_len)
}

/// `ln Σ_z exp(E(z) + v[z])` where `E(z) = hi[z / lo_len] + lo[z % lo_len]`.
fn lse_tables(hi: &[f64], lo: &[f64], v: &[f64]) -> f64 {
    let lo_len = lo.len();
    let mut mx = f64::NEG_INFINITY;
    for (zh, &eh) in hi.iter().enumerate() {
        for (zl, &el) in lo.iter().enumerate() {
            mx = mx.max(eh + el + v[zh * lo_len + zl]);
        }
    }
    if !mx.is_finite() {
        return mx;
    }
    let mut s = 0.0;
    for (zh, &eh) in hi.iter().enumerate() {
        for (zl, &el) in lo.iter().enumerate() {
            s += (eh + el + v[zh * lo_len + zl] - mx).exp();
        }
    }
    mx + s.ln()
}

fn map_states<F>(count: usize, work: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if count * work >= PAR_THRESHOLD {
        (0..count).into_par_iter().map(f).collect()
    } else {
        (0..count).map(f).collect()
    }
}

/// `out[x] = ln Σ_y exp(E(x, y) + v[y])` for `x` in the lower space.
fn contract_up(lower: StateSpace, upper: StateSpace, w: &[f64], v: &[f64]) -> Vec<f64> {
    let (rows, cols, q) = (lower.n(), upper.n(), lower.q());
    map_states(lower.cardinality(), upper.cardinality(), |xi| {
        let x = lower.decode(xi);
        let mut h = vec![0.0; cols * q];
        for (i, &a) in x.iter().enumerate() {
            let row = &w[(i * q + a) * cols * q..(i * q + a + 1) * cols * q];
            for (hv, wv) in h.iter_mut().zip(row) {
                *hv += wv;
            }
        }
        debug_assert_eq!(rows, x.len());
        let (hi, lo, _) = split_tables(cols, q, &h);
        lse_tables(&hi, &lo, v)
    })
}

/// `out[y] = ln Σ_x exp(v[x] + E(x, y))` for `y` in the upper space.
fn contract_down(lower: StateSpace, upper: StateSpace, w: &[f64], v: &[f64]) -> Vec<f64> {
    let (rows, cols, q) = (lower.n(), upper.n(), lower.q());
    map_states(upper.cardinality(), lower.cardinality(), |yi| {
        let y = upper.decode(yi);
        let mut h = vec![0.0; rows * q];
        for i in 0..rows {
            for a in 0..q {
                let base = (i * q + a) * cols * q;
                h[i * q + a] = y.iter().enumerate().map(|(m, &b)| w[base + m * q + b]).sum();
            }
        }
        let (hi, lo, _) = split_tables(rows, q, &h);
        lse_tables(&hi, &lo, v)
    })
}

/// `ln Z` by chain elimination.
pub fn log_partition(params: &DbmParams) -> Result<f64> {
    Ok(Messages::compute(params)?.log_partition_at(0))
}

/// Normalized log marginal of layer `k`.
pub fn log_layer_marginal(params: &DbmParams, k: usize) -> Result<Vec<f64>> {
    check_layer(params, k)?;
    let msgs = Messages::compute(params)?;
    let mut lw = msgs.log_weights(k);
    let z = log_normalize(&mut lw);
    if !z.is_finite() || lw.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("parameters exceed the range of exact f64 evaluation"));
    }
    Ok(lw)
}

/// Exact marginal of layer `k`.
pub fn layer_marginal(params: &DbmParams, k: usize) -> Result<Distribution> {
    let lw = log_layer_marginal(params, k)?;
    Distribution::from_log_weights(params.layer_space(k)?, &lw)
}

/// Marginals of every layer from one pass of messages.
pub fn layer_marginals(params: &DbmParams) -> Result<Vec<Distribution>> {
    let msgs = Messages::compute(params)?;
    (0..=params.depth())
        .map(|k| Distribution::from_log_weights(params.layer_space(k)?, &msgs.log_weights(k)))
        .collect()
}

fn check_layer(params: &DbmParams, k: usize) -> Result<()> {
    if k > params.depth() {
        return Err(Error::Index(format!("layer {k} > L = {}", params.depth())));
    }
    Ok(())
}

/// Split at interior layer `k` with bias split `B'_k`: the lower part keeps
/// layers `0..=k` with `B'_k` on top, the upper part keeps layers `k..=L` with
/// `B_k - B'_k` at the bottom. The layer-`k` marginal of the whole model is
/// the Hadamard product of the lower top marginal and the upper bottom
/// marginal, whatever `B'_k` is.
pub fn split_at_layer(params: &DbmParams, k: usize, bias_split: &BiasArray) -> Result<(DbmParams, DbmParams)> {
    if k == 0 || k >= params.depth() {
        return Err(Error::Index(format!(
            "split layer {k} must satisfy 0 < k < L = {}",
            params.depth()
        )));
    }
    let rest = params.biases()[k].sub(bias_split)?;
    let lower = params.sub_stack(0, k)?.with_bias(k, bias_split.clone())?;
    let upper = params.sub_stack(k, params.depth())?.with_bias(0, rest)?;
    Ok((lower, upper))
}

/// Largest absolute deviation between the layer-`k` marginal and the
/// Hadamard product of the split parts' marginals at `k`.
pub fn composition_check(params: &DbmParams, k: usize, bias_split: &BiasArray) -> Result<f64> {
    let (lower, upper) = split_at_layer(params, k, bias_split)?;
    let whole = layer_marginal(params, k)?;
    let r = layer_marginal(&lower, k)?;
    let s = layer_marginal(&upper, 0)?;
    let rs = hadamard(&r, &s)?;
    Ok(max_abs_diff(whole.probs(), rs.probs()))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Log of `q(x_out | x_in)` for every output state.
pub fn log_ff_conditional(layer: &FeedforwardLayer, x_in: &[usize]) -> Result<Vec<f64>> {
    let in_space = StateSpace::new(layer.n_in(), layer.q())?;
    in_space.encode(x_in)?;
    Ok(log_conditional_unchecked(layer, x_in))
}

fn log_conditional_unchecked(layer: &FeedforwardLayer, x_in: &[usize]) -> Vec<f64> {
    let q = layer.q();
    let w = layer.weights();
    let b = layer.bias();
    let mut field = vec![0.0; layer.n_out() * q];
    for i in 0..layer.n_out() {
        let row = &mut field[i * q..(i + 1) * q];
        for (a, f) in row.iter_mut().enumerate() {
            *f = b.get(i, a) + x_in.iter().enumerate().map(|(m, &c)| w.get(i, a, m, c)).sum::<f64>();
        }
        let z = log_sum_exp(row);
        for f in row.iter_mut() {
            *f -= z;
        }
    }
    sum_table(layer.n_out(), q, |i, a| field[i * q + a])
}

/// `q(· | x_in)` as a distribution over the output layer.
pub fn ff_conditional(layer: &FeedforwardLayer, x_in: &[usize]) -> Result<Distribution> {
    let lq = log_ff_conditional(layer, x_in)?;
    Distribution::from_log_weights(StateSpace::new(layer.n_out(), layer.q())?, &lq)
}

/// Normalized log of `Σ_x p(x) q(· | x)` from a log input distribution.
pub fn log_pushforward(layer: &FeedforwardLayer, log_p_in: &[f64]) -> Result<Vec<f64>> {
    let in_space = StateSpace::new(layer.n_in(), layer.q())?;
    let out_space = StateSpace::new(layer.n_out(), layer.q())?;
    if log_p_in.len() != in_space.cardinality() {
        return Err(Error::dim(format!(
            "input has {} entries, layer input space has {}",
            log_p_in.len(),
            in_space.cardinality()
        )));
    }
    let mut acc = vec![f64::NEG_INFINITY; out_space.cardinality()];
    let mut x = vec![0; in_space.n()];
    for (xi, &lp) in log_p_in.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        in_space.decode_into(xi, &mut x);
        let lq = log_conditional_unchecked(layer, &x);
        for (a, l) in acc.iter_mut().zip(lq) {
            let t = lp + l;
            *a = if *a >= t {
                *a + (t - *a).exp().ln_1p()
            } else {
                t + (*a - t).exp().ln_1p()
            };
        }
    }
    log_normalize(&mut acc);
    Ok(acc)
}

/// `Σ_x p_in(x) q(· | x)`.
pub fn pushforward(layer: &FeedforwardLayer, p_in: &Distribution) -> Result<Distribution> {
    let in_space = StateSpace::new(layer.n_in(), layer.q())?;
    if p_in.space() != in_space {
        return Err(Error::dim(format!(
            "input space {:?}, layer expects {:?}",
            p_in.space(),
            in_space
        )));
    }
    let out_space = StateSpace::new(layer.n_out(), layer.q())?;
    let mut acc = vec![0.0; out_space.cardinality()];
    for (xi, &p) in p_in.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let lq = log_conditional_unchecked(layer, &in_space.decode(xi));
        for (a, l) in acc.iter_mut().zip(lq) {
            *a += p * l.exp();
        }
    }
    Distribution::from_weights(out_space, acc)
}

/// Both sides of the visible factorization
/// `p(x_0) = Σ_{x_1} q(x_0 | x_1) (r ∗ s)(x_1)` with `B'_1 = B_1`; returns
/// the largest absolute deviation.
pub fn visible_factorization_check(params: &DbmParams) -> Result<f64> {
    if params.depth() < 2 {
        return Err(Error::domain("the factorization check needs L >= 2"));
    }
    visible_factorization_check_with(params, &params.biases()[1].clone())
}

/// [`visible_factorization_check`] with an explicit bias split `B'_1`.
/// The left side comes from the full model's messages; the right side from
/// the bottom RBM `(W_0, B_0, B'_1)`, its conditional and top marginal `r`,
/// and the bottom marginal `s` of the upper stack.
pub fn visible_factorization_check_with(params: &DbmParams, bias_split: &BiasArray) -> Result<f64> {
    let left = layer_marginal(params, 0)?;
    let (lower, upper) = split_at_layer(params, 1, bias_split)?;
    let r = layer_marginal(&lower, 1)?;
    let s = layer_marginal(&upper, 0)?;
    let rs = hadamard(&r, &s)?;
    let right = pushforward(&FeedforwardLayer::from_dbm_bottom(params), &rs)?;
    Ok(max_abs_diff(left.probs(), right.probs()))
}
