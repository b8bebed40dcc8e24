//! Finite-sharpness parameterizations of the two building blocks: a top RBM
//! whose visible marginal concentrates on a union of lines, and sharing
//! layers that copy their input while moving prescribed mass along each
//! entry's flip direction.
//!
//! Everything here works on one-hot arrays in log domain; conversion to the
//! stored representation happens in the caller.

use crate::error::{Error, Result};
use crate::logspace::{log_normalize, log_sum_exp};
use crate::model::{bias_from_one_hot, FeedforwardLayer, OneHotPair};
use crate::space::{StateSpace, SupportSet};

use super::plan::{rbm_line_capacity, Line, SharingStep};

/// A feedforward layer in one-hot form: output unit `i` symbol `v` receives
/// the field `Σ_m w[i, v, m, x_m] + b[i, v]` from input `x`.
#[derive(Clone, Debug)]
pub(crate) struct OneHotFf {
    pub pair: OneHotPair,
    /// `n_out × q`.
    pub bias: Vec<f64>,
}

impl OneHotFf {
    /// Stored form; input-side terms of the binary re-gauge only depend on the
    /// input and cancel in the conditional, so they are dropped.
    pub fn to_feedforward(&self) -> FeedforwardLayer {
        let (w, lower, _) = self.pair.to_stored();
        let b = bias_from_one_hot(self.pair.rows, self.pair.q, &self.bias, &lower);
        FeedforwardLayer::new(w, b).expect("shapes agree by construction")
    }

    /// `ln Σ_{x_out} exp(field)` for every input state: the log top marginal
    /// (unnormalized) of the RBM formed by this layer with a zero input bias.
    pub fn log_interface(&self, space: StateSpace) -> Vec<f64> {
        let (n, q) = (space.n(), space.q());
        let mut x = vec![0; n];
        let mut h = vec![0.0; q];
        (0..space.cardinality())
            .map(|xi| {
                space.decode_into(xi, &mut x);
                let mut total = 0.0;
                for i in 0..self.pair.rows {
                    for (v, hv) in h.iter_mut().enumerate() {
                        *hv = self.bias[i * q + v]
                            + x.iter()
                                .enumerate()
                                .map(|(m, &c)| self.pair.w[self.pair.at(i, v, m, c)])
                                .sum::<f64>();
                    }
                    total += log_sum_exp(&h);
                }
                total
            })
            .collect()
    }
}

/// Coefficients of the face functional `A(x) = Σ_{m≠axis} [x_m = base_m] - (n-1)`,
/// which is 0 on the line and at most -1 off it.
fn add_face(pair: &mut OneHotPair, bias: &mut [f64], out_unit: usize, out_sym: usize, line: &Line, gain: f64) {
    let n = line.base.len();
    let q = pair.q;
    for m in (0..n).filter(|&m| m != line.axis) {
        let k = pair.at(out_unit, out_sym, m, line.base[m]);
        pair.w[k] += gain;
    }
    bias[out_unit * q + out_sym] -= gain * (n as f64 - 1.0);
}

/// Sharing layer for `step` at margin `margin`. `masses[k]` holds the log of
/// the mass that stays at the source and the log of the mass that moves to the
/// target, for the `k`-th move in step order.
#[allow(clippy::needless_range_loop)]
pub(crate) fn sharing_layer(space: StateSpace, step: &SharingStep, masses: &[(f64, f64)], margin: f64) -> OneHotFf {
    let (n, q) = (space.n(), space.q());
    let big_m = margin;
    let mut pair = OneHotPair::zeros(n, n, q);
    let mut bias = vec![0.0; n * q];
    let mut used = vec![None; n];
    let mut k = 0;
    for e in &step.entries {
        used[e.unit] = Some((e, &masses[k..k + e.moves.len()]));
        k += e.moves.len();
    }
    for (i, slot) in used.iter().enumerate() {
        let Some((e, ms)) = slot else {
            for v in 0..q {
                let at = pair.at(i, v, i, v);
                pair.w[at] = big_m;
            }
            continue;
        };
        let line = &e.line;
        let d = line.axis;
        // Face table t[v][w]: log probability of output symbol v at the line
        // point with symbol w on the axis, shifted so each column's max is 0.
        let mut t = vec![vec![0.0; q]; q];
        for w in 0..q {
            let p = line.point(w);
            let pi = space.encode_unchecked(&p);
            let mv = e.moves.iter().position(|m| m.source == pi);
            match mv {
                Some(mi) => {
                    let (lk, lm) = ms[mi];
                    let b = e.moves[mi].symbol;
                    let mut lp = vec![f64::NEG_INFINITY; q];
                    lp[p[i]] = lk;
                    lp[b] = lm;
                    let mx = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lo = lk.min(lm);
                    let floor = if lo.is_finite() {
                        (mx - big_m).min(lo)
                    } else {
                        mx - big_m
                    };
                    for v in 0..q {
                        t[v][w] = lp[v].max(floor) - mx;
                    }
                }
                None => {
                    for (v, row) in t.iter_mut().enumerate() {
                        row[w] = if v == p[i] { 0.0 } else { -big_m };
                    }
                }
            }
        }
        if i != d {
            let vs = line.base[i];
            let mut dev: f64 = 0.0;
            let mut spread: f64 = 0.0;
            for w in 0..q {
                let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
                for v in 0..q {
                    dev = dev.max(t[v][w] - t[vs][w]);
                    hi = hi.max(t[v][w]);
                    lo = lo.min(t[v][w]);
                }
                spread = spread.max(hi - lo);
            }
            let g = big_m + dev;
            let c = (big_m + spread).max((big_m + (n as f64 - 1.0) * g + spread) / 2.0);
            for v in 0..q {
                let at = pair.at(i, v, i, v);
                pair.w[at] += c;
                for w in 0..q {
                    let at = pair.at(i, v, d, w);
                    pair.w[at] += t[v][w] - if v == vs { c } else { 0.0 };
                }
                if v != vs {
                    add_face(&mut pair, &mut bias, i, v, line, g);
                }
            }
        } else {
            let src = space.decode(e.moves[0].source);
            let ws = src[i];
            let dev = (0..q).map(|v| t[v][ws] - t[ws][ws]).fold(0.0, f64::max);
            let g = big_m + dev;
            let cb = big_m + (n as f64 - 1.0) * g;
            for v in 0..q {
                for c in 0..q {
                    let at = pair.at(i, v, i, c);
                    if c == ws {
                        pair.w[at] += t[v][ws];
                    } else if v == c {
                        pair.w[at] += cb;
                    }
                }
                if v != ws {
                    add_face(&mut pair, &mut bias, i, v, line, g);
                }
            }
        }
    }
    OneHotFf { pair, bias }
}

/// One-hot RBM: `w` couples visible unit `i` to hidden unit `u`; `b` and `c`
/// are the visible and hidden biases.
#[derive(Clone, Debug)]
pub(crate) struct OneHotRbm {
    pub pair: OneHotPair,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// RBM whose visible marginal approximates `log_target` (normalized, `-inf`
/// off the support) when the support lies on the union of `lines`. The first
/// line is carried by the visible biases alone; every other line gets one
/// non-zero state of one hidden unit, which switches on only on that line.
pub(crate) fn top_rbm(space: StateSpace, log_target: &[f64], lines: &[Line], margin: f64) -> OneHotRbm {
    let (n, q) = (space.n(), space.q());
    let finite: Vec<f64> = log_target.iter().copied().filter(|v| v.is_finite()).collect();
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;
    let mr = margin + spread;
    let line_logs = |line: &Line| -> Vec<f64> {
        let v: Vec<f64> = line.indices(space).iter().map(|&p| log_target[p]).collect();
        let mx = v
            .iter()
            .copied()
            .filter(|x| x.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let mx = if mx.is_finite() { mx } else { 0.0 };
        v.iter().map(|&x| x.max(mx - mr - spread)).collect()
    };

    let mut pair = OneHotPair::zeros(n, n, q);
    let mut b = vec![0.0; n * q];
    let mut c = vec![0.0; n * q];
    let line0 = &lines[0];
    let l0 = line_logs(line0);
    let mx0 = l0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for m in (0..n).filter(|&m| m != line0.axis) {
        b[m * q + line0.base[m]] = mr;
    }
    for (w, &l) in l0.iter().enumerate() {
        b[line0.axis * q + w] = l - mx0;
    }
    let k_off = (n as f64 - 1.0) * mr - mx0;
    let g = n as f64 * mr + spread + margin;
    let slots = (0..n).flat_map(|u| (1..q).map(move |v| (u, v)));
    for (line, (u, v)) in lines[1..].iter().zip(slots) {
        let ll = line_logs(line);
        for i in 0..n {
            for a in 0..q {
                let at = pair.at(i, a, u, v);
                pair.w[at] -= b[i * q + a];
                if i == line.axis {
                    pair.w[at] += ll[a];
                }
                if i != line.axis && a == line.base[i] {
                    pair.w[at] += g;
                }
            }
        }
        c[u * q + v] += -g * (n as f64 - 1.0) + k_off;
    }
    OneHotRbm { pair, b, c }
}

/// Additive (main-effect) part of `f` over the cube:
/// `g[m][w] = mean(f | x_m = w) - mean(f)`.
pub(crate) fn additive_part(space: StateSpace, f: &[f64]) -> Vec<f64> {
    let (n, q) = (space.n(), space.q());
    let total = f.len() as f64;
    let mean = f.iter().sum::<f64>() / total;
    let mut g = vec![0.0; n * q];
    let mut x = vec![0; n];
    for (xi, &v) in f.iter().enumerate() {
        space.decode_into(xi, &mut x);
        for (m, &w) in x.iter().enumerate() {
            g[m * q + w] += v;
        }
    }
    let per = total / q as f64;
    for v in g.iter_mut() {
        *v = *v / per - mean;
    }
    g
}

/// Public wrapper: RBM with `n` hidden units whose visible marginal
/// approximates `s_target`, supported on the union of `lines`.
pub fn build_rbm_support(
    s_target: &crate::distribution::Distribution,
    lines: &[Line],
    beta: f64,
) -> Result<crate::model::RbmParams> {
    let space = s_target.space();
    check_beta(beta)?;
    if lines.is_empty() {
        return Err(Error::Plan("at least one line is required".into()));
    }
    if lines.len() > rbm_line_capacity(space.n(), space.q()) {
        return Err(Error::Plan(format!(
            "{} lines exceed the capacity {} of an RBM with {} hidden units",
            lines.len(),
            rbm_line_capacity(space.n(), space.q()),
            space.n()
        )));
    }
    let mut covered = SupportSet::new(space, [])?;
    for line in lines {
        if line.base.len() != space.n() || line.axis >= space.n() {
            return Err(Error::Plan("line does not belong to the target space".into()));
        }
        space.encode(&line.base)?;
        for p in line.indices(space) {
            if !covered.insert(p) {
                return Err(Error::Plan(format!("lines overlap at state {p}")));
            }
        }
    }
    if let Some(x) = s_target.support().iter().find(|&x| !covered.contains(x)) {
        return Err(Error::Plan(format!("state {x} of the support is not on any line")));
    }
    let rbm = top_rbm(space, &s_target.log_probs(), lines, beta);
    super::assemble(space, &[], &[], Some(&rbm), space.n())
}

/// Public wrapper: stored feedforward layer that shares mass according to
/// `step` with fractions `ρ` (one per move, in step order) at sharpness `beta`.
pub fn build_sharing_layer(
    support: &SupportSet,
    step: &SharingStep,
    fractions: &[f64],
    beta: f64,
) -> Result<FeedforwardLayer> {
    check_beta(beta)?;
    step.validate(support)?;
    let moves = step.entries.iter().map(|e| e.moves.len()).sum::<usize>();
    if fractions.len() != moves {
        return Err(Error::dim(format!("{} fractions for {moves} moves", fractions.len())));
    }
    if let Some(r) = fractions.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::domain(format!("fraction {r} outside [0, 1]")));
    }
    let masses: Vec<(f64, f64)> = fractions.iter().map(|&r| ((1.0 - r).ln(), r.ln())).collect();
    Ok(sharing_layer(support.space(), step, &masses, beta).to_feedforward())
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::domain(format!("sharpness {beta} must be positive and finite")));
    }
    Ok(())
}

/// Normalized log vector, `-inf` preserved.
pub(crate) fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    log_normalize(&mut v);
    v
}
