//! Compiler from a target distribution on `n` visible units to a DBM of
//! width `n` whose visible marginal approximates it.
//!
//! Pipeline, for a fixed base sharpness `β`:
//!
//! 1. Plan `S¹ ⊂ S² ⊂ … ⊂ {0..q-1}ⁿ` ([`plan_supports`]).
//! 2. Bottom-up, for each sharing layer `j`: undo its step on the current
//!    level target to get the distribution its input must carry, build the
//!    layer so that it pushes that input forward onto the current target,
//!    compute the top marginal `r` of the RBM formed by the layer exactly, and
//!    neutralize `r` out of the input distribution. The result is the target
//!    for the layers above.
//! 3. Build the top RBM on the lines of `S¹`.
//! 4. Evaluate `KL(target ‖ visible marginal)` exactly.
//!
//! `β` doubles from `beta0` until the KL meets the tolerance or exceeds
//! `max_beta`. Each layer runs at margin `β` plus an offset computed from the
//! interface below it, so that leakage of the upper layers stays small
//! relative to the smallest mass the layer below must reproduce.

mod construct;
mod plan;

pub use construct::{build_rbm_support, build_sharing_layer};
pub use plan::{
    apply_sharing, backward_targets, plan_supports, rbm_line_capacity, share_fractions, Line, ShareEntry, ShareMove,
    SharingPlan, SharingStep,
};

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::distribution::{kl_divergence_log, Distribution};
use crate::error::{Error, Result};
use crate::inference::log_layer_marginal;
use crate::model::{bias_from_one_hot, DbmParams, FeedforwardLayer, OneHotPair};
use crate::space::StateSpace;

use construct::{additive_part, check_beta, normalized, sharing_layer, top_rbm, OneHotFf, OneHotRbm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileConfig {
    /// Target KL divergence in nats.
    pub tolerance: f64,
    /// First base sharpness of the doubling schedule.
    pub beta0: f64,
    /// Largest base sharpness tried.
    pub max_beta: f64,
    /// Refuse plans needing more hidden layers than this.
    pub max_depth: Option<usize>,
    /// Hidden layer width; defaults to the visible width.
    pub width: Option<usize>,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            tolerance: 1e-2,
            beta0: 8.0,
            max_beta: 64.0,
            max_depth: None,
            width: None,
        }
    }
}

/// KL achieved at one base sharpness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub beta: f64,
    #[serde(with = "divergence")]
    pub kl: f64,
}

/// JSON has no infinity: an infinite divergence is written as `null`.
mod divergence {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Distributions at the interface between sharing layer `layer - 1` and the
/// layers above, as probability vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceRecord {
    pub layer: usize,
    /// Input the sharing layer below must receive (the un-shared target).
    pub target: Vec<f64>,
    /// Top marginal `r` of the RBM formed by the layer below.
    pub interface: Vec<f64>,
    /// `target / r`, the target handed to the layers above.
    pub corrected: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `null` in JSON when the divergence is infinite.
    #[serde(with = "divergence")]
    pub kl: f64,
    pub depth: usize,
    /// Per-layer margins, bottom to top.
    pub betas: Vec<f64>,
    pub base_beta: f64,
    /// Weight of the uniform mixture applied to a target with zeros.
    pub smoothing: f64,
    pub bound_sufficient: Option<u64>,
    pub bound_necessary: u64,
    pub tolerance: f64,
    pub converged: bool,
    pub n: usize,
    pub q: usize,
    pub width: usize,
    pub attempts: Vec<Attempt>,
    /// The distribution the layers were fitted to (after smoothing).
    pub visible_target: Vec<f64>,
    pub interfaces: Vec<InterfaceRecord>,
    /// Why attempts were cut short, if any were.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::parse(e.path().to_string(), e.inner().to_string()))
    }
}

/// A compiled model with its certificate and plan.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub params: DbmParams,
    pub certificate: Certificate,
    pub plan: SharingPlan,
}

/// Per-interface quantities of one construction, in log domain.
#[derive(Clone, Debug)]
pub struct Level {
    /// Layer index of the interface (the input side of sharing layer `layer - 1`).
    pub layer: usize,
    /// Target the sharing layer must produce on layer `layer - 1`.
    pub below: Vec<f64>,
    /// Un-shared input distribution on layer `layer`.
    pub unshared: Vec<f64>,
    /// Normalized log top marginal `r` of the RBM formed by the layer.
    pub interface: Vec<f64>,
    /// Normalized `unshared - interface`.
    pub corrected: Vec<f64>,
}

/// Everything built at one base sharpness.
#[derive(Clone, Debug)]
pub struct Construction {
    pub beta: f64,
    pub margins: Vec<f64>,
    pub levels: Vec<Level>,
    /// Sharing layers, bottom to top, in stored form.
    pub layers: Vec<FeedforwardLayer>,
    /// Target of the top RBM on layer `L - 1`.
    pub top_target: Vec<f64>,
    pub params: DbmParams,
}

/// Build the full model for `log_target` (normalized, finite) at base
/// sharpness `beta`, with hidden width `width`.
pub fn construct(log_target: &[f64], plan: &SharingPlan, beta: f64, width: usize) -> Result<Construction> {
    check_beta(beta)?;
    let space = plan.space();
    if log_target.len() != space.cardinality() || log_target.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(
            "construction needs a strictly positive target over the plan space",
        ));
    }
    if width < space.n() {
        return Err(Error::Architecture(format!(
            "width {width} < visible width {}",
            space.n()
        )));
    }
    let (n, q) = (space.n(), space.q());
    let depth = plan.depth();
    let mut cur = normalized(log_target.to_vec());
    let mut bprime = vec![0.0; n * q];
    let mut bprimes = Vec::with_capacity(depth);
    let mut margin = beta;
    let mut margins = Vec::with_capacity(depth);
    let mut ffs = Vec::with_capacity(depth - 1);
    let mut levels = Vec::with_capacity(depth - 1);

    for j in 0..depth - 1 {
        let step = &plan.steps[depth - 2 - j];
        let prev = plan::unshare_log(&cur, step);
        let masses: Vec<(f64, f64)> = step
            .entries
            .iter()
            .flat_map(|e| e.moves.iter())
            .map(|m| (cur[m.source], cur[m.target]))
            .collect();
        let ff = sharing_layer(space, step, &masses, margin);

        let lr = ff.log_interface(space);
        let g = additive_part(space, &lr);
        let mut x = vec![0; n];
        let lr2: Vec<f64> = lr
            .iter()
            .enumerate()
            .map(|(xi, &v)| {
                space.decode_into(xi, &mut x);
                v - x.iter().enumerate().map(|(m, &w)| g[m * q + w]).sum::<f64>()
            })
            .collect();
        let corrected = normalized(
            prev.iter()
                .zip(&lr2)
                .map(|(&p, &r)| if p.is_finite() { p - r } else { f64::NEG_INFINITY })
                .collect(),
        );
        let amp = margin_offset(space, &prev, &lr2, &cur);
        bprimes.push(std::mem::take(&mut bprime));
        bprime = g.iter().map(|v| -v).collect();
        margins.push(margin);
        levels.push(Level {
            layer: j + 1,
            below: cur,
            unshared: prev,
            interface: normalized(lr2),
            corrected: corrected.clone(),
        });
        ffs.push(ff);
        margin = beta + amp;
        cur = corrected;
    }
    let rbm = top_rbm(space, &cur, &plan.initial_lines, margin);
    margins.push(margin);
    bprimes.push(bprime);
    let params = assemble(space, &ffs, &bprimes, Some(&rbm), width)?;
    Ok(Construction {
        beta,
        margins,
        levels,
        layers: ffs.iter().map(|f| f.to_feedforward()).collect(),
        top_target: cur,
        params,
    })
}

/// Extra margin the next layer needs: the largest log-ratio by which a
/// single-coordinate leak from a supported state `x` to a neighbour `y` is
/// amplified once the interface `lr2` is multiplied back in, measured
/// against `y`'s own mass, or against the smallest mass of the level below
/// when `y` is outside the support.
fn margin_offset(space: StateSpace, prev: &[f64], lr2: &[f64], below: &[f64]) -> f64 {
    let (n, q) = (space.n(), space.q());
    let lmin = below
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let mut amp: f64 = 0.0;
    let mut x = vec![0; n];
    for (xi, &lp) in prev.iter().enumerate() {
        if !lp.is_finite() {
            continue;
        }
        space.decode_into(xi, &mut x);
        for m in 0..n {
            let orig = x[m];
            for w in (0..q).filter(|&w| w != orig) {
                x[m] = w;
                let yi = space.encode_unchecked(&x);
                let denom = if prev[yi].is_finite() { prev[yi] } else { lmin };
                amp = amp.max(lr2[yi] - lr2[xi] + lp - denom);
            }
            x[m] = orig;
        }
    }
    amp
}

/// Stack one-hot sharing layers and a top RBM into stored parameters,
/// padding hidden layers to `width` with disconnected units.
pub(crate) fn assemble(
    space: StateSpace,
    ffs: &[OneHotFf],
    bprimes: &[Vec<f64>],
    rbm: Option<&OneHotRbm>,
    width: usize,
) -> Result<DbmParams> {
    let (n, q) = (space.n(), space.q());
    let mut pairs: Vec<&OneHotPair> = ffs.iter().map(|f| &f.pair).collect();
    let mut biases: Vec<Vec<f64>> = ffs.iter().map(|f| f.bias.clone()).collect();
    if let Some(r) = rbm {
        pairs.push(&r.pair);
        biases.push(r.b.clone());
        biases.push(r.c.clone());
    }
    for (b, bp) in biases.iter_mut().zip(bprimes) {
        for (x, y) in b.iter_mut().zip(bp) {
            *x += y;
        }
    }
    let depth = pairs.len();
    let widths: Vec<usize> = (0..=depth).map(|l| if l == 0 { n } else { width }).collect();
    let padded_biases: Vec<Vec<f64>> = biases
        .iter()
        .enumerate()
        .map(|(l, b)| {
            let mut p = vec![0.0; widths[l] * q];
            p[..b.len()].copy_from_slice(b);
            p
        })
        .collect();
    let corr_len = |l: usize| if q == 2 { widths[l] } else { widths[l] * q };
    let mut corrections: Vec<Vec<f64>> = (0..=depth).map(|l| vec![0.0; corr_len(l)]).collect();
    let mut weights = Vec::with_capacity(depth);
    for (l, pair) in pairs.iter().enumerate() {
        let mut big = OneHotPair::zeros(widths[l], widths[l + 1], q);
        for i in 0..pair.rows {
            for a in 0..q {
                for m in 0..pair.cols {
                    for b in 0..q {
                        let at = big.at(i, a, m, b);
                        big.w[at] = pair.w[pair.at(i, a, m, b)];
                    }
                }
            }
        }
        let (w, lower, upper) = big.to_stored();
        for (c, v) in corrections[l].iter_mut().zip(lower) {
            *c += v;
        }
        for (c, v) in corrections[l + 1].iter_mut().zip(upper) {
            *c += v;
        }
        weights.push(w);
    }
    let stored_biases = padded_biases
        .iter()
        .enumerate()
        .map(|(l, b)| bias_from_one_hot(widths[l], q, b, &corrections[l]))
        .collect();
    DbmParams::new(q, widths, weights, stored_biases)
}

/// Checks the hidden width against the minimum and against what the
/// construction supports (at least the visible width).
fn resolve_width(n: usize, q: usize, width: Option<usize>) -> Result<usize> {
    let w = width.unwrap_or(n);
    if q == 2 && w < bounds::min_first_hidden_width(n) {
        return Err(Error::Architecture(format!(
            "hidden width {w} is below the minimum {} for {n} binary visible units",
            bounds::min_first_hidden_width(n)
        )));
    }
    if w < n {
        return Err(Error::Architecture(format!(
            "hidden width {w} is smaller than the visible width {n}; the construction needs at least {n}"
        )));
    }
    Ok(w)
}

/// Largest layer margin the compiler accepts. Energies then reach about
/// `1e11`, where f64 rounding in log space is still below `1e-5`.
pub const MARGIN_LIMIT: f64 = 1e10;

fn beta_schedule(beta0: f64, max_beta: f64) -> Vec<f64> {
    if beta0 > max_beta {
        return vec![max_beta];
    }
    let mut out = Vec::new();
    let mut b = beta0;
    while b <= max_beta * (1.0 + 1e-12) {
        out.push(b);
        b *= 2.0;
    }
    out
}

fn probs_of(log: &[f64]) -> Vec<f64> {
    log.iter().map(|v| v.exp()).collect()
}

/// Compile `target` into a DBM. Targets with zero entries are mixed with the
/// uniform distribution at weight `tolerance / 2` first; the reported KL is
/// always measured against the original target.
pub fn compile(target: &Distribution, config: &CompileConfig) -> Result<Compiled> {
    let space = target.space();
    let (n, q) = (space.n(), space.q());
    if n == 0 {
        return Err(Error::domain("the target must have at least one unit"));
    }
    if !(config.tolerance.is_finite() && config.tolerance > 0.0) {
        return Err(Error::domain(format!(
            "tolerance {} must be positive",
            config.tolerance
        )));
    }
    check_beta(config.beta0)?;
    check_beta(config.max_beta)?;
    let width = resolve_width(n, q, config.width)?;
    let plan = plan_supports(n, q)?;
    let bound_sufficient = bounds::sufficient_depth(n, q).ok();
    let bound_necessary = bounds::necessary_depth(n, q)?;

    let mut cert = Certificate {
        kl: f64::INFINITY,
        depth: 1,
        betas: vec![],
        base_beta: 0.0,
        smoothing: 0.0,
        bound_sufficient,
        bound_necessary,
        tolerance: config.tolerance,
        converged: false,
        n,
        q,
        width,
        attempts: vec![],
        visible_target: target.probs().to_vec(),
        interfaces: vec![],
        notes: vec![],
    };

    let uniform = DbmParams::zeros(q, vec![n, width])?;
    let uniform_kl = kl_divergence_log(target, &log_layer_marginal(&uniform, 0)?)?;
    if uniform_kl <= config.tolerance {
        cert.kl = uniform_kl;
        cert.converged = true;
        return Ok(Compiled {
            params: uniform,
            certificate: cert,
            plan,
        });
    }

    if let Some(max) = config.max_depth {
        if plan.depth() > max {
            return Err(Error::Architecture(format!(
                "the plan needs {} hidden layers, more than the allowed {max}",
                plan.depth()
            )));
        }
    }
    cert.depth = plan.depth();

    let fitted = if target.is_strictly_positive() {
        target.clone()
    } else {
        let eps = config.tolerance / 2.0;
        cert.smoothing = eps;
        let u = 1.0 / space.cardinality() as f64;
        Distribution::from_weights(
            space,
            target.probs().iter().map(|p| (1.0 - eps) * p + eps * u).collect(),
        )?
    };
    cert.visible_target = fitted.probs().to_vec();
    let log_fitted = fitted.log_probs();

    let mut best: Option<(Construction, f64)> = None;
    for beta in beta_schedule(config.beta0, config.max_beta) {
        let c = construct(&log_fitted, &plan, beta, width)?;
        // Margins only grow with beta, so an out-of-range attempt ends the schedule.
        let in_range = c.margins.iter().all(|&m| m <= MARGIN_LIMIT);
        let kl = if in_range {
            log_layer_marginal(&c.params, 0)
                .and_then(|lm| kl_divergence_log(target, &lm))
                .unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };
        cert.attempts.push(Attempt { beta, kl });
        if !in_range {
            cert.notes.push(format!(
                "beta {beta}: layer margins reach {:.3e}, beyond the {MARGIN_LIMIT:e} limit of f64 evaluation",
                c.margins.iter().copied().fold(0.0, f64::max)
            ));
            if best.is_none() {
                best = Some((c, kl));
            }
            break;
        }
        let done = kl <= config.tolerance;
        if best.as_ref().is_none_or(|(_, k)| kl < *k || done || k.is_infinite()) {
            best = Some((c, kl));
        }
        if done {
            break;
        }
    }
    let (c, kl) = best.expect("the schedule has at least one entry");
    cert.kl = kl;
    cert.base_beta = c.beta;
    cert.betas = c.margins.clone();
    cert.converged = kl <= config.tolerance;
    cert.interfaces = c
        .levels
        .iter()
        .map(|l| InterfaceRecord {
            layer: l.layer,
            target: probs_of(&l.unshared),
            interface: probs_of(&l.interface),
            corrected: probs_of(&l.corrected),
        })
        .collect();
    let compiled = Compiled {
        params: c.params,
        certificate: cert,
        plan,
    };
    if compiled.certificate.converged {
        Ok(compiled)
    } else {
        Err(Error::Convergence {
            best_kl: kl,
            best_beta: c.beta,
            tolerance: config.tolerance,
            outcome: Box::new(compiled),
        })
    }
}
