//! Dense probability vectors over a [`StateSpace`] and the operations the
//! compiler is built from: KL divergence, the renormalized Hadamard product,
//! neutralization and clamping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace;
use crate::space::{StateSpace, SupportSet};

/// Normalization slack accepted by [`Distribution::new`].
const SUM_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    space: StateSpace,
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates `probs`, which must sum to one within `1e-6`. Sums off by
    /// more than rounding are renormalized; otherwise the values are kept
    /// bit for bit so that files round-trip exactly.
    pub fn new(space: StateSpace, probs: Vec<f64>) -> Result<Self> {
        let sum = check_weights(space, &probs)?;
        if (sum - 1.0).abs() > SUM_SLACK {
            return Err(Error::domain(format!("probabilities sum to {sum}, expected 1")));
        }
        if (sum - 1.0).abs() <= 1e-12 {
            return Ok(Distribution { space, probs });
        }
        Ok(Self::normalized(space, probs, sum))
    }

    /// Normalizes arbitrary non-negative weights with a positive sum.
    pub fn from_weights(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        let sum = check_weights(space, &weights)?;
        Ok(Self::normalized(space, weights, sum))
    }

    /// Normalizes log weights; `-inf` entries become exact zeros.
    pub fn from_log_weights(space: StateSpace, logs: &[f64]) -> Result<Self> {
        if logs.len() != space.cardinality() {
            return Err(Error::dim(format!(
                "{} log weights for {} states",
                logs.len(),
                space.cardinality()
            )));
        }
        if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::domain("log weights must be finite or -inf"));
        }
        if logs.iter().all(|&l| l == f64::NEG_INFINITY) {
            return Err(Error::domain("all log weights are -inf"));
        }
        let probs = logspace::softmax(logs);
        let sum: f64 = probs.iter().sum();
        Ok(Self::normalized(space, probs, sum))
    }

    fn normalized(space: StateSpace, mut probs: Vec<f64>, sum: f64) -> Self {
        for p in probs.iter_mut() {
            *p /= sum;
        }
        Distribution { space, probs }
    }

    pub fn uniform(space: StateSpace) -> Self {
        let c = space.cardinality();
        Distribution {
            space,
            probs: vec![1.0 / c as f64; c],
        }
    }

    /// Seeded strictly positive distribution drawn from the flat Dirichlet
    /// (normalized exponential weights), floored at `1e-3` of the mean mass.
    pub fn random_positive(space: StateSpace, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..space.cardinality())
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .map(|w: f64| w.max(1e-3))
            .collect();
        Distribution::from_weights(space, weights).expect("positive weights")
    }

    pub fn point_mass(space: StateSpace, index: usize) -> Result<Self> {
        if index >= space.cardinality() {
            return Err(Error::Index(format!("state {index} >= {}", space.cardinality())));
        }
        let mut probs = vec![0.0; space.cardinality()];
        probs[index] = 1.0;
        Ok(Distribution { space, probs })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn log_probs(&self) -> Vec<f64> {
        logspace::ln_vec(&self.probs)
    }

    pub fn support(&self) -> SupportSet {
        SupportSet::new(
            self.space,
            self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i),
        )
        .expect("indices are in range and distinct")
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn total_variation(&self, other: &Distribution) -> Result<f64> {
        same_space(self, other)?;
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// Marginal over the listed coordinates, in the listed order.
    pub fn marginal(&self, coords: &[usize]) -> Result<Distribution> {
        check_coords(self.space, coords)?;
        let out = StateSpace::new(coords.len(), self.space.q())?;
        let mut probs = vec![0.0; out.cardinality()];
        let mut x = vec![0; self.space.n()];
        let mut y = vec![0; coords.len()];
        for (i, &p) in self.probs.iter().enumerate() {
            self.space.decode_into(i, &mut x);
            for (k, &c) in coords.iter().enumerate() {
                y[k] = x[c];
            }
            probs[out.encode_unchecked(&y)] += p;
        }
        let sum = probs.iter().sum();
        Ok(Self::normalized(out, probs, sum))
    }

    pub fn to_file(&self) -> DistributionFile {
        DistributionFile {
            n: self.space.n(),
            q: self.space.q(),
            probs: self.probs.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: DistributionFile = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::parse(e.path().to_string(), e.inner().to_string()))?;
        file.into_distribution()
    }
}

/// On-disk form: `{ "n": int, "q": int, "probs": [...] }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub n: usize,
    pub q: usize,
    pub probs: Vec<f64>,
}

impl DistributionFile {
    pub fn into_distribution(self) -> Result<Distribution> {
        let space = StateSpace::new(self.n, self.q).map_err(|e| Error::parse("n", e.to_string()))?;
        if self.probs.len() != space.cardinality() {
            return Err(Error::parse(
                "probs",
                format!("expected {} entries, found {}", space.cardinality(), self.probs.len()),
            ));
        }
        Distribution::new(space, self.probs).map_err(|e| Error::parse("probs", e.to_string()))
    }
}

fn check_weights(space: StateSpace, w: &[f64]) -> Result<f64> {
    if w.len() != space.cardinality() {
        return Err(Error::dim(format!(
            "{} entries for {} states",
            w.len(),
            space.cardinality()
        )));
    }
    if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::domain(format!(
            "entry {i} = {v} is not a finite non-negative number"
        )));
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Err(Error::domain("weights sum to zero"));
    }
    Ok(sum)
}

fn same_space(a: &Distribution, b: &Distribution) -> Result<()> {
    if a.space != b.space {
        return Err(Error::dim(format!("spaces {:?} and {:?}", a.space, b.space)));
    }
    Ok(())
}

fn check_coords(space: StateSpace, coords: &[usize]) -> Result<()> {
    let mut seen = vec![false; space.n()];
    for &c in coords {
        if c >= space.n() {
            return Err(Error::Index(format!("coordinate {c} >= n = {}", space.n())));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::domain(format!("coordinate {c} listed twice")));
        }
    }
    Ok(())
}

/// `D(target ‖ model)` in nats. Terms with `target(x) = 0` contribute zero;
/// a positive target entry against a zero model entry yields `+inf`.
pub fn kl_divergence(target: &Distribution, model: &Distribution) -> Result<f64> {
    same_space(target, model)?;
    let mut kl = 0.0;
    for (&t, &m) in target.probs.iter().zip(&model.probs) {
        if t > 0.0 {
            if m <= 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += t * (t.ln() - m.ln());
        }
    }
    Ok(kl.max(0.0))
}

/// KL divergence against a model given by normalized log probabilities.
pub fn kl_divergence_log(target: &Distribution, model_log: &[f64]) -> Result<f64> {
    if model_log.len() != target.probs.len() {
        return Err(Error::dim(format!(
            "{} model entries for {} states",
            model_log.len(),
            target.probs.len()
        )));
    }
    if let Some(i) = model_log.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::domain(format!(
            "model log-probability at state {i} is {}",
            model_log[i]
        )));
    }
    let mut kl = 0.0;
    for (&t, &lm) in target.probs.iter().zip(model_log) {
        if t > 0.0 {
            if lm == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            kl += t * (t.ln() - lm);
        }
    }
    Ok(kl.max(0.0))
}

/// Renormalized entry-wise product `r(z) s(z) / Σ r s`.
pub fn hadamard(r: &Distribution, s: &Distribution) -> Result<Distribution> {
    same_space(r, s)?;
    let prod: Vec<f64> = r.probs.iter().zip(&s.probs).map(|(a, b)| a * b).collect();
    let sum: f64 = prod.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateProduct);
    }
    Ok(Distribution::normalized(r.space, prod, sum))
}

/// `s / r`, renormalized, so that `hadamard(r, neutralize(r, s)) == s`.
pub fn neutralize(r: &Distribution, s: &Distribution) -> Result<Distribution> {
    same_space(r, s)?;
    if let Some(i) = r.probs.iter().position(|&p| p <= 0.0) {
        return Err(Error::Positivity(format!("r({i}) = 0")));
    }
    let quot: Vec<f64> = r.probs.iter().zip(&s.probs).map(|(a, b)| b / a).collect();
    let sum: f64 = quot.iter().sum();
    Ok(Distribution::normalized(r.space, quot, sum))
}

/// Conditional distribution of the coordinates not in `input_coords`, given
/// that those coordinates take `input_value`. Remaining coordinates keep
/// their relative order.
pub fn condition_split(p: &Distribution, input_coords: &[usize], input_value: &[usize]) -> Result<Distribution> {
    let space = p.space;
    check_coords(space, input_coords)?;
    if input_coords.len() != input_value.len() {
        return Err(Error::dim(format!(
            "{} coordinates but {} values",
            input_coords.len(),
            input_value.len()
        )));
    }
    if let Some(v) = input_value.iter().find(|&&v| v >= space.q()) {
        return Err(Error::domain(format!("clamped symbol {v} >= q = {}", space.q())));
    }
    let rest: Vec<usize> = (0..space.n()).filter(|c| !input_coords.contains(c)).collect();
    let out = StateSpace::new(rest.len(), space.q())?;
    let mut x = vec![0; space.n()];
    for (&c, &v) in input_coords.iter().zip(input_value) {
        x[c] = v;
    }
    let mut probs = vec![0.0; out.cardinality()];
    let mut y = vec![0; rest.len()];
    for (j, slot) in probs.iter_mut().enumerate() {
        out.decode_into(j, &mut y);
        for (&c, &v) in rest.iter().zip(&y) {
            x[c] = v;
        }
        *slot = p.probs[space.encode_unchecked(&x)];
    }
    let sum: f64 = probs.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Conditioning);
    }
    Ok(Distribution::normalized(out, probs, sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(probs: &[f64]) -> Distribution {
        let n = (probs.len() as f64).log2().round() as usize;
        Distribution::new(StateSpace::new(n, 2).unwrap(), probs.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn kl_hand_values() {
        let p = d(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let k = kl_divergence(&p, &d(&[0.75, 0.25])).unwrap();
        assert!((k - 0.5 * (4.0f64 / 3.0).ln()).abs() < 1e-15);
        let k = kl_divergence(&d(&[1.0, 0.0]), &p).unwrap();
        assert!((k - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kl_zero_model_mass_is_infinite() {
        assert_eq!(kl_divergence(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn hadamard_hand_values() {
        let r = d(&[0.25, 0.75]);
        assert!(close(hadamard(&r, &r).unwrap().probs(), &[0.1, 0.9], 1e-15));
        assert!(close(
            hadamard(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap().probs(),
            &[1.0, 0.0],
            0.0
        ));
        let s = d(&[0.1, 0.2, 0.3, 0.4]);
        let u = Distribution::uniform(s.space());
        assert!(close(hadamard(&u, &s).unwrap().probs(), s.probs(), 1e-15));
    }

    #[test]
    fn hadamard_disjoint_supports_fail() {
        assert!(matches!(
            hadamard(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])),
            Err(Error::DegenerateProduct)
        ));
    }

    #[test]
    fn neutralize_hand_values() {
        let r = d(&[0.25, 0.75]);
        let s = d(&[0.5, 0.5]);
        let sp = neutralize(&r, &s).unwrap();
        assert!(close(sp.probs(), &[0.75, 0.25], 1e-15));
        assert!(close(hadamard(&r, &sp).unwrap().probs(), s.probs(), 1e-15));
        let delta = d(&[0.0, 1.0]);
        assert_eq!(neutralize(&r, &delta).unwrap().probs(), delta.probs());
        assert!(matches!(neutralize(&delta, &s), Err(Error::Positivity(_))));
    }

    #[test]
    fn condition_split_examples() {
        let p = d(&[0.1, 0.2, 0.3, 0.4]);
        let c = condition_split(&p, &[0], &[1]).unwrap();
        assert!(close(c.probs(), &[3.0 / 7.0, 4.0 / 7.0], 1e-15));
        let u = Distribution::uniform(p.space());
        assert!(close(
            condition_split(&u, &[0], &[0]).unwrap().probs(),
            &[0.5, 0.5],
            0.0
        ));
        let full = condition_split(&p, &[1, 0], &[1, 1]).unwrap();
        assert_eq!(full.space().n(), 0);
        assert_eq!(full.probs(), &[1.0]);
        let z = d(&[0.5, 0.5, 0.0, 0.0]);
        assert!(matches!(condition_split(&z, &[0], &[1]), Err(Error::Conditioning)));
    }

    #[test]
    fn marginal_sums_out_coordinates() {
        let p = d(&[0.1, 0.2, 0.3, 0.4]);
        assert!(close(p.marginal(&[1]).unwrap().probs(), &[0.4, 0.6], 1e-15));
        assert!(close(
            p.marginal(&[1, 0]).unwrap().probs(),
            &[0.1, 0.3, 0.2, 0.4],
            1e-15
        ));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let p = d(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(Distribution::from_json(&p.to_json()).unwrap(), p);
        let err = Distribution::from_json(r#"{"n": 2, "q": 2}"#).unwrap_err();
        assert!(err.to_string().contains("probs"), "{err}");
        let err = Distribution::from_json(r#"{"n": 1, "q": 2, "probs": [0.5, "x"]}"#).unwrap_err();
        assert!(err.to_string().contains("probs[1]"), "{err}");
    }

    #[test]
    fn new_rejects_unnormalized_input() {
        let s = StateSpace::new(1, 2).unwrap();
        assert!(Distribution::new(s, vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(s, vec![-0.5, 1.5]).is_err());
        assert!(Distribution::new(s, vec![1.0]).is_err());
    }
}
