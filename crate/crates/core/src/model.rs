//! Parameters of layered Boltzmann machines, their energy, the brute-force
//! joint oracle and the `.dbm.json` document format.
//!
//! A DBM with layers `x_0 … x_L` (widths `n_0 … n_L`) assigns
//! `p(x) ∝ exp(Σ_l x_lᵀ W_l x_{l+1} + Σ_l x_lᵀ B_l)`.
//!
//! Units with `q > 2` states are one-hot encoded: `W_l` is an
//! `n_l × q × n_{l+1} × q` tensor and `B_l` an `n_l × q` array, and the
//! pair `(x_{l,i}, x_{l+1,m})` contributes `W_l[i, x_{l,i}, m, x_{l+1,m}]`.
//! Binary models are stored compactly (`W_l` is `n_l × n_{l+1}`, `B_l` has
//! length `n_l`). The compact form embeds into the one-hot form by placing
//! `w` at `[i, 1, m, 1]`, `b` at `[i, 1]` and zeros elsewhere; every
//! evaluation routine goes through that embedding so both forms agree
//! bit for bit.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::logspace;
use crate::space::StateSpace;

/// Default cap on `q^N` for [`joint_distribution_oracle`].
pub const ORACLE_LIMIT: u128 = 1 << 20;

/// Interaction array between a lower layer (`rows` units) and an upper
/// layer (`cols` units).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightArray {
    rows: usize,
    cols: usize,
    q: usize,
    data: Vec<f64>,
}

impl WeightArray {
    pub fn zeros(rows: usize, cols: usize, q: usize) -> Self {
        let len = if q == 2 { rows * cols } else { rows * q * cols * q };
        WeightArray {
            rows,
            cols,
            q,
            data: vec![0.0; len],
        }
    }

    /// Wraps raw storage: row-major `rows × cols` for `q = 2`, row-major
    /// `rows × q × cols × q` otherwise.
    pub fn from_data(rows: usize, cols: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        let w = Self::zeros(rows, cols, q);
        if data.len() != w.data.len() {
            return Err(Error::dim(format!(
                "weight array needs {} entries, got {}",
                w.data.len(),
                data.len()
            )));
        }
        check_finite(&data, "weights")?;
        Ok(WeightArray { data, ..w })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Coupling between symbol `a` of lower unit `i` and symbol `b` of upper unit `m`.
    pub fn get(&self, i: usize, a: usize, m: usize, b: usize) -> f64 {
        if self.q == 2 {
            if a == 1 && b == 1 {
                self.data[i * self.cols + m]
            } else {
                0.0
            }
        } else {
            self.data[((i * self.q + a) * self.cols + m) * self.q + b]
        }
    }

    /// Dense one-hot tensor `rows × q × cols × q`.
    pub fn one_hot(&self) -> Vec<f64> {
        if self.q != 2 {
            return self.data.clone();
        }
        let q = 2;
        let mut out = vec![0.0; self.rows * q * self.cols * q];
        for i in 0..self.rows {
            for m in 0..self.cols {
                out[((i * q + 1) * self.cols + m) * q + 1] = self.data[i * self.cols + m];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }
}

/// Bias array of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasArray {
    n: usize,
    q: usize,
    data: Vec<f64>,
}

impl BiasArray {
    pub fn zeros(n: usize, q: usize) -> Self {
        let len = if q == 2 { n } else { n * q };
        BiasArray {
            n,
            q,
            data: vec![0.0; len],
        }
    }

    /// Raw storage: length `n` for `q = 2`, row-major `n × q` otherwise.
    pub fn from_data(n: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        let b = Self::zeros(n, q);
        if data.len() != b.data.len() {
            return Err(Error::dim(format!(
                "bias array needs {} entries, got {}",
                b.data.len(),
                data.len()
            )));
        }
        check_finite(&data, "biases")?;
        Ok(BiasArray { data, ..b })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, a: usize) -> f64 {
        if self.q == 2 {
            if a == 1 {
                self.data[i]
            } else {
                0.0
            }
        } else {
            self.data[i * self.q + a]
        }
    }

    /// Dense one-hot array `n × q`.
    pub fn one_hot(&self) -> Vec<f64> {
        (0..self.n)
            .flat_map(|i| (0..self.q).map(move |a| (i, a)))
            .map(|(i, a)| self.get(i, a))
            .collect()
    }

    /// Entry-wise `self - other`.
    pub fn sub(&self, other: &BiasArray) -> Result<BiasArray> {
        self.zip(other, |a, b| a - b)
    }

    /// Entry-wise `self + other`.
    pub fn add(&self, other: &BiasArray) -> Result<BiasArray> {
        self.zip(other, |a, b| a + b)
    }

    /// Every entry multiplied by `s`.
    pub fn scale(&self, s: f64) -> BiasArray {
        BiasArray {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    fn zip(&self, other: &BiasArray, f: impl Fn(f64, f64) -> f64) -> Result<BiasArray> {
        if self.n != other.n || self.q != other.q {
            return Err(Error::dim(format!(
                "bias arrays of shape ({}, q={}) and ({}, q={})",
                self.n, self.q, other.n, other.q
            )));
        }
        Ok(BiasArray {
            n: self.n,
            q: self.q,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

fn check_finite(data: &[f64], what: &str) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::domain(format!("{what} entry {i} is not finite"))),
        None => Ok(()),
    }
}

/// Interaction matrices `W_0 … W_{L-1}` and biases `B_0 … B_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct DbmParams {
    q: usize,
    widths: Vec<usize>,
    weights: Vec<WeightArray>,
    biases: Vec<BiasArray>,
}

/// A DBM with a single hidden layer.
pub type RbmParams = DbmParams;

impl DbmParams {
    pub fn new(q: usize, widths: Vec<usize>, weights: Vec<WeightArray>, biases: Vec<BiasArray>) -> Result<Self> {
        if q < 2 {
            return Err(Error::domain(format!("q = {q} must be at least 2")));
        }
        if widths.len() < 2 {
            return Err(Error::dim("a DBM needs at least two layers"));
        }
        if let Some(l) = widths.iter().position(|&w| w == 0) {
            return Err(Error::dim(format!("layer {l} has width 0")));
        }
        for &w in &widths {
            StateSpace::new(w, q)?;
        }
        let depth = widths.len() - 1;
        if weights.len() != depth || biases.len() != depth + 1 {
            return Err(Error::dim(format!(
                "{} layers need {} weight arrays and {} bias arrays, got {} and {}",
                widths.len(),
                depth,
                depth + 1,
                weights.len(),
                biases.len()
            )));
        }
        for (l, w) in weights.iter().enumerate() {
            if w.rows != widths[l] || w.cols != widths[l + 1] || w.q != q {
                return Err(Error::dim(format!(
                    "weights[{l}] has shape {}x{} (q={}), expected {}x{} (q={q})",
                    w.rows,
                    w.cols,
                    w.q,
                    widths[l],
                    widths[l + 1]
                )));
            }
        }
        for (l, b) in biases.iter().enumerate() {
            if b.n != widths[l] || b.q != q {
                return Err(Error::dim(format!(
                    "biases[{l}] has {} units (q={}), expected {} (q={q})",
                    b.n, b.q, widths[l]
                )));
            }
        }
        Ok(DbmParams {
            q,
            widths,
            weights,
            biases,
        })
    }

    /// All-zero parameters; the joint is uniform.
    pub fn zeros(q: usize, widths: Vec<usize>) -> Result<Self> {
        let weights = widths.windows(2).map(|w| WeightArray::zeros(w[0], w[1], q)).collect();
        let biases = widths.iter().map(|&n| BiasArray::zeros(n, q)).collect();
        DbmParams::new(q, widths, weights, biases)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self) -> &[WeightArray] {
        &self.weights
    }

    pub fn biases(&self) -> &[BiasArray] {
        &self.biases
    }

    pub fn total_units(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn layer_space(&self, k: usize) -> Result<StateSpace> {
        match self.widths.get(k) {
            Some(&n) => StateSpace::new(n, self.q),
            None => Err(Error::Index(format!("layer {k} > L = {}", self.depth()))),
        }
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |a, w| a.max(w.max_abs()))
    }

    /// Replace the bias of layer `k`.
    pub fn with_bias(mut self, k: usize, bias: BiasArray) -> Result<Self> {
        if k > self.depth() {
            return Err(Error::Index(format!("layer {k} > L = {}", self.depth())));
        }
        if bias.n != self.widths[k] || bias.q != self.q {
            return Err(Error::dim(format!("bias for layer {k} has the wrong shape")));
        }
        self.biases[k] = bias;
        Ok(self)
    }

    /// Layers `from ..= to` as a DBM of their own, with the original biases.
    pub fn sub_stack(&self, from: usize, to: usize) -> Result<Self> {
        if from >= to || to > self.depth() {
            return Err(Error::Index(format!(
                "layer range {from}..={to} invalid for L = {}",
                self.depth()
            )));
        }
        DbmParams::new(
            self.q,
            self.widths[from..=to].to_vec(),
            self.weights[from..to].to_vec(),
            self.biases[from..=to].to_vec(),
        )
    }

    pub fn to_file(&self) -> ModelFile {
        let weights = self
            .weights
            .iter()
            .map(|w| {
                if self.q == 2 {
                    nest(&w.data, &[w.rows, w.cols])
                } else {
                    nest(&w.data, &[w.rows, self.q, w.cols, self.q])
                }
            })
            .collect();
        let biases = self
            .biases
            .iter()
            .map(|b| {
                if self.q == 2 {
                    nest(&b.data, &[b.n])
                } else {
                    nest(&b.data, &[b.n, self.q])
                }
            })
            .collect();
        ModelFile {
            q: self.q,
            widths: self.widths.clone(),
            weights,
            biases,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ModelFile = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::parse(e.path().to_string(), e.inner().to_string()))?;
        file.into_params()
    }
}

/// On-disk form of [`DbmParams`] (`.dbm.json`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default = "default_q")]
    pub q: usize,
    pub widths: Vec<usize>,
    pub weights: Vec<Value>,
    pub biases: Vec<Value>,
}

fn default_q() -> usize {
    2
}

impl ModelFile {
    pub fn into_params(self) -> Result<DbmParams> {
        let q = self.q;
        if q < 2 {
            return Err(Error::parse("q", format!("q = {q} must be at least 2")));
        }
        if self.widths.len() < 2 {
            return Err(Error::parse("widths", "at least two layers are required"));
        }
        if let Some(l) = self.widths.iter().position(|&w| w == 0) {
            return Err(Error::parse(format!("widths[{l}]"), "width must be positive"));
        }
        let depth = self.widths.len() - 1;
        if self.weights.len() != depth {
            return Err(Error::parse(
                "weights",
                format!("expected {depth} arrays, found {}", self.weights.len()),
            ));
        }
        if self.biases.len() != depth + 1 {
            return Err(Error::parse(
                "biases",
                format!("expected {} arrays, found {}", depth + 1, self.biases.len()),
            ));
        }
        let mut weights = Vec::with_capacity(depth);
        for (l, v) in self.weights.iter().enumerate() {
            let (r, c) = (self.widths[l], self.widths[l + 1]);
            let shape: Vec<usize> = if q == 2 { vec![r, c] } else { vec![r, q, c, q] };
            let mut data = Vec::new();
            flatten(v, &shape, &format!("weights[{l}]"), &mut data)?;
            weights.push(WeightArray {
                rows: r,
                cols: c,
                q,
                data,
            });
        }
        let mut biases = Vec::with_capacity(depth + 1);
        for (l, v) in self.biases.iter().enumerate() {
            let n = self.widths[l];
            let shape: Vec<usize> = if q == 2 { vec![n] } else { vec![n, q] };
            let mut data = Vec::new();
            flatten(v, &shape, &format!("biases[{l}]"), &mut data)?;
            biases.push(BiasArray { n, q, data });
        }
        DbmParams::new(q, self.widths, weights, biases).map_err(|e| Error::parse(".", e.to_string()))
    }
}

fn nest(data: &[f64], shape: &[usize]) -> Value {
    if shape.len() == 1 {
        return Value::Array(data.iter().map(|&v| Value::from(v)).collect());
    }
    let stride = data.len() / shape[0].max(1);
    Value::Array(
        (0..shape[0])
            .map(|i| nest(&data[i * stride..(i + 1) * stride], &shape[1..]))
            .collect(),
    )
}

fn flatten(v: &Value, shape: &[usize], path: &str, out: &mut Vec<f64>) -> Result<()> {
    match shape.split_first() {
        None => match v.as_f64() {
            Some(x) if x.is_finite() => {
                out.push(x);
                Ok(())
            }
            _ => Err(Error::parse(path, format!("expected a finite number, found {v}"))),
        },
        Some((&len, rest)) => {
            let arr = v
                .as_array()
                .ok_or_else(|| Error::parse(path, format!("expected an array of length {len}")))?;
            if arr.len() != len {
                return Err(Error::parse(
                    path,
                    format!("expected length {len}, found {}", arr.len()),
                ));
            }
            for (i, item) in arr.iter().enumerate() {
                flatten(item, rest, &format!("{path}[{i}]"), out)?;
            }
            Ok(())
        }
    }
}

/// Interaction of a feedforward model `q(x_out | x_in) ∝ exp(x_outᵀ W x_in + x_outᵀ B)`.
/// `weights` has `n_out` rows and `n_in` columns, matching the orientation of
/// `W_0` in a DBM whose bottom layer is the output.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedforwardLayer {
    weights: WeightArray,
    bias: BiasArray,
}

impl FeedforwardLayer {
    pub fn new(weights: WeightArray, bias: BiasArray) -> Result<Self> {
        if bias.n != weights.rows || bias.q != weights.q {
            return Err(Error::dim(format!(
                "bias with {} units (q={}) for a layer with {} outputs (q={})",
                bias.n, bias.q, weights.rows, weights.q
            )));
        }
        Ok(FeedforwardLayer { weights, bias })
    }

    /// The bottom interaction of a DBM, with output bias `B_0`.
    pub fn from_dbm_bottom(params: &DbmParams) -> Self {
        FeedforwardLayer {
            weights: params.weights[0].clone(),
            bias: params.biases[0].clone(),
        }
    }

    pub fn q(&self) -> usize {
        self.weights.q
    }

    pub fn n_out(&self) -> usize {
        self.weights.rows
    }

    pub fn n_in(&self) -> usize {
        self.weights.cols
    }

    pub fn weights(&self) -> &WeightArray {
        &self.weights
    }

    pub fn bias(&self) -> &BiasArray {
        &self.bias
    }
}

/// Exponent of the joint for one configuration of every layer.
pub fn negative_energy(params: &DbmParams, joint_state: &[Vec<usize>]) -> Result<f64> {
    if joint_state.len() != params.widths.len() {
        return Err(Error::dim(format!(
            "{} layer states for {} layers",
            joint_state.len(),
            params.widths.len()
        )));
    }
    for (l, x) in joint_state.iter().enumerate() {
        params.layer_space(l)?.encode(x)?;
    }
    Ok(energy_unchecked(params, joint_state))
}

fn energy_unchecked(params: &DbmParams, xs: &[Vec<usize>]) -> f64 {
    let mut e = 0.0;
    for (l, w) in params.weights.iter().enumerate() {
        let (lo, hi) = (&xs[l], &xs[l + 1]);
        for (i, &a) in lo.iter().enumerate() {
            for (m, &b) in hi.iter().enumerate() {
                e += w.get(i, a, m, b);
            }
        }
    }
    for (l, b) in params.biases.iter().enumerate() {
        for (i, &a) in xs[l].iter().enumerate() {
            e += b.get(i, a);
        }
    }
    e
}

/// Full enumeration of the joint over all `N = Σ n_l` units, ordered with
/// layer 0 leftmost (most significant) and layer `L` rightmost.
pub fn joint_distribution_oracle(params: &DbmParams) -> Result<Distribution> {
    joint_distribution_oracle_with_limit(params, ORACLE_LIMIT)
}

pub fn joint_distribution_oracle_with_limit(params: &DbmParams, limit: u128) -> Result<Distribution> {
    let logs = joint_log_weights(params, limit)?;
    let space = StateSpace::new(params.total_units(), params.q)?;
    Distribution::from_log_weights(space, &logs)
}

/// `ln Z` by brute-force enumeration.
pub fn oracle_log_partition(params: &DbmParams, limit: u128) -> Result<f64> {
    Ok(logspace::log_sum_exp(&joint_log_weights(params, limit)?))
}

fn joint_log_weights(params: &DbmParams, limit: u128) -> Result<Vec<f64>> {
    let total = params.total_units() as u32;
    let states = (params.q as u128).checked_pow(total).unwrap_or(u128::MAX);
    if states > limit {
        return Err(Error::OracleLimit { states, limit });
    }
    let space = StateSpace::new(params.total_units(), params.q)?;
    let mut flat = vec![0; space.n()];
    let mut xs: Vec<Vec<usize>> = params.widths.iter().map(|&w| vec![0; w]).collect();
    let mut logs = Vec::with_capacity(space.cardinality());
    for idx in 0..space.cardinality() {
        space.decode_into(idx, &mut flat);
        let mut off = 0;
        for x in xs.iter_mut() {
            let len = x.len();
            x.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        logs.push(energy_unchecked(params, &xs));
    }
    Ok(logs)
}

/// One-hot interaction with arbitrary `q`, used while building models.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct OneHotPair {
    pub rows: usize,
    pub cols: usize,
    pub q: usize,
    /// `rows × q × cols × q`.
    pub w: Vec<f64>,
}

impl OneHotPair {
    pub fn zeros(rows: usize, cols: usize, q: usize) -> Self {
        OneHotPair {
            rows,
            cols,
            q,
            w: vec![0.0; rows * q * cols * q],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, a: usize, m: usize, b: usize) -> usize {
        ((i * self.q + a) * self.cols + m) * self.q + b
    }

    /// Convert to the stored representation. For `q = 2` this re-gauges each
    /// term `W(a, b) = W00 + (W10-W00) a + (W01-W00) b + (W11-W10-W01+W00) ab`
    /// and returns the bias corrections for the lower and upper layer (the
    /// constant is dropped). For `q > 2` the corrections are zero.
    pub fn to_stored(&self) -> (WeightArray, Vec<f64>, Vec<f64>) {
        if self.q != 2 {
            let w = WeightArray {
                rows: self.rows,
                cols: self.cols,
                q: self.q,
                data: self.w.clone(),
            };
            return (w, vec![0.0; self.rows * self.q], vec![0.0; self.cols * self.q]);
        }
        let mut data = vec![0.0; self.rows * self.cols];
        let mut lower = vec![0.0; self.rows];
        let mut upper = vec![0.0; self.cols];
        for i in 0..self.rows {
            for m in 0..self.cols {
                let w00 = self.w[self.at(i, 0, m, 0)];
                let w01 = self.w[self.at(i, 0, m, 1)];
                let w10 = self.w[self.at(i, 1, m, 0)];
                let w11 = self.w[self.at(i, 1, m, 1)];
                data[i * self.cols + m] = w11 - w10 - w01 + w00;
                lower[i] += w10 - w00;
                upper[m] += w01 - w00;
            }
        }
        let w = WeightArray {
            rows: self.rows,
            cols: self.cols,
            q: 2,
            data,
        };
        (w, lower, upper)
    }
}

/// Stored bias from a one-hot `n × q` array plus a correction in stored layout.
pub(crate) fn bias_from_one_hot(n: usize, q: usize, one_hot: &[f64], correction: &[f64]) -> BiasArray {
    let data = if q == 2 {
        (0..n)
            .map(|i| one_hot[2 * i + 1] - one_hot[2 * i] + correction[i])
            .collect()
    } else {
        one_hot.iter().zip(correction).map(|(a, b)| a + b).collect()
    };
    BiasArray { n, q, data }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge(w: f64, b0: f64, b1: f64) -> DbmParams {
        DbmParams::new(
            2,
            vec![1, 1],
            vec![WeightArray::from_data(1, 1, 2, vec![w]).unwrap()],
            vec![
                BiasArray::from_data(1, 2, vec![b0]).unwrap(),
                BiasArray::from_data(1, 2, vec![b1]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn energy_examples() {
        let z = DbmParams::zeros(3, vec![2, 1, 2]).unwrap();
        assert_eq!(negative_energy(&z, &[vec![2, 1], vec![0], vec![1, 2]]).unwrap(), 0.0);
        let p = single_edge(1.7, 0.0, 0.0);
        assert_eq!(negative_energy(&p, &[vec![1], vec![1]]).unwrap(), 1.7);
        let p = single_edge(1.7, 0.3, -0.9);
        assert_eq!(negative_energy(&p, &[vec![1], vec![0]]).unwrap(), 0.3);
    }

    #[test]
    fn energy_shape_errors() {
        let p = single_edge(1.0, 0.0, 0.0);
        assert!(matches!(negative_energy(&p, &[vec![1]]), Err(Error::Dimension(_))));
        assert!(matches!(
            negative_energy(&p, &[vec![1, 0], vec![1]]),
            Err(Error::Dimension(_))
        ));
        assert!(negative_energy(&p, &[vec![2], vec![1]]).is_err());
    }

    #[test]
    fn oracle_single_edge() {
        let w: f64 = 0.8;
        let j = joint_distribution_oracle(&single_edge(w, 0.0, 0.0)).unwrap();
        let z = 3.0 + w.exp();
        let expect = [1.0 / z, 1.0 / z, 1.0 / z, w.exp() / z];
        for (a, b) in j.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn oracle_zero_params_uniform() {
        let j = joint_distribution_oracle(&DbmParams::zeros(3, vec![1, 2]).unwrap()).unwrap();
        assert!(j.probs().iter().all(|&p| (p - 1.0 / 27.0).abs() < 1e-16));
    }

    #[test]
    fn oracle_limit_enforced() {
        let p = DbmParams::zeros(2, vec![8, 8, 8]).unwrap();
        assert!(matches!(
            joint_distribution_oracle_with_limit(&p, 1 << 20),
            Err(Error::OracleLimit { .. })
        ));
    }

    #[test]
    fn compact_embedding_matches_one_hot() {
        let w = WeightArray::from_data(2, 1, 2, vec![1.5, -2.0]).unwrap();
        let oh = w.one_hot();
        assert_eq!(oh.len(), 8);
        assert_eq!(oh[3], 1.5);
        assert_eq!(oh[7], -2.0);
        assert_eq!(oh.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn regauge_preserves_energy_differences() {
        let mut oh = OneHotPair::zeros(1, 1, 2);
        oh.w = vec![0.3, -1.2, 2.5, 0.7];
        let (w, lo, hi) = oh.to_stored();
        let e = |a: usize, b: usize| w.get(0, a, 0, b) + lo[0] * a as f64 + hi[0] * b as f64;
        let base = oh.w[0];
        for a in 0..2 {
            for b in 0..2 {
                assert!((e(a, b) - (oh.w[oh.at(0, a, 0, b)] - base)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn json_round_trip_binary_and_categorical() {
        let p = single_edge(0.1 + 0.2, -1.0 / 3.0, 1e-300);
        assert_eq!(DbmParams::from_json(&p.to_json()).unwrap(), p);
        let data: Vec<f64> = (0..2 * 3 * 3).map(|i| (i as f64).sin()).collect();
        let c = DbmParams::new(
            3,
            vec![2, 1],
            vec![WeightArray::from_data(2, 1, 3, data).unwrap()],
            vec![
                BiasArray::zeros(2, 3),
                BiasArray::from_data(1, 3, vec![0.5, -0.25, 1.0]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(DbmParams::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn json_missing_weights_is_named() {
        let err = DbmParams::from_json(r#"{"widths": [1, 1], "biases": [[0.0], [0.0]]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("weights"), "{err}");
    }

    #[test]
    fn json_q_defaults_to_two() {
        let p = DbmParams::from_json(r#"{"widths": [1, 1], "weights": [[[2.0]]], "biases": [[0.0], [1.0]]}"#).unwrap();
        assert_eq!(p.q(), 2);
        assert_eq!(p.weights()[0].get(0, 1, 0, 1), 2.0);
    }

    #[test]
    fn json_shape_errors_carry_paths() {
        let err = DbmParams::from_json(
            r#"{"widths": [2, 1], "weights": [[[2.0], [1.0, 3.0]]], "biases": [[0.0, 0.0], [1.0]]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("weights[0][1]"), "{err}");
        let err = DbmParams::from_json(r#"{"widths": [1, 1], "weights": [[[2.0]]], "biases": [[0.0]]}"#).unwrap_err();
        assert!(err.to_string().contains("biases"), "{err}");
    }
}
