//! Brute-force reference used by the integration tests. It reads raw
//! parameter storage and enumerates joint states itself, sharing no code
//! with the library's inference or oracle.

#![allow(dead_code)]

use narrow_dbm::{BiasArray, DbmParams, WeightArray};
use rand::Rng;

pub fn random_model<R: Rng>(rng: &mut R, q: usize, widths: &[usize], scale: f64) -> DbmParams {
    let compact = q == 2;
    let weights = widths
        .windows(2)
        .map(|w| {
            let len = if compact { w[0] * w[1] } else { w[0] * q * w[1] * q };
            let data = (0..len).map(|_| rng.gen_range(-scale..scale)).collect();
            WeightArray::from_data(w[0], w[1], q, data).unwrap()
        })
        .collect();
    let biases = widths
        .iter()
        .map(|&n| {
            let len = if compact { n } else { n * q };
            BiasArray::from_data(n, q, (0..len).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
        })
        .collect();
    DbmParams::new(q, widths.to_vec(), weights, biases).unwrap()
}

/// Random widths for a model of depth `1..=max_depth`.
pub fn random_widths<R: Rng>(rng: &mut R, max_width: usize, max_depth: usize) -> Vec<usize> {
    let depth = rng.gen_range(1..=max_depth);
    (0..=depth).map(|_| rng.gen_range(1..=max_width)).collect()
}

fn unit_term(q: usize, b: &[f64], i: usize, a: usize) -> f64 {
    if q == 2 {
        if a == 1 {
            b[i]
        } else {
            0.0
        }
    } else {
        b[i * q + a]
    }
}

fn pair_term(q: usize, w: &[f64], cols: usize, i: usize, a: usize, m: usize, c: usize) -> f64 {
    if q == 2 {
        if a == 1 && c == 1 {
            w[i * cols + m]
        } else {
            0.0
        }
    } else {
        w[((i * q + a) * cols + m) * q + c]
    }
}

/// Every joint state as per-layer unit values, with its negative energy.
/// Layers are enumerated with layer 0 leftmost and each layer's unit 0 most
/// significant.
pub fn enumerate(params: &DbmParams) -> Vec<(Vec<Vec<usize>>, f64)> {
    let q = params.q();
    let widths = params.widths();
    let total: usize = widths.iter().sum();
    let count = q.pow(total as u32);
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let mut flat = vec![0; total];
        let mut r = idx;
        for slot in flat.iter_mut().rev() {
            *slot = r % q;
            r /= q;
        }
        let mut layers = Vec::new();
        let mut off = 0;
        for &w in widths {
            layers.push(flat[off..off + w].to_vec());
            off += w;
        }
        let mut e = 0.0;
        for (l, x) in layers.iter().enumerate() {
            let b = params.biases()[l].data();
            for (i, &a) in x.iter().enumerate() {
                e += unit_term(q, b, i, a);
            }
        }
        for (l, wa) in params.weights().iter().enumerate() {
            for (i, &a) in layers[l].iter().enumerate() {
                for (m, &c) in layers[l + 1].iter().enumerate() {
                    e += pair_term(q, wa.data(), wa.cols(), i, a, m, c);
                }
            }
        }
        out.push((layers, e));
    }
    out
}

fn index_of(x: &[usize], q: usize) -> usize {
    x.iter().fold(0, |acc, &v| acc * q + v)
}

/// `(log Z, marginal of each layer)` by enumeration.
pub fn brute(params: &DbmParams) -> (f64, Vec<Vec<f64>>) {
    let q = params.q();
    let states = enumerate(params);
    let max = states.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = states.iter().map(|s| (s.1 - max).exp()).sum();
    let mut marginals: Vec<Vec<f64>> = params.widths().iter().map(|&w| vec![0.0; q.pow(w as u32)]).collect();
    for (layers, e) in &states {
        let p = (e - max).exp() / z;
        for (k, x) in layers.iter().enumerate() {
            marginals[k][index_of(x, q)] += p;
        }
    }
    (max + z.ln(), marginals)
}

/// Conditional of `p` over the coordinates not in `coords`, given those
/// coordinates take `values`.
pub fn brute_conditional(p: &[f64], n: usize, q: usize, coords: &[usize], values: &[usize]) -> Vec<f64> {
    let rest: Vec<usize> = (0..n).filter(|i| !coords.contains(i)).collect();
    let mut out = vec![0.0; q.pow(rest.len() as u32)];
    for (idx, &pv) in p.iter().enumerate() {
        let mut x = vec![0; n];
        let mut r = idx;
        for slot in x.iter_mut().rev() {
            *slot = r % q;
            r /= q;
        }
        if coords.iter().zip(values).all(|(&c, &v)| x[c] == v) {
            let y: Vec<usize> = rest.iter().map(|&i| x[i]).collect();
            out[index_of(&y, q)] += pv;
        }
    }
    let s: f64 = out.iter().sum();
    out.iter().map(|v| v / s).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn kl(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}
