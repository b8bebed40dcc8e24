//! Support planning: the initial support `S¹` covered by the top RBM, and a
//! sequence of sharing steps that grows it to the full cube.
//!
//! A *line* is the set of `q` states that agree everywhere except on one
//! axis; for binary units it is a pair of adjacent states. A sharing step is
//! a list of entries, one per output unit `i`. Each entry owns one line and
//! moves mass from the line's points in the current support to new points
//! obtained by overwriting coordinate `i`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::logspace;
use crate::space::{StateSpace, SupportSet};

/// States that agree with `base` off `axis`; `base[axis]` is 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub base: Vec<usize>,
    pub axis: usize,
}

impl Line {
    pub fn point(&self, symbol: usize) -> Vec<usize> {
        let mut p = self.base.clone();
        p[self.axis] = symbol;
        p
    }

    /// Indices of the line's points, ordered by the symbol on the axis.
    pub fn indices(&self, space: StateSpace) -> Vec<usize> {
        (0..space.q()).map(|w| space.encode_unchecked(&self.point(w))).collect()
    }

    /// Whether `x` lies on the line.
    pub fn contains(&self, x: &[usize]) -> bool {
        x.iter()
            .zip(&self.base)
            .enumerate()
            .all(|(m, (a, b))| m == self.axis || a == b)
    }
}

/// Mass moving from `source` to `target`, which equals `source` with
/// coordinate `unit` set to `symbol`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareMove {
    pub source: usize,
    pub target: usize,
    pub symbol: usize,
}

/// One output unit's share of a step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareEntry {
    /// Output unit whose coordinate is overwritten (the flip direction).
    pub unit: usize,
    pub line: Line,
    pub moves: Vec<ShareMove>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingStep {
    pub entries: Vec<ShareEntry>,
}

impl SharingStep {
    /// The step's new points `P`.
    pub fn new_points(&self) -> Vec<usize> {
        self.entries
            .iter()
            .flat_map(|e| e.moves.iter().map(|m| m.target))
            .collect()
    }

    /// Checks the construction rules against the support `s` the step starts from:
    /// distinct units, disjoint lines, sources on their line and in `s`, targets
    /// outside `s` and distinct, and a single move when the unit is the line axis.
    pub fn validate(&self, s: &SupportSet) -> Result<()> {
        let space = s.space();
        let mut units = BTreeSet::new();
        let mut line_points = BTreeSet::new();
        let mut targets = BTreeSet::new();
        for e in &self.entries {
            if e.unit >= space.n() || e.line.axis >= space.n() || e.line.base.len() != space.n() {
                return Err(Error::Plan(format!("entry for unit {} is out of range", e.unit)));
            }
            space.encode(&e.line.base)?;
            if e.line.base[e.line.axis] != 0 {
                return Err(Error::Plan("line base must have symbol 0 on its axis".into()));
            }
            if !units.insert(e.unit) {
                return Err(Error::Plan(format!("direction {} is used twice", e.unit)));
            }
            for p in e.line.indices(space) {
                if !line_points.insert(p) {
                    return Err(Error::Plan(format!("lines overlap at state {p}")));
                }
            }
            if e.unit == e.line.axis && e.moves.len() > 1 {
                return Err(Error::Plan("a line flipped along its own axis allows one move".into()));
            }
            let mut sources = BTreeSet::new();
            for m in &e.moves {
                let x = space.decode(m.source);
                if !e.line.contains(&x) || !s.contains(m.source) || !sources.insert(m.source) {
                    return Err(Error::Plan(format!("invalid source {} for unit {}", m.source, e.unit)));
                }
                if m.symbol >= space.q() || m.symbol == x[e.unit] {
                    return Err(Error::Plan(format!(
                        "symbol {} does not move source {}",
                        m.symbol, m.source
                    )));
                }
                if space.encode_unchecked(&space.flip(&x, e.unit, m.symbol)?) != m.target {
                    return Err(Error::Plan(format!(
                        "target {} is not the flip of {}",
                        m.target, m.source
                    )));
                }
                if s.contains(m.target) || !targets.insert(m.target) {
                    return Err(Error::Plan(format!("target {} is already covered", m.target)));
                }
            }
        }
        Ok(())
    }
}

/// `S¹` with the lines that cover it, and the steps that grow it to the cube.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharingPlan {
    pub n: usize,
    pub q: usize,
    pub initial: Vec<usize>,
    pub initial_lines: Vec<Line>,
    pub steps: Vec<SharingStep>,
}

impl SharingPlan {
    pub fn space(&self) -> StateSpace {
        StateSpace::new(self.n, self.q).expect("plan spaces are valid")
    }

    /// Hidden layers needed: one per step plus the top RBM.
    pub fn depth(&self) -> usize {
        1 + self.steps.len()
    }

    /// `S¹, S², …`; the last one is the full cube.
    pub fn supports(&self) -> Vec<SupportSet> {
        let space = self.space();
        let mut cur = SupportSet::new(space, self.initial.iter().copied()).expect("plan supports are valid");
        let mut out = vec![cur.clone()];
        for step in &self.steps {
            for p in step.new_points() {
                cur.insert(p);
            }
            out.push(cur.clone());
        }
        out
    }

    /// Checks every step against its support, that the lines of `S¹` are
    /// disjoint and cover it, that the RBM has room for them, and that the
    /// final support is the full cube.
    pub fn validate(&self) -> Result<()> {
        let space = StateSpace::new(self.n, self.q)?;
        let s1 = SupportSet::new(space, self.initial.iter().copied())?;
        let mut covered = BTreeSet::new();
        for line in &self.initial_lines {
            for p in line.indices(space) {
                if !s1.contains(p) || !covered.insert(p) {
                    return Err(Error::Plan(format!("initial line through {p} leaves S¹ or overlaps")));
                }
            }
        }
        if covered.len() != s1.len() {
            return Err(Error::Plan("initial lines do not cover S¹".into()));
        }
        if self.initial_lines.len() > rbm_line_capacity(self.n, self.q) {
            return Err(Error::Plan(format!(
                "{} initial lines exceed the RBM capacity {}",
                self.initial_lines.len(),
                rbm_line_capacity(self.n, self.q)
            )));
        }
        let supports = self.supports();
        for (step, s) in self.steps.iter().zip(&supports) {
            step.validate(s)?;
            if step.entries.is_empty() {
                return Err(Error::Plan("empty step".into()));
            }
        }
        if !supports.last().expect("at least S¹").is_full() {
            return Err(Error::Plan("the plan does not reach the full cube".into()));
        }
        Ok(())
    }
}

/// Lines an RBM with `n` hidden q-ary units can carry: one through the
/// visible biases and one per non-zero hidden state of each unit.
pub fn rbm_line_capacity(n: usize, q: usize) -> usize {
    1 + n * (q - 1)
}

/// Number of leading free coordinates of `S¹`.
fn initial_free_coords(n: usize, q: usize) -> usize {
    let (k, _) = crate::bounds::n_prime(n, q);
    let mut m = (k as usize + 1).min(n);
    while m > 1 && q.pow(m as u32 - 1) > rbm_line_capacity(n, q) {
        m -= 1;
    }
    m
}

/// Plan for `n` units with `q` states. `S¹` is the subcube whose first
/// `m` coordinates are free and whose remaining coordinates are zero, covered
/// by lines along axis 0. Steps are chosen greedily: repeatedly take the
/// entry that adds the most new points, breaking ties by unit, then axis,
/// then line base in enumeration order.
pub fn plan_supports(n: usize, q: usize) -> Result<SharingPlan> {
    if n == 0 {
        return Err(Error::domain("a plan needs at least one unit"));
    }
    let space = StateSpace::new(n, q)?;
    let m = initial_free_coords(n, q);
    let mut support = SupportSet::new(
        space,
        (0..space.cardinality()).filter(|&i| space.decode(i)[m..].iter().all(|&v| v == 0)),
    )?;
    let initial: Vec<usize> = support.iter().collect();
    let sub = StateSpace::new(m - 1, q)?;
    let initial_lines = (0..sub.cardinality())
        .map(|t| {
            let mut base = vec![0; n];
            base[1..m].copy_from_slice(&sub.decode(t));
            Line { base, axis: 0 }
        })
        .collect();

    let mut steps = Vec::new();
    while !support.is_full() {
        let step = greedy_step(space, &support);
        if step.entries.is_empty() {
            return Err(Error::Plan("greedy planner is stuck".into()));
        }
        for p in step.new_points() {
            support.insert(p);
        }
        steps.push(step);
    }
    Ok(SharingPlan {
        n,
        q,
        initial,
        initial_lines,
        steps,
    })
}

fn greedy_step(space: StateSpace, support: &SupportSet) -> SharingStep {
    let n = space.n();
    let mut used_units = vec![false; n];
    let mut used_points = BTreeSet::new();
    let mut claimed = BTreeSet::new();
    let mut entries = Vec::new();
    loop {
        let mut best: Option<ShareEntry> = None;
        for (i, _) in used_units.iter().enumerate().filter(|(_, u)| !**u) {
            for axis in 0..n {
                for bi in 0..space.cardinality() {
                    let base = space.decode(bi);
                    if base[axis] != 0 {
                        continue;
                    }
                    let line = Line { base, axis };
                    let pts = line.indices(space);
                    if pts.iter().any(|p| used_points.contains(p)) {
                        continue;
                    }
                    let moves = line_moves(space, support, &claimed, &line, i);
                    let better = best.as_ref().map_or(!moves.is_empty(), |b| moves.len() > b.moves.len());
                    if better {
                        best = Some(ShareEntry { unit: i, line, moves });
                    }
                }
            }
        }
        match best {
            None => break,
            Some(e) => {
                used_units[e.unit] = true;
                used_points.extend(e.line.indices(space));
                claimed.extend(e.moves.iter().map(|m| m.target));
                entries.push(e);
            }
        }
    }
    SharingStep { entries }
}

fn line_moves(
    space: StateSpace,
    support: &SupportSet,
    claimed: &BTreeSet<usize>,
    line: &Line,
    unit: usize,
) -> Vec<ShareMove> {
    let mut moves: Vec<ShareMove> = Vec::new();
    for w in 0..space.q() {
        let p = line.point(w);
        let source = space.encode_unchecked(&p);
        if !support.contains(source) {
            continue;
        }
        for b in (0..space.q()).filter(|&b| b != p[unit]) {
            let mut y = p.clone();
            y[unit] = b;
            let target = space.encode_unchecked(&y);
            if support.contains(target) || claimed.contains(&target) || moves.iter().any(|m| m.target == target) {
                continue;
            }
            moves.push(ShareMove {
                source,
                target,
                symbol: b,
            });
            break;
        }
        if unit == line.axis && !moves.is_empty() {
            break;
        }
    }
    moves
}

/// Inverse of one sharing step in log domain: every new point's mass
/// returns to its source.
pub(crate) fn unshare_log(log_t: &[f64], step: &SharingStep) -> Vec<f64> {
    let mut prev = log_t.to_vec();
    for e in &step.entries {
        for m in &e.moves {
            prev[m.source] = logspace::log_sum_exp(&[log_t[m.source], log_t[m.target]]);
            prev[m.target] = f64::NEG_INFINITY;
        }
    }
    prev
}

/// Per-level targets `t¹, …, t^last` obtained by undoing the steps from the
/// top down; `t^last` is `target` and `t^l` is supported on `S^l`.
pub fn backward_targets(target: &Distribution, plan: &SharingPlan) -> Result<Vec<Distribution>> {
    if target.space() != plan.space() {
        return Err(Error::dim(format!(
            "target over {:?}, plan over {:?}",
            target.space(),
            plan.space()
        )));
    }
    let space = target.space();
    let mut cur = target.probs().to_vec();
    let mut out = vec![Distribution::new(space, cur.clone())?];
    for step in plan.steps.iter().rev() {
        for e in &step.entries {
            for m in &e.moves {
                cur[m.source] += cur[m.target];
                cur[m.target] = 0.0;
            }
        }
        out.push(Distribution::from_weights(space, cur.clone())?);
    }
    out.reverse();
    Ok(out)
}

/// Fraction `t^{l+1}(y) / t^l(a)` of each move of `step`, with `0/0 = 0`,
/// given the level target after the step.
pub fn share_fractions(after: &Distribution, step: &SharingStep) -> Vec<f64> {
    step.entries
        .iter()
        .flat_map(|e| e.moves.iter())
        .map(|m| {
            let total = after.prob(m.source) + after.prob(m.target);
            if total > 0.0 {
                after.prob(m.target) / total
            } else {
                0.0
            }
        })
        .collect()
}

/// Forward sharing: move fraction `ρ` of each source's mass to its target.
pub fn apply_sharing(before: &Distribution, step: &SharingStep, fractions: &[f64]) -> Result<Distribution> {
    let moves: Vec<&ShareMove> = step.entries.iter().flat_map(|e| e.moves.iter()).collect();
    if moves.len() != fractions.len() {
        return Err(Error::dim(format!(
            "{} fractions for {} moves",
            fractions.len(),
            moves.len()
        )));
    }
    let mut p = before.probs().to_vec();
    for (m, &rho) in moves.iter().zip(fractions) {
        let mass = before.prob(m.source);
        p[m.source] = mass * (1.0 - rho);
        p[m.target] += mass * rho;
    }
    Distribution::from_weights(before.space(), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn states(space: StateSpace, idx: &[usize]) -> Vec<String> {
        idx.iter()
            .map(|&i| space.decode(i).iter().map(|v| v.to_string()).collect())
            .collect()
    }

    #[test]
    fn four_binary_units() {
        let plan = plan_supports(4, 2).unwrap();
        plan.validate().unwrap();
        let space = plan.space();
        assert_eq!(states(space, &plan.initial), ["0000", "0100", "1000", "1100"]);
        assert!(plan.steps.len() >= 3);
        assert!(plan.depth() <= 8);
        let gains: Vec<usize> = plan.steps.iter().map(|s| s.new_points().len()).collect();
        assert_eq!(gains.iter().sum::<usize>(), 12);
    }

    #[test]
    fn one_unit_is_already_full() {
        let plan = plan_supports(1, 2).unwrap();
        plan.validate().unwrap();
        assert_eq!(plan.initial, vec![0, 1]);
        assert!(plan.steps.is_empty());
    }

    #[test]
    fn two_binary_units_need_at_most_one_step() {
        let plan = plan_supports(2, 2).unwrap();
        plan.validate().unwrap();
        assert!(plan.steps.len() <= 1);
        assert!(plan.initial_lines.len() <= 3);
    }

    #[test]
    fn step_counts_respect_the_new_point_budget() {
        for (n, q) in [(3, 2), (4, 2), (5, 2), (6, 2), (2, 3), (3, 3), (2, 4), (3, 4)] {
            let plan = plan_supports(n, q).unwrap();
            plan.validate().unwrap();
            let total = q.pow(n as u32);
            let budget = (total - plan.initial.len()).div_ceil(n);
            assert!(
                plan.steps.len() <= budget,
                "n={n} q={q}: {} steps > {budget}",
                plan.steps.len()
            );
        }
    }

    #[test]
    fn unsharing_example() {
        let space = StateSpace::new(2, 2).unwrap();
        let step = SharingStep {
            entries: vec![ShareEntry {
                unit: 0,
                line: Line {
                    base: vec![0, 1],
                    axis: 0,
                },
                moves: vec![ShareMove {
                    source: 1,
                    target: 3,
                    symbol: 1,
                }],
            }],
        };
        let plan = SharingPlan {
            n: 2,
            q: 2,
            initial: vec![0, 1, 2],
            initial_lines: vec![],
            steps: vec![step.clone()],
        };
        let t = Distribution::new(space, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let levels = backward_targets(&t, &plan).unwrap();
        let expect = [0.1, 0.6, 0.3, 0.0];
        for (a, b) in levels[0].probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let rho = share_fractions(&t, &step);
        let again = apply_sharing(&levels[0], &step, &rho).unwrap();
        assert!(again.total_variation(&t).unwrap() < 1e-15);
    }

    #[test]
    fn validation_catches_bad_steps() {
        let space = StateSpace::new(2, 2).unwrap();
        let s = SupportSet::new(space, [0, 1]).unwrap();
        let line = Line {
            base: vec![0, 0],
            axis: 1,
        };
        let bad = SharingStep {
            entries: vec![
                ShareEntry {
                    unit: 0,
                    line: line.clone(),
                    moves: vec![ShareMove {
                        source: 0,
                        target: 2,
                        symbol: 1,
                    }],
                },
                ShareEntry {
                    unit: 0,
                    line: Line {
                        base: vec![1, 0],
                        axis: 1,
                    },
                    moves: vec![],
                },
            ],
        };
        assert!(matches!(bad.validate(&s), Err(Error::Plan(_))));
        let overlap = SharingStep {
            entries: vec![
                ShareEntry {
                    unit: 0,
                    line: line.clone(),
                    moves: vec![],
                },
                ShareEntry {
                    unit: 1,
                    line,
                    moves: vec![],
                },
            ],
        };
        assert!(matches!(overlap.validate(&s), Err(Error::Plan(_))));
    }
}
