//! Candidate family and the empirical functionals `phi_hat`, `sigma_hat` and `T_n`.
//!
//! A candidate pairs an adjacent cell pair `(g_1, g_2)` with a test function
//! `h`. Interval candidates use `h = -1{Y in B, D = d_max}` or
//! `h = +1{Y in B, D = d_min}`; threshold candidates use `h = 1{D <= c}`. With
//! these signs every inequality implied by the null reads `phi <= 0`.
//!
//! Empirical conditional measures of an interval only change at observed
//! outcomes, so the sup over all closed intervals is attained on intervals whose
//! endpoints are observed outcomes of the relevant treatment arm, plus the
//! intervals that contain no observation at all (which give `phi = 0`).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CellId, CellPair, Dataset, TreatmentClass, TreatmentSupport, ValidatedData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CandidateKind {
    /// Closed interval `[lo, hi]` for the outcome within a boundary treatment arm.
    Interval { class: TreatmentClass, lo: f64, hi: f64 },
    /// Treatment threshold `c`, testing `P(D <= c | Z)`.
    Threshold { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    /// Index into the pair list of the validated data.
    pub pair: usize,
    pub kind: CandidateKind,
}

impl Candidate {
    /// Value of the test function at `(y, d)`.
    pub fn h(&self, y: f64, d: f64, treatment: &TreatmentSupport) -> f64 {
        match self.kind {
            CandidateKind::Interval { class, lo, hi } => {
                if d == treatment.value(class) && lo <= y && y <= hi {
                    class.sign()
                } else {
                    0.0
                }
            }
            CandidateKind::Threshold { c } => {
                if d <= c {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `n^-1 * sum_i v(Y_i, D_i, cell_i)`.
pub fn empirical_measure<F>(data: &ValidatedData, v: F) -> f64
where
    F: Fn(f64, f64, CellId) -> f64,
{
    let ds = &data.dataset;
    let total: f64 = (0..ds.len()).map(|i| v(ds.y()[i], ds.d()[i], data.cells[i])).sum();
    total / ds.len() as f64
}

fn pooled_outcomes(data: &ValidatedData, pair: &CellPair, class: TreatmentClass) -> Vec<f64> {
    let arm = data.treatment.value(class);
    let ds = &data.dataset;
    let mut values: Vec<f64> = (0..ds.len())
        .filter(|&i| {
            let c = data.cells[i];
            (c == pair.lower || c == pair.upper) && ds.d()[i] == arm
        })
        .map(|i| ds.y()[i])
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Closed intervals with endpoints at the distinct outcomes observed in either
/// cell of `pair` within the treatment arm of `class`. When that arm is
/// unobserved in both cells the full line is returned.
pub fn candidate_intervals(data: &ValidatedData, pair: &CellPair, class: TreatmentClass) -> Vec<(f64, f64)> {
    let values = pooled_outcomes(data, pair, class);
    if values.is_empty() {
        return vec![(f64::NEG_INFINITY, f64::INFINITY)];
    }
    let mut out = Vec::with_capacity(values.len() * (values.len() + 1) / 2);
    for (i, &lo) in values.iter().enumerate() {
        for &hi in &values[i..] {
            out.push((lo, hi));
        }
    }
    out
}

/// Distinct observed treatment values below `d_max`.
pub fn candidate_thresholds(data: &ValidatedData) -> Vec<f64> {
    let d_max = data.treatment.d_max();
    data.treatment.values().iter().copied().filter(|&v| v < d_max).collect()
}

fn cell_probability(data: &ValidatedData, cell: CellId) -> Result<f64> {
    let p = empirical_measure(data, |_, _, c| if c == cell { 1.0 } else { 0.0 });
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::DivisionByZeroCell { cell })
    }
}

/// `P(h g_2) / P(g_2) - P(h g_1) / P(g_1)` evaluated by direct summation.
pub fn phi_hat(candidate: &Candidate, data: &ValidatedData) -> Result<f64> {
    let pair = data.pairs[candidate.pair];
    let p1 = cell_probability(data, pair.lower)?;
    let p2 = cell_probability(data, pair.upper)?;
    let t = &data.treatment;
    let h_in = |cell: CellId| {
        empirical_measure(data, |y, d, c| if c == cell { candidate.h(y, d, t) } else { 0.0 })
    };
    Ok(h_in(pair.upper) / p2 - h_in(pair.lower) / p1)
}

/// Standard deviation estimate for `phi_hat`, scaled by `T_n / n`, evaluated by
/// direct summation. A negative rounding residue in the bracket is clamped to 0.
pub fn sigma_hat(candidate: &Candidate, data: &ValidatedData, t_n: f64) -> Result<f64> {
    let pair = data.pairs[candidate.pair];
    let t = &data.treatment;
    let mut bracket = 0.0;
    for cell in [pair.upper, pair.lower] {
        let pg = cell_probability(data, cell)?;
        let ph = empirical_measure(data, |y, d, c| if c == cell { candidate.h(y, d, t) } else { 0.0 });
        let ph2 = empirical_measure(data, |y, d, c| {
            if c == cell {
                candidate.h(y, d, t).powi(2)
            } else {
                0.0
            }
        });
        bracket += ph2 / (pg * pg) - ph * ph / (pg * pg * pg);
    }
    Ok((t_n / data.n() as f64 * bracket.max(0.0)).sqrt())
}

/// `phi` and `sigma` of one candidate from raw counts: `k*` observations with
/// `|h| = 1` out of `n*` in each cell, `n` in the whole sample.
#[inline]
pub(crate) fn moments_from_counts(
    sign: f64,
    k_lower: f64,
    n_lower: f64,
    k_upper: f64,
    n_upper: f64,
    n: f64,
    t_n: f64,
) -> (f64, f64) {
    let (p1, p2) = (n_lower / n, n_upper / n);
    let (h1, h2) = (sign * k_lower / n, sign * k_upper / n);
    let (h1sq, h2sq) = (k_lower / n, k_upper / n);
    let phi = h2 / p2 - h1 / p1;
    let bracket = h2sq / (p2 * p2) - h2 * h2 / (p2 * p2 * p2) + h1sq / (p1 * p1) - h1 * h1 / (p1 * p1 * p1);
    (phi, (t_n / n * bracket.max(0.0)).sqrt())
}

#[derive(Debug, Clone, Copy)]
struct Member {
    obs: u32,
    upper: bool,
    bin: u32,
}

/// Interval candidates of one (pair, treatment arm).
#[derive(Debug, Clone)]
struct IntervalBlock {
    pair: usize,
    class: TreatmentClass,
    values: Vec<f64>,
    first: usize,
    members: Vec<Member>,
}

impl IntervalBlock {
    fn len(&self) -> usize {
        let m = self.values.len();
        if m == 0 {
            1
        } else {
            m * (m + 1) / 2
        }
    }
}

/// How candidates map onto per-sample counts.
#[derive(Debug, Clone)]
struct Layout {
    pairs: Vec<CellPair>,
    blocks: Vec<IntervalBlock>,
    thresholds: Vec<f64>,
    threshold_first: Vec<usize>,
    occupied: Vec<bool>,
    obs_cell: Vec<u32>,
    /// Position of the first threshold `>= D_i`; `D_i <= c_t` iff `t >= pos`.
    obs_threshold: Vec<u32>,
    d_min: f64,
    d_max: f64,
    grid: crate::model::InstrumentGrid,
}

/// Observation counts of one sample (original or bootstrap) over the layout.
#[derive(Debug, Clone)]
pub(crate) struct SampleCounts {
    n: f64,
    cell: Vec<f64>,
    /// Per block: counts per outcome value in the lower and upper cell.
    bins: Vec<[Vec<f64>; 2]>,
    /// Per cell: counts with `D <= thresholds[t]`.
    below: Vec<Vec<f64>>,
}

/// Candidate family with its sample moments.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub candidates: Vec<Candidate>,
    pub phi_hat: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub t_n: f64,
    pub cell_probs: Vec<f64>,
    layout: Layout,
    n: usize,
}

pub fn build_moment_table(data: &ValidatedData) -> Result<MomentTable> {
    let n = data.n();
    let ds = &data.dataset;
    let thresholds = candidate_thresholds(data);

    let mut blocks = Vec::with_capacity(2 * data.pairs.len());
    let mut threshold_first = Vec::with_capacity(data.pairs.len());
    let mut candidates = Vec::new();
    for (p, pair) in data.pairs.iter().enumerate() {
        for class in [TreatmentClass::Max, TreatmentClass::Min] {
            let values = pooled_outcomes(data, pair, class);
            let arm = data.treatment.value(class);
            let members = (0..n)
                .filter_map(|i| {
                    let c = data.cells[i];
                    if (c != pair.lower && c != pair.upper) || ds.d()[i] != arm {
                        return None;
                    }
                    let bin = values.binary_search_by(|v| v.total_cmp(&ds.y()[i])).ok()?;
                    Some(Member { obs: i as u32, upper: c == pair.upper, bin: bin as u32 })
                })
                .collect();
            for (lo, hi) in candidate_intervals(data, pair, class) {
                candidates.push(Candidate { pair: p, kind: CandidateKind::Interval { class, lo, hi } });
            }
            let block = IntervalBlock { pair: p, class, first: 0, values, members };
            blocks.push(block);
        }
        threshold_first.push(candidates.len());
        for &c in &thresholds {
            candidates.push(Candidate { pair: p, kind: CandidateKind::Threshold { c } });
        }
    }
    let mut first = 0;
    for (b, block) in blocks.iter_mut().enumerate() {
        block.first = first;
        first += block.len();
        if b % 2 == 1 {
            first += thresholds.len();
        }
    }

    let layout = Layout {
        pairs: data.pairs.clone(),
        blocks,
        obs_cell: data.cells.iter().map(|&c| c as u32).collect(),
        obs_threshold: ds
            .d()
            .iter()
            .map(|&d| thresholds.partition_point(|&c| c < d) as u32)
            .collect(),
        thresholds,
        threshold_first,
        occupied: data.occupied(),
        d_min: data.treatment.d_min(),
        d_max: data.treatment.d_max(),
        grid: data.grid.clone(),
    };
    let mut table = MomentTable {
        phi_hat: vec![0.0; candidates.len()],
        sigma_hat: vec![0.0; candidates.len()],
        candidates,
        t_n: 0.0,
        cell_probs: Vec::new(),
        layout,
        n,
    };
    let counts = table.counts_from_weights(None);
    table.cell_probs = counts.cell.iter().map(|c| c / n as f64).collect();
    table.t_n = table.scale_factor(&counts)?;

    let t_n = table.t_n;
    let per_block: Vec<Vec<(usize, f64, f64)>> = (0..table.layout.blocks.len())
        .into_par_iter()
        .map(|b| {
            let mut out = Vec::new();
            table.visit_block(b, &counts, t_n, |id, phi, sigma| out.push((id, phi, sigma)));
            if b % 2 == 1 {
                table.visit_thresholds(b / 2, &counts, t_n, |id, phi, sigma| out.push((id, phi, sigma)));
            }
            out
        })
        .collect();
    for (id, phi, sigma) in per_block.into_iter().flatten() {
        table.phi_hat[id] = phi;
        table.sigma_hat[id] = sigma;
    }
    Ok(table)
}

impl MomentTable {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[CellPair] {
        &self.layout.pairs
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.layout.thresholds
    }

    /// Ids of the candidates belonging to pair `p`.
    pub fn pair_candidates(&self, p: usize) -> std::ops::Range<usize> {
        let start = self.layout.blocks[2 * p].first;
        start..self.layout.threshold_first[p] + self.layout.thresholds.len()
    }

    /// Counts of a sample where observation `i` of the original data appears
    /// `weights[i]` times (once each when `weights` is `None`).
    pub(crate) fn counts_from_weights(&self, weights: Option<&[u32]>) -> SampleCounts {
        let l = &self.layout;
        let w = |i: usize| weights.map_or(1.0, |w| w[i] as f64);
        let n_cells = l.occupied.len();
        let mut cell = vec![0.0; n_cells];
        let mut hist = vec![vec![0.0; l.thresholds.len() + 1]; n_cells];
        for i in 0..self.n {
            let wi = w(i);
            if wi == 0.0 {
                continue;
            }
            let c = l.obs_cell[i] as usize;
            cell[c] += wi;
            hist[c][l.obs_threshold[i] as usize] += wi;
        }
        let bins = l
            .blocks
            .iter()
            .map(|b| {
                let mut bins = [vec![0.0; b.values.len()], vec![0.0; b.values.len()]];
                for m in &b.members {
                    bins[m.upper as usize][m.bin as usize] += w(m.obs as usize);
                }
                bins
            })
            .collect();
        SampleCounts { n: weights.map_or(self.n as f64, |w| w.iter().map(|&x| x as f64).sum()), cell, bins, below: cumulative(hist) }
    }

    /// Counts of an arbitrary resample of the original observations.
    pub(crate) fn counts_from_dataset(&self, sample: &Dataset) -> Result<SampleCounts> {
        let l = &self.layout;
        let n_cells = l.occupied.len();
        let mut cell = vec![0.0; n_cells];
        let mut hist = vec![vec![0.0; l.thresholds.len() + 1]; n_cells];
        let mut bins: Vec<[Vec<f64>; 2]> = l
            .blocks
            .iter()
            .map(|b| [vec![0.0; b.values.len()], vec![0.0; b.values.len()]])
            .collect();
        let foreign = || Error::InvalidConfig("resample contains an observation absent from the original sample".into());
        for i in 0..sample.len() {
            let c = l.grid.cell_of(sample.z(i))?;
            let (y, d) = (sample.y()[i], sample.d()[i]);
            cell[c] += 1.0;
            hist[c][l.thresholds.partition_point(|&t| t < d)] += 1.0;
            for (b, block) in l.blocks.iter().enumerate() {
                let pair = l.pairs[block.pair];
                let arm = match block.class {
                    TreatmentClass::Max => l.d_max,
                    TreatmentClass::Min => l.d_min,
                };
                if (c != pair.lower && c != pair.upper) || d != arm {
                    continue;
                }
                let bin = block.values.binary_search_by(|v| v.total_cmp(&y)).map_err(|_| foreign())?;
                bins[b][(c == pair.upper) as usize][bin] += 1.0;
            }
        }
        Ok(SampleCounts { n: sample.len() as f64, cell, bins, below: cumulative(hist) })
    }

    /// `n * prod_k P(Z = z_k)` over the occupied cells of the original sample.
    pub(crate) fn scale_factor(&self, counts: &SampleCounts) -> Result<f64> {
        let mut t = counts.n;
        for (c, &occ) in self.layout.occupied.iter().enumerate() {
            if occ {
                if counts.cell[c] == 0.0 {
                    return Err(Error::EmptyBootstrapCell { cell: c });
                }
                t *= counts.cell[c] / counts.n;
            }
        }
        Ok(t)
    }

    /// Calls `f(id, phi, sigma)` for every candidate, evaluated on `counts`.
    pub(crate) fn visit(&self, counts: &SampleCounts, t_n: f64, mut f: impl FnMut(usize, f64, f64)) {
        for b in 0..self.layout.blocks.len() {
            self.visit_block(b, counts, t_n, &mut f);
            if b % 2 == 1 {
                self.visit_thresholds(b / 2, counts, t_n, &mut f);
            }
        }
    }

    fn visit_block(&self, b: usize, counts: &SampleCounts, t_n: f64, mut f: impl FnMut(usize, f64, f64)) {
        let block = &self.layout.blocks[b];
        let pair = self.layout.pairs[block.pair];
        let (n1, n2) = (counts.cell[pair.lower], counts.cell[pair.upper]);
        let sign = block.class.sign();
        let m = block.values.len();
        if m == 0 {
            let (phi, sigma) = moments_from_counts(sign, 0.0, n1, 0.0, n2, counts.n, t_n);
            f(block.first, phi, sigma);
            return;
        }
        let [lo_bins, up_bins] = &counts.bins[b];
        let prefix = |bins: &[f64]| {
            let mut acc = Vec::with_capacity(bins.len() + 1);
            acc.push(0.0);
            let mut s = 0.0;
            for &x in bins {
                s += x;
                acc.push(s);
            }
            acc
        };
        let (c1, c2) = (prefix(lo_bins), prefix(up_bins));
        let mut id = block.first;
        for i in 0..m {
            for j in i..m {
                let k1 = c1[j + 1] - c1[i];
                let k2 = c2[j + 1] - c2[i];
                let (phi, sigma) = moments_from_counts(sign, k1, n1, k2, n2, counts.n, t_n);
                f(id, phi, sigma);
                id += 1;
            }
        }
    }

    fn visit_thresholds(&self, p: usize, counts: &SampleCounts, t_n: f64, mut f: impl FnMut(usize, f64, f64)) {
        let pair = self.layout.pairs[p];
        let (n1, n2) = (counts.cell[pair.lower], counts.cell[pair.upper]);
        let first = self.layout.threshold_first[p];
        for t in 0..self.layout.thresholds.len() {
            let k1 = counts.below[pair.lower][t];
            let k2 = counts.below[pair.upper][t];
            let (phi, sigma) = moments_from_counts(1.0, k1, n1, k2, n2, counts.n, t_n);
            f(first + t, phi, sigma);
        }
    }
}

fn cumulative(hist: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    hist.into_iter()
        .map(|h| {
            let mut s = 0.0;
            let mut out: Vec<f64> = h.iter().map(|x| {
                s += x;
                s
            }).collect();
            out.pop();
            out
        })
        .collect()
}
