//! Contact-set bootstrap: resampling, centered bootstrap statistics, critical
//! values, p-values and the end-to-end test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, TestConfig, ValidatedData, XiMeasure};
use crate::moments::{build_moment_table, MomentTable, SampleCounts};
use crate::statistic::{integrate, sups_over, SupProfile};

/// Redraws allowed after a resample leaves an instrument cell empty.
pub const MAX_REDRAWS: usize = 100;

/// Candidates where the null inequality is estimated to bind.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSet {
    mask: Vec<bool>,
    pub tau_n: f64,
    pub xi0: f64,
}

impl ContactSet {
    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: usize) -> bool {
        self.mask[id]
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }
}

fn contact_ratio(table: &MomentTable, id: usize, xi0: f64) -> f64 {
    table.t_n.sqrt() * (table.phi_hat[id] / xi0.max(table.sigma_hat[id])).abs()
}

/// `{c : sqrt(T_n) |phi(c) / max(xi0, sigma(c))| <= tau_n}`.
pub fn contact_set(table: &MomentTable, tau_n: f64, xi0: f64) -> ContactSet {
    let mask = (0..table.len())
        .map(|id| tau_n == f64::INFINITY || contact_ratio(table, id, xi0) <= tau_n)
        .collect();
    ContactSet { mask, tau_n, xi0 }
}

/// Contact sets for an increasing list of thresholds, stored as the first
/// threshold level at which each candidate enters.
#[derive(Debug, Clone)]
pub(crate) struct NestedContact {
    level: Vec<u8>,
    levels: usize,
}

const OUTSIDE: u8 = u8::MAX;

impl NestedContact {
    /// `taus` must be ascending.
    pub(crate) fn new(table: &MomentTable, taus: &[f64], xi0: f64) -> Self {
        assert!(taus.len() < OUTSIDE as usize);
        debug_assert!(taus.windows(2).all(|w| w[0] <= w[1]));
        let level = (0..table.len())
            .map(|id| {
                let r = contact_ratio(table, id, xi0);
                taus.iter()
                    .position(|&t| t == f64::INFINITY || r <= t)
                    .map_or(OUTSIDE, |p| p as u8)
            })
            .collect();
        NestedContact { level, levels: taus.len() }
    }

    pub(crate) fn single(contact: &ContactSet) -> Self {
        let level = contact.mask.iter().map(|&m| if m { 0 } else { OUTSIDE }).collect();
        NestedContact { level, levels: 1 }
    }

    pub(crate) fn size_at(&self, level: usize) -> usize {
        self.level.iter().filter(|&&l| l != OUTSIDE && (l as usize) <= level).count()
    }
}

/// Centered bootstrap sups per (level, xi), row-major by level. Each level
/// includes all candidates of lower levels; values are floored at zero.
pub(crate) fn centered_sups(
    table: &MomentTable,
    counts: &SampleCounts,
    t_star: f64,
    nested: &NestedContact,
    xis: &[f64],
) -> Vec<f64> {
    let nx = xis.len();
    let mut acc = vec![0.0f64; nested.levels * nx];
    let root = t_star.sqrt();
    table.visit(counts, t_star, |id, phi, sigma| {
        let level = nested.level[id];
        if level == OUTSIDE {
            return;
        }
        let num = root * (phi - table.phi_hat[id]);
        if num <= 0.0 {
            return;
        }
        let row = &mut acc[level as usize * nx..(level as usize + 1) * nx];
        for (slot, &xi) in row.iter_mut().zip(xis) {
            let r = num / xi.max(sigma);
            if r > *slot {
                *slot = r;
            }
        }
    });
    for level in 1..nested.levels {
        for k in 0..nx {
            let prev = acc[(level - 1) * nx + k];
            let cur = &mut acc[level * nx + k];
            if prev > *cur {
                *cur = prev;
            }
        }
    }
    acc
}

/// Random stream for replication `stream` of a run seeded with `seed`.
pub(crate) fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for _ in 0..n {
        w[rng.random_range(0..n)] += 1;
    }
    w
}

/// `n` observations drawn uniformly with replacement.
pub fn bootstrap_draw<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Dataset {
    let n = data.len();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    data.select(&idx)
}

/// One bootstrap replication over the original observations, redrawing while a
/// cell is empty. Returns the centered sups and the number of redraws.
pub(crate) fn replicate(
    table: &MomentTable,
    nested: &NestedContact,
    xis: &[f64],
    seed: u64,
    stream: u64,
) -> Result<(Vec<f64>, usize)> {
    let mut rng = replication_rng(seed, stream);
    for attempt in 0..=MAX_REDRAWS {
        let weights = draw_weights(table.n(), &mut rng);
        let counts = table.counts_from_weights(Some(&weights));
        match table.scale_factor(&counts) {
            Ok(t_star) => return Ok((centered_sups(table, &counts, t_star, nested, xis), attempt)),
            Err(Error::EmptyBootstrapCell { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ExcessiveRedraws { attempts: MAX_REDRAWS + 1 })
}

/// `int sup_{c in contact} sqrt(T*) (phi*(c) - phi(c)) / max(xi, sigma*(c)) dnu`
/// for a resample of the original observations.
pub fn bootstrap_statistic(
    resample: &Dataset,
    table: &MomentTable,
    contact: &ContactSet,
    nu: &XiMeasure,
) -> Result<f64> {
    let counts = table.counts_from_dataset(resample)?;
    let t_star = table.scale_factor(&counts)?;
    let (xis, weights): (Vec<f64>, Vec<f64>) = nu.atoms().into_iter().unzip();
    let sups = centered_sups(table, &counts, t_star, &NestedContact::single(contact), &xis);
    Ok(integrate(&sups, &weights))
}

/// Smallest bootstrap statistic whose empirical CDF reaches `1 - alpha`.
pub fn critical_value(boot_stats: &[f64], alpha: f64) -> f64 {
    assert!(!boot_stats.is_empty(), "critical value needs at least one bootstrap statistic");
    let mut sorted = boot_stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let target = (1.0 - alpha) * n as f64;
    let k = ((target - 1e-9).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// `(1 + #{stats >= ts}) / (n_B + 1)`.
pub fn p_value(boot_stats: &[f64], ts: f64) -> f64 {
    let exceed = boot_stats.iter().filter(|&&s| s >= ts).count();
    (1 + exceed) as f64 / (boot_stats.len() + 1) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDiagnostic {
    pub dim: usize,
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub lower_count: usize,
    pub upper_count: usize,
    pub candidates: usize,
    /// Largest `phi_hat` among the pair's candidates.
    pub max_phi: f64,
    /// Largest `sqrt(T_n) phi_hat / max(xi0, sigma_hat)` among the pair's candidates.
    pub max_studentized: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub t_n: f64,
    pub candidates: usize,
    pub pairs: Vec<PairDiagnostic>,
    pub dropped_pairs: Vec<(Vec<i64>, Vec<i64>)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub xi_spec: String,
    pub ts: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub contact_set_size: usize,
    pub n_bootstrap_used: usize,
    pub redraws: usize,
    pub profile: SupProfile,
    pub diagnostics: Diagnostics,
    pub config: TestConfig,
    pub seed: u64,
}

/// Runs the test for `config.xi_measure`.
pub fn run_test(data: &ValidatedData, config: &TestConfig) -> Result<TestResult> {
    let mut out = run_test_sweep(data, config, std::slice::from_ref(&config.xi_measure))?;
    Ok(out.remove(0))
}

/// Runs the test for several ξ measures sharing one set of bootstrap draws.
pub fn run_test_sweep(
    data: &ValidatedData,
    config: &TestConfig,
    measures: &[XiMeasure],
) -> Result<Vec<TestResult>> {
    config.validate()?;
    for m in measures {
        m.validate()?;
    }
    let table = build_moment_table(data)?;
    let xis = distinct_xis(measures);
    let root = table.t_n.sqrt();
    let numerators: Vec<f64> = table.phi_hat.iter().map(|p| root * p).collect();
    let (sups, argmax) = sups_over(&numerators, &table.sigma_hat, &xis);

    let contact = contact_set(&table, config.tau_n, config.xi0);
    let nested = NestedContact::single(&contact);
    let reps = (0..config.n_bootstrap as u64)
        .into_par_iter()
        .map(|b| replicate(&table, &nested, &xis, config.seed, b))
        .collect::<Result<Vec<_>>>()?;
    let redraws = reps.iter().map(|r| r.1).sum();

    let diagnostics = diagnostics(data, &table, config.xi0);
    let results = measures
        .iter()
        .map(|m| {
            let atoms = m.atoms();
            let pos: Vec<usize> = atoms
                .iter()
                .map(|(x, _)| xis.iter().position(|y| y == x).expect("xi collected above"))
                .collect();
            let weights: Vec<f64> = atoms.iter().map(|a| a.1).collect();
            let pick = |v: &[f64]| pos.iter().map(|&k| v[k]).collect::<Vec<_>>();
            let my_sups = pick(&sups);
            let ts = integrate(&my_sups, &weights);
            let boot: Vec<f64> = reps.iter().map(|(s, _)| integrate(&pick(s), &weights)).collect();
            let cv = critical_value(&boot, config.alpha);
            TestResult {
                xi_spec: m.to_string(),
                ts,
                critical_value: cv,
                p_value: p_value(&boot, ts),
                reject: ts > cv,
                contact_set_size: contact.len(),
                n_bootstrap_used: boot.len(),
                redraws,
                profile: SupProfile {
                    xis: atoms.iter().map(|a| a.0).collect(),
                    weights,
                    sups: my_sups,
                    argmax: pos.iter().map(|&k| argmax[k]).collect(),
                    ts,
                },
                diagnostics: diagnostics.clone(),
                config: TestConfig { xi_measure: m.clone(), ..config.clone() },
                seed: config.seed,
            }
        })
        .collect();
    Ok(results)
}

pub(crate) fn distinct_xis(measures: &[XiMeasure]) -> Vec<f64> {
    let mut xis: Vec<f64> = Vec::new();
    for (x, _) in measures.iter().flat_map(|m| m.atoms()) {
        if !xis.contains(&x) {
            xis.push(x);
        }
    }
    xis
}

fn diagnostics(data: &ValidatedData, table: &MomentTable, xi0: f64) -> Diagnostics {
    let pairs = data
        .pairs
        .iter()
        .enumerate()
        .map(|(p, pair)| {
            let ids = table.pair_candidates(p);
            let candidates = ids.len();
            let max_phi = ids.clone().map(|i| table.phi_hat[i]).fold(f64::NEG_INFINITY, f64::max);
            let max_studentized = ids
                .map(|i| table.t_n.sqrt() * table.phi_hat[i] / xi0.max(table.sigma_hat[i]))
                .fold(f64::NEG_INFINITY, f64::max);
            PairDiagnostic {
                dim: pair.dim,
                lower: data.grid.coords(pair.lower),
                upper: data.grid.coords(pair.upper),
                lower_count: data.counts[pair.lower],
                upper_count: data.counts[pair.upper],
                candidates,
                max_phi,
                max_studentized,
            }
        })
        .collect();
    Diagnostics {
        t_n: table.t_n,
        candidates: table.len(),
        pairs,
        dropped_pairs: data
            .dropped_pairs
            .iter()
            .map(|p| (data.grid.coords(p.lower), data.grid.coords(p.upper)))
            .collect(),
        warnings: data.warnings.clone(),
    }
}
