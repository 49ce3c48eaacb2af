//! Size and power designs for a binary two-dimensional instrument with
//! treatment in {0, 1, 2}, and the warp-speed Monte Carlo harness.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::{critical_value, replicate, replication_rng, run_test_sweep, NestedContact};
use crate::error::{Error, Result};
use crate::model::{
    validate_dataset, Dataset, Direction, EmptyCellPolicy, InstrumentGrid, TestConfig, ValidatedData,
    XiMeasure,
};
use crate::moments::build_moment_table;
use crate::statistic::{integrate, sups_over};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DgpId {
    Null,
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
}

impl DgpId {
    pub const ALL: [DgpId; 7] = [DgpId::Null, DgpId::P1, DgpId::P2, DgpId::P3, DgpId::P4, DgpId::P5, DgpId::P6];
}

impl FromStr for DgpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "null" | "h0" => Ok(DgpId::Null),
            "p1" | "1" => Ok(DgpId::P1),
            "p2" | "2" => Ok(DgpId::P2),
            "p3" | "3" => Ok(DgpId::P3),
            "p4" | "4" => Ok(DgpId::P4),
            "p5" | "5" => Ok(DgpId::P5),
            "p6" | "6" => Ok(DgpId::P6),
            _ => Err(Error::UnknownDgp(s.to_string())),
        }
    }
}

impl fmt::Display for DgpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DgpId::Null => "null",
            DgpId::P1 => "p1",
            DgpId::P2 => "p2",
            DgpId::P3 => "p3",
            DgpId::P4 => "p4",
            DgpId::P5 => "p5",
            DgpId::P6 => "p6",
        };
        f.write_str(s)
    }
}

/// Sample sizes and instrument probabilities used for the power designs.
pub const POWER_DESIGNS: [(usize, f64); 5] =
    [(200, 0.5), (600, 1.0 / 6.0), (1000, 0.5), (1100, 1.0 / 11.0), (2000, 0.5)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DgpSpec {
    pub id: DgpId,
    pub n: usize,
    /// `P(Z_j = 1)`.
    pub r_n: f64,
}

impl DgpSpec {
    pub fn new(id: DgpId, n: usize, r_n: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("sample size must be positive".into()));
        }
        if !(r_n > 0.0 && r_n < 1.0) {
            return Err(Error::InvalidConfig(format!("r_n = {r_n} is outside (0, 1)")));
        }
        Ok(DgpSpec { id, n, r_n })
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Dataset {
        match self.id {
            DgpId::Null => gen_null(self.n, rng),
            id => gen_power(id, self.n, self.r_n, rng).expect("power design id"),
        }
    }
}

/// Binary grid `{0,1} x {0,1}`, ascending in both coordinates.
pub fn binary_grid() -> InstrumentGrid {
    InstrumentGrid::new(vec![vec![0, 1], vec![0, 1]], vec![Direction::Ascending; 2]).expect("valid grid")
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + sd * z
}

/// `2 * 1{V <= hi2} + 1{hi2 < V <= hi1}`.
fn three_arm(v: f64, hi2: f64, hi1: f64) -> f64 {
    if v <= hi2 {
        2.0
    } else if v <= hi1 {
        1.0
    } else {
        0.0
    }
}

/// Null design: treatment response identical across instrument cells.
pub fn gen_null<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Dataset {
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let (u1, u2, v): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let di = three_arm(v, 0.33, 0.66);
        z.push((u1 <= 0.5) as i64);
        z.push((u2 <= 0.5) as i64);
        y.push(normal(rng, di, 1.0));
        d.push(di);
    }
    Dataset::from_flat(y, d, z, 2).expect("consistent lengths")
}

/// Power designs. P1 to P4 change the outcome law at cell (0,0) for `D = 2`;
/// P5 and P6 make treatment response at one cell defy the assumed ordering.
pub fn gen_power<R: Rng + ?Sized>(id: DgpId, n: usize, r_n: f64, rng: &mut R) -> Result<Dataset> {
    let mut y = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let (u1, u2, v, w): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let z1 = (u1 <= r_n) as i64;
        let z2 = (u2 <= r_n) as i64;
        let at_origin = z1 == 0 && z2 == 0;
        let (di, yi) = match id {
            DgpId::P1 | DgpId::P2 | DgpId::P3 | DgpId::P4 => {
                let di = three_arm(v, 0.45, 0.55);
                let yi = if at_origin && di == 2.0 {
                    match id {
                        DgpId::P1 => normal(rng, -0.7, 1.0),
                        DgpId::P2 => normal(rng, 0.0, 1.675),
                        DgpId::P3 => normal(rng, 0.0, 0.515),
                        _ => {
                            let mean = if w <= 0.15 {
                                -1.0
                            } else if w <= 0.35 {
                                -0.5
                            } else if w <= 0.65 {
                                0.0
                            } else if w <= 0.85 {
                                0.5
                            } else {
                                1.0
                            };
                            normal(rng, mean, 0.125)
                        }
                    }
                } else {
                    normal(rng, 0.0, 1.0)
                };
                (di, yi)
            }
            DgpId::P5 | DgpId::P6 => {
                let defiant = match id {
                    DgpId::P5 => at_origin,
                    _ => z1 == 0 && z2 == 1,
                };
                let di = if defiant { three_arm(v, 0.6, 0.8) } else { three_arm(v, 0.33, 0.66) };
                (di, normal(rng, di, 1.0))
            }
            DgpId::Null => return Err(Error::UnknownDgp("null is not a power design".into())),
        };
        y.push(yi);
        d.push(di);
        z.push(z1);
        z.push(z2);
    }
    Dataset::from_flat(y, d, z, 2)
}

/// Settings shared by every replication of a Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfig {
    pub alpha: f64,
    pub taus: Vec<f64>,
    pub xi0: f64,
    pub measures: Vec<XiMeasure>,
    pub seed: u64,
    pub empty_cell_policy: EmptyCellPolicy,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            alpha: 0.05,
            taus: vec![2.0],
            xi0: 1e-10,
            measures: XiMeasure::standard_sweep(),
            seed: 0,
            empty_cell_policy: EmptyCellPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub tau: f64,
    pub nu: String,
    pub xi_spec: String,
    pub rate: f64,
    pub critical_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub dgp: DgpId,
    pub n: usize,
    pub r_n: f64,
    pub n_mc: usize,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub alpha: f64,
    pub rows: Vec<McRow>,
    /// Per replication: the sample statistic for each measure.
    pub ts: Vec<Vec<f64>>,
    /// Per replication: the bootstrap statistic for each (tau, measure).
    pub boot: Vec<Vec<f64>>,
    /// Per replication: contact-set size for each tau, and the family size.
    pub contact_sizes: Vec<Vec<usize>>,
    pub family_sizes: Vec<usize>,
    pub dataset_redraws: usize,
    pub bootstrap_redraws: usize,
    pub wall_time_secs: f64,
}

impl McReport {
    pub fn rate(&self, tau: f64, nu: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.tau == tau && r.nu == nu).map(|r| r.rate)
    }
}

/// Per-replication seed for the bootstrap of replication `m`.
pub fn replication_seed(master: u64, m: u64) -> u64 {
    let mut x = master ^ 0x5851_F42D_4C95_7F2D;
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(m + 1));
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn simulate_valid(spec: &DgpSpec, config: &TestConfig, master: u64, m: u64) -> Result<(ValidatedData, usize)> {
    let mut rng = replication_rng(master, m);
    let grid = binary_grid();
    for attempt in 0..=crate::bootstrap::MAX_REDRAWS {
        let data = spec.generate(&mut rng);
        match validate_dataset(data, &grid, config) {
            Ok(v) => return Ok((v, attempt)),
            Err(Error::EmptyInstrumentCell { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ExcessiveRedraws { attempts: crate::bootstrap::MAX_REDRAWS + 1 })
}

fn test_config(config: &McConfig) -> TestConfig {
    TestConfig {
        alpha: config.alpha,
        n_bootstrap: 1,
        tau_n: config.taus.first().copied().unwrap_or(2.0),
        xi0: config.xi0,
        xi_measure: config.measures.first().cloned().unwrap_or(XiMeasure::Dirac(0.05)),
        seed: config.seed,
        empty_cell_policy: config.empty_cell_policy,
        treatment_support: None,
    }
}

fn check(config: &McConfig, n_mc: usize) -> Result<()> {
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be positive".into()));
    }
    if config.taus.is_empty() || config.measures.is_empty() {
        return Err(Error::InvalidConfig("need at least one tau and one measure".into()));
    }
    if config.taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidConfig("tau values must be nonnegative".into()));
    }
    for m in &config.measures {
        m.validate()?;
    }
    test_config(config).validate()
}

struct RepOutcome {
    ts: Vec<f64>,
    boot: Vec<f64>,
    contact: Vec<usize>,
    family: usize,
    data_redraws: usize,
    boot_redraws: usize,
}

/// Warp-speed Monte Carlo: one bootstrap draw per replication, with the
/// critical value taken from the pooled bootstrap statistics of all
/// replications. All tau values share the same samples and draws.
pub fn warp_speed_mc(spec: &DgpSpec, config: &McConfig, n_mc: usize) -> Result<McReport> {
    check(config, n_mc)?;
    let start = Instant::now();
    let tcfg = test_config(config);
    let mut order: Vec<usize> = (0..config.taus.len()).collect();
    order.sort_by(|&a, &b| config.taus[a].total_cmp(&config.taus[b]));
    let sorted_taus: Vec<f64> = order.iter().map(|&i| config.taus[i]).collect();
    let xis = crate::bootstrap::distinct_xis(&config.measures);
    let plans: Vec<(Vec<usize>, Vec<f64>)> = config
        .measures
        .iter()
        .map(|m| {
            let atoms = m.atoms();
            let pos = atoms.iter().map(|(x, _)| xis.iter().position(|y| y == x).unwrap()).collect();
            (pos, atoms.iter().map(|a| a.1).collect())
        })
        .collect();
    let nm = config.measures.len();

    let outcomes = (0..n_mc as u64)
        .into_par_iter()
        .map(|m| -> Result<RepOutcome> {
            let (data, data_redraws) = simulate_valid(spec, &tcfg, config.seed, m)?;
            let table = build_moment_table(&data)?;
            let root = table.t_n.sqrt();
            let nums: Vec<f64> = table.phi_hat.iter().map(|p| root * p).collect();
            let (sups, _) = sups_over(&nums, &table.sigma_hat, &xis);
            let nested = NestedContact::new(&table, &sorted_taus, config.xi0);
            let (boot_sups, boot_redraws) =
                replicate(&table, &nested, &xis, replication_seed(config.seed, m), 0)?;
            let nx = xis.len();
            let ts = plans
                .iter()
                .map(|(pos, w)| integrate(&pos.iter().map(|&k| sups[k]).collect::<Vec<_>>(), w))
                .collect();
            let mut boot = vec![0.0; config.taus.len() * nm];
            let mut contact = vec![0; config.taus.len()];
            for (level, &orig) in order.iter().enumerate() {
                let row = &boot_sups[level * nx..(level + 1) * nx];
                for (j, (pos, w)) in plans.iter().enumerate() {
                    boot[orig * nm + j] = integrate(&pos.iter().map(|&k| row[k]).collect::<Vec<_>>(), w);
                }
                contact[orig] = nested.size_at(level);
            }
            Ok(RepOutcome { ts, boot, contact, family: table.len(), data_redraws, boot_redraws })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (t, &tau) in config.taus.iter().enumerate() {
        for (j, m) in config.measures.iter().enumerate() {
            let pooled: Vec<f64> = outcomes.iter().map(|o| o.boot[t * nm + j]).collect();
            let cv = critical_value(&pooled, config.alpha);
            let rejections = outcomes.iter().filter(|o| o.ts[j] > cv).count();
            rows.push(McRow {
                tau,
                nu: m.label(),
                xi_spec: m.to_string(),
                rate: rejections as f64 / n_mc as f64,
                critical_value: cv,
            });
        }
    }
    Ok(McReport {
        dgp: spec.id,
        n: spec.n,
        r_n: spec.r_n,
        n_mc,
        n_bootstrap: 1,
        seed: config.seed,
        alpha: config.alpha,
        rows,
        ts: outcomes.iter().map(|o| o.ts.clone()).collect(),
        boot: outcomes.iter().map(|o| o.boot.clone()).collect(),
        contact_sizes: outcomes.iter().map(|o| o.contact.clone()).collect(),
        family_sizes: outcomes.iter().map(|o| o.family).collect(),
        dataset_redraws: outcomes.iter().map(|o| o.data_redraws).sum(),
        bootstrap_redraws: outcomes.iter().map(|o| o.boot_redraws).sum(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Monte Carlo with a full bootstrap of `n_bootstrap` draws in every
/// replication; replication `m` uses the same sample and bootstrap seed as
/// [`warp_speed_mc`].
pub fn full_bootstrap_mc(spec: &DgpSpec, config: &McConfig, n_mc: usize, n_bootstrap: usize) -> Result<McReport> {
    check(config, n_mc)?;
    if n_bootstrap == 0 {
        return Err(Error::InvalidConfig("n_bootstrap must be positive".into()));
    }
    let start = Instant::now();
    let tcfg = test_config(config);
    let nm = config.measures.len();
    let per_rep = (0..n_mc as u64)
        .map(|m| -> Result<(Vec<f64>, Vec<bool>, Vec<usize>, usize)> {
            let (data, redraws) = simulate_valid(spec, &tcfg, config.seed, m)?;
            let mut ts = Vec::new();
            let mut reject = vec![false; config.taus.len() * nm];
            let mut contact = Vec::new();
            for (t, &tau) in config.taus.iter().enumerate() {
                let cfg = TestConfig { tau_n: tau, n_bootstrap, seed: replication_seed(config.seed, m), ..tcfg.clone() };
                let results = run_test_sweep(&data, &cfg, &config.measures)?;
                if t == 0 {
                    ts = results.iter().map(|r| r.ts).collect();
                }
                contact.push(results[0].contact_set_size);
                for (j, r) in results.iter().enumerate() {
                    reject[t * nm + j] = r.reject;
                }
            }
            Ok((ts, reject, contact, redraws))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (t, &tau) in config.taus.iter().enumerate() {
        for (j, m) in config.measures.iter().enumerate() {
            let hits = per_rep.iter().filter(|r| r.1[t * nm + j]).count();
            rows.push(McRow {
                tau,
                nu: m.label(),
                xi_spec: m.to_string(),
                rate: hits as f64 / n_mc as f64,
                critical_value: f64::NAN,
            });
        }
    }
    Ok(McReport {
        dgp: spec.id,
        n: spec.n,
        r_n: spec.r_n,
        n_mc,
        n_bootstrap,
        seed: config.seed,
        alpha: config.alpha,
        rows,
        ts: per_rep.iter().map(|r| r.0.clone()).collect(),
        boot: Vec::new(),
        contact_sizes: per_rep.iter().map(|r| r.2.clone()).collect(),
        family_sizes: Vec::new(),
        dataset_redraws: per_rep.iter().map(|r| r.3).sum(),
        bootstrap_redraws: 0,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Rendered Monte Carlo tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Tables {
    pub text: String,
    pub jsonl: String,
}

/// Formats `x` with 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn fmt_tau(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{t}")
    }
}

/// One text row per (report, tau) with one column per measure, plus one JSON
/// record per cell.
pub fn emit_tables(reports: &[McReport]) -> Result<Tables> {
    if reports.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut labels: Vec<String> = Vec::new();
    for r in reports {
        for row in &r.rows {
            if !labels.contains(&row.nu) {
                labels.push(row.nu.clone());
            }
        }
    }
    let mut text = format!("{:<6} {:>6} {:>6}", "dgp", "n", "tau");
    for l in &labels {
        text.push_str(&format!(" {l:>7}"));
    }
    text.push('\n');
    let mut jsonl = String::new();
    for r in reports {
        let mut taus: Vec<f64> = Vec::new();
        for row in &r.rows {
            if !taus.contains(&row.tau) {
                taus.push(row.tau);
            }
        }
        for &tau in &taus {
            text.push_str(&format!("{:<6} {:>6} {:>6}", r.dgp.to_string(), r.n, fmt_tau(tau)));
            for l in &labels {
                match r.rows.iter().find(|row| row.tau == tau && &row.nu == l) {
                    Some(row) => text.push_str(&format!(" {:>7.3}", row.rate)),
                    None => text.push_str(&format!(" {:>7}", "-")),
                }
            }
            text.push('\n');
        }
        for row in &r.rows {
            let xi = match row.xi_spec.strip_prefix("dirac:") {
                Some(x) => fmt_full(x.parse().unwrap_or(f64::NAN)),
                None => "null".to_string(),
            };
            let tau = if row.tau.is_finite() { fmt_full(row.tau) } else { "null".into() };
            jsonl.push_str(&format!(
                "{{\"dgp\":\"{}\",\"n\":{},\"r_n\":{},\"tau\":{},\"nu\":{},\"xi\":{},\"rate\":{},\"critical_value\":{},\"n_mc\":{},\"seed\":{}}}\n",
                r.dgp,
                r.n,
                fmt_full(r.r_n),
                tau,
                serde_json::to_string(&row.xi_spec).expect("string"),
                xi,
                fmt_full(row.rate),
                fmt_full(row.critical_value),
                r.n_mc,
                r.seed
            ));
        }
    }
    Ok(Tables { text, jsonl })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big<F: Fn(&mut rand_chacha::ChaCha8Rng) -> Dataset>(f: F) -> Dataset {
        f(&mut replication_rng(2024, 0))
    }

    #[test]
    fn null_marginals() {
        let d = big(|r| gen_null(100_000, r));
        let n = d.len() as f64;
        let p2 = d.d().iter().filter(|&&x| x == 2.0).count() as f64 / n;
        assert!((p2 - 0.33).abs() < 0.02);
        let (s, c) = d.y().iter().zip(d.d()).filter(|(_, &x)| x == 2.0).fold((0.0, 0.0), |a, (y, _)| (a.0 + y, a.1 + 1.0));
        assert!((s / c - 2.0).abs() < 0.05);
        let pz = (0..d.len()).filter(|&i| d.z(i)[0] == 1).count() as f64 / n;
        assert!((pz - 0.5).abs() < 0.01);
    }

    #[test]
    fn p1_shifted_outcome_at_origin() {
        let d = big(|r| gen_power(DgpId::P1, 100_000, 0.5, r).unwrap());
        let ys: Vec<f64> = (0..d.len()).filter(|&i| d.z(i) == [0, 0] && d.d()[i] == 2.0).map(|i| d.y()[i]).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((mean + 0.7).abs() < 0.05, "{mean}");
    }

    #[test]
    fn p4_mixture_mean_zero() {
        let d = big(|r| gen_power(DgpId::P4, 100_000, 0.5, r).unwrap());
        let ys: Vec<f64> = (0..d.len()).filter(|&i| d.z(i) == [0, 0] && d.d()[i] == 2.0).map(|i| d.y()[i]).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn p5_defiance_at_origin() {
        let d = big(|r| gen_power(DgpId::P5, 100_000, 0.5, r).unwrap());
        let share = |cell: [i64; 2]| {
            let idx: Vec<usize> = (0..d.len()).filter(|&i| d.z(i) == cell).collect();
            idx.iter().filter(|&&i| d.d()[i] == 2.0).count() as f64 / idx.len() as f64
        };
        assert!((share([0, 0]) - 0.6).abs() < 0.015);
        assert!((share([0, 1]) - 0.33).abs() < 0.015);
        // P(D <= 1 | (0,0)) = 0.4 < P(D <= 1 | (0,1)) = 0.67 violates the ordering
        assert!(share([0, 0]) > share([0, 1]));
    }

    #[test]
    fn p6_defiance_at_second_cell() {
        let d = big(|r| gen_power(DgpId::P6, 50_000, 0.5, r).unwrap());
        let share = |cell: [i64; 2]| {
            let idx: Vec<usize> = (0..d.len()).filter(|&i| d.z(i) == cell).collect();
            idx.iter().filter(|&&i| d.d()[i] == 2.0).count() as f64 / idx.len() as f64
        };
        assert!((share([0, 1]) - 0.6).abs() < 0.02);
        assert!((share([1, 1]) - 0.33).abs() < 0.02);
    }

    #[test]
    fn dgp_names() {
        assert_eq!("p5".parse::<DgpId>().unwrap(), DgpId::P5);
        assert_eq!("NULL".parse::<DgpId>().unwrap(), DgpId::Null);
        assert!(matches!("p9".parse::<DgpId>(), Err(Error::UnknownDgp(_))));
        for id in DgpId::ALL {
            assert_eq!(id.to_string().parse::<DgpId>().unwrap(), id);
        }
    }

    #[test]
    fn empty_report_list() {
        assert!(matches!(emit_tables(&[]), Err(Error::EmptyReport)));
    }
}
