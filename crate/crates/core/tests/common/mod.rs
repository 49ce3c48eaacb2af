//! Straight-line reference computations used by the integration tests. Nothing
//! here calls into the moment engine; every quantity is a literal loop over
//! observations.

#![allow(dead_code)]

use ivmono::{Dataset, XiMeasure};
use rand::Rng;

pub type Row = (f64, f64, [i64; 2]);

pub const CELLS: [[i64; 2]; 4] = [[0, 0], [0, 1], [1, 0], [1, 1]];

pub fn to_dataset(rows: &[Row]) -> Dataset {
    Dataset::new(
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2.to_vec()).collect(),
    )
    .unwrap()
}

pub fn from_dataset(data: &Dataset) -> Vec<Row> {
    (0..data.len()).map(|i| (data.y()[i], data.d()[i], [data.z(i)[0], data.z(i)[1]])).collect()
}

/// Random small dataset over the binary grid with every cell occupied and at
/// least two treatment values.
pub fn random_rows<R: Rng>(rng: &mut R, n_min: usize, n_max: usize) -> Vec<Row> {
    loop {
        let n = rng.random_range(n_min..=n_max);
        let arms = if rng.random_bool(0.5) { 2 } else { 3 };
        let ties = rng.random_bool(0.5);
        let rows: Vec<Row> = (0..n)
            .map(|_| {
                let y = if ties { rng.random_range(0..4) as f64 } else { rng.random::<f64>() * 4.0 - 2.0 };
                let d = rng.random_range(0..arms) as f64;
                (y, d, CELLS[rng.random_range(0..4)])
            })
            .collect();
        let occupied = CELLS.iter().all(|c| rows.iter().any(|r| &r.2 == c));
        let arms_seen = {
            let mut d: Vec<f64> = rows.iter().map(|r| r.1).collect();
            d.sort_by(f64::total_cmp);
            d.dedup();
            d.len()
        };
        if occupied && arms_seen >= 2 {
            return rows;
        }
    }
}

fn p_hat(rows: &[Row], v: impl Fn(&Row) -> f64) -> f64 {
    let mut s = 0.0;
    for r in rows {
        s += v(r);
    }
    s / rows.len() as f64
}

/// Adjacent pairs of the binary grid, lower cell first, found by scanning all
/// ordered cell pairs.
pub fn brute_pairs() -> Vec<([i64; 2], [i64; 2])> {
    let mut out = Vec::new();
    for a in CELLS {
        for b in CELLS {
            let steps = (b[0] - a[0], b[1] - a[1]);
            if steps == (1, 0) || steps == (0, 1) {
                out.push((a, b));
            }
        }
    }
    out
}

/// Every test function `h` of the interval and threshold classes that can
/// matter on this sample: intervals with endpoints at any observed outcome for
/// both boundary arms, thresholds at every observed treatment value and one
/// below all of them.
pub fn brute_functions(rows: &[Row]) -> Vec<Box<dyn Fn(f64, f64) -> f64>> {
    let mut ys: Vec<f64> = rows.iter().map(|r| r.0).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut ds: Vec<f64> = rows.iter().map(|r| r.1).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    let (d_min, d_max) = (ds[0], ds[ds.len() - 1]);
    let mut hs: Vec<Box<dyn Fn(f64, f64) -> f64>> = Vec::new();
    for (arm, sign) in [(d_max, -1.0), (d_min, 1.0)] {
        for (i, &lo) in ys.iter().enumerate() {
            for &hi in &ys[i..] {
                hs.push(Box::new(move |y, d| if d == arm && lo <= y && y <= hi { sign } else { 0.0 }));
            }
        }
    }
    let below = ds[0] - 1.0;
    for c in std::iter::once(below).chain(ds.iter().copied()) {
        hs.push(Box::new(move |_, d| if d <= c { 1.0 } else { 0.0 }));
    }
    hs
}

pub fn brute_tn(rows: &[Row]) -> f64 {
    let n = rows.len() as f64;
    let mut t = n;
    for c in CELLS {
        t *= p_hat(rows, |r| (r.2 == c) as u8 as f64);
    }
    t
}

/// `(phi, sigma)` of `h` on the pair `(g1, g2)`.
pub fn brute_moments(rows: &[Row], h: &dyn Fn(f64, f64) -> f64, g1: [i64; 2], g2: [i64; 2], t_n: f64) -> (f64, f64) {
    let n = rows.len() as f64;
    let g = |c: [i64; 2]| move |r: &Row| (r.2 == c) as u8 as f64;
    let (pg1, pg2) = (p_hat(rows, g(g1)), p_hat(rows, g(g2)));
    let phg1 = p_hat(rows, |r| h(r.0, r.1) * g(g1)(r));
    let phg2 = p_hat(rows, |r| h(r.0, r.1) * g(g2)(r));
    let ph2g1 = p_hat(rows, |r| h(r.0, r.1).powi(2) * g(g1)(r));
    let ph2g2 = p_hat(rows, |r| h(r.0, r.1).powi(2) * g(g2)(r));
    let phi = phg2 / pg2 - phg1 / pg1;
    let bracket = ph2g2 / pg2.powi(2) - phg2.powi(2) / pg2.powi(3) + ph2g1 / pg1.powi(2) - phg1.powi(2) / pg1.powi(3);
    (phi, (t_n / n * bracket.max(0.0)).sqrt())
}

/// `S_n(xi)` for each atom and the integral against `nu`.
pub fn brute_ts(rows: &[Row], nu: &XiMeasure) -> (Vec<f64>, f64) {
    let t_n = brute_tn(rows);
    let atoms = nu.atoms();
    let mut sups = vec![f64::NEG_INFINITY; atoms.len()];
    for h in brute_functions(rows) {
        for (g1, g2) in brute_pairs() {
            let (phi, sigma) = brute_moments(rows, &*h, g1, g2, t_n);
            for (k, (xi, _)) in atoms.iter().enumerate() {
                sups[k] = sups[k].max(t_n.sqrt() * phi / xi.max(sigma));
            }
        }
    }
    let ts = sups.iter().zip(&atoms).map(|(s, (_, w))| s * w).sum();
    (sups, ts)
}

/// Centered bootstrap statistic over the contact set, from the original and
/// resampled rows.
pub fn brute_bootstrap(rows: &[Row], resample: &[Row], nu: &XiMeasure, tau: f64, xi0: f64) -> f64 {
    let t_n = brute_tn(rows);
    let t_star = brute_tn(resample);
    let atoms = nu.atoms();
    let mut sups = vec![0.0f64; atoms.len()];
    for h in brute_functions(rows) {
        for (g1, g2) in brute_pairs() {
            let (phi, sigma) = brute_moments(rows, &*h, g1, g2, t_n);
            if t_n.sqrt() * (phi / xi0.max(sigma)).abs() > tau {
                continue;
            }
            let (phi_s, sigma_s) = brute_moments(resample, &*h, g1, g2, t_star);
            for (k, (xi, _)) in atoms.iter().enumerate() {
                sups[k] = sups[k].max(t_star.sqrt() * (phi_s - phi) / xi.max(sigma_s));
            }
        }
    }
    sups.iter().zip(&atoms).map(|(s, (_, w))| s * w).sum()
}
