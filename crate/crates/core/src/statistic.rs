//! Variance-weighted sup statistic `S_n(xi)` and its integral over a ξ measure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::XiMeasure;
use crate::moments::MomentTable;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupProfile {
    pub xis: Vec<f64>,
    pub weights: Vec<f64>,
    /// `S_n(xi)` per atom, scaled by `sqrt(T_n)`.
    pub sups: Vec<f64>,
    /// Maximizing candidate per atom; `None` when no candidate is positive and
    /// the sup is attained by an interval containing no observation.
    pub argmax: Vec<Option<usize>>,
    pub ts: f64,
}

/// Sups of `numerators[c] / max(xi, sigma[c])` for each `xi`, floored at zero.
/// Ties go to the lowest candidate id.
pub(crate) fn sups_over(numerators: &[f64], sigma: &[f64], xis: &[f64]) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut best = vec![f64::NEG_INFINITY; xis.len()];
    let mut arg = vec![None; xis.len()];
    for (id, (&num, &s)) in numerators.iter().zip(sigma).enumerate() {
        for (k, &xi) in xis.iter().enumerate() {
            let r = num / xi.max(s);
            if r > best[k] {
                best[k] = r;
                arg[k] = Some(id);
            }
        }
    }
    let mut sups = Vec::with_capacity(xis.len());
    for k in 0..xis.len() {
        if best[k] < 0.0 {
            arg[k] = None;
        }
        sups.push(best[k].max(0.0));
    }
    (sups, arg)
}

/// `sup_c sqrt(T_n) * phi(c) / max(xi, sigma(c))` and a maximizing candidate.
pub fn weighted_sup(table: &MomentTable, xi: f64) -> Result<(f64, Option<usize>)> {
    let profile = profile_at(table, &[xi], &[1.0])?;
    Ok((profile.sups[0], profile.argmax[0]))
}

/// Per-ξ sups and their integral against `nu`.
pub fn ts_statistic(table: &MomentTable, nu: &XiMeasure) -> Result<SupProfile> {
    nu.validate()?;
    let (xis, weights): (Vec<f64>, Vec<f64>) = nu.atoms().into_iter().unzip();
    profile_at(table, &xis, &weights)
}

fn profile_at(table: &MomentTable, xis: &[f64], weights: &[f64]) -> Result<SupProfile> {
    if table.is_empty() {
        return Err(Error::EmptyCandidateSet);
    }
    let root = table.t_n.sqrt();
    let numerators: Vec<f64> = table.phi_hat.iter().map(|p| root * p).collect();
    let (sups, argmax) = sups_over(&numerators, &table.sigma_hat, xis);
    let ts = integrate(&sups, weights);
    Ok(SupProfile { xis: xis.to_vec(), weights: weights.to_vec(), sups, argmax, ts })
}

pub(crate) fn integrate(sups: &[f64], weights: &[f64]) -> f64 {
    sups.iter().zip(weights).map(|(s, w)| s * w).sum()
}
