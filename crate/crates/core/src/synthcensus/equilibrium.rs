use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DAMPING: f64 = 0.5;
const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;

/// Solved CES-Cournot market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumMarket {
    pub costs: Vec<f64>,
    pub eps: f64,
    pub shares: Vec<f64>,
    /// Prices relative to the market's CES price index.
    pub prices: Vec<f64>,
    pub markups: Vec<f64>,
    pub iterations: usize,
    /// max |s − T(s)| at the returned shares.
    pub residual: f64,
}

fn markup(s: f64, eps: f64) -> f64 {
    eps / (eps - 1.0) / (1.0 - s)
}

/// CES share map: s_i = p_i^{1−ε} / Σ p_k^{1−ε}, with each price set at the
/// firm's Cournot markup over cost.
///
/// Written as 1 / Σ (p_k/p_i)^{1−ε} so symmetric firms get exactly 1/N.
fn share_map(shares: &[f64], costs: &[f64], eps: f64) -> Vec<f64> {
    let prices: Vec<f64> = shares.iter().zip(costs).map(|(&s, &c)| markup(s, eps) * c).collect();
    prices
        .iter()
        .map(|pi| 1.0 / prices.iter().map(|pk| (pk / pi).powf(1.0 - eps)).sum::<f64>())
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Damping that keeps the iteration monotone at `shares`.
///
/// The share map's Jacobian is (1 − ε)(diag(s) − ssᵀ)·diag(1/(1 − s)),
/// whose eigenvalues are real and lie in [−(ε − 1)·max sᵢ/(1 − sᵢ), 0].
/// A step of 1/(1 + (ε − 1)·max sᵢ/(1 − sᵢ)) maps all of them into [0, 1).
fn damping(shares: &[f64], eps: f64) -> f64 {
    let r = shares.iter().map(|s| s / (1.0 - s)).fold(0.0, f64::max);
    DAMPING.min(1.0 / (1.0 + (eps - 1.0) * r))
}

/// Damped fixed-point iteration from the symmetric point.
///
/// Damping is 0.5 unless the local slope bound calls for less; a fixed 0.5
/// cycles once the slope passes −3, which happens from ε ≈ 4 on. Converged
/// when the undamped step |T(s) − s| is below the tolerance.
pub fn solve_cournot_market(costs: &[f64], eps: f64) -> Result<EquilibriumMarket> {
    if costs.len() < 2 {
        return Err(Error::InvalidArgument("equilibrium needs at least two firms".into()));
    }
    if costs.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidArgument("costs must be positive and finite".into()));
    }
    if !(eps > 1.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("elasticity {eps} must exceed 1")));
    }
    let n = costs.len();
    let mut shares = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let target = share_map(&shares, costs, eps);
        let step = max_abs_diff(&target, &shares);
        if step < TOLERANCE {
            break;
        }
        if !step.is_finite() || iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                residual: step,
            });
        }
        let d = damping(&shares, eps);
        shares = shares.iter().zip(&target).map(|(s, t)| (1.0 - d) * s + d * t).collect();
    }
    let residual = max_abs_diff(&shares, &share_map(&shares, costs, eps));
    let markups: Vec<f64> = shares.iter().map(|&s| markup(s, eps)).collect();
    let raw: Vec<f64> = markups.iter().zip(costs).map(|(m, c)| m * c).collect();
    let index = raw.iter().map(|p| p.powf(1.0 - eps)).sum::<f64>().powf(1.0 / (1.0 - eps));
    Ok(EquilibriumMarket {
        costs: costs.to_vec(),
        eps,
        prices: raw.iter().map(|p| p / index).collect(),
        shares,
        markups,
        iterations,
        residual,
    })
}

/// Solves independent markets in parallel; results keep input order.
pub fn solve_cournot_markets(markets: &[Vec<f64>], eps: f64) -> Result<Vec<EquilibriumMarket>> {
    markets.par_iter().map(|c| solve_cournot_market(c, eps)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair() {
        let m = solve_cournot_market(&[1.0, 1.0], 3.0).unwrap();
        assert_eq!(m.shares, vec![0.5, 0.5]);
        assert_eq!(m.markups, vec![3.0, 3.0]);
    }

    #[test]
    fn symmetric_n_is_exact() {
        for n in 2..12 {
            let m = solve_cournot_market(&vec![2.5; n], 4.0).unwrap();
            let s = 1.0 / n as f64;
            assert!(m.shares.iter().all(|&x| x == s), "n = {n}");
            assert!(m.markups.iter().all(|&x| x == 4.0 / 3.0 / (1.0 - s)));
        }
    }

    #[test]
    fn cheaper_firm_is_larger() {
        let m = solve_cournot_market(&[1.0, 2.0], 3.0).unwrap();
        assert!(m.shares[0] > m.shares[1]);
        assert!(m.markups[0] > m.markups[1]);
        assert!(m.residual < 1e-9);
        assert!(((m.shares[0] + m.shares[1]) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalised_prices_reproduce_shares() {
        let m = solve_cournot_market(&[1.0, 1.3, 0.8, 2.0], 2.5).unwrap();
        for (p, s) in m.prices.iter().zip(&m.shares) {
            assert!((p.powf(1.0 - m.eps) - s).abs() < 1e-9);
        }
    }

    #[test]
    fn converges_at_high_elasticity() {
        let m = solve_cournot_market(&[1.0, 1.4, 0.7], 9.0).unwrap();
        assert!(m.residual < 1e-9);
        assert!(m.shares[2] > m.shares[0] && m.shares[0] > m.shares[1]);
    }

    #[test]
    fn converges_with_a_dominant_low_cost_firm() {
        let costs = [0.5573327670794282, 0.9521886083777336, 1.2144074823685722, 1.1203778971025127, 1.1438959583408779, 0.6671629341830546];
        let m = solve_cournot_market(&costs, 6.768205976036261).unwrap();
        assert!(m.residual < 1e-9);
        let m = solve_cournot_market(&[0.5, 2.0, 2.0, 2.0], 8.0).unwrap();
        assert!(m.residual < 1e-9);
        assert_eq!(m.shares[1], m.shares[3]);
        assert!(m.shares[0] > 0.7 && m.shares[0] < 0.71);
    }

    #[test]
    fn invalid_inputs() {
        assert!(solve_cournot_market(&[1.0], 3.0).is_err());
        assert!(solve_cournot_market(&[1.0, 0.0], 3.0).is_err());
        assert!(solve_cournot_market(&[1.0, 1.0], 1.0).is_err());
    }
}
