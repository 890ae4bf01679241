//! The relaxed principal problem on a grid: choose a distribution of
//! `X = exp(-lambda1 T)` on `[0, 1]` minimizing `E X` subject to
//! `E L(X) >= threshold`.
//!
//! With one inequality plus normalization some optimum has at most two
//! support points, so an exhaustive search over grid pairs is exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    /// `(x, probability)` pairs, increasing in `x`.
    pub support: Vec<(f64, f64)>,
    /// Support with neighbouring grid nodes merged into their mean: a pair of
    /// adjacent nodes is the grid's stand-in for one point between them.
    pub effective_support: Vec<(f64, f64)>,
    pub expected_x: f64,
    pub expected_loss: f64,
    pub grid_step: f64,
}

/// Candidate key: objective, then leftmost node, then rightmost node.
#[derive(Debug, Clone, Copy)]
struct Cand {
    cost: f64,
    lo: usize,
    hi: usize,
    /// Probability on `hi`.
    w_hi: f64,
}

impl Cand {
    fn better(self, other: Cand) -> Cand {
        let key = |c: &Cand| (c.cost, c.lo, c.hi);
        let (a, b) = (key(&self), key(&other));
        let ord = a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2));
        if ord.is_le() {
            self
        } else {
            other
        }
    }
}

/// Solves the relaxed problem on the grid `x_i = i / (grid_n - 1)`.
pub fn relaxed_lp<L>(loss: L, threshold: f64, grid_n: usize) -> Result<LpSolution>
where
    L: Fn(f64) -> f64,
{
    if grid_n < 2 {
        return Err(Error::PreconditionViolated(format!(
            "grid needs at least 2 points, got {grid_n}"
        )));
    }
    let step = 1.0 / (grid_n - 1) as f64;
    let xs: Vec<f64> = (0..grid_n).map(|i| i as f64 * step).collect();
    let ls: Vec<f64> = xs.iter().map(|&x| loss(x)).collect();
    if let Some(i) = ls.iter().position(|l| !l.is_finite()) {
        return Err(Error::PreconditionViolated(format!(
            "loss is not finite at x = {}",
            xs[i]
        )));
    }
    let max_loss = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_loss < threshold {
        return Err(Error::InfeasibleConstraint(format!(
            "largest loss on the grid is {max_loss}, below the threshold {threshold}"
        )));
    }

    let best = (0..grid_n)
        .into_par_iter()
        .filter_map(|i| {
            let mut best: Option<Cand> = None;
            let mut offer = |c: Cand| {
                best = Some(best.map_or(c, |b| b.better(c)));
            };
            if ls[i] >= threshold {
                offer(Cand {
                    cost: xs[i],
                    lo: i,
                    hi: i,
                    w_hi: 1.0,
                });
            }
            for j in i + 1..grid_n {
                let (li, lj) = (ls[i], ls[j]);
                // exactly one side strictly below the threshold
                if (li < threshold) == (lj < threshold) {
                    continue;
                }
                let w_hi = (threshold - li) / (lj - li);
                // a side sitting exactly on the threshold is the single-point candidate
                if !(w_hi > 0.0 && w_hi < 1.0) {
                    continue;
                }
                let cost = xs[i] + w_hi * (xs[j] - xs[i]);
                offer(Cand {
                    cost,
                    lo: i,
                    hi: j,
                    w_hi,
                });
            }
            best
        })
        .reduce_with(Cand::better)
        .expect("feasible problem has a candidate");

    let support = if best.lo == best.hi {
        vec![(xs[best.lo], 1.0)]
    } else {
        vec![(xs[best.lo], 1.0 - best.w_hi), (xs[best.hi], best.w_hi)]
    };
    let effective_support = if best.hi == best.lo + 1 {
        vec![(best.cost, 1.0)]
    } else {
        support.clone()
    };
    let expected_loss = if best.lo == best.hi {
        ls[best.lo]
    } else {
        (1.0 - best.w_hi) * ls[best.lo] + best.w_hi * ls[best.hi]
    };
    Ok(LpSolution {
        support,
        effective_support,
        expected_x: best.cost,
        expected_loss,
        grid_step: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_loss_uses_extremes() {
        let sol = relaxed_lp(|x| x * x, 0.5, 1001).unwrap();
        assert_eq!(sol.support.len(), 2);
        assert_eq!(sol.support[0], (0.0, 0.5));
        assert_eq!(sol.support[1], (1.0, 0.5));
        assert!((sol.expected_x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn concave_loss_single_point() {
        // 2 sqrt(x) >= 0.75 first at x = 9/64
        let sol = relaxed_lp(|x: f64| 2.0 * x.sqrt(), 0.75, 10_001).unwrap();
        assert_eq!(sol.effective_support.len(), 1);
        assert!((sol.effective_support[0].0 - 9.0 / 64.0).abs() <= sol.grid_step);
    }

    #[test]
    fn linear_loss_binding_objective() {
        let sol = relaxed_lp(|x| x, 0.3, 101).unwrap();
        assert!((sol.expected_x - 0.3).abs() < 1e-12);
        assert!((sol.expected_loss - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unattainable_threshold() {
        assert!(matches!(
            relaxed_lp(|x| x, 1.5, 101),
            Err(Error::InfeasibleConstraint(_))
        ));
    }
}
