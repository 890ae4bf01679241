//! Finite sums of exponentials `sum_i c_i exp(k_i t)`: evaluation, real
//! roots, and maximization on an interval.
//!
//! Roots are isolated recursively. Multiplying by `exp(-k_1 t)` leaves the
//! roots unchanged and its derivative has one term fewer, so the critical
//! points of the scaled sum split the interval into monotone pieces.

use crate::roots::bisect;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    terms: Vec<(f64, f64)>,
}

impl ExpSum {
    /// Terms are `(coefficient, rate)` pairs. Equal rates are merged and zero
    /// coefficients dropped.
    pub fn new(terms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (c, k) in terms {
            let tol = 1e-14 * k.abs().max(1.0);
            match merged.iter_mut().find(|(_, kk)| (k - *kk).abs() <= tol) {
                Some(slot) => slot.0 += c,
                None => merged.push((c, k)),
            }
        }
        merged.retain(|(c, _)| *c != 0.0);
        merged.sort_by(|a, b| a.1.total_cmp(&b.1));
        ExpSum { terms: merged }
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|(c, k)| c * (k * t).exp()).sum()
    }

    /// `exp(-k t) * f(t)` for the largest rate `k`; same sign as `f`, no overflow.
    fn eval_scaled(&self, t: f64) -> f64 {
        let kmax = self.terms.last().map_or(0.0, |x| x.1);
        self.terms
            .iter()
            .map(|(c, k)| c * ((k - kmax) * t).exp())
            .sum()
    }

    pub fn derivative(&self) -> ExpSum {
        ExpSum::new(self.terms.iter().map(|(c, k)| (c * k, *k)))
    }

    /// Real roots in `[a, b]` at which the sum changes sign, in increasing order.
    pub fn roots(&self, a: f64, b: f64) -> Vec<f64> {
        if self.terms.len() <= 1 || !(a < b) {
            return Vec::new();
        }
        let k1 = self.terms[0].1;
        let reduced = ExpSum::new(
            self.terms[1..]
                .iter()
                .map(|(c, k)| (c * (k - k1), k - k1)),
        );
        let mut pts = vec![a];
        pts.extend(reduced.roots(a, b));
        pts.push(b);
        let mut out: Vec<f64> = Vec::new();
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if !(lo < hi) {
                continue;
            }
            let (flo, fhi) = (self.eval_scaled(lo), self.eval_scaled(hi));
            if flo == 0.0 && lo > a {
                push_unique(&mut out, lo);
            }
            if flo != 0.0 && fhi != 0.0 && flo.signum() != fhi.signum() {
                if let Ok(x) = bisect(|t| self.eval_scaled(t), lo, hi, 0.0) {
                    push_unique(&mut out, x);
                }
            }
        }
        out
    }

    /// Maximum on `[a, b]`. Values within `tie_tol` of the maximum count as
    /// ties and the largest such point is returned.
    pub fn maximize(&self, a: f64, b: f64, tie_tol: f64) -> (f64, f64) {
        let mut cands = vec![a];
        cands.extend(self.derivative().roots(a, b));
        cands.push(b);
        let vals: Vec<f64> = cands.iter().map(|&t| self.eval(t)).collect();
        let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let idx = (0..cands.len())
            .rev()
            .find(|&i| vals[i] >= best - tie_tol)
            .unwrap_or(0);
        (cands[idx], vals[idx])
    }
}

fn push_unique(out: &mut Vec<f64>, x: f64) {
    if out.last().is_none_or(|&l| l < x) {
        out.push(x);
    }
}
