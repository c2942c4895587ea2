//! Piecewise polynomials in local coordinates.
//!
//! Piece `i` covers `[knots[i], knots[i + 1]]` and is evaluated in the local
//! variable `u = t - knots[i]`, which keeps the coefficients well scaled on
//! short pieces.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePoly {
    pub knots: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * u + a)
}

fn derive(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(j, &a)| a * j as f64).collect()
}

impl PiecewisePoly {
    pub fn new(knots: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(knots.len(), coeffs.len() + 1);
        debug_assert!(knots.windows(2).all(|w| w[0] <= w[1]));
        Self { knots, coeffs }
    }

    pub fn start(&self) -> f64 {
        self.knots[0]
    }

    pub fn end(&self) -> f64 {
        *self.knots.last().expect("at least one knot")
    }

    fn piece(&self, t: f64) -> usize {
        let n = self.coeffs.len();
        // partition_point gives the number of interior knots <= t
        let k = self.knots[1..n].partition_point(|&x| x <= t);
        k.min(n - 1)
    }

    /// Value and first two derivatives at `t` (extrapolates the end pieces).
    pub fn eval3(&self, t: f64) -> (f64, f64, f64) {
        let i = self.piece(t);
        let c = &self.coeffs[i];
        let u = t - self.knots[i];
        let d1 = derive(c);
        let d2 = derive(&d1);
        (horner(c, u), horner(&d1, u), horner(&d2, u))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.piece(t);
        horner(&self.coeffs[i], t - self.knots[i])
    }

    /// Antiderivative with value `initial` at the first knot, continuous
    /// across every knot.
    pub fn integrate(&self, initial: f64) -> PiecewisePoly {
        let mut out = Vec::with_capacity(self.coeffs.len());
        let mut acc = initial;
        for (i, c) in self.coeffs.iter().enumerate() {
            let mut ic = Vec::with_capacity(c.len() + 1);
            ic.push(acc);
            ic.extend(c.iter().enumerate().map(|(j, &a)| a / (j + 1) as f64));
            let width = self.knots[i + 1] - self.knots[i];
            acc = horner(&ic, width);
            out.push(ic);
        }
        PiecewisePoly::new(self.knots.clone(), out)
    }
}
