//! Shape-preserving piecewise cubic Hermite interpolation (Fritsch–Carlson).
//!
//! Node slopes are the weighted harmonic mean of the adjacent secants in the
//! interior and a one-sided three-point estimate at the ends. Slopes are zero
//! wherever the data has a local extremum, so monotone data yields a monotone
//! interpolant on every interval.

use crate::error::{Error, Result};

/// One cubic piece on `[t0, t1]`, evaluated in the Hermite basis so the end
/// values and slopes are reproduced exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicHermitePiece {
    pub t0: f64,
    pub t1: f64,
    pub value0: f64,
    pub value1: f64,
    pub slope0: f64,
    pub slope1: f64,
    coeffs: [f64; 4],
}

impl CubicHermitePiece {
    pub fn new(t0: f64, t1: f64, value0: f64, value1: f64, slope0: f64, slope1: f64) -> Self {
        let h = t1 - t0;
        let secant = (value1 - value0) / h;
        let c2 = (3.0 * secant - 2.0 * slope0 - slope1) / h;
        let c3 = (slope0 + slope1 - 2.0 * secant) / (h * h);
        Self {
            t0,
            t1,
            value0,
            value1,
            slope0,
            slope1,
            coeffs: [value0, slope0, c2, c3],
        }
    }

    /// Expanded form about `t0`: `p(s) = c[0] + c[1] s + c[2] s^2 + c[3] s^3`
    /// with `s = t - t0`.
    pub fn coefficients(&self) -> [f64; 4] {
        self.coeffs
    }

    /// Value and first two derivatives at `t` (not range-checked).
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let h = self.t1 - self.t0;
        let u = (t - self.t0) / h;
        let (u2, u3) = (u * u, u * u * u);
        let rise = self.value1 - self.value0;
        let value = if u == 1.0 {
            self.value1
        } else {
            self.value0 + rise * (3.0 * u2 - 2.0 * u3) + h * (self.slope0 * (u3 - 2.0 * u2 + u) + self.slope1 * (u3 - u2))
        };
        let d1 = (6.0 * u - 6.0 * u2) * rise / h
            + self.slope0 * (3.0 * u2 - 4.0 * u + 1.0)
            + self.slope1 * (3.0 * u2 - 2.0 * u);
        let d2 = ((6.0 - 12.0 * u) * rise / h + self.slope0 * (6.0 * u - 4.0) + self.slope1 * (6.0 * u - 2.0)) / h;
        (value, d1, d2)
    }
}

/// Monotone piecewise cubic Hermite interpolant of scalar data.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    pieces: Vec<CubicHermitePiece>,
}

/// Build a monotone cubic Hermite interpolant through `(t, value)` nodes.
pub fn build_pchip(nodes: &[(f64, f64)]) -> Result<Pchip> {
    if nodes.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: nodes.len(),
        });
    }
    for &(t, v) in nodes {
        if !t.is_finite() {
            return Err(Error::InvalidValue {
                what: "knot parameter",
                value: t,
            });
        }
        if !v.is_finite() {
            return Err(Error::InvalidValue {
                what: "node value",
                value: v,
            });
        }
    }
    for (i, w) in nodes.windows(2).enumerate() {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidKnots { index: i + 1 });
        }
    }

    let knots: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let values: Vec<f64> = nodes.iter().map(|n| n.1).collect();
    let slopes = fritsch_carlson_slopes(&knots, &values);
    let pieces = (0..knots.len() - 1)
        .map(|i| {
            CubicHermitePiece::new(
                knots[i],
                knots[i + 1],
                values[i],
                values[i + 1],
                slopes[i],
                slopes[i + 1],
            )
        })
        .collect();

    Ok(Pchip {
        knots,
        values,
        slopes,
        pieces,
    })
}

fn fritsch_carlson_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let secant: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    if n == 2 {
        return vec![secant[0]; 2];
    }

    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (s0, s1) = (secant[i - 1], secant[i]);
        if s0 * s1 <= 0.0 {
            continue;
        }
        let w1 = 2.0 * h[i] + h[i - 1];
        let w2 = h[i] + 2.0 * h[i - 1];
        d[i] = (w1 + w2) / (w1 / s0 + w2 / s1);
    }
    d[0] = end_slope(h[0], h[1], secant[0], secant[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], secant[n - 2], secant[n - 3]);
    d
}

// Non-centered three-point estimate, limited so it cannot create overshoot.
fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d * s0 <= 0.0 {
        0.0
    } else if s0 * s1 < 0.0 && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

impl Pchip {
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn pieces(&self) -> &[CubicHermitePiece] {
        &self.pieces
    }

    /// Value, first and second derivative at `t`.
    ///
    /// At an interior knot the value and slope are the node data exactly and
    /// the second derivative is taken from the piece on the left.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (min, max) = self.domain();
        if !(t >= min && t <= max) {
            return Err(Error::OutOfDomain { t, min, max });
        }
        // index of the first knot strictly greater than t
        let upper = self.knots.partition_point(|&k| k <= t);
        if upper == 0 {
            unreachable!("t >= min was checked");
        }
        let node = upper - 1;
        if self.knots[node] == t {
            let left = if node == 0 { 0 } else { node - 1 };
            let (_, _, d2) = self.pieces[left].eval(t);
            return Ok((self.values[node], self.slopes[node], d2));
        }
        Ok(self.pieces[node.min(self.pieces.len() - 1)].eval(t))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.eval(t).map(|(v, _, _)| v)
    }
}
