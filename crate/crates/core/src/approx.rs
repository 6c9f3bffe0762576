//! Chebyshev approximation of activation functions.
//!
//! A continuous function on `[a, b]` is pulled back to `[-1, 1]` with the
//! affine map `x = (2z - (a + b)) / (b - a)`, expanded in Chebyshev
//! polynomials of the first kind, and finally re-expressed as an ordinary
//! polynomial in `z` so that it can be evaluated with additions and
//! multiplications only.
//!
//! Series follow the halved-constant convention
//! `f(x) ≈ c₀/2 + Σ_{k≥1} c_k T_k(x)` with
//! `c_k = (2/π) ∫ f(x) T_k(x) / √(1 - x²) dx`. The integral is evaluated with
//! Chebyshev–Gauss quadrature; with exactly `degree + 1` nodes this coincides
//! with polynomial interpolation at the Chebyshev nodes, which is the default.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

/// Largest degree accepted by [`ChebyshevSeries::to_monomial`].
pub const MAX_MONOMIAL_DEGREE: usize = 16;

/// Number of points used for max-error reports.
pub const REPORT_GRID_POINTS: usize = 1001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("invalid interval [{lo}, {hi}]: bounds must be finite with lo < hi")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("{nodes} quadrature nodes cannot resolve a degree-{degree} series (need at least {})", degree + 1)]
    TooFewNodes { nodes: usize, degree: usize },
    #[error("monomial conversion of degree {degree} is ill-conditioned (max {max})")]
    DegreeTooHigh { degree: usize, max: usize },
    #[error("error report needs at least one grid point")]
    EmptyGrid,
    #[error("a series needs at least one coefficient")]
    NoCoefficients,
    #[error("coefficient csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// A closed interval `[lo, hi]` with finite bounds and `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ApproxError> {
        if lo.is_finite() && hi.is_finite() && lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(ApproxError::InvalidInterval { lo, hi })
        }
    }

    /// `[-r, r]`.
    pub fn symmetric(r: f64) -> Result<Self, ApproxError> {
        Self::new(-r, r)
    }

    pub fn unit() -> Self {
        Self { lo: -1.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }

    /// Maps `z ∈ [lo, hi]` onto `x ∈ [-1, 1]`.
    pub fn to_unit(&self, z: f64) -> f64 {
        (2.0 * z - (self.lo + self.hi)) / (self.hi - self.lo)
    }

    /// Inverse of [`Interval::to_unit`].
    pub fn from_unit(&self, x: f64) -> f64 {
        0.5 * (self.lo + self.hi) + 0.5 * (self.hi - self.lo) * x
    }

    /// `points` equispaced abscissae including both endpoints.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![0.5 * (self.lo + self.hi)],
            _ => {
                let step = (self.hi - self.lo) / (points - 1) as f64;
                (0..points)
                    .map(|i| {
                        if i == points - 1 {
                            self.hi
                        } else {
                            self.lo + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

/// `T_n(x)` through the three-term recurrence `T_{n+1} = 2x T_n - T_{n-1}`.
pub fn chebyshev_t(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for _ in 1..n {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Anything that can be evaluated pointwise on its interval of validity.
pub trait Approximant {
    fn interval(&self) -> Interval;

    /// Raw evaluation; points outside the interval are computed anyway.
    fn value(&self, z: f64) -> f64;

    /// Evaluation together with an extrapolation flag.
    fn evaluate(&self, z: f64) -> Evaluation {
        Evaluation {
            value: self.value(z),
            extrapolated: !self.interval().contains(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub extrapolated: bool,
}

/// Chebyshev expansion `c₀/2 + Σ c_k T_k(x)` of a function on `interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries {
    coeffs: Vec<f64>,
    interval: Interval,
}

impl ChebyshevSeries {
    pub fn new(coeffs: Vec<f64>, interval: Interval) -> Result<Self, ApproxError> {
        if coeffs.is_empty() {
            return Err(ApproxError::NoCoefficients);
        }
        Ok(Self { coeffs, interval })
    }

    /// Interpolating fit at the `degree + 1` Chebyshev nodes of `interval`.
    pub fn fit<F: Fn(f64) -> f64>(
        f: F,
        degree: usize,
        interval: Interval,
    ) -> Result<Self, ApproxError> {
        fit_chebyshev(f, degree, interval, degree + 1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Expands the series into ascending powers of the original variable.
    pub fn to_monomial(&self) -> Result<MonomialPoly, ApproxError> {
        let degree = self.degree();
        if degree > MAX_MONOMIAL_DEGREE {
            return Err(ApproxError::DegreeTooHigh {
                degree,
                max: MAX_MONOMIAL_DEGREE,
            });
        }
        // Power-basis coefficients in x of c₀/2 + Σ c_k T_k(x).
        let mut in_x = vec![0.0; degree + 1];
        let mut t_prev = vec![1.0];
        let mut t_cur = vec![0.0, 1.0];
        in_x[0] += 0.5 * self.coeffs[0];
        for (k, &c) in self.coeffs.iter().enumerate().skip(1) {
            if k > 1 {
                let mut next = vec![0.0; k + 1];
                for (i, &a) in t_cur.iter().enumerate() {
                    next[i + 1] += 2.0 * a;
                }
                for (i, &a) in t_prev.iter().enumerate() {
                    next[i] -= a;
                }
                t_prev = std::mem::replace(&mut t_cur, next);
            }
            for (i, &a) in t_cur.iter().enumerate() {
                in_x[i] += c * a;
            }
        }
        // Substitute x = scale·z + shift by Horner composition.
        let (lo, hi) = (self.interval.lo, self.interval.hi);
        let scale = 2.0 / (hi - lo);
        let shift = -(lo + hi) / (hi - lo);
        let mut in_z = vec![0.0; degree + 1];
        for &a in in_x.iter().rev() {
            let mut next = vec![0.0; degree + 1];
            for (i, &p) in in_z.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                next[i] += p * shift;
                if i + 1 <= degree {
                    next[i + 1] += p * scale;
                }
            }
            next[0] += a;
            in_z = next;
        }
        Ok(MonomialPoly {
            coeffs: in_z,
            interval: self.interval,
        })
    }
}

impl Approximant for ChebyshevSeries {
    fn interval(&self) -> Interval {
        self.interval
    }

    /// Clenshaw summation.
    fn value(&self, z: f64) -> f64 {
        let x = self.interval.to_unit(z);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + 0.5 * self.coeffs[0]
    }
}

/// Fits a Chebyshev series of `degree` to `f` on `interval` using `nodes`
/// Chebyshev–Gauss quadrature points.
///
/// `nodes == degree + 1` interpolates `f` at the Chebyshev nodes; larger node
/// counts converge to the truncated Chebyshev expansion.
pub fn fit_chebyshev<F: Fn(f64) -> f64>(
    f: F,
    degree: usize,
    interval: Interval,
    nodes: usize,
) -> Result<ChebyshevSeries, ApproxError> {
    if nodes < degree + 1 {
        return Err(ApproxError::TooFewNodes { nodes, degree });
    }
    let thetas: Vec<f64> = (0..nodes)
        .map(|j| PI * (j as f64 + 0.5) / nodes as f64)
        .collect();
    let samples: Vec<f64> = thetas
        .iter()
        .map(|&th| f(interval.from_unit(th.cos())))
        .collect();
    let coeffs = (0..=degree)
        .map(|k| {
            let sum: f64 = thetas
                .iter()
                .zip(&samples)
                .map(|(&th, &fx)| fx * (k as f64 * th).cos())
                .sum();
            2.0 * sum / nodes as f64
        })
        .collect();
    ChebyshevSeries::new(coeffs, interval)
}

/// Ordinary polynomial `Σ a_i z^i` valid on `interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialPoly {
    coeffs: Vec<f64>,
    interval: Interval,
}

impl MonomialPoly {
    pub fn new(coeffs: Vec<f64>, interval: Interval) -> Result<Self, ApproxError> {
        if coeffs.is_empty() {
            return Err(ApproxError::NoCoefficients);
        }
        Ok(Self { coeffs, interval })
    }

    /// The identity `p(z) = z`.
    pub fn identity(interval: Interval) -> Self {
        Self {
            coeffs: vec![0.0, 1.0],
            interval,
        }
    }

    /// Ascending-degree coefficients.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Renders the coefficient table as CSV (`degree,interval_lo,interval_hi,k,monomial_coeff`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("degree,interval_lo,interval_hi,k,monomial_coeff\n");
        for (k, a) in self.coeffs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.degree(),
                sci17(self.interval.lo),
                sci17(self.interval.hi),
                k,
                sci17(*a)
            );
        }
        out
    }
}

impl MonomialPoly {
    /// Parses the output of [`MonomialPoly::to_csv`]. Rows may come in any order
    /// but must cover `k = 0..=degree` exactly once on one interval.
    pub fn from_csv(text: &str) -> Result<Self, ApproxError> {
        let err = |line: usize, reason: &str| ApproxError::Csv { line, reason: reason.into() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == "degree,interval_lo,interval_hi,k,monomial_coeff" => {}
            _ => return Err(err(1, "missing header")),
        }
        let mut rows: Vec<(usize, f64, f64, usize, f64)> = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 5 {
                return Err(err(i + 1, "expected 5 fields"));
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(i + 1, "bad number"));
            let int = |s: &str| s.trim().parse::<usize>().map_err(|_| err(i + 1, "bad integer"));
            rows.push((int(f[0])?, num(f[1])?, num(f[2])?, int(f[3])?, num(f[4])?));
        }
        let Some(&(degree, lo, hi, _, _)) = rows.first() else {
            return Err(ApproxError::NoCoefficients);
        };
        let mut coeffs = vec![None; degree + 1];
        for (n, &(d, l, h, k, a)) in rows.iter().enumerate() {
            if d != degree || l != lo || h != hi {
                return Err(err(n + 2, "degree or interval differs from the first row"));
            }
            match coeffs.get_mut(k) {
                Some(slot @ None) => *slot = Some(a),
                Some(Some(_)) => return Err(err(n + 2, "duplicate k")),
                None => return Err(err(n + 2, "k exceeds the degree")),
            }
        }
        let coeffs = coeffs
            .into_iter()
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| err(0, "missing coefficient rows"))?;
        Self::new(coeffs, Interval::new(lo, hi)?)
    }
}

impl Approximant for MonomialPoly {
    fn interval(&self) -> Interval {
        self.interval
    }

    /// Horner evaluation.
    fn value(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * z + a)
    }
}

/// One row of an [`ErrorReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub x: f64,
    pub f: f64,
    pub p: f64,
    /// `p - f`.
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub max_abs_error: f64,
}

impl ErrorReport {
    /// CSV with header `x,f,p,diff`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,f,p,diff\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                sci17(r.x),
                sci17(r.f),
                sci17(r.p),
                sci17(r.diff)
            );
        }
        out
    }

    /// Number of grid points that fell outside the approximant's interval.
    pub fn rows_outside(&self, interval: Interval) -> usize {
        self.rows.iter().filter(|r| !interval.contains(r.x)).count()
    }
}

pub fn error_report<F, P>(f: F, poly: &P, grid: &[f64]) -> Result<ErrorReport, ApproxError>
where
    F: Fn(f64) -> f64,
    P: Approximant + ?Sized,
{
    if grid.is_empty() {
        return Err(ApproxError::EmptyGrid);
    }
    let rows: Vec<ErrorRow> = grid
        .iter()
        .map(|&x| {
            let fx = f(x);
            let px = poly.value(x);
            ErrorRow {
                x,
                f: fx,
                p: px,
                diff: px - fx,
            }
        })
        .collect();
    let max_abs_error = rows.iter().map(|r| r.diff.abs()).fold(0.0, f64::max);
    Ok(ErrorReport {
        rows,
        max_abs_error,
    })
}

/// Max `|p - f|` over the standard 1001-point grid of the approximant's interval.
pub fn max_error<F, P>(f: F, poly: &P) -> f64
where
    F: Fn(f64) -> f64,
    P: Approximant + ?Sized,
{
    let grid = poly.interval().grid(REPORT_GRID_POINTS);
    error_report(f, poly, &grid)
        .map(|r| r.max_abs_error)
        .unwrap_or(f64::NAN)
}

/// 17 significant digits, enough to round-trip an `f64`.
fn sci17(v: f64) -> String {
    format!("{v:.16e}")
}
