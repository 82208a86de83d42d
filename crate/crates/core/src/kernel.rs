//! Communication weights ψ(r).
//!
//! Every kernel is nonnegative, non-increasing and Lipschitz on `[0, ∞)`.
//! The two algebraic families are kept separate: `(1+r)^-β` and `(1+r²)^-β`
//! decay at different rates for the same `β`, and the condition checkers
//! take the kernel exactly as given.

use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta, beta_reg};

use crate::error::{FlockError, Result};

/// Which power of ψ is integrated by [`Kernel::tail_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Power {
    One,
    Two,
}

impl Power {
    fn exponent(self) -> f64 {
        match self {
            Power::One => 1.0,
            Power::Two => 2.0,
        }
    }
}

/// Result of an improper integral over `[lower, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailIntegral {
    Finite(f64),
    Divergent,
}

impl TailIntegral {
    pub fn is_divergent(&self) -> bool {
        matches!(self, TailIntegral::Divergent)
    }

    /// `+∞` for a divergent tail.
    pub fn value(&self) -> f64 {
        match *self {
            TailIntegral::Finite(v) => v,
            TailIntegral::Divergent => f64::INFINITY,
        }
    }
}

/// How a tabulated kernel continues past its last sample.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Tail {
    /// Last sample is zero; ψ vanishes beyond the table.
    Zero,
    /// Last two samples are equal and positive.
    Flat,
    /// `ψ(r) = ψ_n (r / r_n)^-p`, fitted through the last two samples.
    Algebraic { p: f64 },
    /// Not enough information to fit a decay law; ψ is held at the last
    /// sample for evaluation but tail integrals are indeterminate.
    Unknown,
}

/// A piecewise-linear, non-increasing sample table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    r: Vec<f64>,
    psi: Vec<f64>,
    tail: Tail,
}

impl Table {
    pub fn new(r: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if r.len() != psi.len() {
            return Err(FlockError::Config(format!(
                "tabulated kernel: {} radii but {} values",
                r.len(),
                psi.len()
            )));
        }
        if r.len() < 2 {
            return Err(FlockError::Config(
                "tabulated kernel needs at least two samples".into(),
            ));
        }
        if r.iter().chain(psi.iter()).any(|v| !v.is_finite()) {
            return Err(FlockError::Config(
                "tabulated kernel samples must be finite".into(),
            ));
        }
        if r[0] != 0.0 {
            return Err(FlockError::Config(
                "tabulated kernel must start at r = 0".into(),
            ));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FlockError::Config(
                "tabulated kernel radii must be strictly increasing".into(),
            ));
        }
        if psi.iter().any(|&p| p < 0.0) {
            return Err(FlockError::Config(
                "tabulated kernel values must be nonnegative".into(),
            ));
        }
        if psi.windows(2).any(|w| w[1] > w[0]) {
            return Err(FlockError::Config(
                "tabulated kernel values must be non-increasing".into(),
            ));
        }
        let n = r.len() - 1;
        let tail = if psi[n] == 0.0 {
            Tail::Zero
        } else if psi[n - 1] == psi[n] {
            Tail::Flat
        } else if r[n - 1] > 0.0 {
            Tail::Algebraic {
                p: (psi[n - 1] / psi[n]).ln() / (r[n] / r[n - 1]).ln(),
            }
        } else {
            Tail::Unknown
        };
        Ok(Table { r, psi, tail })
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    fn last(&self) -> (f64, f64) {
        let n = self.r.len() - 1;
        (self.r[n], self.psi[n])
    }

    fn value(&self, r: f64) -> f64 {
        let (r_n, psi_n) = self.last();
        if r >= r_n {
            return match self.tail {
                Tail::Zero => 0.0,
                Tail::Flat | Tail::Unknown => psi_n,
                Tail::Algebraic { p } => psi_n * (r / r_n).powf(-p),
            };
        }
        // first index with r[k] > r
        let k = self.r.partition_point(|&rk| rk <= r);
        let (r0, r1) = (self.r[k - 1], self.r[k]);
        let (p0, p1) = (self.psi[k - 1], self.psi[k]);
        p0 + (p1 - p0) * (r - r0) / (r1 - r0)
    }

    /// Exact ∫_a^b ψ^k over the table range (`b ≤ r_n`).
    fn table_integral(&self, a: f64, b: f64, power: Power) -> f64 {
        let mut total = 0.0;
        for w in 0..self.r.len() - 1 {
            let lo = self.r[w].max(a);
            let hi = self.r[w + 1].min(b);
            if hi <= lo {
                continue;
            }
            let (y0, y1) = (self.value(lo), self.value(hi));
            total += match power {
                Power::One => 0.5 * (y0 + y1) * (hi - lo),
                Power::Two => (y0 * y0 + y0 * y1 + y1 * y1) * (hi - lo) / 3.0,
            };
        }
        total
    }

    /// ∫_a^b ψ^k on the extrapolated region (`a ≥ r_n`), `b` may be infinite.
    fn tail_part(&self, a: f64, b: f64, power: Power) -> Result<TailIntegral> {
        let (r_n, psi_n) = self.last();
        let k = power.exponent();
        match self.tail {
            Tail::Zero => Ok(TailIntegral::Finite(0.0)),
            Tail::Flat | Tail::Unknown if b.is_finite() => {
                Ok(TailIntegral::Finite(psi_n.powf(k) * (b - a)))
            }
            Tail::Flat => Ok(TailIntegral::Divergent),
            Tail::Unknown => Err(FlockError::Indeterminate(
                "tabulated kernel has no resolvable decay law past its last sample".into(),
            )),
            Tail::Algebraic { p } => {
                let e = k * p;
                let scale = psi_n.powf(k) * r_n.powf(e);
                if b.is_infinite() {
                    if e > 1.0 {
                        Ok(TailIntegral::Finite(scale * a.powf(1.0 - e) / (e - 1.0)))
                    } else {
                        Ok(TailIntegral::Divergent)
                    }
                } else if (e - 1.0).abs() < 1e-14 {
                    Ok(TailIntegral::Finite(scale * (b / a).ln()))
                } else {
                    Ok(TailIntegral::Finite(
                        scale * (b.powf(1.0 - e) - a.powf(1.0 - e)) / (1.0 - e),
                    ))
                }
            }
        }
    }

    fn integral(&self, a: f64, b: f64, power: Power) -> Result<TailIntegral> {
        let (r_n, _) = self.last();
        let mut total = 0.0;
        if a < r_n {
            total += self.table_integral(a, b.min(r_n), power);
        }
        if b > r_n {
            match self.tail_part(a.max(r_n), b, power)? {
                TailIntegral::Finite(v) => total += v,
                TailIntegral::Divergent => return Ok(TailIntegral::Divergent),
            }
        }
        Ok(TailIntegral::Finite(total))
    }
}

/// Communication weight.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `ψ(r) = (1 + r)^-β`
    PowerLawPlain { beta: f64 },
    /// `ψ(r) = (1 + r²)^-β`
    PowerLawSquared { beta: f64 },
    /// `ψ(r) = c`
    Constant { c: f64 },
    /// Piecewise-linear interpolation of samples.
    Tabulated(Table),
}

impl Kernel {
    pub fn power_plain(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Kernel::PowerLawPlain { beta })
    }

    pub fn power_squared(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Kernel::PowerLawSquared { beta })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(FlockError::Config(format!(
                "constant kernel needs c > 0, got {c}"
            )));
        }
        Ok(Kernel::Constant { c })
    }

    pub fn tabulated(r: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        Ok(Kernel::Tabulated(Table::new(r, psi)?))
    }

    /// ψ(r), rejecting negative or non-finite distances.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r < 0.0 {
            return Err(FlockError::Domain(format!(
                "kernel evaluated at r = {r}; distances must be >= 0"
            )));
        }
        Ok(self.value(r))
    }

    /// ψ(r) for `r ≥ 0` without the domain check. Used in the pair loops
    /// where `r` is always a Euclidean norm.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        match self {
            Kernel::PowerLawPlain { beta } => {
                if *beta == 2.0 {
                    let a = 1.0 + r;
                    1.0 / (a * a)
                } else {
                    (1.0 + r).powf(-beta)
                }
            }
            Kernel::PowerLawSquared { beta } => (1.0 + r * r).powf(-beta),
            Kernel::Constant { c } => *c,
            Kernel::Tabulated(t) => t.value(r),
        }
    }

    /// Largest value, attained at `r = 0`.
    pub fn max_value(&self) -> f64 {
        self.value(0.0)
    }

    /// True when ψ(r) > 0 for every `r ≥ 0`.
    pub fn is_strictly_positive(&self) -> bool {
        match self {
            Kernel::Tabulated(t) => t.psi.iter().all(|&p| p > 0.0) && t.tail != Tail::Zero,
            _ => true,
        }
    }

    /// Same kernel multiplied by a positive constant.
    pub fn scaled(&self, factor: f64) -> ScaledKernel<'_> {
        ScaledKernel {
            kernel: self,
            factor,
        }
    }

    /// ∫_a^b ψ(s)^k ds for `0 ≤ a ≤ b < ∞`.
    pub fn integral(&self, a: f64, b: f64, power: Power) -> Result<f64> {
        if !(a >= 0.0 && b >= a && b.is_finite()) {
            return Err(FlockError::Domain(format!(
                "integral bounds must satisfy 0 <= a <= b < inf, got [{a}, {b}]"
            )));
        }
        if a == b {
            return Ok(0.0);
        }
        let k = power.exponent();
        let v = match self {
            Kernel::PowerLawPlain { beta } => {
                let e = beta * k;
                if (e - 1.0).abs() < 1e-14 {
                    ((1.0 + b) / (1.0 + a)).ln()
                } else {
                    ((1.0 + b).powf(1.0 - e) - (1.0 + a).powf(1.0 - e)) / (1.0 - e)
                }
            }
            Kernel::PowerLawSquared { beta } => {
                let s = beta * k;
                if s == 0.0 {
                    b - a
                } else if s == 0.5 {
                    b.asinh() - a.asinh()
                } else if s == 1.0 {
                    b.atan() - a.atan()
                } else {
                    integrate_split(|u| (1.0 + u * u).powf(-s), a, b)
                }
            }
            Kernel::Constant { c } => c.powf(k) * (b - a),
            Kernel::Tabulated(t) => t.integral(a, b, power)?.value(),
        };
        Ok(v)
    }

    /// `∫_lower^∞ ψ(scale·r)^k dr`, or [`TailIntegral::Divergent`].
    ///
    /// Closed forms for the algebraic families; the tabulated kernel is
    /// integrated exactly over its table and analytically past it.
    pub fn tail_integral(&self, lower: f64, scale: f64, power: Power) -> Result<TailIntegral> {
        if !(lower >= 0.0 && lower.is_finite()) {
            return Err(FlockError::Domain(format!(
                "tail integral lower bound must be finite and >= 0, got {lower}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(FlockError::Domain(format!(
                "tail integral scale must be positive, got {scale}"
            )));
        }
        let a = scale * lower;
        let k = power.exponent();
        let raw = match self {
            Kernel::PowerLawPlain { beta } => {
                let e = beta * k;
                if e > 1.0 {
                    TailIntegral::Finite((1.0 + a).powf(1.0 - e) / (e - 1.0))
                } else {
                    TailIntegral::Divergent
                }
            }
            Kernel::PowerLawSquared { beta } => {
                let s = beta * k;
                if 2.0 * s > 1.0 {
                    TailIntegral::Finite(squared_tail(s, a))
                } else {
                    TailIntegral::Divergent
                }
            }
            Kernel::Constant { .. } => TailIntegral::Divergent,
            Kernel::Tabulated(t) => t.integral(a, f64::INFINITY, power)?,
        };
        Ok(match raw {
            TailIntegral::Finite(v) => TailIntegral::Finite(v / scale),
            TailIntegral::Divergent => TailIntegral::Divergent,
        })
    }
}

/// A kernel multiplied by a constant factor, used where a model scales
/// the weights (e.g. leader-follower strength).
#[derive(Debug, Clone, Copy)]
pub struct ScaledKernel<'a> {
    kernel: &'a Kernel,
    factor: f64,
}

impl ScaledKernel<'_> {
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        self.factor * self.kernel.value(r)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(FlockError::Config(format!(
            "kernel exponent must be finite and >= 0, got {beta}"
        )));
    }
    Ok(())
}

/// `∫_a^∞ (1+u²)^-s du` for `s > 1/2`, through the incomplete beta
/// function after the substitution `t = 1/(1+u²)`.
fn squared_tail(s: f64, a: f64) -> f64 {
    let p = s - 0.5;
    let x = 1.0 / (1.0 + a * a);
    0.5 * beta(p, 0.5) * beta_reg(p, 0.5, x)
}

/// Double-exponential quadrature on geometrically growing subintervals,
/// so that each piece sees a well-resolved integrand.
fn integrate_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = if lo < 1.0 {
            1.0f64.min(b)
        } else {
            (2.0 * lo).min(b)
        };
        total += quadrature::double_exponential::integrate(&f, lo, hi, 1e-15).integral;
        lo = hi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eval_examples() {
        let k = Kernel::power_plain(2.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 1.0);
        assert_eq!(k.eval(1.0).unwrap(), 0.25);
        let k = Kernel::power_squared(1.0).unwrap();
        assert!(close(k.eval(3.0).unwrap(), 0.1, 1e-15));
        assert!(matches!(k.eval(-1.0), Err(FlockError::Domain(_))));
    }

    #[test]
    fn tail_examples() {
        let k = Kernel::power_plain(2.0).unwrap();
        let t = k.tail_integral(0.0, 1.0, Power::One).unwrap();
        assert!(close(t.value(), 1.0, 1e-15));
        let t = k.tail_integral(0.0, 2.0, Power::One).unwrap();
        assert!(close(t.value(), 0.5, 1e-15));
        let k = Kernel::power_plain(0.4).unwrap();
        assert!(k
            .tail_integral(1.0, 1.0, Power::One)
            .unwrap()
            .is_divergent());
        // 0.4 * 2 = 0.8 <= 1
        assert!(k
            .tail_integral(0.0, 1.0, Power::Two)
            .unwrap()
            .is_divergent());
        let k = Kernel::power_squared(0.5).unwrap();
        assert!(k
            .tail_integral(0.0, 1.0, Power::One)
            .unwrap()
            .is_divergent());
        assert!(!k
            .tail_integral(0.0, 1.0, Power::Two)
            .unwrap()
            .is_divergent());
        assert!(Kernel::constant(1.0)
            .unwrap()
            .tail_integral(0.0, 1.0, Power::One)
            .unwrap()
            .is_divergent());
    }

    #[test]
    fn squared_tail_special_case() {
        // (1+u²)^-1 integrates to π/2 - atan(a)
        let k = Kernel::power_squared(1.0).unwrap();
        let t = k.tail_integral(0.5, 1.0, Power::One).unwrap().value();
        assert!(close(t, std::f64::consts::FRAC_PI_2 - 0.5f64.atan(), 1e-12));
    }

    #[test]
    fn table_validation() {
        assert!(Kernel::tabulated(vec![0.0], vec![1.0]).is_err());
        assert!(Kernel::tabulated(vec![0.5, 1.0], vec![1.0, 0.5]).is_err());
        assert!(Kernel::tabulated(vec![0.0, 1.0], vec![0.5, 1.0]).is_err());
        assert!(Kernel::tabulated(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(Kernel::tabulated(vec![0.0, 1.0], vec![1.0, -0.1]).is_err());
        assert!(Kernel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25]).is_ok());
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let k = Kernel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.25]).unwrap();
        assert!(close(k.value(0.5), 0.75, 1e-15));
        assert!(close(k.value(1.5), 0.375, 1e-15));
        // fitted tail exponent p = 1: ψ(4) = 0.25 * (4/2)^-1
        assert!(close(k.value(4.0), 0.125, 1e-14));
        // p = 1 with power one diverges, power two converges
        assert!(k
            .tail_integral(0.0, 1.0, Power::One)
            .unwrap()
            .is_divergent());
        let t = k.tail_integral(0.0, 1.0, Power::Two).unwrap().value();
        // table part: [0,1]: (1 + .5 + .25)/3, [1,2]: (.25+.125+.0625)/3, tail: .0625*4/2
        let expected = 1.75 / 3.0 + 0.4375 / 3.0 + 0.125;
        assert!(close(t, expected, 1e-14));
    }

    #[test]
    fn table_tail_variants() {
        let zero = Kernel::tabulated(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(
            zero.tail_integral(0.0, 1.0, Power::One).unwrap().value(),
            0.5
        );
        assert!(!zero.is_strictly_positive());
        let flat = Kernel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.5]).unwrap();
        assert!(flat
            .tail_integral(0.0, 1.0, Power::One)
            .unwrap()
            .is_divergent());
        let unknown = Kernel::tabulated(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        assert!(matches!(
            unknown.tail_integral(0.0, 1.0, Power::One),
            Err(FlockError::Indeterminate(_))
        ));
        // finite integrals still work
        assert!(close(
            unknown.integral(0.0, 3.0, Power::One).unwrap(),
            0.75 + 1.0,
            1e-15
        ));
    }

    #[test]
    fn finite_integrals_match_primitives() {
        let k = Kernel::power_plain(1.0).unwrap();
        assert!(close(
            k.integral(0.0, 1.0, Power::One).unwrap(),
            2f64.ln(),
            1e-15
        ));
        let k = Kernel::power_squared(0.75).unwrap();
        let direct = k.integral(0.0, 50.0, Power::One).unwrap();
        let from_tails = k.tail_integral(0.0, 1.0, Power::Two).unwrap().value()
            - k.tail_integral(50.0, 1.0, Power::Two).unwrap().value();
        // ψ² of β = 0.75 is ψ of β = 1.5
        let k15 = Kernel::power_squared(1.5).unwrap();
        let direct15 = k15.integral(0.0, 50.0, Power::One).unwrap();
        assert!(close(direct15, from_tails, 1e-12));
        assert!(direct > 0.0);
    }
}
