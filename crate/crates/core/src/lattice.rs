//! Exact arithmetic in ℚ(√2) and additive / logarithmic test doubles that are
//! not of the measurable form `λx` / `κ ln x`.
//!
//! An additive function that is not linear cannot be tabulated on the reals,
//! but restricted to the ℚ-span of `{1, √2}` one is easy to write down:
//! `A(q₁ + q₂√2) = c₁q₁ + c₂q₂` with `c₂ ≠ √2·c₁`. Values are exact rationals.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::canonical::{GeneralSolutionSpec, SolutionArg};

pub type Rational = Ratio<i128>;

pub fn rational(num: i128, den: i128) -> Rational {
    Ratio::new(num, den)
}

/// `rat + irr·√2` with rational coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QSqrt2 {
    pub rat: Rational,
    pub irr: Rational,
}

impl QSqrt2 {
    pub fn new(rat: Rational, irr: Rational) -> Self {
        QSqrt2 { rat, irr }
    }

    pub fn from_ints(rat: i128, irr: i128) -> Self {
        QSqrt2::new(Rational::from_integer(rat), Rational::from_integer(irr))
    }

    /// Field norm `rat² − 2·irr²`; multiplicative and nonzero off the origin.
    pub fn norm(&self) -> Rational {
        self.rat * self.rat - Rational::from_integer(2) * self.irr * self.irr
    }

    pub fn conjugate(&self) -> Self {
        QSqrt2::new(self.rat, -self.irr)
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero() && self.irr.is_zero()
    }

    /// Exact sign test, no floating point involved.
    pub fn is_positive(&self) -> bool {
        let (r, s) = (&self.rat, &self.irr);
        let two = Rational::from_integer(2);
        match (r.is_negative(), s.is_negative()) {
            (false, false) => !self.is_zero(),
            (true, true) => false,
            // r >= 0 > s: positive iff r² > 2s²
            (false, true) => r * r > two * s * s,
            // r < 0 <= s: positive iff 2s² > r²
            (true, false) => two * s * s > r * r,
        }
    }

    pub fn to_f64(&self) -> f64 {
        let f = |q: &Rational| *q.numer() as f64 / *q.denom() as f64;
        f(&self.rat) + f(&self.irr) * std::f64::consts::SQRT_2
    }
}

impl fmt::Display for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}√2", self.rat, self.irr)
    }
}

impl Add for QSqrt2 {
    type Output = QSqrt2;
    fn add(self, o: QSqrt2) -> QSqrt2 {
        QSqrt2::new(self.rat + o.rat, self.irr + o.irr)
    }
}

impl Sub for QSqrt2 {
    type Output = QSqrt2;
    fn sub(self, o: QSqrt2) -> QSqrt2 {
        QSqrt2::new(self.rat - o.rat, self.irr - o.irr)
    }
}

impl Neg for QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2::new(-self.rat, -self.irr)
    }
}

impl Mul for QSqrt2 {
    type Output = QSqrt2;
    fn mul(self, o: QSqrt2) -> QSqrt2 {
        let two = Rational::from_integer(2);
        QSqrt2::new(
            self.rat * o.rat + two * self.irr * o.irr,
            self.rat * o.irr + self.irr * o.rat,
        )
    }
}

impl Div for QSqrt2 {
    type Output = QSqrt2;
    /// Panics on division by zero, like the rational division it builds on.
    fn div(self, o: QSqrt2) -> QSqrt2 {
        let n = o.norm();
        let num = self * o.conjugate();
        QSqrt2::new(num.rat / n, num.irr / n)
    }
}

impl SolutionArg for QSqrt2 {
    fn one() -> Self {
        QSqrt2::from_ints(1, 0)
    }
    fn is_positive(&self) -> bool {
        QSqrt2::is_positive(self)
    }
}

/// `A(q₁ + q₂√2) = c₁q₁ + c₂q₂`. Additive on ℚ(√2); linear only if
/// `c₂ = √2·c₁`, which cannot happen for rational coefficients unless both
/// vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeAdditive {
    pub c_rat: Rational,
    pub c_irr: Rational,
}

impl LatticeAdditive {
    pub fn new(c_rat: Rational, c_irr: Rational) -> Self {
        LatticeAdditive { c_rat, c_irr }
    }

    /// Declines non-positive arguments (the domain is `(0, ∞)`).
    pub fn eval(&self, x: &QSqrt2) -> Option<Rational> {
        x.is_positive()
            .then(|| self.c_rat * x.rat + self.c_irr * x.irr)
    }
}

/// `L(x) = weight · v_p(N(x))`, the `p`-adic valuation of the field norm.
/// A logarithmic-type function on the positive elements of ℚ(√2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormValuationLog {
    pub prime: i128,
    pub weight: Rational,
}

impl NormValuationLog {
    pub fn new(prime: i128, weight: Rational) -> Self {
        NormValuationLog { prime, weight }
    }

    pub fn eval(&self, x: &QSqrt2) -> Option<Rational> {
        if !x.is_positive() {
            return None;
        }
        let n = x.norm();
        let v = valuation(*n.numer(), self.prime) - valuation(*n.denom(), self.prime);
        Some(self.weight * Rational::from_integer(v))
    }
}

fn valuation(mut n: i128, p: i128) -> i128 {
    n = n.abs();
    let mut v = 0;
    while n != 0 && n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// General solution built from the lattice doubles.
pub fn lattice_spec(
    additive: LatticeAdditive,
    log_a: Option<NormValuationLog>,
    log_b: Option<NormValuationLog>,
    alpha: Rational,
    beta: Rational,
    gamma: Rational,
) -> GeneralSolutionSpec<QSqrt2, Rational> {
    let log_handle = |l: Option<NormValuationLog>| -> crate::canonical::Handle<QSqrt2, Rational> {
        match l {
            Some(l) => Box::new(move |x: &QSqrt2| l.eval(x)),
            None => Box::new(|x: &QSqrt2| x.is_positive().then(Rational::zero)),
        }
    };
    GeneralSolutionSpec {
        additive_fn: Box::new(move |x: &QSqrt2| additive.eval(x)),
        log_a_fn: log_handle(log_a),
        log_b_fn: log_handle(log_b),
        alpha,
        beta,
        gamma,
    }
}
