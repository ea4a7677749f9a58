//! Exact evaluation of the Olkin–Baker solution families.
//!
//! The additive equation `a(x) + b(y) = c(x + y) + d(x / y)` on `(0, ∞)²` has,
//! for measurable unknowns, the seven-constant solution
//!
//! ```text
//! a(x) = λx + κ₁ ln x + α
//! b(x) = λx + κ₂ ln x + β
//! c(x) = λx + (κ₁ + κ₂) ln x + γ
//! d(x) = κ₁ ln(x / (x + 1)) − κ₂ ln(1 + x) + δ,      α + β = γ + δ.
//! ```
//!
//! Without measurability the linear part becomes an arbitrary additive
//! function and the logarithms arbitrary logarithmic-type functions; see
//! [`GeneralSolutionSpec`]. Everything here is the ground truth the recovery
//! pipeline is checked against.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::grid::GridFunction;

/// Tolerance for the constraint `α + β = γ + δ` on validated parameters.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// The seven constants of the measurable solution.
///
/// `lambda` is the coefficient of `x` in `a(x)`, so integrable gamma
/// densities have `lambda < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OBParams {
    lambda: f64,
    kappa1: f64,
    kappa2: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    delta: f64,
}

impl OBParams {
    /// Build from six constants; `delta = alpha + beta - gamma`.
    pub fn new(lambda: f64, kappa1: f64, kappa2: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = OBParams {
            lambda,
            kappa1,
            kappa2,
            alpha,
            beta,
            gamma,
            delta: alpha + beta - gamma,
        };
        p.check_finite()?;
        Ok(p)
    }

    /// All seven constants as given, without enforcing the constraint.
    /// Used for negative tests and for reporting independently recovered `delta`.
    pub fn from_parts_unchecked(
        lambda: f64,
        kappa1: f64,
        kappa2: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
    ) -> Self {
        OBParams {
            lambda,
            kappa1,
            kappa2,
            alpha,
            beta,
            gamma,
            delta,
        }
    }

    pub fn zero() -> Self {
        Self::from_parts_unchecked(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// Finite values and `|α + β − γ − δ| ≤ 1e−12`.
    pub fn validate(&self) -> Result<()> {
        self.check_finite()?;
        let gap = self.constraint_gap();
        if gap > CONSTRAINT_TOL {
            return Err(Error::Domain(format!(
                "alpha + beta - gamma - delta = {gap:e} exceeds {CONSTRAINT_TOL:e}"
            )));
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        if self.as_array().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain(format!("non-finite parameter in {self:?}")))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }
    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `|α + β − γ − δ|`
    pub fn constraint_gap(&self) -> f64 {
        (self.alpha + self.beta - self.gamma - self.delta).abs()
    }

    /// `[λ, κ₁, κ₂, α, β, γ, δ]`
    pub fn as_array(&self) -> [f64; 7] {
        [
            self.lambda,
            self.kappa1,
            self.kappa2,
            self.alpha,
            self.beta,
            self.gamma,
            self.delta,
        ]
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &OBParams) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Read the gamma parametrisation back: `(κ₁ + 1, κ₂ + 1, −λ)`.
    pub fn gamma_shapes(&self) -> (f64, f64, f64) {
        (self.kappa1 + 1.0, self.kappa2 + 1.0, -self.lambda)
    }
}

/// Values of the four unknown functions at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentValues<V = f64> {
    pub a: V,
    pub b: V,
    pub c: V,
    pub d: V,
}

impl ComponentValues<f64> {
    fn check_finite(self, x: f64) -> Result<Self> {
        if [self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Domain(format!("non-finite component value at x = {x}")))
        }
    }
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument {x} must be a positive finite real")))
    }
}

/// `(a, b, c, d)` of the measurable solution at `x`.
pub fn eval_quadruple(params: &OBParams, x: f64) -> Result<ComponentValues> {
    check_positive(x)?;
    let p = params;
    let ln_x = x.ln();
    let ln_1px = x.ln_1p();
    ComponentValues {
        a: p.lambda * x + p.kappa1 * ln_x + p.alpha,
        b: p.lambda * x + p.kappa2 * ln_x + p.beta,
        c: p.lambda * x + (p.kappa1 + p.kappa2) * ln_x + p.gamma,
        d: p.kappa1 * (ln_x - ln_1px) - p.kappa2 * ln_1px + p.delta,
    }
    .check_finite(x)
}

/// `a(x) + b(y) − c(x + y) − d(x / y)`; zero for every valid parameter set.
pub fn residual(params: &OBParams, x: f64, y: f64) -> Result<f64> {
    Ok(residual_terms(params, x, y)?.0)
}

/// The residual together with the scale `1 + |a| + |b| + |c| + |d|` of the
/// four terms it is built from.
pub fn residual_terms(params: &OBParams, x: f64, y: f64) -> Result<(f64, f64)> {
    check_positive(x)?;
    check_positive(y)?;
    let a = eval_quadruple(params, x)?.a;
    let b = eval_quadruple(params, y)?.b;
    let c = eval_quadruple(params, x + y)?.c;
    let d = eval_quadruple(params, x / y)?.d;
    Ok((a + b - c - d, 1.0 + a.abs() + b.abs() + c.abs() + d.abs()))
}

/// `(f, g, p, q) = exp(a, b, c, d)`, the positive solution of
/// `f(x) g(y) = p(x + y) q(x / y)`.
pub fn multiplicative_quadruple(params: &OBParams, x: f64) -> Result<ComponentValues> {
    let v = eval_quadruple(params, x)?;
    let limit = f64::MAX.ln();
    let exp = |e: f64, name: &str| -> Result<f64> {
        let r = e.exp();
        if e.abs() >= limit || !r.is_finite() || r <= 0.0 {
            Err(Error::Overflow(format!("exp({e}) for {name} at x = {x}")))
        } else {
            Ok(r)
        }
    };
    Ok(ComponentValues {
        a: exp(v.a, "f")?,
        b: exp(v.b, "g")?,
        c: exp(v.c, "p")?,
        d: exp(v.d, "q")?,
    })
}

/// Tabulate `(a, b, c, d)` on `grid`; returns the four tables in that order.
pub fn tabulate(params: &OBParams, grid: &[f64]) -> Result<[GridFunction; 4]> {
    crate::grid::validate_grid(grid)?;
    let vals = grid
        .iter()
        .map(|&x| eval_quadruple(params, x))
        .collect::<Result<Vec<_>>>()?;
    let table = |pick: fn(&ComponentValues) -> f64| {
        GridFunction::new(grid.to_vec(), vals.iter().map(pick).collect())
    };
    Ok([
        table(|v| v.a)?,
        table(|v| v.b)?,
        table(|v| v.c)?,
        table(|v| v.d)?,
    ])
}

/// Log-normalising constant of the gamma density with the given shape and rate.
pub fn gamma_log_norm(shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape)
}

/// Parameters whose `exp(a)`, `exp(b)` are the densities of `G(shape1, rate)`
/// and `G(shape2, rate)`, and whose `c`, `d` are the transformed densities of
/// `U = X + Y` and `V = X / (X + Y)`.
pub fn gamma_to_params(shape1: f64, shape2: f64, rate: f64) -> Result<OBParams> {
    for (name, v) in [("shape1", shape1), ("shape2", shape2), ("rate", rate)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} = {v} must be positive")));
        }
    }
    // c(x) = ln f_U(x) - ln x with U ~ G(shape1 + shape2, rate)
    OBParams::new(
        -rate,
        shape1 - 1.0,
        shape2 - 1.0,
        gamma_log_norm(shape1, rate),
        gamma_log_norm(shape2, rate),
        gamma_log_norm(shape1 + shape2, rate),
    )
}

/// A unary function that may decline inputs outside its evaluable domain.
pub type Handle<X, V> = Box<dyn Fn(&X) -> Option<V> + Send + Sync>;

/// Arguments the general solution can be evaluated at: positive elements of an
/// ordered field closed under `x + 1` and `x / y`.
pub trait SolutionArg: Clone + Add<Output = Self> + std::ops::Div<Output = Self> {
    fn one() -> Self;
    fn is_positive(&self) -> bool;
}

impl SolutionArg for f64 {
    fn one() -> Self {
        1.0
    }
    fn is_positive(&self) -> bool {
        *self > 0.0 && self.is_finite()
    }
}

/// The general (not necessarily measurable) solution:
/// an additive `A`, logarithmic-type `L_a`, `L_b`, and three constants.
pub struct GeneralSolutionSpec<X, V> {
    pub additive_fn: Handle<X, V>,
    pub log_a_fn: Handle<X, V>,
    pub log_b_fn: Handle<X, V>,
    pub alpha: V,
    pub beta: V,
    pub gamma: V,
}

/// Outcome of sampling a handle's defining functional equation.
#[derive(Debug, Clone, PartialEq)]
pub struct HandleCheck<V> {
    pub pairs_tested: usize,
    pub pairs_declined: usize,
    /// Largest violation found, if any pair violated the equation.
    pub worst: Option<V>,
}

impl<X, V> GeneralSolutionSpec<X, V>
where
    X: SolutionArg,
    V: Clone + Add<Output = V> + Sub<Output = V> + PartialEq + num_traits::Zero,
{
    /// Check `A(x + y) = A(x) + A(y)` on the given pairs. Pairs the handle
    /// declines are counted, not failed.
    pub fn check_additive(&self, pairs: &[(X, X)]) -> HandleCheck<V> {
        check_law(pairs, |x, y| {
            let lhs = (self.additive_fn)(&(x.clone() + y.clone()))?;
            let rhs = (self.additive_fn)(x)? + (self.additive_fn)(y)?;
            Some(lhs - rhs)
        })
    }

    /// Check `L(xy) = L(x) + L(y)` for both logarithmic handles; products are
    /// formed as `x / (1 / y)` so only the [`SolutionArg`] operations are used.
    pub fn check_logarithmic(&self, pairs: &[(X, X)]) -> [HandleCheck<V>; 2] {
        let check = |h: &Handle<X, V>| {
            check_law(pairs, |x, y| {
                let xy = x.clone() / (X::one() / y.clone());
                Some(h(&xy)? - (h(x)? + h(y)?))
            })
        };
        [check(&self.log_a_fn), check(&self.log_b_fn)]
    }

    /// `(a, b, c, d)` at `x`.
    pub fn eval(&self, x: &X) -> Result<ComponentValues<V>> {
        if !x.is_positive() {
            return Err(Error::Domain("argument must be positive".into()));
        }
        let declined = |what: &str| Error::Domain(format!("{what} declined the argument"));
        let add = (self.additive_fn)(x).ok_or_else(|| declined("additive handle"))?;
        let la = (self.log_a_fn)(x).ok_or_else(|| declined("log_a handle"))?;
        let lb = (self.log_b_fn)(x).ok_or_else(|| declined("log_b handle"))?;
        let xp1 = x.clone() + X::one();
        let ratio = x.clone() / xp1.clone();
        let la_ratio = (self.log_a_fn)(&ratio).ok_or_else(|| declined("log_a handle"))?;
        let lb_xp1 = (self.log_b_fn)(&xp1).ok_or_else(|| declined("log_b handle"))?;
        Ok(ComponentValues {
            a: add.clone() + la.clone() + self.alpha.clone(),
            b: add.clone() + lb.clone() + self.beta.clone(),
            c: add + la + lb + self.gamma.clone(),
            d: la_ratio - lb_xp1 + self.alpha.clone() + self.beta.clone() - self.gamma.clone(),
        })
    }

    /// `a(x) + b(y) − c(x + y) − (α + β − γ)`: the Pexider part of the
    /// equation, free of `d`.
    pub fn pexider_residual(&self, x: &X, y: &X) -> Result<V> {
        let a = self.eval(x)?.a;
        let b = self.eval(y)?.b;
        let c = self.eval(&(x.clone() + y.clone()))?.c;
        Ok(a + b - c - (self.alpha.clone() + self.beta.clone() - self.gamma.clone()))
    }

    /// Full residual `a(x) + b(y) − c(x + y) − d(x / y)`.
    pub fn residual(&self, x: &X, y: &X) -> Result<V> {
        let a = self.eval(x)?.a;
        let b = self.eval(y)?.b;
        let c = self.eval(&(x.clone() + y.clone()))?.c;
        let d = self.eval(&(x.clone() / y.clone()))?.d;
        Ok(a + b - c - d)
    }
}

fn check_law<X, V, F>(pairs: &[(X, X)], law: F) -> HandleCheck<V>
where
    V: PartialEq + num_traits::Zero,
    F: Fn(&X, &X) -> Option<V>,
{
    let mut out = HandleCheck {
        pairs_tested: 0,
        pairs_declined: 0,
        worst: None,
    };
    for (x, y) in pairs {
        match law(x, y) {
            None => out.pairs_declined += 1,
            Some(gap) => {
                out.pairs_tested += 1;
                if !gap.is_zero() && out.worst.is_none() {
                    out.worst = Some(gap);
                }
            }
        }
    }
    out
}

/// The measurable specialisation `A(x) = λx`, `L_a = κ₁ ln`, `L_b = κ₂ ln`.
pub fn measurable_spec(params: &OBParams) -> GeneralSolutionSpec<f64, f64> {
    let (lambda, k1, k2) = (params.lambda, params.kappa1, params.kappa2);
    let pos = |x: &f64| *x > 0.0 && x.is_finite();
    GeneralSolutionSpec {
        additive_fn: Box::new(move |x| pos(x).then(|| lambda * x)),
        log_a_fn: Box::new(move |x| pos(x).then(|| k1 * x.ln())),
        log_b_fn: Box::new(move |x| pos(x).then(|| k2 * x.ln())),
        alpha: params.alpha,
        beta: params.beta,
        gamma: params.gamma,
    }
}
