//! Scalar interpolation functions `x(τ)` with exactly known boundary behavior.
//!
//! Every schedule carries the number `Nb` of derivatives (orders `1..=Nb`)
//! that vanish at both `τ = 0` and `τ = 1`, and a declared analyticity
//! height `γ`. Derivatives are evaluated in closed form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Analyticity height used when none is declared.
pub const DEFAULT_GAMMA: f64 = 1.0 / 14.0;

/// Highest derivative order available for the rational family.
pub const RATIONAL_MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Linear,
    /// Regularized incomplete beta `I_τ(Nb+1, Nb+1)`, a degree `2Nb+1`
    /// polynomial.
    SmoothPoly { nb: usize },
    /// `(1−τ)/(1+τ²)`.
    RationalX0,
    /// `2τ/(1+τ²)`.
    RationalX1,
    Constant { value: f64 },
    /// Power-basis coefficients, lowest order first.
    Polynomial { coeffs: Vec<f64> },
}

impl Family {
    pub fn id(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::SmoothPoly { .. } => "smooth_poly",
            Family::RationalX0 => "rational_x0",
            Family::RationalX1 => "rational_x1",
            Family::Constant { .. } => "constant",
            Family::Polynomial { .. } => "polynomial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleDoc", into = "ScheduleDoc")]
pub struct Schedule {
    family: Family,
    nb: usize,
    gamma: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `n!/(n−i)!`, zero when `i > n`.
fn falling(n: usize, i: usize) -> f64 {
    if i > n {
        0.0
    } else {
        (0..i).fold(1.0, |acc, j| acc * (n - j) as f64)
    }
}

fn powu(x: f64, e: usize) -> f64 {
    x.powi(e as i32)
}

impl Schedule {
    pub fn linear() -> Self {
        Self {
            family: Family::Linear,
            nb: 0,
            gamma: DEFAULT_GAMMA,
        }
    }

    /// Beta-polynomial schedule with exactly `nb` vanishing derivatives at each
    /// endpoint.
    pub fn smooth_poly(nb: usize) -> Self {
        Self {
            family: Family::SmoothPoly { nb },
            nb,
            gamma: DEFAULT_GAMMA,
        }
    }

    /// The pair `x0 = (1−τ)/(1+τ²)`, `x1 = 2τ/(1+τ²)`, singular at `τ = ±i`.
    pub fn rational_example() -> (Self, Self) {
        let make = |family| Self {
            family,
            nb: 0,
            gamma: DEFAULT_GAMMA,
        };
        (make(Family::RationalX0), make(Family::RationalX1))
    }

    pub fn constant(value: f64) -> Self {
        Self {
            family: Family::Constant { value },
            nb: 0,
            gamma: DEFAULT_GAMMA,
        }
    }

    /// Polynomial with the given power-basis coefficients. `Nb` is computed
    /// from the coefficients.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let mut s = Self {
            family: Family::Polynomial { coeffs },
            nb: 0,
            gamma: DEFAULT_GAMMA,
        };
        let scale = match &s.family {
            Family::Polynomial { coeffs } => coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1.0),
            _ => 1.0,
        };
        let degree = match &s.family {
            Family::Polynomial { coeffs } => coeffs.len(),
            _ => 0,
        };
        let mut nb = 0;
        for k in 1..=degree {
            let zero = [0.0, 1.0]
                .iter()
                .all(|&t| s.eval(t, k).map(|v| v.abs() <= 1e-12 * scale).unwrap_or(false));
            if !zero {
                break;
            }
            nb = k;
        }
        s.nb = nb;
        s
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be > 0, got {gamma}")));
        }
        if matches!(self.family, Family::RationalX0 | Family::RationalX1) && gamma >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "rational schedules are singular at τ=±i, gamma must be < 1 (got {gamma})"
            )));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Declared number of vanishing endpoint derivatives.
    pub fn nb(&self) -> usize {
        self.nb
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Families with `x(0) = 0` and `x(1) = 1`.
    pub fn is_interpolating(&self) -> bool {
        matches!(
            self.family,
            Family::Linear | Family::SmoothPoly { .. } | Family::RationalX1
        )
    }

    /// Highest supported derivative order, `None` when unbounded.
    pub fn max_order(&self) -> Option<usize> {
        match self.family {
            Family::RationalX0 | Family::RationalX1 => Some(RATIONAL_MAX_ORDER),
            _ => None,
        }
    }

    /// Exact `k`-th derivative at `tau`.
    ///
    /// Polynomial families extend to all real `τ`; the rational family is
    /// analytic on the real line as well.
    pub fn eval(&self, tau: f64, k: usize) -> Result<f64> {
        match &self.family {
            Family::Linear => Ok(match k {
                0 => tau,
                1 => 1.0,
                _ => 0.0,
            }),
            Family::Constant { value } => Ok(if k == 0 { *value } else { 0.0 }),
            Family::SmoothPoly { nb } => Ok(smooth_poly_eval(*nb, tau, k)),
            Family::Polynomial { coeffs } => Ok(coeffs
                .iter()
                .enumerate()
                .skip(k)
                .map(|(p, c)| c * falling(p, k) * powu(tau, p - k))
                .sum()),
            Family::RationalX0 | Family::RationalX1 => {
                if k > RATIONAL_MAX_ORDER {
                    return Err(Error::UnsupportedDerivative {
                        family: self.family.id().into(),
                        order: k,
                    });
                }
                // numerator p(τ): (1−τ) or 2τ
                let p = |order: usize| -> f64 {
                    match (&self.family, order) {
                        (Family::RationalX0, 0) => 1.0 - tau,
                        (Family::RationalX0, 1) => -1.0,
                        (Family::RationalX1, 0) => 2.0 * tau,
                        (Family::RationalX1, 1) => 2.0,
                        _ => 0.0,
                    }
                };
                // Leibniz on (1+τ²)·f = p:
                // f⁽ᵐ⁾ = (p⁽ᵐ⁾ − 2mτ f⁽ᵐ⁻¹⁾ − m(m−1) f⁽ᵐ⁻²⁾) / (1+τ²)
                let q = 1.0 + tau * tau;
                let mut derivs: Vec<f64> = Vec::with_capacity(k + 1);
                for m in 0..=k {
                    let mut v = p(m);
                    if m >= 1 {
                        v -= 2.0 * m as f64 * tau * derivs[m - 1];
                    }
                    if m >= 2 {
                        v -= (m * (m - 1)) as f64 * derivs[m - 2];
                    }
                    derivs.push(v / q);
                }
                Ok(derivs[k])
            }
        }
    }
}

fn smooth_poly_eval(nb: usize, tau: f64, k: usize) -> f64 {
    let m = 2 * nb + 1;
    if k == 0 {
        // Bernstein tail sum: sum_{i=nb+1}^{m} C(m,i) τ^i (1−τ)^(m−i)
        return (nb + 1..=m)
            .map(|i| binomial(m, i) * powu(tau, i) * powu(1.0 - tau, m - i))
            .sum();
    }
    // x' = τ^nb (1−τ)^nb / B(nb+1, nb+1); higher orders by Leibniz.
    let norm = m as f64 * binomial(2 * nb, nb);
    let order = k - 1;
    let mut acc = 0.0;
    for i in 0..=order {
        let j = order - i;
        let left = falling(nb, i);
        let right = falling(nb, j);
        if left == 0.0 || right == 0.0 {
            continue;
        }
        let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += binomial(order, i) * left * powu(tau, nb - i) * right * sign * powu(1.0 - tau, nb - j);
    }
    norm * acc
}

/// Outcome of comparing a schedule's endpoint derivatives against a requested
/// vanishing count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryVerdict {
    /// Orders `1..=Nb` vanish and order `Nb+1` does not.
    Exact,
    /// Orders `1..=Nb` vanish and so does order `Nb+1`.
    AtLeast,
    /// Some order `≤ Nb` is nonzero.
    Insufficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub tau: f64,
    pub order: usize,
    /// `|x⁽ᵏ⁾(τ)|`, NaN when the order is unsupported.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub requested: usize,
    pub tol: f64,
    pub entries: Vec<BoundaryEntry>,
    pub verdict: BoundaryVerdict,
}

impl BoundaryReport {
    /// The requested orders vanish (regardless of exactness).
    pub fn requested_satisfied(&self) -> bool {
        self.verdict != BoundaryVerdict::Insufficient
    }

    /// The requested orders vanish and the count is exact.
    pub fn pass(&self) -> bool {
        self.verdict == BoundaryVerdict::Exact
    }
}

/// Checks `|x⁽ᵏ⁾(τ₁)|` for `τ₁ ∈ {0,1}`, `k = 1..=nb+1`.
pub fn verify_boundary(s: &Schedule, nb: usize, tol: f64) -> BoundaryReport {
    let mut entries = Vec::with_capacity(2 * (nb + 1));
    for tau in [0.0, 1.0] {
        for order in 1..=nb + 1 {
            let value = s.eval(tau, order).map(f64::abs).unwrap_or(f64::NAN);
            entries.push(BoundaryEntry { tau, order, value });
        }
    }
    let small = |e: &BoundaryEntry| e.value <= tol;
    let requested_ok = entries.iter().filter(|e| e.order <= nb).all(small);
    let next_zero = entries.iter().filter(|e| e.order == nb + 1).all(small);
    let verdict = match (requested_ok, next_zero) {
        (false, _) => BoundaryVerdict::Insufficient,
        (true, true) => BoundaryVerdict::AtLeast,
        (true, false) => BoundaryVerdict::Exact,
    };
    BoundaryReport {
        requested: nb,
        tol,
        entries,
        verdict,
    }
}

/// Serialized form: `{family, Nb, gamma, params}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub family: String,
    #[serde(rename = "Nb", default, skip_serializing_if = "Option::is_none")]
    pub nb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl From<Schedule> for ScheduleDoc {
    fn from(s: Schedule) -> Self {
        let mut params = Map::new();
        match &s.family {
            Family::Constant { value } => {
                params.insert("value".into(), Value::from(*value));
            }
            Family::Polynomial { coeffs } => {
                params.insert("coeffs".into(), Value::from(coeffs.clone()));
            }
            _ => {}
        }
        ScheduleDoc {
            family: s.family.id().into(),
            nb: Some(s.nb),
            gamma: Some(s.gamma),
            params,
        }
    }
}

impl TryFrom<ScheduleDoc> for Schedule {
    type Error = Error;

    fn try_from(doc: ScheduleDoc) -> Result<Self> {
        let mut params = doc.params.clone();
        if let Some(nb) = doc.nb {
            params.entry("Nb").or_insert(Value::from(nb));
        }
        if let Some(gamma) = doc.gamma {
            params.entry("gamma").or_insert(Value::from(gamma));
        }
        ScheduleBank::with_builtins().build(&doc.family, &params)
    }
}

type FamilyCtor = fn(&Map<String, Value>) -> Result<Schedule>;

fn param_f64(params: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::InvalidInput(format!("parameter `{key}` must be a number"))),
    }
}

fn param_nb(params: &Map<String, Value>) -> Result<usize> {
    let raw = params
        .get("Nb")
        .or_else(|| params.get("nb"))
        .ok_or_else(|| Error::InvalidInput("smooth_poly requires `Nb`".into()))?;
    match raw.as_i64() {
        Some(v) if v >= 0 => Ok(v as usize),
        Some(v) => Err(Error::InvalidInput(format!("Nb must be >= 0, got {v}"))),
        None => Err(Error::InvalidInput("`Nb` must be an integer".into())),
    }
}

fn build_smooth(p: &Map<String, Value>) -> Result<Schedule> {
    Ok(Schedule::smooth_poly(param_nb(p)?))
}

fn build_constant(p: &Map<String, Value>) -> Result<Schedule> {
    Ok(Schedule::constant(param_f64(p, "value")?.unwrap_or(1.0)))
}

fn build_polynomial(p: &Map<String, Value>) -> Result<Schedule> {
    let coeffs = p
        .get("coeffs")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("polynomial requires `coeffs` array".into()))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::InvalidInput("coefficients must be numbers".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Schedule::polynomial(coeffs))
}

/// Registry resolving schedule ids (family names or user-registered names)
/// into [`Schedule`] values.
#[derive(Debug, Clone)]
pub struct ScheduleBank {
    families: BTreeMap<String, FamilyCtor>,
    named: BTreeMap<String, Schedule>,
}

impl Default for ScheduleBank {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ScheduleBank {
    pub fn with_builtins() -> Self {
        let mut families: BTreeMap<String, FamilyCtor> = BTreeMap::new();
        families.insert("linear".into(), |_| Ok(Schedule::linear()));
        families.insert("smooth_poly".into(), build_smooth);
        families.insert("beta".into(), build_smooth);
        families.insert("rational_x0".into(), |_| Ok(Schedule::rational_example().0));
        families.insert("rational_x1".into(), |_| Ok(Schedule::rational_example().1));
        families.insert("constant".into(), build_constant);
        families.insert("polynomial".into(), build_polynomial);
        Self {
            families,
            named: BTreeMap::new(),
        }
    }

    /// Registers a concrete schedule under `name`; names shadow family ids.
    pub fn insert(&mut self, name: impl Into<String>, schedule: Schedule) {
        self.named.insert(name.into(), schedule);
    }

    pub fn contains(&self, id: &str) -> bool {
        self.named.contains_key(id) || self.families.contains_key(id)
    }

    /// Resolves `id` with family parameters (`Nb`, `gamma`, `value`, `coeffs`).
    pub fn build(&self, id: &str, params: &Map<String, Value>) -> Result<Schedule> {
        let schedule = if let Some(s) = self.named.get(id) {
            s.clone()
        } else {
            let ctor = self
                .families
                .get(id)
                .ok_or_else(|| Error::UnknownSchedule(id.to_string()))?;
            ctor(params)?
        };
        match param_f64(params, "gamma")? {
            Some(g) => schedule.with_gamma(g),
            None => Ok(schedule),
        }
    }
}
