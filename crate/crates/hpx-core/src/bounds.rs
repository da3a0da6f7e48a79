//! Analytic constants and the bound sandwich: the removal-lemma exponent
//! solver, the per-delta lower/upper bounds, size thresholds for the
//! progression-free constructions, and the closed forms for k = 1, 2.

use crate::error::{Error, Result};
use crate::group::is_prime;
use serde::{Deserialize, Serialize};

/// Default tolerance for the one-dimensional minimization.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Solution of `p^{1-c_p} = inf_{0<x<1} x^{-(p-1)/3} (x^0 + ... + x^{p-1})`,
/// with `C_p = 1 + 1/c_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpSolution {
    pub p: u64,
    pub x_star: f64,
    pub inf_value: f64,
    pub c_p: f64,
    #[serde(rename = "C_p")]
    pub big_c_p: f64,
}

/// The objective `g(x) = x^{-(p-1)/3} sum_{i<p} x^i`.
pub fn cp_objective(p: u64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut pow = 1.0;
    for _ in 0..p {
        sum += pow;
        pow *= x;
    }
    x.powf(-((p - 1) as f64) / 3.0) * sum
}

/// Derivative of `log g`; negative left of the minimum, positive right of it.
fn cp_log_derivative(p: u64, x: f64) -> f64 {
    let mut sum = 0.0;
    let mut dsum = 0.0;
    let mut pow = 1.0; // x^{i-1} entering the derivative term
    for i in 0..p {
        if i > 0 {
            dsum += i as f64 * pow;
            pow *= x;
        }
        if i == 0 {
            sum += 1.0;
        } else {
            sum += pow;
        }
    }
    -((p - 1) as f64) / (3.0 * x) + dsum / sum
}

/// Minimize `g` on (0,1) by bisection on the derivative of `log g`, with a
/// golden-section fallback if the sign pattern is not monotone at working
/// precision.
pub fn solve_cp(p: u64, tol: f64) -> Result<CpSolution> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p == 2 {
        return Err(Error::EvenPrime);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let (mut lo, mut hi) = (1e-12f64, 1.0 - 1e-12);
    let x_star = if cp_log_derivative(p, lo) < 0.0 && cp_log_derivative(p, hi) > 0.0 {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if cp_log_derivative(p, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else {
        golden_section(|x| cp_objective(p, x), lo, hi, tol)
    };
    let inf_value = cp_objective(p, x_star);
    let c_p = 1.0 - inf_value.ln() / (p as f64).ln();
    if !(0.0 < c_p && c_p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "solver produced c_p = {c_p} outside (0,1)"
        )));
    }
    Ok(CpSolution {
        p,
        x_star,
        inf_value,
        c_p,
        big_c_p: 1.0 + 1.0 / c_p,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Empirical value attached to a sandwich row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachKind {
    Search,
    Envelope,
}

/// One per-delta row of the bound sandwich.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub delta: f64,
    /// `(delta/3)^{C_p}`.
    pub lower: f64,
    /// `delta^3`, from the constant-density random model.
    pub upper_weak: f64,
    /// `delta^{1+log p} + delta^{2 log p}` in the configured log base.
    pub upper_strong: f64,
    pub strong_term_linear: f64,
    pub strong_term_quadratic: f64,
    /// Whether the strong bound actually improves on the weak one here; it
    /// fails near delta = 1 and, for small p, everywhere.
    pub strong_valid: bool,
    pub search_value: Option<f64>,
    pub envelope_value: Option<f64>,
    /// Set when an attached value escapes `[lower, upper_weak]`; always an
    /// artifact bug, never silently logged.
    pub violation: bool,
}

/// The full sandwich report for one prime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub p: u64,
    pub cp: CpSolution,
    pub log_base: f64,
    pub rows: Vec<SandwichRow>,
    /// The strong bound's construction is only guaranteed at sufficiently
    /// large dimension for the given p.
    pub applicability_note: String,
}

impl BoundsReport {
    pub fn has_violation(&self) -> bool {
        self.rows.iter().any(|r| r.violation)
    }

    /// Attach an empirical value to the row at `delta` and re-derive its
    /// violation flag. Containment is checked against `[lower, upper_weak]`
    /// with a small absolute slack for float round-off.
    pub fn attach(&mut self, delta: f64, value: f64, kind: AttachKind) -> Result<()> {
        let row = self
            .rows
            .iter_mut()
            .find(|r| (r.delta - delta).abs() < 1e-12)
            .ok_or_else(|| Error::InvalidInput(format!("no sandwich row at delta = {delta}")))?;
        match kind {
            AttachKind::Search => row.search_value = Some(value),
            AttachKind::Envelope => row.envelope_value = Some(value),
        }
        const SLACK: f64 = 1e-9;
        let out = |v: f64| v < row.lower - SLACK || v > row.upper_weak + SLACK;
        row.violation =
            row.search_value.is_some_and(out) || row.envelope_value.is_some_and(out);
        Ok(())
    }
}

/// Build the per-delta bound rows for a prime `p`. `log_base` defaults to 2
/// in the CLI; the improved-base variant is obtained by passing `1/c` for a
/// construction density `c`.
pub fn sandwich(p: u64, deltas: &[f64], log_base: f64) -> Result<BoundsReport> {
    let cp = solve_cp(p, DEFAULT_TOL)?;
    if !(log_base > 1.0) {
        return Err(Error::InvalidInput("log base must exceed 1".into()));
    }
    let logp = (p as f64).ln() / log_base.ln();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
            return Err(Error::BadDelta(delta));
        }
        let lower = (delta / 3.0).powf(cp.big_c_p);
        let upper_weak = delta.powi(3);
        let strong_term_linear = delta.powf(1.0 + logp);
        let strong_term_quadratic = delta.powf(2.0 * logp);
        let upper_strong = strong_term_linear + strong_term_quadratic;
        rows.push(SandwichRow {
            delta,
            lower,
            upper_weak,
            upper_strong,
            strong_term_linear,
            strong_term_quadratic,
            strong_valid: upper_strong < upper_weak,
            search_value: None,
            envelope_value: None,
            violation: false,
        });
    }
    Ok(BoundsReport {
        p,
        cp,
        log_base,
        rows,
        applicability_note: format!(
            "strong upper bound uses a progression-free construction that is \
             guaranteed only for all sufficiently large dimensions at p = {p}"
        ),
    })
}

/// Size a 3-AP-free subset of `F_p^n` must reach to witness the construction
/// at parameters `(p, n, c)`: `ceil((c p)^n)`.
pub fn behrend_threshold(p: u64, n: u32, c: f64) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if !(c > 0.5 && c < 1.0) {
        return Err(Error::InvalidInput(
            "construction density c must lie in (1/2, 1)".into(),
        ));
    }
    let t = (c * p as f64).powi(n as i32).ceil();
    if !t.is_finite() || t > u64::MAX as f64 {
        return Err(Error::SizeOverflow);
    }
    Ok(t as u64)
}

/// The closed forms for the short cases: `delta^k` for k = 1, 2.
pub fn simple_constants(k: u32, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
        return Err(Error::BadDelta(delta));
    }
    match k {
        1 => Ok(delta),
        2 => Ok(delta * delta),
        _ => Err(Error::InvalidInput(format!(
            "closed form only covers k = 1, 2; got k = {k}"
        ))),
    }
}
