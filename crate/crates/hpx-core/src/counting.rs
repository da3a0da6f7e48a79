//! The correlation functional S^k: exact brute force over the Hall-Petresco
//! group for all shapes, and a character-transform fast path for the
//! single-block three-point case.

use crate::error::{Error, Result};
use crate::group::{DenseFunction, ExactDensity, GroupSpec, SubsetMask};
use crate::hp::HpSpec;
use num_complex::Complex64;

/// Default cap on parameter evaluations for brute-force sums.
pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// `S^k(f)`: the uniform average over the Hall-Petresco group of
/// `prod_i f(P(c_i))`.
pub fn s_k_bruteforce(f: &DenseFunction, hp: &HpSpec, budget: u64) -> Result<f64> {
    let fs: Vec<&DenseFunction> = vec![f; hp.k()];
    s_k_bruteforce_multi(&fs, hp, budget)
}

/// Multi-function variant: averages `prod_i f_i(P(c_i))` with one function
/// per evaluation point.
pub fn s_k_bruteforce_multi(fs: &[&DenseFunction], hp: &HpSpec, budget: u64) -> Result<f64> {
    if fs.len() != hp.k() {
        return Err(Error::BadArity {
            got: fs.len(),
            want: hp.k(),
        });
    }
    for f in fs {
        if f.spec() != hp.group() {
            return Err(Error::SpecMismatch);
        }
    }
    let tables: Vec<&[f64]> = fs.iter().map(|f| f.values()).collect();
    let mut sum = 0.0f64;
    hp.for_each_member(budget, |_, entries| {
        let mut prod = 1.0;
        for (i, &r) in entries.iter().enumerate() {
            prod *= tables[i][r as usize];
        }
        sum += prod;
    })?;
    Ok(sum / hp.size()? as f64)
}

/// `E_{x,a} f(x) g(x+a) h(x+2a)` over a single-block `F_p^n`, `p` odd,
/// computed as `sum_t F(t) G(-2t) H(t)` in the character basis.
pub fn s3_fourier(f: &DenseFunction, g: &DenseFunction, h: &DenseFunction) -> Result<f64> {
    let spec = f.spec();
    if g.spec() != spec || h.spec() != spec {
        return Err(Error::SpecMismatch);
    }
    if spec.num_blocks() != 1 {
        return Err(Error::NotSingleBlock);
    }
    let p = spec.p();
    if p == 2 {
        return Err(Error::EvenPrime);
    }
    let fh = forward_transform(spec, f.values());
    let gh = forward_transform(spec, g.values());
    let hh = forward_transform(spec, h.values());
    // t -> -2t mod p is a permutation of the dual group for odd p
    let neg2 = (p - 2) % p;
    let size = spec.size();
    let mut acc = Complex64::new(0.0, 0.0);
    for t in 0..size {
        let mapped = map_rank_digits(t, size, p, neg2);
        acc += fh[t as usize] * gh[mapped as usize] * hh[t as usize];
    }
    Ok(acc.re)
}

/// Exact member-tuple counts for an indicator set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetCount {
    /// Parameter tuples whose entries all lie in the set.
    pub members_in_set: u64,
    /// Those that are not constant tuples.
    pub nontrivial: u64,
    /// Total parameter count (the Haar denominator).
    pub hp_size: u64,
}

impl SubsetCount {
    pub fn density(&self) -> ExactDensity {
        ExactDensity::new(self.members_in_set, self.hp_size)
    }

    /// HP-free means every member inside the set is a trivial progression.
    pub fn is_free(&self) -> bool {
        self.nontrivial == 0
    }
}

/// Count member tuples inside `A^k`, split into trivial and non-trivial.
pub fn count_subset(a: &SubsetMask, hp: &HpSpec, budget: u64) -> Result<SubsetCount> {
    if a.spec() != hp.group() {
        return Err(Error::SpecMismatch);
    }
    let mut members = 0u64;
    let mut nontrivial = 0u64;
    hp.for_each_member(budget, |_, entries| {
        if entries.iter().all(|&r| a.contains(r)) {
            members += 1;
            if entries.windows(2).any(|w| w[0] != w[1]) {
                nontrivial += 1;
            }
        }
    })?;
    Ok(SubsetCount {
        members_in_set: members,
        nontrivial,
        hp_size: hp.size()?,
    })
}

/// `S^k(1_A)` as an exact rational.
pub fn hp_density_subset(a: &SubsetMask, hp: &HpSpec, budget: u64) -> Result<ExactDensity> {
    Ok(count_subset(a, hp, budget)?.density())
}

/// Number of non-constant member tuples inside `A^k`; zero iff `A` is
/// HP-free.
pub fn nontrivial_hp_count(a: &SubsetMask, hp: &HpSpec, budget: u64) -> Result<u64> {
    Ok(count_subset(a, hp, budget)?.nontrivial)
}

/// Normalized character transform `F(t) = E_x f(x) zeta^{<t,x>}`, one
/// length-p DFT along each coordinate axis.
pub(crate) fn forward_transform(spec: &GroupSpec, values: &[f64]) -> Vec<Complex64> {
    let data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    axis_transforms(spec, data, 1.0, true)
}

/// Inverse of [`forward_transform`]: `f(x) = sum_t F(t) zeta^{-<t,x>}`.
pub(crate) fn inverse_transform(spec: &GroupSpec, coeffs: &[Complex64]) -> Vec<Complex64> {
    axis_transforms(spec, coeffs.to_vec(), -1.0, false)
}

fn axis_transforms(
    spec: &GroupSpec,
    mut data: Vec<Complex64>,
    sign: f64,
    normalize: bool,
) -> Vec<Complex64> {
    let p = spec.p() as usize;
    let d = spec.total_dim() as usize;
    let size = data.len();
    let omega: Vec<Complex64> = (0..p)
        .map(|j| Complex64::from_polar(1.0, sign * std::f64::consts::TAU * j as f64 / p as f64))
        .collect();
    let scale = if normalize { 1.0 / p as f64 } else { 1.0 };
    let mut scratch = vec![Complex64::new(0.0, 0.0); p];
    // axis q has stride p^{d-1-q} under the first-MSB rank order
    let mut stride = size / p;
    for _axis in 0..d {
        let block = stride * p;
        let mut base = 0;
        while base < size {
            for off in 0..stride {
                let start = base + off;
                for (t, s) in scratch.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for x in 0..p {
                        acc += data[start + x * stride] * omega[t * x % p];
                    }
                    *s = acc * scale;
                }
                for (t, s) in scratch.iter().enumerate() {
                    data[start + t * stride] = *s;
                }
            }
            base += block;
        }
        stride /= p;
    }
    data
}

/// Apply `digit -> (c * digit) mod p` to every base-p digit of a rank.
fn map_rank_digits(rank: u64, size: u64, p: u64, c: u64) -> u64 {
    let mut out = 0u64;
    let mut place = size / p;
    let mut rest = rank;
    while place >= 1 {
        let digit = rest / place;
        rest %= place;
        out += (c * digit % p) * place;
        if place == 1 {
            break;
        }
        place /= p;
    }
    out
}
