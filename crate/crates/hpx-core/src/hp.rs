//! Hall-Petresco groups: tuples `(P(c_0), ..., P(c_{k-1}))` where the block-j
//! component of `P` is a polynomial of degree at most `j` in the step index.
//! Parametrization, enumeration, membership, and size.

use crate::error::{Error, Result};
use crate::group::{binom_mod_p, mod_inverse, Element, GroupSpec};
use serde::{Deserialize, Serialize};

/// A Hall-Petresco group: evaluation points over a [`GroupSpec`].
///
/// The default points are `0, 1, ..., k-1`, matching the correlation
/// functional used everywhere else; arbitrary distinct points are supported
/// for membership and evaluation. `k = 1` is accepted as the degenerate
/// single-point case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HpSpec {
    spec: GroupSpec,
    points: Vec<u64>,
}

impl HpSpec {
    pub fn new(spec: GroupSpec, points: Vec<u64>) -> Result<Self> {
        let k = points.len();
        let p = spec.p();
        if k == 0 || k as u64 > p {
            return Err(Error::BadK { k, p });
        }
        let mut seen = std::collections::HashSet::new();
        for &c in &points {
            if !seen.insert(c % p) {
                return Err(Error::PointsNotDistinct);
            }
        }
        Ok(HpSpec { spec, points })
    }

    /// Points `0, 1, ..., k-1`.
    pub fn with_default_points(spec: GroupSpec, k: usize) -> Result<Self> {
        HpSpec::new(spec, (0..k as u64).collect())
    }

    pub fn group(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn has_default_points(&self) -> bool {
        self.points.iter().enumerate().all(|(i, &c)| c == i as u64)
    }

    /// First free coordinate of coefficient `i`: blocks `j < i` are pinned to
    /// zero (coefficient 0 is fully free).
    fn coeff_offset(&self, i: usize) -> usize {
        let m = self.spec.num_blocks();
        let j = i.max(1).min(m + 1);
        self.spec.dims()[..j - 1].iter().map(|&d| d as usize).sum()
    }

    /// Size of the coefficient space for index `i` (the tail subgroup).
    pub fn coeff_space_size(&self, i: usize) -> u64 {
        self.spec.tail_size(i)
    }

    /// `prod_i |U_i|`: the number of parameter tuples, which equals the
    /// number of distinct member tuples by injectivity.
    pub fn size(&self) -> Result<u64> {
        let mut acc: u128 = 1;
        for i in 0..self.k() {
            acc = acc
                .checked_mul(self.coeff_space_size(i) as u128)
                .ok_or(Error::SizeOverflow)?;
            if acc > u64::MAX as u128 {
                return Err(Error::SizeOverflow);
            }
        }
        Ok(acc as u64)
    }

    /// Validates the tail constraints and wraps the coefficients.
    pub fn params(&self, coeffs: Vec<Element>) -> Result<HpParams> {
        if coeffs.len() != self.k() {
            return Err(Error::BadArity {
                got: coeffs.len(),
                want: self.k(),
            });
        }
        for (i, u) in coeffs.iter().enumerate() {
            if u.coords().len() != self.spec.total_dim() as usize {
                return Err(Error::SpecMismatch);
            }
            let off = self.coeff_offset(i);
            if u.coords()[..off].iter().any(|&c| c != 0) {
                return Err(Error::TailConstraint { index: i });
            }
        }
        Ok(HpParams { coeffs })
    }

    /// `P(c) = sum_i binom(c, i) * u_i`.
    pub fn eval(&self, params: &HpParams, c: u64) -> Element {
        let p = self.spec.p();
        let mut acc = self.spec.zero();
        for (i, u) in params.coeffs.iter().enumerate() {
            let b = binom_mod_p(c, i as u64, p);
            if b != 0 {
                let term = self.spec.scale(b, u).expect("validated params");
                acc = self.spec.add(&acc, &term).expect("validated params");
            }
        }
        acc
    }

    /// The member tuple `(P(c_0), ..., P(c_{k-1}))`.
    pub fn tuple(&self, params: &HpParams) -> HpTuple {
        let entries = self.points.iter().map(|&c| self.eval(params, c)).collect();
        HpTuple { entries }
    }

    /// Membership test, returning the unique parametrization on success.
    ///
    /// Default points use blockwise iterated finite differences; general
    /// distinct points solve the binomial-Vandermonde system mod p.
    pub fn contains(&self, t: &HpTuple) -> Result<Option<HpParams>> {
        let k = self.k();
        if t.entries.len() != k {
            return Err(Error::BadArity {
                got: t.entries.len(),
                want: k,
            });
        }
        for e in &t.entries {
            if e.coords().len() != self.spec.total_dim() as usize {
                return Err(Error::SpecMismatch);
            }
        }
        let coeffs = if self.has_default_points() {
            self.newton_coefficients(t)
        } else {
            self.solve_coefficients(t)
        };
        // the interpolation is exact at the k points; membership is exactly
        // the tail constraints on the recovered coefficients
        for (i, u) in coeffs.iter().enumerate() {
            let off = self.coeff_offset(i);
            if u.coords()[..off].iter().any(|&c| c != 0) {
                return Ok(None);
            }
        }
        Ok(Some(HpParams { coeffs }))
    }

    /// Newton forward differences: `u_i = Delta^i t (0)`.
    fn newton_coefficients(&self, t: &HpTuple) -> Vec<Element> {
        let mut row: Vec<Element> = t.entries.clone();
        let mut coeffs = Vec::with_capacity(self.k());
        coeffs.push(row[0].clone());
        for _ in 1..self.k() {
            let next: Vec<Element> = row
                .windows(2)
                .map(|w| self.spec.sub(&w[1], &w[0]).expect("same spec"))
                .collect();
            coeffs.push(next[0].clone());
            row = next;
        }
        coeffs
    }

    /// Solve `M u = t` where `M[r][i] = binom(c_r, i) mod p`.
    fn solve_coefficients(&self, t: &HpTuple) -> Vec<Element> {
        let k = self.k();
        let p = self.spec.p();
        let m: Vec<Vec<u64>> = self
            .points
            .iter()
            .map(|&c| (0..k).map(|i| binom_mod_p(c, i as u64, p)).collect())
            .collect();
        let minv = invert_mod_p(&m, p).expect("binomial-Vandermonde at distinct points, k <= p");
        (0..k)
            .map(|i| {
                let mut acc = self.spec.zero();
                for (r, entry) in t.entries.iter().enumerate() {
                    if minv[i][r] != 0 {
                        let term = self.spec.scale(minv[i][r], entry).expect("same spec");
                        acc = self.spec.add(&acc, &term).expect("same spec");
                    }
                }
                acc
            })
            .collect()
    }

    /// Decode a parameter rank (mixed radix over the coefficient spaces,
    /// coefficient 0 most significant) into coefficient coordinate vectors.
    pub fn decode_params(&self, params_rank: u64) -> Result<HpParams> {
        let total = self.size()?;
        if params_rank >= total {
            return Err(Error::IndexOutOfRange {
                index: params_rank,
                size: total,
            });
        }
        let k = self.k();
        let d = self.spec.total_dim() as usize;
        let p = self.spec.p();
        let mut sub = vec![0u64; k];
        let mut rest = params_rank;
        for i in (0..k).rev() {
            let s = self.coeff_space_size(i);
            sub[i] = rest % s;
            rest /= s;
        }
        let coeffs = (0..k)
            .map(|i| {
                let mut coords = vec![0u64; d];
                let mut r = sub[i];
                for q in (self.coeff_offset(i)..d).rev() {
                    coords[q] = r % p;
                    r /= p;
                }
                self.spec.element(coords).expect("residues < p")
            })
            .collect();
        Ok(HpParams { coeffs })
    }

    /// Enumerate every member tuple as entry ranks; `visit(params_rank,
    /// entry_ranks)` runs once per parameter tuple, in rank order.
    pub fn for_each_member(
        &self,
        budget: u64,
        mut visit: impl FnMut(u64, &[u64]),
    ) -> Result<()> {
        let total = self.size()?;
        if total > budget {
            return Err(Error::BudgetExceeded {
                needed: total as u128,
                budget: budget as u128,
            });
        }
        let k = self.k();
        let d = self.spec.total_dim() as usize;
        let p = self.spec.p();
        // b[r][i] = binom(c_r, i) mod p
        let b: Vec<Vec<u64>> = self
            .points
            .iter()
            .map(|&c| (0..k).map(|i| binom_mod_p(c, i as u64, p)).collect())
            .collect();
        let offsets: Vec<usize> = (0..k).map(|i| self.coeff_offset(i)).collect();
        let sizes: Vec<u64> = (0..k).map(|i| self.coeff_space_size(i)).collect();

        let mut coeff_coords = vec![vec![0u64; d]; k];
        let mut entry = vec![0u64; d];
        let mut entry_ranks = vec![0u64; k];
        for params_rank in 0..total {
            let mut rest = params_rank;
            for i in (0..k).rev() {
                let mut r = rest % sizes[i];
                rest /= sizes[i];
                let coords = &mut coeff_coords[i];
                for q in (offsets[i]..d).rev() {
                    coords[q] = r % p;
                    r /= p;
                }
            }
            for r in 0..k {
                entry.iter_mut().for_each(|c| *c = 0);
                for i in 0..k {
                    let br = b[r][i];
                    if br != 0 {
                        for q in offsets[i]..d {
                            entry[q] = (entry[q] + br * coeff_coords[i][q]) % p;
                        }
                    }
                }
                let mut rank = 0u64;
                for &c in entry.iter() {
                    rank = rank * p + c;
                }
                entry_ranks[r] = rank;
            }
            visit(params_rank, &entry_ranks);
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for HpSpec {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            p: u64,
            dims: Vec<u32>,
            points: Vec<u64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let spec = GroupSpec::new(raw.p, raw.dims).map_err(serde::de::Error::custom)?;
        HpSpec::new(spec, raw.points).map_err(serde::de::Error::custom)
    }
}

/// One coefficient tuple `(u_0, ..., u_{k-1})` with `u_i` in the tail
/// subgroup `U_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HpParams {
    coeffs: Vec<Element>,
}

impl HpParams {
    pub fn coeffs(&self) -> &[Element] {
        &self.coeffs
    }
}

/// A candidate progression: `k` group elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HpTuple {
    entries: Vec<Element>,
}

impl HpTuple {
    pub fn new(entries: Vec<Element>) -> Self {
        HpTuple { entries }
    }

    pub fn entries(&self) -> &[Element] {
        &self.entries
    }

    /// Trivial progressions are the constant tuples `(u, u, ..., u)`.
    pub fn is_trivial(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] == w[1])
    }
}

/// Gauss-Jordan inverse of a square matrix mod p; `None` if singular.
fn invert_mod_p(m: &[Vec<u64>], p: u64) -> Option<Vec<Vec<u64>>> {
    let n = m.len();
    let mut a: Vec<Vec<u64>> = m.iter().map(|row| row.iter().map(|&x| x % p).collect()).collect();
    let mut inv: Vec<Vec<u64>> = (0..n)
        .map(|i| (0..n).map(|j| u64::from(i == j)).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != 0)?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = mod_inverse(a[col][col], p);
        for j in 0..n {
            a[col][j] = a[col][j] * scale % p;
            inv[col][j] = inv[col][j] * scale % p;
        }
        for r in 0..n {
            if r != col && a[r][col] != 0 {
                let f = a[r][col];
                for j in 0..n {
                    a[r][j] = (a[r][j] + (p - f) * a[col][j]) % p;
                    inv[r][j] = (inv[r][j] + (p - f) * inv[col][j]) % p;
                }
            }
        }
    }
    Some(inv)
}
