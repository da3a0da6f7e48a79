//! Finite products of F_p vector spaces: element arithmetic, mixed-radix
//! indexing, dense value tables, bitmask subsets, and binomials mod p.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense tables are the storage model, so group sizes are capped here.
pub const MAX_GROUP_SIZE: u64 = 1 << 31;

/// The product group `F_p^{n_1} x ... x F_p^{n_m}`.
///
/// Block `j` (1-indexed) carries dimension `dims[j-1]`. Elements are indexed
/// by a mixed-radix rank in base `p` with the first coordinate most
/// significant; every module in this crate shares that order so bitmaps and
/// transform layouts are interchangeable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GroupSpec {
    p: u64,
    dims: Vec<u32>,
}

impl GroupSpec {
    pub fn new(p: u64, dims: Vec<u32>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if dims.is_empty() {
            return Err(Error::EmptyDims);
        }
        let total: u32 = dims.iter().sum();
        // p^total <= 2^31, checked without overflow
        let mut size: u64 = 1;
        for _ in 0..total {
            size = size.saturating_mul(p);
            if size > MAX_GROUP_SIZE {
                return Err(Error::GroupTooLarge { total_dim: total });
            }
        }
        Ok(GroupSpec { p, dims })
    }

    /// Single block `F_p^n`.
    pub fn vector_space(p: u64, n: u32) -> Result<Self> {
        GroupSpec::new(p, vec![n])
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    /// Number of blocks `m`.
    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> u32 {
        self.dims.iter().sum()
    }

    /// `|U| = p^{sum n_i}`.
    pub fn size(&self) -> u64 {
        self.p.pow(self.total_dim())
    }

    /// Size of the tail product of blocks `>= j` (1-indexed). `j = 0` is the
    /// whole group and `j > m` the trivial group.
    pub fn tail_size(&self, j: usize) -> u64 {
        let start = j.saturating_sub(1).min(self.dims.len());
        let d: u32 = self.dims[start..].iter().sum();
        self.p.pow(d)
    }

    /// First coordinate index of block `j` (1-indexed).
    pub fn block_offset(&self, j: usize) -> usize {
        self.dims[..j - 1].iter().map(|&d| d as usize).sum()
    }

    pub fn zero(&self) -> Element {
        Element {
            coords: vec![0; self.total_dim() as usize],
        }
    }

    /// Validates residues and arity, then wraps the coordinates.
    pub fn element(&self, coords: Vec<u64>) -> Result<Element> {
        if coords.len() != self.total_dim() as usize {
            return Err(Error::BadArity {
                got: coords.len(),
                want: self.total_dim() as usize,
            });
        }
        for &c in &coords {
            if c >= self.p {
                return Err(Error::BadResidue { value: c, p: self.p });
            }
        }
        Ok(Element { coords })
    }

    /// Standard basis vector `e_i` (0-indexed coordinate).
    pub fn basis(&self, i: usize) -> Result<Element> {
        let mut e = self.zero();
        if i >= e.coords.len() {
            return Err(Error::IndexOutOfRange {
                index: i as u64,
                size: e.coords.len() as u64,
            });
        }
        e.coords[i] = 1;
        Ok(e)
    }

    /// Mixed-radix rank, first coordinate most significant.
    pub fn rank(&self, e: &Element) -> Result<u64> {
        if e.coords.len() != self.total_dim() as usize {
            return Err(Error::SpecMismatch);
        }
        let mut r: u64 = 0;
        for &c in &e.coords {
            if c >= self.p {
                return Err(Error::BadResidue { value: c, p: self.p });
            }
            r = r * self.p + c;
        }
        Ok(r)
    }

    pub fn unrank(&self, i: u64) -> Result<Element> {
        let size = self.size();
        if i >= size {
            return Err(Error::IndexOutOfRange { index: i, size });
        }
        let n = self.total_dim() as usize;
        let mut coords = vec![0u64; n];
        let mut rest = i;
        for k in (0..n).rev() {
            coords[k] = rest % self.p;
            rest /= self.p;
        }
        Ok(Element { coords })
    }

    /// Coordinatewise addition mod p.
    pub fn add(&self, a: &Element, b: &Element) -> Result<Element> {
        self.check_pair(a, b)?;
        let coords = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(&x, &y)| (x + y) % self.p)
            .collect();
        Ok(Element { coords })
    }

    pub fn sub(&self, a: &Element, b: &Element) -> Result<Element> {
        self.check_pair(a, b)?;
        let coords = a
            .coords
            .iter()
            .zip(&b.coords)
            .map(|(&x, &y)| (x + self.p - y) % self.p)
            .collect();
        Ok(Element { coords })
    }

    /// Scalar action `c * a` mod p.
    pub fn scale(&self, c: u64, a: &Element) -> Result<Element> {
        if a.coords.len() != self.total_dim() as usize {
            return Err(Error::SpecMismatch);
        }
        let c = c % self.p;
        let coords = a.coords.iter().map(|&x| (c * x) % self.p).collect();
        Ok(Element { coords })
    }

    fn check_pair(&self, a: &Element, b: &Element) -> Result<()> {
        let n = self.total_dim() as usize;
        if a.coords.len() != n || b.coords.len() != n {
            return Err(Error::SpecMismatch);
        }
        Ok(())
    }

    /// All group elements in rank order.
    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.size()).map(move |i| self.unrank(i).expect("in range"))
    }

    /// Canonical text form: residues comma-separated, blocks joined by `|`,
    /// e.g. `"1,2|0"` for dims `(2,1)`.
    pub fn format_element(&self, e: &Element) -> String {
        let mut out = String::new();
        let mut idx = 0usize;
        for (j, &d) in self.dims.iter().enumerate() {
            if j > 0 {
                out.push('|');
            }
            for k in 0..d as usize {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&e.coords[idx].to_string());
                idx += 1;
            }
        }
        out
    }

    pub fn parse_element(&self, s: &str) -> Result<Element> {
        let blocks: Vec<&str> = s.split('|').collect();
        if blocks.len() != self.dims.len() {
            return Err(Error::InvalidInput(format!(
                "element '{s}' has {} blocks, spec has {}",
                blocks.len(),
                self.dims.len()
            )));
        }
        let mut coords = Vec::with_capacity(self.total_dim() as usize);
        for (block, &d) in blocks.iter().zip(&self.dims) {
            let parts: Vec<&str> = if block.trim().is_empty() {
                vec![]
            } else {
                block.split(',').collect()
            };
            if parts.len() != d as usize {
                return Err(Error::InvalidInput(format!(
                    "block '{block}' has {} coordinates, expected {d}",
                    parts.len()
                )));
            }
            for part in parts {
                let v: u64 = part
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad residue '{part}'")))?;
                if v >= self.p {
                    return Err(Error::BadResidue { value: v, p: self.p });
                }
                coords.push(v);
            }
        }
        Ok(Element { coords })
    }
}

impl<'de> Deserialize<'de> for GroupSpec {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            p: u64,
            dims: Vec<u32>,
        }
        let raw = Raw::deserialize(deserializer)?;
        GroupSpec::new(raw.p, raw.dims).map_err(serde::de::Error::custom)
    }
}

/// A point of the group: one residue per coordinate, partitioned into blocks
/// by the owning [`GroupSpec`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Element {
    coords: Vec<u64>,
}

impl Element {
    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }
}

/// A table of values in [0,1] over all group elements, indexed by rank.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFunction {
    spec: GroupSpec,
    values: Vec<f64>,
}

impl DenseFunction {
    pub fn new(spec: GroupSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.size() as usize {
            return Err(Error::BadTableLength {
                got: values.len(),
                want: spec.size() as usize,
            });
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::ValueOutOfRange(v));
            }
        }
        Ok(DenseFunction { spec, values })
    }

    pub fn constant(spec: GroupSpec, value: f64) -> Result<Self> {
        let n = spec.size() as usize;
        DenseFunction::new(spec, vec![value; n])
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, rank: u64) -> f64 {
        self.values[rank as usize]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A real-valued table over the group, without the [0,1] restriction.
/// Averaging operators and spectral projections live here.
#[derive(Debug, Clone, PartialEq)]
pub struct RealFunction {
    spec: GroupSpec,
    values: Vec<f64>,
}

impl RealFunction {
    pub fn new(spec: GroupSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.size() as usize {
            return Err(Error::BadTableLength {
                got: values.len(),
                want: spec.size() as usize,
            });
        }
        Ok(RealFunction { spec, values })
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// L2 norm with respect to the uniform probability measure.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn l2_distance(&self, other: &RealFunction) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        (self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / self.values.len() as f64)
            .sqrt()
    }
}

impl From<DenseFunction> for RealFunction {
    fn from(f: DenseFunction) -> Self {
        RealFunction {
            spec: f.spec,
            values: f.values,
        }
    }
}

/// An indicator bitmap over the group with cached cardinality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetMask {
    spec: GroupSpec,
    words: Vec<u64>,
    cardinality: usize,
}

impl SubsetMask {
    pub fn empty(spec: GroupSpec) -> Self {
        let n = spec.size() as usize;
        SubsetMask {
            spec,
            words: vec![0; n.div_ceil(64)],
            cardinality: 0,
        }
    }

    pub fn full(spec: GroupSpec) -> Self {
        let n = spec.size() as usize;
        let mut mask = SubsetMask::empty(spec);
        for i in 0..n {
            mask.insert(i as u64);
        }
        mask
    }

    pub fn from_ranks(spec: GroupSpec, ranks: &[u64]) -> Result<Self> {
        let size = spec.size();
        let mut mask = SubsetMask::empty(spec);
        for &r in ranks {
            if r >= size {
                return Err(Error::IndexOutOfRange { index: r, size });
            }
            mask.insert(r);
        }
        Ok(mask)
    }

    pub fn from_elements(spec: GroupSpec, elems: &[Element]) -> Result<Self> {
        let ranks: Vec<u64> = elems
            .iter()
            .map(|e| spec.rank(e))
            .collect::<Result<_>>()?;
        SubsetMask::from_ranks(spec, &ranks)
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn cardinality(&self) -> usize {
        self.cardinality
    }

    pub fn density(&self) -> f64 {
        self.cardinality as f64 / self.spec.size() as f64
    }

    pub fn contains(&self, rank: u64) -> bool {
        let r = rank as usize;
        self.words[r / 64] >> (r % 64) & 1 == 1
    }

    pub fn insert(&mut self, rank: u64) {
        let r = rank as usize;
        let bit = 1u64 << (r % 64);
        if self.words[r / 64] & bit == 0 {
            self.words[r / 64] |= bit;
            self.cardinality += 1;
        }
    }

    pub fn remove(&mut self, rank: u64) {
        let r = rank as usize;
        let bit = 1u64 << (r % 64);
        if self.words[r / 64] & bit != 0 {
            self.words[r / 64] &= !bit;
            self.cardinality -= 1;
        }
    }

    /// Member ranks in increasing order.
    pub fn iter_ranks(&self) -> impl Iterator<Item = u64> + '_ {
        let size = self.spec.size();
        (0..size).filter(move |&r| self.contains(r))
    }

    /// Coercion to a 0/1 dense table.
    pub fn to_dense(&self) -> DenseFunction {
        let values = (0..self.spec.size())
            .map(|r| if self.contains(r) { 1.0 } else { 0.0 })
            .collect();
        DenseFunction {
            spec: self.spec.clone(),
            values,
        }
    }

    /// Blockwise product set: blocks of `self` and `other` are concatenated
    /// per block index, so degree budgets line up. Both masks must have the
    /// same number of blocks.
    pub fn block_product(&self, other: &SubsetMask) -> Result<SubsetMask> {
        let (sa, sb) = (&self.spec, &other.spec);
        if sa.p() != sb.p() || sa.num_blocks() != sb.num_blocks() {
            return Err(Error::SpecMismatch);
        }
        let dims: Vec<u32> = sa
            .dims()
            .iter()
            .zip(sb.dims())
            .map(|(&a, &b)| a + b)
            .collect();
        let spec = GroupSpec::new(sa.p(), dims)?;
        let mut mask = SubsetMask::empty(spec.clone());
        for ra in self.iter_ranks() {
            let ea = sa.unrank(ra)?;
            for rb in other.iter_ranks() {
                let eb = sb.unrank(rb)?;
                let mut coords = Vec::with_capacity(spec.total_dim() as usize);
                let (mut ia, mut ib) = (0usize, 0usize);
                for j in 0..sa.num_blocks() {
                    let (da, db) = (sa.dims()[j] as usize, sb.dims()[j] as usize);
                    coords.extend_from_slice(&ea.coords()[ia..ia + da]);
                    coords.extend_from_slice(&eb.coords()[ib..ib + db]);
                    ia += da;
                    ib += db;
                }
                mask.insert(spec.rank(&spec.element(coords)?)?);
            }
        }
        Ok(mask)
    }
}

/// An exactly counted density `num / den`, stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactDensity {
    pub num: u64,
    pub den: u64,
}

impl ExactDensity {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let g = num_integer::gcd(num.max(1), den);
        let g = if num == 0 { den } else { g };
        ExactDensity {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Exact comparison by cross-multiplication.
    pub fn eq_ratio(self, num: u64, den: u64) -> bool {
        (self.num as u128) * (den as u128) == (num as u128) * (self.den as u128)
    }

    pub fn le(self, other: ExactDensity) -> bool {
        (self.num as u128) * (other.den as u128) <= (other.num as u128) * (self.den as u128)
    }
}

impl std::fmt::Display for ExactDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Binomial coefficient mod p by Lucas' digit decomposition, with the
/// convention that `binom(n, i) = 0` whenever `i > n`.
pub fn binom_mod_p(n: u64, i: u64, p: u64) -> u64 {
    if i > n {
        return 0;
    }
    let (mut n, mut i) = (n, i);
    let mut acc = 1u64;
    while i > 0 || n > 0 {
        let (nd, id) = (n % p, i % p);
        if id > nd {
            return 0;
        }
        acc = acc * binom_digit(nd, id, p) % p;
        if acc == 0 {
            return 0;
        }
        n /= p;
        i /= p;
    }
    acc
}

/// `binom(a, b) mod p` for digits `b <= a < p`, via the multiplicative
/// formula with Fermat inverses.
fn binom_digit(a: u64, b: u64, p: u64) -> u64 {
    let b = b.min(a - b);
    let mut acc = 1u64;
    for j in 0..b {
        acc = mul_mod(acc, (a - j) % p, p);
        acc = mul_mod(acc, mod_inverse(j + 1, p), p);
    }
    acc
}

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

pub(crate) fn mod_inverse(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}
