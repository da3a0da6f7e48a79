//! Random-set model: counter-based Bernoulli sampling keyed by element rank
//! (one sample path across nested windows), empirical progression densities,
//! and z-scores against exactly computed variances of the dependent sums.

use crate::error::{Error, Result};
use crate::group::{GroupSpec, SubsetMask};
use serde::{Deserialize, Serialize};

/// The statistical gate in standard deviations; chosen so a full run's
/// false-failure probability stays below 1e-3.
pub const GATE_SIGMA: f64 = 4.0;

/// A distribution function: element-wise Bernoulli success probabilities.
///
/// Tables are declared on the largest window; smaller windows embed by rank
/// (prefix zero-padding), so `Table` values index directly and
/// `CoordinateProduct` factors align at the least-significant end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionFn {
    Constant { value: f64 },
    CoordinateProduct { factors: Vec<Vec<f64>> },
    Table { values: Vec<f64> },
}

impl DistributionFn {
    pub fn constant(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) || value.is_nan() {
            return Err(Error::ValueOutOfRange(value));
        }
        Ok(DistributionFn::Constant { value })
    }

    pub fn validate(&self, p: u64) -> Result<()> {
        match self {
            DistributionFn::Constant { value } => {
                if !(0.0..=1.0).contains(value) {
                    return Err(Error::ValueOutOfRange(*value));
                }
            }
            DistributionFn::CoordinateProduct { factors } => {
                for f in factors {
                    if f.len() != p as usize {
                        return Err(Error::BadTableLength {
                            got: f.len(),
                            want: p as usize,
                        });
                    }
                    for &v in f {
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::ValueOutOfRange(v));
                        }
                    }
                }
            }
            DistributionFn::Table { values } => {
                for &v in values {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::ValueOutOfRange(v));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluate at an element of `window`, given by rank.
    pub fn eval(&self, window: &GroupSpec, rank: u64) -> Result<f64> {
        match self {
            DistributionFn::Constant { value } => Ok(*value),
            DistributionFn::CoordinateProduct { factors } => {
                let d = window.total_dim() as usize;
                if factors.len() < d {
                    return Err(Error::BadTableLength {
                        got: factors.len(),
                        want: d,
                    });
                }
                let e = window.unrank(rank)?;
                let skip = factors.len() - d;
                let mut acc = 1.0;
                for (j, &c) in e.coords().iter().enumerate() {
                    acc *= factors[skip + j][c as usize];
                }
                Ok(acc)
            }
            DistributionFn::Table { values } => {
                if (rank as usize) < values.len() {
                    Ok(values[rank as usize])
                } else {
                    Err(Error::IndexOutOfRange {
                        index: rank,
                        size: values.len() as u64,
                    })
                }
            }
        }
    }
}

/// SplitMix64 at a fixed index: the draw for `(seed, counter)` never depends
/// on enumeration order, which is what makes nested windows consistent.
fn counter_draw(seed: u64, counter: u64) -> u64 {
    let mut z = seed.wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in [0, 1) for `(seed, rank)`.
pub fn counter_unit(seed: u64, counter: u64) -> f64 {
    (counter_draw(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent Bernoulli(F(gamma)) draws keyed by `(seed, rank(gamma))`.
pub fn sample_random_set(f: &DistributionFn, window: &GroupSpec, seed: u64) -> Result<SubsetMask> {
    f.validate(window.p())?;
    let mut mask = SubsetMask::empty(window.clone());
    for r in 0..window.size() {
        if counter_unit(seed, r) < f.eval(window, r)? {
            mask.insert(r);
        }
    }
    Ok(mask)
}

/// One shift's comparison of empirical vs expected progression density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub shift_rank: u64,
    /// Number of window points whose whole progression lies in the sample.
    pub empirical_count: u64,
    pub empirical: f64,
    pub target: f64,
    /// Exact standard deviation of the dependent count.
    pub std_dev: f64,
    pub z: f64,
    pub pass: bool,
}

/// Per-window block of a simulation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub dims: Vec<u32>,
    pub size: u64,
    pub density_empirical: f64,
    pub density_target: f64,
    pub density_std_dev: f64,
    pub density_z: f64,
    pub density_pass: bool,
    pub shifts: Vec<ShiftRow>,
}

/// Statistical verification record for one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub k: usize,
    pub gate_sigma: f64,
    pub windows: Vec<WindowReport>,
    pub pass: bool,
}

/// Sample one random set per window and compare, for every nonzero shift
/// `a`, the empirical progression density `E_x prod_i 1_E(x + i a)` against
/// its expectation, with the variance of the dependent sum computed exactly
/// by grouping correlated pairs (they differ by `d a`, `|d| < k`).
pub fn verify_randomset(
    f: &DistributionFn,
    k: usize,
    shift_ranks: &[u64],
    windows: &[GroupSpec],
    seed: u64,
) -> Result<SimReport> {
    if windows.is_empty() {
        return Err(Error::InvalidInput("need at least one window".into()));
    }
    let p = windows[0].p();
    if k == 0 || k as u64 > p {
        return Err(Error::BadK { k, p });
    }
    for w in windows {
        if w.p() != p {
            return Err(Error::SpecMismatch);
        }
    }
    let min_size = windows.iter().map(|w| w.size()).min().unwrap();
    for &s in shift_ranks {
        if s == 0 {
            return Err(Error::InvalidInput("zero shift rejected".into()));
        }
        if s >= min_size {
            return Err(Error::IndexOutOfRange {
                index: s,
                size: min_size,
            });
        }
    }
    f.validate(p)?;
    let mut window_reports = Vec::with_capacity(windows.len());
    let mut all_pass = true;
    for window in windows {
        let size = window.size();
        let sample = sample_random_set(f, window, seed)?;
        let fv: Vec<f64> = (0..size)
            .map(|r| f.eval(window, r))
            .collect::<Result<_>>()?;

        // set density: sum of independent Bernoullis, exact variance
        let density_target_sum: f64 = fv.iter().sum();
        let density_var: f64 = fv.iter().map(|&q| q * (1.0 - q)).sum();
        let observed = sample.cardinality() as f64;
        let (density_z, density_pass) = score(observed, density_target_sum, density_var);

        let mut shifts_out = Vec::with_capacity(shift_ranks.len());
        for &srank in shift_ranks {
            let row = shift_row(window, &sample, &fv, k, srank)?;
            all_pass &= row.pass;
            shifts_out.push(row);
        }
        all_pass &= density_pass;
        window_reports.push(WindowReport {
            dims: window.dims().to_vec(),
            size,
            density_empirical: observed / size as f64,
            density_target: density_target_sum / size as f64,
            density_std_dev: density_var.sqrt() / size as f64,
            density_z,
            density_pass,
            shifts: shifts_out,
        });
    }
    Ok(SimReport {
        seed,
        k,
        gate_sigma: GATE_SIGMA,
        windows: window_reports,
        pass: all_pass,
    })
}

fn score(observed: f64, expected: f64, variance: f64) -> (f64, bool) {
    if variance <= 1e-18 {
        // deterministic distribution: demand exact agreement
        let exact = (observed - expected).abs() < 1e-9;
        return (if exact { 0.0 } else { f64::INFINITY }, exact);
    }
    let z = (observed - expected) / variance.sqrt();
    (z, z.abs() <= GATE_SIGMA)
}

fn shift_row(
    window: &GroupSpec,
    sample: &SubsetMask,
    fv: &[f64],
    k: usize,
    shift_rank: u64,
) -> Result<ShiftRow> {
    let size = window.size();
    let p = window.p();
    let a = window.unrank(shift_rank)?;
    // perm[j][x] = rank(x + j a) for every residue j
    let mut perm = Vec::with_capacity(p as usize);
    for j in 0..p {
        let ja = window.scale(j, &a)?;
        let mut row = Vec::with_capacity(size as usize);
        for x in 0..size {
            row.push(window.rank(&window.add(&window.unrank(x)?, &ja)?)?);
        }
        perm.push(row);
    }
    // E Y_x and the observed count
    let mut ey = Vec::with_capacity(size as usize);
    let mut count = 0u64;
    for x in 0..size as usize {
        let mut prod = 1.0;
        let mut hit = true;
        for row in perm.iter().take(k) {
            let pos = row[x] as usize;
            prod *= fv[pos];
            hit &= sample.contains(pos as u64);
        }
        ey.push(prod);
        count += hit as u64;
    }
    let target_sum: f64 = ey.iter().sum();

    // distinct residues d with overlapping progressions
    let mut residues: Vec<u64> = Vec::new();
    for d in -(k as i64 - 1)..=(k as i64 - 1) {
        let r = d.rem_euclid(p as i64) as u64;
        if !residues.contains(&r) {
            residues.push(r);
        }
    }
    // index unions J(d) = {0..k} cup {d..d+k} mod p
    let unions: Vec<Vec<u64>> = residues
        .iter()
        .map(|&r| {
            let mut j: Vec<u64> = (0..k as u64)
                .flat_map(|i| [i % p, (r + i) % p])
                .collect();
            j.sort_unstable();
            j.dedup();
            j
        })
        .collect();
    let mut variance = 0.0f64;
    let mut scratch: Vec<u64> = Vec::with_capacity(2 * k);
    for x in 0..size as usize {
        for (ri, &r) in residues.iter().enumerate() {
            // E[Y_x Y_{x+da}] = prod of F over the union of positions
            scratch.clear();
            for &j in &unions[ri] {
                scratch.push(perm[j as usize][x]);
            }
            scratch.sort_unstable();
            scratch.dedup();
            let joint: f64 = scratch.iter().map(|&pos| fv[pos as usize]).product();
            let other = perm[r as usize][x] as usize;
            variance += joint - ey[x] * ey[other];
        }
    }
    variance = variance.max(0.0);
    let (z, pass) = score(count as f64, target_sum, variance);
    Ok(ShiftRow {
        shift_rank,
        empirical_count: count,
        empirical: count as f64 / size as f64,
        target: target_sum / size as f64,
        std_dev: variance.sqrt() / size as f64,
        z,
        pass,
    })
}

/// The constant-density specialization: `F = delta` on the window
/// `F_p^window_exp`, with the first `num_shifts` basis vectors as shifts.
/// The target progression density is `delta^k` for every shift.
pub fn delta_k_experiment(
    p: u64,
    k: usize,
    delta: f64,
    window_exp: u32,
    seed: u64,
    num_shifts: usize,
) -> Result<SimReport> {
    if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
        return Err(Error::BadDelta(delta));
    }
    let window = GroupSpec::vector_space(p, window_exp)?;
    let f = DistributionFn::constant(delta)?;
    let n = window.total_dim() as usize;
    let shifts: Vec<u64> = (0..num_shifts.min(n))
        .map(|i| window.rank(&window.basis(i).unwrap()).unwrap())
        .collect();
    if shifts.is_empty() {
        return Err(Error::InvalidInput("window too small for any shift".into()));
    }
    verify_randomset(&f, k, &shifts, &[window], seed)
}
