//! Extremal subset optimization: exact branch-and-bound maxima of HP-free
//! sets, exact minima of the HP density at fixed cardinality, fixed-size
//! annealing search, and the lower convex envelope of sampled values.

use crate::counting::DEFAULT_BUDGET;
use crate::error::{Error, Result};
use crate::group::{ExactDensity, SubsetMask};
use crate::hp::HpSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest group handled by the HP-free branch-and-bound.
pub const RK_EXACT_LIMIT: u64 = 128;
/// Largest group handled by the fixed-cardinality exact minimizer.
pub const R_EXACT_LIMIT: u64 = 25;

/// Annealing parameters. Fixed seed gives bit-identical results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub chains: u32,
    pub steps: u64,
    pub t_initial: f64,
    pub t_final: f64,
    #[serde(rename = "move")]
    pub move_kind: MoveKind,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            chains: 4,
            steps: 20_000,
            t_initial: 2.0,
            t_final: 1e-3,
            move_kind: MoveKind::Swap,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidInput("steps must be >= 1".into()));
        }
        if self.chains < 1 {
            return Err(Error::InvalidInput("chains must be >= 1".into()));
        }
        if !(self.t_initial > 0.0 && self.t_final > 0.0 && self.t_final <= self.t_initial) {
            return Err(Error::InvalidInput(
                "temperatures must be positive and nonincreasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveKind {
    #[serde(rename = "swap")]
    Swap,
    #[serde(rename = "toggle-with-repair")]
    ToggleRepair,
}

/// Element visit order for the exact searches; used to cross-validate
/// determinism with two independent orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOrder {
    Forward,
    Reverse,
}

/// Member tuples flattened to distinct entry ranks, with reverse index.
struct TupleTable {
    entries: Vec<u32>,
    offsets: Vec<u32>,
    by_element: Vec<Vec<u32>>,
    n_elements: usize,
}

impl TupleTable {
    fn arity(&self, t: usize) -> u32 {
        self.offsets[t + 1] - self.offsets[t]
    }

    fn entries_of(&self, t: usize) -> &[u32] {
        &self.entries[self.offsets[t] as usize..self.offsets[t + 1] as usize]
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// All member tuples (one row per parameter tuple); `nontrivial_only`
/// dedupes into the distinct forbidden sets of the HP-free search.
fn build_table(hp: &HpSpec, nontrivial_only: bool, budget: u64) -> Result<TupleTable> {
    let n = hp.group().size() as usize;
    let mut entries = Vec::new();
    let mut offsets = vec![0u32];
    let mut seen = std::collections::HashSet::new();
    hp.for_each_member(budget, |_, ranks| {
        let mut distinct: Vec<u32> = ranks.iter().map(|&r| r as u32).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if nontrivial_only {
            if distinct.len() == 1 {
                return; // constant tuple
            }
            if !seen.insert(distinct.clone()) {
                return;
            }
        }
        entries.extend_from_slice(&distinct);
        offsets.push(entries.len() as u32);
    })?;
    let mut by_element = vec![Vec::new(); n];
    for t in 0..offsets.len() - 1 {
        for &e in &entries[offsets[t] as usize..offsets[t + 1] as usize] {
            by_element[e as usize].push(t as u32);
        }
    }
    Ok(TupleTable {
        entries,
        offsets,
        by_element,
        n_elements: n,
    })
}

/// Result of the exact HP-free maximization.
#[derive(Debug, Clone)]
pub struct RkResult {
    pub density: ExactDensity,
    pub witness: SubsetMask,
    /// `k < 3`: the non-trivial progression notion degenerates.
    pub degenerate: bool,
}

/// Maximal density of a subset containing no non-trivial member tuple, with
/// the lexicographically least witness (smallest elements preferred).
pub fn r_k_exact(hp: &HpSpec) -> Result<RkResult> {
    r_k_exact_with_order(hp, SearchOrder::Forward)
}

/// As [`r_k_exact`]; `Reverse` explores elements high-to-low and is intended
/// for order-independence cross-checks (the witness is canonical only for
/// `Forward`).
pub fn r_k_exact_with_order(hp: &HpSpec, order: SearchOrder) -> Result<RkResult> {
    let size = hp.group().size();
    if size > RK_EXACT_LIMIT {
        return Err(Error::ExactRangeExceeded {
            size,
            limit: RK_EXACT_LIMIT,
        });
    }
    let degenerate = hp.k() < 3;
    if hp.k() == 1 {
        // every nonempty set contains a length-1 progression
        return Ok(RkResult {
            density: ExactDensity::new(0, size),
            witness: SubsetMask::empty(hp.group().clone()),
            degenerate,
        });
    }
    let table = build_table(hp, true, DEFAULT_BUDGET)?;
    let n = table.n_elements;
    let visit: Vec<u32> = match order {
        SearchOrder::Forward => (0..n as u32).collect(),
        SearchOrder::Reverse => (0..n as u32).rev().collect(),
    };
    let mut chosen_in = vec![0u32; table.len()];
    let mut in_set = vec![false; n];
    let mut best_count = 0usize;
    let mut best: Vec<u32> = Vec::new();
    let mut current: Vec<u32> = Vec::new();
    dfs_free(
        &table,
        &visit,
        0,
        &mut in_set,
        &mut chosen_in,
        &mut current,
        &mut best_count,
        &mut best,
    );
    let witness = SubsetMask::from_ranks(
        hp.group().clone(),
        &best.iter().map(|&e| e as u64).collect::<Vec<_>>(),
    )?;
    Ok(RkResult {
        density: ExactDensity::new(best_count as u64, size),
        witness,
        degenerate,
    })
}

#[allow(clippy::too_many_arguments)]
fn dfs_free(
    table: &TupleTable,
    visit: &[u32],
    idx: usize,
    in_set: &mut [bool],
    chosen_in: &mut [u32],
    current: &mut Vec<u32>,
    best_count: &mut usize,
    best: &mut Vec<u32>,
) {
    if current.len() + (visit.len() - idx) <= *best_count {
        return; // cannot strictly improve
    }
    if idx == visit.len() {
        *best_count = current.len();
        *best = current.clone();
        return;
    }
    let e = visit[idx] as usize;
    // include first: completes no forbidden set?
    let completes = table.by_element[e]
        .iter()
        .any(|&t| chosen_in[t as usize] + 1 == table.arity(t as usize));
    if !completes {
        in_set[e] = true;
        current.push(e as u32);
        for &t in &table.by_element[e] {
            chosen_in[t as usize] += 1;
        }
        dfs_free(table, visit, idx + 1, in_set, chosen_in, current, best_count, best);
        for &t in &table.by_element[e] {
            chosen_in[t as usize] -= 1;
        }
        current.pop();
        in_set[e] = false;
    }
    dfs_free(table, visit, idx + 1, in_set, chosen_in, current, best_count, best);
}

/// Exhaustive HP-free maximum over all bitmasks; independent oracle for
/// small groups.
pub fn r_k_exact_enumerated(hp: &HpSpec) -> Result<ExactDensity> {
    let size = hp.group().size();
    if size > 20 {
        return Err(Error::ExactRangeExceeded { size, limit: 20 });
    }
    if hp.k() == 1 {
        return Ok(ExactDensity::new(0, size));
    }
    let table = build_table(hp, true, DEFAULT_BUDGET)?;
    let n = size as usize;
    let mut best = 0u32;
    for mask in 0u32..1 << n {
        if mask.count_ones() <= best {
            continue;
        }
        let free = (0..table.len()).all(|t| {
            !table
                .entries_of(t)
                .iter()
                .all(|&e| mask >> e & 1 == 1)
        });
        if free {
            best = mask.count_ones();
        }
    }
    Ok(ExactDensity::new(best as u64, size))
}

/// Result of the fixed-cardinality exact minimization.
#[derive(Debug, Clone)]
pub struct RExactResult {
    pub min_density: ExactDensity,
    pub min_count: u64,
    pub hp_size: u64,
    pub cardinality: u64,
    pub witness: SubsetMask,
}

/// `ceil(delta * size)`, with float noise snapped to the nearest integer.
pub fn target_cardinality(delta: f64, size: u64) -> Result<u64> {
    if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
        return Err(Error::BadDelta(delta));
    }
    let t = delta * size as f64;
    let r = t.round();
    let c = if (t - r).abs() < 1e-9 { r } else { t.ceil() };
    Ok(c as u64)
}

/// Exact minimum of the HP density over subsets with `|A| >= delta |U|`.
/// Minimizers occur at the minimal cardinality because the objective is
/// monotone in the set.
pub fn r_exact(hp: &HpSpec, delta: f64) -> Result<RExactResult> {
    r_exact_with_order(hp, delta, SearchOrder::Forward)
}

pub fn r_exact_with_order(hp: &HpSpec, delta: f64, order: SearchOrder) -> Result<RExactResult> {
    let size = hp.group().size();
    if size > R_EXACT_LIMIT {
        return Err(Error::ExactRangeExceeded {
            size,
            limit: R_EXACT_LIMIT,
        });
    }
    let c = target_cardinality(delta, size)?;
    let hp_size = hp.size()?;
    if c == 0 {
        return Ok(RExactResult {
            min_density: ExactDensity::new(0, hp_size),
            min_count: 0,
            hp_size,
            cardinality: 0,
            witness: SubsetMask::empty(hp.group().clone()),
        });
    }
    let table = build_table(hp, false, DEFAULT_BUDGET)?;
    let n = table.n_elements;
    let visit: Vec<u32> = match order {
        SearchOrder::Forward => (0..n as u32).collect(),
        SearchOrder::Reverse => (0..n as u32).rev().collect(),
    };
    let mut occ = vec![0u32; table.len()];
    let mut best_count = u64::MAX;
    let mut best: Vec<u32> = Vec::new();
    let mut current: Vec<u32> = Vec::new();
    dfs_min(
        &table, &visit, 0, c as usize, 0, &mut occ, &mut current, &mut best_count, &mut best,
    );
    let witness = SubsetMask::from_ranks(
        hp.group().clone(),
        &best.iter().map(|&e| e as u64).collect::<Vec<_>>(),
    )?;
    Ok(RExactResult {
        min_density: ExactDensity::new(best_count, hp_size),
        min_count: best_count,
        hp_size,
        cardinality: c,
        witness,
    })
}

#[allow(clippy::too_many_arguments)]
fn dfs_min(
    table: &TupleTable,
    visit: &[u32],
    idx: usize,
    target: usize,
    count: u64,
    occ: &mut [u32],
    current: &mut Vec<u32>,
    best_count: &mut u64,
    best: &mut Vec<u32>,
) {
    if count >= *best_count {
        return; // the objective only grows as elements are added
    }
    if current.len() == target {
        *best_count = count;
        *best = current.clone();
        return;
    }
    if visit.len() - idx < target - current.len() {
        return;
    }
    let e = visit[idx] as usize;
    // include
    let mut delta = 0u64;
    for &t in &table.by_element[e] {
        occ[t as usize] += 1;
        if occ[t as usize] == table.arity(t as usize) {
            delta += 1;
        }
    }
    current.push(e as u32);
    dfs_min(
        table, visit, idx + 1, target, count + delta, occ, current, best_count, best,
    );
    current.pop();
    for &t in &table.by_element[e] {
        occ[t as usize] -= 1;
    }
    // exclude
    dfs_min(table, visit, idx + 1, target, count, occ, current, best_count, best);
}

/// Outcome of one annealing search.
#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Best objective found, an upper bound on the infimum at these dims.
    pub upper_bound: f64,
    pub count: u64,
    pub hp_size: u64,
    pub cardinality: u64,
    pub witness: SubsetMask,
    pub seed: u64,
    /// Chain that produced the reported witness.
    pub chain: u32,
}

/// Fixed-cardinality annealing over subsets with `|A| = ceil(delta |U|)`.
/// Chains run independently on derived seeds; the merge takes the minimum
/// objective with ties broken by lowest chain index.
pub fn d_hp_search(hp: &HpSpec, delta: f64, cfg: &SearchConfig, budget: u64) -> Result<SearchResult> {
    cfg.validate()?;
    let size = hp.group().size();
    let c = target_cardinality(delta, size)?;
    let hp_size = hp.size()?;
    if c == 0 || c == size {
        let witness = if c == 0 {
            SubsetMask::empty(hp.group().clone())
        } else {
            SubsetMask::full(hp.group().clone())
        };
        let count = if c == 0 { 0 } else { hp_size };
        return Ok(SearchResult {
            upper_bound: count as f64 / hp_size as f64,
            count,
            hp_size,
            cardinality: c,
            witness,
            seed: cfg.seed,
            chain: 0,
        });
    }
    let table = build_table(hp, false, budget)?;
    let results: Vec<(u64, Vec<u32>)> = (0..cfg.chains)
        .into_par_iter()
        .map(|chain| run_chain(&table, c as usize, cfg, derive_seed(cfg.seed, chain)))
        .collect();
    let (chain, (count, members)) = results
        .iter()
        .enumerate()
        .min_by_key(|(i, (count, _))| (*count, *i))
        .map(|(i, r)| (i as u32, r.clone()))
        .expect("chains >= 1");
    let witness = SubsetMask::from_ranks(
        hp.group().clone(),
        &members.iter().map(|&e| e as u64).collect::<Vec<_>>(),
    )?;
    Ok(SearchResult {
        upper_bound: count as f64 / hp_size as f64,
        count,
        hp_size,
        cardinality: c,
        witness,
        seed: cfg.seed,
        chain,
    })
}

fn derive_seed(seed: u64, chain: u32) -> u64 {
    splitmix(seed ^ (chain as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_chain(table: &TupleTable, c: usize, cfg: &SearchConfig, seed: u64) -> (u64, Vec<u32>) {
    let n = table.n_elements;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // random initial c-subset via partial Fisher-Yates
    let mut perm: Vec<u32> = (0..n as u32).collect();
    for i in 0..c {
        let j = rng.gen_range(i..n);
        perm.swap(i, j);
    }
    let (mut members, mut outside): (Vec<u32>, Vec<u32>) =
        (perm[..c].to_vec(), perm[c..].to_vec());
    // element -> position in its current list
    let mut pos = vec![0u32; n];
    for (i, &e) in members.iter().enumerate() {
        pos[e as usize] = i as u32;
    }
    for (i, &e) in outside.iter().enumerate() {
        pos[e as usize] = i as u32;
    }
    let mut in_set = vec![false; n];
    for &e in &members {
        in_set[e as usize] = true;
    }
    let mut occ = vec![0u32; table.len()];
    let mut count = 0u64;
    for &e in &members {
        count += add_element(table, e as usize, &mut occ);
    }
    let mut best_count = count;
    let mut best = sorted(&members);
    let ratio = cfg.t_final / cfg.t_initial;
    for step in 0..cfg.steps {
        let temp = cfg.t_initial * ratio.powf(step as f64 / cfg.steps as f64);
        let (mi, oi) = match cfg.move_kind {
            MoveKind::Swap => (rng.gen_range(0..c), rng.gen_range(0..n - c)),
            MoveKind::ToggleRepair => {
                // toggle a uniformly random element, repair with a random
                // partner from the other side
                let x = rng.gen_range(0..n);
                if in_set[x] {
                    (pos[x] as usize, rng.gen_range(0..n - c))
                } else {
                    (rng.gen_range(0..c), pos[x] as usize)
                }
            }
        };
        let (u, v) = (members[mi] as usize, outside[oi] as usize);
        let removed = remove_element(table, u, &mut occ);
        let added = add_element(table, v, &mut occ);
        let delta = added as i64 - removed as i64;
        let accept = delta <= 0 || rng.gen::<f64>() < (-(delta as f64) / temp).exp();
        if accept {
            count = (count as i64 + delta) as u64;
            members[mi] = v as u32;
            outside[oi] = u as u32;
            pos[v] = mi as u32;
            pos[u] = oi as u32;
            in_set[v] = true;
            in_set[u] = false;
            if count < best_count {
                best_count = count;
                best = sorted(&members);
            }
        } else {
            remove_element(table, v, &mut occ);
            add_element(table, u, &mut occ);
        }
    }
    (best_count, best)
}

fn sorted(v: &[u32]) -> Vec<u32> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

fn add_element(table: &TupleTable, e: usize, occ: &mut [u32]) -> u64 {
    let mut completed = 0;
    for &t in &table.by_element[e] {
        occ[t as usize] += 1;
        if occ[t as usize] == table.arity(t as usize) {
            completed += 1;
        }
    }
    completed
}

fn remove_element(table: &TupleTable, e: usize, occ: &mut [u32]) -> u64 {
    let mut broken = 0;
    for &t in &table.by_element[e] {
        if occ[t as usize] == table.arity(t as usize) {
            broken += 1;
        }
        occ[t as usize] -= 1;
    }
    broken
}

/// Provenance tag for envelope sample points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointProvenance {
    Exact,
    Search,
}

/// Sampled values of the density function, anchored at (0,0) and (1,1).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePoints {
    points: Vec<(f64, f64, PointProvenance)>,
}

impl EnvelopePoints {
    pub fn new(points: Vec<(f64, f64, PointProvenance)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("need at least two points".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidInput(
                    "deltas must be strictly increasing".into(),
                ));
            }
        }
        for &(d, v, _) in &points {
            if !(0.0..=1.0).contains(&d) || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "point ({d}, {v}) outside the unit square"
                )));
            }
        }
        let first = points.first().unwrap();
        let last = points.last().unwrap();
        if !(first.0 == 0.0 && first.1 == 0.0 && last.0 == 1.0 && last.1 == 1.0) {
            return Err(Error::InvalidInput(
                "points must contain the anchors (0,0) and (1,1)".into(),
            ));
        }
        Ok(EnvelopePoints { points })
    }

    /// Inserts the (0,0) and (1,1) anchors when absent.
    pub fn with_anchors(mut points: Vec<(f64, f64, PointProvenance)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if points.first().map_or(true, |p| p.0 > 0.0) {
            points.insert(0, (0.0, 0.0, PointProvenance::Exact));
        }
        if points.last().map_or(true, |p| p.0 < 1.0) {
            points.push((1.0, 1.0, PointProvenance::Exact));
        }
        EnvelopePoints::new(points)
    }

    pub fn points(&self) -> &[(f64, f64, PointProvenance)] {
        &self.points
    }
}

/// The lower convex envelope as a piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    vertices: Vec<(f64, f64)>,
}

impl Envelope {
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn eval(&self, delta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&delta) || delta.is_nan() {
            return Err(Error::BadDelta(delta));
        }
        let vs = &self.vertices;
        let j = vs.partition_point(|&(x, _)| x <= delta);
        if j == vs.len() {
            return Ok(vs[vs.len() - 1].1);
        }
        if j == 0 {
            return Ok(vs[0].1);
        }
        let (x0, y0) = vs[j - 1];
        let (x1, y1) = vs[j];
        Ok(y0 + (y1 - y0) * (delta - x0) / (x1 - x0))
    }
}

/// Lower hull of the sample points by monotone chain; evaluation linearly
/// interpolates between hull vertices.
pub fn convex_envelope(points: &EnvelopePoints) -> Result<Envelope> {
    let pts: Vec<(f64, f64)> = points.points().iter().map(|&(d, v, _)| (d, v)).collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a.0 - o.0) * (pt.1 - o.1) - (a.1 - o.1) * (pt.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    Ok(Envelope { vertices: hull })
}
