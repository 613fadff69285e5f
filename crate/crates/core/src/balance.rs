//! Exact rectangle verifiers: almost-extractor balance, the exact flat-source
//! error `ε*`, and `(K, D)`-rainbow balance, plus the randomized rainbow search.
//!
//! Every verifier decomposes by the row set `B1`. For a fixed `B1` the
//! per-column color census `c_v[z] = |{u ∈ B1 : f(u, v) = z}|` turns the inner
//! maximization over `B2` into choosing the `K` best columns for a fixed color
//! set, or into a pruned depth-first search when the color set cannot be
//! enumerated. Row sets are processed in parallel and merged by
//! `(value desc, row-set order asc)`, so witnesses do not depend on the thread
//! count.

use std::sync::atomic::{AtomicI64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::{Report, Witness};
use crate::table::TwoSourceTable;

/// Default ceiling on estimated primitive operations per verifier run.
pub const DEFAULT_WORK_LIMIT: f64 = 1e10;
/// Row and column sets are `u64` masks.
pub const MAX_RECTANGLE_BITS: u32 = 6;
/// Colors at or below this count use bit-plane censuses.
const PLANE_COLORS: usize = 64;
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub work_limit: f64,
    pub overridden: bool,
}

impl Default for Feasibility {
    fn default() -> Self {
        Self {
            work_limit: DEFAULT_WORK_LIMIT,
            overridden: false,
        }
    }
}

impl Feasibility {
    pub fn overridden() -> Self {
        Self {
            overridden: true,
            ..Self::default()
        }
    }

    pub fn check(&self, op: &str, work: f64) -> Result<()> {
        if !self.overridden && work > self.work_limit {
            return Err(Error::Infeasible(format!(
                "{op}: estimated {work:.3e} operations exceeds the limit of {:.1e}",
                self.work_limit
            )));
        }
        Ok(())
    }
}

pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All `k`-subsets of `0..n` as masks, in increasing numeric order.
pub fn subsets(n: u32, k: u32) -> impl Iterator<Item = u64> {
    let limit = 1u128 << n;
    let mut next = if k <= n { Some((1u128 << k) - 1) } else { None };
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            let low = cur & cur.wrapping_neg();
            let ripple = cur + low;
            let succ = (((ripple ^ cur) >> 2) / low) | ripple;
            (succ < limit).then_some(succ)
        };
        Some(cur as u64)
    })
}

fn mask_members(mask: u64) -> Vec<u64> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// `B1 × B2`, both sorted and nonempty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rectangle {
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
}

impl Rectangle {
    pub fn new(mut rows: Vec<u64>, mut cols: Vec<u64>) -> Result<Self> {
        rows.sort_unstable();
        cols.sort_unstable();
        let dup = |v: &[u64]| v.windows(2).any(|w| w[0] == w[1]);
        if rows.is_empty() || cols.is_empty() || dup(&rows) || dup(&cols) {
            return Err(Error::InvalidParameter("rectangle sides must be nonempty sets".into()));
        }
        Ok(Self { rows, cols })
    }

    pub fn from_masks(rows: u64, cols: u64) -> Self {
        Self {
            rows: mask_members(rows),
            cols: mask_members(cols),
        }
    }

    pub fn transposed(&self) -> Self {
        Self {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
        }
    }

    /// Per-color cell counts over the rectangle.
    pub fn census(&self, t: &TwoSourceTable) -> Vec<u64> {
        let mut counts = vec![0u64; t.num_colors()];
        for &u in &self.rows {
            for &v in &self.cols {
                counts[t.color(u, v) as usize] += 1;
            }
        }
        counts
    }

    fn witness(&self, n: u32) -> Witness {
        let fmt = |s: &[u64]| s.iter().map(|v| format!("{v:0w$b}", w = n as usize)).collect::<Vec<_>>().join(",");
        Witness::new(Some(fmt(&self.rows)), Some(fmt(&self.cols)))
    }
}

/// `count` colors with the highest census (ties to the smaller color), padded
/// with the smallest unused colors.
fn top_colors(census: &[u64], count: usize) -> Vec<u16> {
    let mut order: Vec<usize> = (0..census.len()).collect();
    order.sort_by(|&a, &b| census[b].cmp(&census[a]).then(a.cmp(&b)));
    let mut chosen: Vec<u16> = order.into_iter().take(count).map(|z| z as u16).collect();
    chosen.sort_unstable();
    chosen
}

/// Column censuses of one row set, restricted to the colors that occur.
struct Census {
    palette: Vec<u16>,
    /// `counts[v * palette.len() + z]`.
    counts: Vec<u32>,
    side: usize,
}

impl Census {
    fn p(&self) -> usize {
        self.palette.len()
    }

    fn col(&self, v: usize) -> &[u32] {
        let p = self.p();
        &self.counts[v * p..(v + 1) * p]
    }

    fn totals(&self) -> Vec<u32> {
        let mut t = vec![0u32; self.p()];
        for v in 0..self.side {
            for (acc, c) in t.iter_mut().zip(self.col(v)) {
                *acc += c;
            }
        }
        t
    }
}

/// Census source for one table orientation.
struct Censor<'a> {
    table: &'a TwoSourceTable,
    side: usize,
    /// `planes[z * side + v]` is the mask of rows `u` with `f(u, v) = z`.
    planes: Option<Vec<u64>>,
}

impl<'a> Censor<'a> {
    fn new(table: &'a TwoSourceTable) -> Self {
        let side = table.side();
        let planes = (table.num_colors() <= PLANE_COLORS).then(|| {
            let mut planes = vec![0u64; table.num_colors() * side];
            for u in 0..side {
                for v in 0..side {
                    planes[table.color(u as u64, v as u64) as usize * side + v] |= 1 << u;
                }
            }
            planes
        });
        Self { table, side, planes }
    }

    fn census(&self, rows: u64, scratch: &mut Vec<u32>) -> Census {
        let side = self.side;
        if let Some(planes) = &self.planes {
            let m = self.table.num_colors();
            let present: Vec<usize> = (0..m)
                .filter(|&z| planes[z * side..(z + 1) * side].iter().any(|p| p & rows != 0))
                .collect();
            let p = present.len();
            let mut counts = vec![0u32; side * p];
            for (zi, &z) in present.iter().enumerate() {
                for v in 0..side {
                    counts[v * p + zi] = (planes[z * side + v] & rows).count_ones();
                }
            }
            return Census {
                palette: present.into_iter().map(|z| z as u16).collect(),
                counts,
                side,
            };
        }
        if scratch.len() != self.table.num_colors() {
            *scratch = vec![u32::MAX; self.table.num_colors()];
        }
        let members = mask_members(rows);
        let mut palette = Vec::new();
        for &u in &members {
            for v in 0..side {
                let c = self.table.color(u, v as u64) as usize;
                if scratch[c] == u32::MAX {
                    scratch[c] = 0;
                    palette.push(c as u16);
                }
            }
        }
        palette.sort_unstable();
        for (i, &c) in palette.iter().enumerate() {
            scratch[c as usize] = i as u32;
        }
        let p = palette.len();
        let mut counts = vec![0u32; side * p];
        for &u in &members {
            for v in 0..side {
                let c = self.table.color(u, v as u64) as usize;
                counts[v * p + scratch[c] as usize] += 1;
            }
        }
        for &c in &palette {
            scratch[c as usize] = u32::MAX;
        }
        Census { palette, counts, side }
    }
}

/// The `k` highest scores (ties to the smaller column) as `(sum, mask)`.
fn top_columns(scores: &[i64], k: usize, order: &mut Vec<usize>) -> (i64, u64) {
    order.clear();
    order.extend(0..scores.len());
    order.sort_unstable_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    order[..k].iter().fold((0, 0), |(s, m), &v| (s + scores[v], m | 1 << v))
}

/// Best rectangle found for one row set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct RowBest {
    value: i64,
    order: u64,
    rows: u64,
    cols: u64,
}

fn better(a: Option<RowBest>, b: Option<RowBest>) -> Option<RowBest> {
    match (a, b) {
        (Some(x), Some(y)) => {
            if y.value > x.value || (y.value == x.value && y.order < x.order) {
                Some(y)
            } else {
                Some(x)
            }
        }
        (x, None) => x,
        (None, y) => y,
    }
}


/// Maximizes `per_row` over all `k`-row sets. `per_row` returns the best value
/// for the row set and the column mask attaining it.
fn over_row_sets<F>(table: &TwoSourceTable, k: usize, per_row: F) -> Option<RowBest>
where
    F: Fn(&Census) -> Option<(i64, u64)> + Sync,
{
    let censor = Censor::new(table);
    let mut masks = subsets(table.side() as u32, k as u32).enumerate();
    let mut best = None;
    loop {
        let chunk: Vec<(usize, u64)> = masks.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            return best;
        }
        let local = chunk
            .par_iter()
            .map_init(Vec::new, |scratch, &(i, rows)| {
                let census = censor.census(rows, scratch);
                per_row(&census).map(|(value, cols)| RowBest {
                    value,
                    order: i as u64,
                    rows,
                    cols,
                })
            })
            .reduce(|| None, better);
        best = better(best, local);
    }
}

fn check_rectangle_side(t: &TwoSourceTable, k: usize) -> Result<()> {
    if t.n() > MAX_RECTANGLE_BITS {
        return Err(Error::InvalidParameter(format!(
            "rectangle verifiers support n <= {MAX_RECTANGLE_BITS}, got {}",
            t.n()
        )));
    }
    if k == 0 || k > t.side() {
        return Err(Error::InvalidParameter(format!(
            "rectangle side {k} outside 1..={}",
            t.side()
        )));
    }
    Ok(())
}

/// Iterates the `r`-subsets of `0..p` in lexicographic order.
fn for_each_combination(p: usize, r: usize, mut f: impl FnMut(&[usize])) {
    if r > p {
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        f(&idx);
        let Some(i) = (0..r).rev().find(|&i| idx[i] != i + p - r) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn sum_top(values: &mut [i64], count: usize) -> i64 {
    if count >= values.len() {
        return values.iter().sum();
    }
    if count == 0 {
        return 0;
    }
    values.select_nth_unstable_by(count - 1, |a, b| b.cmp(a));
    values[..count].iter().sum()
}

// ---------------------------------------------------------------------------
// almost-extractor balance

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceViolation {
    pub rectangle: Rectangle,
    pub color_set: Vec<u16>,
    pub fraction: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlmostBalance {
    pub k: u32,
    pub d: u32,
    pub eps: f64,
    pub u_size: usize,
    /// Largest number of `U`-cells in any `2^k × 2^k` rectangle, `|U| = u_size`.
    pub worst_count: u64,
    pub cells: u64,
    pub worst_fraction: f64,
    /// `u_size / M · 2^d + eps`.
    pub bound: f64,
    pub rectangle: Rectangle,
    pub color_set: Vec<u16>,
    pub violation: Option<BalanceViolation>,
}

impl AlmostBalance {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }

    pub fn to_report(&self, t: &TwoSourceTable) -> Report {
        let mut r = Report::new("balance-almost")
            .param("n", t.n())
            .param("m", t.m())
            .param("k", self.k)
            .param("d", self.d)
            .param("eps", self.eps)
            .param("u_size", self.u_size as u64);
        r.witnesses.push(
            self.rectangle
                .witness(t.n())
                .with("color_set", self.color_set.clone())
                .with("count", self.worst_count),
        );
        r.metric("worst_fraction", self.worst_fraction);
        r.metric("bound", self.bound);
        r.assert("fraction<=bound", self.passed(), self.worst_fraction, self.bound);
        r
    }
}

fn almost_row_best(c: &Census, k: usize, u: usize, order: &mut Vec<usize>) -> (i64, u64) {
    let p = c.p();
    let side = c.side;
    let u = u.min(p);
    let enum_cost = binomial(p as u64, u as u64) * side as f64 * (u + 4) as f64;
    let dfs_cost = 2.0 * binomial(side as u64, k as u64) * (k + p) as f64;
    if enum_cost <= dfs_cost {
        let mut best: Option<(i64, u64)> = None;
        let mut scores = vec![0i64; side];
        for_each_combination(p, u, |set| {
            for (v, s) in scores.iter_mut().enumerate() {
                let col = c.col(v);
                *s = set.iter().map(|&z| col[z] as i64).sum();
            }
            let cand = top_columns(&scores, k, order);
            if best.is_none_or(|b| cand.0 > b.0) {
                best = Some(cand);
            }
        });
        return best.expect("at least one color set");
    }
    let mut dfs = AlmostDfs {
        census: c,
        k,
        u,
        tot: vec![0; p],
        scratch: vec![0; p],
        best: None,
    };
    dfs.go(0, 0, 0);
    dfs.best.expect("a full column set is always reached")
}

struct AlmostDfs<'a> {
    census: &'a Census,
    k: usize,
    u: usize,
    tot: Vec<i64>,
    scratch: Vec<i64>,
    best: Option<(i64, u64)>,
}

impl AlmostDfs<'_> {
    fn top_u(&mut self) -> i64 {
        self.scratch.copy_from_slice(&self.tot);
        sum_top(&mut self.scratch, self.u)
    }

    fn go(&mut self, start: usize, chosen: usize, mask: u64) {
        let score = self.top_u();
        if chosen == self.k {
            if self.best.is_none_or(|b| score > b.0) {
                self.best = Some((score, mask));
            }
            return;
        }
        let need = self.k - chosen;
        if let Some((b, _)) = self.best {
            // each new cell raises the top-u sum by at most one
            if score + (need * self.k) as i64 <= b {
                return;
            }
        }
        for v in start..=self.census.side - need {
            for (t, c) in self.tot.iter_mut().zip(self.census.col(v)) {
                *t += *c as i64;
            }
            self.go(v + 1, chosen + 1, mask | 1 << v);
            for (t, c) in self.tot.iter_mut().zip(self.census.col(v)) {
                *t -= *c as i64;
            }
        }
    }
}

fn almost_work(t: &TwoSourceTable, k: usize, u: usize) -> f64 {
    let side = t.side();
    let p = t.num_colors().min(k * side);
    let u = u.min(p);
    let enum_cost = binomial(p as u64, u as u64) * side as f64 * (u + 4) as f64;
    let dfs_cost = 2.0 * binomial(side as u64, k as u64) * (k + p) as f64;
    binomial(side as u64, k as u64) * ((k * side) as f64 + enum_cost.min(dfs_cost))
}

/// Exhaustive check of every `2^k × 2^k` rectangle against the bound
/// `|U|/M · 2^d + eps` for the worst color set of size `u_size`.
pub fn balance_check_almost(
    t: &TwoSourceTable,
    k: u32,
    d: u32,
    eps: f64,
    u_size: usize,
    feasibility: Feasibility,
) -> Result<AlmostBalance> {
    let side_k = 1usize.checked_shl(k).unwrap_or(usize::MAX);
    check_rectangle_side(t, side_k)?;
    if u_size == 0 || u_size > t.num_colors() {
        return Err(Error::InvalidParameter(format!(
            "u_size {u_size} outside 1..={}",
            t.num_colors()
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be nonnegative")));
    }
    feasibility.check("balance check", almost_work(t, side_k, u_size))?;
    let best = over_row_sets(t, side_k, |c| {
        let mut order = Vec::new();
        Some(almost_row_best(c, side_k, u_size, &mut order))
    })
    .expect("at least one row set");
    let rectangle = Rectangle::from_masks(best.rows, best.cols);
    let color_set = top_colors(&rectangle.census(t), u_size);
    let cells = (side_k * side_k) as u64;
    let worst_count = best.value as u64;
    let worst_fraction = worst_count as f64 / cells as f64;
    let bound = u_size as f64 / t.num_colors() as f64 * 2f64.powi(d as i32) + eps;
    let violation = (worst_fraction > bound).then(|| BalanceViolation {
        rectangle: rectangle.clone(),
        color_set: color_set.clone(),
        fraction: worst_fraction,
        bound,
    });
    Ok(AlmostBalance {
        k,
        d,
        eps,
        u_size,
        worst_count,
        cells,
        worst_fraction,
        bound,
        rectangle,
        color_set,
        violation,
    })
}

// ---------------------------------------------------------------------------
// exact flat-source error

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsStar {
    pub k: u32,
    pub d: u32,
    /// Smallest `ε` making the table a `(k, ε, d)` almost extractor on flat sources.
    pub eps: f64,
    /// `eps = numerator / denominator` with `denominator = 2^{2k} · 2^{m-d}`.
    pub numerator: i64,
    pub denominator: i64,
    /// A flat pair attaining `eps`; absent when `d >= m`.
    pub rectangle: Option<Rectangle>,
    /// Colors clipped at the attaining pair.
    pub color_set: Vec<u16>,
}

impl EpsStar {
    pub fn to_report(&self, t: &TwoSourceTable) -> Report {
        let mut r = Report::new("eps-star")
            .param("n", t.n())
            .param("m", t.m())
            .param("k", self.k)
            .param("d", self.d);
        if let Some(rect) = &self.rectangle {
            r.witnesses.push(rect.witness(t.n()).with("color_set", self.color_set.clone()));
        }
        r.metric("eps_star", self.eps);
        r.metric("numerator", self.numerator);
        r.metric("denominator", self.denominator);
        r
    }
}

fn gain(s: i64, kk: i64, cnt: i64) -> i64 {
    (s * cnt - kk).max(0)
}

fn eps_row_best(c: &Census, k: usize, s: i64, global: &AtomicI64, order: &mut Vec<usize>) -> (i64, u64) {
    let p = c.p();
    let side = c.side;
    let kk = (k * k) as i64;
    let enum_cost = 2f64.powi(p as i32) * side as f64 * 4.0;
    let dfs_cost = 2.0 * binomial(side as u64, k as u64) * k as f64;
    let result = if p < 40 && enum_cost <= dfs_cost {
        // Gray-code walk over every color set U: value = S·cnt(U) − |U|·K².
        let mut scores = vec![0i64; side];
        let mut best = (0, (1u64 << k) - 1);
        let mut size = 0i64;
        let mut current = 0u64;
        for i in 1u64..1 << p {
            let z = i.trailing_zeros() as usize;
            let adding = current >> z & 1 == 0;
            current ^= 1 << z;
            let sign = if adding { 1 } else { -1 };
            size += sign;
            for (v, sc) in scores.iter_mut().enumerate() {
                *sc += sign * s * c.col(v)[z] as i64;
            }
            let (sum, mask) = top_columns(&scores, k, order);
            let value = sum - size * kk;
            if value > best.0 {
                best = (value, mask);
            }
        }
        best
    } else {
        let totals = c.totals();
        let cols: Vec<Vec<(usize, i64)>> = (0..side)
            .map(|v| {
                c.col(v)
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0)
                    .map(|(z, &x)| (z, x as i64))
                    .collect()
            })
            .collect();
        // A color confined to one column of the strip gains exactly
        // gain(c); any other cell gains at most S.
        let h: Vec<i64> = cols
            .iter()
            .map(|col| {
                col.iter()
                    .map(|&(z, x)| if totals[z] as i64 == x { gain(s, kk, x) } else { s * x })
                    .sum()
            })
            .collect();
        let suffix_top = (0..=side)
            .map(|start| {
                let mut tail = h[start..].to_vec();
                tail.sort_unstable_by(|a, b| b.cmp(a));
                std::iter::once(0)
                    .chain(tail.iter().scan(0, |acc, x| {
                        *acc += x;
                        Some(*acc)
                    }))
                    .collect::<Vec<i64>>()
            })
            .collect();
        let mut dfs = EpsDfs {
            s,
            kk,
            k,
            side,
            cols,
            suffix_top,
            cnt: vec![0; p],
            best: None,
            global,
        };
        dfs.go(0, 0, 0, 0);
        dfs.best.unwrap_or((-1, 0))
    };
    global.fetch_max(result.0, Ordering::Relaxed);
    result
}

struct EpsDfs<'a> {
    s: i64,
    kk: i64,
    k: usize,
    side: usize,
    cols: Vec<Vec<(usize, i64)>>,
    /// `suffix_top[start][r]`: sum of the `r` largest gain bounds among columns `start..`.
    suffix_top: Vec<Vec<i64>>,
    cnt: Vec<i64>,
    best: Option<(i64, u64)>,
    global: &'a AtomicI64,
}

impl EpsDfs<'_> {
    fn go(&mut self, start: usize, chosen: usize, mask: u64, f: i64) {
        if chosen == self.k {
            if self.best.is_none_or(|b| f > b.0) {
                self.best = Some((f, mask));
                self.global.fetch_max(f, Ordering::Relaxed);
            }
            return;
        }
        let need = self.k - chosen;
        let bound = f + self.suffix_top[start][need];
        if self.best.is_some_and(|b| bound <= b.0) || bound < self.global.load(Ordering::Relaxed) {
            return;
        }
        for v in start..=self.side - need {
            let mut next = f;
            for i in 0..self.cols[v].len() {
                let (z, x) = self.cols[v][i];
                let old = self.cnt[z];
                next += gain(self.s, self.kk, old + x) - gain(self.s, self.kk, old);
                self.cnt[z] = old + x;
            }
            self.go(v + 1, chosen + 1, mask | 1 << v, next);
            for &(z, x) in &self.cols[v] {
                self.cnt[z] -= x;
            }
        }
    }
}

fn eps_work(t: &TwoSourceTable, k: usize) -> f64 {
    let side = t.side();
    let p = t.num_colors().min(k * side);
    let enum_cost = 2f64.powi(p.min(1000) as i32) * side as f64 * 4.0;
    let dfs_cost = 2.0 * binomial(side as u64, k as u64) * k as f64;
    binomial(side as u64, k as u64) * ((k * side) as f64 + enum_cost.min(dfs_cost))
}

/// Exact `ε*` over all pairs of flat sources with supports of size `2^k`:
/// the largest distance from `f(X, Y)` to the min-entropy-`(m−d)` ball.
pub fn measure_eps_star(t: &TwoSourceTable, k: u32, d: u32, feasibility: Feasibility) -> Result<EpsStar> {
    let side_k = 1usize.checked_shl(k).unwrap_or(usize::MAX);
    check_rectangle_side(t, side_k)?;
    let kk = (side_k * side_k) as i64;
    if d >= t.m() {
        return Ok(EpsStar {
            k,
            d,
            eps: 0.0,
            numerator: 0,
            denominator: kk,
            rectangle: None,
            color_set: Vec::new(),
        });
    }
    feasibility.check("eps-star", eps_work(t, side_k))?;
    let s = 1i64 << (t.m() - d);
    let global = AtomicI64::new(-1);
    let best = over_row_sets(t, side_k, |c| {
        let mut order = Vec::new();
        Some(eps_row_best(c, side_k, s, &global, &mut order))
    })
    .expect("at least one row set");
    let rectangle = Rectangle::from_masks(best.rows, best.cols);
    let census = rectangle.census(t);
    let color_set = (0..census.len())
        .filter(|&z| s * census[z] as i64 > kk)
        .map(|z| z as u16)
        .collect();
    let denominator = kk * s;
    Ok(EpsStar {
        k,
        d,
        eps: best.value as f64 / denominator as f64,
        numerator: best.value,
        denominator,
        rectangle: Some(rectangle),
        color_set,
    })
}

// ---------------------------------------------------------------------------
// rainbow balance

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrientationCheck {
    /// Properly colored cells of the worst rectangle and color-set tuple.
    pub worst_count: u64,
    pub fraction: f64,
    pub passed: bool,
    pub rectangle: Rectangle,
    /// `A_i` for each column of the rectangle (each row, for the row orientation).
    pub color_sets: Vec<Vec<u16>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RainbowCheck {
    pub side: usize,
    pub denominator: u64,
    /// `|A_i| = max(1, ⌊M/D⌋)`.
    pub colors_per_line: usize,
    pub bound: f64,
    pub columns: OrientationCheck,
    pub rows: OrientationCheck,
}

impl RainbowCheck {
    pub fn passed(&self) -> bool {
        self.columns.passed && self.rows.passed
    }

    pub fn to_report(&self, t: &TwoSourceTable) -> Report {
        let mut r = Report::new("rainbow")
            .param("n", t.n())
            .param("m", t.m())
            .param("K", self.side as u64)
            .param("D", self.denominator);
        for (name, o) in [("columns", &self.columns), ("rows", &self.rows)] {
            r.witnesses.push(
                o.rectangle
                    .witness(t.n())
                    .with("orientation", name)
                    .with("color_sets", o.color_sets.clone())
                    .with("count", o.worst_count),
            );
            r.assert(&format!("{name}: fraction<=2/D"), o.passed, o.fraction, self.bound);
        }
        r.metric("colors_per_line", self.colors_per_line as u64);
        r
    }
}

fn orientation(t: &TwoSourceTable, side_k: usize, a: usize, den: u64) -> OrientationCheck {
    let best = over_row_sets(t, side_k, |c| {
        let mut order = Vec::new();
        let mut col = Vec::with_capacity(c.p());
        let scores: Vec<i64> = (0..c.side)
            .map(|v| {
                col.clear();
                col.extend(c.col(v).iter().map(|&x| x as i64));
                sum_top(&mut col, a)
            })
            .collect();
        Some(top_columns(&scores, side_k, &mut order))
    })
    .expect("at least one row set");
    let rectangle = Rectangle::from_masks(best.rows, best.cols);
    let color_sets = rectangle
        .cols
        .iter()
        .map(|&v| {
            let strip = Rectangle {
                rows: rectangle.rows.clone(),
                cols: vec![v],
            };
            top_colors(&strip.census(t), a)
        })
        .collect();
    let cells = (side_k * side_k) as u64;
    let worst_count = best.value as u64;
    OrientationCheck {
        worst_count,
        fraction: worst_count as f64 / cells as f64,
        passed: worst_count * den <= 2 * cells,
        rectangle,
        color_sets,
    }
}

fn rainbow_work(t: &TwoSourceTable, side_k: usize) -> f64 {
    let side = t.side();
    let p = t.num_colors().min(side_k) as f64;
    2.0 * binomial(side as u64, side_k as u64) * ((side_k * side) as f64 + side as f64 * (p + 8.0))
}

/// Exact `(K, D)`-rainbow balance in both orientations.
pub fn rainbow_check(t: &TwoSourceTable, side_k: usize, den: u64, feasibility: Feasibility) -> Result<RainbowCheck> {
    check_rectangle_side(t, side_k)?;
    if den == 0 || den > (t.num_colors() * side_k) as u64 {
        return Err(Error::InvalidParameter(format!(
            "D = {den} outside 1..={}",
            t.num_colors() * side_k
        )));
    }
    feasibility.check("rainbow check", rainbow_work(t, side_k))?;
    let a = (t.num_colors() as u64 / den).max(1) as usize;
    let columns = orientation(t, side_k, a, den);
    let mut rows = orientation(&t.transpose(), side_k, a, den);
    rows.rectangle = rows.rectangle.transposed();
    Ok(RainbowCheck {
        side: side_k,
        denominator: den,
        colors_per_line: a,
        bound: 2.0 / den as f64,
        columns,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RainbowSearch {
    pub trials: u64,
    /// Seed and table of the first passing trial.
    pub found: Option<(u64, TwoSourceTable, RainbowCheck)>,
}

impl RainbowSearch {
    pub fn to_report(&self, n: u32, m: u32, side_k: usize, den: u64, seed: u64, max_trials: u64) -> Report {
        let mut r = Report::new("rainbow-search")
            .param("n", n)
            .param("m", m)
            .param("K", side_k as u64)
            .param("D", den)
            .param("seed", seed)
            .param("max_trials", max_trials);
        r.metric("trials", self.trials);
        match &self.found {
            Some((s, _, _)) => {
                r.metric("found_seed", *s);
                r.assert("found", true, self.trials, max_trials);
            }
            None => r.assert("found", false, self.trials, max_trials),
        }
        r
    }
}

/// Tries random tables from seeds `seed, seed+1, …` until one passes
/// [`rainbow_check`] in both orientations.
pub fn search_rainbow(
    n: u32,
    m: u32,
    side_k: usize,
    den: u64,
    seed: u64,
    max_trials: u64,
    feasibility: Feasibility,
) -> Result<RainbowSearch> {
    for trial in 0..max_trials {
        let s = seed.wrapping_add(trial);
        let t = TwoSourceTable::random(n, m, s)?;
        let check = rainbow_check(&t, side_k, den, feasibility)?;
        if check.passed() {
            return Ok(RainbowSearch {
                trials: trial + 1,
                found: Some((s, t, check)),
            });
        }
    }
    Ok(RainbowSearch {
        trials: max_trials,
        found: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{push_forward, FlatSource};

    fn brute_masks(side: usize, k: usize) -> Vec<u64> {
        (0..1u64 << side).filter(|m| m.count_ones() as usize == k).collect()
    }

    /// Direct maximization over every rectangle and color set.
    fn brute_almost(t: &TwoSourceTable, k: usize, u: usize) -> u64 {
        let sets = brute_masks(t.num_colors(), u);
        let mut best = 0;
        for r in brute_masks(t.side(), k) {
            for c in brute_masks(t.side(), k) {
                let census = Rectangle::from_masks(r, c).census(t);
                for &set in &sets {
                    let cnt = (0..census.len()).filter(|z| set >> z & 1 == 1).map(|z| census[z]).sum();
                    best = best.max(cnt);
                }
            }
        }
        best
    }

    fn brute_eps(t: &TwoSourceTable, k: usize, d: u32) -> f64 {
        let mut best = 0.0f64;
        for r in brute_masks(t.side(), k) {
            for c in brute_masks(t.side(), k) {
                let x = FlatSource::new(t.n(), mask_members(r)).unwrap();
                let y = FlatSource::new(t.n(), mask_members(c)).unwrap();
                let dist = push_forward::<f64>(t, &x, &y).unwrap();
                best = best.max(dist.dist_to_min_entropy(t.m().saturating_sub(d)).unwrap());
            }
        }
        best
    }

    fn tables() -> Vec<TwoSourceTable> {
        let mut v = vec![
            TwoSourceTable::inner_product(2).unwrap(),
            TwoSourceTable::constant(2, 2, 3).unwrap(),
            TwoSourceTable::gf2_mult(2, 2).unwrap(),
            TwoSourceTable::gf2_mult(3, 2).unwrap(),
        ];
        v.extend((0..6).map(|s| TwoSourceTable::random(2, 2, s).unwrap()));
        v.extend((0..3).map(|s| TwoSourceTable::random(3, 3, 100 + s).unwrap()));
        v.push(TwoSourceTable::random(2, 9, 5).unwrap());
        v
    }

    #[test]
    fn subsets_enumerate_in_order() {
        let all: Vec<u64> = subsets(5, 2).collect();
        assert_eq!(all.len(), 10);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsets(4, 0).collect::<Vec<_>>(), vec![0]);
        assert_eq!(subsets(64, 64).collect::<Vec<_>>(), vec![u64::MAX]);
        assert_eq!(subsets(3, 4).count(), 0);
        assert_eq!(binomial(16, 8), 12870.0);
    }

    #[test]
    fn almost_matches_brute_force() {
        for t in tables().into_iter().filter(|t| t.m() <= 3) {
            for k in 0..=t.n().min(2) {
                for u in 1..=t.num_colors().min(3) {
                    let got = balance_check_almost(&t, k, 0, 0.0, u, Feasibility::default()).unwrap();
                    assert_eq!(got.worst_count, brute_almost(&t, 1 << k, u), "k={k} u={u} {t:?}");
                    let census = got.rectangle.census(&t);
                    let recount: u64 = got.color_set.iter().map(|&z| census[z as usize]).sum();
                    assert_eq!(recount, got.worst_count);
                }
            }
        }
    }

    #[test]
    fn almost_dfs_path_matches_enumeration() {
        // 512 colors on 16 cells forces the search path for larger u
        let t = TwoSourceTable::random(2, 9, 11).unwrap();
        let c = Censor::new(&t);
        let mut scratch = Vec::new();
        for rows in subsets(4, 2) {
            let census = c.census(rows, &mut scratch);
            let mut dfs = AlmostDfs {
                census: &census,
                k: 2,
                u: 3,
                tot: vec![0; census.p()],
                scratch: vec![0; census.p()],
                best: None,
            };
            dfs.go(0, 0, 0);
            let mut order = Vec::new();
            let mut best = 0;
            for_each_combination(census.p(), 3, |set| {
                let scores: Vec<i64> =
                    (0..4).map(|v| set.iter().map(|&z| census.col(v)[z] as i64).sum()).collect();
                best = best.max(top_columns(&scores, 2, &mut order).0);
            });
            assert_eq!(dfs.best.unwrap().0, best);
        }
    }

    #[test]
    fn eps_star_matches_brute_force() {
        for t in tables() {
            for k in 0..=t.n().min(2) {
                for d in 0..=t.m() {
                    let got = measure_eps_star(&t, k, d, Feasibility::default()).unwrap();
                    let want = brute_eps(&t, 1 << k, d);
                    assert!((got.eps - want).abs() < 1e-12, "k={k} d={d}: {} vs {want}", got.eps);
                }
            }
        }
    }

    #[test]
    fn eps_star_search_path_matches_enumeration() {
        let t = TwoSourceTable::random(3, 8, 3).unwrap();
        let c = Censor::new(&t);
        let mut scratch = Vec::new();
        for rows in subsets(8, 2).take(10) {
            let census = c.census(rows, &mut scratch);
            let (enumerated, _) = eps_row_best(&census, 2, 4, &AtomicI64::new(-1), &mut Vec::new());
            let brute = subsets(8, 2)
                .map(|cols| {
                    let cen = Rectangle::from_masks(rows, cols).census(&t);
                    cen.iter().map(|&x| gain(4, 4, x as i64)).sum::<i64>()
                })
                .max()
                .unwrap();
            assert_eq!(enumerated, brute);
        }
        let direct = measure_eps_star(&t, 1, 0, Feasibility::default()).unwrap();
        assert!((direct.eps - brute_eps(&t, 2, 0)).abs() < 1e-12);
    }

    #[test]
    fn eps_star_examples() {
        for m in 1..=3 {
            let t = TwoSourceTable::constant(3, m, 0).unwrap();
            for d in 0..m {
                let e = measure_eps_star(&t, 1, d, Feasibility::default()).unwrap();
                assert_eq!(e.eps, 1.0 - 2f64.powi(-((m - d) as i32)));
            }
            assert_eq!(measure_eps_star(&t, 1, m, Feasibility::default()).unwrap().eps, 0.0);
        }
        let ip = TwoSourceTable::inner_product(3).unwrap();
        let a = measure_eps_star(&ip, 1, 0, Feasibility::default()).unwrap().eps;
        let b = measure_eps_star(&ip, 1, 1, Feasibility::default()).unwrap().eps;
        let c = measure_eps_star(&ip, 2, 0, Feasibility::default()).unwrap().eps;
        assert!(b <= a && c <= a);
    }

    #[test]
    fn almost_examples() {
        let c = TwoSourceTable::constant(3, 2, 1).unwrap();
        let r = balance_check_almost(&c, 1, 0, 0.5, 1, Feasibility::default()).unwrap();
        assert_eq!(r.worst_fraction, 1.0);
        assert!(!r.passed());
        assert_eq!(r.violation.unwrap().color_set, vec![1]);
        let t = TwoSourceTable::random(3, 2, 4).unwrap();
        assert!(balance_check_almost(&t, 2, 0, 0.0, 4, Feasibility::default()).unwrap().passed());
        assert!(balance_check_almost(&t, 4, 0, 0.0, 1, Feasibility::default()).is_err());
        assert!(balance_check_almost(&t, 1, 0, 0.0, 5, Feasibility::default()).is_err());
    }

    /// Every tuple of color sets, one per column, over every rectangle.
    fn brute_rainbow(t: &TwoSourceTable, k: usize, a: usize) -> u64 {
        let sets = brute_masks(t.num_colors(), a);
        let mut best = 0;
        for r in brute_masks(t.side(), k) {
            for c in brute_masks(t.side(), k) {
                let cols = mask_members(c);
                let rows = mask_members(r);
                let mut tuple = vec![0usize; k];
                loop {
                    let cnt = cols
                        .iter()
                        .zip(&tuple)
                        .map(|(&v, &si)| rows.iter().filter(|&&u| sets[si] >> t.color(u, v) & 1 == 1).count() as u64)
                        .sum();
                    best = best.max(cnt);
                    let Some(i) = (0..k).find(|&i| tuple[i] + 1 < sets.len()) else { break };
                    tuple[i] += 1;
                    tuple[..i].iter_mut().for_each(|x| *x = 0);
                }
            }
        }
        best
    }

    #[test]
    fn rainbow_matches_brute_force() {
        for t in tables().into_iter().filter(|t| t.n() == 2 && t.m() <= 2) {
            for k in 1..=3 {
                for den in 1..=(t.num_colors() * k) as u64 {
                    let r = rainbow_check(&t, k, den, Feasibility::default()).unwrap();
                    let a = r.colors_per_line;
                    assert_eq!(r.columns.worst_count, brute_rainbow(&t, k, a));
                    assert_eq!(r.rows.worst_count, brute_rainbow(&t.transpose(), k, a));
                }
            }
        }
    }

    #[test]
    fn rainbow_examples() {
        let t = TwoSourceTable::random(3, 2, 2).unwrap();
        assert!(rainbow_check(&t, 4, 1, Feasibility::default()).unwrap().passed());
        let c = TwoSourceTable::constant(3, 2, 0).unwrap();
        for k in 1..=8 {
            let r = rainbow_check(&c, k, 4, Feasibility::default()).unwrap();
            assert_eq!(r.columns.fraction, 1.0);
            assert!(!r.passed());
        }
        let tr = rainbow_check(&t.transpose(), 3, 2, Feasibility::default()).unwrap();
        let r = rainbow_check(&t, 3, 2, Feasibility::default()).unwrap();
        assert_eq!(tr.columns.worst_count, r.rows.worst_count);
        assert_eq!(tr.rows.worst_count, r.columns.worst_count);
        assert!(rainbow_check(&t, 3, 0, Feasibility::default()).is_err());
    }

    #[test]
    fn search_examples() {
        let s = search_rainbow(3, 2, 2, 1, 0, 5, Feasibility::default()).unwrap();
        assert_eq!(s.trials, 1);
        // single cells with D = M = 4: the column's own color is always available
        let s = search_rainbow(2, 2, 1, 4, 0, 20, Feasibility::default()).unwrap();
        assert!(s.found.is_none());
        assert_eq!(s.trials, 20);
    }

    #[test]
    fn guard_rejects_large_runs() {
        let t = TwoSourceTable::random(6, 2, 0).unwrap();
        assert!(matches!(
            balance_check_almost(&t, 5, 0, 0.0, 1, Feasibility::default()),
            Err(Error::Infeasible(_))
        ));
        let strict = Feasibility {
            work_limit: 10.0,
            overridden: false,
        };
        let small = TwoSourceTable::inner_product(2).unwrap();
        assert!(rainbow_check(&small, 2, 1, strict).is_err());
        assert!(rainbow_check(&small, 2, 1, Feasibility { overridden: true, ..strict }).is_ok());
    }
}
