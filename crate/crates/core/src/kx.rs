//! Kolmogorov-extraction semantics over a sealed [`ComplexityTable`]:
//! dependency, the source class `S_{k,α}`, output deficiency, and the
//! popular-color, curse-of-dependency, bounded-advice and equivalence demos.
//!
//! "Given n" is always the empty condition λ. A `NotFound` entry certifies
//! `≥ k` filters but makes `dep` indeterminate.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::balance::{measure_eps_star, EpsStar, Feasibility};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracle::{Complexity, ComplexityTable};
use crate::report::{Report, Witness};
use crate::table::{SingleSourceTable, TwoSourceTable};

fn bin(v: u64, len: u32) -> String {
    BitString::from_value(v, len).to_string()
}

/// λ index and the indices of every `n`-bit condition.
fn pair_indices(t: &ComplexityTable) -> Result<(usize, Vec<usize>)> {
    let lam = t.covers_lambda()?;
    let conds = t.condition_indices_of_length(t.n())?;
    Ok((lam, conds))
}

fn signed_dep(t: &ComplexityTable, lam: usize, conds: &[usize], x: u64, y: u64) -> Option<i64> {
    let cx = t.value(lam, x).found()? as i64;
    let cy = t.value(lam, y).found()? as i64;
    let cx_y = t.value(conds[y as usize], x).found()? as i64;
    let cy_x = t.value(conds[x as usize], y).found()? as i64;
    Some((cx - cx_y).max(cy - cy_x))
}

/// `max{C(x|λ) − C(x|y), C(y|λ) − C(y|x)}`, signed; `None` when any of the
/// four entries is `NotFound`.
pub fn dep(t: &ComplexityTable, x: &BitString, y: &BitString) -> Result<Option<i64>> {
    for s in [x, y] {
        if s.len() != t.n() as usize {
            return Err(Error::TargetLength {
                expected: t.n(),
                got: s.len(),
            });
        }
    }
    let terms = [
        t.complexity(x, &BitString::empty())?,
        t.complexity(x, y)?,
        t.complexity(y, &BitString::empty())?,
        t.complexity(y, x)?,
    ];
    let [cx, cx_y, cy, cy_x] = match terms.map(Complexity::found) {
        [Some(a), Some(b), Some(c), Some(d)] => [a, b, c, d].map(i64::from),
        _ => return Ok(None),
    };
    Ok(Some((cx - cx_y).max(cy - cy_x)))
}

/// `S_{k,α}` materialized against one oracle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourcePairClass {
    pub n: u32,
    pub k: u32,
    pub alpha: i64,
    /// Sorted by `(x, y)`.
    pub pairs: Vec<(u64, u64)>,
    /// Pairs passing the complexity floor whose dependency is indeterminate.
    pub indeterminate: u64,
}

impl SourcePairClass {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Every pair with `C(x|λ) ≥ k`, `C(y|λ) ≥ k` and `dep(x, y) ≤ α`.
pub fn enumerate_class(t: &ComplexityTable, k: u32, alpha: i64) -> Result<SourcePairClass> {
    let (lam, conds) = pair_indices(t)?;
    let n = t.n();
    let side = 1u64 << n;
    let rows: Vec<(Vec<(u64, u64)>, u64)> = (0..side)
        .into_par_iter()
        .map(|x| {
            let mut pairs = Vec::new();
            let mut indeterminate = 0;
            if !t.value(lam, x).at_least(k) {
                return (pairs, 0);
            }
            for y in 0..side {
                if !t.value(lam, y).at_least(k) {
                    continue;
                }
                match signed_dep(t, lam, &conds, x, y) {
                    Some(d) if d <= alpha => pairs.push((x, y)),
                    Some(_) => {}
                    None => indeterminate += 1,
                }
            }
            (pairs, indeterminate)
        })
        .collect();
    let indeterminate = rows.iter().map(|r| r.1).sum();
    Ok(SourcePairClass {
        n,
        k,
        alpha,
        pairs: rows.into_iter().flat_map(|r| r.0).collect(),
        indeterminate,
    })
}

/// `m − C(z|λ)`, exact or, for a `NotFound` output, an upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Deficiency {
    Exact(i64),
    AtMost(i64),
}

impl Deficiency {
    pub fn of(m: u32, c: Complexity, l_max: u32) -> Self {
        match c {
            Complexity::Found(v) => Deficiency::Exact(m as i64 - v as i64),
            Complexity::NotFound => Deficiency::AtMost(m as i64 - l_max as i64 - 1),
        }
    }

    /// The exact value or the bound.
    pub fn value(self) -> i64 {
        match self {
            Deficiency::Exact(v) | Deficiency::AtMost(v) => v,
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Deficiency::Exact(_))
    }

    /// Worst-case order: larger value first, and an exact value outranks a bound.
    fn rank(self) -> (i64, bool) {
        (self.value(), self.is_exact())
    }
}

impl fmt::Display for Deficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deficiency::Exact(v) => write!(f, "{v}"),
            Deficiency::AtMost(v) => write!(f, "<={v}"),
        }
    }
}

impl Serialize for Deficiency {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeficiencyReport {
    pub m: u32,
    pub pairs: u64,
    /// Smallest `C(f(x,y)|λ)` over the class.
    pub min_output_complexity: Option<Complexity>,
    /// Deficiency (or bound, written `<=v`) to count; totals `pairs`.
    pub histogram: BTreeMap<String, u64>,
    /// Worst deficiency; `None` on an empty class.
    pub max_deficiency: Option<Deficiency>,
    pub worst_witness: Option<(u64, u64)>,
}

impl DeficiencyReport {
    /// Certified `(k, α, d)` extraction on this class: every deficiency is at most `d`.
    pub fn certifies(&self, d: i64) -> bool {
        self.max_deficiency.is_none_or(|w| w.value() <= d)
    }
}

/// Output deficiency of `f` over every pair of `cls`. `t_m` holds `m`-bit
/// targets under λ.
pub fn kolm_extract_check(f: &TwoSourceTable, cls: &SourcePairClass, t_m: &ComplexityTable) -> Result<DeficiencyReport> {
    if t_m.n() != f.m() {
        return Err(Error::Coverage(format!(
            "output table holds {}-bit targets, need {}",
            t_m.n(),
            f.m()
        )));
    }
    if cls.n != f.n() {
        return Err(Error::Dimension(format!("class over {} bits, table over {}", cls.n, f.n())));
    }
    let lam = t_m.covers_lambda()?;
    let mut counts: BTreeMap<Deficiency, u64> = BTreeMap::new();
    let mut min_c: Option<Complexity> = None;
    let mut worst: Option<(Deficiency, (u64, u64))> = None;
    for &(x, y) in &cls.pairs {
        let c = t_m.value(lam, f.color(x, y) as u64);
        let d = Deficiency::of(f.m(), c, t_m.l_max());
        *counts.entry(d).or_default() += 1;
        min_c = Some(min_c.map_or(c, |m| m.min(c)));
        if worst.is_none_or(|(w, _)| d.rank() > w.rank()) {
            worst = Some((d, (x, y)));
        }
    }
    Ok(DeficiencyReport {
        m: f.m(),
        pairs: cls.pairs.len() as u64,
        min_output_complexity: min_c,
        histogram: counts.into_iter().map(|(d, c)| (d.to_string(), c)).collect(),
        max_deficiency: worst.map(|w| w.0),
        worst_witness: worst.map(|w| w.1),
    })
}

impl PartialOrd for Deficiency {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Deficiency {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.rank().cmp(&other.rank())
    }
}

// ---------------------------------------------------------------------------
// most popular color

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PopularColor {
    pub n: u32,
    pub m: u32,
    pub color: u16,
    pub preimages: u64,
    /// `2^{n−m}`.
    pub required: u64,
    /// Preimage of largest `C(x|λ)`, ties to the smaller value.
    pub witness: u64,
    pub witness_complexity: Complexity,
    /// `n − m`.
    pub threshold: i64,
    pub threshold_met: bool,
}

impl PopularColor {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new("popular").param("n", self.n).param("m", self.m);
        r.witnesses.push(
            Witness::new(Some(bin(self.witness, self.n)), None)
                .with("color", bin(self.color as u64, self.m))
                .with("C(x|λ)", self.witness_complexity.to_string()),
        );
        r.metric("preimages", self.preimages);
        r.assert("preimages>=2^(n-m)", self.preimages >= self.required, self.preimages, self.required);
        r.assert(
            "C(x|λ)>=n-m",
            self.threshold_met,
            self.witness_complexity.to_string(),
            self.threshold,
        );
        r
    }
}

pub fn popular_color_demo(f: &SingleSourceTable, t: &ComplexityTable) -> Result<PopularColor> {
    if t.n() != f.n() {
        return Err(Error::Coverage(format!(
            "oracle holds {}-bit targets, table has {}-bit inputs",
            t.n(),
            f.n()
        )));
    }
    let lam = t.covers_lambda()?;
    let census = f.census();
    let color = (0..census.len())
        .max_by(|&a, &b| census[a].cmp(&census[b]).then(b.cmp(&a)))
        .expect("at least one color") as u16;
    let (witness, witness_complexity) = (0..1u64 << f.n())
        .filter(|&x| f.color(x) == color)
        .map(|x| (x, t.value(lam, x)))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("the popular color has a preimage");
    let threshold = f.n() as i64 - f.m() as i64;
    Ok(PopularColor {
        n: f.n(),
        m: f.m(),
        color,
        preimages: census[color as usize],
        required: 1u64 << f.n().saturating_sub(f.m()),
        witness,
        witness_complexity,
        threshold,
        threshold_met: witness_complexity.lower_bound(t.l_max()) as i64 >= threshold,
    })
}

// ---------------------------------------------------------------------------
// curse of dependency

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurseDemo {
    pub n: u32,
    pub m: u32,
    pub alpha: u32,
    /// Most popular `α`-bit prefix of the outputs.
    pub prefix: u64,
    pub pairs_with_prefix: u64,
    /// `2^{2n−α}`.
    pub required: u64,
    pub witness: (u64, u64),
    /// `C(x‖y|λ)` of the witness.
    pub witness_complexity: Complexity,
    /// `2n − α`.
    pub threshold: u32,
    /// The pair oracle's limit is high enough to certify the threshold.
    pub certifiable: bool,
    pub certified: bool,
    pub output_deficiency: Option<Deficiency>,
}

impl CurseDemo {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new("curse")
            .param("n", self.n)
            .param("m", self.m)
            .param("alpha", self.alpha);
        let mut w = Witness::new(Some(bin(self.witness.0, self.n)), Some(bin(self.witness.1, self.n)))
            .with("C(xy|λ)", self.witness_complexity.to_string())
            .with("prefix", bin(self.prefix, self.alpha));
        if let Some(d) = self.output_deficiency {
            w = w.with("output_deficiency", d.to_string());
        }
        r.witnesses.push(w);
        r.metric("pairs_with_prefix", self.pairs_with_prefix);
        r.metric("certifiable", self.certifiable);
        r.assert(
            "pairs>=2^(2n-alpha)",
            self.pairs_with_prefix >= self.required,
            self.pairs_with_prefix,
            self.required,
        );
        if self.certifiable {
            r.assert(
                "C(xy|λ)>=2n-alpha",
                self.certified,
                self.witness_complexity.to_string(),
                self.threshold,
            );
        }
        r
    }
}

/// `t2n` holds `2n`-bit targets under λ; the pair `(x, y)` is the target `x‖y`.
/// `t_m`, when given, holds `m`-bit targets under λ for the output deficiency.
pub fn curse_demo(
    f: &TwoSourceTable,
    alpha: u32,
    t2n: &ComplexityTable,
    t_m: Option<&ComplexityTable>,
) -> Result<CurseDemo> {
    let (n, m) = (f.n(), f.m());
    if alpha > m {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} exceeds m = {m}")));
    }
    if t2n.n() != 2 * n {
        return Err(Error::Coverage(format!(
            "pair oracle holds {}-bit targets, need {}",
            t2n.n(),
            2 * n
        )));
    }
    let lam = t2n.covers_lambda()?;
    let prefix_of = |c: u16| (c as u64) >> (m - alpha);
    let mut counts = vec![0u64; 1 << alpha];
    for &c in f.colors() {
        counts[prefix_of(c) as usize] += 1;
    }
    let prefix = (0..counts.len())
        .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
        .expect("nonempty") as u64;
    let side = 1u64 << n;
    let (joint, witness_complexity) = (0..side * side)
        .filter(|&j| prefix_of(f.color(j >> n, j & (side - 1))) == prefix)
        .map(|j| (j, t2n.value(lam, j)))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("the popular prefix has a preimage");
    let witness = (joint >> n, joint & (side - 1));
    let threshold = (2 * n).saturating_sub(alpha);
    let output_deficiency = match t_m {
        Some(tm) => {
            if tm.n() != m {
                return Err(Error::Coverage(format!("output oracle holds {}-bit targets, need {m}", tm.n())));
            }
            let c = tm.value(tm.covers_lambda()?, f.color(witness.0, witness.1) as u64);
            Some(Deficiency::of(m, c, tm.l_max()))
        }
        None => None,
    };
    Ok(CurseDemo {
        n,
        m,
        alpha,
        prefix,
        pairs_with_prefix: counts[prefix as usize],
        required: 1u64 << threshold,
        witness,
        witness_complexity,
        threshold,
        certifiable: t2n.l_max() + 1 >= threshold,
        certified: witness_complexity.lower_bound(t2n.l_max()) >= threshold,
        output_deficiency,
    })
}

// ---------------------------------------------------------------------------
// bounded-advice extraction

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VvOutcome {
    pub n: u32,
    pub m: u32,
    pub advice: u32,
    /// `T = 2^m + 1`.
    pub t: u64,
    /// `K = 2^{advice+1} − 1`.
    pub max_steps: u64,
    /// `z_1, …, z_s` in selection order.
    pub chosen: Vec<u64>,
    /// Marked inputs before the first step and after each step.
    pub marked: Vec<u64>,
    /// Every `x` with `Range(x) = {z_1, …, z_s}`.
    pub witnesses: Vec<u64>,
    /// `witnesses · T^K ≥ 2^n`.
    pub count_bound_holds: bool,
    /// Each witness's range recomputed through the public lookup equals the chosen set.
    pub ranges_verified: bool,
}

impl VvOutcome {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new("vv")
            .param("n", self.n)
            .param("m", self.m)
            .param("advice", self.advice);
        let chosen: Vec<String> = self.chosen.iter().map(|&z| bin(z, self.m)).collect();
        for &x in self.witnesses.iter().take(8) {
            r.witnesses
                .push(Witness::new(Some(bin(x, self.n)), None).with("range", chosen.clone()));
        }
        r.metric("chosen", chosen);
        r.metric("marked", self.marked.clone());
        r.metric("witness_count", self.witnesses.len() as u64);
        r.metric("T", self.t);
        r.metric("K", self.max_steps);
        r.assert(
            "witnesses*T^K>=2^n",
            self.count_bound_holds,
            self.witnesses.len() as u64,
            format!("2^{} / {}^{}", self.n, self.t, self.max_steps),
        );
        r.assert("ranges verified", self.ranges_verified, self.witnesses.len() as u64, self.witnesses.len() as u64);
        r
    }
}

/// `t` holds `m`-bit targets under every `n`-bit condition; `Range(x) = {z :
/// C(z|x) ≤ advice}`. Picks up to `K` strings, each in at least a `1/T` share
/// of the ranges still marked, and counts the inputs whose range is exactly
/// the chosen set.
pub fn vv_procedure(t: &ComplexityTable, n: u32, advice: u32) -> Result<VvOutcome> {
    let m = t.n();
    if m > 16 || n > 16 {
        return Err(Error::InvalidParameter(format!("n = {n}, m = {m} too large for range bitsets")));
    }
    if advice >= 63 {
        return Err(Error::InvalidParameter(format!("advice = {advice} too large")));
    }
    if t.l_max() < advice {
        return Err(Error::Coverage(format!(
            "oracle limit {} is below the advice length {advice}; ranges would be incomplete",
            t.l_max()
        )));
    }
    let conds = t.condition_indices_of_length(n)?;
    let targets = 1usize << m;
    let words = targets.div_ceil(64);
    let ranges: Vec<Vec<u64>> = conds
        .iter()
        .map(|&ci| {
            let mut bits = vec![0u64; words];
            for (z, c) in t.row(ci).enumerate() {
                if c.found().is_some_and(|v| v <= advice) {
                    bits[z / 64] |= 1 << (z % 64);
                }
            }
            bits
        })
        .collect();
    let has = |x: usize, z: usize| ranges[x][z / 64] >> (z % 64) & 1 == 1;
    let t_param = (1u64 << m) + 1;
    let max_steps = (1u64 << (advice + 1)) - 1;
    let mut marked: Vec<usize> = (0..1usize << n).collect();
    let mut chosen: Vec<u64> = Vec::new();
    let mut sizes = vec![marked.len() as u64];
    while (chosen.len() as u64) < max_steps {
        let mut best: Option<(usize, u64)> = None;
        for z in 0..targets {
            if chosen.contains(&(z as u64)) {
                continue;
            }
            let count = marked.iter().filter(|&&x| has(x, z)).count() as u64;
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((z, count));
            }
        }
        match best {
            Some((z, count)) if count > 0 && count * t_param >= marked.len() as u64 => {
                chosen.push(z as u64);
                marked.retain(|&x| has(x, z));
                sizes.push(marked.len() as u64);
            }
            _ => break,
        }
    }
    let mut chosen_bits = vec![0u64; words];
    for &z in &chosen {
        chosen_bits[z as usize / 64] |= 1 << (z % 64);
    }
    let witnesses: Vec<u64> = marked
        .iter()
        .filter(|&&x| ranges[x] == chosen_bits)
        .map(|&x| x as u64)
        .collect();
    let power = (0..max_steps).try_fold(1u128, |acc, _| acc.checked_mul(t_param as u128));
    let count = witnesses.len() as u128;
    let count_bound_holds = match power {
        Some(p) => count.saturating_mul(p) >= 1u128 << n,
        None => count > 0,
    };
    let mut sorted_chosen = chosen.clone();
    sorted_chosen.sort_unstable();
    let mut ranges_verified = true;
    for &x in &witnesses {
        let cond = BitString::from_value(x, n);
        let mut direct = Vec::new();
        for z in 0..targets as u64 {
            let c = t.complexity(&BitString::from_value(z, m), &cond)?;
            if c.found().is_some_and(|v| v <= advice) {
                direct.push(z);
            }
        }
        ranges_verified &= direct == sorted_chosen;
    }
    Ok(VvOutcome {
        n,
        m,
        advice,
        t: t_param,
        max_steps,
        chosen,
        marked: sizes,
        witnesses,
        count_bound_holds,
        ranges_verified,
    })
}

// ---------------------------------------------------------------------------
// almost extractors versus Kolmogorov extractors

/// Smallest `j ≥ 0` with `num · 2^j ≥ den`, i.e. `⌈log2(den/num)⌉` for `num > 0`.
fn ceil_log2_ratio(num: i64, den: i64) -> u32 {
    let mut j = 0;
    while (num as i128) << j < den as i128 {
        j += 1;
    }
    j
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equivalence {
    pub n: u32,
    pub m: u32,
    pub k: u32,
    pub d: u32,
    pub margin: u32,
    pub eps_star: EpsStar,
    pub eps_star_constant: EpsStar,
    /// `⌈log2(1/ε*)⌉`, absent when `ε* = 0`.
    pub log2_inv_eps: Option<u32>,
    /// `⌈log2(1/ε*)⌉ + d + 1`, capped at `2n`.
    pub alpha: i64,
    pub alpha_capped: bool,
    pub class_size: u64,
    pub class_indeterminate: u64,
    pub table: DeficiencyReport,
    pub constant: DeficiencyReport,
    /// Nonempty class, the constant table's worst deficiency is exact, and
    /// the table's worst deficiency (or bound) is strictly below it.
    pub separated: bool,
}

impl Equivalence {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new("equivalence")
            .param("n", self.n)
            .param("m", self.m)
            .param("k", self.k)
            .param("d", self.d)
            .param("margin", self.margin);
        r.histogram = self.table.histogram.clone();
        for (name, rep) in [("table", &self.table), ("constant", &self.constant)] {
            if let (Some((x, y)), Some(w)) = (rep.worst_witness, rep.max_deficiency) {
                r.witnesses.push(
                    Witness::new(Some(bin(x, self.n)), Some(bin(y, self.n)))
                        .with("source", name)
                        .with("deficiency", w.to_string()),
                );
            }
        }
        r.metric("eps_star", self.eps_star.eps);
        r.metric("eps_star_constant", self.eps_star_constant.eps);
        r.metric("log2_inv_eps", self.log2_inv_eps);
        r.metric("alpha", self.alpha);
        r.metric("alpha_capped", self.alpha_capped);
        r.metric("class_size", self.class_size);
        r.metric("class_indeterminate", self.class_indeterminate);
        let show = |d: Option<Deficiency>| d.map_or("none".to_string(), |d| d.to_string());
        r.assert("class nonempty", self.class_size > 0, self.class_size, 1);
        r.assert(
            "max deficiency: table < constant",
            self.separated,
            show(self.table.max_deficiency),
            show(self.constant.max_deficiency),
        );
        r
    }
}

/// Measures `ε*` of `f`, derives `α` from it, and compares `f` with the
/// all-zero table on `S_{k+margin, α}`. `t_n` holds `n`-bit targets under λ
/// and every `n`-bit condition; `t_m` holds `m`-bit targets under λ.
pub fn equivalence_report(
    f: &TwoSourceTable,
    k: u32,
    d: u32,
    margin: u32,
    t_n: &ComplexityTable,
    t_m: &ComplexityTable,
    feasibility: Feasibility,
) -> Result<Equivalence> {
    if t_n.n() != f.n() {
        return Err(Error::Coverage(format!(
            "source oracle holds {}-bit targets, table has {}-bit inputs",
            t_n.n(),
            f.n()
        )));
    }
    let constant = TwoSourceTable::constant(f.n(), f.m(), 0)?;
    let eps_star = measure_eps_star(f, k, d, feasibility)?;
    let eps_star_constant = measure_eps_star(&constant, k, d, feasibility)?;
    let cap = 2 * f.n() as i64;
    let log2_inv_eps = (eps_star.numerator > 0).then(|| ceil_log2_ratio(eps_star.numerator, eps_star.denominator));
    let raw_alpha = log2_inv_eps.map_or(i64::MAX, |l| l as i64 + d as i64 + 1);
    let alpha = raw_alpha.min(cap);
    let cls = enumerate_class(t_n, k + margin, alpha)?;
    let table = kolm_extract_check(f, &cls, t_m)?;
    let constant_def = kolm_extract_check(&constant, &cls, t_m)?;
    let separated = match (table.max_deficiency, constant_def.max_deficiency) {
        (Some(a), Some(b)) => b.is_exact() && a.value() < b.value(),
        _ => false,
    };
    Ok(Equivalence {
        n: f.n(),
        m: f.m(),
        k,
        d,
        margin,
        eps_star,
        eps_star_constant,
        log2_inv_eps,
        alpha,
        alpha_capped: raw_alpha > cap,
        class_size: cls.len() as u64,
        class_indeterminate: cls.indeterminate,
        table,
        constant: constant_def,
        separated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{all_conditions_with_lambda, TableBuilder};

    fn full(n: u32, l_max: u32) -> ComplexityTable {
        TableBuilder::new(n)
            .conditions(all_conditions_with_lambda(n))
            .l_max(l_max)
            .build()
            .unwrap()
    }

    fn lambda_only(n: u32, l_max: u32) -> ComplexityTable {
        TableBuilder::new(n).l_max(l_max).build().unwrap()
    }

    fn bs(v: u64, n: u32) -> BitString {
        BitString::from_value(v, n)
    }

    #[test]
    fn dep_is_symmetric_and_self_pairs_dominate() {
        let t = full(4, 10);
        for x in 0..16 {
            let own = dep(&t, &bs(x, 4), &bs(x, 4)).unwrap().unwrap();
            for y in 0..16 {
                let a = dep(&t, &bs(x, 4), &bs(y, 4)).unwrap();
                assert_eq!(a, dep(&t, &bs(y, 4), &bs(x, 4)).unwrap());
                assert!(a.unwrap() <= own);
            }
        }
        assert!(dep(&t, &bs(0, 3), &bs(0, 4)).is_err());
    }

    #[test]
    fn dep_self_pair_respects_copy_bound() {
        // the COPY-all program bounds C(x|x) by 2⌊log2 8⌋ + 4
        let x = bs(0b1011_0010, 8);
        let t = TableBuilder::new(8)
            .conditions([BitString::empty(), x.clone()])
            .l_max(16)
            .build()
            .unwrap();
        let cx = t.complexity(&x, &BitString::empty()).unwrap().found().unwrap() as i64;
        assert!(dep(&t, &x, &x).unwrap().unwrap() >= cx - 10);
    }

    #[test]
    fn dep_is_indeterminate_on_not_found() {
        let t = full(3, 4);
        let x = bs(0b101, 3);
        assert_eq!(dep(&t, &x, &bs(0b011, 3)).unwrap(), None);
        let cls = enumerate_class(&t, 0, 6).unwrap();
        assert!(cls.indeterminate > 0);
        assert_eq!(cls.len() as u64 + cls.indeterminate, 64);
    }

    #[test]
    fn class_examples() {
        let t = full(4, 10);
        assert_eq!(enumerate_class(&t, 0, 8).unwrap().len(), 256);
        assert!(enumerate_class(&t, 11, 8).unwrap().is_empty());
        assert_eq!(enumerate_class(&t, 3, 2).unwrap().len(), 256);
    }

    #[test]
    fn class_is_monotone() {
        for n in 1..=5 {
            let t = full(n, n + 6);
            for k in 0..=2 * n + 2 {
                for alpha in -2..=2 * n as i64 {
                    let base = enumerate_class(&t, k, alpha).unwrap();
                    let tighter = enumerate_class(&t, k + 1, alpha).unwrap();
                    let looser = enumerate_class(&t, k, alpha + 1).unwrap();
                    assert!(tighter.pairs.iter().all(|p| base.pairs.contains(p)));
                    assert!(base.pairs.iter().all(|p| looser.pairs.contains(p)));
                }
            }
        }
    }

    #[test]
    fn deficiency_examples() {
        let t4 = full(4, 10);
        let cls = enumerate_class(&t4, 3, 2).unwrap();
        let out = lambda_only(2, 10);
        let constant = TwoSourceTable::constant(4, 2, 0).unwrap();
        let rep = kolm_extract_check(&constant, &cls, &out).unwrap();
        assert_eq!(rep.min_output_complexity, Some(Complexity::Found(4)));
        assert_eq!(rep.max_deficiency, Some(Deficiency::Exact(-2)));
        assert_eq!(rep.histogram.values().sum::<u64>(), rep.pairs);

        let empty = enumerate_class(&t4, 11, 2).unwrap();
        let rep = kolm_extract_check(&constant, &empty, &out).unwrap();
        assert!(rep.histogram.is_empty() && rep.certifies(0));

        let zero = TwoSourceTable::constant(4, 0, 0).unwrap();
        let rep = kolm_extract_check(&zero, &cls, &lambda_only(0, 2)).unwrap();
        assert_eq!(rep.histogram, BTreeMap::from([("0".to_string(), 256)]));

        let random = TwoSourceTable::random(4, 2, 1).unwrap();
        let rep = kolm_extract_check(&random, &cls, &out).unwrap();
        // every 2-bit string costs two EMIT opcodes
        assert_eq!(rep.histogram, BTreeMap::from([("-2".to_string(), 256)]));
        assert!(kolm_extract_check(&random, &cls, &t4).is_err());
    }

    #[test]
    fn not_found_outputs_give_bounds() {
        let t4 = full(4, 10);
        let cls = enumerate_class(&t4, 0, 8).unwrap();
        let random = TwoSourceTable::random(4, 16, 3).unwrap();
        let rep = kolm_extract_check(&random, &cls, &lambda_only(16, 12)).unwrap();
        let w = rep.max_deficiency.unwrap();
        assert!(w.value() <= 16 - 12 || w.is_exact());
        assert!(rep.histogram.keys().any(|k| k.starts_with("<=")));
    }

    #[test]
    fn popular_examples() {
        let t = lambda_only(4, 10);
        let c = SingleSourceTable::constant(4, 2, 3).unwrap();
        let p = popular_color_demo(&c, &t).unwrap();
        assert_eq!((p.color, p.preimages), (3, 16));
        let tr = SingleSourceTable::truncate(4, 2).unwrap();
        let p = popular_color_demo(&tr, &t).unwrap();
        assert_eq!((p.color, p.preimages, p.required), (0, 4, 4));
        let t6 = lambda_only(6, 12);
        for seed in 0..10 {
            let f = SingleSourceTable::random(6, 2, seed).unwrap();
            let p = popular_color_demo(&f, &t6).unwrap();
            assert!(p.preimages >= 16 && p.threshold_met);
            assert!(p.to_report().passed());
        }
    }

    #[test]
    fn curse_examples() {
        let t6 = lambda_only(6, 12);
        let f = TwoSourceTable::random(3, 2, 7).unwrap();
        let c = curse_demo(&f, 0, &t6, None).unwrap();
        assert_eq!((c.prefix, c.pairs_with_prefix), (0, 64));
        let k = TwoSourceTable::constant(3, 2, 2).unwrap();
        let c = curse_demo(&k, 2, &t6, Some(&lambda_only(2, 6))).unwrap();
        assert_eq!((c.prefix, c.pairs_with_prefix), (2, 64));
        assert_eq!(c.output_deficiency, Some(Deficiency::Exact(-2)));
        assert!(curse_demo(&k, 3, &t6, None).is_err());
        assert!(curse_demo(&k, 1, &lambda_only(4, 6), None).is_err());
    }

    #[test]
    fn curse_always_certifies() {
        for n in 1..=5 {
            let t2n = lambda_only(2 * n, 2 * n);
            for alpha in 0..=3 {
                for seed in 0..3 {
                    let f = TwoSourceTable::random(n, 3, seed).unwrap();
                    let c = curse_demo(&f, alpha, &t2n, None).unwrap();
                    assert!(c.certifiable && c.certified, "n={n} alpha={alpha} seed={seed}");
                    assert!(c.to_report().passed());
                }
            }
        }
    }

    fn vv_table(n: u32, m: u32, l_max: u32) -> ComplexityTable {
        TableBuilder::new(m)
            .all_conditions_of_length(n)
            .l_max(l_max)
            .build()
            .unwrap()
    }

    #[test]
    fn vv_examples() {
        let t = vv_table(4, 2, 10);
        for advice in 0..=1 {
            let v = vv_procedure(&t, 4, advice).unwrap();
            assert!(v.chosen.is_empty());
            assert_eq!(v.witnesses.len(), 16);
            assert!(v.count_bound_holds && v.ranges_verified);
        }
        let empty = vv_table(4, 2, 0);
        let v = vv_procedure(&empty, 4, 0).unwrap();
        assert_eq!((v.chosen.len(), v.witnesses.len()), (0, 16));
        // four-bit programs reach every 2-bit string
        let v = vv_procedure(&t, 4, 4).unwrap();
        assert_eq!(v.chosen, vec![0, 1, 2, 3]);
        assert_eq!(v.witnesses.len(), 16);
        assert!(v.to_report().passed());
        assert!(vv_procedure(&vv_table(4, 2, 3), 4, 4).is_err());
    }

    #[test]
    fn vv_bound_on_mixed_ranges() {
        for advice in [5, 6, 7, 8] {
            let t = vv_table(3, 3, 9);
            let v = vv_procedure(&t, 3, advice).unwrap();
            assert!(v.count_bound_holds && v.ranges_verified, "advice={advice}");
            assert!(v.chosen.len() as u64 <= v.max_steps);
        }
    }

    #[test]
    fn ceil_log2_ratio_examples() {
        assert_eq!(ceil_log2_ratio(1, 1), 0);
        assert_eq!(ceil_log2_ratio(24, 128), 3);
        assert_eq!(ceil_log2_ratio(1, 1024), 10);
        assert_eq!(ceil_log2_ratio(3, 4), 1);
    }

    #[test]
    fn equivalence_constant_is_not_separated() {
        let t4 = full(4, 10);
        let out = lambda_only(2, 8);
        let c = TwoSourceTable::constant(4, 2, 0).unwrap();
        let e = equivalence_report(&c, 2, 0, 0, &t4, &out, Feasibility::default()).unwrap();
        assert_eq!(e.eps_star.eps, 0.75);
        assert_eq!(e.alpha, 2);
        assert!(!e.separated);
        let e = equivalence_report(&c, 2, 2, 0, &t4, &out, Feasibility::default()).unwrap();
        assert!(e.alpha_capped && e.alpha == 8);
    }
}
