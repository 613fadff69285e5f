//! Exact resource-bounded conditional complexity on RM-1 by exhaustive program
//! enumeration.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::machine::{run_packed_for_target, MachineBudget, PackedCondition};
use crate::report::Report;

/// Default enumeration guard on the longest program length.
pub const DEFAULT_MAX_L_MAX: u32 = 24;
/// Longest target length a table may hold (dense storage of `2^n` entries per condition).
pub const MAX_TARGET_LEN: u32 = 24;
const NOT_FOUND: u8 = u8::MAX;

/// A minimal program length, or `NotFound` when no program of length at most
/// `l_max` produces the target. `NotFound` orders above every length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Complexity {
    Found(u32),
    NotFound,
}

impl Complexity {
    pub fn found(self) -> Option<u32> {
        match self {
            Complexity::Found(v) => Some(v),
            Complexity::NotFound => None,
        }
    }

    pub fn is_found(self) -> bool {
        matches!(self, Complexity::Found(_))
    }

    /// `self >= k`; a `NotFound` entry certifies any threshold.
    pub fn at_least(self, k: u32) -> bool {
        match self {
            Complexity::Found(v) => v >= k,
            Complexity::NotFound => true,
        }
    }

    /// Lower bound on the true value given the enumeration limit.
    pub fn lower_bound(self, l_max: u32) -> u32 {
        match self {
            Complexity::Found(v) => v,
            Complexity::NotFound => l_max + 1,
        }
    }

    fn from_raw(raw: u8) -> Self {
        if raw == NOT_FOUND {
            Complexity::NotFound
        } else {
            Complexity::Found(raw as u32)
        }
    }
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Complexity::Found(v) => write!(f, "{v}"),
            Complexity::NotFound => f.write_str("NOT_FOUND"),
        }
    }
}

/// A length serializes as a number, `NotFound` as the string `"NOT_FOUND"`.
impl Serialize for Complexity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Complexity::Found(v) => s.serialize_u32(*v),
            Complexity::NotFound => s.serialize_str("NOT_FOUND"),
        }
    }
}

/// Builder for [`ComplexityTable`] carrying the feasibility guard.
#[derive(Clone, Debug)]
pub struct TableBuilder {
    n: u32,
    conditions: Vec<BitString>,
    l_max: u32,
    budget: MachineBudget,
    max_l_max: u32,
}

impl TableBuilder {
    /// Defaults: condition set `{λ}`, `l_max = n + 6`, default budgets.
    pub fn new(n: u32) -> Self {
        Self {
            n,
            conditions: vec![BitString::empty()],
            l_max: n + 6,
            budget: MachineBudget::default(),
            max_l_max: DEFAULT_MAX_L_MAX,
        }
    }

    pub fn conditions(mut self, conditions: impl IntoIterator<Item = BitString>) -> Self {
        self.conditions = conditions.into_iter().collect();
        self
    }

    /// `λ` followed by every string of length `len`, in numeric order.
    pub fn all_conditions_of_length(self, len: u32) -> Self {
        self.conditions(all_conditions_with_lambda(len))
    }

    pub fn l_max(mut self, l_max: u32) -> Self {
        self.l_max = l_max;
        self
    }

    pub fn budget(mut self, budget: MachineBudget) -> Self {
        self.budget = budget;
        self
    }

    pub fn max_l_max(mut self, guard: u32) -> Self {
        self.max_l_max = guard;
        self
    }

    pub fn build(self) -> Result<ComplexityTable> {
        let TableBuilder {
            n,
            conditions,
            l_max,
            budget,
            max_l_max,
        } = self;
        budget.validate()?;
        if l_max > max_l_max {
            return Err(Error::Infeasible(format!(
                "l_max = {l_max} exceeds the enumeration guard {max_l_max}"
            )));
        }
        if l_max > 62 {
            return Err(Error::Infeasible("programs longer than 62 bits are not enumerable".into()));
        }
        if n > MAX_TARGET_LEN {
            return Err(Error::Infeasible(format!(
                "target length {n} exceeds the dense-storage limit {MAX_TARGET_LEN}"
            )));
        }
        if l_max < 2 * n {
            log::warn!("l_max = {l_max} < 2n = {}: NOT_FOUND entries are expected", 2 * n);
        }
        let conditions = dedup_preserving_order(conditions);
        let packed: Vec<PackedCondition> = conditions
            .iter()
            .map(|c| {
                PackedCondition::from_bitstring(c).ok_or_else(|| {
                    Error::Infeasible(format!("condition of {} bits exceeds 64", c.len()))
                })
            })
            .collect::<Result<_>>()?;

        let targets = 1usize << n;
        let total_programs: u64 = (1u64 << (l_max + 1)) - 1;
        let entries: Vec<Vec<u8>> = packed
            .iter()
            .map(|&cond| enumerate_condition(cond, n, total_programs, budget, targets))
            .collect();
        let index = build_index(&conditions);
        Ok(ComplexityTable {
            n,
            l_max,
            budget,
            conditions,
            index,
            entries,
        })
    }
}

/// Enumerates every program in length-lexicographic order (program index `i`
/// has length `floor(log2(i + 1))`) and keeps the shortest per target.
fn enumerate_condition(
    cond: PackedCondition,
    n: u32,
    total_programs: u64,
    budget: MachineBudget,
    targets: usize,
) -> Vec<u8> {
    (0..total_programs as usize)
        .into_par_iter()
        .with_min_len(1 << 12)
        .fold(
            || vec![NOT_FOUND; targets],
            |mut acc, idx| {
                let idx = idx as u64;
                let plen = 63 - (idx + 1).leading_zeros();
                let prog = idx + 1 - (1u64 << plen);
                if let Some(v) = run_packed_for_target(prog, plen, cond, budget, n) {
                    let slot = &mut acc[v as usize];
                    *slot = (*slot).min(plen as u8);
                }
                acc
            },
        )
        .reduce(
            || vec![NOT_FOUND; targets],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x = (*x).min(y));
                a
            },
        )
}

/// Shorthand for [`TableBuilder`] with the default guard.
pub fn build_complexity_table(
    n: u32,
    conditions: &[BitString],
    l_max: u32,
    budget: MachineBudget,
) -> Result<ComplexityTable> {
    TableBuilder::new(n)
        .conditions(conditions.iter().cloned())
        .l_max(l_max)
        .budget(budget)
        .build()
}

pub fn all_conditions_with_lambda(len: u32) -> Vec<BitString> {
    std::iter::once(BitString::empty())
        .chain((0..1u64 << len).map(|v| BitString::from_value(v, len)))
        .collect()
}

fn dedup_preserving_order(conditions: Vec<BitString>) -> Vec<BitString> {
    let mut seen = std::collections::HashSet::new();
    conditions.into_iter().filter(|c| seen.insert(c.clone())).collect()
}

fn build_index(conditions: &[BitString]) -> HashMap<BitString, usize> {
    conditions.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect()
}

/// Sealed map from (condition, target) to the exact minimal program length on
/// RM-1 among programs of length at most `l_max`. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexityTable {
    n: u32,
    l_max: u32,
    budget: MachineBudget,
    conditions: Vec<BitString>,
    index: HashMap<BitString, usize>,
    entries: Vec<Vec<u8>>,
}

impl ComplexityTable {
    /// Target length.
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn budget(&self) -> MachineBudget {
        self.budget
    }

    pub fn conditions(&self) -> &[BitString] {
        &self.conditions
    }

    pub fn condition_index(&self, y: &BitString) -> Option<usize> {
        self.index.get(y).copied()
    }

    pub fn lambda_index(&self) -> Option<usize> {
        self.condition_index(&BitString::empty())
    }

    /// `C_T(x | y)`.
    pub fn complexity(&self, x: &BitString, y: &BitString) -> Result<Complexity> {
        let ci = self
            .condition_index(y)
            .ok_or_else(|| Error::UnknownCondition(y.to_string()))?;
        if x.len() != self.n as usize {
            return Err(Error::TargetLength {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(self.value(ci, x.to_value().expect("target length is at most 24")))
    }

    /// Unchecked lookup by condition index and numeric target value.
    #[inline]
    pub fn value(&self, cond_idx: usize, target: u64) -> Complexity {
        Complexity::from_raw(self.entries[cond_idx][target as usize])
    }

    /// Lookup conditioned on an `len`-bit numeric value.
    pub fn value_given(&self, target: u64, cond: u64, cond_len: u32) -> Result<Complexity> {
        let y = BitString::from_value(cond, cond_len);
        let ci = self
            .condition_index(&y)
            .ok_or_else(|| Error::UnknownCondition(y.to_string()))?;
        Ok(self.value(ci, target))
    }

    /// All entries for one condition, indexed by target value.
    pub fn row(&self, cond_idx: usize) -> impl Iterator<Item = Complexity> + '_ {
        self.entries[cond_idx].iter().map(|&r| Complexity::from_raw(r))
    }

    pub fn covers_lambda(&self) -> Result<usize> {
        self.lambda_index()
            .ok_or_else(|| Error::Coverage("table has no λ condition".into()))
    }

    /// Indices of the conditions `0..2^len` as `len`-bit strings, erroring on any gap.
    pub fn condition_indices_of_length(&self, len: u32) -> Result<Vec<usize>> {
        (0..1u64 << len)
            .map(|v| {
                let y = BitString::from_value(v, len);
                self.condition_index(&y)
                    .ok_or_else(|| Error::Coverage(format!("condition {y} missing from table")))
            })
            .collect()
    }

    /// Every target has an entry for every condition.
    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|row| row.iter().all(|&r| r != NOT_FOUND))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TableFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    version: u32,
    n: u32,
    l_max: u32,
    budget: MachineBudget,
    conditions: Vec<BitString>,
    entries: Vec<EntryRecord>,
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    cond_idx: usize,
    target_hex: String,
    c: u32,
}

impl From<&ComplexityTable> for TableFile {
    fn from(t: &ComplexityTable) -> Self {
        let mut entries = Vec::new();
        for (ci, row) in t.entries.iter().enumerate() {
            for (target, &raw) in row.iter().enumerate() {
                if raw != NOT_FOUND {
                    entries.push(EntryRecord {
                        cond_idx: ci,
                        target_hex: BitString::from_value(target as u64, t.n).to_hex(),
                        c: raw as u32,
                    });
                }
            }
        }
        TableFile {
            version: 1,
            n: t.n,
            l_max: t.l_max,
            budget: t.budget,
            conditions: t.conditions.clone(),
            entries,
        }
    }
}

impl TryFrom<TableFile> for ComplexityTable {
    type Error = Error;

    fn try_from(f: TableFile) -> Result<Self> {
        if f.version != 1 {
            return Err(Error::Malformed(format!("unsupported table version {}", f.version)));
        }
        if f.n > MAX_TARGET_LEN {
            return Err(Error::Malformed(format!("target length {} too large", f.n)));
        }
        if f.l_max >= NOT_FOUND as u32 {
            return Err(Error::Malformed(format!("l_max {} too large", f.l_max)));
        }
        f.budget.validate()?;
        let index = build_index(&f.conditions);
        if index.len() != f.conditions.len() {
            return Err(Error::Malformed("duplicate conditions".into()));
        }
        let mut entries = vec![vec![NOT_FOUND; 1usize << f.n]; f.conditions.len()];
        for e in f.entries {
            let target = BitString::from_hex(&e.target_hex, f.n as usize)?;
            let row = entries
                .get_mut(e.cond_idx)
                .ok_or_else(|| Error::Malformed(format!("cond_idx {} out of range", e.cond_idx)))?;
            if e.c > f.l_max {
                return Err(Error::Malformed(format!("entry value {} exceeds l_max", e.c)));
            }
            row[target.to_value().expect("n <= 24") as usize] = e.c as u8;
        }
        Ok(ComplexityTable {
            n: f.n,
            l_max: f.l_max,
            budget: f.budget,
            conditions: f.conditions,
            index,
            entries,
        })
    }
}

/// Census of `|C(x‖y) − (C(x) + C(y|x))|` over all pairs of `n`-bit strings.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryCensus {
    pub n: u32,
    pub histogram: BTreeMap<u32, u64>,
    pub max_deviation: Option<u32>,
    /// Pairs with a NOT_FOUND entry among the three terms.
    pub indeterminate: u64,
}

/// Symmetry-of-information diagnostic. `base` must hold `n`-bit targets under
/// `λ` and every `n`-bit condition; `pairs` must hold `2n`-bit targets under `λ`.
pub fn symmetry_report(base: &ComplexityTable, pairs: &ComplexityTable) -> Result<SymmetryCensus> {
    let n = base.n();
    if pairs.n() != 2 * n {
        return Err(Error::Coverage(format!(
            "companion table holds {}-bit targets, need {}",
            pairs.n(),
            2 * n
        )));
    }
    let lam = base.covers_lambda()?;
    let lam2 = pairs.covers_lambda()?;
    let conds = base.condition_indices_of_length(n)?;
    let mut histogram = BTreeMap::new();
    let mut indeterminate = 0;
    for x in 0..1u64 << n {
        for y in 0..1u64 << n {
            let joint = pairs.value(lam2, (x << n) | y);
            let cx = base.value(lam, x);
            let cy_given_x = base.value(conds[x as usize], y);
            match (joint.found(), cx.found(), cy_given_x.found()) {
                (Some(j), Some(a), Some(b)) => {
                    let dev = (j as i64 - (a + b) as i64).unsigned_abs() as u32;
                    *histogram.entry(dev).or_insert(0) += 1;
                }
                _ => indeterminate += 1,
            }
        }
    }
    let max_deviation = histogram.keys().next_back().copied();
    Ok(SymmetryCensus {
        n,
        histogram,
        max_deviation,
        indeterminate,
    })
}

impl SymmetryCensus {
    pub fn to_report(&self) -> Report {
        let mut r = Report::new("symmetry").param("n", self.n);
        r.histogram_from(self.histogram.iter().map(|(k, v)| (*k, *v)));
        r.metric("max_deviation", self.max_deviation);
        r.metric("indeterminate", self.indeterminate);
        r
    }
}
