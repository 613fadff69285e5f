//! Counting applications: the census of strings dependent on a fixed `x`,
//! and avoidance of a low-complexity set by an extractor's outputs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::kx::SourcePairClass;
use crate::oracle::{Complexity, ComplexityTable};
use crate::report::{Report, Witness};
use crate::table::TwoSourceTable;

/// `B_{x,α} = {y : C(y|λ) − C(y|x) ≥ α}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DependentCensus {
    pub n: u32,
    pub x: u64,
    pub alpha: i64,
    pub members: Vec<u64>,
    /// `y` with a `NotFound` entry in either term, excluded from `members`.
    pub indeterminate: u64,
    /// `|B_{x,α}| / 2^{n−α}`.
    pub fitted_c: f64,
}

impl DependentCensus {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

fn census_from<F, G>(n: u32, x: u64, alpha: i64, plain: F, given_x: G) -> DependentCensus
where
    F: Fn(u64) -> Complexity,
    G: Fn(u64) -> Complexity,
{
    let mut members = Vec::new();
    let mut indeterminate = 0;
    for y in 0..1u64 << n {
        match (plain(y).found(), given_x(y).found()) {
            (Some(a), Some(b)) => {
                if a as i64 - b as i64 >= alpha {
                    members.push(y);
                }
            }
            _ => indeterminate += 1,
        }
    }
    let fitted_c = members.len() as f64 / 2f64.powi(n as i32 - alpha as i32);
    DependentCensus {
        n,
        x,
        alpha,
        members,
        indeterminate,
        fitted_c,
    }
}

/// `t` must hold λ and the condition `x` (an `n`-bit value).
pub fn count_dependent(t: &ComplexityTable, x: u64, alpha: i64) -> Result<DependentCensus> {
    let n = t.n();
    let lam = t.covers_lambda()?;
    let cond = BitString::from_value(x, n);
    let cx = t
        .condition_index(&cond)
        .ok_or_else(|| Error::Coverage(format!("condition {cond} missing from table")))?;
    Ok(census_from(n, x, alpha, |y| t.value(lam, y), |y| t.value(cx, y)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusSweep {
    pub n: u32,
    pub alpha: i64,
    pub censuses: Vec<DependentCensus>,
    pub max_fitted_c: f64,
    /// `|B_{x,α}|` to number of `x`.
    pub size_histogram: BTreeMap<u64, u64>,
}

impl CensusSweep {
    /// `calibration` is the committed ceiling on the fitted constant.
    pub fn to_report(&self, calibration: Option<f64>) -> Report {
        let mut r = Report::new("dep-census").param("n", self.n).param("alpha", self.alpha);
        r.histogram_from(self.size_histogram.iter().map(|(k, v)| (*k, *v)));
        if let Some(worst) = self.censuses.iter().max_by(|a, b| a.fitted_c.total_cmp(&b.fitted_c).then(b.x.cmp(&a.x))) {
            r.witnesses.push(
                Witness::new(Some(BitString::from_value(worst.x, self.n).to_string()), None)
                    .with("size", worst.size() as u64)
                    .with("fitted_c", worst.fitted_c),
            );
        }
        r.metric("max_fitted_c", self.max_fitted_c);
        r.metric("indeterminate", self.censuses.iter().map(|c| c.indeterminate).sum::<u64>());
        if let Some(limit) = calibration {
            r.assert("max_fitted_c<=calibration", self.max_fitted_c <= limit, self.max_fitted_c, limit);
        }
        r
    }
}

/// [`count_dependent`] for every `n`-bit `x`.
pub fn dependent_census_sweep(t: &ComplexityTable, alpha: i64) -> Result<CensusSweep> {
    let n = t.n();
    let lam = t.covers_lambda()?;
    let conds = t.condition_indices_of_length(n)?;
    let censuses: Vec<DependentCensus> = (0..1u64 << n)
        .into_par_iter()
        .map(|x| census_from(n, x, alpha, |y| t.value(lam, y), |y| t.value(conds[x as usize], y)))
        .collect();
    let max_fitted_c = censuses.iter().map(|c| c.fitted_c).fold(0.0, f64::max);
    let mut size_histogram = BTreeMap::new();
    for c in &censuses {
        *size_histogram.entry(c.size() as u64).or_insert(0) += 1;
    }
    Ok(CensusSweep {
        n,
        alpha,
        censuses,
        max_fitted_c,
        size_histogram,
    })
}

#[derive(Serialize)]
struct CensusRow {
    x_hex: String,
    alpha: i64,
    size: usize,
    fitted_c: f64,
}

/// CSV with columns `x_hex, alpha, size, fitted_c`.
pub fn write_census_csv<W: Write>(out: W, censuses: &[DependentCensus]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in censuses {
        w.serialize(CensusRow {
            x_hex: BitString::from_value(c.x, c.n).to_hex(),
            alpha: c.alpha,
            size: c.size(),
            fitted_c: c.fitted_c,
        })?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn save_census_csv(path: &Path, censuses: &[DependentCensus]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_census_csv(file, censuses)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HittingDemo {
    pub set: Vec<u16>,
    /// `max_{z ∈ A} C(z|λ)`.
    pub c_a: Complexity,
    /// `min` of `C(f(x,y)|λ)` over the class; absent for an empty class.
    pub c_e: Option<Complexity>,
    /// `c_E > c_A`, which forces `f(x, y) ∉ A` on the whole class.
    pub threshold_applies: bool,
    pub pairs: u64,
    /// Pairs with `f(x, y) ∈ A`, by direct scan.
    pub hits: u64,
}

impl HittingDemo {
    /// The scan never contradicts the threshold argument.
    pub fn consistent(&self) -> bool {
        !self.threshold_applies || self.hits == 0
    }

    pub fn to_report(&self, f: &TwoSourceTable) -> Report {
        let mut r = Report::new("hitting")
            .param("n", f.n())
            .param("m", f.m())
            .param("set", self.set.iter().map(|&z| BitString::from_value(z as u64, f.m()).to_string()).collect::<Vec<_>>());
        r.metric("c_A", self.c_a.to_string());
        r.metric("c_E", self.c_e.map(|c| c.to_string()));
        r.metric("threshold_applies", self.threshold_applies);
        r.metric("pairs", self.pairs);
        r.metric("hits", self.hits);
        r.assert("scan agrees with threshold", self.consistent(), self.hits, if self.threshold_applies { 0 } else { self.pairs });
        r
    }
}

/// Compares the threshold argument `c_E > c_A ⇒ no hits` with a direct scan.
/// `t_m` holds `m`-bit targets under λ.
pub fn hitting_demo(f: &TwoSourceTable, cls: &SourcePairClass, set: &[u16], t_m: &ComplexityTable) -> Result<HittingDemo> {
    if set.is_empty() {
        return Err(Error::InvalidParameter("the avoided set must be nonempty".into()));
    }
    if let Some(z) = set.iter().find(|&&z| z as usize >= f.num_colors()) {
        return Err(Error::InvalidParameter(format!("{z} is not an {}-bit value", f.m())));
    }
    if t_m.n() != f.m() {
        return Err(Error::Coverage(format!(
            "output oracle holds {}-bit targets, need {}",
            t_m.n(),
            f.m()
        )));
    }
    let lam = t_m.covers_lambda()?;
    let mut set: Vec<u16> = set.to_vec();
    set.sort_unstable();
    set.dedup();
    let c_a = set.iter().map(|&z| t_m.value(lam, z as u64)).max().expect("nonempty");
    let c_e = cls
        .pairs
        .iter()
        .map(|&(x, y)| t_m.value(lam, f.color(x, y) as u64))
        .min();
    let hits = cls
        .pairs
        .iter()
        .filter(|&&(x, y)| set.binary_search(&f.color(x, y)).is_ok())
        .count() as u64;
    Ok(HittingDemo {
        threshold_applies: c_e.is_some_and(|e| e > c_a),
        set,
        c_a,
        c_e,
        pairs: cls.pairs.len() as u64,
        hits,
    })
}
