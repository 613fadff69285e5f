//! Constants measured once on RM-1 and committed. The regression tests below
//! re-measure them.

/// Largest `|C(x‖y|λ) − (C(x|λ) + C(y|x))|` over all pairs at `n = 4`
/// (`L_max = 10` for `n`-bit targets, 16 for the `2n`-bit pairs). Stands in
/// for the machine-dependent `O(1)`/`O(log n)` slack of the theorems.
pub const C_M: u32 = 6;

/// Largest fitted `c = |B_{x,α}| / 2^{n−α}` over every `x` and `α ∈ 0..=8` at
/// `n = 4`, `L_max = 10`.
pub const DEP_CENSUS_MAX_C: f64 = 1.0;

/// `Δ` in the equivalence report: the class is `S_{k+Δ, α}`.
pub const EQUIVALENCE_MARGIN: u32 = 1;

/// Slack `ε` used by `table verify` when none is given. Matches the
/// `√(N / |B1||B2|) / 2` discrepancy bound of inner product at `n = 4`, `k = 3`.
pub const DEFAULT_BALANCE_EPS: f64 = 0.25;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::dependent_census_sweep;
    use crate::oracle::{all_conditions_with_lambda, symmetry_report, TableBuilder};

    #[test]
    fn committed_constants_match_measurement() {
        let t4 = TableBuilder::new(4)
            .conditions(all_conditions_with_lambda(4))
            .l_max(10)
            .build()
            .unwrap();
        let pairs = TableBuilder::new(8).l_max(16).build().unwrap();
        let sym = symmetry_report(&t4, &pairs).unwrap();
        assert_eq!(sym.indeterminate, 0);
        assert_eq!(sym.max_deviation, Some(C_M));

        let worst = (0..=8)
            .map(|a| dependent_census_sweep(&t4, a).unwrap().max_fitted_c)
            .fold(0.0, f64::max);
        assert_eq!(worst, DEP_CENSUS_MAX_C);
    }
}
