//! Distributions over `{0,1}^n`: min-entropy, statistical distance, heavy
//! sets, top-K flattening and exact distance to the min-entropy ball.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::TwoSourceTable;

/// Largest `n` for which a dense mass vector is accepted.
pub const MAX_DIST_BITS: u32 = 24;

/// Probability mass over `{0,1}^n`, indexed by string value.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T = f64> {
    n: u32,
    mass: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    pub fn new(n: u32, mass: Vec<T>) -> Result<Self> {
        if n > MAX_DIST_BITS {
            return Err(Error::InvalidDistribution(format!("n = {n} is too large")));
        }
        if mass.len() != 1usize << n {
            return Err(Error::InvalidDistribution(format!(
                "expected {} masses, got {}",
                1usize << n,
                mass.len()
            )));
        }
        if let Some(bad) = mass.iter().find(|m| !m.is_finite() || **m < T::zero()) {
            return Err(Error::InvalidDistribution(format!("mass {bad} is negative or not finite")));
        }
        let total: T = mass.iter().copied().sum();
        if (total - T::one()).abs() > T::mass_tolerance() {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(Self { n, mass })
    }

    /// Normalizes nonnegative weights; rejects an all-zero vector.
    pub fn from_weights(n: u32, weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidDistribution("all-zero weights".into()));
        }
        Self::new(n, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: u32) -> Self {
        let size = 1usize << n;
        let p = T::one() / T::from_usize(size).expect("size fits");
        Self {
            n,
            mass: vec![p; size],
        }
    }

    pub fn point(n: u32, a: u64) -> Result<Self> {
        let mut mass = vec![T::zero(); 1usize << n];
        *mass
            .get_mut(a as usize)
            .ok_or_else(|| Error::InvalidParameter(format!("{a} is not an {n}-bit value")))? = T::one();
        Ok(Self { n, mass })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn mass_of(&self, a: u64) -> T {
        self.mass[a as usize]
    }

    fn max_mass(&self) -> T {
        self.mass.iter().copied().fold(T::zero(), T::max)
    }

    /// `-log2` of the largest mass; `n` for the uniform distribution.
    pub fn min_entropy(&self) -> T {
        -self.max_mass().log2()
    }

    /// `{a : mass(a) > t * 2^-k}`, ascending.
    pub fn heavy_set(&self, k: u32, t: T) -> Result<Vec<u64>> {
        if !(t > T::zero()) {
            return Err(Error::InvalidParameter("heavy-set threshold t must be positive".into()));
        }
        let threshold = t * T::exp2i(-(k as i32));
        Ok(self
            .mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > threshold)
            .map(|(a, _)| a as u64)
            .collect())
    }

    pub fn mass_of_set(&self, set: &[u64]) -> T {
        set.iter().map(|&a| self.mass[a as usize]).sum()
    }

    /// Replaces the `K` heaviest masses (ties broken by ascending value) with
    /// their average `2^-ℓ`; returns the new distribution and `ℓ`.
    pub fn flatten_top(&self, top: usize) -> Result<(Self, T)> {
        if top == 0 || top > self.mass.len() {
            return Err(Error::InvalidParameter(format!(
                "K = {top} must lie in 1..={}",
                self.mass.len()
            )));
        }
        let order = self.heaviest_first();
        let top_mass: T = order[..top].iter().map(|&a| self.mass[a]).sum();
        let avg = top_mass / T::from_usize(top).expect("K fits");
        let mut mass = self.mass.clone();
        for &a in &order[..top] {
            mass[a] = avg;
        }
        Ok((Self { n: self.n, mass }, -avg.log2()))
    }

    /// Indices sorted by descending mass, ties by ascending value.
    pub fn heaviest_first(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.mass.len()).collect();
        order.sort_by(|&a, &b| {
            self.mass[b]
                .partial_cmp(&self.mass[a])
                .expect("masses are finite")
                .then(a.cmp(&b))
        });
        order
    }

    /// Total mass of the `K` heaviest elements.
    pub fn top_mass(&self, top: usize) -> T {
        self.heaviest_first()
            .into_iter()
            .take(top)
            .map(|a| self.mass[a])
            .sum()
    }

    /// Exact statistical distance to the nearest distribution with min-entropy
    /// at least `k`: `Σ_a max(mass(a) − 2^-k, 0)`.
    pub fn dist_to_min_entropy(&self, k: u32) -> Result<T> {
        if k > self.n {
            return Err(Error::InvalidParameter(format!(
                "min-entropy target {k} exceeds n = {}",
                self.n
            )));
        }
        let cap = T::exp2i(-(k as i32));
        Ok(self
            .mass
            .iter()
            .map(|&m| if m > cap { m - cap } else { T::zero() })
            .sum())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DistributionFile {
            n: self.n,
            mass: self.mass.iter().map(|m| m.to_string()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: DistributionFile = serde_json::from_str(s)?;
        let mass = file
            .mass
            .iter()
            .map(|m| {
                m.parse::<T>()
                    .map_err(|_| Error::InvalidDistribution(format!("bad decimal mass {m:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.n, mass)
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionFile {
    n: u32,
    mass: Vec<String>,
}

fn check_dims<T>(x: &Distribution<T>, y: &Distribution<T>) -> Result<()> {
    if x.n != y.n {
        return Err(Error::Dimension(format!("n = {} vs n = {}", x.n, y.n)));
    }
    Ok(())
}

/// Half the L1 distance.
pub fn statistical_distance<T: Scalar>(x: &Distribution<T>, y: &Distribution<T>) -> Result<T> {
    check_dims(x, y)?;
    let l1: T = x.mass.iter().zip(&y.mass).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(l1 / T::lit(2.0))
}

/// `Σ_{a : x(a) ≥ y(a)} x(a) − y(a)`, equal to [`statistical_distance`].
pub fn positive_part_distance<T: Scalar>(x: &Distribution<T>, y: &Distribution<T>) -> Result<T> {
    check_dims(x, y)?;
    Ok(x.mass
        .iter()
        .zip(&y.mass)
        .filter(|(a, b)| a >= b)
        .map(|(&a, &b)| a - b)
        .sum())
}

/// A flat source: uniform over a nonempty support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatSource {
    n: u32,
    support: Vec<u64>,
}

impl FlatSource {
    pub fn new(n: u32, support: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut support: Vec<u64> = support.into_iter().collect();
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::InvalidParameter("flat source needs a nonempty support".into()));
        }
        if n > 63 || support.iter().any(|&v| v >> n != 0) {
            return Err(Error::InvalidParameter(format!("support value outside {{0,1}}^{n}")));
        }
        Ok(Self { n, support })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn to_distribution<T: Scalar>(&self) -> Result<Distribution<T>> {
        let mut w = vec![T::zero(); 1usize << self.n];
        for &a in &self.support {
            w[a as usize] = T::one();
        }
        Distribution::from_weights(self.n, w)
    }

    /// `log2 |support|`.
    pub fn min_entropy<T: Scalar>(&self) -> T {
        T::from_usize(self.support.len()).expect("fits").log2()
    }
}

/// Distribution of `f(X, Y)` for independent flat `X`, `Y`.
pub fn push_forward<T: Scalar>(
    f: &TwoSourceTable,
    x: &FlatSource,
    y: &FlatSource,
) -> Result<Distribution<T>> {
    if x.n != f.n() || y.n != f.n() {
        return Err(Error::Dimension(format!(
            "sources over {} and {} bits, table over {}",
            x.n,
            y.n,
            f.n()
        )));
    }
    let mut counts = vec![0u64; 1usize << f.m()];
    for &u in &x.support {
        for &v in &y.support {
            counts[f.color(u, v) as usize] += 1;
        }
    }
    let cells = T::from_usize(x.support.len() * y.support.len()).expect("fits");
    let mass = counts
        .into_iter()
        .map(|c| T::from_u64(c).expect("fits") / cells)
        .collect();
    Distribution::new(f.m(), mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::TwoSourceTable;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn d(n: u32, m: &[f64]) -> Distribution {
        Distribution::new(n, m.to_vec()).unwrap()
    }

    fn random_dist(rng: &mut ChaCha8Rng, n: u32) -> Distribution {
        // mix of sparse and dense shapes so heavy sets are non-trivial
        let sparsity: f64 = rng.random();
        let w: Vec<f64> = (0..1usize << n)
            .map(|_| {
                if rng.random::<f64>() < sparsity * 0.8 {
                    0.0
                } else {
                    rng.random::<f64>().powi(3)
                }
            })
            .collect();
        Distribution::from_weights(n, w).unwrap_or_else(|_| Distribution::point(n, 0).unwrap())
    }

    #[test]
    fn min_entropy_examples() {
        assert_eq!(Distribution::<f64>::uniform(2).min_entropy(), 2.0);
        assert_eq!(Distribution::<f64>::point(3, 5).unwrap().min_entropy(), 0.0);
        assert_eq!(d(2, &[0.5, 0.25, 0.125, 0.125]).min_entropy(), 1.0);
        assert_eq!(Distribution::<f32>::uniform(3).min_entropy(), 3.0f32);
    }

    #[test]
    fn distance_examples() {
        let u1 = Distribution::<f64>::uniform(1);
        let p0 = Distribution::point(1, 0).unwrap();
        assert_eq!(statistical_distance(&u1, &u1).unwrap(), 0.0);
        assert_eq!(statistical_distance(&p0, &u1).unwrap(), 0.5);
        let p1 = Distribution::point(1, 1).unwrap();
        assert_eq!(statistical_distance(&p0, &p1).unwrap(), 1.0);
        assert!(matches!(
            statistical_distance(&u1, &Distribution::uniform(2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn heavy_set_examples() {
        let u2 = Distribution::<f64>::uniform(2);
        assert!(u2.heavy_set(2, 2.0).unwrap().is_empty());
        let p = Distribution::<f64>::point(2, 0).unwrap();
        assert_eq!(p.heavy_set(2, 2.0).unwrap(), vec![0]);
        assert!(p.heavy_set(2, 4.0).unwrap().is_empty());
        assert!(p.heavy_set(2, 0.0).is_err());
    }

    #[test]
    fn flatten_top_fixed_points() {
        let flat = d(2, &[0.5, 0.0, 0.5, 0.0]);
        let (out, ell) = flat.flatten_top(2).unwrap();
        assert_eq!(out, flat);
        assert_eq!(ell, 1.0);
        let p = Distribution::<f64>::point(2, 3).unwrap();
        assert_eq!(p.flatten_top(1).unwrap().0, p);
        assert!(p.flatten_top(0).is_err());
        assert!(p.flatten_top(5).is_err());
    }

    #[test]
    fn flatten_top_breaks_ties_by_value() {
        let x = d(2, &[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(x.heaviest_first(), vec![0, 1, 2, 3]);
        let y = d(2, &[0.1, 0.3, 0.3, 0.3]);
        let (out, _) = y.flatten_top(2).unwrap();
        assert_eq!(out.mass(), &[0.1, 0.3, 0.3, 0.3]);
    }

    #[test]
    fn dist_to_min_entropy_examples() {
        let p = Distribution::<f64>::point(1, 0).unwrap();
        assert_eq!(p.dist_to_min_entropy(1).unwrap(), 0.5);
        assert_eq!(d(2, &[0.5, 0.25, 0.25, 0.0]).dist_to_min_entropy(2).unwrap(), 0.25);
        assert_eq!(Distribution::<f64>::uniform(3).dist_to_min_entropy(3).unwrap(), 0.0);
        assert!(p.dist_to_min_entropy(2).is_err());
    }

    /// Brute force over every distribution on the 1/64 grid with min-entropy ≥ k.
    fn grid_distance(x: &Distribution, k: u32) -> f64 {
        const RES: u32 = 64;
        let size = x.mass().len();
        let cap = RES >> k;
        let mut best = f64::INFINITY;
        let mut parts = vec![0u32; size];
        fn rec(i: usize, left: u32, cap: u32, parts: &mut Vec<u32>, x: &Distribution, best: &mut f64) {
            if i + 1 == parts.len() {
                if left > cap {
                    return;
                }
                parts[i] = left;
                let dist: f64 = parts
                    .iter()
                    .zip(x.mass())
                    .map(|(&p, &m)| (p as f64 / 64.0 - m).abs())
                    .sum::<f64>()
                    / 2.0;
                *best = best.min(dist);
                return;
            }
            for p in 0..=left.min(cap) {
                parts[i] = p;
                rec(i + 1, left - p, cap, parts, x, best);
            }
        }
        rec(0, RES, cap, &mut parts, x, &mut best);
        best
    }

    #[test]
    fn clip_formula_matches_grid_search() {
        let cases = [
            (Distribution::<f64>::point(1, 0).unwrap(), 1),
            (d(2, &[0.5, 0.25, 0.25, 0.0]), 2),
            (d(2, &[0.625, 0.1875, 0.125, 0.0625]), 1),
            (d(2, &[0.875, 0.0625, 0.0625, 0.0]), 2),
        ];
        for (x, k) in cases {
            let exact = x.dist_to_min_entropy(k).unwrap();
            assert!(close(exact, grid_distance(&x, k), 1e-12), "{x:?} k={k}");
        }
    }

    #[test]
    fn push_forward_examples() {
        let c = TwoSourceTable::constant(2, 1, 1).unwrap();
        let all = FlatSource::new(2, 0..4).unwrap();
        let out: Distribution = push_forward(&c, &all, &all).unwrap();
        assert_eq!(out.mass(), &[0.0, 1.0]);

        let ip = TwoSourceTable::inner_product(2).unwrap();
        let s = FlatSource::new(2, [0b01, 0b10]).unwrap();
        let out: Distribution = push_forward(&ip, &s, &s).unwrap();
        assert_eq!(out.mass(), &[0.5, 0.5]);

        let out: Distribution = push_forward(&ip, &all, &all).unwrap();
        assert_eq!(out.mass(), &[10.0 / 16.0, 6.0 / 16.0]);

        let s3 = FlatSource::new(3, [1]).unwrap();
        assert!(push_forward::<f64>(&ip, &s3, &s).is_err());
    }

    #[test]
    fn json_round_trip() {
        let x = d(2, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(Distribution::from_json(&x.to_json().unwrap()).unwrap(), x);
        assert!(Distribution::<f64>::from_json(r#"{"n":1,"mass":["0.5","0.6"]}"#).is_err());
    }

    #[test]
    fn invariants_rejected() {
        assert!(Distribution::new(1, vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(1, vec![0.5]).is_err());
        assert!(Distribution::<f64>::from_weights(1, vec![0.0, 0.0]).is_err());
        assert!(FlatSource::new(2, []).is_err());
        assert!(FlatSource::new(2, [4]).is_err());
    }

    #[test]
    fn randomized_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let n = rng.random_range(1..=6);
            let x = random_dist(&mut rng, n);
            let y = random_dist(&mut rng, n);
            let z = random_dist(&mut rng, n);
            let dxy = statistical_distance(&x, &y).unwrap();
            // metric axioms
            assert!(close(statistical_distance(&x, &x).unwrap(), 0.0, 1e-12));
            assert!(close(dxy, statistical_distance(&y, &x).unwrap(), 1e-12));
            assert!(
                dxy <= statistical_distance(&x, &z).unwrap() + statistical_distance(&z, &y).unwrap() + 1e-9
            );
            // half-L1 equals the positive part
            assert!(close(dxy, positive_part_distance(&x, &y).unwrap(), 1e-12));
            // zero distance iff min-entropy already high enough
            let k = rng.random_range(0..=n);
            let dist = x.dist_to_min_entropy(k).unwrap();
            assert_eq!(dist <= 1e-12, x.min_entropy() >= k as f64 - 1e-12);
        }
    }

    proptest! {
        #[test]
        fn clip_is_attained(w in proptest::collection::vec(0.0f64..1.0, 8), k in 0u32..=3) {
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            let x = Distribution::from_weights(3, w).unwrap();
            let eps = x.dist_to_min_entropy(k).unwrap();
            // explicit witness: clip heavy elements, pour the excess into light ones
            let cap = 2f64.powi(-(k as i32));
            let mut target: Vec<f64> = x.mass().iter().map(|&m| m.min(cap)).collect();
            let mut excess = eps;
            for t in target.iter_mut() {
                let room = (cap - *t).min(excess);
                *t += room;
                excess -= room;
            }
            let target = Distribution::new(3, target).unwrap();
            prop_assert!(target.min_entropy() >= k as f64 - 1e-9);
            prop_assert!((statistical_distance(&x, &target).unwrap() - eps).abs() <= 1e-9);
        }
    }
}
