//! The tower of first integrals `H_s`, built from the combinatorial closed form
//!
//! ```text
//! H_s = sum_{I} (1/I!) p_I sum_{rho} c_rho exp( sum_{j=1..s} (q_{i_j} - q_{i_rho(j)}) )
//! ```
//!
//! where `I = (i_0 <= i_1 <= ... <= i_s)` runs over non-decreasing multi-indices,
//! `rho` over maps `{1..s} -> {0..s-1}` with `rho(j) < j`, and `I!` is the product
//! of the factorials of the run lengths of `I`. In the ordered region every
//! exponent is non-positive.
//!
//! `c_rho` is generated by the extension recursion: starting from `c = 1` for
//! the empty map, appending `rho(s+1) = j` multiplies `c` by
//!
//! * `1` if `j = 0` is not yet hit, `0` if it is,
//! * `2`, `1` or `0` for `j >= 1` hit zero, one or two times already.
//!
//! The resulting coefficients sum to `s!`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{energy, momentum, PeakonState};

/// Default cap on `C(n+s, s+1) * s!`.
pub const DEFAULT_BUDGET: u128 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<usize>,
    factorial_weight: u64,
}

impl MultiIndex {
    fn from_entries(entries: Vec<usize>) -> Self {
        let mut weight = 1u64;
        let mut run = 0u64;
        for (i, e) in entries.iter().enumerate() {
            if i > 0 && entries[i - 1] == *e {
                run += 1;
            } else {
                run = 1;
            }
            weight *= run;
        }
        Self { entries, factorial_weight: weight }
    }

    /// Zero-based peakon indices, non-decreasing.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// `I!`, the product of the factorials of the multiplicities.
    pub fn factorial_weight(&self) -> u64 {
        self.factorial_weight
    }

    /// Number of distinct orderings of the entries, `(s+1)! / I!`.
    pub fn permutation_count(&self) -> u64 {
        factorial(self.entries.len() as u64) / self.factorial_weight
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RhoMap {
    values: Vec<usize>,
    coefficient: u64,
}

impl RhoMap {
    /// `values[j-1] = rho(j)` for `j = 1..=s`.
    pub fn new(values: Vec<usize>) -> Result<Self> {
        for (idx, &v) in values.iter().enumerate() {
            if v > idx {
                return Err(Error::Domain(format!("rho({}) = {v} is not < {}", idx + 1, idx + 1)));
            }
        }
        let coefficient = c_rho(&values);
        Ok(Self { values, coefficient })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn coefficient(&self) -> u64 {
        self.coefficient
    }

    pub fn order(&self) -> usize {
        self.values.len()
    }
}

fn factorial(k: u64) -> u64 {
    (1..=k).product()
}

fn factorial_u128(k: u128) -> u128 {
    (1..=k).fold(1u128, |acc, x| acc.saturating_mul(x))
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Extension factor when appending value `j` to a map whose preimage of `j` has `count` elements.
fn extension_factor(j: usize, count: usize) -> u64 {
    match (j, count) {
        (0, 0) => 1,
        (0, _) => 0,
        (_, 0) => 2,
        (_, 1) => 1,
        _ => 0,
    }
}

/// `c_rho` computed by the extension recursion.
pub fn c_rho(values: &[usize]) -> u64 {
    let mut counts = vec![0usize; values.len() + 1];
    let mut c = 1u64;
    for &v in values {
        c *= extension_factor(v, counts[v]);
        if c == 0 {
            return 0;
        }
        counts[v] += 1;
    }
    c
}

/// Terms touched by a full enumeration: `C(n+s, s+1) * s!`.
pub fn enumeration_cost(n: usize, s: usize) -> u128 {
    binomial((n + s) as u128, (s + 1) as u128).saturating_mul(factorial_u128(s as u128))
}

fn check_budget(n: usize, s: usize, budget: u128) -> Result<()> {
    let terms = enumeration_cost(n, s);
    if terms > budget {
        return Err(Error::Budget { terms, budget });
    }
    Ok(())
}

pub fn enumerate_multi_indices(n: usize, s: usize) -> Result<Vec<MultiIndex>> {
    enumerate_multi_indices_with_budget(n, s, DEFAULT_BUDGET)
}

/// All non-decreasing `(s+1)`-tuples over `0..n`, in lexicographic order.
pub fn enumerate_multi_indices_with_budget(n: usize, s: usize, budget: u128) -> Result<Vec<MultiIndex>> {
    if n == 0 {
        return Err(Error::Empty);
    }
    check_budget(n, s, budget)?;
    let len = s + 1;
    let mut out = Vec::with_capacity(binomial((n + s) as u128, len as u128) as usize);
    let mut cur = vec![0usize; len];
    loop {
        out.push(MultiIndex::from_entries(cur.clone()));
        // advance to the next non-decreasing tuple
        let mut pos = len;
        while pos > 0 && cur[pos - 1] == n - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        let v = cur[pos - 1] + 1;
        for slot in cur.iter_mut().skip(pos - 1) {
            *slot = v;
        }
    }
    Ok(out)
}

pub fn enumerate_rho(s: usize) -> Result<Vec<RhoMap>> {
    enumerate_rho_with_budget(s, DEFAULT_BUDGET)
}

/// All `s!` maps with `rho(j) < j`, each with its coefficient.
pub fn enumerate_rho_with_budget(s: usize, budget: u128) -> Result<Vec<RhoMap>> {
    let terms = factorial_u128(s as u128);
    if terms > budget {
        return Err(Error::Budget { terms, budget });
    }
    let mut out = Vec::with_capacity(terms as usize);
    let mut values = Vec::with_capacity(s);
    let mut counts = vec![0usize; s + 1];
    extend_rho(s, &mut values, &mut counts, 1, &mut out);
    Ok(out)
}

fn extend_rho(s: usize, values: &mut Vec<usize>, counts: &mut [usize], c: u64, out: &mut Vec<RhoMap>) {
    let j = values.len() + 1;
    if j > s {
        out.push(RhoMap { values: values.clone(), coefficient: c });
        return;
    }
    for v in 0..j {
        let next = c * extension_factor(v, counts[v]);
        values.push(v);
        counts[v] += 1;
        extend_rho(s, values, counts, next, out);
        counts[v] -= 1;
        values.pop();
    }
}

/// `true` iff the coefficients of all maps in `P_s` sum to exactly `s!`.
pub fn check_c_sum(s: usize) -> Result<bool> {
    let maps = enumerate_rho(s)?;
    let total: u128 = maps.iter().map(|r| r.coefficient as u128).sum();
    Ok(total == factorial_u128(s as u128))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Normalization of the closed form (`H_1 = 1/2 p^T h p`).
    #[default]
    Theorem,
    /// `(s+1)` times the theorem value (`H_1 = p^T h p`).
    Rescaled,
}

impl Convention {
    pub fn factor(self, s: usize) -> f64 {
        match self {
            Convention::Theorem => 1.0,
            Convention::Rescaled => (s + 1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralValue {
    pub s: usize,
    pub value: f64,
    pub convention: Convention,
}

impl IntegralValue {
    pub fn in_convention(self, convention: Convention) -> Self {
        let theorem = self.value / self.convention.factor(self.s);
        Self { s: self.s, value: theorem * convention.factor(self.s), convention }
    }
}

/// Exponent of one group of rho maps: `sum_m coef[m] * q_{i_m}`, weighted by
/// the summed coefficient of every map sharing the pattern.
#[derive(Debug, Clone, PartialEq)]
struct ExponentPattern {
    coef: Vec<i32>,
    weight: f64,
}

/// Precomputed combinatorics for one `(n, s)`: the multi-indices and the
/// nonzero rho maps grouped by exponent pattern.
#[derive(Debug, Clone)]
pub struct IntegralTable {
    n: usize,
    s: usize,
    indices: Vec<MultiIndex>,
    patterns: Vec<ExponentPattern>,
}

impl IntegralTable {
    pub fn new(n: usize, s: usize) -> Result<Self> {
        Self::with_budget(n, s, DEFAULT_BUDGET)
    }

    pub fn with_budget(n: usize, s: usize, budget: u128) -> Result<Self> {
        let indices = enumerate_multi_indices_with_budget(n, s, budget)?;
        let maps = enumerate_rho_with_budget(s, budget)?;
        let mut patterns: Vec<ExponentPattern> = Vec::new();
        for rho in maps.iter().filter(|r| r.coefficient > 0) {
            let mut coef = vec![0i32; s + 1];
            for (idx, &target) in rho.values.iter().enumerate() {
                coef[idx + 1] += 1;
                coef[target] -= 1;
            }
            match patterns.iter_mut().find(|p| p.coef == coef) {
                Some(p) => p.weight += rho.coefficient as f64,
                None => patterns.push(ExponentPattern { coef, weight: rho.coefficient as f64 }),
            }
        }
        Ok(Self { n, s, indices, patterns })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.s
    }

    pub fn multi_indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    fn check_dim(&self, state: &PeakonState) -> Result<()> {
        if state.n() != self.n {
            return Err(Error::Dimension { expected: self.n, got: state.n() });
        }
        Ok(())
    }

    /// `sum_rho c_rho exp(...)` for one multi-index.
    fn exponential_factor(&self, q: &[f64], entries: &[usize]) -> f64 {
        self.patterns
            .iter()
            .map(|pat| {
                let e: f64 =
                    pat.coef.iter().zip(entries).filter(|(c, _)| **c != 0).map(|(&c, &i)| c as f64 * q[i]).sum();
                pat.weight * e.exp()
            })
            .sum()
    }

    /// `H_s` in the theorem convention, straight from the closed form.
    pub fn eval(&self, state: &PeakonState) -> Result<f64> {
        self.check_dim(state)?;
        let (q, p) = (state.q(), state.p());
        let mut total = 0.0;
        for idx in &self.indices {
            let p_i: f64 = idx.entries.iter().map(|&i| p[i]).product();
            if p_i == 0.0 {
                continue;
            }
            total += p_i / idx.factorial_weight as f64 * self.exponential_factor(q, &idx.entries);
        }
        Ok(total)
    }

    /// `dH_s` as `(dH/dq_1..dq_n, dH/dp_1..dp_n)`.
    pub fn grad(&self, state: &PeakonState) -> Result<Vec<f64>> {
        self.check_dim(state)?;
        let n = self.n;
        let (q, p) = (state.q(), state.p());
        let mut g = vec![0.0; 2 * n];
        for idx in &self.indices {
            let w = 1.0 / idx.factorial_weight as f64;
            let entries = &idx.entries;
            let p_i: f64 = entries.iter().map(|&i| p[i]).product();

            // momentum derivatives: d p_I / d p_a = mult_a * prod without one copy of p_a
            let mut exp_factor = None;
            let mut last = usize::MAX;
            for (pos, &a) in entries.iter().enumerate() {
                if a == last {
                    continue;
                }
                last = a;
                let mult = entries.iter().filter(|&&e| e == a).count() as f64;
                let partial: f64 = entries.iter().enumerate().filter(|&(m, _)| m != pos).map(|(_, &i)| p[i]).product();
                if partial == 0.0 {
                    continue;
                }
                let f = *exp_factor.get_or_insert_with(|| self.exponential_factor(q, entries));
                g[n + a] += w * mult * partial * f;
            }

            if p_i == 0.0 {
                continue;
            }
            for pat in &self.patterns {
                let e: f64 =
                    pat.coef.iter().zip(entries).filter(|(c, _)| **c != 0).map(|(&c, &i)| c as f64 * q[i]).sum();
                let term = w * p_i * pat.weight * e.exp();
                // fold coefficients per peakon first so repeated indices cancel exactly
                let mut net: Vec<(usize, i32)> = Vec::with_capacity(entries.len());
                for (&c, &i) in pat.coef.iter().zip(entries) {
                    match net.iter_mut().find(|(j, _)| *j == i) {
                        Some(slot) => slot.1 += c,
                        None => net.push((i, c)),
                    }
                }
                for (i, c) in net {
                    if c != 0 {
                        g[i] += c as f64 * term;
                    }
                }
            }
        }
        Ok(g)
    }
}

/// `H_s` at a state. Orders 0 and 1 are returned as [`momentum`] and [`energy`].
pub fn eval_h(s: usize, state: &PeakonState, convention: Convention) -> Result<IntegralValue> {
    let theorem = match s {
        0 => momentum(state),
        1 => energy(state),
        _ => IntegralTable::new(state.n(), s)?.eval(state)?,
    };
    Ok(IntegralValue { s, value: theorem * convention.factor(s), convention })
}

/// Analytic differential of `H_s` (theorem convention).
pub fn grad_h(s: usize, state: &PeakonState) -> Result<Vec<f64>> {
    IntegralTable::new(state.n(), s)?.grad(state)
}

/// Tables for `H_0..=H_{s_max}` at a fixed `n`, reused across many states.
#[derive(Debug, Clone)]
pub struct IntegralTower {
    tables: Vec<IntegralTable>,
}

impl IntegralTower {
    pub fn new(n: usize, s_max: usize) -> Result<Self> {
        let tables = (0..=s_max).map(|s| IntegralTable::new(n, s)).collect::<Result<_>>()?;
        Ok(Self { tables })
    }

    pub fn s_max(&self) -> usize {
        self.tables.len() - 1
    }

    pub fn table(&self, s: usize) -> &IntegralTable {
        &self.tables[s]
    }

    /// `[H_0, ..., H_{s_max}]` in the given convention.
    pub fn values(&self, state: &PeakonState, convention: Convention) -> Result<Vec<f64>> {
        self.tables
            .iter()
            .enumerate()
            .map(|(s, t)| {
                let v = match s {
                    0 => momentum(state),
                    1 => energy(state),
                    _ => t.eval(state)?,
                };
                Ok(v * convention.factor(s))
            })
            .collect()
    }

    pub fn grads(&self, state: &PeakonState) -> Result<Vec<Vec<f64>>> {
        self.tables.iter().map(|t| t.grad(state)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(q: &[f64], p: &[f64]) -> PeakonState {
        PeakonState::new(q.to_vec(), p.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn multi_indices_n2_s1() {
        let got: Vec<(Vec<usize>, u64)> = enumerate_multi_indices(2, 1)
            .unwrap()
            .into_iter()
            .map(|m| (m.entries.clone(), m.factorial_weight))
            .collect();
        assert_eq!(got, vec![(vec![0, 0], 2), (vec![0, 1], 1), (vec![1, 1], 2)]);
    }

    #[test]
    fn multi_indices_n1_s3() {
        let got = enumerate_multi_indices(1, 3).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].entries(), &[0, 0, 0, 0]);
        assert_eq!(got[0].factorial_weight(), 24);
    }

    #[test]
    fn multi_index_count_matches_brute_force() {
        for n in 1usize..=4 {
            for s in 0..=4 {
                // brute force: all (s+1)-tuples, keep the sorted ones
                let len = s + 1;
                let mut count = 0;
                let total = n.pow(len as u32);
                for code in 0..total {
                    let mut c = code;
                    let mut t = Vec::with_capacity(len);
                    for _ in 0..len {
                        t.push(c % n);
                        c /= n;
                    }
                    if t.windows(2).all(|w| w[0] <= w[1]) {
                        count += 1;
                    }
                }
                assert_eq!(enumerate_multi_indices(n, s).unwrap().len(), count, "n={n} s={s}");
            }
        }
        assert_eq!(enumerate_multi_indices(3, 2).unwrap().len(), 10);
    }

    #[test]
    fn permutation_counts_sum_to_all_tuples() {
        let total: u64 = enumerate_multi_indices(3, 3).unwrap().iter().map(|m| m.permutation_count()).sum();
        assert_eq!(total, 3u64.pow(4));
    }

    #[test]
    fn rho_small_orders() {
        let r1 = enumerate_rho(1).unwrap();
        assert_eq!(r1.len(), 1);
        assert_eq!((r1[0].values(), r1[0].coefficient()), (&[0usize][..], 1));

        let r2: Vec<_> = enumerate_rho(2).unwrap().into_iter().map(|r| (r.values, r.coefficient)).collect();
        assert_eq!(r2, vec![(vec![0, 0], 0), (vec![0, 1], 2)]);

        let nonzero: Vec<_> = enumerate_rho(3)
            .unwrap()
            .into_iter()
            .filter(|r| r.coefficient > 0)
            .map(|r| (r.values, r.coefficient))
            .collect();
        assert_eq!(nonzero, vec![(vec![0, 1, 1], 2), (vec![0, 1, 2], 4)]);
    }

    #[test]
    fn c_rho_examples() {
        assert_eq!(c_rho(&[0, 1, 2]), 4);
        assert_eq!(c_rho(&[0, 1, 1]), 2);
        assert_eq!(c_rho(&[0, 0]), 0);
        assert_eq!(c_rho(&[]), 1);
        assert!(RhoMap::new(vec![1]).is_err());
    }

    #[test]
    fn c_rho_closed_form_when_admissible() {
        for s in 1..=6 {
            for r in enumerate_rho(s).unwrap() {
                let mut counts = vec![0usize; s + 1];
                for &v in r.values() {
                    counts[v] += 1;
                }
                let admissible = counts[0] <= 1 && counts[1..].iter().all(|&c| c <= 2);
                let distinct_nonzero = counts[1..].iter().filter(|&&c| c > 0).count();
                let expected = if admissible { 1u64 << distinct_nonzero } else { 0 };
                assert_eq!(r.coefficient(), expected, "{:?}", r.values());
            }
        }
    }

    #[test]
    fn c_sum_identity() {
        for s in 1..=7 {
            assert!(check_c_sum(s).unwrap(), "s={s}");
        }
        assert_eq!(enumerate_rho(4).unwrap().iter().map(|r| r.coefficient()).sum::<u64>(), 24);
    }

    #[test]
    fn budget_guard() {
        assert!(matches!(IntegralTable::with_budget(8, 7, 1000), Err(Error::Budget { .. })));
        assert!(matches!(enumerate_rho(13), Err(Error::Budget { .. })));
    }

    #[test]
    fn single_peakon_tower() {
        let s0 = st(&[0.4], &[1.7]);
        for s in 0..6 {
            let v = eval_h(s, &s0, Convention::Theorem).unwrap().value;
            let expected = 1.7f64.powi(s as i32 + 1) / (s as f64 + 1.0);
            assert!((v - expected).abs() < 1e-13 * expected.abs(), "s={s}");
            let g = grad_h(s, &s0).unwrap();
            assert_eq!(g[0], 0.0);
            assert!((g[1] - 1.7f64.powi(s as i32)).abs() < 1e-13);
        }
    }

    #[test]
    fn three_peakon_h2_example() {
        let s = st(&[1.0, 0.0, -1.0], &[1.0, 1.0, 1.0]);
        let v = eval_h(2, &s, Convention::Theorem).unwrap().value;
        let e = std::f64::consts::E;
        let expected = 1.0 + 4.0 / e + 4.0 / (e * e);
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn low_orders_match_momentum_and_energy() {
        let s = st(&[1.3, 0.2, -0.4, -2.0], &[0.5, -1.0, 2.0, 0.25]);
        let t0 = IntegralTable::new(4, 0).unwrap().eval(&s).unwrap();
        let t1 = IntegralTable::new(4, 1).unwrap().eval(&s).unwrap();
        assert!((t0 - momentum(&s)).abs() < 1e-14);
        assert!((t1 - energy(&s)).abs() < 1e-14);
        assert_eq!(eval_h(0, &s, Convention::Theorem).unwrap().value, momentum(&s));
        assert_eq!(eval_h(1, &s, Convention::Theorem).unwrap().value, energy(&s));
    }

    #[test]
    fn rescaled_convention_ratio() {
        let s = st(&[0.7, -0.1, -1.0], &[1.0, 0.3, -0.6]);
        for k in 0..4 {
            let a = eval_h(k, &s, Convention::Theorem).unwrap();
            let b = eval_h(k, &s, Convention::Rescaled).unwrap();
            assert!((b.value - (k as f64 + 1.0) * a.value).abs() < 1e-14);
            assert_eq!(a.in_convention(Convention::Rescaled).value, b.value);
        }
    }

    #[test]
    fn grad_sums_to_zero_over_positions() {
        let s = st(&[1.0, 0.1, -0.5], &[0.8, -1.2, 0.4]);
        for k in 0..4 {
            let g = grad_h(k, &s).unwrap();
            let sum: f64 = g[..3].iter().sum();
            assert!(sum.abs() < 1e-13, "s={k}: {sum}");
        }
    }

    #[test]
    fn grad_matches_central_differences() {
        let s = st(&[1.1, 0.3, -0.2, -1.4], &[0.9, -0.7, 1.3, 0.5]);
        let n = 4;
        let h = 1e-6;
        for k in 0..=3 {
            let table = IntegralTable::new(n, k).unwrap();
            let g = table.grad(&s).unwrap();
            let z = s.phase_point();
            for a in 0..2 * n {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[a] += h;
                zm[a] -= h;
                let fp = table.eval(&PeakonState::from_phase_point(&zp, 0.0).unwrap()).unwrap();
                let fm = table.eval(&PeakonState::from_phase_point(&zm, 0.0).unwrap()).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let scale = g.iter().fold(1e-300_f64, |m, x| m.max(x.abs()));
                assert!((fd - g[a]).abs() < 1e-6 * scale, "s={k} a={a}: {fd} vs {}", g[a]);
            }
        }
    }

    #[test]
    fn table_rejects_wrong_dimension() {
        let t = IntegralTable::new(3, 2).unwrap();
        let s = st(&[1.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(t.eval(&s), Err(Error::Dimension { .. })));
    }
}
