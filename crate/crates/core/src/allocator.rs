//! ADC bit allocation under a receiver power budget.
//!
//! Each RF path `i` runs an ADC pair with `b_i` bits drawing `c f_s 2^{b_i}`
//! watts. The feasible set holds every `b` with `1 <= b_i <= 4` and
//! `sum_i c f_s 2^{b_i} <= P_ADC`. Three selectors are provided:
//!
//! - [`exhaustive_search_capacity`]: maximize capacity over the whole set;
//! - [`exhaustive_search_kf`]: maximize the separable surrogate `K_f(b)`;
//! - [`greedy_allocate`]: start from all-ones and repeatedly buy the bit with
//!   the best `K_f` gain per watt.
//!
//! Searches tally objective-evaluation arithmetic in an [`OpCounter`] using
//! the fixed per-evaluation cost model below, independent of any caching.
//! Enumeration bookkeeping is not counted.

use std::ops::AddAssign;

use crate::metrics::{self, CapacityReport};
use crate::quantizer::{BitAllocation, QuantGainTable, Quantization};
use crate::receiver::{CombinerMode, EffectiveModel, PowerConvention, ReceiverFrontEnd, SignalConfig};
use crate::{Error, Result};

/// Highest bit width considered by the allocators.
pub const MAX_ALLOC_BITS: u8 = 4;

/// Default refusal threshold for the feasible set, `4^12`.
pub const DEFAULT_BSET_CAP: usize = 1 << 24;

/// Relative slack when comparing a power total to the budget, so that an
/// allocation whose power equals the budget is not lost to rounding.
const BUDGET_SLACK: f64 = 1e-12;

/// Relative margin an objective must exceed the incumbent by to replace it.
/// Keeps tie-breaking stable when equal sums differ in the last ulp.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    /// Energy per conversion step (J/step).
    pub c: f64,
    /// Sampling rate (Hz).
    pub f_s: f64,
    /// Total ADC power budget (W).
    pub p_adc: f64,
}

impl PowerBudget {
    pub fn new(c: f64, f_s: f64, p_adc: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("f_s", f_s), ("p_adc", p_adc)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { c, f_s, p_adc })
    }

    /// Budget equal to the power of the uniform `bits`-bit allocation.
    pub fn uniform(n_s: usize, bits: u8, c: f64, f_s: f64) -> Result<Self> {
        if !(1..=MAX_ALLOC_BITS).contains(&bits) {
            return Err(Error::BitWidthOutOfRange(bits));
        }
        Self::new(c, f_s, n_s as f64 * c * f_s * f64::from(1u32 << bits))
    }

    /// `c f_s 2^b`.
    pub fn path_power(&self, bits: u8) -> f64 {
        self.c * self.f_s * f64::from(1u32 << bits)
    }

    /// `P_TOT(b) = sum_i c f_s 2^{b_i}`.
    pub fn p_tot(&self, b: &BitAllocation) -> f64 {
        b.bits().iter().map(|&x| self.path_power(x)).sum()
    }

    pub fn fits(&self, power: f64) -> bool {
        power <= self.p_adc * (1.0 + BUDGET_SLACK)
    }

    pub fn admits(&self, b: &BitAllocation) -> bool {
        b.bits().iter().all(|x| (1..=MAX_ALLOC_BITS).contains(x)) && self.fits(self.p_tot(b))
    }
}

/// The power-feasible allocations, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    pub n_s: usize,
    pub allocations: Vec<BitAllocation>,
}

impl FeasibleSet {
    pub fn len(&self) -> usize {
        self.allocations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allocations.is_empty()
    }
}

/// Lists every `b` in `{1..4}^{n_s}` within `budget`, lexicographically.
/// Fails once more than `cap` allocations have been found.
pub fn enumerate_bset(n_s: usize, budget: &PowerBudget, cap: usize) -> Result<FeasibleSet> {
    if n_s == 0 {
        return Err(Error::InvalidParameter("n_s must be >= 1".into()));
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(n_s);
    let min_path = budget.path_power(1);
    if !budget.fits(min_path * n_s as f64) {
        return Ok(FeasibleSet { n_s, allocations: out });
    }
    fn walk(
        n_s: usize,
        budget: &PowerBudget,
        min_path: f64,
        used: f64,
        prefix: &mut Vec<u8>,
        out: &mut Vec<BitAllocation>,
        cap: usize,
    ) -> Result<()> {
        if prefix.len() == n_s {
            if out.len() == cap {
                log::warn!("feasible set for n_s = {n_s} exceeds the cap of {cap} allocations");
                return Err(Error::FeasibleSetTooLarge { cap });
            }
            out.push(BitAllocation::new(prefix.clone())?);
            return Ok(());
        }
        let remaining = (n_s - prefix.len() - 1) as f64;
        for b in 1..=MAX_ALLOC_BITS {
            let used_b = used + budget.path_power(b);
            if !budget.fits(used_b + remaining * min_path) {
                break;
            }
            prefix.push(b);
            walk(n_s, budget, min_path, used_b, prefix, out, cap)?;
            prefix.pop();
        }
        Ok(())
    }
    walk(n_s, budget, min_path, 0.0, &mut prefix, &mut out, cap)?;
    Ok(FeasibleSet { n_s, allocations: out })
}

/// Objective-evaluation arithmetic. Real multiplications and divisions are
/// tallied in `mults`; `log2` counts as one multiplication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    /// Complex (or real) multiplications.
    pub mults: u64,
    /// Complex additions.
    pub adds: u64,
    pub real_adds: u64,
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.mults += rhs.mults;
        self.adds += rhs.adds;
        self.real_adds += rhs.real_adds;
    }
}

impl OpCounter {
    pub const fn new(mults: u64, adds: u64, real_adds: u64) -> Self {
        Self { mults, adds, real_adds }
    }

    fn scaled(self, k: u64) -> Self {
        Self::new(self.mults * k, self.adds * k, self.real_adds * k)
    }

    pub fn total(&self) -> u64 {
        self.mults + self.adds + self.real_adds
    }
}

/// One `k_f(b_i) = p sigma^2 / (sigma_n^2 + f l / (1 - f))`:
/// four multiplications/divisions and two real additions.
pub const K_F_TERM_COST: OpCounter = OpCounter::new(4, 0, 2);

/// Separable capacity `sum log2(1 + q_i)` over `n` paths.
pub fn separable_capacity_cost(n: usize) -> OpCounter {
    let n = n as u64;
    let mut c = K_F_TERM_COST.scaled(n);
    c += OpCounter::new(n, 0, n + n.saturating_sub(1));
    c
}

/// `K_f(b)` over `n` paths.
pub fn k_f_cost(n: usize) -> OpCounter {
    let mut c = K_F_TERM_COST.scaled(n as u64);
    c.real_adds += (n as u64).saturating_sub(1);
    c
}

/// Determinant-form capacity for one candidate with `n` paths and `r`
/// receive antennas: form `G`, `K`, `Phi`, factor `Phi`, solve for
/// `L^{-1} K`, form `I + p M M^H`, factor it and sum the log-pivots.
pub fn det_form_cost(n: usize, r: usize) -> OpCounter {
    let (n, r) = (n as u64, r as u64);
    let mut c = OpCounter::default();
    // G = W_D^H (W_alpha W_A^H)
    c += OpCounter::new(n * r + n * n * r, n * (n - 1) * r, 0);
    // K = W_D^H (W_alpha W_A^H U Sigma)
    c += OpCounter::new(n * n + n * n * n, n * (n - 1) * n, 0);
    // Phi = sigma^2 G G^H + W_D^H D_q^2 W_D
    c += OpCounter::new(
        n * n * r + n * n + n * n * n + n * n,
        n * n * (r - 1) + n * n * (n - 1) + n * n,
        0,
    );
    // two Cholesky factorizations
    c += OpCounter::new(2 * (n * n * n / 6 + n * n), 2 * (n * n * n / 6), 0);
    // M = L^{-1} K
    c += OpCounter::new(n * n * (n + 1) / 2, n * n * (n - 1) / 2, 0);
    // I + p M M^H
    c += OpCounter::new(n * n * n + n * n, n * n * (n - 1) + n, 0);
    // 2 sum log(diag)
    c += OpCounter::new(n + 1, 0, n - 1);
    c
}

/// Evaluates candidate allocations for a fixed channel and SNR.
pub trait CandidateEvaluator {
    fn n_paths(&self) -> usize;
    fn capacity(&self, b: &BitAllocation, ops: &mut OpCounter) -> Result<f64>;
    fn k_f(&self, b: &BitAllocation, ops: &mut OpCounter) -> Result<f64>;
    fn report(&self, b: &BitAllocation) -> Result<CapacityReport>;
}

/// Per-path quantities for the ideal combiner, where capacity and `K_f` are
/// both separable. `q` is tabulated for `b = 1..=5`.
#[derive(Debug, Clone)]
pub struct PathProfile {
    pub sigma: Vec<f64>,
    pub l: Vec<f64>,
    /// Per-stream symbol power.
    pub p: f64,
    pub sigma_n_sq: f64,
    pub convention: PowerConvention,
    q: Vec<[f64; 5]>,
    log_term: Vec<[f64; 5]>,
}

impl PathProfile {
    pub fn new(
        sigma: &[f64],
        l: &[f64],
        p: f64,
        sigma_n_sq: f64,
        convention: PowerConvention,
        table: &QuantGainTable,
    ) -> Result<Self> {
        if sigma.len() != l.len() || sigma.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} singular values, {} path gains",
                sigma.len(),
                l.len()
            )));
        }
        let f = table.values();
        let q: Vec<[f64; 5]> = sigma
            .iter()
            .zip(l)
            .map(|(s, li)| std::array::from_fn(|k| metrics::q_from_distortion(p, sigma_n_sq, s * s, *li, f[k])))
            .collect();
        let log_term = q.iter().map(|row| row.map(|v| (1.0 + v).log2())).collect();
        Ok(Self {
            sigma: sigma.to_vec(),
            l: l.to_vec(),
            p,
            sigma_n_sq,
            convention,
            q,
            log_term,
        })
    }

    pub fn from_front_end(fe: &ReceiverFrontEnd, sig: &SignalConfig, table: &QuantGainTable) -> Result<Self> {
        Self::new(
            fe.svd.sigma.as_slice(),
            fe.path_gains().as_slice(),
            sig.stream_power(fe.n_s()),
            sig.sigma_n_sq,
            sig.convention,
            table,
        )
    }

    pub fn from_model(model: &EffectiveModel, table: &QuantGainTable) -> Result<Self> {
        Self::new(
            model.sigma.as_slice(),
            model.l.as_slice(),
            model.p,
            model.sigma_n_sq,
            model.convention,
            table,
        )
    }

    /// `k_f(b_i)` on path `i`.
    pub fn k_f_path(&self, i: usize, bits: u8) -> f64 {
        self.q[i][bits as usize - 1]
    }

    /// `k_f` with infinite resolution, `p sigma_i^2 / sigma_n^2`.
    pub fn k_f_unquantized(&self) -> f64 {
        self.sigma.iter().map(|s| self.p * s * s / self.sigma_n_sq).sum()
    }

    fn check(&self, b: &BitAllocation) -> Result<()> {
        if b.len() != self.sigma.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bit widths for {} paths",
                b.len(),
                self.sigma.len()
            )));
        }
        Ok(())
    }
}

impl CandidateEvaluator for PathProfile {
    fn n_paths(&self) -> usize {
        self.sigma.len()
    }

    fn capacity(&self, b: &BitAllocation, ops: &mut OpCounter) -> Result<f64> {
        self.check(b)?;
        *ops += separable_capacity_cost(b.len());
        Ok(b.bits()
            .iter()
            .enumerate()
            .map(|(i, &x)| self.log_term[i][x as usize - 1])
            .sum())
    }

    fn k_f(&self, b: &BitAllocation, ops: &mut OpCounter) -> Result<f64> {
        self.check(b)?;
        *ops += k_f_cost(b.len());
        Ok(b.bits().iter().enumerate().map(|(i, &x)| self.k_f_path(i, x)).sum())
    }

    fn report(&self, b: &BitAllocation) -> Result<CapacityReport> {
        self.check(b)?;
        let terms = nalgebra::DVector::from_iterator(
            b.len(),
            b.bits()
                .iter()
                .enumerate()
                .map(|(i, &x)| self.log_term[i][x as usize - 1]),
        );
        Ok(CapacityReport {
            capacity_bits: terms.sum(),
            per_path_terms: terms,
            k_f_score: b.bits().iter().enumerate().map(|(i, &x)| self.k_f_path(i, x)).sum(),
            mode: CombinerMode::Ideal,
            convention: self.convention,
            allocation: Quantization::Bits(b.clone()),
        })
    }
}

/// Builds the full model for every candidate and evaluates the determinant
/// form. Works for either combiner mode.
pub struct ModelEvaluator<'a> {
    pub front_end: &'a ReceiverFrontEnd,
    pub table: &'a QuantGainTable,
    pub signal: SignalConfig,
}

impl ModelEvaluator<'_> {
    fn model(&self, b: &BitAllocation) -> Result<EffectiveModel> {
        self.front_end
            .model_for(&Quantization::Bits(b.clone()), self.table, &self.signal)
    }
}

impl CandidateEvaluator for ModelEvaluator<'_> {
    fn n_paths(&self) -> usize {
        self.front_end.n_s()
    }

    fn capacity(&self, b: &BitAllocation, ops: &mut OpCounter) -> Result<f64> {
        let model = self.model(b)?;
        *ops += det_form_cost(model.n_s(), model.g.ncols());
        metrics::capacity_det(&model)
    }

    fn k_f(&self, b: &BitAllocation, ops: &mut OpCounter) -> Result<f64> {
        let model = self.model(b)?;
        *ops += k_f_cost(model.n_s());
        metrics::k_f_sum(&model, b, self.table)
    }

    fn report(&self, b: &BitAllocation) -> Result<CapacityReport> {
        metrics::capacity(&self.model(b)?)
    }
}

fn argmax<F>(set: &FeasibleSet, mut objective: F) -> Result<(BitAllocation, f64)>
where
    F: FnMut(&BitAllocation) -> Result<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (idx, b) in set.allocations.iter().enumerate() {
        let v = objective(b)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("search objective"));
        }
        match best {
            Some((_, incumbent)) if v <= incumbent + TIE_TOLERANCE * incumbent.abs() => {}
            _ => best = Some((idx, v)),
        }
    }
    let (idx, v) = best.ok_or(Error::Infeasible)?;
    Ok((set.allocations[idx].clone(), v))
}

/// Capacity-maximizing allocation over `set`. Ties go to the
/// lexicographically smallest allocation.
pub fn exhaustive_search_capacity<E: CandidateEvaluator + ?Sized>(
    evaluator: &E,
    set: &FeasibleSet,
) -> Result<(BitAllocation, CapacityReport, OpCounter)> {
    let mut ops = OpCounter::default();
    let (b, _) = argmax(set, |b| evaluator.capacity(b, &mut ops))?;
    let report = evaluator.report(&b)?;
    Ok((b, report, ops))
}

/// `K_f`-maximizing allocation over `set`, same tie rule.
pub fn exhaustive_search_kf<E: CandidateEvaluator + ?Sized>(
    evaluator: &E,
    set: &FeasibleSet,
) -> Result<(BitAllocation, f64, OpCounter)> {
    let mut ops = OpCounter::default();
    let (b, v) = argmax(set, |b| evaluator.k_f(b, &mut ops))?;
    Ok((b, v, ops))
}

/// Greedy marginal-gain-per-watt allocation of `K_f`.
///
/// Starts from all-ones and repeatedly raises the path whose next bit buys
/// the largest `k_f` increase per added watt `c f_s 2^{b_i}`, among the
/// increments that still fit. Stops when nothing fits or every path is at
/// four bits. Ties go to the smallest path index.
pub fn greedy_allocate(profile: &PathProfile, budget: &PowerBudget) -> Result<(BitAllocation, OpCounter)> {
    let n = profile.n_paths();
    let mut bits = vec![1u8; n];
    let mut used = budget.path_power(1) * n as f64;
    if !budget.fits(used) {
        return Err(Error::Infeasible);
    }
    let mut ops = OpCounter::default();
    let mut current = Vec::with_capacity(n);
    let mut ratio = Vec::with_capacity(n);
    for i in 0..n {
        ops += K_F_TERM_COST.scaled(2);
        ops += OpCounter::new(1, 0, 1);
        let now = profile.k_f_path(i, 1);
        current.push(now);
        ratio.push((profile.k_f_path(i, 2) - now) / budget.path_power(1));
    }
    loop {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if bits[i] >= MAX_ALLOC_BITS || !budget.fits(used + budget.path_power(bits[i])) {
                continue;
            }
            match pick {
                Some(j) if ratio[i] <= ratio[j] + TIE_TOLERANCE * ratio[j].abs() => {}
                _ => pick = Some(i),
            }
        }
        let Some(i) = pick else { break };
        used += budget.path_power(bits[i]);
        bits[i] += 1;
        current[i] = profile.k_f_path(i, bits[i]);
        if bits[i] < MAX_ALLOC_BITS {
            ops += K_F_TERM_COST;
            ops += OpCounter::new(1, 0, 1);
            ratio[i] = (profile.k_f_path(i, bits[i] + 1) - current[i]) / budget.path_power(bits[i]);
        }
    }
    Ok((BitAllocation::new(bits)?, ops))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_budget(p_adc: f64) -> PowerBudget {
        PowerBudget::new(1.0, 1.0, p_adc).unwrap()
    }

    fn alloc(v: &[u8]) -> BitAllocation {
        BitAllocation::new(v.to_vec()).unwrap()
    }

    fn toy_profile() -> PathProfile {
        let s = [10.0, 0.1];
        let l = [101.0, 1.01];
        PathProfile::new(&s, &l, 1.0, 1.0, PowerConvention::PerStream, &QuantGainTable::default()).unwrap()
    }

    #[test]
    fn two_path_budget_six() {
        let set = enumerate_bset(2, &unit_budget(6.0), DEFAULT_BSET_CAP).unwrap();
        assert_eq!(set.allocations, vec![alloc(&[1, 1]), alloc(&[1, 2]), alloc(&[2, 1])]);
    }

    #[test]
    fn all_ones_infeasible_gives_empty_set() {
        let set = enumerate_bset(3, &unit_budget(5.9), DEFAULT_BSET_CAP).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn single_path_all_widths() {
        let set = enumerate_bset(1, &unit_budget(16.0), DEFAULT_BSET_CAP).unwrap();
        assert_eq!(set.allocations, (1..=4).map(|b| alloc(&[b])).collect::<Vec<_>>());
    }

    #[test]
    fn cap_is_enforced() {
        let r = enumerate_bset(4, &unit_budget(64.0), 10);
        assert!(matches!(r, Err(Error::FeasibleSetTooLarge { cap: 10 })));
    }

    #[test]
    fn uniform_budget_includes_its_own_allocation() {
        let budget = PowerBudget::uniform(8, 2, 4.94e-13, 1.76e9).unwrap();
        assert!(budget.admits(&BitAllocation::uniform(8, 2).unwrap()));
        assert!(!budget.admits(&BitAllocation::uniform(8, 4).unwrap()));
    }

    #[test]
    fn singleton_set_returns_its_member() {
        let p = toy_profile();
        let set = FeasibleSet {
            n_s: 2,
            allocations: vec![alloc(&[2, 3])],
        };
        assert_eq!(exhaustive_search_capacity(&p, &set).unwrap().0, alloc(&[2, 3]));
        assert_eq!(exhaustive_search_kf(&p, &set).unwrap().0, alloc(&[2, 3]));
        let empty = FeasibleSet {
            n_s: 2,
            allocations: vec![],
        };
        assert!(exhaustive_search_kf(&p, &empty).is_err());
    }

    #[test]
    fn strong_path_gets_more_bits() {
        let p = toy_profile();
        let set = enumerate_bset(2, &unit_budget(12.0), DEFAULT_BSET_CAP).unwrap();
        // Oracle: every capacity by hand from the per-path formula.
        let f = QuantGainTable::default();
        let cap = |b: &BitAllocation| -> f64 {
            b.bits()
                .iter()
                .zip([(100.0, 101.0), (0.01, 1.01)])
                .map(|(&x, (s2, l))| {
                    let fb = f.f(x).unwrap();
                    (1.0 + s2 / (1.0 + fb * l / (1.0 - fb))).log2()
                })
                .sum()
        };
        let best = set.allocations.iter().max_by(|a, b| cap(a).total_cmp(&cap(b))).unwrap();
        let (b, report, _) = exhaustive_search_capacity(&p, &set).unwrap();
        assert_eq!(&b, best);
        assert!(b.bits()[0] > b.bits()[1]);
        assert!((report.capacity_bits - cap(&b)).abs() < 1e-12);
    }

    #[test]
    fn greedy_matches_exhaustive_on_toy() {
        let p = toy_profile();
        let budget = unit_budget(12.0);
        let set = enumerate_bset(2, &budget, DEFAULT_BSET_CAP).unwrap();
        let (es, _, _) = exhaustive_search_kf(&p, &set).unwrap();
        let (g, _) = greedy_allocate(&p, &budget).unwrap();
        assert_eq!(g, es);
    }

    #[test]
    fn greedy_single_path_takes_widest_fit() {
        let p = PathProfile::new(
            &[2.0],
            &[5.0],
            1.0,
            1.0,
            PowerConvention::PerStream,
            &QuantGainTable::default(),
        )
        .unwrap();
        assert_eq!(greedy_allocate(&p, &unit_budget(9.0)).unwrap().0, alloc(&[3]));
        assert_eq!(greedy_allocate(&p, &unit_budget(100.0)).unwrap().0, alloc(&[4]));
        assert!(matches!(greedy_allocate(&p, &unit_budget(1.0)), Err(Error::Infeasible)));
    }

    #[test]
    fn symmetric_paths_give_sorted_allocation() {
        let n = 4;
        let table = QuantGainTable::default();
        let budget = PowerBudget::uniform(n, 2, 1.0, 1.0).unwrap();
        let set = enumerate_bset(n, &budget, DEFAULT_BSET_CAP).unwrap();
        // Thermal-noise limited: the uniform allocation wins.
        let low = PathProfile::new(&[1.0; 4], &[2.0; 4], 1.0, 100.0, PowerConvention::PerStream, &table).unwrap();
        assert_eq!(
            exhaustive_search_kf(&low, &set).unwrap().0,
            BitAllocation::uniform(n, 2).unwrap()
        );
        // Quantization limited: whichever permutation wins, the first in
        // lexicographic order is returned.
        let high = PathProfile::new(&[1.0; 4], &[2.0; 4], 1.0, 1e-3, PowerConvention::PerStream, &table).unwrap();
        let b = exhaustive_search_kf(&high, &set).unwrap().0;
        assert!(b.bits().windows(2).all(|w| w[0] <= w[1]), "{b}");
    }

    #[test]
    fn model_evaluator_agrees_with_profile() {
        use crate::channel::{generate_channel, truncated_svd, ChannelParams};
        use crate::receiver::build_combiners;
        let ch = generate_channel(&ChannelParams {
            seed: 21,
            ..Default::default()
        })
        .unwrap();
        let svd = truncated_svd(&ch, 3).unwrap();
        let comb = build_combiners(&svd, CombinerMode::Ideal).unwrap();
        let fe = ReceiverFrontEnd::new(svd, comb, &ch).unwrap();
        let table = QuantGainTable::default();
        let sig = SignalConfig::from_snr_db(0.0, PowerConvention::SplitTotal).unwrap();
        let prof = PathProfile::from_front_end(&fe, &sig, &table).unwrap();
        let eval = ModelEvaluator {
            front_end: &fe,
            table: &table,
            signal: sig,
        };
        let set = enumerate_bset(3, &PowerBudget::uniform(3, 3, 1.0, 1.0).unwrap(), DEFAULT_BSET_CAP).unwrap();
        let (a, ra, ops_det) = exhaustive_search_capacity(&eval, &set).unwrap();
        let (b, rb, ops_sep) = exhaustive_search_capacity(&prof, &set).unwrap();
        assert_eq!(a, b);
        assert!((ra.capacity_bits - rb.capacity_bits).abs() < 1e-10);
        assert!(ops_det.mults > ops_sep.mults);
        let mut ops = OpCounter::default();
        assert!((eval.k_f(&a, &mut ops).unwrap() - prof.k_f(&a, &mut ops).unwrap()).abs() < 1e-9 * rb.k_f_score);
    }

    #[test]
    fn counters_accumulate_per_candidate() {
        let p = toy_profile();
        let set = enumerate_bset(2, &unit_budget(12.0), DEFAULT_BSET_CAP).unwrap();
        let (_, _, ops) = exhaustive_search_kf(&p, &set).unwrap();
        let mut expect = OpCounter::default();
        for _ in 0..set.len() {
            expect += k_f_cost(2);
        }
        assert_eq!(ops, expect);
    }
}
