//! The two Markov information models dispatched to tenants.
//!
//! A `ServiceRateChain` is the stationary law of a queue's service-rate
//! process: rate levels with steady-state probabilities. Chains are compared
//! by first-order stochastic dominance of their CDFs. The inter-change-time
//! model summarizes queue-length dynamics instead: a stable M/M/1 queue in
//! equilibrium changes length at rate 2λ (arrivals plus departures), so the
//! expected time between changes is 1/(2λ).
//!
//! Only stationary laws are represented; the modulating generator behind a
//! rate chain is never simulated.

use crate::error::Error;
use crate::Result;

/// Tail mass below which infinite sums over queue lengths are truncated.
pub const TAIL_TOL: f64 = 1e-9;

/// Which of the two information models a bulletin carries: service-rate
/// chains compared by stochastic dominance (FSD) or inter-change times of
/// the queue-length process (ICD).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Fsd,
    Icd,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fsd => "fsd",
            ModelKind::Icd => "icd",
        }
    }
}

/// Identifies one of the two queues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueueId {
    I,
    J,
}

impl QueueId {
    pub fn index(self) -> usize {
        match self {
            QueueId::I => 0,
            QueueId::J => 1,
        }
    }

    pub fn other(self) -> QueueId {
        match self {
            QueueId::I => QueueId::J,
            QueueId::J => QueueId::I,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            QueueId::I => "i",
            QueueId::J => "j",
        }
    }
}

/// Largest merged level grid `fsd_compare` will align; larger grids are out
/// of scope for these models.
const MAX_UNION_LEVELS: usize = 128;

/// Stationary distribution of a service-rate process: `levels` are rates in
/// jobs/sec, `probs` their steady-state weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRateChain {
    levels: Vec<f64>,
    probs: Vec<f64>,
}

impl ServiceRateChain {
    pub fn new(levels: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidChain("chain needs at least one level".into()));
        }
        if levels.len() != probs.len() {
            return Err(Error::InvalidChain(format!(
                "{} levels vs {} probabilities",
                levels.len(),
                probs.len()
            )));
        }
        for w in levels.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidChain(
                    "levels must be strictly increasing".into(),
                ));
            }
        }
        if levels[0] <= 0.0 || !levels.iter().all(|l| l.is_finite()) {
            return Err(Error::InvalidChain("levels must be positive finite".into()));
        }
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidChain(
                "probabilities must be nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidChain(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { levels, probs })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mean service rate under the stationary law.
    pub fn effective_rate(&self) -> f64 {
        self.levels
            .iter()
            .zip(&self.probs)
            .map(|(l, p)| l * p)
            .sum()
    }

    /// Cumulative probabilities at each level, nondecreasing and ending at 1.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }

    /// Step-CDF value at rate `x` (probability the rate is ≤ x).
    fn cdf_at(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (l, p) in self.levels.iter().zip(&self.probs) {
            if *l <= x {
                acc += p;
            } else {
                break;
            }
        }
        acc
    }
}

/// Outcome of a first-order stochastic dominance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsdVerdict {
    XDominates,
    YDominates,
    NoDominance,
}

/// First-order stochastic dominance of two rate chains: X dominates Y iff
/// F_X ≤ F_Y at every level of the merged grid with strict inequality
/// somewhere. Chains over different level sets are aligned by merging onto
/// the union grid with step CDFs.
pub fn fsd_compare(x: &ServiceRateChain, y: &ServiceRateChain) -> Result<FsdVerdict> {
    let mut grid: Vec<f64> = x.levels.iter().chain(&y.levels).copied().collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    grid.dedup();
    if grid.len() > MAX_UNION_LEVELS {
        return Err(Error::IncompatibleGrids(grid.len()));
    }

    let mut x_le = true; // F_X ≤ F_Y everywhere
    let mut y_le = true;
    let mut strict = false;
    for &level in &grid {
        let fx = x.cdf_at(level);
        let fy = y.cdf_at(level);
        if fx > fy {
            x_le = false;
        }
        if fy > fx {
            y_le = false;
        }
        if fx != fy {
            strict = true;
        }
    }
    Ok(match (x_le, y_le, strict) {
        (true, _, true) => FsdVerdict::XDominates,
        (_, true, true) => FsdVerdict::YDominates,
        _ => FsdVerdict::NoDominance,
    })
}

/// Rate at which a stable M/M/1 queue's length changes in equilibrium:
/// arrivals at λ plus departures at λ.
pub fn icd_event_rate(lambda: f64) -> Result<f64> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::NonpositiveRate(lambda));
    }
    Ok(2.0 * lambda)
}

/// Expected time between successive queue-length changes, 1/(2λ).
pub fn icd_time(lambda: f64) -> Result<f64> {
    Ok(1.0 / icd_event_rate(lambda)?)
}

/// Arrival/service rates of one queue with the admissible service-rate box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueParams {
    pub lambda: f64,
    pub mu: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl QueueParams {
    pub fn new(lambda: f64, mu: f64, mu_min: f64, mu_max: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::NonpositiveRate(lambda));
        }
        if lambda >= mu {
            return Err(Error::UnstableQueue { lambda, mu });
        }
        if mu_min <= 0.0 || mu < mu_min || mu > mu_max {
            return Err(Error::ValidationError(format!(
                "service rate {mu} outside [{mu_min}, {mu_max}] or nonpositive floor"
            )));
        }
        Ok(Self {
            lambda,
            mu,
            mu_min,
            mu_max,
        })
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }
}

/// Geometric stationary queue-length law π_n = (1−ρ)ρ^n of a stable queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryLengthDist {
    rho: f64,
}

/// Stationary length distribution of a stable M/M/1 queue.
pub fn stationary_length_dist(lambda: f64, mu: f64) -> Result<StationaryLengthDist> {
    if lambda <= 0.0 {
        return Err(Error::NonpositiveRate(lambda));
    }
    if lambda >= mu {
        return Err(Error::UnstableQueue { lambda, mu });
    }
    Ok(StationaryLengthDist { rho: lambda / mu })
}

impl StationaryLengthDist {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// π_n.
    pub fn pmf(&self, n: usize) -> f64 {
        (1.0 - self.rho) * self.rho.powi(n as i32)
    }

    /// Smallest N such that the tail mass beyond N, ρ^{N+1}, is below
    /// `TAIL_TOL`; sums over 0..=N capture all but < 1e−9 of the law.
    pub fn truncation_len(&self) -> usize {
        let mut n = 0usize;
        let mut tail = self.rho; // mass beyond state n
        while tail >= TAIL_TOL {
            n += 1;
            tail *= self.rho;
        }
        n
    }

    /// (n, π_n) pairs up to the truncation length.
    pub fn iter_truncated(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let last = self.truncation_len();
        let mut pn = 1.0 - self.rho;
        (0..=last).map(move |n| {
            let out = (n, pn);
            pn *= self.rho;
            out
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(levels: &[f64], probs: &[f64]) -> ServiceRateChain {
        ServiceRateChain::new(levels.to_vec(), probs.to_vec()).unwrap()
    }

    #[test]
    fn effective_rate_trivial_cases() {
        assert_eq!(chain(&[1.0, 3.0], &[0.5, 0.5]).effective_rate(), 2.0);
        assert_eq!(chain(&[5.0], &[1.0]).effective_rate(), 5.0);
    }

    /// Time-average service rate of a continuous-time chain whose stationary
    /// law is (levels, probs): states drawn i.i.d. from the stationary law,
    /// each held for an exp(1) sojourn. Independent of `effective_rate`.
    fn ctmc_time_average(levels: &[f64], probs: &[f64], jumps: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weighted = 0.0;
        let mut total = 0.0;
        for _ in 0..jumps {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut state = levels.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    state = k;
                    break;
                }
            }
            let hold = -(1.0 - rng.random::<f64>()).ln();
            weighted += levels[state] * hold;
            total += hold;
        }
        weighted / total
    }

    #[test]
    fn effective_rate_matches_simulated_chain() {
        let levels = [1.0, 2.0, 4.0];
        let probs = [0.2, 0.3, 0.5];
        let analytic = chain(&levels, &probs).effective_rate();
        let simulated = ctmc_time_average(&levels, &probs, 400_000, 0xC0FFEE);
        assert!(
            (simulated - analytic).abs() / analytic < 0.01,
            "simulated {simulated} vs analytic {analytic}"
        );
    }

    #[test]
    fn cdf_prefix_sums() {
        let c = chain(&[1.0, 2.0, 3.0], &[0.2, 0.3, 0.5]);
        assert_eq!(c.cdf(), vec![0.2, 0.5, 1.0]);
        assert_eq!(chain(&[2.0], &[1.0]).cdf(), vec![1.0]);
    }

    #[test]
    fn cdf_matches_independent_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let levels: Vec<f64> = (1..=5).map(|k| k as f64).collect();
        let c = ServiceRateChain::new(levels, probs.clone()).unwrap();

        let mut oracle = Vec::new();
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            oracle.push(acc);
        }
        for (got, want) in c.cdf().iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-12);
        }
        let last = *c.cdf().last().unwrap();
        assert!((last - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fsd_textbook_cases() {
        let x = chain(&[1.0, 2.0], &[0.2, 0.8]);
        let y = chain(&[1.0, 2.0], &[0.5, 0.5]);
        assert_eq!(fsd_compare(&x, &y).unwrap(), FsdVerdict::XDominates);
        assert_eq!(fsd_compare(&y, &x).unwrap(), FsdVerdict::YDominates);
        assert_eq!(fsd_compare(&x, &x).unwrap(), FsdVerdict::NoDominance);

        // crossing CDFs
        let a = chain(&[1.0, 2.0, 3.0], &[0.1, 0.8, 0.1]);
        let b = chain(&[1.0, 2.0, 3.0], &[0.3, 0.3, 0.4]);
        assert_eq!(fsd_compare(&a, &b).unwrap(), FsdVerdict::NoDominance);
    }

    #[test]
    fn fsd_aligns_disjoint_grids() {
        // y concentrated above all of x's mass: y dominates
        let x = chain(&[1.0, 2.0], &[0.5, 0.5]);
        let y = chain(&[3.0, 4.0], &[0.5, 0.5]);
        assert_eq!(fsd_compare(&x, &y).unwrap(), FsdVerdict::YDominates);

        let huge_grid: Vec<f64> = (1..=128).map(|k| k as f64).collect();
        let uniform = vec![1.0 / 128.0; 128];
        let big = ServiceRateChain::new(huge_grid, uniform).unwrap();
        let other = chain(&[0.25, 150.0], &[0.5, 0.5]);
        assert!(matches!(
            fsd_compare(&big, &other),
            Err(Error::IncompatibleGrids(_))
        ));
    }

    #[test]
    fn chain_validation_rejects_bad_input() {
        assert!(ServiceRateChain::new(vec![], vec![]).is_err());
        assert!(ServiceRateChain::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(ServiceRateChain::new(vec![1.0, 2.0], vec![0.7, 0.7]).is_err());
        assert!(ServiceRateChain::new(vec![-1.0, 2.0], vec![0.5, 0.5]).is_err());
        assert!(ServiceRateChain::new(vec![1.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn icd_rates_trivial() {
        assert_eq!(icd_event_rate(0.5).unwrap(), 1.0);
        assert_eq!(icd_event_rate(2.0).unwrap(), 4.0);
        assert_eq!(icd_time(0.5).unwrap(), 1.0);
        assert_eq!(icd_time(2.0).unwrap(), 0.25);
        assert!(icd_event_rate(0.0).is_err());
        assert!(icd_time(-1.0).is_err());
    }

    /// Gillespie loop for a stable M/M/1 queue, independent of the event
    /// simulator: returns (length-change events, horizon, time-in-state
    /// histogram).
    fn mm1_gillespie(lambda: f64, mu: f64, horizon: f64, seed: u64) -> (u64, f64, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        let mut n = 0usize;
        let mut events = 0u64;
        let mut occupancy = vec![0.0; 64];
        while t < horizon {
            let total = if n == 0 { lambda } else { lambda + mu };
            let dt = -(1.0 - rng.random::<f64>()).ln() / total;
            let stay = (horizon - t).min(dt);
            if n < occupancy.len() {
                occupancy[n] += stay;
            }
            t += dt;
            if t >= horizon {
                break;
            }
            let arrival = n == 0 || rng.random::<f64>() < lambda / total;
            if arrival {
                n += 1;
            } else {
                n -= 1;
            }
            events += 1;
        }
        (events, horizon, occupancy)
    }

    #[test]
    fn icd_event_rate_matches_event_count() {
        let (events, horizon, _) = mm1_gillespie(3.0, 6.0, 200_000.0, 11);
        let measured = events as f64 / horizon;
        let analytic = icd_event_rate(3.0).unwrap();
        assert!(
            (measured - analytic).abs() / analytic < 0.02,
            "measured {measured} vs {analytic}"
        );
        // mean gap between changes
        let gap = horizon / events as f64;
        let expect = icd_time(3.0).unwrap();
        assert!((gap - expect).abs() / expect < 0.02);
    }

    #[test]
    fn stationary_dist_trivial_values() {
        let d = stationary_length_dist(1.0, 2.0).unwrap();
        assert_eq!(d.pmf(0), 0.5);
        assert_eq!(d.pmf(1), 0.25);
        assert_eq!(d.pmf(2), 0.125);
        assert_eq!(stationary_length_dist(1.0, 4.0).unwrap().pmf(0), 0.75);
        assert!(matches!(
            stationary_length_dist(3.0, 2.0),
            Err(Error::UnstableQueue { .. })
        ));
    }

    #[test]
    fn stationary_dist_matches_time_in_state() {
        let (_, horizon, occupancy) = mm1_gillespie(2.0, 5.0, 400_000.0, 23);
        let d = stationary_length_dist(2.0, 5.0).unwrap();
        let tv: f64 = occupancy
            .iter()
            .enumerate()
            .map(|(n, time)| (time / horizon - d.pmf(n)).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn truncation_keeps_tail_below_tolerance() {
        let d = stationary_length_dist(2.0, 5.0).unwrap();
        let n = d.truncation_len();
        assert_eq!(n, 22); // 0.4^23 < 1e-9 <= 0.4^22
        assert!(d.rho().powi(n as i32 + 1) < TAIL_TOL);
        assert!(d.rho().powi(n as i32) >= TAIL_TOL);
        let mass: f64 = d.iter_truncated().map(|(_, p)| p).sum();
        assert!((1.0 - mass) < TAIL_TOL);
    }

    #[test]
    fn queue_params_validation() {
        assert!(QueueParams::new(2.0, 5.0, 0.5, 16.0).is_ok());
        assert!(matches!(
            QueueParams::new(5.0, 5.0, 0.5, 16.0),
            Err(Error::UnstableQueue { .. })
        ));
        assert!(QueueParams::new(0.0, 5.0, 0.5, 16.0).is_err());
        assert!(QueueParams::new(2.0, 20.0, 0.5, 16.0).is_err());
    }

    fn arb_chain() -> impl Strategy<Value = ServiceRateChain> {
        (2usize..6).prop_flat_map(|k| {
            let weights = proptest::collection::vec(0.05f64..1.0, k);
            weights.prop_map(move |raw| {
                let total: f64 = raw.iter().sum();
                let probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
                let levels: Vec<f64> = (1..=k).map(|i| i as f64 * 0.7).collect();
                ServiceRateChain::new(levels, probs).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn fsd_is_antisymmetric(x in arb_chain(), y in arb_chain()) {
            let xy = fsd_compare(&x, &y).unwrap();
            let yx = fsd_compare(&y, &x).unwrap();
            let mirrored = match xy {
                FsdVerdict::XDominates => FsdVerdict::YDominates,
                FsdVerdict::YDominates => FsdVerdict::XDominates,
                FsdVerdict::NoDominance => FsdVerdict::NoDominance,
            };
            prop_assert_eq!(yx, mirrored);
        }

        #[test]
        fn fsd_self_is_no_dominance(x in arb_chain()) {
            prop_assert_eq!(fsd_compare(&x, &x).unwrap(), FsdVerdict::NoDominance);
        }

        #[test]
        fn upward_mass_transfer_is_monotone(
            x in arb_chain(),
            from in 0usize..5,
            frac in 0.1f64..1.0,
        ) {
            let k = x.levels().len();
            let from = from % (k - 1);
            // move a fraction of mass from `from` to the top level
            let mut probs = x.probs().to_vec();
            let moved = probs[from] * frac;
            probs[from] -= moved;
            probs[k - 1] += moved;
            let shifted = ServiceRateChain::new(x.levels().to_vec(), probs).unwrap();

            prop_assert!(shifted.effective_rate() >= x.effective_rate() - 1e-12);
            // the shifted chain can only gain dominance over the original
            prop_assert_ne!(fsd_compare(&shifted, &x).unwrap(), FsdVerdict::YDominates);
        }

        #[test]
        fn icd_reciprocal_identity(lambda in 0.01f64..50.0) {
            let product = icd_time(lambda).unwrap() * icd_event_rate(lambda).unwrap();
            // equality at machine precision
            prop_assert!((product - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
    }
}
