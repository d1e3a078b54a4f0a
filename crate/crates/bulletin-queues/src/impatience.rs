//! Closed-form reneging and jockeying probabilities and rates for both
//! bulletin models, including staleness degradation.
//!
//! A buffered tenant at position ℓ faces an Erlang(ℓ, ν) remaining wait,
//! where ν is the queue's effective service margin. It reneges to local
//! processing when that wait is predicted to exceed the staleness-discounted
//! local-processing budget Δ = max(0, t_local − η·r), and jockeys to the
//! sibling queue when the advertised state there stochastically beats its
//! own remaining wait.

use crate::error::Error;
use crate::numeric::{integrate, ln_factorial, poisson_partial_sum, sigmoid};
use crate::state::StationaryLengthDist;
use crate::Result;

/// Queue position: number of requests ahead of a buffered tenant (0 = head,
/// in service).
pub type Position = usize;

/// Tenant-behavior knobs shared by both bulletin models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorParams {
    /// Deterministic local-processing time (sec) a tenant falls back to.
    pub t_local: f64,
    /// Sigmoid steepness of the jockeying response (1/jobs).
    pub d: f64,
    /// Staleness sensitivity in [0, 1]; 0 means dispatch lag is harmless.
    pub eta: f64,
    /// Bulletin dispatch interval (sec).
    pub r: f64,
}

impl BehaviorParams {
    pub fn new(t_local: f64, d: f64, eta: f64, r: f64) -> Result<Self> {
        if t_local <= 0.0 || d <= 0.0 || r <= 0.0 || !(0.0..=1.0).contains(&eta) {
            return Err(Error::ValidationError(format!(
                "behavior params out of range: t_local={t_local}, d={d}, eta={eta}, r={r}"
            )));
        }
        Ok(Self { t_local, d, eta, r })
    }

    /// Staleness-discounted local-processing budget, clamped at zero: fully
    /// stale bulletins (η·r ≥ t_local) leave no patience at all.
    pub fn delta(&self) -> f64 {
        (self.t_local - self.eta * self.r).max(0.0)
    }

    /// Multiplicative staleness decay e^{−η·r} applied to advertised drift.
    pub fn staleness_decay(&self) -> f64 {
        (-self.eta * self.r).exp()
    }
}

/// Expected remaining time until the request at position ℓ is served, ℓ/μ.
pub fn expected_remaining(ell: Position, mu: f64) -> Result<f64> {
    if mu <= 0.0 {
        return Err(Error::NonpositiveRate(mu));
    }
    Ok(ell as f64 / mu)
}

/// CDF of the Erlang(ℓ, ν) remaining wait at position ℓ:
/// 1 − Σ_{v=0}^{ℓ−1} (νt)^v e^{−νt}/v!. Position 0 waits zero, so its CDF is
/// 1 for all t ≥ 0.
pub fn erlang_wait_cdf(ell: Position, nu: f64, t: f64) -> Result<f64> {
    if nu <= 0.0 {
        return Err(Error::NonpositiveRate(nu));
    }
    if t < 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - poisson_partial_sum(nu * t, ell))
}

/// Waiting CDF averaged over the stationary queue-length law with the usual
/// tail truncation.
pub fn mixture_wait_cdf(dist: &StationaryLengthDist, nu: f64, t: f64) -> Result<f64> {
    if nu <= 0.0 {
        return Err(Error::NonpositiveRate(nu));
    }
    let mut acc = 0.0;
    for (n, pn) in dist.iter_truncated() {
        acc += pn * erlang_wait_cdf(n, nu, t)?;
    }
    Ok(acc.min(1.0))
}

/// Probability that the tenant at position ℓ reneges: the upper Erlang tail
/// P(W > Δ | ℓ) with effective margin ε = μ − λ and budget Δ from `bp`.
/// Position 0 is in service and never reneges.
pub fn renege_probability(
    ell: Position,
    mu: f64,
    lambda: f64,
    bp: &BehaviorParams,
) -> Result<f64> {
    if mu <= lambda {
        return Err(Error::UnstableQueue { lambda, mu });
    }
    let epsilon = mu - lambda;
    Ok(poisson_partial_sum(epsilon * bp.delta(), ell))
}

/// λ · Σ_ℓ π_ℓ · P(renege | ℓ): throughput of reneging tenants in a stable
/// queue whose tenants consume rate-chain bulletins.
pub fn renege_rate_fsd(lambda: f64, mu: f64, bp: &BehaviorParams) -> Result<f64> {
    renege_rate(lambda, mu, bp)
}

/// Same functional form as [`renege_rate_fsd`]; kept distinct because the
/// simulator gates it on the inter-change-time comparison between the two
/// queues before applying it.
pub fn renege_rate_icd(lambda: f64, mu: f64, bp: &BehaviorParams) -> Result<f64> {
    renege_rate(lambda, mu, bp)
}

fn renege_rate(lambda: f64, mu: f64, bp: &BehaviorParams) -> Result<f64> {
    let dist = crate::state::stationary_length_dist(lambda, mu)?;
    let x = (mu - lambda) * bp.delta();
    let ex = (-x).exp();
    // Incremental evaluation: P(ℓ+1) = P(ℓ) + x^ℓ e^{−x}/ℓ!, so one pass over
    // the truncated stationary law covers every position.
    let mut tail: f64 = 0.0; // P(renege | ℓ), starts at ℓ = 0
    let mut term = ex; // x^ℓ e^{−x}/ℓ!
    let mut acc = 0.0;
    for (ell, pn) in dist.iter_truncated() {
        acc += pn * tail.min(1.0);
        tail += term;
        term *= x / (ell as f64 + 1.0);
    }
    Ok(lambda * acc)
}

/// Probability a tenant jockeys from queue i to j under inter-change-time
/// bulletins: σ(2·d·e^{−η·r}·(λ_i − λ_j)).
pub fn jockey_probability_icd(lambda_i: f64, lambda_j: f64, bp: &BehaviorParams) -> f64 {
    sigmoid(2.0 * bp.d * bp.staleness_decay() * (lambda_i - lambda_j))
}

/// Total jockeying throughput between the two queues under inter-change-time
/// bulletins: λ_i·P(i→j) + λ_j·P(j→i).
pub fn jockey_rate_icd(lambda_i: f64, lambda_j: f64, bp: &BehaviorParams) -> f64 {
    lambda_i * jockey_probability_icd(lambda_i, lambda_j, bp)
        + lambda_j * jockey_probability_icd(lambda_j, lambda_i, bp)
}

/// Probability the remaining wait at position k in the destination queue
/// undercuts the wait at position ℓ in the source queue,
/// P{W_{j,k} < W_{i,ℓ}}, via adaptive quadrature of
/// ∫ f_{Erlang(k,ξ_j)}(t−shift) · P(W_{i,ℓ} > t−shift) dt.
///
/// Both factors carry the same staleness shift, so under the pure-delay
/// convention (integrand zero for t < shift) the substitution u = t − shift
/// removes the shift entirely; it is validated but cannot change the value.
pub fn jockey_probability_fsd_numeric(
    ell: Position,
    k: Position,
    xi_i: f64,
    xi_j: f64,
    shift: f64,
) -> Result<f64> {
    if xi_i <= 0.0 {
        return Err(Error::NonpositiveRate(xi_i));
    }
    if xi_j <= 0.0 || shift < 0.0 {
        return Err(Error::NonpositiveRate(xi_j.min(shift)));
    }
    if ell == 0 || k == 0 {
        return Err(Error::InvalidPosition(ell.min(k)));
    }

    // Upper limit where the destination wait's survival is negligible; the
    // integrand is dominated by that density, so the discarded tail is below
    // the quadrature tolerance.
    let mut u_max = k as f64 / xi_j;
    while poisson_partial_sum(xi_j * u_max, k) > 1e-13 {
        u_max *= 2.0;
    }

    let ln_norm = xi_j.ln() - ln_factorial(k - 1);
    let integrand = move |u: f64| {
        if u <= 0.0 {
            return if k == 1 { xi_j } else { 0.0 };
        }
        let ln_pdf = (k as f64 - 1.0) * (xi_j * u).ln() + ln_norm - xi_j * u;
        ln_pdf.exp() * poisson_partial_sum(xi_i * u, ell)
    };
    let value = integrate(&integrand, 0.0, u_max, 1e-9)?;
    Ok(value.clamp(0.0, 1.0))
}

/// The printed series form of the jockeying probability,
/// Σ_{m=0}^{ℓ−1} ξ_j^ℓ/(ξ_i+ξ_j)^{ℓ+m} · (ℓ+m−1)!/((ℓ−1)!·m!), evaluated in
/// the log domain. The destination position `k` is accepted for signature
/// parity with the numeric integral, but the series as printed does not
/// reference it — the conformance report tabulates the resulting divergence
/// rather than correcting it.
pub fn jockey_probability_fsd_closed(ell: Position, _k: Position, xi_i: f64, xi_j: f64) -> f64 {
    let ln_sum = (xi_i + xi_j).ln();
    let ln_xi_j = xi_j.ln();
    let mut acc = 0.0;
    for m in 0..ell {
        let ln_term = ell as f64 * ln_xi_j - (ell + m) as f64 * ln_sum
            + ln_factorial(ell + m - 1)
            - ln_factorial(ell - 1)
            - ln_factorial(m);
        acc += ln_term.exp();
    }
    acc
}

/// Total jockeying throughput given per-direction probabilities:
/// λ_i·p_ij + λ_j·p_ji.
pub fn jockey_rate_fsd(lambda_i: f64, lambda_j: f64, p_ij: f64, p_ji: f64) -> f64 {
    lambda_i * p_ij + lambda_j * p_ji
}
