//! Grid optimization of the delay-plus-impatience objective with KKT
//! verification.
//!
//! The objective charges τ for stationary delay, φ for predicted reneging
//! throughput, and ψ for predicted jockeying pressure. Minimization runs as
//! an exhaustive scan over a service-rate lattice; the winning point is then
//! audited: Lagrange multipliers for the rate box and stability constraints
//! are recovered from the stationarity equations over every active-set
//! combination, complementary slackness is checked explicitly, and a
//! finite-difference Hessian reports whether the surface is locally convex
//! (it is not guaranteed to be — the surface is only piecewise well-behaved,
//! which is why the scan is exhaustive rather than gradient-driven).

use crate::error::Error;
use crate::impatience::{renege_rate_icd, BehaviorParams};
use crate::numeric::{sigmoid, sigmoid_prime};
use crate::state::{stationary_length_dist, QueueParams};
use crate::Result;

/// Relative weights of the three objective ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveWeights {
    /// Stationary-delay weight.
    pub tau: f64,
    /// Reneging-throughput weight.
    pub phi: f64,
    /// Jockeying-pressure weight.
    pub psi: f64,
}

impl ObjectiveWeights {
    pub fn new(tau: f64, phi: f64, psi: f64) -> Result<Self> {
        if tau < 0.0 || phi < 0.0 || psi < 0.0 || tau + phi + psi <= 0.0 {
            return Err(Error::ValidationError(format!(
                "weights must be nonnegative with at least one positive: tau={tau}, phi={phi}, psi={psi}"
            )));
        }
        Ok(Self { tau, phi, psi })
    }
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            tau: 1.0,
            phi: 1.0,
            psi: 1.0,
        }
    }
}

/// Service-rate lattice scanned per queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: 0.5,
            stop: 15.0,
            step: 0.5,
        }
    }
}

impl GridSpec {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if start <= 0.0 || stop < start || step <= 0.0 {
            return Err(Error::ValidationError(format!(
                "degenerate grid: start={start}, stop={stop}, step={step}"
            )));
        }
        Ok(Self { start, stop, step })
    }

    /// Lattice values start, start+step, … up to stop inclusive.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = self.start + self.step * f64::from(k);
            if v > self.stop + 1e-9 {
                return out;
            }
            out.push(v);
            k += 1;
        }
    }
}

/// Candidate optimum with recovered multipliers and KKT residuals.
///
/// `multipliers` holds (γ_floor, γ_cap, γ_stability) for queue i then queue
/// j; `slackness_residuals` the corresponding γ·g products in the same
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub mu_i: f64,
    pub mu_j: f64,
    pub multipliers: [f64; 6],
    pub stationarity_residuals: [f64; 2],
    pub slackness_residuals: [f64; 6],
}

/// Per-constraint slackness audit.
#[derive(Debug, Clone, PartialEq)]
pub struct SlacknessEntry {
    pub label: &'static str,
    pub gamma: f64,
    pub slack: f64,
    pub product: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlacknessReport {
    pub pass: bool,
    pub primal_feasible: bool,
    pub entries: Vec<SlacknessEntry>,
}

/// Finite-difference curvature verdict at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianReport {
    pub psd: bool,
    pub eigenvalues: [f64; 2],
    pub matrix: [[f64; 2]; 2],
}

/// One lattice cell of the scanned objective surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapePoint {
    pub mu_i: f64,
    pub mu_j: f64,
    pub objective: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_mu_i: f64,
    pub best_mu_j: f64,
    pub best_value: f64,
    pub landscape: Vec<LandscapePoint>,
    pub kkt: KktPoint,
    pub hessian: Option<HessianReport>,
}

const SLACK_TOL: f64 = 1e-9;
const PSD_TOL: f64 = -1e-6;

fn feasible(mu: f64, q: &QueueParams) -> bool {
    mu >= q.mu_min && mu < q.mu_max && mu > q.lambda
}

/// The scanned objective:
/// τ·[ρ_i/ε_i + ρ_j/ε_j]
/// + φ·[λ_i·R_i(μ_i) + λ_j·R_j(μ_j)]
/// + ψ·[λ_i·σ(2·d·e^{−ηr}·(λ_i−λ_j)) + λ_j·σ(d·e^{−ηr}·(ε_i−ε_j))],
/// where R is the reneging throughput under inter-change-time bulletins and
/// ε = μ − λ. Candidate rates are taken from the arguments; the `mu` stored
/// in the queue params is the current operating point and is ignored here.
pub fn objective(
    mu_i: f64,
    mu_j: f64,
    qi: &QueueParams,
    qj: &QueueParams,
    bp: &BehaviorParams,
    w: &ObjectiveWeights,
) -> Result<f64> {
    if mu_i <= qi.lambda {
        return Err(Error::UnstableQueue {
            lambda: qi.lambda,
            mu: mu_i,
        });
    }
    if mu_j <= qj.lambda {
        return Err(Error::UnstableQueue {
            lambda: qj.lambda,
            mu: mu_j,
        });
    }
    let (li, lj) = (qi.lambda, qj.lambda);
    let delay = li / mu_i / (mu_i - li) + lj / mu_j / (mu_j - lj);
    let renege = li * renege_rate_icd(li, mu_i, bp)? + lj * renege_rate_icd(lj, mu_j, bp)?;
    let decay = bp.staleness_decay();
    let jockey = li * sigmoid(bp.d * (2.0 * li * decay - 2.0 * lj * decay))
        + lj * sigmoid(bp.d * decay * ((mu_i - li) - (mu_j - lj)));
    Ok(w.tau * delay + w.phi * renege + w.psi * jockey)
}

/// Sum Σ_v [v/ε − Δ]·(εΔ)^v e^{−εΔ}/v! over the truncated stationary
/// support — the φ ingredient of the stationarity equations.
fn renege_gradient_series(lambda: f64, mu: f64, bp: &BehaviorParams) -> Result<f64> {
    let dist = stationary_length_dist(lambda, mu)?;
    let eps = mu - lambda;
    let delta = bp.delta();
    let x = eps * delta;
    let mut term = (-x).exp(); // (εΔ)^v e^{−εΔ}/v!
    let mut acc = 0.0;
    for v in 0..=dist.truncation_len() {
        acc += (v as f64 / eps - delta) * term;
        term *= x / (v as f64 + 1.0);
    }
    Ok(acc)
}

/// Gradient parts of the two stationarity equations before multipliers are
/// applied: for queue i,
/// τ·(−λ_i(2μ_i−λ_i)/(μ_i²ε_i²)) + φ·λ_i·Σ_v[v/ε_i − Δ]·poisson(εΔ) terms
/// + ψ·d·e^{−ηr}·σ′(z)·(λ_i+λ_j), with z = d·e^{−ηr}·(ε_j−ε_i); queue j
/// mirrors the ψ term with a minus sign.
fn gradient_parts(
    mu_i: f64,
    mu_j: f64,
    qi: &QueueParams,
    qj: &QueueParams,
    bp: &BehaviorParams,
    w: &ObjectiveWeights,
) -> Result<[f64; 2]> {
    let (li, lj) = (qi.lambda, qj.lambda);
    let (eps_i, eps_j) = (mu_i - li, mu_j - lj);
    let decay = bp.staleness_decay();
    let z = bp.d * decay * (eps_j - eps_i);
    let coupling = w.psi * bp.d * decay * sigmoid_prime(z) * (li + lj);
    let delay_i = -li * (2.0 * mu_i - li) / (mu_i * mu_i * eps_i * eps_i);
    let delay_j = -lj * (2.0 * mu_j - lj) / (mu_j * mu_j * eps_j * eps_j);
    let series_i = renege_gradient_series(li, mu_i, bp)?;
    let series_j = renege_gradient_series(lj, mu_j, bp)?;
    Ok([
        w.tau * delay_i + w.phi * li * series_i + coupling,
        w.tau * delay_j + w.phi * lj * series_j - coupling,
    ])
}

/// Stationarity residuals of the two service-rate equations at the given
/// multipliers: gradient part − γ_floor + γ_cap + γ_stability per queue.
/// Residuals near zero indicate a stationary point of the Lagrangian.
pub fn stationarity_residuals(
    mu_i: f64,
    mu_j: f64,
    multipliers: &[f64; 6],
    qi: &QueueParams,
    qj: &QueueParams,
    bp: &BehaviorParams,
    w: &ObjectiveWeights,
) -> Result<[f64; 2]> {
    let parts = gradient_parts(mu_i, mu_j, qi, qj, bp, w)?;
    Ok([
        parts[0] - multipliers[0] + multipliers[1] + multipliers[2],
        parts[1] - multipliers[3] + multipliers[4] + multipliers[5],
    ])
}

fn constraint_slacks(mu: f64, q: &QueueParams) -> [f64; 3] {
    [q.mu_min - mu, mu - q.mu_max, q.lambda - mu]
}

/// Verify γ·g = 0 within tolerance for all six constraints, γ ≥ 0, and
/// primal feasibility of the point.
pub fn check_slackness(point: &KktPoint, qi: &QueueParams, qj: &QueueParams) -> SlacknessReport {
    let labels = [
        "queue i rate floor",
        "queue i rate cap",
        "queue i stability",
        "queue j rate floor",
        "queue j rate cap",
        "queue j stability",
    ];
    let slacks_i = constraint_slacks(point.mu_i, qi);
    let slacks_j = constraint_slacks(point.mu_j, qj);
    let mut entries = Vec::with_capacity(6);
    let mut pass = true;
    for m in 0..6 {
        let gamma = point.multipliers[m];
        let slack = if m < 3 { slacks_i[m] } else { slacks_j[m - 3] };
        let product = gamma * slack;
        let ok = gamma >= 0.0 && product.abs() <= SLACK_TOL;
        pass &= ok;
        entries.push(SlacknessEntry {
            label: labels[m],
            gamma,
            slack,
            product,
            ok,
        });
    }
    let primal_feasible = feasible(point.mu_i, qi) && feasible(point.mu_j, qj);
    SlacknessReport {
        pass: pass && primal_feasible,
        primal_feasible,
        entries,
    }
}

/// Recover one queue's multipliers from its stationarity equation: try every
/// active-set combination of the three constraints, solve the single linear
/// equation by the minimum-norm rule, keep candidates that are dual feasible
/// (γ ≥ 0) and complementary (active constraints actually tight), and return
/// the one with the smallest residual, then the fewest active multipliers.
fn solve_queue_multipliers(gradient_part: f64, slacks: [f64; 3]) -> ([f64; 3], f64) {
    // stationarity: gradient_part − γ1 + γ2 + γ3 = 0
    let coeff = [-1.0, 1.0, 1.0];
    let mut best: ([f64; 3], f64, u32) = ([0.0; 3], gradient_part, 0);
    for mask in 1u32..8 {
        let active: Vec<usize> = (0..3).filter(|m| mask & (1 << m) != 0).collect();
        if active.iter().any(|&m| slacks[m].abs() > SLACK_TOL) {
            continue; // complementary slackness would fail
        }
        let count = active.len() as f64;
        let mut gammas = [0.0; 3];
        for &m in &active {
            gammas[m] = coeff[m] * (-gradient_part) / count;
        }
        if gammas.iter().any(|g| *g < 0.0) {
            continue; // dual infeasible
        }
        let residual =
            gradient_part + gammas.iter().zip(coeff).map(|(g, c)| g * c).sum::<f64>();
        let better = residual.abs() < best.1.abs() - 1e-15
            || (residual.abs() <= best.1.abs() + 1e-15 && (active.len() as u32) < best.2);
        if better {
            best = (gammas, residual, active.len() as u32);
        }
    }
    (best.0, best.1)
}

/// Central-difference Hessian of the objective at an interior point, with
/// step h = 1e−4·max(1, μ) per axis. Errors with `StepUnderflow` when the
/// stencil would leave the feasible box or cross the stability boundary.
pub fn hessian_psd_check(
    mu_i: f64,
    mu_j: f64,
    qi: &QueueParams,
    qj: &QueueParams,
    bp: &BehaviorParams,
    w: &ObjectiveWeights,
) -> Result<HessianReport> {
    let hi = 1e-4 * mu_i.max(1.0);
    let hj = 1e-4 * mu_j.max(1.0);
    for (mu, h, q) in [(mu_i, hi, qi), (mu_j, hj, qj)] {
        if mu - h <= q.lambda || mu - h < q.mu_min || mu + h >= q.mu_max {
            return Err(Error::StepUnderflow(h));
        }
    }
    let f = |a: f64, b: f64| objective(a, b, qi, qj, bp, w);
    let center = f(mu_i, mu_j)?;
    let fxx = (f(mu_i + hi, mu_j)? - 2.0 * center + f(mu_i - hi, mu_j)?) / (hi * hi);
    let fyy = (f(mu_i, mu_j + hj)? - 2.0 * center + f(mu_i, mu_j - hj)?) / (hj * hj);
    let fxy = (f(mu_i + hi, mu_j + hj)? - f(mu_i + hi, mu_j - hj)? - f(mu_i - hi, mu_j + hj)?
        + f(mu_i - hi, mu_j - hj)?)
        / (4.0 * hi * hj);
    let half_trace = 0.5 * (fxx + fyy);
    let disc = (0.5 * (fxx - fyy)).hypot(fxy);
    let eigenvalues = [half_trace - disc, half_trace + disc];
    Ok(HessianReport {
        psd: eigenvalues[0] >= PSD_TOL,
        eigenvalues,
        matrix: [[fxx, fxy], [fxy, fyy]],
    })
}

/// Exhaustive lattice minimization: scan every (μ_i, μ_j) pair, keep the
/// feasible point with the smallest objective (ties broken toward the
/// lexicographically smallest pair), and audit it with multipliers, KKT
/// residuals, and a curvature report when the stencil fits.
pub fn optimize(
    grid: &GridSpec,
    qi: &QueueParams,
    qj: &QueueParams,
    bp: &BehaviorParams,
    w: &ObjectiveWeights,
) -> Result<OptimizationResult> {
    let values = grid.values();
    let mut landscape = Vec::with_capacity(values.len() * values.len());
    let mut best: Option<(f64, f64, f64)> = None;
    for &mi in &values {
        for &mj in &values {
            let ok = feasible(mi, qi) && feasible(mj, qj);
            let value = if ok {
                Some(objective(mi, mj, qi, qj, bp, w)?)
            } else {
                None
            };
            landscape.push(LandscapePoint {
                mu_i: mi,
                mu_j: mj,
                objective: value,
                feasible: ok,
            });
            if let Some(v) = value {
                // lexicographic scan order makes strict-less the tie-break
                if best.map_or(true, |(_, _, bv)| v < bv) {
                    best = Some((mi, mj, v));
                }
            }
        }
    }
    let (best_mu_i, best_mu_j, best_value) = best.ok_or(Error::NoFeasiblePoint)?;

    let parts = gradient_parts(best_mu_i, best_mu_j, qi, qj, bp, w)?;
    let (gi, res_i) = solve_queue_multipliers(parts[0], constraint_slacks(best_mu_i, qi));
    let (gj, res_j) = solve_queue_multipliers(parts[1], constraint_slacks(best_mu_j, qj));
    let multipliers = [gi[0], gi[1], gi[2], gj[0], gj[1], gj[2]];
    let slacks_i = constraint_slacks(best_mu_i, qi);
    let slacks_j = constraint_slacks(best_mu_j, qj);
    let mut slackness_residuals = [0.0; 6];
    for m in 0..3 {
        slackness_residuals[m] = multipliers[m] * slacks_i[m];
        slackness_residuals[m + 3] = multipliers[m + 3] * slacks_j[m];
    }
    let kkt = KktPoint {
        mu_i: best_mu_i,
        mu_j: best_mu_j,
        multipliers,
        stationarity_residuals: [res_i, res_j],
        slackness_residuals,
    };
    let hessian = hessian_psd_check(best_mu_i, best_mu_j, qi, qj, bp, w).ok();
    Ok(OptimizationResult {
        best_mu_i,
        best_mu_j,
        best_value,
        landscape,
        kkt,
        hessian,
    })
}
