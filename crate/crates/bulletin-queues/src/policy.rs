//! Rule-based service-rate policy driven by an online model of tenant
//! reactions.
//!
//! Every tenant decision observed at a bulletin feeds an exponentially
//! weighted estimate of the stay/renege/jockey mix, kept separately per
//! bulletin model and queue. The queue periodically re-scores its current
//! rate pair against the lattice neighbors, weighting the impatience terms
//! of the objective by the predicted reaction probabilities, and steps to
//! the neighbor with the best expected utility.

use crate::error::Error;
use crate::impatience::{renege_rate_icd, BehaviorParams};
use crate::numeric::sigmoid;
use crate::optimizer::ObjectiveWeights;
use crate::state::{ModelKind, QueueId, QueueParams};
use crate::Result;

/// A tenant's reaction to a bulletin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionKind {
    Stay,
    Renege,
    Jockey,
}

impl ActionKind {
    fn index(self) -> usize {
        match self {
            ActionKind::Stay => 0,
            ActionKind::Renege => 1,
            ActionKind::Jockey => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Stay => "stay",
            ActionKind::Renege => "renege",
            ActionKind::Jockey => "jockey",
        }
    }
}

/// One observed tenant reaction, tagged with the bulletin model that
/// prompted it and the context it was taken in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionObservation {
    pub kind: ModelKind,
    pub queue: QueueId,
    pub action: ActionKind,
    /// Queue length at the moment of the decision.
    pub queue_len: usize,
    /// Age of the bulletin the tenant acted on, in [0, r].
    pub staleness_age: f64,
}

/// Exponentially weighted stay/renege/jockey frequencies per
/// (bulletin model, queue) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveModel {
    cells: [[f64; 3]; 4],
    alpha: f64,
}

impl Default for PredictiveModel {
    fn default() -> Self {
        Self::new(0.2).expect("default smoothing factor is valid")
    }
}

impl PredictiveModel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ValidationError(format!(
                "smoothing factor {alpha} outside (0, 1)"
            )));
        }
        Ok(Self {
            cells: [[1.0 / 3.0; 3]; 4],
            alpha,
        })
    }

    #[cfg(test)]
    fn from_cells(cells: [[f64; 3]; 4]) -> Self {
        Self { cells, alpha: 0.2 }
    }

    fn cell_index(kind: ModelKind, queue: QueueId) -> usize {
        match kind {
            ModelKind::Fsd => queue.index(),
            ModelKind::Icd => 2 + queue.index(),
        }
    }

    /// Fold one reaction into its cell: f ← (1−α)·f + α·onehot(action),
    /// renormalized against accumulated rounding drift.
    pub fn observe(&mut self, obs: &ReactionObservation) {
        let cell = &mut self.cells[Self::cell_index(obs.kind, obs.queue)];
        for f in cell.iter_mut() {
            *f *= 1.0 - self.alpha;
        }
        cell[obs.action.index()] += self.alpha;
        let total: f64 = cell.iter().sum();
        for f in cell.iter_mut() {
            *f /= total;
        }
    }

    /// Current (stay, renege, jockey) frequencies of one cell.
    pub fn action_probabilities(&self, kind: ModelKind, queue: QueueId) -> [f64; 3] {
        self.cells[Self::cell_index(kind, queue)]
    }

    /// Renege probability for a queue averaged over both bulletin models.
    pub fn predicted_renege(&self, queue: QueueId) -> f64 {
        let fsd = self.action_probabilities(ModelKind::Fsd, queue)[ActionKind::Renege.index()];
        let icd = self.action_probabilities(ModelKind::Icd, queue)[ActionKind::Renege.index()];
        0.5 * (fsd + icd)
    }

    /// Jockey probability for a queue averaged over both bulletin models.
    pub fn predicted_jockey(&self, queue: QueueId) -> f64 {
        let fsd = self.action_probabilities(ModelKind::Fsd, queue)[ActionKind::Jockey.index()];
        let icd = self.action_probabilities(ModelKind::Icd, queue)[ActionKind::Jockey.index()];
        0.5 * (fsd + icd)
    }
}

/// The policy's adjustable state: current rate pair, lattice step, rate
/// bounds, and objective weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyState {
    pub mu_i: f64,
    pub mu_j: f64,
    pub step: f64,
    pub bounds: (f64, f64),
    pub weights: ObjectiveWeights,
}

impl PolicyState {
    pub fn new(
        mu_i: f64,
        mu_j: f64,
        step: f64,
        bounds: (f64, f64),
        weights: ObjectiveWeights,
    ) -> Result<Self> {
        if step <= 0.0 || bounds.0 <= 0.0 || bounds.1 <= bounds.0 {
            return Err(Error::ValidationError(format!(
                "bad policy lattice: step={step}, bounds=({}, {})",
                bounds.0, bounds.1
            )));
        }
        if !(bounds.0..=bounds.1).contains(&mu_i) || !(bounds.0..=bounds.1).contains(&mu_j) {
            return Err(Error::ValidationError(format!(
                "initial rates ({mu_i}, {mu_j}) outside bounds ({}, {})",
                bounds.0, bounds.1
            )));
        }
        Ok(Self {
            mu_i,
            mu_j,
            step,
            bounds,
            weights,
        })
    }
}

/// Prediction-weighted variant of the optimizer objective, negated so that
/// higher is better: the φ and ψ terms are scaled per queue by the model's
/// current renege and jockey probabilities.
fn utility_at(
    mu_i: f64,
    mu_j: f64,
    model: &PredictiveModel,
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
    let renege = model.predicted_renege(QueueId::I) * li * renege_rate_icd(li, mu_i, bp)?
        + model.predicted_renege(QueueId::J) * lj * renege_rate_icd(lj, mu_j, bp)?;
    let decay = bp.staleness_decay();
    let jockey = model.predicted_jockey(QueueId::I)
        * li
        * sigmoid(bp.d * (2.0 * li * decay - 2.0 * lj * decay))
        + model.predicted_jockey(QueueId::J)
            * lj
            * sigmoid(bp.d * decay * ((mu_i - li) - (mu_j - lj)));
    Ok(-(w.tau * delay + w.phi * renege + w.psi * jockey))
}

/// Expected utility of the policy's current rate pair under the model's
/// predictions; higher is better.
pub fn expected_utility(
    state: &PolicyState,
    model: &PredictiveModel,
    qi: &QueueParams,
    qj: &QueueParams,
    bp: &BehaviorParams,
) -> Result<f64> {
    utility_at(
        state.mu_i,
        state.mu_j,
        model,
        qi,
        qj,
        bp,
        &state.weights,
    )
}

fn lattice_feasible(mu: f64, q: &QueueParams, bounds: (f64, f64)) -> bool {
    mu >= bounds.0 && mu <= bounds.1 && mu > q.lambda
}

/// One recalibration round: score the 3×3 lattice neighborhood of the
/// current pair (each coordinate clamped into the bounds), move to the
/// neighbor with the highest expected utility, and stay put on ties or when
/// no neighbor is feasible. Returns the new pair.
pub fn recalibrate(
    state: &mut PolicyState,
    model: &PredictiveModel,
    qi: &QueueParams,
    qj: &QueueParams,
    bp: &BehaviorParams,
) -> Result<(f64, f64)> {
    let (lo, hi) = state.bounds;
    let current = if lattice_feasible(state.mu_i, qi, state.bounds)
        && lattice_feasible(state.mu_j, qj, state.bounds)
    {
        Some(utility_at(
            state.mu_i,
            state.mu_j,
            model,
            qi,
            qj,
            bp,
            &state.weights,
        )?)
    } else {
        None
    };
    let mut best: Option<(f64, f64, f64)> = None; // (utility, mu_i, mu_j)
    for di in [-1.0, 0.0, 1.0] {
        for dj in [-1.0, 0.0, 1.0] {
            if di == 0.0 && dj == 0.0 {
                continue;
            }
            let mi = (state.mu_i + di * state.step).clamp(lo, hi);
            let mj = (state.mu_j + dj * state.step).clamp(lo, hi);
            if !(lattice_feasible(mi, qi, state.bounds) && lattice_feasible(mj, qj, state.bounds))
            {
                continue;
            }
            let u = utility_at(mi, mj, model, qi, qj, bp, &state.weights)?;
            let replace = match best {
                None => true,
                Some((bu, bi, bj)) => u > bu || (u == bu && (mi, mj) < (bi, bj)),
            };
            if replace {
                best = Some((u, mi, mj));
            }
        }
    }
    // ties favor no move: leave the current pair only for a strict gain
    if let Some((u, mi, mj)) = best {
        if current.is_none_or(|cu| u > cu) {
            state.mu_i = mi;
            state.mu_j = mj;
        }
    }
    Ok((state.mu_i, state.mu_j))
}
