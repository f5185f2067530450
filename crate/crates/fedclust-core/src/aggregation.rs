//! Robust aggregation: the coordinate-wise trimmed mean and the
//! trimmed-mean gradient-descent loop that fits one model per cluster.
//!
//! The trimmed mean is the sole aggregation primitive: the plain mean is the
//! `β = 0` special case and shares the code path, so every aggregation in
//! the crate inherits the same canonical summation order (values are sorted
//! per coordinate before summing, which makes the result invariant to the
//! order members are supplied in — bitwise, not just approximately).

use crate::data::ClientDataset;
use crate::models::{
    self, gradient_and_loss, ModelKind, ParamVector, TrainConfig, DIVERGENCE_LOSS_LIMIT,
};
use crate::rng::{stream, Purpose};
use crate::{exec, Error, Result};
use rand_chacha::ChaCha12Rng;

/// One round's participants: everyone when no sampler is armed (full
/// participation), otherwise `max(1, round(p · j))` distinct indices,
/// ascending.
pub(crate) fn sample_participants(
    sampler: &mut Option<ChaCha12Rng>,
    j: usize,
    participation: f64,
) -> Vec<usize> {
    match sampler {
        Some(rng) => {
            let count = ((participation * j as f64).round() as usize).clamp(1, j);
            let mut idx = rand::seq::index::sample(rng, j, count).into_vec();
            idx.sort_unstable();
            idx
        }
        None => (0..j).collect(),
    }
}

/// Trim level `β ∈ [0, ½)`: `⌊βJ⌋` values are dropped from each end of every
/// coordinate's sorted list of `J` contributions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrimSpec {
    beta: f64,
}

impl TrimSpec {
    pub fn new(beta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&beta) {
            return Err(Error::invalid(format!("trim level {beta} must lie in [0, 0.5)")));
        }
        Ok(TrimSpec { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of values dropped from **each** side of `j` contributions.
    pub fn trim_count(&self, j: usize) -> usize {
        (self.beta * j as f64).floor() as usize
    }

    /// Number of values that survive trimming, or [`Error::OverTrim`] when
    /// nothing would.
    pub fn retained(&self, j: usize) -> Result<usize> {
        let k = self.trim_count(j);
        match j.checked_sub(2 * k) {
            Some(r) if r >= 1 => Ok(r),
            _ => Err(Error::OverTrim {
                members: j,
                beta: self.beta,
            }),
        }
    }
}

/// Coordinate-wise `β`-trimmed mean of `vectors`.
///
/// Per coordinate, the `J` values are sorted ascending (a stable sort, so
/// ties keep input order), `⌊βJ⌋` are dropped from each end, and the rest are
/// averaged. The `β = 0` mean also sorts first, so any permutation of
/// `vectors` produces a bitwise-identical result.
pub fn trmean(vectors: &[ParamVector], beta: f64) -> Result<ParamVector> {
    let spec = TrimSpec::new(beta)?;
    let j = vectors.len();
    let k = spec.trim_count(j);
    let retained = spec.retained(j)?; // j = 0 over-trims by definition
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let out = exec::map_range(dim, |c| {
        let mut col: Vec<f64> = vectors.iter().map(|v| v.0[c]).collect();
        col.sort_by(f64::total_cmp);
        col[k..j - k].iter().sum::<f64>() / retained as f64
    });
    Ok(ParamVector(out))
}

/// Unweighted mean — the `β = 0` trimmed mean.
pub fn mean(vectors: &[ParamVector]) -> Result<ParamVector> {
    trmean(vectors, 0.0)
}

/// A participant in robust federated training: either an honest client that
/// computes on its data, or a Byzantine member that reports a fixed vector
/// no matter what it is asked for (gradient or local model alike).
#[derive(Clone, Debug)]
pub enum Member<'a> {
    Data(&'a ClientDataset),
    Byzantine(ParamVector),
}

impl<'a> From<&'a ClientDataset> for Member<'a> {
    fn from(c: &'a ClientDataset) -> Self {
        Member::Data(c)
    }
}

/// Wraps every client of a slice as an honest member.
pub fn honest_members(clients: &[ClientDataset]) -> Vec<Member<'_>> {
    clients.iter().map(Member::from).collect()
}

/// Trimmed-mean gradient descent over `members`, all participating every
/// round. See [`trimmed_mean_gd_sampled`].
pub fn trimmed_mean_gd(
    kind: ModelKind,
    members: &[Member<'_>],
    w0: &ParamVector,
    cfg: &TrainConfig,
) -> Result<ParamVector> {
    trimmed_mean_gd_sampled(kind, members, w0, cfg, 1.0, 0, 0)
}

/// Trimmed-mean gradient descent with partial participation.
///
/// Runs `cfg.steps` rounds from `w0`. Each round draws
/// `max(1, round(participation · J))` members without replacement (with
/// `participation = 1` every member participates and no randomness is
/// consumed), then:
///
/// * `cfg.local_steps == 1` — participants report the gradient of their
///   training risk at the current iterate; the server takes the
///   `cfg.trim`-trimmed mean and applies one projected step:
///   `w ← Π(w − η · TrMean_β(g₁, …))`.
/// * `cfg.local_steps > 1` — participants run that many projected gradient
///   steps locally from the current iterate; the server's next iterate is
///   the trimmed mean of the local models (no further projection).
///
/// Byzantine members report their fixed vector in either role. Honest
/// members trip [`Error::Diverged`] if their loss leaves the finite range.
/// The participation stream is `(seed, Participation, stream_id)`, so
/// callers running several of these loops derive disjoint `stream_id`s.
pub fn trimmed_mean_gd_sampled(
    kind: ModelKind,
    members: &[Member<'_>],
    w0: &ParamVector,
    cfg: &TrainConfig,
    participation: f64,
    seed: u64,
    stream_id: u64,
) -> Result<ParamVector> {
    cfg.validate()?;
    if !(participation > 0.0 && participation <= 1.0) {
        return Err(Error::invalid("participation must lie in (0, 1]"));
    }
    let j = members.len();
    if j == 0 {
        return Err(Error::invalid("cannot train on zero members"));
    }
    if w0.len() != kind.param_dim() {
        return Err(Error::DimensionMismatch {
            expected: kind.param_dim(),
            got: w0.len(),
        });
    }
    let mut sampler = if participation < 1.0 {
        Some(stream(seed, Purpose::Participation, stream_id))
    } else {
        None
    };
    let local_cfg = TrainConfig {
        steps: cfg.local_steps,
        learning_rate: cfg.learning_rate,
        projection_diameter: cfg.projection_diameter,
        local_steps: 1,
        trim: 0.0,
    };
    let mut w = w0.clone();
    for _ in 0..cfg.steps {
        let participants = sample_participants(&mut sampler, j, participation);
        let contributions: Vec<Result<ParamVector>> =
            exec::map_range(participants.len(), |p| match &members[participants[p]] {
                Member::Byzantine(v) => Ok(v.clone()),
                Member::Data(client) => {
                    if cfg.local_steps == 1 {
                        let (g, l) = gradient_and_loss(kind, &w, &client.train())?;
                        if !l.is_finite() || l > DIVERGENCE_LOSS_LIMIT {
                            return Err(Error::Diverged { loss: l });
                        }
                        Ok(g)
                    } else {
                        models::local_train(kind, &w, &client.train(), &local_cfg)
                    }
                }
            });
        let contributions = contributions.into_iter().collect::<Result<Vec<_>>>()?;
        let agg = trmean(&contributions, cfg.trim)?;
        if cfg.local_steps == 1 {
            for (wv, gv) in w.0.iter_mut().zip(&agg.0) {
                *wv -= cfg.learning_rate * gv;
            }
            w = models::project(&w, cfg.projection_diameter);
        } else {
            w = agg;
        }
    }
    if !w.is_finite() {
        return Err(Error::Diverged { loss: f64::INFINITY });
    }
    Ok(w)
}
