use log::{debug, warn};
use rand::Rng;

use super::{
    normalize_gradient, ols_gradient, outer_step, perturb, surrogate_loss, EpochLog, LossRecord, OuterConfig,
    OuterState,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::faultmem::{corrupt_weights, network_energy, EnergyModel, NoiseVector};
use crate::net::{backward_ste, lr_schedule, sgd_inner_step, BinaryNetwork, InnerOptConfig, Velocity};

/// Per-epoch training log row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate shared by the inner and outer updates this epoch.
    pub lr: f64,
    /// Noise vector at the end of the epoch.
    pub p: Vec<f64>,
    pub energy: f64,
    pub mean_loss: f64,
    pub best_loss: f64,
    /// Fitted outer slopes; `None` when no regression ran.
    pub slopes: Option<Vec<f64>>,
    /// Norm of the normalized gradient (1, or 0 for a skipped update).
    pub unit_norm: Option<f64>,
    pub outer_update: bool,
    /// Range of the perturbed rates applied during the epoch.
    pub p_tilde_min: f64,
    pub p_tilde_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Best minibatch loss after each minibatch.
    pub best_loss_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub noise: NoiseVector,
    pub network: BinaryNetwork,
    pub report: TrainReport,
}

enum NoiseSchedule<'a> {
    Fixed(NoiseVector),
    Lanmax(&'a OuterConfig),
}

/// Joint training of the weights and the per-layer noise vector.
///
/// Outer measurements and updates run while the epoch counter is at most
/// `outer.s`; afterwards the weights are fine-tuned at the final rates.
pub fn train_lanmax<R: Rng + ?Sized>(
    data: &Dataset,
    net: BinaryNetwork,
    inner: &InnerOptConfig,
    outer: &OuterConfig,
    energy: &EnergyModel,
    rng: &mut R,
) -> Result<TrainOutcome> {
    outer.validate(inner.epochs)?;
    run(data, net, inner, NoiseSchedule::Lanmax(outer), energy, rng)
}

/// Uniform (or any fixed) noise training: weights are read at `p` on every
/// minibatch and `p` never changes.
pub fn train_fixed_noise<R: Rng + ?Sized>(
    data: &Dataset,
    net: BinaryNetwork,
    inner: &InnerOptConfig,
    p: &NoiseVector,
    energy: &EnergyModel,
    rng: &mut R,
) -> Result<TrainOutcome> {
    run(data, net, inner, NoiseSchedule::Fixed(p.clone()), energy, rng)
}

fn run<R: Rng + ?Sized>(
    data: &Dataset,
    mut net: BinaryNetwork,
    inner: &InnerOptConfig,
    schedule: NoiseSchedule<'_>,
    energy: &EnergyModel,
    rng: &mut R,
) -> Result<TrainOutcome> {
    inner.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if data.dim() != net.input_dim() {
        return Err(Error::Shape(format!(
            "data has {} features, network expects {}",
            data.dim(),
            net.input_dim()
        )));
    }
    if energy.layer_sizes != net.weight_counts() {
        return Err(Error::Config("energy model layer sizes do not match the network".into()));
    }
    let layers = net.num_layers();
    let (outer, mut state) = match schedule {
        NoiseSchedule::Lanmax(cfg) => (Some(cfg), OuterState::new(layers, cfg)?),
        NoiseSchedule::Fixed(p) => {
            if p.len() != layers {
                return Err(Error::Config(format!("noise vector has {} rates for {layers} layers", p.len())));
            }
            let mut state = OuterState::new(layers, &OuterConfig::default())?;
            state.p = p;
            (None, state)
        }
    };
    let s = outer.map_or(0, |c| c.s);

    let mut velocity = Velocity::zeros(&net);
    let mut report = TrainReport::default();

    for epoch in 1..=inner.epochs {
        state.epoch = epoch;
        let lr = lr_schedule(epoch, inner);
        let active = outer.filter(|_| epoch <= s);
        let batches = data.epoch_batches(inner.batch_size, rng);
        let mut log = EpochLog::new();
        let mut loss_sum = 0.0;
        let mut p_tilde_min = f64::INFINITY;
        let mut p_tilde_max = f64::NEG_INFINITY;

        for (k, batch) in batches.iter().enumerate() {
            let (x, y) = data.training_batch(batch, rng);
            let applied = match active {
                Some(cfg) => {
                    let (lo, hi) = cfg.bounds();
                    perturb(&state.p, cfg.h, rng, lo, hi)
                }
                None => state.p.clone(),
            };
            for v in applied.values() {
                p_tilde_min = p_tilde_min.min(v);
                p_tilde_max = p_tilde_max.max(v);
            }
            let read = corrupt_weights(&net.binary_weights(), &applied, rng)?;
            let (loss, grads) = backward_ste(&net, &read, &x, &y)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite minibatch loss at epoch {epoch}, batch {}",
                    k + 1
                )));
            }
            state.observe_loss(loss);
            report.best_loss_trace.push(state.best_loss);
            loss_sum += loss;

            if let Some(cfg) = active {
                let surrogate = surrogate_loss(loss, state.best_loss, &applied, cfg, energy)?;
                if !surrogate.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite surrogate at epoch {epoch}, batch {}: loss={loss}, best={}, p={:?}",
                        k + 1,
                        state.best_loss,
                        applied.values()
                    )));
                }
                log.push(LossRecord {
                    perturbed_p: applied,
                    surrogate,
                });
            }
            sgd_inner_step(&mut net, &grads, &mut velocity, inner, epoch)?;
        }

        let mut slopes = None;
        let mut unit_norm = None;
        let mut outer_update = false;
        if let Some(cfg) = active {
            match ols_gradient(&log) {
                Ok(g) => {
                    let unit = normalize_gradient(&g);
                    let norm = unit.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        outer_step(&mut state, &unit, lr, cfg)?;
                        outer_update = true;
                    } else {
                        debug!("epoch {epoch}: zero outer gradient, noise vector unchanged");
                    }
                    slopes = Some(g);
                    unit_norm = Some(norm);
                }
                Err(e @ Error::InsufficientData { .. }) => {
                    warn!("epoch {epoch}: outer regression skipped: {e}");
                }
                Err(e) => return Err(e),
            }
        }

        let (_, e_norm) = network_energy(&state.p, energy)?;
        report.epochs.push(EpochRecord {
            epoch,
            lr,
            p: state.p.values(),
            energy: e_norm,
            mean_loss: loss_sum / batches.len() as f64,
            best_loss: state.best_loss,
            slopes,
            unit_norm,
            outer_update,
            p_tilde_min,
            p_tilde_max,
        });
        debug!(
            "epoch {epoch}: lr={lr} loss={:.4} E={e_norm:.4} p={:?}",
            loss_sum / batches.len() as f64,
            state.p.values()
        );
    }

    Ok(TrainOutcome {
        noise: state.p,
        network: net,
        report,
    })
}
