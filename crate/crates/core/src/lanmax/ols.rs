use nalgebra::{DMatrix, DVector};

use super::EpochLog;
use crate::error::{Error, Result};

/// Least-squares slopes of `L_k ~ b0 + sum_l b_l * p_{k,l}` over one epoch.
///
/// The intercept is eliminated by centering. The centered problem is solved
/// through the SVD with small singular values discarded, which gives the
/// minimum-norm solution when the design is rank deficient; a column that
/// never varied gets slope zero.
pub fn ols_gradient(log: &EpochLog) -> Result<Vec<f64>> {
    let records = log.records();
    let layers = records.first().map_or(0, |r| r.perturbed_p.len());
    let needed = layers + 2;
    if records.len() < needed || layers == 0 {
        return Err(Error::InsufficientData {
            needed: needed.max(2),
            got: records.len(),
        });
    }
    if records.iter().any(|r| r.perturbed_p.len() != layers) {
        return Err(Error::Shape("epoch log mixes noise vectors of different lengths".into()));
    }
    let m = records.len();

    let mut design = DMatrix::<f64>::zeros(m, layers);
    for (k, r) in records.iter().enumerate() {
        for (l, rate) in r.perturbed_p.rates().iter().enumerate() {
            design[(k, l)] = rate.get();
        }
    }
    for l in 0..layers {
        let mut col = design.column_mut(l);
        let mean = col.mean();
        let spread = col.iter().fold(0.0f64, |acc, v| acc.max((v - mean).abs()));
        if spread <= 1e-12 * (1.0 + mean.abs()) {
            col.fill(0.0);
        } else {
            col.add_scalar_mut(-mean);
        }
    }
    let target = DVector::from_iterator(m, records.iter().map(|r| r.surrogate));
    let target = target.add_scalar(-target.mean());

    let svd = design.svd(true, true);
    let largest = svd.singular_values.max();
    let cutoff = (largest * m.max(layers) as f64 * f64::EPSILON).max(f64::MIN_POSITIVE);
    let slopes = svd
        .solve(&target, cutoff)
        .map_err(|e| Error::Numeric(format!("least-squares solve failed: {e}")))?;
    Ok(slopes.iter().copied().collect())
}
