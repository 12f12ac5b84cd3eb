//! Unreliable weight memory.
//!
//! Every stored bit is read through an independent binary symmetric channel
//! whose flip probability is set per layer. Lowering the supply energy of a
//! memory raises its fault rate following `eta(p) = -ln(p) / a`, and the
//! energy of a whole network is `zeta * sum_l eta(p_l) * n_l`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest fault rate a binary memory can meaningfully have.
pub const MAX_FAULT_RATE: f64 = 0.5;

/// Per-bit flip probability at read time, in `[0, 0.5]`.
///
/// Zero is admitted so reliable baselines can be expressed; the outer
/// optimizer keeps its own rates at or above its configured floor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FaultRate(f64);

impl FaultRate {
    pub const ZERO: FaultRate = FaultRate(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=MAX_FAULT_RATE).contains(&value) {
            return Err(Error::Domain {
                what: "fault rate",
                value,
            });
        }
        Ok(FaultRate(value))
    }

    /// Clamp an arbitrary value into `[lo, hi]`. Both bounds must already be
    /// valid fault rates.
    pub fn clamped(value: f64, lo: FaultRate, hi: FaultRate) -> Self {
        FaultRate(value.clamp(lo.0, hi.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FaultRate {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        FaultRate::new(value)
    }
}

impl From<FaultRate> for f64 {
    fn from(rate: FaultRate) -> f64 {
        rate.0
    }
}

/// One fault rate per weight-bearing layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseVector {
    rates: Vec<FaultRate>,
}

impl NoiseVector {
    pub fn new(rates: Vec<FaultRate>) -> Self {
        NoiseVector { rates }
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| FaultRate::new(v))
            .collect::<Result<Vec<_>>>()
            .map(NoiseVector::new)
    }

    pub fn uniform(rate: FaultRate, layers: usize) -> Self {
        NoiseVector {
            rates: vec![rate; layers],
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[FaultRate] {
        &self.rates
    }

    pub fn values(&self) -> Vec<f64> {
        self.rates.iter().map(|r| r.get()).collect()
    }

    pub fn sum(&self) -> f64 {
        self.rates.iter().map(|r| r.get()).sum()
    }

    /// True when no layer can fault, so reads are deterministic.
    pub fn is_reliable(&self) -> bool {
        self.rates.iter().all(|r| r.get() == 0.0)
    }
}

/// Exponential energy/reliability law and the layer geometry it applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    /// Technology parameter `a`.
    pub a: f64,
    /// Bits per stored parameter (1 for binary weights, 16 for FP16 bookkeeping).
    pub zeta: u32,
    /// Parameter count `n_l` of every weight-bearing layer.
    pub layer_sizes: Vec<usize>,
    /// Energy per bit assigned to a perfectly reliable memory (`p = 0`).
    pub reliable_eta: f64,
}

pub const DEFAULT_TECHNOLOGY_A: f64 = 12.8;

impl EnergyModel {
    pub fn new(a: f64, zeta: u32, layer_sizes: Vec<usize>) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain {
                what: "technology parameter a",
                value: a,
            });
        }
        if zeta == 0 {
            return Err(Error::Config("bits per parameter must be at least 1".into()));
        }
        if let Some(pos) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::Config(format!("layer {} has no parameters", pos + 1)));
        }
        Ok(EnergyModel {
            a,
            zeta,
            layer_sizes,
            reliable_eta: 1.0,
        })
    }

    /// Same geometry with a different bit width.
    pub fn with_zeta(&self, zeta: u32) -> Result<Self> {
        EnergyModel::new(self.a, zeta, self.layer_sizes.clone())
    }

    pub fn total_parameters(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    /// Energy of the reliable 1-bit network with this geometry.
    pub fn baseline_energy(&self) -> f64 {
        self.reliable_eta * self.total_parameters() as f64
    }
}

/// Energy per bit at fault rate `p`.
pub fn eta(p: f64, model: &EnergyModel) -> Result<f64> {
    if !(0.0..=MAX_FAULT_RATE).contains(&p) {
        return Err(Error::Domain {
            what: "fault rate",
            value: p,
        });
    }
    if p == 0.0 {
        return Ok(model.reliable_eta);
    }
    Ok(-p.ln() / model.a)
}

/// Read one stored sign bit through the channel.
pub fn bsc_sample<R: Rng + ?Sized>(bit: f64, p: FaultRate, rng: &mut R) -> f64 {
    if rng.random::<f64>() < p.get() {
        -bit
    } else {
        bit
    }
}

/// Read every layer's sign weights through its own channel. Inputs are left
/// untouched; each call draws fresh faults.
pub fn corrupt_weights<R: Rng + ?Sized>(
    weights: &[Vec<f64>],
    p: &NoiseVector,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if weights.len() != p.len() {
        return Err(Error::Config(format!(
            "noise vector has {} rates for {} layers",
            p.len(),
            weights.len()
        )));
    }
    Ok(weights
        .iter()
        .zip(p.rates())
        .map(|(layer, &rate)| {
            if rate.get() == 0.0 {
                layer.clone()
            } else {
                layer.iter().map(|&w| bsc_sample(w, rate, rng)).collect()
            }
        })
        .collect())
}

/// Memory energy of the network: `(absolute, normalized)`, normalized against
/// the reliable 1-bit network of the same geometry.
pub fn network_energy(p: &NoiseVector, model: &EnergyModel) -> Result<(f64, f64)> {
    if p.len() != model.layer_sizes.len() {
        return Err(Error::Config(format!(
            "noise vector has {} rates for {} layers",
            p.len(),
            model.layer_sizes.len()
        )));
    }
    let mut per_bit = 0.0;
    for (rate, &n) in p.rates().iter().zip(&model.layer_sizes) {
        per_bit += eta(rate.get(), model)? * n as f64;
    }
    let absolute = model.zeta as f64 * per_bit;
    Ok((absolute, absolute / model.baseline_energy()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(sizes: Vec<usize>, zeta: u32) -> EnergyModel {
        EnergyModel::new(DEFAULT_TECHNOLOGY_A, zeta, sizes).unwrap()
    }

    #[test]
    fn eta_reference_points() {
        let m = model(vec![1], 1);
        assert_eq!(eta((-12.8f64).exp(), &m).unwrap(), 1.0);
        assert_eq!(eta(0.0, &m).unwrap(), 1.0);
        // -ln(1e-4) / 12.8
        assert!((eta(1e-4, &m).unwrap() - 0.719_558).abs() < 1e-6);
    }

    #[test]
    fn eta_rejects_out_of_range() {
        let m = model(vec![1], 1);
        assert!(matches!(eta(-1e-9, &m), Err(Error::Domain { .. })));
        assert!(matches!(eta(0.500001, &m), Err(Error::Domain { .. })));
        assert!(eta(0.5, &m).is_ok());
    }

    #[test]
    fn bsc_zero_rate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(bsc_sample(1.0, FaultRate::ZERO, &mut rng), 1.0);
        }
    }

    #[test]
    fn bsc_half_rate_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let half = FaultRate::new(0.5).unwrap();
        let n = 100_000;
        let plus = (0..n).filter(|_| bsc_sample(-1.0, half, &mut rng) > 0.0).count();
        let sigma = (0.25 / n as f64).sqrt();
        assert!((plus as f64 / n as f64 - 0.5).abs() < 4.0 * sigma);
    }

    #[test]
    fn bsc_flip_fraction_matches_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = 0.1;
        let n = 1_000_000;
        let rate = FaultRate::new(p).unwrap();
        let flips = (0..n).filter(|_| bsc_sample(1.0, rate, &mut rng) < 0.0).count();
        let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((flips as f64 / n as f64 - p).abs() <= bound);
    }

    #[test]
    fn corrupt_reliable_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = vec![vec![1.0, -1.0, 1.0], vec![-1.0; 5]];
        let p = NoiseVector::uniform(FaultRate::ZERO, 2);
        assert_eq!(corrupt_weights(&w, &p, &mut rng).unwrap(), w);
    }

    #[test]
    fn corrupt_flip_fraction_per_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let w = vec![vec![1.0; n]];
        let p = 0.02;
        let out = corrupt_weights(&w, &NoiseVector::from_values(&[p]).unwrap(), &mut rng).unwrap();
        let flipped = out[0].iter().filter(|&&v| v < 0.0).count() as f64 / n as f64;
        assert!((flipped - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn corrupt_half_rate_mean_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 200_000;
        let w = vec![vec![1.0; n]];
        let out = corrupt_weights(&w, &NoiseVector::from_values(&[0.5]).unwrap(), &mut rng).unwrap();
        let mean = out[0].iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn corrupt_length_mismatch_is_config_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = vec![vec![1.0; 3]; 2];
        let p = NoiseVector::uniform(FaultRate::ZERO, 3);
        assert!(matches!(corrupt_weights(&w, &p, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn energy_reference_points() {
        let m = model(vec![4, 8], 1);
        let unit = (-12.8f64).exp();
        let (abs, norm) = network_energy(&NoiseVector::from_values(&[unit, unit]).unwrap(), &m).unwrap();
        assert!((abs - 12.0).abs() < 1e-12);
        assert!((norm - 1.0).abs() < 1e-12);

        let fp16 = model(vec![4, 8], 16);
        let (abs, norm) = network_energy(&NoiseVector::uniform(FaultRate::ZERO, 2), &fp16).unwrap();
        assert_eq!((abs, norm), (192.0, 16.0));

        let single = model(vec![100], 1);
        let (_, norm) = network_energy(&NoiseVector::from_values(&[1e-4]).unwrap(), &single).unwrap();
        assert!((norm - 0.719_558).abs() < 1e-6);
    }

    #[test]
    fn energy_length_mismatch() {
        let m = model(vec![4, 8], 1);
        assert!(network_energy(&NoiseVector::uniform(FaultRate::ZERO, 1), &m).is_err());
    }

    #[test]
    fn fault_rate_serde_validates() {
        let p: NoiseVector = serde_json::from_str("[0.1, 0.0]").unwrap();
        assert_eq!(p.values(), vec![0.1, 0.0]);
        assert!(serde_json::from_str::<NoiseVector>("[0.7]").is_err());
    }

    proptest! {
        #[test]
        fn eta_strictly_decreasing(p1 in 1e-9f64..0.5, frac in 0.01f64..0.99) {
            let m = model(vec![1], 1);
            let p2 = p1 + (0.5 - p1) * frac;
            prop_assume!(p2 > p1);
            prop_assert!(eta(p1, &m).unwrap() > eta(p2, &m).unwrap());
        }

        #[test]
        fn energy_decreasing_in_each_coordinate(
            rates in proptest::collection::vec(1e-6f64..0.4, 1..6),
            sizes in proptest::collection::vec(1usize..1000, 6),
            idx in 0usize..6,
            bump in 1e-3f64..0.1,
        ) {
            let l = rates.len();
            let idx = idx % l;
            let m = model(sizes[..l].to_vec(), 1);
            let base = NoiseVector::from_values(&rates).unwrap();
            let mut raised = rates.clone();
            raised[idx] += bump;
            let raised = NoiseVector::from_values(&raised).unwrap();
            prop_assert!(network_energy(&raised, &m).unwrap().0 < network_energy(&base, &m).unwrap().0);
        }

        #[test]
        fn corrupt_stays_binary_and_reproducible(
            seed in any::<u64>(),
            p in 0.0f64..=0.5,
            len in 1usize..200,
        ) {
            let w = vec![(0..len).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect::<Vec<_>>()];
            let noise = NoiseVector::from_values(&[p]).unwrap();
            let a = corrupt_weights(&w, &noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = corrupt_weights(&w, &noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert!(a[0].iter().all(|&v| v == 1.0 || v == -1.0));
            prop_assert_eq!(a, b);
        }
    }
}
