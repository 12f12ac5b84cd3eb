//! In-memory labelled datasets and minibatch assembly.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::net::InputShape;

/// Zero-fill shift range used by pad-and-crop augmentation.
pub const AUGMENT_PAD: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub shape: InputShape,
    pub classes: usize,
    /// Row-major `[len, shape.dim()]`.
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    /// Random horizontal flips and pad-and-crop shifts on training batches.
    /// Only meaningful for image-shaped data.
    pub augment: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

impl Dataset {
    pub fn new(shape: InputShape, classes: usize, inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let dim = shape.dim();
        if dim == 0 || inputs.len() != labels.len() * dim {
            return Err(Error::Shape(format!(
                "{} input values for {} samples of dimension {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Shape(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Dataset {
            shape,
            classes,
            inputs,
            labels,
            augment: false,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.inputs[i * d..(i + 1) * d]
    }

    pub fn gather(&self, indices: &[usize]) -> (Vec<f64>, Vec<usize>) {
        let mut x = Vec::with_capacity(indices.len() * self.dim());
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.labels[i]);
        }
        (x, y)
    }

    /// Shuffled minibatch index lists for one epoch. The trailing partial
    /// batch is dropped unless it would be the only one.
    pub fn epoch_batches<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        let batch = batch_size.min(self.len()).max(1);
        order
            .chunks(batch)
            .filter(|c| c.len() == batch)
            .map(<[usize]>::to_vec)
            .collect()
    }

    /// Training batch, augmented when enabled on image data.
    pub fn training_batch<R: Rng + ?Sized>(&self, indices: &[usize], rng: &mut R) -> (Vec<f64>, Vec<usize>) {
        let (mut x, y) = self.gather(indices);
        if self.augment && self.shape.height > 1 && self.shape.width > 1 {
            for row in x.chunks_exact_mut(self.dim()) {
                augment_image(row, self.shape, rng);
            }
        }
        (x, y)
    }

    /// Score-oriented chunks of the whole set, in order.
    pub fn chunks(&self, size: usize) -> impl Iterator<Item = (&[f64], &[usize])> {
        let size = size.max(1);
        self.inputs
            .chunks(size * self.dim())
            .zip(self.labels.chunks(size))
    }
}

fn augment_image<R: Rng + ?Sized>(img: &mut [f64], shape: InputShape, rng: &mut R) {
    let (h, w) = (shape.height, shape.width);
    let flip = rng.random_bool(0.5);
    let pad = AUGMENT_PAD as i64;
    let dy = rng.random_range(-pad..=pad);
    let dx = rng.random_range(-pad..=pad);
    let src = img.to_vec();
    for c in 0..shape.channels {
        let plane = &src[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let sy = y as isize + dy as isize;
                let sx0 = x as isize + dx as isize;
                let sx = if flip { w as isize - 1 - sx0 } else { sx0 };
                let v = if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                    0.0
                } else {
                    plane[sy as usize * w + sx as usize]
                };
                img[c * h * w + y * w + x] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize) -> Dataset {
        let inputs = (0..n * 2).map(|v| v as f64).collect();
        let labels = (0..n).map(|i| i % 3).collect();
        Dataset::new(InputShape::flat(2), 3, inputs, labels).unwrap()
    }

    #[test]
    fn batches_cover_without_partial() {
        let d = toy(10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = d.epoch_batches(4, &mut rng);
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|c| c.len() == 4));
        let small = d.epoch_batches(64, &mut rng);
        assert_eq!(small.len(), 1);
        assert_eq!(small[0].len(), 10);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(Dataset::new(InputShape::flat(1), 2, vec![0.0], vec![2]).is_err());
        assert!(Dataset::new(InputShape::flat(2), 2, vec![0.0], vec![1]).is_err());
    }

    #[test]
    fn augmentation_preserves_shape_and_values() {
        let shape = InputShape {
            channels: 1,
            height: 6,
            width: 6,
        };
        let inputs: Vec<f64> = (0..36).map(|v| v as f64 + 1.0).collect();
        let mut d = Dataset::new(shape, 2, inputs.clone(), vec![1]).unwrap();
        d.augment = true;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (x, y) = d.training_batch(&[0], &mut rng);
            assert_eq!(y, vec![1]);
            assert_eq!(x.len(), 36);
            assert!(x.iter().all(|v| *v == 0.0 || inputs.contains(v)));
        }
    }
}
