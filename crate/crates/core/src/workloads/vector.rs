use rayon::prelude::*;

use super::Parallelism;

/// Dense vector repeatedly multiplied by a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorWorkload {
    pub values: Vec<f64>,
    pub scale_constant: f64,
}

impl VectorWorkload {
    pub fn new(values: Vec<f64>, scale_constant: f64) -> Self {
        Self {
            values,
            scale_constant,
        }
    }

    /// Values `1 + i / len`, a deterministic non-constant start.
    pub fn ramp(length: usize, scale_constant: f64) -> Self {
        let n = length.max(1) as f64;
        Self::new(
            (0..length).map(|i| 1.0 + i as f64 / n).collect(),
            scale_constant,
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&mut self, par: Parallelism) {
        let c = self.scale_constant;
        match par {
            Parallelism::Serial => self.values.iter_mut().for_each(|v| *v *= c),
            Parallelism::Rayon => self.values.par_iter_mut().for_each(|v| *v *= c),
        }
    }

    pub(crate) fn arrays(&self) -> [&[f64]; 1] {
        [&self.values]
    }
}

pub fn vector_scale_step(mut w: VectorWorkload) -> VectorWorkload {
    w.step(Parallelism::Serial);
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn unit_scale_is_identity() {
        let w = VectorWorkload::ramp(100, 1.0);
        assert_eq!(vector_scale_step(w.clone()), w);
    }

    #[test]
    fn doubling_ten_times() {
        let mut w = VectorWorkload::new(vec![1.0; 64], 2.0);
        for _ in 0..10 {
            w = vector_scale_step(w);
        }
        assert!(w.values.iter().all(|&v| v == 1024.0));
        assert_eq!(w.len(), 64);
    }

    #[test]
    fn matches_reference_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..1000).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let c = rng.gen_range(0.5..1.5);
        let out = vector_scale_step(VectorWorkload::new(values.clone(), c));
        let mut expected = Vec::with_capacity(values.len());
        for v in &values {
            expected.push(v * c);
        }
        assert_eq!(out.values, expected);
    }
}
