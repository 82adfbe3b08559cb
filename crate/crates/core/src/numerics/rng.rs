use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ComplexMatrix, ComplexVector, C64};
use crate::error::{Error, Result};

/// Reproducible random stream identified by `(seed, stream)`.
///
/// Each logical task owns one stream. Parallel work derives its streams from
/// the shard index so the output never depends on scheduling.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Fresh generator on another stream of the same seed.
    pub fn substream(&self, stream: u64) -> SeededRng {
        SeededRng::new(self.seed, stream)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    fn complex_normal(&mut self) -> C64 {
        C64::new(self.standard_normal(), self.standard_normal())
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub fn sample_gaussian(mean: f64, sigma: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) || !mean.is_finite() {
        return Err(Error::Parameter(format!(
            "gaussian needs finite mean and sigma > 0, got mean={mean}, sigma={sigma}"
        )));
    }
    Ok(mean + sigma * rng.standard_normal())
}

/// Haar-distributed unit vector: normalized i.i.d. complex Gaussian amplitudes.
pub fn haar_random_state(dim: usize, rng: &mut SeededRng) -> Result<ComplexVector> {
    if dim == 0 {
        return Err(Error::Parameter("dimension must be at least 1".into()));
    }
    loop {
        let v: Vec<C64> = (0..dim).map(|_| rng.complex_normal()).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-150 {
            return ComplexVector::new(v.into_iter().map(|z| z / norm).collect());
        }
    }
}

/// Gaussian-unitary-ensemble style Hermitian matrix `(G + G†) / 2`.
pub fn random_hermitian(dim: usize, rng: &mut SeededRng) -> ComplexMatrix {
    let data = (0..dim * dim).map(|_| rng.complex_normal()).collect();
    let g = ComplexMatrix::from_row_major(dim, dim, data).expect("finite gaussian entries");
    g.hermitian_part()
}

/// Haar unitary from Gram-Schmidt on a complex Ginibre matrix.
pub fn random_unitary(dim: usize, rng: &mut SeededRng) -> ComplexMatrix {
    let mut columns: Vec<ComplexVector> = Vec::with_capacity(dim);
    while columns.len() < dim {
        let mut v: Vec<C64> = (0..dim).map(|_| rng.complex_normal()).collect();
        for q in &columns {
            let overlap: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q.iter()) {
                *vi -= overlap * qi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            columns.push(ComplexVector::new(v.into_iter().map(|z| z / norm).collect()).unwrap());
        }
    }
    ComplexMatrix::from_columns(&columns).unwrap()
}
