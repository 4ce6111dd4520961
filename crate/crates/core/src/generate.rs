//! Seeded random instances with properties known by construction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ocp::{OcpError, OcpInstance};
use crate::scalar::Scalar;

pub fn gaussian_matrix<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<T> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        T::lit(x)
    })
}

pub fn gaussian_vector<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<T> {
    DVector::from_fn(len, |_, _| {
        let x: f64 = StandardNormal.sample(rng);
        T::lit(x)
    })
}

/// Well-conditioned random basis `I + 0.3 G / √n`.
fn mild_basis<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<T> {
    let g: DMatrix<T> = gaussian_matrix(rng, n, n);
    DMatrix::identity(n, n) + g * T::lit(0.3 / (n as f64).sqrt())
}

/// Matrix `V D V⁻¹` with a spectrum known by construction.
#[derive(Debug, Clone)]
pub struct PlantedSpectrum<T: Scalar> {
    pub matrix: DMatrix<T>,
    /// Eigenvalues as `(re, im)` pairs.
    pub eigenvalues: Vec<(f64, f64)>,
}

impl<T: Scalar> PlantedSpectrum<T> {
    pub fn abscissa(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::NEG_INFINITY, |acc, e| acc.max(e.0))
    }
}

/// Eigenvalues with the given real parts. With `complex_pairs`, a pair of
/// equal consecutive real parts may become a conjugate pair with random
/// imaginary part.
pub fn matrix_with_spectrum<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    real_parts: &[f64],
    complex_pairs: bool,
) -> PlantedSpectrum<T> {
    let n = real_parts.len();
    let mut d = DMatrix::<T>::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if complex_pairs && i + 1 < n && real_parts[i] == real_parts[i + 1] && rng.random_bool(0.5) {
            let re = real_parts[i];
            let im = rng.random_range(0.2..2.0);
            d[(i, i)] = T::lit(re);
            d[(i + 1, i + 1)] = T::lit(re);
            d[(i, i + 1)] = T::lit(im);
            d[(i + 1, i)] = T::lit(-im);
            eigenvalues.push((re, im));
            eigenvalues.push((re, -im));
            i += 2;
        } else {
            d[(i, i)] = T::lit(real_parts[i]);
            eigenvalues.push((real_parts[i], 0.0));
            i += 1;
        }
    }
    let v = mild_basis::<T, R>(rng, n);
    let v_inv = v.clone().try_inverse().expect("mild basis is invertible");
    PlantedSpectrum {
        matrix: v * d * v_inv,
        eigenvalues,
    }
}

/// Real parts for a random spectrum of size `n` with abscissa `abscissa`:
/// the remaining parts lie up to `spread` below it, duplicated in pairs so
/// that conjugate pairs can be planted.
pub fn real_parts_below<R: Rng + ?Sized>(rng: &mut R, n: usize, abscissa: f64, spread: f64) -> Vec<f64> {
    let mut parts = Vec::with_capacity(n);
    while parts.len() < n {
        let x = if parts.is_empty() {
            abscissa
        } else {
            abscissa - rng.random_range(0.0..spread)
        };
        parts.push(x);
        if parts.len() < n && rng.random_bool(0.5) {
            parts.push(x);
        }
    }
    parts
}

/// Stable matrix with spectral abscissa `-decay`.
pub fn stable_matrix<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, decay: f64) -> DMatrix<T> {
    let parts = real_parts_below(rng, n, -decay, 2.0);
    matrix_with_spectrum(rng, &parts, true).matrix
}

/// Detectable pair `(A, C)`: `A = S + U Vᵀ` with `S` stable and the
/// perturbation directions `Vᵀ` among the rows of `C`, so that
/// `F = −[U 0]` stabilizes `A + FC`. Requires `rank ≤ p`.
#[derive(Debug, Clone)]
pub struct DetectablePair<T: Scalar> {
    pub a: DMatrix<T>,
    pub c: DMatrix<T>,
    /// A stabilizing output injection known by construction.
    pub detector: DMatrix<T>,
}

pub fn detectable_pair<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize, rank: usize) -> DetectablePair<T> {
    assert!(rank <= p, "perturbation rank exceeds output dimension");
    let decay = rng.random_range(0.1..1.0);
    let s = stable_matrix::<T, R>(rng, n, decay);
    let u: DMatrix<T> = gaussian_matrix(rng, n, rank) * T::lit(1.5);
    let vt: DMatrix<T> = gaussian_matrix(rng, rank, n);
    let a = &s + &u * &vt;
    let mut c = gaussian_matrix::<T, R>(rng, p, n);
    c.view_mut((0, 0), (rank, n)).copy_from(&vt);
    let mut detector = DMatrix::zeros(n, p);
    detector.view_mut((0, 0), (n, rank)).copy_from(&(-u));
    DetectablePair { a, c, detector }
}

/// Optimal control instance on a detectable pair with coercive
/// `K = I + 0.3 G`, random `B`, `z`, `v`.
pub fn coercive_instance<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: usize,
) -> Result<OcpInstance<T>, OcpError> {
    let rank = rng.random_range(0..=p.min(n));
    let pair = detectable_pair::<T, R>(rng, n, p, rank);
    let b = gaussian_matrix::<T, R>(rng, n, m);
    let k = DMatrix::identity(m, m) + gaussian_matrix::<T, R>(rng, m, m) * T::lit(0.3 / (m as f64).sqrt());
    let z = gaussian_vector(rng, n);
    let v = gaussian_vector(rng, m);
    OcpInstance::new_deferred(pair.a, b, pair.c, k, z, v)
}
