//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.
//!
//! Each rotation first removes the phase of the pivot `a[p][q]` with a
//! diagonal unitary, then zeroes the now-real symmetric 2x2 block with a
//! real Givens rotation. Sweeps run in fixed (p, q) order, so the output is
//! a deterministic function of the input bits.

use super::{ComplexMatrix, ComplexVector, C64, ZERO};
use crate::error::{Error, Result};

pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;
/// Relative cluster width under which eigenvalues count as degenerate.
pub(crate) const DEGENERACY_REL_TOL: f64 = 1e-9;

/// Spectral decomposition `h = V diag(values) V†`.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigh {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, ordered like `values`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> ComplexVector {
        self.vectors.column(k)
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for r in 0..n {
            for c in 0..n {
                scaled[(r, c)] *= self.values[c];
            }
        }
        &scaled * &self.vectors.adjoint()
    }
}

pub fn eigh(h: &ComplexMatrix, tol: f64) -> Result<Eigh> {
    if !h.is_square() {
        return Err(Error::Shape(format!(
            "eigh needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let deviation = h.hermiticity_deviation();
    if deviation > tol {
        return Err(Error::NonHermitian {
            deviation,
            tolerance: tol,
        });
    }
    let n = h.rows();
    let mut a = h.hermitian_part();
    for k in 0..n {
        a[(k, k)] = C64::new(a[(k, k)].re, 0.0);
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = h.max_norm();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 0.5 * f64::EPSILON * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut columns: Vec<ComplexVector> = order.iter().map(|&k| v.column(k)).collect();

    // Re-orthonormalize inside degenerate clusters.
    let cluster_tol = DEGENERACY_REL_TOL * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= cluster_tol {
            end += 1;
        }
        if end - start > 1 {
            gram_schmidt(&mut columns[start..end]);
        }
        start = end;
    }

    Ok(Eigh {
        values,
        vectors: ComplexMatrix::from_columns(&columns)?,
    })
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Skip pivots already negligible against the diagonal.
    if mag <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // J = diag(1, conj(phase)) * [[c, s], [-s, c]] on the (p, q) block.
    let j_pp = C64::new(c, 0.0);
    let j_pq = C64::new(s, 0.0);
    let j_qp = -phase.conj() * s;
    let j_qq = phase.conj() * c;

    let n = a.rows();
    // A <- A J
    for r in 0..n {
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        a[(r, p)] = arp * j_pp + arq * j_qp;
        a[(r, q)] = arp * j_pq + arq * j_qq;
    }
    // A <- J† A
    for col in 0..n {
        let apc = a[(p, col)];
        let aqc = a[(q, col)];
        a[(p, col)] = j_pp.conj() * apc + j_qp.conj() * aqc;
        a[(q, col)] = j_pq.conj() * apc + j_qq.conj() * aqc;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
    // V <- V J
    for r in 0..n {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp * j_pp + vrq * j_qp;
        v[(r, q)] = vrp * j_pq + vrq * j_qq;
    }
}

/// Modified Gram-Schmidt in place.
fn gram_schmidt(columns: &mut [ComplexVector]) {
    for k in 0..columns.len() {
        let mut w = columns[k].clone();
        for prev in &columns[..k] {
            let overlap = prev.inner(&w).expect("equal dims");
            w = ComplexVector::new(
                w.iter()
                    .zip(prev.iter())
                    .map(|(x, y)| x - overlap * y)
                    .collect(),
            )
            .expect("finite");
        }
        let norm = w.norm();
        columns[k] = w.scale(C64::new(1.0 / norm, 0.0));
    }
}
