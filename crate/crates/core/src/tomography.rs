//! Linear-inversion tomography of the transient operator `R_if`.
//!
//! With a Hilbert-Schmidt orthonormal Hermitian basis `{B_k}` the transient
//! operator expands as `R = sum_k Tr(R B_k) B_k`, and `Tr(R B_k)` is the weak
//! value of `B_k`. Complex weak values give back the full non-Hermitian `R`;
//! their real parts alone give its Hermitian part.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::{ComplexMatrix, C64};
use crate::simulator::{derive_seed, extrapolate_weak_value_with, Readout, SimConfig};
use crate::states::{Observable, PureState, Scenario};
use crate::weak::{transient_density, weak_value_of_matrix, WeakConfig};

const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Default couplings for simulated tomography, in units of the pointer width.
///
/// Spread up to the `g <= sigma/2` limit of the extrapolation: the intercept
/// error is dominated by the smallest coupling's `1/g` noise.
pub const TOMOGRAPHY_COUPLINGS: [f64; 3] = [0.2, 0.35, 0.5];

pub fn default_tomography_couplings(sigma: f64) -> Vec<f64> {
    TOMOGRAPHY_COUPLINGS.iter().map(|g| g * sigma).collect()
}

/// `d²` Hermitian matrices, orthonormal under `Tr(A B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

impl OperatorBasis {
    pub fn new(elements: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        let dim = elements.first().map_or(0, ComplexMatrix::rows);
        if elements.len() != dim * dim || labels.len() != elements.len() {
            return Err(Error::Cardinality {
                expected: dim * dim,
                got: elements.len(),
            });
        }
        if let Some(bad) = elements.iter().find(|b| b.rows() != dim || !b.is_square()) {
            return Err(Error::Shape(format!(
                "basis element of shape {}x{} in dimension {dim}",
                bad.rows(),
                bad.cols()
            )));
        }
        let basis = Self {
            dim,
            elements,
            labels,
        };
        let deviation = basis.gram_deviation().max(
            basis
                .elements
                .iter()
                .map(ComplexMatrix::hermiticity_deviation)
                .fold(0.0, f64::max),
        );
        if deviation > ORTHONORMALITY_TOL {
            return Err(Error::NotOrthonormal {
                deviation,
                tolerance: ORTHONORMALITY_TOL,
            });
        }
        Ok(basis)
    }

    /// Normalized generalized Gell-Mann matrices, identity first.
    ///
    /// Order: `I/√d`, then for each pair `j < k` the symmetric and
    /// antisymmetric off-diagonal elements, then the diagonal ones. At `d = 2`
    /// this is `{I, X, Y, Z}/√2`.
    pub fn gell_mann(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Parameter(format!(
                "operator basis needs dim >= 2, got {dim}"
            )));
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut elements = vec![ComplexMatrix::identity(dim).scale_real(1.0 / (dim as f64).sqrt())];
        let mut labels = vec!["I".to_owned()];
        for j in 0..dim {
            for k in j + 1..dim {
                let mut sym = ComplexMatrix::zeros(dim, dim);
                sym[(j, k)] = C64::new(h, 0.0);
                sym[(k, j)] = C64::new(h, 0.0);
                let mut anti = ComplexMatrix::zeros(dim, dim);
                anti[(j, k)] = C64::new(0.0, -h);
                anti[(k, j)] = C64::new(0.0, h);
                elements.push(sym);
                labels.push(format!("S{j}{k}"));
                elements.push(anti);
                labels.push(format!("A{j}{k}"));
            }
        }
        for l in 1..dim {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut diag = ComplexMatrix::zeros(dim, dim);
            for m in 0..l {
                diag[(m, m)] = C64::new(norm, 0.0);
            }
            diag[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
            elements.push(diag);
            labels.push(format!("D{l}"));
        }
        Self::new(elements, labels)
    }

    /// `U B_k U†` for every element; still a valid basis for unitary `U`.
    pub fn rotated(&self, u: &ComplexMatrix) -> Result<Self> {
        let ud = u.adjoint();
        let elements = self
            .elements
            .iter()
            .map(|b| Ok(u.matmul(b)?.matmul(&ud)?.hermitian_part()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            elements,
            self.labels.iter().map(|l| format!("U{l}")).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Max-norm of `Gram - I` with `Gram[j][k] = Tr(B_j B_k)`.
    pub fn gram_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for (j, a) in self.elements.iter().enumerate() {
            for (k, b) in self.elements.iter().enumerate() {
                let target = if j == k { 1.0 } else { 0.0 };
                let g = a.trace_product(b).unwrap_or(C64::new(f64::NAN, 0.0));
                dev = dev.max((g - target).norm());
            }
        }
        dev
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionMode {
    Complex,
    HermitianPart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Exact,
    Simulated,
}

/// Weak value of one basis element, exact and as used in the reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementEstimate {
    pub label: String,
    pub exact: C64,
    pub used: C64,
    /// Standard error of the real and imaginary parts; zero for exact input.
    pub ci_re: f64,
    pub ci_im: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionReport {
    pub reconstructed: ComplexMatrix,
    pub target: ComplexMatrix,
    pub max_abs_error: f64,
    pub mode: ReconstructionMode,
    pub source: Source,
    pub elements: Vec<ElementEstimate>,
}

impl ReconstructionReport {
    pub fn trace(&self) -> C64 {
        self.reconstructed.trace().expect("square")
    }

    /// Largest per-element standard error.
    pub fn max_ci(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| e.ci_re.max(e.ci_im))
            .fold(0.0, f64::max)
    }

    /// Statistical acceptance bound: five times the largest per-element error.
    pub fn error_bound(&self) -> f64 {
        5.0 * self.max_ci()
    }
}

/// Exact weak values `Tr(R_if B_k)` for every basis element.
pub fn exact_weak_values(i: &PureState, f: &PureState, basis: &OperatorBasis) -> Result<Vec<C64>> {
    let cfg = WeakConfig::default();
    basis
        .elements()
        .iter()
        .map(|b| weak_value_of_matrix(b, i, f, &cfg))
        .collect()
}

fn target_for(i: &PureState, f: &PureState, mode: ReconstructionMode) -> Result<ComplexMatrix> {
    let r = transient_density(i, f)?;
    Ok(match mode {
        ReconstructionMode::Complex => r.matrix().clone(),
        ReconstructionMode::HermitianPart => r.matrix().hermitian_part(),
    })
}

fn expand(basis: &OperatorBasis, coeffs: &[C64]) -> ComplexMatrix {
    let mut r = ComplexMatrix::zeros(basis.dim(), basis.dim());
    for (b, w) in basis.elements().iter().zip(coeffs) {
        r = &r + &b.scale(*w);
    }
    r
}

/// `R = sum_k w_k B_k`, using `Re(w_k)` only in Hermitian-part mode.
pub fn reconstruct_transient(
    i: &PureState,
    f: &PureState,
    basis: &OperatorBasis,
    weak_values: &[C64],
    mode: ReconstructionMode,
) -> Result<ReconstructionReport> {
    if weak_values.len() != basis.len() {
        return Err(Error::Cardinality {
            expected: basis.len(),
            got: weak_values.len(),
        });
    }
    let exact = exact_weak_values(i, f, basis)?;
    let elements = basis
        .labels()
        .iter()
        .zip(exact)
        .zip(weak_values)
        .map(|((label, exact), w)| ElementEstimate {
            label: label.clone(),
            exact,
            used: *w,
            ci_re: 0.0,
            ci_im: 0.0,
        })
        .collect();
    assemble(i, f, basis, elements, mode, Source::Exact)
}

fn assemble(
    i: &PureState,
    f: &PureState,
    basis: &OperatorBasis,
    elements: Vec<ElementEstimate>,
    mode: ReconstructionMode,
    source: Source,
) -> Result<ReconstructionReport> {
    let coeffs: Vec<C64> = elements
        .iter()
        .map(|e| match mode {
            ReconstructionMode::Complex => e.used,
            ReconstructionMode::HermitianPart => C64::new(e.used.re, 0.0),
        })
        .collect();
    let mut reconstructed = expand(basis, &coeffs);
    if mode == ReconstructionMode::HermitianPart {
        reconstructed = reconstructed.hermitian_part();
    }
    let target = target_for(i, f, mode)?;
    Ok(ReconstructionReport {
        max_abs_error: reconstructed.max_abs_diff(&target),
        reconstructed,
        target,
        mode,
        source,
        elements,
    })
}

/// Simulated tomography of `R_if` for outcome `f_index` of the scenario basis.
///
/// Each basis element is measured with a weak pointer and extrapolated to zero
/// coupling. Position readout supplies real parts; complex mode additionally
/// runs momentum readout for the imaginary parts.
pub fn tomography_from_simulation(
    scenario: &Scenario,
    f_index: usize,
    cfg: &SimConfig,
    couplings: &[f64],
    mode: ReconstructionMode,
    exec: Execution,
) -> Result<ReconstructionReport> {
    let f = scenario.final_basis.vectors().get(f_index).ok_or_else(|| {
        Error::Parameter(format!(
            "final outcome index {f_index} out of range (basis has {})",
            scenario.final_basis.dim()
        ))
    })?;
    let i = &scenario.initial;
    let basis = OperatorBasis::gell_mann(scenario.dim)?;
    let exact = exact_weak_values(i, f, &basis)?;

    let measured = exec.map_indexed(basis.len(), |k| -> Result<(f64, f64, f64, f64)> {
        let obs = Observable::new(basis.labels()[k].clone(), basis.elements()[k].clone())?;
        let seed = derive_seed(cfg.seed, 1_000 + k as u64);
        let position = SimConfig {
            seed,
            readout: Readout::Position,
            ..cfg.clone()
        };
        let re =
            extrapolate_weak_value_with(&obs, i, f, &position, couplings, Execution::Sequential)?;
        let (im, ci_im) = match mode {
            ReconstructionMode::HermitianPart => (0.0, 0.0),
            ReconstructionMode::Complex => {
                let momentum = SimConfig {
                    seed: derive_seed(seed, 1),
                    readout: Readout::Momentum,
                    ..cfg.clone()
                };
                let ex = extrapolate_weak_value_with(
                    &obs,
                    i,
                    f,
                    &momentum,
                    couplings,
                    Execution::Sequential,
                )?;
                (ex.estimate, ex.ci)
            }
        };
        Ok((re.estimate, re.ci, im, ci_im))
    });

    let elements = measured
        .into_iter()
        .zip(basis.labels())
        .zip(exact)
        .map(|((m, label), exact)| {
            let (re, ci_re, im, ci_im) = m?;
            Ok(ElementEstimate {
                label: label.clone(),
                exact,
                used: C64::new(re, im),
                ci_re,
                ci_im,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(i, f, &basis, elements, mode, Source::Simulated)
}
