//! Weak values, transient density operators, the post-selected mixture
//! decomposition and weak conditional quasi-probabilities.

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};
use crate::states::{born_weight, FinalBasis, Observable, PureState};

/// Below this `|<f|i>|^2` a post-selection is treated as orthogonal.
pub const DEFAULT_ORTHO_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakConfig {
    pub ortho_eps: f64,
}

impl Default for WeakConfig {
    fn default() -> Self {
        Self {
            ortho_eps: DEFAULT_ORTHO_EPS,
        }
    }
}

impl WeakConfig {
    /// `<f|i>`, rejecting post-selections below `ortho_eps`.
    fn postselection_amplitude(&self, i: &PureState, f: &PureState) -> Result<(C64, f64)> {
        let amp = f.overlap(i)?;
        let p = amp.norm_sqr();
        if p < self.ortho_eps {
            return Err(Error::OrthogonalPostSelection { overlap: p });
        }
        Ok((amp, p))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakValue {
    pub value: C64,
    pub initial_label: String,
    pub final_label: String,
    pub observable_label: String,
    pub post_selection_prob: f64,
}

/// `<f|A|i> / <f|i>`
pub fn weak_value(a: &Observable, i: &PureState, f: &PureState) -> Result<WeakValue> {
    weak_value_with(a, i, f, &WeakConfig::default())
}

pub fn weak_value_with(
    a: &Observable,
    i: &PureState,
    f: &PureState,
    cfg: &WeakConfig,
) -> Result<WeakValue> {
    let value = weak_value_of_matrix(a.matrix(), i, f, cfg)?;
    Ok(WeakValue {
        value,
        initial_label: i.label_or("i").to_owned(),
        final_label: f.label_or("f").to_owned(),
        observable_label: a.label().to_owned(),
        post_selection_prob: born_weight(i, f)?,
    })
}

/// Weak value of an arbitrary (not necessarily Hermitian) operator.
pub fn weak_value_of_matrix(
    op: &ComplexMatrix,
    i: &PureState,
    f: &PureState,
    cfg: &WeakConfig,
) -> Result<C64> {
    let (amp, _) = cfg.postselection_amplitude(i, f)?;
    Ok(f.ket().inner(&op.apply(i.ket())?)? / amp)
}

/// `|i><i|f><f| / |<f|i>|^2`: trace one, idempotent, generally not Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct TransientDensity {
    matrix: ComplexMatrix,
    trace: C64,
}

impl TransientDensity {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.trace
    }

    /// `Tr(R A)`, equal to the weak value of `A`.
    pub fn expectation(&self, a: &ComplexMatrix) -> Result<C64> {
        self.matrix.trace_product(a)
    }
}

pub fn transient_density(i: &PureState, f: &PureState) -> Result<TransientDensity> {
    transient_density_with(i, f, &WeakConfig::default())
}

pub fn transient_density_with(
    i: &PureState,
    f: &PureState,
    cfg: &WeakConfig,
) -> Result<TransientDensity> {
    let (amp, p) = cfg.postselection_amplitude(i, f)?;
    // |i><i|f><f| = <i|f> |i><f|
    let matrix = i.ket().outer(f.ket()).scale(amp.conj() / p);
    let trace = matrix.trace()?;
    Ok(TransientDensity { matrix, trace })
}

/// `(R + R†) / 2`: the part of `R` seen by self-adjoint measurements.
pub fn hermitian_part(r: &TransientDensity) -> ComplexMatrix {
    r.matrix.hermitian_part()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionCheck {
    /// Max-norm of `sum_f p(f) R_if - |i><i|`.
    pub residual: f64,
    /// Outcomes with `p(f) < ortho_eps`, left out of the sum.
    pub skipped: Vec<usize>,
}

/// Residual of the mixture identity `|i><i| = sum_f p(f) R_if`.
pub fn verify_decomposition(i: &PureState, basis: &FinalBasis) -> Result<DecompositionCheck> {
    verify_decomposition_with(i, basis, &WeakConfig::default())
}

pub fn verify_decomposition_with(
    i: &PureState,
    basis: &FinalBasis,
    cfg: &WeakConfig,
) -> Result<DecompositionCheck> {
    let mut sum = ComplexMatrix::zeros(i.dim(), i.dim());
    let mut skipped = Vec::new();
    for (k, f) in basis.vectors().iter().enumerate() {
        let p = born_weight(i, f)?;
        if p < cfg.ortho_eps {
            skipped.push(k);
            continue;
        }
        let r = transient_density_with(i, f, cfg)?;
        sum = &sum + &r.matrix.scale_real(p);
    }
    Ok(DecompositionCheck {
        residual: sum.max_abs_diff(&i.projector()),
        skipped,
    })
}

/// Weak conditional quasi-probabilities of the eigenvalues of `A` given `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiProbRow {
    pub final_label: String,
    /// `(eigenvalue, quasi-probability)` for each distinct eigenvalue.
    pub entries: Vec<(f64, C64)>,
}

impl QuasiProbRow {
    pub fn total(&self) -> C64 {
        self.entries.iter().map(|(_, q)| q).sum()
    }

    /// `sum_k a_k p_w(a_k|f)`
    pub fn mean(&self) -> C64 {
        self.entries.iter().map(|(a, q)| q * a).sum()
    }

    pub fn min_real(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, q)| q.re)
            .fold(f64::INFINITY, f64::min)
    }
}

/// One entry per eigenspace: the weak value `<f|P_k|i> / <f|i>` of its projector.
pub fn weak_conditional_probs(
    a: &Observable,
    i: &PureState,
    f: &PureState,
) -> Result<QuasiProbRow> {
    weak_conditional_probs_with(a, i, f, &WeakConfig::default())
}

pub fn weak_conditional_probs_with(
    a: &Observable,
    i: &PureState,
    f: &PureState,
    cfg: &WeakConfig,
) -> Result<QuasiProbRow> {
    let entries = a
        .eigenspaces()
        .iter()
        .map(|e| Ok((e.value, weak_value_of_matrix(&e.projector, i, f, cfg)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuasiProbRow {
        final_label: f.label_or("f").to_owned(),
        entries,
    })
}
