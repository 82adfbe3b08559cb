//! Conditional uncertainties of post-selected sub-ensembles and their budget.
//!
//! For every outcome `f` the weak second moment and weak mean give a complex
//! conditional uncertainty `<A²>_w - |<A>_w|²`. Weighted by `p(f)` these sum
//! to zero exactly, while the spread of the weak values carries the whole
//! initial variance.
//!
//! Aggregates use the division-free forms
//! `p(f) <A²>_w(f) = <i|f><f|A²|i>` and `p(f) |<A>_w(f)|² = |<f|A|i>|²`,
//! so outcomes with vanishing `p(f)` still contribute their finite limit.

use crate::error::Result;
use crate::numerics::C64;
use crate::states::{born_weight, expectation, FinalBasis, Observable, PureState};
use crate::weak::{weak_value_of_matrix, WeakConfig};

pub const DEFAULT_IDENTITY_TOL: f64 = 1e-10;
/// Imaginary parts above this are flagged in reports.
pub const IMAG_FLAG_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalUncertainty {
    pub final_label: String,
    pub weak_mean: C64,
    pub weak_second_moment: C64,
    /// `weak_second_moment - |weak_mean|²`; the real part may be negative.
    pub value: C64,
}

impl ConditionalUncertainty {
    pub fn has_imaginary_part(&self) -> bool {
        self.value.im.abs() > IMAG_FLAG_TOL
    }
}

pub fn conditional_uncertainty(
    a: &Observable,
    i: &PureState,
    f: &PureState,
) -> Result<ConditionalUncertainty> {
    conditional_uncertainty_with(a, i, f, &WeakConfig::default())
}

pub fn conditional_uncertainty_with(
    a: &Observable,
    i: &PureState,
    f: &PureState,
    cfg: &WeakConfig,
) -> Result<ConditionalUncertainty> {
    let squared = a.matrix().matmul(a.matrix())?;
    let weak_mean = weak_value_of_matrix(a.matrix(), i, f, cfg)?;
    let weak_second_moment = weak_value_of_matrix(&squared, i, f, cfg)?;
    Ok(ConditionalUncertainty {
        final_label: f.label_or("f").to_owned(),
        weak_mean,
        weak_second_moment,
        value: weak_second_moment - weak_mean.norm_sqr(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyBudget {
    pub observable_label: String,
    /// `<A²> - <A>²` in the initial state.
    pub total_variance: f64,
    /// `sum_f p(f) |<A>_w(f) - <A>|²`
    pub weak_value_variance: f64,
    /// `sum_f p(f) ΔA²_w(f)`, complex.
    pub avg_conditional: C64,
    pub initial_mean: f64,
    /// `(index, p(f), uncertainty)` for every outcome above the orthogonality cutoff.
    pub per_f: Vec<(usize, f64, ConditionalUncertainty)>,
    /// Outcomes below the cutoff: no per-f record, limit form used in the sums.
    pub skipped: Vec<usize>,
}

impl UncertaintyBudget {
    /// `|sum_f p(f)|<A>_w - <A>|² - ΔA²|`
    pub fn variance_transfer_residual(&self) -> f64 {
        (self.weak_value_variance - self.total_variance).abs()
    }

    /// `|total - weak-value variance - Re(avg)|`
    pub fn decomposition_residual(&self) -> f64 {
        (self.total_variance - self.weak_value_variance - self.avg_conditional.re).abs()
    }

    /// `sum_f p(f) ΔA²_w(f)` summed from the stored per-f records only.
    pub fn weighted_record_sum(&self) -> C64 {
        self.per_f.iter().map(|(_, p, u)| u.value * *p).sum()
    }
}

/// Per-outcome contribution to the three aggregates, in division-free form.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Contribution {
    weighted_second: C64,
    weighted_mean_sq: f64,
    weighted_spread: f64,
}

fn contribution(
    a: &Observable,
    squared: &crate::numerics::ComplexMatrix,
    mean: f64,
    i: &PureState,
    f: &PureState,
) -> Result<Contribution> {
    let fi = f.overlap(i)?;
    let f_a_i = f.ket().inner(&a.matrix().apply(i.ket())?)?;
    let f_a2_i = f.ket().inner(&squared.apply(i.ket())?)?;
    Ok(Contribution {
        weighted_second: fi.conj() * f_a2_i,
        weighted_mean_sq: f_a_i.norm_sqr(),
        weighted_spread: (f_a_i - fi * mean).norm_sqr(),
    })
}

pub fn uncertainty_budget(
    a: &Observable,
    i: &PureState,
    basis: &FinalBasis,
) -> Result<UncertaintyBudget> {
    uncertainty_budget_with(a, i, basis, &WeakConfig::default())
}

pub fn uncertainty_budget_with(
    a: &Observable,
    i: &PureState,
    basis: &FinalBasis,
    cfg: &WeakConfig,
) -> Result<UncertaintyBudget> {
    let squared = a.matrix().matmul(a.matrix())?;
    let mean = expectation(a, i)?;
    let second = i.ket().inner(&squared.apply(i.ket())?)?.re;
    let total_variance = (second - mean * mean).max(0.0);

    let mut per_f = Vec::new();
    let mut skipped = Vec::new();
    let mut avg_conditional = C64::new(0.0, 0.0);
    let mut weak_value_variance = 0.0;
    for (k, f) in basis.vectors().iter().enumerate() {
        let c = contribution(a, &squared, mean, i, f)?;
        avg_conditional += c.weighted_second - c.weighted_mean_sq;
        weak_value_variance += c.weighted_spread;
        let p = born_weight(i, f)?;
        if p < cfg.ortho_eps {
            skipped.push(k);
        } else {
            per_f.push((k, p, conditional_uncertainty_with(a, i, f, cfg)?));
        }
    }
    Ok(UncertaintyBudget {
        observable_label: a.label().to_owned(),
        total_variance,
        weak_value_variance,
        avg_conditional,
        initial_mean: mean,
        per_f,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuasiDeterminismReport {
    pub avg_conditional: C64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks that the `p(f)`-weighted conditional uncertainty vanishes.
pub fn check_quasi_determinism(
    a: &Observable,
    i: &PureState,
    basis: &FinalBasis,
    tolerance: f64,
) -> Result<QuasiDeterminismReport> {
    let budget = uncertainty_budget(a, i, basis)?;
    Ok(QuasiDeterminismReport {
        avg_conditional: budget.avg_conditional,
        tolerance,
        pass: budget.avg_conditional.norm() <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{haar_random_state, random_hermitian, ComplexVector, SeededRng};
    use crate::states::{pauli, pauli_sum, Pauli};
    use proptest::prelude::*;

    fn x_plus_y() -> Observable {
        pauli_sum(&[(Pauli::X, 1.0), (Pauli::Y, 1.0)]).unwrap()
    }

    fn random_state(dim: usize, rng: &mut SeededRng) -> PureState {
        PureState::new(haar_random_state(dim, rng).unwrap(), None).unwrap()
    }

    #[test]
    fn pauli_signed_uncertainties() {
        let a = x_plus_y();
        let i = PureState::preset("x+").unwrap();
        let up = conditional_uncertainty(&a, &i, &PureState::preset("y+").unwrap()).unwrap();
        let down = conditional_uncertainty(&a, &i, &PureState::preset("y-").unwrap()).unwrap();
        assert!((up.value - C64::new(-2.0, 0.0)).norm() <= 1e-12);
        assert!((up.weak_second_moment - C64::new(2.0, 0.0)).norm() <= 1e-12);
        assert!((down.value - C64::new(2.0, 0.0)).norm() <= 1e-12);
        assert!(down.weak_mean.norm() <= 1e-12);
        for u in [&up, &down] {
            assert!((u.value - (u.weak_second_moment - u.weak_mean.norm_sqr())).norm() <= 1e-14);
        }
    }

    #[test]
    fn pauli_budget() {
        let a = x_plus_y();
        let i = PureState::preset("x+").unwrap();
        let b = uncertainty_budget(&a, &i, &FinalBasis::preset("y").unwrap()).unwrap();
        // direct oracle: <(X+Y)²> - <X+Y>² = 2 - 1
        assert!((b.total_variance - 1.0).abs() <= 1e-12);
        assert!((b.weak_value_variance - 1.0).abs() <= 1e-12);
        assert!(b.avg_conditional.norm() <= 1e-12);
        let ps: Vec<f64> = b.per_f.iter().map(|(_, p, _)| *p).collect();
        assert!(ps.iter().all(|p| (p - 0.5).abs() <= 1e-15));
        assert!(b.weighted_record_sum().norm() <= 1e-12);
    }

    #[test]
    fn eigenstate_preparation_has_no_uncertainty() {
        let mut rng = SeededRng::new(50, 0);
        let a = Observable::new("H", random_hermitian(4, &mut rng)).unwrap();
        let i = PureState::new(a.spectrum().vector(1), None).unwrap();
        let basis =
            FinalBasis::eigenbasis(&Observable::new("G", random_hermitian(4, &mut rng)).unwrap());
        let b = uncertainty_budget(&a, &i, &basis).unwrap();
        assert!(b.total_variance <= 1e-12);
        for (_, _, u) in &b.per_f {
            assert!(u.value.norm() <= 1e-12 * a.spectral_radius().powi(2).max(1.0));
        }
        assert!(check_quasi_determinism(&a, &i, &basis, 1e-10).unwrap().pass);
    }

    #[test]
    fn eigenbasis_post_selection_has_zero_conditional_uncertainty() {
        let mut rng = SeededRng::new(51, 0);
        let a = Observable::new("H", random_hermitian(5, &mut rng)).unwrap();
        let i = random_state(5, &mut rng);
        let b = uncertainty_budget(&a, &i, &FinalBasis::eigenbasis(&a)).unwrap();
        for (_, _, u) in &b.per_f {
            assert!(u.value.norm() <= 1e-12 * a.spectral_radius().powi(2).max(1.0));
        }
    }

    #[test]
    fn near_orthogonal_outcome_still_passes() {
        // |<f0|i>|² = 1e-8 on a 3-level system
        let eps: f64 = 1e-8;
        let amps = [
            eps.sqrt(),
            ((1.0 - eps) / 2.0).sqrt(),
            ((1.0 - eps) / 2.0).sqrt(),
        ];
        let i = PureState::new(ComplexVector::from_real(&amps).unwrap(), None).unwrap();
        let basis = FinalBasis::computational(3);
        let mut rng = SeededRng::new(52, 0);
        let a = Observable::new("H", random_hermitian(3, &mut rng)).unwrap();
        let b = uncertainty_budget(&a, &i, &basis).unwrap();
        assert!((b.per_f[0].1 - eps).abs() <= 1e-20);
        assert!(
            b.per_f[0].2.value.norm() > 1e3,
            "conditional term should be large"
        );
        let report = check_quasi_determinism(&a, &i, &basis, 1e-9).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn exactly_orthogonal_outcome_keeps_identity() {
        // f = x- is orthogonal to i = x+, yet <x-|Z|x+> = 1: the limit term is finite.
        let a = pauli(Pauli::Z);
        let i = PureState::preset("x+").unwrap();
        let b = uncertainty_budget(&a, &i, &FinalBasis::preset("x").unwrap()).unwrap();
        assert_eq!(b.skipped, vec![1]);
        assert!((b.total_variance - 1.0).abs() <= 1e-12);
        assert!(b.variance_transfer_residual() <= 1e-12);
        assert!(b.avg_conditional.norm() <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn budget_identities(seed in any::<u64>(), dim in 2usize..=8) {
            let mut rng = SeededRng::new(seed, 7);
            let a = Observable::new("H", random_hermitian(dim, &mut rng)).unwrap();
            let i = random_state(dim, &mut rng);
            let basis = FinalBasis::eigenbasis(&Observable::new("G", random_hermitian(dim, &mut rng)).unwrap());
            let b = uncertainty_budget(&a, &i, &basis).unwrap();
            prop_assert!(b.avg_conditional.norm() <= 1e-10);
            prop_assert!(b.variance_transfer_residual() <= 1e-10);
            prop_assert!(b.decomposition_residual() <= 1e-10);
            prop_assert!(b.total_variance >= 0.0);
        }

        #[test]
        fn reduction_order_does_not_matter(seed in any::<u64>(), dim in 2usize..=8) {
            let mut rng = SeededRng::new(seed, 8);
            let a = Observable::new("H", random_hermitian(dim, &mut rng)).unwrap();
            let i = random_state(dim, &mut rng);
            let basis = FinalBasis::eigenbasis(&Observable::new("G", random_hermitian(dim, &mut rng)).unwrap());
            let squared = a.matrix().matmul(a.matrix()).unwrap();
            let mean = expectation(&a, &i).unwrap();
            let parts: Vec<Contribution> = basis.vectors().iter()
                .map(|f| contribution(&a, &squared, mean, &i, f).unwrap())
                .collect();
            let forward: C64 = parts.iter().map(|c| c.weighted_second - c.weighted_mean_sq).sum();
            let backward: C64 = parts.iter().rev().map(|c| c.weighted_second - c.weighted_mean_sq).sum();
            prop_assert!((forward - backward).norm() <= 1e-12);
        }
    }
}
