//! States, observables, measurement bases and validated scenarios.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{eigh, ComplexMatrix, ComplexVector, Eigh, C64, DEFAULT_HERMITIAN_TOL};
use crate::simulator::SimConfig;

pub const DEFAULT_BASIS_TOL: f64 = 1e-10;

/// Normalized ket.
#[derive(Clone, Debug)]
pub struct PureState {
    ket: ComplexVector,
    label: Option<String>,
    norm_factor: f64,
}

impl PureState {
    /// Normalizes `ket`; vectors already unit-norm to rounding are kept bit-for-bit.
    pub fn new(ket: ComplexVector, label: Option<String>) -> Result<Self> {
        let norm = ket.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let (ket, norm_factor) = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            (ket, 1.0)
        } else {
            (ket.scale(C64::new(1.0 / norm, 0.0)), 1.0 / norm)
        };
        Ok(Self {
            ket,
            label,
            norm_factor,
        })
    }

    pub fn from_amplitudes(amplitudes: &[C64], label: Option<&str>) -> Result<Self> {
        Self::new(
            ComplexVector::new(amplitudes.to_vec())?,
            label.map(str::to_owned),
        )
    }

    /// Named single-qubit eigenstates: `x+ x- y+ y- z+ z-`.
    pub fn preset(name: &str) -> Result<Self> {
        let h = FRAC_1_SQRT_2;
        let amps = match name {
            "x+" => [C64::new(h, 0.0), C64::new(h, 0.0)],
            "x-" => [C64::new(h, 0.0), C64::new(-h, 0.0)],
            "y+" => [C64::new(h, 0.0), C64::new(0.0, h)],
            "y-" => [C64::new(h, 0.0), C64::new(0.0, -h)],
            "z+" => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            "z-" => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            other => {
                return Err(Error::Parameter(format!("unknown state preset '{other}'")));
            }
        };
        Self::from_amplitudes(&amps, Some(name))
    }

    pub fn ket(&self) -> &ComplexVector {
        &self.ket
    }

    pub fn dim(&self) -> usize {
        self.ket.dim()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn label_or<'a>(&'a self, fallback: &'a str) -> &'a str {
        self.label.as_deref().unwrap_or(fallback)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Factor applied to the input amplitudes at construction.
    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    /// `<self|other>`
    pub fn overlap(&self, other: &PureState) -> Result<C64> {
        self.ket.inner(&other.ket)
    }

    pub fn projector(&self) -> ComplexMatrix {
        self.ket.outer(&self.ket)
    }
}

/// Equality of the physical content; the normalization factor is provenance only.
impl PartialEq for PureState {
    fn eq(&self, other: &Self) -> bool {
        self.ket == other.ket && self.label == other.label
    }
}

/// `|<f|i>|^2`
pub fn born_weight(i: &PureState, f: &PureState) -> Result<f64> {
    Ok(f.overlap(i)?.norm_sqr().min(1.0))
}

/// Eigenvalue together with the projector onto its eigenspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenspace {
    pub value: f64,
    pub projector: ComplexMatrix,
    pub multiplicity: usize,
}

/// Hermitian operator with its cached spectral resolution.
#[derive(Clone, Debug)]
pub struct Observable {
    label: String,
    matrix: ComplexMatrix,
    spectrum: Eigh,
    eigenspaces: Vec<Eigenspace>,
}

impl Observable {
    pub fn new(label: impl Into<String>, matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(label, matrix, DEFAULT_HERMITIAN_TOL)
    }

    pub fn with_tolerance(
        label: impl Into<String>,
        matrix: ComplexMatrix,
        tol: f64,
    ) -> Result<Self> {
        let spectrum = eigh(&matrix, tol)?;
        let cluster_tol = crate::numerics::DEGENERACY_REL_TOL * matrix.max_norm();
        let n = spectrum.values.len();
        let mut eigenspaces = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && spectrum.values[end] - spectrum.values[end - 1] <= cluster_tol {
                end += 1;
            }
            let mut projector = ComplexMatrix::zeros(n, n);
            for k in start..end {
                let v = spectrum.vector(k);
                projector = &projector + &v.outer(&v);
            }
            let value = spectrum.values[start..end].iter().sum::<f64>() / (end - start) as f64;
            eigenspaces.push(Eigenspace {
                value,
                projector,
                multiplicity: end - start,
            });
            start = end;
        }
        Ok(Self {
            label: label.into(),
            matrix,
            spectrum,
            eigenspaces,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn spectrum(&self) -> &Eigh {
        &self.spectrum
    }

    pub fn eigenspaces(&self) -> &[Eigenspace] {
        &self.eigenspaces
    }

    /// Distinct eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenspaces.iter().map(|e| e.value).collect()
    }

    /// `max |a|` over the spectrum.
    pub fn spectral_radius(&self) -> f64 {
        self.spectrum.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max a - min a`.
    pub fn spectral_range(&self) -> f64 {
        match (self.spectrum.values.first(), self.spectrum.values.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    /// The observable `A²`, formed by matrix product.
    pub fn squared(&self) -> Result<Observable> {
        let sq = self.matrix.matmul(&self.matrix)?.hermitian_part();
        Observable::new(format!("({})^2", self.label), sq)
    }
}

impl PartialEq for Observable {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.matrix == other.matrix
    }
}

/// `<s|A|s>`; the imaginary part must vanish to 1e-12.
pub fn expectation(a: &Observable, s: &PureState) -> Result<f64> {
    let value = s.ket().inner(&a.matrix().apply(s.ket())?)?;
    debug_assert!(
        value.im.abs() <= 1e-12 * a.matrix().max_norm().max(1.0),
        "expectation of Hermitian operator has imaginary part {}",
        value.im
    );
    Ok(value.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let rows = match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        };
        ComplexMatrix::from_row_major(2, 2, rows.concat()).expect("2x2")
    }
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(Pauli::I),
            "X" => Ok(Pauli::X),
            "Y" => Ok(Pauli::Y),
            "Z" => Ok(Pauli::Z),
            other => Err(Error::Parameter(format!(
                "unknown Pauli operator '{other}'"
            ))),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

pub fn pauli(p: Pauli) -> Observable {
    Observable::new(p.to_string(), p.matrix()).expect("Pauli matrices are Hermitian")
}

/// Real linear combination of single-qubit Pauli operators.
pub fn pauli_sum(coeffs: &[(Pauli, f64)]) -> Result<Observable> {
    let mut m = ComplexMatrix::zeros(2, 2);
    let mut label = String::new();
    for (p, c) in coeffs {
        m = &m + &p.matrix().scale_real(*c);
        label.push_str(&format_term(*c, &p.to_string(), label.is_empty()));
    }
    Observable::new(label, m)
}

fn format_term(coeff: f64, op: &str, first: bool) -> String {
    let sign = if coeff < 0.0 {
        "-"
    } else if first {
        ""
    } else {
        "+"
    };
    let mag = coeff.abs();
    if mag == 1.0 {
        format!("{sign}{op}")
    } else {
        format!("{sign}{mag}*{op}")
    }
}

/// Parses Pauli-string sums such as `X+Y`, `0.5*XZ - ZI` or `2 YY`.
///
/// Every term must have the same number of tensor factors; the resulting
/// operator acts on `2^n` dimensions.
pub fn parse_pauli_expression(expr: &str) -> Result<ComplexMatrix> {
    let compact: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(Error::Parameter("empty Pauli expression".into()));
    }
    let mut terms: Vec<(f64, String)> = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for ch in compact.chars() {
        // Split on +/- unless it belongs to an exponent like 1e-3.
        let in_exponent = matches!(prev, Some('e') | Some('E'))
            && current[..current.len() - 1]
                .chars()
                .last()
                .is_some_and(|c| c.is_ascii_digit() || c == '.');
        if (ch == '+' || ch == '-') && !current.is_empty() && !in_exponent {
            terms.push(split_term(&current)?);
            current.clear();
        }
        current.push(ch);
        prev = Some(ch);
    }
    terms.push(split_term(&current)?);

    let width = terms[0].1.len();
    if terms.iter().any(|(_, ops)| ops.len() != width) {
        return Err(Error::Parameter(format!(
            "Pauli terms in '{expr}' have different lengths"
        )));
    }
    let dim = 1usize << width;
    let mut total = ComplexMatrix::zeros(dim, dim);
    for (coeff, ops) in terms {
        let mut m = ComplexMatrix::identity(1);
        for ch in ops.chars() {
            m = m.kron(&ch.to_string().parse::<Pauli>()?.matrix());
        }
        total = &total + &m.scale_real(coeff);
    }
    Ok(total)
}

fn split_term(term: &str) -> Result<(f64, String)> {
    let (sign, body) = match term.as_bytes().first() {
        Some(b'+') => (1.0, &term[1..]),
        Some(b'-') => (-1.0, &term[1..]),
        _ => (1.0, term),
    };
    let ops_start = body
        .find(['I', 'X', 'Y', 'Z'])
        .ok_or_else(|| Error::Parameter(format!("term '{term}' has no Pauli operators")))?;
    let (coeff_part, ops) = body.split_at(ops_start);
    let coeff_part = coeff_part.trim_end_matches('*');
    let coeff = if coeff_part.is_empty() {
        1.0
    } else {
        coeff_part
            .parse::<f64>()
            .map_err(|_| Error::Parameter(format!("bad coefficient '{coeff_part}' in '{term}'")))?
    };
    if ops.chars().any(|c| !matches!(c, 'I' | 'X' | 'Y' | 'Z')) {
        return Err(Error::Parameter(format!("bad Pauli string '{ops}'")));
    }
    Ok((sign * coeff, ops.to_owned()))
}

/// Complete orthonormal set of post-selection outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalBasis {
    vectors: Vec<PureState>,
}

impl FinalBasis {
    pub fn new(vectors: Vec<PureState>, tol: f64) -> Result<Self> {
        let dim = vectors
            .first()
            .map(PureState::dim)
            .ok_or_else(|| Error::Shape("final basis is empty".into()))?;
        if vectors.len() != dim || vectors.iter().any(|v| v.dim() != dim) {
            return Err(Error::Shape(format!(
                "final basis needs {dim} vectors of dimension {dim}, got {}",
                vectors.len()
            )));
        }
        let mut completeness = ComplexMatrix::zeros(dim, dim);
        let mut deviation: f64 = 0.0;
        for (a, va) in vectors.iter().enumerate() {
            completeness = &completeness + &va.projector();
            for (b, vb) in vectors.iter().enumerate().skip(a) {
                let target = if a == b { 1.0 } else { 0.0 };
                deviation = deviation.max((va.overlap(vb)? - target).norm());
            }
        }
        deviation = deviation.max(completeness.max_abs_diff(&ComplexMatrix::identity(dim)));
        if deviation > tol {
            return Err(Error::NotOrthonormal {
                deviation,
                tolerance: tol,
            });
        }
        Ok(Self { vectors })
    }

    /// Standard basis `|0>, |1>, ...`.
    pub fn computational(dim: usize) -> Self {
        let vectors = (0..dim)
            .map(|k| PureState::new(ComplexVector::basis(dim, k), Some(k.to_string())).unwrap())
            .collect();
        Self { vectors }
    }

    /// Eigenvectors of `a`, labelled `<label>[k]`.
    pub fn eigenbasis(a: &Observable) -> Self {
        let vectors = (0..a.dim())
            .map(|k| {
                PureState::new(a.spectrum().vector(k), Some(format!("{}[{k}]", a.label()))).unwrap()
            })
            .collect();
        Self { vectors }
    }

    /// Named single-qubit bases `x`, `y`, `z` with `+` outcome first.
    pub fn preset(name: &str) -> Result<Self> {
        let (plus, minus) = match name {
            "x" => ("x+", "x-"),
            "y" => ("y+", "y-"),
            "z" => ("z+", "z-"),
            other => return Err(Error::Parameter(format!("unknown basis preset '{other}'"))),
        };
        Self::new(
            vec![PureState::preset(plus)?, PureState::preset(minus)?],
            DEFAULT_BASIS_TOL,
        )
    }

    pub fn vectors(&self) -> &[PureState] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn label(&self, k: usize) -> String {
        self.vectors[k]
            .label()
            .map_or_else(|| format!("f{k}"), str::to_owned)
    }
}

/// A validated weak-measurement setup.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub dim: usize,
    pub initial: PureState,
    pub final_basis: FinalBasis,
    pub observables: Vec<Observable>,
    pub sim: Option<SimConfig>,
}

impl Scenario {
    pub fn new(
        initial: PureState,
        final_basis: FinalBasis,
        observables: Vec<Observable>,
        sim: Option<SimConfig>,
    ) -> Result<Self> {
        let dim = initial.dim();
        if final_basis.dim() != dim {
            return Err(Error::Shape(format!(
                "final basis has dimension {}, initial state {dim}",
                final_basis.dim()
            )));
        }
        if let Some(a) = observables.iter().find(|a| a.dim() != dim) {
            return Err(Error::Shape(format!(
                "observable '{}' has dimension {}, expected {dim}",
                a.label(),
                a.dim()
            )));
        }
        if let Some(cfg) = &sim {
            cfg.validate()?;
        }
        Ok(Self {
            dim,
            initial,
            final_basis,
            observables,
            sim,
        })
    }

    /// `|x+>` prepared, `{|y+>, |y->}` post-selected, observables X, Y and X+Y.
    pub fn pauli_demo() -> Self {
        let observables = vec![
            pauli(Pauli::X),
            pauli(Pauli::Y),
            pauli_sum(&[(Pauli::X, 1.0), (Pauli::Y, 1.0)]).unwrap(),
        ];
        Scenario::new(
            PureState::preset("x+").unwrap(),
            FinalBasis::preset("y").unwrap(),
            observables,
            Some(SimConfig::default()),
        )
        .unwrap()
    }

    pub fn observable(&self, label: &str) -> Option<&Observable> {
        self.observables.iter().find(|a| a.label() == label)
    }
}
