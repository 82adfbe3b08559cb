use std::fmt::Write as _;

use anyhow::{ensure, Result};

use super::report::{re_im, Cell, Check, ReportBundle, Table};
use crate::exec::Execution;
use crate::simulator::{
    derive_seed, extrapolate_weak_value_with, run_weak_measurement_with, Readout, SimConfig,
    STARVATION_PROB,
};
use crate::states::{born_weight, Scenario};
use crate::tomography::{
    default_tomography_couplings, exact_weak_values, reconstruct_transient,
    tomography_from_simulation, OperatorBasis, ReconstructionMode,
};
use crate::uncertainty::uncertainty_budget_with;
use crate::weak::{
    transient_density_with, verify_decomposition_with, weak_conditional_probs_with,
    weak_value_with, WeakConfig,
};

/// Tolerances and overrides shared by all commands.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub tol_identity: f64,
    pub tol_basis: f64,
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub couplings: Option<Vec<f64>>,
    pub exec: Execution,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            tol_identity: crate::uncertainty::DEFAULT_IDENTITY_TOL,
            tol_basis: crate::states::DEFAULT_BASIS_TOL,
            seed: None,
            shots: None,
            couplings: None,
            exec: Execution::default(),
        }
    }
}

impl Settings {
    /// The scenario's `sim` block (or defaults) with command-line overrides applied.
    pub fn sim_config(&self, scenario: &Scenario) -> Result<SimConfig> {
        let mut cfg = scenario.sim.clone().unwrap_or_default();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(shots) = self.shots {
            cfg.shots = shots;
        }
        if let Some(c) = &self.couplings {
            cfg.couplings = c.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn tolerances(&self) -> Vec<(&'static str, f64)> {
        vec![("identity", self.tol_identity), ("basis", self.tol_basis)]
    }
}

pub fn cmd_analyze(scenario: &Scenario, name: &str, settings: &Settings) -> Result<ReportBundle> {
    let wcfg = WeakConfig::default();
    let tol = settings.tol_identity;
    let i = &scenario.initial;
    let basis = &scenario.final_basis;
    let mut checks = Vec::new();

    let mut transient = Table::new("transient", &["final", "prob", "row", "col", "re", "im"]);
    for (k, f) in basis.vectors().iter().enumerate() {
        let p = born_weight(i, f)?;
        if p < wcfg.ortho_eps {
            continue;
        }
        let r = transient_density_with(i, f, &wcfg)?;
        checks.push(Check::new(
            "transient_trace",
            basis.label(k),
            (r.trace() - 1.0).norm(),
            tol,
        ));
        for row in 0..scenario.dim {
            for col in 0..scenario.dim {
                let [re, im] = re_im(r.matrix()[(row, col)]);
                transient.push(vec![
                    basis.label(k).into(),
                    p.into(),
                    row.into(),
                    col.into(),
                    re,
                    im,
                ]);
            }
        }
    }
    let decomposition = verify_decomposition_with(i, basis, &wcfg)?;
    checks.push(Check::new(
        "mixture_decomposition",
        "initial",
        decomposition.residual,
        tol,
    ));

    let mut weak = Table::new(
        "weak_values",
        &[
            "observable",
            "final",
            "prob",
            "weak_re",
            "weak_im",
            "cond_uncertainty_re",
            "cond_uncertainty_im",
            "eig_min",
            "eig_max",
            "outside_spectrum",
        ],
    );
    let mut quasi = Table::new(
        "quasi_probs",
        &["observable", "final", "eigenvalue", "quasi_re", "quasi_im"],
    );
    let mut budgets = Table::new(
        "uncertainty_budget",
        &[
            "observable",
            "initial_mean",
            "total_variance",
            "weak_value_variance",
            "avg_conditional_re",
            "avg_conditional_im",
            "skipped_outcomes",
        ],
    );
    for a in &scenario.observables {
        let budget = uncertainty_budget_with(a, i, basis, &wcfg)?;
        let eig = a.eigenvalues();
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        let mut row_sum_err: f64 = 0.0;
        let mut row_mean_err: f64 = 0.0;
        for (k, p, u) in &budget.per_f {
            let f = &basis.vectors()[*k];
            let w = weak_value_with(a, i, f, &wcfg)?.value;
            let [wr, wi] = re_im(w);
            let [ur, ui] = re_im(u.value);
            let outside = w.re < lo - tol || w.re > hi + tol;
            weak.push(vec![
                a.label().into(),
                basis.label(*k).into(),
                (*p).into(),
                wr,
                wi,
                ur,
                ui,
                lo.into(),
                hi.into(),
                outside.into(),
            ]);
            let row = weak_conditional_probs_with(a, i, f, &wcfg)?;
            row_sum_err = row_sum_err.max((row.total() - 1.0).norm());
            row_mean_err = row_mean_err.max((row.mean() - w).norm());
            for (value, q) in &row.entries {
                let [qr, qi] = re_im(*q);
                quasi.push(vec![
                    a.label().into(),
                    basis.label(*k).into(),
                    (*value).into(),
                    qr,
                    qi,
                ]);
            }
        }
        let [ar, ai] = re_im(budget.avg_conditional);
        budgets.push(vec![
            a.label().into(),
            budget.initial_mean.into(),
            budget.total_variance.into(),
            budget.weak_value_variance.into(),
            ar,
            ai,
            budget.skipped.len().into(),
        ]);
        checks.push(Check::new(
            "quasi_determinism",
            a.label(),
            budget.avg_conditional.norm(),
            tol,
        ));
        checks.push(Check::new(
            "variance_transfer",
            a.label(),
            budget.variance_transfer_residual(),
            tol,
        ));
        checks.push(Check::new(
            "quasi_prob_normalization",
            a.label(),
            row_sum_err,
            tol,
        ));
        checks.push(Check::new("quasi_prob_mean", a.label(), row_mean_err, tol));
    }

    Ok(ReportBundle {
        command: "analyze".into(),
        scenario: name.into(),
        seed: None,
        tolerances: settings.tolerances(),
        tables: vec![weak, quasi, budgets, transient],
        checks,
    })
}

const RECORD_COLUMNS: &[&str] = &[
    "observable",
    "final",
    "readout",
    "g",
    "shots",
    "kept_shots",
    "post_selection_rate",
    "mean_reading",
    "stderr",
    "rescaled_mean",
    "rescaled_stderr",
    "grid_mean",
];

fn record_row(obs: &str, r: &crate::simulator::PointerRecord) -> Vec<Cell> {
    vec![
        obs.into(),
        r.final_label.as_str().into(),
        readout_name(r.readout).into(),
        r.g.into(),
        r.shots.into(),
        r.kept_shots.into(),
        r.post_selection_rate.into(),
        r.mean_reading.into(),
        r.stderr.into(),
        r.rescaled_mean.into(),
        r.rescaled_stderr.into(),
        r.grid_mean.into(),
    ]
}

fn readout_name(r: Readout) -> &'static str {
    match r {
        Readout::Position => "position",
        Readout::Momentum => "momentum",
    }
}

pub fn cmd_simulate(scenario: &Scenario, name: &str, settings: &Settings) -> Result<ReportBundle> {
    let cfg = settings.sim_config(scenario)?;
    ensure!(
        !scenario.observables.is_empty(),
        "scenario defines no observables to simulate"
    );
    let i = &scenario.initial;
    let basis = &scenario.final_basis;
    let mut records = Table::new("pointer_records", RECORD_COLUMNS);
    let mut points = Table::new("extrapolation_points", RECORD_COLUMNS);
    let mut extrap = Table::new(
        "extrapolation",
        &[
            "observable",
            "final",
            "readout",
            "estimate",
            "ci",
            "curvature",
            "exact",
            "deviation",
            "within_3ci",
        ],
    );
    for (n, a) in scenario.observables.iter().enumerate() {
        let run_cfg = SimConfig {
            seed: derive_seed(cfg.seed, n as u64),
            ..cfg.clone()
        };
        for r in run_weak_measurement_with(a, i, basis, &run_cfg, settings.exec)? {
            records.push(record_row(a.label(), &r));
        }
        for (k, f) in basis.vectors().iter().enumerate() {
            if born_weight(i, f)? < STARVATION_PROB {
                continue;
            }
            let ex_cfg = SimConfig {
                seed: derive_seed(cfg.seed, 1_000 + (n * basis.dim() + k) as u64),
                ..cfg.clone()
            };
            let ex = extrapolate_weak_value_with(a, i, f, &ex_cfg, &cfg.couplings, settings.exec)?;
            let w = weak_value_with(a, i, f, &WeakConfig::default())?.value;
            let exact = match cfg.readout {
                Readout::Position => w.re,
                Readout::Momentum => w.im,
            };
            let deviation = (ex.estimate - exact).abs();
            extrap.push(vec![
                a.label().into(),
                basis.label(k).into(),
                readout_name(cfg.readout).into(),
                ex.estimate.into(),
                ex.ci.into(),
                ex.curvature.into(),
                exact.into(),
                deviation.into(),
                (deviation <= 3.0 * ex.ci).into(),
            ]);
            for p in &ex.points {
                let mut row = record_row(a.label(), p);
                row[1] = basis.label(k).into();
                points.push(row);
            }
        }
    }
    Ok(ReportBundle {
        command: "simulate".into(),
        scenario: name.into(),
        seed: Some(cfg.seed),
        tolerances: settings.tolerances(),
        tables: vec![records, extrap, points],
        checks: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TomographySource {
    Exact,
    Simulated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum TomographyMode {
    Complex,
    HermitianPart,
}

impl From<TomographyMode> for ReconstructionMode {
    fn from(m: TomographyMode) -> Self {
        match m {
            TomographyMode::Complex => ReconstructionMode::Complex,
            TomographyMode::HermitianPart => ReconstructionMode::HermitianPart,
        }
    }
}

/// Reconstructs `R_if` for one outcome (`final_index`) or for every outcome
/// with non-negligible probability.
pub fn cmd_tomography(
    scenario: &Scenario,
    name: &str,
    settings: &Settings,
    source: TomographySource,
    mode: Option<TomographyMode>,
    final_index: Option<usize>,
) -> Result<ReportBundle> {
    let mode: ReconstructionMode = mode
        .unwrap_or(match source {
            TomographySource::Exact => TomographyMode::Complex,
            TomographySource::Simulated => TomographyMode::HermitianPart,
        })
        .into();
    let i = &scenario.initial;
    let basis = &scenario.final_basis;
    let indices: Vec<usize> = match final_index {
        Some(k) => {
            ensure!(
                k < basis.dim(),
                "final index {k} out of range (basis has {} outcomes)",
                basis.dim()
            );
            vec![k]
        }
        None => (0..basis.dim())
            .filter(|&k| born_weight(i, &basis.vectors()[k]).is_ok_and(|p| p >= STARVATION_PROB))
            .collect(),
    };
    let ops = OperatorBasis::gell_mann(scenario.dim)?;
    let cfg = match source {
        TomographySource::Simulated => Some(settings.sim_config(scenario)?),
        TomographySource::Exact => None,
    };
    let couplings = match (&settings.couplings, &cfg) {
        (Some(c), _) => c.clone(),
        (None, Some(cfg)) => default_tomography_couplings(cfg.sigma),
        (None, None) => Vec::new(),
    };

    let mut elements = Table::new(
        "tomography_elements",
        &[
            "final", "element", "exact_re", "exact_im", "used_re", "used_im", "ci_re", "ci_im",
        ],
    );
    let mut matrix = Table::new(
        "tomography_matrix",
        &[
            "final",
            "row",
            "col",
            "reconstructed_re",
            "reconstructed_im",
            "target_re",
            "target_im",
        ],
    );
    let mut summary = Table::new(
        "tomography_summary",
        &[
            "final",
            "mode",
            "source",
            "max_abs_error",
            "error_bound",
            "trace_re",
            "trace_im",
        ],
    );
    let mut checks = Vec::new();
    for k in indices {
        let f = &basis.vectors()[k];
        let label = basis.label(k);
        let report = match &cfg {
            None => reconstruct_transient(i, f, &ops, &exact_weak_values(i, f, &ops)?, mode)?,
            Some(cfg) => {
                let run_cfg = SimConfig {
                    seed: derive_seed(cfg.seed, k as u64),
                    ..cfg.clone()
                };
                tomography_from_simulation(scenario, k, &run_cfg, &couplings, mode, settings.exec)?
            }
        };
        for e in &report.elements {
            let [xr, xi] = re_im(e.exact);
            let [ur, ui] = re_im(e.used);
            elements.push(vec![
                label.as_str().into(),
                e.label.as_str().into(),
                xr,
                xi,
                ur,
                ui,
                e.ci_re.into(),
                e.ci_im.into(),
            ]);
        }
        for r in 0..scenario.dim {
            for c in 0..scenario.dim {
                let [rr, ri] = re_im(report.reconstructed[(r, c)]);
                let [tr, ti] = re_im(report.target[(r, c)]);
                matrix.push(vec![
                    label.as_str().into(),
                    r.into(),
                    c.into(),
                    rr,
                    ri,
                    tr,
                    ti,
                ]);
            }
        }
        let bound = match source {
            TomographySource::Exact => settings.tol_identity * report.target.max_norm().max(1.0),
            TomographySource::Simulated => report.error_bound(),
        };
        let [tr, ti] = re_im(report.trace());
        summary.push(vec![
            label.as_str().into(),
            mode_name(mode).into(),
            source_name(source).into(),
            report.max_abs_error.into(),
            bound.into(),
            tr,
            ti,
        ]);
        checks.push(Check::new(
            "reconstruction",
            label.as_str(),
            report.max_abs_error,
            bound,
        ));
        if source == TomographySource::Exact {
            // Tr R = 1, so the Hermitian part has unit trace as well
            checks.push(Check::new(
                "reconstruction_trace",
                label.as_str(),
                (report.trace() - 1.0).norm(),
                settings.tol_identity,
            ));
        }
    }
    Ok(ReportBundle {
        command: "tomography".into(),
        scenario: name.into(),
        seed: cfg.as_ref().map(|c| c.seed),
        tolerances: settings.tolerances(),
        tables: vec![elements, matrix, summary],
        checks,
    })
}

fn mode_name(m: ReconstructionMode) -> &'static str {
    match m {
        ReconstructionMode::Complex => "complex",
        ReconstructionMode::HermitianPart => "hermitian-part",
    }
}

fn source_name(s: TomographySource) -> &'static str {
    match s {
        TomographySource::Exact => "exact",
        TomographySource::Simulated => "simulated",
    }
}

/// Analyze plus simulate on the built-in Pauli scenario.
pub fn cmd_demo_pauli(settings: &Settings) -> Result<ReportBundle> {
    let demo = Scenario::pauli_demo();
    let analyze = cmd_analyze(&demo, super::PAULI_DEMO, settings)?;
    let simulate = cmd_simulate(&demo, super::PAULI_DEMO, settings)?;
    Ok(ReportBundle {
        command: "demo".into(),
        scenario: super::PAULI_DEMO.into(),
        seed: simulate.seed,
        tolerances: settings.tolerances(),
        tables: analyze.tables.into_iter().chain(simulate.tables).collect(),
        checks: analyze.checks,
    })
}

fn cell_str(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        Cell::Float(x) => format!("{x:.6}"),
        Cell::Int(n) => n.to_string(),
        Cell::Bool(b) => b.to_string(),
    }
}

fn cell_f64(c: &Cell) -> f64 {
    match c {
        Cell::Float(x) => *x,
        Cell::Int(n) => *n as f64,
        _ => f64::NAN,
    }
}

/// Plain-text rendering of selected columns.
pub fn render_table(t: &Table, columns: &[&str]) -> String {
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| t.columns.iter().position(|x| x == c).expect("known column"))
        .collect();
    let cells: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| idx.iter().map(|&k| cell_str(&r[k])).collect())
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            cells
                .iter()
                .map(|r| r[j].len())
                .chain([c.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, vals: &[String]| {
        let parts: Vec<String> = vals
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:>w$}"))
            .collect();
        let _ = writeln!(out, "  {}", parts.join("  "));
    };
    line(
        &mut out,
        &columns.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
    );
    for r in &cells {
        line(&mut out, r);
    }
    out
}

/// Human-readable summary printed after a command.
pub fn summary(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "quasidet {} on {}", bundle.command, bundle.scenario);
    if let Some(t) = bundle.table("weak_values") {
        let _ = writeln!(out, "weak values and conditional uncertainties:");
        out += &render_table(
            t,
            &[
                "observable",
                "final",
                "prob",
                "weak_re",
                "weak_im",
                "cond_uncertainty_re",
                "cond_uncertainty_im",
                "outside_spectrum",
            ],
        );
    }
    if let Some(t) = bundle.table("uncertainty_budget") {
        let _ = writeln!(out, "uncertainty budget:");
        out += &render_table(
            t,
            &[
                "observable",
                "total_variance",
                "weak_value_variance",
                "avg_conditional_re",
                "avg_conditional_im",
            ],
        );
    }
    if let Some(t) = bundle.table("extrapolation") {
        let _ = writeln!(out, "zero-coupling extrapolation:");
        out += &render_table(
            t,
            &[
                "observable",
                "final",
                "readout",
                "estimate",
                "ci",
                "exact",
                "within_3ci",
            ],
        );
    }
    if let Some(t) = bundle.table("tomography_summary") {
        let _ = writeln!(out, "tomography:");
        out += &render_table(
            t,
            &[
                "final",
                "mode",
                "source",
                "max_abs_error",
                "error_bound",
                "trace_re",
                "trace_im",
            ],
        );
    }
    if !bundle.checks.is_empty() {
        let failed: Vec<&Check> = bundle.checks.iter().filter(|c| !c.pass()).collect();
        let _ = writeln!(
            out,
            "identity checks: {} of {} passed",
            bundle.checks.len() - failed.len(),
            bundle.checks.len()
        );
        for c in failed {
            let _ = writeln!(
                out,
                "  FAILED {} [{}]: residual {:e} > tolerance {:e}",
                c.name, c.subject, c.residual, c.tolerance
            );
        }
    }
    out
}

/// The paradox in numbers: weak value outside the spectrum, signed
/// uncertainties averaging to zero.
pub fn paradox_summary(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let (Some(weak), Some(budget)) = (
        bundle.table("weak_values"),
        bundle.table("uncertainty_budget"),
    ) else {
        return out;
    };
    let col = |t: &Table, name: &str| {
        t.columns
            .iter()
            .position(|c| *c == name)
            .expect("known column")
    };
    let rows: Vec<&Vec<Cell>> = weak
        .rows
        .iter()
        .filter(|r| r[0] == Cell::from("X+Y"))
        .collect();
    let Some(first) = rows.first() else {
        return out;
    };
    let bound = cell_f64(&first[col(weak, "eig_max")]);
    let _ = writeln!(
        out,
        "Pauli paradox (prepare x+, post-select on the Y basis, measure X+Y):"
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "  f = {:<3} weak value {:+.6}{:+.6}i  conditional uncertainty {:+.6}",
            cell_str(&r[col(weak, "final")]),
            cell_f64(&r[col(weak, "weak_re")]),
            cell_f64(&r[col(weak, "weak_im")]),
            cell_f64(&r[col(weak, "cond_uncertainty_re")]),
        );
    }
    let _ = writeln!(out, "  eigenvalue bound of X+Y: +/-{bound:.8}");
    if let Some(b) = budget.rows.iter().find(|r| r[0] == Cell::from("X+Y")) {
        let _ = writeln!(
            out,
            "  p(f)-weighted average conditional uncertainty: {:.3e}{:+.3e}i",
            cell_f64(&b[col(budget, "avg_conditional_re")]),
            cell_f64(&b[col(budget, "avg_conditional_im")]),
        );
    }
    out
}
