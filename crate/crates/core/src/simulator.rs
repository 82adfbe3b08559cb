//! Monte Carlo von Neumann pointer measurements with post-selection.
//!
//! A Gaussian pointer of width `sigma` is shifted by `g * a_k` on eigenspace
//! `k` of the measured observable. After post-selecting `|f>` the pointer is
//! left in the conditional amplitude
//!
//! ```text
//! psi_f(x) = sum_k <f|P_k|i> G_sigma(x - g a_k)
//! ```
//!
//! which is tabulated on a grid, normalized, and sampled by inverse CDF.
//! Shots are split into fixed-size shards, each driven by its own RNG stream
//! `(seed, shard)`, and per-outcome sufficient statistics are merged in shard
//! order. Sequential and parallel execution therefore give identical bits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::{SeededRng, C64};
use crate::states::{FinalBasis, Observable, PureState};

/// Outcomes whose pointer-integrated probability falls below this are unusable.
pub const STARVATION_PROB: f64 = 1e-12;
/// Shots per RNG stream.
pub const SHARD_SIZE: u64 = 16_384;
const MIN_GRID_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Position,
    Momentum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Half-width in units of the pointer width (position: `sigma`, momentum: `1/(2 sigma)`).
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 12.0,
            points: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Pointer shift per unit eigenvalue.
    pub g: f64,
    pub sigma: f64,
    pub shots: u64,
    pub seed: u64,
    #[serde(default = "default_readout")]
    pub readout: Readout,
    #[serde(default)]
    pub grid: GridSpec,
    /// Couplings used for zero-coupling extrapolation.
    #[serde(default = "default_couplings")]
    pub couplings: Vec<f64>,
}

fn default_readout() -> Readout {
    Readout::Position
}

fn default_couplings() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            g: 0.05,
            sigma: 1.0,
            shots: 200_000,
            seed: 20_100_112,
            readout: Readout::Position,
            grid: GridSpec::default(),
            couplings: default_couplings(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::Parameter(format!(
                "coupling g must be > 0, got {}",
                self.g
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Parameter(format!(
                "pointer width sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.shots == 0 {
            return Err(Error::Parameter("shots must be positive".into()));
        }
        if self.grid.points < MIN_GRID_POINTS {
            return Err(Error::Parameter(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {}",
                self.grid.points
            )));
        }
        if !(self.grid.half_width.is_finite() && self.grid.half_width > 0.0) {
            return Err(Error::Parameter("grid half-width must be positive".into()));
        }
        if self.couplings.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Parameter(
                "couplings must be finite and positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_coupling(&self, g: f64) -> SimConfig {
        SimConfig { g, ..self.clone() }
    }

    /// Width of the pointer distribution in the readout variable.
    pub fn readout_width(&self) -> f64 {
        match self.readout {
            Readout::Position => self.sigma,
            Readout::Momentum => 0.5 / self.sigma,
        }
    }
}

/// Normalized pointer density conditioned on one post-selection outcome.
#[derive(Clone, Debug)]
pub struct PointerDistribution {
    /// Trapezoid-integrated probability of the outcome.
    pub prob: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    cdf: Vec<f64>,
}

impl PointerDistribution {
    fn from_unnormalized(grid: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        let dx = grid[1] - grid[0];
        let mut cdf = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in weight.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * dx;
            cdf.push(acc);
        }
        let prob = acc;
        if prob.is_nan() || prob < STARVATION_PROB {
            return Err(Error::PostSelectionStarved { prob });
        }
        let density = weight.iter().map(|w| w / prob).collect();
        for c in &mut cdf {
            *c /= prob;
        }
        Ok(Self {
            prob,
            grid,
            density,
            cdf,
        })
    }

    pub fn dx(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// `∫ rho` on the grid; 1 up to rounding.
    pub fn norm(&self) -> f64 {
        trapezoid(&self.density, self.dx())
    }

    /// `∫ x rho(x) dx` on the grid.
    pub fn mean(&self) -> f64 {
        let xr: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(x, r)| x * r)
            .collect();
        trapezoid(&xr, self.dx())
    }

    /// Inverse CDF with linear interpolation inside a grid cell.
    pub fn quantile(&self, u: f64) -> f64 {
        let j = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        let frac = if c1 > c0 {
            ((u - c0) / (c1 - c0)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        self.grid[j] + frac * self.dx()
    }
}

fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    dx * (inner + 0.5 * (values[0] + values[n - 1]))
}

/// `<f|P_k|i>` for each eigenspace, with its eigenvalue.
fn eigenspace_amplitudes(a: &Observable, i: &PureState, f: &PureState) -> Result<Vec<(f64, C64)>> {
    a.eigenspaces()
        .iter()
        .map(|e| Ok((e.value, f.ket().inner(&e.projector.apply(i.ket())?)?)))
        .collect()
}

fn readout_grid(a: &Observable, cfg: &SimConfig) -> Vec<f64> {
    let half = match cfg.readout {
        Readout::Position => cfg.grid.half_width * cfg.sigma + cfg.g * a.spectral_radius(),
        Readout::Momentum => cfg.grid.half_width * cfg.readout_width(),
    };
    let n = cfg.grid.points;
    let dx = 2.0 * half / (n - 1) as f64;
    (0..n).map(|j| -half + j as f64 * dx).collect()
}

/// Post-selected pointer density for outcome `f`.
pub fn conditional_pointer_distribution(
    a: &Observable,
    i: &PureState,
    f: &PureState,
    cfg: &SimConfig,
) -> Result<PointerDistribution> {
    cfg.validate()?;
    let amps = eigenspace_amplitudes(a, i, f)?;
    let grid = readout_grid(a, cfg);
    let width = cfg.readout_width();
    let norm = (2.0 * PI * width * width).powf(-0.25);
    let envelope = |x: f64, shift: f64| norm * (-(x - shift).powi(2) / (4.0 * width * width)).exp();
    let weight: Vec<f64> = match cfg.readout {
        Readout::Position => grid
            .iter()
            .map(|&x| {
                amps.iter()
                    .map(|(a_k, c)| c * envelope(x, cfg.g * a_k))
                    .sum::<C64>()
                    .norm_sqr()
            })
            .collect(),
        Readout::Momentum => grid
            .iter()
            .map(|&p| {
                let phase_sum: C64 = amps
                    .iter()
                    .map(|(a_k, c)| c * C64::from_polar(1.0, -p * cfg.g * a_k))
                    .sum();
                phase_sum.norm_sqr() * envelope(p, 0.0).powi(2)
            })
            .collect(),
    };
    PointerDistribution::from_unnormalized(grid, weight)
}

/// Linear response of the mean pointer momentum to `Im <A>_w`.
///
/// Measured on the grid with a calibration qubit (`sigma_z`, `|x+>` to `|y+>`,
/// weak value exactly `i`) at the configured coupling and width.
pub fn momentum_response(cfg: &SimConfig) -> Result<f64> {
    let z = crate::states::pauli(crate::states::Pauli::Z);
    let cal = SimConfig {
        readout: Readout::Momentum,
        ..cfg.clone()
    };
    let dist = conditional_pointer_distribution(
        &z,
        &PureState::preset("x+")?,
        &PureState::preset("y+")?,
        &cal,
    )?;
    Ok(dist.mean() / cfg.g)
}

/// Count, sum and sum of squares of pointer readings.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReadingStats {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl ReadingStats {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, other: ReadingStats) -> ReadingStats {
        ReadingStats {
            count: self.count + other.count,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Standard error of the mean; infinite below two readings.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Aggregated pointer readings for one post-selection outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerRecord {
    pub final_label: String,
    pub readout: Readout,
    pub g: f64,
    pub shots: u64,
    pub kept_shots: u64,
    pub post_selection_rate: f64,
    pub mean_reading: f64,
    pub stderr: f64,
    /// `mean_reading / g` (position) or `mean_reading / (g * response)` (momentum).
    pub rescaled_mean: f64,
    pub rescaled_stderr: f64,
    /// Exact mean reading of the tabulated conditional density.
    pub grid_mean: f64,
    pub stats: ReadingStats,
}

/// Outcome table for the sampler: probability plus optional pointer density.
struct Outcomes {
    cumulative: Vec<f64>,
    dists: Vec<Option<PointerDistribution>>,
}

impl Outcomes {
    fn new(probs: Vec<f64>, dists: Vec<Option<PointerDistribution>>) -> Self {
        let total: f64 = probs.iter().sum();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Self { cumulative, dists }
    }

    fn pick(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    fn run_shard(&self, seed: u64, shard: u64, shots: u64) -> Vec<ReadingStats> {
        let mut rng = SeededRng::new(seed, shard);
        let mut stats = vec![ReadingStats::default(); self.dists.len()];
        for _ in 0..shots {
            let k = self.pick(rng.uniform());
            let u = rng.uniform();
            if let Some(dist) = &self.dists[k] {
                stats[k].push(dist.quantile(u));
            } else {
                stats[k].count += 1;
            }
        }
        stats
    }

    fn run(&self, seed: u64, shots: u64, exec: Execution) -> Vec<ReadingStats> {
        let shards = shots.div_ceil(SHARD_SIZE);
        let per_shard = exec.map_indexed(shards as usize, |s| {
            let s = s as u64;
            let n = SHARD_SIZE.min(shots - s * SHARD_SIZE);
            self.run_shard(seed, s, n)
        });
        let mut total = vec![ReadingStats::default(); self.dists.len()];
        for shard in per_shard {
            for (t, s) in total.iter_mut().zip(shard) {
                *t = t.merge(s);
            }
        }
        total
    }
}

fn record(
    label: String,
    cfg: &SimConfig,
    stats: ReadingStats,
    dist: &PointerDistribution,
    response: f64,
) -> PointerRecord {
    let scale = match cfg.readout {
        Readout::Position => cfg.g,
        Readout::Momentum => cfg.g * response,
    };
    let mean = if stats.count > 0 {
        stats.mean()
    } else {
        f64::NAN
    };
    PointerRecord {
        final_label: label,
        readout: cfg.readout,
        g: cfg.g,
        shots: cfg.shots,
        kept_shots: stats.count,
        post_selection_rate: stats.count as f64 / cfg.shots as f64,
        mean_reading: mean,
        stderr: stats.stderr(),
        rescaled_mean: mean / scale,
        rescaled_stderr: stats.stderr() / scale.abs(),
        grid_mean: dist.mean(),
        stats,
    }
}

fn response_for(cfg: &SimConfig) -> Result<f64> {
    match cfg.readout {
        Readout::Position => Ok(1.0),
        Readout::Momentum => momentum_response(cfg),
    }
}

pub fn run_weak_measurement(
    a: &Observable,
    i: &PureState,
    basis: &FinalBasis,
    cfg: &SimConfig,
) -> Result<Vec<PointerRecord>> {
    run_weak_measurement_with(a, i, basis, cfg, Execution::default())
}

/// Samples post-selection outcomes over the whole basis and pointer readings
/// for each; one record per outcome with non-negligible probability.
pub fn run_weak_measurement_with(
    a: &Observable,
    i: &PureState,
    basis: &FinalBasis,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<Vec<PointerRecord>> {
    cfg.validate()?;
    let mut probs = Vec::with_capacity(basis.dim());
    let mut dists = Vec::with_capacity(basis.dim());
    for f in basis.vectors() {
        match conditional_pointer_distribution(a, i, f, cfg) {
            Ok(d) => {
                probs.push(d.prob);
                dists.push(Some(d));
            }
            Err(Error::PostSelectionStarved { .. }) => {
                probs.push(0.0);
                dists.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    if dists.iter().all(Option::is_none) {
        return Err(Error::PostSelectionStarved { prob: 0.0 });
    }
    let response = response_for(cfg)?;
    let outcomes = Outcomes::new(probs, dists);
    let stats = outcomes.run(cfg.seed, cfg.shots, exec);
    Ok(outcomes
        .dists
        .iter()
        .zip(stats)
        .enumerate()
        .filter_map(|(k, (d, s))| {
            d.as_ref()
                .map(|d| record(basis.label(k), cfg, s, d, response))
        })
        .collect())
}

/// Samples only "f or not f": the shots kept are those post-selected on `f`.
pub fn run_postselected(
    a: &Observable,
    i: &PureState,
    f: &PureState,
    cfg: &SimConfig,
    exec: Execution,
) -> Result<PointerRecord> {
    let dist = conditional_pointer_distribution(a, i, f, cfg)?;
    let response = response_for(cfg)?;
    let p = dist.prob.min(1.0);
    let outcomes = Outcomes::new(vec![p, 1.0 - p], vec![Some(dist), None]);
    let stats = outcomes.run(cfg.seed, cfg.shots, exec);
    let dist = outcomes.dists[0].as_ref().expect("kept outcome");
    Ok(record(
        f.label_or("f").to_owned(),
        cfg,
        stats[0],
        dist,
        response,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extrapolation {
    /// Zero-coupling intercept of `rescaled_mean(g) = w + c g²`.
    pub estimate: f64,
    /// Standard error of the intercept.
    pub ci: f64,
    pub curvature: f64,
    pub points: Vec<PointerRecord>,
}

/// Seed for the `k`-th coupling of an extrapolation run (splitmix64 step).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn extrapolate_weak_value(
    a: &Observable,
    i: &PureState,
    f: &PureState,
    base_cfg: &SimConfig,
    couplings: &[f64],
) -> Result<Extrapolation> {
    extrapolate_weak_value_with(a, i, f, base_cfg, couplings, Execution::default())
}

/// Weighted least-squares fit of `w + c g²` over several weak couplings.
pub fn extrapolate_weak_value_with(
    a: &Observable,
    i: &PureState,
    f: &PureState,
    base_cfg: &SimConfig,
    couplings: &[f64],
    exec: Execution,
) -> Result<Extrapolation> {
    let mut distinct: Vec<f64> = couplings.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3
        || distinct
            .iter()
            .any(|g| !(*g > 0.0 && *g <= 0.5 * base_cfg.sigma))
    {
        return Err(Error::InsufficientCouplings(distinct.len()));
    }
    let points = couplings
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            let cfg = SimConfig {
                g,
                seed: derive_seed(base_cfg.seed, k as u64),
                ..base_cfg.clone()
            };
            run_postselected(a, i, f, &cfg, exec)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(p) = points.iter().find(|p| p.kept_shots < 2) {
        return Err(Error::PostSelectionStarved {
            prob: p.post_selection_rate,
        });
    }
    let (estimate, ci, curvature) = weighted_quadratic_fit(
        points
            .iter()
            .map(|p| (p.g * p.g, p.rescaled_mean, p.rescaled_stderr)),
    );
    Ok(Extrapolation {
        estimate,
        ci,
        curvature,
        points,
    })
}

/// Fits `y = w + c x` with weights `1/s²`; returns `(w, stderr(w), c)`.
fn weighted_quadratic_fit(data: impl Iterator<Item = (f64, f64, f64)>) -> (f64, f64, f64) {
    let (mut s, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y, err) in data {
        let w = 1.0 / (err * err);
        s += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (s * sxy - sx * sy) / det;
    (intercept, (sxx / det).sqrt(), slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{haar_random_state, random_hermitian};
    use crate::states::{born_weight, pauli, pauli_sum, Pauli};
    use crate::weak::weak_value;

    fn x_plus_y() -> Observable {
        pauli_sum(&[(Pauli::X, 1.0), (Pauli::Y, 1.0)]).unwrap()
    }

    fn xp() -> PureState {
        PureState::preset("x+").unwrap()
    }

    fn yp() -> PureState {
        PureState::preset("y+").unwrap()
    }

    fn cfg(g: f64) -> SimConfig {
        SimConfig {
            g,
            ..SimConfig::default()
        }
    }

    /// Direct trapezoid quadrature of `x |psi_f(x)|²` on a finer grid.
    fn oracle_mean(
        a: &Observable,
        i: &PureState,
        f: &PureState,
        g: f64,
        sigma: f64,
        points: usize,
    ) -> f64 {
        let amps: Vec<(f64, C64)> = a
            .eigenspaces()
            .iter()
            .map(|e| {
                (
                    e.value,
                    f.ket().inner(&e.projector.apply(i.ket()).unwrap()).unwrap(),
                )
            })
            .collect();
        let half = 14.0 * sigma + g * 3.0;
        let dx = 2.0 * half / (points - 1) as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..points {
            let x = -half + j as f64 * dx;
            let w = if j == 0 || j == points - 1 { 0.5 } else { 1.0 };
            let psi: C64 = amps
                .iter()
                .map(|(ak, c)| c * (-(x - g * ak).powi(2) / (4.0 * sigma * sigma)).exp())
                .sum();
            num += w * x * psi.norm_sqr();
            den += w * psi.norm_sqr();
        }
        num / den
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::default().validate().is_ok());
        assert!(SimConfig {
            shots: 0,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        assert!(cfg(0.0).validate().is_err());
        assert!(SimConfig {
            sigma: -1.0,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        let mut c = SimConfig::default();
        c.grid.points = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_coupling_limit_recovers_born_weight() {
        let a = x_plus_y();
        let d = conditional_pointer_distribution(&a, &xp(), &yp(), &cfg(1e-3)).unwrap();
        assert!((d.prob - born_weight(&xp(), &yp()).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn multiple_of_identity_gives_shifted_gaussian() {
        let a = Observable::new(
            "3I",
            crate::numerics::ComplexMatrix::identity(2).scale_real(3.0),
        )
        .unwrap();
        let c = cfg(0.4);
        for f in FinalBasis::preset("y").unwrap().vectors() {
            let d = conditional_pointer_distribution(&a, &xp(), f, &c).unwrap();
            assert!((d.mean() - 1.2).abs() <= 1e-9);
            let peak = d.grid[d
                .density
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1))
                .unwrap()
                .0];
            assert!((peak - 1.2).abs() <= d.dx());
        }
    }

    #[test]
    fn demo_density_mean_matches_fine_quadrature() {
        let a = x_plus_y();
        let g = 0.05;
        let d = conditional_pointer_distribution(&a, &xp(), &yp(), &cfg(g)).unwrap();
        let oracle = oracle_mean(&a, &xp(), &yp(), g, 1.0, 40_960);
        assert!((d.mean() - oracle).abs() <= 0.005 * oracle.abs());
        assert!((d.mean() - 2.0 * g).abs() <= 0.005 * 2.0 * g);
    }

    #[test]
    fn probabilities_and_densities_are_normalized() {
        let mut rng = SeededRng::new(60, 0);
        for dim in 2..=5 {
            let a = Observable::new("H", random_hermitian(dim, &mut rng)).unwrap();
            let i = PureState::new(haar_random_state(dim, &mut rng).unwrap(), None).unwrap();
            let basis = FinalBasis::eigenbasis(
                &Observable::new("G", random_hermitian(dim, &mut rng)).unwrap(),
            );
            for readout in [Readout::Position, Readout::Momentum] {
                let c = SimConfig {
                    g: 0.3,
                    readout,
                    ..SimConfig::default()
                };
                let mut total = 0.0;
                for f in basis.vectors() {
                    let d = conditional_pointer_distribution(&a, &i, f, &c).unwrap();
                    assert!(d.density.iter().all(|r| *r >= 0.0));
                    assert!((d.norm() - 1.0).abs() <= 1e-9);
                    total += d.prob;
                }
                assert!((total - 1.0).abs() <= 1e-9, "{readout:?} total {total}");
            }
        }
    }

    #[test]
    fn starved_outcome_is_an_error() {
        let a = pauli(Pauli::Z);
        let z_plus = PureState::preset("z+").unwrap();
        let z_minus = PureState::preset("z-").unwrap();
        let r = conditional_pointer_distribution(&a, &z_plus, &z_minus, &cfg(0.1));
        assert!(matches!(r, Err(Error::PostSelectionStarved { .. })));
        // every outcome starved is impossible for a complete basis, but a lone
        // orthogonal outcome is simply dropped
        let recs = run_weak_measurement(&a, &z_plus, &FinalBasis::preset("z").unwrap(), &cfg(0.1))
            .unwrap();
        assert_eq!(recs.len(), 1);
    }

    #[test]
    fn weak_regime_reproduces_weak_value() {
        let a = x_plus_y();
        let basis = FinalBasis::preset("y").unwrap();
        let recs = run_weak_measurement(&a, &xp(), &basis, &cfg(0.05)).unwrap();
        let up = &recs[0];
        assert_eq!(up.final_label, "y+");
        assert!(
            (up.rescaled_mean - 2.0).abs() <= 5.0 * up.rescaled_stderr,
            "{up:?}"
        );
        assert!((up.grid_mean / up.g - 2.0).abs() <= 0.02 * 2.0);
        assert!((up.post_selection_rate - 0.5).abs() <= 0.01);
    }

    #[test]
    fn strong_regime_separates_eigenvalues() {
        let a = pauli(Pauli::Z);
        let basis = FinalBasis::eigenbasis(&a);
        let c = SimConfig {
            g: 20.0,
            shots: 50_000,
            ..SimConfig::default()
        };
        let recs = run_weak_measurement(&a, &xp(), &basis, &c).unwrap();
        for (rec, f) in recs.iter().zip(basis.vectors()) {
            let d = conditional_pointer_distribution(&a, &xp(), f, &c).unwrap();
            let eigen = weak_value(&a, f, f).unwrap().value.re;
            // mass on the wrong half-line
            let wrong: f64 = d
                .grid
                .iter()
                .zip(&d.density)
                .filter(|(x, _)| **x * eigen < 0.0)
                .map(|(_, r)| r * d.dx())
                .sum();
            assert!(wrong < 1e-4);
            assert!((rec.mean_reading - 20.0 * eigen).abs() <= 5.0 * rec.stderr);
        }
    }

    #[test]
    fn momentum_readout_tracks_imaginary_part() {
        // sigma_z between |x+> and |y+> has weak value exactly i
        let z = pauli(Pauli::Z);
        let w = weak_value(&z, &xp(), &yp()).unwrap().value;
        assert!((w - C64::new(0.0, 1.0)).norm() <= 1e-12);

        let c = SimConfig {
            g: 0.05,
            readout: Readout::Momentum,
            ..SimConfig::default()
        };
        let response = momentum_response(&c).unwrap();
        // first-order pointer theory: <p> = g Im(w) / (2 sigma²)
        assert!((response - 0.5).abs() <= 0.01 * 0.5, "response {response}");

        let rec = run_postselected(&z, &xp(), &yp(), &c, Execution::default()).unwrap();
        assert!(rec.rescaled_mean > 0.0);
        assert!((rec.rescaled_mean - w.im).abs() <= 5.0 * rec.rescaled_stderr);

        let ym = PureState::preset("y-").unwrap();
        let rec = run_postselected(&z, &xp(), &ym, &c, Execution::default()).unwrap();
        assert!(rec.rescaled_mean < 0.0);
    }

    #[test]
    fn bias_shrinks_as_coupling_decreases() {
        let a = x_plus_y();
        let biases: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&g| {
                let d = conditional_pointer_distribution(&a, &xp(), &yp(), &cfg(g)).unwrap();
                (d.mean() / g - 2.0).abs()
            })
            .collect();
        assert!(biases[0] > biases[1] && biases[1] > biases[2], "{biases:?}");
        // closed form for this scenario: mean/g = 2 / (1 + (1 - exp(-g²)) / 2)
        for (&g, b) in [0.2f64, 0.1, 0.05].iter().zip(&biases) {
            assert!(
                (b - (2.0 - 2.0 / (1.0 + (1.0 - (-g * g).exp()) / 2.0))).abs() <= 1e-6,
                "g={g} bias={b}"
            );
        }
        let basis = FinalBasis::preset("y").unwrap();
        for g in [0.2, 0.1, 0.05] {
            let rec = &run_weak_measurement(&a, &xp(), &basis, &cfg(g)).unwrap()[0];
            let allowed = (5.0 * rec.rescaled_stderr).max(0.05 * g * g * a.spectral_range());
            assert!((rec.rescaled_mean - 2.0).abs() <= allowed, "g={g} {rec:?}");
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let a = x_plus_y();
        let basis = FinalBasis::preset("y").unwrap();
        let c = SimConfig {
            shots: 100_000,
            ..cfg(0.1)
        };
        let seq = run_weak_measurement_with(&a, &xp(), &basis, &c, Execution::Sequential).unwrap();
        let par = run_weak_measurement_with(&a, &xp(), &basis, &c, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        let again = run_weak_measurement_with(&a, &xp(), &basis, &c, Execution::Parallel).unwrap();
        assert_eq!(par, again);
    }

    #[test]
    fn merge_is_associative_on_counts_and_exact_on_integers() {
        let parts = [
            ReadingStats {
                count: 3,
                sum: 1.0,
                sum_sq: 2.0,
            },
            ReadingStats {
                count: 5,
                sum: -4.0,
                sum_sq: 8.0,
            },
            ReadingStats {
                count: 2,
                sum: 0.5,
                sum_sq: 0.25,
            },
        ];
        let left = parts[0].merge(parts[1]).merge(parts[2]);
        let right = parts[2].merge(parts[1]).merge(parts[0]);
        assert_eq!(left, right);
    }

    #[test]
    fn extrapolation_recovers_demo_weak_value() {
        let a = x_plus_y();
        let base = SimConfig {
            shots: 100_000,
            ..SimConfig::default()
        };
        let ex = extrapolate_weak_value(&a, &xp(), &yp(), &base, &[0.05, 0.1, 0.2]).unwrap();
        assert!(
            (ex.estimate - 2.0).abs() <= 3.0 * ex.ci,
            "{} +- {}",
            ex.estimate,
            ex.ci
        );
        assert_eq!(ex.points.len(), 3);
    }

    #[test]
    fn extrapolation_on_eigenstate() {
        let a = pauli(Pauli::X);
        let base = SimConfig {
            shots: 100_000,
            ..SimConfig::default()
        };
        let ex = extrapolate_weak_value(&a, &xp(), &yp(), &base, &[0.05, 0.1, 0.2]).unwrap();
        assert!((ex.estimate - 1.0).abs() <= 3.0 * ex.ci);
    }

    #[test]
    fn extrapolation_needs_three_weak_couplings() {
        let a = x_plus_y();
        let base = SimConfig::default();
        for bad in [&[0.05, 0.1][..], &[0.05, 0.05, 0.1], &[0.05, 0.1, 0.9]] {
            assert!(matches!(
                extrapolate_weak_value(&a, &xp(), &yp(), &base, bad),
                Err(Error::InsufficientCouplings(_))
            ));
        }
    }

    #[test]
    fn weighted_fit_is_exact_on_noiseless_quadratic() {
        let data = [
            (0.01, 2.0 + 3.0 * 0.01, 0.1),
            (0.04, 2.0 + 3.0 * 0.04, 0.2),
            (0.09, 2.0 + 3.0 * 0.09, 0.3),
        ];
        let (w, _, c) = weighted_quadratic_fit(data.into_iter());
        assert!((w - 2.0).abs() <= 1e-12);
        assert!((c - 3.0).abs() <= 1e-10);
    }
}
