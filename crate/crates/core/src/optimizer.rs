//! Near-optimal strategy families, Bob's best response, and the `√ε` scaling study.
//!
//! Randomness comes from `ChaCha8Rng`. A strategy is fully determined by
//! `(delta, seed, mode)`; generators are always drawn in the same order
//! (one per context C..G, one per vertex 1..10, then the state noise) so the
//! mode only selects which of them are applied.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Context, Vertex};
use crate::rigidity::{certify, RigidityError};
use crate::strategy::{ideal_strategy, score_unchecked, standard_game, validate, ReflectionStrategy, StrategyError, ValidationReport, DEFAULT_TOL};
use crate::tensor::{exp_i_hermitian, hermitian_eigendecomposition, hermitian_sign, ComplexMatrix, LinalgError, C64};

const IDEAL_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Rigidity(#[from] RigidityError),
    #[error("invalid perturbation: {0}")]
    BadSpec(String),
    #[error("generated strategy failed validation (delta {delta}, seed {seed}): {report}")]
    Validation {
        delta: f64,
        seed: u64,
        report: ValidationReport,
    },
    #[error("target epsilon {target} unreachable: {reason}")]
    Unreachable { target: f64, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationMode {
    ContextUnitaries,
    BobUnitaries,
    StateNoise,
    Combined,
}

impl PerturbationMode {
    pub const ALL: [PerturbationMode; 4] = [
        PerturbationMode::ContextUnitaries,
        PerturbationMode::BobUnitaries,
        PerturbationMode::StateNoise,
        PerturbationMode::Combined,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PerturbationMode::ContextUnitaries => "context-unitaries",
            PerturbationMode::BobUnitaries => "bob-unitaries",
            PerturbationMode::StateNoise => "state-noise",
            PerturbationMode::Combined => "combined",
        }
    }

    fn alice(self) -> bool {
        matches!(self, PerturbationMode::ContextUnitaries | PerturbationMode::Combined)
    }

    fn bob(self) -> bool {
        matches!(self, PerturbationMode::BobUnitaries | PerturbationMode::Combined)
    }

    fn state(self) -> bool {
        matches!(self, PerturbationMode::StateNoise | PerturbationMode::Combined)
    }
}

impl fmt::Display for PerturbationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PerturbationMode {
    type Err = OptimizerError;
    fn from_str(s: &str) -> Result<Self, OptimizerError> {
        Self::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| OptimizerError::BadSpec(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub delta: f64,
    pub seed: u64,
    pub mode: PerturbationMode,
}

impl PerturbationSpec {
    pub fn new(delta: f64, seed: u64, mode: PerturbationMode) -> Result<Self, OptimizerError> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(OptimizerError::BadSpec(format!("delta {delta} outside [0, 1]")));
        }
        Ok(Self { delta, seed, mode })
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        entries.push(C64::new(re, im));
    }
    ComplexMatrix::from_row_major(n, n, entries).expect("finite gaussian entries")
}

/// Hermitized complex Gaussian matrix with operator norm 1.
pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> Result<ComplexMatrix, LinalgError> {
    let h = gaussian_matrix(rng, n).hermitian_part();
    let eig = hermitian_eigendecomposition(&h)?;
    let spectral = eig.values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(h.scale_real(1.0 / spectral))
}

fn conjugate(u: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    &(u * m) * &u.adjoint()
}

/// Ideal strategy with each context conjugated by `exp(iδH_j)`, each `S_v` by
/// `exp(iδG_v)`, and/or `L ← normalize(L + δW)` with `‖W‖ = 1`, per `spec.mode`.
pub fn perturb_ideal(spec: &PerturbationSpec) -> Result<ReflectionStrategy, OptimizerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let context_generators = Context::ALL
        .iter()
        .map(|_| random_hermitian(&mut rng, IDEAL_DIM))
        .collect::<Result<Vec<_>, _>>()?;
    let bob_generators = Vertex::all()
        .map(|_| random_hermitian(&mut rng, IDEAL_DIM))
        .collect::<Result<Vec<_>, _>>()?;
    let noise = gaussian_matrix(&mut rng, IDEAL_DIM);
    let noise = noise.scale_real(1.0 / noise.frobenius_norm());

    let mut r = ideal_strategy();
    if spec.delta == 0.0 {
        return Ok(r);
    }
    if spec.mode.alice() {
        let unitaries = context_generators
            .iter()
            .map(|h| exp_i_hermitian(h, spec.delta))
            .collect::<Result<Vec<_>, _>>()?;
        r = r.map_alice(|c, _, m| conjugate(&unitaries[c.index()], m))?;
    }
    if spec.mode.bob() {
        let unitaries = bob_generators
            .iter()
            .map(|g| exp_i_hermitian(g, spec.delta))
            .collect::<Result<Vec<_>, _>>()?;
        r = r.map_bob(|v, s| conjugate(&unitaries[v.index()], s))?;
    }
    if spec.mode.state() {
        let l = r.state() + &noise.scale_real(spec.delta);
        let l = l.scale_real(1.0 / l.frobenius_norm());
        r = r.with_state(l)?;
    }
    Ok(r)
}

/// Replaces each `S_v` with `sign(Σ_{j∋v} L† R_v^j L)`, the exact maximizer of
/// Bob's share of the score given Alice's operators and `L`.
pub fn bob_best_response(r: &ReflectionStrategy) -> Result<ReflectionStrategy, OptimizerError> {
    let game = standard_game();
    let l = r.state();
    let l_dag = l.adjoint();
    let mut bob = Vec::with_capacity(10);
    for v in Vertex::all() {
        let w = game
            .contexts_of(v)
            .iter()
            .fold(ComplexMatrix::zeros(r.dim_b(), r.dim_b()), |acc, &c| {
                &acc + &(&(&l_dag * r.alice(c, v)) * l)
            });
        bob.push(hermitian_sign(&w.hermitian_part())?);
    }
    Ok(r.with_bob(bob)?)
}

/// Winning probability shortfall `1 − score`, clamped to `[0, 1]`.
pub fn epsilon(r: &ReflectionStrategy) -> f64 {
    (1.0 - score_unchecked(r)).clamp(0.0, 1.0)
}

fn epsilon_at(delta: f64, mode: PerturbationMode, seed: u64) -> Result<f64, OptimizerError> {
    let spec = PerturbationSpec::new(delta, seed, mode)?;
    Ok(epsilon(&perturb_ideal(&spec)?))
}

pub const CALIBRATION_MAX_ITER: usize = 60;

/// Bisects `delta` until `|ε(delta) − target| ≤ 0.1·target`.
pub fn calibrate_delta(target: f64, mode: PerturbationMode, seed: u64) -> Result<PerturbationSpec, OptimizerError> {
    if !(target > 0.0 && target <= 0.1) {
        return Err(OptimizerError::BadSpec(format!("target epsilon {target} outside (0, 0.1]")));
    }
    let unreachable = |reason: String| OptimizerError::Unreachable { target, reason };
    let within = |eps: f64| (eps - target).abs() <= 0.1 * target;

    let (mut lo, mut eps_lo) = (0.0, 0.0);
    let mut hi = 1e-3;
    let mut eps_hi = epsilon_at(hi, mode, seed)?;
    let mut iterations = 1;
    while eps_hi < target {
        if hi >= 1.0 {
            return Err(unreachable(format!("epsilon only reaches {eps_hi:.3e} at delta = 1")));
        }
        if eps_hi < eps_lo {
            return Err(unreachable(format!("epsilon not increasing below delta {hi}")));
        }
        lo = hi;
        eps_lo = eps_hi;
        hi = (hi * 2.0).min(1.0);
        eps_hi = epsilon_at(hi, mode, seed)?;
        iterations += 1;
    }
    if within(eps_hi) {
        return PerturbationSpec::new(hi, seed, mode);
    }
    while iterations < CALIBRATION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let eps_mid = epsilon_at(mid, mode, seed)?;
        iterations += 1;
        if eps_mid < eps_lo || eps_mid > eps_hi {
            return Err(unreachable(format!(
                "epsilon not monotone on [{lo:.6e}, {hi:.6e}]"
            )));
        }
        if within(eps_mid) {
            return PerturbationSpec::new(mid, seed, mode);
        }
        if eps_mid < target {
            lo = mid;
            eps_lo = eps_mid;
        } else {
            hi = mid;
            eps_hi = eps_mid;
        }
    }
    Err(unreachable(format!("no convergence after {CALIBRATION_MAX_ITER} iterations")))
}

/// Per-sample seed derived from the study seed and the sample's grid position.
pub fn sample_seed(seed: u64, delta_index: usize, sample_index: usize) -> u64 {
    // splitmix64 step over a packed key
    let key = (delta_index as u64) << 32 | sample_index as u64;
    let mut z = (seed ^ key.rotate_left(17)).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub delta: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub state_residual: f64,
    pub max_op_residual: f64,
    pub max_consistency_residual: f64,
    pub ratio_state: f64,
    pub ratio_op: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub max_ratio_state: f64,
    pub max_ratio_op: f64,
    pub n_rows: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub deltas: Vec<f64>,
    pub samples_per_delta: usize,
    pub seed: u64,
    pub mode: PerturbationMode,
}

#[derive(Clone, Debug)]
pub struct StudyOutput {
    pub rows: Vec<ScalingRow>,
    pub summary: FitSummary,
}

/// `delta` values spaced evenly in log scale from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

fn ratio(x: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        x / eps.sqrt()
    } else {
        0.0
    }
}

pub fn study_row(spec: &PerturbationSpec) -> Result<ScalingRow, OptimizerError> {
    let r = perturb_ideal(spec)?;
    let report = validate(&r, DEFAULT_TOL);
    if !report.pass {
        return Err(OptimizerError::Validation {
            delta: spec.delta,
            seed: spec.seed,
            report,
        });
    }
    let cert = certify(&r)?;
    let max_op = cert.max_op_residual();
    Ok(ScalingRow {
        delta: spec.delta,
        seed: spec.seed,
        epsilon: cert.epsilon,
        state_residual: cert.state_residual,
        max_op_residual: max_op,
        max_consistency_residual: cert.max_consistency_residual(),
        ratio_state: ratio(cert.state_residual, cert.epsilon),
        ratio_op: ratio(max_op, cert.epsilon),
    })
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit of `log(state_residual)` against `log(ε)` over rows where both are positive.
pub fn fit(rows: &[ScalingRow]) -> FitSummary {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.epsilon > 0.0 && r.state_residual > 0.0)
        .map(|r| (r.epsilon.ln(), r.state_residual.ln()))
        .collect();
    let (slope, intercept) = least_squares(&points);
    FitSummary {
        slope,
        intercept,
        max_ratio_state: rows.iter().map(|r| r.ratio_state).fold(0.0, f64::max),
        max_ratio_op: rows.iter().map(|r| r.ratio_op).fold(0.0, f64::max),
        n_rows: rows.len(),
    }
}

/// Runs every `(delta, sample)` cell in parallel; row order is grid order.
pub fn scaling_study(config: &StudyConfig) -> Result<StudyOutput, OptimizerError> {
    if config.deltas.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(OptimizerError::BadSpec("deltas must lie in (0, 1]".into()));
    }
    if config.deltas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OptimizerError::BadSpec("deltas must be strictly ascending".into()));
    }
    let cells: Vec<(usize, usize)> = (0..config.deltas.len())
        .flat_map(|d| (0..config.samples_per_delta).map(move |s| (d, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(d, s)| {
            let spec = PerturbationSpec::new(config.deltas[d], sample_seed(config.seed, d, s), config.mode)?;
            study_row(&spec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = fit(&rows);
    Ok(StudyOutput { rows, summary })
}

pub const CSV_HEADER: &str = "delta,seed,epsilon,state_residual,max_op_residual,max_consistency_residual,ratio_state,ratio_op";

/// Twelve significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv<W: Write>(rows: &[ScalingRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_float(r.delta),
            r.seed,
            format_float(r.epsilon),
            format_float(r.state_residual),
            format_float(r.max_op_residual),
            format_float(r.max_consistency_residual),
            format_float(r.ratio_state),
            format_float(r.ratio_op),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{score, validate};

    fn spec(delta: f64, seed: u64, mode: PerturbationMode) -> PerturbationSpec {
        PerturbationSpec::new(delta, seed, mode).unwrap()
    }

    #[test]
    fn zero_delta_is_ideal() {
        for mode in PerturbationMode::ALL {
            let r = perturb_ideal(&spec(0.0, 3, mode)).unwrap();
            assert_eq!(r, ideal_strategy());
            assert!((score(&r).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_strategies_stay_valid() {
        for mode in PerturbationMode::ALL {
            for seed in 0..4 {
                let r = perturb_ideal(&spec(1e-3, seed, mode)).unwrap();
                let report = validate(&r, 1e-10);
                assert!(report.pass, "{mode} {seed}: {report}");
                assert!(epsilon(&r) > 0.0, "{mode} {seed}");
            }
        }
        let r = perturb_ideal(&spec(1.0, 9, PerturbationMode::Combined)).unwrap();
        assert!(validate(&r, 1e-10).pass);
    }

    #[test]
    fn perturbation_is_reproducible() {
        let a = perturb_ideal(&spec(0.05, 17, PerturbationMode::Combined)).unwrap();
        let b = perturb_ideal(&spec(0.05, 17, PerturbationMode::Combined)).unwrap();
        assert_eq!(a, b);
        let c = perturb_ideal(&spec(0.05, 18, PerturbationMode::Combined)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_specs_rejected() {
        assert!(PerturbationSpec::new(-0.1, 0, PerturbationMode::Combined).is_err());
        assert!(PerturbationSpec::new(1.5, 0, PerturbationMode::Combined).is_err());
        assert!("sideways".parse::<PerturbationMode>().is_err());
        assert_eq!("state-noise".parse::<PerturbationMode>().unwrap(), PerturbationMode::StateNoise);
    }

    #[test]
    fn random_hermitian_has_unit_operator_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 8).unwrap();
        assert!(h.hermiticity_deviation() < 1e-14);
        assert!((h.operator_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_is_quadratic_in_delta() {
        for mode in PerturbationMode::ALL {
            let deltas = logspace(1e-3, 1e-2, 5);
            let pts: Vec<(f64, f64)> = deltas
                .iter()
                .map(|&d| (d.ln(), epsilon_at(d, mode, 11).unwrap().ln()))
                .collect();
            let (slope, _) = least_squares(&pts);
            assert!((1.8..=2.2).contains(&slope), "{mode}: slope {slope}");
        }
    }

    #[test]
    fn best_response_fixes_ideal() {
        let r = ideal_strategy();
        let br = bob_best_response(&r).unwrap();
        for v in Vertex::all() {
            assert!((br.bob(v) - r.bob(v)).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn best_response_recovers_ideal_bob() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scrambled = ideal_strategy()
            .map_bob(|_, _| {
                let h = random_hermitian(&mut rng, 8).unwrap();
                hermitian_sign(&h).unwrap()
            })
            .unwrap();
        assert!(score(&scrambled).unwrap() < 0.9);
        let br = bob_best_response(&scrambled).unwrap();
        assert!((score(&br).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_response_is_idempotent() {
        let r = perturb_ideal(&spec(0.2, 4, PerturbationMode::Combined)).unwrap();
        let once = bob_best_response(&r).unwrap();
        let twice = bob_best_response(&once).unwrap();
        assert!((score_unchecked(&once) - score_unchecked(&twice)).abs() <= 1e-12);
        assert!(score_unchecked(&once) >= score_unchecked(&r) - 1e-12);
    }

    #[test]
    fn calibration_hits_target() {
        for &target in &[1e-4, 1e-3] {
            let s = calibrate_delta(target, PerturbationMode::Combined, 2).unwrap();
            let eps = epsilon(&perturb_ideal(&s).unwrap());
            assert!((eps - target).abs() <= 0.1 * target, "{target}: {eps}");
        }
        assert!(matches!(
            calibrate_delta(0.0, PerturbationMode::Combined, 2),
            Err(OptimizerError::BadSpec(_))
        ));
        assert!(calibrate_delta(0.2, PerturbationMode::Combined, 2).is_err());
    }

    #[test]
    fn sample_seeds_differ_across_grid() {
        let mut seen = std::collections::HashSet::new();
        for d in 0..10 {
            for s in 0..10 {
                assert!(seen.insert(sample_seed(7, d, s)));
            }
        }
        assert_eq!(sample_seed(7, 2, 3), sample_seed(7, 2, 3));
    }

    #[test]
    fn least_squares_recovers_line() {
        let pts: Vec<_> = (0..5).map(|k| (k as f64, 0.5 * k as f64 - 2.0)).collect();
        let (m, b) = least_squares(&pts);
        assert!((m - 0.5).abs() < 1e-14 && (b + 2.0).abs() < 1e-14);
    }

    #[test]
    fn csv_layout() {
        let row = ScalingRow {
            delta: 0.01,
            seed: 42,
            epsilon: 2.5e-5,
            state_residual: 1e-3,
            max_op_residual: 2e-3,
            max_consistency_residual: 3e-3,
            ratio_state: 0.2,
            ratio_op: 0.4,
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "1.00000000000e-2,42,2.50000000000e-5,1.00000000000e-3,2.00000000000e-3,3.00000000000e-3,2.00000000000e-1,4.00000000000e-1"
        );
    }

    #[test]
    fn study_rejects_bad_grid() {
        let cfg = StudyConfig {
            deltas: vec![0.1, 0.01],
            samples_per_delta: 1,
            seed: 0,
            mode: PerturbationMode::Combined,
        };
        assert!(scaling_study(&cfg).is_err());
    }
}
