//! Projective and reflection strategies, conversion between them, and scoring.
//!
//! The shared state is carried as its coefficient matrix `L[a][b] = ⟨a|⟨b|ψ⟩`.
//! Alice's operators act on `L` from the left and Bob's from the right, so the
//! physical observable Bob measures is `S_v` transposed. Every formula here uses
//! the right-multiplication form; for real symmetric operators the two agree.

use std::fmt;
use std::sync::OnceLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{ClassicalStrategy, Context, PentagramGame, Question, Vertex, CONTEXT_SIZE, NUM_CONTEXTS, NUM_QUESTIONS, NUM_VERTICES};
use crate::tensor::{kron_all, pauli_x, pauli_z, product, ComplexMatrix, LinalgError, HERMITIAN_TOL};

/// Default tolerance for strategy validation.
pub const DEFAULT_TOL: f64 = HERMITIAN_TOL;

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid reflection strategy: {0}")]
    Invalid(ValidationReport),
    #[error("invalid measurement: {0}")]
    Measurement(String),
    #[error("malformed strategy file: {0}")]
    Format(String),
}

/// The standard pentagram every strategy is defined over.
pub fn standard_game() -> &'static PentagramGame {
    static GAME: OnceLock<PentagramGame> = OnceLock::new();
    GAME.get_or_init(PentagramGame::standard)
}

fn v(id: u8) -> Vertex {
    Vertex::new(id).expect("static vertex id")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionStrategy {
    state: ComplexMatrix,
    alice: Vec<Vec<ComplexMatrix>>,
    bob: Vec<ComplexMatrix>,
}

impl ReflectionStrategy {
    /// `alice[c][k]` is `R_v^c` for the `k`-th vertex of context `c` (sorted order);
    /// `bob[v - 1]` is `S_v`. Only shapes are checked here; see [`validate`].
    pub fn new(
        state: ComplexMatrix,
        alice: Vec<Vec<ComplexMatrix>>,
        bob: Vec<ComplexMatrix>,
    ) -> Result<Self, StrategyError> {
        let (da, db) = state.shape();
        if alice.len() != NUM_CONTEXTS || alice.iter().any(|ops| ops.len() != CONTEXT_SIZE) {
            return Err(StrategyError::Shape("Alice needs 4 reflections in each of 5 contexts".into()));
        }
        if bob.len() != NUM_VERTICES {
            return Err(StrategyError::Shape("Bob needs one reflection per vertex".into()));
        }
        if let Some(m) = alice.iter().flatten().find(|m| m.shape() != (da, da)) {
            return Err(StrategyError::Shape(format!(
                "Alice operator is {:?}, expected {da}x{da}",
                m.shape()
            )));
        }
        if let Some(m) = bob.iter().find(|m| m.shape() != (db, db)) {
            return Err(StrategyError::Shape(format!(
                "Bob operator is {:?}, expected {db}x{db}",
                m.shape()
            )));
        }
        Ok(Self { state, alice, bob })
    }

    pub fn dim_a(&self) -> usize {
        self.state.rows()
    }

    pub fn dim_b(&self) -> usize {
        self.state.cols()
    }

    /// The state matrix `L`.
    pub fn state(&self) -> &ComplexMatrix {
        &self.state
    }

    /// `R_v^c`; panics if `v ∉ c`.
    pub fn alice(&self, c: Context, v: Vertex) -> &ComplexMatrix {
        let slot = standard_game()
            .slot(c, v)
            .unwrap_or_else(|| panic!("vertex {v} is not in context {c}"));
        &self.alice[c.index()][slot]
    }

    pub fn alice_context(&self, c: Context) -> &[ComplexMatrix] {
        &self.alice[c.index()]
    }

    /// `S_v`.
    pub fn bob(&self, v: Vertex) -> &ComplexMatrix {
        &self.bob[v.index()]
    }

    pub fn with_state(&self, state: ComplexMatrix) -> Result<Self, StrategyError> {
        Self::new(state, self.alice.clone(), self.bob.clone())
    }

    pub fn with_bob(&self, bob: Vec<ComplexMatrix>) -> Result<Self, StrategyError> {
        Self::new(self.state.clone(), self.alice.clone(), bob)
    }

    pub fn map_alice(&self, mut f: impl FnMut(Context, Vertex, &ComplexMatrix) -> ComplexMatrix) -> Result<Self, StrategyError> {
        let game = standard_game();
        let alice = Context::ALL
            .iter()
            .map(|&c| {
                game.vertices(c)
                    .iter()
                    .zip(&self.alice[c.index()])
                    .map(|(&v, m)| f(c, v, m))
                    .collect()
            })
            .collect();
        Self::new(self.state.clone(), alice, self.bob.clone())
    }

    pub fn map_bob(&self, mut f: impl FnMut(Vertex, &ComplexMatrix) -> ComplexMatrix) -> Result<Self, StrategyError> {
        let bob = Vertex::all().map(|v| f(v, self.bob(v))).collect();
        self.with_bob(bob)
    }

    /// One-dimensional embedding of a deterministic classical strategy.
    pub fn from_classical(strategy: &ClassicalStrategy) -> Result<Self, StrategyError> {
        let scalar = |x: i8| ComplexMatrix::from_real(1, 1, &[f64::from(x)]);
        let alice = Context::ALL
            .iter()
            .map(|&c| (0..CONTEXT_SIZE).map(|k| scalar(strategy.alice(c, k))).collect())
            .collect();
        let bob = Vertex::all().map(|v| scalar(strategy.bob(v))).collect();
        Self::new(ComplexMatrix::identity(1), alice, bob)
    }

    pub fn to_json(&self) -> StrategyJson {
        let game = standard_game();
        StrategyJson {
            dim_a: self.dim_a(),
            dim_b: self.dim_b(),
            state: self.state.clone(),
            alice: Context::ALL
                .iter()
                .map(|&c| {
                    let ops = game
                        .vertices(c)
                        .iter()
                        .map(|&v| (v.to_string(), self.alice(c, v).clone()))
                        .collect();
                    (c.to_string(), ops)
                })
                .collect(),
            bob: Vertex::all().map(|v| (v.to_string(), self.bob(v).clone())).collect(),
        }
    }

    pub fn from_json(json: StrategyJson) -> Result<Self, StrategyError> {
        let game = standard_game();
        if json.state.shape() != (json.dim_a, json.dim_b) {
            return Err(StrategyError::Format(format!(
                "L is {:?} but dims are {}x{}",
                json.state.shape(),
                json.dim_a,
                json.dim_b
            )));
        }
        let mut alice_json = json.alice;
        let mut alice = Vec::with_capacity(NUM_CONTEXTS);
        for c in Context::ALL {
            let mut ops = alice_json
                .shift_remove(c.label())
                .ok_or_else(|| StrategyError::Format(format!("missing context {c}")))?;
            let mut row = Vec::with_capacity(CONTEXT_SIZE);
            for &vx in game.vertices(c) {
                row.push(
                    ops.shift_remove(&vx.to_string())
                        .ok_or_else(|| StrategyError::Format(format!("missing R for vertex {vx} in {c}")))?,
                );
            }
            if let Some(extra) = ops.keys().next() {
                return Err(StrategyError::Format(format!("vertex {extra} is not in context {c}")));
            }
            alice.push(row);
        }
        if let Some(extra) = alice_json.keys().next() {
            return Err(StrategyError::Format(format!("unknown context {extra}")));
        }
        let mut bob_json = json.bob;
        let mut bob = Vec::with_capacity(NUM_VERTICES);
        for vx in Vertex::all() {
            bob.push(
                bob_json
                    .shift_remove(&vx.to_string())
                    .ok_or_else(|| StrategyError::Format(format!("missing S for vertex {vx}")))?,
            );
        }
        if let Some(extra) = bob_json.keys().next() {
            return Err(StrategyError::Format(format!("unknown vertex {extra}")));
        }
        Self::new(json.state, alice, bob)
    }
}

/// Wire form of `strategy.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyJson {
    pub dim_a: usize,
    pub dim_b: usize,
    #[serde(rename = "L")]
    pub state: ComplexMatrix,
    #[serde(rename = "R")]
    pub alice: IndexMap<String, IndexMap<String, ComplexMatrix>>,
    #[serde(rename = "S")]
    pub bob: IndexMap<String, ComplexMatrix>,
}

/// Maximum Frobenius deviations from each reflection-strategy constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub dim_a: usize,
    pub dim_b: usize,
    /// `max ‖R − R†‖` over Alice's and Bob's operators.
    pub hermiticity: f64,
    /// `max ‖R² − I‖`.
    pub square_to_identity: f64,
    /// `max ‖[R_v^j, R_w^j]‖` within a context.
    pub commutators: f64,
    /// `max_j ‖Π_{v∈j} R_v^j − ℓ(j) I‖`.
    pub context_products: f64,
    /// `|‖L‖ − 1|`.
    pub state_norm: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ValidationReport {
    /// Context-product deviation divided by `√dim_a` (per-entry scale, so a sign flip reads 2).
    pub fn normalized_context_products(&self) -> f64 {
        self.context_products / (self.dim_a as f64).sqrt()
    }

    pub fn max_deviation(&self) -> f64 {
        [
            self.hermiticity,
            self.square_to_identity,
            self.commutators,
            self.context_products,
            self.state_norm,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hermiticity={:.3e} square={:.3e} commutators={:.3e} products={:.3e} norm={:.3e} tol={:.1e} pass={}",
            self.hermiticity,
            self.square_to_identity,
            self.commutators,
            self.context_products,
            self.state_norm,
            self.tol,
            self.pass
        )
    }
}

pub fn validate(r: &ReflectionStrategy, tol: f64) -> ValidationReport {
    let game = standard_game();
    let all_ops = r.alice.iter().flatten().chain(r.bob.iter());
    let mut hermiticity: f64 = 0.0;
    let mut square: f64 = 0.0;
    for m in all_ops {
        hermiticity = hermiticity.max(m.hermiticity_deviation());
        let id = ComplexMatrix::identity(m.rows());
        square = square.max((&(m * m) - &id).frobenius_norm());
    }
    let mut commutators: f64 = 0.0;
    let mut products: f64 = 0.0;
    let id_a = ComplexMatrix::identity(r.dim_a());
    for c in Context::ALL {
        let ops = r.alice_context(c);
        for i in 0..ops.len() {
            for j in i + 1..ops.len() {
                commutators = commutators.max(ops[i].commutator(&ops[j]).frobenius_norm());
            }
        }
        let prod = product(r.dim_a(), ops);
        let target = id_a.scale_real(f64::from(game.label(c)));
        products = products.max((&prod - &target).frobenius_norm());
    }
    let state_norm = (r.state.frobenius_norm() - 1.0).abs();
    let mut report = ValidationReport {
        dim_a: r.dim_a(),
        dim_b: r.dim_b(),
        hermiticity,
        square_to_identity: square,
        commutators,
        context_products: products,
        state_norm,
        tol,
        pass: false,
    };
    report.pass = report.max_deviation() <= tol && r.state.is_finite();
    report
}

pub fn ensure_valid(r: &ReflectionStrategy, tol: f64) -> Result<(), StrategyError> {
    let report = validate(r, tol);
    if report.pass {
        Ok(())
    } else {
        Err(StrategyError::Invalid(report))
    }
}

/// Probability that Alice's answer for `R` and Bob's for `S` differ:
/// `‖((I+R)/2) L ((I−S)/2)‖² + ‖((I−R)/2) L ((I+S)/2)‖²`.
pub fn disagreement_probability(r: &ComplexMatrix, l: &ComplexMatrix, s: &ComplexMatrix) -> f64 {
    let half = |m: &ComplexMatrix, sign: f64| {
        let id = ComplexMatrix::identity(m.rows());
        (&id + &m.scale_real(sign)).scale_real(0.5)
    };
    let a = &(&half(r, 1.0) * l) * &half(s, -1.0);
    let b = &(&half(r, -1.0) * l) * &half(s, 1.0);
    a.frobenius_norm_sqr() + b.frobenius_norm_sqr()
}

/// Per-question losing probabilities in question order.
pub fn losing_terms(r: &ReflectionStrategy) -> Vec<(Question, f64)> {
    standard_game()
        .questions()
        .into_iter()
        .map(|q| {
            let term = disagreement_probability(r.alice(q.context, q.vertex), &r.state, r.bob(q.vertex));
            (q, term)
        })
        .collect()
}

/// Winning probability, `1 − mean(losing_terms)`.
pub fn score(r: &ReflectionStrategy) -> Result<f64, StrategyError> {
    ensure_valid(r, DEFAULT_TOL)?;
    Ok(score_unchecked(r))
}

/// [`score`] without validating first.
pub fn score_unchecked(r: &ReflectionStrategy) -> f64 {
    let lose: f64 = losing_terms(r).iter().map(|(_, t)| t).sum();
    1.0 - lose / NUM_QUESTIONS as f64
}

/// `‖R_v^j L − L S_v‖` for every question.
pub fn consistency_residuals(r: &ReflectionStrategy) -> Vec<(Question, f64)> {
    standard_game()
        .questions()
        .into_iter()
        .map(|q| {
            let left = r.alice(q.context, q.vertex) * &r.state;
            let right = &r.state * r.bob(q.vertex);
            (q, (&left - &right).frobenius_norm())
        })
        .collect()
}

/// Bound `‖R_v^j L − L S_v‖ ≤ √(80 ε)` implied by each losing term being `¼‖R L − L S‖²`.
pub fn consistency_bound(epsilon: f64) -> f64 {
    (80.0 * epsilon.max(0.0)).sqrt()
}

/// Observables of the optimal strategy, indexed by vertex `1..=10`.
pub fn ideal_observable(vertex: Vertex) -> ComplexMatrix {
    let i = ComplexMatrix::identity(2);
    let x = pauli_x();
    let z = pauli_z();
    let factors: [&ComplexMatrix; 3] = match vertex.id() {
        1 => [&z, &z, &z],
        2 => [&z, &x, &x],
        3 => [&x, &x, &z],
        4 => [&x, &z, &x],
        5 => [&i, &x, &i],
        6 => [&x, &i, &i],
        7 => [&i, &i, &x],
        8 => [&i, &i, &z],
        9 => [&i, &z, &i],
        10 => [&z, &i, &i],
        _ => unreachable!("vertex ids are 1..=10"),
    };
    kron_all(factors)
}

/// Three shared EPR pairs measured with real Pauli observables; wins with certainty.
pub fn ideal_strategy() -> ReflectionStrategy {
    let game = standard_game();
    let state = ComplexMatrix::identity(8).scale_real(1.0 / 8f64.sqrt());
    let alice = Context::ALL
        .iter()
        .map(|&c| game.vertices(c).iter().map(|&vx| ideal_observable(vx)).collect())
        .collect();
    let bob = Vertex::all().map(ideal_observable).collect();
    ReflectionStrategy::new(state, alice, bob).expect("ideal strategy shapes")
}

/// Context from which each vertex's distinguished reflection `R_v` is taken.
pub const DISTINGUISHED_CONTEXT: [Context; NUM_VERTICES] = [
    Context::G, // 1
    Context::G, // 2
    Context::E, // 3
    Context::F, // 4
    Context::E, // 5
    Context::E, // 6
    Context::F, // 7
    Context::D, // 8
    Context::D, // 9
    Context::C, // 10
];

/// Vertices whose reflections play `X'_i` and `Z'_i` for register `i` (and `i + 3` on Bob's side).
pub const X_PRIME_VERTICES: [u8; 3] = [6, 5, 7];
pub const Z_PRIME_VERTICES: [u8; 3] = [10, 9, 8];

/// One reflection per vertex plus the twelve Pauli-like observables fed to the isometries.
#[derive(Clone, Debug)]
pub struct DistinguishedReflections {
    /// `R_1..R_10` at index `v - 1`.
    pub alice: Vec<ComplexMatrix>,
    /// `X'_1..X'_6`: entries 0..3 Alice, 3..6 Bob.
    pub x_prime: Vec<ComplexMatrix>,
    /// `Z'_1..Z'_6`.
    pub z_prime: Vec<ComplexMatrix>,
}

impl DistinguishedReflections {
    pub fn r(&self, vertex: Vertex) -> &ComplexMatrix {
        &self.alice[vertex.index()]
    }
}

pub fn select_distinguished(r: &ReflectionStrategy) -> DistinguishedReflections {
    let alice: Vec<_> = Vertex::all()
        .map(|vx| r.alice(DISTINGUISHED_CONTEXT[vx.index()], vx).clone())
        .collect();
    let side = |ids: &[u8; 3]| -> Vec<ComplexMatrix> {
        ids.iter()
            .map(|&id| alice[usize::from(id) - 1].clone())
            .chain(ids.iter().map(|&id| r.bob(v(id)).clone()))
            .collect()
    };
    DistinguishedReflections {
        x_prime: side(&X_PRIME_VERTICES),
        z_prime: side(&Z_PRIME_VERTICES),
        alice,
    }
}

/// Alice's outcome for a context: bit `k` is `t(v_k)` for the `k`-th sorted vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(u8);

impl Assignment {
    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits < 1 << CONTEXT_SIZE).then_some(Self(bits))
    }

    pub fn bit(self, slot: usize) -> u8 {
        self.0 >> slot & 1
    }

    /// `Π (−1)^{t(v)}`.
    pub fn parity(self) -> i8 {
        if self.0.count_ones().is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// The eight assignments whose parity equals `label`.
    pub fn valid_for(label: i8) -> Vec<Assignment> {
        (0..1 << CONTEXT_SIZE).map(Assignment).filter(|a| a.parity() == label).collect()
    }

    /// Bit string in slot order, e.g. `"0110"`.
    pub fn key(self) -> String {
        (0..CONTEXT_SIZE).map(|k| if self.bit(k) == 1 { '1' } else { '0' }).collect()
    }

    pub fn parse_key(key: &str) -> Option<Self> {
        if key.len() != CONTEXT_SIZE {
            return None;
        }
        key.chars().enumerate().try_fold(0u8, |acc, (k, ch)| match ch {
            '0' => Some(acc),
            '1' => Some(acc | 1 << k),
            _ => None,
        })
        .map(Assignment)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveStrategy {
    pub dim_a: usize,
    pub dim_b: usize,
    /// Column vector of length `dim_a · dim_b`, Alice's index major.
    pub psi: ComplexMatrix,
    /// Per context, the eight parity-valid outcomes and their projectors.
    pub alice: Vec<Vec<(Assignment, ComplexMatrix)>>,
    /// `[N_v^0, N_v^1]` at index `v - 1`.
    pub bob: Vec<[ComplexMatrix; 2]>,
}

impl ProjectiveStrategy {
    /// `L[a][b] = ψ[a·dim_b + b]`.
    pub fn state_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim_a, self.dim_b, |a, b| self.psi.get(a * self.dim_b + b, 0))
    }

    pub fn validate(&self, tol: f64) -> Result<(), StrategyError> {
        let game = standard_game();
        if self.psi.shape() != (self.dim_a * self.dim_b, 1) {
            return Err(StrategyError::Shape(format!("psi is {:?}", self.psi.shape())));
        }
        if (self.psi.frobenius_norm() - 1.0).abs() > tol {
            return Err(StrategyError::Measurement(format!(
                "‖ψ‖ = {} is not 1",
                self.psi.frobenius_norm()
            )));
        }
        if self.alice.len() != NUM_CONTEXTS || self.bob.len() != NUM_VERTICES {
            return Err(StrategyError::Shape("wrong number of measurements".into()));
        }
        for c in Context::ALL {
            let outcomes = &self.alice[c.index()];
            if let Some((t, _)) = outcomes.iter().find(|(t, _)| t.parity() != game.label(c)) {
                return Err(StrategyError::Measurement(format!(
                    "outcome {} in context {c} violates the parity constraint",
                    t.key()
                )));
            }
            let ops: Vec<&ComplexMatrix> = outcomes.iter().map(|(_, m)| m).collect();
            check_projective(&ops, self.dim_a, tol).map_err(|e| StrategyError::Measurement(format!("context {c}: {e}")))?;
        }
        for vx in Vertex::all() {
            let [n0, n1] = &self.bob[vx.index()];
            check_projective(&[n0, n1], self.dim_b, tol)
                .map_err(|e| StrategyError::Measurement(format!("Bob vertex {vx}: {e}")))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> ProjectiveJson {
        ProjectiveJson {
            dim_a: self.dim_a,
            dim_b: self.dim_b,
            psi: self.psi.clone(),
            alice: Context::ALL
                .iter()
                .map(|&c| {
                    let ops = self.alice[c.index()].iter().map(|(t, m)| (t.key(), m.clone())).collect();
                    (c.to_string(), ops)
                })
                .collect(),
            bob: Vertex::all()
                .map(|vx| {
                    let [n0, n1] = &self.bob[vx.index()];
                    let ops = [("0".to_owned(), n0.clone()), ("1".to_owned(), n1.clone())].into_iter().collect();
                    (vx.to_string(), ops)
                })
                .collect(),
        }
    }

    pub fn from_json(json: ProjectiveJson) -> Result<Self, StrategyError> {
        let mut alice_json = json.alice;
        let mut alice = Vec::with_capacity(NUM_CONTEXTS);
        for c in Context::ALL {
            let ops = alice_json
                .shift_remove(c.label())
                .ok_or_else(|| StrategyError::Format(format!("missing context {c}")))?;
            let mut outcomes = Vec::with_capacity(ops.len());
            for (key, m) in ops {
                let t = Assignment::parse_key(&key)
                    .ok_or_else(|| StrategyError::Format(format!("bad outcome key {key:?}")))?;
                outcomes.push((t, m));
            }
            alice.push(outcomes);
        }
        if let Some(extra) = alice_json.keys().next() {
            return Err(StrategyError::Format(format!("unknown context {extra}")));
        }
        let mut bob_json = json.bob;
        let mut bob = Vec::with_capacity(NUM_VERTICES);
        for vx in Vertex::all() {
            let mut pair = bob_json
                .shift_remove(&vx.to_string())
                .ok_or_else(|| StrategyError::Format(format!("missing N for vertex {vx}")))?;
            let n0 = pair.shift_remove("0");
            let n1 = pair.shift_remove("1");
            match (n0, n1) {
                (Some(n0), Some(n1)) if pair.is_empty() => bob.push([n0, n1]),
                _ => return Err(StrategyError::Format(format!("vertex {vx} needs outcomes \"0\" and \"1\""))),
            }
        }
        if let Some(extra) = bob_json.keys().next() {
            return Err(StrategyError::Format(format!("unknown vertex {extra}")));
        }
        Ok(Self {
            dim_a: json.dim_a,
            dim_b: json.dim_b,
            psi: json.psi,
            alice,
            bob,
        })
    }
}

/// Wire form of the projective variant of `strategy.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectiveJson {
    pub dim_a: usize,
    pub dim_b: usize,
    pub psi: ComplexMatrix,
    /// Context → outcome bit string (vertex slots in ascending id order) → `M_t`.
    #[serde(rename = "M")]
    pub alice: IndexMap<String, IndexMap<String, ComplexMatrix>>,
    /// Vertex → `"0"`/`"1"` → `N_v^s`.
    #[serde(rename = "N")]
    pub bob: IndexMap<String, IndexMap<String, ComplexMatrix>>,
}

fn check_projective(ops: &[&ComplexMatrix], dim: usize, tol: f64) -> Result<(), String> {
    let id = ComplexMatrix::identity(dim);
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for (i, m) in ops.iter().enumerate() {
        if m.shape() != (dim, dim) {
            return Err(format!("operator {i} is {:?}, expected {dim}x{dim}", m.shape()));
        }
        if m.hermiticity_deviation() > tol {
            return Err(format!("operator {i} is not Hermitian"));
        }
        if (&(*m * *m) - *m).frobenius_norm() > tol {
            return Err(format!("operator {i} is not idempotent"));
        }
        for (j, other) in ops.iter().enumerate().skip(i + 1) {
            if (*m * *other).frobenius_norm() > tol {
                return Err(format!("operators {i} and {j} are not orthogonal"));
            }
        }
        sum = &sum + m;
    }
    if (&sum - &id).frobenius_norm() > tol {
        return Err("operators do not sum to the identity".into());
    }
    Ok(())
}

/// `R_v^j = Σ_{t(v)=0} M_t^j − Σ_{t(v)=1} M_t^j`, `S_v = N_v^0 − N_v^1`, `L = ⟨Φ^B|ψ⟩`.
pub fn to_reflection(p: &ProjectiveStrategy) -> Result<ReflectionStrategy, StrategyError> {
    p.validate(DEFAULT_TOL)?;
    let alice = (0..NUM_CONTEXTS)
        .map(|ci| {
            (0..CONTEXT_SIZE)
                .map(|slot| {
                    p.alice[ci].iter().fold(ComplexMatrix::zeros(p.dim_a, p.dim_a), |acc, (t, m)| {
                        if t.bit(slot) == 0 {
                            &acc + m
                        } else {
                            &acc - m
                        }
                    })
                })
                .collect()
        })
        .collect();
    let bob = p.bob.iter().map(|[n0, n1]| n0 - n1).collect();
    ReflectionStrategy::new(p.state_matrix(), alice, bob)
}

/// `M_t^j = Π_{v∈j} (I + (−1)^{t(v)} R_v^j)/2`, `N_v^s = (I + (−1)^s S_v)/2`, `ψ = vec(L)`.
pub fn to_projective(r: &ReflectionStrategy) -> Result<ProjectiveStrategy, StrategyError> {
    ensure_valid(r, DEFAULT_TOL)?;
    let game = standard_game();
    let (da, db) = (r.dim_a(), r.dim_b());
    let id_a = ComplexMatrix::identity(da);
    let id_b = ComplexMatrix::identity(db);
    let alice = Context::ALL
        .iter()
        .map(|&c| {
            Assignment::valid_for(game.label(c))
                .into_iter()
                .map(|t| {
                    let factors: Vec<ComplexMatrix> = r
                        .alice_context(c)
                        .iter()
                        .enumerate()
                        .map(|(k, m)| {
                            let sign = if t.bit(k) == 0 { 0.5 } else { -0.5 };
                            &id_a.scale_real(0.5) + &m.scale_real(sign)
                        })
                        .collect();
                    (t, product(da, &factors))
                })
                .collect()
        })
        .collect();
    let bob = r
        .bob
        .iter()
        .map(|s| {
            [
                (&id_b + s).scale_real(0.5),
                (&id_b - s).scale_real(0.5),
            ]
        })
        .collect();
    let psi = ComplexMatrix::from_fn(da * db, 1, |i, _| r.state.get(i / db, i % db));
    Ok(ProjectiveStrategy {
        dim_a: da,
        dim_b: db,
        psi,
        alice,
        bob,
    })
}

/// Winning probability from joint outcome probabilities `‖M_t L N_s‖²`.
pub fn projective_score(p: &ProjectiveStrategy) -> Result<f64, StrategyError> {
    p.validate(DEFAULT_TOL)?;
    let game = standard_game();
    let l = p.state_matrix();
    let mut win = 0.0;
    for c in Context::ALL {
        for (slot, &vx) in game.vertices(c).iter().enumerate() {
            for (t, m) in &p.alice[c.index()] {
                let n = &p.bob[vx.index()][usize::from(t.bit(slot))];
                win += (&(m * &l) * n).frobenius_norm_sqr();
            }
        }
    }
    Ok(win / NUM_QUESTIONS as f64)
}

/// Outcome probabilities `‖O_k L‖²` of an Alice-side measurement.
pub fn outcome_distribution(ops: &[ComplexMatrix], l: &ComplexMatrix) -> Vec<f64> {
    ops.iter().map(|o| (o * l).frobenius_norm_sqr()).collect()
}
