//! Local isometries that pull three EPR pairs out of a near-optimal strategy,
//! plus the residual norms that certify how close the strategy is to ideal.
//!
//! Isometry outputs are ordered `H ⊗ Q_1 ⊗ Q_2 ⊗ Q_3` (Bob: `Q_4 ⊗ Q_5 ⊗ Q_6`),
//! with the ancillas to the right of the original space.

use std::fmt;

use indexmap::IndexMap;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Context, Vertex, NUM_QUESTIONS};
use crate::strategy::{
    consistency_bound, consistency_residuals, ensure_valid, score_unchecked, select_distinguished, standard_game,
    DistinguishedReflections, ReflectionStrategy, StrategyError, DEFAULT_TOL,
};
use crate::tensor::{
    bell_matrix, controlled, embed_on_register, hadamard, ket_plus, kron, pauli_x, pauli_z, swap_factors, BellKind,
    ComplexMatrix, LinalgError, QubitIndex, C64, HERMITIAN_TOL,
};

/// Slack added to the `√(80 ε)` consistency bound for rounding.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RigidityError {
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("isometry input {0} is not a reflection")]
    NotReflection(String),
    #[error("empty measurement word")]
    EmptyWord,
    #[error("word mixes Alice's and Bob's registers")]
    MixedWord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Alice,
    Bob,
}

/// `Ψ = Ψ_1 Ψ_2 Ψ_3` from `H` into `H ⊗ Q³`.
#[derive(Clone, Debug)]
pub struct LocalIsometry {
    pub side: Side,
    pub dim: usize,
    /// `8·dim × dim`.
    pub matrix: ComplexMatrix,
    /// Single-register maps `Ψ_i : H → H ⊗ Q_i`, each `2·dim × dim`.
    pub components: Vec<ComplexMatrix>,
}

impl LocalIsometry {
    /// `‖Ψ†Ψ − I‖`.
    pub fn defect(&self) -> f64 {
        self.matrix.unitarity_deviation()
    }
}

fn check_reflection(m: &ComplexMatrix, dim: usize, name: &str) -> Result<(), RigidityError> {
    if m.shape() != (dim, dim) {
        return Err(RigidityError::NotReflection(format!("{name} has shape {:?}", m.shape())));
    }
    let id = ComplexMatrix::identity(dim);
    if m.hermiticity_deviation() > HERMITIAN_TOL || (&(m * m) - &id).frobenius_norm() > HERMITIAN_TOL {
        return Err(RigidityError::NotReflection(name.to_owned()));
    }
    Ok(())
}

/// `z ↦ C(X') H C(Z') (z ⊗ |+⟩)` as a `2d × d` matrix in `H ⊗ Q` order.
pub fn register_isometry(x: &ComplexMatrix, z: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let d = x.rows();
    let id = ComplexMatrix::identity(d);
    // control-leading layout Q ⊗ H
    let prepare = kron(&ket_plus(), &id);
    let h = kron(&hadamard(), &id);
    let leading = controlled(x)?.try_mul(&h)?.try_mul(&controlled(z)?)?.try_mul(&prepare)?;
    Ok(&swap_factors(2, d) * &leading)
}

/// Composite isometry from three `X'` and three `Z'` reflections on the same space.
pub fn build_isometry(side: Side, x_ops: &[ComplexMatrix], z_ops: &[ComplexMatrix]) -> Result<LocalIsometry, RigidityError> {
    if x_ops.len() != 3 || z_ops.len() != 3 {
        return Err(RigidityError::NotReflection("need three X' and three Z' operators".into()));
    }
    let dim = x_ops[0].rows();
    for (i, (x, z)) in x_ops.iter().zip(z_ops).enumerate() {
        check_reflection(x, dim, &format!("X'{}", i + 1))?;
        check_reflection(z, dim, &format!("Z'{}", i + 1))?;
    }
    let components = x_ops
        .iter()
        .zip(z_ops)
        .map(|(x, z)| register_isometry(x, z))
        .collect::<Result<Vec<_>, _>>()?;
    // (Ψ_1 ⊗ I_4)(Ψ_2 ⊗ I_2) Ψ_3
    let matrix = kron(&components[0], &ComplexMatrix::identity(4))
        .try_mul(&kron(&components[1], &ComplexMatrix::identity(2)))?
        .try_mul(&components[2])?;
    Ok(LocalIsometry {
        side,
        dim,
        matrix,
        components,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauliKind {
    X,
    Z,
}

/// A Pauli `X_i`/`Z_i` on register `Q_i`, paired with the strategy operator `X'_i`/`Z'_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub kind: PauliKind,
    pub register: QubitIndex,
}

impl Letter {
    pub fn new(kind: PauliKind, register: u8) -> Option<Self> {
        QubitIndex::new(register).map(|register| Self { kind, register })
    }

    pub fn x(register: u8) -> Self {
        Self::new(PauliKind::X, register).expect("register in 1..=6")
    }

    pub fn z(register: u8) -> Self {
        Self::new(PauliKind::Z, register).expect("register in 1..=6")
    }

    pub fn side(self) -> Side {
        if self.register.is_alice() {
            Side::Alice
        } else {
            Side::Bob
        }
    }

    /// The twelve letters in report order `X1, Z1, …, X6, Z6`.
    pub fn all() -> Vec<Letter> {
        (1..=6).flat_map(|i| [Letter::x(i), Letter::z(i)]).collect()
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            PauliKind::X => 'X',
            PauliKind::Z => 'Z',
        };
        write!(f, "{k}{}", self.register.get())
    }
}

/// A strategy together with its distinguished reflections and both isometries.
pub struct Extraction<'a> {
    strategy: &'a ReflectionStrategy,
    pub distinguished: DistinguishedReflections,
    pub alice: LocalIsometry,
    pub bob: LocalIsometry,
}

impl<'a> Extraction<'a> {
    pub fn new(strategy: &'a ReflectionStrategy) -> Result<Self, RigidityError> {
        ensure_valid(strategy, DEFAULT_TOL)?;
        let distinguished = select_distinguished(strategy);
        let alice = build_isometry(Side::Alice, &distinguished.x_prime[..3], &distinguished.z_prime[..3])?;
        let bob = build_isometry(Side::Bob, &distinguished.x_prime[3..], &distinguished.z_prime[3..])?;
        Ok(Self {
            strategy,
            distinguished,
            alice,
            bob,
        })
    }

    /// Pauli on an ancilla register, embedded in `H ⊗ Q³`.
    fn pauli(&self, letter: Letter) -> ComplexMatrix {
        let dim = match letter.side() {
            Side::Alice => self.alice.dim,
            Side::Bob => self.bob.dim,
        };
        let p = match letter.kind {
            PauliKind::X => pauli_x(),
            PauliKind::Z => pauli_z(),
        };
        let local = embed_on_register(&p, letter.register.local_position(), 3).expect("position in 1..=3");
        kron(&ComplexMatrix::identity(dim), &local)
    }

    /// The strategy operator `X'_i` or `Z'_i` simulated by `letter`.
    fn primed(&self, letter: Letter) -> &ComplexMatrix {
        let i = usize::from(letter.register.get() - 1);
        match letter.kind {
            PauliKind::X => &self.distinguished.x_prime[i],
            PauliKind::Z => &self.distinguished.z_prime[i],
        }
    }

    /// Alice: `‖M_1⋯M_n Ψ_A L − Ψ_A M'_1⋯M'_n L‖`.
    /// Bob: `‖L Ψ_B† N_n⋯N_1 − L N'_n⋯N'_1 Ψ_B†‖`.
    pub fn word_residual(&self, word: &[Letter]) -> Result<f64, RigidityError> {
        let first = word.first().ok_or(RigidityError::EmptyWord)?;
        let side = first.side();
        if word.iter().any(|l| l.side() != side) {
            return Err(RigidityError::MixedWord);
        }
        let l = self.strategy.state();
        let norm = match side {
            Side::Alice => {
                let psi = &self.alice.matrix;
                let mut lhs = psi * l;
                let mut rhs = l.clone();
                for &letter in word.iter().rev() {
                    lhs = &self.pauli(letter) * &lhs;
                    rhs = self.primed(letter) * &rhs;
                }
                (&lhs - &(psi * &rhs)).frobenius_norm()
            }
            Side::Bob => {
                let psi_dag = self.bob.matrix.adjoint();
                let mut lhs = l * &psi_dag;
                let mut rhs = l.clone();
                for &letter in word.iter().rev() {
                    lhs = &lhs * &self.pauli(letter);
                    rhs = &rhs * self.primed(letter);
                }
                (&lhs - &(&rhs * &psi_dag)).frobenius_norm()
            }
        };
        Ok(norm)
    }

    /// The twelve single-letter residuals keyed `X1 … Z6`.
    pub fn operator_residuals(&self) -> IndexMap<String, f64> {
        Letter::all()
            .into_iter()
            .map(|l| (l.to_string(), self.word_residual(&[l]).expect("single-sided letter")))
            .collect()
    }

    pub fn extract_state(&self) -> ExtractedState {
        let p = &(&self.alice.matrix * self.strategy.state()) * &self.bob.matrix.adjoint();
        let (da, db) = (self.alice.dim, self.bob.dim);
        let mut weights = IndexMap::new();
        let mut junk = ComplexMatrix::zeros(da, db);
        for a in BellKind::ALL {
            for b in BellKind::ALL {
                for c in BellKind::ALL {
                    let basis = kron(&kron(&bell_matrix(a), &bell_matrix(b)), &bell_matrix(c));
                    let component = bell_component(&p, &basis, da, db);
                    weights.insert(format!("{a},{b},{c}"), component.frobenius_norm_sqr());
                    if (a, b, c) == (BellKind::PhiPlus, BellKind::PhiPlus, BellKind::PhiPlus) {
                        junk = component;
                    }
                }
            }
        }
        let state_residual = (p.frobenius_norm_sqr() - junk.frobenius_norm_sqr()).max(0.0).sqrt();
        ExtractedState {
            p,
            bell_weights: weights,
            junk,
            state_residual,
        }
    }
}

/// `P_v[a][b] = Σ conj(basis[q][q']) P[(a,q),(b,q')]` for an 8×8 basis element.
fn bell_component(p: &ComplexMatrix, basis: &ComplexMatrix, da: usize, db: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(da, db, |a, b| {
        let mut acc = C64::new(0.0, 0.0);
        for q in 0..8 {
            for qq in 0..8 {
                let w = basis.get(q, qq);
                if w.norm_sqr() > 0.0 {
                    acc += w.conj() * p.get(a * 8 + q, b * 8 + qq);
                }
            }
        }
        acc
    })
}

#[derive(Clone, Debug)]
pub struct ExtractedState {
    /// `Ψ_A L Ψ_B†`.
    pub p: ComplexMatrix,
    /// `‖P_{v1,v2,v3}‖²` keyed `"phi+,phi+,psi-"`.
    pub bell_weights: IndexMap<String, f64>,
    /// `L' = P_{φ+,φ+,φ+}`.
    pub junk: ComplexMatrix,
    /// `‖L' ⊗ φ+ ⊗ φ+ ⊗ φ+ − P‖`, the minimum over all junk matrices.
    pub state_residual: f64,
}

pub fn operator_residuals(r: &ReflectionStrategy) -> Result<IndexMap<String, f64>, RigidityError> {
    Ok(Extraction::new(r)?.operator_residuals())
}

pub fn word_residual(r: &ReflectionStrategy, word: &[Letter]) -> Result<f64, RigidityError> {
    Extraction::new(r)?.word_residual(word)
}

pub fn extract_state(r: &ReflectionStrategy) -> Result<ExtractedState, RigidityError> {
    Ok(Extraction::new(r)?.extract_state())
}

/// Sampling policy for context-change words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    /// Words are sampled for every length `1..=max_word_length`.
    pub max_word_length: usize,
    pub words_per_length: usize,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            max_word_length: 6,
            words_per_length: 16,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityReport {
    pub epsilon: f64,
    pub score: f64,
    pub state_residual: f64,
    pub bell_weights: IndexMap<String, f64>,
    pub junk: ComplexMatrix,
    /// `X1 … Z3` on Alice's side, `X4 … Z6` on Bob's.
    pub op_residuals: IndexMap<String, f64>,
    /// `‖R_v^j L − L S_v‖` keyed `"C:2"`.
    pub consistency_residuals: IndexMap<String, f64>,
    pub consistency_bound: f64,
    pub consistency_bound_holds: bool,
    /// `‖R_v^j L − R_v^k L‖` for the two contexts of each vertex.
    pub context_change_residuals: IndexMap<String, f64>,
    /// Largest sampled `‖R^{j_1}⋯R^{j_n} L − R^{j'_1}⋯R^{j'_n} L‖` for each length `n`.
    pub context_change_word_residuals: Vec<f64>,
    /// `‖R_v^j R_w^{j'} L − R_w^{j'} R_v^j L‖` for adjacent `v, w ∈ j`, `j'` the other context of `w`.
    pub commutator_residuals: IndexMap<String, f64>,
    /// `‖L S_w S_v − L S_v S_w‖` for adjacent pairs.
    pub bob_commutator_residuals: IndexMap<String, f64>,
    /// `max ‖R_v^j R_w^{j'} L + R_w^{j'} R_v^j L‖` over context choices, non-adjacent pairs.
    pub anticommutator_residuals: IndexMap<String, f64>,
    /// `‖L S_w S_v + L S_v S_w‖` for non-adjacent pairs.
    pub bob_anticommutator_residuals: IndexMap<String, f64>,
    /// Consecutive distances along the chain `R_7 R_3 L → … → −R_3 R_7 L`.
    pub anti_chain_steps: Vec<f64>,
    pub isometry_defect: f64,
    /// `state_residual / √ε`; `None` when `ε = 0`.
    pub ratio_state: Option<f64>,
    /// `max op_residual / √ε`; `None` when `ε = 0`.
    pub ratio_op: Option<f64>,
}

impl RigidityReport {
    pub fn max_op_residual(&self) -> f64 {
        self.op_residuals.values().copied().fold(0.0, f64::max)
    }

    pub fn max_consistency_residual(&self) -> f64 {
        self.consistency_residuals.values().copied().fold(0.0, f64::max)
    }

    pub fn anticommutator(&self, v: u8, w: u8) -> Option<f64> {
        let (a, b) = if v < w { (v, w) } else { (w, v) };
        self.anticommutator_residuals.get(&format!("{a},{b}")).copied()
    }
}

fn vx(id: u8) -> Vertex {
    Vertex::new(id).expect("static vertex id")
}

/// Distances between consecutive entries of
/// `R_7R_3L, (R_4R_9R_6)(R_6R_8R_5)L, R_4R_9R_8R_5L, R_4(R_1R_10R_8)R_8R_5L, R_4R_1R_10R_5L, R_4R_1(R_2R_7)L, −R_3R_7L`
/// with the distinguished reflections.
pub fn anti_chain_steps(d: &DistinguishedReflections, l: &ComplexMatrix) -> Vec<f64> {
    let r = |id: u8| d.r(vx(id));
    let word = |ids: &[u8]| ids.iter().rev().fold(l.clone(), |acc, &id| r(id) * &acc);
    let chain = [
        word(&[7, 3]),
        word(&[4, 9, 6, 6, 8, 5]),
        word(&[4, 9, 8, 5]),
        word(&[4, 1, 10, 8, 8, 5]),
        word(&[4, 1, 10, 5]),
        word(&[4, 1, 2, 7]),
        -word(&[3, 7]),
    ];
    chain.windows(2).map(|w| (&w[1] - &w[0]).frobenius_norm()).collect()
}

pub fn certify(r: &ReflectionStrategy) -> Result<RigidityReport, RigidityError> {
    certify_with(r, &CertifyConfig::default())
}

pub fn certify_with(r: &ReflectionStrategy, config: &CertifyConfig) -> Result<RigidityReport, RigidityError> {
    let extraction = Extraction::new(r)?;
    let game = standard_game();
    let l = r.state();
    let score = score_unchecked(r);
    let epsilon = (1.0 - score).clamp(0.0, 1.0);

    let consistency: IndexMap<String, f64> = consistency_residuals(r)
        .into_iter()
        .map(|(q, x)| (q.to_string(), x))
        .collect();
    debug_assert_eq!(consistency.len(), NUM_QUESTIONS);
    let bound = consistency_bound(epsilon);
    let bound_holds = consistency.values().all(|&x| x <= bound + BOUND_SLACK);

    let context_change = Vertex::all()
        .map(|v| {
            let [j, k] = game.contexts_of(v);
            let diff = &(r.alice(j, v) * l) - &(r.alice(k, v) * l);
            (v.to_string(), diff.frobenius_norm())
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vertices: Vec<Vertex> = Vertex::all().collect();
    let word_residuals = (1..=config.max_word_length)
        .map(|n| {
            (0..config.words_per_length)
                .map(|_| {
                    let mut lhs = l.clone();
                    let mut rhs = l.clone();
                    let word: Vec<(Vertex, bool)> = (0..n)
                        .map(|_| (*vertices.choose(&mut rng).expect("ten vertices"), rng.random::<bool>()))
                        .collect();
                    for &(v, flip) in word.iter().rev() {
                        let [j, k] = game.contexts_of(v);
                        let (j, k) = if flip { (k, j) } else { (j, k) };
                        lhs = r.alice(j, v) * &lhs;
                        rhs = r.alice(k, v) * &rhs;
                    }
                    (&lhs - &rhs).frobenius_norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();

    let mut commutators = IndexMap::new();
    let mut bob_commutators = IndexMap::new();
    for (a, b) in game.adjacent_pairs() {
        for (v, w) in [(a, b), (b, a)] {
            let j = Context::ALL
                .into_iter()
                .find(|&c| game.contains(c, v) && game.contains(c, w))
                .expect("adjacent vertices share a context");
            let jw = game.other_context(j, w).expect("w lies in j");
            let rv = r.alice(j, v);
            let rw = r.alice(jw, w);
            let comm = &(&(rv * rw) * l) - &(&(rw * rv) * l);
            commutators.insert(format!("{v},{w}"), comm.frobenius_norm());
        }
        let (sa, sb) = (r.bob(a), r.bob(b));
        let comm = &(l * &(sb * sa)) - &(l * &(sa * sb));
        bob_commutators.insert(format!("{a},{b}"), comm.frobenius_norm());
    }

    let mut anticommutators = IndexMap::new();
    let mut bob_anticommutators = IndexMap::new();
    for (a, b) in game.non_adjacent_pairs() {
        let mut worst: f64 = 0.0;
        for ja in game.contexts_of(a) {
            for jb in game.contexts_of(b) {
                let (ra, rb) = (r.alice(ja, a), r.alice(jb, b));
                let anti = &(&(ra * rb) * l) + &(&(rb * ra) * l);
                worst = worst.max(anti.frobenius_norm());
            }
        }
        anticommutators.insert(format!("{a},{b}"), worst);
        let (sa, sb) = (r.bob(a), r.bob(b));
        let anti = &(l * &(sb * sa)) + &(l * &(sa * sb));
        bob_anticommutators.insert(format!("{a},{b}"), anti.frobenius_norm());
    }

    let op_residuals = extraction.operator_residuals();
    let state = extraction.extract_state();
    let max_op = op_residuals.values().copied().fold(0.0, f64::max);
    let root = epsilon.sqrt();
    let ratio = |x: f64| (epsilon > 0.0).then(|| x / root);

    Ok(RigidityReport {
        epsilon,
        score,
        state_residual: state.state_residual,
        bell_weights: state.bell_weights,
        junk: state.junk,
        op_residuals,
        consistency_residuals: consistency,
        consistency_bound: bound,
        consistency_bound_holds: bound_holds,
        context_change_residuals: context_change,
        context_change_word_residuals: word_residuals,
        commutator_residuals: commutators,
        bob_commutator_residuals: bob_commutators,
        anticommutator_residuals: anticommutators,
        bob_anticommutator_residuals: bob_anticommutators,
        anti_chain_steps: anti_chain_steps(&extraction.distinguished, l),
        isometry_defect: extraction.alice.defect().max(extraction.bob.defect()),
        ratio_state: ratio(state.state_residual),
        ratio_op: ratio(max_op),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::ideal_strategy;
    use crate::tensor::kron_all;

    const PHI3: &str = "phi+,phi+,phi+";

    #[test]
    fn ideal_isometry_shape_and_exactness() {
        let r = ideal_strategy();
        let ex = Extraction::new(&r).unwrap();
        assert_eq!(ex.alice.matrix.shape(), (64, 8));
        assert_eq!(ex.alice.components.len(), 3);
        assert_eq!(ex.alice.components[0].shape(), (16, 8));
        assert!(ex.alice.defect() < 1e-12);
        assert!(ex.bob.defect() < 1e-12);
    }

    #[test]
    fn register_isometry_matches_closed_form() {
        // C(X')H C(Z')(z ⊗ |+⟩) = |0⟩ (I+Z')/2 z + |1⟩ X'(I−Z')/2 z
        let r = ideal_strategy();
        let d = select_distinguished(&r);
        let (x, z) = (&d.x_prime[1], &d.z_prime[1]);
        let id = ComplexMatrix::identity(8);
        let top = (&id + z).scale_real(0.5);
        let bottom = x * &(&id - z).scale_real(0.5);
        let closed = ComplexMatrix::from_fn(16, 8, |row, col| {
            let (h, q) = (row / 2, row % 2);
            if q == 0 { top.get(h, col) } else { bottom.get(h, col) }
        });
        let built = register_isometry(x, z).unwrap();
        assert!((&built - &closed).frobenius_norm() < 1e-14);
    }

    #[test]
    fn ideal_residuals_vanish() {
        let r = ideal_strategy();
        let ex = Extraction::new(&r).unwrap();
        let res = ex.operator_residuals();
        assert_eq!(res.len(), 12);
        assert!(res.values().all(|&x| x <= 1e-10), "{res:?}");
        assert!(ex.word_residual(&[Letter::x(1), Letter::x(2)]).unwrap() <= 1e-10);
        assert!(ex.word_residual(&[Letter::z(6), Letter::x(4), Letter::z(5)]).unwrap() <= 1e-10);
    }

    #[test]
    fn word_errors() {
        let r = ideal_strategy();
        let ex = Extraction::new(&r).unwrap();
        assert!(matches!(ex.word_residual(&[]), Err(RigidityError::EmptyWord)));
        assert!(matches!(
            ex.word_residual(&[Letter::x(1), Letter::x(4)]),
            Err(RigidityError::MixedWord)
        ));
    }

    #[test]
    fn ideal_extracts_three_epr_pairs() {
        let r = ideal_strategy();
        let st = extract_state(&r).unwrap();
        assert_eq!(st.bell_weights.len(), 64);
        assert!((st.bell_weights[PHI3] - 1.0).abs() < 1e-12);
        let rest: f64 = st.bell_weights.iter().filter(|(k, _)| *k != PHI3).map(|(_, w)| w).sum();
        assert!(rest < 1e-12);
        assert!(st.state_residual <= 1e-10);
        // the junk is |0⟩⟨0| on the emptied registers
        assert!((st.junk.get(0, 0).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn state_residual_equals_direct_distance() {
        let r = ideal_strategy()
            .map_bob(|v, s| {
                let u = crate::tensor::exp_i_hermitian(&ideal_test_generator(v.id()), 0.05).unwrap();
                &(&u * s) * &u.adjoint()
            })
            .unwrap();
        let st = extract_state(&r).unwrap();
        let phi = bell_matrix(BellKind::PhiPlus);
        let target = kron(&st.junk, &kron_all([&phi, &phi, &phi]));
        let direct = (&target - &st.p).frobenius_norm();
        assert!((direct - st.state_residual).abs() < 1e-12);
        let total: f64 = st.bell_weights.values().sum();
        assert!((total - st.p.frobenius_norm_sqr()).abs() < 1e-12);
        assert!((st.p.frobenius_norm_sqr() - 1.0).abs() < 1e-12);
    }

    fn ideal_test_generator(seed: u8) -> ComplexMatrix {
        let f = f64::from(seed);
        let a = ComplexMatrix::from_fn(8, 8, |i, j| C64::new(((i * 7 + j * 3) as f64 + f).sin(), ((i + 2 * j) as f64 * f).cos()));
        a.hermitian_part()
    }

    #[test]
    fn flipped_register_moves_bell_weight() {
        // Conjugate Bob's operators by X on his first qubit: Z'_4 flips sign,
        // so register pair (1,4) leaves φ+.
        let x1 = kron_all([&pauli_x(), &ComplexMatrix::identity(2), &ComplexMatrix::identity(2)]);
        let r = ideal_strategy().map_bob(|_, s| &(&x1 * s) * &x1).unwrap();
        let st = extract_state(&r).unwrap();
        let (key, w) = st
            .bell_weights
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!(key == "psi+,phi+,phi+" || key == "phi-,phi+,phi+", "{key}");
        assert!(*w > 0.99, "{w}");
    }

    #[test]
    fn ideal_certificate() {
        let report = certify(&ideal_strategy()).unwrap();
        assert!(report.epsilon <= 1e-12);
        assert!(report.state_residual <= 1e-10);
        assert!(report.max_op_residual() <= 1e-10);
        assert!(report.consistency_bound_holds);
        assert_eq!(report.consistency_residuals.len(), 20);
        assert_eq!(report.commutator_residuals.len(), 60);
        assert_eq!(report.anticommutator_residuals.len(), 15);
        let families = [
            &report.context_change_residuals,
            &report.commutator_residuals,
            &report.bob_commutator_residuals,
            &report.anticommutator_residuals,
            &report.bob_anticommutator_residuals,
        ];
        for fam in families {
            assert!(fam.values().all(|&x| x <= 1e-10));
        }
        assert!(report.context_change_word_residuals.iter().all(|&x| x <= 1e-10));
        assert_eq!(report.context_change_word_residuals.len(), 6);
        assert!(report.anti_chain_steps.iter().all(|&x| x <= 1e-10));
        assert!(report.anticommutator(7, 3).unwrap() <= 1e-10);
        assert!(report.ratio_state.is_none());
    }

    #[test]
    fn rejects_non_reflection_inputs() {
        let ops = vec![ComplexMatrix::identity(2).scale_real(0.5); 3];
        let z = vec![pauli_z(); 3];
        assert!(matches!(
            build_isometry(Side::Alice, &ops, &z),
            Err(RigidityError::NotReflection(_))
        ));
    }

    #[test]
    fn report_serializes_bell_keys() {
        let report = certify(&ideal_strategy()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["bell_weights"]["phi+,phi+,psi-"].is_number());
        assert!(json["ratio_state"].is_null());
        assert_eq!(json["op_residuals"].as_object().unwrap().len(), 12);
    }
}
