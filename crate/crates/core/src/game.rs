//! The magic pentagram hypergraph and its classical analysis.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_VERTICES: usize = 10;
pub const NUM_CONTEXTS: usize = 5;
pub const CONTEXT_SIZE: usize = 4;
pub const NUM_QUESTIONS: usize = NUM_CONTEXTS * CONTEXT_SIZE;

/// Exact winning probability.
pub type WinProbability = Ratio<u32>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("vertex {0} out of range 1..=10")]
    BadVertex(u8),
    #[error("unknown context label {0:?}")]
    BadContext(String),
    #[error("vertex {0} compared with itself")]
    SameVertex(Vertex),
    #[error("malformed game: {0}")]
    Malformed(String),
    #[error("Alice's table for context {context} has parity {got}, expected {expected}")]
    ParityViolation { context: Context, got: i8, expected: i8 },
    #[error("answer {0} is not +1 or -1")]
    BadAnswer(i8),
}

/// Vertex of the pentagram, numbered 1..=10.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex(u8);

impl Vertex {
    pub fn new(id: u8) -> Result<Self, GameError> {
        if (1..=NUM_VERTICES as u8).contains(&id) {
            Ok(Self(id))
        } else {
            Err(GameError::BadVertex(id))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Zero-based slot for array storage.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn all() -> impl Iterator<Item = Vertex> {
        (1..=NUM_VERTICES as u8).map(Vertex)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the five hyperedges `C, D, E, F, G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Context {
    C,
    D,
    E,
    F,
    G,
}

impl Context {
    pub const ALL: [Context; NUM_CONTEXTS] = [Context::C, Context::D, Context::E, Context::F, Context::G];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Context::C => "C",
            Context::D => "D",
            Context::E => "E",
            Context::F => "F",
            Context::G => "G",
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Context {
    type Err = GameError;
    fn from_str(s: &str) -> Result<Self, GameError> {
        Context::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| GameError::BadContext(s.to_owned()))
    }
}

/// A question pair: Alice receives the context, Bob one of its vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Question {
    pub context: Context,
    pub vertex: Vertex,
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.context, self.vertex)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PentagramGame {
    contexts: [[Vertex; CONTEXT_SIZE]; NUM_CONTEXTS],
    labels: [i8; NUM_CONTEXTS],
}

impl Default for PentagramGame {
    fn default() -> Self {
        Self::standard()
    }
}

impl PentagramGame {
    /// C={2,5,7,10}, D={1,8,9,10}, E={3,5,6,8}, F={4,6,7,9}, G={1,2,3,4}; only G has label −1.
    pub fn standard() -> Self {
        Self::new(
            [
                [2, 5, 7, 10],
                [1, 8, 9, 10],
                [3, 5, 6, 8],
                [4, 6, 7, 9],
                [1, 2, 3, 4],
            ],
            [1, 1, 1, 1, -1],
        )
        .expect("standard incidence is well formed")
    }

    /// Validates the incidence structure; vertex lists are sorted ascending.
    pub fn new(contexts: [[u8; CONTEXT_SIZE]; NUM_CONTEXTS], labels: [i8; NUM_CONTEXTS]) -> Result<Self, GameError> {
        let mut sets = [[Vertex(1); CONTEXT_SIZE]; NUM_CONTEXTS];
        let mut counts = [0usize; NUM_VERTICES];
        for (ci, ids) in contexts.iter().enumerate() {
            let mut sorted = *ids;
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(GameError::Malformed(format!(
                    "context {} repeats a vertex",
                    Context::ALL[ci]
                )));
            }
            for (k, &id) in sorted.iter().enumerate() {
                let v = Vertex::new(id)?;
                counts[v.index()] += 1;
                sets[ci][k] = v;
            }
        }
        if let Some(i) = counts.iter().position(|&n| n != 2) {
            return Err(GameError::Malformed(format!(
                "vertex {} appears in {} contexts, expected 2",
                i + 1,
                counts[i]
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(GameError::BadAnswer(l));
        }
        Ok(Self { contexts: sets, labels })
    }

    pub fn vertices(&self, context: Context) -> &[Vertex; CONTEXT_SIZE] {
        &self.contexts[context.index()]
    }

    pub fn label(&self, context: Context) -> i8 {
        self.labels[context.index()]
    }

    pub fn contains(&self, context: Context, v: Vertex) -> bool {
        self.vertices(context).contains(&v)
    }

    /// Position of `v` inside the context's sorted vertex list.
    pub fn slot(&self, context: Context, v: Vertex) -> Option<usize> {
        self.vertices(context).iter().position(|&w| w == v)
    }

    /// The two contexts containing `v`, in C..G order.
    pub fn contexts_of(&self, v: Vertex) -> [Context; 2] {
        let mut found = Context::ALL.into_iter().filter(|&c| self.contains(c, v));
        let a = found.next().expect("every vertex lies in two contexts");
        let b = found.next().expect("every vertex lies in two contexts");
        [a, b]
    }

    /// The context containing `v` other than `context`.
    pub fn other_context(&self, context: Context, v: Vertex) -> Option<Context> {
        let [a, b] = self.contexts_of(v);
        if a == context {
            Some(b)
        } else if b == context {
            Some(a)
        } else {
            None
        }
    }

    /// All 20 question pairs, context-major.
    pub fn questions(&self) -> Vec<Question> {
        Context::ALL
            .into_iter()
            .flat_map(|c| self.vertices(c).iter().map(move |&v| Question { context: c, vertex: v }))
            .collect()
    }

    /// Uniform probability of each question pair.
    pub fn question_weight(&self) -> WinProbability {
        WinProbability::new(1, NUM_QUESTIONS as u32)
    }

    pub fn adjacent(&self, v: Vertex, w: Vertex) -> Result<bool, GameError> {
        if v == w {
            return Err(GameError::SameVertex(v));
        }
        Ok(Context::ALL
            .into_iter()
            .any(|c| self.contains(c, v) && self.contains(c, w)))
    }

    /// Unordered vertex pairs `(v, w)`, `v < w`, that never share a context.
    pub fn non_adjacent_pairs(&self) -> Vec<(Vertex, Vertex)> {
        self.pairs(false)
    }

    pub fn adjacent_pairs(&self) -> Vec<(Vertex, Vertex)> {
        self.pairs(true)
    }

    fn pairs(&self, adjacent: bool) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::new();
        for v in Vertex::all() {
            for w in Vertex::all().filter(|&w| w > v) {
                if self.adjacent(v, w).expect("distinct") == adjacent {
                    out.push((v, w));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> GameJson {
        GameJson {
            contexts: Context::ALL
                .into_iter()
                .map(|c| (c.label().to_owned(), self.vertices(c).iter().map(|v| v.id()).collect()))
                .collect(),
            labels: Context::ALL
                .into_iter()
                .map(|c| (c.label().to_owned(), self.label(c)))
                .collect(),
        }
    }

    pub fn from_json(json: &GameJson) -> Result<Self, GameError> {
        let mut contexts = [[0u8; CONTEXT_SIZE]; NUM_CONTEXTS];
        let mut labels = [0i8; NUM_CONTEXTS];
        if json.contexts.len() != NUM_CONTEXTS || json.labels.len() != NUM_CONTEXTS {
            return Err(GameError::Malformed("expected exactly contexts C..G".into()));
        }
        for (key, ids) in &json.contexts {
            let c: Context = key.parse()?;
            contexts[c.index()] = ids
                .as_slice()
                .try_into()
                .map_err(|_| GameError::Malformed(format!("context {c} must list 4 vertices")))?;
        }
        for (key, &l) in &json.labels {
            let c: Context = key.parse()?;
            labels[c.index()] = l;
        }
        Self::new(contexts, labels)
    }
}

/// Wire form of `game.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameJson {
    pub contexts: BTreeMap<String, Vec<u8>>,
    pub labels: BTreeMap<String, i8>,
}

/// Deterministic classical strategy: Alice answers per context, Bob per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicalStrategy {
    /// Answers aligned with each context's sorted vertex list.
    pub alice_tables: [[i8; CONTEXT_SIZE]; NUM_CONTEXTS],
    /// Answer for vertex `v` at index `v - 1`.
    pub bob_table: [i8; NUM_VERTICES],
}

impl ClassicalStrategy {
    pub fn validate(&self, game: &PentagramGame) -> Result<(), GameError> {
        for &a in self.alice_tables.iter().flatten().chain(self.bob_table.iter()) {
            if a != 1 && a != -1 {
                return Err(GameError::BadAnswer(a));
            }
        }
        for c in Context::ALL {
            let got: i8 = self.alice_tables[c.index()].iter().product();
            if got != game.label(c) {
                return Err(GameError::ParityViolation {
                    context: c,
                    got,
                    expected: game.label(c),
                });
            }
        }
        Ok(())
    }

    pub fn alice(&self, c: Context, slot: usize) -> i8 {
        self.alice_tables[c.index()][slot]
    }

    pub fn bob(&self, v: Vertex) -> i8 {
        self.bob_table[v.index()]
    }
}

/// The eight ±1 assignments to a context's four vertices with product `label`.
pub fn parity_valid_tables(label: i8) -> Vec<[i8; CONTEXT_SIZE]> {
    (0u8..16)
        .map(|bits| std::array::from_fn(|k| if bits >> k & 1 == 1 { -1 } else { 1 }))
        .filter(|t: &[i8; CONTEXT_SIZE]| t.iter().product::<i8>() == label)
        .collect()
}

fn wins(game: &PentagramGame, strategy: &ClassicalStrategy) -> u32 {
    Context::ALL
        .into_iter()
        .map(|c| {
            game.vertices(c)
                .iter()
                .enumerate()
                .filter(|&(k, &v)| strategy.alice(c, k) == strategy.bob(v))
                .count() as u32
        })
        .sum()
}

pub fn evaluate_classical(game: &PentagramGame, strategy: &ClassicalStrategy) -> Result<WinProbability, GameError> {
    strategy.validate(game)?;
    Ok(WinProbability::new(wins(game, strategy), NUM_QUESTIONS as u32))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicalOptimum {
    pub value: WinProbability,
    pub witness: ClassicalStrategy,
}

/// Bob's ±1 table encoded by the bits of `mask` (bit set ⇒ −1).
pub fn bob_table_from_mask(mask: u16) -> [i8; NUM_VERTICES] {
    std::array::from_fn(|i| if mask >> i & 1 == 1 { -1 } else { 1 })
}

/// Exact classical value: all 2¹⁰ Bob tables, Alice's best parity-valid table per context.
///
/// The first optimal table in mask order is returned as the witness.
pub fn classical_value(game: &PentagramGame) -> ClassicalOptimum {
    let candidates: Vec<Vec<[i8; CONTEXT_SIZE]>> =
        Context::ALL.iter().map(|&c| parity_valid_tables(game.label(c))).collect();

    let mut best: Option<(u32, ClassicalStrategy)> = None;
    for mask in 0u16..(1 << NUM_VERTICES) {
        let bob_table = bob_table_from_mask(mask);
        let mut alice_tables = [[1i8; CONTEXT_SIZE]; NUM_CONTEXTS];
        let mut total = 0;
        for c in Context::ALL {
            let verts = game.vertices(c);
            let (score, table) = candidates[c.index()]
                .iter()
                .map(|t| {
                    let agree = (0..CONTEXT_SIZE)
                        .filter(|&k| t[k] == bob_table[verts[k].index()])
                        .count() as u32;
                    (agree, *t)
                })
                .max_by_key(|&(agree, _)| agree)
                .expect("eight candidate tables");
            total += score;
            alice_tables[c.index()] = table;
        }
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, ClassicalStrategy { alice_tables, bob_table }));
        }
    }
    let (total, witness) = best.expect("at least one Bob table");
    ClassicalOptimum {
        value: WinProbability::new(total, NUM_QUESTIONS as u32),
        witness,
    }
}

/// Number of contexts whose product of Bob's answers differs from the label.
pub fn parity_mismatches(game: &PentagramGame, bob_table: &[i8; NUM_VERTICES]) -> usize {
    Context::ALL
        .into_iter()
        .filter(|&c| {
            let prod: i8 = game.vertices(c).iter().map(|v| bob_table[v.index()]).product();
            prod != game.label(c)
        })
        .count()
}
