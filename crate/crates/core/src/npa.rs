//! Moment relaxations of the quantum set and the entropy SDPs built on them.
//!
//! Operators are projectors `M_{a|x}` (Alice), `N_{b|y}` (Bob) and, for the
//! von Neumann bound, Eve's non-Hermitian `Z_a`, `Z_a^†`. The last outcome of
//! every measurement is eliminated through completeness, so `M_{o-1|x}` is
//! expanded as `1 - Σ_{a<o-1} M_{a|x}`.
//!
//! Moments are real: a word and its adjoint share one variable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{BellExpression, ExprError};
use crate::quadrature::{gauss_radau, QuadratureError, QuadratureRule};
use crate::scenario::{Behavior, Scenario, ScenarioError};
use crate::sdp::{LinearEquality, PsdBlock, SdpProblem, Sense};
use crate::solver::{DualSolution, SdpSolver, SolveStatus, SolverError};

#[derive(Debug, Error)]
pub enum NpaError {
    #[error("relaxation level must be at least 1")]
    ZeroLevel,
    #[error("moment {0} is not part of the level-{1} moment matrix")]
    MissingMoment(String, usize),
    #[error("spot setting ({x},{y}) is invalid: {reason}")]
    InvalidSpot { x: usize, y: usize, reason: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Expression(#[from] ExprError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver returned status {status:?} for {what}")]
    Unsolved { status: SolveStatus, what: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    A { x: u16, a: u16 },
    B { y: u16, b: u16 },
    Z { index: u16, dagger: bool },
}

pub type Word = Vec<Letter>;

pub fn word_to_string(w: &[Letter]) -> String {
    if w.is_empty() {
        return "1".into();
    }
    w.iter()
        .map(|l| match *l {
            Letter::A { x, a } => format!("A{a}|{x}"),
            Letter::B { y, b } => format!("B{b}|{y}"),
            Letter::Z { index, dagger } => format!("Z{index}{}", if dagger { "*" } else { "" }),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn push_projector(stack: &mut Word, l: Letter) -> Option<()> {
    let same_setting = |p: &Letter| match (p, &l) {
        (Letter::A { x: x1, .. }, Letter::A { x: x2, .. }) => x1 == x2,
        (Letter::B { y: y1, .. }, Letter::B { y: y2, .. }) => y1 == y2,
        _ => false,
    };
    match stack.last() {
        Some(top) if same_setting(top) => {
            if *top == l {
                Some(())
            } else {
                None
            }
        }
        _ => {
            stack.push(l);
            Some(())
        }
    }
}

/// Canonical form of a word, or `None` if it vanishes by orthogonality.
///
/// Alice's letters come first, then Bob's, then Eve's (the three algebras
/// commute); projector idempotence is applied inside each party.
pub fn canonical(word: &[Letter]) -> Option<Word> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut z = Vec::new();
    for &l in word {
        match l {
            Letter::A { .. } => push_projector(&mut a, l)?,
            Letter::B { .. } => push_projector(&mut b, l)?,
            Letter::Z { .. } => z.push(l),
        }
    }
    a.extend(b);
    a.extend(z);
    Some(a)
}

/// Adjoint of a canonical word.
pub fn adjoint(word: &[Letter]) -> Word {
    let mut a: Word = word.iter().filter(|l| matches!(l, Letter::A { .. })).rev().copied().collect();
    let b = word.iter().filter(|l| matches!(l, Letter::B { .. })).rev().copied();
    let z = word.iter().filter(|l| matches!(l, Letter::Z { .. })).rev().map(|l| match *l {
        Letter::Z { index, dagger } => Letter::Z { index, dagger: !dagger },
        other => other,
    });
    a.extend(b);
    a.extend(z);
    a
}

fn moment_key(word: Word) -> Word {
    let adj = adjoint(&word);
    if adj < word {
        adj
    } else {
        word
    }
}

/// A linear combination of words.
type Poly = Vec<(f64, Word)>;

fn poly_mul(p: &Poly, q: &Poly) -> Poly {
    let mut out = Vec::with_capacity(p.len() * q.len());
    for (c1, w1) in p {
        for (c2, w2) in q {
            let mut w = w1.clone();
            w.extend_from_slice(w2);
            if let Some(c) = canonical(&w) {
                out.push((c1 * c2, c));
            }
        }
    }
    out
}

/// NPA moment matrix at a fixed level.
#[derive(Debug, Clone)]
pub struct MomentRelaxation {
    scenario: Scenario,
    level: usize,
    eve_operators: usize,
    basis: Vec<Word>,
    moments: Vec<Word>,
    index: HashMap<Word, usize>,
    /// Upper-triangular `(row, col, moment)` entries of the moment matrix.
    entries: Vec<(usize, usize, usize)>,
}

impl MomentRelaxation {
    pub fn new(scenario: &Scenario, level: usize) -> Result<Self, NpaError> {
        Self::with_eve_operators(scenario, level, 0)
    }

    /// Relaxation extended with `count` operators `Z_i` and their adjoints.
    pub fn with_eve_operators(scenario: &Scenario, level: usize, count: usize) -> Result<Self, NpaError> {
        if level == 0 {
            return Err(NpaError::ZeroLevel);
        }
        let mut letters = Vec::new();
        for x in 0..scenario.alice_settings() {
            for a in 0..scenario.alice_outcomes(x) - 1 {
                letters.push(Letter::A { x: x as u16, a: a as u16 });
            }
        }
        for y in 0..scenario.bob_settings() {
            for b in 0..scenario.bob_outcomes(y) - 1 {
                letters.push(Letter::B { y: y as u16, b: b as u16 });
            }
        }
        for index in 0..count {
            for dagger in [false, true] {
                letters.push(Letter::Z {
                    index: index as u16,
                    dagger,
                });
            }
        }

        let mut basis: Vec<Word> = vec![Vec::new()];
        let mut seen: HashMap<Word, ()> = HashMap::new();
        seen.insert(Vec::new(), ());
        let mut frontier: Vec<Word> = vec![Vec::new()];
        for _ in 0..level {
            let mut next = Vec::new();
            for w in &frontier {
                for &l in &letters {
                    let mut cand = w.clone();
                    cand.push(l);
                    next.push(cand);
                }
            }
            for cand in &next {
                if let Some(c) = canonical(cand) {
                    if !seen.contains_key(&c) {
                        seen.insert(c.clone(), ());
                        basis.push(c);
                    }
                }
            }
            frontier = next;
        }

        let n = basis.len();
        let mut index: HashMap<Word, usize> = HashMap::new();
        let mut moments = Vec::new();
        let mut entries = Vec::new();
        let adjoints: Vec<Word> = basis.iter().map(|w| adjoint(w)).collect();
        for i in 0..n {
            for j in i..n {
                let mut w = adjoints[i].clone();
                w.extend_from_slice(&basis[j]);
                let Some(c) = canonical(&w) else { continue };
                let key = moment_key(c);
                let k = *index.entry(key.clone()).or_insert_with(|| {
                    moments.push(key);
                    moments.len() - 1
                });
                entries.push((i, j, k));
            }
        }
        Ok(Self {
            scenario: scenario.clone(),
            level,
            eve_operators: count,
            basis,
            moments,
            index,
            entries,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn eve_operators(&self) -> usize {
        self.eve_operators
    }

    /// Side length of the moment matrix.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn basis(&self) -> &[Word] {
        &self.basis
    }

    pub fn moment_labels(&self) -> Vec<String> {
        self.moments.iter().map(|w| word_to_string(w)).collect()
    }

    /// Variable index of `<word>`; `None` when the word vanishes.
    pub fn moment_index(&self, word: &[Letter]) -> Result<Option<usize>, NpaError> {
        let Some(c) = canonical(word) else { return Ok(None) };
        let key = moment_key(c);
        match self.index.get(&key) {
            Some(&k) => Ok(Some(k)),
            None => Err(NpaError::MissingMoment(word_to_string(&key), self.level)),
        }
    }

    fn linearize(&self, poly: &Poly) -> Result<Vec<(usize, f64)>, NpaError> {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for (c, w) in poly {
            if let Some(k) = self.moment_index(w)? {
                *acc.entry(k).or_default() += c;
            }
        }
        let mut out: Vec<(usize, f64)> = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
        out.sort_unstable_by_key(|t| t.0);
        Ok(out)
    }

    /// `M_{a|x}` as a polynomial in the retained letters.
    pub fn alice_projector(&self, a: usize, x: usize) -> Vec<(f64, Word)> {
        let o = self.scenario.alice_outcomes(x);
        if a + 1 < o {
            vec![(1.0, vec![Letter::A { x: x as u16, a: a as u16 }])]
        } else {
            let mut p = vec![(1.0, Vec::new())];
            for k in 0..o - 1 {
                p.push((-1.0, vec![Letter::A { x: x as u16, a: k as u16 }]));
            }
            p
        }
    }

    pub fn bob_projector(&self, b: usize, y: usize) -> Vec<(f64, Word)> {
        let o = self.scenario.bob_outcomes(y);
        if b + 1 < o {
            vec![(1.0, vec![Letter::B { y: y as u16, b: b as u16 }])]
        } else {
            let mut p = vec![(1.0, Vec::new())];
            for k in 0..o - 1 {
                p.push((-1.0, vec![Letter::B { y: y as u16, b: k as u16 }]));
            }
            p
        }
    }

    /// `P(a,b|x,y)` as a linear functional of the moments.
    pub fn probability_functional(&self, a: usize, b: usize, x: usize, y: usize) -> Result<Vec<(usize, f64)>, NpaError> {
        self.linearize(&poly_mul(&self.alice_projector(a, x), &self.bob_projector(b, y)))
    }

    /// Linear part of an expression over the moments, and its constant.
    pub fn expression_functional(&self, expr: &BellExpression) -> Result<(Vec<(usize, f64)>, f64), NpaError> {
        if expr.scenario() != &self.scenario {
            return Err(ExprError::ScenarioMismatch.into());
        }
        let (v, constant) = expr.coefficient_vector();
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for (a, b, x, y) in self.scenario.entries() {
            let c = v[self.scenario.index(a, b, x, y)];
            if c == 0.0 {
                continue;
            }
            for (k, fc) in self.probability_functional(a, b, x, y)? {
                *acc.entry(k).or_default() += c * fc;
            }
        }
        let mut out: Vec<(usize, f64)> = acc.into_iter().filter(|(_, c)| c.abs() > 1e-15).collect();
        out.sort_unstable_by_key(|t| t.0);
        Ok((out, constant))
    }

    /// Appends the moment matrix as a PSD block over variables `offset..`.
    pub fn push_block(&self, problem: &mut SdpProblem, offset: usize) {
        let mut block = PsdBlock::new(self.dim());
        for &(i, j, k) in &self.entries {
            block.push(i, j, Some(offset + k), 1.0);
        }
        problem.blocks.push(block);
    }

    /// Behavior read from a moment vector, renormalized by `<1>`.
    ///
    /// Small negative entries from solver tolerance are clipped.
    pub fn behavior(&self, y: &[f64], offset: usize) -> Result<Behavior, NpaError> {
        let norm = y[offset];
        let s = &self.scenario;
        let mut table = Vec::with_capacity(s.table_len());
        for (a, b, x, yy) in s.entries() {
            let v: f64 = self
                .probability_functional(a, b, x, yy)?
                .iter()
                .map(|&(k, c)| c * y[offset + k])
                .sum();
            table.push((v / norm).max(0.0));
        }
        for x in 0..s.alice_settings() {
            for yy in 0..s.bob_settings() {
                let start = s.index(0, 0, x, yy);
                let len = s.alice_outcomes(x) * s.bob_outcomes(yy);
                let sum: f64 = table[start..start + len].iter().sum();
                for p in &mut table[start..start + len] {
                    *p /= sum;
                }
            }
        }
        Ok(Behavior::new(s.clone(), table)?)
    }
}

/// Whose outcome Eve guesses in the min-entropy relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GuessTarget {
    /// Alice's outcome at the spot setting.
    Alice,
    /// The pair `(a, b)` at the spot setting pair.
    #[default]
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub expression: BellExpression,
    pub target: f64,
}

impl Certificate {
    pub fn new(expression: BellExpression, target: f64) -> Self {
        Self { expression, target }
    }
}

fn prepare(
    scenario: &Scenario,
    certificates: &[Certificate],
    spot: (usize, usize),
) -> Result<(Scenario, Vec<Certificate>), NpaError> {
    let ext = scenario.extended_to_include(spot.0, spot.1);
    let certs = certificates
        .iter()
        .map(|c| Ok(Certificate::new(c.expression.with_scenario(&ext)?, c.target)))
        .collect::<Result<Vec<_>, NpaError>>()?;
    Ok((ext, certs))
}

fn add_certificate_rows(
    relax: &MomentRelaxation,
    problem: &mut SdpProblem,
    offsets: &[usize],
    certificates: &[Certificate],
) -> Result<(), NpaError> {
    let mut norm_terms = Vec::new();
    for &off in offsets {
        norm_terms.push((off, 1.0));
    }
    problem.equalities.push(LinearEquality {
        label: "normalization".into(),
        terms: norm_terms,
        rhs: 1.0,
    });
    for (k, cert) in certificates.iter().enumerate() {
        let (lin, constant) = relax.expression_functional(&cert.expression)?;
        let terms = offsets
            .iter()
            .flat_map(|&off| lin.iter().map(move |&(v, c)| (off + v, c)))
            .collect();
        problem.equalities.push(LinearEquality {
            label: format!("certificate {k}: {}", cert.expression),
            terms,
            rhs: cert.target - constant,
        });
    }
    Ok(())
}

/// Equality right-hand sides for certificate values `values`.
pub fn certificate_rhs(certificates: &[Certificate], values: &[f64]) -> Vec<f64> {
    let mut rhs = vec![1.0];
    rhs.extend(
        certificates
            .iter()
            .zip(values)
            .map(|(c, v)| v - c.expression.constant()),
    );
    rhs
}

/// Guessing-probability SDP: one sub-normalized moment matrix per guess.
#[derive(Debug, Clone)]
pub struct GuessingProblem {
    pub problem: SdpProblem,
    pub relaxation: MomentRelaxation,
    pub certificates: Vec<Certificate>,
    pub spot: (usize, usize),
    pub guess: GuessTarget,
    /// Guess `(a, b)` for each block (`b` unused for [`GuessTarget::Alice`]).
    pub guesses: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessingResult {
    /// Certified (dual) upper bound on the guessing probability.
    pub p_guess: f64,
    pub h_min: f64,
    pub solution: DualSolution,
}

pub fn build_npa_minentropy(
    scenario: &Scenario,
    level: usize,
    certificates: &[Certificate],
    spot: (usize, usize),
    guess: GuessTarget,
) -> Result<GuessingProblem, NpaError> {
    let (ext, certs) = prepare(scenario, certificates, spot)?;
    let relax = MomentRelaxation::new(&ext, level)?;
    let (sx, sy) = spot;
    let guesses: Vec<(usize, usize)> = match guess {
        GuessTarget::Alice => (0..ext.alice_outcomes(sx)).map(|a| (a, 0)).collect(),
        GuessTarget::Joint => (0..ext.alice_outcomes(sx))
            .flat_map(|a| (0..ext.bob_outcomes(sy)).map(move |b| (a, b)))
            .collect(),
    };
    let nm = relax.num_moments();
    let mut problem = SdpProblem::new(nm * guesses.len(), Sense::Maximize);
    let labels = relax.moment_labels();
    let offsets: Vec<usize> = (0..guesses.len()).map(|e| e * nm).collect();
    for (e, &off) in offsets.iter().enumerate() {
        relax.push_block(&mut problem, off);
        problem
            .var_labels
            .extend(labels.iter().map(|l| format!("guess{e}:{l}")));
    }
    for (&(a, b), &off) in guesses.iter().zip(&offsets) {
        let lin = match guess {
            GuessTarget::Alice => relax.linearize(&relax.alice_projector(a, sx))?,
            GuessTarget::Joint => relax.probability_functional(a, b, sx, sy)?,
        };
        problem.objective.extend(lin.into_iter().map(|(k, c)| (off + k, c)));
    }
    add_certificate_rows(&relax, &mut problem, &offsets, &certs)?;
    Ok(GuessingProblem {
        problem,
        relaxation: relax,
        certificates: certs,
        spot,
        guess,
        guesses,
    })
}

impl GuessingProblem {
    pub fn solve(&self, solver: &dyn SdpSolver) -> Result<GuessingResult, NpaError> {
        let solution = solver.solve(&self.problem)?;
        if !solution.status.is_usable() {
            return Err(NpaError::Unsolved {
                status: solution.status,
                what: "guessing probability".into(),
            });
        }
        let p_guess = solution.dual_objective.clamp(f64::MIN_POSITIVE, 1.0);
        Ok(GuessingResult {
            p_guess,
            h_min: -p_guess.log2(),
            solution,
        })
    }

    /// Behavior at the optimum: the sum of the per-guess components.
    pub fn behavior(&self, solution: &DualSolution) -> Result<Behavior, NpaError> {
        let nm = self.relaxation.num_moments();
        let mut total = vec![0.0; nm];
        for e in 0..self.guesses.len() {
            for k in 0..nm {
                total[k] += solution.y[e * nm + k];
            }
        }
        self.relaxation.behavior(&total, 0)
    }
}

/// One quadrature node of the von Neumann bound.
#[derive(Debug, Clone)]
pub struct BffNode {
    pub t: f64,
    pub w: f64,
    /// `w / (t ln 2)`.
    pub c: f64,
    pub problem: SdpProblem,
}

#[derive(Debug, Clone)]
pub struct BffProblem {
    pub relaxation: MomentRelaxation,
    pub certificates: Vec<Certificate>,
    pub spot: (usize, usize),
    pub rule: QuadratureRule,
    pub nodes: Vec<BffNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BffResult {
    /// Lower bound on `H(A|X=x*, E)` in bits.
    pub entropy: f64,
    pub node_values: Vec<f64>,
    pub solutions: Vec<DualSolution>,
}

/// Von Neumann entropy bound `H(A|X=x*,E)` via Gauss–Radau quadrature.
///
/// For every node `t_i` except the last, the SDP minimizes
/// `Σ_a <M_{a|x*} (Z_a + Z_a^† + (1 - t_i) Z_a^† Z_a) + t_i Z_a Z_a^†>`.
pub fn build_bff_vonneumann(
    scenario: &Scenario,
    level: usize,
    certificates: &[Certificate],
    spot: (usize, usize),
    m_radau: usize,
) -> Result<BffProblem, NpaError> {
    let rule = gauss_radau(m_radau)?;
    let (ext, certs) = prepare(scenario, certificates, spot)?;
    let sx = spot.0;
    let outcomes = ext.alice_outcomes(sx);
    let relax = MomentRelaxation::with_eve_operators(&ext, level, outcomes)?;
    let labels = relax.moment_labels();
    let mut nodes = Vec::new();
    for i in 0..rule.len() - 1 {
        let t = rule.nodes[i];
        let w = rule.weights[i];
        let mut problem = SdpProblem::new(relax.num_moments(), Sense::Minimize);
        problem.var_labels = labels.clone();
        relax.push_block(&mut problem, 0);
        let mut poly: Poly = Vec::new();
        for a in 0..outcomes {
            let z = Letter::Z { index: a as u16, dagger: false };
            let zd = Letter::Z { index: a as u16, dagger: true };
            let op: Poly = vec![(1.0, vec![z]), (1.0, vec![zd]), (1.0 - t, vec![zd, z])];
            poly.extend(poly_mul(&relax.alice_projector(a, sx), &op));
            poly.push((t, vec![z, zd]));
        }
        problem.objective = relax.linearize(&poly)?;
        add_certificate_rows(&relax, &mut problem, &[0], &certs)?;
        nodes.push(BffNode {
            t,
            w,
            c: w / (t * std::f64::consts::LN_2),
            problem,
        });
    }
    Ok(BffProblem {
        relaxation: relax,
        certificates: certs,
        spot,
        rule,
        nodes,
    })
}

impl BffProblem {
    pub fn solve(&self, solver: &dyn SdpSolver) -> Result<BffResult, NpaError> {
        let mut entropy = 0.0;
        let mut node_values = Vec::new();
        let mut solutions = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let sol = solver.solve(&node.problem)?;
            if !sol.status.is_usable() {
                return Err(NpaError::Unsolved {
                    status: sol.status,
                    what: format!("quadrature node {i} (t = {})", node.t),
                });
            }
            entropy += node.c * (1.0 + sol.dual_objective);
            node_values.push(sol.dual_objective);
            solutions.push(sol);
        }
        Ok(BffResult {
            entropy,
            node_values,
            solutions,
        })
    }
}

/// Optimum of an expression over the level-`level` relaxation, and a behavior attaining it.
/// Moment problem optimizing `expr` over the level-`level` relaxation.
pub fn expression_problem(
    expr: &BellExpression,
    level: usize,
    sense: Sense,
) -> Result<(SdpProblem, MomentRelaxation), NpaError> {
    let relax = MomentRelaxation::new(expr.scenario(), level)?;
    let mut problem = SdpProblem::new(relax.num_moments(), sense);
    problem.var_labels = relax.moment_labels();
    relax.push_block(&mut problem, 0);
    let (lin, constant) = relax.expression_functional(expr)?;
    problem.objective = lin;
    problem.objective_constant = constant;
    problem.equalities.push(LinearEquality {
        label: "normalization".into(),
        terms: vec![(0, 1.0)],
        rhs: 1.0,
    });
    Ok((problem, relax))
}

pub fn optimize_expression(
    expr: &BellExpression,
    level: usize,
    sense: Sense,
    solver: &dyn SdpSolver,
) -> Result<(f64, Behavior), NpaError> {
    let (problem, relax) = expression_problem(expr, level, sense)?;
    let sol = solver.solve(&problem)?;
    if !sol.status.is_usable() {
        return Err(NpaError::Unsolved {
            status: sol.status,
            what: format!("optimizing {expr}"),
        });
    }
    let behavior = relax.behavior(&sol.y, 0)?;
    Ok((sol.dual_objective, behavior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::solver::InteriorPointSolver;
    use approx::assert_abs_diff_eq;

    fn a(x: u16, a: u16) -> Letter {
        Letter::A { x, a }
    }

    fn b(y: u16, b: u16) -> Letter {
        Letter::B { y, b }
    }

    #[test]
    fn canonical_rules() {
        assert_eq!(canonical(&[b(0, 0), a(1, 0)]), Some(vec![a(1, 0), b(0, 0)]));
        assert_eq!(canonical(&[a(0, 0), a(0, 0)]), Some(vec![a(0, 0)]));
        assert_eq!(canonical(&[a(0, 0), a(0, 1)]), None);
        assert_eq!(canonical(&[a(0, 0), a(1, 0), a(0, 0)]), Some(vec![a(0, 0), a(1, 0), a(0, 0)]));
        let z = Letter::Z { index: 0, dagger: false };
        let zd = Letter::Z { index: 0, dagger: true };
        assert_eq!(canonical(&[z, a(0, 0), zd]), Some(vec![a(0, 0), z, zd]));
        assert_eq!(adjoint(&[a(0, 0), a(1, 0), z]), vec![a(1, 0), a(0, 0), zd]);
    }

    #[test]
    fn chsh_basis_sizes() {
        let s = Scenario::binary(2, 2);
        let l1 = MomentRelaxation::new(&s, 1).unwrap();
        assert_eq!(l1.dim(), 5);
        assert_eq!(l1.basis()[0], Vec::<Letter>::new());
        let l2 = MomentRelaxation::new(&s, 2).unwrap();
        // 1 + 4 letters + AA' (2) + BB' (2) + AB (4)
        assert_eq!(l2.dim(), 13);
    }

    #[test]
    fn tsirelson_level_one() {
        let s = Scenario::binary(2, 2);
        let chsh = parse_expression("C(0,0)+C(0,1)+C(1,0)-C(1,1)", &s).unwrap();
        let solver = InteriorPointSolver::default();
        let (v, _) = optimize_expression(&chsh, 1, Sense::Maximize, &solver).unwrap();
        assert_abs_diff_eq!(v, 2.0 * 2f64.sqrt(), epsilon = 1e-6);
        let (v, _) = optimize_expression(&chsh, 1, Sense::Minimize, &solver).unwrap();
        assert_abs_diff_eq!(v, -2.0 * 2f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn missing_moment_at_low_level() {
        let s = Scenario::binary(1, 1);
        let relax = MomentRelaxation::with_eve_operators(&s, 1, 2).unwrap();
        let z = Letter::Z { index: 0, dagger: false };
        assert!(matches!(
            relax.moment_index(&[a(0, 0), z, z]),
            Err(NpaError::MissingMoment(..))
        ));
    }

    #[test]
    fn ternary_projector_expansion() {
        let s = Scenario::new(vec![3], vec![2]).unwrap();
        let relax = MomentRelaxation::new(&s, 1).unwrap();
        // P(2,1|0,0) = <(1 - A0 - A1)(1 - B0)>
        let f = relax.probability_functional(2, 1, 0, 0).unwrap();
        assert_eq!(f.len(), 6);
        assert_eq!(f.iter().map(|t| t.1).sum::<f64>(), 0.0);
    }
}
