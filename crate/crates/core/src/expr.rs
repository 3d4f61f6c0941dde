//! Textual Bell expressions such as `C(0,0) + C(0,1) + C(1,0) - C(1,1)`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr  := sign? term (sign term)*
//! term  := number ('*'? atom)? | atom
//! atom  := 'C(' x ',' y ')' | 'P(' a ',' b '|' x ',' y ')' | 'PA(' a '|' x ')' | 'PB(' b '|' y ')'
//! sign  := '+' | '-' | '\u{2212}'
//! ```
//!
//! A bare number is a constant term.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Behavior, Scenario};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("{atom} is outside the scenario (A_config={a_config:?}, B_config={b_config:?})")]
    IndexOutOfRange {
        atom: String,
        a_config: Vec<usize>,
        b_config: Vec<usize>,
    },
    #[error("{atom} needs binary-outcome measurements")]
    NonBinaryCorrelator { atom: String },
    #[error("expression and behavior belong to different scenarios")]
    ScenarioMismatch,
}

impl ExprError {
    fn syntax(position: usize, message: impl Into<String>) -> Self {
        ExprError::Syntax {
            position,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BellAtom {
    Constant,
    Correlator { x: usize, y: usize },
    JointProb { a: usize, b: usize, x: usize, y: usize },
    MarginalA { a: usize, x: usize },
    MarginalB { b: usize, y: usize },
}

impl BellAtom {
    /// Setting pairs whose statistics the atom reads (after lowering marginals).
    pub fn setting_pair(&self) -> Option<(usize, usize)> {
        match *self {
            BellAtom::Constant => None,
            BellAtom::Correlator { x, y } | BellAtom::JointProb { x, y, .. } => Some((x, y)),
            BellAtom::MarginalA { x, .. } => Some((x, 0)),
            BellAtom::MarginalB { y, .. } => Some((0, y)),
        }
    }

    /// Width of the atom's value range (2 for correlators, 1 for probabilities).
    pub fn span(&self) -> f64 {
        match self {
            BellAtom::Constant => 0.0,
            BellAtom::Correlator { .. } => 2.0,
            _ => 1.0,
        }
    }

    fn check(&self, scenario: &Scenario) -> Result<(), ExprError> {
        let out_of_range = || ExprError::IndexOutOfRange {
            atom: self.to_string(),
            a_config: scenario.a_config().to_vec(),
            b_config: scenario.b_config().to_vec(),
        };
        let alice_ok = |a: usize, x: usize| x < scenario.alice_settings() && a < scenario.alice_outcomes(x);
        let bob_ok = |b: usize, y: usize| y < scenario.bob_settings() && b < scenario.bob_outcomes(y);
        match *self {
            BellAtom::Constant => Ok(()),
            BellAtom::Correlator { x, y } => {
                if x >= scenario.alice_settings() || y >= scenario.bob_settings() {
                    Err(out_of_range())
                } else if !scenario.is_binary(x, y) {
                    Err(ExprError::NonBinaryCorrelator {
                        atom: self.to_string(),
                    })
                } else {
                    Ok(())
                }
            }
            BellAtom::JointProb { a, b, x, y } => {
                if alice_ok(a, x) && bob_ok(b, y) {
                    Ok(())
                } else {
                    Err(out_of_range())
                }
            }
            BellAtom::MarginalA { a, x } => {
                if alice_ok(a, x) {
                    Ok(())
                } else {
                    Err(out_of_range())
                }
            }
            BellAtom::MarginalB { b, y } => {
                if bob_ok(b, y) {
                    Ok(())
                } else {
                    Err(out_of_range())
                }
            }
        }
    }

    fn value(&self, p: &Behavior) -> f64 {
        let s = p.scenario();
        match *self {
            BellAtom::Constant => 1.0,
            BellAtom::Correlator { x, y } => {
                p.p(0, 0, x, y) - p.p(0, 1, x, y) - p.p(1, 0, x, y) + p.p(1, 1, x, y)
            }
            BellAtom::JointProb { a, b, x, y } => p.p(a, b, x, y),
            BellAtom::MarginalA { a, x } => (0..s.bob_outcomes(0)).map(|b| p.p(a, b, x, 0)).sum(),
            BellAtom::MarginalB { b, y } => (0..s.alice_outcomes(0)).map(|a| p.p(a, b, 0, y)).sum(),
        }
    }
}

impl fmt::Display for BellAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BellAtom::Constant => write!(f, "1"),
            BellAtom::Correlator { x, y } => write!(f, "C({x},{y})"),
            BellAtom::JointProb { a, b, x, y } => write!(f, "P({a},{b}|{x},{y})"),
            BellAtom::MarginalA { a, x } => write!(f, "PA({a}|{x})"),
            BellAtom::MarginalB { b, y } => write!(f, "PB({b}|{y})"),
        }
    }
}

/// A canonical affine functional over behaviors.
///
/// Equal atoms are merged; the order of first appearance is kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellExpression {
    terms: Vec<(f64, BellAtom)>,
    scenario: Scenario,
}

impl PartialEq for BellExpression {
    fn eq(&self, other: &Self) -> bool {
        let sorted = |e: &BellExpression| {
            let mut t = e.terms.clone();
            t.sort_by_key(|term| term.1);
            t
        };
        self.scenario == other.scenario && sorted(self) == sorted(other)
    }
}

impl BellExpression {
    /// Builds a validated, canonical expression from raw terms.
    pub fn new(terms: Vec<(f64, BellAtom)>, scenario: Scenario) -> Result<Self, ExprError> {
        let mut merged: Vec<(f64, BellAtom)> = Vec::with_capacity(terms.len());
        for (c, atom) in terms {
            atom.check(&scenario)?;
            match merged.iter_mut().find(|(_, a)| *a == atom) {
                Some(slot) => slot.0 += c,
                None => merged.push((c, atom)),
            }
        }
        Ok(Self {
            terms: merged,
            scenario,
        })
    }

    pub fn parse(text: &str, scenario: &Scenario) -> Result<Self, ExprError> {
        Self::new(parse_terms(text)?, scenario.clone())
    }

    pub fn terms(&self) -> &[(f64, BellAtom)] {
        &self.terms
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Sum of the constant terms.
    pub fn constant(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(_, a)| *a == BellAtom::Constant)
            .map(|(c, _)| c)
            .sum()
    }

    /// Same terms against a (larger) scenario.
    pub fn with_scenario(&self, scenario: &Scenario) -> Result<Self, ExprError> {
        Self::new(self.terms.clone(), scenario.clone())
    }

    /// Scalar multiple of the expression.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(c, a)| (factor * c, a)).collect(),
            scenario: self.scenario.clone(),
        }
    }

    /// `Σ c_i e_i` over expressions sharing `scenario`.
    pub fn linear_combination(parts: &[(f64, &BellExpression)], scenario: &Scenario) -> Result<Self, ExprError> {
        let mut terms = Vec::new();
        for (c, e) in parts {
            if e.scenario() != scenario {
                return Err(ExprError::ScenarioMismatch);
            }
            terms.extend(e.terms.iter().map(|&(k, a)| (c * k, a)));
        }
        Self::new(terms, scenario.clone())
    }

    pub fn evaluate(&self, behavior: &Behavior) -> Result<f64, ExprError> {
        if behavior.scenario() != &self.scenario {
            return Err(ExprError::ScenarioMismatch);
        }
        Ok(self.terms.iter().map(|(c, a)| c * a.value(behavior)).sum())
    }

    /// `(v, constant)` with `Σ v[idx(a,b,x,y)]·P(a,b|x,y) + constant = evaluate(P)`.
    ///
    /// Marginals are lowered through the partner's setting 0.
    pub fn coefficient_vector(&self) -> (Vec<f64>, f64) {
        let s = &self.scenario;
        let mut v = vec![0.0; s.table_len()];
        let mut constant = 0.0;
        for &(c, atom) in &self.terms {
            match atom {
                BellAtom::Constant => constant += c,
                BellAtom::Correlator { x, y } => {
                    for a in 0..2 {
                        for b in 0..2 {
                            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                            v[s.index(a, b, x, y)] += sign * c;
                        }
                    }
                }
                BellAtom::JointProb { a, b, x, y } => v[s.index(a, b, x, y)] += c,
                BellAtom::MarginalA { a, x } => {
                    for b in 0..s.bob_outcomes(0) {
                        v[s.index(a, b, x, 0)] += c;
                    }
                }
                BellAtom::MarginalB { b, y } => {
                    for a in 0..s.alice_outcomes(0) {
                        v[s.index(a, b, 0, y)] += c;
                    }
                }
            }
        }
        (v, constant)
    }

    /// Setting pairs touched by non-constant atoms, sorted and deduplicated.
    pub fn setting_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<_> = self.terms.iter().filter_map(|(_, a)| a.setting_pair()).collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

fn format_coefficient(c: f64) -> String {
    format!("{c}")
}

impl fmt::Display for BellExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, &(c, atom)) in self.terms.iter().enumerate() {
            let negative = c.is_sign_negative();
            let mag = c.abs();
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            match atom {
                BellAtom::Constant => write!(f, "{}", format_coefficient(mag))?,
                _ if mag == 1.0 => write!(f, "{atom}")?,
                _ => write!(f, "{}*{atom}", format_coefficient(mag))?,
            }
        }
        Ok(())
    }
}

/// Parses text into raw terms without checking them against a scenario.
pub fn parse_terms(text: &str) -> Result<Vec<(f64, BellAtom)>, ExprError> {
    let mut p = Parser::new(text);
    p.skip_ws();
    if p.at_end() {
        return Err(ExprError::syntax(0, "empty expression"));
    }
    let mut terms = Vec::new();
    let mut first = true;
    loop {
        p.skip_ws();
        if p.at_end() {
            break;
        }
        let sign_pos = p.pos;
        let sign = match p.peek() {
            Some('+') => {
                p.bump();
                1.0
            }
            Some('-') | Some('\u{2212}') => {
                p.bump();
                -1.0
            }
            Some(_) if first => 1.0,
            Some(c) => return Err(ExprError::syntax(sign_pos, format!("expected '+' or '-', found '{c}'"))),
            None => break,
        };
        p.skip_ws();
        let (coef, atom) = p.term()?;
        terms.push((sign * coef, atom));
        first = false;
    }
    Ok(terms)
}

pub fn parse_expression(text: &str, scenario: &Scenario) -> Result<BellExpression, ExprError> {
    BellExpression::parse(text, scenario)
}

/// Smallest binary scenario containing every atom of `text`.
pub fn infer_binary_scenario(text: &str) -> Result<Scenario, ExprError> {
    let terms = parse_terms(text)?;
    let mut xs = 1;
    let mut ys = 1;
    let mut a_out = 2;
    let mut b_out = 2;
    for (_, atom) in terms {
        match atom {
            BellAtom::Constant => {}
            BellAtom::Correlator { x, y } => {
                xs = xs.max(x + 1);
                ys = ys.max(y + 1);
            }
            BellAtom::JointProb { a, b, x, y } => {
                xs = xs.max(x + 1);
                ys = ys.max(y + 1);
                a_out = a_out.max(a + 1);
                b_out = b_out.max(b + 1);
            }
            BellAtom::MarginalA { a, x } => {
                xs = xs.max(x + 1);
                a_out = a_out.max(a + 1);
            }
            BellAtom::MarginalB { b, y } => {
                ys = ys.max(y + 1);
                b_out = b_out.max(b + 1);
            }
        }
    }
    Scenario::new(vec![a_out; xs], vec![b_out; ys]).map_err(|e| ExprError::syntax(0, e.to_string()))
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    idx: usize,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let chars: Vec<_> = text.char_indices().collect();
        let pos = chars.first().map_or(text.len(), |c| c.0);
        Self {
            chars,
            idx: 0,
            pos,
            text,
        }
    }

    fn at_end(&self) -> bool {
        self.idx >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).map(|c| c.1)
    }

    fn bump(&mut self) {
        self.idx += 1;
        self.pos = self.chars.get(self.idx).map_or(self.text.len(), |c| c.0);
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn expect(&mut self, want: char) -> Result<(), ExprError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(ExprError::syntax(self.pos, format!("expected '{want}', found '{c}'"))),
            None => Err(ExprError::syntax(self.pos, format!("expected '{want}', found end of input"))),
        }
    }

    fn number(&mut self) -> Result<Option<f64>, ExprError> {
        let start_idx = self.idx;
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
            self.bump();
        }
        if self.idx == start_idx {
            return Ok(None);
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            self.bump();
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.bump();
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        let s = &self.text[start..self.pos];
        s.parse::<f64>()
            .map(Some)
            .map_err(|_| ExprError::syntax(start, format!("malformed number '{s}'")))
    }

    fn index(&mut self) -> Result<usize, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let start_idx = self.idx;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        if self.idx == start_idx {
            return Err(ExprError::syntax(start, "expected a non-negative integer index"));
        }
        self.text[start..self.pos]
            .parse()
            .map_err(|_| ExprError::syntax(start, "index too large"))
    }

    fn atom(&mut self) -> Result<Option<BellAtom>, ExprError> {
        let start = self.pos;
        let mut name = String::new();
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            name.push(self.peek().unwrap());
            self.bump();
        }
        if name.is_empty() {
            return Ok(None);
        }
        self.expect('(')?;
        let atom = match name.as_str() {
            "C" => {
                let x = self.index()?;
                self.expect(',')?;
                let y = self.index()?;
                BellAtom::Correlator { x, y }
            }
            "P" => {
                let a = self.index()?;
                self.expect(',')?;
                let b = self.index()?;
                self.expect('|')?;
                let x = self.index()?;
                self.expect(',')?;
                let y = self.index()?;
                BellAtom::JointProb { a, b, x, y }
            }
            "PA" => {
                let a = self.index()?;
                self.expect('|')?;
                let x = self.index()?;
                BellAtom::MarginalA { a, x }
            }
            "PB" => {
                let b = self.index()?;
                self.expect('|')?;
                let y = self.index()?;
                BellAtom::MarginalB { b, y }
            }
            other => return Err(ExprError::syntax(start, format!("unknown atom '{other}'"))),
        };
        self.expect(')')?;
        Ok(Some(atom))
    }

    fn term(&mut self) -> Result<(f64, BellAtom), ExprError> {
        let start = self.pos;
        let coef = self.number()?;
        self.skip_ws();
        let had_star = if self.peek() == Some('*') {
            if coef.is_none() {
                return Err(ExprError::syntax(self.pos, "'*' without a coefficient"));
            }
            self.bump();
            self.skip_ws();
            true
        } else {
            false
        };
        let atom = self.atom()?;
        match (coef, atom) {
            (Some(c), Some(a)) => Ok((c, a)),
            (None, Some(a)) => Ok((1.0, a)),
            (Some(_), None) if had_star => Err(ExprError::syntax(self.pos, "expected an atom after '*'")),
            (Some(c), None) => Ok((c, BellAtom::Constant)),
            (None, None) => match self.peek() {
                Some(c) => Err(ExprError::syntax(start, format!("unexpected '{c}'"))),
                None => Err(ExprError::syntax(start, "expected a term, found end of input")),
            },
        }
    }
}
