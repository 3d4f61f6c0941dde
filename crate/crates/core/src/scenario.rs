//! Bell scenarios and behaviors `P(a,b|x,y)`.
//!
//! Outcome counts are stored per setting (ragged), so a scenario such as
//! `A_config = [3, 2]` keeps three outcomes for Alice's first measurement and
//! two for her second. `AO`/`BO` are only display metadata.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative tolerance for no-signaling checks.
pub const DEFAULT_NO_SIGNALING_TOLERANCE: f64 = 1e-6;

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario needs at least one setting per party")]
    Empty,
    #[error("{party} setting {setting} has {outcomes} outcome(s); at least 2 are required")]
    TooFewOutcomes {
        party: char,
        setting: usize,
        outcomes: usize,
    },
    #[error("setting pair ({x},{y}) is outside the scenario")]
    SettingOutOfRange { x: usize, y: usize },
    #[error("outcome pair ({a},{b}) is outside the scenario for settings ({x},{y})")]
    OutcomeOutOfRange { a: usize, b: usize, x: usize, y: usize },
    #[error("measurement ({x},{y}) is not binary-outcome")]
    NotBinary { x: usize, y: usize },
    #[error("behavior table shape does not match the scenario")]
    ShapeMismatch,
    #[error("negative probability {value} at P({a},{b}|{x},{y})")]
    Negative {
        a: usize,
        b: usize,
        x: usize,
        y: usize,
        value: f64,
    },
    #[error("P(.,.|{x},{y}) sums to {sum}, expected 1")]
    NotNormalized { x: usize, y: usize, sum: f64 },
    #[error("behaviors belong to different scenarios")]
    ScenarioMismatch,
    #[error(transparent)]
    Signaling(#[from] SignalingViolation),
}

/// Largest no-signaling discrepancy found in a behavior.
#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[error("no-signaling violated by {discrepancy:e} for {party}-marginal outcome {outcome} of setting {setting} between partner settings {partner_a} and {partner_b}")]
pub struct SignalingViolation {
    pub party: char,
    pub outcome: usize,
    pub setting: usize,
    pub partner_a: usize,
    pub partner_b: usize,
    pub discrepancy: f64,
}

/// Measurement structure of a bipartite Bell experiment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "A_config")]
    a_config: Vec<usize>,
    #[serde(rename = "B_config")]
    b_config: Vec<usize>,
}

impl Scenario {
    pub fn new(a_config: Vec<usize>, b_config: Vec<usize>) -> Result<Self, ScenarioError> {
        if a_config.is_empty() || b_config.is_empty() {
            return Err(ScenarioError::Empty);
        }
        for (party, cfg) in [('A', &a_config), ('B', &b_config)] {
            if let Some((setting, &outcomes)) = cfg.iter().enumerate().find(|(_, &o)| o < 2) {
                return Err(ScenarioError::TooFewOutcomes {
                    party,
                    setting,
                    outcomes,
                });
            }
        }
        Ok(Self { a_config, b_config })
    }

    /// Binary outcomes for every measurement.
    pub fn binary(alice_settings: usize, bob_settings: usize) -> Self {
        Self::new(vec![2; alice_settings], vec![2; bob_settings]).expect("binary scenario is valid")
    }

    pub fn a_config(&self) -> &[usize] {
        &self.a_config
    }

    pub fn b_config(&self) -> &[usize] {
        &self.b_config
    }

    /// Number of Alice settings (`AS`).
    pub fn alice_settings(&self) -> usize {
        self.a_config.len()
    }

    /// Number of Bob settings (`BS`).
    pub fn bob_settings(&self) -> usize {
        self.b_config.len()
    }

    /// `AO = max(A_config)`.
    pub fn alice_max_outcomes(&self) -> usize {
        *self.a_config.iter().max().unwrap_or(&0)
    }

    /// `BO = max(B_config)`.
    pub fn bob_max_outcomes(&self) -> usize {
        *self.b_config.iter().max().unwrap_or(&0)
    }

    pub fn alice_outcomes(&self, x: usize) -> usize {
        self.a_config[x]
    }

    pub fn bob_outcomes(&self, y: usize) -> usize {
        self.b_config[y]
    }

    pub fn check_settings(&self, x: usize, y: usize) -> Result<(), ScenarioError> {
        if x < self.alice_settings() && y < self.bob_settings() {
            Ok(())
        } else {
            Err(ScenarioError::SettingOutOfRange { x, y })
        }
    }

    pub fn is_binary(&self, x: usize, y: usize) -> bool {
        x < self.alice_settings()
            && y < self.bob_settings()
            && self.a_config[x] == 2
            && self.b_config[y] == 2
    }

    /// Total number of `(a,b,x,y)` entries.
    pub fn table_len(&self) -> usize {
        self.a_config
            .iter()
            .map(|oa| self.b_config.iter().map(|ob| oa * ob).sum::<usize>())
            .sum()
    }

    /// Offset of the `(x,y)` block inside a flat `(a,b,x,y)` table.
    pub(crate) fn block_offset(&self, x: usize, y: usize) -> usize {
        let mut offset = 0;
        for xx in 0..self.alice_settings() {
            for yy in 0..self.bob_settings() {
                if xx == x && yy == y {
                    return offset;
                }
                offset += self.a_config[xx] * self.b_config[yy];
            }
        }
        offset
    }

    /// Flat index of `(a,b,x,y)`; settings-major, then `a`, then `b`.
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        self.block_offset(x, y) + a * self.b_config[y] + b
    }

    /// Iterate `(a,b,x,y)` in flat-index order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        (0..self.alice_settings()).flat_map(move |x| {
            (0..self.bob_settings()).flat_map(move |y| {
                (0..self.a_config[x])
                    .flat_map(move |a| (0..self.b_config[y]).map(move |b| (a, b, x, y)))
            })
        })
    }

    /// Same scenario with extra binary settings appended until `(x, y)` exists.
    ///
    /// A spot setting may name a measurement that never appears in the
    /// collected data (e.g. a dedicated key-generation setting for Bob).
    pub fn extended_to_include(&self, x: usize, y: usize) -> Self {
        let mut a_config = self.a_config.clone();
        let mut b_config = self.b_config.clone();
        while a_config.len() <= x {
            a_config.push(2);
        }
        while b_config.len() <= y {
            b_config.push(2);
        }
        Self { a_config, b_config }
    }
}

/// A conditional distribution `P(a,b|x,y)` on a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<f64>,
}

impl Behavior {
    /// Builds a behavior, checking non-negativity and normalization.
    ///
    /// No-signaling is *not* enforced here; call [`Behavior::signaling_violation`]
    /// or [`Behavior::marginals`] to inspect it.
    pub fn new(scenario: Scenario, table: Vec<f64>) -> Result<Self, ScenarioError> {
        if table.len() != scenario.table_len() {
            return Err(ScenarioError::ShapeMismatch);
        }
        let behavior = Self { scenario, table };
        for (a, b, x, y) in behavior.scenario.entries() {
            let value = behavior.p(a, b, x, y);
            if value < -NORMALIZATION_TOLERANCE || !value.is_finite() {
                return Err(ScenarioError::Negative { a, b, x, y, value });
            }
        }
        for x in 0..behavior.scenario.alice_settings() {
            for y in 0..behavior.scenario.bob_settings() {
                let sum = behavior.block(x, y).iter().sum::<f64>();
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    return Err(ScenarioError::NotNormalized { x, y, sum });
                }
            }
        }
        Ok(behavior)
    }

    /// Builds a behavior from a closure `p(a, b, x, y)`.
    pub fn from_fn(
        scenario: Scenario,
        p: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self, ScenarioError> {
        let table = scenario.entries().map(|(a, b, x, y)| p(a, b, x, y)).collect();
        Self::new(scenario, table)
    }

    /// `P(a,b|x,y) = 1/(outcomes_A(x) * outcomes_B(y))`.
    pub fn uniform(scenario: &Scenario) -> Self {
        let table = scenario
            .entries()
            .map(|(_, _, x, y)| 1.0 / (scenario.alice_outcomes(x) * scenario.bob_outcomes(y)) as f64)
            .collect();
        Self {
            scenario: scenario.clone(),
            table,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[self.scenario.index(a, b, x, y)]
    }

    /// Joint distribution for one setting pair, row-major in `(a, b)`.
    pub fn block(&self, x: usize, y: usize) -> &[f64] {
        let start = self.scenario.block_offset(x, y);
        let len = self.scenario.alice_outcomes(x) * self.scenario.bob_outcomes(y);
        &self.table[start..start + len]
    }

    /// The same behavior on a sub-scenario whose settings are a prefix of ours.
    pub fn restrict(&self, scenario: &Scenario) -> Result<Behavior, ScenarioError> {
        let fits = scenario.alice_settings() <= self.scenario.alice_settings()
            && scenario.bob_settings() <= self.scenario.bob_settings()
            && (0..scenario.alice_settings()).all(|x| scenario.alice_outcomes(x) == self.scenario.alice_outcomes(x))
            && (0..scenario.bob_settings()).all(|y| scenario.bob_outcomes(y) == self.scenario.bob_outcomes(y));
        if !fits {
            return Err(ScenarioError::ScenarioMismatch);
        }
        let table = scenario.entries().map(|(a, b, x, y)| self.p(a, b, x, y)).collect();
        Ok(Behavior {
            scenario: scenario.clone(),
            table,
        })
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Behavior, lambda: f64) -> Result<Behavior, ScenarioError> {
        if self.scenario != other.scenario {
            return Err(ScenarioError::ScenarioMismatch);
        }
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| lambda * p + (1.0 - lambda) * q)
            .collect();
        Ok(Behavior {
            scenario: self.scenario.clone(),
            table,
        })
    }

    /// `Σ_b P(a,b|x,y)` for a fixed partner setting `y`.
    pub fn alice_marginal_given(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.scenario.bob_outcomes(y)).map(|b| self.p(a, b, x, y)).sum()
    }

    /// `Σ_a P(a,b|x,y)` for a fixed partner setting `x`.
    pub fn bob_marginal_given(&self, b: usize, x: usize, y: usize) -> f64 {
        (0..self.scenario.alice_outcomes(x)).map(|a| self.p(a, b, x, y)).sum()
    }

    /// Largest no-signaling discrepancy, if any exceeds `tolerance`.
    ///
    /// The tolerance is relative to the marginal magnitude (floored at 1).
    pub fn signaling_violation(&self, tolerance: f64) -> Option<SignalingViolation> {
        let s = &self.scenario;
        let mut worst: Option<SignalingViolation> = None;
        let mut consider = |v: SignalingViolation, scale: f64| {
            if v.discrepancy > tolerance * scale.max(1.0)
                && worst.as_ref().is_none_or(|w| v.discrepancy > w.discrepancy)
            {
                worst = Some(v);
            }
        };
        for x in 0..s.alice_settings() {
            for a in 0..s.alice_outcomes(x) {
                let reference = self.alice_marginal_given(a, x, 0);
                for y in 1..s.bob_settings() {
                    let other = self.alice_marginal_given(a, x, y);
                    consider(
                        SignalingViolation {
                            party: 'A',
                            outcome: a,
                            setting: x,
                            partner_a: 0,
                            partner_b: y,
                            discrepancy: (reference - other).abs(),
                        },
                        reference.abs(),
                    );
                }
            }
        }
        for y in 0..s.bob_settings() {
            for b in 0..s.bob_outcomes(y) {
                let reference = self.bob_marginal_given(b, 0, y);
                for x in 1..s.alice_settings() {
                    let other = self.bob_marginal_given(b, x, y);
                    consider(
                        SignalingViolation {
                            party: 'B',
                            outcome: b,
                            setting: y,
                            partner_a: 0,
                            partner_b: x,
                            discrepancy: (reference - other).abs(),
                        },
                        reference.abs(),
                    );
                }
            }
        }
        worst
    }

    /// Marginals using the partner-setting-0 convention, after a no-signaling check.
    pub fn marginals(&self) -> Result<MarginalSet, ScenarioError> {
        self.marginals_with(DEFAULT_NO_SIGNALING_TOLERANCE, MarginalConvention::FirstPartnerSetting)
    }

    /// Marginals with explicit tolerance and convention.
    pub fn marginals_with(
        &self,
        tolerance: f64,
        convention: MarginalConvention,
    ) -> Result<MarginalSet, ScenarioError> {
        if let Some(v) = self.signaling_violation(tolerance) {
            return Err(v.into());
        }
        Ok(self.marginals_unchecked(convention))
    }

    /// Marginals without a no-signaling check (signaling raw data is common).
    pub fn marginals_unchecked(&self, convention: MarginalConvention) -> MarginalSet {
        let s = &self.scenario;
        let alice = (0..s.alice_settings())
            .map(|x| {
                (0..s.alice_outcomes(x))
                    .map(|a| match convention {
                        MarginalConvention::FirstPartnerSetting => self.alice_marginal_given(a, x, 0),
                        MarginalConvention::Average => {
                            (0..s.bob_settings())
                                .map(|y| self.alice_marginal_given(a, x, y))
                                .sum::<f64>()
                                / s.bob_settings() as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let bob = (0..s.bob_settings())
            .map(|y| {
                (0..s.bob_outcomes(y))
                    .map(|b| match convention {
                        MarginalConvention::FirstPartnerSetting => self.bob_marginal_given(b, 0, y),
                        MarginalConvention::Average => {
                            (0..s.alice_settings())
                                .map(|x| self.bob_marginal_given(b, x, y))
                                .sum::<f64>()
                                / s.alice_settings() as f64
                        }
                    })
                    .collect()
            })
            .collect();
        MarginalSet {
            convention,
            alice,
            bob,
        }
    }

    /// `C(x,y) = Σ (-1)^(a+b) P(a,b|x,y)`; binary measurements only.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64, ScenarioError> {
        self.scenario.check_settings(x, y)?;
        if !self.scenario.is_binary(x, y) {
            return Err(ScenarioError::NotBinary { x, y });
        }
        Ok(self.p(0, 0, x, y) - self.p(0, 1, x, y) - self.p(1, 0, x, y) + self.p(1, 1, x, y))
    }

    /// Shannon conditional entropy `H(A|B)` in bits for the pair `(x, y)`.
    pub fn conditional_entropy_ab(&self, x: usize, y: usize) -> Result<f64, ScenarioError> {
        self.scenario.check_settings(x, y)?;
        let oa = self.scenario.alice_outcomes(x);
        let ob = self.scenario.bob_outcomes(y);
        let block = self.block(x, y);
        let mut h = 0.0;
        for b in 0..ob {
            let pb: f64 = (0..oa).map(|a| block[a * ob + b]).sum();
            for a in 0..oa {
                let pab = block[a * ob + b];
                if pab > 0.0 && pb > 0.0 {
                    h -= pab * (pab / pb).log2();
                }
            }
        }
        Ok(h.max(0.0))
    }
}

/// Which partner setting a marginal is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MarginalConvention {
    /// `PA(a|x) = Σ_b P(a,b|x,0)`.
    #[default]
    FirstPartnerSetting,
    /// Average over all partner settings.
    Average,
}

/// Single-party marginals `PA(a|x)` and `PB(b|y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSet {
    pub convention: MarginalConvention,
    pub alice: Vec<Vec<f64>>,
    pub bob: Vec<Vec<f64>>,
}

impl MarginalSet {
    pub fn pa(&self, a: usize, x: usize) -> f64 {
        self.alice[x][a]
    }

    pub fn pb(&self, b: usize, y: usize) -> f64 {
        self.bob[y][b]
    }
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn listing10_pair(x: usize, y: usize, a: usize, b: usize) -> f64 {
        let same = 426_776_695.0 / 999_999_998.0;
        let diff = 73_223_304.0 / 999_999_998.0;
        let sign = if x == 1 && y == 1 { -1 } else { 1 };
        if (a == b) == (sign == 1) {
            same
        } else {
            diff
        }
    }

    #[test]
    fn scenario_rejects_single_outcome() {
        assert!(matches!(
            Scenario::new(vec![2, 1], vec![2]),
            Err(ScenarioError::TooFewOutcomes { party: 'A', setting: 1, .. })
        ));
        assert_eq!(Scenario::new(vec![], vec![2]), Err(ScenarioError::Empty));
    }

    #[test]
    fn derived_quantities() {
        let s = Scenario::new(vec![2, 3, 2], vec![4, 2]).unwrap();
        assert_eq!(s.alice_settings(), 3);
        assert_eq!(s.bob_settings(), 2);
        assert_eq!(s.alice_max_outcomes(), 3);
        assert_eq!(s.bob_max_outcomes(), 4);
        assert_eq!(s.table_len(), 2 * 6 + 3 * 6 + 2 * 6);
        let idx: Vec<_> = s.entries().map(|(a, b, x, y)| s.index(a, b, x, y)).collect();
        assert_eq!(idx, (0..s.table_len()).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_behaviors() {
        for (a, b, expected) in [
            (vec![2, 2], vec![2, 2], 0.25),
            (vec![2, 2, 2], vec![2, 2], 0.25),
            (vec![3], vec![2], 1.0 / 6.0),
        ] {
            let s = Scenario::new(a, b).unwrap();
            let u = Behavior::uniform(&s);
            assert!(u.table().iter().all(|&p| (p - expected).abs() < 1e-15));
        }
    }

    #[test]
    fn marginals_of_uniform_and_deterministic() {
        let s = Scenario::binary(2, 2);
        let m = Behavior::uniform(&s).marginals().unwrap();
        assert!(m.alice.iter().flatten().all(|&p| p == 0.5));
        let det = Behavior::from_fn(s, |a, b, _, _| if a == 0 && b == 0 { 1.0 } else { 0.0 }).unwrap();
        let m = det.marginals().unwrap();
        assert_eq!(m.pa(0, 0), 1.0);
        assert_eq!(m.pa(0, 1), 1.0);
    }

    #[test]
    fn listing10_marginal_and_correlator() {
        let s = Scenario::binary(2, 2);
        let p = Behavior::from_fn(s, |a, b, x, y| listing10_pair(x, y, a, b)).unwrap();
        let m = p.marginals().unwrap();
        assert_abs_diff_eq!(m.pa(0, 0), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(p.correlator(0, 0).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-8);
        assert_abs_diff_eq!(p.correlator(1, 1).unwrap(), -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-8);
    }

    #[test]
    fn correlator_extremes_and_errors() {
        let s = Scenario::binary(1, 1);
        assert_eq!(Behavior::uniform(&s).correlator(0, 0).unwrap(), 0.0);
        let corr = Behavior::from_fn(s.clone(), |a, b, _, _| if a == b { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(corr.correlator(0, 0).unwrap(), 1.0);
        let ternary = Scenario::new(vec![3], vec![2]).unwrap();
        assert_eq!(
            Behavior::uniform(&ternary).correlator(0, 0),
            Err(ScenarioError::NotBinary { x: 0, y: 0 })
        );
        assert!(matches!(corr.correlator(1, 0), Err(ScenarioError::SettingOutOfRange { .. })));
    }

    #[test]
    fn conditional_entropy_examples() {
        let s = Scenario::binary(1, 1);
        let corr = Behavior::from_fn(s.clone(), |a, b, _, _| if a == b { 0.5 } else { 0.0 }).unwrap();
        assert_abs_diff_eq!(corr.conditional_entropy_ab(0, 0).unwrap(), 0.0);
        assert_abs_diff_eq!(Behavior::uniform(&s).conditional_entropy_ab(0, 0).unwrap(), 1.0);
        // P(00)=P(11)=0.426776695, P(01)=P(10)=0.073223304 (normalized by their sum).
        let same = 0.426_776_695;
        let diff = 0.073_223_304;
        let z = 2.0 * (same + diff);
        let p = Behavior::from_fn(s, |a, b, _, _| if a == b { same / z } else { diff / z }).unwrap();
        let expected = binary_entropy(2.0 * diff / z);
        assert_abs_diff_eq!(p.conditional_entropy_ab(0, 0).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.600_876, epsilon = 1e-5);
    }

    #[test]
    fn signaling_is_reported() {
        let s = Scenario::binary(1, 2);
        // Alice's marginal depends on Bob's setting.
        let p = Behavior::from_fn(s, |a, b, _, y| match (y, a, b) {
            (0, 0, 0) => 1.0,
            (1, 1, 1) => 1.0,
            _ => 0.0,
        })
        .unwrap();
        let v = p.signaling_violation(1e-6).unwrap();
        assert_eq!(v.party, 'A');
        assert_abs_diff_eq!(v.discrepancy, 1.0);
        assert!(p.marginals().is_err());
        let avg = p.marginals_unchecked(MarginalConvention::Average);
        assert_abs_diff_eq!(avg.pa(0, 0), 0.5);
    }

    #[test]
    fn rejects_unnormalized() {
        let s = Scenario::binary(1, 1);
        assert!(matches!(
            Behavior::new(s.clone(), vec![0.5, 0.5, 0.5, 0.5]),
            Err(ScenarioError::NotNormalized { .. })
        ));
        assert!(matches!(
            Behavior::new(s, vec![1.5, -0.5, 0.0, 0.0]),
            Err(ScenarioError::Negative { .. })
        ));
    }

    #[test]
    fn extension_appends_binary_settings() {
        let s = Scenario::binary(2, 2).extended_to_include(0, 2);
        assert_eq!(s.b_config(), &[2, 2, 2]);
        assert_eq!(s.a_config(), &[2, 2]);
    }
}
