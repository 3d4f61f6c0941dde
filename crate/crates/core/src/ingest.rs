//! Data configurations, `.dat` click files and the counts they aggregate to.
//!
//! A data file holds one record per line: whitespace-separated integers with a
//! setting tag, a metadata flag, single clicks and coincidences. Column numbers
//! in the configuration are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{BellAtom, BellExpression, ExprError};
use crate::scenario::{Behavior, Scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("data config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: column {column} holds '{token}', expected a non-negative integer")]
    Token {
        file: String,
        line: usize,
        column: usize,
        token: String,
    },
    #[error("no accepted rows ({ignored} rows ignored by metadata, {unknown_tag} with unknown setting tags, {short} too short)")]
    NoRows { ignored: u64, unknown_tag: u64, short: u64 },
    #[error("setting pair ({x},{y}) has no coincidences")]
    EmptyPair { x: usize, y: usize },
    #[error("confidence {0} is not in (0,1)")]
    Confidence(f64),
    #[error("expression reads setting pair ({x},{y}) which the counts do not cover")]
    MissingPair { x: usize, y: usize },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Expression(#[from] ExprError),
}

fn config_err(msg: impl Into<String>) -> IngestError {
    IngestError::Config(msg.into())
}

/// Data configuration, field for field the JSON written by the reference GUI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(rename = "A_config")]
    pub a_config: Vec<usize>,
    #[serde(rename = "B_config")]
    pub b_config: Vec<usize>,
    #[serde(rename = "AO", default)]
    pub ao: usize,
    #[serde(rename = "BO", default)]
    pub bo: usize,
    #[serde(rename = "AS", default)]
    pub a_settings: usize,
    #[serde(rename = "BS", default)]
    pub b_settings: usize,
    /// Row tag for each setting pair, indexed `[x][y]`.
    pub settings_indices: Vec<Vec<i64>>,
    pub alice_clicks_column: Vec<usize>,
    pub bob_clicks_column: Vec<usize>,
    /// Coincidence column for each outcome pair, indexed `[a][b]`.
    pub alice_bob_clicks_column: Vec<Vec<usize>>,
    pub time_per_line: f64,
    pub setting_column_number: usize,
    pub meta_data_column_number: usize,
    pub meta_data_column_value: i64,
    pub directory_with_datafiles: String,
    #[serde(default)]
    pub setup_nickname: String,
    #[serde(default)]
    pub human_description: String,
    #[serde(default = "empty_object")]
    pub additional_data_dict: serde_json::Value,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

/// Parses and validates a data configuration; derived sizes are filled in when absent.
pub fn parse_data_config(json: &str) -> Result<DataConfig, IngestError> {
    let mut config: DataConfig = serde_json::from_str(json).map_err(|e| config_err(e.to_string()))?;
    config.normalize()?;
    Ok(config)
}

impl DataConfig {
    pub fn scenario(&self) -> Result<Scenario, IngestError> {
        Ok(Scenario::new(self.a_config.clone(), self.b_config.clone())?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("data config serializes")
    }

    fn normalize(&mut self) -> Result<(), IngestError> {
        let scenario = self.scenario()?;
        let derived = [
            ("AO", &mut self.ao, scenario.alice_max_outcomes()),
            ("BO", &mut self.bo, scenario.bob_max_outcomes()),
            ("AS", &mut self.a_settings, scenario.alice_settings()),
            ("BS", &mut self.b_settings, scenario.bob_settings()),
        ];
        for (name, slot, value) in derived {
            if *slot == 0 {
                *slot = value;
            } else if *slot != value {
                return Err(config_err(format!("{name} = {slot} but the configs give {value}")));
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let scenario = self.scenario()?;
        let (as_, bs) = (scenario.alice_settings(), scenario.bob_settings());
        if self.settings_indices.len() != as_ || self.settings_indices.iter().any(|r| r.len() != bs) {
            return Err(config_err(format!("settings_indices must be {as_}x{bs}")));
        }
        let mut tags = BTreeSet::new();
        for &t in self.settings_indices.iter().flatten() {
            if t <= 0 {
                return Err(config_err(format!("setting tag {t} is not positive")));
            }
            if !tags.insert(t) {
                return Err(config_err(format!("setting tag {t} appears twice in settings_indices")));
            }
        }
        let (ao, bo) = (scenario.alice_max_outcomes(), scenario.bob_max_outcomes());
        if self.alice_clicks_column.len() != ao {
            return Err(config_err(format!("alice_clicks_column needs {ao} columns")));
        }
        if self.bob_clicks_column.len() != bo {
            return Err(config_err(format!("bob_clicks_column needs {bo} columns")));
        }
        if self.alice_bob_clicks_column.len() != ao || self.alice_bob_clicks_column.iter().any(|r| r.len() != bo) {
            return Err(config_err(format!("alice_bob_clicks_column must be {ao}x{bo}")));
        }
        let mut seen = BTreeSet::new();
        let columns = [self.setting_column_number, self.meta_data_column_number]
            .into_iter()
            .chain(self.alice_clicks_column.iter().copied())
            .chain(self.bob_clicks_column.iter().copied())
            .chain(self.alice_bob_clicks_column.iter().flatten().copied());
        for c in columns {
            if c == 0 {
                return Err(config_err("column numbers start from 1"));
            }
            if !seen.insert(c) {
                return Err(config_err(format!("column {c} is used twice")));
            }
        }
        if !(self.time_per_line > 0.0 && self.time_per_line.is_finite()) {
            return Err(config_err(format!("time_per_line = {} must be positive", self.time_per_line)));
        }
        Ok(())
    }

    fn widest_column(&self) -> usize {
        [self.setting_column_number, self.meta_data_column_number]
            .into_iter()
            .chain(self.alice_clicks_column.iter().copied())
            .chain(self.bob_clicks_column.iter().copied())
            .chain(self.alice_bob_clicks_column.iter().flatten().copied())
            .max()
            .unwrap_or(0)
    }

    fn tag_map(&self) -> BTreeMap<i64, (usize, usize)> {
        let mut m = BTreeMap::new();
        for (x, row) in self.settings_indices.iter().enumerate() {
            for (y, &t) in row.iter().enumerate() {
                m.insert(t, (x, y));
            }
        }
        m
    }
}

/// Click totals of one setting pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub alice_clicks: Vec<u64>,
    pub bob_clicks: Vec<u64>,
    /// `[a][b]`.
    pub coincidences: Vec<Vec<u64>>,
    pub rows: u64,
}

impl PairCounts {
    fn zero(ao: usize, bo: usize) -> Self {
        Self {
            alice_clicks: vec![0; ao],
            bob_clicks: vec![0; bo],
            coincidences: vec![vec![0; bo]; ao],
            rows: 0,
        }
    }

    pub fn total_coincidences(&self) -> u64 {
        self.coincidences.iter().flatten().sum()
    }

    fn add(&mut self, other: &PairCounts) {
        for (l, r) in self.alice_clicks.iter_mut().zip(&other.alice_clicks) {
            *l += r;
        }
        for (l, r) in self.bob_clicks.iter_mut().zip(&other.bob_clicks) {
            *l += r;
        }
        for (lr, rr) in self.coincidences.iter_mut().zip(&other.coincidences) {
            for (l, r) in lr.iter_mut().zip(rr) {
                *l += r;
            }
        }
        self.rows += other.rows;
    }
}

/// Why rows did not contribute.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: Vec<String>,
    pub accepted_rows: u64,
    pub ignored_metadata: u64,
    pub unknown_tag: u64,
    pub short_rows: u64,
    pub warnings: Vec<String>,
}

/// Summed counts per setting pair; merging is associative and commutative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedCounts {
    pub scenario: Scenario,
    pub time_per_line: f64,
    /// Indexed `x * BS + y`.
    pub pairs: Vec<PairCounts>,
    pub report: IngestReport,
}

impl AggregatedCounts {
    pub fn empty(config: &DataConfig) -> Result<Self, IngestError> {
        let scenario = config.scenario()?;
        let (ao, bo) = (scenario.alice_max_outcomes(), scenario.bob_max_outcomes());
        let n = scenario.alice_settings() * scenario.bob_settings();
        Ok(Self {
            scenario,
            time_per_line: config.time_per_line,
            pairs: vec![PairCounts::zero(ao, bo); n],
            report: IngestReport::default(),
        })
    }

    pub fn pair(&self, x: usize, y: usize) -> &PairCounts {
        &self.pairs[x * self.scenario.bob_settings() + y]
    }

    pub fn total_time(&self, x: usize, y: usize) -> f64 {
        self.time_per_line * self.pair(x, y).rows as f64
    }

    /// Adds `other` into `self`; the report lists are concatenated.
    pub fn merge(&mut self, other: &AggregatedCounts) -> Result<(), IngestError> {
        if self.scenario != other.scenario || self.time_per_line != other.time_per_line {
            return Err(config_err("cannot merge counts from different configurations"));
        }
        for (l, r) in self.pairs.iter_mut().zip(&other.pairs) {
            l.add(r);
        }
        let rep = &mut self.report;
        rep.files.extend(other.report.files.iter().cloned());
        rep.accepted_rows += other.report.accepted_rows;
        rep.ignored_metadata += other.report.ignored_metadata;
        rep.unknown_tag += other.report.unknown_tag;
        rep.short_rows += other.report.short_rows;
        rep.warnings.extend(other.report.warnings.iter().cloned());
        Ok(())
    }

    pub fn accepted_rows(&self) -> u64 {
        self.pairs.iter().map(|p| p.rows).sum()
    }

    /// Normalized coincidences per setting pair.
    pub fn behavior(&self) -> Result<Behavior, IngestError> {
        if self.accepted_rows() == 0 {
            return Err(IngestError::NoRows {
                ignored: self.report.ignored_metadata,
                unknown_tag: self.report.unknown_tag,
                short: self.report.short_rows,
            });
        }
        let s = &self.scenario;
        for x in 0..s.alice_settings() {
            for y in 0..s.bob_settings() {
                if self.pair(x, y).total_coincidences() == 0 {
                    return Err(IngestError::EmptyPair { x, y });
                }
            }
        }
        let table = s
            .entries()
            .map(|(a, b, x, y)| {
                let p = self.pair(x, y);
                p.coincidences[a][b] as f64 / p.total_coincidences() as f64
            })
            .collect();
        Ok(Behavior::new(s.clone(), table)?)
    }

    /// Alice's single clicks over the accepted time.
    pub fn events_per_second(&self) -> f64 {
        let s = &self.scenario;
        let mut clicks = 0u64;
        let mut time = 0.0;
        for x in 0..s.alice_settings() {
            for y in 0..s.bob_settings() {
                let p = self.pair(x, y);
                clicks += p.alice_clicks.iter().take(s.alice_outcomes(x)).sum::<u64>();
                time += self.total_time(x, y);
            }
        }
        if time > 0.0 {
            clicks as f64 / time
        } else {
            0.0
        }
    }
}

/// `(behavior, events per second)` from counts.
pub fn counts_to_behavior(counts: &AggregatedCounts) -> Result<(Behavior, f64), IngestError> {
    Ok((counts.behavior()?, counts.events_per_second()))
}

fn parse_u64(token: &str, file: &str, line: usize, column: usize) -> Result<u64, IngestError> {
    token.parse().map_err(|_| IngestError::Token {
        file: file.to_string(),
        line,
        column,
        token: token.to_string(),
    })
}

fn parse_i64(token: &str, file: &str, line: usize, column: usize) -> Result<i64, IngestError> {
    token.parse().map_err(|_| IngestError::Token {
        file: file.to_string(),
        line,
        column,
        token: token.to_string(),
    })
}

/// Counts from the text of one data file. Blank lines are skipped.
pub fn parse_data_text(config: &DataConfig, file: &str, text: &str) -> Result<AggregatedCounts, IngestError> {
    let mut counts = AggregatedCounts::empty(config)?;
    let tags = config.tag_map();
    let width = config.widest_column();
    let scenario = counts.scenario.clone();
    counts.report.files.push(file.to_string());
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() < width {
            counts.report.short_rows += 1;
            counts
                .report
                .warnings
                .push(format!("{file}:{line}: {} columns, need {width}; row skipped", tokens.len()));
            continue;
        }
        let col = |c: usize| tokens[c - 1];
        let meta = parse_i64(col(config.meta_data_column_number), file, line, config.meta_data_column_number)?;
        if meta != config.meta_data_column_value {
            counts.report.ignored_metadata += 1;
            continue;
        }
        let tag = parse_i64(col(config.setting_column_number), file, line, config.setting_column_number)?;
        let Some(&(x, y)) = tags.get(&tag) else {
            counts.report.unknown_tag += 1;
            counts
                .report
                .warnings
                .push(format!("{file}:{line}: unknown setting tag {tag}; row skipped"));
            continue;
        };
        let mut row = PairCounts::zero(scenario.alice_max_outcomes(), scenario.bob_max_outcomes());
        for a in 0..scenario.alice_outcomes(x) {
            let c = config.alice_clicks_column[a];
            row.alice_clicks[a] = parse_u64(col(c), file, line, c)?;
        }
        for b in 0..scenario.bob_outcomes(y) {
            let c = config.bob_clicks_column[b];
            row.bob_clicks[b] = parse_u64(col(c), file, line, c)?;
        }
        for a in 0..scenario.alice_outcomes(x) {
            for b in 0..scenario.bob_outcomes(y) {
                let c = config.alice_bob_clicks_column[a][b];
                row.coincidences[a][b] = parse_u64(col(c), file, line, c)?;
            }
        }
        row.rows = 1;
        counts.pairs[x * scenario.bob_settings() + y].add(&row);
        counts.report.accepted_rows += 1;
    }
    Ok(counts)
}

/// `.dat` files of `dir` in lexicographic order.
pub fn data_files(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let io = |source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "dat") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Parses every `.dat` file in `dir` and sums the counts.
pub fn parse_data_dir(config: &DataConfig, dir: &Path) -> Result<AggregatedCounts, IngestError> {
    let mut total = AggregatedCounts::empty(config)?;
    for path in data_files(dir)? {
        let text = fs::read_to_string(&path).map_err(|source| IngestError::Io {
            path: path.clone(),
            source,
        })?;
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        total.merge(&parse_data_text(config, &name, &text)?)?;
    }
    for w in &total.report.warnings {
        log::warn!("{w}");
    }
    if total.accepted_rows() == 0 {
        return Err(IngestError::NoRows {
            ignored: total.report.ignored_metadata,
            unknown_tag: total.report.unknown_tag,
            short: total.report.short_rows,
        });
    }
    Ok(total)
}

/// Parses the files in the configured directory.
pub fn parse_data_files(config: &DataConfig) -> Result<AggregatedCounts, IngestError> {
    parse_data_dir(config, Path::new(&config.directory_with_datafiles))
}

/// Value of `expr` on the counts and a Hoeffding half-width at `confidence`.
///
/// Each of the `m` atoms gets failure probability `(1 - confidence) / m`:
/// `Σ_k |c_k| span_k sqrt(ln(2m / (1 - confidence)) / (2 N_k))`.
pub fn expression_value_with_error(
    expr: &BellExpression,
    counts: &AggregatedCounts,
    confidence: f64,
) -> Result<(f64, f64), IngestError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(IngestError::Confidence(confidence));
    }
    let atoms: Vec<&(f64, BellAtom)> = expr.terms().iter().filter(|(_, a)| *a != BellAtom::Constant).collect();
    if atoms.is_empty() {
        return Ok((expr.constant(), 0.0));
    }
    let s = &counts.scenario;
    for &(x, y) in &expr.setting_pairs() {
        if x >= s.alice_settings() || y >= s.bob_settings() {
            return Err(IngestError::MissingPair { x, y });
        }
    }
    let behavior = counts.behavior()?;
    let value = expr.with_scenario(s)?.evaluate(&behavior)?;
    let m = atoms.len() as f64;
    let log_term = (2.0 * m / (1.0 - confidence)).ln();
    let half_width = atoms
        .iter()
        .map(|(c, atom)| {
            let (x, y) = atom.setting_pair().expect("non-constant atom");
            let n = counts.pair(x, y).total_coincidences() as f64;
            c.abs() * atom.span() * (log_term / (2.0 * n)).sqrt()
        })
        .sum();
    Ok((value, half_width))
}

/// An expression evaluated on the counts, with its error bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionStat {
    pub expression: String,
    pub value: f64,
    pub half_width: f64,
    pub confidence: f64,
}

/// Parsed experimental data: configuration, counts and what they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EberData {
    pub config: DataConfig,
    pub counts: AggregatedCounts,
    pub behavior: Behavior,
    pub events_per_second: f64,
    #[serde(default)]
    pub expressions: Vec<ExpressionStat>,
}

impl EberData {
    pub fn new(config: DataConfig, counts: AggregatedCounts) -> Result<Self, IngestError> {
        let (behavior, events_per_second) = counts_to_behavior(&counts)?;
        Ok(Self {
            config,
            counts,
            behavior,
            events_per_second,
            expressions: Vec::new(),
        })
    }

    /// Evaluates `text` on the counts and records it.
    pub fn add_expression(&mut self, text: &str, confidence: f64) -> Result<&ExpressionStat, IngestError> {
        let expr = BellExpression::parse(text, &self.counts.scenario)?;
        let (value, half_width) = expression_value_with_error(&expr, &self.counts, confidence)?;
        self.expressions.push(ExpressionStat {
            expression: text.to_string(),
            value,
            half_width,
            confidence,
        });
        Ok(self.expressions.last().expect("just pushed"))
    }
}
