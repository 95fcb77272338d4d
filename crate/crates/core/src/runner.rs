//! Step binding and scenario execution over the broker.
//!
//! Steps bind through a canonical grammar first. Text that misses the
//! grammar is looked up in an alias table (data, not code) mapping known
//! natural phrasings onto canonical forms. Scenarios execute on a fresh
//! broker each, entirely in virtual time.
//!
//! Canonical step grammar:
//!
//! ```text
//! <path> is <literal>                     given/when: set, then: assert
//! <path> is set to <literal>              set
//! <path> is reset to <literal>            assert
//! after <duration>                        advance
//! no acknowledgment within <duration> of <context>    advance(duration)
//! acknowledges within <duration> of <context>         delayed acknowledgment
//! ```
//!
//! Durations are `<N> seconds` or `<N> minutes` (singular accepted).

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::broker::Broker;
use crate::cpds::CpdsError;
use crate::gherkin::{self, Feature, Scenario, Step, StepKind};
use crate::value::Value;
use crate::vss_catalog::Catalog;

pub const DEFAULT_ACK_PATH: &str = "Vehicle.Cabin.ChildPresenceDetection.HasDriverAcknowledged";
pub const DEFAULT_ACK_DELAY: u64 = 60;

// ---------------------------------------------------------------------------
// Alias table
// ---------------------------------------------------------------------------

/// Phrase-to-canonical-form table consulted when the grammar misses.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    entries: BTreeMap<String, String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RunnerError {
    #[error("line {line}: malformed alias line (expected `phrase => canonical`)")]
    MalformedAlias { line: usize },
    #[error("script line {line}: {reason}")]
    ScriptParse { line: usize, reason: String },
}

impl AliasTable {
    pub fn parse(text: &str) -> Result<AliasTable, RunnerError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((phrase, canonical)) = line.split_once("=>") else {
                return Err(RunnerError::MalformedAlias { line: idx + 1 });
            };
            entries.insert(phrase.trim().to_string(), canonical.trim().to_string());
        }
        Ok(AliasTable { entries })
    }

    /// The table shipped with the repository.
    pub fn shipped() -> AliasTable {
        AliasTable::parse(crate::assets::STEP_ALIASES).expect("shipped alias table parses")
    }

    pub fn resolve(&self, phrase: &str) -> Option<&str> {
        self.entries.get(phrase).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Binding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum BoundAction {
    SetSignal { path: String, value: Value },
    AssertSignal { path: String, expected: Value },
    AdvanceTime { seconds: u64 },
    DelayedSet { path: String, value: Value, delay: u64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum BindError {
    #[error("unbound step: `{text}`")]
    UnboundStep { text: String },
    #[error("unknown path `{path}`")]
    UnknownPath { path: String },
    #[error("type mismatch for `{path}`: expected {expected}, got `{got}`")]
    TypeMismatch { path: String, expected: String, got: String },
}

/// Resolves step text to broker actions against one catalog.
#[derive(Clone)]
pub struct Binder {
    pub catalog: Arc<Catalog>,
    pub aliases: AliasTable,
    /// Path set by acknowledgment steps.
    pub ack_path: String,
    /// Simulated delay before a delayed acknowledgment, in seconds.
    pub ack_delay: u64,
}

impl Binder {
    pub fn new(catalog: Arc<Catalog>) -> Binder {
        Binder {
            catalog,
            aliases: AliasTable::shipped(),
            ack_path: DEFAULT_ACK_PATH.to_string(),
            ack_delay: DEFAULT_ACK_DELAY,
        }
    }

    /// Bind a step to an action. Returns the action and the canonical text
    /// it was bound from (the original text, or its alias resolution).
    pub fn bind_step(&self, step: &Step) -> Result<(BoundAction, String), BindError> {
        if let Some(action) = self.try_grammar(step.kind, &step.text)? {
            return Ok((action, step.text.clone()));
        }
        if let Some(canonical) = self.aliases.resolve(&step.text) {
            if let Some(action) = self.try_grammar(step.kind, canonical)? {
                return Ok((action, canonical.to_string()));
            }
        }
        Err(BindError::UnboundStep { text: step.text.clone() })
    }

    fn try_grammar(&self, kind: StepKind, text: &str) -> Result<Option<BoundAction>, BindError> {
        if let Some((head, rest)) = text.split_once(' ') {
            if path_like(head) {
                if let Some(lit) = rest.strip_prefix("is set to ") {
                    return self.signal_action(head, lit, false).map(Some);
                }
                if let Some(lit) = rest.strip_prefix("is reset to ") {
                    return self.signal_action(head, lit, true).map(Some);
                }
                if let Some(lit) = rest.strip_prefix("is ") {
                    return self.signal_action(head, lit, kind == StepKind::Then).map(Some);
                }
                return Ok(None);
            }
        }
        if let Some(rest) = text.strip_prefix("after ") {
            if let Some(seconds) = parse_duration(rest) {
                return Ok(Some(BoundAction::AdvanceTime { seconds }));
            }
            return Ok(None);
        }
        if let Some(rest) = text.strip_prefix("no acknowledgment within ") {
            if let Some((duration, context)) = rest.split_once(" of ") {
                if !context.trim().is_empty() {
                    if let Some(seconds) = parse_duration(duration) {
                        return Ok(Some(BoundAction::AdvanceTime { seconds }));
                    }
                }
            }
            return Ok(None);
        }
        if let Some(rest) = text.strip_prefix("acknowledges within ") {
            if let Some((duration, context)) = rest.split_once(" of ") {
                if !context.trim().is_empty() && parse_duration(duration).is_some() {
                    return Ok(Some(BoundAction::DelayedSet {
                        path: self.ack_path.clone(),
                        value: Value::Bool(true),
                        delay: self.ack_delay,
                    }));
                }
            }
            return Ok(None);
        }
        Ok(None)
    }

    fn signal_action(&self, path: &str, literal: &str, assert: bool) -> Result<BoundAction, BindError> {
        let node = match self.catalog.resolve(path) {
            Ok(node) if node.is_leaf() => node,
            _ => return Err(BindError::UnknownPath { path: path.to_string() }),
        };
        let datatype = node.datatype.expect("leaf carries datatype");
        let value = Value::parse_as(datatype, literal).ok_or_else(|| BindError::TypeMismatch {
            path: path.to_string(),
            expected: datatype.as_str().to_string(),
            got: literal.to_string(),
        })?;
        Ok(if assert {
            BoundAction::AssertSignal { path: path.to_string(), expected: value }
        } else {
            BoundAction::SetSignal { path: path.to_string(), value }
        })
    }
}

/// Step paths are dotted identifiers with at least two segments.
fn path_like(s: &str) -> bool {
    s.contains('.')
        && s.split('.').all(|seg| {
            let mut chars = seg.chars();
            match chars.next() {
                Some(c) if c.is_ascii_alphabetic() => chars.all(|c| c.is_ascii_alphanumeric()),
                _ => false,
            }
        })
}

/// Parse `<N> seconds` / `<N> minutes` (singular accepted) into seconds.
pub fn parse_duration(text: &str) -> Option<u64> {
    let (n, unit) = text.trim().split_once(' ')?;
    let n: u64 = n.parse().ok()?;
    match unit.trim() {
        "second" | "seconds" => Some(n),
        "minute" | "minutes" => Some(n * 60),
        _ => None,
    }
}

/// Render a duration the way generated steps phrase it: whole minutes when
/// divisible by sixty, seconds otherwise.
pub fn format_duration(seconds: u64) -> String {
    if seconds % 60 == 0 && seconds > 0 {
        let minutes = seconds / 60;
        format!("{minutes} minute{}", if minutes == 1 { "" } else { "s" })
    } else {
        format!("{seconds} second{}", if seconds == 1 { "" } else { "s" })
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Passed,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub kind: StepKind,
    /// Canonical text the step was bound from.
    pub text: String,
    pub req_tags: Vec<String>,
    pub outcome: Outcome,
    pub detail: String,
    /// Virtual time when the step finished.
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub steps: Vec<StepResult>,
    pub verdict: Verdict,
    /// Virtual seconds this scenario consumed.
    pub virtual_seconds: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReqVerdict {
    Passed,
    Failed,
    Untested,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub feature: String,
    pub scenarios: Vec<ScenarioReport>,
    pub requirements: BTreeMap<String, ReqVerdict>,
    pub started_at_virtual: u64,
    pub total_virtual_seconds: u64,
    /// Wall-clock metadata; excluded from determinism comparisons.
    pub wall_clock_ms: u64,
}

impl TestReport {
    /// Copy with wall-clock metadata cleared, for determinism checks.
    pub fn normalized(&self) -> TestReport {
        TestReport { wall_clock_ms: 0, ..self.clone() }
    }

    pub fn all_passed(&self) -> bool {
        self.scenarios.iter().all(|s| s.verdict == Verdict::Passed)
    }

    pub fn any_error(&self) -> bool {
        self.scenarios.iter().any(|s| s.verdict == Verdict::Error)
    }

    pub fn any_failed(&self) -> bool {
        self.scenarios.iter().any(|s| s.verdict == Verdict::Failed)
    }
}

/// Execute one scenario on a broker that already hosts the system under
/// test. Failed asserts do not stop the scenario; errors do.
pub fn run_scenario(scenario: &Scenario, broker: &mut Broker, binder: &Binder) -> ScenarioReport {
    let mut steps = Vec::new();
    let mut errored = false;
    for step in &scenario.steps {
        if errored {
            steps.push(StepResult {
                kind: step.kind,
                text: step.text.clone(),
                req_tags: step.req_tags.clone(),
                outcome: Outcome::Error,
                detail: "not executed: an earlier step errored".to_string(),
                at: broker.now(),
            });
            continue;
        }
        let (outcome, detail, text) = match binder.bind_step(step) {
            Err(e) => (Outcome::Error, e.to_string(), step.text.clone()),
            Ok((action, canonical)) => {
                let (outcome, detail) = execute(broker, &action);
                (outcome, detail, canonical)
            }
        };
        if outcome == Outcome::Error {
            errored = true;
        }
        steps.push(StepResult {
            kind: step.kind,
            text,
            req_tags: step.req_tags.clone(),
            outcome,
            detail,
            at: broker.now(),
        });
    }
    let verdict = if steps.iter().any(|s| s.outcome == Outcome::Error) {
        Verdict::Error
    } else if steps.iter().any(|s| s.outcome == Outcome::Failed) {
        Verdict::Failed
    } else {
        Verdict::Passed
    };
    ScenarioReport { name: scenario.name.clone(), steps, verdict, virtual_seconds: broker.now() }
}

fn execute(broker: &mut Broker, action: &BoundAction) -> (Outcome, String) {
    match action {
        BoundAction::SetSignal { path, value } => match broker.set(path, value.clone()) {
            Ok(_) => (Outcome::Passed, format!("set {path} = {value}")),
            Err(e) => (Outcome::Error, e.to_string()),
        },
        BoundAction::AdvanceTime { seconds } => {
            broker.advance(*seconds);
            (Outcome::Passed, format!("advanced {seconds} s"))
        }
        BoundAction::DelayedSet { path, value, delay } => {
            broker.advance(*delay);
            match broker.set(path, value.clone()) {
                Ok(_) => (Outcome::Passed, format!("advanced {delay} s, then set {path} = {value}")),
                Err(e) => (Outcome::Error, e.to_string()),
            }
        }
        BoundAction::AssertSignal { path, expected } => match broker.get(path) {
            Ok(actual) if actual == *expected => (Outcome::Passed, format!("{path} == {expected}")),
            Ok(actual) => (
                Outcome::Failed,
                format!("{path}: expected {expected}, actual {actual}"),
            ),
            Err(e) => (Outcome::Error, e.to_string()),
        },
    }
}

/// Per-run execution settings.
#[derive(Clone)]
pub struct RunnerConfig {
    pub aliases: AliasTable,
    pub ack_path: String,
    pub ack_delay: u64,
    /// Scenario-level parallelism: 1 = sequential, 0 = one worker per core.
    pub jobs: usize,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            aliases: AliasTable::shipped(),
            ack_path: DEFAULT_ACK_PATH.to_string(),
            ack_delay: DEFAULT_ACK_DELAY,
            jobs: 1,
        }
    }
}

/// Factory that installs the system under test on a fresh broker.
pub type SutFactory<'a> = &'a (dyn Fn(&mut Broker) -> Result<(), CpdsError> + Sync);

fn run_one(
    scenario: &Scenario,
    catalog: &Arc<Catalog>,
    binder: &Binder,
    sut_factory: SutFactory<'_>,
) -> ScenarioReport {
    let mut broker = Broker::new(Arc::clone(catalog));
    if let Err(e) = sut_factory(&mut broker) {
        let steps = scenario
            .steps
            .iter()
            .map(|step| StepResult {
                kind: step.kind,
                text: step.text.clone(),
                req_tags: step.req_tags.clone(),
                outcome: Outcome::Error,
                detail: format!("environment setup failed: {e}"),
                at: 0,
            })
            .collect();
        return ScenarioReport {
            name: scenario.name.clone(),
            steps,
            verdict: Verdict::Error,
            virtual_seconds: 0,
        };
    }
    run_scenario(scenario, &mut broker, binder)
}

/// Run every scenario of a feature, each on a fresh broker with a freshly
/// attached system under test. Results keep document order regardless of
/// scheduling.
pub fn run_feature(
    feature: &Feature,
    catalog: &Arc<Catalog>,
    config: &RunnerConfig,
    sut_factory: SutFactory<'_>,
) -> TestReport {
    let wall_start = Instant::now();
    let binder = Binder {
        catalog: Arc::clone(catalog),
        aliases: config.aliases.clone(),
        ack_path: config.ack_path.clone(),
        ack_delay: config.ack_delay,
    };

    let scenarios = run_all(feature, catalog, &binder, config, sut_factory);

    let trace = gherkin::requirement_trace(feature);
    let mut requirements = BTreeMap::new();
    for (id, occurrences) in trace {
        let outcomes: Vec<Outcome> = occurrences
            .iter()
            .map(|(s, i)| scenarios[*s].steps[*i].outcome)
            .collect();
        let verdict = if outcomes.contains(&Outcome::Failed) {
            ReqVerdict::Failed
        } else if outcomes.iter().all(|o| *o == Outcome::Passed) {
            ReqVerdict::Passed
        } else {
            ReqVerdict::Untested
        };
        requirements.insert(id, verdict);
    }

    let total_virtual_seconds = scenarios.iter().map(|s| s.virtual_seconds).sum();
    TestReport {
        feature: feature.name.clone(),
        scenarios,
        requirements,
        started_at_virtual: 0,
        total_virtual_seconds,
        wall_clock_ms: wall_start.elapsed().as_millis() as u64,
    }
}

#[cfg(feature = "parallel")]
fn run_all(
    feature: &Feature,
    catalog: &Arc<Catalog>,
    binder: &Binder,
    config: &RunnerConfig,
    sut_factory: SutFactory<'_>,
) -> Vec<ScenarioReport> {
    use rayon::prelude::*;
    if config.jobs == 1 || feature.scenarios.len() < 2 {
        return feature
            .scenarios
            .iter()
            .map(|s| run_one(s, catalog, binder, sut_factory))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .expect("thread pool");
    pool.install(|| {
        feature
            .scenarios
            .par_iter()
            .map(|s| run_one(s, catalog, binder, sut_factory))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_all(
    feature: &Feature,
    catalog: &Arc<Catalog>,
    binder: &Binder,
    _config: &RunnerConfig,
    sut_factory: SutFactory<'_>,
) -> Vec<ScenarioReport> {
    feature
        .scenarios
        .iter()
        .map(|s| run_one(s, catalog, binder, sut_factory))
        .collect()
}

// ---------------------------------------------------------------------------
// Declarative runner scripts
// ---------------------------------------------------------------------------

/// Parse the declarative script format back into a feature:
///
/// ```text
/// feature "<name>"
/// scenario "<name>"
///   given <canonical step text> [tags]
///   when  ...
///   then  ...
/// ```
pub fn parse_script(text: &str) -> Result<Feature, RunnerError> {
    let mut name = gherkin::UNNAMED_FEATURE.to_string();
    let mut scenarios: Vec<Scenario> = Vec::new();
    let mut current: Option<Scenario> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| RunnerError::ScriptParse { line: line_no, reason: reason.to_string() };

        if let Some(rest) = line.strip_prefix("feature ") {
            name = unquote(rest).ok_or_else(|| err("expected quoted feature name"))?;
            continue;
        }
        if let Some(rest) = line.strip_prefix("scenario ") {
            if let Some(done) = current.take() {
                scenarios.push(done);
            }
            let scenario_name = unquote(rest).ok_or_else(|| err("expected quoted scenario name"))?;
            current = Some(Scenario { name: scenario_name, steps: Vec::new() });
            continue;
        }
        let Some((kind_word, body)) = line.split_once(' ') else {
            return Err(err("expected `given|when|then <step>`"));
        };
        let (kind, keyword) = match kind_word {
            "given" => (StepKind::Given, gherkin::Keyword::Given),
            "when" => (StepKind::When, gherkin::Keyword::When),
            "then" => (StepKind::Then, gherkin::Keyword::Then),
            _ => return Err(err("expected `given`, `when` or `then`")),
        };
        let Some(scenario) = current.as_mut() else {
            return Err(err("step outside a scenario block"));
        };
        let (step_text, req_tags) = gherkin::split_tags(body);
        scenario.steps.push(Step { keyword_literal: keyword, kind, text: step_text, req_tags });
    }
    if let Some(done) = current.take() {
        scenarios.push(done);
    }
    Ok(Feature { name, scenarios })
}

fn unquote(text: &str) -> Option<String> {
    let text = text.trim();
    if text.len() >= 2 && text.starts_with('"') && text.ends_with('"') {
        Some(text[1..text.len() - 1].to_string())
    } else {
        None
    }
}

/// Execute a declarative script; equivalent to running the feature it
/// encodes in-process.
pub fn run_script(
    script: &str,
    catalog: &Arc<Catalog>,
    config: &RunnerConfig,
    sut_factory: SutFactory<'_>,
) -> Result<TestReport, RunnerError> {
    let feature = parse_script(script)?;
    Ok(run_feature(&feature, catalog, config, sut_factory))
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

/// Human-readable console report with one PASS/FAIL/ERROR line per step.
pub fn render_human(report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("Feature: {}\n", report.feature));
    for scenario in &report.scenarios {
        let tag = match scenario.verdict {
            Verdict::Passed => "PASS",
            Verdict::Failed => "FAIL",
            Verdict::Error => "ERROR",
        };
        out.push_str(&format!("  {tag} Scenario: {}\n", scenario.name));
        for step in &scenario.steps {
            let tag = match step.outcome {
                Outcome::Passed => "PASS ",
                Outcome::Failed => "FAIL ",
                Outcome::Error => "ERROR",
            };
            out.push_str(&format!(
                "    {tag} {} {} (t={}): {}\n",
                step.kind.as_str(),
                step.text,
                step.at,
                step.detail
            ));
        }
    }
    if !report.requirements.is_empty() {
        out.push_str("Requirements:\n");
        for (id, verdict) in &report.requirements {
            let word = match verdict {
                ReqVerdict::Passed => "passed",
                ReqVerdict::Failed => "failed",
                ReqVerdict::Untested => "untested",
            };
            out.push_str(&format!("  {id}: {word}\n"));
        }
    }
    let passed = report.scenarios.iter().filter(|s| s.verdict == Verdict::Passed).count();
    let failed = report.scenarios.iter().filter(|s| s.verdict == Verdict::Failed).count();
    let errors = report.scenarios.iter().filter(|s| s.verdict == Verdict::Error).count();
    out.push_str(&format!(
        "Summary: {} scenario(s), {passed} passed, {failed} failed, {errors} error(s); {} virtual second(s)\n",
        report.scenarios.len(),
        report.total_virtual_seconds
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpds::{Cpds, CpdsVariant};
    use crate::gherkin::parse_feature;
    use crate::test_support;

    const CHILD: &str = "Vehicle.Cabin.ChildPresenceDetection.IsChildDetected";

    fn binder() -> Binder {
        Binder::new(test_support::shipped_catalog_arc())
    }

    fn step(kind: StepKind, text: &str) -> Step {
        Step {
            keyword_literal: gherkin::Keyword::Given,
            kind,
            text: text.to_string(),
            req_tags: Vec::new(),
        }
    }

    #[test]
    fn then_reset_binds_to_assert() {
        let (action, _) = binder()
            .bind_step(&step(StepKind::Then, "Vehicle.Cabin.ChildPresenceDetection.IsChildDetected is reset to false"))
            .unwrap();
        assert_eq!(
            action,
            BoundAction::AssertSignal { path: CHILD.to_string(), expected: Value::Bool(false) }
        );
    }

    #[test]
    fn aliased_acknowledgment_binds_to_delayed_set() {
        let (action, canonical) = binder()
            .bind_step(&step(StepKind::When, "driver acknowledges within 5 minutes of HVAC override"))
            .unwrap();
        assert_eq!(
            action,
            BoundAction::DelayedSet {
                path: DEFAULT_ACK_PATH.to_string(),
                value: Value::Bool(true),
                delay: 60,
            }
        );
        assert_eq!(canonical, "acknowledges within 5 minutes of HVAC override");
    }

    #[test]
    fn is_disambiguates_by_kind() {
        let b = binder();
        let (set, _) = b.bind_step(&step(StepKind::Given, "Vehicle.Body.Horn.IsActive is true")).unwrap();
        assert!(matches!(set, BoundAction::SetSignal { .. }));
        let (assert_a, _) = b.bind_step(&step(StepKind::Then, "Vehicle.Body.Horn.IsActive is true")).unwrap();
        assert!(matches!(assert_a, BoundAction::AssertSignal { .. }));
    }

    #[test]
    fn unbound_step_is_reported() {
        let err = binder().bind_step(&step(StepKind::Given, "the cabin smells nice")).unwrap_err();
        assert_eq!(err, BindError::UnboundStep { text: "the cabin smells nice".into() });
        let err = binder().bind_step(&step(StepKind::Given, "the moon is full")).unwrap_err();
        assert!(matches!(err, BindError::UnboundStep { .. }));
    }

    #[test]
    fn unknown_path_and_type_mismatch() {
        let err = binder().bind_step(&step(StepKind::Given, "Vehicle.Cabin.Missing.X is true")).unwrap_err();
        assert_eq!(err, BindError::UnknownPath { path: "Vehicle.Cabin.Missing.X".into() });
        let err = binder().bind_step(&step(StepKind::Given, "Vehicle.Body.Horn.IsActive is loud")).unwrap_err();
        assert!(matches!(err, BindError::TypeMismatch { .. }));
    }

    #[test]
    fn durations_parse_both_units() {
        assert_eq!(parse_duration("5 minutes"), Some(300));
        assert_eq!(parse_duration("1 minute"), Some(60));
        assert_eq!(parse_duration("45 seconds"), Some(45));
        assert_eq!(parse_duration("1 second"), Some(1));
        assert_eq!(parse_duration("fast"), None);
        assert_eq!(format_duration(300), "5 minutes");
        assert_eq!(format_duration(60), "1 minute");
        assert_eq!(format_duration(45), "45 seconds");
    }

    #[test]
    fn every_shipped_scenario_step_binds() {
        let feature = parse_feature(crate::assets::HVAC_FEATURE).unwrap();
        let b = binder();
        for scenario in &feature.scenarios {
            for step in &scenario.steps {
                b.bind_step(step).unwrap_or_else(|e| panic!("step `{}` failed: {e}", step.text));
            }
        }
    }

    fn reference_factory() -> impl Fn(&mut Broker) -> Result<(), CpdsError> + Sync {
        |broker: &mut Broker| Cpds::reference().attach(broker)
    }

    #[test]
    fn shipped_scenario_passes_at_t_360() {
        // Hand trace: detection set at t=0; 300 s of driver inaction; the
        // override set at t=300; acknowledgment 60 s later; assert at 360.
        let feature = parse_feature(crate::assets::HVAC_FEATURE).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        let report = run_feature(&feature, &catalog, &RunnerConfig::default(), &reference_factory());
        assert!(report.all_passed());
        let steps = &report.scenarios[0].steps;
        assert_eq!(steps.last().unwrap().at, 360);
        assert_eq!(report.total_virtual_seconds, 360);
        assert_eq!(report.requirements["Req_CPDS_04.1"], ReqVerdict::Passed);
        assert_eq!(report.requirements["Req_CPDS_04.2"], ReqVerdict::Passed);
        assert_eq!(report.requirements["Req_CPDS_01.6"], ReqVerdict::Passed);
    }

    #[test]
    fn mutant_fails_the_reset_assert() {
        let feature = parse_feature(crate::assets::HVAC_FEATURE).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        let factory = |broker: &mut Broker| Cpds::with_variant(CpdsVariant::MutantNoReset).attach(broker);
        let report = run_feature(&feature, &catalog, &RunnerConfig::default(), &factory);
        assert!(report.any_failed());
        let last = report.scenarios[0].steps.last().unwrap();
        assert_eq!(last.outcome, Outcome::Failed);
        assert!(last.detail.contains(CHILD));
        assert!(last.detail.contains("expected false"));
        assert!(last.detail.contains("actual true"));
        assert_eq!(report.requirements["Req_CPDS_04.2"], ReqVerdict::Failed);
    }

    #[test]
    fn empty_scenario_passes() {
        let feature = Feature {
            name: "X".into(),
            scenarios: vec![Scenario { name: "empty".into(), steps: Vec::new() }],
        };
        let catalog = test_support::shipped_catalog_arc();
        let report = run_feature(&feature, &catalog, &RunnerConfig::default(), &reference_factory());
        assert_eq!(report.scenarios[0].verdict, Verdict::Passed);
        assert!(report.scenarios[0].steps.is_empty());
    }

    #[test]
    fn error_stops_scenario_but_not_feature() {
        let doc = "Scenario: bad\nGiven gibberish step\nGiven Vehicle.Body.Horn.IsActive is true\n\nScenario: good\nGiven Vehicle.Body.Horn.IsActive is true";
        let feature = parse_feature(doc).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        let report = run_feature(&feature, &catalog, &RunnerConfig::default(), &reference_factory());
        assert_eq!(report.scenarios[0].verdict, Verdict::Error);
        assert_eq!(report.scenarios[0].steps[1].detail, "not executed: an earlier step errored");
        assert_eq!(report.scenarios[1].verdict, Verdict::Passed);
    }

    #[test]
    fn scenarios_are_isolated() {
        let doc = "Scenario: a\nGiven Vehicle.Body.Horn.IsActive is set to true\n\nScenario: b\nThen Vehicle.Body.Horn.IsActive is false";
        let feature = parse_feature(doc).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        let report = run_feature(&feature, &catalog, &RunnerConfig::default(), &reference_factory());
        assert!(report.all_passed(), "state must not leak between scenarios");
    }

    #[test]
    fn reports_are_deterministic() {
        let feature = parse_feature(crate::assets::HVAC_FEATURE).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        let a = run_feature(&feature, &catalog, &RunnerConfig::default(), &reference_factory());
        let b = run_feature(&feature, &catalog, &RunnerConfig::default(), &reference_factory());
        assert_eq!(a.normalized(), b.normalized());
    }

    #[test]
    fn ack_delay_sweep_within_window_passes() {
        let feature = parse_feature(crate::assets::HVAC_FEATURE).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        for delay in [1, 30, 60, 150, 299] {
            let config = RunnerConfig { ack_delay: delay, ..RunnerConfig::default() };
            let report = run_feature(&feature, &catalog, &config, &reference_factory());
            assert!(report.all_passed(), "delay {delay} must pass");
            assert_eq!(report.total_virtual_seconds, 300 + delay);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_jobs_match_sequential() {
        let doc = (0..8)
            .map(|i| format!("Scenario: s{i}\nGiven Vehicle.Cabin.ChildPresenceDetection.IsChildDetected is true\nAnd no acknowledgment within 5 minutes of escalation\nThen Vehicle.Cabin.ChildPresenceDetection.IsDriverNotified is true\n"))
            .collect::<Vec<_>>()
            .join("\n");
        let feature = parse_feature(&doc).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        let seq = run_feature(&feature, &catalog, &RunnerConfig::default(), &reference_factory());
        let par_config = RunnerConfig { jobs: 4, ..RunnerConfig::default() };
        let par = run_feature(&feature, &catalog, &par_config, &reference_factory());
        assert_eq!(seq.normalized(), par.normalized());
    }

    #[test]
    fn script_round_trip_matches_in_process() {
        let feature = parse_feature(crate::assets::HVAC_FEATURE).unwrap();
        let catalog = test_support::shipped_catalog_arc();
        let binder = Binder::new(Arc::clone(&catalog));
        let script = crate::testgen::emit_runner_script(&feature, &binder).unwrap();
        let config = RunnerConfig::default();
        let in_process = run_feature(&feature, &catalog, &config, &reference_factory());
        let scripted = run_script(&script, &catalog, &config, &reference_factory()).unwrap();
        assert_eq!(in_process.normalized(), scripted.normalized());
    }

    #[test]
    fn script_parse_errors_carry_line() {
        let err = parse_script("scenario \"x\"\nmaybe something").unwrap_err();
        assert!(matches!(err, RunnerError::ScriptParse { line: 2, .. }));
        let err = parse_script("given orphan step").unwrap_err();
        assert!(matches!(err, RunnerError::ScriptParse { line: 1, .. }));
    }
}
