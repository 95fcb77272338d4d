//! Dependency-free Gherkin subset: parser, canonical renderer and
//! requirement tracing.
//!
//! Supported keywords: `Feature:`, `Scenario:`, `Given`, `When`, `Then`,
//! `And`. Anything else inside a scenario is rejected. Requirement tags ride
//! as trailing bracketed suffixes on step text, e.g.
//! `... is true [Req_CPDS_01.6]`, and are lifted into [`Step::req_tags`].

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

/// Feature name used when a document has no `Feature:` header. Rendering a
/// feature with this name omits the header again.
pub const UNNAMED_FEATURE: &str = "Unnamed";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Keyword {
    Given,
    When,
    Then,
    And,
}

impl Keyword {
    pub fn as_str(&self) -> &'static str {
        match self {
            Keyword::Given => "Given",
            Keyword::When => "When",
            Keyword::Then => "Then",
            Keyword::And => "And",
        }
    }
}

/// Resolved step kind; `And` steps inherit the preceding step's kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Given,
    When,
    Then,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Given => "given",
            StepKind::When => "when",
            StepKind::Then => "then",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub keyword_literal: Keyword,
    pub kind: StepKind,
    /// Step body with trailing requirement tags stripped.
    pub text: String,
    pub req_tags: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GherkinError {
    #[error("line {line}: scenario starts with an And step")]
    LeadingAnd { line: usize },
    #[error("line {line}: unknown keyword in `{text}`")]
    UnknownKeyword { line: usize, text: String },
    #[error("document contains no feature header and no scenarios")]
    EmptyDocument,
}

fn is_req_tag(s: &str) -> bool {
    s.strip_prefix("Req_").is_some_and(|rest| {
        !rest.is_empty() && rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
    })
}

/// Strip trailing ` [Req_...]` suffixes, returning the remaining text and
/// the tags in their original order.
pub(crate) fn split_tags(text: &str) -> (String, Vec<String>) {
    let mut rest = text.trim();
    let mut tags_rev = Vec::new();
    loop {
        if !rest.ends_with(']') {
            break;
        }
        let Some(open) = rest.rfind('[') else { break };
        let inner = &rest[open + 1..rest.len() - 1];
        if !is_req_tag(inner) {
            break;
        }
        tags_rev.push(inner.to_string());
        rest = rest[..open].trim_end();
    }
    tags_rev.reverse();
    (rest.to_string(), tags_rev)
}

/// Parse a feature document.
pub fn parse_feature(text: &str) -> Result<Feature, GherkinError> {
    let mut feature_name: Option<String> = None;
    let mut scenarios: Vec<Scenario> = Vec::new();
    let mut current: Option<Scenario> = None;
    let mut prev_kind: Option<StepKind> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }

        if let Some(rest) = line.strip_prefix("Feature:") {
            if feature_name.is_some() || current.is_some() {
                return Err(GherkinError::UnknownKeyword { line: line_no, text: line.to_string() });
            }
            let name = rest.trim();
            feature_name = Some(if name.is_empty() { UNNAMED_FEATURE.to_string() } else { name.to_string() });
            continue;
        }
        if let Some(rest) = line.strip_prefix("Scenario:") {
            if let Some(done) = current.take() {
                scenarios.push(done);
            }
            current = Some(Scenario { name: rest.trim().to_string(), steps: Vec::new() });
            prev_kind = None;
            continue;
        }

        let keyword_text = [
            (Keyword::Given, "Given"),
            (Keyword::When, "When"),
            (Keyword::Then, "Then"),
            (Keyword::And, "And"),
        ]
        .iter()
        .find_map(|(kw, word)| {
            if line == *word {
                Some((*kw, ""))
            } else {
                line.strip_prefix(word)
                    .and_then(|rest| rest.strip_prefix(' '))
                    .map(|rest| (*kw, rest))
            }
        });

        let Some(scenario) = current.as_mut() else {
            return Err(GherkinError::UnknownKeyword { line: line_no, text: line.to_string() });
        };
        let Some((keyword, body)) = keyword_text else {
            return Err(GherkinError::UnknownKeyword { line: line_no, text: line.to_string() });
        };

        let kind = match keyword {
            Keyword::Given => StepKind::Given,
            Keyword::When => StepKind::When,
            Keyword::Then => StepKind::Then,
            Keyword::And => match prev_kind {
                Some(k) => k,
                None => return Err(GherkinError::LeadingAnd { line: line_no }),
            },
        };
        prev_kind = Some(kind);

        let (step_text, req_tags) = split_tags(body);
        scenario.steps.push(Step { keyword_literal: keyword, kind, text: step_text, req_tags });
    }

    if let Some(done) = current.take() {
        scenarios.push(done);
    }
    if feature_name.is_none() && scenarios.is_empty() {
        return Err(GherkinError::EmptyDocument);
    }
    Ok(Feature {
        name: feature_name.unwrap_or_else(|| UNNAMED_FEATURE.to_string()),
        scenarios,
    })
}

/// Canonical rendering: optional `Feature:` header, scenarios separated by
/// blank lines, steps indented two spaces, tags re-appended in order.
/// `parse_feature(render_feature(f)) == f` for every valid feature.
pub fn render_feature(feature: &Feature) -> String {
    let mut out = String::new();
    if feature.name != UNNAMED_FEATURE {
        out.push_str(&format!("Feature: {}\n", feature.name));
        if !feature.scenarios.is_empty() {
            out.push('\n');
        }
    }
    for (i, scenario) in feature.scenarios.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if scenario.name.is_empty() {
            out.push_str("Scenario:\n");
        } else {
            out.push_str(&format!("Scenario: {}\n", scenario.name));
        }
        for step in &scenario.steps {
            out.push_str(&format!("  {}{}{}\n", step.keyword_literal.as_str(), render_text(&step.text), render_tags(&step.req_tags)));
        }
    }
    out
}

fn render_text(text: &str) -> String {
    if text.is_empty() {
        String::new()
    } else {
        format!(" {text}")
    }
}

pub(crate) fn render_tags(tags: &[String]) -> String {
    tags.iter().map(|t| format!(" [{t}]")).collect()
}

/// Index every requirement tag occurrence as `id -> [(scenario index, step
/// index)]`, ids in lexicographic order.
pub fn requirement_trace(feature: &Feature) -> BTreeMap<String, Vec<(usize, usize)>> {
    let mut trace: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (s, scenario) in feature.scenarios.iter().enumerate() {
        for (i, step) in scenario.steps.iter().enumerate() {
            for tag in &step.req_tags {
                trace.entry(tag.clone()).or_default().push((s, i));
            }
        }
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn shipped_hvac_scenario_parses_exactly() {
        let feature = parse_feature(assets::HVAC_FEATURE).unwrap();
        assert_eq!(feature.name, UNNAMED_FEATURE);
        assert_eq!(feature.scenarios.len(), 1);
        let scenario = &feature.scenarios[0];
        assert_eq!(scenario.name, "HVAC adjustment intervention (Req_CPDS_04)");
        assert_eq!(scenario.steps.len(), 5);

        let kinds: Vec<StepKind> = scenario.steps.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![StepKind::Given, StepKind::Given, StepKind::When, StepKind::When, StepKind::Then]
        );
        let keywords: Vec<Keyword> = scenario.steps.iter().map(|s| s.keyword_literal).collect();
        assert_eq!(
            keywords,
            vec![Keyword::Given, Keyword::And, Keyword::When, Keyword::And, Keyword::Then]
        );
        let tags: Vec<Vec<String>> = scenario.steps.iter().map(|s| s.req_tags.clone()).collect();
        assert_eq!(
            tags,
            vec![
                vec!["Req_CPDS_01.6".to_string()],
                vec!["Req_CPDS_04.1".to_string()],
                vec!["Req_CPDS_04.1".to_string()],
                vec!["Req_CPDS_04.2".to_string()],
                vec!["Req_CPDS_04.2".to_string()],
            ]
        );
        assert_eq!(
            scenario.steps[0].text,
            "Vehicle.Cabin.ChildPresenceDetection.IsChildDetected is true"
        );
    }

    #[test]
    fn render_parse_is_whitespace_normalization() {
        let feature = parse_feature(assets::HVAC_FEATURE).unwrap();
        let rendered = render_feature(&feature);
        // Canonical form: same lines, two-space step indentation, LF.
        let expected: String = assets::HVAC_FEATURE
            .lines()
            .map(|l| {
                if l.starts_with("Scenario:") {
                    format!("{l}\n")
                } else {
                    format!("  {l}\n")
                }
            })
            .collect();
        assert_eq!(rendered, expected);
        // Idempotence of render after parse.
        assert_eq!(render_feature(&parse_feature(&rendered).unwrap()), rendered);
    }

    #[test]
    fn empty_scenario_allowed() {
        let feature = parse_feature("Scenario: empty").unwrap();
        assert_eq!(feature.scenarios.len(), 1);
        assert!(feature.scenarios[0].steps.is_empty());
    }

    #[test]
    fn leading_and_rejected() {
        let err = parse_feature("Scenario: x\nAnd x is true").unwrap_err();
        assert_eq!(err, GherkinError::LeadingAnd { line: 2 });
    }

    #[test]
    fn unknown_keyword_rejected() {
        let err = parse_feature("Scenario: x\nBut y is false").unwrap_err();
        assert!(matches!(err, GherkinError::UnknownKeyword { line: 2, .. }));
        let err = parse_feature("Scenario: x\nScenario Outline: y").unwrap_err();
        assert!(matches!(err, GherkinError::UnknownKeyword { .. }));
    }

    #[test]
    fn empty_document_rejected() {
        assert_eq!(parse_feature("\n# only a comment\n").unwrap_err(), GherkinError::EmptyDocument);
    }

    #[test]
    fn feature_header_only_is_a_valid_empty_feature() {
        let feature = parse_feature("Feature: Bare").unwrap();
        assert_eq!(feature.name, "Bare");
        assert!(feature.scenarios.is_empty());
    }

    #[test]
    fn requirement_trace_indexes_all_occurrences() {
        let feature = parse_feature(assets::HVAC_FEATURE).unwrap();
        let trace = requirement_trace(&feature);
        assert_eq!(trace["Req_CPDS_01.6"], vec![(0, 0)]);
        assert_eq!(trace["Req_CPDS_04.1"], vec![(0, 1), (0, 2)]);
        assert_eq!(trace["Req_CPDS_04.2"], vec![(0, 3), (0, 4)]);
    }

    #[test]
    fn trace_of_untagged_feature_is_empty() {
        let feature = parse_feature("Scenario: x\nGiven a is true").unwrap();
        assert!(requirement_trace(&feature).is_empty());
    }

    #[test]
    fn same_tag_across_scenarios() {
        let doc = "Scenario: a\nGiven x is true [Req_R_1.1]\n\nScenario: b\nGiven y is true [Req_R_1.1]";
        let trace = requirement_trace(&parse_feature(doc).unwrap());
        assert_eq!(trace["Req_R_1.1"], vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn multiple_tags_keep_order() {
        let feature = parse_feature("Scenario: x\nGiven a is true [Req_A.1] [Req_B.2]").unwrap();
        let step = &feature.scenarios[0].steps[0];
        assert_eq!(step.req_tags, vec!["Req_A.1".to_string(), "Req_B.2".to_string()]);
        assert_eq!(step.text, "a is true");
        let rendered = render_feature(&feature);
        assert!(rendered.contains("Given a is true [Req_A.1] [Req_B.2]"));
    }

    #[test]
    fn non_tag_brackets_stay_in_text() {
        let feature = parse_feature("Scenario: x\nGiven value within [0, 1] holds").unwrap();
        assert_eq!(feature.scenarios[0].steps[0].text, "value within [0, 1] holds");
        assert!(feature.scenarios[0].steps[0].req_tags.is_empty());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn text_strategy() -> impl Strategy<Value = String> {
            "[a-z][a-z0-9 ]{0,24}[a-z0-9]".prop_map(|s| s)
        }

        fn tag_strategy() -> impl Strategy<Value = String> {
            "Req_[A-Za-z0-9_.]{1,8}".prop_map(|s| s)
        }

        fn step_strategy(first: bool) -> impl Strategy<Value = (Keyword, String, Vec<String>)> {
            let keywords = if first {
                vec![Keyword::Given, Keyword::When, Keyword::Then]
            } else {
                vec![Keyword::Given, Keyword::When, Keyword::Then, Keyword::And]
            };
            (
                proptest::sample::select(keywords),
                text_strategy(),
                proptest::collection::vec(tag_strategy(), 0..3),
            )
        }

        fn scenario_strategy() -> impl Strategy<Value = Scenario> {
            (
                text_strategy(),
                step_strategy(true),
                proptest::collection::vec(step_strategy(false), 0..5),
                proptest::bool::ANY,
            )
                .prop_map(|(name, first, rest, empty)| {
                    let mut steps = Vec::new();
                    if !empty {
                        let mut prev = StepKind::Given;
                        for (i, (keyword, text, req_tags)) in
                            std::iter::once(first).chain(rest).enumerate()
                        {
                            let kind = match keyword {
                                Keyword::Given => StepKind::Given,
                                Keyword::When => StepKind::When,
                                Keyword::Then => StepKind::Then,
                                Keyword::And => prev,
                            };
                            prev = kind;
                            let _ = i;
                            steps.push(Step { keyword_literal: keyword, kind, text, req_tags });
                        }
                    }
                    Scenario { name, steps }
                })
        }

        fn feature_strategy() -> impl Strategy<Value = Feature> {
            (
                prop_oneof![Just(UNNAMED_FEATURE.to_string()), text_strategy()],
                proptest::collection::vec(scenario_strategy(), 0..4),
            )
                .prop_filter("headerless empty features do not round-trip", |(name, scenarios)| {
                    !(name == UNNAMED_FEATURE && scenarios.is_empty())
                })
                .prop_map(|(name, scenarios)| Feature { name, scenarios })
        }

        proptest! {
            #[test]
            fn parse_render_round_trip(feature in feature_strategy()) {
                let rendered = render_feature(&feature);
                let reparsed = parse_feature(&rendered).unwrap();
                prop_assert_eq!(reparsed, feature);
            }

            #[test]
            fn and_steps_inherit_previous_kind(feature in feature_strategy()) {
                for scenario in &feature.scenarios {
                    let mut prev: Option<StepKind> = None;
                    for step in &scenario.steps {
                        if step.keyword_literal == Keyword::And {
                            prop_assert_eq!(Some(step.kind), prev);
                        }
                        prev = Some(step.kind);
                    }
                }
            }

            #[test]
            fn tag_stripping_preserves_text(text in text_strategy(), tags in proptest::collection::vec(tag_strategy(), 0..3)) {
                let mut line = text.clone();
                for tag in &tags {
                    line.push_str(&format!(" [{tag}]"));
                }
                let doc = format!("Scenario: s\nGiven {line}");
                let feature = parse_feature(&doc).unwrap();
                let step = &feature.scenarios[0].steps[0];
                prop_assert_eq!(&step.text, &text);
                prop_assert_eq!(&step.req_tags, &tags);
            }
        }
    }
}
