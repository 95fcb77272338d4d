//! Scenario generation: structured requirements plus a statechart in, a
//! Gherkin feature out.
//!
//! Requirements bind to chart transitions by `(source, target)` pair.
//! Requirements group by the id prefix before the final dot (Req_CPDS_04.1
//! and 04.2 form Req_CPDS_04); each group becomes one scenario whose
//! transition path is the shortest chain covering every bound transition.
//! A group whose bindings already lie on another group's scenario folds
//! into it instead of generating its own.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::gherkin::{self, Feature, Keyword, Scenario, Step, StepKind};
use crate::runner::{format_duration, BindError, Binder, DEFAULT_ACK_PATH};
use crate::statechart::{StateChart, Transition, Trigger};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Requirement {
    pub id: String,
    pub text: String,
    /// `(source, target)` pairs of the transitions realizing this
    /// requirement.
    pub binds: Vec<(String, String)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("line {line}: malformed requirement: {reason}")]
    MalformedRequirement { line: usize, reason: String },
    #[error("duplicate requirement id `{id}`")]
    DuplicateRequirement { id: String },
    #[error("requirement `{id}` is unbound: {detail}")]
    UnboundRequirement { id: String, detail: String },
    #[error("no executable path covers requirement group `{group}`")]
    NoPath { group: String },
    #[error("no mapping for raw signal `{0}`")]
    UnmappedSignal(String),
}

/// Parse a requirements file: one
/// `req <ID> "<text>" binds <Src>-><Dst>[, <Src>-><Dst>...]` per line.
pub fn parse_requirements(text: &str) -> Result<Vec<Requirement>, GenError> {
    let mut requirements: Vec<Requirement> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: &str| GenError::MalformedRequirement {
            line: line_no,
            reason: reason.to_string(),
        };
        let rest = line.strip_prefix("req ").ok_or_else(|| malformed("expected `req <ID> ...`"))?;
        let (id, rest) = rest
            .split_once(char::is_whitespace)
            .ok_or_else(|| malformed("expected requirement id"))?;
        if requirements.iter().any(|r| r.id == id) {
            return Err(GenError::DuplicateRequirement { id: id.to_string() });
        }
        let rest = rest.trim();
        let rest = rest.strip_prefix('"').ok_or_else(|| malformed("expected quoted text"))?;
        let (text_body, rest) = rest
            .split_once('"')
            .ok_or_else(|| malformed("unterminated requirement text"))?;
        let rest = rest.trim();
        let rest = rest
            .strip_prefix("binds")
            .ok_or_else(|| malformed("expected `binds <Src>-><Dst>`"))?;
        let mut binds = Vec::new();
        for pair in rest.split(',') {
            let pair = pair.trim();
            if pair.is_empty() {
                continue;
            }
            let (src, dst) = pair
                .split_once("->")
                .ok_or_else(|| malformed("expected `<Src>-><Dst>` pairs"))?;
            binds.push((src.trim().to_string(), dst.trim().to_string()));
        }
        if binds.is_empty() {
            return Err(malformed("empty binds list"));
        }
        requirements.push(Requirement {
            id: id.to_string(),
            text: text_body.to_string(),
            binds,
        });
    }
    Ok(requirements)
}

/// One planned scenario: a connected transition path plus the context chain
/// that reaches it from the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    /// Requirement ids realized by this scenario, in declaration order.
    pub requirement_ids: Vec<String>,
    /// Transition indices from the initial state up to the path start.
    pub context: Vec<usize>,
    /// The covering transition path, in execution order.
    pub path: Vec<usize>,
    /// Requirement tags per transition index (context and path).
    pub transition_tags: BTreeMap<usize, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenPlan {
    pub feature_name: String,
    pub scenario_specs: Vec<ScenarioSpec>,
}

fn group_key(id: &str) -> String {
    match id.rsplit_once('.') {
        Some((prefix, _)) => prefix.to_string(),
        None => id.to_string(),
    }
}

/// Breadth-first shortest transition chain from `from` to `to`. Composite
/// targets are entered via their first child. Returns transition indices;
/// empty when `from` already satisfies `to`.
fn shortest_chain(chart: &StateChart, from: &str, to: &str) -> Option<Vec<usize>> {
    if from == to {
        return Some(Vec::new());
    }
    let mut previous: HashMap<String, (String, usize)> = HashMap::new();
    let mut queue = VecDeque::from([from.to_string()]);
    let mut seen: BTreeSet<String> = BTreeSet::from([from.to_string()]);
    while let Some(state) = queue.pop_front() {
        for (idx, t) in chart.transitions.iter().enumerate() {
            if t.source != state {
                continue;
            }
            let entered = chart.effective_entry(&t.target);
            for next in [t.target.clone(), entered] {
                if seen.insert(next.clone()) {
                    previous.insert(next.clone(), (state.clone(), idx));
                    if next == to {
                        let mut chain = Vec::new();
                        let mut cursor = to.to_string();
                        while cursor != from {
                            let (prev, via) = previous[&cursor].clone();
                            chain.push(via);
                            cursor = prev;
                        }
                        chain.reverse();
                        return Some(chain);
                    }
                    queue.push_back(next.clone());
                }
            }
        }
    }
    None
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for tail in permutations(&rest) {
            let mut perm = vec![head];
            perm.extend(tail);
            out.push(perm);
        }
    }
    out
}

/// Plan one scenario per requirement group.
pub fn plan_scenarios(chart: &StateChart, reqs: &[Requirement]) -> Result<GenPlan, GenError> {
    // Resolve bindings to transition indices (first declaration wins for
    // repeated (source, target) pairs).
    let mut bound_of: HashMap<&str, Vec<usize>> = HashMap::new();
    for req in reqs {
        if req.binds.is_empty() {
            return Err(GenError::UnboundRequirement {
                id: req.id.clone(),
                detail: "empty binds list".to_string(),
            });
        }
        let mut indices = Vec::new();
        for (src, dst) in &req.binds {
            let idx = chart
                .transitions
                .iter()
                .position(|t| &t.source == src && &t.target == dst)
                .ok_or_else(|| GenError::UnboundRequirement {
                    id: req.id.clone(),
                    detail: format!("no transition {src}->{dst} in the chart"),
                })?;
            if !indices.contains(&idx) {
                indices.push(idx);
            }
        }
        bound_of.insert(&req.id, indices);
    }

    // Group by id prefix, keeping requirement declaration order per group.
    let mut groups: BTreeMap<String, Vec<&Requirement>> = BTreeMap::new();
    for req in reqs {
        groups.entry(group_key(&req.id)).or_default().push(req);
    }

    let start = chart.effective_entry(&chart.initial);

    struct Draft {
        group: String,
        context: Vec<usize>,
        path: Vec<usize>,
        coverage: BTreeSet<usize>,
        binds: BTreeSet<usize>,
    }

    let mut drafts: Vec<Draft> = Vec::new();
    for (group, members) in &groups {
        let mut bound: Vec<usize> = Vec::new();
        for req in members {
            for idx in &bound_of[req.id.as_str()] {
                if !bound.contains(idx) {
                    bound.push(*idx);
                }
            }
        }
        // Shortest covering chain over all permutations of the bound set.
        let mut best: Option<Vec<usize>> = None;
        for perm in permutations(&bound) {
            let mut candidate = Vec::new();
            let mut ok = true;
            for (i, &idx) in perm.iter().enumerate() {
                if i > 0 {
                    let prev = &chart.transitions[perm[i - 1]];
                    let here = &chart.transitions[idx];
                    let from = chart.effective_entry(&prev.target);
                    match shortest_chain(chart, &from, &here.source) {
                        Some(connector) => candidate.extend(connector),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                candidate.push(idx);
            }
            if !ok {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => candidate.len() < b.len() || (candidate.len() == b.len() && candidate < *b),
            };
            if better {
                best = Some(candidate);
            }
        }
        let path = best.ok_or_else(|| GenError::NoPath { group: group.clone() })?;
        let first_source = chart.transitions[path[0]].source.clone();
        let context = shortest_chain(chart, &start, &first_source)
            .ok_or_else(|| GenError::NoPath { group: group.clone() })?;
        let _ = members;
        drafts.push(Draft {
            group: group.clone(),
            coverage: context.iter().chain(path.iter()).copied().collect(),
            binds: bound.iter().copied().collect(),
            context,
            path,
        });
    }

    // Fold groups whose bindings already lie on another group's scenario.
    let mut host_of: BTreeMap<String, String> = BTreeMap::new();
    for a in &drafts {
        for b in &drafts {
            if a.group == b.group || host_of.contains_key(&b.group) {
                continue;
            }
            if !a.binds.is_subset(&b.coverage) {
                continue;
            }
            let mutual = b.binds.is_subset(&a.coverage);
            // On mutual coverage the lexicographically smaller group hosts.
            if !mutual || a.group > b.group {
                host_of.insert(a.group.clone(), b.group.clone());
                break;
            }
        }
    }

    let mut specs = Vec::new();
    for draft in &drafts {
        if host_of.contains_key(&draft.group) {
            continue;
        }
        let mut requirement_ids = Vec::new();
        for req in reqs {
            let key = group_key(&req.id);
            if key == draft.group || host_of.get(&key) == Some(&draft.group) {
                requirement_ids.push(req.id.clone());
            }
        }
        let mut transition_tags: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for req in reqs {
            if !requirement_ids.contains(&req.id) {
                continue;
            }
            for idx in &bound_of[req.id.as_str()] {
                if draft.coverage.contains(idx) {
                    transition_tags.entry(*idx).or_default().push(req.id.clone());
                }
            }
        }
        specs.push(ScenarioSpec {
            name: format!("{} scenario", draft.group),
            requirement_ids,
            context: draft.context.clone(),
            path: draft.path.clone(),
            transition_tags,
        });
    }

    Ok(GenPlan { feature_name: chart.name.clone(), scenario_specs: specs })
}

/// Emission settings.
#[derive(Debug, Clone)]
pub struct EmitConfig {
    /// Catalog path of the acknowledgment signal; triggers mapping onto it
    /// are phrased as acknowledgment steps.
    pub ack_path: String,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig { ack_path: DEFAULT_ACK_PATH.to_string() }
    }
}

fn mapped<'m>(mappings: &'m BTreeMap<String, String>, raw: &str) -> Result<&'m str, GenError> {
    mappings
        .get(raw)
        .map(String::as_str)
        .ok_or_else(|| GenError::UnmappedSignal(raw.to_string()))
}

/// Does `source` offer an acknowledgment way out, making its timeout model
/// driver inaction?
fn has_ack_alternative(
    chart: &StateChart,
    source: &str,
    mappings: &BTreeMap<String, String>,
    cfg: &EmitConfig,
) -> bool {
    chart.transitions.iter().any(|t| {
        t.source == source
            && matches!(
                &t.trigger,
                Trigger::Signal { name, literal: Value::Bool(true), .. }
                    if mappings.get(name) == Some(&cfg.ack_path)
            )
    })
}

/// The response window of a state: its shortest outgoing timeout.
fn response_window(chart: &StateChart, source: &str) -> Option<u64> {
    chart
        .transitions
        .iter()
        .filter(|t| t.source == source)
        .filter_map(|t| match t.trigger {
            Trigger::Timeout { seconds } => Some(seconds),
            _ => None,
        })
        .min()
}

/// Generate the feature for a plan.
///
/// Per scenario: requirement-tagged context transitions contribute `given`
/// steps stating their trigger and action literals; path transitions
/// contribute their trigger (timeouts as inaction or plain waits,
/// acknowledgment triggers as delayed-acknowledgment phrases, other signal
/// triggers as sets) and their actions (`is set to` along the way, asserts
/// on the final transition, phrased `is reset to` when the literal restores
/// the chart default).
pub fn emit_feature(
    plan: &GenPlan,
    chart: &StateChart,
    mappings: &BTreeMap<String, String>,
    cfg: &EmitConfig,
) -> Result<Feature, GenError> {
    let mut scenarios = Vec::new();
    for spec in &plan.scenario_specs {
        let mut drafts: Vec<(StepKind, String, Vec<String>)> = Vec::new();

        for &ti in &spec.context {
            let tags = match spec.transition_tags.get(&ti) {
                Some(tags) if !tags.is_empty() => tags.clone(),
                _ => continue,
            };
            let t = &chart.transitions[ti];
            if let Trigger::Signal { name, literal, .. } = &t.trigger {
                drafts.push((StepKind::Given, format!("{} is {literal}", mapped(mappings, name)?), tags.clone()));
            }
            for action in &t.actions {
                drafts.push((
                    StepKind::Given,
                    format!("{} is {}", mapped(mappings, &action.signal)?, action.literal),
                    tags.clone(),
                ));
            }
        }

        let mut acted = false;
        for (pos, &ti) in spec.path.iter().enumerate() {
            let is_final = pos + 1 == spec.path.len();
            let t: &Transition = &chart.transitions[ti];
            let tags = effective_tags(spec, pos);

            match &t.trigger {
                Trigger::Timeout { seconds } => {
                    let text = if has_ack_alternative(chart, &t.source, mappings, cfg) {
                        format!("no acknowledgment within {} of {}", format_duration(*seconds), t.source)
                    } else {
                        format!("after {}", format_duration(*seconds))
                    };
                    let kind = if acted { StepKind::When } else { StepKind::Given };
                    drafts.push((kind, text, tags.clone()));
                }
                Trigger::Signal { name, literal, .. } => {
                    let path = mapped(mappings, name)?;
                    let is_ack = path == cfg.ack_path && *literal == Value::Bool(true);
                    let text = match (is_ack, response_window(chart, &t.source)) {
                        (true, Some(window)) => format!(
                            "acknowledges within {} of {}",
                            format_duration(window),
                            t.source
                        ),
                        _ => format!("{path} is set to {literal}"),
                    };
                    drafts.push((StepKind::When, text, tags.clone()));
                    acted = true;
                }
            }

            for action in &t.actions {
                let path = mapped(mappings, &action.signal)?;
                if is_final {
                    let restores_default = chart.default_of(&action.signal) == Some(&action.literal);
                    let text = if restores_default {
                        format!("{path} is reset to {}", action.literal)
                    } else {
                        format!("{path} is {}", action.literal)
                    };
                    drafts.push((StepKind::Then, text, tags.clone()));
                } else {
                    drafts.push((StepKind::When, format!("{path} is set to {}", action.literal), tags.clone()));
                    acted = true;
                }
            }
        }

        let mut steps = Vec::new();
        let mut prev_kind: Option<StepKind> = None;
        for (kind, text, req_tags) in drafts {
            let keyword = if prev_kind == Some(kind) {
                Keyword::And
            } else {
                match kind {
                    StepKind::Given => Keyword::Given,
                    StepKind::When => Keyword::When,
                    StepKind::Then => Keyword::Then,
                }
            };
            prev_kind = Some(kind);
            steps.push(Step { keyword_literal: keyword, kind, text, req_tags });
        }
        scenarios.push(Scenario { name: spec.name.clone(), steps });
    }
    Ok(Feature { name: plan.feature_name.clone(), scenarios })
}

/// Tags for a path transition: its own, or those of the nearest tagged
/// path transition (following first) so connector steps stay traceable.
fn effective_tags(spec: &ScenarioSpec, pos: usize) -> Vec<String> {
    let own = spec.transition_tags.get(&spec.path[pos]);
    if let Some(tags) = own {
        if !tags.is_empty() {
            return tags.clone();
        }
    }
    for &later in &spec.path[pos + 1..] {
        if let Some(tags) = spec.transition_tags.get(&later) {
            if !tags.is_empty() {
                return tags.clone();
            }
        }
    }
    for &earlier in spec.path[..pos].iter().rev() {
        if let Some(tags) = spec.transition_tags.get(&earlier) {
            if !tags.is_empty() {
                return tags.clone();
            }
        }
    }
    Vec::new()
}

/// Render a feature as a declarative runner script: binds every step and
/// writes its canonical text under `given`/`when`/`then` dispatch lines.
pub fn emit_runner_script(feature: &Feature, binder: &Binder) -> Result<String, BindError> {
    let mut out = format!("feature \"{}\"\n", feature.name);
    for scenario in &feature.scenarios {
        out.push_str(&format!("scenario \"{}\"\n", scenario.name));
        for step in &scenario.steps {
            let (_, canonical) = binder.bind_step(step)?;
            out.push_str(&format!(
                "  {} {}{}\n",
                step.kind.as_str(),
                canonical,
                gherkin::render_tags(&step.req_tags)
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::gherkin::parse_feature;
    use crate::statechart::parse_statechart;
    use crate::test_support;

    fn shipped() -> (StateChart, Vec<Requirement>) {
        let chart = parse_statechart(assets::CPDS_CHART).unwrap();
        let reqs = parse_requirements(assets::CPDS_REQUIREMENTS).unwrap();
        (chart, reqs)
    }

    #[test]
    fn requirements_file_parses() {
        let (_, reqs) = shipped();
        assert_eq!(reqs.len(), 3);
        assert_eq!(reqs[0].id, "Req_CPDS_01.6");
        assert_eq!(reqs[1].binds, vec![("LightsHorn".to_string(), "HvacIntervention".to_string())]);
        assert!(reqs[1].text.contains("adjust HVAC"));
    }

    #[test]
    fn malformed_requirement_lines_rejected() {
        assert!(matches!(
            parse_requirements("req X no quotes binds A->B"),
            Err(GenError::MalformedRequirement { line: 1, .. })
        ));
        assert!(matches!(
            parse_requirements("req X \"text\" binds"),
            Err(GenError::MalformedRequirement { .. })
        ));
        assert!(matches!(
            parse_requirements("req X \"t\" binds A->B\nreq X \"t\" binds A->B"),
            Err(GenError::DuplicateRequirement { .. })
        ));
    }

    #[test]
    fn shipped_inputs_plan_one_scenario() {
        let (chart, reqs) = shipped();
        let plan = plan_scenarios(&chart, &reqs).unwrap();
        assert_eq!(plan.feature_name, "CPDS");
        assert_eq!(plan.scenario_specs.len(), 1, "detection group folds into the HVAC group");
        let spec = &plan.scenario_specs[0];
        assert_eq!(spec.name, "Req_CPDS_04 scenario");
        assert_eq!(
            spec.requirement_ids,
            vec!["Req_CPDS_01.6".to_string(), "Req_CPDS_04.1".to_string(), "Req_CPDS_04.2".to_string()]
        );
        assert_eq!(spec.path.len(), 2, "timeout into the intervention, acknowledgment out");
        let sources: Vec<&str> = spec
            .path
            .iter()
            .map(|&i| chart.transitions[i].source.as_str())
            .collect();
        assert_eq!(sources, vec!["LightsHorn", "HvacIntervention"]);
        // Context walks the chain from standby to the lights/horn stage.
        let context_sources: Vec<&str> = spec
            .context
            .iter()
            .map(|&i| chart.transitions[i].source.as_str())
            .collect();
        assert_eq!(context_sources, vec!["Standby", "Evaluating", "DriverNotified", "InitialWarning"]);
    }

    #[test]
    fn empty_requirements_plan_no_scenarios() {
        let (chart, _) = shipped();
        let plan = plan_scenarios(&chart, &[]).unwrap();
        assert!(plan.scenario_specs.is_empty());
    }

    #[test]
    fn unreachable_binding_is_no_path() {
        let chart = parse_statechart(
            "chart X\ninitial A\nstate A\nstate B\nstate C\ntransition B -> C after 5s",
        )
        .unwrap();
        let reqs = vec![Requirement {
            id: "Req_X_1.1".into(),
            text: "t".into(),
            binds: vec![("B".into(), "C".into())],
        }];
        // B is not reachable from A, so no context chain exists.
        assert_eq!(plan_scenarios(&chart, &reqs).unwrap_err(), GenError::NoPath { group: "Req_X_1".into() });
    }

    #[test]
    fn dangling_binding_is_unbound() {
        let (chart, _) = shipped();
        let reqs = vec![Requirement {
            id: "Req_X_1.1".into(),
            text: "t".into(),
            binds: vec![("Nowhere".into(), "Standby".into())],
        }];
        assert!(matches!(
            plan_scenarios(&chart, &reqs).unwrap_err(),
            GenError::UnboundRequirement { .. }
        ));
    }

    fn shipped_mappings() -> BTreeMap<String, String> {
        test_support::shipped_mappings()
    }

    #[test]
    fn emitted_feature_matches_source_scenario_structurally() {
        let (chart, reqs) = shipped();
        let plan = plan_scenarios(&chart, &reqs).unwrap();
        let feature = emit_feature(&plan, &chart, &shipped_mappings(), &EmitConfig::default()).unwrap();
        assert_eq!(feature.scenarios.len(), 1);
        let generated = &feature.scenarios[0];
        let source = parse_feature(assets::HVAC_FEATURE).unwrap();
        let reference = &source.scenarios[0];

        assert_eq!(generated.steps.len(), reference.steps.len());
        for (g, r) in generated.steps.iter().zip(&reference.steps) {
            assert_eq!(g.kind, r.kind);
            assert_eq!(g.keyword_literal, r.keyword_literal);
            assert_eq!(g.req_tags, r.req_tags);
            // Signal steps agree on path and literal.
            let path_of = |text: &str| text.split(' ').next().unwrap().to_string();
            if r.text.starts_with("Vehicle.") {
                assert_eq!(path_of(&g.text), path_of(&r.text));
                assert_eq!(g.text.split(' ').last(), r.text.split(' ').last());
            }
        }
    }

    #[test]
    fn emitted_feature_matches_golden_file() {
        let (chart, reqs) = shipped();
        let plan = plan_scenarios(&chart, &reqs).unwrap();
        let feature = emit_feature(&plan, &chart, &shipped_mappings(), &EmitConfig::default()).unwrap();
        assert_eq!(gherkin::render_feature(&feature), test_support::read_golden_feature());
    }

    #[test]
    fn empty_plan_emits_empty_feature() {
        let (chart, _) = shipped();
        let plan = GenPlan { feature_name: chart.name.clone(), scenario_specs: Vec::new() };
        let feature = emit_feature(&plan, &chart, &shipped_mappings(), &EmitConfig::default()).unwrap();
        assert!(feature.scenarios.is_empty());
    }

    #[test]
    fn missing_mapping_is_reported_by_raw_name() {
        let (chart, reqs) = shipped();
        let plan = plan_scenarios(&chart, &reqs).unwrap();
        let mut mappings = shipped_mappings();
        mappings.remove("HVACAutoOverride");
        let err = emit_feature(&plan, &chart, &mappings, &EmitConfig::default()).unwrap_err();
        assert_eq!(err, GenError::UnmappedSignal("HVACAutoOverride".into()));
    }

    #[test]
    fn generated_features_parse_and_trace() {
        let (chart, reqs) = shipped();
        let plan = plan_scenarios(&chart, &reqs).unwrap();
        let feature = emit_feature(&plan, &chart, &shipped_mappings(), &EmitConfig::default()).unwrap();
        let rendered = gherkin::render_feature(&feature);
        let reparsed = parse_feature(&rendered).unwrap();
        assert_eq!(reparsed, feature);

        for scenario in &feature.scenarios {
            for step in &scenario.steps {
                assert!(!step.req_tags.is_empty(), "step `{}` lacks tags", step.text);
            }
        }
        let trace = gherkin::requirement_trace(&feature);
        let traced: BTreeSet<&String> = trace.keys().collect();
        let planned: BTreeSet<&String> = plan
            .scenario_specs
            .iter()
            .flat_map(|s| s.requirement_ids.iter())
            .collect();
        assert_eq!(traced, planned);
    }

    #[test]
    fn script_emission_asserts_the_reset() {
        let feature = parse_feature(assets::HVAC_FEATURE).unwrap();
        let binder = Binder::new(test_support::shipped_catalog_arc());
        let script = emit_runner_script(&feature, &binder).unwrap();
        assert!(script.contains("scenario \"HVAC adjustment intervention (Req_CPDS_04)\""));
        assert!(script
            .contains("then Vehicle.Cabin.ChildPresenceDetection.IsChildDetected is reset to false"));
        // Alias-resolved canonical text, not the original phrasing.
        assert!(script.contains("given no acknowledgment within 5 minutes of escalation"));
        assert!(!script.contains("driver acknowledgment occurs"));
    }

    #[test]
    fn empty_feature_emits_empty_script() {
        let binder = Binder::new(test_support::shipped_catalog_arc());
        let feature = Feature { name: "X".into(), scenarios: Vec::new() };
        let script = emit_runner_script(&feature, &binder).unwrap();
        assert_eq!(script, "feature \"X\"\n");
    }

    #[test]
    fn unbindable_step_blocks_script_emission() {
        let binder = Binder::new(test_support::shipped_catalog_arc());
        let feature = parse_feature("Scenario: odd\nGiven the moon is full").unwrap();
        let err = emit_runner_script(&feature, &binder).unwrap_err();
        assert!(matches!(err, BindError::UnboundStep { .. }));
    }

    #[test]
    fn duration_formatting_in_emission() {
        // A tagged timeout without an acknowledgment alternative renders as
        // a plain wait with seconds, not minutes.
        let chart = parse_statechart(
            "chart W\ninitial A\nstate A\nstate B\ndefault Flag = false\ntransition A -> B after 90s do Flag = true",
        )
        .unwrap();
        let reqs = vec![Requirement {
            id: "Req_W_1.1".into(),
            text: "t".into(),
            binds: vec![("A".into(), "B".into())],
        }];
        let plan = plan_scenarios(&chart, &reqs).unwrap();
        let mut mappings = BTreeMap::new();
        mappings.insert("Flag".to_string(), "Vehicle.Body.Horn.IsActive".to_string());
        let feature = emit_feature(&plan, &chart, &mappings, &EmitConfig::default()).unwrap();
        let steps = &feature.scenarios[0].steps;
        assert_eq!(steps[0].text, "after 90 seconds");
        assert_eq!(steps[0].kind, StepKind::Given);
        // Final transition's action becomes the assert; true is not the
        // declared default, so no reset phrasing.
        assert_eq!(steps[1].text, "Vehicle.Body.Horn.IsActive is true");
        assert_eq!(steps[1].kind, StepKind::Then);
    }
}
