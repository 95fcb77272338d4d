//! Textual statechart DSL: parser, canonical renderer, signal extraction
//! and reachability checks.
//!
//! The grammar is line-oriented:
//!
//! ```text
//! chart <name>
//! initial <State>
//! default <signal> = <literal>
//! state <Name> [ { ... } ]
//! transition <Src> -> <Dst> on <signal> == <literal> [do <signal> = <literal>, ...]
//! transition <Src> -> <Dst> after <N>s [do ...]
//! ```
//!
//! Inside a `state` block: nested `state` declarations, `entry <signal> =
//! <literal>` lines, and shorthand transitions sourced at the enclosing
//! state (`on ... -> <Dst> [do ...]`, `after <N>s -> <Dst> [do ...]`).
//! Nested states are addressed as `Parent.Child` in transitions; entering a
//! composite state enters its first child.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct StateChart {
    pub name: String,
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
    pub initial: String,
    /// Declared rest values, in declaration order.
    pub defaults: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Local segment; nested states are addressed as `Parent.Child`.
    pub name: String,
    pub children: Vec<State>,
    pub entry_actions: Vec<ActionSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub source: String,
    pub target: String,
    pub trigger: Trigger,
    pub actions: Vec<ActionSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    Signal { name: String, comparator: Comparator, literal: Value },
    Timeout { seconds: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    pub signal: String,
    pub literal: Value,
}

/// Where a raw signal occurrence was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Locator {
    /// Entry action of the named (fully qualified) state.
    State(String),
    /// Index into [`StateChart::transitions`].
    Transition(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalRole {
    Event,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occurrence {
    pub locator: Locator,
    pub role: SignalRole,
}

/// A candidate signal name extracted from the chart, with every place it
/// appears.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RawSignal {
    pub name: String,
    pub occurrences: Vec<Occurrence>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChartError {
    #[error("line {line}: syntax error: expected {expected}")]
    Syntax { line: usize, expected: String },
    #[error("line {line}: unknown state `{name}`")]
    UnknownState { line: usize, name: String },
    #[error("line {line}: duplicate state `{name}`")]
    DuplicateState { line: usize, name: String },
}

fn valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
        _ => false,
    }
}

fn valid_state_ref(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(valid_name)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser {
    chart_name: Option<String>,
    initial: Option<(usize, String)>,
    defaults: Vec<(String, Value)>,
    states: Vec<State>,
    transitions: Vec<(usize, Transition)>,
    /// Stack of indices into the nested state tree while inside blocks.
    open_blocks: Vec<String>,
}

impl Parser {
    fn current_source(&self) -> Option<String> {
        self.open_blocks.last().cloned()
    }

    /// Mutable handle to the state a dotted full name refers to.
    fn state_mut(&mut self, full: &str) -> Option<&mut State> {
        let mut segments = full.split('.');
        let first = segments.next()?;
        let mut node = self.states.iter_mut().find(|s| s.name == first)?;
        for seg in segments {
            node = node.children.iter_mut().find(|s| s.name == seg)?;
        }
        Some(node)
    }
}

/// Parse a statechart document.
pub fn parse_statechart(text: &str) -> Result<StateChart, ChartError> {
    let mut p = Parser {
        chart_name: None,
        initial: None,
        defaults: Vec::new(),
        states: Vec::new(),
        transitions: Vec::new(),
        open_blocks: Vec::new(),
    };
    let mut declared: HashSet<String> = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        // Braces may share a line with their content, e.g.
        // `state X { after 300s -> Y }`.
        for segment in split_segments(line) {
            handle_segment(&mut p, &mut declared, line_no, &segment)?;
        }
    }

    if !p.open_blocks.is_empty() {
        return Err(ChartError::Syntax { line: text.lines().count(), expected: "`}` closing a state block".to_string() });
    }
    let name = p.chart_name.ok_or(ChartError::Syntax { line: 1, expected: "`chart <name>` declaration".to_string() })?;
    let (initial_line, initial) = p.initial.ok_or(ChartError::Syntax { line: 1, expected: "`initial <state>` declaration".to_string() })?;

    if !declared.contains(&initial) {
        return Err(ChartError::UnknownState { line: initial_line, name: initial });
    }
    let mut transitions = Vec::with_capacity(p.transitions.len());
    for (line, t) in p.transitions {
        for endpoint in [&t.source, &t.target] {
            if !declared.contains(endpoint) {
                return Err(ChartError::UnknownState { line, name: endpoint.clone() });
            }
        }
        transitions.push(t);
    }

    Ok(StateChart { name, states: p.states, transitions, initial, defaults: p.defaults })
}

/// Split a comment-stripped physical line into logical segments at braces
/// (outside quotes), so blocks may open, fill and close on one line.
fn split_segments(line: &str) -> Vec<String> {
    let mut segments = Vec::new();
    let mut current = String::new();
    let mut in_quotes = false;
    for c in line.chars() {
        match c {
            '"' => {
                in_quotes = !in_quotes;
                current.push(c);
            }
            '{' if !in_quotes => {
                current.push(c);
                segments.push(std::mem::take(&mut current));
            }
            '}' if !in_quotes => {
                segments.push(std::mem::take(&mut current));
                segments.push("}".to_string());
            }
            _ => current.push(c),
        }
    }
    segments.push(current);
    segments
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn handle_segment(
    p: &mut Parser,
    declared: &mut HashSet<String>,
    line_no: usize,
    line: &str,
) -> Result<(), ChartError> {
    let syntax = |expected: &str| ChartError::Syntax { line: line_no, expected: expected.to_string() };

    if line == "}" {
        if p.open_blocks.pop().is_none() {
            return Err(syntax("a `state` block to close"));
        }
        return Ok(());
    }

    let (head, rest) = match line.split_once(char::is_whitespace) {
        Some((h, r)) => (h, r.trim()),
        None => (line, ""),
    };

    match head {
            "chart" => {
                if p.chart_name.is_some() {
                    return Err(syntax("a single chart declaration"));
                }
                if rest.is_empty() {
                    return Err(syntax("chart name"));
                }
                p.chart_name = Some(rest.to_string());
            }
            "initial" => {
                if !valid_state_ref(rest) {
                    return Err(syntax("initial state name"));
                }
                p.initial = Some((line_no, rest.to_string()));
            }
            "default" => {
                let (signal, literal) = parse_assignment(rest).ok_or_else(|| syntax("`default <signal> = <literal>`"))?;
                p.defaults.push((signal, literal));
            }
            "state" => {
                let (name, opens) = match rest.strip_suffix('{') {
                    Some(n) => (n.trim(), true),
                    None => (rest, false),
                };
                if !valid_name(name) {
                    return Err(syntax("state name"));
                }
                let full = match p.current_source() {
                    Some(parent) => format!("{parent}.{name}"),
                    None => name.to_string(),
                };
                if !declared.insert(full.clone()) {
                    return Err(ChartError::DuplicateState { line: line_no, name: full });
                }
                let new_state = State { name: name.to_string(), children: Vec::new(), entry_actions: Vec::new() };
                match p.current_source() {
                    Some(parent) => {
                        let parent_state = p.state_mut(&parent).expect("open block exists");
                        parent_state.children.push(new_state);
                    }
                    None => p.states.push(new_state),
                }
                if opens {
                    p.open_blocks.push(full);
                }
            }
            "entry" => {
                let source = p.current_source().ok_or_else(|| syntax("`entry` inside a state block"))?;
                let (signal, literal) = parse_assignment(rest).ok_or_else(|| syntax("`entry <signal> = <literal>`"))?;
                let state = p.state_mut(&source).expect("open block exists");
                state.entry_actions.push(ActionSpec { signal, literal });
            }
            "on" | "after" => {
                let source = p.current_source().ok_or_else(|| syntax("shorthand transitions inside a state block"))?;
                let (arrow_head, arrow_tail) = rest.split_once("->").ok_or_else(|| syntax("`-> <Target>`"))?;
                let (target, actions) = parse_target_and_actions(arrow_tail).ok_or_else(|| syntax("target state and optional `do` list"))?;
                let trigger = parse_trigger(head, arrow_head.trim()).ok_or_else(|| {
                    syntax("`on <signal> == <literal>` or `after <N>s`")
                })?;
                p.transitions.push((line_no, Transition { source, target, trigger, actions }));
            }
            "transition" => {
                let (src, remainder) = rest.split_once("->").ok_or_else(|| syntax("`<Src> -> <Dst>`"))?;
                let src = src.trim();
                if !valid_state_ref(src) {
                    return Err(syntax("source state name"));
                }
                let remainder = remainder.trim();
                let (dst, rest2) = match remainder.split_once(char::is_whitespace) {
                    Some((d, r)) => (d, r.trim()),
                    None => return Err(syntax("`on` or `after` trigger")),
                };
                if !valid_state_ref(dst) {
                    return Err(syntax("target state name"));
                }
                let (kw, spec) = match rest2.split_once(char::is_whitespace) {
                    Some((k, s)) => (k, s.trim()),
                    None => (rest2, ""),
                };
                let (trigger_text, actions) = match split_do(spec) {
                    Some((t, a)) => (t.trim().to_string(), parse_action_list(a).ok_or_else(|| syntax("`do <signal> = <literal>, ...`"))?),
                    None => (spec.to_string(), Vec::new()),
                };
                let trigger = parse_trigger(kw, &trigger_text).ok_or_else(|| {
                    syntax("`on <signal> == <literal>` or `after <N>s`")
                })?;
                p.transitions.push((line_no, Transition {
                    source: src.to_string(),
                    target: dst.to_string(),
                    trigger,
                    actions,
                }));
            }
            _ => return Err(syntax("chart, initial, default, state, entry, on, after or transition")),
    }
    Ok(())
}

fn parse_trigger(keyword: &str, spec: &str) -> Option<Trigger> {
    match keyword {
        "on" => {
            let (name, lit) = spec.split_once("==")?;
            let name = name.trim();
            if !valid_name(name) {
                return None;
            }
            let literal = Value::parse_chart_literal(lit.trim())?;
            Some(Trigger::Signal { name: name.to_string(), comparator: Comparator::Eq, literal })
        }
        "after" => {
            let digits = spec.strip_suffix('s')?;
            let seconds: u64 = digits.trim().parse().ok()?;
            if seconds == 0 {
                return None;
            }
            Some(Trigger::Timeout { seconds })
        }
        _ => None,
    }
}

/// Split `... do a = 1, b = 2` at a top-level ` do ` keyword (outside quotes).
fn split_do(text: &str) -> Option<(&str, &str)> {
    let bytes = text.as_bytes();
    let mut in_quotes = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => in_quotes = !in_quotes,
            b'd' if !in_quotes => {
                let at_start = i == 0 || bytes[i - 1].is_ascii_whitespace();
                if at_start && text[i..].starts_with("do") {
                    let after = i + 2;
                    if after == bytes.len() || bytes[after].is_ascii_whitespace() {
                        return Some((&text[..i], &text[after..]));
                    }
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn parse_target_and_actions(text: &str) -> Option<(String, Vec<ActionSpec>)> {
    let text = text.trim();
    let (target, actions) = match split_do(text) {
        Some((t, a)) => (t.trim(), parse_action_list(a)?),
        None => (text, Vec::new()),
    };
    if !valid_state_ref(target) {
        return None;
    }
    Some((target.to_string(), actions))
}

fn parse_action_list(text: &str) -> Option<Vec<ActionSpec>> {
    let mut actions = Vec::new();
    for item in split_top_level_commas(text) {
        let (signal, literal) = parse_assignment(item.trim())?;
        actions.push(ActionSpec { signal, literal });
    }
    if actions.is_empty() {
        return None;
    }
    Some(actions)
}

fn split_top_level_commas(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut in_quotes = false;
    for (i, c) in text.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            ',' if !in_quotes => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

fn parse_assignment(text: &str) -> Option<(String, Value)> {
    let (name, lit) = text.split_once('=')?;
    let name = name.trim();
    if !valid_name(name) {
        return None;
    }
    let literal = Value::parse_chart_literal(lit.trim())?;
    Some((name.to_string(), literal))
}

// ---------------------------------------------------------------------------
// Canonical rendering
// ---------------------------------------------------------------------------

/// Render a chart in canonical form: states (with entry actions and
/// nesting) first, then every transition as a top-level `transition` line.
/// `parse_statechart(render_statechart(c)) == c` for any valid chart.
pub fn render_statechart(chart: &StateChart) -> String {
    let mut out = String::new();
    out.push_str(&format!("chart {}\n", chart.name));
    out.push_str(&format!("initial {}\n", chart.initial));
    for (signal, literal) in &chart.defaults {
        out.push_str(&format!("default {} = {}\n", signal, literal.to_chart_literal()));
    }
    for state in &chart.states {
        render_state(&mut out, state, 0);
    }
    for t in &chart.transitions {
        let trigger = match &t.trigger {
            Trigger::Signal { name, comparator: Comparator::Eq, literal } => {
                format!("on {} == {}", name, literal.to_chart_literal())
            }
            Trigger::Timeout { seconds } => format!("after {seconds}s"),
        };
        out.push_str(&format!("transition {} -> {} {}", t.source, t.target, trigger));
        if !t.actions.is_empty() {
            out.push_str(" do ");
            out.push_str(&render_action_list(&t.actions));
        }
        out.push('\n');
    }
    out
}

fn render_action_list(actions: &[ActionSpec]) -> String {
    actions
        .iter()
        .map(|a| format!("{} = {}", a.signal, a.literal.to_chart_literal()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn render_state(out: &mut String, state: &State, depth: usize) {
    let indent = "  ".repeat(depth);
    if state.children.is_empty() && state.entry_actions.is_empty() {
        out.push_str(&format!("{indent}state {}\n", state.name));
        return;
    }
    out.push_str(&format!("{indent}state {} {{\n", state.name));
    for action in &state.entry_actions {
        out.push_str(&format!(
            "{indent}  entry {} = {}\n",
            action.signal,
            action.literal.to_chart_literal()
        ));
    }
    for child in &state.children {
        render_state(out, child, depth + 1);
    }
    out.push_str(&format!("{indent}}}\n"));
}

// ---------------------------------------------------------------------------
// Queries
// ---------------------------------------------------------------------------

impl StateChart {
    /// All states flattened depth-first in declaration order, with fully
    /// qualified dotted names.
    pub fn flat_states(&self) -> Vec<(String, &State)> {
        let mut out = Vec::new();
        fn walk<'a>(prefix: &str, states: &'a [State], out: &mut Vec<(String, &'a State)>) {
            for s in states {
                let full = if prefix.is_empty() { s.name.clone() } else { format!("{prefix}.{}", s.name) };
                out.push((full.clone(), s));
                walk(&full, &s.children, out);
            }
        }
        walk("", &self.states, &mut out);
        out
    }

    /// The declared default for a chart signal, if any.
    pub fn default_of(&self, signal: &str) -> Option<&Value> {
        self.defaults.iter().find(|(s, _)| s == signal).map(|(_, v)| v)
    }

    /// The state actually entered when a transition targets `state`:
    /// composites resolve to their first child, recursively.
    pub fn effective_entry(&self, state: &str) -> String {
        let flat = self.flat_states();
        let mut current = state.to_string();
        loop {
            let Some((_, s)) = flat.iter().find(|(full, _)| *full == current) else {
                return current;
            };
            match s.children.first() {
                Some(child) => current = format!("{current}.{}", child.name),
                None => return current,
            }
        }
    }
}

/// Distinct raw signal names in first-occurrence order.
///
/// Traversal is state-major: for each state in declaration order (depth
/// first), its entry actions, then its outgoing transitions in declaration
/// order (trigger signal before action signals). Timeout triggers contribute
/// no signals.
pub fn extract_signals(chart: &StateChart) -> Vec<RawSignal> {
    let mut order: Vec<String> = Vec::new();
    let mut found: HashMap<String, RawSignal> = HashMap::new();
    let mut record = |name: &str, locator: Locator, role: SignalRole| {
        let entry = found.entry(name.to_string()).or_insert_with(|| {
            order.push(name.to_string());
            RawSignal { name: name.to_string(), occurrences: Vec::new() }
        });
        entry.occurrences.push(Occurrence { locator, role });
    };

    for (full, state) in chart.flat_states() {
        for action in &state.entry_actions {
            record(&action.signal, Locator::State(full.clone()), SignalRole::Action);
        }
        for (idx, t) in chart.transitions.iter().enumerate() {
            if t.source != full {
                continue;
            }
            if let Trigger::Signal { name, .. } = &t.trigger {
                record(name, Locator::Transition(idx), SignalRole::Event);
            }
            for action in &t.actions {
                record(&action.signal, Locator::Transition(idx), SignalRole::Action);
            }
        }
    }

    order.into_iter().map(|name| found.remove(&name).expect("recorded")).collect()
}

/// States not reachable from `initial`, in lexicographic order.
///
/// Reachability follows transitions plus the composite-entry rule (reaching
/// a composite reaches its first child, and being in a child means the
/// parent is active).
pub fn validate_reachability(chart: &StateChart) -> Vec<String> {
    let flat = chart.flat_states();
    let names: Vec<String> = flat.iter().map(|(n, _)| n.clone()).collect();

    let mut edges: HashMap<String, Vec<String>> = HashMap::new();
    let mut add = |from: &str, to: &str| edges.entry(from.to_string()).or_default().push(to.to_string());
    for t in &chart.transitions {
        add(&t.source, &t.target);
    }
    for (full, state) in &flat {
        if let Some(first) = state.children.first() {
            add(full, &format!("{full}.{}", first.name));
        }
        if let Some((parent, _)) = full.rsplit_once('.') {
            add(full, parent);
        }
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut queue = VecDeque::from([chart.initial.clone()]);
    while let Some(state) = queue.pop_front() {
        if !seen.insert(state.clone()) {
            continue;
        }
        if let Some(next) = edges.get(&state) {
            for n in next {
                if !seen.contains(n) {
                    queue.push_back(n.clone());
                }
            }
        }
    }

    let unreachable: BTreeSet<String> = names.into_iter().filter(|n| !seen.contains(n)).collect();
    unreachable.into_iter().collect()
}
