//! Simulated vehicle-signal broker: typed datapoints, change
//! subscriptions, and an integer-second virtual clock with timers.
//!
//! The broker is one logical event domain. Subscribers run synchronously
//! inside `set`, and timer callbacks run synchronously inside `advance`;
//! both may set further signals and schedule further timers, which are
//! processed within the same call when due. Nothing here ever touches the
//! wall clock.

use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::Arc;

use thiserror::Error;

use crate::value::Value;
use crate::vss_catalog::Catalog;

/// Callback invoked for a value change on a subscribed path.
pub type SubscriberFn = Rc<dyn Fn(&mut Broker, &ChangeEvent)>;
/// Callback invoked when a timer fires.
pub type TimerFn = Rc<dyn Fn(&mut Broker)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent {
    pub path: String,
    pub old_value: Value,
    pub new_value: Value,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub path: String,
    pub value: Value,
    pub updated_at: u64,
}

/// One line of the broker's event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub at: u64,
    pub signal: String,
    pub old: String,
    pub new: String,
}

impl LogRecord {
    pub fn render(&self) -> String {
        format!("t={} {} {}->{}", self.at, self.signal, self.old, self.new)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BrokerError {
    #[error("unknown path `{path}`: not a catalog leaf")]
    UnknownPath { path: String },
    #[error("type mismatch for `{path}`: expected {expected}, got {got}")]
    TypeMismatch { path: String, expected: String, got: String },
    #[error("duplicate timer id `{id}`")]
    DuplicateTimerId { id: String },
    #[error("timer delay must be > 0")]
    InvalidDelay,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetOutcome {
    Changed(ChangeEvent),
    NoChange,
}

struct PendingTimer {
    fire_at: u64,
    seq: u64,
    id: String,
    callback: TimerFn,
}

pub struct Broker {
    catalog: Arc<Catalog>,
    points: BTreeMap<String, (Value, u64)>,
    subscribers: Vec<(String, SubscriberFn)>,
    timers: Vec<PendingTimer>,
    next_seq: u64,
    now: u64,
    log: Vec<LogRecord>,
}

impl Broker {
    pub fn new(catalog: Arc<Catalog>) -> Self {
        Broker {
            catalog,
            points: BTreeMap::new(),
            subscribers: Vec::new(),
            timers: Vec::new(),
            next_seq: 0,
            now: 0,
            log: Vec::new(),
        }
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    /// Current virtual time in seconds.
    pub fn now(&self) -> u64 {
        self.now
    }

    fn leaf_datatype(&self, path: &str) -> Result<crate::vss_catalog::Datatype, BrokerError> {
        match self.catalog.resolve(path) {
            Ok(node) if node.is_leaf() => Ok(node.datatype.expect("leaf carries datatype")),
            _ => Err(BrokerError::UnknownPath { path: path.to_string() }),
        }
    }

    /// Current value of a leaf; the datatype default before any set.
    pub fn get(&self, path: &str) -> Result<Value, BrokerError> {
        let datatype = self.leaf_datatype(path)?;
        Ok(self
            .points
            .get(path)
            .map(|(v, _)| v.clone())
            .unwrap_or_else(|| Value::default_for(datatype)))
    }

    pub fn datapoint(&self, path: &str) -> Result<DataPoint, BrokerError> {
        let datatype = self.leaf_datatype(path)?;
        let (value, updated_at) = self
            .points
            .get(path)
            .cloned()
            .unwrap_or_else(|| (Value::default_for(datatype), 0));
        Ok(DataPoint { path: path.to_string(), value, updated_at })
    }

    /// Update a datapoint. Subscribers for the path run synchronously, in
    /// subscription order, before `set` returns. Setting the current value
    /// is a no-op that notifies nobody.
    pub fn set(&mut self, path: &str, value: Value) -> Result<SetOutcome, BrokerError> {
        let datatype = self.leaf_datatype(path)?;
        if !value.matches(datatype) {
            return Err(BrokerError::TypeMismatch {
                path: path.to_string(),
                expected: datatype.as_str().to_string(),
                got: value.type_name().to_string(),
            });
        }
        let old_value = self.get(path)?;
        if old_value == value {
            return Ok(SetOutcome::NoChange);
        }
        self.points.insert(path.to_string(), (value.clone(), self.now));
        let event = ChangeEvent {
            path: path.to_string(),
            old_value: old_value.clone(),
            new_value: value.clone(),
            at: self.now,
        };
        self.log.push(LogRecord {
            at: self.now,
            signal: path.to_string(),
            old: old_value.to_string(),
            new: value.to_string(),
        });
        let matching: Vec<SubscriberFn> = self
            .subscribers
            .iter()
            .filter(|(p, _)| p == path)
            .map(|(_, f)| Rc::clone(f))
            .collect();
        for subscriber in matching {
            subscriber(self, &event);
        }
        Ok(SetOutcome::Changed(event))
    }

    /// Register a change callback for one leaf path.
    pub fn subscribe(
        &mut self,
        path: &str,
        callback: impl Fn(&mut Broker, &ChangeEvent) + 'static,
    ) -> Result<(), BrokerError> {
        self.leaf_datatype(path)?;
        self.subscribers.push((path.to_string(), Rc::new(callback)));
        Ok(())
    }

    /// Schedule a timer `delay` seconds from now. Ids must be unique among
    /// pending timers.
    pub fn schedule(
        &mut self,
        delay: u64,
        id: &str,
        callback: impl Fn(&mut Broker) + 'static,
    ) -> Result<(), BrokerError> {
        if delay == 0 {
            return Err(BrokerError::InvalidDelay);
        }
        if self.timers.iter().any(|t| t.id == id) {
            return Err(BrokerError::DuplicateTimerId { id: id.to_string() });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.timers.push(PendingTimer {
            fire_at: self.now + delay,
            seq,
            id: id.to_string(),
            callback: Rc::new(callback),
        });
        Ok(())
    }

    /// Remove a pending timer. Unknown ids are ignored.
    pub fn cancel(&mut self, id: &str) {
        self.timers.retain(|t| t.id != id);
    }

    pub fn pending_timers(&self) -> Vec<(u64, String)> {
        let mut out: Vec<(u64, String)> = self.timers.iter().map(|t| (t.fire_at, t.id.clone())).collect();
        out.sort();
        out
    }

    /// Advance virtual time. Timers due in `(old_now, old_now + duration]`
    /// fire in `(fire_at, schedule order)`; callbacks may schedule further
    /// timers, which fire within the same call when due. Returns fired
    /// timer ids in fire order.
    pub fn advance(&mut self, duration: u64) -> Vec<String> {
        let target = self.now + duration;
        let mut fired = Vec::new();
        loop {
            let due = self
                .timers
                .iter()
                .enumerate()
                .filter(|(_, t)| t.fire_at <= target)
                .min_by_key(|(_, t)| (t.fire_at, t.seq))
                .map(|(i, _)| i);
            let Some(index) = due else { break };
            let timer = self.timers.remove(index);
            self.now = timer.fire_at;
            fired.push(timer.id.clone());
            (timer.callback)(self);
        }
        self.now = target;
        fired
    }

    pub fn event_log(&self) -> &[LogRecord] {
        &self.log
    }

    /// Append a pseudo-signal record (e.g. SUT stage transitions) to the
    /// event log.
    pub fn log_note(&mut self, signal: &str, old: &str, new: &str) {
        self.log.push(LogRecord {
            at: self.now,
            signal: signal.to_string(),
            old: old.to_string(),
            new: new.to_string(),
        });
    }

    /// The event log as line-delimited `t=<sec> <signal> <old>-><new>`
    /// records.
    pub fn render_log(&self) -> String {
        let mut out = String::new();
        for record in &self.log {
            out.push_str(&record.render());
            out.push('\n');
        }
        out
    }
}
