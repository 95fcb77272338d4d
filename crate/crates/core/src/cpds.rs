//! Reference child presence detection system.
//!
//! The system under test for generated scenarios. It lives entirely inside
//! broker subscriber and timer callbacks: ignition-off arms an evaluation
//! timer; a positive evaluation raises the detection flag and notifies the
//! driver; each unanswered response window escalates one stage; driver
//! acknowledgment returns to standby from any stage and restores every
//! signal this system raised.

use std::cell::RefCell;
use std::rc::Rc;

use serde::Serialize;
use thiserror::Error;

use crate::broker::{Broker, ChangeEvent};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CpdsStage {
    Standby,
    Evaluating,
    DriverNotified,
    InitialWarning,
    LightsHorn,
    HvacIntervention,
    CaregiverNotified,
    DoorsUnlocked,
    EmergencyContacted,
}

impl CpdsStage {
    pub fn name(&self) -> &'static str {
        match self {
            CpdsStage::Standby => "Standby",
            CpdsStage::Evaluating => "Evaluating",
            CpdsStage::DriverNotified => "DriverNotified",
            CpdsStage::InitialWarning => "InitialWarning",
            CpdsStage::LightsHorn => "LightsHorn",
            CpdsStage::HvacIntervention => "HvacIntervention",
            CpdsStage::CaregiverNotified => "CaregiverNotified",
            CpdsStage::DoorsUnlocked => "DoorsUnlocked",
            CpdsStage::EmergencyContacted => "EmergencyContacted",
        }
    }
}

/// Escalation timing and ordering.
#[derive(Debug, Clone)]
pub struct CpdsConfig {
    /// Seconds between ignition-off and the occupancy evaluation.
    pub evaluation_window: u64,
    /// Seconds the driver has to respond at each stage.
    pub response_window: u64,
    /// Post-notification stages, walked one per expired response window.
    pub stage_order: Vec<CpdsStage>,
}

impl Default for CpdsConfig {
    fn default() -> Self {
        CpdsConfig {
            evaluation_window: 10,
            response_window: 300,
            stage_order: vec![
                CpdsStage::InitialWarning,
                CpdsStage::LightsHorn,
                CpdsStage::HvacIntervention,
                CpdsStage::CaregiverNotified,
                CpdsStage::DoorsUnlocked,
                CpdsStage::EmergencyContacted,
            ],
        }
    }
}

impl CpdsConfig {
    fn validate(&self) -> Result<(), CpdsError> {
        if self.evaluation_window == 0 || self.response_window == 0 {
            return Err(CpdsError::InvalidConfig { reason: "windows must be > 0".into() });
        }
        if self.stage_order.is_empty() {
            return Err(CpdsError::InvalidConfig { reason: "stage order must be non-empty".into() });
        }
        for (i, a) in self.stage_order.iter().enumerate() {
            if self.stage_order[i + 1..].contains(a) {
                return Err(CpdsError::InvalidConfig {
                    reason: format!("stage order repeats {}", a.name()),
                });
            }
        }
        Ok(())
    }
}

/// Catalog paths the system observes and drives.
#[derive(Debug, Clone)]
pub struct CpdsSignals {
    pub is_child_detected: String,
    pub is_driver_notified: String,
    pub has_driver_acknowledged: String,
    pub hvac_override: String,
    pub ignition_off: String,
    pub seat_pressure: String,
    pub direct_detection: String,
    pub horn: String,
    pub lights: String,
    pub caregiver_notified: String,
    pub door_locked: String,
    pub emergency_call: String,
}

impl Default for CpdsSignals {
    fn default() -> Self {
        CpdsSignals {
            is_child_detected: "Vehicle.Cabin.ChildPresenceDetection.IsChildDetected".into(),
            is_driver_notified: "Vehicle.Cabin.ChildPresenceDetection.IsDriverNotified".into(),
            has_driver_acknowledged: "Vehicle.Cabin.ChildPresenceDetection.HasDriverAcknowledged".into(),
            hvac_override: "Vehicle.Cabin.Infotainment.HVAC.AutoOverrideActive".into(),
            ignition_off: "Vehicle.Powertrain.IsIgnitionOff".into(),
            seat_pressure: "Vehicle.Cabin.Seat.IsOccupied".into(),
            direct_detection: "Vehicle.Cabin.OccupantDetection.IsOccupantDetected".into(),
            horn: "Vehicle.Body.Horn.IsActive".into(),
            lights: "Vehicle.Body.Lights.IsHazardOn".into(),
            caregiver_notified: "Vehicle.Connectivity.IsCaregiverNotified".into(),
            door_locked: "Vehicle.Cabin.Door.IsLocked".into(),
            emergency_call: "Vehicle.Connectivity.IsEmergencyCallActive".into(),
        }
    }
}

impl CpdsSignals {
    /// Validation order puts the overlay signals first so a catalog without
    /// the project overlay reports the detection flag.
    fn all(&self) -> [&String; 12] {
        [
            &self.is_child_detected,
            &self.is_driver_notified,
            &self.has_driver_acknowledged,
            &self.hvac_override,
            &self.ignition_off,
            &self.seat_pressure,
            &self.direct_detection,
            &self.horn,
            &self.lights,
            &self.caregiver_notified,
            &self.door_locked,
            &self.emergency_call,
        ]
    }
}

/// Behavior selector; mutants exist as test hooks for the runner's own
/// failure detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpdsVariant {
    Reference,
    /// Skips the detection-flag reset on acknowledgment.
    MutantNoReset,
}

impl CpdsVariant {
    pub fn parse(s: &str) -> Option<CpdsVariant> {
        match s {
            "reference" => Some(CpdsVariant::Reference),
            "mutant-no-reset" => Some(CpdsVariant::MutantNoReset),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CpdsError {
    #[error("already attached")]
    AlreadyAttached,
    #[error("required signal missing from catalog: `{path}`")]
    UnknownPath { path: String },
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
}

struct CpdsState {
    attached: bool,
    stage: CpdsStage,
    timer_seq: u64,
    eval_timer: Option<String>,
    response_timer: Option<String>,
    /// `(path, prior value)` for every signal this system wrote, first
    /// write per episode.
    restore: Vec<(String, Value)>,
}

struct Shared {
    config: CpdsConfig,
    signals: CpdsSignals,
    variant: CpdsVariant,
    state: RefCell<CpdsState>,
}

pub struct Cpds {
    shared: Rc<Shared>,
}

impl Cpds {
    pub fn new(config: CpdsConfig, signals: CpdsSignals, variant: CpdsVariant) -> Result<Cpds, CpdsError> {
        config.validate()?;
        Ok(Cpds {
            shared: Rc::new(Shared {
                config,
                signals,
                variant,
                state: RefCell::new(CpdsState {
                    attached: false,
                    stage: CpdsStage::Standby,
                    timer_seq: 0,
                    eval_timer: None,
                    response_timer: None,
                    restore: Vec::new(),
                }),
            }),
        })
    }

    pub fn reference() -> Cpds {
        Cpds::new(CpdsConfig::default(), CpdsSignals::default(), CpdsVariant::Reference)
            .expect("default configuration is valid")
    }

    pub fn with_variant(variant: CpdsVariant) -> Cpds {
        Cpds::new(CpdsConfig::default(), CpdsSignals::default(), variant)
            .expect("default configuration is valid")
    }

    pub fn stage(&self) -> CpdsStage {
        self.shared.state.borrow().stage
    }

    pub fn config(&self) -> &CpdsConfig {
        &self.shared.config
    }

    pub fn signals(&self) -> &CpdsSignals {
        &self.shared.signals
    }

    /// Wire the system to a broker. Single-owner: a `Cpds` attaches once.
    pub fn attach(&self, broker: &mut Broker) -> Result<(), CpdsError> {
        {
            let state = self.shared.state.borrow();
            if state.attached {
                return Err(CpdsError::AlreadyAttached);
            }
        }
        for path in self.shared.signals.all() {
            let ok = broker.catalog().resolve(path).map(|n| n.is_leaf()).unwrap_or(false);
            if !ok {
                return Err(CpdsError::UnknownPath { path: path.clone() });
            }
        }
        self.shared.state.borrow_mut().attached = true;

        let signals = self.shared.signals.clone();
        let s = Rc::clone(&self.shared);
        broker
            .subscribe(&signals.ignition_off, move |b, ev| s.on_ignition(b, ev))
            .expect("path validated");
        // Occupancy inputs are sampled when the evaluation window closes;
        // the subscriptions exist so the wiring surface matches the sensor
        // set.
        for path in [&signals.seat_pressure, &signals.direct_detection] {
            broker.subscribe(path, |_, _| {}).expect("path validated");
        }
        let s = Rc::clone(&self.shared);
        broker
            .subscribe(&signals.is_child_detected, move |b, ev| s.on_child_detected(b, ev))
            .expect("path validated");
        let s = Rc::clone(&self.shared);
        broker
            .subscribe(&signals.has_driver_acknowledged, move |b, ev| s.on_acknowledged(b, ev))
            .expect("path validated");
        Ok(())
    }
}

impl Shared {
    fn set_stage(self: &Rc<Self>, broker: &mut Broker, new: CpdsStage) {
        let old = {
            let mut state = self.state.borrow_mut();
            let old = state.stage;
            state.stage = new;
            old
        };
        if old != new {
            broker.log_note("Cpds.Stage", old.name(), new.name());
        }
    }

    fn next_timer_id(self: &Rc<Self>, kind: &str) -> String {
        let mut state = self.state.borrow_mut();
        state.timer_seq += 1;
        format!("cpds:{kind}:{}", state.timer_seq)
    }

    /// Write a signal, remembering its prior value once per episode so
    /// acknowledgment can restore it.
    fn sut_set(self: &Rc<Self>, broker: &mut Broker, path: &str, value: Value) {
        let prior = broker.get(path).expect("path validated at attach");
        {
            let mut state = self.state.borrow_mut();
            if !state.restore.iter().any(|(p, _)| p == path) {
                state.restore.push((path.to_string(), prior));
            }
        }
        broker.set(path, value).expect("type validated at attach");
    }

    fn on_ignition(self: &Rc<Self>, broker: &mut Broker, ev: &ChangeEvent) {
        let stage = self.state.borrow().stage;
        if ev.new_value == Value::Bool(true) && stage == CpdsStage::Standby {
            let id = self.next_timer_id("eval");
            self.state.borrow_mut().eval_timer = Some(id.clone());
            self.set_stage(broker, CpdsStage::Evaluating);
            let s = Rc::clone(self);
            broker
                .schedule(self.config.evaluation_window, &id, move |b| s.on_eval_deadline(b))
                .expect("fresh timer id");
        } else if ev.new_value == Value::Bool(false) && stage == CpdsStage::Evaluating {
            // Ignition back on before the evaluation closes.
            let timer = self.state.borrow_mut().eval_timer.take();
            if let Some(id) = timer {
                broker.cancel(&id);
            }
            self.set_stage(broker, CpdsStage::Standby);
        }
    }

    fn on_eval_deadline(self: &Rc<Self>, broker: &mut Broker) {
        {
            let mut state = self.state.borrow_mut();
            if state.stage != CpdsStage::Evaluating {
                return;
            }
            state.eval_timer = None;
        }
        let seat = broker.get(&self.signals.seat_pressure).expect("validated");
        let direct = broker.get(&self.signals.direct_detection).expect("validated");
        // Child present iff either occupancy input is raised.
        if seat == Value::Bool(true) || direct == Value::Bool(true) {
            let path = self.signals.is_child_detected.clone();
            self.sut_set(broker, &path, Value::Bool(true));
            if self.state.borrow().stage == CpdsStage::Evaluating {
                // Flag was already true (kept from an expired cycle), so no
                // change event fired; notify directly.
                self.notify_driver(broker);
            }
        } else {
            self.set_stage(broker, CpdsStage::Standby);
        }
    }

    fn on_child_detected(self: &Rc<Self>, broker: &mut Broker, ev: &ChangeEvent) {
        if ev.new_value != Value::Bool(true) {
            return;
        }
        let stage = self.state.borrow().stage;
        if !matches!(stage, CpdsStage::Standby | CpdsStage::Evaluating) {
            return;
        }
        self.notify_driver(broker);
    }

    fn notify_driver(self: &Rc<Self>, broker: &mut Broker) {
        self.set_stage(broker, CpdsStage::DriverNotified);
        let path = self.signals.is_driver_notified.clone();
        self.sut_set(broker, &path, Value::Bool(true));
        self.arm_response_timer(broker);
    }

    fn arm_response_timer(self: &Rc<Self>, broker: &mut Broker) {
        let id = self.next_timer_id("response");
        self.state.borrow_mut().response_timer = Some(id.clone());
        let s = Rc::clone(self);
        broker
            .schedule(self.config.response_window, &id, move |b| s.on_response_deadline(b))
            .expect("fresh timer id");
    }

    fn on_response_deadline(self: &Rc<Self>, broker: &mut Broker) {
        let stage = {
            let mut state = self.state.borrow_mut();
            state.response_timer = None;
            state.stage
        };
        if matches!(stage, CpdsStage::Standby | CpdsStage::Evaluating) {
            return;
        }
        let order = &self.config.stage_order;
        let next = if stage == CpdsStage::DriverNotified {
            Some(order[0])
        } else {
            order
                .iter()
                .position(|s| *s == stage)
                .and_then(|pos| order.get(pos + 1))
                .copied()
        };
        match next {
            Some(next_stage) => {
                self.set_stage(broker, next_stage);
                for (path, value) in self.stage_actions(next_stage) {
                    self.sut_set(broker, &path, value);
                }
                self.arm_response_timer(broker);
            }
            // The last stage expired without a response: stand down, keep
            // the detection flag raised until someone acknowledges.
            None => self.stand_down(broker, false),
        }
    }

    fn stage_actions(&self, stage: CpdsStage) -> Vec<(String, Value)> {
        let s = &self.signals;
        match stage {
            CpdsStage::LightsHorn => vec![
                (s.horn.clone(), Value::Bool(true)),
                (s.lights.clone(), Value::Bool(true)),
            ],
            CpdsStage::HvacIntervention => vec![(s.hvac_override.clone(), Value::Bool(true))],
            CpdsStage::CaregiverNotified => vec![(s.caregiver_notified.clone(), Value::Bool(true))],
            CpdsStage::DoorsUnlocked => vec![(s.door_locked.clone(), Value::Bool(false))],
            CpdsStage::EmergencyContacted => vec![(s.emergency_call.clone(), Value::Bool(true))],
            _ => Vec::new(),
        }
    }

    fn on_acknowledged(self: &Rc<Self>, broker: &mut Broker, ev: &ChangeEvent) {
        if ev.new_value != Value::Bool(true) {
            return;
        }
        self.stand_down(broker, true);
        // Consume the acknowledgment so a later episode starts clean.
        broker
            .set(&self.signals.has_driver_acknowledged, Value::Bool(false))
            .expect("validated");
    }

    /// Return to standby. With `acknowledged`, the detection flag is
    /// cleared (reference behavior); otherwise it stays raised.
    fn stand_down(self: &Rc<Self>, broker: &mut Broker, acknowledged: bool) {
        let (eval_timer, response_timer, restore) = {
            let mut state = self.state.borrow_mut();
            (state.eval_timer.take(), state.response_timer.take(), std::mem::take(&mut state.restore))
        };
        if let Some(id) = eval_timer {
            broker.cancel(&id);
        }
        if let Some(id) = response_timer {
            broker.cancel(&id);
        }
        self.set_stage(broker, CpdsStage::Standby);
        for (path, value) in restore.iter().rev() {
            if *path == self.signals.is_child_detected {
                continue;
            }
            broker.set(path, value.clone()).expect("validated");
        }
        if acknowledged && self.variant != CpdsVariant::MutantNoReset {
            broker
                .set(&self.signals.is_child_detected, Value::Bool(false))
                .expect("validated");
        }
    }
}
