//! Ordered event log of a protocol run with communication counters.
//!
//! Events are serialized one per line as flat JSON records
//! `{run_id, step, actor, kind, payload, qubit_units, classical_bits}`;
//! transcript files are append-only. The quantum counter is in register
//! units (one register transfer = one unit, matching the complexity
//! accounting), with a separate physical-qubit counter kept informationally.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Alice,
    Bob,
    Channel,
}

/// Semantic step identifiers for the protocol dialogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepId {
    Setup,
    Keygen,
    Prepare,
    SendBatch,
    SizeCheck,
    Oracle,
    ReturnBatch,
    CheckPhase,
    Extract,
    Convey,
    Declare,
    VerifyDeclarations,
    Announce,
    MembershipCheck,
    Outcome,
}

impl StepId {
    pub fn name(self) -> &'static str {
        match self {
            StepId::Setup => "setup",
            StepId::Keygen => "keygen",
            StepId::Prepare => "prepare",
            StepId::SendBatch => "send_batch",
            StepId::SizeCheck => "size_check",
            StepId::Oracle => "oracle",
            StepId::ReturnBatch => "return_batch",
            StepId::CheckPhase => "check_phase",
            StepId::Extract => "extract",
            StepId::Convey => "convey",
            StepId::Declare => "declare",
            StepId::VerifyDeclarations => "verify_declarations",
            StepId::Announce => "announce",
            StepId::MembershipCheck => "membership_check",
            StepId::Outcome => "outcome",
        }
    }
}

pub type Payload = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: StepId,
    pub actor: Actor,
    pub kind: String,
    #[serde(default)]
    pub payload: Payload,
    /// Cumulative register-unit counter at the time of the event.
    pub qubit_units: u64,
    /// Cumulative classical-bit counter at the time of the event.
    pub classical_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub step: StepId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub qubit_units: u64,
    pub physical_qubits: u64,
    pub classical_bits: u64,
    pub abort: Option<AbortInfo>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an event. Nothing may follow an abort.
    pub fn record(&mut self, step: StepId, actor: Actor, kind: &str, payload: Payload) {
        assert!(self.abort.is_none(), "transcript already aborted");
        self.events.push(Event {
            step,
            actor,
            kind: kind.to_string(),
            payload,
            qubit_units: self.qubit_units,
            classical_bits: self.classical_bits,
        });
    }

    /// Counts a transfer of `registers` registers of `width` qubits each.
    pub fn add_register_transfer(&mut self, registers: u64, width: u64) {
        assert!(self.abort.is_none());
        self.qubit_units += registers;
        self.physical_qubits += registers * width;
    }

    pub fn add_classical_bits(&mut self, bits: u64) {
        assert!(self.abort.is_none());
        self.classical_bits += bits;
    }

    /// Records the abort as the final event.
    pub fn abort(&mut self, step: StepId, actor: Actor, reason: &str) {
        assert!(self.abort.is_none(), "transcript already aborted");
        self.events.push(Event {
            step,
            actor,
            kind: "abort".to_string(),
            payload: BTreeMap::from([(
                "reason".to_string(),
                serde_json::Value::String(reason.to_string()),
            )]),
            qubit_units: self.qubit_units,
            classical_bits: self.classical_bits,
        });
        self.abort = Some(AbortInfo { step, reason: reason.to_string() });
    }

    pub fn is_aborted(&self) -> bool {
        self.abort.is_some()
    }
}

/// One serialized transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLine {
    pub run_id: u64,
    pub step: StepId,
    pub actor: Actor,
    pub kind: String,
    #[serde(default)]
    pub payload: Payload,
    pub qubit_units: u64,
    pub classical_bits: u64,
}

#[derive(Debug, Error)]
pub enum TranscriptIoError {
    #[error("malformed transcript line: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Renders a transcript as newline-delimited JSON records.
pub fn to_jsonl(run_id: u64, transcript: &Transcript) -> String {
    let mut out = String::new();
    for ev in &transcript.events {
        let line = EventLine {
            run_id,
            step: ev.step,
            actor: ev.actor,
            kind: ev.kind.clone(),
            payload: ev.payload.clone(),
            qubit_units: ev.qubit_units,
            classical_bits: ev.classical_bits,
        };
        out.push_str(&serde_json::to_string(&line).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Parses newline-delimited event records.
pub fn parse_jsonl(text: &str) -> Result<Vec<EventLine>, TranscriptIoError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str::<EventLine>(l).map_err(TranscriptIoError::from))
        .collect()
}
