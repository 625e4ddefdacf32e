//! The two-party set-intersection protocol: Alice and Bob actors, a channel,
//! and strategy hooks at every decision point.
//!
//! One run is a strictly sequential dialogue. Alice's private records never
//! cross into Bob's functions: everything Bob touches is passed as bare
//! register states or classical bits, so the information flow of a run is
//! enforced by the signatures.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;
use thiserror::Error;

use crate::keygen::{run_keygen, KeyMaterial, KeygenError, PairSource};
use crate::statevec::{
    measure, superposition_register, BitTable, MeasurementBasis, MeasurementOutcome, StateError,
    Statevector,
};
use crate::strategies::{
    apply_entangle_measure, apply_measure_resend, draw_fake_element, AliceStrategy, AncillaLabel,
    BobStrategy, StrategyError, StrategyProfile,
};
use crate::transcript::{Actor, Payload, StepId, Transcript};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("element {element} outside Z_{modulus}^*")]
    ElementOutOfRange { element: usize, modulus: usize },
    #[error("modulus must be at least 2, got {0}")]
    ModulusTooSmall(usize),
    #[error("party moduli differ: {0} vs {1}")]
    ModulusMismatch(usize, usize),
    #[error("security parameter l={l} violates l >= 2n with n={n}")]
    SecurityParameterTooSmall { l: usize, n: usize },
    #[error(transparent)]
    Keygen(#[from] KeygenError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("cannot sample {needed} distinct elements from Z_{modulus}^*")]
    InfeasibleInstance { needed: usize, modulus: usize },
}

/// A party's private set over `Z_N^*` plus the publicly declared cardinality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyInput {
    elements: BTreeSet<usize>,
    modulus: usize,
    declared_cardinality: usize,
}

impl PartyInput {
    pub fn new<I: IntoIterator<Item = usize>>(
        elements: I,
        modulus: usize,
    ) -> Result<Self, ProtocolError> {
        if modulus < 2 {
            return Err(ProtocolError::ModulusTooSmall(modulus));
        }
        let set: BTreeSet<usize> = elements.into_iter().collect();
        for &e in &set {
            if e == 0 || e >= modulus {
                return Err(ProtocolError::ElementOutOfRange { element: e, modulus });
            }
        }
        let declared = set.len();
        Ok(Self { elements: set, modulus, declared_cardinality: declared })
    }

    pub fn elements(&self) -> &BTreeSet<usize> {
        &self.elements
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn declared_cardinality(&self) -> usize {
        self.declared_cardinality
    }

    pub fn contains(&self, e: usize) -> bool {
        self.elements.contains(&e)
    }

    /// Register width: the smallest M with 2^M >= N.
    pub fn register_width(&self) -> usize {
        ceil_log2(self.modulus).max(1)
    }
}

pub fn ceil_log2(x: usize) -> usize {
    assert!(x >= 1);
    (usize::BITS - (x - 1).leading_zeros()) as usize
}

/// Membership table p(j) = 1 iff j is in Y, with p(0) = 0.
pub fn build_database(y: &PartyInput) -> BitTable {
    BitTable::from_indices(y.modulus, y.elements.iter().copied())
        .expect("validated party input fits its table")
}

/// q_t(j) = p(j) XOR r_t for j >= 1; q_t(0) stays 0.
pub fn mask_database(p: &BitTable, r_t: u8) -> BitTable {
    p.xor_mask(r_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Zero,
    One,
    Plus,
    Minus,
}

impl CheckKind {
    const ALL: [CheckKind; 4] = [CheckKind::Zero, CheckKind::One, CheckKind::Plus, CheckKind::Minus];

    /// Whether Alice reads this check back in the computational basis.
    pub fn is_computational(self) -> bool {
        matches!(self, CheckKind::Zero | CheckKind::One)
    }

    fn state(self, m: usize) -> Statevector {
        let top = 1usize << (m - 1);
        match self {
            CheckKind::Zero => Statevector::zero(m),
            CheckKind::One => Statevector::basis_state(m, top),
            CheckKind::Plus => superposition_register(top, m, 1).expect("top index is valid"),
            CheckKind::Minus => superposition_register(top, m, -1).expect("top index is valid"),
        }
    }
}

/// Alice's private record of one wire slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotRecord {
    Actual { element: usize },
    Check { kind: CheckKind },
}

/// The permuted register sequence plus Alice's private bookkeeping.
#[derive(Debug, Clone)]
pub struct RegisterBatch {
    /// Register states in wire order; this is what travels.
    pub states: Vec<Statevector>,
    /// Alice-private: what she put at each wire position.
    pub records: Vec<SlotRecord>,
    /// Alice-private: wire position -> preparation index.
    pub wire_positions: Vec<usize>,
    pub register_width: usize,
    pub modulus: usize,
}

impl RegisterBatch {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn actual_count(&self) -> usize {
        self.records.iter().filter(|r| matches!(r, SlotRecord::Actual { .. })).count()
    }

    pub fn check_count(&self) -> usize {
        self.len() - self.actual_count()
    }
}

/// Builds the batch: one actual register `(|0⟩+|x_i⟩)/√2` per element, one
/// check register per element with the kind drawn uniformly, then a uniform
/// shuffle. Strategy hooks alter the composition before the shuffle.
pub fn prepare_batch<R: Rng + ?Sized>(
    x: &PartyInput,
    strategy: AliceStrategy,
    rng: &mut R,
) -> Result<RegisterBatch, ProtocolError> {
    let m = x.register_width();
    let n = x.elements.len();
    let mut prepared: Vec<SlotRecord> = x
        .elements
        .iter()
        .map(|&element| SlotRecord::Actual { element })
        .collect();

    let push_fakes = |prepared: &mut Vec<SlotRecord>, count: usize, rng: &mut R| {
        let mut exclude = x.elements.clone();
        for _ in 0..count {
            if let Some(fake) = draw_fake_element(x.modulus, &exclude, rng) {
                exclude.insert(fake);
                prepared.push(SlotRecord::Actual { element: fake });
            }
        }
    };

    match strategy {
        AliceStrategy::NoChecks => {
            // Fake actuals take the check slots; total stays 2n.
            push_fakes(&mut prepared, n, rng);
        }
        AliceStrategy::ExtraElements { count } => {
            push_fakes(&mut prepared, count, rng);
            for _ in 0..n {
                let kind = *CheckKind::ALL.choose(rng).expect("non-empty");
                prepared.push(SlotRecord::Check { kind });
            }
        }
        _ => {
            for _ in 0..n {
                let kind = *CheckKind::ALL.choose(rng).expect("non-empty");
                prepared.push(SlotRecord::Check { kind });
            }
        }
    }

    let mut order: Vec<usize> = (0..prepared.len()).collect();
    order.shuffle(rng);
    let records: Vec<SlotRecord> = order.iter().map(|&i| prepared[i]).collect();
    let states = records
        .iter()
        .map(|rec| match rec {
            SlotRecord::Actual { element } => {
                superposition_register(*element, m, 1).map_err(ProtocolError::from)
            }
            SlotRecord::Check { kind } => Ok(kind.state(m)),
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(RegisterBatch { states, records, wire_positions: order, register_width: m, modulus: x.modulus })
}

/// What Bob's channel attacks gathered during one pass of the batch.
#[derive(Debug, Clone, Default)]
pub struct BobLeakage {
    /// Indices his measurements revealed (claims about Alice's elements).
    pub learned: Vec<usize>,
    /// Ancilla labels of the entangle-measure branches, per register.
    pub ancilla: Vec<AncillaLabel>,
}

/// Bob's receive side: abort on an oversize batch, otherwise attack
/// hooks (if any) followed by the honest oracle `O_t` at wire position `t`.
/// Only the bare register states are accessible here.
pub fn bob_receive_and_oracle<R: Rng + ?Sized>(
    states: &mut [Statevector],
    declared_cardinality: usize,
    tables: &[BitTable],
    strategy: BobStrategy,
    modulus: usize,
    rng: &mut R,
) -> Result<BobLeakage, usize> {
    if states.len() > 2 * declared_cardinality {
        return Err(states.len());
    }
    assert!(tables.len() >= states.len(), "need a table per wire position");
    let mut leakage = BobLeakage::default();
    for (idx, state) in states.iter_mut().enumerate() {
        match strategy {
            BobStrategy::MeasureResend { basis } => {
                let (resent, learned) = apply_measure_resend(state, basis, modulus, rng);
                *state = resent;
                if let Some(i) = learned {
                    leakage.learned.push(i);
                }
            }
            BobStrategy::EntangleMeasure { eta } => {
                let (sent, label) = apply_entangle_measure(state, eta, rng);
                *state = sent;
                leakage.ancilla.push(label);
            }
            BobStrategy::Honest | BobStrategy::WrongPj { .. } => {}
        }
        *state = state.apply_oracle(&tables[idx]).expect("table fits register width");
    }
    Ok(leakage)
}

/// Result of Alice's check-register readout.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckPhaseReport {
    pub computational_checked: usize,
    pub computational_mismatches: usize,
    pub pm_total: usize,
    pub pm_sign_flips: usize,
    pub pm_corrupt: usize,
}

impl CheckPhaseReport {
    pub fn ok(&self) -> bool {
        self.computational_mismatches == 0
    }
}

/// Check phase: zero/one checks are read in the computational basis and
/// compared with what was sent (a global sign is unobservable); plus/minus
/// checks are read in the pm basis and recorded only, since the oracle may
/// legitimately flip their sign. Abort is decided solely by the
/// computational mismatch count.
pub fn alice_check_phase<R: Rng + ?Sized>(batch: &RegisterBatch, rng: &mut R) -> CheckPhaseReport {
    let m = batch.register_width;
    let top = 1usize << (m - 1);
    let mut report = CheckPhaseReport::default();
    for (rec, state) in batch.records.iter().zip(&batch.states) {
        let SlotRecord::Check { kind } = rec else { continue };
        match kind {
            CheckKind::Zero | CheckKind::One => {
                report.computational_checked += 1;
                let expected = if *kind == CheckKind::Zero { 0 } else { top };
                let (outcome, _) = measure(state, MeasurementBasis::Computational, rng)
                    .expect("computational basis");
                if outcome != MeasurementOutcome::Index(expected) {
                    report.computational_mismatches += 1;
                }
            }
            CheckKind::Plus | CheckKind::Minus => {
                report.pm_total += 1;
                let (outcome, _) = measure(state, MeasurementBasis::PmPair { j: top }, rng)
                    .expect("pm basis at top index");
                let sent_plus = *kind == CheckKind::Plus;
                match outcome {
                    MeasurementOutcome::PmPlus if !sent_plus => report.pm_sign_flips += 1,
                    MeasurementOutcome::PmMinus if sent_plus => report.pm_sign_flips += 1,
                    MeasurementOutcome::Corrupt(_) => report.pm_corrupt += 1,
                    _ => {}
                }
            }
        }
    }
    report
}

/// One extracted oracle answer: wire position `t`, the element the register
/// encoded, and the `{+,-}` readout mapped to the bit `q_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractedPair {
    pub wire_position: usize,
    pub element: usize,
    pub q_bit: u8,
}

/// Extraction: per actual register, the SWAP/CNOT reduction and the
/// first-qubit `{+,-}` readout. A register with support outside `{0, j}`
/// cannot be reduced and is reported as a corrupted position.
pub fn alice_extract<R: Rng + ?Sized>(
    batch: &RegisterBatch,
    rng: &mut R,
) -> Result<Vec<ExtractedPair>, usize> {
    let m = batch.register_width;
    let top = 1usize << (m - 1);
    let mut out = Vec::new();
    for (idx, (rec, state)) in batch.records.iter().zip(&batch.states).enumerate() {
        let SlotRecord::Actual { element } = rec else { continue };
        let wire_position = idx + 1;
        let reduced = state.reduce_to_plus_minus(*element).map_err(|_| wire_position)?;
        let (outcome, _) =
            measure(&reduced, MeasurementBasis::PmPair { j: top }, rng).expect("pm basis");
        let q_bit = match outcome {
            MeasurementOutcome::PmPlus => 0,
            MeasurementOutcome::PmMinus => 1,
            MeasurementOutcome::Corrupt(_) => return Err(wire_position),
            _ => unreachable!("pm basis outcomes only"),
        };
        out.push(ExtractedPair { wire_position, element: *element, q_bit });
    }
    Ok(out)
}

/// Declaration: Bob turns each conveyed `(t, q_t)` into a declared `p` bit via
/// `q_t XOR r_t`. A conveyed-pair count different from the common-knowledge
/// cardinality is a visible deviation and aborts. WrongPj upgrades `p = 0`
/// declarations with its configured probability.
pub fn bob_declare<R: Rng + ?Sized>(
    pairs: &[(usize, u8)],
    key: &KeyMaterial,
    declared_cardinality: usize,
    strategy: BobStrategy,
    rng: &mut R,
) -> Result<Vec<u8>, usize> {
    if pairs.len() != declared_cardinality {
        return Err(pairs.len());
    }
    let mut declared = Vec::with_capacity(pairs.len());
    for &(t, q) in pairs {
        assert!(t >= 1 && t <= key.length, "wire position within key stream");
        let mut p = q ^ key.bob_bit(t);
        if let BobStrategy::WrongPj { rate } = strategy {
            if p == 0 && rng.gen::<f64>() < rate {
                p = 1;
            }
        }
        declared.push(p);
    }
    Ok(declared)
}

/// Declaration audit: at every position where Alice knows `r_t` she recomputes `p`
/// from the value she conveyed and compares with Bob's declaration.
pub fn alice_verify_declarations(
    declared: &[u8],
    pairs: &[(usize, u8)],
    key_known: &std::collections::BTreeMap<usize, u8>,
) -> Result<(), usize> {
    for (i, &(t, q)) in pairs.iter().enumerate() {
        if let Some(&r) = key_known.get(&t) {
            if declared[i] != q ^ r {
                return Err(i);
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct AnnounceResult {
    pub announced: Vec<usize>,
    /// (replaced element, substitute) when the WrongAnnounce hook fired.
    pub substitution: Option<(usize, usize)>,
}

/// Announcement: Alice declares the element behind every declared-1 position.
/// WrongAnnounce substitutes one announcement with a uniform draw from
/// `Z_N^* \ X`.
pub fn alice_announce<R: Rng + ?Sized>(
    declared: &[u8],
    extracted: &[ExtractedPair],
    x: &PartyInput,
    strategy: AliceStrategy,
    rng: &mut R,
) -> AnnounceResult {
    assert_eq!(declared.len(), extracted.len());
    let mut announced: Vec<usize> = extracted
        .iter()
        .zip(declared)
        .filter(|(_, &d)| d == 1)
        .map(|(pair, _)| pair.element)
        .collect();
    let mut substitution = None;
    if let AliceStrategy::WrongAnnounce { rate } = strategy {
        if !announced.is_empty() && rng.gen::<f64>() < rate {
            let victim = rng.gen_range(0..announced.len());
            if let Some(substitute) = draw_fake_element(x.modulus, &x.elements, rng) {
                substitution = Some((announced[victim], substitute));
                announced[victim] = substitute;
            }
        }
    }
    AnnounceResult { announced, substitution }
}

/// Membership check: Bob rejects any announced element outside his set. A WrongPj Bob
/// skips his own check; the announcements are what he deviated for.
pub fn bob_verify_membership(
    announced: &[usize],
    y: &PartyInput,
    strategy: BobStrategy,
) -> Result<(), usize> {
    if matches!(strategy, BobStrategy::WrongPj { .. }) {
        return Ok(());
    }
    match announced.iter().find(|&&e| !y.contains(e)) {
        Some(&e) => Err(e),
        None => Ok(()),
    }
}

/// Final holdings. `None` is ⊥; any abort maps both sides to ⊥.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub f_alice: Option<BTreeSet<usize>>,
    pub f_bob: Option<BTreeSet<usize>>,
}

impl Outcome {
    pub fn aborted() -> Self {
        Self { f_alice: None, f_bob: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Key-stream length; must satisfy l >= 2n.
    pub l: usize,
    /// Pair angle, radians.
    pub theta: f64,
    /// Depolarizing probability on Alice's keygen qubits.
    pub noise: f64,
    /// Keygen abort threshold on the observed error rate.
    pub threshold: f64,
}

impl ProtocolParams {
    pub fn new(l: usize, theta: f64) -> Self {
        Self { l, theta, noise: 0.0, threshold: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub transcript: Transcript,
    pub outcome: Outcome,
}

fn payload(entries: &[(&str, serde_json::Value)]) -> Payload {
    entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Runs the whole protocol: key generation, batch preparation, the oracle
/// pass, check phase, extraction, the classical tail, and outcome assembly,
/// with the profile's hooks applied at each decision point.
pub fn run_protocol<R: Rng + ?Sized>(
    x: &PartyInput,
    y: &PartyInput,
    params: &ProtocolParams,
    profile: &StrategyProfile,
    rng: &mut R,
) -> Result<RunResult, ProtocolError> {
    profile.validate()?;
    if x.modulus != y.modulus {
        return Err(ProtocolError::ModulusMismatch(x.modulus, y.modulus));
    }
    let n = x.declared_cardinality;
    if params.l < 2 * n || params.l == 0 {
        return Err(ProtocolError::SecurityParameterTooSmall { l: params.l, n });
    }
    let modulus = x.modulus;
    let m = x.register_width();
    let mut tr = Transcript::new();
    tr.record(
        StepId::Setup,
        Actor::Channel,
        "instance",
        payload(&[
            ("modulus", json!(modulus)),
            ("n", json!(n)),
            ("m", json!(y.declared_cardinality)),
            ("l", json!(params.l)),
            ("theta", json!(params.theta)),
            ("alice_strategy", json!(profile.alice.to_string())),
            ("bob_strategy", json!(profile.bob.to_string())),
        ]),
    );

    // Key generation: 2l single-qubit transfers from Bob to Alice.
    let source = PairSource::new(params.theta, params.noise)?;
    let key = run_keygen(params.l, &source, params.threshold, rng, None)?;
    tr.add_register_transfer(2 * params.l as u64, 1);
    tr.record(
        StepId::Keygen,
        Actor::Channel,
        "keygen_complete",
        payload(&[
            ("error_rate", json!(key.error_rate)),
            ("known_fraction", json!(key.known_fraction())),
        ]),
    );
    if key.aborted {
        tr.abort(StepId::Keygen, Actor::Bob, "keygen_error_rate");
        return Ok(RunResult { transcript: tr, outcome: Outcome::aborted() });
    }

    let p_table = build_database(y);
    let tables: Vec<BitTable> =
        (1..=params.l).map(|t| mask_database(&p_table, key.bob_bit(t))).collect();

    // Alice prepares and transmits the permuted batch.
    let mut batch = prepare_batch(x, profile.alice, rng)?;
    tr.record(
        StepId::Prepare,
        Actor::Alice,
        "batch_prepared",
        payload(&[
            ("slots", json!(batch.len())),
            ("actuals", json!(batch.actual_count())),
            ("checks", json!(batch.check_count())),
        ]),
    );
    tr.add_register_transfer(batch.len() as u64, m as u64);
    tr.record(StepId::SendBatch, Actor::Channel, "registers_sent", Payload::new());

    // Bob: size check, optional attack, oracle, return.
    let leakage = match bob_receive_and_oracle(
        &mut batch.states,
        n,
        &tables,
        profile.bob,
        modulus,
        rng,
    ) {
        Ok(leakage) => leakage,
        Err(got) => {
            tr.record(
                StepId::SizeCheck,
                Actor::Bob,
                "oversize_batch",
                payload(&[("received", json!(got)), ("limit", json!(2 * n))]),
            );
            tr.abort(StepId::SizeCheck, Actor::Bob, "oversize_batch");
            return Ok(RunResult { transcript: tr, outcome: Outcome::aborted() });
        }
    };
    tr.record(
        StepId::Oracle,
        Actor::Bob,
        "oracle_applied",
        payload(&[("registers", json!(batch.len()))]),
    );
    tr.add_register_transfer(batch.len() as u64, m as u64);
    tr.record(StepId::ReturnBatch, Actor::Channel, "registers_returned", Payload::new());

    // Alice: check registers first.
    let report = alice_check_phase(&batch, rng);
    tr.record(
        StepId::CheckPhase,
        Actor::Alice,
        "checks_measured",
        payload(&[
            ("computational_checked", json!(report.computational_checked)),
            ("computational_mismatches", json!(report.computational_mismatches)),
            ("pm_total", json!(report.pm_total)),
            ("pm_sign_flips", json!(report.pm_sign_flips)),
            ("pm_corrupt", json!(report.pm_corrupt)),
        ]),
    );
    if !report.ok() {
        tr.abort(StepId::CheckPhase, Actor::Alice, "check_mismatch");
        return Ok(RunResult { transcript: tr, outcome: Outcome::aborted() });
    }

    // Extraction of every actual register.
    let extracted = match alice_extract(&batch, rng) {
        Ok(pairs) => pairs,
        Err(wire_position) => {
            tr.record(
                StepId::Extract,
                Actor::Alice,
                "protocol_failure",
                payload(&[("wire_position", json!(wire_position))]),
            );
            tr.abort(StepId::Extract, Actor::Alice, "corrupt_register");
            return Ok(RunResult { transcript: tr, outcome: Outcome::aborted() });
        }
    };
    tr.record(
        StepId::Extract,
        Actor::Alice,
        "bits_extracted",
        payload(&[("count", json!(extracted.len()))]),
    );

    // Convey (t, q_t), with the WrongQt hook flipping eligible
    // positions (known r_t and locally computed p = 1).
    let mut lied = 0usize;
    let conveyed: Vec<(usize, u8)> = extracted
        .iter()
        .map(|pair| {
            let mut q = pair.q_bit;
            if let AliceStrategy::WrongQt { rate } = profile.alice {
                if let Some(&r) = key.alice_known.get(&pair.wire_position) {
                    if q ^ r == 1 && rng.gen::<f64>() < rate {
                        q ^= 1;
                        lied += 1;
                    }
                }
            }
            (pair.wire_position, q)
        })
        .collect();
    tr.add_classical_bits((conveyed.len() * (ceil_log2(params.l) + 1)) as u64);
    tr.record(
        StepId::Convey,
        Actor::Alice,
        "q_values_conveyed",
        payload(&[("count", json!(conveyed.len())), ("lied", json!(lied))]),
    );

    // Bob declares.
    let declared = match bob_declare(&conveyed, &key, n, profile.bob, rng) {
        Ok(declared) => declared,
        Err(got) => {
            tr.record(
                StepId::Declare,
                Actor::Bob,
                "convey_count_mismatch",
                payload(&[("received", json!(got)), ("expected", json!(n))]),
            );
            tr.abort(StepId::Declare, Actor::Bob, "convey_count_mismatch");
            return Ok(RunResult { transcript: tr, outcome: Outcome::aborted() });
        }
    };
    tr.add_classical_bits(declared.len() as u64);
    tr.record(
        StepId::Declare,
        Actor::Bob,
        "p_declared",
        payload(&[
            ("count", json!(declared.len())),
            ("ones", json!(declared.iter().filter(|&&d| d == 1).count())),
        ]),
    );

    // Alice verifies where she can.
    if let Err(position) = alice_verify_declarations(&declared, &conveyed, &key.alice_known) {
        tr.record(
            StepId::VerifyDeclarations,
            Actor::Alice,
            "declaration_mismatch",
            payload(&[("pair_index", json!(position))]),
        );
        tr.abort(StepId::VerifyDeclarations, Actor::Alice, "declaration_mismatch");
        return Ok(RunResult { transcript: tr, outcome: Outcome::aborted() });
    }
    tr.record(StepId::VerifyDeclarations, Actor::Alice, "declarations_ok", Payload::new());

    // Announcement.
    let announce = alice_announce(&declared, &extracted, x, profile.alice, rng);
    tr.add_classical_bits((announce.announced.len() * ceil_log2(modulus)) as u64);
    tr.record(
        StepId::Announce,
        Actor::Alice,
        "elements_announced",
        payload(&[
            ("count", json!(announce.announced.len())),
            ("substituted", json!(announce.substitution.is_some())),
        ]),
    );

    // Bob's membership check.
    if let Err(element) = bob_verify_membership(&announce.announced, y, profile.bob) {
        tr.record(
            StepId::MembershipCheck,
            Actor::Bob,
            "announced_not_in_set",
            payload(&[("element", json!(element))]),
        );
        tr.abort(StepId::MembershipCheck, Actor::Bob, "announced_not_in_set");
        return Ok(RunResult { transcript: tr, outcome: Outcome::aborted() });
    }
    tr.record(StepId::MembershipCheck, Actor::Bob, "membership_ok", Payload::new());

    // Outcome assembly. Alice holds the elements the declarations marked as
    // members; Bob holds the announced set plus whatever his attacks
    // measured out of the registers.
    let f_alice: BTreeSet<usize> = extracted
        .iter()
        .zip(&declared)
        .filter(|(_, &d)| d == 1)
        .map(|(pair, _)| pair.element)
        .collect();
    let mut f_bob: BTreeSet<usize> = announce.announced.iter().copied().collect();
    f_bob.extend(leakage.learned.iter().copied());
    let outcome = Outcome { f_alice: Some(f_alice), f_bob: Some(f_bob) };
    tr.record(
        StepId::Outcome,
        Actor::Channel,
        "outcome",
        payload(&[
            ("f_alice", json!(outcome.f_alice.as_ref().unwrap().iter().collect::<Vec<_>>())),
            ("f_bob", json!(outcome.f_bob.as_ref().unwrap().iter().collect::<Vec<_>>())),
        ]),
    );
    Ok(RunResult { transcript: tr, outcome })
}

/// Samples disjoint-complement sets X, Y of sizes n, m with |X∩Y| = u,
/// uniformly over Z_N^*.
pub fn sample_instance<R: Rng + ?Sized>(
    modulus: usize,
    n: usize,
    m: usize,
    u: usize,
    rng: &mut R,
) -> Result<(PartyInput, PartyInput), ProtocolError> {
    assert!(u <= n.min(m), "intersection cannot exceed either set");
    let needed = n + m - u;
    if needed > modulus - 1 {
        return Err(ProtocolError::InfeasibleInstance { needed, modulus });
    }
    let picks = rand::seq::index::sample(rng, modulus - 1, needed);
    let pool: Vec<usize> = picks.iter().map(|i| i + 1).collect();
    let shared = &pool[..u];
    let x_only = &pool[u..u + (n - u)];
    let y_only = &pool[u + (n - u)..];
    let x = PartyInput::new(shared.iter().chain(x_only).copied(), modulus)?;
    let y = PartyInput::new(shared.iter().chain(y_only).copied(), modulus)?;
    Ok((x, y))
}

/// Brute-force intersection used as the oracle for completeness checks.
pub fn true_intersection(x: &PartyInput, y: &PartyInput) -> BTreeSet<usize> {
    x.elements.intersection(&y.elements).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::within_four_sigma;
    use crate::strategies::ResendBasis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::FRAC_PI_4;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn honest() -> StrategyProfile {
        StrategyProfile::honest()
    }

    #[test]
    fn database_is_membership_indicator() {
        let y = PartyInput::new([2, 5], 8).unwrap();
        let p = build_database(&y);
        assert_eq!((0..8).map(|j| p.get(j)).collect::<Vec<_>>(), vec![0, 0, 1, 0, 0, 1, 0, 0]);

        let empty = PartyInput::new([], 8).unwrap();
        assert_eq!((0..8).map(|j| build_database(&empty).get(j)).sum::<u8>(), 0);

        assert!(matches!(
            PartyInput::new([0, 3], 8),
            Err(ProtocolError::ElementOutOfRange { element: 0, .. })
        ));
        assert!(PartyInput::new([8], 8).is_err());
    }

    #[test]
    fn mask_is_involution() {
        let y = PartyInput::new([2], 4).unwrap();
        let p = build_database(&y);
        assert_eq!(mask_database(&p, 0), p);
        let q = mask_database(&p, 1);
        assert_eq!((0..4).map(|j| q.get(j)).collect::<Vec<_>>(), vec![0, 1, 0, 1]);
        assert_eq!(mask_database(&q, 1), p);
    }

    #[test]
    fn honest_batch_has_expected_shape() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let batch = prepare_batch(&x, AliceStrategy::Honest, &mut rng(4)).unwrap();
        assert_eq!(batch.len(), 6);
        assert_eq!(batch.actual_count(), 3);
        assert_eq!(batch.check_count(), 3);
        assert_eq!(batch.register_width, 5);

        // Check-state amplitudes match their kind definitions exactly.
        let m = batch.register_width;
        let top = 1usize << (m - 1);
        for (rec, state) in batch.records.iter().zip(&batch.states) {
            match rec {
                SlotRecord::Actual { element } => {
                    assert_eq!(state, &superposition_register(*element, m, 1).unwrap());
                    assert!(x.contains(*element));
                }
                SlotRecord::Check { kind } => {
                    let expected = match kind {
                        CheckKind::Zero => Statevector::zero(m),
                        CheckKind::One => Statevector::basis_state(m, top),
                        CheckKind::Plus => superposition_register(top, m, 1).unwrap(),
                        CheckKind::Minus => superposition_register(top, m, -1).unwrap(),
                    };
                    assert_eq!(state, &expected);
                }
            }
        }
    }

    #[test]
    fn extra_elements_inflates_batch() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let strategy = AliceStrategy::ExtraElements { count: 3 };
        let batch = prepare_batch(&x, strategy, &mut rng(4)).unwrap();
        assert_eq!(batch.len(), 9);
        assert_eq!(batch.actual_count(), 6);
        // Fakes never collide with real elements.
        let fakes: Vec<usize> = batch
            .records
            .iter()
            .filter_map(|r| match r {
                SlotRecord::Actual { element } if !x.contains(*element) => Some(*element),
                _ => None,
            })
            .collect();
        assert_eq!(fakes.len(), 3);
    }

    #[test]
    fn no_checks_replaces_checks_with_fakes() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let batch = prepare_batch(&x, AliceStrategy::NoChecks, &mut rng(4)).unwrap();
        assert_eq!(batch.len(), 6);
        assert_eq!(batch.actual_count(), 6);
        assert_eq!(batch.check_count(), 0);
    }

    #[test]
    fn oracle_pass_flips_marked_actuals_only() {
        let x = PartyInput::new([5], 8).unwrap();
        let y = PartyInput::new([5], 8).unwrap();
        let p = build_database(&y);
        let mut batch = prepare_batch(&x, AliceStrategy::Honest, &mut rng(6)).unwrap();
        // r_t = 0 for both wire positions: q_t = p, so q_t(5) = 1.
        let tables = vec![p.clone(), p.clone()];
        let leak = bob_receive_and_oracle(
            &mut batch.states,
            1,
            &tables,
            BobStrategy::Honest,
            8,
            &mut rng(7),
        )
        .unwrap();
        assert!(leak.learned.is_empty());
        for (rec, state) in batch.records.iter().zip(&batch.states) {
            match rec {
                SlotRecord::Actual { element } => {
                    assert_eq!(state, &superposition_register(*element, 3, -1).unwrap());
                }
                SlotRecord::Check { kind: CheckKind::Zero } => {
                    assert_eq!(state, &Statevector::zero(3));
                }
                _ => {}
            }
        }
    }

    #[test]
    fn oversize_batch_aborts() {
        let x = PartyInput::new([3, 5], 16).unwrap();
        let strategy = AliceStrategy::ExtraElements { count: 1 };
        let mut batch = prepare_batch(&x, strategy, &mut rng(2)).unwrap();
        let tables: Vec<BitTable> = (0..8).map(|_| BitTable::zeros(16)).collect();
        let res = bob_receive_and_oracle(
            &mut batch.states,
            2,
            &tables,
            BobStrategy::Honest,
            16,
            &mut rng(3),
        );
        assert_eq!(res.err(), Some(5));
    }

    #[test]
    fn check_phase_never_false_positives_exhaustively() {
        // All membership tables and both mask bits at small width: the
        // oracle acts as identity or global phase on computational checks.
        for m in [2usize, 3] {
            let dim = 1usize << m;
            for mask in 0..(1usize << (dim - 1)) {
                let ones = (1..dim).filter(|j| mask >> (j - 1) & 1 == 1);
                let p = BitTable::from_indices(dim, ones).unwrap();
                for r in [0u8, 1] {
                    let q = mask_database(&p, r);
                    for kind in CheckKind::ALL {
                        let state = kind.state(m).apply_oracle(&q).unwrap();
                        let batch = RegisterBatch {
                            states: vec![state],
                            records: vec![SlotRecord::Check { kind }],
                            wire_positions: vec![0],
                            register_width: m,
                            modulus: dim,
                        };
                        let report = alice_check_phase(&batch, &mut rng(1));
                        assert!(report.ok(), "m={m} mask={mask} r={r} kind={kind:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn measure_resend_pm_flags_zero_checks_half_the_time() {
        let trials = 8_000;
        let mut r = rng(11);
        let mut mismatches = 0usize;
        for _ in 0..trials {
            let mut states = vec![Statevector::zero(4)];
            let tables = vec![BitTable::zeros(16)];
            bob_receive_and_oracle(
                &mut states,
                1,
                &tables,
                BobStrategy::MeasureResend { basis: ResendBasis::Pm },
                16,
                &mut r,
            )
            .unwrap();
            let batch = RegisterBatch {
                states,
                records: vec![SlotRecord::Check { kind: CheckKind::Zero }],
                wire_positions: vec![0],
                register_width: 4,
                modulus: 16,
            };
            if !alice_check_phase(&batch, &mut r).ok() {
                mismatches += 1;
            }
        }
        assert!(within_four_sigma(mismatches as f64 / trials as f64, 0.5, trials));
    }

    #[test]
    fn entangle_measure_detection_rates() {
        // Per computational check: mismatch probability 1-η. Overall
        // detection over c computational checks: 1 - η^c.
        let eta = 0.9;
        let trials = 10_000;
        let mut r = rng(13);
        let mut per_check_mismatch = 0usize;
        for _ in 0..trials {
            let mut states = vec![Statevector::zero(4)];
            let tables = vec![BitTable::zeros(16)];
            bob_receive_and_oracle(
                &mut states,
                1,
                &tables,
                BobStrategy::EntangleMeasure { eta },
                16,
                &mut r,
            )
            .unwrap();
            let batch = RegisterBatch {
                states,
                records: vec![SlotRecord::Check { kind: CheckKind::Zero }],
                wire_positions: vec![0],
                register_width: 4,
                modulus: 16,
            };
            if !alice_check_phase(&batch, &mut r).ok() {
                per_check_mismatch += 1;
            }
        }
        assert!(within_four_sigma(per_check_mismatch as f64 / trials as f64, 1.0 - eta, trials));

        // Overall detection with c = 4 computational checks per run.
        let c = 4usize;
        let runs = 10_000;
        let mut detected = 0usize;
        for _ in 0..runs {
            let mut states: Vec<Statevector> = (0..c)
                .map(|i| if i % 2 == 0 { Statevector::zero(4) } else { Statevector::basis_state(4, 8) })
                .collect();
            let tables: Vec<BitTable> = (0..c).map(|_| BitTable::zeros(16)).collect();
            bob_receive_and_oracle(
                &mut states,
                c,
                &tables,
                BobStrategy::EntangleMeasure { eta },
                16,
                &mut r,
            )
            .unwrap();
            let records: Vec<SlotRecord> = (0..c)
                .map(|i| SlotRecord::Check {
                    kind: if i % 2 == 0 { CheckKind::Zero } else { CheckKind::One },
                })
                .collect();
            let batch = RegisterBatch {
                states,
                records,
                wire_positions: (0..c).collect(),
                register_width: 4,
                modulus: 16,
            };
            if !alice_check_phase(&batch, &mut r).ok() {
                detected += 1;
            }
        }
        let expect = 1.0 - eta.powi(c as i32);
        assert!(within_four_sigma(detected as f64 / runs as f64, expect, runs));
    }

    #[test]
    fn extraction_identity_exhaustive_small_moduli() {
        // Every extracted bit equals p(x) XOR r_t across whole-instance
        // sweeps at N <= 32.
        let mut r = rng(17);
        for modulus in [4usize, 8, 16, 32] {
            for _ in 0..25 {
                let max_n = ((modulus - 1) / 3).clamp(1, 4);
                let n = r.gen_range(1..=max_n);
                let m_cnt = r.gen_range(1..=max_n);
                let u = r.gen_range(0..=n.min(m_cnt));
                let (x, y) = sample_instance(modulus, n, m_cnt, u, &mut r).unwrap();
                let p = build_database(&y);
                let mut batch = prepare_batch(&x, AliceStrategy::Honest, &mut r).unwrap();
                let bits: Vec<u8> = (0..batch.len()).map(|_| r.gen_range(0..2u8)).collect();
                let tables: Vec<BitTable> =
                    bits.iter().map(|&b| mask_database(&p, b)).collect();
                bob_receive_and_oracle(
                    &mut batch.states,
                    n,
                    &tables,
                    BobStrategy::Honest,
                    modulus,
                    &mut r,
                )
                .unwrap();
                let extracted = alice_extract(&batch, &mut r).unwrap();
                assert_eq!(extracted.len(), n);
                for pair in extracted {
                    let expect = p.get(pair.element) ^ bits[pair.wire_position - 1];
                    assert_eq!(pair.q_bit, expect);
                }
            }
        }
    }

    #[test]
    fn declare_and_verify_paths() {
        let key = KeyMaterial {
            length: 4,
            bob_bits: vec![1, 0, 1, 0],
            alice_known: [(1usize, 1u8), (3, 1)].into_iter().collect(),
            theta: FRAC_PI_4,
            error_rate: 0.0,
            aborted: false,
        };
        // q_t = 1 at t = 1 with r_1 = 1 gives p = 0.
        let pairs = vec![(1usize, 1u8), (2, 1), (3, 0)];
        let declared =
            bob_declare(&pairs, &key, 3, BobStrategy::Honest, &mut rng(1)).unwrap();
        assert_eq!(declared, vec![0, 1, 1]);
        assert!(alice_verify_declarations(&declared, &pairs, &key.alice_known).is_ok());

        // A lie at a known position is caught.
        let mut lied = declared.clone();
        lied[0] = 1;
        assert_eq!(alice_verify_declarations(&lied, &pairs, &key.alice_known), Err(0));

        // A lie at an unknown position is not.
        let mut hidden = declared;
        hidden[1] ^= 1;
        assert!(alice_verify_declarations(&hidden, &pairs, &key.alice_known).is_ok());

        // Wrong conveyed-pair count aborts.
        assert_eq!(bob_declare(&pairs, &key, 2, BobStrategy::Honest, &mut rng(1)).err(), Some(3));

        // WrongPj(1.0) declares 1 everywhere.
        let all_ones =
            bob_declare(&pairs, &key, 3, BobStrategy::WrongPj { rate: 1.0 }, &mut rng(1)).unwrap();
        assert_eq!(all_ones, vec![1, 1, 1]);
    }

    #[test]
    fn announce_and_membership_paths() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let extracted = vec![
            ExtractedPair { wire_position: 1, element: 5, q_bit: 0 },
            ExtractedPair { wire_position: 2, element: 3, q_bit: 1 },
            ExtractedPair { wire_position: 3, element: 7, q_bit: 0 },
        ];
        let declared = vec![1, 0, 1];
        let res = alice_announce(&declared, &extracted, &x, AliceStrategy::Honest, &mut rng(1));
        assert_eq!(res.announced, vec![5, 7]);
        assert!(res.substitution.is_none());

        let y = PartyInput::new([5, 7, 9], 32).unwrap();
        assert!(bob_verify_membership(&res.announced, &y, BobStrategy::Honest).is_ok());
        assert_eq!(bob_verify_membership(&[5, 11], &y, BobStrategy::Honest), Err(11));
        // An element of C2 = Y \ (X∩Y) passes the check even though it is
        // wrong for the functionality.
        assert!(bob_verify_membership(&[5, 9], &y, BobStrategy::Honest).is_ok());
    }

    #[test]
    fn wrong_announce_substitute_lands_outside_x() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let extracted = vec![ExtractedPair { wire_position: 1, element: 5, q_bit: 0 }];
        let declared = vec![1];
        let mut r = rng(9);
        for _ in 0..200 {
            let res = alice_announce(
                &declared,
                &extracted,
                &x,
                AliceStrategy::WrongAnnounce { rate: 1.0 },
                &mut r,
            );
            let (victim, substitute) = res.substitution.unwrap();
            assert_eq!(victim, 5);
            assert!(!x.contains(substitute));
            assert_eq!(res.announced, vec![substitute]);
        }
    }

    #[test]
    fn substitute_hits_c1_with_counted_probability() {
        // N=32, n=4, m=4, u=2: Pr(e in C1) = 25/27.
        let mut r = rng(23);
        let trials = 20_000;
        let mut c1 = 0usize;
        let (x, y) = sample_instance(32, 4, 4, 2, &mut r).unwrap();
        let truth = true_intersection(&x, &y);
        assert_eq!(truth.len(), 2);
        for _ in 0..trials {
            let e = draw_fake_element(32, x.elements(), &mut r).unwrap();
            if !y.contains(e) {
                c1 += 1;
            }
        }
        assert!(within_four_sigma(c1 as f64 / trials as f64, 25.0 / 27.0, trials));
    }

    #[test]
    fn honest_run_recovers_intersection() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let y = PartyInput::new([5, 7, 9], 32).unwrap();
        let params = ProtocolParams::new(8, FRAC_PI_4);
        let result = run_protocol(&x, &y, &params, &honest(), &mut rng(31)).unwrap();
        let expect: BTreeSet<usize> = [5, 7].into_iter().collect();
        assert!(!result.transcript.is_aborted());
        assert_eq!(result.outcome.f_alice, Some(expect.clone()));
        assert_eq!(result.outcome.f_bob, Some(expect));
    }

    #[test]
    fn honest_disjoint_sets_announce_nothing() {
        let x = PartyInput::new([1, 2], 16).unwrap();
        let y = PartyInput::new([9, 10], 16).unwrap();
        let params = ProtocolParams::new(4, FRAC_PI_4);
        let result = run_protocol(&x, &y, &params, &honest(), &mut rng(33)).unwrap();
        assert!(!result.transcript.is_aborted());
        assert_eq!(result.outcome.f_alice, Some(BTreeSet::new()));
        assert_eq!(result.outcome.f_bob, Some(BTreeSet::new()));
    }

    #[test]
    fn communication_counters_match_closed_forms() {
        // n=4, l=16, u=2, N=16: 4n+2l = 48 register units and
        // n(log l + 2) + u log N = 32 classical bits.
        let mut r = rng(37);
        let (x, y) = sample_instance(16, 4, 4, 2, &mut r).unwrap();
        let params = ProtocolParams::new(16, FRAC_PI_4);
        let result = run_protocol(&x, &y, &params, &honest(), &mut r).unwrap();
        assert!(!result.transcript.is_aborted());
        assert_eq!(result.transcript.qubit_units, 48);
        assert_eq!(result.transcript.classical_bits, 32);
        // Physical-qubit counter: 2l keygen qubits + 4n registers of M=4.
        assert_eq!(result.transcript.physical_qubits, 32 + 16 * 4);
    }

    #[test]
    fn honest_completeness_sweep() {
        let mut r = rng(41);
        for _ in 0..50 {
            let modulus = *[16usize, 32, 64].choose(&mut r).unwrap();
            let (n, m_cnt) = loop {
                let n = r.gen_range(1..=6usize);
                let m = r.gen_range(1..=6usize);
                if n + m < (modulus - 1) / 2 {
                    break (n, m);
                }
            };
            let u = r.gen_range(0..=n.min(m_cnt));
            let (x, y) = sample_instance(modulus, n, m_cnt, u, &mut r).unwrap();
            let truth = true_intersection(&x, &y);
            let params = ProtocolParams::new((2 * n).max(4), FRAC_PI_4);
            let result = run_protocol(&x, &y, &params, &honest(), &mut r).unwrap();
            assert!(!result.transcript.is_aborted());
            assert_eq!(result.outcome.f_alice, Some(truth.clone()));
            assert_eq!(result.outcome.f_bob, Some(truth));
        }
    }

    #[test]
    fn extra_elements_always_aborts_at_size_check() {
        let mut r = rng(43);
        let (x, y) = sample_instance(32, 3, 3, 1, &mut r).unwrap();
        let params = ProtocolParams::new(8, FRAC_PI_4);
        let profile = StrategyProfile {
            alice: AliceStrategy::ExtraElements { count: 3 },
            bob: BobStrategy::Honest,
        };
        for seed in 0..20 {
            let result = run_protocol(&x, &y, &params, &profile, &mut rng(seed)).unwrap();
            let abort = result.transcript.abort.expect("must abort");
            assert_eq!(abort.step, StepId::SizeCheck);
            assert_eq!(result.outcome, Outcome::aborted());
            assert_eq!(result.transcript.events.last().unwrap().kind, "abort");
        }
    }

    #[test]
    fn no_checks_aborts_at_declare() {
        let mut r = rng(47);
        let (x, y) = sample_instance(32, 3, 3, 1, &mut r).unwrap();
        let params = ProtocolParams::new(8, FRAC_PI_4);
        let profile =
            StrategyProfile { alice: AliceStrategy::NoChecks, bob: BobStrategy::Honest };
        for seed in 0..20 {
            let result = run_protocol(&x, &y, &params, &profile, &mut rng(seed)).unwrap();
            let abort = result.transcript.abort.expect("must abort");
            assert_eq!(abort.step, StepId::Declare);
            assert_eq!(abort.reason, "convey_count_mismatch");
        }
    }

    #[test]
    fn wrong_pj_detection_matches_closed_form() {
        // u = 0 instances: every declaration is a lie, so the catch
        // probability is 1-(1-f)^n with f = sin²θ/2 the known fraction.
        let theta = FRAC_PI_4;
        let n = 4usize;
        let runs = 6_000;
        let mut caught = 0usize;
        let mut r = rng(53);
        let (x, y) = sample_instance(32, n, 4, 0, &mut r).unwrap();
        let params = ProtocolParams::new(2 * n, theta);
        let profile = StrategyProfile {
            alice: AliceStrategy::Honest,
            bob: BobStrategy::WrongPj { rate: 1.0 },
        };
        for _ in 0..runs {
            let result = run_protocol(&x, &y, &params, &profile, &mut r).unwrap();
            match &result.transcript.abort {
                Some(info) if info.step == StepId::VerifyDeclarations => caught += 1,
                Some(other) => panic!("unexpected abort {other:?}"),
                None => {}
            }
        }
        let f = crate::keygen::conclusive_rate(theta);
        let expect = 1.0 - (1.0 - f).powi(n as i32);
        assert!(
            within_four_sigma(caught as f64 / runs as f64, expect, runs),
            "caught {} expect {expect}",
            caught as f64 / runs as f64
        );
    }

    #[test]
    fn seeded_runs_are_byte_identical() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let y = PartyInput::new([5, 7, 9], 32).unwrap();
        let params = ProtocolParams::new(8, FRAC_PI_4);
        let a = run_protocol(&x, &y, &params, &honest(), &mut rng(61)).unwrap();
        let b = run_protocol(&x, &y, &params, &honest(), &mut rng(61)).unwrap();
        assert_eq!(
            crate::transcript::to_jsonl(0, &a.transcript),
            crate::transcript::to_jsonl(0, &b.transcript)
        );
        assert_eq!(a.outcome, b.outcome);
    }

    #[test]
    fn preconditions_are_hard_errors() {
        let x = PartyInput::new([3, 5, 7], 32).unwrap();
        let y = PartyInput::new([5], 32).unwrap();
        let params = ProtocolParams::new(5, FRAC_PI_4);
        assert!(matches!(
            run_protocol(&x, &y, &params, &honest(), &mut rng(1)),
            Err(ProtocolError::SecurityParameterTooSmall { l: 5, n: 3 })
        ));
        let y16 = PartyInput::new([5], 16).unwrap();
        let params = ProtocolParams::new(8, FRAC_PI_4);
        assert!(matches!(
            run_protocol(&x, &y16, &params, &honest(), &mut rng(1)),
            Err(ProtocolError::ModulusMismatch(32, 16))
        ));
    }

    #[test]
    fn keygen_noise_aborts_protocol() {
        let mut r = rng(67);
        let (x, y) = sample_instance(16, 2, 2, 1, &mut r).unwrap();
        let params = ProtocolParams { l: 512, theta: FRAC_PI_4, noise: 0.5, threshold: 0.05 };
        let result = run_protocol(&x, &y, &params, &honest(), &mut r).unwrap();
        let abort = result.transcript.abort.expect("noise must abort");
        assert_eq!(abort.step, StepId::Keygen);
        assert_eq!(result.outcome, Outcome::aborted());
    }
}
