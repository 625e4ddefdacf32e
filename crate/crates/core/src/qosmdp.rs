//! Replay of the oblivious set-member decision protocol this toolkit's main
//! protocol descends from: one real register hidden among decoy registers,
//! per-position oracles, and the decoy readout whose sign the oracle itself
//! flips half the time under random mask bits. The replay exists to exhibit
//! that verification gap, so decoy flips are recorded, never aborted on.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

use crate::protocol::{build_database, ceil_log2, mask_database, PartyInput, ProtocolError};
use crate::statevec::{
    measure, superposition_register, BitTable, MeasurementBasis, MeasurementOutcome,
};
use crate::strategies::{apply_measure_resend, BobStrategy};
use crate::transcript::{Actor, Payload, StepId, Transcript};

/// Decoy readout tallies for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecoyStats {
    pub decoys: usize,
    /// pm outcomes disagreeing with the sent (+) sign.
    pub sign_flips: usize,
    pub plus_outcomes: usize,
    pub minus_outcomes: usize,
    pub corrupt_outcomes: usize,
}

#[derive(Debug, Clone)]
pub struct MembershipRun {
    pub transcript: Transcript,
    /// Bob's verdict p(k); `None` when the real register came back
    /// unreducible under an attack.
    pub membership: Option<u8>,
    pub stats: DecoyStats,
}

/// Runs the membership protocol for secret `k` against Bob's set: `l`
/// registers (one real at a random position, `l-1` decoys), oracle `O_t` at
/// wire position `t`, decoy pm readout, reduction and `{+,-}` readout of the
/// real register, then the `(t, q_t)` disclosure and Bob's XOR.
pub fn run_membership_qosmdp<R: Rng + ?Sized>(
    k: usize,
    y: &BTreeSet<usize>,
    modulus: usize,
    l: usize,
    rng: &mut R,
    bob_attack: Option<BobStrategy>,
) -> Result<MembershipRun, ProtocolError> {
    if modulus < 2 {
        return Err(ProtocolError::ModulusTooSmall(modulus));
    }
    if k == 0 || k >= modulus {
        return Err(ProtocolError::ElementOutOfRange { element: k, modulus });
    }
    assert!(l >= 2, "need at least one decoy");
    let y_input = PartyInput::new(y.iter().copied(), modulus)?;
    let m = ceil_log2(modulus).max(1);
    let top = 1usize << (m - 1);

    let mut tr = Transcript::new();
    tr.record(
        StepId::Setup,
        Actor::Channel,
        "membership_instance",
        [
            ("modulus".to_string(), json!(modulus)),
            ("l".to_string(), json!(l)),
            ("set_size".to_string(), json!(y.len())),
        ]
        .into_iter()
        .collect(),
    );

    // Bob's database and masked tables.
    let p = build_database(&y_input);
    let r_bits: Vec<u8> = (0..l).map(|_| rng.gen_range(0..2u8)).collect();
    let tables: Vec<BitTable> = r_bits.iter().map(|&r| mask_database(&p, r)).collect();

    // Alice's registers: the real one plus l-1 decoys, then a permutation.
    #[derive(Clone, Copy)]
    enum Slot {
        Real,
        Decoy { j: usize },
    }
    let mut slots: Vec<Slot> = vec![Slot::Real];
    for _ in 1..l {
        slots.push(Slot::Decoy { j: rng.gen_range(1..modulus) });
    }
    slots.shuffle(rng);
    let mut states: Vec<_> = slots
        .iter()
        .map(|slot| {
            let j = match slot {
                Slot::Real => k,
                Slot::Decoy { j } => *j,
            };
            superposition_register(j, m, 1).expect("element fits register")
        })
        .collect();
    tr.add_register_transfer(l as u64, m as u64);
    tr.record(StepId::SendBatch, Actor::Channel, "registers_sent", Payload::new());

    // Bob: optional attack, then the oracle at each wire position.
    for (idx, state) in states.iter_mut().enumerate() {
        if let Some(BobStrategy::MeasureResend { basis }) = bob_attack {
            let (resent, _) = apply_measure_resend(state, basis, modulus, rng);
            *state = resent;
        }
        *state = state.apply_oracle(&tables[idx]).expect("table fits register");
    }
    tr.record(StepId::Oracle, Actor::Bob, "oracle_applied", Payload::new());
    tr.add_register_transfer(l as u64, m as u64);
    tr.record(StepId::ReturnBatch, Actor::Channel, "registers_returned", Payload::new());

    // Alice: decoy readout in each decoy's own pm basis. Flips are counted,
    // not acted on: under a uniform mask bit the honest oracle flips the
    // sign half the time, which is exactly what the readout cannot separate
    // from tampering.
    let mut stats = DecoyStats::default();
    let mut real_wire = None;
    for (idx, (slot, state)) in slots.iter().zip(&states).enumerate() {
        match slot {
            Slot::Real => real_wire = Some(idx),
            Slot::Decoy { j } => {
                stats.decoys += 1;
                let (outcome, _) =
                    measure(state, MeasurementBasis::PmPair { j: *j }, rng).expect("pm basis");
                match outcome {
                    MeasurementOutcome::PmPlus => stats.plus_outcomes += 1,
                    MeasurementOutcome::PmMinus => {
                        stats.minus_outcomes += 1;
                        stats.sign_flips += 1;
                    }
                    MeasurementOutcome::Corrupt(_) => stats.corrupt_outcomes += 1,
                    _ => unreachable!(),
                }
            }
        }
    }
    tr.record(
        StepId::CheckPhase,
        Actor::Alice,
        "decoys_measured",
        [
            ("decoys".to_string(), json!(stats.decoys)),
            ("sign_flips".to_string(), json!(stats.sign_flips)),
            ("corrupt".to_string(), json!(stats.corrupt_outcomes)),
        ]
        .into_iter()
        .collect(),
    );

    // The real register: reduction and the first-qubit readout.
    let idx = real_wire.expect("exactly one real register");
    let q_bit = match states[idx].reduce_to_plus_minus(k) {
        Ok(reduced) => {
            let (outcome, _) =
                measure(&reduced, MeasurementBasis::PmPair { j: top }, rng).expect("pm basis");
            match outcome {
                MeasurementOutcome::PmPlus => Some(0u8),
                MeasurementOutcome::PmMinus => Some(1),
                _ => None,
            }
        }
        Err(_) => None,
    };
    tr.record(
        StepId::Extract,
        Actor::Alice,
        "real_register_read",
        [("readable".to_string(), json!(q_bit.is_some()))].into_iter().collect(),
    );

    // Disclosure of (t, q_t) and Bob's XOR; the verdict is produced at
    // Bob's place without him learning k.
    let membership = q_bit.map(|q| {
        tr.add_classical_bits((ceil_log2(l) + 1) as u64);
        tr.record(
            StepId::Convey,
            Actor::Alice,
            "t_and_q_disclosed",
            [("t".to_string(), json!(idx + 1))].into_iter().collect(),
        );
        let bit = q ^ r_bits[idx];
        tr.add_classical_bits(1);
        tr.record(
            StepId::Declare,
            Actor::Bob,
            "membership_bit",
            [("bit".to_string(), json!(bit))].into_iter().collect(),
        );
        bit
    });

    Ok(MembershipRun { transcript: tr, membership, stats })
}
