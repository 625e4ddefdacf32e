//! Catalog of player behaviors: the suggested (cooperate, abort) strategy
//! and the deviations and channel attacks the protocol runner can inject.
//!
//! Strategies are plain data; the protocol runner dispatches on them at each
//! decision point. The two quantum attacks are implemented here as pure
//! functions of (state, rng) so the runner can apply them per register.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::statevec::{measure, MeasurementBasis, MeasurementOutcome, Statevector, NORM_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("rate {0} outside (0, 1]")]
    BadRate(f64),
    #[error("eta {0} outside [0, 1]")]
    BadEta(f64),
    #[error("extra-element count must be at least 1")]
    BadCount,
    #[error("unknown strategy descriptor `{0}`")]
    UnknownDescriptor(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AliceStrategy {
    Honest,
    /// Insert `count` fake elements beyond the declared cardinality.
    ExtraElements { count: usize },
    /// Replace every check register with a fake actual register.
    NoChecks,
    /// Flip the conveyed q_t, with the given probability, at positions where
    /// Alice knows r_t and computed p(j)=1.
    WrongQt { rate: f64 },
    /// With the given probability, substitute one announced element with a
    /// uniform draw from Z_N^* \ X.
    WrongAnnounce { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResendBasis {
    Computational,
    Pm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BobStrategy {
    Honest,
    /// Upgrade p(j)=0 declarations to 1 with the given probability.
    WrongPj { rate: f64 },
    /// Measure every transiting register in the chosen basis and forward the
    /// collapsed state.
    MeasureResend { basis: ResendBasis },
    /// Entangle an ancilla with each register: intact with probability η,
    /// flipped to the orthogonal working-subspace state otherwise.
    EntangleMeasure { eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyProfile {
    pub alice: AliceStrategy,
    pub bob: BobStrategy,
}

impl StrategyProfile {
    pub fn honest() -> Self {
        Self { alice: AliceStrategy::Honest, bob: BobStrategy::Honest }
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        match self.alice {
            AliceStrategy::ExtraElements { count: 0 } => return Err(StrategyError::BadCount),
            AliceStrategy::WrongQt { rate } | AliceStrategy::WrongAnnounce { rate }
                if !(rate > 0.0 && rate <= 1.0) =>
            {
                return Err(StrategyError::BadRate(rate))
            }
            _ => {}
        }
        match self.bob {
            BobStrategy::WrongPj { rate } if !(rate > 0.0 && rate <= 1.0) => {
                Err(StrategyError::BadRate(rate))
            }
            BobStrategy::EntangleMeasure { eta } if !(0.0..=1.0).contains(&eta) => {
                Err(StrategyError::BadEta(eta))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AliceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AliceStrategy::Honest => write!(f, "honest"),
            AliceStrategy::ExtraElements { count } => write!(f, "extra_elements:count={count}"),
            AliceStrategy::NoChecks => write!(f, "no_checks"),
            AliceStrategy::WrongQt { rate } => write!(f, "wrong_qt:rate={rate}"),
            AliceStrategy::WrongAnnounce { rate } => write!(f, "wrong_announce:rate={rate}"),
        }
    }
}

impl fmt::Display for BobStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BobStrategy::Honest => write!(f, "honest"),
            BobStrategy::WrongPj { rate } => write!(f, "wrong_pj:rate={rate}"),
            BobStrategy::MeasureResend { basis: ResendBasis::Computational } => {
                write!(f, "measure_resend:basis=computational")
            }
            BobStrategy::MeasureResend { basis: ResendBasis::Pm } => {
                write!(f, "measure_resend:basis=pm")
            }
            BobStrategy::EntangleMeasure { eta } => write!(f, "entangle_measure:eta={eta}"),
        }
    }
}

fn descriptor_param(body: &str, key: &str) -> Option<f64> {
    body.split(',').find_map(|kv| {
        let (k, v) = kv.split_once('=')?;
        (k.trim() == key).then(|| v.trim().parse().ok()).flatten()
    })
}

/// Parses the config-file descriptor form, e.g. `entangle_measure:eta=0.9`.
pub fn parse_alice(descriptor: &str) -> Result<AliceStrategy, StrategyError> {
    let (name, body) = descriptor.split_once(':').unwrap_or((descriptor, ""));
    let strategy = match name.trim() {
        "honest" => AliceStrategy::Honest,
        "extra_elements" => AliceStrategy::ExtraElements {
            count: descriptor_param(body, "count")
                .ok_or_else(|| StrategyError::UnknownDescriptor(descriptor.into()))?
                as usize,
        },
        "no_checks" => AliceStrategy::NoChecks,
        "wrong_qt" => AliceStrategy::WrongQt {
            rate: descriptor_param(body, "rate")
                .ok_or_else(|| StrategyError::UnknownDescriptor(descriptor.into()))?,
        },
        "wrong_announce" => AliceStrategy::WrongAnnounce {
            rate: descriptor_param(body, "rate")
                .ok_or_else(|| StrategyError::UnknownDescriptor(descriptor.into()))?,
        },
        _ => return Err(StrategyError::UnknownDescriptor(descriptor.into())),
    };
    StrategyProfile { alice: strategy, bob: BobStrategy::Honest }.validate()?;
    Ok(strategy)
}

pub fn parse_bob(descriptor: &str) -> Result<BobStrategy, StrategyError> {
    let (name, body) = descriptor.split_once(':').unwrap_or((descriptor, ""));
    let strategy = match name.trim() {
        "honest" => BobStrategy::Honest,
        "wrong_pj" => BobStrategy::WrongPj {
            rate: descriptor_param(body, "rate")
                .ok_or_else(|| StrategyError::UnknownDescriptor(descriptor.into()))?,
        },
        "measure_resend" => {
            let basis = body
                .split(',')
                .find_map(|kv| kv.split_once('=').filter(|(k, _)| k.trim() == "basis"))
                .map(|(_, v)| v.trim())
                .ok_or_else(|| StrategyError::UnknownDescriptor(descriptor.into()))?;
            match basis {
                "computational" => {
                    BobStrategy::MeasureResend { basis: ResendBasis::Computational }
                }
                "pm" => BobStrategy::MeasureResend { basis: ResendBasis::Pm },
                _ => return Err(StrategyError::UnknownDescriptor(descriptor.into())),
            }
        }
        "entangle_measure" => BobStrategy::EntangleMeasure {
            eta: descriptor_param(body, "eta")
                .ok_or_else(|| StrategyError::UnknownDescriptor(descriptor.into()))?,
        },
        _ => return Err(StrategyError::UnknownDescriptor(descriptor.into())),
    };
    StrategyProfile { alice: AliceStrategy::Honest, bob: strategy }.validate()?;
    Ok(strategy)
}

/// Measures the register in the chosen basis and forwards the collapsed
/// state. Returns the index Bob learned from the outcome, when the outcome
/// reveals one: a nonzero computational index, or a collapse outside the
/// `{0, j'}` subspace of his pm guess.
pub fn apply_measure_resend<R: Rng + ?Sized>(
    register: &Statevector,
    basis: ResendBasis,
    modulus: usize,
    rng: &mut R,
) -> (Statevector, Option<usize>) {
    match basis {
        ResendBasis::Computational => {
            let (outcome, collapsed) =
                measure(register, MeasurementBasis::Computational, rng).expect("computational");
            let learned = match outcome {
                MeasurementOutcome::Index(0) => None,
                MeasurementOutcome::Index(i) => Some(i),
                _ => unreachable!(),
            };
            (collapsed, learned)
        }
        ResendBasis::Pm => {
            // Bob does not know the element; he guesses a pm pair uniformly.
            let guess = rng.gen_range(1..modulus);
            let (outcome, collapsed) =
                measure(register, MeasurementBasis::PmPair { j: guess }, rng)
                    .expect("pm basis within register width");
            let learned = match outcome {
                MeasurementOutcome::Corrupt(i) => Some(i),
                _ => None,
            };
            (collapsed, learned)
        }
    }
}

/// Ancilla labels of the entangle-measure branch. The two states are assumed
/// orthogonal, so sampling the branch is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncillaLabel {
    E00,
    E01,
}

/// Entangle-measure attack on one register: with probability η the register
/// passes intact (label E00); otherwise it is flipped to the orthogonal
/// state of its two-dimensional working subspace (label E01). The working
/// subspace is span{|0⟩, |j⟩} for a register supported there, and the
/// computational check pair {|0⟩, |10…0⟩} for an all-zero register.
pub fn apply_entangle_measure<R: Rng + ?Sized>(
    register: &Statevector,
    eta: f64,
    rng: &mut R,
) -> (Statevector, AncillaLabel) {
    if rng.gen::<f64>() < eta {
        return (register.clone(), AncillaLabel::E00);
    }
    let support = register.support(NORM_TOL);
    let m = register.num_qubits();
    let top = 1usize << (m - 1);
    let flipped = match support.as_slice() {
        [0] => Statevector::basis_state(m, top),
        [_] => Statevector::basis_state(m, 0),
        [0, j] => {
            let a0 = register.amplitude(0);
            let aj = register.amplitude(*j);
            // Orthogonal state within span{|0⟩, |j⟩}: (a_j*, -a_0*).
            let mut amps = vec![num_complex::Complex64::ZERO; register.dim()];
            amps[0] = aj.conj();
            amps[*j] = -a0.conj();
            Statevector::from_amplitudes(m, amps).expect("orthogonal state is normalized")
        }
        // Wider support leaves the orthogonal state ill-defined; the attack
        // map is only specified on protocol registers, so pass through.
        _ => return (register.clone(), AncillaLabel::E00),
    };
    (flipped, AncillaLabel::E01)
}

/// Fresh fake element: uniform over Z_N^* minus the excluded set.
pub fn draw_fake_element<R: Rng + ?Sized>(
    modulus: usize,
    exclude: &std::collections::BTreeSet<usize>,
    rng: &mut R,
) -> Option<usize> {
    let pool: Vec<usize> = (1..modulus).filter(|e| !exclude.contains(e)).collect();
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.gen_range(0..pool.len())])
    }
}
