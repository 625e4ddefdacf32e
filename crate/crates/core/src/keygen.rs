//! Entangled-pair key generation.
//!
//! Bob and Alice share `2l` pairs of the form
//! `(|0⟩_B|φ0⟩_A + |1⟩_B|φ1⟩_A)/√2`. Bob reads his qubit in the
//! computational basis; Alice measures hers in one of the two pair bases,
//! keeping a bit only on the unambiguous outcomes. Half the positions are
//! sacrificed to estimate the channel error rate, the surviving `l` form the
//! key stream: Bob knows all of it, Alice a `sin²θ/2` fraction.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::statevec::{
    measure, pair_state, MeasurementBasis, MeasurementOutcome, PairKind, Pauli, Statevector,
};

#[derive(Debug, Error, PartialEq)]
pub enum KeygenError {
    #[error("theta {0} outside [0, π/2]")]
    ThetaOutOfRange(f64),
    #[error("noise {0} outside [0, 1]")]
    NoiseOutOfRange(f64),
    #[error("key length must be at least 1")]
    EmptyKey,
}

/// Source of the shared pairs. `noise` is the depolarizing probability
/// applied to Alice's qubit in transit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSource {
    theta: f64,
    noise: f64,
}

impl PairSource {
    pub fn new(theta: f64, noise: f64) -> Result<Self, KeygenError> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(KeygenError::ThetaOutOfRange(theta));
        }
        if !(0.0..=1.0).contains(&noise) {
            return Err(KeygenError::NoiseOutOfRange(noise));
        }
        Ok(Self { theta, noise })
    }

    pub fn noiseless(theta: f64) -> Result<Self, KeygenError> {
        Self::new(theta, 0.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }
}

/// Emits one two-qubit pair; qubit 1 is Bob's, qubit 2 Alice's. With
/// probability `noise` a uniformly random Pauli hits Alice's qubit, which on
/// average replaces her marginal with the maximally mixed state.
pub fn make_entangled_pair<R: Rng + ?Sized>(source: &PairSource, rng: &mut R) -> Statevector {
    let (c, s) = ((source.theta / 2.0).cos(), (source.theta / 2.0).sin());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // (|0⟩(c|0⟩+s|1⟩) + |1⟩(c|0⟩-s|1⟩))/√2
    let amps = vec![
        num_complex::Complex64::new(r * c, 0.0),
        num_complex::Complex64::new(r * s, 0.0),
        num_complex::Complex64::new(r * c, 0.0),
        num_complex::Complex64::new(-r * s, 0.0),
    ];
    let state = Statevector::from_amplitudes(2, amps).expect("pair construction is normalized");
    if source.noise > 0.0 && rng.gen::<f64>() < source.noise {
        let pauli = match rng.gen_range(0..4u8) {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        };
        state.apply_pauli(2, pauli)
    } else {
        state
    }
}

/// Key stream after error estimation. Positions are 1-based over the
/// surviving `l` bits.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyMaterial {
    pub length: usize,
    pub bob_bits: Vec<u8>,
    pub alice_known: BTreeMap<usize, u8>,
    pub theta: f64,
    pub error_rate: f64,
    pub aborted: bool,
}

impl KeyMaterial {
    pub fn bob_bit(&self, position: usize) -> u8 {
        self.bob_bits[position - 1]
    }

    pub fn known_fraction(&self) -> f64 {
        self.alice_known.len() as f64 / self.length as f64
    }
}

/// One pair's worth of measurement data, exposed to the optional observer
/// hook after the pair has been consumed.
#[derive(Debug, Clone, Copy)]
pub struct PairRecord {
    pub index: usize,
    pub bob_bit: u8,
    /// Alice's unambiguous conclusion about Bob's bit, when she got one.
    pub conclusive: Option<u8>,
}

fn run_single_pair<R: Rng + ?Sized>(source: &PairSource, rng: &mut R) -> (u8, Option<u8>) {
    let pair = make_entangled_pair(source, rng);
    let (bob_bit, collapsed) = pair.measure_qubit(1, rng);
    // Bob's qubit collapsed to a basis state, so Alice's qubit factors out.
    let base = (bob_bit as usize) << 1;
    let alice = Statevector::from_amplitudes(
        1,
        vec![collapsed.amplitude(base), collapsed.amplitude(base + 1)],
    )
    .expect("post-measurement state is normalized");
    let which = if rng.gen::<bool>() { PairKind::Phi0 } else { PairKind::Phi1 };
    let basis = MeasurementBasis::Pair { theta: source.theta, which };
    let (outcome, _) = measure(&alice, basis, rng).expect("single-qubit pair basis");
    let conclusive = match (which, outcome) {
        (PairKind::Phi0, MeasurementOutcome::PairOrthogonal) => Some(1),
        (PairKind::Phi1, MeasurementOutcome::PairOrthogonal) => Some(0),
        _ => None,
    };
    (bob_bit, conclusive)
}

/// Runs the full key generation: `2l` pairs, a uniformly random `l`-subset
/// sacrificed for error estimation (only conclusive sample positions can be
/// compared), abort when the observed error rate exceeds `threshold`. The
/// optional `bob_observer` sees every pair record in order; adversarial
/// predictors accumulate their own tallies inside the closure.
pub fn run_keygen<R: Rng + ?Sized>(
    l: usize,
    source: &PairSource,
    threshold: f64,
    rng: &mut R,
    mut bob_observer: Option<&mut dyn FnMut(PairRecord)>,
) -> Result<KeyMaterial, KeygenError> {
    if l == 0 {
        return Err(KeygenError::EmptyKey);
    }
    let total = 2 * l;
    let mut bob_bits = Vec::with_capacity(total);
    let mut conclusive = Vec::with_capacity(total);
    for index in 0..total {
        let (bob_bit, concl) = run_single_pair(source, rng);
        if let Some(observer) = bob_observer.as_deref_mut() {
            observer(PairRecord { index, bob_bit, conclusive: concl });
        }
        bob_bits.push(bob_bit);
        conclusive.push(concl);
    }

    let sample = rand::seq::index::sample(rng, total, l);
    let mut in_sample = vec![false; total];
    for i in sample.iter() {
        in_sample[i] = true;
    }
    let mut compared = 0usize;
    let mut mismatched = 0usize;
    for i in 0..total {
        if in_sample[i] {
            if let Some(bit) = conclusive[i] {
                compared += 1;
                if bit != bob_bits[i] {
                    mismatched += 1;
                }
            }
        }
    }
    let error_rate = if compared == 0 { 0.0 } else { mismatched as f64 / compared as f64 };
    let aborted = error_rate > threshold;

    let mut kept_bits = Vec::with_capacity(l);
    let mut alice_known = BTreeMap::new();
    for i in 0..total {
        if !in_sample[i] {
            kept_bits.push(bob_bits[i]);
            if let Some(bit) = conclusive[i] {
                alice_known.insert(kept_bits.len(), bit);
            }
        }
    }
    debug_assert_eq!(kept_bits.len(), l);

    Ok(KeyMaterial {
        length: l,
        bob_bits: kept_bits,
        alice_known,
        theta: source.theta,
        error_rate,
        aborted,
    })
}

/// Probability that one pair yields Alice an unambiguous bit: `sin²θ / 2`.
pub fn conclusive_rate(theta: f64) -> f64 {
    let s = theta.sin();
    s * s / 2.0
}

/// Outcome of the dishonest-Bob predictor experiment.
#[derive(Debug, Clone, Copy)]
pub struct GuessReport {
    /// Mean of the per-class hit rates of Bob's best view-based predictor;
    /// 1/2 means the view carries no information about the indicator.
    pub balanced_accuracy: f64,
    /// Standard error of the balanced accuracy.
    pub std_error: f64,
    /// Sample correlation between Bob's bit and the conclusive indicator.
    pub correlation: f64,
    /// Empirical conclusive rate (the prior the predictor must beat).
    pub prior: f64,
    pub trials: usize,
    /// Set when the indicator never varies (θ = 0) and no predictor can be
    /// scored.
    pub degenerate: bool,
}

/// Simulates the strongest predictor of Alice's conclusive-indicator that a
/// dishonest Bob can build from his own view (the bit `r_t`): a frequency
/// table trained on the first half of the pairs, scored by balanced accuracy
/// on the second half.
pub fn bob_conclusiveness_advantage<R: Rng + ?Sized>(
    trials: usize,
    theta: f64,
    rng: &mut R,
) -> Result<GuessReport, KeygenError> {
    assert!(trials >= 1000, "estimate needs at least 10^3 pairs");
    let source = PairSource::noiseless(theta)?;
    let mut views = Vec::with_capacity(trials);
    let mut flags = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (bob_bit, concl) = run_single_pair(&source, rng);
        views.push(bob_bit);
        flags.push(concl.is_some());
    }

    let half = trials / 2;
    let prior_hits = flags[half..].iter().filter(|&&c| c).count();
    let prior = flags.iter().filter(|&&c| c).count() as f64 / trials as f64;
    let correlation = crate::stats::correlation(
        &views.iter().map(|&v| f64::from(v)).collect::<Vec<_>>(),
        &flags.iter().map(|&c| f64::from(u8::from(c))).collect::<Vec<_>>(),
    );
    if prior_hits == 0 || prior_hits == trials - half {
        return Ok(GuessReport {
            balanced_accuracy: 0.5,
            std_error: 0.0,
            correlation,
            prior,
            trials,
            degenerate: true,
        });
    }

    // Train: P(conclusive | view) per view value; predict "conclusive" when
    // the view makes it likelier than the base rate (the balanced-optimal
    // likelihood-ratio rule for a one-bit view).
    let mut count = [[0f64; 2]; 2];
    for i in 0..half {
        count[views[i] as usize][usize::from(flags[i])] += 1.0;
    }
    let train_prior =
        flags[..half].iter().filter(|&&c| c).count() as f64 / half.max(1) as f64;
    let predict = |view: u8| -> bool {
        let row = count[view as usize];
        let total = row[0] + row[1];
        if total == 0.0 {
            return false;
        }
        row[1] / total > train_prior
    };

    let mut hit = [[0usize; 2]; 2]; // [class][correct]
    for i in half..trials {
        let class = usize::from(flags[i]);
        let correct = usize::from(predict(views[i]) == flags[i]);
        hit[class][correct] += 1;
    }
    let n1 = (hit[1][0] + hit[1][1]) as f64;
    let n0 = (hit[0][0] + hit[0][1]) as f64;
    let p1 = hit[1][1] as f64 / n1;
    let p0 = hit[0][1] as f64 / n0;
    let balanced = 0.5 * (p1 + p0);
    let se = 0.5 * (p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0).sqrt();
    Ok(GuessReport {
        balanced_accuracy: balanced,
        std_error: se,
        correlation,
        prior,
        trials,
        degenerate: false,
    })
}

/// Alice-side optimal-discrimination strategy run against honest Bob inside
/// the key generation loop: she measures every qubit in the `{|+⟩,|-⟩}`
/// basis and guesses `r_t` directly. Empirically attains `1/2 + sin(θ)/2`.
pub fn alice_helstrom_guess_rate<R: Rng + ?Sized>(
    trials: usize,
    theta: f64,
    rng: &mut R,
) -> Result<f64, KeygenError> {
    let source = PairSource::noiseless(theta)?;
    let mut hits = 0usize;
    for _ in 0..trials {
        let pair = make_entangled_pair(&source, rng);
        let (bob_bit, collapsed) = pair.measure_qubit(1, rng);
        let base = (bob_bit as usize) << 1;
        let alice = Statevector::from_amplitudes(
            1,
            vec![collapsed.amplitude(base), collapsed.amplitude(base + 1)],
        )
        .expect("post-measurement state is normalized");
        let (outcome, _) =
            measure(&alice, MeasurementBasis::PmPair { j: 1 }, rng).expect("pm basis on a qubit");
        let guess = match outcome {
            MeasurementOutcome::PmPlus => 0,
            MeasurementOutcome::PmMinus => 1,
            _ => unreachable!("single-qubit pm basis has no completion"),
        };
        if guess == bob_bit {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// `|φ0⟩`/`|φ1⟩` accessors used by tests probing the source invariant.
pub fn source_branch_state(theta: f64, bob_bit: u8) -> Statevector {
    pair_state(theta, if bob_bit == 0 { PairKind::Phi0 } else { PairKind::Phi1 })
}
