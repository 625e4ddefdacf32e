//! Outcome classification, Table-1 utilities under the R1 preference order,
//! Monte-Carlo expected-utility estimation per strategy profile, and the
//! closed-form bounds the estimates are checked against.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{
    run_protocol, sample_instance, true_intersection, Outcome, ProtocolError, ProtocolParams,
};
use crate::strategies::{AliceStrategy, BobStrategy, ResendBasis, StrategyProfile};

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("utility order violates U_TN > U_TT > U_NN > U_NT for {0}")]
    BadUtilityOrder(&'static str),
    #[error("parameter violation: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// One party's payoffs, indexed by (own outcome, opponent outcome).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyUtilities {
    pub u_tt: f64,
    pub u_tn: f64,
    pub u_nt: f64,
    pub u_nn: f64,
}

impl PartyUtilities {
    fn validate(&self, who: &'static str) -> Result<(), GameError> {
        if self.u_tn > self.u_tt && self.u_tt > self.u_nn && self.u_nn > self.u_nt {
            Ok(())
        } else {
            Err(GameError::BadUtilityOrder(who))
        }
    }

    fn value(&self, own: Label, other: Label) -> f64 {
        match (own.is_true(), other.is_true()) {
            (true, true) => self.u_tt,
            (true, false) => self.u_tn,
            (false, true) => self.u_nt,
            (false, false) => self.u_nn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityTable {
    pub alice: PartyUtilities,
    pub bob: PartyUtilities,
}

impl UtilityTable {
    pub fn new(alice: PartyUtilities, bob: PartyUtilities) -> Result<Self, GameError> {
        alice.validate("alice")?;
        bob.validate("bob")?;
        Ok(Self { alice, bob })
    }

    /// The worked example set: U_TN=1, U_TT=1/2, U_NN=0, with U_NT=-1/2
    /// completing the R1 order, same for both parties.
    pub fn example() -> Self {
        let u = PartyUtilities { u_tt: 0.5, u_tn: 1.0, u_nt: -0.5, u_nn: 0.0 };
        Self::new(u, u).expect("example satisfies R1")
    }
}

/// Outcome label: `True` means the party holds exactly the functionality.
/// Anything else is `Null`; a non-⊥ holding that differs from the truth is
/// additionally wrong-flagged for correctness accounting, while a proper
/// subset counts as partial knowledge and is mapped to ⊥ unflagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    True,
    Null { wrong: bool },
}

impl Label {
    pub fn is_true(self) -> bool {
        self == Label::True
    }

    pub fn is_wrong(self) -> bool {
        matches!(self, Label::Null { wrong: true })
    }
}

fn classify_side(holding: &Option<BTreeSet<usize>>, truth: &BTreeSet<usize>) -> Label {
    match holding {
        None => Label::Null { wrong: false },
        Some(set) if set == truth => Label::True,
        Some(set) if set.is_subset(truth) => Label::Null { wrong: false },
        Some(_) => Label::Null { wrong: true },
    }
}

/// Labels both parties' holdings against the brute-force truth.
pub fn classify(outcome: &Outcome, truth: &BTreeSet<usize>) -> (Label, Label) {
    (classify_side(&outcome.f_alice, truth), classify_side(&outcome.f_bob, truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
}

/// Monte-Carlo configuration: instance shape plus protocol parameters.
/// `u_choices` is the intersection-size distribution; each trial draws
/// uniformly from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub modulus: usize,
    pub n: usize,
    pub m: usize,
    pub u_choices: Vec<usize>,
    pub l: usize,
    pub theta: f64,
    pub noise: f64,
    pub threshold: f64,
}

impl GameParams {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.u_choices.is_empty() {
            return Err(GameError::BadParameter("u_choices must be non-empty".into()));
        }
        for &u in &self.u_choices {
            if u > self.n.min(self.m) {
                return Err(GameError::BadParameter(format!(
                    "u={u} exceeds min(n,m)={}",
                    self.n.min(self.m)
                )));
            }
            if self.n + self.m - u > self.modulus - 1 {
                return Err(GameError::BadParameter(format!(
                    "sets of sizes {}+{} with u={u} do not fit in Z_{}^*",
                    self.n, self.m, self.modulus
                )));
            }
        }
        if self.l < 2 * self.n {
            return Err(GameError::BadParameter(format!(
                "l={} violates l >= 2n={}",
                self.l,
                2 * self.n
            )));
        }
        Ok(())
    }

    /// Parameter conditions the strict-equilibrium claim rests on;
    /// violations are reported, not fatal, so the failure region can be
    /// studied.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if 2 * self.n.max(self.m) >= self.modulus {
            out.push(format!(
                "N={} does not exceed 2·max(n,m)={}",
                self.modulus,
                2 * self.n.max(self.m)
            ));
        }
        if (self.n + self.m) as f64 >= (self.modulus as f64 - 1.0) / 2.0 {
            out.push(format!("m+n={} is not below (N-1)/2", self.n + self.m));
        }
        if self.theta > std::f64::consts::FRAC_PI_4 {
            out.push(format!("theta={} above π/4", self.theta));
        }
        out
    }

    fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            l: self.l,
            theta: self.theta,
            noise: self.noise,
            threshold: self.threshold,
        }
    }
}

/// Per-profile Monte-Carlo estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEstimate {
    pub name: String,
    pub deviator: Option<Party>,
    pub trials: usize,
    pub mean_utility_alice: f64,
    pub se_alice: f64,
    pub mean_utility_bob: f64,
    pub se_bob: f64,
    /// Pr[f_A = F] and Pr[f_B = F].
    pub p_f_alice_true: f64,
    pub p_f_bob_true: f64,
    /// Frequency of wrong-flagged holdings per party.
    pub wrong_freq_alice: f64,
    pub wrong_freq_bob: f64,
    pub abort_histogram: BTreeMap<String, u64>,
}

impl ProfileEstimate {
    pub fn deviator_mean(&self) -> f64 {
        match self.deviator {
            Some(Party::Bob) => self.mean_utility_bob,
            _ => self.mean_utility_alice,
        }
    }

    pub fn deviator_se(&self) -> f64 {
        match self.deviator {
            Some(Party::Bob) => self.se_bob,
            _ => self.se_alice,
        }
    }
}

struct TrialRecord {
    alice_label: Label,
    bob_label: Label,
    abort_step: Option<&'static str>,
}

fn run_trials(
    profile: &StrategyProfile,
    params: &GameParams,
    trials: usize,
    seed: u64,
) -> Vec<TrialRecord> {
    let profile = *profile;
    (0..trials)
        .into_par_iter()
        .map(move |trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64 + 1);
            let u = params.u_choices[rng.gen_range(0..params.u_choices.len())];
            let (x, y) = sample_instance(params.modulus, params.n, params.m, u, &mut rng)
                .expect("validated params sample");
            let result = run_protocol(&x, &y, &params.protocol_params(), &profile, &mut rng)
                .expect("validated params run");
            let truth = true_intersection(&x, &y);
            let (alice_label, bob_label) = classify(&result.outcome, &truth);
            TrialRecord {
                alice_label,
                bob_label,
                abort_step: result.transcript.abort.as_ref().map(|a| a.step.name()),
            }
        })
        .collect()
}

/// Estimates expected utilities and outcome statistics for one profile over
/// freshly sampled instances. Trials run in parallel on independent rng
/// streams and merge associatively, so the estimate is deterministic in
/// `seed` regardless of thread count.
pub fn expected_utilities(
    name: &str,
    profile: &StrategyProfile,
    deviator: Option<Party>,
    params: &GameParams,
    table: &UtilityTable,
    trials: usize,
    seed: u64,
) -> Result<ProfileEstimate, GameError> {
    if trials < 1000 {
        return Err(GameError::BadParameter(format!(
            "trials >= 1000 required for the estimate, got {trials}"
        )));
    }
    params.validate()?;
    profile.validate().map_err(ProtocolError::from)?;
    let records = run_trials(profile, params, trials, seed);
    let alice_samples: Vec<f64> =
        records.iter().map(|r| table.alice.value(r.alice_label, r.bob_label)).collect();
    let bob_samples: Vec<f64> =
        records.iter().map(|r| table.bob.value(r.bob_label, r.alice_label)).collect();
    let (mean_a, se_a) = crate::stats::mean_and_se(&alice_samples);
    let (mean_b, se_b) = crate::stats::mean_and_se(&bob_samples);
    let frac = |pred: &dyn Fn(&TrialRecord) -> bool| {
        records.iter().filter(|r| pred(r)).count() as f64 / trials as f64
    };
    let mut abort_histogram = BTreeMap::new();
    for rec in &records {
        if let Some(step) = rec.abort_step {
            *abort_histogram.entry(step.to_string()).or_insert(0) += 1;
        }
    }
    Ok(ProfileEstimate {
        name: name.to_string(),
        deviator,
        trials,
        mean_utility_alice: mean_a,
        se_alice: se_a,
        mean_utility_bob: mean_b,
        se_bob: se_b,
        p_f_alice_true: frac(&|r| r.alice_label.is_true()),
        p_f_bob_true: frac(&|r| r.bob_label.is_true()),
        wrong_freq_alice: frac(&|r| r.alice_label.is_wrong()),
        wrong_freq_bob: frac(&|r| r.bob_label.is_wrong()),
        abort_histogram,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub estimate: ProfileEstimate,
    pub verdict: Verdict,
    /// Honest-minus-deviation utility gap for the deviator.
    pub utility_gap: f64,
    /// Combined standard error of the gap.
    pub gap_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub honest: ProfileEstimate,
    pub rows: Vec<DeviationRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Deviation {
    pub name: &'static str,
    pub profile: StrategyProfile,
    pub deviator: Party,
}

/// The unilateral deviations evaluated by the equilibrium report.
pub fn deviation_catalog(n: usize) -> Vec<Deviation> {
    let honest_bob = BobStrategy::Honest;
    let honest_alice = AliceStrategy::Honest;
    vec![
        Deviation {
            name: "alice_extra_elements",
            profile: StrategyProfile {
                alice: AliceStrategy::ExtraElements { count: n.max(1) },
                bob: honest_bob,
            },
            deviator: Party::Alice,
        },
        Deviation {
            name: "alice_no_checks",
            profile: StrategyProfile { alice: AliceStrategy::NoChecks, bob: honest_bob },
            deviator: Party::Alice,
        },
        Deviation {
            name: "alice_wrong_qt",
            profile: StrategyProfile { alice: AliceStrategy::WrongQt { rate: 1.0 }, bob: honest_bob },
            deviator: Party::Alice,
        },
        Deviation {
            name: "alice_wrong_announce",
            profile: StrategyProfile {
                alice: AliceStrategy::WrongAnnounce { rate: 1.0 },
                bob: honest_bob,
            },
            deviator: Party::Alice,
        },
        Deviation {
            name: "bob_wrong_pj",
            profile: StrategyProfile { alice: honest_alice, bob: BobStrategy::WrongPj { rate: 1.0 } },
            deviator: Party::Bob,
        },
        Deviation {
            name: "bob_measure_resend_computational",
            profile: StrategyProfile {
                alice: honest_alice,
                bob: BobStrategy::MeasureResend { basis: ResendBasis::Computational },
            },
            deviator: Party::Bob,
        },
        Deviation {
            name: "bob_measure_resend_pm",
            profile: StrategyProfile {
                alice: honest_alice,
                bob: BobStrategy::MeasureResend { basis: ResendBasis::Pm },
            },
            deviator: Party::Bob,
        },
        Deviation {
            name: "bob_entangle_measure",
            profile: StrategyProfile {
                alice: honest_alice,
                bob: BobStrategy::EntangleMeasure { eta: 0.9 },
            },
            deviator: Party::Bob,
        },
    ]
}

/// Strict-inequality verdict between a deviation's expected utility and the
/// honest baseline at 4σ interval separation.
pub fn verdict_for(honest: f64, honest_se: f64, dev: f64, dev_se: f64) -> (Verdict, f64, f64) {
    let gap = honest - dev;
    let se = (honest_se * honest_se + dev_se * dev_se).sqrt();
    let verdict = if gap > crate::stats::FOUR_SIGMA * se {
        Verdict::Holds
    } else if gap < -crate::stats::FOUR_SIGMA * se {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    (verdict, gap, se)
}

/// Evaluates the honest profile and every unilateral deviation; the verdict
/// per deviation is strict (4σ interval separation) in the deviator's own
/// expected utility. Precondition violations are reported as warnings and
/// the run proceeds so the failure region can be studied.
pub fn strict_nash_report(
    params: &GameParams,
    table: &UtilityTable,
    trials: usize,
    seed: u64,
) -> Result<EquilibriumReport, GameError> {
    params.validate()?;
    let warnings = params.warnings();
    let honest = expected_utilities(
        "honest",
        &StrategyProfile::honest(),
        None,
        params,
        table,
        trials,
        seed,
    )?;
    let mut rows = Vec::new();
    for dev in deviation_catalog(params.n) {
        let estimate =
            expected_utilities(dev.name, &dev.profile, Some(dev.deviator), params, table, trials, seed)?;
        let honest_mean = match dev.deviator {
            Party::Alice => honest.mean_utility_alice,
            Party::Bob => honest.mean_utility_bob,
        };
        let honest_se = match dev.deviator {
            Party::Alice => honest.se_alice,
            Party::Bob => honest.se_bob,
        };
        let (verdict, utility_gap, gap_se) =
            verdict_for(honest_mean, honest_se, estimate.deviator_mean(), estimate.deviator_se());
        rows.push(DeviationRow { estimate, verdict, utility_gap, gap_se });
    }
    Ok(EquilibriumReport { honest, rows, warnings })
}

/// One deviation's fairness and correctness numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub name: String,
    pub deviator: Party,
    /// Pr[f = F] for the deviating party under the deviation.
    pub p_f_deviator_true: f64,
    /// Pr[f = F] for the deviating party under the honest profile.
    pub p_f_deviator_honest: f64,
    /// Wrong-flag frequency of the honest counterpart (correctness).
    pub honest_party_wrong_freq: f64,
    /// Utility-form numbers, reported without asserting the inequality.
    pub mean_utility_deviator: f64,
    pub u_tt_deviator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub honest_p_f_alice: f64,
    pub honest_p_f_bob: f64,
    pub rows: Vec<FairnessRow>,
    pub warnings: Vec<String>,
}

/// Estimates the fairness comparison Pr[f=F | deviation] vs the honest
/// baseline for every deviation, and the wrong-flag frequency of the honest
/// party (correctness accounting).
pub fn fairness_correctness_report(
    params: &GameParams,
    table: &UtilityTable,
    trials: usize,
    seed: u64,
) -> Result<FairnessReport, GameError> {
    params.validate()?;
    let honest = expected_utilities(
        "honest",
        &StrategyProfile::honest(),
        None,
        params,
        table,
        trials,
        seed,
    )?;
    let mut rows = Vec::new();
    for dev in deviation_catalog(params.n) {
        let estimate =
            expected_utilities(dev.name, &dev.profile, Some(dev.deviator), params, table, trials, seed)?;
        let (p_dev, p_honest, wrong_honest, mean_dev, u_tt) = match dev.deviator {
            Party::Alice => (
                estimate.p_f_alice_true,
                honest.p_f_alice_true,
                estimate.wrong_freq_bob,
                estimate.mean_utility_alice,
                table.alice.u_tt,
            ),
            Party::Bob => (
                estimate.p_f_bob_true,
                honest.p_f_bob_true,
                estimate.wrong_freq_alice,
                estimate.mean_utility_bob,
                table.bob.u_tt,
            ),
        };
        rows.push(FairnessRow {
            name: dev.name.to_string(),
            deviator: dev.deviator,
            p_f_deviator_true: p_dev,
            p_f_deviator_honest: p_honest,
            honest_party_wrong_freq: wrong_honest,
            mean_utility_deviator: mean_dev,
            u_tt_deviator: u_tt,
        });
    }
    Ok(FairnessReport {
        honest_p_f_alice: honest.p_f_alice_true,
        honest_p_f_bob: honest.p_f_bob_true,
        rows,
        warnings: params.warnings(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eq1Evaluation {
    pub p_c1: f64,
    pub p_c2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the wrong-announce expected-utility inequality:
/// Pr(e∈C2)·U_TN + Pr(e∈C1)·U_NN < U_TT with Pr(e∈C2) = (m-u)/(N-1-n).
pub fn eq1_bound(
    modulus: usize,
    n: usize,
    m: usize,
    u: usize,
    table: &UtilityTable,
) -> Result<Eq1Evaluation, GameError> {
    if u > n.min(m) {
        return Err(GameError::BadParameter(format!("u={u} exceeds min(n,m)")));
    }
    if n + m >= modulus - 1 {
        return Err(GameError::BadParameter(format!(
            "n+m={} must stay below N-1={}",
            n + m,
            modulus - 1
        )));
    }
    let p_c2 = (m - u) as f64 / (modulus - 1 - n) as f64;
    let p_c1 = 1.0 - p_c2;
    let lhs = p_c2 * table.alice.u_tn + p_c1 * table.alice.u_nn;
    let rhs = table.alice.u_tt;
    Ok(Eq1Evaluation { p_c1, p_c2, lhs, rhs, holds: lhs < rhs })
}

/// Tail bound for sampling k of n values in [a, b] without replacement:
/// exp(-2δ²kn / ((n-k)(b-a))), exact 0 at k = n. At k = n/2 with unit range
/// this is exp(-2δ²n).
pub fn serfling_bound(delta: f64, n: u64, k: u64, a: f64, b: f64) -> Result<f64, GameError> {
    if delta <= 0.0 {
        return Err(GameError::BadParameter("delta must be positive".into()));
    }
    if k == 0 || k > n {
        return Err(GameError::BadParameter(format!("k={k} outside [1, n={n}]")));
    }
    if b <= a {
        return Err(GameError::BadParameter("need b > a".into()));
    }
    if k == n {
        return Ok(0.0);
    }
    let exponent = -2.0 * delta * delta * (k as f64) * (n as f64) / ((n - k) as f64 * (b - a));
    Ok(exponent.exp())
}
