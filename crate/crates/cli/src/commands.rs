//! The four batch commands: single/multi run, equilibrium reports,
//! closed-form bounds, and the oblivious-membership replay.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use rqpsi::game::{
    classify, eq1_bound, fairness_correctness_report, serfling_bound, strict_nash_report,
    EquilibriumReport, Party, Verdict,
};
use rqpsi::keygen::conclusive_rate;
use rqpsi::protocol::{ceil_log2, run_protocol, sample_instance, true_intersection};
use rqpsi::qosmdp::run_membership_qosmdp;
use rqpsi::statevec::helstrom_guess_probability;
use rqpsi::strategies::BobStrategy;
use rqpsi::transcript::to_jsonl;

use crate::config::{CliError, Config};
use crate::output::{to_json_pretty, OutDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub abort_step: Option<String>,
    pub abort_reason: Option<String>,
    pub f_alice: Option<Vec<usize>>,
    pub f_bob: Option<Vec<usize>>,
    pub truth: Vec<usize>,
    pub alice_true: bool,
    pub bob_true: bool,
    pub qubit_units: u64,
    pub classical_bits: u64,
    pub physical_qubits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials: u64,
    pub both_true: u64,
    pub aborts: BTreeMap<String, u64>,
    /// Closed-form counters for an honest run of this configuration.
    pub expected_qubit_units: u64,
    pub expected_classical_bits: u64,
    pub runs: Vec<RunRecord>,
}

fn set_to_vec(set: &Option<BTreeSet<usize>>) -> Option<Vec<usize>> {
    set.as_ref().map(|s| s.iter().copied().collect())
}

pub fn cmd_run(config: &Config, raw: &str) -> Result<(), CliError> {
    let out = OutDir::create(&config.out_dir)?;
    out.snapshot_config(raw)?;
    let profile = config.profile()?;
    let params = config.protocol_params();

    let mut transcripts = String::new();
    let mut runs = Vec::new();
    let mut aborts: BTreeMap<String, u64> = BTreeMap::new();
    let mut both_true = 0u64;
    for trial in 0..config.trials {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(trial + 1);
        let (x, y) = sample_instance(config.modulus, config.n, config.m, config.u, &mut rng)
            .map_err(|e| CliError::Config(format!("instance sampling failed: {e}")))?;
        let result = run_protocol(&x, &y, &params, &profile, &mut rng)
            .map_err(|e| CliError::Config(format!("protocol precondition failed: {e}")))?;
        let truth = true_intersection(&x, &y);
        let (label_a, label_b) = classify(&result.outcome, &truth);
        transcripts.push_str(&to_jsonl(trial, &result.transcript));
        if label_a.is_true() && label_b.is_true() {
            both_true += 1;
        }
        if let Some(info) = &result.transcript.abort {
            *aborts.entry(info.step.name().to_string()).or_insert(0) += 1;
        }
        runs.push(RunRecord {
            run_id: trial,
            abort_step: result.transcript.abort.as_ref().map(|a| a.step.name().to_string()),
            abort_reason: result.transcript.abort.as_ref().map(|a| a.reason.clone()),
            f_alice: set_to_vec(&result.outcome.f_alice),
            f_bob: set_to_vec(&result.outcome.f_bob),
            truth: truth.iter().copied().collect(),
            alice_true: label_a.is_true(),
            bob_true: label_b.is_true(),
            qubit_units: result.transcript.qubit_units,
            classical_bits: result.transcript.classical_bits,
            physical_qubits: result.transcript.physical_qubits,
        });
    }

    let expected_qubit_units = (4 * config.n + 2 * config.l) as u64;
    let expected_classical_bits =
        (config.n * (ceil_log2(config.l) + 2) + config.u * ceil_log2(config.modulus)) as u64;
    let summary = RunSummary {
        trials: config.trials,
        both_true,
        aborts: aborts.clone(),
        expected_qubit_units,
        expected_classical_bits,
        runs,
    };
    out.write("transcripts.jsonl", &transcripts)?;
    out.write("summary.json", &to_json_pretty(&summary))?;

    println!(
        "run: N={} n={} m={} u={} l={} trials={} alice={} bob={}",
        config.modulus, config.n, config.m, config.u, config.l, config.trials, config.alice,
        config.bob
    );
    println!("both-true outcomes: {both_true}/{}", config.trials);
    if aborts.is_empty() {
        println!("aborts: none");
    } else {
        let list: Vec<String> = aborts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("aborts: {}", list.join(", "));
    }
    let first = &summary.runs[0];
    println!(
        "counters (run 0): qubit register units = {} (4n+2l = {}), classical bits = {} \
         (n(ceil_log2 l + 2) + u ceil_log2 N = {}), physical qubits = {}",
        first.qubit_units,
        expected_qubit_units,
        first.classical_bits,
        expected_classical_bits,
        first.physical_qubits
    );
    println!("output: {}", config.out_dir.display());
    Ok(())
}

fn csv_verdict(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn histogram_cell(histogram: &BTreeMap<String, u64>) -> String {
    if histogram.is_empty() {
        "-".to_string()
    } else {
        histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(";")
    }
}

pub fn nash_csv(report: &EquilibriumReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "profile",
        "e_u_alice",
        "ci_alice",
        "e_u_bob",
        "ci_bob",
        "verdict",
        "wrong_freq",
        "abort_step_histogram",
    ])
    .expect("csv header");
    let h = &report.honest;
    w.write_record([
        h.name.clone(),
        format!("{:.6}", h.mean_utility_alice),
        format!("{:.6}", 4.0 * h.se_alice),
        format!("{:.6}", h.mean_utility_bob),
        format!("{:.6}", 4.0 * h.se_bob),
        "baseline".to_string(),
        format!("{:.6}", h.wrong_freq_alice.max(h.wrong_freq_bob)),
        histogram_cell(&h.abort_histogram),
    ])
    .expect("csv row");
    for row in &report.rows {
        let e = &row.estimate;
        let wrong_freq = match e.deviator {
            Some(Party::Alice) => e.wrong_freq_bob,
            Some(Party::Bob) | None => e.wrong_freq_alice,
        };
        w.write_record([
            e.name.clone(),
            format!("{:.6}", e.mean_utility_alice),
            format!("{:.6}", 4.0 * e.se_alice),
            format!("{:.6}", e.mean_utility_bob),
            format!("{:.6}", 4.0 * e.se_bob),
            csv_verdict(row.verdict).to_string(),
            format!("{wrong_freq:.6}"),
            histogram_cell(&e.abort_histogram),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf8")
}

pub fn cmd_nash(config: &Config, raw: &str) -> Result<(), CliError> {
    let out = OutDir::create(&config.out_dir)?;
    out.snapshot_config(raw)?;
    let table = config.utilities()?;
    let params = config.game_params();
    let trials = config.trials as usize;
    let nash = strict_nash_report(&params, &table, trials, config.seed)
        .map_err(|e| CliError::Config(format!("equilibrium estimation failed: {e}")))?;
    let fairness = fairness_correctness_report(&params, &table, trials, config.seed)
        .map_err(|e| CliError::Config(format!("fairness estimation failed: {e}")))?;

    out.write("nash_report.json", &to_json_pretty(&nash))?;
    out.write("fairness_report.json", &to_json_pretty(&fairness))?;
    out.write("nash_report.csv", &nash_csv(&nash))?;

    for warning in &nash.warnings {
        println!("warning: {warning}");
    }
    let eq1 = eq1_bound(config.modulus, config.n, config.m, config.u, &table)
        .map_err(|e| CliError::Config(format!("eq1 evaluation failed: {e}")))?;
    println!(
        "wrong-announce closed form: Pr(C2)={:.4}, lhs={:.4} {} rhs={:.4} -> {}",
        eq1.p_c2,
        eq1.lhs,
        if eq1.holds { "<" } else { ">=" },
        eq1.rhs,
        if eq1.holds { "holds" } else { "fails" }
    );
    println!(
        "honest: E[U_A]={:.4} E[U_B]={:.4}",
        nash.honest.mean_utility_alice, nash.honest.mean_utility_bob
    );
    for row in &nash.rows {
        println!(
            "{:<34} E[U]={:>7.4}  gap={:>7.4} (4sigma={:.4})  verdict={}",
            row.estimate.name,
            row.estimate.deviator_mean(),
            row.utility_gap,
            4.0 * row.gap_se,
            csv_verdict(row.verdict)
        );
    }
    println!("output: {}", config.out_dir.display());
    Ok(())
}

pub fn cmd_bounds(config: &Config) -> Result<(), CliError> {
    let theta = config.theta;
    let helstrom = helstrom_guess_probability(theta)
        .map_err(|e| CliError::Config(format!("theta out of range: {e}")))?;
    println!("optimal guess probability at theta={theta:.6}: {helstrom:.6}");
    println!("conclusive rate sin^2(theta)/2: {:.6}", conclusive_rate(theta));

    println!("serfling bound grid (k = n/2, unit range; closed form exp(-2 delta^2 n)):");
    for delta in [0.05f64, 0.1, 0.2] {
        let cells: Vec<String> = [50u64, 100, 200]
            .iter()
            .map(|&n| {
                let bound = serfling_bound(delta, n, n / 2, 0.0, 1.0).expect("valid grid point");
                format!("n={n}: {bound:.6}")
            })
            .collect();
        println!("  delta={delta:.2}  {}", cells.join("  "));
    }

    let table = config.utilities()?;
    let eq1 = eq1_bound(config.modulus, config.n, config.m, config.u, &table)
        .map_err(|e| CliError::Config(format!("eq1 evaluation failed: {e}")))?;
    println!(
        "wrong-announce inequality: {:.6} {} {:.6} ({})",
        eq1.lhs,
        if eq1.holds { "<" } else { ">=" },
        eq1.rhs,
        if eq1.holds { "holds" } else { "fails" }
    );

    let qubits = 4 * config.n + 2 * config.l;
    let classical =
        config.n * (ceil_log2(config.l) + 2) + config.u * ceil_log2(config.modulus);
    println!("communication complexity: {qubits} register-units, {classical} classical bits");

    let f = conclusive_rate(theta);
    let detection = 1.0 - (1.0 - f).powi(config.n as i32);
    println!(
        "wrong-declaration detection over n positions: {detection:.6} \
         (f = {f:.6}; nominal single-position figure 0.5)"
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipSummary {
    pub k: usize,
    pub member: bool,
    pub runs: u64,
    /// Fraction of runs whose verdict matched the ground truth.
    pub agreement: f64,
    pub unreadable_runs: u64,
    pub decoy_flip_rate: f64,
    pub decoy_corrupt_rate: f64,
}

pub fn cmd_membership(config: &Config, raw: &str) -> Result<(), CliError> {
    let out = OutDir::create(&config.out_dir)?;
    out.snapshot_config(raw)?;
    let profile = config.profile()?;
    let attack = match profile.bob {
        BobStrategy::Honest => None,
        other => Some(other),
    };

    // Instance setup on stream 0; per-run randomness on streams 1..
    let mut setup = ChaCha12Rng::seed_from_u64(config.seed);
    setup.set_stream(0);
    let picks = rand::seq::index::sample(&mut setup, config.modulus - 1, config.m);
    let y: BTreeSet<usize> = picks.iter().map(|i| i + 1).collect();
    let k = match config.k {
        Some(k) => k,
        None => setup.gen_range(1..config.modulus),
    };
    let member = y.contains(&k);

    let mut transcripts = String::new();
    let mut agree = 0u64;
    let mut unreadable = 0u64;
    let mut decoys = 0usize;
    let mut flips = 0usize;
    let mut corrupt = 0usize;
    for trial in 0..config.trials {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(trial + 1);
        let run = run_membership_qosmdp(k, &y, config.modulus, config.l, &mut rng, attack)
            .map_err(|e| CliError::Config(format!("membership precondition failed: {e}")))?;
        transcripts.push_str(&to_jsonl(trial, &run.transcript));
        match run.membership {
            Some(bit) => {
                if (bit == 1) == member {
                    agree += 1;
                }
            }
            None => unreadable += 1,
        }
        decoys += run.stats.decoys;
        flips += run.stats.sign_flips;
        corrupt += run.stats.corrupt_outcomes;
    }
    let summary = MembershipSummary {
        k,
        member,
        runs: config.trials,
        agreement: agree as f64 / config.trials as f64,
        unreadable_runs: unreadable,
        decoy_flip_rate: flips as f64 / decoys.max(1) as f64,
        decoy_corrupt_rate: corrupt as f64 / decoys.max(1) as f64,
    };
    out.write("transcripts.jsonl", &transcripts)?;
    out.write("membership.json", &to_json_pretty(&summary))?;

    println!(
        "membership: k={k} member={member} runs={} agreement={:.4}",
        config.trials, summary.agreement
    );
    println!(
        "decoy statistics: flip rate {:.4}, corrupt rate {:.4}, unreadable runs {}",
        summary.decoy_flip_rate, summary.decoy_corrupt_rate, unreadable
    );
    println!("output: {}", config.out_dir.display());
    Ok(())
}
