//! Invariant checks shared by the `verify` command and the acceptance
//! suite. Each check reports how many cases it examined and the first
//! counterexample it met.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitmath::{decode_args, sign_spectrum, BitString, TruthTable};
use crate::classical::{classical_rfs, expected_classical_counts, linear_g_shortcut};
use crate::conjugate::{cp_rfs_run, DiscardError};
use crate::error::{Error, Result};
use crate::instance::{
    fmt_args, CountedOracle, FSTree, FSTreeConfig, GFamily, OracleKey, QueryLedger,
};
use crate::quantum::{
    expected_quantum_counts, quantum_fs, quantum_rfs, qubits_required, verify_fs_kickback,
    verify_kickback_identity, AblationPlan,
};
use crate::translate::{from_aaronson, to_aaronson};

/// Success threshold for runs that should be deterministic.
pub const CERTAINTY: f64 = 1.0 - 1e-9;

/// An ablated run counts as failing below this success probability.
pub const ABLATION_FAILURE: f64 = 1.0 - 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub cases: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckOutcome {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            cases: 0,
            detail: None,
        }
    }

    fn case(&mut self, ok: bool, why: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok && self.passed {
            self.passed = false;
            self.detail = Some(why());
        }
    }

    fn note(mut self, detail: impl Into<String>) -> Self {
        if self.detail.is_none() {
            self.detail = Some(detail.into());
        }
        self
    }
}

/// Prefixes `(x_1..x_m)` to examine: all of them when there are at most
/// `budget`, otherwise `budget` seeded random draws.
fn prefixes(widths: &[usize], budget: u64, seed: u64) -> Vec<Vec<BitString>> {
    let bits: usize = widths.iter().sum();
    if bits < 64 && (1u64 << bits) <= budget {
        return (0..(1u64 << bits))
            .map(|c| decode_args(c, widths))
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..budget)
        .map(|_| {
            widths
                .iter()
                .map(|&w| BitString::new(w, rng.gen::<u64>() & ((1u64 << w) - 1)).expect("masked"))
                .collect()
        })
        .collect()
}

/// Both tree promises: `x_k ↦ f_k(prefix, x_k)` has spectrum `δ_{s_{k-1}}`
/// for every `2 <= k <= l + 1`, and `g_k(prefix, s_k) = s_{k-1} · x_k` for
/// every `2 <= k <= l`. Exhaustive up to `budget` prefixes per level.
pub fn check_tree_promises(tree: &FSTree, budget: u64, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("tree promises");
    let l = tree.depth();
    for k in 2..=l + 1 {
        for prefix in prefixes(&tree.lengths()[..k - 1], budget, seed ^ k as u64) {
            let s = tree.secret(k - 1, &prefix)?;
            let table = TruthTable::try_from_fn(tree.width(k), |t| {
                let mut args = prefix.clone();
                args.push(*t);
                tree.eval_f(k, &args)
            })?;
            out.case(sign_spectrum(&table).is_delta_at(&s), || {
                let witness = BitString::all(tree.width(k))
                    .find(|t| table.at(t.index()) != s.dot(t).unwrap_or(false))
                    .map_or(String::new(), |t| {
                        format!(
                            ": f_{k}(..,{t}) = {} but s·x = {}",
                            table.at(t.index()) as u8,
                            !table.at(t.index()) as u8
                        )
                    });
                format!(
                    "linearity fails at k={k}, prefix ({}), secret {s}{witness}",
                    fmt_args(&prefix)
                )
            });
            if k <= l {
                for xk in BitString::all(tree.width(k)) {
                    let mut args = prefix.clone();
                    args.push(xk);
                    let want = s.dot(&xk)?;
                    let mut full = args.clone();
                    full.push(tree.secret(k, &args)?);
                    let got = tree.eval_g(k, &full)?;
                    out.case(got == want, || {
                        format!(
                            "g_{k}({}, s_{k}) = {} but s_{}·x_{k} = {}",
                            fmt_args(&args),
                            got as u8,
                            k - 1,
                            want as u8
                        )
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Every linear function on `n <= max_n` bits has an exact delta spectrum,
/// and every Boolean function has `Σ ĝ² = 1` within `1e-12`.
pub fn check_spectrum(max_n: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("sign spectrum");
    for n in 1..=max_n {
        for s in BitString::all(n) {
            let table = TruthTable::from_fn(n, |x| s.dot(x).unwrap_or(false))?;
            let spec = sign_spectrum(&table);
            let exact =
                BitString::all(n).all(|chi| spec.values()[chi.index()] == (chi == s) as u8 as f64);
            out.case(exact, || format!("spectrum of s={s} is not an exact delta"));
        }
        for code in 0..(1u64 << (1 << n)) {
            let table = TruthTable::new(n, (0..1 << n).map(|i| code >> i & 1 == 1).collect())?;
            let sum = sign_spectrum(&table).parseval_sum();
            out.case((sum - 1.0).abs() <= 1e-12, || {
                format!("Parseval sum {sum} for table {}", table.to_bit_string())
            });
        }
    }
    Ok(out)
}

/// Quantum Fourier Sampling returns `s` with probability at least
/// [`CERTAINTY`] for every `s` with `n <= max_n`.
pub fn check_fs_probability(max_n: usize) -> Result<(CheckOutcome, f64)> {
    let mut out = CheckOutcome::new("fourier sampling certainty");
    let mut min_p = 1.0f64;
    for n in 1..=max_n {
        for s in BitString::all(n) {
            let ledger = QueryLedger::new();
            let res = quantum_fs(&CountedOracle::linear(s, &ledger), n)?;
            let p = res.distribution.probability(&s)?;
            min_p = min_p.min(p);
            out.case(p >= CERTAINTY && ledger.total() == 1, || {
                format!("s={s}: P(s) = {p}, oracle uses {}", ledger.total())
            });
        }
    }
    Ok((out, min_p))
}

/// Both kickback identities, exhaustively at width `n`.
pub fn check_kickback(n: usize, depth: usize, seeds: &[u64]) -> Result<(CheckOutcome, f64)> {
    let mut out = CheckOutcome::new("kickback identity");
    let fs = verify_fs_kickback(n)?;
    let tree = verify_kickback_identity(n, depth, seeds)?;
    out.cases = (fs.checked + tree.checked) as u64;
    out.passed = fs.passed() && tree.passed();
    out.detail = fs.violations.first().or(tree.violations.first()).cloned();
    Ok((out, fs.max_deviation.max(tree.max_deviation)))
}

fn ledger_mismatch(ledger: &QueryLedger, expected: &[(OracleKey, u64)]) -> Option<String> {
    let wrong: Vec<String> = expected
        .iter()
        .filter(|(k, n)| ledger.count(*k) != *n)
        .map(|(k, n)| format!("{k}: {} (expected {n})", ledger.count(*k)))
        .collect();
    let extra = ledger.total() != expected.iter().map(|(_, n)| n).sum::<u64>();
    (!wrong.is_empty() || extra).then(|| {
        if wrong.is_empty() {
            format!("ledger has unexpected entries: {:?}", ledger.snapshot())
        } else {
            wrong.join(", ")
        }
    })
}

/// Classical counts match the closed-form products for every `x_1`.
pub fn check_classical_counts(tree: &FSTree) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("classical query counts");
    let expected = expected_classical_counts(tree.lengths());
    for x1 in tree.inputs() {
        let ledger = QueryLedger::new();
        let answer = classical_rfs(tree, &x1, &ledger)?;
        let truth = tree.eval_f(1, &[x1])?;
        let bad = ledger_mismatch(&ledger, &expected);
        out.case(bad.is_none() && answer == truth, || {
            format!(
                "x1={x1}: answer {} vs f_1 {}; {}",
                answer as u8,
                truth as u8,
                bad.unwrap_or_default()
            )
        });
    }
    Ok(out)
}

/// Quantum counts are `2^l` leaf uses and `2^{k-1}` uses of `g_k`, and the
/// answer has probability at least [`CERTAINTY`], for every `x_1`. Returns
/// the lowest success probability seen.
pub fn check_quantum_counts(tree: &FSTree) -> Result<(CheckOutcome, f64)> {
    let mut out = CheckOutcome::new("quantum query counts");
    let expected = expected_quantum_counts(tree.depth());
    let mut min_p = 1.0f64;
    for x1 in tree.inputs() {
        let ledger = QueryLedger::new();
        let res = quantum_rfs(tree, &x1, &AblationPlan::none(), &ledger)?;
        let truth = tree.eval_f(1, &[x1])?;
        min_p = min_p.min(res.success_probability);
        let bad = ledger_mismatch(&ledger, &expected);
        out.case(
            bad.is_none() && res.answer == truth && res.success_probability >= CERTAINTY,
            || {
                format!(
                    "x1={x1}: answer {} vs f_1 {}, success {}; {}",
                    res.answer as u8,
                    truth as u8,
                    res.success_probability,
                    bad.unwrap_or_default()
                )
            },
        );
    }
    Ok((out, min_p))
}

/// The three solvers and `eval_f(1, ·)` agree for every `x_1`.
pub fn check_cross_track(tree: &FSTree) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("cross-track agreement");
    let none = AblationPlan::none();
    for x1 in tree.inputs() {
        let c = classical_rfs(tree, &x1, &QueryLedger::new())?;
        let q = quantum_rfs(tree, &x1, &none, &QueryLedger::new())?.answer;
        let run = cp_rfs_run(tree, &x1, &none, &QueryLedger::new())?;
        let truth = tree.eval_f(1, &[x1])?;
        let agree = run.outcome == Ok(c) && q == c && c == truth && run.live_tokens.is_empty();
        out.case(agree, || {
            format!(
                "x1={x1}: classical {c}, quantum {q}, kickback {:?}, f_1 {truth}",
                run.outcome
            )
        });
    }
    Ok(out)
}

/// The linear-`g_1` shortcut answers correctly with one `f_2` call.
pub fn check_shortcut(tree: &FSTree) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("linear g shortcut");
    for x1 in tree.inputs() {
        let ledger = QueryLedger::new();
        let got = linear_g_shortcut(tree, &x1, &ledger)?;
        let want = classical_rfs(tree, &x1, &QueryLedger::new())?;
        let calls = ledger.count(OracleKey::f(2));
        out.case(got == want && calls == 1 && ledger.total() == 1, || {
            format!(
                "x1={x1}: shortcut {got} vs {want}, f2 calls {calls}, total {}",
                ledger.total()
            )
        });
    }
    Ok(out)
}

/// Tree to Aaronson form and back, at every `x_1`: every `f_k` and `g_k`
/// table is preserved and the reconverted instance solves identically on
/// all tracks. Trees not expressible in that form pass vacuously.
pub fn check_translation(tree: &FSTree) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("aaronson round trip");
    let l = tree.depth();
    for x1 in tree.inputs() {
        let inst = match to_aaronson(tree, &x1) {
            Ok(i) => i,
            Err(Error::NotExpressible(why)) => return Ok(out.note(format!("skipped: {why}"))),
            Err(e) => return Err(e),
        };
        let back = from_aaronson(&inst)?;
        out.case(to_aaronson(&back, &x1)? == inst, || {
            format!("x1={x1}: A/G tables changed")
        });
        for k in 1..=l + 1 {
            let widths = &tree.lengths()[1..k];
            for rest in prefixes(widths, u64::MAX, 0) {
                let mut args = vec![x1];
                args.extend(rest);
                let (a, b) = (tree.eval_f(k, &args)?, back.eval_f(k, &args)?);
                out.case(a == b, || {
                    format!("f_{k}({}) changed from {a} to {b}", fmt_args(&args))
                });
            }
        }
        for k in 1..=l {
            out.case(tree.last_arg_table(k) == back.last_arg_table(k), || {
                format!("g_{k} table changed")
            });
        }
        let want = classical_rfs(tree, &x1, &QueryLedger::new())?;
        let none = AblationPlan::none();
        for y1 in back.inputs() {
            let c = classical_rfs(&back, &y1, &QueryLedger::new())?;
            let q = quantum_rfs(&back, &y1, &none, &QueryLedger::new())?.answer;
            let k = cp_rfs_run(&back, &y1, &none, &QueryLedger::new())?.outcome;
            out.case(c == want && q == want && k == Ok(want), || {
                format!("x1={x1}: original {want}, converted classical {c}, quantum {q}, kickback {k:?}")
            });
        }
    }
    Ok(out)
}

/// Outcome of skipping uncomputation at one level, over every `x_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationFinding {
    pub level: usize,
    pub min_success: f64,
    pub worst_x1: BitString,
    pub success_by_x1: Vec<(BitString, f64)>,
    pub discard_errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_discard: Option<String>,
    pub inputs: usize,
}

impl AblationFinding {
    pub fn quantum_fails(&self) -> bool {
        self.min_success < ABLATION_FAILURE
    }

    pub fn kickback_fails_everywhere(&self) -> bool {
        self.discard_errors == self.inputs
    }
}

pub fn ablation_experiment(tree: &FSTree, level: usize) -> Result<AblationFinding> {
    let plan = AblationPlan::at([level]);
    let mut success_by_x1 = Vec::new();
    let mut discard_errors = 0;
    let mut first_discard: Option<DiscardError> = None;
    for x1 in tree.inputs() {
        let q = quantum_rfs(tree, &x1, &plan, &QueryLedger::new())?;
        success_by_x1.push((x1, q.success_probability));
        if let Err(e) = cp_rfs_run(tree, &x1, &plan, &QueryLedger::new())?.outcome {
            discard_errors += 1;
            first_discard.get_or_insert(e);
        }
    }
    let (worst_x1, min_success) = success_by_x1
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one input");
    Ok(AblationFinding {
        level,
        min_success,
        worst_x1,
        inputs: success_by_x1.len(),
        success_by_x1,
        discard_errors,
        first_discard: first_discard.map(|e| e.to_string()),
    })
}

/// Desk-scale instances: widths up to 3, depth up to 3, every family.
pub fn desk_suite(seed: u64) -> Vec<FSTreeConfig> {
    let shapes: [&[usize]; 10] = [
        &[1, 1],
        &[2, 2],
        &[3, 3],
        &[2, 2, 2],
        &[2, 3, 2],
        &[3, 2, 3],
        &[3, 3, 3],
        &[2, 2, 2, 2],
        &[1, 2, 3, 2],
        &[2, 3, 3, 3],
    ];
    let families = [
        GFamily::And,
        GFamily::Majority,
        GFamily::Parity,
        GFamily::Prf,
    ];
    let mut out = Vec::new();
    for (i, shape) in shapes.iter().enumerate() {
        for (j, fam) in families.iter().enumerate() {
            let s = seed.wrapping_add((i * families.len() + j) as u64);
            let cfg = FSTreeConfig::new(shape.to_vec(), fam.clone(), s);
            if FSTree::build(cfg.clone()).is_ok() {
                out.push(cfg);
            }
        }
    }
    out
}

/// Every per-instance check on every desk instance, plus the global
/// spectrum, Fourier Sampling and kickback checks.
pub fn run_desk_suite(seed: u64, cap: usize) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![
        check_spectrum(4)?,
        check_fs_probability(4)?.0,
        check_kickback(2, 2, &[seed, seed.wrapping_add(1)])?.0,
    ];
    for cfg in desk_suite(seed) {
        let tree = FSTree::build(cfg)?;
        let label = format!(
            "{} {:?} seed {}",
            tree.g_family(),
            tree.lengths(),
            tree.config().seed
        );
        let mut checks = vec![
            check_tree_promises(&tree, 1 << 12, seed)?,
            check_classical_counts(&tree)?,
        ];
        if qubits_required(&tree) <= cap {
            checks.push(check_quantum_counts(&tree)?.0);
            checks.push(check_cross_track(&tree)?);
        }
        if tree.depth() <= 2 && tree.lengths().iter().all(|&n| n <= 2) {
            checks.push(check_translation(&tree)?);
        }
        if tree.depth() == 1 && tree.g_linear_coefficients(1).is_some() {
            checks.push(check_shortcut(&tree)?);
        }
        for mut c in checks {
            c.name = format!("{} [{label}]", c.name);
            out.push(c);
        }
    }
    Ok(out)
}
