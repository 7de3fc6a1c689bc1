//! Quantum Fourier Sampling and the recursive quantum RFS circuit.
//!
//! The recursive circuit realizes `U_{f_k}` for `k <= l` as a sub-circuit;
//! only `U_{f_{l+1}}` and the `U_{g_k}` touch the ledger. Level `k` owns the
//! ancillas `x_{k+1}` and `yp{k}` and reuses them across both of its
//! `U_{f_{k+1}}` uses. Free ancillas are held at `|0⟩`.
//!
//! Skipping uncomputation at a level leaves its ancillas entangled with the
//! controls. Their forced discard is simulated exactly as a computational
//! basis measurement: the run becomes a weighted ensemble of pure branches.

use std::collections::btree_map::Entry;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bitmath::BitString;
use crate::error::{Error, Result};
use crate::instance::{CountedOracle, FSTree, OracleKey, QueryLedger};
use crate::statevector::{Distribution, RegisterLayout, StateVector, DEFAULT_QUBIT_CAP};

/// Levels whose uncompute steps (the second `U_{f_{k+1}}` and its
/// surrounding Hadamards) are omitted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationPlan {
    pub skip_uncompute_at_levels: BTreeSet<usize>,
}

impl AblationPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn at(levels: impl IntoIterator<Item = usize>) -> Self {
        Self {
            skip_uncompute_at_levels: levels.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.skip_uncompute_at_levels.is_empty()
    }

    pub fn skips(&self, level: usize) -> bool {
        self.skip_uncompute_at_levels.contains(&level)
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        match self
            .skip_uncompute_at_levels
            .iter()
            .find(|&&k| k == 0 || k > depth)
        {
            Some(&k) => Err(Error::InvalidLevel {
                level: k,
                max: depth,
            }),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuantumFsOutcome {
    pub distribution: Distribution,
    pub most_likely: BitString,
}

/// One use of `U_f` between Hadamard layers on `|0…0, 1⟩`. For linear `f`
/// the bias register ends in `|s⟩`; otherwise it samples `ĝ(χ)²`.
pub fn quantum_fs(oracle: &CountedOracle<'_>, n: usize) -> Result<QuantumFsOutcome> {
    let layout = RegisterLayout::new(&[("x", n), ("y", 1)])?;
    let one = BitString::ones(1);
    let mut state = StateVector::prepare_basis(layout, &[BitString::zeros(n), one])?;
    state.apply_hadamards(&["x", "y"])?;
    state.apply_quantum_oracle(oracle, &["x"], "y")?;
    state.apply_hadamards(&["x", "y"])?;
    state.discard("y", &one)?;
    let distribution = state.measure_register("x")?;
    Ok(QuantumFsOutcome {
        most_likely: distribution.most_likely(),
        distribution,
    })
}

#[derive(Clone, Debug)]
pub struct QuantumRfsOutcome {
    /// Distribution of the answer qubit.
    pub distribution: Distribution,
    /// Most likely answer bit.
    pub answer: bool,
    /// Exact probability of reading `f_1(x_1)`.
    pub success_probability: f64,
    /// Non-ablated levels whose ancillas failed verification because an
    /// ablation elsewhere disturbed them. Always empty without ablation.
    pub discard_anomalies: Vec<String>,
    /// Number of pure branches at the end of the run.
    pub branches: usize,
}

/// Qubits needed by [`quantum_rfs`]: every `x_k`, one `yp` per level and the
/// answer qubit.
pub fn qubits_required(tree: &FSTree) -> usize {
    tree.lengths().iter().sum::<usize>() + tree.depth() + 1
}

/// Closed-form quantum counts: `2^l` uses of `U_{f_{l+1}}` and `2^{k-1}`
/// uses of `U_{g_k}`.
pub fn expected_quantum_counts(depth: usize) -> Vec<(OracleKey, u64)> {
    let mut out = vec![(OracleKey::f(depth + 1), 1u64 << depth)];
    out.extend((1..=depth).map(|k| (OracleKey::g(k), 1u64 << (k - 1))));
    out
}

pub fn quantum_rfs(
    tree: &FSTree,
    x1: &BitString,
    plan: &AblationPlan,
    ledger: &QueryLedger,
) -> Result<QuantumRfsOutcome> {
    quantum_rfs_with_cap(tree, x1, plan, ledger, DEFAULT_QUBIT_CAP)
}

pub fn quantum_rfs_with_cap(
    tree: &FSTree,
    x1: &BitString,
    plan: &AblationPlan,
    ledger: &QueryLedger,
    cap: usize,
) -> Result<QuantumRfsOutcome> {
    let l = tree.depth();
    plan.validate(l)?;
    if x1.len() != tree.width(1) {
        return Err(Error::LengthMismatch {
            expected: tree.width(1),
            found: x1.len(),
        });
    }
    let mut spec: Vec<(String, usize)> = (1..=l + 1).map(|k| (x_name(k), tree.width(k))).collect();
    spec.push(("y".into(), 1));
    spec.extend((1..=l).map(|k| (yp_name(k), 1)));
    let layout = RegisterLayout::new(&spec)?;
    let mut values: Vec<BitString> = spec.iter().map(|(_, w)| BitString::zeros(*w)).collect();
    values[0] = *x1;
    let state = StateVector::prepare_basis_with_cap(layout, &values, cap)?;

    let leaf = tree.oracle_f(ledger);
    let outputs = (1..=l)
        .map(|k| tree.oracle_g(k, ledger))
        .collect::<Result<Vec<_>>>()?;
    let mut run = Circuit {
        tree,
        plan,
        leaf,
        outputs,
        branches: vec![(1.0, state)],
        anomalies: Vec::new(),
        tables: BTreeMap::new(),
    };
    run.level(1, "y")?;

    let mut distribution = Distribution::new(1, vec![0.0, 0.0])?;
    for (w, s) in &run.branches {
        distribution.accumulate(&s.measure_register("y")?, *w);
        if plan.is_empty() {
            s.verify_register(&x_name(1), x1)?;
        }
    }
    let truth = tree.eval_f(1, &[*x1])?;
    let success_probability = distribution.probabilities()[truth as usize];
    Ok(QuantumRfsOutcome {
        answer: distribution.most_likely().bit(1),
        distribution,
        success_probability,
        discard_anomalies: run.anomalies,
        branches: run.branches.len(),
    })
}

fn x_name(k: usize) -> String {
    format!("x{k}")
}

fn yp_name(k: usize) -> String {
    format!("yp{k}")
}

/// Upper bound on branches × amplitudes held at once.
const MAX_ENSEMBLE_AMPLITUDES: usize = 1 << 26;

struct Circuit<'a> {
    tree: &'a FSTree,
    plan: &'a AblationPlan,
    leaf: CountedOracle<'a>,
    outputs: Vec<CountedOracle<'a>>,
    branches: Vec<(f64, StateVector)>,
    anomalies: Vec<String>,
    tables: BTreeMap<(OracleKey, String), Vec<bool>>,
}

impl Circuit<'_> {
    fn hadamards(&mut self, regs: &[&str]) -> Result<()> {
        for (_, s) in &mut self.branches {
            s.apply_hadamards(regs)?;
        }
        Ok(())
    }

    fn flip(&mut self, reg: &str, pattern: &BitString) -> Result<()> {
        for (_, s) in &mut self.branches {
            s.flip(reg, pattern)?;
        }
        Ok(())
    }

    fn native(&mut self, key: OracleKey, controls: &[&str], target: &str) -> Result<()> {
        let oracle = match key.level {
            lvl if key == OracleKey::f(self.tree.depth() + 1) => {
                debug_assert_eq!(lvl, self.tree.depth() + 1);
                &self.leaf
            }
            lvl => &self.outputs[lvl - 1],
        };
        let table = match self.tables.entry((key, controls.join(","))) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let first = &self.branches[0].1;
                e.insert(first.oracle_table(controls, &|a| oracle.eval(a))?)
            }
        };
        for (_, s) in &mut self.branches {
            s.apply_oracle_table(controls, target, table)?;
        }
        oracle.ledger().record(oracle.key());
        Ok(())
    }

    /// Realizes `U_{f_k}` on `(x_1..x_k, target)`.
    fn f_access(&mut self, k: usize, target: &str) -> Result<()> {
        let l = self.tree.depth();
        if k == l + 1 {
            let names: Vec<String> = (1..=k).map(x_name).collect();
            let controls: Vec<&str> = names.iter().map(String::as_str).collect();
            self.native(OracleKey::f(k), &controls, target)
        } else {
            self.level(k, target)
        }
    }

    /// Realizes `U_{f_k}` on `(x_1..x_k, target)` from `U_{f_{k+1}}` and
    /// `U_{g_k}`.
    fn level(&mut self, k: usize, target: &str) -> Result<()> {
        let anc = x_name(k + 1);
        let yp = yp_name(k);
        let one = BitString::ones(1);

        // create |0⟩ and |1⟩ from free (|0⟩) ancillas
        self.flip(&yp, &one)?;
        self.hadamards(&[&anc, &yp])?;
        self.f_access(k + 1, &yp)?;
        self.hadamards(&[&anc])?;
        let names: Vec<String> = (1..=k + 1).map(x_name).collect();
        let controls: Vec<&str> = names.iter().map(String::as_str).collect();
        self.native(OracleKey::g(k), &controls, target)?;

        if self.plan.skips(k) {
            self.force_discard(&anc)?;
            return self.force_discard(&yp);
        }
        self.hadamards(&[&anc])?;
        self.f_access(k + 1, &yp)?;
        self.hadamards(&[&anc, &yp])?;
        self.release(k, &anc, &yp)
    }

    /// Checks the ancillas hold `|0…0⟩` and `|1⟩`, then frees them.
    fn release(&mut self, k: usize, anc: &str, yp: &str) -> Result<()> {
        let zero = BitString::zeros(self.tree.width(k + 1));
        let one = BitString::ones(1);
        let mut failure = None;
        for (_, s) in &self.branches {
            if let Err(e) = s
                .verify_register(anc, &zero)
                .and_then(|_| s.verify_register(yp, &one))
            {
                failure = Some(e);
                break;
            }
        }
        match failure {
            None => self.flip(yp, &one),
            Some(e) if self.plan.is_empty() => Err(e),
            Some(e) => {
                self.anomalies.push(format!("level {k}: {e}"));
                self.force_discard(anc)?;
                self.force_discard(yp)
            }
        }
    }

    /// Measures the register in every branch and resets it to `|0…0⟩`.
    /// Branches that land on the same pure state, up to global phase, are
    /// merged by adding their weights.
    fn force_discard(&mut self, reg: &str) -> Result<()> {
        let mut next: Vec<(f64, StateVector)> = Vec::with_capacity(self.branches.len());
        let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
        let amps = self
            .branches
            .first()
            .map_or(0, |(_, s)| s.amplitudes().len());
        for (w, s) in self.branches.drain(..) {
            for (p, value, mut post) in s.measure_branches(reg)? {
                post.flip(reg, &value)?;
                let bucket = buckets.entry(population_key(&post)).or_default();
                match bucket.iter().find(|&&i| same_ray(&next[i].1, &post)) {
                    Some(&i) => next[i].0 += w * p,
                    None => {
                        bucket.push(next.len());
                        next.push((w * p, post));
                        if next.len() * amps > MAX_ENSEMBLE_AMPLITUDES {
                            return Err(Error::EnsembleTooLarge(next.len() * amps));
                        }
                    }
                }
            }
        }
        self.branches = next;
        Ok(())
    }
}

/// Hash of the basis populations rounded to `1e-6`; equal states up to
/// phase collide unless a population sits on a rounding boundary.
fn population_key(s: &StateVector) -> u64 {
    let mut h = DefaultHasher::new();
    for a in s.amplitudes() {
        ((a.norm_sqr() * 1e6).round() as u64).hash(&mut h);
    }
    h.finish()
}

fn same_ray(a: &StateVector, b: &StateVector) -> bool {
    let overlap: Complex64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum();
    overlap.norm_sqr() >= 1.0 - 1e-12
}

/// Result of checking `(H_k ⊗ H) U_{f_k} (H_k ⊗ H)|x_1..x_{k-1}, χ, υ⟩ =
/// |x_1..x_{k-1}, χ ⊕ υ s_{k-1}, υ⟩`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KickbackReport {
    pub checked: usize,
    pub max_deviation: f64,
    pub violations: Vec<String>,
}

impl KickbackReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn absorb(&mut self, other: KickbackReport) {
        self.checked += other.checked;
        self.max_deviation = self.max_deviation.max(other.max_deviation);
        self.violations.extend(other.violations);
    }
}

/// Amplitude deviation above which a kickback check is a violation.
pub const KICKBACK_TOLERANCE: f64 = 1e-9;

/// Exhaustive kickback check on plain linear oracles of width `n`, over
/// every secret, `χ` and `υ`.
pub fn verify_fs_kickback(n: usize) -> Result<KickbackReport> {
    let mut report = KickbackReport::default();
    let layout = RegisterLayout::new(&[("x", n), ("y", 1)])?;
    for s in BitString::all(n) {
        for chi in BitString::all(n) {
            for ups in BitString::all(1) {
                let mut st = StateVector::prepare_basis(layout.clone(), &[chi, ups])?;
                st.apply_hadamards(&["x", "y"])?;
                st.apply_oracle(&["x"], "y", &|a| s.dot(&a[0]))?;
                st.apply_hadamards(&["x", "y"])?;
                let shifted = if ups.bit(1) { chi.xor(&s)? } else { chi };
                let want = StateVector::prepare_basis(layout.clone(), &[shifted, ups])?;
                let dev = st.max_deviation(&want);
                report.checked += 1;
                report.max_deviation = report.max_deviation.max(dev);
                if dev > KICKBACK_TOLERANCE {
                    report
                        .violations
                        .push(format!("s={s} chi={chi} upsilon={ups}: deviation {dev:e}"));
                }
            }
        }
    }
    Ok(report)
}

/// Exhaustive kickback check of every promised level `2 <= k <= l + 1` of a
/// tree, over all parameters `x_1..x_{k-1}`, `χ` and `υ`.
pub fn verify_kickback_on_tree(tree: &FSTree) -> Result<KickbackReport> {
    let mut report = KickbackReport::default();
    for k in 2..=tree.depth() + 1 {
        let mut spec: Vec<(String, usize)> = (1..=k).map(|j| (x_name(j), tree.width(j))).collect();
        spec.push(("y".into(), 1));
        let layout = RegisterLayout::new(&spec)?;
        let names: Vec<String> = (1..=k).map(x_name).collect();
        let controls: Vec<&str> = names.iter().map(String::as_str).collect();
        let xk = x_name(k);
        let widths: Vec<usize> = (1..k).map(|j| tree.width(j)).collect();
        let param_bits: usize = widths.iter().sum();
        for code in 0..(1u64 << param_bits) {
            let params = crate::bitmath::decode_args(code, &widths);
            let s = tree.secret(k - 1, &params)?;
            for chi in BitString::all(tree.width(k)) {
                for ups in BitString::all(1) {
                    let mut values = params.clone();
                    values.extend([chi, ups]);
                    let mut st = StateVector::prepare_basis(layout.clone(), &values)?;
                    st.apply_hadamards(&[&xk, "y"])?;
                    st.apply_oracle(&controls, "y", &|a| tree.eval_f(k, a))?;
                    st.apply_hadamards(&[&xk, "y"])?;
                    let shifted = if ups.bit(1) { chi.xor(&s)? } else { chi };
                    let mut expected = params.clone();
                    expected.extend([shifted, ups]);
                    let want = StateVector::prepare_basis(layout.clone(), &expected)?;
                    let dev = st.max_deviation(&want);
                    report.checked += 1;
                    report.max_deviation = report.max_deviation.max(dev);
                    if dev > KICKBACK_TOLERANCE {
                        report.violations.push(format!(
                            "k={k} params={} chi={chi} upsilon={ups}: deviation {dev:e}",
                            crate::instance::fmt_args(&params)
                        ));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// [`verify_kickback_on_tree`] over uniform-width trees of depth `depth`,
/// one per seed and family.
pub fn verify_kickback_identity(n: usize, depth: usize, seeds: &[u64]) -> Result<KickbackReport> {
    use crate::instance::{FSTreeConfig, GFamily};
    let mut report = KickbackReport::default();
    for &seed in seeds {
        for fam in [GFamily::And, GFamily::Majority, GFamily::Prf] {
            let tree = FSTree::build(FSTreeConfig::new(vec![n; depth + 1], fam, seed))?;
            report.absorb(verify_kickback_on_tree(&tree)?);
        }
    }
    Ok(report)
}
