//! Conjugate-pair oracles: registers as pairs `[x, χ]` of a computational
//! side and a phase side, at most one of them well defined.
//!
//! A defined side is a concrete bitstring XOR a set of symbolic terms. Two
//! kinds of term exist:
//!
//! * a secret `s_k(a_1, …, a_k)` whose arguments include a register that is
//!   in phase mode (its `x` is undefined), so the value is correlated with
//!   an undefined input; secrets with fully known arguments are evaluated
//!   on the spot;
//! * a kickback token `X_j`, the unpromised phase shift an oracle adds to a
//!   control that is not its promised slot. Tokens are identified by oracle,
//!   a fingerprint of every control's computational side, and the control
//!   index, so repeating an identical query cancels them.
//!
//! Term sets are XOR sets: adding a term already present removes it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitmath::BitString;
use crate::error::{Error, Result};
use crate::instance::{FSTree, OracleKey, QueryLedger};
use crate::quantum::AblationPlan;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("discard of {register} at level {level} failed: {violation}")]
pub struct DiscardError {
    pub level: usize,
    pub register: String,
    pub violation: String,
}

/// How a secret's argument is known at the time the secret was kicked.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arg {
    Known(BitString),
    /// Computational side of the named register, undefined.
    Unknown(String),
    /// Computational side given by a symbolic expression.
    Expr(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Known(b) => write!(f, "{b}"),
            Arg::Unknown(name) => write!(f, "?{name}"),
            Arg::Expr(e) => write!(f, "({e})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KickbackToken {
    pub oracle: OracleKey,
    pub fingerprint: String,
    /// 1-based control index that received the shift.
    pub register: usize,
}

impl fmt::Display for KickbackToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "X{}[{}|{}]",
            self.register, self.oracle, self.fingerprint
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Secret { level: usize, args: Vec<Arg> },
    Token(KickbackToken),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Secret { level, args } => {
                let parts: Vec<String> = args.iter().map(Arg::to_string).collect();
                write!(f, "s{level}({})", parts.join(","))
            }
            Term::Token(t) => write!(f, "{t}"),
        }
    }
}

/// One side of a conjugate pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Side {
    Undefined,
    Defined {
        value: BitString,
        terms: BTreeSet<Term>,
    },
}

impl Side {
    pub fn concrete(value: BitString) -> Self {
        Side::Defined {
            value,
            terms: BTreeSet::new(),
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, Side::Defined { .. })
    }

    /// The value, if defined and free of terms.
    pub fn known(&self) -> Option<BitString> {
        match self {
            Side::Defined { value, terms } if terms.is_empty() => Some(*value),
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        let set = match self {
            Side::Defined { terms, .. } => Some(terms),
            Side::Undefined => None,
        };
        set.into_iter().flatten()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &KickbackToken> {
        self.terms().filter_map(|t| match t {
            Term::Token(k) => Some(k),
            Term::Secret { .. } => None,
        })
    }

    fn xor_value(&mut self, v: &BitString) -> Result<()> {
        match self {
            Side::Defined { value, .. } => {
                *value = value.xor(v)?;
                Ok(())
            }
            Side::Undefined => Err(Error::IllPosedQuery(
                "shift applied to an undefined side".into(),
            )),
        }
    }

    /// Toggles `term`; returns true if it was added, false if it canceled.
    fn toggle(&mut self, term: Term) -> Result<bool> {
        match self {
            Side::Defined { terms, .. } => Ok(if terms.remove(&term) {
                false
            } else {
                terms.insert(term);
                true
            }),
            Side::Undefined => Err(Error::IllPosedQuery(
                "shift applied to an undefined side".into(),
            )),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Undefined => write!(f, "⊥"),
            Side::Defined { value, terms } => {
                write!(f, "{value}")?;
                for t in terms {
                    write!(f, "+{t}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjugateRegister {
    pub name: String,
    pub width: usize,
    pub x: Side,
    pub chi: Side,
}

impl ConjugateRegister {
    /// `[x, ⊥]`
    pub fn computational(name: &str, x: BitString) -> Self {
        Self {
            name: name.into(),
            width: x.len(),
            x: Side::concrete(x),
            chi: Side::Undefined,
        }
    }

    /// `[⊥, χ]`
    pub fn phase(name: &str, chi: BitString) -> Self {
        Self {
            name: name.into(),
            width: chi.len(),
            x: Side::Undefined,
            chi: Side::concrete(chi),
        }
    }

    pub fn is_one_sided(&self) -> bool {
        !(self.x.is_defined() && self.chi.is_defined())
    }

    fn descriptor(&self) -> Arg {
        match &self.x {
            Side::Undefined => Arg::Unknown(self.name.clone()),
            side => match side.known() {
                Some(v) => Arg::Known(v),
                None => Arg::Expr(side.to_string()),
            },
        }
    }
}

impl fmt::Display for ConjugateRegister {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}=[{}, {}]", self.name, self.x, self.chi)
    }
}

/// `𝓗ⁿ[x, χ] = [χ, x]`
pub fn hadamard_pair(reg: &ConjugateRegister) -> ConjugateRegister {
    ConjugateRegister {
        name: reg.name.clone(),
        width: reg.width,
        x: reg.chi.clone(),
        chi: reg.x.clone(),
    }
}

/// The value a register must hold to be discarded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expected {
    Computational(BitString),
    Phase(BitString),
}

/// `Ok` iff the documented side is defined, equals the documented value, and
/// carries no terms.
pub fn discard_check(
    reg: &ConjugateRegister,
    expected: &Expected,
) -> std::result::Result<(), String> {
    let (side, other, want, label) = match expected {
        Expected::Computational(v) => (&reg.x, &reg.chi, v, "computational"),
        Expected::Phase(v) => (&reg.chi, &reg.x, v, "phase"),
    };
    let all_terms = || side.terms().chain(other.terms());
    if let Some(t) = all_terms().find(|t| matches!(t, Term::Token(_))) {
        return Err(format!("unresolved kickback token {t}"));
    }
    if let Some(t) = all_terms().next() {
        return Err(format!("value correlated with undefined input: {t}"));
    }
    let Side::Defined { value, .. } = side else {
        let held = match other {
            Side::Undefined => String::new(),
            s => format!(" (other side holds {s})"),
        };
        return Err(format!("{label} side undefined{held}"));
    };
    if value != want {
        return Err(format!("holds {value} instead of documented {want}"));
    }
    Ok(())
}

/// Named registers owned by one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairState {
    regs: Vec<ConjugateRegister>,
}

impl PairState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, reg: ConjugateRegister) -> Result<()> {
        if self.regs.iter().any(|r| r.name == reg.name) {
            return Err(Error::DuplicateRegister(reg.name));
        }
        self.regs.push(reg);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&ConjugateRegister> {
        self.regs
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.into()))
    }

    fn get_mut(&mut self, name: &str) -> Result<&mut ConjugateRegister> {
        self.regs
            .iter_mut()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.into()))
    }

    pub fn remove(&mut self, name: &str) -> Result<ConjugateRegister> {
        let i = self
            .regs
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.into()))?;
        Ok(self.regs.remove(i))
    }

    pub fn hadamard(&mut self, name: &str) -> Result<()> {
        let r = self.get_mut(name)?;
        *r = hadamard_pair(r);
        Ok(())
    }

    pub fn registers(&self) -> &[ConjugateRegister] {
        &self.regs
    }

    pub fn live_tokens(&self) -> Vec<KickbackToken> {
        self.regs
            .iter()
            .flat_map(|r| r.x.tokens().chain(r.chi.tokens()).cloned())
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
enum Law<'a> {
    Linear(BitString),
    Leaf(&'a FSTree),
    Output(&'a FSTree, usize),
}

/// A counted oracle with both maps: `x ↦ f(x)` and the kickback law.
#[derive(Clone, Copy, Debug)]
pub struct ConjugateOracle<'a> {
    key: OracleKey,
    law: Law<'a>,
    ledger: &'a QueryLedger,
}

impl<'a> ConjugateOracle<'a> {
    /// Plain Fourier Sampling oracle `f(x) = s·x`, keyed as `f1`.
    pub fn linear(secret: BitString, ledger: &'a QueryLedger) -> Self {
        Self {
            key: OracleKey::f(1),
            law: Law::Linear(secret),
            ledger,
        }
    }

    /// `𝓕_{l+1}`
    pub fn leaf(tree: &'a FSTree, ledger: &'a QueryLedger) -> Self {
        Self {
            key: OracleKey::f(tree.depth() + 1),
            law: Law::Leaf(tree),
            ledger,
        }
    }

    /// `𝓖_k`
    pub fn output(tree: &'a FSTree, k: usize, ledger: &'a QueryLedger) -> Result<Self> {
        if k == 0 || k > tree.depth() {
            return Err(Error::InvalidLevel {
                level: k,
                max: tree.depth(),
            });
        }
        Ok(Self {
            key: OracleKey::g(k),
            law: Law::Output(tree, k),
            ledger,
        })
    }

    pub fn key(&self) -> OracleKey {
        self.key
    }

    pub fn widths(&self) -> Vec<usize> {
        match self.law {
            Law::Linear(s) => vec![s.len()],
            Law::Leaf(t) => t.lengths().to_vec(),
            Law::Output(t, k) => t.lengths()[..=k].to_vec(),
        }
    }

    fn eval(&self, args: &[BitString]) -> Result<bool> {
        match self.law {
            Law::Linear(s) => s.dot(&args[0]),
            Law::Leaf(t) => t.eval_f(t.depth() + 1, args),
            Law::Output(t, k) => t.eval_g(k, args),
        }
    }

    /// Secret `s_level` of the given arguments: concrete if every argument
    /// is known, symbolic otherwise.
    fn secret(tree: &FSTree, level: usize, args: Vec<Arg>) -> Result<Shift> {
        let known: Option<Vec<BitString>> = args
            .iter()
            .map(|a| match a {
                Arg::Known(b) => Some(*b),
                _ => None,
            })
            .collect();
        Ok(match known {
            Some(vals) => Shift::Value(tree.secret(level, &vals)?),
            None => Shift::Term(Term::Secret { level, args }),
        })
    }

    /// The promised kickback: the 0-based slot and the shift it receives.
    fn promised(&self, regs: &[&ConjugateRegister]) -> Result<Option<(usize, Shift)>> {
        let desc: Vec<Arg> = regs.iter().map(|r| r.descriptor()).collect();
        match self.law {
            Law::Linear(s) => Ok(Some((0, Shift::Value(s)))),
            Law::Leaf(t) => {
                let l = t.depth();
                Ok(Some((l, Self::secret(t, l, desc[..l].to_vec())?)))
            }
            Law::Output(t, k) => {
                // g_k(x_1..x_k, s_k(x_1..x_k)) = f_k, linear in x_k for k >= 2
                if k < 2 {
                    return Ok(None);
                }
                let holds_secret = match Self::secret(t, k, desc[..k].to_vec())? {
                    Shift::Value(v) => regs[k].x.known() == Some(v),
                    Shift::Term(term) => {
                        regs[k].x
                            == Side::Defined {
                                value: BitString::zeros(t.width(k + 1)),
                                terms: BTreeSet::from([term]),
                            }
                    }
                };
                if !holds_secret {
                    return Ok(None);
                }
                Ok(Some((
                    k - 1,
                    Self::secret(t, k - 1, desc[..k - 1].to_vec())?,
                )))
            }
        }
    }
}

enum Shift {
    Value(BitString),
    Term(Term),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Computational,
    Phase,
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryMode::Computational => "computational",
            QueryMode::Phase => "phase",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryEffect {
    pub mode: QueryMode,
    pub created: Vec<KickbackToken>,
    pub canceled: Vec<KickbackToken>,
}

/// One conjugate-pair query.
///
/// Computational mode needs every control's `x` known and the target's `y`
/// known; the target gains `f(args)`. Phase mode needs the target's `υ`
/// known and at least one control with a defined phase side. With `υ = 1`
/// the promised slot gains its secret and every other phase-side control
/// gains a token; with `υ = 0` nothing moves. Anything else is ill posed.
pub fn cp_apply(
    oracle: &ConjugateOracle<'_>,
    state: &mut PairState,
    controls: &[&str],
    target: &str,
) -> Result<QueryEffect> {
    let widths = oracle.widths();
    if controls.len() != widths.len() {
        return Err(Error::ArityMismatch {
            expected: widths.len(),
            found: controls.len(),
        });
    }
    if controls.contains(&target) {
        return Err(Error::IllPosedQuery(format!(
            "`{target}` is both control and target"
        )));
    }
    let regs = controls
        .iter()
        .map(|c| state.get(c))
        .collect::<Result<Vec<_>>>()?;
    for (r, &w) in regs.iter().zip(&widths) {
        if r.width != w {
            return Err(Error::LengthMismatch {
                expected: w,
                found: r.width,
            });
        }
    }
    let t = state.get(target)?;
    if t.width != 1 {
        return Err(Error::LengthMismatch {
            expected: 1,
            found: t.width,
        });
    }

    let args: Option<Vec<BitString>> = regs.iter().map(|r| r.x.known()).collect();
    if let (Some(args), Some(y)) = (&args, t.x.known()) {
        let out = oracle.eval(args)?;
        state.get_mut(target)?.x = Side::concrete(y.xor(&BitString::new(1, out as u64)?)?);
        oracle.ledger.record(oracle.key);
        return Ok(QueryEffect {
            mode: QueryMode::Computational,
            created: vec![],
            canceled: vec![],
        });
    }

    let Some(upsilon) = t.chi.known() else {
        return Err(Error::IllPosedQuery(format!(
            "{}: target {t} has neither a known bias nor a known phase",
            oracle.key
        )));
    };
    let phased: Vec<usize> = (0..regs.len())
        .filter(|&j| regs[j].chi.is_defined())
        .collect();
    if phased.is_empty() {
        return Err(Error::IllPosedQuery(format!(
            "{}: phase query with no phase-side control",
            oracle.key
        )));
    }
    if let Some(r) = regs
        .iter()
        .find(|r| !r.x.is_defined() && !r.chi.is_defined())
    {
        return Err(Error::IllPosedQuery(format!(
            "{}: control {} has neither side defined",
            oracle.key, r.name
        )));
    }
    oracle.ledger.record(oracle.key);
    let mut effect = QueryEffect {
        mode: QueryMode::Phase,
        created: vec![],
        canceled: vec![],
    };
    if !upsilon.bit(1) {
        return Ok(effect);
    }

    let promised = oracle.promised(&regs)?;
    let fingerprint = regs
        .iter()
        .map(|r| r.descriptor().to_string())
        .collect::<Vec<_>>()
        .join(",");
    let names: Vec<String> = regs.iter().map(|r| r.name.clone()).collect();
    let mut promised = promised;
    for j in phased {
        let side = &mut state.get_mut(&names[j])?.chi;
        match promised.take_if(|(slot, _)| *slot == j) {
            Some((_, Shift::Value(v))) => side.xor_value(&v)?,
            Some((_, Shift::Term(term))) => {
                side.toggle(term)?;
            }
            None => {
                let token = KickbackToken {
                    oracle: oracle.key,
                    fingerprint: fingerprint.clone(),
                    register: j + 1,
                };
                if side.toggle(Term::Token(token.clone()))? {
                    effect.created.push(token);
                } else {
                    effect.canceled.push(token);
                }
            }
        }
    }
    Ok(effect)
}

/// One pair-oracle use on `[⊥, 0]` with ancilla `[⊥, 1]`; returns `χ`.
pub fn cp_fs(oracle: &ConjugateOracle<'_>, n: usize) -> Result<BitString> {
    let mut state = PairState::new();
    state.push(ConjugateRegister::phase("x", BitString::zeros(n)))?;
    state.push(ConjugateRegister::phase("y", BitString::ones(1)))?;
    cp_apply(oracle, &mut state, &["x"], "y")?;
    let y = state.remove("y")?;
    discard_check(&y, &Expected::Phase(BitString::ones(1))).map_err(|violation| DiscardError {
        level: 1,
        register: "y".into(),
        violation,
    })?;
    let x = state.get("x")?;
    x.chi
        .known()
        .ok_or_else(|| Error::IllPosedQuery(format!("bias register ended as {x}")))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAction {
    Create,
    Hadamard,
    Query,
    Discard,
}

/// One step of a conjugate-pair run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: usize,
    pub level: usize,
    pub action: TraceAction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleKey>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<QueryMode>,
    pub registers: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tokens_created: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tokens_canceled: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ConjugateRun {
    pub outcome: std::result::Result<bool, DiscardError>,
    pub trace: Vec<TraceEntry>,
    /// Times each token was added (cancellations count as additions too).
    pub token_additions: BTreeMap<KickbackToken, u64>,
    /// Tokens held by registers when the run ended.
    pub live_tokens: Vec<KickbackToken>,
}

impl ConjugateRun {
    /// Every token added an even number of times.
    pub fn tokens_conserved(&self) -> bool {
        self.token_additions.values().all(|n| n % 2 == 0)
    }
}

/// Algorithm-level phase-kickback RFS. Returns `f_1(x_1)`, or the discard
/// failure caused by skipping uncomputation at an ablated level.
pub fn cp_rfs(
    tree: &FSTree,
    x1: &BitString,
    plan: &AblationPlan,
    ledger: &QueryLedger,
) -> Result<bool> {
    Ok(cp_rfs_run(tree, x1, plan, ledger)?.outcome?)
}

/// [`cp_rfs`] with its trace and token bookkeeping. Errors other than
/// discard failures are returned as `Err`.
pub fn cp_rfs_run(
    tree: &FSTree,
    x1: &BitString,
    plan: &AblationPlan,
    ledger: &QueryLedger,
) -> Result<ConjugateRun> {
    let l = tree.depth();
    plan.validate(l)?;
    if x1.len() != tree.width(1) {
        return Err(Error::LengthMismatch {
            expected: tree.width(1),
            found: x1.len(),
        });
    }
    let mut run = Engine {
        tree,
        plan,
        leaf: ConjugateOracle::leaf(tree, ledger),
        outputs: (1..=l)
            .map(|k| ConjugateOracle::output(tree, k, ledger))
            .collect::<Result<_>>()?,
        state: PairState::new(),
        trace: Vec::new(),
        additions: BTreeMap::new(),
    };
    run.state
        .push(ConjugateRegister::computational("x1", *x1))?;
    run.state
        .push(ConjugateRegister::computational("y", BitString::zeros(1)))?;
    let outcome = match run.level(1, "y") {
        Ok(()) => {
            let y = run.state.get("y")?;
            let bit =
                y.x.known()
                    .ok_or_else(|| Error::IllPosedQuery(format!("answer register ended as {y}")))?;
            Ok(bit.bit(1))
        }
        Err(Error::Discard(e)) => Err(e),
        Err(e) => return Err(e),
    };
    Ok(ConjugateRun {
        outcome,
        live_tokens: run.state.live_tokens(),
        trace: run.trace,
        token_additions: run.additions,
    })
}

struct Engine<'a> {
    tree: &'a FSTree,
    plan: &'a AblationPlan,
    leaf: ConjugateOracle<'a>,
    outputs: Vec<ConjugateOracle<'a>>,
    state: PairState,
    trace: Vec<TraceEntry>,
    additions: BTreeMap<KickbackToken, u64>,
}

impl Engine<'_> {
    fn log(
        &mut self,
        level: usize,
        action: TraceAction,
        registers: &[&str],
        query: Option<(OracleKey, &QueryEffect)>,
    ) {
        let (oracle, mode, created, canceled) = match query {
            Some((key, e)) => (
                Some(key),
                Some(e.mode),
                e.created.iter().map(ToString::to_string).collect(),
                e.canceled.iter().map(ToString::to_string).collect(),
            ),
            None => (None, None, vec![], vec![]),
        };
        self.trace.push(TraceEntry {
            step: self.trace.len() + 1,
            level,
            action,
            oracle,
            mode,
            registers: registers.iter().map(|s| s.to_string()).collect(),
            tokens_created: created,
            tokens_canceled: canceled,
        });
    }

    fn check_one_sided(&self) -> Result<()> {
        match self.state.registers().iter().find(|r| !r.is_one_sided()) {
            Some(r) => Err(Error::IllPosedQuery(format!(
                "register {r} has both sides defined"
            ))),
            None => Ok(()),
        }
    }

    fn native(
        &mut self,
        level: usize,
        oracle: ConjugateOracle<'_>,
        controls: &[&str],
        target: &str,
    ) -> Result<()> {
        let effect = cp_apply(&oracle, &mut self.state, controls, target)?;
        for t in effect.created.iter().chain(&effect.canceled) {
            *self.additions.entry(t.clone()).or_default() += 1;
        }
        let mut touched = controls.to_vec();
        touched.push(target);
        self.log(
            level,
            TraceAction::Query,
            &touched,
            Some((oracle.key(), &effect)),
        );
        self.check_one_sided()
    }

    /// Realizes `𝓕_k` on `(𝓧_1..𝓧_k, target)`.
    fn f_access(&mut self, k: usize, target: &str) -> Result<()> {
        if k == self.tree.depth() + 1 {
            let names: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();
            let controls: Vec<&str> = names.iter().map(String::as_str).collect();
            let leaf = self.leaf;
            self.native(k - 1, leaf, &controls, target)
        } else {
            self.level(k, target)
        }
    }

    fn hadamard(&mut self, level: usize, name: &str) -> Result<()> {
        self.state.hadamard(name)?;
        self.log(level, TraceAction::Hadamard, &[name], None);
        Ok(())
    }

    fn level(&mut self, k: usize, target: &str) -> Result<()> {
        let anc = format!("x{}", k + 1);
        let yp = format!("yp{k}");
        let width = self.tree.width(k + 1);
        self.state
            .push(ConjugateRegister::phase(&anc, BitString::zeros(width)))?;
        self.state
            .push(ConjugateRegister::phase(&yp, BitString::ones(1)))?;
        self.log(k, TraceAction::Create, &[&anc, &yp], None);

        self.f_access(k + 1, &yp)?;
        self.hadamard(k, &anc)?;
        let names: Vec<String> = (1..=k + 1).map(|j| format!("x{j}")).collect();
        let controls: Vec<&str> = names.iter().map(String::as_str).collect();
        let g = self.outputs[k - 1];
        self.native(k, g, &controls, target)?;
        if !self.plan.skips(k) {
            self.hadamard(k, &anc)?;
            self.f_access(k + 1, &yp)?;
        }

        let expectations = [
            (anc, Expected::Phase(BitString::zeros(width))),
            (yp, Expected::Phase(BitString::ones(1))),
        ];
        for (name, want) in &expectations {
            let reg = self.state.remove(name)?;
            self.log(k, TraceAction::Discard, &[name], None);
            discard_check(&reg, want).map_err(|violation| DiscardError {
                level: k,
                register: name.clone(),
                violation,
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::classical_rfs;
    use crate::instance::CountedOracle;
    use crate::instance::{FSTreeConfig, GFamily};
    use crate::quantum::{quantum_fs, quantum_rfs};
    use crate::statevector::{RegisterLayout, StateVector};

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn hand_tree() -> FSTree {
        FSTree::build(
            FSTreeConfig::new(vec![2, 2], GFamily::And, 0)
                .with_secret(1, vec![bs("00")], bs("11"))
                .with_secret(1, vec![bs("01")], bs("10")),
        )
        .unwrap()
    }

    fn token(j: usize) -> KickbackToken {
        KickbackToken {
            oracle: OracleKey::f(2),
            fingerprint: "?x1,?x2".into(),
            register: j,
        }
    }

    #[test]
    fn hadamard_swaps_sides() {
        let r = ConjugateRegister::computational("x", bs("10"));
        let h = hadamard_pair(&r);
        assert_eq!(h.x, Side::Undefined);
        assert_eq!(h.chi.known(), Some(bs("10")));
        assert_eq!(hadamard_pair(&h), r);

        let mut t = ConjugateRegister::phase("x", bs("01"));
        t.chi.toggle(Term::Token(token(1))).unwrap();
        let swapped = hadamard_pair(&t);
        assert_eq!(swapped.x.tokens().count(), 1);
        assert_eq!(hadamard_pair(&swapped), t);
    }

    #[test]
    fn discard_rules() {
        let zero = Expected::Computational(bs("00"));
        assert!(discard_check(&ConjugateRegister::computational("a", bs("00")), &zero).is_ok());
        assert!(
            discard_check(&ConjugateRegister::computational("a", bs("01")), &zero)
                .unwrap_err()
                .contains("instead of documented")
        );

        let mut tok = ConjugateRegister::phase("a", bs("00"));
        tok.chi.toggle(Term::Token(token(1))).unwrap();
        let err = discard_check(&tok, &Expected::Phase(bs("00"))).unwrap_err();
        assert!(err.contains("unresolved kickback token"), "{err}");

        let mut dep = ConjugateRegister::computational("a", bs("00"));
        dep.x
            .toggle(Term::Secret {
                level: 2,
                args: vec![Arg::Known(bs("01")), Arg::Unknown("x2".into())],
            })
            .unwrap();
        let err = discard_check(&dep, &zero).unwrap_err();
        assert!(
            err.contains("value correlated with undefined input"),
            "{err}"
        );

        let err = discard_check(&ConjugateRegister::phase("a", bs("00")), &zero).unwrap_err();
        assert!(err.contains("computational side undefined"));
    }

    #[test]
    fn phase_query_recovers_secret_and_cancels_on_repeat() {
        let ledger = QueryLedger::new();
        let oracle = ConjugateOracle::linear(bs("101"), &ledger);
        assert_eq!(cp_fs(&oracle, 3).unwrap(), bs("101"));
        assert_eq!(ledger.total(), 1);
        assert_eq!(
            cp_fs(&ConjugateOracle::linear(bs("000"), &ledger), 3).unwrap(),
            bs("000")
        );

        let t = FSTree::build(FSTreeConfig::new(vec![2, 2], GFamily::And, 5)).unwrap();
        let leaf = ConjugateOracle::leaf(&t, &ledger);
        let mut st = PairState::new();
        st.push(ConjugateRegister::phase("x1", bs("00"))).unwrap();
        st.push(ConjugateRegister::phase("x2", bs("00"))).unwrap();
        st.push(ConjugateRegister::phase("y", bs("1"))).unwrap();
        let before = st.clone();
        let first = cp_apply(&leaf, &mut st, &["x1", "x2"], "y").unwrap();
        assert_eq!(first.created.len(), 1);
        assert_eq!(st.get("x2").unwrap().chi.terms().count(), 1);
        let second = cp_apply(&leaf, &mut st, &["x1", "x2"], "y").unwrap();
        assert_eq!(second.canceled, first.created);
        assert_eq!(st, before);
    }

    #[test]
    fn zero_bias_moves_nothing() {
        let ledger = QueryLedger::new();
        let t = hand_tree();
        let leaf = ConjugateOracle::leaf(&t, &ledger);
        let mut st = PairState::new();
        st.push(ConjugateRegister::phase("x1", bs("01"))).unwrap();
        st.push(ConjugateRegister::phase("x2", bs("10"))).unwrap();
        st.push(ConjugateRegister::phase("y", bs("0"))).unwrap();
        let before = st.clone();
        let e = cp_apply(&leaf, &mut st, &["x1", "x2"], "y").unwrap();
        assert_eq!(e.mode, QueryMode::Phase);
        assert_eq!(st, before);
    }

    #[test]
    fn ill_posed_queries_are_rejected() {
        let ledger = QueryLedger::new();
        let t = hand_tree();
        let leaf = ConjugateOracle::leaf(&t, &ledger);
        let mut st = PairState::new();
        st.push(ConjugateRegister::computational("x1", bs("01")))
            .unwrap();
        st.push(ConjugateRegister::computational("x2", bs("10")))
            .unwrap();
        st.push(ConjugateRegister::phase("y", bs("1"))).unwrap();
        assert!(matches!(
            cp_apply(&leaf, &mut st, &["x1", "x2"], "y"),
            Err(Error::IllPosedQuery(_))
        ));
        st.hadamard("y").unwrap();
        st.hadamard("y").unwrap();
        let mut st2 = PairState::new();
        st2.push(ConjugateRegister::phase("x1", bs("01"))).unwrap();
        st2.push(ConjugateRegister::phase("x2", bs("10"))).unwrap();
        let mut y = ConjugateRegister::phase("y", bs("1"));
        y.chi = Side::Undefined;
        st2.push(y).unwrap();
        assert!(matches!(
            cp_apply(&leaf, &mut st2, &["x1", "x2"], "y"),
            Err(Error::IllPosedQuery(_))
        ));
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn cp_fs_agrees_with_quantum_fs() {
        for s in BitString::all(3) {
            let ledger = QueryLedger::new();
            let cp = cp_fs(&ConjugateOracle::linear(s, &ledger), 3).unwrap();
            let q = quantum_fs(&CountedOracle::linear(s, &ledger), 3).unwrap();
            assert_eq!(cp, q.most_likely);
        }
    }

    #[test]
    fn hand_instance_and_counts() {
        let t = hand_tree();
        for x1 in t.inputs() {
            let ledger = QueryLedger::new();
            let run = cp_rfs_run(&t, &x1, &AblationPlan::none(), &ledger).unwrap();
            let want = classical_rfs(&t, &x1, &QueryLedger::new()).unwrap();
            assert_eq!(run.outcome, Ok(want));
            assert_eq!(ledger.count(OracleKey::f(2)), 2);
            assert_eq!(ledger.count(OracleKey::g(1)), 1);
            assert!(run.live_tokens.is_empty());
        }
        assert!(cp_rfs(&t, &bs("00"), &AblationPlan::none(), &QueryLedger::new()).unwrap());
    }

    #[test]
    fn three_tracks_agree_and_tokens_are_conserved() {
        let shapes: Vec<Vec<usize>> = vec![
            vec![2, 2, 2],
            vec![2, 2, 2, 2],
            vec![1, 3, 2],
            vec![3, 1, 3],
        ];
        for lengths in shapes {
            for fam in [
                GFamily::And,
                GFamily::Majority,
                GFamily::Prf,
                GFamily::Parity,
            ] {
                let t = FSTree::build(FSTreeConfig::new(lengths.clone(), fam, 17)).unwrap();
                for x1 in t.inputs() {
                    let ledger = QueryLedger::new();
                    let run = cp_rfs_run(&t, &x1, &AblationPlan::none(), &ledger).unwrap();
                    let q =
                        quantum_rfs(&t, &x1, &AblationPlan::none(), &QueryLedger::new()).unwrap();
                    let c = classical_rfs(&t, &x1, &QueryLedger::new()).unwrap();
                    assert_eq!(run.outcome, Ok(c));
                    assert_eq!(q.answer, c);
                    assert!(run.tokens_conserved());
                    assert!(run.live_tokens.is_empty());
                    assert_eq!(ledger.count(OracleKey::f(t.depth() + 1)), 1 << t.depth());
                }
            }
        }
    }

    #[test]
    fn depth_two_run_creates_then_cancels_tokens() {
        let t = FSTree::build(FSTreeConfig::new(vec![2, 2, 2], GFamily::And, 3)).unwrap();
        let run = cp_rfs_run(&t, &bs("01"), &AblationPlan::none(), &QueryLedger::new()).unwrap();
        let created: usize = run.trace.iter().map(|e| e.tokens_created.len()).sum();
        let canceled: usize = run.trace.iter().map(|e| e.tokens_canceled.len()).sum();
        assert!(created > 0);
        assert_eq!(created, canceled);
        assert!(run.tokens_conserved());
        assert!(run.token_additions.values().all(|&n| n > 0));
        let steps: Vec<usize> = run.trace.iter().map(|e| e.step).collect();
        assert_eq!(steps, (1..=run.trace.len()).collect::<Vec<_>>());
    }

    #[test]
    fn ablation_fails_discard_at_the_ablated_level() {
        let t = FSTree::build(FSTreeConfig::new(vec![2, 2, 2], GFamily::And, 4)).unwrap();
        for x1 in t.inputs() {
            let err = cp_rfs(&t, &x1, &AblationPlan::at([2]), &QueryLedger::new()).unwrap_err();
            let Error::Discard(d) = err else {
                panic!("{err}")
            };
            assert_eq!(d.level, 2);
            assert_eq!(d.register, "x3");
            assert!(d.violation.contains("undefined input"), "{}", d.violation);
        }
        let run = cp_rfs_run(&t, &bs("00"), &AblationPlan::at([1]), &QueryLedger::new()).unwrap();
        let d = run.outcome.unwrap_err();
        assert_eq!((d.level, d.register.as_str()), (1, "x2"));
        assert!(d.violation.contains("phase side undefined"));
    }

    /// Runs the level sub-circuit `F_{k+1}, H, G_k, H, F_{k+1}` on both
    /// tracks, starting from phase-basis controls, and compares the
    /// kicked phase of `x_k`.
    #[test]
    fn pair_maps_match_statevector() {
        for fam in [GFamily::And, GFamily::Majority, GFamily::Prf] {
            for seed in [0u64, 8] {
                let t = FSTree::build(FSTreeConfig::new(vec![2, 2, 2], fam.clone(), seed)).unwrap();
                let layout =
                    RegisterLayout::new(&[("x1", 2), ("x2", 2), ("x3", 2), ("yp", 1), ("y", 1)])
                        .unwrap();
                for x1 in BitString::all(2) {
                    let s1 = t.secret(1, &[x1]).unwrap();
                    for chi in BitString::all(2) {
                        for ups in BitString::all(1) {
                            let ledger = QueryLedger::new();
                            let mut st = PairState::new();
                            st.push(ConjugateRegister::computational("x1", x1)).unwrap();
                            st.push(ConjugateRegister::phase("x2", chi)).unwrap();
                            st.push(ConjugateRegister::phase("x3", bs("00"))).unwrap();
                            st.push(ConjugateRegister::phase("yp", bs("1"))).unwrap();
                            st.push(ConjugateRegister::phase("y", ups)).unwrap();
                            let leaf = ConjugateOracle::leaf(&t, &ledger);
                            let g2 = ConjugateOracle::output(&t, 2, &ledger).unwrap();
                            cp_apply(&leaf, &mut st, &["x1", "x2", "x3"], "yp").unwrap();
                            st.hadamard("x3").unwrap();
                            cp_apply(&g2, &mut st, &["x1", "x2", "x3"], "y").unwrap();
                            st.hadamard("x3").unwrap();
                            cp_apply(&leaf, &mut st, &["x1", "x2", "x3"], "yp").unwrap();
                            let predicted = st.get("x2").unwrap().chi.known().unwrap();
                            assert!(st.live_tokens().is_empty());
                            assert!(st.registers().iter().all(ConjugateRegister::is_one_sided));

                            let mut sv = StateVector::prepare_basis(
                                layout.clone(),
                                &[x1, chi, bs("00"), bs("1"), ups],
                            )
                            .unwrap();
                            sv.apply_hadamards(&["x2", "x3", "yp", "y"]).unwrap();
                            let f3 = |a: &[BitString]| t.eval_f(3, a);
                            let g = |a: &[BitString]| t.eval_g(2, a);
                            sv.apply_oracle(&["x1", "x2", "x3"], "yp", &f3).unwrap();
                            sv.apply_hadamards(&["x3"]).unwrap();
                            sv.apply_oracle(&["x1", "x2", "x3"], "y", &g).unwrap();
                            sv.apply_hadamards(&["x3"]).unwrap();
                            sv.apply_oracle(&["x1", "x2", "x3"], "yp", &f3).unwrap();
                            sv.apply_hadamards(&["x2", "x3", "yp", "y"]).unwrap();

                            let want = if ups.bit(1) {
                                chi.xor(&s1).unwrap()
                            } else {
                                chi
                            };
                            assert_eq!(predicted, want);
                            assert!((sv.probability("x2", &predicted).unwrap() - 1.0).abs() < 1e-9);
                            assert!((sv.probability("x3", &bs("00")).unwrap() - 1.0).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn computational_and_single_phase_queries_match_statevector() {
        let t = FSTree::build(FSTreeConfig::new(vec![2, 2], GFamily::Majority, 2)).unwrap();
        let ledger = QueryLedger::new();
        let leaf = ConjugateOracle::leaf(&t, &ledger);
        let g1 = ConjugateOracle::output(&t, 1, &ledger).unwrap();
        let layout = RegisterLayout::new(&[("x1", 2), ("x2", 2), ("y", 1)]).unwrap();
        for x1 in BitString::all(2) {
            for x2 in BitString::all(2) {
                for y in BitString::all(1) {
                    for oracle in [leaf, g1] {
                        let mut st = PairState::new();
                        st.push(ConjugateRegister::computational("x1", x1)).unwrap();
                        st.push(ConjugateRegister::computational("x2", x2)).unwrap();
                        st.push(ConjugateRegister::computational("y", y)).unwrap();
                        cp_apply(&oracle, &mut st, &["x1", "x2"], "y").unwrap();
                        let mut sv =
                            StateVector::prepare_basis(layout.clone(), &[x1, x2, y]).unwrap();
                        sv.apply_oracle(&["x1", "x2"], "y", &|a| oracle.eval(a))
                            .unwrap();
                        let got = st.get("y").unwrap().x.known().unwrap();
                        assert!((sv.probability("y", &got).unwrap() - 1.0).abs() < 1e-9);
                    }
                }
                // x2 in phase mode: kick lands on x2 as s_1(x1)
                let chi = x2;
                for ups in BitString::all(1) {
                    let mut st = PairState::new();
                    st.push(ConjugateRegister::computational("x1", x1)).unwrap();
                    st.push(ConjugateRegister::phase("x2", chi)).unwrap();
                    st.push(ConjugateRegister::phase("y", ups)).unwrap();
                    cp_apply(&leaf, &mut st, &["x1", "x2"], "y").unwrap();
                    let got = st.get("x2").unwrap().chi.known().unwrap();
                    let mut sv =
                        StateVector::prepare_basis(layout.clone(), &[x1, chi, ups]).unwrap();
                    sv.apply_hadamards(&["x2", "y"]).unwrap();
                    sv.apply_oracle(&["x1", "x2"], "y", &|a| t.eval_f(2, a))
                        .unwrap();
                    sv.apply_hadamards(&["x2", "y"]).unwrap();
                    assert!((sv.probability("x2", &got).unwrap() - 1.0).abs() < 1e-9);
                    assert!((sv.probability("x1", &x1).unwrap() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
