//! Fourier Sampling tree instances.
//!
//! A tree of depth `l` has register widths `n_1..n_{l+1}`, secrets
//! `s_k(x_1..x_k)` of width `n_{k+1}` for `1 <= k <= l`, and output
//! functions `g_k(x_1..x_{k+1})`. The induced functions are
//!
//! * `f_{l+1}(x_1..x_{l+1}) = s_l(x_1..x_l) · x_{l+1}`
//! * `f_k(x_1..x_k) = g_k(x_1..x_k, s_k(x_1..x_k))` for `k <= l`
//!
//! and construction guarantees `f_k(x_1..x_k) = s_{k-1}(x_1..x_{k-1}) · x_k`
//! for every `2 <= k <= l` as well. Secrets are never stored: `s_1` is drawn
//! from a keyed PRF and each deeper secret is a PRF-chosen element of the
//! preimage `g_k(prefix, ·)^{-1}(s_{k-1}(..) · x_k)`.

mod file;
mod ledger;
pub mod prf;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use file::{InstanceFile, INSTANCE_FORMAT_VERSION};
pub use ledger::{OracleKey, OracleKind, QueryLedger};

use crate::bitmath::{BitString, TruthTable};
use crate::error::{Error, Result};
use prf::Prf;

/// Widest register an instance may declare. Preimage sampling enumerates
/// `2^n` candidates.
pub const MAX_REGISTER_WIDTH: usize = 16;

/// Output-function families.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GFamily {
    /// `g_k(.., t) = AND of the bits of t`.
    And,
    /// `g_k(.., t) = 1` iff more than half the bits of `t` are set.
    Majority,
    /// `g_k(.., t) = XOR of the bits of t`; linear, so it trivializes the
    /// recursion.
    Parity,
    /// Pseudorandom in all arguments, with two PRF-chosen anchor points
    /// pinned to 0 and 1 so every `g_k(prefix, ·)` is surjective.
    Prf,
    /// An explicit truth table applied to the last argument at every level.
    Table(TruthTable),
}

impl GFamily {
    /// Whether `g_k` reads only its last argument.
    pub fn is_last_arg(&self) -> bool {
        !matches!(self, GFamily::Prf)
    }

    fn last_arg_value(&self, t: &BitString) -> bool {
        match self {
            GFamily::And => t.weight() as usize == t.len(),
            GFamily::Majority => 2 * t.weight() as usize > t.len(),
            GFamily::Parity => t.weight() % 2 == 1,
            GFamily::Table(table) => table.at(t.index()),
            GFamily::Prf => unreachable!("prf family depends on every argument"),
        }
    }
}

impl fmt::Display for GFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GFamily::And => f.write_str("and"),
            GFamily::Majority => f.write_str("majority"),
            GFamily::Parity => f.write_str("parity"),
            GFamily::Prf => f.write_str("prf"),
            GFamily::Table(t) => write!(f, "table:{}", t.to_bit_string()),
        }
    }
}

impl FromStr for GFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "and" | "last-arg-and" => GFamily::And,
            "majority" | "last-arg-majority" => GFamily::Majority,
            "parity" | "last-arg-parity" => GFamily::Parity,
            "prf" | "prf-random" => GFamily::Prf,
            _ => match s.strip_prefix("table:") {
                Some(bits) => GFamily::Table(TruthTable::from_bit_string(bits)?),
                None => return Err(Error::Format(format!("unknown g family `{s}`"))),
            },
        })
    }
}

/// Explicit secrets: level -> prefix `(x_1..x_k)` -> `s_k`.
pub type SecretTable = BTreeMap<usize, BTreeMap<Vec<BitString>, BitString>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FSTreeConfig {
    pub lengths: Vec<usize>,
    pub g_family: GFamily,
    pub seed: u64,
    /// Entries here override the PRF; missing entries are drawn as usual.
    pub secrets: SecretTable,
    pub x1: Option<BitString>,
}

impl FSTreeConfig {
    pub fn new(lengths: Vec<usize>, g_family: GFamily, seed: u64) -> Self {
        Self {
            lengths,
            g_family,
            seed,
            secrets: SecretTable::new(),
            x1: None,
        }
    }

    pub fn depth(&self) -> usize {
        self.lengths.len().saturating_sub(1)
    }

    pub fn with_secret(mut self, level: usize, prefix: Vec<BitString>, secret: BitString) -> Self {
        self.secrets
            .entry(level)
            .or_default()
            .insert(prefix, secret);
        self
    }

    pub fn with_x1(mut self, x1: BitString) -> Self {
        self.x1 = Some(x1);
        self
    }
}

/// An immutable, promise-consistent Fourier Sampling tree.
#[derive(Clone, Debug)]
pub struct FSTree {
    config: FSTreeConfig,
    prf: Prf,
    /// For last-arg families: `preimages[k][b]` lists every `t` with
    /// `G_k(t) = b`, ascending.
    preimages: Vec<[Vec<BitString>; 2]>,
    /// Linear coefficients of `G_k` per level (index 0 unused).
    linear_g: Vec<Option<BitString>>,
}

impl FSTree {
    pub fn build(config: FSTreeConfig) -> Result<Self> {
        let tree = Self::build_unchecked(config)?;
        tree.check_explicit_secrets()?;
        Ok(tree)
    }

    /// Like [`FSTree::build`] but skips the consistency check of explicit
    /// secret tables, so a corrupted instance can still be loaded and
    /// diagnosed.
    pub fn build_unchecked(config: FSTreeConfig) -> Result<Self> {
        let depth = config.depth();
        if depth == 0 {
            return Err(Error::InvalidConfig(
                "need at least two register widths (depth >= 1)".into(),
            ));
        }
        for (i, &n) in config.lengths.iter().enumerate() {
            if n == 0 {
                return Err(Error::ZeroWidth { level: i + 1 });
            }
            if n > MAX_REGISTER_WIDTH {
                return Err(Error::WidthTooLarge {
                    width: n,
                    max: MAX_REGISTER_WIDTH,
                });
            }
        }
        if let Some(x1) = &config.x1 {
            if x1.len() != config.lengths[0] {
                return Err(Error::LengthMismatch {
                    expected: config.lengths[0],
                    found: x1.len(),
                });
            }
        }

        let mut preimages = vec![[Vec::new(), Vec::new()]; depth + 1];
        let mut linear_g = vec![None; depth + 1];
        if config.g_family.is_last_arg() {
            for k in 1..=depth {
                let n = config.lengths[k];
                if let GFamily::Table(t) = &config.g_family {
                    if t.n() != n {
                        return Err(Error::InvalidConfig(format!(
                            "g table has {} input bits but level {k} secrets have {n}",
                            t.n()
                        )));
                    }
                }
                let table = TruthTable::from_fn(n, |t| config.g_family.last_arg_value(t))?;
                if !table.is_surjective() {
                    return Err(Error::UnsatisfiablePromise {
                        level: k,
                        detail: format!("g_{k} is constant on {n}-bit inputs"),
                    });
                }
                linear_g[k] = table.linear_coefficients();
                for t in BitString::all(n) {
                    preimages[k][table.at(t.index()) as usize].push(t);
                }
            }
        }

        let tree = Self {
            prf: Prf::new(config.seed),
            config,
            preimages,
            linear_g,
        };
        tree.check_secret_shapes()?;
        Ok(tree)
    }

    fn check_secret_shapes(&self) -> Result<()> {
        for (&k, entries) in &self.config.secrets {
            self.check_level(k, self.depth())?;
            for (prefix, s) in entries {
                self.check_args(k, prefix)?;
                if s.len() != self.width(k + 1) {
                    return Err(Error::LengthMismatch {
                        expected: self.width(k + 1),
                        found: s.len(),
                    });
                }
            }
        }
        Ok(())
    }

    fn check_explicit_secrets(&self) -> Result<()> {
        for (&k, entries) in &self.config.secrets {
            if k < 2 {
                continue;
            }
            for (prefix, s) in entries {
                let want = self.secret(k - 1, &prefix[..k - 1])?.dot(&prefix[k - 1])?;
                let mut args = prefix.clone();
                args.push(*s);
                if self.eval_g(k, &args)? != want {
                    return Err(Error::UnsatisfiablePromise {
                        level: k,
                        detail: format!(
                            "explicit s_{k}({}) = {s} gives g_{k} != s_{}(..)·x_{k} = {}",
                            fmt_args(prefix),
                            k - 1,
                            want as u8
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &FSTreeConfig {
        &self.config
    }

    /// Recursion depth `l`.
    pub fn depth(&self) -> usize {
        self.config.depth()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.config.lengths
    }

    /// Width `n_k` of register `x_k`, `1 <= k <= l + 1`.
    pub fn width(&self, k: usize) -> usize {
        self.config.lengths[k - 1]
    }

    pub fn g_family(&self) -> &GFamily {
        &self.config.g_family
    }

    /// Every `g_k` is a linear function of its last argument alone.
    pub fn is_trivializing(&self) -> bool {
        self.config.g_family.is_last_arg() && self.linear_g[1..].iter().all(Option::is_some)
    }

    /// `x*` with `g_k(x_1..x_k, t) = x* · t` when `g_k` is linear in its last
    /// argument and independent of the others.
    pub fn g_linear_coefficients(&self, k: usize) -> Option<BitString> {
        self.linear_g.get(k).copied().flatten()
    }

    /// Truth table of `G` on the last argument at level `k`, for last-arg
    /// families.
    pub fn last_arg_table(&self, k: usize) -> Option<TruthTable> {
        if !self.config.g_family.is_last_arg() || k == 0 || k > self.depth() {
            return None;
        }
        TruthTable::from_fn(self.width(k + 1), |t| {
            self.config.g_family.last_arg_value(t)
        })
        .ok()
    }

    fn check_level(&self, k: usize, max: usize) -> Result<()> {
        if k == 0 || k > max {
            return Err(Error::InvalidLevel { level: k, max });
        }
        Ok(())
    }

    fn check_args(&self, count: usize, args: &[BitString]) -> Result<()> {
        if args.len() != count {
            return Err(Error::ArityMismatch {
                expected: count,
                found: args.len(),
            });
        }
        for (i, a) in args.iter().enumerate() {
            if a.len() != self.config.lengths[i] {
                return Err(Error::LengthMismatch {
                    expected: self.config.lengths[i],
                    found: a.len(),
                });
            }
        }
        Ok(())
    }

    /// `s_k(x_1..x_k)`, of width `n_{k+1}`.
    pub fn secret(&self, k: usize, prefix: &[BitString]) -> Result<BitString> {
        self.check_level(k, self.depth())?;
        self.check_args(k, prefix)?;
        Ok(self.secret_unchecked(k, prefix))
    }

    fn secret_unchecked(&self, k: usize, prefix: &[BitString]) -> BitString {
        if let Some(s) = self.config.secrets.get(&k).and_then(|m| m.get(prefix)) {
            return *s;
        }
        let n = self.width(k + 1);
        let words: Vec<u64> = prefix.iter().map(BitString::value).collect();
        let draw = self.prf.hash(prf::DOMAIN_SECRET, k, &words);
        if k == 1 {
            return BitString::new(n, draw & low_mask(n)).expect("masked");
        }
        let parent = self.secret_unchecked(k - 1, &prefix[..k - 1]);
        let target = parent.dot(&prefix[k - 1]).expect("widths checked");
        if self.config.g_family.is_last_arg() {
            let candidates = &self.preimages[k][target as usize];
            candidates[(draw % candidates.len() as u64) as usize]
        } else {
            let row = self.prf_row(k, prefix, n);
            let candidates: Vec<BitString> = BitString::all(n)
                .filter(|t| row.value(t) == target)
                .collect();
            candidates[(draw % candidates.len() as u64) as usize]
        }
    }

    fn prf_row(&self, k: usize, prefix: &[BitString], n: usize) -> PrfRow {
        let words: Vec<u64> = prefix.iter().map(BitString::value).collect();
        let zero_at = self.prf.hash(prf::DOMAIN_G_ANCHOR, k, &words) & low_mask(n);
        let offset = self.prf.hash(prf::DOMAIN_G_MASK, k, &words) % low_mask(n) + 1;
        PrfRow {
            zero_at,
            one_at: zero_at ^ offset,
            state: self.prf.hash(prf::DOMAIN_G_BIT, k, &words),
        }
    }

    fn prf_g(&self, k: usize, prefix: &[BitString], t: &BitString) -> bool {
        self.prf_row(k, prefix, t.len()).value(t)
    }

    /// `g_k(x_1..x_{k+1})`.
    pub fn eval_g(&self, k: usize, args: &[BitString]) -> Result<bool> {
        self.check_level(k, self.depth())?;
        self.check_args(k + 1, args)?;
        Ok(self.eval_g_unchecked(k, args))
    }

    fn eval_g_unchecked(&self, k: usize, args: &[BitString]) -> bool {
        if self.config.g_family.is_last_arg() {
            self.config.g_family.last_arg_value(&args[k])
        } else {
            self.prf_g(k, &args[..k], &args[k])
        }
    }

    /// `f_k(x_1..x_k)` for `1 <= k <= l + 1`.
    pub fn eval_f(&self, k: usize, args: &[BitString]) -> Result<bool> {
        let l = self.depth();
        self.check_level(k, l + 1)?;
        self.check_args(k, args)?;
        if k == l + 1 {
            let s = self.secret_unchecked(l, &args[..l]);
            return s.dot(&args[l]);
        }
        let mut full = args.to_vec();
        full.push(self.secret_unchecked(k, args));
        Ok(self.eval_g_unchecked(k, &full))
    }

    /// Counted classical oracle `O_{f_{l+1}}`.
    pub fn oracle_f<'a>(&'a self, ledger: &'a QueryLedger) -> CountedOracle<'a> {
        let l = self.depth();
        CountedOracle::new(
            OracleKey::f(l + 1),
            self.lengths().to_vec(),
            move |args| self.eval_f(l + 1, args),
            ledger,
        )
    }

    /// Counted classical oracle `O_{g_k}`.
    pub fn oracle_g<'a>(&'a self, k: usize, ledger: &'a QueryLedger) -> Result<CountedOracle<'a>> {
        self.check_level(k, self.depth())?;
        Ok(CountedOracle::new(
            OracleKey::g(k),
            self.lengths()[..=k].to_vec(),
            move |args| self.eval_g(k, args),
            ledger,
        ))
    }

    /// Every `x_1` value, ascending.
    pub fn inputs(&self) -> impl Iterator<Item = BitString> {
        BitString::all(self.width(1))
    }
}

/// `g_k(prefix, ·)` for the PRF family: pinned to 0 and 1 at two anchor
/// points, pseudorandom elsewhere.
struct PrfRow {
    zero_at: u64,
    one_at: u64,
    state: u64,
}

impl PrfRow {
    fn value(&self, t: &BitString) -> bool {
        match t.value() {
            v if v == self.zero_at => false,
            v if v == self.one_at => true,
            v => prf::Prf::extend(self.state, v) & 1 == 1,
        }
    }
}

fn low_mask(n: usize) -> u64 {
    (1u64 << n) - 1
}

pub(crate) fn fmt_args(args: &[BitString]) -> String {
    args.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

type OracleFn<'a> = Box<dyn Fn(&[BitString]) -> Result<bool> + Send + Sync + 'a>;

/// A reversible classical oracle `(args, y) -> (args, y XOR f(args))` that
/// records every invocation.
pub struct CountedOracle<'a> {
    key: OracleKey,
    widths: Vec<usize>,
    func: OracleFn<'a>,
    ledger: &'a QueryLedger,
}

impl<'a> CountedOracle<'a> {
    pub fn new(
        key: OracleKey,
        widths: Vec<usize>,
        func: impl Fn(&[BitString]) -> Result<bool> + Send + Sync + 'a,
        ledger: &'a QueryLedger,
    ) -> Self {
        Self {
            key,
            widths,
            func: Box::new(func),
            ledger,
        }
    }

    /// The single-argument linear oracle `x -> s · x`, counted as `f1`.
    pub fn linear(secret: BitString, ledger: &'a QueryLedger) -> Self {
        Self::new(
            OracleKey::f(1),
            vec![secret.len()],
            move |args| secret.dot(&args[0]),
            ledger,
        )
    }

    pub fn key(&self) -> OracleKey {
        self.key
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn ledger(&self) -> &'a QueryLedger {
        self.ledger
    }

    /// Uncounted evaluation, for simulators that record one use per
    /// application themselves.
    pub(crate) fn eval(&self, args: &[BitString]) -> Result<bool> {
        (self.func)(args)
    }

    /// Returns the new target bit; the arguments pass through unchanged.
    pub fn apply(&self, args: &[BitString], y: bool) -> Result<bool> {
        if args.len() != self.widths.len() {
            return Err(Error::ArityMismatch {
                expected: self.widths.len(),
                found: args.len(),
            });
        }
        for (a, &w) in args.iter().zip(&self.widths) {
            if a.len() != w {
                return Err(Error::LengthMismatch {
                    expected: w,
                    found: a.len(),
                });
            }
        }
        self.ledger.record(self.key);
        Ok(y ^ (self.func)(args)?)
    }
}
