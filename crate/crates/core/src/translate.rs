//! Conversion between height-`h` Aaronson instances `(A, G)` and Fourier
//! Sampling trees.
//!
//! Aaronson order lists the innermost argument first: in `A(y_1, …, y_h)`
//! the outermost level fixes `y_h`. Trees list the outermost argument
//! first and also carry the parameter `x_1`, so a tree of depth `l` at a
//! fixed `x_1` corresponds to a height-`l` instance with
//!
//! ```text
//! A(y_1, …, y_h) = f_{l+1}(x_1, y_h, …, y_1),   G(t) = g_k(…, t).
//! ```
//!
//! Trees built from an Aaronson instance ignore `x_1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bitmath::{BitString, TruthTable, MAX_TABLE_BITS};
use crate::error::{Error, Result};
use crate::instance::{fmt_args, FSTree, FSTreeConfig, GFamily};

pub const AARONSON_FORMAT_VERSION: u32 = 1;

/// `RFS_h` over `n`-bit strings. `a` is indexed by the concatenation
/// `y_1 ‖ … ‖ y_h`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AaronsonInstance {
    h: usize,
    n: usize,
    a: TruthTable,
    g: TruthTable,
}

/// Secrets found while checking the promises, keyed by the fixed outer
/// arguments in tree order (`x_2..x_k` for the secret `s_k`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AaronsonSolution {
    pub answer: bool,
    pub secrets: BTreeMap<Vec<BitString>, BitString>,
}

impl AaronsonInstance {
    pub fn new(h: usize, n: usize, a: TruthTable, g: TruthTable) -> Result<Self> {
        if h == 0 || n == 0 {
            return Err(Error::InvalidConfig(
                "height and width must be at least 1".into(),
            ));
        }
        if a.n() != h * n {
            return Err(Error::MalformedTable {
                expected: 1 << (h * n),
                found: a.values().len(),
            });
        }
        if g.n() != n {
            return Err(Error::MalformedTable {
                expected: 1 << n,
                found: g.values().len(),
            });
        }
        Ok(Self { h, n, a, g })
    }

    /// The instance a seeded tree with `n_k = n` presents at `x_1 = 0…0`.
    pub fn generate(h: usize, n: usize, g_family: GFamily, seed: u64) -> Result<Self> {
        let tree = FSTree::build(FSTreeConfig::new(vec![n; h + 1], g_family, seed))?;
        to_aaronson(&tree, &BitString::zeros(n))
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn a_table(&self) -> &TruthTable {
        &self.a
    }

    pub fn g_table(&self) -> &TruthTable {
        &self.g
    }

    /// `A(y_1, …, y_h)` in Aaronson order.
    pub fn eval_a(&self, ys: &[BitString]) -> Result<bool> {
        if ys.len() != self.h {
            return Err(Error::ArityMismatch {
                expected: self.h,
                found: ys.len(),
            });
        }
        if let Some(y) = ys.iter().find(|y| y.len() != self.n) {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: y.len(),
            });
        }
        Ok(self.a.at(crate::bitmath::encode_args(ys) as usize))
    }

    /// `A` with arguments in tree order `x_2, …, x_{h+1}`.
    fn eval_a_tree_order(&self, xs: &[BitString]) -> Result<bool> {
        let ys: Vec<BitString> = xs.iter().rev().copied().collect();
        self.eval_a(&ys)
    }

    pub fn eval_g(&self, t: &BitString) -> Result<bool> {
        self.g.get(t)
    }

    /// Checks both promises at every sub-instance and returns the answer
    /// `G(s)` with every secret found. A violation names the sub-instance
    /// and an input where the answer bits stop being linear.
    pub fn verify_promises(&self) -> Result<AaronsonSolution> {
        let mut secrets = BTreeMap::new();
        let answer = self.solve(&mut Vec::new(), &mut secrets)?;
        Ok(AaronsonSolution { answer, secrets })
    }

    pub fn answer(&self) -> Result<bool> {
        Ok(self.verify_promises()?.answer)
    }

    fn solve(
        &self,
        outer: &mut Vec<BitString>,
        secrets: &mut BTreeMap<Vec<BitString>, BitString>,
    ) -> Result<bool> {
        if outer.len() == self.h {
            return self.eval_a_tree_order(outer);
        }
        let mut b = Vec::with_capacity(1 << self.n);
        for t in BitString::all(self.n) {
            outer.push(t);
            b.push(self.solve(outer, secrets)?);
            outer.pop();
        }
        let table = TruthTable::new(self.n, b)?;
        let Some(s) = table.linear_coefficients() else {
            let s = BitString::new(
                self.n,
                (1..=self.n).fold(0, |acc, j| (acc << 1) | table.at(1 << (self.n - j)) as u64),
            )?;
            let witness = BitString::all(self.n)
                .find(|t| table.at(t.index()) != s.dot(t).unwrap_or(false))
                .expect("nonlinear table differs from its probe secret somewhere");
            return Err(Error::PromiseViolation(format!(
                "height-{} sub-instance at outer arguments ({}) has answer bit b({witness}) = {} \
                 but the probed secret {s} gives {}",
                self.h - outer.len(),
                fmt_args(outer),
                table.at(witness.index()) as u8,
                s.dot(&witness)? as u8
            )));
        };
        secrets.insert(outer.clone(), s);
        self.eval_g(&s)
    }
}

/// Tree form of an Aaronson instance: widths `n` at every level,
/// `g_k(…, t) = G(t)`, explicit secrets, and `f_k` independent of `x_1`.
pub fn from_aaronson(inst: &AaronsonInstance) -> Result<FSTree> {
    let solution = inst.verify_promises()?;
    if !inst.g.is_surjective() {
        return Err(Error::NotExpressible(
            "G is constant, so no secret can satisfy both answer values".into(),
        ));
    }
    let mut cfg = FSTreeConfig::new(vec![inst.n; inst.h + 1], GFamily::Table(inst.g.clone()), 0);
    for (outer, s) in &solution.secrets {
        for x1 in BitString::all(inst.n) {
            let mut prefix = vec![x1];
            prefix.extend_from_slice(outer);
            cfg = cfg.with_secret(outer.len() + 1, prefix, *s);
        }
    }
    FSTree::build(cfg)
}

/// The height-`l` instance a tree presents at the parameter `x1`.
pub fn to_aaronson(tree: &FSTree, x1: &BitString) -> Result<AaronsonInstance> {
    let n = tree.width(1);
    if let Some(k) = (2..=tree.depth() + 1).find(|&k| tree.width(k) != n) {
        return Err(Error::NotExpressible(format!(
            "register widths differ (n_1 = {n}, n_{k} = {})",
            tree.width(k)
        )));
    }
    if !tree.g_family().is_last_arg() {
        return Err(Error::NotExpressible(format!(
            "g family `{}` depends on more than the last argument",
            tree.g_family()
        )));
    }
    if x1.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: x1.len(),
        });
    }
    let h = tree.depth();
    if h * n > MAX_TABLE_BITS {
        return Err(Error::WidthTooLarge {
            width: h * n,
            max: MAX_TABLE_BITS,
        });
    }
    let widths = vec![n; h];
    let a = TruthTable::try_from_fn(h * n, |idx| {
        let ys = crate::bitmath::decode_args(idx.value(), &widths);
        let mut args = vec![*x1];
        args.extend(ys.iter().rev());
        tree.eval_f(h + 1, &args)
    })?;
    let g = tree
        .last_arg_table(1)
        .ok_or_else(|| Error::NotExpressible("g_1 has no last-argument table".into()))?;
    AaronsonInstance::new(h, n, a, g)
}

/// On-disk Aaronson instance. Without an explicit `a` table the instance is
/// regenerated from `(h, n, g_family, seed)` at `x1` (default all zeros).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AaronsonFile {
    pub format_version: u32,
    pub h: usize,
    pub n: usize,
    #[serde(serialize_with = "ser_family", deserialize_with = "de_family")]
    pub g_family: GFamily,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x1: Option<BitString>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<String>,
}

fn ser_family<S: Serializer>(g: &GFamily, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(g)
}

fn de_family<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<GFamily, D::Error> {
    String::deserialize(d)?
        .parse()
        .map_err(serde::de::Error::custom)
}

impl AaronsonFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: AaronsonFile = serde_json::from_str(text)?;
        if file.format_version != AARONSON_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    /// The instance described, without checking its promises.
    pub fn instance(&self) -> Result<AaronsonInstance> {
        match &self.a {
            Some(bits) => {
                let g = TruthTable::from_fn(self.n, |t| match &self.g_family {
                    GFamily::And => t.weight() as usize == t.len(),
                    GFamily::Majority => 2 * t.weight() as usize > t.len(),
                    GFamily::Parity => t.weight() % 2 == 1,
                    GFamily::Table(table) => table.at(t.index()),
                    GFamily::Prf => false,
                })?;
                if matches!(self.g_family, GFamily::Prf) {
                    return Err(Error::NotExpressible(
                        "the prf family has no single output function G".into(),
                    ));
                }
                AaronsonInstance::new(self.h, self.n, TruthTable::from_bit_string(bits)?, g)
            }
            None => {
                let tree = FSTree::build(FSTreeConfig::new(
                    vec![self.n; self.h + 1],
                    self.g_family.clone(),
                    self.seed,
                ))?;
                to_aaronson(&tree, &self.x1.unwrap_or(BitString::zeros(self.n)))
            }
        }
    }

    /// File for the instance `tree` presents at `x1`, with the `A` table
    /// written out.
    pub fn from_tree(tree: &FSTree, x1: &BitString) -> Result<Self> {
        let inst = to_aaronson(tree, x1)?;
        Ok(Self {
            format_version: AARONSON_FORMAT_VERSION,
            h: inst.h,
            n: inst.n,
            g_family: tree.g_family().clone(),
            seed: tree.config().seed,
            x1: Some(*x1),
            a: Some(inst.a.to_bit_string()),
        })
    }
}
