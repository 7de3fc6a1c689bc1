//! Classical bit-by-bit Fourier Sampling and the recursive classical solver.

use std::collections::HashMap;

use crate::bitmath::BitString;
use crate::error::{Error, Result};
use crate::instance::{CountedOracle, FSTree, OracleKey, QueryLedger};

/// Recovers `s` from a linear oracle `f(x) = s · x` with exactly `n` calls,
/// probing `1_j` into target bit `j` of an all-zero bias.
pub fn classical_fs(oracle: &CountedOracle<'_>, n: usize) -> Result<BitString> {
    if oracle.widths() != [n] {
        return Err(Error::ArityMismatch {
            expected: 1,
            found: oracle.widths().len(),
        });
    }
    let mut target = BitString::zeros(n);
    for j in 1..=n {
        let c = BitString::one_hot(j, n)?;
        let bit = oracle.apply(&[c], target.bit(j))?;
        target = target.with_bit(j, bit);
    }
    Ok(target)
}

/// `f_1(x_1)` by the depth-first recursion. Makes exactly
/// `n_2 ⋯ n_{l+1}` calls to `f_{l+1}` and `n_2 ⋯ n_k` calls to each `g_k`.
pub fn classical_rfs(tree: &FSTree, x1: &BitString, ledger: &QueryLedger) -> Result<bool> {
    if x1.len() != tree.width(1) {
        return Err(Error::LengthMismatch {
            expected: tree.width(1),
            found: x1.len(),
        });
    }
    let leaf = tree.oracle_f(ledger);
    let outputs = (1..=tree.depth())
        .map(|k| tree.oracle_g(k, ledger))
        .collect::<Result<Vec<_>>>()?;
    let mut controls = vec![*x1];
    level(tree, 1, &mut controls, false, &leaf, &outputs)
}

/// One level of the recursion: returns `y XOR f_k(controls)`.
fn level(
    tree: &FSTree,
    k: usize,
    controls: &mut Vec<BitString>,
    y: bool,
    leaf: &CountedOracle<'_>,
    outputs: &[CountedOracle<'_>],
) -> Result<bool> {
    let n = tree.width(k + 1);
    let mut ancilla = BitString::zeros(n);
    for j in 1..=n {
        let probe = BitString::one_hot(j, n)?;
        controls.push(probe);
        let bit = if k == tree.depth() {
            leaf.apply(controls, ancilla.bit(j))?
        } else {
            level(tree, k + 1, controls, ancilla.bit(j), leaf, outputs)?
        };
        ancilla = ancilla.with_bit(j, bit);
        let discarded = controls.pop();
        assert_eq!(discarded, Some(probe), "probe ancilla changed");
    }
    controls.push(ancilla);
    let y = outputs[k - 1].apply(controls, y)?;
    let discarded = controls.pop().expect("ancilla present");
    debug_assert_eq!(
        Some(discarded),
        tree.secret(k, controls).ok(),
        "ancilla x_{} should hold s_{k}",
        k + 1
    );
    Ok(y)
}

/// Closed-form classical counts: `f_{l+1}` gets `n_2 ⋯ n_{l+1}`, `g_k` gets
/// `n_2 ⋯ n_k` (so `g_1` gets 1).
pub fn expected_classical_counts(lengths: &[usize]) -> Vec<(OracleKey, u64)> {
    let l = lengths.len() - 1;
    let prod = |upto: usize| lengths[1..upto].iter().map(|&n| n as u64).product::<u64>();
    let mut out = vec![(OracleKey::f(l + 1), prod(l + 1))];
    out.extend((1..=l).map(|k| (OracleKey::g(k), prod(k))));
    out
}

/// One call to `f_2` at `x*` answers the decision problem when `g_1` is
/// `x* · t`. On deeper trees the `f_2` access is realized recursively and the
/// ledger shows the underlying `f_{l+1}` calls.
pub fn linear_g_shortcut(tree: &FSTree, x1: &BitString, ledger: &QueryLedger) -> Result<bool> {
    let x_star = tree.g_linear_coefficients(1).ok_or_else(|| {
        Error::ShortcutInapplicable(format!(
            "g_1 ({}) is not a linear function of its last argument",
            tree.g_family()
        ))
    })?;
    if x1.len() != tree.width(1) {
        return Err(Error::LengthMismatch {
            expected: tree.width(1),
            found: x1.len(),
        });
    }
    let leaf = tree.oracle_f(ledger);
    let mut controls = vec![*x1, x_star];
    if tree.depth() == 1 {
        return leaf.apply(&controls, false);
    }
    let outputs = (1..=tree.depth())
        .map(|k| tree.oracle_g(k, ledger))
        .collect::<Result<Vec<_>>>()?;
    level(tree, 2, &mut controls, false, &leaf, &outputs)
}

/// Classical solver that caches `f_k` values by argument across calls.
/// Ledger counts from this mode do not follow the closed-form products.
pub struct MemoizedClassical<'a> {
    tree: &'a FSTree,
    cache: HashMap<Vec<BitString>, bool>,
}

impl<'a> MemoizedClassical<'a> {
    pub fn new(tree: &'a FSTree) -> Self {
        Self {
            tree,
            cache: HashMap::new(),
        }
    }

    pub fn solve(&mut self, x1: &BitString, ledger: &QueryLedger) -> Result<bool> {
        if x1.len() != self.tree.width(1) {
            return Err(Error::LengthMismatch {
                expected: self.tree.width(1),
                found: x1.len(),
            });
        }
        self.f(vec![*x1], ledger)
    }

    fn f(&mut self, args: Vec<BitString>, ledger: &QueryLedger) -> Result<bool> {
        if let Some(&v) = self.cache.get(&args) {
            return Ok(v);
        }
        let k = args.len();
        let value = if k == self.tree.depth() + 1 {
            self.tree.oracle_f(ledger).apply(&args, false)?
        } else {
            let n = self.tree.width(k + 1);
            let mut secret = BitString::zeros(n);
            for j in 1..=n {
                let mut probe = args.clone();
                probe.push(BitString::one_hot(j, n)?);
                secret = secret.with_bit(j, self.f(probe, ledger)?);
            }
            let mut full = args.clone();
            full.push(secret);
            self.tree.oracle_g(k, ledger)?.apply(&full, false)?
        };
        self.cache.insert(args, value);
        Ok(value)
    }
}
