//! Dense statevector simulation over named registers.
//!
//! Basis indices concatenate register values left to right with the first
//! register most significant, and within a register bit 1 most significant.
//! Widths `(2, 1)` with `x = 10, y = 1` is index `0b101`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::bitmath::{decode_args, BitString};
use crate::error::{Error, Result};
use crate::instance::{CountedOracle, OracleKey, QueryLedger};

pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Tolerance for discard checks and normalization.
pub const DISCARD_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub width: usize,
    /// Position of the register's least significant qubit in the index.
    shift: usize,
}

impl Register {
    fn mask(&self) -> usize {
        ((1usize << self.width) - 1) << self.shift
    }

    fn read(&self, index: usize) -> u64 {
        ((index >> self.shift) & ((1usize << self.width) - 1)) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    total: usize,
}

impl RegisterLayout {
    pub fn new<S: AsRef<str>>(spec: &[(S, usize)]) -> Result<Self> {
        let mut registers: Vec<Register> = Vec::with_capacity(spec.len());
        for (name, width) in spec {
            let name = name.as_ref();
            if *width == 0 {
                return Err(Error::ZeroWidth {
                    level: registers.len() + 1,
                });
            }
            if registers.iter().any(|r| r.name == name) {
                return Err(Error::DuplicateRegister(name.to_string()));
            }
            registers.push(Register {
                name: name.to_string(),
                width: *width,
                shift: 0,
            });
        }
        let mut shift = 0;
        for r in registers.iter_mut().rev() {
            r.shift = shift;
            shift += r.width;
        }
        Ok(Self {
            registers,
            total: shift,
        })
    }

    pub fn total_width(&self) -> usize {
        self.total
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn get(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    /// Basis index for one value per register, in layout order.
    pub fn encode(&self, values: &[BitString]) -> Result<usize> {
        if values.len() != self.registers.len() {
            return Err(Error::ArityMismatch {
                expected: self.registers.len(),
                found: values.len(),
            });
        }
        let mut index = 0usize;
        for (r, v) in self.registers.iter().zip(values) {
            if v.len() != r.width {
                return Err(Error::LengthMismatch {
                    expected: r.width,
                    found: v.len(),
                });
            }
            index |= (v.value() as usize) << r.shift;
        }
        Ok(index)
    }

    pub fn decode(&self, index: usize) -> Vec<BitString> {
        self.registers
            .iter()
            .map(|r| BitString::new(r.width, r.read(index)).expect("fits"))
            .collect()
    }

    /// Global qubit positions of a register, leftmost first. Qubit 0 is the
    /// most significant bit of the basis index.
    pub fn qubits(&self, name: &str) -> Result<Vec<usize>> {
        let r = self.get(name)?;
        let first = self.total - r.shift - r.width;
        Ok((first..first + r.width).collect())
    }
}

#[derive(Clone, Debug)]
pub struct StateVector {
    amps: Vec<Complex64>,
    layout: RegisterLayout,
}

impl StateVector {
    pub fn prepare_basis(layout: RegisterLayout, values: &[BitString]) -> Result<Self> {
        Self::prepare_basis_with_cap(layout, values, DEFAULT_QUBIT_CAP)
    }

    pub fn prepare_basis_with_cap(
        layout: RegisterLayout,
        values: &[BitString],
        cap: usize,
    ) -> Result<Self> {
        let m = layout.total_width();
        if m > cap {
            return Err(Error::QubitCapExceeded { required: m, cap });
        }
        let index = layout.encode(values)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << m];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { amps, layout })
    }

    /// Arbitrary normalized amplitudes.
    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << layout.total_width();
        if amps.len() != dim {
            return Err(Error::MalformedTable {
                expected: dim,
                found: amps.len(),
            });
        }
        let state = Self { amps, layout };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > DISCARD_TOLERANCE {
            return Err(Error::InvalidConfig(format!(
                "state norm² is {norm}, expected 1"
            )));
        }
        Ok(state)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, values: &[BitString]) -> Result<Complex64> {
        Ok(self.amps[self.layout.encode(values)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    /// Largest elementwise amplitude difference to another state on the
    /// same layout.
    pub fn max_deviation(&self, other: &StateVector) -> f64 {
        assert_eq!(self.layout, other.layout, "layouts differ");
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `H` on every qubit of the named registers.
    pub fn apply_hadamards(&mut self, registers: &[&str]) -> Result<()> {
        let mut qubits = Vec::new();
        for name in registers {
            qubits.extend(self.layout.qubits(name)?);
        }
        self.apply_hadamard_qubits(&qubits)
    }

    /// `H` on explicit global qubit positions (0 = most significant).
    pub fn apply_hadamard_qubits(&mut self, qubits: &[usize]) -> Result<()> {
        let m = self.layout.total_width();
        for &q in qubits {
            if q >= m {
                return Err(Error::IndexOutOfRange { index: q, len: m });
            }
            let stride = 1usize << (m - 1 - q);
            for block in self.amps.chunks_mut(2 * stride) {
                let (lo, hi) = block.split_at_mut(stride);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (u, v) = (*a, *b);
                    *a = (u + v) * FRAC_1_SQRT_2;
                    *b = (u - v) * FRAC_1_SQRT_2;
                }
            }
        }
        Ok(())
    }

    /// Basis permutation `|v⟩ -> |v XOR pattern⟩` on one register.
    pub fn flip(&mut self, register: &str, pattern: &BitString) -> Result<()> {
        let r = self.layout.get(register)?;
        if pattern.len() != r.width {
            return Err(Error::LengthMismatch {
                expected: r.width,
                found: pattern.len(),
            });
        }
        let bits = (pattern.value() as usize) << r.shift;
        if bits == 0 {
            return Ok(());
        }
        for i in 0..self.amps.len() {
            let j = i ^ bits;
            if i < j {
                self.amps.swap(i, j);
            }
        }
        Ok(())
    }

    /// Phase-preserving oracle: the amplitude of `|x, y⟩` moves to
    /// `|x, y XOR f(x)⟩` unchanged. `f` is evaluated once per control value.
    pub fn apply_oracle(
        &mut self,
        controls: &[&str],
        target: &str,
        f: &dyn Fn(&[BitString]) -> Result<bool>,
    ) -> Result<()> {
        let table = self.oracle_table(controls, f)?;
        self.apply_oracle_table(controls, target, &table)
    }

    /// `f` tabulated over the control registers, indexed by their
    /// concatenated values.
    pub fn oracle_table(
        &self,
        controls: &[&str],
        f: &dyn Fn(&[BitString]) -> Result<bool>,
    ) -> Result<Vec<bool>> {
        let widths = controls
            .iter()
            .map(|c| Ok(self.layout.get(c)?.width))
            .collect::<Result<Vec<_>>>()?;
        let control_bits: usize = widths.iter().sum();
        (0..(1u64 << control_bits))
            .map(|key| f(&decode_args(key, &widths)))
            .collect()
    }

    /// [`Self::apply_oracle`] with a table from [`Self::oracle_table`].
    pub fn apply_oracle_table(
        &mut self,
        controls: &[&str],
        target: &str,
        table: &[bool],
    ) -> Result<()> {
        let regs = controls
            .iter()
            .map(|c| self.layout.get(c).cloned())
            .collect::<Result<Vec<_>>>()?;
        let t = self.layout.get(target)?;
        if t.width != 1 {
            return Err(Error::LengthMismatch {
                expected: 1,
                found: t.width,
            });
        }
        if regs.iter().any(|r| r.name == t.name) {
            return Err(Error::IllPosedQuery(format!(
                "register `{target}` is both control and target"
            )));
        }
        let control_bits: usize = regs.iter().map(|r| r.width).sum();
        if table.len() != 1 << control_bits {
            return Err(Error::MalformedTable {
                expected: 1 << control_bits,
                found: table.len(),
            });
        }
        let tbit = 1usize << t.shift;
        for i in 0..self.amps.len() {
            if i & tbit != 0 {
                continue;
            }
            let key = regs
                .iter()
                .fold(0usize, |acc, r| (acc << r.width) | r.read(i) as usize);
            if table[key] {
                self.amps.swap(i, i | tbit);
            }
        }
        Ok(())
    }

    /// [`StateVector::apply_oracle`] plus one ledger entry, however large the
    /// superposition.
    pub fn apply_counted_oracle(
        &mut self,
        controls: &[&str],
        target: &str,
        f: &dyn Fn(&[BitString]) -> Result<bool>,
        ledger: &QueryLedger,
        key: OracleKey,
    ) -> Result<()> {
        self.apply_oracle(controls, target, f)?;
        ledger.record(key);
        Ok(())
    }

    /// Quantum use of a counted oracle: one ledger entry per application.
    pub fn apply_quantum_oracle(
        &mut self,
        oracle: &CountedOracle<'_>,
        controls: &[&str],
        target: &str,
    ) -> Result<()> {
        let widths = controls
            .iter()
            .map(|c| self.layout.get(c).map(|r| r.width))
            .collect::<Result<Vec<_>>>()?;
        if widths != oracle.widths() {
            return Err(Error::ArityMismatch {
                expected: oracle.widths().len(),
                found: widths.len(),
            });
        }
        self.apply_oracle(controls, target, &|a| oracle.eval(a))?;
        oracle.ledger().record(oracle.key());
        Ok(())
    }

    /// Marginal distribution of one register.
    pub fn measure_register(&self, register: &str) -> Result<Distribution> {
        let r = self.layout.get(register)?.clone();
        let mut probs = vec![0.0; 1usize << r.width];
        for (i, a) in self.amps.iter().enumerate() {
            probs[r.read(i) as usize] += a.norm_sqr();
        }
        Ok(Distribution {
            width: r.width,
            probs,
        })
    }

    pub fn probability(&self, register: &str, value: &BitString) -> Result<f64> {
        let d = self.measure_register(register)?;
        d.probability(value)
    }

    /// Fails unless the register holds `expected` with probability
    /// `>= 1 - DISCARD_TOLERANCE`, which also means it is unentangled.
    pub fn verify_register(&self, register: &str, expected: &BitString) -> Result<()> {
        let p = self.probability(register, expected)?;
        if p < 1.0 - DISCARD_TOLERANCE {
            return Err(Error::DiscardFailed {
                register: register.to_string(),
                expected: expected.to_string(),
                probability: p,
            });
        }
        Ok(())
    }

    /// Verify the register holds `expected`, then project onto it and drop
    /// it from the layout.
    pub fn discard(&mut self, register: &str, expected: &BitString) -> Result<()> {
        self.verify_register(register, expected)?;
        let r = self.layout.get(register)?.clone();
        let want = (expected.value() as usize) << r.shift;
        let spec: Vec<(String, usize)> = self
            .layout
            .registers
            .iter()
            .filter(|x| x.name != register)
            .map(|x| (x.name.clone(), x.width))
            .collect();
        let layout = RegisterLayout::new(&spec)?;
        let low = (1usize << r.shift) - 1;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << layout.total_width()];
        for (i, a) in self.amps.iter().enumerate() {
            if i & r.mask() == want {
                let j = (i & low) | ((i >> (r.shift + r.width)) << r.shift);
                amps[j] = *a;
            }
        }
        let norm = amps.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        self.amps = amps;
        self.layout = layout;
        Ok(())
    }

    /// Computational-basis measurement of one register, returned as every
    /// outcome with nonzero weight and the matching post-measurement state.
    pub fn measure_branches(&self, register: &str) -> Result<Vec<(f64, BitString, StateVector)>> {
        let r = self.layout.get(register)?.clone();
        let dist = self.measure_register(register)?;
        let mut out = Vec::new();
        for (v, &p) in dist.probs.iter().enumerate() {
            if p <= 1e-15 {
                continue;
            }
            let scale = p.sqrt().recip();
            let amps = self
                .amps
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if r.read(i) as usize == v {
                        a * scale
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let value = BitString::new(r.width, v as u64)?;
            out.push((
                p,
                value,
                StateVector {
                    amps,
                    layout: self.layout.clone(),
                },
            ));
        }
        Ok(out)
    }

    /// Nonzero amplitudes as `(index, re, im)`, for golden files.
    pub fn dump(&self) -> Vec<(usize, f64, f64)> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 1e-12)
            .map(|(i, a)| (i, a.re, a.im))
            .collect()
    }
}

/// Probability distribution over the values of one register.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    width: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(width: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << width {
            return Err(Error::MalformedTable {
                expected: 1 << width,
                found: probs.len(),
            });
        }
        Ok(Self { width, probs })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, value: &BitString) -> Result<f64> {
        if value.len() != self.width {
            return Err(Error::LengthMismatch {
                expected: self.width,
                found: value.len(),
            });
        }
        Ok(self.probs[value.index()])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn most_likely(&self) -> BitString {
        let (i, _) = self
            .probs
            .iter()
            .enumerate()
            .fold(
                (0, f64::MIN),
                |best, (i, &p)| if p > best.1 { (i, p) } else { best },
            );
        BitString::new(self.width, i as u64).expect("fits")
    }

    /// Seeded draw; the same seed always yields the same outcome.
    pub fn sample(&self, seed: u64) -> BitString {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: f64 = rng.gen::<f64>() * self.total();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return BitString::new(self.width, i as u64).expect("fits");
            }
        }
        self.most_likely()
    }

    /// Weighted sum of distributions on the same register.
    pub fn accumulate(&mut self, other: &Distribution, weight: f64) {
        assert_eq!(self.width, other.width, "distribution widths differ");
        for (a, b) in self.probs.iter_mut().zip(&other.probs) {
            *a += weight * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitmath::{sign_spectrum, TruthTable};

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn xy(n: usize) -> RegisterLayout {
        RegisterLayout::new(&[("x", n), ("y", 1)]).unwrap()
    }

    fn linear(s: BitString) -> impl Fn(&[BitString]) -> Result<bool> {
        move |a: &[BitString]| s.dot(&a[0])
    }

    #[test]
    fn layout_errors() {
        assert!(matches!(
            RegisterLayout::new(&[("x", 2), ("x", 1)]),
            Err(Error::DuplicateRegister(_))
        ));
        assert!(RegisterLayout::new(&[("x", 0)]).is_err());
        let l = xy(2);
        assert!(matches!(l.get("z"), Err(Error::UnknownRegister(_))));
        assert_eq!(l.qubits("x").unwrap(), vec![0, 1]);
        assert_eq!(l.qubits("y").unwrap(), vec![2]);
    }

    #[test]
    fn basis_preparation() {
        let s = StateVector::prepare_basis(xy(2), &[bs("00"), bs("0")]).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        let s = StateVector::prepare_basis(xy(2), &[bs("10"), bs("1")]).unwrap();
        assert_eq!(s.amplitudes()[0b101], Complex64::new(1.0, 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(StateVector::prepare_basis(xy(2), &[bs("1"), bs("1")]).is_err());
        let big = RegisterLayout::new(&[("x", 25)]).unwrap();
        assert!(matches!(
            StateVector::prepare_basis(big, &[BitString::zeros(25)]),
            Err(Error::QubitCapExceeded {
                required: 25,
                cap: 24
            })
        ));
    }

    #[test]
    fn hadamard_gives_uniform_and_is_involutive() {
        let layout = RegisterLayout::new(&[("x", 3)]).unwrap();
        let start = StateVector::prepare_basis(layout, &[bs("101")]).unwrap();
        let mut s = start.clone();
        s.apply_hadamards(&["x"]).unwrap();
        let d = s.measure_register("x").unwrap();
        for p in d.probabilities() {
            assert!((p - 0.125).abs() < 1e-12);
        }
        assert!((d.total() - 1.0).abs() < 1e-9);
        s.apply_hadamards(&["x"]).unwrap();
        assert!(s.max_deviation(&start) < 1e-12);
        assert!(s.apply_hadamards(&["nope"]).is_err());
        assert!(s.apply_hadamard_qubits(&[3]).is_err());
    }

    #[test]
    fn bernstein_vazirani_kickback() {
        let mut s = StateVector::prepare_basis(xy(2), &[bs("00"), bs("1")]).unwrap();
        s.apply_hadamards(&["x", "y"]).unwrap();
        s.apply_oracle(&["x"], "y", &linear(bs("10"))).unwrap();
        s.apply_hadamards(&["x", "y"]).unwrap();
        let want = StateVector::prepare_basis(xy(2), &[bs("10"), bs("1")]).unwrap();
        assert!(s.max_deviation(&want) < 1e-12);
    }

    #[test]
    fn kickback_identity_all_phase_basis_inputs() {
        // H U_f H |χ, υ⟩ = |χ ⊕ υ s, υ⟩, compared against bitmath::xor
        for s in BitString::all(2) {
            for chi in BitString::all(2) {
                for ups in BitString::all(1) {
                    let mut st = StateVector::prepare_basis(xy(2), &[chi, ups]).unwrap();
                    st.apply_hadamards(&["x", "y"]).unwrap();
                    st.apply_oracle(&["x"], "y", &linear(s)).unwrap();
                    st.apply_hadamards(&["x", "y"]).unwrap();
                    let shifted = if ups.bit(1) {
                        chi.xor(&s).unwrap()
                    } else {
                        chi
                    };
                    let want = StateVector::prepare_basis(xy(2), &[shifted, ups]).unwrap();
                    assert!(st.max_deviation(&want) <= 1e-9, "s={s} chi={chi} u={ups}");
                }
            }
        }
    }

    #[test]
    fn oracle_classical_action_and_involution() {
        let f = |a: &[BitString]| Ok(a[0].value() == 3);
        for x in BitString::all(2) {
            let mut s = StateVector::prepare_basis(xy(2), &[x, bs("0")]).unwrap();
            s.apply_oracle(&["x"], "y", &f).unwrap();
            let y = BitString::new(1, (x.value() == 3) as u64).unwrap();
            assert!((s.amplitude(&[x, y]).unwrap().re - 1.0).abs() < 1e-15);
            s.apply_oracle(&["x"], "y", &f).unwrap();
            assert!((s.amplitude(&[x, bs("0")]).unwrap().re - 1.0).abs() < 1e-15);
        }
        let mut s = StateVector::prepare_basis(xy(2), &[bs("00"), bs("0")]).unwrap();
        assert!(s.apply_oracle(&["y"], "x", &f).is_err());
        assert!(s.apply_oracle(&["y"], "y", &f).is_err());
    }

    #[test]
    fn oracle_preserves_relative_phases() {
        // arbitrary complex superposition; components sharing x keep their
        // coefficients, only moving between y values
        let layout = xy(2);
        let raw: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let norm = raw.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = raw.iter().map(|a| a / norm).collect();
        let mut s = StateVector::from_amplitudes(layout, amps.clone()).unwrap();
        let f = |a: &[BitString]| Ok(a[0].weight() == 1);
        s.apply_oracle(&["x"], "y", &f).unwrap();
        for x in 0..4usize {
            let flip = (x as u64).count_ones() == 1;
            for y in 0..2usize {
                let from = (x << 1) | y;
                let to = (x << 1) | (y ^ flip as usize);
                assert_eq!(s.amplitudes()[to], amps[from]);
            }
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fourier_sampling_matches_squared_spectrum() {
        for n in 1..=3usize {
            for code in 0..(1u64 << (1 << n)) {
                let table = TruthTable::from_fn(n, |x| (code >> x.index()) & 1 == 1).unwrap();
                let spec = sign_spectrum(&table);
                let mut s =
                    StateVector::prepare_basis(xy(n), &[BitString::zeros(n), bs("1")]).unwrap();
                s.apply_hadamards(&["x", "y"]).unwrap();
                s.apply_oracle(&["x"], "y", &|a| table.get(&a[0])).unwrap();
                s.apply_hadamards(&["x", "y"]).unwrap();
                let d = s.measure_register("x").unwrap();
                for (p, q) in d.probabilities().iter().zip(spec.probabilities()) {
                    assert!((p - q).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn norm_drift_over_many_operations() {
        let layout = RegisterLayout::new(&[("a", 3), ("b", 2), ("t", 1)]).unwrap();
        let mut s = StateVector::prepare_basis(layout, &[bs("011"), bs("10"), bs("1")]).unwrap();
        let f = |a: &[BitString]| Ok((a[0].value() * 3 + a[1].value()) % 5 < 2);
        for i in 0..1000 {
            match i % 3 {
                0 => s.apply_hadamards(&["a", "t"]).unwrap(),
                1 => s.apply_oracle(&["a", "b"], "t", &f).unwrap(),
                _ => s.apply_hadamards(&["b"]).unwrap(),
            }
        }
        assert!((s.norm_sqr() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn discard_verifies_and_projects() {
        let mut s = StateVector::prepare_basis(xy(2), &[bs("10"), bs("1")]).unwrap();
        s.apply_hadamards(&["x"]).unwrap();
        assert!(matches!(
            s.clone().discard("x", &bs("10")),
            Err(Error::DiscardFailed { .. })
        ));
        assert!(s.discard("y", &bs("0")).is_err());
        s.discard("y", &bs("1")).unwrap();
        assert_eq!(s.layout().total_width(), 2);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(s.dump().len(), 4);
    }

    #[test]
    fn counted_oracle_records_once_per_application() {
        let ledger = QueryLedger::new();
        let mut s = StateVector::prepare_basis(xy(3), &[bs("000"), bs("1")]).unwrap();
        s.apply_hadamards(&["x", "y"]).unwrap();
        s.apply_counted_oracle(&["x"], "y", &linear(bs("011")), &ledger, OracleKey::f(1))
            .unwrap();
        assert_eq!(ledger.count(OracleKey::f(1)), 1);
    }

    #[test]
    fn sampling_is_seeded() {
        let d = Distribution::new(2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(d.sample(17), d.sample(17));
        let point = Distribution::new(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        for seed in 0..20 {
            assert_eq!(point.sample(seed), bs("10"));
        }
        assert_eq!(d.most_likely(), bs("11"));
    }

    #[test]
    fn branches_cover_the_state() {
        let mut s = StateVector::prepare_basis(xy(2), &[bs("00"), bs("0")]).unwrap();
        s.apply_hadamards(&["x"]).unwrap();
        let branches = s.measure_branches("x").unwrap();
        assert_eq!(branches.len(), 4);
        let total: f64 = branches.iter().map(|b| b.0).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (_, v, st) in branches {
            assert!((st.probability("x", &v).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
