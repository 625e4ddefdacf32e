//! Minimal pure-state simulator for small qubit registers.
//!
//! Registers are `M`-qubit statevectors indexed big-endian: qubit 1 is the
//! most significant bit of the amplitude index, so `|j⟩ = |k_1 k_2 … k_M⟩`
//! with `k_1` the most significant bit of `j`. Every operation returns a new
//! value; nothing here mutates shared state.

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

/// Amplitude-level tolerance for state validity checks.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance for algebraic identities (oracle involution, reduction form).
pub const ALGEBRA_TOL: f64 = 1e-12;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("element index {index} is out of range for {context}")]
    InvalidElement { index: usize, context: &'static str },
    #[error("state dimension {dim} incompatible with {wanted}")]
    DimensionMismatch { dim: usize, wanted: usize },
    #[error("amplitude vector of length {len} is not a power of two for {qubits} qubits")]
    BadLength { len: usize, qubits: usize },
    #[error("state norm {norm} departs from 1 beyond tolerance")]
    NotNormalized { norm: f64 },
    #[error("state has support outside {{0, {j}}}; register corrupted")]
    CorruptSupport { j: usize },
}

/// Pure state of an `M`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩` on `m` qubits.
    pub fn zero(m: usize) -> Self {
        Self::basis_state(m, 0)
    }

    /// Computational basis state `|idx⟩` on `m` qubits.
    pub fn basis_state(m: usize, idx: usize) -> Self {
        assert!(m >= 1, "register needs at least one qubit");
        assert!(idx < (1 << m), "basis index out of range");
        let mut amps = vec![Complex64::ZERO; 1 << m];
        amps[idx] = Complex64::ONE;
        Self { num_qubits: m, amps }
    }

    /// Single-qubit state `a0|0⟩ + a1|1⟩`.
    pub fn single_qubit(a0: Complex64, a1: Complex64) -> Result<Self, StateError> {
        Self::from_amplitudes(1, vec![a0, a1])
    }

    /// Builds a state from raw amplitudes, enforcing length and normalization.
    pub fn from_amplitudes(m: usize, amps: Vec<Complex64>) -> Result<Self, StateError> {
        if m < 1 || amps.len() != (1 << m) {
            return Err(StateError::BadLength { len: amps.len(), qubits: m });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized { norm });
        }
        Ok(Self { num_qubits: m, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, idx: usize) -> Complex64 {
        self.amps[idx]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn probability(&self, idx: usize) -> f64 {
        self.amps[idx].norm_sqr()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Indices with amplitude above `tol`, ascending.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.amps.len()).filter(|&i| self.amps[i].norm() > tol).collect()
    }

    /// Bit of `idx` at qubit position `pos` (1-based, 1 = most significant).
    fn bit(&self, idx: usize, pos: usize) -> usize {
        (idx >> (self.num_qubits - pos)) & 1
    }

    fn mask(&self, pos: usize) -> usize {
        1 << (self.num_qubits - pos)
    }

    /// SWAP of qubit positions `p1` and `p2` (pure permutation of indices).
    pub fn apply_swap(&self, p1: usize, p2: usize) -> Self {
        assert!(p1 >= 1 && p1 <= self.num_qubits && p2 >= 1 && p2 <= self.num_qubits && p1 != p2);
        let mut out = vec![Complex64::ZERO; self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            let (b1, b2) = (self.bit(i, p1), self.bit(i, p2));
            let j = if b1 != b2 { i ^ self.mask(p1) ^ self.mask(p2) } else { i };
            out[j] = a;
        }
        Self { num_qubits: self.num_qubits, amps: out }
    }

    /// CNOT with control position `control` and target position `target`.
    pub fn apply_cnot(&self, control: usize, target: usize) -> Self {
        assert!(control >= 1 && control <= self.num_qubits);
        assert!(target >= 1 && target <= self.num_qubits && target != control);
        let mut out = vec![Complex64::ZERO; self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            let j = if self.bit(i, control) == 1 { i ^ self.mask(target) } else { i };
            out[j] = a;
        }
        Self { num_qubits: self.num_qubits, amps: out }
    }

    /// Pauli applied to one qubit position; used by the depolarizing channel.
    pub fn apply_pauli(&self, pos: usize, pauli: Pauli) -> Self {
        assert!(pos >= 1 && pos <= self.num_qubits);
        let mask = self.mask(pos);
        let mut out = vec![Complex64::ZERO; self.amps.len()];
        for (i, &a) in self.amps.iter().enumerate() {
            match pauli {
                Pauli::I => out[i] = a,
                Pauli::X => out[i ^ mask] = a,
                Pauli::Y => {
                    // Y|0⟩ = i|1⟩, Y|1⟩ = -i|0⟩
                    if i & mask == 0 {
                        out[i ^ mask] = Complex64::i() * a;
                    } else {
                        out[i ^ mask] = -Complex64::i() * a;
                    }
                }
                Pauli::Z => out[i] = if i & mask == 0 { a } else { -a },
            }
        }
        Self { num_qubits: self.num_qubits, amps: out }
    }

    /// Computational (Z-basis) measurement of a single qubit position.
    /// Returns the observed bit and the collapsed, renormalized state.
    pub fn measure_qubit<R: Rng + ?Sized>(&self, pos: usize, rng: &mut R) -> (u8, Self) {
        assert!(pos >= 1 && pos <= self.num_qubits);
        let mask = self.mask(pos);
        let branch_norm = |bit: u8| -> f64 {
            self.amps
                .iter()
                .enumerate()
                .filter(|(i, _)| ((i & mask != 0) as u8) == bit)
                .map(|(_, a)| a.norm_sqr())
                .sum()
        };
        let p_one = branch_norm(1);
        let mut outcome = u8::from(rng.gen::<f64>() < p_one);
        let mut norm = branch_norm(outcome);
        if norm == 0.0 {
            // Rounding placed the draw in a zero-weight branch.
            outcome ^= 1;
            norm = branch_norm(outcome);
        }
        let keep = |i: usize| ((i & mask != 0) as u8) == outcome;
        let scale = 1.0 / norm.sqrt();
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, &a)| if keep(i) { a * scale } else { Complex64::ZERO })
            .collect();
        (outcome, Self { num_qubits: self.num_qubits, amps })
    }

    /// Applies the diagonal oracle: amplitude at index `j` is multiplied by
    /// `(-1)^{q(j)}` for `j < q.modulus()`; indices beyond the table are
    /// untouched. Norm is preserved exactly.
    pub fn apply_oracle(&self, q: &BitTable) -> Result<Self, StateError> {
        if self.dim() < q.modulus() {
            return Err(StateError::DimensionMismatch { dim: self.dim(), wanted: q.modulus() });
        }
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(j, &a)| if j < q.modulus() && q.get(j) == 1 { -a } else { a })
            .collect();
        Ok(Self { num_qubits: self.num_qubits, amps })
    }

    /// Deterministic SWAP/CNOT circuit taking a state supported on `{0, j}`
    /// to one supported on `{0, 2^{M-1}}` with the relative sign preserved:
    /// if the first 1-bit of `j` sits at position s1 ≠ 1 apply SWAP(1, s1),
    /// then CNOT(1 → i) for every remaining 1-bit position i.
    pub fn reduce_to_plus_minus(&self, j: usize) -> Result<Self, StateError> {
        if j == 0 || j >= self.dim() {
            return Err(StateError::InvalidElement { index: j, context: "reduction target" });
        }
        if self.support(NORM_TOL).iter().any(|&i| i != 0 && i != j) {
            return Err(StateError::CorruptSupport { j });
        }
        let m = self.num_qubits;
        let ones: Vec<usize> = (1..=m).filter(|&p| (j >> (m - p)) & 1 == 1).collect();
        let mut state = self.clone();
        let s1 = ones[0];
        if s1 != 1 {
            state = state.apply_swap(1, s1);
        }
        for &p in &ones[1..] {
            state = state.apply_cnot(1, p);
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Prepares `(|0⟩ + sign·|j⟩)/√2` on `m` qubits.
///
/// Rejects `j = 0` (the element domain is `Z_N^*`) and `j ≥ 2^m`.
pub fn superposition_register(j: usize, m: usize, sign: i8) -> Result<Statevector, StateError> {
    assert!(sign == 1 || sign == -1);
    if j == 0 {
        return Err(StateError::InvalidElement { index: 0, context: "Z_N^* element" });
    }
    if m < 1 || j >= (1 << m) {
        return Err(StateError::InvalidElement { index: j, context: "register of this width" });
    }
    let mut amps = vec![Complex64::ZERO; 1 << m];
    amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[j] = Complex64::new(f64::from(sign) * FRAC_1_SQRT_2, 0.0);
    Ok(Statevector { num_qubits: m, amps })
}

/// Membership table over `[0, N-1]` with the fixed convention that index 0
/// always carries bit 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitTable {
    modulus: usize,
    bits: Vec<u8>,
}

impl BitTable {
    pub fn zeros(modulus: usize) -> Self {
        assert!(modulus >= 2, "table needs at least indices 0 and 1");
        Self { modulus, bits: vec![0; modulus] }
    }

    /// Builds the table with bit 1 exactly at the given indices.
    pub fn from_indices<I: IntoIterator<Item = usize>>(
        modulus: usize,
        ones: I,
    ) -> Result<Self, StateError> {
        let mut table = Self::zeros(modulus);
        for j in ones {
            if j == 0 || j >= modulus {
                return Err(StateError::InvalidElement { index: j, context: "table index" });
            }
            table.bits[j] = 1;
        }
        Ok(table)
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn get(&self, j: usize) -> u8 {
        self.bits[j]
    }

    /// XOR-masks every entry except index 0, which stays 0.
    pub fn xor_mask(&self, r: u8) -> Self {
        assert!(r <= 1);
        let mut bits = self.bits.clone();
        for b in bits.iter_mut().skip(1) {
            *b ^= r;
        }
        Self { modulus: self.modulus, bits }
    }
}

/// Which of the two keygen pair bases to measure in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Phi0,
    Phi1,
}

/// Measurement bases the protocols use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementBasis {
    /// Full computational-basis readout of the register.
    Computational,
    /// `{(|0⟩+|j⟩)/√2, (|0⟩-|j⟩)/√2}` completed lexicographically on the
    /// orthogonal complement, so outcomes outside `{0, j}` are reportable.
    PmPair { j: usize },
    /// Single-qubit `{|φ_b⟩, |φ_b^⊥⟩}` basis at angle `theta`.
    Pair { theta: f64, which: PairKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementOutcome {
    /// Computational outcome `|idx⟩`.
    Index(usize),
    /// `(|0⟩+|j⟩)/√2` branch.
    PmPlus,
    /// `(|0⟩-|j⟩)/√2` branch.
    PmMinus,
    /// Collapse onto a completion vector `|idx⟩` outside `{0, j}`.
    Corrupt(usize),
    /// `|φ_b⟩` branch of a pair basis.
    PairState,
    /// `|φ_b^⊥⟩` branch of a pair basis.
    PairOrthogonal,
}

fn pair_vectors(theta: f64, which: PairKind) -> ([Complex64; 2], [Complex64; 2]) {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let re = |x: f64| Complex64::new(x, 0.0);
    match which {
        // φ0 = cos|0⟩ + sin|1⟩, φ0⊥ = sin|0⟩ - cos|1⟩
        PairKind::Phi0 => ([re(c), re(s)], [re(s), re(-c)]),
        // φ1 = cos|0⟩ - sin|1⟩, φ1⊥ = sin|0⟩ + cos|1⟩
        PairKind::Phi1 => ([re(c), re(-s)], [re(s), re(c)]),
    }
}

fn inner(basis: &[Complex64], amps: &[Complex64]) -> Complex64 {
    basis.iter().zip(amps).map(|(b, a)| b.conj() * a).sum()
}

/// Projective measurement by the Born rule. Outcome sampling and collapse are
/// deterministic given the rng state.
pub fn measure<R: Rng + ?Sized>(
    state: &Statevector,
    basis: MeasurementBasis,
    rng: &mut R,
) -> Result<(MeasurementOutcome, Statevector), StateError> {
    match basis {
        MeasurementBasis::Computational => {
            let draw = rng.gen::<f64>() * state.norm_sqr();
            let mut acc = 0.0;
            let mut hit = None;
            for (i, a) in state.amps.iter().enumerate() {
                acc += a.norm_sqr();
                if draw < acc {
                    hit = Some(i);
                    break;
                }
            }
            let hit = hit.unwrap_or_else(|| {
                (0..state.dim())
                    .rev()
                    .find(|&i| state.amps[i].norm_sqr() > 0.0)
                    .expect("state has support")
            });
            Ok((MeasurementOutcome::Index(hit), Statevector::basis_state(state.num_qubits, hit)))
        }
        MeasurementBasis::PmPair { j } => {
            if j == 0 || j >= state.dim() {
                return Err(StateError::InvalidElement { index: j, context: "pm_pair target" });
            }
            let a0 = state.amps[0];
            let aj = state.amps[j];
            let p_plus = ((a0 + aj) * FRAC_1_SQRT_2).norm_sqr();
            let p_minus = ((a0 - aj) * FRAC_1_SQRT_2).norm_sqr();
            let rest: f64 = state
                .amps
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != 0 && i != j)
                .map(|(_, a)| a.norm_sqr())
                .sum();
            let draw = rng.gen::<f64>() * (p_plus + p_minus + rest);
            if draw < p_plus || (rest == 0.0 && p_minus == 0.0) {
                let collapsed = superposition_register(j, state.num_qubits, 1)?;
                return Ok((MeasurementOutcome::PmPlus, collapsed));
            }
            if draw < p_plus + p_minus || rest == 0.0 {
                let collapsed = superposition_register(j, state.num_qubits, -1)?;
                return Ok((MeasurementOutcome::PmMinus, collapsed));
            }
            // Completion vectors are the remaining computational states in
            // lexicographic order.
            let mut acc = p_plus + p_minus;
            let mut hit = None;
            for (i, a) in state.amps.iter().enumerate() {
                if i == 0 || i == j {
                    continue;
                }
                acc += a.norm_sqr();
                if draw < acc {
                    hit = Some(i);
                    break;
                }
            }
            let idx = hit.unwrap_or_else(|| {
                (0..state.dim())
                    .rev()
                    .find(|&i| i != 0 && i != j && state.amps[i].norm_sqr() > 0.0)
                    .expect("rest is nonzero here")
            });
            Ok((MeasurementOutcome::Corrupt(idx), Statevector::basis_state(state.num_qubits, idx)))
        }
        MeasurementBasis::Pair { theta, which } => {
            if state.num_qubits != 1 {
                return Err(StateError::DimensionMismatch { dim: state.dim(), wanted: 2 });
            }
            let (b, b_perp) = pair_vectors(theta, which);
            let p_state = inner(&b, &state.amps).norm_sqr();
            let outcome = if rng.gen::<f64>() < p_state {
                (MeasurementOutcome::PairState, Statevector { num_qubits: 1, amps: b.to_vec() })
            } else {
                (
                    MeasurementOutcome::PairOrthogonal,
                    Statevector { num_qubits: 1, amps: b_perp.to_vec() },
                )
            };
            Ok(outcome)
        }
    }
}

/// Pair-basis measurement of a single qubit inside a wider register,
/// leaving the other qubits' correlations intact.
pub fn measure_qubit_pair_basis<R: Rng + ?Sized>(
    state: &Statevector,
    pos: usize,
    theta: f64,
    which: PairKind,
    rng: &mut R,
) -> (MeasurementOutcome, Statevector) {
    assert!(pos >= 1 && pos <= state.num_qubits());
    let (b, b_perp) = pair_vectors(theta, which);
    let mask = state.mask(pos);
    let overlap = |vec: &[Complex64; 2]| -> Vec<(usize, Complex64)> {
        (0..state.dim())
            .filter(|i| i & mask == 0)
            .map(|i| {
                let c = vec[0].conj() * state.amps[i] + vec[1].conj() * state.amps[i | mask];
                (i, c)
            })
            .collect()
    };
    let c_state = overlap(&b);
    let p_state: f64 = c_state.iter().map(|(_, c)| c.norm_sqr()).sum();
    let take_state = rng.gen::<f64>() < p_state;
    let (coeffs, vec, outcome) = if take_state {
        (c_state, b, MeasurementOutcome::PairState)
    } else {
        (overlap(&b_perp), b_perp, MeasurementOutcome::PairOrthogonal)
    };
    let norm: f64 = coeffs.iter().map(|(_, c)| c.norm_sqr()).sum();
    let scale = 1.0 / norm.sqrt();
    let mut amps = vec![Complex64::ZERO; state.dim()];
    for (i, c) in coeffs {
        amps[i] = c * vec[0] * scale;
        amps[i | mask] = c * vec[1] * scale;
    }
    (outcome, Statevector { num_qubits: state.num_qubits, amps })
}

/// Optimal probability of distinguishing `|φ0⟩` from `|φ1⟩` with equal
/// priors: `1/2 + sin(θ)/2`.
pub fn helstrom_guess_probability(theta: f64) -> Result<f64, StateError> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
        return Err(StateError::InvalidElement { index: 0, context: "theta in [0, π/2]" });
    }
    Ok(0.5 + 0.5 * theta.sin())
}

/// Monte-Carlo run of the optimal two-outcome discrimination of
/// `{|φ0⟩, |φ1⟩}`: prepare a uniformly chosen member, measure in the
/// `{|+⟩, |-⟩}` basis, guess φ0 on `+`. Returns the empirical success rate.
pub fn simulate_helstrom<R: Rng + ?Sized>(theta: f64, trials: usize, rng: &mut R) -> f64 {
    assert!(trials > 0);
    let mut hits = 0usize;
    for _ in 0..trials {
        let which = if rng.gen::<bool>() { PairKind::Phi1 } else { PairKind::Phi0 };
        let (vec, _) = pair_vectors(theta, which);
        let state = Statevector { num_qubits: 1, amps: vec.to_vec() };
        let (outcome, _) = measure(&state, MeasurementBasis::PmPair { j: 1 }, rng).unwrap();
        let guess = match outcome {
            MeasurementOutcome::PmPlus => PairKind::Phi0,
            MeasurementOutcome::PmMinus => PairKind::Phi1,
            _ => unreachable!("single-qubit pm basis has no completion"),
        };
        if guess == which {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

/// The `|φ_b⟩` state as a single-qubit register.
pub fn pair_state(theta: f64, which: PairKind) -> Statevector {
    let (vec, _) = pair_vectors(theta, which);
    Statevector { num_qubits: 1, amps: vec.to_vec() }
}
