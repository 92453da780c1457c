//! Interaction-picture Hamiltonians, collapse operators and propagators.
//!
//! `H/ħ = Σ_k g_k (a† σ⁻₂₃⁽ᵏ⁾ + a σ⁺₂₃⁽ᵏ⁾) + Σ_d Ω_d (e^{iφ_d} |i⟩⟨j|⁽ᵈ⁾ + h.c.)`
//!
//! Pure states are propagated exactly through a Hermitian eigendecomposition.
//! Density matrices are stepped with classical RK4 on the Lindblad equation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{require_positive, Error, Result};
use crate::linalg::{CMatrix, HermitianEigen, C64};
use crate::statespace::{
    qudit_transition, HilbertLayout, Operator, StateRepr, SystemState, HERMITIAN_TOL, QUDIT_LEVELS,
};

/// One of the two qubits of the gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Qubit {
    One,
    Two,
}

impl Qubit {
    pub const BOTH: [Qubit; 2] = [Qubit::One, Qubit::Two];

    /// Zero-based tensor factor.
    pub fn factor(self) -> usize {
        match self {
            Qubit::One => 0,
            Qubit::Two => 1,
        }
    }

    /// One-based label as used in reports.
    pub fn number(self) -> u8 {
        self.factor() as u8 + 1
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Qubit::One),
            2 => Ok(Qubit::Two),
            _ => Err(Error::InvalidIndex {
                what: "qubit",
                value: n as usize,
                max: 2,
            }),
        }
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "qubit {}", self.number())
    }
}

/// A pair of qudit levels `lower < upper`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
}

impl Transition {
    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        if upper >= QUDIT_LEVELS {
            return Err(Error::InvalidIndex {
                what: "level",
                value: upper,
                max: QUDIT_LEVELS - 1,
            });
        }
        if lower >= upper {
            return Err(Error::config(format!(
                "transition needs lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Every transition of a four-level qudit.
    pub fn all() -> impl Iterator<Item = Transition> {
        (0..QUDIT_LEVELS)
            .flat_map(|i| (i + 1..QUDIT_LEVELS).map(move |j| Transition { lower: i, upper: j }))
    }
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ω{}{}", self.upper, self.lower)
    }
}

/// Cavity coupling of the `|2⟩ ↔ |3⟩` transition of one qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingTerm {
    pub qubit: Qubit,
    /// Coupling constant in rad/s.
    pub g: f64,
    pub enabled: bool,
}

impl CouplingTerm {
    pub fn new(qubit: Qubit, g: f64) -> Result<Self> {
        require_positive("g", g)?;
        Ok(Self {
            qubit,
            g,
            enabled: true,
        })
    }
}

/// Resonant square pulse on the `|i⟩ ↔ |j⟩` transition of one qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveTerm {
    pub qubit: Qubit,
    pub transition: Transition,
    /// Rabi frequency in rad/s.
    pub rabi: f64,
    /// Initial pulse phase in radians.
    pub phase: f64,
    /// Transition the pulse carrier is tuned to. Only used for resonance
    /// bookkeeping against the configured level diagram.
    pub carrier: Transition,
}

impl DriveTerm {
    pub fn new(qubit: Qubit, lower: usize, upper: usize, rabi: f64, phase: f64) -> Result<Self> {
        let transition = Transition::new(lower, upper)?;
        require_positive("rabi", rabi)?;
        Ok(Self {
            qubit,
            transition,
            rabi,
            phase,
            carrier: transition,
        })
    }
}

/// Per-qubit decay and dephasing rates (rad/s). Index `k` refers to level
/// `k + 1`: relaxation `|l⟩ → |l-1⟩` and pure dephasing `|l⟩⟨l|`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QubitDecoherence {
    pub relaxation: [f64; 3],
    pub dephasing: [f64; 3],
}

impl QubitDecoherence {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            relaxation: self.relaxation.map(|r| r * s),
            dephasing: self.dephasing.map(|r| r * s),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.relaxation
            .iter()
            .chain(&self.dephasing)
            .all(|&r| r == 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DecoherenceSpec {
    pub qubits: [QubitDecoherence; 2],
    /// Cavity energy decay rate κ (rad/s).
    pub cavity_decay: f64,
}

impl DecoherenceSpec {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .qubits
            .iter()
            .flat_map(|q| q.relaxation.iter().chain(&q.dephasing))
            .chain(core::iter::once(&self.cavity_decay));
        for &r in all {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config(format!("decoherence rate {r} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Lindblad jump operator `L` with rate `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapseOperator {
    pub label: String,
    pub operator: CMatrix,
    pub rate: f64,
}

/// `H/ħ` for the given couplings and drives. Disabled couplings are skipped.
pub fn build_hamiltonian(
    layout: &HilbertLayout,
    couplings: &[CouplingTerm],
    drives: &[DriveTerm],
) -> Result<Operator> {
    check_protocol_layout(layout)?;
    let n = layout.total_dim();
    let mut h = CMatrix::zeros(n);

    let a = layout.cavity_annihilation().into_matrix();
    let a_dag = a.adjoint();
    for c in couplings.iter().filter(|c| c.enabled) {
        require_positive("g", c.g)?;
        let lower = layout
            .embed_qudit_operator(c.qubit.factor(), &qudit_transition(2, 3)?)?
            .into_matrix();
        let term = a_dag.matmul(&lower);
        h = &h + &(&term + &term.adjoint()).scale(C64::new(c.g, 0.0));
    }

    for (k, d) in drives.iter().enumerate() {
        if drives[..k]
            .iter()
            .any(|e| e.qubit == d.qubit && e.transition == d.transition)
        {
            return Err(Error::config(format!(
                "duplicate drive on {} transition {}",
                d.qubit, d.transition
            )));
        }
        require_positive("rabi", d.rabi)?;
        let t = d.transition;
        let ij = layout
            .embed_qudit_operator(d.qubit.factor(), &qudit_transition(t.lower, t.upper)?)?
            .into_matrix();
        let term = ij.scale(C64::from_polar(d.rabi, d.phase));
        h = &h + &(&term + &term.adjoint());
    }

    h.hermitize();
    Ok(Operator::new(h, true))
}

fn check_protocol_layout(layout: &HilbertLayout) -> Result<()> {
    if layout.qudit_dims() != [QUDIT_LEVELS, QUDIT_LEVELS] {
        return Err(Error::config(format!(
            "the gate model needs two four-level qudits, got {:?}",
            layout.qudit_dims()
        )));
    }
    Ok(())
}

/// Nearest-neighbour relaxation `|l-1⟩⟨l|`, dephasing `|l⟩⟨l|` and cavity
/// loss `a`. Zero-rate channels are omitted.
pub fn collapse_operators(
    layout: &HilbertLayout,
    spec: &DecoherenceSpec,
) -> Result<Vec<CollapseOperator>> {
    check_protocol_layout(layout)?;
    spec.validate()?;
    let mut ops = Vec::new();
    for q in Qubit::BOTH {
        let rates = &spec.qubits[q.factor()];
        for level in 1..QUDIT_LEVELS {
            let gamma = rates.relaxation[level - 1];
            if gamma > 0.0 {
                ops.push(CollapseOperator {
                    label: format!("q{}.decay{}{}", q.number(), level, level - 1),
                    operator: layout
                        .embed_qudit_operator(q.factor(), &qudit_transition(level - 1, level)?)?
                        .into_matrix(),
                    rate: gamma,
                });
            }
            let gamma_phi = rates.dephasing[level - 1];
            if gamma_phi > 0.0 {
                ops.push(CollapseOperator {
                    label: format!("q{}.dephase{}", q.number(), level),
                    operator: layout
                        .embed_qudit_operator(q.factor(), &qudit_transition(level, level)?)?
                        .into_matrix(),
                    rate: gamma_phi,
                });
            }
        }
    }
    if spec.cavity_decay > 0.0 {
        ops.push(CollapseOperator {
            label: String::from("cavity.loss"),
            operator: layout.cavity_annihilation().into_matrix(),
            rate: spec.cavity_decay,
        });
    }
    Ok(ops)
}

fn check_duration(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("duration must be >= 0, got {t}")))
    }
}

/// Cached eigendecomposition of a time-independent Hamiltonian.
#[derive(Clone, Debug)]
pub struct UnitaryPropagator {
    eigen: HermitianEigen,
}

impl UnitaryPropagator {
    pub fn new(h: &Operator) -> Result<Self> {
        let deviation = h.matrix().hermiticity_error();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            eigen: HermitianEigen::new(h.matrix()),
        })
    }

    /// `exp(-i H t)`.
    pub fn unitary(&self, t: f64) -> CMatrix {
        self.eigen.map_spectrum(|l| C64::from_polar(1.0, -l * t))
    }

    pub fn apply(&self, t: f64, state: &SystemState) -> Result<SystemState> {
        check_duration(t)?;
        state.check_dim(self.eigen.vectors.dim())?;
        if t == 0.0 {
            return Ok(state.clone());
        }
        let u = self.unitary(t);
        match state.repr() {
            StateRepr::Pure(v) => {
                let mut out = u.apply(v);
                renormalize(&mut out);
                SystemState::pure_unchecked(state.layout(), out)
            }
            StateRepr::Mixed(rho) => {
                let mut out = u.matmul(rho).matmul(&u.adjoint());
                out.hermitize();
                SystemState::mixed_unchecked(state.layout(), out)
            }
        }
    }
}

/// Removes the rounding-level norm drift of a propagated unit vector.
fn renormalize(v: &mut [C64]) {
    let n = crate::linalg::vec_norm(v);
    if n > 0.0 && (n - 1.0).abs() < 1e-9 {
        for a in v.iter_mut() {
            *a /= n;
        }
    }
}

/// `exp(-iHt) |ψ⟩` (or `U ρ U†`).
pub fn propagate_unitary(h: &Operator, t: f64, state: &SystemState) -> Result<SystemState> {
    UnitaryPropagator::new(h)?.apply(t, state)
}

/// Trace drift beyond which the Lindblad integrator reports a step-size error.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Sparse triplet list, sorted by row.
#[derive(Clone, Debug)]
struct Sparse {
    entries: Vec<(usize, usize, C64)>,
}

impl Sparse {
    fn from_dense(m: &CMatrix) -> Self {
        let n = m.dim();
        let mut entries = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = m[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self { entries }
    }
}

/// Lindblad right-hand side for one time-independent segment:
/// `L(X) = -i (H_eff X - X H_eff†) + Σ γ L X L†` with
/// `H_eff = H - (i/2) Σ γ L†L`.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    dim: usize,
    h_eff: Sparse,
    jumps: Vec<(f64, Sparse)>,
}

impl LindbladGenerator {
    pub fn new(h: &Operator, collapse: &[CollapseOperator]) -> Result<Self> {
        let deviation = h.matrix().hermiticity_error();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let dim = h.dim();
        let mut h_eff = h.matrix().clone();
        let mut jumps = Vec::with_capacity(collapse.len());
        for c in collapse {
            if c.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.operator.dim(),
                });
            }
            if !(c.rate >= 0.0) {
                return Err(Error::config(format!(
                    "collapse rate {} must be >= 0",
                    c.rate
                )));
            }
            if c.rate == 0.0 {
                continue;
            }
            let ldl = c.operator.adjoint().matmul(&c.operator);
            h_eff = &h_eff - &ldl.scale(C64::new(0.0, 0.5 * c.rate));
            jumps.push((c.rate, Sparse::from_dense(&c.operator)));
        }
        Ok(Self {
            dim,
            h_eff: Sparse::from_dense(&h_eff),
            jumps,
        })
    }

    /// Writes `L(x)` into `out`.
    fn rhs(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim;
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let minus_i = C64::new(0.0, -1.0);
        for &(r, c, v) in &self.h_eff.entries {
            // -i H_eff X
            let s = minus_i * v;
            let (src, dst) = (&x[c * n..(c + 1) * n], r * n);
            for (k, xv) in src.iter().enumerate() {
                out[dst + k] += s * xv;
            }
            // +i X H_eff†: (X H†)_{a r} += X_{a c} conj(v)
            let s = C64::new(0.0, 1.0) * v.conj();
            for a in 0..n {
                out[a * n + r] += s * x[a * n + c];
            }
        }
        for (rate, l) in &self.jumps {
            for &(a, i, u) in &l.entries {
                let ui = u * *rate;
                for &(b, j, w) in &l.entries {
                    out[a * n + b] += ui * x[i * n + j] * w.conj();
                }
            }
        }
    }

    /// Integrates `dX/dt = L(X)` over `t` with RK4 steps of at most `dt`.
    /// Works for any operator `X`, not only density matrices.
    pub fn evolve(&self, x: &mut CMatrix, t: f64, dt: f64) -> Result<()> {
        check_duration(t)?;
        require_positive("dt", dt)?;
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        if t == 0.0 {
            return Ok(());
        }
        let steps = step_count(t, dt);
        let h = t / steps as f64;
        let len = self.dim * self.dim;
        let zero = C64::new(0.0, 0.0);
        let mut k = vec![zero; len];
        let mut acc = vec![zero; len];
        let mut probe = vec![zero; len];
        let state = x.as_mut_slice();
        for _ in 0..steps {
            // k1
            self.rhs(state, &mut k);
            for i in 0..len {
                acc[i] = k[i];
                probe[i] = state[i] + k[i] * (0.5 * h);
            }
            // k2
            self.rhs(&probe, &mut k);
            for i in 0..len {
                acc[i] += k[i] * 2.0;
                probe[i] = state[i] + k[i] * (0.5 * h);
            }
            // k3
            self.rhs(&probe, &mut k);
            for i in 0..len {
                acc[i] += k[i] * 2.0;
                probe[i] = state[i] + k[i] * h;
            }
            // k4
            self.rhs(&probe, &mut k);
            for i in 0..len {
                state[i] += (acc[i] + k[i]) * (h / 6.0);
            }
        }
        Ok(())
    }
}

/// Number of equal steps no longer than `dt` that cover `t`.
pub fn step_count(t: f64, dt: f64) -> usize {
    let raw = t / dt;
    let rounded = libm::round(raw);
    // Absorb rounding noise when dt already divides t.
    let steps = if (raw - rounded).abs() <= 1e-9 * raw.max(1.0) {
        rounded
    } else {
        libm::ceil(raw)
    };
    (steps as usize).max(1)
}

/// Evolves a density matrix under the Lindblad equation for time `t`.
/// Pure inputs are promoted to `|ψ⟩⟨ψ|`.
pub fn propagate_lindblad(
    h: &Operator,
    collapse: &[CollapseOperator],
    t: f64,
    dt: f64,
    state: &SystemState,
) -> Result<SystemState> {
    let generator = LindbladGenerator::new(h, collapse)?;
    evolve_density(&generator, t, dt, state)
}

pub(crate) fn evolve_density(
    generator: &LindbladGenerator,
    t: f64,
    dt: f64,
    state: &SystemState,
) -> Result<SystemState> {
    let mut rho = state.density_matrix();
    let before = rho.trace().re;
    generator.evolve(&mut rho, t, dt)?;
    rho.hermitize();
    let drift = (rho.trace().re - before).abs();
    let min_population = (0..rho.dim())
        .map(|i| rho[(i, i)].re)
        .fold(f64::INFINITY, f64::min);
    if !(drift <= TRACE_DRIFT_LIMIT) || min_population < -TRACE_DRIFT_LIMIT {
        return Err(Error::StepSize { drift, dt });
    }
    SystemState::mixed_unchecked(state.layout(), rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TWO_PI;
    use core::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;

    fn layout() -> HilbertLayout {
        HilbertLayout::two_qudits(2).unwrap()
    }

    fn amp(s: &SystemState, layout: &HilbertLayout, levels: [usize; 2], n: usize) -> C64 {
        s.amplitudes().unwrap()[layout.flatten(&levels, n).unwrap()]
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn empty_hamiltonian_is_zero() {
        let l = layout();
        let h = build_hamiltonian(&l, &[], &[]).unwrap();
        assert_eq!(h.matrix(), &CMatrix::zeros(l.total_dim()));
    }

    #[test]
    fn coupling_maps_excited_qubit_to_photon() {
        let l = layout();
        let g = TWO_PI * 100e6;
        let h = build_hamiltonian(&l, &[CouplingTerm::new(Qubit::One, g).unwrap()], &[]).unwrap();
        let out = h
            .apply(&SystemState::basis(&l, &[3, 0], 0).unwrap())
            .unwrap();
        let v = out.amplitudes().unwrap();
        let target = l.flatten(&[2, 0], 1).unwrap();
        for (i, a) in v.iter().enumerate() {
            let want = if i == target { g } else { 0.0 };
            assert!(close(*a, C64::new(want, 0.0), 1e-6));
        }
    }

    #[test]
    fn drive_matrix_element_carries_phase() {
        let l = layout();
        let omega = 2.0;
        let d = DriveTerm::new(Qubit::One, 1, 3, omega, -FRAC_PI_2).unwrap();
        let h = build_hamiltonian(&l, &[], &[d]).unwrap();
        let r = l.flatten(&[1, 0], 0).unwrap();
        let c = l.flatten(&[3, 0], 0).unwrap();
        assert!(close(h.matrix()[(r, c)], C64::new(0.0, -omega), 1e-15));
        assert!(close(h.matrix()[(c, r)], C64::new(0.0, omega), 1e-15));
    }

    #[test]
    fn duplicate_drive_is_rejected_and_disabled_coupling_skipped() {
        let l = layout();
        let d = DriveTerm::new(Qubit::Two, 1, 2, 1.0, 0.0).unwrap();
        assert!(matches!(
            build_hamiltonian(&l, &[], &[d, d]),
            Err(Error::Configuration(_))
        ));
        let mut c = CouplingTerm::new(Qubit::One, 1.0).unwrap();
        c.enabled = false;
        let h = build_hamiltonian(&l, &[c], &[]).unwrap();
        assert_eq!(h.matrix().max_abs(), 0.0);
    }

    #[test]
    fn invalid_terms_are_rejected() {
        assert!(CouplingTerm::new(Qubit::One, 0.0).is_err());
        assert!(DriveTerm::new(Qubit::One, 2, 1, 1.0, 0.0).is_err());
        assert!(DriveTerm::new(Qubit::One, 1, 4, 1.0, 0.0).is_err());
        assert!(DriveTerm::new(Qubit::One, 1, 2, -1.0, 0.0).is_err());
    }

    #[test]
    fn vacuum_rabi_quarter_period() {
        let l = layout();
        let g1 = TWO_PI * 100e6;
        let h = build_hamiltonian(&l, &[CouplingTerm::new(Qubit::One, g1).unwrap()], &[]).unwrap();
        let psi = SystemState::basis(&l, &[3, 0], 0).unwrap();
        let out = propagate_unitary(&h, PI / (2.0 * g1), &psi).unwrap();
        assert!(close(amp(&out, &l, [2, 0], 1), C64::new(0.0, -1.0), 1e-12));
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_vacuum_rabi_period_flips_sign() {
        let l = layout();
        let g2 = TWO_PI * 120e6;
        let h = build_hamiltonian(&l, &[CouplingTerm::new(Qubit::Two, g2).unwrap()], &[]).unwrap();
        let psi = SystemState::basis(&l, &[0, 2], 1).unwrap();
        let out = propagate_unitary(&h, PI / g2, &psi).unwrap();
        assert!(close(amp(&out, &l, [0, 2], 1), C64::new(-1.0, 0.0), 1e-12));
    }

    #[test]
    fn pi_pulse_transfers_one_to_three() {
        let l = layout();
        let omega = TWO_PI * 300e6;
        let d = DriveTerm::new(Qubit::One, 1, 3, omega, -FRAC_PI_2).unwrap();
        let h = build_hamiltonian(&l, &[], &[d]).unwrap();
        let out = propagate_unitary(
            &h,
            PI / (2.0 * omega),
            &SystemState::basis(&l, &[1, 0], 0).unwrap(),
        )
        .unwrap();
        assert!(close(amp(&out, &l, [3, 0], 0), C64::new(1.0, 0.0), 1e-12));
    }

    #[test]
    fn zero_time_is_identity_and_non_hermitian_rejected() {
        let l = layout();
        let h = build_hamiltonian(&l, &[CouplingTerm::new(Qubit::One, 1.0).unwrap()], &[]).unwrap();
        let psi = SystemState::basis(&l, &[3, 1], 0).unwrap();
        assert_eq!(propagate_unitary(&h, 0.0, &psi).unwrap(), psi);
        assert!(propagate_unitary(&h, -1.0, &psi).is_err());

        let bad = Operator::detect(l.cavity_annihilation().into_matrix());
        assert!(matches!(
            propagate_unitary(&bad, 1.0, &psi),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn lindblad_closed_limit_matches_unitary() {
        let l = layout();
        let g = TWO_PI * 100e6;
        let omega = TWO_PI * 300e6;
        let h = build_hamiltonian(
            &l,
            &[
                CouplingTerm::new(Qubit::One, g).unwrap(),
                CouplingTerm::new(Qubit::Two, g).unwrap(),
            ],
            &[DriveTerm::new(Qubit::One, 1, 3, omega, -FRAC_PI_2).unwrap()],
        )
        .unwrap();
        let psi = SystemState::basis(&l, &[1, 1], 0).unwrap();
        let t = 2.0e-9;
        let pure = propagate_unitary(&h, t, &psi).unwrap();
        let mixed = propagate_lindblad(&h, &[], t, t / 4000.0, &psi).unwrap();
        let f = mixed.fidelity_with_pure(pure.amplitudes().unwrap());
        assert!((1.0 - f).abs() < 1e-8, "fidelity {f}");
        assert!(mixed.validate().is_ok());
    }

    #[test]
    fn cavity_decay_matches_exponential() {
        let l = layout();
        let kappa = TWO_PI * 3e9 / 1e4;
        let h = build_hamiltonian(&l, &[], &[]).unwrap();
        let spec = DecoherenceSpec {
            cavity_decay: kappa,
            ..Default::default()
        };
        let ops = collapse_operators(&l, &spec).unwrap();
        assert_eq!(ops.len(), 1);
        let t = 5e-9;
        let out = propagate_lindblad(
            &h,
            &ops,
            t,
            t / 1000.0,
            &SystemState::basis(&l, &[0, 0], 1).unwrap(),
        )
        .unwrap();
        let want = libm::exp(-kappa * t);
        let got = out.photon_sector_population(1);
        assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dephasing_decays_coherence_only() {
        let l = layout();
        let gamma_phi = 1e8;
        let mut spec = DecoherenceSpec::default();
        spec.qubits[0].dephasing[0] = gamma_phi;
        let ops = collapse_operators(&l, &spec).unwrap();
        let h = build_hamiltonian(&l, &[], &[]).unwrap();
        let s = SystemState::superposition(
            &l,
            &[
                (C64::new(1.0, 0.0), &[0, 0], 0),
                (C64::new(1.0, 0.0), &[1, 0], 0),
            ],
        )
        .unwrap();
        let t = 10e-9;
        let out = propagate_lindblad(&h, &ops, t, t / 2000.0, &s).unwrap();
        let rho = out.density().unwrap();
        let (i0, i1) = (
            l.flatten(&[0, 0], 0).unwrap(),
            l.flatten(&[1, 0], 0).unwrap(),
        );
        let want = 0.5 * libm::exp(-0.5 * gamma_phi * t);
        assert!(((rho[(i0, i1)].re - want) / want).abs() < 1e-9);
        assert!((rho[(i0, i0)].re - 0.5).abs() < 1e-13);
        assert!((rho[(i1, i1)].re - 0.5).abs() < 1e-13);
    }

    #[test]
    fn coarse_step_reports_trace_drift() {
        let l = layout();
        let mut spec = DecoherenceSpec::default();
        spec.qubits[0].relaxation[2] = 1e10;
        let ops = collapse_operators(&l, &spec).unwrap();
        let h = build_hamiltonian(&l, &[], &[]).unwrap();
        let s = SystemState::basis(&l, &[3, 0], 0).unwrap();
        assert!(matches!(
            propagate_lindblad(&h, &ops, 1e-8, 1e-9, &s),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn step_count_rounds_exact_divisors() {
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.0, 0.3), 4);
        assert_eq!(step_count(1e-12, 1.0), 1);
    }

    fn arb_drive() -> impl Strategy<Value = DriveTerm> {
        (0usize..3, 1usize..4, 0.1f64..5.0, -PI..PI, prop::bool::ANY).prop_filter_map(
            "i < j",
            |(i, j, rabi, phase, second)| {
                let q = if second { Qubit::Two } else { Qubit::One };
                (i < j).then(|| DriveTerm::new(q, i, j, rabi, phase).unwrap())
            },
        )
    }

    proptest! {
        #[test]
        fn hamiltonian_is_hermitian(
            g1 in 0.1f64..5.0,
            g2 in 0.1f64..5.0,
            drives in proptest::collection::vec(arb_drive(), 0..4),
        ) {
            let mut unique: Vec<DriveTerm> = Vec::new();
            for d in drives {
                if !unique.iter().any(|e| e.qubit == d.qubit && e.transition == d.transition) {
                    unique.push(d);
                }
            }
            let l = layout();
            let h = build_hamiltonian(
                &l,
                &[CouplingTerm::new(Qubit::One, g1).unwrap(), CouplingTerm::new(Qubit::Two, g2).unwrap()],
                &unique,
            ).unwrap();
            prop_assert!(h.matrix().hermiticity_error() < 1e-13);
        }

        #[test]
        fn propagation_is_a_group_action(t1 in 0.0f64..3.0, t2 in 0.0f64..3.0, d in arb_drive()) {
            let l = layout();
            let h = build_hamiltonian(&l, &[CouplingTerm::new(Qubit::One, 1.3).unwrap()], &[d]).unwrap();
            let p = UnitaryPropagator::new(&h).unwrap();
            let psi = SystemState::superposition(
                &l,
                &[(C64::new(1.0, 0.0), &[1, 0], 0), (C64::new(0.3, 0.7), &[3, 2], 1)],
            ).unwrap();
            let two = p.apply(t1, &p.apply(t2, &psi).unwrap()).unwrap();
            let one = p.apply(t1 + t2, &psi).unwrap();
            let diff = two.amplitudes().unwrap().iter().zip(one.amplitudes().unwrap())
                .map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-11);
        }

        #[test]
        fn drive_leaves_other_levels_untouched(d in arb_drive(), t in 0.0f64..4.0) {
            let l = layout();
            let h = build_hamiltonian(&l, &[], &[d]).unwrap();
            let p = UnitaryPropagator::new(&h).unwrap();
            for level in (0..4).filter(|&k| k != d.transition.lower && k != d.transition.upper) {
                let mut levels = [0, 0];
                levels[d.qubit.factor()] = level;
                let psi = SystemState::basis(&l, &levels, 0).unwrap();
                let out = p.apply(t, &psi).unwrap();
                prop_assert!((amp(&out, &l, levels, 0) - C64::new(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }
}
