//! Device configuration and the nine-segment controlled-phase schedule.
//!
//! The gate runs in three steps. Step one maps `|1⟩₁|0⟩_c` to `i|1⟩₁|1⟩_c`
//! by emitting a photon, step two flips the sign of `|1⟩₂|1⟩_c` with a full
//! vacuum-Rabi cycle on qubit 2, and step three reabsorbs the photon into
//! qubit 1. Each step is pulse, wait, pulse:
//!
//! | # | label           | action                                   | duration  |
//! |---|-----------------|------------------------------------------|-----------|
//! | 1 | `step1.pulse_a` | qubit 1, `|1⟩↔|3⟩`, φ = −π/2             | π/(2Ω)    |
//! | 2 | `step1.wait_b`  | cavity exchange                          | π/(2g₁)   |
//! | 3 | `step1.pulse_c` | qubit 1, `|1⟩↔|2⟩`, φ = −π/2             | π/(2Ω)    |
//! | 4 | `step2.pulse_a` | qubit 2, `|1⟩↔|2⟩`, φ = −π/2             | π/(2Ω)    |
//! | 5 | `step2.wait_b`  | cavity exchange                          | π/g₂      |
//! | 6 | `step2.pulse_c` | qubit 2, `|1⟩↔|2⟩`, φ = +π/2             | π/(2Ω)    |
//! | 7 | `step3.pulse_a` | qubit 1, `|1⟩↔|2⟩`, φ = −π/2             | π/(2Ω)    |
//! | 8 | `step3.wait_b`  | cavity exchange                          | π/(2g₁)   |
//! | 9 | `step3.pulse_c` | qubit 1, `|1⟩↔|3⟩`, φ = +π/2             | π/(2Ω)    |

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;
use core::str::FromStr;

use crate::dynamics::{
    build_hamiltonian, collapse_operators, evolve_density, CouplingTerm, DecoherenceSpec,
    DriveTerm, LindbladGenerator, Qubit, QubitDecoherence, Transition, UnitaryPropagator,
};
use crate::error::{require_positive, Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::statespace::{HilbertLayout, Operator, SystemState, DEFAULT_N_MAX};
use crate::TWO_PI;

/// Relative tolerance for the resonance preconditions.
pub const RESONANCE_TOL: f64 = 1e-9;

/// Default guard band between distinct transitions (rad/s).
pub const DEFAULT_GUARD_BAND: f64 = TWO_PI * 500e6;

/// Lindblad steps per gate duration when no explicit step is configured.
pub const DEFAULT_LINDBLAD_STEPS: usize = 20_000;

/// One four-level flux qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuditSpec {
    /// Level frequencies `ω₀ < ω₁ < ω₂ < ω₃` in rad/s.
    pub levels: [f64; 4],
    /// Coupling of `|2⟩↔|3⟩` to the cavity (rad/s).
    pub g: f64,
    pub decoherence: QubitDecoherence,
}

impl QuditSpec {
    pub fn spacing(&self, t: Transition) -> f64 {
        self.levels[t.upper] - self.levels[t.lower]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavitySpec {
    /// Ordinary frequency ν_c in Hz.
    pub frequency_hz: f64,
    pub quality: f64,
    pub n_max: usize,
}

impl CavitySpec {
    pub fn angular_frequency(&self) -> f64 {
        TWO_PI * self.frequency_hz
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Cavity couplings off during pulses, on during waits.
    #[default]
    SequentialIdeal,
    /// Cavity couplings on throughout.
    Concurrent,
    /// Concurrent Hamiltonians plus decay, dephasing and photon loss.
    Lindblad,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SequentialIdeal => "sequential_ideal",
            Mode::Concurrent => "concurrent",
            Mode::Lindblad => "lindblad",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential_ideal" => Ok(Mode::SequentialIdeal),
            "concurrent" => Ok(Mode::Concurrent),
            "lindblad" => Ok(Mode::Lindblad),
            other => Err(Error::config(format!(
                "unknown mode {other:?} (expected sequential_ideal, concurrent or lindblad)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceConfig {
    pub qubits: [QuditSpec; 2],
    pub cavity: CavitySpec,
    /// Default Rabi frequency Ω of every pulse (rad/s).
    pub rabi: f64,
    /// Per-segment Rabi frequency, keyed by segment label.
    pub rabi_overrides: BTreeMap<String, f64>,
    pub mode: Mode,
    /// Lindblad step (s); defaults to τ / 20000.
    pub lindblad_dt: Option<f64>,
    /// Multiplies every collapse rate, cavity loss included.
    pub decoherence_scale: f64,
    /// Minimum separation between an addressed transition and any other.
    pub guard_band: f64,
    /// Keep the non-addressed qubit coupled to the cavity during waits.
    pub couple_idle_qubit: bool,
}

impl DeviceConfig {
    /// Two identical qubits with 5/10/3 GHz spacings, g/2π = 100 MHz,
    /// Ω/2π = 300 MHz, ν_c = 3 GHz and Q = 10⁴, without qubit decoherence.
    pub fn paper_regime() -> Self {
        let qubit = QuditSpec {
            levels: [0.0, 5e9, 15e9, 18e9].map(|f| TWO_PI * f),
            g: TWO_PI * 100e6,
            decoherence: QubitDecoherence::default(),
        };
        Self {
            qubits: [qubit, qubit],
            cavity: CavitySpec {
                frequency_hz: 3e9,
                quality: 1e4,
                n_max: DEFAULT_N_MAX,
            },
            rabi: TWO_PI * 300e6,
            rabi_overrides: BTreeMap::new(),
            mode: Mode::SequentialIdeal,
            lindblad_dt: None,
            decoherence_scale: 1.0,
            guard_band: DEFAULT_GUARD_BAND,
            couple_idle_qubit: true,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn qubit(&self, q: Qubit) -> &QuditSpec {
        &self.qubits[q.factor()]
    }

    pub fn layout(&self) -> Result<HilbertLayout> {
        HilbertLayout::two_qudits(self.cavity.n_max)
    }

    /// κ = 2πν_c / Q.
    pub fn cavity_decay_rate(&self) -> f64 {
        self.cavity.angular_frequency() / self.cavity.quality
    }

    /// Collapse rates with the global scale applied.
    pub fn decoherence(&self) -> DecoherenceSpec {
        let s = self.decoherence_scale;
        DecoherenceSpec {
            qubits: self.qubits.map(|q| q.decoherence.scaled(s)),
            cavity_decay: self.cavity_decay_rate() * s,
        }
    }

    pub fn rabi_for(&self, label: &str) -> f64 {
        self.rabi_overrides.get(label).copied().unwrap_or(self.rabi)
    }

    /// Σ of segment durations; equals π/g₁ + π/g₂ + 3π/Ω without overrides.
    pub fn total_time(&self) -> f64 {
        SEGMENTS.iter().map(|s| s.duration(self)).sum()
    }

    pub fn validate(&self) -> Result<()> {
        for q in Qubit::BOTH {
            let spec = self.qubit(q);
            if !spec.levels.iter().all(|l| l.is_finite())
                || !spec.levels.windows(2).all(|w| w[0] < w[1])
            {
                return Err(Error::config(format!(
                    "{q} level frequencies must be strictly ascending"
                )));
            }
            require_positive(if q == Qubit::One { "g1" } else { "g2" }, spec.g)?;
        }
        require_positive("omega", self.rabi)?;
        for (label, &omega) in &self.rabi_overrides {
            if !SEGMENTS
                .iter()
                .any(|s| s.label == label && s.kind == SegmentKind::Pulse)
            {
                return Err(Error::config(format!(
                    "per-segment Rabi override names unknown pulse segment {label:?}"
                )));
            }
            require_positive("per-segment omega", omega)?;
        }
        require_positive("nu_c", self.cavity.frequency_hz)?;
        require_positive("Q", self.cavity.quality)?;
        if self.cavity.n_max < 1 {
            return Err(Error::config("cavity n_max must be at least 1"));
        }
        if let Some(dt) = self.lindblad_dt {
            require_positive("lindblad_dt", dt)?;
        }
        if !(self.decoherence_scale >= 0.0 && self.decoherence_scale.is_finite()) {
            return Err(Error::config("decoherence scale must be >= 0"));
        }
        if !(self.guard_band >= 0.0) {
            return Err(Error::config("guard band must be >= 0"));
        }
        self.decoherence().validate()?;

        let top = Transition { lower: 2, upper: 3 };
        let w1 = self.qubits[0].spacing(top);
        let w2 = self.qubits[1].spacing(top);
        let rel = (w1 - w2).abs() / w1.max(w2);
        if rel > RESONANCE_TOL {
            return Err(Error::config(format!(
                "qubit |2⟩↔|3⟩ spacings differ by {rel:.1e} relative; limit {RESONANCE_TOL:.0e}"
            )));
        }
        let wc = self.cavity.angular_frequency();
        let rel = (wc - w1).abs() / w1;
        if rel > RESONANCE_TOL {
            return Err(Error::config(format!(
                "cavity off resonance: ν_c = {:.6} GHz but ω₃₂/2π = {:.6} GHz ({rel:.1e} relative; limit {RESONANCE_TOL:.0e})",
                self.cavity.frequency_hz * 1e-9,
                w1 / TWO_PI * 1e-9
            )));
        }

        // The cavity must be decoupled from every other transition.
        for q in Qubit::BOTH {
            for t in Transition::all().filter(|&t| t != top) {
                let detuning = (self.qubit(q).spacing(t) - wc).abs();
                if detuning <= self.guard_band {
                    return Err(Error::config(format!(
                        "cavity is within {:.1} MHz of {q} transition {t} (guard band {:.1} MHz)",
                        detuning / TWO_PI * 1e-6,
                        self.guard_band / TWO_PI * 1e-6
                    )));
                }
            }
        }
        for seg in SEGMENTS.iter().filter(|s| s.kind == SegmentKind::Pulse) {
            let drive = seg.drive(self)?.expect("pulse segments carry a drive");
            self.check_drive_resonance(&drive)?;
        }
        Ok(())
    }

    /// Rejects drives whose carrier is not the addressed transition or whose
    /// spacing collides with another transition of the same qubit.
    pub fn check_drive_resonance(&self, drive: &DriveTerm) -> Result<()> {
        if drive.carrier != drive.transition {
            return Err(Error::config(format!(
                "pulse carrier {} does not match addressed transition {} on {}",
                drive.carrier, drive.transition, drive.qubit
            )));
        }
        let spec = self.qubit(drive.qubit);
        let w = spec.spacing(drive.carrier);
        for other in Transition::all().filter(|&t| t != drive.carrier) {
            let gap = (spec.spacing(other) - w).abs();
            if gap <= self.guard_band {
                return Err(Error::config(format!(
                    "pulse on {} transition {} is within {:.1} MHz of transition {} (guard band {:.1} MHz)",
                    drive.qubit,
                    drive.carrier,
                    gap / TWO_PI * 1e-6,
                    other,
                    self.guard_band / TWO_PI * 1e-6
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    Pulse,
    Wait,
}

/// Static description of one schedule slot.
#[derive(Clone, Copy, Debug)]
struct SegmentTemplate {
    label: &'static str,
    kind: SegmentKind,
    qubit: Qubit,
    /// Pulse transition and phase, unused for waits.
    pulse: (usize, usize, f64),
    /// Wait duration in units of π/g of the target qubit.
    wait_periods: f64,
}

impl SegmentTemplate {
    const fn pulse(label: &'static str, qubit: Qubit, i: usize, j: usize, phase: f64) -> Self {
        Self {
            label,
            kind: SegmentKind::Pulse,
            qubit,
            pulse: (i, j, phase),
            wait_periods: 0.0,
        }
    }

    const fn wait(label: &'static str, qubit: Qubit, periods: f64) -> Self {
        Self {
            label,
            kind: SegmentKind::Wait,
            qubit,
            pulse: (0, 0, 0.0),
            wait_periods: periods,
        }
    }

    fn duration(&self, config: &DeviceConfig) -> f64 {
        match self.kind {
            SegmentKind::Pulse => PI / (2.0 * config.rabi_for(self.label)),
            SegmentKind::Wait => self.wait_periods * PI / config.qubit(self.qubit).g,
        }
    }

    fn drive(&self, config: &DeviceConfig) -> Result<Option<DriveTerm>> {
        match self.kind {
            SegmentKind::Wait => Ok(None),
            SegmentKind::Pulse => {
                let (i, j, phase) = self.pulse;
                DriveTerm::new(self.qubit, i, j, config.rabi_for(self.label), phase).map(Some)
            }
        }
    }
}

const SEGMENTS: [SegmentTemplate; 9] = [
    SegmentTemplate::pulse("step1.pulse_a", Qubit::One, 1, 3, -FRAC_PI_2),
    SegmentTemplate::wait("step1.wait_b", Qubit::One, 0.5),
    SegmentTemplate::pulse("step1.pulse_c", Qubit::One, 1, 2, -FRAC_PI_2),
    SegmentTemplate::pulse("step2.pulse_a", Qubit::Two, 1, 2, -FRAC_PI_2),
    SegmentTemplate::wait("step2.wait_b", Qubit::Two, 1.0),
    SegmentTemplate::pulse("step2.pulse_c", Qubit::Two, 1, 2, FRAC_PI_2),
    SegmentTemplate::pulse("step3.pulse_a", Qubit::One, 1, 2, -FRAC_PI_2),
    SegmentTemplate::wait("step3.wait_b", Qubit::One, 0.5),
    SegmentTemplate::pulse("step3.pulse_c", Qubit::One, 1, 3, FRAC_PI_2),
];

/// Labels of the nine schedule segments, in order.
pub fn segment_labels() -> impl Iterator<Item = &'static str> {
    SEGMENTS.iter().map(|s| s.label)
}

/// Segment indices (zero-based) after which a step checkpoint is taken.
pub const CHECKPOINT_AFTER: [usize; 3] = [2, 5, 8];

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSegment {
    pub label: &'static str,
    pub kind: SegmentKind,
    /// Qubit addressed by the pulse, or exchanging with the cavity.
    pub target: Qubit,
    /// Seconds.
    pub duration: f64,
    pub drives: Vec<DriveTerm>,
    /// Whether cavity couplings enter the Hamiltonian of this segment.
    pub couplings_active: bool,
}

impl ScheduleSegment {
    /// Couplings present in this segment's Hamiltonian.
    pub fn couplings(&self, config: &DeviceConfig) -> Result<Vec<CouplingTerm>> {
        if !self.couplings_active {
            return Ok(Vec::new());
        }
        Qubit::BOTH
            .iter()
            .filter(|&&q| {
                config.couple_idle_qubit || self.kind == SegmentKind::Pulse || q == self.target
            })
            .map(|&q| CouplingTerm::new(q, config.qubit(q).g))
            .collect()
    }

    pub fn hamiltonian(&self, config: &DeviceConfig, layout: &HilbertLayout) -> Result<Operator> {
        build_hamiltonian(layout, &self.couplings(config)?, &self.drives)
    }
}

/// The nine pulse/wait segments for a validated configuration.
pub fn build_cp_schedule(config: &DeviceConfig) -> Result<Vec<ScheduleSegment>> {
    config.validate()?;
    SEGMENTS
        .iter()
        .map(|t| {
            let couplings_active = match t.kind {
                SegmentKind::Wait => true,
                SegmentKind::Pulse => config.mode != Mode::SequentialIdeal,
            };
            Ok(ScheduleSegment {
                label: t.label,
                kind: t.kind,
                target: t.qubit,
                duration: t.duration(config),
                drives: t.drive(config)?.into_iter().collect(),
                couplings_active,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub segments: Vec<ScheduleSegment>,
    /// States after steps one, two and three.
    pub checkpoints: [SystemState; 3],
    pub final_state: SystemState,
    pub total_time: f64,
}

#[derive(Clone, Debug)]
enum SegmentPropagator {
    Unitary(UnitaryPropagator),
    Lindblad(LindbladGenerator),
}

/// A schedule with every segment propagator prepared, reusable across
/// initial states.
#[derive(Clone, Debug)]
pub struct CompiledProtocol {
    mode: Mode,
    layout: HilbertLayout,
    segments: Vec<ScheduleSegment>,
    hamiltonians: Vec<Operator>,
    propagators: Vec<SegmentPropagator>,
    lindblad_dt: f64,
    total_time: f64,
}

impl CompiledProtocol {
    pub fn new(config: &DeviceConfig) -> Result<Self> {
        let segments = build_cp_schedule(config)?;
        let layout = config.layout()?;
        let total_time = segments.iter().map(|s| s.duration).sum::<f64>();
        let collapse = match config.mode {
            Mode::Lindblad => collapse_operators(&layout, &config.decoherence())?,
            _ => Vec::new(),
        };
        let mut hamiltonians = Vec::with_capacity(segments.len());
        let mut propagators = Vec::with_capacity(segments.len());
        for seg in &segments {
            let h = seg.hamiltonian(config, &layout)?;
            propagators.push(match config.mode {
                Mode::Lindblad => {
                    SegmentPropagator::Lindblad(LindbladGenerator::new(&h, &collapse)?)
                }
                _ => SegmentPropagator::Unitary(UnitaryPropagator::new(&h)?),
            });
            hamiltonians.push(h);
        }
        let lindblad_dt = config
            .lindblad_dt
            .unwrap_or(total_time / DEFAULT_LINDBLAD_STEPS as f64);
        Ok(Self {
            mode: config.mode,
            layout,
            segments,
            hamiltonians,
            propagators,
            lindblad_dt,
            total_time,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn segments(&self) -> &[ScheduleSegment] {
        &self.segments
    }

    /// `(H, duration)` of every segment, in order.
    pub fn hamiltonians(&self) -> impl Iterator<Item = (&Operator, f64)> {
        self.hamiltonians
            .iter()
            .zip(self.segments.iter().map(|s| s.duration))
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn lindblad_dt(&self) -> f64 {
        self.lindblad_dt
    }

    pub fn run(&self, initial: &SystemState) -> Result<ProtocolRun> {
        if initial.layout() != &self.layout {
            return Err(Error::DimensionMismatch {
                expected: self.layout.total_dim(),
                found: initial.layout().total_dim(),
            });
        }
        initial.validate()?;
        let mut state = match self.mode {
            Mode::Lindblad => initial.to_density(),
            _ => initial.clone(),
        };
        let mut checkpoints = Vec::with_capacity(3);
        for (k, (seg, prop)) in self.segments.iter().zip(&self.propagators).enumerate() {
            state = match prop {
                SegmentPropagator::Unitary(u) => u.apply(seg.duration, &state)?,
                SegmentPropagator::Lindblad(l) => {
                    evolve_density(l, seg.duration, self.lindblad_dt, &state)?
                }
            };
            if CHECKPOINT_AFTER.contains(&k) {
                checkpoints.push(state.clone());
            }
        }
        let checkpoints: [SystemState; 3] = checkpoints
            .try_into()
            .map_err(|_| Error::state("schedule produced the wrong number of checkpoints"))?;
        Ok(ProtocolRun {
            segments: self.segments.clone(),
            checkpoints,
            final_state: state,
            total_time: self.total_time,
        })
    }

    /// Evolves an arbitrary operator `X` (not necessarily a density matrix)
    /// through the whole schedule: `U X U†` in the closed modes, the
    /// Lindblad flow otherwise.
    pub fn evolve_operator(&self, x: &mut CMatrix) -> Result<()> {
        if x.dim() != self.layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.total_dim(),
                found: x.dim(),
            });
        }
        for (seg, prop) in self.segments.iter().zip(&self.propagators) {
            match prop {
                SegmentPropagator::Unitary(u) => {
                    let m = u.unitary(seg.duration);
                    *x = m.matmul(x).matmul(&m.adjoint());
                }
                SegmentPropagator::Lindblad(l) => l.evolve(x, seg.duration, self.lindblad_dt)?,
            }
        }
        Ok(())
    }
}

/// Runs the full schedule on `initial`.
pub fn run_protocol(config: &DeviceConfig, initial: &SystemState) -> Result<ProtocolRun> {
    CompiledProtocol::new(config)?.run(initial)
}

/// Ideal state after step `step` (1, 2 or 3) for the computational input
/// `|ε₁ε₂⟩|0⟩_c`, as `(amplitude, [l₁, l₂], photons)`.
pub fn ideal_checkpoint(step: usize, e1: usize, e2: usize) -> Result<(C64, [usize; 2], usize)> {
    if e1 > 1 || e2 > 1 {
        return Err(Error::InvalidIndex {
            what: "computational level",
            value: e1.max(e2),
            max: 1,
        });
    }
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    Ok(match (step, e1, e2) {
        (1..=3, 0, _) => (one, [0, e2], 0),
        (1, 1, _) => (i, [1, e2], 1),
        (2, 1, 0) => (i, [1, 0], 1),
        (2, 1, 1) => (-i, [1, 1], 1),
        (3, 1, 0) => (one, [1, 0], 0),
        (3, 1, 1) => (-one, [1, 1], 0),
        _ => {
            return Err(Error::InvalidIndex {
                what: "step",
                value: step,
                max: 3,
            })
        }
    })
}

/// The ideal checkpoint as a state vector in `layout`.
pub fn ideal_checkpoint_state(
    layout: &HilbertLayout,
    step: usize,
    e1: usize,
    e2: usize,
) -> Result<SystemState> {
    let (amp, levels, n) = ideal_checkpoint(step, e1, e2)?;
    SystemState::superposition(layout, &[(amp, &levels, n)])
}
