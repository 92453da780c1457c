//! Gate extraction, fidelity and leakage, timing budgets and sweeps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use crate::error::{require_positive, Error, Result};
use crate::linalg::{inner, CMatrix, C64};
use crate::protocol::{
    ideal_checkpoint, ideal_checkpoint_state, CompiledProtocol, DeviceConfig, Mode, ProtocolRun,
    ScheduleSegment,
};
use crate::statespace::{HilbertLayout, SystemState};
use crate::TWO_PI;

/// Computational basis `|00⟩, |01⟩, |10⟩, |11⟩` as `(ε₁, ε₂)`.
pub const COMPUTATIONAL: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Target gate `|ε₁ε₂⟩ → (−1)^{ε₁ε₂} |ε₁ε₂⟩`.
pub fn cp_target() -> CMatrix {
    let one = C64::new(1.0, 0.0);
    CMatrix::diagonal(&[one, one, one, -one])
}

/// `|Tr(M† U)|² / (d · Tr(M† M))`: insensitive to a global phase of `M` and
/// defined for non-unitary `M`. Returns 0 for `M = 0`.
pub fn process_fidelity(m: &CMatrix, target: &CMatrix) -> f64 {
    let d = m.dim() as f64;
    let overlap = m.adjoint().matmul(target).trace().norm_sqr();
    let norm = m.adjoint().matmul(m).trace().re;
    if norm <= 0.0 {
        0.0
    } else {
        overlap / (d * norm)
    }
}

/// τ = π/g₁ + π/g₂ + 3π/Ω (all angular frequencies, result in seconds).
pub fn total_gate_time(g1: f64, g2: f64, omega: f64) -> Result<f64> {
    require_positive("g1", g1)?;
    require_positive("g2", g2)?;
    require_positive("omega", omega)?;
    Ok(PI / g1 + PI / g2 + 3.0 * PI / omega)
}

/// κ⁻¹ = Q / (2π ν_c), with ν_c in Hz.
pub fn cavity_photon_lifetime(quality: f64, nu_c: f64) -> Result<f64> {
    require_positive("Q", quality)?;
    require_positive("nu_c", nu_c)?;
    Ok(quality / (TWO_PI * nu_c))
}

#[derive(Clone, Debug)]
pub struct GateReport {
    pub mode: Mode,
    /// 4×4 block on computational ⊗ vacuum, rows/columns `|00⟩…|11⟩`.
    pub gate_matrix: CMatrix,
    /// Phase-invariant overlap of `gate_matrix` with the CP target.
    pub process_fidelity: f64,
    /// Mean state fidelity over the basis inputs, `|+⟩|+⟩` and
    /// `(|00⟩ + |11⟩)/√2`.
    pub probe_fidelity: f64,
    pub column_leakage: [f64; 4],
    pub avg_leakage: f64,
    /// Seconds.
    pub total_time: f64,
    /// Mean fidelity with the ideal state after each of the three steps.
    pub checkpoint_fidelities: [f64; 3],
    /// Max elementwise deviation from the ideal checkpoints, phases included.
    pub checkpoint_deviations: [f64; 3],
    pub segments: Vec<ScheduleSegment>,
}

impl GateReport {
    /// Headline figure: process fidelity for closed runs, probe-averaged
    /// state fidelity in Lindblad mode.
    pub fn fidelity(&self) -> f64 {
        match self.mode {
            Mode::Lindblad => self.probe_fidelity,
            _ => self.process_fidelity,
        }
    }

    /// Largest elementwise deviation from the CP target.
    pub fn max_deviation_from_target(&self) -> f64 {
        self.gate_matrix.max_abs_diff(&cp_target())
    }
}

fn computational_indices(layout: &HilbertLayout) -> Result<[usize; 4]> {
    let mut idx = [0; 4];
    for (slot, &(e1, e2)) in idx.iter_mut().zip(&COMPUTATIONAL) {
        *slot = layout.flatten(&[e1, e2], 0)?;
    }
    Ok(idx)
}

/// Superposition probes: `(coefficients over COMPUTATIONAL)`.
fn superposition_probes() -> [[C64; 4]; 2] {
    let half = C64::new(0.5, 0.0);
    let r = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    [[half, half, half, half], [r, z, z, r]]
}

fn column_state(layout: &HilbertLayout, idx: &[usize; 4], coeffs: &[C64; 4]) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); layout.total_dim()];
    for (c, &i) in coeffs.iter().zip(idx) {
        v[i] = *c;
    }
    v
}

/// Ideal output `U_CP |probe⟩ ⊗ |0⟩_c`.
fn ideal_output(layout: &HilbertLayout, idx: &[usize; 4], coeffs: &[C64; 4]) -> Vec<C64> {
    let target = cp_target();
    let mapped: Vec<C64> = target.apply(coeffs);
    column_state(layout, idx, &[mapped[0], mapped[1], mapped[2], mapped[3]])
}

fn unit_coeffs(k: usize) -> [C64; 4] {
    let mut c = [C64::new(0.0, 0.0); 4];
    c[k] = C64::new(1.0, 0.0);
    c
}

fn checkpoint_fidelities(layout: &HilbertLayout, runs: &[ProtocolRun]) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (step, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (run, &(e1, e2)) in runs.iter().zip(&COMPUTATIONAL) {
            let (amp, levels, n) = ideal_checkpoint(step + 1, e1, e2)?;
            let mut ideal = vec![C64::new(0.0, 0.0); layout.total_dim()];
            ideal[layout.flatten(&levels, n)?] = amp;
            acc += run.checkpoints[step].fidelity_with_pure(&ideal);
        }
        *slot = acc / 4.0;
    }
    Ok(out)
}

/// Largest elementwise distance to the ideal checkpoint, phases included.
/// Mixed states are compared as density matrices.
fn checkpoint_deviations(layout: &HilbertLayout, runs: &[ProtocolRun]) -> Result<[f64; 3]> {
    let mut out = [0.0f64; 3];
    for (step, slot) in out.iter_mut().enumerate() {
        for (run, &(e1, e2)) in runs.iter().zip(&COMPUTATIONAL) {
            let ideal = ideal_checkpoint_state(layout, step + 1, e1, e2)?;
            let got = &run.checkpoints[step];
            let dev = match (got.amplitudes(), ideal.amplitudes()) {
                (Some(a), Some(b)) => a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max),
                _ => got.density_matrix().max_abs_diff(&ideal.density_matrix()),
            };
            *slot = slot.max(dev);
        }
    }
    Ok(out)
}

/// Runs the schedule on every computational input and summarizes the gate.
pub fn extract_gate(config: &DeviceConfig) -> Result<GateReport> {
    let compiled = CompiledProtocol::new(config)?;
    extract_compiled(&compiled)
}

pub fn extract_compiled(compiled: &CompiledProtocol) -> Result<GateReport> {
    let layout = compiled.layout().clone();
    let idx = computational_indices(&layout)?;

    let mut runs = Vec::with_capacity(4);
    for &(e1, e2) in &COMPUTATIONAL {
        runs.push(compiled.run(&SystemState::basis(&layout, &[e1, e2], 0)?)?);
    }

    let mut gate = CMatrix::zeros(4);
    let mut column_leakage = [0.0; 4];
    let mut probe_scores = Vec::with_capacity(6);

    match compiled.mode() {
        Mode::SequentialIdeal | Mode::Concurrent => {
            let finals: Vec<&[C64]> = runs
                .iter()
                .map(|r| r.final_state.amplitudes().expect("closed runs stay pure"))
                .collect();
            for (k, psi) in finals.iter().enumerate() {
                for (r, &i) in idx.iter().enumerate() {
                    gate[(r, k)] = psi[i];
                }
                column_leakage[k] = 1.0 - idx.iter().map(|&i| psi[i].norm_sqr()).sum::<f64>();
                let ideal = ideal_output(&layout, &idx, &unit_coeffs(k));
                probe_scores.push(inner(&ideal, psi).norm_sqr());
            }
            // The closed evolution is linear, so superposition outputs are
            // the same superposition of the basis outputs.
            for coeffs in superposition_probes() {
                let mut out = vec![C64::new(0.0, 0.0); layout.total_dim()];
                for (c, psi) in coeffs.iter().zip(&finals) {
                    for (o, a) in out.iter_mut().zip(psi.iter()) {
                        *o += c * a;
                    }
                }
                let ideal = ideal_output(&layout, &idx, &coeffs);
                probe_scores.push(inner(&ideal, &out).norm_sqr());
            }
        }
        Mode::Lindblad => {
            let rho0 = runs[0].final_state.density_matrix();
            let anchor = rho0[(idx[0], idx[0])].re;
            let scale = if anchor > 0.0 {
                1.0 / libm::sqrt(anchor)
            } else {
                0.0
            };
            for k in 0..4 {
                // |ψ_k⟩⟨ψ_0| via the linear flow of |k⟩⟨00|, phase-fixed so
                // that ⟨00|ψ_0⟩ is real and positive.
                let coherence = if k == 0 {
                    rho0.clone()
                } else {
                    let mut x = CMatrix::outer_basis(layout.total_dim(), idx[k], idx[0]);
                    compiled.evolve_operator(&mut x)?;
                    x
                };
                for (r, &i) in idx.iter().enumerate() {
                    gate[(r, k)] = coherence[(i, idx[0])] * scale;
                }
                let fs = &runs[k].final_state;
                column_leakage[k] = 1.0 - idx.iter().map(|&i| fs.population(i)).sum::<f64>();
                let ideal = ideal_output(&layout, &idx, &unit_coeffs(k));
                probe_scores.push(fs.fidelity_with_pure(&ideal));
            }
            for coeffs in superposition_probes() {
                let input = SystemState::pure(&layout, column_state(&layout, &idx, &coeffs))?;
                let out = compiled.run(&input)?;
                let ideal = ideal_output(&layout, &idx, &coeffs);
                probe_scores.push(out.final_state.fidelity_with_pure(&ideal));
            }
        }
    }

    let avg_leakage = column_leakage.iter().sum::<f64>() / 4.0;
    let probe_fidelity = probe_scores.iter().sum::<f64>() / probe_scores.len() as f64;
    Ok(GateReport {
        mode: compiled.mode(),
        process_fidelity: process_fidelity(&gate, &cp_target()),
        gate_matrix: gate,
        probe_fidelity,
        column_leakage,
        avg_leakage,
        total_time: compiled.total_time(),
        checkpoint_fidelities: checkpoint_fidelities(&layout, &runs)?,
        checkpoint_deviations: checkpoint_deviations(&layout, &runs)?,
        segments: compiled.segments().to_vec(),
    })
}

/// Parameter swept by [`sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Ω = value · max(g₁, g₂); per-segment overrides keep their ratio to Ω.
    OmegaOverG,
    /// Cavity quality factor.
    Q,
    /// Global multiplier of every collapse rate.
    GammaScale,
    /// `a` in g₁ = ḡ(1 + a), g₂ = ḡ(1 − a) with ḡ the template mean.
    GAsymmetry,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::OmegaOverG => "omega_over_g",
            SweepAxis::Q => "Q",
            SweepAxis::GammaScale => "gamma_scale",
            SweepAxis::GAsymmetry => "g_asymmetry",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega_over_g" => Ok(SweepAxis::OmegaOverG),
            "Q" => Ok(SweepAxis::Q),
            "gamma_scale" => Ok(SweepAxis::GammaScale),
            "g_asymmetry" => Ok(SweepAxis::GAsymmetry),
            other => Err(Error::config(format!(
                "unknown sweep axis {other:?} (expected omega_over_g, Q, gamma_scale or g_asymmetry)"
            ))),
        }
    }
}

/// The template with `axis` set to `value`.
pub fn apply_axis(template: &DeviceConfig, axis: SweepAxis, value: f64) -> Result<DeviceConfig> {
    let mut c = template.clone();
    match axis {
        SweepAxis::OmegaOverG => {
            require_positive("omega_over_g", value)?;
            let omega = value * c.qubits[0].g.max(c.qubits[1].g);
            let ratio = omega / c.rabi;
            for v in c.rabi_overrides.values_mut() {
                *v *= ratio;
            }
            c.rabi = omega;
        }
        SweepAxis::Q => {
            require_positive("Q", value)?;
            c.cavity.quality = value;
        }
        SweepAxis::GammaScale => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::config(format!(
                    "gamma_scale must be >= 0, got {value}"
                )));
            }
            c.decoherence_scale = value;
        }
        SweepAxis::GAsymmetry => {
            if !(value.abs() < 1.0) {
                return Err(Error::config(format!(
                    "g_asymmetry must lie in (-1, 1), got {value}"
                )));
            }
            let mean = 0.5 * (c.qubits[0].g + c.qubits[1].g);
            c.qubits[0].g = mean * (1.0 + value);
            c.qubits[1].g = mean * (1.0 - value);
        }
    }
    c.validate()?;
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    pub fidelity: f64,
    pub leakage: f64,
    /// Seconds.
    pub total_time: f64,
}

pub fn sweep_point(template: &DeviceConfig, axis: SweepAxis, value: f64) -> Result<SweepRow> {
    let report = extract_gate(&apply_axis(template, axis, value)?)?;
    Ok(SweepRow {
        axis_value: value,
        fidelity: report.fidelity(),
        leakage: report.avg_leakage,
        total_time: report.total_time,
    })
}

/// One gate extraction per value, rows in input order.
pub fn sweep(template: &DeviceConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    values
        .iter()
        .map(|&v| sweep_point(template, axis, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cp_target_entries() {
        let u = cp_target();
        assert_eq!(u[(3, 3)], C64::new(-1.0, 0.0));
        assert_eq!(u[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(u.adjoint().matmul(&u), CMatrix::identity(4));
    }

    #[test]
    fn gate_time_examples() {
        let ns = |t: f64| t * 1e9;
        let t = total_gate_time(TWO_PI * 100e6, TWO_PI * 100e6, TWO_PI * 300e6).unwrap();
        assert!((ns(t) - 15.0).abs() < 15.0 * 1e-12);
        let w = 2.7;
        assert!((total_gate_time(w, w, w).unwrap() - 5.0 * PI / w).abs() < 1e-15);
        let t = total_gate_time(TWO_PI * 80e6, TWO_PI * 120e6, TWO_PI * 300e6).unwrap();
        assert!((ns(t) - 15.416_666_666_666_666).abs() < 1e-9);
        assert!(matches!(
            total_gate_time(0.0, 1.0, 1.0),
            Err(Error::Domain { name: "g1", .. })
        ));
        assert!(total_gate_time(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn photon_lifetime_examples() {
        let t = cavity_photon_lifetime(1e4, 3e9).unwrap();
        assert!((t * 1e9 - 530.516_476_972_984_5).abs() < 1e-9);
        let t6 = cavity_photon_lifetime(1e6, 3e9).unwrap();
        assert!((t6 * 1e6 - 53.051_647_697_298_45).abs() < 1e-9);
        let t2 = cavity_photon_lifetime(1e4, 6e9).unwrap();
        assert!((t2 * 2.0 - t).abs() < 1e-22);
        assert!(cavity_photon_lifetime(-1.0, 3e9).is_err());
        assert!(cavity_photon_lifetime(1e4, 0.0).is_err());
    }

    #[test]
    fn fidelity_is_phase_invariant_and_bounded() {
        let mut m = CMatrix::from_fn(4, |r, c| {
            C64::new((r * 4 + c) as f64 * 0.1, (r as f64) - 0.3 * c as f64)
        });
        m[(0, 0)] += C64::new(1.0, 0.0);
        let f = process_fidelity(&m, &cp_target());
        for theta in [PI / 7.0, 1.0] {
            let g = process_fidelity(&m.scale(C64::from_polar(1.0, theta)), &cp_target());
            assert!((f - g).abs() < 1e-14);
        }
        assert!((0.0..=1.0 + 1e-12).contains(&f));
        assert_eq!(process_fidelity(&CMatrix::zeros(4), &cp_target()), 0.0);
        assert!((process_fidelity(&cp_target(), &cp_target()) - 1.0).abs() < 1e-15);
        assert!(process_fidelity(&CMatrix::identity(4), &cp_target()) < 0.26);
    }

    #[test]
    fn sequential_ideal_gate_is_exact() {
        let r = extract_gate(&DeviceConfig::paper_regime()).unwrap();
        assert!(r.max_deviation_from_target() < 1e-10);
        assert!(r.avg_leakage < 1e-10);
        assert!(r.process_fidelity > 1.0 - 1e-10);
        assert!(r.probe_fidelity > 1.0 - 1e-10);
        let mm = r.gate_matrix.adjoint().matmul(&r.gate_matrix);
        assert!(mm.max_abs_diff(&CMatrix::identity(4)) < 1e-9);
        for f in r.checkpoint_fidelities {
            assert!((f - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sequential_ideal_independent_of_coupling_asymmetry() {
        for (g1, g2) in [(80e6, 120e6), (120e6, 80e6), (37e6, 211e6)] {
            let mut c = DeviceConfig::paper_regime();
            c.qubits[0].g = TWO_PI * g1;
            c.qubits[1].g = TWO_PI * g2;
            let r = extract_gate(&c).unwrap();
            assert!(r.max_deviation_from_target() < 1e-10, "{g1} {g2}");
            assert!((r.fidelity() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sweep_axis_parsing_and_errors() {
        for a in [
            SweepAxis::OmegaOverG,
            SweepAxis::Q,
            SweepAxis::GammaScale,
            SweepAxis::GAsymmetry,
        ] {
            assert_eq!(a.as_str().parse::<SweepAxis>().unwrap(), a);
        }
        assert!(matches!(
            "omega".parse::<SweepAxis>(),
            Err(Error::Configuration(_))
        ));
        let c = DeviceConfig::paper_regime();
        assert!(sweep(&c, SweepAxis::Q, &[]).is_err());
        assert!(apply_axis(&c, SweepAxis::GAsymmetry, 1.0).is_err());
        let a = apply_axis(&c, SweepAxis::GAsymmetry, 0.2).unwrap();
        assert!((a.qubits[0].g / a.qubits[1].g - 1.5).abs() < 1e-12);
        let o = apply_axis(&c, SweepAxis::OmegaOverG, 10.0).unwrap();
        assert!((o.rabi / o.qubits[0].g - 10.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_preserves_input_order() {
        let c = DeviceConfig::paper_regime();
        let rows = sweep(&c, SweepAxis::GAsymmetry, &[0.3, -0.1, 0.0]).unwrap();
        let got: Vec<f64> = rows.iter().map(|r| r.axis_value).collect();
        assert_eq!(got, [0.3, -0.1, 0.0]);
        for r in rows {
            assert!((r.fidelity - 1.0).abs() < 1e-10);
        }
    }
}
