//! Independent reference propagator.
//!
//! Builds segment Hamiltonians straight from basis labels, exponentiates each
//! short step with a Taylor series plus scaling and squaring, and composes
//! the steps by repeated matrix-vector products. Nothing here touches the
//! eigensolver, the operator embedding or the matrix type's kernels used by
//! [`dynamics`](crate::dynamics), so agreement between the two is evidence.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{require_positive, Error, Result};
use crate::linalg::C64;
use crate::protocol::{build_cp_schedule, DeviceConfig, Mode, ScheduleSegment};
use crate::statespace::HilbertLayout;

/// Dense row-major square matrix private to the oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct RefMatrix {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl RefMatrix {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    fn product(&self, rhs: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.data[i * n + k] * rhs.data[k * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
        out
    }

    fn times_vector(&self, v: &[C64], out: &mut [C64]) {
        let n = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// Maximum absolute row sum.
    fn norm_inf(&self) -> f64 {
        let n = self.dim;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .map(|z| z.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// `exp(-i H t)` by Taylor series with scaling and squaring.
pub fn expm_taylor(h: &RefMatrix, t: f64) -> RefMatrix {
    let n = h.dim;
    let mut a = RefMatrix {
        dim: n,
        data: h.data.iter().map(|z| z * C64::new(0.0, -t)).collect(),
    };
    let norm = a.norm_inf();
    let mut squarings = 0u32;
    let mut scaled = norm;
    while scaled > 0.25 {
        scaled *= 0.5;
        squarings += 1;
    }
    let factor = libm::pow(2.0, -(squarings as f64));
    for z in &mut a.data {
        *z *= factor;
    }

    let mut sum = RefMatrix::identity(n);
    let mut term = RefMatrix::identity(n);
    for k in 1..=40 {
        term = term.product(&a);
        let inv_k = 1.0 / k as f64;
        for z in &mut term.data {
            *z *= inv_k;
        }
        let mut biggest: f64 = 0.0;
        for (s, z) in sum.data.iter_mut().zip(&term.data) {
            *s += z;
            biggest = biggest.max(z.norm());
        }
        if biggest < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.product(&sum);
    }
    sum
}

/// Applies `Π exp(-i H_k dt_k)` for each `(H_k, duration_k)` with steps no
/// longer than about `dt`: the step count of every segment is rounded to the
/// nearest integer and the step length is then `duration / count`.
pub fn oracle_propagate(sequence: &[(RefMatrix, f64)], dt: f64, state: &[C64]) -> Result<Vec<C64>> {
    require_positive("dt", dt)?;
    let mut psi = state.to_vec();
    let mut scratch = vec![C64::new(0.0, 0.0); psi.len()];
    for (h, duration) in sequence {
        if h.dim != psi.len() {
            return Err(Error::DimensionMismatch {
                expected: psi.len(),
                found: h.dim,
            });
        }
        if !(*duration >= 0.0) {
            return Err(Error::config("segment duration must be >= 0"));
        }
        if *duration == 0.0 {
            continue;
        }
        let steps = libm::round(duration / dt).max(1.0) as usize;
        let step = expm_taylor(h, duration / steps as f64);
        for _ in 0..steps {
            step.times_vector(&psi, &mut scratch);
            core::mem::swap(&mut psi, &mut scratch);
        }
    }
    Ok(psi)
}

/// Segment Hamiltonian assembled element by element from basis labels.
pub fn oracle_hamiltonian(
    config: &DeviceConfig,
    layout: &HilbertLayout,
    segment: &ScheduleSegment,
) -> Result<RefMatrix> {
    let n = layout.total_dim();
    let nc = layout.cavity_dim();
    let index = |l1: usize, l2: usize, p: usize| (l1 * 4 + l2) * nc + p;
    let mut h = RefMatrix::zeros(n);
    let mut add = |r: usize, c: usize, v: C64| {
        h.data[r * n + c] += v;
        h.data[c * n + r] += v.conj();
    };

    for coupling in segment.couplings(config)? {
        let g = C64::new(coupling.g, 0.0);
        // a† |2⟩⟨3|: |3, p⟩ → √(p+1) |2, p+1⟩ on the coupled qubit.
        for other in 0..4 {
            for p in 0..layout.n_max() {
                let amp = g * libm::sqrt((p + 1) as f64);
                let (from, to) = match coupling.qubit.factor() {
                    0 => (index(3, other, p), index(2, other, p + 1)),
                    _ => (index(other, 3, p), index(other, 2, p + 1)),
                };
                add(to, from, amp);
            }
        }
    }
    for d in &segment.drives {
        // Ω e^{iφ} |i⟩⟨j|
        let amp = C64::new(d.rabi * libm::cos(d.phase), d.rabi * libm::sin(d.phase));
        let (i, j) = (d.transition.lower, d.transition.upper);
        for other in 0..4 {
            for p in 0..nc {
                let (row, col) = match d.qubit.factor() {
                    0 => (index(i, other, p), index(j, other, p)),
                    _ => (index(other, i, p), index(other, j, p)),
                };
                add(row, col, amp);
            }
        }
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateFixture {
    /// Computational ⊗ vacuum block, `matrix[row][col]`.
    pub matrix: [[C64; 4]; 4],
    pub fidelity: f64,
    pub dt: f64,
    pub total_time: f64,
}

/// Gate matrix and CP process fidelity of a closed-system configuration.
pub fn oracle_gate_fixture(config: &DeviceConfig, dt: f64) -> Result<GateFixture> {
    if config.mode == Mode::Lindblad {
        return Err(Error::config("the oracle only handles closed-system modes"));
    }
    let layout = config.layout()?;
    let segments = build_cp_schedule(config)?;
    let sequence: Vec<(RefMatrix, f64)> = segments
        .iter()
        .map(|s| Ok((oracle_hamiltonian(config, &layout, s)?, s.duration)))
        .collect::<Result<_>>()?;
    let nc = layout.cavity_dim();
    let comp = [0usize, 1, 4, 5].map(|k| k * nc);

    let mut matrix = [[C64::new(0.0, 0.0); 4]; 4];
    for (col, &start) in comp.iter().enumerate() {
        let mut psi = vec![C64::new(0.0, 0.0); layout.total_dim()];
        psi[start] = C64::new(1.0, 0.0);
        let out = oracle_propagate(&sequence, dt, &psi)?;
        for (row, &i) in comp.iter().enumerate() {
            matrix[row][col] = out[i];
        }
    }

    let target = [1.0, 1.0, 1.0, -1.0];
    let mut overlap = C64::new(0.0, 0.0);
    let mut norm = 0.0;
    for (k, t) in target.iter().enumerate() {
        overlap += matrix[k][k].conj() * *t;
        norm += matrix.iter().map(|row| row[k].norm_sqr()).sum::<f64>();
    }
    let fidelity = if norm > 0.0 {
        overlap.norm_sqr() / (4.0 * norm)
    } else {
        0.0
    };
    Ok(GateFixture {
        matrix,
        fidelity,
        dt,
        total_time: segments.iter().map(|s| s.duration).sum(),
    })
}
