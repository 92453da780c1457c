//! Composite Hilbert space `qudit 1 ⊗ qudit 2 ⊗ cavity`.
//!
//! Flattening is row-major in the order (qudit 1, qudit 2, ..., cavity) with
//! the cavity photon number varying fastest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{vec_norm, CMatrix, HermitianEigen, C64};

/// Level count of every qudit in the gate protocol.
pub const QUDIT_LEVELS: usize = 4;

/// Default cavity Fock truncation (one above the single exchanged photon).
pub const DEFAULT_N_MAX: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertLayout {
    qudit_dims: Vec<usize>,
    n_max: usize,
}

impl HilbertLayout {
    pub fn new(qudit_dims: Vec<usize>, n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::config("cavity truncation n_max must be at least 1"));
        }
        if qudit_dims.is_empty() || qudit_dims.iter().any(|&d| d < 2) {
            return Err(Error::config("every qudit needs at least two levels"));
        }
        Ok(Self { qudit_dims, n_max })
    }

    /// Two four-level qudits and a cavity truncated at `n_max` photons.
    pub fn two_qudits(n_max: usize) -> Result<Self> {
        Self::new(vec![QUDIT_LEVELS, QUDIT_LEVELS], n_max)
    }

    pub fn qudit_dims(&self) -> &[usize] {
        &self.qudit_dims
    }

    pub fn qudit_count(&self) -> usize {
        self.qudit_dims.len()
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn cavity_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn total_dim(&self) -> usize {
        self.qudit_dims.iter().product::<usize>() * self.cavity_dim()
    }

    pub fn flatten(&self, levels: &[usize], photons: usize) -> Result<usize> {
        if levels.len() != self.qudit_dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.qudit_dims.len(),
                found: levels.len(),
            });
        }
        let mut index = 0;
        for (&l, &d) in levels.iter().zip(&self.qudit_dims) {
            if l >= d {
                return Err(Error::InvalidIndex {
                    what: "level",
                    value: l,
                    max: d - 1,
                });
            }
            index = index * d + l;
        }
        if photons > self.n_max {
            return Err(Error::InvalidIndex {
                what: "photon number",
                value: photons,
                max: self.n_max,
            });
        }
        Ok(index * self.cavity_dim() + photons)
    }

    /// Inverse of [`flatten`](Self::flatten): `(levels, photons)`.
    pub fn unflatten(&self, index: usize) -> Result<(Vec<usize>, usize)> {
        if index >= self.total_dim() {
            return Err(Error::InvalidIndex {
                what: "flat index",
                value: index,
                max: self.total_dim() - 1,
            });
        }
        let photons = index % self.cavity_dim();
        let mut rest = index / self.cavity_dim();
        let mut levels = vec![0; self.qudit_dims.len()];
        for (slot, &d) in levels.iter_mut().zip(&self.qudit_dims).rev() {
            *slot = rest % d;
            rest /= d;
        }
        Ok((levels, photons))
    }

    /// Photon number of a flat index.
    #[inline]
    pub fn photons_of(&self, index: usize) -> usize {
        index % self.cavity_dim()
    }

    /// Level of qudit `factor` at a flat index.
    pub fn level_of(&self, index: usize, factor: usize) -> usize {
        let mut rest = index / self.cavity_dim();
        for &d in self.qudit_dims[factor + 1..].iter() {
            rest /= d;
        }
        rest % self.qudit_dims[factor]
    }

    /// `I ⊗ … ⊗ local ⊗ … ⊗ I ⊗ I_cavity` with `local` on qudit `factor`
    /// (zero-based).
    pub fn embed_qudit_operator(&self, factor: usize, local: &CMatrix) -> Result<Operator> {
        let Some(&d) = self.qudit_dims.get(factor) else {
            return Err(Error::InvalidIndex {
                what: "qudit factor",
                value: factor,
                max: self.qudit_dims.len() - 1,
            });
        };
        if local.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: local.dim(),
            });
        }
        let mut full = CMatrix::identity(1);
        for (k, &dk) in self.qudit_dims.iter().enumerate() {
            let piece = if k == factor {
                local.clone()
            } else {
                CMatrix::identity(dk)
            };
            full = full.kron(&piece);
        }
        full = full.kron(&CMatrix::identity(self.cavity_dim()));
        let hermitian = local.hermiticity_error() == 0.0;
        Ok(Operator::new(full, hermitian))
    }

    /// Cavity annihilation operator `a` (identity on every qudit).
    pub fn cavity_annihilation(&self) -> Operator {
        let nc = self.cavity_dim();
        let mut a = CMatrix::zeros(nc);
        for n in 1..nc {
            a[(n - 1, n)] = C64::new(libm::sqrt(n as f64), 0.0);
        }
        let qudits = CMatrix::identity(self.qudit_dims.iter().product());
        Operator::new(qudits.kron(&a), false)
    }

    /// Projector onto the cavity vacuum sector.
    pub fn vacuum_projector(&self) -> CMatrix {
        let n = self.total_dim();
        CMatrix::from_fn(n, |r, c| {
            if r == c && self.photons_of(r) == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

/// Matrix over the full composite space plus a Hermiticity hint.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    hermitian: bool,
}

/// Tolerance behind the Hermitian flag of an [`Operator`].
pub const HERMITIAN_TOL: f64 = 1e-13;

impl Operator {
    pub fn new(matrix: CMatrix, hermitian: bool) -> Self {
        debug_assert!(!hermitian || matrix.hermiticity_error() < HERMITIAN_TOL);
        Self { matrix, hermitian }
    }

    /// Wraps a matrix and sets the flag from a numerical check.
    pub fn detect(matrix: CMatrix) -> Self {
        let hermitian = matrix.hermiticity_error() < HERMITIAN_TOL;
        Self { matrix, hermitian }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn apply(&self, state: &SystemState) -> Result<SystemState> {
        state.check_dim(self.dim())?;
        let repr = match &state.repr {
            StateRepr::Pure(v) => StateRepr::Pure(self.matrix.apply(v)),
            StateRepr::Mixed(rho) => {
                StateRepr::Mixed(self.matrix.matmul(rho).matmul(&self.matrix.adjoint()))
            }
        };
        Ok(SystemState {
            layout: state.layout.clone(),
            repr,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateRepr {
    Pure(Vec<C64>),
    Mixed(CMatrix),
}

/// Pure state vector or density matrix over a [`HilbertLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    layout: HilbertLayout,
    repr: StateRepr,
}

pub const PURE_NORM_TOL: f64 = 1e-12;
pub const MIXED_HERMITIAN_TOL: f64 = 1e-12;
pub const MIXED_TRACE_TOL: f64 = 1e-10;
pub const MIXED_POSITIVITY_TOL: f64 = 1e-10;

impl SystemState {
    pub fn basis(layout: &HilbertLayout, levels: &[usize], photons: usize) -> Result<Self> {
        let idx = layout.flatten(levels, photons)?;
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self {
            layout: layout.clone(),
            repr: StateRepr::Pure(amps),
        })
    }

    /// Normalized pure state; rejects vectors that are not unit-norm.
    pub fn pure(layout: &HilbertLayout, amplitudes: Vec<C64>) -> Result<Self> {
        let s = Self::pure_unchecked(layout, amplitudes)?;
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn pure_unchecked(layout: &HilbertLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            layout: layout.clone(),
            repr: StateRepr::Pure(amplitudes),
        })
    }

    pub fn mixed(layout: &HilbertLayout, rho: CMatrix) -> Result<Self> {
        let s = Self::mixed_unchecked(layout, rho)?;
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn mixed_unchecked(layout: &HilbertLayout, rho: CMatrix) -> Result<Self> {
        if rho.dim() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: rho.dim(),
            });
        }
        Ok(Self {
            layout: layout.clone(),
            repr: StateRepr::Mixed(rho),
        })
    }

    /// Unit-norm superposition `Σ c_k |levels_k, photons_k⟩ / ‖c‖`.
    pub fn superposition(layout: &HilbertLayout, terms: &[(C64, &[usize], usize)]) -> Result<Self> {
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        for (c, levels, n) in terms {
            amps[layout.flatten(levels, *n)?] += *c;
        }
        let norm = vec_norm(&amps);
        if norm == 0.0 {
            return Err(Error::state("superposition has zero norm"));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Self::pure(layout, amps)
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&[C64]> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    pub fn density(&self) -> Option<&CMatrix> {
        match &self.repr {
            StateRepr::Pure(_) => None,
            StateRepr::Mixed(rho) => Some(rho),
        }
    }

    /// Promotes a pure state to `|ψ⟩⟨ψ|`; mixed states are returned as-is.
    pub fn to_density(&self) -> SystemState {
        match &self.repr {
            StateRepr::Pure(v) => SystemState {
                layout: self.layout.clone(),
                repr: StateRepr::Mixed(CMatrix::outer(v, v)),
            },
            StateRepr::Mixed(_) => self.clone(),
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.repr {
            StateRepr::Pure(v) => CMatrix::outer(v, v),
            StateRepr::Mixed(rho) => rho.clone(),
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.layout.total_dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: dim,
                found: self.layout.total_dim(),
            })
        }
    }

    /// Norm of a pure state or trace of a density matrix.
    pub fn norm(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(v) => vec_norm(v),
            StateRepr::Mixed(rho) => rho.trace().re,
        }
    }

    /// Population of the basis vector at `index`.
    pub fn population(&self, index: usize) -> f64 {
        match &self.repr {
            StateRepr::Pure(v) => v[index].norm_sqr(),
            StateRepr::Mixed(rho) => rho[(index, index)].re,
        }
    }

    /// Population with exactly `photons` cavity photons.
    pub fn photon_sector_population(&self, photons: usize) -> f64 {
        (0..self.layout.total_dim())
            .filter(|&i| self.layout.photons_of(i) == photons)
            .map(|i| self.population(i))
            .sum()
    }

    /// Population with at least one cavity photon.
    pub fn excited_cavity_population(&self) -> f64 {
        (0..self.layout.total_dim())
            .filter(|&i| self.layout.photons_of(i) > 0)
            .map(|i| self.population(i))
            .sum()
    }

    /// `⟨n⟩` of the cavity.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.layout.total_dim())
            .map(|i| self.layout.photons_of(i) as f64 * self.population(i))
            .sum()
    }

    /// Fidelity against a pure reference: `|⟨φ|ψ⟩|²` or `⟨φ|ρ|φ⟩`.
    pub fn fidelity_with_pure(&self, reference: &[C64]) -> f64 {
        match &self.repr {
            StateRepr::Pure(v) => crate::linalg::inner(reference, v).norm_sqr(),
            StateRepr::Mixed(rho) => crate::linalg::inner(reference, &rho.apply(reference)).re,
        }
    }

    /// Reduced density matrix of qudit `factor`.
    pub fn reduced_qudit(&self, factor: usize) -> Result<CMatrix> {
        let d = *self
            .layout
            .qudit_dims
            .get(factor)
            .ok_or(Error::InvalidIndex {
                what: "qudit factor",
                value: factor,
                max: self.layout.qudit_dims.len() - 1,
            })?;
        let n = self.layout.total_dim();
        let rho = self.density_matrix();
        let mut out = CMatrix::zeros(d);
        // Pairs (r, c) that agree on every factor except `factor`.
        for r in 0..n {
            let lr = self.layout.level_of(r, factor);
            for lc in 0..d {
                let c = replace_level(&self.layout, r, factor, lc);
                out[(lr, lc)] += rho[(r, c)];
            }
        }
        Ok(out)
    }

    /// Checks the numerical invariants of the representation.
    pub fn validate(&self) -> Result<()> {
        match &self.repr {
            StateRepr::Pure(v) => {
                let norm = vec_norm(v);
                if (norm - 1.0).abs() > PURE_NORM_TOL {
                    return Err(Error::state(format!("state norm {norm} differs from 1")));
                }
            }
            StateRepr::Mixed(rho) => {
                let herm = rho.hermiticity_error();
                if herm > MIXED_HERMITIAN_TOL {
                    return Err(Error::state(format!(
                        "density matrix not Hermitian (deviation {herm:e})"
                    )));
                }
                let tr = rho.trace().re;
                if (tr - 1.0).abs() > MIXED_TRACE_TOL {
                    return Err(Error::state(format!(
                        "density matrix trace {tr} differs from 1"
                    )));
                }
                let min = HermitianEigen::new(rho)
                    .values
                    .first()
                    .copied()
                    .unwrap_or(0.0);
                if min < -MIXED_POSITIVITY_TOL {
                    return Err(Error::state(format!(
                        "density matrix has negative eigenvalue {min:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn replace_level(layout: &HilbertLayout, index: usize, factor: usize, level: usize) -> usize {
    let stride: usize =
        layout.qudit_dims[factor + 1..].iter().product::<usize>() * layout.cavity_dim();
    let old = layout.level_of(index, factor);
    index - old * stride + level * stride
}

/// `|row⟩⟨col|` on a single four-level qudit.
pub fn qudit_transition(row: usize, col: usize) -> Result<CMatrix> {
    for l in [row, col] {
        if l >= QUDIT_LEVELS {
            return Err(Error::InvalidIndex {
                what: "level",
                value: l,
                max: QUDIT_LEVELS - 1,
            });
        }
    }
    Ok(CMatrix::outer_basis(QUDIT_LEVELS, row, col))
}
