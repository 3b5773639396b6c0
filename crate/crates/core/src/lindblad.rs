//! Lindblad master equation on vectorized density matrices.
//!
//! A [`GeneratorSpec`] (Hamiltonian plus jump operators) is turned into the
//! Liouvillian acting on column-stacked states,
//!
//! ```text
//! 𝓛 = i(H̄⊗I − I⊗H) + Σ_k [ L̄_k⊗L_k − ½ I⊗(L_k†L_k) − ½ (L̄_k†L̄_k)⊗I ]
//! ```
//!
//! and exponentiated into a [`SuperPropagator`]. [`ode_oracle`] integrates the
//! same equation at the matrix level with RK4 and is only meant for tests.

use crate::error::{QsnnError, Result};
use crate::linalg::{kron, matexp, unvec, vec, ComplexMatrix, C64, I, ONE};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

/// Hamiltonian and Lindblad operators of a time-independent generator.
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    hamiltonian: ComplexMatrix,
    lindblads: Vec<ComplexMatrix>,
}

impl GeneratorSpec {
    pub fn new(hamiltonian: ComplexMatrix, lindblads: Vec<ComplexMatrix>) -> Result<Self> {
        let d = hamiltonian.ensure_square()?;
        let deviation = hamiltonian.hermiticity_error();
        if deviation > HERMITIAN_TOL {
            return Err(QsnnError::NotHermitian { deviation });
        }
        for (k, l) in lindblads.iter().enumerate() {
            if l.rows() != d || l.cols() != d {
                return Err(QsnnError::DimensionMismatch(format!(
                    "lindblad operator {k} is {}x{}, expected {d}x{d}",
                    l.rows(),
                    l.cols()
                )));
            }
        }
        Ok(GeneratorSpec {
            hamiltonian,
            lindblads,
        })
    }

    pub fn dissipative(dim: usize, lindblads: Vec<ComplexMatrix>) -> Result<Self> {
        Self::new(ComplexMatrix::zeros(dim, dim), lindblads)
    }

    pub fn coherent(hamiltonian: ComplexMatrix) -> Result<Self> {
        Self::new(hamiltonian, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn lindblads(&self) -> &[ComplexMatrix] {
        &self.lindblads
    }

    /// `e^{𝓛t}`. Hamiltonian-only generators take the exact shortcut
    /// `e^{𝓛t} = Ū ⊗ U` with `U = e^{−iHt}`, which needs a d×d exponential
    /// instead of a d²×d² one.
    pub fn propagator(&self, t: f64) -> Result<SuperPropagator> {
        check_duration(t)?;
        if self.lindblads.is_empty() {
            let u = unitary(&self.hamiltonian, t)?;
            return Ok(SuperPropagator {
                dim: self.dim(),
                matrix: kron(&u.conj(), &u),
            });
        }
        build_liouvillian(self).propagator(t)
    }

    /// Right-hand side `−i[H,ρ] + Σ_k (L_kρL_k† − ½{L_k†L_k, ρ})`.
    pub fn rhs(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let h = &self.hamiltonian;
        let commutator = &(h * rho) - &(rho * h);
        let mut out = commutator.scale(-I);
        for l in &self.lindblads {
            let ldag = l.adjoint();
            let ldl = &ldag * l;
            let jump = &(l * rho) * &ldag;
            let anti = &(&ldl * rho) + &(rho * &ldl);
            out = &(&out + &jump) - &anti.scale_real(0.5);
        }
        out
    }
}

/// `U = e^{−iHt}`.
pub fn unitary(hamiltonian: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    check_duration(t)?;
    matexp(&hamiltonian.scale(C64::new(0.0, -t)))
}

fn check_duration(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(QsnnError::InvalidDuration(t))
    }
}

/// `i(H̄⊗I − I⊗H)`: the coherent part of the Liouvillian.
pub fn hamiltonian_superoperator(h: &ComplexMatrix) -> ComplexMatrix {
    let id = ComplexMatrix::identity(h.rows());
    (&kron(&h.conj(), &id) - &kron(&id, h)).scale(I)
}

/// `L̄⊗L − ½ I⊗(L†L) − ½ (L̄†L̄)⊗I`: the dissipator of one jump operator.
pub fn dissipator_superoperator(l: &ComplexMatrix) -> ComplexMatrix {
    let id = ComplexMatrix::identity(l.rows());
    let lbar = l.conj();
    let jump = kron(&lbar, l);
    let left = kron(&id, &(&l.adjoint() * l));
    let right = kron(&(&lbar.adjoint() * &lbar), &id);
    &jump - &(&left + &right).scale_real(0.5)
}

/// Generator of the vectorized dynamics `d|ρ⟩/dt = 𝓛|ρ⟩`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    matrix: ComplexMatrix,
}

pub fn build_liouvillian(spec: &GeneratorSpec) -> Liouvillian {
    let mut matrix = hamiltonian_superoperator(&spec.hamiltonian);
    for l in &spec.lindblads {
        matrix = &matrix + &dissipator_superoperator(l);
    }
    Liouvillian {
        dim: spec.dim(),
        matrix,
    }
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Largest entry of `vec(I)†𝓛`; zero for a trace-preserving generator.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim;
        (0..d * d)
            .map(|col| (0..d).map(|i| self.matrix.get(i * d + i, col)).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }

    pub fn propagator(&self, t: f64) -> Result<SuperPropagator> {
        propagator(self, t)
    }
}

/// `e^{𝓛t}` as a d²×d² matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperPropagator {
    dim: usize,
    matrix: ComplexMatrix,
}

pub fn propagator(l: &Liouvillian, t: f64) -> Result<SuperPropagator> {
    check_duration(t)?;
    Ok(SuperPropagator {
        dim: l.dim,
        matrix: matexp(&l.matrix.scale_real(t))?,
    })
}

impl SuperPropagator {
    pub fn identity(dim: usize) -> Self {
        SuperPropagator {
            dim,
            matrix: ComplexMatrix::identity(dim * dim),
        }
    }

    pub fn from_matrix(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(QsnnError::DimensionMismatch(format!(
                "superoperator is {}x{}, expected {n}x{n}",
                matrix.rows(),
                matrix.cols(),
                n = dim * dim
            )));
        }
        Ok(SuperPropagator { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &SuperPropagator) -> Result<SuperPropagator> {
        if self.dim != first.dim {
            return Err(QsnnError::DimensionMismatch(format!(
                "cannot compose propagators of dimension {} and {}",
                self.dim, first.dim
            )));
        }
        Ok(SuperPropagator {
            dim: self.dim,
            matrix: &self.matrix * &first.matrix,
        })
    }
}

/// Applies a propagator to a state: `unvec(p · vec(ρ))`.
pub fn evolve(rho: &DensityMatrix, p: &SuperPropagator) -> Result<DensityMatrix> {
    if rho.dim() != p.dim {
        return Err(QsnnError::DimensionMismatch(format!(
            "state of dimension {} under a propagator of dimension {}",
            rho.dim(),
            p.dim
        )));
    }
    let out = &p.matrix * &vec(&rho.matrix)?;
    DensityMatrix::new(unvec(&out, p.dim)?)
}

/// Hermitian, unit-trace, positive semidefinite d×d matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e−10), trace (1 ± 1e−10) and the eigenvalue
    /// floor (−1e−9).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        matrix.ensure_square()?;
        let herm = matrix.hermiticity_error();
        if herm > STATE_HERMITIAN_TOL {
            return Err(QsnnError::InvalidState(format!(
                "hermiticity error {herm:e}"
            )));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > STATE_TRACE_TOL {
            return Err(QsnnError::InvalidState(format!("trace {tr}")));
        }
        let min_ev = matrix.hermitian_eigenvalues()?[0];
        if min_ev < EIGENVALUE_FLOOR {
            return Err(QsnnError::InvalidState(format!(
                "minimum eigenvalue {min_ev:e}"
            )));
        }
        Ok(DensityMatrix { matrix })
    }

    /// `|i⟩⟨i|`.
    pub fn basis(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(QsnnError::InvalidState(format!(
                "basis index {i} outside dimension {dim}"
            )));
        }
        Ok(DensityMatrix {
            matrix: ComplexMatrix::outer_basis(dim, i, i),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn population(&self, i: usize) -> f64 {
        self.matrix.get(i, i).re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.population(i)).collect()
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

/// Classic fixed-step RK4 on `dρ/dt` at the matrix level.
///
/// Requires the step size to be at most `1e−2 / ‖𝓛‖₁`.
pub fn ode_oracle(
    spec: &GeneratorSpec,
    rho0: &DensityMatrix,
    t: f64,
    steps: usize,
) -> Result<DensityMatrix> {
    check_duration(t)?;
    if steps == 0 {
        return Err(QsnnError::InvalidConfig("ode_oracle needs at least one step".into()));
    }
    if rho0.dim() != spec.dim() {
        return Err(QsnnError::DimensionMismatch(format!(
            "state of dimension {} for a generator of dimension {}",
            rho0.dim(),
            spec.dim()
        )));
    }
    let h = t / steps as f64;
    let norm = build_liouvillian(spec).matrix.norm_one();
    if h * norm > 1e-2 {
        return Err(QsnnError::InvalidConfig(format!(
            "step {h:e} too large for generator norm {norm:e}"
        )));
    }
    let mut rho = rho0.matrix.clone();
    for _ in 0..steps {
        let k1 = spec.rhs(&rho);
        let k2 = spec.rhs(&(&rho + &k1.scale_real(h / 2.0)));
        let k3 = spec.rhs(&(&rho + &k2.scale_real(h / 2.0)));
        let k4 = spec.rhs(&(&rho + &k3.scale_real(h)));
        let incr = &(&k1 + &k4) + &(&k2 + &k3).scale_real(2.0);
        rho = &rho + &incr.scale_real(h / 6.0);
    }
    DensityMatrix::new(rho)
}


#[cfg(test)]
mod tests {
    use super::test_util::*;
    use super::*;
    use crate::linalg::test_util::rng;
    use crate::linalg::ZERO;
    use proptest::prelude::*;

    fn amplitude_damping(gamma: f64) -> GeneratorSpec {
        let l = ComplexMatrix::outer_basis(2, 1, 0).scale_real(gamma);
        GeneratorSpec::dissipative(2, vec![l]).unwrap()
    }

    fn rabi(h: f64) -> GeneratorSpec {
        let x = &ComplexMatrix::outer_basis(2, 0, 1) + &ComplexMatrix::outer_basis(2, 1, 0);
        GeneratorSpec::coherent(x.scale_real(h)).unwrap()
    }

    #[test]
    fn empty_generator_is_zero() {
        let spec = GeneratorSpec::dissipative(3, vec![]).unwrap();
        assert!(build_liouvillian(&spec).matrix().is_all_zero());
    }

    #[test]
    fn rejects_non_hermitian_hamiltonian() {
        let h = ComplexMatrix::outer_basis(2, 0, 1);
        assert!(matches!(
            GeneratorSpec::coherent(h),
            Err(QsnnError::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_mismatched_lindblad() {
        let h = ComplexMatrix::zeros(2, 2);
        assert!(GeneratorSpec::new(h, vec![ComplexMatrix::zeros(3, 3)]).is_err());
    }

    #[test]
    fn amplitude_damping_closed_form() {
        let gamma = 0.8;
        let rho0 = DensityMatrix::basis(2, 0).unwrap();
        let l = build_liouvillian(&amplitude_damping(gamma));
        for &t in &[0.3, 1.0, 2.5] {
            let rho = evolve(&rho0, &l.propagator(t).unwrap()).unwrap();
            let decay = (-gamma * gamma * t).exp();
            assert!((rho.population(0) - decay).abs() < 1e-12);
            assert!((rho.population(1) - (1.0 - decay)).abs() < 1e-12);
            let rk = ode_oracle(&amplitude_damping(gamma), &rho0, t, 10_000).unwrap();
            assert!((rk.population(0) - decay).abs() < 1e-8);
        }
    }

    #[test]
    fn rabi_closed_form_via_both_routes() {
        let h = 0.7;
        let spec = rabi(h);
        let rho0 = DensityMatrix::basis(2, 0).unwrap();
        for &t in &[0.4, 1.3, 3.0] {
            let fast = evolve(&rho0, &spec.propagator(t).unwrap()).unwrap();
            let dense = evolve(&rho0, &build_liouvillian(&spec).propagator(t).unwrap()).unwrap();
            let want = (h * t).sin().powi(2);
            assert!((fast.population(1) - want).abs() < 1e-12);
            assert!((dense.population(1) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn unitary_shortcut_matches_dense_exponential() {
        let mut r = rng(11);
        let raw = crate::linalg::test_util::random_matrix(&mut r, 4, 4, 1.0);
        let h = (&raw + &raw.adjoint()).scale_real(0.5);
        let spec = GeneratorSpec::coherent(h).unwrap();
        let fast = spec.propagator(1.7).unwrap();
        let dense = build_liouvillian(&spec).propagator(1.7).unwrap();
        assert!(fast.matrix().max_abs_diff(dense.matrix()) < 1e-12);
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = build_liouvillian(&amplitude_damping(1.0)).propagator(0.0).unwrap();
        assert_eq!(p, SuperPropagator::identity(2));
    }

    #[test]
    fn negative_duration_rejected() {
        let l = build_liouvillian(&amplitude_damping(1.0));
        assert!(matches!(l.propagator(-0.1), Err(QsnnError::InvalidDuration(_))));
    }

    #[test]
    fn half_life_at_ln_two() {
        let l = build_liouvillian(&amplitude_damping(1.0));
        let rho = evolve(&DensityMatrix::basis(2, 0).unwrap(), &l.propagator(2f64.ln()).unwrap()).unwrap();
        assert!((rho.population(0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn random_propagator_matches_rk4() {
        let mut r = rng(12);
        let spec = random_spec(&mut r, 4, 3.0);
        let rho0 = random_state(&mut r, 4);
        let exact = evolve(&rho0, &spec.propagator(1.0).unwrap()).unwrap();
        let rk = ode_oracle(&spec, &rho0, 1.0, 2_000).unwrap();
        assert!(exact.matrix().max_abs_diff(rk.matrix()) < 1e-8);
    }

    #[test]
    fn composition_rule() {
        let mut r = rng(13);
        let l = build_liouvillian(&random_spec(&mut r, 3, 2.0));
        let p1 = l.propagator(0.4).unwrap();
        let p2 = l.propagator(1.1).unwrap();
        let p12 = l.propagator(1.5).unwrap();
        assert!(p2.after(&p1).unwrap().matrix().max_abs_diff(p12.matrix()) < 1e-10);
    }

    #[test]
    fn identity_propagator_leaves_state_unchanged() {
        let mut r = rng(14);
        let rho = random_state(&mut r, 3);
        assert_eq!(evolve(&rho, &SuperPropagator::identity(3)).unwrap(), rho);
    }

    #[test]
    fn long_damping_empties_the_excited_level() {
        let l = build_liouvillian(&amplitude_damping(1.0));
        let rho = evolve(&DensityMatrix::basis(2, 0).unwrap(), &l.propagator(40.0).unwrap()).unwrap();
        assert!((rho.population(1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn evolve_rejects_dimension_mismatch() {
        let rho = DensityMatrix::basis(3, 0).unwrap();
        assert!(evolve(&rho, &SuperPropagator::identity(2)).is_err());
    }

    #[test]
    fn ode_oracle_zero_generator_and_zero_steps() {
        let spec = GeneratorSpec::dissipative(2, vec![]).unwrap();
        let mut r = rng(15);
        let rho = random_state(&mut r, 2);
        assert_eq!(ode_oracle(&spec, &rho, 2.0, 10).unwrap(), rho);
        assert!(ode_oracle(&spec, &rho, 2.0, 0).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let not_unit = ComplexMatrix::identity(2);
        assert!(DensityMatrix::new(not_unit).is_err());
        let negative = ComplexMatrix::from_rows(&[
            vec![C64::new(1.5, 0.0), ZERO],
            vec![ZERO, C64::new(-0.5, 0.0)],
        ])
        .unwrap();
        assert!(DensityMatrix::new(negative).is_err());
    }

    #[test]
    fn dissipative_generator_keeps_diagonal_states_diagonal() {
        let d = 4;
        let ls = vec![
            ComplexMatrix::outer_basis(d, 2, 0).scale_real(0.9),
            ComplexMatrix::outer_basis(d, 3, 1).scale_real(-0.4),
            ComplexMatrix::outer_basis(d, 3, 0).scale_real(0.6),
        ];
        let spec = GeneratorSpec::dissipative(d, ls).unwrap();
        let rho0 = DensityMatrix::new(ComplexMatrix::from_fn(d, d, |(i, j)| {
            if i == j { C64::new([0.4, 0.3, 0.2, 0.1][i], 0.0) } else { ZERO }
        }).unwrap()).unwrap();
        let rho = evolve(&rho0, &spec.propagator(2.0).unwrap()).unwrap();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    assert!(rho.matrix().get(i, j).norm() <= 1e-12);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn liouvillian_preserves_trace(seed in any::<u64>(), d in 2usize..7) {
            let mut r = rng(seed);
            let l = build_liouvillian(&random_spec(&mut r, d, 5.0));
            prop_assert!(l.trace_residual() <= 1e-12);
        }

        #[test]
        fn evolution_outputs_are_states(seed in any::<u64>(), d in 2usize..6, t in 0.0f64..5.0) {
            let mut r = rng(seed);
            let spec = random_spec(&mut r, d, 2.0);
            let rho0 = random_state(&mut r, d);
            let rho = evolve(&rho0, &spec.propagator(t).unwrap()).unwrap();
            prop_assert!((rho.trace() - rho0.trace()).norm() <= 1e-10);
        }
    }
}
