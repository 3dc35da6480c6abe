//! Mixed full-order / reduced-order coupling.
//!
//! A [`HybridSide`] owns either a full finite-element engine (free nodal
//! coordinates) or a projected reduced engine (modal coordinates). Both
//! expose the same flux-recovery interface, so the interface operator
//! S = sum_i G_i M_i^{-1} G_i^T, the multiplier solve, and the stepping loop
//! are literally the code paths of [`crate::coupling`] — a full/full hybrid
//! pair reproduces the dedicated two-sided solver bit for bit, and reduced
//! sides stay in reduced coordinates throughout the integration.
//!
//! Reduced interface operators can lose definiteness under aggressive
//! truncation; the factorization therefore falls back from Cholesky to a
//! pivoted LU when needed and records that it did.

use nalgebra::{DMatrix, DVector};

use crate::assembly::OperatorSet;
use crate::coupling::{
    advance_pair, recover_flux_operator, two_side_rhs, CoupledSide, EmptySide, FemEngine,
    InterfaceFlux,
};
use crate::error::{IvrError, Result};
use crate::integrate::TimeIntegrator;
use crate::linalg::spmv;
use crate::rom::{ReducedBasis, ReducedOperatorSet};

/// Reduced-side engine: projected operators plus the precomputed
/// M~^{-1} G~^T block.
struct RomEngine {
    red: ReducedOperatorSet,
    minv_gt: DMatrix<f64>,
}

impl RomEngine {
    fn new(red: &ReducedOperatorSet) -> Self {
        let minv_gt = red.mass_solve_matrix(&red.coupling.transpose());
        Self {
            red: red.clone(),
            minv_gt,
        }
    }
}

impl CoupledSide for RomEngine {
    fn n_dof(&self) -> usize {
        self.red.n_r()
    }

    fn n_multipliers(&self) -> usize {
        self.red.n_multipliers()
    }

    fn modified_force(&self, phi: &DVector<f64>) -> DVector<f64> {
        self.red.modified_force(phi)
    }

    fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.red.mass_solve(b)
    }

    fn apply_coupling(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.red.coupling * v
    }

    fn flux_injection(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.minv_gt * lambda
    }

    fn schur_term(&self) -> DMatrix<f64> {
        &self.red.coupling * &self.minv_gt
    }
}

enum SideEngine {
    Fem(FemEngine),
    Rom(RomEngine, ReducedBasis),
}

/// One side of a hybrid pair: an engine plus its current state in that
/// engine's own coordinates (free nodal values for a full side, modal
/// coefficients for a reduced side).
pub struct HybridSide {
    engine: SideEngine,
    /// Current coordinates; replaced by the advance functions.
    pub state: DVector<f64>,
}

impl HybridSide {
    /// Full-order side from assembled operators and an initial free-DOF
    /// state.
    pub fn fem(ops: &OperatorSet, phi0: DVector<f64>) -> Result<Self> {
        if phi0.len() != ops.n_free() {
            return Err(IvrError::InvalidArgument(format!(
                "initial state has {} entries, subdomain has {} free DOFs",
                phi0.len(),
                ops.n_free()
            )));
        }
        Ok(Self {
            engine: SideEngine::Fem(FemEngine::new(ops)?),
            state: phi0,
        })
    }

    /// Reduced side from projected operators, the basis they were projected
    /// onto, and an initial modal state.
    pub fn rom(
        red: &ReducedOperatorSet,
        basis: &ReducedBasis,
        phi_r0: DVector<f64>,
    ) -> Result<Self> {
        if red.n_r() != basis.n_r() {
            return Err(IvrError::InvalidArgument(format!(
                "projected operators have {} modes, basis has {}",
                red.n_r(),
                basis.n_r()
            )));
        }
        if phi_r0.len() != red.n_r() {
            return Err(IvrError::InvalidArgument(format!(
                "initial modal state has {} entries, basis has {} modes",
                phi_r0.len(),
                red.n_r()
            )));
        }
        Ok(Self {
            engine: SideEngine::Rom(RomEngine::new(red), basis.clone()),
            state: phi_r0,
        })
    }

    pub fn is_reduced(&self) -> bool {
        matches!(self.engine, SideEngine::Rom(..))
    }

    pub fn n_multipliers(&self) -> usize {
        match &self.engine {
            SideEngine::Fem(e) => CoupledSide::n_multipliers(e),
            SideEngine::Rom(e, _) => CoupledSide::n_multipliers(e),
        }
    }

    /// Lift arbitrary coordinates of this side to a full nodal vector
    /// (free values scattered plus the Dirichlet lift for a full side,
    /// U phi_r + beta for a reduced side). Dirichlet entries carry the
    /// boundary data bitwise in both cases.
    pub fn lift_state(&self, coords: &DVector<f64>) -> DVector<f64> {
        match &self.engine {
            SideEngine::Fem(e) => e.ops.indexing.lift_full(coords, &e.ops.beta),
            SideEngine::Rom(_, basis) => basis.lift(coords),
        }
    }

    /// Lift of the current state.
    pub fn lift(&self) -> DVector<f64> {
        self.lift_state(&self.state)
    }
}

impl CoupledSide for HybridSide {
    fn n_dof(&self) -> usize {
        self.state.len()
    }

    fn n_multipliers(&self) -> usize {
        HybridSide::n_multipliers(self)
    }

    fn modified_force(&self, phi: &DVector<f64>) -> DVector<f64> {
        match &self.engine {
            SideEngine::Fem(e) => e.ops.modified_force(phi),
            SideEngine::Rom(e, _) => e.modified_force(phi),
        }
    }

    fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.engine {
            SideEngine::Fem(e) => e.solver.solve(b),
            SideEngine::Rom(e, _) => e.mass_solve(b),
        }
    }

    fn apply_coupling(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.engine {
            SideEngine::Fem(e) => spmv(&e.ops.coupling, v),
            SideEngine::Rom(e, _) => e.apply_coupling(v),
        }
    }

    fn flux_injection(&self, lambda: &DVector<f64>) -> DVector<f64> {
        match &self.engine {
            SideEngine::Fem(e) => &e.minv_gt * lambda,
            SideEngine::Rom(e, _) => e.flux_injection(lambda),
        }
    }

    fn schur_term(&self) -> DMatrix<f64> {
        match &self.engine {
            SideEngine::Fem(e) => CoupledSide::schur_term(e),
            SideEngine::Rom(e, _) => e.schur_term(),
        }
    }
}

/// Factorized interface operator of a hybrid pair.
pub struct HybridSchur {
    flux: InterfaceFlux,
}

/// Assemble and factorize S for a hybrid pair. Cholesky is attempted first;
/// an operator that is not numerically positive definite falls back to
/// pivoted LU, recorded in [`HybridSchur::used_fallback`] so callers can
/// emit a diagnostic. Only an exactly singular operator is an error: heavy
/// truncation can leave S rank-deficient to roundoff, and the recovered
/// flux is still well defined on the subspace the retained modes span.
pub fn build_hybrid_schur(a: &HybridSide, b: &HybridSide) -> Result<HybridSchur> {
    let flux = recover_flux_operator(a, b, true)?;
    Ok(HybridSchur { flux })
}

impl HybridSchur {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.flux.s
    }

    pub fn symmetry_error(&self) -> f64 {
        self.flux.symmetry_error
    }

    pub fn used_fallback(&self) -> bool {
        self.flux.used_fallback
    }

    pub fn n_multipliers(&self) -> usize {
        self.flux.s.nrows()
    }
}

/// One flux-recovery evaluation at the sides' current states: derivative
/// pair (each in its side's own coordinates) and the recovered multiplier.
pub fn hybrid_rhs(
    a: &HybridSide,
    b: &HybridSide,
    schur: &HybridSchur,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    two_side_rhs(a, b, &schur.flux, &a.state, &b.state)
}

/// Advance the hybrid pair by `n_steps` steps, updating the sides' states
/// in place and returning the final time. The observer runs after every
/// completed step with the lifted full nodal states of both sides.
pub fn hybrid_advance<F>(
    left: &mut HybridSide,
    right: &mut HybridSide,
    schur: &HybridSchur,
    integrator: &TimeIntegrator,
    n_steps: usize,
    t0: f64,
    mut observe: F,
) -> Result<f64>
where
    F: FnMut(usize, f64, &DVector<f64>, &DVector<f64>),
{
    let (s1, s2, tf) = {
        let l: &HybridSide = left;
        let r: &HybridSide = right;
        advance_pair(
            l,
            r,
            &schur.flux,
            l.state.clone(),
            r.state.clone(),
            t0,
            integrator,
            n_steps,
            |k, t, a, b| {
                let la = l.lift_state(a);
                let lb = r.lift_state(b);
                observe(k, t, &la, &lb);
            },
        )?
    };
    left.state = s1;
    right.state = s2;
    Ok(tf)
}

/// Integrate a single uncoupled reduced model (no multipliers), staying in
/// modal coordinates. The observer receives the modal state per step; final
/// modal state is returned. Drives the same kernel as every other path.
pub fn rom_solve_single<F>(
    red: &ReducedOperatorSet,
    phi_r0: &DVector<f64>,
    integrator: &TimeIntegrator,
    n_steps: usize,
    mut observe: F,
) -> Result<DVector<f64>>
where
    F: FnMut(usize, f64, &DVector<f64>),
{
    if red.n_multipliers() != 0 {
        return Err(IvrError::UnsupportedConfiguration(
            "single-domain integration requires a reduced model without interface multipliers"
                .into(),
        ));
    }
    let engine = RomEngine::new(red);
    let empty = EmptySide;
    let flux = recover_flux_operator(&engine, &empty, false)?;
    let (phi, _, _) = advance_pair(
        &engine,
        &empty,
        &flux,
        phi_r0.clone(),
        DVector::zeros(0),
        0.0,
        integrator,
        n_steps,
        |k, t, a, _| observe(k, t, a),
    )?;
    Ok(phi)
}
