//! Partitioned time integration of two subdomains coupled through an
//! interface multiplier.
//!
//! Semi-discrete system (index-2 DAE, here reduced to index 1 by enforcing
//! the constraint on the derivatives):
//!
//!   M1 dphi1/dt = fbar1(phi1) - G1^T lambda
//!   M2 dphi2/dt = fbar2(phi2) + G2^T lambda
//!   G1 dphi1/dt - G2 dphi2/dt = 0
//!
//! Eliminating the derivatives yields the dual Schur complement
//!
//!   S lambda = G1 M1^{-1} fbar1 - G2 M2^{-1} fbar2,
//!   S = G1 M1^{-1} G1^T + G2 M2^{-1} G2^T,
//!
//! a small symmetric positive definite system on the interface. Each
//! right-hand-side evaluation recovers `lambda` from the current states and
//! then the subdomain updates decouple, so explicit integrators apply
//! unchanged — `lambda` is recovered anew at every Runge-Kutta stage.
//!
//! [`CoupledSide`] abstracts what a "side" must provide (modified force,
//! mass solve, coupling products); the full-order [`FemEngine`] here and the
//! reduced engines in [`crate::hybrid`] implement it, and every solver path
//! drives the same [`two_side_rhs`] kernel and stepping loop, so a full/full
//! integration reproduces the dedicated two-sided solver bit for bit.

use nalgebra::linalg::{Cholesky, FullPivLU};
use nalgebra::{DMatrix, DVector, Dyn};

use crate::assembly::OperatorSet;
use crate::error::{IvrError, Result};
use crate::integrate::{step_pair, TimeIntegrator};
use crate::linalg::{asymmetry, spmm, spmv, MassSolver};

/// States of the two coupled subdomains (free DOFs) at time `t`.
#[derive(Clone, Debug)]
pub struct CoupledFemState {
    pub phi1: DVector<f64>,
    pub phi2: DVector<f64>,
    pub t: f64,
}

impl CoupledFemState {
    pub fn new(phi1: DVector<f64>, phi2: DVector<f64>, t: f64) -> Self {
        Self { phi1, phi2, t }
    }
}

/// One side of a coupled pair, as seen by the flux-recovery step.
pub(crate) trait CoupledSide {
    fn n_dof(&self) -> usize;
    fn n_multipliers(&self) -> usize;
    /// fbar(phi) = f + dirichlet_correction - (D + A) phi, in this side's
    /// own coordinates (nodal or reduced).
    fn modified_force(&self, phi: &DVector<f64>) -> DVector<f64>;
    /// M^{-1} b.
    fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64>;
    /// G v (trace of a coefficient vector against the multiplier basis).
    fn apply_coupling(&self, v: &DVector<f64>) -> DVector<f64>;
    /// M^{-1} G^T lambda (precomputed operator applied to a multiplier).
    fn flux_injection(&self, lambda: &DVector<f64>) -> DVector<f64>;
    /// G M^{-1} G^T, this side's contribution to the interface operator.
    fn schur_term(&self) -> DMatrix<f64>;
}

/// Full-order side: factorized mass matrix plus the precomputed
/// M^{-1} G^T block of one subdomain.
pub(crate) struct FemEngine {
    pub ops: OperatorSet,
    pub solver: MassSolver,
    pub minv_gt: DMatrix<f64>,
}

impl FemEngine {
    pub fn new(ops: &OperatorSet) -> Result<Self> {
        let solver = MassSolver::new(&ops.mass)?;
        let ng = ops.coupling.rows();
        let mut minv_gt = DMatrix::zeros(ops.n_free(), ng);
        for k in 0..ng {
            let mut b = DVector::zeros(ops.n_free());
            if let Some(row) = ops.coupling.outer_view(k) {
                for (j, &v) in row.iter() {
                    b[j] = v;
                }
            }
            minv_gt.set_column(k, &solver.solve(&b));
        }
        Ok(Self {
            ops: ops.clone(),
            solver,
            minv_gt,
        })
    }
}

impl CoupledSide for FemEngine {
    fn n_dof(&self) -> usize {
        self.ops.n_free()
    }

    fn n_multipliers(&self) -> usize {
        self.ops.coupling.rows()
    }

    fn modified_force(&self, phi: &DVector<f64>) -> DVector<f64> {
        self.ops.modified_force(phi)
    }

    fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solver.solve(b)
    }

    fn apply_coupling(&self, v: &DVector<f64>) -> DVector<f64> {
        spmv(&self.ops.coupling, v)
    }

    fn flux_injection(&self, lambda: &DVector<f64>) -> DVector<f64> {
        &self.minv_gt * lambda
    }

    fn schur_term(&self) -> DMatrix<f64> {
        spmm(&self.ops.coupling, &self.minv_gt)
    }
}

/// Zero-size partner used to drive a single subdomain through the coupled
/// machinery (empty multiplier, empty state), keeping the arithmetic of the
/// one-sided and two-sided paths identical.
pub(crate) struct EmptySide;

impl CoupledSide for EmptySide {
    fn n_dof(&self) -> usize {
        0
    }

    fn n_multipliers(&self) -> usize {
        0
    }

    fn modified_force(&self, _phi: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn mass_solve(&self, _b: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn apply_coupling(&self, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn flux_injection(&self, _lambda: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn schur_term(&self) -> DMatrix<f64> {
        DMatrix::zeros(0, 0)
    }
}

/// Factorized interface operator.
pub(crate) enum SchurFactor {
    Cholesky(Cholesky<f64, Dyn>),
    PivotedLu(FullPivLU<f64, Dyn, Dyn>),
}

/// Assembled and factorized dual Schur complement of a side pair.
pub(crate) struct InterfaceFlux {
    pub s: DMatrix<f64>,
    pub factor: SchurFactor,
    pub symmetry_error: f64,
    pub used_fallback: bool,
}

impl InterfaceFlux {
    pub fn solve(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.factor {
            SchurFactor::Cholesky(ch) => Ok(ch.solve(r)),
            SchurFactor::PivotedLu(lu) => lu.solve(r).ok_or_else(|| {
                IvrError::SingularSchur(
                    "pivoted LU of the interface operator is singular".into(),
                )
            }),
        }
    }
}

/// Relative pivot floor below which a Cholesky factorization is treated as
/// having lost definiteness. A rank-deficient positive semidefinite matrix
/// factorizes with trailing pivots on the order of the rounding noise, so an
/// exact-zero test cannot catch it; requiring pivots within 1e-6 of the
/// largest (Cholesky pivots ~ sqrt of the spectrum) keeps the symmetric route
/// honest and hands marginal operators to the pivoted fallback where one is
/// permitted.
const CHOLESKY_PIVOT_FLOOR: f64 = 1e-6;

fn cholesky_well_conditioned(ch: &Cholesky<f64, Dyn>) -> bool {
    let l = ch.l_dirty();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    l.nrows() == 0 || dmin > dmax * CHOLESKY_PIVOT_FLOOR
}

/// The pivoted fallback keeps standard factorization semantics: only exact
/// zeros and non-finite pivots count as singular. Rank deficiency below
/// roundoff is survivable there because the flux right-hand side is built
/// from the same coupling maps whose ranges span the operator, so near-null
/// directions carry no load.
fn lu_usable(lu: &FullPivLU<f64, Dyn, Dyn>) -> bool {
    let u = lu.u();
    (0..u.nrows()).all(|i| {
        let d = u[(i, i)];
        d.is_finite() && d != 0.0
    })
}

/// Assemble S from the two sides' contributions and factorize it. The
/// symmetric positive definite route (Cholesky) is always attempted first;
/// `allow_fallback` additionally permits a pivoted-LU factorization for
/// operators that lose definiteness (possible with aggressively truncated
/// reduced sides). Taking the fallback is recorded in `used_fallback` so
/// callers can surface a diagnostic; only an exactly singular operator is
/// refused outright.
pub(crate) fn recover_flux_operator(
    s1: &dyn CoupledSide,
    s2: &dyn CoupledSide,
    allow_fallback: bool,
) -> Result<InterfaceFlux> {
    if s1.n_multipliers() != s2.n_multipliers() {
        return Err(IvrError::UnsupportedConfiguration(format!(
            "sides disagree on the multiplier count: {} vs {}",
            s1.n_multipliers(),
            s2.n_multipliers()
        )));
    }
    let s = s1.schur_term() + s2.schur_term();
    let symmetry_error = asymmetry(&s);
    match Cholesky::new(s.clone()).filter(cholesky_well_conditioned) {
        Some(ch) => Ok(InterfaceFlux {
            s,
            factor: SchurFactor::Cholesky(ch),
            symmetry_error,
            used_fallback: false,
        }),
        None if allow_fallback => {
            let lu = s.clone().full_piv_lu();
            if !lu_usable(&lu) {
                return Err(IvrError::SingularSchur(
                    "interface operator is singular even under pivoted LU".into(),
                ));
            }
            Ok(InterfaceFlux {
                s,
                factor: SchurFactor::PivotedLu(lu),
                symmetry_error,
                used_fallback: true,
            })
        }
        None => Err(IvrError::SingularSchur(
            "interface operator is not positive definite".into(),
        )),
    }
}

/// One flux-recovery evaluation: modified forces, interface flux, and the
/// decoupled derivative pair. This kernel is shared by every coupled solver
/// path.
pub(crate) fn two_side_rhs(
    s1: &dyn CoupledSide,
    s2: &dyn CoupledSide,
    flux: &InterfaceFlux,
    phi1: &DVector<f64>,
    phi2: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let f1 = s1.modified_force(phi1);
    let f2 = s2.modified_force(phi2);
    let w1 = s1.mass_solve(&f1);
    let w2 = s2.mass_solve(&f2);
    let r = s1.apply_coupling(&w1) - s2.apply_coupling(&w2);
    let lambda = flux.solve(&r)?;
    let d1 = w1 - s1.flux_injection(&lambda);
    let d2 = w2 + s2.flux_injection(&lambda);
    Ok((d1, d2, lambda))
}

/// Shared stepping loop with divergence guard. The observer is called after
/// every completed step with (1-based step index, time, states).
pub(crate) fn advance_pair<F>(
    s1: &dyn CoupledSide,
    s2: &dyn CoupledSide,
    flux: &InterfaceFlux,
    mut phi1: DVector<f64>,
    mut phi2: DVector<f64>,
    t0: f64,
    integrator: &TimeIntegrator,
    n_steps: usize,
    mut observe: F,
) -> Result<(DVector<f64>, DVector<f64>, f64)>
where
    F: FnMut(usize, f64, &DVector<f64>, &DVector<f64>),
{
    debug_assert_eq!(phi1.len(), s1.n_dof());
    debug_assert_eq!(phi2.len(), s2.n_dof());
    let mut rhs = |_t: f64, a: &DVector<f64>, b: &DVector<f64>| {
        let (d1, d2, _) = two_side_rhs(s1, s2, flux, a, b)?;
        Ok((d1, d2))
    };
    let mut t = t0;
    for k in 0..n_steps {
        let (na, nb) = step_pair(integrator.kind, integrator.dt, t, &phi1, &phi2, &mut rhs)?;
        if !(na.iter().all(|v| v.is_finite()) && nb.iter().all(|v| v.is_finite())) {
            return Err(IvrError::Divergence { step: k + 1 });
        }
        phi1 = na;
        phi2 = nb;
        t = t0 + (k + 1) as f64 * integrator.dt;
        observe(k + 1, t, &phi1, &phi2);
    }
    Ok((phi1, phi2, t))
}

/// Two full-order subdomains with their factorized interface operator.
pub struct SchurOperator {
    pub(crate) engine1: FemEngine,
    pub(crate) engine2: FemEngine,
    pub(crate) flux: InterfaceFlux,
}

/// Build the flux-recovery operator of a full/full pair. The interface
/// operator must be symmetric positive definite here; reduced sides with
/// indefiniteness fallbacks live in [`crate::hybrid`].
pub fn build_schur(ops1: &OperatorSet, ops2: &OperatorSet) -> Result<SchurOperator> {
    let engine1 = FemEngine::new(ops1)?;
    let engine2 = FemEngine::new(ops2)?;
    let flux = recover_flux_operator(&engine1, &engine2, false)?;
    Ok(SchurOperator {
        engine1,
        engine2,
        flux,
    })
}

impl SchurOperator {
    /// The assembled interface operator S.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.flux.s
    }

    /// max |S - S^T| entry.
    pub fn symmetry_error(&self) -> f64 {
        self.flux.symmetry_error
    }

    pub fn n_multipliers(&self) -> usize {
        self.flux.s.nrows()
    }

    /// Solve S lambda = r.
    pub fn solve_flux(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.flux.solve(r)
    }

    /// Evaluate one flux recovery at the given states: returns the
    /// derivative pair and the recovered interface flux.
    pub fn rhs(
        &self,
        phi1: &DVector<f64>,
        phi2: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        two_side_rhs(&self.engine1, &self.engine2, &self.flux, phi1, phi2)
    }
}

/// Advance the coupled full/full pair by `n_steps` steps of the given
/// integrator. The observer runs after each completed step.
pub fn ivr_advance<F>(
    schur: &SchurOperator,
    state: &CoupledFemState,
    integrator: &TimeIntegrator,
    n_steps: usize,
    mut observe: F,
) -> Result<CoupledFemState>
where
    F: FnMut(usize, &CoupledFemState),
{
    let (phi1, phi2, t) = advance_pair(
        &schur.engine1,
        &schur.engine2,
        &schur.flux,
        state.phi1.clone(),
        state.phi2.clone(),
        state.t,
        integrator,
        n_steps,
        |k, t, a, b| {
            observe(
                k,
                &CoupledFemState {
                    phi1: a.clone(),
                    phi2: b.clone(),
                    t,
                },
            )
        },
    )?;
    Ok(CoupledFemState { phi1, phi2, t })
}

/// Dense monolithic reference solver for the same index-1 system: the
/// saddle-point matrix
///
///   [ M1   0    G1^T ]
///   [ 0    M2  -G2^T ]
///   [ G1  -G2   0    ]
///
/// is factorized once and each evaluation solves for all derivatives and
/// the multiplier simultaneously. Independent linear-algebra route used to
/// validate the partitioned scheme.
pub struct MonolithicSolver {
    lu: FullPivLU<f64, Dyn, Dyn>,
    ops1: OperatorSet,
    ops2: OperatorSet,
    n1: usize,
    n2: usize,
    ng: usize,
}

pub fn build_monolithic(ops1: &OperatorSet, ops2: &OperatorSet) -> Result<MonolithicSolver> {
    let (n1, n2) = (ops1.n_free(), ops2.n_free());
    let ng = ops1.coupling.rows();
    if ops2.coupling.rows() != ng {
        return Err(IvrError::UnsupportedConfiguration(format!(
            "sides disagree on the multiplier count: {ng} vs {}",
            ops2.coupling.rows()
        )));
    }
    let n = n1 + n2 + ng;
    let mut k = DMatrix::zeros(n, n);
    for (&v, (i, j)) in ops1.mass.iter() {
        k[(i, j)] = v;
    }
    for (&v, (i, j)) in ops2.mass.iter() {
        k[(n1 + i, n1 + j)] = v;
    }
    for (&v, (r, j)) in ops1.coupling.iter() {
        k[(n1 + n2 + r, j)] = v;
        k[(j, n1 + n2 + r)] = v;
    }
    for (&v, (r, j)) in ops2.coupling.iter() {
        k[(n1 + n2 + r, n1 + j)] = -v;
        k[(n1 + j, n1 + n2 + r)] = -v;
    }
    let lu = k.full_piv_lu();
    if !lu.is_invertible() {
        return Err(IvrError::SingularSchur(
            "monolithic saddle-point matrix is singular".into(),
        ));
    }
    Ok(MonolithicSolver {
        lu,
        ops1: ops1.clone(),
        ops2: ops2.clone(),
        n1,
        n2,
        ng,
    })
}

impl MonolithicSolver {
    /// Derivative pair and multiplier at the given states.
    pub fn rhs(
        &self,
        phi1: &DVector<f64>,
        phi2: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let f1 = self.ops1.modified_force(phi1);
        let f2 = self.ops2.modified_force(phi2);
        let mut b = DVector::zeros(self.n1 + self.n2 + self.ng);
        b.rows_mut(0, self.n1).copy_from(&f1);
        b.rows_mut(self.n1, self.n2).copy_from(&f2);
        let z = self.lu.solve(&b).ok_or_else(|| {
            IvrError::SingularSchur("monolithic solve failed".into())
        })?;
        Ok((
            z.rows(0, self.n1).into_owned(),
            z.rows(self.n1, self.n2).into_owned(),
            z.rows(self.n1 + self.n2, self.ng).into_owned(),
        ))
    }

    pub fn advance(
        &self,
        state: &CoupledFemState,
        integrator: &TimeIntegrator,
        n_steps: usize,
    ) -> Result<CoupledFemState> {
        let mut rhs = |_t: f64, a: &DVector<f64>, b: &DVector<f64>| {
            let (d1, d2, _) = self.rhs(a, b)?;
            Ok((d1, d2))
        };
        let mut phi1 = state.phi1.clone();
        let mut phi2 = state.phi2.clone();
        let mut t = state.t;
        for k in 0..n_steps {
            let (na, nb) =
                step_pair(integrator.kind, integrator.dt, t, &phi1, &phi2, &mut rhs)?;
            if !(na.iter().all(|v| v.is_finite()) && nb.iter().all(|v| v.is_finite())) {
                return Err(IvrError::Divergence { step: k + 1 });
            }
            phi1 = na;
            phi2 = nb;
            t = state.t + (k + 1) as f64 * integrator.dt;
        }
        Ok(CoupledFemState { phi1, phi2, t })
    }
}

/// Integrate a single uncoupled subdomain (no multipliers). Drives the same
/// kernel as the coupled paths with an empty partner, so an uncoupled pair
/// integration and two single-domain integrations produce identical bits.
/// The observer runs after each completed step.
pub fn fem_solve_single<F>(
    ops: &OperatorSet,
    phi0: &DVector<f64>,
    integrator: &TimeIntegrator,
    n_steps: usize,
    mut observe: F,
) -> Result<DVector<f64>>
where
    F: FnMut(usize, f64, &DVector<f64>),
{
    if ops.coupling.rows() != 0 {
        return Err(IvrError::UnsupportedConfiguration(
            "single-domain integration requires a subdomain without interface multipliers"
                .into(),
        ));
    }
    let engine = FemEngine::new(ops)?;
    let empty = EmptySide;
    let flux = recover_flux_operator(&engine, &empty, false)?;
    let (phi, _, _) = advance_pair(
        &engine,
        &empty,
        &flux,
        phi0.clone(),
        DVector::zeros(0),
        0.0,
        integrator,
        n_steps,
        |k, t, a, _| observe(k, t, a),
    )?;
    Ok(phi)
}
