//! Snapshot collection, proper orthogonal decomposition, and Galerkin
//! projection of the subdomain operators.
//!
//! Snapshots are full nodal states sampled at t_k = k * ds_t, k = 1..m.
//! Subtracting the Dirichlet lift beta from every column zeroes the
//! Dirichlet rows exactly (those rows hold beta verbatim), so the basis is
//! computed from the free rows alone and scattered back with hard-zero
//! Dirichlet rows. A lifted reduced state U phi_r + beta therefore carries
//! the boundary data bit for bit, by construction.
//!
//! Truncation policies: an absolute singular-value threshold (drop
//! sigma_i < delta), a retained energy fraction (smallest N_R with
//! sum_{i<=N_R} sigma_i^2 / sum sigma_i^2 >= fraction), or a fixed mode
//! count. Every policy is additionally capped at the numerical rank
//! sigma_i >= max(rows, cols) * machine epsilon * sigma_1: columns below
//! that line span roundoff noise, not trajectory content.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::linalg::Cholesky;
use nalgebra::{DMatrix, DVector, Dyn};

use crate::assembly::{OperatorSet, SubdomainIndexing};
use crate::error::{IvrError, Result};
use crate::linalg::{spmm, thin_svd};

/// Which subdomain a snapshot set or basis belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubdomainId {
    Global,
    Left,
    Right,
}

impl fmt::Display for SubdomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubdomainId::Global => "global",
            SubdomainId::Left => "left",
            SubdomainId::Right => "right",
        })
    }
}

impl FromStr for SubdomainId {
    type Err = IvrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(SubdomainId::Global),
            "left" => Ok(SubdomainId::Left),
            "right" => Ok(SubdomainId::Right),
            other => Err(IvrError::InvalidArgument(format!(
                "unknown subdomain id '{other}'"
            ))),
        }
    }
}

/// Number of snapshots on a uniform sampling grid: m = floor(T / ds_t),
/// counting t_k = k * ds_t for k = 1..m (ratios within 1e-9 of an integer
/// round to it).
pub fn snapshot_count(t_final: f64, ds_t: f64) -> Result<usize> {
    if !(t_final > 0.0) || !(ds_t > 0.0) || !t_final.is_finite() || !ds_t.is_finite() {
        return Err(IvrError::InvalidArgument(format!(
            "snapshot sampling needs positive finite horizon and step, got T = {t_final}, ds_t = {ds_t}"
        )));
    }
    let ratio = t_final / ds_t;
    let nearest = ratio.round();
    let m = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.floor() as usize
    };
    if m == 0 {
        return Err(IvrError::InvalidArgument(format!(
            "sampling step {ds_t} exceeds the horizon {t_final}: no snapshots"
        )));
    }
    Ok(m)
}

/// Full nodal states sampled column-wise at t_k = k * ds_t.
#[derive(Clone, Debug)]
pub struct SnapshotMatrix {
    /// n_full x m; column k-1 is the state at k * ds_t.
    pub data: DMatrix<f64>,
    pub ds_t: f64,
    pub subdomain: SubdomainId,
}

impl SnapshotMatrix {
    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    /// Adjusted snapshots X0 = X - beta 1^T. Columns that carry beta on
    /// their Dirichlet rows come out exactly zero there; free rows are
    /// untouched (beta vanishes on free rows).
    pub fn centered(&self, beta: &DVector<f64>) -> Result<DMatrix<f64>> {
        if beta.len() != self.data.nrows() {
            return Err(IvrError::InvalidArgument(format!(
                "lift vector has {} rows, snapshots have {}",
                beta.len(),
                self.data.nrows()
            )));
        }
        let mut x0 = self.data.clone();
        for mut col in x0.column_iter_mut() {
            col -= beta;
        }
        Ok(x0)
    }
}

/// Streaming snapshot accumulator, hooked as a step observer. Records the
/// full nodal state every `stride` steps until `m` columns are collected.
pub struct SnapshotCollector {
    subdomain: SubdomainId,
    ds_t: f64,
    stride: usize,
    expected: usize,
    columns: Vec<DVector<f64>>,
}

impl SnapshotCollector {
    /// `dt` must subdivide `ds_t` evenly (within 1e-9 relative): snapshots
    /// land exactly on integration steps.
    pub fn new(subdomain: SubdomainId, ds_t: f64, dt: f64, t_final: f64) -> Result<Self> {
        let expected = snapshot_count(t_final, ds_t)?;
        let ratio = ds_t / dt;
        let stride = ratio.round();
        if !(stride >= 1.0) || (ratio - stride).abs() > 1e-9 * ratio {
            return Err(IvrError::InvalidArgument(format!(
                "time step {dt} does not subdivide the sampling step {ds_t}"
            )));
        }
        Ok(Self {
            subdomain,
            ds_t,
            stride: stride as usize,
            expected,
            columns: Vec::with_capacity(expected),
        })
    }

    /// Feed the state after integration step `step` (1-based).
    pub fn observe(&mut self, step: usize, full_state: &DVector<f64>) {
        if step % self.stride == 0 && self.columns.len() < self.expected {
            self.columns.push(full_state.clone());
        }
    }

    pub fn finish(self) -> Result<SnapshotMatrix> {
        if self.columns.len() != self.expected {
            return Err(IvrError::InvalidArgument(format!(
                "collected {} snapshots, expected {}",
                self.columns.len(),
                self.expected
            )));
        }
        Ok(SnapshotMatrix {
            data: DMatrix::from_columns(&self.columns),
            ds_t: self.ds_t,
            subdomain: self.subdomain,
        })
    }
}

/// How many leading modes to retain from the singular value spectrum.
#[derive(Clone, Copy, Debug)]
pub enum TruncationPolicy {
    /// Drop all modes with sigma_i < delta (absolute threshold).
    SingularValueThreshold(f64),
    /// Keep the smallest count whose squared singular values reach this
    /// fraction of the total.
    EnergyFraction(f64),
    /// Keep exactly this many modes (capped by the numerical rank).
    FixedSize(usize),
}

impl fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationPolicy::SingularValueThreshold(d) => write!(f, "threshold:{d}"),
            TruncationPolicy::EnergyFraction(e) => write!(f, "energy:{e}"),
            TruncationPolicy::FixedSize(n) => write!(f, "fixed:{n}"),
        }
    }
}

impl FromStr for TruncationPolicy {
    type Err = IvrError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s.split_once(':').ok_or_else(|| {
            IvrError::InvalidArgument(format!("truncation '{s}' must look like kind:value"))
        })?;
        let bad = |what: &str| {
            IvrError::InvalidArgument(format!("cannot parse {what} from '{value}' in '{s}'"))
        };
        match kind {
            "threshold" => Ok(TruncationPolicy::SingularValueThreshold(
                value.parse().map_err(|_| bad("a threshold"))?,
            )),
            "energy" => Ok(TruncationPolicy::EnergyFraction(
                value.parse().map_err(|_| bad("an energy fraction"))?,
            )),
            "fixed" => Ok(TruncationPolicy::FixedSize(
                value.parse().map_err(|_| bad("a mode count"))?,
            )),
            _ => Err(IvrError::InvalidArgument(format!(
                "unknown truncation kind '{kind}' (expected threshold, energy, or fixed)"
            ))),
        }
    }
}

/// Fraction of snapshot energy captured by the first `n_r` modes.
pub fn energy_fraction(singular_values: &DVector<f64>, n_r: usize) -> f64 {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    let head: f64 = singular_values.iter().take(n_r).map(|s| s * s).sum();
    head / total
}

/// Smallest mode count capturing at least `fraction` of the energy.
pub fn modes_for_energy(singular_values: &DVector<f64>, fraction: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let mut head = 0.0;
    for (k, s) in singular_values.iter().enumerate() {
        head += s * s;
        if head >= fraction * total {
            return k + 1;
        }
    }
    singular_values.len()
}

/// POD basis of one subdomain: orthonormal modes over the full node set
/// (hard-zero Dirichlet rows) plus the lift that carries the boundary data.
#[derive(Clone, Debug)]
pub struct ReducedBasis {
    /// n_full x n_r orthonormal modes; Dirichlet rows are exactly zero.
    pub u: DMatrix<f64>,
    /// Full singular-value spectrum of the adjusted snapshots, descending.
    pub singular_values: DVector<f64>,
    /// Dirichlet lift the basis was adjusted with.
    pub beta: DVector<f64>,
    pub subdomain: SubdomainId,
    pub ds_t: f64,
    /// Snapshot count the spectrum came from.
    pub n_snapshots: usize,
    /// Truncation rule that selected the retained modes.
    pub policy: TruncationPolicy,
}

impl ReducedBasis {
    pub fn n_r(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_full(&self) -> usize {
        self.u.nrows()
    }

    /// Modes restricted to the free DOFs (the rows the operators act on).
    pub fn free_rows(&self, indexing: &SubdomainIndexing) -> DMatrix<f64> {
        DMatrix::from_fn(indexing.n_free(), self.n_r(), |fi, k| {
            self.u[(indexing.free_to_node[fi], k)]
        })
    }

    /// Reduced coordinates of a free-DOF state: phi_r = U_f^T phi
    /// (the lift beta vanishes on free rows, so no subtraction is needed).
    pub fn reduce(&self, indexing: &SubdomainIndexing, phi_free: &DVector<f64>) -> DVector<f64> {
        self.free_rows(indexing).tr_mul(phi_free)
    }

    /// Lifted full nodal state U phi_r + beta. Dirichlet rows equal beta
    /// bitwise: the mode rows there are hard zeros.
    pub fn lift(&self, phi_r: &DVector<f64>) -> DVector<f64> {
        &self.u * phi_r + &self.beta
    }

    /// The leading `n_r` modes as a basis of their own. POD bases nest:
    /// this equals the basis a fixed-size policy of `n_r` would have
    /// produced from the same snapshots (the spectrum metadata is shared).
    pub fn truncated(&self, n_r: usize) -> ReducedBasis {
        let keep = n_r.min(self.n_r());
        ReducedBasis {
            u: self.u.columns(0, keep).into_owned(),
            singular_values: self.singular_values.clone(),
            beta: self.beta.clone(),
            subdomain: self.subdomain,
            ds_t: self.ds_t,
            n_snapshots: self.n_snapshots,
            policy: TruncationPolicy::FixedSize(keep),
        }
    }

    /// max |U^T U - I| entry over the retained modes.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.u.tr_mul(&self.u);
        let mut worst: f64 = 0.0;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - want).abs());
            }
        }
        worst
    }
}

/// Compute the POD basis of adjusted snapshots: thin SVD of the free rows,
/// truncation per policy (always capped at the numerical rank
/// sigma_i >= max(rows, cols) * eps * sigma_1), deterministic sign fix, and
/// scatter back to full rows with exact zeros on Dirichlet rows.
pub fn compute_pod_basis(
    snapshots: &SnapshotMatrix,
    indexing: &SubdomainIndexing,
    beta: &DVector<f64>,
    policy: TruncationPolicy,
) -> Result<ReducedBasis> {
    if snapshots.data.nrows() != indexing.n_full() {
        return Err(IvrError::InvalidArgument(format!(
            "snapshots have {} rows, mesh has {} nodes",
            snapshots.data.nrows(),
            indexing.n_full()
        )));
    }
    let x0 = snapshots.centered(beta)?;
    let m = x0.ncols();
    let x0_free = DMatrix::from_fn(indexing.n_free(), m, |fi, k| {
        x0[(indexing.free_to_node[fi], k)]
    });
    let (u_free, sv) = thin_svd(&x0_free)?;
    let sigma1 = sv[0];
    if sigma1 == 0.0 {
        return Err(IvrError::EmptyBasis(
            "adjusted snapshots are identically zero".into(),
        ));
    }
    let guard = x0_free.nrows().max(m) as f64 * f64::EPSILON * sigma1;
    let numerical_rank = sv.iter().take_while(|&&s| s >= guard).count();

    let wanted = match policy {
        TruncationPolicy::SingularValueThreshold(delta) => {
            if !(delta > 0.0) || !delta.is_finite() {
                return Err(IvrError::InvalidArgument(format!(
                    "singular value threshold must be positive and finite, got {delta}"
                )));
            }
            sv.iter().take_while(|&&s| s >= delta).count()
        }
        TruncationPolicy::EnergyFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(IvrError::InvalidArgument(format!(
                    "energy fraction must lie in (0, 1], got {f}"
                )));
            }
            modes_for_energy(&sv, f)
        }
        TruncationPolicy::FixedSize(n) => {
            if n == 0 {
                return Err(IvrError::InvalidArgument(
                    "fixed basis size must be at least 1".into(),
                ));
            }
            n
        }
    };
    let n_r = wanted.min(numerical_rank);
    if n_r == 0 {
        return Err(IvrError::EmptyBasis(format!(
            "truncation retains no modes (sigma_1 = {sigma1:.3e})"
        )));
    }

    let mut u = DMatrix::zeros(indexing.n_full(), n_r);
    for k in 0..n_r {
        // Deterministic orientation: the entry of largest magnitude is
        // positive (SVD signs are otherwise arbitrary).
        let col = u_free.column(k);
        let mut imax = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[imax].abs() {
                imax = i;
            }
        }
        let flip = if col[imax] < 0.0 { -1.0 } else { 1.0 };
        for (fi, &node) in indexing.free_to_node.iter().enumerate() {
            u[(node, k)] = flip * u_free[(fi, k)];
        }
    }

    Ok(ReducedBasis {
        u,
        singular_values: sv,
        beta: beta.clone(),
        subdomain: snapshots.subdomain,
        ds_t: snapshots.ds_t,
        n_snapshots: m,
        policy,
    })
}

/// Galerkin projections of one subdomain's operators onto a basis.
#[derive(Clone, Debug)]
pub struct ReducedOperatorSet {
    pub mass: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub advection: DMatrix<f64>,
    /// G U_f: multiplier x n_r.
    pub coupling: DMatrix<f64>,
    pub load: DVector<f64>,
    /// U_f^T of the eliminated-column forcing -(D + A) beta.
    pub lift_correction: DVector<f64>,
    pub(crate) mass_chol: Cholesky<f64, Dyn>,
}

impl ReducedOperatorSet {
    pub fn n_r(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_multipliers(&self) -> usize {
        self.coupling.nrows()
    }

    /// Reduced modified force f~(phi_r) = U^T f + lift_correction
    /// - (D~ + A~) phi_r.
    pub fn modified_force(&self, phi_r: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.load + &self.lift_correction;
        out -= &self.diffusion * phi_r;
        out -= &self.advection * phi_r;
        out
    }

    pub fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.mass_chol.solve(b)
    }

    /// M~^{-1} B for a matrix of right-hand sides.
    pub fn mass_solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.mass_chol.solve(b)
    }
}

/// Project the assembled operators onto the basis: M~ = U^T M U and
/// likewise for diffusion/advection, G~ = G U, plus the reduced load and
/// lift correction. The reduced mass matrix is factorized here.
pub fn project_operators(ops: &OperatorSet, basis: &ReducedBasis) -> Result<ReducedOperatorSet> {
    if basis.n_full() != ops.indexing.n_full() {
        return Err(IvrError::InvalidArgument(format!(
            "basis has {} rows, operators expect {} nodes",
            basis.n_full(),
            ops.indexing.n_full()
        )));
    }
    let u_f = basis.free_rows(&ops.indexing);
    let project = |m: &crate::linalg::SpMat| u_f.tr_mul(&spmm(m, &u_f));
    let mass = project(&ops.mass);
    let diffusion = project(&ops.diffusion);
    let advection = project(&ops.advection);
    let coupling = spmm(&ops.coupling, &u_f);
    let load = u_f.tr_mul(&ops.load);
    let lift_correction = u_f.tr_mul(&ops.dirichlet_correction);
    let mass_chol = Cholesky::new(mass.clone()).ok_or_else(|| {
        IvrError::InvalidArgument(
            "reduced mass matrix is not positive definite (basis nearly rank-deficient)"
                .into(),
        )
    })?;
    Ok(ReducedOperatorSet {
        mass,
        diffusion,
        advection,
        coupling,
        load,
        lift_correction,
        mass_chol,
    })
}

/// Write a basis to a text file. Floats are printed with Rust's shortest
/// round-trip formatting, so save/load is lossless bit for bit.
pub fn save_basis(basis: &ReducedBasis, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("ivr-basis 1\n");
    out.push_str(&format!("subdomain {}\n", basis.subdomain));
    out.push_str(&format!("policy {}\n", basis.policy));
    out.push_str(&format!("ds_t {}\n", basis.ds_t));
    out.push_str(&format!("snapshots {}\n", basis.n_snapshots));
    out.push_str(&format!("rows {}\n", basis.n_full()));
    out.push_str(&format!("modes {}\n", basis.n_r()));
    out.push_str(&format!("singular_values {}\n", basis.singular_values.len()));
    for s in basis.singular_values.iter() {
        out.push_str(&format!("{s}\n"));
    }
    out.push_str("u\n");
    for k in 0..basis.n_r() {
        for i in 0..basis.n_full() {
            out.push_str(&format!("{}\n", basis.u[(i, k)]));
        }
    }
    out.push_str("beta\n");
    for b in basis.beta.iter() {
        out.push_str(&format!("{b}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a basis written by [`save_basis`].
pub fn load_basis(path: &Path) -> Result<ReducedBasis> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| IvrError::Persistence(format!("unexpected end of file before {what}")))
    };
    let header = next("header")?;
    if header != "ivr-basis 1" {
        return Err(IvrError::Persistence(format!(
            "unrecognized header '{header}'"
        )));
    }
    fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| IvrError::Persistence(format!("expected '{key} <value>', got '{line}'")))
    }
    fn parse<T: FromStr>(s: &str, what: &str) -> Result<T> {
        s.parse()
            .map_err(|_| IvrError::Persistence(format!("cannot parse {what} from '{s}'")))
    }
    let subdomain: SubdomainId = field(next("subdomain")?, "subdomain")?.parse()?;
    let policy: TruncationPolicy = field(next("policy")?, "policy")?.parse()?;
    let ds_t: f64 = parse(field(next("ds_t")?, "ds_t")?, "ds_t")?;
    let n_snapshots: usize = parse(field(next("snapshots")?, "snapshots")?, "snapshots")?;
    let rows: usize = parse(field(next("rows")?, "rows")?, "rows")?;
    let modes: usize = parse(field(next("modes")?, "modes")?, "modes")?;
    let n_sv: usize = parse(
        field(next("singular_values")?, "singular_values")?,
        "singular value count",
    )?;
    let mut singular_values = DVector::zeros(n_sv);
    for i in 0..n_sv {
        singular_values[i] = parse(next("singular value")?, "singular value")?;
    }
    if next("u marker")? != "u" {
        return Err(IvrError::Persistence("expected 'u' section".into()));
    }
    let mut u = DMatrix::zeros(rows, modes);
    for k in 0..modes {
        for i in 0..rows {
            u[(i, k)] = parse(next("mode entry")?, "mode entry")?;
        }
    }
    if next("beta marker")? != "beta" {
        return Err(IvrError::Persistence("expected 'beta' section".into()));
    }
    let mut beta = DVector::zeros(rows);
    for i in 0..rows {
        beta[i] = parse(next("lift entry")?, "lift entry")?;
    }
    Ok(ReducedBasis {
        u,
        singular_values,
        beta,
        subdomain,
        ds_t,
        n_snapshots,
        policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_operators, nodal_values_free};
    use crate::fields::{ScalarField, VelocityField};
    use crate::linalg::to_dense;
    use crate::mesh::{build_coupled_mesh, build_global_mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn small_setup() -> (OperatorSet, SubdomainIndexing) {
        let mesh = build_global_mesh(4, 4).unwrap();
        let ops = assemble_operators(
            &mesh,
            1e-3,
            &VelocityField::rotation(),
            &ScalarField::zero(),
            &ScalarField::zero(),
        )
        .unwrap();
        let idx = ops.indexing.clone();
        (ops, idx)
    }

    /// Random snapshots shaped like lifted states: free rows random,
    /// Dirichlet rows carrying beta exactly.
    fn random_snapshots(
        idx: &SubdomainIndexing,
        beta: &DVector<f64>,
        m: usize,
        seed: u64,
    ) -> SnapshotMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<DVector<f64>> = (0..m)
            .map(|_| {
                let free = DVector::from_fn(idx.n_free(), |_, _| rng.gen_range(-1.0..1.0));
                idx.lift_full(&free, beta)
            })
            .collect();
        SnapshotMatrix {
            data: DMatrix::from_columns(&cols),
            ds_t: 0.1,
            subdomain: SubdomainId::Global,
        }
    }

    #[test]
    fn truncated_basis_equals_fixed_size_recomputation() {
        let (ops, idx) = small_setup();
        let x = random_snapshots(&idx, &ops.beta, 12, 31);
        let full = compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::EnergyFraction(1.0))
            .unwrap();
        let five = compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::FixedSize(5)).unwrap();
        let cut = full.truncated(5);
        assert_eq!(cut.n_r(), 5);
        for (a, b) in cut.u.iter().zip(five.u.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Truncating beyond the available modes is a no-op.
        assert_eq!(full.truncated(1000).n_r(), full.n_r());
    }

    #[test]
    fn snapshot_counts_match_sampling_grids() {
        assert_eq!(snapshot_count(TAU, 6.73e-3).unwrap(), 933);
        assert_eq!(snapshot_count(TAU, 1.35e-2).unwrap(), 465);
        assert_eq!(snapshot_count(1.0, 1.0).unwrap(), 1);
        assert_eq!(snapshot_count(1.0, 0.2).unwrap(), 5);
        assert!(snapshot_count(0.1, 0.2).is_err());
        assert!(snapshot_count(1.0, 0.0).is_err());
    }

    #[test]
    fn collector_samples_every_stride_until_full() {
        let ds = 0.05;
        let dt = 0.01;
        let mut c = SnapshotCollector::new(SubdomainId::Left, ds, dt, 0.52).unwrap();
        // floor(0.52 / 0.05) = 10 snapshots from 52 steps at stride 5.
        for step in 1..=52 {
            c.observe(step, &DVector::from_element(3, step as f64));
        }
        let x = c.finish().unwrap();
        assert_eq!(x.n_snapshots(), 10);
        for k in 0..10 {
            assert_eq!(x.data[(0, k)], ((k + 1) * 5) as f64);
        }
        assert!(SnapshotCollector::new(SubdomainId::Left, 0.05, 0.02, 1.0).is_err());
    }

    #[test]
    fn collector_rejects_short_runs() {
        let mut c = SnapshotCollector::new(SubdomainId::Right, 0.1, 0.1, 1.0).unwrap();
        for step in 1..=7 {
            c.observe(step, &DVector::zeros(2));
        }
        assert!(c.finish().is_err());
    }

    #[test]
    fn centering_zeroes_dirichlet_rows_bitwise() {
        let (ops, idx) = small_setup();
        let mut beta = ops.beta.clone();
        // Nonzero boundary values to make the bitwise claim meaningful.
        for n in 0..idx.n_full() {
            if idx.node_to_free[n].is_none() {
                beta[n] = 0.3 + n as f64;
            }
        }
        let x = random_snapshots(&idx, &beta, 6, 11);
        let x0 = x.centered(&beta).unwrap();
        for n in 0..idx.n_full() {
            for k in 0..6 {
                match idx.node_to_free[n] {
                    None => assert_eq!(x0[(n, k)].to_bits(), 0.0f64.to_bits()),
                    Some(_) => assert_eq!(x0[(n, k)], x.data[(n, k)]),
                }
            }
        }
    }

    #[test]
    fn pod_modes_are_orthonormal_with_zero_dirichlet_rows() {
        let (ops, idx) = small_setup();
        let x = random_snapshots(&idx, &ops.beta, 8, 3);
        let basis =
            compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::EnergyFraction(1.0))
                .unwrap();
        assert_eq!(basis.n_r(), 8);
        assert!(basis.orthonormality_error() < 1e-12);
        for n in 0..idx.n_full() {
            if idx.node_to_free[n].is_none() {
                for k in 0..basis.n_r() {
                    assert_eq!(basis.u[(n, k)].to_bits(), 0.0f64.to_bits());
                }
            }
        }
        //

        // Deterministic sign: largest-magnitude entry of each mode positive.
        for k in 0..basis.n_r() {
            let col = basis.u.column(k);
            let mut imax = 0;
            for (i, v) in col.iter().enumerate() {
                if v.abs() > col[imax].abs() {
                    imax = i;
                }
            }
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn projection_error_equals_discarded_energy() {
        let (ops, idx) = small_setup();
        let x = random_snapshots(&idx, &ops.beta, 10, 7);
        let basis = compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::FixedSize(4))
            .unwrap();
        assert_eq!(basis.n_r(), 4);
        let x0 = x.centered(&ops.beta).unwrap();
        let x0f = DMatrix::from_fn(idx.n_free(), 10, |fi, k| x0[(idx.free_to_node[fi], k)]);
        let uf = basis.free_rows(&idx);
        let err = &x0f - &uf * uf.tr_mul(&x0f);
        let err2: f64 = err.iter().map(|v| v * v).sum();
        let tail: f64 = basis
            .singular_values
            .iter()
            .skip(4)
            .map(|s| s * s)
            .sum();
        assert!((err2 - tail).abs() <= 1e-10 * tail.max(1e-30), "{err2} vs {tail}");
    }

    #[test]
    fn truncation_policies_select_expected_counts() {
        let (ops, idx) = small_setup();
        // Two orthogonal snapshot directions with known singular values
        // 2 and 1e-5.
        let mut a = DVector::zeros(idx.n_full());
        let mut b = DVector::zeros(idx.n_full());
        a[idx.free_to_node[0]] = 2.0;
        b[idx.free_to_node[1]] = 1e-5;
        let x = SnapshotMatrix {
            data: DMatrix::from_columns(&[a, b]),
            ds_t: 0.1,
            subdomain: SubdomainId::Global,
        };
        let mk = |p| compute_pod_basis(&x, &idx, &ops.beta, p);
        assert_eq!(
            mk(TruncationPolicy::SingularValueThreshold(1e-3)).unwrap().n_r(),
            1
        );
        assert_eq!(
            mk(TruncationPolicy::SingularValueThreshold(1e-9)).unwrap().n_r(),
            2
        );
        // 90% of energy sits in the first mode (4 vs 1e-10).
        assert_eq!(mk(TruncationPolicy::EnergyFraction(0.9)).unwrap().n_r(), 1);
        assert_eq!(mk(TruncationPolicy::EnergyFraction(1.0)).unwrap().n_r(), 2);
        assert_eq!(mk(TruncationPolicy::FixedSize(1)).unwrap().n_r(), 1);
        // FixedSize beyond the rank is capped by the guard.
        assert_eq!(mk(TruncationPolicy::FixedSize(10)).unwrap().n_r(), 2);
        assert!(mk(TruncationPolicy::FixedSize(0)).is_err());
        assert!(mk(TruncationPolicy::EnergyFraction(0.0)).is_err());
        assert!(mk(TruncationPolicy::SingularValueThreshold(5.0)).is_err());
    }

    #[test]
    fn energy_fraction_is_nondecreasing_to_one() {
        let sv = DVector::from_vec(vec![3.0, 1.0, 0.5, 0.1]);
        let mut last = 0.0;
        for n in 0..=4 {
            let f = energy_fraction(&sv, n);
            assert!(f >= last);
            last = f;
        }
        assert!((last - 1.0).abs() < 1e-15);
        assert_eq!(modes_for_energy(&sv, 0.8), 1);
        assert_eq!(modes_for_energy(&sv, 1.0), 4);
        assert!(modes_for_energy(&sv, 0.9) <= modes_for_energy(&sv, 0.99999));
    }

    #[test]
    fn repeated_column_yields_rank_one_basis() {
        let (ops, idx) = small_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let free = DVector::from_fn(idx.n_free(), |_, _| rng.gen_range(-1.0..1.0));
        let v = idx.lift_full(&free, &ops.beta);
        let x = SnapshotMatrix {
            data: DMatrix::from_columns(&[v.clone(), v.clone(), v.clone(), v.clone()]),
            ds_t: 0.1,
            subdomain: SubdomainId::Left,
        };
        let basis =
            compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::EnergyFraction(1.0))
                .unwrap();
        assert_eq!(basis.n_r(), 1);
        // The single mode is v/|v| up to the deterministic sign.
        let dir = &free / free.norm();
        let mode = basis.free_rows(&idx).column(0).into_owned();
        let aligned = if (mode.dot(&dir)) < 0.0 { -dir } else { dir };
        assert!((mode - aligned).amax() < 1e-12);
    }

    #[test]
    fn zero_snapshots_are_rejected() {
        let (ops, idx) = small_setup();
        let x = SnapshotMatrix {
            data: DMatrix::zeros(idx.n_full(), 3),
            ds_t: 0.1,
            subdomain: SubdomainId::Global,
        };
        match compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::EnergyFraction(0.9)) {
            Err(IvrError::EmptyBasis(_)) => {}
            other => panic!("expected empty-basis error, got {other:?}"),
        }
    }

    #[test]
    fn lift_carries_boundary_data_bitwise() {
        let mesh = build_global_mesh(4, 4).unwrap();
        let g = ScalarField::new(|x, y| 1.0 + 0.5 * x - y);
        let ops = assemble_operators(
            &mesh,
            1e-3,
            &VelocityField::rotation(),
            &ScalarField::zero(),
            &g,
        )
        .unwrap();
        let idx = ops.indexing.clone();
        let x = random_snapshots(&idx, &ops.beta, 6, 23);
        let basis =
            compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::EnergyFraction(1.0))
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..5 {
            let phi_r = DVector::from_fn(basis.n_r(), |_, _| rng.gen_range(-2.0..2.0));
            let lifted = basis.lift(&phi_r);
            for n in 0..idx.n_full() {
                if idx.node_to_free[n].is_none() {
                    assert_eq!(lifted[n].to_bits(), ops.beta[n].to_bits());
                }
            }
        }
    }

    #[test]
    fn reduce_then_lift_reproduces_in_span_states() {
        let (ops, idx) = small_setup();
        let x = random_snapshots(&idx, &ops.beta, 12, 31);
        let basis =
            compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::EnergyFraction(1.0))
                .unwrap();
        // A combination of snapshot columns lies in the span: reduce/lift
        // round-trips it.
        let x0 = x.centered(&ops.beta).unwrap();
        let combo_full = x0.column(0) * 0.3 - x0.column(5) * 1.2;
        let phi_free = idx.restrict(&combo_full.into_owned());
        let phi_r = basis.reduce(&idx, &phi_free);
        let back = idx.restrict(&basis.lift(&phi_r));
        assert!((back - phi_free).amax() < 1e-10);
    }

    #[test]
    fn projected_operators_match_dense_congruence() {
        let (ops, idx) = small_setup();
        let x = random_snapshots(&idx, &ops.beta, 6, 37);
        let basis = compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::FixedSize(5))
            .unwrap();
        let red = project_operators(&ops, &basis).unwrap();
        let uf = basis.free_rows(&idx);
        for (got, full) in [
            (&red.mass, &ops.mass),
            (&red.diffusion, &ops.diffusion),
            (&red.advection, &ops.advection),
        ] {
            let want = uf.tr_mul(&(to_dense(full) * &uf));
            assert!((got - want).amax() < 1e-13);
        }
        let gw = to_dense(&ops.coupling) * &uf;
        assert!((&red.coupling - gw).amax() < 1e-13);
        assert!((&red.load - uf.tr_mul(&ops.load)).amax() < 1e-15);
        assert!(
            (&red.lift_correction - uf.tr_mul(&ops.dirichlet_correction)).amax() < 1e-15
        );
        // Reduced mass solve inverts the projected mass.
        let b = DVector::from_fn(red.n_r(), |i, _| (i as f64 + 1.0).sin());
        let sol = red.mass_solve(&b);
        assert!((&red.mass * sol - b).amax() < 1e-12);
    }

    #[test]
    fn reduced_coupling_has_multiplier_rows() {
        let cm = build_coupled_mesh(3, 3, 0.5).unwrap();
        let zero = ScalarField::zero();
        let ops = assemble_operators(
            &cm.left,
            1e-5,
            &VelocityField::rotation(),
            &zero,
            &zero,
        )
        .unwrap();
        let idx = ops.indexing.clone();
        let x = random_snapshots(&idx, &ops.beta, 5, 41);
        let basis = compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::FixedSize(3))
            .unwrap();
        let red = project_operators(&ops, &basis).unwrap();
        assert_eq!(red.coupling.nrows(), 4);
        assert_eq!(red.coupling.ncols(), 3);
        assert_eq!(red.n_multipliers(), 4);
    }

    #[test]
    fn basis_round_trips_through_disk_bitwise() {
        let (ops, idx) = small_setup();
        let mut beta = ops.beta.clone();
        for n in 0..idx.n_full() {
            if idx.node_to_free[n].is_none() {
                beta[n] = (n as f64 * 0.7).sin();
            }
        }
        let x = random_snapshots(&idx, &beta, 7, 43);
        let basis = compute_pod_basis(&x, &idx, &beta, TruncationPolicy::FixedSize(4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.txt");
        save_basis(&basis, &path).unwrap();
        let loaded = load_basis(&path).unwrap();
        assert_eq!(loaded.subdomain, basis.subdomain);
        assert_eq!(loaded.ds_t.to_bits(), basis.ds_t.to_bits());
        assert_eq!(loaded.n_snapshots, basis.n_snapshots);
        assert_eq!(loaded.u.nrows(), basis.u.nrows());
        assert_eq!(loaded.u.ncols(), basis.u.ncols());
        for (a, b) in loaded.u.iter().zip(basis.u.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in loaded
            .singular_values
            .iter()
            .zip(basis.singular_values.iter())
        {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in loaded.beta.iter().zip(basis.beta.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corrupt_basis_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = dir.path().join("bad1.txt");
        std::fs::write(&bad_header, "ivr-basis 2\nsubdomain left\n").unwrap();
        assert!(load_basis(&bad_header).is_err());
        let truncated = dir.path().join("bad2.txt");
        std::fs::write(
            &truncated,
            "ivr-basis 1\nsubdomain left\nds_t 0.1\nsnapshots 3\nrows 5\nmodes 2\n",
        )
        .unwrap();
        assert!(load_basis(&truncated).is_err());
        let missing = dir.path().join("nope.txt");
        assert!(load_basis(&missing).is_err());
    }

    #[test]
    fn subdomain_ids_round_trip_as_strings() {
        for id in [SubdomainId::Global, SubdomainId::Left, SubdomainId::Right] {
            assert_eq!(id.to_string().parse::<SubdomainId>().unwrap(), id);
        }
        assert!("middle".parse::<SubdomainId>().is_err());
    }

    #[test]
    fn pod_of_integrated_trajectory_has_decaying_spectrum() {
        // Sanity link to the solvers: snapshots of a short diffusion run
        // produce a strongly decaying spectrum and a small basis at 99.999%.
        let mesh = build_global_mesh(6, 6).unwrap();
        let zero = ScalarField::zero();
        let ic = ScalarField::new(|x, y| {
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
                + 0.3 * (2.0 * std::f64::consts::PI * x).sin()
                    * (std::f64::consts::PI * y).sin()
        });
        let ops =
            assemble_operators(&mesh, 0.05, &VelocityField::zero(), &zero, &zero).unwrap();
        let idx = ops.indexing.clone();
        let phi0 = nodal_values_free(&mesh, &idx, &ic);
        let integ = crate::integrate::TimeIntegrator::new(
            crate::integrate::IntegratorKind::Rk4,
            0.01,
        )
        .unwrap();
        let mut coll =
            SnapshotCollector::new(SubdomainId::Global, 0.05, 0.01, 2.0).unwrap();
        crate::coupling::fem_solve_single(&ops, &phi0, &integ, 200, |step, _t, phi| {
            coll.observe(step, &idx.lift_full(phi, &ops.beta));
        })
        .unwrap();
        let x = coll.finish().unwrap();
        assert_eq!(x.n_snapshots(), 40);
        let basis =
            compute_pod_basis(&x, &idx, &ops.beta, TruncationPolicy::EnergyFraction(0.99999))
                .unwrap();
        // Smooth diffusion decay is dominated by the two initial modes.
        assert!(basis.n_r() <= 6, "n_r = {}", basis.n_r());
        assert!(basis.singular_values[0] > 10.0 * basis.singular_values[3].abs());
    }
}
