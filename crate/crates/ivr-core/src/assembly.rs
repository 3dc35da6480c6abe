//! Q1 finite-element assembly for the advection-diffusion operator
//!
//!   d/dt phi - div(kappa grad phi - u phi) = f
//!
//! on a structured subdomain mesh, plus the interface coupling matrix used
//! by the partitioned scheme. Semi-discrete form per subdomain:
//!
//!   M dphi/dt + (D + A) phi + G^T lambda = f
//!
//! with M_ij = (nu_j, nu_i), D_ij = kappa (grad nu_j, grad nu_i), and the
//! advection operator assembled in divergence form,
//! A_ij = -(u nu_j, grad nu_i), closed on the non-interface boundary by the
//! advective trace term  +int_Gamma (u.n) nu_j nu_i ds. The closure keeps
//! constants transported through outflow (free) boundary nodes; under
//! all-Dirichlet boundaries it touches only eliminated rows/columns, so the
//! free-node system is the classical one. G collects the interface trace
//! products (nu_j, mu_i)_gamma against the multiplier basis mu, which is the
//! shared P1 trace space of the matched grids.
//!
//! Dirichlet data enters through the lift beta (nodal boundary values, zero
//! at free nodes): matrices are assembled over all nodes, then restricted to
//! free DOFs, and the eliminated columns contribute the constant forcing
//! `dirichlet_correction = -(D_full + A_full) beta` restricted to free rows.

use nalgebra::DVector;
use sprs::TriMat;

use crate::error::{IvrError, Result};
use crate::fields::{ScalarField, VelocityField};
use crate::linalg::SpMat;
use crate::mesh::{InterfaceEdge, NodeClass, SubdomainMesh};

/// Two-point Gauss-Legendre abscissae on [-1, 1] (weights are 1); exact for
/// the bilinear-times-bilinear integrands of the Q1 operators on affine
/// cells, including the linear rotation field.
const GP2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

#[inline]
fn shape(xi: f64, eta: f64) -> [f64; 4] {
    [
        0.25 * (1.0 - xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 - eta),
        0.25 * (1.0 + xi) * (1.0 + eta),
        0.25 * (1.0 - xi) * (1.0 + eta),
    ]
}

#[inline]
fn shape_grad_ref(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

/// Free-DOF numbering of a classified mesh. Free nodes (interior +
/// interface) are numbered in ascending node order, which keeps the
/// factorization bandwidth small on the structured grid.
#[derive(Clone, Debug)]
pub struct SubdomainIndexing {
    /// free position -> node index
    pub free_to_node: Vec<usize>,
    /// node index -> free position (None for Dirichlet nodes)
    pub node_to_free: Vec<Option<usize>>,
    /// free positions of the interface nodes, ascending y
    pub interface_free: Vec<usize>,
}

impl SubdomainIndexing {
    pub fn new(mesh: &SubdomainMesh) -> Self {
        let mut free_to_node = Vec::new();
        let mut node_to_free = vec![None; mesh.n_nodes()];
        for n in 0..mesh.n_nodes() {
            if mesh.class[n] != NodeClass::Dirichlet {
                node_to_free[n] = Some(free_to_node.len());
                free_to_node.push(n);
            }
        }
        let interface_free = mesh
            .interface_nodes
            .iter()
            .map(|&n| node_to_free[n].expect("interface nodes are free by construction"))
            .collect();
        Self {
            free_to_node,
            node_to_free,
            interface_free,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free_to_node.len()
    }

    pub fn n_full(&self) -> usize {
        self.node_to_free.len()
    }

    /// Scatter a free-DOF vector into a full node vector, filling Dirichlet
    /// entries from `beta`. Free values pass through unchanged.
    pub fn lift_full(&self, free: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(free.len(), self.n_free());
        debug_assert_eq!(beta.len(), self.n_full());
        let mut full = beta.clone();
        for (fi, &n) in self.free_to_node.iter().enumerate() {
            full[n] = free[fi];
        }
        full
    }

    /// Restrict a full node vector to the free DOFs.
    pub fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(full.len(), self.n_full());
        DVector::from_fn(self.n_free(), |fi, _| full[self.free_to_node[fi]])
    }
}

/// Operators over the full node set, prior to Dirichlet elimination.
/// Used for the correction construction and by test oracles.
#[derive(Clone, Debug)]
pub struct FullOperators {
    pub mass: SpMat,
    pub diffusion: SpMat,
    pub advection: SpMat,
    pub load: DVector<f64>,
}

/// Assemble the full-node mass, diffusion, and advection operators and the
/// source load vector with 2x2 Gauss quadrature per cell.
pub fn assemble_full_operators(
    mesh: &SubdomainMesh,
    kappa: f64,
    velocity: &VelocityField,
    source: &ScalarField,
) -> Result<FullOperators> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(IvrError::InvalidArgument(format!(
            "diffusivity must be finite and nonnegative, got {kappa}"
        )));
    }
    let n = mesh.n_nodes();
    let (hx, hy) = (mesh.hx, mesh.hy);
    let jac_w = 0.25 * hx * hy;
    let (gx, gy) = (2.0 / hx, 2.0 / hy);

    let mut tm = TriMat::new((n, n));
    let mut td = TriMat::new((n, n));
    let mut ta = TriMat::new((n, n));
    let mut load = DVector::zeros(n);

    for el in &mesh.elements {
        let p0 = mesh.coords[el[0]];
        let mut m_loc = [[0.0; 4]; 4];
        let mut d_loc = [[0.0; 4]; 4];
        let mut a_loc = [[0.0; 4]; 4];
        let mut f_loc = [0.0; 4];
        for &xi in &GP2 {
            for &eta in &GP2 {
                let nsh = shape(xi, eta);
                let gref = shape_grad_ref(xi, eta);
                let x = p0[0] + 0.5 * hx * (xi + 1.0);
                let y = p0[1] + 0.5 * hy * (eta + 1.0);
                let (ux, uy) = velocity.eval(x, y);
                let s = source.eval(x, y);
                for a in 0..4 {
                    let ga = [gref[a][0] * gx, gref[a][1] * gy];
                    f_loc[a] += jac_w * s * nsh[a];
                    for b in 0..4 {
                        let gb = [gref[b][0] * gx, gref[b][1] * gy];
                        // Group the symmetric factor products first so the
                        // (a,b) and (b,a) entries round identically and the
                        // assembled matrices are symmetric to the bit.
                        m_loc[a][b] += jac_w * (nsh[a] * nsh[b]);
                        d_loc[a][b] += (jac_w * kappa) * (ga[0] * gb[0] + ga[1] * gb[1]);
                        // -(u nu_b, grad nu_a)
                        a_loc[a][b] -= jac_w * (ux * ga[0] + uy * ga[1]) * nsh[b];
                    }
                }
            }
        }
        for a in 0..4 {
            load[el[a]] += f_loc[a];
            for b in 0..4 {
                tm.add_triplet(el[a], el[b], m_loc[a][b]);
                td.add_triplet(el[a], el[b], d_loc[a][b]);
                ta.add_triplet(el[a], el[b], a_loc[a][b]);
            }
        }
    }

    // Advective boundary closure +int (u.n) nu_b nu_a over the non-interface
    // boundary (the interface trace term is carried by the multiplier).
    for (nodes, normal, len) in boundary_edges(mesh) {
        let pa = mesh.coords[nodes[0]];
        let pb = mesh.coords[nodes[1]];
        for &s in &GP2 {
            let w = 0.5 * len;
            let t = 0.5 * (s + 1.0);
            let x = pa[0] + t * (pb[0] - pa[0]);
            let y = pa[1] + t * (pb[1] - pa[1]);
            let (ux, uy) = velocity.eval(x, y);
            let un = ux * normal[0] + uy * normal[1];
            let tr = [0.5 * (1.0 - s), 0.5 * (1.0 + s)];
            for a in 0..2 {
                for b in 0..2 {
                    ta.add_triplet(nodes[a], nodes[b], w * un * tr[a] * tr[b]);
                }
            }
        }
    }

    Ok(FullOperators {
        mass: tm.to_csr(),
        diffusion: td.to_csr(),
        advection: ta.to_csr(),
        load,
    })
}

/// Non-interface boundary edges as (node pair, outward normal, length).
fn boundary_edges(mesh: &SubdomainMesh) -> Vec<([usize; 2], [f64; 2], f64)> {
    let mut edges = Vec::new();
    for i in 0..mesh.nx {
        edges.push((
            [mesh.node_index(i, 0), mesh.node_index(i + 1, 0)],
            [0.0, -1.0],
            mesh.hx,
        ));
        edges.push((
            [mesh.node_index(i, mesh.ny), mesh.node_index(i + 1, mesh.ny)],
            [0.0, 1.0],
            mesh.hx,
        ));
    }
    if mesh.interface_edge != Some(InterfaceEdge::West) {
        for j in 0..mesh.ny {
            edges.push((
                [mesh.node_index(0, j), mesh.node_index(0, j + 1)],
                [-1.0, 0.0],
                mesh.hy,
            ));
        }
    }
    if mesh.interface_edge != Some(InterfaceEdge::East) {
        for j in 0..mesh.ny {
            edges.push((
                [
                    mesh.node_index(mesh.nx, j),
                    mesh.node_index(mesh.nx, j + 1),
                ],
                [1.0, 0.0],
                mesh.hy,
            ));
        }
    }
    edges
}

/// Nodal interpolation of a scalar field at every mesh node.
pub fn nodal_values(mesh: &SubdomainMesh, f: &ScalarField) -> DVector<f64> {
    DVector::from_fn(mesh.n_nodes(), |n, _| {
        let [x, y] = mesh.coords[n];
        f.eval(x, y)
    })
}

/// Nodal interpolation restricted to the free DOFs.
pub fn nodal_values_free(
    mesh: &SubdomainMesh,
    indexing: &SubdomainIndexing,
    f: &ScalarField,
) -> DVector<f64> {
    indexing.restrict(&nodal_values(mesh, f))
}

/// Nodal Dirichlet lift: beta_i = g(x_i) at Dirichlet nodes, zero elsewhere.
pub fn build_beta(mesh: &SubdomainMesh, g: &ScalarField) -> DVector<f64> {
    let mut beta = DVector::zeros(mesh.n_nodes());
    for n in 0..mesh.n_nodes() {
        if mesh.class[n] == NodeClass::Dirichlet {
            let [x, y] = mesh.coords[n];
            beta[n] = g.eval(x, y);
        }
    }
    beta
}

/// Assemble the interface coupling matrix G (multiplier x free DOFs):
/// G_ij = (nu_j, mu_i)_gamma, the 1D P1 mass products along the interface.
/// `multiplier_y` is the multiplier grid (ascending y); it must coincide
/// with the mesh's interface nodes (matched traces).
pub fn assemble_interface_coupling(
    mesh: &SubdomainMesh,
    multiplier_y: &[f64],
) -> Result<SpMat> {
    let indexing = SubdomainIndexing::new(mesh);
    let n_gamma = mesh.interface_nodes.len();
    if multiplier_y.len() != n_gamma {
        return Err(IvrError::UnsupportedConfiguration(format!(
            "multiplier grid has {} nodes but the mesh interface has {}",
            multiplier_y.len(),
            n_gamma
        )));
    }
    for (k, &n) in mesh.interface_nodes.iter().enumerate() {
        if (mesh.coords[n][1] - multiplier_y[k]).abs() > 1e-12 {
            return Err(IvrError::UnsupportedConfiguration(format!(
                "multiplier node {k} at y = {} does not match the mesh interface node at y = {}",
                multiplier_y[k], mesh.coords[n][1]
            )));
        }
    }
    let mut tg = TriMat::new((n_gamma, indexing.n_free()));
    // Interface segments are the ny consecutive node pairs of the column.
    for k in 0..n_gamma.saturating_sub(1) {
        let len = multiplier_y[k + 1] - multiplier_y[k];
        let cols = [
            indexing.interface_free[k],
            indexing.interface_free[k + 1],
        ];
        for &s in &GP2 {
            let w = 0.5 * len;
            let tr = [0.5 * (1.0 - s), 0.5 * (1.0 + s)];
            for a in 0..2 {
                for b in 0..2 {
                    tg.add_triplet(k + a, cols[b], w * tr[a] * tr[b]);
                }
            }
        }
    }
    Ok(tg.to_csr())
}

/// Assembled, boundary-eliminated operators of one subdomain.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    /// Mass matrix on free DOFs (symmetric positive definite).
    pub mass: SpMat,
    /// Diffusion operator on free DOFs (symmetric positive semidefinite).
    pub diffusion: SpMat,
    /// Advection operator on free DOFs, including the boundary closure.
    pub advection: SpMat,
    /// Interface coupling G (multiplier x free DOFs); zero rows for
    /// uncoupled meshes.
    pub coupling: SpMat,
    /// Source load vector on free DOFs.
    pub load: DVector<f64>,
    /// Dirichlet lift over all nodes (zero at free nodes).
    pub beta: DVector<f64>,
    /// Constant forcing from eliminated Dirichlet columns,
    /// -(D_full + A_full) beta restricted to free rows.
    pub dirichlet_correction: DVector<f64>,
    pub indexing: SubdomainIndexing,
    pub kappa: f64,
}

impl OperatorSet {
    pub fn n_free(&self) -> usize {
        self.indexing.n_free()
    }

    pub fn n_multipliers(&self) -> usize {
        self.coupling.rows()
    }

    /// Modified force f~(phi) = f + dirichlet_correction - (D + A) phi.
    pub fn modified_force(&self, phi: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.load + &self.dirichlet_correction;
        crate::linalg::spmv_sub(&self.diffusion, phi, &mut out);
        crate::linalg::spmv_sub(&self.advection, phi, &mut out);
        out
    }
}

/// Assemble the complete operator set of one classified subdomain.
pub fn assemble_operators(
    mesh: &SubdomainMesh,
    kappa: f64,
    velocity: &VelocityField,
    source: &ScalarField,
    g: &ScalarField,
) -> Result<OperatorSet> {
    let full = assemble_full_operators(mesh, kappa, velocity, source)?;
    let indexing = SubdomainIndexing::new(mesh);
    let beta = build_beta(mesh, g);

    // dirichlet_correction = -(D_full + A_full) beta, free rows only.
    let mut corr_full = DVector::zeros(mesh.n_nodes());
    for (&v, (i, j)) in full.diffusion.iter().chain(full.advection.iter()) {
        if beta[j] != 0.0 {
            corr_full[i] -= v * beta[j];
        }
    }
    let dirichlet_correction = indexing.restrict(&corr_full);
    let load = indexing.restrict(&full.load);

    let restrict = |m: &SpMat| -> SpMat {
        let mut t = TriMat::new((indexing.n_free(), indexing.n_free()));
        for (&v, (i, j)) in m.iter() {
            if let (Some(fi), Some(fj)) = (indexing.node_to_free[i], indexing.node_to_free[j]) {
                t.add_triplet(fi, fj, v);
            }
        }
        t.to_csr()
    };

    let mass = restrict(&full.mass);
    let diffusion = restrict(&full.diffusion);
    let advection = restrict(&full.advection);
    let coupling = assemble_interface_coupling(mesh, &interface_y(mesh))?;

    Ok(OperatorSet {
        mass,
        diffusion,
        advection,
        coupling,
        load,
        beta,
        dirichlet_correction,
        indexing,
        kappa,
    })
}

fn interface_y(mesh: &SubdomainMesh) -> Vec<f64> {
    mesh.interface_nodes
        .iter()
        .map(|&n| mesh.coords[n][1])
        .collect()
}
