//! Structured Q1 meshes for the split unit square.
//!
//! The domain is [0,1] x [0,1], split by a vertical interface at x = split_x
//! into a left and a right subdomain. Each subdomain is a tensor grid of
//! bilinear quadrilaterals. Conventions:
//!
//! - node index = j * (nx + 1) + i, i.e. x-fastest, row-major in y;
//! - elements are stored counterclockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1);
//! - every node belongs to exactly one class: interior, Dirichlet, or
//!   interface. Interface membership is geometric and fixed at construction
//!   (the full mesh column on gamma, corners included); boundary
//!   classification may be recomputed per boundary-condition mode.

use crate::error::{IvrError, Result};
use crate::fields::VelocityField;

/// Classification of a mesh node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Dirichlet,
    Interface,
}

/// Which edge of a subdomain carries the coupling interface.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterfaceEdge {
    /// The i = nx column (left subdomain of a split domain).
    East,
    /// The i = 0 column (right subdomain of a split domain).
    West,
}

/// Boundary-condition mode for the non-interface boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcMode {
    /// Every non-interface boundary node is Dirichlet.
    AllDirichlet,
    /// Only inflow nodes (u . n < 0 on an adjacent boundary face) are
    /// Dirichlet; outflow and tangential nodes carry no condition.
    InflowOnly,
}

/// Structured quadrilateral mesh of [x0, x1] x [0, 1].
#[derive(Clone, Debug)]
pub struct SubdomainMesh {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    /// Grid spacings. Square cells (hx == hy) whenever the resolution is
    /// proportional to the subdomain width.
    pub hx: f64,
    pub hy: f64,
    /// Node coordinates, indexed j * (nx + 1) + i.
    pub coords: Vec<[f64; 2]>,
    /// Counterclockwise corner node indices per element.
    pub elements: Vec<[usize; 4]>,
    /// Per-node classification.
    pub class: Vec<NodeClass>,
    /// Interface nodes in ascending-y order (empty for uncoupled meshes).
    pub interface_nodes: Vec<usize>,
    pub interface_edge: Option<InterfaceEdge>,
    pub bc_mode: BcMode,
}

impl SubdomainMesh {
    /// Build a structured mesh with the given interface edge, classified
    /// under `bc_mode` (InflowOnly requires the velocity used for
    /// classification).
    pub fn structured(
        nx: usize,
        ny: usize,
        x0: f64,
        x1: f64,
        interface_edge: Option<InterfaceEdge>,
        bc_mode: BcMode,
        velocity: Option<&VelocityField>,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(IvrError::InvalidArgument(format!(
                "mesh resolution must be positive, got {nx}x{ny}"
            )));
        }
        if !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
            return Err(IvrError::InvalidArgument(format!(
                "invalid x-extent [{x0}, {x1}]"
            )));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = 1.0 / ny as f64;
        let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([x0 + i as f64 * hx, j as f64 * hy]);
            }
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([
                    node(i, j),
                    node(i + 1, j),
                    node(i + 1, j + 1),
                    node(i, j + 1),
                ]);
            }
        }
        let interface_nodes: Vec<usize> = match interface_edge {
            Some(InterfaceEdge::East) => (0..=ny).map(|j| node(nx, j)).collect(),
            Some(InterfaceEdge::West) => (0..=ny).map(|j| node(0, j)).collect(),
            None => Vec::new(),
        };
        let mut mesh = Self {
            nx,
            ny,
            x0,
            x1,
            hx,
            hy,
            coords,
            elements,
            class: Vec::new(),
            interface_nodes,
            interface_edge,
            bc_mode,
        };
        mesh.class = mesh.classify(bc_mode, velocity)?;
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.class[n] == NodeClass::Dirichlet)
            .collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.class[n] == NodeClass::Interior)
            .collect()
    }

    /// Free nodes (interior + interface) in ascending node order.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.class[n] != NodeClass::Dirichlet)
            .collect()
    }

    fn classify(&self, bc: BcMode, velocity: Option<&VelocityField>) -> Result<Vec<NodeClass>> {
        if bc == BcMode::InflowOnly && velocity.is_none() {
            return Err(IvrError::InvalidArgument(
                "inflow-only classification requires a velocity field".into(),
            ));
        }
        let mut class = vec![NodeClass::Interior; self.n_nodes()];
        for &n in &self.interface_nodes {
            class[n] = NodeClass::Interface;
        }
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let n = self.node_index(i, j);
                if class[n] == NodeClass::Interface {
                    continue;
                }
                let on_west = i == 0 && self.interface_edge != Some(InterfaceEdge::West);
                let on_east = i == self.nx && self.interface_edge != Some(InterfaceEdge::East);
                let on_south = j == 0;
                let on_north = j == self.ny;
                if !(on_west || on_east || on_south || on_north) {
                    continue;
                }
                let dirichlet = match bc {
                    BcMode::AllDirichlet => true,
                    BcMode::InflowOnly => {
                        let [x, y] = self.coords[n];
                        let (ux, uy) = velocity.unwrap().eval(x, y);
                        // Inflow on any adjacent non-interface boundary face.
                        (on_west && -ux < 0.0)
                            || (on_east && ux < 0.0)
                            || (on_south && -uy < 0.0)
                            || (on_north && uy < 0.0)
                    }
                };
                if dirichlet {
                    class[n] = NodeClass::Dirichlet;
                }
            }
        }
        Ok(class)
    }
}

/// Re-classify the non-interface boundary of a mesh under a new mode.
/// Geometry and interface membership are unchanged; the operation is
/// idempotent.
pub fn classify_boundary(
    mesh: &SubdomainMesh,
    bc: BcMode,
    velocity: &VelocityField,
) -> Result<SubdomainMesh> {
    let mut out = mesh.clone();
    out.bc_mode = bc;
    out.class = out.classify(bc, Some(velocity))?;
    Ok(out)
}

/// A conforming pair of subdomain meshes sharing the interface x = split_x.
#[derive(Clone, Debug)]
pub struct CoupledMesh {
    pub left: SubdomainMesh,
    pub right: SubdomainMesh,
    pub split_x: f64,
}

impl CoupledMesh {
    /// y-coordinates of the interface nodes (the discrete multiplier grid),
    /// ascending.
    pub fn interface_y(&self) -> Vec<f64> {
        self.left
            .interface_nodes
            .iter()
            .map(|&n| self.left.coords[n][1])
            .collect()
    }
}

/// Build the left/right subdomain pair for the unit square split at
/// `split_x`, with `nx` x `ny` elements per subdomain. Both subdomains share
/// the interface node set (matched grids), so the traces are conforming.
/// Boundary classification defaults to all-Dirichlet; use
/// [`classify_boundary`] to switch modes.
pub fn build_coupled_mesh(nx: usize, ny: usize, split_x: f64) -> Result<CoupledMesh> {
    if !(split_x > 0.0 && split_x < 1.0) {
        return Err(IvrError::InvalidArgument(format!(
            "split_x must lie strictly inside (0, 1), got {split_x}"
        )));
    }
    let left = SubdomainMesh::structured(
        nx,
        ny,
        0.0,
        split_x,
        Some(InterfaceEdge::East),
        BcMode::AllDirichlet,
        None,
    )?;
    let right = SubdomainMesh::structured(
        nx,
        ny,
        split_x,
        1.0,
        Some(InterfaceEdge::West),
        BcMode::AllDirichlet,
        None,
    )?;
    Ok(CoupledMesh {
        left,
        right,
        split_x,
    })
}

/// Build the single-domain mesh of the whole unit square (no interface).
pub fn build_global_mesh(nx: usize, ny: usize) -> Result<SubdomainMesh> {
    SubdomainMesh::structured(nx, ny, 0.0, 1.0, None, BcMode::AllDirichlet, None)
}

/// Map each node of `sub` to the index of the coincident node of `global`.
/// Requires the subdomain grid to be a sub-grid of the global one.
pub fn restriction_map(global: &SubdomainMesh, sub: &SubdomainMesh) -> Result<Vec<usize>> {
    let offset_f = (sub.x0 - global.x0) / global.hx;
    let offset = offset_f.round() as isize;
    if offset < 0
        || (offset_f - offset as f64).abs() > 1e-9
        || sub.ny != global.ny
        || offset as usize + sub.nx > global.nx
    {
        return Err(IvrError::UnsupportedConfiguration(
            "subdomain grid is not a sub-grid of the global mesh".into(),
        ));
    }
    let offset = offset as usize;
    let mut map = Vec::with_capacity(sub.n_nodes());
    for j in 0..=sub.ny {
        for i in 0..=sub.nx {
            let g = global.node_index(i + offset, j);
            let gc = global.coords[g];
            let sc = sub.coords[sub.node_index(i, j)];
            if (gc[0] - sc[0]).abs() > 1e-12 || (gc[1] - sc[1]).abs() > 1e-12 {
                return Err(IvrError::UnsupportedConfiguration(format!(
                    "node mismatch between global and subdomain grids at ({}, {})",
                    sc[0], sc[1]
                )));
            }
            map.push(g);
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class_count(mesh: &SubdomainMesh, c: NodeClass) -> usize {
        mesh.class.iter().filter(|&&k| k == c).count()
    }

    #[test]
    fn paper_scale_left_mesh_dimensions() {
        let cm = build_coupled_mesh(32, 64, 0.5).unwrap();
        assert_eq!(cm.left.n_nodes(), 33 * 65);
        assert!((cm.left.hx - 1.0 / 64.0).abs() < 1e-14);
        assert!((cm.left.hy - 1.0 / 64.0).abs() < 1e-14);
        assert_eq!(cm.left.interface_nodes.len(), 65);
        assert_eq!(cm.right.interface_nodes.len(), 65);
        assert_eq!(cm.left.elements.len(), 32 * 64);
    }

    #[test]
    fn smallest_mesh_has_two_interface_nodes() {
        let cm = build_coupled_mesh(1, 1, 0.5).unwrap();
        assert_eq!(cm.left.elements.len(), 1);
        assert_eq!(cm.right.elements.len(), 1);
        assert_eq!(cm.left.interface_nodes.len(), 2);
    }

    #[test]
    fn interface_nodes_sit_on_split_line_ascending() {
        let cm = build_coupled_mesh(2, 2, 0.5).unwrap();
        let ys: Vec<[f64; 2]> = cm
            .left
            .interface_nodes
            .iter()
            .map(|&n| cm.left.coords[n])
            .collect();
        assert_eq!(ys.len(), 3);
        for (k, want_y) in [(0usize, 0.0), (1, 0.5), (2, 1.0)] {
            assert!((ys[k][0] - 0.5).abs() < 1e-15);
            assert!((ys[k][1] - want_y).abs() < 1e-15);
        }
        // Matched grids: right interface coordinates coincide.
        for (l, r) in cm
            .left
            .interface_nodes
            .iter()
            .zip(cm.right.interface_nodes.iter())
        {
            assert_eq!(cm.left.coords[*l], cm.right.coords[*r]);
        }
    }

    #[test]
    fn all_dirichlet_dirichlet_count_on_2x2_left_mesh() {
        // 3x3 node grid: 8 boundary nodes, 3 of them on the interface column;
        // the interface corners stay interface, leaving 5 Dirichlet nodes.
        let cm = build_coupled_mesh(2, 2, 0.5).unwrap();
        assert_eq!(class_count(&cm.left, NodeClass::Dirichlet), 5);
        assert_eq!(class_count(&cm.left, NodeClass::Interface), 3);
        assert_eq!(class_count(&cm.left, NodeClass::Interior), 1);
    }

    #[test]
    fn every_node_in_exactly_one_class_and_union_complete() {
        let cm = build_coupled_mesh(5, 7, 0.4).unwrap();
        for mesh in [&cm.left, &cm.right] {
            let n = mesh.n_nodes();
            assert_eq!(mesh.class.len(), n);
            let parts = class_count(mesh, NodeClass::Interior)
                + class_count(mesh, NodeClass::Dirichlet)
                + class_count(mesh, NodeClass::Interface);
            assert_eq!(parts, n);
        }
    }

    #[test]
    fn element_areas_match_spacing_product() {
        let cm = build_coupled_mesh(3, 5, 0.5).unwrap();
        let mesh = &cm.right;
        for el in &mesh.elements {
            // Shoelace area of the counterclockwise quad.
            let p: Vec<[f64; 2]> = el.iter().map(|&n| mesh.coords[n]).collect();
            let mut area = 0.0;
            for k in 0..4 {
                let q = (k + 1) % 4;
                area += p[k][0] * p[q][1] - p[q][0] * p[k][1];
            }
            area *= 0.5;
            assert!((area - mesh.hx * mesh.hy).abs() < 1e-14);
        }
    }

    #[test]
    fn inflow_classification_follows_velocity_sign() {
        let u = VelocityField::rotation();
        let cm = build_coupled_mesh(4, 4, 0.5).unwrap();
        let left = classify_boundary(&cm.left, BcMode::InflowOnly, &u).unwrap();
        // On x = 0 the outward normal is (-1, 0), so u.n = y - 0.5.
        let low = left.node_index(0, 1); // (0, 0.25): inflow
        let high = left.node_index(0, 3); // (0, 0.75): outflow
        assert_eq!(left.class[low], NodeClass::Dirichlet);
        assert_eq!(left.class[high], NodeClass::Interior);
        // Tangential point (0, 0.5): u.n = 0, not inflow.
        let mid = left.node_index(0, 2);
        assert_eq!(left.class[mid], NodeClass::Interior);
    }

    #[test]
    fn classify_boundary_is_idempotent_and_preserves_interface() {
        let u = VelocityField::rotation();
        let cm = build_coupled_mesh(4, 6, 0.5).unwrap();
        let once = classify_boundary(&cm.left, BcMode::InflowOnly, &u).unwrap();
        let twice = classify_boundary(&once, BcMode::InflowOnly, &u).unwrap();
        assert_eq!(once.class, twice.class);
        assert_eq!(once.interface_nodes, cm.left.interface_nodes);
        for &n in &once.interface_nodes {
            assert_eq!(once.class[n], NodeClass::Interface);
        }
    }

    #[test]
    fn global_mesh_has_no_interface_and_full_dirichlet_ring() {
        let g = build_global_mesh(4, 4).unwrap();
        assert!(g.interface_nodes.is_empty());
        assert_eq!(class_count(&g, NodeClass::Dirichlet), 16);
        assert_eq!(class_count(&g, NodeClass::Interior), 9);
    }

    #[test]
    fn restriction_maps_align_coordinates() {
        let g = build_global_mesh(8, 4).unwrap();
        let cm = build_coupled_mesh(4, 4, 0.5).unwrap();
        let lm = restriction_map(&g, &cm.left).unwrap();
        let rm = restriction_map(&g, &cm.right).unwrap();
        assert_eq!(lm.len(), cm.left.n_nodes());
        for (s, &gi) in lm.iter().enumerate() {
            assert_eq!(g.coords[gi], cm.left.coords[s]);
        }
        for (s, &gi) in rm.iter().enumerate() {
            assert_eq!(g.coords[gi], cm.right.coords[s]);
        }
        // The two maps overlap exactly on the interface column.
        let shared_l: Vec<usize> = cm.left.interface_nodes.iter().map(|&n| lm[n]).collect();
        let shared_r: Vec<usize> = cm.right.interface_nodes.iter().map(|&n| rm[n]).collect();
        assert_eq!(shared_l, shared_r);
    }

    #[test]
    fn restriction_map_rejects_mismatched_grid() {
        let g = build_global_mesh(8, 4).unwrap();
        let cm = build_coupled_mesh(3, 4, 0.5).unwrap(); // 3 cells over [0, 0.5]: not a sub-grid
        assert!(restriction_map(&g, &cm.left).is_err());
    }

    #[test]
    fn invalid_arguments_rejected() {
        assert!(build_coupled_mesh(0, 4, 0.5).is_err());
        assert!(build_coupled_mesh(4, 4, 0.0).is_err());
        assert!(build_coupled_mesh(4, 4, 1.0).is_err());
        assert!(SubdomainMesh::structured(
            2,
            2,
            0.0,
            0.5,
            None,
            BcMode::InflowOnly,
            None
        )
        .is_err());
    }
}
