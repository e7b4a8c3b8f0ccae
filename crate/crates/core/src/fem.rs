//! Structured linear-triangle meshes and finite element assembly for scalar
//! diffusion and plane-strain elasticity.
//!
//! Node coordinates are generated from integer lattice indices, `x = i·h`, so
//! two meshes sharing an edge produce bit-identical interface coordinates.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::orthonormalize_columns;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn centroid(&self) -> [f64; 2] {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub h: f64,
    pub rect: Rect,
    pub lattice: Vec<(i64, i64)>,
    pub coords: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<(usize, usize, Side)>,
    /// Nodes shared with the neighbouring sub-domain (set by the problem builder).
    pub interface_nodes: Vec<usize>,
}

fn lattice_index(v: f64, h: f64, what: &str) -> Result<i64> {
    let k = (v / h).round();
    if (k * h - v).abs() > 1e-9 * v.abs().max(1.0) {
        return Err(Error::Mesh(format!(
            "{what} = {v} is not a multiple of h = {h}"
        )));
    }
    Ok(k as i64)
}

/// Uniform right-triangle mesh of an axis-aligned rectangle.
pub fn build_rect_mesh(rect: Rect, h: f64) -> Result<Mesh> {
    if !(h > 0.0) || rect.x1 <= rect.x0 || rect.y1 <= rect.y0 {
        return Err(Error::Mesh(format!("degenerate rectangle {rect:?} or h = {h}")));
    }
    let ix0 = lattice_index(rect.x0, h, "x0")?;
    let ix1 = lattice_index(rect.x1, h, "x1")?;
    let iy0 = lattice_index(rect.y0, h, "y0")?;
    let iy1 = lattice_index(rect.y1, h, "y1")?;
    let (nx, ny) = ((ix1 - ix0) as usize, (iy1 - iy0) as usize);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut lattice = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            lattice.push((ix0 + i as i64, iy0 + j as i64));
        }
    }
    let coords = lattice
        .iter()
        .map(|&(i, j)| [i as f64 * h, j as f64 * h])
        .collect();
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut boundary_edges = Vec::new();
    for i in 0..nx {
        boundary_edges.push((id(i, 0), id(i + 1, 0), Side::Bottom));
        boundary_edges.push((id(i + 1, ny), id(i, ny), Side::Top));
    }
    for j in 0..ny {
        boundary_edges.push((id(0, j + 1), id(0, j), Side::Left));
        boundary_edges.push((id(nx, j), id(nx, j + 1), Side::Right));
    }
    Ok(Mesh {
        h,
        rect,
        lattice,
        coords,
        triangles,
        boundary_edges,
        interface_nodes: Vec::new(),
    })
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.coords[a], self.coords[b], self.coords[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn nodes_on(&self, sides: &[Side]) -> BTreeSet<usize> {
        self.boundary_edges
            .iter()
            .filter(|e| sides.contains(&e.2))
            .flat_map(|e| [e.0, e.1])
            .collect()
    }

    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let key = ((x / self.h).round() as i64, (y / self.h).round() as i64);
        self.lattice.iter().position(|&l| l == key)
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.n_nodes() as f64;
        let s = self
            .coords
            .iter()
            .fold([0.0, 0.0], |acc, c| [acc[0] + c[0], acc[1] + c[1]]);
        [s[0] / n, s[1] / n]
    }

    /// Plain-text export: nodes, triangles, tagged boundary edges, interface nodes.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "nodes {}", self.n_nodes()).unwrap();
        for c in &self.coords {
            writeln!(s, "{} {}", c[0], c[1]).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "tags {}", self.boundary_edges.len()).unwrap();
        for (a, b, side) in &self.boundary_edges {
            let name = serde_json::to_value(side).unwrap();
            writeln!(s, "{a} {b} {}", name.as_str().unwrap()).unwrap();
        }
        writeln!(s, "interface {}", self.interface_nodes.len()).unwrap();
        for n in &self.interface_nodes {
            writeln!(s, "{n}").unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Physics {
    Diffusion,
    /// Plane strain with Poisson ratio `nu`.
    Elasticity { nu: f64 },
}

impl Physics {
    pub fn dofs_per_node(&self) -> usize {
        match self {
            Physics::Diffusion => 1,
            Physics::Elasticity { .. } => 2,
        }
    }
}

/// Gradients of the three linear shape functions, `(∂N/∂x, ∂N/∂y)`.
fn shape_gradients(mesh: &Mesh, t: usize) -> Result<([f64; 3], [f64; 3], f64)> {
    let [a, b, c] = mesh.triangles[t];
    let (p, q, r) = (mesh.coords[a], mesh.coords[b], mesh.coords[c]);
    let area = mesh.triangle_area(t);
    if !(area > 0.0) {
        return Err(Error::Mesh(format!("triangle {t} has non-positive area {area}")));
    }
    let two_a = 2.0 * area;
    let bx = [(q[1] - r[1]) / two_a, (r[1] - p[1]) / two_a, (p[1] - q[1]) / two_a];
    let by = [(r[0] - q[0]) / two_a, (p[0] - r[0]) / two_a, (q[0] - p[0]) / two_a];
    Ok((bx, by, area))
}

/// Marker for a dof removed by a Dirichlet condition.
pub const CONSTRAINED: usize = usize::MAX;

/// Element matrices for unit coefficient plus the scatter map into one shared
/// CSR pattern, so every coefficient mode assembles onto identical structure.
#[derive(Debug, Clone)]
pub struct Assembler {
    pub n_dofs: usize,
    pattern: CsrMatrix,
    /// per element: (value slot, unit-coefficient entry)
    scatter: Vec<Vec<(usize, f64)>>,
}

impl Assembler {
    pub fn new(mesh: &Mesh, physics: Physics) -> Result<Self> {
        Self::from_elements(mesh.n_nodes() * physics.dofs_per_node(), &element_blocks(mesh, physics, None)?)
    }

    /// Assembles directly on the free dofs of `dofs`.
    pub fn reduced(mesh: &Mesh, physics: Physics, dofs: &DofMap) -> Result<Self> {
        let map = |n: usize, c: usize| dofs.reduced[n * dofs.dofs_per_node + c].unwrap_or(CONSTRAINED);
        Self::from_elements(dofs.n_free(), &element_blocks(mesh, physics, Some(&map))?)
    }

    /// `elements[e] = (global dofs, dense unit element matrix)`; dofs equal to
    /// [`CONSTRAINED`] are dropped.
    pub fn from_elements(n_dofs: usize, elements: &[(Vec<usize>, DMatrix<f64>)]) -> Result<Self> {
        let mut trip = Vec::new();
        for (dofs, _) in elements {
            for &i in dofs.iter().filter(|&&i| i != CONSTRAINED) {
                for &j in dofs.iter().filter(|&&j| j != CONSTRAINED) {
                    trip.push((i, j, 0.0));
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(n_dofs, n_dofs, &trip);
        let slot = |i: usize, j: usize| -> usize {
            let (s, e) = (pattern.indptr[i], pattern.indptr[i + 1]);
            s + pattern.indices[s..e].binary_search(&j).expect("pattern entry")
        };
        let scatter = elements
            .iter()
            .map(|(dofs, ke)| {
                let mut v = Vec::with_capacity(dofs.len() * dofs.len());
                for (a, &i) in dofs.iter().enumerate() {
                    for (b, &j) in dofs.iter().enumerate() {
                        if i == CONSTRAINED || j == CONSTRAINED {
                            continue;
                        }
                        v.push((slot(i, j), ke[(a, b)]));
                    }
                }
                v
            })
            .collect();
        Ok(Self {
            n_dofs,
            pattern,
            scatter,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.scatter.len()
    }

    /// `K = Σ_e c_e K_e` with one coefficient per element.
    pub fn assemble(&self, element_coeffs: &[f64]) -> CsrMatrix {
        assert_eq!(element_coeffs.len(), self.scatter.len());
        let mut values = vec![0.0; self.pattern.nnz()];
        for (entries, &c) in self.scatter.iter().zip(element_coeffs) {
            if c == 0.0 {
                continue;
            }
            for &(k, v) in entries {
                values[k] += c * v;
            }
        }
        self.pattern.with_values(values)
    }
}

/// Unit-coefficient element matrices with their global dof lists.
/// `dof_of` overrides the node → dof numbering (used for merged meshes).
pub fn element_blocks(
    mesh: &Mesh,
    physics: Physics,
    dof_of: Option<&dyn Fn(usize, usize) -> usize>,
) -> Result<Vec<(Vec<usize>, DMatrix<f64>)>> {
    let ncomp = physics.dofs_per_node();
    let default = |n: usize, c: usize| n * ncomp + c;
    let mut out = Vec::with_capacity(mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let (bx, by, area) = shape_gradients(mesh, t)?;
        let nodes = mesh.triangles[t];
        let dofs: Vec<usize> = nodes
            .iter()
            .flat_map(|&n| (0..ncomp).map(move |c| (n, c)))
            .map(|(n, c)| match dof_of {
                Some(f) => f(n, c),
                None => default(n, c),
            })
            .collect();
        let ke = match physics {
            Physics::Diffusion => DMatrix::from_fn(3, 3, |m, n| area * (bx[m] * bx[n] + by[m] * by[n])),
            Physics::Elasticity { nu } => {
                if !(nu > 0.0 && nu < 0.5) {
                    return Err(Error::InvalidInput(format!(
                        "Poisson ratio {nu} outside (0, 0.5)"
                    )));
                }
                let b = strain_matrix(&bx, &by);
                let d = plane_strain_matrix(1.0, nu);
                (b.transpose() * d * b) * area
            }
        };
        out.push((dofs, ke));
    }
    Ok(out)
}

/// Engineering strain `(e11, e22, 2 e12)` from nodal displacements `(u1x, u1y, …)`.
pub fn strain_matrix(bx: &[f64; 3], by: &[f64; 3]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(3, 6);
    for k in 0..3 {
        b[(0, 2 * k)] = bx[k];
        b[(1, 2 * k + 1)] = by[k];
        b[(2, 2 * k)] = by[k];
        b[(2, 2 * k + 1)] = bx[k];
    }
    b
}

/// `σ = E/(1+ν) (e + ν/(1−2ν) tr(e) I)` in Voigt form acting on engineering strain.
pub fn plane_strain_matrix(e: f64, nu: f64) -> DMatrix<f64> {
    let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    DMatrix::from_row_slice(
        3,
        3,
        &[
            c * (1.0 - nu),
            c * nu,
            0.0,
            c * nu,
            c * (1.0 - nu),
            0.0,
            0.0,
            0.0,
            c * (1.0 - 2.0 * nu) / 2.0,
        ],
    )
}

/// Centroid (one-point) value of a nodal field on every triangle.
pub fn element_average(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    mesh.triangles
        .iter()
        .map(|t| (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0)
        .collect()
}

/// `K_j[m,n] = ∫ κ_j ∇N_m·∇N_n` with κ_j evaluated at triangle centroids.
pub fn assemble_diffusion_mode(mesh: &Mesh, coeff: &[f64]) -> Result<CsrMatrix> {
    if coeff.len() != mesh.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            got: coeff.len(),
        });
    }
    let asm = Assembler::new(mesh, Physics::Diffusion)?;
    Ok(asm.assemble(&element_average(mesh, coeff)))
}

/// Plane-strain stiffness for a nodal Young's modulus mode.
pub fn assemble_elasticity_mode(mesh: &Mesh, modulus: &[f64], nu: f64) -> Result<CsrMatrix> {
    if coeff_len_mismatch(mesh, modulus) {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_nodes(),
            got: modulus.len(),
        });
    }
    let asm = Assembler::new(mesh, Physics::Elasticity { nu })?;
    Ok(asm.assemble(&element_average(mesh, modulus)))
}

fn coeff_len_mismatch(mesh: &Mesh, v: &[f64]) -> bool {
    v.len() != mesh.n_nodes()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    /// Constant body force per component (length = dofs per node).
    #[serde(default)]
    pub body: Vec<f64>,
    /// Constant traction per component applied on the listed sides.
    #[serde(default)]
    pub traction: Vec<f64>,
    #[serde(default)]
    pub traction_sides: Vec<Side>,
}

/// Consistent load: body term `f·area/3` per vertex, edge traction by the
/// trapezoidal rule.
pub fn assemble_load(mesh: &Mesh, physics: Physics, load: &LoadSpec) -> Result<DVector<f64>> {
    let ncomp = physics.dofs_per_node();
    let mut f = DVector::zeros(mesh.n_nodes() * ncomp);
    if !load.body.is_empty() {
        if load.body.len() != ncomp {
            return Err(Error::DimensionMismatch {
                expected: ncomp,
                got: load.body.len(),
            });
        }
        for t in 0..mesh.triangles.len() {
            let area = mesh.triangle_area(t);
            for &n in &mesh.triangles[t] {
                for c in 0..ncomp {
                    f[n * ncomp + c] += load.body[c] * area / 3.0;
                }
            }
        }
    }
    if !load.traction_sides.is_empty() {
        if load.traction.len() != ncomp {
            return Err(Error::DimensionMismatch {
                expected: ncomp,
                got: load.traction.len(),
            });
        }
        for side in &load.traction_sides {
            let edges: Vec<_> = mesh.boundary_edges.iter().filter(|e| e.2 == *side).collect();
            if edges.is_empty() {
                return Err(Error::Mesh(format!("traction on untagged side {side:?}")));
            }
            for &&(a, b, _) in &edges {
                let (p, q) = (mesh.coords[a], mesh.coords[b]);
                let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                for c in 0..ncomp {
                    f[a * ncomp + c] += 0.5 * len * load.traction[c];
                    f[b * ncomp + c] += 0.5 * len * load.traction[c];
                }
            }
        }
    }
    Ok(f)
}

/// Map between full (all node) dofs and the free dofs left after Dirichlet
/// elimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofMap {
    pub dofs_per_node: usize,
    pub n_full: usize,
    /// full dof index of every free dof
    pub free: Vec<usize>,
    /// reduced index per full dof, `None` when constrained
    pub reduced: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(n_nodes: usize, dofs_per_node: usize, constrained: &BTreeSet<usize>) -> Self {
        let n_full = n_nodes * dofs_per_node;
        let mut reduced = vec![None; n_full];
        let mut free = Vec::new();
        for (d, slot) in reduced.iter_mut().enumerate() {
            if !constrained.contains(&d) {
                *slot = Some(free.len());
                free.push(d);
            }
        }
        Self {
            dofs_per_node,
            n_full,
            free,
            reduced,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Expands a reduced vector to all nodes, zeros at constrained dofs.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_full];
        for (k, &d) in self.free.iter().enumerate() {
            full[d] = u[k];
        }
        full
    }
}

/// Result of Dirichlet elimination applied consistently to all operators.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub dofs: DofMap,
    pub modes: Vec<CsrMatrix>,
    pub load: DVector<f64>,
}

/// Eliminates the dofs of `dirichlet_nodes` (all components) from every mode
/// matrix and the load. Interface dofs must stay free.
pub fn apply_dirichlet(
    mesh: &Mesh,
    physics: Physics,
    modes: &[CsrMatrix],
    load: &DVector<f64>,
    dirichlet_nodes: &BTreeSet<usize>,
) -> Result<Reduced> {
    let ncomp = physics.dofs_per_node();
    if let Some(n) = mesh.interface_nodes.iter().find(|n| dirichlet_nodes.contains(n)) {
        return Err(Error::InvalidInput(format!(
            "interface node {n} cannot be eliminated by a Dirichlet condition"
        )));
    }
    let constrained: BTreeSet<usize> = dirichlet_nodes
        .iter()
        .flat_map(|&n| (0..ncomp).map(move |c| n * ncomp + c))
        .collect();
    let dofs = DofMap::new(mesh.n_nodes(), ncomp, &constrained);
    if dofs.n_free() == 0 {
        return Err(Error::InvalidInput("every dof is constrained; empty system".into()));
    }
    let modes = modes.iter().map(|k| k.principal_submatrix(&dofs.free)).collect();
    let load = DVector::from_iterator(dofs.n_free(), dofs.free.iter().map(|&d| load[d]));
    Ok(Reduced { dofs, modes, load })
}

/// Interface extraction maps: for every interface column, the reduced dof
/// index in each sub-domain. Columns are ordered by lattice position and
/// component, identically for both sides.
pub fn build_interface_extractors(
    mesh1: &Mesh,
    dofs1: &DofMap,
    mesh2: &Mesh,
    dofs2: &DofMap,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if dofs1.dofs_per_node != dofs2.dofs_per_node {
        return Err(Error::InvalidInput("sub-domains use different dof layouts".into()));
    }
    let ncomp = dofs1.dofs_per_node;
    let key_of = |m: &Mesh| -> HashMap<(i64, i64), usize> {
        m.interface_nodes.iter().map(|&n| (m.lattice[n], n)).collect()
    };
    let (k1, k2) = (key_of(mesh1), key_of(mesh2));
    let mut keys: Vec<(i64, i64)> = k1.keys().copied().collect();
    keys.sort();
    if k1.len() != k2.len() {
        return Err(Error::Mesh(format!(
            "interface node counts differ ({} vs {})",
            k1.len(),
            k2.len()
        )));
    }
    let (mut c1, mut c2) = (Vec::new(), Vec::new());
    for key in keys {
        let n2 = *k2
            .get(&key)
            .ok_or_else(|| Error::Mesh(format!("unmatched interface node at lattice {key:?}")))?;
        let n1 = k1[&key];
        if mesh1.coords[n1] != mesh2.coords[n2] {
            return Err(Error::Mesh(format!("interface coordinates differ at {key:?}")));
        }
        for c in 0..ncomp {
            let r1 = dofs1.reduced[n1 * ncomp + c]
                .ok_or_else(|| Error::Mesh("constrained interface dof".into()))?;
            let r2 = dofs2.reduced[n2 * ncomp + c]
                .ok_or_else(|| Error::Mesh("constrained interface dof".into()))?;
            c1.push(r1);
            c2.push(r2);
        }
    }
    Ok((c1, c2))
}

/// Null-space basis of a floating sub-domain: the constant for diffusion;
/// two translations and the rotation about the centroid for elasticity.
/// Columns are orthonormal. Returns an empty matrix when any dof is constrained.
pub fn rigid_body_modes(mesh: &Mesh, physics: Physics, dofs: &DofMap) -> DMatrix<f64> {
    let n = dofs.n_free();
    if n != dofs.n_full {
        return DMatrix::zeros(n, 0);
    }
    let raw = match physics {
        Physics::Diffusion => DMatrix::from_element(n, 1, 1.0),
        Physics::Elasticity { .. } => {
            let c = mesh.centroid();
            let mut r = DMatrix::zeros(n, 3);
            for (k, &d) in dofs.free.iter().enumerate() {
                let (node, comp) = (d / 2, d % 2);
                let x = mesh.coords[node];
                r[(k, comp)] = 1.0;
                r[(k, 2)] = if comp == 0 { -(x[1] - c[1]) } else { x[0] - c[0] };
            }
            r
        }
    };
    orthonormalize_columns(&raw, 1e-12)
}

/// Consistent mass matrix of linear triangles.
pub fn mass_matrix(mesh: &Mesh) -> CsrMatrix {
    let mut trip = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.triangle_area(t);
        for (a, &i) in tri.iter().enumerate() {
            for (b, &j) in tri.iter().enumerate() {
                let w = if a == b { 2.0 } else { 1.0 };
                trip.push((i, j, w * area / 12.0));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_nodes(), mesh.n_nodes(), &trip)
}
