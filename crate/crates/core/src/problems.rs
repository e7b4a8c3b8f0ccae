//! Two-sub-domain problem instances: meshes, random coefficient fields,
//! boundary conditions and interface data bound into one [`CoupledProblem`],
//! plus the merged single-domain view used by the oracles.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::config::{Config, FieldModel, ProbeQuantity};
use crate::fem::{
    assemble_load, build_interface_extractors, build_rect_mesh, element_average, element_blocks,
    rigid_body_modes, Assembler, DofMap, Mesh, Physics, CONSTRAINED,
};
use crate::pc::{Family, MultiIndexSet};
use crate::random_field::{
    affine_uniform_field, discretize_kl, lognormal_pc_coefficients, GaussianKernel, RandomFieldPC,
};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SubdomainProblem {
    pub mesh: Mesh,
    pub physics: Physics,
    pub dofs: DofMap,
    /// Assembles onto the free dofs; shared by every coefficient mode.
    pub assembler: Assembler,
    pub field: RandomFieldPC,
    /// Stiffness of every PC mode of the coefficient field (common pattern).
    pub modes: Vec<CsrMatrix>,
    pub load: DVector<f64>,
    /// Free-dof index of every interface column.
    pub interface: Vec<usize>,
    /// Orthonormal null-space basis; zero columns when not floating.
    pub rigid_modes: DMatrix<f64>,
}

impl SubdomainProblem {
    pub fn n_dofs(&self) -> usize {
        self.dofs.n_free()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn floating(&self) -> bool {
        self.rigid_modes.ncols() > 0
    }

    pub fn family(&self) -> Family {
        self.field.family
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// `Cᵀu`: interface values of a sub-domain vector.
    pub fn restrict_interface(&self, u: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.interface.len(), self.interface.iter().map(|&k| u[k]))
    }

    /// `out += s · C λ`.
    pub fn scatter_interface(&self, lambda: &[f64], s: f64, out: &mut [f64]) {
        for (&k, l) in self.interface.iter().zip(lambda) {
            out[k] += s * l;
        }
    }

    /// Dense extraction matrix `C` (dofs × interface columns).
    pub fn extractor(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n_dofs(), self.interface.len());
        for (col, &k) in self.interface.iter().enumerate() {
            c[(k, col)] = 1.0;
        }
        c
    }

    /// Stiffness for a nodal coefficient field.
    pub fn stiffness_for(&self, nodal_coeff: &[f64]) -> CsrMatrix {
        self.assembler.assemble(&element_average(&self.mesh, nodal_coeff))
    }

    /// Truncated-PC stiffness `Σ_j K_j ψ_j(ξ)`.
    pub fn pc_stiffness(&self, psi: &[f64]) -> CsrMatrix {
        let mats: Vec<&CsrMatrix> = self.modes.iter().collect();
        CsrMatrix::combine(&mats, psi)
    }
}

#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub config: Config,
    pub sub: [SubdomainProblem; 2],
}

impl CoupledProblem {
    pub fn n_interface(&self) -> usize {
        self.sub[0].interface.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.sub[0].dim(), self.sub[1].dim())
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.config.pc.p1, self.config.pc.p2)
    }

    pub fn families(&self) -> Vec<Family> {
        let mut f = vec![self.sub[0].family(); self.sub[0].dim()];
        f.extend(vec![self.sub[1].family(); self.sub[1].dim()]);
        f
    }

    /// Sub-domain and free dofs read at the probe point (first sub-domain
    /// containing it). Constrained components are `None`.
    pub fn probe_dofs(&self) -> Result<(usize, Vec<Option<usize>>)> {
        let [x, y] = self.config.probe.point;
        for (i, s) in self.sub.iter().enumerate() {
            if let Some(node) = s.mesh.node_at(x, y) {
                let ncomp = s.dofs.dofs_per_node;
                let dofs = (0..ncomp).map(|c| s.dofs.reduced[node * ncomp + c]).collect();
                return Ok((i, dofs));
            }
        }
        Err(Error::Config(format!("probe point ({x}, {y}) is not a mesh node")))
    }
}

/// Evaluates the configured probe quantity from the probe dofs of a vector.
pub fn probe_value(quantity: ProbeQuantity, dofs: &[Option<usize>], u: &[f64]) -> f64 {
    let comp: Vec<f64> = dofs.iter().map(|d| d.map_or(0.0, |k| u[k])).collect();
    probe_quantity(quantity, &comp)
}

/// Probe quantity from the nodal components.
pub fn probe_quantity(quantity: ProbeQuantity, comp: &[f64]) -> f64 {
    match quantity {
        ProbeQuantity::Value => comp[0],
        ProbeQuantity::Magnitude => comp.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

/// Builds the L-shaped diffusion instance; rejects configurations of
/// another kind.
pub fn build_example_i(config: &Config) -> Result<CoupledProblem> {
    if config.field.kind != FieldModel::LognormalShifted {
        return Err(Error::Config("example I requires a lognormal-shifted field".into()));
    }
    build_problem(config)
}

/// Builds the cantilever-beam elasticity instance.
pub fn build_example_ii(config: &Config) -> Result<CoupledProblem> {
    if config.field.kind != FieldModel::AffineUniform {
        return Err(Error::Config("example II requires an affine-uniform field".into()));
    }
    build_problem(config)
}

pub fn build_problem(config: &Config) -> Result<CoupledProblem> {
    config.validate()?;
    let h = config.mesh.h1;
    let mut m1 = build_rect_mesh(config.geometry.rect1, h)?;
    let mut m2 = build_rect_mesh(config.geometry.rect2, h)?;
    let mut dir1 = m1.nodes_on(&config.bc.dirichlet1);
    let mut dir2 = m2.nodes_on(&config.bc.dirichlet2);

    let index2: HashMap<(i64, i64), usize> =
        m2.lattice.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let mut shared: Vec<(usize, usize)> = m1
        .lattice
        .iter()
        .enumerate()
        .filter_map(|(k, l)| index2.get(l).map(|&k2| (k, k2)))
        .collect();
    // a shared node constrained on either side is constrained on both
    for &(a, b) in &shared {
        if dir1.contains(&a) || dir2.contains(&b) {
            dir1.insert(a);
            dir2.insert(b);
        }
    }
    shared.retain(|(a, _)| !dir1.contains(a));
    if shared.is_empty() {
        return Err(Error::Mesh("sub-domains share no free interface node".into()));
    }
    m1.interface_nodes = shared.iter().map(|s| s.0).collect();
    m2.interface_nodes = shared.iter().map(|s| s.1).collect();

    let f = &config.field;
    let s1 = build_subdomain(
        config,
        m1,
        &dir1,
        (f.sigma1, f.lc1, f.d1, f.mean1, config.pc.p1),
        &config.bc.load1,
    )?;
    let s2 = build_subdomain(
        config,
        m2,
        &dir2,
        (f.sigma2, f.lc2, f.d2, f.mean2, config.pc.p2),
        &config.bc.load2,
    )?;
    let (c1, c2) = build_interface_extractors(&s1.mesh, &s1.dofs, &s2.mesh, &s2.dofs)?;
    let (mut s1, mut s2) = (s1, s2);
    s1.interface = c1;
    s2.interface = c2;
    if s1.floating() {
        return Err(Error::Config(
            "the first sub-domain must carry Dirichlet conditions (only the second may float)".into(),
        ));
    }
    Ok(CoupledProblem {
        config: config.clone(),
        sub: [s1, s2],
    })
}

fn build_subdomain(
    config: &Config,
    mut mesh: Mesh,
    dirichlet: &BTreeSet<usize>,
    (sigma, lc, d, mean, p): (f64, f64, usize, f64, usize),
    load: &crate::fem::LoadSpec,
) -> Result<SubdomainProblem> {
    let physics = config.physics;
    let ncomp = physics.dofs_per_node();
    mesh.interface_nodes.sort_by_key(|&n| mesh.lattice[n]);
    if let Some(n) = mesh.interface_nodes.iter().find(|n| dirichlet.contains(n)) {
        return Err(Error::InvalidInput(format!(
            "interface node {n} cannot be eliminated by a Dirichlet condition"
        )));
    }
    let constrained: BTreeSet<usize> = dirichlet
        .iter()
        .flat_map(|&n| (0..ncomp).map(move |c| n * ncomp + c))
        .collect();
    let dofs = DofMap::new(mesh.n_nodes(), ncomp, &constrained);
    if dofs.n_free() == 0 {
        return Err(Error::InvalidInput("every dof is constrained; empty system".into()));
    }
    let assembler = Assembler::reduced(&mesh, physics, &dofs)?;
    let kl = discretize_kl(&GaussianKernel::new(sigma, lc)?, &mesh, d)?;
    let field = match config.field.kind {
        FieldModel::LognormalShifted => {
            lognormal_pc_coefficients(&kl, mean, config.field.shift, 2 * p)?
        }
        FieldModel::AffineUniform => affine_uniform_field(&kl, mean)?,
    };
    let modes = (0..field.n_modes())
        .map(|j| assembler.assemble(&element_average(&mesh, &field.operator_mode(j))))
        .collect();
    let full_load = assemble_load(&mesh, physics, load)?;
    let load = DVector::from_iterator(dofs.n_free(), dofs.free.iter().map(|&k| full_load[k]));
    let rigid_modes = rigid_body_modes(&mesh, physics, &dofs);
    Ok(SubdomainProblem {
        mesh,
        physics,
        dofs,
        assembler,
        field,
        modes,
        load,
        interface: Vec::new(),
        rigid_modes,
    })
}

/// Single-domain view: merged dofs, coefficient modes extended by zero off
/// their sub-domain, expressed in the combined germ `(ξ₁, ξ₂)`.
#[derive(Debug, Clone)]
pub struct MonolithicProblem {
    pub n_dofs: usize,
    pub families: Vec<Family>,
    /// Multi-index (combined dimension) of every operator mode.
    pub mode_indices: MultiIndexSet,
    pub modes: Vec<CsrMatrix>,
    pub load: DVector<f64>,
    /// Per sub-domain: merged dof of every sub-domain free dof.
    pub restriction: [Vec<usize>; 2],
    pub assembler: Assembler,
    pub n_elements1: usize,
}

impl MonolithicProblem {
    /// Splits a merged vector into the two sub-domain vectors.
    pub fn restrict(&self, u: &[f64]) -> [DVector<f64>; 2] {
        [0, 1].map(|i| {
            DVector::from_iterator(self.restriction[i].len(), self.restriction[i].iter().map(|&k| u[k]))
        })
    }

    /// Stiffness for nodal coefficient fields given per sub-domain.
    pub fn stiffness_for(&self, problem: &CoupledProblem, c1: &[f64], c2: &[f64]) -> CsrMatrix {
        let mut e = element_average(&problem.sub[0].mesh, c1);
        e.extend(element_average(&problem.sub[1].mesh, c2));
        self.assembler.assemble(&e)
    }
}

pub fn as_monolithic(problem: &CoupledProblem) -> Result<MonolithicProblem> {
    let [s1, s2] = &problem.sub;
    let physics = s1.physics;
    let ncomp = physics.dofs_per_node();
    let n1 = s1.mesh.n_nodes();
    let lat1: HashMap<(i64, i64), usize> =
        s1.mesh.lattice.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let mut next = n1;
    let node2: Vec<usize> = s2
        .mesh
        .lattice
        .iter()
        .map(|l| {
            lat1.get(l).copied().unwrap_or_else(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    let n_nodes = next;
    let mut constrained = BTreeSet::new();
    for d in 0..s1.dofs.n_full {
        if s1.dofs.reduced[d].is_none() {
            constrained.insert(d);
        }
    }
    for d in 0..s2.dofs.n_full {
        if s2.dofs.reduced[d].is_none() {
            constrained.insert(node2[d / ncomp] * ncomp + d % ncomp);
        }
    }
    let global = DofMap::new(n_nodes, ncomp, &constrained);
    let map1 = |n: usize, c: usize| global.reduced[n * ncomp + c].unwrap_or(CONSTRAINED);
    let map2 = |n: usize, c: usize| global.reduced[node2[n] * ncomp + c].unwrap_or(CONSTRAINED);
    let mut elements = element_blocks(&s1.mesh, physics, Some(&map1))?;
    let n_elements1 = elements.len();
    elements.extend(element_blocks(&s2.mesh, physics, Some(&map2))?);
    let assembler = Assembler::from_elements(global.n_free(), &elements)?;

    let restriction = [
        s1.dofs.free.iter().map(|&d| map1(d / ncomp, d % ncomp)).collect::<Vec<_>>(),
        s2.dofs.free.iter().map(|&d| map2(d / ncomp, d % ncomp)).collect::<Vec<_>>(),
    ];
    if restriction.iter().flatten().any(|&k| k == CONSTRAINED) {
        return Err(Error::Mesh("free sub-domain dof constrained after merging".into()));
    }
    let mut load = DVector::zeros(global.n_free());
    for (i, s) in problem.sub.iter().enumerate() {
        for (k, &g) in restriction[i].iter().enumerate() {
            load[g] += s.load[k];
        }
    }

    let (d1, d2) = problem.dims();
    let ne2 = s2.mesh.triangles.len();
    let zeros1 = vec![0.0; n_elements1];
    let zeros2 = vec![0.0; ne2];
    let mut indices = Vec::new();
    let mut modes = Vec::new();
    let mut mean = element_average(&s1.mesh, &s1.field.operator_mode(0));
    mean.extend(element_average(&s2.mesh, &s2.field.operator_mode(0)));
    indices.push(vec![0u32; d1 + d2]);
    modes.push(assembler.assemble(&mean));
    for j in 1..s1.n_modes() {
        let mut idx = s1.field.index_set.get(j).to_vec();
        idx.extend(vec![0; d2]);
        indices.push(idx);
        let mut e = element_average(&s1.mesh, &s1.field.operator_mode(j));
        e.extend_from_slice(&zeros2);
        modes.push(assembler.assemble(&e));
    }
    for j in 1..s2.n_modes() {
        let mut idx = vec![0u32; d1];
        idx.extend_from_slice(s2.field.index_set.get(j));
        indices.push(idx);
        let mut e = zeros1.clone();
        e.extend(element_average(&s2.mesh, &s2.field.operator_mode(j)));
        modes.push(assembler.assemble(&e));
    }
    Ok(MonolithicProblem {
        n_dofs: global.n_free(),
        families: problem.families(),
        mode_indices: MultiIndexSet::from_list(d1 + d2, indices)?,
        modes,
        load,
        restriction,
        assembler,
        n_elements1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::BandCholesky;

    #[test]
    fn lshape_default_sizes() {
        let mut c = Config::profile("lshape").unwrap();
        c.mesh.h1 = 0.25;
        c.mesh.h2 = 0.25;
        let p = build_example_i(&c).unwrap();
        assert_eq!(p.dims(), (4, 6));
        assert_eq!(crate::pc::cardinality(4, 3).unwrap(), 35);
        assert_eq!(crate::pc::cardinality(6, 3).unwrap(), 84);
        assert!(!p.sub[0].floating() && !p.sub[1].floating());
        // the corner (2, 1) is a Dirichlet node on both sides
        assert_eq!(p.n_interface(), 4);
        assert!(build_example_ii(&c).is_err());
    }

    #[test]
    fn beam_desk_floating() {
        let p = build_example_ii(&Config::profile("beam-desk").unwrap()).unwrap();
        assert_eq!(p.sub[1].rigid_modes.ncols(), 3);
        assert_eq!(p.n_interface(), 2 * 6);
        let k = p.sub[1].modes[0].to_dense();
        assert!((&k * &p.sub[1].rigid_modes).amax() < 1e-10 * k.amax());
    }

    #[test]
    fn monolithic_dof_count_and_spd() {
        let p = build_example_i(&Config::profile("lshape-desk").unwrap()).unwrap();
        let m = as_monolithic(&p).unwrap();
        assert_eq!(m.n_dofs, p.sub[0].n_dofs() + p.sub[1].n_dofs() - p.n_interface());
        assert!(BandCholesky::factor(&m.modes[0]).is_ok());
        assert_eq!(m.modes.len(), p.sub[0].n_modes() + p.sub[1].n_modes() - 1);
    }

    #[test]
    fn beam_clamp_reaction_balances_traction() {
        let c = Config::profile("beam-desk").unwrap().with_sigma(0.0);
        let p = build_example_ii(&c).unwrap();
        let m = as_monolithic(&p).unwrap();
        let u = BandCholesky::factor(&m.modes[0]).unwrap().solve(&m.load);
        let s1 = &p.sub[0];
        let u1 = s1.dofs.expand(m.restrict(u.as_slice())[0].as_slice());
        let full = Assembler::new(&s1.mesh, s1.physics).unwrap();
        let k = full.assemble(&element_average(&s1.mesh, &s1.field.operator_mode(0)));
        let f = assemble_load(&s1.mesh, s1.physics, &c.bc.load1).unwrap();
        let r = k.mul_vec(&DVector::from_vec(u1)) - f;
        let (mut rx, mut ry) = (0.0, 0.0);
        for d in (0..s1.dofs.n_full).filter(|&d| s1.dofs.reduced[d].is_none()) {
            if d % 2 == 0 {
                rx += r[d];
            } else {
                ry += r[d];
            }
        }
        assert!(rx.abs() < 1e-10, "{rx}");
        assert!((ry - 0.5).abs() < 1e-10, "{ry}");
    }
}
