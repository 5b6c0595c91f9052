//! Spatial discretization: uniform P1 finite elements on the unit interval
//! and the unit square with zero Dirichlet boundary, operator assembly, and
//! the weak-form Poisson solve used as preconditioner.

use crate::error::{Error, Result};
use crate::linalg::{BandCholesky, BandMatrix};

/// Uniform mesh of [0,1] (1D) or [0,1]^2 (2D, right-triangle pairs obtained
/// by splitting each cell along the diagonal from upper-left to lower-right).
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dimension: usize,
    /// Subdivisions per side.
    pub subdivisions: usize,
    /// Node coordinates, lexicographic: 1D by x; 2D by (y, x), x fastest.
    pub nodes: Vec<(f64, f64)>,
    /// Node ids of interior (non-Dirichlet) nodes, ascending.
    pub interior: Vec<usize>,
    /// Node id -> interior index.
    pub interior_index: Vec<Option<usize>>,
}

/// Build the uniform mesh with `m` subdivisions per side.
pub fn build_mesh(dimension: usize, m: usize) -> Result<Mesh> {
    if m < 2 {
        return Err(Error::MeshSize(format!(
            "need at least 2 subdivisions per side, got {m}"
        )));
    }
    let h = 1.0 / m as f64;
    let (nodes, is_interior): (Vec<(f64, f64)>, Vec<bool>) = match dimension {
        1 => (0..=m)
            .map(|i| ((i as f64 * h, 0.0), i > 0 && i < m))
            .unzip(),
        2 => {
            let mut nodes = Vec::with_capacity((m + 1) * (m + 1));
            let mut inner = Vec::with_capacity((m + 1) * (m + 1));
            for j in 0..=m {
                for i in 0..=m {
                    nodes.push((i as f64 * h, j as f64 * h));
                    inner.push(i > 0 && i < m && j > 0 && j < m);
                }
            }
            (nodes, inner)
        }
        d => return Err(Error::Domain(format!("dimension {d} not supported"))),
    };
    let mut interior = Vec::new();
    let mut interior_index = vec![None; nodes.len()];
    for (id, &inside) in is_interior.iter().enumerate() {
        if inside {
            interior_index[id] = Some(interior.len());
            interior.push(id);
        }
    }
    Ok(Mesh {
        dimension,
        subdivisions: m,
        nodes,
        interior,
        interior_index,
    })
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.subdivisions as f64
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.interior_index[node].is_none()
    }

    /// Element connectivity: intervals in 1D, triangles in 2D (each square
    /// cell split along its upper-left / lower-right diagonal).
    pub fn elements(&self) -> Vec<Vec<usize>> {
        let m = self.subdivisions;
        match self.dimension {
            1 => (0..m).map(|i| vec![i, i + 1]).collect(),
            _ => {
                let stride = m + 1;
                let mut elems = Vec::with_capacity(2 * m * m);
                for j in 0..m {
                    for i in 0..m {
                        let ll = j * stride + i;
                        let lr = ll + 1;
                        let ul = ll + stride;
                        let ur = ul + 1;
                        elems.push(vec![ll, lr, ul]);
                        elems.push(vec![lr, ur, ul]);
                    }
                }
                elems
            }
        }
    }

    /// Band width of interior-node operators under lexicographic ordering.
    pub fn interior_bandwidth(&self) -> usize {
        match self.dimension {
            1 => 1,
            _ => self.subdivisions - 1,
        }
    }
}

/// Nodal coefficient vector on a mesh (u, q, g, u0, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![0.0; mesh.node_count()],
        }
    }

    /// Nodal interpolant of a closed form.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            values: mesh.nodes.iter().map(|&(x, y)| f(x, y)).collect(),
        }
    }

    /// Nodal interpolant with boundary nodes forced to the Dirichlet value 0.
    pub fn from_fn_dirichlet(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut field = Self::from_fn(mesh, f);
        field.project_dirichlet(mesh);
        field
    }

    pub fn project_dirichlet(&mut self, mesh: &Mesh) {
        for (id, v) in self.values.iter_mut().enumerate() {
            if mesh.is_boundary(id) {
                *v = 0.0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Interior entries in interior-index order.
    pub fn interior_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior.iter().map(|&id| self.values[id]).collect()
    }

    /// Build a field from interior values, boundary zero.
    pub fn from_interior(mesh: &Mesh, interior: &[f64]) -> Self {
        assert_eq!(interior.len(), mesh.interior.len());
        let mut values = vec![0.0; mesh.node_count()];
        for (k, &id) in mesh.interior.iter().enumerate() {
            values[id] = interior[k];
        }
        Self { values }
    }
}

/// Assembled operator over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Stiffness,
    Mass,
    WeightedMass,
}

#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub kind: OperatorKind,
    pub symmetric: bool,
    pub band: BandMatrix,
}

/// What to assemble; the weighted mass carries the P1-interpolated weight.
pub enum AssemblyKind<'a> {
    Stiffness,
    Mass,
    WeightedMass(&'a NodalField),
}

/// Assemble a P1 operator restricted to interior nodes.
pub fn assemble(mesh: &Mesh, kind: AssemblyKind<'_>) -> Result<SparseOperator> {
    if let AssemblyKind::WeightedMass(q) = &kind {
        if q.len() != mesh.node_count() {
            return Err(Error::IncompatibleMesh(format!(
                "weight has {} values, mesh has {} nodes",
                q.len(),
                mesh.node_count()
            )));
        }
    }
    let n = mesh.interior.len();
    let mut band = BandMatrix::zeros(n, mesh.interior_bandwidth().min(n.saturating_sub(1)).max(1));
    let h = mesh.spacing();

    for elem in mesh.elements() {
        let local = local_matrix(mesh, &elem, h, &kind);
        for (li, &gi) in elem.iter().enumerate() {
            let Some(ii) = mesh.interior_index[gi] else {
                continue;
            };
            for (lj, &gj) in elem.iter().enumerate().take(li + 1) {
                let Some(jj) = mesh.interior_index[gj] else {
                    continue;
                };
                band.add(ii.max(jj), ii.min(jj), local[li][lj]);
            }
        }
    }
    let op_kind = match kind {
        AssemblyKind::Stiffness => OperatorKind::Stiffness,
        AssemblyKind::Mass => OperatorKind::Mass,
        AssemblyKind::WeightedMass(_) => OperatorKind::WeightedMass,
    };
    Ok(SparseOperator {
        kind: op_kind,
        symmetric: true,
        band,
    })
}

fn local_matrix(mesh: &Mesh, elem: &[usize], h: f64, kind: &AssemblyKind<'_>) -> Vec<Vec<f64>> {
    match mesh.dimension {
        1 => {
            let (a, b) = (elem[0], elem[1]);
            match kind {
                AssemblyKind::Stiffness => {
                    let k = 1.0 / h;
                    vec![vec![k, -k], vec![-k, k]]
                }
                AssemblyKind::Mass => {
                    vec![vec![h / 3.0, h / 6.0], vec![h / 6.0, h / 3.0]]
                }
                AssemblyKind::WeightedMass(q) => {
                    let (qa, qb) = (q.values[a], q.values[b]);
                    vec![
                        vec![h * (3.0 * qa + qb) / 12.0, h * (qa + qb) / 12.0],
                        vec![h * (qa + qb) / 12.0, h * (qa + 3.0 * qb) / 12.0],
                    ]
                }
            }
        }
        _ => {
            let p: Vec<(f64, f64)> = elem.iter().map(|&id| mesh.nodes[id]).collect();
            let det = (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
            let area = 0.5 * det.abs();
            match kind {
                AssemblyKind::Stiffness => {
                    // Gradient coefficients of the barycentric basis.
                    let b = [p[1].1 - p[2].1, p[2].1 - p[0].1, p[0].1 - p[1].1];
                    let c = [p[2].0 - p[1].0, p[0].0 - p[2].0, p[1].0 - p[0].0];
                    let scale = 1.0 / (4.0 * area);
                    (0..3)
                        .map(|i| (0..3).map(|j| scale * (b[i] * b[j] + c[i] * c[j])).collect())
                        .collect()
                }
                AssemblyKind::Mass => (0..3)
                    .map(|i| {
                        (0..3)
                            .map(|j| if i == j { area / 6.0 } else { area / 12.0 })
                            .collect()
                    })
                    .collect(),
                AssemblyKind::WeightedMass(q) => {
                    // int phi_i phi_j phi_k = area/10 (all equal), area/30
                    // (two equal), area/60 (all distinct).
                    let qv = [q.values[elem[0]], q.values[elem[1]], q.values[elem[2]]];
                    (0..3)
                        .map(|i| {
                            (0..3)
                                .map(|j| {
                                    (0..3)
                                        .map(|k| {
                                            let w = if i == j && j == k {
                                                area / 10.0
                                            } else if i == j || j == k || i == k {
                                                area / 30.0
                                            } else {
                                                area / 60.0
                                            };
                                            qv[k] * w
                                        })
                                        .sum()
                                })
                                .collect()
                        })
                        .collect()
                }
            }
        }
    }
}

/// Consistent mass application over all nodes (boundary included).
pub fn apply_mass_full(mesh: &Mesh, f: &NodalField) -> Vec<f64> {
    let h = mesh.spacing();
    let mut out = vec![0.0; mesh.node_count()];
    for elem in mesh.elements() {
        match mesh.dimension {
            1 => {
                let (a, b) = (elem[0], elem[1]);
                out[a] += h / 3.0 * f.values[a] + h / 6.0 * f.values[b];
                out[b] += h / 6.0 * f.values[a] + h / 3.0 * f.values[b];
            }
            _ => {
                let p: Vec<(f64, f64)> = elem.iter().map(|&id| mesh.nodes[id]).collect();
                let det =
                    (p[1].0 - p[0].0) * (p[2].1 - p[0].1) - (p[2].0 - p[0].0) * (p[1].1 - p[0].1);
                let area = 0.5 * det.abs();
                for (li, &gi) in elem.iter().enumerate() {
                    for (lj, &gj) in elem.iter().enumerate() {
                        let w = if li == lj { area / 6.0 } else { area / 12.0 };
                        out[gi] += w * f.values[gj];
                    }
                }
            }
        }
    }
    out
}

/// L2(Omega) norm via the consistent mass matrix (boundary included).
pub fn l2_norm(mesh: &Mesh, f: &NodalField) -> f64 {
    let mf = apply_mass_full(mesh, f);
    mf.iter()
        .zip(&f.values)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// Maximum nodal absolute value.
pub fn sup_norm(f: &NodalField) -> f64 {
    f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Sample a fine-mesh field at the coincident nodes of a coarse mesh.
pub fn restrict(f_fine: &NodalField, mesh_fine: &Mesh, mesh_coarse: &Mesh) -> Result<NodalField> {
    if mesh_fine.dimension != mesh_coarse.dimension {
        return Err(Error::IncompatibleMesh(
            "dimension mismatch between fine and coarse meshes".into(),
        ));
    }
    let mf = mesh_fine.subdivisions;
    let mc = mesh_coarse.subdivisions;
    if mf % mc != 0 {
        return Err(Error::IncompatibleMesh(format!(
            "fine subdivisions {mf} not a multiple of coarse {mc}"
        )));
    }
    let r = mf / mc;
    let values = match mesh_fine.dimension {
        1 => (0..=mc).map(|i| f_fine.values[i * r]).collect(),
        _ => {
            let stride_f = mf + 1;
            let mut v = Vec::with_capacity((mc + 1) * (mc + 1));
            for j in 0..=mc {
                for i in 0..=mc {
                    v.push(f_fine.values[j * r * stride_f + i * r]);
                }
            }
            v
        }
    };
    Ok(NodalField { values })
}

/// L2 projection of a closed form onto the zero-Dirichlet P1 space: solve
/// M w = (f, phi_i) over interior nodes. Unlike the nodal interpolant this
/// keeps the mass of data that is nonzero on the boundary, instead of
/// dropping it in an h-dependent way.
pub fn l2_project_dirichlet(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Result<NodalField> {
    let mut load = vec![0.0; mesh.node_count()];
    let h = mesh.spacing();
    match mesh.dimension {
        1 => {
            // 5-point Gauss-Legendre per interval.
            let gp = [
                -0.906_179_845_938_664,
                -0.538_469_310_105_683_1,
                0.0,
                0.538_469_310_105_683_1,
                0.906_179_845_938_664,
            ];
            let gw = [
                0.236_926_885_056_189_08,
                0.478_628_670_499_366_47,
                0.568_888_888_888_888_9,
                0.478_628_670_499_366_47,
                0.236_926_885_056_189_08,
            ];
            for elem in mesh.elements() {
                let x0 = mesh.nodes[elem[0]].0;
                for (&p, &w) in gp.iter().zip(&gw) {
                    let t = 0.5 * (1.0 + p);
                    let v = f(x0 + h * t, 0.0) * w * 0.5 * h;
                    load[elem[0]] += v * (1.0 - t);
                    load[elem[1]] += v * t;
                }
            }
        }
        _ => {
            // 7-point degree-5 triangle rule; the P1 hats are the
            // barycentric coordinates.
            let s15 = 15f64.sqrt();
            let a = (6.0 - s15) / 21.0;
            let b = (6.0 + s15) / 21.0;
            let wa = (155.0 - s15) / 1200.0;
            let wb = (155.0 + s15) / 1200.0;
            let third = 1.0 / 3.0;
            let rule = [
                ([third, third, third], 9.0 / 40.0),
                ([a, a, 1.0 - 2.0 * a], wa),
                ([a, 1.0 - 2.0 * a, a], wa),
                ([1.0 - 2.0 * a, a, a], wa),
                ([b, b, 1.0 - 2.0 * b], wb),
                ([b, 1.0 - 2.0 * b, b], wb),
                ([1.0 - 2.0 * b, b, b], wb),
            ];
            let area = 0.5 * h * h;
            for elem in mesh.elements() {
                let v: Vec<(f64, f64)> = elem.iter().map(|&id| mesh.nodes[id]).collect();
                for (bary, w) in &rule {
                    let x = bary[0] * v[0].0 + bary[1] * v[1].0 + bary[2] * v[2].0;
                    let y = bary[0] * v[0].1 + bary[1] * v[1].1 + bary[2] * v[2].1;
                    let fv = f(x, y) * w * area;
                    for (k, &gi) in elem.iter().enumerate() {
                        load[gi] += fv * bary[k];
                    }
                }
            }
        }
    }
    let mass = assemble(mesh, AssemblyKind::Mass)?;
    let rhs: Vec<f64> = mesh.interior.iter().map(|&id| load[id]).collect();
    let w = mass.band.cholesky()?.solve(&rhs);
    Ok(NodalField::from_interior(mesh, &w))
}

/// Weak-form Poisson preconditioner: w solves S w = M rhs with zero boundary
/// values, i.e. the finite-element realization of (-Laplace)^{-1} rhs.
pub struct PoissonSolver {
    chol: BandCholesky,
}

impl PoissonSolver {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let s = assemble(mesh, AssemblyKind::Stiffness)?;
        Ok(Self {
            chol: s.band.cholesky()?,
        })
    }

    pub fn apply(&self, mesh: &Mesh, rhs: &NodalField) -> NodalField {
        let mf = apply_mass_full(mesh, rhs);
        let rhs_int: Vec<f64> = mesh.interior.iter().map(|&id| mf[id]).collect();
        let w = self.chol.solve(&rhs_int);
        NodalField::from_interior(mesh, &w)
    }
}

/// One-shot weak-form Poisson solve with a pre-assembled stiffness operator.
pub fn poisson_solve(mesh: &Mesh, op: &SparseOperator, rhs: &NodalField) -> Result<NodalField> {
    if op.kind != OperatorKind::Stiffness {
        return Err(Error::Domain(
            "poisson_solve expects a stiffness operator".into(),
        ));
    }
    let mf = apply_mass_full(mesh, rhs);
    let rhs_int: Vec<f64> = mesh.interior.iter().map(|&id| mf[id]).collect();
    let w = op.band.cholesky()?.solve(&rhs_int);
    Ok(NodalField::from_interior(mesh, &w))
}
