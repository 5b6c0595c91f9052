//! Reproduction harness: example definitions, fine-grid data synthesis with
//! seeded noise, restriction to the inversion grid, table and figure output.

use crate::error::{Error, Result};
use crate::inverse::{run_inversion, InversionConfig, InversionResult, StopReason};
use crate::mesh::{
    build_mesh, l2_norm, l2_project_dirichlet, restrict, sup_norm, Mesh, NodalField,
};
use crate::mlf::{c_alpha, c_alpha_upper_bound, mittag_leffler, MLAccuracy};
use crate::solver::{forward_solve, ForwardOptions};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExampleId {
    /// 1D: q = e^x sin(2 pi x), u0 = sin(pi x) + x(1-x)/100.
    #[serde(rename = "ex1d1")]
    Ex1d1,
    /// 1D: q = min(x, 1-x), u0 = 1 + 1.5 sin(2 pi x).
    #[serde(rename = "ex1d2")]
    Ex1d2,
    /// 2D: q = sin(pi x1) x2 (1-x2), u0 = sin^2(pi x2).
    #[serde(rename = "ex2d")]
    Ex2d,
}

impl ExampleId {
    pub fn dimension(self) -> usize {
        match self {
            ExampleId::Ex1d1 | ExampleId::Ex1d2 => 1,
            ExampleId::Ex2d => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExampleId::Ex1d1 => "ex1d1",
            ExampleId::Ex1d2 => "ex1d2",
            ExampleId::Ex2d => "ex2d",
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial datum and true potential of an example. The potential is the
/// nodal interpolant; the initial datum is the L2 projection onto the
/// zero-Dirichlet P1 space, which keeps the boundary-incompatible examples
/// consistent across the data and inversion meshes.
pub fn example_data(example: ExampleId, mesh: &Mesh) -> Result<(NodalField, NodalField)> {
    if mesh.dimension != example.dimension() {
        return Err(Error::IncompatibleMesh(format!(
            "example {example} is {}D but the mesh is {}D",
            example.dimension(),
            mesh.dimension
        )));
    }
    use std::f64::consts::PI;
    let (u0, q): (NodalField, NodalField) = match example {
        ExampleId::Ex1d1 => (
            l2_project_dirichlet(mesh, |x, _| (PI * x).sin() + x * (1.0 - x) / 100.0)?,
            NodalField::from_fn(mesh, |x, _| x.exp() * (2.0 * PI * x).sin()),
        ),
        ExampleId::Ex1d2 => (
            l2_project_dirichlet(mesh, |x, _| 1.0 + 1.5 * (2.0 * PI * x).sin())?,
            NodalField::from_fn(mesh, |x, _| x.min(1.0 - x)),
        ),
        ExampleId::Ex2d => (
            l2_project_dirichlet(mesh, |_, y| (PI * y).sin().powi(2))?,
            NodalField::from_fn(mesh, |x, y| (PI * x).sin() * y * (1.0 - y)),
        ),
    };
    Ok((u0, q))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub example: ExampleId,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "M_data")]
    pub m_data: usize,
    #[serde(rename = "N_data")]
    pub n_data: usize,
    #[serde(rename = "M_inv")]
    pub m_inv: usize,
    #[serde(rename = "N_inv")]
    pub n_inv: usize,
    pub lambda: f64,
    pub m: usize,
    pub tau: f64,
    pub base_seed: u64,
    pub accelerate: bool,
    pub max_iter: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m_data < 2 || self.n_data < 1 || self.m_inv < 2 || self.n_inv < 1 {
            return Err(Error::Config("grid sizes too small".into()));
        }
        if self.m_data % self.m_inv != 0 {
            return Err(Error::Config(format!(
                "M_data = {} must be a multiple of M_inv = {}",
                self.m_data, self.m_inv
            )));
        }
        if self.alphas.is_empty() || self.epsilons.is_empty() {
            return Err(Error::Config("need at least one alpha and epsilon".into()));
        }
        if self.epsilons.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::Config("epsilons must be nonnegative".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::Config("T must be positive".into()));
        }
        self.inversion_config(self.alphas[0], 0.0).validate()
    }

    pub fn inversion_config(&self, alpha: f64, delta: f64) -> InversionConfig {
        InversionConfig {
            lambda: self.lambda,
            memory: self.m,
            max_iter: self.max_iter,
            tau: self.tau,
            delta,
            svd_cutoff: 1e-12,
            alpha,
            t_final: self.t_final,
            n_steps: self.n_inv,
        }
    }
}

/// Deterministic per-cell RNG seed.
pub fn cell_seed(base_seed: u64, example: ExampleId, alpha: f64, epsilon: f64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(base_seed.to_le_bytes());
    hasher.update(example.name().as_bytes());
    hasher.update(alpha.to_bits().to_le_bytes());
    hasher.update(epsilon.to_bits().to_le_bytes());
    hasher.finalize().into()
}

/// Gaussian noise on interior nodes: g = u + epsilon * sup|u| * xi, with
/// boundary nodes kept at their exact (Dirichlet) values.
pub fn apply_noise(
    mesh: &Mesh,
    u_exact: &NodalField,
    epsilon: f64,
    seed: [u8; 32],
) -> NodalField {
    let mut g = u_exact.clone();
    if epsilon == 0.0 {
        return g;
    }
    let scale = epsilon * sup_norm(u_exact);
    let mut rng = rand_chacha::ChaCha8Rng::from_seed(seed);
    for &id in &mesh.interior {
        let xi: f64 = StandardNormal.sample(&mut rng);
        g.values[id] += scale * xi;
    }
    g
}

/// Synthetic data for one (alpha, epsilon) cell.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub g: NodalField,
    /// Noise level ||g - u(q_dag)(T)||_L2 for the discrepancy principle,
    /// with u(q_dag)(T) computed by the inversion-grid forward solver.
    /// Measuring against the same discrete operator that produces the
    /// residuals folds the deliberate data/inversion grid mismatch into
    /// delta, so the threshold tau * delta sits above the residual floor.
    /// Zero when epsilon is zero, which disables the stopping rule.
    pub delta: f64,
    pub q_true_inv: NodalField,
    pub u_exact_inv: NodalField,
}

/// Forward-solve the true potential on the data grid, restrict the terminal
/// field to the inversion grid, and add seeded noise.
pub fn generate_data(spec: &ExperimentSpec, alpha: f64, epsilon: f64) -> Result<GeneratedData> {
    let mesh_data = build_mesh(spec.example.dimension(), spec.m_data)?;
    let (u0_data, q_data) = example_data(spec.example, &mesh_data)?;
    let fine = forward_solve(
        &q_data,
        &u0_data,
        alpha,
        spec.t_final,
        &mesh_data,
        spec.n_data,
        ForwardOptions::default(),
    )?;
    let mesh_inv = build_mesh(spec.example.dimension(), spec.m_inv)?;
    let u_exact_inv = restrict(&fine.terminal, &mesh_data, &mesh_inv)?;
    from_exact_field(spec, &mesh_inv, u_exact_inv, alpha, epsilon)
}

/// Noise + metrics given an already restricted exact terminal field.
pub fn from_exact_field(
    spec: &ExperimentSpec,
    mesh_inv: &Mesh,
    u_exact_inv: NodalField,
    alpha: f64,
    epsilon: f64,
) -> Result<GeneratedData> {
    let (u0_inv, q_true_inv) = example_data(spec.example, mesh_inv)?;
    let seed = cell_seed(spec.base_seed, spec.example, alpha, epsilon);
    let g = apply_noise(mesh_inv, &u_exact_inv, epsilon, seed);
    let delta = if epsilon == 0.0 {
        0.0
    } else {
        let coarse = forward_solve(
            &q_true_inv,
            &u0_inv,
            alpha,
            spec.t_final,
            mesh_inv,
            spec.n_inv,
            ForwardOptions::default(),
        )?;
        let diff = NodalField {
            values: g
                .values
                .iter()
                .zip(&coarse.terminal.values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        l2_norm(mesh_inv, &diff)
    };
    Ok(GeneratedData {
        g,
        delta,
        q_true_inv,
        u_exact_inv,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub example: ExampleId,
    pub alpha: f64,
    pub epsilon: f64,
    /// First 8 bytes of the cell seed, for reporting.
    pub seed: u64,
    pub e_q: f64,
    pub r_q: f64,
    pub stop_index: usize,
    pub stop_reason: String,
    pub wall_time_s: f64,
}

fn stop_reason_name(r: StopReason) -> &'static str {
    match r {
        StopReason::Discrepancy => "discrepancy",
        StopReason::MaxIter => "max_iter",
        StopReason::SolverFailure => "solver_failure",
    }
}

/// Run one cell on pre-generated data; returns the result and the full trace.
pub fn run_cell(
    spec: &ExperimentSpec,
    alpha: f64,
    epsilon: f64,
    data: &GeneratedData,
) -> Result<(CellResult, InversionResult)> {
    let mesh_inv = build_mesh(spec.example.dimension(), spec.m_inv)?;
    let (u0_inv, _) = example_data(spec.example, &mesh_inv)?;
    let cfg = spec.inversion_config(alpha, data.delta);
    let guess = NodalField::zeros(&mesh_inv);
    let start = std::time::Instant::now();
    let res = run_inversion(
        &cfg,
        &mesh_inv,
        &u0_inv,
        &data.g,
        &guess,
        spec.accelerate,
        Some(&data.q_true_inv),
    )?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let last = res.records.last();
    let seed = cell_seed(spec.base_seed, spec.example, alpha, epsilon);
    let cell = CellResult {
        example: spec.example,
        alpha,
        epsilon,
        seed: u64::from_le_bytes(seed[..8].try_into().expect("8 bytes")),
        e_q: last.and_then(|r| r.e_q).unwrap_or(f64::NAN),
        r_q: last.map(|r| r.r_q).unwrap_or(f64::NAN),
        stop_index: res.stop_index,
        stop_reason: stop_reason_name(res.stop_reason).to_string(),
        wall_time_s,
    };
    Ok((cell, res))
}

/// Run every (alpha, epsilon) cell of the spec, alpha-major. The fine-grid
/// forward solve is shared across the epsilon cells of each alpha; cells
/// within an alpha run in parallel.
pub fn run_table(spec: &ExperimentSpec) -> Result<Vec<CellResult>> {
    Ok(run_table_detailed(spec)?
        .into_iter()
        .map(|(cell, _)| cell)
        .collect())
}

/// Like `run_table`, but also returns the per-cell iteration traces.
pub fn run_table_detailed(
    spec: &ExperimentSpec,
) -> Result<Vec<(CellResult, InversionResult)>> {
    spec.validate()?;
    let mesh_data = build_mesh(spec.example.dimension(), spec.m_data)?;
    let mesh_inv = build_mesh(spec.example.dimension(), spec.m_inv)?;
    let (u0_data, q_data) = example_data(spec.example, &mesh_data)?;

    let mut out = Vec::with_capacity(spec.alphas.len() * spec.epsilons.len());
    for &alpha in &spec.alphas {
        let fine = forward_solve(
            &q_data,
            &u0_data,
            alpha,
            spec.t_final,
            &mesh_data,
            spec.n_data,
            ForwardOptions::default(),
        )?;
        let u_exact_inv = restrict(&fine.terminal, &mesh_data, &mesh_inv)?;

        let cells: Vec<Result<(CellResult, InversionResult)>> = spec
            .epsilons
            .par_iter()
            .map(|&epsilon| {
                let data =
                    from_exact_field(spec, &mesh_inv, u_exact_inv.clone(), alpha, epsilon)?;
                run_cell(spec, alpha, epsilon, &data)
            })
            .collect();
        for cell in cells {
            out.push(cell?);
        }
    }
    Ok(out)
}

/// CSV for a table run; floats use round-trip formatting.
pub fn table_csv(results: &[CellResult]) -> String {
    let mut s =
        String::from("example,alpha,epsilon,seed,e_q,r_q,stop_index,stop_reason,wall_time_s\n");
    for r in results {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.example, r.alpha, r.epsilon, r.seed, r.e_q, r.r_q, r.stop_index, r.stop_reason,
            r.wall_time_s
        ));
    }
    s
}

/// CSV of alpha^{-1} t E_{alpha,alpha}(-t) on a uniform t grid in [0, 10].
pub fn fig1a_csv(alphas: &[f64], points: usize) -> Result<String> {
    let acc = MLAccuracy::default();
    let mut s = String::from("t,alpha,value\n");
    for &alpha in alphas {
        for i in 0..=points {
            let t = 10.0 * i as f64 / points as f64;
            let value = if t == 0.0 {
                0.0
            } else {
                t * mittag_leffler(alpha, alpha, -t, &acc)? / alpha
            };
            s.push_str(&format!("{t},{alpha},{value}\n"));
        }
    }
    Ok(s)
}

/// CSV of c_alpha/alpha against the analytic bound, on an alpha grid plus
/// the alpha = 1 limit row (e^{-1} and 1).
pub fn fig1b_csv(alphas: &[f64]) -> Result<String> {
    let acc = MLAccuracy::default();
    let mut s = String::from("alpha,c_over_alpha,upper_bound\n");
    for &alpha in alphas {
        let (c_over, bound_over) = if alpha == 1.0 {
            ((-1.0f64).exp(), 1.0)
        } else {
            let r = c_alpha(alpha, &acc)?;
            (r.c_alpha / alpha, c_alpha_upper_bound(alpha)? / alpha)
        };
        s.push_str(&format!("{alpha},{c_over},{bound_over}\n"));
    }
    Ok(s)
}

/// CSV of an inversion trace with the discrepancy stop marked.
pub fn trace_csv(result: &InversionResult) -> String {
    let mut s = String::from("k,r_q,e_q,anderson_fallback,stopped_here\n");
    for rec in &result.records {
        let e_q = rec
            .e_q
            .map(|v| v.to_string())
            .unwrap_or_default();
        let stopped =
            rec.k == result.stop_index && result.stop_reason == StopReason::Discrepancy;
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.k, rec.r_q, e_q, rec.anderson_fallback, stopped
        ));
    }
    s
}
