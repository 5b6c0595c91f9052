//! Inverse potential solver: preconditioned fixed-point iteration with
//! optional Anderson acceleration and discrepancy-principle stopping, plus
//! the Isakov alternative iteration.

use crate::error::{Error, Result};
use crate::mesh::{l2_norm, Mesh, NodalField, PoissonSolver};
use crate::solver::{forward_solve, ForwardOptions};
use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct InversionConfig {
    /// Relaxation parameter of the fixed-point map.
    pub lambda: f64,
    /// Anderson memory m; 0 means plain fixed-point iteration.
    pub memory: usize,
    pub max_iter: usize,
    /// Discrepancy factor (> 1).
    pub tau: f64,
    /// Noise level in L2 norm units; 0 disables the discrepancy stop.
    pub delta: f64,
    /// Relative singular-value cutoff for the Anderson least squares.
    pub svd_cutoff: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub n_steps: usize,
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.tau > 1.0) {
            return Err(Error::Config(format!(
                "discrepancy factor tau must exceed 1, got {}",
                self.tau
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        if !(0.0..1.0).contains(&self.svd_cutoff) {
            return Err(Error::Config(format!(
                "svd_cutoff must lie in [0, 1), got {}",
                self.svd_cutoff
            )));
        }
        Ok(())
    }

    /// The iteration map becomes markedly ill-conditioned for the classical
    /// diffusion case at moderate terminal times, so the SVD regularization
    /// is tightened there.
    pub fn effective_svd_cutoff(&self) -> f64 {
        if self.alpha == 1.0 && self.t_final >= 1.0 {
            self.svd_cutoff.max(1e-8)
        } else {
            self.svd_cutoff
        }
    }
}

/// One application of the preconditioned fixed-point map
/// F(q) = q + lambda A^{-1}(u(q)(T) - g).
///
/// The increment vanishes on the boundary, so the boundary values of q are
/// preserved exactly.
pub fn fixed_point_map(
    q: &NodalField,
    cfg: &InversionConfig,
    mesh: &Mesh,
    u0: &NodalField,
    g: &NodalField,
    poisson: &PoissonSolver,
) -> Result<NodalField> {
    let fwd = forward_solve(
        q,
        u0,
        cfg.alpha,
        cfg.t_final,
        mesh,
        cfg.n_steps,
        ForwardOptions::default(),
    )?;
    Ok(apply_increment(q, &fwd.terminal, cfg, mesh, g, poisson))
}

/// Increment step given an already computed terminal field u(q)(T).
fn apply_increment(
    q: &NodalField,
    terminal: &NodalField,
    cfg: &InversionConfig,
    mesh: &Mesh,
    g: &NodalField,
    poisson: &PoissonSolver,
) -> NodalField {
    // Descent direction: g - u(q)(T). The terminal field grows with q (the
    // solution kernel of the +qu term is positive), so a positive data
    // residual u(q)(T) - g must push q downward; with the opposite sign the
    // plain iteration amplifies the error monotonically for every lambda.
    let residual = NodalField {
        values: terminal
            .values
            .iter()
            .zip(&g.values)
            .map(|(u, gv)| gv - u)
            .collect(),
    };
    let w = poisson.apply(mesh, &residual);
    NodalField {
        values: q
            .values
            .iter()
            .zip(&w.values)
            .map(|(qi, wi)| qi + cfg.lambda * wi)
            .collect(),
    }
}

/// Sliding window of the last m_k + 1 iterates, their fixed-point images,
/// and residuals r_i = F(q^i) - q^i.
#[derive(Debug, Clone, Default)]
pub struct AndersonHistory {
    entries: VecDeque<AndersonEntry>,
    capacity: usize,
}

#[derive(Debug, Clone)]
struct AndersonEntry {
    image: Vec<f64>,
    residual: Vec<f64>,
}

/// Outcome of one Anderson step.
#[derive(Debug, Clone)]
pub struct AndersonStep {
    pub next: Vec<f64>,
    /// Affine weights on the stored images; sums to 1.
    pub beta: Vec<f64>,
    /// True when the least-squares history was degenerate and the plain
    /// fixed-point image was used instead.
    pub fallback: bool,
}

impl AndersonHistory {
    pub fn new(memory: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(memory + 1),
            capacity: memory + 1,
        }
    }

    pub fn push(&mut self, q: &[f64], image: &[f64]) {
        let residual = image.iter().zip(q).map(|(f, x)| f - x).collect();
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(AndersonEntry {
            image: image.to_vec(),
            residual,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Anderson mixing: beta = argmin ||R_k beta|| subject to sum(beta) = 1,
/// computed by eliminating the constraint into an unconstrained least
/// squares in residual differences, solved by SVD with a relative cutoff.
pub fn anderson_step(history: &AndersonHistory, svd_cutoff: f64) -> AndersonStep {
    let mk = history.entries.len() - 1;
    let last = history.entries.back().expect("history must not be empty");
    if mk == 0 {
        return AndersonStep {
            next: last.image.clone(),
            beta: vec![1.0],
            fallback: false,
        };
    }
    let n = last.residual.len();
    let mut dr = nalgebra::DMatrix::zeros(n, mk);
    for i in 0..mk {
        let r0 = &history.entries[i].residual;
        let r1 = &history.entries[i + 1].residual;
        for row in 0..n {
            dr[(row, i)] = r1[row] - r0[row];
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(&last.residual);
    let svd = dr.svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        // All residual differences vanish; fall back to the plain image.
        let mut beta = vec![0.0; mk + 1];
        beta[mk] = 1.0;
        return AndersonStep {
            next: last.image.clone(),
            beta,
            fallback: true,
        };
    }
    let gamma = svd
        .solve(&rhs, svd_cutoff * sigma_max)
        .expect("SVD solve with computed factors");

    // q_next = F_last - sum_i gamma_i (F_{i+1} - F_i).
    let mut next = last.image.clone();
    for i in 0..mk {
        let f0 = &history.entries[i].image;
        let f1 = &history.entries[i + 1].image;
        let gi = gamma[i];
        for row in 0..n {
            next[row] -= gi * (f1[row] - f0[row]);
        }
    }
    // Telescoping recovery of the affine weights.
    let mut beta = vec![0.0; mk + 1];
    beta[0] = gamma[0];
    for i in 1..mk {
        beta[i] = gamma[i] - gamma[i - 1];
    }
    beta[mk] = 1.0 - gamma[mk - 1];
    AndersonStep {
        next,
        beta,
        fallback: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    SolverFailure,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    pub r_q: f64,
    pub e_q: Option<f64>,
    pub anderson_fallback: bool,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub q_final: NodalField,
    pub records: Vec<IterationRecord>,
    pub stop_index: usize,
    pub stop_reason: StopReason,
    /// Set when stop_reason is SolverFailure.
    pub failure: Option<String>,
}

/// Run the (optionally Anderson-accelerated) fixed-point iteration with the
/// discrepancy principle r_q <= tau * delta, checked from k = 1 on. A zero
/// delta disables the stopping rule so the run ends at max_iter.
pub fn run_inversion(
    cfg: &InversionConfig,
    mesh: &Mesh,
    u0: &NodalField,
    g: &NodalField,
    initial_guess: &NodalField,
    accelerate: bool,
    oracle_q: Option<&NodalField>,
) -> Result<InversionResult> {
    cfg.validate()?;
    let poisson = PoissonSolver::new(mesh)?;
    let cutoff = cfg.effective_svd_cutoff();
    let threshold = cfg.tau * cfg.delta;

    let mut history = AndersonHistory::new(if accelerate { cfg.memory } else { 0 });
    let mut records = Vec::new();
    let mut q = initial_guess.clone();

    let forward = |q: &NodalField| -> Result<NodalField> {
        Ok(forward_solve(
            q,
            u0,
            cfg.alpha,
            cfg.t_final,
            mesh,
            cfg.n_steps,
            ForwardOptions::default(),
        )?
        .terminal)
    };

    let mut terminal = match forward(&q) {
        Ok(t) => t,
        Err(e) => {
            return Ok(InversionResult {
                q_final: q,
                records,
                stop_index: 0,
                stop_reason: StopReason::SolverFailure,
                failure: Some(e.to_string()),
            })
        }
    };

    for k in 1..=cfg.max_iter {
        let image = apply_increment(&q, &terminal, cfg, mesh, g, &poisson);
        history.push(&q.values, &image.values);
        let (next, fallback) = if accelerate && cfg.memory > 0 {
            let step = anderson_step(&history, cutoff);
            (NodalField { values: step.next }, step.fallback)
        } else {
            (image, false)
        };
        q = next;

        terminal = match forward(&q) {
            Ok(t) => t,
            Err(e) => {
                return Ok(InversionResult {
                    q_final: q,
                    records,
                    stop_index: k,
                    stop_reason: StopReason::SolverFailure,
                    failure: Some(e.to_string()),
                })
            }
        };
        let diff = NodalField {
            values: terminal
                .values
                .iter()
                .zip(&g.values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        let r_q = l2_norm(mesh, &diff);
        let e_q = oracle_q.map(|qt| {
            let d = NodalField {
                values: q
                    .values
                    .iter()
                    .zip(&qt.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            l2_norm(mesh, &d)
        });
        records.push(IterationRecord {
            k,
            r_q,
            e_q,
            anderson_fallback: fallback,
        });

        if cfg.delta > 0.0 && r_q <= threshold {
            return Ok(InversionResult {
                q_final: q,
                records,
                stop_index: k,
                stop_reason: StopReason::Discrepancy,
                failure: None,
            });
        }
    }
    Ok(InversionResult {
        q_final: q,
        records,
        stop_index: cfg.max_iter,
        stop_reason: StopReason::MaxIter,
        failure: None,
    })
}

/// One step of the Isakov iteration
/// q <- (d_t^alpha u(q)(T) - Laplace u(q)(T)) / g,
/// evaluated nodewise on interior nodes; boundary values of q are kept.
pub fn isakov_step(
    q: &NodalField,
    cfg: &InversionConfig,
    mesh: &Mesh,
    u0: &NodalField,
    g: &NodalField,
    g_min: f64,
) -> Result<NodalField> {
    if !(g_min > 0.0) {
        return Err(Error::Config(format!(
            "g_min must be positive, got {g_min}"
        )));
    }
    let mut violations = 0usize;
    let mut first = usize::MAX;
    for &id in &mesh.interior {
        if g.values[id].abs() < g_min {
            violations += 1;
            if first == usize::MAX {
                first = id;
            }
        }
    }
    if violations > 0 {
        return Err(Error::SmallDivisor {
            g_min,
            count: violations,
            first,
        });
    }
    let fwd = forward_solve(
        q,
        u0,
        cfg.alpha,
        cfg.t_final,
        mesh,
        cfg.n_steps,
        ForwardOptions {
            caputo_terminal: true,
            laplacian_terminal: true,
            ..Default::default()
        },
    )?;
    let caputo = fwd.caputo_terminal.expect("requested caputo field");
    let lap = fwd.laplacian_terminal.expect("requested laplacian field");
    let mut next = q.clone();
    for &id in &mesh.interior {
        next.values[id] = (caputo.values[id] - lap.values[id]) / g.values[id];
    }
    Ok(next)
}
