//! Time stepping for the subdiffusion problem with backward-Euler
//! convolution quadrature, plus a spectral reference solution for q = 0.

use crate::error::{Error, Result};
use crate::mesh::{
    apply_mass_full, assemble, AssemblyKind, Mesh, NodalField,
};
use crate::mlf::{mittag_leffler, MLAccuracy};

/// Coefficients of (1 - zeta)^alpha, the backward-Euler CQ weights.
#[derive(Debug, Clone)]
pub struct CQWeights {
    pub alpha: f64,
    pub n_steps: usize,
    pub tau: f64,
    pub weights: Vec<f64>,
}

pub fn cq_weights(alpha: f64, n_steps: usize, t_final: f64) -> Result<CQWeights> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "fractional order must lie in (0, 1], got {alpha}"
        )));
    }
    if n_steps < 1 {
        return Err(Error::Domain("need at least one time step".into()));
    }
    if !(t_final > 0.0) {
        return Err(Error::Domain(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    let mut weights = Vec::with_capacity(n_steps + 1);
    weights.push(1.0);
    for j in 1..=n_steps {
        let prev = weights[j - 1];
        weights.push(prev * (j as f64 - 1.0 - alpha) / j as f64);
    }
    Ok(CQWeights {
        alpha,
        n_steps,
        tau: t_final / n_steps as f64,
        weights,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ForwardOptions {
    pub store_trajectory: bool,
    pub caputo_terminal: bool,
    pub laplacian_terminal: bool,
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub terminal: NodalField,
    pub trajectory: Option<Vec<NodalField>>,
    /// Discrete Caputo derivative at T (CQ applied to u - u0).
    pub caputo_terminal: Option<NodalField>,
    /// Weak-form Laplacian of the terminal field: M v = -S U^N.
    pub laplacian_terminal: Option<NodalField>,
}

/// Solve d_t^alpha u = Laplace u + q u, u(0) = u0, zero Dirichlet data.
///
/// Each step solves
///   (tau^{-a} M + S - M_q) U^n = M (tau^{-a} U^0 - tau^{-a} sum_{j=1}^{n} w_j (U^{n-j} - U^0)),
/// with the step matrix factorized once. The history sum is O(n) per step.
pub fn forward_solve(
    q: &NodalField,
    u0: &NodalField,
    alpha: f64,
    t_final: f64,
    mesh: &Mesh,
    n_steps: usize,
    options: ForwardOptions,
) -> Result<ForwardResult> {
    if q.len() != mesh.node_count() || u0.len() != mesh.node_count() {
        return Err(Error::IncompatibleMesh(
            "q and u0 must be nodal fields on the solve mesh".into(),
        ));
    }
    let cq = cq_weights(alpha, n_steps, t_final)?;
    let tau_pow = cq.tau.powf(-alpha);
    let w = &cq.weights;

    let mass = assemble(mesh, AssemblyKind::Mass)?;
    let stiff = assemble(mesh, AssemblyKind::Stiffness)?;
    let mq = assemble(mesh, AssemblyKind::WeightedMass(q))?;

    // A = tau^{-a} w_0 M + S - M_q, factorized once per (q, tau).
    let mut a = mass.band.clone();
    a.scaled_add(tau_pow, 1.0, &stiff.band);
    a.scaled_add(1.0, -1.0, &mq.band);
    let chol = a.cholesky().map_err(|e| {
        Error::SingularSystem(format!(
            "step matrix tau^(-alpha) M + S - M_q not factorizable (q too large?): {e}"
        ))
    })?;

    // Boundary values of u0 are ignored: the zero Dirichlet condition is
    // imposed by working with interior coefficients only.
    let u0_int = u0.interior_values(mesh);
    let n_int = u0_int.len();

    // The history is stored as differences d^j = U^j - U^0, which is what
    // both the convolution sum and the discrete Caputo derivative consume.
    let u0_ref = u0_int;
    let mut diffs: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    diffs.push(vec![0.0; n_int]);
    let mut un = u0_ref.clone();

    for n in 1..=n_steps {
        // h = sum_{j=1..n} w_j d^{n-j}
        let mut h = vec![0.0; n_int];
        for j in 1..=n {
            let dj = &diffs[n - j];
            let wj = w[j];
            for (hi, di) in h.iter_mut().zip(dj) {
                *hi += wj * di;
            }
        }
        let rhs_field: Vec<f64> = u0_ref
            .iter()
            .zip(&h)
            .map(|(u0i, hi)| tau_pow * (u0i - hi))
            .collect();
        let rhs = mass.band.mul_vec(&rhs_field);
        un = chol.solve(&rhs);
        diffs.push(un.iter().zip(&u0_ref).map(|(a, b)| a - b).collect());
    }

    let terminal = NodalField::from_interior(mesh, &un);

    let caputo_terminal = if options.caputo_terminal {
        let mut c = vec![0.0; n_int];
        for j in 0..=n_steps {
            let dj = &diffs[n_steps - j];
            let wj = w[j];
            for (ci, di) in c.iter_mut().zip(dj) {
                *ci += wj * di;
            }
        }
        for v in &mut c {
            *v *= tau_pow;
        }
        Some(NodalField::from_interior(mesh, &c))
    } else {
        None
    };

    let laplacian_terminal = if options.laplacian_terminal {
        let su = stiff.band.mul_vec(&un);
        let neg: Vec<f64> = su.iter().map(|v| -v).collect();
        let v = mass.band.cholesky()?.solve(&neg);
        Some(NodalField::from_interior(mesh, &v))
    } else {
        None
    };

    let trajectory = if options.store_trajectory {
        Some(
            diffs
                .iter()
                .map(|d| {
                    let u: Vec<f64> = d.iter().zip(&u0_ref).map(|(di, u0i)| di + u0i).collect();
                    NodalField::from_interior(mesh, &u)
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(ForwardResult {
        terminal,
        trajectory,
        caputo_terminal,
        laplacian_terminal,
    })
}

/// Spectral solution for q = 0 on the 1D unit interval:
/// u(T) = sum_j E_{alpha,1}(-lambda_j T^alpha) (u0, phi_j) phi_j
/// with lambda_j = (j pi)^2 and phi_j = sqrt(2) sin(j pi x).
pub fn spectral_solve(
    u0: &NodalField,
    alpha: f64,
    t_final: f64,
    mesh: &Mesh,
    n_modes: usize,
) -> Result<NodalField> {
    if mesh.dimension != 1 {
        return Err(Error::Domain("spectral reference is 1D only".into()));
    }
    if n_modes < 1 {
        return Err(Error::Domain("need at least one mode".into()));
    }
    let acc = MLAccuracy::default();
    let mu0 = apply_mass_full(mesh, u0);
    let mut out = vec![0.0; mesh.node_count()];
    let t_pow = if t_final == 0.0 {
        0.0
    } else {
        t_final.powf(alpha)
    };
    for j in 1..=n_modes {
        let jf = j as f64;
        let phi: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|&(x, _)| std::f64::consts::SQRT_2 * (jf * std::f64::consts::PI * x).sin())
            .collect();
        let coeff: f64 = mu0.iter().zip(&phi).map(|(a, b)| a * b).sum();
        let lambda = (jf * std::f64::consts::PI).powi(2);
        let e = mittag_leffler(alpha, 1.0, -lambda * t_pow, &acc)?;
        for (o, p) in out.iter_mut().zip(&phi) {
            *o += e * coeff * p;
        }
    }
    let mut field = NodalField { values: out };
    field.project_dirichlet(mesh);
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, l2_norm};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn weights_alpha_one_are_first_difference() {
        let cq = cq_weights(1.0, 5, 1.0).unwrap();
        assert_eq!(cq.weights, vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn weights_half_by_hand() {
        let cq = cq_weights(0.5, 3, 1.0).unwrap();
        let expect = [1.0, -0.5, -0.125, -0.0625];
        for (a, b) in cq.weights.iter().zip(expect) {
            assert_relative_eq!(a, &b, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_match_generating_function() {
        // sum_j w_j z^j should reproduce (1 - z)^alpha up to the truncation
        // tail, which is bounded by |w_N| z^N / (1 - z).
        for alpha in [0.25, 0.6, 0.9] {
            let n = 400;
            let cq = cq_weights(alpha, n, 1.0).unwrap();
            for z in [0.1, 0.3, 0.5] {
                let mut acc = 0.0;
                let mut zp = 1.0;
                for wj in &cq.weights {
                    acc += wj * zp;
                    zp *= z;
                }
                let exact = (1.0f64 - z).powf(alpha);
                let tail = cq.weights[n].abs() * z.powi(n as i32) / (1.0 - z);
                assert!(
                    (acc - exact).abs() <= tail + 1e-14,
                    "alpha={alpha}, z={z}: {acc} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn weight_partial_sums_positive_decreasing() {
        let cq = cq_weights(0.7, 300, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        let mut sum = 0.0;
        for (j, w) in cq.weights.iter().enumerate() {
            if j >= 1 {
                assert!(*w < 0.0, "w_{j} = {w}");
            }
            sum += w;
            assert!(sum > 0.0 && sum < prev);
            prev = sum;
        }
    }

    #[test]
    fn forward_matches_spectral_first_order_in_time() {
        let mesh = build_mesh(1, 400).unwrap();
        let u0 = NodalField::from_fn(&mesh, |x, _| (PI * x).sin());
        let q = NodalField::zeros(&mesh);
        let reference = spectral_solve(&u0, 0.5, 1.0, &mesh, 1).unwrap();
        let mut errs = Vec::new();
        for n in [50usize, 100, 200] {
            let r = forward_solve(&q, &u0, 0.5, 1.0, &mesh, n, ForwardOptions::default())
                .unwrap();
            let diff = NodalField {
                values: r
                    .terminal
                    .values
                    .iter()
                    .zip(&reference.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            errs.push(l2_norm(&mesh, &diff));
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (1.6..=2.6).contains(&ratio),
                "halving ratio {ratio}, errors {errs:?}"
            );
        }
    }

    #[test]
    fn alpha_one_equals_plain_backward_euler() {
        let mesh = build_mesh(1, 60).unwrap();
        let u0 = NodalField::from_fn(&mesh, |x, _| (PI * x).sin() + 0.1 * (2.0 * PI * x).sin());
        let q = NodalField::from_fn(&mesh, |x, _| x * (1.0 - x));
        let n = 40;
        let tau = 1.0 / n as f64;
        let r = forward_solve(&q, &u0, 1.0, 1.0, &mesh, n, ForwardOptions::default()).unwrap();

        // Independent backward Euler: (M/tau + S - M_q) U^n = M U^{n-1}/tau.
        let mass = assemble(&mesh, AssemblyKind::Mass).unwrap();
        let stiff = assemble(&mesh, AssemblyKind::Stiffness).unwrap();
        let mq = assemble(&mesh, AssemblyKind::WeightedMass(&q)).unwrap();
        let mut a = mass.band.clone();
        a.scaled_add(1.0 / tau, 1.0, &stiff.band);
        a.scaled_add(1.0, -1.0, &mq.band);
        let chol = a.cholesky().unwrap();
        let mut u = u0.interior_values(&mesh);
        for _ in 0..n {
            let scaled: Vec<f64> = u.iter().map(|v| v / tau).collect();
            u = chol.solve(&mass.band.mul_vec(&scaled));
        }
        for (a, b) in r.terminal.interior_values(&mesh).iter().zip(&u) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn single_step_instantiates_formula() {
        let mesh = build_mesh(1, 16).unwrap();
        let u0 = NodalField::from_fn_dirichlet(&mesh, |x, _| x * (1.0 - x));
        let q = NodalField::from_fn(&mesh, |x, _| -x);
        let alpha = 0.4;
        let r = forward_solve(&q, &u0, alpha, 0.5, &mesh, 1, ForwardOptions::default()).unwrap();

        let tau_pow = 0.5f64.powf(-alpha);
        let mass = assemble(&mesh, AssemblyKind::Mass).unwrap();
        let stiff = assemble(&mesh, AssemblyKind::Stiffness).unwrap();
        let mq = assemble(&mesh, AssemblyKind::WeightedMass(&q)).unwrap();
        let mut a = mass.band.clone();
        a.scaled_add(tau_pow, 1.0, &stiff.band);
        a.scaled_add(1.0, -1.0, &mq.band);
        let rhs_field: Vec<f64> = u0
            .interior_values(&mesh)
            .iter()
            .map(|v| tau_pow * v)
            .collect();
        let u1 = a.cholesky().unwrap().solve(&mass.band.mul_vec(&rhs_field));
        for (x, y) in r.terminal.interior_values(&mesh).iter().zip(&u1) {
            assert_relative_eq!(x, y, epsilon = 1e-13);
        }
    }

    #[test]
    fn boundary_values_of_initial_datum_are_ignored() {
        let mesh = build_mesh(1, 8).unwrap();
        let raw = NodalField::from_fn(&mesh, |_, _| 1.0);
        let projected = NodalField::from_fn_dirichlet(&mesh, |_, _| 1.0);
        let q = NodalField::zeros(&mesh);
        let a = forward_solve(&q, &raw, 0.5, 1.0, &mesh, 4, ForwardOptions::default()).unwrap();
        let b =
            forward_solve(&q, &projected, 0.5, 1.0, &mesh, 4, ForwardOptions::default()).unwrap();
        assert_eq!(a.terminal.values, b.terminal.values);
    }

    #[test]
    fn trajectory_nonnegative_for_nonnegative_data() {
        let mesh = build_mesh(1, 200).unwrap();
        let u0 = NodalField::from_fn(&mesh, |x, _| (PI * x).sin());
        let q = NodalField::zeros(&mesh);
        let opts = ForwardOptions {
            store_trajectory: true,
            ..Default::default()
        };
        let r = forward_solve(&q, &u0, 0.5, 1.0, &mesh, 500, opts).unwrap();
        let traj = r.trajectory.unwrap();
        assert_eq!(traj.len(), 501);
        for field in &traj {
            for &v in &field.values {
                assert!(v >= -1e-10, "negative value {v}");
            }
        }
    }

    #[test]
    fn eigenfunction_envelope() {
        // u0 = sin(pi x): terminal field stays within the first-mode
        // envelope E_{a,1}(-lambda_1 T^a) sin(pi x) up to discretization.
        let mesh = build_mesh(1, 400).unwrap();
        let u0 = NodalField::from_fn(&mesh, |x, _| (PI * x).sin());
        let q = NodalField::zeros(&mesh);
        let alpha = 0.75;
        let r = forward_solve(&q, &u0, alpha, 1.0, &mesh, 800, ForwardOptions::default()).unwrap();
        let e = mittag_leffler(alpha, 1.0, -PI * PI, &MLAccuracy::default()).unwrap();
        for (id, &(x, _)) in mesh.nodes.iter().enumerate() {
            let envelope = e * (PI * x).sin();
            assert!(
                (r.terminal.values[id] - envelope).abs() <= 1e-3,
                "node {id}: {} vs {envelope}",
                r.terminal.values[id]
            );
        }
    }

    #[test]
    fn caputo_and_laplacian_terminal_consistent() {
        // At the discrete level d_t^a U^N = M^{-1}(S... i.e. the scheme gives
        // caputo = laplacian + q u at the terminal step, in the weak sense.
        let mesh = build_mesh(1, 50).unwrap();
        let u0 = NodalField::from_fn_dirichlet(&mesh, |x, _| (PI * x).sin());
        let q = NodalField::from_fn(&mesh, |x, _| (2.0 * PI * x).sin());
        let opts = ForwardOptions {
            caputo_terminal: true,
            laplacian_terminal: true,
            ..Default::default()
        };
        let r = forward_solve(&q, &u0, 0.6, 0.5, &mesh, 30, opts).unwrap();
        let mass = assemble(&mesh, AssemblyKind::Mass).unwrap();
        let mq = assemble(&mesh, AssemblyKind::WeightedMass(&q)).unwrap();
        let c = r.caputo_terminal.unwrap().interior_values(&mesh);
        let lap = r.laplacian_terminal.unwrap().interior_values(&mesh);
        let un = r.terminal.interior_values(&mesh);
        // M caputo = M lap + M_q u.
        let lhs = mass.band.mul_vec(&c);
        let rhs: Vec<f64> = mass
            .band
            .mul_vec(&lap)
            .iter()
            .zip(mq.band.mul_vec(&un))
            .map(|(a, b)| a + b)
            .collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn spectral_eigenfunction_exact() {
        let mesh = build_mesh(1, 128).unwrap();
        let u0 = NodalField::from_fn(&mesh, |x, _| (PI * x).sin());
        let alpha = 0.5;
        let r = spectral_solve(&u0, alpha, 2.0, &mesh, 1).unwrap();
        let t_pow = 2.0f64.powf(alpha);
        let e = mittag_leffler(alpha, 1.0, -PI * PI * t_pow, &MLAccuracy::default()).unwrap();
        // The nodal interpolant of sin is not exactly mass-orthonormal, so
        // allow the O(h^2) projection error.
        for (id, &(x, _)) in mesh.nodes.iter().enumerate() {
            assert!((r.values[id] - e * (PI * x).sin()).abs() < 1e-4);
        }
    }

    #[test]
    fn spectral_at_t_zero_is_fourier_truncation() {
        let mesh = build_mesh(1, 200).unwrap();
        let u0 = NodalField::from_fn(&mesh, |x, _| x * (1.0 - x));
        let r = spectral_solve(&u0, 0.5, 0.0, &mesh, 200).unwrap();
        let diff = NodalField {
            values: r
                .values
                .iter()
                .zip(&u0.values)
                .map(|(a, b)| a - b)
                .collect(),
        };
        assert!(l2_norm(&mesh, &diff) < 1e-3);
    }

    #[test]
    fn spectral_mode_doubling_converges() {
        let mesh = build_mesh(1, 200).unwrap();
        let u0 = NodalField::from_fn(&mesh, |x, _| x * (1.0 - x));
        let a = spectral_solve(&u0, 0.5, 0.1, &mesh, 50).unwrap();
        let b = spectral_solve(&u0, 0.5, 0.1, &mesh, 100).unwrap();
        let diff = NodalField {
            values: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| x - y)
                .collect(),
        };
        assert!(l2_norm(&mesh, &diff) < 1e-9);
    }
}
