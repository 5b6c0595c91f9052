use clap::{Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use subdiff::error::Error;
use subdiff::experiments::{
    self, example_data, fig1a_csv, fig1b_csv, generate_data, table_csv, trace_csv, ExampleId,
    ExperimentSpec,
};
use subdiff::inverse::{isakov_step, run_inversion, InversionConfig};
use subdiff::mesh::{build_mesh, l2_norm, sup_norm, Mesh, NodalField};
use subdiff::mlf::{c_alpha, mittag_leffler, MLAccuracy};
use subdiff::solver::{forward_solve, ForwardOptions};

#[derive(Parser)]
#[command(
    name = "subdiff",
    about = "Subdiffusion forward solver and inverse potential reconstruction"
)]
struct Cli {
    /// Output directory (defaults to $SUBDIFF_OUTDIR or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the experiment base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap the rayon worker count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print progress lines.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Mittag-Leffler function E_{alpha,beta}(z).
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Compute c_alpha = sup_t t E_{alpha,alpha}(-t) and its analytic bound.
    Calpha {
        #[arg(long)]
        alpha: f64,
    },
    /// Emit the fig1a/fig1b CSV data files.
    Figures {
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Solve the forward problem and write the terminal field as CSV.
    Forward {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the inverse potential iteration on synthetic data.
    Invert {
        #[arg(long)]
        config: PathBuf,
        /// Disable Anderson acceleration.
        #[arg(long)]
        no_accel: bool,
        /// Use the Isakov iteration instead of the fixed-point map.
        #[arg(long)]
        isakov: bool,
    },
    /// Run a full table of (alpha, epsilon) cells from a spec file.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForwardConfig {
    alpha: f64,
    #[serde(rename = "T")]
    t_final: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    /// Built-in example id; alternatively supply q_csv and u0_csv.
    example: Option<ExampleId>,
    q_csv: Option<PathBuf>,
    u0_csv: Option<PathBuf>,
    /// Required when loading fields from CSV.
    dimension: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InvertConfig {
    example: ExampleId,
    alpha: f64,
    #[serde(rename = "T")]
    t_final: f64,
    #[serde(rename = "M_data")]
    m_data: usize,
    #[serde(rename = "N_data")]
    n_data: usize,
    #[serde(rename = "M_inv")]
    m_inv: usize,
    #[serde(rename = "N_inv")]
    n_inv: usize,
    epsilon: f64,
    lambda: f64,
    m: usize,
    tau: f64,
    max_iter: usize,
    base_seed: u64,
    #[serde(default = "default_svd_cutoff")]
    svd_cutoff: f64,
    #[serde(default = "default_g_min")]
    g_min: f64,
}

fn default_svd_cutoff() -> f64 {
    1e-12
}

fn default_g_min() -> f64 {
    1e-8
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are configuration errors.
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not configure thread pool: {e}");
            std::process::exit(1);
        }
    }
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_)
        | Error::MeshSize(_)
        | Error::IncompatibleMesh(_)
        | Error::Config(_)
        | Error::Io(_)
        | Error::Json(_) => 1,
        Error::AccuracyNotMet { .. }
        | Error::BracketFailure(_)
        | Error::QuadratureFailure(_)
        | Error::SingularSystem(_)
        | Error::SolverFailure(_)
        | Error::SmallDivisor { .. } => 2,
    }
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("SUBDIFF_OUTDIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(dir: &Path, name: &str, contents: &str, verbose: bool) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    if verbose {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn field_csv(mesh: &Mesh, field: &NodalField) -> String {
    let mut s = String::new();
    if mesh.dimension == 1 {
        s.push_str("x,value\n");
        for (id, &(x, _)) in mesh.nodes.iter().enumerate() {
            s.push_str(&format!("{x},{}\n", field.values[id]));
        }
    } else {
        s.push_str("x,y,value\n");
        for (id, &(x, y)) in mesh.nodes.iter().enumerate() {
            s.push_str(&format!("{x},{y},{}\n", field.values[id]));
        }
    }
    s
}

fn load_field_csv(path: &Path, mesh: &Mesh) -> Result<NodalField, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.chars().any(|c| c.is_alphabetic()) {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or("");
        values.push(last.trim().parse::<f64>().map_err(|e| {
            Error::Config(format!("{}:{}: bad value: {e}", path.display(), i + 1))
        })?);
    }
    if values.len() != mesh.node_count() {
        return Err(Error::IncompatibleMesh(format!(
            "{} has {} values, mesh has {} nodes",
            path.display(),
            values.len(),
            mesh.node_count()
        )));
    }
    Ok(NodalField { values })
}

fn run(cli: &Cli) -> Result<(), Error> {
    let acc = MLAccuracy::default();
    match &cli.command {
        Command::Ml { alpha, beta, z } => {
            let v = mittag_leffler(*alpha, *beta, *z, &acc)?;
            println!("{v}");
        }
        Command::Calpha { alpha } => {
            let r = c_alpha(*alpha, &acc)?;
            println!("alpha,c_alpha,t_star,upper_bound");
            println!("{},{},{},{}", r.alpha, r.c_alpha, r.t_star, r.upper_bound);
        }
        Command::Figures { points } => {
            let dir = out_dir(cli);
            let fig1a = fig1a_csv(&[0.25, 0.5, 0.75, 1.0], *points)?;
            write_file(&dir, "fig1a.csv", &fig1a, cli.verbose)?;
            let alphas: Vec<f64> = (1..=19).map(|i| 0.05 * i as f64).chain([1.0]).collect();
            let fig1b = fig1b_csv(&alphas)?;
            write_file(&dir, "fig1b.csv", &fig1b, cli.verbose)?;
        }
        Command::Forward { config } => {
            let cfg: ForwardConfig = read_json(config)?;
            let (mesh, q, u0) = match (cfg.example, &cfg.q_csv, &cfg.u0_csv) {
                (Some(example), None, None) => {
                    let mesh = build_mesh(example.dimension(), cfg.m)?;
                    let (u0, q) = example_data(example, &mesh)?;
                    (mesh, q, u0)
                }
                (None, Some(q_csv), Some(u0_csv)) => {
                    let dim = cfg.dimension.ok_or_else(|| {
                        Error::Config("dimension is required with CSV fields".into())
                    })?;
                    let mesh = build_mesh(dim, cfg.m)?;
                    let q = load_field_csv(q_csv, &mesh)?;
                    let mut u0 = load_field_csv(u0_csv, &mesh)?;
                    u0.project_dirichlet(&mesh);
                    (mesh, q, u0)
                }
                _ => {
                    return Err(Error::Config(
                        "specify either example, or both q_csv and u0_csv".into(),
                    ))
                }
            };
            let result = forward_solve(
                &q,
                &u0,
                cfg.alpha,
                cfg.t_final,
                &mesh,
                cfg.n,
                ForwardOptions::default(),
            )?;
            write_file(
                &out_dir(cli),
                "terminal.csv",
                &field_csv(&mesh, &result.terminal),
                cli.verbose,
            )?;
        }
        Command::Invert {
            config,
            no_accel,
            isakov,
        } => {
            let cfg: InvertConfig = read_json(config)?;
            if let Some(seed) = cli.seed {
                run_invert(cli, InvertConfig { base_seed: seed, ..cfg }, *no_accel, *isakov)?;
            } else {
                run_invert(cli, cfg, *no_accel, *isakov)?;
            }
        }
        Command::Experiment { spec } => {
            let mut spec: ExperimentSpec = read_json(spec)?;
            if let Some(seed) = cli.seed {
                spec.base_seed = seed;
            }
            let detailed = experiments::run_table_detailed(&spec)?;
            let dir = out_dir(cli);
            let cells: Vec<_> = detailed.iter().map(|(c, _)| c.clone()).collect();
            write_file(&dir, "table.csv", &table_csv(&cells), cli.verbose)?;
            for (cell, trace) in &detailed {
                let name = format!(
                    "trace_{}_alpha{}_eps{}.csv",
                    cell.example, cell.alpha, cell.epsilon
                );
                write_file(&dir, &name, &trace_csv(trace), cli.verbose)?;
            }
            if cli.verbose {
                eprintln!("{} cells completed", detailed.len());
            }
        }
    }
    Ok(())
}

fn run_invert(cli: &Cli, cfg: InvertConfig, no_accel: bool, isakov: bool) -> Result<(), Error> {
    let spec = ExperimentSpec {
        example: cfg.example,
        alphas: vec![cfg.alpha],
        epsilons: vec![cfg.epsilon],
        t_final: cfg.t_final,
        m_data: cfg.m_data,
        n_data: cfg.n_data,
        m_inv: cfg.m_inv,
        n_inv: cfg.n_inv,
        lambda: cfg.lambda,
        m: cfg.m,
        tau: cfg.tau,
        base_seed: cfg.base_seed,
        accelerate: !no_accel,
        max_iter: cfg.max_iter,
    };
    spec.validate()?;
    let data = generate_data(&spec, cfg.alpha, cfg.epsilon)?;
    let mesh = build_mesh(cfg.example.dimension(), cfg.m_inv)?;
    let (u0, _) = example_data(cfg.example, &mesh)?;
    let dir = out_dir(cli);

    if isakov {
        let icfg = InversionConfig {
            svd_cutoff: cfg.svd_cutoff,
            delta: data.delta,
            ..spec.inversion_config(cfg.alpha, data.delta)
        };
        let mut q = NodalField::zeros(&mesh);
        let mut trace = String::from("k,e_q\n");
        for k in 1..=cfg.max_iter {
            q = isakov_step(&q, &icfg, &mesh, &u0, &data.g, cfg.g_min)?;
            let d = NodalField {
                values: q
                    .values
                    .iter()
                    .zip(&data.q_true_inv.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            trace.push_str(&format!("{k},{}\n", l2_norm(&mesh, &d)));
        }
        write_file(&dir, "isakov_trace.csv", &trace, cli.verbose)?;
        write_file(&dir, "q_final.csv", &field_csv(&mesh, &q), cli.verbose)?;
        return Ok(());
    }

    let icfg = InversionConfig {
        svd_cutoff: cfg.svd_cutoff,
        ..spec.inversion_config(cfg.alpha, data.delta)
    };
    let guess = NodalField::zeros(&mesh);
    let result = run_inversion(
        &icfg,
        &mesh,
        &u0,
        &data.g,
        &guess,
        !no_accel,
        Some(&data.q_true_inv),
    )?;
    let last = result.records.last();
    let summary = serde_json::json!({
        "example": cfg.example.name(),
        "alpha": cfg.alpha,
        "epsilon": cfg.epsilon,
        "delta": data.delta,
        "stop_index": result.stop_index,
        "stop_reason": match result.stop_reason {
            subdiff::inverse::StopReason::Discrepancy => "discrepancy",
            subdiff::inverse::StopReason::MaxIter => "max_iter",
            subdiff::inverse::StopReason::SolverFailure => "solver_failure",
        },
        "r_q": last.map(|r| r.r_q),
        "e_q": last.and_then(|r| r.e_q),
        "q_sup": sup_norm(&result.q_final),
        "failure": result.failure,
    });
    write_file(
        &dir,
        "invert_summary.json",
        &serde_json::to_string_pretty(&summary)?,
        cli.verbose,
    )?;
    write_file(&dir, "invert_trace.csv", &trace_csv(&result), cli.verbose)?;
    write_file(
        &dir,
        "q_final.csv",
        &field_csv(&mesh, &result.q_final),
        cli.verbose,
    )?;
    Ok(())
}
