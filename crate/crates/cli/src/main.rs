//! Command-line front end: scenario generation, codeword-length
//! optimization, seeded simulation, parameter sweeps, and the
//! admitted-size/blockage/load summary grid.

use clap::{Args, Parser, Subcommand, ValueEnum};
use dms_core::channel::Protocol;
use dms_core::filter::FilterKind;
use dms_core::optimizer::{evaluate_admission, select_admission_size, EtaMode, SolverOptions};
use dms_core::scenario::{compile, gen_reference, gen_single_link, GenOptions, Scenario};
use dms_core::sim::{replicate, run, RunStats, SweepPoint};
use dms_core::soi::UtilityKind;
use dms_core::Error;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "dms", about = "Goal-oriented monitoring network toolkit", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    /// Scattered sensors feeding a monitor grid.
    Reference,
    /// Minimal one-sensor one-monitor layout.
    SingleLink,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Eut,
    Lut,
    Rut,
}

impl From<FormArg> for UtilityKind {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Eut => UtilityKind::Eut,
            FormArg::Lut => UtilityKind::Lut,
            FormArg::Rut => UtilityKind::Rut,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Fixed,
    Adaptive,
    AdaptiveAsym,
}

impl From<FilterArg> for FilterKind {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Fixed => FilterKind::Fixed,
            FilterArg::Adaptive => FilterKind::Adaptive,
            FilterArg::AdaptiveAsym => FilterKind::AdaptiveAsymptotic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Arq,
    Harq,
}

/// Scenario loading plus the overrides shared by the analysis and
/// simulation subcommands.
#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file to load.
    #[arg(long)]
    scenario: PathBuf,
    /// Timeliness utility family override.
    #[arg(long, value_enum)]
    form: Option<FormArg>,
    /// Semantic filter override.
    #[arg(long, value_enum)]
    filter: Option<FilterArg>,
    /// Error-control protocol override.
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Arrival-rate override (packets/second).
    #[arg(long)]
    lambda: Option<f64>,
    /// Admitted-set size override.
    #[arg(long)]
    admitted_size: Option<usize>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, Error> {
        let text = fs::read_to_string(&self.scenario)?;
        let mut s = Scenario::from_json(&text)?;
        if let Some(f) = self.form {
            s.utility.form = f.into();
        }
        if let Some(f) = self.filter {
            s.filter.kind = f.into();
            if s.filter.kind == FilterKind::AdaptiveAsymptotic {
                s.filter.admitted_size = Some(s.source.n);
            }
        }
        if let Some(p) = self.protocol {
            match p {
                ProtocolArg::Arq => s.error_control.protocol = Protocol::Arq,
                ProtocolArg::Harq => {
                    let rmax_mode = s.error_control.rmax_mode;
                    s.error_control = dms_core::scenario::harq_error_control();
                    s.error_control.rmax_mode = rmax_mode;
                }
            }
        }
        if let Some(l) = self.lambda {
            s.source.lambda = l;
        }
        if let Some(l) = self.admitted_size {
            s.filter.admitted_size = Some(l);
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a scenario file for one of the built-in layouts.
    GenScenario {
        #[arg(long, value_enum, default_value = "reference")]
        kind: KindArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output path.
        #[arg(long)]
        out: PathBuf,
        /// Sensor count (reference layout).
        #[arg(long, default_value_t = 100)]
        sensors: usize,
        /// Monitors per grid side (reference layout).
        #[arg(long, default_value_t = 4)]
        monitors_side: usize,
        /// Monitors each sensor feeds.
        #[arg(long, default_value_t = 4)]
        fan_out: usize,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
    },
    /// Solve the codeword lengths; sweeps the admitted size when the
    /// scenario leaves it open.
    Optimize {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run seeded replicas of the event simulation.
    Simulate {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replicas: u32,
        /// Observation horizon override (seconds).
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Also write the first replica's delivery traces as CSV.
        #[arg(long)]
        emit_traces: bool,
    },
    /// Simulate a grid of (rate, admitted size, filter, form) points.
    Sweep {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        replicas: u32,
        #[arg(long)]
        horizon: Option<f64>,
        /// Comma-separated arrival rates.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,5,10")]
        lambdas: Vec<f64>,
        /// Comma-separated admitted sizes; empty means the analytic optimum
        /// per point.
        #[arg(long, value_delimiter = ',')]
        ls: Vec<usize>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "fixed")]
        filters: Vec<FilterArg>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "eut")]
        forms: Vec<FormArg>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Reproduce the admitted-size / blockage / load summary grid: the
    /// analytic optimum per (rate, form, filter) plus simulated rates there.
    Table4 {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        replicas: u32,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,5,10")]
        lambdas: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "eut,lut,rut")]
        forms: Vec<FormArg>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "fixed,adaptive")]
        filters: Vec<FilterArg>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 2,
        Error::Json(_) | Error::Validation(_) | Error::InvalidArgument(_) => 3,
        _ => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}

fn solver() -> SolverOptions {
    SolverOptions::default()
}

fn mean_link(stats: &[RunStats], f: impl Fn(&dms_core::sim::LinkStats) -> f64) -> f64 {
    stats.iter().map(|r| r.mean_link(&f)).sum::<f64>() / stats.len() as f64
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::GenScenario {
            kind,
            seed,
            out,
            sensors,
            monitors_side,
            fan_out,
            lambda,
        } => {
            let scenario = match kind {
                KindArg::Reference => gen_reference(
                    seed,
                    &GenOptions {
                        sensors,
                        monitors_side,
                        fan_out,
                        lambda,
                        ..GenOptions::default()
                    },
                ),
                KindArg::SingleLink => gen_single_link(seed, lambda),
            };
            write_file(&out, &scenario.to_json()?)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Optimize { common, out_dir } => cmd_optimize(&common, &out_dir),
        Cmd::Simulate {
            common,
            seed,
            replicas,
            horizon,
            out_dir,
            emit_traces,
        } => cmd_simulate(&common, seed, replicas, horizon, &out_dir, emit_traces),
        Cmd::Sweep {
            common,
            seed,
            replicas,
            horizon,
            lambdas,
            ls,
            filters,
            forms,
            out_dir,
        } => cmd_sweep(
            &common, seed, replicas, horizon, &lambdas, &ls, &filters, &forms, &out_dir,
        ),
        Cmd::Table4 {
            common,
            seed,
            replicas,
            horizon,
            lambdas,
            forms,
            filters,
            out_dir,
        } => cmd_table4(
            &common, seed, replicas, horizon, &lambdas, &forms, &filters, &out_dir,
        ),
    }
}

fn cmd_optimize(common: &ScenarioArgs, out_dir: &Path) -> Result<(), Error> {
    let scenario = common.load()?;
    let opts = solver();
    let open_size = scenario.filter.admitted_size.is_none()
        && scenario.filter.kind != FilterKind::AdaptiveAsymptotic;
    let compiled = compile(&scenario, &opts)?;

    if open_size {
        let link = &compiled.links[0].problem;
        let sel = select_admission_size(link, 1..=scenario.source.n, EtaMode::Delivery, &opts)?;
        let mut csv = String::from(
            "l,j_soi,expected_polygon,admitted_mass,psi,gamma,mean_length,kraft_residual,taylor_stress\n",
        );
        for p in &sel.curve {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.l,
                p.j_soi,
                p.expected_polygon,
                p.admitted_mass,
                p.psi,
                p.gamma,
                p.mean_length,
                p.kraft_residual,
                p.taylor_stress
            ));
        }
        write_file(&out_dir.join("selection.csv"), &csv)?;
        println!("selected admitted size {}", sel.l_star);
    }

    let mut rows = String::from(
        "link,sensor,monitor,slot,realization,pmf,rho,phi,budget,length_real,length_int\n",
    );
    let mut summaries = Vec::new();
    for (li, link) in compiled.links.iter().enumerate() {
        let a = &link.assignment;
        let d = &link.design;
        for (slot, &i) in d.admitted.indices.iter().enumerate() {
            rows.push_str(&format!(
                "{li},{},{},{slot},{},{},{},{},{},{},{}\n",
                link.sensor,
                link.monitor,
                i,
                link.problem.pmf[i],
                d.rho[slot],
                d.phi[slot],
                d.budgets[slot],
                a.lengths[slot],
                a.lengths_int[slot]
            ));
        }
        summaries.push(serde_json::json!({
            "link": li,
            "sensor": link.sensor,
            "monitor": link.monitor,
            "admitted_size": d.admitted.len(),
            "admitted_mass": d.admitted.mass,
            "psi": d.psi,
            "gamma": d.gamma,
            "mu": a.mu,
            "chi": a.chi,
            "xi": a.xi,
            "kraft_residual": a.kraft_sum - 1.0,
            "inner_iterations": a.inner_iterations,
            "outer_iterations": a.outer_iterations,
        }));
        let rho_max = d.rho.iter().copied().fold(0.0f64, f64::max);
        let m = dms_core::soi::Moments::from_parts(&d.pi, &d.rho, &d.phi, &a.lengths, d.gamma)?;
        if m.taylor_stress(rho_max) > 0.5 {
            eprintln!(
                "warning: link {li} sits outside the expansion's validity regime (stress {:.2})",
                m.taylor_stress(rho_max)
            );
        }
    }
    write_file(&out_dir.join("lengths.csv"), &rows)?;
    write_file(
        &out_dir.join("optimize.json"),
        &serde_json::to_string_pretty(&summaries)?,
    )?;
    println!("wrote {}", out_dir.join("lengths.csv").display());
    Ok(())
}

fn link_csv_header() -> &'static str {
    "replica,sensor,monitor,arrived,filtered,blocked,transmitted,delivered,exhausted,inspection_dropped,filtered_pct,blocked_pct,transmitted_pct,load_rate_pct,busy_pct\n"
}

fn push_link_row(csv: &mut String, tag: &str, l: &dms_core::sim::LinkStats) {
    csv.push_str(&format!(
        "{tag},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        l.sensor,
        l.monitor,
        l.arrived,
        l.filtered,
        l.blocked,
        l.transmitted,
        l.delivered,
        l.exhausted,
        l.inspection_dropped,
        l.filtered_pct,
        l.blocked_pct,
        l.transmitted_pct,
        l.load_rate_pct,
        l.busy_pct
    ));
}

fn cmd_simulate(
    common: &ScenarioArgs,
    seed: u64,
    replicas: u32,
    horizon: Option<f64>,
    out_dir: &Path,
    emit_traces: bool,
) -> Result<(), Error> {
    let mut scenario = common.load()?;
    if let Some(t) = horizon {
        scenario.horizon = t;
    }
    let compiled = compile(&scenario, &solver())?;
    let stats = replicate(&compiled, seed, replicas)?;

    write_file(
        &out_dir.join("runstats.json"),
        &serde_json::to_string_pretty(&stats)?,
    )?;

    let mut links_csv = String::from(link_csv_header());
    for (r, s) in stats.iter().enumerate() {
        for l in &s.links {
            push_link_row(&mut links_csv, &r.to_string(), l);
        }
    }
    links_csv.push_str(&format!(
        "mean,,,,,,,,,,{},{},{},{},{}\n",
        mean_link(&stats, |l| l.filtered_pct),
        mean_link(&stats, |l| l.blocked_pct),
        mean_link(&stats, |l| l.transmitted_pct),
        mean_link(&stats, |l| l.load_rate_pct),
        mean_link(&stats, |l| l.busy_pct)
    ));
    write_file(&out_dir.join("runs.csv"), &links_csv)?;

    let mut layers_csv = String::from("replica,monitor,group,deliveries,soi\n");
    for (r, s) in stats.iter().enumerate() {
        for lay in &s.layers {
            layers_csv.push_str(&format!(
                "{r},{},{},{},{}\n",
                lay.monitor, lay.group, lay.deliveries, lay.soi
            ));
        }
    }
    write_file(&out_dir.join("layers.csv"), &layers_csv)?;

    if emit_traces {
        let (_, traces) = run(&compiled, dms_core::rng::replica_seed(seed, 0))?;
        for (g, trace) in traces.iter().enumerate() {
            let mut csv = String::from("time,rho,service_time\n");
            for d in &trace.deliveries {
                csv.push_str(&format!("{},{},{}\n", d.time, d.rho, d.service_time));
            }
            write_file(&out_dir.join(format!("trace_{g}.csv")), &csv)?;
        }
    }

    let j_mean = stats.iter().map(|s| s.j_soi).sum::<f64>() / stats.len() as f64;
    println!(
        "{} replicas, mean objective {j_mean:.6}, wrote {}",
        stats.len(),
        out_dir.join("runstats.json").display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    common: &ScenarioArgs,
    seed: u64,
    replicas: u32,
    horizon: Option<f64>,
    lambdas: &[f64],
    ls: &[usize],
    filters: &[FilterArg],
    forms: &[FormArg],
    out_dir: &Path,
) -> Result<(), Error> {
    let mut base = common.load()?;
    if let Some(t) = horizon {
        base.horizon = t;
    }
    let mut grid = Vec::new();
    for &lambda in lambdas {
        for filter in filters {
            for form in forms {
                if ls.is_empty() {
                    grid.push(SweepPoint {
                        lambda,
                        l: None,
                        filter: (*filter).into(),
                        form: (*form).into(),
                    });
                } else {
                    for &l in ls {
                        grid.push(SweepPoint {
                            lambda,
                            l: Some(l),
                            filter: (*filter).into(),
                            form: (*form).into(),
                        });
                    }
                }
            }
        }
    }
    let rows = dms_core::sim::sweep(&base, &grid, seed, replicas, &solver())?;
    let mut csv = String::from(
        "lambda,l,filter,form,replicas,l_used,j_mean,j_std,filtered_mean_pct,blocked_mean_pct,transmitted_mean_pct,load_rate_mean_pct,busy_mean_pct\n",
    );
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{:?},{:?},{},{},{},{},{},{},{},{},{}\n",
            row.point.lambda,
            row.point.l.map(|l| l.to_string()).unwrap_or_default(),
            row.point.filter,
            row.point.form,
            row.replicas,
            row.l_used,
            row.j_mean,
            row.j_std,
            row.filtered_mean_pct,
            row.blocked_mean_pct,
            row.transmitted_mean_pct,
            row.load_rate_mean_pct,
            row.busy_mean_pct
        ));
    }
    write_file(&out_dir.join("sweep.csv"), &csv)?;
    println!(
        "wrote {} ({} points)",
        out_dir.join("sweep.csv").display(),
        rows.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_table4(
    common: &ScenarioArgs,
    seed: u64,
    replicas: u32,
    horizon: Option<f64>,
    lambdas: &[f64],
    forms: &[FormArg],
    filters: &[FilterArg],
    out_dir: &Path,
) -> Result<(), Error> {
    let mut base = common.load()?;
    if let Some(t) = horizon {
        base.horizon = t;
    }
    let opts = solver();
    let mut csv = String::from(
        "lambda,form,filter,l_star,j_analytic,blockage_pct,load_rate_pct,j_sim_mean,j_sim_std\n",
    );
    for &lambda in lambdas {
        for form in forms {
            for filter in filters {
                let mut s = base.clone();
                s.source.lambda = lambda;
                s.utility.form = (*form).into();
                s.filter.kind = (*filter).into();
                s.filter.admitted_size = Some(10);
                let probe = compile(&s, &opts)?;
                let l_star = if s.filter.kind == FilterKind::AdaptiveAsymptotic {
                    s.source.n
                } else {
                    select_admission_size(
                        &probe.links[0].problem,
                        1..=s.source.n,
                        EtaMode::Delivery,
                        &opts,
                    )?
                    .l_star
                };
                let (point, _, _) =
                    evaluate_admission(&probe.links[0].problem, l_star, EtaMode::Delivery, &opts)?;
                s.filter.admitted_size = Some(l_star);
                let compiled = compile(&s, &opts)?;
                let stats = replicate(&compiled, seed, replicas)?;
                let n = stats.len() as f64;
                let j_mean = stats.iter().map(|r| r.j_soi).sum::<f64>() / n;
                let j_var = stats
                    .iter()
                    .map(|r| (r.j_soi - j_mean) * (r.j_soi - j_mean))
                    .sum::<f64>()
                    / n.max(1.0);
                csv.push_str(&format!(
                    "{lambda},{:?},{:?},{l_star},{},{},{},{},{}\n",
                    s.utility.form,
                    s.filter.kind,
                    point.j_soi,
                    mean_link(&stats, |l| l.blocked_pct),
                    mean_link(&stats, |l| l.load_rate_pct),
                    j_mean,
                    j_var.sqrt()
                ));
            }
        }
    }
    write_file(&out_dir.join("table4.csv"), &csv)?;
    println!("wrote {}", out_dir.join("table4.csv").display());
    Ok(())
}
