mod report;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levydam::config::{RunConfig, Scenario};
use levydam::cost::{self, Dam};
use levydam::mc;
use levydam::optimize::{self, Stage};
use levydam::validation::{self, ValidateOptions};
use levydam::Error;

use report::{real, KeyValues, Table};

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VALIDATION: u8 = 3;

#[derive(Parser)]
#[command(name = "levydam", version, about = "Exit quantities and costs for a Lévy-driven dam under a two-threshold release policy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Emit CSV instead of an aligned table.
    #[arg(long)]
    csv: bool,
    /// Override the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of simulated paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the scale-function grid step.
    #[arg(long = "grid-step")]
    grid_step: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the discount rate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the start state.
    #[arg(long)]
    x: Option<f64>,
    /// Relative corruption of every scale table (testing hook).
    #[arg(long = "perturb-scale", hide = true, default_value_t = 0.0)]
    perturb_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate W, its integral, its derivative and Z on the grid.
    ScaleTable {
        #[command(flatten)]
        common: Common,
        /// Use the release-phase input (drift lowered by M).
        #[arg(long)]
        release: bool,
    },
    /// Exit-time quantities at the start state.
    Exit {
        #[command(flatten)]
        common: Common,
    },
    /// Cycle costs, total discounted cost and long-run average cost.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Search (lambda, tau) for the cheapest policy.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Write every evaluated policy as CSV to this file.
        #[arg(long)]
        surface: Option<PathBuf>,
    },
    /// Monte Carlo estimates of the cycle quantities.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also run the full-policy discounted simulation.
        #[arg(long)]
        discounted: bool,
    },
    /// Compare analytic values with Monte Carlo estimates.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Skip the full-policy discounted simulation.
        #[arg(long = "skip-discounted")]
        skip_discounted: bool,
    },
}

enum Failure {
    Core(Error),
    Other(anyhow::Error),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(c: &Common) -> Result<Scenario, Error> {
    let mut cfg = RunConfig::from_path(&c.config)?;
    if let Some(s) = c.seed {
        cfg.sim.seed = s;
    }
    if let Some(p) = c.paths {
        cfg.sim.n_paths = p;
        cfg.sim.discounted_paths = p.min(cfg.sim.discounted_paths);
    }
    if let Some(h) = c.grid_step {
        cfg.numerics.grid_step = Some(h);
    }
    if let Some(a) = c.alpha {
        cfg.cost.alpha = a;
    }
    if let Some(x) = c.x {
        cfg.x = Some(x);
    }
    cfg.build()
}

fn dam(sc: &Scenario, c: &Common) -> Result<Dam, Error> {
    Ok(Dam::new(sc.model.clone(), sc.policy, sc.numerics)?.for_spec(&sc.cost).with_perturbation(c.perturb_scale))
}

fn scale_table(c: &Common, release: bool) -> Outcome {
    let sc = load(c)?;
    let d = dam(&sc, c)?;
    let alpha = sc.cost.alpha;
    let t = if release { d.shifted(alpha)? } else { d.base(alpha)? };
    let mut tab = Table::new(&["x", "W", "Wbar", "Wprime", "Z"]);
    for x in t.nodes() {
        tab.push(vec![real(x), real(t.eval_w(x)?), real(t.eval_wbar(x)?), real(t.eval_wprime(x)?), real(t.eval_z(x)?)]);
    }
    tab.write_csv(io::stdout().lock())?;
    Ok(())
}

fn exit_quantities(c: &Common) -> Outcome {
    let sc = load(c)?;
    let d = dam(&sc, c)?;
    let (alpha, x) = (sc.cost.alpha, sc.x);
    let p = sc.policy;
    let mut kv = KeyValues::new();
    kv.real("alpha", alpha);
    kv.real("x", x);
    if x <= p.lambda {
        kv.real("lt_fill", d.lt_fill(alpha, x)?);
        kv.real("mean_fill", d.mean_fill(x)?);
        let u = d.potential_fill(alpha, x)?;
        kv.real("potential_fill_mass", u.total_mass());
        let k = d.overshoot(alpha, x)?;
        kv.real("overshoot_atom_at_lambda", k.atom_at_lambda);
        kv.real("overshoot_mass", k.total_mass());
        kv.real("overshoot_spill_mass", k.tail_beyond(p.v));
    }
    if x > p.tau && p.v.is_finite() {
        kv.real("lt_release", d.lt_release(alpha, x)?);
        kv.real("mean_release", d.mean_release(x)?);
        kv.real("potential_release_mass", d.potential_release(alpha, x)?.total_mass());
    } else if x > p.tau {
        kv.real("lt_release", d.lt_release(alpha, x)?);
        kv.real("mean_release", d.mean_release(x)?);
    }
    if p.v.is_finite() {
        kv.real("lt_cycle", d.lt_cycle(alpha, x)?);
        kv.real("mean_cycle", d.mean_cycle_from(x)?);
    }
    kv.write(io::stdout().lock(), c.csv)?;
    Ok(())
}

fn evaluate(c: &Common) -> Outcome {
    let sc = load(c)?;
    let d = dam(&sc, c)?;
    let spec = &sc.cost;
    let tau = sc.policy.tau;
    let mut kv = KeyValues::new();
    kv.real("alpha", spec.alpha);
    kv.real("x", sc.x);
    let parts = cost::cycle_cost_fill_parts(&d, spec, tau)?;
    kv.real("switching_cost", parts.switching);
    kv.real("release_reward", parts.reward);
    kv.real("fill_penalty", parts.penalty_fill);
    kv.real("release_penalty", parts.penalty_release);
    kv.real("cycle_cost", parts.total());
    kv.real("lt_fill", parts.lt_fill);
    kv.real("lt_cycle", parts.lt_cycle);
    if sc.x != tau {
        kv.real("cycle_cost_from_x", cost::cycle_cost(&d, spec, sc.x)?);
    }
    if spec.alpha > 0.0 {
        match cost::total_discounted_cost(&d, spec, sc.x) {
            Ok(v) => kv.real("total_discounted_cost", v),
            Err(Error::RenewalDivergence(l)) => {
                log::warn!("renewal sum diverges: lt_cycle = {l}");
                kv.real("total_discounted_cost", f64::INFINITY);
            }
            Err(e) => return Err(e.into()),
        }
    }
    kv.real("mean_cycle", d.mean_cycle()?);
    kv.real("longrun_average_cost", cost::longrun_average_cost(&d, spec)?);
    kv.write(io::stdout().lock(), c.csv)?;
    Ok(())
}

fn run_optimize(c: &Common, surface: Option<&PathBuf>) -> Outcome {
    let sc = load(c)?;
    let Some(search) = sc.search else {
        return Err(Error::Config("optimize needs a \"search\" block in the config".into()).into());
    };
    let p = sc.policy;
    let opt = optimize::optimize(&sc.model, &sc.cost, p.m, p.v, sc.numerics, &search)?;
    let mut kv = KeyValues::new();
    kv.real("lambda", opt.lambda);
    kv.real("tau", opt.tau);
    kv.real("cost", opt.cost);
    kv.real("evaluations", opt.trace.len() as f64);
    kv.write(io::stdout().lock(), c.csv)?;
    if let Some(path) = surface {
        let mut tab = Table::new(&["lambda", "tau", "cost", "stage"]);
        for t in &opt.trace {
            let stage = match t.stage {
                Stage::Grid => "grid",
                Stage::Refine => "refine",
            };
            tab.push(vec![real(t.lambda), real(t.tau), real(t.cost), stage.to_string()]);
        }
        let file = std::fs::File::create(path).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        tab.write_csv(file)?;
    }
    Ok(())
}

fn estimate_row(tab: &mut Table, name: &str, e: &mc::Estimate) {
    tab.push(vec![name.to_string(), real(e.mean), real(e.stderr), e.n.to_string(), real(e.truncated_fraction)]);
}

fn simulate(c: &Common, discounted: bool) -> Outcome {
    let sc = load(c)?;
    let x = sc.x;
    let sim = mc::simulate_cycle(&sc.model, &sc.policy, &sc.cost, x, &sc.sim.config())?;
    let mut tab = Table::new(&["quantity", "mean", "stderr", "n", "truncated_fraction"]);
    estimate_row(&mut tab, "lt_fill", &sim.lt_fill);
    estimate_row(&mut tab, "lt_cycle", &sim.lt_cycle);
    estimate_row(&mut tab, "mean_fill", &sim.mean_fill);
    estimate_row(&mut tab, "mean_cycle", &sim.mean_cycle);
    estimate_row(&mut tab, "cycle_cost", &sim.cost);
    estimate_row(&mut tab, "cycle_cost_undiscounted", &sim.cost_undiscounted);
    if x == sc.policy.tau {
        estimate_row(&mut tab, "longrun_average_cost", &sim.longrun);
    }
    let mean_overshoot = mc::Estimate::from_samples(&sim.overshoots, sim.mean_fill.truncated_fraction);
    estimate_row(&mut tab, "mean_overshoot", &mean_overshoot);
    if discounted {
        let e = mc::simulate_discounted(&sc.model, &sc.policy, &sc.cost, x, sc.sim.discounted_horizon, &sc.sim.discounted_config())?;
        estimate_row(&mut tab, "total_discounted_cost", &e);
    }
    tab.write(io::stdout().lock(), c.csv)?;
    Ok(())
}

fn run_validate(c: &Common, skip_discounted: bool) -> Outcome {
    let sc = load(c)?;
    let opts = ValidateOptions { perturb: c.perturb_scale, skip_discounted_run: skip_discounted };
    let checks = validation::validate(&sc, opts)?;
    let mut tab = Table::new(&["quantity", "analytic", "mc_mean", "mc_stderr", "z", "result"]);
    for ch in &checks {
        let verdict = if ch.pass { "pass" } else { "FAIL" };
        tab.push(vec![
            ch.name.clone(),
            real(ch.analytic),
            real(ch.estimate.mean),
            real(ch.estimate.stderr),
            real(ch.z),
            verdict.to_string(),
        ]);
    }
    tab.write(io::stdout().lock(), c.csv)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        eprintln!("validation failed: {failed} of {} checks outside {} standard errors", checks.len(), validation::Z_LIMIT);
        return Err(Failure::Validation);
    }
    Ok(())
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::ScaleTable { common, .. }
        | Command::Exit { common }
        | Command::Evaluate { common }
        | Command::Optimize { common, .. }
        | Command::Simulate { common, .. }
        | Command::Validate { common, .. } => common,
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>().is_some_and(|e| matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = common(&cli.command).threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let result = match &cli.command {
        Command::ScaleTable { common, release } => scale_table(common, *release),
        Command::Exit { common } => exit_quantities(common),
        Command::Evaluate { common } => evaluate(common),
        Command::Optimize { common, surface } => run_optimize(common, surface.as_ref()),
        Command::Simulate { common, discounted } => simulate(common, *discounted),
        Command::Validate { common, skip_discounted } => run_validate(common, *skip_discounted),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => ExitCode::from(EXIT_VALIDATION),
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERICAL })
        }
        Err(Failure::Other(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
