mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::Parser;
use serde::Serialize;

use maxent::bench::{run_benchmark, BenchConfig, BenchInstance};
use maxent::data::{load_problem, load_table, save_problem, synth_problem};
use maxent::oracle::validation_suite;
use maxent::path::{
    fit_path, make_schedule, make_schedule_with, scaled_anchors, t_max, PathOptions,
};
use maxent::solvers::{solve, StopRule};
use maxent::{
    Error, GroupPartition, PenaltyKind, PenaltySpec, Problem, SolverChoice, SolverOptions,
};

use args::{
    BenchArgs, Cli, Command, FitArgs, InputArgs, PathArgs, PenaltyArgs, PenaltyFlag, ScheduleArgs,
    SolverArgs, SolverFlag, StopFlag, SynthArgs, ValidateArgs,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let outcome = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Path(a) => path(a),
        Command::Bench(a) => bench(a),
        Command::Validate(a) => validate(a),
        Command::Synth(a) => synth(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Numerical breakdowns exit with 1, everything else is bad input.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::NonFinite { .. } | Error::PowerIteration { .. } | Error::Oracle(_)) => EXIT_FAILURE,
        _ => EXIT_INPUT,
    }
}

fn solver_choice(flag: SolverFlag) -> SolverChoice {
    match flag {
        SolverFlag::Npdhg => SolverChoice::Npdhg,
        SolverFlag::NpdhgNonsmooth => SolverChoice::NpdhgNonsmooth,
        SolverFlag::NpdhgSmooth => SolverChoice::NpdhgSmooth,
        SolverFlag::Fbs => SolverChoice::Fbs,
        SolverFlag::Structmaxent2 => SolverChoice::Structmaxent2,
    }
}

fn solver_options(a: &SolverArgs) -> anyhow::Result<SolverOptions> {
    let opts = SolverOptions {
        tol: a.tol,
        min_iters: a.min_iters,
        max_iters: a.max_iters,
        stop_rule: match a.stop_rule {
            StopFlag::Residual => StopRule::Residual,
            StopFlag::Kkt => StopRule::Kkt,
        },
        ..SolverOptions::default()
    };
    opts.validate()?;
    Ok(opts)
}

fn read_groups(path: &Path, m: usize) -> anyhow::Result<GroupPartition> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading groups from {}", path.display()))?;
    let groups: Vec<Vec<usize>> = serde_json::from_str(&text)
        .with_context(|| format!("parsing groups in {}", path.display()))?;
    Ok(GroupPartition::new(groups, m)?)
}

/// Builds the penalty family from flags; `None` when no family was given.
fn penalty_kind(a: &PenaltyArgs, m: usize) -> anyhow::Result<Option<PenaltyKind>> {
    let Some(flag) = a.penalty else {
        if a.alpha.is_some() || a.groups.is_some() {
            bail!("--alpha and --groups need --penalty");
        }
        return Ok(None);
    };
    if a.alpha.is_some() && flag != PenaltyFlag::ElasticNet {
        bail!("--alpha only applies to --penalty elastic-net");
    }
    if a.groups.is_some() && flag != PenaltyFlag::GroupLasso {
        bail!("--groups only applies to --penalty group-lasso");
    }
    let kind = match flag {
        PenaltyFlag::ElasticNet => PenaltyKind::elastic_net(a.alpha.unwrap_or(1.0))?,
        PenaltyFlag::GroupLasso => {
            let path = a.groups.as_ref().ok_or_else(|| anyhow!("--penalty group-lasso needs --groups"))?;
            PenaltyKind::GroupLasso {
                groups: read_groups(path, m)?,
            }
        }
        PenaltyFlag::Linf => PenaltyKind::LInf,
    };
    Ok(Some(kind))
}

/// Parses `elastic-net:ALPHA`, `group-lasso` or `linf`.
fn parse_penalty(s: &str, groups: Option<&Path>, m: usize) -> anyhow::Result<PenaltyKind> {
    let (name, param) = match s.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (s, None),
    };
    match (name, param) {
        ("elastic-net", p) => {
            let alpha = match p {
                Some(p) => p.parse().with_context(|| format!("bad alpha in {s:?}"))?,
                None => 1.0,
            };
            Ok(PenaltyKind::elastic_net(alpha)?)
        }
        ("group-lasso", None) => {
            let path = groups.ok_or_else(|| anyhow!("group-lasso needs --groups"))?;
            Ok(PenaltyKind::GroupLasso {
                groups: read_groups(path, m)?,
            })
        }
        ("linf", None) => Ok(PenaltyKind::LInf),
        _ => bail!("unknown penalty {s:?}; expected elastic-net:ALPHA, group-lasso or linf"),
    }
}

/// Loads the problem and applies the penalty flags. Also returns the row
/// labels when the input was a cell table.
fn load(input: &InputArgs, penalty: &PenaltyArgs) -> anyhow::Result<(Problem, Option<Vec<String>>)> {
    let (problem, ids) = match (&input.input, &input.problem) {
        (Some(csv), None) => {
            let table = load_table(csv).with_context(|| format!("reading {}", csv.display()))?;
            let kind = penalty_kind(penalty, table.m())?
                .ok_or_else(|| anyhow!("CSV input needs --penalty"))?;
            let problem = table.to_problem(PenaltySpec::new(kind, 0.0)?, !input.raw_features)?;
            (problem, Some(table.cell_ids().to_vec()))
        }
        (None, Some(file)) => {
            let problem = load_problem(file).with_context(|| format!("reading {}", file.display()))?;
            let problem = match penalty_kind(penalty, problem.phi().m())? {
                Some(kind) => problem.with_penalty(PenaltySpec::new(kind, problem.t())?)?,
                None => problem,
            };
            (problem, None)
        }
        _ => bail!("give exactly one of --input or --problem"),
    };
    for warning in problem.hull_warnings() {
        eprintln!("warning: {warning}");
    }
    Ok((problem, ids))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

#[derive(Serialize)]
struct FitOutput<'a> {
    solver: &'static str,
    penalty: &'a PenaltySpec,
    t_max: f64,
    w: &'a [f64],
    iterations: usize,
    converged: bool,
    residual: f64,
    objective_primal: f64,
    objective_dual: f64,
}

fn fit(a: FitArgs) -> anyhow::Result<ExitCode> {
    let (problem, ids) = load(&a.input, &a.penalty)?;
    let tmax = t_max(&problem)?;
    if a.t_max_only {
        writeln!(io::stdout().lock(), "{tmax}")?;
        return Ok(ExitCode::SUCCESS);
    }
    let t = match (a.t, a.t_fraction) {
        (Some(t), _) => t,
        (None, Some(f)) => f * tmax,
        (None, None) => problem.t(),
    };
    let problem = problem.with_penalty(problem.penalty().with_t(t))?;
    let opts = solver_options(&a.solver)?;
    let choice = solver_choice(a.solver.solver);
    let zero = vec![0.0; problem.phi().m()];
    let sol = solve(&problem, choice, &zero, &zero, &opts)?;

    let out = FitOutput {
        solver: choice.resolve(&problem.penalty().kind).name(),
        penalty: problem.penalty(),
        t_max: tmax,
        w: &sol.w,
        iterations: sol.report.iterations,
        converged: sol.report.converged,
        residual: sol.report.final_residual,
        objective_primal: sol.report.objective_primal,
        objective_dual: sol.report.objective_dual,
    };
    write_json(&out, a.output.as_deref())?;
    if let Some(path) = &a.output_p {
        let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(f, "id,p")?;
        for (j, pj) in sol.p.probs().iter().enumerate() {
            match &ids {
                Some(ids) => writeln!(f, "{},{pj:e}", ids[j])?,
                None => writeln!(f, "{j},{pj:e}")?,
            }
        }
        f.flush()?;
    }
    if !sol.report.converged {
        eprintln!("warning: no convergence after {} iterations", sol.report.iterations);
        return Ok(ExitCode::from(EXIT_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_anchors(raw: &[String]) -> anyhow::Result<Vec<(usize, f64)>> {
    raw.iter()
        .map(|s| {
            let (i, f) = s
                .split_once(':')
                .ok_or_else(|| anyhow!("anchor {s:?} is not index:fraction"))?;
            Ok((i.trim().parse()?, f.trim().parse()?))
        })
        .collect::<anyhow::Result<_>>()
        .context("parsing --schedule-anchors")
}

fn schedule(a: &ScheduleArgs, t0: f64) -> anyhow::Result<Option<Vec<f64>>> {
    if let Some(raw) = &a.schedule_anchors {
        return Ok(Some(make_schedule_with(t0, &parse_anchors(raw)?)?));
    }
    if let Some(count) = a.schedule_count {
        return Ok(Some(make_schedule_with(t0, &scaled_anchors(count)?)?));
    }
    if a.t0.is_some() {
        return Ok(Some(make_schedule(t0)?));
    }
    Ok(None)
}

fn path(a: PathArgs) -> anyhow::Result<ExitCode> {
    let (problem, _) = load(&a.input, &a.penalty)?;
    let t0 = match a.schedule.t0 {
        Some(t0) => t0,
        None => t_max(&problem)?,
    };
    let opts = PathOptions {
        solver: solver_choice(a.solver.solver),
        warm_start: !a.schedule.cold_start,
        solver_opts: solver_options(&a.solver)?,
        t0: Some(t0),
        schedule: schedule(&a.schedule, t0)?,
    };
    let result = fit_path(&problem, &opts)?;

    if a.output_json.is_some() || a.output_csv.is_none() {
        match &a.output_json {
            Some(p) => result.save_json(p).with_context(|| format!("writing {}", p.display()))?,
            None => writeln!(io::stdout().lock(), "{}", result.to_json()?)?,
        }
    }
    if let Some(p) = &a.output_csv {
        let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        result.write_csv(BufWriter::new(f))?;
    }
    let failed = result.records.iter().filter(|r| !r.converged).count();
    eprintln!(
        "{} grid points, {} iterations, {} unconverged",
        result.records.len(),
        result.total_iterations(),
        failed
    );
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    })
}

fn bench(a: BenchArgs) -> anyhow::Result<ExitCode> {
    let placeholder = PenaltySpec::new(PenaltyKind::LInf, 0.0)?;
    let mut instances = Vec::new();
    for p in &a.problems {
        let problem = load_problem(p).with_context(|| format!("reading {}", p.display()))?;
        instances.push(BenchInstance {
            name: p.display().to_string(),
            problem,
        });
    }
    for p in &a.inputs {
        let table = load_table(p).with_context(|| format!("reading {}", p.display()))?;
        instances.push(BenchInstance {
            name: p.display().to_string(),
            problem: table.to_problem(placeholder.clone(), !a.raw_features)?,
        });
    }
    if instances.is_empty() {
        let s = synth_problem(a.synth_n, a.synth_m, a.seed, a.synth_ratio)?;
        eprintln!("synthetic instance: norm ratio {:.2}", s.achieved_ratio);
        instances.push(BenchInstance {
            name: format!("synth-{}x{}-seed{}", a.synth_n, a.synth_m, a.seed),
            problem: s.problem(placeholder)?,
        });
    }
    let m = instances[0].problem.phi().m();
    let penalties = a
        .penalties
        .iter()
        .map(|s| parse_penalty(s, a.groups.as_deref(), m))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let solvers: Vec<SolverChoice> = a.solvers.iter().map(|f| solver_choice(*f)).collect();
    let solver_opts = SolverOptions {
        tol: a.tol,
        min_iters: a.min_iters,
        max_iters: a.max_iters,
        ..SolverOptions::default()
    };
    solver_opts.validate()?;
    let config = BenchConfig {
        runs: a.runs,
        parallel: a.parallel,
        path: PathOptions {
            solver_opts,
            ..PathOptions::default()
        },
    };
    let report = run_benchmark(&instances, &solvers, &penalties, &config)?;
    print!("{}", report.table());
    if let Some(p) = &a.output_json {
        std::fs::write(p, report.to_json()?).with_context(|| format!("writing {}", p.display()))?;
    }
    let broken = report.rows.iter().any(|r| r.supported && !r.all_converged());
    Ok(if broken {
        ExitCode::from(EXIT_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}

fn validate(a: ValidateArgs) -> anyhow::Result<ExitCode> {
    let rows = validation_suite(a.seed)?;
    let width = rows.iter().map(|r| r.check.len()).max().unwrap_or(0);
    let mut out = io::stdout().lock();
    for r in &rows {
        writeln!(
            out,
            "{}  {:<width$}  cases {:>4}  worst {:>10.3e}  tol {:.0e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.check,
            r.cases,
            r.worst,
            r.tolerance,
        )?;
    }
    Ok(if rows.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    })
}

fn synth(a: SynthArgs) -> anyhow::Result<ExitCode> {
    let s = synth_problem(a.n, a.m, a.seed, a.ratio)?;
    let kind = penalty_kind(&a.penalty, a.m)?.unwrap_or(PenaltyKind::ElasticNet { alpha: 1.0 });
    let problem = s.problem(PenaltySpec::new(kind, 0.0)?)?;
    save_problem(&problem, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    eprintln!("norm ratio {:.4} (target {})", s.achieved_ratio, a.ratio);
    Ok(ExitCode::SUCCESS)
}
