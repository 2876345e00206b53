//! `expint`: evaluate exponential iterated integrals on scene paths, run the
//! property suites, and reproduce the trefoil separation demo.

mod format;
mod verify;

use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use expint::homotopy::LoopWord;
use expint::scene::{Format as SceneFormat, Scene};
use expint::transport::Method;
use expint::trefoil::{basis_words, commutator_demo, CommutatorReport, TrefoilScene};
use expint::{ExpSum, Path, Settings};
use serde::Serialize;

const DEFAULT_SCENE: &str = include_str!("../scenes/default.toml");
const SCENE_DIR_ENV: &str = "EXPINT_SCENE_DIR";
const TREFOIL_LOOPS: [&str; 4] = ["1", "a", "b", "a b a^-1 b^-1"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "expint", version, about = "Exponential iterated integrals along paths")]
struct Cli {
    /// Scene file (TOML or JSON). Relative names are also looked up in the
    /// scene directory.
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Directory holding `default.toml`.
    #[arg(long, global = true, env = SCENE_DIR_ENV)]
    scene_dir: Option<PathBuf>,
    /// ODE tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for random probes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximal truncation degree of the exponential series.
    #[arg(long, global = true)]
    max_degree: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate an integral expression on a named path or loop word.
    Eval {
        /// Linear combination of exponential words, e.g. `2 e{delta} om_m - 1`.
        expression: String,
        /// Scene path name or loop word such as `a b^-1`.
        #[arg(long)]
        path: String,
    },
    /// Run a property suite: transport, hopf, homotopy or trefoil.
    Verify {
        /// transport, hopf, homotopy or trefoil.
        suite: String,
    },
    /// Trefoil separation table and verdict.
    Trefoil {
        /// Longest sign vector.
        #[arg(long, default_value_t = 2)]
        max_n: usize,
        /// Highest power of `int delta`.
        #[arg(long, default_value_t = 1)]
        max_m: usize,
        /// Characters `e{k delta}` with `|k| <= k-max`.
        #[arg(long, default_value_t = 1)]
        k_max: i64,
        /// Truncation degree for the series cross-check.
        #[arg(long, default_value_t = 30)]
        series_degree: usize,
        /// Also write the CSV table here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the JSON verdict here.
        #[arg(long)]
        verdict: Option<PathBuf>,
    },
    /// Scene file operations.
    Scene {
        #[command(subcommand)]
        action: SceneAction,
    },
}

#[derive(Debug, Subcommand)]
enum SceneAction {
    /// Resolve names, validate paths and probe closed forms.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Writes to stdout; a closed pipe (`expint trefoil | head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let scene = load_scene(cli)?;
    let settings = effective_settings(cli, &scene);
    let seed = cli.seed.unwrap_or_else(|| scene.seed());
    match &cli.command {
        Command::Eval { expression, path } => {
            let out = eval(&scene, settings, expression, path)?;
            emit(&render_eval(&out, cli.format)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite } => {
            let Some(report) = verify::run(suite, &scene, settings, seed)? else {
                eprintln!("error: unknown suite `{suite}` (expected one of {})", verify::SUITES.join(", "));
                return Ok(ExitCode::from(2));
            };
            emit(&render_verify(&report, cli.format)?)?;
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Trefoil {
            max_n,
            max_m,
            k_max,
            series_degree,
            csv,
            verdict,
        } => {
            let table = trefoil(settings, *max_n, *max_m, *k_max, *series_degree)?;
            if let Some(p) = csv {
                std::fs::write(p, table.csv()).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(p) = verdict {
                std::fs::write(p, serde_json::to_string_pretty(&table.verdict)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            emit(&table.render(cli.format)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Scene {
            action: SceneAction::Check,
        } => {
            let report = scene.check()?;
            let text = match cli.format {
                OutputFormat::Json => serde_json::to_string_pretty(&report)?,
                OutputFormat::Csv => {
                    let mut lines = vec!["kind,name,detail".to_string()];
                    for f in &report.forms {
                        let curl = f.curl.map(format::real).unwrap_or_default();
                        lines.push(format::csv_row(&["form".into(), f.name.clone(), curl]));
                    }
                    for p in &report.paths {
                        lines.push(format::csv_row(&["path".into(), p.name.clone(), p.pieces.to_string()]));
                    }
                    lines.join("\n")
                }
                OutputFormat::Table => {
                    let mut rows = Vec::new();
                    for f in &report.forms {
                        let detail = match f.curl {
                            Some(c) => format!("closed, curl {}", format::real(c)),
                            None => "not flagged closed".to_string(),
                        };
                        rows.push(vec!["form".to_string(), f.name.clone(), detail]);
                    }
                    for p in &report.paths {
                        let kind = if p.is_loop { "loop" } else { "open" };
                        rows.push(vec!["path".to_string(), p.name.clone(), format!("{kind}, {} pieces", p.pieces)]);
                    }
                    format!("scene ok\n{}", format::table(&["kind", "name", "detail"], &rows))
                }
            };
            emit(&text)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_scene(cli: &Cli) -> anyhow::Result<Scene> {
    let found = resolve_scene(cli.scene.as_deref(), cli.scene_dir.as_deref())?;
    let mut scene = match found {
        Some(p) => Scene::load(&p).with_context(|| format!("loading scene {}", p.display()))?,
        None => Scene::from_str(DEFAULT_SCENE, SceneFormat::Toml).context("loading the built-in scene")?,
    };
    if let Some(seed) = cli.seed {
        scene.file.settings.seed = Some(seed);
    }
    Ok(scene)
}

fn resolve_scene(scene: Option<&FsPath>, dir: Option<&FsPath>) -> anyhow::Result<Option<PathBuf>> {
    match (scene, dir) {
        (Some(p), _) if p.exists() => Ok(Some(p.to_path_buf())),
        (Some(p), Some(d)) => {
            for candidate in [d.join(p), d.join(p).with_extension("toml"), d.join(p).with_extension("json")] {
                if candidate.exists() {
                    return Ok(Some(candidate));
                }
            }
            bail!("scene {} not found (also looked in {})", p.display(), d.display())
        }
        (Some(p), None) => bail!("scene {} not found", p.display()),
        (None, Some(d)) => {
            let p = d.join("default.toml");
            Ok(p.exists().then_some(p))
        }
        (None, None) => Ok(None),
    }
}

fn effective_settings(cli: &Cli, scene: &Scene) -> Settings {
    let mut s = scene.settings();
    if let Some(tol) = cli.tol {
        s.tol = tol;
    }
    if let Some(m) = cli.max_degree {
        s.max_degree = m;
    }
    s
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    expression: String,
    path: String,
    value: String,
    re: f64,
    im: f64,
    method: String,
    est_error: f64,
    steps: usize,
}

fn lookup_path(scene: &Scene, name: &str) -> anyhow::Result<Path> {
    if let Ok(p) = scene.path(name) {
        return Ok(p.clone());
    }
    let word = LoopWord::parse(name).with_context(|| format!("`{name}` is neither a path nor a loop word"))?;
    Ok(scene.family.compile(&word)?)
}

/// Same accumulation order as `Evaluator::evaluate`, so values agree bit for
/// bit with the library call.
fn eval(scene: &Scene, settings: Settings, expression: &str, path: &str) -> anyhow::Result<EvalOutput> {
    let sum = ExpSum::parse(expression)?;
    for id in sum.symbols() {
        scene.table.get(&id)?;
    }
    let p = lookup_path(scene, path)?;
    let ev = scene.evaluator(settings);
    let mut value = sum.constant();
    let mut est_error = 0.0;
    let mut steps = 0;
    let mut methods = Vec::new();
    for (w, c) in sum.terms() {
        let e = ev.exp_integral_detailed(w, &p)?;
        value += e.value * c;
        est_error += e.est_error * c.norm();
        steps += e.steps;
        let m = match e.method {
            Method::Ode => "ode",
            Method::Series => "series",
        };
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let method = if methods.is_empty() { "exact".to_string() } else { methods.join("+") };
    Ok(EvalOutput {
        expression: sum.to_string(),
        path: path.to_string(),
        value: format::complex(value),
        re: value.re,
        im: value.im,
        method,
        est_error,
        steps,
    })
}

fn render_eval(out: &EvalOutput, f: OutputFormat) -> anyhow::Result<String> {
    Ok(match f {
        OutputFormat::Json => serde_json::to_string_pretty(out)?,
        OutputFormat::Csv => [
            "expression,path,value_re,value_im,method,est_error,steps".to_string(),
            format::csv_row(&[
                out.expression.clone(),
                out.path.clone(),
                format::real(out.re),
                format::real(out.im),
                out.method.clone(),
                format::real(out.est_error),
                out.steps.to_string(),
            ]),
        ]
        .join("\n"),
        OutputFormat::Table => format::table(
            &["field", "value"],
            &[
                vec!["expression".into(), out.expression.clone()],
                vec!["path".into(), out.path.clone()],
                vec!["value".into(), out.value.clone()],
                vec!["method".into(), out.method.clone()],
                vec!["est_error".into(), format::real(out.est_error)],
                vec!["steps".into(), out.steps.to_string()],
            ],
        ),
    })
}

fn render_verify(r: &verify::SuiteReport, f: OutputFormat) -> anyhow::Result<String> {
    Ok(match f {
        OutputFormat::Json => serde_json::to_string_pretty(r)?,
        OutputFormat::Csv => {
            let mut lines = vec!["suite,check,passed,worst,tolerance,cases,skipped".to_string()];
            for c in &r.checks {
                lines.push(format::csv_row(&[
                    r.suite.clone(),
                    c.name.clone(),
                    c.passed.to_string(),
                    format::real(c.worst),
                    format::real(c.tolerance),
                    c.cases.to_string(),
                    c.skipped.to_string(),
                ]));
            }
            lines.join("\n")
        }
        OutputFormat::Table => {
            let rows: Vec<Vec<String>> = r
                .checks
                .iter()
                .map(|c| {
                    vec![
                        if c.passed { "PASS" } else { "FAIL" }.to_string(),
                        c.name.clone(),
                        format::real(c.worst),
                        format::real(c.tolerance),
                        c.cases.to_string(),
                        c.skipped.to_string(),
                    ]
                })
                .collect();
            let verdict = if r.passed { "passed" } else { "FAILED" };
            format!(
                "{}\nsuite {}: {verdict}",
                format::table(&["", "check", "worst", "tolerance", "cases", "skipped"], &rows),
                r.suite
            )
        }
    })
}

#[derive(Debug, Serialize)]
struct Row {
    label: String,
    integral: String,
    #[serde(rename = "loop")]
    loop_word: String,
    value: String,
}

#[derive(Debug, Serialize)]
struct WinnerOut {
    label: String,
    integral: String,
    value_ode: String,
    value_series: String,
    series_degree: usize,
    cross_check: f64,
}

#[derive(Debug, Serialize)]
struct Verdict {
    verdict: String,
    separated: bool,
    commutator: String,
    delta_on_commutator: String,
    max_character_error: f64,
    threshold: f64,
    words: usize,
    loops: Vec<String>,
    winner: Option<WinnerOut>,
}

struct TrefoilTable {
    rows: Vec<(Row, expint::Complex64)>,
    verdict: Verdict,
}

fn trefoil(settings: Settings, max_n: usize, max_m: usize, k_max: i64, series_degree: usize) -> anyhow::Result<TrefoilTable> {
    let scene = TrefoilScene::new(settings)?;
    let basis = basis_words(scene.algebra(), max_n, max_m, -k_max..=k_max)?;
    let loops: Vec<Path> = TREFOIL_LOOPS.iter().map(|w| scene.loop_path(w)).collect::<Result<_, _>>()?;
    let sums: Vec<ExpSum> = basis.iter().map(|b| b.sum.clone()).collect();
    let values = scene.base().evaluate_many(&sums, &loops)?;
    let mut rows = Vec::new();
    for (b, row) in basis.iter().zip(&values) {
        for (lw, v) in TREFOIL_LOOPS.iter().zip(row) {
            rows.push((
                Row {
                    label: b.label(),
                    integral: b.sum.to_string(),
                    loop_word: lw.to_string(),
                    value: format::complex(*v),
                },
                *v,
            ));
        }
    }
    let demo = commutator_demo(&scene, max_n, max_m, k_max, series_degree)?;
    Ok(TrefoilTable {
        rows,
        verdict: verdict(&demo, basis.len()),
    })
}

fn verdict(demo: &CommutatorReport, words: usize) -> Verdict {
    Verdict {
        verdict: if demo.separated { "separated" } else { "not separated" }.to_string(),
        separated: demo.separated,
        commutator: demo.commutator.clone(),
        delta_on_commutator: format::complex(demo.delta_value),
        max_character_error: demo.max_character_error,
        threshold: demo.threshold,
        words,
        loops: TREFOIL_LOOPS.iter().map(|s| s.to_string()).collect(),
        winner: demo.winner.as_ref().map(|w| WinnerOut {
            label: w.label.clone(),
            integral: w.integral.clone(),
            value_ode: format::complex(w.value_ode),
            value_series: format::complex(w.value_series),
            series_degree: w.series_degree,
            cross_check: w.cross_check,
        }),
    }
}

impl TrefoilTable {
    fn csv(&self) -> String {
        let mut lines = vec!["label,integral,loop,value_re,value_im".to_string()];
        for (r, v) in &self.rows {
            lines.push(format::csv_row(&[
                r.label.clone(),
                r.integral.clone(),
                r.loop_word.clone(),
                format::real(v.re),
                format::real(v.im),
            ]));
        }
        lines.join("\n") + "\n"
    }

    fn render(&self, f: OutputFormat) -> anyhow::Result<String> {
        Ok(match f {
            OutputFormat::Csv => self.csv().trim_end().to_string(),
            OutputFormat::Json => {
                #[derive(Serialize)]
                struct Full<'a> {
                    verdict: &'a Verdict,
                    rows: Vec<&'a Row>,
                }
                serde_json::to_string_pretty(&Full {
                    verdict: &self.verdict,
                    rows: self.rows.iter().map(|(r, _)| r).collect(),
                })?
            }
            OutputFormat::Table => {
                let rows: Vec<Vec<String>> = self
                    .rows
                    .iter()
                    .map(|(r, _)| vec![r.label.clone(), r.loop_word.clone(), r.value.clone()])
                    .collect();
                let v = &self.verdict;
                let mut out = format::table(&["word", "loop", "value"], &rows);
                out.push_str(&format!("\n\nint delta on {}: {}", v.commutator, v.delta_on_commutator));
                out.push_str(&format!("\ncharacters on {}: max error {}", v.commutator, format::real(v.max_character_error)));
                if let Some(w) = &v.winner {
                    out.push_str(&format!(
                        "\nwitness {} = {}: {} (series m={}: {}, diff {})",
                        w.label,
                        w.integral,
                        w.value_ode,
                        w.series_degree,
                        w.value_series,
                        format::real(w.cross_check)
                    ));
                }
                out.push_str(&format!("\nverdict: {}", v.verdict));
                out
            }
        })
    }
}
