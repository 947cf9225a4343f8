use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use polyteam::error::{Error, Result};
use polyteam::game::{PolymatrixGame, StrategyProfile, TwoTeamStructure};
use polyteam::generate::{random_minmax, random_quadratic, random_two_team};
use polyteam::instances::{BoxPoint, KktReport, MinmaxPoint};
use polyteam::io::{read_json, write_json, GameFile, Instance, InstanceFile, ParamsFile, PointFile, ProfileFile};
use polyteam::oracle::{grid_min_kkt_points, grid_min_regret_profile, grid_minmax_kkt_points, grid_team_minimax, GridSpec};
use polyteam::reductions::{
    pullback_full, pullback_stage1, pullback_stage2, reduce_full, reduce_stage1, reduce_stage2,
};
use polyteam::solver::{solve_with, write_trace, SolverOptions};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "polyteam", version, about = "Two-team polymatrix games: generate, reduce, solve, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance or game with coefficients uniform in [-1, 1].
    Gen {
        #[arg(long, value_enum)]
        kind: GenKind,
        /// Variables of a quadratic instance, or both sides of a minmax one.
        #[arg(long)]
        n: Option<usize>,
        /// Min-variables (minmax) or team-X players (two-team).
        #[arg(long)]
        nx: Option<usize>,
        /// Max-variables (minmax) or adversaries (two-team).
        #[arg(long)]
        ny: Option<usize>,
        /// Strategies per player (two-team).
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Leave adversaries without mutual edges (two-team).
        #[arg(long)]
        independent: bool,
        #[arg(long, default_value_t = 1.0 / 13.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a reduction stage and write the result plus a params sidecar.
    Reduce {
        #[arg(long, value_enum)]
        stage: Stage,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sidecar path; defaults to OUT with extension `params.json`.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Compute an approximate Nash equilibrium of an independent-adversary game.
    Solve {
        #[arg(long)]
        game: PathBuf,
        /// Target regret; defaults to the game accuracy recorded in --params.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one CSV line per descent iteration.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
    },
    /// Check a profile or point; exit 0 iff it passes.
    Verify {
        #[arg(long, value_enum)]
        kind: VerifyKind,
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        point: Option<PathBuf>,
        /// Reduction sidecar used to pull a profile or point back.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Defaults to the instance's own accuracy (KKT) or the params game accuracy (Nash).
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Brute-force grid computations.
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
        #[arg(long)]
        input: PathBuf,
        /// Grid step, given as K or 1/K.
        #[arg(long, value_parser = parse_grid)]
        grid: u32,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Quadratic,
    Minmax,
    TwoTeam,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    Nash,
    MinKkt,
    MinmaxKkt,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    MinRegret,
    KktPoints,
    Minimax,
}

fn parse_grid(s: &str) -> std::result::Result<u32, String> {
    let k = s.strip_prefix("1/").unwrap_or(s);
    match k.trim().parse::<u32>() {
        Ok(k) if k > 0 => Ok(k),
        _ => Err(format!("expected K or 1/K with K a positive integer, got `{s}`")),
    }
}

/// How a command ended, mapped onto the process exit code.
enum Outcome {
    Pass,
    VerifyFailed,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::VerifyFailed) => ExitCode::from(EXIT_VERIFY_FAILED),
        Ok(Outcome::NotConverged) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Parse(format!("{}: {e}", path.display()))
}

fn distinct(input: &Path, output: &Path) -> Result<()> {
    if input == output {
        return Err(Error::Parameter(format!("input and output are both {}", input.display())));
    }
    Ok(())
}

fn read_instance(path: &Path) -> Result<Instance> {
    read_json::<InstanceFile>(path)?.to_instance()
}

fn read_game(path: &Path) -> Result<(PolymatrixGame, Option<TwoTeamStructure>)> {
    read_json::<GameFile>(path)?.to_game()
}

fn read_profile(path: &Path) -> Result<StrategyProfile> {
    StrategyProfile::new(read_json::<ProfileFile>(path)?.strategies)
}

fn required<'a>(flag: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::Parameter(format!("--{flag} is required here")))
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Gen { kind, n, nx, ny, m, independent, epsilon, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let write = |path: &Path, r: std::io::Result<()>| r.map_err(io_err(path));
            match kind {
                GenKind::Quadratic => {
                    let n = n.or(nx).ok_or_else(|| Error::Parameter("--n is required".into()))?;
                    let q = random_quadratic(n, epsilon, &mut rng)?;
                    write(&out, write_json(&out, &InstanceFile::from_quadratic(&q)))?;
                }
                GenKind::Minmax => {
                    let (n_x, n_y) = (nx.or(n), ny.or(n));
                    let (Some(n_x), Some(n_y)) = (n_x, n_y) else {
                        return Err(Error::Parameter("--n or both --nx and --ny are required".into()));
                    };
                    let inst = random_minmax(n_x, n_y, epsilon, &mut rng)?;
                    write(&out, write_json(&out, &InstanceFile::from_minmax(&inst)))?;
                }
                GenKind::TwoTeam => {
                    let (Some(n_x), Some(n_y)) = (nx, ny) else {
                        return Err(Error::Parameter("--nx and --ny are required".into()));
                    };
                    if m == 0 {
                        return Err(Error::Parameter("--m must be positive".into()));
                    }
                    let (game, s) = random_two_team(&vec![m; n_x], &vec![m; n_y], independent, &mut rng)?;
                    write(&out, write_json(&out, &GameFile::from_game(&game, Some(&s))))?;
                }
            }
            println!("wrote {}", out.display());
            Ok(Outcome::Pass)
        }

        Command::Reduce { stage, input, out, params } => {
            distinct(&input, &out)?;
            let params_path = params.unwrap_or_else(|| out.with_extension("params.json"));
            distinct(&out, &params_path)?;
            let instance = read_instance(&input)?;
            let sidecar = match (stage, instance) {
                (Stage::One, Instance::Quadratic(q)) => {
                    let (m, p) = reduce_stage1(&q)?;
                    write_json(&out, &InstanceFile::from_minmax(&m)).map_err(io_err(&out))?;
                    println!("stage 1: Z = {}, T = {}, eta = {:e}, minmax epsilon = {:e}", p.z, p.t, p.eta, p.delta_out);
                    ParamsFile::One(p)
                }
                (Stage::Two, Instance::MinmaxInd(m)) => {
                    let (game, s, p) = reduce_stage2(&m)?;
                    write_json(&out, &GameFile::from_game(&game, Some(&s))).map_err(io_err(&out))?;
                    println!(
                        "stage 2: {} players, Z = {}, delta = {:e}, rounding threshold = {:e}",
                        game.num_players(),
                        p.z,
                        p.delta_out,
                        p.rounding_threshold
                    );
                    ParamsFile::Two(p)
                }
                (Stage::Full, Instance::Quadratic(q)) => {
                    let (game, s, p) = reduce_full(&q)?;
                    write_json(&out, &GameFile::from_game(&game, Some(&s))).map_err(io_err(&out))?;
                    println!("full: {} players, game delta = {:e}", game.num_players(), p.delta());
                    ParamsFile::Full(p)
                }
                (Stage::Two, Instance::Quadratic(_)) => {
                    return Err(Error::Parameter("stage 2 takes a minmax_ind instance".into()))
                }
                (_, Instance::MinmaxInd(_)) => {
                    return Err(Error::Parameter("stages 1 and full take a quadratic instance".into()))
                }
            };
            write_json(&params_path, &sidecar).map_err(io_err(&params_path))?;
            println!("wrote {} and {}", out.display(), params_path.display());
            Ok(Outcome::Pass)
        }

        Command::Solve { game, epsilon, params, seed, trace, out, tol, restarts } => {
            distinct(&game, &out)?;
            let (g, structure) = read_game(&game)?;
            let structure =
                structure.ok_or_else(|| Error::Parameter("game file has no `teams` section".into()))?;
            let epsilon = match (epsilon, &params) {
                (Some(e), _) => e,
                (None, Some(p)) => read_json::<ParamsFile>(p)?
                    .game_delta()
                    .ok_or_else(|| Error::Parameter("params file does not describe a game".into()))?,
                (None, None) => return Err(Error::Parameter("give --epsilon or --params".into())),
            };
            let opts = SolverOptions { tol, restarts, trace: trace.is_some(), ..SolverOptions::default() };
            let sol = solve_with(&g, &structure, epsilon, seed, &opts)?;
            if let Some(path) = &trace {
                let file = std::fs::File::create(path).map_err(io_err(path))?;
                write_trace(&sol.kkt.trace, std::io::BufWriter::new(file)).map_err(io_err(path))?;
            }
            let file = ProfileFile { strategies: sol.profile.strategies().to_vec(), report: Some(sol.report.clone()) };
            write_json(&out, &file).map_err(io_err(&out))?;
            println!(
                "KKT residual {:e} after {} iterations; max regret {:e} (epsilon {:e})",
                sol.kkt.residual, sol.kkt.iterations, sol.report.max_regret, epsilon
            );
            println!("wrote {}", out.display());
            if sol.converged {
                Ok(Outcome::Pass)
            } else {
                println!("not converged");
                Ok(Outcome::NotConverged)
            }
        }

        Command::Verify { kind, game, profile, instance, point, params, epsilon } => {
            let params = params.as_deref().map(read_json::<ParamsFile>).transpose()?;
            match kind {
                VerifyKind::Nash => {
                    let (g, _) = read_game(required("game", &game)?)?;
                    let p = read_profile(required("profile", &profile)?)?;
                    let eps = epsilon
                        .or_else(|| params.as_ref().and_then(ParamsFile::game_delta))
                        .ok_or_else(|| Error::Parameter("give --epsilon or --params".into()))?;
                    g.check_profile(&p)?;
                    let report = g.verify_epsilon_nash(&p, eps);
                    for (i, r) in report.regrets.iter().enumerate() {
                        println!("player {i}: regret {r:e}");
                    }
                    print_verdict("nash", report.max_regret, eps, report.passed)
                }
                VerifyKind::MinKkt => {
                    let Instance::Quadratic(q) = read_instance(required("instance", &instance)?)? else {
                        return Err(Error::Parameter("min-kkt needs a quadratic instance".into()));
                    };
                    let x = match (&point, &profile, &params) {
                        (Some(pt), _, Some(ParamsFile::One(p1))) => {
                            pullback_stage1(&read_json::<PointFile>(pt)?.minmax_point()?, p1)?
                        }
                        (Some(pt), _, _) => read_json::<PointFile>(pt)?.box_point()?,
                        (None, Some(pr), Some(ParamsFile::Full(pf))) => pullback_full(&read_profile(pr)?, pf)?,
                        _ => {
                            return Err(Error::Parameter(
                                "give --point, or --profile with the params of a full reduction".into(),
                            ))
                        }
                    };
                    let eps = epsilon.unwrap_or(q.epsilon());
                    report_kkt("min-kkt", &x_label(&x, None), &q.verify_min_kkt(&x, eps), eps)
                }
                VerifyKind::MinmaxKkt => {
                    let Instance::MinmaxInd(m) = read_instance(required("instance", &instance)?)? else {
                        return Err(Error::Parameter("minmax-kkt needs a minmax_ind instance".into()));
                    };
                    let p = match (&point, &profile, &params) {
                        (Some(pt), _, _) => read_json::<PointFile>(pt)?.minmax_point()?,
                        (None, Some(pr), Some(ParamsFile::Two(p2))) => pullback_stage2(&read_profile(pr)?, p2)?,
                        _ => {
                            return Err(Error::Parameter(
                                "give --point, or --profile with the params of a stage-2 reduction".into(),
                            ))
                        }
                    };
                    let eps = epsilon.unwrap_or(m.epsilon());
                    report_kkt("minmax-kkt", &x_label(&p.x, Some(&p)), &m.verify_minmax_kkt(&p, eps), eps)
                }
            }
        }

        Command::Oracle { kind, input, grid, epsilon, out } => match kind {
            OracleKind::MinRegret => {
                let (g, _) = read_game(&input)?;
                let (p, regret) = grid_min_regret_profile(&g, &GridSpec::for_game(&g, grid)?)?;
                println!("minimum grid regret {regret:e} at grid 1/{grid}");
                if let Some(out) = &out {
                    distinct(&input, out)?;
                    let file = ProfileFile { strategies: p.strategies().to_vec(), report: None };
                    write_json(out, &file).map_err(io_err(out))?;
                }
                Ok(Outcome::Pass)
            }
            OracleKind::Minimax => {
                let (g, s) = read_game(&input)?;
                let s = s.ok_or_else(|| Error::Parameter("game file has no `teams` section".into()))?;
                let (value, x) = grid_team_minimax(&g, &s, grid, 1e8)?;
                println!("grid minimax value {value} at grid 1/{grid}");
                if let Some(out) = &out {
                    distinct(&input, out)?;
                    write_json(out, &ProfileFile { strategies: x.strategies().to_vec(), report: None })
                        .map_err(io_err(out))?;
                }
                Ok(Outcome::Pass)
            }
            OracleKind::KktPoints => {
                let points: Vec<PointFile> = match read_instance(&input)? {
                    Instance::Quadratic(q) => {
                        let eps = epsilon.unwrap_or(q.epsilon());
                        grid_min_kkt_points(&q, grid, eps, 1e9)?
                            .into_iter()
                            .map(|p| PointFile { x: p.into_inner(), y: Vec::new() })
                            .collect()
                    }
                    Instance::MinmaxInd(m) => {
                        let eps = epsilon.unwrap_or(m.epsilon());
                        grid_minmax_kkt_points(&m, grid, eps, 1e9)?
                            .into_iter()
                            .map(|p| PointFile { x: p.x.into_inner(), y: p.y.into_inner() })
                            .collect()
                    }
                };
                println!("{} grid KKT points at grid 1/{grid}", points.len());
                if let Some(out) = &out {
                    distinct(&input, out)?;
                    write_json(out, &points).map_err(io_err(out))?;
                }
                Ok(Outcome::Pass)
            }
        },
    }
}

fn x_label(x: &BoxPoint, p: Option<&MinmaxPoint>) -> String {
    match p {
        Some(p) => format!("x = {:?}, y = {:?}", p.x.as_slice(), p.y.as_slice()),
        None => format!("x = {:?}", x.as_slice()),
    }
}

fn report_kkt(label: &str, point: &str, report: &KktReport, eps: f64) -> Result<Outcome> {
    println!("{point}");
    for (v, (r, c)) in report.residuals.iter().zip(&report.classification).enumerate() {
        println!("coordinate {v} ({c:?}): {:e}", r + eps);
    }
    print_verdict(label, report.max_violation + eps, eps, report.passed)
}

fn print_verdict(label: &str, worst: f64, eps: f64, passed: bool) -> Result<Outcome> {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("{label}: worst {worst:e} against epsilon {eps:e}: {verdict}");
    Ok(if passed { Outcome::Pass } else { Outcome::VerifyFailed })
}
