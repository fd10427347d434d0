use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use l2e_core::eval::{self, AdaptSpec, EomConfig, FinetuneStart, MatchReport, Variant};
use l2e_core::io::{self, RunConfig, RunLayout};
use l2e_core::meta::{self, PoolSource};
use l2e_core::osg;
use l2e_core::rng::SeedTree;
use l2e_core::zoo::{self, ScriptKind, ScriptedOpponent};
use l2e_core::{stats, GameId, GameSpec, L2eError, Opponent, PolicyParams, Result};

macro_rules! config_flags {
    ($($field:ident => $section:literal . $key:literal),* $(,)?) => {
        /// Run configuration: an optional INI file plus per-key overrides.
        #[derive(Args, Debug, Default)]
        struct ConfigArgs {
            /// INI config file; flags override its values.
            #[arg(long, global = true)]
            config: Option<PathBuf>,
            $(
                #[arg(long, global = true, value_name = "VALUE")]
                $field: Option<String>,
            )*
        }

        impl ConfigArgs {
            fn overrides(&self) -> Vec<(&'static str, &'static str, &str)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push(($section, $key, x.as_str()));
                    }
                )*
                v
            }
        }
    };
}

config_flags! {
    game => "run"."game",
    seed => "run"."seed",
    out_dir => "run"."out_dir",
    workers => "run"."workers",
    alpha => "train"."alpha",
    beta => "train"."beta",
    test_step => "train"."test_step",
    opponents_per_batch => "train"."opponents_per_batch",
    trajs_per_opponent => "train"."trajs_per_opponent",
    inner_steps_train => "train"."inner_steps_train",
    adapt_steps_test => "train"."adapt_steps_test",
    epochs => "train"."epochs",
    gamma => "train"."gamma",
    return_mode => "train"."return_mode",
    meta_gradient => "train"."meta_gradient",
    outer_reduction => "train"."outer_reduction",
    outer_optimizer => "train"."outer_optimizer",
    history_episodes => "train"."history_episodes",
    history_every => "train"."history_every",
    hard_epochs => "osg"."hard_epochs",
    diverse_steps => "osg"."diverse_steps",
    alpha_mmd => "osg"."alpha_mmd",
    n_diverse => "osg"."n_diverse",
    osg_alpha => "osg"."alpha",
    opponent_step => "osg"."opponent_step",
    trajs => "osg"."trajs",
    mmd_trajs => "osg"."mmd_trajs",
    osg_gamma => "osg"."gamma",
    bandwidth => "kernel"."bandwidth",
    min_len => "kernel"."min_len",
    actions => "kernel"."actions",
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = io::parse_config(&fs::read_to_string(path)?)?;
                if let Some(g) = &self.game {
                    if g.parse::<GameId>()? != cfg.game {
                        return Err(L2eError::InvalidArgument(format!(
                            "--game {g} disagrees with the config file's game {}",
                            cfg.game
                        )));
                    }
                }
                cfg
            }
            None => RunConfig::for_game(self.game.as_deref().unwrap_or("leduc").parse()?),
        };
        for (section, key, value) in self.overrides() {
            if key != "game" {
                cfg.set(Some(section), key, value)
                    .map_err(|e| L2eError::InvalidArgument(format!("--{}: {e}", key.replace('_', "-"))))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Parser, Debug)]
#[command(name = "l2e", version, about = "Meta-learned opponent exploitation in small zero-sum games")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct EvalCounts {
    /// Evaluation episodes per (opponent, step, seed).
    #[arg(long, default_value_t = 2000)]
    episodes: usize,
    /// Independent adaptation seeds per cell.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Meta-train a base policy; writes history, pool and checkpoints.
    Train {
        /// Also checkpoint every N epochs (0: final only).
        #[arg(long, default_value_t = 0)]
        ckpt_every: usize,
    },
    /// Adapt a saved base policy to one opponent and report returns per step.
    TestAdapt {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scripted kind, `nash`, or a policy checkpoint path.
        #[arg(long)]
        opponent: String,
        #[command(flatten)]
        counts: EvalCounts,
    },
    /// Every method against every evaluation opponent.
    EvalTable {
        /// Trained base policy; trained from the config when absent.
        #[arg(long)]
        l2e: Option<PathBuf>,
        /// MAML baseline policy; trained when absent.
        #[arg(long)]
        maml: Option<PathBuf>,
        /// Pre-trained start for the fine-tuning baseline; trained when absent.
        #[arg(long)]
        pretrained: Option<PathBuf>,
        /// CFR iterations for the Nash opponent (0 skips it).
        #[arg(long, default_value_t = 1000)]
        nash_iters: usize,
        #[command(flatten)]
        counts: EvalCounts,
    },
    /// Generate one hard-to-exploit opponent for a base policy.
    OsgHard {
        /// Base policy; a random initialization when absent.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        episodes: usize,
    },
    /// Generate a set of style-diverse opponents for a base policy.
    OsgDiverse {
        #[arg(long)]
        base: Option<PathBuf>,
        /// Set size, including the randomly initialized seed member.
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
    /// Solve the game with CFR and report exploitability.
    Cfr {
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
    },
    /// Train the ablation variants over several seeds and compare.
    Ablate {
        /// Comma-separated variant tags.
        #[arg(long, default_value = "L2E,L2E-H,L2E-D,L2E-HD")]
        variants: String,
        /// Training seeds.
        #[arg(long, default_value_t = 5)]
        train_seeds: usize,
        #[command(flatten)]
        counts: EvalCounts,
    },
    /// Rock-paper-scissors convergence and Nash comparison.
    Rps,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.resolve()?;
    let layout = RunLayout::resolve(&cfg.out_dir);
    layout.create()?;
    fs::write(layout.file(io::CONFIG_FILE), cfg.to_text())?;
    let spec = GameSpec::from_id(cfg.game);
    let seeds = SeedTree::new(cfg.seed);
    let meta = |extra: &[(&str, String)]| {
        let mut e = vec![("game", cfg.game.to_string()), ("seed", cfg.seed.to_string())];
        e.extend_from_slice(extra);
        io::meta(&cfg.hash(), &e)
    };
    match cli.command {
        Command::Train { ckpt_every } => {
            let mut rng = seeds.stream("train", 0);
            let out = meta::train_with(&cfg.train, &cfg.osg, &spec, PoolSource::L2E, &mut rng, &mut |e, base, _, h| {
                if ckpt_every > 0 && e % ckpt_every == 0 {
                    io::save_checkpoint(base, &layout.checkpoint(e))?;
                }
                if let Some((_, m)) = h.metric.last().filter(|(me, _)| *me == e) {
                    eprintln!("epoch {e}: metric {m:.4}");
                }
                Ok(())
            })?;
            let ckpt = layout.checkpoint(cfg.train.epochs);
            io::save_checkpoint(&out.base, &ckpt)?;
            io::save_pool(&out.pool, cfg.seed, &layout.manifest())?;
            let f = fs::File::create(layout.history())?;
            io::write_history(f, &meta(&[]), &out.history, cfg.train.adapt_steps_test)?;
            println!("base: {}", ckpt.display());
            println!("pool: {} opponents in {}", out.pool.len(), layout.manifest().display());
            println!("history: {}", layout.history().display());
        }
        Command::TestAdapt { checkpoint, opponent, counts } => {
            let base = io::load_checkpoint_for(&checkpoint, &spec)?;
            let opp = parse_opponent(&opponent, &spec)?;
            let adapt = AdaptSpec::from_train(&cfg.train);
            let mut rng = seeds.stream("test-adapt", 0);
            let rep = eval::evaluate_matchup("L2E", &base, &spec, &opp, &adapt, counts.episodes, counts.seeds, &mut rng)?;
            print_report(&rep);
            write_reports(&layout, &meta(&[]), &[rep])?;
        }
        Command::EvalTable {
            l2e,
            maml,
            pretrained,
            nash_iters,
            counts,
        } => {
            let adapt = AdaptSpec::from_train(&cfg.train);
            let l2e = load_or(l2e, &spec, || {
                eprintln!("training L2E base");
                Ok(meta::train(&cfg.train, &cfg.osg, &spec, PoolSource::L2E, &mut seeds.stream("train", 0))?.base)
            })?;
            let maml = load_or(maml, &spec, || {
                eprintln!("training MAML baseline");
                Ok(eval::maml_baseline_train(&cfg.train, &cfg.osg, &spec, &mut seeds.stream("maml", 0))?.base)
            })?;
            let pre = load_or(pretrained, &spec, || {
                eprintln!("pre-training fine-tuning start");
                eval::pretrain_baseline(&cfg.train, &cfg.osg, &spec, &mut seeds.stream("pretrain", 0))
            })?;
            let mut opponents = eval::scripted_opponents(cfg.game);
            if nash_iters > 0 && matches!(cfg.game, GameId::Rps | GameId::Leduc) {
                opponents.push(Opponent::Tabular(std::sync::Arc::new(zoo::nash_opponent(zoo::cfr_solve(
                    &spec, nash_iters,
                )?)?)));
            }
            let (e, s) = (counts.episodes, counts.seeds);
            let mut reports = Vec::new();
            for (i, o) in opponents.iter().enumerate() {
                let r = |label: &str| seeds.stream(label, i as u64);
                reports.push(eval::evaluate_matchup("L2E", &l2e, &spec, o, &adapt, e, s, &mut r("l2e"))?);
                reports.push(eval::evaluate_matchup("MAML", &maml, &spec, o, &adapt, e, s, &mut r("maml"))?);
                reports.push(eval::random_baseline(&spec, o, &adapt, e, s, &mut r("random"))?);
                reports.push(eval::pg_finetune_baseline(&spec, o, &FinetuneStart::RandomInit, &adapt, e, s, &mut r("trpo"))?);
                let start = FinetuneStart::Pretrained(pre.clone());
                reports.push(eval::pg_finetune_baseline(&spec, o, &start, &adapt, e, s, &mut r("trpo-p"))?);
                reports.push(eval::eom_baseline(&spec, o, &adapt, &EomConfig::default(), e, s, &mut r("eom"))?);
            }
            for rep in &reports {
                print_report(rep);
            }
            write_reports(&layout, &meta(&[("pg_baselines", "plain policy gradient".into())]), &reports)?;
        }
        Command::OsgHard { base, episodes } => {
            let mut rng = seeds.stream("osg-hard", 0);
            let base = load_or(base, &spec, || Ok(PolicyParams::init(&spec, &mut rng)))?;
            let out = osg::hard_osg(&spec, &base, &cfg.osg, &mut rng)?;
            let random = PolicyParams::init(&spec, &mut rng);
            let path = layout.file("hard_opponent.bin");
            io::save_checkpoint(&out.opponent, &path)?;
            let (vs_hard, vs_random) = (
                adapted_value(&spec, &base, &out.opponent, &cfg, episodes, &mut rng)?,
                adapted_value(&spec, &base, &random, &cfg, episodes, &mut rng)?,
            );
            println!("opponent: {}", path.display());
            println!("one-step adapted base return vs hard opponent: {vs_hard:.4}");
            println!("one-step adapted base return vs random init:   {vs_random:.4}");
        }
        Command::OsgDiverse { base, n } => {
            let mut rng = seeds.stream("osg-diverse", 0);
            let base = load_or(base, &spec, || Ok(PolicyParams::init(&spec, &mut rng)))?;
            let first = Opponent::policy(PolicyParams::init(&spec, &mut rng));
            let set = osg::diverse_osg(&spec, &base, first, n, &cfg.osg, &mut rng)?;
            for (i, o) in set.iter().enumerate() {
                let p = o.as_policy().expect("generated opponents are policies");
                io::save_checkpoint(p, &layout.file(&format!("diverse_{i}.bin")))?;
            }
            let d = osg::min_pairwise_mmd2(&spec, &base, &set, cfg.osg.mmd_trajs, &cfg.osg.kernel, &mut rng)?;
            println!("{} opponents in {}", set.len(), layout.dir().display());
            println!("minimum pairwise mmd2: {d:.6}");
        }
        Command::Cfr { iters } => {
            let mut solver = zoo::CfrSolver::new(&spec)?;
            solver.run(iters);
            let avg = solver.average_strategy();
            let expl = zoo::cfr::exploitability_on(solver.tree(), &avg)?;
            let uniform = zoo::cfr::exploitability_on(solver.tree(), &zoo::TabularStrategy::uniform(solver.tree()))?;
            let path = layout.file("strategy.txt");
            fs::write(&path, avg.to_text())?;
            println!("strategy: {} ({} information sets)", path.display(), avg.len());
            println!("exploitability after {iters} iterations: {expl:.6} (uniform: {uniform:.6})");
            if cfg.game == GameId::Rps {
                let dev = avg
                    .iter()
                    .flat_map(|(_, p)| p.iter().map(|x| (x - 1.0 / 3.0).abs()))
                    .fold(0.0, f64::max);
                println!("largest deviation from uniform: {dev:.6}");
            }
        }
        Command::Ablate {
            variants,
            train_seeds,
            counts,
        } => {
            let variants: Vec<Variant> = variants.split(',').map(|v| Variant::parse(v.trim())).collect::<Result<_>>()?;
            let mut runs = Vec::new();
            for s in 0..train_seeds {
                eprintln!("training seed {s}");
                let mut rng = seeds.stream("ablate", s as u64);
                runs.push(eval::ablation_run(&variants, &cfg.train, &cfg.osg, &spec, counts.episodes, counts.seeds, &mut rng)?);
            }
            for (i, v) in variants.iter().enumerate() {
                let finals: Vec<f64> = runs.iter().map(|r| *r[i].normalized.last().expect("non-empty")).collect();
                println!("{:7} median final normalized return {:.4}", v.tag(), stats::median(&finals));
            }
            let f = fs::File::create(layout.file("ablation.csv"))?;
            io::write_ablation(f, &meta(&[]), &runs)?;
        }
        Command::Rps => {
            if cfg.game != GameId::Rps {
                return Err(L2eError::InvalidArgument("the rps analysis needs --game rps".into()));
            }
            let a = eval::rps_analysis(&cfg.train, &cfg.osg, &mut seeds.stream("rps", 0))?;
            io::write_simplex(fs::File::create(layout.file("simplex.csv"))?, &meta(&[]), &a.simplex)?;
            io::write_adapt_traces(
                fs::File::create(layout.file("adapt.csv"))?,
                &meta(&[]),
                &[("L2E", &a.l2e_trace), ("Nash", &a.nash_trace)],
            )?;
            io::save_checkpoint(&a.base, &layout.checkpoint(cfg.train.epochs))?;
            for (l, n) in a.l2e_trace.iter().zip(&a.nash_trace) {
                println!(
                    "step {}: L2E P(paper) {:.3} value {:+.3} | Nash P(paper) {:.3} value {:+.3}",
                    l.step, l.probs[1], l.value, n.probs[1], n.value
                );
            }
        }
    }
    Ok(())
}

fn load_or(path: Option<PathBuf>, spec: &GameSpec, make: impl FnOnce() -> Result<PolicyParams>) -> Result<PolicyParams> {
    match path {
        Some(p) => io::load_checkpoint_for(&p, spec),
        None => make(),
    }
}

fn parse_opponent(s: &str, spec: &GameSpec) -> Result<Opponent> {
    if s == "nash" {
        return Ok(Opponent::Tabular(std::sync::Arc::new(zoo::nash_opponent(zoo::cfr_solve(spec, 1000)?)?)));
    }
    if Path::new(s).is_file() {
        return Ok(Opponent::policy(io::load_checkpoint_for(Path::new(s), spec)?));
    }
    let o = ScriptedOpponent::new(ScriptKind::parse(s)?);
    o.check_spec(spec)?;
    Ok(Opponent::Scripted(o))
}

fn adapted_value(
    spec: &GameSpec,
    base: &PolicyParams,
    opponent: &PolicyParams,
    cfg: &RunConfig,
    episodes: usize,
    rng: &mut l2e_core::rng::Rng,
) -> Result<f64> {
    let o = Opponent::policy(opponent.clone());
    let adapted = osg::adapt_once(spec, base, o.clone(), cfg.osg.alpha, cfg.osg.trajs, cfg.osg.gamma, rng)?;
    let mdp = l2e_core::rollout::make_mdp(*spec, osg::BASE_SEAT, o)?;
    Ok(l2e_core::rollout::evaluate(&mdp, l2e_core::rollout::Learner::Policy(&adapted), episodes, rng)?.mean)
}

fn print_report(r: &MatchReport) {
    let steps: Vec<String> = r.steps.iter().map(|s| format!("{:+.3}±{:.3}", s.mean, s.std)).collect();
    println!("{:7} vs {:10} {}", r.agent, r.opponent, steps.join("  "));
}

fn write_reports(layout: &RunLayout, meta: &[(String, String)], reports: &[MatchReport]) -> Result<()> {
    let f = fs::File::create(layout.table())?;
    io::write_table(f, meta, &eval::table_rows(reports))?;
    println!("table: {}", layout.table().display());
    Ok(())
}
