//! Subcommand implementations. Each writes its CSV outputs under the
//! output directory and prints a short summary to stdout.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use legnav::adapt::{
    cross_robot_matrix, episodes_to_csv, evaluate, no_z_finetune, z_grid_search, AdaptReport, FinetuneConfig,
    Metrics, SearchConfig, TrainedPolicy, MATRIX_EPISODES,
};
use legnav::checkpoint::Checkpoint;
use legnav::config::ExperimentConfig;
use legnav::multirobot::{Method, Trainer};

use crate::{AdaptArgs, Common, EvalArgs, MatrixArgs, SweepArgs, TrainArgs};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// Writes `body` preceded by the config-hash comment line.
fn write_csv(dir: &Path, name: &str, hash: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, format!("# config_hash={hash}\n{body}")).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn out_dir(common: &Common, default: &Path) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| default.to_path_buf());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn checkpoint_dir(path: &Path) -> PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf()
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, String)> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let hash = ck.config_hash()?;
    Ok((ck, hash))
}

fn summary_row(label: &str, z: f64, steps: u64, m: &Metrics) -> String {
    format!("{label},{z},{steps},{},{},{},{},{}\n", m.episodes, m.success_rate, m.spl, m.mean_return, m.std_return)
}

const SUMMARY_HEADER: &str = "method,z,env_steps,episodes,success_rate,spl,mean_return,std_return\n";

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.steps {
        cfg.train.total_steps = s;
    }
    if let Some(m) = a.method {
        cfg.train.method = m;
    }
    if let Some(s) = a.common.seed {
        cfg.train.seed = s;
    }
    if let Some(w) = a.common.workers {
        cfg.train.workers = w;
    }
    cfg.validate()?;
    let hash = cfg.hash()?;
    let dir = out_dir(&a.common, Path::new(&cfg.out_dir))?;

    let mut trainer = Trainer::new(cfg.training_robots()?, cfg.train.clone())?;
    let outcome = trainer.run()?;
    Checkpoint::from_trainer(&cfg, &trainer).save(&dir.join(CHECKPOINT_FILE))?;
    write_csv(&dir, "curves.csv", &hash, &trainer.curves_csv())?;
    write_csv(&dir, "diagnostics.csv", &hash, trainer.diagnostics.as_csv())?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;

    println!("trained {} for {} env steps, {} updates", cfg.train.method, outcome.env_steps, outcome.updates);
    for slot in &trainer.slots {
        let last = trainer.curves.iter().rev().find(|r| r.robot_id == slot.id);
        match last {
            Some(r) => println!("  {:10} z={:+.4} return={:.4} success={:.2}", slot.spec.name, slot.z(), r.ret, r.success),
            None => println!("  {:10} z={:+.4}", slot.spec.name, slot.z()),
        }
    }
    println!("outputs in {}", dir.display());
    if let Some(reason) = outcome.aborted {
        bail!("training stopped early ({reason}); the last finite parameters were saved");
    }
    Ok(())
}

fn search_config(ck: &Checkpoint, common: &Common, grid: Option<usize>, episodes: Option<usize>) -> SearchConfig {
    let mut sc = ck.config.search.clone();
    if let Some(g) = grid {
        sc.grid_points = g;
    }
    if let Some(e) = episodes {
        sc.episodes_per_z = e;
    }
    sc.seed = common.seed.unwrap_or(ck.config.train.seed);
    sc.workers = common.workers.unwrap_or(sc.workers);
    sc
}

pub fn adapt(a: AdaptArgs) -> Result<()> {
    let (ck, hash) = load_checkpoint(&a.checkpoint)?;
    let robot = ck.config.robot(&a.robot)?;
    let sc = search_config(&ck, &a.common, a.grid, a.episodes);
    let method = a.method.unwrap_or(ck.config.train.method);
    let dir = out_dir(&a.common, &checkpoint_dir(&a.checkpoint))?;

    let report = z_grid_search(&ck.nets, &robot, &sc)?;
    write_csv(&dir, "adapt_report.csv", &hash, &report.to_csv())?;
    let mut summary = String::from(SUMMARY_HEADER);
    summary += &summary_row("grid_search", report.z_star, report.env_steps_used, &best_metrics(&report));
    println!("{}: z* = {:+.2} (mean return {:.4} over {} episodes, {} env steps)", robot.name, report.z_star,
        report.mean_return[report.best_index()], report.episodes_used, report.env_steps_used);

    if method == Method::NoZ {
        let ft = FinetuneConfig { seed: sc.seed, ..ck.config.finetune.clone() };
        let episodes = ck.config.eval_episodes;
        let before = evaluate(&ck.nets, &robot, ft.z, episodes, true, sc.seed, sc.workers)?.metrics;
        let tuned = no_z_finetune(&ck.nets, &robot, report.env_steps_used, &ft)?;
        let after = evaluate(&tuned.nets, &robot, ft.z, episodes, true, sc.seed, sc.workers)?.metrics;
        summary += &summary_row("no_z_zero_shot", ft.z, 0, &before);
        summary += &summary_row("no_z_finetune", ft.z, tuned.env_steps, &after);
        println!("{}: fine-tuned for {} env steps, return {:.4} -> {:.4}", robot.name, tuned.env_steps,
            before.mean_return, after.mean_return);
    }
    write_csv(&dir, "adapt_summary.csv", &hash, &summary)?;
    Ok(())
}

/// Aggregate of the episodes at the selected grid point.
fn best_metrics(report: &AdaptReport) -> Metrics {
    Metrics::from_results(&report.episodes[report.best_index()])
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let (ck, hash) = load_checkpoint(&a.checkpoint)?;
    let robot = ck.config.robot(&a.robot)?;
    let z = match a.z {
        Some(z) => z,
        None => ck.z(&robot.name).unwrap_or(0.0),
    };
    if !(-1.0..=1.0).contains(&z) {
        bail!("z = {z} lies outside [-1, 1]");
    }
    let episodes = a.episodes.unwrap_or(ck.config.eval_episodes);
    let seed = a.common.seed.unwrap_or(ck.config.train.seed);
    let workers = a.common.workers.unwrap_or(1);
    let dir = out_dir(&a.common, &checkpoint_dir(&a.checkpoint))?;

    let ev = evaluate(&ck.nets, &robot, z, episodes, true, seed, workers)?;
    write_csv(&dir, "eval_episodes.csv", &hash, &episodes_to_csv(&ev.results))?;
    let m = ev.metrics;
    let body = format!(
        "robot,z,episodes,success_rate,spl,mean_return,std_return\n{},{z},{},{},{},{},{}\n",
        robot.name, m.episodes, m.success_rate, m.spl, m.mean_return, m.std_return
    );
    write_csv(&dir, "eval.csv", &hash, &body)?;
    println!(
        "{} at z={z:+.4}: success {:.3}, SPL {:.3}, return {:.4} ± {:.4} over {} episodes",
        robot.name, m.success_rate, m.spl, m.mean_return, m.std_return, m.episodes
    );
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let (ck, hash) = load_checkpoint(&a.checkpoint)?;
    let robot = ck.config.robot(&a.robot)?;
    let sc = search_config(&ck, &a.common, a.grid, a.episodes);
    let dir = out_dir(&a.common, &checkpoint_dir(&a.checkpoint))?;
    let report = z_grid_search(&ck.nets, &robot, &sc)?;
    let path = write_csv(&dir, &format!("sweep_{}.csv", robot.name), &hash, &report.sweep_csv())?;
    let lo = report.mean_return.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = report.mean_return.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("{}: {} grid points, mean return range [{lo:.4}, {hi:.4}], best z {:+.2}", robot.name, report.grid.len(), report.z_star);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn matrix(a: MatrixArgs) -> Result<()> {
    let loaded = a.checkpoints.iter().map(|p| load_checkpoint(p)).collect::<Result<Vec<_>>>()?;
    let mut policies = Vec::new();
    for ((ck, _), path) in loaded.iter().zip(&a.checkpoints) {
        let [entry] = ck.robots.as_slice() else {
            bail!("{} holds {} robots; the matrix needs single-robot checkpoints", path.display(), ck.robots.len());
        };
        policies.push(TrainedPolicy { name: entry.name.clone(), nets: &ck.nets, z: entry.embedding.value()? });
    }
    let base = &loaded[0].0;
    let names = if a.robots.is_empty() { policies.iter().map(|p| p.name.clone()).collect() } else { a.robots.clone() };
    let robots = names.iter().map(|n| base.config.robot(n)).collect::<legnav::Result<Vec<_>>>()?;
    let episodes = a.episodes.unwrap_or(MATRIX_EPISODES);
    let seed = a.common.seed.unwrap_or(base.config.train.seed);
    let workers = a.common.workers.unwrap_or(1);
    let dir = out_dir(&a.common, Path::new("."))?;

    let m = cross_robot_matrix(&policies, &robots, episodes, seed, workers)?;
    let hash = loaded.iter().map(|(_, h)| h.as_str()).collect::<Vec<_>>().join(";");
    let path = write_csv(&dir, "matrix.csv", &hash, &m.to_csv())?;
    print!("{:>12}", "policy\\robot");
    for t in &m.test {
        print!(" {t:>9}");
    }
    println!();
    for (i, name) in m.train.iter().enumerate() {
        print!("{name:>12}");
        for j in 0..m.test.len() {
            print!(" {:>9.2}", m.success(i, j));
        }
        println!();
    }
    println!("mean diagonal {:.3}, mean off-diagonal {:.3}", m.mean_diagonal(), m.mean_off_diagonal());
    println!("wrote {}", path.display());
    Ok(())
}
