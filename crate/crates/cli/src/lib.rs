//! Command-line front end: `gen`, `train`, `eval`, `detect` and `demo`.

pub mod args;
pub mod commands;
pub mod ingest;
pub mod report;

use anyhow::Result;

use args::{Cli, Command};
use commands::{
    cmd_demo, cmd_detect, cmd_eval, cmd_gen, cmd_train, DemoOptions, DetectOptions, EvalOptions,
    GenOptions, TrainOptions,
};
use tactslip_core::{FeatureSet, ModelKind};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let stats = cmd_gen(&GenOptions {
                config: a.config,
                seed: a.seed,
                out: a.out.clone(),
                markers_dir: a.markers_dir,
            })?;
            println!(
                "wrote {} rows from {} episodes to {} (slip fraction {:.3}{})",
                stats.rows,
                stats.episodes,
                a.out.display(),
                stats.slip_fraction,
                if stats.within_tolerance { "" } else { ", outside target balance" }
            );
        }
        Command::Train(a) => {
            let s = cmd_train(&TrainOptions {
                data: a.data,
                seed: a.seed,
                kind: a.model,
                features: a.features,
                out: a.out.clone(),
                grid: a.grid.clone(),
                folds: a.folds,
                params: a.params,
                config: a.config,
            })?;
            if let (Some(g), Some(path)) = (&s.grid, &a.grid) {
                println!(
                    "grid: {} points, best mean CV accuracy {:.4}, table in {}",
                    g.table.len(),
                    g.best_accuracy,
                    path.display()
                );
            }
            println!(
                "trained {} on {} {} rows, training accuracy {:.4}, saved to {}",
                s.model.kind.display_name(),
                s.rows,
                a.features,
                s.train_accuracy,
                a.out.display()
            );
        }
        Command::Eval(a) => {
            let report = cmd_eval(&EvalOptions {
                data: a.data,
                seed: a.seed,
                test_fraction: a.test_fraction,
                folds: a.cv,
                kinds: if a.model.is_empty() { ModelKind::ALL.to_vec() } else { a.model },
                feature_sets: if a.features.is_empty() {
                    vec![FeatureSet::Velocity, FeatureSet::All]
                } else {
                    a.features
                },
                model_file: a.model_file,
                out: a.out,
                config: a.config,
            })?;
            print!("{}", report.render());
        }
        Command::Detect(a) => {
            let to_stdout = a.out.is_none();
            let run = cmd_detect(&DetectOptions {
                model: a.model,
                input: a.input,
                reference: a.reference,
                config: a.config,
                out: a.out,
                control: a.control,
            })?;
            let flags = run.log.records.iter().filter(|r| r.slip).count();
            let mut summary = match run.log.latency_stats() {
                Some(l) => format!(
                    "{} frames, {flags} slip flags, latency mean {:.3} ms, p99 {:.3} ms",
                    l.count, l.mean_ms, l.p99_ms
                ),
                None => "no frames".to_string(),
            };
            if run.grasp_failures > 0 {
                summary.push_str(&format!(
                    "; grip saturated while slipping on {} frames",
                    run.grasp_failures
                ));
            }
            if to_stdout {
                eprintln!("{summary}");
            } else {
                println!("{summary}");
            }
        }
        Command::Demo(a) => {
            let run = cmd_demo(&DemoOptions {
                model: a.model,
                config: a.config,
                seed: a.seed,
                out: Some(a.out.clone()),
                report: a.report,
            })?;
            let r = &run.report;
            for s in &r.spans {
                println!(
                    "stage {} {:<18} {:>6.2} s .. {:>6.2} s ({} frames)",
                    s.stage.number(),
                    s.stage.as_str(),
                    s.start_t,
                    s.end_t,
                    s.frames
                );
            }
            println!(
                "force {:.2} N -> {:.2} N, entropy {:.3} -> {:.3} nats, final-window mean dE/dt {:.3} nats/s, flags {}",
                r.initial_force, r.final_force, r.initial_entropy, r.final_entropy, r.final_window_rate, r.final_window_flags
            );
            println!(
                "sequence {}; log in {}",
                if r.reproduces_sequence() { "reproduced" } else { "NOT reproduced" },
                a.out.display()
            );
        }
    }
    Ok(())
}
