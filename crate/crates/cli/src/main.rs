//! `agentrag` — benchmark harness for the ingestion runtime.

mod args;

use std::process::ExitCode;

use agentrag_core::bench::{config_label, execute, resolve_out_dir, RunOutcome};
use anyhow::Context;
use clap::Parser;

use crate::args::Cli;

fn report(outcome: &RunOutcome) {
    match outcome {
        RunOutcome::Corpus(m) => {
            println!("corpus: {} files, {} nodes", m.files.len(), m.total_nodes());
        }
        RunOutcome::Ingest(results) => {
            println!(
                "{:<24} {:>8} {:>9} {:>9} {:>9} {:>9} {:>9} {:>8}",
                "mode", "chunks", "load_s", "xform_s", "embed_s", "upsert_s", "total_s", "speedup"
            );
            for r in results {
                let t = &r.timings;
                let speedup = r
                    .speedup_vs
                    .values()
                    .next()
                    .map_or_else(String::new, |s| format!("{s:.2}x"));
                println!(
                    "{:<24} {:>8} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                    r.config.mode.name(),
                    t.chunk_count,
                    t.load_s,
                    t.transform_s,
                    t.embed_s,
                    t.upsert_s,
                    t.total_s,
                    speedup
                );
            }
            if let Some(r) = results.first() {
                println!("config: {}", config_label(&r.config));
            }
        }
        RunOutcome::Retrieval(rows) => {
            for (system, s) in rows {
                println!(
                    "{system:<26} n={:<5} hit_rate={:.2} lookup={:.4}ms retrieval={:.4}ms mem_load={:.4}ms mem_store={:.4}ms total={:.4}ms",
                    s.count, s.hit_rate, s.lookup_ms, s.retrieval_ms, s.memory_load_ms, s.memory_store_ms, s.total_ms
                );
            }
        }
        RunOutcome::Conversation(rows) => {
            for (system, q) in rows {
                println!(
                    "{system:<10} n={:<5} top1={:.4} hit@{}={:.4} mrr={:.4}",
                    q.count, q.top1, q.k, q.hit_at_k, q.mrr
                );
            }
        }
        RunOutcome::Cost(rows) => {
            for r in rows {
                println!("{:<8} {:>12.4} ms  {}", r.model, r.predicted_ms, r.extra_terms);
            }
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (spec, out) = cli.command.into_spec()?;
    let out_dir = resolve_out_dir(out, spec.command());
    let outcome = execute(&spec, &out_dir).with_context(|| format!("{} failed", spec.command()))?;
    report(&outcome);
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
