use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use anyhow::Context;
use fedsim::cli::{parse_args, CliInvocation};
use fedsim::csvio::{write_samples, MetricsWriter};
use fedsim::runtime::{evaluation_batch, run};

fn execute(inv: CliInvocation) -> anyhow::Result<()> {
    if let Some(path) = &inv.dump_eval {
        let file =
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        write_samples(BufWriter::new(file), &evaluation_batch(inv.config.seed))?;
    }

    let out: Box<dyn Write> = match &inv.out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = MetricsWriter::new(out)?;
    let outcome = run(&inv.config, |m| writer.write(m).map_err(io::Error::other))?;

    if let Some(last) = outcome.metrics.last() {
        eprintln!(
            "{} rounds, {} epochs in {:.3} s, final mse {:.6e}",
            outcome.metrics.len(),
            last.epochs,
            last.elapsed_s,
            last.mse
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let inv = match parse_args(std::env::args_os()) {
        Ok(inv) => inv,
        Err(e) => e.exit(),
    };
    match execute(inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fedsim: {e:#}");
            ExitCode::FAILURE
        }
    }
}
