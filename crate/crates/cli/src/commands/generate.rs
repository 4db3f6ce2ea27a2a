use twinx::telemetry::synth_generate;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::write_atomic;
use crate::GenerateArgs;

pub fn run(mut cfg: RunConfig, args: GenerateArgs) -> Result<(), CliError> {
    if let Some(d) = args.duration {
        cfg.generate.duration = d;
    }
    if !args.injections.is_empty() {
        cfg.generate.injections = args.injections;
    }
    cfg.validate()?;
    let synth = cfg.synth_config()?;
    let out = args.out.unwrap_or_else(|| cfg.default_data_path());
    if out.exists() && !args.force {
        return Err(CliError::Config(format!("{} exists; pass --force to overwrite", out.display())));
    }
    let frame = synth_generate(&synth).map_err(|e| CliError::Config(e.to_string()))?;
    let mut csv = Vec::new();
    frame.write_csv(&mut csv, true).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_atomic(&out, &csv)?;

    let labelled = frame.labels.as_ref().map_or(0, |l| l.iter().filter(|&&x| x).count());
    println!("wrote {} rows to {}", frame.rows(), out.display());
    for inj in &synth.injections {
        println!(
            "  {:?} on {} rows {}..{} magnitude {}",
            inj.kind,
            inj.channel,
            inj.start,
            inj.start + inj.length - 1,
            inj.magnitude
        );
    }
    println!("{} injection(s), {labelled} labelled rows", synth.injections.len());
    Ok(())
}
