use clap::{Args, Parser, Subcommand};
use nsk_core::cli::{
    cmd_check_law, cmd_simulate, cmd_sweep, cmd_verify, exit_code, resolve_out_dir, SweepOpts,
    VerifyOpts,
};
use nsk_core::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch laboratory for 1D periodic compressible flow with capillarity and
/// drag: decay experiments, inequality verification, and parameter sweeps.
#[derive(Parser)]
#[command(name = "nsk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; omitted means the documented defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set viscosity.alpha=0.75 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (defaults to config, then $NSK_OUT, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Ensemble / run seed override.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> nsk_core::Result<RunConfig> {
        let mut overrides = self.set.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one decay experiment; writes series.csv and run.json.
    Simulate {
        #[command(flatten)]
        common: Common,

        /// Run even if the law/pressure pair fails the admissibility check.
        #[arg(long)]
        override_admissibility: bool,
    },

    /// Check the functional inequalities over seeded profile ensembles.
    Verify {
        #[command(flatten)]
        common: Common,

        /// poincare | lower-bound | modulated | jensen | all
        #[arg(long, default_value = "all")]
        lemma: String,

        /// Zero-set fraction for a single Poincare run (default: the
        /// monotonicity ladder 1/2, 1/4, 1/8).
        #[arg(long)]
        delta: Option<f64>,

        /// Profiles per ensemble (default from config).
        #[arg(long)]
        profiles: Option<usize>,

        /// Skip the doubled-grid stability pass.
        #[arg(long)]
        no_refinement_check: bool,
    },

    /// Cartesian parameter sweep of simulate runs.
    Sweep {
        #[command(flatten)]
        common: Common,

        /// Axis of the sweep, e.g. --vary entropy.r3=0.5,1,2 (repeatable).
        #[arg(long = "vary", value_name = "KEY=V1,V2,...")]
        vary: Vec<String>,

        #[arg(long)]
        override_admissibility: bool,
    },

    /// Print the admissibility report for the configured law/pressure pair.
    CheckLaw {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: nsk_core::Result<i32> = match &cli.command {
        Command::Simulate {
            common,
            override_admissibility,
        } => common.load().and_then(|cfg| {
            let out = resolve_out_dir(common.out.as_deref(), &cfg);
            cmd_simulate(&cfg, &out, *override_admissibility).map(|_| 0)
        }),
        Command::Verify {
            common,
            lemma,
            delta,
            profiles,
            no_refinement_check,
        } => common.load().and_then(|cfg| {
            let out = resolve_out_dir(common.out.as_deref(), &cfg);
            let opts = VerifyOpts {
                lemma: lemma.clone(),
                delta: *delta,
                profiles: *profiles,
                seed: common.seed,
                check_refinement: !no_refinement_check,
            };
            cmd_verify(&cfg, &opts, &out).map(|summary| if summary.all_ok { 0 } else { 1 })
        }),
        Command::Sweep {
            common,
            vary,
            override_admissibility,
        } => common.load().and_then(|cfg| {
            let out = resolve_out_dir(common.out.as_deref(), &cfg);
            let opts = SweepOpts {
                vary: vary.clone(),
                override_admissibility: *override_admissibility,
            };
            cmd_sweep(&cfg, &opts, &out).map(|_| 0)
        }),
        Command::CheckLaw { common } => common.load().and_then(|cfg| cmd_check_law(&cfg).map(|_| 0)),
    };

    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
