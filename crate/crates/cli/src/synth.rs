use std::io::Write;

use anyhow::{Context, Result};
use mtptune_core::data::{save_bundle, synth_matrix_completion, synth_multilabel, BundlePaths};

use crate::args::{SynthArgs, SynthKind};

pub fn cmd_synth(args: &SynthArgs, log: &mut dyn Write) -> Result<BundlePaths> {
    let bundle = match args.kind {
        SynthKind::MatrixCompletion => {
            synth_matrix_completion(
                args.instances,
                args.targets,
                args.rank,
                args.noise,
                args.observed,
                args.seed,
            )?
            .bundle
        }
        SynthKind::Multilabel => {
            synth_multilabel(args.instances, args.targets, args.features, args.density, args.seed)?
        }
    };
    let paths = save_bundle(&bundle, &args.out).with_context(|| format!("--out {}", args.out.display()))?;
    writeln!(
        log,
        "wrote {} triplets over {} instances and {} targets to {}",
        bundle.train.triplets.len(),
        bundle.train.n_instances(),
        bundle.train.n_targets(),
        args.out.display()
    )?;
    Ok(paths)
}
