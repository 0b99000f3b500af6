use segrel_core::ingest::read_manifest;
use segrel_core::report::write_component_csv;
use segrel_core::synth::{write_dataset, SynthSpec};
use segrel_core::{
    compare_runs, evaluate_manifest, export_diagram, validate_manifest, Error, EvalOptions,
    Metadata, MetricReport, Result,
};

use crate::{CompareArgs, DiagramArgs, EvalArgs, SynthArgs, ValidateArgs};

pub fn eval(args: EvalArgs) -> Result<()> {
    let manifest = read_manifest(&args.dataset.manifest)?;
    let options = EvalOptions {
        num_bins: args.bins,
        jobs: args.jobs,
        ignore_index: args.dataset.ignore_index,
        renormalize: args.dataset.renormalize,
        entropy_dir: args.entropy_dir,
    };
    let (acc, _) = evaluate_manifest(&manifest, &options)?;
    let metadata = Metadata {
        name: args.name,
        manifest: Some(args.dataset.manifest.display().to_string()),
        timestamp: Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    };
    let report = acc.finalize(&args.weights, metadata)?;
    report.write(&args.out)?;
    if let Some(path) = &args.csv {
        let file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        write_component_csv(std::slice::from_ref(&report), file)?;
    }
    println!("{}", report.summary_line());
    Ok(())
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let baseline = MetricReport::read(&args.baseline)?;
    let shifted = MetricReport::read(&args.shifted)?;
    let cmp = compare_runs(&baseline, &shifted);
    for warning in &cmp.warnings {
        eprintln!("warning: {warning}");
    }
    for (metric, value) in cmp.rows() {
        println!("{metric:<13}{value}");
    }
    if let Some(out) = &args.out {
        cmp.write(out)?;
    }
    Ok(())
}

pub fn diagram(args: DiagramArgs) -> Result<()> {
    let manifest = read_manifest(&args.dataset.manifest)?;
    let options = EvalOptions {
        num_bins: args.bins,
        jobs: args.jobs,
        ignore_index: args.dataset.ignore_index,
        renormalize: args.dataset.renormalize,
        entropy_dir: None,
    };
    let (acc, _) = evaluate_manifest(&manifest, &options)?;
    let diagram = export_diagram(&acc.bins)?;
    let file = std::fs::File::create(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    diagram.write_csv(std::io::BufWriter::new(file))?;
    println!(
        "{} bins, {} populated, {} pixels -> {}",
        diagram.rows.len(),
        diagram.rows.iter().filter(|r| r.count > 0).count(),
        diagram.total_pixels,
        args.out.display()
    );
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Error::Io {
        path: args.spec.clone(),
        source: e,
    })?;
    let spec = SynthSpec::from_json(&text)?;
    let manifest = write_dataset(&spec, &args.out)?;
    println!(
        "wrote {} images to {}",
        manifest.entries.len(),
        args.out.join("manifest.json").display()
    );
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<()> {
    let manifest = read_manifest(&args.dataset.manifest)?;
    validate_manifest(
        &manifest,
        args.dataset.ignore_index,
        args.dataset.renormalize,
    )?;
    println!("OK");
    Ok(())
}
