use std::fmt;
use std::io::Write;
use std::path::Path;

use cnvks_core::significance::{write_null, write_scan_profile};
use cnvks_core::spikein::{
    build_dataset, null_check, power_study_with_progress, preset, read_study, BandwidthSetting,
    NullCheckConfig, PowerGrid, SimScenario, PRESETS,
};
use cnvks_core::track::{write_phenotype, write_track};
use cnvks_core::{
    load_phenotype, load_track, marker_tests::write_marker_tests, scan, Bandwidth, KernelSpec,
    Permutations, PhenotypeKind, ScanSettings, TransformSpec,
};

use crate::output::{Metadata, OutputSet};
use crate::{
    BandwidthArgs, Command, MethodArgs, NullCheckArgs, PowerArgs, RunArgs, ScanArgs, SimulateArgs,
    EXIT_DATA, EXIT_VALIDATION,
};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Core(cnvks_core::Error),
    Output(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Core(_) | CliError::Output(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Output(e) => write!(f, "writing outputs: {e}"),
        }
    }
}

impl From<cnvks_core::Error> for CliError {
    fn from(e: cnvks_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Scan(args) => {
            validate_run(&args.run)?;
            let kernel = kernel_spec(&args.bandwidth, &args.method, None)?;
            with_workers(args.run.workers, || cmd_scan(&args, kernel))
        }
        Command::NullCheck(args) => {
            validate_run(&args.run)?;
            let kernel = kernel_spec(&args.bandwidth, &args.method, Some(30))?;
            with_workers(args.run.workers, || cmd_null_check(&args, kernel))
        }
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Power(args) => {
            check_workers(args.workers)?;
            let grid = power_grid(&args)?;
            with_workers(args.workers, || cmd_power(&args, &grid))
        }
    }
}

fn check_workers(workers: Option<usize>) -> CliResult<()> {
    if workers == Some(0) {
        return Err(invalid("--workers must be at least 1"));
    }
    Ok(())
}

fn validate_alpha(alpha: f64) -> CliResult<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn validate_run(run: &RunArgs) -> CliResult<()> {
    validate_alpha(run.alpha)?;
    if run.permutations == 0 {
        return Err(invalid("--permutations must be at least 1"));
    }
    check_workers(run.workers)
}

fn kernel_spec(
    bw: &BandwidthArgs,
    method: &MethodArgs,
    default_markers: Option<usize>,
) -> CliResult<KernelSpec> {
    let bandwidth = match (bw.bandwidth_markers, bw.bandwidth_bp, default_markers) {
        (Some(0), _, _) => return Err(invalid("--bandwidth-markers must be at least 1")),
        (Some(k), None, _) => Bandwidth::Markers(k),
        (None, Some(h), _) if !(h.is_finite() && h > 0.0) => {
            return Err(invalid(format!("--bandwidth-bp must be positive, got {h}")))
        }
        (None, Some(h), _) => Bandwidth::Width(h),
        (None, None, Some(k)) => Bandwidth::Markers(k),
        (None, None, None) => {
            return Err(invalid(
                "exactly one of --bandwidth-markers or --bandwidth-bp is required",
            ))
        }
        (Some(_), Some(_), _) => {
            return Err(invalid(
                "--bandwidth-markers and --bandwidth-bp are mutually exclusive",
            ))
        }
    };
    Ok(KernelSpec::new(method.kernel.into(), bandwidth))
}

fn bandwidth_label(b: Bandwidth) -> String {
    match b {
        Bandwidth::Markers(k) => format!("markers:{k}"),
        Bandwidth::Width(h) => format!("bp:{h}"),
    }
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> CliResult<T> + Send,
) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| invalid(format!("cannot start {workers:?} workers: {e}")))?;
    pool.install(f)
}

/// Reports progress on standard error roughly every tenth of the work.
fn progress(label: &'static str) -> impl Fn(usize, usize) + Sync {
    move |done, total| {
        if total >= 10 && done * 10 / total != (done - 1) * 10 / total || done == total {
            eprintln!("{label}: {done}/{total} trials");
        }
    }
}

fn method_pairs(kernel: KernelSpec, transform: TransformSpec) -> Vec<(&'static str, String)> {
    vec![
        ("kernel", kernel.shape.to_string()),
        ("bandwidth", bandwidth_label(kernel.bandwidth)),
        ("transform", transform.kind.to_string()),
        ("signed", transform.signed.to_string()),
    ]
}

fn phenotype_label(kind: PhenotypeKind) -> &'static str {
    match kind {
        PhenotypeKind::Continuous => "continuous",
        PhenotypeKind::Binary => "binary",
    }
}

fn cmd_scan(args: &ScanArgs, kernel: KernelSpec) -> CliResult<()> {
    let transform = TransformSpec::new(args.method.transform.into(), args.method.is_signed());
    let kind: PhenotypeKind = args.phenotype_kind.into();
    let track = load_track(&args.intensities)?;
    let phen = load_phenotype(&args.phenotype, kind)?;
    let permutations = if args.exhaustive {
        Permutations::Exhaustive
    } else {
        Permutations::Random(args.run.permutations)
    };
    let settings = ScanSettings {
        permutations,
        alpha: args.run.alpha,
        seed: args.run.seed,
    };
    eprintln!(
        "scan: {} subjects, {} markers",
        track.n_subjects(),
        track.n_markers()
    );
    let (tests, result) = scan(&track, &phen, kernel, transform, settings)?;

    let b = match permutations {
        Permutations::Random(b) => b.to_string(),
        Permutations::Exhaustive => "exhaustive".into(),
    };
    let meta = Metadata::new("scan")
        .line(&[
            ("intensities", args.intensities.display().to_string()),
            ("phenotype", args.phenotype.display().to_string()),
            ("phenotype_kind", phenotype_label(kind).into()),
        ])
        .line(&method_pairs(kernel, transform))
        .line(&[
            ("alpha", args.run.alpha.to_string()),
            ("permutations", b),
            ("seed", args.run.seed.to_string()),
        ]);

    let mut out = OutputSet::default();
    out.add(
        "marker_tests.tsv",
        meta.render(|w| write_marker_tests(&track, &tests, w))?,
    );
    out.add(
        "profile.tsv",
        meta.render(|w| write_scan_profile(&result, w))?,
    );
    out.add("null.tsv", meta.render(|w| write_null(&result.null, w))?);
    out.add(
        "summary.tsv",
        meta.render(|w| {
            writeln!(w, "t_max\tglobal_p\talpha\tthreshold\tsignificant_markers")?;
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}",
                result.t_max,
                result.global_p,
                result.alpha,
                result.threshold,
                result.significant.len()
            )
        })?,
    );
    out.commit(&args.run.out)?;
    println!(
        "t_max={} global_p={} alpha={} threshold={} significant_markers={}",
        result.t_max,
        result.global_p,
        result.alpha,
        result.threshold,
        result.significant.len()
    );
    Ok(())
}

fn cmd_null_check(args: &NullCheckArgs, kernel: KernelSpec) -> CliResult<()> {
    if args.replicates == 0 {
        return Err(invalid("--replicates must be at least 1"));
    }
    let transform = TransformSpec::new(args.method.transform.into(), args.method.is_signed());
    let bandwidth = match kernel.bandwidth {
        Bandwidth::Markers(k) => BandwidthSetting::Markers(k),
        Bandwidth::Width(h) => BandwidthSetting::BasePairs(h),
    };
    let config = NullCheckConfig {
        n: args.subjects,
        markers: args.markers,
        cnv_size: args.cnv_size,
        snr_no_association: args.snr,
        shape: kernel.shape,
        bandwidth,
        transform,
        replicates: args.replicates,
        permutations: Permutations::Random(args.run.permutations),
        alpha: args.run.alpha,
        seed: args.run.seed,
        ..NullCheckConfig::default()
    };
    config.no_cnv().validate()?;
    config.no_association().validate()?;
    if let BandwidthSetting::Markers(k) = bandwidth {
        if k > args.markers {
            return Err(cnvks_core::Error::KTooLarge {
                k,
                markers: args.markers,
            }
            .into());
        }
    }
    let report = null_check(&config, progress("null-check"))?;

    let meta = Metadata::new("null-check")
        .line(&[
            ("subjects", config.n.to_string()),
            ("markers", config.markers.to_string()),
            ("cnv_size", config.cnv_size.to_string()),
            ("snr_no_cnv", config.snr_no_cnv.to_string()),
            ("snr_no_association", config.snr_no_association.to_string()),
            (
                "frequency_no_association",
                config.association_frequency.to_string(),
            ),
        ])
        .line(&method_pairs(kernel, transform))
        .line(&[
            ("alpha", config.alpha.to_string()),
            ("permutations", args.run.permutations.to_string()),
            ("replicates", config.replicates.to_string()),
            ("seed", config.seed.to_string()),
        ]);
    let mut out = OutputSet::default();
    out.add("null_check.tsv", meta.render(|w| report.write_tsv(w))?);
    out.commit(&args.run.out)?;

    let parts: Vec<String> = report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{}: monte_carlo={} permutation={}",
                r.setting,
                r.monte_carlo.power(),
                r.permutation.power()
            )
        })
        .collect();
    println!("{}", parts.join("; "));
    Ok(())
}

fn simulate_scenario(config: Option<&Path>) -> CliResult<SimScenario> {
    let Some(path) = config else {
        return Ok(SimScenario::default());
    };
    let grid = read_study(path)?;
    if grid.scenarios.len() != 1 {
        return Err(invalid(format!(
            "{}: simulate needs a single scenario, the file defines {}",
            path.display(),
            grid.scenarios.len()
        )));
    }
    Ok(grid.scenarios.into_iter().next().expect("one scenario"))
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let scenario = simulate_scenario(args.config.as_deref())?;
    let data = build_dataset(&scenario, args.seed)?;
    let positions = data.track.positions();
    let meta = Metadata::new("simulate")
        .line(&[("scenario", scenario.key())])
        .line(&[
            ("seed", args.seed.to_string()),
            ("cnv_first_marker", data.cnv.start.to_string()),
            ("cnv_last_marker", (data.cnv.end - 1).to_string()),
            ("cnv_first_position", positions[data.cnv.start].to_string()),
            ("cnv_last_position", positions[data.cnv.end - 1].to_string()),
        ]);
    let mut out = OutputSet::default();
    out.add(
        "intensities.tsv",
        meta.render(|w| write_track(&data.track, w))?,
    );
    out.add(
        "phenotype.tsv",
        meta.render(|w| write_phenotype(&data.phen, w))?,
    );
    out.add(
        "truth.tsv",
        meta.render(|w| {
            writeln!(w, "subject_id\tcarrier")?;
            for (id, &c) in data.track.subject_ids().iter().zip(&data.carriers) {
                writeln!(w, "{id}\t{}", u8::from(c))?;
            }
            Ok(())
        })?,
    );
    out.commit(&args.out)?;
    let carriers = data.carriers.iter().filter(|&&c| c).count();
    println!(
        "subjects={} markers={} carriers={} cnv_markers={}..{}",
        scenario.n,
        scenario.markers,
        carriers,
        data.cnv.start,
        data.cnv.end - 1
    );
    Ok(())
}

fn power_grid(args: &PowerArgs) -> CliResult<PowerGrid> {
    let mut grid = match (&args.grid, &args.preset) {
        (Some(path), None) => read_study(path)?,
        (None, Some(name)) => preset(name).ok_or_else(|| {
            invalid(format!(
                "unknown preset {name:?}; choose one of {}",
                PRESETS.join(", ")
            ))
        })?,
        _ => return Err(invalid("give exactly one of --grid or --preset")),
    };
    if let Some(r) = args.replicates {
        if r == 0 {
            return Err(invalid("--replicates must be at least 1"));
        }
        grid.replicates = r;
    }
    if let Some(b) = args.permutations {
        if b == 0 {
            return Err(invalid("--permutations must be at least 1"));
        }
        grid.settings.permutations = Permutations::Random(b);
    }
    if let Some(a) = args.alpha {
        validate_alpha(a)?;
        grid.settings.alpha = a;
    }
    if let Some(s) = args.seed {
        grid.seed = s;
    }
    Ok(grid)
}

fn cmd_power(args: &PowerArgs, grid: &PowerGrid) -> CliResult<()> {
    let table = power_study_with_progress(grid, progress("power"))?;
    let source = match (&args.grid, &args.preset) {
        (Some(path), _) => ("grid", path.display().to_string()),
        (_, Some(name)) => ("preset", name.clone()),
        _ => unreachable!("validated"),
    };
    let b = match grid.settings.permutations {
        Permutations::Random(b) => b.to_string(),
        Permutations::Exhaustive => "exhaustive".into(),
    };
    let meta = Metadata::new("power").line(&[source]).line(&[
        ("replicates", grid.replicates.to_string()),
        ("permutations", b),
        ("alpha", grid.settings.alpha.to_string()),
        ("seed", grid.seed.to_string()),
    ]);
    let mut out = OutputSet::default();
    out.add("power.tsv", meta.render(|w| table.write_tsv(w))?);
    out.commit(&args.out)?;

    for c in &table.cells {
        let se = c.se().map_or_else(|| "NA".into(), |s| format!("{s:.3}"));
        let mut line = format!(
            "cnv_size={} frequency={} transform={}{} kernel={} bandwidth={} null={} power={:.3} se={se}",
            c.scenario.cnv_size,
            c.scenario.frequency,
            if c.method.transform.signed { "signed-" } else { "unsigned-" },
            c.method.transform.kind,
            c.method.shape,
            c.method.bandwidth,
            c.method.null,
            c.power(),
        );
        if c.failed > 0 {
            line.push_str(&format!(
                " failed={} ({})",
                c.failed,
                c.error.as_deref().unwrap_or("")
            ));
        }
        println!("{line}");
    }
    Ok(())
}
