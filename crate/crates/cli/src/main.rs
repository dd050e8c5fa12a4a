use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use jsphere_core::families::{named_family, registry, FamilySpec};
use jsphere_core::verify::{cross_relation_check, run_suite, CheckResult, GridSpec, VerificationReport};

/// Thread count override for the evaluation pool.
const THREADS_VAR: &str = "JSPHERE_THREADS";

#[derive(Parser)]
#[command(
    name = "jsphere",
    version,
    about = "Construct and verify J̃-tangent affine hyperspheres"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List registered families and their parameters.
    ListFamilies {
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample a family's immersion on a grid.
    Construct {
        #[arg(long)]
        family: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the verification suite of a family.
    Verify {
        #[arg(long)]
        family: String,
        #[command(flatten)]
        common: Common,
    },
    /// Build a pair, suspension or Calabi product of two sources, then sample or verify it.
    Compose {
        #[arg(long, value_enum)]
        kind: ComposeKind,
        #[arg(long)]
        first: String,
        #[arg(long)]
        second: String,
        /// Run the verification suite instead of sampling.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Compare λ of a suspension with the closed-form relations.
    Relation {
        #[arg(long)]
        first: String,
        #[arg(long)]
        second: String,
        /// Scale factor applied to the first source.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        scale: f64,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Family parameters, in registry order.
    #[arg(long = "param", allow_negative_numbers = true)]
    params: Vec<f64>,
    /// Samples per axis: one count for every axis or a comma list.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Range override per axis as lo:hi; repeat once per axis.
    #[arg(long = "range", value_parser = parse_range, allow_hyphen_values = true)]
    ranges: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComposeKind {
    Pair,
    Suspend,
    Cp,
    Calabi,
}

impl ComposeKind {
    fn prefix(self) -> &'static str {
        match self {
            ComposeKind::Pair => "pair",
            ComposeKind::Suspend => "susp",
            ComposeKind::Cp => "cp",
            ComposeKind::Calabi => "calabi",
        }
    }
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

/// Outcome of a verb: whether every check passed.
enum Outcome {
    Done,
    Checked(bool),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(Outcome::Done) | Ok(Outcome::Checked(true)) => ExitCode::SUCCESS,
        Ok(Outcome::Checked(false)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_VAR}={v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::ListFamilies { format, output } => {
            let mut w = open_output(output.as_ref())?;
            list_families(&mut w, format)?;
            Ok(Outcome::Done)
        }
        Command::Construct { family, common } => construct(&family, &common),
        Command::Verify { family, common } => verify(&family, &common),
        Command::Compose {
            kind,
            first,
            second,
            verify: check,
            common,
        } => {
            let name = format!("{}-{first}-{second}", kind.prefix());
            if check {
                verify(&name, &common)
            } else {
                construct(&name, &common)
            }
        }
        Command::Relation {
            first,
            second,
            scale,
            format,
            output,
        } => {
            let check = cross_relation_check(&first, &second, scale)?;
            let mut w = open_output(output.as_ref())?;
            match format.unwrap_or(Format::Json) {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut w, &check)?;
                    writeln!(w)?;
                }
                Format::Csv => write_checks_csv(&mut w, std::slice::from_ref(&check))?,
            }
            w.flush()?;
            Ok(Outcome::Checked(check.pass))
        }
    }
}

fn spec_of(name: &str, common: &Common) -> FamilySpec {
    FamilySpec::named(name).with_parameters(common.params.clone())
}

fn grid_of(common: &Common, dim: usize) -> GridSpec {
    let mut g = match &common.grid {
        Some(c) => GridSpec {
            counts: c.clone(),
            ranges: None,
        },
        None => GridSpec::default_for(dim),
    };
    if !common.ranges.is_empty() {
        g.ranges = Some(common.ranges.clone());
    }
    g
}

/// Opens the output before any computation so that bad paths fail fast.
fn open_output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn list_families(w: &mut dyn Write, format: Option<Format>) -> Result<()> {
    let entries = registry();
    match format {
        Some(Format::Json) => {
            serde_json::to_writer_pretty(&mut *w, &entries)?;
            writeln!(w)?;
        }
        Some(Format::Csv) => {
            let mut c = csv::Writer::from_writer(&mut *w);
            c.write_record(["name", "kind", "parameters", "description"])?;
            for e in &entries {
                let kind = serde_json::to_value(e.kind)?;
                c.write_record([
                    e.name.as_str(),
                    kind.as_str().unwrap_or_default(),
                    &e.parameters.join(";"),
                    &e.description,
                ])?;
            }
            c.flush()?;
        }
        None => {
            let width = entries.iter().map(|e| e.name.len()).max().unwrap_or(0);
            for e in &entries {
                let params = if e.parameters.is_empty() {
                    String::new()
                } else {
                    format!(" [{}]", e.parameters.join(", "))
                };
                writeln!(w, "{:width$}  {}{}", e.name, e.description, params)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn axis_names(dim: usize) -> Vec<String> {
    if dim <= 3 {
        ["x", "y", "z"][..dim].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn construct(name: &str, common: &Common) -> Result<Outcome> {
    let fam = named_family(&spec_of(name, common))?;
    let map = fam.map();
    let grid = grid_of(common, map.domain_dim()).resolve(&fam.domain)?;
    let mut w = open_output(common.output.as_ref())?;
    let points = grid.points();
    let values: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| map.eval(p))
        .collect::<std::result::Result<_, _>>()?;
    let inputs = axis_names(map.domain_dim());
    let outputs: Vec<String> = (1..=map.codomain_dim()).map(|i| format!("f{i}")).collect();
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut c = csv::Writer::from_writer(&mut w);
            c.write_record(inputs.iter().chain(&outputs))?;
            for (p, v) in points.iter().zip(&values) {
                c.write_record(p.iter().chain(v).map(|x| fmt17(*x)))?;
            }
            c.flush()?;
        }
        Format::Json => {
            let doc = serde_json::json!({
                "family": fam.spec.name,
                "parameters": fam.spec.parameters,
                "grid": grid,
                "columns": inputs.iter().chain(&outputs).collect::<Vec<_>>(),
                "points": points,
                "values": values,
            });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(Outcome::Done)
}

fn verify(name: &str, common: &Common) -> Result<Outcome> {
    let spec = spec_of(name, common);
    let dim = named_family(&spec)?.domain.dim();
    let grid = grid_of(common, dim);
    let mut w = open_output(common.output.as_ref())?;
    let report = run_suite(&spec, &grid, common.seed)?;
    write_report(&mut w, &report, common.format.unwrap_or(Format::Json))?;
    w.flush()?;
    Ok(Outcome::Checked(report.all_pass()))
}

fn write_report(w: &mut dyn Write, r: &VerificationReport, format: Format) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, r)?;
            writeln!(w)?;
        }
        Format::Csv => write_checks_csv(w, &r.checks)?,
    }
    Ok(())
}

fn write_checks_csv(w: &mut dyn Write, checks: &[CheckResult]) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["name", "max_residual", "tolerance", "pass", "witness"])?;
    for k in checks {
        let witness = k
            .witness
            .as_ref()
            .map(|p| p.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        c.write_record([
            k.name.clone(),
            fmt17(k.max_residual),
            fmt17(k.tolerance),
            k.pass.to_string(),
            witness,
        ])?;
    }
    c.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse() {
        assert_eq!(parse_range("-1:2.5").unwrap(), (-1.0, 2.5));
        assert!(parse_range("3:1").is_err());
        assert!(parse_range("1").is_err());
    }

    #[test]
    fn seventeen_digits() {
        let s = fmt17(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn axis_labels() {
        assert_eq!(axis_names(3), ["x", "y", "z"]);
        assert_eq!(axis_names(5)[4], "x5");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
