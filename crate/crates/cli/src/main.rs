//! `rng-workbench`: generate, test, estimate, extract and compare.
//!
//! Exit status is 0 on success, 1 when a requested battery concludes
//! failure, 2 on any other error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rng_workbench::bitio::{read_bits, write_bits, BitString, StreamFormat};
use rng_workbench::extractors::{eps_budget, is_prime, von_neumann, CirculantPlan, ExtractorJob, ExtractorKind};
use rng_workbench::mermin::{assess, simulate_records, AnchoredEnvelope, MerminRecordSet};
use rng_workbench::minentropy::{lower_bound_alpha, mcv_estimate, EPS_EST_7SIGMA};
use rng_workbench::pipeline::{
    run_level1, run_level2, run_level3, run_level4, split_self_source, LevelParams, PipelineRun, SEED_BITS,
};
use rng_workbench::report::{compare_levels, run_profile, LevelKey, Profile, WorkbenchConfig};
use rng_workbench::sources::{
    beacon_seed, biased_iid_generate, lfsr_generate, uniform_generate, FixturePulseSource, HttpPulseSource, PulseSource,
};
use rng_workbench::stattests::BatteryReport;
use rng_workbench::EntropyAssessment;

const DEFAULT_BEACON: &str = "https://beacon.nist.gov/beacon/2.0";

#[derive(Parser)]
#[command(
    name = "rng-workbench",
    version,
    about = "Randomness testing and extraction workbench"
)]
struct Cli {
    /// JSON settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bit stream format for inputs and outputs: raw, ascii01 or hex.
    #[arg(long, global = true)]
    format: Option<StreamFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a test profile over one bit stream.
    Test(TestArgs),
    /// Min-entropy rate lower bound from a directory of samples.
    Estimate(EstimateArgs),
    /// Apply one extractor.
    Extract(ExtractArgs),
    /// Run a post-processing level end to end.
    Pipeline(PipelineArgs),
    /// Mermin-inequality records: analyze or simulate.
    #[command(subcommand)]
    Mermin(MerminCommand),
    /// Fetch beacon output bits.
    Beacon(BeaconArgs),
    /// Generate a bit stream from a built-in source.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Compare battery results across sources and levels.
    Report(ReportArgs),
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    profile: Option<Profile>,
    /// Only test the first N bits.
    #[arg(long)]
    bits: Option<usize>,
    /// Write the full report as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Directory whose files are the samples, one estimate per file.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    symbol_bits: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractMode {
    Vn,
    Seeded,
    TwoSource,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(value_enum)]
    mode: ExtractMode,
    #[arg(long)]
    input: PathBuf,
    /// Seed (seeded) or second source (two-source); its length must be prime.
    #[arg(long)]
    seed: Option<PathBuf>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    /// Per-round error, e.g. `2^-64` or `1e-20`.
    #[arg(long, value_parser = parse_prob)]
    eps_round: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    level: u8,
    #[arg(long)]
    input: PathBuf,
    /// `beacon`, `file:<path>`, `self` or `mermin:<records.csv>`.
    #[arg(long)]
    second: Option<String>,
    #[arg(long)]
    alpha_rng: Option<f64>,
    /// EntropyAssessment JSON from `estimate`; supplies alpha_rng and ε_est.
    #[arg(long)]
    assessment: Option<PathBuf>,
    /// Overrides the second source's claimed rate at level 3.
    #[arg(long)]
    alpha_second: Option<f64>,
    /// Error of the Mermin estimate at level 4.
    #[arg(long, value_parser = parse_prob)]
    mermin_eps: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Output bits wanted; by default the whole input is processed.
    #[arg(long)]
    bits: Option<usize>,
}

#[derive(Subcommand)]
enum MerminCommand {
    Analyze {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_parser = parse_prob)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Simulate {
        #[arg(long)]
        visibility: f64,
        #[arg(long)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BeaconArgs {
    #[arg(long)]
    bits: usize,
    /// Play pulses back from a JSON fixture instead of the network.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum GenCommand {
    Lfsr {
        /// 32-bit seed in hex.
        #[arg(long, value_parser = parse_hex32)]
        seed: u32,
        #[arg(long)]
        bits: usize,
        #[arg(long)]
        out: PathBuf,
    },
    Iid {
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    Uniform {
        #[arg(long)]
        bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// `<source>:<level>=<file>`, repeatable.
    #[arg(long = "run", required = true)]
    runs: Vec<String>,
    /// `<source>:<level>` shown as `-` (refused or not run).
    #[arg(long)]
    missing: Vec<String>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Plot data `log2(f+1)` per row.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Failure of a requested battery, as opposed to an error.
#[derive(Debug)]
struct BatteryFailed;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns `Ok(false)` when a battery failed.
fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => WorkbenchConfig::load(p)?,
        None => WorkbenchConfig::default(),
    };
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    let outcome = match cli.command {
        Command::Test(a) => cmd_test(&cfg, a),
        Command::Estimate(a) => cmd_estimate(&cfg, a),
        Command::Extract(a) => cmd_extract(&cfg, a),
        Command::Pipeline(a) => cmd_pipeline(&cfg, a),
        Command::Mermin(c) => cmd_mermin(&cfg, c),
        Command::Beacon(a) => cmd_beacon(&cfg, a),
        Command::Gen(c) => cmd_gen(&cfg, c),
        Command::Report(a) => cmd_report(&cfg, a),
    };
    match outcome {
        Ok(()) => Ok(true),
        Err(e) if e.is::<BatteryFailed>() => Ok(false),
        Err(e) => Err(e),
    }
}

impl std::fmt::Display for BatteryFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("battery failed")
    }
}

impl std::error::Error for BatteryFailed {}

/// Accepts `2^-64`, `2^(-64)`, `1e-20` or `0.001`.
fn parse_prob(s: &str) -> Result<f64, String> {
    let t = s.trim().replace(['(', ')'], "");
    let v = match t.strip_prefix("2^") {
        Some(e) => 2f64.powf(e.parse::<f64>().map_err(|e| e.to_string())?),
        None => t.parse::<f64>().map_err(|e| e.to_string())?,
    };
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{s} is not a probability in (0, 1)"))
    }
}

fn parse_hex32(s: &str) -> Result<u32, String> {
    u32::from_str_radix(s.trim_start_matches("0x"), 16).map_err(|e| e.to_string())
}

fn read(cfg: &WorkbenchConfig, path: &Path, max: Option<usize>) -> Result<BitString> {
    read_bits(path, cfg.format, max).with_context(|| format!("reading {}", path.display()))
}

fn write(cfg: &WorkbenchConfig, s: &BitString, path: &Path) -> Result<()> {
    if s.is_empty() {
        // an empty result is legitimate (e.g. level 1 on constant input)
        fs::write(path, b"")?;
        return Ok(());
    }
    write_bits(s, path, cfg.format).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn print_battery(r: &BatteryReport) {
    println!("{} on {} bits", r.config, r.bits);
    for e in &r.entries {
        let o = &e.outcome;
        println!(
            "  {:<11} {:<22} p={:<12.6e} {}",
            e.suite,
            o.test_name,
            o.p.value(),
            o.verdict
        );
    }
    for s in &r.skipped {
        println!("  {:<11} {:<22} skipped: {}", s.suite, s.test_name, s.reason);
    }
    println!(
        "failed {} weak {} (expected false failures {:.3}): {}",
        r.failed,
        r.weak,
        r.expected_false_failures,
        if r.success() { "PASS" } else { "FAIL" }
    );
}

fn cmd_test(cfg: &WorkbenchConfig, a: TestArgs) -> Result<()> {
    let s = read(cfg, &a.input, a.bits)?;
    let report = run_profile(&s, a.profile.unwrap_or(cfg.profile))?;
    print_battery(&report);
    if let Some(p) = a.json {
        write_json(&p, &report)?;
    }
    if report.success() {
        Ok(())
    } else {
        Err(BatteryFailed.into())
    }
}

fn cmd_estimate(cfg: &WorkbenchConfig, a: EstimateArgs) -> Result<()> {
    let symbol_bits = a.symbol_bits.unwrap_or(cfg.symbol_bits);
    let mut files: Vec<PathBuf> = fs::read_dir(&a.samples)
        .with_context(|| format!("listing {}", a.samples.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && !p.to_string_lossy().ends_with(".meta.json"))
        .collect();
    files.sort();
    let mut estimates = Vec::new();
    for f in &files {
        let e = mcv_estimate(&read(cfg, f, None)?, symbol_bits)?;
        eprintln!("{}: {:.6} bits/bit (p_max ≤ {:.6})", f.display(), e.estimate, e.p_upper);
        estimates.push(e.estimate);
    }
    let assessment: EntropyAssessment = lower_bound_alpha(&estimates)?;
    if assessment.clipped {
        eprintln!(
            "warning: mean − 7σ = {:.4} clipped to {}",
            assessment.alpha_unclipped, assessment.alpha
        );
    }
    let text = serde_json::to_string_pretty(&assessment)?;
    match a.out {
        Some(p) => write_json(&p, &assessment)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_extract(cfg: &WorkbenchConfig, a: ExtractArgs) -> Result<()> {
    let x = read(cfg, &a.input, None)?;
    let eps_round = a.eps_round.unwrap_or(cfg.eps_round);
    let (out, manifest) = match a.mode {
        ExtractMode::Vn => {
            let out = von_neumann(&x);
            let m = json!({
                "kind": ExtractorKind::VonNeumann,
                "n_input": x.len(),
                "m_out": out.len(),
                "eps": 0.0,
            });
            (out, m)
        }
        ExtractMode::Seeded | ExtractMode::TwoSource => {
            let seed_path = a.seed.as_ref().ok_or_else(|| anyhow!("--seed is required"))?;
            let y = read(cfg, seed_path, None)?;
            if !is_prime(y.len()) {
                bail!("seed length {} is not prime", y.len());
            }
            let plan = CirculantPlan::new(&y)?;
            let n = plan.input_len();
            let alpha1 = a.alpha1.ok_or_else(|| anyhow!("--alpha1 is required"))?;
            let (kind, k2, rounds) = match a.mode {
                ExtractMode::Seeded => (ExtractorKind::CirculantSeeded, 0.0, x.len() / n),
                _ => {
                    let alpha2 = a.alpha2.ok_or_else(|| anyhow!("--alpha2 is required for two-source"))?;
                    (
                        ExtractorKind::CirculantTwoSource,
                        alpha2 * y.len() as f64,
                        1.min(x.len() / n),
                    )
                }
            };
            if rounds == 0 {
                bail!("input has {} bits, one round needs {n}", x.len());
            }
            let job = ExtractorJob::circulant(kind, n, alpha1 * n as f64, k2, eps_round)?;
            if job.m_out == 0 {
                bail!("output length is zero for these rates");
            }
            let mut out = BitString::with_capacity(rounds * job.m_out);
            for r in 0..rounds {
                out.extend_bits(&plan.extract(&x.slice(r * n, (r + 1) * n), job.m_out)?);
            }
            let budget = eps_budget(EPS_EST_7SIGMA, rounds as u64, eps_round)?;
            let m = json!({
                "job": job,
                "rounds": rounds,
                "m_out": rounds * job.m_out,
                "discarded_bits": x.len() - rounds * n,
                "budget": budget,
            });
            (out, m)
        }
    };
    write(cfg, &out, &a.out)?;
    write_json(&manifest_path(&a.out), &manifest)?;
    println!("{} bits written to {}", out.len(), a.out.display());
    Ok(())
}

fn pulse_source(cfg: &WorkbenchConfig, fixture: Option<&Path>) -> Result<Box<dyn PulseSource>> {
    Ok(match fixture.or(cfg.beacon_fixture.as_deref()) {
        Some(p) => Box::new(FixturePulseSource::from_file(p)?),
        None => Box::new(HttpPulseSource::new(
            cfg.beacon_endpoint.as_deref().unwrap_or(DEFAULT_BEACON),
        )?),
    })
}

fn beacon_bits(cfg: &WorkbenchConfig, fixture: Option<&Path>, n: usize) -> Result<(BitString, String)> {
    let mut src = pulse_source(cfg, fixture)?;
    let seed = beacon_seed(src.as_mut(), n)?;
    let origin = format!("beacon pulses {:?}", seed.pulse_indices);
    Ok((seed.bits, origin))
}

fn cmd_pipeline(cfg: &WorkbenchConfig, a: PipelineArgs) -> Result<()> {
    let input = read(cfg, &a.input, None)?;
    let mut params = match (&a.assessment, a.alpha_rng) {
        (Some(p), None) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let est: EntropyAssessment = serde_json::from_str(&text)?;
            let mut lp = LevelParams::new(est.alpha);
            lp.eps_est = est.eps_est;
            lp
        }
        (None, Some(alpha)) => LevelParams::new(alpha),
        (None, None) if a.level == 1 => LevelParams::new(1.0),
        _ => bail!("give exactly one of --alpha-rng and --assessment"),
    };
    params.eps_round = cfg.eps_round;
    params.output_bits = a.bits;

    let second = a.second.as_deref();
    let run: PipelineRun = match a.level {
        1 => {
            if second.is_some() {
                bail!("level 1 takes no second source");
            }
            run_level1(&input)?
        }
        2 => {
            let (seed, origin) = match second.unwrap_or("beacon") {
                "beacon" => beacon_bits(cfg, None, SEED_BITS)?,
                s if s.starts_with("file:") => {
                    let p = Path::new(&s[5..]);
                    (read(cfg, p, Some(SEED_BITS))?, format!("file {}", p.display()))
                }
                other => bail!("level 2 seed must be beacon or file:<path>, got {other}"),
            };
            run_level2(&input, &seed, &origin, &params)?
        }
        3 => {
            let spec = second.ok_or_else(|| anyhow!("level 3 needs --second"))?;
            let (y, origin, x) = match spec {
                "self" => {
                    let (y, x) = split_self_source(&input)?;
                    (y, "first input bits (self mode)".to_string(), x)
                }
                "beacon" => {
                    let (y, o) = beacon_bits(cfg, None, SEED_BITS)?;
                    (y, o, input)
                }
                s if s.starts_with("file:") => {
                    let p = Path::new(&s[5..]);
                    (read(cfg, p, Some(SEED_BITS))?, format!("file {}", p.display()), input)
                }
                other => bail!("unknown second source {other}"),
            };
            run_level3(&x, &y, &origin, a.alpha_second, cfg.margin, &params)?
        }
        _ => {
            let spec = second.ok_or_else(|| anyhow!("level 4 needs --second mermin:<records>"))?;
            let path = spec
                .strip_prefix("mermin:")
                .ok_or_else(|| anyhow!("level 4 second source must be mermin:<records>"))?;
            let records = MerminRecordSet::read_csv(Path::new(path))?;
            let eps = a.mermin_eps.unwrap_or(EPS_EST_7SIGMA);
            let assessment = assess(&records, eps, cfg.hoeffding, &AnchoredEnvelope::default())?;
            eprintln!("mermin: {assessment}");
            run_level4(&input, &records, &assessment, &params)?
        }
    };
    for n in &run.manifest.notes {
        eprintln!("note: {n}");
    }
    write(cfg, &run.output, &a.out)?;
    write_json(&manifest_path(&a.out), &run.manifest)?;
    println!(
        "level {}: {} bits written to {} (eps_total {:.3e})",
        a.level,
        run.output.len(),
        a.out.display(),
        run.manifest.budget.eps_total
    );
    Ok(())
}

fn cmd_mermin(cfg: &WorkbenchConfig, c: MerminCommand) -> Result<()> {
    match c {
        MerminCommand::Analyze { records, eps, out } => {
            let r = MerminRecordSet::read_csv(&records)?;
            let a = assess(&r, eps, cfg.hoeffding, &AnchoredEnvelope::default())?;
            eprintln!("{a}");
            match out {
                Some(p) => write_json(&p, &a)?,
                None => println!("{}", serde_json::to_string_pretty(&a)?),
            }
        }
        MerminCommand::Simulate {
            visibility,
            rounds,
            seed,
            out,
        } => {
            let r = simulate_records(visibility, rounds, seed)?;
            r.write_csv(&out)?;
            println!("{rounds} rounds written to {}", out.display());
        }
    }
    Ok(())
}

fn cmd_beacon(cfg: &WorkbenchConfig, a: BeaconArgs) -> Result<()> {
    let (bits, origin) = beacon_bits(cfg, a.fixture.as_deref(), a.bits)?;
    write(cfg, &bits, &a.out)?;
    println!("{} bits from {origin}", bits.len());
    Ok(())
}

fn cmd_gen(cfg: &WorkbenchConfig, c: GenCommand) -> Result<()> {
    let (bits, out) = match c {
        GenCommand::Lfsr { seed, bits, out } => (lfsr_generate(seed, bits)?, out),
        GenCommand::Iid { p0, bits, seed, out } => (biased_iid_generate(p0, bits, seed)?, out),
        GenCommand::Uniform { bits, seed, out } => (uniform_generate(bits, seed), out),
    };
    write(cfg, &bits, &out)?;
    println!("{} bits written to {}", bits.len(), out.display());
    Ok(())
}

fn parse_key(s: &str) -> Result<LevelKey> {
    let (source, level) = s
        .rsplit_once(':')
        .ok_or_else(|| anyhow!("expected <source>:<level>, got {s}"))?;
    Ok(LevelKey::new(
        source,
        level.parse().with_context(|| format!("level in {s}"))?,
    ))
}

fn cmd_report(cfg: &WorkbenchConfig, a: ReportArgs) -> Result<()> {
    let profile = a.profile.unwrap_or(cfg.profile);
    let mut reports = BTreeMap::new();
    for r in &a.runs {
        let (key, path) = r
            .split_once('=')
            .ok_or_else(|| anyhow!("expected <source>:<level>=<file>, got {r}"))?;
        let s = read(cfg, Path::new(path), None)?;
        reports.insert(parse_key(key)?, run_profile(&s, profile)?);
    }
    let mut cmp = compare_levels(&reports)?;
    for m in &a.missing {
        cmp.mark_missing(parse_key(m)?);
    }
    print!("{}", cmp.to_table());
    if let Some(p) = a.json {
        write_json(
            &p,
            &json!({ "comparison": cmp, "reports": reports.values().collect::<Vec<_>>() }),
        )?;
    }
    if let Some(p) = a.csv {
        fs::write(&p, cmp.to_csv())?;
    }
    if reports.values().all(BatteryReport::success) {
        Ok(())
    } else {
        Err(BatteryFailed.into())
    }
}
