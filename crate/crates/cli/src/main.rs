use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use webrank_core::abelrank::{default_orders, rank_run, verify_max_rank};
use webrank_core::catalog::{self, FamilySpec};
use webrank_core::combin::{c, n_table, pi_prime, rho, verify_identities};
use webrank_core::jets::{build_p, square_block};
use webrank_core::ordinary::{check_condition_iv, check_ordinary_direct, theorem1_crosscheck};
use webrank_core::web::{assemble, is_quasi_symmetric, validate_balanced};
use webrank_core::{
    with_scalar, BalancedSet, Error, GenericPointSampler, Precision, Rational, Scalar, ScalarMode, Verdict,
    VerificationReport, Witness,
};

// sysexits.h
const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;
const EX_SOFTWARE: u8 = 70;
const EX_CANTCREAT: u8 = 73;

const QUASI_SYMMETRY_TRIALS: usize = 3;

#[derive(Parser, Debug)]
#[command(name = "webrank", version, about = "Ordinariness and maximal-rank checks for balanced codimension-one webs")]
struct Cli {
    /// Seed for generic-point sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Starting precision for float mode: 128, 256 or 512.
    #[arg(long = "precision-bits", global = true, default_value_t = 128)]
    precision_bits: u32,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    /// Name of a built-in family.
    #[arg(long)]
    family: Option<String>,
    /// Path to a web-definition JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List built-in families, or export one as web-definition JSON.
    Catalog {
        #[arg(long, value_name = "NAME")]
        export: Option<String>,
    },
    /// Counting tables c, pi', rho and N for one k0 and dimension.
    Counts {
        #[arg(long)]
        k0: i64,
        #[arg(long)]
        n: i64,
    },
    /// Cardinalities, variable usage and the web condition.
    Validate {
        #[command(flatten)]
        source: Source,
        /// Dimensions for the web condition; defaults to k0 and k0+1.
        #[arg(long, num_args = 1..)]
        n: Vec<usize>,
    },
    /// The finite ordinariness criterion, optionally with direct checks.
    CheckOrdinary {
        #[command(flatten)]
        source: Source,
        /// Also run the direct check on W(n,E).
        #[arg(long)]
        direct: bool,
        /// Dimensions for the direct check; defaults to k0 and k0+1.
        #[arg(long, num_args = 1..)]
        n: Vec<usize>,
        /// Write the witnessing matrices as CSV into this directory.
        #[arg(long, value_name = "DIR")]
        csv_dir: Option<PathBuf>,
    },
    /// Abelian rank of W(n,E) against rho(n,k0).
    Rank {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        n: usize,
        /// Largest jet order; defaults to k0+5.
        #[arg(long)]
        cap: Option<u32>,
    },
    /// Full pipeline: validity, ordinariness and maximal rank.
    VerifyFamily {
        #[command(flatten)]
        source: Source,
        /// Dimensions for the direct ordinariness check; defaults to k0 and k0+1.
        #[arg(long, num_args = 1..)]
        n: Vec<usize>,
        #[arg(long)]
        cap: Option<u32>,
        /// Also measure the rank at n = k0+1.
        #[arg(long)]
        corroborate: bool,
    },
    /// Compare the finite criterion with direct checks.
    Crosscheck {
        #[command(flatten)]
        source: Source,
        /// Defaults to 2, 3, k0 and k0+1.
        #[arg(long, num_args = 1..)]
        n: Vec<usize>,
    },
}

/// Echoed into every report so a run can be repeated exactly.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: String,
    seed: u64,
    precision_bits: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<u32>,
    n: Vec<usize>,
    format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnknownFamily(_) => EX_NOINPUT,
            Error::Domain(_) | Error::PointTooShort { .. } => EX_USAGE,
            Error::Internal(_) => EX_SOFTWARE,
            _ => EX_DATAERR,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Outcome {
    verdict: Verdict,
    json: Value,
    text: String,
}

struct Loaded {
    set: BalancedSet,
    spec: Option<FamilySpec>,
    input: String,
}

fn load(source: &Source) -> CliResult<Loaded> {
    if let Some(name) = &source.family {
        let (set, spec) = catalog::get_family(name)?;
        return Ok(Loaded {
            set,
            spec: Some(spec),
            input: name.clone(),
        });
    }
    let path = source.input.as_ref().expect("clap enforces one source");
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EX_NOINPUT, format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into());
    let set = BalancedSet::from_json(name, &text)?;
    Ok(Loaded {
        set,
        spec: None,
        input: path.display().to_string(),
    })
}

fn default_dims(k0: usize, given: &[usize]) -> Vec<usize> {
    if given.is_empty() {
        vec![k0, k0 + 1]
    } else {
        given.to_vec()
    }
}

fn precision(bits: u32) -> CliResult<Precision> {
    Precision::from_bits(bits)
        .ok_or_else(|| Failure::new(EX_USAGE, format!("precision must be 128, 256 or 512 bits, got {bits}")))
}

fn check_dims(n: &[usize]) -> CliResult<()> {
    match n.iter().find(|&&v| v < 2) {
        Some(v) => Err(Failure::new(EX_USAGE, format!("dimension n = {v} must be at least 2"))),
        None => Ok(()),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn report_text(r: &VerificationReport) -> String {
    let mut out = String::new();
    for c in &r.verdicts {
        out.push_str(&format!("  {}: {} ({})\n", c.label, c.verdict, c.detail));
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EX_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            match cli.format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&outcome.json).expect("json values serialize")
                ),
                Format::Text => print!("{}", outcome.text),
            }
            ExitCode::from(outcome.verdict.exit_code() as u8)
        }
        Err(f) => {
            eprintln!("webrank: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    let prec = precision(cli.precision_bits)?;
    let sampler = GenericPointSampler::new(cli.seed);
    let mut config = RunConfig {
        command: String::new(),
        seed: cli.seed,
        precision_bits: cli.precision_bits,
        cap: None,
        n: Vec::new(),
        format: cli.format,
        input: None,
    };
    match &cli.command {
        Command::Catalog { export } => {
            config.command = "catalog".into();
            catalog_cmd(config, export.as_deref())
        }
        Command::Counts { k0, n } => {
            config.command = "counts".into();
            config.n = vec![(*n).max(0) as usize];
            counts_cmd(config, *k0, *n)
        }
        Command::Validate { source, n } => {
            config.command = "validate".into();
            let loaded = load(source)?;
            config.n = default_dims(loaded.set.k0, n);
            config.input = Some(loaded.input.clone());
            check_dims(&config.n)?;
            validate_cmd(config, &loaded, &sampler)
        }
        Command::CheckOrdinary {
            source,
            direct,
            n,
            csv_dir,
        } => {
            config.command = "check-ordinary".into();
            let loaded = load(source)?;
            config.n = if *direct { default_dims(loaded.set.k0, n) } else { Vec::new() };
            config.input = Some(loaded.input.clone());
            check_dims(&config.n)?;
            check_ordinary_cmd(config, &loaded, &sampler, prec, csv_dir.as_deref())
        }
        Command::Rank { source, n, cap } => {
            config.command = "rank".into();
            let loaded = load(source)?;
            config.n = vec![*n];
            config.cap = Some(cap.unwrap_or(default_orders(loaded.set.k0).1));
            config.input = Some(loaded.input.clone());
            check_dims(&config.n)?;
            rank_cmd(config, &loaded, &sampler, prec)
        }
        Command::VerifyFamily {
            source,
            n,
            cap,
            corroborate,
        } => {
            config.command = if *corroborate {
                "verify-family --corroborate".into()
            } else {
                "verify-family".into()
            };
            let loaded = load(source)?;
            config.n = default_dims(loaded.set.k0, n);
            config.cap = Some(cap.unwrap_or(default_orders(loaded.set.k0).1));
            config.input = Some(loaded.input.clone());
            check_dims(&config.n)?;
            verify_family_cmd(config, &loaded, &sampler, prec, *corroborate)
        }
        Command::Crosscheck { source, n } => {
            config.command = "crosscheck".into();
            let loaded = load(source)?;
            let k0 = loaded.set.k0;
            config.n = if n.is_empty() {
                let mut v = vec![2, 3, k0, k0 + 1];
                v.sort_unstable();
                v.dedup();
                v
            } else {
                n.clone()
            };
            config.input = Some(loaded.input.clone());
            check_dims(&config.n)?;
            let cc = theorem1_crosscheck(&loaded.set, &config.n, &sampler, prec)?;
            let mut text = format!("crosscheck {} (condition iv: {})\n", cc.family, cc.condition_iv);
            for r in &cc.rows {
                text.push_str(&format!("  n={}: direct {}, agree {}\n", r.n, r.direct, r.agree));
            }
            text.push_str(&format!("verdict: {}\n", cc.verdict));
            Ok(Outcome {
                verdict: cc.verdict,
                json: json!({ "config": config, "family": cc.family, "crosscheck": cc, "verdict": cc.verdict }),
                text,
            })
        }
    }
}

fn catalog_cmd(config: RunConfig, export: Option<&str>) -> CliResult<Outcome> {
    if let Some(name) = export {
        let (set, _) = catalog::get_family(name)?;
        let def = set.to_definition();
        let text = format!("{}\n", serde_json::to_string_pretty(&def).expect("definition serializes"));
        return Ok(Outcome {
            verdict: Verdict::True,
            json: to_value(&def),
            text,
        });
    }
    let specs = catalog::list();
    let mut text = String::new();
    for s in &specs {
        text.push_str(&format!(
            "{:<28} k0={}  ordinary={} max_rank={} quasi_symmetric={}  [{}]\n",
            s.name, s.k0, s.expected.ordinary, s.expected.max_rank, s.expected.quasi_symmetric, s.provenance
        ));
    }
    Ok(Outcome {
        verdict: Verdict::True,
        json: json!({ "config": config, "families": specs }),
        text,
    })
}

fn counts_cmd(config: RunConfig, k0: i64, n: i64) -> CliResult<Outcome> {
    if k0 < 1 || n < 2 {
        return Err(Failure::new(EX_USAGE, format!("need k0 >= 1 and n >= 2, got k0={k0}, n={n}")));
    }
    let c_values: BTreeMap<i64, String> = (1..=k0 + 1)
        .map(|h| Ok((h, c(n, h)?.to_string())))
        .collect::<webrank_core::Result<_>>()?;
    let d = c(n, k0)?;
    let pi = pi_prime(n, &d)?;
    let table = n_table(k0, n)?;
    let r = rho(n, k0)?;
    if pi != r {
        return Err(Failure::new(EX_SOFTWARE, format!("pi'(n, c(n,k0)) = {pi} differs from rho = {r}")));
    }
    // counting identities on the printed range
    let identities = verify_identities(k0.max(2), n, n)?;
    let verdict = Verdict::from_bool(identities.is_none());

    let mut text = format!("k0 = {k0}, n = {n}\n");
    text.push_str("c(n,h):");
    for (h, v) in &c_values {
        text.push_str(&format!(" h={h}:{v}"));
    }
    text.push_str(&format!("\nd = c(n,k0) = {d}\npi'(n,d) = {pi}\nrho(n,k0) = {r}\nrho(m,k0):"));
    for (m, v) in &table.rho_values {
        text.push_str(&format!(" m={m}:{v}"));
    }
    text.push_str("\nN(h,k0):");
    for (h, v) in &table.n_values {
        text.push_str(&format!(" h={h}:{v}"));
    }
    text.push('\n');
    if let Some(cx) = &identities {
        text.push_str(&format!("identity failure: {cx:?}\n"));
    }
    Ok(Outcome {
        verdict,
        json: json!({
            "config": config,
            "k0": k0,
            "n": n,
            "c": c_values,
            "d": d.to_string(),
            "pi_prime": pi.to_string(),
            "rho": r.to_string(),
            "table": table,
            "identities_hold": identities.is_none(),
            "verdict": verdict,
        }),
        text,
    })
}

fn validate_report(loaded: &Loaded, dims: &[usize], sampler: &GenericPointSampler) -> VerificationReport {
    let set = &loaded.set;
    let mut report = VerificationReport::new(&set.name, sampler.seed());
    for (i, &n) in dims.iter().enumerate() {
        let part = validate_balanced(set, n, sampler);
        if i == 0 {
            report.absorb("", part);
        } else {
            // cardinality and variable checks do not depend on n
            for c in part.verdicts.into_iter().filter(|c| c.label.starts_with("web condition")) {
                report.push(c.label, c.verdict, c.detail);
            }
        }
    }
    report
}

fn validate_cmd(config: RunConfig, loaded: &Loaded, sampler: &GenericPointSampler) -> CliResult<Outcome> {
    let report = validate_report(loaded, &config.n, sampler);
    let qs = is_quasi_symmetric(&loaded.set, QUASI_SYMMETRY_TRIALS, sampler);
    let text = format!(
        "validate {}\n{}  quasi-symmetric: {}\nverdict: {}\n",
        loaded.set.name,
        report_text(&report),
        qs.summary(),
        report.verdict
    );
    Ok(Outcome {
        verdict: report.verdict,
        json: json!({
            "config": config,
            "family": loaded.set.name,
            "balanced_valid": report,
            "quasi_symmetric": qs,
            "verdict": report.verdict,
        }),
        text,
    })
}

fn parse_point(w: &Witness) -> CliResult<Vec<Rational>> {
    w.point
        .iter()
        .map(|s| Rational::from_str(s).map_err(|e| Failure::new(EX_SOFTWARE, format!("witness point {s}: {e}"))))
        .collect()
}

fn witness_mode(w: &Witness) -> ScalarMode {
    match w.mode.strip_prefix("float").and_then(|b| b.parse().ok()).and_then(Precision::from_bits) {
        Some(p) => ScalarMode::Float(p),
        None => ScalarMode::Exact,
    }
}

fn write_csv(dir: &Path, file: &str, body: &str) -> CliResult<()> {
    let path = dir.join(file);
    fs::write(&path, body).map_err(|e| Failure::new(EX_CANTCREAT, format!("cannot write {}: {e}", path.display())))
}

fn square_block_csv(set: &BalancedSet, k: usize, p: &[Rational], mode: ScalarMode) -> webrank_core::Result<String> {
    let t = set.web(k);
    with_scalar!(mode, S => {
        let pt: Vec<S> = p.iter().map(S::from_rational).collect();
        square_block(t, set.k0, &pt).map(|m| m.to_csv())
    })
}

fn p_matrix_csv(set: &BalancedSet, n: usize, h: u32, p: &[Rational], mode: ScalarMode) -> webrank_core::Result<String> {
    let w = assemble(set, n);
    with_scalar!(mode, S => {
        let pt: Vec<S> = p.iter().map(S::from_rational).collect();
        build_p(&w, h, &pt).map(|m| m.to_csv())
    })
}

/// Labels look like `k=3` or `n=4 h=2`.
fn label_numbers(label: &str) -> BTreeMap<String, usize> {
    label
        .split_whitespace()
        .filter_map(|part| {
            let (key, v) = part.split_once('=')?;
            Some((key.to_string(), v.parse().ok()?))
        })
        .collect()
}

fn export_csv(
    dir: &Path,
    set: &BalancedSet,
    blocks: &VerificationReport,
    direct: &[VerificationReport],
) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::new(EX_CANTCREAT, format!("cannot create {}: {e}", dir.display())))?;
    // the first witness per matrix is the one at the deciding or first failing point
    let mut seen = std::collections::BTreeSet::new();
    for w in &blocks.witnesses {
        let nums = label_numbers(&w.label);
        let Some(&k) = nums.get("k") else { continue };
        if !seen.insert(format!("block_k{k}")) {
            continue;
        }
        let body = square_block_csv(set, k, &parse_point(w)?, witness_mode(w))?;
        write_csv(dir, &format!("block_k{k}.csv"), &body)?;
    }
    for w in direct.iter().flat_map(|r| &r.witnesses) {
        let nums = label_numbers(&w.label);
        let (Some(&n), Some(&h)) = (nums.get("n"), nums.get("h")) else { continue };
        let name = format!("P_n{n}_h{h}");
        if !seen.insert(name.clone()) {
            continue;
        }
        let body = p_matrix_csv(set, n, h as u32, &parse_point(w)?, witness_mode(w))?;
        write_csv(dir, &format!("{name}.csv"), &body)?;
    }
    Ok(())
}

fn direct_reports(
    set: &BalancedSet,
    dims: &[usize],
    sampler: &GenericPointSampler,
    prec: Precision,
) -> CliResult<Vec<VerificationReport>> {
    Ok(dims
        .iter()
        .map(|&n| check_ordinary_direct(set, n, sampler, prec))
        .collect::<webrank_core::Result<_>>()?)
}

fn check_ordinary_cmd(
    config: RunConfig,
    loaded: &Loaded,
    sampler: &GenericPointSampler,
    prec: Precision,
    csv_dir: Option<&Path>,
) -> CliResult<Outcome> {
    let set = &loaded.set;
    let iv = check_condition_iv(set, sampler, prec);
    let direct = direct_reports(set, &config.n, sampler, prec)?;
    if let Some(dir) = csv_dir {
        export_csv(dir, set, &iv, &direct)?;
    }
    let verdict = Verdict::all(std::iter::once(iv.verdict).chain(direct.iter().map(|r| r.verdict)));
    let mut text = format!("check-ordinary {}\n{}", set.name, report_text(&iv));
    for r in &direct {
        text.push_str(&report_text(r));
    }
    text.push_str(&format!("verdict: {verdict}\n"));
    Ok(Outcome {
        verdict,
        json: json!({
            "config": config,
            "family": set.name,
            "ordinary": { "condition_iv": iv, "direct": direct },
            "verdict": verdict,
        }),
        text,
    })
}

fn rank_cmd(config: RunConfig, loaded: &Loaded, sampler: &GenericPointSampler, prec: Precision) -> CliResult<Outcome> {
    let set = &loaded.set;
    let n = config.n[0];
    let expected = rho(n as i64, set.k0 as i64)?
        .to_string()
        .parse::<usize>()
        .map_err(|_| Failure::new(EX_USAGE, "rho(n,k0) does not fit a machine integer"))?;
    let run = rank_run(set, n, expected, sampler, config.cap, prec);
    let dims = run.estimates.last().map(|e| e.dims.clone()).unwrap_or_default();
    let got = run.value.map_or("none".to_string(), |v| v.to_string());
    let text = format!(
        "rank {} n={n}: {got} (rho({n},{}) = {expected})\n  dims by order: {:?}\nverdict: {}\n",
        set.name,
        set.k0,
        dims.values().collect::<Vec<_>>(),
        run.verdict
    );
    Ok(Outcome {
        verdict: run.verdict,
        json: json!({
            "config": config,
            "family": set.name,
            "rank": { "per_n": [run], "dims_trace": { n.to_string(): dims } },
            "verdict": run.verdict,
        }),
        text,
    })
}

fn verify_family_cmd(
    config: RunConfig,
    loaded: &Loaded,
    sampler: &GenericPointSampler,
    prec: Precision,
    corroborate: bool,
) -> CliResult<Outcome> {
    let set = &loaded.set;
    let valid = validate_report(loaded, &[set.k0, set.k0 + 1], sampler);
    let iv = check_condition_iv(set, sampler, prec);
    let direct = direct_reports(set, &config.n, sampler, prec)?;
    let ranks = verify_max_rank(set, sampler, config.cap, prec, corroborate)?;
    let qs = is_quasi_symmetric(set, QUASI_SYMMETRY_TRIALS, sampler);

    let mut summary = VerificationReport::new(&set.name, sampler.seed());
    summary.push("balanced set valid", valid.verdict, format!("{} checks", valid.verdicts.len()));
    summary.push(
        "ordinary for all n",
        iv.verdict,
        format!("finite criterion on {} blocks", iv.verdicts.len()),
    );
    for r in &direct {
        for c in &r.verdicts {
            summary.push(c.label.clone(), c.verdict, c.detail.clone());
        }
    }
    for c in &ranks.report.verdicts {
        summary.push(c.label.clone(), c.verdict, c.detail.clone());
    }
    let max_rank = iv.verdict.and(ranks.report.verdict);
    summary.push(
        "maximal rank for all n",
        max_rank,
        format!("ordinary, and rank rho(n,{}) for n = 2..={}", set.k0, set.k0),
    );
    let verdict = summary.verdict;

    let mut text = format!("verify-family {}\n{}", set.name, report_text(&summary));
    text.push_str(&format!("  quasi-symmetric: {}\n", qs.summary()));
    if let Some(spec) = &loaded.spec {
        text.push_str(&format!(
            "  expected: ordinary={} max_rank={} quasi_symmetric={}\n",
            spec.expected.ordinary, spec.expected.max_rank, spec.expected.quasi_symmetric
        ));
    }
    text.push_str(&format!("verdict: {verdict}\n"));

    let dims_trace: BTreeMap<String, _> = ranks
        .runs
        .iter()
        .filter_map(|r| r.estimates.last().map(|e| (r.n.to_string(), e.dims.clone())))
        .collect();
    Ok(Outcome {
        verdict,
        json: json!({
            "config": config,
            "family": set.name,
            "expected": loaded.spec.as_ref().map(|s| &s.expected),
            "balanced_valid": valid,
            "quasi_symmetric": qs,
            "ordinary": { "condition_iv": iv, "direct": direct },
            "rank": {
                "per_n": ranks.runs,
                "dims_trace": dims_trace,
                "N_table_empirical": to_value(&ranks)["n_table_empirical"],
                "N_table_expected": to_value(&ranks)["n_table_expected"],
                "all_n": ranks.all_n,
            },
            "verdicts": summary.verdicts,
            "verdict": verdict,
        }),
        text,
    })
}
