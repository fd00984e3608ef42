//! Command-line front end. Every subcommand builds its records first and
//! writes them once, so output depends only on the arguments.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;

use crate::asymptotics::{self, MainSumOptions, EXACT_LIMIT};
use crate::error::{Error, Result};
use crate::kernel::{self, TaylorBrackets};
use crate::modular::{self, ModularMatrix};
use crate::qseries;
use crate::report::{render, Format, Record};
use crate::verify::{self, Check};

/// Environment variable overriding `--threads`.
pub const THREADS_ENV: &str = "FALSETHETA_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "falsetheta", version, about = "Exact and asymptotic coefficients of false-indefinite theta quotients")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Output format: JSON lines or CSV.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,

    /// Write to this file instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads; FALSETHETA_THREADS takes precedence. 0 means all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact coefficients α_j(n) or p_od^eu(n) with the parity decomposition check.
    Coeffs(CoeffsArgs),
    /// Circle-method main term, optionally against the exact coefficient.
    Asymptotic(AsymptoticArgs),
    /// Aggregated kernel Taylor coefficients at the cusp, as CSV by default.
    KernelTable(KernelTableArgs),
    /// The multiplier matrix Ψ_M of (a b; c d) as JSON.
    Multiplier(MultiplierArgs),
    /// Exact p(n) against the Rademacher series.
    ExactPn(ExactPnArgs),
    /// Run the self-checks; exit 0 iff all pass.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    /// Component index 0, 1 or 2.
    #[arg(long, conflicts_with = "podeu")]
    pub j: Option<usize>,
    /// Tabulate p_od^eu instead of α_j.
    #[arg(long)]
    pub podeu: bool,
    /// Number of rows, starting at n = 0.
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct AsymptoticArgs {
    /// Component index 0, 1 or 2.
    #[arg(long)]
    pub j: usize,
    /// A single n.
    #[arg(long, conflicts_with = "scan", required_unless_present_any = ["scan", "expansion"])]
    pub n: Option<u64>,
    /// start:end:count, geometrically spaced and rounded to integers.
    #[arg(long)]
    pub scan: Option<String>,
    /// Also compute the exact coefficient (n ≤ 5000) and the residual.
    #[arg(long)]
    pub exact: bool,
    /// Compare the leading expansion with exact values at these n, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["n", "scan"])]
    pub expansion: Option<Vec<u64>>,
    /// Largest denominator k; defaults to ⌊√n⌋.
    #[arg(long)]
    pub k_max: Option<i64>,
    /// Minimum Gauss–Legendre nodes per denominator.
    #[arg(long, default_value_t = 64)]
    pub nodes: usize,
    /// Absolute tolerance on the quadrature error estimate.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct KernelTableArgs {
    /// Number of derivative orders r, starting at 0.
    #[arg(long, default_value_t = 5)]
    pub order: usize,
}

#[derive(Debug, Args)]
pub struct MultiplierArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub a: i64,
    #[arg(long, allow_negative_numbers = true)]
    pub b: i64,
    #[arg(long, allow_negative_numbers = true)]
    pub c: i64,
    #[arg(long, allow_negative_numbers = true)]
    pub d: i64,
}

#[derive(Debug, Args)]
pub struct ExactPnArgs {
    /// Largest n; rows run from 1 to n.
    #[arg(long)]
    pub n: u64,
    /// Terms of the Rademacher series; defaults to ⌈√n⌉ + 5 per row.
    #[arg(long)]
    pub k_max: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only these checks (repeatable); all of them by default.
    #[arg(long, value_enum)]
    pub only: Vec<Check>,
}

impl RunConfig {
    /// Range and consistency checks that clap cannot express.
    pub fn validate(&self) -> Result<()> {
        let check_j = |j: usize| {
            if j > 2 {
                Err(Error::Invalid(format!("j must be 0, 1 or 2, got {j}")))
            } else {
                Ok(())
            }
        };
        match &self.command {
            Command::Coeffs(a) => {
                if a.j.is_none() && !a.podeu {
                    return Err(Error::Invalid("coeffs needs --j or --podeu".into()));
                }
                if let Some(j) = a.j {
                    check_j(j)?;
                }
                if a.n == 0 {
                    return Err(Error::Invalid("--n must be at least 1".into()));
                }
            }
            Command::Asymptotic(a) => {
                check_j(a.j)?;
                if !(a.tol > 0.0) {
                    return Err(Error::Invalid("--tol must be positive".into()));
                }
                if a.nodes < 2 {
                    return Err(Error::Invalid("--nodes must be at least 2".into()));
                }
                if matches!(a.k_max, Some(k) if k < 1) {
                    return Err(Error::Invalid("--k-max must be at least 1".into()));
                }
                let ns = a.ns()?;
                if ns.contains(&0) {
                    return Err(Error::Invalid("n must be at least 1".into()));
                }
                if (a.exact || a.expansion.is_some()) && ns.iter().any(|&n| n > EXACT_LIMIT) {
                    return Err(Error::Invalid(format!("exact coefficients are limited to n ≤ {EXACT_LIMIT}")));
                }
                if let Some(e) = &a.expansion {
                    if e.len() < 2 {
                        return Err(Error::Invalid("--expansion needs at least two n".into()));
                    }
                }
            }
            Command::KernelTable(a) => {
                if a.order == 0 || a.order > 40 {
                    return Err(Error::Invalid("--order must be in 1..=40".into()));
                }
            }
            Command::Multiplier(m) => {
                ModularMatrix::new(m.a, m.b, m.c, m.d)?;
            }
            Command::ExactPn(a) => {
                if a.n == 0 {
                    return Err(Error::Invalid("--n must be at least 1".into()));
                }
                if matches!(a.k_max, Some(0)) {
                    return Err(Error::Invalid("--k-max must be at least 1".into()));
                }
            }
            Command::Verify(_) => {}
        }
        Ok(())
    }

    /// Thread count from FALSETHETA_THREADS when set, else `--threads`.
    pub fn thread_count(&self) -> Result<usize> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
            Err(_) => Ok(self.threads),
        }
    }

    fn format_or(&self, default: Format) -> Format {
        match self.format {
            Some(OutputFormat::Json) => Format::Json,
            Some(OutputFormat::Csv) => Format::Csv,
            None => default,
        }
    }
}

impl AsymptoticArgs {
    fn ns(&self) -> Result<Vec<u64>> {
        if let Some(s) = &self.scan {
            return parse_scan(s);
        }
        if let Some(e) = &self.expansion {
            return Ok(e.clone());
        }
        Ok(self.n.into_iter().collect())
    }

    fn options(&self) -> MainSumOptions {
        MainSumOptions { quad_nodes: self.nodes, tol: self.tol, k_max: self.k_max }
    }
}

/// Parses start:end:count into geometrically spaced integers.
pub fn parse_scan(s: &str) -> Result<Vec<u64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Invalid(format!("--scan expects start:end:count, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: u64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: u64 = parts[1].trim().parse().map_err(|_| bad())?;
    let c: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a || c == 0 || (c == 1 && a != b) {
        return Err(bad());
    }
    if c == 1 {
        return Ok(vec![a]);
    }
    let ratio = (b as f64 / a as f64).ln();
    let mut out: Vec<u64> = (0..c)
        .map(|i| (a as f64 * (ratio * i as f64 / (c - 1) as f64).exp()).round() as u64)
        .collect();
    out[c - 1] = b;
    out.dedup();
    Ok(out)
}

/// What a subcommand produced: text to write and the process exit code.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub text: String,
    pub code: i32,
}

fn ok(text: String) -> Output {
    Output { text, code: 0 }
}

/// Validates, builds the worker pool and dispatches.
pub fn execute(config: &RunConfig) -> Result<Output> {
    config.validate()?;
    let threads = config.thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| dispatch(config))
}

fn dispatch(config: &RunConfig) -> Result<Output> {
    match &config.command {
        Command::Coeffs(a) => cmd_coeffs(a, config.format_or(Format::Json)),
        Command::Asymptotic(a) => cmd_asymptotic(a, config.format_or(Format::Json)),
        Command::KernelTable(a) => cmd_kernel_table(a, config.format_or(Format::Csv)),
        Command::Multiplier(a) => cmd_multiplier(a, config.format_or(Format::Json)),
        Command::ExactPn(a) => cmd_exact_pn(a, config.format_or(Format::Json)),
        Command::Verify(a) => Ok(cmd_verify(a)),
    }
}

pub fn cmd_coeffs(a: &CoeffsArgs, format: Format) -> Result<Output> {
    let n_max = a.n - 1;
    let mut records = Vec::with_capacity(a.n);
    if a.podeu {
        let v = qseries::podeu(n_max)?;
        for (n, c) in v.iter().enumerate() {
            records.push(Record::new().with("n", n).with("podeu", c.to_string()));
        }
        return Ok(ok(render(&records, format)));
    }
    let j = a.j.expect("validated");
    let alpha = qseries::alpha(j, n_max)?;
    // 2p_od^eu(2n) = 2p(n) + r_o(2n) + α₀(n) and 2p_od^eu(2n+1) = r_o(2n+1) + α₁(n)
    let sides = if j < 2 {
        let pe = qseries::podeu(2 * n_max + 1)?;
        let ro = qseries::r_odd_distinct(2 * n_max + 1);
        let p = qseries::partitions(n_max);
        let rows: Vec<(BigInt, BigInt)> = (0..=n_max)
            .map(|n| {
                if j == 0 {
                    (&pe[2 * n] * 2, &p[n] * 2 + &ro[2 * n] + &alpha[n])
                } else {
                    (&pe[2 * n + 1] * 2, &ro[2 * n + 1] + &alpha[n])
                }
            })
            .collect();
        Some(rows)
    } else {
        None
    };
    let mut failed = false;
    for (n, c) in alpha.iter().enumerate() {
        let mut r = Record::new().with("j", j).with("n", n).with("alpha", c.to_string());
        match &sides {
            Some(rows) => {
                let (lhs, rhs) = &rows[n];
                failed |= lhs != rhs;
                r = r.with("decomposition_lhs", lhs.to_string()).with("decomposition_rhs", rhs.to_string()).with("decomposition_ok", lhs == rhs);
            }
            None => {
                r = r.with("decomposition_lhs", None::<String>).with("decomposition_rhs", None::<String>).with("decomposition_ok", None::<bool>);
            }
        }
        records.push(r);
    }
    Ok(Output { text: render(&records, format), code: if failed { 3 } else { 0 } })
}

fn asymptotic_record(r: &asymptotics::AsymptoticReport) -> Record {
    Record::new()
        .with("j", r.j)
        .with("n", r.n)
        .with("exact", r.exact.as_ref().map(|e| e.to_string()))
        .with("main_sum", r.main_sum)
        .with("residual", r.residual)
        .with("n34_ratio", r.residual_over_n34)
}

pub fn cmd_asymptotic(a: &AsymptoticArgs, format: Format) -> Result<Output> {
    if let Some(ns) = &a.expansion {
        let t = asymptotics::expansion_check(a.j, ns)?;
        let mut records = Vec::new();
        for row in &t.rows {
            let mut r = Record::new().with("j", a.j).with("n", row.n).with("exact", row.exact);
            for (i, (p, e)) in row.partial.iter().zip(&row.relative_residuals).enumerate() {
                r = r.with(&format!("terms_{}", i + 1), *p).with(&format!("rel_residual_{}", i + 1), *e);
            }
            records.push(r);
        }
        let mut text = render(&records, format);
        let slopes = Record::new()
            .with("j", a.j)
            .with("slope_1", t.slopes[0])
            .with("slope_2", t.slopes[1])
            .with("slope_3", t.slopes[2]);
        if format == Format::Csv {
            text.push('\n');
        }
        text.push_str(&render(&[slopes], format));
        return Ok(ok(text));
    }
    let ns = a.ns()?;
    let reports = asymptotics::scan(a.j, &ns, a.options(), a.exact)?;
    let records: Vec<Record> = reports.iter().map(asymptotic_record).collect();
    Ok(ok(render(&records, format)))
}

pub fn cmd_kernel_table(a: &KernelTableArgs, format: Format) -> Result<Output> {
    let mut records = Vec::new();
    for j in 0..3 {
        let b = TaylorBrackets::cached(j, 1, a.order)?;
        for r in 0..a.order {
            let value = b.aggregated::<f64>(0, r).re;
            let exact = b.rational_k1(r);
            let rel = if r < verify::CUSP_TAYLOR_REFERENCE.len() {
                let (_, want) = verify::cusp_reference(j, r);
                Some(if want == 0.0 { value.abs() } else { ((value - want) / want).abs() })
            } else {
                None
            };
            records.push(
                Record::new()
                    .with("j", j)
                    .with("r", r)
                    .with("value", value)
                    .with("closed_form_string", kernel::pi_power_string(&exact, 2 * r + 2))
                    .with("rel_error_vs_table", rel),
            );
        }
    }
    Ok(ok(render(&records, format)))
}

pub fn cmd_multiplier(a: &MultiplierArgs, format: Format) -> Result<Output> {
    let m = ModularMatrix::new(a.a, a.b, a.c, a.d)?;
    let psi = modular::psi_vector(&m)?;
    let text = match format {
        Format::Json => {
            let mut rows = Vec::new();
            for row in &psi.entries {
                let cells: Vec<String> = row
                    .iter()
                    .map(|z| format!("[{},{}]", crate::report::format_float(z.re), crate::report::format_float(z.im)))
                    .collect();
                rows.push(format!("[{}]", cells.join(",")));
            }
            format!(
                "{{\"matrix\":[{},{},{},{}],\"psi\":[{}],\"unitarity_defect\":{}}}\n",
                a.a,
                a.b,
                a.c,
                a.d,
                rows.join(","),
                crate::report::format_float(psi.unitarity_defect())
            )
        }
        Format::Csv => {
            let mut records = Vec::new();
            for (i, row) in psi.entries.iter().enumerate() {
                for (l, z) in row.iter().enumerate() {
                    records.push(Record::new().with("j", i).with("l", l).with("re", z.re).with("im", z.im));
                }
            }
            render(&records, format)
        }
    };
    Ok(ok(text))
}

pub fn cmd_exact_pn(a: &ExactPnArgs, format: Format) -> Result<Output> {
    let p = qseries::partitions(a.n as usize);
    let mut records = Vec::new();
    let mut failed = false;
    for n in 1..=a.n {
        let k_max = a.k_max.unwrap_or((n as f64).sqrt().ceil() as u64 + 5);
        let exact = &p[n as usize];
        let mut r = Record::new().with("n", n).with("exact", exact.to_string()).with("k_max", k_max);
        match asymptotics::rademacher_p(n, k_max) {
            Ok(v) if v.is_finite() => {
                let d = (v - qseries::big_to_f64(exact)).abs();
                failed |= d >= 0.5;
                r = r.with("rademacher", v).with("distance", d);
            }
            _ => {
                r = r.with("rademacher", None::<f64>).with("distance", None::<f64>);
            }
        }
        records.push(r);
    }
    Ok(Output { text: render(&records, format), code: if failed { 3 } else { 0 } })
}

pub fn cmd_verify(a: &VerifyArgs) -> Output {
    let checks: Vec<Check> = if a.only.is_empty() { Check::ALL.to_vec() } else { a.only.clone() };
    let mut text = String::new();
    let mut passed = 0;
    for c in &checks {
        let o = c.run();
        if o.passed {
            passed += 1;
        }
        text.push_str(&o.to_string());
    }
    text.push_str(&format!("{passed}/{} checks passed\n", checks.len()));
    Output { text, code: if passed == checks.len() { 0 } else { 3 } }
}

/// Parses the process arguments, runs, writes and returns the exit code.
pub fn run() -> i32 {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&config) {
        Ok(out) => match write_output(&config, &out.text) {
            Ok(()) => out.code,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_output(config: &RunConfig, text: &str) -> std::io::Result<()> {
    match &config.output {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        let mut v = vec!["falsetheta"];
        v.extend_from_slice(args);
        RunConfig::try_parse_from(v).unwrap()
    }

    #[test]
    fn scan_is_geometric() {
        assert_eq!(parse_scan("500:4000:4").unwrap(), vec![500, 1000, 2000, 4000]);
        assert_eq!(parse_scan("10:10:1").unwrap(), vec![10]);
        assert!(parse_scan("10:5:3").is_err());
        assert!(parse_scan("a:b").is_err());
    }

    #[test]
    fn validation_rejects_bad_input() {
        assert!(parse(&["coeffs", "--j", "3", "--n", "4"]).validate().is_err());
        assert!(parse(&["coeffs", "--n", "4"]).validate().is_err());
        assert!(parse(&["asymptotic", "--j", "1", "--n", "6000", "--exact"]).validate().is_err());
        assert!(parse(&["multiplier", "--a", "1", "--b", "1", "--c", "1", "--d", "1"]).validate().is_err());
        assert!(RunConfig::try_parse_from(["falsetheta", "coeffs", "--j", "0", "--podeu", "--n", "3"]).is_err());
    }

    #[test]
    fn coeffs_rows() {
        let c = parse(&["coeffs", "--j", "0", "--n", "12"]);
        let out = execute(&c).unwrap();
        assert_eq!(out.code, 0);
        let alphas: Vec<String> = out
            .text
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["alpha"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(alphas.join(","), "-1,0,1,1,4,4,9,11,19,23,37,44");
        assert!(out.text.contains("\"decomposition_ok\":true"));

        let out = execute(&parse(&["coeffs", "--j", "1", "--n", "1"])).unwrap();
        assert_eq!(out.text.lines().count(), 1);
        assert!(out.text.contains("\"alpha\":\"1\""));
    }

    #[test]
    fn podeu_rows_csv() {
        let out = execute(&parse(&["coeffs", "--podeu", "--n", "10", "--format", "csv"])).unwrap();
        let vals: Vec<&str> = out.text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(vals.join(","), "1,1,1,2,3,3,4,5,8,8");
    }

    #[test]
    fn asymptotic_csv_header() {
        let out = execute(&parse(&["asymptotic", "--j", "1", "--n", "100", "--exact", "--format", "csv"])).unwrap();
        let mut lines = out.text.lines();
        assert_eq!(lines.next().unwrap(), "j,n,exact,main_sum,residual,n34_ratio");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[2], qseries::alpha(1, 100).unwrap()[100].to_string());
        assert!(!row[4].is_empty());
    }

    #[test]
    fn kernel_table_matches_reference() {
        let out = execute(&parse(&["kernel-table"])).unwrap();
        let mut lines = out.text.lines();
        assert_eq!(lines.next().unwrap(), "j,r,value,closed_form_string,rel_error_vs_table");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 15);
        assert!(rows.iter().any(|r| r.contains("23*pi^4/3")));
        for r in rows {
            let rel: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
            assert!(rel < 1e-10, "{r}");
        }
    }

    #[test]
    fn multiplier_json() {
        let out = execute(&parse(&["multiplier", "--a", "0", "--b", "-1", "--c", "1", "--d", "0"])).unwrap();
        let v: serde_json::Value = serde_json::from_str(out.text.trim()).unwrap();
        let half = v["psi"][0][0][0].as_f64().unwrap();
        assert!((half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_pn_rows() {
        let out = execute(&parse(&["exact-pn", "--n", "5"])).unwrap();
        assert_eq!(out.code, 0);
        let last: serde_json::Value = serde_json::from_str(out.text.lines().last().unwrap()).unwrap();
        assert_eq!(last["exact"], "7");
    }

    #[test]
    fn verify_sigma_only() {
        let out = execute(&parse(&["verify", "--only", "sigma", "--only", "multipliers"])).unwrap();
        assert_eq!(out.code, 0, "{}", out.text);
        assert!(out.text.ends_with("2/2 checks passed\n"));
    }
}
