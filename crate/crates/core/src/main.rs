//! `morbit`: orbits, periods, exponential sums, the von Mangoldt
//! decomposition, residue-class counts, scope checks, and batch
//! experiments from one binary.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use moebius_orbits::error::Error;
use moebius_orbits::expsum::{self, Family, HSet, SumResult, UnityTable};
use moebius_orbits::fpcore::Fp;
use moebius_orbits::harness::{self, fmt_g12, run_experiment, select_specs, ExperimentConfig};
use moebius_orbits::hb;
use moebius_orbits::residue::{self, CharacterTable};
use moebius_orbits::{MoebiusMap, OrbitSpec, ProjPoint};

const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_SCOPE: u8 = 4;

#[derive(Parser)]
#[command(name = "morbit", version, about = "Möbius orbits mod p and their exponential sums")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Instance {
    /// Odd prime modulus.
    #[arg(long)]
    p: u64,
    /// Map entries a,b,c,d.
    #[arg(long, value_parser = parse_matrix)]
    matrix: [u64; 4],
    /// Initial value in F_p ("inf" for the point at infinity).
    #[arg(long, value_parser = parse_u0)]
    u0: U0Arg,
}

#[derive(Clone, Copy)]
enum U0Arg {
    Affine(u64),
    Infinity,
}

fn parse_matrix(s: &str) -> Result<[u64; 4], String> {
    let parts: Vec<u64> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("{e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| "matrix needs exactly 4 entries a,b,c,d".to_string())
}

fn parse_u0(s: &str) -> Result<U0Arg, String> {
    if s == "inf" {
        return Ok(U0Arg::Infinity);
    }
    s.parse()
        .map(U0Arg::Affine)
        .map_err(|e| format!("u0: {e}"))
}

fn parse_pair(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| "expected COUNT,SEED".to_string())?;
    Ok((
        a.trim().parse().map_err(|e| format!("{e}"))?,
        b.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

impl Instance {
    fn build(&self) -> Result<OrbitSpec, Error> {
        let fp = Fp::new(self.p)?;
        let [a, b, c, d] = self.matrix;
        let map = MoebiusMap::new(fp, a, b, c, d)?;
        let u0 = match self.u0 {
            U0Arg::Affine(x) => ProjPoint::Affine(fp.reduce(x)),
            U0Arg::Infinity => ProjPoint::Infinity,
        };
        Ok(OrbitSpec::new(map, u0))
    }
}

#[derive(Args, Clone)]
struct HSelect {
    /// One explicit frequency.
    #[arg(long, conflicts_with_all = ["h_all", "h_sample"])]
    h: Option<u64>,
    /// Scan every h in 1..p.
    #[arg(long, conflicts_with = "h_sample")]
    h_all: bool,
    /// Scan a seeded sample: COUNT,SEED.
    #[arg(long, value_parser = parse_pair)]
    h_sample: Option<(u64, u64)>,
}

impl HSelect {
    fn resolve(&self, p: u64) -> Result<Vec<u64>, Error> {
        if let Some(h) = self.h {
            return Ok(vec![h]);
        }
        if self.h_all {
            return expsum::resolve_h_set(p, HSet::All);
        }
        if let Some((count, seed)) = self.h_sample {
            return expsum::resolve_h_set(p, HSet::Sample { count, seed });
        }
        Err(Error::Config(
            "choose one of --h, --h-all, --h-sample".into(),
        ))
    }

    fn single(&self, what: &str) -> Result<u64, Error> {
        self.h
            .ok_or_else(|| Error::Config(format!("{what} requires an explicit --h")))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print orbit values u_{start}, u_{start+stride}, ...
    Orbit {
        #[command(flatten)]
        instance: Instance,
        #[arg(long)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long, default_value_t = 1)]
        stride: u64,
    },
    /// Least t with psi^t(u0) = u0.
    Period {
        #[command(flatten)]
        instance: Instance,
        #[arg(long, default_value = "both", value_parser = ["direct", "spectral", "both"])]
        method: String,
    },
    /// Exponential sums along the orbit.
    Sum {
        #[command(subcommand)]
        family: SumCommand,
    },
    /// The combinatorial decomposition of the von Mangoldt function.
    Hb {
        #[command(subcommand)]
        cmd: HbCommand,
    },
    /// Products in residue classes and character sums.
    Rt {
        #[command(subcommand)]
        cmd: RtCommand,
    },
    /// Check the square-root-cancellation hypotheses for one instance.
    Scope {
        #[command(flatten)]
        instance: Instance,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
        #[arg(long)]
        n: Option<u64>,
    },
    /// Batch experiments from a JSON config.
    Experiment {
        #[command(subcommand)]
        cmd: ExperimentCommand,
    },
}

#[derive(Args, Clone)]
struct SumCommon {
    #[command(flatten)]
    instance: Instance,
    #[command(flatten)]
    h: HSelect,
    /// Range length N.
    #[arg(long)]
    n: u64,
}

#[derive(Subcommand)]
enum SumCommand {
    /// sum over n in [start, start+N) of e_p(h u_{k n}).
    Single {
        #[command(flatten)]
        common: SumCommon,
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long, default_value_t = 1)]
        start: u64,
    },
    /// Same, restricted to gcd(n, t) = 1.
    Coprime {
        #[command(flatten)]
        common: SumCommon,
        #[arg(long, default_value_t = 1)]
        k: u64,
    },
    /// sum over primes l <= N of e_p(h u_l).
    Prime {
        #[command(flatten)]
        common: SumCommon,
    },
    /// Lambda-weighted sum; --dyadic for N <= n < 2N with gcd(n,t) = 1.
    Lambda {
        #[command(flatten)]
        common: SumCommon,
        #[arg(long)]
        dyadic: bool,
    },
    /// Möbius-twisted sum over n <= N.
    Moebius {
        #[command(flatten)]
        common: SumCommon,
    },
    /// sum_k sum_m alpha_k beta_m e_p(h u_{km}); coefficients from files.
    Bilinear {
        #[command(flatten)]
        instance: Instance,
        #[command(flatten)]
        h: HSelect,
        /// File of lines "index re,im" for the outer coefficients.
        #[arg(long)]
        alpha: PathBuf,
        /// File of lines "index re,im" for the inner coefficients.
        #[arg(long)]
        beta: PathBuf,
    },
    /// Multi-linear term: e_p(a_1 u_{m_1 n} + ... ) over n in [start, start+N).
    Multi {
        #[command(flatten)]
        instance: Instance,
        /// Coefficients a_1,...,a_s.
        #[arg(long, value_delimiter = ',', required = true)]
        coefficients: Vec<u64>,
        /// Strictly increasing exponents m_1,...,m_s.
        #[arg(long, value_delimiter = ',', required = true)]
        exponents: Vec<u64>,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        start: u64,
    },
    /// sum over tuples n_i <= N_i of e_p(h u_{k n_1...n_v}).
    Multiple {
        #[command(flatten)]
        instance: Instance,
        #[command(flatten)]
        h: HSelect,
        #[arg(long, value_delimiter = ',', required = true)]
        ranges: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        k: u64,
        #[arg(long)]
        coprime: bool,
        #[arg(long, default_value_t = 100_000_000_000)]
        budget: u128,
    },
}

#[derive(Subcommand)]
enum HbCommand {
    /// Exhaustively check the identity for 1 <= n < 2X.
    Verify {
        #[arg(long)]
        big_j: u32,
        #[arg(long)]
        x: u64,
        #[arg(long, default_value_t = 100_000_000)]
        budget: u128,
    },
    /// List the dyadic boxes covering [N, 2N).
    Cover {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        big_j: u32,
    },
    /// Rebuild the dyadic Lambda sum from signed box sums.
    Reconstruct {
        #[command(flatten)]
        instance: Instance,
        #[arg(long)]
        h: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        big_j: u32,
        #[arg(long, default_value_t = 1_000_000_000)]
        budget: u128,
    },
}

#[derive(Subcommand)]
enum RtCommand {
    /// Exact tuple counts by integer convolution.
    Count {
        #[arg(long)]
        t: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        ranges: Vec<u64>,
        #[arg(long)]
        n: u64,
        /// Restrict to tuples with every gcd(n_i, t) = 1.
        #[arg(long)]
        coprime: bool,
    },
    /// The same count through the character expansion, plus the main term.
    Chars {
        #[arg(long)]
        t: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        ranges: Vec<u64>,
        #[arg(long)]
        n: u64,
    },
    /// |partial character sum| / N for one character.
    Burgess {
        #[arg(long)]
        t: u64,
        #[arg(long)]
        char_index: u64,
        #[arg(long)]
        n: u64,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        /// Exit 4 if any selected instance fails the scope hypotheses.
        #[arg(long)]
        require_scope: bool,
    },
}

fn print_sum(label: &str, h: u64, s: &SumResult) {
    println!(
        "{label},h={h},value={},{},abs={},terms={},poles_skipped={},ratio={}",
        fmt_g12(s.value.re),
        fmt_g12(s.value.im),
        fmt_g12(s.value.norm()),
        s.terms,
        s.poles_skipped,
        fmt_g12(if s.weight_mass > 0.0 {
            s.value.norm() / s.weight_mass
        } else {
            0.0
        }),
    );
}

fn read_coeff_file(path: &PathBuf) -> Result<Vec<Complex64>, Error> {
    let io_err = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let text = std::fs::read_to_string(path).map_err(io_err)?;
    let mut entries: Vec<(u64, Complex64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |detail: String| Error::Config(format!("{}:{}: {detail}", path.display(), lineno + 1));
        let (idx, value) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad("expected \"index re,im\"".into()))?;
        let idx: u64 = idx.parse().map_err(|e| bad(format!("index: {e}")))?;
        let (re, im) = value
            .trim()
            .split_once(',')
            .ok_or_else(|| bad("complex value must be re,im".into()))?;
        let re: f64 = re.trim().parse().map_err(|e| bad(format!("re: {e}")))?;
        let im: f64 = im.trim().parse().map_err(|e| bad(format!("im: {e}")))?;
        entries.push((idx, Complex64::new(re, im)));
    }
    if entries.is_empty() {
        return Err(Error::Config(format!(
            "{}: no coefficients",
            path.display()
        )));
    }
    entries.sort_by_key(|&(i, _)| i);
    let len = entries.last().unwrap().0 as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (i, v) in entries {
        if i == 0 {
            return Err(Error::Config(format!(
                "{}: indices are 1-based",
                path.display()
            )));
        }
        out[(i - 1) as usize] = v;
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Orbit {
            instance,
            count,
            start,
            stride,
        } => {
            let spec = instance.build()?;
            let fp = spec.field();
            let mut iter = spec.iter(start, stride);
            for i in 0..count {
                let (x, z) = iter.next_raw();
                let label = match ProjPoint::from_homogeneous(fp, x, z)? {
                    ProjPoint::Affine(u) => u.to_string(),
                    ProjPoint::Infinity => "inf".to_string(),
                };
                println!("{},{}", start + i * stride, label);
            }
        }
        Command::Period { instance, method } => {
            let spec = instance.build()?;
            match method.as_str() {
                "direct" => println!("direct,{}", spec.period_direct()),
                "spectral" => println!("spectral,{}", spec.period_spectral()?),
                _ => {
                    let d = spec.period_direct();
                    match spec.period_spectral() {
                        Ok(s) => println!("direct,{d}\nspectral,{s}\nagree,{}", d == s),
                        Err(Error::ParabolicMatrix) => {
                            println!("direct,{d}\nspectral,unavailable (parabolic)")
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        Command::Sum { family } => run_sum(family)?,
        Command::Hb { cmd } => run_hb(cmd)?,
        Command::Rt { cmd } => run_rt(cmd)?,
        Command::Scope {
            instance,
            epsilon,
            kappa,
            n,
        } => {
            let spec = instance.build()?;
            let report = harness::scope_check(&spec, epsilon, kappa, n);
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
        Command::Experiment { cmd } => run_exp(cmd)?,
    }
    Ok(())
}

fn run_sum(cmd: SumCommand) -> Result<(), Error> {
    match cmd {
        SumCommand::Single { common, k, start } => {
            scan(&common, Family::Single { k }, |table, spec, h| {
                expsum::sum_single(table, spec, h, k, start, common.n)
            })
        }
        SumCommand::Coprime { common, k } => {
            scan(&common, Family::Coprime { k }, |table, spec, h| {
                expsum::sum_coprime(table, spec, h, k, common.n)
            })
        }
        SumCommand::Prime { common } => scan(&common, Family::Prime, |table, spec, h| {
            expsum::sum_prime(table, spec, h, common.n)
        }),
        SumCommand::Lambda { common, dyadic } => {
            scan(&common, Family::Lambda { dyadic }, |table, spec, h| {
                expsum::sum_lambda(table, spec, h, common.n, dyadic)
            })
        }
        SumCommand::Moebius { common } => scan(&common, Family::Moebius, |table, spec, h| {
            expsum::sum_mobius_twisted(table, spec, h, common.n)
        }),
        SumCommand::Bilinear {
            instance,
            h,
            alpha,
            beta,
        } => {
            let spec = instance.build()?;
            let table = UnityTable::new(instance.p);
            let alpha = read_coeff_file(&alpha)?;
            let beta = read_coeff_file(&beta)?;
            let h = h.single("sum bilinear")?;
            let s = expsum::sum_bilinear(&table, &spec, h, &alpha, &beta)?;
            print_sum("bilinear", h, &s);
            Ok(())
        }
        SumCommand::Multi {
            instance,
            coefficients,
            exponents,
            n,
            start,
        } => {
            let spec = instance.build()?;
            let table = UnityTable::new(instance.p);
            let s = expsum::sum_multi_term(&table, &spec, &coefficients, &exponents, start, n)?;
            println!(
                "multi,value={},{},abs={},terms={},poles_skipped={}",
                fmt_g12(s.value.re),
                fmt_g12(s.value.im),
                fmt_g12(s.value.norm()),
                s.terms,
                s.poles_skipped
            );
            Ok(())
        }
        SumCommand::Multiple {
            instance,
            h,
            ranges,
            k,
            coprime,
            budget,
        } => {
            let spec = instance.build()?;
            let table = UnityTable::new(instance.p);
            for h in h.resolve(instance.p)? {
                let s = expsum::sum_multiple(&table, &spec, h, k, &ranges, coprime, budget)?;
                print_sum("multiple", h, &s);
            }
            Ok(())
        }
    }
}

fn scan<F>(common: &SumCommon, family: Family, eval: F) -> Result<(), Error>
where
    F: Fn(&UnityTable, &OrbitSpec, u64) -> Result<SumResult, Error>,
{
    let spec = common.instance.build()?;
    let table = UnityTable::new(common.instance.p);
    for h in common.h.resolve(common.instance.p)? {
        let s = eval(&table, &spec, h)?;
        print_sum(family.name(), h, &s);
    }
    Ok(())
}

fn run_hb(cmd: HbCommand) -> Result<(), Error> {
    match cmd {
        HbCommand::Verify { big_j, x, budget } => {
            let report = hb::hb_verify_range(big_j, x, budget)?;
            println!(
                "checked={},mismatches={},total_tuples={},max_tuple_fanout={},exact={}",
                report.checked,
                report.mismatches,
                report.total_tuples,
                report.max_tuple_fanout,
                report.all_match()
            );
            if !report.all_match() {
                return Err(Error::Config("identity check failed".into()));
            }
        }
        HbCommand::Cover { n, big_j } => {
            for b in hb::dyadic_cover(n, big_j) {
                println!("j={},m_blocks={:?},n_blocks={:?}", b.j, b.m_blocks, b.n_blocks);
            }
        }
        HbCommand::Reconstruct {
            instance,
            h,
            n,
            big_j,
            budget,
        } => {
            let spec = instance.build()?;
            let table = UnityTable::new(instance.p);
            let r = hb::hb_reconstruct(&table, &spec, h, n, big_j, budget)?;
            println!(
                "lhs={},{}\nrhs={},{}\nboxes={},tuples={},agree={}",
                fmt_g12(r.lhs.re),
                fmt_g12(r.lhs.im),
                fmt_g12(r.rhs.re),
                fmt_g12(r.rhs.im),
                r.boxes,
                r.tuples,
                r.agrees()
            );
        }
    }
    Ok(())
}

fn run_rt(cmd: RtCommand) -> Result<(), Error> {
    match cmd {
        RtCommand::Count {
            t,
            ranges,
            n,
            coprime,
        } => {
            let count = if coprime {
                residue::rt_count_coprime(t, &ranges, n)
            } else {
                residue::rt_count(t, &ranges, n)
            };
            println!("count={count}");
        }
        RtCommand::Chars { t, ranges, n } => {
            let table = CharacterTable::new(t)?;
            let via = residue::rt_via_characters(&table, &ranges, n)?;
            let exact = residue::rt_count_coprime(t, &ranges, n);
            let main = residue::rt_main_term(t, &ranges);
            println!(
                "characters={},{}\nexact={exact}\nmain_term={}/{}",
                fmt_g12(via.re),
                fmt_g12(via.im),
                main.numer(),
                main.denom()
            );
        }
        RtCommand::Burgess { t, char_index, n } => {
            let table = CharacterTable::new(t)?;
            if char_index >= table.num_characters() {
                return Err(Error::Config(format!(
                    "char_index {char_index} out of range (phi = {})",
                    table.num_characters()
                )));
            }
            println!("ratio={}", fmt_g12(residue::burgess_ratio(&table, char_index, n)));
        }
    }
    Ok(())
}

fn run_exp(cmd: ExperimentCommand) -> Result<(), Error> {
    let ExperimentCommand::Run {
        config,
        out,
        threads,
        require_scope,
    } = cmd;
    let text = std::fs::read_to_string(&config).map_err(|e| Error::Io {
        path: config.display().to_string(),
        source: e,
    })?;
    let cfg = ExperimentConfig::from_json(&text)?;
    if require_scope {
        for spec in select_specs(&cfg)? {
            let report = cfg_scope(&cfg, &spec);
            if !(report.distinct_roots && report.satisfies_t_bound) {
                eprintln!("scope violation: {}", report.notes);
                std::process::exit(EXIT_SCOPE as i32);
            }
        }
    }
    let body = || -> Result<(), Error> {
        let report = run_experiment(&cfg)?;
        harness::write_report(&report, &out)?;
        for s in &report.summary.per_n {
            println!(
                "n={},max_h={},max_ratio={},eta_hat={}",
                s.n,
                s.max_h,
                fmt_g12(s.max_ratio),
                fmt_g12(s.eta_hat)
            );
        }
        Ok(())
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))?
            .install(body),
        None => body(),
    }
}

fn cfg_scope(cfg: &ExperimentConfig, spec: &OrbitSpec) -> harness::ScopeReport {
    harness::scope_check(spec, cfg.epsilon, cfg.kappa, cfg.n_schedule.last().copied())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::BudgetExceeded { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
