use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rwnet::experiments::{self, Options, PRESETS};
use rwnet::io::{self, check_dataset, format_dataset, format_symbolic, parse_sample_line};
use rwnet::parallel::train_parallel;
use rwnet::{oracle, report, Error, Result};
use rwnet_core::builders::{assign_balanced_weights, build_expander, compile_circuit, ExpanderSpec};
use rwnet_core::synthdata::{markov_generate, NmfSpec, MARKOV_ALPHABET};
use rwnet_core::trainer::TrainConfig;
use rwnet_core::{BiasVector, TerminationMode};

#[derive(Parser)]
#[command(name = "rwnet", version, about = "Rectified wire networks trained by sequential deactivation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a sparse expander network with balanced weights.
    GenExpander(GenExpander),
    /// Train biases on a dataset, writing a CSV report and the final biases.
    Train(Train),
    /// Compare the SDA update with the exact QP update on one sample.
    OracleUpdate(OracleUpdate),
    /// Compile a Boolean circuit into a network.
    CompileCircuit(CompileCircuit),
    /// Generate nested-majority or Markov data.
    GenData(GenData),
    /// Run a named preset and grade it.
    Experiment(Experiment),
}

#[derive(Args)]
struct SeedArg {
    /// Random seed; drawn from the clock and echoed when absent.
    #[arg(long, env = "RWN_SEED")]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_nanos() as u64)
                .unwrap_or(0)
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ultra,
    Aggressive,
}

impl From<Mode> for TerminationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ultra => TerminationMode::UltraConservative,
            Mode::Aggressive => TerminationMode::Aggressive,
        }
    }
}

#[derive(Args)]
struct GenExpander {
    #[arg(long)]
    inputs: usize,
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    growth: usize,
    #[arg(long)]
    layers: usize,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Ultra)]
    mode: Mode,
    /// Test evaluation interval in items (0: only at the end).
    #[arg(long, default_value_t = 0)]
    batch: usize,
    #[arg(long)]
    report: PathBuf,
    /// Final bias file; defaults to the report path with extension `biases`.
    #[arg(long)]
    biases_out: Option<PathBuf>,
    /// Starting biases; zero when absent.
    #[arg(long)]
    biases: Option<PathBuf>,
    #[arg(long)]
    max_items: Option<usize>,
    #[arg(long)]
    stop_zero_err: Option<f64>,
    #[arg(long)]
    stop_acc: Option<f64>,
    /// Keep cycling after a pass without updates.
    #[arg(long)]
    no_quiet_stop: bool,
    /// Reshuffle the training set every pass with this seed.
    #[arg(long)]
    shuffle_seed: Option<u64>,
    #[arg(long)]
    test_threads: Option<usize>,
}

#[derive(Args)]
struct OracleUpdate {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    biases: Option<PathBuf>,
    /// `<class> v1 ... vD`
    #[arg(long, allow_hyphen_values = true)]
    sample_line: String,
}

#[derive(Args)]
struct CompileCircuit {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bias file for the compiled network.
    #[arg(long)]
    biases_out: Option<PathBuf>,
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct GenData {
    /// `p,b,c,n` (index a = 1).
    #[arg(long, value_delimiter = ',', conflicts_with = "markov", required_unless_present = "markov")]
    nmf: Option<Vec<usize>>,
    /// String length.
    #[arg(long)]
    markov: Option<usize>,
    #[arg(long)]
    count: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Experiment {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: String,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// CSV output; defaults to `<preset>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_items: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    skip_training: bool,
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    #[arg(long)]
    test_threads: Option<usize>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_expander(a: GenExpander) -> Result<bool> {
    let seed = a.seed.resolve();
    eprintln!(
        "config: gen-expander inputs={} classes={} growth={} layers={} q={} seed={seed}",
        a.inputs, a.classes, a.growth, a.layers, a.q
    );
    let spec = ExpanderSpec {
        inputs: a.inputs,
        classes: a.classes,
        growth: a.growth,
        hidden_layers: a.layers,
        seed,
    };
    let net = assign_balanced_weights(&build_expander(&spec)?, a.q)?;
    if let Some(p) = &a.out {
        io::save_network(p, &net)?;
    }
    println!("{}", net.num_edges());
    Ok(true)
}

fn train(a: Train) -> Result<bool> {
    let biases_out = a.biases_out.clone().unwrap_or_else(|| a.report.with_extension("biases"));
    let net = io::load_network(&a.net)?;
    let train = io::load_dataset(&a.data)?;
    let test = io::load_dataset(&a.test)?;
    check_dataset(&net, &train, "training")?;
    check_dataset(&net, &test, "test")?;
    let mut b = match &a.biases {
        Some(p) => io::load_biases(p, &net)?,
        None => BiasVector::zeros(net.num_edges()),
    };
    let config = TrainConfig {
        mode: a.mode.into(),
        batch: a.batch,
        max_items: a.max_items,
        stop_when_quiet: !a.no_quiet_stop,
        stop_zero_err: a.stop_zero_err,
        stop_acc: a.stop_acc,
        shuffle_seed: a.shuffle_seed,
    };
    eprintln!(
        "config: train net={} data={} test={} biases={:?} {config:?} report={} biases_out={} test_threads={:?}",
        a.net.display(),
        a.data.display(),
        a.test.display(),
        a.biases,
        a.report.display(),
        biases_out.display(),
        a.test_threads
    );
    let rep = train_parallel(&net, &mut b, &train, &test, &config, a.test_threads)?;
    report::save_report(&a.report, &rep)?;
    io::save_biases(&biases_out, &b)?;
    let last = rep.rows.last().expect("a final report row");
    println!(
        "items={} err={} iter={} passes={} stop={:?} acc={} zero_err={}",
        rep.items, rep.err_total, rep.iter_total, rep.passes, rep.stop, last.acc, last.zero_err
    );
    Ok(true)
}

fn oracle_update(a: OracleUpdate) -> Result<bool> {
    eprintln!(
        "config: oracle-update net={} biases={:?} sample={:?}",
        a.net.display(),
        a.biases,
        a.sample_line
    );
    let net = io::load_network(&a.net)?;
    let b = match &a.biases {
        Some(p) => io::load_biases(p, &net)?,
        None => BiasVector::zeros(net.num_edges()),
    };
    let sample = parse_sample_line(&a.sample_line, 1)?;
    check_dataset(&net, std::slice::from_ref(&sample), "oracle")?;
    let r = oracle::compare(&net, &b, &sample)?;
    println!("active edges {}", r.active_edges);
    println!("SDA cost {:.12}", r.sda_cost);
    println!("QP cost {:.12}", r.qp_cost);
    println!("gap {:.3e}", r.gap());
    println!("kkt residual {:.3e}", r.kkt_residual);
    Ok(r.gap() >= -1e-8)
}

fn compile(a: CompileCircuit) -> Result<bool> {
    eprintln!(
        "config: compile-circuit circuit={} out={:?} verify={}",
        a.circuit.display(),
        a.out,
        a.verify
    );
    let circuit = io::load_circuit(&a.circuit)?;
    let compiled = compile_circuit(&circuit)?;
    let m = circuit.num_binary_gates();
    let gates = compiled.hidden_nodes - compiled.fork_nodes.len();
    println!(
        "inputs {} binary gates {m}; rectifier gates {gates} (bound {}), hidden nodes {} (bound {})",
        circuit.num_inputs(),
        5 * m,
        compiled.hidden_nodes,
        7 * m
    );
    if let Some(p) = &a.out {
        io::save_network(p, &compiled.network)?;
    }
    if let Some(p) = &a.biases_out {
        io::save_biases(p, &compiled.biases)?;
    }
    if a.verify {
        if circuit.num_inputs() > 12 {
            return Err(Error::Usage(format!(
                "--verify supports at most 12 inputs, circuit has {}",
                circuit.num_inputs()
            )));
        }
        let n = compiled.verify(&circuit)?;
        println!("verified {n}/{n} assignments");
    }
    Ok(compiled.hidden_nodes <= 7 * m && gates <= 5 * m)
}

fn gen_data(a: GenData) -> Result<bool> {
    let seed = a.seed.resolve();
    let text = if let Some(v) = &a.nmf {
        if v.len() != 4 {
            return Err(Error::Usage(format!("--nmf takes p,b,c,n; got {} values", v.len())));
        }
        eprintln!("config: gen-data nmf={v:?} count={} seed={seed}", a.count);
        let spec = NmfSpec {
            p: v[0],
            a: 1,
            b: v[1],
            c: v[2],
            n: v[3],
        };
        format_dataset(&spec.dataset(a.count, seed)?)
    } else {
        let len = a.markov.expect("clap enforces one generator");
        eprintln!("config: gen-data markov={len} count={} seed={seed}", a.count);
        let rows: Vec<(usize, Vec<u8>)> = markov_generate(len, a.count, seed)
            .into_iter()
            .map(|(c, s)| (c, s.iter().map(|&k| MARKOV_ALPHABET[k as usize]).collect()))
            .collect();
        format_symbolic(MARKOV_ALPHABET, &rows)
    };
    emit(a.out.as_deref(), &text)?;
    Ok(true)
}

fn experiment(a: Experiment) -> Result<bool> {
    let opts = Options {
        seed: a.seed.resolve(),
        q: a.q,
        test_threads: a.test_threads,
        max_items: a.max_items,
        batch: a.batch,
        skip_training: a.skip_training,
        mnist_dir: a.mnist_dir.clone(),
    };
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", a.preset)));
    eprintln!("config: experiment {} {opts:?} out={}", a.preset, out.display());
    let o = experiments::run_experiment(&a.preset, &opts)?;
    if !o.rows.is_empty() {
        report::save_table(&out, &o.header, &o.rows)?;
    }
    for line in &o.summary {
        println!("{line}");
    }
    for c in &o.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.label, c.detail);
    }
    if let Some(b) = &o.biases {
        io::save_biases(&out.with_extension("biases"), b)?;
    }
    Ok(o.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenExpander(a) => gen_expander(a),
        Command::Train(a) => train(a),
        Command::OracleUpdate(a) => oracle_update(a),
        Command::CompileCircuit(a) => compile(a),
        Command::GenData(a) => gen_data(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
