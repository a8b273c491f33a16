use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hope_cli::kat;
use hope_cli::{CliError, CliResult, Exit};
use hope_core::hope::{self, ComparisonKey};
use hope_core::keyfile::{self, int_from_hex, ComparisonKeyFile, PrivateKeyFile, PublicKeyFile};
use hope_core::netproto::{serve, wire::encode_bytes, Client, Server, ServerConfig, ServerState, TcpTransport};
use hope_core::numtheory::{mod_pow, random_below, RandomSource, SecureRandom, SeededRandom};
use hope_core::ostore::{EncryptedIndex, Inclusive};
use hope_core::{keygen, Ciphertext, Integer, PrivateKey, PublicKey};

const MIN_SAFE_BITS: u32 = 1024;

#[derive(Parser)]
#[command(name = "hope", version, about = "Order-preserving encryption on Paillier ciphertexts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate public, private and comparison key files
    Keygen(KeygenArgs),
    /// Encrypt a signed decimal plaintext
    Enc {
        #[arg(long)]
        pk: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        m: String,
    },
    /// Decrypt a ciphertext to a signed decimal
    Dec {
        #[arg(long)]
        sk: PathBuf,
        /// Hex ciphertext, or @FILE
        #[arg(long)]
        c: String,
    },
    /// Homomorphic addition of two ciphertexts
    Add(BinaryArgs),
    /// Homomorphic subtraction a - b
    Sub(BinaryArgs),
    /// Compare two ciphertexts with the comparison key: prints LT, EQ or GT
    Cmp {
        #[command(flatten)]
        operands: BinaryArgs,
        #[arg(long)]
        ck: PathBuf,
        /// Also print the blinded difference
        #[arg(long)]
        show_blinded: bool,
    },
    /// Write deterministic known-answer vectors for the toy key p=5, q=7
    Kat {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replay an existing file instead of writing one
        #[arg(long)]
        check: bool,
    },
    /// Time the core operations
    Bench(BenchArgs),
    /// Run an index server
    Serve(ServeArgs),
    /// Talk to a running server
    Client(ClientArgs),
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long, default_value_t = 2048)]
    bits: u32,
    /// Comparison bound M: plaintexts with |m| <= M compare correctly
    #[arg(long, default_value = "9223372036854775808")]
    bound_m: String,
    #[arg(long)]
    out_dir: PathBuf,
    /// Allow small keys, fixed primes and seeded generation
    #[arg(long)]
    insecure_test: bool,
    #[arg(long, requires = "test_q")]
    test_p: Option<String>,
    #[arg(long, requires = "test_p")]
    test_q: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BinaryArgs {
    #[arg(long)]
    pk: PathBuf,
    /// Hex ciphertext, or @FILE
    #[arg(long)]
    a: String,
    /// Hex ciphertext, or @FILE
    #[arg(long)]
    b: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchOp {
    Enc,
    Dec,
    Add,
    Sub,
    Cmp,
    Insert,
    Range,
    Modpow,
    All,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 2048)]
    bits: u32,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    ops: Vec<BenchOp>,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    /// Start from a snapshot file
    #[arg(long, conflicts_with_all = ["pk", "ck"])]
    restore: Option<PathBuf>,
    /// Preload keys instead of waiting for SETUP
    #[arg(long, requires = "ck")]
    pk: Option<PathBuf>,
    #[arg(long, requires = "pk")]
    ck: Option<PathBuf>,
}

#[derive(Args)]
struct ClientArgs {
    #[arg(long)]
    server: String,
    #[arg(long)]
    sk: PathBuf,
    #[arg(long)]
    ck: PathBuf,
    #[command(subcommand)]
    action: ClientAction,
}

#[derive(Subcommand)]
enum ClientAction {
    /// Install the public and comparison keys on a fresh server
    Setup,
    /// Insert a plaintext key with an optional UTF-8 payload; prints the entry id
    Insert {
        #[arg(long, allow_hyphen_values = true)]
        m: String,
        #[arg(long, default_value = "")]
        payload: String,
    },
    /// Print entries with lo <= key <= hi as `id<TAB>value<TAB>payload`
    Range {
        #[arg(long, allow_hyphen_values = true)]
        lo: String,
        #[arg(long, allow_hyphen_values = true)]
        hi: String,
        #[arg(long)]
        exclusive_lo: bool,
        #[arg(long)]
        exclusive_hi: bool,
    },
    /// Print `value<TAB>count` for each distinct key
    GroupBy,
    /// Replace the server's comparison key and write the new one
    RotateCk {
        /// Where to write the new key file; defaults to overwriting --ck
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Stats,
    /// Ask the server to write a snapshot to PATH on its own filesystem
    Snapshot {
        #[arg(long)]
        path: String,
    },
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::key(format!("{}: {e}", path.display())))
}

fn load_pk(path: &Path) -> CliResult<PublicKey> {
    Ok(keyfile::from_json::<PublicKeyFile>(&read_text(path)?)?.to_key()?)
}

fn load_sk(path: &Path) -> CliResult<PrivateKey> {
    Ok(keyfile::from_json::<PrivateKeyFile>(&read_text(path)?)?.to_key()?)
}

fn load_ck(path: &Path, pk: &PublicKey) -> CliResult<ComparisonKey> {
    Ok(keyfile::from_json::<ComparisonKeyFile>(&read_text(path)?)?.to_key(pk)?)
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn parse_int(s: &str, what: &str) -> CliResult<Integer> {
    Integer::from_str(s.trim()).map_err(|_| CliError::usage(format!("{what}: {s:?} is not a decimal integer")))
}

fn parse_ciphertext(pk: &PublicKey, arg: &str) -> CliResult<Ciphertext> {
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::usage(format!("{path}: {e}")))?,
        None => arg.to_string(),
    };
    let value = int_from_hex(text.trim())
        .ok_or_else(|| CliError::new(Exit::Crypto, format!("malformed ciphertext {:?}", text.trim())))?;
    Ok(pk.ciphertext_from_value(value)?)
}

fn rng_for(seed: Option<u64>) -> Box<dyn RandomSource + Send> {
    match seed {
        Some(s) => Box::new(SeededRandom::new(s)),
        None => Box::new(SecureRandom::new()),
    }
}

fn cmd_keygen(a: KeygenArgs) -> CliResult<()> {
    let test_primes = a.test_p.is_some();
    if !a.insecure_test && (test_primes || a.seed.is_some() || a.bits < MIN_SAFE_BITS) {
        return Err(CliError::usage(format!(
            "fixed primes, seeds and keys below {MIN_SAFE_BITS} bits need --insecure-test"
        )));
    }
    let bound = parse_int(&a.bound_m, "--bound-m")?;
    let mut rng = rng_for(a.seed);
    let sk = match (a.test_p, a.test_q) {
        (Some(p), Some(q)) => PrivateKey::from_primes(parse_int(&p, "--test-p")?, parse_int(&q, "--test-q")?)?,
        _ => keygen(a.bits, rng.as_mut())?.1,
    };
    let ck = ComparisonKey::generate(&sk, &bound, rng.as_mut())?;

    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::usage(format!("{}: {e}", a.out_dir.display())))?;
    let files = [
        ("public.json", keyfile::to_json(&PublicKeyFile::from_key(sk.public()))),
        ("private.json", keyfile::to_json(&PrivateKeyFile::from_key(&sk))),
        ("comparison.json", keyfile::to_json(&ComparisonKeyFile::from_key(&ck))),
    ];
    for (name, text) in files {
        let path = a.out_dir.join(name);
        write_file(&path, &text)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_binary(a: &BinaryArgs, sub: bool) -> CliResult<()> {
    let pk = load_pk(&a.pk)?;
    let ca = parse_ciphertext(&pk, &a.a)?;
    let cb = parse_ciphertext(&pk, &a.b)?;
    let out = if sub { hope::subtract(&pk, &ca, &cb)? } else { pk.add(&ca, &cb)? };
    println!("{}", out.to_hex());
    Ok(())
}

fn cmd_kat(out: &Path, seed: u64, check: bool) -> CliResult<()> {
    if check {
        let file: kat::KatFile = serde_json::from_str(&read_text(out)?)
            .map_err(|e| CliError::usage(format!("{}: {e}", out.display())))?;
        let n = kat::replay(&file).map_err(|m| CliError::new(Exit::Crypto, m.0))?;
        println!("{n} vectors ok");
    } else {
        write_file(out, &kat::to_json(&kat::generate(seed)))?;
    }
    Ok(())
}

struct BenchRow {
    op: &'static str,
    count: usize,
    mean_ms: f64,
}

fn time_op(op: &'static str, count: usize, mut f: impl FnMut(usize)) -> BenchRow {
    let start = Instant::now();
    for i in 0..count {
        f(i);
    }
    BenchRow {
        op,
        count,
        mean_ms: start.elapsed().as_secs_f64() * 1e3 / count as f64,
    }
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    if a.count == 0 {
        return Err(CliError::usage("--count must be positive"));
    }
    let want = |op: BenchOp| a.ops.contains(&op) || a.ops.contains(&BenchOp::All);
    let mut rng = rng_for(a.seed);
    let (pk, sk) = keygen(a.bits, rng.as_mut())?;
    let bound = Integer::from(1u64 << 62);
    let ck = ComparisonKey::generate(&sk, &bound, rng.as_mut())?;
    let span = Integer::from(&bound * 2u32) + 1u32;
    let values: Vec<Integer> = (0..a.count)
        .map(|_| random_below(&span, rng.as_mut()) - &bound)
        .collect();
    let cts: Vec<Ciphertext> = values
        .iter()
        .map(|m| hope::encrypt(&pk, m, rng.as_mut()))
        .collect::<Result<_, _>>()?;
    let next = |i: usize| (i + 1) % cts.len();
    let mut rows = Vec::new();

    if want(BenchOp::Enc) {
        rows.push(time_op("enc", a.count, |i| {
            hope::encrypt(&pk, &values[i], rng.as_mut()).expect("in range");
        }));
    }
    if want(BenchOp::Dec) {
        rows.push(time_op("dec", a.count, |i| {
            hope::decrypt(&sk, &cts[i]).expect("valid");
        }));
    }
    if want(BenchOp::Add) {
        rows.push(time_op("eval_add", a.count, |i| {
            pk.add(&cts[i], &cts[next(i)]).expect("same key");
        }));
    }
    if want(BenchOp::Sub) {
        rows.push(time_op("eval_sub", a.count, |i| {
            hope::subtract(&pk, &cts[i], &cts[next(i)]).expect("same key");
        }));
    }
    if want(BenchOp::Cmp) {
        rows.push(time_op("eval_cmp", a.count, |i| {
            ck.compare(&pk, &cts[i], &cts[next(i)]).expect("valid");
        }));
    }
    if want(BenchOp::Modpow) {
        // reference point: one n²-modulus exponentiation with an exponent the size of ck0
        let n2 = pk.n_squared();
        rows.push(time_op("modpow_ref", a.count, |i| {
            mod_pow(cts[i].value(), ck.ck0(), n2);
        }));
    }
    if want(BenchOp::Insert) || want(BenchOp::Range) {
        let mut index = EncryptedIndex::new(pk.clone(), ck.clone())?;
        let insert = time_op("index_insert", a.count, |i| {
            index.insert(cts[i].clone(), Vec::new()).expect("valid");
        });
        if want(BenchOp::Insert) {
            rows.push(insert);
        }
        if want(BenchOp::Range) {
            rows.push(time_op("index_range", a.count, |i| {
                let (lo, hi) = if values[i] <= values[next(i)] { (i, next(i)) } else { (next(i), i) };
                index.range(&cts[lo], &cts[hi], Inclusive::BOTH).expect("valid");
            }));
        }
    }

    if a.json {
        let doc: Vec<_> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "op": r.op,
                    "bits": a.bits,
                    "count": r.count,
                    "mean_ms": r.mean_ms,
                    "ops_per_sec": 1e3 / r.mean_ms,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        println!("{:<14} {:>6} {:>8} {:>12} {:>12}", "op", "bits", "count", "mean_ms", "ops_per_sec");
        for r in &rows {
            println!(
                "{:<14} {:>6} {:>8} {:>12.3} {:>12.1}",
                r.op,
                a.bits,
                r.count,
                r.mean_ms,
                1e3 / r.mean_ms
            );
        }
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> CliResult<()> {
    let config = match (a.restore, a.pk, a.ck) {
        (Some(path), _, _) => ServerConfig::Restore(path),
        (None, Some(pk), Some(ck)) => {
            let pk = load_pk(&pk)?;
            let ck = load_ck(&ck, &pk)?;
            ServerConfig::Preloaded(ServerState::new(pk, ck)?)
        }
        _ => ServerConfig::AwaitSetup,
    };
    let server = Server::new(config)?;
    let handle = serve(a.listen.as_str(), server)
        .map_err(|e| CliError::new(Exit::Protocol, format!("cannot listen on {}: {e}", a.listen)))?;
    println!("listening on {}", handle.local_addr());
    io::stdout().flush().ok();
    handle.wait();
    Ok(())
}

fn payload_text(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) if !s.contains(['\t', '\n']) => s.to_string(),
        _ => format!("base64:{}", encode_bytes(bytes)),
    }
}

fn cmd_client(a: ClientArgs) -> CliResult<()> {
    let sk = load_sk(&a.sk)?;
    let ck = load_ck(&a.ck, sk.public())?;
    let transport = TcpTransport::connect(a.server.as_str())
        .map_err(|e| CliError::new(Exit::Protocol, format!("cannot connect to {}: {e}", a.server)))?;
    let mut client = Client::new(transport, sk, ck.bound_m().clone());

    match a.action {
        ClientAction::Setup => {
            client.setup(&ck)?;
            println!("ok");
        }
        ClientAction::Insert { m, payload } => {
            let id = client.insert(&parse_int(&m, "--m")?, payload.as_bytes())?;
            println!("{id}");
        }
        ClientAction::Range {
            lo,
            hi,
            exclusive_lo,
            exclusive_hi,
        } => {
            let inclusive = Inclusive {
                lo: !exclusive_lo,
                hi: !exclusive_hi,
            };
            for row in client.range_with(&parse_int(&lo, "--lo")?, &parse_int(&hi, "--hi")?, inclusive)? {
                println!("{}\t{}\t{}", row.entry_id, row.value, payload_text(&row.payload));
            }
        }
        ClientAction::GroupBy => {
            for g in client.group_by()? {
                println!("{}\t{}", g.value, g.count);
            }
        }
        ClientAction::RotateCk { out } => {
            let fresh = client.rotate_ck(ck.epoch())?;
            let path = out.unwrap_or(a.ck);
            write_file(&path, &keyfile::to_json(&ComparisonKeyFile::from_key(&fresh)))?;
            println!("epoch {}", fresh.epoch());
        }
        ClientAction::Stats => {
            let s = client.stats()?;
            println!("initialized {}", s.initialized);
            println!("size {}", s.size);
            println!("comparisons {}", s.comparisons);
            println!("depth {}", s.depth);
            if let (Some(m), Some(epoch)) = (s.bound_m, s.epoch) {
                println!("m_bound_hex {}", keyfile::int_to_hex(&m));
                println!("epoch {epoch}");
            }
        }
        ClientAction::Snapshot { path } => {
            client.snapshot(&path)?;
            println!("ok");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Keygen(a) => cmd_keygen(a),
        Command::Enc { pk, m } => {
            let pk = load_pk(&pk)?;
            let c = hope::encrypt(&pk, &parse_int(&m, "--m")?, &mut SecureRandom::new())?;
            println!("{}", c.to_hex());
            Ok(())
        }
        Command::Dec { sk, c } => {
            let sk = load_sk(&sk)?;
            let c = parse_ciphertext(sk.public(), &c)?;
            println!("{}", hope::decrypt(&sk, &c)?);
            Ok(())
        }
        Command::Add(a) => cmd_binary(&a, false),
        Command::Sub(a) => cmd_binary(&a, true),
        Command::Cmp {
            operands,
            ck,
            show_blinded,
        } => {
            let pk = load_pk(&operands.pk)?;
            let ck = load_ck(&ck, &pk)?;
            let c0 = parse_ciphertext(&pk, &operands.a)?;
            let c1 = parse_ciphertext(&pk, &operands.b)?;
            let r = ck.compare(&pk, &c0, &c1)?;
            println!("{}", kat::ordering_label(r.ordering));
            if show_blinded {
                println!("blinded {}", r.blinded_diff);
            }
            Ok(())
        }
        Command::Kat { out, seed, check } => cmd_kat(&out, seed, check),
        Command::Bench(a) => cmd_bench(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Client(a) => cmd_client(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hope: {e}");
            e.exit.into()
        }
    }
}
