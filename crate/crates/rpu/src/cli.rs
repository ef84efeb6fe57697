//! The `rpu` command line.
//!
//! Exit codes: 0 on success, 1 on domain failures (a kernel that fails
//! verification, a calibration that misses its tolerances, a program that
//! faults), 2 on usage errors. Diagnostics go to the error stream; data goes
//! to files or the output stream.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rpu_core::codegen::{
    default_params, generate_with, plan, verify_one, ButterflyStyle, Direction, GenOptions, RegAllocStrategy,
    Variant, VerifyRow,
};
use rpu_core::isa::{disassemble, validate, Severity};
use rpu_core::perf::{
    self, calibrate, estimate_table, measure_kernels, published_speedups, residuals, ChipModel, IoKind, IoModel,
    KernelRow, RpuConfigName, WorkloadSpec, TABLE1,
};
use rpu_core::sim::{self, MachineConfig, Region, RpuState};
use serde::Serialize;

use crate::config::{self, CHIPS_FILE, IO_FILE, MACHINE_FILE, WORKLOAD_FILE};
use crate::formats::{self, load_program, program_binary, program_json, read_image, write, write_image, FormatError};
use crate::report::{opt, render, Format, Table};

#[derive(Parser, Debug)]
#[command(name = "rpu", version, about = "Assembler, simulator, NTT generator and performance model for the RPU")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble a text program into the binary or JSON format.
    Asm(AsmArgs),
    /// Disassemble a binary or JSON program into text.
    Disasm(DisasmArgs),
    /// Run a program on the cycle simulator.
    Sim(SimArgs),
    /// Generate an NTT kernel with its twiddle images.
    NttGen(NttGenArgs),
    /// Generate, simulate and check NTT kernels against the reference.
    NttVerify(NttVerifyArgs),
    /// Simulated ringAdd, ringMult and NTT latencies against published values.
    Kernels(KernelsArgs),
    /// Chip-level workload estimates.
    Perf(PerfArgs),
    /// Reproduce the published result tables.
    Tables(TablesArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output format [default: md on a terminal, json otherwise; csv for ntt-verify]
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of the output stream.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MachineArgs {
    /// Register-file model; overrides machine.json from the config directory.
    #[arg(long, value_enum)]
    model: Option<Model>,
    /// Machine configuration JSON; overrides --model.
    #[arg(long, value_name = "FILE")]
    machine: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    Model1,
    Model2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Emit {
    Bin,
    Json,
}

#[derive(Args, Debug)]
struct AsmArgs {
    /// Assembly source.
    input: PathBuf,
    /// Output file [default: output stream]
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Program encoding to write.
    #[arg(long, value_enum, default_value = "bin")]
    emit: Emit,
}

#[derive(Args, Debug)]
struct DisasmArgs {
    /// Binary, JSON or text program.
    input: PathBuf,
    /// Output file [default: output stream]
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Binary, JSON or text program.
    program: PathBuf,
    /// VDM image (little-endian 16-byte words) placed at word 0.
    #[arg(long, value_name = "FILE")]
    vdm: Option<PathBuf>,
    /// SDM image placed at word 0.
    #[arg(long, value_name = "FILE")]
    sdm: Option<PathBuf>,
    /// Write the execution trace as JSON lines.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Write final VDM words to this image file.
    #[arg(long, value_name = "FILE")]
    vdm_out: Option<PathBuf>,
    /// Words of VDM to write with --vdm-out, as START:LEN.
    #[arg(long, value_name = "START:LEN", value_parser = parse_range)]
    vdm_range: Option<(usize, usize)>,
    #[command(flatten)]
    machine: MachineArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Pease,
    KornLambiotte,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Greedy,
    RoundRobin,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Forward,
    Inverse,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StyleArg {
    Fused,
    MulAddSub,
}

#[derive(Args, Debug)]
struct NttGenArgs {
    /// Transform size, a power of two from 4 to 65536.
    #[arg(long)]
    size: usize,
    /// FFT breakdown rule.
    #[arg(long, value_enum, default_value = "pease")]
    variant: VariantArg,
    /// Register allocation strategy.
    #[arg(long, value_enum, default_value = "greedy")]
    strategy: StrategyArg,
    /// Transform direction.
    #[arg(long, value_enum, default_value = "forward")]
    direction: DirectionArg,
    /// Butterfly instruction style.
    #[arg(long, value_enum, default_value = "fused")]
    style: StyleArg,
    /// Keep generation order instead of list scheduling.
    #[arg(long)]
    no_schedule: bool,
    /// Directory for NAME.s, NAME.rpu, NAME.json, NAME.vdm.bin and NAME.sdm.bin.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    /// Base file name [default: the kernel's entry name]
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    machine: MachineArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct NttVerifyArgs {
    /// Sizes: N, a comma list, or A..B for the powers of two from A to B.
    #[arg(long, value_parser = parse_sizes, default_value = "1024..65536")]
    sizes: Sizes,
    /// FFT breakdown rules to check.
    #[arg(long, value_enum, default_value = "all")]
    variant: VariantArg,
    /// Register allocation strategies to check.
    #[arg(long, value_enum, default_value = "greedy")]
    strategy: StrategyArg,
    /// Transform directions to check.
    #[arg(long, value_enum, default_value = "forward")]
    direction: DirectionArg,
    /// Seed of the random inputs.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads [default: available cores]
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    machine: MachineArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct KernelsArgs {
    /// Sizes: N, a comma list, or A..B for the powers of two from A to B.
    #[arg(long, value_parser = parse_sizes, default_value = "1024,16384,65536")]
    sizes: Sizes,
    #[command(flatten)]
    machine: MachineArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct PerfArgs {
    /// Chip models JSON (a list) [default: chips.json in the config directory, else published values]
    #[arg(long, value_name = "FILE")]
    chips: Option<PathBuf>,
    /// I/O models JSON (a list) [default: io.json in the config directory, else the four published models]
    #[arg(long, value_name = "FILE")]
    io: Option<PathBuf>,
    /// Workload JSON [default: workload.json in the config directory, else uncalibrated defaults]
    #[arg(long, value_name = "FILE")]
    workload: Option<PathBuf>,
    /// Fit the workload's op counts to the published iteration times first.
    #[arg(long)]
    calibrate: bool,
    /// Write the calibrated workload JSON here.
    #[arg(long, value_name = "FILE", requires = "calibrate")]
    save_calibration: Option<PathBuf>,
    /// Estimate with 64k-point simulator latencies (after any calibration).
    #[arg(long)]
    measured: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableId {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Args, Debug)]
struct TablesArgs {
    /// Which table.
    #[arg(long, value_enum)]
    table: TableId,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Sizes(Vec<usize>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Sizes(Vec::new()));
    }
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("not a size: {t:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if !a.is_power_of_two() || !b.is_power_of_two() || a > b {
            return Err(format!("{s}: range ends must be powers of two, low to high"));
        }
        return Ok(Sizes((a.trailing_zeros()..=b.trailing_zeros()).map(|k| 1 << k).collect()));
    }
    s.split(',').map(num).collect::<Result<_, _>>().map(Sizes)
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected START:LEN")?;
    let p = |t: &str| t.parse::<usize>().map_err(|_| format!("not a number: {t:?}"));
    Ok((p(a)?, p(b)?))
}

/// A failure with its exit code.
#[derive(Debug)]
enum Fail {
    Usage(String),
    Domain(String),
}

impl From<FormatError> for Fail {
    fn from(e: FormatError) -> Self {
        Fail::Domain(e.to_string())
    }
}

type Res = Result<(), Fail>;

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    tty: bool,
}

impl Io<'_> {
    fn format(&self, o: &OutArgs) -> Format {
        o.format.unwrap_or(if self.tty && o.output.is_none() { Format::Md } else { Format::Json })
    }

    fn emit(&mut self, o: &OutArgs, text: &str) -> Res {
        match &o.output {
            Some(p) => write(p, text.as_bytes())?,
            None => self.out.write_all(text.as_bytes()).map_err(|e| Fail::Domain(e.to_string()))?,
        }
        Ok(())
    }

    fn note(&mut self, msg: &str) {
        let _ = writeln!(self.err, "{msg}");
    }
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, tty: bool) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                2
            } else {
                let _ = out.write_all(text.as_bytes());
                0
            };
        }
    };
    let mut io = Io { out, err, tty };
    let r = match &cli.command {
        Command::Asm(a) => asm(&mut io, a),
        Command::Disasm(a) => disasm(&mut io, a),
        Command::Sim(a) => sim_cmd(&mut io, a),
        Command::NttGen(a) => ntt_gen(&mut io, a),
        Command::NttVerify(a) => ntt_verify(&mut io, a),
        Command::Kernels(a) => kernels(&mut io, a),
        Command::Perf(a) => perf_cmd(&mut io, a),
        Command::Tables(a) => tables(&mut io, a),
    };
    match r {
        Ok(()) => 0,
        Err(Fail::Usage(m)) => {
            io.note(&format!("error: {m}"));
            2
        }
        Err(Fail::Domain(m)) => {
            io.note(&format!("error: {m}"));
            1
        }
    }
}

fn machine(m: &MachineArgs) -> Result<MachineConfig, Fail> {
    let cfg = match (&m.machine, m.model) {
        (Some(p), _) => config::load_json(p)?,
        (None, Some(Model::Model1)) => MachineConfig::default(),
        (None, Some(Model::Model2)) => MachineConfig::model2(),
        (None, None) => config::load(None, MACHINE_FILE)?.unwrap_or_default(),
    };
    cfg.check().map_err(|e| Fail::Usage(format!("machine configuration: {e}")))?;
    Ok(cfg)
}

fn write_bytes(io: &mut Io, path: Option<&Path>, bytes: &[u8]) -> Res {
    match path {
        Some(p) => Ok(write(p, bytes)?),
        None => io.out.write_all(bytes).map_err(|e| Fail::Domain(e.to_string())),
    }
}

fn asm(io: &mut Io, a: &AsmArgs) -> Res {
    let text = formats::read(&a.input)?;
    let text = String::from_utf8(text).map_err(|_| Fail::Domain(format!("{}: not UTF-8 text", a.input.display())))?;
    let p = rpu_core::isa::assemble(&text).map_err(|e| Fail::Domain(format!("{}: {e}", a.input.display())))?;
    let bytes = match a.emit {
        Emit::Bin => program_binary(&p),
        Emit::Json => program_json(&p).into_bytes(),
    };
    write_bytes(io, a.output.as_deref(), &bytes)
}

fn disasm(io: &mut Io, a: &DisasmArgs) -> Res {
    let p = load_program(&a.input)?;
    write_bytes(io, a.output.as_deref(), disassemble(&p).as_bytes())
}

#[derive(Serialize)]
struct SimReport {
    program: String,
    #[serde(flatten)]
    result: sim::RunResult,
}

fn sim_cmd(io: &mut Io, a: &SimArgs) -> Res {
    let cfg = machine(&a.machine)?;
    let p = load_program(&a.program)?;
    let diags = validate(&p, &cfg);
    for d in &diags {
        let at = d.index.map_or(String::new(), |i| format!(" at {i}"));
        io.note(&format!("{:?} {}{at}: {}", d.severity, d.code, d.message).to_lowercase());
    }
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(Fail::Domain("program failed validation".into()));
    }
    let mut st = RpuState::new(p.clone(), cfg).map_err(|e| Fail::Domain(e.to_string()))?;
    let load = |st: &mut RpuState, r: Region, path: &Option<PathBuf>| -> Res {
        if let Some(path) = path {
            let words = read_image(path)?;
            st.load_memory(r, 0, &words).map_err(|e| Fail::Domain(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    };
    load(&mut st, Region::Vdm, &a.vdm)?;
    load(&mut st, Region::Sdm, &a.sdm)?;
    st.run_to_end().map_err(|e| Fail::Domain(e.to_string()))?;
    let mut result = st.result(a.trace.is_some());
    if let (Some(path), Some(trace)) = (&a.trace, result.trace.take()) {
        let mut buf = Vec::new();
        formats::write_trace(&mut buf, &p, &trace).map_err(|e| Fail::Domain(e.to_string()))?;
        write(path, &buf)?;
    }
    if let Some(path) = &a.vdm_out {
        let (start, len) = a.vdm_range.unwrap_or((0, st.vdm.len()));
        let words = st.dump_memory(Region::Vdm, start, len).map_err(|e| Fail::Usage(e.to_string()))?;
        write_image(path, &words)?;
    }
    let name = if p.meta.entry.is_empty() { a.program.display().to_string() } else { p.meta.entry.clone() };
    let rep = SimReport { program: name, result };
    let r = &rep.result;
    let mut t = Table::new(&["program", "cycles", "wall time (us)", "load/store busy", "compute busy", "shuffle busy", "hazard stalls", "queue-full stalls", "bank conflicts", "instructions", "digest"]);
    t.push(vec![
        rep.program.clone(),
        r.cycles.to_string(),
        format!("{:.4}", r.wall_time_us),
        r.queue_busy[0].to_string(),
        r.queue_busy[1].to_string(),
        r.queue_busy[2].to_string(),
        r.hazard_stalls.to_string(),
        r.queue_full_stalls.to_string(),
        r.bank_conflict_cycles.to_string(),
        r.instructions.to_string(),
        format!("{:016x}", r.digest),
    ]);
    let f = io.format(&a.out);
    io.emit(&a.out, &render(f, &t, &rep))
}

fn variants(v: VariantArg) -> Vec<Variant> {
    match v {
        VariantArg::Pease => vec![Variant::Pease],
        VariantArg::KornLambiotte => vec![Variant::KornLambiotte],
        VariantArg::All => Variant::ALL.to_vec(),
    }
}

fn strategies(s: StrategyArg) -> Vec<RegAllocStrategy> {
    match s {
        StrategyArg::Greedy => vec![RegAllocStrategy::Greedy],
        StrategyArg::RoundRobin => vec![RegAllocStrategy::RoundRobin],
        StrategyArg::All => RegAllocStrategy::ALL.to_vec(),
    }
}

fn directions(d: DirectionArg) -> Vec<Direction> {
    match d {
        DirectionArg::Forward => vec![Direction::Forward],
        DirectionArg::Inverse => vec![Direction::Inverse],
        DirectionArg::Both => vec![Direction::Forward, Direction::Inverse],
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Pease => "pease",
        Variant::KornLambiotte => "korn-lambiotte",
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "forward",
        Direction::Inverse => "inverse",
    }
}

#[derive(Serialize)]
struct GenReport {
    name: String,
    n: usize,
    instructions: usize,
    twiddle_vectors: usize,
    sdm_words: usize,
    input_offset: usize,
    output_offset: usize,
    files: Vec<String>,
    note: String,
}

fn ntt_gen(io: &mut Io, a: &NttGenArgs) -> Res {
    let cfg = machine(&a.machine)?;
    let one = |what: &str, n: usize| Fail::Usage(format!("--{what} takes a single value, not all ({n} choices)"));
    let [variant] = variants(a.variant)[..] else { return Err(one("variant", 2)) };
    let [strategy] = strategies(a.strategy)[..] else { return Err(one("strategy", 2)) };
    let [direction] = directions(a.direction)[..] else { return Err(one("direction", 2)) };
    let params =
        default_params(a.size).ok_or_else(|| Fail::Usage(format!("no NTT parameters for size {}", a.size)))?;
    let pl = plan(a.size, variant, &params).map_err(|e| Fail::Usage(e.to_string()))?;
    let style = match a.style {
        StyleArg::Fused => ButterflyStyle::Fused,
        StyleArg::MulAddSub => ButterflyStyle::MulAddSub,
    };
    let opts = GenOptions { strategy, style, direction, schedule: !a.no_schedule };
    let k = generate_with(&pl, &cfg, &opts).map_err(|e| Fail::Domain(e.to_string()))?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Fail::Domain(format!("{}: {e}", a.out_dir.display())))?;
    let base = a.name.clone().unwrap_or_else(|| k.program.meta.entry.trim_start_matches('_').to_string());
    let path = |ext: &str| a.out_dir.join(format!("{base}.{ext}"));
    let files = [
        ("s", disassemble(&k.program).into_bytes()),
        ("rpu", program_binary(&k.program)),
        ("json", (serde_json::to_string_pretty(&k).unwrap() + "\n").into_bytes()),
        ("vdm.bin", formats::words_to_bytes(&k.vdm_image(&[]))),
        ("sdm.bin", formats::words_to_bytes(&k.twiddles.sdm)),
    ];
    let mut names = Vec::new();
    for (ext, bytes) in &files {
        write(&path(ext), bytes)?;
        names.push(path(ext).display().to_string());
    }
    let rep = GenReport {
        name: k.program.meta.entry.clone(),
        n: k.n,
        instructions: k.program.instrs.len(),
        twiddle_vectors: k.twiddles.vdm.len() / rpu_core::isa::VLEN,
        sdm_words: k.twiddles.sdm.len(),
        input_offset: k.input_offset,
        output_offset: k.output_offset,
        files: names,
        note: k.note.clone(),
    };
    let mut t = Table::new(&["kernel", "n", "instructions", "twiddle vectors", "SDM words", "input at", "output at"]);
    t.push(vec![
        rep.name.clone(),
        rep.n.to_string(),
        rep.instructions.to_string(),
        rep.twiddle_vectors.to_string(),
        rep.sdm_words.to_string(),
        rep.input_offset.to_string(),
        rep.output_offset.to_string(),
    ]);
    t.notes = rep.files.iter().map(|f| format!("wrote {f}")).collect();
    let f = io.format(&a.out);
    io.emit(&a.out, &render(f, &t, &rep))
}

/// Run `work` on up to `jobs` threads; results keep the input order.
fn fan_out<T: Sync, R: Send>(items: &[T], jobs: usize, work: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|_| {
                s.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= items.len() {
                            break mine;
                        }
                        mine.push((i, work(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

fn ntt_verify(io: &mut Io, a: &NttVerifyArgs) -> Res {
    let cfg = machine(&a.machine)?;
    let mut items = Vec::new();
    for &n in &a.sizes.0 {
        for v in variants(a.variant) {
            for s in strategies(a.strategy) {
                for d in directions(a.direction) {
                    items.push((n, v, s, d));
                }
            }
        }
    }
    let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows: Vec<VerifyRow> =
        fan_out(&items, jobs, |&(n, v, s, d)| verify_one(n, v, s, d, &cfg, a.seed.wrapping_add(n as u64)));
    let mut t = Table::new(&["size", "variant", "strategy", "direction", "cycles", "stalls", "hazards", "pass"]);
    for r in &rows {
        t.push(vec![
            r.size.to_string(),
            variant_name(r.variant).into(),
            r.strategy.name().into(),
            direction_name(r.direction).into(),
            r.cycles.to_string(),
            r.stalls.to_string(),
            r.hazards.to_string(),
            r.pass.to_string(),
        ]);
    }
    let f = a.out.format.unwrap_or(Format::Csv);
    io.emit(&a.out, &render(f, &t, &rows))?;
    let failed: Vec<&VerifyRow> = rows.iter().filter(|r| !r.pass).collect();
    for r in &failed {
        let why = if r.error.is_empty() { "output mismatch or hazard".to_string() } else { r.error.clone() };
        io.note(&format!(
            "FAIL n={} {} {} {}: {why}",
            r.size,
            variant_name(r.variant),
            r.strategy.name(),
            direction_name(r.direction)
        ));
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Fail::Domain(format!("{} of {} kernels failed", failed.len(), rows.len())))
    }
}

fn kernel_table(rows: &[KernelRow]) -> Table {
    let mut t = Table::new(&["kernel", "size", "cycles", "us", "compute bound", "published cycles", "published us", "ratio"]);
    for r in rows {
        t.push(vec![
            r.kernel.clone(),
            r.size.to_string(),
            r.cycles.to_string(),
            format!("{:.3}", r.us),
            r.compute_bound_cycles.to_string(),
            opt(r.published_cycles),
            opt(r.published_us),
            r.ratio.map_or_else(String::new, |x| format!("{x:.2}")),
        ]);
    }
    t
}

fn kernels(io: &mut Io, a: &KernelsArgs) -> Res {
    let cfg = machine(&a.machine)?;
    let rows = measure_kernels(&a.sizes.0, &cfg);
    for r in rows.iter().filter(|r| !r.error.is_empty()) {
        io.note(&format!("{} at {}: {}", r.kernel, r.size, r.error));
    }
    let f = io.format(&a.out);
    io.emit(&a.out, &render(f, &kernel_table(&rows), &rows))?;
    if rows.iter().any(|r| !r.error.is_empty()) {
        return Err(Fail::Domain("some kernels could not be measured".into()));
    }
    Ok(())
}

/// 64k-point latencies simulated on the tile each chip uses.
fn measured_chip(chip: &ChipModel) -> Result<ChipModel, Fail> {
    let cfg = match chip.name {
        RpuConfigName::Model1 => MachineConfig::default(),
        RpuConfigName::Model2 | RpuConfigName::Phase2 => MachineConfig::model2(),
    };
    let rows = measure_kernels(&[1 << 16], &cfg);
    if let Some(r) = rows.iter().find(|r| !r.error.is_empty()) {
        return Err(Fail::Domain(format!("measuring {}: {}", r.kernel, r.error)));
    }
    Ok(chip.clone().with_cycles(rows[0].cycles, rows[1].cycles, rows[2].cycles))
}

#[derive(Serialize)]
struct PerfReport {
    chips: Vec<ChipModel>,
    workload: WorkloadSpec,
    rows: Vec<perf::EstimateRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    residuals: Vec<perf::Residual>,
}

fn perf_cmd(io: &mut Io, a: &PerfArgs) -> Res {
    let mut chips: Vec<ChipModel> = config::load(a.chips.as_deref(), CHIPS_FILE)?.unwrap_or_else(ChipModel::published_all);
    let ios: Vec<IoModel> = config::load(a.io.as_deref(), IO_FILE)?.unwrap_or_else(IoModel::published_all);
    let mut w: WorkloadSpec = config::load(a.workload.as_deref(), WORKLOAD_FILE)?.unwrap_or_default();
    for c in &chips {
        c.check().map_err(|e| Fail::Usage(format!("{}: {e}", c.name)))?;
    }
    let mut res = Vec::new();
    if a.calibrate {
        match calibrate(&w, &chips, &TABLE1, &[IoKind::Ideal, IoKind::Lvds2k, IoKind::Hbm2x1]) {
            Ok(c) => {
                w = c.workload;
                res = c.residuals;
            }
            Err(e) => {
                if let perf::CalibrationError::Residuals(rs) = &e {
                    for r in rs.iter().filter(|r| !r.ok()) {
                        io.note(&format!("residual {r:?}"));
                    }
                }
                return Err(Fail::Domain(format!("calibration failed: {e}")));
            }
        }
        if let Some(p) = &a.save_calibration {
            write(p, (serde_json::to_string_pretty(&w).unwrap() + "\n").as_bytes())?;
        }
    }
    // Op counts are fitted against the published latencies, then re-estimated on measured ones.
    if a.measured {
        chips = chips.iter().map(measured_chip).collect::<Result<_, _>>()?;
    }
    let rows = estimate_table(&w, &chips, &ios);
    let mut t = Table::new(&["configuration", "I/O model", "no BS (s)", "derate", "w/BS (s)", "derate", "counts"]);
    let secs = |x: Option<f64>| x.map_or_else(|| "uncalibrated".to_string(), |v| format!("{v:.3}"));
    let pct = |x: Option<i64>| x.map_or_else(String::new, |v| format!("{v}%"));
    for r in &rows {
        t.push(vec![
            r.config.to_string(),
            r.io.label().into(),
            secs(r.time_no_bs_s),
            pct(r.derate_no_bs_pct),
            secs(r.time_with_bs_s),
            pct(r.derate_with_bs_pct),
            format!("{:?}", r.source).to_uppercase(),
        ]);
    }
    let rep = PerfReport { chips, workload: w, rows, residuals: res };
    let f = io.format(&a.out);
    io.emit(&a.out, &render(f, &t, &rep))
}

#[derive(Serialize)]
struct Table1Report {
    config: RpuConfigName,
    io: IoKind,
    bootstrap: bool,
    published_s: f64,
    published_derate_pct: Option<i64>,
    recomputed_derate_pct: Option<i64>,
    predicted_s: f64,
    predicted_derate_pct: Option<i64>,
    fitted: bool,
}

fn tables(io: &mut Io, a: &TablesArgs) -> Res {
    let f = io.format(&a.out);
    match a.table {
        TableId::Two => {
            let rows = published_speedups();
            let mut t = Table::new(&["kernel", "CPU latency (us)", "RPU latency (us)", "single RPU", "chiplet (14 tiles)", "quad chiplet"]);
            for r in &rows {
                t.push(vec![
                    r.kernel.into(),
                    r.cpu_us.to_string(),
                    r.rpu_us.to_string(),
                    format!("{}x", r.single),
                    format!("{}x", r.chiplet),
                    format!("{}x", r.quad),
                ]);
            }
            t.notes.push("Speedups are floor(cpu * m / rpu) with m = 1, 14 and 56.".into());
            t.notes.push("The chiplet column uses 14 tiles for every kernel, although Model 1 fits 10.".into());
            io.emit(&a.out, &render(f, &t, &rows))
        }
        TableId::One => {
            let chips = ChipModel::published_all();
            let fit_on = [IoKind::Ideal, IoKind::Lvds2k, IoKind::Hbm2x1];
            let c = calibrate(&WorkloadSpec::default(), &chips, &TABLE1, &fit_on)
                .map_err(|e| Fail::Domain(format!("calibration failed: {e}")))?;
            let res = residuals(&c.workload, &chips, &TABLE1, &fit_on);
            let mut rows = Vec::new();
            for r in &res {
                let src = TABLE1.iter().find(|t| t.config == r.config && t.io == r.io).unwrap();
                let (ideal, this) = if r.bootstrap {
                    (src.ideal().with_bs_s, src.with_bs_s)
                } else {
                    (src.ideal().no_bs_s, src.no_bs_s)
                };
                rows.push(Table1Report {
                    config: r.config,
                    io: r.io,
                    bootstrap: r.bootstrap,
                    published_s: r.target_s,
                    published_derate_pct: r.target_derate_pct,
                    recomputed_derate_pct: r.target_derate_pct.map(|_| perf::derate_pct(this, ideal)),
                    predicted_s: r.predicted_s,
                    predicted_derate_pct: r.predicted_derate_pct,
                    fitted: r.fitted,
                });
            }
            let mut t = Table::new(&["configuration", "I/O model", "BS", "published (s)", "derate", "recomputed", "model (s)", "model derate", "fitted"]);
            let pct = |x: Option<i64>| x.map_or_else(String::new, |v| format!("{v}%"));
            for r in &rows {
                t.push(vec![
                    r.config.to_string(),
                    r.io.label().into(),
                    if r.bootstrap { "yes" } else { "no" }.into(),
                    format!("{:.3}", r.published_s),
                    pct(r.published_derate_pct),
                    pct(r.recomputed_derate_pct),
                    format!("{:.3}", r.predicted_s),
                    pct(r.predicted_derate_pct),
                    if r.fitted { "yes" } else { "held out" }.into(),
                ]);
            }
            t.notes.push(format!(
                "Model times come from op counts fitted to the published times (CALIBRATED, {:.3} tower vectors per derated ring multiply).",
                c.workload.vectors_per_ring_mult
            ));
            io.emit(&a.out, &render(f, &t, &rows))
        }
    }
}
