use std::error::Error as StdError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use m2mt::attribution::{lam, LamConfig, LamResult};
use m2mt::autodiff::op_gradchecks;
use m2mt::ensemble::{self_ensemble, LfTransform};
use m2mt::io::{load_lf, load_lf_tensor, load_net, parse_run_config, save_lf, save_tensor, save_weights, RunConfig};
use m2mt::metrics::{lf_metrics, sig6};
use m2mt::network::{count_flops, count_params, AnyNet, FlopConvention, ManyToMany, Net, NetConfig, Network, O2OBaseline, OneToOne};
use m2mt::ops::Window;
use m2mt::training::{end_to_end_gradcheck, make_pair, synthetic_lf, train_toy};
use m2mt::{LfDims, LfTensor, Tensor};

type CliResult<T = ()> = Result<T, Box<dyn StdError>>;

#[derive(Parser)]
#[command(name = "m2mt", version, about = "Light-field super-resolution with a many-to-many transformer")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Super-resolve a light field with a weight file
    Sr(SrArgs),
    /// Per-view PSNR and SSIM of two light fields
    Metrics(MetricsArgs),
    /// Local attribution map and diffusion index for a detector window
    Lam(LamArgs),
    /// Parameter count per layer
    Params(CountArgs),
    /// FLOP count per layer for one patch
    Flops(FlopArgs),
    /// Finite-difference checks of every op and a toy network
    Gradcheck(GradArgs),
    /// Overfit a toy network on one light field
    TrainToy(TrainArgs),
    /// Write freshly initialized weights
    Init(InitArgs),
}

#[derive(Args)]
struct SrArgs {
    /// Weight file (.m2mw)
    #[arg(long)]
    weights: PathBuf,
    /// View directory or `.lft` tensor
    #[arg(long)]
    input: PathBuf,
    /// View directory, or a `.lft` path for a raw tensor
    #[arg(long)]
    output: PathBuf,
    /// Expected factor; checked against the weights
    #[arg(long)]
    scale: Option<usize>,
    /// Average over the flip/transpose group
    #[arg(long)]
    ensemble: bool,
    /// Crop the input to its central k×k views
    #[arg(long)]
    central: Option<usize>,
    #[arg(long, default_value_t = 16)]
    bitdepth: u32,
}

#[derive(Args)]
struct MetricsArgs {
    /// First light field (directory or .lft)
    #[arg(long)]
    a: PathBuf,
    /// Second light field, same shape
    #[arg(long)]
    b: PathBuf,
    /// Compare only the central k×k views
    #[arg(long)]
    central: Option<usize>,
    /// key=value output
    #[arg(long)]
    kv: bool,
}

#[derive(Args)]
struct LamArgs {
    /// Weight file (.m2mw)
    #[arg(long)]
    weights: PathBuf,
    /// Low-resolution light field (directory or .lft)
    #[arg(long)]
    input: PathBuf,
    /// Window origin and side on the output, `x,y,l`
    #[arg(long)]
    window: String,
    /// View holding the window, `u,v`; defaults to the central view
    #[arg(long)]
    view: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    /// Forward path differences with the 1/m factor; `--literal=false` for
    /// backward differences
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = ArgAction::Set)]
    literal: bool,
    /// Crop the input to its central k×k views
    #[arg(long)]
    central: Option<usize>,
    /// Write the macro-pixel map as a `.lft` tensor
    #[arg(long)]
    out_map: Option<PathBuf>,
    /// Write the macro-pixel map as an 8-bit PGM
    #[arg(long)]
    out_heatmap: Option<PathBuf>,
}

#[derive(Args)]
struct CountArgs {
    /// key=value config; defaults to the 4× reference network
    #[arg(long)]
    config: Option<PathBuf>,
    /// Count the per-view baseline instead
    #[arg(long)]
    o2o: bool,
}

#[derive(Args)]
struct FlopArgs {
    /// key=value config; defaults to the 4× reference network
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    patch: usize,
    /// Count one multiply-add as one operation
    #[arg(long)]
    mac: bool,
    /// Count the per-view baseline instead
    #[arg(long)]
    o2o: bool,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Toy light field `U,V,W,H`
    #[arg(long, default_value = "2,2,4,4")]
    dims: String,
}

#[derive(Args)]
struct TrainArgs {
    /// key=value config with network and training settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// High-resolution light field; a synthetic one is generated when absent
    #[arg(long)]
    input: Option<PathBuf>,
    /// Crop the input to its central k×k views
    #[arg(long)]
    central: Option<usize>,
    /// Override the configured iteration count
    #[arg(long)]
    iters: Option<usize>,
    /// Write the trained weights here
    #[arg(long)]
    out_weights: Option<PathBuf>,
    /// Loss curve as CSV
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct InitArgs {
    /// key=value config; defaults to the 4× reference network
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Destination weight file
    #[arg(long)]
    out_weights: PathBuf,
    /// All-zero weights; the network then reduces to bicubic upsampling
    #[arg(long)]
    zeros: bool,
    /// Initialize the per-view baseline instead
    #[arg(long)]
    o2o: bool,
    /// Store f64 instead of f32
    #[arg(long)]
    f64: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("m2mt: {}", text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("m2mt: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Cmd) -> CliResult {
    match cmd {
        Cmd::Sr(a) => sr(a),
        Cmd::Metrics(a) => metrics(a),
        Cmd::Lam(a) => lam_cmd(a),
        Cmd::Params(a) => params(a),
        Cmd::Flops(a) => flops(a),
        Cmd::Gradcheck(a) => gradcheck(a),
        Cmd::TrainToy(a) => train(a),
        Cmd::Init(a) => init(a),
    }
}

fn read_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            Ok(parse_run_config(&text)?)
        }
    }
}

fn is_tensor_path(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "lft")
}

fn read_lf(path: &Path, central: Option<usize>) -> CliResult<LfTensor<f64>> {
    if path.is_dir() {
        return Ok(load_lf(path, central)?);
    }
    let lf = load_lf_tensor::<f64>(path)?;
    let Some(k) = central else { return Ok(lf) };
    let d = lf.dims();
    if k == 0 || k > d.u || k > d.v {
        return Err(format!("cannot crop {}x{} views to central {k}x{k}", d.u, d.v).into());
    }
    let (u0, v0) = ((d.u - k) / 2, (d.v - k) / 2);
    Ok(LfTensor::from_fn(LfDims::new(k, k, d.w, d.h, d.c), |u, v, x, y, c| lf.at(u0 + u, v0 + v, x, y, c))?)
}

fn write_lf(lf: &LfTensor<f64>, path: &Path, bitdepth: u32) -> CliResult {
    if is_tensor_path(path) {
        save_tensor(lf.tensor(), path)?;
    } else {
        save_lf(lf, path, bitdepth)?;
    }
    Ok(())
}

fn parse_list<const N: usize>(s: &str, what: &str) -> CliResult<[usize; N]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || format!("{what} expects {N} comma-separated integers, got {s:?}");
    if parts.len() != N {
        return Err(bad().into());
    }
    let mut out = [0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

/// The full group on square grids, otherwise the four flips.
fn ensemble_group(d: LfDims) -> Vec<LfTransform> {
    LfTransform::group().into_iter().filter(|t| t.check(d).is_ok()).collect()
}

fn sr(a: SrArgs) -> CliResult {
    let lr = read_lf(&a.input, a.central)?;
    let d = lr.dims();
    let net = load_net::<f32>(&a.weights, d.u, d.v)?;
    let r = net.config().scale;
    if let Some(s) = a.scale {
        if s != r {
            return Err(format!("--scale {s} does not match the weights, which upscale by {r}").into());
        }
    }
    let x = lr.cast::<f32>();
    let (out, note) = if a.ensemble {
        let group = ensemble_group(d);
        let n = group.len();
        (self_ensemble(|t| net.forward(t), &x, &group)?, format!(", ensemble of {n}"))
    } else {
        (net.forward(&x)?, String::new())
    };
    let out = out.cast::<f64>();
    write_lf(&out, &a.output, a.bitdepth)?;
    let od = out.dims();
    println!("sr: {}x{} views, {}x{} -> {}x{} (x{r}{note})", d.u, d.v, d.w, d.h, od.w, od.h);
    Ok(())
}

fn metrics(a: MetricsArgs) -> CliResult {
    let x = read_lf(&a.a, a.central)?;
    let y = read_lf(&a.b, a.central)?;
    if x.dims() != y.dims() {
        return Err(format!("light fields differ in shape: {:?} vs {:?}", x.dims().as_array(), y.dims().as_array()).into());
    }
    let rep = lf_metrics(&x, &y)?;
    if a.kv {
        print!("{}", rep.to_kv());
    } else {
        println!("{rep}");
    }
    Ok(())
}

fn run_lam(net: &AnyNet<f64>, lr: &LfTensor<f64>, cfg: &LamConfig) -> CliResult<LamResult> {
    Ok(match net {
        AnyNet::ManyToMany(n) => lam(n, lr, cfg)?,
        AnyNet::OneToOne(n) => lam(n, lr, cfg)?,
    })
}

fn lam_cmd(a: LamArgs) -> CliResult {
    let lr = read_lf(&a.input, a.central)?;
    let d = lr.dims();
    let net = load_net::<f64>(&a.weights, d.u, d.v)?;
    let [x, y, l] = parse_list::<3>(&a.window, "--window")?;
    let mut cfg = LamConfig::new(d.u, d.v, x, y, l);
    if let Some(view) = &a.view {
        let [u, v] = parse_list::<2>(view, "--view")?;
        if u >= d.u || v >= d.v {
            return Err(format!("view ({u},{v}) outside the {}x{} grid", d.u, d.v).into());
        }
        cfg.window = Window { view: u * d.v + v, ..cfg.window };
    }
    cfg.sigma = a.sigma;
    cfg.m = a.steps;
    cfg.literal = a.literal;
    let res = run_lam(&net, &lr, &cfg)?;
    if let Some(p) = &a.out_map {
        save_tensor(&res.map, p)?;
    }
    if let Some(p) = &a.out_heatmap {
        std::fs::write(p, res.heatmap_pgm()?).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
    }
    let kind = if matches!(net, AnyNet::ManyToMany(_)) { "many-to-many" } else { "one-to-one" };
    println!("network {kind}, window view {} origin ({x},{y}) side {l}, {} steps", cfg.window.view, cfg.m);
    println!("DI    {}", sig6(res.di));
    println!("Gini  {}", sig6(res.gini));
    if res.degenerate {
        println!("map is identically zero; DI reported as 100");
    }
    let mass = res.view_mass();
    let total: f64 = mass.iter().sum();
    println!("attribution share per view");
    for u in 0..d.u {
        let row: Vec<String> = (0..d.v)
            .map(|v| {
                let m = mass[u * d.v + v];
                format!("{:>12}", sig6(if total > 0.0 { m / total } else { 0.0 }))
            })
            .collect();
        println!("{}", row.join(""));
    }
    Ok(())
}

fn params(a: CountArgs) -> CliResult {
    let cfg = read_config(a.config.as_deref())?.net;
    let rep = if a.o2o { count_params(&O2OBaseline::<f32>::zeros(&cfg)?) } else { count_params(&Network::<f32>::zeros(&cfg)?) };
    println!("{rep}");
    println!("total {} M", sig6(rep.total as f64 / 1e6));
    Ok(())
}

fn flops(a: FlopArgs) -> CliResult {
    let cfg = read_config(a.config.as_deref())?.net;
    if a.patch == 0 {
        return Err("--patch must be positive".into());
    }
    let conv = if a.mac { FlopConvention::Mac } else { FlopConvention::TwoPerMac };
    let rep = if a.o2o {
        count_flops(&O2OBaseline::<f32>::zeros(&cfg)?, a.patch, a.patch, conv)
    } else {
        count_flops(&Network::<f32>::zeros(&cfg)?, a.patch, a.patch, conv)
    };
    println!("{rep}");
    let unit = if a.mac { "GMAC" } else { "GFLOP" };
    println!("total {} {unit} on a {}x{} patch", sig6(rep.total as f64 / 1e9), a.patch, a.patch);
    Ok(())
}

fn gradcheck(a: GradArgs) -> CliResult {
    const OP_TOL: f64 = 1e-6;
    const NET_TOL: f64 = 1e-5;
    let [u, v, w, h] = parse_list::<4>(&a.dims, "--dims")?;
    let mut failed = Vec::new();
    for c in op_gradchecks(a.seed)? {
        let ok = c.max_rel_error <= OP_TOL;
        println!("{:<22} {:>12}  {}", c.name, sig6(c.max_rel_error), if ok { "ok" } else { "FAIL" });
        if !ok {
            failed.push(c.name);
        }
    }
    let cfg = NetConfig { u, v, c: 3, c_cor: 5, n1: 2, n2: 1, scale: 2, seed: a.seed, ..NetConfig::default() };
    cfg.validate()?;
    let nets = [("many-to-many", end_to_end_gradcheck::<ManyToMany>(&cfg, w, h, 1e-5)?), ("one-to-one", end_to_end_gradcheck::<OneToOne>(&cfg, w, h, 1e-5)?)];
    for (name, r) in nets {
        for (part, e) in [("input", r.input_rel_error), ("params", r.param_rel_error)] {
            let ok = e <= NET_TOL;
            println!("{:<22} {:>12}  {}", format!("{name}.{part}"), sig6(e), if ok { "ok" } else { "FAIL" });
            if !ok {
                failed.push(format!("{name}.{part}"));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(format!("gradient check failed for {}", failed.join(", ")).into())
    }
}

fn train(a: TrainArgs) -> CliResult {
    let RunConfig { net: cfg, train: mut tc } = read_config(a.config.as_deref())?;
    if let Some(n) = a.iters {
        tc.iters = n;
    }
    let hr = match &a.input {
        Some(p) => read_lf(p, a.central)?,
        None => synthetic_lf(LfDims::new(cfg.u, cfg.v, tc.patch, tc.patch, 1), 0.5, cfg.seed)?,
    };
    let d = hr.dims();
    if (d.u, d.v) != (cfg.u, cfg.v) {
        return Err(format!("input has {}x{} views but the config expects {}x{}", d.u, d.v, cfg.u, cfg.v).into());
    }
    let pair = make_pair(&hr, cfg.scale)?;
    let mut net = Net::<f64, ManyToMany>::build(&cfg)?;
    let curve = train_toy(&mut net, &pair, &tc)?;
    if let Some(p) = &a.curve {
        std::fs::write(p, m2mt::io::curve_csv(&curve)).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
    }
    if let Some(p) = &a.out_weights {
        save_weights(&net.params(), p)?;
    }
    if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
        println!("iterations {}", curve.len());
        println!("initial L1 {}", sig6(*first));
        println!("final L1   {}", sig6(*last));
        println!("ratio      {}", sig6(last / first));
    } else {
        println!("iterations 0");
    }
    Ok(())
}

fn init(a: InitArgs) -> CliResult {
    let mut cfg = read_config(a.config.as_deref())?.net;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let named: Vec<(String, Tensor<f64>)> = match (a.o2o, a.zeros) {
        (false, false) => Network::<f64>::build(&cfg)?.params(),
        (false, true) => Network::<f64>::zeros(&cfg)?.params(),
        (true, false) => O2OBaseline::<f64>::build(&cfg)?.params(),
        (true, true) => O2OBaseline::<f64>::zeros(&cfg)?.params(),
    };
    let count: usize = named.iter().map(|p| p.1.len()).sum();
    if a.f64 {
        save_weights(&named, &a.out_weights)?;
    } else {
        let narrow: Vec<(String, Tensor<f32>)> = named.into_iter().map(|(n, t)| (n, t.cast())).collect();
        save_weights(&narrow, &a.out_weights)?;
    }
    let kind = if a.o2o { "one-to-one" } else { "many-to-many" };
    println!("wrote {kind} weights, {count} parameters, to {}", a.out_weights.display());
    Ok(())
}
