use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use m2mt::io::{load_lf, load_lf_tensor, load_net, load_tensor, parse_curve_csv, save_lf, save_tensor};
use m2mt::network::{bicubic_upsample, AnyNet};
use m2mt::training::{make_pair, synthetic_lf};
use m2mt::{LfDims, LfTensor};
use tempfile::TempDir;

fn m2mt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_m2mt")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = m2mt(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Exit status and the diagnostic, which must be a single line.
fn fails(args: &[&str]) -> (i32, String) {
    let out = m2mt(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "diagnostic is not one line: {err:?}");
    (out.status.code().unwrap(), err)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TOY: &str = "u=5\nv=5\nc=4\nc_cor=8\nn1=1\nn2=1\nscale=2\npatch=8\niters=30\n";

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture { dir: TempDir::new().unwrap() };
        std::fs::write(f.path("toy.cfg"), TOY).unwrap();
        let hr = quantize(&synthetic_lf(LfDims::new(5, 5, 8, 8, 1), 0.5, 1).unwrap());
        save_lf(&hr, &f.path("hr"), 16).unwrap();
        let (lr, _) = make_pair(&hr, 2).unwrap();
        save_lf(&quantize(&lr), &f.path("lr"), 16).unwrap();
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        s(&self.path(name)).to_string()
    }

    fn weights(&self, name: &str, extra: &[&str]) -> String {
        let (out, cfg) = (self.p(name), self.p("toy.cfg"));
        let mut args = vec!["init", "--config", &cfg, "--out-weights", &out];
        args.extend_from_slice(extra);
        ok(&args);
        out
    }
}

fn quantize(lf: &LfTensor<f64>) -> LfTensor<f64> {
    let mut q = lf.clone();
    for x in q.data_mut() {
        *x = (x.clamp(0.0, 1.0) * 65535.0).round() / 65535.0;
    }
    q
}

#[test]
fn init_is_deterministic() {
    let f = Fixture::new();
    let a = f.weights("a.m2mw", &["--seed", "7"]);
    let b = f.weights("b.m2mw", &["--seed", "7"]);
    let c = f.weights("c.m2mw", &["--seed", "8"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let net = load_net::<f32>(Path::new(&a), 5, 5).unwrap();
    assert!(matches!(net, AnyNet::ManyToMany(_)));
    assert_eq!(net.config().c_cor, 8);
    let o = f.weights("o.m2mw", &["--o2o", "--f64"]);
    assert!(matches!(load_net::<f64>(Path::new(&o), 5, 5).unwrap(), AnyNet::OneToOne(_)));
}

#[test]
fn params_default_matches_reference_size() {
    let out = ok(&["params"]);
    let total: f64 = out.lines().find_map(|l| l.strip_prefix("total ")?.strip_suffix(" M")?.parse().ok()).unwrap();
    assert!((total - 3.986).abs() <= 0.3986, "{total}");
    assert!(out.contains("head.0"));
    let o2o = ok(&["params", "--o2o"]);
    assert!(o2o.contains("blocks.0.attn"));
}

#[test]
fn flops_conventions() {
    let total = |out: &str| -> f64 { out.lines().find_map(|l| l.strip_prefix("total ")?.split(' ').next()?.parse().ok()).unwrap() };
    let two = total(&ok(&["flops", "--patch", "32"]));
    let one = total(&ok(&["flops", "--patch", "32", "--mac"]));
    assert!((two - 33.85).abs() <= 0.2 * 33.85, "{two}");
    // softmax and scaling are not multiply-adds, so the ratio sits just below 2
    assert!(two / one > 1.9 && two / one <= 2.0, "{two} / {one}");
    let f = Fixture::new();
    assert!(ok(&["flops", "--config", &f.p("toy.cfg"), "--patch", "8"]).contains("GFLOP on a 8x8 patch"));
}

#[test]
fn zero_weights_reproduce_bicubic_and_score() {
    let f = Fixture::new();
    let w = f.weights("zero.m2mw", &["--zeros"]);
    let out = ok(&["sr", "--weights", &w, "--input", &f.p("lr"), "--output", &f.p("sr.lft"), "--scale", "2"]);
    assert!(out.contains("4x4 -> 8x8"), "{out}");
    let sr = load_lf_tensor::<f64>(&f.path("sr.lft")).unwrap();
    let lr = load_lf(&f.path("lr"), None).unwrap();
    let up = bicubic_upsample(&lr.cast::<f32>(), 2).unwrap().cast::<f64>();
    assert_eq!(sr, up);

    ok(&["sr", "--weights", &w, "--input", &f.p("lr"), "--output", &f.p("sr"), "--ensemble"]);
    let m = ok(&["metrics", "--a", &f.p("sr"), "--b", &f.p("hr"), "--kv"]);
    let psnr: f64 = m.lines().find_map(|l| l.strip_prefix("mean_psnr=")?.parse().ok()).unwrap();
    assert!(psnr.is_finite() && psnr > 10.0, "{psnr}");
    assert!(ok(&["metrics", "--a", &f.p("hr"), "--b", &f.p("hr")]).contains("mean PSNR  inf"));

    let (_, err) = fails(&["sr", "--weights", &w, "--input", &f.p("lr"), "--output", &f.p("x"), "--scale", "4"]);
    assert!(err.contains("--scale 4"), "{err}");
}

#[test]
fn central_crop_of_a_larger_grid() {
    let f = Fixture::new();
    let big = LfTensor::from_fn(LfDims::new(7, 7, 4, 4, 1), |u, v, x, y, _| ((u * 7 + v) * 16 + x * 4 + y) as f64 / 1000.0).unwrap();
    save_tensor(big.tensor(), &f.path("big.lft")).unwrap();
    let w = f.weights("zero.m2mw", &["--zeros"]);
    ok(&["sr", "--weights", &w, "--input", &f.p("big.lft"), "--central", "5", "--output", &f.p("c.lft")]);
    assert_eq!(load_lf_tensor::<f64>(&f.path("c.lft")).unwrap().dims(), LfDims::new(5, 5, 8, 8, 1));
    fails(&["sr", "--weights", &w, "--input", &f.p("big.lft"), "--central", "9", "--output", &f.p("d.lft")]);
}

#[test]
fn lam_locality_through_the_cli() {
    let f = Fixture::new();
    let m2m = f.weights("m2m.m2mw", &["--seed", "3"]);
    let o2o = f.weights("o2o.m2mw", &["--seed", "3", "--o2o"]);
    let di = |out: &str| -> f64 { out.lines().find_map(|l| l.strip_prefix("DI")?.trim().parse().ok()).unwrap() };
    let a = ok(&["lam", "--weights", &m2m, "--input", &f.p("lr"), "--window", "2,2,4", "--steps", "6", "--out-map", &f.p("map.lft"), "--out-heatmap", &f.p("map.pgm")]);
    let b = ok(&["lam", "--weights", &o2o, "--input", &f.p("lr"), "--window", "2,2,4", "--steps", "6"]);
    assert!(di(&a) > di(&b), "{a}\n{b}");
    let map = load_tensor::<f64>(&f.path("map.lft")).unwrap();
    assert_eq!(map.dims(), &[20, 20]);
    assert!(std::fs::read(f.path("map.pgm")).unwrap().starts_with(b"P5"));
    ok(&["lam", "--weights", &m2m, "--input", &f.p("lr"), "--window", "0,0,3", "--view", "0,4", "--steps", "2", "--literal=false"]);
    ok(&["lam", "--weights", &m2m, "--input", &f.p("lr"), "--window", "0,0,3", "--steps", "2", "--literal", "--sigma", "1.5"]);
    fails(&["lam", "--weights", &m2m, "--input", &f.p("lr"), "--window", "1,2"]);
    fails(&["lam", "--weights", &m2m, "--input", &f.p("lr"), "--window", "6,6,4"]);
    fails(&["lam", "--weights", &m2m, "--input", &f.p("lr"), "--window", "0,0,2", "--view", "5,0"]);
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck", "--seed", "0", "--dims", "2,2,4,4"]);
    assert!(out.lines().count() >= 30);
    assert!(!out.contains("FAIL"));
    fails(&["gradcheck", "--dims", "2,2"]);
}

#[test]
fn train_toy_writes_curve_and_weights() {
    let f = Fixture::new();
    let out = ok(&[
        "train-toy", "--config", &f.p("toy.cfg"), "--input", &f.p("hr"), "--iters", "20", "--curve", &f.p("c.csv"), "--out-weights", &f.p("t.m2mw"),
    ]);
    let curve = parse_curve_csv(&std::fs::read_to_string(f.path("c.csv")).unwrap()).unwrap();
    assert_eq!(curve.len(), 20);
    assert!(curve[19] < curve[0]);
    assert!(out.contains("iterations 20"));
    assert!(load_net::<f64>(&f.path("t.m2mw"), 5, 5).is_ok());
    let again = ok(&["train-toy", "--config", &f.p("toy.cfg"), "--input", &f.p("hr"), "--iters", "20"]);
    assert_eq!(out, again);
    ok(&["train-toy", "--config", &f.p("toy.cfg"), "--iters", "2"]);
}

#[test]
fn failures_are_one_line_with_nonzero_exit() {
    let f = Fixture::new();
    assert_eq!(fails(&["params", "--bogus"]).0, 2);
    assert_eq!(fails(&["frobnicate"]).0, 2);
    let (code, err) = fails(&["metrics", "--a", &f.p("missing"), "--b", &f.p("hr")]);
    assert_eq!(code, 1);
    assert!(err.contains("missing"), "{err}");

    std::fs::write(f.path("bad.cfg"), "c=8\nwidth=3\n").unwrap();
    let (_, err) = fails(&["params", "--config", &f.p("bad.cfg")]);
    assert!(err.contains("width"), "{err}");

    std::fs::create_dir(f.path("broken")).unwrap();
    for u in 0..2 {
        for v in 0..2 {
            std::fs::copy(f.path("hr").join(format!("view_u{u}_v{v}.pgm")), f.path("broken").join(format!("view_u{u}_v{v}.pgm"))).unwrap();
        }
    }
    std::fs::write(f.path("broken/view_u1_v1.pgm"), b"P5\n8 8\n255\nshort").unwrap();
    let (_, err) = fails(&["metrics", "--a", &f.p("broken"), "--b", &f.p("broken")]);
    assert!(err.contains("view_u1_v1.pgm"), "{err}");
    std::fs::remove_file(f.path("broken/view_u0_v0.pgm")).unwrap();
    let (_, err) = fails(&["metrics", "--a", &f.p("broken"), "--b", &f.p("broken")]);
    assert!(err.contains("view_u0_v0.pgm"), "{err}");

    std::fs::write(f.path("junk.m2mw"), b"not weights").unwrap();
    fails(&["sr", "--weights", &f.p("junk.m2mw"), "--input", &f.p("lr"), "--output", &f.p("o")]);
    fails(&["metrics", "--a", &f.p("lr"), "--b", &f.p("hr")]);
}
