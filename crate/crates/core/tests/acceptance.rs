//! Acceptance gate. Each criterion writes one PASS/FAIL line straight to
//! stderr, so the lines show up without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use m2mt::attribution::{diffusion_index, gini, lam, LamConfig};
use m2mt::autodiff::op_gradchecks;
use m2mt::ensemble::{self_ensemble, LfTransform};
use m2mt::layers::random_tensor;
use m2mt::m2mt::BlockOptions;
use m2mt::metrics::{psnr, ssim};
use m2mt::network::{
    bicubic_upsample, count_flops, count_params, FlopConvention, ManyToMany, NetConfig, Network, O2OBaseline, OneToOne,
};
use m2mt::training::{end_to_end_gradcheck, make_pair, synthetic_lf, train_toy, TrainConfig};
use m2mt::{LfDims, LfTensor, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration, budget: Duration) -> bool {
    let in_time = elapsed <= budget;
    let verdict = if pass && in_time { "PASS" } else { "FAIL" };
    let line = format!(
        "[acceptance {id:>2}] {verdict} {name}: {detail} ({:.2}s, budget {}s)\n",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    pass && in_time
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target
}

fn rand_lf(d: LfDims, seed: u64) -> LfTensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LfTensor::from_fn(d, |_, _, _, _, _| rng.gen::<f64>()).unwrap()
}

#[test]
fn criterion_01_parameter_accounting() {
    let t = Instant::now();
    let net = Network::<f32>::zeros(&NetConfig::for_scale(4)).unwrap();
    let rep = count_params(&net);
    let block = rep.per_block[0] as f64;
    let ok = within(rep.total as f64, 3.986e6, 0.10) && within(block, 486e3, 0.10) && within(rep.head_tail as f64, 0.100e6, 0.10);
    let detail = format!(
        "total {} (target 3.986M ±10%), per block {} (486K ±10%), head+tail {} (0.100M ±10%)",
        rep.total, rep.per_block[0], rep.head_tail
    );
    assert!(report(1, "parameter accounting", ok, detail, t.elapsed(), Duration::from_secs(1)));
}

#[test]
fn criterion_02_flop_accounting() {
    let t = Instant::now();
    let net = Network::<f32>::zeros(&NetConfig::for_scale(4)).unwrap();
    let rep = count_flops(&net, 32, 32, FlopConvention::TwoPerMac);
    let (total, block) = (rep.total as f64 / 1e9, rep.per_block as f64 / 1e9);
    let ok = within(total, 33.85, 0.20) && within(block, 3.89, 0.20);
    let detail = format!("total {total:.2}G (target 33.85G ±20%), per block {block:.3}G (3.89G ±20%)");
    assert!(report(2, "FLOP accounting", ok, detail, t.elapsed(), Duration::from_secs(1)));
}

#[test]
fn criterion_03_receptive_field_dichotomy() {
    let t = Instant::now();
    let cfg = NetConfig { u: 5, v: 5, c: 16, c_cor: 32, n1: 2, n2: 2, scale: 2, opts: BlockOptions::default(), seed: 11 };
    let d = LfDims::new(5, 5, 16, 16, 1);
    let lr = rand_lf(d, 1);
    let mut bumped = lr.clone();
    bumped.set(2, 2, 7, 9, 0, lr.at(2, 2, 7, 9, 0) + 0.25);

    let changed = |a: &LfTensor<f64>, b: &LfTensor<f64>| -> Vec<f64> {
        let od = a.dims();
        let n = od.pixels();
        a.data()
            .chunks(n)
            .zip(b.data().chunks(n))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
            .collect()
    };
    let m2m = Network::<f64>::build(&cfg).unwrap();
    let dm = changed(&m2m.forward(&lr).unwrap(), &m2m.forward(&bumped).unwrap());
    let o2o = O2OBaseline::<f64>::build(&cfg).unwrap();
    let doo = changed(&o2o.forward(&lr).unwrap(), &o2o.forward(&bumped).unwrap());

    let m2m_views = dm.iter().filter(|&&x| x > 1e-9).count();
    let o2o_views = doo.iter().filter(|&&x| x != 0.0).count();
    let ok = m2m_views == 25 && o2o_views == 1 && doo[12] != 0.0;
    let detail = format!(
        "M2MT changes {m2m_views}/25 SAIs (min max|Δ| {:.3e}), O2O changes {o2o_views} SAI",
        dm.iter().copied().fold(f64::INFINITY, f64::min)
    );
    assert!(report(3, "receptive-field dichotomy", ok, detail, t.elapsed(), Duration::from_secs(10)));
}

#[test]
fn criterion_04_gradient_correctness() {
    let t = Instant::now();
    let ops = op_gradchecks(0).unwrap();
    let worst_op = ops.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)).unwrap();
    let cfg = NetConfig { u: 2, v: 2, c: 3, c_cor: 5, n1: 2, n2: 1, scale: 2, opts: BlockOptions::default(), seed: 0 };
    let m2m = end_to_end_gradcheck::<ManyToMany>(&cfg, 4, 4, 1e-5).unwrap();
    let o2o = end_to_end_gradcheck::<OneToOne>(&cfg, 4, 4, 1e-5).unwrap();
    let e2e = [m2m.input_rel_error, m2m.param_rel_error, o2o.input_rel_error, o2o.param_rel_error];
    let e2e_worst = e2e.into_iter().fold(0.0, f64::max);
    let ok = worst_op.max_rel_error <= 1e-6 && e2e_worst <= 1e-5;
    let detail = format!(
        "{} op inputs, worst {} {:.2e} (≤1e-6); end-to-end L1 over input and {} params, worst {:.2e} (≤1e-5)",
        ops.len(),
        worst_op.name,
        worst_op.max_rel_error,
        m2m.param_count,
        e2e_worst
    );
    assert!(report(4, "gradient correctness", ok, detail, t.elapsed(), Duration::from_secs(60)));
}

#[test]
fn criterion_05_subspace_bijections() {
    let t = Instant::now();
    let ext = [1usize, 2, 3, 5];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    let mut cases = 0;
    for _ in 0..200 {
        let mut pick = || ext[rng.gen_range(0..ext.len())];
        let d = LfDims::new(pick(), pick(), pick(), pick(), pick());
        let lf = rand_lf(d, cases);
        let (u, v, w, h, c) = (d.u, d.v, d.w, d.h, d.c);
        ok &= LfTensor::from_spatial(&lf.to_spatial(), u, v, w, h).unwrap() == lf;
        ok &= LfTensor::from_angular(&lf.to_angular(), u, v, w, h).unwrap() == lf;
        ok &= LfTensor::from_epi_h(&lf.to_epi_h(), u, v, w, h).unwrap() == lf;
        ok &= LfTensor::from_epi_v(&lf.to_epi_v(), u, v, w, h).unwrap() == lf;
        ok &= LfTensor::from_merged(&lf.to_merged(), u, v, c, w, h).unwrap() == lf;
        ok &= LfTensor::from_macpi(&lf.to_macpi(), u, v, w, h).unwrap() == lf;
        cases += 1;
    }
    let d = LfDims::new(2, 2, 2, 2, 1);
    let lf = LfTensor::from_fn(d, |u, v, x, y, _| ((u * 2 + v) * 2 + x) as f64 * 2.0 + y as f64).unwrap();
    let (sp, an, eh, ev, me, mp) = (lf.to_spatial(), lf.to_angular(), lf.to_epi_h(), lf.to_epi_v(), lf.to_merged(), lf.to_macpi());
    let mut identities = 0;
    for u in 0..2 {
        for v in 0..2 {
            for x in 0..2 {
                for y in 0..2 {
                    let e = lf.at(u, v, x, y, 0);
                    ok &= sp.get(&[u * 2 + v, x * 2 + y, 0]) == e;
                    ok &= an.get(&[x * 2 + y, u * 2 + v, 0]) == e;
                    ok &= eh.get(&[v * 2 + y, u * 2 + x, 0]) == e;
                    ok &= ev.get(&[u * 2 + x, v * 2 + y, 0]) == e;
                    ok &= me.get(&[0, x * 2 + y, u * 2 + v]) == e;
                    ok &= mp.get(&[y * 2 + u, x * 2 + v, 0]) == e;
                    identities += 6;
                }
            }
        }
    }
    let detail = format!("{cases} random shapes x 6 views bit-exact, {identities} element identities at 2x2x2x2");
    assert!(report(5, "subspace bijections", ok, detail, t.elapsed(), Duration::from_secs(5)));
}

#[test]
fn criterion_06_metric_oracles() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a: Tensor<f64> = random_tensor(&mut rng, &[32, 32], 0.0, 0.9);
    let offset = a.map(|x| x + 0.1);
    let p = psnr(&a, &offset, 1.0).unwrap();
    let s = ssim(&a, &a).unwrap();
    let mut last = f64::INFINITY;
    let mut monotone = true;
    for level in [0.01, 0.02, 0.05, 0.1, 0.2] {
        let noisy = Tensor::from_fn(&[32, 32], |i| a.data()[i] + level * (rng.gen::<f64>() - 0.5));
        let q = psnr(&a, &noisy, 1.0).unwrap();
        monotone &= q < last;
        last = q;
    }
    let ok = format!("{p:.6}") == "20.000000" && (s - 1.0).abs() <= 1e-9 && monotone;
    let detail = format!("PSNR(+0.1) = {p:.6} dB, SSIM(a,a) = {s:.12}, PSNR monotone under noise: {monotone}");
    assert!(report(6, "metric oracles", ok, detail, t.elapsed(), Duration::from_secs(5)));
}

fn naive_gini(g: &[f64]) -> f64 {
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let s: f64 = g.iter().flat_map(|a| g.iter().map(move |b| (a - b).abs())).sum();
    s / (2.0 * n * n * mean)
}

#[test]
fn criterion_07_gini_and_diffusion_index() {
    let t = Instant::now();
    let uniform = diffusion_index(gini(&[0.3; 64]).unwrap().unwrap());
    let spike = diffusion_index(gini(&[0.0, 0.0, 5.0, 0.0]).unwrap().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(2..200);
        let g: Vec<f64> = (0..n).map(|_| rng.gen::<f64>().powi(3)).collect();
        worst = worst.max((gini(&g).unwrap().unwrap() - naive_gini(&g)).abs());
    }
    let ok = uniform == 100.0 && spike == 25.0 && worst <= 1e-12;
    let detail = format!("uniform DI = {uniform}, single spike of 4 DI = {spike}, fast vs naive Gini max diff {worst:.1e}");
    assert!(report(7, "DI/Gini oracles", ok, detail, t.elapsed(), Duration::from_secs(5)));
}

#[test]
fn criterion_08_lam_locality() {
    let t = Instant::now();
    let cfg = NetConfig { u: 5, v: 5, c: 8, c_cor: 16, n1: 2, n2: 1, scale: 2, opts: BlockOptions::default(), seed: 3 };
    let lr = synthetic_lf(LfDims::new(5, 5, 32, 32, 1), 0.5, 8).unwrap();
    let lam_cfg = LamConfig::new(5, 5, 24, 24, 16);
    let o2o = lam(&O2OBaseline::<f64>::build(&cfg).unwrap(), &lr, &lam_cfg).unwrap();
    let m2m = lam(&Network::<f64>::build(&cfg).unwrap(), &lr, &lam_cfg).unwrap();
    let target = lam_cfg.window.view;
    let o2o_mass = o2o.view_mass();
    let o2o_local = o2o_mass.iter().enumerate().all(|(i, &m)| (i == target) == (m != 0.0));
    let outside_zero = o2o.field.data().chunks(32 * 32).enumerate().all(|(i, c)| i == target || c.iter().all(|&x| x == 0.0));
    let m2m_views = m2m.view_mass().iter().filter(|&&m| m > 0.0).count();
    let ok = o2o_local && outside_zero && m2m_views >= 20 && m2m.di > o2o.di;
    let detail = format!(
        "O2O support confined to SAI {target}: {}, M2MT nonzero in {m2m_views}/25 SAIs (≥20), DI M2MT {:.4} > O2O {:.4}",
        o2o_local && outside_zero,
        m2m.di,
        o2o.di
    );
    assert!(report(8, "LAM locality", ok, detail, t.elapsed(), Duration::from_secs(300)));
}

#[test]
fn criterion_09_self_ensemble() {
    let t = Instant::now();
    let group = LfTransform::group();
    let lr = rand_lf(LfDims::new(5, 5, 8, 8, 1), 9);
    let identity = self_ensemble(|x| Ok(x.clone()), &lr, &group).unwrap() == lr;

    let cfg = NetConfig { u: 5, v: 5, c: 4, c_cor: 8, n1: 1, n2: 1, scale: 2, opts: BlockOptions::default(), seed: 0 };
    let zero = Network::<f64>::zeros(&cfg).unwrap();
    let ens = self_ensemble(|x| zero.forward(x), &lr, &group).unwrap();
    let up = bicubic_upsample(&lr, 2).unwrap();
    // ulps at unit scale: bicubic taps cancel, so rounding is absolute
    let ulps = ens.data().iter().zip(up.data()).map(|(a, b)| (a - b).abs() / (f64::EPSILON * b.abs().max(1.0))).fold(0.0, f64::max);

    let probe = rand_lf(LfDims::new(3, 3, 4, 4, 1), 10);
    let mut closed = true;
    for a in &group {
        for b in &group {
            let c = a.then(b);
            closed &= group.contains(&c) && c.apply(&probe).unwrap() == b.apply(&a.apply(&probe).unwrap()).unwrap();
        }
    }
    let ok = identity && ulps <= 4.0 && closed;
    let detail = format!("identity map bit-exact: {identity}, zero-weight vs bicubic {ulps:.2} ulp (≤4), 64 compositions closed: {closed}");
    assert!(report(9, "self-ensemble exactness", ok, detail, t.elapsed(), Duration::from_secs(10)));
}

#[test]
fn criterion_10_toy_trainability() {
    let t = Instant::now();
    let cfg = NetConfig { u: 5, v: 5, c: 8, c_cor: 16, n1: 2, n2: 1, scale: 2, opts: BlockOptions::default(), seed: 0 };
    let hr = synthetic_lf(LfDims::new(5, 5, 8, 8, 1), 0.5, 3).unwrap();
    let pair = make_pair(&hr, 2).unwrap();
    let train = TrainConfig { iters: 300, lr: 2e-4, seed: 0, ..TrainConfig::default() };
    let run = || {
        let mut net = Network::<f64>::build(&cfg).unwrap();
        train_toy(&mut net, &pair, &train).unwrap()
    };
    let curve = run();
    let again = run();
    let ratio = curve.last().unwrap() / curve[0];
    let ok = ratio <= 0.10 && curve == again;
    let detail = format!(
        "L1 {:.4} -> {:.4} ({:.1}% of initial, ≤10%) in {} Adam steps, repeat run identical: {}",
        curve[0],
        curve.last().unwrap(),
        ratio * 100.0,
        curve.len(),
        curve == again
    );
    assert!(report(10, "toy trainability", ok, detail, t.elapsed(), Duration::from_secs(300)));
}
