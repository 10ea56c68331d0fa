//! Finite-difference checks of every differentiable op, one input at a time.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::random_tensor;
use crate::ops::{ResizePlan, Window};
use crate::tensor::Tensor;

use super::backend::Backend;
use super::gradcheck::{gradcheck, relative_error};
use super::tape::{Tape, Var};

/// Worst relative error for one op input.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCheck {
    pub name: String,
    pub max_rel_error: f64,
}

type Probe = Box<dyn Fn(&Tape<f64>, Var) -> Result<Var>>;

/// Central-difference steps; each coordinate keeps its best agreement.
pub const OP_STEPS: [f64; 2] = [1e-5, 1e-4];

/// Every op, against each of its differentiable inputs, at random points
/// drawn from `seed`. Outputs are contracted with random weights so that
/// invariants such as softmax rows summing to one do not hide errors.
pub fn op_gradchecks(seed: u64) -> Result<Vec<OpCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |dims: &[usize]| random_tensor::<f64>(&mut rng, dims, -1.0, 1.0);

    let x4 = r(&[2, 4, 3, 3]);
    let k3 = r(&[2, 3, 3, 3]);
    let b2 = r(&[2]);
    let xl = r(&[2, 3, 4]);
    let wl = r(&[4, 5]);
    let bl = r(&[5]);
    let gain = r(&[4]);
    let off = r(&[4]);
    let q = r(&[2, 4, 3]);
    let k = r(&[2, 5, 3]);
    let v = r(&[2, 5, 2]);
    let shuf = r(&[1, 2, 3, 8]);
    let img = r(&[2, 5, 4, 1]);
    let other = r(&[2, 3, 4]);
    let target = r(&[2, 3, 4]);
    // keep the leaky kink out of the central-difference stencil
    let kinky = x4.map(|x| if x.abs() < 1e-3 { 0.5 } else { x });
    let win = Window { view: 1, x: 1, y: 0, l: 2 };
    let plan = ResizePlan::new(5, 4, 2.0)?;

    let c = |t: &Tensor<f64>| t.clone();
    let mut cases: Vec<(&str, Tensor<f64>, Probe)> = Vec::new();
    {
        let (k3c, b2c) = (c(&k3), c(&b2));
        cases.push(("conv2d.input", c(&x4), Box::new(move |t, x| t.conv2d(&x, &t.constant(k3c.clone()), Some(&t.constant(b2c.clone()))))));
        let (x4c, b2c) = (c(&x4), c(&b2));
        cases.push(("conv2d.kernel", c(&k3), Box::new(move |t, k| t.conv2d(&t.constant(x4c.clone()), &k, Some(&t.constant(b2c.clone()))))));
        let (x4c, k3c) = (c(&x4), c(&k3));
        cases.push(("conv2d.bias", c(&b2), Box::new(move |t, b| t.conv2d(&t.constant(x4c.clone()), &t.constant(k3c.clone()), Some(&b)))));
    }
    {
        let (wc, bc) = (c(&wl), c(&bl));
        cases.push(("linear.input", c(&xl), Box::new(move |t, x| t.linear(&x, &t.constant(wc.clone()), Some(&t.constant(bc.clone()))))));
        let (xc, bc) = (c(&xl), c(&bl));
        cases.push(("linear.weight", c(&wl), Box::new(move |t, w| t.linear(&t.constant(xc.clone()), &w, Some(&t.constant(bc.clone()))))));
        let (xc, wc) = (c(&xl), c(&wl));
        cases.push(("linear.bias", c(&bl), Box::new(move |t, b| t.linear(&t.constant(xc.clone()), &t.constant(wc.clone()), Some(&b)))));
    }
    {
        let (gc, oc) = (c(&gain), c(&off));
        cases.push(("layer_norm.input", c(&xl), Box::new(move |t, x| t.layer_norm(&x, &t.constant(gc.clone()), &t.constant(oc.clone())))));
        let (xc, oc) = (c(&xl), c(&off));
        cases.push(("layer_norm.gain", c(&gain), Box::new(move |t, g| t.layer_norm(&t.constant(xc.clone()), &g, &t.constant(oc.clone())))));
        let (xc, gc) = (c(&xl), c(&gain));
        cases.push(("layer_norm.offset", c(&off), Box::new(move |t, o| t.layer_norm(&t.constant(xc.clone()), &t.constant(gc.clone()), &o))));
    }
    {
        let (kc, vc) = (c(&k), c(&v));
        cases.push(("attention.q", c(&q), Box::new(move |t, q| t.attention(&q, &t.constant(kc.clone()), &t.constant(vc.clone())))));
        let (qc, vc) = (c(&q), c(&v));
        cases.push(("attention.k", c(&k), Box::new(move |t, k| t.attention(&t.constant(qc.clone()), &k, &t.constant(vc.clone())))));
        let (qc, kc) = (c(&q), c(&k));
        cases.push(("attention.v", c(&v), Box::new(move |t, v| t.attention(&t.constant(qc.clone()), &t.constant(kc.clone()), &v))));
    }
    cases.push(("softmax", c(&xl), Box::new(|t, x| Ok(t.softmax(&x)))));
    cases.push(("gelu", c(&xl), Box::new(|t, x| Ok(t.gelu(&x)))));
    cases.push(("leaky_relu", kinky, Box::new(|t, x| Ok(t.leaky_relu(&x, 0.1)))));
    cases.push(("pixel_shuffle", shuf, Box::new(|t, x| t.pixel_shuffle(&x, 2))));
    cases.push(("resize", c(&img), Box::new(move |t, x| t.resize(&x, &plan))));
    cases.push(("window_gradient", c(&img), Box::new(move |t, x| t.window_gradient(&x, &win))));
    {
        let oc = c(&other);
        cases.push(("mul", c(&xl), Box::new(move |t, x| t.mul(&x, &t.constant(oc.clone())))));
        let oc = c(&other);
        cases.push(("add", c(&xl), Box::new(move |t, x| t.add(&x, &t.constant(oc.clone())))));
        let xc = c(&xl);
        cases.push(("add_broadcast.input", c(&xl), Box::new(|t, x| t.add_broadcast(&x, &t.constant(Tensor::zeros(&[4]))))));
        cases.push(("add_broadcast.bias", c(&off), Box::new(move |t, b| t.add_broadcast(&t.constant(xc.clone()), &b))));
        cases.push(("permute", c(&xl), Box::new(|t, x| t.permute(&x, &[2, 0, 1]))));
        cases.push(("reshape", c(&xl), Box::new(|t, x| t.reshape(&x, &[6, 4]))));
        cases.push(("scale", c(&xl), Box::new(|t, x| Ok(t.scale(&x, -1.7)))));
        let tc = c(&target);
        cases.push(("l2_loss", c(&xl), Box::new(move |t, x| t.l2_loss(&x, &tc))));
        // shift the target away from the input so no residual sits on the kink
        let tc = c(&target).map(|x| x.signum() * 2.0 + x * 0.1);
        cases.push(("l1_loss", c(&xl), Box::new(move |t, x| t.l1_loss(&x, &tc))));
    }

    let mut out = Vec::with_capacity(cases.len());
    for (name, point, f) in cases {
        let probe_dims = {
            let tape = Tape::new();
            let x = tape.leaf(point.clone());
            let y = f(&tape, x)?;
            tape.dims(&y)
        };
        let weights = random_tensor::<f64>(&mut rng, &probe_dims, 0.5, 1.5);
        let g = |t: &Tape<f64>, x| {
            let y = f(t, x)?;
            let w = t.constant(weights.clone());
            Ok(t.sum(&t.mul(&y, &w)?))
        };
        // coordinates whose gradient nearly cancels are rounding-limited at
        // the default step; a coarser step resolves them
        let mut err = vec![f64::INFINITY; point.len()];
        for step in OP_STEPS {
            let r = gradcheck(g, &point, step)?;
            for ((e, &a), &n) in err.iter_mut().zip(r.analytic.data()).zip(r.numeric.data()) {
                *e = e.min(relative_error(a, n));
            }
        }
        let report = OpCheck { name: name.to_string(), max_rel_error: err.into_iter().fold(0.0, f64::max) };
        out.push(report);
    }
    Ok(out)
}
