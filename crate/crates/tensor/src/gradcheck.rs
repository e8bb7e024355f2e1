//! Central finite-difference gradient checking in 64-bit precision.

use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `|analytic - numeric|_2 / max(|analytic|_2, |numeric|_2)` over the probed entries.
    pub relative_error: f64,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    pub probed: usize,
}

/// Compare reverse-mode gradients of the scalar `f(inputs)` with central
/// differences of step `eps`.
///
/// `probes` limits how many entries of each input are perturbed (spread
/// evenly over the tensor); `None` checks every entry.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], eps: f64, probes: Option<usize>, f: F) -> Vec<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Var<'g, f64>,
{
    let eval = |xs: &[Tensor<f64>]| -> f64 {
        let g = Graph::new();
        let vars: Vec<_> = xs.iter().map(|x| g.constant(x.clone())).collect();
        f(&g, &vars).item()
    };

    let g = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|x| g.leaf(x.clone())).collect();
    let out = f(&g, &vars);
    let grads = g.backward(out);

    let mut reports = Vec::with_capacity(inputs.len());
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.get_or_zero(*var);
        let len = inputs[i].len();
        let count = probes.map_or(len, |p| p.min(len));
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        let mut work = inputs.to_vec();
        for j in 0..count {
            let idx = if count == len { j } else { (j * len) / count };
            let orig = work[i].data()[idx];
            work[i].data_mut()[idx] = orig + eps;
            let up = eval(&work);
            work[i].data_mut()[idx] = orig - eps;
            let down = eval(&work);
            work[i].data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.data()[idx];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        let denom = a2.sqrt().max(n2.sqrt());
        let relative_error = if denom == 0.0 { 0.0 } else { diff2.sqrt() / denom };
        reports.push(GradCheckReport { relative_error, analytic_norm: a2.sqrt(), numeric_norm: n2.sqrt(), probed: count });
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::conv::Conv2dSpec;
    use crate::tensor::Shape;
    use rand::SeedableRng;

    fn rand_t(shape: Shape, seed: u64) -> Tensor<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Tensor::uniform(shape, -1.0, 1.0, &mut rng)
    }

    #[test]
    fn elementwise_chain() {
        let x = rand_t(Shape::new(1, 2, 3, 3), 1);
        let y = rand_t(Shape::new(1, 1, 3, 3), 2);
        let r = check_gradients(&[x, y], 1e-6, None, |_, v| {
            (v[0].sigmoid() * v[1].tanh() + v[0].softplus().sqrt() - v[1].exp().abs()).square().mean()
        });
        for rep in r {
            assert!(rep.relative_error < 1e-7, "{rep:?}");
        }
    }

    #[test]
    fn conv_and_resampling() {
        let x = rand_t(Shape::new(2, 3, 6, 6), 3);
        let w = rand_t(Shape::new(4, 3, 3, 3), 4);
        let b = rand_t(Shape::new(1, 4, 1, 1), 5);
        let r = check_gradients(&[x, w, b], 1e-6, None, |_, v| {
            v[0].conv2d(v[1], Some(v[2]), Conv2dSpec { stride: 2, padding: 1 })
                .upsample_nearest(2)
                .avg_pool(2)
                .leaky_relu(0.2)
                .square()
                .sum()
        });
        for rep in r {
            assert!(rep.relative_error < 1e-6, "{rep:?}");
        }
    }

    #[test]
    fn channel_ops() {
        let x = rand_t(Shape::new(2, 4, 3, 3), 6);
        let t = rand_t(Shape::new(2, 4, 3, 3), 7);
        let r = check_gradients(&[x], 1e-6, None, |g, v| {
            let tt = g.constant(t.clone());
            let a = v[0].softmax_channels() * tt;
            let b = v[0].log_softmax_channels().narrow_channels(1, 2);
            let c = v[0].instance_norm(1e-5).narrow_batch(1, 1);
            a.sum() + b.mean() + (c * c.sigmoid()).sum() + g.cat_channels(&[v[0], v[0]]).sum()
        });
        assert!(r[0].relative_error < 1e-6, "{:?}", r[0]);
    }
}
