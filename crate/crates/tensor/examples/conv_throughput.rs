//! Rough forward+backward throughput of a 3x3 convolution.

use std::time::Instant;

use hytex_tensor::{Conv2dSpec, Graph, Shape, Tensor};
use rand::SeedableRng;

fn main() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(0);
    for &(cin, cout, hw, stride) in &[(16usize, 16usize, 64usize, 1usize), (32, 32, 32, 1), (64, 64, 16, 1), (48, 16, 64, 1), (16, 32, 64, 2)] {
        let x = Tensor::<f32>::uniform(Shape::new(2, cin, hw, hw), -1.0, 1.0, &mut rng);
        let w = Tensor::<f32>::uniform(Shape::new(cout, cin, 3, 3), -0.1, 0.1, &mut rng);
        let reps = 20;
        let t0 = Instant::now();
        for _ in 0..reps {
            let g = Graph::new();
            let xv = g.leaf(x.clone());
            let wv = g.leaf(w.clone());
            let y = xv.conv2d(wv, None, Conv2dSpec { stride, padding: 1 }).sum();
            let _ = g.backward(y);
        }
        let dt = t0.elapsed().as_secs_f64() / reps as f64;
        let ho = hw / stride;
        let macs = 2.0 * (cout * cin * 9 * ho * ho) as f64 * 3.0;
        println!("cin {cin:3} cout {cout:3} hw {hw:3} s{stride}: {:.2} ms  {:.1} GFLOP/s", dt * 1e3, 2.0 * macs / dt / 1e9);
    }
}
