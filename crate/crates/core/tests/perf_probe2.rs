use plaqstrat_core::ops;
use plaqstrat_core::rng::rng_from_seed;
use plaqstrat_core::tensor::Tensor;
use rand::Rng;
use std::time::Instant;

fn rt(shape: &[usize], rng: &mut plaqstrat_core::SeedRng) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn conv_layer_timing() {
    let mut rng = rng_from_seed(1);
    for &(h, w, cin, cout, name) in &[
        (96usize, 96usize, 1usize, 8usize, "conv1"),
        (96, 96, 8, 8, "conv2"),
        (32, 32, 8, 16, "conv3"),
        (32, 32, 16, 16, "conv4"),
        (11, 11, 16, 32, "conv5"),
        (11, 11, 32, 32, "conv6"),
    ] {
        let x = rt(&[h, w, cin], &mut rng);
        let k = rt(&[5, 5, cin, cout], &mut rng);
        let b = rt(&[cout], &mut rng);
        let n = 30;
        let t0 = Instant::now();
        for _ in 0..n { let _ = ops::conv2d(&x, &k, &b).unwrap(); }
        let fwd = t0.elapsed().as_secs_f64() / n as f64 * 1e3;
        let g = rt(&[h, w, cout], &mut rng);
        let t1 = Instant::now();
        for _ in 0..n { let _ = ops::conv2d_backward(&x, &k, &g); }
        let bwd = t1.elapsed().as_secs_f64() / n as f64 * 1e3;
        let macs = (h * w * 25 * cin * cout) as f64 / 1e6;
        println!("{name}: {macs:.1} MMAC fwd {fwd:.2} ms ({:.1} GMAC/s) bwd {bwd:.2} ms", macs / fwd);
    }
}
