use nalgebra::DMatrix;
use std::time::Instant;
fn main() {
    for n in [900usize, 1806] {
        let a = DMatrix::<f64>::from_fn(n, n + 7, |i, j| ((i * 31 + j * 17) % 101) as f64 / 101.0 - 0.5);
        let m = &a * a.transpose() + DMatrix::<f64>::identity(n, n) * 10.0;
        let t0 = Instant::now();
        let c = nalgebra::Cholesky::new(m.clone()).unwrap();
        let dt = t0.elapsed().as_secs_f64();
        let flops = (n as f64).powi(3) / 3.0;
        println!("chol n={n}: {:.3}s ({:.2} GFLOP/s)", dt, flops / dt / 1e9);
        let t0 = Instant::now();
        let g = &a * a.transpose();
        let dt = t0.elapsed().as_secs_f64();
        println!("gemm {n}x{}: {:.3}s ({:.2} GFLOP/s)  [{:.1}]", n + 7, dt, 2.0 * (n as f64) * (n as f64) * ((n + 7) as f64) / dt / 1e9, g[(0,0)] + c.l()[(0,0)]);
    }
}
