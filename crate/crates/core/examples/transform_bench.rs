use std::time::Instant;

use pfc_core::random::random_hermitian;
use pfc_core::{build_lattice, LatticeSpec, SpectralTransform};
use rand::SeedableRng;

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let (n, dims) = (args[0], args[1]);
    let mut b = vec![0.0; dims * dims];
    for i in 0..dims {
        b[i * dims + i] = 1.0;
    }
    let g = build_lattice(LatticeSpec::periodic(vec![n; dims], b)).unwrap();
    let t = SpectralTransform::new(&g);
    println!("modes {} sizes {:?}", g.len(), t.sizes());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let f = random_hermitian(&g, &mut rng, 1.0);
    for _ in 0..3 {
        let t0 = Instant::now();
        let s = t.to_physical(&f).unwrap();
        let t1 = Instant::now();
        let back = t.to_spectral(&s).unwrap();
        let t2 = Instant::now();
        println!(
            "inverse {:.3}s forward {:.3}s err {:e}",
            (t1 - t0).as_secs_f64(),
            (t2 - t1).as_secs_f64(),
            back.sub(&f).norm() / f.norm()
        );
    }
}
