use num_complex::Complex64;
use pfc_core::random::smooth_random_hermitian;
use pfc_core::*;
use rand::SeedableRng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(16, |s| s.parse().unwrap());
    let tau: f64 = args.get(2).map_or(-0.5, |s| s.parse().unwrap());
    let gamma: f64 = args.get(3).map_or(1.0, |s| s.parse().unwrap());
    let grid = build_lattice(LatticeSpec::periodic(vec![n; 3], vec![1.0, 0., 0., 0., 1.0, 0., 0., 0., 1.0])).unwrap();
    let p = Problem::new(&grid, ModelSpec::LandauBrazovskii { xi: 1.0, tau, gamma }).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut x0 = smooth_random_hermitian(&grid, &mut rng, 0.3, 0.3);
    x0.amplitudes_mut()[0] = Complex64::new(0.0, 0.0);
    let tol = 1e-8;
    let show = |r: &SolverReport| {
        let restarts = r.rows.iter().filter(|x| x.restart).count();
        let steps = r.accepted_steps();
        let (lo, hi) = steps.iter().fold((f64::INFINITY, 0f64), |(a, b), &s| (a.min(s), b.max(s)));
        println!("{:10} E={:.15} g={:.2e} it={} restarts={} term={} t={:.2}s alpha[{lo:.2e},{hi:.2e}] switch={:?}",
            r.method, r.energy.total, r.grad_norm, r.iterations, restarts, r.termination, r.seconds, r.switch_iter);
    };
    let a2 = aabpg_run(&p, x0.clone(), &AabpgConfig { tol, ..Default::default() }).unwrap();
    show(&a2);
    let a4 = aabpg_run(&p, x0.clone(), &AabpgConfig { tol, kernel: aabpg::default_p4_kernel(p.model()), ..Default::default() }).unwrap();
    show(&a4);
    for (scheme, alpha) in [(Scheme::Sis, 0.1), (Scheme::Ssis1, 0.1), (Scheme::Ssis2, 0.1)] {
        let r = baseline_run(&p, x0.clone(), &BaselineConfig { scheme, alpha, tol, max_iter: 20000, ..Default::default() }).unwrap();
        show(&r);
        println!("   oscillates: {}", baseline::energy_oscillates(&r, 1e-12));
    }
    let nw = newton_pcg_run(&p, x0.clone(), &NewtonConfig { tol, ..Default::default() });
    match nw { Ok(r) => show(&r), Err(e) => println!("newton: {e}") }
    let h = hybrid_run(&p, x0.clone(), &HybridConfig {
        first: FirstStage::Aabpg(AabpgConfig::default()),
        switch: SwitchRule { energy_tol: 0.0, grad_tol: 1e-3 },
        newton: NewtonConfig { tol, ..Default::default() },
    }).unwrap();
    show(&h);
}
