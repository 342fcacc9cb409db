//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any fails.
//!
//! A plain argument filters criteria by substring. The sigma check is
//! skipped unless `PFC_ACCEPT_SIGMA=1`; it needs more than 5 GB of memory.

mod common;

use std::time::Instant;

use common::oracles::{bisect, descend, instance, pcg_property_suite, residual, Kernel};
use num_complex::Complex64;
use pfc_core::aabpg::{default_p4_kernel, AabpgStepper};
use pfc_core::baseline::BaselineStepper;
use pfc_core::driver::Stepper;
use pfc_core::run::Prepared;
use pfc_core::{
    acceleration_ratio, check_gradients, hybrid_run, newton_pcg_run, prepare, prox_p2, prox_p4,
    solve_radius_fixed_point, AabpgConfig, BaselineConfig, FirstStage, HybridConfig, NewtonConfig, Problem,
    RunConfig, Scheme, SolverReport, SolverSpec,
};
use rand::Rng;

type Outcome = Result<String, String>;

enum Verdict {
    Pass,
    Fail,
    Skip,
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let sigma = std::env::var("PFC_ACCEPT_SIGMA").is_ok_and(|v| v == "1");
    let mut dg = DgRuns::default();
    let criteria: Vec<(&str, Box<dyn FnMut(&mut DgRuns) -> Option<Outcome>>)> = vec![
        ("derivatives", Box::new(|_| Some(derivatives()))),
        ("prox-oracle", Box::new(|_| Some(prox_oracle()))),
        ("radius-oracle", Box::new(|_| Some(radius_oracle()))),
        ("conservation-dissipation", Box::new(|_| Some(conservation()))),
        ("pcg-properties", Box::new(|_| Some(pcg_properties()))),
        ("dg-reference", Box::new(|dg| Some(dg_reference(dg)))),
        ("qc-reference", Box::new(|_| Some(qc_reference()))),
        ("sigma-reference", Box::new(move |_| sigma.then(sigma_reference))),
        ("hybrid-acceleration", Box::new(|dg| Some(hybrid_acceleration(dg)))),
        ("step-adaptivity", Box::new(|dg| Some(step_adaptivity(dg)))),
    ];
    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for (name, mut check) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let clock = Instant::now();
        let (verdict, detail) = match check(&mut dg) {
            Some(Ok(d)) => (Verdict::Pass, d),
            Some(Err(d)) => (Verdict::Fail, d),
            None => (Verdict::Skip, "set PFC_ACCEPT_SIGMA=1 to run".into()),
        };
        let tag = match verdict {
            Verdict::Pass => {
                passed += 1;
                "PASS"
            }
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
            Verdict::Skip => {
                skipped += 1;
                "SKIP"
            }
        };
        println!("[{tag}] {name}: {detail} ({:.1} s)", clock.elapsed().as_secs_f64());
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 {
        std::process::exit(1);
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn derivatives() -> Outcome {
    let dg = RunConfig::preset("dg").map_err(fail)?;
    let qc = RunConfig::preset("qc").map_err(fail)?;
    let lb = check_gradients(&dg.model, &dg.lattice, 8, 10, 1).map_err(fail)?;
    let lp = check_gradients(&qc.model, &qc.lattice, 6, 10, 2).map_err(fail)?;
    let worst = lb.gradient.max(lb.hessian).max(lp.gradient).max(lp.hessian);
    check(
        worst < 1e-6,
        format!(
            "LB 8^3 gradient {:.1e} hessian {:.1e}, LP 6^4 gradient {:.1e} hessian {:.1e}",
            lb.gradient, lb.hessian, lp.gradient, lp.hessian
        ),
    )
}

fn prox_oracle() -> Outcome {
    let (mut e2, mut e4, mut radius) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..20 {
        let s = instance(seed);
        let z = prox_p2(&s.psi, &s.g, s.alpha, &s.d).map_err(fail)?;
        e2 = e2.max(common::rel_err(&z, &descend(&s.psi, &s.g, s.alpha, &s.d, Kernel { a: 0.0, b: 1.0 })));
        let s = instance(100 + seed);
        let k = Kernel {
            a: 0.25 + 0.1 * seed as f64,
            b: 1.0,
        };
        let (z, p) = prox_p4(&s.psi, &s.g, s.alpha, &s.d, k.a, k.b).map_err(fail)?;
        e4 = e4.max(common::rel_err(&z, &descend(&s.psi, &s.g, s.alpha, &s.d, k)));
        radius = radius.max((z.norm_sq() - p).abs() / p.max(1e-300));
    }
    check(
        e2 < 1e-8 && e4 < 1e-8 && radius < 1e-10,
        format!("P2 error {e2:.1e}, P4 error {e4:.1e}, radius defect {radius:.1e} on 8-mode instances"),
    )
}

fn radius_oracle() -> Outcome {
    let mut rng = common::rng(2024);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let m = rng.gen_range(1..24);
        let beta: Vec<Complex64> = (0..m)
            .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let d: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..50.0)).collect();
        let alpha = 10f64.powf(rng.gen_range(-3.0..1.0));
        let a = 10f64.powf(rng.gen_range(-3.0..1.0));
        let b = 10f64.powf(rng.gen_range(-1.0..1.0));
        let w: Vec<f64> = beta.iter().map(|v| v.norm_sqr()).collect();
        let p = solve_radius_fixed_point(&beta, &d, alpha, a, b).map_err(fail)?;
        let q = bisect(&w, &d, alpha, a, b);
        worst = worst.max((p - q).abs() / q.max(1e-300));
        let top = 2.0 * residual(&w, &d, alpha, a, b, 0.0) + 1.0;
        let samples: Vec<f64> = (0..50).map(|i| residual(&w, &d, alpha, a, b, top * i as f64 / 49.0)).collect();
        if samples.windows(2).any(|s| s[1] >= s[0]) {
            return Err(format!("instance {case}: R not strictly decreasing"));
        }
    }
    check(worst <= 1e-12, format!("1000 instances, worst relative gap to bisection {worst:.1e}"))
}

/// Steps `stepper` to convergence, checking mass and the dissipation bound
/// `drop >= bound |x+ - x|^2` on every accepted step. Returns the step count.
fn dissipates<S: Stepper>(mut stepper: S, problem: &Problem, bound: f64, steps: usize) -> Result<usize, String> {
    for k in 0..steps {
        if stepper.gradient().projected_norm() < 1e-8 {
            return Ok(k);
        }
        let before = stepper.current().clone();
        let info = stepper.step().map_err(fail)?;
        let after = stepper.current();
        if after.field.amplitudes()[0] != Complex64::new(0.0, 0.0) {
            return Err(format!("{}: mass {} at step {k}", stepper.label(), after.field.amplitudes()[0]));
        }
        if !info.accepted {
            continue;
        }
        let (e0, e1) = (before.energy.total, after.energy.total);
        if e1 > e0 + 1e-12 * e0.abs() {
            return Err(format!("{}: energy rose from {e0} to {e1} at step {k}", stepper.label()));
        }
        let drop = problem.energy_drop(&before, after);
        let dist = before.field.sub(&after.field).norm_sq();
        if drop < bound * dist - 1e-12 * e0.abs() {
            return Err(format!("{}: drop {drop:e} below {:e} at step {k}", stepper.label(), bound * dist));
        }
    }
    Ok(steps)
}

/// Newton-phase iterates, checked by truncating the run after each step.
fn newton_iterates(run: impl Fn(usize) -> pfc_core::Result<SolverReport>) -> Result<usize, String> {
    let full = run(usize::MAX).map_err(fail)?;
    let rows = &full.rows;
    if rows.windows(2).any(|w| w[1].energy > w[0].energy + 1e-12 * w[0].energy.abs()) {
        return Err(format!("{}: energy trace rises", full.method));
    }
    let newton = rows.iter().filter(|r| r.phase == pfc_core::Phase::Newton && r.mu.is_some()).count();
    for k in 0..=newton {
        let r = run(k).map_err(fail)?;
        if r.field.amplitudes()[0] != Complex64::new(0.0, 0.0) {
            return Err(format!("{}: mass after {k} Newton steps", r.method));
        }
    }
    if !full.converged() {
        return Err(format!("{}: {}", full.method, full.termination));
    }
    Ok(newton)
}

fn conservation() -> Outcome {
    let prepared = prepare(&RunConfig::preset("smoke").map_err(fail)?).map_err(fail)?;
    let (p, x0) = (&prepared.problem, &prepared.initial);
    let mut notes = Vec::new();
    for (label, kernel) in [("AA-BPG-2", None), ("AA-BPG-4", Some(default_p4_kernel(p.model())))] {
        let mut config = AabpgConfig::default();
        if let Some(k) = kernel {
            config.kernel = k;
        }
        let (c, eta) = config.constants(p.grid().len());
        let s = AabpgStepper::new(p, x0.clone(), config).map_err(fail)?;
        let n = dissipates(s, p, c.min(eta), 5000)?;
        notes.push(format!("{label} {n}"));
    }
    for scheme in [Scheme::Sis, Scheme::Ssis1, Scheme::Ssis2] {
        let config = BaselineConfig { scheme, ..Default::default() };
        let s = BaselineStepper::new(p, x0.clone(), config).map_err(fail)?;
        let label = s.label();
        let n = dissipates(s, p, 0.0, 20_000)?;
        notes.push(format!("{label} {n}"));
    }
    let n = newton_iterates(|k| {
        newton_pcg_run(p, x0.clone(), &NewtonConfig { tol: 1e-8, max_iter: k, ..Default::default() })
    })?;
    notes.push(format!("Newton {n}"));
    let smoke = RunConfig::preset("smoke").map_err(fail)?;
    let n = newton_iterates(|k| {
        let config = HybridConfig {
            first: FirstStage::Aabpg(AabpgConfig::default()),
            switch: smoke.switch_rule(),
            newton: NewtonConfig { tol: 1e-8, max_iter: k, ..Default::default() },
        };
        hybrid_run(p, x0.clone(), &config)
    })?;
    notes.push(format!("N-AA-BPG-2 {n} Newton"));
    Ok(format!("16^3 smoke, steps to 1e-8: {}", notes.join(", ")))
}

fn pcg_properties() -> Outcome {
    let rep = pcg_property_suite(100, 50)?;
    Ok(format!(
        "100 SPD systems of size 50: bounds hold, residual identity {:.1e}, <x,b> drop within conjugacy defect \
         (raw {:.1e}, defect-free {:.1e} relative)",
        rep.residual_defect, rep.raw_decrease, rep.energy_decrease
    ))
}

const DG_TOL: f64 = 1e-8;

#[derive(Default)]
struct DgRuns {
    prepared: Option<Prepared>,
    config: Option<RunConfig>,
    reports: Vec<(String, Result<SolverReport, String>)>,
}

impl DgRuns {
    fn get(&mut self, label: &str) -> Result<&SolverReport, String> {
        if self.prepared.is_none() {
            let config = RunConfig::preset("dg").map_err(fail)?;
            self.prepared = Some(prepare(&config).map_err(fail)?);
            self.config = Some(config);
        }
        if !self.reports.iter().any(|(l, _)| l == label) {
            let (config, prepared) = (self.config.as_ref().unwrap(), self.prepared.as_ref().unwrap());
            let result = SolverSpec::from_label(label, &config.model, config.switch_rule())
                .and_then(|mut spec| {
                    spec.set_tol(DG_TOL);
                    spec.run(&prepared.problem, prepared.initial.clone())
                })
                .map_err(fail);
            self.reports.push((label.to_string(), result));
        }
        let (_, r) = self.reports.iter().find(|(l, _)| l == label).unwrap();
        r.as_ref().map_err(Clone::clone)
    }

    fn reference(&self) -> Result<f64, String> {
        let config = RunConfig::preset("dg").map_err(fail)?;
        config.reference_energy.ok_or_else(|| "dg preset has no reference energy".into())
    }
}

fn relative(e: f64, reference: f64) -> f64 {
    (e - reference).abs() / reference.abs()
}

fn dg_reference(dg: &mut DgRuns) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for label in ["aabpg2", "aabpg4", "n-aabpg2"] {
        let reference = dg.reference()?;
        let r = dg.get(label)?;
        let err = relative(r.energy.total, reference);
        ok &= r.converged() && err < 1e-8;
        notes.push(format!(
            "{} E = {:.14} (error {err:.1e}, {} iterations, {:.0} s, {})",
            r.method, r.energy.total, r.iterations, r.seconds, r.termination
        ));
    }
    check(ok, notes.join("; "))
}

fn qc_reference() -> Outcome {
    let config = RunConfig::preset("qc").map_err(fail)?;
    let prepared = prepare(&config).map_err(fail)?;
    let r = config.solver.run(&prepared.problem, prepared.initial).map_err(fail)?;
    let err = relative(r.energy.total, config.reference_energy.unwrap());
    check(
        r.converged() && err < 1e-8,
        format!(
            "{} on 38^4: E = {:.14} (error {err:.1e}, {} iterations, {:.0} s)",
            r.method, r.energy.total, r.iterations, r.seconds
        ),
    )
}

fn sigma_reference() -> Outcome {
    let config = RunConfig::preset("sigma").map_err(fail)?;
    let prepared = prepare(&config).map_err(fail)?;
    let r = config.solver.run(&prepared.problem, prepared.initial).map_err(fail)?;
    let err = relative(r.energy.total, config.reference_energy.unwrap());
    check(
        r.converged() && err < 1e-8,
        format!("{}: E = {:.14} (error {err:.1e}, {:.0} s)", r.method, r.energy.total, r.seconds),
    )
}

fn hybrid_acceleration(dg: &mut DgRuns) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for (plain, hybrid) in [("sis", "n-sis"), ("aabpg2", "n-aabpg2")] {
        let p = dg.get(plain)?.clone();
        let h = dg.get(hybrid)?;
        let ratio = acceleration_ratio(&p, h).map_err(fail)?;
        ok &= ratio > 1.0;
        notes.push(format!("{} {:.0} s vs {} {:.0} s, ratio {ratio:.2}", p.method, p.seconds, h.method, h.seconds));
    }
    check(ok, format!("DG to gradient {DG_TOL:.0e}: {}", notes.join("; ")))
}

fn step_adaptivity(dg: &mut DgRuns) -> Outcome {
    let r = dg.get("aabpg2")?;
    let steps = r.accepted_steps();
    let lo = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = steps.iter().copied().fold(0.0f64, f64::max);
    let distinct = steps.windows(2).filter(|w| w[0] != w[1]).count();
    check(
        hi >= 10.0 * lo && distinct > 0,
        format!("{} accepted steps on DG span [{lo:.2e}, {hi:.2e}], {distinct} changes", steps.len()),
    )
}
