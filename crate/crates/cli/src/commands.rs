//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use poisson_bell::analysis::{bell_samples, check_bell_shape, check_rogers, BellOptions, ShapeReport};
use poisson_bell::closedform::{classical_kernel, cs_kernel, HomogeneousKernelParams, SmoothProfile};
use poisson_bell::factorization::{self, log_grid, FactorizationReport};
use poisson_bell::kernel::{build_kernel, cdf, invert, spectrum_for, KernelEstimate, KernelOptions, Smoothing};
use poisson_bell::montecarlo::{
    estimate_charfn, hit_positions, hit_probability, ks_statistic, simulate_batch, Outcome, PathConfig,
};
use poisson_bell::spectral::{bounded_value_at, prepare_mesh, rogers_sample, PsiSource, SolverOptions};
use poisson_bell::{Complex64 as C64, Height, OperatorSpec};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::manifest::{Run, RunManifest};
use crate::{Context, Failure, Family, KernelGrid, XiGrid};

fn load_spec(path: &Path) -> Result<(OperatorSpec, Value), Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    let spec = OperatorSpec::from_json(&text)?;
    let value = serde_json::to_value(&spec).expect("spec serialises");
    Ok((spec, value))
}

fn kernel_options(grid: &KernelGrid, ctx: &Context, smoothing: Option<f64>) -> KernelOptions {
    KernelOptions {
        x_window: grid.x_window,
        smoothing: smoothing.map_or(Smoothing::Auto, Smoothing::Fixed),
        exec: ctx.exec,
        ..Default::default()
    }
}

fn xi_grid(xi: &XiGrid) -> Result<Vec<f64>, Failure> {
    if !(xi.xi_min > 0.0 && xi.xi_max > xi.xi_min && xi.xi_count >= 2) {
        return Err(Failure::invalid("need 0 < xi-min < xi-max and xi-count >= 2"));
    }
    Ok(log_grid(xi.xi_min, xi.xi_max, xi.xi_count))
}

fn finish(run: Run, pass: bool, what: &str) -> Result<(), Failure> {
    let hash = run.finish()?;
    println!("manifest {hash}");
    if pass {
        println!("{what}: pass");
        Ok(())
    } else {
        Err(Failure::verification(format!("{what}: FAIL")))
    }
}

fn estimate(spec: &OperatorSpec, y: f64, order: u32, opts: &KernelOptions) -> Result<KernelEstimate, Failure> {
    if order == 0 {
        return Ok(build_kernel(spec, y, opts)?);
    }
    let (samples, t) = spectrum_for(spec, y, opts)?;
    let mut k = invert(&samples, t, order, opts.padding, opts.tail_tol.max(1e-10))?;
    k.provenance = spec.fingerprint();
    Ok(k)
}

fn bell_report(spec: &OperatorSpec, y: f64, bell: &BellOptions, opts: &KernelOptions) -> Result<ShapeReport, Failure> {
    let t_min = bell.t_list.iter().copied().fold(f64::INFINITY, f64::min);
    let samples = bell_samples(spec, y, t_min, bell.n_max, opts)?;
    Ok(check_bell_shape(&samples, bell)?)
}

#[allow(clippy::too_many_arguments)]
pub fn kernel(
    ctx: &Context,
    spec_path: &Path,
    y: f64,
    grid: &KernelGrid,
    smoothing: Option<f64>,
    order: u32,
    bellshape: Option<u32>,
    t: Vec<f64>,
) -> Result<(), Failure> {
    let (spec, spec_json) = load_spec(spec_path)?;
    let opts = kernel_options(grid, ctx, smoothing);
    let params = json!({ "y": y, "x_window": grid.x_window, "smoothing": smoothing, "order": order, "bellshape": bellshape, "t": t });
    let tolerances =
        json!({ "tail_tol": opts.tail_tol, "solver_tol": opts.solver.tol, "sign_tol": BellOptions::default().rel_tol });
    let mut run = Run::new(RunManifest::new("kernel", Some(spec_json), params, tolerances), &ctx.out, ctx.workers);

    let k = estimate(&spec, y, order, &opts)?;
    let shape = match bellshape {
        Some(n_max) => Some(bell_report(&spec, y, &BellOptions { n_max, t_list: t, ..Default::default() }, &opts)?),
        None => None,
    };
    let pass = shape.as_ref().is_none_or(ShapeReport::pass);
    println!("kernel at y = {y}: mass {:.12}, smoothing t = {:e}, {} points", k.mass, k.smoothing_t, k.values.len());
    if let Some(s) = &shape {
        println!("bell shape: {}", s.verdict);
    }
    run.csv("kernel.csv", k.to_csv());
    run.json(
        "kernel.json",
        json!({
            "y": k.y,
            "order": k.order,
            "mass": k.mass,
            "smoothing_t": k.smoothing_t,
            "xi_cutoff": k.xi_cutoff,
            "imag_residue": k.imag_residue,
            "l2_norm_sq": k.l2_norm_sq,
            "shape": shape,
            "pass": pass,
        }),
    );
    finish(run, pass, "kernel")
}

fn factorization_reports(
    spec: &OperatorSpec,
    splits: &[f64],
    grid: &[f64],
    ctx: &Context,
) -> Result<Vec<FactorizationReport>, Failure> {
    splits
        .iter()
        .map(|&r| Ok(factorization::verify_factorization(spec, r, grid, &SolverOptions::default(), ctx.exec)?))
        .collect()
}

/// Full verdict on one factorisation report: residuals, Rogers halves and
/// `ψ̌(0⁺) = 1/(2Ř)`.
fn factorization_pass(r: &FactorizationReport, tol: f64) -> bool {
    let expect = 0.5 / r.check_r;
    r.pass(tol) && (r.psi_check_at_zero - expect).abs() <= 1e-6 * expect
}

fn factorization_csv(reports: &[FactorizationReport]) -> String {
    let mut s = String::from("split,xi,residual,boundary_residual,interior_residual\n");
    for r in reports {
        for (k, xi) in r.xi_grid.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e}",
                r.check_r, xi, r.residuals[k], r.boundary_residuals[k], r.interior_residuals[k]
            );
        }
    }
    s
}

pub fn verify_factorization(
    ctx: &Context,
    spec_path: &Path,
    splits: &[f64],
    xi: &XiGrid,
    tol: f64,
) -> Result<(), Failure> {
    let (spec, spec_json) = load_spec(spec_path)?;
    let grid = xi_grid(xi)?;
    let params = json!({ "split": splits, "xi_min": xi.xi_min, "xi_max": xi.xi_max, "xi_count": xi.xi_count });
    let tolerances = json!({ "residual": tol, "rogers": 1e-9, "psi_check_at_zero": 1e-6 });
    let mut run =
        Run::new(RunManifest::new("verify-factorization", Some(spec_json), params, tolerances), &ctx.out, ctx.workers);
    let reports = factorization_reports(&spec, splits, &grid, ctx)?;
    let mut pass = true;
    for r in &reports {
        let ok = factorization_pass(r, tol);
        println!(
            "split {}: residual {:.2e}, boundary {:.2e}, interior {:.2e}, psi_check(0) {:.8}, rogers {}/{} -> {}",
            r.check_r,
            r.max_residual,
            r.max_boundary_residual,
            r.max_interior_residual,
            r.psi_check_at_zero,
            r.rogers_check.pass,
            r.rogers_hat.pass,
            if ok { "pass" } else { "FAIL" }
        );
        pass &= ok;
    }
    run.csv("factorization.csv", factorization_csv(&reports));
    run.json("factorization.json", json!({ "reports": reports, "tol": tol, "pass": pass }));
    finish(run, pass, "factorisation")
}

#[derive(Serialize)]
struct BellCase {
    y: f64,
    report: ShapeReport,
}

pub fn verify_bellshape(
    ctx: &Context,
    spec_path: &Path,
    ys: &[f64],
    n_max: u32,
    t: Vec<f64>,
    grid: &KernelGrid,
) -> Result<(), Failure> {
    let (spec, spec_json) = load_spec(spec_path)?;
    let bell = BellOptions { n_max, t_list: t, ..Default::default() };
    let opts = kernel_options(grid, ctx, None);
    let params = json!({ "y": ys, "n_max": n_max, "t": bell.t_list, "x_window": grid.x_window });
    let tolerances = json!({ "sign_tol": bell.rel_tol, "tail_tol": bell.tail_tol });
    let mut run =
        Run::new(RunManifest::new("verify-bellshape", Some(spec_json), params, tolerances), &ctx.out, ctx.workers);
    let cases = ys
        .iter()
        .map(|&y| Ok(BellCase { y, report: bell_report(&spec, y, &bell, &opts)? }))
        .collect::<Result<Vec<_>, Failure>>()?;
    for c in &cases {
        println!("y = {}: {}", c.y, c.report.verdict);
    }
    let pass = cases.iter().all(|c| c.report.pass());
    run.json("bellshape.json", json!({ "cases": cases, "pass": pass }));
    finish(run, pass, "bell shape")
}

fn parse_params(text: &str) -> Result<Map<String, Value>, Failure> {
    let mut map = Map::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) =
            item.split_once('=').ok_or_else(|| Failure::invalid(format!("expected key=value, got `{item}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| Failure::invalid(format!("`{item}`: value is not a number")))?;
        map.insert(k.trim().to_string(), json!(v));
    }
    Ok(map)
}

pub fn closed_form(
    ctx: &Context,
    family: Family,
    params: &str,
    x_min: f64,
    x_max: f64,
    points: usize,
) -> Result<(), Failure> {
    let map = parse_params(params)?;
    let get = |key: &str, default: Option<f64>| -> Result<f64, Failure> {
        map.get(key)
            .and_then(Value::as_f64)
            .or(default)
            .ok_or_else(|| Failure::invalid(format!("missing parameter `{key}`")))
    };
    if !(points >= 2 && x_max > x_min) {
        return Err(Failure::invalid("need points >= 2 and x-max > x-min"));
    }
    let xs: Vec<f64> = (0..points).map(|i| x_min + (x_max - x_min) * i as f64 / (points - 1) as f64).collect();
    let (name, values): (&str, Vec<f64>) = match family {
        Family::Classical => {
            let (d, y) = (get("d", Some(1.0))? as usize, get("y", Some(1.0))?);
            let x0 = vec![0.0; d];
            let v = xs
                .iter()
                .map(|&x| profile_point(d, x, |p| classical_kernel(d, p, y, &x0)))
                .collect::<Result<_, _>>()?;
            ("classical", v)
        }
        Family::Cs => {
            let (d, y, alpha) = (get("d", Some(1.0))? as usize, get("y", Some(1.0))?, get("alpha", None)?);
            let x0 = vec![0.0; d];
            let v = xs
                .iter()
                .map(|&x| profile_point(d, x, |p| cs_kernel(d, alpha, p, y, &x0)))
                .collect::<Result<_, _>>()?;
            ("cs", v)
        }
        Family::Homogeneous => {
            let h = HomogeneousKernelParams::new(get("p", None)?, get("q", None)?, get("mu", None)?)?;
            let v = match map.get("y").and_then(Value::as_f64) {
                Some(y) => xs.iter().map(|&x| h.fourier_kernel(y, x)).collect(),
                None => xs.iter().map(|&x| h.value(x)).collect(),
            };
            ("homogeneous", v)
        }
    };
    let dx = xs[1] - xs[0];
    let window_mass = dx * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[points - 1]));
    let parameters = json!({ "family": name, "params": map, "x_min": x_min, "x_max": x_max, "points": points });
    let mut run = Run::new(RunManifest::new("closed-form", None, parameters, json!({})), &ctx.out, ctx.workers);
    let mut csv = String::from("x,value\n");
    for (x, v) in xs.iter().zip(&values) {
        let _ = writeln!(csv, "{x},{v}");
    }
    println!("{name}: {points} points on [{x_min}, {x_max}], mass in window {window_mass:.8}");
    run.csv("closed_form.csv", csv);
    run.json("closed_form.json", json!({ "family": name, "params": map, "window_mass": window_mass }));
    finish(run, true, "closed form")
}

/// Value along the first coordinate axis in dimension `d`.
fn profile_point(d: usize, x: f64, f: impl Fn(&[f64]) -> poisson_bell::Result<f64>) -> Result<f64, Failure> {
    let mut p = vec![0.0; d.max(1)];
    p[0] = x;
    Ok(f(&p)?)
}

pub struct SimulateArgs {
    pub y0: f64,
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub max_time: f64,
    pub epsilon: Option<f64>,
    pub xi: Vec<f64>,
    pub ks_tol: Option<f64>,
}

#[derive(Serialize)]
struct CharfnRow {
    xi: f64,
    estimate: [f64; 2],
    std_error: f64,
    exact: [f64; 2],
    z: f64,
}

pub fn simulate(ctx: &Context, spec_path: &Path, args: &SimulateArgs, grid: &KernelGrid) -> Result<(), Failure> {
    let (spec, spec_json) = load_spec(spec_path)?;
    if args.paths < 2 {
        return Err(Failure::invalid(format!("need at least 2 paths, got {}", args.paths)));
    }
    if args.xi.iter().any(|x| !(*x > 0.0)) {
        return Err(Failure::invalid("frequencies must be positive"));
    }
    let config = PathConfig {
        spec: spec.clone(),
        y0: args.y0,
        dt: args.dt,
        max_time: args.max_time,
        seed: args.seed,
        epsilon: args.epsilon,
    };
    config.validate()?;
    let parameters = json!({
        "y0": args.y0, "paths": args.paths, "dt": args.dt, "max_time": args.max_time,
        "epsilon": config.band(), "xi": args.xi, "x_window": grid.x_window,
    });
    let tolerances = json!({ "charfn_sigmas": 3.0, "hit_sigmas": 3.0, "ks": args.ks_tol });
    let mut manifest = RunManifest::new("simulate", Some(spec_json), parameters, tolerances);
    manifest.seed = Some(args.seed);
    let mut run = Run::new(manifest, &ctx.out, ctx.workers);

    let samples = simulate_batch(&config, args.paths, ctx.exec)?;
    let xi_min = args.xi.iter().copied().fold(1.0, f64::min);
    let mesh = prepare_mesh(&spec, xi_min, &[args.y0], &SolverOptions::default())?;
    let j = mesh.node_index(args.y0).expect("required node");
    let exact = |xi: f64| bounded_value_at(&mesh, C64::new(xi, 0.0), j);

    let (p, p_se) = hit_probability(&samples);
    let p_exact = exact(0.0)?.re;
    let hit_z = (p - p_exact).abs() / p_se.max(f64::MIN_POSITIVE);
    let hit_ok = (p - p_exact).abs() <= 3.0 * p_se;

    let hits = hit_positions(&samples);
    let mut charfn = Vec::new();
    let mut ks = None;
    let mut ks_tol = None;
    if hits.len() >= 2 {
        for e in estimate_charfn(&samples, &args.xi)? {
            let phi = exact(e.xi)?;
            let z = (e.value - phi).norm() / e.std_error.max(f64::MIN_POSITIVE);
            charfn.push(CharfnRow {
                xi: e.xi,
                estimate: [e.value.re, e.value.im],
                std_error: e.std_error,
                exact: [phi.re, phi.im],
                z,
            });
        }
        let k = build_kernel(&spec, args.y0, &kernel_options(grid, ctx, None))?;
        let law = cdf(&k.mirrored())?;
        ks = Some(ks_statistic(&hits, |x| law.eval(x)));
        ks_tol = Some(args.ks_tol.unwrap_or_else(|| 0.01f64.max(1.63 / (hits.len() as f64).sqrt())));
    }
    let charfn_ok = charfn.iter().all(|r| r.z <= 3.0);
    let ks_ok = match (ks, ks_tol) {
        (Some(d), Some(tol)) => d <= tol,
        _ => true,
    };
    let censored = samples.iter().filter(|s| s.outcome == Outcome::Censored).count();
    let pass = hit_ok && charfn_ok && ks_ok;

    println!("P(hit 0) = {p:.5} +- {p_se:.5} (spectral {p_exact:.5}, {hit_z:.2} sigma), {censored} censored");
    for r in &charfn {
        println!("charfn xi = {}: |error| = {:.2} sigma", r.xi, r.z);
    }
    if let (Some(d), Some(tol)) = (ks, ks_tol) {
        println!("KS distance {d:.5} (tolerance {tol:.5})");
    }

    let mut csv = String::from("outcome,x,t\n");
    for s in &samples {
        let (tag, x) = match s.outcome {
            Outcome::Hit0 { x } => ("hit0", x.to_string()),
            Outcome::HitR => ("hit_r", String::new()),
            Outcome::Censored => ("censored", String::new()),
        };
        let _ = writeln!(csv, "{tag},{x},{}", s.elapsed);
    }
    run.csv("samples.csv", csv);
    run.json(
        "simulate.json",
        json!({
            "paths": args.paths,
            "hits": hits.len(),
            "censored": censored,
            "hit_probability": { "estimate": p, "std_error": p_se, "exact": p_exact, "z": hit_z, "pass": hit_ok },
            "charfn": { "rows": charfn, "pass": charfn_ok },
            "ks": { "distance": ks, "tol": ks_tol, "pass": ks_ok },
            "pass": pass,
        }),
    );
    finish(run, pass, "simulation")
}

fn rogers_grid(xi: &XiGrid, angle: Option<f64>) -> Result<Vec<C64>, Failure> {
    let radii = xi_grid(xi)?;
    let mut grid: Vec<C64> = radii.iter().map(|&r| C64::new(r, 0.0)).collect();
    if let Some(a) = angle {
        if !(a.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(Failure::invalid("angle must lie in (-pi/2, pi/2)"));
        }
        for s in [a, -a] {
            grid.extend(radii.iter().map(|&r| C64::from_polar(r, s)));
        }
    }
    Ok(grid)
}

pub fn rogers(ctx: &Context, spec_path: &Path, xi: &XiGrid, angle: Option<f64>, tol: f64) -> Result<(), Failure> {
    let (spec, spec_json) = load_spec(spec_path)?;
    let grid = rogers_grid(xi, angle)?;
    let params = json!({ "xi_min": xi.xi_min, "xi_max": xi.xi_max, "xi_count": xi.xi_count, "angle": angle });
    let mut run =
        Run::new(RunManifest::new("rogers", Some(spec_json), params, json!({ "rogers": tol })), &ctx.out, ctx.workers);
    let mesh = prepare_mesh(&spec, xi.xi_min, &[], &SolverOptions::default())?;
    let sample = rogers_sample(&mesh, &grid, PsiSource::BoundaryDerivative, ctx.exec)?;
    let verdict = check_rogers(&sample, tol);
    println!("min Re(psi/xi) = {:.3e} at xi = {}", verdict.min_ratio, verdict.worst_xi);
    let mut csv = String::from("xi_re,xi_im,psi_re,psi_im\n");
    for (x, p) in sample.xi_grid.iter().zip(&sample.psi) {
        let _ = writeln!(csv, "{},{},{},{}", x.re, x.im, p.re, p.im);
    }
    run.csv("rogers.csv", csv);
    run.json("rogers.json", &verdict);
    finish(run, verdict.pass, "Rogers")
}

/// Defaults for `verify`: split points and kernel heights that avoid atoms.
fn default_points(spec: &OperatorSpec, fractions: &[f64]) -> Vec<f64> {
    let scale = match spec.height {
        Height::Finite(r) => r,
        Height::Infinite => 1.0,
    };
    fractions
        .iter()
        .map(|f| f * scale)
        .map(|y| {
            if spec.atoms.iter().any(|a| (a.y - y).abs() < 1e-9 || (a.y - 0.5 * y).abs() < 1e-9) {
                1.01 * y
            } else {
                y
            }
        })
        .collect()
}

/// Multiplies `φ` by `cos²(3ξ/2)`, which turns the kernel into three
/// separated bumps; used only to exercise the failure path.
fn corrupt(values: &mut [C64], dxi: f64) {
    for (k, v) in values.iter_mut().enumerate() {
        *v *= (1.5 * k as f64 * dxi).cos().powi(2);
    }
}

pub fn verify(
    ctx: &Context,
    spec_path: &Path,
    splits: Vec<f64>,
    ys: Vec<f64>,
    tol: f64,
    grid: &KernelGrid,
    inject_fault: bool,
) -> Result<(), Failure> {
    let (spec, spec_json) = load_spec(spec_path)?;
    let finite = spec.height.is_finite();
    let splits = if splits.is_empty() {
        default_points(&spec, if finite { &[0.25, 0.5, 0.75] } else { &[0.5, 1.0, 2.0] })
    } else {
        splits
    };
    let ys = if ys.is_empty() { default_points(&spec, &[0.1, 0.5, 0.9]) } else { ys };
    let bell = BellOptions::default();
    let opts = kernel_options(grid, ctx, None);
    let params = json!({ "split": splits, "y": ys, "x_window": grid.x_window, "inject_fault": inject_fault });
    let tolerances = json!({ "residual": tol, "rogers": 1e-9, "psi_check_at_zero": 1e-6, "sign_tol": bell.rel_tol });
    let mut run = Run::new(RunManifest::new("verify", Some(spec_json), params, tolerances), &ctx.out, ctx.workers);

    let xi = log_grid(0.05, 20.0, 60);
    let mut reports = factorization_reports(&spec, &splits, &xi, ctx)?;
    if inject_fault {
        for r in &mut reports {
            for k in 0..r.lhs.len() {
                r.lhs[k] *= 1.0 + 1e-3 * r.xi_grid[k];
                r.residuals[k] = (r.lhs[k] - r.factor1[k] * r.factor2[k]).norm() / r.lhs[k].norm();
            }
            r.max_residual = r.residuals.iter().copied().fold(0.0, f64::max);
        }
    }
    let fact_ok = reports.iter().all(|r| factorization_pass(r, tol));
    println!("factorisation at {} split points: {}", reports.len(), if fact_ok { "pass" } else { "FAIL" });

    let mut cases = Vec::new();
    for &y in &ys {
        let t_min = bell.t_list.iter().copied().fold(f64::INFINITY, f64::min);
        let mut samples = bell_samples(&spec, y, t_min, bell.n_max, &opts)?;
        if inject_fault {
            let dxi = samples.dxi;
            corrupt(&mut samples.values, dxi);
        }
        let report = check_bell_shape(&samples, &bell)?;
        println!("bell shape at y = {y}: {}", report.verdict);
        cases.push(BellCase { y, report });
    }
    let bell_ok = cases.iter().all(|c| c.report.pass());

    let real: Vec<C64> = log_grid(0.01, 100.0, 60).into_iter().map(|x| C64::new(x, 0.0)).collect();
    let mesh = prepare_mesh(&spec, 0.01, &[], &SolverOptions::default())?;
    let verdict =
        check_rogers(&rogers_sample(&Arc::clone(&mesh), &real, PsiSource::BoundaryDerivative, ctx.exec)?, 1e-9);
    println!("Rogers: min Re(psi/xi) = {:.3e}: {}", verdict.min_ratio, if verdict.pass { "pass" } else { "FAIL" });

    let pass = fact_ok && bell_ok && verdict.pass;
    run.json(
        "verify.json",
        json!({
            "factorization": { "reports": reports, "pass": fact_ok },
            "bellshape": { "cases": cases, "pass": bell_ok },
            "rogers": verdict,
            "pass": pass,
        }),
    );
    finish(run, pass, "verify")
}
