//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use qeq::bifunction::{Bifunction, QuadraticBifunction};
use qeq::catalog;
use qeq::coercivity::{
    cond2_scan, doubling_candidates, gnep_coercivity_verify, tz_coercivity_check, ucc_verify, WitnessRule, FAR_SAMPLES,
};
use qeq::linalg::{dist, Matrix, Point};
use qeq::map::restrict_to_ball;
use qeq::properties::{
    check_properly_quasi_monotone, check_pseudo_monotone, check_quasi_monotone, check_quasiconvex_y, check_upper_sign,
    PropertyVerdict, SampleDomain,
};
use qeq::reductions::gnep::{check_gnep_equilibrium, nikaido_isoda, product_map};
use qeq::reductions::qvi::{check_qvi_solution, qvi_to_qep};
use qeq::region::ConvexRegion;
use qeq::solver::check::{check_qep_solution, CheckParams};
use qeq::solver::lift::lifting_checks;
use qeq::solver::oracle::oracle_enumerate;
use qeq::solver::pipeline::solve_restricted;
use qeq::{ProblemInstance, ProblemKind};

const SEED: u64 = 0;
const ORACLE_LIMIT: Duration = Duration::from_secs(10);
const TZ_LIMIT: Duration = Duration::from_secs(5);
const SUITE_LIMIT: Duration = Duration::from_secs(2);
const SUITE_BUDGET: usize = 10_000;
const TZ_CANDIDATES: usize = 20;

type Outcome = Result<String, String>;

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("lifting soundness", lifting_soundness),
        ("compact-pair counterexample", tz_counterexample),
        ("QVI equivalence", qvi_equivalence),
        ("GNEP equivalence", gnep_equivalence),
        ("coercivity transfer", coercivity_transfer),
        ("property-suite calibration", property_calibration),
        ("inward witnesses on the real line", inward_witnesses),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("acceptance {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load(name: &str) -> Result<ProblemInstance, String> {
    catalog::load(name).map_err(|e| format!("{name}: {e}"))
}

fn rho_of(inst: &ProblemInstance) -> Result<f64, String> {
    inst.numerics.rho.ok_or_else(|| format!("{}: catalog entry has no rho", inst.name))
}

fn params(inst: &ProblemInstance) -> CheckParams {
    let nm = &inst.numerics;
    CheckParams::grid(nm.grid_h, nm.tol_feas, nm.tol_sol)
}

fn catalog_of(kind: ProblemKind) -> Result<Vec<ProblemInstance>, String> {
    catalog::entries()
        .iter()
        .filter(|e| e.kind == kind)
        .map(|e| load(e.name))
        .collect()
}

/// Lattice of `C ∩ B̄_ρ` at the instance grid step.
fn lattice(inst: &ProblemInstance, rho: f64) -> Result<Vec<Point>, String> {
    let region = inst.c.intersect_origin_ball(rho).map_err(|e| e.to_string())?;
    region
        .grid_points(inst.numerics.grid_h, rho + inst.numerics.grid_h)
        .map_err(|e| e.to_string())
}

fn fmt_points(ps: &[Point]) -> String {
    let shown: Vec<String> = ps.iter().take(6).map(|p| format!("{:?}", p.0)).collect();
    let more = if ps.len() > 6 { format!(" … {} total", ps.len()) } else { String::new() };
    format!("[{}]{more}", shown.join(", "))
}

fn oracle_equivalence() -> Outcome {
    let mut slowest = Duration::ZERO;
    let instances = catalog_of(ProblemKind::Qep)?;
    for inst in &instances {
        let expected_h = if inst.n == 1 { 0.01 } else { 0.05 };
        ensure((inst.numerics.grid_h - expected_h).abs() < 1e-15, || {
            format!("{}: grid step {} instead of {expected_h}", inst.name, inst.numerics.grid_h)
        })?;
        let rho = rho_of(inst)?;
        let start = Instant::now();
        let solved = solve_restricted(inst, rho).or_else(|e| match e {
            qeq::QeqError::EmptyFixedPointSet => Ok(Vec::new()),
            e => Err(format!("{}: {e}", inst.name)),
        })?;
        let k_rho = restrict_to_ball(&inst.k, rho).map_err(|e| e.to_string())?;
        let region = inst.c.intersect_origin_ball(rho).map_err(|e| e.to_string())?;
        let nm = &inst.numerics;
        let oracle = oracle_enumerate(&k_rho, &inst.f, &region, nm.grid_h, nm.tol_feas, nm.tol_sol)
            .map_err(|e| format!("{}: {e}", inst.name))?;
        let took = start.elapsed();
        slowest = slowest.max(took);
        ensure(solved == oracle, || {
            let only_solver: Vec<Point> = solved.iter().filter(|p| !oracle.contains(p)).cloned().collect();
            let only_oracle: Vec<Point> = oracle.iter().filter(|p| !solved.contains(p)).cloned().collect();
            format!(
                "{}: solver-only {} oracle-only {}",
                inst.name,
                fmt_points(&only_solver),
                fmt_points(&only_oracle)
            )
        })?;
        ensure(took < ORACLE_LIMIT, || format!("{}: {took:?}", inst.name))?;
    }
    Ok(format!("{} QEP instances, slowest {slowest:.2?}", instances.len()))
}

fn lifting_soundness() -> Outcome {
    let mut certified = Vec::new();
    let mut solutions = 0;
    for entry in catalog::entries() {
        let inst = load(entry.name)?.as_qep();
        let rho = rho_of(&inst)?;
        let ucc = ucc_verify(&inst, rho, FAR_SAMPLES, SEED).map_err(|e| e.to_string())?;
        let checks = lifting_checks(&inst, rho, 2.0, 2000, SEED).map_err(|e| e.to_string())?;
        if !ucc.pass || checks.iter().any(PropertyVerdict::failed) {
            continue;
        }
        let sols = match solve_restricted(&inst, rho) {
            Ok(s) => s,
            Err(qeq::QeqError::EmptyFixedPointSet) => Vec::new(),
            Err(e) => return Err(format!("{}: {e}", inst.name)),
        };
        let window = ConvexRegion::origin_ball(inst.n, 4.0 * rho).map_err(|e| e.to_string())?;
        for x in &sols {
            let check = check_qep_solution(&inst.k, &inst.f, x, &window, params(&inst)).map_err(|e| e.to_string())?;
            ensure(check.ok, || {
                format!("{}: {:?} refuted by {:?} (value {:?})", inst.name, x.0, check.argument, check.value)
            })?;
        }
        solutions += sols.len();
        if entry.name == "e3-moving" {
            ensure(sols.len() == 1 && (sols[0][0] - 1.0).abs() <= inst.numerics.grid_h + 1e-12, || {
                format!("e3-moving: solutions {}", fmt_points(&sols))
            })?;
        }
        certified.push(entry.name);
    }
    ensure(certified.contains(&"e3-moving"), || "e3-moving not among the certified instances".into())?;
    Ok(format!(
        "{} instances with all hypotheses passing, {solutions} solutions clean on the 4ρ window",
        certified.len()
    ))
}

fn tz_counterexample() -> Outcome {
    let inst = load("tz-counterexample")?;
    let start = Instant::now();
    let cands = doubling_candidates(&inst.c, TZ_CANDIDATES).map_err(|e| e.to_string())?;
    let tz = tz_coercivity_check(&inst, &cands, SEED).map_err(|e| e.to_string())?;
    let ucc = ucc_verify(&inst, 2.0, FAR_SAMPLES, SEED).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(cands.len() == TZ_CANDIDATES, || format!("{} candidates", cands.len()))?;
    let passing = tz.candidates.iter().filter(|c| c.pass).count();
    ensure(passing == 0 && !tz.pass, || format!("{passing} candidates pass"))?;
    ensure(ucc.cond1.pass, || format!("cond 1 fails at {:?}", ucc.cond1.witness))?;
    ensure(took < TZ_LIMIT, || format!("{took:?}"))?;
    Ok(format!("{TZ_CANDIDATES}/{TZ_CANDIDATES} candidates fail, cond 1 passes at ρ = 2, {took:.2?}"))
}

fn qvi_equivalence() -> Outcome {
    let instances = catalog_of(ProblemKind::Qvi)?;
    ensure(instances.len() >= 3, || format!("only {} QVI instances", instances.len()))?;
    let mut sizes = Vec::new();
    for inst in &instances {
        let op = inst.operator().ok_or("QVI without operator")?;
        let f = qvi_to_qep(op);
        let rho = rho_of(inst)?;
        let window = ConvexRegion::origin_ball(inst.n, 2.0 * rho).map_err(|e| e.to_string())?;
        let mut native = Vec::new();
        let mut reduced = Vec::new();
        for x in lattice(inst, rho)? {
            let a = check_qvi_solution(op, &inst.k, &x, &window, params(inst)).map_err(|e| e.to_string())?;
            let b = check_qep_solution(&inst.k, &f, &x, &window, params(inst)).map_err(|e| e.to_string())?;
            if a.ok {
                native.push(x.clone());
            }
            if b.ok {
                reduced.push(x);
            }
        }
        ensure(native == reduced, || {
            format!("{}: QVI {} vs QEP {}", inst.name, fmt_points(&native), fmt_points(&reduced))
        })?;
        if inst.name == "e4-qvi" {
            let h = inst.numerics.grid_h;
            ensure(!native.is_empty() && native.iter().all(|x| (x[0] - 2.0).abs() <= h + 1e-12), || {
                format!("e4-qvi: {}", fmt_points(&native))
            })?;
        }
        sizes.push(format!("{} {}", inst.name, native.len()));
    }
    Ok(sizes.join(", "))
}

fn gnep_equivalence() -> Outcome {
    let instances = catalog_of(ProblemKind::Gnep)?;
    ensure(instances.iter().any(|i| i.name == "e5-gnep"), || "e5-gnep missing".into())?;
    ensure(instances.iter().any(|i| i.name != "e5-gnep" && i.n == 2), || "no second 2D game".into())?;
    let mut sizes = Vec::new();
    for inst in &instances {
        let game = inst.game().ok_or("GNEP without game")?;
        let f = nikaido_isoda(game);
        let k = product_map(game);
        let rho = rho_of(inst)?;
        let nm = &inst.numerics;
        let window = ConvexRegion::origin_ball(inst.n, 2.0 * rho).map_err(|e| e.to_string())?;
        let mut native = Vec::new();
        let mut reduced = Vec::new();
        for x in lattice(inst, rho)? {
            let a = check_gnep_equilibrium(game, &x, nm.grid_h, nm.tol_feas, nm.tol_sol, 2.0 * rho)
                .map_err(|e| e.to_string())?;
            let b = check_qep_solution(&k, &f, &x, &window, params(inst)).map_err(|e| e.to_string())?;
            if a.ok {
                native.push(x.clone());
            }
            if b.ok {
                reduced.push(x);
            }
        }
        ensure(native == reduced, || {
            let only_native: Vec<Point> = native.iter().filter(|p| !reduced.contains(p)).cloned().collect();
            let only_reduced: Vec<Point> = reduced.iter().filter(|p| !native.contains(p)).cloned().collect();
            format!(
                "{}: equilibrium-only {} QEP-only {}",
                inst.name,
                fmt_points(&only_native),
                fmt_points(&only_reduced)
            )
        })?;
        if inst.name == "e5-gnep" {
            let h = nm.grid_h;
            ensure(!native.is_empty() && native.iter().all(|x| dist(x, &[0.0, 0.0]) <= h + 1e-12), || {
                format!("e5-gnep: {}", fmt_points(&native))
            })?;
        }
        sizes.push(format!("{} {}", inst.name, native.len()));
    }
    Ok(sizes.join(", "))
}

fn coercivity_transfer() -> Outcome {
    let mut checked = Vec::new();
    for inst in catalog_of(ProblemKind::Gnep)? {
        let rho = rho_of(&inst)?;
        let native = gnep_coercivity_verify(&inst, rho, FAR_SAMPLES, SEED).map_err(|e| e.to_string())?;
        if !native.pass {
            continue;
        }
        let reduced_inst = inst.as_qep();
        let reduced = ucc_verify(&reduced_inst, rho, FAR_SAMPLES, SEED).map_err(|e| e.to_string())?;
        ensure(reduced.pass, || format!("{}: reduced instance fails at ρ = {rho}", inst.name))?;
        ensure(native.fixed_points() == reduced.fixed_points(), || {
            format!("{}: fixed points differ", inst.name)
        })?;
        let rule = WitnessRule::Bifunction(&reduced_inst.f);
        for (a, b) in native.cond2.iter().zip(&reduced.cond2) {
            let native_xs: Vec<&Point> = a.witnesses.iter().map(|(x, _)| x).collect();
            let reduced_xs: Vec<&Point> = b.witnesses.iter().map(|(x, _)| x).collect();
            ensure(native_xs == reduced_xs, || {
                format!("{}: at z = {:?} the points with a witness differ", inst.name, a.z.0)
            })?;
            for (x, y) in &a.witnesses {
                ensure(rule.accepts(x, y), || {
                    format!("{}: player witness {:?} for {:?} rejected by the reduced bifunction", inst.name, y.0, x.0)
                })?;
            }
        }
        checked.push(format!("{} at ρ = {rho}", inst.name));
    }
    ensure(!checked.is_empty(), || "no GNEP passes its coercivity check".into())?;
    Ok(checked.join(", "))
}

fn property_suite(f: &Bifunction, domain: &SampleDomain) -> Result<(Vec<PropertyVerdict>, Duration), String> {
    let start = Instant::now();
    let v = vec![
        check_pseudo_monotone(f, domain, SUITE_BUDGET, SEED),
        check_properly_quasi_monotone(f, domain, 4, SUITE_BUDGET, SEED),
        check_quasi_monotone(f, domain, SUITE_BUDGET, SEED),
        check_upper_sign(f, domain, SUITE_BUDGET, 9, SEED),
        check_quasiconvex_y(f, domain, SUITE_BUDGET, SEED),
    ]
    .into_iter()
    .collect::<qeq::Result<Vec<_>>>()
    .map_err(|e| e.to_string())?;
    Ok((v, start.elapsed()))
}

fn property_calibration() -> Outcome {
    // g(x) = xᵀAx + bᵀx with A positive semidefinite
    let family: Vec<(Matrix, Vec<f64>, ConvexRegion)> = vec![
        (Matrix::scalar(1.0), vec![0.0], ConvexRegion::interval(-2.0, 2.0)),
        (Matrix::scalar(0.5), vec![-1.0], ConvexRegion::interval(-3.0, 1.0)),
        (Matrix::scalar(0.0), vec![2.0], ConvexRegion::interval(-1.0, 1.0)),
        (
            Matrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]),
            vec![1.0, -1.0],
            ConvexRegion::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).map_err(|e| e.to_string())?,
        ),
    ];
    let mut slowest = Duration::ZERO;
    for (a, b, c) in family {
        let f: Bifunction = QuadraticBifunction::difference_of(a, b).into();
        let h = if c.dim() == 1 { 0.01 } else { 0.05 };
        let domain = SampleDomain::new(c, 3.0, h);
        let (verdicts, took) = property_suite(&f, &domain)?;
        slowest = slowest.max(took);
        for v in &verdicts {
            ensure(v.passed(), || format!("{} fails on g(y) − g(x): {:?}", v.property, v.witness()))?;
        }
        ensure(took < SUITE_LIMIT, || format!("suite took {took:?}"))?;
    }
    let one: Bifunction = QuadraticBifunction::constant(1, 1.0).into();
    let domain = SampleDomain::new(ConvexRegion::interval(-1.0, 1.0), 1.0, 0.01);
    let (verdicts, took) = property_suite(&one, &domain)?;
    slowest = slowest.max(took);
    for name in ["properly_quasi_monotone", "pseudo_monotone"] {
        let v = verdicts.iter().find(|v| v.property == name).ok_or(format!("{name} missing"))?;
        let w = v.witness().ok_or(format!("{name} passes on f ≡ 1"))?;
        ensure(w.recheck(name, &one) == Some(true), || format!("{name} witness does not re-evaluate as violating"))?;
    }
    ensure(took < SUITE_LIMIT, || format!("f ≡ 1 suite took {took:?}"))?;
    Ok(format!("4 convex quadratics clean, f ≡ 1 refuted, slowest suite {slowest:.2?}"))
}

fn inward_witnesses() -> Outcome {
    let inst = load("e2-unbounded")?;
    let window = inst.numerics.probe_radius.ok_or("e2-unbounded has no probe radius")?;
    let h = inst.numerics.grid_h;
    let z = Point(vec![0.0]);
    let entry = cond2_scan(&inst.k, WitnessRule::Bifunction(&inst.f), z, window, h).map_err(|e| e.to_string())?;
    let xs = lattice(&inst, window)?;
    let mut required = 0;
    for x in xs.iter().filter(|x| x[0].abs() > h) {
        required += 1;
        let found = entry.witnesses.iter().find(|(wx, _)| wx == x);
        match found {
            Some((_, y)) if y[0] == 0.0 => {}
            Some((_, y)) => return Err(format!("x = {:?} has witness {:?}, not 0", x.0, y.0)),
            None => return Err(format!("x = {:?} has no witness", x.0)),
        }
    }
    ensure(entry.violations.is_empty() && entry.pass, || format!("scan failures {}", fmt_points(&entry.violations)))?;
    Ok(format!("{required} grid points on B̄_{window}, all with witness 0"))
}

fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_qeq");
    let dir = std::env::temp_dir().join(format!("qeq-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let runs: [(&str, Vec<&str>); 5] = [
        ("catalog", vec!["catalog", "--json"]),
        ("solve", vec!["solve", "e3-moving", "--seed", "7"]),
        ("verify", vec!["verify", "e2-even", "--property", "pseudo-monotone", "--seed", "7"]),
        ("coercivity", vec!["coercivity", "tz-counterexample", "--rho", "2", "--tz", "--seed", "7"]),
        ("oracle", vec!["oracle", "e3-moving", "--seed", "7"]),
    ];
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = Command::new(bin).args(args).env_remove("QEQ_SEED").output().map_err(|e| e.to_string())?;
            ensure(out.status.code() == Some(0), || {
                format!("{name} run {rep} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
            })?;
            ensure(!out.stdout.is_empty(), || format!("{name} wrote nothing"))?;
            outputs.push(out.stdout);
        }
        ensure(outputs[0] == outputs[1], || format!("{name}: reports differ between runs"))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok("catalog, solve, verify, coercivity, oracle byte-identical across runs".into())
}
