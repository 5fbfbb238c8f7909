use std::path::Path;
use std::sync::Arc;

use ncmart::atoms::{
    self, lemma_4_16_check, lemma_4_2_check, pairing_bound_check, pr_to_crude, random_crude_atom,
    random_projection_atom, two_atom_decompose, AtomCertificate, AtomKind, AtomPayload, PieceKind,
};
use ncmart::instances::{
    self, lemma_5_1_steps_check, lemma_5_2_check, rademacher_row, remark_3_9_instance, Provenance,
    Quantity,
};
use ncmart::jn::{
    bmo_c2_exact, check_constant_free_directions, distribution_tail, exact_p2, holder_chain_check,
    holder_witness, jn_lower_bound, jn_lower_bound_with_hints, Deflator, Functional, Hint, Side, TailMode,
};
use ncmart::norms::{self, NormFamily};
use ncmart::operator::OperatorJson;
use ncmart::sampling::{random_measurable, random_operator, random_projection, random_rank_profile, stream_rng};
use ncmart::{Exponent, NcError, Operator, TraceSpace};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{random_instance, Cli, CliError, InstanceName, Report, Row};

/// Decorrelates the streams of different suites sharing a master seed.
fn sub_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn failure(suite: &str, trial: u64, p: Option<f64>, err: &NcError) -> Value {
    json!({
        "suite": suite,
        "trial": trial,
        "p": p,
        "error": err.to_string(),
        "sample": err.sample(),
    })
}

/// Runs `f` on trials `0..n` in parallel and returns the results in
/// trial order.
fn par_trials<T: Send>(n: usize, f: impl Fn(u64) -> ncmart::Result<T> + Sync + Send) -> Vec<(u64, ncmart::Result<T>)> {
    (0..n as u64).into_par_iter().map(|t| (t, f(t))).collect()
}

fn provenance_tag(p: Provenance) -> &'static str {
    match p {
        Provenance::ClosedForm => "closed_form",
        Provenance::Derived => "derived",
    }
}

fn quantity_name(q: &Quantity) -> (&'static str, Option<f64>) {
    match *q {
        Quantity::SupResidualLp { p } => ("sup_m |x - x_m|_p", Some(p)),
        Quantity::BmoC => ("bmo_c", None),
        Quantity::BigBmoC => ("BMO_c", None),
        Quantity::ScSquaredMinusIdentity => ("|S_c(x)^2 - 1|_inf", None),
        Quantity::DeflatedHardy { p, .. } => ("|(x - x_n) a|_Hc_p", Some(p)),
        Quantity::CompanionLp { p } => ("|a|_p", Some(p)),
        Quantity::DeflatedIdentity { .. } => ("|(x - x_n) a - y|_inf", None),
    }
}

fn instance_rows(section: &str, inst: &instances::NamedInstance, n: usize, tol: f64) -> ncmart::Result<Vec<Row>> {
    let checks = inst.verify()?;
    Ok(inst
        .expected
        .iter()
        .zip(checks)
        .map(|(e, check)| {
            let (name, p) = quantity_name(&e.quantity);
            let mut row = Row::new(section, name)
                .n(n)
                .value(check.computed)
                .expected(check.expected, provenance_tag(check.provenance))
                .passed(check.deviation <= tol);
            if let Some(p) = p {
                row = row.p_f64(p);
            }
            row
        })
        .collect())
}

pub(crate) fn norms(cli: &Cli, input: &Path, families: &[String], ps: &[Exponent]) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(input).map_err(|source| CliError::Io {
        path: input.to_path_buf(),
        source,
    })?;
    let json: OperatorJson = serde_json::from_str(&text).map_err(NcError::from)?;
    let x = Operator::from_json(json)?;
    let fams: Vec<NormFamily> = if families.iter().any(|f| f == "all") {
        NormFamily::ALL.to_vec()
    } else {
        families
            .iter()
            .map(|f| f.parse().map_err(|e: NcError| CliError::Usage(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    let mut rows = Vec::new();
    for fam in fams {
        if fam.takes_exponent() {
            for &p in ps {
                let rep = norms::evaluate(&x, fam, p)?;
                rows.push(Row::new("norms", fam.tag()).p(p).value(rep.value));
            }
        } else {
            let rep = norms::evaluate(&x, fam, Exponent::Inf)?;
            let mut row = Row::new("norms", fam.tag()).value(rep.value);
            row.n = rep.argmax_level;
            rows.push(row);
        }
    }
    Ok(Report::new("norms", cli.seed, cli.budget, rows, Vec::new()))
}

#[derive(Default)]
struct InstanceOutcome {
    /// `(p, check name, max ratio, passed)`
    directions: Vec<(f64, String, f64, bool)>,
    /// `(functional, p, value)`
    lower_bounds: Vec<(Functional, f64, f64)>,
    /// `(mode, fitted c, passed)`
    tails: Vec<(TailMode, Option<f64>, bool)>,
    failures: Vec<Value>,
}

const TAIL_MODES: [TailMode; 3] = [TailMode::ConditionalSc, TailMode::PlainRight, TailMode::PlainLeft];

fn tail_checks(x: &Operator, seed: u64, idx: u64) -> ncmart::Result<Vec<(TailMode, Option<f64>, bool)>> {
    let space = x.space();
    let k = space.levels();
    let level = if k >= 2 { 1 + (idx as usize % (k - 1)) } else { 1 };
    let mut rng = stream_rng(seed, idx);
    let profile = random_rank_profile(&mut rng, space, level);
    let e = random_projection(space, level, &profile, rng.random())?;
    let scale = norms::bmo_c(x).max(norms::bmo_norm(x, NormFamily::BigBmo)?.value);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let grid: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1 * scale).collect();
    // ‖(x − x_{n−1}) e‖ ≤ 2‖x‖_∞ bounds the plain tails.
    let plain_cap = 2.0 * x.norm_inf() * (1.0 + 1e-12);
    let mut out = Vec::new();
    for mode in TAIL_MODES {
        let curve = distribution_tail(x, level, &e, mode, &grid)?;
        let monotone = curve.values.windows(2).all(|w| w[1] <= w[0]);
        let vanishes = mode == TailMode::ConditionalSc
            || grid.iter().zip(&curve.values).all(|(l, v)| *l < plain_cap || *v == 0.0);
        let positive = curve.fitted_c.is_none_or(|c| c > 0.0);
        out.push((mode, curve.fitted_c, monotone && vanishes && positive));
    }
    Ok(out)
}

pub(crate) fn jn_verify(
    cli: &Cli,
    named: Option<(InstanceName, usize)>,
    trials: usize,
    ps: &[f64],
) -> Result<Report, CliError> {
    let (xs, n_label): (Vec<Operator>, Option<usize>) = match named {
        Some((InstanceName::Rademacher, n)) => (vec![rademacher_row(n, &[])?.x], Some(n)),
        None => (
            (0..trials as u64).map(|i| random_instance(sub_seed(cli.seed, 1), i, 4)).collect(),
            None,
        ),
    };
    let outcomes: Vec<InstanceOutcome> = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let i = i as u64;
            let mut out = InstanceOutcome::default();
            for &p in ps {
                match check_constant_free_directions(x, p, cli.budget, sub_seed(cli.seed, 2) ^ i) {
                    Ok(rep) => out
                        .directions
                        .extend(rep.checks.into_iter().map(|c| (p, c.name, c.max_ratio, c.passed))),
                    Err(e) => out.failures.push(failure("directions", i, Some(p), &e)),
                }
                if named.is_some() {
                    for f in Functional::ALL {
                        match jn_lower_bound(x, f, p, cli.budget, cli.seed) {
                            Ok(est) => out.lower_bounds.push((f, p, est.lower_bound)),
                            Err(e) => out.failures.push(failure("lower_bound", i, Some(p), &e)),
                        }
                    }
                }
            }
            match tail_checks(x, sub_seed(cli.seed, 3), i) {
                Ok(t) => out.tails = t,
                Err(e) => out.failures.push(failure("tail", i, None, &e)),
            }
            out
        })
        .collect();

    let mut rows: Vec<Row> = Vec::new();
    let mut failures = Vec::new();
    let mut dir: Vec<(f64, String, f64, bool)> = Vec::new();
    let mut tails: Vec<(TailMode, Option<f64>, bool)> = Vec::new();
    for out in outcomes {
        for (p, name, ratio, ok) in out.directions {
            match dir.iter_mut().find(|d| d.0 == p && d.1 == name) {
                Some(d) => {
                    d.2 = d.2.max(ratio);
                    d.3 &= ok;
                }
                None => dir.push((p, name, ratio, ok)),
            }
        }
        for (f, p, v) in out.lower_bounds {
            let mut row = Row::new("lower_bound", f.tag()).p_f64(p).value(v);
            row.n = n_label;
            rows.push(row);
        }
        for (mode, c, ok) in out.tails {
            match tails.iter_mut().find(|t| t.0 == mode) {
                Some(t) => {
                    t.1 = match (t.1, c) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                    t.2 &= ok;
                }
                None => tails.push((mode, c, ok)),
            }
        }
        failures.extend(out.failures);
    }
    for (p, name, ratio, ok) in dir {
        let mut row = Row::new("directions", name).p_f64(p).value(ratio).passed(ok);
        row.n = n_label;
        rows.push(row);
    }
    for (mode, c, ok) in tails {
        let mut row = Row::new("tail", format!("min fitted c ({})", mode.tag())).passed(ok);
        if let Some(c) = c {
            row = row.value(c);
        }
        row.n = n_label;
        rows.push(row);
    }
    Ok(Report::new("jn-verify", cli.seed, cli.budget, rows, failures))
}

/// Small dyadic space for atom trials: depth 2 or 3, matrix size 1 to 3.
fn atom_space(rng: &mut impl Rng) -> Arc<TraceSpace> {
    let depth = rng.random_range(2..=3);
    let n = rng.random_range(1..=3);
    Arc::new(TraceSpace::dyadic(depth, n).expect("valid dyadic shape"))
}

/// Row form of a crude column atom: `a* = y* b*` read as `a = b y`.
fn crude_row(a: &Operator, cert: &AtomCertificate) -> (Operator, AtomCertificate) {
    let Some(AtomPayload::Crude { y, b }) = &cert.payload else {
        unreachable!("crude generator returns a crude payload")
    };
    let payload = AtomPayload::Crude {
        y: y.adjoint(),
        b: b.adjoint(),
    };
    (a.adjoint(), AtomCertificate::new(AtomKind::CrudeR, cert.q, cert.level, payload))
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::INFINITY, f64::min)
}

pub(crate) fn atoms_verify(cli: &Cli, trials: usize, qs: &[Exponent]) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let resum_tol = cli.tol.unwrap_or(1e-10);
    let qval = |q: Exponent| Some(q.value());

    for (qi, &q) in qs.iter().enumerate() {
        let seed = |suite: u64| sub_seed(cli.seed, (suite << 16) | qi as u64);

        // Crude atoms: ‖a‖_h1 ≤ 1, and the Jensen step at q = ∞.
        let res = par_trials(trials, |t| {
            let mut rng = stream_rng(seed(10), t);
            let space = atom_space(&mut rng);
            let (a, cert) = random_crude_atom(&mut rng, &space, q)?;
            let (a, cert) = if t % 2 == 1 { crude_row(&a, &cert) } else { (a, cert) };
            lemma_4_2_check(&a, &cert)
        });
        let mut values = Vec::new();
        let mut gaps = Vec::new();
        for (t, r) in res {
            match r {
                Ok(rep) => {
                    values.push(rep.value);
                    if let Some((lhs, rhs)) = rep.jensen {
                        gaps.push((lhs - rhs) / rhs.abs().max(1.0));
                    }
                }
                Err(e) => failures.push(failure("crude_atom_h1", t, qval(q), &e)),
            }
        }
        let v = max_of(values.iter().copied());
        rows.push(
            Row::new("crude_atom_h1", "max h1 norm of crude atoms")
                .p(q)
                .value(v)
                .passed(values.len() == trials && v <= 1.0 + atoms::ATOM_TOL),
        );
        if q.is_inf() {
            let g = min_of(gaps.iter().copied());
            rows.push(Row::new("crude_atom_h1", "min Jensen gap").p(q).value(g).passed(g >= -1e-9));
        }

        // Projection atoms factor as crude atoms.
        let res = par_trials(trials, |t| {
            let mut rng = stream_rng(seed(11), t);
            let space = atom_space(&mut rng);
            let kind = if t % 2 == 0 { AtomKind::PrC } else { AtomKind::PrR };
            let (a, cert) = random_projection_atom(&mut rng, &space, kind, q, Side::Right)?;
            pr_to_crude(&a, &cert)
        });
        let mut invalid = 0usize;
        for (t, r) in res {
            match r {
                Ok(c) if c.valid() => {}
                Ok(c) => {
                    invalid += 1;
                    failures.push(json!({ "suite": "pr_to_crude", "trial": t, "certificate": c.to_json() }));
                }
                Err(e) => {
                    invalid += 1;
                    failures.push(failure("pr_to_crude", t, qval(q), &e));
                }
            }
        }
        rows.push(
            Row::new("pr_to_crude", "invalid crude certificates")
                .p(q)
                .value(invalid as f64)
                .passed(invalid == 0),
        );

        // Two-atom decomposition.
        let res = par_trials(trials, |t| {
            let mut rng = stream_rng(seed(12), t);
            let space = atom_space(&mut rng);
            let x = random_operator(&mut rng, &space, 1.0, t % 4 == 0);
            let d = two_atom_decompose(&x, q)?;
            let l2 = norms::lp_norm(&x, Exponent::Finite(2.0))?;
            let bad = d
                .pieces
                .iter()
                .filter(|p| match (&p.kind, &p.certificate) {
                    (PieceKind::Atom, Some(c)) => !c.valid(),
                    (PieceKind::Atom, None) => true,
                    (PieceKind::L1First, _) => p.l1_norm > 1.0 + atoms::ATOM_TOL,
                })
                .count();
            Ok((d.coefficient_sum / (2f64.sqrt() * l2), d.c_q, d.resum_defect, bad))
        });
        let mut ok = Vec::new();
        for (t, r) in res {
            match r {
                Ok(v) => ok.push(v),
                Err(e) => failures.push(failure("two_atom", t, qval(q), &e)),
            }
        }
        let complete = ok.len() == trials;
        let ratio = max_of(ok.iter().map(|v| v.0));
        let mut row = Row::new("two_atom", "max coefficient sum / (sqrt2 |x|_2)").p(q).value(ratio);
        if q == Exponent::Finite(2.0) {
            row = row.passed(complete && ratio <= 1.0 + 1e-9);
        }
        rows.push(row);
        rows.push(Row::new("two_atom", "max c_q").p(q).value(max_of(ok.iter().map(|v| v.1))));
        let defect = max_of(ok.iter().map(|v| v.2));
        rows.push(
            Row::new("two_atom", "max resum defect")
                .p(q)
                .value(defect)
                .passed(complete && defect <= resum_tol),
        );
        let bad: usize = ok.iter().map(|v| v.3).sum();
        rows.push(
            Row::new("two_atom", "invalid pieces")
                .p(q)
                .value(bad as f64)
                .passed(complete && bad == 0),
        );

        // Plain atoms: h1 upper bound times (q − 1)/q, reported.
        let res = par_trials(trials, |t| {
            let mut rng = stream_rng(seed(13), t);
            let space = atom_space(&mut rng);
            let side = if t % 2 == 0 { Side::Right } else { Side::Left };
            let (a, cert) = random_projection_atom(&mut rng, &space, AtomKind::Plain, q, side)?;
            lemma_4_16_check(&a, &cert)
        });
        let mut ratios = Vec::new();
        for (t, r) in res {
            match r {
                Ok(v) => ratios.push(v),
                Err(e) => failures.push(failure("plain_atom_ratio", t, qval(q), &e)),
            }
        }
        rows.push(Row::new("plain_atom_ratio", "max ratio").p(q).value(max_of(ratios.iter().copied())));
        if !ratios.is_empty() {
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            rows.push(Row::new("plain_atom_ratio", "mean ratio").p(q).value(mean));
        }
    }

    // Pairing with crude column atoms at q = 2.
    let two = Exponent::Finite(2.0);
    let res = par_trials(trials, |t| {
        let mut rng = stream_rng(sub_seed(cli.seed, 14), t);
        let space = atom_space(&mut rng);
        let scale = rng.random_range(0.1..3.0);
        let x = random_operator(&mut rng, &space, scale, false);
        let (a, cert) = random_crude_atom(&mut rng, &space, two)?;
        pairing_bound_check(&x, &a, &cert)
    });
    let mut ratios = Vec::new();
    for (t, r) in res {
        match r {
            Ok(rep) => ratios.push(if rep.rhs > 0.0 { rep.lhs / rep.rhs } else { 0.0 }),
            Err(e) => failures.push(failure("pairing", t, Some(2.0), &e)),
        }
    }
    let v = max_of(ratios.iter().copied());
    rows.push(
        Row::new("pairing", "max |tau(x* a)| / bmo_c(x)")
            .p(two)
            .value(v)
            .passed(ratios.len() == trials && v <= 1.0 + 1e-9),
    );

    Ok(Report::new("atoms-verify", cli.seed, cli.budget, rows, failures))
}

pub(crate) fn rademacher_row_suite(cli: &Cli, ns: &[usize], ps: &[f64]) -> Result<Report, CliError> {
    let ns = if ns.is_empty() { vec![2, 3, 4, 5, 6] } else { ns.to_vec() };
    let ps = if ps.is_empty() { vec![2.0, 3.0, 4.0, 8.0] } else { ps.to_vec() };
    let tol = cli.tol.unwrap_or(1e-10);
    let mut rows = Vec::new();
    for n in ns {
        let inst = rademacher_row(n, &ps)?;
        rows.extend(instance_rows("rademacher_row", &inst, n, tol)?);
    }
    Ok(Report::new("counterexample remark320", cli.seed, cli.budget, rows, Vec::new()))
}

pub(crate) fn deflated_row_suite(cli: &Cli, ns: &[usize], ps: &[f64]) -> Result<Report, CliError> {
    let ns = if ns.is_empty() { vec![2, 4, 8] } else { ns.to_vec() };
    let ps = if ps.is_empty() { vec![1.0] } else { ps.to_vec() };
    let tol = cli.tol.unwrap_or(1e-9);
    let mut rows = Vec::new();
    for &n in &ns {
        for &p in &ps {
            let inst = remark_3_9_instance(n, p)?;
            rows.extend(instance_rows("deflated_row", &inst, n, tol)?);
            let a = inst
                .companion("a")
                .ok_or_else(|| NcError::InvalidInput("missing companion `a`".into()))?;
            let hint = Hint {
                level: n + 1,
                side: Side::Right,
                deflator: Deflator::General(a.clone()),
            };
            let est = jn_lower_bound_with_hints(&inst.x, Functional::BigBmoCP, p, cli.budget, cli.seed, &[hint])?;
            let target = (n as f64).powf(1.0 / p - 0.5);
            rows.push(
                Row::new("deflated_row", "BMO_c_p lower bound")
                    .p_f64(p)
                    .n(n)
                    .value(est.lower_bound)
                    .expected(target, "derived")
                    .passed(est.lower_bound >= target - tol),
            );
        }
        let inst = remark_3_9_instance(n, ps[0])?;
        let exact = exact_p2(&inst.x, Functional::BigBmoCP)?;
        rows.push(
            Row::new("deflated_row", "BMO_c_2 exact")
                .p_f64(2.0)
                .n(n)
                .value(exact.lower_bound)
                .expected(1.0, "closed_form")
                .passed((exact.lower_bound - 1.0).abs() <= tol),
        );
    }
    Ok(Report::new("counterexample remark39", cli.seed, cli.budget, rows, Vec::new()))
}

pub(crate) fn sweep_growth(cli: &Cli, ns: &[usize], depth: usize) -> Result<Report, CliError> {
    let ns = if ns.is_empty() { vec![1, 2, 4, 8] } else { ns.to_vec() };
    let out = instances::sweep_growth_experiment(&ns, depth, cli.budget, cli.seed)?;
    let mut rows = Vec::new();
    for r in out {
        rows.push(Row::new("sweep_growth", "best BMO_c(S(b))").n(r.n).value(r.best_value));
        rows.push(Row::new("sweep_growth", "best / ln(n+1)^2").n(r.n).value(r.ratio));
    }
    Ok(Report::new("sweep-growth", cli.seed, cli.budget, rows, Vec::new()))
}

pub(crate) fn random_suite(cli: &Cli, trials: usize) -> Result<Report, CliError> {
    let tol = cli.tol.unwrap_or(1e-10);
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    // Exact p = 2 functionals against the direct norms.
    let res = par_trials(trials, |t| {
        let x = random_instance(sub_seed(cli.seed, 20), t, 6);
        let small = bmo_c2_exact(&x)?;
        let big = exact_p2(&x, Functional::BigBmoCP)?;
        Ok((
            (small.lower_bound - norms::bmo_c(&x)).abs(),
            (big.lower_bound - norms::big_bmo_c(&x)).abs(),
            (small.reevaluate(&x)? - small.lower_bound)
                .abs()
                .max((big.reevaluate(&x)? - big.lower_bound).abs()),
        ))
    });
    let mut devs = Vec::new();
    for (t, r) in res {
        match r {
            Ok(v) => devs.push(v),
            Err(e) => failures.push(failure("p2_identity", t, Some(2.0), &e)),
        }
    }
    let complete = devs.len() == trials;
    let d = max_of(devs.iter().map(|v| v.0));
    rows.push(Row::new("p2_identity", "max |bmo_c_2 - bmo_c|").p_f64(2.0).value(d).passed(complete && d <= tol));
    let d = max_of(devs.iter().map(|v| v.1));
    rows.push(Row::new("p2_identity", "max |BMO_c_2 - BMO_c|").p_f64(2.0).value(d).passed(complete && d <= tol));
    let d = max_of(devs.iter().map(|v| v.2));
    rows.push(
        Row::new("p2_identity", "max witness reevaluation deviation")
            .p_f64(2.0)
            .value(d)
            .passed(complete && d <= 1e-9),
    );

    // Hölder factorization and the h^c chain.
    const HOLDER_PS: [f64; 3] = [3.0, 4.0, 6.0];
    let res = par_trials(trials, |t| {
        let x = random_instance(sub_seed(cli.seed, 21), t, 4);
        let space = x.space().clone();
        let mut rng = stream_rng(sub_seed(cli.seed, 22), t);
        let level = rng.random_range(1..=space.levels());
        let a = random_measurable(&mut rng, &space, level, None);
        let size: f64 = rng.random_range(0.05..=1.0);
        let a = a.scale(size / norms::lp_norm(&a, Exponent::Finite(2.0))?);
        let p = HOLDER_PS[t as usize % 3];
        let (a0, a1) = holder_witness(&a, p)?;
        let recon = (&a0 * &a1).dist_inf(&a);
        let a2 = norms::lp_norm(&a, Exponent::Finite(2.0))?;
        let n0 = (norms::lp_norm(&a0, Exponent::Finite(p))? - a2.powf(2.0 / p)).abs();
        let chain = holder_chain_check(&x, &a, level, p)?;
        Ok((p, recon, n0, chain.lhs - chain.rhs))
    });
    let mut hs = Vec::new();
    for (t, r) in res {
        match r {
            Ok(v) => hs.push(v),
            Err(e) => failures.push(failure("holder", t, Some(HOLDER_PS[t as usize % 3]), &e)),
        }
    }
    let complete = hs.len() == trials;
    for p in HOLDER_PS {
        let sel: Vec<_> = hs.iter().filter(|v| v.0 == p).collect();
        let r = max_of(sel.iter().map(|v| v.1));
        rows.push(Row::new("holder", "max |a0 a1 - a|").p_f64(p).value(r).passed(complete && r <= 1e-9));
        let r = max_of(sel.iter().map(|v| v.2));
        rows.push(
            Row::new("holder", "max ||a0|_p - |a|_2^(2/p)|")
                .p_f64(p)
                .value(r)
                .passed(complete && r <= 1e-9),
        );
        let r = max_of(sel.iter().map(|v| v.3));
        rows.push(
            Row::new("holder", "max chain excess")
                .p_f64(p)
                .value(r)
                .passed(complete && r <= 1e-9),
        );
    }

    // Operator convexity and square-root steps.
    for n in 2..=4 {
        match lemma_5_1_steps_check(trials, n, sub_seed(cli.seed, 23)) {
            Ok(rep) => {
                rows.push(
                    Row::new("operator_steps", "min convexity residual")
                        .n(n)
                        .value(rep.min_convexity)
                        .passed(rep.min_convexity >= -1e-9),
                );
                rows.push(
                    Row::new("operator_steps", "min square-root residual")
                        .n(n)
                        .value(rep.min_root)
                        .passed(rep.min_root >= -1e-9),
                );
            }
            Err(e) => failures.push(failure("operator_steps", n as u64, None, &e)),
        }
    }

    // Conditional Cauchy-Schwarz.
    const P52: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 5.0];
    let res = par_trials(trials, |t| {
        let x = random_instance(sub_seed(cli.seed, 24), t, 4);
        let m = 1 + t as usize % x.space().levels();
        let rep = lemma_5_2_check(&x, m, P52[t as usize % P52.len()])?;
        Ok(if rep.rhs > 0.0 { rep.lhs / rep.rhs } else { 0.0 })
    });
    let mut ratios = Vec::new();
    for (t, r) in res {
        match r {
            Ok(v) => ratios.push(v),
            Err(e) => failures.push(failure("conditional_cauchy_schwarz", t, Some(P52[t as usize % P52.len()]), &e)),
        }
    }
    let r = max_of(ratios.iter().copied());
    rows.push(
        Row::new("conditional_cauchy_schwarz", "max lhs / rhs")
            .value(r)
            .passed(ratios.len() == trials && r <= 1.0 + 1e-9),
    );

    Ok(Report::new("random-suite", cli.seed, cli.budget, rows, failures))
}
