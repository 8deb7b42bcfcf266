//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bsc_core::bbc::{self, BbcParams, BbcTrainingSet};
use bsc_core::ibc::{update_b, update_p};
use bsc_core::linalg::{gaussian, random_orthonormal, vec_of};
use bsc_core::pipeline::{run_benchmark, BenchmarkConfig, BenchmarkOutcome, MethodOutcome};
use bsc_core::synth::{self, SynthParams};
use bsc_core::{distance_sq, exact_search, lift_query, DMatrix, DVector, PackedCode, SubspaceEntry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.2}s (limit {}s)", t.as_secs_f64(), limit.as_secs()))
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    gaussian(rng, d, 1).column(0).into_owned()
}

/// min over v in span(S) of ‖q − v‖², by QR least squares on a raw
/// (non-orthonormal) spanning set of the subspace.
fn least_squares_distance(span: &DMatrix<f64>, q: &DVector<f64>) -> f64 {
    let qr = span.clone().qr();
    let r = qr.r();
    let coeffs = r
        .solve_upper_triangular(&(qr.q().transpose() * q))
        .expect("spanning set has full column rank");
    (q - span * coeffs).norm_squared()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for trial in 0..200 {
        let d = [4, 8, 16][trial % 3];
        let rank = rng.gen_range(1..d);
        let span = gaussian(&mut rng, d, rank);
        let entry = SubspaceEntry::from_frames(
            &bsc_core::FrameMatrix::new(format!("s{trial}"), span.clone()).unwrap(),
            Default::default(),
        )
        .unwrap();
        let q = random_vector(&mut rng, d) * rng.gen_range(0.1..10.0);
        let got = distance_sq(&q, entry.projector()).unwrap();
        let oracle = least_squares_distance(&span, &q);
        let err = (got - oracle).abs() / (1.0 + q.norm_squared());
        worst = worst.max(err);
        if err > 1e-8 {
            failures += 1;
        }
    }
    let (fast, time) = within(start, Duration::from_secs(5));
    verdict(
        failures == 0 && fast,
        format!("200 pairs, worst scaled error {worst:.2e} (tol 1e-8), {failures} failures, {time}"),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let d = 8;
    let mut db: Vec<SubspaceEntry> = (0..45)
        .map(|j| SubspaceEntry::from_orthonormal_basis(format!("v{j:02}"), random_orthonormal(&mut rng, d, 1 + j % (d - 1))))
        .collect();
    // Duplicated subspaces under different ids exercise the tie rule.
    for j in 0..5 {
        let copy = SubspaceEntry::from_orthonormal_basis(format!("dup{j}"), db[j * 7].basis().clone());
        db.push(copy);
    }
    let mut mismatches = 0;
    for i in 0..20 {
        let q = random_vector(&mut rng, d);
        let mut oracle: Vec<(f64, &str)> = db
            .iter()
            .map(|s| ((s.projector() * &q * q.transpose()).trace(), s.video_id()))
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
        let lift = lift_query(format!("q{i}"), q.clone()).unwrap();
        let ranked = exact_search(&lift, &db, db.len()).unwrap();
        let got: Vec<&str> = ranked.ids().collect();
        let want: Vec<&str> = oracle.iter().map(|o| o.1).collect();
        if got != want {
            mismatches += 1;
        }
    }
    let (fast, time) = within(start, Duration::from_secs(5));
    verdict(
        mismatches == 0 && fast,
        format!("50 subspaces (5 duplicated) x 20 queries, {mismatches} ranking mismatches, {time}"),
    )
}

fn sign_matrices(rows: usize, cols: usize) -> impl Iterator<Item = DMatrix<f64>> {
    (0u32..1 << (rows * cols)).map(move |mask| {
        DMatrix::from_fn(rows, cols, |i, j| if mask >> (i + rows * j) & 1 == 1 { 1.0 } else { -1.0 })
    })
}

fn random_signs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| if rng.gen::<bool>() { 1.0 } else { -1.0 })
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut b_failures = 0;
    let mut worst_residual: f64 = 0.0;
    for _ in 0..50 {
        let r = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=12 / r);
        let k = rng.gen_range(1..=4);
        let dd = rng.gen_range(1..=9);
        let f_v = random_signs(&mut rng, r, k);
        let a = gaussian(&mut rng, n, k);
        let p = gaussian(&mut rng, dd, r);
        let u = gaussian(&mut rng, dd, n);
        let lambda = 10f64.powf(rng.gen_range(-2.0..2.0));
        let sub = |b: &DMatrix<f64>| (b * &a).dot(&f_v) - lambda * (b - p.transpose() * &u).norm_squared();
        let got = update_b(&f_v, &a, &p, &u, lambda).unwrap();
        let best = sign_matrices(r, n).map(|b| sub(&b)).fold(f64::NEG_INFINITY, f64::max);
        let argmaxes: Vec<_> = sign_matrices(r, n).filter(|b| sub(b) == best).collect();
        if !argmaxes.contains(&got) {
            b_failures += 1;
        }

        let b = random_signs(&mut rng, r, n);
        let p_new = update_p(&u, &b).unwrap();
        let grad = &u * u.transpose() * &p_new - &u * b.transpose();
        let scaled = grad.norm() / (1.0 + u.norm() * b.norm());
        worst_residual = worst_residual.max(scaled);
    }
    let ok = b_failures == 0 && worst_residual <= 1e-8;
    let (fast, time) = within(start, Duration::from_secs(30));
    verdict(
        ok && fast,
        format!(
            "50 instances, {b_failures} code-step mismatches, worst normal-equation residual {worst_residual:.2e} (tol 1e-8), {time}"
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let params = SynthParams {
        clusters: 4,
        videos_per_cluster: 20,
        frames_per_video: 8,
        d: 16,
        subspace_dim: 3,
        noise: 0.1,
        queries_per_cluster: 0,
        seed: 404,
    };
    let ds = synth::generate(&params).unwrap();
    // 40 videos (10 per cluster) and all 80 held-out images.
    let videos: Vec<_> = ds.videos.iter().filter(|v| v.id[1..].parse::<usize>().unwrap() % 20 < 10).collect();
    let db: Vec<_> = videos
        .iter()
        .map(|v| SubspaceEntry::from_frames(&bsc_core::FrameMatrix::new(v.id.clone(), v.frames.clone()).unwrap(), Default::default()).unwrap())
        .collect();
    let images: Vec<_> = ds.images.iter().map(|i| i.vector.clone()).collect();
    let delta = bbc::delta_from_categories(
        &ds.images.iter().map(|i| i.category.as_str()).collect::<Vec<_>>(),
        &videos.iter().map(|v| v.category.as_str()).collect::<Vec<_>>(),
    );
    let train = BbcTrainingSet::new(&db, &images, delta).unwrap();
    let bp = BbcParams { c1: 4, c2: 4, mu: 1.0, iters: 10, seed: 4 };
    let (model, report) = bbc::train_bbc(&train, bp).unwrap();

    let trace: Vec<f64> = report.objective_trace().collect();
    let worst_drop = trace.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max);
    let worst_constraint = report.sweeps.iter().map(|s| s.orthonormality_residual).fold(0.0, f64::max);

    // The last trace value, recomputed from the literal trace sums.
    let cu: Vec<_> = report.codes_u.iter().map(|c| c.to_matrix()).collect();
    let cv: Vec<_> = report.codes_v.iter().map(|c| c.to_matrix()).collect();
    let mut literal = 0.0;
    for (u, b) in train.images.mats.iter().zip(&cu) {
        literal += (b * model.q2.transpose() * u.transpose() * &model.q1).trace();
    }
    for (v, b) in train.videos.mats.iter().zip(&cv) {
        literal += (b * model.p2.transpose() * v.transpose() * &model.p1).trace();
    }
    for (i, bu) in cu.iter().enumerate() {
        for (j, bv) in cv.iter().enumerate() {
            literal += bp.mu / 4.0 * train.delta[(i, j)] * (bv * bu.transpose()).trace();
        }
    }
    let recompute_gap = (literal - report.final_objective()).abs();

    let ok = worst_drop <= 1e-9
        && worst_constraint <= 1e-8
        && recompute_gap <= 1e-8 * (1.0 + literal.abs())
        && train.n_videos() == 40
        && train.n_images() == 80;
    let (fast, time) = within(start, Duration::from_secs(60));
    verdict(
        ok && fast,
        format!(
            "{} block updates over {} sweeps, largest decrease {:.2e} (tol 1e-9), worst constraint residual {worst_constraint:.2e} (tol 1e-8), final objective recomputed within {recompute_gap:.1e}, {time}",
            trace.len() - 1,
            report.sweeps.len(),
            worst_drop.max(0.0),
        ),
    )
}

fn random_orthonormal_probe(rng: &mut ChaCha8Rng, d: usize, c: usize) -> DMatrix<f64> {
    // Independent of the library: Gram-Schmidt on Gaussian columns.
    let mut cols: Vec<DVector<f64>> = Vec::new();
    while cols.len() < c {
        let mut v = random_vector(rng, d);
        for u in &cols {
            let dot = u.dot(&v);
            v -= u * dot;
        }
        let n = v.norm();
        if n > 1e-6 {
            cols.push(v / n);
        }
    }
    DMatrix::from_columns(&cols)
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut losses = 0;
    for _ in 0..20 {
        let d = rng.gen_range(2..=10);
        let c = rng.gen_range(1..=d);
        let d1 = gaussian(&mut rng, c, d);
        let d2 = gaussian(&mut rng, d, c);
        let p1 = bbc::maximize_trace_left(&d1).unwrap();
        let p2 = bbc::maximize_trace_right(&d2).unwrap();
        let v1 = (&d1 * &p1).trace();
        let v2 = (p2.transpose() * &d2).trace();
        for _ in 0..100 {
            let probe = random_orthonormal_probe(&mut rng, d, c);
            if (&d1 * &probe).trace() > v1 {
                losses += 1;
            }
            if (probe.transpose() * &d2).trace() > v2 {
                losses += 1;
            }
        }
    }
    verdict(losses == 0, format!("20 D matrices per side x 100 probes, {losses} probes beat the update"))
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.gen_range(1..=8);
        let c1 = rng.gen_range(1..=d);
        let c2 = rng.gen_range(1..=d);
        let r1 = random_orthonormal(&mut rng, d, c1);
        let r2 = random_orthonormal(&mut rng, d, c2);
        let x = gaussian(&mut rng, d, d);
        let bilinear = vec_of(&(r1.transpose() * &x * &r2));
        let full = r2.kronecker(&r1).transpose() * vec_of(&x);
        worst = worst.max((bilinear - full).amax());
    }
    verdict(worst <= 1e-10, format!("20 triples, worst entry gap {worst:.2e} (tol 1e-10)"))
}

fn to_signs(bits: u64, r: usize) -> Vec<i8> {
    (0..r).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect()
}

fn criterion_7() -> Verdict {
    let mut mismatches = 0u64;
    let mut pairs = 0u64;
    for r in 1..=12usize {
        for a in 0..1u64 << r {
            let sa = to_signs(a, r);
            let pa = PackedCode::pack(&sa).unwrap();
            for b in 0..1u64 << r {
                let sb = to_signs(b, r);
                let pb = PackedCode::pack(&sb).unwrap();
                let hamming = sa.iter().zip(&sb).filter(|(x, y)| x != y).count() as i64;
                if pa.inner_product(&pb).unwrap() != r as i64 - 2 * hamming {
                    mismatches += 1;
                }
                pairs += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for r in [64usize, 128] {
        for _ in 0..10_000 {
            let a: Vec<i8> = (0..r).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let b: Vec<i8> = (0..r).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
            let dense: i64 = a.iter().zip(&b).map(|(x, y)| i64::from(x * y)).sum();
            let got = PackedCode::pack(&a).unwrap().inner_product(&PackedCode::pack(&b).unwrap()).unwrap();
            if got != dense {
                mismatches += 1;
            }
            pairs += 1;
        }
    }
    verdict(mismatches == 0, format!("{pairs} pairs, {mismatches} mismatches"))
}

fn summary(name: &str, m: &MethodOutcome) -> String {
    format!("{name} mAP {:.4} P@{} {:.4}", m.report.map, m.report.k, m.report.precision_at_k)
}

fn criterion_8(out: &BenchmarkOutcome, elapsed: Duration) -> Verdict {
    let random = out.random.report.map;
    let learned_ok = |m: &MethodOutcome| m.report.map >= 0.60 && m.report.map >= 1.5 * random;
    let checks = [
        ("exact >= 0.95", out.exact.report.map >= 0.95),
        ("ibc >= 0.60 and >= 1.5x random", learned_ok(&out.ibc)),
        ("bbc >= 0.60 and >= 1.5x random", learned_ok(&out.bbc)),
        ("runtime < 120s", elapsed < Duration::from_secs(120)),
    ];
    let failed: Vec<_> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let mut detail = format!(
        "{}; {}; {}; {}; {:.1}s",
        summary("exact", &out.exact),
        summary("random", &out.random),
        summary("ibc", &out.ibc),
        summary("bbc", &out.bbc),
        elapsed.as_secs_f64()
    );
    if !failed.is_empty() {
        detail.push_str(&format!("; failed: {}", failed.join(", ")));
    }
    verdict(failed.is_empty(), detail)
}

fn artifacts(out: &BenchmarkOutcome) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut add = |p: &Path| files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()));
    for m in [&out.exact, &out.random, &out.ibc, &out.bbc] {
        add(&m.run);
        if let Some(p) = &m.model {
            add(p);
        }
        if let Some(p) = &m.index {
            add(p);
        }
    }
    for m in [&out.exact, &out.random, &out.ibc, &out.bbc] {
        files.push(("report".into(), format!("{}{}", m.report.to_key_values(), m.report.to_table()).into_bytes()));
    }
    files
}

fn criterion_9(cfg: &BenchmarkConfig, first: &BenchmarkOutcome) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let second = run_benchmark(cfg, dir.path()).unwrap();
    let a = artifacts(first);
    let b = artifacts(&second);
    let differing: Vec<_> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.clone()).collect();
    verdict(
        differing.is_empty() && a.len() == b.len(),
        format!("{} artifacts compared byte-for-byte, differing: [{}]", a.len(), differing.join(", ")),
    )
}

fn criterion_10(cfg: &BenchmarkConfig) -> Verdict {
    let mut ibc = Vec::new();
    let mut bbc = Vec::new();
    for bits in [16, 32, 64, 96, 128] {
        let dir = tempfile::tempdir().unwrap();
        let c = BenchmarkConfig { bits, ..cfg.clone() };
        let out = run_benchmark(&c, dir.path()).unwrap();
        ibc.push((bits, out.ibc.report.map));
        bbc.push((bits, out.bbc.report.map));
    }
    let trend_ok = |v: &[(usize, f64)]| v[4].1 >= v[0].1 - 0.02;
    let fmt = |v: &[(usize, f64)]| v.iter().map(|(b, m)| format!("{b}:{m:.4}")).collect::<Vec<_>>().join(" ");
    verdict(
        trend_ok(&ibc) && trend_ok(&bbc),
        format!("ibc mAP [{}]; bbc mAP [{}]; need mAP(128) >= mAP(16) - 0.02", fmt(&ibc), fmt(&bbc)),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut report = |n: u32, name: &'static str, v: Verdict| {
        println!("criterion {n:>2} {:<28} {}  {}", name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };
    report(1, "distance-oracle equivalence", criterion_1());
    report(2, "mips equivalence", criterion_2());
    report(3, "ibc sub-step exactness", criterion_3());
    report(4, "bbc monotone ascent", criterion_4());
    report(5, "polar-step optimality", criterion_5());
    report(6, "kronecker equivalence", criterion_6());
    report(7, "hamming identity", criterion_7());

    let cfg = BenchmarkConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let first = run_benchmark(&cfg, dir.path()).unwrap();
    let elapsed = start.elapsed();
    report(8, "desk-scale retrieval", criterion_8(&first, elapsed));
    report(9, "determinism", criterion_9(&cfg, &first));
    report(10, "code-length sweep", criterion_10(&cfg));

    let failed: Vec<_> = results.iter().filter(|r| !r.2.pass).map(|r| r.0.to_string()).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
