//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

// tests run on a single-threaded runtime, so the serializing lock cannot deadlock
#![allow(clippy::await_holding_lock)]

use std::sync::Mutex;
use std::time::Instant;

use harpia::chunk::{budget_for_interior, ExecOptions, MemoryBudget};
use harpia::registry::{self, Params, Role, CATALOG};
use harpia::{DType, Shape, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// the memory ledger is process-wide, so measured criteria run one at a time
static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n:>2}: {} - {detail}", if ok { "PASS" } else { "FAIL" });
}

fn input_for(role: Role, op: &str, shape: Shape, rng: &mut ChaCha8Rng) -> Volume {
    match (role, op) {
        (Role::Labels, "watershed" | "reconstruct") => Volume::from_fn(shape, |_, _, _| {
            if rng.random_bool(0.01) {
                rng.random_range(1..6u32)
            } else {
                0
            }
        }),
        (Role::Labels, _) => Volume::from_fn(shape, |_, _, _| if rng.random_bool(0.3) { 0 } else { rng.random_range(1..4u32) }),
        (Role::Volume, _) => Volume::from_fn(shape, |_, _, _| if rng.random_bool(0.25) { 0 } else { rng.random::<u8>() }),
    }
}

fn overrides(op: &str) -> Params {
    let p = Params::default();
    match op {
        "remove-islands" => p.with("min-size", 4),
        "threshold" => p.with("value", 100),
        "local-threshold" => p.with("method", "sauvola").with("window", 2),
        "nlm" => p.with("search-radius", 2),
        _ => p,
    }
}

fn max_diff(a: &Volume, b: &Volume) -> f64 {
    let (a, b) = (a.to_f64_buffer(), b.to_f64_buffer());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_plan_invariance() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let t0 = Instant::now();
    let shape = Shape::cube(64);
    let mut failures = Vec::new();
    for info in CATALOG {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        let inputs: Vec<Volume> = info.inputs.iter().map(|&r| input_for(r, info.name, shape, &mut rng)).collect();
        let refs: Vec<&Volume> = inputs.iter().collect();
        let dtypes: Vec<DType> = inputs.iter().map(|v| v.dtype()).collect();
        let op = registry::build(info.name, &overrides(info.name)).unwrap();
        let profile = op.profile(&dtypes).unwrap();
        let chunked_budget = budget_for_interior(shape, &dtypes, &profile, 16);
        let (whole, _) = op.run_volumes(&refs, &MemoryBudget::fixed(u64::MAX / 4), &ExecOptions::default()).unwrap();
        let (chunked, rep) = op.run_volumes(&refs, &chunked_budget, &ExecOptions::default()).unwrap();
        let diff = max_diff(&whole, &chunked);
        let exact = whole.dtype() != DType::F32;
        let ok = rep.plan.len() >= 4 && if exact { diff == 0.0 } else { diff <= 1e-5 };
        println!("  {:<16} chunks {:>2}  max diff {diff:e}", info.name, rep.plan.len());
        if !ok {
            failures.push(info.name);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = failures.is_empty() && secs <= 120.0;
    report(1, ok, &format!("{} operators, {secs:.1}s, failing {failures:?}", CATALOG.len()));
    assert!(ok);
}

#[test]
fn criterion_02_flat_peak_memory() {
    use harpia::io::{meta_path_for, save_volume, VolumeFile, VolumeMeta};
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let budget = MemoryBudget::fixed(64 << 20);
    let op = registry::build("median", &Params::default().with("radius", 2)).unwrap();
    let mut rows = Vec::new();
    for n in [64usize, 128, 192] {
        let shape = Shape::cube(n);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let v = Volume::from_fn(shape, |_, _, _| rng.random::<u8>());
        let data = dir.path().join(format!("in-{n}.vol"));
        save_volume(&v, &data, &meta_path_for(&data)).unwrap();
        drop(v);
        let input = VolumeFile::open_default(&data).unwrap();
        let out_path = dir.path().join(format!("out-{n}.vol"));
        let mut out = VolumeFile::create_default(&out_path, VolumeMeta::new(DType::U8, shape, Default::default())).unwrap();
        let rep = op.run(&[&input], &mut out, &budget, &ExecOptions::default()).unwrap();
        println!(
            "  {n}^3: chunks {:>3} peak {} working {} predicted {}",
            rep.chunk_count, rep.peak_bytes, rep.working_peak_bytes, rep.predicted_peak_bytes
        );
        rows.push(rep);
    }
    let peaks: Vec<f64> = rows.iter().map(|r| r.peak_bytes as f64).collect();
    let (lo, hi) = peaks.iter().fold((f64::MAX, 0.0f64), |(a, b), &p| (a.min(p), b.max(p)));
    let spread = (hi - lo) / lo;
    let bounded = rows.iter().all(|r| r.peak_bytes <= r.predicted_peak_bytes + (16 << 20));
    let ok = spread <= 0.15 && bounded;
    report(2, ok, &format!("peak spread {:.2}%, all within predicted + 16 MiB: {bounded}", spread * 100.0));
    assert!(ok);
}

#[tokio::test]
async fn criterion_03_service_residual() {
    use axum::body::Body;
    use axum::http::Request;
    use harpia::io::{meta_path_for, save_volume};
    use harpia::ledger::ledger_snapshot;
    use harpia::service::{Service, ServiceConfig};
    use http_body_util::BodyExt;
    use serde_json::{json, Value};
    use tower::ServiceExt;

    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let shape = Shape::new(24, 32, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = Volume::from_fn(shape, |_, _, _| rng.random::<u8>());
    let data = dir.path().join("v.vol");
    save_volume(&v, &data, &meta_path_for(&data)).unwrap();
    drop(v);
    // small enough that most jobs need several chunks
    let mut cfg = ServiceConfig::new(MemoryBudget::fixed(256 << 10));
    cfg.workdir = Some(dir.path().join("work"));
    let service = Service::start(cfg).unwrap();
    let call = |method: &str, uri: &str, body: Option<Value>| {
        let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
        let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
        let router = service.router();
        async move {
            let resp = router.oneshot(req).await.unwrap();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            serde_json::from_slice::<Value>(&bytes).unwrap()
        }
    };
    let ds = call("POST", "/datasets", Some(json!({"data-path": data}))).await["id"].as_u64().unwrap();
    let jobs = [
        ("gaussian", json!({"sigma": 1.0})),
        ("median", json!({"radius": 1})),
        ("otsu", json!({})),
        ("components", json!({"connectivity": 26})),
        ("remove-islands", json!({"min-size": 3})),
        ("unsharp", json!({})),
        ("fill-holes", json!({})),
        ("edt", json!({})),
        ("smooth-labels", json!({})),
        ("sobel", json!({})),
    ];
    let mut failures = Vec::new();
    for (op, params) in jobs {
        let before = ledger_snapshot().current_bytes;
        let job = call("POST", "/jobs", Some(json!({"dataset": ds, "op": op, "params": params}))).await;
        let id = job["id"].as_u64().unwrap_or_else(|| panic!("{job}"));
        let done = loop {
            let j = call("GET", &format!("/jobs/{id}"), None).await;
            if j["state"] != "queued" && j["state"] != "running" {
                break j;
            }
            tokio::time::sleep(std::time::Duration::from_millis(2)).await;
        };
        let after = ledger_snapshot().current_bytes;
        let residual = done["report"]["residual_bytes"].as_i64();
        println!("  {op:<16} {} chunks {} residual {residual:?} ledger {before} -> {after} {}", done["state"], done["report"]["chunk_count"], done["error"]);
        if done["state"] != "done" || residual != Some(0) || after != before {
            failures.push(op);
        }
    }
    let ok = failures.is_empty();
    report(3, ok, &format!("10 jobs, failing {failures:?}"));
    assert!(ok);
}

/// Exhaustive between-class variance sweep with exact rational comparison.
fn otsu_oracle(counts: &[u64]) -> Option<usize> {
    let mut best: Option<(usize, u128, u128)> = None;
    for k in 0..counts.len() - 1 {
        let (lo, hi) = counts.split_at(k + 1);
        let n0: u128 = lo.iter().map(|&c| c as u128).sum();
        let n1: u128 = hi.iter().map(|&c| c as u128).sum();
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s0: u128 = lo.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
        let s1: u128 = hi.iter().enumerate().map(|(i, &c)| (i + k + 1) as u128 * c as u128).sum();
        // σ² ∝ n0·n1·(μ1 − μ0)² = (s1·n0 − s0·n1)² / (n0·n1)
        let d = s1 * n0 - s0 * n1;
        let (num, den) = (d * d, n0 * n1);
        if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
            best = Some((k, num, den));
        }
    }
    best.map(|b| b.0)
}

#[test]
fn criterion_04_otsu_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agree = 0;
    let mut total = 0;
    while total < 1000 {
        let bins = rng.random_range(2..=64usize);
        let density = rng.random_range(0.1..1.0);
        let counts: Vec<u64> = (0..bins).map(|_| if rng.random_bool(density) { rng.random_range(0..1000u64) } else { 0 }).collect();
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            continue;
        }
        total += 1;
        if harpia::threshold::otsu_bin(&counts).ok() == otsu_oracle(&counts) {
            agree += 1;
        }
    }
    let ok = agree == total;
    report(4, ok, &format!("{agree}/{total} histograms agree"));
    assert!(ok);
}

fn random_mask(rng: &mut ChaCha8Rng, shape: Shape, p: f64) -> Volume {
    Volume::from_fn(shape, |_, _, _| rng.random_bool(p) as u8)
}

#[test]
fn criterion_05_edt_oracle() {
    use harpia::quantify::edt_squared;
    use harpia::Spacing;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = Shape::cube(16);
    let cases: Vec<Spacing> = (0..50).map(|_| Spacing::default()).chain((0..10).map(|_| Spacing::new(1.0, 1.0, 2.0).unwrap())).collect();
    let mut mismatched = 0;
    for spacing in &cases {
        let p = rng.random_range(0.5..0.97);
        let mask = random_mask(&mut rng, shape, p);
        let m = mask.typed::<u8>().unwrap();
        let bg: Vec<(usize, usize, usize)> = (0..shape.len()).filter(|&i| m[i] == 0).map(|i| shape.coords(i)).collect();
        let got = edt_squared(&mask, *spacing);
        let [sz, sy, sx] = spacing.0;
        let exact = (0..shape.len()).all(|i| {
            let (z, y, x) = shape.coords(i);
            let want = if m[i] == 0 {
                0.0
            } else {
                bg.iter()
                    .map(|&(bz, by, bx)| {
                        let (dz, dy, dx) = ((z as f64 - bz as f64) * sz, (y as f64 - by as f64) * sy, (x as f64 - bx as f64) * sx);
                        dz * dz + dy * dy + dx * dx
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            got[i] == want
        });
        if !exact {
            mismatched += 1;
        }
    }
    let ok = mismatched == 0;
    report(5, ok, &format!("{} masks (10 with spacing 1,1,2), {mismatched} mismatched", cases.len()));
    assert!(ok);
}

/// Breadth-first labelling of the nonzero voxels.
fn flood_components(mask: &[u8], shape: Shape, full: bool) -> Vec<u32> {
    let mut offs = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let n = dz.abs() + dy.abs() + dx.abs();
                if n != 0 && (full || n == 1) {
                    offs.push((dz, dy, dx));
                }
            }
        }
    }
    let mut out = vec![0u32; mask.len()];
    let mut next = 0;
    for start in 0..mask.len() {
        if mask[start] == 0 || out[start] != 0 {
            continue;
        }
        next += 1;
        out[start] = next;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let (z, y, x) = shape.coords(i);
            for &(dz, dy, dx) in &offs {
                let (nz, ny, nx) = (z as i64 + dz, y as i64 + dy, x as i64 + dx);
                if nz < 0 || ny < 0 || nx < 0 || nz >= shape.z as i64 || ny >= shape.y as i64 || nx >= shape.x as i64 {
                    continue;
                }
                let j = shape.index(nz as usize, ny as usize, nx as usize);
                if mask[j] != 0 && out[j] == 0 {
                    out[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    out
}

fn same_partition(a: &[u32], b: &[u32]) -> bool {
    let mut ab = std::collections::HashMap::new();
    let mut ba = std::collections::HashMap::new();
    a.iter().zip(b).all(|(&x, &y)| {
        if (x == 0) != (y == 0) {
            return false;
        }
        *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x
    })
}

#[test]
fn criterion_06_components_oracle() {
    use harpia::quantify::{connected_components, Connectivity};
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let shape = Shape::cube(32);
    let mut failures = 0;
    let mut min_chunks = usize::MAX;
    for _ in 0..50 {
        let p = rng.random_range(0.2..0.6);
        let mask = random_mask(&mut rng, shape, p);
        for (conn, full) in [(Connectivity::from_number(6).unwrap(), false), (Connectivity::from_number(26).unwrap(), true)] {
            let (labels, _) = connected_components(&mask, conn).unwrap();
            let oracle = flood_components(mask.typed::<u8>().unwrap(), shape, full);
            let op = registry::build("components", &Params::default().with("connectivity", conn.number())).unwrap();
            let profile = op.profile(&[DType::U8]).unwrap();
            let (chunked, rep) = op.run_volumes(&[&mask], &budget_for_interior(shape, &[DType::U8], &profile, 10), &ExecOptions::default()).unwrap();
            min_chunks = min_chunks.min(rep.chunk_count);
            if !same_partition(labels.labels(), &oracle) || chunked.typed::<u32>().unwrap() != labels.labels() || rep.chunk_count < 3 {
                failures += 1;
            }
        }
    }
    let ok = failures == 0;
    report(6, ok, &format!("100 labelings, {failures} failing, chunked runs used >= {min_chunks} chunks"));
    assert!(ok);
}

#[test]
fn criterion_07_morphology_algebra() {
    use harpia::morphology::{morph, MorphOp, StructuringElement};
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let shape = Shape::cube(16);
    let ses = [StructuringElement::ball(1), StructuringElement::cube(1), StructuringElement::cross(2), StructuringElement::ball(2)];
    let not = |v: &Volume| Volume::from_vec(v.shape(), v.typed::<u32>().unwrap().iter().map(|&x| (x == 0) as u32).collect()).unwrap();
    let le = |a: &Volume, b: &Volume| a.typed::<u32>().unwrap().iter().zip(b.typed::<u32>().unwrap()).all(|(x, y)| x <= y);
    let mut failures = 0;
    for i in 0..100 {
        let p = rng.random_range(0.3..0.8);
        let m = Volume::from_fn(shape, |_, _, _| rng.random_bool(p) as u32);
        let se = &ses[i % ses.len()];
        let e = morph(&m, MorphOp::Erode, se, 1, true).unwrap();
        let d = morph(&m, MorphOp::Dilate, se, 1, true).unwrap();
        let duality = e == not(&morph(&not(&m), MorphOp::Dilate, &se.reflect(), 1, true).unwrap());
        let chain = le(&e, &m) && le(&m, &d);
        let o = morph(&m, MorphOp::Open, se, 1, true).unwrap();
        let c = morph(&m, MorphOp::Close, se, 1, true).unwrap();
        let idem = morph(&o, MorphOp::Open, se, 1, true).unwrap() == o && morph(&c, MorphOp::Close, se, 1, true).unwrap() == c;
        if !(duality && chain && idem) {
            failures += 1;
        }
    }
    let ok = failures == 0;
    report(7, ok, &format!("100 masks, {failures} failing"));
    assert!(ok);
}

fn four_connected(labels: &[u32], h: usize, w: usize, label: u32, seed: usize) -> bool {
    let mut seen = vec![false; labels.len()];
    seen[seed] = true;
    let mut stack = vec![seed];
    let mut reached = 0;
    while let Some(i) = stack.pop() {
        reached += 1;
        let (r, c) = (i / w, i % w);
        let mut nbrs = Vec::with_capacity(4);
        if r > 0 {
            nbrs.push(i - w);
        }
        if r + 1 < h {
            nbrs.push(i + w);
        }
        if c > 0 {
            nbrs.push(i - 1);
        }
        if c + 1 < w {
            nbrs.push(i + 1);
        }
        for j in nbrs {
            if !seen[j] && labels[j] == label {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    reached == labels.iter().filter(|&&l| l == label).count()
}

#[test]
fn criterion_08_watershed_properties() {
    use harpia::watershed::watershed_2_5d;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 32;
    let shape = Shape::new(1, n, n);
    let mut failures = 0;
    for _ in 0..50 {
        let land: Vec<u8> = (0..n * n).map(|_| rng.random_range(0..40u8)).collect();
        let mut seeds = Vec::new();
        while seeds.len() < 3 {
            let i = rng.random_range(0..n * n);
            if !seeds.contains(&i) {
                seeds.push(i);
            }
        }
        let mut markers = vec![0u32; n * n];
        for (k, &i) in seeds.iter().enumerate() {
            markers[i] = k as u32 + 1;
        }
        let landscape = Volume::from_vec(shape, land.clone()).unwrap();
        let mvol = Volume::from_vec(shape, markers).unwrap();
        let out = watershed_2_5d(&landscape, &mvol, None).unwrap();
        let l = out.labels();
        let preserved = seeds.iter().enumerate().all(|(k, &i)| l[i] == k as u32 + 1);
        let coverage = l.iter().all(|&x| (1..=3).contains(&x));
        let connected = seeds.iter().enumerate().all(|(k, &i)| four_connected(l, n, n, k as u32 + 1, i));
        let warped = Volume::from_vec(shape, land.iter().map(|&v| (v as f32).powi(3) * 0.5 + 7.0).collect()).unwrap();
        let invariant = watershed_2_5d(&warped, &mvol, None).unwrap().labels() == l;
        if !(preserved && coverage && connected && invariant) {
            failures += 1;
        }
    }
    let ramp = watershed_2_5d(
        &Volume::from_vec(Shape::new(1, 1, 7), vec![0u8, 1, 2, 3, 2, 1, 0]).unwrap(),
        &Volume::from_vec(Shape::new(1, 1, 7), vec![1u32, 0, 0, 0, 0, 0, 2]).unwrap(),
        None,
    )
    .unwrap();
    let ramp_ok = ramp.labels() == [1, 1, 1, 1, 2, 2, 2];
    let ok = failures == 0 && ramp_ok;
    report(8, ok, &format!("50 landscapes, {failures} failing; ramp {:?}", ramp.labels()));
    assert!(ok);
}

#[test]
fn criterion_09_snakes_recovery() {
    use harpia::annotate::{acwe, SnakeParams};
    use harpia::slice::Image;
    use rand_distr::{Distribution, Normal};
    let n = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 15.0).unwrap();
    let disk: Vec<bool> = (0..n * n)
        .map(|i| {
            let (r, c) = ((i / n) as f64 - 63.5, (i % n) as f64 - 63.5);
            r * r + c * c <= 40.0 * 40.0
        })
        .collect();
    let img = Image::from_vec(n, n, disk.iter().map(|&b| if b { 200.0 } else { 50.0 } + noise.sample(&mut rng)).collect()).unwrap();
    let init: Vec<bool> = (0..n * n).map(|i| (59..69).contains(&(i / n)) && (59..69).contains(&(i % n))).collect();
    let t = Instant::now();
    let out = acwe(&img, &init, &SnakeParams { iterations: 200, balloon: 1, ..Default::default() }).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let inter = out.mask.iter().zip(&disk).filter(|(a, b)| **a && **b).count();
    let dice = 2.0 * inter as f64 / (out.mask.iter().filter(|&&a| a).count() + disk.iter().filter(|&&b| b).count()) as f64;
    let ok = dice >= 0.95 && secs <= 10.0 && out.iterations <= 200;
    report(9, ok, &format!("dice {dice:.4} after {} iterations in {secs:.2}s", out.iterations));
    assert!(ok);
}

#[test]
fn criterion_10_bench_harness() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let work = dir.path().join("work");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_harpia"))
        .args(["bench", "--op", "mean", "--param", "radius=1", "--ladder", "32,64,128,256", "--xy", "64", "--repeats", "30", "--budget", "64MiB"])
        .arg("--workdir")
        .arg(&work)
        .arg("--out")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header_ok = lines.next() == Some("size_bytes,mean_s,std_s,peak_bytes,residual_bytes");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[1][1] / w[0][1]).collect();
    let scaling = ratios.iter().all(|&r| r <= 2.0 * 1.25);
    let residual = rows.iter().all(|r| r[4] == 0.0);
    for r in &rows {
        println!("  {:>9} B  mean {:.6}s  std {:.6}s  peak {}", r[0], r[1], r[2], r[3]);
    }
    let ok = header_ok && rows.len() == 4 && scaling && residual;
    report(10, ok, &format!("header {header_ok}, {} rows, time ratios per doubling {ratios:.2?}", rows.len()));
    assert!(ok);
}

#[test]
fn criterion_11_cube_metrics() {
    use harpia::quantify::{label_metrics, label_metrics_chunked};
    use harpia::LabelVolume;
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let labels = LabelVolume::from_fn(Shape::cube(6), |z, y, x| ((2..4).contains(&z) && (2..4).contains(&y) && (1..3).contains(&x)) as u32);
    let t = label_metrics(&labels);
    let m = t.get(1).unwrap();
    let sum: f64 = t.rows.iter().map(|r| r.fraction).sum();
    let (chunked, _) = label_metrics_chunked(labels.as_volume(), &budget_for_interior(Shape::cube(6), &[DType::U32], &harpia::chunk::OpProfile::local(1, 2.0, DType::U32), 1), &ExecOptions::default()).unwrap();
    let ok = m.volume == 8.0 && m.surface_area == 24.0 && m.perimeter == 16.0 && (sum - 1.0).abs() <= 1e-12 && chunked == t;
    report(11, ok, &format!("volume {} area {} perimeter {} fraction sum {sum}", m.volume, m.surface_area, m.perimeter));
    assert!(ok);
}
