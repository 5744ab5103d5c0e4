//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and
//! exits nonzero if any criterion fails.

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use patchad::annindex::{self, AnnParams, BruteForce, KdForest, NearestNeighbor, Points};
use patchad::dataman::PatchGrid;
use patchad::evalkit;
use patchad::featio::{write_store, FeatureStore, FrameRef, StoreHeader};
use patchad::ipca::IpcaModel;
use patchad::normlib;
use patchad::runner::{self, run_experiment, run_grid, ExperimentConfig, ExtractorStores, GridConfig};
use patchad::synth::{write_planted, PlantedSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

fn grow(n: usize) {
    let live = LIVE.fetch_add(n, Ordering::Relaxed) + n;
    PEAK.fetch_max(live, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            grow(layout.size());
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc_zeroed(layout) };
        if !p.is_null() {
            grow(layout.size());
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                grow(new_size - layout.size());
            } else {
                LIVE.fetch_sub(layout.size() - new_size, Ordering::Relaxed);
            }
        }
        p
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(e2s)
}

// ---- 1: normalization ------------------------------------------------------

fn tiny_grid() -> PatchGrid {
    PatchGrid::new(32, 32, 32, 16).expect("1x1 grid")
}

/// One row per frame, so any row count fits a 1x1 grid.
fn flat_store(path: &Path, dim: usize, rows: &[Vec<f32>]) -> Result<FeatureStore, String> {
    let frames = (0..rows.len() as u32).map(|i| FrameRef::new("c01", i)).collect();
    let header = StoreHeader::new("synthetic", dim, tiny_grid(), frames);
    write_store(path, &header, rows).map_err(e2s)?;
    FeatureStore::open(path).map_err(e2s)
}

fn normalization_invariants() -> Outcome {
    let dir = tempdir()?;
    let (n, d) = (3001, 40);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let scales: Vec<f32> = (0..d).map(|j| 10f32.powi(j as i32 % 7 - 3)).collect();
    let offsets: Vec<f32> = (0..d).map(|_| rng.random_range(-50.0..50.0)).collect();
    let mut rows: Vec<Vec<f32>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| offsets[j] + scales[j] * rng.sample::<f32, _>(StandardNormal))
                .collect()
        })
        .collect();
    // column 3 constant, rows 7 and 900 all zero
    for r in rows.iter_mut() {
        r[3] = 0.0;
    }
    rows[7] = vec![0.0; d];
    rows[900] = vec![0.0; d];
    let store = flat_store(&dir.path().join("norm.pfv"), d, &rows)?;

    let mut worst = [0f64; 4];
    for (slot, kind) in ["zscore", "zeroone", "l1", "l2"].into_iter().enumerate() {
        let normalizer = normlib::fit(kind, d, store.batches(257).map_err(e2s)?).map_err(e2s)?;
        let mut data = store.read_all().map_err(e2s)?;
        normalizer.apply(&mut data, d).map_err(e2s)?;
        let out: Vec<&[f32]> = data.chunks_exact(d).collect();
        match kind {
            "zscore" | "zeroone" => {
                for j in 0..d {
                    let col: Vec<f64> = out.iter().map(|r| r[j] as f64).collect();
                    if j == 3 {
                        check(col.iter().all(|&v| v == 0.0), || format!("{kind}: constant column not 0"))?;
                        continue;
                    }
                    if kind == "zscore" {
                        let mean = col.iter().sum::<f64>() / n as f64;
                        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                        let err = mean.abs().max((std - 1.0).abs());
                        worst[slot] = worst[slot].max(err);
                        check(err < 1e-6, || format!("zscore column {j}: mean {mean} std {std}"))?;
                    } else {
                        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        check(lo == 0.0 && hi == 1.0, || format!("zeroone column {j}: [{lo}, {hi}]"))?;
                    }
                }
            }
            _ => {
                for (i, r) in out.iter().enumerate() {
                    if i == 7 || i == 900 {
                        check(r.iter().all(|&v| v == 0.0), || format!("{kind}: zero row changed"))?;
                        continue;
                    }
                    let norm = if kind == "l1" {
                        r.iter().map(|v| v.abs() as f64).sum::<f64>()
                    } else {
                        r.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt()
                    };
                    worst[slot] = worst[slot].max((norm - 1.0).abs());
                    check((norm - 1.0).abs() < 1e-6, || format!("{kind} row {i}: norm {norm}"))?;
                }
            }
        }
    }
    Ok(format!(
        "max dev zscore {:.1e}, l1 {:.1e}, l2 {:.1e}; zeroone exact",
        worst[0], worst[2], worst[3]
    ))
}

// ---- 2: IPCA vs full decomposition -----------------------------------------

/// Top-k eigenvectors of the scatter matrix, as a d x k matrix.
fn oracle_basis(x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let mut c = x.clone();
    for mut r in c.row_iter_mut() {
        r -= &mean;
    }
    let scatter = c.transpose() * &c / n;
    let eig = SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(x.ncols(), k, |i, j| eig.eigenvectors[(i, order[j])])
}

/// Sine of the largest principal angle between two orthonormal bases.
fn max_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let resid = a - b * (b.transpose() * a);
    let s = resid.singular_values().max().min(1.0);
    s.asin()
}

fn to_f32(x: &DMatrix<f64>) -> Vec<f32> {
    let mut out = Vec::with_capacity(x.len());
    for r in x.row_iter() {
        out.extend(r.iter().map(|&v| v as f32));
    }
    out
}

fn from_f32(rows: &[f32], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows.len() / d, d, &rows.iter().map(|&v| v as f64).collect::<Vec<_>>())
}

fn ipca_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (n, d) = (500, 64);
    let raw: Vec<f32> = (0..n * d)
        .map(|i| rng.sample::<f32, _>(StandardNormal) * (1.0 + (i % d) as f32 * 0.25))
        .collect();
    let x = from_f32(&raw, d);
    let mut single = Vec::new();
    for k in [16, 50] {
        let mut model = IpcaModel::new(k, d).map_err(e2s)?;
        model.partial_fit(&raw).map_err(e2s)?;
        let got = model.components().transpose();
        let angle = max_angle(&got, &oracle_basis(&x, k));
        check(angle < 1e-6, || format!("single batch k={k}: angle {angle:.3e}"))?;
        single.push(angle);
    }

    // Two batches; top-k variance 100x the rest, so singular values differ 10x.
    let k = 16;
    let q = {
        let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        g.qr().q()
    };
    let mut x = DMatrix::<f64>::from_fn(n, d, |_, j| {
        let sd = if j < k { 10.0 } else { 1.0 };
        sd * rng.sample::<f64, _>(StandardNormal)
    }) * q.transpose();
    for mut r in x.row_iter_mut() {
        r.add_scalar_mut(3.0);
    }
    let rows = to_f32(&x);
    let x = from_f32(&rows, d);
    let mut model = IpcaModel::new(k, d).map_err(e2s)?;
    let half = n / 2 * d;
    model.partial_fit(&rows[..half]).map_err(e2s)?;
    model.partial_fit(&rows[half..]).map_err(e2s)?;
    let angle = max_angle(&model.components().transpose(), &oracle_basis(&x, k));
    check(angle < 1e-3, || format!("two batches: angle {angle:.3e}"))?;
    Ok(format!(
        "single-batch angles {:.1e} (k=16), {:.1e} (k=50); two-batch {:.1e}",
        single[0], single[1], angle
    ))
}

// ---- 3: ANN ----------------------------------------------------------------

fn scan(points: &[f32], d: usize, q: &[f32]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.chunks_exact(d).enumerate() {
        let sq: f64 = p.iter().zip(q).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum();
        if sq < best.1 {
            best = (i, sq);
        }
    }
    (best.0, best.1.sqrt())
}

fn ann_vs_scan() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut checked = 0usize;
    for inst in 0..100 {
        let n = rng.random_range(1..=2000);
        let d = rng.random_range(1..=100);
        // coarse grid values on some instances force ties and duplicates
        let coarse = inst % 3 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> f32 {
            if coarse {
                rng.random_range(0..4) as f32
            } else {
                rng.sample(StandardNormal)
            }
        };
        let data: Vec<f32> = (0..n * d).map(|_| draw(&mut rng)).collect();
        let mut queries: Vec<f32> = (0..20 * d).map(|_| draw(&mut rng)).collect();
        queries.extend_from_slice(&data[..d]);
        let exact = annindex::build("exact", Points::new(d, data.clone()).map_err(e2s)?, &AnnParams::default())
            .map_err(e2s)?;
        let params = AnnParams {
            leaf_size: rng.random_range(1..=64),
            budget: rng.random_range(1..=16),
            trees: rng.random_range(1..=4),
            seed: inst,
        };
        let approx = annindex::build("approx", Points::new(d, data.clone()).map_err(e2s)?, &params).map_err(e2s)?;
        let ex = exact.batch_nn_distances(&queries).map_err(e2s)?;
        let ap = approx.batch_nn_distances(&queries).map_err(e2s)?;
        for (qi, q) in queries.chunks_exact(d).enumerate() {
            let (id, dist) = scan(&data, d, q);
            check(ex[qi].neighbor_id == id && ex[qi].distance == dist, || {
                format!("instance {inst} query {qi}: exact {:?} vs scan ({id}, {dist})", ex[qi])
            })?;
            check(ap[qi].distance >= dist, || {
                format!("instance {inst} query {qi}: approx {} below exact {dist}", ap[qi].distance)
            })?;
            checked += 1;
        }
    }

    let (n, d, nq) = (5000, 50, 500);
    let data: Vec<f32> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let queries: Vec<f32> = (0..nq * d).map(|_| rng.sample(StandardNormal)).collect();
    let exact = BruteForce::new(Points::new(d, data.clone()).map_err(e2s)?);
    let forest = KdForest::build(Points::new(d, data).map_err(e2s)?, &AnnParams::default()).map_err(e2s)?;
    let ex = exact.batch_nn_distances(&queries).map_err(e2s)?;
    let ap = forest.batch_nn_distances(&queries).map_err(e2s)?;
    let hits = ex.iter().zip(&ap).filter(|(e, a)| e.neighbor_id == a.neighbor_id).count();
    let recall = hits as f64 / nq as f64;
    check(ex.iter().zip(&ap).all(|(e, a)| a.distance >= e.distance), || "approx below exact".into())?;
    check(recall >= 0.95, || format!("recall@1 {recall:.3} < 0.95"))?;
    Ok(format!("{checked} queries match linear scan; recall@1 {recall:.3} with defaults"))
}

// ---- 4: AUC / EER ----------------------------------------------------------

fn pairwise_auc(pairs: &[(f64, bool)]) -> f64 {
    let (mut wins, mut total) = (0.0, 0.0);
    for &(sp, lp) in pairs {
        if !lp {
            continue;
        }
        for &(sn, ln) in pairs {
            if ln {
                continue;
            }
            total += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / total
}

fn auc_eer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0f64;
    for set in 0..200 {
        let n = rng.random_range(2..300);
        let levels = rng.random_range(2..20);
        let mut pairs: Vec<(f64, bool)> = (0..n)
            .map(|_| (rng.random_range(0..levels) as f64 * 0.5, rng.random_bool(0.3)))
            .collect();
        pairs[0].1 = true;
        pairs[1].1 = false;
        let oracle = pairwise_auc(&pairs);
        let report = evalkit::roc_auc_pairs(&pairs).map_err(e2s)?;
        let trap = evalkit::trapezoid_auc(&report.fpr, &report.tpr);
        let err = (report.auc - oracle).abs().max((trap - oracle).abs());
        worst = worst.max(err);
        check(err < 1e-9, || format!("set {set}: auc {} trapezoid {trap} oracle {oracle}", report.auc))?;

        for (name, f) in [
            ("exp", Box::new(|s: f64| s.exp()) as Box<dyn Fn(f64) -> f64>),
            ("affine", Box::new(|s: f64| 3.5 * s - 7.0)),
        ] {
            let mapped: Vec<(f64, bool)> = pairs.iter().map(|&(s, l)| (f(s), l)).collect();
            let m = evalkit::roc_auc_pairs(&mapped).map_err(e2s)?;
            check((m.auc - report.auc).abs() < 1e-12, || format!("set {set}: {name} map changed auc"))?;
        }
    }

    let perfect: Vec<(f64, bool)> = (0..100).map(|i| (i as f64, i >= 60)).collect();
    let p = evalkit::roc_auc_pairs(&perfect).map_err(e2s)?;
    check(p.eer == 0.0 && p.auc == 1.0, || format!("perfect ranking: auc {} eer {}", p.auc, p.eer))?;

    let mut labels: Vec<bool> = (0..10_000).map(|i| i % 2 == 0).collect();
    labels.shuffle(&mut rng);
    let random: Vec<(f64, bool)> = labels.into_iter().map(|l| (rng.random::<f64>(), l)).collect();
    let r = evalkit::roc_auc_pairs(&random).map_err(e2s)?;
    check((r.eer - 0.5).abs() <= 0.05, || format!("random eer {}", r.eer))?;
    Ok(format!("max auc error {worst:.1e} over 200 sets; random eer {:.3}", r.eer))
}

// ---- 5: planted outliers ---------------------------------------------------

fn planted_end_to_end() -> Outcome {
    let dir = tempdir()?;
    let ds = write_planted(dir.path(), &PlantedSpec::default()).map_err(e2s)?;
    let mut lowest = f64::INFINITY;
    let mut cells = 0;
    for mode in ["exact", "approx"] {
        for norm in ["zscore", "zeroone", "l1", "l2"] {
            for dims in [50, 100] {
                let mut cfg = ExperimentConfig::new(&ds.manifest_path, &ds.train_store, &ds.test_store);
                cfg.norm = norm.into();
                cfg.dims = dims;
                cfg.ann.mode = mode.into();
                let r = run_experiment(&cfg).map_err(e2s)?;
                check(r.auc >= 0.99, || format!("{mode} {norm} k={dims}: auc {}", r.auc))?;
                lowest = lowest.min(r.auc);
                cells += 1;
            }
        }
    }
    Ok(format!("{cells} cells, lowest auc {lowest:.4}"))
}

// ---- 6: determinism --------------------------------------------------------

fn grid_is_deterministic() -> Outcome {
    let dir = tempdir()?;
    let spec = PlantedSpec { outlier_sigma: 3.0, seed: 6, ..PlantedSpec::default() };
    let ds = write_planted(dir.path(), &spec).map_err(e2s)?;
    let run = |name: &str| -> Result<(Vec<u8>, Vec<Vec<u8>>), String> {
        let out = dir.path().join(name);
        let grid = GridConfig {
            manifest: ds.manifest_path.clone(),
            extractors: vec![ExtractorStores {
                name: "synthetic".into(),
                train_store: ds.train_store.clone(),
                test_store: ds.test_store.clone(),
            }],
            dims: vec![20, 50],
            norms: vec!["zscore".into(), "zeroone".into(), "l1".into(), "l2".into()],
            ann: runner::AnnSettings { budget: 2, leaf_size: 16, ..Default::default() },
            seed: 42,
            out: Some(out.clone()),
            batch_rows: 700,
        };
        let rows = run_grid(&grid, |_| {}).map_err(e2s)?;
        check(rows.iter().all(|(r, _)| r.is_ok()), || "a grid cell failed".into())?;
        let results = std::fs::read(out.join(runner::RESULTS_FILE)).map_err(e2s)?;
        let scores = grid
            .cells()
            .iter()
            .map(|(_, c)| std::fs::read(c.out.as_ref().unwrap().join(runner::SCORES_FILE)).map_err(e2s))
            .collect::<Result<_, _>>()?;
        Ok((results, scores))
    };
    let a = run("a")?;
    let b = run("b")?;
    check(a.0 == b.0, || "results CSVs differ".into())?;
    check(a.1 == b.1, || "per-frame score CSVs differ".into())?;
    Ok(format!("results.csv ({} bytes) and {} score CSVs byte-identical", a.0.len(), a.1.len()))
}

// ---- 7: streaming memory ---------------------------------------------------

const HEAP_CAP: usize = 8 << 20;

fn streaming_memory() -> Outcome {
    let dir = tempdir()?;
    let spec = PlantedSpec {
        dim: 64,
        train_clips: 8,
        test_clips: 1,
        anomalous_clips: 0,
        frames_per_clip: 1100,
        ..PlantedSpec::default()
    };
    let ds = write_planted(dir.path(), &spec).map_err(e2s)?;
    let size = std::fs::metadata(&ds.train_store).map_err(e2s)?.len() as usize;
    check(size >= 4 * HEAP_CAP, || format!("store only {size} bytes"))?;

    let mut cfg = ExperimentConfig::new(&ds.manifest_path, &ds.train_store, &ds.test_store);
    cfg.dims = 32;
    let base = LIVE.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let train = FeatureStore::open(&ds.train_store).map_err(e2s)?;
    let (_normalizer, ipca) = runner::fit_models(&cfg, &train).map_err(e2s)?;
    let peak = PEAK.load(Ordering::Relaxed) - base;
    check(ipca.n_seen() == train.n_rows(), || "IPCA did not see every row".into())?;
    check(peak <= HEAP_CAP, || format!("peak heap {} KiB over {} KiB cap", peak >> 10, HEAP_CAP >> 10))?;
    Ok(format!(
        "store {} MiB, peak heap {} KiB (cap {} KiB)",
        size >> 20,
        peak >> 10,
        HEAP_CAP >> 10
    ))
}

// ---- UCSD reference results -----------------------------------------------

const UCSD_ENV: &str = "PATCHAD_UCSD_DATA";

/// Layout under `$PATCHAD_UCSD_DATA`: `<dataset>/manifest.toml` and
/// `<dataset>/<split>_<extractor>.pfv` for dataset `ped1` and `ped2`.
fn ucsd_root() -> Option<PathBuf> {
    let root = PathBuf::from(std::env::var_os(UCSD_ENV)?);
    ["ped1", "ped2"]
        .iter()
        .all(|d| root.join(d).join("manifest.toml").is_file())
        .then_some(root)
}

fn ucsd_cell(root: &Path, dataset: &str, extractor: &str, dims: usize, norm: &str) -> Result<(f64, f64), String> {
    let dir = root.join(dataset);
    let mut cfg = ExperimentConfig::new(
        dir.join("manifest.toml"),
        dir.join(format!("train_{extractor}.pfv")),
        dir.join(format!("test_{extractor}.pfv")),
    );
    cfg.dims = dims;
    cfg.norm = norm.into();
    let r = run_experiment(&cfg).map_err(|e| format!("{dataset} {extractor} k={dims} {norm}: {e}"))?;
    Ok((r.auc * 100.0, r.eer * 100.0))
}

fn within(got: f64, want: f64, what: &str) -> Result<(), String> {
    check((got - want).abs() <= 2.5, || format!("{what} {got:.2} vs {want:.2}"))
}

fn ucsd_reference(root: &Path) -> Outcome {
    let (auc, _) = ucsd_cell(root, "ped2", "xception", 100, "zscore")?;
    within(auc, 88.93, "ped2 xception k100 zscore auc")?;
    let (_, eer) = ucsd_cell(root, "ped2", "xception", 100, "zeroone")?;
    within(eer, 19.55, "ped2 xception k100 zeroone eer")?;

    let mut best: Option<(f64, f64)> = None;
    for dims in [50, 100] {
        for norm in ["zeroone", "zscore", "l1", "l2"] {
            let cell = ucsd_cell(root, "ped1", "vgg16", dims, norm)?;
            best = Some(match best {
                Some(b) => (b.0.max(cell.0), b.1.min(cell.1)),
                None => cell,
            });
        }
    }
    let (best_auc, best_eer) = best.expect("eight cells");
    within(best_auc, 64.06, "ped1 vgg16 best auc")?;
    within(best_eer, 40.40, "ped1 vgg16 best eer")?;

    let (zs, _) = ucsd_cell(root, "ped2", "resnet50", 100, "zscore")?;
    let (l1, _) = ucsd_cell(root, "ped2", "resnet50", 100, "l1")?;
    check(zs > l1, || format!("ped2 resnet50: zscore {zs:.2} not above l1 {l1:.2}"))?;
    let (p1, _) = ucsd_cell(root, "ped1", "xception", 100, "zscore")?;
    check(auc > p1, || format!("xception: ped2 {auc:.2} not above ped1 {p1:.2}"))?;
    Ok(format!(
        "ped2 xception auc {auc:.2} eer(zeroone) {eer:.2}; ped1 vgg16 best auc {best_auc:.2} eer {best_eer:.2}"
    ))
}

// ---- driver ----------------------------------------------------------------

struct Criterion {
    id: &'static str,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria = [
        Criterion { id: "1", name: "normalization invariants", limit: Some(Duration::from_secs(10)), run: normalization_invariants },
        Criterion { id: "2", name: "IPCA vs full decomposition", limit: Some(Duration::from_secs(30)), run: ipca_oracle },
        Criterion { id: "3", name: "ANN vs brute force", limit: Some(Duration::from_secs(60)), run: ann_vs_scan },
        Criterion { id: "4", name: "AUC/EER oracle", limit: None, run: auc_eer_oracle },
        Criterion { id: "5", name: "planted-outlier end-to-end", limit: Some(Duration::from_secs(120)), run: planted_end_to_end },
        Criterion { id: "6", name: "grid determinism", limit: None, run: grid_is_deterministic },
        Criterion { id: "7", name: "streaming memory", limit: None, run: streaming_memory },
    ];
    let selected = |id: &str, name: &str| filter.is_empty() || filter.iter().any(|f| id == f || name.contains(f.as_str()));

    let mut failed = 0;
    for c in criteria.iter().filter(|c| selected(c.id, c.name)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if took > limit => Err(format!("took {took:.1?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS [{}] {} ({took:.1?}): {detail}", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {} ({took:.1?}): {why}", c.id, c.name);
            }
        }
    }

    if selected("ucsd", "UCSD reference results") {
        match ucsd_root() {
            None => println!("SKIP [ucsd] UCSD reference results: set {UCSD_ENV} to a directory with ped1/ and ped2/ stores"),
            Some(root) => {
                let start = Instant::now();
                match ucsd_reference(&root) {
                    Ok(detail) => println!("PASS [ucsd] UCSD reference results ({:.1?}): {detail}", start.elapsed()),
                    Err(why) => {
                        failed += 1;
                        println!("FAIL [ucsd] UCSD reference results ({:.1?}): {why}", start.elapsed());
                    }
                }
            }
        }
    }

    if failed > 0 {
        std::process::exit(1);
    }
}
