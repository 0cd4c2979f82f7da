//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use parcel_trace::io::{decode_cbt, encode_cbt, load_class_png, save_class_png};
use parcel_trace::losses::{loss_eval, softmax, LossConfig};
use parcel_trace::segmentation::reference_boundary;
use parcel_trace::skeleton::CoordSpace;
use parcel_trace::{
    apply_georef, baseline_segment, build_semantic_mask, evaluate, finite_diff_check,
    read_shapefile, select_buffers, stitch, synth_scene, thin, tile, trace_polylines,
    write_shapefile, Class, ClassMask, EvalConfig, GeoRef, LossKind, MaskConfig, Polyline,
    PolylineSet, Raster, Tensor, Vertex, Zone,
};
use rand::Rng;

type Outcome = Result<String, String>;
/// Name, check, runtime limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn buffer_arithmetic() -> Outcome {
    let check = |gsd: f64, want: &[(u32, f64)], max_bf: u32| -> Result<(), String> {
        let got = select_buffers(gsd, Zone::Rural).map_err(|e| e.to_string())?;
        let last = got.last().map(|c| c.bf).unwrap_or(0);
        ensure(last == max_bf, || format!("gsd {gsd}: max BF {last}, want {max_bf}"))?;
        for &(bf, cm) in want {
            let c = got.iter().find(|c| c.bf == bf).ok_or(format!("gsd {gsd}: BF {bf} missing"))?;
            ensure(c.half_width_cm.round() == cm && (c.half_width_cm - cm).abs() < 1e-9, || {
                format!("gsd {gsd} BF {bf}: {} cm, want {cm}", c.half_width_cm)
            })?;
        }
        Ok(())
    };
    check(0.72, &[(5, 180.0), (6, 216.0)], 6)?;
    check(0.56, &[(7, 196.0), (8, 224.0)], 8)?;
    Ok("0.72 m -> BF 5,6 = 180,216 cm, max 6; 0.56 m -> BF 7,8 = 196,224 cm, max 8".into())
}

fn metric_oracle() -> Outcome {
    let mut r = common::rng(0xB0F);
    let mut worst = 0.0f64;
    for pair in 0..200 {
        let (dd, gd) = (r.gen_range(0.01..0.3), r.gen_range(0.01..0.1));
        let d = common::random_binary(&mut r, 64, 64, dd);
        let g = common::random_binary(&mut r, 64, 64, gd);
        for bf in 1..=8 {
            let e = evaluate(&d, &g, &EvalConfig::new(bf)).map_err(|e| e.to_string())?;
            let (tp, fp, fn_) = common::metric_oracle(&d, &g, bf);
            ensure((e.counts.tp, e.counts.fp, e.counts.fn_) == (tp, fp, fn_), || {
                format!("pair {pair} BF {bf}: got {:?}, oracle ({tp},{fp},{fn_})", e.counts)
            })?;
            let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let raw = if tp + fn_ > 0.0 { bf as f64 * tp / (tp + fn_) } else { 0.0 };
            let rc = raw.min(1.0);
            let f = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
            for (a, b) in [(e.precision, p), (e.raw_recall, raw), (e.recall, rc), (e.fscore, f)] {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("formula deviation {worst:e}"))?;
    Ok(format!("200 pairs x BF 1..8 exact counts, max formula deviation {worst:e}"))
}

fn gradient_checks() -> Outcome {
    let mut r = common::rng(0x6AD);
    let mut worst = 0.0f64;
    for kind in LossKind::ALL {
        let cfg = LossConfig::<f64>::of_kind(kind);
        for i in 0..100 {
            let z = common::random_logits(&mut r, 4, 4);
            let g = common::random_target(&mut r, 4, 4);
            let e = finite_diff_check(&z, &g, &cfg, 1e-4).map_err(|e| e.to_string())?;
            ensure(e <= 1e-4, || format!("{} instance {i}: relative error {e:e}", kind.name()))?;
            worst = worst.max(e);
        }
    }
    let tversky = LossConfig { tversky_alpha: 0.5, tversky_beta: 0.5, ..LossConfig::of_kind(LossKind::Tversky) };
    let dice = LossConfig::of_kind(LossKind::Dice);
    let mut gap = 0.0f64;
    for _ in 0..100 {
        let p = softmax(&common::random_logits(&mut r, 4, 4)).map_err(|e| e.to_string())?;
        let g = common::random_target(&mut r, 4, 4);
        let a = loss_eval(&p, &g, &tversky).map_err(|e| e.to_string())?;
        let b = loss_eval(&p, &g, &dice).map_err(|e| e.to_string())?;
        gap = gap.max((a - b).abs());
    }
    ensure(gap <= 1e-7, || format!("Tversky(0.5,0.5) vs Dice gap {gap:e}"))?;
    Ok(format!("7 kinds x 100 instances, max relative error {worst:e}; Tversky/Dice gap {gap:e}"))
}

fn thinning_suite() -> Outcome {
    let mut r = common::rng(0x7A1);
    for i in 0..100 {
        let b = common::random_blobs(&mut r, 48, 48);
        let t = thin(&b);
        ensure(thin(&t) == t, || format!("blob {i}: not idempotent"))?;
        let (before, after) = (common::count8(&b), common::count8(&t));
        ensure(before == after, || format!("blob {i}: {before} components became {after}"))?;
    }
    let bar = Raster::from_fn(12, 5, |x, y| (1..11).contains(&x) && (1..4).contains(&y));
    let t = thin(&bar);
    ensure(t == common::reference_zhang_suen(&bar), || "bar differs from reference".into())?;
    let rows: Vec<usize> = (0..5).filter(|&y| (0..12).any(|x| t.get(x, y))).collect();
    ensure(rows == [2], || format!("bar skeleton occupies rows {rows:?}"))?;
    Ok(format!("100 blobs idempotent + component-preserving; bar -> {} px centerline", t.count_ones()))
}

fn morphology_oracle() -> Outcome {
    let mut r = common::rng(0x30F);
    for i in 0..100 {
        let inst = common::random_instances(&mut r, 32);
        let mut bands = Vec::new();
        for b in [1u32, 2, 5] {
            let m = build_semantic_mask(&inst, &MaskConfig::new(b).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?
                .mask;
            ensure(m == common::semantic_mask_oracle(&inst, b as usize), || {
                format!("raster {i} ({}x{}), b={b}: differs from oracle", inst.width(), inst.height())
            })?;
            bands.push(m.select(Class::Boundary));
        }
        for w in bands.windows(2) {
            ensure(w[0].data().iter().zip(w[1].data()).all(|(&a, &b)| !a || b), || {
                format!("raster {i}: boundary band not monotone")
            })?;
        }
    }
    Ok("100 rasters x b in {1,2,5} equal the Chebyshev oracle; bands nested".into())
}

fn format_round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = common::rng(0xF0F);
    for i in 0..20 {
        let (h, w, c) = (r.gen_range(1..20), r.gen_range(1..20), r.gen_range(1..5));
        let t = Tensor::new(h, w, c, (0..h * w * c).map(|_| r.gen::<f32>() * 2.0 - 1.0).collect())
            .map_err(|e| e.to_string())?;
        let bytes = encode_cbt(&t).map_err(|e| e.to_string())?;
        let back = decode_cbt(&bytes).map_err(|e| e.to_string())?;
        ensure(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
            format!("CBT fixture {i} not bit-exact")
        })?;

        let mask: ClassMask = Raster::from_fn(64, 64, |_, _| Class::ALL[r.gen_range(0..3)]);
        let path = dir.path().join(format!("m{i}.png"));
        save_class_png(&mask, &path).map_err(|e| e.to_string())?;
        ensure(load_class_png(&path).map_err(|e| e.to_string())? == mask, || {
            format!("class PNG fixture {i} differs")
        })?;

        let lines: Vec<Polyline> = (0..20)
            .map(|_| {
                let n = r.gen_range(2..10);
                let mut v: Vec<Vertex> = Vec::new();
                while v.len() < n {
                    let p = Vertex::new(r.gen_range(-1e5..1e5), r.gen_range(-1e5..1e5));
                    if v.last() != Some(&p) {
                        v.push(p);
                    }
                }
                Polyline::new(v).expect("distinct vertices")
            })
            .collect();
        let set = PolylineSet { space: CoordSpace::World, lines, isolated: vec![] };
        let base = dir.path().join(format!("s{i}"));
        write_shapefile(&set, &base).map_err(|e| e.to_string())?;
        let back = read_shapefile(&base).map_err(|e| e.to_string())?;
        ensure(back == set.lines, || format!("shapefile fixture {i} differs"))?;
    }
    for n in [255, 256, 300, 512] {
        let img = Raster::from_fn(n, n, |_, _| r.gen::<u8>());
        let (tiles, grid) = tile(&img, 256).map_err(|e| e.to_string())?;
        ensure(stitch(&tiles, &grid).map_err(|e| e.to_string())? == img, || {
            format!("{n}x{n}: stitch(tile) differs")
        })?;
    }
    Ok("20 CBT / class-PNG / 20-line shapefile fixtures exact; tile->stitch identity at 255,256,300,512".into())
}

fn end_to_end() -> Outcome {
    let (img, labels) = synth_scene(42, 512, 512, 8).map_err(|e| e.to_string())?;
    let mask = baseline_segment(&img, parcel_trace::segmentation::DEFAULT_EDGE_THRESHOLD);
    let detected = thin(&mask.select(Class::Boundary));
    let reference = reference_boundary(&labels, 2).map_err(|e| e.to_string())?;
    let e = evaluate(&detected, &reference, &EvalConfig::new(3)).map_err(|e| e.to_string())?;
    ensure(e.fscore >= 0.95, || format!("F-score {:.4} < 0.95 ({})", e.fscore, e.report()))?;

    let lines = trace_polylines(&detected).map_err(|e| e.to_string())?;
    let geo = GeoRef::north_up(0.72, 0.0, 0.0).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = dir.path().join("boundaries");
    write_shapefile(&apply_georef(&lines, &geo), &base).map_err(|e| e.to_string())?;
    let back = read_shapefile(&base).map_err(|e| e.to_string())?;
    let vertices: usize = back.iter().map(|l| l.vertices().len()).sum();
    ensure(vertices > 0, || "shapefile has no vertices".into())?;
    Ok(format!("F={:.4} at BF=3; shapefile {} lines / {vertices} vertices", e.fscore, back.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("buffer arithmetic", buffer_arithmetic, 1),
        ("metric oracle equivalence", metric_oracle, 30),
        ("gradient checks", gradient_checks, 60),
        ("thinning suite", thinning_suite, 30),
        ("morphology oracle", morphology_oracle, 30),
        ("format round trips", format_round_trips, 30),
        ("end-to-end synthetic pipeline", end_to_end, 60),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > Duration::from_secs(limit) => {
                Err(format!("{msg}; took {took:.2?}, limit {limit} s"))
            }
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  {name} [{took:.2?}] {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name} [{took:.2?}] {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
