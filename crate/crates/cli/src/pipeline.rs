//! `pipeline`: preprocess -> tile -> segment -> boundary -> thin -> trace ->
//! (evaluate) with a manifest of every artifact.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use parcel_trace::io::{load_gray, load_instances, save_class_png, save_gray};
use parcel_trace::metrics::half_width_m;
use parcel_trace::segmentation::{reference_boundary, DEFAULT_EDGE_THRESHOLD};
use parcel_trace::{
    apply_filter, apply_georef, baseline_segment, build_semantic_mask, evaluate,
    ingest_predictions, stitch, thin, tile, trace_polylines, write_boundary_png, write_shapefile,
    Class, Error, EvalConfig, EvalResult, FilterKind, MaskConfig, TileGrid, Zone,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::PipelineArgs;
use crate::commands::{create_dir, georef, read_json, warn_isolated, write_json, Failure};
use crate::overlay::emit_overlay;

pub const BASELINE: &str = "baseline";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub instance: Option<PathBuf>,
    pub filter: FilterKind,
    pub tile_size: usize,
    pub buffer: u32,
    pub allow_any_buffer: bool,
    /// `baseline` or a directory of CBT probability tiles.
    pub prediction: String,
    pub threshold: i32,
    pub gsd: Option<f64>,
    pub zone: Zone,
    pub bf: Vec<u32>,
    pub evaluate: bool,
    pub world_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            instance: None,
            filter: FilterKind::None,
            tile_size: 256,
            buffer: 2,
            allow_any_buffer: false,
            prediction: BASELINE.into(),
            threshold: DEFAULT_EDGE_THRESHOLD,
            gsd: None,
            zone: Zone::Rural,
            bf: vec![3],
            evaluate: false,
            world_file: None,
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    /// Config file (if any) overridden by explicit flags.
    pub fn resolve(a: PipelineArgs) -> Result<Self, Failure> {
        let mut c: PipelineConfig = match &a.config {
            Some(p) => read_json(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => {$( if let Some(v) = a.$f { c.$f = v; } )*};
        }
        take!(filter, tile_size, buffer, prediction, threshold, zone, bf);
        macro_rules! take_opt {
            ($($f:ident),*) => {$( if a.$f.is_some() { c.$f = a.$f; } )*};
        }
        take_opt!(input, instance, gsd, world_file, out_dir);
        c.allow_any_buffer |= a.allow_any_buffer;
        c.evaluate |= a.evaluate;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let usage = |m: &str| Err(Failure::Usage(m.into()));
        if self.input.is_none() {
            return usage("pipeline needs --input");
        }
        if self.out_dir.is_none() {
            return usage("pipeline needs --out-dir");
        }
        if self.tile_size < 2 {
            return usage("tile size must be at least 2");
        }
        MaskConfig {
            buffer: self.buffer,
            allow_any_buffer: self.allow_any_buffer,
        }
        .validate()?;
        if let Some(g) = self.gsd {
            if !(g > 0.0 && g.is_finite()) {
                return usage("GSD must be positive");
            }
        }
        if self.evaluate {
            if self.instance.is_none() {
                return usage("--evaluate needs --instance: no reference available");
            }
            if self.bf.is_empty() || self.bf.contains(&0) {
                return usage("--bf must list at least one width >= 1");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub wall_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub bf: u32,
    pub half_width_m: Option<f64>,
    pub admissible: Option<bool>,
    pub result: EvalResult,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
    pub evaluation: Vec<Evaluation>,
    pub warnings: Vec<String>,
}

fn digest(path: &Path) -> Result<Artifact, Error> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Artifact {
        path: path.to_path_buf(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    })
}

struct Recorder {
    stages: Vec<StageRecord>,
}

impl Recorder {
    /// Runs one stage, then digests the files it read and wrote.
    fn stage<T>(
        &mut self,
        name: &'static str,
        inputs: &[PathBuf],
        body: impl FnOnce() -> Result<(T, Vec<PathBuf>), Error>,
    ) -> Result<T, Failure> {
        let start = Instant::now();
        let (value, outputs) = body().map_err(|e| Failure::Stage(name, e))?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let hash = |ps: &[PathBuf]| {
            ps.iter()
                .map(|p| digest(p))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::Stage(name, e))
        };
        self.stages.push(StageRecord {
            name,
            inputs: hash(inputs)?,
            outputs: hash(&outputs)?,
            wall_ms,
        });
        Ok(value)
    }
}

pub fn run(args: PipelineArgs) -> Result<(), Failure> {
    let cfg = PipelineConfig::resolve(args)?;
    let input = cfg.input.clone().expect("validated");
    let out = cfg.out_dir.clone().expect("validated");
    create_dir(&out)?;
    let mut rec = Recorder { stages: Vec::new() };
    let mut warnings = Vec::new();

    let pre_path = out.join("preprocessed.png");
    let img = rec.stage("preprocess", std::slice::from_ref(&input), || {
        let img = apply_filter(&load_gray(&input)?, cfg.filter);
        save_gray(&img, &pre_path)?;
        Ok((img, vec![pre_path.clone()]))
    })?;

    let tile_dir = out.join("tiles");
    let (tiles, grid) = rec.stage("tile", std::slice::from_ref(&pre_path), || {
        create_dir(&tile_dir)?;
        let (tiles, grid) = tile(&img, cfg.tile_size)?;
        let mut paths = Vec::new();
        for ((r, c), t) in grid.positions().zip(&tiles) {
            let p = tile_dir.join(TileGrid::tile_name(r, c, "png"));
            save_gray(t, &p)?;
            paths.push(p);
        }
        let grid_path = tile_dir.join("grid.json");
        write_json(&grid, &grid_path)?;
        paths.push(grid_path);
        Ok(((tiles, grid), paths))
    })?;

    let mask_path = out.join("mask.png");
    let mask = if cfg.prediction == BASELINE {
        // the baseline's flood fill needs the whole scene, so it runs on
        // the reassembled image rather than per tile
        let stitched_path = out.join("stitched.png");
        let stitched = rec.stage("stitch", &[], || {
            let s = stitch(&tiles, &grid)?;
            save_gray(&s, &stitched_path)?;
            Ok((s, vec![stitched_path.clone()]))
        })?;
        rec.stage("segment-baseline", std::slice::from_ref(&stitched_path), || {
            let m = baseline_segment(&stitched, cfg.threshold);
            save_class_png(&m, &mask_path)?;
            Ok((m, vec![mask_path.clone()]))
        })?
    } else {
        let dir = PathBuf::from(&cfg.prediction);
        let inputs: Vec<PathBuf> = grid
            .positions()
            .map(|(r, c)| dir.join(TileGrid::tile_name(r, c, "cbt")))
            .filter(|p| p.exists())
            .collect();
        rec.stage("ingest", &inputs, || {
            let m = ingest_predictions(&dir, &grid)?;
            save_class_png(&m, &mask_path)?;
            Ok((m, vec![mask_path.clone()]))
        })?
    };

    let boundary_path = out.join("boundary.png");
    let boundary = rec.stage("boundary", std::slice::from_ref(&mask_path), || {
        let b = mask.select(Class::Boundary);
        write_boundary_png(&b, &boundary_path)?;
        Ok((b, vec![boundary_path.clone()]))
    })?;

    let skeleton_path = out.join("skeleton.png");
    let skeleton = rec.stage("thin", std::slice::from_ref(&boundary_path), || {
        let s = thin(&boundary);
        write_boundary_png(&s, &skeleton_path)?;
        Ok((s, vec![skeleton_path.clone()]))
    })?;

    let mut trace_inputs = vec![skeleton_path.clone()];
    trace_inputs.extend(cfg.world_file.clone());
    let set = rec.stage("trace", &trace_inputs, || {
        let mut set = trace_polylines(&skeleton)?;
        if let Some(geo) = georef(cfg.world_file.as_deref(), cfg.gsd)? {
            set = apply_georef(&set, &geo);
        }
        let paths = write_shapefile(&set, out.join("boundaries"))?;
        Ok((set, paths.to_vec()))
    })?;
    warn_isolated(&set);
    if !set.isolated.is_empty() {
        warnings.push(format!("{} isolated skeleton pixel(s) not vectorized", set.isolated.len()));
    }

    let mut reference = None;
    if let Some(inst_path) = cfg.instance.clone() {
        let ref_mask_path = out.join("reference_mask.png");
        let ref_path = out.join("reference_skeleton.png");
        reference = Some(rec.stage("reference", std::slice::from_ref(&inst_path), || {
            let inst = load_instances(&inst_path)?;
            let mask_cfg = MaskConfig {
                buffer: cfg.buffer,
                allow_any_buffer: cfg.allow_any_buffer,
            };
            let sm = build_semantic_mask(&inst, &mask_cfg)?;
            warnings.extend(sm.warnings);
            save_class_png(&sm.mask, &ref_mask_path)?;
            let r = reference_boundary(&inst, cfg.buffer)?;
            write_boundary_png(&r, &ref_path)?;
            Ok((r, vec![ref_mask_path.clone(), ref_path.clone()]))
        })?);
    }

    let mut evaluation = Vec::new();
    if cfg.evaluate {
        let reference = reference.as_ref().expect("validated");
        let eval_path = out.join("evaluation.json");
        evaluation = rec.stage("evaluate", std::slice::from_ref(&skeleton_path), || {
            let mut rows = Vec::new();
            for &bf in &cfg.bf {
                let ec = EvalConfig {
                    bf,
                    zone: cfg.zone,
                    gsd: cfg.gsd.unwrap_or(1.0),
                    clamp_recall: true,
                };
                let result = evaluate(&skeleton, reference, &ec)?;
                println!("BF={bf}: {}", result.report());
                rows.push(Evaluation {
                    bf,
                    half_width_m: cfg.gsd.map(|g| half_width_m(bf, g)),
                    admissible: cfg.gsd.map(|_| ec.is_admissible()),
                    result,
                });
            }
            write_json(&rows, &eval_path)?;
            Ok((rows, vec![eval_path.clone()]))
        })?;
        for e in &evaluation {
            if e.admissible == Some(false) {
                warnings.push(format!("BF={} exceeds the {} tolerance at this GSD", e.bf, cfg.zone));
            }
        }
    }

    let overlay_path = out.join("overlay.png");
    rec.stage("overlay", &[pre_path.clone(), skeleton_path.clone()], || {
        emit_overlay(&img, &skeleton, reference.as_ref(), &overlay_path)?;
        Ok(((), vec![overlay_path.clone()]))
    })?;

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        stages: rec.stages,
        evaluation,
        warnings,
    };
    write_json(&manifest, &out.join("manifest.json"))?;
    println!(
        "{} polylines, {} vertices; manifest at {}",
        set.lines.len(),
        set.vertex_count(),
        out.join("manifest.json").display()
    );
    Ok(())
}
