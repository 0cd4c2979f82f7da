use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use parcel_trace::io::{
    load_binary_png, load_class_png, load_gray, load_instances, read_cbt, save_class_png,
    save_gray, save_rgb, write_cbt,
};
use parcel_trace::losses::{loss_eval, LossConfig};
use parcel_trace::metrics::half_width_m;
use parcel_trace::vector::{read_world_file, write_geojson};
use parcel_trace::{
    apply_filter, apply_georef, baseline_segment, build_semantic_mask, evaluate,
    ingest_predictions, stitch, stitch_tensor, synth_scene, thin, tile, tile_tensor,
    trace_polylines, write_boundary_png, write_shapefile, Class, Error, EvalConfig, GeoRef,
    LabelRaster, MaskConfig, OneHotTarget, PolylineSet, TileGrid,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::args::{Command, VectorFormat};
use crate::pipeline;

/// Why a command failed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
    Stage(&'static str, Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) | Failure::Stage(_, e) => {
                if e.is_io() {
                    2
                } else {
                    1
                }
            }
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(msg) => f.write_str(msg),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Stage(stage, e) => write!(f, "stage {stage}: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Color for instance label `l`: an odd multiplier is a bijection on
/// 24-bit values, so distinct labels get distinct non-black colors.
fn label_color(l: u32) -> [u8; 3] {
    if l == 0 {
        return [0, 0, 0];
    }
    let c = l.wrapping_mul(0x9E_3779) & 0xFF_FFFF;
    [(c >> 16) as u8, (c >> 8) as u8, c as u8]
}

pub fn save_instances(labels: &LabelRaster, path: &Path) -> Result<(), Error> {
    let rgb: Vec<u8> = labels.data().iter().flat_map(|&l| label_color(l)).collect();
    save_rgb(labels.width(), labels.height(), &rgb, path)
}

/// World file if given, else a north-up transform at the origin when a
/// GSD is known, else pixel coordinates.
pub fn georef(world_file: Option<&Path>, gsd: Option<f64>) -> Result<Option<GeoRef>, Error> {
    match (world_file, gsd) {
        (Some(p), gsd) => read_world_file(p, gsd).map(Some),
        (None, Some(gsd)) => GeoRef::north_up(gsd, 0.0, 0.0).map(Some),
        (None, None) => Ok(None),
    }
}

pub fn warn_isolated(set: &PolylineSet) {
    if !set.isolated.is_empty() {
        eprintln!(
            "warning: {} isolated skeleton pixel(s) cannot form polylines and are not written",
            set.isolated.len()
        );
    }
}

fn tile_cmd(input: &Path, size: usize, out_dir: &Path) -> Result<(), Error> {
    create_dir(out_dir)?;
    let is_cbt = input.extension().is_some_and(|e| e == "cbt");
    let grid = if is_cbt {
        let (tiles, grid) = tile_tensor(&read_cbt(input)?, size)?;
        for ((r, c), t) in grid.positions().zip(&tiles) {
            write_cbt(t, out_dir.join(TileGrid::tile_name(r, c, "cbt")))?;
        }
        grid
    } else {
        let (tiles, grid) = tile(&load_gray(input)?, size)?;
        for ((r, c), t) in grid.positions().zip(&tiles) {
            save_gray(t, out_dir.join(TileGrid::tile_name(r, c, "png")))?;
        }
        grid
    };
    write_json(&grid, &out_dir.join("grid.json"))?;
    println!(
        "{} tiles ({} rows x {} columns) in {}",
        grid.tile_count(),
        grid.rows,
        grid.columns,
        out_dir.display()
    );
    Ok(())
}

fn tile_path(dir: &Path, r: usize, c: usize, ext: &str) -> Result<PathBuf, Error> {
    let p = dir.join(TileGrid::tile_name(r, c, ext));
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::MissingTile(p))
    }
}

fn stitch_cmd(dir: &Path, grid_json: Option<&Path>, output: &Path) -> Result<(), Error> {
    let grid_path = grid_json.map_or_else(|| dir.join("grid.json"), Path::to_path_buf);
    let grid: TileGrid = read_json(&grid_path)?;
    grid.validate()?;
    let positions: Vec<_> = grid.positions().collect();
    if dir.join(TileGrid::tile_name(0, 0, "cbt")).exists() {
        let tiles = positions
            .iter()
            .map(|&(r, c)| read_cbt(tile_path(dir, r, c, "cbt")?))
            .collect::<Result<Vec<_>, _>>()?;
        write_cbt(&stitch_tensor(&tiles, &grid)?, output)
    } else {
        let tiles = positions
            .iter()
            .map(|&(r, c)| load_gray(tile_path(dir, r, c, "png")?))
            .collect::<Result<Vec<_>, _>>()?;
        save_gray(&stitch(&tiles, &grid)?, output)
    }
}

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Preprocess { input, filter, output } => {
            save_gray(&apply_filter(&load_gray(&input)?, filter), &output)?;
        }
        Command::Makemask {
            instance,
            buffer,
            allow_any_buffer,
            output,
        } => {
            let cfg = MaskConfig {
                buffer,
                allow_any_buffer,
            };
            cfg.validate()?;
            let sm = build_semantic_mask(&load_instances(&instance)?, &cfg)?;
            for w in &sm.warnings {
                eprintln!("warning: {w}");
            }
            save_class_png(&sm.mask, &output)?;
        }
        Command::Tile { input, size, out_dir } => tile_cmd(&input, size, &out_dir)?,
        Command::Stitch {
            tiles,
            grid_json,
            output,
        } => stitch_cmd(&tiles, grid_json.as_deref(), &output)?,
        Command::SegmentBaseline {
            input,
            threshold,
            output,
        } => {
            save_class_png(&baseline_segment(&load_gray(&input)?, threshold), &output)?;
        }
        Command::Ingest {
            tiles,
            grid_json,
            output,
        } => {
            let grid: TileGrid = read_json(&grid_json)?;
            save_class_png(&ingest_predictions(&tiles, &grid)?, &output)?;
        }
        Command::Skeletonize { mask, output } => {
            let boundary = load_class_png(&mask)?.select(Class::Boundary);
            write_boundary_png(&thin(&boundary), &output)?;
        }
        Command::Vectorize {
            skeleton,
            world_file,
            gsd,
            format,
            output,
        } => {
            let mut set = trace_polylines(&load_binary_png(&skeleton)?)?;
            if let Some(geo) = georef(world_file.as_deref(), gsd)? {
                set = apply_georef(&set, &geo);
            }
            warn_isolated(&set);
            match format {
                VectorFormat::Shapefile => {
                    write_shapefile(&set, &output)?;
                }
                VectorFormat::Geojson => write_geojson(&set, &output)?,
            }
            println!("{} polylines, {} vertices", set.lines.len(), set.vertex_count());
        }
        Command::Evaluate {
            detected,
            reference,
            bf,
            gsd,
            zone,
            no_clamp,
            json,
        } => {
            let cfg = EvalConfig {
                bf,
                zone,
                gsd: gsd.unwrap_or(1.0),
                clamp_recall: !no_clamp,
            };
            cfg.validate()?;
            let d = load_binary_png(&detected)?;
            let r = load_binary_png(&reference)?;
            let result = evaluate(&d, &r, &cfg)?;
            println!("{}", result.report());
            let admissible = gsd.map(|_| cfg.is_admissible());
            if admissible == Some(false) {
                eprintln!(
                    "warning: BF={bf} half-width {:.3} m exceeds the {zone} limit of {} m",
                    half_width_m(bf, cfg.gsd),
                    zone.limit_m()
                );
            }
            if let Some(path) = json {
                let record = json!({
                    "detected": detected,
                    "reference": reference,
                    "bf": bf,
                    "gsd": gsd,
                    "zone": zone,
                    "half_width_m": gsd.map(|g| half_width_m(bf, g)),
                    "admissible": admissible,
                    "result": result,
                });
                write_json(&record, &path)?;
            }
        }
        Command::Pipeline(args) => pipeline::run(*args)?,
        Command::Synth {
            seed,
            width,
            height,
            parcels,
            out_dir,
        } => {
            let (img, labels) = synth_scene(seed, width, height, parcels)?;
            create_dir(&out_dir)?;
            save_gray(&img, out_dir.join("image.png"))?;
            save_instances(&labels, &out_dir.join("instances.png"))?;
            println!("wrote image.png and instances.png to {}", out_dir.display());
        }
        Command::LossEval {
            kind,
            pred,
            target,
            config,
        } => {
            let base: LossConfig<f64> = match config {
                Some(p) => read_json(&p)?,
                None => LossConfig::default(),
            };
            let cfg = LossConfig { kind, ..base };
            let p = read_cbt(&pred)?.cast::<f64>();
            let g = OneHotTarget::from_tensor(&read_cbt(&target)?)?;
            println!("{}", loss_eval(&p, &g, &cfg)?);
        }
    }
    Ok(())
}
