use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parcel_trace::{FilterKind, LossKind, Zone};

#[derive(Parser, Debug)]
#[command(
    name = "parcel-trace",
    version,
    about = "Cadastral boundary delineation: masks, filters, thinning, vectors, buffered scores"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply an edge-enhancement filter to a grayscale image.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "none")]
        filter: FilterKind,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build a 3-class training mask from an instance annotation.
    Makemask {
        /// Instance PNG: every distinct non-black color is one field.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 2)]
        buffer: u32,
        /// Accept buffers other than 1, 2 or 5.
        #[arg(long)]
        allow_any_buffer: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Cut an image (PNG) or tensor (CBT) into square tiles.
    Tile {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Reassemble tiles written by `tile`.
    Stitch {
        #[arg(long)]
        tiles: PathBuf,
        /// Defaults to `<tiles>/grid.json`.
        #[arg(long)]
        grid_json: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Non-learned segmenter: strong Laplacian response becomes boundary.
    SegmentBaseline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = parcel_trace::segmentation::DEFAULT_EDGE_THRESHOLD)]
        threshold: i32,
        #[arg(long)]
        output: PathBuf,
    },
    /// Turn a directory of CBT probability tiles into a class mask.
    Ingest {
        #[arg(long)]
        tiles: PathBuf,
        #[arg(long)]
        grid_json: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Thin the boundary class of a mask to a 1-px skeleton.
    Skeletonize {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Trace a skeleton PNG into polylines.
    Vectorize {
        #[arg(long)]
        skeleton: PathBuf,
        #[arg(long)]
        world_file: Option<PathBuf>,
        /// North-up georeference at origin (0, 0) when no world file is given.
        #[arg(long)]
        gsd: Option<f64>,
        #[arg(long, value_enum, default_value_t = VectorFormat::Shapefile)]
        format: VectorFormat,
        /// Base path for shapefiles (extensions are added), file path for GeoJSON.
        #[arg(long)]
        output: PathBuf,
    },
    /// Buffered precision / recall / F-score of a detected boundary.
    Evaluate {
        #[arg(long)]
        detected: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        bf: u32,
        #[arg(long)]
        gsd: Option<f64>,
        #[arg(long, default_value = "rural")]
        zone: Zone,
        /// Report raw recall in the F-score instead of clamping it to 1.
        #[arg(long)]
        no_clamp: bool,
        /// Also write the result as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the whole chain and write a manifest.
    Pipeline(Box<PipelineArgs>),
    /// Generate a synthetic parcel scene with its instance annotation.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[arg(long, default_value_t = 8)]
        parcels: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate a loss on CBT prediction and target tensors.
    LossEval {
        #[arg(long)]
        kind: LossKind,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Loss settings as JSON (kebab-case keys); `kind` is overridden.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorFormat {
    Shapefile,
    Geojson,
}

/// Every field is optional so that flags can override a `--config` file.
#[derive(Args, Debug, Default)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub filter: Option<FilterKind>,
    #[arg(long)]
    pub tile_size: Option<usize>,
    #[arg(long)]
    pub buffer: Option<u32>,
    #[arg(long)]
    pub allow_any_buffer: bool,
    /// `baseline` or a directory of CBT tiles.
    #[arg(long)]
    pub prediction: Option<String>,
    #[arg(long)]
    pub threshold: Option<i32>,
    #[arg(long)]
    pub gsd: Option<f64>,
    #[arg(long)]
    pub zone: Option<Zone>,
    /// Comma-separated buffer widths in pixels.
    #[arg(long, value_delimiter = ',')]
    pub bf: Option<Vec<u32>>,
    #[arg(long)]
    pub evaluate: bool,
    #[arg(long)]
    pub world_file: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
