//! Command-line front end: lattice export, optimization-based meshing,
//! rendering, multi-view reconstruction and metrics.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, LevelFilter};

use tetdeform::energies::EnergyConfig;
use tetdeform::io::{
    grid_from_tetgen, read_attributes, read_cameras, read_config, read_obj, read_png, with_extension,
    write_attributes, write_obj, write_png, write_tetgen, RunConfig,
};
use tetdeform::lattice::extract_surface;
use tetdeform::metrics::{distortion_metrics, psnr, surface_distances, Psnr, QualityReport};
use tetdeform::occupancy::{count_flipped, OccupancyField};
use tetdeform::optimize::{laplacian_smooth, mesh_optimize, multiview_optimize, Trace};
use tetdeform::renderer::{render, Image, RenderMode, VertexAttributes};
use tetdeform::{build_lattice, TetGrid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tetdeform", version, about = "Deformable tetrahedral meshes: fitting, rendering and metrics")]
struct Cli {
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log level: off, error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log: LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the undeformed, fully occupied lattice as STEM.node/STEM.ele.
    Lattice {
        #[arg(long)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the lattice to a closed OBJ surface.
    Tetmesh {
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a tet mesh from each camera into DIR/view_NNN.png.
    Render {
        #[arg(long)]
        nodes: PathBuf,
        /// Vertex attributes; without them the surface is flat-shaded.
        #[arg(long)]
        attrs: Option<PathBuf>,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct colors, visibilities and offsets from posed images.
    ReconMv {
        /// Directory of PNG views, matched to cameras in file-name order.
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a tet mesh against a reference surface.
    Metrics {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sample points per surface.
        #[arg(long, default_value_t = tetdeform::metrics::DEFAULT_DISTANCE_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on usage errors, 2 on failures.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let _ = env_logger::Builder::new().filter_level(cli.log).format_timestamp(None).try_init();
    log::set_max_level(cli.log);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let result = pool
        .build()
        .context("cannot start worker threads")
        .and_then(|pool| pool.install(|| run(&cli)));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Lattice { res, out } => {
            let grid = build_lattice(*res)?;
            let occ = OccupancyField::hard(vec![true; grid.tet_count()]);
            write_tetgen(&grid, &occ, 0.5, out)?;
            info!("wrote {} nodes and {} tets", grid.vertex_count(), grid.tet_count());
            Ok(())
        }
        Command::Tetmesh { surface, config, out } => tetmesh(cli, surface, config.as_deref(), out),
        Command::Render {
            nodes,
            attrs,
            cameras,
            out,
        } => render_views(nodes, attrs.as_deref(), cameras, out),
        Command::ReconMv {
            images,
            cameras,
            config,
            out,
        } => recon_mv(cli, images, cameras, config.as_deref(), out),
        Command::Metrics {
            pred,
            gt,
            out,
            samples,
            threshold,
        } => {
            let (grid, occ) = grid_from_tetgen(pred).with_context(|| format!("reading {}", pred.display()))?;
            let gt = read_obj(gt).with_context(|| format!("reading {}", gt.display()))?;
            let report = quality_report(&grid, &occ, *threshold, Some((&gt, *samples, cli.seed.unwrap_or(0))))?;
            write_report(&report, out)
        }
    }
}

fn load_config(cli: &Cli, path: Option<&Path>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => read_config(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn quality_report(
    grid: &TetGrid,
    occ: &OccupancyField,
    threshold: f64,
    reference: Option<(&tetdeform::SurfaceMesh, usize, u64)>,
) -> Result<QualityReport> {
    let (distortion, flipped) = distortion_metrics(grid, occ, threshold)?;
    let distances = match reference {
        Some((gt, samples, seed)) => {
            let pred = extract_surface(grid, occ, threshold)?;
            Some(surface_distances(&pred, gt, samples, seed)?)
        }
        None => None,
    };
    Ok(QualityReport::new(distortion, flipped, grid.vertex_count(), distances))
}

fn write_report(report: &QualityReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_trace(trace: &Trace, config: &RunConfig, stem: &Path) -> Result<()> {
    let path = if config.trace_log.is_empty() {
        with_extension(stem, "trace.log")
    } else {
        PathBuf::from(&config.trace_log)
    };
    fs::write(&path, trace.to_lines()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn smooth(grid: TetGrid, config: &RunConfig) -> Result<TetGrid> {
    if config.smooth_iterations == 0 {
        return Ok(grid);
    }
    Ok(laplacian_smooth(&grid, config.smooth_iterations, config.smooth_factor)?)
}

fn tetmesh(cli: &Cli, surface: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let config = load_config(cli, config)?;
    let target = read_obj(surface).with_context(|| format!("reading {}", surface.display()))?;
    let grid = build_lattice(config.resolution)?;
    let energy: EnergyConfig = config.energy();
    let outcome = mesh_optimize(
        &grid,
        &target,
        &energy,
        &config.driver(),
        config.iterations,
        config.relabel_every,
    )?;
    let grid = smooth(outcome.grid, &config)?;
    let occ = if config.smooth_iterations > 0 {
        tetdeform::occupancy::label_occupancy(&grid, &target)?
    } else {
        outcome.occupancy
    };
    write_tetgen(&grid, &occ, config.threshold, out)?;
    write_obj(&extract_surface(&grid, &occ, config.threshold)?, &with_extension(out, "obj"))?;
    let report = quality_report(
        &grid,
        &occ,
        config.threshold,
        Some((&target, config.distance_samples, config.seed)),
    )?;
    write_report(&report, &with_extension(out, "report.json"))?;
    write_trace(&outcome.trace, &config, out)?;
    info!(
        "tetmesh: {} occupied tets, {} flipped, chamfer {:?}",
        report.tet_count,
        count_flipped(&grid),
        report.chamfer
    );
    Ok(())
}

fn render_views(nodes: &Path, attrs: Option<&Path>, cameras: &Path, out: &Path) -> Result<()> {
    let (grid, occ) = grid_from_tetgen(nodes).with_context(|| format!("reading {}", nodes.display()))?;
    let attributes = attrs.map(read_attributes).transpose()?;
    if let Some(a) = &attributes {
        if a.len() != grid.vertex_count() {
            bail!("{} attribute entries for {} vertices", a.len(), grid.vertex_count());
        }
    }
    let cameras = read_cameras(cameras)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (i, camera) in cameras.iter().enumerate() {
        let mode = match &attributes {
            Some(a) => RenderMode::Soft { attributes: a, cull: true },
            None => RenderMode::Hard {
                occupancy: &occ,
                threshold: 0.5,
            },
        };
        let image = render(&grid, camera, mode)?;
        write_png(&out.join(format!("view_{i:03}.png")), &image)?;
    }
    info!("rendered {} views", cameras.len());
    Ok(())
}

fn read_views(dir: &Path) -> Result<Vec<Image>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")));
    paths.sort();
    paths
        .iter()
        .map(|p| read_png(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

fn recon_mv(cli: &Cli, images: &Path, cameras: &Path, config: Option<&Path>, out: &Path) -> Result<()> {
    let config = load_config(cli, config)?;
    let images = read_views(images)?;
    let cameras = read_cameras(cameras)?;
    if images.len() != cameras.len() {
        bail!("{} images for {} cameras", images.len(), cameras.len());
    }
    let views: Vec<_> = images.into_iter().zip(cameras).collect();
    let grid = build_lattice(config.resolution)?;
    let init = VertexAttributes::uniform(grid.vertex_count(), [0.5; 3], 0.5);
    let outcome = multiview_optimize(
        &grid,
        &views,
        &init,
        &config.energy(),
        &config.multiview(),
        config.iterations,
    )?;
    let grid = smooth(outcome.grid, &config)?;
    let occ = tetdeform::occupancy::occupancy_from_vertex_visibility(&grid, &outcome.attributes.visibility)?;
    write_tetgen(&grid, &occ, config.threshold, out)?;
    write_attributes(&outcome.attributes, &with_extension(out, "attrs"))?;
    let mut report = quality_report(&grid, &occ, config.threshold, None)?;
    let mut total_db = 0.0;
    let mut all_exact = true;
    for (reference, camera) in &views {
        let image = render(
            &grid,
            camera,
            RenderMode::Soft {
                attributes: &outcome.attributes,
                cull: config.cull,
            },
        )?;
        match psnr(&image, reference)? {
            Psnr::Exact => {}
            Psnr::Db(x) => {
                all_exact = false;
                total_db += x;
            }
        }
    }
    report.psnr = Some(if all_exact {
        Psnr::Exact
    } else {
        Psnr::Db(total_db / views.len() as f64)
    });
    write_report(&report, &with_extension(out, "report.json"))?;
    write_trace(&outcome.trace, &config, out)?;
    Ok(())
}
