use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beol_therm::gds::{parse_gdsii, write_gdsii, LayoutIndex};
use beol_therm::homogenize::{homogenize, BoundaryCondition, ConductivityTensor, HomogenizationOptions};
use beol_therm::macro_fem::{build_macro_mesh, field_to_vtk, sample_plane, solve_macro, MacroModel, Region};
use beol_therm::pipeline::{self, PipelineConfig, PipelineError};
use beol_therm::rve::{build_rve_indexed, metal_fraction, RveSpec, DEFAULT_VOXELS_PER_EDGE_XY, DEFAULT_VOXELS_PER_LAYER_Z};
use beol_therm::stack::{load_stack, LayerStack};
use beol_therm::synthetic::{generate_synthetic_layout, SyntheticLayoutSpec};

#[derive(Parser)]
#[command(name = "beol-therm", version, about = "Multiscale thermal modeling of chip interconnect stacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic 11-level layout as GDSII.
    GenLayout {
        /// Synthetic layout spec (JSON); defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Homogenize one RVE window and print the six tensor components.
    Homogenize {
        #[arg(long)]
        layout: PathBuf,
        /// Stack JSON; the bundled demo stack when omitted.
        #[arg(long)]
        stack: Option<PathBuf>,
        /// Window as cx,cy,half in µm.
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64, f64),
        #[arg(long, default_value = "kubc")]
        bc: BoundaryCondition,
        #[arg(long, default_value_t = DEFAULT_VOXELS_PER_EDGE_XY)]
        voxels_xy: usize,
        #[arg(long, default_value_t = DEFAULT_VOXELS_PER_LAYER_Z)]
        voxels_z: usize,
    },
    /// Solve the chip-scale model for a config and a conductivity map CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Map written by `pipeline`; the BEOL is uniform `--beol-k` when omitted.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long, default_value_t = 139.4)]
        beol_k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full workflow.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the voxel grid of one RVE window as VTK.
    InspectRve {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        stack: Option<PathBuf>,
        #[arg(long, value_parser = parse_window)]
        window: (f64, f64, f64),
        #[arg(long, default_value_t = DEFAULT_VOXELS_PER_EDGE_XY)]
        voxels_xy: usize,
        #[arg(long, default_value_t = DEFAULT_VOXELS_PER_LAYER_Z)]
        voxels_z: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [cx, cy, half] if half > 0.0 => Ok((cx, cy, half)),
        [_, _, _] => Err("half size must be positive".into()),
        _ => Err("expected cx,cy,half".into()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    std::fs::read(path).map_err(|e| PipelineError::io(path, e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|e| PipelineError::io(path, e))
}

fn stack_from(path: Option<&Path>) -> Result<LayerStack, PipelineError> {
    match path {
        Some(p) => {
            let text = String::from_utf8_lossy(&read(p)?).into_owned();
            Ok(load_stack(&text)?)
        }
        None => Ok(LayerStack::demo()),
    }
}

fn rve_spec(window: (f64, f64, f64), voxels_xy: usize, voxels_z: usize) -> RveSpec {
    RveSpec {
        center: (window.0, window.1),
        half_size: window.2,
        voxels_per_edge_xy: voxels_xy,
        voxels_per_layer_z: voxels_z,
    }
}

fn read_map_csv(text: &str, expected: usize) -> Result<Vec<ConductivityTensor>, PipelineError> {
    let bad = |m: String| PipelineError::Config(format!("conductivity map: {m}"));
    let mut out = Vec::with_capacity(expected);
    for (n, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
        if fields.len() != 8 {
            return Err(bad(format!("line {} has {} fields, expected 8", n + 1, fields.len())));
        }
        out.push(ConductivityTensor::from_components(std::array::from_fn(|c| fields[2 + c])));
    }
    if out.len() != expected {
        return Err(bad(format!("{} rows, mesh has {expected} element columns", out.len())));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::GenLayout { spec, out } => {
            let spec: SyntheticLayoutSpec = match spec {
                Some(p) => serde_json::from_slice(&read(&p)?).map_err(|e| PipelineError::Config(e.to_string()))?,
                None => SyntheticLayoutSpec::default(),
            };
            let db = generate_synthetic_layout(&spec)?;
            write(&out, write_gdsii(&db)?)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Homogenize {
            layout,
            stack,
            window,
            bc,
            voxels_xy,
            voxels_z,
        } => {
            let db = parse_gdsii(&read(&layout)?)?;
            let stack = stack_from(stack.as_deref())?;
            let index = LayoutIndex::new(&db)?;
            let spec = rve_spec(window, voxels_xy, voxels_z);
            let grid = build_rve_indexed(&index, &stack, &spec).map_err(|source| PipelineError::Rve {
                x: window.0,
                y: window.1,
                source,
            })?;
            let h = homogenize(&grid, &HomogenizationOptions::with_bc(bc)).map_err(|source| {
                PipelineError::Homogenize {
                    x: window.0,
                    y: window.1,
                    source,
                }
            })?;
            for (name, v) in ConductivityTensor::COMPONENT_NAMES.iter().zip(h.tensor.components()) {
                println!("{name} {v:.10e}");
            }
        }
        Command::Solve {
            config,
            map,
            beol_k,
            out,
        } => {
            let cfg = PipelineConfig::load(&config)?;
            let mesh = build_macro_mesh(&cfg.mesh)?;
            let bc = cfg.boundary_spec(&mesh.footprint())?;
            let beol_top = mesh.region_top(Region::Beol).expect("mesh has a BEOL region");
            let (nx, ny) = (mesh.nx(), mesh.ny());
            let model = match map {
                Some(p) => {
                    let tensors = read_map_csv(&String::from_utf8_lossy(&read(&p)?), nx * ny)?;
                    MacroModel::with_beol_map(mesh, |i, j| tensors[i + nx * j].z_flipped())
                }
                None => MacroModel::uniform(mesh, ConductivityTensor::isotropic(beol_k)),
            };
            let field = solve_macro(&model, &bc)?;
            std::fs::create_dir_all(&out).map_err(|e| PipelineError::io(&out, e))?;
            write(&out.join(pipeline::TEMPERATURE_VTK), field_to_vtk(&model, &field))?;
            let tt = sample_plane(&model.mesh, &field, beol_top, cfg.plane_resolution)?;
            let bb = sample_plane(&model.mesh, &field, model.mesh.zs[0], cfg.plane_resolution)?;
            write(&out.join(pipeline::PLANE_TT_CSV), tt.to_csv())?;
            write(&out.join(pipeline::PLANE_BB_CSV), bb.to_csv())?;
            println!(
                "T range {:.6} .. {:.6} °C, energy imbalance {:.3e}, {} CG iterations",
                field.min(),
                field.max(),
                field.energy_imbalance(),
                field.report.iterations
            );
        }
        Command::Pipeline { config, jobs, out } => {
            let result = pipeline::run_pipeline(&config, &out, jobs)?;
            let m = &result.manifest;
            println!(
                "{} samples ({} cached, {} distinct solves); T range {:.6} .. {:.6} °C; artifacts in {}",
                m.map_samples,
                m.run.cache_hits,
                m.run.unique_rve_solves,
                m.temperature_min_c,
                m.temperature_max_c,
                out.display()
            );
        }
        Command::InspectRve {
            layout,
            stack,
            window,
            voxels_xy,
            voxels_z,
            out,
        } => {
            let db = parse_gdsii(&read(&layout)?)?;
            let stack = stack_from(stack.as_deref())?;
            let index = LayoutIndex::new(&db)?;
            let grid = build_rve_indexed(&index, &stack, &rve_spec(window, voxels_xy, voxels_z))
                .map_err(|source| PipelineError::Rve {
                    x: window.0,
                    y: window.1,
                    source,
                })?;
            write(&out, grid.to_vtk("rve"))?;
            for (li, layer) in grid.layers.iter().enumerate() {
                println!("{:<8} metal fraction {:.4}", layer.name, metal_fraction(&grid, li));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
