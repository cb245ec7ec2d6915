//! `plasmon`: generate meshes, solve for surface-plasmon resonances, run studies.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 IO error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plasmon_core::analytic::{dtn_sphere, halfspace_eps, SphereSpectrum};
use plasmon_core::error::ErrorClass;
use plasmon_core::mesh::{gen_ellipsoid, gen_icosphere, load_mesh, panelize, write_off};
use plasmon_core::operator::assemble;
use plasmon_core::output::{write_mode_sidecar, GeometryInfo, OptionsInfo, SpectrumDoc};
use plasmon_core::spectra::solve;
use plasmon_core::study::{converge_sphere, shape_independence, tail_study, Geometry, StudyReport};
use plasmon_core::{AssemblyOptions, Error, FilterTolerances, MeshFormat, Result};

#[derive(Parser, Debug)]
#[command(
    name = "plasmon",
    version,
    about = "Boundary-element solver for surface-plasmon resonances"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// Near-field admissibility factor.
    #[arg(long, global = true, default_value_t = 2.0)]
    eta: f64,
    /// Source-panel subdivision depth for near pairs.
    #[arg(long, global = true, default_value_t = 2)]
    subdiv_depth: u32,
    /// Relative imaginary-part threshold for discarding complex pairs.
    #[arg(long, global = true, default_value_t = 1e-6)]
    imag_tol: f64,
    /// Distance from -1 within which a charged mode is the monopole.
    #[arg(long, global = true, default_value_t = 0.05)]
    monopole_tol: f64,
    /// Relative eps tolerance for clustering multiplets.
    #[arg(long, global = true, default_value_t = 0.02)]
    cluster_tol: f64,
    #[arg(long, global = true, default_value_t = 20_000)]
    max_panels: usize,
    /// Reserved; every stage is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (gen) or output path prefix (solve, study).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
}

impl GlobalOpts {
    fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions {
            eta: self.eta,
            subdiv_depth: self.subdiv_depth,
            max_panels: self.max_panels,
        }
    }

    fn tolerances(&self) -> Result<FilterTolerances> {
        for (name, v) in [
            ("--eta", self.eta),
            ("--imag-tol", self.imag_tol),
            ("--monopole-tol", self.monopole_tol),
            ("--cluster-tol", self.cluster_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(FilterTolerances {
            imag_rel: self.imag_tol,
            monopole: self.monopole_tol,
            cluster_rel: self.cluster_tol,
            ..FilterTolerances::default()
        })
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated mesh as OFF.
    #[command(subcommand)]
    Gen(GenCmd),
    /// Assemble and eigendecompose the operator of a closed mesh.
    Solve(SolveArgs),
    /// Refinement, tail and shape studies on generated geometries.
    #[command(subcommand)]
    Study(StudyCmd),
    /// Closed-form reference values.
    #[command(subcommand)]
    Oracle(OracleCmd),
}

#[derive(Subcommand, Debug)]
enum GenCmd {
    Icosphere {
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    Ellipsoid {
        /// Semi-axes as `a,b,c`.
        #[arg(long, value_delimiter = ',', required = true)]
        abc: Vec<f64>,
        #[arg(long)]
        level: u32,
    },
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// OFF or ASCII STL file.
    mesh: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the density of the mode with this rank to a sidecar file (repeatable).
    #[arg(long)]
    export_mode: Vec<usize>,
    /// Write the assembled matrix as text.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportOut {
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum StudyCmd {
    /// Multiplet errors against the analytic sphere resonances over refinement levels.
    Sphere {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        levels: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        ks: Vec<u64>,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Fit eps_k = -1 - c/k over a range of cluster ranks.
    Tail {
        #[arg(long, default_value = "icosphere:4")]
        geometry: String,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        krange: Vec<u64>,
        #[command(flatten)]
        out: ReportOut,
    },
    /// High-order statistics side by side for several geometries.
    Shapes {
        /// Comma-separated generator specs, e.g. `icosphere:3,ellipsoid:2,1,1:3`.
        #[arg(long)]
        geometries: String,
        #[command(flatten)]
        out: ReportOut,
    },
}

#[derive(Subcommand, Debug)]
enum OracleCmd {
    Halfspace,
    /// Rows `k eps lambda multiplicity`.
    Sphere {
        #[arg(long)]
        kmax: u64,
    },
    /// Prints `D- D+` for degree k on a sphere.
    Dtn {
        #[arg(long)]
        k: u64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_gen(cmd: &GenCmd, out: Option<&Path>) -> Result<()> {
    let mesh = match cmd {
        GenCmd::Icosphere { level, radius } => gen_icosphere(*level, *radius)?,
        GenCmd::Ellipsoid { abc, level } => match abc[..] {
            [a, b, c] => gen_ellipsoid(a, b, c, *level)?,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "--abc needs 3 values, got {}",
                    abc.len()
                )))
            }
        },
    };
    let off = write_off(&mesh);
    let summary = format!(
        "V={} F={} signed_volume={}",
        mesh.vertices().len(),
        mesh.n_faces(),
        mesh.signed_volume()
    );
    match out {
        Some(path) => {
            write_file(path, off)?;
            println!("{summary}");
        }
        None => {
            print!("{off}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_solve(args: &SolveArgs, g: &GlobalOpts) -> Result<()> {
    let tols = g.tolerances()?;
    let assembly = g.assembly();
    let format = MeshFormat::from_extension(&args.mesh).ok_or_else(|| {
        Error::InvalidParameter(format!("unknown mesh extension: {}", args.mesh.display()))
    })?;
    let text = fs::read_to_string(&args.mesh)?;
    let (mesh, report) = load_mesh(&text, format)?;
    let panels = panelize(&mesh)?;
    let op = assemble(&panels, &assembly)?;
    let prefix = g
        .out
        .clone()
        .unwrap_or_else(|| args.mesh.with_extension(""));
    if let Some(path) = &args.dump_matrix {
        let mut buf = Vec::new();
        op.write_dump(&mut buf)?;
        write_file(path, buf)?;
    }
    let modes = solve(&op, &tols)?;

    let doc = SpectrumDoc::new(
        GeometryInfo {
            source: args.mesh.display().to_string(),
            n_panels: panels.len(),
            signed_volume: report.signed_volume,
        },
        OptionsInfo::new(&assembly, &tols),
        &modes,
    );
    let (json, csv) = match (&args.json, &args.csv, &g.out) {
        (None, None, Some(p)) => (Some(with_suffix(p, ".json")), Some(with_suffix(p, ".csv"))),
        (j, c, _) => (j.clone(), c.clone()),
    };
    if let Some(path) = json {
        write_file(&path, doc.to_json()?)?;
    }
    if let Some(path) = csv {
        let mut buf = Vec::new();
        doc.write_csv(&mut buf)?;
        write_file(&path, buf)?;
    }
    for &rank in &args.export_mode {
        let mode = modes.modes.get(rank).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "mode {rank} out of range ({} retained)",
                modes.modes.len()
            ))
        })?;
        let mut buf = Vec::new();
        write_mode_sidecar(&mut buf, &mode.sigma)?;
        write_file(&with_suffix(&prefix, &format!(".mode{rank}.txt")), buf)?;
    }

    println!(
        "panels={} retained={} discarded_complex={} monopoles={} clusters={}",
        panels.len(),
        modes.modes.len(),
        modes.discarded_complex,
        modes.monopole_count(),
        modes.clusters.len()
    );
    for c in modes.clusters.iter().take(6) {
        println!("eps={:.6} multiplicity={}", c.mean_eps, c.multiplicity);
    }
    Ok(())
}

fn emit_report(report: &StudyReport, out: &ReportOut, prefix: Option<&Path>) -> Result<()> {
    let mut csv = Vec::new();
    if report.tail.is_some() {
        report.write_tail_csv(&mut csv)?;
    } else {
        report.write_csv(&mut csv)?;
    }
    let json_path = out
        .json
        .clone()
        .or_else(|| prefix.map(|p| with_suffix(p, ".json")));
    let csv_path = out
        .csv
        .clone()
        .or_else(|| prefix.map(|p| with_suffix(p, ".csv")));
    if let Some(p) = json_path {
        write_file(&p, report.to_json()?)?;
    }
    match csv_path {
        Some(p) => write_file(&p, csv)?,
        None => print!("{}", String::from_utf8_lossy(&csv)),
    }
    if let Some(t) = &report.tail {
        println!("c={} rms_residual={}", t.c, t.rms_residual);
    }
    for f in &report.flags {
        eprintln!("{f}");
    }
    Ok(())
}

fn cmd_study(cmd: &StudyCmd, g: &GlobalOpts) -> Result<()> {
    let tols = g.tolerances()?;
    let assembly = g.assembly();
    let (report, out) = match cmd {
        StudyCmd::Sphere {
            levels,
            ks,
            radius,
            out,
        } => (converge_sphere(levels, *radius, ks, &assembly, &tols)?, out),
        StudyCmd::Tail {
            geometry,
            krange,
            out,
        } => {
            let geometry: Geometry = geometry.parse()?;
            let [k_min, k_max] = krange[..] else {
                return Err(Error::InvalidParameter(format!(
                    "--krange needs 2 values, got {}",
                    krange.len()
                )));
            };
            (tail_study(&geometry, k_min, k_max, &assembly, &tols)?, out)
        }
        StudyCmd::Shapes { geometries, out } => {
            let meshes = Geometry::parse_list(geometries)?
                .iter()
                .map(|geom| Ok((geom.to_string(), geom.generate()?)))
                .collect::<Result<Vec<_>>>()?;
            (shape_independence(&meshes, &assembly, &tols)?, out)
        }
    };
    emit_report(&report, out, g.out.as_deref())
}

fn cmd_oracle(cmd: &OracleCmd) -> Result<()> {
    match cmd {
        OracleCmd::Halfspace => println!("{}", halfspace_eps()),
        OracleCmd::Sphere { kmax } => {
            for e in SphereSpectrum::new(*kmax)?.entries {
                println!("{} {} {} {}", e.k, e.eps, e.lambda, e.multiplicity);
            }
        }
        OracleCmd::Dtn { k, radius } => {
            let d = dtn_sphere(*k, *radius)?;
            println!("{} {}", d.d_minus, d.d_plus);
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(cmd) => cmd_gen(cmd, cli.global.out.as_deref()),
        Command::Solve(args) => cmd_solve(args, &cli.global),
        Command::Study(cmd) => cmd_study(cmd, &cli.global),
        Command::Oracle(cmd) => cmd_oracle(cmd),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Io => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
