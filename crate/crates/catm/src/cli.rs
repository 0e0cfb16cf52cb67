//! Command-line front end: JSON run configs in, deterministic CSV tables out.
//!
//! Exit codes: 0 success, 2 validation/config problems, 3 eigensolver or
//! propagator convergence failures. All numbers are written with Rust's
//! shortest round-trip float formatting, so reruns of the same config produce
//! byte-identical files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{env, fs};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::absorber::{envelope_area, InitialState};
use crate::analysis::{
    check_connected_im, check_pair_relation, error_metrics, fold_zone, populations_phases,
    scan_n, scan_v0, NRow, V0Row,
};
use crate::catm::{solve_with, CatmSolution};
use crate::models::{evaluator, load_custom_samples, sample_hamiltonian, ModelSpec};
use crate::reference::{converged_at, ReferenceTrajectory};
use crate::timegrid::{build_grid, Convention, TimeGrid};
use crate::{Error, Result};

#[derive(Parser)]
#[command(name = "catm", version, about = "Constrained adiabatic trajectory method")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration; write trajectory.csv, spectrum.csv, summary.csv.
    Run {
        config: PathBuf,
        /// Frequency convention for the derivative operator.
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
        /// Also dump the sampled Hamiltonian in the custom-samples text format.
        #[arg(long)]
        dump_hamiltonian: bool,
    },
    /// Solve once per configured V0; write scan_v0.csv.
    ScanV0 {
        config: PathBuf,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
    /// Solve once per configured N; write scan_n.csv.
    ScanN {
        config: PathBuf,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
    /// Diagonalize once; write spectrum.csv only.
    Spectrum {
        config: PathBuf,
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Signed,
    Unsigned,
}

impl From<ConventionArg> for Convention {
    fn from(a: ConventionArg) -> Convention {
        match a {
            ConventionArg::Signed => Convention::Signed,
            ConventionArg::Unsigned => Convention::Unsigned,
        }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, convention, dump) = match &cli.command {
        Command::Run {
            config,
            convention,
            dump_hamiltonian,
        } => (config, convention, *dump_hamiltonian),
        Command::ScanV0 { config, convention }
        | Command::ScanN { config, convention }
        | Command::Spectrum { config, convention } => (config, convention, false),
    };
    let run = prepare(config, convention.map(Convention::from)).and_then(|p| {
        match cli.command {
            Command::Run { .. } => cmd_run(&p, dump),
            Command::ScanV0 { .. } => cmd_scan_v0(&p),
            Command::ScanN { .. } => cmd_scan_n(&p),
            Command::Spectrum { .. } => cmd_spectrum(&p),
        }
    });
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Convergence(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum ModelConfig {
    TwoLevelRwa {
        omega0: f64,
        delta0: f64,
        #[serde(default)]
        phi0: f64,
        t_pulse: f64,
    },
    ThreeLevelIntuitive {
        omega0: f64,
        delta0: f64,
        t1: f64,
    },
    ThreeLevelStirap {
        omega0: f64,
        t1: f64,
    },
    /// Grid-sampled matrices from a text file (see `load_custom_samples`).
    CustomSampled {
        path: PathBuf,
    },
}

/// One run configuration. Physical quantities are in units with hbar = 1;
/// durations in the same time unit as the model parameters.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    model: ModelConfig,
    /// Initial amplitudes as [re, im] pairs; normalized on load.
    initial: Vec<[f64; 2]>,
    /// Absorber amplitude V0.
    v0: f64,
    /// Grid size N.
    n: usize,
    /// Extension length T' - T. Defaults: pulse duration for the two-level
    /// model, T1 for the three-level ones; required for custom samples.
    #[serde(default)]
    extra_interval: Option<f64>,
    /// Physical duration T; only meaningful (and required) for custom samples.
    #[serde(default)]
    t_physical: Option<f64>,
    /// "signed" (default) or "unsigned"; the --convention flag wins.
    #[serde(default)]
    convention: Option<String>,
    /// Step-count cap for the converged reference propagator.
    #[serde(default)]
    reference_cap: Option<usize>,
    /// Where the CSV files go; CATM_OUTPUT_DIR overrides, default ".".
    #[serde(default)]
    output_dir: Option<PathBuf>,
    /// V0 list for scan-v0.
    #[serde(default)]
    v0_values: Option<Vec<f64>>,
    /// N list for scan-n.
    #[serde(default)]
    n_values: Option<Vec<usize>>,
}

#[derive(Debug)]
struct Prepared {
    spec: ModelSpec,
    initial: InitialState,
    grid: TimeGrid,
    v0: f64,
    convention: Convention,
    reference_cap: usize,
    out_dir: PathBuf,
    v0_values: Vec<f64>,
    n_values: Vec<usize>,
}

fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Validates the config into solver inputs. `flag` is the command-line
/// convention override.
fn prepare(path: &Path, flag: Option<Convention>) -> Result<Prepared> {
    let cfg = parse_config(path)?;
    let convention = match (flag, cfg.convention.as_deref()) {
        (Some(c), _) => c,
        (None, None | Some("signed")) => Convention::Signed,
        (None, Some("unsigned")) => Convention::Unsigned,
        (None, Some(other)) => {
            return Err(Error::invalid(format!(
                "unknown convention {other:?}, expected \"signed\" or \"unsigned\""
            )))
        }
    };

    let (spec, t_physical, default_extra) = match &cfg.model {
        ModelConfig::TwoLevelRwa {
            omega0,
            delta0,
            phi0,
            t_pulse,
        } => (
            Some(ModelSpec::TwoLevelRwa {
                omega0: *omega0,
                delta0: *delta0,
                phi0: *phi0,
                t_pulse: *t_pulse,
            }),
            *t_pulse,
            Some(*t_pulse),
        ),
        ModelConfig::ThreeLevelIntuitive { omega0, delta0, t1 } => (
            Some(ModelSpec::ThreeLevelIntuitive {
                omega0: *omega0,
                delta0: *delta0,
                t1: *t1,
            }),
            1.5 * t1,
            Some(*t1),
        ),
        ModelConfig::ThreeLevelStirap { omega0, t1 } => (
            Some(ModelSpec::ThreeLevelStirap {
                omega0: *omega0,
                t1: *t1,
            }),
            1.5 * t1,
            Some(*t1),
        ),
        ModelConfig::CustomSampled { .. } => {
            let t = cfg
                .t_physical
                .ok_or_else(|| Error::invalid("custom samples need t_physical in the config"))?;
            (None, t, None)
        }
    };
    if let (Some(cfg_t), Some(_)) = (cfg.t_physical, &spec) {
        if (cfg_t - t_physical).abs() > 1e-12 * t_physical.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "t_physical {cfg_t} conflicts with the model's duration {t_physical}"
            )));
        }
    }
    let extra = match cfg.extra_interval.or(default_extra) {
        Some(e) => e,
        None => return Err(Error::invalid("custom samples need extra_interval in the config")),
    };
    let grid = build_grid(cfg.n, t_physical, t_physical + extra)?;

    let spec = match (spec, &cfg.model) {
        (Some(s), _) => s,
        (None, ModelConfig::CustomSampled { path: sample_path }) => {
            // Relative sample paths live next to the config file.
            let resolved = if sample_path.is_relative() {
                path.parent().unwrap_or(Path::new(".")).join(sample_path)
            } else {
                sample_path.clone()
            };
            let h = load_custom_samples(&resolved, &grid)?;
            ModelSpec::CustomSampled {
                matrices: h.matrices,
            }
        }
        (None, _) => unreachable!(),
    };

    let initial = InitialState::new(
        cfg.initial
            .iter()
            .map(|&[re, im]| C64::new(re, im))
            .collect(),
    )?;
    let out_dir = resolve_out_dir(cfg.output_dir, env::var_os("CATM_OUTPUT_DIR"));
    Ok(Prepared {
        spec,
        initial,
        grid,
        v0: cfg.v0,
        convention,
        reference_cap: cfg.reference_cap.unwrap_or(1 << 20),
        out_dir,
        v0_values: cfg.v0_values.unwrap_or_default(),
        n_values: cfg.n_values.unwrap_or_default(),
    })
}

fn resolve_out_dir(config: Option<PathBuf>, env_override: Option<std::ffi::OsString>) -> PathBuf {
    match env_override {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => config.unwrap_or_else(|| PathBuf::from(".")),
    }
}

/// Shortest round-trip decimal; NaN becomes an empty cell.
fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Quotes a field when it contains CSV metacharacters.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_table(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), content)?;
    Ok(())
}

fn reference_for(p: &Prepared) -> Result<ReferenceTrajectory> {
    let eval = evaluator(&p.spec, &p.grid);
    converged_at(
        &eval,
        &p.initial,
        p.grid.physical_points(),
        p.reference_cap,
    )
}

fn trajectory_table(
    sol: &CatmSolution,
    reference: &ReferenceTrajectory,
    grid: &TimeGrid,
) -> Result<String> {
    let l = sol.level_count;
    let (p_c, b_c) = populations_phases(&sol.trajectory)?;
    let (p_r, b_r) = populations_phases(&reference.states)?;
    let mut s = String::from("t");
    for n in 1..=l {
        s.push_str(&format!(",p{n}_catm,beta{n}_catm"));
    }
    for n in 1..=l {
        s.push_str(&format!(",p{n}_ref,beta{n}_ref"));
    }
    s.push('\n');
    for i in 0..grid.n {
        s.push_str(&num(grid.points[i]));
        for n in 0..l {
            s.push_str(&format!(",{},{}", num(p_c[i][n]), num(b_c[i][n])));
        }
        if i <= grid.i_t {
            for n in 0..l {
                s.push_str(&format!(",{},{}", num(p_r[i][n]), num(b_r[i][n])));
            }
        } else {
            // The reference stops at T; extension rows have no comparison.
            s.push_str(&",,".repeat(l));
        }
        s.push('\n');
    }
    Ok(s)
}

fn spectrum_table(sol: &CatmSolution) -> String {
    let omega0 = sol.grid.omega0();
    let mut s = String::from("re,im,connected,zone_re\n");
    for (i, &v) in sol.spectrum.iter().enumerate() {
        let connected = if i == sol.selected_index { 1 } else { 0 };
        s.push_str(&format!(
            "{},{},{connected},{}\n",
            num(v.re),
            num(v.im),
            num(fold_zone(v, omega0).re)
        ));
    }
    s
}

fn summary_table(p: &Prepared, sol: &CatmSolution, reference: &ReferenceTrajectory) -> Result<String> {
    let l = sol.level_count;
    let report = error_metrics(&sol.trajectory, &p.grid, reference)?;
    let area = envelope_area(&p.grid, p.v0);
    let im_check = check_connected_im(sol, reference);
    let pair = if l == 2 {
        sample_hamiltonian(&p.spec, &p.grid)
            .and_then(|h| check_pair_relation(sol, area, &h))
            .ok()
    } else {
        None
    };
    let finals: Vec<f64> = sol.trajectory[p.grid.i_t]
        .iter()
        .map(|z| z.norm_sqr())
        .collect();

    let mut header = String::from(
        "omega_re,omega_im,connection_residual,selected_residual,isolation_warning,\
         eps_p,eps_a,connected_im_residual,pair_im,pair_residual,area",
    );
    for n in 1..=l {
        header.push_str(&format!(",final_p{n}"));
    }
    let mut row = format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        num(sol.omega.re),
        num(sol.omega.im),
        num(sol.connection_residual),
        num(sol.selected_residual),
        u8::from(sol.isolation_warning),
        num(report.eps_p),
        num(report.eps_a),
        im_check.map(num).unwrap_or_default(),
        pair.as_ref().map(|r| num(r.pair_value.im)).unwrap_or_default(),
        pair.as_ref().map(|r| num(r.residual)).unwrap_or_default(),
        num(area),
    );
    for f in finals {
        row.push_str(&format!(",{}", num(f)));
    }
    Ok(format!("{header}\n{row}\n"))
}

/// The custom-samples text format: one grid point per line, L^2 `re,im`
/// entries in row-major order. Reloads exactly.
fn hamiltonian_dump(p: &Prepared) -> Result<String> {
    let h = sample_hamiltonian(&p.spec, &p.grid)?;
    let mut s = String::new();
    for m in &h.matrices {
        let mut first = true;
        for z in m.iter() {
            if !first {
                s.push(' ');
            }
            s.push_str(&format!("{},{}", z.re, z.im));
            first = false;
        }
        s.push('\n');
    }
    Ok(s)
}

fn cmd_run(p: &Prepared, dump_hamiltonian: bool) -> Result<()> {
    let sol = solve_with(&p.spec, &p.initial, p.v0, &p.grid, p.convention)?;
    let reference = reference_for(p)?;
    write_table(
        &p.out_dir,
        "trajectory.csv",
        &trajectory_table(&sol, &reference, &p.grid)?,
    )?;
    write_table(&p.out_dir, "spectrum.csv", &spectrum_table(&sol))?;
    write_table(
        &p.out_dir,
        "summary.csv",
        &summary_table(p, &sol, &reference)?,
    )?;
    if dump_hamiltonian {
        write_table(&p.out_dir, "hamiltonian.txt", &hamiltonian_dump(p)?)?;
    }
    Ok(())
}

fn cmd_spectrum(p: &Prepared) -> Result<()> {
    let sol = solve_with(&p.spec, &p.initial, p.v0, &p.grid, p.convention)?;
    write_table(&p.out_dir, "spectrum.csv", &spectrum_table(&sol))
}

fn scan_v0_table(rows: &[V0Row]) -> String {
    let mut s = String::from("v0,area,eps_p,eps_a,im_connected,im_pair,error\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            num(r.v0),
            num(r.area),
            num(r.eps_p),
            num(r.eps_a),
            num(r.im_connected),
            num(r.im_pair),
            csv_field(r.error.as_deref().unwrap_or("")),
        ));
    }
    s
}

fn cmd_scan_v0(p: &Prepared) -> Result<()> {
    let rows = scan_v0(
        &p.spec,
        &p.initial,
        &p.v0_values,
        &p.grid,
        p.convention,
        p.reference_cap,
    )?;
    write_table(&p.out_dir, "scan_v0.csv", &scan_v0_table(&rows))
}

fn scan_n_table(rows: &[NRow], level_count: usize) -> String {
    let mut s = String::from("n");
    for n in 1..=level_count {
        s.push_str(&format!(",final_p{n}"));
    }
    s.push_str(",error\n");
    for r in rows {
        s.push_str(&num(r.n as f64));
        for n in 0..level_count {
            match r.finals.get(n) {
                Some(&f) => s.push_str(&format!(",{}", num(f))),
                None => s.push(','),
            }
        }
        s.push_str(&format!(",{}\n", csv_field(r.error.as_deref().unwrap_or(""))));
    }
    s
}

fn cmd_scan_n(p: &Prepared) -> Result<()> {
    let rows = scan_n(
        &p.spec,
        &p.initial,
        p.v0,
        &p.n_values,
        p.grid.t_physical,
        p.grid.t_total,
        p.convention,
    )?;
    let l = p.spec.level_count()?;
    write_table(&p.out_dir, "scan_n.csv", &scan_n_table(&rows, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("config.json");
        fs::write(&path, body).unwrap();
        path
    }

    fn two_level_config(out: &Path) -> String {
        format!(
            r#"{{
  "model": {{ "kind": "two_level_rwa", "omega0": 10.0, "delta0": 5.0, "t_pulse": 1.0 }},
  "initial": [[1.0, 0.0], [0.0, 0.0]],
  "v0": 10.0,
  "n": 16,
  "reference_cap": 16384,
  "output_dir": {out:?},
  "v0_values": [0.0, 10.0],
  "n_values": [8, 16]
}}"#,
            out = out.display().to_string()
        )
    }

    #[test]
    fn run_writes_the_three_tables() {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("out");
        let cfg = write_config(tmp.path(), &two_level_config(&out));
        let p = prepare(&cfg, None).unwrap();
        cmd_run(&p, true).unwrap();

        let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
        let lines: Vec<&str> = traj.lines().collect();
        assert_eq!(lines.len(), 17);
        assert_eq!(
            lines[0],
            "t,p1_catm,beta1_catm,p2_catm,beta2_catm,p1_ref,beta1_ref,p2_ref,beta2_ref"
        );
        // Extension rows carry no reference columns.
        assert!(lines[16].ends_with(",,,,"));

        let spec = fs::read_to_string(out.join("spectrum.csv")).unwrap();
        assert_eq!(spec.lines().count(), 33);
        let connected: Vec<&str> = spec
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(2) == Some("1"))
            .collect();
        assert_eq!(connected.len(), 1);

        let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 2);
        assert!(summary.starts_with("omega_re,omega_im,connection_residual"));
        assert!(summary.lines().nth(1).unwrap().split(',').count() == 13);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let tmp = TempDir::new().unwrap();
        let out_a = tmp.path().join("a");
        let out_b = tmp.path().join("b");
        let cfg_a = write_config(tmp.path(), &two_level_config(&out_a));
        let p = prepare(&cfg_a, None).unwrap();
        cmd_run(&p, false).unwrap();
        let cfg_b = {
            let path = tmp.path().join("config_b.json");
            fs::write(&path, two_level_config(&out_b)).unwrap();
            path
        };
        let q = prepare(&cfg_b, None).unwrap();
        cmd_run(&q, false).unwrap();
        for name in ["trajectory.csv", "spectrum.csv", "summary.csv"] {
            let a = fs::read(out_a.join(name)).unwrap();
            let b = fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn hamiltonian_dump_round_trips() {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("out");
        let cfg = write_config(tmp.path(), &two_level_config(&out));
        let p = prepare(&cfg, None).unwrap();
        cmd_run(&p, true).unwrap();
        let reloaded = load_custom_samples(&out.join("hamiltonian.txt"), &p.grid).unwrap();
        let original = sample_hamiltonian(&p.spec, &p.grid).unwrap();
        for (a, b) in reloaded.matrices.iter().zip(&original.matrices) {
            let diff = a - b;
            assert!(diff.iter().all(|z| z.norm() <= 1e-12));
        }
    }

    #[test]
    fn scans_write_one_row_per_point() {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("out");
        let cfg = write_config(tmp.path(), &two_level_config(&out));
        let p = prepare(&cfg, None).unwrap();
        cmd_scan_v0(&p).unwrap();
        cmd_scan_n(&p).unwrap();
        let v0 = fs::read_to_string(out.join("scan_v0.csv")).unwrap();
        assert_eq!(v0.lines().count(), 3);
        assert!(v0.starts_with("v0,area,eps_p,eps_a,im_connected,im_pair,error"));
        let n = fs::read_to_string(out.join("scan_n.csv")).unwrap();
        assert_eq!(n.lines().count(), 3);
        assert_eq!(n.lines().next().unwrap(), "n,final_p1,final_p2,error");
    }

    #[test]
    fn empty_scan_list_is_a_validation_error() {
        let tmp = TempDir::new().unwrap();
        let body = r#"{
  "model": { "kind": "two_level_rwa", "omega0": 10.0, "delta0": 5.0, "t_pulse": 1.0 },
  "initial": [[1.0, 0.0], [0.0, 0.0]],
  "v0": 10.0,
  "n": 16
}"#;
        let cfg = write_config(tmp.path(), body);
        let p = prepare(&cfg, None).unwrap();
        match cmd_scan_v0(&p) {
            Err(Error::InvalidArgument(_)) => {}
            other => panic!("expected invalid-argument, got {other:?}"),
        }
    }

    #[test]
    fn bad_configs_are_named_errors() {
        let tmp = TempDir::new().unwrap();
        match prepare(&tmp.path().join("missing.json"), None) {
            Err(Error::Io(_)) => {}
            other => panic!("expected io error, got {other:?}"),
        }
        let cfg = write_config(tmp.path(), "{ not json");
        match prepare(&cfg, None) {
            Err(Error::Format { line, .. }) => assert!(line >= 1),
            other => panic!("expected format error, got {other:?}"),
        }
        // Zero-length extension: T' = T.
        let body = r#"{
  "model": { "kind": "two_level_rwa", "omega0": 10.0, "delta0": 5.0, "t_pulse": 1.0 },
  "initial": [[1.0, 0.0], [0.0, 0.0]],
  "v0": 10.0,
  "n": 16,
  "extra_interval": 0.0
}"#;
        let cfg = write_config(tmp.path(), body);
        match prepare(&cfg, None) {
            Err(Error::InvalidArgument(_)) => {}
            other => panic!("expected invalid-argument, got {other:?}"),
        }
    }

    #[test]
    fn custom_samples_load_relative_to_the_config() {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("out");
        // Two decoupled constant levels, written in the dump format.
        let mut samples = String::new();
        for _ in 0..8 {
            samples.push_str("0.5,0 0,0 0,0 2,0\n");
        }
        fs::write(tmp.path().join("h.txt"), samples).unwrap();
        let body = format!(
            r#"{{
  "model": {{ "kind": "custom_sampled", "path": "h.txt" }},
  "initial": [[1.0, 0.0], [0.0, 0.0]],
  "v0": 10.0,
  "n": 8,
  "t_physical": 1.0,
  "extra_interval": 1.0,
  "reference_cap": 8192,
  "output_dir": {out:?}
}}"#,
            out = out.display().to_string()
        );
        let cfg = write_config(tmp.path(), &body);
        let p = prepare(&cfg, None).unwrap();
        assert_eq!(p.spec.level_count().unwrap(), 2);
        cmd_run(&p, false).unwrap();
        let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
        let omega_re: f64 = summary
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!((omega_re - 0.5).abs() < 1e-8, "omega_re = {omega_re}");
    }

    #[test]
    fn convention_resolution_prefers_the_flag() {
        let tmp = TempDir::new().unwrap();
        let body = r#"{
  "model": { "kind": "two_level_rwa", "omega0": 10.0, "delta0": 5.0, "t_pulse": 1.0 },
  "initial": [[1.0, 0.0], [0.0, 0.0]],
  "v0": 10.0,
  "n": 16,
  "convention": "unsigned"
}"#;
        let cfg = write_config(tmp.path(), body);
        let p = prepare(&cfg, None).unwrap();
        assert!(matches!(p.convention, Convention::Unsigned));
        let p = prepare(&cfg, Some(Convention::Signed)).unwrap();
        assert!(matches!(p.convention, Convention::Signed));
        let body_bad = body.replace("unsigned", "sideways");
        let cfg_bad = write_config(tmp.path(), &body_bad);
        assert!(prepare(&cfg_bad, None).is_err());
    }

    #[test]
    fn output_dir_precedence() {
        let ours = resolve_out_dir(Some(PathBuf::from("cfg")), None);
        assert_eq!(ours, PathBuf::from("cfg"));
        let env = resolve_out_dir(Some(PathBuf::from("cfg")), Some("env".into()));
        assert_eq!(env, PathBuf::from("env"));
        let neither = resolve_out_dir(None, Some(std::ffi::OsString::new()));
        assert_eq!(neither, PathBuf::from("."));
    }

    #[test]
    fn csv_fields_with_commas_are_quoted() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(0.5), "0.5");
    }
}
