use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlid::error::EXIT_NOT_CONVERGED;
use nlid::experiments::{emit_theta_profile, parse_levels, profile_csv, table_csv, RowStatus};
use nlid::results::ResultFile;
use nlid::surrogate::{make_surrogate, reference_state, SurrogateFile};
use nlid::{convergence_table, run_identification, AppError, AppResult, Case, CaseSpec, Experiment, RunSettings};
use nlid_core::{BfgsConfig, StateField};

#[derive(Parser)]
#[command(name = "nlid", version, about = "Nonlocal diffusion parameter identification in 1D")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Stop when the gradient max-norm falls below this fraction of its
    /// initial value (or below the value itself if the initial norm is < 1).
    #[arg(long, global = true, default_value_t = BfgsConfig::default().grad_tol)]
    grad_tol: f64,
    #[arg(long, global = true, default_value_t = BfgsConfig::default().max_iters)]
    max_iters: usize,
    /// Double the quadrature order until consecutive orders agree; fail if
    /// the doubling budget runs out.
    #[arg(long, global = true)]
    verify_quadrature: bool,
    /// Worker threads; 0 runs the sequential reference path.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Fine-mesh forward solution with the true parameter.
    Surrogate {
        #[arg(long)]
        case: Case,
        /// Elements in Omega; defaults to the case's fine mesh.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// One identification run.
    Identify {
        #[arg(long)]
        case: Case,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Constant initial parameter.
        #[arg(long, default_value_t = 1.0)]
        init: f64,
        #[arg(long)]
        surrogate: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Errors and rates over a list of `N:M` levels, as CSV.
    Convergence {
        #[arg(long)]
        case: Case,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        levels: String,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        surrogate: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Samples a stored parameter over the whole mesh, as CSV.
    Profile {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Global {
    fn settings(&self, init: f64) -> AppResult<RunSettings> {
        let bfgs = BfgsConfig {
            grad_tol: self.grad_tol,
            max_iters: self.max_iters,
            ..BfgsConfig::default()
        };
        bfgs.validate()?;
        Ok(RunSettings {
            bfgs,
            init,
            verify_quadrature: self.verify_quadrature,
            threads: self.threads,
            ..RunSettings::default()
        })
    }
}

fn experiment(case: Case, eps: Option<f64>, surrogate: Option<&Path>, settings: &RunSettings) -> AppResult<Experiment> {
    let spec = CaseSpec::new(case, eps)?;
    let given = match surrogate {
        Some(path) => {
            let file = SurrogateFile::load(path)?;
            if file.case != case {
                return Err(AppError::Config(format!(
                    "{} holds a surrogate for case {}, not {case}",
                    path.display(),
                    file.case
                )));
            }
            Some(file.to_state()?)
        }
        None => None,
    };
    let u_star: StateField =
        reference_state(&spec, given, settings.order, settings.threads, settings.verify_quadrature)?;
    Ok(Experiment::new(spec, u_star))
}

fn write(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text).map_err(|source| AppError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> AppResult<i32> {
    let g = &cli.global;
    match cli.command {
        Command::Surrogate { case, n, eps, out } => {
            let s = g.settings(1.0)?;
            let spec = CaseSpec::new(case, eps)?;
            let u = make_surrogate(&spec, n, s.order, s.threads, s.verify_quadrature)?;
            SurrogateFile::new(case, &u).save(&out)?;
            Ok(0)
        }
        Command::Identify {
            case,
            n,
            m,
            eps,
            beta,
            init,
            surrogate,
            out,
        } => {
            let s = g.settings(init)?;
            let exp = experiment(case, eps, surrogate.as_deref(), &s)?;
            let id = run_identification(&exp, n, m, beta, &s)?;
            ResultFile::new(case, &id, &s).save(&out)?;
            println!(
                "N={n} M={m} e_u2={:.6e} e_theta={:.6e} iterations={} status={:?}",
                id.e_u2, id.e_theta, id.run.iterations, id.run.status
            );
            Ok(if id.converged() { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Convergence {
            case,
            eps,
            levels,
            beta,
            surrogate,
            out,
        } => {
            let s = g.settings(1.0)?;
            let levels = parse_levels(&levels)?;
            let exp = experiment(case, eps, surrogate.as_deref(), &s)?;
            let rows: Vec<_> = convergence_table(&exp, &levels, beta, &s).into_iter().map(|(r, _)| r).collect();
            write(&out, &table_csv(&rows))?;
            let mut code = 0;
            for r in &rows {
                match &r.status {
                    RowStatus::Converged => {}
                    RowStatus::NotConverged => {
                        eprintln!("level {}:{} did not converge", r.n, r.m);
                        code = code.max(EXIT_NOT_CONVERGED);
                    }
                    RowStatus::Failed(msg) => {
                        eprintln!("level {}:{} failed: {msg}", r.n, r.m);
                        code = 3;
                    }
                }
            }
            Ok(code)
        }
        Command::Profile { result, samples, out } => {
            let theta = ResultFile::load(&result)?.theta()?;
            write(&out, &profile_csv(&emit_theta_profile(&theta, samples)?))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, args: &[&str]) -> AppResult<i32> {
        let mut full = vec!["nlid".to_string()];
        for a in args {
            let is_file = a.ends_with(".json") || a.ends_with(".csv");
            full.push(if is_file { dir.join(a).display().to_string() } else { a.to_string() });
        }
        run(Cli::try_parse_from(full).expect("arguments parse"))
    }

    #[test]
    fn identify_then_profile() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        assert_eq!(run_in(d, &["identify", "--case", "B", "--n", "16", "--m", "4", "--out", "r.json"]).unwrap(), 0);
        let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
        assert_eq!(result["run"]["case"], "B");
        assert_eq!(result["coeffs"].as_array().unwrap().len(), 5);
        assert_eq!(result["status"], "converged");

        assert_eq!(run_in(d, &["profile", "--result", "r.json", "--samples", "9", "--out", "p.csv"]).unwrap(), 0);
        let csv = fs::read_to_string(d.join("p.csv")).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "z,theta");
        assert_eq!(lines.len(), 10);
    }

    #[test]
    fn convergence_csv_does_not_depend_on_threads() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        for (out, threads) in [("a.csv", "0"), ("b.csv", "2")] {
            let args = ["convergence", "--case", "B", "--levels", "16:4,32:8", "--threads", threads, "--out", out];
            run_in(d, &args).unwrap();
        }
        let a = fs::read_to_string(d.join("a.csv")).unwrap();
        assert_eq!(a, fs::read_to_string(d.join("b.csv")).unwrap());
        assert!(a.starts_with("N,M,e_u2,rate_u,e_theta,rate_theta\n16,4,"));
        assert_eq!(a.lines().count(), 3);
    }

    #[test]
    fn surrogate_file_feeds_identification() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        assert_eq!(run_in(d, &["surrogate", "--case", "C", "--n", "128", "--out", "s.json"]).unwrap(), 0);
        let args = ["identify", "--case", "C", "--n", "32", "--m", "4", "--surrogate", "s.json", "--out", "r.json"];
        assert_eq!(run_in(d, &args).unwrap(), 0);
        let args = ["identify", "--case", "D", "--n", "32", "--m", "4", "--surrogate", "s.json", "--out", "r.json"];
        assert_eq!(run_in(d, &args).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let parse = Cli::try_parse_from(["nlid", "identify", "--case", "E", "--n", "8", "--m", "2", "--out", "x"]);
        assert_eq!(parse.err().unwrap().exit_code(), 2);
        let code = |args: &[&str]| run_in(d, args).map_or_else(|e| e.exit_code(), |c| c);
        assert_eq!(code(&["surrogate", "--case", "B", "--out", "s.json"]), 2);
        assert_eq!(code(&["identify", "--case", "C", "--eps=-1", "--n", "8", "--m", "2", "--out", "x.json"]), 2);
        assert_eq!(code(&["identify", "--case", "B", "--n", "8", "--m", "2", "--grad-tol", "0", "--out", "x.json"]), 2);
        assert_eq!(code(&["profile", "--result", "none.json", "--samples", "4", "--out", "p.csv"]), 2);
        let capped = ["identify", "--case", "B", "--n", "16", "--m", "4", "--max-iters", "1", "--out", "r.json"];
        assert_eq!(code(&capped), EXIT_NOT_CONVERGED);
        // Results are still written.
        assert!(d.join("r.json").exists());
    }
}
