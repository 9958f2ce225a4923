use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use pomdp_lab::io;
use pomdp_lab::limits::{gamma_convergence_sweep, sensor_grid_policies, track_from_sweep};
use pomdp_lab::mc::{rollout_value, RolloutConfig};
use pomdp_lab::stationary::{average_reward_report, spectral_analysis};
use pomdp_lab::tolerance::ROLLOUT_BIAS;
use pomdp_lab::{
    builtin_example, discounted_reward, improve_policy, improvement_iterate, reward_surface,
    solve_value, Distribution64, Error, EvalMode, Policy64, Pomdp64, Result, SimplexGrid,
    DEFAULT_GAMMAS,
};

use crate::output::{self, float, Table};

/// Exact evaluation and support-bounded improvement of memoryless POMDP
/// policies.
///
/// Files are JSON: a POMDP object (`n_world`, `n_sensor`, `n_action`,
/// `alpha[w][a][w']`, `beta[w][s]`, `reward[w][a]`), a policy `[s][a]` and a
/// start distribution `[w]`. Indices are 0-based. When `--mu` is omitted the
/// uniform distribution over world states is used.
///
/// Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "pomdp-lab", version)]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, env = "POMDP_LAB_THREADS")]
    pub threads: Option<usize>,

    /// Where to write the run manifest (default: `<out>.manifest.json`, or
    /// stderr when the run has no output file).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a POMDP file and print its dimensions.
    Validate {
        #[arg(long)]
        pomdp: PathBuf,
    },
    /// State values V, action values Q and the normalized discounted reward.
    Value {
        #[command(flatten)]
        input: PolicyInput,
        #[arg(long)]
        gamma: f64,
    },
    /// Chain structure, stationary distribution and average reward.
    Stationary {
        #[command(flatten)]
        input: PolicyInput,
    },
    /// One support-bounded improvement step with its cone certificate.
    Improve {
        #[command(flatten)]
        input: PolicyInput,
        #[arg(long)]
        gamma: f64,
        /// Also write the improved policy to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeated improvement steps; writes the trace as CSV.
    Iterate {
        #[command(flatten)]
        input: PolicyInput,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the final policy to this file.
        #[arg(long)]
        policy_out: Option<PathBuf>,
    },
    /// Reward over a simplex grid of one policy row; writes CSV.
    Sweep {
        #[command(flatten)]
        input: OptionalPolicyInput,
        #[arg(long)]
        sensor: usize,
        #[arg(long, default_value_t = 40)]
        resolution: usize,
        #[arg(long, conflicts_with = "average", required_unless_present = "average")]
        gamma: Option<f64>,
        /// Evaluate the average reward instead of a discounted one.
        #[arg(long)]
        average: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest gap between discounted and average reward over the grid, per gamma.
    GammaSweep(GridArgs),
    /// Discounted maximizer over the grid per gamma and its average reward.
    TrackMax(GridArgs),
    /// Compare Monte-Carlo rollouts with the exact values.
    McCheck {
        #[command(flatten)]
        input: PolicyInput,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start state; all states when omitted.
        #[arg(long)]
        w0: Option<usize>,
        /// Bound on the truncation bias; fixes the horizon.
        #[arg(long, default_value_t = ROLLOUT_BIAS)]
        bias: f64,
    },
    /// Write the built-in four-state example.
    Example {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PolicyInput {
    #[arg(long)]
    pomdp: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    mu: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptionalPolicyInput {
    #[arg(long)]
    pomdp: PathBuf,
    /// Rows held fixed; uniform when omitted.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    mu: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    input: OptionalPolicyInput,
    /// Sensor value whose row is varied; defaults to the one consistent with
    /// the most world states.
    #[arg(long)]
    sensor: Option<usize>,
    #[arg(long, default_value_t = 40)]
    grid_resolution: usize,
    /// Comma separated, ascending.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_GAMMAS)]
    gammas: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What a command reports back for the manifest and the exit status.
#[derive(Debug, Default)]
pub struct Outcome {
    pub exit_code: u8,
    pub primary_output: Option<PathBuf>,
    pub input_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
}

impl Outcome {
    fn read(&mut self, flag: &str, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.input_hashes
            .insert(flag.to_string(), format!("{:x}", Sha256::digest(&bytes)));
        String::from_utf8(bytes).map_err(|e| Error::Parse {
            what: "input file",
            message: format!("{}: {e}", path.display()),
        })
    }

    fn pomdp(&mut self, path: &Path) -> Result<Pomdp64> {
        io::parse_pomdp(&self.read("pomdp", path)?)
    }

    fn policy(&mut self, path: Option<&Path>, p: &Pomdp64) -> Result<Policy64> {
        match path {
            Some(path) => io::parse_policy(&self.read("policy", path)?),
            None => Ok(Policy64::uniform(p.n_sensor(), p.n_action())),
        }
    }

    fn mu(&mut self, path: Option<&Path>, p: &Pomdp64) -> Result<Distribution64> {
        match path {
            Some(path) => io::parse_distribution(&self.read("mu", path)?),
            None => Ok(Distribution64::uniform(p.n_world())),
        }
    }

    fn load(&mut self, input: &PolicyInput) -> Result<(Pomdp64, Policy64, Distribution64)> {
        let p = self.pomdp(&input.pomdp)?;
        let pi = self.policy(Some(&input.policy), &p)?;
        let mu = self.mu(input.mu.as_deref(), &p)?;
        Ok((p, pi, mu))
    }

    fn load_optional(
        &mut self,
        input: &OptionalPolicyInput,
    ) -> Result<(Pomdp64, Policy64, Distribution64)> {
        let p = self.pomdp(&input.pomdp)?;
        let pi = self.policy(input.policy.as_deref(), &p)?;
        let mu = self.mu(input.mu.as_deref(), &p)?;
        Ok((p, pi, mu))
    }

    fn output(&mut self, path: Option<&Path>) {
        self.primary_output = path.map(Path::to_path_buf);
    }
}

fn rows(m: &pomdp_lab::Matrix64) -> Vec<Vec<f64>> {
    m.to_rows()
}

pub fn run(cli: &Cli, out: &mut Outcome) -> Result<()> {
    match &cli.command {
        Command::Validate { pomdp } => {
            let p = out.pomdp(pomdp)?;
            let supports = (0..p.n_sensor())
                .map(|s| p.sensor_support(s))
                .collect::<Result<Vec<_>>>()?;
            output::json(
                None,
                &json!({
                    "valid": true,
                    "n_world": p.n_world(),
                    "n_sensor": p.n_sensor(),
                    "n_action": p.n_action(),
                    "sensor_support": supports,
                }),
            )
        }

        Command::Value { input, gamma } => {
            let (p, pi, mu) = out.load(input)?;
            let b = solve_value(&p, &pi, *gamma)?;
            let reward = discounted_reward(&p, &pi, *gamma, &mu)?;
            output::json(
                None,
                &json!({
                    "gamma": gamma,
                    "values": b.values,
                    "action_values": rows(&b.action_values),
                    "discounted_reward": reward,
                    "bellman_residual": b.bellman_residual(),
                }),
            )
        }

        Command::Stationary { input } => {
            let (p, pi, mu) = out.load(input)?;
            let (avg, report, stat) = average_reward_report(&p, &pi, &mu)?;
            let t = p.world_transition(&pi)?;
            let spectral = if report.satisfies_star {
                let s = spectral_analysis(&t, &mu, 200)?;
                json!({ "lambda2_abs": s.lambda2_abs, "decay_fit": s.decay_fit })
            } else {
                eprintln!(
                    "warning: the chain is not irreducible and aperiodic; the average reward depends \
                     on mu and optimal policies need not exist"
                );
                Value::Null
            };
            output::json(
                None,
                &json!({
                    "chain": {
                        "irreducible": report.irreducible,
                        "period": report.period,
                        "aperiodic": report.aperiodic,
                        "satisfies_star": report.satisfies_star,
                        "closed_classes": report.closed_classes,
                    },
                    "stationary": stat.dist.probs(),
                    "method": stat.method.as_str(),
                    "residual": stat.residual,
                    "average_reward": avg,
                    "spectral": spectral,
                }),
            )
        }

        Command::Improve {
            input,
            gamma,
            out: path,
        } => {
            let (p, pi, _) = out.load(input)?;
            let res = improve_policy(&p, &pi, *gamma)?;
            if let Some(path) = path {
                io::write_policy(path, &res.policy)?;
                out.output(Some(path));
            }
            let certificate: Vec<Value> = res
                .certificate
                .iter()
                .map(|c| {
                    Value::Array(
                        c.iter()
                            .map(|&(w, slack)| json!({ "world": w, "slack": slack }))
                            .collect(),
                    )
                })
                .collect();
            output::json(
                None,
                &json!({
                    "gamma": gamma,
                    "policy": res.policy.to_rows(),
                    "support_sizes": res.support_sizes,
                    "support_bounds": res.support_bounds,
                    "certificate": certificate,
                    "values_before": res.values_before,
                    "values_after": res.values_after,
                }),
            )
        }

        Command::Iterate {
            input,
            gamma,
            max_iters,
            tol,
            out: path,
            policy_out,
        } => {
            let (p, pi, mu) = out.load(input)?;
            let res = improvement_iterate(&p, &pi, *gamma, &mu, *max_iters, *tol)?;
            let mut table =
                Table::new(&header(&["iteration", "min_value", "reward", "max_change"]));
            for r in &res.trace {
                table.row(&[
                    r.iteration.to_string(),
                    float(r.min_value),
                    float(r.reward),
                    float(r.max_change),
                ]);
            }
            output::deliver(path.as_deref(), &table.into_bytes())?;
            out.output(path.as_deref());
            if let Some(pp) = policy_out {
                io::write_policy(pp, &res.policy)?;
            }
            if !res.converged {
                eprintln!(
                    "note: stopped after {} iterations without converging",
                    res.iterations
                );
            }
            Ok(())
        }

        Command::Sweep {
            input,
            sensor,
            resolution,
            gamma,
            average,
            out: path,
        } => {
            let (p, pi, mu) = out.load_optional(input)?;
            let mode = match (gamma, average) {
                (Some(g), false) => EvalMode::Discounted(*g),
                _ => EvalMode::Average,
            };
            let table = reward_surface(&p, &mu, *sensor, &pi, *resolution, mode)?;
            let mut cols: Vec<String> = vec!["idx".into()];
            cols.extend((0..p.n_action()).map(|a| format!("p_a{a}")));
            cols.extend(["value".into(), "flag".into()]);
            let mut csv = Table::new(&cols);
            let mut flagged = 0;
            for r in &table.rows {
                let mut fields = vec![r.idx.to_string()];
                fields.extend(r.point.iter().map(|&x| float(x)));
                fields.push(float(r.value));
                fields.push(if r.flagged { "1" } else { "0" }.into());
                flagged += r.flagged as usize;
                csv.row(&fields);
            }
            output::deliver(path.as_deref(), &csv.into_bytes())?;
            out.output(path.as_deref());
            if flagged > 0 {
                eprintln!(
                    "warning: {flagged} grid policies violate irreducibility or aperiodicity; \
                     their rows are flagged and use the Cesaro limit"
                );
            }
            Ok(())
        }

        Command::GammaSweep(args) => {
            let (sweep, _) = grid_sweep(args, out)?;
            let maxima = sweep.argmax();
            let mut csv = Table::new(&header(&["gamma", "sup_gap", "max_value", "argmax_idx"]));
            for ((g, gap), (idx, value)) in sweep.gammas.iter().zip(&sweep.sup_gap).zip(maxima) {
                csv.row(&[float(*g), float(*gap), float(value), idx.to_string()]);
            }
            output::deliver(args.out.as_deref(), &csv.into_bytes())?;
            out.output(args.out.as_deref());
            Ok(())
        }

        Command::TrackMax(args) => {
            let (sweep, grid) = grid_sweep(args, out)?;
            let track = track_from_sweep(&sweep);
            let na = grid.dim();
            let mut cols: Vec<String> = vec!["gamma".into(), "argmax_idx".into()];
            cols.extend((0..na).map(|a| format!("p_a{a}")));
            cols.extend(["value".into(), "average_value".into()]);
            let mut csv = Table::new(&cols);
            let mut push = |gamma: String, idx: usize, value: f64, avg: f64| {
                let mut fields = vec![gamma, idx.to_string()];
                fields.extend(grid.points()[idx].iter().map(|&x| float(x)));
                fields.extend([float(value), float(avg)]);
                csv.row(&fields);
            };
            for r in &track.rows {
                push(
                    float(r.gamma),
                    r.argmax_id,
                    r.discounted_value,
                    r.average_at_argmax,
                );
            }
            push(
                "average".into(),
                track.average_argmax,
                track.average_max,
                track.average_max,
            );
            output::deliver(args.out.as_deref(), &csv.into_bytes())?;
            out.output(args.out.as_deref());
            Ok(())
        }

        Command::McCheck {
            input,
            gamma,
            n,
            seed,
            w0,
            bias,
        } => {
            let (p, pi, _) = out.load(input)?;
            out.seed = Some(*seed);
            let exact = solve_value(&p, &pi, *gamma)?.values;
            let starts: Vec<usize> = match w0 {
                Some(w) => vec![*w],
                None => (0..p.n_world()).collect(),
            };
            let config = RolloutConfig {
                horizon: None,
                n: *n,
                seed: *seed,
                bias_target: *bias,
            };
            let mut report = Vec::new();
            let mut all = true;
            for &w in &starts {
                let est = rollout_value(&p, &pi, *gamma, w, config)?;
                let v = *exact.get(w).ok_or(Error::Index {
                    what: "start world state",
                    index: w,
                    size: p.n_world(),
                })?;
                let ok = est.covers(v, 3.0);
                all &= ok;
                report.push(json!({
                    "w0": w,
                    "exact": v,
                    "mean": est.mean,
                    "stderr": est.stderr,
                    "bias": est.bias,
                    "horizon": est.horizon,
                    "n": est.n,
                    "within_3_stderr_plus_bias": ok,
                }));
            }
            output::json(
                None,
                &json!({ "gamma": gamma, "seed": seed, "rows": report, "consistent": all }),
            )?;
            if !all {
                eprintln!("error: a rollout estimate is farther than 3 standard errors plus bias from the exact value");
                out.exit_code = 2;
            }
            Ok(())
        }

        Command::Example { out: path } => {
            let ex = builtin_example::<f64>();
            io::write_pomdp(path, &ex.pomdp)?;
            out.output(Some(path));
            Ok(())
        }
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn grid_sweep(
    args: &GridArgs,
    out: &mut Outcome,
) -> Result<(pomdp_lab::GammaSweep<f64>, SimplexGrid<f64>)> {
    let (p, pi, mu) = out.load_optional(&args.input)?;
    let sensor = match args.sensor {
        Some(s) => s,
        None => {
            let mut best = (0, 0);
            for s in 0..p.n_sensor() {
                let k = p.sensor_support(s)?.len();
                if k > best.1 {
                    best = (s, k);
                }
            }
            best.0
        }
    };
    let grid = SimplexGrid::new(p.n_action(), args.grid_resolution)?;
    let policies = sensor_grid_policies(&pi, sensor, &grid)?;
    let sweep = gamma_convergence_sweep(&p, &mu, &policies, &args.gammas)?;
    if !sweep.excluded.is_empty() {
        eprintln!(
            "warning: {} of {} grid policies excluded (chain not irreducible and aperiodic)",
            sweep.excluded.len(),
            policies.len()
        );
    }
    Ok((sweep, grid))
}
