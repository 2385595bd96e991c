use std::path::PathBuf;

use clap::Args;
use pqsim::cooling::{
    brute_force_cooling, cooling_circuit, restart_fidelity_sim, shift_with_noise_sim, tau_d_bound, tau_d_small_kappa,
    ShiftExperiment,
};
use pqsim::lattice::ModelSpec;
use pqsim::oracle::{
    basis_distribution, conditioned_trotter_distribution, evolve_exact, trace_norm_distance, tv_distance,
    ReferenceOptions, MAX_EXACT_QUBITS,
};
use pqsim::percolation::{
    cluster_tail_stats, estimate_threshold, independent_max_clusters, linear_fit, spanning_probability, Grid,
};
use pqsim::sampler::{cluster_bound, sample_distribution};
use pqsim::trotter::{average_trotter_state, build_trotter_circuit_with, plan_steps, StepPlan, TrotterCircuit};
use pqsim::{DenseOperator, EntanglementBreakingChannel, SimError};
use rayon::ThreadPool;
use serde::Serialize;

use crate::output::{self, Meta, VERSION};
use crate::run_config::{self, EffectiveConfig, Overrides};
use crate::{AlgoArgs, CliError};

pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Context {
    fn pool(&self) -> Result<ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))
    }

    fn meta<'a, C: Serialize>(&self, command: &'a str, config: &'a C) -> Meta<'a, C> {
        Meta { version: VERSION, command, seed: self.seed, config }
    }
}

fn effective(ctx: &Context, a: &AlgoArgs) -> Result<EffectiveConfig, CliError> {
    let file = run_config::load(ctx.config.as_deref())?;
    let overrides = Overrides {
        steps: a.steps,
        eps: a.eps,
        samples: a.samples,
        c_prime: a.c_prime,
        tau_c: a.tau_c,
        g: a.g,
        allow_non_cp: a.allow_non_cp,
        mc_assignments: a.mc_assignments,
    };
    Ok(run_config::resolve(file, &overrides)?)
}

struct Prepared {
    model: ModelSpec,
    circuit: TrotterCircuit,
    plan: Option<StepPlan>,
}

fn prepare(eff: &EffectiveConfig) -> Result<Prepared, CliError> {
    let model = eff.model.build()?;
    let opts = eff.trotter_options();
    let (steps, plan) = match eff.steps {
        Some(n) => (n, None),
        None => {
            let plan = plan_steps(&model, eff.eps, &opts)?;
            (plan.steps, Some(plan))
        }
    };
    let circuit = build_trotter_circuit_with(&model, steps, &opts)?;
    Ok(Prepared { model, circuit, plan })
}

#[derive(Serialize)]
struct SampleReport<'a> {
    #[serde(flatten)]
    meta: Meta<'a, EffectiveConfig>,
    plan: Option<StepPlan>,
    circuit: pqsim::trotter::CircuitDigest,
    cluster_bound: f64,
    summary: &'a pqsim::sampler::SampleSummary,
    top: Vec<(String, u64)>,
}

pub fn sample(ctx: &Context, a: &AlgoArgs) -> Result<(), CliError> {
    let eff = effective(ctx, a)?;
    let p = prepare(&eff)?;
    output::prepare(&ctx.out)?;
    let summary = sample_distribution(&p.circuit, eff.c_prime, eff.samples, ctx.workers, ctx.seed)?;
    let meta = ctx.meta("sample", &eff);
    output::write_jsonl(&ctx.out.join("samples.jsonl"), &meta, &summary.records)?;
    let report = SampleReport {
        meta,
        plan: p.plan,
        circuit: p.circuit.digest(),
        cluster_bound: cluster_bound(eff.c_prime, p.model.n()),
        summary: &summary,
        top: summary.top(10),
    };
    let path = output::write_json(&ctx.out.join("sample_summary.json"), &report)?;
    println!(
        "{} samples, {} attempts, rejection rate {:.4}; wrote {}",
        summary.samples,
        summary.attempts,
        summary.rejection_rate,
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct OracleReport<'a> {
    #[serde(flatten)]
    meta: Meta<'a, EffectiveConfig>,
    plan: Option<StepPlan>,
    circuit: pqsim::trotter::CircuitDigest,
    tv_distance: f64,
    tv_to_exact: f64,
    rejection_rate: f64,
    sampler_distribution: Vec<f64>,
    reference: pqsim::oracle::ConditionedReference,
    exact_distribution: Vec<f64>,
}

pub fn oracle_compare(ctx: &Context, a: &AlgoArgs) -> Result<(), CliError> {
    let eff = effective(ctx, a)?;
    let p = prepare(&eff)?;
    if p.model.n() > MAX_EXACT_QUBITS {
        return Err(SimError::SizeGuard(format!("oracle comparison needs n <= {MAX_EXACT_QUBITS}")).into());
    }
    output::prepare(&ctx.out)?;
    let opts = ReferenceOptions { mc_assignments: eff.mc_assignments, seed: ctx.seed, ..Default::default() };
    let reference = conditioned_trotter_distribution(&p.circuit, eff.c_prime, &opts)?;
    let summary = sample_distribution(&p.circuit, eff.c_prime, eff.samples, ctx.workers, ctx.seed)?;
    let sampled = summary.distribution(p.model.n())?;
    let exact = basis_distribution(&evolve_exact(&p.model)?)?;
    let report = OracleReport {
        meta: ctx.meta("oracle-compare", &eff),
        plan: p.plan,
        circuit: p.circuit.digest(),
        tv_distance: tv_distance(&sampled, &reference.distribution)?,
        tv_to_exact: tv_distance(&sampled, &exact)?,
        rejection_rate: summary.rejection_rate,
        sampler_distribution: sampled,
        reference,
        exact_distribution: exact,
    };
    let path = output::write_json(&ctx.out.join("oracle_compare.json"), &report)?;
    println!("tv_distance {:.6} (to exact {:.6}); wrote {}", report.tv_distance, report.tv_to_exact, path.display());
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PercolationArgs {
    /// Dimension of the independent lattice.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long = "p-min", default_value_t = 0.5)]
    pub p_min: f64,
    #[arg(long = "p-max", default_value_t = 0.7)]
    pub p_max: f64,
    #[arg(long = "p-step", default_value_t = 0.01)]
    pub p_step: f64,
    /// Open probability for the closed-cluster tail.
    #[arg(long = "tail-p", default_value_t = 0.75)]
    pub tail_p: f64,
    #[arg(long = "tail-size", default_value_t = 64)]
    pub tail_size: usize,
    #[arg(long = "tail-configs", default_value_t = 1000)]
    pub tail_configs: usize,
}

#[derive(Serialize)]
struct ScanRow {
    size: usize,
    p_open: f64,
    open_spanning: f64,
}

#[derive(Serialize)]
struct ThresholdReport<'a> {
    #[serde(flatten)]
    meta: Meta<'a, PercolationArgs>,
    threshold: pqsim::percolation::ThresholdEstimate,
    tail: pqsim::percolation::TailStats,
}

pub fn percolation_scan(ctx: &Context, a: &PercolationArgs) -> Result<(), CliError> {
    if a.dim == 0 || a.sizes.is_empty() || !(a.p_step > 0.0) || a.p_min > a.p_max {
        return Err(SimError::Config("need dim >= 1, sizes, and an increasing p grid".into()).into());
    }
    output::prepare(&ctx.out)?;
    let pool = ctx.pool()?;
    let steps = ((a.p_max - a.p_min) / a.p_step + 1e-9).floor() as usize;
    let (rows, threshold, tail) = pool.install(|| -> Result<_, CliError> {
        let mut rows = Vec::new();
        for &size in &a.sizes {
            let grid = Grid::open_box(vec![size; a.dim])?;
            for k in 0..=steps {
                let p_open = a.p_min + k as f64 * a.p_step;
                let open_spanning = spanning_probability(&grid, p_open, true, a.trials, ctx.seed);
                rows.push(ScanRow { size, p_open, open_spanning });
            }
        }
        let threshold = estimate_threshold(a.dim, &a.sizes, a.trials, ctx.seed, None)?;
        let grid = Grid::open_box(vec![a.tail_size; a.dim])?;
        let tail = cluster_tail_stats(&independent_max_clusters(&grid, a.tail_p, a.tail_configs, ctx.seed))?;
        Ok((rows, threshold, tail))
    })?;
    let meta = ctx.meta("percolation-scan", a);
    output::write_csv(&ctx.out.join("percolation_scan.csv"), &meta, &rows)?;
    let report = ThresholdReport { meta, threshold, tail };
    let path = output::write_json(&ctx.out.join("percolation_threshold.json"), &report)?;
    println!(
        "p_c {:.4} [{:.4}, {:.4}]; wrote {}",
        report.threshold.p_c,
        report.threshold.ci_low,
        report.threshold.ci_high,
        path.display()
    );
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct TrotterScanArgs {
    #[command(flatten)]
    pub algo: AlgoArgs,
    #[arg(long = "steps-list", value_delimiter = ',', default_value = "8,16,32,64,128,256")]
    pub steps_list: Vec<usize>,
}

#[derive(Serialize)]
struct TrotterRow {
    steps: usize,
    trace_norm_error: f64,
    tv_error: f64,
}

#[derive(Serialize)]
struct TrotterReport<'a> {
    #[serde(flatten)]
    meta: Meta<'a, EffectiveConfig>,
    steps_list: &'a [usize],
    loglog_slope: Option<f64>,
    rows: &'a [TrotterRow],
}

pub fn trotter_scan(ctx: &Context, a: &TrotterScanArgs) -> Result<(), CliError> {
    let eff = effective(ctx, &a.algo)?;
    let model = eff.model.build()?;
    if model.n() > MAX_EXACT_QUBITS {
        return Err(SimError::SizeGuard(format!("trotter scan needs n <= {MAX_EXACT_QUBITS}")).into());
    }
    if a.steps_list.is_empty() || a.steps_list.contains(&0) {
        return Err(SimError::Config("steps list must hold positive counts".into()).into());
    }
    output::prepare(&ctx.out)?;
    let exact = evolve_exact(&model)?;
    let exact_p = basis_distribution(&exact)?;
    let opts = eff.trotter_options();
    let mut rows = Vec::new();
    for &steps in &a.steps_list {
        let circuit = build_trotter_circuit_with(&model, steps, &opts)?;
        let rho = average_trotter_state(&circuit)?;
        let diag: Vec<f64> = (0..rho.nrows()).map(|i| rho[(i, i)].re).collect();
        rows.push(TrotterRow {
            steps,
            trace_norm_error: trace_norm_distance(&rho, &exact.rho),
            tv_error: 0.5 * diag.iter().zip(&exact_p).map(|(x, y)| (x - y).abs()).sum::<f64>(),
        });
    }
    let usable: Vec<&TrotterRow> = rows.iter().filter(|r| r.trace_norm_error > 0.0).collect();
    let xs: Vec<f64> = usable.iter().map(|r| (r.steps as f64).ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.trace_norm_error.ln()).collect();
    let slope = linear_fit(&xs, &ys).map(|f| f.slope);
    let meta = ctx.meta("trotter-scan", &eff);
    output::write_csv(&ctx.out.join("trotter_scan.csv"), &meta, &rows)?;
    let report = TrotterReport { meta, steps_list: &a.steps_list, loglog_slope: slope, rows: &rows };
    let path = output::write_json(&ctx.out.join("trotter_scan.json"), &report)?;
    match slope {
        Some(s) => println!("log-log slope {s:.4}; wrote {}", path.display()),
        None => println!("no slope (fewer than two nonzero errors); wrote {}", path.display()),
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CoolingArgs {
    /// Input polarization of the auxiliary qubits.
    #[arg(long = "eps-in", default_value_t = 0.2)]
    pub eps_in: f64,
    /// Largest compression depth (m = 3^k).
    #[arg(long = "max-k", default_value_t = 3)]
    pub max_k: u32,
    #[arg(long = "tau-s", default_value_t = 0.01)]
    pub tau_s: f64,
    /// Allowed `κ τ_d` for the computational qubits.
    #[arg(long = "c-th", default_value_t = 0.1)]
    pub c_th: f64,
    #[arg(long, value_delimiter = ',', default_value = "1e-8,1e-7,1e-6,1e-5,1e-4,1e-3,1e-2,1e-1")]
    pub kappas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub ms: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub qs: Vec<f64>,
}

#[derive(Serialize)]
struct LadderRow {
    k: u32,
    m: usize,
    polarization: f64,
    brute_force: Option<f64>,
    fidelity: f64,
}

#[derive(Serialize)]
struct FeasibilityRow {
    kappa: f64,
    m: usize,
    q: f64,
    tau_d: f64,
    tau_d_small_kappa: f64,
    kappa_tau_d: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct ShiftRow {
    m: usize,
    kappa: f64,
    tau_d: f64,
    outcome: pqsim::cooling::ShiftOutcome,
}

#[derive(Serialize)]
struct CoolingReport<'a> {
    #[serde(flatten)]
    meta: Meta<'a, CoolingArgs>,
    shift_checks: Vec<ShiftRow>,
    restart_fidelity: Vec<f64>,
}

pub fn cooling_demo(ctx: &Context, a: &CoolingArgs) -> Result<(), CliError> {
    if !(a.eps_in > 0.0 && a.eps_in <= 1.0) || !(a.tau_s > 0.0) {
        return Err(SimError::Config("need eps-in in (0, 1] and tau-s > 0".into()).into());
    }
    output::prepare(&ctx.out)?;
    let mut ladder = Vec::new();
    for k in 0..=a.max_k {
        let m = 3usize.pow(k);
        // A loose target so every depth is reported.
        let schedule = cooling_circuit(m, a.eps_in, 1.0 - 1e-12)?;
        let brute_force = if m <= 9 { Some(brute_force_cooling(&schedule, a.eps_in)?) } else { None };
        ladder.push(LadderRow {
            k,
            m,
            polarization: schedule.achieved,
            brute_force,
            fidelity: (1.0 + schedule.achieved) / 2.0,
        });
    }
    let mut feasibility = Vec::new();
    for &m in &a.ms {
        for &q in &a.qs {
            for &kappa in &a.kappas {
                let tau_d = tau_d_bound(m, kappa, a.tau_s, q)?;
                feasibility.push(FeasibilityRow {
                    kappa,
                    m,
                    q,
                    tau_d,
                    tau_d_small_kappa: tau_d_small_kappa(m, kappa, a.tau_s, q),
                    kappa_tau_d: kappa * tau_d,
                    feasible: kappa * tau_d <= a.c_th,
                });
            }
        }
    }
    let sigma = DenseOperator::from_real_rows(&[&[(1.0 + a.eps_in) / 2.0, 0.0], &[0.0, (1.0 - a.eps_in) / 2.0]])?;
    let noise = EntanglementBreakingChannel::z_measure();
    let mut shift_checks = Vec::new();
    let kappa = 1.0;
    for m in 1..=3 {
        let tau_d = tau_d_bound(m, kappa, a.tau_s, 0.1)?;
        let exp = ShiftExperiment { m, kappa, tau_s: a.tau_s, tau_d, q: 0.1 };
        shift_checks.push(ShiftRow { m, kappa, tau_d, outcome: shift_with_noise_sim(&exp, &noise, &sigma)? });
    }
    let restart = restart_fidelity_sim(3, 0.05, 0.1, 0.5, a.eps_in, 4)?;

    let meta = ctx.meta("cooling-demo", a);
    output::write_csv(&ctx.out.join("cooling_ladder.csv"), &meta, &ladder)?;
    output::write_csv(&ctx.out.join("tau_d_feasibility.csv"), &meta, &feasibility)?;
    let report = CoolingReport { meta, shift_checks, restart_fidelity: restart.fidelity };
    let path = output::write_json(&ctx.out.join("cooling_demo.json"), &report)?;
    for row in &ladder {
        println!("k={} m={:>3} polarization {:.6}", row.k, row.m, row.polarization);
    }
    println!("wrote {}", path.display());
    Ok(())
}
