use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use binrep::decision::{parse_decimal_ratio, Rational};
use binrep::simulation::experiment::{
    default_methods, run_bias_experiment, run_mammography_experiment, run_risk_experiment, BiasExperiment, MammoExperiment,
    MethodSettings, RiskExperiment,
};
use binrep::simulation::{simulate_dataset, simulate_mammography, MammoConfig, NDist, SimConfig};
use binrep::{
    classify, confusion_table, em_fit, empirical_risk, estimate, gibbs_run, load_csv, optimal_thresholds, prediction_table,
    score_average, score_map, score_median, summarize, CsvFormat, EmConfig, EmFitResult, EstimateSet, Execution,
    GibbsConfig, LossSpec, OptimalThresholds, PosteriorSample, Predictor, PriorSpec, ReplicateDataset, RiskMode,
    ScoreMethod, ScoreVector, ThresholdPair,
};
use num_rational::Ratio;
use serde_json::json;

use crate::args::{Cli, Command, ExperimentArgs, ExperimentMode, FormatArg, GlobalArgs, MethodArg, PredictArgs, SimulateArgs};

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag combinations; exit code 2.
    Usage(String),
    /// Data, numerical or I/O failures; exit code 1.
    Data(anyhow::Error),
}

impl From<binrep::Error> for Failure {
    fn from(e: binrep::Error) -> Self {
        match e {
            binrep::Error::Argument(msg) => Failure::Usage(msg),
            other => Failure::Data(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

pub fn run(cli: &Cli) -> CmdResult {
    let g = &cli.global;
    match &cli.command {
        Command::Score { sidecar } => cmd_score(g, sidecar.as_deref()),
        Command::Classify { sidecar } => cmd_classify(g, sidecar.as_deref()),
        Command::Estimate => cmd_estimate(g),
        Command::Predict(args) => cmd_predict(g, args),
        Command::Simulate(args) => cmd_simulate(g, args),
        Command::Experiment { mode } => cmd_experiment(g, mode),
    }
}

fn method_of(arg: MethodArg) -> ScoreMethod {
    match arg {
        MethodArg::Average => ScoreMethod::Average,
        MethodArg::Median => ScoreMethod::Median,
        MethodArg::Map => ScoreMethod::Map,
        MethodArg::Bayes => ScoreMethod::Bayes,
    }
}

fn require_seed(g: &GlobalArgs, what: &str) -> CmdResult<u64> {
    let seed = g.seed.ok_or_else(|| Failure::Usage(format!("--seed is required for {what}")))?;
    eprintln!("seed: {seed}");
    Ok(seed)
}

fn load(g: &GlobalArgs) -> CmdResult<ReplicateDataset> {
    let path = g.input.as_ref().ok_or_else(|| Failure::Usage("--input is required".into()))?;
    let format = match g.format {
        FormatArg::Sufficient => CsvFormat::Sufficient,
        FormatArg::Wide => CsvFormat::Wide,
    };
    Ok(load_csv(path, format)?)
}

fn open_output(path: Option<&Path>) -> CmdResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn prior(g: &GlobalArgs) -> CmdResult<PriorSpec> {
    Ok(match g.prior.as_str() {
        "default" => PriorSpec::default_prior(),
        "misguided" => PriorSpec::misguided(),
        path => PriorSpec::from_json_file(path)?,
    })
}

fn em_config(g: &GlobalArgs, seed: u64) -> EmConfig {
    EmConfig { restarts: g.restarts.unwrap_or(EmConfig::default().restarts), seed, ..EmConfig::default() }
}

fn gibbs_config(g: &GlobalArgs, seed: u64, base: GibbsConfig) -> GibbsConfig {
    GibbsConfig {
        chains: g.chains.unwrap_or(base.chains),
        iters: g.iters.unwrap_or(base.iters),
        burnin: g.burnin.unwrap_or(base.burnin),
        seed,
        ..base
    }
}

/// Scores of one method plus whatever was fitted on the way.
struct Fitted {
    scores: ScoreVector,
    em: Option<EmFitResult>,
    sample: Option<PosteriorSample>,
    estimates: Option<EstimateSet>,
    report: Option<serde_json::Value>,
}

fn fit(g: &GlobalArgs, data: &ReplicateDataset) -> CmdResult<Fitted> {
    let plain = |scores| Fitted { scores, em: None, sample: None, estimates: None, report: None };
    match method_of(g.method) {
        ScoreMethod::Average => Ok(plain(score_average(data))),
        ScoreMethod::Median => Ok(plain(score_median(data))),
        ScoreMethod::Map => {
            let seed = require_seed(g, "MAP scores")?;
            let cfg = em_config(g, seed);
            let em = em_fit(data, &cfg)?;
            let report = json!({
                "method": "map",
                "seed": seed,
                "restarts": cfg.restarts,
                "best_restart": em.best_restart,
                "converged_restarts": em.converged.iter().filter(|c| **c).count(),
                "log_posterior": em.log_posterior,
                "theta": em.params.theta,
                "p": em.params.p,
                "q": em.params.q,
            });
            Ok(Fitted { scores: score_map(data, &em)?, em: Some(em), sample: None, estimates: None, report: Some(report) })
        }
        ScoreMethod::Bayes | ScoreMethod::Likelihood => {
            let seed = require_seed(g, "Bayesian scores")?;
            let prior = prior(g)?;
            let cfg = gibbs_config(g, seed, GibbsConfig::default());
            let sample = gibbs_run(data, &prior, &cfg)?;
            let summary = summarize(&sample, 0.95)?;
            let estimates = EstimateSet::from_posterior(&summary);
            let report = json!({
                "method": "bayes",
                "seed": seed,
                "prior": prior,
                "chains": cfg.chains,
                "iters": cfg.iters,
                "burnin": cfg.burnin,
                "max_rhat": summary.max_rhat,
                "estimates": estimates,
            });
            Ok(Fitted {
                scores: summary.bayes_scores,
                em: None,
                sample: Some(sample),
                estimates: Some(estimates),
                report: Some(report),
            })
        }
    }
}

fn write_sidecar(g: &GlobalArgs, explicit: Option<&Path>, report: &Option<serde_json::Value>) -> CmdResult {
    let Some(report) = report else { return Ok(()) };
    let text = serde_json::to_string_pretty(report).context("serializing fitted parameters")?;
    let target = explicit.map(Path::to_path_buf).or_else(|| {
        g.output.as_ref().map(|o| {
            let mut name = o.as_os_str().to_owned();
            name.push(".json");
            PathBuf::from(name)
        })
    });
    match target {
        Some(path) => std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn cmd_score(g: &GlobalArgs, sidecar: Option<&Path>) -> CmdResult {
    let data = load(g)?;
    let fitted = fit(g, &data)?;
    let mut w = csv::Writer::from_writer(open_output(g.output.as_deref())?);
    w.write_record(["id", "n", "s", "score"])?;
    for (r, y) in data.records().iter().zip(fitted.scores.scores()) {
        w.write_record([r.id.clone(), r.n.to_string(), r.s.to_string(), y.to_string()])?;
    }
    w.flush()?;
    write_sidecar(g, sidecar, &fitted.report)
}

fn parse_loss(g: &GlobalArgs) -> CmdResult<Option<LossSpec>> {
    g.loss.as_deref().map(|s| s.parse::<LossSpec>().map_err(Failure::from)).transpose()
}

/// Thresholds from `--vl/--vu`, else from `--loss`, else `fallback`.
fn thresholds(g: &GlobalArgs, loss: Option<&LossSpec>, fallback: Option<ThresholdPair>) -> CmdResult<ThresholdPair> {
    let t = match (&g.vl, &g.vu, loss) {
        (Some(vl), Some(vu), _) => ThresholdPair::parse(vl, vu)?,
        (Some(_), None, _) | (None, Some(_), _) => return Err(Failure::Usage("--vl and --vu must be given together".into())),
        (None, None, Some(loss)) => match optimal_thresholds(loss)? {
            OptimalThresholds::Indecision(t) => t,
            none @ OptimalThresholds::NoIndecision { cutoff } => {
                eprintln!("indecision never optimal; using v_L = v_U = {cutoff}");
                none.thresholds()?
            }
        },
        (None, None, None) => {
            fallback.ok_or_else(|| Failure::Usage("give --vl and --vu, or --loss a,b,c,d".into()))?
        }
    };
    eprintln!("v_L = {}, v_U = {}", t.v_l, t.v_u);
    Ok(t)
}

fn cmd_classify(g: &GlobalArgs, sidecar: Option<&Path>) -> CmdResult {
    let loss = parse_loss(g)?;
    let t = thresholds(g, loss.as_ref(), None)?;
    let data = load(g)?;
    let fitted = fit(g, &data)?;
    let c = classify(&fitted.scores, &t);

    let mut w = csv::Writer::from_writer(open_output(g.output.as_deref())?);
    w.write_record(["id", "score", "decision"])?;
    for ((r, y), d) in data.records().iter().zip(fitted.scores.scores()).zip(&c.decisions) {
        w.write_record([r.id.clone(), y.to_string(), d.to_string()])?;
    }
    w.flush()?;
    write_sidecar(g, sidecar, &fitted.report)?;

    let Ok(truth) = data.truth() else { return Ok(()) };
    let table = confusion_table(&c, &truth)?;
    eprintln!("confusion (rows: status 0, 1; columns: decision 0, 0.5, 1)");
    for (status, row) in table.counts.iter().enumerate() {
        eprintln!("  {status}: {:>5} {:>5} {:>5}", row[0], row[1], row[2]);
    }
    let risk_loss = match loss {
        Some(l) => Some(l),
        // Symmetric thresholds imply the symmetric loss with a = v_L.
        None => match t.exact() {
            Some((l, u)) if l + u == Ratio::from_integer(1) && l <= Ratio::new(1, 2) => Some(LossSpec::symmetric(l)?),
            _ => None,
        },
    };
    match risk_loss {
        Some(l) => {
            let total = empirical_risk(&c, &truth, &l, RiskMode::Total)?;
            let mean = empirical_risk(&c, &truth, &l, RiskMode::Mean)?;
            eprintln!("risk: total {total}, mean {mean}");
        }
        None => eprintln!("risk: pass --loss to evaluate asymmetric thresholds"),
    }
    Ok(())
}

fn cmd_estimate(g: &GlobalArgs) -> CmdResult {
    let data = load(g)?;
    let fitted = fit(g, &data)?;
    let est = match fitted.estimates {
        Some(e) => e,
        None => estimate(&data, &fitted.scores)?,
    };
    let mut out = open_output(g.output.as_deref())?;
    writeln!(out, "{}", est.to_json()?)?;
    out.flush()?;
    Ok(())
}

fn cmd_predict(g: &GlobalArgs, args: &PredictArgs) -> CmdResult {
    let loss = parse_loss(g)?;
    let t = thresholds(g, loss.as_ref(), Some(ThresholdPair::parse("0.5", "0.5")?))?;
    let data = load(g)?;
    let fitted = fit(g, &data)?;
    let predictor = match (&fitted.em, &fitted.sample) {
        (Some(em), _) => Predictor::Plugin(em.model_params()?),
        (_, Some(sample)) => Predictor::Bayes(sample),
        _ => Predictor::Plugin(estimate(&data, &fitted.scores)?.point().to_params()?),
    };
    let mut out = open_output(g.output.as_deref())?;
    if args.table {
        prediction_table(args.nmax, &predictor, &t, Execution::default())?.write_csv(&mut out)?;
    } else {
        // Both are required by clap unless --table is given.
        let (n, s) = (args.n.unwrap_or_default(), args.s.unwrap_or_default());
        let score = predictor.score(n, s)?;
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["n", "s", "score", "decision"])?;
        w.write_record([n.to_string(), s.to_string(), score.to_string(), t.decide(score).to_string()])?;
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

fn parse_n_dist(s: &str) -> CmdResult<NDist> {
    let bad = || Failure::Usage(format!("replicate count must be k or lo:hi, got {s:?}"));
    match s.split_once(':') {
        Some((lo, hi)) => Ok(NDist::Uniform {
            lo: lo.trim().parse().map_err(|_| bad())?,
            hi: hi.trim().parse().map_err(|_| bad())?,
        }),
        None => Ok(NDist::Fixed(s.trim().parse().map_err(|_| bad())?)),
    }
}

/// `lo:hi:step` of decimals, inclusive of `hi` when it lies on the grid.
fn parse_grid(s: &str) -> CmdResult<Vec<Rational>> {
    let bad = || Failure::Usage(format!("grid must be lo:hi:step with decimal entries, got {s:?}"));
    let parts: Vec<Rational> = s.split(':').map(|p| parse_decimal_ratio(p).ok_or_else(bad)).collect::<CmdResult<_>>()?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if step <= Ratio::from_integer(0) || hi < lo {
        return Err(bad());
    }
    let mut grid = Vec::new();
    let mut x = lo;
    while x <= hi {
        grid.push(x);
        x += step;
    }
    Ok(grid)
}

fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn cmd_simulate(g: &GlobalArgs, args: &SimulateArgs) -> CmdResult {
    let seed = require_seed(g, "simulation")?;
    let mut out = open_output(g.output.as_deref())?;
    if args.mammography {
        simulate_mammography(&MammoConfig { seed, ..MammoConfig::default() })?.write_csv(&mut out)?;
    } else {
        let cfg = SimConfig {
            theta: args.theta,
            p: args.p,
            q: args.q,
            n: args.individuals,
            n_dist: parse_n_dist(&args.n)?,
            seed,
        };
        simulate_dataset(&cfg)?.write_sufficient_csv(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn method_settings(g: &GlobalArgs) -> CmdResult<MethodSettings> {
    let base = MethodSettings::default();
    Ok(MethodSettings {
        em: EmConfig { restarts: g.restarts.unwrap_or(base.em.restarts), ..base.em },
        gibbs: gibbs_config(g, 0, base.gibbs),
        prior: prior(g)?,
    })
}

fn base_sim(common: &ExperimentArgs, theta: f64) -> CmdResult<SimConfig> {
    Ok(SimConfig { theta, p: common.p, q: common.q, n: common.individuals, n_dist: parse_n_dist(&common.n)?, seed: 0 })
}

fn write_records(path: Option<&Path>, write: impl FnOnce(Box<dyn Write>) -> binrep::Result<()>) -> CmdResult {
    if let Some(p) = path {
        write(open_output(Some(p))?)?;
    }
    Ok(())
}

fn cmd_experiment(g: &GlobalArgs, mode: &ExperimentMode) -> CmdResult {
    let seed = require_seed(g, "experiments")?;
    let settings = method_settings(g)?;
    let out = open_output(g.output.as_deref())?;
    match mode {
        ExperimentMode::Bias { common, theta } => {
            let exp = BiasExperiment {
                theta_grid: parse_grid(theta)?.into_iter().map(to_f64).collect(),
                reps: common.reps,
                base: base_sim(common, 0.0)?,
                methods: default_methods(),
                settings,
                seed,
                exec: Execution::default(),
            };
            let res = run_bias_experiment(&exp)?;
            res.write_summary_csv(out)?;
            write_records(common.records.as_deref(), |w| res.write_records_csv(w))
        }
        ExperimentMode::Risk { common, theta, a } => {
            let exp = RiskExperiment {
                a_grid: parse_grid(a)?,
                reps: common.reps,
                base: base_sim(common, *theta)?,
                methods: default_methods(),
                settings,
                seed,
                exec: Execution::default(),
            };
            let res = run_risk_experiment(&exp)?;
            res.write_summary_csv(out)?;
            write_records(common.records.as_deref(), |w| res.write_records_csv(w))
        }
        ExperimentMode::Mammography { reps, radiologists, test_size, records } => {
            let exp = MammoExperiment {
                reps: *reps,
                radiologists: *radiologists,
                test_size: *test_size,
                settings,
                seed,
                ..MammoExperiment::default()
            };
            let res = run_mammography_experiment(&exp)?;
            res.write_summary_csv(out)?;
            write_records(records.as_deref(), |w| res.write_risks_csv(w))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_are_exact() {
        let g = parse_grid("0.10:0.50:0.02").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(*g.last().unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_grid("0.05:0.5:0.05").unwrap().len(), 10);
        assert!(matches!(parse_grid("0.1:0.5"), Err(Failure::Usage(_))));
        assert!(matches!(parse_grid("0.1:0.5:0"), Err(Failure::Usage(_))));
    }

    #[test]
    fn replicate_counts() {
        assert_eq!(parse_n_dist("3").unwrap(), NDist::Fixed(3));
        assert_eq!(parse_n_dist("2:6").unwrap(), NDist::Uniform { lo: 2, hi: 6 });
        assert!(parse_n_dist("two").is_err());
    }
}
