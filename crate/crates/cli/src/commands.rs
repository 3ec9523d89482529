use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context as _, Result};
use serde::Serialize;

use povmsim_core::bounds::{q_upper_bound_rank_one, theorem2_floor, visibility_robustness, WeightVector};
use povmsim_core::dilation::{dilate_sub_povm, naimark_dilate, DilationOptions};
use povmsim_core::generators::{fourier_povm, haar_random_povm, ic_covariant_povm, sic_povm, DEFAULT_IC_ALPHA};
use povmsim_core::io::{builtin_sic_fiducial, load_fiducial, load_partition, load_povm, load_state, save_partition, save_povm, write_json, DilationFile, PovmFile};
use povmsim_core::noise::{compare_implementations, noisy_post_bound, noisy_scheme_distribution, worst_case_tvd_lower_bound};
use povmsim_core::partitions::{best_of_random, greedy_improve, standard_partition};
use povmsim_core::povm::{born, tvd};
use povmsim_core::sampling::{sample_direct, sample_scheme, SampleReport};
use povmsim_core::scheme::{build_scheme, build_sub_povm, success_probability};
use povmsim_core::{Error, Povm, QuantumState, Seed, C64};

use crate::record::{emit, Recorder};
use crate::{ConcentrationArgs, DilateArgs, GenPovmArgs, Kind, Mode, NoiseArgs, QsuccArgs, SampleArgs, ScanArgs, EXIT_STATISTICAL};

pub struct Context {
    pub ci: bool,
    pub record_path: Option<PathBuf>,
}

/// Bad flag combinations detected after parsing; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl Context {
    fn seed(&self, given: Option<u64>) -> Result<u64> {
        match given {
            Some(s) => Ok(s),
            None if self.ci => Err(usage("--seed is required in CI mode")),
            None => {
                let s = SystemTime::now().duration_since(UNIX_EPOCH)?.as_nanos() as u64;
                eprintln!("seed: {s}");
                Ok(s)
            }
        }
    }

    fn emit(&self, rec: Recorder, seed: Option<u64>, outputs: impl Serialize, stdout_busy: bool) -> Result<()> {
        let record = rec.finish(seed, outputs)?;
        emit(&record, self.record_path.as_deref(), stdout_busy)
    }
}

fn parse_alpha(s: &str) -> Result<C64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(usage(format!("alpha must be `re,im`, got `{s}`")));
    }
    Ok(C64::new(parts[0].parse()?, parts[1].parse()?))
}

fn sic_fiducial(d: usize, path: Option<&Path>) -> Result<povmsim_core::FiducialVector> {
    match path {
        Some(p) => Ok(load_fiducial(p).with_context(|| format!("loading fiducial {}", p.display()))?),
        None => builtin_sic_fiducial(d).ok_or_else(|| usage(format!("no bundled SIC fiducial for d = {d}; pass --fiducial"))),
    }
}

#[derive(Serialize)]
struct GenOutputs {
    path: PathBuf,
    dim: usize,
    outcomes: usize,
    label: Option<String>,
    min_weight: f64,
    max_weight: f64,
    completeness_deviation: f64,
    min_effect_eigenvalue: f64,
}

pub fn gen_povm(ctx: &Context, a: &GenPovmArgs) -> Result<u8> {
    let rec = Recorder::start("gen-povm", a)?;
    let d = a.dim;
    let n = a.outcomes.unwrap_or(d * d);
    let mut seed = None;
    let povm = match a.kind {
        Kind::Haar => {
            let s = ctx.seed(a.seed)?;
            seed = Some(s);
            haar_random_povm(d, n, Seed(s))?
        }
        Kind::Ic | Kind::Sic if n != d * d => {
            return Err(usage(format!("covariant POVMs have dim^2 = {} outcomes", d * d)));
        }
        Kind::Ic => {
            let alpha = a.alpha.as_deref().map(parse_alpha).transpose()?.unwrap_or(DEFAULT_IC_ALPHA);
            ic_covariant_povm(d, alpha)?
        }
        Kind::Sic => sic_povm(d, &sic_fiducial(d, a.fiducial.as_deref())?)?,
        Kind::Fourier => fourier_povm(d, n)?,
    };
    let report = povm.validate(1e-8)?;
    if !report.passed {
        return Err(Error::Validation(report.failures.join("; ")).into());
    }
    save_povm(&a.out, &povm)?;
    let w = povm.weights();
    let out = GenOutputs {
        path: a.out.clone(),
        dim: povm.dim(),
        outcomes: povm.outcomes(),
        label: povm.label.clone(),
        min_weight: w.iter().cloned().fold(f64::INFINITY, f64::min),
        max_weight: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        completeness_deviation: report.completeness_deviation,
        min_effect_eigenvalue: report.min_effect_eigenvalue,
    };
    ctx.emit(rec, seed, out, false)?;
    Ok(0)
}

enum Strategy {
    Standard,
    Random(usize),
    Greedy,
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "standard" => Ok(Strategy::Standard),
        "greedy" => Ok(Strategy::Greedy),
        _ => match s.strip_prefix("random:").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 1 => Ok(Strategy::Random(k)),
            _ => Err(usage(format!("strategy must be standard, random:K (K >= 1) or greedy, got `{s}`"))),
        },
    }
}

fn check_m(m: usize) -> Result<()> {
    if m < 2 {
        return Err(usage(format!("m must be at least 2, got {m}")));
    }
    Ok(())
}

/// Upper bound for rank-one POVMs, `None` otherwise.
fn upper_bound(povm: &Povm, m: usize) -> Result<Option<f64>> {
    if !povm.is_rank_one() {
        return Ok(None);
    }
    let w = WeightVector::from_povm(povm)?;
    Ok(Some(q_upper_bound_rank_one(&w, m.min(povm.outcomes()))?))
}

#[derive(Serialize)]
struct QsuccOutputs {
    q_succ: f64,
    m: usize,
    strategy: String,
    partitions_evaluated: usize,
    partition: Vec<Vec<usize>>,
    upper_bound: Option<f64>,
    visibility_lower: f64,
    robustness_upper: f64,
}

pub fn qsucc(ctx: &Context, a: &QsuccArgs) -> Result<u8> {
    let rec = Recorder::start("qsucc", a)?;
    check_m(a.m)?;
    let strategy = parse_strategy(&a.strategy)?;
    let povm = load_povm(&a.povm)?;
    let n = povm.outcomes();
    let mut seed = None;
    let (partition, q, evaluated) = match strategy {
        Strategy::Standard => {
            let p = standard_partition(n, a.m)?;
            let q = success_probability(&povm, &p)?;
            (p, q, 1)
        }
        Strategy::Random(k) => {
            let s = ctx.seed(a.seed)?;
            seed = Some(s);
            let r = best_of_random(&povm, a.m, k, Seed(s))?;
            (r.partition, r.q_succ, k)
        }
        Strategy::Greedy => {
            let s = ctx.seed(a.seed)?;
            seed = Some(s);
            let r = greedy_improve(&povm, &standard_partition(n, a.m)?, a.max_passes, Seed(s))?;
            let steps = r.trace.len();
            (r.partition, r.q_succ, steps)
        }
    };
    if let Some(p) = &a.partition_out {
        save_partition(p, &partition)?;
    }
    if let Some(p) = &a.scheme_out {
        write_json(p, &PovmFile::from_scheme(&build_scheme(&povm, &partition)?)?)?;
    }
    let vr = visibility_robustness(q)?;
    let out = QsuccOutputs {
        q_succ: q,
        m: a.m,
        strategy: a.strategy.clone(),
        partitions_evaluated: evaluated,
        partition: partition.to_one_based(),
        upper_bound: upper_bound(&povm, a.m)?,
        visibility_lower: vr.t_lower,
        robustness_upper: vr.r_upper,
    };
    ctx.emit(rec, seed, out, false)?;
    Ok(0)
}

pub const SCAN_HEADER: [&str; 5] = ["d", "n", "q_succ_best", "q_succ_mean", "seconds"];

fn scan_target(a: &ScanArgs, d: usize, instance: usize, seed: Seed) -> Result<Option<Povm>> {
    Ok(Some(match a.kind {
        Kind::Haar => haar_random_povm(d, d * d, seed.derive((d * 1_000_003 + instance) as u64))?,
        Kind::Ic => ic_covariant_povm(d, DEFAULT_IC_ALPHA)?,
        Kind::Fourier => fourier_povm(d, d * d)?,
        Kind::Sic => {
            let file = a.fiducial_dir.as_ref().map(|dir| dir.join(format!("sic_d{d}.txt")));
            let fid = match file {
                Some(f) if f.exists() => load_fiducial(&f)?,
                _ => match builtin_sic_fiducial(d) {
                    Some(f) => f,
                    None => {
                        eprintln!("warning: no SIC fiducial for d = {d}; row skipped");
                        return Ok(None);
                    }
                },
            };
            sic_povm(d, &fid)?
        }
    }))
}

#[derive(Serialize)]
struct ScanRow {
    d: usize,
    n: usize,
    q_succ_best: f64,
    q_succ_mean: f64,
    seconds: f64,
}

pub fn scan(ctx: &Context, a: &ScanArgs) -> Result<u8> {
    let rec = Recorder::start("scan", a)?;
    let dims = a
        .dims
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| usage(format!("bad dimension `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    if let Some(&d) = dims.iter().find(|&&d| d < 2) {
        return Err(usage(format!("dimensions must be at least 2, got {d}")));
    }
    if a.partitions == 0 || a.instances == 0 {
        return Err(usage("--partitions and --instances must be positive"));
    }
    let seed = if dims.is_empty() { a.seed } else { Some(ctx.seed(a.seed)?) };
    let base = Seed(seed.unwrap_or(0));
    let instances = if a.kind == Kind::Haar { a.instances } else { 1 };
    let mut rows = Vec::new();
    for &d in &dims {
        let start = Instant::now();
        let mut bests = Vec::new();
        for i in 0..instances {
            let Some(target) = scan_target(a, d, i, base)? else { break };
            let r = best_of_random(&target, d, a.partitions, base.derive(d as u64).derive(i as u64))?;
            bests.push(r.q_succ);
        }
        if bests.is_empty() {
            continue;
        }
        rows.push(ScanRow {
            d,
            n: d * d,
            q_succ_best: bests.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            q_succ_mean: bests.iter().sum::<f64>() / bests.len() as f64,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(SCAN_HEADER)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    ctx.emit(rec, seed, &rows, a.out.is_none())?;
    Ok(0)
}

#[derive(Serialize)]
struct SampleOutputs {
    mode: Mode,
    shots: u64,
    empirical_tvd: Option<f64>,
    tvd_threshold: f64,
    q_succ: Option<f64>,
    empirical_success_rate: f64,
    success_rate_tolerance: Option<f64>,
    statistical_check_passed: bool,
}

pub const SAMPLE_CSV_HEADER: [&str; 4] = ["outcome", "count", "frequency", "probability"];

pub fn sample(ctx: &Context, a: &SampleArgs) -> Result<u8> {
    let rec = Recorder::start("sample", a)?;
    let povm = load_povm(&a.povm)?;
    let d = povm.dim();
    let n = povm.outcomes();
    let state = match &a.state {
        Some(p) => load_state(p)?,
        None => QuantumState::maximally_mixed(d),
    };
    if a.shots == 0 {
        return Err(usage("--shots must be positive"));
    }
    let seed = ctx.seed(a.seed)?;
    let exact = born(&povm, &state)?;
    let (report, probs, q): (SampleReport, Vec<f64>, Option<f64>) = match a.mode {
        Mode::Direct => (sample_direct(&povm, &state, a.shots, Seed(seed))?, exact.to_vec(), None),
        Mode::Scheme => {
            let m = a.m.unwrap_or(d);
            check_m(m)?;
            let partition = match &a.partition {
                Some(p) => load_partition(p, n, m)?,
                None => standard_partition(n, m)?,
            };
            let scheme = build_scheme(&povm, &partition)?;
            let q = scheme.q_succ;
            let mut raw: Vec<f64> = exact.iter().map(|p| q * p).collect();
            raw.push(1.0 - q);
            (sample_scheme(&scheme, &state, a.shots, Seed(seed))?, raw, Some(q))
        }
    };
    if report.mode == povmsim_core::sampling::SampleMode::Scheme && report.success_count == 0 {
        return Err(Error::UndefinedStatistics("no shot survived postselection".into()).into());
    }
    let kept = report.success_count.max(1) as f64;
    let tvd_threshold = a.max_tvd.unwrap_or(3.0 * (n as f64 / kept).sqrt());
    let rate_tol = q.map(|q| 4.0 * (q * (1.0 - q) / a.shots as f64).sqrt());
    let tvd_ok = report.empirical_tvd_vs_target.is_some_and(|t| t <= tvd_threshold);
    let rate_ok = match (q, rate_tol) {
        (Some(q), Some(tol)) => (report.empirical_success_rate - q).abs() <= tol,
        _ => true,
    };
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }
    if let Some(p) = &a.csv {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(SAMPLE_CSV_HEADER)?;
        for (i, (&c, p)) in report.counts.iter().zip(&probs).enumerate() {
            let f = c as f64 / a.shots as f64;
            w.write_record([(i + 1).to_string(), c.to_string(), f.to_string(), p.to_string()])?;
        }
        w.flush()?;
    }
    let passed = tvd_ok && rate_ok;
    let out = SampleOutputs {
        mode: a.mode,
        shots: a.shots,
        empirical_tvd: report.empirical_tvd_vs_target,
        tvd_threshold,
        q_succ: q,
        empirical_success_rate: report.empirical_success_rate,
        success_rate_tolerance: rate_tol,
        statistical_check_passed: passed,
    };
    ctx.emit(rec, Some(seed), out, false)?;
    Ok(if passed { 0 } else { EXIT_STATISTICAL })
}

#[derive(Serialize)]
struct DilateOutputs {
    path: PathBuf,
    big_dim: usize,
    natural_dim: usize,
    isometry_error: f64,
    reconstruction_error: f64,
    unitary_error: Option<f64>,
    born_deviation: f64,
    warnings: Vec<String>,
}

pub fn dilate(ctx: &Context, a: &DilateArgs) -> Result<u8> {
    let rec = Recorder::start("dilate", a)?;
    let target = load_povm(&a.povm)?;
    let complete = !a.no_complete;
    let (source, dil) = match &a.block {
        Some(block) => {
            if block.contains(&0) {
                return Err(usage("block labels start at 1"));
            }
            let zero: Vec<usize> = block.iter().map(|i| i - 1).collect();
            let sub = build_sub_povm(&target, &zero)?;
            let dil = match a.pad_to {
                Some(p) => naimark_dilate(&sub.as_povm()?, DilationOptions { pad_to: Some(p), complete })?,
                None => dilate_sub_povm(&sub, complete)?,
            };
            (sub.as_povm()?, dil)
        }
        None => {
            let dil = naimark_dilate(&target, DilationOptions { pad_to: a.pad_to, complete })?;
            (target, dil)
        }
    };
    write_json(&a.out, &DilationFile::from_dilation(&dil))?;
    let mut rng = Seed(0).rng();
    let mut dev = 0.0_f64;
    for _ in 0..50 {
        let rho = QuantumState::random_mixed(source.dim(), &mut rng);
        let p = born(&source, &rho)?;
        let g = dil.grouped_born(&rho)?;
        dev = dev.max(tvd(&p, &g)? * 2.0);
    }
    let out = DilateOutputs {
        path: a.out.clone(),
        big_dim: dil.big_dim,
        natural_dim: dil.natural_dim,
        isometry_error: dil.isometry_error(),
        reconstruction_error: dil.reconstruction_error(),
        unitary_error: dil.completion_errors().map(|e| e.0),
        born_deviation: dev,
        warnings: dil.warnings.clone(),
    };
    ctx.emit(rec, None, out, false)?;
    Ok(0)
}

#[derive(Serialize)]
struct EtaReport {
    eta: f64,
    m: usize,
    d_tot: usize,
    q_succ: f64,
    postselection_prob: f64,
    post_tvd_actual: f64,
    post_tvd_bound: f64,
    /// True when every block has `dim` outcomes, `n = dim^2` and `d_tot = 2 dim`.
    bound_applies: bool,
    naimark_tvd_lower: Option<f64>,
}

fn write_row_csv(path: &Path, row: &impl Serialize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

pub fn noise(ctx: &Context, a: &NoiseArgs) -> Result<u8> {
    let rec = Recorder::start("noise", a)?;
    let target = load_povm(&a.povm)?;
    let d = target.dim();
    let n = target.outcomes();
    let m = a.m.unwrap_or(d + 1);
    check_m(m)?;
    let state = match &a.state {
        Some(p) => load_state(p)?,
        None => QuantumState::maximally_mixed(d),
    };
    let scheme = build_scheme(&target, &standard_partition(n, m)?)?;
    match (a.eta, a.r2) {
        (Some(eta), None) => {
            let d_tot = a.d_tot.unwrap_or(2 * d);
            let noisy = noisy_scheme_distribution(&scheme, &state, eta, d_tot)?;
            let lower = match worst_case_tvd_lower_bound(&target, eta) {
                Ok(v) => Some(v),
                Err(Error::MissingGenerator) => None,
                Err(e) => return Err(e.into()),
            };
            let report = EtaReport {
                eta,
                m,
                d_tot,
                q_succ: scheme.q_succ,
                postselection_prob: noisy.postselection_prob,
                post_tvd_actual: tvd(&born(&target, &state)?, &noisy.law)?,
                post_tvd_bound: noisy_post_bound(eta, scheme.q_succ),
                bound_applies: n == d * d && d_tot == 2 * d && scheme.partition.blocks().iter().all(|b| b.len() == d),
                naimark_tvd_lower: lower,
            };
            if let Some(p) = &a.out {
                write_json(p, &report)?;
            }
            if let Some(p) = &a.csv {
                write_row_csv(p, &report)?;
            }
            ctx.emit(rec, None, report, false)?;
        }
        (None, Some(r2)) => {
            if !d.is_power_of_two() || d < 2 {
                bail!(UsageError(format!("--r2 needs a qubit system, got dim {d}")));
            }
            let report = compare_implementations(d.trailing_zeros(), r2, &scheme, &state)?;
            if let Some(p) = &a.out {
                write_json(p, &report)?;
            }
            if let Some(p) = &a.csv {
                write_row_csv(p, &report)?;
            }
            ctx.emit(rec, None, report, false)?;
        }
        _ => return Err(usage("pass exactly one of --eta or --r2")),
    }
    Ok(0)
}

pub const HISTOGRAM_HEADER: [&str; 4] = ["bin_lo", "bin_hi", "count", "threshold"];

#[derive(Serialize)]
struct ConcentrationOutputs {
    trials: usize,
    mean: f64,
    min: f64,
    max: f64,
    threshold: Option<f64>,
    fraction_above_threshold: Option<f64>,
    statistical_check_passed: bool,
}

pub fn concentration(ctx: &Context, a: &ConcentrationArgs) -> Result<u8> {
    let rec = Recorder::start("concentration", a)?;
    let d = a.dim;
    let n = a.outcomes.unwrap_or(d * d);
    let m = a.m.unwrap_or(d);
    check_m(m)?;
    if a.trials == 0 || a.bins == 0 {
        return Err(usage("--trials and --bins must be positive"));
    }
    let seed = ctx.seed(a.seed)?;
    let part = standard_partition(n, m)?;
    let qs = (0..a.trials as u64)
        .map(|t| Ok(success_probability(&haar_random_povm(d, n, Seed(seed).derive(t))?, &part)?))
        .collect::<Result<Vec<f64>>>()?;
    let threshold = theorem2_floor(d, m).ok();
    let lo = qs.iter().cloned().fold(f64::INFINITY, f64::min).min(threshold.unwrap_or(f64::INFINITY));
    let hi = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / a.bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; a.bins];
    for &q in &qs {
        counts[(((q - lo) / width) as usize).min(a.bins - 1)] += 1;
    }
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(HISTOGRAM_HEADER)?;
    for (b, c) in counts.iter().enumerate() {
        let t = threshold.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([(lo + b as f64 * width).to_string(), (lo + (b + 1) as f64 * width).to_string(), c.to_string(), t])?;
    }
    w.flush()?;
    let fraction = threshold.map(|t| qs.iter().filter(|&&q| q >= t).count() as f64 / qs.len() as f64);
    let passed = fraction.is_none_or(|f| f >= 0.95);
    let out = ConcentrationOutputs {
        trials: a.trials,
        mean: qs.iter().sum::<f64>() / qs.len() as f64,
        min: qs.iter().cloned().fold(f64::INFINITY, f64::min),
        max: hi,
        threshold,
        fraction_above_threshold: fraction,
        statistical_check_passed: passed,
    };
    ctx.emit(rec, Some(seed), out, a.out.is_none())?;
    Ok(if passed { 0 } else { EXIT_STATISTICAL })
}
