use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use demandwave::explore::{
    default_lags, default_scales, fit_ou, flatten_time, gini_lorenz, morlet_power, pareto_fit, periodogram,
    rank_frequency, tracks_from_contracts, usage_counts, variogram, write_lorenz_csv, Periodogram, write_periodogram_csv,
    write_spectrum_csv, write_variogram_csv, DistanceUnit,
};
use demandwave::forecast::{
    default_surface_ranges, format_float, write_report_csv, write_surface_csv, EvalOptions, LevelSweep,
};
use demandwave::synth::RiderClass;
use demandwave::wavelet::default_depth;
use demandwave::{
    bin_contracts, denoise, error_surface, evaluate_levels, parse_contracts, simulate_population, write_contracts,
    ContractRecord, Cube, DemandTensor, FilterBank, PopulationConfig, Sigma, ThresholdRule, ThresholdSource,
    ThresholdSpec,
};

use crate::config::RunConfig;
use crate::failure::Failure;

type Outcome = Result<Vec<String>, Failure>;

struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Self, Failure> {
        let dir = PathBuf::from(cfg.raw("out"));
        fs::create_dir_all(&dir).map_err(|e| Failure::open(&dir, e))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.dir.join(name);
        self.written.push(path.display().to_string());
        Ok(BufWriter::new(File::create(&path).map_err(|e| Failure::open(&path, e))?))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Writes the resolved-config sidecar and returns the file list.
    fn finish(mut self, cfg: &RunConfig, notes: &[(&str, String)]) -> Outcome {
        self.text(&format!("{}.resolved.conf", cfg.command), &cfg.render(notes))?;
        Ok(self.written)
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    Ok(BufReader::new(File::open(path).map_err(|e| Failure::open(path, e))?))
}

fn read_tensor(path: &Path) -> Result<DemandTensor, Failure> {
    let cube = Cube::read_binary(open(path)?).map_err(|e| match e {
        demandwave::Error::Io(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Failure::data(format!("{}: truncated tensor file", path.display()))
        }
        other => {
            let f = Failure::from(other);
            Failure { message: format!("{}: {}", path.display(), f.message), ..f }
        }
    })?;
    let n = cube.side();
    Ok(DemandTensor::new(RunConfig::default_grid(n), cube)?)
}

fn read_contracts(path: &Path, strict: bool) -> Result<demandwave::ParseOutcome, Failure> {
    parse_contracts(open(path)?, strict).map_err(|e| {
        let f = Failure::from(e);
        Failure { message: format!("{}: {}", path.display(), f.message), ..f }
    })
}

fn bank(cfg: &RunConfig) -> Result<FilterBank, Failure> {
    Ok(FilterBank::by_name(cfg.raw("bank"))?)
}

fn depth(cfg: &RunConfig, n: usize) -> Result<usize, Failure> {
    Ok(cfg.optional::<usize>("depth")?.unwrap_or_else(|| default_depth(n)))
}

fn records_count(cfg: &RunConfig, tensor: &DemandTensor) -> Result<u64, Failure> {
    Ok(cfg.optional::<u64>("records")?.unwrap_or(tensor.total().round() as u64))
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let pop = PopulationConfig {
        n_habitual: cfg.get("n_habitual")?,
        n_casual: cfg.get("n_casual")?,
        periods: cfg.list("periods")?,
        ou_sigma: cfg.get("ou_sigma")?,
        ou_tau: cfg.get("ou_tau")?,
        casual_rate: cfg.get("casual_rate")?,
        seed: cfg.get("seed")?,
        grid: cfg.grid()?,
        jitter: cfg.get("jitter")?,
        phase_spread: cfg.get("phase_spread")?,
    };
    pop.validate().map_err(|e| Failure::config(e.to_string()))?;
    let (records, truth) = simulate_population(&pop)?;

    let mut out = Output::new(cfg)?;
    let mut w = out.create("contracts.csv")?;
    write_contracts(&mut w, &records)?;
    w.flush()?;
    for (name, t) in [("habitual.wdt", &truth.habitual), ("observed.wdt", &truth.observed)] {
        let mut w = out.create(name)?;
        t.counts.write_binary(&mut w)?;
        w.flush()?;
    }
    let mut riders = String::from("rider_id,class,period,phase,contracts\n");
    for l in &truth.labels {
        let (class, period, phase) = match l.class {
            RiderClass::Habitual { period, phase } => ("habitual", period.to_string(), phase.to_string()),
            RiderClass::Casual => ("casual", "NA".into(), "NA".into()),
        };
        riders.push_str(&format!("{},{class},{period},{phase},{}\n", l.rider_id, l.contracts));
    }
    out.text("riders.csv", &riders)?;
    out.finish(cfg, &[("records", records.len().to_string()), ("riders", truth.labels.len().to_string())])
}

pub fn bin(cfg: &RunConfig) -> Outcome {
    let grid = cfg.grid()?;
    let input = PathBuf::from(cfg.raw("input"));
    let parsed = read_contracts(&input, cfg.get("strict")?)?;
    let binned = bin_contracts(&parsed.records, &grid)?;

    let mut out = Output::new(cfg)?;
    let mut w = out.create("tensor.wdt")?;
    binned.tensor.counts.write_binary(&mut w)?;
    w.flush()?;
    let mut rej = String::from("line,reason\n");
    for r in &parsed.rejections {
        rej.push_str(&format!("{},{}\n", r.line, r.reason));
    }
    out.text("rejections.csv", &rej)?;
    out.finish(
        cfg,
        &[
            ("records", parsed.records.len().to_string()),
            ("rejected", parsed.rejections.len().to_string()),
            ("out_of_bounds", binned.out_of_bounds.to_string()),
            ("binned", (binned.tensor.total() as u64).to_string()),
        ],
    )
}

pub fn denoise_cmd(cfg: &RunConfig) -> Outcome {
    let bank = bank(cfg)?;
    let spec = ThresholdSpec {
        rule: cfg.get::<ThresholdRule>("rule")?,
        source: cfg.get::<ThresholdSource>("threshold")?,
        sigma: cfg.get::<Sigma>("sigma")?,
        levels: cfg.span("level_range")?,
    };
    let tensor = read_tensor(Path::new(cfg.raw("input")))?;
    let depth = depth(cfg, tensor.n())?;
    let records = records_count(cfg, &tensor)?;
    let (den, report) = denoise(&tensor, &bank, depth, &spec)?;
    let report = report.with_records(records);

    let mut out = Output::new(cfg)?;
    let mut w = out.create("denoised.wdt")?;
    den.counts.write_binary(&mut w)?;
    w.flush()?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".into(), format_float);
    let mut text = format!(
        "coefficients_retained = {}\napproximation_retained = {}\ncompression_ratio = {}\nsigma_used = {}\nsigma_degenerate = {}\n",
        report.coefficients_retained,
        report.approximation_retained,
        opt(report.compression_ratio),
        format_float(report.sigma_used),
        report.sigma_degenerate,
    );
    for (i, t) in report.threshold_used.iter().enumerate() {
        text.push_str(&format!("threshold_level_{} = {}\n", i + 1, opt(*t)));
    }
    out.text("shrink_report.txt", &text)?;
    out.finish(cfg, &[("resolved_depth", depth.to_string()), ("binned_records", records.to_string())])
}

pub fn evaluate(cfg: &RunConfig) -> Outcome {
    let bank = bank(cfg)?;
    let rule: ThresholdRule = cfg.get("rule")?;
    let levels: Vec<u32> = cfg.list("levels")?;
    let periods: Vec<usize> = cfg.list("periods")?;
    let tensor = read_tensor(Path::new(cfg.raw("input")))?;
    let depth = depth(cfg, tensor.n())?;
    if let Some(p) = periods.iter().find(|p| **p == 0 || **p >= tensor.n()) {
        return Err(Failure::dimension(format!(
            "period {p} does not fit a time axis of {} cells; set `periods`",
            tensor.n()
        )));
    }
    let sweep = LevelSweep {
        bank,
        depth,
        rule,
        levels,
        periods: periods.clone(),
        records: records_count(cfg, &tensor)?,
        options: EvalOptions { clamp: cfg.get("clamp")?, holdout: cfg.get("holdout")? },
    };
    let tables = evaluate_levels(&tensor, &sweep)?;
    let mut out = Output::new(cfg)?;
    for (p, rows) in periods.iter().zip(&tables) {
        let mut w = out.create(&format!("report_period_{p}.csv"))?;
        write_report_csv(&mut w, rows)?;
        w.flush()?;
    }
    out.finish(
        cfg,
        &[
            ("resolved_depth", depth.to_string()),
            ("binned_records", sweep.records.to_string()),
            ("kurt", "non-excess m4/m2^2".into()),
        ],
    )
}

pub fn surface(cfg: &RunConfig) -> Outcome {
    let truth = read_tensor(Path::new(cfg.raw("input")))?;
    let forecast = match cfg.raw("denoised") {
        "none" => truth.clone(),
        path => read_tensor(Path::new(path))?,
    };
    if forecast.n() != truth.n() {
        return Err(Failure::dimension(format!("input has n = {} but denoised has n = {}", truth.n(), forecast.n())));
    }
    let (mut starts, mut leads) = default_surface_ranges(truth.n());
    if let Some((a, b)) = cfg.span("starts")? {
        starts = a..b + 1;
    }
    if let Some((a, b)) = cfg.span("leads")? {
        leads = a..=b;
    }
    let s = error_surface(&truth, &forecast, starts.clone(), leads.clone())?;
    let mut out = Output::new(cfg)?;
    let mut w = out.create("surface.csv")?;
    write_surface_csv(&mut w, &s)?;
    w.flush()?;
    out.finish(
        cfg,
        &[
            ("resolved_starts", format!("{}-{}", starts.start, starts.end - 1)),
            ("resolved_leads", format!("{}-{}", leads.start(), leads.end())),
        ],
    )
}

fn pick_rider(cfg: &RunConfig, records: &[ContractRecord]) -> Result<Option<String>, Failure> {
    if let Some(id) = cfg.optional::<String>("rider")? {
        if !records.iter().any(|r| r.rider_id == id) {
            return Err(Failure::config(format!("rider `{id}` has no contracts")));
        }
        return Ok(Some(id));
    }
    let counts = usage_counts(records);
    Ok(counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(id, _)| id.clone()))
}

pub fn explore(cfg: &RunConfig) -> Outcome {
    let grid = cfg.grid()?;
    let parsed = read_contracts(Path::new(cfg.raw("input")), false)?;
    let records = parsed.records;
    if records.is_empty() {
        return Err(Failure::data("no valid contracts to explore"));
    }
    let mut out = Output::new(cfg)?;
    let mut notes: Vec<(&str, String)> = Vec::new();

    let usage: Vec<f64> = usage_counts(&records).values().map(|&c| c as f64).collect();
    let lorenz = gini_lorenz(&usage)?;
    out.text("gini.csv", &format!("population,riders,gini\nall,{},{:.7}\n", usage.len(), lorenz.gini))?;
    let mut w = out.create("lorenz.csv")?;
    write_lorenz_csv(&mut w, &lorenz)?;
    w.flush()?;
    let mut rf = String::from("rank,count\n");
    for (rank, c) in rank_frequency(&usage) {
        rf.push_str(&format!("{rank},{c}\n"));
    }
    out.text("rank_frequency.csv", &rf)?;
    let pareto = match pareto_fit(&usage, cfg.optional("pareto_scale")?) {
        Ok(f) => format!("{},{},{}\n", format_float(f.scale), format_float(f.shape), f.tail_points),
        Err(e) => {
            notes.push(("pareto", e.to_string()));
            "NA,NA,0\n".into()
        }
    };
    out.text("pareto.csv", &format!("scale,shape,tail_points\n{pareto}"))?;

    if let Some(id) = pick_rider(cfg, &records)? {
        let tracks = tracks_from_contracts(&records);
        let track = tracks.iter().find(|t| t.rider_id == id).expect("rider has a track");
        let lags = default_lags(track, cfg.get("lags")?);
        let bins = if track.points.len() >= 2 && !lags.is_empty() {
            variogram(track, &lags, DistanceUnit::Meters)?
        } else {
            Vec::new()
        };
        let mut w = out.create("variogram.csv")?;
        write_variogram_csv(&mut w, &bins)?;
        w.flush()?;
        let pts: Vec<(f64, f64)> = bins.iter().filter_map(|b| b.semivariance.map(|g| (b.lag_seconds, g))).collect();
        let fit = match fit_ou(&pts) {
            Ok(f) => format!(
                "{id},{},{},{},{}\n",
                format_float(f.sigma2),
                format_float(f.tau),
                format_float(f.rss),
                f.degenerate
            ),
            Err(e) => {
                notes.push(("ou_fit", e.to_string()));
                format!("{id},NA,NA,NA,NA\n")
            }
        };
        out.text("ou_fit.csv", &format!("rider,sigma2_m2,tau_seconds,rss,degenerate\n{fit}"))?;
        notes.push(("variogram_rider", id));
    }

    let tensor = match cfg.raw("tensor") {
        "none" => bin_contracts(&records, &grid)?.tensor,
        path => read_tensor(Path::new(path))?,
    };
    let series = flatten_time(&tensor);
    let pg = periodogram(&series)?;
    let mut w = out.create("periodogram.csv")?;
    write_periodogram_csv(&mut w, &Periodogram { peaks: pg.peaks.iter().copied().take(cfg.get("peaks")?).collect(), ..pg })?;
    w.flush()?;
    let scales = default_scales(series.len());
    if scales.is_empty() {
        notes.push(("spectrum", "series too short for the default scales".into()));
    } else {
        let spec = morlet_power(&series, &scales)?;
        let mut w = out.create("spectrum.csv")?;
        write_spectrum_csv(&mut w, &spec)?;
        w.flush()?;
    }
    notes.push(("variogram_units", "meters".into()));
    out.finish(cfg, &notes)
}
