//! Browser bindings: simulate a population once, then explore it.

use demandwave::explore::{default_scales, flatten_time, gini_lorenz, morlet_power};
use demandwave::forecast::{default_surface_ranges, write_report_csv, EvalOptions, LevelSweep};
use demandwave::wavelet::default_depth;
use demandwave::{
    denoise, error_surface, evaluate_levels, simulate_population, DemandTensor, FilterBank, GridSpec, GroundTruth,
    PopulationConfig, ThresholdRule, ThresholdSource, ThresholdSpec,
};
use wasm_bindgen::prelude::*;

fn text<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn parse_periods(list: &str) -> Result<Vec<usize>, String> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("bad period `{}`", s.trim())))
        .collect()
}

#[wasm_bindgen]
pub struct Demo {
    truth: GroundTruth,
    periods: Vec<usize>,
    records: u64,
}

#[wasm_bindgen]
impl Demo {
    /// Simulates a population on an `n`-cell grid. `periods` is comma separated.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n: usize, habitual: usize, casual: usize, periods: &str) -> Result<Demo, String> {
        let periods = parse_periods(periods)?;
        let cfg = PopulationConfig {
            n_habitual: habitual,
            n_casual: casual,
            periods: periods.clone(),
            phase_spread: 0.1,
            seed: seed.into(),
            grid: GridSpec::beijing().with_n(n),
            ..PopulationConfig::default()
        };
        let (records, truth) = simulate_population(&cfg).map_err(text)?;
        Ok(Demo { truth, periods, records: records.len() as u64 })
    }

    pub fn n(&self) -> usize {
        self.truth.observed.n()
    }

    pub fn contracts(&self) -> f64 {
        self.records as f64
    }

    pub fn gini(&self) -> Result<f64, String> {
        gini_lorenz(&self.truth.usage(false)).map(|l| l.gini).map_err(text)
    }

    /// Level sweep as report CSV with a leading period column.
    pub fn evaluate(&self, bank: &str, rule: &str, level_lo: u32, level_hi: u32) -> Result<String, String> {
        if level_lo > level_hi {
            return Err(format!("empty level range {level_lo}-{level_hi}"));
        }
        let sweep = LevelSweep {
            bank: FilterBank::by_name(bank).map_err(text)?,
            depth: default_depth(self.n()),
            rule: rule.parse().map_err(text)?,
            levels: (level_lo..=level_hi).collect(),
            periods: self.periods.iter().copied().filter(|&p| p < self.n()).collect(),
            records: self.records,
            options: EvalOptions::default(),
        };
        let tables = evaluate_levels(&self.truth.observed, &sweep).map_err(text)?;
        let mut csv = String::new();
        for (i, rows) in tables.iter().enumerate() {
            let mut buf = Vec::new();
            write_report_csv(&mut buf, rows).map_err(text)?;
            let block = String::from_utf8(buf).map_err(text)?;
            for (k, line) in block.lines().enumerate() {
                if k == 0 && i > 0 {
                    continue;
                }
                let first = if k == 0 { "period".to_string() } else { sweep.periods[i].to_string() };
                csv.push_str(&format!("{first},{line}\n"));
            }
        }
        Ok(csv)
    }

    /// Error surface of the level-`level` reconstruction; 0 uses the raw tensor.
    pub fn surface(&self, bank: &str, rule: &str, level: u32) -> Result<Surface, String> {
        let observed = &self.truth.observed;
        let denoised: DemandTensor = if level == 0 {
            observed.clone()
        } else {
            let rule: ThresholdRule = rule.parse().map_err(text)?;
            let bank = FilterBank::by_name(bank).map_err(text)?;
            let spec = ThresholdSpec::new(rule, ThresholdSource::Budget(level));
            denoise(observed, &bank, default_depth(self.n()), &spec).map_err(text)?.0
        };
        let (starts, leads) = default_surface_ranges(self.n());
        let s = error_surface(observed, &denoised, starts, leads).map_err(text)?;
        let values = s.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        let profile = s.lead_profile().into_iter().map(|(_, v)| v).collect();
        Ok(Surface {
            starts: s.periods.len(),
            first_lead: *s.leads.start(),
            leads: s.lead_count(),
            values,
            profile,
        })
    }

    /// Morlet power of the space-summed demand series.
    pub fn spectrum(&self) -> Result<Spectrum, String> {
        let series = flatten_time(&self.truth.observed);
        let s = morlet_power(&series, &default_scales(series.len())).map_err(text)?;
        let times = s.times.len();
        let mut power = Vec::with_capacity(s.scales.len() * times);
        let mut edge = Vec::with_capacity(power.capacity());
        for (j, row) in s.power.iter().enumerate() {
            power.extend_from_slice(row);
            edge.extend((0..times).map(|t| u8::from(s.in_coi(j, t))));
        }
        Ok(Spectrum { periods: s.periods, times, power, edge })
    }
}

#[wasm_bindgen]
pub struct Surface {
    starts: usize,
    first_lead: usize,
    leads: usize,
    values: Vec<f64>,
    profile: Vec<f64>,
}

#[wasm_bindgen]
impl Surface {
    pub fn starts(&self) -> usize {
        self.starts
    }

    pub fn first_lead(&self) -> usize {
        self.first_lead
    }

    pub fn leads(&self) -> usize {
        self.leads
    }

    /// Row-major by start time; NaN where the target falls past the end.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Mean squared entry per lead.
    pub fn profile(&self) -> Vec<f64> {
        self.profile.clone()
    }
}

#[wasm_bindgen]
pub struct Spectrum {
    periods: Vec<f64>,
    times: usize,
    power: Vec<f64>,
    edge: Vec<u8>,
}

#[wasm_bindgen]
impl Spectrum {
    pub fn periods(&self) -> Vec<f64> {
        self.periods.clone()
    }

    pub fn times(&self) -> usize {
        self.times
    }

    /// Row-major by scale.
    pub fn power(&self) -> Vec<f64> {
        self.power.clone()
    }

    /// 1 where edge effects reach the coefficient.
    pub fn edge(&self) -> Vec<u8> {
        self.edge.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Demo {
        Demo::new(3, 32, 200, 300, "4,8").unwrap()
    }

    #[test]
    fn evaluate_lists_every_level_and_baseline() {
        let csv = demo().evaluate("haar", "soft", 2, 4).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("period,level"));
        assert_eq!(lines.len(), 1 + 2 * 4);
        assert!(lines[4].starts_with("4,none,all,NA"));
    }

    #[test]
    fn surface_shape() {
        let d = demo();
        let s = d.surface("sym8", "hard", 0).unwrap();
        assert_eq!((s.starts(), s.first_lead(), s.leads()), (16, 1, 16));
        assert_eq!(s.values().len(), 16 * 16);
        assert_eq!(s.profile().len(), 16);
        assert!(s.values().iter().all(|v| v.is_finite()));
        assert!(d.surface("sym8", "soft", 3).unwrap().values()[0].is_finite());
    }

    #[test]
    fn spectrum_shape() {
        let s = demo().spectrum().unwrap();
        assert_eq!(s.power().len(), s.periods().len() * s.times());
        assert_eq!(s.edge().len(), s.power().len());
        assert_eq!(s.edge()[0], 1);
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(Demo::new(1, 32, 10, 10, "4,x").is_err());
        assert!(Demo::new(1, 30, 10, 10, "4").is_err());
        assert!(demo().evaluate("db99", "soft", 3, 3).is_err());
        assert!(demo().evaluate("haar", "medium", 3, 3).is_err());
        assert!(demo().gini().unwrap() > 0.0);
    }
}
