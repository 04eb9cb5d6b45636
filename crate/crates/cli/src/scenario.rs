//! Scenario files: flat `key = value` text with dotted keys, plus the
//! compiled-in parameter sets.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mdi_keyrate::optimizer::{Mode, SearchConfig, SearchSpace};
use mdi_keyrate::{ChannelParams, FiniteKeySettings, SampleSize, SecurityBudget};
use sha2::{Digest, Sha256};

/// Malformed scenario text or command-line value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    ParseError(msg.into()).into()
}

/// Distances `start, start + step, ...` up to and including `stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 200.0,
            step: 5.0,
        }
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.stop < self.start {
            return Vec::new();
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl std::str::FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(bad(format!("grid {s:?} is not start:stop:step")));
        };
        let g = Grid {
            start: parse_f64("grid start", a)?,
            stop: parse_f64("grid stop", b)?,
            step: parse_f64("grid step", c)?,
        };
        if !(g.step > 0.0) || g.start < 0.0 {
            return Err(bad(format!("grid {s:?} needs a positive step and start >= 0")));
        }
        Ok(g)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// channel template; the fibre lengths are set per grid point
    pub channel: ChannelParams,
    /// fraction of the total distance on Alice's side
    pub alice_fraction: f64,
    pub settings: FiniteKeySettings,
    pub space: SearchSpace,
    pub config: SearchConfig,
    pub grid: Grid,
}

const MAO_CHANNEL: ChannelParams = ChannelParams {
    misalignment: 0.015,
    dark_count: 6.02e-6,
    attenuation_db_per_km: 0.2,
    detector_efficiency: 0.145,
    length_a_km: 0.0,
    length_b_km: 0.0,
};

pub const BUILTINS: [&str; 3] = ["mao2018", "zhou2016", "kappa"];

impl Scenario {
    fn base(name: &str, channel: ChannelParams, settings: FiniteKeySettings) -> Self {
        Self {
            name: name.to_string(),
            channel,
            alice_fraction: 0.5,
            settings,
            space: SearchSpace::new(3, 2, Mode::G).expect("default space is valid"),
            config: SearchConfig::default(),
            grid: Grid::default(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "mao2018" => Some(Self::base(
                name,
                MAO_CHANNEL,
                FiniteKeySettings {
                    sample: SampleSize::PulsePairs(1e10),
                    budget: SecurityBudget::RatioFixed(1e-10),
                    eps_cor: 1e-10,
                    f_ec: 1.16,
                },
            )),
            "zhou2016" => Some(Self::base(
                name,
                ChannelParams {
                    dark_count: 1e-7,
                    detector_efficiency: 0.40,
                    ..MAO_CHANNEL
                },
                FiniteKeySettings {
                    sample: SampleSize::PulsePairs(1e9),
                    budget: SecurityBudget::RatioFixed(1e-7),
                    eps_cor: 1e-7,
                    f_ec: 1.16,
                },
            )),
            "kappa" => Some(Self::base(
                name,
                MAO_CHANNEL,
                FiniteKeySettings {
                    sample: SampleSize::RawKey(1e10),
                    budget: SecurityBudget::Kappa(1e-15),
                    eps_cor: 1e-10,
                    f_ec: 1.16,
                },
            )),
            _ => None,
        }
    }

    /// A builtin name or a path to a scenario file.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(s) = Self::builtin(source) {
            return Ok(s);
        }
        let path = Path::new(source);
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        Self::parse(&text)
    }

    /// Parses scenario text. An `extends = <builtin>` line (default
    /// `mao2018`) picks the starting point; every other key overrides it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(bad(format!("line {}: expected key = value", n + 1)));
            };
            pairs.push((n + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let base = pairs
            .iter()
            .find(|(_, k, _)| k == "extends")
            .map(|(_, _, v)| v.as_str())
            .unwrap_or("mao2018");
        let mut s = Self::builtin(base).ok_or_else(|| bad(format!("unknown builtin {base:?}")))?;
        s.name = "custom".into();

        let mut sample: Option<SampleSize> = None;
        let mut budget: Option<SecurityBudget> = None;
        let (mut k_x, mut k_z, mut mode) = (s.space.k_x, s.space.k_z, s.space.mode);
        for (line, key, value) in &pairs {
            let f = || parse_f64(key, value).with_context(|| format!("line {line}"));
            match key.as_str() {
                "extends" => {}
                "name" => s.name = value.clone(),
                "channel.e_d" => s.channel.misalignment = f()?,
                "channel.p_d" => s.channel.dark_count = f()?,
                "channel.eta_d" => s.channel.detector_efficiency = f()?,
                "channel.eta_att" => s.channel.attenuation_db_per_km = f()?,
                "channel.alice_fraction" => s.alice_fraction = f()?,
                "finite.n_t" => set_once(&mut sample, SampleSize::PulsePairs(f()?), key)?,
                "finite.l_raw" => set_once(&mut sample, SampleSize::RawKey(f()?), key)?,
                "finite.eps_ratio" => {
                    set_once(&mut budget, SecurityBudget::RatioFixed(f()?), key)?
                }
                "finite.eps_sec" => set_once(&mut budget, SecurityBudget::Fixed(f()?), key)?,
                "finite.kappa" => set_once(&mut budget, SecurityBudget::Kappa(f()?), key)?,
                "finite.eps_cor" => s.settings.eps_cor = f()?,
                "finite.f_ec" => s.settings.f_ec = f()?,
                "search.kx" => k_x = parse_usize(key, value)?,
                "search.kz" => k_z = parse_usize(key, value)?,
                "search.mode" => mode = value.parse().map_err(|e| bad(format!("{e}")))?,
                "search.floor" => s.space.floor = f()?,
                "search.min_separation" => s.space.min_separation = f()?,
                "search.samples" => s.config.samples = parse_usize(key, value)?,
                "search.seed" => s.config.seed = parse_u64(key, value)?,
                "search.descent_starts" => s.config.descent_starts = parse_usize(key, value)?,
                "search.descent_iterations" => {
                    s.config.descent_iterations = parse_usize(key, value)?
                }
                "search.initial_step" => s.config.initial_step = f()?,
                "grid" => s.grid = value.parse()?,
                _ => return Err(bad(format!("line {line}: unknown key {key:?}"))),
            }
        }
        if let Some(v) = sample {
            s.settings.sample = v;
        }
        if let Some(v) = budget {
            s.settings.budget = v;
        }
        s.space.k_x = k_x;
        s.space.k_z = k_z;
        s.space.mode = mode;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate().map_err(|e| bad(e.to_string()))?;
        self.space.validate().map_err(|e| bad(e.to_string()))?;
        self.config.validate().map_err(|e| bad(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.alice_fraction) {
            return Err(bad("channel.alice_fraction must lie in [0, 1]"));
        }
        let positive = match self.settings.sample {
            SampleSize::PulsePairs(n) | SampleSize::RawKey(n) => n > 0.0,
        };
        let budget_ok = match self.settings.budget {
            SecurityBudget::RatioFixed(v) | SecurityBudget::Fixed(v) | SecurityBudget::Kappa(v) => {
                v > 0.0 && v < 1.0
            }
        };
        if !positive || !budget_ok || !(self.settings.eps_cor > 0.0 && self.settings.eps_cor < 1.0)
        {
            return Err(bad("finite-key settings out of range"));
        }
        if !(self.settings.f_ec >= 1.0) {
            return Err(bad("finite.f_ec must be at least 1"));
        }
        Ok(())
    }

    /// Channel with the fibre split for a total distance.
    pub fn channel_at(&self, distance_km: f64) -> ChannelParams {
        ChannelParams {
            length_a_km: distance_km * self.alice_fraction,
            length_b_km: distance_km * (1.0 - self.alice_fraction),
            ..self.channel
        }
    }

    /// Canonical text form; parsing it gives back the same scenario.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("name", self.name.clone());
        put("channel.e_d", self.channel.misalignment.to_string());
        put("channel.p_d", self.channel.dark_count.to_string());
        put("channel.eta_d", self.channel.detector_efficiency.to_string());
        put("channel.eta_att", self.channel.attenuation_db_per_km.to_string());
        put("channel.alice_fraction", self.alice_fraction.to_string());
        match self.settings.sample {
            SampleSize::PulsePairs(n) => put("finite.n_t", n.to_string()),
            SampleSize::RawKey(l) => put("finite.l_raw", l.to_string()),
        }
        match self.settings.budget {
            SecurityBudget::RatioFixed(r) => put("finite.eps_ratio", r.to_string()),
            SecurityBudget::Fixed(e) => put("finite.eps_sec", e.to_string()),
            SecurityBudget::Kappa(k) => put("finite.kappa", k.to_string()),
        }
        put("finite.eps_cor", self.settings.eps_cor.to_string());
        put("finite.f_ec", self.settings.f_ec.to_string());
        put("search.kx", self.space.k_x.to_string());
        put("search.kz", self.space.k_z.to_string());
        put("search.mode", self.space.mode.to_string());
        put("search.floor", self.space.floor.to_string());
        put("search.min_separation", self.space.min_separation.to_string());
        put("search.samples", self.config.samples.to_string());
        put("search.seed", self.config.seed.to_string());
        put("search.descent_starts", self.config.descent_starts.to_string());
        put("search.descent_iterations", self.config.descent_iterations.to_string());
        put("search.initial_step", self.config.initial_step.to_string());
        put("grid", self.grid.to_string());
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn set_once<T>(slot: &mut Option<T>, v: T, key: &str) -> Result<()> {
    if slot.is_some() {
        return Err(bad(format!(
            "{key}: only one sample size and one security budget may be given"
        )));
    }
    *slot = Some(v);
    Ok(())
}

pub fn parse_f64(key: &str, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(bad(format!("{key}: {v:?} is not a finite number"))),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| bad(format!("{key}: {v:?} is not a non-negative integer")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| bad(format!("{key}: {v:?} is not a non-negative integer")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_round_trip() {
        for name in BUILTINS {
            let s = Scenario::builtin(name).unwrap();
            let back = Scenario::parse(&format!(
                "extends = {name}\n{}",
                s.to_text()
            ))
            .unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn single_finite_key_mode() {
        let e = Scenario::parse("finite.n_t = 1e9\nfinite.l_raw = 1e9\n").unwrap_err();
        assert!(e.downcast_ref::<ParseError>().is_some());
    }

    #[test]
    fn grid_points() {
        let g: Grid = "0:10:5".parse().unwrap();
        assert_eq!(g.points(), vec![0.0, 5.0, 10.0]);
        assert_eq!(Grid::default().points().len(), 41);
        assert!("0:10".parse::<Grid>().is_err());
        assert!("0:10:0".parse::<Grid>().is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(Scenario::parse("channel.bogus = 1\n").is_err());
        assert!(Scenario::parse("channel.e_d = x\n").is_err());
    }
}
