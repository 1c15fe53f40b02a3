//! Config-file and flag merging.
//!
//! A config file holds plain `key=value` lines (`#` comments allowed).
//! Command-line flags override file values; unknown keys are rejected.

use anyhow::{anyhow, bail, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Scalar settings that may come from a config file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overlay {
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub q: Option<f64>,
    pub beta: Option<f64>,
    pub f_plus: Option<f64>,
    pub price: Option<f64>,
    pub capital: Option<f64>,
    pub seed: Option<u64>,
    pub epochs: Option<u64>,
    pub jobs: Option<usize>,
}

impl Overlay {
    /// Apply `self` on top of `base`: present fields win.
    pub fn over(&self, base: &Overlay) -> Overlay {
        Overlay {
            n: self.n.or(base.n),
            d: self.d.or(base.d),
            alpha: self.alpha.or(base.alpha),
            gamma: self.gamma.or(base.gamma),
            q: self.q.or(base.q),
            beta: self.beta.or(base.beta),
            f_plus: self.f_plus.or(base.f_plus),
            price: self.price.or(base.price),
            capital: self.capital.or(base.capital),
            seed: self.seed.or(base.seed),
            epochs: self.epochs.or(base.epochs),
            jobs: self.jobs.or(base.jobs),
        }
    }

    /// Deterministic `key=value` rendering of every present field, for the
    /// metadata block of output files.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = write!(s, " {k}={v}");
            }
        };
        put("n", self.n.map(|v| v.to_string()));
        put("d", self.d.map(|v| v.to_string()));
        put("alpha", self.alpha.map(fmt_plain));
        put("gamma", self.gamma.map(fmt_plain));
        put("q", self.q.map(fmt_plain));
        put("beta", self.beta.map(fmt_plain));
        put("f_plus", self.f_plus.map(fmt_plain));
        put("price", self.price.map(fmt_plain));
        put("capital", self.capital.map(fmt_plain));
        put("seed", self.seed.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("jobs", self.jobs.map(|v| v.to_string()));
        s
    }
}

fn fmt_plain(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Parse `beta`-style floats, accepting `inf`/`infinity` for the frozen
/// phase.
pub fn parse_beta(s: &str) -> Result<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "frozen" => Ok(f64::INFINITY),
        other => other.parse::<f64>().map_err(|e| anyhow!("bad beta {s:?}: {e}")),
    }
}

/// Read a `key=value` config file; unknown keys are a usage error.
pub fn read_config_file(path: &Path) -> Result<Overlay> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow!("cannot read config {}: {e}", path.display()))?;
    let mut overlay = Overlay::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value, got {raw:?}", path.display(), lineno + 1);
        };
        let key = key.trim();
        let value = value.trim();
        let parse_f64 =
            |v: &str| v.parse::<f64>().map_err(|e| anyhow!("{key}: bad float {v:?}: {e}"));
        match key {
            "n" => overlay.n = Some(value.parse()?),
            "d" => overlay.d = Some(value.parse()?),
            "alpha" => overlay.alpha = Some(parse_f64(value)?),
            "gamma" => overlay.gamma = Some(parse_f64(value)?),
            "q" => overlay.q = Some(parse_f64(value)?),
            "beta" => overlay.beta = Some(parse_beta(value)?),
            "f_plus" => overlay.f_plus = Some(parse_f64(value)?),
            "price" => overlay.price = Some(parse_f64(value)?),
            "capital" => overlay.capital = Some(parse_f64(value)?),
            "seed" => overlay.seed = Some(value.parse()?),
            "epochs" => overlay.epochs = Some(value.parse()?),
            "jobs" => overlay.jobs = Some(value.parse()?),
            other => bail!("{}:{}: unknown config key {other:?}", path.display(), lineno + 1),
        }
    }
    Ok(overlay)
}

/// A sweep range `start:stop:step`, or a single scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn scalar(x: f64) -> Self {
        RangeSpec { start: x, stop: x, step: 1.0 }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        imbal_core::wealth::grid(self.start, self.stop, self.step)
            .map_err(|e| anyhow!("bad range: {e}"))
    }
}

impl std::str::FromStr for RangeSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [x] => Ok(RangeSpec::scalar(x.parse()?)),
            [a, b, c] => {
                let spec =
                    RangeSpec { start: a.parse()?, stop: b.parse()?, step: c.parse()? };
                if !(spec.step > 0.0) || spec.stop < spec.start {
                    bail!("bad range {s:?}: need start <= stop and step > 0");
                }
                Ok(spec)
            }
            _ => bail!("bad range {s:?}: expected scalar or start:stop:step"),
        }
    }
}
