use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::denoise::PriorMode;
use crate::error::{Error, Result};
use crate::ingest::NegativeSampling;
use crate::objective::{LossTerms, LossWeights, Margins};
use crate::propagation::AggMode;

/// Every knob of a training run. The text form is one `key=value` per line
/// using the field names below.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRunConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Convolution rounds on the user-item graph.
    pub layers: usize,
    /// Convolution rounds on each social slice.
    pub social_layers: usize,
    pub tau: usize,
    /// Edge delete/add probability for the initial perturbed slices.
    pub perturb_prob: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(serialize_with = "display")]
    pub agg: AggMode,
    #[serde(serialize_with = "display")]
    pub prior: PriorMode,
    pub epochs_per_iteration: usize,
    pub max_iterations: usize,
    pub patience: usize,
    #[serde(serialize_with = "display")]
    pub negatives_per_user: NegativeSampling,
    pub split_ratio: f64,
    pub init_std: f64,
    pub seed: u64,
    /// `false` trains on the single social graph, without perturbed copies.
    pub use_tensor: bool,
    /// `false` never rewrites the social graph between iterations.
    pub denoise: bool,
    pub symmetrize_union: bool,
    pub reset_optimizer: bool,
    /// Optional loss terms in the model; text form lists the enabled ones.
    #[serde(serialize_with = "display")]
    pub terms: LossTerms,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(
    v: &T,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn e_pow(k: i32) -> f64 {
    (k as f64).exp()
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            dim: 512,
            batch_size: 1024,
            learning_rate: 1e-3,
            layers: 2,
            social_layers: 2,
            tau: 3,
            perturb_prob: 0.01,
            lambda1: e_pow(-2),
            lambda2: 1e-5,
            alpha: e_pow(-2),
            beta: e_pow(-2),
            c1: 1.0,
            c2: 1.0,
            agg: AggMode::Mean,
            prior: PriorMode::default(),
            epochs_per_iteration: 5,
            max_iterations: 10,
            patience: 5,
            negatives_per_user: NegativeSampling::default(),
            split_ratio: 0.7,
            init_std: 0.1,
            seed: 0,
            use_tensor: true,
            denoise: true,
            symmetrize_union: false,
            reset_optimizer: false,
            terms: LossTerms::default(),
        }
    }
}

impl TrainRunConfig {
    /// Defaults with the coordination weights tuned for a named dataset:
    /// `ciao`, `douban` or `yelp`.
    pub fn preset(name: &str) -> Result<Self> {
        let (alpha, beta) = match name {
            "ciao" => (-3, -2),
            "douban" => (-2, -2),
            "yelp" => (-2, -3),
            other => {
                return Err(Error::config(
                    "trainer::TrainRunConfig::preset",
                    format!("unknown preset `{other}`"),
                ))
            }
        };
        Ok(Self {
            alpha: e_pow(alpha),
            beta: e_pow(beta),
            ..Self::default()
        })
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn margins(&self) -> Margins {
        Margins {
            social: self.c1,
            interest: self.c2,
        }
    }

    /// Slices the model sees: `tau`, or one when the tensor is disabled.
    pub fn effective_tau(&self) -> usize {
        if self.use_tensor {
            self.tau
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "trainer::TrainRunConfig::validate";
        let counts = [
            ("dim", self.dim),
            ("batch_size", self.batch_size),
            ("layers", self.layers),
            ("social_layers", self.social_layers),
            ("tau", self.tau),
            ("max_iterations", self.max_iterations),
            ("patience", self.patience),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(OP, format!("{name} must be at least 1")));
        }
        let rates = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("c1", self.c1),
            ("c2", self.c2),
        ];
        if let Some((name, v)) = rates.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config(
                OP,
                format!("{name} = {v} must be finite and non-negative"),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(OP, "learning_rate must be positive"));
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return Err(Error::config(OP, "init_std must be positive"));
        }
        if !(0.0..=1.0).contains(&self.perturb_prob) {
            return Err(Error::config(OP, "perturb_prob must lie in [0, 1]"));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::config(OP, "split_ratio must lie in (0, 1)"));
        }
        if let NegativeSampling::Sampled(0) = self.negatives_per_user {
            return Err(Error::config(OP, "negatives_per_user must be at least 1"));
        }
        self.prior.validate()
    }

    /// Canonical text form, parseable by [`TrainRunConfig::parse`].
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.pairs() {
            writeln!(s, "{k}={v}").expect("write to string");
        }
        s
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("dim", self.dim.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("layers", self.layers.to_string()),
            ("social_layers", self.social_layers.to_string()),
            ("tau", self.tau.to_string()),
            ("perturb_prob", self.perturb_prob.to_string()),
            ("lambda1", self.lambda1.to_string()),
            ("lambda2", self.lambda2.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("c1", self.c1.to_string()),
            ("c2", self.c2.to_string()),
            ("agg", self.agg.to_string()),
            ("prior", self.prior.to_string()),
            (
                "epochs_per_iteration",
                self.epochs_per_iteration.to_string(),
            ),
            ("max_iterations", self.max_iterations.to_string()),
            ("patience", self.patience.to_string()),
            ("negatives_per_user", self.negatives_per_user.to_string()),
            ("split_ratio", self.split_ratio.to_string()),
            ("init_std", self.init_std.to_string()),
            ("seed", self.seed.to_string()),
            ("use_tensor", self.use_tensor.to_string()),
            ("denoise", self.denoise.to_string()),
            ("symmetrize_union", self.symmetrize_union.to_string()),
            ("reset_optimizer", self.reset_optimizer.to_string()),
            ("terms", self.terms.to_string()),
        ]
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        const OP: &str = "trainer::TrainRunConfig::set";
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::config(OP, format!("{key}: cannot parse `{v}`")))
        }
        let v = value.trim();
        match key {
            "dim" => self.dim = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "layers" => self.layers = num(key, v)?,
            "social_layers" => self.social_layers = num(key, v)?,
            "tau" => self.tau = num(key, v)?,
            "perturb_prob" => self.perturb_prob = num(key, v)?,
            "lambda1" => self.lambda1 = num(key, v)?,
            "lambda2" => self.lambda2 = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "c1" => self.c1 = num(key, v)?,
            "c2" => self.c2 = num(key, v)?,
            "agg" => self.agg = v.parse().map_err(|e: String| Error::config(OP, e))?,
            "prior" => self.prior = v.parse()?,
            "epochs_per_iteration" => self.epochs_per_iteration = num(key, v)?,
            "max_iterations" => self.max_iterations = num(key, v)?,
            "patience" => self.patience = num(key, v)?,
            "negatives_per_user" => {
                self.negatives_per_user = v.parse().map_err(|e: String| Error::config(OP, e))?
            }
            "split_ratio" => self.split_ratio = num(key, v)?,
            "init_std" => self.init_std = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "use_tensor" => self.use_tensor = num(key, v)?,
            "denoise" => self.denoise = num(key, v)?,
            "symmetrize_union" => self.symmetrize_union = num(key, v)?,
            "reset_optimizer" => self.reset_optimizer = num(key, v)?,
            "terms" => self.terms = v.parse().map_err(|e: String| Error::config(OP, e))?,
            other => return Err(Error::config(OP, format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped; unknown and repeated keys are errors.
    pub fn apply_text(mut self, path: &Path, text: &str) -> Result<Self> {
        const OP: &str = "trainer::TrainRunConfig::parse";
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                op: OP,
                path: path.to_owned(),
                line: i + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected key=value".into()))?;
            let k = k.trim();
            if !seen.insert(k.to_owned()) {
                return Err(parse_err(format!("key `{k}` given twice")));
            }
            self.set(k, v).map_err(|e| parse_err(e.to_string()))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        Self::default().apply_text(path, text)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io("trainer::TrainRunConfig::read", path, e))?;
        Self::parse(path, &text)
    }
}
