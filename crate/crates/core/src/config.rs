//! Run configuration and the fixed working-directory layout.
//!
//! A whole run is captured by one JSON document; command-line flags override
//! individual fields. Unknown keys are rejected so stale configs fail loudly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, JointTrainConfig};
use crate::synth::SynthConfig;
use crate::tasg::GraphMode;
use crate::tlm::EncoderConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TasgMode {
    #[default]
    Npmi,
    Tfidf,
    NpmiTfidf,
    /// Disable the similarity branch entirely.
    Off,
}

impl TasgMode {
    pub fn graph_mode(self) -> Option<GraphMode> {
        match self {
            TasgMode::Npmi => Some(GraphMode::Npmi),
            TasgMode::Tfidf => Some(GraphMode::Tfidf),
            TasgMode::NpmiTfidf => Some(GraphMode::NpmiTfidf),
            TasgMode::Off => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TasgMode::Npmi => "npmi",
            TasgMode::Tfidf => "tfidf",
            TasgMode::NpmiTfidf => "npmi-tfidf",
            TasgMode::Off => "off",
        }
    }
}

impl std::str::FromStr for TasgMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<TasgMode> {
        match s {
            "npmi" => Ok(TasgMode::Npmi),
            "tfidf" => Ok(TasgMode::Tfidf),
            "npmi-tfidf" => Ok(TasgMode::NpmiTfidf),
            "off" => Ok(TasgMode::Off),
            other => Err(Error::BadConfig(format!(
                "unknown tasg mode `{other}` (expected npmi|tfidf|npmi-tfidf|off)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub mask_rate: f64,
}

impl Default for PretrainSection {
    fn default() -> Self {
        PretrainSection {
            epochs: 20,
            lr: 1e-5,
            batch_size: 16,
            mask_rate: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Raw transfer CSV (`from,to,value_wei,timestamp`).
    pub transactions: PathBuf,
    /// Label CSV (`address,label`).
    pub labels: PathBuf,
    /// Root for all generated artifacts.
    pub workdir: PathBuf,
    pub dataset: String,
    pub max_transactions: usize,
    pub encoder: EncoderConfig,
    pub pretrain: PretrainSection,
    pub tasg_mode: TasgMode,
    pub theta: f64,
    pub weighted_aig: bool,
    pub fusion: FusionConfig,
    pub joint: JointTrainConfig,
    pub synth: SynthConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            transactions: PathBuf::from("transactions.csv"),
            labels: PathBuf::from("labels.csv"),
            workdir: PathBuf::from("work"),
            dataset: "default".into(),
            max_transactions: 100,
            encoder: EncoderConfig::default(),
            pretrain: PretrainSection::default(),
            tasg_mode: TasgMode::default(),
            theta: 0.2,
            weighted_aig: false,
            fusion: FusionConfig::default(),
            joint: JointTrainConfig::default(),
            synth: SynthConfig::default(),
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.fusion.validate()?;
        if !(0.0..1.0).contains(&self.theta) {
            return Err(Error::InvalidThreshold(self.theta));
        }
        if !(0.0..=1.0).contains(&self.joint.lambda) {
            return Err(Error::InvalidLambda(self.joint.lambda));
        }
        if self.max_transactions == 0 {
            return Err(Error::BadConfig("max_transactions must be positive".into()));
        }
        Ok(())
    }

    /// Propagate the global seed into every seeded section.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.joint.seed = seed;
        self.synth.seed = seed;
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            root: self.workdir.clone(),
        }
    }
}

/// Fixed artifact layout under the workdir. Stage dependencies are resolved
/// by these paths, not a build system.
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Workspace {
        Workspace { root: root.into() }
    }

    pub fn create_dirs(&self) -> Result<()> {
        for sub in ["corpus", "graphs", "checkpoints", "reports"] {
            let dir = self.root.join(sub);
            std::fs::create_dir_all(&dir)
                .map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
        Ok(())
    }

    pub fn records(&self) -> PathBuf {
        self.root.join("corpus/records.jsonl")
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus/corpus.jsonl")
    }

    pub fn vocab(&self) -> PathBuf {
        self.root.join("corpus/vocab.json")
    }

    pub fn tasg_edges(&self) -> PathBuf {
        self.root.join("graphs/tasg_edges.jsonl")
    }

    pub fn tasg_nodes(&self) -> PathBuf {
        self.root.join("graphs/tasg_nodes.json")
    }

    pub fn aig_edges(&self) -> PathBuf {
        self.root.join("graphs/aig_edges.jsonl")
    }

    pub fn graphs_meta(&self) -> PathBuf {
        self.root.join("graphs/meta.json")
    }

    pub fn tlm_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoints/tlm.ckpt")
    }

    pub fn joint_checkpoint(&self) -> PathBuf {
        self.root.join("checkpoints/joint.ckpt")
    }

    pub fn pretrain_log(&self) -> PathBuf {
        self.root.join("reports/pretrain_loss.jsonl")
    }

    pub fn train_log(&self) -> PathBuf {
        self.root.join("reports/train_loss.jsonl")
    }

    pub fn eval_report(&self) -> PathBuf {
        self.root.join("reports/eval.json")
    }

    pub fn lambda_sweep(&self) -> PathBuf {
        self.root.join("reports/lambda_sweep.csv")
    }

    pub fn theta_sweep(&self) -> PathBuf {
        self.root.join("reports/theta_sweep.csv")
    }

    /// Error when a stage dependency has not been produced yet.
    pub fn require(&self, path: &Path) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::MissingArtifact(path.display().to_string()))
        }
    }
}
