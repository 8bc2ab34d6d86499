//! The hippocampal short-term memory: pattern separation (PS), pattern
//! completion (PC), pattern retrieval (PR) and pattern mapping (PM).
//!
//! Study: each sample goes through PS in sequence and the resulting code is
//! stored in PC; PR then learns encoding -> PS code and PM learns PS code ->
//! image, on the full study batch. Recall: PR output is conditioned to a
//! bipolar cue, PC completes it, PM maps the completed code to an image.

mod hopfield;
mod pattern;
mod ps;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::nncore::{Loss, NetConfig, NnError, TwoLayerNet};
use crate::seed::{rng_for, tag};

pub use hopfield::{HopfieldMemory, PcConfig, Recall};
pub use pattern::{condition_bipolar, BipolarPattern};
pub use ps::{PatternSeparator, PsConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AhaConfig {
    pub ps: PsConfig,
    pub pc: PcConfig,
    pub pr: NetConfig,
    pub pm: NetConfig,
    /// Threshold used to condition PR output into a PC cue.
    pub cue_threshold: f32,
}

impl Default for AhaConfig {
    fn default() -> Self {
        Self {
            ps: PsConfig::default(),
            pc: PcConfig::default(),
            pr: NetConfig {
                hidden: 800,
                lr: 1e-2,
                steps: 200,
            },
            pm: NetConfig {
                hidden: 100,
                lr: 1e-2,
                steps: 200,
            },
            cue_threshold: 0.5,
        }
    }
}

impl AhaConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.ps.validate()?;
        self.pc.validate()?;
        self.pr.validate("aha.pr")?;
        self.pm.validate("aha.pm")?;
        if !(self.cue_threshold > 0.0 && self.cue_threshold < 1.0) {
            return Err("aha.cue_threshold must be in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StmError {
    #[error("{network} training diverged: {source}")]
    Diverged {
        network: &'static str,
        source: NnError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub pr_loss: Vec<f32>,
    pub pm_loss: Vec<f32>,
}

/// Output of a full recall through PR, PC and PM.
#[derive(Debug, Clone, PartialEq)]
pub struct AhaRecall {
    pub pr: Array1<f32>,
    pub pc: Recall,
    /// PM reconstruction, flattened, in [0,1].
    pub image: Array1<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aha {
    config: AhaConfig,
    inputs: usize,
    image_len: usize,
    ps: PatternSeparator,
    pc: HopfieldMemory,
    pr: TwoLayerNet<f32>,
    pm: TwoLayerNet<f32>,
    targets: Vec<BipolarPattern>,
}

impl Aha {
    /// Fresh state for encodings of length `inputs` and images of
    /// `image_len` pixels. Every component is drawn from `seed`.
    pub fn new(inputs: usize, image_len: usize, config: AhaConfig, seed: u64) -> Self {
        let ps_cfg = config.ps.clone();
        let ps = PatternSeparator::new(inputs, ps_cfg.clone(), &mut rng_for(seed, &[tag::STM, 0]));
        let pc = HopfieldMemory::new(ps_cfg.n_ps, ps_cfg.k_ps, config.pc.clone(), &mut rng_for(seed, &[tag::STM, 1]));
        let pr = config.pr.build(inputs, ps_cfg.n_ps, &mut rng_for(seed, &[tag::STM, 2]));
        let pm = config.pm.build(ps_cfg.n_ps, image_len, &mut rng_for(seed, &[tag::STM, 3]));
        Self {
            config,
            inputs,
            image_len,
            ps,
            pc,
            pr,
            pm,
            targets: Vec::new(),
        }
    }

    /// Back to the freshly initialised state under `seed`.
    pub fn reset(&mut self, seed: u64) {
        *self = Self::new(self.inputs, self.image_len, self.config.clone(), seed);
    }

    pub fn config(&self) -> &AhaConfig {
        &self.config
    }

    pub fn ps(&self) -> &PatternSeparator {
        &self.ps
    }

    pub fn pc(&self) -> &HopfieldMemory {
        &self.pc
    }

    pub fn pr(&self) -> &TwoLayerNet<f32> {
        &self.pr
    }

    pub fn pm(&self) -> &TwoLayerNet<f32> {
        &self.pm
    }

    /// PS codes of the current study set, in study order.
    pub fn targets(&self) -> &[BipolarPattern] {
        &self.targets
    }

    /// One exposure of the study set: rows of `encodings` and `images`.
    pub fn study(&mut self, encodings: ArrayView2<f32>, images: ArrayView2<f32>) -> Result<StudyReport, StmError> {
        assert_eq!(encodings.nrows(), images.nrows(), "aha: study set size mismatch");
        assert_eq!(encodings.ncols(), self.inputs, "aha: encoding length mismatch");
        assert_eq!(images.ncols(), self.image_len, "aha: image length mismatch");
        assert!(self.targets.is_empty(), "aha: study requires a freshly reset state");

        for row in encodings.rows() {
            let code = self.ps.forward(row);
            self.pc.store(&code);
            self.targets.push(code);
        }
        let n_ps = self.config.ps.n_ps;
        let unit = Array2::from_shape_fn((self.targets.len(), n_ps), |(i, j)| {
            if self.targets[i].as_slice()[j] > 0 { 1.0 } else { 0.0 }
        });
        let bipolar = unit.mapv(|v| 2.0 * v - 1.0);

        let pr_loss = self
            .pr
            .fit(encodings, unit.view(), Loss::Bce, self.config.pr.steps)
            .map_err(|source| StmError::Diverged { network: "PR", source })?;
        let pm_loss = self
            .pm
            .fit(bipolar.view(), images, Loss::Mse, self.config.pm.steps)
            .map_err(|source| StmError::Diverged { network: "PM", source })?;
        Ok(StudyReport { pr_loss, pm_loss })
    }

    /// PR output in [0,1], unconditioned.
    pub fn pr_infer(&self, encoding: ArrayView1<f32>) -> Array1<f32> {
        self.pr.predict(encoding).1
    }

    /// PM reconstruction of a bipolar code, clamped to [0,1].
    pub fn pm_infer(&self, pattern: &BipolarPattern) -> Array1<f32> {
        let x = Array1::from(pattern.to_bipolar_f32());
        self.pm.predict(x.view()).1.mapv_into(|v| v.clamp(0.0, 1.0))
    }

    pub fn recall(&self, encoding: ArrayView1<f32>) -> AhaRecall {
        let pr = self.pr_infer(encoding);
        let cue = condition_bipolar(pr.as_slice().unwrap(), self.config.cue_threshold);
        let pc = self.pc.recall(&cue);
        let image = self.pm_infer(&pc.pattern);
        AhaRecall { pr, pc, image }
    }
}
