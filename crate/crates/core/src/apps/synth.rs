//! A synthetic attribute world: binary class profiles with per-domain attribute
//! priors, and noisy per-instance attribute scores standing in for the output
//! of a learned embedding.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attr_model::{AttributeSchema, AttributeTable, CategoryProfile, FeatureRecord};
use crate::episodes::stream_rng;
use crate::error::{Result, TadError};

const STREAM_DOMAIN: u64 = 1 << 40;
const STREAM_PROFILE: u64 = 2 << 40;
const STREAM_INSTANCE: u64 = 3 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthWorldConfig {
    pub num_classes: usize,
    pub num_attributes: usize,
    /// Probability that an attribute is on for a class, before domain bias.
    pub profile_sparsity: f64,
    /// Standard deviation of the Gaussian score noise.
    pub noise_sigma: f64,
    pub samples_per_class: usize,
    pub seed: u64,
    pub domains: usize,
    /// Each domain shifts every attribute's on-probability by up to this much.
    pub domain_bias: f64,
    /// Classes `0..train_classes` form the training split; the rest are novel.
    pub train_classes: usize,
    /// Extra noise on attribute values that are rare among training classes:
    /// the score noise for class `y`, attribute `l` is
    /// `noise_sigma * (1 + transfer_penalty * rarity(y, l) ^ transfer_exponent)`,
    /// where rarity is the fraction of training classes whose value on `l`
    /// differs from `y`'s. A zero penalty gives uniform noise.
    pub transfer_penalty: f64,
    pub transfer_exponent: f64,
}

impl Default for SynthWorldConfig {
    fn default() -> Self {
        Self {
            num_classes: 40,
            num_attributes: 32,
            profile_sparsity: 0.3,
            noise_sigma: 0.15,
            samples_per_class: 100,
            seed: 0,
            domains: 1,
            domain_bias: 0.0,
            train_classes: 20,
            transfer_penalty: 0.0,
            transfer_exponent: 3.0,
        }
    }
}

impl SynthWorldConfig {
    pub fn check(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_attributes == 0 || self.samples_per_class == 0 {
            return Err(TadError::validation("class, attribute and sample counts must be >= 1"));
        }
        if self.domains == 0 {
            return Err(TadError::validation("need at least one domain"));
        }
        if !(self.profile_sparsity > 0.0 && self.profile_sparsity < 1.0) {
            return Err(TadError::validation("profile sparsity must lie in (0, 1)"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(TadError::validation("noise sigma must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.domain_bias) {
            return Err(TadError::validation("domain bias must lie in [0, 1)"));
        }
        if !(self.transfer_penalty.is_finite() && self.transfer_penalty >= 0.0) {
            return Err(TadError::validation("transfer penalty must be finite and >= 0"));
        }
        if !(self.transfer_exponent.is_finite() && self.transfer_exponent > 0.0) {
            return Err(TadError::validation("transfer exponent must be finite and > 0"));
        }
        if self.train_classes == 0 || self.train_classes > self.num_classes {
            return Err(TadError::validation("train_classes must lie in 1..=num_classes"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthWorld {
    pub config: SynthWorldConfig,
    /// Ground-truth degenerate profiles of every class.
    pub table: AttributeTable,
    /// Instance scores, grouped by class in class order.
    pub features: Vec<FeatureRecord>,
    /// Domain index of every class, in class order.
    pub domains: Vec<usize>,
    ranges: Vec<Range<usize>>,
}

pub fn class_id(index: usize) -> String {
    format!("c{index:03}")
}

/// Builds the world; identical configs give bit-identical worlds.
pub fn generate_synth_world(config: &SynthWorldConfig) -> Result<SynthWorld> {
    config.check()?;
    let l = config.num_attributes;
    let schema = AttributeSchema::binary(l)?;

    let priors: Vec<Vec<f64>> = (0..config.domains)
        .map(|d| {
            let mut rng = stream_rng(config.seed, STREAM_DOMAIN + d as u64);
            (0..l)
                .map(|_| {
                    let shift = config.domain_bias * (2.0 * rng.random::<f64>() - 1.0);
                    (config.profile_sparsity + shift).clamp(0.02, 0.98)
                })
                .collect()
        })
        .collect();

    let domains: Vec<usize> = (0..config.num_classes).map(|c| c % config.domains).collect();
    let bits: Vec<Vec<usize>> = (0..config.num_classes)
        .map(|c| {
            let mut rng = stream_rng(config.seed, STREAM_PROFILE + c as u64);
            priors[domains[c]]
                .iter()
                .map(|&p| usize::from(rng.random::<f64>() < p))
                .collect()
        })
        .collect();

    let train_on: Vec<f64> = (0..l)
        .map(|a| {
            bits[..config.train_classes].iter().map(|b| b[a] as f64).sum::<f64>()
                / config.train_classes as f64
        })
        .collect();

    let mut features = Vec::with_capacity(config.num_classes * config.samples_per_class);
    let mut ranges = Vec::with_capacity(config.num_classes);
    for (c, class_bits) in bits.iter().enumerate() {
        let sds: Vec<f64> = class_bits
            .iter()
            .zip(&train_on)
            .map(|(&b, &on)| {
                let rarity = if b == 1 { 1.0 - on } else { on };
                config.noise_sigma
                    * (1.0 + config.transfer_penalty * rarity.powf(config.transfer_exponent))
            })
            .collect();
        let mut rng = stream_rng(config.seed, STREAM_INSTANCE + c as u64);
        let start = features.len();
        for i in 0..config.samples_per_class {
            let scores = class_bits
                .iter()
                .zip(&sds)
                .map(|(&b, &sd)| {
                    let noise = if sd > 0.0 {
                        Normal::new(0.0, sd).expect("finite sd").sample(&mut rng)
                    } else {
                        0.0
                    };
                    (b as f64 + noise).clamp(0.0, 1.0)
                })
                .collect();
            features.push(FeatureRecord {
                instance_id: format!("{}-{i:05}", class_id(c)),
                category_id: class_id(c),
                scores,
            });
        }
        ranges.push(start..features.len());
    }

    let profiles = bits
        .iter()
        .enumerate()
        .map(|(c, b)| CategoryProfile::degenerate(class_id(c), &schema, b))
        .collect::<Result<Vec<_>>>()?;
    let table = AttributeTable::new(schema, profiles, "synth")?;
    Ok(SynthWorld {
        config: config.clone(),
        table,
        features,
        domains,
        ranges,
    })
}

impl SynthWorld {
    pub fn class_ids(&self) -> Vec<String> {
        (0..self.config.num_classes).map(class_id).collect()
    }

    pub fn train_class_ids(&self) -> Vec<String> {
        (0..self.config.train_classes).map(class_id).collect()
    }

    pub fn novel_class_ids(&self) -> Vec<String> {
        (self.config.train_classes..self.config.num_classes).map(class_id).collect()
    }

    /// Classes belonging to `domain`.
    pub fn class_ids_in_domain(&self, domain: usize) -> Vec<String> {
        (0..self.config.num_classes)
            .filter(|&c| self.domains[c] == domain)
            .map(class_id)
            .collect()
    }

    fn class_index(&self, category_id: &str) -> Option<usize> {
        let idx: usize = category_id.strip_prefix('c')?.parse().ok()?;
        (idx < self.config.num_classes && class_id(idx) == category_id).then_some(idx)
    }

    /// Instances of one class.
    pub fn instances(&self, category_id: &str) -> Result<&[FeatureRecord]> {
        let idx = self
            .class_index(category_id)
            .ok_or_else(|| TadError::validation(format!("unknown class '{category_id}'")))?;
        Ok(&self.features[self.ranges[idx].clone()])
    }

    /// `(class id, domain)` for every class.
    pub fn domain_assignment(&self) -> Vec<(String, usize)> {
        self.domains.iter().enumerate().map(|(c, &d)| (class_id(c), d)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attr_model::{induce_profiles, Binning};

    fn small(sigma: f64) -> SynthWorldConfig {
        SynthWorldConfig {
            num_classes: 6,
            num_attributes: 8,
            noise_sigma: sigma,
            samples_per_class: 20,
            train_classes: 3,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_scores_equal_profiles() {
        let w = generate_synth_world(&small(0.0)).unwrap();
        for f in &w.features {
            let p = w.table.profile(&f.category_id).unwrap();
            for (s, d) in f.scores.iter().zip(&p.distributions) {
                assert_eq!(*s, d[1]);
            }
        }
    }

    #[test]
    fn same_seed_same_world() {
        let a = generate_synth_world(&small(0.2)).unwrap();
        let b = generate_synth_world(&small(0.2)).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.features, b.features);
        let mut other = small(0.2);
        other.seed = 1;
        assert_ne!(generate_synth_world(&other).unwrap().features, a.features);
    }

    #[test]
    fn noiseless_induction_recovers_truth() {
        let mut cfg = small(0.0);
        cfg.samples_per_class = 1000;
        let w = generate_synth_world(&cfg).unwrap();
        let induced = induce_profiles(&w.features, w.table.schema(), Binning::default()).unwrap();
        assert_eq!(induced.profiles(), w.table.profiles());
    }

    #[test]
    fn splits_and_domains() {
        let mut cfg = small(0.1);
        cfg.domains = 2;
        cfg.domain_bias = 0.3;
        let w = generate_synth_world(&cfg).unwrap();
        assert_eq!(w.train_class_ids(), vec!["c000", "c001", "c002"]);
        assert_eq!(w.novel_class_ids().len(), 3);
        assert_eq!(w.class_ids_in_domain(1), vec!["c001", "c003", "c005"]);
        assert_eq!(w.instances("c004").unwrap().len(), 20);
        assert!(w.instances("c999").is_err());
        assert!(w.instances("x").is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = small(0.1);
        c.domains = 0;
        assert!(generate_synth_world(&c).is_err());
        let mut c = small(f64::NAN);
        c.noise_sigma = f64::NAN;
        assert!(generate_synth_world(&c).is_err());
        let mut c = small(0.1);
        c.train_classes = 7;
        assert!(generate_synth_world(&c).is_err());
    }
}
