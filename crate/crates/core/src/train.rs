//! Full-batch optimisation of the embeddings themselves, jointly with a
//! freshly initialised linear head, tracking cluster structure and isotropy
//! at every metric-cadence boundary.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adam::{adam_step, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::labels::LabelAssignment;
use crate::loss::{bce_raw, cross_entropy_raw, triplet_raw};
use crate::metrics::{isoscore, silhouette, subsample};
use crate::objectives::{valid_triplets, ClassifierHead};
use crate::trajectory::{Trajectory, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Softmax cross-entropy over single labels.
    CrossEntropy,
    /// Per-symbol sigmoid binary cross-entropy.
    BinaryCrossEntropy,
    /// Margin-free triplet hinge; no head is trained.
    Triplet,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" | "cross-entropy" | "cross_entropy" => Ok(LossKind::CrossEntropy),
            "bce" | "binary-cross-entropy" | "binary_cross_entropy" => Ok(LossKind::BinaryCrossEntropy),
            "triplet" => Ok(LossKind::Triplet),
            other => Err(Error::InvalidConfig(format!("unknown loss `{other}`"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::CrossEntropy => "ce",
            LossKind::BinaryCrossEntropy => "bce",
            LossKind::Triplet => "triplet",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: u64,
    pub adam: AdamConfig,
    pub loss: LossKind,
    /// Metrics are recorded after every `metric_cadence`-th update.
    pub metric_cadence: u64,
    /// Evaluate metrics on a fresh uniform sample of this many points when
    /// the cloud is larger.
    pub sample_cap: Option<usize>,
    pub seed: u64,
    pub use_bias: bool,
    /// Triplet mode enumerates every valid triple while `n <= triplet_cap`.
    pub triplet_cap: usize,
    /// Triples drawn per step above `triplet_cap`.
    pub triplet_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            adam: AdamConfig::default(),
            loss: LossKind::CrossEntropy,
            metric_cadence: 1,
            sample_cap: None,
            seed: 0,
            use_bias: false,
            triplet_cap: 64,
            triplet_samples: 4096,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be >= 1".into()));
        }
        if self.metric_cadence == 0 {
            return Err(Error::InvalidConfig("metric cadence must be >= 1".into()));
        }
        if self.sample_cap == Some(0) {
            return Err(Error::InvalidConfig("sample cap must be >= 1".into()));
        }
        if self.loss == LossKind::Triplet && self.triplet_samples == 0 {
            return Err(Error::InvalidConfig("triplet samples must be >= 1".into()));
        }
        self.adam.validate()
    }
}

enum Objective {
    CrossEntropy(Vec<usize>),
    Binary(Vec<f64>),
    Triplet(TripletSource),
}

enum TripletSource {
    All(Vec<(usize, usize, usize)>),
    Sampled(TripletSampler),
}

/// Uniform sampler over valid triples: the anchor is drawn with weight equal
/// to its number of (positive, negative) completions.
struct TripletSampler {
    anchors: WeightedIndex<f64>,
    members: Vec<Vec<usize>>,
    cluster: Vec<usize>,
    n: usize,
}

impl TripletSampler {
    fn new(labels: &LabelAssignment) -> Result<Self> {
        let c = labels.clusters();
        let n = labels.len();
        let mut members = vec![Vec::new(); c.count()];
        for (i, &id) in c.ids.iter().enumerate() {
            members[id].push(i);
        }
        let weights: Vec<f64> = c
            .ids
            .iter()
            .map(|&id| ((c.sizes[id] - 1) * (n - c.sizes[id])) as f64)
            .collect();
        let anchors = WeightedIndex::new(&weights).map_err(|_| Error::NoValidTriplet)?;
        Ok(Self {
            anchors,
            members,
            cluster: c.ids,
            n,
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<(usize, usize, usize)> {
        (0..count)
            .map(|_| {
                let a = self.anchors.sample(rng);
                let own = &self.members[self.cluster[a]];
                let p = loop {
                    let p = own[rng.random_range(0..own.len())];
                    if p != a {
                        break p;
                    }
                };
                let q = loop {
                    let q = rng.random_range(0..self.n);
                    if self.cluster[q] != self.cluster[a] {
                        break q;
                    }
                };
                (a, p, q)
            })
            .collect()
    }
}

fn prepare(labels: &LabelAssignment, config: &TrainConfig) -> Result<Objective> {
    match config.loss {
        LossKind::CrossEntropy => {
            let targets = labels.class_indices("cross-entropy training")?;
            if labels.universe().len() < 2 {
                return Err(Error::InvalidLabels(
                    "cross-entropy needs at least 2 classes".into(),
                ));
            }
            Ok(Objective::CrossEntropy(targets))
        }
        LossKind::BinaryCrossEntropy => Ok(Objective::Binary(labels.target_matrix())),
        LossKind::Triplet => {
            labels.class_indices("triplet training")?;
            if labels.len() <= config.triplet_cap {
                let all = valid_triplets(labels);
                if all.is_empty() {
                    return Err(Error::NoValidTriplet);
                }
                Ok(Objective::Triplet(TripletSource::All(all)))
            } else {
                Ok(Objective::Triplet(TripletSource::Sampled(TripletSampler::new(labels)?)))
            }
        }
    }
}

/// Mean silhouette and IsoScore of the current points, `None` where the
/// metric is undefined.
pub fn evaluate_metrics<R: Rng>(
    cloud: &PointCloud,
    labels: &LabelAssignment,
    sample_cap: Option<usize>,
    rng: &mut R,
) -> (Option<f64>, Option<f64>) {
    match subsample(cloud, labels, sample_cap, rng) {
        Ok((c, l)) => (
            silhouette(&c, &l).ok().map(|r| r.mean),
            isoscore(&c).ok().map(|r| r.score),
        ),
        Err(_) => (None, None),
    }
}

/// Optimises the points of `cloud` (and a classifier head, for the
/// classification losses) for `config.steps` full-batch Adam updates.
///
/// After update `s`, if `s` is a multiple of the metric cadence, a record is
/// appended with the loss evaluated at that update and the metrics of the
/// updated points. Results are bit-reproducible for a given seed.
pub fn run_experiment(cloud: &PointCloud, labels: &LabelAssignment, config: &TrainConfig) -> Result<Trajectory> {
    config.validate()?;
    if labels.len() != cloud.len() {
        return Err(Error::InvalidLabels(format!(
            "{} labels for {} points",
            labels.len(),
            cloud.len()
        )));
    }
    let objective = prepare(labels, config)?;
    let d = cloud.dim();

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut metric_rng = ChaCha8Rng::seed_from_u64(config.seed);
    metric_rng.set_stream(1);
    let mut triplet_rng = ChaCha8Rng::seed_from_u64(config.seed);
    triplet_rng.set_stream(2);

    let mut head = match objective {
        Objective::Triplet(_) => None,
        _ => Some(ClassifierHead::random(
            d,
            labels.universe().len(),
            config.use_bias,
            &mut init_rng,
        )?),
    };
    let mut points = cloud.as_slice().to_vec();
    let mut point_state = AdamState::new(points.len());
    let mut weight_state = AdamState::new(head.as_ref().map_or(0, |h| h.weights().len()));
    let mut bias_state = AdamState::new(head.as_ref().and_then(|h| h.bias()).map_or(0, <[f64]>::len));

    let mut trajectory = Trajectory::new();
    for step in 1..=config.steps {
        let (loss, grad_points, grad_head) = match (&objective, &head) {
            (Objective::CrossEntropy(t), Some(h)) => {
                let g = cross_entropy_raw(&points, h, t);
                (g.loss, g.points, Some((g.weights, g.bias)))
            }
            (Objective::Binary(t), Some(h)) => {
                let g = bce_raw(&points, h, t);
                (g.loss, g.points, Some((g.weights, g.bias)))
            }
            (Objective::Triplet(source), _) => {
                let (loss, g) = match source {
                    TripletSource::All(all) => triplet_raw(&points, d, all)?,
                    TripletSource::Sampled(s) => {
                        let drawn = s.draw(&mut triplet_rng, config.triplet_samples);
                        triplet_raw(&points, d, &drawn)?
                    }
                };
                (loss, g, None)
            }
            _ => unreachable!("classification objectives always own a head"),
        };

        adam_step(&mut points, &grad_points, &mut point_state, &config.adam)?;
        if let (Some(h), Some((gw, gb))) = (head.as_mut(), grad_head) {
            adam_step(h.weights_mut(), &gw, &mut weight_state, &config.adam)?;
            if let (Some(b), Some(gb)) = (h.bias_mut(), gb) {
                adam_step(b, &gb, &mut bias_state, &config.adam)?;
            }
        }

        if step % config.metric_cadence == 0 {
            let (sil, iso) = match PointCloud::new(points.clone(), d) {
                Ok(current) => evaluate_metrics(&current, labels, config.sample_cap, &mut metric_rng),
                Err(_) => (None, None),
            };
            trajectory.push(TrajectoryRecord {
                step,
                loss,
                silhouette: sil,
                isoscore: iso,
            })?;
        }
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_mixture, ClassSizes, MixtureSpec};

    fn blobs(seed: u64) -> (PointCloud, LabelAssignment) {
        let spec = MixtureSpec {
            num_classes: 2,
            dim: 16,
            points_per_class: ClassSizes::Uniform(200),
            center_spread: 1.0,
            within_std: 1.0,
            multilabel: None,
            seed,
        };
        generate_mixture(&spec).unwrap()
    }

    #[test]
    fn zero_steps_rejected() {
        let (c, l) = blobs(1);
        let cfg = TrainConfig {
            steps: 0,
            ..Default::default()
        };
        assert!(matches!(run_experiment(&c, &l, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn cadence_controls_record_count() {
        let (c, l) = blobs(2);
        let cfg = TrainConfig {
            steps: 10,
            metric_cadence: 3,
            sample_cap: Some(50),
            ..Default::default()
        };
        let t = run_experiment(&c, &l, &cfg).unwrap();
        let steps: Vec<u64> = t.records().iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![3, 6, 9]);
    }

    #[test]
    fn two_blob_run_clusters_and_loses_isotropy() {
        let (c, l) = blobs(3);
        let cfg = TrainConfig {
            steps: 200,
            seed: 11,
            ..Default::default()
        };
        let t = run_experiment(&c, &l, &cfg).unwrap();
        let first = t.first().unwrap();
        let last = t.last().unwrap();
        assert!(last.silhouette.unwrap() > first.silhouette.unwrap());
        assert!(last.isoscore.unwrap() < first.isoscore.unwrap());
        assert!(last.loss < first.loss);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let (c, l) = blobs(4);
        let cfg = TrainConfig {
            steps: 20,
            sample_cap: Some(100),
            seed: 5,
            use_bias: true,
            ..Default::default()
        };
        let a = run_experiment(&c, &l, &cfg).unwrap();
        let b = run_experiment(&c, &l, &cfg).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn multilabel_needs_bce() {
        let spec = MixtureSpec {
            num_classes: 3,
            dim: 4,
            points_per_class: ClassSizes::Uniform(10),
            center_spread: 2.0,
            within_std: 0.5,
            multilabel: Some(crate::datagen::MultilabelSpec {
                num_symbols: 3,
                symbol_prob: 0.5,
            }),
            seed: 8,
        };
        let (c, l) = generate_mixture(&spec).unwrap();
        let ce = TrainConfig {
            steps: 2,
            ..Default::default()
        };
        assert!(matches!(
            run_experiment(&c, &l, &ce),
            Err(Error::MultiLabelUnsupported(_))
        ));
        let bce = TrainConfig {
            steps: 2,
            loss: LossKind::BinaryCrossEntropy,
            ..Default::default()
        };
        assert_eq!(run_experiment(&c, &l, &bce).unwrap().len(), 2);
    }

    #[test]
    fn triplet_mode_enumerates_or_samples() {
        let small = MixtureSpec {
            num_classes: 2,
            dim: 3,
            points_per_class: ClassSizes::Uniform(6),
            center_spread: 0.5,
            within_std: 1.0,
            multilabel: None,
            seed: 2,
        };
        let (c, l) = generate_mixture(&small).unwrap();
        let cfg = TrainConfig {
            steps: 100,
            loss: LossKind::Triplet,
            adam: AdamConfig {
                learning_rate: 0.01,
                ..Default::default()
            },
            ..Default::default()
        };
        let t = run_experiment(&c, &l, &cfg).unwrap();
        assert!(t.last().unwrap().loss < t.first().unwrap().loss);

        let capped = TrainConfig {
            steps: 5,
            triplet_cap: 4,
            triplet_samples: 64,
            ..cfg
        };
        let a = run_experiment(&c, &l, &capped).unwrap();
        assert_eq!(a, run_experiment(&c, &l, &capped).unwrap());
    }

    #[test]
    fn collapsed_cloud_records_sentinels() {
        // two points at one location: silhouette 0, IsoScore undefined
        let c = PointCloud::from_rows(&[[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let l = LabelAssignment::from_symbols(&["a", "b"]).unwrap();
        let cfg = TrainConfig {
            steps: 1,
            adam: AdamConfig {
                learning_rate: 1e-300,
                ..Default::default()
            },
            ..Default::default()
        };
        let t = run_experiment(&c, &l, &cfg).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn loss_kind_parsing() {
        assert_eq!("ce".parse::<LossKind>().unwrap(), LossKind::CrossEntropy);
        assert_eq!("bce".parse::<LossKind>().unwrap(), LossKind::BinaryCrossEntropy);
        assert_eq!("triplet".parse::<LossKind>().unwrap(), LossKind::Triplet);
        assert!("mse".parse::<LossKind>().is_err());
    }
}
