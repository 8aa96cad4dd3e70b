use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::instance::{Component, DistributionSpec};

/// One realization with its 1-based arrival index.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub index: usize,
    pub omega: Vec<f64>,
}

/// Generator for a per-position random stream.
///
/// Position `p` always maps to ChaCha stream `p` under the given seed, so a
/// draw depends only on `(seed, p)`.
pub(crate) fn position_rng(seed: u64, position: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(position);
    rng
}

enum Sampler<'a> {
    Finite {
        scenarios: &'a [Vec<f64>],
        index: WeightedIndex<f64>,
    },
    Product(Vec<ComponentSampler>),
}

enum ComponentSampler {
    Uniform { low: f64, width: f64 },
    Normal(Normal<f64>),
}

impl<'a> Sampler<'a> {
    fn new(spec: &'a DistributionSpec) -> Self {
        match spec {
            DistributionSpec::FiniteSet { scenarios, weights } => Sampler::Finite {
                scenarios,
                index: WeightedIndex::new(weights).expect("validated weights"),
            },
            DistributionSpec::Generator { components } => Sampler::Product(
                components
                    .iter()
                    .map(|c| match *c {
                        Component::Uniform { low, high } => ComponentSampler::Uniform { low, width: high - low },
                        Component::Normal { mean, std_dev } => {
                            ComponentSampler::Normal(Normal::new(mean, std_dev).expect("validated normal"))
                        }
                    })
                    .collect(),
            ),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Sampler::Finite { scenarios, index } => scenarios[index.sample(rng)].clone(),
            Sampler::Product(parts) => parts
                .iter()
                .map(|p| match p {
                    ComponentSampler::Uniform { low, width } => low + width * rng.random::<f64>(),
                    ComponentSampler::Normal(n) => n.sample(rng),
                })
                .collect(),
        }
    }
}

/// Returns the next `count` i.i.d. draws after `stream_position` earlier
/// draws. Indices continue at `stream_position + 1`.
pub fn draw_scenarios(spec: &DistributionSpec, seed: u64, count: usize, stream_position: usize) -> Vec<Scenario> {
    if count == 0 {
        return Vec::new();
    }
    let sampler = Sampler::new(spec);
    (stream_position..stream_position + count)
        .map(|p| {
            let mut rng = position_rng(seed, p as u64);
            Scenario {
                index: p + 1,
                omega: sampler.sample(&mut rng),
            }
        })
        .collect()
}

/// Stateful cursor over a seeded scenario stream.
#[derive(Debug, Clone)]
pub struct ScenarioStream {
    spec: DistributionSpec,
    seed: u64,
    position: usize,
}

impl ScenarioStream {
    pub fn new(spec: DistributionSpec, seed: u64) -> Self {
        Self { spec, seed, position: 0 }
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn next_batch(&mut self, count: usize) -> Vec<Scenario> {
        let batch = draw_scenarios(&self.spec, self.seed, count, self.position);
        self.position += count;
        batch
    }
}
