//! Reproducible instance families: the adversarial tight family and seeded
//! random coverage, coverage-minus-cost and linear instances.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::{Edge, Instance};
use crate::oracle::{Oracle, OracleError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Capacities {
    Uniform(u32),
    /// Each `b_v` uniform in `1..=k`.
    RandomUpTo(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RandomSpec {
    pub vertices: usize,
    pub edges: usize,
    pub capacities: Capacities,
    /// Universe size for the coverage families.
    pub universe: usize,
    /// Largest element set per edge.
    pub max_set: usize,
    /// Range for element weights (coverage) or edge weights (linear).
    pub weight_lo: f64,
    pub weight_hi: f64,
    pub seed: u64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            vertices: 8,
            edges: 10,
            capacities: Capacities::Uniform(1),
            universe: 12,
            max_set: 4,
            weight_lo: 1.0,
            weight_hi: 10.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GenSpec {
    Tight { c: f64, n: usize, eps: f64, delta: f64 },
    Coverage(RandomSpec),
    Covlin(RandomSpec),
    Linear(RandomSpec),
}

impl GenSpec {
    /// Tight family with the default perturbation `δ = 10⁻⁴·(C - 1)`.
    pub fn tight(c: f64, n: usize, eps: f64) -> Self {
        GenSpec::Tight { c, n, eps, delta: default_delta(c) }
    }
}

pub fn default_delta(c: f64) -> f64 {
    1e-4 * (c - 1.0)
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenSpec::Tight { c, n, eps, delta } => write!(f, "family=tight C={c} n={n} eps={eps} delta={delta}"),
            GenSpec::Coverage(s) | GenSpec::Covlin(s) | GenSpec::Linear(s) => {
                let family = match self {
                    GenSpec::Coverage(_) => "coverage",
                    GenSpec::Covlin(_) => "covlin",
                    _ => "linear",
                };
                let caps = match s.capacities {
                    Capacities::Uniform(k) => format!("uniform:{k}"),
                    Capacities::RandomUpTo(k) => format!("random:{k}"),
                };
                write!(
                    f,
                    "family={family} vertices={} edges={} b={caps} universe={} max_set={} weights={}..{} seed={}",
                    s.vertices, s.edges, s.universe, s.max_set, s.weight_lo, s.weight_hi, s.seed
                )
            }
        }
    }
}

#[derive(Debug)]
pub struct Generated {
    pub spec: GenSpec,
    pub instance: Instance,
    pub oracle: Oracle,
}

impl Generated {
    /// Stream document with a provenance comment.
    pub fn stream_text(&self) -> String {
        format!("# msbm gen {}\n{}", self.spec, self.instance.to_stream_string())
    }

    /// Oracle spec document with a provenance comment.
    pub fn oracle_text(&self) -> String {
        format!("# msbm gen {}\n{}", self.spec, self.oracle.to_spec_string())
    }
}

pub fn generate(spec: GenSpec) -> Result<Generated, OracleError> {
    let (instance, oracle) = match spec {
        GenSpec::Tight { c, n, eps, delta } => {
            let (oracle, instance) = Oracle::tight(c, n, eps, delta)?;
            (instance, oracle)
        }
        GenSpec::Coverage(s) => random(&s, Family::Coverage)?,
        GenSpec::Covlin(s) => random(&s, Family::Covlin)?,
        GenSpec::Linear(s) => random(&s, Family::Linear)?,
    };
    Ok(Generated { spec, instance, oracle })
}

#[derive(Clone, Copy, PartialEq)]
enum Family {
    Coverage,
    Covlin,
    Linear,
}

fn random(s: &RandomSpec, family: Family) -> Result<(Instance, Oracle), OracleError> {
    let bad = |m: &str| OracleError::Domain(m.into());
    if s.vertices < 2 {
        return Err(bad("at least two vertices are needed"));
    }
    if !(s.weight_lo >= 0.0 && s.weight_lo <= s.weight_hi && s.weight_hi.is_finite()) {
        return Err(bad("weights need 0 ≤ lo ≤ hi < ∞"));
    }
    if family != Family::Linear && (s.universe == 0 || s.max_set == 0) {
        return Err(bad("coverage families need a nonempty universe and max_set ≥ 1"));
    }
    match s.capacities {
        Capacities::Uniform(0) | Capacities::RandomUpTo(0) => return Err(bad("capacities must be positive")),
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let capacities: Vec<u32> = match s.capacities {
        Capacities::Uniform(k) => vec![k; s.vertices],
        Capacities::RandomUpTo(k) => (0..s.vertices).map(|_| rng.gen_range(1..=k)).collect(),
    };
    let mut edges: Vec<Edge> = (0..s.edges)
        .map(|i| {
            let u = rng.gen_range(0..s.vertices);
            let mut v = rng.gen_range(0..s.vertices - 1);
            if v >= u {
                v += 1;
            }
            Edge { u, v, key: i as u64 }
        })
        .collect();
    let weight = |rng: &mut ChaCha8Rng| {
        if s.weight_lo == s.weight_hi {
            s.weight_lo
        } else {
            rng.gen_range(s.weight_lo..s.weight_hi)
        }
    };

    let oracle = match family {
        Family::Linear => Oracle::linear((0..s.edges as u64).map(|k| (k, weight(&mut rng))).collect::<Vec<_>>())?,
        Family::Coverage | Family::Covlin => {
            let elem_weights: Vec<f64> = (0..s.universe).map(|_| weight(&mut rng)).collect();
            let all: Vec<u32> = (0..s.universe as u32).collect();
            let sets: Vec<(u64, Vec<u32>)> = (0..s.edges as u64)
                .map(|k| {
                    let size = rng.gen_range(1..=s.max_set.min(s.universe));
                    (k, all.choose_multiple(&mut rng, size).copied().collect())
                })
                .collect();
            if family == Family::Coverage {
                Oracle::coverage(elem_weights, sets)?
            } else {
                let mut freq = vec![0u32; s.universe];
                for (_, set) in &sets {
                    for &x in set {
                        freq[x as usize] += 1;
                    }
                }
                let k = freq.iter().copied().max().unwrap_or(1).max(1) as f64;
                let costs: Vec<(u64, f64)> = sets
                    .iter()
                    .map(|(key, set)| {
                        let w: f64 = set.iter().map(|&x| elem_weights[x as usize]).sum();
                        (*key, rng.gen_range(0.0..1.0) * w / k)
                    })
                    .collect();
                Oracle::covlin(elem_weights, sets, costs)?
            }
        }
    };

    edges.shuffle(&mut rng);
    let instance = Instance::new(capacities, edges).map_err(|e| OracleError::Domain(e.to_string()))?;
    Ok((instance, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_stream;
    use crate::oracle::parse_oracle;

    #[test]
    fn tight_order() {
        let g = generate(GenSpec::Tight { c: 2.0, n: 3, eps: 0.1, delta: 0.0 }).unwrap();
        let ends: Vec<[usize; 2]> = g.instance.edges().iter().map(|e| e.endpoints()).collect();
        // x_i = i, y_i = 4 + i
        assert_eq!(ends, vec![[0, 1], [0, 2], [0, 3], [0, 4], [1, 5], [2, 6], [3, 7]]);
        let g = generate(GenSpec::Tight { c: 2.0, n: 1, eps: 0.1, delta: 0.0 }).unwrap();
        assert_eq!(g.instance.num_edges(), 3);
        assert!(generate(GenSpec::tight(1.0, 3, 0.1)).is_err());
    }

    #[test]
    fn outputs_are_deterministic_and_reparse() {
        for spec in [
            GenSpec::Coverage(RandomSpec { seed: 7, ..Default::default() }),
            GenSpec::Covlin(RandomSpec { seed: 7, ..Default::default() }),
            GenSpec::Linear(RandomSpec { seed: 7, capacities: Capacities::RandomUpTo(3), ..Default::default() }),
            GenSpec::tight(2.0, 12, 1e-3),
        ] {
            let a = generate(spec).unwrap();
            let b = generate(spec).unwrap();
            assert_eq!(a.stream_text(), b.stream_text());
            assert_eq!(a.oracle_text(), b.oracle_text());
            assert_eq!(parse_stream(&a.stream_text()).unwrap(), a.instance);
            let o = parse_oracle(&a.oracle_text()).unwrap();
            assert_eq!(o.to_spec_string(), a.oracle.to_spec_string());
        }
    }

    #[test]
    fn seeds_change_output() {
        let a = generate(GenSpec::Coverage(RandomSpec { seed: 1, ..Default::default() })).unwrap();
        let b = generate(GenSpec::Coverage(RandomSpec { seed: 2, ..Default::default() })).unwrap();
        assert_ne!(a.stream_text(), b.stream_text());
    }

    #[test]
    fn domain_errors() {
        let bad = RandomSpec { vertices: 1, ..Default::default() };
        assert!(generate(GenSpec::Linear(bad)).is_err());
        let bad = RandomSpec { capacities: Capacities::Uniform(0), ..Default::default() };
        assert!(generate(GenSpec::Coverage(bad)).is_err());
        let bad = RandomSpec { weight_lo: 5.0, weight_hi: 1.0, ..Default::default() };
        assert!(generate(GenSpec::Coverage(bad)).is_err());
    }
}
