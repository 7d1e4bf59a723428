//! The eight graph families used in the simulations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::edges::EdgeSet;
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, rng, Rng};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum GraphFamily {
    Chain,
    Loop,
    /// Non-hub nodes are dealt round-robin to `hubs` hubs; one hub gives the
    /// classic star with a degree `p − 1` centre.
    Star {
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        hubs: usize,
    },
    /// Complete binary tree in heap order.
    Tree,
    /// Connect pairs closer than `r`; positions uniform on the unit square
    /// unless given.
    Spatial {
        r: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        positions: Option<Vec<[f64; 2]>>,
    },
    ErdosRenyi {
        pi: f64,
    },
    /// `p0` initial nodes joined in a path, then one preferential edge per new node.
    BarabasiAlbert {
        p0: usize,
    },
    /// Each pair is an edge with probability `exp(−a·D_ij)`.
    SpatialRandom {
        a: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        positions: Option<Vec<[f64; 2]>>,
    },
}

#[cfg(feature = "serde")]
fn one() -> usize {
    1
}

impl GraphFamily {
    pub fn name(&self) -> String {
        match self {
            GraphFamily::Chain => "chain".into(),
            GraphFamily::Loop => "loop".into(),
            GraphFamily::Star { hubs } => format!("star(hubs={hubs})"),
            GraphFamily::Tree => "tree".into(),
            GraphFamily::Spatial { r, .. } => format!("spatial(r={r})"),
            GraphFamily::ErdosRenyi { pi } => format!("erdos_renyi(pi={pi})"),
            GraphFamily::BarabasiAlbert { p0 } => format!("barabasi_albert(p0={p0})"),
            GraphFamily::SpatialRandom { a, .. } => format!("spatial_random(a={a})"),
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let bad = |msg: String| Err(invalid(msg));
        match self {
            GraphFamily::Loop if p < 3 => bad(format!("a loop needs p ≥ 3, got {p}")),
            GraphFamily::Star { hubs } if *hubs == 0 || *hubs >= p => {
                bad(format!("star hub count must lie in [1, p), got {hubs}"))
            }
            GraphFamily::Spatial { r, positions } => {
                if !(*r > 0.0 && r.is_finite()) {
                    return bad(format!("radius must be positive, got {r}"));
                }
                check_positions(positions.as_deref(), p)
            }
            GraphFamily::ErdosRenyi { pi } if !(0.0..=1.0).contains(pi) => {
                bad(format!("edge probability must lie in [0, 1], got {pi}"))
            }
            GraphFamily::BarabasiAlbert { p0 } if *p0 == 0 || *p0 >= p => {
                bad(format!("initial node count must lie in [1, p), got {p0}"))
            }
            GraphFamily::SpatialRandom { a, positions } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return bad(format!("decay must be positive, got {a}"));
                }
                check_positions(positions.as_deref(), p)
            }
            _ => Ok(()),
        }
    }
}

fn check_positions(positions: Option<&[[f64; 2]]>, p: usize) -> Result<()> {
    match positions {
        Some(w) if w.len() != p => Err(invalid(format!("expected {p} positions, got {}", w.len()))),
        Some(w) if w.iter().flatten().any(|x| !x.is_finite()) => Err(invalid("positions must be finite")),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphModelSpec {
    pub family: GraphFamily,
    pub p: usize,
    pub seed: u64,
}

/// Draws the edge set of `spec`; a pure function of the spec.
pub fn generate_graph(spec: &GraphModelSpec) -> Result<EdgeSet> {
    let p = spec.p;
    if p < 2 {
        return Err(invalid(format!("need p ≥ 2, got {p}")));
    }
    spec.family.validate(p)?;
    let mut r = rng(spec.seed);
    let mut e = EdgeSet::new(p);
    match &spec.family {
        GraphFamily::Chain => {
            for i in 1..p {
                e.insert(i - 1, i)?;
            }
        }
        GraphFamily::Loop => {
            for i in 1..p {
                e.insert(i - 1, i)?;
            }
            e.insert(0, p - 1)?;
        }
        GraphFamily::Star { hubs } => {
            for j in *hubs..p {
                e.insert(j % hubs, j)?;
            }
        }
        GraphFamily::Tree => {
            for i in 1..p {
                e.insert((i - 1) / 2, i)?;
            }
        }
        GraphFamily::Spatial { r: radius, positions } => {
            let w = positions.clone().unwrap_or_else(|| uniform_positions(p, spec.seed));
            for i in 0..p {
                for j in (i + 1)..p {
                    if dist(w[i], w[j]) < *radius {
                        e.insert(i, j)?;
                    }
                }
            }
        }
        GraphFamily::ErdosRenyi { pi } => {
            for i in 0..p {
                for j in (i + 1)..p {
                    if r.random::<f64>() < *pi {
                        e.insert(i, j)?;
                    }
                }
            }
        }
        GraphFamily::BarabasiAlbert { p0 } => {
            let mut deg = alloc::vec![0usize; p];
            for i in 1..*p0 {
                e.insert(i - 1, i)?;
                deg[i - 1] += 1;
                deg[i] += 1;
            }
            for t in *p0..p {
                let total: usize = deg[..t].iter().sum();
                let target = if total == 0 {
                    r.random_range(0..t)
                } else {
                    let mut u = r.random_range(0..total);
                    let mut k = 0;
                    while u >= deg[k] {
                        u -= deg[k];
                        k += 1;
                    }
                    k
                };
                e.insert(target, t)?;
                deg[target] += 1;
                deg[t] += 1;
            }
        }
        GraphFamily::SpatialRandom { a, positions } => {
            let w = positions.clone().unwrap_or_else(|| uniform_positions(p, spec.seed));
            for i in 0..p {
                for j in (i + 1)..p {
                    if r.random::<f64>() < libm::exp(-a * dist(w[i], w[j])) {
                        e.insert(i, j)?;
                    }
                }
            }
        }
    }
    Ok(e)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// Positions uniform on `[0, 1]²`, drawn from their own stream so that
/// spatial-random edges and positions do not share randomness.
pub fn uniform_positions(p: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut r: Rng = rng(derive_seed(seed, &[0x9051]));
    (0..p).map(|_| [r.random::<f64>(), r.random::<f64>()]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: GraphFamily, p: usize, seed: u64) -> GraphModelSpec {
        GraphModelSpec { family, p, seed }
    }

    fn connected(e: &EdgeSet) -> bool {
        let p = e.p();
        let mut adj = alloc::vec![Vec::new(); p];
        for (i, j) in e.iter() {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = alloc::vec![false; p];
        let mut stack = alloc::vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn deterministic_families() {
        let chain = generate_graph(&spec(GraphFamily::Chain, 4, 0)).unwrap();
        assert_eq!(chain.iter().collect::<Vec<_>>(), [(0, 1), (1, 2), (2, 3)]);
        assert_eq!(chain.max_degree(), 2);

        let lp = generate_graph(&spec(GraphFamily::Loop, 6, 0)).unwrap();
        assert_eq!(lp.len(), 6);
        assert!(lp.degrees().iter().all(|&d| d == 2));

        let star = generate_graph(&spec(GraphFamily::Star { hubs: 1 }, 7, 0)).unwrap();
        assert_eq!(star.degrees()[0], 6);
        assert_eq!(star.len(), 6);
        let two = generate_graph(&spec(GraphFamily::Star { hubs: 2 }, 8, 0)).unwrap();
        assert_eq!(&two.degrees()[..2], &[3, 3]);

        let tree = generate_graph(&spec(GraphFamily::Tree, 15, 0)).unwrap();
        assert_eq!(tree.len(), 14);
        assert_eq!(tree.max_degree(), 3);
        assert!(connected(&tree));
    }

    #[test]
    fn spatial_with_given_positions() {
        let w = alloc::vec![[0.0, 0.0], [0.1, 0.0], [0.5, 0.0], [0.55, 0.05]];
        let g = generate_graph(&spec(GraphFamily::Spatial { r: 0.2, positions: Some(w) }, 4, 0)).unwrap();
        assert_eq!(g.iter().collect::<Vec<_>>(), [(0, 1), (2, 3)]);
    }

    #[test]
    fn erdos_renyi_mean_degree() {
        let mut total = 0.0;
        for seed in 0..50 {
            let g = generate_graph(&spec(GraphFamily::ErdosRenyi { pi: 0.05 }, 100, seed)).unwrap();
            total += 2.0 * g.len() as f64 / 100.0;
        }
        let mean = total / 50.0;
        assert!((4.0..=6.0).contains(&mean), "mean degree {mean}");
    }

    #[test]
    fn barabasi_albert_is_a_heavy_tailed_tree() {
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let g = generate_graph(&spec(GraphFamily::BarabasiAlbert { p0: 1 }, 100, seed)).unwrap();
            assert_eq!(g.len(), 99);
            assert!(connected(&g));
            let mut d = g.degrees();
            d.sort_unstable();
            ratios.push(d[99] as f64 / d[50] as f64);
        }
        assert!(ratios.iter().all(|&r| r >= 3.0), "{ratios:?}");
    }

    #[test]
    fn spatial_random_decay_thins_edges() {
        let dense = generate_graph(&spec(GraphFamily::SpatialRandom { a: 1.0, positions: None }, 40, 3)).unwrap();
        let sparse = generate_graph(&spec(GraphFamily::SpatialRandom { a: 20.0, positions: None }, 40, 3)).unwrap();
        assert!(sparse.len() < dense.len());
    }

    #[test]
    fn seeds_reproduce() {
        let s = spec(GraphFamily::ErdosRenyi { pi: 0.1 }, 30, 11);
        assert_eq!(generate_graph(&s).unwrap(), generate_graph(&s).unwrap());
    }

    #[test]
    fn illegal_parameters() {
        for (f, p) in [
            (GraphFamily::ErdosRenyi { pi: 1.5 }, 10),
            (GraphFamily::BarabasiAlbert { p0: 10 }, 10),
            (GraphFamily::Spatial { r: 0.0, positions: None }, 10),
            (GraphFamily::SpatialRandom { a: -1.0, positions: None }, 10),
            (GraphFamily::Star { hubs: 0 }, 10),
            (GraphFamily::Loop, 2),
            (GraphFamily::Chain, 1),
        ] {
            assert!(generate_graph(&spec(f, p, 0)).is_err());
        }
    }
}
