//! Random node placement and single-hop link selection.

use rand::Rng;

use crate::channel::NodeId;
use crate::geometry::Position;
use crate::rng::{streams, SimRng};

/// A single-hop source-to-destination pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub source: NodeId,
    pub destination: NodeId,
    pub distance: f64,
}

/// A placed topology: every node is a source with one destination drawn
/// uniformly from its neighbors within `d_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n: usize,
    pub arena_width: f64,
    pub arena_height: f64,
    pub d_m: f64,
    pub positions: Vec<Position>,
    pub links: Vec<Link>,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("need at least two nodes")]
    TooFewNodes,
    #[error("could not place node {0} with an in-range peer after {1} retries")]
    PlacementFailed(u32, u32),
    #[error("malformed scenario: {0}")]
    Malformed(&'static str),
}

impl Scenario {
    pub fn max_link_distance(&self) -> f64 {
        self.links.iter().map(|l| l.distance).fold(0.0, f64::max)
    }

    /// Structural invariants the engines rely on: one link per source node,
    /// indexed by source id, with in-range distinct endpoints.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n < 2 {
            return Err(ScenarioError::TooFewNodes);
        }
        if self.links.len() != self.n || self.positions.len() != self.n {
            return Err(ScenarioError::Malformed(
                "one position and one link per node",
            ));
        }
        for (i, l) in self.links.iter().enumerate() {
            if l.source.index() != i || l.source == l.destination || l.destination.index() >= self.n
            {
                return Err(ScenarioError::Malformed("links must be indexed by source"));
            }
            if l.distance > self.d_m || l.distance <= 0.0 {
                return Err(ScenarioError::Malformed("link distance out of range"));
            }
        }
        Ok(())
    }
}

/// Places `n` nodes uniformly in the arena and draws each node's
/// destination uniformly among peers within `d_m`. A node with no in-range
/// peer is re-placed, up to 100 retries.
pub fn place_nodes(
    n: usize,
    arena_width: f64,
    arena_height: f64,
    d_m: f64,
    sim: &SimRng,
) -> Result<Scenario, ScenarioError> {
    if n < 2 {
        return Err(ScenarioError::TooFewNodes);
    }
    let mut rng = sim.stream(streams::PLACEMENT);
    let mut positions: Vec<Position> = (0..n)
        .map(|_| {
            Position::new(
                rng.random_range(0.0..arena_width),
                rng.random_range(0.0..arena_height),
            )
        })
        .collect();

    let in_range = |positions: &[Position], i: usize| -> Vec<usize> {
        (0..positions.len())
            .filter(|&j| j != i && positions[i].distance(&positions[j]) <= d_m)
            .collect()
    };

    const MAX_RETRIES: u32 = 100;
    for i in 0..n {
        let mut retries = 0;
        while in_range(&positions, i).is_empty() {
            retries += 1;
            if retries > MAX_RETRIES {
                return Err(ScenarioError::PlacementFailed(i as u32, MAX_RETRIES));
            }
            positions[i] = Position::new(
                rng.random_range(0.0..arena_width),
                rng.random_range(0.0..arena_height),
            );
        }
    }

    let links: Vec<Link> = (0..n)
        .map(|i| {
            let peers = in_range(&positions, i);
            let pick = peers[rng.random_range(0..peers.len())];
            Link {
                source: NodeId(i as u32),
                destination: NodeId(pick as u32),
                distance: positions[i].distance(&positions[pick]),
            }
        })
        .collect();

    Ok(Scenario {
        n,
        arena_width,
        arena_height,
        d_m,
        positions,
        links,
        seed: sim.seed(),
    })
}
