//! Degree-corrected stochastic blockmodel and description-length arithmetic.

pub mod combinatorics;
mod model;
mod partition;

pub use combinatorics::{
    ln_binomial, ln_factorial, ln_multiset, restricted_partitions, LnPartitions,
    DEFAULT_PARTITION_CAP,
};
pub use model::{BlockModel, EdgeScratch, VertexEdges};
pub use partition::Partition;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Description length of `p` on `g`.
pub fn description_length(g: &Graph, p: &Partition) -> f64 {
    BlockModel::build(g, p).description_length()
}

/// Description length of the all-singletons partition, the upper reference
/// for [`quality_score`].
pub fn max_description_length(g: &Graph) -> f64 {
    description_length(g, &Partition::singleton(g.num_vertices()))
}

/// Fraction of `h_max` removed by the partition: `(h_max - h) / h_max`.
pub fn quality_score(h: f64, h_max: f64) -> f64 {
    (h_max - h) / h_max
}

/// `1 - (h - h_min) / (h_max - h_min)`; exceeds 1 when `h < h_min`.
pub fn normalized_mdl(h: f64, h_min: f64, h_max: f64) -> Result<f64> {
    if h_max == h_min {
        return Err(Error::invalid("normalized MDL needs h_max != h_min"));
    }
    Ok(1.0 - (h - h_min) / (h_max - h_min))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_endpoints() {
        assert_eq!(quality_score(10.0, 10.0), 0.0);
        assert_eq!(quality_score(0.0, 10.0), 1.0);
        assert!(quality_score(4.0, 10.0) > quality_score(5.0, 10.0));
    }

    #[test]
    fn normalized_endpoints() {
        assert_eq!(normalized_mdl(3.0, 3.0, 9.0).unwrap(), 1.0);
        assert_eq!(normalized_mdl(9.0, 3.0, 9.0).unwrap(), 0.0);
        assert_eq!(normalized_mdl(6.0, 3.0, 9.0).unwrap(), 0.5);
        assert!(normalized_mdl(2.0, 3.0, 9.0).unwrap() > 1.0);
        assert!(normalized_mdl(1.0, 3.0, 3.0).is_err());
    }
}
