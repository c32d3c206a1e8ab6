use crate::error::{Error, Result};

/// Vertex-to-block assignment with compact block ids `0..num_blocks`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignment: Vec<usize>,
    num_blocks: usize,
}

impl Partition {
    /// Validates that every block id in `0..=max` is used.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let num_blocks = assignment.iter().max().map_or(0, |&m| m + 1);
        let mut used = vec![false; num_blocks];
        for &b in &assignment {
            used[b] = true;
        }
        if let Some(gap) = used.iter().position(|&u| !u) {
            return Err(Error::invalid(format!("block {gap} is empty")));
        }
        Ok(Partition {
            assignment,
            num_blocks,
        })
    }

    /// Compacts arbitrary labels, keeping the relative order of label values.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut distinct: Vec<usize> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let assignment = labels
            .iter()
            .map(|l| distinct.binary_search(l).expect("label present"))
            .collect();
        Partition {
            assignment,
            num_blocks: distinct.len(),
        }
    }

    pub fn singleton(n: usize) -> Self {
        Partition {
            assignment: (0..n).collect(),
            num_blocks: n,
        }
    }

    pub fn single_block(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            num_blocks: usize::from(n > 0),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn into_assignment(self) -> Vec<usize> {
        self.assignment
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    /// Reassigns `v`; the caller keeps every block non-empty.
    pub(crate) fn set_block(&mut self, v: usize, b: usize) {
        debug_assert!(b < self.num_blocks);
        self.assignment[v] = b;
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_blocks];
        for &b in &self.assignment {
            sizes[b] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_blocks];
        for (v, &b) in self.assignment.iter().enumerate() {
            members[b].push(v);
        }
        members
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_gaps() {
        assert!(Partition::new(vec![0, 2, 2]).is_err());
        let p = Partition::new(vec![1, 0, 1]).unwrap();
        assert_eq!(p.num_blocks(), 2);
        assert_eq!(p.block_sizes(), vec![1, 2]);
    }

    #[test]
    fn compacts_in_label_order() {
        let p = Partition::from_labels(&[7, 3, 7, 9]);
        assert_eq!(p.assignment(), &[1, 0, 1, 2]);
        assert_eq!(Partition::single_block(0).num_blocks(), 0);
    }
}
