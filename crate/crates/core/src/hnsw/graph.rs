//! Fixed-capacity adjacency storage.
//!
//! Layer 0 gives every node `2M` id slots, upper layers `M` slots. A list is
//! stored as a `u32` degree followed by its slots, so reading a neighbor list
//! never chases a pointer and the storage size depends only on the node
//! levels, not on how many edges the build happened to keep.

/// Filler for unused slots, in memory and on disk.
pub(crate) const EMPTY_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Graph {
    pub m: usize,
    pub levels: Vec<u32>,
    layer0: Vec<u32>,
    upper: Vec<u32>,
    /// Start of each node's layer-1 block in `upper`.
    upper_offset: Vec<usize>,
    pub entry: u32,
    pub max_level: u32,
}

impl Graph {
    pub fn new(m: usize, levels: Vec<u32>) -> Self {
        let n = levels.len();
        let mut upper_offset = Vec::with_capacity(n);
        let mut total = 0usize;
        for &l in &levels {
            upper_offset.push(total);
            total += l as usize * (1 + m);
        }
        let empty_lists = |stride: usize, words: usize| {
            let mut buf = vec![EMPTY_SLOT; words];
            buf.iter_mut().step_by(stride).for_each(|w| *w = 0);
            buf
        };
        Self {
            m,
            layer0: empty_lists(1 + 2 * m, n * (1 + 2 * m)),
            upper: empty_lists(1 + m, total),
            upper_offset,
            levels,
            entry: 0,
            max_level: 0,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    pub fn cap(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    #[inline]
    fn block(&self, node: usize, layer: usize) -> (&[u32], usize) {
        if layer == 0 {
            let stride = 1 + 2 * self.m;
            (&self.layer0, node * stride)
        } else {
            debug_assert!(layer <= self.levels[node] as usize);
            (&self.upper, self.upper_offset[node] + (layer - 1) * (1 + self.m))
        }
    }

    #[inline]
    pub fn neighbors(&self, node: usize, layer: usize) -> &[u32] {
        let (buf, start) = self.block(node, layer);
        let deg = buf[start] as usize;
        &buf[start + 1..start + 1 + deg]
    }

    pub fn set_neighbors(&mut self, node: usize, layer: usize, ids: &[u32]) {
        let cap = self.cap(layer);
        assert!(ids.len() <= cap, "neighbor list exceeds layer cap");
        let (buf, start) = if layer == 0 {
            let stride = 1 + 2 * self.m;
            (&mut self.layer0, node * stride)
        } else {
            (&mut self.upper, self.upper_offset[node] + (layer - 1) * (1 + self.m))
        };
        buf[start] = ids.len() as u32;
        buf[start + 1..start + 1 + ids.len()].copy_from_slice(ids);
        buf[start + 1 + ids.len()..start + 1 + cap].fill(EMPTY_SLOT);
    }

    /// Appends `id` if there is a free slot; returns `false` when full.
    pub fn try_push(&mut self, node: usize, layer: usize, id: u32) -> bool {
        let deg = self.neighbors(node, layer).len();
        if deg >= self.cap(layer) {
            return false;
        }
        let start = if layer == 0 {
            node * (1 + 2 * self.m)
        } else {
            self.upper_offset[node] + (layer - 1) * (1 + self.m)
        };
        let buf = if layer == 0 { &mut self.layer0 } else { &mut self.upper };
        buf[start + 1 + deg] = id;
        buf[start] = deg as u32 + 1;
        true
    }

    /// Number of `u32` words in the serialized adjacency of all nodes.
    #[cfg(test)]
    pub fn adjacency_words(&self) -> usize {
        self.layer0.len() + self.upper.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_are_independent() {
        let mut g = Graph::new(2, vec![0, 2, 1]);
        assert_eq!(g.adjacency_words(), 3 * 5 + 2 * 3 + 3);
        g.set_neighbors(1, 0, &[0, 2]);
        g.set_neighbors(1, 2, &[2]);
        assert!(g.try_push(2, 1, 1));
        assert!(g.try_push(2, 1, 0));
        assert!(!g.try_push(2, 1, 0));
        assert_eq!(g.neighbors(1, 0), &[0, 2]);
        assert_eq!(g.neighbors(1, 1), &[] as &[u32]);
        assert_eq!(g.neighbors(1, 2), &[2]);
        assert_eq!(g.neighbors(2, 1), &[1, 0]);
        assert_eq!(g.neighbors(0, 0), &[] as &[u32]);
    }
}
