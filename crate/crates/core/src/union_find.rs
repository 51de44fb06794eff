//! Disjoint-set forest with union by size and path compression.

/// Each set root can carry a small payload, stored next to the forest links
/// so that a lookup touches one cache line.
#[derive(Debug, Clone)]
pub struct DisjointSet<T = ()> {
    nodes: Vec<Node<T>>,
}

#[derive(Debug, Clone, Copy)]
struct Node<T> {
    parent: u32,
    size: u32,
    data: T,
}

impl DisjointSet<()> {
    pub fn new(n: usize) -> Self {
        Self::with_data(n, ())
    }
}

impl<T: Copy> DisjointSet<T> {
    pub fn with_data(n: usize, init: T) -> Self {
        assert!(n <= u32::MAX as usize, "disjoint set limited to u32 indices");
        Self {
            nodes: (0..n as u32)
                .map(|i| Node {
                    parent: i,
                    size: 1,
                    data: init,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Iterative find with full path compression.
    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x as u32;
        while self.nodes[root as usize].parent != root {
            root = self.nodes[root as usize].parent;
        }
        let mut cur = x as u32;
        while self.nodes[cur as usize].parent != root {
            let next = self.nodes[cur as usize].parent;
            self.nodes[cur as usize].parent = root;
            cur = next;
        }
        root as usize
    }

    /// Merges the sets containing `a` and `b`; returns the new root, or `None`
    /// if they were already joined. The new root keeps its own payload.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return None;
        }
        let (big, small) = if self.nodes[ra].size >= self.nodes[rb].size {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.nodes[small].parent = big as u32;
        self.nodes[big].size += self.nodes[small].size;
        Some(big)
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.nodes[r].size as usize
    }

    /// Payload stored at `root`; only meaningful for current roots.
    pub fn data(&self, root: usize) -> T {
        self.nodes[root].data
    }

    pub fn set_data(&mut self, root: usize, data: T) {
        self.nodes[root].data = data;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singletons_then_chain() {
        let mut ds = DisjointSet::new(5);
        assert_eq!(ds.len(), 5);
        for i in 0..5 {
            assert_eq!(ds.find(i), i);
        }
        assert!(ds.union(0, 1).is_some());
        assert!(ds.union(1, 2).is_some());
        assert!(ds.union(0, 2).is_none());
        assert_eq!(ds.set_size(2), 3);
        assert_eq!(ds.find(0), ds.find(2));
        assert_ne!(ds.find(0), ds.find(3));
    }

    #[test]
    fn larger_set_keeps_root() {
        let mut ds = DisjointSet::new(4);
        ds.union(0, 1);
        ds.union(0, 2);
        let root = ds.find(0);
        assert_eq!(ds.union(3, 0), Some(root));
        assert_eq!(ds.set_size(3), 4);
    }

    #[test]
    fn payload_follows_explicit_updates() {
        let mut ds = DisjointSet::with_data(3, 0u32);
        ds.set_data(2, 7);
        let root = ds.union(1, 2).unwrap();
        let merged = ds.data(2).max(ds.data(1));
        ds.set_data(root, merged);
        let r = ds.find(1);
        assert_eq!(ds.data(r), 7);
    }
}
