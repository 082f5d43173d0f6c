use crate::bits::{words_for, BitMatrix};
use crate::model::{
    gamma_row_into, BinaryDataMatrix, FeatureCounts, LatentStateMatrix, QMatrix, Rule,
};
use crate::partition::Partition;

/// A group of subjects that always moves together: a must-link block, or a
/// single subject when no partial clustering is given.
#[derive(Clone, Debug)]
pub struct Unit {
    pub subjects: Vec<usize>,
    pub counts: FeatureCounts,
}

impl Unit {
    pub fn size(&self) -> usize {
        self.subjects.len()
    }
}

#[derive(Clone, Debug)]
pub struct Cluster {
    pub units: Vec<usize>,
    pub counts: FeatureCounts,
    pub eta: Vec<bool>,
    /// Cached log g; NaN when stale.
    pub(crate) log_g: f64,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.counts.size as usize
    }
}

/// Cluster assignments with per-cluster sufficient counts and state vectors.
#[derive(Clone, Debug)]
pub struct ClusterState {
    n: usize,
    units: Vec<Unit>,
    unit_of: Vec<usize>,
    assign: Vec<usize>,
    clusters: Vec<Cluster>,
}

impl ClusterState {
    /// Units are the blocks of `must_link` (singletons when `None`); the
    /// initial clusters are those blocks when `split_start`, else one cluster.
    pub fn new(
        y: &BinaryDataMatrix,
        must_link: Option<&Partition>,
        split_start: bool,
        m: usize,
    ) -> Self {
        let n = y.n_subjects();
        let blocks = match must_link {
            Some(p) => p.blocks(),
            None => (0..n).map(|i| vec![i]).collect(),
        };
        let units: Vec<Unit> = blocks
            .into_iter()
            .map(|subjects| Unit {
                counts: FeatureCounts::from_subjects(y, &subjects),
                subjects,
            })
            .collect();
        let mut unit_of = vec![0; n];
        for (u, unit) in units.iter().enumerate() {
            for &i in &unit.subjects {
                unit_of[i] = u;
            }
        }
        let mut st = ClusterState {
            n,
            unit_of,
            assign: vec![0; units.len()],
            units,
            clusters: Vec::new(),
        };
        if split_start {
            for u in 0..st.units.len() {
                st.new_cluster(u, vec![false; m]);
            }
        } else {
            let mut c = Cluster {
                units: Vec::new(),
                counts: FeatureCounts::zeros(y.n_features()),
                eta: vec![false; m],
                log_g: f64::NAN,
            };
            for u in 0..st.units.len() {
                c.units.push(u);
                c.counts.add(&st.units[u].counts);
            }
            st.clusters.push(c);
        }
        st
    }

    /// State with the given subject partition; each block must be a union
    /// of whole units.
    pub fn from_partition(
        y: &BinaryDataMatrix,
        must_link: Option<&Partition>,
        z: &Partition,
        m: usize,
    ) -> Self {
        let mut st = Self::new(y, must_link, false, m);
        st.clusters.clear();
        for _ in 0..z.n_blocks() {
            st.clusters.push(Cluster {
                units: Vec::new(),
                counts: FeatureCounts::zeros(y.n_features()),
                eta: vec![false; m],
                log_g: f64::NAN,
            });
        }
        for u in 0..st.units.len() {
            let b = z.labels()[st.units[u].subjects[0]];
            st.add_unit(u, b);
        }
        st
    }

    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn unit(&self, u: usize) -> &Unit {
        &self.units[u]
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster(&self, j: usize) -> &Cluster {
        &self.clusters[j]
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub(crate) fn cluster_mut(&mut self, j: usize) -> &mut Cluster {
        &mut self.clusters[j]
    }

    /// Sets the latent state vector of cluster `j`.
    pub fn set_eta(&mut self, j: usize, eta: Vec<bool>) {
        assert_eq!(eta.len(), self.n_states(), "eta has the wrong length");
        self.clusters[j].eta = eta;
    }

    pub fn unit_of_subject(&self, i: usize) -> usize {
        self.unit_of[i]
    }

    pub fn cluster_of_unit(&self, u: usize) -> usize {
        self.assign[u]
    }

    pub fn n_states(&self) -> usize {
        self.clusters.first().map_or(0, |c| c.eta.len())
    }

    /// Takes unit `u` out of its cluster. If that empties the cluster, it is
    /// removed (the last cluster takes its index) and returned.
    pub(crate) fn remove_unit(&mut self, u: usize) -> Option<Cluster> {
        let j = self.assign[u];
        let c = &mut self.clusters[j];
        let pos = c
            .units
            .iter()
            .position(|&v| v == u)
            .expect("unit in its cluster");
        c.units.swap_remove(pos);
        c.counts.sub(&self.units[u].counts);
        c.log_g = f64::NAN;
        self.assign[u] = usize::MAX;
        if c.units.is_empty() {
            Some(self.drop_cluster(j))
        } else {
            None
        }
    }

    fn drop_cluster(&mut self, j: usize) -> Cluster {
        let gone = self.clusters.swap_remove(j);
        if j < self.clusters.len() {
            for &v in &self.clusters[j].units {
                self.assign[v] = j;
            }
        }
        gone
    }

    pub(crate) fn add_unit(&mut self, u: usize, j: usize) {
        let c = &mut self.clusters[j];
        c.units.push(u);
        c.counts.add(&self.units[u].counts);
        c.log_g = f64::NAN;
        self.assign[u] = j;
    }

    pub(crate) fn new_cluster(&mut self, u: usize, eta: Vec<bool>) -> usize {
        self.clusters.push(Cluster {
            units: vec![u],
            counts: self.units[u].counts.clone(),
            eta,
            log_g: f64::NAN,
        });
        let j = self.clusters.len() - 1;
        self.assign[u] = j;
        j
    }

    /// Moves every unit of cluster `b` into cluster `a` and removes `b`.
    /// Returns the index `a` ends up at.
    pub(crate) fn merge_clusters(&mut self, a: usize, b: usize) -> usize {
        debug_assert_ne!(a, b);
        let moved = std::mem::take(&mut self.clusters[b].units);
        for &u in &moved {
            self.assign[u] = a;
        }
        let counts = self.clusters[b].counts.clone();
        let ca = &mut self.clusters[a];
        ca.units.extend(moved);
        ca.counts.add(&counts);
        ca.log_g = f64::NAN;
        self.drop_cluster(b);
        if a == self.clusters.len() {
            b
        } else {
            a
        }
    }

    pub(crate) fn invalidate(&mut self) {
        for c in &mut self.clusters {
            c.log_g = f64::NAN;
        }
    }

    /// Resizes every state vector to `m`, padding with `fill`.
    pub(crate) fn resize_states(&mut self, m: usize, fill: bool) {
        for c in &mut self.clusters {
            c.eta.resize(m, fill);
        }
    }

    /// Keeps only the listed state columns, in order.
    pub(crate) fn select_states(&mut self, keep: &[usize]) {
        for c in &mut self.clusters {
            c.eta = keep.iter().map(|&m| c.eta[m]).collect();
        }
    }

    /// Cluster index per subject.
    pub fn subject_clusters(&self) -> Vec<usize> {
        let mut z = vec![0; self.n];
        for (u, unit) in self.units.iter().enumerate() {
            for &i in &unit.subjects {
                z[i] = self.assign[u];
            }
        }
        z
    }

    /// The partition in canonical labelling and the matching H* rows.
    pub fn snapshot(&self) -> (Partition, LatentStateMatrix) {
        let z = self.subject_clusters();
        let part = Partition::from_labels(&z);
        let m = self.n_states();
        let mut order = vec![usize::MAX; part.n_blocks()];
        for (i, &b) in part.labels().iter().enumerate() {
            if order[b] == usize::MAX {
                order[b] = z[i];
            }
        }
        let bits = BitMatrix::from_fn(order.len(), m, |b, k| self.clusters[order[b]].eta[k]);
        let h = LatentStateMatrix::new(bits).expect("at least one cluster");
        (part, h)
    }

    /// Number of clusters using each state.
    pub fn state_counts(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_states()];
        for c in &self.clusters {
            for (k, &e) in c.eta.iter().enumerate() {
                s[k] += e as usize;
            }
        }
        s
    }

    /// Ideal response rows, one per cluster.
    pub fn gammas(&self, q: &QMatrix, rule: Rule) -> Vec<Vec<u64>> {
        let w = words_for(q.n_features());
        self.clusters
            .iter()
            .map(|c| {
                let mut g = vec![0u64; w];
                gamma_row_into(|m| c.eta[m], q, rule, &mut g);
                g
            })
            .collect()
    }

    /// Recounts from scratch and compares with the incremental counts, and
    /// checks the structural invariants.
    pub fn is_consistent(&self, y: &BinaryDataMatrix) -> bool {
        let mut seen = vec![false; self.units.len()];
        for (j, c) in self.clusters.iter().enumerate() {
            if c.units.is_empty() {
                return false;
            }
            let mut subjects = Vec::new();
            for &u in &c.units {
                if self.assign[u] != j || seen[u] {
                    return false;
                }
                seen[u] = true;
                subjects.extend_from_slice(&self.units[u].subjects);
            }
            if FeatureCounts::from_subjects(y, &subjects) != c.counts {
                return false;
            }
        }
        seen.iter().all(|&s| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> BinaryDataMatrix {
        BinaryDataMatrix::from_rows(&[
            vec![1u8, 0, 1],
            vec![0, 0, 1],
            vec![1, 1, 1],
            vec![0, 1, 0],
            vec![1, 1, 0],
        ])
        .unwrap()
    }

    #[test]
    fn moves_keep_counts_exact() {
        let y = data();
        let mut st = ClusterState::new(&y, None, false, 2);
        assert_eq!(st.n_clusters(), 1);
        st.remove_unit(3);
        st.new_cluster(3, vec![false; 2]);
        st.remove_unit(0);
        st.add_unit(0, 1);
        assert!(st.is_consistent(&y));
        assert!(st.remove_unit(3).is_none());
        assert!(st.remove_unit(0).is_some());
        assert_eq!(st.n_clusters(), 1);
        st.new_cluster(0, vec![true, false]);
        st.add_unit(3, 1);
        let a = st.merge_clusters(1, 0);
        assert_eq!(st.n_clusters(), 1);
        assert_eq!(a, 0);
        assert!(st.is_consistent(&y));
    }

    #[test]
    fn must_link_units_and_snapshot() {
        let y = data();
        let ml = Partition::from_labels(&[0, 0, 1, 2, 2]);
        let st = ClusterState::new(&y, Some(&ml), true, 1);
        assert_eq!(st.n_units(), 3);
        assert_eq!(st.n_clusters(), 3);
        let (p, h) = st.snapshot();
        assert_eq!(p, ml);
        assert_eq!(h.n_rows(), 3);
        assert!(st.is_consistent(&y));
    }

    #[test]
    fn from_partition_round_trips() {
        let y = data();
        for p in crate::partition::enumerate_partitions(5) {
            let st = ClusterState::from_partition(&y, None, &p, 1);
            assert_eq!(st.snapshot().0, p);
            assert!(st.is_consistent(&y));
        }
    }
}
