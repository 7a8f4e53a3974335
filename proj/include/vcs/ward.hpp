#pragma once

#include <vector>

#include "vcs/vector_store.hpp"

namespace vcs {

// One agglomerative merge. Cluster ids follow the usual dendrogram
// convention: leaves are 0..N-1, the t-th merge creates cluster N+t.
// distance is the within-cluster variance increase of the merge.
struct ClusterMerge {
    int a = 0;
    int b = 0;  // a < b
    double distance = 0.0;
    int merged_id = 0;
};

struct ClusterTree {
    int leaves = 0;
    std::vector<ClusterMerge> merges;  // length leaves-1
};

struct WardResult {
    ClusterTree tree;
    std::vector<int> assignment;  // row -> cluster label in [0, k)
};

// Ward's-method agglomerative clustering via the Lance-Williams update.
// The full merge tree is always built; the assignment is the k-cluster cut.
// Ties between candidate merges break on the smallest (a, b) cluster-id pair,
// so the sequence is deterministic.
WardResult ward_cluster(const VectorStore& vectors, int k);

// Cut of the tree at k clusters; labels are assigned in order of each
// cluster's smallest leaf index.
std::vector<int> cut_assignment(const ClusterTree& tree, int k);

}  // namespace vcs
