#include "vcs/ward.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "vcs/error.hpp"

namespace vcs {

namespace {

// Candidate comparison: distance first, then the (min id, max id) pair.
struct Candidate {
    double d = std::numeric_limits<double>::infinity();
    int id_a = 0;
    int id_b = 0;

    bool better_than(const Candidate& o) const {
        if (d != o.d) return d < o.d;
        if (id_a != o.id_a) return id_a < o.id_a;
        return id_b < o.id_b;
    }
};

Candidate make_candidate(double d, int id_x, int id_y) {
    Candidate c;
    c.d = d;
    c.id_a = std::min(id_x, id_y);
    c.id_b = std::max(id_x, id_y);
    return c;
}

}  // namespace

WardResult ward_cluster(const VectorStore& vectors, int k) {
    validate_store(vectors, "ward input");
    const size_t n = vectors.count();
    if (n == 0) throw Error::validation("ward_cluster: empty vector store");
    if (k < 1 || size_t(k) > n)
        throw Error::validation("ward_cluster: k must be in [1, " + std::to_string(n) + "], got " +
                                std::to_string(k));

    WardResult result;
    result.tree.leaves = int(n);

    if (n > 1) {
        // Pairwise variance increases in a dense slot matrix. Slot i keeps the
        // most recent cluster that absorbed leaf-slot i; the other slot dies.
        std::vector<double> dist(n * n, 0.0);
        auto d = [&](size_t i, size_t j) -> double& { return dist[i * n + j]; };

        for (size_t i = 0; i < n; ++i) {
            const auto xi = vectors.row(i);
            for (size_t j = i + 1; j < n; ++j) {
                const auto xj = vectors.row(j);
                double sq = 0.0;
                for (uint32_t c = 0; c < vectors.dim; ++c) {
                    const double diff = double(xi[c]) - double(xj[c]);
                    sq += diff * diff;
                }
                d(i, j) = d(j, i) = 0.5 * sq;  // singleton variance increase
            }
        }

        std::vector<bool> active(n, true);
        std::vector<int> cluster_id(n);
        std::vector<double> cluster_size(n, 1.0);
        std::iota(cluster_id.begin(), cluster_id.end(), 0);

        // Per-slot nearest neighbor. Ward linkage is reducible, so merged
        // distances never undercut an existing row minimum; rows only need a
        // rebuild when their cached partner dies.
        std::vector<Candidate> best(n);
        std::vector<size_t> best_partner(n, 0);
        auto rebuild_row = [&](size_t i) {
            best[i] = Candidate{};
            for (size_t j = 0; j < n; ++j) {
                if (j == i || !active[j]) continue;
                const Candidate c = make_candidate(d(i, j), cluster_id[i], cluster_id[j]);
                if (c.better_than(best[i])) {
                    best[i] = c;
                    best_partner[i] = j;
                }
            }
        };
        for (size_t i = 0; i < n; ++i) rebuild_row(i);

        for (size_t step = 0; step + 1 < n; ++step) {
            size_t si = 0;
            Candidate global{};
            for (size_t i = 0; i < n; ++i) {
                if (active[i] && best[i].better_than(global)) {
                    global = best[i];
                    si = i;
                }
            }
            size_t sj = best_partner[si];
            if (!std::isfinite(global.d))
                throw Error::runtime("ward_cluster: non-finite merge distance");

            ClusterMerge merge;
            merge.a = std::min(cluster_id[si], cluster_id[sj]);
            merge.b = std::max(cluster_id[si], cluster_id[sj]);
            merge.distance = global.d;
            merge.merged_id = int(n + step);
            result.tree.merges.push_back(merge);

            // Lance-Williams update for Ward on the variance-increase scale.
            const double na = cluster_size[si], nb = cluster_size[sj];
            const double dij = d(si, sj);
            for (size_t t = 0; t < n; ++t) {
                if (!active[t] || t == si || t == sj) continue;
                const double nt = cluster_size[t];
                const double upd =
                    ((na + nt) * d(si, t) + (nb + nt) * d(sj, t) - nt * dij) / (na + nb + nt);
                d(si, t) = d(t, si) = upd;
            }
            active[sj] = false;
            cluster_size[si] = na + nb;
            cluster_id[si] = merge.merged_id;

            rebuild_row(si);
            for (size_t t = 0; t < n; ++t) {
                if (!active[t] || t == si) continue;
                if (best_partner[t] == si || best_partner[t] == sj) rebuild_row(t);
            }
        }
    }

    result.assignment = cut_assignment(result.tree, k);
    return result;
}

std::vector<int> cut_assignment(const ClusterTree& tree, int k) {
    const int n = tree.leaves;
    if (k < 1 || k > n) throw Error::validation("cut_assignment: k out of range");

    // Union-find over leaf and merged cluster ids; apply the first n-k merges.
    std::vector<int> parent(size_t(n) + tree.merges.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (int m = 0; m < n - k; ++m) {
        const auto& merge = tree.merges[size_t(m)];
        parent[find(merge.a)] = merge.merged_id;
        parent[find(merge.b)] = merge.merged_id;
    }

    // Label clusters by their smallest leaf.
    std::vector<int> label(parent.size(), -1);
    std::vector<int> assignment(static_cast<size_t>(n), -1);
    int next_label = 0;
    for (int leaf = 0; leaf < n; ++leaf) {
        const int root = find(leaf);
        if (label[root] < 0) label[root] = next_label++;
        assignment[size_t(leaf)] = label[root];
    }
    return assignment;
}

}  // namespace vcs
