#pragma once

#include <string>
#include <utility>
#include <vector>

#include "letsne/common.hpp"
#include "letsne/data.hpp"

namespace letsne {

struct RegionMap;  // segmentation.hpp

enum class AdjacencyMode { knn, label, region };

std::string to_string(AdjacencyMode mode);

/// Symmetric 0/1 neighbor structure with a zero diagonal, stored as sorted
/// per-node neighbor lists. Immutable after construction.
class SparseAdjacency {
public:
  /// Takes directed or undirected pairs; stores the symmetric closure and
  /// rejects self-loops and out-of-range indices.
  SparseAdjacency(Index n, AdjacencyMode mode,
                  const std::vector<std::pair<int, int>>& edges);

  Index size() const { return n_; }
  AdjacencyMode mode() const { return mode_; }
  const std::vector<int>& neighbors(int i) const { return adj_[static_cast<size_t>(i)]; }
  Index degree(int i) const { return static_cast<Index>(adj_[static_cast<size_t>(i)].size()); }
  bool has_edge(int i, int j) const;
  Index edge_count() const { return edge_count_; }  // undirected edges

  /// Sorted undirected edge list, each pair once with i < j.
  std::vector<std::pair<int, int>> edge_list() const;

private:
  Index n_ = 0;
  Index edge_count_ = 0;
  AdjacencyMode mode_;
  std::vector<std::vector<int>> adj_;
};

/// Exact brute-force kNN under Euclidean distance, symmetrized by union.
/// Distance ties break toward the lower sample index.
SparseAdjacency knn_adjacency(const Matrix& points, int k);
SparseAdjacency knn_adjacency(const DataMatrix& data, int k);

/// Edge (i, j) iff labels match, i != j. Every sample must carry a real label.
SparseAdjacency label_adjacency(const std::vector<int>& labels);

/// Edge (i, j) iff the pixels share a region id.
SparseAdjacency region_adjacency(const RegionMap& regions);

/// Induced subgraph on `batch`, relabelled 0..m-1 in batch order.
SparseAdjacency restrict_to_batch(const SparseAdjacency& adj, const std::vector<int>& batch);

/// Y^T L Y summed over embedding columns: the sum of ||y_i - y_j||^2 over
/// undirected edges. Zero iff Y is constant on every connected component.
double laplacian_quadratic(const SparseAdjacency& adj, const Matrix& Y);

/// Diagnostics dump: sorted "i,j" lines, one per undirected edge.
void save_adjacency(const SparseAdjacency& adj, const std::string& path);
SparseAdjacency load_adjacency(const std::string& path, Index n, AdjacencyMode mode);

}  // namespace letsne
