#include "letsne/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include "letsne/segmentation.hpp"

namespace letsne {

std::string to_string(AdjacencyMode mode) {
  switch (mode) {
    case AdjacencyMode::knn: return "knn";
    case AdjacencyMode::label: return "label";
    case AdjacencyMode::region: return "region";
  }
  return "?";
}

SparseAdjacency::SparseAdjacency(Index n, AdjacencyMode mode,
                                 const std::vector<std::pair<int, int>>& edges)
    : n_(n), mode_(mode), adj_(static_cast<size_t>(n)) {
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) {
      throw UsageError("adjacency edge index out of range");
    }
    if (i == j) throw UsageError("adjacency must have a zero diagonal");
    adj_[static_cast<size_t>(i)].push_back(j);
    adj_[static_cast<size_t>(j)].push_back(i);
  }
  for (auto& list : adj_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    edge_count_ += static_cast<Index>(list.size());
  }
  edge_count_ /= 2;
}

bool SparseAdjacency::has_edge(int i, int j) const {
  const auto& list = adj_[static_cast<size_t>(i)];
  return std::binary_search(list.begin(), list.end(), j);
}

std::vector<std::pair<int, int>> SparseAdjacency::edge_list() const {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(edge_count_));
  for (Index i = 0; i < n_; ++i) {
    for (int j : adj_[static_cast<size_t>(i)]) {
      if (j > i) edges.emplace_back(static_cast<int>(i), j);
    }
  }
  return edges;
}

SparseAdjacency knn_adjacency(const Matrix& points, int k) {
  const Index n = points.rows();
  if (k < 1 || k >= n) {
    throw UsageError("knn_adjacency: k must satisfy 1 <= k < n, got k=" + std::to_string(k) +
                     " with n=" + std::to_string(n));
  }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(n) * static_cast<size_t>(k));
  std::vector<std::pair<double, int>> cand(static_cast<size_t>(n - 1));
  for (Index i = 0; i < n; ++i) {
    size_t c = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      cand[c++] = {(points.row(i) - points.row(j)).squaredNorm(), static_cast<int>(j)};
    }
    // (distance, index) order implements the lower-index tie-break.
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int s = 0; s < k; ++s) edges.emplace_back(static_cast<int>(i), cand[static_cast<size_t>(s)].second);
  }
  return SparseAdjacency(n, AdjacencyMode::knn, edges);
}

SparseAdjacency knn_adjacency(const DataMatrix& data, int k) {
  return knn_adjacency(data.values, k);
}

namespace {

SparseAdjacency group_cliques(const std::vector<int>& group_of, AdjacencyMode mode) {
  std::map<int, std::vector<int>> groups;
  for (size_t i = 0; i < group_of.size(); ++i) {
    groups[group_of[i]].push_back(static_cast<int>(i));
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& [id, members] : groups) {
    for (size_t a = 0; a < members.size(); ++a) {
      for (size_t b = a + 1; b < members.size(); ++b) {
        edges.emplace_back(members[a], members[b]);
      }
    }
  }
  return SparseAdjacency(static_cast<Index>(group_of.size()), mode, edges);
}

}  // namespace

SparseAdjacency label_adjacency(const std::vector<int>& labels) {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      throw UsageError("label_adjacency: sample " + std::to_string(i) +
                       " is unlabelled; exclude unlabelled samples upstream");
    }
  }
  return group_cliques(labels, AdjacencyMode::label);
}

SparseAdjacency region_adjacency(const RegionMap& regions) {
  return group_cliques(regions.ids, AdjacencyMode::region);
}

SparseAdjacency restrict_to_batch(const SparseAdjacency& adj, const std::vector<int>& batch) {
  std::vector<int> position(static_cast<size_t>(adj.size()), -1);
  for (size_t b = 0; b < batch.size(); ++b) {
    const int idx = batch[b];
    if (idx < 0 || idx >= adj.size()) throw UsageError("restrict_to_batch: index out of range");
    if (position[static_cast<size_t>(idx)] != -1) {
      throw UsageError("restrict_to_batch: duplicate index " + std::to_string(idx));
    }
    position[static_cast<size_t>(idx)] = static_cast<int>(b);
  }
  std::vector<std::pair<int, int>> edges;
  for (size_t b = 0; b < batch.size(); ++b) {
    for (int j : adj.neighbors(batch[b])) {
      const int pj = position[static_cast<size_t>(j)];
      if (pj > static_cast<int>(b)) edges.emplace_back(static_cast<int>(b), pj);
    }
  }
  return SparseAdjacency(static_cast<Index>(batch.size()), adj.mode(), edges);
}

double laplacian_quadratic(const SparseAdjacency& adj, const Matrix& Y) {
  if (adj.size() != Y.rows()) {
    throw UsageError("laplacian_quadratic: adjacency size " + std::to_string(adj.size()) +
                     " != embedding rows " + std::to_string(Y.rows()));
  }
  double total = 0.0;
  for (Index i = 0; i < adj.size(); ++i) {
    for (int j : adj.neighbors(static_cast<int>(i))) {
      if (j > i) total += (Y.row(i) - Y.row(j)).squaredNorm();
    }
  }
  return total;
}

void save_adjacency(const SparseAdjacency& adj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for write: " + path);
  for (const auto& [i, j] : adj.edge_list()) {
    out << i << ',' << j << '\n';
  }
}

SparseAdjacency load_adjacency(const std::string& path, Index n, AdjacencyMode mode) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open adjacency file: " + path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'i,j'");
    }
    try {
      edges.emplace_back(std::stoi(line.substr(0, comma)), std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected 'i,j'");
    }
  }
  return SparseAdjacency(n, mode, edges);
}

}  // namespace letsne
