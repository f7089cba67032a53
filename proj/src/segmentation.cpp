#include "letsne/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

namespace letsne {

namespace {

void check_channels(const std::vector<Matrix>& channels, int height, int width) {
  if (channels.empty()) throw UsageError("image must have at least one channel");
  for (const Matrix& ch : channels) {
    if (ch.rows() != height || ch.cols() != width) {
      throw UsageError("image channels must share one height x width shape");
    }
  }
}

/// 4-connected component labelling; returns component id per pixel and count.
std::pair<std::vector<int>, int> connected_components(const std::vector<int>& ids,
                                                      int height, int width) {
  const size_t n = static_cast<size_t>(height) * width;
  std::vector<int> comp(n, -1);
  int n_comp = 0;
  std::vector<int> stack;
  for (size_t start = 0; start < n; ++start) {
    if (comp[start] != -1) continue;
    comp[start] = n_comp;
    stack.assign(1, static_cast<int>(start));
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int r = p / width;
      const int c = p % width;
      const int nbr[4] = {r > 0 ? p - width : -1, r < height - 1 ? p + width : -1,
                          c > 0 ? p - 1 : -1, c < width - 1 ? p + 1 : -1};
      for (int q : nbr) {
        if (q >= 0 && comp[static_cast<size_t>(q)] == -1 &&
            ids[static_cast<size_t>(q)] == ids[static_cast<size_t>(p)]) {
          comp[static_cast<size_t>(q)] = n_comp;
          stack.push_back(q);
        }
      }
    }
    ++n_comp;
  }
  return {comp, n_comp};
}

/// Relabel ids to contiguous 0..R-1 by first appearance in raster order.
void relabel_contiguous(RegionMap& map) {
  std::map<int, int> remap;
  int next = 0;
  for (int& id : map.ids) {
    auto [it, inserted] = remap.emplace(id, next);
    if (inserted) ++next;
    id = it->second;
  }
  map.region_count = next;
}

struct SeedGrid {
  int nx = 1, ny = 1;
};

/// Pick a seed grid with nx*ny as close to the target as possible, preferring
/// square cells, then more seeds along the longer image axis.
SeedGrid choose_seed_grid(int target, int height, int width) {
  SeedGrid best;
  double best_count_err = std::numeric_limits<double>::infinity();
  double best_cell_err = std::numeric_limits<double>::infinity();
  for (int nx = 1; nx <= std::min(target, width); ++nx) {
    for (int ny = 1; ny <= std::min(target, height); ++ny) {
      const double count_err = std::abs(nx * ny - target);
      const double cell_err = std::abs(static_cast<double>(width) / nx -
                                       static_cast<double>(height) / ny);
      bool better = false;
      if (count_err < best_count_err) {
        better = true;
      } else if (count_err == best_count_err) {
        if (cell_err < best_cell_err) {
          better = true;
        } else if (cell_err == best_cell_err) {
          // prefer splitting the longer axis
          better = (width >= height) ? (nx > best.nx) : (ny > best.ny);
        }
      }
      if (better) {
        best = {nx, ny};
        best_count_err = count_err;
        best_cell_err = cell_err;
      }
    }
  }
  return best;
}

}  // namespace

void validate_region_map(const RegionMap& map) {
  if (map.height < 1 || map.width < 1) throw FormatError("region map needs positive dimensions");
  if (static_cast<Index>(map.ids.size()) != map.pixels()) {
    throw FormatError("region map does not cover the grid");
  }
  std::vector<Index> counts(static_cast<size_t>(map.region_count), 0);
  for (int id : map.ids) {
    if (id < 0 || id >= map.region_count) {
      throw FormatError("region id " + std::to_string(id) + " outside 0.." +
                        std::to_string(map.region_count - 1));
    }
    ++counts[static_cast<size_t>(id)];
  }
  for (size_t id = 0; id < counts.size(); ++id) {
    if (counts[id] == 0) throw FormatError("region " + std::to_string(id) + " is empty");
  }
  // One component per id means every region is 4-connected.
  auto [comp, n_comp] = connected_components(map.ids, map.height, map.width);
  if (n_comp != map.region_count) {
    std::vector<int> first_comp(static_cast<size_t>(map.region_count), -1);
    std::vector<char> split(static_cast<size_t>(map.region_count), 0);
    for (size_t p = 0; p < map.ids.size(); ++p) {
      const size_t id = static_cast<size_t>(map.ids[p]);
      if (first_comp[id] == -1) {
        first_comp[id] = comp[p];
      } else if (first_comp[id] != comp[p]) {
        split[id] = 1;
      }
    }
    for (size_t id = 0; id < split.size(); ++id) {
      if (split[id]) throw FormatError("region " + std::to_string(id) + " is not 4-connected");
    }
  }
}

RegionMap slic(const std::vector<Matrix>& channels, int target_regions,
               double compactness, int iters) {
  if (target_regions < 1) throw UsageError("slic: target_regions must be >= 1");
  if (channels.size() != 1 && channels.size() != 3) {
    throw UsageError("slic: expected 1 or 3 channels, got " + std::to_string(channels.size()));
  }
  const int height = static_cast<int>(channels[0].rows());
  const int width = static_cast<int>(channels[0].cols());
  check_channels(channels, height, width);
  const Index n = static_cast<Index>(height) * width;
  if (target_regions > n) throw UsageError("slic: more target regions than pixels");

  const size_t c = channels.size();
  const double spacing = std::sqrt(static_cast<double>(n) / target_regions);
  const SeedGrid grid = choose_seed_grid(target_regions, height, width);
  const int n_clusters = grid.nx * grid.ny;

  // Cluster state: position (row, col) and mean color.
  std::vector<double> cr(static_cast<size_t>(n_clusters)), cc(static_cast<size_t>(n_clusters));
  std::vector<std::vector<double>> ccol(static_cast<size_t>(n_clusters), std::vector<double>(c));
  for (int gy = 0; gy < grid.ny; ++gy) {
    for (int gx = 0; gx < grid.nx; ++gx) {
      const size_t k = static_cast<size_t>(gy) * grid.nx + gx;
      cr[k] = (gy + 0.5) * height / grid.ny - 0.5;
      cc[k] = (gx + 0.5) * width / grid.nx - 0.5;
      const int pr = std::clamp(static_cast<int>(std::lround(cr[k])), 0, height - 1);
      const int pc = std::clamp(static_cast<int>(std::lround(cc[k])), 0, width - 1);
      for (size_t ch = 0; ch < c; ++ch) ccol[k][ch] = channels[ch](pr, pc);
    }
  }

  std::vector<int> assign(static_cast<size_t>(n), 0);
  std::vector<double> best_d(static_cast<size_t>(n));
  const double pos_weight = compactness / spacing;
  for (int it = 0; it < std::max(1, iters); ++it) {
    std::fill(best_d.begin(), best_d.end(), std::numeric_limits<double>::infinity());
    for (int k = 0; k < n_clusters; ++k) {
      const int r0 = std::max(0, static_cast<int>(std::floor(cr[static_cast<size_t>(k)] - spacing)));
      const int r1 = std::min(height - 1, static_cast<int>(std::ceil(cr[static_cast<size_t>(k)] + spacing)));
      const int c0 = std::max(0, static_cast<int>(std::floor(cc[static_cast<size_t>(k)] - spacing)));
      const int c1 = std::min(width - 1, static_cast<int>(std::ceil(cc[static_cast<size_t>(k)] + spacing)));
      for (int r = r0; r <= r1; ++r) {
        for (int col = c0; col <= c1; ++col) {
          const size_t p = static_cast<size_t>(r) * width + col;
          double d_color2 = 0.0;
          for (size_t ch = 0; ch < c; ++ch) {
            const double diff = channels[ch](r, col) - ccol[static_cast<size_t>(k)][ch];
            d_color2 += diff * diff;
          }
          const double dr = r - cr[static_cast<size_t>(k)];
          const double dc = col - cc[static_cast<size_t>(k)];
          const double d = std::sqrt(d_color2) + pos_weight * std::sqrt(dr * dr + dc * dc);
          if (d < best_d[p]) {
            best_d[p] = d;
            assign[p] = k;
          }
        }
      }
    }
    // Pixels outside every window (possible when the seed grid is sparse)
    // fall back to the nearest cluster by the same metric.
    for (Index p = 0; p < n; ++p) {
      if (std::isinf(best_d[static_cast<size_t>(p)])) {
        const int r = static_cast<int>(p) / width;
        const int col = static_cast<int>(p) % width;
        for (int k = 0; k < n_clusters; ++k) {
          double d_color2 = 0.0;
          for (size_t ch = 0; ch < c; ++ch) {
            const double diff = channels[ch](r, col) - ccol[static_cast<size_t>(k)][ch];
            d_color2 += diff * diff;
          }
          const double dr = r - cr[static_cast<size_t>(k)];
          const double dc = col - cc[static_cast<size_t>(k)];
          const double d = std::sqrt(d_color2) + pos_weight * std::sqrt(dr * dr + dc * dc);
          if (d < best_d[static_cast<size_t>(p)]) {
            best_d[static_cast<size_t>(p)] = d;
            assign[static_cast<size_t>(p)] = k;
          }
        }
      }
    }

    // Update centers.
    std::vector<Index> count(static_cast<size_t>(n_clusters), 0);
    std::vector<double> sum_r(static_cast<size_t>(n_clusters), 0), sum_c(static_cast<size_t>(n_clusters), 0);
    std::vector<std::vector<double>> sum_col(static_cast<size_t>(n_clusters), std::vector<double>(c, 0));
    for (Index p = 0; p < n; ++p) {
      const size_t k = static_cast<size_t>(assign[static_cast<size_t>(p)]);
      ++count[k];
      sum_r[k] += static_cast<double>(p / width);
      sum_c[k] += static_cast<double>(p % width);
      for (size_t ch = 0; ch < c; ++ch) {
        sum_col[k][ch] += channels[ch](static_cast<int>(p) / width, static_cast<int>(p) % width);
      }
    }
    for (size_t k = 0; k < static_cast<size_t>(n_clusters); ++k) {
      if (count[k] == 0) continue;  // empty cluster keeps its center
      cr[k] = sum_r[k] / static_cast<double>(count[k]);
      cc[k] = sum_c[k] / static_cast<double>(count[k]);
      for (size_t ch = 0; ch < c; ++ch) sum_col[k][ch] /= static_cast<double>(count[k]);
      ccol[k] = sum_col[k];
    }
  }

  // Connectivity repair: each cluster keeps its largest fragment; every other
  // fragment is absorbed into the largest adjacent fragment, smallest first.
  auto [comp, n_comp] = connected_components(assign, height, width);
  std::vector<Index> comp_size(static_cast<size_t>(n_comp), 0);
  std::vector<int> comp_cluster(static_cast<size_t>(n_comp), -1);
  for (Index p = 0; p < n; ++p) {
    ++comp_size[static_cast<size_t>(comp[static_cast<size_t>(p)])];
    comp_cluster[static_cast<size_t>(comp[static_cast<size_t>(p)])] = assign[static_cast<size_t>(p)];
  }
  std::vector<int> keeper(static_cast<size_t>(n_clusters), -1);
  for (int cidx = 0; cidx < n_comp; ++cidx) {
    const int k = comp_cluster[static_cast<size_t>(cidx)];
    if (keeper[static_cast<size_t>(k)] == -1 ||
        comp_size[static_cast<size_t>(cidx)] > comp_size[static_cast<size_t>(keeper[static_cast<size_t>(k)])]) {
      keeper[static_cast<size_t>(k)] = cidx;
    }
  }
  // Union-find over components; orphans merge into their largest neighbor.
  std::vector<int> parent(static_cast<size_t>(n_comp));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  std::vector<std::set<int>> comp_adj(static_cast<size_t>(n_comp));
  for (int r = 0; r < height; ++r) {
    for (int col = 0; col < width; ++col) {
      const size_t p = static_cast<size_t>(r) * width + col;
      if (col + 1 < width && comp[p] != comp[p + 1]) {
        comp_adj[static_cast<size_t>(comp[p])].insert(comp[p + 1]);
        comp_adj[static_cast<size_t>(comp[p + 1])].insert(comp[p]);
      }
      if (r + 1 < height && comp[p] != comp[p + static_cast<size_t>(width)]) {
        comp_adj[static_cast<size_t>(comp[p])].insert(comp[p + static_cast<size_t>(width)]);
        comp_adj[static_cast<size_t>(comp[p + static_cast<size_t>(width)])].insert(comp[p]);
      }
    }
  }
  std::vector<int> orphans;
  for (int cidx = 0; cidx < n_comp; ++cidx) {
    if (keeper[static_cast<size_t>(comp_cluster[static_cast<size_t>(cidx)])] != cidx) orphans.push_back(cidx);
  }
  std::sort(orphans.begin(), orphans.end(), [&](int a, int b) {
    if (comp_size[static_cast<size_t>(a)] != comp_size[static_cast<size_t>(b)]) {
      return comp_size[static_cast<size_t>(a)] < comp_size[static_cast<size_t>(b)];
    }
    return a < b;
  });
  for (int orphan : orphans) {
    int best = -1;
    Index best_size = -1;
    for (int nbr : comp_adj[static_cast<size_t>(orphan)]) {
      const int root = find(nbr);
      if (root == find(orphan)) continue;
      if (comp_size[static_cast<size_t>(root)] > best_size) {
        best_size = comp_size[static_cast<size_t>(root)];
        best = root;
      }
    }
    if (best < 0) continue;  // isolated orphan chain end, resolved by an earlier merge
    const int root_o = find(orphan);
    parent[static_cast<size_t>(root_o)] = best;
    comp_size[static_cast<size_t>(best)] += comp_size[static_cast<size_t>(root_o)];
    // Merge adjacency so later orphans see the union.
    auto moved = std::move(comp_adj[static_cast<size_t>(root_o)]);
    comp_adj[static_cast<size_t>(best)].insert(moved.begin(), moved.end());
  }

  RegionMap map;
  map.height = height;
  map.width = width;
  map.ids.resize(static_cast<size_t>(n));
  for (Index p = 0; p < n; ++p) {
    map.ids[static_cast<size_t>(p)] = find(comp[static_cast<size_t>(p)]);
  }
  relabel_contiguous(map);
  validate_region_map(map);
  return map;
}

RegionMap merge_regions(const RegionMap& map, const std::vector<Matrix>& channels,
                        double threshold) {
  if (threshold < 0.0) throw UsageError("merge_regions: threshold must be >= 0");
  check_channels(channels, map.height, map.width);
  validate_region_map(map);

  const size_t c = channels.size();
  const int R = map.region_count;
  std::vector<Vector> mean(static_cast<size_t>(R), Vector::Zero(static_cast<Index>(c)));
  std::vector<Index> size(static_cast<size_t>(R), 0);
  for (int r = 0; r < map.height; ++r) {
    for (int col = 0; col < map.width; ++col) {
      const size_t id = static_cast<size_t>(map.id_at(r, col));
      ++size[id];
      for (size_t ch = 0; ch < c; ++ch) mean[id](static_cast<Index>(ch)) += channels[ch](r, col);
    }
  }
  for (int id = 0; id < R; ++id) mean[static_cast<size_t>(id)] /= static_cast<double>(size[static_cast<size_t>(id)]);

  std::vector<std::set<int>> adj(static_cast<size_t>(R));
  for (int r = 0; r < map.height; ++r) {
    for (int col = 0; col < map.width; ++col) {
      const int id = map.id_at(r, col);
      if (col + 1 < map.width && map.id_at(r, col + 1) != id) {
        adj[static_cast<size_t>(id)].insert(map.id_at(r, col + 1));
        adj[static_cast<size_t>(map.id_at(r, col + 1))].insert(id);
      }
      if (r + 1 < map.height && map.id_at(r + 1, col) != id) {
        adj[static_cast<size_t>(id)].insert(map.id_at(r + 1, col));
        adj[static_cast<size_t>(map.id_at(r + 1, col))].insert(id);
      }
    }
  }

  std::vector<int> alias(static_cast<size_t>(R));
  std::iota(alias.begin(), alias.end(), 0);
  auto find = [&](int x) {
    while (alias[static_cast<size_t>(x)] != x) {
      alias[static_cast<size_t>(x)] = alias[static_cast<size_t>(alias[static_cast<size_t>(x)])];
      x = alias[static_cast<size_t>(x)];
    }
    return x;
  };

  while (true) {
    double best_d = std::numeric_limits<double>::infinity();
    int best_a = -1, best_b = -1;
    for (int a = 0; a < R; ++a) {
      if (find(a) != a) continue;
      for (int b : adj[static_cast<size_t>(a)]) {
        if (b <= a || find(b) != b) continue;
        const double d = (mean[static_cast<size_t>(a)] - mean[static_cast<size_t>(b)]).norm();
        if (d < best_d || (d == best_d && (best_a == -1 || a < best_a || (a == best_a && b < best_b)))) {
          best_d = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a < 0 || !(best_d < threshold)) break;
    // Merge b into a: weighted mean, union of adjacencies.
    const size_t a = static_cast<size_t>(best_a), b = static_cast<size_t>(best_b);
    mean[a] = (mean[a] * static_cast<double>(size[a]) + mean[b] * static_cast<double>(size[b])) /
              static_cast<double>(size[a] + size[b]);
    size[a] += size[b];
    alias[b] = best_a;
    for (int nbr : adj[b]) {
      if (find(nbr) == best_a) continue;
      adj[a].insert(nbr);
      adj[static_cast<size_t>(nbr)].insert(best_a);
    }
    adj[a].erase(best_b);
    // Drop stale aliases so the scan above only sees roots.
    std::set<int> cleaned;
    for (int nbr : adj[a]) {
      const int root = find(nbr);
      if (root != best_a) cleaned.insert(root);
    }
    adj[a] = std::move(cleaned);
  }

  RegionMap out;
  out.height = map.height;
  out.width = map.width;
  out.ids.resize(map.ids.size());
  for (size_t p = 0; p < map.ids.size(); ++p) out.ids[p] = find(map.ids[p]);
  relabel_contiguous(out);
  validate_region_map(out);
  return out;
}

RegionMap load_region_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open region map: " + path);
  RegionMap map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == EOF) break;
    std::stringstream ss(line);
    std::string cell;
    int row_width = 0;
    while (std::getline(ss, cell, ',')) {
      size_t used = 0;
      int id = 0;
      try {
        id = std::stoi(cell, &used);
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": non-integer cell '" + cell + "'");
      }
      if (used != cell.size() || id < 0) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": bad region id '" + cell + "'");
      }
      map.ids.push_back(id);
      ++row_width;
    }
    if (map.width == 0) {
      map.width = row_width;
    } else if (row_width != map.width) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": ragged row, expected " +
                        std::to_string(map.width) + " cells");
    }
    ++map.height;
  }
  if (map.height == 0 || map.width == 0) throw FormatError(path + ": empty region map");
  relabel_contiguous(map);
  validate_region_map(map);
  return map;
}

void save_region_map(const RegionMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for write: " + path);
  for (int r = 0; r < map.height; ++r) {
    for (int c = 0; c < map.width; ++c) {
      if (c) out << ',';
      out << map.id_at(r, c);
    }
    out << '\n';
  }
}

}  // namespace letsne
