#pragma once

#include <string>
#include <vector>

#include "letsne/common.hpp"

namespace letsne {

/// Disjoint partition of an image grid into 4-connected regions. Ids are
/// contiguous 0..region_count-1 and stored per pixel in row-major order.
struct RegionMap {
  int height = 0;
  int width = 0;
  std::vector<int> ids;
  int region_count = 0;

  Index pixels() const { return static_cast<Index>(height) * width; }
  int id_at(int row, int col) const { return ids[static_cast<size_t>(row) * width + col]; }
};

/// Throws unless the map is a valid partition: contiguous nonempty ids
/// covering the grid, every region 4-connected.
void validate_region_map(const RegionMap& map);

/// SLIC superpixels. `channels` holds 1 or 3 height x width planes scaled to
/// [0,1]. Seeds sit on a regular grid; pixels are assigned within a 2Sx2S
/// window by d_color + (compactness/S)*d_xy; a post-pass absorbs fragments
/// that lost 4-connectivity into the largest adjacent region.
RegionMap slic(const std::vector<Matrix>& channels, int target_regions,
               double compactness, int iters);

/// Greedy agglomeration: while the closest adjacent pair of regions (by mean
/// feature distance over `channels`) is below `threshold`, merge it.
RegionMap merge_regions(const RegionMap& map, const std::vector<Matrix>& channels,
                        double threshold);

/// CSV grid of integer region ids. Loading repairs non-contiguous ids by
/// relabelling and rejects disconnected regions.
RegionMap load_region_map(const std::string& path);
void save_region_map(const RegionMap& map, const std::string& path);

}  // namespace letsne
