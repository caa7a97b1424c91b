#include "scandp/sparse_conv.hpp"

#include <algorithm>
#include <unordered_map>

namespace scandp {

namespace {

// Coordinate -> index lookup: a dense table over the bounding box when it is
// small enough, a hash map otherwise.
class CoordLookup {
 public:
  explicit CoordLookup(const std::vector<CellIndex>& coords) {
    if (coords.empty()) return;
    lo_ = hi_ = coords.front();
    for (const auto& c : coords) {
      lo_ = {std::min(lo_.i, c.i), std::min(lo_.j, c.j), std::min(lo_.k, c.k)};
      hi_ = {std::max(hi_.i, c.i), std::max(hi_.j, c.j), std::max(hi_.k, c.k)};
    }
    span_ = {hi_.i - lo_.i + 1, hi_.j - lo_.j + 1, hi_.k - lo_.k + 1};
    const double volume = double(span_[0]) * span_[1] * span_[2];
    dense_ = volume <= double(1 << 24);
    if (dense_) {
      table_.assign(static_cast<std::size_t>(volume), -1);
      for (std::size_t n = 0; n < coords.size(); ++n) table_[offset(coords[n])] = static_cast<std::int32_t>(n);
    } else {
      map_.reserve(coords.size());
      for (std::size_t n = 0; n < coords.size(); ++n) map_.emplace(coords[n].key(), static_cast<std::int32_t>(n));
    }
  }

  std::int32_t find(const CellIndex& c) const {
    if (dense_) {
      if (c.i < lo_.i || c.j < lo_.j || c.k < lo_.k || c.i > hi_.i || c.j > hi_.j || c.k > hi_.k) return -1;
      return table_[offset(c)];
    }
    const auto it = map_.find(c.key());
    return it == map_.end() ? -1 : it->second;
  }

 private:
  std::size_t offset(const CellIndex& c) const {
    return (static_cast<std::size_t>(c.k - lo_.k) * span_[1] + (c.j - lo_.j)) * span_[0] + (c.i - lo_.i);
  }

  CellIndex lo_{};
  CellIndex hi_{};
  std::array<std::int64_t, 3> span_{};
  bool dense_ = true;
  std::vector<std::int32_t> table_;
  std::unordered_map<std::uint64_t, std::int32_t> map_;
};

}  // namespace

Rulebook build_rulebook(const std::vector<CellIndex>& in_coords) {
  Rulebook book;
  book.in_count = in_coords.size();
  book.out_coords.reserve(in_coords.size() / 4 + 1);
  for (const auto& c : in_coords) book.out_coords.push_back({floor_half(c.i), floor_half(c.j), floor_half(c.k)});
  std::sort(book.out_coords.begin(), book.out_coords.end());
  book.out_coords.erase(std::unique(book.out_coords.begin(), book.out_coords.end()), book.out_coords.end());

  const CoordLookup lookup(in_coords);
  for (std::size_t o = 0; o < book.out_coords.size(); ++o) {
    const CellIndex& oc = book.out_coords[o];
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const std::int32_t n = lookup.find({2 * oc.i + dx, 2 * oc.j + dy, 2 * oc.k + dz});
          if (n < 0) continue;
          const int k = (dx + 1) * 9 + (dy + 1) * 3 + (dz + 1);
          book.in_index[k].push_back(n);
          book.out_index[k].push_back(static_cast<std::int32_t>(o));
        }
      }
    }
  }
  return book;
}

}  // namespace scandp
