#pragma once

// Equal-width histogram over a finite sample. Used by the cost profile and
// the summary-normality report; emitted as a (bin_edge, count) table.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sbikit/core/errors.hpp"
#include "sbikit/io/csv.hpp"

namespace sbikit {

// edges has counts.size() + 1 entries; bin i covers [edges[i], edges[i+1]),
// with the last bin closed on the right. A zero-spread sample collapses to a
// single bin holding everything.
struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;

  std::size_t total() const {
    std::size_t n = 0;
    for (std::size_t c : counts) n += c;
    return n;
  }
};

inline Histogram make_histogram(const std::vector<double>& x,
                                std::size_t n_bins = 20) {
  if (x.empty()) throw DomainError("make_histogram: empty sample");
  if (n_bins == 0) throw DomainError("make_histogram: n_bins must be >= 1");
  for (double v : x)
    if (!std::isfinite(v))
      throw DomainError("make_histogram: non-finite sample value");

  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  Histogram h;
  if (hi == lo) {
    h.edges = {lo, hi};
    h.counts = {x.size()};
    return h;
  }

  h.edges.resize(n_bins + 1);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i <= n_bins; ++i)
    h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;

  h.counts.assign(n_bins, 0);
  for (double v : x) {
    std::size_t bin = static_cast<std::size_t>((v - lo) / width);
    bin = std::min(bin, n_bins - 1);
    ++h.counts[bin];
  }
  return h;
}

// One row per bin carrying its left edge; a final row carries the right edge
// of the last bin with a zero count, so the edges round-trip through the CSV.
inline CsvTable histogram_table(const Histogram& h) {
  CsvTable table;
  table.header = {"bin_edge", "count"};
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    table.rows.push_back({h.edges[i], static_cast<double>(h.counts[i])});
  table.rows.push_back({h.edges.back(), 0.0});
  return table;
}

}  // namespace sbikit
