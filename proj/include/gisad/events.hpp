#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gisad/gis_flow.hpp"

namespace gisad {

/// Columnar event collection: one conditional value m and one feature row
/// per event.
struct EventTable {
  std::vector<std::int64_t> ids;
  std::vector<double> m;
  RowMatrix x;
  std::string conditional_name = "m";
  std::vector<std::string> feature_names;

  std::size_t size() const { return m.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * dim(), dim()};
  }
};

}  // namespace gisad
