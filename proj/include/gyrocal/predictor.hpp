#pragma once

#include <cstddef>
#include <vector>

#include "gyrocal/matrix.hpp"

namespace gyrocal {

/// Anything that maps a channels x S window to one bias per channel.
class BiasPredictor {
 public:
  virtual ~BiasPredictor() = default;

  virtual std::size_t in_channels() const = 0;
  virtual std::size_t window_len() const = 0;
  virtual std::vector<double> predict(const Matrix& window) const = 0;
};

}  // namespace gyrocal
