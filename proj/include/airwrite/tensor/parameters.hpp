#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "airwrite/error.hpp"
#include "airwrite/tensor/value.hpp"

namespace airwrite {

/// Learnable parameters keyed by dot-separated path, iterated in path order.
class ParameterSet {
 public:
  using Map = std::map<std::string, Value>;

  void add(const std::string& path, Value value) {
    if (!value.requires_grad()) {
      throw Error(ErrorKind::invalid_config, "parameter '" + path + "' does not require grad");
    }
    if (!values_.emplace(path, std::move(value)).second) {
      throw Error(ErrorKind::invalid_config, "duplicate parameter path '" + path + "'");
    }
  }

  const Value& at(const std::string& path) const {
    auto it = values_.find(path);
    if (it == values_.end()) throw Error(ErrorKind::invalid_config, "no parameter '" + path + "'");
    return it->second;
  }
  Value& at(const std::string& path) {
    auto it = values_.find(path);
    if (it == values_.end()) throw Error(ErrorKind::invalid_config, "no parameter '" + path + "'");
    return it->second;
  }

  bool contains(const std::string& path) const { return values_.count(path) != 0; }
  std::size_t size() const { return values_.size(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [path, v] : values_) n += v.size();
    return n;
  }

  void zero_grad() {
    for (auto& [path, v] : values_) v.zero_grad();
  }

  Map::iterator begin() { return values_.begin(); }
  Map::iterator end() { return values_.end(); }
  Map::const_iterator begin() const { return values_.begin(); }
  Map::const_iterator end() const { return values_.end(); }

 private:
  Map values_;
};

namespace init {

/// Uniform in +-sqrt(1/fan_in).
inline Value uniform_fan_in(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(shape_size(shape));
  for (double& v : data) v = dist(rng);
  return Value::parameter(std::move(shape), std::move(data));
}

inline Value filled(Shape shape, double x) {
  std::vector<double> data(shape_size(shape), x);
  return Value::parameter(std::move(shape), std::move(data));
}

}  // namespace init

}  // namespace airwrite
