/* Copyright 2026 The redflag authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "redflag/common.hpp"
#include "redflag/linalg.hpp"

namespace redflag {

/// Named tensor store with a stable registration order. All trainable state
/// of a model lives here; gradients and optimizer moments mirror the same
/// names and shapes.
template <typename Scalar>
class ParamStore {
 public:
  struct Item {
    std::string name;
    MatX<Scalar> value;
  };

  MatX<Scalar>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name) > 0) throw ConfigError("duplicate tensor name '" + name + "'");
    index_.emplace(name, items_.size());
    items_.push_back(Item{name, MatX<Scalar>::Zero(rows, cols)});
    return items_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  MatX<Scalar>& at(const std::string& name) {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown tensor '" + name + "'");
    return items_[it->second].value;
  }

  const MatX<Scalar>& at(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown tensor '" + name + "'");
    return items_[it->second].value;
  }

  std::size_t tensor_count() const { return items_.size(); }

  std::size_t scalar_count() const {
    std::size_t total = 0;
    for (const auto& item : items_) total += static_cast<std::size_t>(item.value.size());
    return total;
  }

  bool all_finite() const {
    for (const auto& item : items_)
      if (!item.value.allFinite()) return false;
    return true;
  }

  /// Name of the first non-finite tensor, or empty when all are finite.
  std::string first_non_finite() const {
    for (const auto& item : items_)
      if (!item.value.allFinite()) return item.name;
    return {};
  }

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  const std::vector<Item>& items() const { return items_; }
  std::vector<Item>& items() { return items_; }

  /// Same names and shapes, all values zero.
  static ParamStore zeros_like(const ParamStore& other) {
    ParamStore out;
    for (const auto& item : other.items_)
      out.add(item.name, item.value.rows(), item.value.cols());
    return out;
  }

 private:
  std::vector<Item> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace redflag
