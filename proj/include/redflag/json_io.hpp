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

#include "json.hpp"
#include "redflag/corpus.hpp"
#include "redflag/model.hpp"

namespace redflag {

inline void to_json(nlohmann::json& j, const TaskSpec& spec) {
  j = nlohmann::json{{"name", spec.name},
                     {"kind", to_string(spec.kind)},
                     {"labels", spec.label_names},
                     {"selection_metric", spec.selection_metric}};
}

inline void from_json(const nlohmann::json& j, TaskSpec& spec) {
  spec.name = j.at("name").get<std::string>();
  spec.kind = task_kind_from_string(j.at("kind").get<std::string>());
  spec.label_names = j.value("labels", std::vector<std::string>{});
  spec.selection_metric = j.value("selection_metric", std::string{});
  spec.validate();
}

inline void to_json(nlohmann::json& j, const EncoderConfig& cfg) {
  j = nlohmann::json{{"num_layers", cfg.num_layers},   {"hidden_dim", cfg.hidden_dim},
                     {"num_heads", cfg.num_heads},     {"ff_dim", cfg.ff_dim},
                     {"vocab_size", cfg.vocab_size},   {"max_positions", cfg.max_positions},
                     {"dropout_p", cfg.dropout_p},     {"use_pooler", cfg.use_pooler}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& cfg) {
  cfg.num_layers = j.at("num_layers").get<int>();
  cfg.hidden_dim = j.at("hidden_dim").get<int>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.ff_dim = j.at("ff_dim").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.max_positions = j.at("max_positions").get<int>();
  cfg.dropout_p = j.at("dropout_p").get<double>();
  cfg.use_pooler = j.at("use_pooler").get<bool>();
  cfg.validate();
}

inline void to_json(nlohmann::json& j, const HeadSpec& head) {
  j = nlohmann::json{{"hidden_sizes", head.hidden_sizes},
                     {"output_dim", head.output_dim},
                     {"kind", to_string(head.kind)},
                     {"dropout_p", head.dropout_p}};
}

inline void from_json(const nlohmann::json& j, HeadSpec& head) {
  head.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
  head.output_dim = j.at("output_dim").get<int>();
  head.kind = task_kind_from_string(j.at("kind").get<std::string>());
  head.dropout_p = j.at("dropout_p").get<double>();
  head.validate();
}

}  // namespace redflag
