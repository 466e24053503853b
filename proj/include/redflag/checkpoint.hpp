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

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "redflag/json_io.hpp"
#include "redflag/model.hpp"

namespace redflag {

/// Checkpoint directory layout:
///   manifest.json — tensor names, shapes, byte offsets (contiguous, exhaustive)
///   weights.bin   — little-endian float32 values, column-major per tensor
///   config.json   — encoder config + head spec + task spec
///
/// Values are stored as float32 regardless of the in-memory scalar; loading a
/// float model therefore reproduces it bit for bit, while double models are
/// rounded to float32 precision on save.
namespace checkpoint_detail {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kWeightsFile = "weights.bin";
constexpr const char* kConfigFile = "config.json";

inline void write_f32_le(std::ofstream& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                         static_cast<char>((bits >> 16) & 0xFF),
                         static_cast<char>((bits >> 24) & 0xFF)};
  out.write(bytes, 4);
}

inline float read_f32_le(const unsigned char* bytes) {
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace checkpoint_detail

template <typename Scalar>
void save_checkpoint(const TaskModel<Scalar>& model, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = "redflag-checkpoint-v1";
  manifest["dtype"] = "f32";
  auto tensors = nlohmann::json::array();

  std::ofstream blob(dir / checkpoint_detail::kWeightsFile, std::ios::binary);
  if (!blob) throw DataError("cannot write " + (dir / checkpoint_detail::kWeightsFile).string());

  std::uint64_t offset = 0;
  for (const auto& item : model.params.items()) {
    nlohmann::json entry;
    entry["name"] = item.name;
    entry["rows"] = item.value.rows();
    entry["cols"] = item.value.cols();
    entry["offset"] = offset;
    tensors.push_back(entry);
    for (Eigen::Index i = 0; i < item.value.size(); ++i)
      checkpoint_detail::write_f32_le(blob, static_cast<float>(item.value.data()[i]));
    offset += static_cast<std::uint64_t>(item.value.size()) * 4;
  }
  manifest["tensors"] = tensors;
  manifest["total_bytes"] = offset;
  blob.close();

  std::ofstream manifest_out(dir / checkpoint_detail::kManifestFile);
  if (!manifest_out)
    throw DataError("cannot write " + (dir / checkpoint_detail::kManifestFile).string());
  manifest_out << manifest.dump(2) << '\n';

  nlohmann::json config;
  config["encoder"] = model.config;
  config["head"] = model.head;
  config["task"] = model.task;
  std::ofstream config_out(dir / checkpoint_detail::kConfigFile);
  if (!config_out)
    throw DataError("cannot write " + (dir / checkpoint_detail::kConfigFile).string());
  config_out << config.dump(2) << '\n';
}

template <typename Scalar>
TaskModel<Scalar> load_checkpoint(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto read_json = [](const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json obj;
    try {
      in >> obj;
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    return obj;
  };

  const nlohmann::json config = read_json(dir / checkpoint_detail::kConfigFile);
  TaskModel<Scalar> model;
  model.config = config.at("encoder").get<EncoderConfig>();
  model.head = config.at("head").get<HeadSpec>();
  model.task = config.at("task").get<TaskSpec>();

  const nlohmann::json manifest = read_json(dir / checkpoint_detail::kManifestFile);
  if (manifest.value("dtype", "") != "f32")
    throw DataError("unsupported checkpoint dtype in " + dir.string());

  std::ifstream blob(dir / checkpoint_detail::kWeightsFile, std::ios::binary);
  if (!blob) throw DataError("cannot open " + (dir / checkpoint_detail::kWeightsFile).string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)),
                                   std::istreambuf_iterator<char>());

  const auto layout = parameter_layout(model.config, model.head);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != layout.size())
    throw DataError("checkpoint manifest lists " + std::to_string(tensors.size()) +
                    " tensors, config expects " + std::to_string(layout.size()));

  std::uint64_t expected_offset = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& entry = tensors[i];
    const std::string name = entry.at("name").get<std::string>();
    if (name != layout[i].name)
      throw DataError("checkpoint tensor '" + name + "' does not match expected '" +
                      layout[i].name + "'");
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    if (rows != layout[i].rows || cols != layout[i].cols)
      throw DataError("shape mismatch for tensor '" + name + "': checkpoint " +
                      std::to_string(rows) + "x" + std::to_string(cols) + ", config " +
                      std::to_string(layout[i].rows) + "x" + std::to_string(layout[i].cols));
    const auto offset = entry.at("offset").get<std::uint64_t>();
    if (offset != expected_offset)
      throw DataError("non-contiguous offset for tensor '" + name + "'");
    const std::uint64_t byte_count = static_cast<std::uint64_t>(rows * cols) * 4;
    if (offset + byte_count > bytes.size())
      throw DataError("weights blob truncated at tensor '" + name + "'");

    MatX<Scalar>& tensor = model.params.add(name, rows, cols);
    for (Eigen::Index j = 0; j < tensor.size(); ++j)
      tensor.data()[j] = static_cast<Scalar>(checkpoint_detail::read_f32_le(
          bytes.data() + offset + static_cast<std::uint64_t>(j) * 4));
    expected_offset = offset + byte_count;
  }
  if (expected_offset != bytes.size())
    throw DataError("weights blob has " + std::to_string(bytes.size()) +
                    " bytes, manifest covers " + std::to_string(expected_offset));
  if (manifest.contains("total_bytes") &&
      manifest.at("total_bytes").get<std::uint64_t>() != expected_offset)
    throw DataError("manifest total_bytes does not match tensor spans");
  return model;
}

}  // namespace redflag
