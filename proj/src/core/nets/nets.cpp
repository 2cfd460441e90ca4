// Copyright 2026 The GameIRL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "core/nets/nets.hpp"

#include <filesystem>

#include <nlohmann/json.hpp>

#include "core/util/fs.hpp"

namespace gameirl::nets {

void save_param_set(const ParamSet& set, const std::string& path) {
  const std::string bin = bin_path_for(path);
  nlohmann::json entries = nlohmann::json::array();
  std::size_t total = 0;
  for (const auto& item : set.items) {
    entries.push_back({{"name", item.name}, {"shape", item.shape}});
    total += item.data.size();
  }
  nlohmann::json manifest = {
      {"arch", set.arch},
      {"dtype", "float32"},
      {"entries", entries},
      {"blob", std::filesystem::path(bin).filename().string()},
  };
  write_text(path, manifest.dump(2) + "\n");
  std::vector<float> blob;
  blob.reserve(total);
  for (const auto& item : set.items) {
    blob.insert(blob.end(), item.data.begin(), item.data.end());
  }
  write_bytes(bin, blob.data(), blob.size() * sizeof(float));
}

ParamSet load_param_set(const std::string& path) {
  nlohmann::json manifest = nlohmann::json::parse(read_text(path));
  if (manifest.at("dtype").get<std::string>() != "float32") {
    throw UsageError("checkpoint dtype must be float32: " + path);
  }
  ParamSet set;
  set.arch = manifest.at("arch").get<std::string>();
  std::size_t total = 0;
  for (const auto& e : manifest.at("entries")) {
    ParamSet::Item item;
    item.name = e.at("name").get<std::string>();
    item.shape = e.at("shape").get<std::vector<int>>();
    std::size_t n = 1;
    for (int d : item.shape) n *= static_cast<std::size_t>(d);
    item.data.resize(n);
    total += n;
    set.items.push_back(std::move(item));
  }
  auto blob = read_bytes(std::filesystem::path(path).parent_path() /
                         manifest.at("blob").get<std::string>());
  if (blob.size() != total * sizeof(float)) {
    throw StageError("checkpoint blob: byte length " +
                     std::to_string(blob.size()) + " does not match manifest (" +
                     std::to_string(total * sizeof(float)) + ")");
  }
  std::size_t at = 0;
  for (auto& item : set.items) {
    std::memcpy(item.data.data(), blob.data() + at,
                item.data.size() * sizeof(float));
    at += item.data.size() * sizeof(float);
  }
  return set;
}

}  // namespace gameirl::nets
