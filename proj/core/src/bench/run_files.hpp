// Copyright 2026 The pipebft Authors
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


#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pipebft/common/types.hpp"

namespace pipebft::bench {

// Layout of one run directory shared by the orchestrator and its children.
class RunFiles {
 public:
  explicit RunFiles(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path config() const { return dir_ / "config.json"; }
  std::filesystem::path keys() const { return dir_ / "keys.json"; }
  std::filesystem::path ports_file() const { return dir_ / "ports.txt"; }
  std::filesystem::path window() const { return dir_ / "window.txt"; }
  std::filesystem::path replica_dir(NodeId id) const {
    return dir_ / ("replica-" + std::to_string(id));
  }
  std::filesystem::path replica_ready(NodeId id) const {
    return dir_ / ("replica-" + std::to_string(id) + ".ready");
  }
  std::filesystem::path replica_log(NodeId id) const {
    return dir_ / ("replica-" + std::to_string(id) + ".log");
  }
  std::filesystem::path client_dir() const { return dir_ / "client"; }
  std::filesystem::path client_started() const { return dir_ / "client.started"; }
  std::filesystem::path client_log() const { return dir_ / "client.log"; }

  // One "host port" line per replica id.
  std::vector<std::pair<std::string, std::uint16_t>> endpoints() const {
    std::ifstream in(ports_file());
    std::vector<std::pair<std::string, std::uint16_t>> out;
    std::string host;
    unsigned p = 0;
    while (in >> host >> p) out.emplace_back(host, static_cast<std::uint16_t>(p));
    return out;
  }

 private:
  std::filesystem::path dir_;
};

// Written to a temporary name and renamed so readers never see a partial file.
inline void write_marker(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  std::ofstream(tmp) << content << '\n';
  std::filesystem::rename(tmp, path);
}

inline std::optional<std::string> read_marker(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string s;
  std::getline(in, s);
  return s;
}

// Measurement window as two absolute monotonic timestamps.
inline std::optional<std::pair<std::int64_t, std::int64_t>> read_window(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  std::int64_t a = 0, b = 0;
  if (!(in >> a >> b)) return std::nullopt;
  return std::pair{a, b};
}

}  // namespace pipebft::bench
