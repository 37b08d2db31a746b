/*
 * Copyright (c) 2026-present, the mrpaxos authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mrp {

// One durable byte store.  Contents survive process crashes; `rewrite`
// replaces the whole content atomically.
class StableMedium {
 public:
  virtual ~StableMedium() = default;
  virtual std::vector<uint8_t> read_all() = 0;
  virtual void append(std::span<const uint8_t> bytes, bool sync) = 0;
  virtual void rewrite(std::span<const uint8_t> bytes) = 0;
};

// Per-process durable namespace: ring logs, checkpoints.
class StorageEnv {
 public:
  virtual ~StorageEnv() = default;
  virtual std::unique_ptr<StableMedium> open(const std::string& name) = 0;
  virtual void write_file(const std::string& name, std::span<const uint8_t> bytes) = 0;
  virtual std::optional<std::vector<uint8_t>> read_file(const std::string& name) = 0;
  virtual void remove_file(const std::string& name) = 0;
};

// Backed by files under a directory; whole-file writes go through a temp
// file plus rename.
class DirStorageEnv : public StorageEnv {
 public:
  explicit DirStorageEnv(std::string dir);
  std::unique_ptr<StableMedium> open(const std::string& name) override;
  void write_file(const std::string& name, std::span<const uint8_t> bytes) override;
  std::optional<std::vector<uint8_t>> read_file(const std::string& name) override;
  void remove_file(const std::string& name) override;

 private:
  std::string dir_;
};

// In-memory stand-in for the simulator; shared so contents outlive a
// simulated crash of the owning process.
class MemStorageEnv : public StorageEnv {
 public:
  std::unique_ptr<StableMedium> open(const std::string& name) override;
  void write_file(const std::string& name, std::span<const uint8_t> bytes) override;
  std::optional<std::vector<uint8_t>> read_file(const std::string& name) override;
  void remove_file(const std::string& name) override;

  // Total bytes across all stores, for tests.
  size_t total_bytes() const;

 private:
  std::shared_ptr<std::map<std::string, std::vector<uint8_t>>> files_ =
      std::make_shared<std::map<std::string, std::vector<uint8_t>>>();
};

}  // namespace mrp
