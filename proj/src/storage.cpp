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

#include "mrp/storage.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "mrp/types.hpp"

namespace mrp {

namespace fs = std::filesystem;

namespace {

class FileMedium : public StableMedium {
 public:
  explicit FileMedium(std::string path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR | O_APPEND, 0644);
    if (fd_ < 0) throw StorageError("open " + path_ + ": " + std::strerror(errno));
  }

  ~FileMedium() override {
    if (fd_ >= 0) ::close(fd_);
  }

  std::vector<uint8_t> read_all() override {
    off_t size = ::lseek(fd_, 0, SEEK_END);
    if (size < 0) throw StorageError("lseek " + path_);
    std::vector<uint8_t> out(static_cast<size_t>(size));
    size_t got = 0;
    while (got < out.size()) {
      ssize_t n = ::pread(fd_, out.data() + got, out.size() - got, static_cast<off_t>(got));
      if (n < 0) throw StorageError("pread " + path_ + ": " + std::strerror(errno));
      if (n == 0) break;
      got += static_cast<size_t>(n);
    }
    out.resize(got);
    return out;
  }

  void append(std::span<const uint8_t> bytes, bool sync) override {
    size_t off = 0;
    while (off < bytes.size()) {
      ssize_t n = ::write(fd_, bytes.data() + off, bytes.size() - off);
      if (n < 0) throw StorageError("write " + path_ + ": " + std::strerror(errno));
      off += static_cast<size_t>(n);
    }
    if (sync && ::fdatasync(fd_) != 0) throw StorageError("fdatasync " + path_);
  }

  void rewrite(std::span<const uint8_t> bytes) override {
    std::string tmp = path_ + ".tmp";
    int tfd = ::open(tmp.c_str(), O_CREAT | O_TRUNC | O_WRONLY, 0644);
    if (tfd < 0) throw StorageError("open " + tmp + ": " + std::strerror(errno));
    size_t off = 0;
    while (off < bytes.size()) {
      ssize_t n = ::write(tfd, bytes.data() + off, bytes.size() - off);
      if (n < 0) {
        ::close(tfd);
        throw StorageError("write " + tmp);
      }
      off += static_cast<size_t>(n);
    }
    ::fdatasync(tfd);
    ::close(tfd);
    if (::rename(tmp.c_str(), path_.c_str()) != 0) throw StorageError("rename " + tmp);
    ::close(fd_);
    fd_ = ::open(path_.c_str(), O_RDWR | O_APPEND, 0644);
    if (fd_ < 0) throw StorageError("reopen " + path_);
  }

 private:
  std::string path_;
  int fd_ = -1;
};

class MemMedium : public StableMedium {
 public:
  MemMedium(std::shared_ptr<std::map<std::string, std::vector<uint8_t>>> files, std::string name)
      : files_(std::move(files)), name_(std::move(name)) {}

  std::vector<uint8_t> read_all() override { return (*files_)[name_]; }

  void append(std::span<const uint8_t> bytes, bool) override {
    auto& f = (*files_)[name_];
    f.insert(f.end(), bytes.begin(), bytes.end());
  }

  void rewrite(std::span<const uint8_t> bytes) override {
    (*files_)[name_] = std::vector<uint8_t>(bytes.begin(), bytes.end());
  }

 private:
  std::shared_ptr<std::map<std::string, std::vector<uint8_t>>> files_;
  std::string name_;
};

}  // namespace

DirStorageEnv::DirStorageEnv(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StorageError("create_directories " + dir_ + ": " + ec.message());
}

std::unique_ptr<StableMedium> DirStorageEnv::open(const std::string& name) {
  return std::make_unique<FileMedium>(dir_ + "/" + name);
}

void DirStorageEnv::write_file(const std::string& name, std::span<const uint8_t> bytes) {
  std::string path = dir_ + "/" + name;
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("open " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StorageError("write " + tmp);
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) throw StorageError("rename " + tmp);
}

std::optional<std::vector<uint8_t>> DirStorageEnv::read_file(const std::string& name) {
  std::ifstream in(dir_ + "/" + name, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<uint8_t> out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

void DirStorageEnv::remove_file(const std::string& name) {
  std::error_code ec;
  fs::remove(dir_ + "/" + name, ec);
}

std::unique_ptr<StableMedium> MemStorageEnv::open(const std::string& name) {
  return std::make_unique<MemMedium>(files_, name);
}

void MemStorageEnv::write_file(const std::string& name, std::span<const uint8_t> bytes) {
  (*files_)[name] = std::vector<uint8_t>(bytes.begin(), bytes.end());
}

std::optional<std::vector<uint8_t>> MemStorageEnv::read_file(const std::string& name) {
  auto it = files_->find(name);
  if (it == files_->end()) return std::nullopt;
  return it->second;
}

void MemStorageEnv::remove_file(const std::string& name) { files_->erase(name); }

size_t MemStorageEnv::total_bytes() const {
  size_t n = 0;
  for (const auto& [k, v] : *files_) n += v.size();
  return n;
}

}  // namespace mrp
