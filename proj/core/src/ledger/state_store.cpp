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

#include "pipebft/ledger/state_store.hpp"

#include <sqlite3.h>

#include <string>

namespace pipebft::ledger {
namespace {

class InMemoryStore final : public StateStore {
 public:
  explicit InMemoryStore(std::uint64_t active_set) : StateStore(active_set), values_(active_set) {
    for (std::uint64_t k = 0; k < active_set; ++k) values_[k] = initial_value(k);
  }

  std::vector<std::int64_t> apply_operations(std::span<const messages::Operation> ops) override {
    check_keys(ops);
    std::vector<std::int64_t> results;
    results.reserve(ops.size());
    for (const auto& op : ops) {
      results.push_back(std::exchange(values_[op.key], op.value));
    }
    return results;
  }

  std::int64_t read(std::uint64_t key) const override {
    if (key >= values_.size()) throw KeyOutOfRange("key " + std::to_string(key));
    return values_[key];
  }

  std::vector<std::pair<std::uint64_t, std::int64_t>> modified_records() const override {
    std::vector<std::pair<std::uint64_t, std::int64_t>> out;
    for (std::uint64_t k = 0; k < values_.size(); ++k) {
      if (values_[k] != initial_value(k)) out.emplace_back(k, values_[k]);
    }
    return out;
  }

  Backend backend() const override { return Backend::kInMemory; }

 private:
  std::vector<std::int64_t> values_;
};

// An SQLite table accessed synchronously: every request is one transaction
// and the caller blocks until SQLite returns. Rows are materialized on first
// write; an absent row reads as initial_value(key).
class SqliteStore final : public StateStore {
 public:
  SqliteStore(std::uint64_t active_set, const std::filesystem::path& file) : StateStore(active_set) {
    std::error_code ec;
    std::filesystem::remove(file, ec);
    std::filesystem::remove(file.string() + "-journal", ec);
    if (sqlite3_open(file.c_str(), &db_) != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw std::runtime_error("sqlite open " + file.string() + ": " + msg);
    }
    exec("CREATE TABLE kv (key INTEGER PRIMARY KEY, value INTEGER NOT NULL)");
    select_ = prepare("SELECT value FROM kv WHERE key = ?1");
    upsert_ = prepare(
        "INSERT INTO kv (key, value) VALUES (?1, ?2) "
        "ON CONFLICT(key) DO UPDATE SET value = excluded.value");
    begin_ = prepare("BEGIN");
    commit_ = prepare("COMMIT");
  }

  ~SqliteStore() override {
    for (sqlite3_stmt* s : {select_, upsert_, begin_, commit_}) sqlite3_finalize(s);
    sqlite3_close(db_);
  }

  std::vector<std::int64_t> apply_operations(std::span<const messages::Operation> ops) override {
    check_keys(ops);
    std::vector<std::int64_t> results;
    results.reserve(ops.size());
    step_done(begin_);
    for (const auto& op : ops) {
      results.push_back(lookup(op.key));
      sqlite3_bind_int64(upsert_, 1, static_cast<sqlite3_int64>(op.key));
      sqlite3_bind_int64(upsert_, 2, op.value);
      step_done(upsert_);
    }
    step_done(commit_);
    return results;
  }

  std::int64_t read(std::uint64_t key) const override {
    if (key >= active_set()) throw KeyOutOfRange("key " + std::to_string(key));
    return lookup(key);
  }

  std::vector<std::pair<std::uint64_t, std::int64_t>> modified_records() const override {
    std::vector<std::pair<std::uint64_t, std::int64_t>> out;
    sqlite3_stmt* all = prepare("SELECT key, value FROM kv ORDER BY key");
    while (sqlite3_step(all) == SQLITE_ROW) {
      const auto key = static_cast<std::uint64_t>(sqlite3_column_int64(all, 0));
      const std::int64_t value = sqlite3_column_int64(all, 1);
      if (value != initial_value(key)) out.emplace_back(key, value);
    }
    sqlite3_finalize(all);
    return out;
  }

  Backend backend() const override { return Backend::kFileBacked; }

 private:
  std::int64_t lookup(std::uint64_t key) const {
    sqlite3_bind_int64(select_, 1, static_cast<sqlite3_int64>(key));
    std::int64_t value = initial_value(key);
    const int rc = sqlite3_step(select_);
    if (rc == SQLITE_ROW) {
      value = sqlite3_column_int64(select_, 0);
    } else if (rc != SQLITE_DONE) {
      fail("select");
    }
    sqlite3_reset(select_);
    return value;
  }

  void step_done(sqlite3_stmt* stmt) {
    if (sqlite3_step(stmt) != SQLITE_DONE) fail("step");
    sqlite3_reset(stmt);
  }

  sqlite3_stmt* prepare(const char* sql) const {
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db_, sql, -1, &stmt, nullptr) != SQLITE_OK) fail(sql);
    return stmt;
  }

  void exec(const char* sql) {
    if (sqlite3_exec(db_, sql, nullptr, nullptr, nullptr) != SQLITE_OK) fail(sql);
  }

  [[noreturn]] void fail(const char* what) const {
    throw std::runtime_error(std::string("sqlite ") + what + ": " + sqlite3_errmsg(db_));
  }

  sqlite3* db_ = nullptr;
  sqlite3_stmt* select_ = nullptr;
  sqlite3_stmt* upsert_ = nullptr;
  sqlite3_stmt* begin_ = nullptr;
  sqlite3_stmt* commit_ = nullptr;
};

}  // namespace

std::string_view backend_name(Backend b) {
  return b == Backend::kInMemory ? "memory" : "sqlite";
}

Backend parse_backend(std::string_view name) {
  if (name == "memory" || name == "inmemory" || name == "in_memory") return Backend::kInMemory;
  if (name == "sqlite" || name == "file" || name == "filebacked") return Backend::kFileBacked;
  throw std::invalid_argument("unknown storage backend: " + std::string(name));
}

void StateStore::check_keys(std::span<const messages::Operation> ops) const {
  for (const auto& op : ops) {
    if (op.key >= active_set_) {
      throw KeyOutOfRange("key " + std::to_string(op.key) + " outside active set of " +
                          std::to_string(active_set_));
    }
  }
}

std::unique_ptr<StateStore> make_state_store(Backend backend, std::uint64_t active_set,
                                             const std::filesystem::path& file) {
  if (backend == Backend::kInMemory) return std::make_unique<InMemoryStore>(active_set);
  if (file.empty()) throw std::invalid_argument("file-backed store needs a path");
  return std::make_unique<SqliteStore>(active_set, file);
}

}  // namespace pipebft::ledger
