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

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace pipebft::pipeline {

struct PoolStats {
  std::uint64_t acquired = 0;
  std::uint64_t released = 0;
  std::uint64_t fresh_allocations = 0;  // acquires the free list could not serve
  std::uint64_t high_water = 0;         // most objects outstanding at once
  std::size_t free_objects = 0;
  std::size_t capacity = 0;
};

// Free list of pre-allocated objects. Acquire never blocks: when the list is
// empty a fresh object is allocated and counted. Released objects beyond the
// configured capacity are freed. The pool must outlive every handle.
template <typename T>
class BufferPool {
 public:
  using Reset = std::function<void(T&)>;

  struct Returner {
    BufferPool* pool = nullptr;
    void operator()(T* obj) const { pool->release(obj); }
  };
  using Handle = std::unique_ptr<T, Returner>;

  explicit BufferPool(std::size_t capacity, Reset reset = [](T& obj) { obj = T{}; })
      : capacity_(capacity), reset_(std::move(reset)) {
    free_.reserve(capacity);
    for (std::size_t i = 0; i < capacity; ++i) free_.push_back(new T());
  }

  ~BufferPool() {
    for (T* obj : free_) delete obj;
  }

  BufferPool(const BufferPool&) = delete;
  BufferPool& operator=(const BufferPool&) = delete;

  Handle acquire() {
    T* obj = nullptr;
    {
      std::lock_guard lock(mu_);
      ++acquired_;
      ++outstanding_;
      high_water_ = std::max(high_water_, outstanding_);
      if (!free_.empty()) {
        obj = free_.back();
        free_.pop_back();
      } else {
        ++fresh_;
      }
    }
    if (obj == nullptr) obj = new T();
    return Handle(obj, Returner{this});
  }

  std::shared_ptr<T> acquire_shared() {
    Handle h = acquire();
    return std::shared_ptr<T>(h.release(), Returner{this});
  }

  PoolStats stats() const {
    std::lock_guard lock(mu_);
    return {acquired_, released_, fresh_, high_water_, free_.size(), capacity_};
  }

 private:
  void release(T* obj) {
    reset_(*obj);
    std::lock_guard lock(mu_);
    ++released_;
    --outstanding_;
    if (free_.size() < capacity_) {
      free_.push_back(obj);
      obj = nullptr;
    }
    if (obj != nullptr) delete obj;
  }

  const std::size_t capacity_;
  Reset reset_;
  mutable std::mutex mu_;
  std::vector<T*> free_;
  std::uint64_t acquired_ = 0;
  std::uint64_t released_ = 0;
  std::uint64_t fresh_ = 0;
  std::uint64_t outstanding_ = 0;
  std::uint64_t high_water_ = 0;
};

}  // namespace pipebft::pipeline
